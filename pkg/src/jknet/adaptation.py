"""Discrete-time graph adaptation: eliminate the weakest species, resample.

One update: read the equilibrium of the current graph, collect the
minimum-prevalence vertices, pick one uniformly at random, redraw its row
and column with edge probability p, and solve the new equilibrium (the
vertex dynamics are treated as infinitely fast, so each graph is seen
only through its equilibrium). Traces record per-step structure metrics
plus the first steps at which a cycle and a graph-spanning autocatalytic
set appear.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .dynamics import EquilibriumResult, equilibrium
from .graph import (
    InteractionMatrix,
    ModelParams,
    has_directed_cycle,
    has_undirected_cycle,
    is_acs,
    resample_vertex,
    sample_er_digraph,
)
from .rng import stream

__all__ = [
    "AdaptiveState",
    "StepRecord",
    "AdaptiveTrace",
    "min_prevalence_set",
    "jk_step",
    "run_adaptive",
    "plant_directed_cycle",
    "trace_to_json_lines",
    "trace_from_json_lines",
]

STOP_MODES = ("none", "first_cycle", "full_acs")


@dataclass(frozen=True, eq=False)
class AdaptiveState:
    """Graph and its equilibrium at discrete step s."""

    s: int
    matrix: InteractionMatrix
    x_star: EquilibriumResult


@dataclass(frozen=True, eq=False)
class StepRecord:
    """Metrics of the state at step s and the vertex chosen to leave it.

    ``chosen`` is None for the final state of a run (no further update).
    ``lam`` is |C x_*|_1, which equals the leading eigenvalue on an
    ACS-supported equilibrium and 0 on a terminal-supported one.
    """

    s: int
    j_min_set: tuple
    chosen: int | None
    lam: float
    support_size: int
    directed_cycle: bool
    full_acs: bool


@dataclass(eq=False)
class AdaptiveTrace:
    """Full record of one adaptive run."""

    params: ModelParams
    seed: int
    records: list = field(default_factory=list)
    first_cycle_step: int | None = None
    full_acs_step: int | None = None
    options: dict = field(default_factory=dict)
    invariant_violations: int = 0

    @property
    def steps(self) -> int:
        return len(self.records) - 1


def min_prevalence_set(x_star, rel_tol: float = 1e-9) -> np.ndarray:
    """Floating-point tie set of the minimum concentration.

    Returns {j : x_j <= min_k x_k + rel_tol * max(1, min_k)}.
    """
    x = np.asarray(x_star, dtype=float)
    m = float(x.min())
    return np.flatnonzero(x <= m + rel_tol * max(1.0, m))


def _carry_state(prev: np.ndarray, j: int) -> np.ndarray:
    x = prev.copy()
    x[j] = 1.0 / x.size
    return x / x.sum()


def jk_step(state: AdaptiveState, p: float, rng: np.random.Generator,
            tol: float = 1e-10, zero_tol: float = 1e-9,
            rel_tol: float = 1e-9, x0_mode: str = "uniform"):
    """One adaptive update; returns (next state, record of this state).

    ``x0_mode`` picks the initial condition the new equilibrium is read
    from: "uniform" restarts at the barycentre every epoch, "carry"
    reuses the previous equilibrium with the resampled vertex reset to
    1/d (then renormalised).
    """
    x = state.x_star.x_star
    jset = min_prevalence_set(x, rel_tol)
    chosen = int(jset[rng.integers(jset.size)])
    new_matrix = resample_vertex(state.matrix, chosen, p, rng)
    if x0_mode == "uniform":
        x0 = None
    elif x0_mode == "carry":
        x0 = _carry_state(x, chosen)
    else:
        raise ValueError(f"unknown x0_mode {x0_mode!r}")
    new_eq = equilibrium(new_matrix, x0=x0, tol=tol, zero_tol=zero_tol)
    record = _record_state(state, chosen, jset)
    return AdaptiveState(state.s + 1, new_matrix, new_eq), record


def _record_state(state: AdaptiveState, chosen: int | None,
                  jset: np.ndarray | None = None,
                  rel_tol: float = 1e-9) -> StepRecord:
    if jset is None:
        jset = min_prevalence_set(state.x_star.x_star, rel_tol)
    a = state.matrix.as_float()
    lam = float((a @ state.x_star.x_star).sum())
    return StepRecord(
        s=state.s,
        j_min_set=tuple(int(v) for v in jset),
        chosen=chosen,
        lam=lam,
        support_size=int(state.x_star.support.size),
        directed_cycle=has_directed_cycle(state.matrix),
        full_acs=is_acs(state.matrix, range(state.matrix.d)),
    )


def plant_directed_cycle(C: InteractionMatrix, length: int = 2) -> InteractionMatrix:
    """Overlay a directed cycle on vertices 0..length-1."""
    if not 2 <= length <= C.d:
        raise ValueError("cycle length must be in [2, d]")
    a = np.array(C.entries, dtype=np.int8)
    for i in range(length):
        a[(i + 1) % length, i] = 1
    return InteractionMatrix(a)


def run_adaptive(params: ModelParams, seed: int, max_steps: int,
                 stop: str = "none", cycle_kind: str = "directed",
                 x0_mode: str = "uniform", plant_cycle: int | None = None,
                 tol: float = 1e-10, zero_tol: float = 1e-9,
                 rel_tol: float = 1e-9,
                 check_invariants: bool = True) -> AdaptiveTrace:
    """Run the adaptive loop from a freshly sampled graph.

    Stops at ``max_steps`` updates or as soon as the stop condition holds:
    ``first_cycle`` waits for a cycle of ``cycle_kind`` ("directed" or
    "undirected" simple projection), ``full_acs`` for the whole vertex
    set to be autocatalytic. Events are recorded either way; a trace that
    exhausted the budget simply leaves them None (censored).

    ``check_invariants`` counts violations of the preservation law: while
    some species sits at zero concentration, the chosen vertex must be one
    of them, the induced subgraph on the support must survive the update
    unchanged, and a directed cycle must persist.
    """
    if stop not in STOP_MODES:
        raise ValueError(f"stop must be one of {STOP_MODES}")
    if cycle_kind not in ("directed", "undirected"):
        raise ValueError("cycle_kind must be 'directed' or 'undirected'")
    if max_steps < 1:
        raise ValueError("max_steps must be >= 1")

    rng = stream(seed)
    matrix = sample_er_digraph(params, rng)
    if plant_cycle is not None:
        matrix = plant_directed_cycle(matrix, plant_cycle)
    state = AdaptiveState(0, matrix, equilibrium(matrix, tol=tol, zero_tol=zero_tol))

    options = {"max_steps": max_steps, "stop": stop, "cycle_kind": cycle_kind,
               "x0_mode": x0_mode, "plant_cycle": plant_cycle, "tol": tol,
               "zero_tol": zero_tol, "rel_tol": rel_tol}
    trace = AdaptiveTrace(params=params, seed=seed, options=options)

    while True:
        directed_here = has_directed_cycle(state.matrix)
        if cycle_kind == "directed":
            cycle_here = directed_here
        else:
            cycle_here = has_undirected_cycle(state.matrix)
        acs_here = is_acs(state.matrix, range(params.d))
        if trace.first_cycle_step is None and cycle_here:
            trace.first_cycle_step = state.s
        if trace.full_acs_step is None and acs_here:
            trace.full_acs_step = state.s

        done = (
            state.s >= max_steps
            or (stop == "first_cycle" and trace.first_cycle_step is not None)
            or (stop == "full_acs" and trace.full_acs_step is not None)
        )
        if done:
            trace.records.append(_record_state(state, None, rel_tol=rel_tol))
            break

        new_state, record = jk_step(state, params.p, rng, tol=tol,
                                    zero_tol=zero_tol, rel_tol=rel_tol,
                                    x0_mode=x0_mode)
        trace.records.append(record)

        if check_invariants and state.x_star.zero_set.size > 0:
            sup = state.x_star.support
            ok = record.chosen in set(state.x_star.zero_set.tolist())
            old = state.matrix.entries[np.ix_(sup, sup)]
            new = new_state.matrix.entries[np.ix_(sup, sup)]
            ok = ok and bool((old == new).all())
            if directed_here:
                ok = ok and has_directed_cycle(new_state.matrix)
            if not ok:
                trace.invariant_violations += 1

        state = new_state
    return trace


# ---------------------------------------------------------------------------
# Trace serialisation (JSON lines: one header, then one record per line)
# ---------------------------------------------------------------------------

def _record_to_dict(rec: StepRecord) -> dict:
    return {
        "s": rec.s,
        "j_min_set": list(rec.j_min_set),
        "chosen": rec.chosen,
        "lambda": rec.lam,
        "support_size": rec.support_size,
        "directed_cycle": rec.directed_cycle,
        "full_acs": rec.full_acs,
    }


def trace_to_json_lines(trace: AdaptiveTrace) -> str:
    header = {
        "d": trace.params.d,
        "p": trace.params.p,
        "theta": trace.params.theta,
        "seed": trace.seed,
        "options": trace.options,
        "first_cycle_step": trace.first_cycle_step,
        "full_acs_step": trace.full_acs_step,
        "invariant_violations": trace.invariant_violations,
    }
    lines = [json.dumps(header, sort_keys=True)]
    lines.extend(json.dumps(_record_to_dict(r), sort_keys=True)
                 for r in trace.records)
    return "\n".join(lines) + "\n"


def trace_from_json_lines(text: str) -> AdaptiveTrace:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    header = json.loads(lines[0])
    trace = AdaptiveTrace(
        params=ModelParams(d=header["d"], p=header["p"]),
        seed=header["seed"],
        options=header.get("options", {}),
        first_cycle_step=header.get("first_cycle_step"),
        full_acs_step=header.get("full_acs_step"),
        invariant_violations=header.get("invariant_violations", 0),
    )
    for ln in lines[1:]:
        obj = json.loads(ln)
        trace.records.append(StepRecord(
            s=obj["s"],
            j_min_set=tuple(obj["j_min_set"]),
            chosen=obj["chosen"],
            lam=obj["lambda"],
            support_size=obj["support_size"],
            directed_cycle=obj["directed_cycle"],
            full_acs=obj["full_acs"],
        ))
    return trace
