"""Signed-interaction variant and its mass-conservation failure.

This model draws real coefficients (off-diagonal in [-1, 1], diagonal in
[-1, 0]) and clamps each component derivative to zero at the boundary
when it points outward: x_i' = f_i unless x_i = 0 and f_i < 0, with
f_i = (Cx)_i - x_i * sum_k (Cx)_k. In the simplex interior the f_i sum to
zero identically, so mass is conserved by the equations themselves; once
a component is clamped the remaining derivatives sum to -f_r != 0 in
general and total mass drifts. The driver here integrates until a
boundary contact with outward-pointing derivative occurs and reports the
witness together with the subsequent mass drift.

Renormalisation is deliberately NOT applied: it would silently repair
exactly the defect being demonstrated.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rng import stream

__all__ = [
    "SignedMatrix",
    "ConstrainedRun",
    "InconsistencyReport",
    "sample_signed",
    "constrained_field",
    "integrate_constrained",
    "demonstrate_inconsistency",
    "report_to_json_dict",
]

BOUNDARY_ATOL = 1e-12


@dataclass(frozen=True, eq=False)
class SignedMatrix:
    """Real d x d coefficients with an explicit presence mask.

    Present off-diagonal entries lie in [-1, 1], present diagonal entries
    in [-1, 0]; absent entries are exactly zero.
    """

    entries: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=float)
        m = np.asarray(self.mask, dtype=bool)
        if a.shape != m.shape or a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("entries and mask must be equal square matrices")
        if np.abs(a[~m]).max(initial=0.0) != 0.0:
            raise ValueError("absent entries must be exactly zero")
        off = ~np.eye(a.shape[0], dtype=bool)
        if np.abs(a[m & off]).max(initial=0.0) > 1.0:
            raise ValueError("present off-diagonal entries must lie in [-1, 1]")
        diag = np.diagonal(a)
        dmask = np.diagonal(m)
        if dmask.any() and (diag[dmask].max(initial=-1.0) > 0.0
                            or diag[dmask].min(initial=0.0) < -1.0):
            raise ValueError("present diagonal entries must lie in [-1, 0]")
        a = a.copy()
        a.setflags(write=False)
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "entries", a)
        object.__setattr__(self, "mask", m)

    @property
    def d(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True, eq=False)
class ConstrainedRun:
    """Trajectory of the clamped system with contact bookkeeping."""

    times: np.ndarray
    states: np.ndarray
    mass: np.ndarray
    contact_time: float | None
    contact_state: np.ndarray | None
    contact_index: int | None
    mass_derivative: float | None


@dataclass(frozen=True, eq=False)
class InconsistencyReport:
    """First witness of boundary mass-loss across a batch of trials."""

    found: bool
    trial: int | None
    matrix: SignedMatrix | None
    t_contact: float | None
    x_at_contact: np.ndarray | None
    mass_derivative: float | None
    drift_series: tuple
    max_drift: float
    drift_exceeded: bool
    trials_run: int
    contacts_seen: int


def sample_signed(d: int, p: float, rng: np.random.Generator) -> SignedMatrix:
    """Each entry present with probability p; values U[-1,1] off-diagonal,
    U[-1,0] on the diagonal.

    Draw order (for reproducibility): presence mask (d*d), off-diagonal
    values (d*d), diagonal values (d).
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    mask = rng.random((d, d)) < p
    vals = rng.uniform(-1.0, 1.0, (d, d))
    np.fill_diagonal(vals, rng.uniform(-1.0, 0.0, d))
    return SignedMatrix(entries=np.where(mask, vals, 0.0), mask=mask)


def constrained_field(M: SignedMatrix, x) -> np.ndarray:
    """f_i = (Cx)_i - x_i sum_k (Cx)_k, zeroed where x_i = 0 and f_i < 0."""
    x = np.asarray(x, dtype=float)
    if x.shape != (M.d,):
        raise ValueError("dimension mismatch")
    cx = M.entries @ x
    f = cx - x * cx.sum()
    out = f.copy()
    out[(x <= BOUNDARY_ATOL) & (f < 0)] = 0.0
    return out


def _rk4(M: SignedMatrix, x: np.ndarray, h: float) -> np.ndarray:
    k1 = constrained_field(M, x)
    k2 = constrained_field(M, x + 0.5 * h * k1)
    k3 = constrained_field(M, x + 0.5 * h * k2)
    k4 = constrained_field(M, x + h * k3)
    return x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def integrate_constrained(M: SignedMatrix, x0, h: float = 0.01,
                          t_max: float = 50.0,
                          contact_atol: float = 1e-10,
                          stop_drift: float = 10.0) -> ConstrainedRun:
    """Integrate the clamped system without renormalisation.

    The first time a component crosses zero the step is bisected until
    the component sits within ``contact_atol`` of the boundary, then
    clamped; if the field there points outward the contact is recorded
    (time, state, total mass derivative) and integration continues so the
    mass drift can be observed. Once |mass - 1| exceeds ``stop_drift``
    the run ends: the trajectory has left the constraint set for good and
    the quadratic field would blow up numerically soon after.
    """
    x = np.asarray(x0, dtype=float).copy()
    t = 0.0
    times = [0.0]
    states = [x.copy()]
    mass = [float(x.sum())]
    contact_time = None
    contact_state = None
    contact_index = None
    mass_derivative = None

    while t < t_max - 1e-12:
        step = min(h, t_max - t)
        x_new = _rk4(M, x, step)
        if contact_time is None and x_new.min() < -contact_atol:
            lo, hi = 0.0, step
            for _ in range(80):
                mid = 0.5 * (lo + hi)
                probe = _rk4(M, x, mid)
                if probe.min() < -contact_atol:
                    hi = mid
                elif probe.min() > contact_atol:
                    lo = mid
                else:
                    break
            step = 0.5 * (lo + hi)
            x_new = np.clip(_rk4(M, x, step), 0.0, None)
            idx = int(np.argmin(x_new))
            f = M.entries @ x_new - x_new * (M.entries @ x_new).sum()
            if f[idx] < 0:
                contact_time = t + step
                contact_state = x_new.copy()
                contact_index = idx
                mass_derivative = float(constrained_field(M, x_new).sum())
        x = np.clip(x_new, 0.0, None) if contact_time is not None else x_new
        t += step
        times.append(t)
        states.append(x.copy())
        mass.append(float(x.sum()))
        if step <= 0 or abs(mass[-1] - 1.0) >= stop_drift:
            break

    return ConstrainedRun(times=np.array(times), states=np.array(states),
                          mass=np.array(mass), contact_time=contact_time,
                          contact_state=contact_state,
                          contact_index=contact_index,
                          mass_derivative=mass_derivative)


def demonstrate_inconsistency(d: int, p: float, trials: int, seed: int,
                              t_max: float = 50.0, h: float = 0.01,
                              mass_rate_min: float = 1e-3,
                              drift_min: float = 0.01) -> InconsistencyReport:
    """Search seeded trials for a boundary witness of mass non-conservation.

    A witness is a trajectory reaching some x_r = 0 with f_r < 0 and
    |sum_i x_i'| > ``mass_rate_min`` there, whose total mass subsequently
    drifts from 1 by more than ``drift_min``. Returns the first such
    witness; ``found`` is False only if every trial stayed interior or no
    contact produced the required drift.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    contacts = 0
    for trial in range(trials):
        rng = stream(seed, trial)
        M = sample_signed(d, p, rng)
        x0 = rng.uniform(0.2, 1.0, d)
        x0 /= x0.sum()
        run = integrate_constrained(M, x0, h=h, t_max=t_max)
        if run.contact_time is None:
            continue
        contacts += 1
        if abs(run.mass_derivative) <= mass_rate_min:
            continue
        after = run.times >= run.contact_time - 1e-12
        drift = np.abs(run.mass - 1.0)
        series = tuple((float(t), float(dr))
                       for t, dr in zip(run.times[after], drift[after]))
        max_drift = float(drift[after].max())
        if max_drift > drift_min:
            return InconsistencyReport(
                found=True, trial=trial, matrix=M,
                t_contact=float(run.contact_time),
                x_at_contact=run.contact_state,
                mass_derivative=float(run.mass_derivative),
                drift_series=series, max_drift=max_drift,
                drift_exceeded=True, trials_run=trial + 1,
                contacts_seen=contacts)
    return InconsistencyReport(found=False, trial=None, matrix=None,
                               t_contact=None, x_at_contact=None,
                               mass_derivative=None, drift_series=(),
                               max_drift=0.0, drift_exceeded=False,
                               trials_run=trials, contacts_seen=contacts)


def report_to_json_dict(report: InconsistencyReport) -> dict:
    if not report.found:
        return {"witness": None, "trials_run": report.trials_run,
                "contacts_seen": report.contacts_seen}
    return {
        "witness": {
            "C": [[float(v) for v in row] for row in report.matrix.entries],
            "t_contact": report.t_contact,
            "x_at_contact": [float(v) for v in report.x_at_contact],
            "mass_derivative": report.mass_derivative,
            "drift_series": [[t, dr] for t, dr in report.drift_series],
        },
        "trial": report.trial,
        "max_drift": report.max_drift,
        "trials_run": report.trials_run,
        "contacts_seen": report.contacts_seen,
    }
