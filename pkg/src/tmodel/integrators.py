"""Time integration: adaptive Runge-Kutta-Fehlberg 4(5) and implicit midpoint.

The implicit midpoint rule satisfies the symplectic condition
b_i a_ij + b_j a_ji - b_i b_j = 0, under which each step of a t-model
trajectory dissipates energy by exactly -h (t_n + h/2) ||g(V1, 0)||^2 up to
the nonlinear-solver tolerance.  ``integrate`` drives either stepper from t0
to t_end, landing exactly on a prescribed set of sample times and recording
(t, E, dE/dt) plus structure-preservation residuals along the way.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .analysis import DecayRateSeries, EnergySeries
from .spectral import SpectralField

# Step-size controller constants (safety factor and growth clamp).
SAFETY = 0.9
GROWTH_MIN = 0.2
GROWTH_MAX = 5.0
# PI exponents for a 4(5) embedded pair.
_PI_ALPHA = 0.7 / 5.0
_PI_BETA = 0.4 / 5.0

DEFAULT_SOLVER_TOL = 1e-12
DEFAULT_MAX_ITER = 50
DEFAULT_H_MIN = 1e-12


class StepFailure(RuntimeError):
    """A single step could not be completed; carries the state at failure."""

    def __init__(self, message: str, state, t: float):
        super().__init__(message)
        self.state = state
        self.t = t


class StepSizeUnderflow(StepFailure):
    pass


class FixedPointDivergence(StepFailure):
    pass


@dataclass(frozen=True)
class ButcherTableau:
    """Runge-Kutta coefficients with optional embedded error weights.

    Checked at construction: weights sum to 1; tableaux flagged symplectic
    must satisfy b_i a_ij + b_j a_ji - b_i b_j = 0 (to 1e-14) and the
    second-order condition sum b_i c_i = 1/2.
    """

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    b_err: np.ndarray | None = None
    symplectic: bool = False

    def __post_init__(self):
        a = np.asarray(self.a, dtype=np.float64)
        b = np.asarray(self.b, dtype=np.float64)
        c = np.asarray(self.c, dtype=np.float64)
        s = len(b)
        if a.shape != (s, s) or c.shape != (s,):
            raise ValueError(f"inconsistent tableau shapes: a {a.shape}, b {b.shape}, c {c.shape}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)
        if self.b_err is not None:
            be = np.asarray(self.b_err, dtype=np.float64)
            if be.shape != (s,):
                raise ValueError("embedded weights must have one entry per stage")
            object.__setattr__(self, "b_err", be)
        if abs(np.sum(b) - 1.0) > 1e-14:
            raise ValueError(f"weights must sum to 1, got {np.sum(b)!r}")
        if self.symplectic:
            if abs(float(b @ c) - 0.5) > 1e-14:
                raise ValueError("symplectic tableau must satisfy sum b_i c_i = 1/2")
            resid = self.symplectic_residual()
            if resid > 1e-14:
                raise ValueError(f"symplectic condition violated (residual {resid:.3e})")

    @property
    def s(self) -> int:
        return len(self.b)

    def symplectic_residual(self) -> float:
        """max_ij |b_i a_ij + b_j a_ji - b_i b_j|."""
        ba = self.b[:, None] * self.a
        return float(np.max(np.abs(ba + ba.T - np.outer(self.b, self.b))))


# Classical Fehlberg 4(5): six stages, 4th-order propagation, 5th-order
# embedded estimate.
FEHLBERG_45 = ButcherTableau(
    a=np.array(
        [
            [0, 0, 0, 0, 0, 0],
            [1 / 4, 0, 0, 0, 0, 0],
            [3 / 32, 9 / 32, 0, 0, 0, 0],
            [1932 / 2197, -7200 / 2197, 7296 / 2197, 0, 0, 0],
            [439 / 216, -8, 3680 / 513, -845 / 4104, 0, 0],
            [-8 / 27, 2, -3544 / 2565, 1859 / 4104, -11 / 40, 0],
        ]
    ),
    b=np.array([25 / 216, 0, 1408 / 2565, 2197 / 4104, -1 / 5, 0]),
    c=np.array([0, 1 / 4, 3 / 8, 12 / 13, 1, 1 / 2]),
    b_err=np.array([16 / 135, 0, 6656 / 12825, 28561 / 56430, -9 / 50, 2 / 55]),
)

IMPLICIT_MIDPOINT = ButcherTableau(
    a=np.array([[0.5]]), b=np.array([1.0]), c=np.array([0.5]), symplectic=True
)


@dataclass
class StepResult:
    """Outcome of one accepted step."""

    state: object
    t_next: float
    h_used: float
    h_next: float
    energy_decrement: float
    stage_g_norms: tuple[float, ...] = ()
    error_estimate: float | None = None
    n_iterations: int = 0


def _max_abs(x) -> float:
    if isinstance(x, SpectralField):
        return x.abs_max()
    return float(np.max(np.abs(x)))


def _half_norm_sq(x) -> float:
    if isinstance(x, SpectralField):
        from .dynamics import energy

        return energy(x)
    x = np.asarray(x)
    return 0.5 * float(np.sum(np.abs(x) ** 2))


def _controller_factor(err: float, tol: float, err_prev: float | None) -> float:
    """PI step-size factor, clamped to [GROWTH_MIN, GROWTH_MAX]."""
    if err == 0.0:
        return GROWTH_MAX
    r = tol / err
    r_prev = 1.0 if err_prev in (None, 0.0) else tol / err_prev
    factor = SAFETY * r**_PI_ALPHA / r_prev**_PI_BETA
    return min(GROWTH_MAX, max(GROWTH_MIN, factor))


def rkf_step(
    rhs: Callable,
    v,
    t: float,
    h: float,
    tol: float,
    *,
    tableau: ButcherTableau = FEHLBERG_45,
    h_min: float = DEFAULT_H_MIN,
    err_prev: float | None = None,
) -> StepResult:
    """One accepted embedded-pair step with error control.

    The trial step ``h`` shrinks until the max-norm of the embedded error
    estimate is <= tol; the result carries the accepted state and the
    controller's proposal for the next step.  Raises ``StepSizeUnderflow``
    once h falls below ``h_min``.
    """
    if h <= 0:
        raise ValueError(f"step size must be positive, got {h}")
    if tol <= 0:
        raise ValueError(f"tolerance must be positive, got {tol}")
    a, b, c, b_err = tableau.a, tableau.b, tableau.c, tableau.b_err
    if b_err is None:
        raise ValueError("rkf_step needs a tableau with embedded error weights")
    d_err = b_err - b
    e0 = _half_norm_sq(v)

    while True:
        ks = []
        for i in range(tableau.s):
            vi = v
            for j in range(i):
                if a[i, j] != 0.0:
                    vi = vi + (h * a[i, j]) * ks[j]
            ks.append(rhs(vi, t + c[i] * h))
        err_state = None
        for j in range(tableau.s):
            if d_err[j] != 0.0:
                term = (h * d_err[j]) * ks[j]
                err_state = term if err_state is None else err_state + term
        err = _max_abs(err_state) if err_state is not None else 0.0
        if err <= tol:
            v_new = v
            for j in range(tableau.s):
                if b[j] != 0.0:
                    v_new = v_new + (h * b[j]) * ks[j]
            h_next = h * _controller_factor(err, tol, err_prev)
            return StepResult(
                state=v_new,
                t_next=t + h,
                h_used=h,
                h_next=h_next,
                energy_decrement=_half_norm_sq(v_new) - e0,
                error_estimate=err,
            )
        shrink = min(SAFETY, max(GROWTH_MIN, SAFETY * (tol / err) ** 0.2))
        h = h * shrink
        if h < h_min:
            raise StepSizeUnderflow(
                f"step size underflow at t = {t} (h = {h:.3e} < h_min = {h_min:.3e})", v, t
            )


def implicit_midpoint_step(
    rhs: Callable,
    v,
    t: float,
    h: float,
    *,
    solver_tol: float = DEFAULT_SOLVER_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> StepResult:
    """One implicit midpoint step solved by fixed-point iteration.

    Solves V = v + (h/2) F(V, t + h/2) to ``solver_tol`` in max-norm and
    returns v + h F(V, t + h/2).  Records ||g(V, 0)||^2 when the evaluator
    exposes ``g_norm_sq`` (the quantity controlling the per-step energy
    decrement of the t-model).
    """
    if h <= 0:
        raise ValueError(f"step size must be positive, got {h}")
    if solver_tol <= 0:
        raise ValueError(f"solver tolerance must be positive, got {solver_tol}")
    t_mid = t + 0.5 * h
    e0 = _half_norm_sq(v)

    stage = v
    k = None
    for iteration in range(1, max_iter + 1):
        k = rhs(stage, t_mid)
        stage_new = v + (0.5 * h) * k
        resid = _max_abs(stage_new - stage)
        stage = stage_new
        if resid <= solver_tol:
            break
    else:
        raise FixedPointDivergence(
            f"fixed-point iteration did not reach {solver_tol:.1e} in {max_iter} iterations "
            f"at t = {t} (last residual {resid:.3e})",
            v,
            t,
        )

    v_new = v + h * k
    g_norm = getattr(rhs, "g_norm_sq", None)
    g_norms = (float(g_norm(stage)),) if callable(g_norm) else ()
    return StepResult(
        state=v_new,
        t_next=t + h,
        h_used=h,
        h_next=h,
        energy_decrement=_half_norm_sq(v_new) - e0,
        stage_g_norms=g_norms,
        n_iterations=iteration,
    )


# ---------------------------------------------------------------------------
# Trajectory driver
# ---------------------------------------------------------------------------

def log_sample_times(t0: float, t_end: float, count: int, t_floor: float | None = None) -> np.ndarray:
    """Approximately log-uniform sample times over (t0, t_end].

    When t0 <= 0 the geometric ladder starts at ``t_floor`` (default
    t_end * 1e-4).  The last entry is exactly t_end.
    """
    if t_end <= t0:
        raise ValueError(f"need t_end > t0, got [{t0}, {t_end}]")
    if count < 1:
        raise ValueError(f"sample count must be >= 1, got {count}")
    lo = t_floor if t_floor is not None else (t0 if t0 > 0 else t_end * 1e-4)
    if lo <= 0 or lo >= t_end:
        raise ValueError(f"invalid sample floor {lo} for window ({t0}, {t_end}]")
    pts = np.geomspace(lo, t_end, count)
    pts[-1] = t_end
    pts = np.unique(pts[pts > t0])
    pts[-1] = t_end
    return pts


@dataclass
class Trajectory:
    """Sampled diagnostics of one integration."""

    energy: EnergySeries
    decay_rate: DecayRateSeries
    final_state: object
    n_steps: int
    n_accepted_samples: int
    max_divergence_residual: float
    max_reality_residual: float


class IntegrationFailure(RuntimeError):
    """Step failure annotated with the time reached and the partial series."""

    def __init__(self, cause: StepFailure, trajectory: Trajectory):
        super().__init__(f"integration stopped at t = {cause.t:.6g}: {cause}")
        self.cause = cause
        self.t_reached = cause.t
        self.trajectory = trajectory


def integrate(
    rhs,
    v0,
    t0: float,
    t_end: float,
    *,
    scheme: str = "rkf",
    tol: float = 1e-10,
    h: float | None = None,
    h0: float | None = None,
    solver_tol: float = DEFAULT_SOLVER_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    h_min: float = DEFAULT_H_MIN,
    sample_times: Sequence[float] | None = None,
    sample_count: int = 15000,
    progress: Callable[[float, float, int], None] | None = None,
    progress_every: int = 1000,
) -> Trajectory:
    """Advance from t0 to t_end, sampling (t, E, dE/dt) at prescribed times.

    ``scheme`` is "rkf" (adaptive, ``tol``) or "midpoint" (fixed ``h``,
    ``solver_tol``).  Steps are clipped so the trajectory lands exactly on
    every sample time and on t_end.  Raises ``IntegrationFailure`` carrying
    the partial series if a step fails.
    """
    if t_end <= t0:
        raise ValueError(f"need t_end > t0, got [{t0}, {t_end}]")
    if scheme not in ("rkf", "midpoint"):
        raise ValueError(f"unknown scheme {scheme!r}; expected 'rkf' or 'midpoint'")
    if sample_times is None:
        sample_times = log_sample_times(t0, t_end, sample_count)
    targets = np.asarray(sample_times, dtype=np.float64)
    if targets.ndim != 1 or targets.size == 0:
        raise ValueError("sample_times must be a nonempty 1D sequence")
    if np.any(targets <= t0) or np.any(targets > t_end) or np.any(np.diff(targets) <= 0):
        raise ValueError("sample times must be strictly increasing within (t0, t_end]")
    if targets[-1] != t_end:
        targets = np.append(targets, t_end)

    is_field = isinstance(v0, SpectralField)
    ts, es, rates = [t0], [rhs.energy(v0)], [rhs.energy_decay_rate(v0, t0)]
    max_div = v0.divergence_residual() if is_field else 0.0
    max_real = v0.reality_residual() if is_field else 0.0

    state = v0
    t = t0
    n_steps = 0
    err_prev: float | None = None
    if scheme == "midpoint":
        if h is None or h <= 0:
            raise ValueError("midpoint scheme needs a positive fixed step h")
        h_prop = h
    else:
        h_prop = h0 if h0 is not None else max(1e-8, (t_end - t0) * 1e-6)

    def record(tv: float, v) -> None:
        nonlocal max_div, max_real
        ts.append(tv)
        es.append(rhs.energy(v))
        rates.append(rhs.energy_decay_rate(v, tv))
        if is_field:
            max_div = max(max_div, v.divergence_residual())
            max_real = max(max_real, v.reality_residual())

    def build(final_state) -> Trajectory:
        e = np.asarray(es)
        return Trajectory(
            energy=EnergySeries(np.asarray(ts), e),
            decay_rate=DecayRateSeries(np.asarray(ts), np.abs(np.asarray(rates))),
            final_state=final_state,
            n_steps=n_steps,
            n_accepted_samples=len(ts),
            max_divergence_residual=max_div,
            max_reality_residual=max_real,
        )

    try:
        for i_target, ts_target in enumerate(targets):
            while t < ts_target:
                gap = ts_target - t
                clipped = h_prop >= gap
                h_step = gap if clipped else h_prop
                if scheme == "rkf":
                    res = rkf_step(
                        rhs, state, t, h_step, tol, h_min=h_min, err_prev=err_prev
                    )
                    err_prev = res.error_estimate
                    if clipped:
                        h_prop = max(h_prop, res.h_next)
                    else:
                        h_prop = res.h_next
                else:
                    res = implicit_midpoint_step(
                        rhs, state, t, h_step, solver_tol=solver_tol, max_iter=max_iter
                    )
                state = res.state
                t = ts_target if clipped else res.t_next
                n_steps += 1
            record(ts_target, state)
            if progress is not None and (i_target + 1) % progress_every == 0:
                progress(t, t_end, n_steps)
    except StepFailure as failure:
        raise IntegrationFailure(failure, build(state)) from failure

    return build(state)
