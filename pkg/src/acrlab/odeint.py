"""Adaptive integration of (non-autonomous) mass-action systems.

The default method is the Dormand-Prince 5(4) pair with PI step control.
Inflow-driven systems become stiff once the driver species grows (the ACR
species relaxes at rate ``f(x)``), so ``method="auto"`` watches the
Dormand-Prince stiffness indicator and hands over to the implicit Radau IIA
stepper from scipy when the step size is stability-limited.

Auxiliary integrals of a power-engine-load decomposition ride in the state
vector: ``int_f`` (power), ``int_absg`` (|load|) and ``int_ratio``
(``F_i / (x* - x_i)``).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from typing import List, Mapping, Optional, Sequence

import numpy as np

from .exprlang import classify_growth
from .massaction import CompiledField, PolyField

__all__ = ["Trajectory", "ConvergenceReport", "IntegratorError", "StepSizeUnderflow",
           "MaxStepsExceeded", "OverflowGuard", "NegativeState", "DegenerateSum", "integrate",
           "detect_convergence", "detect_convergence_series", "change_coords_xbeta",
           "inverse_xbeta", "trajectory_to_csv", "AUX_NAMES"]

AUX_NAMES = ("int_f", "int_absg", "int_ratio")
ENGINE_ATOL_FACTOR = 1e-6


class IntegratorError(RuntimeError):
    def __init__(self, message: str, t: float, state, trajectory: Optional["Trajectory"] = None):
        super().__init__(f"{message} (last good t = {float(t)})")
        self.t = t
        self.state = state
        self.trajectory = trajectory


class StepSizeUnderflow(IntegratorError):
    pass


class MaxStepsExceeded(IntegratorError):
    pass


class OverflowGuard(IntegratorError):
    pass


class NegativeState(IntegratorError):
    pass


class DegenerateSum(ValueError):
    pass


@dataclass
class Trajectory:
    species: tuple
    times: np.ndarray
    states: np.ndarray
    aux: Optional[np.ndarray] = None
    engine: Optional[np.ndarray] = None
    accepted: int = 0
    rejected: int = 0
    stiff_switch_t: Optional[float] = None
    terminated: Optional[str] = None

    def column(self, name: str) -> np.ndarray:
        if name in self.species:
            return self.states[:, self.species.index(name)]
        if self.aux is not None and name in AUX_NAMES:
            return self.aux[:, AUX_NAMES.index(name)]
        raise KeyError(name)

    def __len__(self) -> int:
        return len(self.times)


# Dormand-Prince 5(4) tableau
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B = _A[6]
_E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)


class _System:
    """Augmented right-hand side: species plus auxiliary integrands.

    With a decomposition attached, component ``i`` holds the offset
    ``u = x_i - x*`` and every polynomial is re-expanded about ``x*``, so the
    engine keeps full relative precision while ``x_i`` approaches ``x*`` and
    the other equations see the same offset rather than a rounded ``x_i``.
    """

    def __init__(self, cf: CompiledField, dec, bindings, log_cap: Optional[float]):
        self.cf = cf
        self.n = cf.n
        self.log_cap = log_cap
        self.aux = None
        self.shift = None
        self.shifted = cf
        if dec is not None:
            self.aux = dec.aux_functions(bindings)
            self.shift = (self.aux[0], self.aux[1])
            polys = tuple(p.shift(dec.index, dec.x_star) for p in cf.field.polys)
            self.shifted = CompiledField(replace(cf.field, polys=polys), cf.bindings)
        self.dim = self.n + (3 if self.aux else 0)

    def physical(self, y: np.ndarray) -> np.ndarray:
        x = y[: self.n].copy()
        if self.shift:
            x[self.shift[0]] += self.shift[1]
        return x

    def atol_vector(self, atol: float) -> np.ndarray:
        v = np.full(self.dim, atol)
        if self.shift:
            # the engine is controlled relative to itself so the gap keeps its digits
            v[self.shift[0]] = atol * ENGINE_ATOL_FACTOR
        return v

    def __call__(self, t: float, y: np.ndarray) -> np.ndarray:
        x = self.physical(y)
        try:
            p = self.shifted.poly(y[: self.n])
            forcing = self.cf.forcing(t)
        except OverflowError:
            raise _ForcingOverflow(t) from None
        out = np.empty(self.dim)
        for i in range(self.n):
            out[i] = p[i] + forcing[i]
        if self.aux:
            i, xstar, f_fn, g_fn = self.aux
            f = f_fn(x)
            g = g_fn(x) + forcing[i]
            gap = -y[i]
            out[self.n] = f
            out[self.n + 1] = abs(g)
            out[self.n + 2] = f + g / gap if gap != 0.0 else f
        return out

    def jacobian(self, t: float, y: np.ndarray):
        j = np.zeros((self.dim, self.dim))
        j[: self.n, : self.n] = self.shifted.jacobian(y[: self.n])
        return j

    def check_cap(self, t: float) -> bool:
        if self.log_cap is None:
            return True
        try:
            vals = self.cf.forcing(t)
        except OverflowError:
            return False
        return all(v <= 0 or math.log(v) <= self.log_cap for v in vals)


class _ForcingOverflow(Exception):
    def __init__(self, t):
        self.t = t


def _err_norm(err, m0, m1, rtol, atol, mask) -> float:
    scale = atol + rtol * np.maximum(m0, m1)
    r = (err / scale)[mask]
    return float(np.sqrt(np.mean(r * r))) if r.size else 0.0


def integrate(
    field: PolyField,
    bindings: Optional[Mapping[str, float]],
    x0: Sequence[float],
    t_end: float,
    *,
    rtol: float = 1e-8,
    atol: float = 1e-10,
    max_steps: int = 500_000,
    dec=None,
    method: str = "auto",
    h_max: Optional[float] = None,
    fixed_step: Optional[float] = None,
    forcing_log_cap: Optional[float] = None,
    checkpoints: Sequence[float] = (),
) -> Trajectory:
    """Integrate ``x' = F(x, t)`` from ``t = 0`` to ``t_end``.

    ``method`` is ``"dopri5"``, ``"radau"`` or ``"auto"``.  With
    ``fixed_step`` the Dormand-Prince fifth-order solution is advanced with
    a constant step (used for order checks).  Components in ``[-atol, 0)``
    are clamped to zero after each accepted step; anything below
    ``-100 * atol`` raises :class:`NegativeState`.  Every time in
    ``checkpoints`` inside ``(0, t_end)`` is hit exactly by an accepted step.
    """
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    if method not in ("auto", "dopri5", "radau"):
        raise ValueError(f"unknown method {method!r}")
    if rtol <= 0 or atol <= 0:
        raise ValueError("rtol and atol must be positive")
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (len(field.species),):
        raise ValueError(f"x0 has {x0.size} entries, expected {len(field.species)}")
    if np.any(x0 < 0):
        raise ValueError("initial state must be nonnegative")
    b = field.bindings(bindings)
    cf = CompiledField(field, b)
    sys = _System(cf, dec, b, forcing_log_cap)

    ceiling = t_end / 10.0 if h_max is None else h_max
    for e in cf.inflows:
        gc = classify_growth(e)
        if gc.tag == "ExpGrowth" and gc.rate > 0:
            ceiling = min(ceiling, 0.1 / gc.rate)

    n = sys.n
    y = np.concatenate([x0, np.zeros(sys.dim - n)])
    if sys.shift:
        y[sys.shift[0]] -= sys.shift[1]
    atol_vec = sys.atol_vector(atol)
    mask = np.ones(sys.dim, dtype=bool)
    if sys.aux:
        mask[n + 2] = False  # the ratio integrand is singular where x_i crosses x*

    times: List[float] = [0.0]
    states: List[np.ndarray] = [y.copy()]
    stats = {"accepted": 0, "rejected": 0, "switch": None}

    def partial(term=None) -> Trajectory:
        return _make_traj(field.species, times, states, n, sys.shift, stats, term)

    def accept(t_new, y_new):
        xs = sys.physical(y_new)
        if np.any(xs < -100 * atol):
            j = int(np.argmin(xs))
            raise NegativeState(f"{field.species[j]} fell to {xs[j]:.3g}", times[-1], sys.physical(states[-1]),
                                partial())
        for j in np.nonzero(xs < 0)[0]:
            y_new[j] = -sys.shift[1] if sys.shift and j == sys.shift[0] else 0.0
        if not sys.check_cap(t_new):
            raise OverflowGuard("forcing exceeded the log-domain cap", times[-1], sys.physical(states[-1]),
                                partial("guard"))
        times.append(t_new)
        states.append(y_new.copy())
        stats["accepted"] += 1

    try:
        if fixed_step is not None:
            _run_fixed(sys, y, t_end, fixed_step, accept)
        else:
            t = 0.0
            stiff = method == "radau"
            ends = sorted({float(c) for c in checkpoints if 0.0 < c < t_end} | {float(t_end)})
            for seg_end in ends:
                if not stiff:
                    t, y = _run_dopri(sys, y, t, seg_end, rtol, atol_vec, ceiling, max_steps, mask, accept, stats,
                                      detect_stiff=(method == "auto"), times=times, states=states)
                    if t < seg_end:
                        stiff = True
                        stats["switch"] = t
                if t < seg_end:
                    y = _run_radau(sys, y, t, seg_end, rtol, atol_vec, ceiling, max_steps, mask, accept, stats,
                                   times=times, states=states)
                    t = seg_end
    except _ForcingOverflow as exc:
        raise OverflowGuard(f"forcing overflowed the float range at t={exc.t:.6g}",
                            times[-1], sys.physical(states[-1]), partial("guard")) from None
    except (StepSizeUnderflow, MaxStepsExceeded) as exc:
        exc.trajectory = partial("error")
        raise
    return partial()


def _make_traj(species, times, states, n, shift, stats, term) -> Trajectory:
    arr = np.array(states)
    xs = arr[:, :n].copy()
    engine = None
    if shift:
        i, xstar = shift
        engine = -xs[:, i]
        xs[:, i] += xstar
        np.maximum(xs[:, i], 0.0, out=xs[:, i])
    return Trajectory(
        species=tuple(species),
        times=np.array(times),
        states=xs,
        aux=arr[:, n:].copy() if shift else None,
        engine=engine,
        accepted=stats["accepted"],
        rejected=stats["rejected"],
        stiff_switch_t=stats["switch"],
        terminated=term,
    )


def _dopri_stages(sys, t, y, h, k1):
    ks = [k1]
    for s in range(1, 7):
        yi = y.copy()
        for j, a in enumerate(_A[s]):
            if a:
                yi += h * a * ks[j]
        ks.append(sys(t + _C[s] * h, yi))
        if s == 5:
            y_stage6 = yi
    y_new = y.copy()
    for j, bj in enumerate(_B):
        if bj:
            y_new += h * bj * ks[j]
    return ks, y_new, y_stage6


def _run_fixed(sys, y, t_end, h, accept):
    t = 0.0
    k1 = sys(t, y)
    nsteps = int(round(t_end / h))
    for step in range(nsteps):
        ks, y_new, _ = _dopri_stages(sys, t, y, h, k1)
        t = (step + 1) * h
        accept(t, y_new)
        y = y_new
        k1 = sys(t, y)


def _run_dopri(sys, y, t, t_end, rtol, atol, h_max, max_steps, mask, accept, stats, detect_stiff, times, states):
    k1 = sys(t, y)
    h = _initial_step(sys, t, y, k1, rtol, atol, h_max)
    err_prev = 1e-4
    stiff_count = nonstiff_count = 0
    while t < t_end:
        if stats["accepted"] + stats["rejected"] >= max_steps:
            raise MaxStepsExceeded(f"more than {max_steps} steps", t, sys.physical(y))
        h = min(h, h_max, t_end - t)
        if h < 1e-14 * max(1.0, abs(t)):
            raise StepSizeUnderflow("step size underflow", t, sys.physical(y))
        try:
            ks, y_new, y_st = _dopri_stages(sys, t, y, h, k1)
            err_vec = h * sum(e * k for e, k in zip(_E, ks) if e)
            err = _err_norm(err_vec, np.abs(y), np.abs(y_new), rtol, atol, mask)
        except FloatingPointError:
            err = math.inf
        if not math.isfinite(err) or not np.all(np.isfinite(y_new)):
            stats["rejected"] += 1
            h *= 0.2
            continue
        if err <= 1.0:
            t_new = t + h if t_end - (t + h) > 1e-12 * t_end else t_end
            accept(t_new, y_new)
            y = states[-1].copy()
            if detect_stiff:
                num = np.linalg.norm((ks[6] - ks[5])[: sys.n])
                den = np.linalg.norm((y_new - y_st)[: sys.n])
                if den > 0 and h * num / den > 3.25:
                    nonstiff_count = 0
                    stiff_count += 1
                    if stiff_count >= 15:
                        return t_new, y
                else:
                    nonstiff_count += 1
                    if nonstiff_count >= 6:
                        stiff_count = 0
            t = t_new
            k1 = sys(t, y)
            fac = 0.9 * err ** -0.17 * err_prev ** 0.04 if err > 0 else 10.0
            h *= min(10.0, max(0.2, fac))
            err_prev = max(err, 1e-4)
        else:
            stats["rejected"] += 1
            h *= max(0.2, 0.9 * err ** -0.2)
    return t, y


def _initial_step(sys, t, y, f0, rtol, atol, h_max) -> float:
    scale = atol + rtol * np.abs(y)
    d0 = np.sqrt(np.mean((y / scale) ** 2))
    d1 = np.sqrt(np.mean((f0 / scale) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, h_max)
    f1 = sys(t + h0, y + h0 * f0)
    d2 = np.sqrt(np.mean(((f1 - f0) / scale) ** 2)) / h0
    h1 = max(1e-6, h0 * 1e-3) if max(d1, d2) <= 1e-15 else (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, h_max)


def _run_radau(sys, y, t, t_end, rtol, atol, h_max, max_steps, mask, accept, stats, times, states):
    from scipy.integrate import Radau

    atol = np.where(mask, atol, 1e300)  # unmasked components do not steer the step
    solver = Radau(sys, t, y, t_end, rtol=rtol, atol=atol, jac=sys.jacobian, max_step=h_max)
    while solver.status == "running":
        if stats["accepted"] + stats["rejected"] >= max_steps:
            raise MaxStepsExceeded(f"more than {max_steps} steps", solver.t, sys.physical(solver.y))
        msg = solver.step()
        if solver.status == "failed":
            raise StepSizeUnderflow(msg or "implicit step failed", times[-1], sys.physical(states[-1]))
        y_new = solver.y.copy()
        accept(solver.t, y_new)
        solver.y = states[-1].copy()
    return states[-1].copy()


# --------------------------------------------------------------- convergence


@dataclass
class ConvergenceReport:
    status: str  # Converged | Drifting | Unbounded | Undecided
    limit: Optional[float] = None
    window_estimates: List[float] = field(default_factory=list)
    slope: Optional[float] = None

    def __str__(self) -> str:
        return f"Converged({self.limit:.6g})" if self.status == "Converged" else self.status


_WINDOW_SAMPLES = 129


def _window(t, v, lo, hi):
    """Piecewise-linear resampling of the series on ``[lo, hi]``."""
    grid = np.linspace(lo, hi, _WINDOW_SAMPLES)
    return grid, np.interp(grid, t, v)


def _window_mean(t, v, lo, hi) -> float:
    grid, vals = _window(t, v, lo, hi)
    return float(np.trapezoid(vals, grid) / (hi - lo))


def _window_slope(t, v, lo, hi) -> float:
    grid, vals = _window(t, v, lo, hi)
    return float(np.polyfit(grid - grid.mean(), vals, 1)[0])


def detect_convergence_series(times, values, *, rtol_conv: float = 1e-3, slope_tol: float = 1e-4,
                              ceiling: float = 1e12) -> ConvergenceReport:
    """Classify the tail of a scalar series.

    Windows ``W_j = [T(1 - 2^-j), T(1 - 2^-(j+1))]`` for ``j = 1..3`` plus the
    final ``[T(1 - 1/16), T]``; the last three means must agree to
    ``rtol_conv * max(1, |mean|)`` and the final-window slope must stay below
    ``slope_tol``.
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if len(t) < 2 or t[-1] <= t[0]:
        return ConvergenceReport("Undecided")
    t0, t_end = t[0], t[-1]
    span = t_end - t0
    bounds = [t0 + span * (1 - 2.0 ** -j) for j in range(1, 5)] + [t_end]
    means = [_window_mean(t, v, lo, hi) for lo, hi in zip(bounds[:-1], bounds[1:])]
    slope_last = _window_slope(t, v, bounds[-2], bounds[-1])
    slope_first = _window_slope(t, v, bounds[0], bounds[1])
    last3 = means[-3:]
    scale = max(1.0, abs(means[-1]))
    if max(last3) - min(last3) <= rtol_conv * scale and abs(slope_last) <= slope_tol:
        return ConvergenceReport("Converged", means[-1], means, slope_last)
    increasing = all(b > a for a, b in zip(means, means[1:]))
    if slope_last > slope_tol and (v[-1] > ceiling or (increasing and slope_last >= 0.5 * slope_first)):
        return ConvergenceReport("Unbounded", None, means, slope_last)
    if abs(slope_last) > slope_tol:
        return ConvergenceReport("Drifting", None, means, slope_last)
    return ConvergenceReport("Undecided", None, means, slope_last)


def detect_convergence(traj: Trajectory, species: str, **opts) -> ConvergenceReport:
    return detect_convergence_series(traj.times, traj.column(species), **opts)


# -------------------------------------------------------- (x, beta) coordinates


def change_coords_xbeta(traj: Trajectory, a_idx: int, b_idx: int):
    """Map ``(a, b) -> (a + b, b / (a + b))`` along the trajectory."""
    a = traj.states[:, a_idx]
    b = traj.states[:, b_idx]
    x = a + b
    if np.any(x <= 0):
        raise DegenerateSum("a + b vanishes along the trajectory")
    return x, b / x


def inverse_xbeta(x, beta):
    x = np.asarray(x, dtype=float)
    beta = np.asarray(beta, dtype=float)
    return x * (1.0 - beta), x * beta


# ------------------------------------------------------------------------ CSV


def trajectory_to_csv(traj: Trajectory) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", *traj.species, *AUX_NAMES])
    for k in range(len(traj.times)):
        aux = traj.aux[k] if traj.aux is not None else (math.nan,) * 3
        w.writerow([_g17(traj.times[k]), *(_g17(v) for v in traj.states[k]), *(_g17(v) for v in aux)])
    return buf.getvalue()


def _g17(v) -> str:
    return format(float(v), ".17g")
