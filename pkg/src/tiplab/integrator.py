"""Scalar ODE integration with dense output and blow-up detection.

The default method is the Dormand-Prince embedded Runge-Kutta 5(4) pair with
FSAL and standard step-size control; a fixed-step classical RK4 is available
for cross-checks. Between accepted nodes the solution is evaluated by cubic
Hermite interpolation on the stored values and slopes. Backward integration
is realized by the substitution s = -t, so one forward stepper serves both
directions.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field

import numpy as np


class IntegrationError(RuntimeError):
    """Step-size underflow, step budget exhausted, or invalid setup."""


@dataclass(frozen=True)
class IntegratorConfig:
    method: str = "dopri54"        # "dopri54" (adaptive) or "rk4" (fixed step)
    rtol: float = 1.0e-10
    atol: float = 1.0e-12
    max_step: float = 10.0
    first_step: float | None = None
    x_max: float = 1.0e6           # |x| >= x_max counts as blow-up
    max_steps: int = 20_000_000
    fixed_step: float = 1.0e-2     # rk4 only

    def __post_init__(self):
        if self.method not in ("dopri54", "rk4"):
            raise IntegrationError(f"unknown method {self.method!r}")
        if self.rtol <= 0 or self.atol <= 0 or self.max_step <= 0 or self.x_max <= 0:
            raise IntegrationError("tolerances, max_step and x_max must be positive")


DEFAULT_CONFIG = IntegratorConfig()

# Dormand-Prince 5(4) tableau
_C2, _C3, _C4, _C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
_A21 = 1 / 5
_A31, _A32 = 3 / 40, 9 / 40
_A41, _A42, _A43 = 44 / 45, -56 / 15, 32 / 9
_A51, _A52, _A53, _A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
_A61, _A62, _A63, _A64, _A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
_B1, _B3, _B4, _B5, _B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
# difference between 5th and 4th order weights
_E1 = 35 / 384 - 5179 / 57600
_E3 = 500 / 1113 - 7571 / 16695
_E4 = 125 / 192 - 393 / 640
_E5 = -2187 / 6784 + 92097 / 339200
_E6 = 11 / 84 - 187 / 2100
_E7 = -1 / 40


@dataclass
class Trajectory:
    """Accepted integration nodes (t ascending) with values and slopes.

    status is "completed" or "blow-up"; in the latter case t_blow marks where
    |x| reached the blow-up bound and no samples exist beyond it in the
    direction of integration.
    """

    direction: str                 # "forward" | "backward"
    t: np.ndarray
    x: np.ndarray
    f: np.ndarray
    status: str = "completed"
    t_blow: float | None = None
    blow_sign: int | None = None
    _tl: list = field(repr=False, default=None)

    def __post_init__(self):
        if self._tl is None:
            self._tl = self.t.tolist()

    @property
    def t_start(self) -> float:
        return self.t[0] if self.direction == "forward" else self.t[-1]

    @property
    def t_end(self) -> float:
        return self.t[-1] if self.direction == "forward" else self.t[0]

    @property
    def span(self) -> tuple[float, float]:
        return (self.t[0], self.t[-1])

    def covers(self, a: float, b: float | None = None) -> bool:
        lo, hi = self.t[0], self.t[-1]
        if b is None:
            b = a
        return lo <= min(a, b) and max(a, b) <= hi

    def __call__(self, time: float) -> float:
        """Cubic Hermite evaluation; exact at nodes."""
        tl = self._tl
        n = len(tl)
        if not tl[0] <= time <= tl[-1]:
            raise IntegrationError(
                f"evaluation time {time} outside trajectory span [{tl[0]}, {tl[-1]}]"
            )
        i = bisect.bisect_right(tl, time) - 1
        if i >= n - 1:
            return float(self.x[n - 1])
        t0, t1 = tl[i], tl[i + 1]
        if time == t0:
            return float(self.x[i])
        h = t1 - t0
        s = (time - t0) / h
        x0, x1 = self.x[i], self.x[i + 1]
        f0, f1 = self.f[i], self.f[i + 1]
        m = 1.0 - s
        return float(
            m * m * (1.0 + 2.0 * s) * x0
            + s * m * m * h * f0
            + s * s * (3.0 - 2.0 * s) * x1
            - s * s * m * h * f1
        )

    def eval_array(self, times: np.ndarray) -> np.ndarray:
        """Vectorized Hermite evaluation over ascending or arbitrary times."""
        times = np.asarray(times, dtype=float)
        if times.size and (times.min() < self.t[0] - 1e-12 or times.max() > self.t[-1] + 1e-12):
            raise IntegrationError("evaluation times outside trajectory span")
        idx = np.clip(np.searchsorted(self.t, times, side="right") - 1, 0, len(self.t) - 2)
        t0 = self.t[idx]
        h = self.t[idx + 1] - t0
        s = np.clip((times - t0) / h, 0.0, 1.0)
        x0, x1 = self.x[idx], self.x[idx + 1]
        f0, f1 = self.f[idx], self.f[idx + 1]
        m = 1.0 - s
        return (m * m * (1.0 + 2.0 * s) * x0 + s * m * m * h * f0
                + s * s * (3.0 - 2.0 * s) * x1 - s * s * m * h * f1)

    def shifted(self, dx: float) -> "Trajectory":
        """Trajectory of x + dx; valid when the shifted curve solves the
        correspondingly translated equation (slopes are unchanged)."""
        return Trajectory(self.direction, self.t, self.x + dx, self.f,
                          self.status, self.t_blow, self.blow_sign, _tl=self._tl)


def eval_trajectory(trajectory: Trajectory, time: float) -> float:
    return trajectory(time)


def _hermite(t0, x0, f0, t1, x1, f1, time):
    h = t1 - t0
    s = (time - t0) / h
    m = 1.0 - s
    return (m * m * (1.0 + 2.0 * s) * x0 + s * m * m * h * f0
            + s * s * (3.0 - 2.0 * s) * x1 - s * s * m * h * f1)


def _locate_blow(t0, x0, f0, t1, x1, f1, x_max):
    """First time in (t0, t1] where |Hermite interpolant| reaches x_max."""
    target = x_max if x1 >= 0 else -x_max
    lo, hi = t0, t1
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        v = _hermite(t0, x0, f0, t1, x1, f1, mid)
        if (v >= target) if x1 >= 0 else (v <= target):
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-15 * max(1.0, abs(hi)):
            break
    return hi


def _step_dopri(rhs, t, x, h, k1):
    k2 = rhs(t + _C2 * h, x + h * (_A21 * k1))
    k3 = rhs(t + _C3 * h, x + h * (_A31 * k1 + _A32 * k2))
    k4 = rhs(t + _C4 * h, x + h * (_A41 * k1 + _A42 * k2 + _A43 * k3))
    k5 = rhs(t + _C5 * h, x + h * (_A51 * k1 + _A52 * k2 + _A53 * k3 + _A54 * k4))
    k6 = rhs(t + h, x + h * (_A61 * k1 + _A62 * k2 + _A63 * k3 + _A64 * k4 + _A65 * k5))
    x_new = x + h * (_B1 * k1 + _B3 * k3 + _B4 * k4 + _B5 * k5 + _B6 * k6)
    k7 = rhs(t + h, x_new)
    err = h * (_E1 * k1 + _E3 * k3 + _E4 * k4 + _E5 * k5 + _E6 * k6 + _E7 * k7)
    return x_new, k7, err


def _integrate_forward(rhs, t0, x0, t1, cfg):
    ts = [t0]
    xs = [x0]
    k1 = rhs(t0, x0)
    if not math.isfinite(k1):
        raise IntegrationError(f"right-hand side not finite at start ({t0}, {x0})")
    fs = [k1]
    status, t_blow, blow_sign = "completed", None, None

    if cfg.method == "rk4":
        return _integrate_rk4(rhs, t0, x0, t1, cfg, ts, xs, fs)

    span = t1 - t0
    h = cfg.first_step if cfg.first_step else min(cfg.max_step, max(1e-6, 1e-3 * span))
    h = min(h, span)
    t, x = t0, x0
    isfinite = math.isfinite
    rtol, atol, x_max = cfg.rtol, cfg.atol, cfg.x_max
    steps = 0
    while t < t1:
        if steps >= cfg.max_steps:
            raise IntegrationError(f"step budget exhausted at t={t}")
        steps += 1
        h = min(h, cfg.max_step, t1 - t)
        if h < 1e-14 * max(1.0, abs(t)):
            if abs(x) >= 1e-3 * x_max:
                # the controller stalls on a solution that is already huge
                # and still growing: an escape whose asymptote sits just
                # short of x_max; record the blow-up at the stall point
                status = "blow-up"
                t_blow = t
                blow_sign = 1 if x >= 0 else -1
                break
            raise IntegrationError(f"step size underflow at t={t}")
        try:
            x_new, k7, err = _step_dopri(rhs, t, x, h, k1)
        except (ValueError, ArithmeticError):
            # a trial stage left the rhs domain; treat as a failed step
            h *= 0.25
            continue
        if not (isfinite(x_new) and isfinite(k7) and isfinite(err)):
            h *= 0.25
            continue
        sc = atol + rtol * max(abs(x), abs(x_new))
        aerr = abs(err)
        if aerr <= sc:
            t_next = t + h
            if abs(x_new) >= x_max:
                tb = _locate_blow(t, x, k1, t_next, x_new, k7, x_max)
                xb = _hermite(t, x, k1, t_next, x_new, k7, tb)
                ts.append(tb)
                xs.append(xb)
                try:
                    fb = rhs(tb, xb)
                except (ValueError, ArithmeticError):
                    fb = math.nan
                fs.append(fb if isfinite(fb) else 0.0)
                status = "blow-up"
                t_blow = tb
                blow_sign = 1 if x_new >= 0 else -1
                break
            t, x, k1 = t_next, x_new, k7
            ts.append(t)
            xs.append(x)
            fs.append(k1)
            factor = 10.0 if aerr == 0.0 else min(10.0, max(0.2, 0.9 * (sc / aerr) ** 0.2))
            h *= factor
        else:
            h *= max(0.2, 0.9 * (sc / aerr) ** 0.2)
    return ts, xs, fs, status, t_blow, blow_sign


def _integrate_rk4(rhs, t0, x0, t1, cfg, ts, xs, fs):
    status, t_blow, blow_sign = "completed", None, None
    span = t1 - t0
    n = max(1, math.ceil(span / cfg.fixed_step))
    h = span / n
    t, x = t0, x0
    k1 = fs[0]
    for _ in range(n):
        k2 = rhs(t + 0.5 * h, x + 0.5 * h * k1)
        k3 = rhs(t + 0.5 * h, x + 0.5 * h * k2)
        k4 = rhs(t + h, x + h * k3)
        x_new = x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not math.isfinite(x_new):
            raise IntegrationError(f"fixed-step solution not finite near t={t}")
        t_next = t + h
        f_new = rhs(t_next, x_new)
        if abs(x_new) >= cfg.x_max:
            tb = _locate_blow(t, x, k1, t_next, x_new, f_new, cfg.x_max)
            xb = _hermite(t, x, k1, t_next, x_new, f_new, tb)
            ts.append(tb)
            xs.append(xb)
            fb = rhs(tb, xb)
            fs.append(fb if math.isfinite(fb) else 0.0)
            status, t_blow, blow_sign = "blow-up", tb, (1 if x_new >= 0 else -1)
            break
        t, x, k1 = t_next, x_new, f_new
        ts.append(t)
        xs.append(x)
        fs.append(k1)
    return ts, xs, fs, status, t_blow, blow_sign


def integrate(rhs, t_start: float, x0: float, t_end: float,
              config: IntegratorConfig = DEFAULT_CONFIG) -> Trajectory:
    """Integrate x' = rhs(t, x) from (t_start, x0) to t_end.

    t_end < t_start integrates backward via the substitution s = -t; the
    returned samples are always stored with ascending t.
    """
    t_start, x0, t_end = float(t_start), float(x0), float(t_end)
    if t_end == t_start:
        raise IntegrationError("empty integration span")
    if abs(x0) >= config.x_max:
        raise IntegrationError(f"initial value {x0} already beyond the blow-up bound")
    if t_end > t_start:
        ts, xs, fs, status, t_blow, blow_sign = _integrate_forward(
            rhs, t_start, x0, t_end, config)
        return Trajectory(
            "forward",
            np.array(ts), np.array(xs), np.array(fs),
            status, t_blow, blow_sign, _tl=ts,
        )
    rev = lambda s, y: -rhs(-s, y)
    ts, xs, fs, status, t_blow, blow_sign = _integrate_forward(
        rev, -t_start, x0, -t_end, config)
    # back to the original clock: t = -s ascending, slopes dx/dt = -dy/ds
    ts = [-s for s in reversed(ts)]
    xs_arr = np.array(xs[::-1])
    fs_arr = -np.array(fs[::-1])
    return Trajectory(
        "backward",
        np.array(ts), xs_arr, fs_arr,
        status, (-t_blow if t_blow is not None else None), blow_sign, _tl=ts,
    )
