"""Finite-time Lyapunov exponents as early-warning signals.

The backward exponent of length T at time t is the average of f_x over
[t-T, t] along a chosen solution of the transition equation. Along an
attractive solution it sits near the (negative) Lyapunov exponent of the
past attractor until the transition excites it toward zero; a crossing of
the threshold kappa*L is the warning event. On top of the series this
module builds detection-region sweeps, the frozen-rate repeller curve with
its safe and no-return certificates, and reaction experiments where the
rate is increased as soon as a warning fires.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .attractors import (
    DEFAULT_NUMERICS,
    NonConvergentError,
    Numerics,
    PullbackSolution,
    gauss3_interval_integrals,
    pullback_attractive,
    pullback_repulsive,
)
from .classify import CaseLabel, LimitCache, resolve_horizon
from .integrator import IntegrationError, integrate
from .models import CONCAVE, DCONCAVE


class EwsError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# FTLE series
# ---------------------------------------------------------------------------

@dataclass
class FtleSeries:
    role: str
    window_length: float
    t: np.ndarray
    values: np.ndarray
    quad_gap: float

    def __call__(self, time: float) -> float:
        if time < self.t[0] or time > self.t[-1]:
            raise EwsError(f"time {time} outside the series range "
                           f"[{self.t[0]}, {self.t[-1]}]")
        return float(np.interp(time, self.t, self.values))

    @property
    def max_value(self) -> float:
        return float(self.values.max())

    def restricted(self, t_min: float, t_max: float) -> "FtleSeries":
        keep = (self.t >= t_min) & (self.t <= t_max)
        if not keep.any():
            raise EwsError("empty restriction of the series")
        return FtleSeries(self.role, self.window_length,
                          self.t[keep], self.values[keep], self.quad_gap)


def _series_on_step(g, a0: float, h: float, n: int, m: int) -> np.ndarray:
    parts = gauss3_interval_integrals(g, a0, h, n)
    cum = np.concatenate(([0.0], np.cumsum(parts)))
    return (cum[m:] - cum[:-m]) / (m * h)


def ftle_series(model, mechanism, solution: PullbackSolution, T: float,
                num: Numerics = DEFAULT_NUMERICS,
                t_min: float | None = None,
                t_max: float | None = None,
                max_halvings: int = 4) -> FtleSeries:
    """Sliding-window average of f_x along the solution, for window length T.

    One pass of composite 3-point Gauss quadrature on a uniform step that
    divides T yields every window by differencing the cumulative sums; the
    step is halved until two passes agree below num.quad_tol.
    """
    if T <= 0.0:
        raise EwsError("window length must be positive")
    traj = solution.trajectory
    lo_feasible = traj.t_start + T
    hi_feasible = traj.t_end
    if lo_feasible > hi_feasible:
        raise EwsError(f"solution span {traj.span} shorter than the window {T}")
    t1 = min(t_max, hi_feasible) if t_max is not None else hi_feasible
    t0 = max(t_min, lo_feasible) if t_min is not None else lo_feasible
    if t0 > t1:
        raise EwsError("empty time range after clipping to the solution span")

    path = mechanism.path
    fx = model.fx

    def g(s: float) -> float:
        return fx(s, traj(s), path(s))

    m = max(1, round(T / num.quad_h))
    h = T / m
    a0 = t0 - T
    n = m + max(1, int(math.ceil((t1 - t0) / h - 1e-12)))
    while a0 + n * h > traj.t_end + 1e-12:
        n -= 1
    if n < m:
        raise EwsError("no full window fits in the solution span")

    vals = _series_on_step(g, a0, h, n, m)
    gap = math.inf
    for _ in range(max_halvings):
        h2, n2, m2 = h / 2.0, 2 * n, 2 * m
        vals2 = _series_on_step(g, a0, h2, n2, m2)
        gap = float(np.abs(vals2[::2] - vals).max())
        if gap <= num.quad_tol:
            break
        h, n, m, vals = h2, n2, m2, vals2
    else:
        raise EwsError(f"quadrature refinement stalled at gap {gap:.3e}")
    times = a0 + h * np.arange(m, n + 1)
    return FtleSeries(solution.role, T, times, vals, gap)


# ---------------------------------------------------------------------------
# warning times
# ---------------------------------------------------------------------------

@dataclass
class EwsConfig:
    kappa: float
    L: float
    t_min: float | None = None
    t_max: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.kappa < 1.0:
            raise EwsError(f"kappa must lie in [0, 1), got {self.kappa}")
        if not self.L < 0.0:
            raise EwsError(f"reference exponent must be negative, got {self.L}")

    @property
    def threshold(self) -> float:
        return self.kappa * self.L


def warning_time(series: FtleSeries, ews: EwsConfig,
                 refine_tol: float = 1.0e-3) -> float | None:
    """First time the series reaches kappa*L, refined between grid nodes by
    bisection on the linear interpolant; None if never triggered."""
    thr = ews.threshold
    t, v = series.t, series.values
    if ews.t_min is not None or ews.t_max is not None:
        keep = np.ones(len(t), dtype=bool)
        if ews.t_min is not None:
            keep &= t >= ews.t_min
        if ews.t_max is not None:
            keep &= t <= ews.t_max
        t, v = t[keep], v[keep]
        if len(t) == 0:
            raise EwsError("empty search window")
    hits = np.nonzero(v >= thr)[0]
    if len(hits) == 0:
        return None
    i = int(hits[0])
    if i == 0:
        return float(t[0])
    lo_t, hi_t = float(t[i - 1]), float(t[i])
    lo_v, hi_v = float(v[i - 1]), float(v[i])

    def below(x: float) -> bool:
        w = (x - lo_t) / (hi_t - lo_t)
        return lo_v + w * (hi_v - lo_v) < thr

    a, b = lo_t, hi_t
    while b - a > refine_tol:
        mid = 0.5 * (a + b)
        if below(mid):
            a = mid
        else:
            b = mid
    return b


# ---------------------------------------------------------------------------
# detection-region sweep over (kappa, c)
# ---------------------------------------------------------------------------

@dataclass
class RegionGrid:
    axis1: list
    axis2: list
    outcomes: list            # outcomes[i][j] for (axis1[i], axis2[j])
    axis1_name: str = "axis1"
    axis2_name: str = "axis2"
    notes: dict = field(default_factory=dict)

    def rows(self):
        for i, a in enumerate(self.axis1):
            for j, b in enumerate(self.axis2):
                yield a, b, self.outcomes[i][j]

    def outcome(self, a, b):
        return self.outcomes[self.axis1.index(a)][self.axis2.index(b)]


def ews_region(model, mechanism_family, kappas, cs, T: float, L: float,
               num: Numerics = DEFAULT_NUMERICS,
               search: tuple[float, float] = (-400.0, 400.0),
               role: str = "upper-attractive") -> RegionGrid:
    """Detection grid over (kappa, c): a cell is True when the FTLE series of
    the pullback attractive solution reaches kappa*L inside the search window.

    One solution and one series per c serve the whole kappa column.
    """
    kappas = [float(k) for k in kappas]
    cs = [float(c) for c in cs]
    outcomes = [[None] * len(cs) for _ in kappas]
    notes = {}
    past_role = role if model.concavity == DCONCAVE else "attractive"
    for j, c in enumerate(cs):
        mech = mechanism_family(c)
        try:
            H = resolve_horizon(mech, num)
            cache = LimitCache(model, num)
            past = cache.get(mech.gamma_minus, H)
            sol = pullback_attractive(model, mech, past[past_role], H, num)
            series = ftle_series(model, mech, sol, T, num,
                                 t_min=search[0], t_max=search[1])
        except (EwsError, NonConvergentError, IntegrationError) as exc:
            notes[c] = f"{type(exc).__name__}: {exc}"
            for i in range(len(kappas)):
                outcomes[i][j] = False
            continue
        for i, k in enumerate(kappas):
            thr = k * L
            outcomes[i][j] = bool((series.values >= thr).any())
    return RegionGrid(kappas, cs, outcomes, "kappa", "c", notes)


# ---------------------------------------------------------------------------
# frozen-rate repeller curve and safe / no-return certificates
# ---------------------------------------------------------------------------

class _RepellerCurve:
    """Pullback repulsive solutions of the frozen-rate problems, cached by
    rounded rate; repeated queries at nearby rates reuse one solution."""

    def __init__(self, model, rate_family, num: Numerics, c_tol: float = 1.0e-4,
                 role: str | None = None):
        self.model = model
        self.rate_family = rate_family
        self.num = num
        self.c_tol = c_tol
        self.role = role if role is not None else (
            "middle-repulsive" if model.concavity == DCONCAVE else "repulsive")
        self._cache: dict[int, PullbackSolution] = {}
        self._caches: dict[float, LimitCache] = {}

    def solution(self, c: float) -> PullbackSolution:
        key = round(c / self.c_tol)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        mech = self.rate_family(c)
        H = resolve_horizon(mech, self.num)
        lim_cache = self._caches.setdefault(H, LimitCache(self.model, self.num))
        future = lim_cache.get(mech.gamma_plus, H)
        sol = pullback_repulsive(self.model, mech, future[self.role], H, self.num)
        self._cache[key] = sol
        return sol

    def value(self, c: float, t: float) -> float:
        sol = self.solution(c)
        if not sol.trajectory.covers(t):
            return math.nan
        return sol(t)


def m_curve(model, rate_family, delta, grid,
            num: Numerics = DEFAULT_NUMERICS,
            c_tol: float = 1.0e-4):
    """Sample the curve t -> m_{delta(t)}(t) built from the repulsive
    solutions of the frozen-rate problems; NaN where the repulsive solution
    does not extend back to t."""
    curve = _RepellerCurve(model, rate_family, num, c_tol)
    out = np.empty(len(grid))
    for i, t in enumerate(grid):
        out[i] = curve.value(float(delta(t)), float(t))
    return out


@dataclass
class SafePointReport:
    s1: float | None              # first crossing of the critical rate
    no_tipping: bool
    grid: np.ndarray
    u_delta: np.ndarray
    m_frozen: np.ndarray
    m_future: np.ndarray
    flags: list                   # safe | no-return | neither, per grid point
    conclusion: str
    t0: float

    def first(self, flag: str) -> float | None:
        for t, fl in zip(self.grid, self.flags):
            if fl == flag:
                return float(t)
        return None


def safe_no_return(model, profile, delta, c0: float, t0: float, grid,
                   c_star: float | None = None, d: float = 1.0,
                   num: Numerics = DEFAULT_NUMERICS,
                   inf_scan: float = 1.0e4) -> SafePointReport:
    """Certificates for the time-dependent-rate problem x' = f(t, x, G(D(t) t)).

    The warning point s1 is the first root of D(d s) - c0. On the grid
    restricted to t >= t0 (the onset of D's monotone growth), a point is safe
    when u_D passes above the frozen-rate repeller there, and a no-return
    point when u_D falls below the repulsive solution of the future rate.
    """
    from .transitions import ConstantRate, TimeDependentRate

    def dval(t: float) -> float:
        return float(delta(d * t))

    c_star = float(c_star) if c_star is not None else float(delta.limit_plus)

    # crude global infimum, then the exact no-tipping short-circuit
    ts = np.linspace(-inf_scan, inf_scan, 20001)
    dmin = min(dval(t) for t in ts)
    mech = TimeDependentRate(profile, delta, d)
    H = resolve_horizon(mech, num)
    grid = np.asarray([float(t) for t in grid])

    if dmin >= c0:
        empty = np.full(len(grid), math.nan)
        return SafePointReport(None, True, grid, empty, empty, empty,
                               ["neither"] * len(grid), "no tipping possible", t0)

    s1 = _first_root(dval, c0, -H, H)

    cache = LimitCache(model, num)
    past = cache.get(mech.gamma_minus, H)
    role = "upper-attractive" if model.concavity == DCONCAVE else "attractive"
    u = pullback_attractive(model, mech, past[role], H, num)

    rate_family = lambda c: ConstantRate(profile, c)
    curve = _RepellerCurve(model, rate_family, num)
    fut_sol = curve.solution(c_star)

    u_vals = np.empty(len(grid))
    mf_vals = np.empty(len(grid))
    mc_vals = np.empty(len(grid))
    flags = []
    for i, t in enumerate(grid):
        u_vals[i] = u(t) if (u.bounded and u.trajectory.covers(t)) else math.nan
        mf_vals[i] = curve.value(dval(t), t)
        mc_vals[i] = fut_sol(t) if fut_sol.trajectory.covers(t) else math.nan
        if t < t0 or math.isnan(u_vals[i]):
            flags.append("neither")
        elif not math.isnan(mf_vals[i]) and u_vals[i] > mf_vals[i]:
            flags.append("safe")
        elif not math.isnan(mc_vals[i]) and u_vals[i] < mc_vals[i]:
            flags.append("no-return")
        else:
            flags.append("neither")

    has_safe = "safe" in flags
    has_nr = "no-return" in flags
    if has_safe and not has_nr:
        conclusion = "tracking"
    elif has_nr and not has_safe:
        conclusion = "tipping"
    elif has_safe and has_nr:
        conclusion = "mixed"
    else:
        conclusion = "inconclusive"
    return SafePointReport(s1, False, grid, u_vals, mf_vals, mc_vals,
                           flags, conclusion, t0)


def _first_root(fn, level: float, lo: float, hi: float,
                samples: int = 8001, tol: float = 1.0e-9) -> float | None:
    ts = np.linspace(lo, hi, samples)
    prev_t, prev_v = ts[0], fn(ts[0]) - level
    if prev_v == 0.0:
        return float(prev_t)
    for t in ts[1:]:
        v = fn(t) - level
        if v == 0.0:
            return float(t)
        if (prev_v < 0.0) != (v < 0.0):
            a, b, fa = prev_t, t, prev_v
            while b - a > tol:
                mid = 0.5 * (a + b)
                fm = fn(mid) - level
                if fm == 0.0:
                    return float(mid)
                if (fa < 0.0) != (fm < 0.0):
                    b = mid
                else:
                    a, fa = mid, fm
            return 0.5 * (a + b)
        prev_t, prev_v = t, v
    return None


def crossover_time(solution: PullbackSolution, future_limits,
                   num: Numerics = DEFAULT_NUMERICS,
                   step: float = 0.25) -> float | None:
    """First time the solution lands on the future extinction branch, i.e.
    comes within the tracking tolerance of the lower attractor; None if it
    never does (tracking runs)."""
    upper = future_limits["upper-attractive"]
    lower = future_limits["lower-attractive"]
    traj = solution.trajectory
    lo = max(traj.t_start, upper.trajectory.t[0], lower.trajectory.t[0])
    hi = min(traj.t_end, upper.window[1], lower.window[1])

    def landed(t: float) -> bool:
        tol = num.track_tol_factor * (upper(t) - lower(t))
        return abs(traj(t) - lower(t)) < tol

    n = int((hi - lo) / step)
    prev = lo
    if landed(prev):
        return float(prev)
    for k in range(1, n + 1):
        t = lo + k * step
        if landed(t):
            a, b = prev, t
            while b - a > 1.0e-6:
                mid = 0.5 * (a + b)
                if landed(mid):
                    b = mid
                else:
                    a = mid
            return 0.5 * (a + b)
        prev = t
    return None


# ---------------------------------------------------------------------------
# reaction to a warning: increase the rate from the warning time on
# ---------------------------------------------------------------------------

@dataclass
class ReactionOutcome:
    label: CaseLabel
    t1: float | None
    r: float
    kappa: float
    warned: bool


def _terminal_label(model, x_end: float, H: float, future, num) -> tuple[str, dict]:
    if model.concavity == DCONCAVE:
        up, low = future["upper-attractive"](H), future["lower-attractive"](H)
        tol = num.track_tol_factor * (up - low)
        ev = {"x_end": x_end, "to_upper": abs(x_end - up),
              "to_lower": abs(x_end - low), "track_tol": tol}
        if ev["to_upper"] < tol:
            return "A", ev
        if ev["to_lower"] < tol:
            return "C2", ev
        return "indeterminate", ev
    att, rep = future["attractive"](H), future["repulsive"](H)
    tol = num.track_tol_factor * (att - rep)
    ev = {"x_end": x_end, "to_attractive": abs(x_end - att), "track_tol": tol}
    return ("A", ev) if ev["to_attractive"] < tol else ("indeterminate", ev)


class _UnreactedRun:
    """Shared state for a reaction sweep: the unreacted solution, its FTLE
    series, and the limit sets, computed once for the whole grid."""

    def __init__(self, model, profile, delta, T: float, num: Numerics):
        from .transitions import TimeDependentRate

        self.model = model
        self.profile = profile
        self.delta = delta
        self.T = T
        self.num = num
        self.mechanism = TimeDependentRate(profile, delta, 1.0)
        self.H = resolve_horizon(self.mechanism, num)
        self.cache = LimitCache(model, num)
        self.past = self.cache.get(self.mechanism.gamma_minus, self.H)
        self.future = self.cache.get(self.mechanism.gamma_plus, self.H)
        role = "upper-attractive" if model.concavity == DCONCAVE else "attractive"
        self.u = pullback_attractive(model, self.mechanism, self.past[role],
                                     self.H, num)
        self.series = ftle_series(model, self.mechanism, self.u, T, num)

    def unreacted_label(self) -> CaseLabel:
        from .classify import classify

        return classify(self.model, self.mechanism, self.num,
                        horizon=self.H, cache=self.cache)


def reaction_run(model, profile, delta, r: float, b: float, kappa: float,
                 T: float, L: float, num: Numerics = DEFAULT_NUMERICS,
                 shared: _UnreactedRun | None = None) -> ReactionOutcome:
    """Integrate the upper pullback solution, switch to the increased-rate
    equation at the first warning time, and label the terminal state.

    Without a warning the unreacted equation's own classification is
    returned, with t1 = None.
    """
    from .transitions import Reaction

    if r < 0.0:
        raise EwsError("reaction strength must be nonnegative")
    run = shared if shared is not None else _UnreactedRun(model, profile, delta, T, num)
    t1 = warning_time(run.series, EwsConfig(kappa, L))
    if t1 is None:
        return ReactionOutcome(run.unreacted_label(), None, r, kappa, False)

    reaction = Reaction(profile, delta, r, b, t1)
    rhs = model.transition_rhs(reaction)
    traj = integrate(rhs, t1, run.u(t1), run.H, num.integ)
    if traj.status != "completed":
        label, ev = "indeterminate", {"status": traj.status, "t_blow": traj.t_blow}
    else:
        label, ev = _terminal_label(model, traj.x[-1], run.H, run.future, num)
    ev.update({"t1": t1, "r": r, "kappa": kappa})
    return ReactionOutcome(CaseLabel(label, model.concavity, run.H, ev),
                           t1, r, kappa, True)


def reaction_region(model, profile, delta, rs, kappas, b: float, T: float,
                    L: float, num: Numerics = DEFAULT_NUMERICS) -> RegionGrid:
    """Grid of reaction outcomes over (r, kappa); the unreacted run and the
    warning times are shared across the whole grid."""
    rs = [float(r) for r in rs]
    kappas = [float(k) for k in kappas]
    shared = _UnreactedRun(model, profile, delta, T, num)
    outcomes = [[None] * len(kappas) for _ in rs]
    notes = {}
    for j, kappa in enumerate(kappas):
        for i, r in enumerate(rs):
            try:
                out = reaction_run(model, profile, delta, r, b, kappa, T, L,
                                   num, shared=shared)
                outcomes[i][j] = out.label.label
            except (EwsError, NonConvergentError, IntegrationError) as exc:
                outcomes[i][j] = "error"
                notes[(r, kappa)] = f"{type(exc).__name__}: {exc}"
    return RegionGrid(rs, kappas, outcomes, "r", "kappa", notes)
