"""Transition profiles and the mechanisms that turn them into parameter paths.

A profile is a bounded closed-form curve with limits at -inf and +inf; it can
play the role of the transition itself (gamma values) or of a time-dependent
rate or phase. A mechanism composes a profile into the effective parameter
path t -> gamma(t) that drives the nonautonomous equation.
"""

from __future__ import annotations

import math
from typing import Callable


class TransitionError(ValueError):
    """Invalid profile or mechanism construction."""


# ---------------------------------------------------------------------------
# profiles
# ---------------------------------------------------------------------------

_PROFILE_KINDS = ("constant", "cauchy-pulse", "arctan-ramp", "sigmoid-blend", "rational-dip", "arctan")


class Profile:
    """Closed-form curve with finite limits at t -> -inf and t -> +inf.

    Kinds and parameters:

    - ``constant``:      value
    - ``cauchy-pulse``:  gamma_plus + (gamma_star - gamma_plus)/(1 + b*t**2); equal
                         limits gamma_plus, extremum gamma_star at t = 0, b > 0
    - ``arctan-ramp``:   offset + amplitude*atan(scale*t); limits offset -+ amplitude*pi/2
    - ``sigmoid-blend``: left/(1+exp(rate*t)) + right/(1+exp(-rate*t)); limits left, right
    - ``rational-dip``:  offset + amplitude/(width + t**2); equal limits offset
    - ``arctan``:        offset + amplitude*atan(scale*t); alias of arctan-ramp for
                         rate curves written around a nonzero offset
    """

    __slots__ = ("kind", "params", "_fn", "limit_minus", "limit_plus", "_lo", "_hi", "monotone_after")

    def __init__(self, kind: str, **params):
        if kind not in _PROFILE_KINDS:
            raise TransitionError(f"unknown profile kind {kind!r}")
        self.kind = kind
        self.params = dict(params)
        (self._fn, self.limit_minus, self.limit_plus,
         self._lo, self._hi, self.monotone_after) = _build_profile(kind, params)

    def __call__(self, t: float) -> float:
        return self._fn(t)

    @property
    def closure(self) -> Callable[[float], float]:
        return self._fn

    def range_bounds(self) -> tuple[float, float]:
        return (self._lo, self._hi)

    def require_positive(self, label: str = "rate") -> None:
        if self._lo <= 0.0:
            raise TransitionError(
                f"profile {self.kind!r} must stay strictly positive to act as a {label} "
                f"(range bound {self._lo:.6g})"
            )

    def describe(self) -> dict:
        return {"kind": self.kind, **self.params}

    def __repr__(self) -> str:  # pragma: no cover
        return f"Profile({self.kind}, {self.params})"


def _build_profile(kind, p):
    # returns (fn, limit_minus, limit_plus, range_lo, range_hi, monotone_after)
    if kind == "constant":
        v = float(p["value"])
        return (lambda t, v=v: v), v, v, v, v, -math.inf
    if kind == "cauchy-pulse":
        gp = float(p["gamma_plus"])
        gs = float(p["gamma_star"])
        b = float(p["b"])
        if b <= 0.0:
            raise TransitionError("cauchy-pulse needs b > 0")
        amp = gs - gp
        lo, hi = sorted((gp, gs))

        def fn(t, gp=gp, amp=amp, b=b):
            return gp + amp / (1.0 + b * t * t)

        # monotone toward the limit after the extremum at 0
        return fn, gp, gp, lo, hi, 0.0
    if kind in ("arctan-ramp", "arctan"):
        off = float(p.get("offset", 0.0))
        a = float(p["amplitude"])
        sc = float(p["scale"])
        if sc <= 0.0:
            raise TransitionError("arctan profile needs scale > 0")
        atan = math.atan
        half = a * math.pi / 2.0
        lo, hi = sorted((off - half, off + half))
        return (lambda t: off + a * atan(sc * t)), off - half, off + half, lo, hi, -math.inf
    if kind == "sigmoid-blend":
        left = float(p["left"])
        right = float(p["right"])
        rate = float(p.get("rate", 1.0))
        if rate <= 0.0:
            raise TransitionError("sigmoid-blend needs rate > 0")
        lo, hi = sorted((left, right))

        def fn(t, left=left, right=right, rate=rate):
            u = rate * t
            if u >= 0.0:
                s = 1.0 / (1.0 + math.exp(-u))
            else:
                e = math.exp(u)
                s = e / (1.0 + e)
            return left * (1.0 - s) + right * s

        return fn, left, right, lo, hi, -math.inf
    if kind == "rational-dip":
        off = float(p.get("offset", 0.0))
        a = float(p["amplitude"])
        wd = float(p["width"])
        if wd <= 0.0:
            raise TransitionError("rational-dip needs width > 0")
        lo, hi = sorted((off, off + a / wd))
        mono = 0.0 if a < 0.0 else -math.inf if a == 0.0 else 0.0
        return (lambda t: off + a / (wd + t * t)), off, off, lo, hi, mono
    raise TransitionError(f"unknown profile kind {kind!r}")


def make_profile(kind: str, **params) -> Profile:
    return Profile(kind, **params)


# ---------------------------------------------------------------------------
# mechanisms
# ---------------------------------------------------------------------------

class Mechanism:
    """Parameter path t -> gamma(t) with known limits at -inf/+inf."""

    kind: str = "?"

    @property
    def path(self) -> Callable[[float], float]:
        return self._path

    def __call__(self, t: float) -> float:
        return self._path(t)

    @property
    def gamma_minus(self) -> float:
        return self._gamma_minus

    @property
    def gamma_plus(self) -> float:
        return self._gamma_plus

    def tail_gap(self, horizon: float) -> float:
        """How far the path still is from its limits at -+horizon."""
        p = self._path
        return max(abs(p(-horizon) - self._gamma_minus), abs(p(horizon) - self._gamma_plus))

    def path_scale(self, horizon: float = 400.0, samples: int = 401) -> float:
        """Spread of the path over [-horizon, horizon]; 0 for constant paths."""
        p = self._path
        vals = [p(-horizon + 2.0 * horizon * i / (samples - 1)) for i in range(samples)]
        return max(vals) - min(vals)

    def describe(self) -> dict:
        raise NotImplementedError


class ConstantRate(Mechanism):
    """gamma(t) = Gamma(c*t) for a fixed rate c > 0."""

    kind = "constant-rate"

    def __init__(self, profile: Profile, c: float):
        if c <= 0.0:
            raise TransitionError(f"rate must be positive, got {c}")
        self.profile = profile
        self.c = float(c)
        G = profile.closure
        c = self.c
        self._path = lambda t: G(c * t)
        self._gamma_minus = profile.limit_minus
        self._gamma_plus = profile.limit_plus

    def describe(self):
        return {"kind": self.kind, "profile": self.profile.describe(), "c": self.c}


class Phase(Mechanism):
    """gamma(t) = Gamma(c*(t + offset))."""

    kind = "phase"

    def __init__(self, profile: Profile, c: float, offset: float):
        if c <= 0.0:
            raise TransitionError(f"rate must be positive, got {c}")
        self.profile = profile
        self.c = float(c)
        self.offset = float(offset)
        G = profile.closure
        c, s = self.c, self.offset
        self._path = lambda t: G(c * (t + s))
        self._gamma_minus = profile.limit_minus
        self._gamma_plus = profile.limit_plus

    def describe(self):
        return {"kind": self.kind, "profile": self.profile.describe(),
                "c": self.c, "offset": self.offset}


class Size(Mechanism):
    """gamma(t) = c*Gamma(t); only meaningful for models where gamma acts by
    translation of the state variable."""

    kind = "size"

    def __init__(self, profile: Profile, c: float):
        if c <= 0.0:
            raise TransitionError(f"size factor must be positive, got {c}")
        self.profile = profile
        self.c = float(c)
        G = profile.closure
        c = self.c
        self._path = lambda t: c * G(t)
        self._gamma_minus = c * profile.limit_minus
        self._gamma_plus = c * profile.limit_plus

    def describe(self):
        return {"kind": self.kind, "profile": self.profile.describe(), "c": self.c}


class TimeDependentRate(Mechanism):
    """gamma(t) = Gamma(Delta(d*t) * t) for a strictly positive rate curve Delta."""

    kind = "time-dependent-rate"

    def __init__(self, profile: Profile, delta: Profile, d: float = 1.0):
        if d <= 0.0:
            raise TransitionError(f"rate-curve speed d must be positive, got {d}")
        delta.require_positive("rate")
        self.profile = profile
        self.delta = delta
        self.d = float(d)
        G = profile.closure
        D = delta.closure
        d = self.d
        self._path = lambda t: G(D(d * t) * t)
        self._gamma_minus = profile.limit_minus
        self._gamma_plus = profile.limit_plus

    def describe(self):
        return {"kind": self.kind, "profile": self.profile.describe(),
                "delta": self.delta.describe(), "d": self.d}


class TimeDependentPhase(Mechanism):
    """gamma(t) = Gamma(c*(t - Delta(d*t))) (convention "minus", the default)
    or Gamma(c*(t + Delta(d*t))) (convention "plus")."""

    kind = "time-dependent-phase"

    def __init__(self, profile: Profile, c: float, delta: Profile, d: float = 1.0,
                 convention: str = "minus"):
        if c <= 0.0:
            raise TransitionError(f"rate must be positive, got {c}")
        if d <= 0.0:
            raise TransitionError(f"phase-curve speed d must be positive, got {d}")
        if convention not in ("minus", "plus"):
            raise TransitionError(f"convention must be 'minus' or 'plus', got {convention!r}")
        self.profile = profile
        self.delta = delta
        self.c = float(c)
        self.d = float(d)
        self.convention = convention
        G = profile.closure
        D = delta.closure
        c, d = self.c, self.d
        if convention == "minus":
            self._path = lambda t: G(c * (t - D(d * t)))
        else:
            self._path = lambda t: G(c * (t + D(d * t)))
        self._gamma_minus = profile.limit_minus
        self._gamma_plus = profile.limit_plus

    def describe(self):
        return {"kind": self.kind, "profile": self.profile.describe(),
                "delta": self.delta.describe(), "c": self.c, "d": self.d,
                "convention": self.convention}


class Switching(Mechanism):
    """Follows the left mechanism's path for t < t0 and the right one after."""

    kind = "switching"

    def __init__(self, left: Mechanism, right: Mechanism, t0: float = 0.0):
        self.left = left
        self.right = right
        self.t0 = float(t0)
        pl, pr, t0 = left.path, right.path, self.t0
        self._path = lambda t: pl(t) if t < t0 else pr(t)
        self._gamma_minus = left.gamma_minus
        self._gamma_plus = right.gamma_plus

    def describe(self):
        return {"kind": self.kind, "left": self.left.describe(),
                "right": self.right.describe(), "t0": self.t0}


class Reaction(Mechanism):
    """gamma(t) = Gamma((Delta(t) + r*tanh(b*(t - t1))) * t).

    Models a reaction of strength r >= 0 and sharpness b > 0 applied to the
    rate curve from the reaction time t1 on; r = 0 reduces to the plain
    time-dependent rate mechanism.
    """

    kind = "reaction"

    def __init__(self, profile: Profile, delta: Profile, r: float, b: float, t1: float):
        if r < 0.0:
            raise TransitionError(f"reaction strength must be >= 0, got {r}")
        if b <= 0.0:
            raise TransitionError(f"reaction sharpness must be positive, got {b}")
        delta.require_positive("rate")
        self.profile = profile
        self.delta = delta
        self.r = float(r)
        self.b = float(b)
        self.t1 = float(t1)
        G = profile.closure
        D = delta.closure
        r, b, t1 = self.r, self.b, self.t1
        tanh = math.tanh
        self._path = lambda t: G((D(t) + r * tanh(b * (t - t1))) * t)
        # asymptotic speed of the profile argument decides which limit is reached
        past = delta.limit_minus - self.r
        self._gamma_minus = profile.limit_minus if past > 0.0 else profile.limit_plus
        self._gamma_plus = profile.limit_plus   # delta.limit_plus + r > 0 always

    def describe(self):
        return {"kind": self.kind, "profile": self.profile.describe(),
                "delta": self.delta.describe(), "r": self.r, "b": self.b, "t1": self.t1}


def effective_parameter(mechanism: Mechanism, t: float) -> float:
    """Value of the parameter path driven by the mechanism at time t."""
    return mechanism.path(t)
