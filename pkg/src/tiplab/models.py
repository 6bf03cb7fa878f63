"""Scalar population models with time-dependent coefficients.

Every model in the catalog is a scalar field f(t, x, gamma) that is either
concave or concave-derivative ("d-concave") in x on its declared state box.
Coefficients are drawn from a closed catalog of bounded closed forms, so
ranges and positivity can be checked without numerics on the model itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable


class ModelError(ValueError):
    """Invalid model construction or use."""


class DomainError(ModelError):
    """Evaluation at or beyond a pole of the vector field."""


# ---------------------------------------------------------------------------
# coefficient catalog
# ---------------------------------------------------------------------------

_COEFF_KINDS = (
    "constant",
    "sin",
    "sin2",
    "rational-dip",
    "arctan",
    "sigmoid-blend",
    "sum",
)


def _stable_sigmoid(u: float) -> float:
    # logistic function without overflow for large |u|
    if u >= 0.0:
        return 1.0 / (1.0 + math.exp(-u))
    e = math.exp(u)
    return e / (1.0 + e)


class Coefficient:
    """Bounded closed-form scalar function of time.

    Supported kinds and parameters:

    - ``constant``:     value
    - ``sin``:          offset + amplitude*sin(omega*t)
    - ``sin2``:         offset + amplitude*sin(omega*t)**2
    - ``rational-dip``: offset + amplitude/(width + t**2), width > 0
    - ``arctan``:       offset + amplitude*atan(scale*(t - center)), scale > 0
    - ``sigmoid-blend``: left/(1+exp(rate*(t-center))) + right/(1+exp(-rate*(t-center)))
    - ``sum``:          offset + sum of nested coefficient terms
    """

    __slots__ = ("kind", "params", "_fn", "_lo", "_hi")

    def __init__(self, kind: str, **params):
        if kind not in _COEFF_KINDS:
            raise ModelError(f"unknown coefficient kind {kind!r}")
        self.kind = kind
        self.params = dict(params)
        self._fn, self._lo, self._hi = _build_coefficient(kind, params)

    def __call__(self, t: float) -> float:
        return self._fn(t)

    @property
    def closure(self) -> Callable[[float], float]:
        return self._fn

    def bounds(self) -> tuple[float, float]:
        """Closed-form range bounds (lo, hi); the range lies inside them."""
        return (self._lo, self._hi)

    def check_positive(self, t_max: float = 1.0e4, step: float = 0.25) -> float:
        """Sampled minimum over a dense grid of [0, t_max]; raises if <= 0."""
        fn = self._fn
        n = int(t_max / step) + 1
        m = min(fn(i * step) for i in range(n))
        if m <= 0.0:
            raise ModelError(
                f"coefficient {self.kind!r} is not positively bounded below "
                f"(sampled min {m:.6g})"
            )
        return m

    def describe(self) -> dict:
        d = {"kind": self.kind}
        for k, v in self.params.items():
            if k == "terms":
                d["terms"] = [c.describe() for c in v]
            else:
                d[k] = v
        return d

    def __repr__(self) -> str:  # pragma: no cover
        return f"Coefficient({self.kind}, {self.params})"


def _build_coefficient(kind, p):
    if kind == "constant":
        v = float(p["value"])
        return (lambda t, v=v: v), v, v
    if kind == "sin":
        off = float(p.get("offset", 0.0))
        a = float(p["amplitude"])
        w = float(p["omega"])
        sin = math.sin
        return (lambda t: off + a * sin(w * t)), off - abs(a), off + abs(a)
    if kind == "sin2":
        off = float(p.get("offset", 0.0))
        a = float(p["amplitude"])
        w = float(p["omega"])
        sin = math.sin
        lo, hi = sorted((off, off + a))
        return (lambda t: off + a * sin(w * t) ** 2), lo, hi
    if kind == "rational-dip":
        off = float(p.get("offset", 0.0))
        a = float(p["amplitude"])
        wd = float(p["width"])
        if wd <= 0.0:
            raise ModelError("rational-dip needs width > 0")
        lo, hi = sorted((off, off + a / wd))
        return (lambda t: off + a / (wd + t * t)), lo, hi
    if kind == "arctan":
        off = float(p.get("offset", 0.0))
        a = float(p["amplitude"])
        sc = float(p["scale"])
        ce = float(p.get("center", 0.0))
        if sc <= 0.0:
            raise ModelError("arctan needs scale > 0")
        atan = math.atan
        half = abs(a) * math.pi / 2.0
        return (lambda t: off + a * atan(sc * (t - ce))), off - half, off + half
    if kind == "sigmoid-blend":
        left = float(p["left"])
        right = float(p["right"])
        rate = float(p.get("rate", 1.0))
        ce = float(p.get("center", 0.0))
        if rate <= 0.0:
            raise ModelError("sigmoid-blend needs rate > 0")
        lo, hi = sorted((left, right))

        def fn(t, left=left, right=right, rate=rate, ce=ce):
            s = _stable_sigmoid(rate * (t - ce))
            return left * (1.0 - s) + right * s

        return fn, lo, hi
    if kind == "sum":
        off = float(p.get("offset", 0.0))
        terms = p["terms"]
        if not terms or not all(isinstance(c, Coefficient) for c in terms):
            raise ModelError("sum terms must be Coefficient instances")
        fns = tuple(c.closure for c in terms)
        lo = off + sum(c.bounds()[0] for c in terms)
        hi = off + sum(c.bounds()[1] for c in terms)
        return (lambda t: off + sum(f(t) for f in fns)), lo, hi
    raise ModelError(f"unknown coefficient kind {kind!r}")


def make_coefficient(spec) -> Coefficient:
    """Build a Coefficient from a number, a Coefficient, or a {kind, params} dict."""
    if isinstance(spec, Coefficient):
        return spec
    if isinstance(spec, (int, float)):
        return Coefficient("constant", value=float(spec))
    if isinstance(spec, dict):
        kind = spec.get("kind")
        if "params" in spec:
            params = dict(spec["params"])
        else:
            params = {k: v for k, v in spec.items() if k != "kind"}
        if kind == "sum":
            params["terms"] = [make_coefficient(s) for s in params.get("terms", [])]
        return Coefficient(kind, **params)
    raise ModelError(f"cannot interpret coefficient spec {spec!r}")


# ---------------------------------------------------------------------------
# model catalog
# ---------------------------------------------------------------------------

CONCAVE = "concave"
DCONCAVE = "d-concave"


@dataclass
class VectorFieldModel:
    """Scalar vector field f(t, x, gamma) from the closed family catalog.

    The state box bounds the region where the hyperbolic solutions of
    interest live; seeds and concavity checks are taken relative to it.
    The domain is the open x-interval on which the field is defined
    (poles of rational terms lie outside it).
    """

    family: str
    concavity: str
    coefficients: dict[str, Coefficient]
    constants: dict[str, float]
    state_box: tuple[float, float]
    domain: tuple[float, float]
    translation_invariant: bool = False
    _f: Callable = field(repr=False, default=None)
    _fx: Callable = field(repr=False, default=None)
    _fxx: Callable = field(repr=False, default=None)

    def f(self, t: float, x: float, gamma: float) -> float:
        return self._f(t, x, gamma)

    def fx(self, t: float, x: float, gamma: float) -> float:
        return self._fx(t, x, gamma)

    def fxx(self, t: float, x: float, gamma: float) -> float:
        if self._fxx is None:
            raise ModelError(
                f"second x-derivative is not exposed for concave family {self.family!r}"
            )
        return self._fxx(t, x, gamma)

    def frozen_rhs(self, gamma: float) -> Callable[[float, float], float]:
        """Right-hand side t, x -> f(t, x, gamma) with gamma frozen."""
        f = self._f
        return lambda t, x: f(t, x, gamma)

    def transition_rhs(self, mechanism) -> Callable[[float, float], float]:
        """Right-hand side t, x -> f(t, x, path(t)) along a parameter path."""
        f = self._f
        path = mechanism.path
        return lambda t, x: f(t, x, path(t))

    def seeds(self, margin: float = 10.0) -> tuple[float, float]:
        """Burn-in seeds outside the state box, clamped into the domain."""
        lo, hi = self.state_box
        width = hi - lo
        dlo, dhi = self.domain
        s_lo = lo - margin
        if dlo != -math.inf:
            s_lo = max(s_lo, dlo + 0.01 * width)
        s_hi = hi + margin
        if dhi != math.inf:
            s_hi = min(s_hi, dhi - 0.01 * width)
        return (s_lo, s_hi)

    def describe(self) -> dict:
        return {
            "family": self.family,
            "coefficients": {k: c.describe() for k, c in self.coefficients.items()},
            "constants": dict(self.constants),
            "state_box": list(self.state_box),
        }


def eval_f(model, t: float, x: float, gamma: float) -> float:
    return model.f(t, x, gamma)


def eval_fx(model, t: float, x: float, gamma: float) -> float:
    return model.fx(t, x, gamma)


def eval_fxx(model, t: float, x: float, gamma: float) -> float:
    return model.fxx(t, x, gamma)


# family name -> (concavity, required coefficients, optional coefficients w/ defaults,
#                required positive, constants w/ defaults)
_FAMILIES: dict[str, dict] = {
    "concave-logistic-migration": {
        "concavity": CONCAVE,
        "required": ("r", "I"),
        "optional": {},
        "positive": ("r",),
        "constants": {},
    },
    "gompertz": {
        "concavity": CONCAVE,
        "required": ("r", "K"),
        "optional": {"phi": 1.0},
        "positive": ("r", "K", "phi"),
        "constants": {},
    },
    "beverton-holt": {
        "concavity": CONCAVE,
        "required": ("r", "alpha"),
        "optional": {"phi": 1.0},
        "positive": ("r", "alpha", "phi"),
        "constants": {},
    },
    "allee-multiplicative-cubic": {
        "concavity": DCONCAVE,
        "required": ("r", "K", "S"),
        "optional": {"phi": 1.0},
        "positive": ("r", "K", "phi"),
        "constants": {},
    },
    "allee-multiplicative-rational": {
        "concavity": DCONCAVE,
        "required": ("r", "K", "mu", "nu"),
        "optional": {"phi": 1.0},
        "positive": ("r", "K", "mu", "nu", "phi"),
        "constants": {},
    },
    "allee-holling2": {
        "concavity": DCONCAVE,
        "required": ("r", "K", "a", "b"),
        "optional": {"phi": 1.0},
        "positive": ("r", "K", "a", "b", "phi"),
        "constants": {},
    },
    "holling-predation-linear-gamma": {
        "concavity": DCONCAVE,
        "required": ("r", "K", "b"),
        "optional": {},
        "positive": ("r", "K", "b"),
        "constants": {"p0": 52.0, "p1": 13.0},
    },
}

FAMILY_NAMES = tuple(_FAMILIES)


def make_model(
    family: str,
    coefficients: dict,
    constants: dict | None = None,
    state_box: tuple[float, float] | None = None,
) -> VectorFieldModel:
    """Build a catalog model.

    Coefficient values may be numbers, Coefficient objects, or spec dicts.
    Positivity of the coefficients the family requires positive is verified
    by sampling over [0, 1e4].
    """
    if family not in _FAMILIES:
        raise ModelError(f"unknown family {family!r}; known: {sorted(_FAMILIES)}")
    spec = _FAMILIES[family]
    coeffs: dict[str, Coefficient] = {}
    for name in spec["required"]:
        if name not in coefficients:
            raise ModelError(f"family {family!r} requires coefficient {name!r}")
        coeffs[name] = make_coefficient(coefficients[name])
    for name, default in spec["optional"].items():
        coeffs[name] = make_coefficient(coefficients.get(name, default))
    unknown = set(coefficients) - set(coeffs)
    if unknown:
        raise ModelError(f"family {family!r} does not take coefficients {sorted(unknown)}")
    consts = dict(spec["constants"])
    for k, v in (constants or {}).items():
        if k not in consts:
            raise ModelError(f"family {family!r} does not take constant {k!r}")
        consts[k] = float(v)
    for name in spec["positive"]:
        coeffs[name].check_positive()

    builder = _BUILDERS[family]
    f, fx, fxx, domain, default_box, translation = builder(coeffs, consts)
    box = tuple(float(v) for v in (state_box if state_box is not None else default_box))
    if not (domain[0] < box[0] < box[1] < domain[1]):
        raise ModelError(f"state box {box} must sit strictly inside the domain {domain}")
    return VectorFieldModel(
        family=family,
        concavity=spec["concavity"],
        coefficients=coeffs,
        constants=consts,
        state_box=box,
        domain=domain,
        translation_invariant=translation,
        _f=f,
        _fx=fx,
        _fxx=fxx,
    )


def _build_logistic_migration(c, consts):
    r, I = c["r"].closure, c["I"].closure

    def f(t, x, g):
        d = x - g
        return -r(t) * d * d + I(t)

    def fx(t, x, g):
        return -2.0 * r(t) * (x - g)

    inf = math.inf
    return f, fx, None, (-inf, inf), (-20.0, 20.0), True


def _build_gompertz(c, consts):
    r, K, phi = c["r"].closure, c["K"].closure, c["phi"].closure
    log = math.log

    def f(t, x, g):
        if x <= 0.0:
            raise DomainError(f"gompertz field undefined at x={x!r} <= 0")
        return -r(t) * x * log(x / K(t)) + g * phi(t)

    def fx(t, x, g):
        if x <= 0.0:
            raise DomainError(f"gompertz field undefined at x={x!r} <= 0")
        return -r(t) * (log(x / K(t)) + 1.0)

    k_lo, k_hi = c["K"].bounds()
    return f, fx, None, (0.0, math.inf), (0.005 * k_lo, 3.0 * k_hi), False


def _build_beverton_holt(c, consts):
    r, alpha, phi = c["r"].closure, c["alpha"].closure, c["phi"].closure

    def f(t, x, g):
        den = 1.0 + alpha(t) * x
        if den <= 0.0:
            raise DomainError(f"beverton-holt field undefined at x={x!r}")
        return x * ((1.0 + r(t)) / den - 1.0) + g * phi(t)

    def fx(t, x, g):
        den = 1.0 + alpha(t) * x
        if den <= 0.0:
            raise DomainError(f"beverton-holt field undefined at x={x!r}")
        return (1.0 + r(t)) / (den * den) - 1.0

    a_lo, a_hi = c["alpha"].bounds()
    r_lo, r_hi = c["r"].bounds()
    domain_lo = -1.0 / a_hi
    box = (0.5 * domain_lo, 3.0 * r_hi / a_lo + 10.0)
    return f, fx, None, (domain_lo, math.inf), box, False


def _build_allee_cubic(c, consts):
    r, K, S, phi = c["r"].closure, c["K"].closure, c["S"].closure, c["phi"].closure

    def f(t, x, g):
        Kt = K(t)
        return r(t) * x * (1.0 - x / Kt) * (x - S(t)) / Kt + g * phi(t)

    def fx(t, x, g):
        Kt = K(t)
        St = S(t)
        return r(t) / Kt * (2.0 * x - St - (3.0 * x * x - 2.0 * St * x) / Kt)

    def fxx(t, x, g):
        Kt = K(t)
        return r(t) / Kt * (2.0 - (6.0 * x - 2.0 * S(t)) / Kt)

    k_hi = c["K"].bounds()[1]
    s_abs = max(abs(b) for b in c["S"].bounds())
    half = 1.5 * k_hi + s_abs + 1.0
    inf = math.inf
    return f, fx, fxx, (-inf, inf), (-half, half), False


def _build_allee_rational(c, consts):
    r, K, mu, nu = c["r"].closure, c["K"].closure, c["mu"].closure, c["nu"].closure
    phi = c["phi"].closure

    def f(t, x, g):
        nut = nu(t)
        if nut + x <= 0.0:
            raise DomainError(f"allee-multiplicative-rational undefined at x={x!r}")
        return r(t) * x * (1.0 - x / K(t)) * (x - mu(t)) / (nut + x) + g * phi(t)

    def fx(t, x, g):
        Kt = K(t)
        mut = mu(t)
        rt = r(t)
        d = nu(t) + x
        if d <= 0.0:
            raise DomainError(f"allee-multiplicative-rational undefined at x={x!r}")
        N = rt * (x * x - mut * x - (x ** 3 - mut * x * x) / Kt)
        Np = rt * (2.0 * x - mut - (3.0 * x * x - 2.0 * mut * x) / Kt)
        return (Np * d - N) / (d * d)

    def fxx(t, x, g):
        Kt = K(t)
        mut = mu(t)
        rt = r(t)
        d = nu(t) + x
        if d <= 0.0:
            raise DomainError(f"allee-multiplicative-rational undefined at x={x!r}")
        N = rt * (x * x - mut * x - (x ** 3 - mut * x * x) / Kt)
        Np = rt * (2.0 * x - mut - (3.0 * x * x - 2.0 * mut * x) / Kt)
        Npp = rt * (2.0 - (6.0 * x - 2.0 * mut) / Kt)
        return (Npp * d * d - 2.0 * Np * d + 2.0 * N) / (d ** 3)

    nu_lo = c["nu"].bounds()[0]
    k_hi = c["K"].bounds()[1]
    return f, fx, fxx, (-nu_lo, math.inf), (-0.1 * nu_lo, 1.6 * k_hi), False


def _build_allee_holling2(c, consts):
    r, K, a, b = c["r"].closure, c["K"].closure, c["a"].closure, c["b"].closure
    phi = c["phi"].closure

    def f(t, x, g):
        bt = b(t)
        if x + bt <= 0.0:
            raise DomainError(f"allee-holling2 undefined at x={x!r}")
        return r(t) * x * (1.0 - x / K(t)) - a(t) * x / (x + bt) + g * phi(t)

    def fx(t, x, g):
        bt = b(t)
        d = x + bt
        if d <= 0.0:
            raise DomainError(f"allee-holling2 undefined at x={x!r}")
        return r(t) * (1.0 - 2.0 * x / K(t)) - a(t) * bt / (d * d)

    def fxx(t, x, g):
        bt = b(t)
        d = x + bt
        if d <= 0.0:
            raise DomainError(f"allee-holling2 undefined at x={x!r}")
        return -2.0 * r(t) / K(t) + 2.0 * a(t) * bt / (d ** 3)

    b_lo = c["b"].bounds()[0]
    k_hi = c["K"].bounds()[1]
    return f, fx, fxx, (-b_lo, math.inf), (-0.5 * b_lo, 1.5 * k_hi), False


def _build_holling_linear(c, consts):
    r, K, b = c["r"].closure, c["K"].closure, c["b"].closure
    p0, p1 = consts["p0"], consts["p1"]

    def f(t, x, g):
        bt = b(t)
        if x + bt <= 0.0:
            raise DomainError(f"holling-predation-linear-gamma undefined at x={x!r}")
        return r(t) * x * (1.0 - x / K(t)) - (p0 - p1 * g) * x / (x + bt)

    def fx(t, x, g):
        bt = b(t)
        d = x + bt
        if d <= 0.0:
            raise DomainError(f"holling-predation-linear-gamma undefined at x={x!r}")
        return r(t) * (1.0 - 2.0 * x / K(t)) - (p0 - p1 * g) * bt / (d * d)

    def fxx(t, x, g):
        bt = b(t)
        d = x + bt
        if d <= 0.0:
            raise DomainError(f"holling-predation-linear-gamma undefined at x={x!r}")
        return -2.0 * r(t) / K(t) + 2.0 * (p0 - p1 * g) * bt / (d ** 3)

    b_lo = c["b"].bounds()[0]
    k_hi = c["K"].bounds()[1]
    return f, fx, fxx, (-b_lo, math.inf), (-0.5 * b_lo, 1.5 * k_hi), False


_BUILDERS = {
    "concave-logistic-migration": _build_logistic_migration,
    "gompertz": _build_gompertz,
    "beverton-holt": _build_beverton_holt,
    "allee-multiplicative-cubic": _build_allee_cubic,
    "allee-multiplicative-rational": _build_allee_rational,
    "allee-holling2": _build_allee_holling2,
    "holling-predation-linear-gamma": _build_holling_linear,
}


# ---------------------------------------------------------------------------
# concavity verification
# ---------------------------------------------------------------------------

@dataclass
class ConcavityReport:
    concavity: str
    passed: bool
    delta: float          # margin: second differences are <= -delta
    worst: float          # largest sampled second difference quotient
    samples: int


def check_concavity_class(
    model,
    state_box: tuple[float, float] | None = None,
    t_span: tuple[float, float] = (0.0, 60.0),
    t_samples: int = 31,
    x_samples: int = 41,
    gammas: tuple[float, ...] = (-1.0, 0.0, 1.0),
    step_factor: float = 1.0e-3,
) -> ConcavityReport:
    """Verify strict concavity of f (concave class) or of f_x (d-concave class)
    by sampled second difference quotients in x over the state box.

    Passes when every sampled quotient is <= -delta for the reported delta > 0.
    """
    box = state_box if state_box is not None else model.state_box
    lo, hi = box
    h = (hi - lo) * step_factor
    # keep x +- h inside the sampled box
    xs = [lo + h + (hi - lo - 2 * h) * i / (x_samples - 1) for i in range(x_samples)]
    ts = [t_span[0] + (t_span[1] - t_span[0]) * i / (t_samples - 1) for i in range(t_samples)]
    if model.concavity == CONCAVE:
        g = model.f
    else:
        g = model.fx
    worst = -math.inf
    n = 0
    for gam in gammas:
        for t in ts:
            for x in xs:
                d2 = (g(t, x + h, gam) - 2.0 * g(t, x, gam) + g(t, x - h, gam)) / (h * h)
                if d2 > worst:
                    worst = d2
                n += 1
    passed = worst < 0.0
    return ConcavityReport(
        concavity=model.concavity,
        passed=passed,
        delta=-worst if passed else 0.0,
        worst=worst,
        samples=n,
    )
