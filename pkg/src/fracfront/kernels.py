"""Semianalytic evaluation of the power-tail comparison functions.

The two tail families, for beta > 0,

    lower kind:  psi(y) = |y|^(-beta) for y < -1,  1 for y >= -1
    upper kind:  psi(y) = |y|^(-beta) for y <= -1, 0 for y > -1

admit an exact decomposition of (-dxx)^a psi at x < -1: the integral over
the constant side reduces to a closed form (the "II" term)

    lower:  (|x|^(-beta) - 1) c_a / (2a |x+1|^(2a))
    upper:   |x|^(-beta)      c_a / (2a |x+1|^(2a))

while the tail-side integral (the "I" term) is a principal value handled by
symmetric pairing near the diagonal with a local expansion correction below
a small radius.  Dilation phi_eps(x) = psi(eps x) maps through the exact
scaling op[psi(eps .)](x) = eps^(2a) op[psi](eps x), and the reflected
variant phi1(x) = 1 - psi(-x) through
op[phi1](x) + c phi1'(x) = -(op[psi](-x) + (-c) psi'(-x)).

Two-term large-|x| expansions:

    lower:  -c_a/(2a) |x|^(-2a)        + c beta |x|^(-beta-1)
    upper:  -c_a/(beta-1) |x|^(-2a-1)  + c beta |x|^(-beta-1)

with remainder O(|x|^(-beta-2a)) in both cases.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from scipy import integrate

from .core import ProblemSpec

_QUAD_OPTS = dict(limit=300, epsabs=1e-16, epsrel=1e-11)


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to reach tolerance; carries the achieved error."""

    def __init__(self, message: str, achieved: float):
        super().__init__(f"{message} (achieved abs error estimate {achieved:.3e})")
        self.achieved = achieved


@dataclass(frozen=True)
class PowerTailFunction:
    """Power-tail comparison function, optionally dilated and reflected.

    kind "lower" requires beta in (0, 1), kind "upper" beta > 1 (the
    hypotheses of the two tail expansions).  epsilon dilates the argument;
    reflected selects phi1(x) = 1 - psi(-x).
    """

    beta: float
    kind: str = "lower"
    epsilon: float = 1.0
    reflected: bool = False

    def __post_init__(self):
        if self.kind not in ("lower", "upper"):
            raise ValueError(f"kind must be 'lower' or 'upper', got {self.kind!r}")
        if self.kind == "lower" and not (0.0 < self.beta < 1.0):
            raise ValueError(f"lower kind requires beta in (0,1), got {self.beta}")
        if self.kind == "upper" and not (self.beta > 1.0):
            raise ValueError(f"upper kind requires beta > 1, got {self.beta}")
        if self.epsilon <= 0.0:
            raise ValueError("epsilon must be positive")

    # -- pointwise values -------------------------------------------------

    def _base(self, y):
        y = np.asarray(y, dtype=float)
        tail = np.abs(y) ** (-self.beta)
        if self.kind == "lower":
            return np.where(y < -1.0, tail, 1.0)
        return np.where(y <= -1.0, tail, 0.0)

    def _base_derivative(self, y):
        y = np.asarray(y, dtype=float)
        d = self.beta * np.abs(y) ** (-self.beta - 1.0)
        return np.where(y < -1.0, d, 0.0)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.reflected:
            out = 1.0 - self._base(-self.epsilon * x)
        else:
            out = self._base(self.epsilon * x)
        if out.ndim == 0:
            return float(out)
        return out

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        if self.reflected:
            out = self.epsilon * self._base_derivative(-self.epsilon * x)
        else:
            out = self.epsilon * self._base_derivative(self.epsilon * x)
        if out.ndim == 0:
            return float(out)
        return out

    @property
    def junction(self) -> float:
        """Location of the kink: x = -1/eps (or +1/eps reflected)."""
        return (1.0 if self.reflected else -1.0) / self.epsilon

    def in_tail(self, x: float) -> bool:
        return x > self.junction if self.reflected else x < self.junction

    def scaled(self, epsilon: float) -> "PowerTailFunction":
        return replace(self, epsilon=epsilon)


def eval_power_tail(fn: PowerTailFunction, x: float) -> float:
    return fn(x)


# ---------------------------------------------------------------------------
#  semianalytic operator on the tail
# ---------------------------------------------------------------------------

def _base_operator(y: float, alpha: float, c_alpha: float, beta: float,
                   kind: str) -> tuple[float, float]:
    """(-dxx)^a psi at y < -1 for the unscaled, unreflected function.

    Returns (value, estimated quadrature error).  II in closed form, I by
    adaptive PV quadrature in the offset variable with symmetric pairing
    around the diagonal and power-series handling below a small radius.
    """
    if not y < -1.0:
        raise ValueError(f"tail evaluation requires y < -1, got {y}")
    R = -1.0 - y                       # distance to the kink
    ay = -y
    r = min(R / 2.0, ay / 2.0)
    delta = min(1e-3, r / 16.0)

    def f(t):
        return np.abs(t) ** (-beta)

    fy = ay ** (-beta)
    # series for int_0^delta (2 f(y) - f(y+s) - f(y-s)) s^(-1-2a) ds
    d2 = beta * (beta + 1.0) * ay ** (-beta - 2.0)
    d4 = beta * (beta + 1.0) * (beta + 2.0) * (beta + 3.0) * ay ** (-beta - 4.0)
    d6 = d4 * (beta + 4.0) * (beta + 5.0) * ay ** (-2.0)
    inner = -(d2 * delta ** (2.0 - 2 * alpha) / (2.0 - 2 * alpha)
              + d4 * delta ** (4.0 - 2 * alpha) / (12.0 * (4.0 - 2 * alpha))
              + d6 * delta ** (6.0 - 2 * alpha) / (360.0 * (6.0 - 2 * alpha)))

    S = 4.0 * ay
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        q1, e1 = integrate.quad(
            lambda s: (2 * fy - f(y + s) - f(y - s)) / s ** (1 + 2 * alpha),
            delta, r, **_QUAD_OPTS)
        q2, e2 = integrate.quad(
            lambda s: (fy - f(y + s)) / s ** (1 + 2 * alpha),
            r, R, **_QUAD_OPTS)
        q3, e3 = integrate.quad(
            lambda s: (fy - f(y - s)) / s ** (1 + 2 * alpha),
            r, S, **_QUAD_OPTS)
        # s in (S, inf) mapped to t = 1/s: integrand smooth on a finite interval
        q4, e4 = integrate.quad(
            lambda t: (fy - f(y - 1.0 / t)) * t ** (2 * alpha - 1.0),
            0.0, 1.0 / S, **_QUAD_OPTS)
        errs = [e1, e2, e3, e4]
    I = c_alpha * (inner + q1 + q2 + q3 + q4)
    if kind == "lower":
        II = (fy - 1.0) * c_alpha / (2 * alpha * abs(y + 1.0) ** (2 * alpha))
    else:
        II = fy * c_alpha / (2 * alpha * abs(y + 1.0) ** (2 * alpha))
    value = I + II
    err = c_alpha * float(np.sum(errs))
    if err > max(1e-12, 1e-4 * abs(value)):
        raise QuadratureError("PV quadrature of the tail operator did not converge", err)
    return value, err


def eval_operator_on_tail(fn: PowerTailFunction, spec: ProblemSpec, c: float,
                          x: float) -> float:
    """(-dxx)^a fn(x) + c fn'(x), exact II + adaptive PV I + exact drift.

    Requires x on the tail side of the junction (x < -1/eps, mirrored when
    reflected).  Scaling and reflection are applied through the exact
    dilation/reflection identities of the operator.
    """
    if not fn.in_tail(x):
        raise ValueError(f"x={x} is not in the tail region of {fn}")
    a, ca = spec.alpha, spec.c_alpha
    eps = fn.epsilon
    if fn.reflected:
        y = -eps * x
        base, _ = _base_operator(y, a, ca, fn.beta, fn.kind)
        drift = c * eps * float(fn._base_derivative(y))
        return -(eps ** (2 * a)) * base + drift
    y = eps * x
    base, _ = _base_operator(y, a, ca, fn.beta, fn.kind)
    return (eps ** (2 * a)) * base + c * eps * float(fn._base_derivative(y))


def leading_term(fn: PowerTailFunction, spec: ProblemSpec, c: float, x: float) -> float:
    """Two-term expansion of the tail operator exactly as the lemmas state it."""
    if not fn.in_tail(x):
        raise ValueError(f"x={x} is not in the tail region of {fn}")
    a, ca, beta = spec.alpha, spec.c_alpha, fn.beta
    eps = fn.epsilon
    y = abs(eps * x)
    if fn.kind == "lower":
        op_lead = -ca / (2 * a) * y ** (-2 * a)
    else:
        op_lead = -ca / (beta - 1.0) * y ** (-2 * a - 1.0)
    drift_lead = c * eps * beta * y ** (-beta - 1.0)
    sign = -1.0 if fn.reflected else 1.0
    return sign * eps ** (2 * a) * op_lead + drift_lead


# ---------------------------------------------------------------------------
#  expansion reports
# ---------------------------------------------------------------------------

@dataclass
class ExpansionReport:
    """Tabulated comparison of evaluated tail operator against the expansion."""

    x: np.ndarray
    evaluated: np.ndarray
    predicted: np.ndarray
    ratio: np.ndarray
    remainder: np.ndarray
    remainder_exponent: float
    remainder_exponent_target: float

    def rows(self):
        for k in range(len(self.x)):
            yield (float(self.x[k]), float(self.evaluated[k]), float(self.predicted[k]),
                   float(self.ratio[k]), float(self.remainder[k]))


def expansion_report(fn: PowerTailFunction, spec: ProblemSpec, c: float,
                     x_min: float, x_max: float, n_points: int = 12) -> ExpansionReport:
    """Evaluate/predict over a log-spaced range of tail points and fit the remainder.

    Requires x_max <= -10 and at least one decade of range.
    """
    if not (x_min < x_max <= -10.0):
        raise ValueError("need x_min < x_max <= -10")
    if abs(x_min) < 10.0 * abs(x_max):
        raise ValueError("need at least one decade of range: |x_min| >= 10 |x_max|")
    if n_points < 4:
        raise ValueError("need n_points >= 4")
    xs = -np.logspace(math.log10(abs(x_max)), math.log10(abs(x_min)), n_points)
    ev = np.array([eval_operator_on_tail(fn, spec, c, float(x)) for x in xs])
    pred = np.array([leading_term(fn, spec, c, float(x)) for x in xs])
    rem = ev - pred
    mask = np.abs(rem) > 0
    slope = np.polyfit(np.log(np.abs(xs[mask])), np.log(np.abs(rem[mask])), 1)[0]
    return ExpansionReport(
        x=xs, evaluated=ev, predicted=pred, ratio=ev / pred, remainder=rem,
        remainder_exponent=-float(slope),
        remainder_exponent_target=fn.beta + 2 * spec.alpha,
    )


# ---------------------------------------------------------------------------
#  super-solution speed threshold (explicit Lemma constants)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SupersolutionThreshold:
    """Certified speed constants for the lower-kind tail with beta = 2a-1.

    far_field      explicit constant c_a / (2a (2a-1)) above which the
                   drift term dominates the operator term asymptotically;
    crossing_A     the point |x| = theta^(-1/beta) where the tail value
                   drops below theta (the reaction switches off beyond);
    K              max(far_field, sup-f requirement on (-A, -1)): with this
                   speed the tail function is a super-solution with margin
                   sup f on the finite region, as in the bracketing lemma;
    K_certified    the sharp pointwise constant: smallest sampled c with
                   op(x) + c phi'(x) >= f(phi(x)) on every sampled x < -1;
    verified_min   min over samples of op + K phi' - f(phi) (>= 0).
    """

    far_field: float
    crossing_A: float
    K: float
    K_certified: float
    verified_min: float


@lru_cache(maxsize=32)
def supersolution_threshold(spec: ProblemSpec) -> SupersolutionThreshold:
    a = spec.alpha
    beta = 2.0 * a - 1.0
    ca = spec.c_alpha
    c_far = ca / (2.0 * a * beta)
    A = spec.theta ** (-1.0 / beta)
    f = spec.nonlinearity

    # sample the tail: dense through the reaction range, log-spaced far field
    xs = -np.unique(np.concatenate([
        np.linspace(1.02, min(1.5 * A, 3000.0), 400),
        np.logspace(math.log10(min(1.5 * A, 3000.0)), 4.0, 60),
    ]))
    xs.sort()
    phi = np.abs(xs) ** (-beta)
    dphi = beta * np.abs(xs) ** (-beta - 1.0)
    ops = np.array([_base_operator(float(x), a, ca, beta, "lower")[0] for x in xs])
    fvals = f(phi)

    K_cert = max(c_far, float(np.max((fvals - ops) / dphi)))
    mid = np.abs(xs) <= A
    K_supf = float(np.max((f.sup_f - ops[mid]) / dphi[mid])) if mid.any() else c_far
    K = max(c_far, K_supf, K_cert)
    verified = float(np.min(ops + K * dphi - fvals))
    if not np.isfinite(K) or verified < -1e-10:
        raise RuntimeError("super-solution threshold scan failed; "
                           "this signals an operator bug")
    return SupersolutionThreshold(far_field=c_far, crossing_A=A, K=K,
                                  K_certified=K_cert, verified_min=verified)


# ---------------------------------------------------------------------------
#  generic PV quadrature oracle
# ---------------------------------------------------------------------------

def pv_fractional_laplacian(u, x: float, alpha: float, c_alpha: float,
                            breakpoints: tuple[float, ...] = ()) -> float:
    """Direct adaptive PV quadrature of (-dxx)^a u(x) for a generic callable.

    u must be bounded with limits at both infinities approached at an
    integrable rate; breakpoints lists kinks/jumps so the quadrature never
    integrates across one.  Used as an independent oracle for the grid
    operator and the semianalytic tail evaluator, so it deliberately shares
    no code with either.
    """
    ux = float(u(x))
    pts = sorted(set(breakpoints))
    r = min([abs(x - p) for p in pts if p != x] + [1.0])
    if r <= 0:
        raise ValueError("x must not coincide with a breakpoint")

    def sym(s):
        return (2.0 * ux - float(u(x + s)) - float(u(x - s))) / s ** (1 + 2 * alpha)

    # below delta0 the raw second difference drowns in rounding; replace the
    # integrand by its local expansion -u'' s^(1-2a) with u'' from a central
    # difference at the cutoff scale
    delta0 = 1e-3 * r
    d2 = (float(u(x + delta0)) + float(u(x - delta0)) - 2.0 * ux) / delta0**2
    inner = -d2 * delta0 ** (2.0 - 2 * alpha) / (2.0 - 2 * alpha)

    dists = [abs(p - x) for p in pts]
    s_far = 20.0 * max(dists + [abs(x), 10.0])

    def one_side(sgn: float) -> float:
        # integrate (u(x) - u(x + sgn*s)) s^(-1-2a) over s in (r, inf),
        # in the distance variable so the adaptive rule always sees the mass;
        # the far part uses t = 1/s, turning the tail into a finite interval
        g = lambda s: (ux - float(u(x + sgn * s))) / s ** (1 + 2 * alpha)
        brk = sorted(d for d in dists if r < d < s_far)
        val, _ = integrate.quad(g, r, s_far, points=brk or None,
                                limit=400, epsabs=1e-13, epsrel=1e-10)
        far, _ = integrate.quad(
            lambda t: (ux - float(u(x + sgn / t))) * t ** (2 * alpha - 1.0),
            0.0, 1.0 / s_far, limit=200, epsabs=1e-13, epsrel=1e-10)
        return val + far

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        total = inner
        val, _ = integrate.quad(sym, delta0, r,
                                limit=400, epsabs=1e-13, epsrel=1e-10)
        total += val
        total += one_side(+1.0)
        total += one_side(-1.0)
    return c_alpha * total
