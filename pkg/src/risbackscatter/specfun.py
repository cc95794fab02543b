"""
Special functions and quadrature for the error-probability integral.

Everything here works with integer shape / order parameters, which is all
the detector statistics need: the inactive-codeword energies are Erlang
(integer-shape Gamma, unit scale) and the active ones are noncentral
chi-square with an even number of degrees of freedom, whose survival
function is the generalized Marcum Q-function of integer order.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "QuadratureResult",
    "ConvergenceError",
    "gamma_q_int",
    "gamma_p_int",
    "poisson_window",
    "marcum_q",
    "marcum_p",
    "marcum_q_grid",
    "erlang_pdf",
    "erlang_cdf",
    "erlang_max_support",
    "integrate_adaptive",
]

# Poisson tail mass left out of a truncated mixture.
POISSON_TAIL = 1e-15
# Subdivision budget for the adaptive integrator.
MAX_SUBDIVISIONS = 500


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    abs_error_estimate: float
    evaluations: int


class ConvergenceError(ArithmeticError):
    """Adaptive quadrature ran out of subdivisions.

    The best available estimate travels with the exception so callers can
    decide whether it is good enough.
    """

    def __init__(self, message: str, result: QuadratureResult):
        super().__init__(message)
        self.result = result


def _check_order(k) -> int:
    if isinstance(k, bool) or not isinstance(k, (int, np.integer)) or k < 1:
        raise ValueError(f"order/shape must be a positive integer, got {k!r}")
    return int(k)


def _check_nonneg(name: str, x) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    if np.any(arr < 0):
        raise ValueError(f"{name} must be nonnegative")
    return arr


# ---------------------------------------------------------------------------
# Incomplete gamma of integer order (Poisson tails)
# ---------------------------------------------------------------------------
def _poisson_pmf(mean, m_max: int) -> np.ndarray:
    """Poisson pmf for m = 0..m_max, one row per entry of ``mean``.

    Built by ratio recurrences running outward from each row's mode and
    normalized by the row sum, so no exp/lgamma of large arguments enters
    and the relative error stays near a few ulps per term. ``m_max`` must
    leave a negligible upper tail.
    """
    mean = np.atleast_1d(np.asarray(mean, dtype=float))[:, None]
    i = np.arange(1, m_max + 1, dtype=float)[None, :]
    mode = np.minimum(np.floor(mean), m_max)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        up_ratio = np.where(i > mode, mean / i, 1.0)
        down_ratio = np.where(i <= mode, i / mean, 1.0)
    up = np.ones((mean.shape[0], m_max + 1))
    up[:, 1:] = np.cumprod(up_ratio, axis=1)
    down = np.ones((mean.shape[0], m_max + 1))
    # t_{m}/t_mode = prod_{i=m+1}^{mode} i/mean
    down[:, :-1] = np.cumprod(down_ratio[:, ::-1], axis=1)[:, ::-1]
    rel = up * down
    return rel / rel.sum(axis=1, keepdims=True)


def _poisson_tables(x, m_max: int) -> tuple[np.ndarray, np.ndarray]:
    """Lower and upper Poisson tails on a grid of means.

    Returns ``(lower, upper)`` with ``lower[..., n] = P(Pois(x) <= n - 1)``
    and ``upper[..., n] = P(Pois(x) >= n)`` for n = 0..m_max. Each side is
    accumulated from its own small terms, so neither loses precision by
    cancellation.
    """
    terms = _poisson_pmf(x, m_max)
    lower = np.zeros_like(terms)
    lower[:, 1:] = np.cumsum(terms[:, :-1], axis=1)
    upper = np.cumsum(terms[:, ::-1], axis=1)[:, ::-1]
    return lower, upper


def _guard(x_max: float) -> int:
    return int(math.ceil(x_max + 12.0 * math.sqrt(x_max) + 40.0))


def _table_size(top_order: int, x_max: float) -> int:
    """Table length covering the mass of Pois(x_max) and the upper tail
    beyond ``top_order`` to full relative precision."""
    return max(top_order, _guard(x_max)) + int(math.ceil(12.0 * math.sqrt(top_order) + 40.0))


def gamma_q_int(n: int, x) -> np.ndarray | float:
    """Regularized upper incomplete gamma Q(n, x) for integer ``n >= 1``.

    Equals ``exp(-x) * sum_{k<n} x^k / k!``, i.e. the Poisson CDF at n-1.
    """
    n = _check_order(n)
    x = _check_nonneg("x", x)
    scalar = x.ndim == 0
    xs = np.atleast_1d(x)
    m_max = _table_size(n, float(xs.max(initial=0.0)))
    lower, _ = _poisson_tables(xs, m_max)
    out = np.clip(lower[..., n], 0.0, 1.0)
    return float(out[0]) if scalar else out


def gamma_p_int(n: int, x) -> np.ndarray | float:
    """Regularized lower incomplete gamma P(n, x) = 1 - Q(n, x)."""
    n = _check_order(n)
    x = _check_nonneg("x", x)
    scalar = x.ndim == 0
    xs = np.atleast_1d(x)
    m_max = _table_size(n, float(xs.max(initial=0.0)))
    _, upper = _poisson_tables(xs, m_max)
    out = np.clip(upper[..., n], 0.0, 1.0)
    return float(out[0]) if scalar else out


# ---------------------------------------------------------------------------
# Generalized Marcum Q
# ---------------------------------------------------------------------------
def poisson_window(lam: float, tail: float = POISSON_TAIL) -> tuple[int, int]:
    """Index range [lo, hi] holding all but ``tail`` of the Poisson(lam) mass.

    The bounds start from a generous normal-approximation window and are
    then widened until the exact tail masses on both sides are below
    ``tail / 2``.
    """
    if lam < 0 or not math.isfinite(lam):
        raise ValueError("Poisson mean must be finite and nonnegative")
    if lam == 0.0:
        return 0, 0
    s = math.sqrt(lam)
    lo = max(0, int(math.floor(lam - 9.0 * s)))
    hi = int(math.ceil(lam + 9.0 * s + 30.0))
    # P(Pois <= lo-1) = Q(lo, lam); P(Pois >= hi+1) = P(hi+1, lam)
    while lo > 0 and gamma_q_int(lo, lam) > tail / 2:
        lo = max(0, lo - int(s) - 1)
    while gamma_p_int(hi + 1, lam) > tail / 2:
        hi += int(s) + 1
    return lo, hi


def _mixture_weights(lam: np.ndarray, lo: int, hi: int) -> np.ndarray:
    """Poisson(lam) pmf on j = lo..hi, shape (len(lam), hi-lo+1)."""
    return _poisson_pmf(lam, hi + _guard(float(np.max(lam, initial=0.0))))[:, lo:hi + 1]


def marcum_q_grid(order: int, a, b, *, complement: bool = False) -> np.ndarray:
    """Marcum Q_K(a_i, b_j) on the outer grid of ``a`` and ``b``.

    Poisson mixture over the noncentrality, with mean a^2/2, of regularized
    upper incomplete gammas Q(K + j, b^2/2). The incomplete-gamma table
    depends only on ``b``, so the whole grid is one matrix product. With
    ``complement=True`` the lower tail P_K = 1 - Q_K is accumulated directly
    instead, which keeps full relative accuracy when Q_K is close to one.

    Returns an array of shape ``(len(b), len(a))``.
    """
    k = _check_order(order)
    a = np.atleast_1d(_check_nonneg("a", a))
    b = np.atleast_1d(_check_nonneg("b", b))
    lam = 0.5 * a * a
    y = 0.5 * b * b
    lo, hi = 0, 0
    if lam.size:
        lmin, lmax = float(lam.min()), float(lam.max())
        lo = poisson_window(lmin)[0]
        hi = poisson_window(lmax)[1]
    weights = _mixture_weights(lam, lo, hi)  # (na, J)
    m_max = _table_size(k + hi + 1, float(y.max(initial=0.0)))
    lower, upper = _poisson_tables(y, m_max)  # (nb, m_max+1)
    cols = np.arange(k + lo, k + hi + 1)
    table = upper[:, cols] if complement else lower[:, cols]  # (nb, J)
    out = table @ weights.T
    return np.clip(out, 0.0, 1.0)


def marcum_q(order: int, a, b):
    """Generalized Marcum Q-function of integer order.

    ``Q_K(a, b)`` is the probability that a noncentral chi-square variable
    with ``2K`` degrees of freedom and noncentrality ``a**2`` exceeds
    ``b**2``. Scalars in, scalar out; arrays broadcast elementwise.

    Parameters
    ----------
    order : int
        Positive integer order ``K``.
    a, b : float or array_like
        Nonnegative, finite arguments.

    Examples
    --------
    >>> round(marcum_q(1, 0.0, math.sqrt(2.0)), 12) == round(math.exp(-1), 12)
    True
    """
    return _marcum_elementwise(order, a, b, complement=False)


def marcum_p(order: int, a, b):
    """Complement ``1 - Q_K(a, b)``, accurate when Q_K is near one."""
    return _marcum_elementwise(order, a, b, complement=True)


def _marcum_elementwise(order, a, b, complement):
    k = _check_order(order)
    a = _check_nonneg("a", a)
    b = _check_nonneg("b", b)
    aa, bb = np.broadcast_arrays(a, b)
    out = np.empty(aa.shape)
    flat_a, flat_b, flat_out = aa.ravel(), bb.ravel(), out.reshape(-1)
    for i in range(flat_a.size):
        flat_out[i] = marcum_q_grid(k, flat_a[i], flat_b[i], complement=complement)[0, 0]
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Erlang distribution (integer-shape Gamma, unit scale)
# ---------------------------------------------------------------------------
def erlang_pdf(shape: int, x):
    """Density x^(K-1) exp(-x) / (K-1)!, evaluated in the log domain."""
    k = _check_order(shape)
    x = _check_nonneg("x", x)
    with np.errstate(divide="ignore"):
        logx = np.log(x)
    if k == 1:
        out = np.exp(-x)
    else:
        out = np.where(x == 0.0, 0.0, np.exp((k - 1) * logx - x - math.lgamma(k)))
    return float(out) if np.ndim(out) == 0 else out


def erlang_cdf(shape: int, x):
    """CDF 1 - exp(-x) sum_{k<K} x^k/k!.

    The upper Poisson tail is summed directly, so small values keep their
    relative accuracy instead of being formed as ``1 - Q``.
    """
    return gamma_p_int(shape, x)


def erlang_max_support(shape: int, n_competitors: int, tail: float) -> float:
    """Smallest x with ``erlang_cdf(shape, x) ** n_competitors >= 1 - tail``.

    This is the upper integration limit for integrals weighted by the
    density of the maximum of ``n_competitors`` iid Erlang variables.
    """
    k = _check_order(shape)
    n = _check_order(n_competitors)
    if not 0 < tail < 1:
        raise ValueError("tail must lie in (0, 1)")

    def excess(x):
        q = gamma_q_int(k, x)
        return -math.expm1(n * math.log1p(-q)) if q < 1.0 else 1.0

    hi = float(k)
    while excess(hi) > tail:
        hi *= 2.0
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if excess(mid) > tail:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-9 * hi:
            break
    return hi


# ---------------------------------------------------------------------------
# Adaptive Gauss-Kronrod quadrature
# ---------------------------------------------------------------------------
# 7-point Gauss / 15-point Kronrod abscissae and weights on [-1, 1].
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_KWEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GWEIGHTS = np.zeros(15)
_GWEIGHTS[1:14:2] = np.concatenate([_WG[:-1], _WG[::-1]])


def _gk15(f, a: float, b: float) -> tuple[float, float]:
    half = 0.5 * (b - a)
    center = 0.5 * (a + b)
    fx = np.asarray(f(center + half * _NODES), dtype=float)
    kron = half * float(_KWEIGHTS @ fx)
    gauss = half * float(_GWEIGHTS @ fx)
    return kron, abs(kron - gauss)


def integrate_adaptive(
    integrand: Callable[[np.ndarray], np.ndarray],
    lower: float,
    upper: float,
    rel_tol: float = 1e-8,
    abs_tol: float = 1e-15,
    initial_panels: int = 8,
    max_subdivisions: int = MAX_SUBDIVISIONS,
) -> QuadratureResult:
    """Globally adaptive 15-point Gauss-Kronrod quadrature on [lower, upper].

    ``integrand`` must accept a NumPy array of abscissae. The panel with the
    largest error estimate is bisected until the summed estimate is below
    ``max(abs_tol, rel_tol * |value|)``.

    Raises
    ------
    ConvergenceError
        If ``max_subdivisions`` bisections do not reach the tolerance. The
        best estimate is attached to the exception.
    """
    if not 0 < rel_tol < 0.1:
        raise ValueError("rel_tol must lie in (0, 0.1)")
    if not upper > lower:
        raise ValueError("upper limit must exceed lower limit")
    edges = np.linspace(lower, upper, initial_panels + 1)
    heap = []
    for a, b in zip(edges[:-1], edges[1:]):
        val, err = _gk15(integrand, float(a), float(b))
        heap.append((-err, float(a), float(b), val))
    heapq.heapify(heap)
    evals = 15 * initial_panels

    def totals():
        vals = math.fsum(item[3] for item in heap)
        errs = math.fsum(-item[0] for item in heap)
        return vals, errs

    value, error = totals()
    splits = 0
    while error > max(abs_tol, rel_tol * abs(value)):
        if splits >= max_subdivisions:
            raise ConvergenceError(
                f"no convergence after {splits} subdivisions "
                f"(error {error:.3g}, value {value:.6g})",
                QuadratureResult(value, error, evals),
            )
        _, a, b, _ = heapq.heappop(heap)
        mid = 0.5 * (a + b)
        for lo, hi in ((a, mid), (mid, b)):
            val, err = _gk15(integrand, lo, hi)
            heapq.heappush(heap, (-err, lo, hi, val))
        evals += 30
        splits += 1
        value, error = totals()
    return QuadratureResult(value, error, evals)
