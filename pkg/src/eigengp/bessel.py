"""Modified Bessel function of the second kind, K_nu, for real positive order.

Two regimes, switching at x = 2:

* x <= 2: Temme's power series for K_mu and K_{mu+1} with the order reduced
  to |mu| <= 1/2, followed by upward recurrence in the order.
* x > 2:  the Thompson-Barnett continued fraction (Steed's algorithm) for the
  same pair, again followed by upward recurrence.

Upward recurrence K_{v+1} = K_{v-1} + (2v/x) K_v is stable because K grows
with the order.  The implementation is vectorized over the argument for a
fixed order, which is the access pattern of Matern Gram matrices.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import NumericalError

# Taylor coefficients of 1/Gamma(1+u) = sum_k _RECIP_GAMMA[k] * u**k
# (Abramowitz & Stegun 6.1.34).  Enough terms for |u| <= 1/2 at double
# precision.
_RECIP_GAMMA = (
    1.0,
    0.5772156649015329,
    -0.6558780715202538,
    -0.0420026350340952,
    0.1665386113822915,
    -0.0421977345555443,
    -0.0096219715278770,
    0.0072189432466630,
    -0.0011651675918591,
    -0.0002152416741149,
    0.0001280502823882,
    -0.0000201348547807,
    -0.0000012504934821,
    0.0000011330272320,
    -0.0000002056338417,
    0.0000000061160950,
    0.0000000050020075,
    -0.0000000011812746,
    0.0000000001043427,
    0.0000000000077823,
    -0.0000000000036968,
    0.0000000000005100,
    -0.0000000000000206,
    -0.0000000000000054,
    0.0000000000000014,
    0.0000000000000001,
)

_MAX_TERMS = 500
_MAX_CF_ITER = 30000

# Above this size, arguments are sorted and processed in cache-sized chunks:
# neighbors in argument order converge after similar term counts, so each
# chunk exits its loop early instead of iterating until the global worst lane.
_CHUNK = 1 << 16


def _gamma_pair(mu: float) -> tuple[float, float, float, float]:
    """Return (gam1, gam2, 1/Gamma(1+mu), 1/Gamma(1-mu)) for |mu| <= 1/2.

    gam1 = (1/Gamma(1-mu) - 1/Gamma(1+mu)) / (2 mu) and
    gam2 = (1/Gamma(1-mu) + 1/Gamma(1+mu)) / 2 are even in mu, so both are
    evaluated as series in mu^2, which avoids cancellation as mu -> 0.
    """
    mu2 = mu * mu
    g1 = 0.0
    g2 = 0.0
    p = 1.0
    for i in range(13):
        g2 += _RECIP_GAMMA[2 * i] * p
        g1 -= _RECIP_GAMMA[2 * i + 1] * p
        p *= mu2
    return g1, g2, 1.0 / math.gamma(1.0 + mu), 1.0 / math.gamma(1.0 - mu)


def _kv_series_pair(mu: float, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(K_mu(x), K_{mu+1}(x)) by Temme's series; requires |mu| <= 1/2, x <= 2."""
    gam1, gam2, gampl, gammi = _gamma_pair(mu)
    half_x = 0.5 * x
    pimu = math.pi * mu
    fact = pimu / math.sin(pimu) if abs(pimu) > 1e-15 else 1.0
    logs = -np.log(half_x)
    e = mu * logs
    safe_e = np.where(e == 0.0, 1.0, e)
    fact2 = np.where(np.abs(e) > 1e-15, np.sinh(e) / safe_e, 1.0)
    f = fact * (gam1 * np.cosh(e) + gam2 * fact2 * logs)
    total = f.copy()
    exp_e = np.exp(e)
    p = (0.5 / gampl) * exp_e
    q = 0.5 / (exp_e * gammi)
    total1 = p.copy()
    c = np.ones_like(x)
    x2_quarter = half_x * half_x
    mu2 = mu * mu
    delta = np.empty_like(x)
    for i in range(1, _MAX_TERMS + 1):
        np.multiply(f, i, out=f)
        f += p
        f += q
        f /= i * i - mu2
        c *= x2_quarter
        c /= i
        p /= i - mu
        q /= i + mu
        np.multiply(c, f, out=delta)
        total += delta
        total1 += c * (p - i * f)
        if np.all(np.abs(delta) < np.abs(total) * 1e-17):
            break
    else:
        raise NumericalError("Temme series for K_nu did not converge")
    return total, total1 * (2.0 / x)


def _kv_cf_pair(mu: float, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(K_mu(x), K_{mu+1}(x)) by the Thompson-Barnett continued fraction.

    Requires |mu| <= 1/2 and x > 2 (converges slowest near x = 2).
    """
    mu2 = mu * mu
    b = 2.0 * (1.0 + x)
    d = 1.0 / b
    h = d.copy()
    delh = d.copy()
    q1 = np.zeros_like(x)
    q2 = np.ones_like(x)
    a1 = 0.25 - mu2
    q = np.full_like(x, a1)
    c = np.full_like(x, a1)
    a = -a1
    s = 1.0 + q * delh
    dels = np.empty_like(x)
    for i in range(2, _MAX_CF_ITER + 1):
        a -= 2.0 * (i - 1)
        np.multiply(c, -a / i, out=c)
        qnew = q1 - b * q2
        qnew /= a
        q1, q2 = q2, qnew
        q += c * qnew
        b += 2.0
        np.multiply(a, d, out=d)
        d += b
        np.reciprocal(d, out=d)
        np.multiply(delh, b * d - 1.0, out=delh)
        h += delh
        np.multiply(q, delh, out=dels)
        s += dels
        if np.all(np.abs(dels) < np.abs(s) * 1e-16):
            break
    else:
        raise NumericalError("continued fraction for K_nu did not converge")
    k_mu = np.sqrt(np.pi / (2.0 * x)) * np.exp(-x) / s
    return k_mu, k_mu * (mu + x + 0.5 - a1 * h) / x


def _kv_block(mu: float, n_steps: int, x: np.ndarray) -> np.ndarray:
    """K_{mu + n_steps}(x) for one contiguous block of arguments."""
    k0 = np.empty_like(x)
    k1 = np.empty_like(x)
    small = x <= 2.0
    if small.any():
        k0[small], k1[small] = _kv_series_pair(mu, x[small])
    large = ~small
    if large.any():
        k0[large], k1[large] = _kv_cf_pair(mu, x[large])
    with np.errstate(over="ignore"):
        for j in range(1, n_steps + 1):
            k0, k1 = k1, k0 + (2.0 * (mu + j) / x) * k1
    return k0


def bessel_k(order: float, x):
    """Evaluate K_order(x) for order > 0 and x > 0.

    Parameters
    ----------
    order : float
        Order nu of the Bessel function; must be positive.
    x : float or ndarray
        Argument(s); must be positive.

    Returns
    -------
    float or ndarray matching the shape of ``x``.

    Raises
    ------
    ValueError for a nonpositive order or argument, OverflowError when the
    result exceeds the double-precision range (tiny arguments at order >= 1).
    """
    if order <= 0:
        raise ValueError(f"order must be positive, got {order}")
    scalar = np.isscalar(x) or np.ndim(x) == 0
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    if xa.size and np.min(xa) <= 0.0:
        raise ValueError("argument of K_nu must be positive")

    n_steps = int(round(order))
    mu = order - n_steps

    if xa.size <= _CHUNK:
        result = _kv_block(mu, n_steps, xa)
    else:
        order_idx = np.argsort(xa, kind="stable")
        xs = xa[order_idx]
        sorted_out = np.empty_like(xs)
        for start in range(0, xs.size, _CHUNK):
            stop = start + _CHUNK
            sorted_out[start:stop] = _kv_block(mu, n_steps, xs[start:stop])
        result = np.empty_like(xa)
        result[order_idx] = sorted_out

    if not np.all(np.isfinite(result)):
        raise OverflowError(
            f"K_{order} overflows double precision at x = "
            f"{float(xa[~np.isfinite(result)][0]):g}"
        )
    if scalar:
        return float(result[0])
    return result
