"""Closed-form constants and radial kernels.

Conventions:
    K(n, s)     = Gamma((n-s)/2) / (Gamma(s/2) 2^s pi^(n/2)),  0 < s < n
    omega(n)    = 2 pi^(n/2) / Gamma(n/2), the surface measure of the unit
                  sphere in R^n (omega(1) = 2)
    alpha(n, p) = (n / omega) K(n, n/p)^(-p')
    beta        = alpha^(q'/p'),  gamma = (n / omega)^(q'/p')

q = inf is written as ``math.inf`` and has conjugate 1.  For q = 1 the
conjugate is infinite and beta/gamma are reported as nan.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

INF = math.inf


def gamma_fn(x: float) -> float:
    """Gamma function for positive arguments."""
    x = float(x)
    if not x > 0 or not math.isfinite(x):
        raise DomainError(f"gamma_fn requires a finite positive argument, got {x!r}")
    return math.gamma(x)


def conjugate(p: float) -> float:
    """Hoelder conjugate p/(p-1), with 1 <-> inf."""
    if p == INF:
        return 1.0
    if p == 1:
        return INF
    return p / (p - 1.0)


def sphere_measure(n: int) -> float:
    """Surface measure of the unit sphere in R^n."""
    _check_dim(n)
    return 2.0 * math.pi ** (n / 2.0) / gamma_fn(n / 2.0)


def kernel_constant(n: int, s: float) -> float:
    """Normalizing constant of the fundamental solution of (-Delta)^(s/2)."""
    _check_dim(n)
    if not 0 < s < n:
        raise DomainError(f"kernel_constant needs 0 < s < n, got n={n}, s={s}")
    return _kernel_formula(n, s)


def fraclap_kernel_constant(n: int, sigma: float) -> float:
    """Constant C with (-Delta)^(sigma/2) u(x) = C pv-int (u(x)-u(y))|x-y|^(-n-sigma) dy.

    This is minus the analytic continuation of K(n, s) to s = -sigma and is used
    as a reference value; the pv route calibrates its own constant.
    """
    _check_dim(n)
    if not 0 < sigma < 2:
        raise DomainError(f"sigma must lie in (0, 2), got {sigma}")
    return (2.0 ** sigma * math.gamma((n + sigma) / 2.0)
            / (math.pi ** (n / 2.0) * abs(math.gamma(-sigma / 2.0))))


def exterior_kernel_constant(n: int, s: float) -> float:
    """Coefficient c with (-Delta)^(s/2) phi(x) = c int phi(y)|x-y|^(-n-s) dy off supp phi.

    Valid for s > 0 not an even integer; zero at even integers (local operator).
    """
    if s > 0 and abs(s / 2.0 - round(s / 2.0)) < 1e-14:
        return 0.0
    return _kernel_formula(n, -s)


def _kernel_formula(n, s):
    # analytic in s away from the poles of Gamma((n-s)/2); 1/Gamma(s/2) -> 0 at s = 0, -2, ...
    return (math.gamma((n - s) / 2.0) / (math.gamma(s / 2.0) * 2.0 ** s * math.pi ** (n / 2.0)))


def riesz_constant(alpha: float) -> float:
    """c_alpha = Gamma(alpha/2) / pi^(alpha/2)."""
    return gamma_fn(alpha / 2.0) / math.pi ** (alpha / 2.0)


def riesz_convolution_coefficient(n: int, a: float, b: float) -> float:
    """Coefficient c with |x|^(a-n) * |x|^(b-n) = c |x|^(a+b-n)."""
    _check_dim(n)
    if not (a > 0 and b > 0):
        raise DomainError(f"orders must be positive, got a={a}, b={b}")
    if a + b >= n:
        raise DomainError(f"need a + b < n, got a+b={a + b}, n={n}")
    c = riesz_constant
    return c(n - a - b) * c(a) * c(b) / (c(a + b) * c(n - a) * c(n - b))


@dataclass(frozen=True)
class RieszKernel:
    n: int
    s: float
    K_ns: float

    @classmethod
    def of(cls, n: int, s: float) -> "RieszKernel":
        return cls(n, float(s), kernel_constant(n, s))

    def __call__(self, r):
        """K r^(s-n) for radii r."""
        return self.K_ns * np.abs(np.asarray(r, dtype=float)) ** (self.s - self.n)


@dataclass(frozen=True)
class SharpConstants:
    n: int
    p: float
    q: float
    p_conj: float
    q_conj: float
    omega: float
    K_ns: float
    alpha_np: float
    beta_npq: float
    gamma_npq: float

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def sharp_constants(n: int, p: float, q: float | None = None) -> SharpConstants:
    """All sharp exponents for dimension n and Lorentz pair (p, q); q defaults to p."""
    _check_dim(n)
    p = float(p)
    q = p if q is None else float(q)
    if not (1 < p < INF):
        raise DomainError(f"p must lie in (1, inf), got {p}")
    if not (q >= 1):
        raise DomainError(f"q must lie in [1, inf], got {q}")
    pc = conjugate(p)
    qc = conjugate(q)
    omega = sphere_measure(n)
    K = kernel_constant(n, n / p)
    alpha = (n / omega) * K ** (-pc)
    if q == p:
        beta, gam = alpha, (n / omega)
    elif qc == INF:
        beta = gam = math.nan
    else:
        beta = alpha ** (qc / pc)
        gam = (n / omega) ** (qc / pc)
    return SharpConstants(n, p, q, pc, qc, omega, K, alpha, beta, gam)


def _check_dim(n):
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise DomainError(f"dimension must be a positive integer, got {n!r}")
