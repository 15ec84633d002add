"""Hermite processes: standardising constant, Taqqu simulation, Wiener integrals.

The order-m Hermite process Z with self-similarity index H = 1 + m (H0 - 1) is
approximated by the normalised partial integrals

    Y_T(x) = (1 / d(T)) * int_0^{T x} H_m(g(y)) dy,

with g unit-lag fGn. Deterministic integrands are handled through the norm

    ||f||^2 = H (2H - 1) int int f(u) f(v) |u - v|^(2H - 2) du dv,

which equals the variance of int f dZ for a standard Z.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from numbers import Real

import numpy as np
from scipy import integrate
from scipy.fft import irfft, rfft

from ._validation import (
    ConvergenceError,
    check_finite_1d,
    check_lrd_hurst,
    check_order,
    check_positive,
    frozen,
    integral_ratio,
)
from .green_operator import GreenMatrix, OperatorSpec, build_green, lipschitz_diagnostic
from .hermite_chaos import ChaosExpansion, hermite_poly
from .lrd_gaussian import fgn_covariance, kernel_beta_constant, sample_fgn_path
from .parallel import map_replicates
from .random_solver import default_slow_vary, scaling_d
from .rng import SeedLike, replicate_stream, seed_value

__all__ = [
    "HermitePath",
    "LambdaIntegrand",
    "hermite_constant",
    "hermite_standardness",
    "simulate_hermite_path",
    "hermite_path_values",
    "lambda_norm_sq",
    "wiener_integral",
    "limit_integrand",
    "limit_sampler",
    "lipschitz_hypothesis",
]

MAX_DRIVER_POINTS = 1 << 24
GL_POINTS = 4
M_START = 256
M_MAX = 1 << 22
NORM_RTOL = 1e-6


# ---------------------------------------------------------------------------
# Standardising constant
# ---------------------------------------------------------------------------

def _power_integral_quad(H0):
    """int_0^inf (u + u^2)^(H0 - 3/2) du by adaptive quadrature."""
    a = H0 - 1.5
    head = _algebraic_quad(a, a)
    # u = 1/t on (1, inf): (1/t + 1/t^2)^a / t^2 = t^(-2a-2) (1 + t)^a
    tail = _algebraic_quad(-2 * a - 2, a)
    return head + tail


def _algebraic_quad(p, a):
    """int_0^1 t^p (1 + t)^a dt with the endpoint power handled by an algebraic weight."""
    value, _ = integrate.quad(lambda t: (1 + t) ** a, 0.0, 1.0, weight="alg", wvar=(p, 0.0), limit=200, epsabs=0, epsrel=1e-12)
    return value


def hermite_constant(k, H0, *, crosscheck_rtol=1e-8):
    """A_{k,H0} = sqrt(k! [k(H0-1)+1] [2k(H0-1)+1] / B^k), B = int_0^inf (u+u^2)^(H0-3/2) du.

    B is computed by adaptive quadrature and cross-checked against the Beta
    identity B = Beta(H0 - 1/2, 2 - 2 H0).
    """
    k = check_order(k, name="k", minimum=1)
    H = check_lrd_hurst(H0, k)
    B = _power_integral_quad(H0)
    beta = kernel_beta_constant(H0)
    if abs(B / beta - 1.0) > crosscheck_rtol:
        raise ConvergenceError(f"quadrature {B!r} disagrees with the Beta identity {beta!r}")
    return math.sqrt(math.factorial(k) * H * (2 * H - 1) / B**k)


def hermite_standardness(k, H0):
    """E[Z(1)^2] implied by A_{k,H0}, with the inner covariance integral done by quadrature.

    Writes E[Z(1)^2] = A^2 / k! * c^k / (H (2H - 1)), where
    c = int_{-inf}^0 (-xi)^a (1 - xi)^a dxi and a = H0 - 3/2; a standard process gives 1.
    """
    A = hermite_constant(k, H0)
    H = check_lrd_hurst(H0, k)
    a = H0 - 1.5
    near, _ = integrate.quad(lambda xi: (1 - xi) ** a, -1.0, 0.0, weight="alg", wvar=(0.0, a), limit=200, epsabs=0, epsrel=1e-12)
    # xi = -1/t on (-inf, -1)
    far = _algebraic_quad(-2 * a - 2, a)
    c = near + far
    return A * A / math.factorial(k) * c**k / (H * (2 * H - 1))


# ---------------------------------------------------------------------------
# Hermite process paths
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HermitePath:
    """Y_T on the grid x_j = j / n, j = 0..n."""

    values: np.ndarray
    m: int
    H0: float
    T: float
    delta: float
    seed: int | None

    def __post_init__(self):
        object.__setattr__(self, "values", frozen(self.values))

    @property
    def H(self):
        return 1.0 + self.m * (self.H0 - 1.0)

    @property
    def n(self):
        return self.values.size - 1

    @property
    def x(self):
        return np.arange(self.n + 1) / self.n


def _hermite_grid(m, H0, T, n, delta):
    check_lrd_hurst(H0, m)
    n = check_order(n, name="n", minimum=1)
    T = check_positive(T, name="T")
    if T < 2**10:
        raise ValueError("Taqqu horizon T must be at least 2^10")
    delta = check_positive(delta, name="delta")
    if delta > 1:
        raise ValueError("inner mesh delta must be at most 1")
    integral_ratio(1.0, delta, name="1/delta")
    steps = integral_ratio(T, delta, name="T/delta")
    per_cell = integral_ratio(steps, n, name="T/(n delta)")
    if steps * (1 + 1 / delta) > MAX_DRIVER_POINTS:
        raise MemoryError(f"T/delta = {steps} exceeds the driver memory guard {MAX_DRIVER_POINTS}")
    return steps, per_cell


def hermite_path_values(m, H0, T, n, delta, seed: SeedLike):
    """Values of Y_T at j / n (array of length n + 1); see :func:`simulate_hermite_path`."""
    steps, per_cell = _hermite_grid(m, H0, T, n, delta)
    g = sample_fgn_path(H0, steps - 1, delta, seed).values
    cells = hermite_poly(m, g).reshape(n, per_cell).sum(axis=1) * delta
    out = np.empty(n + 1)
    out[0] = 0.0
    np.cumsum(cells, out=out[1:])
    return out / scaling_d(T, m, H0, default_slow_vary(H0))


def simulate_hermite_path(m, H0, T, n, delta=1.0, seed: SeedLike = 0):
    """Taqqu approximation Y_T(x_j) = (1/d(T)) * delta * sum_{k delta < T x_j} H_m(g(k delta)).

    The driver g is unit-lag fGn sampled at mesh ``delta``; d uses the
    slowly varying function of that driver so that Var(Y_T(1)) -> 1.
    """
    values = hermite_path_values(m, H0, T, n, delta, seed)
    return HermitePath(values, m, float(H0), float(T), float(delta), seed_value(seed))


# ---------------------------------------------------------------------------
# Deterministic integrands
# ---------------------------------------------------------------------------

class LambdaIntegrand:
    """Piecewise-continuous f on [0, 1] with finitely many jumps.

    Built from indicators of [a, b), step functions, or piecewise-linear
    interpolation of grid values; supports linear combinations.
    """

    def __init__(self, terms, breakpoints=()):
        self._terms = tuple(terms)
        self.breakpoints = tuple(sorted(set(float(b) for b in breakpoints)))

    @classmethod
    def _single(cls, fn, breakpoints=()):
        return cls(((1.0, fn),), breakpoints)

    @classmethod
    def indicator(cls, a=0.0, b=1.0):
        a, b = float(a), float(b)
        if not 0.0 <= a <= b <= 1.0:
            raise ValueError("indicator needs 0 <= a <= b <= 1")
        upper = np.inf if b >= 1.0 else b  # the right end of [0, 1] is included
        return cls._single(lambda u: ((u >= a) & (u < upper)).astype(float), (a, b))

    @classmethod
    def constant(cls, c=1.0):
        return cls.indicator(0.0, 1.0) * float(c)

    @classmethod
    def step(cls, breaks, values):
        """f = values[i] on [breaks[i], breaks[i+1]); breaks run from 0 to 1."""
        breaks = np.asarray(breaks, dtype=float)
        values = np.asarray(values, dtype=float)
        if breaks.size != values.size + 1 or breaks[0] != 0.0 or breaks[-1] != 1.0 or np.any(np.diff(breaks) <= 0):
            raise ValueError("step needs increasing breaks from 0 to 1 and one value per interval")
        out = cls.zero()
        for a, b, v in zip(breaks[:-1], breaks[1:], values):
            out = out + cls.indicator(a, b) * v
        return out

    @classmethod
    def from_grid(cls, x, values):
        """Piecewise-linear interpolation of (x, values), zero outside [x[0], x[-1]]."""
        x = check_finite_1d(x, name="x").copy()
        v = check_finite_1d(values, name="values").copy()
        if x.size != v.size or np.any(np.diff(x) <= 0):
            raise ValueError("grid must be increasing with one value per node")
        return cls._single(lambda u: np.interp(u, x, v, left=0.0, right=0.0))

    @classmethod
    def zero(cls):
        return cls(())

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        out = np.zeros_like(u)
        for c, fn in self._terms:
            out = out + c * fn(u)
        return out

    def __add__(self, other):
        if not isinstance(other, LambdaIntegrand):
            return NotImplemented
        return LambdaIntegrand(self._terms + other._terms, self.breakpoints + other.breakpoints)

    def __mul__(self, c):
        if not isinstance(c, Real):
            return NotImplemented
        return LambdaIntegrand(tuple((float(c) * a, fn) for a, fn in self._terms), self.breakpoints)

    __rmul__ = __mul__

    def __sub__(self, other):
        return self + other * -1.0

    def cell_averages(self, M):
        """Averages of f over the M cells [j/M, (j+1)/M) by Gauss-Legendre quadrature."""
        nodes, weights = np.polynomial.legendre.leggauss(GL_POINTS)
        left = np.arange(M)[:, None] / M
        pts = left + (nodes[None, :] + 1.0) / (2.0 * M)
        return self(pts) @ (weights / 2.0)


def _toeplitz_quadratic(c, H):
    """c^T Gamma c with Gamma_ij = fgn_covariance(H, i - j), via FFT."""
    M = c.size
    size = 1 << int(np.ceil(np.log2(2 * M)))
    col = fgn_covariance(H, np.arange(M))
    circ = np.concatenate([col, np.zeros(size - 2 * M + 1), col[:0:-1]])
    prod = irfft(rfft(circ) * rfft(c, size), size)[:M]
    return float(c @ prod)


def lambda_norm_sq(f: LambdaIntegrand, H, *, rtol=NORM_RTOL, M0=M_START, M_max=M_MAX, return_levels=False):
    """H (2H - 1) int int f(u) f(v) |u - v|^(2H - 2) du dv over [0, 1]^2.

    f is replaced by its cell averages on M uniform cells; the double integral
    of |u - v|^(2H-2) over a pair of cells is exact, which turns the norm into
    M^(-2H) c^T Gamma c with Gamma the fGn covariance of index H. M doubles
    until two successive values agree to ``rtol``.
    """
    H = float(H)
    if not 0.5 < H < 1.0:
        raise ValueError("H must lie in (1/2, 1)")
    levels = []
    prev = None
    M = int(M0)
    while M <= M_max:
        value = M ** (-2.0 * H) * _toeplitz_quadratic(f.cell_averages(M), H)
        levels.append((M, value))
        if prev is not None:
            scale = max(abs(value), abs(prev))
            if scale == 0.0 or abs(value - prev) <= rtol * scale:
                return (value, levels) if return_levels else value
        prev = value
        M *= 2
    raise ConvergenceError(f"Lambda^H norm did not converge to rtol={rtol} by M={M_max}")


def wiener_integral(f: LambdaIntegrand, Z):
    """Left-endpoint sum sum_j f(t_j) (Z(t_{j+1}) - Z(t_j)) on the grid t_j = j / n.

    ``Z`` is a HermitePath or an array of path values (last axis indexes j).
    """
    values = Z.values if isinstance(Z, HermitePath) else np.asarray(Z, dtype=float)
    n = values.shape[-1] - 1
    t = np.arange(n) / n
    return np.diff(values, axis=-1) @ f(t)


# ---------------------------------------------------------------------------
# Limit law sampler
# ---------------------------------------------------------------------------

def lipschitz_hypothesis(spec: OperatorSpec, ns=(127, 255), rtol=0.05):
    """True when the Lipschitz estimate of G is stable to ``rtol`` between the two grids."""
    a, b = (lipschitz_diagnostic(build_green(spec.refined(n))) for n in ns)
    return abs(b / a - 1.0) <= rtol


def limit_integrand(gm: GreenMatrix, u0, x_probe):
    """y -> G(x_probe, y) u0(y), piecewise linear through the grid with zero boundary values."""
    i = int(round(x_probe / gm.h)) - 1
    if not (0 <= i < gm.n and abs(gm.x[i] - x_probe) < 1e-12):
        raise ValueError(f"probe {x_probe} is not an interior grid node")
    row = gm.kernel_row(i) * np.asarray(u0, dtype=float)
    x = np.concatenate([[0.0], gm.x, [1.0]])
    return LambdaIntegrand.from_grid(x, np.pad(row, 1))


def limit_sampler(
    gm,
    u0,
    chaos: ChaosExpansion,
    m,
    H0,
    x_probe,
    N,
    seed,
    *,
    T=2**14,
    n_grid=None,
    delta=1.0,
    threads=1,
    label="limit",
):
    """N draws of -(V_m / m!) int_0^1 G(x_probe, y) u0(y) dZ(y), a fresh Z per draw.

    Z is the Taqqu approximation at horizon T on ``n_grid`` cells (default
    n + 1, the solver grid).
    """
    gm = gm if isinstance(gm, GreenMatrix) else build_green(gm)
    if chaos.rank != m:
        raise ValueError(f"chaos rank {chaos.rank} differs from m = {m}")
    if not lipschitz_hypothesis(gm.spec):
        raise ValueError("Green function is not Lipschitz in x; the limit theorem does not apply")
    N = check_order(N, name="N", minimum=1)
    n_grid = gm.n + 1 if n_grid is None else int(n_grid)
    _hermite_grid(m, H0, T, n_grid, delta)
    coef = -chaos.leading
    if coef == 0.0:
        return np.zeros(N)
    f = limit_integrand(gm, u0, x_probe)
    weights = f(np.arange(n_grid) / n_grid)

    def draw(r):
        z = hermite_path_values(m, H0, T, n_grid, delta, replicate_stream(seed, label, r))
        return coef * float(np.diff(z) @ weights)

    return np.asarray(map_replicates(draw, N, threads))
