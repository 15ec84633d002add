"""Long-range-dependent Gaussian drivers.

Exact synthesis of fractional Brownian motion and fractional Gaussian noise by
circulant embedding, the closed-form second-order structure of both processes,
the small catalog of slowly varying functions used for normalisation, and a
numerical check of the moving-average kernel conditions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate, special
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import (
    EmbeddingError,
    check_hurst,
    check_order,
    check_positive,
    frozen,
    integral_ratio,
)
from .rng import SeedLike, as_generator, seed_value

__all__ = [
    "SlowVaryFn",
    "GaussianPath",
    "KernelSpec",
    "KernelReport",
    "FGNSampler",
    "fbm_covariance",
    "fgn_covariance",
    "sample_fbm_path",
    "sample_fgn_path",
    "fgn_from_fbm",
    "kernel_conditions_report",
    "kernel_beta_constant",
]

EIGEN_TOLERANCE = -1e-10
MAX_DOUBLINGS = 4


def kernel_beta_constant(H0):
    """int_0^inf (u + u^2)^(H0 - 3/2) du, via the Beta identity B(H0 - 1/2, 2 - 2 H0)."""
    H0 = float(H0)
    if not 0.5 < H0 < 1.0:
        raise ValueError(f"H0 must lie in (1/2, 1), got {H0!r}")
    return float(special.beta(H0 - 0.5, 2.0 - 2.0 * H0))


# ---------------------------------------------------------------------------
# Slowly varying functions
# ---------------------------------------------------------------------------

_SLOW_KINDS = ("constant", "logarithmic", "fgn_example")


@dataclass(frozen=True)
class SlowVaryFn:
    """One of three slowly varying functions L: (0, inf) -> (0, inf).

    ``constant``      L(u) = c
    ``logarithmic``   L(u) = c * log(e + u)
    ``fgn_example``   L(u) = c * u                              for u <= 1
                      L(u) = c * u^(3/2-H0) (u^(H0-1/2) - (u-1)^(H0-1/2))  for u >= 1

    For ``fgn_example`` the default scale is chosen so that the unit-variance
    fGn kernel satisfies e(u) ~ C0 u^(H0-3/2) L(u); with this scale the
    autocovariance of unit-lag fGn is asymptotic to u^(2H0-2) L(u)^2.
    """

    kind: str = "constant"
    c: float | None = None
    H0: float | None = None

    def __post_init__(self):
        if self.kind not in _SLOW_KINDS:
            raise ValueError(f"unknown slowly varying kind {self.kind!r}; expected one of {_SLOW_KINDS}")
        if self.kind == "fgn_example":
            if self.H0 is None or not 0.5 < float(self.H0) < 1.0:
                raise ValueError("fgn_example needs H0 in (1/2, 1)")
            object.__setattr__(self, "H0", float(self.H0))
        if self.c is None:
            object.__setattr__(self, "c", self._default_scale())
        else:
            object.__setattr__(self, "c", check_positive(self.c, name="c"))

    def _default_scale(self):
        if self.kind == "fgn_example":
            H0 = self.H0
            return float(np.sqrt(H0 * (2 * H0 - 1)) / (H0 - 0.5))
        return 1.0

    @classmethod
    def constant(cls, c=1.0):
        return cls("constant", c=c)

    @classmethod
    def logarithmic(cls, c=1.0):
        return cls("logarithmic", c=c)

    @classmethod
    def fgn_example(cls, H0, c=None):
        return cls("fgn_example", c=c, H0=H0)

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        if np.any(u <= 0):
            raise ValueError("slowly varying functions are evaluated on (0, inf)")
        if self.kind == "constant":
            out = np.full_like(u, self.c)
        elif self.kind == "logarithmic":
            out = self.c * np.log(np.e + u)
        else:
            a = self.H0 - 0.5
            big = np.maximum(u, 1.0)
            # u^(3/2-H0) (u^a - (u-1)^a) = u (1 - (1 - 1/u)^a), cancellation-free
            with np.errstate(divide="ignore"):
                tail = big * -np.expm1(a * np.log1p(-1.0 / big))
            out = self.c * np.where(u <= 1.0, u, tail)
        return out if out.ndim else float(out)

    def limit(self):
        """Value of L at infinity (inf for the logarithmic kind)."""
        if self.kind == "constant":
            return self.c
        if self.kind == "logarithmic":
            return np.inf
        return self.c * (self.H0 - 0.5)

    def to_dict(self):
        d = {"kind": self.kind, "c": self.c}
        if self.H0 is not None:
            d["H0"] = self.H0
        return d

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - {"kind", "c", "H0"}
        if unknown:
            raise ValueError(f"unknown slowly varying keys: {sorted(unknown)}")
        return cls(d.get("kind", "constant"), c=d.get("c"), H0=d.get("H0"))


# ---------------------------------------------------------------------------
# Closed-form covariances
# ---------------------------------------------------------------------------

def fbm_covariance(H0, s, t):
    """Cov(B(s), B(t)) = (|s|^2H + |t|^2H - |t-s|^2H) / 2."""
    H0 = check_hurst(H0, allow_one=True)
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(s < 0) or np.any(t < 0):
        raise ValueError("fbm_covariance is defined for s, t >= 0")
    two_h = 2.0 * H0
    out = 0.5 * (s**two_h + t**two_h - np.abs(t - s) ** two_h)
    return out if out.ndim else float(out)


def fgn_covariance(H0, h):
    """Autocovariance of unit-lag fractional Gaussian noise at lag h.

    Real-valued lags are accepted: for lag tau the value is
    Cov(B(x+tau) - B(x+tau-1), B(x) - B(x-1)).
    """
    H0 = check_hurst(H0, allow_one=True)
    h = np.abs(np.asarray(h, dtype=float))
    two_h = 2.0 * H0
    out = 0.5 * ((h + 1.0) ** two_h - 2.0 * h**two_h + np.abs(h - 1.0) ** two_h)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# Paths
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GaussianPath:
    """Sampled trajectory on the uniform grid x0 + k*dx, k = 0..len(values)-1."""

    values: np.ndarray
    dx: float
    H0: float
    kind: str
    seed: int | None = None
    x0: float = 0.0

    def __post_init__(self):
        if self.kind not in ("fbm", "fgn"):
            raise ValueError(f"kind must be 'fbm' or 'fgn', got {self.kind!r}")
        object.__setattr__(self, "values", frozen(self.values))

    @property
    def n(self):
        return self.values.size - 1

    @property
    def x(self):
        return self.x0 + self.dx * np.arange(self.values.size)

    def __len__(self):
        return self.values.size


@lru_cache(maxsize=64)
def _embedding_sqrt_eigenvalues(H0: float, n: int) -> np.ndarray:
    """sqrt(lambda / M) for the circulant embedding of n unit-lag fGn values."""
    size = 1 << max(1, int(np.ceil(np.log2(2 * n))))
    for _ in range(MAX_DOUBLINGS + 1):
        half = size // 2
        lags = np.arange(half + 1)
        acf = fgn_covariance(H0, lags)
        row = np.concatenate([acf, acf[1:-1][::-1]])
        eig = np.fft.fft(row).real
        if eig.min() >= EIGEN_TOLERANCE:
            out = np.sqrt(np.maximum(eig, 0.0) / size)
            out.setflags(write=False)
            return out
        size *= 2
    raise EmbeddingError(
        f"circulant embedding indefinite for H0={H0}, n={n} "
        f"(min eigenvalue {eig.min():.3e} after {MAX_DOUBLINGS} doublings)"
    )


def _fgn_increments(H0, n, rng):
    root = _embedding_sqrt_eigenvalues(H0, n)
    size = root.size
    noise = rng.standard_normal(size) + 1j * rng.standard_normal(size)
    return np.fft.fft(root * noise).real[:n]


def sample_fbm_path(H0, n, dx, seed: SeedLike, *, x0=0.0):
    """Exact fBm on the grid x0 + k*dx, k = 0..n, pinned to zero at x0.

    Increments are unit-lag fGn scaled by dx^H0 (self-similarity of fBm), drawn
    from a circulant embedding padded to a power of two at least 2n.
    """
    H0 = check_hurst(H0)
    n = check_order(n, name="n", minimum=1)
    dx = check_positive(dx, name="dx")
    rng = as_generator(seed)
    incr = _fgn_increments(H0, n, rng) * dx**H0
    values = np.empty(n + 1)
    values[0] = 0.0
    np.cumsum(incr, out=values[1:])
    return GaussianPath(values, dx, H0, "fbm", seed=seed_value(seed), x0=x0)


def fgn_from_fbm(path: GaussianPath):
    """Unit-lag noise g(x) = B(x) - B(x-1) on the part of the grid where B(x-1) exists.

    The output starts one unit after ``path.x0``; a path sampled on [-1, L]
    yields g on [0, L].
    """
    if path.kind != "fbm":
        raise ValueError("fgn_from_fbm expects an fbm path")
    lag = integral_ratio(1.0, path.dx, name="1/dx")
    if lag > path.n:
        raise ValueError("path shorter than one unit of lag")
    values = path.values[lag:] - path.values[:-lag]
    return GaussianPath(values, path.dx, path.H0, "fgn", seed=path.seed, x0=path.x0 + lag * path.dx)


def sample_fgn_path(H0, n, dx, seed: SeedLike):
    """Unit-lag fGn sampled at x = k*dx, k = 0..n, from one fBm embedding on [-1, n*dx]."""
    lag = integral_ratio(1.0, dx, name="1/dx")
    fbm = sample_fbm_path(H0, n + lag, dx, seed, x0=-lag * dx)
    return fgn_from_fbm(fbm)


class FGNSampler(BaseEstimator):
    """Estimator-style wrapper: ``fit`` prepares the embedding, ``sample`` draws paths.

    Parameters
    ----------
    H0 : float
        Hurst parameter of the underlying fBm.
    n : int
        Number of grid steps; paths have ``n + 1`` values.
    dx : float
        Grid spacing. For ``kind='fgn'`` 1/dx must be an integer.
    kind : {'fgn', 'fbm'}
    """

    def __init__(self, H0=0.75, n=1024, dx=1.0, kind="fgn"):
        self.H0 = H0
        self.n = n
        self.dx = dx
        self.kind = kind

    def fit(self, X=None, y=None):
        H0 = check_hurst(self.H0)
        n = check_order(self.n, name="n", minimum=1)
        check_positive(self.dx, name="dx")
        if self.kind not in ("fgn", "fbm"):
            raise ValueError(f"kind must be 'fgn' or 'fbm', got {self.kind!r}")
        steps = n
        if self.kind == "fgn":
            steps += integral_ratio(1.0, self.dx, name="1/dx")
        self.embedding_size_ = _embedding_sqrt_eigenvalues(H0, steps).size
        return self

    def sample(self, seed: SeedLike):
        check_is_fitted(self, "embedding_size_")
        if self.kind == "fgn":
            return sample_fgn_path(self.H0, self.n, self.dx, seed)
        return sample_fbm_path(self.H0, self.n, self.dx, seed)

    def sample_values(self, seeds):
        """Stack of path values, one row per seed (order preserved)."""
        return np.stack([self.sample(s).values for s in seeds])


# ---------------------------------------------------------------------------
# Moving-average kernel conditions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KernelSpec:
    """Moving-average kernel e with g(x) = int e(x - xi) dW(xi).

    ``fgn``        e(u) = sigma * (u^(H0-1/2) - (u-1)_+^(H0-1/2)) for u > 0, 0 otherwise,
                   with sigma = A_{1,H0} / (H0 - 1/2); this is the kernel of unit-lag fGn.
    ``power_law``  e(u) = sqrt(2 - 2 H0) * u^(H0-3/2) for u > 1, 0 otherwise.
    """

    H0: float
    kind: str = "fgn"
    slow_vary: SlowVaryFn | None = None

    def __post_init__(self):
        if self.kind not in ("fgn", "power_law"):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        kernel_beta_constant(self.H0)  # validates H0
        if self.slow_vary is None:
            if self.kind == "fgn":
                sv = SlowVaryFn.fgn_example(self.H0)
            else:
                sv = SlowVaryFn.constant(self.prefactor / self.C0)
            object.__setattr__(self, "slow_vary", sv)

    @property
    def C0(self):
        return kernel_beta_constant(self.H0) ** -0.5

    @property
    def prefactor(self):
        H0 = self.H0
        if self.kind == "fgn":
            A1 = np.sqrt(H0 * (2 * H0 - 1) / kernel_beta_constant(H0))
            return float(A1 / (H0 - 0.5))
        return float(np.sqrt(2.0 - 2.0 * H0))

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        a = self.H0 - 0.5
        pos = np.maximum(u, 0.0)
        if self.kind == "fgn":
            body = pos**a - np.maximum(pos - 1.0, 0.0) ** a
            out = np.where(u > 0, self.prefactor * body, 0.0)
        else:
            out = np.where(u > 1, self.prefactor * np.maximum(u, 1.0) ** (self.H0 - 1.5), 0.0)
        return out if out.ndim else float(out)


@dataclass
class KernelReport:
    l2_norm_sq: float
    l2_passed: bool
    sup_ratio: float
    bound_passed: bool
    tail_ratio: float
    C0: float
    asymptotic_passed: bool
    vanishes_for_nonpositive: bool
    truncation: float
    ratios: np.ndarray = field(repr=False)
    grid: np.ndarray = field(repr=False)

    @property
    def passed(self):
        return self.l2_passed and self.bound_passed and self.asymptotic_passed and self.vanishes_for_nonpositive


def kernel_conditions_report(kernel: KernelSpec, truncation=1e6, *, l2_tol=1e-3, ratio_tol=1e-3):
    """Numerical check of the square-integrability, power-law bound and asymptotics of e.

    Condition (3d) of the construction has no finite-sample test and is not checked.
    """
    if truncation < 1e3:
        raise ValueError("truncation must be at least 1e3")
    sq = lambda u: kernel(u) ** 2  # noqa: E731
    edges = np.concatenate([[0.0, 1.0], np.logspace(0.25, np.log10(truncation), 64)])
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        val, _ = integrate.quad(sq, a, b, limit=200, epsabs=1e-14, epsrel=1e-12)
        total += val

    grid = np.logspace(-6, np.log10(truncation), 2001)
    envelope = grid ** (kernel.H0 - 1.5) * kernel.slow_vary(grid)
    ratios = np.abs(kernel(grid)) / envelope
    sup_ratio = float(np.max(ratios))
    tail_ratio = float(ratios[-1])
    negative = -np.logspace(-6, 6, 50)
    vanish = bool(np.all(kernel(np.concatenate([negative, [0.0]])) == 0.0))
    return KernelReport(
        l2_norm_sq=float(total),
        l2_passed=abs(total - 1.0) <= l2_tol,
        sup_ratio=sup_ratio,
        bound_passed=bool(np.isfinite(sup_ratio)),
        tail_ratio=tail_ratio,
        C0=kernel.C0,
        asymptotic_passed=abs(tail_ratio / kernel.C0 - 1.0) <= ratio_tol,
        vanishes_for_nonpositive=vanish,
        truncation=float(truncation),
        ratios=ratios,
        grid=grid,
    )
