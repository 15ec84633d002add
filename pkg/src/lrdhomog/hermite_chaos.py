"""Hermite chaos of the potential map and the covariance law of q = Phi(g).

Probabilists' Hermite polynomials are used throughout. A potential Phi is
expanded as Phi = sum_q V_q / q! H_q with V_q = E[Phi(X) H_q(X)], X ~ N(0, 1);
for a unit-variance Gaussian driver with correlation gamma_g the covariance of
Phi(g) is then sum_{n >= m} V_n^2 / n! * gamma_g^n.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np
from numpy.polynomial import hermite_e
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from ._validation import check_order, check_positive, frozen
from .lrd_gaussian import GaussianPath, sample_fgn_path
from .parallel import map_replicates
from .rng import replicate_stream

__all__ = [
    "RANK_TOL",
    "ChaosExpansion",
    "PotentialSpec",
    "PotentialTransformer",
    "AutocovFit",
    "hermite_poly",
    "hermite_normalized",
    "gauss_hermite_rule",
    "chaos_coefficients",
    "potential_autocov",
    "apply_potential",
    "empirical_autocov",
    "autocov_decay_fit",
]

RANK_TOL = 1e-10
TAIL_TOL = 1e-12
MAX_ORDER = 64
DEFAULT_QMAX = 32
DEFAULT_NODES = 96


def hermite_poly(q, x):
    """Probabilists' Hermite polynomial H_q(x), 0 <= q <= 64, by H_{q+1} = x H_q - q H_{q-1}."""
    q = check_order(q, name="q", minimum=0, maximum=MAX_ORDER)
    x = np.asarray(x, dtype=float)
    prev = np.ones_like(x)
    if q == 0:
        return prev if prev.ndim else float(prev)
    cur = x.copy()
    for k in range(1, q):
        prev, cur = cur, x * cur - k * prev
    return cur if cur.ndim else float(cur)


def hermite_normalized(qmax, x):
    """Rows h_0..h_qmax of H_q(x) / sqrt(q!), computed by the stable normalised recurrence."""
    qmax = check_order(qmax, name="qmax", minimum=0)
    x = np.asarray(x, dtype=float)
    out = np.empty((qmax + 1,) + x.shape)
    out[0] = 1.0
    if qmax >= 1:
        out[1] = x
    for q in range(1, qmax):
        out[q + 1] = (x * out[q] - np.sqrt(q) * out[q - 1]) / np.sqrt(q + 1)
    return out


@lru_cache(maxsize=16)
def gauss_hermite_rule(nodes: int):
    """Nodes and weights integrating against the standard Gaussian density."""
    x, w = hermite_e.hermegauss(nodes)
    w = w / np.sqrt(2.0 * np.pi)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


# ---------------------------------------------------------------------------
# Chaos expansion
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChaosExpansion:
    """Hermite coefficients V_0..V_Qmax of a square-integrable function.

    ``phi_sq_mean`` is the quadrature of E[Phi(X)^2]; the difference with
    ``V_0^2 + l2_norm_sq`` bounds the energy beyond Qmax.
    """

    coeffs: np.ndarray
    rank: int
    phi_sq_mean: float = float("nan")
    rank_tol: float = RANK_TOL
    tail_tol: float = TAIL_TOL

    def __post_init__(self):
        coeffs = frozen(self.coeffs)
        if coeffs.ndim != 1 or coeffs.size < 2:
            raise ValueError("coeffs must be a 1-d array with at least V_0 and V_1")
        object.__setattr__(self, "coeffs", coeffs)
        rank = check_order(self.rank, name="rank", minimum=1, maximum=coeffs.size - 1)
        object.__setattr__(self, "rank", rank)
        normed = np.abs(coeffs[1:rank]) / np.sqrt(_factorials(rank - 1)[1:])
        if np.any(normed > self.rank_tol):
            raise ValueError(f"coefficients below rank {rank} are not negligible")

    @property
    def qmax(self):
        return self.coeffs.size - 1

    @property
    def energies(self):
        """V_q^2 / q! for q = 0..Qmax."""
        return self.coeffs**2 / _factorials(self.qmax)

    @property
    def l2_norm_sq(self):
        """sum_{q >= 1} V_q^2 / q!, the variance of Phi(X)."""
        return float(np.sum(self.energies[1:]))

    @property
    def tail_energy(self):
        """Energy of Phi not captured by V_0..V_Qmax (clipped at zero)."""
        if not np.isfinite(self.phi_sq_mean):
            return float("nan")
        return max(float(self.phi_sq_mean - self.energies.sum()), 0.0)

    @property
    def leading(self):
        """V_m / m!, the coefficient multiplying H_m."""
        return float(self.coeffs[self.rank] / math.factorial(self.rank))

    def scaled(self, a):
        return ChaosExpansion(a * self.coeffs, self.rank, a * a * self.phi_sq_mean, self.rank_tol, self.tail_tol)

    def to_dict(self):
        return {
            "coeffs": [float(c) for c in self.coeffs],
            "rank": self.rank,
            "phi_sq_mean": float(self.phi_sq_mean),
            "rank_tol": self.rank_tol,
            "tail_tol": self.tail_tol,
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - {"coeffs", "rank", "phi_sq_mean", "rank_tol", "tail_tol"}
        if unknown:
            raise ValueError(f"unknown chaos keys: {sorted(unknown)}")
        return cls(
            np.asarray(d["coeffs"], dtype=float),
            int(d["rank"]),
            float(d.get("phi_sq_mean", float("nan"))),
            float(d.get("rank_tol", RANK_TOL)),
            float(d.get("tail_tol", TAIL_TOL)),
        )

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def _factorials(q):
    return np.array([math.factorial(k) for k in range(q + 1)], dtype=float)


def _detect_rank(normed, tol):
    above = np.flatnonzero(np.abs(normed[1:]) > tol)
    return int(above[0]) + 1 if above.size else None


def chaos_coefficients(phi, Qmax=DEFAULT_QMAX, nodes=DEFAULT_NODES, *, rank_tol=RANK_TOL, tail_tol=TAIL_TOL):
    """Hermite coefficients of ``phi`` by Gauss-Hermite quadrature.

    Parameters
    ----------
    phi : callable or PotentialSpec or str
        Function of one real variable (vectorised) or a catalog name.
    Qmax : int
        Highest coefficient computed (at most 64).
    nodes : int
        Quadrature size, at least ``2 * Qmax``.

    Raises
    ------
    ValueError
        If the energy V_q^2 / q! at q = Qmax - 1 or Qmax is still above
        ``tail_tol`` (truncation not converged) or no coefficient of order >= 1 exceeds the rank tolerance.
    """
    Qmax = check_order(Qmax, name="Qmax", minimum=1, maximum=MAX_ORDER)
    nodes = check_order(nodes, name="nodes", minimum=2 * Qmax)
    if isinstance(phi, str):
        phi = PotentialSpec(phi)
    x, w = gauss_hermite_rule(nodes)
    vals = np.asarray(phi(x), dtype=float)
    normed = hermite_normalized(Qmax, x) @ (w * vals)
    coeffs = normed * np.sqrt(_factorials(Qmax))
    scale = max(1.0, float(np.sum(normed**2)))
    # last two orders, so that parity-vanishing coefficients cannot hide a slow tail
    last = float(np.max(normed[-2:] ** 2))
    if last > tail_tol * scale:
        raise ValueError(f"chaos expansion not converged at Qmax={Qmax}: V_q^2/q! = {last:.3e} at the tail")
    rank = _detect_rank(normed, rank_tol)
    if rank is None:
        raise ValueError("no Hermite coefficient of order >= 1 above the rank tolerance")
    return ChaosExpansion(coeffs, rank, float(w @ vals**2), rank_tol, tail_tol)


# ---------------------------------------------------------------------------
# Potential catalog
# ---------------------------------------------------------------------------

_E_HALF = math.exp(-0.5)

# name -> (function, sup |Phi| at amplitude 1 or None, Fourier condition holds)
_CATALOG = {
    "sin": (np.sin, 1.0, True),
    "centered_cos": (lambda x: np.cos(x) - _E_HALF, 1.0 + _E_HALF, True),
    "pure_hermite": (None, None, None),
}


@dataclass(frozen=True)
class PotentialSpec:
    """Catalog potential Phi = amplitude * base(x).

    Parameters
    ----------
    phi : {'sin', 'centered_cos', 'pure_hermite'}
    amplitude : float
        Non-negative scale ``a``.
    m : int
        Order for ``pure_hermite`` (Phi = a H_m); ignored otherwise.
    gamma : float, optional
        Declared bound with sup |Phi| <= gamma. Defaults to the exact supremum
        ``a * sup|base|``; ``pure_hermite`` is unbounded and carries no gamma.
    """

    phi: str = "sin"
    amplitude: float = 1.0
    m: int | None = None
    gamma: float | None = None

    def __post_init__(self):
        if self.phi not in _CATALOG:
            raise ValueError(f"unknown potential {self.phi!r}; expected one of {sorted(_CATALOG)}")
        a = float(self.amplitude)
        if not (np.isfinite(a) and a >= 0):
            raise ValueError(f"amplitude must be finite and non-negative, got {a!r}")
        object.__setattr__(self, "amplitude", a)
        if self.phi == "pure_hermite":
            object.__setattr__(self, "m", check_order(self.m, name="m", minimum=1, maximum=MAX_ORDER))
            if self.gamma is not None:
                raise ValueError("pure_hermite is unbounded and takes no gamma")
            return
        object.__setattr__(self, "m", None)
        sup = a * _CATALOG[self.phi][1]
        if self.gamma is None:
            object.__setattr__(self, "gamma", sup)
        else:
            gamma = float(self.gamma)
            if not gamma >= 0:
                raise ValueError("gamma must be non-negative")
            grid = np.linspace(-40.0, 40.0, 200001)
            if np.max(np.abs(self(grid))) > gamma * (1 + 1e-12):
                raise ValueError(f"sup|Phi| = {sup:g} exceeds the declared bound gamma = {gamma:g}")
            object.__setattr__(self, "gamma", gamma)

    @property
    def bounded(self):
        return self.phi != "pure_hermite"

    @property
    def fourier_condition(self):
        """Whether int |Phi^(xi)| (1 + |xi|^3) dxi < inf holds (documented, not computed)."""
        return _CATALOG[self.phi][2]

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.phi == "pure_hermite":
            base = hermite_poly(self.m, x)
        else:
            base = _CATALOG[self.phi][0](x)
        return self.amplitude * base

    @cached_property
    def chaos(self) -> ChaosExpansion:
        # rank comes from the unit-amplitude shape so that a = 0 keeps its order
        base = PotentialSpec(self.phi, 1.0, self.m)
        qmax = max(DEFAULT_QMAX, self.m or 0)
        nodes = max(DEFAULT_NODES, 2 * qmax + 8)
        return chaos_coefficients(base, qmax, nodes).scaled(self.amplitude)

    @property
    def rank(self):
        return self.chaos.rank

    def to_dict(self):
        d = {"phi": self.phi, "amplitude": self.amplitude}
        if self.m is not None:
            d["m"] = self.m
        if self.gamma is not None:
            d["gamma"] = self.gamma
        return d

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - {"phi", "amplitude", "m", "gamma"}
        if unknown:
            raise ValueError(f"unknown potential keys: {sorted(unknown)}")
        return cls(d.get("phi", "sin"), d.get("amplitude", 1.0), d.get("m"), d.get("gamma"))


def potential_autocov(chaos: ChaosExpansion, gamma_g, *, return_tail=False):
    """Covariance sum_{n >= m} V_n^2 / n! * gamma_g^n of Phi(g) at Gaussian correlation gamma_g.

    With ``return_tail`` the bound |gamma_g|^(Qmax+1) * (unresolved energy) on
    the truncated part of the series is returned as well.
    """
    gamma_g = np.asarray(gamma_g, dtype=float)
    if np.any(np.abs(gamma_g) > 1.0):
        raise ValueError("Gaussian correlation must satisfy |gamma_g| <= 1")
    energies = chaos.energies
    orders = np.arange(chaos.rank, chaos.qmax + 1)
    value = np.zeros_like(gamma_g)
    # Horner in gamma_g over orders rank..Qmax
    for n in orders[::-1]:
        value = value * gamma_g + energies[n]
    value = value * gamma_g**chaos.rank
    value = value if value.ndim else float(value)
    if not return_tail:
        return value
    tail = np.abs(gamma_g) ** (chaos.qmax + 1) * chaos.tail_energy
    return value, (tail if tail.ndim else float(tail))


def apply_potential(spec: PotentialSpec, g, *, allow_unbounded=False):
    """Pointwise q = Phi(g) for a GaussianPath or an array of driver values."""
    if not spec.bounded and not allow_unbounded:
        raise ValueError(f"potential {spec.phi!r} is unbounded; only the Taqqu simulator may use it")
    values = g.values if isinstance(g, GaussianPath) else np.asarray(g, dtype=float)
    return spec(values)


class PotentialTransformer(BaseEstimator, TransformerMixin):
    """Estimator-style wrapper mapping Gaussian driver samples to q = Phi(g).

    ``fit`` computes the chaos expansion (``coeffs_``, ``rank_``); ``transform``
    applies Phi entrywise to an array of shape (n_samples, n_points).
    """

    def __init__(self, phi="sin", amplitude=1.0, m=None, gamma=None, allow_unbounded=False):
        self.phi = phi
        self.amplitude = amplitude
        self.m = m
        self.gamma = gamma
        self.allow_unbounded = allow_unbounded

    def fit(self, X=None, y=None):
        self.spec_ = PotentialSpec(self.phi, self.amplitude, self.m, self.gamma)
        self.chaos_ = self.spec_.chaos
        self.coeffs_ = self.chaos_.coeffs
        self.rank_ = self.chaos_.rank
        return self

    def transform(self, X):
        check_is_fitted(self, "spec_")
        X = check_array(X, ensure_2d=False, dtype=float)
        return apply_potential(self.spec_, X, allow_unbounded=self.allow_unbounded)


# ---------------------------------------------------------------------------
# Empirical autocovariance and decay fit
# ---------------------------------------------------------------------------

@dataclass
class AutocovFit:
    slope: float
    stderr: float
    expected_slope: float
    lags: np.ndarray
    empirical: np.ndarray
    mc_error: np.ndarray
    theory: np.ndarray
    n_replicates: int
    path_length: int
    extra: dict = field(default_factory=dict)

    @property
    def max_z(self):
        """Largest |empirical - theory| in units of the MC standard error."""
        return float(np.max(np.abs(self.empirical - self.theory) / self.mc_error))


def empirical_autocov(q, lags):
    """Per-row estimates mean_k q[k] q[k+h], using the known zero mean (no demeaning)."""
    q = np.atleast_2d(np.asarray(q, dtype=float))
    n = q.shape[1]
    lags = np.asarray(lags, dtype=int)
    if lags.min() < 0 or lags.max() >= n:
        raise ValueError("lags must lie in [0, path length)")
    size = 1 << int(np.ceil(np.log2(2 * n)))
    spec = np.fft.rfft(q, size, axis=1)
    acf = np.fft.irfft(spec * spec.conj(), size, axis=1)[:, :n]
    return acf[:, lags] / (n - lags)


def autocov_decay_fit(spec: PotentialSpec, H0, lags, N, *, seed=0, path_length=None, label="autocov", threads=1):
    """Log-log slope of the empirical covariance of q = Phi(g) with g unit-lag fGn.

    Returns an :class:`AutocovFit` carrying the fitted slope and its standard
    error, the expected exponent -2m(1-H0), and the empirical and theoretical
    covariance at each lag with Monte Carlo standard errors.
    """
    from .lrd_gaussian import fgn_covariance
    from .stats import fit_loglog_slope

    lags = np.unique(np.asarray(lags, dtype=int))
    if lags.min() < 1 or lags.max() / lags.min() < 10:
        raise ValueError("lags must be positive and span at least one decade")
    N = check_order(N, name="N", minimum=2)
    n = int(path_length or 8 * lags.max())
    check_positive(n - lags.max(), name="path_length - max lag")

    def one(r):
        g = sample_fgn_path(H0, n - 1, 1.0, replicate_stream(seed, label, r))
        return empirical_autocov(apply_potential(spec, g, allow_unbounded=True), lags)[0]

    per_path = np.asarray(map_replicates(one, N, threads))
    emp = per_path.mean(axis=0)
    err = per_path.std(axis=0, ddof=1) / np.sqrt(N)
    theory = potential_autocov(spec.chaos, fgn_covariance(H0, lags))
    slope, stderr = fit_loglog_slope(lags, np.abs(emp))
    return AutocovFit(
        slope=slope,
        stderr=stderr,
        expected_slope=-2.0 * spec.rank * (1.0 - H0),
        lags=lags,
        empirical=emp,
        mc_error=err,
        theory=np.asarray(theory),
        n_replicates=N,
        path_length=n,
    )
