"""Perturbed elliptic solves with a rapidly oscillating long-range potential.

For a sampled driver g the potential q_eps(x) = Phi(g(x / eps)) enters
(P + q0 + q_eps) u_eps = f with homogeneous Dirichlet data. The fluctuation
u_eps - u0 is normalised by X(eps) = eps d(1/eps) with
d(x) = sqrt(m! / (H (2H - 1))) x^H L(x)^m and H = 1 + m (H0 - 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._validation import check_lrd_hurst, check_positive, check_unit_interval, frozen, integral_ratio
from .green_operator import GreenMatrix, OperatorSpec, build_green
from .hermite_chaos import PotentialSpec, apply_potential
from .lrd_gaussian import SlowVaryFn, sample_fgn_path
from .rng import SeedLike, seed_value

__all__ = [
    "FluctuationSample",
    "Decomposition",
    "scaling_d",
    "scaling_X",
    "solve_perturbed",
    "decompose_fluctuation",
    "grid_l2_norm",
    "default_slow_vary",
]

MIN_RESOLUTION = 8


def default_slow_vary(H0):
    """L of the unit-lag fGn driver: its covariance is ~ u^(2H0-2) L(u)^2."""
    return SlowVaryFn.fgn_example(H0)


def scaling_d(x, m, H0, L: SlowVaryFn | None = None):
    """d(x) = sqrt(m! / (H (2H - 1))) x^H L(x)^m with H = 1 + m (H0 - 1).

    ``L`` defaults to the constant 1.
    """
    H = check_lrd_hurst(H0, m)
    L = SlowVaryFn.constant() if L is None else L
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("scaling_d needs x > 0")
    out = math.sqrt(math.factorial(m) / (H * (2 * H - 1))) * x**H * np.asarray(L(x)) ** m
    return out if out.ndim else float(out)


def scaling_X(eps, m, H0, L: SlowVaryFn | None = None):
    """X(eps) = eps * d(1 / eps)."""
    eps = np.asarray(eps, dtype=float)
    if np.any((eps <= 0) | (eps >= 1)):
        raise ValueError("eps must lie in (0, 1)")
    out = eps * scaling_d(1.0 / eps, m, H0, L)
    return out if np.ndim(out) else float(out)


def grid_l2_norm(v, h):
    """Trapezoid L2((0, 1)) norm of interior grid values with zero boundary values."""
    v = np.asarray(v, dtype=float)
    return np.sqrt(h * np.sum(v * v, axis=-1))


@dataclass(frozen=True)
class FluctuationSample:
    """One realisation on the interior nodes; boundary values are zero by construction."""

    epsilon: float
    x: np.ndarray
    u_eps: np.ndarray
    u0: np.ndarray
    normalized: np.ndarray
    q_eps: np.ndarray
    X: float
    seed: int | None
    H0: float
    m: int

    def __post_init__(self):
        for name in ("x", "u_eps", "u0", "normalized", "q_eps"):
            object.__setattr__(self, name, frozen(getattr(self, name)))

    @property
    def h(self):
        return float(self.x[1] - self.x[0])

    def padded(self, name):
        """Field ``name`` with the two boundary zeros attached."""
        return np.pad(getattr(self, name), 1)

    @property
    def error_norm_sq(self):
        """||u_eps - u0||^2 in L2((0, 1))."""
        return float(grid_l2_norm(self.u_eps - self.u0, self.h) ** 2)

    def at(self, x_probe, name="normalized"):
        i = int(round(x_probe / self.h)) - 1
        if not (0 <= i < self.x.size and abs(self.x[i] - x_probe) < 1e-12):
            raise ValueError(f"probe {x_probe} is not an interior grid node")
        return float(getattr(self, name)[i])

    def rows(self):
        """CSV-ready rows (x, u_eps, u0, normalized) including the boundary nodes."""
        x = np.concatenate([[0.0], self.x, [1.0]])
        return np.column_stack([x, self.padded("u_eps"), self.padded("u0"), self.padded("normalized")])


@dataclass(frozen=True)
class Decomposition:
    I: np.ndarray
    Q: np.ndarray
    r: np.ndarray
    residual: float

    def norms(self, h):
        return tuple(float(grid_l2_norm(v, h)) for v in (self.I, self.Q, self.r))


def _check_potential(spec: OperatorSpec, pot: PotentialSpec):
    if not pot.bounded:
        raise ValueError(f"potential {pot.phi!r} is unbounded and cannot enter the solver")
    if pot.gamma > spec.q0 * (1 + 1e-12):
        raise ValueError(f"potential bound gamma = {pot.gamma:g} exceeds q0 = {spec.q0:g}")


def solve_perturbed(
    spec,
    pot: PotentialSpec,
    eps,
    f,
    seed: SeedLike,
    *,
    H0,
    L: SlowVaryFn | None = None,
    u0=None,
    method="auto",
):
    """Sample q_eps on the grid, solve the perturbed problem and normalise the fluctuation.

    Parameters
    ----------
    spec : OperatorSpec or GreenMatrix
    pot : PotentialSpec
        Bounded catalog potential with gamma <= q0; its Hermite rank sets m.
    eps : float
        Oscillation scale in (0, 1); the grid must satisfy h <= eps / 8 and
        eps / h must be an integer (the driver is sampled at spacing h / eps).
    f : array or callable
        Right-hand side on the interior nodes.
    seed : int or Generator
        Stream for the Gaussian driver.
    H0 : float
        Hurst parameter of the unit-lag fGn driver.
    L : SlowVaryFn, optional
        Slowly varying function in X(eps); defaults to that of the driver.
    u0 : array, optional
        Precomputed homogenized solution (saves one solve per replicate).
    """
    gm = spec if isinstance(spec, GreenMatrix) else build_green(spec)
    spec = gm.spec
    _check_potential(spec, pot)
    eps = check_unit_interval(eps, name="eps")
    h = gm.h
    if h > eps / MIN_RESOLUTION * (1 + 1e-12):
        raise ValueError(f"grid too coarse: h = {h:g} > eps/{MIN_RESOLUTION} = {eps / MIN_RESOLUTION:g}")
    integral_ratio(eps, h, name="eps/h")
    m = pot.rank
    check_lrd_hurst(H0, m)
    L = default_slow_vary(H0) if L is None else L
    if callable(f):
        f = np.broadcast_to(np.asarray(f(gm.x), dtype=float), gm.x.shape)
    f = np.asarray(f, dtype=float)
    if u0 is None:
        u0 = gm.apply(f)

    driver = sample_fgn_path(H0, gm.n, h / eps, seed)
    q = apply_potential(pot, driver.values[1:])
    if np.min(spec.q0 + q) < 0:
        raise AssertionError("q0 + q_eps < 0")
    if not np.any(q):
        u = np.array(u0, dtype=float)
    else:
        u = gm.solve_perturbed(q, f, method=method)
    X = scaling_X(eps, m, H0, L)
    return FluctuationSample(
        epsilon=eps,
        x=gm.x,
        u_eps=u,
        u0=u0,
        normalized=(u - u0) / X,
        q_eps=q,
        X=X,
        seed=seed_value(seed),
        H0=float(H0),
        m=m,
    )


def decompose_fluctuation(sample: FluctuationSample, spec, pot: PotentialSpec | None = None):
    """Split the normalised fluctuation as -I + Q + r.

    I = G(q u0) / X,  Q = G(q G(q u0)) / X,  r = G(q G(q (u_eps - u0))) / X,
    each with G the Green operator; ``residual`` is max |normalized + I - Q - r|.
    """
    gm = spec if isinstance(spec, GreenMatrix) else build_green(spec)
    if pot is not None:
        _check_potential(gm.spec, pot)
    q, X = sample.q_eps, sample.X
    first = gm.apply(q * sample.u0)
    I = first / X
    Q = gm.apply(q * first) / X
    r = gm.apply(q * gm.apply(q * (sample.u_eps - sample.u0))) / X
    residual = float(np.max(np.abs(sample.normalized + I - Q - r))) if sample.normalized.size else 0.0
    return Decomposition(frozen(I), frozen(Q), frozen(r), residual)


def check_resolution(n, eps_list):
    """Raise unless every eps satisfies h <= eps / 8 with eps / h integral."""
    h = 1.0 / (n + 1)
    for eps in eps_list:
        check_positive(eps, name="eps")
        if h > eps / MIN_RESOLUTION * (1 + 1e-12):
            raise ValueError(f"n = {n} too coarse for eps = {eps:g}")
        integral_ratio(eps, h, name="eps/h")
