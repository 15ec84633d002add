"""Green operators of two concrete elliptic operators on (0, 1) with Dirichlet data.

``laplace``              P = -d^2/dx^2, second-order finite differences.
``spectral_fractional``  P = (-d^2/dx^2)^s, the spectral power of the Dirichlet
                         Laplacian, truncated to K sine modes.

Both are discretised on the n interior nodes x_i = i h, h = 1/(n+1). The
Nystrom matrix W = h * [G(x_i, x_j)] maps grid values of f to grid values of
u = G f (trapezoid weights; the boundary terms vanish).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import linalg
from scipy.fft import dst
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import ConvergenceError, check_finite_1d, check_order

__all__ = [
    "OperatorSpec",
    "GreenMatrix",
    "GreenSolver",
    "build_green",
    "homogenized_solve",
    "singularity_diagnostic",
    "lipschitz_diagnostic",
    "refinement_study",
]

KINDS = ("laplace", "spectral_fractional")


def _sine(v):
    """Orthonormal DST-I along the last axis (its own inverse)."""
    return dst(v, type=1, norm="ortho", axis=-1)


@dataclass(frozen=True)
class OperatorSpec:
    """Operator kind, zeroth-order constant q0, grid size and mode truncation.

    Parameters
    ----------
    kind : {'laplace', 'spectral_fractional'}
    q0 : float
        Non-negative constant added to P.
    n : int
        Number of interior nodes (at least 16).
    s : float
        Fractional power in (0, 1]; only for ``spectral_fractional``.
    K : int, optional
        Number of sine modes kept, at least n; defaults to n. Modes beyond n
        are folded onto the grid by aliasing.
    """

    kind: str = "laplace"
    q0: float = 1.0
    n: int = 255
    s: float | None = None
    K: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown operator kind {self.kind!r}; expected one of {KINDS}")
        q0 = float(self.q0)
        if not (np.isfinite(q0) and q0 >= 0):
            raise ValueError(f"q0 must be finite and non-negative, got {q0!r}")
        object.__setattr__(self, "q0", q0)
        object.__setattr__(self, "n", check_order(self.n, name="n", minimum=16))
        if self.kind == "laplace":
            if self.s is not None or self.K is not None:
                raise ValueError("s and K only apply to the spectral_fractional kind")
            return
        s = float(self.s) if self.s is not None else float("nan")
        if not 0.0 < s <= 1.0:
            raise ValueError(f"fractional power s must lie in (0, 1], got {self.s!r}")
        object.__setattr__(self, "s", s)
        K = self.n if self.K is None else check_order(self.K, name="K", minimum=self.n)
        object.__setattr__(self, "K", K)

    @property
    def h(self):
        return 1.0 / (self.n + 1)

    @property
    def x(self):
        return self.h * np.arange(1, self.n + 1)

    @property
    def beta(self):
        """Singularity exponent: |G(x, y)| <= C |x - y|^(beta - 1)."""
        return 1.0 if self.kind == "laplace" else min(2.0 * self.s, 1.0)

    @property
    def norm_bound(self):
        """1 / (lambda_1^s + q0), the L2 operator norm of the continuum Green operator."""
        power = 1.0 if self.kind == "laplace" else self.s
        return 1.0 / (np.pi ** (2 * power) + self.q0)

    def refined(self, n):
        K = None if self.K is None else max(n, self.K * (n + 1) // (self.n + 1))
        return OperatorSpec(self.kind, self.q0, n, self.s, K)

    def to_dict(self):
        d = {"kind": self.kind, "q0": self.q0, "n": self.n}
        if self.kind == "spectral_fractional":
            d.update(s=self.s, K=self.K)
        return d

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - {"kind", "q0", "n", "s", "K"}
        if unknown:
            raise ValueError(f"unknown operator keys: {sorted(unknown)}")
        return cls(d.get("kind", "laplace"), d.get("q0", 1.0), d.get("n", 255), d.get("s"), d.get("K"))


class GreenMatrix:
    """Discrete Green operator of an :class:`OperatorSpec`.

    ``matrix`` is the dense Nystrom-weighted matrix W (built on first access);
    ``kernel`` is W / h, the Green function at node pairs. ``apply`` and
    ``solve_perturbed`` use O(n) banded or O(n log n) sine-transform algorithms
    and never form W.
    """

    def __init__(self, spec: OperatorSpec):
        self.spec = spec
        self.n = spec.n
        self.h = spec.h
        self.x = spec.x
        self.x.setflags(write=False)

    def __repr__(self):
        return f"GreenMatrix({self.spec!r})"

    # -- spectral data -------------------------------------------------
    @cached_property
    def _band(self):
        n, h = self.n, self.h
        ab = np.zeros((3, n))
        ab[0, 1:] = -1.0 / h**2
        ab[2, :-1] = -1.0 / h**2
        ab[1] = 2.0 / h**2 + self.spec.q0
        ab.setflags(write=False)
        return ab

    @cached_property
    def symbol(self):
        """Eigenvalues of W in the discrete sine basis (aliased modes folded in)."""
        n, spec = self.n, self.spec
        k = np.arange(1, n + 1)
        if spec.kind == "laplace":
            lam = 4.0 / self.h**2 * np.sin(k * np.pi * self.h / 2) ** 2
            out = 1.0 / (lam + spec.q0)
        else:
            period = 2 * (n + 1)
            modes = np.arange(1, spec.K + 1)
            weights = 1.0 / ((modes * np.pi) ** (2 * spec.s) + spec.q0)
            r = modes % period
            r = np.where(r > n + 1, period - r, r)
            keep = (r >= 1) & (r <= n)
            out = np.bincount(r[keep] - 1, weights=weights[keep], minlength=n)
        out.setflags(write=False)
        return out

    @cached_property
    def matrix(self):
        if self.spec.kind == "laplace":
            W = linalg.solve_banded((1, 1), self._band, np.eye(self.n))
        else:
            S = _sine(np.eye(self.n))
            W = (S * self.symbol) @ S
        W = 0.5 * (W + W.T)
        assert np.all(np.isfinite(W)), "Green matrix has non-finite entries"
        W.setflags(write=False)
        return W

    @property
    def kernel(self):
        return self.matrix / self.h

    def kernel_at(self, x, y):
        """G(x, y) at grid nodes x, y (looked up, not interpolated)."""
        i = np.rint(np.asarray(x) / self.h).astype(int) - 1
        j = np.rint(np.asarray(y) / self.h).astype(int) - 1
        if np.any((i < 0) | (i >= self.n) | (j < 0) | (j >= self.n)):
            raise ValueError("points must be interior grid nodes")
        if not np.allclose((i + 1) * self.h, x) or not np.allclose((j + 1) * self.h, y):
            raise ValueError("points must be grid nodes")
        return self.kernel[i, j]

    def kernel_row(self, i):
        """G(x_i, .) on the grid without forming the dense matrix."""
        e = np.zeros(self.n)
        e[i] = 1.0
        return self.apply(e) / self.h

    # -- fast operators ------------------------------------------------
    def apply(self, v):
        """u = W v along the last axis."""
        v = np.asarray(v, dtype=float)
        if self.spec.kind == "laplace":
            if v.ndim == 1:
                return linalg.solve_banded((1, 1), self._band, v)
            return linalg.solve_banded((1, 1), self._band, v.T).T
        return _sine(self.symbol * _sine(v))

    def apply_inverse(self, u):
        """The discrete operator P + q0 applied to u (inverse of ``apply``)."""
        u = np.asarray(u, dtype=float)
        if self.spec.kind == "laplace":
            h2 = self.h**2
            out = (2.0 / h2 + self.spec.q0) * u
            out[..., 1:] -= u[..., :-1] / h2
            out[..., :-1] -= u[..., 1:] / h2
            return out
        return _sine(_sine(u) / self.symbol)

    def solve_perturbed(self, q, f, *, method="auto", rtol=1e-12, maxiter=500):
        """Solve (P + q0 + diag q) u = f.

        ``method='auto'`` uses a banded solve for the Laplacian and conjugate
        gradients preconditioned by W for the fractional kind; ``'dense'``
        factorises the dense system directly.
        """
        q = check_finite_1d(q, name="q")
        f = check_finite_1d(f, name="f")
        if q.size != self.n or f.size != self.n:
            raise ValueError(f"q and f must have length n = {self.n}")
        if np.min(self.spec.q0 + q) < 0:
            raise AssertionError("q0 + q must be non-negative")
        if method == "dense":
            A = linalg.inv(self.matrix) if self.spec.kind != "laplace" else None
            if A is None:
                A = np.diag(self._band[1]) + np.diag(self._band[0, 1:], 1) + np.diag(self._band[2, :-1], -1)
            A = A + np.diag(q)
            return linalg.solve(A, f, assume_a="pos")
        if method != "auto":
            raise ValueError(f"unknown method {method!r}")
        if self.spec.kind == "laplace":
            ab = np.array(self._band)
            ab[1] += q
            return linalg.solve_banded((1, 1), ab, f)
        return self._pcg(q, f, rtol, maxiter)

    def _pcg(self, q, f, rtol, maxiter):
        fnorm = np.linalg.norm(f)
        if fnorm == 0:
            return np.zeros_like(f)
        u = self.apply(f)
        r = f - self.apply_inverse(u) - q * u
        z = self.apply(r)
        p = z.copy()
        rz = r @ z
        for _ in range(maxiter):
            if np.linalg.norm(r) <= rtol * fnorm:
                return u
            Ap = self.apply_inverse(p) + q * p
            alpha = rz / (p @ Ap)
            u += alpha * p
            r -= alpha * Ap
            z = self.apply(r)
            rz_new = r @ z
            p = z + (rz_new / rz) * p
            rz = rz_new
        if np.linalg.norm(r) <= rtol * fnorm:
            return u
        raise ConvergenceError(f"preconditioned CG did not reach rtol={rtol} in {maxiter} iterations")

    def operator_norm(self):
        """Largest singular value of W (the grid L2 operator norm)."""
        return float(np.max(np.abs(self.symbol)))


def build_green(spec: OperatorSpec) -> GreenMatrix:
    """Discrete Green operator G = (P + q0)^(-1) for ``spec``."""
    return GreenMatrix(spec)


def _as_green(obj):
    return obj if isinstance(obj, GreenMatrix) else build_green(obj)


def homogenized_solve(spec, f):
    """u0 = G f on the interior grid; ``f`` is a grid array or a callable of x."""
    gm = _as_green(spec)
    if callable(f):
        f = np.broadcast_to(np.asarray(f(gm.x), dtype=float), gm.x.shape)
    f = check_finite_1d(f, name="f")
    if f.size != gm.n:
        raise ValueError(f"f must have length n = {gm.n}")
    return gm.apply(f)


def singularity_diagnostic(gm: GreenMatrix, beta):
    """max over off-diagonal node pairs of |G(x, y)| |x - y|^(1 - beta)."""
    beta = float(beta)
    if not 0.0 < beta <= 1.0:
        raise ValueError("beta must lie in (0, 1]")
    gm = _as_green(gm)
    n, h = gm.n, gm.h
    best = 0.0
    K = gm.kernel
    for offset in range(1, n):
        band = np.abs(np.diagonal(K, offset))
        best = max(best, float(band.max()) * (offset * h) ** (1.0 - beta))
    return best


def lipschitz_diagnostic(gm: GreenMatrix):
    """max over y of max over adjacent nodes (boundary zeros included) of |dG/dx|."""
    gm = _as_green(gm)
    if gm.n < 32:
        raise ValueError("lipschitz_diagnostic needs n >= 32")
    padded = np.pad(gm.kernel, ((1, 1), (0, 0)))
    return float(np.max(np.abs(np.diff(padded, axis=0))) / gm.h)


def refinement_study(spec: OperatorSpec, ns, diagnostic, *args):
    """Values of ``diagnostic(build_green(spec.refined(n)), *args)`` for each n."""
    return np.array([diagnostic(build_green(spec.refined(int(n))), *args) for n in ns])


class GreenSolver(BaseEstimator):
    """Estimator-style homogenized solver: ``fit`` builds G, ``predict(f)`` returns u0."""

    def __init__(self, kind="laplace", q0=1.0, n=255, s=None, K=None):
        self.kind = kind
        self.q0 = q0
        self.n = n
        self.s = s
        self.K = K

    def fit(self, X=None, y=None):
        self.spec_ = OperatorSpec(self.kind, self.q0, self.n, self.s, self.K)
        self.green_ = build_green(self.spec_)
        self.x_ = self.green_.x
        return self

    def predict(self, f):
        check_is_fitted(self, "green_")
        f = np.asarray(f, dtype=float)
        if f.ndim == 2:
            return self.green_.apply(f)
        return homogenized_solve(self.green_, f)
