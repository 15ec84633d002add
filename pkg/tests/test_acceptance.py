"""Acceptance suite: one test group per criterion, run at the stated tolerances.

Each sub-check is recorded with the ``criterion`` fixture; the terminal
summary prints one PASS/FAIL line per criterion. Cases known to fall short
are marked strict xfail with the reason, so the verdict stays visible and an
unexpected pass is reported.
"""

import math
import time

import numpy as np
import pytest

from lrdhomog.experiments import run_experiment, run_rate_experiment
from lrdhomog.hermite_chaos import gauss_hermite_rule, hermite_poly
from lrdhomog.lrd_gaussian import fbm_covariance, fgn_covariance, sample_fbm_path, sample_fgn_path
from lrdhomog.rng import replicate_stream


def record_verdicts(criterion, number, table, label):
    for v in table.verdicts:
        criterion(number, f"{label}/{v.name}", v.passed, v.line())
    return table.passed


def record_runtime(criterion, number, label, seconds, budget):
    criterion(number, f"{label}/runtime", seconds < budget, f"{seconds:.1f} s (budget {budget} s)")


class TestCriterion1Orthogonality:
    def test_hermite_orthogonality(self, criterion):
        start = time.perf_counter()
        x, w = gauss_hermite_rule(32)
        H = np.array([hermite_poly(q, x) for q in range(9)])
        gram = (H * w) @ H.T
        exact = np.diag([float(math.factorial(q)) for q in range(9)])
        # relative to q! on the diagonal and to the row scale sqrt(p! q!) off it
        scale = np.sqrt(np.outer(np.diag(exact), np.diag(exact)))
        err = float(np.max(np.abs(gram - exact) / scale))
        seconds = time.perf_counter() - start
        print(f"max relative Gram error {err:.2e}")
        ok = criterion(1, "gram_p_q_le_8", err < 1e-10, f"max rel err {err:.2e}")
        record_runtime(criterion, 1, "orthogonality", seconds, 1)
        assert ok and seconds < 1


SUBGRID = np.arange(0, 1025, 64)


def _covariance_z(paths, idx, exact):
    """z-scores of the empirical E[X_i X_j] against ``exact`` on the index pairs of idx."""
    sub = paths[:, idx]
    N = sub.shape[0]
    zs = []
    for a in range(idx.size):
        prod = sub[:, a : a + 1] * sub[:, a:]
        mean = prod.mean(axis=0)
        se = prod.std(axis=0, ddof=1) / math.sqrt(N)
        zs.append((mean - exact[a, a:]) / se)
    return np.concatenate(zs)


class TestCriterion2ExactLaw:
    N = 10_000
    n = 2**10

    @pytest.mark.parametrize("H0", [0.5, 0.7, 0.9])
    def test_fbm_covariance(self, criterion, H0):
        start = time.perf_counter()
        dx = 1.0 / self.n
        paths = np.stack([sample_fbm_path(H0, self.n, dx, replicate_stream(1, f"accept2/fbm/{H0}", r)).values for r in range(self.N)])
        idx = SUBGRID[1:]
        t = idx * dx
        exact = fbm_covariance(H0, t[:, None], t[None, :])
        z = np.max(np.abs(_covariance_z(paths, idx, exact)))
        seconds = time.perf_counter() - start
        print(f"fBm H0={H0}: max |z| {z:.2f} over {idx.size * (idx.size + 1) // 2} pairs, {seconds:.1f} s")
        ok = criterion(2, f"fbm_H0={H0}", z < 4, f"max |z| {z:.2f}")
        record_runtime(criterion, 2, f"fbm_H0={H0}", seconds, 60)
        assert ok

    @pytest.mark.parametrize("H0", [0.5, 0.7, 0.9])
    def test_fgn_covariance(self, criterion, H0):
        start = time.perf_counter()
        paths = np.stack([sample_fgn_path(H0, self.n, 1.0, replicate_stream(1, f"accept2/fgn/{H0}", r)).values for r in range(self.N)])
        idx = SUBGRID
        exact = fgn_covariance(H0, np.abs(idx[:, None] - idx[None, :]))
        z = np.max(np.abs(_covariance_z(paths, idx, exact)))
        seconds = time.perf_counter() - start
        print(f"fGn H0={H0}: max |z| {z:.2f} over {idx.size * (idx.size + 1) // 2} pairs, {seconds:.1f} s")
        ok = criterion(2, f"fgn_H0={H0}", z < 4, f"max |z| {z:.2f}")
        record_runtime(criterion, 2, f"fgn_H0={H0}", seconds, 60)
        assert ok


class TestCriterion3Autocovariance:
    @pytest.mark.parametrize("name", ["autocov_sin", "autocov_cos"])
    def test_autocov(self, config, criterion, name):
        table = run_experiment(config(name), threads=4)
        print(table.extra, [v.line() for v in table.verdicts])
        ok = record_verdicts(criterion, 3, table, name)
        record_runtime(criterion, 3, name, table.metadata["wall_time"], 120)
        assert ok


SINGULAR_REASON = (
    "exponent gap 2m(1-H0) - 2 beta = 0.1 leaves a relative eps^0.1 correction; "
    "the fitted slope over eps = 2^-4..2^-9 sits near 0.6, outside 0.8 +- 0.15"
)


class TestCriterion4RateRegimes:
    @pytest.mark.parametrize(
        "name",
        [
            "rate_laplace",
            "rate_fractional_lrd",
            pytest.param("rate_fractional_singular", marks=pytest.mark.xfail(strict=True, reason=SINGULAR_REASON)),
        ],
    )
    def test_rate(self, config, criterion, name):
        cfg = config(name)
        table = run_experiment(cfg, threads=4)
        print(f"{name}: slope {table.extra['slope']:.4f} +- {table.extra['stderr']:.4f}, expected {table.extra['expected']}")
        ok = record_verdicts(criterion, 4, table, name)
        record_runtime(criterion, 4, name, table.metadata["wall_time"], 300)
        assert ok


class TestCriterion5Taqqu:
    @pytest.mark.parametrize("name", ["hermite_m1", "hermite_m2"])
    def test_taqqu_normalization(self, config, criterion, name):
        table = run_experiment(config(name), threads=4)
        for row in table.rows:
            print(row["statistic"], row["params"].get("T"), f"{row['value']:.4f} +- {row['stderr']:.4f}")
        ok = record_verdicts(criterion, 5, table, name)
        record_runtime(criterion, 5, name, table.metadata["wall_time"], 300)
        assert ok


ISOMETRY_M2_REASON = (
    "Rosenblatt integrals have heavy tails; at N = 1e4 the variance standard error "
    "is 3 to 4 percent, so a 5 percent band is exceeded for some integrands"
)


class TestCriterion6Isometry:
    @pytest.mark.parametrize(
        "name",
        ["isometry_m1", pytest.param("isometry_m2", marks=pytest.mark.xfail(strict=True, reason=ISOMETRY_M2_REASON))],
    )
    def test_isometry(self, config, criterion, name):
        table = run_experiment(config(name), threads=4)
        for row in table.rows:
            if row["statistic"] == "ratio":
                print(name, row["params"]["integrand"], f"ratio {row['value']:.4f} +- {row['stderr']:.4f}")
        ok = record_verdicts(criterion, 6, table, name)
        record_runtime(criterion, 6, name, table.metadata["wall_time"], 150)
        assert ok


class TestCriterion7NonCentralLimit:
    def test_fluctuation_law(self, config, criterion):
        table = run_experiment(config("fluct"), threads=4)
        for name in ("ks_statistic", "ks_threshold", "variance_ratio", "isometry_theory", "isometry_mc", "energy_distance"):
            print(name, f"{table.value(name):.5f}")
        ok = record_verdicts(criterion, 7, table, "fluct")
        record_runtime(criterion, 7, "fluct", table.metadata["wall_time"], 1200)
        assert ok


class TestCriterion8Decomposition:
    def test_remainders_vanish(self, config, criterion):
        eps = tuple(2.0 ** -np.arange(4, 9))
        cfg = config("rate_laplace", eps=eps, replicates=200)
        table = run_rate_experiment(cfg, threads=4, decompose=True)
        residual = max(table.value("max_identity_residual", eps=e) for e in eps)
        ok = criterion(8, "identity_residual", residual < 1e-8, f"max {residual:.2e}")
        ratios = {}
        for e in (eps[0], eps[-1]):
            I = table.value("mean_norm_I", eps=e)
            ratios[e] = (table.value("mean_norm_Q", eps=e) / I, table.value("mean_norm_r", eps=e) / I)
            print(f"eps={e}: Q/I {ratios[e][0]:.4f}, r/I {ratios[e][1]:.4f}")
        for j, name in enumerate(("Q_over_I", "r_over_I")):
            a, b = ratios[eps[0]][j], ratios[eps[-1]][j]
            ok &= criterion(8, name, b < a, f"{a:.4f} at 2^-4 -> {b:.4f} at 2^-8")
        record_runtime(criterion, 8, "decomposition", table.metadata["wall_time"], 600)
        assert ok


REDUCED = {
    "rate_laplace": dict(operator={"kind": "laplace", "q0": 1.0, "n": 511}, eps=tuple(2.0 ** -np.arange(3, 7)), replicates=70),
    "rate_fractional_lrd": dict(
        operator={"kind": "spectral_fractional", "q0": 1.0, "n": 255, "s": 0.2}, eps=tuple(2.0 ** -np.arange(2, 6)), replicates=70
    ),
    "fluct": dict(operator={"kind": "laplace", "q0": 1.0, "n": 255}, eps=(2.0**-5,), replicates=70, oracle_replicates=70, T=(2**12,)),
    "autocov_cos": dict(replicates=70, lags=(4, 8, 16, 32, 64)),
    "hermite_m2": dict(replicates=70, T=(2**10, 2**11)),
    "isometry_m1": dict(replicates=70, T=(2**10,)),
}


class TestCriterion9Determinism:
    @pytest.mark.parametrize("name", list(REDUCED))
    def test_rerun_and_threads(self, config, criterion, name):
        cfg = config(name, **REDUCED[name])
        a = run_experiment(cfg, threads=1)
        b = run_experiment(cfg, threads=3)
        c = run_experiment(cfg, threads=1)
        same = a.same_rows(b, atol=1e-12) and a.same_rows(c, atol=1e-12)
        print(f"{name}: {len(a.rows)} rows, identical across reruns and thread counts: {same}")
        assert criterion(9, name, same, f"{len(a.rows)} rows")
