"""Seeded Monte Carlo experiments producing :class:`ResultTable` objects."""

from __future__ import annotations

import math
import time

import numpy as np

from . import __version__
from .config import ExperimentConfig, config_hash
from .green_operator import build_green
from .hermite_chaos import autocov_decay_fit
from .hermite_limit import (
    LambdaIntegrand,
    hermite_path_values,
    lambda_norm_sq,
    limit_integrand,
    limit_sampler,
    lipschitz_hypothesis,
)
from .parallel import map_replicates
from .random_solver import decompose_fluctuation, solve_perturbed
from .results import ResultTable, within
from .rng import replicate_stream
from .stats import energy_distance, fit_loglog_slope, ks_statistic, mean_with_stderr, self_ks_threshold, skewness

__all__ = [
    "run_experiment",
    "run_rate_experiment",
    "run_fluctuation_experiment",
    "run_autocov_experiment",
    "run_hermite_var_experiment",
    "run_isometry_experiment",
    "rate_regime",
]

RATE_TOL = 0.15
AUTOCOV_TOL = 0.1
ISOMETRY_TOL = 0.05
KS_FACTOR = 1.5
VAR_RATIO_BOUNDS = (0.8, 1.25)
TAQQU_VAR_BOUNDS = (0.85, 1.15)
SKEW_GAUSSIAN_MAX = 0.1
SKEW_ROSENBLATT_MIN = 0.3
MC_Z = 4.0


def _table(cfg: ExperimentConfig, threads):
    return ResultTable(
        cfg.kind,
        metadata={"config_hash": config_hash(cfg), "seed": cfg.seed, "code_version": __version__, "threads": threads, "name": cfg.name},
    )


def _finish(table, start):
    table.metadata["wall_time"] = time.perf_counter() - start
    return table


def _case(cfg):
    return {"H0": cfg.H0, "m": cfg.m, "operator": cfg.operator, "potential": cfg.potential}


def rate_regime(m, H0, beta):
    """Expected exponent of E||u_eps - u0||^2 and the regime label."""
    a = 2.0 * m * (1.0 - H0)
    b = 2.0 * beta
    if math.isclose(a, b, rel_tol=1e-12):
        return b, "boundary (log-corrected)"
    return (a, "long-range") if a < b else (b, "singular")


def run_rate_experiment(cfg: ExperimentConfig, threads=1, *, decompose=False):
    """Monte Carlo E||u_eps - u0||^2 per eps and its log-log slope against eps."""
    if cfg.kind != "rate":
        raise ValueError("run_rate_experiment needs kind = 'rate'")
    start = time.perf_counter()
    gm = build_green(cfg.operator_spec())
    pot = cfg.potential_spec()
    L = cfg.slow_vary()
    f = np.full(gm.n, cfg.f)
    u0 = gm.apply(f)
    table = _table(cfg, threads)
    case = _case(cfg)
    means = []
    for k, eps in enumerate(cfg.eps):
        label = f"rate/eps{k}"

        def one(r, eps=eps, label=label):
            s = solve_perturbed(gm, pot, eps, f, replicate_stream(cfg.seed, label, r), H0=cfg.H0, L=L, u0=u0)
            out = [s.error_norm_sq] + [s.at(p) for p in cfg.probes]
            if decompose:
                d = decompose_fluctuation(s, gm)
                out += [*d.norms(gm.h), d.residual]
            return out

        res = np.asarray(map_replicates(one, cfg.replicates, threads))
        mean, err = mean_with_stderr(res[:, 0])
        means.append(mean)
        table.add("mean_error_norm_sq", mean, err, eps=eps, **case)
        for j, p in enumerate(cfg.probes):
            vals = res[:, 1 + j]
            table.add("var_normalized", vals.var(ddof=1), np.nan, eps=eps, probe=p)
        if decompose:
            base = 1 + len(cfg.probes)
            for j, name in enumerate(("I", "Q", "r")):
                mu, se = mean_with_stderr(res[:, base + j])
                table.add(f"mean_norm_{name}", mu, se, eps=eps)
            table.add("max_identity_residual", res[:, base + 3].max(), np.nan, eps=eps)
    slope, stderr = fit_loglog_slope(cfg.eps, means)
    expected, regime = rate_regime(cfg.m, cfg.H0, gm.spec.beta)
    table.add("slope", slope, stderr, **case)
    table.add("expected_slope", expected, 0.0, **case)
    tol = RATE_TOL if cfg.tolerance is None else cfg.tolerance
    table.verdict(within("rate_slope", slope, expected - tol, expected + tol, note=regime))
    table.extra.update(slope=slope, stderr=stderr, expected=expected, regime=regime)
    return _finish(table, start)


def run_fluctuation_experiment(cfg: ExperimentConfig, threads=1):
    """Distribution of normalized(x_probe) at the smallest eps against the limit law."""
    if cfg.kind != "fluctuation-dist":
        raise ValueError("run_fluctuation_experiment needs kind = 'fluctuation-dist'")
    start = time.perf_counter()
    spec = cfg.operator_spec()
    if not lipschitz_hypothesis(spec):
        raise ValueError("Lipschitz diagnostic failed; the limit theorem does not apply")
    gm = build_green(spec)
    pot = cfg.potential_spec()
    L = cfg.slow_vary()
    f = np.full(gm.n, cfg.f)
    u0 = gm.apply(f)
    eps = cfg.eps[-1]
    probe = cfg.probes[0]
    N = cfg.replicates
    table = _table(cfg, threads)

    def one(r):
        s = solve_perturbed(gm, pot, eps, f, replicate_stream(cfg.seed, "fluct/solver", r), H0=cfg.H0, L=L, u0=u0)
        return s.at(probe)

    samples = np.asarray(map_replicates(one, N, threads))
    n_oracle = max(N, cfg.oracle_replicates)
    T = cfg.T[-1]
    oracle_all = limit_sampler(gm, u0, pot.chaos, cfg.m, cfg.H0, probe, n_oracle, cfg.seed, T=T, threads=threads, label="fluct/oracle")
    oracle = oracle_all[:N]

    ks = ks_statistic(samples, oracle)
    threshold, self_ks = self_ks_threshold(oracle, factor=KS_FACTOR, seed=cfg.seed)
    var_s, var_o = samples.var(ddof=1), oracle.var(ddof=1)
    ratio = var_s / var_o if var_o > 0 else (1.0 if var_s == 0 else np.inf)
    norm_sq = lambda_norm_sq(limit_integrand(gm, u0, probe), 1.0 + cfg.m * (cfg.H0 - 1.0))
    iso_theory = pot.chaos.leading**2 * norm_sq
    iso_mc = oracle_all.var(ddof=1)

    params = {"eps": eps, "probe": probe, "H0": cfg.H0, "m": cfg.m}
    table.add("ks_statistic", ks, np.nan, **params)
    table.add("ks_threshold", threshold, np.nan, **params)
    table.add("oracle_self_ks", self_ks, np.nan, **params)
    table.add("energy_distance", energy_distance(samples, oracle), np.nan, **params)
    table.add("var_normalized", var_s, np.nan, **params)
    table.add("var_limit", var_o, np.nan, **params)
    table.add("variance_ratio", ratio, np.nan, **params)
    table.add("mean_normalized", *mean_with_stderr(samples), **params)
    table.add("mean_limit", *mean_with_stderr(oracle_all), **params)
    table.add("isometry_theory", iso_theory, np.nan, **params)
    table.add("isometry_mc", iso_mc, np.nan, n_oracle=n_oracle, **params)

    table.verdict(within("ks_statistic", ks, None, threshold, note=f"{KS_FACTOR} x oracle self-KS {self_ks:.4g}"))
    table.verdict(within("variance_ratio", ratio, *VAR_RATIO_BOUNDS))
    if iso_theory > 0:
        rel = iso_mc / iso_theory
        table.verdict(within("limit_isometry_ratio", rel, 1 - ISOMETRY_TOL, 1 + ISOMETRY_TOL))
    table.extra.update(samples=samples, oracle=oracle)
    return _finish(table, start)


def run_autocov_experiment(cfg: ExperimentConfig, threads=1):
    """Empirical covariance of q = Phi(g) at log-spaced lags, theory curve and decay slope."""
    if cfg.kind != "autocov":
        raise ValueError("run_autocov_experiment needs kind = 'autocov'")
    start = time.perf_counter()
    pot = cfg.potential_spec()
    fit = autocov_decay_fit(pot, cfg.H0, cfg.lags, cfg.replicates, seed=cfg.seed, path_length=cfg.path_length, threads=threads)
    table = _table(cfg, threads)
    for lag, e, s, t in zip(fit.lags, fit.empirical, fit.mc_error, fit.theory):
        table.add("empirical_autocov", e, s, lag=int(lag))
        table.add("theory_autocov", t, 0.0, lag=int(lag))
    table.add("slope", fit.slope, fit.stderr, H0=cfg.H0, m=cfg.m)
    table.add("expected_slope", fit.expected_slope, 0.0, H0=cfg.H0, m=cfg.m)
    table.add("max_z", fit.max_z, np.nan)
    tol = AUTOCOV_TOL if cfg.tolerance is None else cfg.tolerance
    table.verdict(within("decay_slope", fit.slope, fit.expected_slope - tol, fit.expected_slope + tol))
    table.verdict(within("theory_vs_mc_max_z", fit.max_z, None, MC_Z))
    table.extra.update(slope=fit.slope, stderr=fit.stderr, expected=fit.expected_slope)
    return _finish(table, start)


def _taqqu_values(cfg, T, label, threads, n_grid):
    def one(r):
        return hermite_path_values(cfg.m, cfg.H0, T, n_grid, cfg.delta, replicate_stream(cfg.seed, label, r))

    return np.asarray(map_replicates(one, cfg.replicates, threads))


def _variance_stderr(x):
    x = np.asarray(x, dtype=float)
    c = x - x.mean()
    v = c.var(ddof=1)
    return v, math.sqrt(max(np.mean(c**4) - v * v, 0.0) / x.size)


def run_hermite_var_experiment(cfg: ExperimentConfig, threads=1):
    """Var(Y_T(1)) and skewness across the configured Taqqu horizons."""
    if cfg.kind != "hermite-var":
        raise ValueError("run_hermite_var_experiment needs kind = 'hermite-var'")
    start = time.perf_counter()
    table = _table(cfg, threads)
    for T in cfg.T:
        end = _taqqu_values(cfg, T, f"hermite/T{T}", threads, cfg.hermite_grid)[:, -1]
        v, se = _variance_stderr(end)
        table.add("var_Y1", v, se, T=T, m=cfg.m, H0=cfg.H0)
        table.add("skewness_Y1", skewness(end), math.sqrt(6.0 / end.size), T=T, m=cfg.m, H0=cfg.H0)
        table.add("mean_Y1", *mean_with_stderr(end), T=T, m=cfg.m, H0=cfg.H0)
    T = cfg.T[-1]
    v = table.value("var_Y1", T=T)
    sk = table.value("skewness_Y1", T=T)
    table.verdict(within("var_Y1", v, *TAQQU_VAR_BOUNDS, note=f"T={T}"))
    if cfg.m == 1:
        table.verdict(within("abs_skewness", abs(sk), None, SKEW_GAUSSIAN_MAX, note="Gaussian limit"))
    else:
        table.verdict(within("abs_skewness", abs(sk), SKEW_ROSENBLATT_MIN, None, note="non-Gaussian limit"))
    return _finish(table, start)


def _integrands(cfg):
    if cfg.integrands:
        return [(f"step{i}", LambdaIntegrand.step(d["breaks"], d["values"])) for i, d in enumerate(cfg.integrands)]
    return [("indicator_0_1", LambdaIntegrand.indicator(0.0, 1.0))]


def run_isometry_experiment(cfg: ExperimentConfig, threads=1):
    """Monte Carlo variance of int f dZ against the Lambda^H norm for each integrand."""
    if cfg.kind != "isometry":
        raise ValueError("run_isometry_experiment needs kind = 'isometry'")
    start = time.perf_counter()
    table = _table(cfg, threads)
    H = 1.0 + cfg.m * (cfg.H0 - 1.0)
    T = cfg.T[-1]
    fs = _integrands(cfg)
    t = np.arange(cfg.hermite_grid) / cfg.hermite_grid
    weights = np.stack([f(t) for _, f in fs])

    def one(r):
        z = hermite_path_values(cfg.m, cfg.H0, T, cfg.hermite_grid, cfg.delta, replicate_stream(cfg.seed, "isometry", r))
        return weights @ np.diff(z)

    vals = np.asarray(map_replicates(one, cfg.replicates, threads))
    tol = ISOMETRY_TOL if cfg.tolerance is None else cfg.tolerance
    for j, (name, f) in enumerate(fs):
        theory = lambda_norm_sq(f, H)
        v, se = _variance_stderr(vals[:, j])
        table.add("var_integral", v, se, integrand=name, m=cfg.m, H0=cfg.H0, T=T)
        table.add("lambda_norm_sq", theory, 0.0, integrand=name, m=cfg.m, H0=cfg.H0)
        table.add("ratio", v / theory, se / theory, integrand=name, m=cfg.m, H0=cfg.H0)
        table.verdict(within(f"isometry_{name}", v / theory, 1 - tol, 1 + tol, note=f"m={cfg.m}"))
    return _finish(table, start)


RUNNERS = {
    "rate": run_rate_experiment,
    "fluctuation-dist": run_fluctuation_experiment,
    "autocov": run_autocov_experiment,
    "hermite-var": run_hermite_var_experiment,
    "isometry": run_isometry_experiment,
}


def run_experiment(cfg: ExperimentConfig, threads=1):
    return RUNNERS[cfg.kind](cfg, threads)
