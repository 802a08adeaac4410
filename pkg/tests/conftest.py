"""Shared builders for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from mortsurv import (
    BenchmarkConfig,
    CovariatePath,
    LognormalBaseline,
    ModelParams,
    PosteriorSamples,
    make_benchmark,
)


def params_small(p: int = 4) -> ModelParams:
    """Fixed parameters with realistic baselines and mild covariate effects."""
    theta_d = np.array([-0.8, 0.5, -0.3, 0.2, 0.4, -0.6][:p])
    theta_p = np.array([0.3, -0.2, 0.4, 0.1, -0.5, 0.2][:p])
    return ModelParams(
        baseline_default=LognormalBaseline(2.817, 0.963**2),
        baseline_prepay=LognormalBaseline(1.578, 0.717**2),
        theta_default=theta_d,
        theta_prepay=theta_p,
    )


def samples_at(params: ModelParams, n_draws: int = 6, n_chains: int = 2,
               jitter: float = 0.0, seed: int = 0,
               schema: tuple[str, ...] | None = None) -> PosteriorSamples:
    """Posterior container holding n_draws copies of params, optionally jittered.

    With jitter 0 every predictive quantity collapses to its single-parameter
    counterpart, which gives exact reference values.
    """
    p = params.theta_default.size
    if schema is None:
        schema = tuple(f"c{j}" for j in range(p))
    assert len(schema) == p
    rng = np.random.default_rng(seed)

    def col(value, scale=1.0):
        base = np.full(n_draws, float(value))
        if jitter:
            base = base + scale * jitter * rng.standard_normal(n_draws)
        return base

    def mat(vec):
        base = np.tile(np.asarray(vec, dtype=float), (n_draws, 1))
        if jitter:
            base = base + jitter * rng.standard_normal(base.shape)
        return base

    per = n_draws // n_chains
    chain = np.repeat(np.arange(n_chains), per)
    if chain.size < n_draws:
        chain = np.concatenate([chain, np.full(n_draws - chain.size, n_chains - 1)])
    return PosteriorSamples(
        schema=schema,
        n_chains=n_chains,
        chain=chain,
        iteration=np.arange(1, n_draws + 1),
        mu_default=col(params.baseline_default.mu),
        sigma2_default=np.abs(col(params.baseline_default.sigma2, 0.1)),
        mu_prepay=col(params.baseline_prepay.mu),
        sigma2_prepay=np.abs(col(params.baseline_prepay.sigma2, 0.1)),
        theta_default=mat(params.theta_default),
        theta_prepay=mat(params.theta_prepay),
        acceptance={},
        final_scales={},
    )


@pytest.fixture(scope="session")
def bench_small():
    """Small synthetic portfolio with known truth (200 loans, 4 columns)."""
    params = params_small(4)
    # n_covariates counts the non-intercept columns (x1, x2, ind)
    config = BenchmarkConfig(n_loans=200, true_params=params, n_covariates=3, seed=11)
    dataset, truth = make_benchmark(config)
    return dataset, truth


@pytest.fixture()
def two_interval_path():
    return CovariatePath(
        obs_times=np.array([1.0, 3.0]),
        values=np.array([[1.0, 0.5, -1.2], [1.0, 0.8, 0.3]]),
    )
