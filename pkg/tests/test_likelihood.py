"""Portfolio log-likelihood: frozen oracles, vectorized-vs-scalar agreement,
and the part-caching decomposition used by the sampler."""

from __future__ import annotations

import math

import numpy as np
import pytest

from mortsurv import (
    CovariatePath,
    Dataset,
    LoanObservation,
    LoanStatus,
    LognormalBaseline,
    ModelParams,
    PortfolioLikelihood,
    RiskKind,
    loan_loglik,
    total_loglik,
)

from conftest import params_small


def _single_loan_dataset(status, time, x, p=4):
    path = CovariatePath.constant(np.asarray(x, dtype=float))
    loan = LoanObservation("a", status, time, path)
    return Dataset(loans=(loan,), schema=tuple(f"c{j}" for j in range(p)))


def test_defaulted_loan_frozen_oracle():
    # zero coefficients, standard lognormal baselines, t = 1:
    # loglik = log r(1) - 2 H0(1) = log(2/sqrt(2pi)) - 2 log 2 (mpmath oracle)
    params = ModelParams(
        baseline_default=LognormalBaseline(0.0, 1.0),
        baseline_prepay=LognormalBaseline(0.0, 1.0),
        theta_default=np.zeros(4),
        theta_prepay=np.zeros(4),
    )
    ds = _single_loan_dataset(LoanStatus.DEFAULTED, 1.0, [1.0, 0.5, -1.2, 0.3])
    assert loan_loglik(ds.loans[0], params) == pytest.approx(
        -1.6120857137646181, rel=1e-13)


def test_prepaid_loan_frozen_oracle():
    # mpmath 40-digit oracle with nonzero coefficients on both risks
    params = ModelParams(
        baseline_default=LognormalBaseline(2.817, 0.963**2),
        baseline_prepay=LognormalBaseline(1.578, 0.717**2),
        theta_default=np.array([-0.601, 0.395, 0.014, 0.124]),
        theta_prepay=np.array([0.128, 0.068, -0.051, 0.020]),
    )
    ds = _single_loan_dataset(LoanStatus.PREPAID, 3.5, [0.5, -1.2, 0.3, 2.0])
    assert loan_loglik(ds.loans[0], params) == pytest.approx(
        -1.9693733213819440, rel=1e-13)


def test_active_loan_is_joint_survival():
    from mortsurv import cumulative_hazard

    params = params_small(4)
    x = np.array([1.0, -0.4, 0.2, 0.9])
    path = CovariatePath.constant(x)
    loan = LoanObservation("a", LoanStatus.ACTIVE, 8.0, path)
    expected = -(cumulative_hazard(path, params.theta_default, params.baseline_default, 8.0)
                 + cumulative_hazard(path, params.theta_prepay, params.baseline_prepay, 8.0))
    assert loan_loglik(loan, params) == pytest.approx(expected, rel=1e-13)


def test_vectorized_total_equals_scalar_sum(bench_small):
    dataset, truth = bench_small
    like = PortfolioLikelihood(dataset)
    params = truth.params
    total = (like.risk_loglik(RiskKind.DEFAULT, params.theta_default, params.baseline_default)
             + like.risk_loglik(RiskKind.PREPAY, params.theta_prepay, params.baseline_prepay))
    scalar = sum(loan_loglik(loan, params) for loan in dataset.loans)
    assert total == pytest.approx(scalar, rel=1e-12)
    assert total_loglik(dataset, params) == pytest.approx(scalar, rel=1e-12)


def test_vectorized_matches_scalar_on_multi_interval_paths():
    rng = np.random.default_rng(5)
    params = params_small(3)
    loans = []
    for i in range(50):
        m = int(rng.integers(1, 5))
        times = np.sort(rng.uniform(0.2, 10.0, size=m))
        while np.any(np.diff(times) <= 0):
            times = np.sort(rng.uniform(0.2, 10.0, size=m))
        vals = rng.normal(size=(m, 3))
        path = CovariatePath(times, vals)
        status = [LoanStatus.DEFAULTED, LoanStatus.PREPAID, LoanStatus.ACTIVE][i % 3]
        t = float(rng.uniform(0.5, 12.0))
        loans.append(LoanObservation(f"L{i}", status, t, path))
    ds = Dataset(loans=tuple(loans), schema=("c0", "c1", "c2"))
    like = PortfolioLikelihood(ds)
    total = (like.risk_loglik(RiskKind.DEFAULT, params.theta_default, params.baseline_default)
             + like.risk_loglik(RiskKind.PREPAY, params.theta_prepay, params.baseline_prepay))
    scalar = sum(loan_loglik(loan, params) for loan in ds.loans)
    assert total == pytest.approx(scalar, rel=1e-11)


def test_parts_recombine_to_risk_loglik(bench_small):
    dataset, truth = bench_small
    like = PortfolioLikelihood(dataset)
    params = truth.params
    for risk, theta, base in [
        (RiskKind.DEFAULT, params.theta_default, params.baseline_default),
        (RiskKind.PREPAY, params.theta_prepay, params.baseline_prepay),
    ]:
        coef = like.coef_parts(risk, theta)
        basep = like.baseline_parts(risk, base)
        combined = PortfolioLikelihood.combine(coef, basep)
        assert combined == like.risk_loglik(risk, theta, base)


def test_part_swap_updates_only_its_factor(bench_small):
    # changing theta must not ripple through cached baseline parts, and vice versa
    dataset, truth = bench_small
    like = PortfolioLikelihood(dataset)
    params = truth.params
    theta2 = params.theta_default + 0.25
    base2 = LognormalBaseline(params.baseline_default.mu + 0.3,
                              params.baseline_default.sigma2)
    basep = like.baseline_parts(RiskKind.DEFAULT, params.baseline_default)
    coef2 = like.coef_parts(RiskKind.DEFAULT, theta2)
    assert PortfolioLikelihood.combine(coef2, basep) == pytest.approx(
        like.risk_loglik(RiskKind.DEFAULT, theta2, params.baseline_default), rel=0)
    coef = like.coef_parts(RiskKind.DEFAULT, params.theta_default)
    basep2 = like.baseline_parts(RiskKind.DEFAULT, base2)
    assert PortfolioLikelihood.combine(coef, basep2) == pytest.approx(
        like.risk_loglik(RiskKind.DEFAULT, params.theta_default, base2), rel=0)


def test_empty_dataset_loglik_is_zero():
    ds = Dataset(loans=(), schema=("c0",))
    params = ModelParams(
        baseline_default=LognormalBaseline(1.0, 1.0),
        baseline_prepay=LognormalBaseline(1.0, 1.0),
        theta_default=np.zeros(1),
        theta_prepay=np.zeros(1),
    )
    assert total_loglik(ds, params) == 0.0


def test_overflowing_coefficients_give_minus_inf_not_nan():
    params = params_small(4)
    huge = ModelParams(
        baseline_default=params.baseline_default,
        baseline_prepay=params.baseline_prepay,
        theta_default=np.array([800.0, 0.0, 0.0, 0.0]),
        theta_prepay=params.theta_prepay,
    )
    ds = _single_loan_dataset(LoanStatus.DEFAULTED, 3.5, [1.0, 0.5, -1.2, 0.3])
    like = PortfolioLikelihood(ds)
    val = like.risk_loglik(RiskKind.DEFAULT, huge.theta_default, huge.baseline_default)
    assert val == -math.inf
    assert not math.isnan(val)


def test_loglik_decreases_when_hazard_inflated(bench_small):
    # raising every coefficient inflates cumulative hazard; survival terms must drop
    dataset, truth = bench_small
    params = truth.params
    bigger = ModelParams(
        baseline_default=params.baseline_default,
        baseline_prepay=params.baseline_prepay,
        theta_default=params.theta_default + 3.0,
        theta_prepay=params.theta_prepay + 3.0,
    )
    assert total_loglik(dataset, bigger) < total_loglik(dataset, params)


def test_event_times_accessor_matches_dataset(bench_small):
    dataset, _ = bench_small
    like = PortfolioLikelihood(dataset)
    want = sorted(l.time for l in dataset.loans if l.status is LoanStatus.DEFAULTED)
    got = sorted(like.event_times(RiskKind.DEFAULT).tolist())
    assert got == pytest.approx(want)


def test_schema_mismatch_rejected(bench_small):
    dataset, truth = bench_small
    like = PortfolioLikelihood(dataset)
    short = np.zeros(2)
    with pytest.raises(ValueError):
        like.risk_loglik(RiskKind.DEFAULT, short, truth.params.baseline_default)
