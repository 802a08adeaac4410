"""Baseline hazards, closed-form integration, and one loan's log-likelihood.

The event-time model for each risk is a lognormal-shaped hazard scaled by
exp(theta . x(t)).  Everything downstream rests on two facts shown here:
the integrated baseline has a closed form, and a loan's log-likelihood is
its event term minus both risks' cumulative hazards.
"""

from __future__ import annotations

import numpy as np

from mortsurv import (
    CovariatePath,
    LoanObservation,
    LoanStatus,
    LognormalBaseline,
    ModelParams,
    baseline_cumhaz,
    cumulative_hazard,
    loan_loglik,
    lognormal_hazard,
)

default_base = LognormalBaseline(mu=2.817, sigma2=0.963**2)
prepay_base = LognormalBaseline(mu=1.578, sigma2=0.717**2)

print("hazard rates are non-monotone: rise, peak, slow decay")
print(f"{'years':>6} {'default rate':>14} {'prepay rate':>12}")
for t in (0.5, 2.0, 5.0, 10.0, 20.0, 30.0):
    rd = float(lognormal_hazard(t, default_base))
    rp = float(lognormal_hazard(t, prepay_base))
    print(f"{t:>6.1f} {rd:>14.4f} {rp:>12.4f}")

print()
print("integrated baseline hazard over [0, t], closed form (no quadrature):")
for t in (1.0, 5.0, 30.0):
    print(f"  H_default(0, {t:>4}) = {baseline_cumhaz(0.0, t, default_base):.6f}")

# one loan whose covariates moved once: refinancing pressure rose at year 2
params = ModelParams(
    baseline_default=default_base,
    baseline_prepay=prepay_base,
    theta_default=np.array([-0.8, 0.5]),
    theta_prepay=np.array([0.3, -0.2]),
)
path = CovariatePath(obs_times=[1.0, 3.0], values=[[1.0, -0.4], [1.0, 1.1]])
loan = LoanObservation(
    loan_id="DEMO-1", status=LoanStatus.PREPAID, time=4.2,
    covariates=path, maturity=30.0,
)

print()
print("loan DEMO-1 prepaid at 4.2y with a covariate shift at the midpoint 2.0")
for label, theta, base in (
    ("default", params.theta_default, params.baseline_default),
    ("prepay", params.theta_prepay, params.baseline_prepay),
):
    lam = cumulative_hazard(path, theta, base, loan.time)
    print(f"  cumulative {label} hazard at 4.2y: {lam:.6f}")
print(f"  log-likelihood contribution: {loan_loglik(loan, params):.6f}")
