"""Kernel autocovariance operator estimators and certification experiments."""

from ._kacov import (
    Kernel,
    KacovError,
    Operator,
    bosq_bound,
    empirical_autocov,
    exact_autocov,
    gamma_spectrum,
    kedmd,
    kpca,
    lil_norm_bound,
    rate_fit,
    run_experiment,
    simulate_markov,
    stationary_distribution,
)

__all__ = [
    "Kernel",
    "KacovError",
    "Operator",
    "bosq_bound",
    "empirical_autocov",
    "exact_autocov",
    "gamma_spectrum",
    "kedmd",
    "kpca",
    "lil_norm_bound",
    "rate_fit",
    "run_experiment",
    "simulate_markov",
    "stationary_distribution",
]
