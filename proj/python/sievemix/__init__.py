"""Sieve maximum likelihood for finite location-scale mixtures."""

from ._sievemix import (
    Component,
    Envelope,
    Family,
    FitResult,
    Mixture,
    NumericalError,
    Schedule,
    ValidationError,
    __version__,
    bound_constants,
    consistency_medians,
    fit,
    kl_margin,
    l1_distance,
    log_likelihood,
    margin_scan,
    okamoto_bound,
    param_set_distance,
    sample,
    sieve_floor,
)

__all__ = [
    "Component",
    "Envelope",
    "Family",
    "FitResult",
    "Mixture",
    "NumericalError",
    "Schedule",
    "ValidationError",
    "bound_constants",
    "consistency_medians",
    "fit",
    "kl_margin",
    "l1_distance",
    "log_likelihood",
    "margin_scan",
    "okamoto_bound",
    "param_set_distance",
    "sample",
    "sieve_floor",
]
