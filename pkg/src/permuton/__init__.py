"""Permuton densities, Baxter permutation sampling, cone-exit Monte Carlo,
and skew Brownian permuton simulation."""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    AccuracyError,
    CapabilityError,
    InputError,
    PermutonError,
    VerificationError,
)
