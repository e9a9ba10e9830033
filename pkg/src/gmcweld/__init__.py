"""Random conformal weldings from Gaussian multiplicative chaos."""

__version__ = "0.1.0"
