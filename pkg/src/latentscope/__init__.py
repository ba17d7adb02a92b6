"""latentscope: latent-space analytics for multivariate time-series events."""

__version__ = "0.1.0"
