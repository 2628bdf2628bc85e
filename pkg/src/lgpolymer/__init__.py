"""Log-gamma polymers: partition functions, geometric RSK, Whittaker
integrals, Laplace-transform contours, limit laws and Monte Carlo harness."""

__version__ = "0.1.0"
