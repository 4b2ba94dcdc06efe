"""Long-horizon stochastic optimal control via operator eigensystems."""

__version__ = "0.1.0"
