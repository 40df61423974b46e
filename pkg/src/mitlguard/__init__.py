"""Attack-aware MITL controller synthesis on durational stochastic games."""

__version__ = "0.1.0"
