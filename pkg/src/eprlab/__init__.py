"""Two-station EPR simulations with local hidden-variable strategies."""

__version__ = "0.1.0"
