"""Control-pulse synthesis for unitary gates by Newton-Raphson root finding."""
__version__ = "0.1.0"
