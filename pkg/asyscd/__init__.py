# Asynchronous stochastic coordinate descent for convex quadratics
__version__ = "0.1.0"
