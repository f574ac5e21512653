"""Stable differentiable causal discovery toolkit.

Core pieces: an acyclicity-constraint family with analytic gradients, a
warm-started spectral-radius constraint, a masked conditional-Gaussian
model trained in two stages, a synthetic intervention simulator, and
structure-recovery metrics. A FastAPI service (sdcd.service) and a CLI
(sdcd.cli) wrap the package for end-to-end runs.
"""

__version__ = "0.1.0"
