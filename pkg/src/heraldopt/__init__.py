"""Simulation and angle learning for nondeterministic photonic state
preparation with biased photon-number-resolving detectors."""

from .kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"

__all__ = ["KERNEL_BACKEND", "__version__"]
