"""Exact evaluation of strong coordination over noisy channels.

Submodules: ``probcore`` (finite joint and conditional pmfs), ``channel``
(sources, channels, codes), ``binning`` (random binning and SW decoding),
``scheme`` (the two-binning coding scheme), ``region`` (inner and outer
region membership), ``converse`` (information-inequality audits) and ``cli``.
"""
from .probcore import CapacityError, CondPmf, JointPmf, StructuralError

__all__ = ["CapacityError", "CondPmf", "JointPmf", "StructuralError"]
__version__ = "0.1.0"
