"""Numerical toolkit for heavy-tailed Markov kernels.

Modules: kernels (stable profiles), harnack (certificates), concentration
(tail masses and bounds), maximal (maximal operators), hom_space (finite
spaces of homogeneous type), experiments (runs and CLI).
"""

__version__ = "0.1.0"
