"""Desk-scale toolkit for bias-constrained Boolean Max-CSPs.

Subpackages cover biased-cube Fourier analysis (``probspace``), weighted
constraint hypergraphs with brute-force constrained optima (``csp``),
locally-consistent distribution families with smoothing/conditioning and the
degree-2 vector solution (``pseudodist``), correlated-Gaussian stability
estimation (``gaussian``), the Gaussian-projection rounding scheme
(``rounding``), the expansion-gadget test distribution with its dictator
assignments and verifiers (``reduction``), and the Monte Carlo / oracle /
CLI machinery (``harness``).
"""

from .csp import Assignment, ConstraintHypergraph, Predicate
from .probspace import BiasedSpace, FourierTable, FunctionTable, PairedSpace
from .pseudodist import LocalDistributionFamily, VectorSolution

__version__ = "0.1.0"

__all__ = [
    "Assignment",
    "ConstraintHypergraph",
    "Predicate",
    "BiasedSpace",
    "FourierTable",
    "FunctionTable",
    "PairedSpace",
    "LocalDistributionFamily",
    "VectorSolution",
    "__version__",
]
