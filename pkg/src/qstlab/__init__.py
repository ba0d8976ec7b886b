"""qstlab: a quantum state tomography workbench.

Estimators: linear inversion with projection (``standard_qst``), an
adaptive Bayesian particle filter (``abqt``), and a trained neural
recurrent estimator (``naqst``), sharing POVM construction (``povm``),
state linear algebra (``qcore``), and entropy-based measurement adaptivity
(``adapt``). The ``harness`` subpackage holds the CLI, configuration,
benchmark experiments, and the stdio measurement protocol.
"""

from . import abqt, adapt, naqst, nn, povm, qcore, sources, standard_qst

__version__ = "0.1.0"

__all__ = [
    "abqt",
    "adapt",
    "naqst",
    "nn",
    "povm",
    "qcore",
    "sources",
    "standard_qst",
    "__version__",
]
