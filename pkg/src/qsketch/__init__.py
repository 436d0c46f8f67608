"""Statevector simulation of oracle sketching and its downstream stack.

Modules
-------
simcore   dense and diagonal unitaries, distances
datagen   hierarchical data processes and sample streams
sketch    phase-oracle sketches and sample budgets
qsvt      polynomial targets, phase factors and QSVT circuits
linalg    sparse oracles, block encodings and state sketching
readout   Clifford and interferometric classical shadows
apps      circuit-embedding fixtures and end-to-end pipelines
bench     scaling benchmarks, log-log fits and qubit accounting
"""

from . import apps, bench, datagen, linalg, qsvt, readout, simcore, sketch

__version__ = "0.1.0"

__all__ = ["simcore", "datagen", "sketch", "qsvt", "linalg", "readout", "apps", "bench", "__version__"]
