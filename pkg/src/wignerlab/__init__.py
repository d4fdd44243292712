"""Spectral statistics of Wigner random matrices.

Semicircle analytics, seeded heavy-tailed ensembles, truncation and
moment-replacement pipelines, exact resolvent identities, and Monte
Carlo scaling experiments with deterministic, reproducible outputs.
"""

__version__ = "0.1.0"

from . import ensembles, experiments, semicircle, spectral, truncation  # noqa: F401
