"""Deterministic simulator and analysis suite for multi-source IDLA forests.

Particles leave Poisson-clocked sources on the hyperplane {0} x Z^(d-1),
random-walk until they exit the current aggregate, and settle there; the
entry edges assemble a random forest.  This package builds those objects
reproducibly (counter-based randomness), couples window sizes, tracks
chains of changes, and measures the percolation-flavored quantities that
govern forest stabilization.
"""

from ._kernels import BACKEND
from .engine import (Aggregate, Emission, Forest, ParticleTrace,
                     advance_particle, build_aggregate_forest,
                     build_ordered_aggregate, schedule_emissions,
                     single_source_aggregate)
from .errors import IdlaError
from .lattice import (ConeSpec, cone_contains, hball_overlap, in_strip,
                      inf_norm, project_to_hyperplane, translate)
from .streams import StreamKey, clock_tops, derive_key, walk_steps

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "IdlaError", "ConeSpec", "StreamKey", "Aggregate", "Forest",
    "Emission", "ParticleTrace", "inf_norm", "project_to_hyperplane",
    "in_strip", "hball_overlap", "cone_contains", "translate", "derive_key",
    "clock_tops", "walk_steps", "schedule_emissions", "advance_particle",
    "build_aggregate_forest", "build_ordered_aggregate",
    "single_source_aggregate", "__version__",
]
