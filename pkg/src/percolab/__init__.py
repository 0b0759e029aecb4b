"""percolab: percolation cluster geometry, random walks, and wedge graphs.

Finite-window simulations and exact combinatorial checks for supercritical
bond percolation: cluster boundaries and closures, block renormalization,
anchored isoperimetry, lazy-walk heat kernels and mixing, and entropy /
resistance analysis on wedges of Z^3.
"""

__version__ = "0.1.0"

from .lattice import (
    BoxLattice,
    WedgeLattice,
    BlockGrid,
    HeightFunction,
    build_box,
    build_wedge,
    blocks_of,
    constant_height,
    power_height,
    log_height,
)
from .percolation import (
    EdgeConfiguration,
    ClusterLabeling,
    sample,
    label,
    giant_proxy,
    is_finite_proxy,
    cluster_subgraph,
    edge_uniforms,
)
from .clustergeom import (
    GraphView,
    VertexSet,
    boundary,
    edge_boundary,
    vertex_boundary,
    closure,
    frontier,
    touching_edges,
    is_star_connected,
)
from .stats import TailEstimate, RateFit, wilson_interval, fit_log_rate
from .walk import WalkOperator, heat_kernel_at_origin, decay_exponent, relaxation_time, linfty_mixing
from .wedge import (
    EntropyReport,
    entropy_report,
    check_entropy_invariants,
    lyons_sum,
    effective_resistance,
    cutset_census,
)

__all__ = [name for name in dir() if not name.startswith("_")]
