"""Phase-field fracture with unilateral constraints on structured grids."""

from .affine import AffineMap, Square, corner_cube, lemma_trials, lp_constant, rescale_affine, vertex_max
from .crack import CrackConfig, CrackPath, Segment, horizontal_crack, opening_crack, through_crack, uncracked
from .energy import (
    EnergyBreakdown,
    Model,
    ModelParams,
    bulk_density,
    density_derivatives,
    energy_breakdown,
    homogeneous_state,
    sharp_elastic_density,
    sharp_energy,
    surface_density,
    total_energy,
)
from .grid import DirichletCondition, DirichletSpec, Field, Grid, affine_boundary
from .io import read_fields, write_fields, write_history
from .recovery import (
    RecoveryParams,
    build_v_recovery,
    distance_field,
    minkowski_estimate,
    mollify_u,
    optimal_profile,
    profile_energy_halfline,
    recovery_energy_check,
)
from .solver import SolveHistory, SolveOptions, alternate_minimize, minimize_u, minimize_v
from .tensor import SymTensor2, deviatoric, eigen, psd_project, sym_rank_one, trace_split

__version__ = "0.1.0"
