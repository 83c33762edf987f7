"""Certified homotopy continuation for dense complex polynomial systems.

Core pieces: dense homogeneous systems under the unitarily invariant
coefficient metric, condition numbers with adaptive Newton path tracking,
explicit and randomized start pairs, eigenpair continuation, Monte-Carlo
reproduction of closed-form expectation values, and a simulator of
computation under relative round-off.
"""

__version__ = "0.1.0"

from .conditioning import (
    ConditionReport,
    distance_to_rank_deficient,
    moore_penrose,
    mu,
    mu_frobenius,
    mu_univariate,
)
from .eigenpath import (
    EigenTriple,
    companion_matrix,
    mu_eig,
    track_eigenpair,
)
from .newton import (
    Certificate,
    certify_approximate_zero,
    newton_affine,
    newton_projective,
    quadratic_convergence_probe,
    refine_zero,
)
from .polyspace import (
    DegreeList,
    PolySystem,
    ProjectivePoint,
    affine_zero_of,
    bw_inner,
    bw_norm,
    dehomogenize,
    evaluate,
    homogenize,
    jacobian,
    proj_distance,
    sample_bw_gaussian,
    system_from_json,
    system_to_json,
    unitary_act,
)
from .startsys import StartPair, bc_pair, bp_sample, shsm_pair
from .tracker import (
    PathSpec,
    TrackerConfig,
    TrackResult,
    condition_length,
    eval_point_homotopy,
    great_circle,
    track,
)

__all__ = [name for name in dir() if not name.startswith("_")]
