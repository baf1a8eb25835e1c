"""DeGroot opinion dynamics and scale-free estimation of resistance to influence."""

from .core import (
    ConvergenceError,
    CoupledWeights,
    InfluenceMatrix,
    OpinionState,
    ResistanceProfile,
    Trajectory,
    check_structure,
    compose_weights,
    consensus_preservation_check,
    consensus_value,
    decompose_weights,
    hull_check,
    iterate,
    opinion_difference,
    perron_vector,
    rescale,
    simulate,
    step,
    step_factored,
)
from .estimator import (
    EstimationReport,
    NodeEstimate,
    Status,
    estimate,
    estimate_ego,
    estimate_single,
    estimate_static,
    estimate_time_varying,
    reconstruct_weights,
    social_term,
)
from .synth import GeneratorSpec, derive_seed, gen_network, gen_opinions, gen_resistance, perturb

__version__ = "0.1.0"
