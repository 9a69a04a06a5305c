"""Length process of the TKF91 indel model: exact laws, simulation and distance estimation."""

from .analytics import (
    RootSweep,
    berry_esseen_bound,
    berry_esseen_deviation,
    eta,
    immortal_progeny_pmf,
    joint_pair_law,
    leaf_length_pmf_given_root,
    leaf_marginal_law,
    mortal_progeny_pmf,
    overlap_certificate,
    pair_law_tv,
    progeny_moments,
    stationary_law,
)
from .estimator import LengthDistanceEstimator, bayes_error, estimate_single_pair, fit_many_samples
from .exceptions import (
    CapExceeded,
    DegenerateError,
    InvalidSlope,
    ParamError,
    ProbError,
    ResourceError,
    TKFError,
)
from .laws import DiscreteLaw, JointLaw, TVResult, tv_distance
from .model import (
    ModelParams,
    RootedTree,
    Sequence,
    StarTree2,
    parse_newick,
    stationary_length_pmf,
    stationary_mean_length,
    stationary_sequence_logprob,
    time_rescale,
)
from .simulate import (
    LengthPair,
    SimConfig,
    evolve_length,
    evolve_sequence,
    sample_leaf_pairs,
    sample_root_stationary,
    simulate_tree,
)

__version__ = "0.1.0"
