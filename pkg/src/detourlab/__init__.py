"""detourlab: a deterministic simulation lab for latent-variable learning.

A simulated robot drives toward a visual target while an invisible barrier
blocks the direct path. The robot plans with a two-slice decision network,
notices that its utility forecasts are systematically wrong, blames the
error on a hidden cause, splices a binary latent variable into the network,
and re-estimates the parameters until it learns to step around the barrier.
"""

__version__ = "0.1.0"

from .agent import (
    AgentParams,
    EpochSummary,
    HiddenVariableSpec,
    StepRecord,
    detect_step,
    hard_weighted_em,
    insert_hidden_variable,
    run_epoch,
    run_epochs,
    run_learning_process,
    select_related_variables,
    utility_surprise,
)
from .config import DiscoveryParams, ExperimentConfig
from .discovery import (
    EdgeCandidate,
    SampleLog,
    causal_action_coefficient,
    causal_coefficient,
    discover_structure,
    forward_select,
    normalized_transfer_entropy,
    transfer_entropy,
)
from .distribution import Distribution
from .environment import (
    ContinuousObservation,
    WorldConfig,
    WorldState,
    apply_restrictors,
    env_step,
    observe,
    observe_discrete,
    step_aside,
    step_forward,
)
from .network import (
    ConditionalTable,
    DiscreteAction,
    DiscreteObservation,
    TwoSliceNetwork,
    initial_network,
    select_action_meu,
    utility,
)
from .surprise import (
    INFINITE_SURPRISE,
    SurpriseVerdict,
    chi1_cdf,
    entropy,
    influence_probability,
    information_dispersion,
    kl_divergence,
    surprise_coefficient,
    surprise_divergence,
    surprise_test,
)
