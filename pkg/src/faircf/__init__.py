"""Fair counterfactual action sets for tabular binary classifiers.

The engine searches, with a soft actor-critic agent, for small sets of shared
feature-change actions that give affected individuals recourse while keeping
success rates, recourse costs, and the number of viable choices balanced
across protected groups.
"""

from .baseline import NunIndex, build_nun_index, nun_counterfactual
from .cluster import Clustering, cluster_subpopulations, kmeans_fit
from .errors import (
    ConfigError,
    DataError,
    DivergenceError,
    EmptyPopulationError,
    FairCfError,
    SchemaError,
    ValidationError,
)
from .fairness import (
    FairnessSnapshot,
    Population,
    active_actions,
    compute_snapshot,
    ee_gaps,
    effective_action_counts,
    effectiveness,
    macro_effectiveness,
    micro_effectiveness,
)
from .model import (
    Autoencoder,
    Classifier,
    LogisticModel,
    ModelFairnessAudit,
    TableClassifier,
    audit_fairness,
    plausibility,
    train_autoencoder,
    train_classifier,
)
from .recourse import (
    Action,
    ActionSet,
    CfQuality,
    apply_action,
    cf_quality,
    gower,
    select_best,
)
from .rl_env import RecourseEnv, Scenario, ScenarioSpec, reward_ecr, reward_ee, reward_hybrid, stopping
from .sac import ReplayBuffer, SacAgent, SacConfig, TrainingTrace, train
from .tabular import (
    AffectedSet,
    Dataset,
    FeatureSchema,
    FeatureSpec,
    affected_subset,
    load_csv,
    train_test_split,
)

__version__ = "0.1.0"

__all__ = [
    "Action",
    "ActionSet",
    "AffectedSet",
    "Autoencoder",
    "CfQuality",
    "Classifier",
    "Clustering",
    "ConfigError",
    "DataError",
    "Dataset",
    "DivergenceError",
    "EmptyPopulationError",
    "FairCfError",
    "FairnessSnapshot",
    "FeatureSchema",
    "FeatureSpec",
    "LogisticModel",
    "ModelFairnessAudit",
    "NunIndex",
    "Population",
    "RecourseEnv",
    "ReplayBuffer",
    "SacAgent",
    "SacConfig",
    "Scenario",
    "ScenarioSpec",
    "SchemaError",
    "TableClassifier",
    "TrainingTrace",
    "ValidationError",
    "active_actions",
    "affected_subset",
    "apply_action",
    "audit_fairness",
    "build_nun_index",
    "cf_quality",
    "cluster_subpopulations",
    "compute_snapshot",
    "ee_gaps",
    "effective_action_counts",
    "effectiveness",
    "gower",
    "kmeans_fit",
    "load_csv",
    "macro_effectiveness",
    "micro_effectiveness",
    "nun_counterfactual",
    "plausibility",
    "reward_ecr",
    "reward_ee",
    "reward_hybrid",
    "select_best",
    "stopping",
    "train",
    "train_autoencoder",
    "train_classifier",
    "train_test_split",
]
