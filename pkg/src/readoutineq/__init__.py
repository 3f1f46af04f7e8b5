"""Readout-inequality tests: amplitude amplification vs. ensemble machines."""

__version__ = "0.1.0"

from .entropy import (
    ExperimentPlan,
    ReadoutStats,
    ViolationReport,
    binary_entropy,
    chain_rule_audit,
    closed_form_d,
    conditional_entropy,
    d_min_theoretical,
    evaluate_inequality,
    h,
    max_violation_plan,
    plan_for,
)
from .montecarlo import (
    McConfig,
    McResult,
    estimate_d,
    exact_conditionals,
    grid_to_csv,
    landscape_scan,
    sample_conditionals,
)
from .qaa import (
    MeasurementSetting,
    QaaParams,
    TwoLevelState,
    Unitary2,
    apply_power,
    closest_integer,
    critical_iterations,
    grover_full_matrix,
    grover_rotation,
    power_decomposition,
    step_conditional_probs,
)
from .senm import (
    EnsembleSpec,
    GrandJoint,
    TransitionKernel,
    conditional_readouts,
    fit_imitation,
    grand_joint,
    joint_state_distribution,
    load_ensemble,
    readout_distribution,
)

__all__ = [
    "__version__",
    "ExperimentPlan",
    "ReadoutStats",
    "ViolationReport",
    "binary_entropy",
    "chain_rule_audit",
    "closed_form_d",
    "conditional_entropy",
    "d_min_theoretical",
    "evaluate_inequality",
    "h",
    "max_violation_plan",
    "plan_for",
    "McConfig",
    "McResult",
    "estimate_d",
    "exact_conditionals",
    "grid_to_csv",
    "landscape_scan",
    "sample_conditionals",
    "MeasurementSetting",
    "QaaParams",
    "TwoLevelState",
    "Unitary2",
    "apply_power",
    "closest_integer",
    "critical_iterations",
    "grover_full_matrix",
    "grover_rotation",
    "power_decomposition",
    "step_conditional_probs",
    "EnsembleSpec",
    "GrandJoint",
    "TransitionKernel",
    "conditional_readouts",
    "fit_imitation",
    "grand_joint",
    "joint_state_distribution",
    "load_ensemble",
    "readout_distribution",
]
