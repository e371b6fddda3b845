"""Workloads: linkage-disequilibrium chi-square tests and logistic-regression
inference, each as a plaintext oracle, a Boolean circuit, and an HE plan."""

from .ld import (
    GenotypeCounts,
    HaplotypeCounts,
    LdHePlan,
    LdResult,
    LdStatisticUndefined,
    PlanRejected,
    build_ld_circuit,
    genotype_to_allele_counts,
    ld_decide_plain,
)
from .lr import (
    LrModel,
    SigmoidTable,
    build_lr_circuit,
    build_sigmoid_table,
    load_model,
    lr_he_plan_bound,
    lr_predict_fixed,
    lr_predict_float,
    save_model,
)

__all__ = [
    "GenotypeCounts",
    "HaplotypeCounts",
    "LdHePlan",
    "LdResult",
    "LdStatisticUndefined",
    "LrModel",
    "PlanRejected",
    "SigmoidTable",
    "build_ld_circuit",
    "build_lr_circuit",
    "build_sigmoid_table",
    "genotype_to_allele_counts",
    "ld_decide_plain",
    "load_model",
    "lr_he_plan_bound",
    "lr_predict_fixed",
    "lr_predict_float",
    "save_model",
]
