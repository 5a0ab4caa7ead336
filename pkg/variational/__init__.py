"""HCIZ exponents, infgamma closed forms and the first/second-moment variational functions."""
from .functionals import (
    h_func,
    h_func_grad,
    f_weight,
    f_weight_sup,
    f_func,
    f_func_prime,
    f2_func,
    f2_func_grad,
    h2_func,
    h2_func_grad,
)
from .hciz import (
    Rank2Objective,
    default_epsilon,
    hciz_rank1,
    hciz_rank2,
    hciz_mc,
    minimize_rank2,
)
from .infgamma import (
    inf_gamma_closed,
    inf_gamma_numeric,
    inf_gamma_minimizer,
    inf_gamma_matrix,
    inf_gamma_matrix_detailed,
    inf_gamma_matrix_numeric,
)
from .phi import (
    sample_joint_law,
    joint_features,
    phi1_objective,
    phi1_star_point,
    phi1_stationary,
    phi2_objective,
    phi2_star_point,
    phi2_stationary,
    dv_decay,
    concavity_probe,
    symmetric_sqrt,
    schur_complement,
)
from .gradcheck import gradcheck, gradcheck_components, central_difference

__all__ = [
    "h_func",
    "h_func_grad",
    "f_weight",
    "f_weight_sup",
    "f_func",
    "f_func_prime",
    "f2_func",
    "f2_func_grad",
    "h2_func",
    "h2_func_grad",
    "Rank2Objective",
    "default_epsilon",
    "hciz_rank1",
    "hciz_rank2",
    "hciz_mc",
    "minimize_rank2",
    "inf_gamma_closed",
    "inf_gamma_numeric",
    "inf_gamma_minimizer",
    "inf_gamma_matrix",
    "inf_gamma_matrix_detailed",
    "inf_gamma_matrix_numeric",
    "sample_joint_law",
    "joint_features",
    "phi1_objective",
    "phi1_star_point",
    "phi1_stationary",
    "phi2_objective",
    "phi2_star_point",
    "phi2_stationary",
    "dv_decay",
    "concavity_probe",
    "symmetric_sqrt",
    "schur_complement",
    "gradcheck",
    "gradcheck_components",
    "central_difference",
]
