"""RS constants and free energies (Ising and spherical)."""
import logging
import math
import os
import sys
from typing import Dict, Optional

import numpy as np
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from errors import DomainError
from models import ModelSpec, RSConstants
from numerics import ConvexMinimum, expect_field_gaussian, gh_standard_normal, minimize_convex_1d
from .fixed_point import DEFAULT_GH_ORDER, solve_q_star_detailed, tanh_sq

logger = logging.getLogger(__name__)


def log_2cosh(x):
    return np.logaddexp(x, -x)


def rs_constants(model: ModelSpec, gh_order: int = DEFAULT_GH_ORDER, tol: float = 1e-12) -> RSConstants:
    """Solve q* and derive σ*², λ*, κ*, δ*, a* and both free energies."""
    solution = solve_q_star_detailed(model, tol=tol, gh_order=gh_order)
    q = solution.q
    z = 1.0 - q
    transforms = model.transforms

    a_star = transforms.r_transform(z)
    r_prime = transforms.r_prime(z)
    sigma_sq = q * r_prime
    lambda_star = transforms.cauchy_inverse(z)
    kappa = 1.0 / (1.0 - z * z * r_prime) - 1.0
    if not kappa > 0:
        raise DomainError(f"kappa*={kappa} is not positive; (1-q*)^2 R'(1-q*) must lie in (0, 1)")
    delta = sigma_sq / kappa

    nodes, weights = model.field.quadrature()
    rule = gh_standard_normal(gh_order)
    sigma = math.sqrt(sigma_sq)
    delta_gaussian = float(
        weights @ ((np.tanh(nodes[:, None] + sigma * rule.z[None, :]) / z - sigma * rule.z[None, :]) ** 2) @ rule.w
    )
    u_star = float(weights @ (nodes[:, None] * np.tanh(nodes[:, None] + sigma * rule.z[None, :])) @ rule.w)

    delta_algebraic = q / z ** 2 - sigma_sq
    if abs(delta - delta_algebraic) > 1e-10 or abs(delta_gaussian - delta_algebraic) > 1e-8:
        logger.warning("delta* forms disagree: sigma2/kappa=%.12g algebraic=%.12g gaussian=%.12g",
                       delta, delta_algebraic, delta_gaussian)
    if abs(lambda_star - (a_star + 1.0 / z)) > 1e-12 * max(1.0, lambda_star):
        logger.warning("lambda* identity off by %.3g", lambda_star - (a_star + 1.0 / z))

    constants = RSConstants(
        q_star=q,
        sigma_star_sq=sigma_sq,
        lambda_star=lambda_star,
        kappa_star=kappa,
        delta_star=delta,
        a_star=a_star,
        r_prime_star=r_prime,
        u_star=u_star,
        delta_star_gaussian=delta_gaussian,
        iterations=solution.iterations,
        residual=solution.residual,
    )
    constants.psi_rs = psi_rs(model, constants, gh_order)
    sphere = sphere_minimum(model)
    constants.psi_rs_sphere = 0.5 * sphere.value
    constants.sphere_gamma = sphere.x
    return constants


def psi_rs(model: ModelSpec, constants: Optional[RSConstants] = None, gh_order: int = DEFAULT_GH_ORDER) -> float:
    """Replica-symmetric free energy Ψ_RS of the rescaled model."""
    if constants is None:
        constants = rs_constants(model, gh_order)
    q = constants.q_star
    z = 1.0 - q
    nodes, weights = model.field.quadrature()
    entropy = expect_field_gaussian(nodes, weights, constants.sigma_star, log_2cosh, gh_standard_normal(gh_order))
    return float(
        entropy
        + 0.5 * q * constants.a_star
        - 0.5 * q * z * constants.r_prime_star
        + 0.5 * model.transforms.integral_r(z)
    )


def sphere_epsilon(d_bar_plus: float) -> float:
    return 1e-6 * (1.0 + abs(d_bar_plus))


def sphere_minimum(model: ModelSpec) -> ConvexMinimum:
    """Minimize γ + E[𝖧²]Ḡ(γ) − ∫log(γ−x)dμ_D̄ − 1 over γ > d̄₊."""
    if not model.beta < model.spectral.cauchy_at_support_max():
        raise DomainError(f"beta={model.beta} outside (0, G(d+))")
    transforms = model.transforms
    m2 = model.field.second_moment
    d_plus = model.d_bar_plus
    lo = d_plus + sphere_epsilon(d_plus)

    def objective(gamma):
        return gamma + m2 * float(transforms.cauchy(gamma)) - float(transforms.log_potential(gamma)) - 1.0

    def derivative(gamma):
        return 1.0 + m2 * float(transforms.cauchy_prime(gamma)) - float(transforms.cauchy(gamma))

    def second(gamma):
        return m2 * float(transforms.cauchy_second(gamma)) - float(transforms.cauchy_prime(gamma))

    result = minimize_convex_1d(objective, derivative, lo, lo + 2.0 + math.sqrt(m2), hess=second, method="golden")
    if result.second_derivative is not None and result.second_derivative <= 0:
        logger.warning("spherical objective not convex at gamma=%.6g", result.x)
    return result


def psi_rs_sphere(model: ModelSpec) -> float:
    return 0.5 * sphere_minimum(model).value


def small_beta_expansion(model: ModelSpec) -> Dict[str, float]:
    """Leading-order small-β predictions for the RS constants."""
    q0 = model.field.expect(tanh_sq)
    beta_sq = model.beta ** 2
    return {
        "q_star": q0,
        "sigma_star_sq": beta_sq * q0,
        "lambda_star": 1.0 / (1.0 - q0) + beta_sq * (1.0 - q0),
        "kappa_star": beta_sq * (1.0 - q0) ** 2,
    }
