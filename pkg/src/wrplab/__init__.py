"""Verification laboratory for the weak representation property (WRP).

Exact finite-model engine (``finite_model``, ``jump_calculus``,
``wrp_check``, ``enlargement``, ``jacod``) plus a Monte Carlo engine for
Levy/step factors (``levy_mc``).
"""
from .enlargement import (
    IDENTITIES,
    ProductModel,
    build_product_integrands,
    characteristics_invariance_check,
    embed_integrand,
    iterated_product,
    product_model,
    stack,
    verify_product_representation,
)
from .errors import *  # noqa: F401,F403
from .finite_model import (
    FiniteModel,
    coin_model,
    compensator_increasing,
    conditional_expectation,
    is_martingale,
    jump_process,
    new_model,
    predictable_projection,
)
from .jacod import TauModel, build_tau_model, density_process, measure_q, verify_wrp_theorem
from .jump_calculus import (
    CompensatorTable,
    JumpMeasure,
    PredictableFunction,
    compensated_integral,
    compensator_nu,
    g_norm,
    g_norm2,
    jump_measure,
    predictable_covariation,
    quadratic_covariation,
    w_hat,
    w_tilde,
)
from .levy_mc import (
    AnalyticCompensator,
    FactorSpec,
    McScenario,
    StepSpec,
    convergence_study,
    mc_compensated_integral,
    mc_continuous_integral,
    mc_verify_product,
    simulate,
)
from .scenarios import list_builtin_scenarios
from .wrp_check import has_prp, has_wrp, martingale_space_dim, representable_basis, solve_representation

__version__ = "0.1.0"
