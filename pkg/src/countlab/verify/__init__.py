"""Theorem checks, goodness-of-fit tests and the verification report."""
from countlab.verify.gof import (
    GofResult,
    KsResult,
    chi_square_gof,
    chi_square_p_value,
    kolmogorov_p_value,
    ks_test,
    pool_cells,
    two_sample_chi_square,
)
from countlab.verify.report import CheckRecord, VerificationReport
from countlab.verify.suite import (
    DEFAULT_TOLERANCES,
    MANIFEST,
    SuiteConfig,
    run_theorem_suite,
    select_groups,
    theta_invariance_check,
)

__all__ = [
    "CheckRecord",
    "DEFAULT_TOLERANCES",
    "GofResult",
    "KsResult",
    "MANIFEST",
    "SuiteConfig",
    "VerificationReport",
    "chi_square_gof",
    "chi_square_p_value",
    "kolmogorov_p_value",
    "ks_test",
    "pool_cells",
    "run_theorem_suite",
    "select_groups",
    "theta_invariance_check",
    "two_sample_chi_square",
]
