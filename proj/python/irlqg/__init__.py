"""Irregular LQ/LQG output-feedback control toolkit."""

from ._core import (
    MatrixError,
    NumericalError,
    Problem,
    ProblemError,
    TimeGrid,
    __version__,
    classify,
    demo_intro,
    intro_problem,
    load_problem,
    numerical_rank,
    parse_problem,
    pinv,
    range_residual,
    simulate,
    solve_filter_covariance,
    solve_P,
    synthesize,
)

__all__ = [
    "MatrixError",
    "NumericalError",
    "Problem",
    "ProblemError",
    "TimeGrid",
    "classify",
    "demo_intro",
    "intro_problem",
    "load_problem",
    "numerical_rank",
    "parse_problem",
    "pinv",
    "range_residual",
    "simulate",
    "solve_filter_covariance",
    "solve_P",
    "synthesize",
]
