"""Semi-implicit back propagation (C++ core with Python bindings)."""

from ._core import (
    Activation,
    DataError,
    Loss,
    Method,
    NetworkSpec,
    NonFiniteError,
    ParameterSet,
    ShapeError,
    forward,
    gradient,
    init_params,
    load_mnist,
    loss_grad,
    loss_value,
    predict,
    proxbp_step,
    run_checks,
    semi_implicit_step,
    solve_W_subproblem,
    stationarity_check,
    train,
)

__all__ = [name for name in dir() if not name.startswith("_")]
