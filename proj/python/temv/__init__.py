"""Mean-variance portfolio allocation with tracking-error penalization."""

from temv._core import (  # noqa: F401
    MarketModel,
    PenaltySpec,
    RiccatiSolution,
    SimConfig,
    Strategy,
    TemvError,
    TimeGrid,
    build_market,
    classical_strategy,
    control_classical,
    control_expansion,
    control_feedback_x0,
    control_mkv,
    control_reference,
    covariance_from_vols_corr,
    efficient_frontier_expanded,
    estimate_params,
    expansion_terms_arrays,
    gamma_sensitivity,
    misspecification_study,
    mu_for_target_return,
    penalized_strategy,
    reference_strategy,
    reference_weights,
    run_backtest_csv,
    sharpe,
    simulate_wealth,
    solve_riccati,
    study_market,
    transition_factor,
    value_at_zero,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
