use thiserror::Error;

/// Errors produced by the solver pipeline.
#[derive(Debug, Error)]
pub enum LcError {
    #[error("evaluation outside the domain of the tabulated field: x = {x}")]
    Domain { x: f64 },

    #[error("ansatz requires q > 0 at x = {x} (got q = {q})")]
    AnsatzDomain { x: f64, q: f64 },

    #[error("step size underflow at x = {x}; last good |u| = {unorm:.3e}")]
    StepUnderflow { x: f64, unorm: f64 },

    #[error("solution overflow at x = {x}; try a smaller |Im z| or rescale the problem")]
    Overflow { x: f64 },

    #[error("|Im z| = {imz} exceeds the configured bound {bound}")]
    ImZBound { imz: f64, bound: f64 },

    #[error("grids do not align: {0}")]
    Alignment(String),

    #[error(
        "Volterra iteration did not converge after {iterations} sweeps \
         (integral of |rho| = {rho_l1:.3e}); increase X_inf or refine the grid"
    )]
    VolterraConvergence { iterations: usize, rho_l1: f64 },

    #[error("Wronskian constancy violated: deviation {dev:.3e} exceeds {limit:.3e}")]
    Accuracy { dev: f64, limit: f64 },

    #[error("fit window spans {periods:.2} oscillation periods; at least 2 are required")]
    FitWindow { periods: f64 },

    #[error(
        "z is within the eigenvalue margin: |sigma+ - omega sigma-| = {denom:.3e} \
         near lambda = {lambda_est}"
    )]
    EigenvalueProximity { denom: f64, lambda_est: f64 },

    #[error("phase scan too coarse near lambda = {lambda}; rescan with at least {suggested} points")]
    Rescan { lambda: f64, suggested: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("quadrature failure: {0}")]
    Quadrature(String),
}

pub type Result<T> = std::result::Result<T, LcError>;
