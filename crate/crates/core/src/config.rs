//! Numerical tolerances and stencil parameters, centralized so every check in
//! the crate reads the same numbers.

/// Tolerances used by validators, solvers, and bound checks.
///
/// These are absolute unless stated otherwise; matrix residuals are measured
/// in the Frobenius norm relative to the operand scale.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    /// Hermiticity residual allowed for operators and states.
    pub hermiticity: f64,
    /// Deviation of a density-operator trace from one.
    pub trace: f64,
    /// Residual of the detailed-balance pairing identity.
    pub pairing: f64,
    /// Eigenvalue floor below which a state counts as rank deficient.
    pub rank: f64,
    /// Negative-eigenvalue slack tolerated in density operators.
    pub positivity: f64,
    /// Residual for kernel equations (stationarity, trace preservation).
    pub kernel_residual: f64,
    /// Second-smallest singular value of the generator must exceed this for
    /// the stationary state to count as unique.
    pub uniqueness: f64,
    /// Residual of the zero mode of the symmetrized Liouvillian.
    pub gap_zero_mode: f64,
    /// Relative slack forgiven when declaring a bound satisfied.
    pub bound_slack_rel: f64,
    /// Relative fluctuation is reported as undefined when the mean falls
    /// below this factor times activity times horizon.
    pub mean_tol_factor: f64,
    /// Time resolution of the jump-time bisection.
    pub jump_time: f64,
    /// Relative disagreement between the analytic response gradient and its
    /// finite-difference cross-check that flags an implementation fault.
    pub response_fd: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            hermiticity: 1e-12,
            trace: 1e-10,
            pairing: 1e-10,
            rank: 1e-12,
            positivity: 1e-10,
            kernel_residual: 1e-10,
            uniqueness: 1e-8,
            gap_zero_mode: 1e-8,
            bound_slack_rel: 1e-9,
            mean_tol_factor: 1e-12,
            jump_time: 1e-12,
            response_fd: 1e-4,
        }
    }
}

/// Stencil parameters for the numeric full-counting-statistics derivatives.
#[derive(Debug, Clone, Copy)]
pub struct FcsConfig {
    /// Base step of the central-difference stencil in the counting field.
    pub base_step: f64,
    /// Richardson extrapolation levels applied on top of the base stencil.
    pub richardson_levels: usize,
    /// Finite-difference step for the response-gradient self-check.
    pub response_fd_step: f64,
}

impl Default for FcsConfig {
    fn default() -> Self {
        Self {
            base_step: 1e-3,
            richardson_levels: 1,
            response_fd_step: 1e-5,
        }
    }
}
