//! Damped Newton-Raphson iteration with update-based convergence control.
//!
//! The solver is closure-based so the same loop serves any implicit solve
//! that can provide a residual and a linear solve against it. Linear-solver
//! construction (factorization, reuse) is the caller's business; this module
//! only drives iterations.
//!
//! Convergence is declared on the weighted RMS norm of the Newton update,
//! not the residual: implicit-integrator residuals carry an absolute noise
//! floor of order (alpha/tau) * ulp(y) from the (y - phi) subtraction that
//! no iterate can go below, while the update norm measures the distance to
//! the fixed point in solution units and shrinks to machine precision. The
//! residual norm still backs the line search, where only a decrease matters.

/// Iteration limits and the convergence threshold on the weighted RMS norm
/// of the Newton update.
#[derive(Clone, Copy, Debug)]
pub struct NewtonOptions {
    /// Converged when rms(delta_i / weight_i) <= tol for a full
    /// (undamped) update.
    pub tol: f64,
    pub max_iterations: usize,
    /// Halvings of the update allowed when the residual norm increases.
    pub max_backtracks: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: 1e-3,
            max_iterations: 12,
            max_backtracks: 5,
        }
    }
}

/// Why an iteration gave up.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NewtonErrorKind {
    MaxIterations,
    NonFinite,
    BacktrackExhausted,
    LinearSolve,
}

/// Failure report consumed by the step controller.
#[derive(Clone, Copy, Debug)]
pub struct NewtonFailure {
    pub kind: NewtonErrorKind,
    pub iterations: usize,
    pub last_norm: f64,
}

/// Success report: linear solves performed and the final update norm.
#[derive(Clone, Copy, Debug)]
pub struct NewtonReport {
    pub iterations: usize,
    pub final_norm: f64,
}

/// Weighted RMS norm used for both convergence and error control.
pub fn weighted_rms(v: &[f64], weights: &[f64]) -> f64 {
    debug_assert_eq!(v.len(), weights.len());
    if v.is_empty() {
        return 0.0;
    }
    let mut acc = 0.0;
    for (x, w) in v.iter().zip(weights) {
        let s = x / w;
        acc += s * s;
    }
    (acc / v.len() as f64).sqrt()
}

/// Componentwise weights AbsTol + RelTol * |y|.
pub fn error_weights(y: &[f64], abs_tol: f64, rel_tol: f64, out: &mut [f64]) {
    for (w, x) in out.iter_mut().zip(y) {
        *w = abs_tol + rel_tol * x.abs();
    }
}

/// Newton iteration: converges when a full update is smaller than `tol` in
/// the weighted RMS norm; larger updates are applied with backtracking on
/// the scaled residual norm (an error from `residual` counts as an infinite
/// norm, damping away from invalid trial states).
///
/// `residual(y, out)` fills the residual. `solve(residual, delta)` must
/// produce the Newton update delta with J delta = residual, so the update is
/// y <- y - delta. Weights are frozen across the iteration.
pub fn newton_solve(
    y: &mut [f64],
    mut residual: impl FnMut(&[f64], &mut [f64]) -> crate::Result<()>,
    mut solve: impl FnMut(&[f64], &mut [f64]) -> crate::Result<()>,
    weights: &[f64],
    opts: &NewtonOptions,
) -> Result<NewtonReport, NewtonFailure> {
    let n = y.len();
    let mut r = vec![0.0; n];
    let mut delta = vec![0.0; n];
    let mut y_trial = vec![0.0; n];

    let mut norm = match residual(y, &mut r) {
        Ok(()) => weighted_rms(&r, weights),
        Err(_) => f64::NAN,
    };
    if !norm.is_finite() {
        return Err(NewtonFailure {
            kind: NewtonErrorKind::NonFinite,
            iterations: 0,
            last_norm: norm,
        });
    }

    for it in 1..=opts.max_iterations {
        if solve(&r, &mut delta).is_err() {
            return Err(NewtonFailure {
                kind: NewtonErrorKind::LinearSolve,
                iterations: it,
                last_norm: norm,
            });
        }
        let update_norm = weighted_rms(&delta, weights);
        if !update_norm.is_finite() {
            return Err(NewtonFailure {
                kind: NewtonErrorKind::NonFinite,
                iterations: it,
                last_norm: update_norm,
            });
        }
        if update_norm <= opts.tol {
            for (yi, di) in y.iter_mut().zip(&delta) {
                *yi -= di;
            }
            return Ok(NewtonReport {
                iterations: it,
                final_norm: update_norm,
            });
        }

        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..=opts.max_backtracks {
            for i in 0..n {
                y_trial[i] = y[i] - step * delta[i];
            }
            let trial_norm = match residual(&y_trial, &mut r) {
                Ok(()) => weighted_rms(&r, weights),
                Err(_) => f64::INFINITY,
            };
            if trial_norm.is_finite() && trial_norm < norm {
                y.copy_from_slice(&y_trial);
                norm = trial_norm;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            return Err(NewtonFailure {
                kind: NewtonErrorKind::BacktrackExhausted,
                iterations: it,
                last_norm: norm,
            });
        }
    }
    Err(NewtonFailure {
        kind: NewtonErrorKind::MaxIterations,
        iterations: opts.max_iterations,
        last_norm: norm,
    })
}
