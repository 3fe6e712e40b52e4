//! Adaptive variable-order implicit multistep integration for the index-1
//! DAE M y' = f(y) with constant mass matrix.
//!
//! The family is the numerical differentiation formulas (NDF) of orders 1-5
//! on variable node spacing: the time derivative is the derivative of the
//! Lagrange interpolant through the new point and the k most recent accepted
//! points, plus the NDF relaxation term kappa gamma_k (y - y_pred) / tau that
//! trades a little stability margin for a smaller error constant. With
//! kappa = 0 the scheme is the classical variable-step BDF, and at k = 1 it
//! reduces to implicit Euler.
//!
//! Each step solves G(y) = (alpha/tau) M (y - phi) - f(y) = 0 by a damped
//! Newton method with a banded LU of (alpha/tau) M - J_f. The Jacobian J_f
//! is reused across steps and refreshed on Newton failure (one retry before
//! the step size drops). The local error estimate |kappa gamma_k +
//! 1/(k+1)| * ||y - y_pred|| in the weighted RMS norm drives step and order
//! selection.

use std::collections::VecDeque;

use crate::linalg::{BandedLu, BandedMatrix};
use crate::newton::{self, NewtonOptions};
use crate::Result;

/// Right-hand side, mass action, Jacobian, and internal-variable commit for
/// a semi-discrete DAE. `tau` is the current step size: rate-dependent
/// internal-variable updates (viscoplastic return maps) see the step length,
/// while internal variables themselves stay frozen until `commit`.
pub trait DaeSystem {
    fn dim(&self) -> usize;
    /// Constant mass matrix; zero rows mark algebraic equations.
    fn mass_matrix(&self) -> BandedMatrix;
    fn mass_apply(&self, v: &[f64], out: &mut [f64]);
    /// Zeroed Jacobian with the correct band structure.
    fn new_jacobian(&self) -> BandedMatrix;
    fn rhs(&self, t: f64, y: &[f64], tau: f64, out: &mut [f64]) -> Result<()>;
    fn rhs_jacobian(&self, t: f64, y: &[f64], tau: f64, out: &mut BandedMatrix) -> Result<()>;
    /// Advances internal variables from an accepted state.
    fn commit(&mut self, t: f64, y: &[f64], tau: f64) -> Result<()>;
}

/// NDF relaxation coefficients for orders 1..=5 (index 0 unused). Order 5
/// has no useful relaxation and runs as pure BDF5.
const KAPPA: [f64; 6] = [0.0, -0.1850, -1.0 / 9.0, -0.0823, -0.0415, 0.0];

fn gamma_k(k: usize) -> f64 {
    (1..=k).map(|j| 1.0 / j as f64).sum()
}

/// Derivative of the Lagrange basis at the first node: returns
/// w_j = l_j'(nodes[0]).
pub fn derivative_weights(nodes: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    let x0 = nodes[0];
    let mut w = vec![0.0; n];
    for j in 0..n {
        if j == 0 {
            w[0] = (1..n).map(|m| 1.0 / (x0 - nodes[m])).sum();
        } else {
            let mut num = 1.0;
            let mut den = 1.0;
            for m in 0..n {
                if m == j {
                    continue;
                }
                if m != 0 {
                    num *= x0 - nodes[m];
                }
                den *= nodes[j] - nodes[m];
            }
            w[j] = num / den;
        }
    }
    w
}

/// Lagrange basis values at t: returns l_j(t) for the given nodes.
pub fn value_weights(nodes: &[f64], t: f64) -> Vec<f64> {
    let n = nodes.len();
    let mut w = vec![1.0; n];
    for j in 0..n {
        for m in 0..n {
            if m != j {
                w[j] *= (t - nodes[m]) / (nodes[j] - nodes[m]);
            }
        }
    }
    w
}

/// Integrator tolerances and controller limits.
#[derive(Clone, Debug)]
pub struct NdfOptions {
    pub rtol: f64,
    pub atol: f64,
    pub tau_init: f64,
    pub tau_max: f64,
    pub tau_min: f64,
    /// Highest order considered by the controller, clamped to 1..=5.
    pub max_order: usize,
    /// Drop the NDF relaxation terms and run classical BDF.
    pub bdf_mode: bool,
    pub newton: NewtonOptions,
    /// Diagnostic: pin the order (disables order adaptation).
    pub fixed_order: Option<usize>,
    /// Diagnostic: pin the step size (disables the error test).
    pub fixed_tau: Option<f64>,
}

impl Default for NdfOptions {
    fn default() -> Self {
        NdfOptions {
            rtol: 1e-5,
            atol: 1e-8,
            tau_init: 1e-8,
            tau_max: 1e-3,
            tau_min: 1e-12,
            max_order: 5,
            bdf_mode: false,
            newton: NewtonOptions::default(),
            fixed_order: None,
            fixed_tau: None,
        }
    }
}

/// Terminal integrator failure: repeated step failures at the minimum step.
#[derive(Clone, Debug, serde::Serialize)]
pub struct AbortInfo {
    pub t_h: f64,
    /// Filled by the protocol driver (the integrator has no SOC notion).
    pub soc: Option<f64>,
    pub tau: f64,
    pub order: usize,
    pub consecutive_failures: usize,
    pub reason: String,
}

/// One accepted step.
#[derive(Clone, Copy, Debug)]
pub struct StepInfo {
    pub t: f64,
    pub tau: f64,
    pub order: usize,
    pub newton_iters: usize,
    pub error_estimate: f64,
}

#[derive(Clone, Debug)]
pub enum StepOutcome {
    Accepted(StepInfo),
    Aborted(AbortInfo),
}

/// Cumulative work counters.
#[derive(Clone, Copy, Debug, Default)]
pub struct IntegratorStats {
    pub accepted: usize,
    pub rejected: usize,
    pub newton_failures: usize,
    pub newton_iterations: usize,
    pub jacobians: usize,
    pub factorizations: usize,
}

pub struct Integrator<S: DaeSystem> {
    sys: S,
    opts: NdfOptions,
    /// Accepted states, most recent first: history[0] = (t_n, y_n).
    history: VecDeque<(f64, Vec<f64>)>,
    tau: f64,
    order: usize,
    mass: BandedMatrix,
    jac: BandedMatrix,
    iter_matrix: BandedMatrix,
    lu: Option<BandedLu>,
    have_jac: bool,
    /// alpha/tau the current LU was formed with; NaN forces a refactor.
    lu_scale: f64,
    jac_dirty: bool,
    consecutive_min_failures: usize,
    /// Failures since the last accepted step.
    attempt_failures: usize,
    stats: IntegratorStats,
}

impl<S: DaeSystem> Integrator<S> {
    pub fn new(sys: S, t0: f64, y0: Vec<f64>, opts: NdfOptions) -> Self {
        assert_eq!(y0.len(), sys.dim());
        let mut opts = opts;
        opts.max_order = opts.max_order.clamp(1, 5);
        let mass = sys.mass_matrix();
        let jac = sys.new_jacobian();
        let iter_matrix = sys.new_jacobian();
        let tau = opts.fixed_tau.unwrap_or(opts.tau_init);
        let mut history = VecDeque::with_capacity(8);
        history.push_front((t0, y0));
        Integrator {
            sys,
            opts,
            history,
            tau,
            order: 1,
            mass,
            jac,
            iter_matrix,
            lu: None,
            have_jac: false,
            lu_scale: f64::NAN,
            jac_dirty: true,
            consecutive_min_failures: 0,
            attempt_failures: 0,
            stats: IntegratorStats::default(),
        }
    }

    pub fn system(&self) -> &S {
        &self.sys
    }

    pub fn system_mut(&mut self) -> &mut S {
        &mut self.sys
    }

    pub fn into_system(self) -> S {
        self.sys
    }

    pub fn t(&self) -> f64 {
        self.history[0].0
    }

    pub fn y(&self) -> &[f64] {
        &self.history[0].1
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn stats(&self) -> IntegratorStats {
        self.stats
    }

    /// Replaces the history (most recent first). Used to seed multistep
    /// starts from known exact states in convergence studies.
    pub fn seed_history(&mut self, pts: Vec<(f64, Vec<f64>)>) {
        assert!(!pts.is_empty());
        for p in &pts {
            assert_eq!(p.1.len(), self.sys.dim());
        }
        self.history = pts.into();
        self.have_jac = false;
        self.lu_scale = f64::NAN;
    }

    /// Protocol breakpoint restart: keep the current state, drop multistep
    /// history, reset order and step size. Internal variables are untouched.
    pub fn restart(&mut self) {
        let current = self.history.pop_front().expect("nonempty history");
        self.history.clear();
        self.history.push_front(current);
        self.order = 1;
        self.tau = self.opts.fixed_tau.unwrap_or(self.opts.tau_init);
        self.have_jac = false;
        self.lu_scale = f64::NAN;
        self.consecutive_min_failures = 0;
        self.attempt_failures = 0;
    }

    fn effective_order(&self) -> usize {
        self.order.min(self.opts.max_order).min(self.history.len()).max(1)
    }

    /// Rescales a predictor-difference norm taken on the actual (possibly
    /// non-uniform) nodes to the uniform-spacing calibration the NDF error
    /// constants assume. The difference through m+1 nodes carries the factor
    /// prod_j (t_new - t_j); on a uniform grid of the current step that
    /// product is (m+1)! tau^(m+1).
    fn uniform_spacing_factor(&self, t_new: f64, tau: f64, n_pts: usize) -> f64 {
        let mut uniform = 1.0;
        let mut actual = 1.0;
        for j in 0..n_pts {
            uniform *= (j as f64 + 1.0) * tau;
            actual *= t_new - self.history[j].0;
        }
        uniform / actual
    }

    /// Takes one accepted step, never beyond t_limit. Retries with reduced
    /// step/order internally; returns Aborted after three consecutive
    /// failures at the minimum step size.
    pub fn step(&mut self, t_limit: f64) -> StepOutcome {
        let n = self.sys.dim();
        let mut phi = vec![0.0; n];
        let mut y_pred = vec![0.0; n];
        let mut y_new = vec![0.0; n];
        let mut newton_weights = vec![0.0; n];
        let mut scratch_a = vec![0.0; n];
        let mut scratch_b = vec![0.0; n];

        loop {
            let t_n = self.t();
            let remaining = t_limit - t_n;
            assert!(remaining > 0.0, "step() called at or past t_limit");
            let tau = match self.opts.fixed_tau {
                Some(ft) => ft.min(remaining),
                None => self.tau.min(remaining),
            };
            let k = match self.opts.fixed_order {
                Some(fo) => fo.clamp(1, 5).min(self.history.len()),
                None => self.effective_order(),
            };
            // Clipped steps land on the breakpoint exactly.
            let t_new = if tau == remaining { t_limit } else { t_n + tau };

            // Multistep weights on the actual node times.
            let mut nodes = Vec::with_capacity(k + 1);
            nodes.push(t_new);
            for j in 0..k {
                nodes.push(self.history[j].0);
            }
            let w = derivative_weights(&nodes);
            let n_pred = (k + 1).min(self.history.len());
            let kappa = if self.opts.bdf_mode || self.history.len() < k + 1 {
                0.0
            } else {
                KAPPA[k]
            };
            let gk = gamma_k(k);
            let alpha = tau * w[0] - kappa * gk;
            let scale = alpha / tau;

            // Predictor: extrapolate the n_pred most recent states to t_new.
            let pred_nodes: Vec<f64> = (0..n_pred).map(|j| self.history[j].0).collect();
            let pv = value_weights(&pred_nodes, t_new);
            y_pred.fill(0.0);
            for j in 0..n_pred {
                let yj = &self.history[j].1;
                for i in 0..n {
                    y_pred[i] += pv[j] * yj[i];
                }
            }

            // phi = -(tau sum_{j>=1} w_j y_{n+1-j} + kappa gamma_k y_pred) / alpha.
            phi.fill(0.0);
            for j in 1..=k {
                let yj = &self.history[j - 1].1;
                let c = tau * w[j];
                for i in 0..n {
                    phi[i] += c * yj[i];
                }
            }
            for i in 0..n {
                phi[i] = -(phi[i] + kappa * gk * y_pred[i]) / alpha;
            }

            newton::error_weights(self.y(), self.opts.atol, self.opts.rtol, &mut newton_weights);

            let mut fresh_used = false;
            let outcome = loop {
                // Iteration matrix (alpha/tau) M - J_f, reusing J_f when we
                // can and refactoring when the scale changed.
                if !self.have_jac {
                    match self.sys.rhs_jacobian(t_new, &y_pred, tau, &mut self.jac) {
                        Ok(()) => {
                            self.stats.jacobians += 1;
                            self.have_jac = true;
                            self.jac_dirty = true;
                            fresh_used = true;
                        }
                        Err(err) => {
                            break Err(format!("jacobian evaluation failed: {err}"));
                        }
                    }
                }
                if self.jac_dirty || self.lu.is_none() || self.lu_scale != scale {
                    self.iter_matrix.set_combination(scale, &self.mass, -1.0, &self.jac);
                    match self.iter_matrix.lu_factor() {
                        Ok(lu) => {
                            self.stats.factorizations += 1;
                            self.lu = Some(lu);
                            self.lu_scale = scale;
                            self.jac_dirty = false;
                        }
                        Err(err) => {
                            if !fresh_used {
                                self.have_jac = false;
                                continue;
                            }
                            break Err(format!("iteration matrix singular: {err}"));
                        }
                    }
                }

                y_new.copy_from_slice(&y_pred);
                let lu = self.lu.as_ref().unwrap();
                let sys = &self.sys;
                let result = newton::newton_solve(
                    &mut y_new,
                    |y, out| {
                        for i in 0..n {
                            scratch_a[i] = y[i] - phi[i];
                        }
                        sys.mass_apply(&scratch_a, &mut scratch_b);
                        sys.rhs(t_new, y, tau, out)?;
                        for i in 0..n {
                            out[i] = scale * scratch_b[i] - out[i];
                        }
                        Ok(())
                    },
                    |r, delta| {
                        delta.copy_from_slice(r);
                        lu.solve_in_place(delta);
                        Ok(())
                    },
                    &newton_weights,
                    &self.opts.newton,
                );
                match result {
                    Ok(report) => {
                        self.stats.newton_iterations += report.iterations;
                        // A sluggish solve means the reused Jacobian has
                        // drifted; refresh it before the next step.
                        if report.iterations > 4 {
                            self.have_jac = false;
                        }
                        break Ok(report);
                    }
                    Err(fail) => {
                        self.stats.newton_failures += 1;
                        if !fresh_used {
                            self.have_jac = false;
                            continue;
                        }
                        break Err(format!(
                            "newton failed ({:?}) after {} iterations, norm {:.3e}",
                            fail.kind, fail.iterations, fail.last_norm
                        ));
                    }
                }
            };

            let report = match outcome {
                Ok(report) => report,
                Err(reason) => {
                    if let Some(abort) = self.register_failure(tau, k, None, &reason) {
                        return StepOutcome::Aborted(abort);
                    }
                    continue;
                }
            };

            // Local error estimate and step acceptance.
            let mut est = 0.0;
            if self.opts.fixed_tau.is_none() {
                let y_n = &self.history[0].1;
                for i in 0..n {
                    newton_weights[i] = self.opts.atol
                        + self.opts.rtol * y_n[i].abs().max(y_new[i].abs());
                }
                for i in 0..n {
                    scratch_a[i] = y_new[i] - y_pred[i];
                }
                let c_k = (kappa * gk + 1.0 / (k as f64 + 1.0)).abs()
                    * self.uniform_spacing_factor(t_new, tau, n_pred);
                est = c_k * newton::weighted_rms(&scratch_a, &newton_weights);
                if !est.is_finite() || est > 1.0 {
                    let reason = format!("error test failed: est {est:.3e}");
                    self.stats.rejected += 1;
                    if let Some(abort) = self.register_failure(tau, k, Some(est), &reason) {
                        return StepOutcome::Aborted(abort);
                    }
                    continue;
                }
            }

            // Accepted: commit internal variables, then update history.
            if let Err(err) = self.sys.commit(t_new, &y_new, tau) {
                return StepOutcome::Aborted(AbortInfo {
                    t_h: t_new,
                    soc: None,
                    tau,
                    order: k,
                    consecutive_failures: self.consecutive_min_failures,
                    reason: format!("internal variable commit failed: {err}"),
                });
            }
            self.consecutive_min_failures = 0;
            self.attempt_failures = 0;
            self.stats.accepted += 1;

            if self.opts.fixed_tau.is_none() {
                self.select_order_and_step(k, tau, est, &y_new, t_new, &newton_weights);
            }

            self.history.push_front((t_new, y_new.clone()));
            while self.history.len() > self.opts.max_order + 2 {
                self.history.pop_back();
            }

            return StepOutcome::Accepted(StepInfo {
                t: t_new,
                tau,
                order: k,
                newton_iters: report.iterations,
                error_estimate: est,
            });
        }
    }

    /// Error-estimate comparison at orders k-1, k, k+1; picks the order with
    /// the largest admissible step growth and rescales tau.
    fn select_order_and_step(
        &mut self,
        k: usize,
        tau: f64,
        est_k: f64,
        y_new: &[f64],
        t_new: f64,
        weights: &[f64],
    ) {
        let n = y_new.len();
        let growth = |est: f64, order: usize| -> f64 {
            let e = est.max(1e-16);
            (1.0 / e).powf(1.0 / (order as f64 + 1.0))
        };
        let est_at = |n_pts: usize, order: usize| -> f64 {
            // Extrapolate through the n_pts most recent accepted states and
            // compare with y_new; the mismatch is the order n_pts-1
            // difference entering the order-(n_pts-1) error constant.
            let nodes: Vec<f64> = (0..n_pts).map(|j| self.history[j].0).collect();
            let pv = value_weights(&nodes, t_new);
            let mut acc = vec![0.0; n];
            for j in 0..n_pts {
                let yj = &self.history[j].1;
                for i in 0..n {
                    acc[i] += pv[j] * yj[i];
                }
            }
            for i in 0..n {
                acc[i] = y_new[i] - acc[i];
            }
            let kappa = if self.opts.bdf_mode { 0.0 } else { KAPPA[order] };
            let c = (kappa * gamma_k(order) + 1.0 / (order as f64 + 1.0)).abs()
                * self.uniform_spacing_factor(t_new, tau, n_pts);
            c * newton::weighted_rms(&acc, weights)
        };

        let mut best_order = k;
        let mut best_growth = growth(est_k, k);
        if self.opts.fixed_order.is_none() {
            if k > 1 && self.history.len() >= k {
                let est_down = est_at(k, k - 1);
                let g = growth(est_down, k - 1);
                if g > best_growth {
                    best_growth = g;
                    best_order = k - 1;
                }
            }
            if k < self.opts.max_order && self.history.len() >= k + 2 {
                let est_up = est_at(k + 2, k + 1);
                let g = growth(est_up, k + 1);
                if g > best_growth {
                    best_growth = g;
                    best_order = k + 1;
                }
            }
        }
        self.order = best_order;
        let factor = (0.9 * best_growth).clamp(0.2, 2.0);
        self.tau = (tau * factor).clamp(self.opts.tau_min, self.opts.tau_max);
    }

    /// Shrinks the step after a failed attempt: the first rejection retries
    /// the same order at the est-informed optimal step, later ones halve,
    /// and persistent trouble falls back to order 1. Returns the abort
    /// report after three consecutive failures that could not reduce the
    /// step any further.
    fn register_failure(
        &mut self,
        tau: f64,
        k: usize,
        est: Option<f64>,
        reason: &str,
    ) -> Option<AbortInfo> {
        let at_floor = self.opts.fixed_tau.is_some() || tau <= self.opts.tau_min * (1.0 + 1e-12);
        if at_floor {
            self.consecutive_min_failures += 1;
            if self.consecutive_min_failures >= 3 {
                return Some(AbortInfo {
                    t_h: self.t(),
                    soc: None,
                    tau,
                    order: self.effective_order(),
                    consecutive_failures: self.consecutive_min_failures,
                    reason: reason.to_string(),
                });
            }
        } else {
            self.consecutive_min_failures = 0;
        }
        self.attempt_failures += 1;
        let factor = match (self.attempt_failures, est) {
            (1, Some(e)) => (0.9 * e.powf(-1.0 / (k as f64 + 1.0))).clamp(0.1, 0.7),
            (1, None) => 0.3,
            _ => 0.5,
        };
        if self.attempt_failures >= 3 {
            // The history the high orders lean on is not trustworthy here.
            self.order = 1;
        }
        self.tau = (tau * factor).max(self.opts.tau_min);
        self.have_jac = false;
        None
    }
}
