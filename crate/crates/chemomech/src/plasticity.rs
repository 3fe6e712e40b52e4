//! SEI inelasticity: Mandel stress, yield function, rate-independent radial
//! return, rate-dependent (viscoplastic) increment, and the exponential-map
//! commit of the plastic deformation gradient.
//!
//! The return mapping is formulated in logarithmic elastic strain space,
//! where isotropic finite-strain plasticity reduces exactly to the
//! small-strain radial return. All stress-like quantities are in E_P units,
//! times in hours.

use crate::config::PlasticityMode;
use crate::constitutive::DimlessParams;
use crate::kinematics::{elastic_part, hencky_strain, stiffness_apply, stiffness_apply_diag, ElasticSplit};
use crate::tensor::{spectral_apply, Tensor2};
use crate::{ModelError, Result};

/// Per-quadrature-point internal state of the SEI.
#[derive(Clone, Copy, Debug)]
pub struct InternalState {
    /// Plastic deformation gradient, unimodular.
    pub f_pl: Tensor2,
    /// Accumulated equivalent plastic strain, non-decreasing.
    pub eps_pl_eq: f64,
}

impl InternalState {
    /// Virgin state F_pl = Id, eps_pl_eq = 0.
    pub fn identity() -> Self {
        InternalState {
            f_pl: Tensor2::identity(),
            eps_pl_eq: 0.0,
        }
    }
}

/// Outcome of a return map: the admissible elastic strain plus the plastic
/// increment needed to commit the internal state.
#[derive(Clone, Copy, Debug)]
pub struct ReturnMapResult {
    /// Admissible logarithmic elastic strain.
    pub e_el_admissible: Tensor2,
    /// Plastic multiplier increment over the step.
    pub delta_eps: f64,
    /// Radial flow direction; unit norm when yielded, zero otherwise.
    pub flow_direction: Tensor2,
    /// Whether the trial state lay outside the yield surface.
    pub yielded: bool,
}

impl ReturnMapResult {
    fn elastic(e_trial: Tensor2) -> Self {
        ReturnMapResult {
            e_el_admissible: e_trial,
            delta_eps: 0.0,
            flow_direction: Tensor2::ZERO,
            yielded: false,
        }
    }
}

/// Mandel stress M = C_S[E_el,log] = lam_S tr(E) Id + 2 G_S E.
pub fn mandel_stress(e_el_log: &Tensor2, params: &DimlessParams) -> Tensor2 {
    stiffness_apply(e_el_log, params.lam_s, params.g_s)
}

/// Yield function F_Y = ||M^dev|| - sqrt(2/3) sigma_Y. The sqrt(2/3) rescale
/// makes a uniaxial tensile state reach the surface exactly at sigma_Y.
pub fn yield_function(m: &Tensor2, params: &DimlessParams) -> f64 {
    m.dev().norm() - params.yield_radius()
}

/// Rate-independent radial return in log-strain space. Ideal plasticity:
/// delta_eps = (||M_tr^dev|| - sqrt(2/3) sigma_Y) / (2 G_S) when yielded.
pub fn return_map_rate_independent(e_trial: &Tensor2, params: &DimlessParams) -> ReturnMapResult {
    let m_dev = mandel_stress(e_trial, params).dev();
    let norm = m_dev.norm();
    let f_y = norm - params.yield_radius();
    if f_y <= 0.0 {
        return ReturnMapResult::elastic(*e_trial);
    }
    let nu = m_dev.scale(1.0 / norm);
    let delta_eps = f_y / (2.0 * params.g_s);
    ReturnMapResult {
        e_el_admissible: e_trial.sub(&nu.scale(delta_eps)),
        delta_eps,
        flow_direction: nu,
        yielded: true,
    }
}

/// Solves the implicit overstress equation for the viscoplastic increment:
///
///   delta = tau * eps_dot0 * ((n_tr - 2 G_S delta - r_Y) / s_star)^beta
///
/// on [0, delta_ri]. The residual is monotone, so a safeguarded Newton with
/// bisection fallback converges unconditionally; beta near 3 makes the
/// residual stiff at the upper bracket edge, hence the safeguard.
fn solve_viscoplastic_delta(norm_dev_trial: f64, tau_n: f64, params: &DimlessParams) -> Result<f64> {
    let r_y = params.yield_radius();
    let s_star = params.overstress_scale();
    let two_g = 2.0 * params.g_s;
    let delta_ri = (norm_dev_trial - r_y) / two_g;
    debug_assert!(delta_ri > 0.0);
    let coeff = tau_n * params.eps_dot0;
    if !(coeff.is_finite() && s_star > 0.0 && params.beta > 0.0) {
        return Err(ModelError::ViscoplasticSolveFailure(format!(
            "non-positive parameters: tau*eps_dot0 = {coeff}, s_star = {s_star}, beta = {}",
            params.beta
        )));
    }
    if coeff == 0.0 {
        return Ok(0.0);
    }

    let h = |x: f64| -> f64 {
        let over = (norm_dev_trial - two_g * x - r_y).max(0.0);
        x - coeff * (over / s_star).powf(params.beta)
    };
    let h_prime = |x: f64| -> f64 {
        let over = (norm_dev_trial - two_g * x - r_y).max(0.0);
        1.0 + coeff * params.beta * (two_g / s_star) * (over / s_star).powf(params.beta - 1.0)
    };

    // h(0) < 0 < h(delta_ri) = delta_ri; bracket is guaranteed.
    let mut lo = 0.0;
    let mut hi = delta_ri;
    let tol = 1e-12 * delta_ri + 1e-16;
    // Explicit-step guess, clamped into the bracket.
    let mut x = (coeff * ((norm_dev_trial - r_y) / s_star).powf(params.beta)).min(0.5 * delta_ri);
    for _ in 0..200 {
        let hx = h(x);
        if !hx.is_finite() {
            return Err(ModelError::ViscoplasticSolveFailure(format!(
                "residual not finite at delta = {x}"
            )));
        }
        if hx > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        if hi - lo <= tol {
            return Ok(0.5 * (lo + hi));
        }
        let d = h_prime(x);
        let newton = x - hx / d;
        x = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    Err(ModelError::ViscoplasticSolveFailure(format!(
        "no convergence: bracket [{lo}, {hi}], trial norm {norm_dev_trial}"
    )))
}

/// Rate-dependent return map: the plastic increment over a step of length
/// tau_n follows the overstress power law instead of enforcing consistency.
/// delta_eps < delta_ri, so stress remains above the yield surface
/// (stress overrelaxation); tau_n -> infinity recovers the rate-independent
/// return.
pub fn viscoplastic_increment(
    e_trial: &Tensor2,
    tau_n: f64,
    params: &DimlessParams,
) -> Result<ReturnMapResult> {
    let m_dev = mandel_stress(e_trial, params).dev();
    let norm = m_dev.norm();
    if norm - params.yield_radius() <= 0.0 {
        return Ok(ReturnMapResult::elastic(*e_trial));
    }
    let nu = m_dev.scale(1.0 / norm);
    let delta_eps = solve_viscoplastic_delta(norm, tau_n, params)?;
    Ok(ReturnMapResult {
        e_el_admissible: e_trial.sub(&nu.scale(delta_eps)),
        delta_eps,
        flow_direction: nu,
        yielded: true,
    })
}

/// SEI stress projector: composes the elastic split with the mode's return
/// map and returns the admissible stress C_S[E_el,log]. The committed
/// internal state stays frozen; only `commit_internal` advances it.
pub fn projector(
    grad0_u_s: &Tensor2,
    f_pl_committed: &Tensor2,
    _eps_pl_eq_committed: f64,
    tau_n: f64,
    mode: PlasticityMode,
    params: &DimlessParams,
) -> Result<Tensor2> {
    let f = Tensor2::identity().add(grad0_u_s);
    let f_el = elastic_part(&f, ElasticSplit::Sei { f_pl: f_pl_committed })?;
    let e_trial = hencky_strain(&f_el)?;
    let result = match mode {
        PlasticityMode::Elastic => ReturnMapResult::elastic(e_trial),
        PlasticityMode::RateIndependent => return_map_rate_independent(&e_trial, params),
        PlasticityMode::Viscoplastic => viscoplastic_increment(&e_trial, tau_n, params)?,
    };
    Ok(mandel_stress(&result.e_el_admissible, params))
}

/// Exponential-map update of the internal state from a converged step.
/// The flow direction is trace-free, so det F_pl is preserved exactly by
/// det(exp(A)) = exp(tr A).
pub fn commit_internal(
    state: &InternalState,
    result: &ReturnMapResult,
    _tau_n: f64,
) -> Result<InternalState> {
    if result.delta_eps == 0.0 {
        return Ok(*state);
    }
    let increment = result.flow_direction.scale(result.delta_eps);
    let exp_inc = spectral_apply(&increment, f64::exp)?;
    Ok(InternalState {
        f_pl: exp_inc.matmul(&state.f_pl),
        eps_pl_eq: state.eps_pl_eq + result.delta_eps,
    })
}

/// Diagonal return-map result used on the radial-symmetry fast path, where
/// F, F_pl, and all strains share the (r, theta, phi) axes.
#[derive(Clone, Copy, Debug)]
pub struct DiagReturnMap {
    pub e_adm: [f64; 3],
    pub delta_eps: f64,
    pub nu: [f64; 3],
    pub yielded: bool,
}

/// Trial log elastic strain for diagonal F and F_pl.
#[inline]
pub fn trial_log_strain_diag(f: [f64; 3], f_pl: [f64; 3]) -> Result<[f64; 3]> {
    let mut e = [0.0; 3];
    for i in 0..3 {
        let fe = f[i] / f_pl[i];
        if !(fe > 0.0 && fe.is_finite()) {
            return Err(ModelError::OrientationViolation(format!(
                "elastic stretch {fe} on axis {i}"
            )));
        }
        e[i] = fe.ln();
    }
    Ok(e)
}

/// Diagonal fast path of the mode-dependent return map.
pub fn return_map_diag(
    e_trial: [f64; 3],
    tau_n: f64,
    mode: PlasticityMode,
    params: &DimlessParams,
) -> Result<DiagReturnMap> {
    let elastic = DiagReturnMap {
        e_adm: e_trial,
        delta_eps: 0.0,
        nu: [0.0; 3],
        yielded: false,
    };
    if mode == PlasticityMode::Elastic {
        return Ok(elastic);
    }
    let m = stiffness_apply_diag(e_trial, params.lam_s, params.g_s);
    let p = (m[0] + m[1] + m[2]) / 3.0;
    let dev = [m[0] - p, m[1] - p, m[2] - p];
    let norm = (dev[0] * dev[0] + dev[1] * dev[1] + dev[2] * dev[2]).sqrt();
    if norm - params.yield_radius() <= 0.0 {
        return Ok(elastic);
    }
    let nu = [dev[0] / norm, dev[1] / norm, dev[2] / norm];
    let delta_eps = match mode {
        PlasticityMode::Elastic => unreachable!(),
        PlasticityMode::RateIndependent => (norm - params.yield_radius()) / (2.0 * params.g_s),
        PlasticityMode::Viscoplastic => solve_viscoplastic_delta(norm, tau_n, params)?,
    };
    Ok(DiagReturnMap {
        e_adm: [
            e_trial[0] - delta_eps * nu[0],
            e_trial[1] - delta_eps * nu[1],
            e_trial[2] - delta_eps * nu[2],
        ],
        delta_eps,
        nu,
        yielded: true,
    })
}

/// Diagonal exponential-map commit: F_pl_i <- exp(delta_eps nu_i) F_pl_i.
#[inline]
pub fn commit_diag(f_pl: [f64; 3], eps_pl_eq: f64, rm: &DiagReturnMap) -> ([f64; 3], f64) {
    if rm.delta_eps == 0.0 {
        return (f_pl, eps_pl_eq);
    }
    (
        [
            (rm.delta_eps * rm.nu[0]).exp() * f_pl[0],
            (rm.delta_eps * rm.nu[1]).exp() * f_pl[1],
            (rm.delta_eps * rm.nu[2]).exp() * f_pl[2],
        ],
        eps_pl_eq + rm.delta_eps,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitutive::tests::test_params;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Random unit-norm symmetric trace-free tensor.
    fn random_flow_direction(rng: &mut ChaCha8Rng) -> Tensor2 {
        loop {
            let d = [
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ];
            let off = [
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ];
            let t = Tensor2::symmetric(d, off).dev();
            let n = t.norm();
            if n > 0.1 {
                return t.scale(1.0 / n);
            }
        }
    }

    /// Trial strain whose deviatoric Mandel norm is exactly `norm_dev`,
    /// plus a random hydrostatic part.
    fn trial_with_dev_norm(norm_dev: f64, rng: &mut ChaCha8Rng, params: &DimlessParams) -> Tensor2 {
        let dir = random_flow_direction(rng);
        let e_dev = dir.scale(norm_dev / (2.0 * params.g_s));
        let vol: f64 = rng.gen_range(-1e-3..1e-3);
        e_dev.add(&Tensor2::diag(vol, vol, vol))
    }

    #[test]
    fn mandel_stress_examples() {
        let params = test_params();
        assert_eq!(mandel_stress(&Tensor2::ZERO, &params).norm(), 0.0);

        let hydro = Tensor2::diag(0.02, 0.02, 0.02);
        let m = mandel_stress(&hydro, &params);
        assert!(m.dev().norm() < 1e-16);

        // SEI constants in Pa: E = diag(0.01, 0, 0) -> diag(10.8, 3.6, 3.6) MPa.
        let mut pa = params.clone();
        let (lam_s, g_s) = crate::kinematics::lame_constants(0.9e9, 0.25);
        pa.lam_s = lam_s;
        pa.g_s = g_s;
        let m = mandel_stress(&Tensor2::diag(0.01, 0.0, 0.0), &pa);
        assert!((m.m[0][0] - 10.8e6).abs() < 1.0);
        assert!((m.m[1][1] - 3.6e6).abs() < 1.0);
        assert!((m.m[2][2] - 3.6e6).abs() < 1.0);
    }

    #[test]
    fn yield_function_examples() {
        let params = test_params();
        let r_y = params.yield_radius();

        let m = Tensor2::diag(0.37, 0.37, 0.37);
        assert!((yield_function(&m, &params) + r_y).abs() < 1e-16);

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let dir = random_flow_direction(&mut rng);
        assert!(yield_function(&dir.scale(r_y), &params).abs() < 1e-15);

        // Uniaxial tensile state at sigma_Y sits exactly on the surface:
        // dev diag(s,0,0) has norm s sqrt(2/3).
        let m = Tensor2::diag(params.sigma_y, 0.0, 0.0);
        assert!(yield_function(&m, &params).abs() < 1e-15 * params.sigma_y);
    }

    #[test]
    fn rate_independent_examples() {
        let params = test_params();
        let mut rng = ChaCha8Rng::seed_from_u64(3);

        // Elastic trial passes through.
        let e = trial_with_dev_norm(0.5 * params.yield_radius(), &mut rng, &params);
        let rm = return_map_rate_independent(&e, &params);
        assert!(!rm.yielded);
        assert_eq!(rm.delta_eps, 0.0);
        assert!(rm.e_el_admissible.sub(&e).norm() == 0.0);
        assert_eq!(rm.flow_direction.norm(), 0.0);

        // Trial at twice the yield radius.
        let e = trial_with_dev_norm(2.0 * params.yield_radius(), &mut rng, &params);
        let rm = return_map_rate_independent(&e, &params);
        assert!(rm.yielded);
        let expected = params.yield_radius() / (2.0 * params.g_s);
        assert!((rm.delta_eps - expected).abs() <= 1e-12 * expected);
        assert!((rm.flow_direction.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rate_independent_kkt_against_projection_oracle() {
        let params = test_params();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..300 {
            let scale: f64 = rng.gen_range(0.1..6.0);
            let e = trial_with_dev_norm(scale * params.yield_radius(), &mut rng, &params);
            let rm = return_map_rate_independent(&e, &params);

            let f_y = yield_function(&mandel_stress(&rm.e_el_admissible, &params), &params);
            assert!(f_y <= 1e-10 * params.sigma_y, "F_Y = {f_y}");
            assert!(rm.delta_eps >= 0.0);
            assert!((f_y * rm.delta_eps).abs() <= 1e-10 * params.sigma_y);

            if rm.yielded {
                // Independent oracle: smallest admissible increment along the
                // trial flow direction, found by bisection on F_Y alone.
                let m_dev = mandel_stress(&e, &params).dev();
                let nu = m_dev.scale(1.0 / m_dev.norm());
                let admissible = |d: f64| {
                    let ea = e.sub(&nu.scale(d));
                    yield_function(&mandel_stress(&ea, &params), &params) <= 0.0
                };
                // Admissibility along the ray is an interval around the
                // deviator-annihilating distance; bracket with that distance
                // so bisection finds the interval's lower edge.
                let (mut lo, mut hi) = (0.0, m_dev.norm() / (2.0 * params.g_s));
                assert!(admissible(hi));
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    if admissible(mid) {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                assert!(
                    (rm.delta_eps - hi).abs() <= 1e-9 * (1.0 + rm.delta_eps),
                    "{} vs oracle {hi}",
                    rm.delta_eps
                );
            }
        }
    }

    #[test]
    fn viscoplastic_below_yield_is_identity() {
        let params = test_params();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let e = trial_with_dev_norm(0.9 * params.yield_radius(), &mut rng, &params);
        let rm = viscoplastic_increment(&e, 1e-3, &params).unwrap();
        assert!(!rm.yielded);
        assert_eq!(rm.delta_eps, 0.0);
    }

    #[test]
    fn viscoplastic_matches_bisection_oracle() {
        let params = test_params();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..200 {
            let scale: f64 = rng.gen_range(1.05..8.0);
            let tau: f64 = 10f64.powf(rng.gen_range(-8.0..0.0));
            let e = trial_with_dev_norm(scale * params.yield_radius(), &mut rng, &params);
            let rm = viscoplastic_increment(&e, tau, &params).unwrap();

            let n_tr = mandel_stress(&e, &params).dev().norm();
            let r_y = params.yield_radius();
            let s_star = params.overstress_scale();
            let h = |x: f64| {
                let over = (n_tr - 2.0 * params.g_s * x - r_y).max(0.0);
                x - tau * params.eps_dot0 * (over / s_star).powf(params.beta)
            };
            let (mut lo, mut hi) = (0.0, (n_tr - r_y) / (2.0 * params.g_s));
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if h(mid) > 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let oracle = 0.5 * (lo + hi);
            assert!(
                (rm.delta_eps - oracle).abs() <= 1e-9 * (1.0 + oracle),
                "{} vs oracle {oracle} at tau {tau}",
                rm.delta_eps
            );
            // Stress overrelaxation: the admissible state stays above yield.
            let f_y = yield_function(&mandel_stress(&rm.e_el_admissible, &params), &params);
            assert!(f_y >= -1e-12 * params.sigma_y);
        }
    }

    #[test]
    fn viscoplastic_monotonicity_grid() {
        let params = test_params();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let e = trial_with_dev_norm(3.0 * params.yield_radius(), &mut rng, &params);

        // Monotone increasing in tau.
        let mut prev = -1.0;
        for exp in -6..=0 {
            let tau = 10f64.powi(exp);
            let d = viscoplastic_increment(&e, tau, &params).unwrap().delta_eps;
            assert!(d > prev, "tau = {tau}: {d} !> {prev}");
            prev = d;
        }

        // Monotone increasing in eps_dot0.
        let mut prev = -1.0;
        for &rate in &[0.036, 0.36, 3.6, 36.0] {
            let mut p = params.clone();
            p.eps_dot0 = rate;
            let d = viscoplastic_increment(&e, 1e-3, &p).unwrap().delta_eps;
            assert!(d > prev, "eps_dot0 = {rate}: {d} !> {prev}");
            prev = d;
        }

        // Monotone decreasing in sigma_Y (same trial stays above yield).
        let mut prev = f64::INFINITY;
        for &factor in &[0.5, 0.75, 1.0, 1.25] {
            let mut p = params.clone();
            p.sigma_y = params.sigma_y * factor;
            p.sigma_y_star = p.sigma_y;
            let d = viscoplastic_increment(&e, 1e-3, &p).unwrap().delta_eps;
            assert!(d < prev, "sigma_Y factor {factor}: {d} !< {prev}");
            prev = d;
        }
    }

    #[test]
    fn viscoplastic_limits() {
        // Parameters chosen so the (tau eps_dot0)^(-1/beta) approach rate
        // reaches 1e-6 relative by tau eps_dot0 = 1e6.
        let mut params = test_params();
        params.g_s = 0.5;
        params.lam_s = 0.5;
        params.sigma_y = 1e-2;
        params.sigma_y_star = 1e-4;
        params.rescale_sigma_y_star = false;
        params.beta = 2.0;
        params.eps_dot0 = 1.0;
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let e = trial_with_dev_norm(120.0 * params.yield_radius(), &mut rng, &params);
        let ri = return_map_rate_independent(&e, &params);

        let rm = viscoplastic_increment(&e, 1e6, &params).unwrap();
        assert!(
            (rm.delta_eps - ri.delta_eps).abs() <= 1e-6 * ri.delta_eps,
            "{} vs {}",
            rm.delta_eps,
            ri.delta_eps
        );

        // tau -> 0: the flow law is linear in tau at leading order, so the
        // increment matches tau eps_dot0 (overstress / s*)^beta and nearly
        // the full overstress persists.
        let tau = 1e-15;
        let rm = viscoplastic_increment(&e, tau, &params).unwrap();
        let n_tr = mandel_stress(&e, &params).dev().norm();
        let predicted = tau
            * params.eps_dot0
            * ((n_tr - params.yield_radius()) / params.overstress_scale()).powf(params.beta);
        assert!(
            (rm.delta_eps - predicted).abs() <= 1e-6 * predicted,
            "{} vs leading order {predicted}",
            rm.delta_eps
        );
        let f_y = yield_function(&mandel_stress(&rm.e_el_admissible, &params), &params);
        assert!(f_y > 0.9 * yield_function(&mandel_stress(&e, &params), &params));
    }

    #[test]
    fn projector_modes() {
        let params = test_params();
        let id = Tensor2::identity();

        // Elastic state with F_pl = Id matches the direct elastic stress.
        let grad = Tensor2::diag(2e-4, -1e-4, -1e-4);
        let s = projector(&grad, &id, 0.0, 1e-3, PlasticityMode::Elastic, &params).unwrap();
        let f = id.add(&grad);
        let e = hencky_strain(&f).unwrap();
        let direct = mandel_stress(&e, &params);
        assert!(s.sub(&direct).norm() <= 1e-14 * (1.0 + direct.norm()));

        // Plastic mode on a yielded state lands on the yield surface.
        let grad = Tensor2::diag(0.05, -0.02, -0.02);
        let s = projector(&grad, &id, 0.0, 1e-3, PlasticityMode::RateIndependent, &params).unwrap();
        assert!(yield_function(&s, &params).abs() <= 1e-10 * params.sigma_y);

        // Smaller eps_dot0 leaves larger overstress at fixed trial and tau.
        let mut slow = params.clone();
        slow.eps_dot0 = 0.36;
        let s_fast = projector(&grad, &id, 0.0, 1e-3, PlasticityMode::Viscoplastic, &params).unwrap();
        let s_slow = projector(&grad, &id, 0.0, 1e-3, PlasticityMode::Viscoplastic, &slow).unwrap();
        assert!(yield_function(&s_slow, &params) > yield_function(&s_fast, &params));
    }

    #[test]
    fn commit_examples() {
        let params = test_params();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let state = InternalState::identity();

        // delta_eps = 0 leaves the state untouched.
        let rm = ReturnMapResult::elastic(Tensor2::diag(0.1, 0.0, 0.0));
        let next = commit_internal(&state, &rm, 1e-3).unwrap();
        assert!(next.f_pl.sub(&state.f_pl).norm() == 0.0);
        assert_eq!(next.eps_pl_eq, 0.0);

        // Determinant preservation for random flow directions.
        for _ in 0..100 {
            let nu = random_flow_direction(&mut rng);
            let rm = ReturnMapResult {
                e_el_admissible: Tensor2::ZERO,
                delta_eps: rng.gen_range(0.0..0.1),
                flow_direction: nu,
                yielded: true,
            };
            let next = commit_internal(&state, &rm, 1e-3).unwrap();
            assert!((next.f_pl.det() - 1.0).abs() <= 1e-12);
        }

        // Additive accumulation of eps_pl_eq.
        let nu = random_flow_direction(&mut rng);
        let rm = ReturnMapResult {
            e_el_admissible: Tensor2::ZERO,
            delta_eps: 0.02,
            flow_direction: nu,
            yielded: true,
        };
        let s1 = commit_internal(&state, &rm, 1e-3).unwrap();
        let s2 = commit_internal(&s1, &rm, 1e-3).unwrap();
        assert!((s2.eps_pl_eq - 0.04).abs() < 1e-16);
        let _ = params;
    }

    #[test]
    fn determinant_drift_over_many_commits() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mut state = InternalState::identity();
        for _ in 0..10_000 {
            let nu = random_flow_direction(&mut rng);
            let rm = ReturnMapResult {
                e_el_admissible: Tensor2::ZERO,
                delta_eps: rng.gen_range(0.0..1e-3),
                flow_direction: nu,
                yielded: true,
            };
            state = commit_internal(&state, &rm, 1e-3).unwrap();
        }
        assert!(
            (state.f_pl.det() - 1.0).abs() <= 1e-8,
            "det drift {}",
            state.f_pl.det() - 1.0
        );
        assert!(state.eps_pl_eq > 0.0);
    }

    #[test]
    fn dissipation_nonnegative() {
        let params = test_params();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let scale: f64 = rng.gen_range(0.5..5.0);
            let e = trial_with_dev_norm(scale * params.yield_radius(), &mut rng, &params);
            for rm in [
                return_map_rate_independent(&e, &params),
                viscoplastic_increment(&e, 1e-3, &params).unwrap(),
            ] {
                let m = mandel_stress(&rm.e_el_admissible, &params);
                let dissipation = m.ddot(&rm.flow_direction.scale(rm.delta_eps));
                assert!(dissipation >= 0.0, "dissipation {dissipation}");
            }
        }
    }

    #[test]
    fn diag_fast_path_matches_general() {
        let params = test_params();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..300 {
            let f = [
                rng.gen_range(0.9..1.2),
                rng.gen_range(0.9..1.2),
                rng.gen_range(0.9..1.2),
            ];
            let q: f64 = rng.gen_range(0.95..1.05);
            let f_pl = [q, 1.0 / q, 1.0];
            let tau: f64 = 10f64.powf(rng.gen_range(-6.0..-1.0));
            let e_diag = trial_log_strain_diag(f, f_pl).unwrap();
            let e_full = Tensor2::diag(e_diag[0], e_diag[1], e_diag[2]);
            for (mode, general) in [
                (
                    PlasticityMode::RateIndependent,
                    return_map_rate_independent(&e_full, &params),
                ),
                (
                    PlasticityMode::Viscoplastic,
                    viscoplastic_increment(&e_full, tau, &params).unwrap(),
                ),
            ] {
                let diag = return_map_diag(e_diag, tau, mode, &params).unwrap();
                assert_eq!(diag.yielded, general.yielded);
                assert!((diag.delta_eps - general.delta_eps).abs() <= 1e-14 * (1.0 + general.delta_eps));
                for i in 0..3 {
                    assert!(
                        (diag.e_adm[i] - general.e_el_admissible.m[i][i]).abs() <= 1e-13,
                        "axis {i}"
                    );
                }
                // Commit agreement.
                let (fp, ee) = commit_diag(f_pl, 0.5, &diag);
                let st = InternalState {
                    f_pl: Tensor2::diag(f_pl[0], f_pl[1], f_pl[2]),
                    eps_pl_eq: 0.5,
                };
                let gen_next = commit_internal(&st, &general, tau).unwrap();
                for i in 0..3 {
                    assert!((fp[i] - gen_next.f_pl.m[i][i]).abs() <= 1e-13 * (1.0 + fp[i]));
                }
                assert!((ee - gen_next.eps_pl_eq).abs() < 1e-15);
            }
        }
    }
}
