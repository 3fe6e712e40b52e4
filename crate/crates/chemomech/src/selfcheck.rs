//! Runtime self-checks behind the CLI `check` subcommand: every hand-written
//! numerical kernel is verified against an independent oracle (central finite
//! differences, bisection, dense Gaussian elimination, truncated series,
//! measured convergence rates). All checks are deterministic for a given
//! seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{PlasticityMode, ScenarioConfig, StrainMode};
use crate::constitutive::{
    chemical_potential, elastic_energy_sei, free_energy_particle, piola_particle_gsv, piola_sei,
    DimlessParams, SeiStrainMode,
};
use crate::driver::run_scenario;
use crate::kinematics::lame_constants;
use crate::linalg::BandedMatrix;
use crate::ndf::{DaeSystem, Integrator, NdfOptions, StepOutcome};
use crate::ocv::OcvCurve;
use crate::plasticity::{
    commit_diag, return_map_diag, return_map_rate_independent, trial_log_strain_diag,
};
use crate::tensor::{spectral_apply, Tensor2};
use crate::Result;

/// Outcome of one named check.
#[derive(Clone, Debug)]
pub struct CheckReport {
    pub name: &'static str,
    pub passed: bool,
    pub details: String,
}

impl CheckReport {
    fn from(name: &'static str, result: std::result::Result<String, String>) -> Self {
        match result {
            Ok(details) => CheckReport {
                name,
                passed: true,
                details,
            },
            Err(details) => CheckReport {
                name,
                passed: false,
                details,
            },
        }
    }
}

fn fail(err: impl std::fmt::Display) -> String {
    format!("errored: {err}")
}

/// Particle material at the repository defaults.
fn particle_params() -> (DimlessParams, OcvCurve) {
    let config = ScenarioConfig::for_modes(StrainMode::Log, PlasticityMode::Elastic);
    (config.dimless_params(), crate::config::synthetic_anode_ocv())
}

/// SEI material with an explicit rate law for the return-map checks.
fn sei_params(beta: f64, sigma_y_star: f64, rescale: bool, eps_dot0: f64) -> DimlessParams {
    let (lam_p, g_p) = lame_constants(1.0, 0.28);
    let (lam_s, g_s) = lame_constants(0.01, 0.25);
    DimlessParams {
        lam_p,
        g_p,
        lam_s,
        g_s,
        a_swell: 3.0,
        chi: 9.0,
        fo: 14.4,
        sigma_y: 5.492e-4,
        sigma_y_star,
        rescale_sigma_y_star: rescale,
        beta,
        eps_dot0,
        l_s: 0.1,
        stress_scale_pa: 90.13e9,
        faraday: 96485.33212,
    }
}

/// Random deformation gradient I + amp * (uniform perturbation), swollen by
/// an isotropic stretch.
fn random_f(rng: &mut ChaCha8Rng, stretch: f64, amp: f64) -> Tensor2 {
    let mut m = [[0.0; 3]; 3];
    for (i, row) in m.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = if i == j { stretch } else { 0.0 } + amp * rng.gen_range(-1.0..1.0);
        }
    }
    Tensor2::from_rows(m)
}

/// Largest relative error of the particle stress and chemical potential
/// against central finite differences of the free energy over `n` random
/// states.
pub fn particle_fd_max_rel_error(seed: u64, n: usize) -> Result<f64> {
    let (params, ocv) = particle_params();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x70617274);
    let mut worst = 0.0f64;
    for _ in 0..n {
        let c = rng.gen_range(0.05..0.95);
        let lam = (1.0 + params.a_swell * c).cbrt();
        let f = random_f(&mut rng, lam, 0.02 * lam);
        let p = piola_particle_gsv(c, &f, &params)?;
        let scale = p.max_abs().max(1e-6);
        // P = d(psi_el)/dF at fixed c, in E_P units.
        let h_f = 1e-6 * lam;
        for i in 0..3 {
            for j in 0..3 {
                let mut fp = f;
                let mut fm = f;
                fp.m[i][j] += h_f;
                fm.m[i][j] -= h_f;
                let wp = crate::constitutive::elastic_energy_particle(c, &fp, &params)?;
                let wm = crate::constitutive::elastic_energy_particle(c, &fm, &params)?;
                let fd = (wp - wm) / (2.0 * h_f);
                worst = worst.max((p.m[i][j] - fd).abs() / scale);
            }
        }
        // mu = d(Psi)/dc at fixed F, in Fa 1V units; Psi carries chi/a so the
        // c-derivative lands in the same units.
        let mu = chemical_potential(c, &f, &params, &ocv)?.total();
        let h_c = 1e-6;
        let pp = free_energy_particle(c + h_c, &f, &params, &ocv)?;
        let pm = free_energy_particle(c - h_c, &f, &params, &ocv)?;
        let fd_mu = (pp - pm) / (2.0 * h_c);
        worst = worst.max((mu - fd_mu).abs() / mu.abs().max(1e-6));
    }
    Ok(worst)
}

/// Largest relative error of the SEI stress (both strain measures) against
/// central finite differences of the elastic energy at fixed plastic state,
/// over `n` random coaxial states.
pub fn sei_fd_max_rel_error(seed: u64, n: usize) -> Result<f64> {
    let params = sei_params(2.0, 1e-4, false, 3.6);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x736569);
    let mut worst = 0.0f64;
    for _ in 0..n {
        let f = Tensor2::diag(
            rng.gen_range(0.85..1.25),
            rng.gen_range(0.85..1.25),
            rng.gen_range(0.85..1.25),
        );
        // Unit-determinant plastic stretch, as produced by the flow rule.
        let a = rng.gen_range(0.9..1.1);
        let b = rng.gen_range(0.9..1.1);
        let f_pl = Tensor2::diag(a, b, 1.0 / (a * b));
        for mode in [SeiStrainMode::Gsv, SeiStrainMode::Log] {
            let p = piola_sei(&f, &f_pl, mode, &params)?;
            let scale = p.max_abs().max(1e-9);
            for i in 0..3 {
                let h = 1e-6;
                let mut fp = f;
                let mut fm = f;
                fp.m[i][i] += h;
                fm.m[i][i] -= h;
                let wp = elastic_energy_sei(&fp, &f_pl, mode, &params)?;
                let wm = elastic_energy_sei(&fm, &f_pl, mode, &params)?;
                let fd = (wp - wm) / (2.0 * h);
                worst = worst.max((p.m[i][i] - fd).abs() / scale);
            }
        }
    }
    Ok(worst)
}

fn random_trial_diag(rng: &mut ChaCha8Rng, amp: f64) -> [f64; 3] {
    [
        rng.gen_range(-amp..amp),
        rng.gen_range(-amp..amp),
        rng.gen_range(-amp..amp),
    ]
}

/// Largest KKT violation (normalized by sigma_y) over `n` rate-independent
/// return maps: admissibility when elastic, consistency when plastic, and
/// delta_eps >= 0 always. Exercises both the diagonal fast path and the
/// tensorial map.
pub fn kkt_max_violation(seed: u64, n: usize) -> Result<f64> {
    let params = sei_params(2.0, 1e-4, false, 3.6);
    let r_y = params.yield_radius();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6b6b74);
    let mut worst = 0.0f64;
    let norm_dev = |m: [f64; 3]| {
        let p = (m[0] + m[1] + m[2]) / 3.0;
        ((m[0] - p).powi(2) + (m[1] - p).powi(2) + (m[2] - p).powi(2)).sqrt()
    };
    for i in 0..n {
        let amp = if i % 2 == 0 { 5e-4 } else { 5e-2 };
        let e_trial = random_trial_diag(&mut rng, amp);
        let rm = return_map_diag(e_trial, 1.0, PlasticityMode::RateIndependent, &params)?;
        let m_adm = crate::kinematics::stiffness_apply_diag(rm.e_adm, params.lam_s, params.g_s);
        let violation = if rm.delta_eps < 0.0 {
            rm.delta_eps.abs()
        } else if rm.yielded {
            (norm_dev(m_adm) - r_y).abs()
        } else {
            (norm_dev(m_adm) - r_y).max(0.0)
        };
        worst = worst.max(violation / params.sigma_y);

        let e_tensor = Tensor2::symmetric(
            e_trial,
            [
                0.3 * rng.gen_range(-amp..amp),
                0.3 * rng.gen_range(-amp..amp),
                0.3 * rng.gen_range(-amp..amp),
            ],
        );
        let rt = return_map_rate_independent(&e_tensor, &params);
        let m_t = crate::plasticity::mandel_stress(&rt.e_el_admissible, &params);
        let dev_norm = m_t.dev().norm();
        let violation = if rt.delta_eps < 0.0 {
            rt.delta_eps.abs()
        } else if rt.yielded {
            (dev_norm - r_y).abs()
        } else {
            (dev_norm - r_y).max(0.0)
        };
        worst = worst.max(violation / params.sigma_y);
    }
    Ok(worst)
}

/// Overstress function of the viscoplastic residual
/// h(d) = d - tau eps0 ((norm_tr - 2 G d - r_y) / s*)^beta.
fn visco_residual(delta: f64, norm_trial: f64, tau: f64, params: &DimlessParams) -> f64 {
    let over = norm_trial - 2.0 * params.g_s * delta - params.yield_radius();
    if over <= 0.0 {
        return delta;
    }
    delta - tau * params.eps_dot0 * (over / params.overstress_scale()).powf(params.beta)
}

/// Bisection oracle for the viscoplastic increment, run to interval width
/// below 1e-16 * bracket.
fn visco_bisection(norm_trial: f64, tau: f64, params: &DimlessParams) -> f64 {
    let mut lo = 0.0;
    let mut hi = (norm_trial - params.yield_radius()) / (2.0 * params.g_s);
    if hi <= 0.0 {
        return 0.0;
    }
    // h(0) < 0 and h(hi) = hi > 0; bisect to machine width.
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if visco_residual(mid, norm_trial, tau, params) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Largest |delta_eps - bisection oracle| over `n` yielding viscoplastic
/// return maps across a spread of step sizes and exponents.
pub fn visco_vs_bisection_max_diff(seed: u64, n: usize) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x76697363);
    let mut worst = 0.0f64;
    for i in 0..n {
        let beta = [1.0, 2.0, 2.94, 4.0][i % 4];
        let params = sei_params(beta, 5.492e-4, true, 3.6);
        let tau = 10f64.powf(rng.gen_range(-8.0..0.0));
        // Trial strain scaled to guarantee yielding.
        let mut e = random_trial_diag(&mut rng, 1.0);
        let mean = (e[0] + e[1] + e[2]) / 3.0;
        let dev_norm = ((e[0] - mean).powi(2) + (e[1] - mean).powi(2) + (e[2] - mean).powi(2))
            .sqrt()
            .max(1e-3);
        let target = rng.gen_range(1.2..30.0) * params.yield_radius() / (2.0 * params.g_s);
        for v in e.iter_mut() {
            *v = mean + (*v - mean) * target / dev_norm;
        }
        let rm = return_map_diag(e, tau, PlasticityMode::Viscoplastic, &params)?;
        if !rm.yielded {
            return Err(crate::ModelError::ViscoplasticSolveFailure(
                "check state failed to yield".into(),
            ));
        }
        let m = crate::kinematics::stiffness_apply_diag(e, params.lam_s, params.g_s);
        let p = (m[0] + m[1] + m[2]) / 3.0;
        let norm_trial =
            ((m[0] - p).powi(2) + (m[1] - p).powi(2) + (m[2] - p).powi(2)).sqrt();
        let oracle = visco_bisection(norm_trial, tau, &params);
        worst = worst.max((rm.delta_eps - oracle).abs());
    }
    Ok(worst)
}

/// Largest |delta_visco - delta_ri| at tau = 1e12 h over `n` yielding states:
/// the rate-dependent map must recover the rate-independent one in the
/// long-step limit.
pub fn visco_ri_limit_max_diff(seed: u64, n: usize) -> Result<f64> {
    let params = sei_params(2.0, 1e-4, false, 3.6);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6c696d);
    let mut worst = 0.0f64;
    for _ in 0..n {
        let mut e = random_trial_diag(&mut rng, 5e-2);
        e[0] += 0.1;
        e[1] -= 0.1;
        let ri = return_map_diag(e, 1.0, PlasticityMode::RateIndependent, &params)?;
        if !ri.yielded {
            continue;
        }
        let visco = return_map_diag(e, 1e12, PlasticityMode::Viscoplastic, &params)?;
        worst = worst.max((visco.delta_eps - ri.delta_eps).abs());
    }
    Ok(worst)
}

/// |det F_pl - 1| after `n` exponential-map commits with random yielding
/// increments; the flow rule is trace-free so the determinant is preserved.
pub fn det_fpl_drift(seed: u64, n: usize) -> Result<f64> {
    let params = sei_params(2.0, 5.492e-4, true, 3.6);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x646574);
    let mut f_pl = [1.0, 1.0, 1.0];
    let mut eps = 0.0;
    let mut worst = 0.0f64;
    for _ in 0..n {
        let f = [
            rng.gen_range(0.9..1.15),
            rng.gen_range(0.9..1.15),
            rng.gen_range(0.9..1.15),
        ];
        let e_trial = trial_log_strain_diag(f, f_pl)?;
        let rm = return_map_diag(e_trial, 1e-3, PlasticityMode::Viscoplastic, &params)?;
        (f_pl, eps) = commit_diag(f_pl, eps, &rm);
        worst = worst.max((f_pl[0] * f_pl[1] * f_pl[2] - 1.0).abs());
    }
    Ok(worst)
}

/// Scalar test equation y' = a y used to measure integrator convergence.
struct DecaySystem {
    a: f64,
}

impl DaeSystem for DecaySystem {
    fn dim(&self) -> usize {
        1
    }
    fn mass_matrix(&self) -> BandedMatrix {
        let mut m = BandedMatrix::zero(1, 0, 0);
        m.set(0, 0, 1.0);
        m
    }
    fn mass_apply(&self, v: &[f64], out: &mut [f64]) {
        out[0] = v[0];
    }
    fn new_jacobian(&self) -> BandedMatrix {
        BandedMatrix::zero(1, 0, 0)
    }
    fn rhs(&self, _t: f64, y: &[f64], _tau: f64, out: &mut [f64]) -> Result<()> {
        out[0] = self.a * y[0];
        Ok(())
    }
    fn rhs_jacobian(&self, _t: f64, _y: &[f64], _tau: f64, out: &mut BandedMatrix) -> Result<()> {
        out.set(0, 0, self.a);
        Ok(())
    }
    fn commit(&mut self, _t: f64, _y: &[f64], _tau: f64) -> Result<()> {
        Ok(())
    }
}

/// Measured convergence rate of the fixed-order NDF scheme on y' = -y for
/// each order 1..=5, from global errors at two step sizes seeded with exact
/// history.
pub fn ndf_forced_order_rates() -> Vec<(usize, f64)> {
    let taus: [(f64, f64); 5] = [
        (0.02, 0.01),
        (0.05, 0.025),
        (0.1, 0.05),
        (0.125, 0.0625),
        (0.1, 0.05),
    ];
    let mut rates = Vec::with_capacity(5);
    for k in 1..=5 {
        let mut errs = [0.0f64; 2];
        for (slot, &tau) in [taus[k - 1].0, taus[k - 1].1].iter().enumerate() {
            let opts = NdfOptions {
                fixed_order: Some(k),
                fixed_tau: Some(tau),
                atol: 1e-10,
                rtol: 1e-10,
                ..NdfOptions::default()
            };
            let seed: Vec<(f64, Vec<f64>)> = (0..=k)
                .map(|j| {
                    let t = -(j as f64) * tau;
                    (t, vec![(-t).exp()])
                })
                .collect();
            let mut integ = Integrator::new(DecaySystem { a: -1.0 }, 0.0, vec![1.0], opts);
            integ.seed_history(seed);
            let t_end = 1.0;
            while integ.t() < t_end - 1e-12 {
                match integ.step(t_end) {
                    StepOutcome::Accepted(_) => {}
                    StepOutcome::Aborted(info) => panic!("forced-order abort: {}", info.reason),
                }
            }
            errs[slot] = (integ.y()[0] - (-1.0f64).exp()).abs();
        }
        rates.push((k, (errs[0] / errs[1]).log2()));
    }
    rates
}

/// Largest |x_banded - x_dense| / ||x|| over `n` random diagonally dominant
/// banded systems, solved once with the banded LU and once with dense
/// Gaussian elimination with partial pivoting.
pub fn banded_lu_vs_dense_max_rel_error(seed: u64, n: usize) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6c75);
    let mut worst = 0.0f64;
    for _ in 0..n {
        let size = rng.gen_range(5..60);
        let kl = rng.gen_range(1..5.min(size));
        let ku = rng.gen_range(1..5.min(size));
        let mut banded = BandedMatrix::zero(size, kl, ku);
        let mut dense = vec![vec![0.0f64; size]; size];
        for i in 0..size {
            for j in 0..size {
                if banded.in_band(i, j) {
                    let v = if i == j {
                        (kl + ku + 2) as f64 + rng.gen_range(0.0..1.0)
                    } else {
                        rng.gen_range(-1.0..1.0)
                    };
                    banded.set(i, j, v);
                    dense[i][j] = v;
                }
            }
        }
        let mut b: Vec<f64> = (0..size).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x_dense = dense_solve(dense, b.clone());
        banded.lu_factor()?.solve_in_place(&mut b);
        let norm = x_dense.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-30);
        for (xb, xd) in b.iter().zip(&x_dense) {
            worst = worst.max((xb - xd).abs() / norm);
        }
    }
    Ok(worst)
}

/// Dense Gaussian elimination with partial pivoting; oracle only.
fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    for col in (0..n).rev() {
        b[col] /= a[col][col];
        for row in 0..col {
            b[row] -= a[row][col] * b[col];
        }
    }
    b
}

/// Largest spectral-decomposition error over `n` random symmetric tensors,
/// including nearly degenerate spectra: reconstruction ||Q L Q^T - S||,
/// orthonormality ||Q^T Q - I||, and exp(S) against a truncated power
/// series.
pub fn eigen_max_error(seed: u64, n: usize) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x656967);
    let mut worst = 0.0f64;
    for i in 0..n {
        let s = match i % 3 {
            0 => Tensor2::symmetric(
                [
                    rng.gen_range(-0.5..0.5),
                    rng.gen_range(-0.5..0.5),
                    rng.gen_range(-0.5..0.5),
                ],
                [
                    rng.gen_range(-0.5..0.5),
                    rng.gen_range(-0.5..0.5),
                    rng.gen_range(-0.5..0.5),
                ],
            ),
            1 => {
                // Nearly degenerate pair.
                let base = rng.gen_range(-0.3..0.3);
                Tensor2::symmetric(
                    [base, base + 1e-12, rng.gen_range(-0.3..0.3)],
                    [1e-13, 0.0, 1e-13],
                )
            }
            _ => Tensor2::diag(
                rng.gen_range(-0.5..0.5),
                rng.gen_range(-0.5..0.5),
                rng.gen_range(-0.5..0.5),
            ),
        };
        let (vals, vecs) = s.eig_sym()?;
        // vecs[i][c] is component i of eigenvector c, so the array already
        // holds the eigenvectors as columns of Q.
        let q = Tensor2::from_rows([vecs[0], vecs[1], vecs[2]]);
        let lam = Tensor2::diag(vals[0], vals[1], vals[2]);
        let recon = q.matmul(&lam).matmul(&q.transpose());
        let scale = s.max_abs().max(1.0);
        worst = worst.max(recon.sub(&s).norm() / scale);
        worst = worst.max(q.transpose().matmul(&q).sub(&Tensor2::identity()).norm());

        let exp_spectral = spectral_apply(&s, f64::exp)?;
        let mut series = Tensor2::identity();
        let mut term = Tensor2::identity();
        for k in 1..30 {
            term = term.matmul(&s).scale(1.0 / k as f64);
            series = series.add(&term);
        }
        worst = worst.max(exp_spectral.sub(&series).norm() / scale);
    }
    Ok(worst)
}

/// Short coupled run on the CI mesh; returns (completed, conservation error,
/// conservation bound).
pub fn mini_run_conservation() -> Result<(bool, f64, f64)> {
    let mut config = ScenarioConfig::for_modes(StrainMode::Log, PlasticityMode::Elastic);
    config.protocol.half_cycles = 1;
    config.protocol.half_cycle_duration_h = 0.02;
    let bound = 10.0 * config.tolerances.abs_tol;
    let run = run_scenario(&config)?;
    Ok((run.completed, run.max_conservation_error, bound))
}

fn check_bound(
    value: std::result::Result<f64, crate::ModelError>,
    bound: f64,
    what: &str,
) -> std::result::Result<String, String> {
    match value {
        Ok(v) if v <= bound => Ok(format!("{what} {v:.3e} <= {bound:.1e}")),
        Ok(v) => Err(format!("{what} {v:.3e} exceeds {bound:.1e}")),
        Err(e) => Err(fail(e)),
    }
}

/// Runs every self-check and collects the reports. All randomness derives
/// from `seed`.
pub fn run_all(seed: u64) -> Vec<CheckReport> {
    let mut reports = Vec::new();
    reports.push(CheckReport::from(
        "particle_stress_mu_fd",
        check_bound(
            particle_fd_max_rel_error(seed, 100),
            1e-6,
            "max rel error vs central FD",
        ),
    ));
    reports.push(CheckReport::from(
        "sei_stress_fd",
        check_bound(
            sei_fd_max_rel_error(seed, 100),
            1e-6,
            "max rel error vs central FD",
        ),
    ));
    reports.push(CheckReport::from(
        "return_map_kkt",
        check_bound(
            kkt_max_violation(seed, 5000),
            1e-10,
            "max KKT violation / sigma_y",
        ),
    ));
    reports.push(CheckReport::from(
        "viscoplastic_vs_bisection",
        check_bound(
            visco_vs_bisection_max_diff(seed, 2000),
            1e-10,
            "max |delta_eps - oracle|",
        ),
    ));
    reports.push(CheckReport::from(
        "viscoplastic_ri_limit",
        check_bound(
            visco_ri_limit_max_diff(seed, 500),
            1e-6,
            "max |delta_visco - delta_ri| at tau=1e12",
        ),
    ));
    reports.push(CheckReport::from(
        "det_fpl_preservation",
        check_bound(det_fpl_drift(seed, 10_000), 1e-8, "max |det F_pl - 1|"),
    ));
    reports.push(CheckReport::from("ndf_forced_orders", {
        let rates = ndf_forced_order_rates();
        let bad: Vec<String> = rates
            .iter()
            .filter(|(k, r)| (r - *k as f64).abs() > 0.2)
            .map(|(k, r)| format!("order {k} measured {r:.3}"))
            .collect();
        if bad.is_empty() {
            Ok(rates
                .iter()
                .map(|(k, r)| format!("k={k}: {r:.2}"))
                .collect::<Vec<_>>()
                .join(", "))
        } else {
            Err(bad.join("; "))
        }
    }));
    reports.push(CheckReport::from(
        "banded_lu_vs_dense",
        check_bound(
            banded_lu_vs_dense_max_rel_error(seed, 50),
            1e-10,
            "max rel solution difference",
        ),
    ));
    reports.push(CheckReport::from(
        "spectral_decomposition",
        check_bound(eigen_max_error(seed, 500), 1e-9, "max spectral error"),
    ));
    reports.push(CheckReport::from(
        "mini_run_conservation",
        match mini_run_conservation() {
            Ok((true, err, bound)) if err <= bound => {
                Ok(format!("lithium error {err:.3e} <= {bound:.1e}"))
            }
            Ok((true, err, bound)) => Err(format!("lithium error {err:.3e} exceeds {bound:.1e}")),
            Ok((false, _, _)) => Err("run did not complete".into()),
            Err(e) => Err(fail(e)),
        },
    ));
    reports
}
