//! Radial finite-element discretization of the coupled weak form: residual
//! and Jacobian assembly, mass matrix, conserved integrals, and field
//! sampling.
//!
//! Unknowns are (c, mu, u) on the particle and u on the SEI shell. With
//! u = u(r) e_r the deformation gradient is diag(1 + u', 1 + u/r, 1 + u/r)
//! and the momentum residual reads int (P_rr xi' + 2 P_tt xi / r) r^2 dr per
//! subdomain. The r -> 0 singularity is harmless: quadrature points never
//! sit at r = 0 and u(0) = 0 keeps u/r bounded.
//!
//! The semi-discrete system is the index-1 DAE M y' = f(y) where M is the
//! r^2-weighted mass matrix on the concentration block and zero elsewhere;
//! f = -R_static. SEI internal variables stay frozen at the last commit
//! within a step; `commit` advances them from an accepted state.

use crate::constitutive::{cauchy_diag, particle_qp_response, DimlessParams, SeiStrainMode};
use crate::kinematics::stiffness_apply_diag;
use crate::config::PlasticityMode;
use crate::linalg::BandedMatrix;
use crate::mesh::{DofMap, Mesh};
use crate::ndf::DaeSystem;
use crate::newton::{self, NewtonOptions};
use crate::ocv::OcvCurve;
use crate::plasticity::{commit_diag, return_map_diag, trial_log_strain_diag, DiagReturnMap};
use crate::quadrature::{lagrange_shape, ShapeTable};
use crate::{ModelError, Result};

/// Nodes per element cap for stack-allocated local buffers.
const MAXN: usize = 12;

/// Committed internal state at one SEI quadrature point. Radial symmetry
/// keeps F_pl diagonal in the (r, theta, phi) frame.
#[derive(Clone, Copy, Debug)]
pub struct QpState {
    pub f_pl: [f64; 3],
    pub eps_pl_eq: f64,
}

impl QpState {
    pub fn identity() -> Self {
        QpState {
            f_pl: [1.0, 1.0, 1.0],
            eps_pl_eq: 0.0,
        }
    }
}

/// Sampled fields at one radius; chemistry fields are None in the SEI.
#[derive(Clone, Copy, Debug)]
pub struct FieldSample {
    pub r: f64,
    pub c: Option<f64>,
    pub mu: Option<f64>,
    pub u: f64,
    /// Cauchy stresses, E_P units.
    pub sigma_rr: f64,
    pub sigma_tt: f64,
}

/// Assembled radial FEM problem over particle + SEI.
pub struct FemSystem {
    mesh: Mesh,
    dof: DofMap,
    shape: ShapeTable,
    params: DimlessParams,
    ocv: OcvCurve,
    strain_mode: SeiStrainMode,
    plastic_mode: PlasticityMode,
    committed: Vec<QpState>,
    mass: BandedMatrix,
    n_ext: f64,
    init_target: Option<f64>,
}

impl FemSystem {
    pub fn new(
        mesh: Mesh,
        dof: DofMap,
        params: DimlessParams,
        ocv: OcvCurve,
        strain_mode: SeiStrainMode,
        plastic_mode: PlasticityMode,
        nq: usize,
    ) -> Result<Self> {
        if mesh.p + 1 > MAXN {
            return Err(ModelError::config("mesh.p", "polynomial order above supported cap"));
        }
        let shape = ShapeTable::new(mesh.p, nq);
        let committed = vec![QpState::identity(); mesh.n_elem_s * nq];
        let mut sys = FemSystem {
            mass: BandedMatrix::zero(dof.n_dofs(), dof.half_bandwidth(), dof.half_bandwidth()),
            mesh,
            dof,
            shape,
            params,
            ocv,
            strain_mode,
            plastic_mode,
            committed,
            n_ext: 0.0,
            init_target: None,
        };
        sys.assemble_mass();
        Ok(sys)
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn dof(&self) -> &DofMap {
        &self.dof
    }

    pub fn params(&self) -> &DimlessParams {
        &self.params
    }

    pub fn ocv(&self) -> &OcvCurve {
        &self.ocv
    }

    pub fn internal_states(&self) -> &[QpState] {
        &self.committed
    }

    pub fn reset_internal(&mut self) {
        self.committed.fill(QpState::identity());
    }

    /// External lithium flux as SOC rate (1/h); positive on lithiation.
    pub fn set_flux(&mut self, n_ext: f64) {
        self.n_ext = n_ext;
    }

    pub fn flux(&self) -> f64 {
        self.n_ext
    }

    /// FNV-1a hash over the committed internal state bits.
    pub fn internal_hash(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |x: f64| {
            for b in x.to_bits().to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x1000_0000_01b3);
            }
        };
        for s in &self.committed {
            eat(s.f_pl[0]);
            eat(s.f_pl[1]);
            eat(s.f_pl[2]);
            eat(s.eps_pl_eq);
        }
        h
    }

    fn nq(&self) -> usize {
        self.shape.nq()
    }

    fn nn(&self) -> usize {
        self.mesh.p + 1
    }

    fn gather_particle(&self, e: usize, y: &[f64], c: &mut [f64], mu: &mut [f64], u: &mut [f64]) {
        let base = e * self.mesh.p;
        for a in 0..self.nn() {
            c[a] = y[self.dof.c(base + a)];
            mu[a] = y[self.dof.mu(base + a)];
            u[a] = y[self.dof.u_p(base + a)];
        }
    }

    fn gather_sei(&self, e: usize, y: &[f64], u: &mut [f64]) {
        let base = e * self.mesh.p;
        for a in 0..self.nn() {
            u[a] = y[self.dof.u_s(base + a)];
        }
    }

    /// Static residual contribution of particle element e on local nodal
    /// values; accumulates into the three local row blocks.
    fn particle_element_residual(
        &self,
        e: usize,
        c: &[f64],
        mu: &[f64],
        u: &[f64],
        out_c: &mut [f64],
        out_mu: &mut [f64],
        out_u: &mut [f64],
    ) -> Result<()> {
        let nn = self.nn();
        let h = self.mesh.h_p();
        let left = self.mesh.elem_left_p(e);
        let inv_j = 2.0 / h;
        for q in 0..self.nq() {
            let nv = &self.shape.n[q];
            let dv = &self.shape.dn[q];
            let mut c_q = 0.0;
            let mut mu_q = 0.0;
            let mut u_q = 0.0;
            let mut dmu = 0.0;
            let mut du = 0.0;
            for a in 0..nn {
                c_q += nv[a] * c[a];
                mu_q += nv[a] * mu[a];
                u_q += nv[a] * u[a];
                dmu += dv[a] * mu[a];
                du += dv[a] * u[a];
            }
            dmu *= inv_j;
            du *= inv_j;
            let r = left + 0.5 * (self.shape.rule.points[q] + 1.0) * h;
            let u_over_r = u_q / r;
            let f = [1.0 + du, 1.0 + u_over_r, 1.0 + u_over_r];
            if !(f[0] > 0.0 && f[1] > 0.0) {
                return Err(ModelError::OrientationViolation(format!(
                    "particle stretches ({}, {})",
                    f[0], f[1]
                ))
                .at_qp(e, q));
            }
            let resp = particle_qp_response(c_q, f, &self.params, &self.ocv)
                .map_err(|err| err.at_qp(e, q))?;
            let w = self.shape.rule.weights[q] * 0.5 * h * r * r;
            for a in 0..nn {
                out_c[a] += w * resp.mobility * dmu * dv[a] * inv_j;
                out_mu[a] += w * (mu_q - resp.mu) * nv[a];
                out_u[a] += w * (resp.p[0] * dv[a] * inv_j + 2.0 * resp.p[1] * nv[a] / r);
            }
        }
        Ok(())
    }

    /// Mode-dependent SEI stress at one quadrature point: first Piola
    /// (diagonal) plus the return-map outcome driving the commit.
    fn sei_qp_stress(
        &self,
        f: [f64; 3],
        state: &QpState,
        tau: f64,
    ) -> Result<([f64; 3], DiagReturnMap)> {
        match self.strain_mode {
            SeiStrainMode::Log => {
                let trial = trial_log_strain_diag(f, state.f_pl)?;
                let rm = return_map_diag(trial, tau, self.plastic_mode, &self.params)?;
                let t = stiffness_apply_diag(rm.e_adm, self.params.lam_s, self.params.g_s);
                Ok(([t[0] / f[0], t[1] / f[1], t[2] / f[2]], rm))
            }
            SeiStrainMode::Gsv => {
                let mut f_el = [0.0; 3];
                for i in 0..3 {
                    f_el[i] = f[i] / state.f_pl[i];
                    if !(f_el[i] > 0.0 && f_el[i].is_finite()) {
                        return Err(ModelError::OrientationViolation(format!(
                            "SEI elastic stretch {} on axis {i}",
                            f_el[i]
                        )));
                    }
                }
                let e = [
                    0.5 * (f_el[0] * f_el[0] - 1.0),
                    0.5 * (f_el[1] * f_el[1] - 1.0),
                    0.5 * (f_el[2] * f_el[2] - 1.0),
                ];
                let s = stiffness_apply_diag(e, self.params.lam_s, self.params.g_s);
                let p = [
                    f[0] * s[0] / (state.f_pl[0] * state.f_pl[0]),
                    f[1] * s[1] / (state.f_pl[1] * state.f_pl[1]),
                    f[2] * s[2] / (state.f_pl[2] * state.f_pl[2]),
                ];
                Ok((
                    p,
                    DiagReturnMap {
                        e_adm: e,
                        delta_eps: 0.0,
                        nu: [0.0; 3],
                        yielded: false,
                    },
                ))
            }
        }
    }

    fn sei_element_residual(&self, e: usize, u: &[f64], tau: f64, out_u: &mut [f64]) -> Result<()> {
        let nn = self.nn();
        let h = self.mesh.h_s();
        let left = self.mesh.elem_left_s(e);
        let inv_j = 2.0 / h;
        for q in 0..self.nq() {
            let nv = &self.shape.n[q];
            let dv = &self.shape.dn[q];
            let mut u_q = 0.0;
            let mut du = 0.0;
            for a in 0..nn {
                u_q += nv[a] * u[a];
                du += dv[a] * u[a];
            }
            du *= inv_j;
            let r = left + 0.5 * (self.shape.rule.points[q] + 1.0) * h;
            let u_over_r = u_q / r;
            let f = [1.0 + du, 1.0 + u_over_r, 1.0 + u_over_r];
            if !(f[0] > 0.0 && f[1] > 0.0) {
                return Err(ModelError::OrientationViolation(format!(
                    "SEI stretches ({}, {})",
                    f[0], f[1]
                ))
                .at_qp(self.mesh.n_elem_p + e, q));
            }
            let state = &self.committed[e * self.nq() + q];
            let (p, _) = self
                .sei_qp_stress(f, state, tau)
                .map_err(|err| err.at_qp(self.mesh.n_elem_p + e, q))?;
            let w = self.shape.rule.weights[q] * 0.5 * h * r * r;
            for a in 0..nn {
                out_u[a] += w * (p[0] * dv[a] * inv_j + 2.0 * p[1] * nv[a] / r);
            }
        }
        Ok(())
    }

    /// Switches the residual into the consistency-solve form: concentration
    /// rows become c_i - target and the flux term is dropped.
    pub fn set_init_mode(&mut self, target: Option<f64>) {
        self.init_target = target;
    }

    fn assemble_mass(&mut self) {
        self.mass.zero_all();
        let nn = self.nn();
        let h = self.mesh.h_p();
        for e in 0..self.mesh.n_elem_p {
            let left = self.mesh.elem_left_p(e);
            let base = e * self.mesh.p;
            for q in 0..self.nq() {
                let nv = &self.shape.n[q];
                let r = left + 0.5 * (self.shape.rule.points[q] + 1.0) * h;
                let w = self.shape.rule.weights[q] * 0.5 * h * r * r;
                for a in 0..nn {
                    for b in 0..nn {
                        self.mass
                            .add_to(self.dof.c(base + a), self.dof.c(base + b), w * nv[a] * nv[b]);
                    }
                }
            }
        }
    }

    /// 3 int_0^1 c r^2 dr; equals c for homogeneous states.
    pub fn total_lithium(&self, y: &[f64]) -> f64 {
        let nn = self.nn();
        let h = self.mesh.h_p();
        let mut total = 0.0;
        for e in 0..self.mesh.n_elem_p {
            let left = self.mesh.elem_left_p(e);
            let base = e * self.mesh.p;
            for q in 0..self.nq() {
                let nv = &self.shape.n[q];
                let mut c_q = 0.0;
                for a in 0..nn {
                    c_q += nv[a] * y[self.dof.c(base + a)];
                }
                let r = left + 0.5 * (self.shape.rule.points[q] + 1.0) * h;
                total += self.shape.rule.weights[q] * 0.5 * h * r * r * c_q;
            }
        }
        3.0 * total
    }

    /// Largest yield-function value over committed SEI quadrature points,
    /// evaluated elastically from the committed plastic state at y.
    /// None without an SEI shell.
    pub fn max_yield_excess(&self, y: &[f64]) -> Option<f64> {
        if self.mesh.n_elem_s == 0 {
            return None;
        }
        let nn = self.nn();
        let h = self.mesh.h_s();
        let mut u = [0.0; MAXN];
        let mut worst = f64::NEG_INFINITY;
        for e in 0..self.mesh.n_elem_s {
            self.gather_sei(e, y, &mut u[..nn]);
            let left = self.mesh.elem_left_s(e);
            let inv_j = 2.0 / h;
            for q in 0..self.nq() {
                let nv = &self.shape.n[q];
                let dv = &self.shape.dn[q];
                let mut u_q = 0.0;
                let mut du = 0.0;
                for a in 0..nn {
                    u_q += nv[a] * u[a];
                    du += dv[a] * u[a];
                }
                du *= inv_j;
                let r = left + 0.5 * (self.shape.rule.points[q] + 1.0) * h;
                let f = [1.0 + du, 1.0 + u_q / r, 1.0 + u_q / r];
                let state = &self.committed[e * self.nq() + q];
                let Ok(e_el) = trial_log_strain_diag(f, state.f_pl) else {
                    continue;
                };
                let m = stiffness_apply_diag(e_el, self.params.lam_s, self.params.g_s);
                let p = (m[0] + m[1] + m[2]) / 3.0;
                let dev = [m[0] - p, m[1] - p, m[2] - p];
                let norm = (dev[0] * dev[0] + dev[1] * dev[1] + dev[2] * dev[2]).sqrt();
                worst = worst.max(norm - self.params.yield_radius());
            }
        }
        Some(worst)
    }

    /// SEI-side Cauchy stresses at the interface (r = 1, SEI element 0).
    pub fn interface_stress_sei(&self, y: &[f64], tau: f64) -> Result<(f64, f64)> {
        if self.mesh.n_elem_s == 0 {
            return Err(ModelError::SampleOutOfDomain(1.0));
        }
        let nn = self.nn();
        let mut u = [0.0; MAXN];
        self.gather_sei(0, y, &mut u[..nn]);
        let (nv, dv) = lagrange_shape(self.mesh.p, -1.0);
        let inv_j = 2.0 / self.mesh.h_s();
        let mut u_q = 0.0;
        let mut du = 0.0;
        for a in 0..nn {
            u_q += nv[a] * u[a];
            du += dv[a] * u[a];
        }
        du *= inv_j;
        let f = [1.0 + du, 1.0 + u_q, 1.0 + u_q];
        let state = &self.committed[0];
        let (p, _) = self.sei_qp_stress(f, state, tau)?;
        let sigma = cauchy_diag(p, f);
        Ok((sigma[0], sigma[1]))
    }

    /// Fields at the requested radii: particle side for r <= 1, SEI beyond.
    /// SEI stresses use the committed internal state of the nearest
    /// quadrature point of the containing element.
    pub fn sample_fields(&self, y: &[f64], radii: &[f64], tau: f64) -> Result<Vec<FieldSample>> {
        let nn = self.nn();
        let mut out = Vec::with_capacity(radii.len());
        for &r in radii {
            if !(-1e-12..=1.0 + self.mesh.l_s + 1e-12).contains(&r) {
                return Err(ModelError::SampleOutOfDomain(r));
            }
            if r <= 1.0 {
                let h = self.mesh.h_p();
                let e = ((r / h) as usize).min(self.mesh.n_elem_p - 1);
                let xi = (2.0 * (r - self.mesh.elem_left_p(e)) / h - 1.0).clamp(-1.0, 1.0);
                let (nv, dv) = lagrange_shape(self.mesh.p, xi);
                let mut c = [0.0; MAXN];
                let mut mu = [0.0; MAXN];
                let mut u = [0.0; MAXN];
                self.gather_particle(e, y, &mut c[..nn], &mut mu[..nn], &mut u[..nn]);
                let mut c_q = 0.0;
                let mut mu_q = 0.0;
                let mut u_q = 0.0;
                let mut du = 0.0;
                for a in 0..nn {
                    c_q += nv[a] * c[a];
                    mu_q += nv[a] * mu[a];
                    u_q += nv[a] * u[a];
                    du += dv[a] * u[a];
                }
                du *= 2.0 / h;
                // At the center F_tt -> 1 + u'(0) = F_rr by regularity.
                let f_tt = if r < 1e-12 { 1.0 + du } else { 1.0 + u_q / r };
                let f = [1.0 + du, f_tt, f_tt];
                let resp = particle_qp_response(c_q, f, &self.params, &self.ocv)?;
                let sigma = cauchy_diag(resp.p, f);
                out.push(FieldSample {
                    r,
                    c: Some(c_q),
                    mu: Some(mu_q),
                    u: u_q,
                    sigma_rr: sigma[0],
                    sigma_tt: sigma[1],
                });
            } else {
                if self.mesh.n_elem_s == 0 {
                    return Err(ModelError::SampleOutOfDomain(r));
                }
                let h = self.mesh.h_s();
                let e = (((r - 1.0) / h) as usize).min(self.mesh.n_elem_s - 1);
                let xi = (2.0 * (r - self.mesh.elem_left_s(e)) / h - 1.0).clamp(-1.0, 1.0);
                let (nv, dv) = lagrange_shape(self.mesh.p, xi);
                let mut u = [0.0; MAXN];
                self.gather_sei(e, y, &mut u[..nn]);
                let mut u_q = 0.0;
                let mut du = 0.0;
                for a in 0..nn {
                    u_q += nv[a] * u[a];
                    du += dv[a] * u[a];
                }
                du *= 2.0 / h;
                let f = [1.0 + du, 1.0 + u_q / r, 1.0 + u_q / r];
                let qp_near = self
                    .shape
                    .rule
                    .points
                    .iter()
                    .enumerate()
                    .min_by(|(_, a), (_, b)| (*a - xi).abs().total_cmp(&(*b - xi).abs()))
                    .map(|(q, _)| q)
                    .unwrap();
                let state = &self.committed[e * self.nq() + qp_near];
                let (p, _) = self.sei_qp_stress(f, state, tau)?;
                let sigma = cauchy_diag(p, f);
                out.push(FieldSample {
                    r,
                    c: None,
                    mu: None,
                    u: u_q,
                    sigma_rr: sigma[0],
                    sigma_tt: sigma[1],
                });
            }
        }
        Ok(out)
    }

    /// Solves the algebraic consistency system at fixed concentration:
    /// c = target everywhere, mu and u from their residual rows. The state
    /// vector is updated in place.
    pub fn solve_consistent_state(&mut self, y: &mut [f64], c_target: f64, tol: f64) -> Result<()> {
        self.set_init_mode(Some(c_target));
        // Unit weights: tol bounds the absolute residual RMS. Solution-scaled
        // weights would push the target below the assembly roundoff floor.
        let weights = vec![1.0; self.dim()];
        let opts = NewtonOptions {
            tol,
            max_iterations: 25,
            max_backtracks: 8,
        };
        let mut jac = self.new_jacobian();
        let outcome = self.newton_init_loop(y, &weights, &opts, &mut jac);
        self.set_init_mode(None);
        outcome
    }

    fn newton_init_loop(
        &self,
        y: &mut [f64],
        weights: &[f64],
        opts: &NewtonOptions,
        jac: &mut BandedMatrix,
    ) -> Result<()> {
        let n = y.len();
        let mut r = vec![0.0; n];
        let mut delta = vec![0.0; n];
        let mut trial = vec![0.0; n];
        self.rhs(0.0, y, 1e-8, &mut r)?;
        let mut norm = newton::weighted_rms(&r, weights);
        for _ in 0..opts.max_iterations {
            if norm <= opts.tol {
                return Ok(());
            }
            self.rhs_jacobian(0.0, y, 1e-8, jac)?;
            let lu = jac.lu_factor()?;
            delta.copy_from_slice(&r);
            lu.solve_in_place(&mut delta);
            let mut step = 1.0;
            let mut accepted = false;
            for _ in 0..=opts.max_backtracks {
                for i in 0..n {
                    trial[i] = y[i] - step * delta[i];
                }
                let trial_norm = match self.rhs(0.0, &trial, 1e-8, &mut r) {
                    Ok(()) => newton::weighted_rms(&r, weights),
                    Err(_) => f64::INFINITY,
                };
                if trial_norm.is_finite() && (trial_norm < norm || trial_norm <= opts.tol) {
                    y.copy_from_slice(&trial);
                    norm = trial_norm;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                return Err(ModelError::InitFailure(format!(
                    "consistency solve stalled at scaled residual {norm:e}"
                )));
            }
        }
        if norm <= opts.tol {
            Ok(())
        } else {
            Err(ModelError::InitFailure(format!(
                "consistency solve did not reach tolerance: {norm:e}"
            )))
        }
    }
}

impl DaeSystem for FemSystem {
    fn dim(&self) -> usize {
        self.dof.n_dofs()
    }

    fn mass_matrix(&self) -> BandedMatrix {
        self.mass.clone()
    }

    fn mass_apply(&self, v: &[f64], out: &mut [f64]) {
        self.mass.matvec(v, out);
    }

    fn new_jacobian(&self) -> BandedMatrix {
        BandedMatrix::zero(self.dim(), self.dof.half_bandwidth(), self.dof.half_bandwidth())
    }

    fn rhs(&self, _t: f64, y: &[f64], tau: f64, out: &mut [f64]) -> Result<()> {
        assert_eq!(y.len(), self.dim());
        assert_eq!(out.len(), self.dim());
        out.fill(0.0);
        let nn = self.nn();
        let mut c = [0.0; MAXN];
        let mut mu = [0.0; MAXN];
        let mut u = [0.0; MAXN];
        let mut rc = [0.0; MAXN];
        let mut rmu = [0.0; MAXN];
        let mut ru = [0.0; MAXN];
        for e in 0..self.mesh.n_elem_p {
            self.gather_particle(e, y, &mut c[..nn], &mut mu[..nn], &mut u[..nn]);
            rc[..nn].fill(0.0);
            rmu[..nn].fill(0.0);
            ru[..nn].fill(0.0);
            self.particle_element_residual(
                e,
                &c[..nn],
                &mu[..nn],
                &u[..nn],
                &mut rc[..nn],
                &mut rmu[..nn],
                &mut ru[..nn],
            )?;
            let base = e * self.mesh.p;
            for a in 0..nn {
                out[self.dof.c(base + a)] -= rc[a];
                out[self.dof.mu(base + a)] -= rmu[a];
                out[self.dof.u_p(base + a)] -= ru[a];
            }
        }
        for e in 0..self.mesh.n_elem_s {
            self.gather_sei(e, y, &mut u[..nn]);
            ru[..nn].fill(0.0);
            self.sei_element_residual(e, &u[..nn], tau, &mut ru[..nn])?;
            let base = e * self.mesh.p;
            for a in 0..nn {
                out[self.dof.u_s(base + a)] -= ru[a];
            }
        }
        match self.init_target {
            None => {
                // Prescribed-flux boundary term at r = 1 (phi = 1 there only
                // for the interface node).
                out[self.dof.c(self.dof.n_nodes_p - 1)] += self.n_ext / 3.0;
            }
            Some(target) => {
                for i in 0..self.dof.n_nodes_p {
                    out[self.dof.c(i)] = target - y[self.dof.c(i)];
                }
            }
        }
        // Essential condition u(0) = 0 replaces the center momentum row.
        out[self.dof.u_p(0)] = -y[self.dof.u_p(0)];
        for v in out.iter() {
            if !v.is_finite() {
                return Err(ModelError::JacobianNonFinite);
            }
        }
        Ok(())
    }

    fn rhs_jacobian(&self, _t: f64, y: &[f64], tau: f64, out: &mut BandedMatrix) -> Result<()> {
        assert_eq!(y.len(), self.dim());
        out.zero_all();
        let nn = self.nn();
        let sqrt_eps = f64::EPSILON.sqrt();
        let mut c = [0.0; MAXN];
        let mut mu = [0.0; MAXN];
        let mut u = [0.0; MAXN];
        let mut rp = [0.0; 3 * MAXN];
        let mut rm = [0.0; 3 * MAXN];

        // Particle elements: columns are the 3(p+1) local unknowns; central
        // differences of the element residual give one banded column block.
        for e in 0..self.mesh.n_elem_p {
            self.gather_particle(e, y, &mut c[..nn], &mut mu[..nn], &mut u[..nn]);
            let base = e * self.mesh.p;
            for field in 0..3 {
                for a_col in 0..nn {
                    let col = match field {
                        0 => self.dof.c(base + a_col),
                        1 => self.dof.mu(base + a_col),
                        _ => self.dof.u_p(base + a_col),
                    };
                    let slot = match field {
                        0 => &mut c[a_col],
                        1 => &mut mu[a_col],
                        _ => &mut u[a_col],
                    };
                    let v0 = *slot;
                    let h = sqrt_eps * (1.0 + v0.abs());
                    *slot = v0 + h;
                    rp[..3 * nn].fill(0.0);
                    let res_p = {
                        let (r_c, rest) = rp.split_at_mut(nn);
                        let (r_mu, r_u) = rest.split_at_mut(nn);
                        self.particle_element_residual(
                            e,
                            &c[..nn],
                            &mu[..nn],
                            &u[..nn],
                            r_c,
                            r_mu,
                            &mut r_u[..nn],
                        )
                    };
                    // Reborrow: the slot alias ended with the call above.
                    let slot = match field {
                        0 => &mut c[a_col],
                        1 => &mut mu[a_col],
                        _ => &mut u[a_col],
                    };
                    *slot = v0 - h;
                    rm[..3 * nn].fill(0.0);
                    let res_m = {
                        let (r_c, rest) = rm.split_at_mut(nn);
                        let (r_mu, r_u) = rest.split_at_mut(nn);
                        self.particle_element_residual(
                            e,
                            &c[..nn],
                            &mu[..nn],
                            &u[..nn],
                            r_c,
                            r_mu,
                            &mut r_u[..nn],
                        )
                    };
                    let slot = match field {
                        0 => &mut c[a_col],
                        1 => &mut mu[a_col],
                        _ => &mut u[a_col],
                    };
                    *slot = v0;
                    res_p?;
                    res_m?;
                    let scale = -1.0 / (2.0 * h);
                    for a in 0..nn {
                        let d_c = (rp[a] - rm[a]) * scale;
                        let d_mu = (rp[nn + a] - rm[nn + a]) * scale;
                        let d_u = (rp[2 * nn + a] - rm[2 * nn + a]) * scale;
                        if !(d_c.is_finite() && d_mu.is_finite() && d_u.is_finite()) {
                            return Err(ModelError::JacobianNonFinite);
                        }
                        out.add_to(self.dof.c(base + a), col, d_c);
                        out.add_to(self.dof.mu(base + a), col, d_mu);
                        out.add_to(self.dof.u_p(base + a), col, d_u);
                    }
                }
            }
        }

        for e in 0..self.mesh.n_elem_s {
            self.gather_sei(e, y, &mut u[..nn]);
            let base = e * self.mesh.p;
            for a_col in 0..nn {
                let col = self.dof.u_s(base + a_col);
                let v0 = u[a_col];
                let h = sqrt_eps * (1.0 + v0.abs());
                u[a_col] = v0 + h;
                rp[..nn].fill(0.0);
                let res_p = self.sei_element_residual(e, &u[..nn], tau, &mut rp[..nn]);
                u[a_col] = v0 - h;
                rm[..nn].fill(0.0);
                let res_m = self.sei_element_residual(e, &u[..nn], tau, &mut rm[..nn]);
                u[a_col] = v0;
                res_p?;
                res_m?;
                let scale = -1.0 / (2.0 * h);
                for a in 0..nn {
                    let d = (rp[a] - rm[a]) * scale;
                    if !d.is_finite() {
                        return Err(ModelError::JacobianNonFinite);
                    }
                    out.add_to(self.dof.u_s(base + a), col, d);
                }
            }
        }

        if self.init_target.is_some() {
            for i in 0..self.dof.n_nodes_p {
                let row = self.dof.c(i);
                out.zero_row(row);
                out.set(row, row, -1.0);
            }
        }
        let u0 = self.dof.u_p(0);
        out.zero_row(u0);
        out.set(u0, u0, -1.0);
        Ok(())
    }

    fn commit(&mut self, _t: f64, y: &[f64], tau: f64) -> Result<()> {
        if self.mesh.n_elem_s == 0 || self.plastic_mode == PlasticityMode::Elastic {
            return Ok(());
        }
        let nn = self.nn();
        let h = self.mesh.h_s();
        let inv_j = 2.0 / h;
        let mut u = [0.0; MAXN];
        for e in 0..self.mesh.n_elem_s {
            self.gather_sei(e, y, &mut u[..nn]);
            let left = self.mesh.elem_left_s(e);
            for q in 0..self.nq() {
                let nv = &self.shape.n[q];
                let dv = &self.shape.dn[q];
                let mut u_q = 0.0;
                let mut du = 0.0;
                for a in 0..nn {
                    u_q += nv[a] * u[a];
                    du += dv[a] * u[a];
                }
                du *= inv_j;
                let r = left + 0.5 * (self.shape.rule.points[q] + 1.0) * h;
                let f = [1.0 + du, 1.0 + u_q / r, 1.0 + u_q / r];
                let idx = e * self.nq() + q;
                let state = self.committed[idx];
                let trial = trial_log_strain_diag(f, state.f_pl)
                    .map_err(|err| err.at_qp(self.mesh.n_elem_p + e, q))?;
                let rm = return_map_diag(trial, tau, self.plastic_mode, &self.params)
                    .map_err(|err| err.at_qp(self.mesh.n_elem_p + e, q))?;
                let (f_pl, eps) = commit_diag(state.f_pl, state.eps_pl_eq, &rm);
                self.committed[idx] = QpState {
                    f_pl,
                    eps_pl_eq: eps,
                };
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitutive::tests::test_params;
    use crate::kinematics::chemical_stretch;
    use crate::mesh::build_mesh;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn curve() -> OcvCurve {
        crate::config::synthetic_anode_ocv()
    }

    fn system(
        n_p: usize,
        n_s: usize,
        p: usize,
        strain: SeiStrainMode,
        plastic: PlasticityMode,
    ) -> FemSystem {
        let (mesh, dof) = build_mesh(n_p, n_s, 0.1, p).unwrap();
        FemSystem::new(mesh, dof, test_params(), curve(), strain, plastic, 6).unwrap()
    }

    /// Stress-free swelling state: homogeneous c, u = (lambda - 1) r in the
    /// particle, matching linear continuation in the SEI if present.
    fn swelling_state(sys: &FemSystem, c_bar: f64) -> Vec<f64> {
        let lam = chemical_stretch(c_bar, sys.params().a_swell).unwrap();
        let mut y = vec![0.0; sys.dim()];
        let mu = {
            let f = [lam, lam, lam];
            particle_qp_response(c_bar, f, sys.params(), sys.ocv()).unwrap().mu
        };
        for (i, &r) in sys.mesh().nodes_p.iter().enumerate() {
            y[sys.dof().c(i)] = c_bar;
            y[sys.dof().mu(i)] = mu;
            y[sys.dof().u_p(i)] = (lam - 1.0) * r;
        }
        for (j, &r) in sys.mesh().nodes_s.iter().enumerate() {
            y[sys.dof().u_s(j)] = (lam - 1.0) * r;
        }
        y
    }

    #[test]
    fn zero_state_zero_flux_zero_residual() {
        let (mesh, dof) = build_mesh(6, 2, 0.1, 3).unwrap();
        let mut params = test_params();
        params.a_swell = 3.0;
        // OCV with U(0) = 0 so mu(0, Id) = 0.
        let ocv = OcvCurve::linear(0.0, -0.5);
        let sys = FemSystem::new(
            mesh,
            dof,
            params,
            ocv,
            SeiStrainMode::Log,
            PlasticityMode::Elastic,
            6,
        )
        .unwrap();
        let y = vec![0.0; sys.dim()];
        let mut out = vec![1.0; sys.dim()];
        sys.rhs(0.0, &y, 1e-3, &mut out).unwrap();
        for (i, v) in out.iter().enumerate() {
            assert!(v.abs() < 1e-15, "row {i}: {v}");
        }
    }

    #[test]
    fn stress_free_swelling_residual_particle_only() {
        for &c_bar in &[0.0, 0.02, 0.3, 0.7, 1.0] {
            let sys = system(8, 0, 4, SeiStrainMode::Log, PlasticityMode::Elastic);
            let y = swelling_state(&sys, c_bar);
            let mut out = vec![0.0; sys.dim()];
            sys.rhs(0.0, &y, 1e-3, &mut out).unwrap();
            for i in 0..sys.dim() {
                assert!(
                    out[i].abs() <= 1e-12,
                    "c = {c_bar}, row {i}: {}",
                    out[i]
                );
            }
        }
    }

    #[test]
    fn spherical_diffusion_eigenvalue() {
        // Decoupled pure-diffusion limit: chi = 0, no swelling, mu = c.
        // Rayleigh quotient of the interpolated first Neumann eigenfunction
        // j0(k r), tan k = k, must reproduce Fo k^2.
        let (mesh, dof) = build_mesh(60, 0, 0.1, 4).unwrap();
        let mut params = test_params();
        params.chi = 0.0;
        params.a_swell = 0.0;
        let ocv = OcvCurve::linear(0.0, 1.0);
        let sys = FemSystem::new(
            mesh,
            dof,
            params,
            ocv,
            SeiStrainMode::Log,
            PlasticityMode::Elastic,
            6,
        )
        .unwrap();
        let k = 4.493_409_457_909_064;
        let j0 = |x: f64| if x.abs() < 1e-8 { 1.0 - x * x / 6.0 } else { x.sin() / x };

        let n = sys.dim();
        let mut psi = vec![0.0; n];
        for (i, &r) in sys.mesh().nodes_p.iter().enumerate() {
            // Offset keeps concentrations in the valid band; constants are
            // annihilated by the stiffness term.
            psi[sys.dof().c(i)] = 0.5 + 0.1 * j0(k * r);
            psi[sys.dof().mu(i)] = 0.5 + 0.1 * j0(k * r);
        }
        // Stiffness action via the rhs: c-rows of -f at zero flux.
        let mut f = vec![0.0; n];
        sys.rhs(0.0, &psi, 1e-3, &mut f).unwrap();
        let mut k_psi = vec![0.0; sys.dof().n_nodes_p];
        for i in 0..sys.dof().n_nodes_p {
            k_psi[i] = -f[sys.dof().c(i)];
        }
        // M-weighted mean removal, then the Rayleigh quotient.
        let mut m_psi = vec![0.0; n];
        sys.mass_apply(&psi, &mut m_psi);
        let ones: Vec<f64> = (0..n).map(|_| 1.0).collect();
        let mut m_ones = vec![0.0; n];
        sys.mass_apply(&ones, &mut m_ones);
        let (mut num, mut psi_m_psi, mut mean_num, mut vol) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..sys.dof().n_nodes_p {
            let ci = sys.dof().c(i);
            num += psi[ci] * k_psi[i];
            psi_m_psi += psi[ci] * m_psi[ci];
            mean_num += m_psi[ci];
            vol += m_ones[ci];
        }
        let mean = mean_num / vol;
        let denom = psi_m_psi - mean * mean_num;
        let rq = num / denom;
        let exact = sys.params().fo * k * k;
        assert!(
            (rq - exact).abs() <= 1e-3 * exact,
            "Rayleigh quotient {rq} vs {exact}"
        );
    }

    #[test]
    fn total_lithium_homogeneous() {
        let sys = system(9, 3, 4, SeiStrainMode::Log, PlasticityMode::Elastic);
        for &c in &[0.02, 1.0] {
            let mut y = vec![0.0; sys.dim()];
            for i in 0..sys.dof().n_nodes_p {
                y[sys.dof().c(i)] = c;
            }
            assert!((sys.total_lithium(&y) - c).abs() < 1e-13);
        }
        // Polynomial field integrated exactly: c = r^2 gives 3/5.
        let mut y = vec![0.0; sys.dim()];
        for (i, &r) in sys.mesh().nodes_p.iter().enumerate() {
            y[sys.dof().c(i)] = r * r;
        }
        assert!((sys.total_lithium(&y) - 0.6).abs() < 1e-13);
    }

    /// Randomized near-physical state for Taylor tests: smooth fields plus
    /// small noise, safely inside all domain guards.
    fn random_state(sys: &FemSystem, rng: &mut ChaCha8Rng, swollen: bool) -> Vec<f64> {
        let c0 = if swollen { 0.6 } else { 0.25 };
        let mut y = swelling_state(sys, c0);
        for (i, &r) in sys.mesh().nodes_p.iter().enumerate() {
            y[sys.dof().c(i)] += 0.05 * (2.5 * r).sin() + rng.gen_range(-0.01..0.01);
            y[sys.dof().mu(i)] += rng.gen_range(-0.05..0.05);
            y[sys.dof().u_p(i)] += 0.01 * r * r + r * rng.gen_range(-2e-3..2e-3);
        }
        for j in 1..sys.dof().n_nodes_s {
            y[sys.dof().u_s(j)] += rng.gen_range(-2e-3..2e-3);
        }
        y
    }

    #[test]
    fn jacobian_taylor_test_all_modes() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let cases = [
            (SeiStrainMode::Gsv, PlasticityMode::Elastic, false),
            (SeiStrainMode::Log, PlasticityMode::Elastic, false),
            (SeiStrainMode::Log, PlasticityMode::RateIndependent, true),
            (SeiStrainMode::Log, PlasticityMode::Viscoplastic, true),
        ];
        for (strain, plastic, swollen) in cases {
            let sys = system(5, 2, 3, strain, plastic);
            let tau = 1e-3;
            for _ in 0..5 {
                let y = random_state(&sys, &mut rng, swollen);
                let n = sys.dim();
                let mut jac = sys.new_jacobian();
                sys.rhs_jacobian(0.0, &y, tau, &mut jac).unwrap();
                let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let mut jv = vec![0.0; n];
                jac.matvec(&v, &mut jv);

                let mut f0 = vec![0.0; n];
                sys.rhs(0.0, &y, tau, &mut f0).unwrap();
                let norm_jv = jv.iter().map(|x| x * x).sum::<f64>().sqrt();

                // Directional derivative check.
                let eps_d = 3e-7;
                let yp: Vec<f64> = y.iter().zip(&v).map(|(a, b)| a + eps_d * b).collect();
                let ym: Vec<f64> = y.iter().zip(&v).map(|(a, b)| a - eps_d * b).collect();
                let mut fp = vec![0.0; n];
                let mut fm = vec![0.0; n];
                sys.rhs(0.0, &yp, tau, &mut fp).unwrap();
                sys.rhs(0.0, &ym, tau, &mut fm).unwrap();
                let mut diff = 0.0;
                for i in 0..n {
                    let d = (fp[i] - fm[i]) / (2.0 * eps_d) - jv[i];
                    diff += d * d;
                }
                let rel = diff.sqrt() / (1.0 + norm_jv);
                assert!(rel <= 1e-6, "{strain:?}/{plastic:?}: rel err {rel}");

                // Taylor remainder slope 2; epsilons small enough that the
                // cubic term does not contaminate the ratio.
                let mut errs = Vec::new();
                for &eps in &[1e-4, 1e-5] {
                    let yp: Vec<f64> = y.iter().zip(&v).map(|(a, b)| a + eps * b).collect();
                    let mut f1 = vec![0.0; n];
                    sys.rhs(0.0, &yp, tau, &mut f1).unwrap();
                    let mut acc = 0.0;
                    for i in 0..n {
                        let rsd = f1[i] - f0[i] - eps * jv[i];
                        acc += rsd * rsd;
                    }
                    errs.push(acc.sqrt());
                }
                let slope = (errs[0] / errs[1]).log10();
                assert!(
                    (slope - 2.0).abs() <= 0.1,
                    "{strain:?}/{plastic:?}: slope {slope} ({errs:?})"
                );
            }
        }
    }

    #[test]
    fn mechanics_block_symmetric_at_stress_free_state() {
        let sys = system(6, 0, 3, SeiStrainMode::Log, PlasticityMode::Elastic);
        let y = swelling_state(&sys, 0.4);
        let mut jac = sys.new_jacobian();
        sys.rhs_jacobian(0.0, &y, 1e-3, &mut jac).unwrap();
        let n_nodes = sys.dof().n_nodes_p;
        let mut max_asym = 0.0f64;
        let mut max_entry = 0.0f64;
        for i in 1..n_nodes {
            for j in 1..n_nodes {
                let a = jac.get(sys.dof().u_p(i), sys.dof().u_p(j));
                let b = jac.get(sys.dof().u_p(j), sys.dof().u_p(i));
                max_asym = max_asym.max((a - b).abs());
                max_entry = max_entry.max(a.abs());
            }
        }
        assert!(
            max_asym <= 1e-5 * max_entry,
            "asymmetry {max_asym} vs scale {max_entry}"
        );
    }

    #[test]
    fn consistency_solve_and_interface_continuity_refinement() {
        // Nontrivial elastic state: SEI constrains the swollen particle, so
        // interface tractions are nonzero; the sigma_rr jump must vanish
        // under h-refinement at order >= p.
        let p = 2;
        let mut jumps = Vec::new();
        for &(n_p, n_s) in &[(4usize, 2usize), (8, 4), (16, 8)] {
            let mut sys = system(n_p, n_s, p, SeiStrainMode::Log, PlasticityMode::Elastic);
            let mut y = swelling_state(&sys, 0.5);
            sys.solve_consistent_state(&mut y, 0.5, 1e-10).unwrap();
            let inner = sys.sample_fields(&y, &[1.0], 1e-3).unwrap()[0].sigma_rr;
            let (outer, _) = sys.interface_stress_sei(&y, 1e-3).unwrap();
            jumps.push((inner - outer).abs());
        }
        let rate1 = (jumps[0] / jumps[1]).log2();
        let rate2 = (jumps[1] / jumps[2]).log2();
        assert!(
            rate1 >= p as f64 - 0.5 && rate2 >= p as f64 - 0.5,
            "jumps {jumps:?}, rates {rate1} {rate2}"
        );
        // The jump is already small in absolute terms.
        assert!(jumps[2] < 1e-5);
    }

    #[test]
    fn consistency_solve_squeezes_sei() {
        // With an SEI shell, free swelling is impeded: interface radial
        // stress is compressive and equal on both sides.
        let mut sys = system(12, 4, 3, SeiStrainMode::Log, PlasticityMode::Elastic);
        let mut y = swelling_state(&sys, 0.5);
        sys.solve_consistent_state(&mut y, 0.5, 1e-10).unwrap();
        let inner = sys.sample_fields(&y, &[1.0], 1e-3).unwrap()[0].sigma_rr;
        assert!(inner < 0.0, "expected compression, got {inner}");
        // Hoop stress in the SEI is tensile.
        let (_, sigma_tt) = sys.interface_stress_sei(&y, 1e-3).unwrap();
        assert!(sigma_tt > 0.0);
        // Concentration rows pinned at the target.
        for i in 0..sys.dof().n_nodes_p {
            assert!((y[sys.dof().c(i)] - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn center_regularity_and_swelling_samples() {
        let sys = system(10, 2, 4, SeiStrainMode::Log, PlasticityMode::Elastic);
        let y = swelling_state(&sys, 0.3);
        let samples = sys
            .sample_fields(&y, &[0.0, 0.31, 1.0, 1.05, 1.1], 1e-3)
            .unwrap();
        // The particle swells stress-free; the same displacement field
        // stretches the unswollen SEI, which therefore carries stress.
        for s in &samples[..3] {
            assert!(s.sigma_rr.abs() < 1e-12, "r = {}: {}", s.r, s.sigma_rr);
            assert!(s.sigma_tt.abs() < 1e-12);
        }
        assert_eq!(samples[0].sigma_rr, samples[0].sigma_tt);
        assert!(samples[3].c.is_none());
        assert!(samples[3].sigma_tt.abs() > 1e-6);
        assert!(samples[1].c.is_some());
        // Out-of-domain radius rejected.
        assert!(matches!(
            sys.sample_fields(&y, &[1.2], 1e-3),
            Err(ModelError::SampleOutOfDomain(_))
        ));
    }

    #[test]
    fn mass_matrix_row_sums_integrate_r_squared() {
        // Sum_j M_ij 1 = int phi_i r^2 dr; total sums to 1/3.
        let sys = system(7, 2, 3, SeiStrainMode::Log, PlasticityMode::Elastic);
        let ones = vec![1.0; sys.dim()];
        let mut out = vec![0.0; sys.dim()];
        sys.mass_apply(&ones, &mut out);
        let mut total = 0.0;
        for i in 0..sys.dof().n_nodes_p {
            total += out[sys.dof().c(i)];
        }
        assert!((total - 1.0 / 3.0).abs() < 1e-14);
        // Mass rows exist only on concentration unknowns.
        for i in 0..sys.dof().n_nodes_p {
            assert_eq!(out[sys.dof().mu(i)], 0.0);
            assert_eq!(out[sys.dof().u_p(i)], 0.0);
        }
        for j in 1..sys.dof().n_nodes_s {
            assert_eq!(out[sys.dof().u_s(j)], 0.0);
        }
    }

    #[test]
    fn flux_term_feeds_only_interface_row() {
        let mut sys = system(5, 1, 2, SeiStrainMode::Log, PlasticityMode::Elastic);
        let y = swelling_state(&sys, 0.3);
        let mut f0 = vec![0.0; sys.dim()];
        sys.rhs(0.0, &y, 1e-3, &mut f0).unwrap();
        sys.set_flux(1.0);
        let mut f1 = vec![0.0; sys.dim()];
        sys.rhs(0.0, &y, 1e-3, &mut f1).unwrap();
        for i in 0..sys.dim() {
            let want = if i == sys.dof().c(sys.dof().n_nodes_p - 1) {
                1.0 / 3.0
            } else {
                0.0
            };
            assert!((f1[i] - f0[i] - want).abs() < 1e-15, "row {i}");
        }
    }

    #[test]
    fn commit_advances_only_plastic_states() {
        let mut sys = system(6, 2, 3, SeiStrainMode::Log, PlasticityMode::RateIndependent);
        let mut y = swelling_state(&sys, 0.7);
        sys.solve_consistent_state(&mut y, 0.7, 1e-9).unwrap();
        let before = sys.internal_hash();
        // Large swelling drives the SEI beyond yield.
        let excess = sys.max_yield_excess(&y).unwrap();
        assert!(excess > 0.0, "state not yielded: {excess}");
        sys.commit(0.0, &y, 1e-3).unwrap();
        assert_ne!(sys.internal_hash(), before);
        // After the commit the state sits on the yield surface.
        let excess = sys.max_yield_excess(&y).unwrap();
        assert!(
            excess.abs() <= 1e-10 * sys.params().sigma_y,
            "post-commit excess {excess}"
        );
        // Second commit at the same state is a no-op up to roundoff.
        let h1 = sys.internal_hash();
        sys.commit(0.0, &y, 1e-3).unwrap();
        let excess2 = sys.max_yield_excess(&y).unwrap();
        assert!(excess2.abs() <= 1e-10 * sys.params().sigma_y);
        let _ = h1;
    }

    #[test]
    fn elastic_commit_is_noop() {
        let mut sys = system(6, 2, 3, SeiStrainMode::Log, PlasticityMode::Elastic);
        let y = swelling_state(&sys, 0.8);
        let before = sys.internal_hash();
        sys.commit(0.0, &y, 1e-3).unwrap();
        assert_eq!(sys.internal_hash(), before);
    }
}
