//! Constitutive relations derived from the free energy: chemical potential,
//! mobility, first Piola-Kirchhoff stresses for all strain/domain variants,
//! Cauchy stress, and the Butler-Volmer voltage postprocess.
//!
//! Everything operates in the solver's dimensionless form: lengths in units
//! of the particle radius, time in hours, stresses in units of the particle
//! Young's modulus E_P, chemical potential in units of Fa * 1 V. Conversion
//! to and from SI happens only in the config and output layers.

use crate::kinematics::{
    chemical_stretch_unchecked, elastic_part, gsv_strain, hencky_strain, stiffness_apply,
    stiffness_apply_diag, ElasticSplit,
};
use crate::ocv::OcvCurve;
use crate::tensor::Tensor2;
use crate::{ModelError, Result};

/// Dimensionless material parameters plus the few physical constants needed
/// for output conversion. Stress-like fields carry E_P units; rates are per
/// hour.
#[derive(Clone, Debug)]
pub struct DimlessParams {
    /// Particle Lame constants in units of E_P.
    pub lam_p: f64,
    pub g_p: f64,
    /// SEI Lame constants in units of E_P.
    pub lam_s: f64,
    pub g_s: f64,
    /// Swelling product v_pmv * c_max.
    pub a_swell: f64,
    /// Chemo-mechanical coupling number v_pmv * E_P / (Fa * 1 V).
    pub chi: f64,
    /// Fourier number D * 1h / L0_P^2.
    pub fo: f64,
    /// Yield stress and rate-sensitivity stress in units of E_P.
    pub sigma_y: f64,
    pub sigma_y_star: f64,
    /// Whether sigma_y_star carries the sqrt(2/3) tensile-test rescale that
    /// is always applied to sigma_y.
    pub rescale_sigma_y_star: bool,
    /// Rate-sensitivity exponent.
    pub beta: f64,
    /// Reference plastic strain rate, per hour.
    pub eps_dot0: f64,
    /// SEI thickness over particle radius.
    pub l_s: f64,
    /// Stress scale E_P in Pa (output conversion).
    pub stress_scale_pa: f64,
    /// Faraday constant in C/mol (voltage postprocess).
    pub faraday: f64,
}

impl DimlessParams {
    /// Effective yield radius sqrt(2/3) sigma_y in deviatoric-norm space.
    pub fn yield_radius(&self) -> f64 {
        (2.0f64 / 3.0).sqrt() * self.sigma_y
    }

    /// Overstress denominator of the viscoplastic flow rule.
    pub fn overstress_scale(&self) -> f64 {
        if self.rescale_sigma_y_star {
            (2.0f64 / 3.0).sqrt() * self.sigma_y_star
        } else {
            self.sigma_y_star
        }
    }
}

/// Chemical potential split into its chemical and mechanical contributions,
/// in Fa * 1 V units.
#[derive(Clone, Copy, Debug)]
pub struct ChemicalPotential {
    pub chemical: f64,
    pub mechanical: f64,
}

impl ChemicalPotential {
    pub fn total(&self) -> f64 {
        self.chemical + self.mechanical
    }
}

/// mu = -U_ocv(c) - chi / (3 lambda_ch^5) * F^T F : C_P[E_el], with E_el the
/// Green-St-Venant elastic strain of the particle.
pub fn chemical_potential(
    c_bar: f64,
    f: &Tensor2,
    params: &DimlessParams,
    ocv: &OcvCurve,
) -> Result<ChemicalPotential> {
    let (u, _) = ocv.ocv_extended(c_bar)?;
    let lam = chemical_stretch_unchecked(c_bar, params.a_swell)?;
    let f_el = elastic_part(f, ElasticSplit::Particle { lambda_ch: lam })?;
    let e_el = gsv_strain(&f_el);
    let s = stiffness_apply(&e_el, params.lam_p, params.g_p);
    let k = f.transpose().matmul(f);
    let mechanical = -params.chi / (3.0 * lam.powi(5)) * k.ddot(&s);
    Ok(ChemicalPotential {
        chemical: -u,
        mechanical,
    })
}

/// Analytic d(mu)/dc at fixed displacement gradient, differentiating both
/// the OCV term and the swelling chain through lambda_ch:
///
///   d(mu)/dc = -U'(c) + chi a / 9 * (5 lambda^-8 K : C[E_el]
///                                    + lambda^-10 K : C[K]),  K = F^T F.
///
/// Errors with `NonconvexChemistry` when the result is not positive, since
/// the mobility m = Fo / d(mu)/dc then loses meaning.
pub fn dmu_dc(c_bar: f64, f: &Tensor2, params: &DimlessParams, ocv: &OcvCurve) -> Result<f64> {
    let (_, du) = ocv.ocv_extended(c_bar)?;
    let lam = chemical_stretch_unchecked(c_bar, params.a_swell)?;
    let f_el = elastic_part(f, ElasticSplit::Particle { lambda_ch: lam })?;
    let e_el = gsv_strain(&f_el);
    let s_e = stiffness_apply(&e_el, params.lam_p, params.g_p);
    let k = f.transpose().matmul(f);
    let s_k = stiffness_apply(&k, params.lam_p, params.g_p);
    let mech = params.chi * params.a_swell / 9.0
        * (5.0 * lam.powi(-8) * k.ddot(&s_e) + lam.powi(-10) * k.ddot(&s_k));
    let total = -du + mech;
    if !(total > 0.0) {
        return Err(ModelError::NonconvexChemistry(total));
    }
    Ok(total)
}

/// Scalar mobility m = Fo (d_c mu)^-1.
pub fn mobility(c_bar: f64, f: &Tensor2, params: &DimlessParams, ocv: &OcvCurve) -> Result<f64> {
    Ok(params.fo / dmu_dc(c_bar, f, params, ocv)?)
}

/// Particle stress P = lambda_ch^-2 F C_P[E_el] (Green-St-Venant strain).
pub fn piola_particle_gsv(c_bar: f64, f: &Tensor2, params: &DimlessParams) -> Result<Tensor2> {
    let lam = chemical_stretch_unchecked(c_bar, params.a_swell)?;
    if !(f.det() > 0.0) {
        return Err(ModelError::OrientationViolation(format!(
            "det F = {}",
            f.det()
        )));
    }
    let f_el = elastic_part(f, ElasticSplit::Particle { lambda_ch: lam })?;
    let e_el = gsv_strain(&f_el);
    let s = stiffness_apply(&e_el, params.lam_p, params.g_p);
    Ok(f.matmul(&s).scale(lam.powi(-2)))
}

/// SEI strain-measure selector for [`piola_sei`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SeiStrainMode {
    Gsv,
    Log,
}

/// SEI stress for a given plastic state:
///   gsv: P = F F_pl^-T F_pl^-1 C_S[E_gsv(F_el)]
///   log: P = F (F_el^T F_el)^-1 F_pl^-T F_pl^-1 C_S[E_log(F_el)]
pub fn piola_sei(
    f: &Tensor2,
    f_pl: &Tensor2,
    mode: SeiStrainMode,
    params: &DimlessParams,
) -> Result<Tensor2> {
    if !(f.det() > 0.0) {
        return Err(ModelError::OrientationViolation(format!(
            "det F = {}",
            f.det()
        )));
    }
    let fpl_inv = f_pl.inverse()?;
    let f_el = f.matmul(&fpl_inv);
    match mode {
        SeiStrainMode::Gsv => {
            let e = gsv_strain(&f_el);
            let s = stiffness_apply(&e, params.lam_s, params.g_s);
            Ok(f
                .matmul(&fpl_inv.transpose())
                .matmul(&fpl_inv)
                .matmul(&s))
        }
        SeiStrainMode::Log => {
            let e = hencky_strain(&f_el)?;
            let s = stiffness_apply(&e, params.lam_s, params.g_s);
            let c_el_inv = f_el.transpose().matmul(&f_el).inverse()?;
            Ok(f
                .matmul(&c_el_inv)
                .matmul(&fpl_inv.transpose())
                .matmul(&fpl_inv)
                .matmul(&s))
        }
    }
}

/// Cauchy stress sigma = P F^T / det F.
pub fn cauchy_from_piola(p: &Tensor2, f: &Tensor2) -> Result<Tensor2> {
    let j = f.det();
    if !(j > 0.0) {
        return Err(ModelError::OrientationViolation(format!("det F = {j}")));
    }
    Ok(p.matmul(&f.transpose()).scale(1.0 / j))
}

/// Diagonal Cauchy stress from diagonal Piola stress and stretches.
#[inline]
pub fn cauchy_diag(p: [f64; 3], f: [f64; 3]) -> [f64; 3] {
    let j = f[0] * f[1] * f[2];
    [p[0] * f[0] / j, p[1] * f[1] / j, p[2] * f[2] / j]
}

/// Free-energy density (dimensionless, in units of c_max Fa 1V) used by the
/// finite-difference oracles for mu:
///   Psi(c, F) = -int_0^c U(z) dz + (chi / a) * 1/2 E_el : C_P[E_el].
pub fn free_energy_particle(
    c_bar: f64,
    f: &Tensor2,
    params: &DimlessParams,
    ocv: &OcvCurve,
) -> Result<f64> {
    let chem = -ocv.ocv_integral(c_bar)?;
    let lam = chemical_stretch_unchecked(c_bar, params.a_swell)?;
    let f_el = elastic_part(f, ElasticSplit::Particle { lambda_ch: lam })?;
    let e = gsv_strain(&f_el);
    let s = stiffness_apply(&e, params.lam_p, params.g_p);
    Ok(chem + params.chi / params.a_swell * 0.5 * e.ddot(&s))
}

/// Elastic energy density (units of E_P) of the particle at fixed c, used by
/// the P = d(psi)/dF oracle.
pub fn elastic_energy_particle(c_bar: f64, f: &Tensor2, params: &DimlessParams) -> Result<f64> {
    let lam = chemical_stretch_unchecked(c_bar, params.a_swell)?;
    let f_el = elastic_part(f, ElasticSplit::Particle { lambda_ch: lam })?;
    let e = gsv_strain(&f_el);
    let s = stiffness_apply(&e, params.lam_p, params.g_p);
    Ok(0.5 * e.ddot(&s))
}

/// Elastic energy density (units of E_P) of the SEI at fixed plastic state.
pub fn elastic_energy_sei(
    f: &Tensor2,
    f_pl: &Tensor2,
    mode: SeiStrainMode,
    params: &DimlessParams,
) -> Result<f64> {
    let fpl_inv = f_pl.inverse()?;
    let f_el = f.matmul(&fpl_inv);
    let e = match mode {
        SeiStrainMode::Gsv => gsv_strain(&f_el),
        SeiStrainMode::Log => hencky_strain(&f_el)?,
    };
    let s = stiffness_apply(&e, params.lam_s, params.g_s);
    Ok(0.5 * e.ddot(&s))
}

/// Butler-Volmer postprocess parameters.
#[derive(Clone, Copy, Debug)]
pub struct BvParams {
    /// Temperature in kelvin.
    pub temperature_k: f64,
    /// Exchange-current parameter, C/(mol h): the overpotential argument is
    /// N_ext * Fa / (2 i00) with N_ext in 1/h.
    pub i00_c_per_mol_h: f64,
    /// Faraday constant, C/mol.
    pub faraday: f64,
}

/// Universal gas constant, J/(mol K).
pub const GAS_CONSTANT: f64 = 8.314_462_618;

/// Cell voltage U = -mu_surface / Fa - eta_BV with
/// eta_BV = (2 R T / Fa) asinh(N_ext Fa / (2 i00)).
///
/// Pure postprocessing; feeds no information back into the PDE.
pub fn voltage_postprocess(mu_surface_j_per_mol: f64, n_ext_per_h: f64, bv: &BvParams) -> f64 {
    let eta = 2.0 * GAS_CONSTANT * bv.temperature_k / bv.faraday
        * (n_ext_per_h * bv.faraday / (2.0 * bv.i00_c_per_mol_h)).asinh();
    -mu_surface_j_per_mol / bv.faraday - eta
}

/// Per-quadrature-point particle response used by assembly and sampling.
#[derive(Clone, Copy, Debug)]
pub struct ParticleQpResponse {
    /// Diagonal first Piola-Kirchhoff stress (rr, tt, tt), E_P units.
    pub p: [f64; 3],
    /// Chemical potential value the mixed equation projects onto.
    pub mu: f64,
    /// Scalar mobility Fo / d(mu)/dc.
    pub mobility: f64,
}

/// Diagonal fast path of the particle constitutive response:
/// stress, chemical potential, and mobility at one quadrature point.
pub fn particle_qp_response(
    c_bar: f64,
    f: [f64; 3],
    params: &DimlessParams,
    ocv: &OcvCurve,
) -> Result<ParticleQpResponse> {
    let (u, du) = ocv.ocv_extended(c_bar)?;
    let lam = chemical_stretch_unchecked(c_bar, params.a_swell)?;
    let inv_l = 1.0 / lam;
    let f_el = [f[0] * inv_l, f[1] * inv_l, f[2] * inv_l];
    let e = [
        0.5 * (f_el[0] * f_el[0] - 1.0),
        0.5 * (f_el[1] * f_el[1] - 1.0),
        0.5 * (f_el[2] * f_el[2] - 1.0),
    ];
    let s = stiffness_apply_diag(e, params.lam_p, params.g_p);
    let il2 = inv_l * inv_l;
    let p = [f[0] * s[0] * il2, f[1] * s[1] * il2, f[2] * s[2] * il2];

    let k = [f[0] * f[0], f[1] * f[1], f[2] * f[2]];
    let k_ddot_se = k[0] * s[0] + k[1] * s[1] + k[2] * s[2];
    let l5 = lam.powi(5);
    let mu = -u - params.chi / (3.0 * l5) * k_ddot_se;

    let s_k = stiffness_apply_diag(k, params.lam_p, params.g_p);
    let k_ddot_sk = k[0] * s_k[0] + k[1] * s_k[1] + k[2] * s_k[2];
    let dmu = -du
        + params.chi * params.a_swell / 9.0
            * (5.0 * lam.powi(-8) * k_ddot_se + lam.powi(-10) * k_ddot_sk);
    if !(dmu > 0.0) {
        return Err(ModelError::NonconvexChemistry(dmu));
    }
    Ok(ParticleQpResponse {
        p,
        mu,
        mobility: params.fo / dmu,
    })
}
