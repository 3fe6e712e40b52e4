//! Kinematics: radial deformation gradients, chemical swelling stretch,
//! multiplicative elastic split, and both elastic strain measures.
//!
//! In the spherically symmetric reduction every tensor here is diagonal in
//! the (r, theta, phi) frame; `diag` helpers provide that fast path while
//! the general tensor operations remain available (and are the ones the
//! property tests exercise in full 3D generality).

use crate::tensor::{spectral_apply, Tensor2};
use crate::{ModelError, Result};

/// Displacement data of a material point in the radial reduction.
///
/// Invariant: `1 + du_dr > 0` and `1 + u_over_r > 0` (componentwise
/// orientation preservation).
#[derive(Clone, Copy, Debug)]
pub struct RadialKinematicPoint {
    /// Radial derivative of the radial displacement, dimensionless.
    pub du_dr: f64,
    /// Hoop stretch term u/r, dimensionless.
    pub u_over_r: f64,
    /// Referential radius, dimensionless.
    pub r: f64,
}

/// F = diag(1 + u', 1 + u/r, 1 + u/r) for a radial displacement field.
pub fn radial_deformation_gradient(p: RadialKinematicPoint) -> Result<Tensor2> {
    let (frr, ftt) = radial_deformation_gradient_diag(p)?;
    Ok(Tensor2::diag(frr, ftt, ftt))
}

/// Diagonal (F_rr, F_tt) of the radial deformation gradient.
pub fn radial_deformation_gradient_diag(p: RadialKinematicPoint) -> Result<(f64, f64)> {
    let frr = 1.0 + p.du_dr;
    let ftt = 1.0 + p.u_over_r;
    if !(frr > 0.0 && ftt > 0.0) || !frr.is_finite() || !ftt.is_finite() {
        return Err(ModelError::OrientationViolation(format!(
            "F = diag({frr}, {ftt}, {ftt}) at r = {}",
            p.r
        )));
    }
    Ok((frr, ftt))
}

/// Isotropic swelling stretch lambda_ch = (1 + v_pmv c_max c_bar)^(1/3).
///
/// Satisfies lambda_ch^3 = 1 + v_pmv_cmax * c_bar to machine precision.
pub fn chemical_stretch(c_bar: f64, v_pmv_cmax: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&c_bar) {
        return Err(ModelError::ConcentrationOutOfRange(c_bar));
    }
    Ok((1.0 + v_pmv_cmax * c_bar).cbrt())
}

/// Swelling stretch without the [0,1] range guard, for assembly-path use
/// where Newton iterates may transiently leave the physical range. Still
/// requires 1 + v_pmv_cmax * c_bar > 0.
pub fn chemical_stretch_unchecked(c_bar: f64, v_pmv_cmax: f64) -> Result<f64> {
    let arg = 1.0 + v_pmv_cmax * c_bar;
    if !(arg > 0.0) {
        return Err(ModelError::ConcentrationOutOfRange(c_bar));
    }
    Ok(arg.cbrt())
}

/// Selects how the elastic part of F is extracted.
pub enum ElasticSplit<'a> {
    /// Particle: F_el = lambda_ch^-1 F (no plastic flow).
    Particle { lambda_ch: f64 },
    /// SEI: F_el = F F_pl^-1 (no chemical swelling).
    Sei { f_pl: &'a Tensor2 },
}

/// Elastic part of the deformation gradient under the multiplicative split.
pub fn elastic_part(f: &Tensor2, mode: ElasticSplit) -> Result<Tensor2> {
    let det = f.det();
    if !(det > 0.0) {
        return Err(ModelError::OrientationViolation(format!("det F = {det}")));
    }
    match mode {
        ElasticSplit::Particle { lambda_ch } => {
            if !(lambda_ch > 0.0) {
                return Err(ModelError::OrientationViolation(format!(
                    "lambda_ch = {lambda_ch}"
                )));
            }
            Ok(f.scale(1.0 / lambda_ch))
        }
        ElasticSplit::Sei { f_pl } => {
            let inv = f_pl.inverse()?;
            Ok(f.matmul(&inv))
        }
    }
}

/// Green-St-Venant (Lagrangian) strain E = (F^T F - Id) / 2.
pub fn gsv_strain(f_el: &Tensor2) -> Tensor2 {
    let c = f_el.transpose().matmul(f_el);
    c.sub(&Tensor2::identity()).scale(0.5)
}

/// Logarithmic Hencky strain E = sum_a ln(sqrt(eta_a)) r_a (x) r_a with
/// (eta_a, r_a) the eigenpairs of C_el = F_el^T F_el.
pub fn hencky_strain(f_el: &Tensor2) -> Result<Tensor2> {
    let c = f_el.transpose().matmul(f_el);
    let (vals, _) = c.eig_sym()?;
    if vals[0] <= 0.0 {
        return Err(ModelError::SpectralFailure(format!(
            "C_el not positive definite, smallest eigenvalue {}",
            vals[0]
        )));
    }
    spectral_apply(&c, |eta| 0.5 * eta.ln())
}

/// Isotropic stiffness application C[E] = lambda tr(E) Id + 2 G E.
pub fn stiffness_apply(e: &Tensor2, lambda: f64, g: f64) -> Tensor2 {
    let tr = lambda * e.trace();
    let mut r = e.scale(2.0 * g);
    for i in 0..3 {
        r.m[i][i] += tr;
    }
    r
}

/// Diagonal fast path of [`stiffness_apply`].
#[inline]
pub fn stiffness_apply_diag(e: [f64; 3], lambda: f64, g: f64) -> [f64; 3] {
    let tr = lambda * (e[0] + e[1] + e[2]);
    [
        tr + 2.0 * g * e[0],
        tr + 2.0 * g * e[1],
        tr + 2.0 * g * e[2],
    ]
}

/// Lame constants (lambda, G) from Young's modulus and Poisson ratio.
pub fn lame_constants(young: f64, nu: f64) -> (f64, f64) {
    let g = young / (2.0 * (1.0 + nu));
    let lambda = 2.0 * g * nu / (1.0 - 2.0 * nu);
    (lambda, g)
}
