//! Scenario configuration: JSON schema with explicit units in field names,
//! validation, and conversion to the dimensionless parameter set.
//!
//! The solver works in nondimensional variables (length over the particle
//! radius, time in hours, stress over the particle Young's modulus,
//! potential over Fa * 1 V); all unit conversions happen here at ingestion.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::constitutive::{BvParams, DimlessParams, SeiStrainMode};
use crate::kinematics::lame_constants;
use crate::ndf::NdfOptions;
use crate::newton::NewtonOptions;
use crate::ocv::OcvCurve;
use crate::{ModelError, Result};

/// Elastic strain measure used for the SEI shell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrainMode {
    Gsv,
    Log,
}

impl StrainMode {
    pub fn to_sei(self) -> SeiStrainMode {
        match self {
            StrainMode::Gsv => SeiStrainMode::Gsv,
            StrainMode::Log => SeiStrainMode::Log,
        }
    }

    fn tag(self) -> &'static str {
        match self {
            StrainMode::Gsv => "gsv",
            StrainMode::Log => "log",
        }
    }
}

/// Inelastic response of the SEI.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlasticityMode {
    Elastic,
    RateIndependent,
    Viscoplastic,
}

impl PlasticityMode {
    fn tag(self) -> &'static str {
        match self {
            PlasticityMode::Elastic => "elastic",
            PlasticityMode::RateIndependent => "rate_independent",
            PlasticityMode::Viscoplastic => "viscoplastic",
        }
    }
}

/// Mesh resolution presets: `ci` for fast gated runs, `paper` for the
/// production resolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeshProfile {
    Ci,
    Paper,
}

impl MeshProfile {
    /// (particle elements, SEI elements, polynomial order, quadrature points).
    pub fn dims(self) -> (usize, usize, usize, usize) {
        match self {
            MeshProfile::Ci => (120, 12, 4, 6),
            MeshProfile::Paper => (1200, 120, 4, 6),
        }
    }
}

/// Cycling protocol: alternating constant-flux half cycles starting with
/// lithiation.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Protocol {
    #[serde(default = "default_c_rate")]
    pub c_rate_per_h: f64,
    #[serde(default = "default_half_cycles")]
    pub half_cycles: usize,
    #[serde(default = "default_duration")]
    pub half_cycle_duration_h: f64,
    #[serde(default = "default_c0")]
    pub c0: f64,
}

fn default_c_rate() -> f64 {
    1.0
}
fn default_half_cycles() -> usize {
    3
}
fn default_duration() -> f64 {
    0.9
}
fn default_c0() -> f64 {
    0.02
}

impl Default for Protocol {
    fn default() -> Self {
        Protocol {
            c_rate_per_h: default_c_rate(),
            half_cycles: default_half_cycles(),
            half_cycle_duration_h: default_duration(),
            c0: default_c0(),
        }
    }
}

/// Material data in SI units. Defaults reproduce the silicon/SEI reference
/// parameter set.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Material {
    #[serde(default = "default_e_p")]
    pub e_p_pa: f64,
    #[serde(default = "default_nu_p")]
    pub nu_p: f64,
    #[serde(default = "default_e_s")]
    pub e_s_pa: f64,
    #[serde(default = "default_nu_s")]
    pub nu_s: f64,
    /// Product of partial molar volume and maximal concentration.
    #[serde(default = "default_v_pmv_cmax")]
    pub v_pmv_cmax: f64,
    #[serde(default = "default_c_max")]
    pub c_max_mol_per_m3: f64,
    #[serde(default = "default_diffusivity")]
    pub d_m2_per_s: f64,
    /// Particle radius (reference length).
    #[serde(default = "default_l0_p")]
    pub l0_p_m: f64,
    /// SEI thickness over particle radius.
    #[serde(default = "default_l_s")]
    pub l_s_over_l0_p: f64,
    #[serde(default = "default_rho0")]
    pub rho0_kg_per_m3: f64,
    #[serde(default = "default_faraday")]
    pub faraday_c_per_mol: f64,
    #[serde(default = "default_sigma_y")]
    pub sigma_y_pa: f64,
    /// Rate-sensitivity stress; defaults to sigma_y_pa.
    #[serde(default)]
    pub sigma_y_star_pa: Option<f64>,
    /// Apply the sqrt(2/3) deviatoric-norm rescale to sigma_y_star in the
    /// overstress law (consistent with the yield radius).
    #[serde(default = "default_true")]
    pub rescale_sigma_y_star: bool,
    /// Rate-sensitivity exponent; required for viscoplastic runs.
    #[serde(default)]
    pub beta: Option<f64>,
    /// Reference strain rate; required for viscoplastic runs.
    #[serde(default)]
    pub eps_dot0_per_s: Option<f64>,
}

fn default_e_p() -> f64 {
    90.13e9
}
fn default_nu_p() -> f64 {
    0.28
}
fn default_e_s() -> f64 {
    0.9e9
}
fn default_nu_s() -> f64 {
    0.25
}
fn default_v_pmv_cmax() -> f64 {
    3.0
}
fn default_c_max() -> f64 {
    3.11e5
}
fn default_diffusivity() -> f64 {
    1.0e-17
}
fn default_l0_p() -> f64 {
    50.0e-9
}
fn default_l_s() -> f64 {
    0.1
}
fn default_rho0() -> f64 {
    2285.0
}
fn default_faraday() -> f64 {
    96_485.332_12
}
fn default_sigma_y() -> f64 {
    49.5e6
}
fn default_true() -> bool {
    true
}

impl Default for Material {
    fn default() -> Self {
        serde_json::from_str("{}").expect("empty material defaults")
    }
}

/// Butler-Volmer voltage postprocessing constants.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BvConfig {
    #[serde(default = "default_temperature")]
    pub temperature_k: f64,
    /// Exchange-current parameter in flux units (C per mol-site per hour).
    #[serde(default = "default_faraday")]
    pub i00_c_per_mol_h: f64,
}

fn default_temperature() -> f64 {
    298.15
}

impl Default for BvConfig {
    fn default() -> Self {
        BvConfig {
            temperature_k: default_temperature(),
            i00_c_per_mol_h: default_faraday(),
        }
    }
}

/// Integrator and Newton tolerances (time unit: hours).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default = "default_abs_tol")]
    pub abs_tol: f64,
    #[serde(default = "default_tau_init")]
    pub tau_init_h: f64,
    #[serde(default = "default_tau_max")]
    pub tau_max_h: f64,
    #[serde(default = "default_tau_min")]
    pub tau_min_h: f64,
    #[serde(default = "default_newton_tol")]
    pub newton_tol: f64,
    #[serde(default = "default_max_order")]
    pub max_order: usize,
    #[serde(default)]
    pub bdf_mode: bool,
}

fn default_rel_tol() -> f64 {
    1e-5
}
fn default_abs_tol() -> f64 {
    1e-8
}
fn default_tau_init() -> f64 {
    1e-8
}
fn default_tau_max() -> f64 {
    1e-3
}
fn default_tau_min() -> f64 {
    1e-12
}
fn default_newton_tol() -> f64 {
    1e-3
}
fn default_max_order() -> usize {
    5
}

impl Default for Tolerances {
    fn default() -> Self {
        serde_json::from_str("{}").expect("empty tolerance defaults")
    }
}

/// Full scenario description as read from the JSON config file.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Run tag used in output paths; derived from the modes when absent.
    #[serde(default)]
    pub name: Option<String>,
    pub strain_mode: StrainMode,
    pub plasticity_mode: PlasticityMode,
    #[serde(default = "default_mesh_profile")]
    pub mesh_profile: MeshProfile,
    #[serde(default)]
    pub protocol: Protocol,
    #[serde(default)]
    pub material: Material,
    /// Two-column CSV (c, U[V]); a built-in synthetic anode curve is used
    /// when absent.
    #[serde(default)]
    pub ocv_csv_path: Option<PathBuf>,
    #[serde(default)]
    pub bv: BvConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn default_mesh_profile() -> MeshProfile {
    MeshProfile::Ci
}

impl ScenarioConfig {
    /// Minimal configuration for the given mode pair, everything else at
    /// defaults.
    pub fn for_modes(strain: StrainMode, plastic: PlasticityMode) -> Self {
        ScenarioConfig {
            name: None,
            strain_mode: strain,
            plasticity_mode: plastic,
            mesh_profile: default_mesh_profile(),
            protocol: Protocol::default(),
            material: Material::default(),
            ocv_csv_path: None,
            bv: BvConfig::default(),
            tolerances: Tolerances::default(),
            output_dir: None,
        }
    }

    pub fn run_name(&self) -> String {
        match &self.name {
            Some(n) => n.clone(),
            None => format!("{}-{}", self.strain_mode.tag(), self.plasticity_mode.tag()),
        }
    }

    /// Checks all schema invariants; called by `load_config` and before
    /// every run.
    pub fn validate(&self) -> Result<()> {
        let m = &self.material;
        let positive = [
            ("material.e_p_pa", m.e_p_pa),
            ("material.e_s_pa", m.e_s_pa),
            ("material.v_pmv_cmax", m.v_pmv_cmax),
            ("material.c_max_mol_per_m3", m.c_max_mol_per_m3),
            ("material.d_m2_per_s", m.d_m2_per_s),
            ("material.l0_p_m", m.l0_p_m),
            ("material.l_s_over_l0_p", m.l_s_over_l0_p),
            ("material.rho0_kg_per_m3", m.rho0_kg_per_m3),
            ("material.faraday_c_per_mol", m.faraday_c_per_mol),
            ("material.sigma_y_pa", m.sigma_y_pa),
            ("bv.temperature_k", self.bv.temperature_k),
            ("bv.i00_c_per_mol_h", self.bv.i00_c_per_mol_h),
        ];
        for (field, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ModelError::config(field, format!("must be positive, got {v}")));
            }
        }
        for (field, nu) in [("material.nu_p", m.nu_p), ("material.nu_s", m.nu_s)] {
            if !(0.0 < nu && nu < 0.5) {
                return Err(ModelError::config(field, format!("must lie in (0, 0.5), got {nu}")));
            }
        }
        if let Some(s) = m.sigma_y_star_pa {
            if !(s > 0.0 && s.is_finite()) {
                return Err(ModelError::config(
                    "material.sigma_y_star_pa",
                    format!("must be positive, got {s}"),
                ));
            }
        }
        let p = &self.protocol;
        if !(p.c_rate_per_h > 0.0 && p.c_rate_per_h.is_finite()) {
            return Err(ModelError::config(
                "protocol.c_rate_per_h",
                format!("must be positive, got {}", p.c_rate_per_h),
            ));
        }
        if p.half_cycles == 0 {
            return Err(ModelError::config("protocol.half_cycles", "must be at least 1"));
        }
        if !(p.half_cycle_duration_h > 0.0 && p.half_cycle_duration_h.is_finite()) {
            return Err(ModelError::config(
                "protocol.half_cycle_duration_h",
                format!("must be positive, got {}", p.half_cycle_duration_h),
            ));
        }
        if !(0.0..1.0).contains(&p.c0) {
            return Err(ModelError::config(
                "protocol.c0",
                format!("must lie in [0, 1), got {}", p.c0),
            ));
        }
        let swing = p.c_rate_per_h * p.half_cycle_duration_h;
        if p.c0 + swing > 1.0 + 1e-12 {
            return Err(ModelError::config(
                "protocol",
                format!(
                    "lithiation exceeds capacity: c0 + c_rate * duration = {} > 1",
                    p.c0 + swing
                ),
            ));
        }
        if self.strain_mode == StrainMode::Gsv && self.plasticity_mode != PlasticityMode::Elastic {
            return Err(ModelError::config(
                "plasticity_mode",
                "plastic SEI response requires the logarithmic strain measure",
            ));
        }
        if self.plasticity_mode == PlasticityMode::Viscoplastic {
            if m.beta.is_none() {
                return Err(ModelError::config(
                    "material.beta",
                    "required for viscoplastic runs",
                ));
            }
            if m.eps_dot0_per_s.is_none() {
                return Err(ModelError::config(
                    "material.eps_dot0_per_s",
                    "required for viscoplastic runs",
                ));
            }
        }
        if let Some(beta) = m.beta {
            if !(beta >= 1.0 && beta.is_finite()) {
                return Err(ModelError::config(
                    "material.beta",
                    format!("must be >= 1, got {beta}"),
                ));
            }
        }
        if let Some(e0) = m.eps_dot0_per_s {
            if !(e0 > 0.0 && e0.is_finite()) {
                return Err(ModelError::config(
                    "material.eps_dot0_per_s",
                    format!("must be positive, got {e0}"),
                ));
            }
        }
        let t = &self.tolerances;
        for (field, v) in [
            ("tolerances.rel_tol", t.rel_tol),
            ("tolerances.abs_tol", t.abs_tol),
            ("tolerances.tau_init_h", t.tau_init_h),
            ("tolerances.tau_max_h", t.tau_max_h),
            ("tolerances.tau_min_h", t.tau_min_h),
            ("tolerances.newton_tol", t.newton_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ModelError::config(field, format!("must be positive, got {v}")));
            }
        }
        if !(t.tau_min_h <= t.tau_init_h && t.tau_init_h <= t.tau_max_h) {
            return Err(ModelError::config(
                "tolerances",
                "step bounds must satisfy tau_min <= tau_init <= tau_max",
            ));
        }
        if !(1..=5).contains(&t.max_order) {
            return Err(ModelError::config("tolerances.max_order", "must lie in 1..=5"));
        }
        Ok(())
    }

    /// Dimensionless parameter set (length / L0_P, time / 1 h, stress / E_P).
    pub fn dimless_params(&self) -> DimlessParams {
        let m = &self.material;
        let (lam_p, g_p) = lame_constants(1.0, m.nu_p);
        let (lam_s, g_s) = lame_constants(m.e_s_pa / m.e_p_pa, m.nu_s);
        let sigma_y_star = m.sigma_y_star_pa.unwrap_or(m.sigma_y_pa);
        DimlessParams {
            lam_p,
            g_p,
            lam_s,
            g_s,
            a_swell: m.v_pmv_cmax,
            chi: m.v_pmv_cmax * m.e_p_pa / (m.c_max_mol_per_m3 * m.faraday_c_per_mol),
            fo: m.d_m2_per_s * 3600.0 / (m.l0_p_m * m.l0_p_m),
            sigma_y: m.sigma_y_pa / m.e_p_pa,
            sigma_y_star: sigma_y_star / m.e_p_pa,
            rescale_sigma_y_star: m.rescale_sigma_y_star,
            beta: m.beta.unwrap_or(1.0),
            eps_dot0: m.eps_dot0_per_s.unwrap_or(0.0) * 3600.0,
            l_s: m.l_s_over_l0_p,
            stress_scale_pa: m.e_p_pa,
            faraday: m.faraday_c_per_mol,
        }
    }

    pub fn bv_params(&self) -> BvParams {
        BvParams {
            temperature_k: self.bv.temperature_k,
            i00_c_per_mol_h: self.bv.i00_c_per_mol_h,
            faraday: self.material.faraday_c_per_mol,
        }
    }

    pub fn ndf_options(&self) -> NdfOptions {
        let t = &self.tolerances;
        NdfOptions {
            rtol: t.rel_tol,
            atol: t.abs_tol,
            tau_init: t.tau_init_h,
            tau_max: t.tau_max_h,
            tau_min: t.tau_min_h,
            max_order: t.max_order,
            bdf_mode: t.bdf_mode,
            newton: NewtonOptions {
                tol: t.newton_tol,
                ..NewtonOptions::default()
            },
            fixed_order: None,
            fixed_tau: None,
        }
    }

    /// Loads the OCV curve from the configured path, or the built-in
    /// synthetic anode curve when no path is set.
    pub fn load_ocv(&self) -> Result<OcvCurve> {
        match &self.ocv_csv_path {
            Some(path) => OcvCurve::from_csv(path),
            None => Ok(synthetic_anode_ocv()),
        }
    }
}

/// Synthetic amorphous-anode open-circuit curve sampled on 41 points:
/// U(c) = 0.1 + 0.25 (1 - c) + 0.9 exp(-25 c) volts.
pub fn synthetic_anode_ocv() -> OcvCurve {
    let c: Vec<f64> = (0..=40).map(|i| i as f64 / 40.0).collect();
    let u: Vec<f64> = c
        .iter()
        .map(|&x| 0.1 + 0.25 * (1.0 - x) + 0.9 * (-25.0 * x).exp())
        .collect();
    OcvCurve::from_table(c, u).expect("synthetic curve is monotone")
}

/// Reads and validates a scenario configuration file.
pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)?;
    let config: ScenarioConfig = serde_json::from_str(&text)?;
    config.validate()?;
    Ok(config)
}
