//! Chemo-mechanically coupled simulation of a swelling spherical electrode
//! particle with a surrounding SEI layer, reduced to a 1D radial domain.
//!
//! The model couples lithium diffusion (mixed concentration / chemical
//! potential formulation) with finite-deformation elasticity through a
//! multiplicative split `F = F_ch F_el F_pl`. The SEI supports two elastic
//! strain measures (Green-St-Venant and logarithmic Hencky) and three
//! inelastic responses (elastic, rate-independent plasticity, viscoplastic
//! overstress flow). Time integration uses adaptive variable-order NDF
//! multistep formulas with a Newton corrector and banded LU linear solves.
//!
//! Crate layout:
//! - [`tensor`], [`kinematics`]: tensor algebra, strain measures, swelling.
//! - [`ocv`], [`constitutive`]: open-circuit voltage curve, chemical
//!   potential, mobility, Piola/Cauchy stresses, voltage postprocessing.
//! - [`plasticity`]: yield function, return maps, exponential-map commit.
//! - [`mesh`], [`quadrature`], [`fem`]: radial mesh, Gauss-Legendre rules,
//!   residual/Jacobian/mass assembly, field sampling.
//! - [`linalg`], [`newton`], [`ndf`]: banded LU, damped Newton, NDF
//!   integrator with step/order control.
//! - [`config`], [`driver`], [`output`]: scenario configuration, cycling
//!   protocol orchestration, CSV/JSONL/plot-script emission.
//! - [`selfcheck`]: deterministic oracle suite behind the `check` CLI verb.

pub mod config;
pub mod constitutive;
pub mod driver;
pub mod fem;
pub mod kinematics;
pub mod linalg;
pub mod mesh;
pub mod ndf;
pub mod newton;
pub mod ocv;
pub mod output;
pub mod plasticity;
pub mod quadrature;
pub mod selfcheck;
pub mod tensor;

pub use config::{MeshProfile, PlasticityMode, ScenarioConfig, StrainMode};
pub use constitutive::DimlessParams;
pub use driver::{run_scenario, RunOutputs};
pub use ndf::{AbortInfo, NdfOptions};
pub use plasticity::{InternalState, ReturnMapResult};
pub use tensor::Tensor2;

/// Errors raised by model evaluation, configuration, and I/O.
#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    /// A deformation gradient lost positive orientation (det F <= 0 or a
    /// non-positive principal stretch in the radial representation).
    #[error("orientation violation: {0}")]
    OrientationViolation(String),
    /// Normalized concentration outside the admissible range of the OCV fit.
    #[error("concentration {0} out of range")]
    ConcentrationOutOfRange(f64),
    /// Plastic deformation gradient not invertible.
    #[error("plastic deformation gradient is singular")]
    PlasticSingularity,
    /// Symmetric eigenvalue solver failed to converge.
    #[error("spectral decomposition failed: {0}")]
    SpectralFailure(String),
    /// d(mu)/dc <= 0: the mobility m = D (d_c mu)^-1 is undefined, signalling
    /// an unusable region of the OCV fit.
    #[error("non-convex chemistry: d(mu)/dc = {0} <= 0")]
    NonconvexChemistry(f64),
    /// The bracketed scalar solve for the viscoplastic increment failed.
    #[error("viscoplastic scalar solve failed: {0}")]
    ViscoplasticSolveFailure(String),
    /// Field sampling requested outside [0, 1 + L_S].
    #[error("sample radius {0} outside the computational domain")]
    SampleOutOfDomain(f64),
    /// Assembled Jacobian contains NaN or infinite entries.
    #[error("jacobian contains non-finite entries")]
    JacobianNonFinite,
    /// The algebraic consistency solve for the initial state failed.
    #[error("initialization failed: {0}")]
    InitFailure(String),
    /// Configuration failed schema or invariant validation.
    #[error("config error at `{field}`: {message}")]
    ConfigError { field: String, message: String },
    /// Constitutive evaluation failed at a specific quadrature point; drives
    /// Newton failure handling in the time integrator.
    #[error("element {element}, quadrature point {point}: {source}")]
    QpFailure {
        element: usize,
        point: usize,
        #[source]
        source: Box<ModelError>,
    },
    /// Linear solver found an (numerically) singular matrix.
    #[error("singular linear system at pivot {0}")]
    SingularMatrix(usize),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

impl ModelError {
    /// Wraps an evaluation error with the quadrature point that produced it.
    pub fn at_qp(self, element: usize, point: usize) -> Self {
        ModelError::QpFailure {
            element,
            point,
            source: Box::new(self),
        }
    }

    pub fn config(field: &str, message: impl Into<String>) -> Self {
        ModelError::ConfigError {
            field: field.to_string(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, ModelError>;
