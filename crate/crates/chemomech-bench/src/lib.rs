//! State builders shared by the benchmarks: representative tensors,
//! material parameters, and an initialized CI-resolution coupled system.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use chemomech::config::synthetic_anode_ocv;
use chemomech::constitutive::DimlessParams;
use chemomech::driver::initialize;
use chemomech::fem::FemSystem;
use chemomech::mesh::build_mesh;
use chemomech::tensor::Tensor2;
use chemomech::{PlasticityMode, ScenarioConfig, StrainMode};

/// Random symmetric tensor with entries of order `scale`.
pub fn random_symmetric(rng: &mut ChaCha8Rng, scale: f64) -> Tensor2 {
    let mut pick = || rng.gen_range(-scale..scale);
    Tensor2::symmetric([pick(), pick(), pick()], [pick(), pick(), pick()])
}

/// Dimensionless parameters of the viscoplastic comparison scenario.
pub fn visco_params() -> DimlessParams {
    let mut config = ScenarioConfig::for_modes(StrainMode::Log, PlasticityMode::Viscoplastic);
    config.material.beta = Some(2.94);
    config.material.eps_dot0_per_s = Some(1e-3);
    config.dimless_params()
}

/// Log elastic trial strain well outside the yield surface.
pub fn yielding_trial(params: &DimlessParams) -> Tensor2 {
    let mag = 3.0 * params.yield_radius() / (2.0 * params.g_s);
    Tensor2::symmetric([2.0 * mag, -mag, -mag], [0.3 * mag, 0.0, 0.0])
}

/// CI-resolution coupled particle/SEI system at a consistent lithiated
/// state with the 1C lithiation flux applied.
pub fn ci_system() -> (FemSystem, Vec<f64>) {
    let config = ScenarioConfig::for_modes(StrainMode::Log, PlasticityMode::RateIndependent);
    let (n_p, n_s, p, nq) = config.mesh_profile.dims();
    let (mesh, dof) = build_mesh(n_p, n_s, config.material.l_s_over_l0_p, p).expect("mesh");
    let mut sys = FemSystem::new(
        mesh,
        dof,
        config.dimless_params(),
        synthetic_anode_ocv(),
        config.strain_mode.to_sei(),
        config.plasticity_mode,
        nq,
    )
    .expect("system");
    let y = initialize(&mut sys, 0.4).expect("consistent state");
    sys.set_flux(config.protocol.c_rate_per_h);
    (sys, y)
}
