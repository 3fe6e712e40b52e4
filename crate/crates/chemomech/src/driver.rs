//! Scenario orchestration: consistent initialization, the alternating
//! half-cycle protocol with integrator restarts at flux reversals, and
//! capture of time series, radial profiles, and run events.

use std::time::Instant;

use serde::Serialize;

use crate::config::{PlasticityMode, ScenarioConfig};
use crate::constitutive::voltage_postprocess;
use crate::fem::FemSystem;
use crate::kinematics::chemical_stretch;
use crate::mesh::build_mesh;
use crate::ndf::{AbortInfo, Integrator, IntegratorStats, StepOutcome};
use crate::Result;

/// One accepted time step in the output time series. Stress in MPa,
/// potential in volts, time in hours; `soc` is the measured lithium content
/// 3 int c r^2 dr.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TimeseriesRow {
    pub t_h: f64,
    pub soc: f64,
    pub voltage_v: f64,
    pub sigma_tt_interface_mpa: f64,
    pub tau: f64,
    pub order: usize,
    pub newton_iters: usize,
}

/// One radius in a profile snapshot; `c` is None in the SEI.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ProfileRow {
    pub r: f64,
    pub c: Option<f64>,
    pub sigma_rr_mpa: f64,
    pub sigma_tt_mpa: f64,
}

/// Radial snapshot at a half-cycle boundary (tags `hc1`, `hc2`, ...) or at
/// the end of the run (`final`).
#[derive(Clone, Debug, Serialize)]
pub struct ProfileSnapshot {
    pub tag: String,
    pub t_h: f64,
    pub soc: f64,
    /// SEI-side interface hoop stress (the particle side is in `rows`).
    pub interface_sigma_tt_mpa: f64,
    pub rows: Vec<ProfileRow>,
}

/// Protocol events mirrored into `events.jsonl`.
#[derive(Clone, Debug, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum RunEvent {
    HalfCycleStart {
        index: usize,
        t_h: f64,
        flux_per_h: f64,
    },
    HalfCycleEnd {
        index: usize,
        t_h: f64,
        soc: f64,
    },
    Abort {
        t_h: f64,
        soc: f64,
        tau: f64,
        order: usize,
        reason: String,
    },
    Completed {
        t_h: f64,
        soc: f64,
    },
}

/// Everything a scenario run produces, before serialization.
#[derive(Debug)]
pub struct RunOutputs {
    pub name: String,
    pub completed: bool,
    pub abort: Option<AbortInfo>,
    pub timeseries: Vec<TimeseriesRow>,
    pub profiles: Vec<ProfileSnapshot>,
    pub events: Vec<RunEvent>,
    /// max_t |measured lithium - protocol lithium|.
    pub max_conservation_error: f64,
    /// Largest post-commit yield excess over all accepted steps and SEI
    /// quadrature points (dimensionless stress); None without an SEI.
    pub max_yield_excess: Option<f64>,
    pub final_soc: f64,
    pub stats: IntegratorStats,
    pub wall_time_s: f64,
}

/// Stress-free swelling state at homogeneous concentration: the initial
/// Newton guess before the algebraic consistency solve.
pub fn swelling_guess(sys: &FemSystem, c_bar: f64) -> Result<Vec<f64>> {
    let params = sys.params();
    let lam = chemical_stretch(c_bar, params.a_swell)?;
    let f = [lam, lam, lam];
    let mu = crate::constitutive::particle_qp_response(c_bar, f, params, sys.ocv())?.mu;
    let mut y = vec![0.0; sys.dof().n_dofs()];
    for (i, &r) in sys.mesh().nodes_p.iter().enumerate() {
        y[sys.dof().c(i)] = c_bar;
        y[sys.dof().mu(i)] = mu;
        y[sys.dof().u_p(i)] = (lam - 1.0) * r;
    }
    for (j, &r) in sys.mesh().nodes_s.iter().enumerate() {
        y[sys.dof().u_s(j)] = (lam - 1.0) * r;
    }
    Ok(y)
}

/// Consistent initial state: c = c0 with mu and u solving their residual
/// rows (the SEI generally resists free swelling, so u deviates from the
/// stress-free guess).
pub fn initialize(sys: &mut FemSystem, c0: f64) -> Result<Vec<f64>> {
    let mut y = swelling_guess(sys, c0)?;
    sys.solve_consistent_state(&mut y, c0, 1e-9)?;
    Ok(y)
}

fn profile_radii(sys: &FemSystem) -> Vec<f64> {
    let mut radii = sys.mesh().nodes_p.clone();
    radii.extend(sys.mesh().nodes_s.iter().skip(1).copied());
    radii
}

fn snapshot(sys: &FemSystem, y: &[f64], tau: f64, tag: &str, t_h: f64) -> Result<ProfileSnapshot> {
    let scale_mpa = sys.params().stress_scale_pa / 1e6;
    let samples = sys.sample_fields(y, &profile_radii(sys), tau)?;
    let rows = samples
        .iter()
        .map(|s| ProfileRow {
            r: s.r,
            c: s.c,
            sigma_rr_mpa: s.sigma_rr * scale_mpa,
            sigma_tt_mpa: s.sigma_tt * scale_mpa,
        })
        .collect();
    let interface = match sys.interface_stress_sei(y, tau) {
        Ok((_, tt)) => tt * scale_mpa,
        Err(_) => f64::NAN,
    };
    Ok(ProfileSnapshot {
        tag: tag.to_string(),
        t_h,
        soc: sys.total_lithium(y),
        interface_sigma_tt_mpa: interface,
        rows,
    })
}

/// Runs the full cycling protocol for one configuration. An integrator
/// abort is not an error: the outputs carry everything recorded up to the
/// abort plus the abort report.
pub fn run_scenario(config: &ScenarioConfig) -> Result<RunOutputs> {
    config.validate()?;
    let clock = Instant::now();
    let (n_p, n_s, p, nq) = config.mesh_profile.dims();
    let (mesh, dof) = build_mesh(n_p, n_s, config.material.l_s_over_l0_p, p)?;
    let params = config.dimless_params();
    let ocv = config.load_ocv()?;
    let mut sys = FemSystem::new(
        mesh,
        dof,
        params,
        ocv,
        config.strain_mode.to_sei(),
        config.plasticity_mode,
        nq,
    )?;
    let bv = config.bv_params();
    let scale_mpa = config.material.e_p_pa / 1e6;
    let track_yield = config.plasticity_mode != PlasticityMode::Elastic;

    let c0 = config.protocol.c0;
    let y0 = initialize(&mut sys, c0)?;
    let mut integ = Integrator::new(sys, 0.0, y0, config.ndf_options());

    let mut timeseries = Vec::new();
    let mut profiles = Vec::new();
    let mut events = Vec::new();
    let mut max_conservation_error = 0.0f64;
    let mut max_yield_excess: Option<f64> = None;

    let rate = config.protocol.c_rate_per_h;
    let duration = config.protocol.half_cycle_duration_h;
    let record = |integ: &Integrator<FemSystem>,
                      tau: f64,
                      order: usize,
                      iters: usize,
                      flux: f64|
     -> Result<TimeseriesRow> {
        let sys = integ.system();
        let y = integ.y();
        let soc = sys.total_lithium(y);
        let mu_surface = y[sys.dof().mu(sys.dof().n_nodes_p - 1)];
        let mu_j_per_mol = mu_surface * sys.params().faraday;
        let voltage = voltage_postprocess(mu_j_per_mol, flux, &bv);
        let sigma_tt = match sys.interface_stress_sei(y, tau) {
            Ok((_, tt)) => tt * scale_mpa,
            Err(_) => f64::NAN,
        };
        Ok(TimeseriesRow {
            t_h: integ.t(),
            soc,
            voltage_v: voltage,
            sigma_tt_interface_mpa: sigma_tt,
            tau,
            order,
            newton_iters: iters,
        })
    };

    // t = 0 row under the first half cycle's flux.
    let first_flux = rate;
    integ.system_mut().set_flux(first_flux);
    timeseries.push(record(
        &integ,
        config.tolerances.tau_init_h,
        1,
        0,
        first_flux,
    )?);

    let mut expected_soc_at_hc_start = integ.system().total_lithium(integ.y());
    let mut aborted: Option<AbortInfo> = None;

    'protocol: for hc in 0..config.protocol.half_cycles {
        let sign = if hc % 2 == 0 { 1.0 } else { -1.0 };
        let flux = sign * rate;
        let t_start = hc as f64 * duration;
        let t_end = (hc + 1) as f64 * duration;
        integ.system_mut().set_flux(flux);
        if hc > 0 {
            integ.restart();
        }
        events.push(RunEvent::HalfCycleStart {
            index: hc,
            t_h: t_start,
            flux_per_h: flux,
        });

        while integ.t() < t_end - 1e-13 {
            match integ.step(t_end) {
                StepOutcome::Accepted(info) => {
                    let row = record(&integ, info.tau, info.order, info.newton_iters, flux)?;
                    let expected =
                        expected_soc_at_hc_start + flux * (info.t - t_start);
                    max_conservation_error =
                        max_conservation_error.max((row.soc - expected).abs());
                    if track_yield {
                        if let Some(ex) = integ.system().max_yield_excess(integ.y()) {
                            max_yield_excess =
                                Some(max_yield_excess.map_or(ex, |m| m.max(ex)));
                        }
                    }
                    timeseries.push(row);
                }
                StepOutcome::Aborted(mut info) => {
                    let soc = integ.system().total_lithium(integ.y());
                    info.soc = Some(soc);
                    events.push(RunEvent::Abort {
                        t_h: info.t_h,
                        soc,
                        tau: info.tau,
                        order: info.order,
                        reason: info.reason.clone(),
                    });
                    aborted = Some(info);
                    break 'protocol;
                }
            }
        }
        let soc_end = integ.system().total_lithium(integ.y());
        expected_soc_at_hc_start += flux * duration;
        events.push(RunEvent::HalfCycleEnd {
            index: hc,
            t_h: integ.t(),
            soc: soc_end,
        });
        profiles.push(snapshot(
            integ.system(),
            integ.y(),
            integ.tau(),
            &format!("hc{}", hc + 1),
            integ.t(),
        )?);
    }

    // Terminal snapshot: the abort state, or the completed final state.
    profiles.push(snapshot(
        integ.system(),
        integ.y(),
        integ.tau(),
        "final",
        integ.t(),
    )?);
    let final_soc = integ.system().total_lithium(integ.y());
    let completed = aborted.is_none();
    if completed {
        events.push(RunEvent::Completed {
            t_h: integ.t(),
            soc: final_soc,
        });
    }

    Ok(RunOutputs {
        name: config.run_name(),
        completed,
        abort: aborted,
        timeseries,
        profiles,
        events,
        max_conservation_error,
        max_yield_excess,
        final_soc,
        stats: integ.stats(),
        wall_time_s: clock.elapsed().as_secs_f64(),
    })
}
