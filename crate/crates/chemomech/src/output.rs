//! Serialization of run results: `timeseries.csv`, one `profile_<tag>.csv`
//! per snapshot, `events.jsonl`, and a `plot.gp` gnuplot script for the
//! standard figures.
//!
//! Floats are written with Rust's shortest round-trip formatting, so parsing
//! a column back with `f64::from_str` recovers the exact bit pattern.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::driver::{ProfileSnapshot, RunOutputs, TimeseriesRow};
use crate::Result;

/// Exact header of `timeseries.csv`.
pub const TIMESERIES_HEADER: &str =
    "t_h,soc,voltage_V,sigma_tt_interface_MPa,tau,order,newton_iters";

/// Exact header of every `profile_<tag>.csv`.
pub const PROFILE_HEADER: &str = "r,c,sigma_rr_MPa,sigma_tt_MPa";

/// Renders the time series as CSV text.
pub fn timeseries_csv(rows: &[TimeseriesRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(TIMESERIES_HEADER);
    out.push('\n');
    for row in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            row.t_h,
            row.soc,
            row.voltage_v,
            row.sigma_tt_interface_mpa,
            row.tau,
            row.order,
            row.newton_iters
        );
    }
    out
}

/// Renders one radial snapshot as CSV text. The concentration column is
/// empty for SEI radii, where no concentration field exists.
pub fn profile_csv(snap: &ProfileSnapshot) -> String {
    let mut out = String::with_capacity(48 * (snap.rows.len() + 1));
    out.push_str(PROFILE_HEADER);
    out.push('\n');
    for row in &snap.rows {
        let _ = write!(out, "{},", row.r);
        if let Some(c) = row.c {
            let _ = write!(out, "{c}");
        }
        let _ = writeln!(out, ",{},{}", row.sigma_rr_mpa, row.sigma_tt_mpa);
    }
    out
}

/// Renders the event log as JSON Lines, one event object per line.
pub fn events_jsonl(run: &RunOutputs) -> Result<String> {
    let mut out = String::new();
    for event in &run.events {
        out.push_str(&serde_json::to_string(event)?);
        out.push('\n');
    }
    Ok(out)
}

/// Gnuplot script plotting interface stress and voltage against state of
/// charge from the time series, plus radial stress profiles from every
/// snapshot written next to it.
pub fn plot_script(run: &RunOutputs) -> String {
    let mut profile_rr = String::new();
    let mut profile_tt = String::new();
    for (i, snap) in run.profiles.iter().enumerate() {
        let sep = if i == 0 { " \\\n  " } else { ", \\\n  " };
        let _ = write!(
            profile_rr,
            "{sep}'profile_{tag}.csv' skip 1 using 1:3 with lines title '{tag}'",
            tag = snap.tag
        );
        let _ = write!(
            profile_tt,
            "{sep}'profile_{tag}.csv' skip 1 using 1:4 with lines title '{tag}'",
            tag = snap.tag
        );
    }
    if run.profiles.is_empty() {
        profile_rr.push_str(" 1/0 notitle");
        profile_tt.push_str(" 1/0 notitle");
    }
    format!(
        "# Render with: gnuplot plot.gp\n\
         set datafile separator ','\n\
         set terminal pngcairo size 1400,1000 enhanced\n\
         set output 'run_{name}.png'\n\
         set multiplot layout 2,2 title 'run {name}'\n\
         set grid\n\
         set xlabel 'state of charge'\n\
         set ylabel 'interface hoop stress [MPa]'\n\
         plot 'timeseries.csv' skip 1 using 2:4 with lines lw 2 title 'SEI interface'\n\
         set ylabel 'cell voltage [V]'\n\
         plot 'timeseries.csv' skip 1 using 2:3 with lines lw 2 title 'voltage'\n\
         set xlabel 'r / R_P'\n\
         set ylabel 'radial stress [MPa]'\n\
         plot{rr}\n\
         set ylabel 'hoop stress [MPa]'\n\
         plot{tt}\n\
         unset multiplot\n",
        name = run.name,
        rr = profile_rr,
        tt = profile_tt,
    )
}

/// Writes all artifacts of one run into `dir` (created if missing) and
/// returns the paths written.
pub fn write_outputs(dir: &Path, run: &RunOutputs) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut emit = |name: String, contents: String| -> Result<()> {
        let path = dir.join(name);
        fs::write(&path, contents)?;
        written.push(path);
        Ok(())
    };
    emit("timeseries.csv".into(), timeseries_csv(&run.timeseries))?;
    for snap in &run.profiles {
        emit(format!("profile_{}.csv", snap.tag), profile_csv(snap))?;
    }
    emit("events.jsonl".into(), events_jsonl(run)?)?;
    emit("plot.gp".into(), plot_script(run))?;
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driver::{ProfileRow, RunEvent};
    use crate::ndf::IntegratorStats;

    fn empty_run(name: &str) -> RunOutputs {
        RunOutputs {
            name: name.into(),
            completed: true,
            abort: None,
            timeseries: Vec::new(),
            profiles: Vec::new(),
            events: Vec::new(),
            max_conservation_error: 0.0,
            max_yield_excess: None,
            final_soc: 0.0,
            stats: IntegratorStats::default(),
            wall_time_s: 0.0,
        }
    }

    fn row(t: f64) -> TimeseriesRow {
        TimeseriesRow {
            t_h: t,
            soc: 0.1 + 0.2,
            voltage_v: 1.0 / 3.0,
            sigma_tt_interface_mpa: -0.0,
            tau: 1e-300,
            order: 3,
            newton_iters: 2,
        }
    }

    #[test]
    fn headers_are_exact_even_for_empty_runs() {
        let mut run = empty_run("empty");
        run.profiles.push(ProfileSnapshot {
            tag: "final".into(),
            t_h: 0.0,
            soc: 0.0,
            interface_sigma_tt_mpa: 0.0,
            rows: Vec::new(),
        });
        let dir = tempfile::tempdir().unwrap();
        write_outputs(dir.path(), &run).unwrap();
        let ts = fs::read_to_string(dir.path().join("timeseries.csv")).unwrap();
        assert_eq!(ts, format!("{TIMESERIES_HEADER}\n"));
        let prof = fs::read_to_string(dir.path().join("profile_final.csv")).unwrap();
        assert_eq!(prof, format!("{PROFILE_HEADER}\n"));
        assert_eq!(
            fs::read_to_string(dir.path().join("events.jsonl")).unwrap(),
            ""
        );
    }

    #[test]
    fn timeseries_floats_round_trip_bitwise() {
        let rows = vec![
            row(0.1),
            TimeseriesRow {
                t_h: f64::MIN_POSITIVE,
                soc: 5e-324,
                voltage_v: 6.02214076e23,
                sigma_tt_interface_mpa: f64::NAN,
                tau: 0.30000000000000004,
                order: 5,
                newton_iters: 11,
            },
        ];
        let text = timeseries_csv(&rows);
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), TIMESERIES_HEADER);
        for (line, orig) in lines.zip(&rows) {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields.len(), 7);
            let back: Vec<f64> = fields[..5].iter().map(|s| s.parse().unwrap()).collect();
            for (b, o) in back.iter().zip([
                orig.t_h,
                orig.soc,
                orig.voltage_v,
                orig.sigma_tt_interface_mpa,
                orig.tau,
            ]) {
                if o.is_nan() {
                    assert!(b.is_nan());
                } else {
                    assert_eq!(b.to_bits(), o.to_bits());
                }
            }
            assert_eq!(fields[5].parse::<usize>().unwrap(), orig.order);
            assert_eq!(fields[6].parse::<usize>().unwrap(), orig.newton_iters);
        }
    }

    #[test]
    fn sei_profile_rows_leave_concentration_empty() {
        let snap = ProfileSnapshot {
            tag: "hc1".into(),
            t_h: 0.9,
            soc: 0.92,
            interface_sigma_tt_mpa: 12.0,
            rows: vec![
                ProfileRow {
                    r: 0.5,
                    c: Some(0.25),
                    sigma_rr_mpa: -1.5,
                    sigma_tt_mpa: 2.5,
                },
                ProfileRow {
                    r: 1.05,
                    c: None,
                    sigma_rr_mpa: -0.5,
                    sigma_tt_mpa: 40.0,
                },
            ],
        };
        let text = profile_csv(&snap);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[1], "0.5,0.25,-1.5,2.5");
        assert_eq!(lines[2], "1.05,,-0.5,40");
        let fields: Vec<&str> = lines[2].split(',').collect();
        assert!(fields[1].is_empty());
        assert_eq!(fields[0].parse::<f64>().unwrap().to_bits(), 1.05f64.to_bits());
    }

    #[test]
    fn abort_events_serialize_with_type_and_soc() {
        let mut run = empty_run("gsv-elastic");
        run.completed = false;
        run.events.push(RunEvent::HalfCycleStart {
            index: 0,
            t_h: 0.0,
            flux_per_h: 1.0,
        });
        run.events.push(RunEvent::Abort {
            t_h: 0.31,
            soc: 0.33,
            tau: 1e-12,
            order: 1,
            reason: "newton failed".into(),
        });
        let text = events_jsonl(&run).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        let abort: serde_json::Value = serde_json::from_str(lines[1]).unwrap();
        assert_eq!(abort["type"], "abort");
        assert_eq!(abort["soc"], 0.33);
        assert_eq!(abort["tau"], 1e-12);
        assert!(abort["reason"].as_str().unwrap().contains("newton"));
        let start: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
        assert_eq!(start["type"], "half_cycle_start");
    }

    #[test]
    fn plot_script_references_written_artifacts() {
        let mut run = empty_run("log-elastic");
        for tag in ["hc1", "hc2", "final"] {
            run.profiles.push(ProfileSnapshot {
                tag: tag.into(),
                t_h: 0.0,
                soc: 0.0,
                interface_sigma_tt_mpa: 0.0,
                rows: Vec::new(),
            });
        }
        let dir = tempfile::tempdir().unwrap();
        let written = write_outputs(dir.path(), &run).unwrap();
        let names: Vec<String> = written
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        assert!(names.contains(&"plot.gp".to_string()));
        let script = fs::read_to_string(dir.path().join("plot.gp")).unwrap();
        for name in &names {
            if name.ends_with(".csv") {
                assert!(script.contains(name.as_str()), "script misses {name}");
            }
        }
        assert!(script.contains("using 2:4"));
        assert!(script.contains("using 2:3"));
    }
}
