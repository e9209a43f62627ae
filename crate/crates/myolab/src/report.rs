//! Deterministic report emission: trajectory and sweep CSVs, a JSON summary
//! and gnuplot scripts reproducing the standard figure layouts.
//!
//! Floats are written in shortest round-trip form, so identical runs produce
//! byte-identical files.

use crate::analysis::{ConvergenceReport, OSCILLATION_FREE_THRESHOLD};
use crate::coupling::{SimStats, SolverFailure, Trajectory};
use crate::error::{Error, Result};
use crate::presets::{PairwiseError, ReportBundle, RunRecord, SweepRecord};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Fixed header of every trajectory CSV.
pub const TRAJECTORY_HEADER: &str = "t,lambda,lambda_dot,Ta,Ka,Ca,p";

/// Fixed header of every eigenvalue-sweep CSV.
pub const SWEEP_HEADER: &str = "dt,re1,im1,re2,im2,re3,im3,rho";

fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v:?}")
    }
}

/// Render a trajectory as CSV text (LF line endings).
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = String::with_capacity(64 * (traj.len() + 1));
    out.push_str(TRAJECTORY_HEADER);
    out.push('\n');
    for k in 0..traj.len() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            fmt_f64(traj.t[k]),
            fmt_f64(traj.lambda[k]),
            fmt_f64(traj.lambda_dot[k]),
            fmt_f64(traj.tension[k]),
            fmt_f64(traj.stiffness[k]),
            fmt_f64(traj.calcium[k]),
            fmt_f64(traj.load[k]),
        );
    }
    out
}

/// Render an eigenvalue sweep as CSV text; failed points carry `nan` columns.
pub fn sweep_csv(rows: &[crate::stability::SweepRow]) -> String {
    let mut out = String::new();
    out.push_str(SWEEP_HEADER);
    out.push('\n');
    for row in rows {
        match &row.result {
            Ok(eigs) => {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{}",
                    fmt_f64(row.dt),
                    fmt_f64(eigs.eigs[0].re),
                    fmt_f64(eigs.eigs[0].im),
                    fmt_f64(eigs.eigs[1].re),
                    fmt_f64(eigs.eigs[1].im),
                    fmt_f64(eigs.eigs[2].re),
                    fmt_f64(eigs.eigs[2].im),
                    fmt_f64(eigs.spectral_radius),
                );
            }
            Err(_) => {
                let _ = writeln!(
                    out,
                    "{},nan,nan,nan,nan,nan,nan,nan",
                    fmt_f64(row.dt)
                );
            }
        }
    }
    out
}

/// Summary of one run inside the JSON report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub label: String,
    pub scheme: String,
    pub dt: f64,
    pub t_end: f64,
    pub steps_recorded: usize,
    pub failed: bool,
    pub failure: Option<SolverFailure>,
    pub oscillation_score: f64,
    pub oscillation_free: bool,
    pub final_lambda: Option<f64>,
    pub peak_tension: Option<f64>,
    pub solver: SimStats,
    pub csv: String,
}

/// Summary of one sweep inside the JSON report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSummary {
    pub label: String,
    pub scheme: String,
    pub max_spectral_radius: Option<f64>,
    pub zero_stable: Option<bool>,
    pub alpha_fit: Option<f64>,
    /// Closed `dt` interval on which the spectral radius exceeds one.
    pub unstable_window: Option<(f64, f64)>,
    pub csv: String,
}

/// Top-level JSON summary of a preset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub preset: String,
    pub model: String,
    pub runs: Vec<RunSummary>,
    pub pairwise: Vec<PairwiseError>,
    pub sweeps: Vec<SweepSummary>,
    pub convergence: Option<ConvergenceReport>,
    pub provenance: Vec<[String; 2]>,
    pub files: Vec<String>,
}

fn run_summary(record: &RunRecord, csv: String) -> RunSummary {
    let traj = &record.outcome.trajectory;
    RunSummary {
        label: record.label.clone(),
        scheme: record.scheme.label().to_string(),
        dt: record.config.dt,
        t_end: record.config.t_end,
        steps_recorded: traj.len().saturating_sub(1),
        failed: !record.outcome.succeeded(),
        failure: record.outcome.failure.clone(),
        oscillation_score: record.oscillation_score,
        oscillation_free: record.oscillation_score < OSCILLATION_FREE_THRESHOLD,
        final_lambda: traj.lambda.last().copied(),
        peak_tension: traj
            .tension
            .iter()
            .copied()
            .fold(None, |acc: Option<f64>, v| {
                Some(acc.map_or(v, |a| a.max(v)))
            }),
        solver: record.outcome.stats,
        csv,
    }
}

fn unstable_window(rows: &[crate::stability::SweepRow]) -> Option<(f64, f64)> {
    let mut lo = None;
    let mut hi = None;
    for row in rows {
        if let Ok(e) = &row.result {
            if e.spectral_radius > 1.0 {
                lo.get_or_insert(row.dt);
                hi = Some(row.dt);
            }
        }
    }
    lo.zip(hi)
}

fn sweep_summary(record: &SweepRecord, csv: String) -> SweepSummary {
    let max_rho = record
        .rows
        .iter()
        .filter_map(|r| r.result.as_ref().ok().map(|e| e.spectral_radius))
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))));
    SweepSummary {
        label: record.label.clone(),
        scheme: record.scheme.label().to_string(),
        max_spectral_radius: max_rho,
        zero_stable: record.classification.as_ref().map(|c| c.zero_stable),
        alpha_fit: record.classification.as_ref().map(|c| c.alpha_fit),
        unstable_window: unstable_window(&record.rows),
        csv,
    }
}

fn sanitize(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// Gnuplot script plotting eigenvalue sweeps: real part, imaginary part and
/// modulus against the time-step size (columns 2..8 of the sweep CSVs).
fn sweep_plot_script(csvs: &[String]) -> String {
    let mut s = String::from(
        "# gnuplot script: eigenvalues of the coupled iteration matrix vs dt\n\
         set logscale x\nset xlabel 'dt [s]'\nset grid\n\
         set terminal pngcairo size 1400,500\nset output 'eigenvalues.png'\n\
         set multiplot layout 1,3\n",
    );
    for (title, cols) in [
        ("real part", ["2", "4", "6"]),
        ("imaginary part", ["3", "5", "7"]),
        ("modulus", ["8", "8", "8"]),
    ] {
        let _ = writeln!(s, "set title '{title}'");
        s.push_str("plot 1 lc rgb 'gray' dt 2 notitle, -1 lc rgb 'gray' dt 2 notitle");
        for csv in csvs {
            if title == "modulus" {
                let _ = write!(s, ", '{csv}' using 1:8 with lines title '{csv}'");
            } else {
                for c in cols {
                    let _ = write!(s, ", '{csv}' using 1:{c} with lines notitle");
                }
                let _ = write!(s, ", '{csv}' using 1:{} with lines title '{csv}'", cols[0]);
            }
        }
        s.push('\n');
    }
    s.push_str("unset multiplot\n");
    s
}

/// Gnuplot script comparing tension and strain traces of a preset's runs.
fn trajectory_plot_script(csvs: &[String]) -> String {
    let mut s = String::from(
        "# gnuplot script: active tension and strain vs time\n\
         set xlabel 't [s]'\nset grid\nset datafile separator ','\n\
         set terminal pngcairo size 1200,500\nset output 'trajectories.png'\n\
         set multiplot layout 1,2\nset title 'active tension [Pa]'\nplot \\\n",
    );
    for (i, csv) in csvs.iter().enumerate() {
        let sep = if i + 1 == csvs.len() { "\n" } else { ", \\\n" };
        let _ = write!(s, "  '{csv}' using 1:4 with lines title '{csv}'{sep}");
    }
    s.push_str("set title 'strain'\nplot \\\n");
    for (i, csv) in csvs.iter().enumerate() {
        let sep = if i + 1 == csvs.len() { "\n" } else { ", \\\n" };
        let _ = write!(s, "  '{csv}' using 1:2 with lines title '{csv}'{sep}");
    }
    s.push_str("unset multiplot\n");
    s
}

/// Gnuplot script of the convergence study (log-log error vs dt).
fn convergence_plot_script(csv: &str) -> String {
    format!(
        "# gnuplot script: time-step convergence (log-log)\n\
         set logscale xy\nset xlabel 'dt [s]'\nset ylabel 'strain error'\n\
         set grid\nset datafile separator ','\n\
         set terminal pngcairo size 800,600\nset output 'convergence.png'\n\
         plot '{csv}' using 1:2 with linespoints title 'e2', \\\n     \
         '{csv}' using 1:3 with linespoints title 'e_inf', \\\n     \
         [*:*] x*1e2 with lines dt 2 title 'order 1'\n"
    )
}

fn convergence_csv(report: &ConvergenceReport) -> Vec<(String, String)> {
    let mut files = Vec::new();
    for line in &report.lines {
        let mut text = String::from("dt,e2,e_inf\n");
        for (i, dt) in report.dts.iter().enumerate() {
            let _ = writeln!(
                text,
                "{},{},{}",
                fmt_f64(*dt),
                fmt_f64(line.e2[i]),
                fmt_f64(line.e_inf[i])
            );
        }
        files.push((format!("convergence_{}.csv", sanitize(&line.scheme)), text));
    }
    files
}

/// Write every artifact of a bundle into `out_dir`; returns the paths.
///
/// The file set is deterministic: one CSV per trajectory, one per sweep, one
/// per convergence line, `summary.json`, and one plot script per figure kind.
pub fn emit_reports(bundle: &ReportBundle, out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    let mut files: Vec<(String, String)> = Vec::new();

    let mut run_summaries = Vec::new();
    let mut traj_csvs = Vec::new();
    for record in &bundle.runs {
        let name = format!("traj_{}.csv", sanitize(&record.label));
        files.push((name.clone(), trajectory_csv(&record.outcome.trajectory)));
        run_summaries.push(run_summary(record, name.clone()));
        traj_csvs.push(name);
    }

    let mut sweep_summaries = Vec::new();
    let mut sweep_csvs = Vec::new();
    for record in &bundle.sweeps {
        let name = format!("sweep_{}.csv", sanitize(&record.label));
        files.push((name.clone(), sweep_csv(&record.rows)));
        sweep_summaries.push(sweep_summary(record, name.clone()));
        sweep_csvs.push(name);
    }

    if let Some(conv) = &bundle.convergence {
        files.extend(convergence_csv(conv));
    }

    if !traj_csvs.is_empty() {
        files.push(("plot_trajectories.gp".into(), trajectory_plot_script(&traj_csvs)));
    }
    if !sweep_csvs.is_empty() {
        files.push(("plot_eigenvalues.gp".into(), sweep_plot_script(&sweep_csvs)));
    }
    if bundle.convergence.is_some() {
        let first = format!(
            "convergence_{}.csv",
            sanitize(&bundle.convergence.as_ref().unwrap().lines[0].scheme)
        );
        files.push(("plot_convergence.gp".into(), convergence_plot_script(&first)));
    }

    let summary = Summary {
        preset: bundle.preset.label().to_string(),
        model: bundle.model.clone(),
        runs: run_summaries,
        pairwise: bundle.pairwise.clone(),
        sweeps: sweep_summaries,
        convergence: bundle.convergence.clone(),
        provenance: bundle
            .provenance
            .iter()
            .map(|(k, v)| [k.clone(), v.clone()])
            .collect(),
        files: {
            let mut names: Vec<String> = files.iter().map(|(n, _)| n.clone()).collect();
            names.push("summary.json".into());
            names
        },
    };
    let json = serde_json::to_string_pretty(&summary)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    files.push(("summary.json".into(), json + "\n"));

    let mut paths = Vec::new();
    for (name, content) in files {
        let path = out_dir.join(&name);
        std::fs::write(&path, content.as_bytes())?;
        paths.push(path);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{shipped_params_dir, ParamSearch};
    use crate::coupling::SchemeKind;
    use crate::presets::{run_preset, ExperimentPreset, PresetId};

    #[test]
    fn csv_floats_round_trip() {
        let traj = Trajectory {
            t: vec![0.0, 1e-3],
            lambda: vec![0.0, -0.0123456789012345],
            lambda_dot: vec![0.0, -12.3456789],
            tension: vec![0.0, 5.9999e4],
            stiffness: vec![0.0, 3.9e6],
            calcium: vec![0.1, 0.10000000001],
            load: vec![0.0, 0.0],
        };
        let csv = trajectory_csv(&traj);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), TRAJECTORY_HEADER);
        let row: Vec<f64> = lines
            .nth(1)
            .unwrap()
            .split(',')
            .map(|v| v.parse().unwrap())
            .collect();
        assert_eq!(row[1], -0.0123456789012345);
        assert_eq!(row[3], 5.9999e4);
        assert!(!csv.contains('\r'), "LF line endings only");
    }

    #[test]
    fn emission_is_deterministic_and_summary_parses() {
        let search = ParamSearch::new(vec![shipped_params_dir()]);
        let mut preset = ExperimentPreset::new(PresetId::QuasistaticFig3, "MDM");
        preset.schemes = vec![SchemeKind::Monolithic, SchemeKind::StabilizedSegregated];
        preset.t_end = Some(0.2);
        let bundle = run_preset(&preset, &search).unwrap();

        let dir1 = tempfile::tempdir().unwrap();
        let dir2 = tempfile::tempdir().unwrap();
        let files1 = emit_reports(&bundle, dir1.path()).unwrap();
        let bundle2 = run_preset(&preset, &search).unwrap();
        let files2 = emit_reports(&bundle2, dir2.path()).unwrap();
        assert_eq!(files1.len(), files2.len());
        for (a, b) in files1.iter().zip(&files2) {
            let ca = std::fs::read(a).unwrap();
            let cb = std::fs::read(b).unwrap();
            assert_eq!(ca, cb, "outputs differ for {}", a.display());
        }

        // the JSON summary round-trips through its schema
        let json = std::fs::read_to_string(dir1.path().join("summary.json")).unwrap();
        let summary: Summary = serde_json::from_str(&json).unwrap();
        assert_eq!(summary.preset, "quasistatic-fig3");
        assert_eq!(summary.runs.len(), 4);
        assert!(summary.files.contains(&"summary.json".to_string()));
        // every referenced CSV exists
        for run in &summary.runs {
            assert!(dir1.path().join(&run.csv).is_file());
        }
    }

    #[test]
    fn sweep_script_references_sweep_columns() {
        let script = sweep_plot_script(&["sweep_a.csv".into()]);
        assert!(script.contains("'sweep_a.csv' using 1:8"));
        assert!(script.contains("'sweep_a.csv' using 1:2"));
        assert!(script.contains("logscale x"));
    }
}
