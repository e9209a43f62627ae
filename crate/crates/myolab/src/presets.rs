//! Experiment presets: reproducible bundles of runs, sweeps and analyses.
//!
//! Five presets are shipped: `twitch` (isotonic twitch against zero load),
//! `ramp` (pre-relaxed fiber under a decreasing load), `quasistatic-fig3`
//! (quasistatic quadratic twitch at two passive stiffnesses),
//! `stability-sweep` (eigenvalue sweeps of the minimal coupled model) and
//! `convergence` (time-step study against a fine monolithic reference).

use crate::activation::ForceModel;
use crate::analysis::{
    oscillation_score, run_convergence, ConvergenceReport, CONVERGENCE_DTS,
    CONVERGENCE_REFERENCE_DT,
};
use crate::config::{load_model, ParamSearch};
use crate::coupling::{simulate, InitialPolicy, RunConfig, SchemeKind, SimOutcome};
use crate::error::{Error, Result};
use crate::mechanics::{CalciumProgram, LoadProgram, MechanicsParams, Potential};
use crate::stability::{classify, log_grid, sweep, StabilityReport, SweepRow};
use serde::{Deserialize, Serialize};

/// Identifier of a shipped experiment preset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PresetId {
    Twitch,
    Ramp,
    QuasistaticFig3,
    StabilitySweep,
    Convergence,
}

impl PresetId {
    pub fn label(&self) -> &'static str {
        match self {
            PresetId::Twitch => "twitch",
            PresetId::Ramp => "ramp",
            PresetId::QuasistaticFig3 => "quasistatic-fig3",
            PresetId::StabilitySweep => "stability-sweep",
            PresetId::Convergence => "convergence",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "twitch" => Ok(PresetId::Twitch),
            "ramp" => Ok(PresetId::Ramp),
            "quasistatic-fig3" => Ok(PresetId::QuasistaticFig3),
            "stability-sweep" => Ok(PresetId::StabilitySweep),
            "convergence" => Ok(PresetId::Convergence),
            other => Err(Error::Config(format!(
                "unknown preset '{other}' (twitch, ramp, quasistatic-fig3, stability-sweep, convergence)"
            ))),
        }
    }
}

/// A preset instance with optional overrides.
#[derive(Debug, Clone)]
pub struct ExperimentPreset {
    pub id: PresetId,
    pub model: String,
    pub schemes: Vec<SchemeKind>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub substep: usize,
}

impl ExperimentPreset {
    pub fn new(id: PresetId, model: &str) -> Self {
        let schemes = match id {
            PresetId::Convergence => vec![SchemeKind::Monolithic, SchemeKind::StabilizedSegregated],
            _ => {
                let mut s = vec![
                    SchemeKind::Monolithic,
                    SchemeKind::Segregated,
                    SchemeKind::StabilizedSegregated,
                ];
                if model == "MDM" && id != PresetId::StabilitySweep {
                    s.push(SchemeKind::FractionalStep);
                }
                s
            }
        };
        Self {
            id,
            model: model.to_string(),
            schemes,
            dt: None,
            t_end: None,
            substep: 1,
        }
    }
}

/// One simulated run and its score.
#[derive(Debug)]
pub struct RunRecord {
    pub label: String,
    pub scheme: SchemeKind,
    pub config: RunConfig,
    pub outcome: SimOutcome,
    pub oscillation_score: f64,
}

/// One eigenvalue sweep and its classification.
#[derive(Debug)]
pub struct SweepRecord {
    pub label: String,
    pub scheme: SchemeKind,
    pub rows: Vec<SweepRow>,
    pub classification: Option<StabilityReport>,
}

/// Pairwise strain distances between two runs of the same preset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairwiseError {
    pub a: String,
    pub b: String,
    pub e2: Option<f64>,
    pub e_inf: Option<f64>,
}

/// Everything a preset produced.
#[derive(Debug)]
pub struct ReportBundle {
    pub preset: PresetId,
    pub model: String,
    pub runs: Vec<RunRecord>,
    pub pairwise: Vec<PairwiseError>,
    pub sweeps: Vec<SweepRecord>,
    pub convergence: Option<ConvergenceReport>,
    pub provenance: Vec<(String, String)>,
}

/// Mechanics of the dynamic test cases: viscosity 10 Pa s, mass 0.1 Pa s^2,
/// logarithmic elastic potential with K_p = 1 MPa.
pub fn testcase_mechanics() -> MechanicsParams {
    MechanicsParams {
        mass: 0.1,
        visc: 10.0,
        k_p: 1.0e6,
        potential: Potential::Log,
    }
}

/// Per-model constant calcium level of the pressure-ramp test (uM).
pub fn ramp_calcium(model: &str) -> f64 {
    match model {
        "RDQ20-MF" => 0.3,
        _ => 0.6,
    }
}

/// Per-model initial load of the pressure-ramp test (Pa).
pub fn ramp_load(model: &str) -> f64 {
    match model {
        "NHS06" => 50.0e3,
        _ => 100.0e3,
    }
}

/// Base run configuration of the isotonic twitch (Test Case 1).
pub fn twitch_config(model: &str, scheme: SchemeKind) -> RunConfig {
    RunConfig {
        model: model.to_string(),
        scheme,
        stepper: None,
        dt: 1e-3,
        t_end: 1.0,
        substep: 1,
        calcium: CalciumProgram::reference_twitch(),
        load: LoadProgram::Constant { value: 0.0 },
        mech: testcase_mechanics(),
        initial: InitialPolicy::Default,
    }
}

/// Base run configuration of the pressure ramp (Test Case 2).
pub fn ramp_config(model: &str, scheme: SchemeKind) -> RunConfig {
    RunConfig {
        model: model.to_string(),
        scheme,
        stepper: None,
        dt: 1e-3,
        t_end: 1.0,
        substep: 1,
        calcium: CalciumProgram::Constant {
            value: ramp_calcium(model),
        },
        load: LoadProgram::LinearRamp {
            p_bar: ramp_load(model),
            start: 0.1,
            duration: 0.5,
            target: 0.0,
        },
        mech: testcase_mechanics(),
        initial: InitialPolicy::PreRelax,
    }
}

/// Quasistatic quadratic twitch at a given passive stiffness.
pub fn quasistatic_config(model: &str, scheme: SchemeKind, k_p: f64) -> RunConfig {
    RunConfig {
        model: model.to_string(),
        scheme,
        stepper: None,
        dt: 1e-3,
        t_end: 1.0,
        substep: 1,
        calcium: CalciumProgram::reference_twitch(),
        load: LoadProgram::Constant { value: 0.0 },
        mech: MechanicsParams::quasistatic(k_p, Potential::Quadratic),
        initial: InitialPolicy::Default,
    }
}

fn apply_overrides(cfg: &mut RunConfig, preset: &ExperimentPreset) {
    if let Some(dt) = preset.dt {
        cfg.dt = dt;
    }
    if let Some(t_end) = preset.t_end {
        cfg.t_end = t_end;
    }
    cfg.substep = preset.substep;
}

fn run_many(model: &dyn ForceModel, configs: Vec<(String, SchemeKind, RunConfig)>) -> Result<Vec<RunRecord>> {
    // fan the independent runs out over scoped threads; results are
    // collected by index so the report order is deterministic
    let mut results: Vec<Option<Result<RunRecord>>> = Vec::new();
    results.resize_with(configs.len(), || None);
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for (idx, (label, scheme, cfg)) in configs.into_iter().enumerate() {
            handles.push(scope.spawn(move || {
                let record = simulate(model, &cfg).map(|outcome| {
                    let score = oscillation_score(&outcome.trajectory.lambda);
                    RunRecord {
                        label,
                        scheme,
                        config: cfg,
                        outcome,
                        oscillation_score: score,
                    }
                });
                (idx, record)
            }));
        }
        for handle in handles {
            let (idx, record) = handle.join().expect("preset worker panicked");
            results[idx] = Some(record);
        }
    });
    results.into_iter().map(|r| r.unwrap()).collect()
}

fn pairwise_errors(runs: &[RunRecord]) -> Vec<PairwiseError> {
    let mut out = Vec::new();
    for i in 0..runs.len() {
        for j in (i + 1)..runs.len() {
            let (a, b) = (&runs[i], &runs[j]);
            let value = if a.outcome.succeeded() && b.outcome.succeeded() {
                crate::analysis::error_norms(&a.outcome.trajectory, &b.outcome.trajectory).ok()
            } else {
                None
            };
            out.push(PairwiseError {
                a: a.label.clone(),
                b: b.label.clone(),
                e2: value.map(|v| v.0),
                e_inf: value.map(|v| v.1),
            });
        }
    }
    out
}

fn base_provenance(model: &str) -> Vec<(String, String)> {
    let mut p = vec![
        (
            "calcium.transient".to_string(),
            "idealized transient of Washio et al. (2012): c0 0.1 uM, c_max 1.6 uM, t0 0.1 s, tau1 0.02 s, tau2 0.05 s".to_string(),
        ),
        (
            "mechanics.dynamic".to_string(),
            "sigma 10 Pa s, M 0.1 Pa s^2, log elastic potential, K_p 1 MPa".to_string(),
        ),
    ];
    let source = match model {
        "MDM" => "distribution-moments calibration, Regazzoni, Dede' & Quarteroni (2020)",
        "NHS06" => "Niederer, Hunter & Smith (2006)",
        "L17" => "Land et al. (2017), human",
        "RDQ20-MF" => "Regazzoni, Dede' & Quarteroni (2020), human baseline",
        _ => "unknown",
    };
    p.push((format!("model.{model}"), source.to_string()));
    p
}

/// Execute a preset.
pub fn run_preset(preset: &ExperimentPreset, search: &ParamSearch) -> Result<ReportBundle> {
    let model = load_model(search, &preset.model)?;
    let mut bundle = ReportBundle {
        preset: preset.id,
        model: preset.model.clone(),
        runs: Vec::new(),
        pairwise: Vec::new(),
        sweeps: Vec::new(),
        convergence: None,
        provenance: base_provenance(&preset.model),
    };
    match preset.id {
        PresetId::Twitch => {
            let configs = preset
                .schemes
                .iter()
                .map(|&s| {
                    let mut cfg = twitch_config(&preset.model, s);
                    apply_overrides(&mut cfg, preset);
                    (s.label().to_string(), s, cfg)
                })
                .collect();
            bundle.runs = run_many(model.as_ref(), configs)?;
            bundle.pairwise = pairwise_errors(&bundle.runs);
        }
        PresetId::Ramp => {
            let configs = preset
                .schemes
                .iter()
                .map(|&s| {
                    let mut cfg = ramp_config(&preset.model, s);
                    apply_overrides(&mut cfg, preset);
                    (s.label().to_string(), s, cfg)
                })
                .collect();
            bundle.runs = run_many(model.as_ref(), configs)?;
            bundle.pairwise = pairwise_errors(&bundle.runs);
            bundle.provenance.push((
                "ramp".to_string(),
                format!(
                    "constant calcium {} uM against load {} kPa, linear decrease to zero over 0.5 s from t = 0.1 s",
                    ramp_calcium(&preset.model),
                    ramp_load(&preset.model) / 1e3
                ),
            ));
        }
        PresetId::QuasistaticFig3 => {
            let mut configs = Vec::new();
            for &k_p in &[1.0e6, 4.0e6] {
                for &s in &preset.schemes {
                    let mut cfg = quasistatic_config(&preset.model, s, k_p);
                    apply_overrides(&mut cfg, preset);
                    configs.push((
                        format!("kp{}MPa-{}", (k_p / 1e6) as i64, s.label()),
                        s,
                        cfg,
                    ));
                }
            }
            bundle.runs = run_many(model.as_ref(), configs)?;
            bundle.pairwise = pairwise_errors(&bundle.runs);
            bundle.provenance.push((
                "quasistatic".to_string(),
                "quadratic potential, K_p 1 MPa and 4 MPa, zero load".to_string(),
            ));
        }
        PresetId::StabilitySweep => {
            let params = crate::activation::MinimalModelParams::default();
            let mu0 = params.mu0_f / params.r;
            let grid = log_grid(1e-6, 10.0, 200);
            let quas = |k_p: f64| MechanicsParams::quasistatic(k_p, Potential::Quadratic);
            let damped = MechanicsParams {
                mass: 0.0,
                visc: 10.0,
                k_p: 1.0e6,
                potential: Potential::Quadratic,
            };
            let inertial = MechanicsParams {
                mass: 0.1,
                visc: 10.0,
                k_p: 1.0e6,
                potential: Potential::Quadratic,
            };
            let cases = [
                ("quasistatic-kp1MPa".to_string(), quas(1.0e6), true),
                ("quasistatic-kp4MPa".to_string(), quas(4.0e6), true),
                ("damped-kp1MPa".to_string(), damped, false),
                ("inertial-kp1MPa".to_string(), inertial, false),
            ];
            for (case, mech, classify_it) in cases {
                for &scheme in &[
                    SchemeKind::Monolithic,
                    SchemeKind::Segregated,
                    SchemeKind::StabilizedSegregated,
                ] {
                    let rows = sweep(scheme, &grid, mu0, &params, &mech);
                    let classification = if classify_it {
                        Some(classify(scheme, &grid, &params, &mech)?)
                    } else {
                        None
                    };
                    bundle.sweeps.push(SweepRecord {
                        label: format!("{case}-{}", scheme.label()),
                        scheme,
                        rows,
                        classification,
                    });
                }
            }
            bundle.provenance.push((
                "sweep.mu0".to_string(),
                "attached fraction frozen at its steady-state value mu0_f/r".to_string(),
            ));
        }
        PresetId::Convergence => {
            let base = twitch_config(&preset.model, SchemeKind::Monolithic);
            bundle.convergence = Some(run_convergence(
                model.as_ref(),
                &base,
                &preset.schemes,
                &CONVERGENCE_DTS,
                CONVERGENCE_REFERENCE_DT,
            )?);
            bundle.provenance.push((
                "convergence".to_string(),
                format!(
                    "reference: monolithic at dt = {CONVERGENCE_REFERENCE_DT} s; test grid {CONVERGENCE_DTS:?} s"
                ),
            ));
        }
    }
    Ok(bundle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::shipped_params_dir;

    fn search() -> ParamSearch {
        ParamSearch::new(vec![shipped_params_dir()])
    }

    #[test]
    fn quasistatic_fig3_reproduces_oscillation_contrast() {
        let mut preset = ExperimentPreset::new(PresetId::QuasistaticFig3, "MDM");
        preset.schemes = vec![SchemeKind::Segregated, SchemeKind::StabilizedSegregated];
        let bundle = run_preset(&preset, &search()).unwrap();
        assert_eq!(bundle.runs.len(), 4);
        let find = |label: &str| {
            bundle
                .runs
                .iter()
                .find(|r| r.label == label)
                .unwrap_or_else(|| panic!("missing run {label}"))
        };
        let seg1 = find("kp1MPa-segregated");
        let stab1 = find("kp1MPa-stabilized-segregated");
        assert!(
            seg1.oscillation_score >= 10.0 * stab1.oscillation_score.max(1e-12),
            "segregated {} vs stabilized {}",
            seg1.oscillation_score,
            stab1.oscillation_score
        );
        // at K_p = 4 MPa both schemes are quiet
        let seg4 = find("kp4MPa-segregated");
        let stab4 = find("kp4MPa-stabilized-segregated");
        assert!(seg4.oscillation_score < crate::analysis::OSCILLATION_FREE_THRESHOLD);
        assert!(stab4.oscillation_score < crate::analysis::OSCILLATION_FREE_THRESHOLD);
    }

    #[test]
    fn ramp_preset_relaxes_then_unloads() {
        let mut preset = ExperimentPreset::new(PresetId::Ramp, "MDM");
        preset.schemes = vec![SchemeKind::StabilizedSegregated];
        preset.t_end = Some(0.8);
        let bundle = run_preset(&preset, &search()).unwrap();
        let run = &bundle.runs[0];
        assert!(run.outcome.succeeded(), "{:?}", run.outcome.failure);
        let traj = &run.outcome.trajectory;
        // tension decreases over the ramp window as the fiber shortens
        let at = |t: f64| {
            let idx = traj.t.iter().position(|x| (x - t).abs() < 1e-9).unwrap();
            traj.tension[idx]
        };
        assert!(at(0.4) < at(0.09), "tension must drop while the fiber shortens");
        // the load column follows the ramp program
        assert_eq!(traj.load[0], 100.0e3);
        assert_eq!(*traj.load.last().unwrap(), 0.0);
    }
}
