//! Trajectory analysis: error norms against a reference, oscillation
//! scoring, and the time-step convergence study.

use crate::activation::ForceModel;
use crate::coupling::{simulate, RunConfig, SchemeKind, Trajectory};
use crate::error::{Error, Result};
use crate::linalg::ls_slope;
use serde::{Deserialize, Serialize};

/// Dead band below which strain increments do not count as oscillations.
pub const OSCILLATION_DEAD_BAND: f64 = 1e-9;

/// Score below which a run counts as oscillation-free.
pub const OSCILLATION_FREE_THRESHOLD: f64 = 0.02;

/// Mean-square and maximum strain distance from a reference trajectory.
///
/// The reference must cover the run's time range (it is typically on a finer
/// grid) and is linearly interpolated onto the run's grid:
/// `e2 = sqrt(sum |l_k - l_ref(t_k)|^2 / N)`, `e_inf = max |l_k - l_ref(t_k)|`.
pub fn error_norms(traj: &Trajectory, reference: &Trajectory) -> Result<(f64, f64)> {
    if traj.is_empty() || reference.len() < 2 {
        return Err(Error::InvalidInput("empty trajectory".into()));
    }
    let t_last = *reference.t.last().unwrap();
    if *traj.t.last().unwrap() > t_last + 1e-12 * t_last.max(1.0) {
        return Err(Error::InvalidInput(format!(
            "trajectory extends to t={} beyond the reference end t={}",
            traj.t.last().unwrap(),
            t_last
        )));
    }
    let mut sum_sq = 0.0;
    let mut max_abs = 0.0f64;
    for (t, lambda) in traj.t.iter().zip(&traj.lambda) {
        let l_ref = interp(&reference.t, &reference.lambda, *t);
        let d = (lambda - l_ref).abs();
        sum_sq += d * d;
        max_abs = max_abs.max(d);
    }
    Ok(((sum_sq / traj.len() as f64).sqrt(), max_abs))
}

fn interp(times: &[f64], values: &[f64], t: f64) -> f64 {
    if t <= times[0] {
        return values[0];
    }
    if t >= times[times.len() - 1] {
        return values[values.len() - 1];
    }
    let idx = times.partition_point(|tk| *tk <= t) - 1;
    let w = (t - times[idx]) / (times[idx + 1] - times[idx]);
    values[idx] + w * (values[idx + 1] - values[idx])
}

/// Oscillation score of a strain series: sign changes between consecutive
/// significant first differences (dead band 1e-9), divided by the step count.
pub fn oscillation_score(lambda: &[f64]) -> f64 {
    if lambda.len() < 3 {
        return 0.0;
    }
    let mut changes = 0usize;
    let mut last_sign = 0i8;
    for w in lambda.windows(2) {
        let d = w[1] - w[0];
        if d.abs() <= OSCILLATION_DEAD_BAND {
            continue;
        }
        let sign = if d > 0.0 { 1 } else { -1 };
        if last_sign != 0 && sign != last_sign {
            changes += 1;
        }
        last_sign = sign;
    }
    changes as f64 / (lambda.len() - 1) as f64
}

/// Per-scheme result of a convergence study.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceLine {
    pub scheme: String,
    pub e2: Vec<f64>,
    pub e_inf: Vec<f64>,
    /// Least-squares slope of `log(e2)` against `log(dt)`.
    pub slope_e2: f64,
    /// Least-squares slope of `log(e_inf)` against `log(dt)`.
    pub slope_e_inf: f64,
    /// Per-dt failure messages (empty strings when the run succeeded).
    pub failures: Vec<String>,
}

/// Result of a convergence study against a fine monolithic reference.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub dts: Vec<f64>,
    pub reference_dt: f64,
    pub lines: Vec<ConvergenceLine>,
}

/// Default test grid of the convergence study (s).
pub const CONVERGENCE_DTS: [f64; 5] = [4e-3, 2e-3, 1e-3, 5e-4, 2.5e-4];

/// Reference time step of the convergence study (s).
pub const CONVERGENCE_REFERENCE_DT: f64 = 1e-4;

/// Run the convergence study: the reference is the monolithic solution at
/// `reference_dt`, each scheme is run at every `dts` entry and compared in
/// the `e2`/`e_inf` strain norms, with least-squares slopes on log-log data.
pub fn run_convergence(
    model: &dyn ForceModel,
    base: &RunConfig,
    schemes: &[SchemeKind],
    dts: &[f64],
    reference_dt: f64,
) -> Result<ConvergenceReport> {
    let mut ref_cfg = base.clone();
    ref_cfg.scheme = SchemeKind::Monolithic;
    ref_cfg.dt = reference_dt;
    let reference = simulate(model, &ref_cfg)?;
    if let Some(f) = &reference.failure {
        return Err(Error::Model(format!(
            "convergence reference run failed at step {}: {}",
            f.step, f.message
        )));
    }

    let mut lines = Vec::new();
    for &scheme in schemes {
        let mut e2 = Vec::new();
        let mut e_inf = Vec::new();
        let mut failures = Vec::new();
        for &dt in dts {
            let mut cfg = base.clone();
            cfg.scheme = scheme;
            cfg.dt = dt;
            match simulate(model, &cfg) {
                Ok(out) if out.succeeded() => {
                    let (a, b) = error_norms(&out.trajectory, &reference.trajectory)?;
                    e2.push(a);
                    e_inf.push(b);
                    failures.push(String::new());
                }
                Ok(out) => {
                    let f = out.failure.unwrap();
                    e2.push(f64::NAN);
                    e_inf.push(f64::NAN);
                    failures.push(format!("step {}: {}", f.step, f.message));
                }
                Err(e) => {
                    e2.push(f64::NAN);
                    e_inf.push(f64::NAN);
                    failures.push(e.to_string());
                }
            }
        }
        let ok: Vec<usize> = (0..dts.len()).filter(|&i| e2[i].is_finite()).collect();
        let (slope_e2, slope_e_inf) = if ok.len() >= 2 {
            let xs: Vec<f64> = ok.iter().map(|&i| dts[i].ln()).collect();
            let y2: Vec<f64> = ok.iter().map(|&i| e2[i].max(1e-300).ln()).collect();
            let yi: Vec<f64> = ok.iter().map(|&i| e_inf[i].max(1e-300).ln()).collect();
            (ls_slope(&xs, &y2), ls_slope(&xs, &yi))
        } else {
            (f64::NAN, f64::NAN)
        };
        lines.push(ConvergenceLine {
            scheme: scheme.label().to_string(),
            e2,
            e_inf,
            slope_e2,
            slope_e_inf,
            failures,
        });
    }
    Ok(ConvergenceReport {
        dts: dts.to_vec(),
        reference_dt,
        lines,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traj_from(times: &[f64], lambdas: &[f64]) -> Trajectory {
        let n = times.len();
        Trajectory {
            t: times.to_vec(),
            lambda: lambdas.to_vec(),
            lambda_dot: vec![0.0; n],
            tension: vec![0.0; n],
            stiffness: vec![0.0; n],
            calcium: vec![0.0; n],
            load: vec![0.0; n],
        }
    }

    #[test]
    fn identical_trajectories_have_zero_error() {
        let t: Vec<f64> = (0..11).map(|k| k as f64 * 0.1).collect();
        let l: Vec<f64> = t.iter().map(|x| (x * 3.0).sin()).collect();
        let a = traj_from(&t, &l);
        let (e2, einf) = error_norms(&a, &a).unwrap();
        assert_eq!(e2, 0.0);
        assert_eq!(einf, 0.0);
    }

    #[test]
    fn constant_offset_gives_that_offset() {
        let t: Vec<f64> = (0..101).map(|k| k as f64 * 0.01).collect();
        let l: Vec<f64> = t.iter().map(|x| x * x).collect();
        let coarse_t: Vec<f64> = (0..11).map(|k| k as f64 * 0.1).collect();
        let coarse_l: Vec<f64> = coarse_t.iter().map(|x| x * x + 0.25).collect();
        let reference = traj_from(&t, &l);
        let run = traj_from(&coarse_t, &coarse_l);
        let (e2, einf) = error_norms(&run, &reference).unwrap();
        assert!((e2 - 0.25).abs() < 1e-12);
        assert!((einf - 0.25).abs() < 1e-12);
    }

    #[test]
    fn range_mismatch_is_an_error() {
        let reference = traj_from(&[0.0, 0.5, 1.0], &[0.0, 0.1, 0.2]);
        let run = traj_from(&[0.0, 1.0, 2.0], &[0.0, 0.2, 0.4]);
        assert!(error_norms(&run, &reference).is_err());
    }

    #[test]
    fn oscillation_score_detects_alternation() {
        // smooth monotone decay: no oscillations
        let smooth: Vec<f64> = (0..100).map(|k| (-(k as f64) / 20.0).exp()).collect();
        assert_eq!(oscillation_score(&smooth), 0.0);

        // alternating sawtooth: every step flips the difference sign
        let saw: Vec<f64> = (0..100).map(|k| if k % 2 == 0 { 0.0 } else { 1e-3 }).collect();
        assert!(oscillation_score(&saw) > 0.9);

        // sub-dead-band wiggles are ignored
        let tiny: Vec<f64> = (0..100)
            .map(|k| if k % 2 == 0 { 0.0 } else { 1e-12 })
            .collect();
        assert_eq!(oscillation_score(&tiny), 0.0);

        // one turning point in an otherwise monotone series
        let turn: Vec<f64> = (0..50)
            .map(|k| if k < 25 { k as f64 } else { 50.0 - k as f64 })
            .collect();
        assert!((oscillation_score(&turn) - 1.0 / 49.0).abs() < 1e-12);
    }
}
