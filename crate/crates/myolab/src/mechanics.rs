//! Zero-dimensional tissue mechanics: elastic potentials, external driving
//! programs and the scalar force-balance solve.
//!
//! The balance reads
//! `M*lambda'' + sigma*lambda' + dW/dlambda(lambda) + T_a = p(t)`,
//! discretized with first-order finite differences in time. The quasistatic
//! case is `M = sigma = 0`.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Elastic potential of the passive tissue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Potential {
    /// `W = 1/2 K_p lambda^2`
    Quadratic,
    /// `W = 1/2 K_p lambda log(1 + lambda)`, defined for `lambda > -1`
    Log,
}

/// Mechanical parameters (SI units).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MechanicsParams {
    /// Normalized mass (Pa s^2).
    pub mass: f64,
    /// Normalized viscous modulus (Pa s).
    pub visc: f64,
    /// Passive stiffness (Pa).
    pub k_p: f64,
    /// Elastic potential shape.
    pub potential: Potential,
}

impl MechanicsParams {
    pub fn quasistatic(k_p: f64, potential: Potential) -> Self {
        Self {
            mass: 0.0,
            visc: 0.0,
            k_p,
            potential,
        }
    }

    pub fn is_quasistatic(&self) -> bool {
        self.mass == 0.0 && self.visc == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        if self.mass < 0.0 || self.visc < 0.0 || !(self.k_p > 0.0) {
            return Err(Error::Config(format!(
                "mechanics requires mass >= 0, visc >= 0, k_p > 0 (got {}, {}, {})",
                self.mass, self.visc, self.k_p
            )));
        }
        Ok(())
    }
}

/// Intracellular calcium program (micromolar).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CalciumProgram {
    Constant { value: f64 },
    /// Biexponential transient normalized so its peak equals `c_max`.
    Transient {
        c0: f64,
        c_max: f64,
        t0: f64,
        tau1: f64,
        tau2: f64,
    },
    /// Piecewise-linear table (times strictly increasing).
    Table { times: Vec<f64>, values: Vec<f64> },
}

impl CalciumProgram {
    /// Transient with the reference twitch parameters
    /// (c0 = 0.1 uM, c_max = 1.6 uM, t0 = 0.1 s, tau1 = 0.02 s, tau2 = 0.05 s).
    pub fn reference_twitch() -> Self {
        CalciumProgram::Transient {
            c0: 0.1,
            c_max: 1.6,
            t0: 0.1,
            tau1: 0.02,
            tau2: 0.05,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            CalciumProgram::Constant { value } => {
                if *value < 0.0 || !value.is_finite() {
                    return Err(Error::Config("calcium must be nonnegative".into()));
                }
            }
            CalciumProgram::Transient {
                c0,
                c_max,
                tau1,
                tau2,
                ..
            } => {
                if tau1 == tau2 {
                    return Err(Error::Config("calcium transient needs tau1 != tau2".into()));
                }
                if !(*c_max > *c0 && *c0 > 0.0) {
                    return Err(Error::Config(
                        "calcium transient needs c_max > c0 > 0".into(),
                    ));
                }
                if !(*tau1 > 0.0 && *tau2 > 0.0) {
                    return Err(Error::Config("calcium time constants must be positive".into()));
                }
            }
            CalciumProgram::Table { times, values } => {
                validate_table(times, values, "calcium")?;
            }
        }
        Ok(())
    }
}

/// External load program (Pa).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LoadProgram {
    Constant { value: f64 },
    /// Hold `p_bar` until `start`, then move linearly to `target` over
    /// `duration` and hold there.
    LinearRamp {
        p_bar: f64,
        start: f64,
        duration: f64,
        target: f64,
    },
    Table { times: Vec<f64>, values: Vec<f64> },
}

impl LoadProgram {
    pub fn validate(&self) -> Result<()> {
        match self {
            LoadProgram::Constant { .. } => Ok(()),
            LoadProgram::LinearRamp { duration, .. } => {
                if !(*duration > 0.0) {
                    return Err(Error::Config("ramp duration must be positive".into()));
                }
                Ok(())
            }
            LoadProgram::Table { times, values } => validate_table(times, values, "load"),
        }
    }
}

fn validate_table(times: &[f64], values: &[f64], what: &str) -> Result<()> {
    if times.len() != values.len() || times.len() < 2 {
        return Err(Error::Config(format!(
            "{what} table needs matching times/values with at least two rows"
        )));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config(format!(
            "{what} table times must be strictly increasing"
        )));
    }
    Ok(())
}

fn table_at(t: f64, times: &[f64], values: &[f64]) -> f64 {
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

/// Calcium concentration at time `t` (uM).
pub fn calcium_at(t: f64, program: &CalciumProgram) -> f64 {
    match program {
        CalciumProgram::Constant { value } => *value,
        CalciumProgram::Transient {
            c0,
            c_max,
            t0,
            tau1,
            tau2,
        } => {
            if t < *t0 {
                return *c0;
            }
            let ratio = tau1 / tau2;
            let beta = ratio.powf(-1.0 / (ratio - 1.0)) - ratio.powf(-1.0 / (1.0 - tau2 / tau1));
            let s = t - t0;
            c0 + (c_max - c0) / beta * ((-s / tau1).exp() - (-s / tau2).exp())
        }
        CalciumProgram::Table { times, values } => table_at(t, times, values),
    }
}

/// External load at time `t` (Pa).
pub fn load_at(t: f64, program: &LoadProgram) -> f64 {
    match program {
        LoadProgram::Constant { value } => *value,
        LoadProgram::LinearRamp {
            p_bar,
            start,
            duration,
            target,
        } => {
            if t <= *start {
                *p_bar
            } else if t >= start + duration {
                *target
            } else {
                p_bar + (t - start) / duration * (target - p_bar)
            }
        }
        LoadProgram::Table { times, values } => table_at(t, times, values),
    }
}

/// Strain history entering the time-discrete balance: `lambda` is the current
/// value and `lambda_prev` the one before it. Runs start with both equal so
/// the first discrete velocity is zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MechHistory {
    pub lambda: f64,
    pub lambda_prev: f64,
}

impl MechHistory {
    pub fn at_rest(lambda0: f64) -> Self {
        Self {
            lambda: lambda0,
            lambda_prev: lambda0,
        }
    }

    pub fn velocity(&self, dt: f64) -> f64 {
        (self.lambda - self.lambda_prev) / dt
    }
}

/// Derivative of the elastic potential (Pa).
pub fn potential_derivative(lambda: f64, params: &MechanicsParams) -> Result<f64> {
    match params.potential {
        Potential::Quadratic => Ok(params.k_p * lambda),
        Potential::Log => {
            if lambda <= -1.0 {
                return Err(Error::Model(format!(
                    "log potential undefined at lambda = {lambda}"
                )));
            }
            Ok(0.5 * params.k_p * ((1.0 + lambda).ln() + lambda / (1.0 + lambda)))
        }
    }
}

/// Second derivative of the elastic potential (Pa).
pub fn potential_second_derivative(lambda: f64, params: &MechanicsParams) -> Result<f64> {
    match params.potential {
        Potential::Quadratic => Ok(params.k_p),
        Potential::Log => {
            if lambda <= -1.0 {
                return Err(Error::Model(format!(
                    "log potential undefined at lambda = {lambda}"
                )));
            }
            let s = 1.0 + lambda;
            Ok(0.5 * params.k_p * (1.0 / s + 1.0 / (s * s)))
        }
    }
}

/// Elastic potential value (Pa), used by finite-difference checks.
pub fn potential_energy(lambda: f64, params: &MechanicsParams) -> Result<f64> {
    match params.potential {
        Potential::Quadratic => Ok(0.5 * params.k_p * lambda * lambda),
        Potential::Log => {
            if lambda <= -1.0 {
                return Err(Error::Model(format!(
                    "log potential undefined at lambda = {lambda}"
                )));
            }
            Ok(0.5 * params.k_p * lambda * (1.0 + lambda).ln())
        }
    }
}

/// Residual of the time-discrete force balance at candidate strain
/// `lambda_new` (Pa):
/// `M (l' - 2l + l_prev)/dt^2 + sigma (l' - l)/dt + dW/dl(l') + ta_star - p`.
pub fn mech_residual(
    hist: &MechHistory,
    lambda_new: f64,
    dt: f64,
    ta_star: f64,
    p: f64,
    params: &MechanicsParams,
) -> Result<f64> {
    let inertial = if params.mass != 0.0 {
        params.mass * (lambda_new - 2.0 * hist.lambda + hist.lambda_prev) / (dt * dt)
    } else {
        0.0
    };
    let viscous = if params.visc != 0.0 {
        params.visc * (lambda_new - hist.lambda) / dt
    } else {
        0.0
    };
    Ok(inertial + viscous + potential_derivative(lambda_new, params)? + ta_star - p)
}

/// Convergence threshold of the scalar mechanics solve (Pa).
pub fn mech_tolerance(params: &MechanicsParams) -> f64 {
    1e-8 * params.k_p.max(1.0)
}

const MECH_MAX_ITERS: usize = 100;

/// Solve the force balance for the next strain.
///
/// `tension` maps a candidate `lambda_new` to the active tension and its
/// slope `d(T_a)/d(lambda_new)`; constant tension passes slope 0, the
/// stabilized scheme passes its active stiffness. Newton from `hist.lambda`
/// with the analytic residual slope; one iteration is exact when the
/// residual is affine. Returns the root and the iteration count.
pub fn mech_solve<F>(
    hist: &MechHistory,
    dt: f64,
    tension: F,
    p: f64,
    params: &MechanicsParams,
) -> Result<(f64, usize)>
where
    F: Fn(f64) -> (f64, f64),
{
    let tol = mech_tolerance(params);
    let mut lambda = hist.lambda;
    for iter in 0..MECH_MAX_ITERS {
        let (ta, dta) = tension(lambda);
        let res = mech_residual(hist, lambda, dt, ta, p, params)?;
        if !res.is_finite() {
            return Err(Error::NonFinite("mechanics residual"));
        }
        if res.abs() <= tol {
            return Ok((lambda, iter));
        }
        let mut slope = potential_second_derivative(lambda, params)? + dta;
        if params.mass != 0.0 {
            slope += params.mass / (dt * dt);
        }
        if params.visc != 0.0 {
            slope += params.visc / dt;
        }
        if slope == 0.0 || !slope.is_finite() {
            return Err(Error::NonConvergence {
                solver: "mechanics",
                iterations: iter,
                residual: res,
            });
        }
        let mut next = lambda - res / slope;
        if params.potential == Potential::Log && next <= -1.0 {
            // bisect toward the domain boundary of the log potential
            next = 0.5 * (lambda - 1.0);
        }
        lambda = next;
    }
    let (ta, _) = tension(lambda);
    let res = mech_residual(hist, lambda, dt, ta, p, params)?;
    if res.abs() <= tol {
        return Ok((lambda, MECH_MAX_ITERS));
    }
    Err(Error::NonConvergence {
        solver: "mechanics",
        iterations: MECH_MAX_ITERS,
        residual: res,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad(k_p: f64) -> MechanicsParams {
        MechanicsParams::quasistatic(k_p, Potential::Quadratic)
    }

    fn log_pot(k_p: f64) -> MechanicsParams {
        MechanicsParams::quasistatic(k_p, Potential::Log)
    }

    #[test]
    fn potential_derivatives() {
        let q = quad(1.0e6);
        assert_eq!(potential_derivative(0.0, &q).unwrap(), 0.0);
        assert_eq!(potential_derivative(0.1, &q).unwrap(), 1.0e5);

        let l = log_pot(1.0e6);
        assert_eq!(potential_derivative(0.0, &l).unwrap(), 0.0);
        assert!(potential_derivative(-1.0, &l).is_err());

        // analytic derivative of the log potential matches central differences
        for lambda in [-0.2, 0.1, 0.3] {
            let d = 1e-6;
            let fd = (potential_energy(lambda + d, &l).unwrap()
                - potential_energy(lambda - d, &l).unwrap())
                / (2.0 * d);
            let an = potential_derivative(lambda, &l).unwrap();
            assert!(
                (fd - an).abs() <= 1e-3 + 1e-8 * an.abs(),
                "lambda={lambda}: fd {fd} vs {an}"
            );
            let fd2 = (potential_derivative(lambda + d, &l).unwrap()
                - potential_derivative(lambda - d, &l).unwrap())
                / (2.0 * d);
            let an2 = potential_second_derivative(lambda, &l).unwrap();
            assert!((fd2 - an2).abs() <= 1e-2 + 1e-7 * an2.abs());
        }
    }

    #[test]
    fn calcium_transient_shape() {
        let prog = CalciumProgram::reference_twitch();
        prog.validate().unwrap();
        assert_eq!(calcium_at(0.05, &prog), 0.1);
        assert!((calcium_at(0.1, &prog) - 0.1).abs() < 1e-14);

        // analytic peak location and value
        let (tau1, tau2): (f64, f64) = (0.02, 0.05);
        let t_star = 0.1 + (tau1 / tau2).ln() / (1.0 / tau2 - 1.0 / tau1);
        assert!((t_star - 0.1 - 0.0305).abs() < 2e-4);
        let peak = calcium_at(t_star, &prog);
        assert!((peak - 1.6).abs() < 1e-9, "peak {peak}");
        // peak is the global max on a fine grid
        let grid_max = (0..20000)
            .map(|k| calcium_at(k as f64 * 5e-5, &prog))
            .fold(f64::MIN, f64::max);
        assert!(grid_max <= peak + 1e-9);
    }

    #[test]
    fn load_programs() {
        let c = LoadProgram::Constant { value: 0.0 };
        assert_eq!(load_at(12.3, &c), 0.0);

        let ramp = LoadProgram::LinearRamp {
            p_bar: 100.0e3,
            start: 0.1,
            duration: 0.5,
            target: 0.0,
        };
        ramp.validate().unwrap();
        assert_eq!(load_at(0.05, &ramp), 100.0e3);
        assert!((load_at(0.35, &ramp) - 50.0e3).abs() < 1e-9);
        assert_eq!(load_at(0.6, &ramp), 0.0);
        assert_eq!(load_at(2.0, &ramp), 0.0);
    }

    #[test]
    fn table_programs_interpolate() {
        let tab = CalciumProgram::Table {
            times: vec![0.0, 1.0, 2.0],
            values: vec![0.1, 0.5, 0.3],
        };
        tab.validate().unwrap();
        assert_eq!(calcium_at(-1.0, &tab), 0.1);
        assert!((calcium_at(0.5, &tab) - 0.3).abs() < 1e-14);
        assert_eq!(calcium_at(5.0, &tab), 0.3);
    }

    #[test]
    fn residual_and_quasistatic_root() {
        let params = quad(1.0e6);

        // constant history in equilibrium: ta = p - dW/dl(lambda) zeroes the residual
        let lambda = 0.3;
        let hist = MechHistory::at_rest(lambda);
        let p = 1.0e5;
        let ta = p - potential_derivative(lambda, &params).unwrap();
        let r = mech_residual(&hist, lambda, 1e-3, ta, p, &params).unwrap();
        assert!(r.abs() < 1e-9);

        // root of the quasistatic quadratic problem is (p - ta)/k_p
        let hist = MechHistory::at_rest(0.0);
        let (root, iters) = mech_solve(&hist, 1e-3, |_| (6.0e4, 0.0), 1.0e4, &params).unwrap();
        assert!((root - (1.0e4 - 6.0e4) / 1.0e6).abs() < 1e-15);
        assert!(iters <= 1, "affine problem should need one iteration");
    }

    #[test]
    fn log_potential_compression_root() {
        let params = log_pot(1.0e6);
        let hist = MechHistory::at_rest(0.0);
        let (root, _) = mech_solve(&hist, 1e-3, |_| (6.0e4, 0.0), 0.0, &params).unwrap();
        assert!(root < 0.0, "active tension must compress, got {root}");
        let res = mech_residual(&hist, root, 1e-3, 6.0e4, 0.0, &params).unwrap();
        assert!(res.abs() <= mech_tolerance(&params));
    }

    #[test]
    fn stabilization_increases_residual_slope() {
        // with K_a > 0 the affine tension adds K_a to the residual slope
        let params = quad(2.0e6);
        let ka = 5.0e5;
        let lambda_k = 0.01;
        let plain = params.k_p;
        let stabilized = params.k_p + ka;
        assert!(stabilized > plain);
        // and the solve agrees with the closed form
        let hist = MechHistory::at_rest(lambda_k);
        let ta = 3.0e4;
        let (root, _) = mech_solve(
            &hist,
            1e-3,
            |l| (ta + ka * (l - lambda_k), ka),
            0.0,
            &params,
        )
        .unwrap();
        let expect = (0.0 - ta + ka * lambda_k) / (params.k_p + ka);
        assert!((root - expect).abs() < 1e-12);
    }

    #[test]
    fn inertial_terms_enter_residual() {
        let params = MechanicsParams {
            mass: 0.1,
            visc: 10.0,
            k_p: 1.0e6,
            potential: Potential::Quadratic,
        };
        let hist = MechHistory {
            lambda: 0.02,
            lambda_prev: 0.01,
        };
        let dt = 1e-3;
        let lambda_new = 0.025;
        let r = mech_residual(&hist, lambda_new, dt, 0.0, 0.0, &params).unwrap();
        let expect = 0.1 * (lambda_new - 0.04 + 0.01) / (dt * dt)
            + 10.0 * (lambda_new - 0.02) / dt
            + 1.0e6 * lambda_new;
        assert!((r - expect).abs() < 1e-9);
    }
}
