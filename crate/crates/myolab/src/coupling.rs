//! Time-stepping engines coupling a force model with the 0D mechanics.
//!
//! Per step the segregated scheme advances the force model with the strain
//! and strain rate extrapolated from past mechanics solves, then solves the
//! force balance with the updated tension held constant. The stabilized
//! variant replaces the constant tension by the affine law
//! `T_a + K_a (lambda_new - lambda)`, which restores unconditional absolute
//! stability at the cost of a consistent O(dt) perturbation. The monolithic
//! scheme solves force state and strain as one nonlinear system. The
//! fractional-step scheme (minimal model only) splits the moment dynamics
//! into a strain-rate-free relaxation and a transport part solved together
//! with the mechanics; with a constant attached fraction it reproduces the
//! stabilized trajectory exactly.

use crate::activation::{newton_solve, ForceModel, InnerStepper, StepStats};
use crate::error::{Error, Result};
use crate::mechanics::{
    calcium_at, load_at, mech_residual, mech_solve, CalciumProgram, LoadProgram, MechHistory,
    MechanicsParams,
};
use serde::{Deserialize, Serialize};

/// Coupling scheme between the force model and the mechanics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeKind {
    Monolithic,
    Segregated,
    StabilizedSegregated,
    FractionalStep,
}

impl SchemeKind {
    pub fn label(&self) -> &'static str {
        match self {
            SchemeKind::Monolithic => "monolithic",
            SchemeKind::Segregated => "segregated",
            SchemeKind::StabilizedSegregated => "stabilized-segregated",
            SchemeKind::FractionalStep => "fractional-step",
        }
    }

    pub fn all() -> [SchemeKind; 4] {
        [
            SchemeKind::Monolithic,
            SchemeKind::Segregated,
            SchemeKind::StabilizedSegregated,
            SchemeKind::FractionalStep,
        ]
    }
}

/// Initial-state policy of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "kebab-case")]
pub enum InitialPolicy {
    /// Model default state, tissue at rest (`lambda = 0`).
    Default,
    /// Explicit state vector and strain.
    Explicit { state: Vec<f64>, lambda: f64 },
    /// Relax under the driving programs frozen at `t = 0` until the per-step
    /// state change drops below 1e-10, then start from the equilibrium.
    PreRelax,
}

/// Full description of one simulation.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: String,
    pub scheme: SchemeKind,
    /// Inner stepper; `None` picks the model default.
    #[serde(default)]
    pub stepper: Option<InnerStepper>,
    pub dt: f64,
    pub t_end: f64,
    /// Mechanics substep ratio `m >= 1`: the force model advances every step,
    /// the mechanics every m-th step (over `m * dt`).
    #[serde(default = "default_substep")]
    pub substep: usize,
    pub calcium: CalciumProgram,
    pub load: LoadProgram,
    pub mech: MechanicsParams,
    #[serde(default = "default_initial")]
    pub initial: InitialPolicy,
}

fn default_substep() -> usize {
    1
}

fn default_initial() -> InitialPolicy {
    InitialPolicy::Default
}

impl RunConfig {
    pub fn validate(&self, model: &dyn ForceModel) -> Result<InnerStepper> {
        if !(self.dt > 0.0) || !(self.t_end > 0.0) {
            return Err(Error::Config("dt and t_end must be positive".into()));
        }
        if self.substep < 1 {
            return Err(Error::Config("substep ratio must be >= 1".into()));
        }
        self.calcium.validate()?;
        self.load.validate()?;
        self.mech.validate()?;
        if self.scheme == SchemeKind::FractionalStep && model.minimal_params().is_none() {
            return Err(Error::Config(
                "the fractional-step scheme is defined for the minimal model only".into(),
            ));
        }
        let stepper = self.stepper.unwrap_or_else(|| model.steppers()[0]);
        if !model.steppers().contains(&stepper) {
            return Err(Error::Config(format!(
                "model {} does not support the requested stepper",
                model.id()
            )));
        }
        if let InitialPolicy::Explicit { state, .. } = &self.initial {
            if state.len() != model.dim() {
                return Err(Error::Config(format!(
                    "explicit initial state has {} entries, model {} needs {}",
                    state.len(),
                    model.id(),
                    model.dim()
                )));
            }
        }
        Ok(stepper)
    }
}

/// Extra state carried by the fractional-step scheme.
#[derive(Debug, Clone, Copy, Default)]
pub struct FractionalAux {
    /// Persistent split variable (moment plus pending transport increment).
    pub mu1_tilde: f64,
    /// Intermediate value after the relaxation substep of the last step;
    /// this is the consistent approximation of the first moment.
    pub mu1_star: f64,
}

/// Evolving state of a coupled run.
#[derive(Debug, Clone)]
pub struct CoupledState {
    pub r: Vec<f64>,
    pub hist: MechHistory,
    pub fractional: Option<FractionalAux>,
}

impl CoupledState {
    pub fn new(r: Vec<f64>, lambda0: f64) -> Self {
        Self {
            r,
            hist: MechHistory::at_rest(lambda0),
            fractional: None,
        }
    }
}

/// Outputs of one coupled step.
#[derive(Debug, Clone, Copy, Default)]
pub struct StepRecord {
    pub tension: f64,
    pub stiffness: f64,
    pub inner: StepStats,
    pub mech_iterations: usize,
}

/// A scheme bound to a model, stepper and mechanics parameters.
pub struct Coupler<'m> {
    pub model: &'m dyn ForceModel,
    pub scheme: SchemeKind,
    pub stepper: InnerStepper,
    pub mech: MechanicsParams,
}

impl<'m> Coupler<'m> {
    pub fn new(
        model: &'m dyn ForceModel,
        scheme: SchemeKind,
        stepper: InnerStepper,
        mech: MechanicsParams,
    ) -> Self {
        Self {
            model,
            scheme,
            stepper,
            mech,
        }
    }

    /// Advance one plain step (`dt_force == dt_mech`, mechanics solved).
    pub fn step(
        &self,
        state: &mut CoupledState,
        ca_next: f64,
        p_next: f64,
        dt: f64,
    ) -> Result<StepRecord> {
        self.step_substepped(state, ca_next, p_next, dt, dt, true)
    }

    /// Advance one force step and, when `solve_mech`, one mechanics solve
    /// over `dt_mech`. The strain-rate extrapolation always spans the
    /// mechanics time scale.
    pub fn step_substepped(
        &self,
        state: &mut CoupledState,
        ca_next: f64,
        p_next: f64,
        dt_force: f64,
        dt_mech: f64,
        solve_mech: bool,
    ) -> Result<StepRecord> {
        match self.scheme {
            SchemeKind::Segregated | SchemeKind::StabilizedSegregated => {
                self.step_segregated_family(state, ca_next, p_next, dt_force, dt_mech, solve_mech)
            }
            SchemeKind::Monolithic => {
                self.step_monolithic(state, ca_next, p_next, dt_force, dt_mech, solve_mech)
            }
            SchemeKind::FractionalStep => {
                self.step_fractional(state, ca_next, p_next, dt_force, dt_mech, solve_mech)
            }
        }
    }

    fn step_segregated_family(
        &self,
        state: &mut CoupledState,
        ca_next: f64,
        p_next: f64,
        dt_force: f64,
        dt_mech: f64,
        solve_mech: bool,
    ) -> Result<StepRecord> {
        let lambda_star = state.hist.lambda;
        let lambda_dot_star = state.hist.velocity(dt_mech);
        let inner = self.model.inner_step(
            self.stepper,
            &mut state.r,
            ca_next,
            lambda_star,
            lambda_dot_star,
            dt_force,
        )?;
        let tension = self.model.tension(&state.r, lambda_star)?;
        let stiffness = self.model.stiffness(&state.r, lambda_star)?;
        let mut mech_iterations = 0;
        if solve_mech {
            let (lambda_new, iters) = match self.scheme {
                SchemeKind::Segregated => mech_solve(
                    &state.hist,
                    dt_mech,
                    |_| (tension, 0.0),
                    p_next,
                    &self.mech,
                )?,
                _ => mech_solve(
                    &state.hist,
                    dt_mech,
                    |l| (tension + stiffness * (l - lambda_star), stiffness),
                    p_next,
                    &self.mech,
                )?,
            };
            mech_iterations = iters;
            state.hist.lambda_prev = state.hist.lambda;
            state.hist.lambda = lambda_new;
        }
        Ok(StepRecord {
            tension,
            stiffness,
            inner,
            mech_iterations,
        })
    }

    fn step_monolithic(
        &self,
        state: &mut CoupledState,
        ca_next: f64,
        p_next: f64,
        dt_force: f64,
        dt_mech: f64,
        solve_mech: bool,
    ) -> Result<StepRecord> {
        if !solve_mech {
            // between mechanics solves the force model advances with the
            // extrapolated strain, as in the segregated family
            return self.step_segregated_family(state, ca_next, p_next, dt_force, dt_mech, false);
        }
        let n = self.model.dim();
        let r_old = state.r.clone();
        let hist = state.hist;
        let lambda_k = hist.lambda;
        let mech_scale = self.mech.k_p.max(1.0);
        let residual = |x: &[f64], out: &mut [f64]| -> Result<()> {
            let (r_new, lam) = x.split_at(n);
            let lambda_new = lam[0];
            let lambda_dot = (lambda_new - lambda_k) / dt_mech;
            self.model.step_residual(
                self.stepper,
                &r_old,
                r_new,
                ca_next,
                lambda_new,
                lambda_dot,
                dt_force,
                &mut out[..n],
            )?;
            let ta = self.model.tension(r_new, lambda_new)?;
            out[n] =
                mech_residual(&hist, lambda_new, dt_mech, ta, p_next, &self.mech)? / mech_scale;
            Ok(())
        };
        let mut x0 = r_old.clone();
        x0.push(lambda_k);
        let (solution, stats) = newton_solve("coupled step", residual, &x0)?;
        let lambda_new = solution[n];
        state.r.copy_from_slice(&solution[..n]);
        state.hist.lambda_prev = state.hist.lambda;
        state.hist.lambda = lambda_new;
        let tension = self.model.tension(&state.r, lambda_new)?;
        let stiffness = self.model.stiffness(&state.r, lambda_new)?;
        Ok(StepRecord {
            tension,
            stiffness,
            inner: stats,
            mech_iterations: stats.iterations,
        })
    }

    fn step_fractional(
        &self,
        state: &mut CoupledState,
        _ca_next: f64,
        p_next: f64,
        dt_force: f64,
        dt_mech: f64,
        solve_mech: bool,
    ) -> Result<StepRecord> {
        let p = self
            .model
            .minimal_params()
            .ok_or_else(|| {
                Error::Config("fractional-step scheme requires the minimal model".into())
            })?
            .clone();
        let aux = state.fractional.get_or_insert(FractionalAux {
            mu1_tilde: state.r[1],
            mu1_star: state.r[1],
        });
        let denom = 1.0 + p.r * dt_force;
        // decoupled attached-fraction update
        let mu0_new = (state.r[0] + dt_force * p.mu0_f) / denom;
        // relaxation substep on the split variable
        let mu1_star = (aux.mu1_tilde + dt_force * p.mu1_f) / denom;
        let tension = p.a_xb * mu1_star;
        let stiffness = p.a_xb * mu0_new;
        let mut mech_iterations = 0;
        if solve_mech {
            // transport substep solved together with the mechanics: the
            // tension seen by the balance is a_xb * mu1_tilde_new with
            // mu1_tilde_new = mu1_star + (lambda_new - lambda_k) * mu0_new,
            // i.e. exactly the stabilized affine law
            let lambda_k = state.hist.lambda;
            let (lambda_new, iters) = mech_solve(
                &state.hist,
                dt_mech,
                |l| (tension + stiffness * (l - lambda_k), stiffness),
                p_next,
                &self.mech,
            )?;
            mech_iterations = iters;
            aux.mu1_tilde = mu1_star + (lambda_new - lambda_k) * mu0_new;
            state.hist.lambda_prev = state.hist.lambda;
            state.hist.lambda = lambda_new;
        } else {
            aux.mu1_tilde = mu1_star;
        }
        aux.mu1_star = mu1_star;
        state.r[0] = mu0_new;
        state.r[1] = mu1_star;
        Ok(StepRecord {
            tension,
            stiffness,
            inner: StepStats::default(),
            mech_iterations,
        })
    }
}

/// Time series of a run, sampled at every step on the uniform grid
/// `t_k = k * dt`.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub lambda: Vec<f64>,
    pub lambda_dot: Vec<f64>,
    pub tension: Vec<f64>,
    pub stiffness: Vec<f64>,
    pub calcium: Vec<f64>,
    pub load: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    fn push(&mut self, t: f64, lambda: f64, lambda_dot: f64, ta: f64, ka: f64, ca: f64, p: f64) {
        self.t.push(t);
        self.lambda.push(lambda);
        self.lambda_dot.push(lambda_dot);
        self.tension.push(ta);
        self.stiffness.push(ka);
        self.calcium.push(ca);
        self.load.push(p);
    }
}

/// Breakdown report when a run aborts early.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverFailure {
    pub step: usize,
    pub time: f64,
    pub message: String,
}

/// Aggregate solver statistics of a run.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct SimStats {
    pub steps_completed: usize,
    pub total_inner_iterations: usize,
    pub max_inner_residual: f64,
    pub total_mech_iterations: usize,
    pub pre_relax_steps: usize,
}

/// Result of a simulation; on solver breakdown the trajectory holds all
/// steps up to the last good one and `failure` reports the abort.
#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub trajectory: Trajectory,
    pub failure: Option<SolverFailure>,
    pub stats: SimStats,
}

impl SimOutcome {
    pub fn succeeded(&self) -> bool {
        self.failure.is_none()
    }
}

/// Relax the coupled system under frozen driving inputs until the per-step
/// state change (state vector and strain) drops below `tol`.
pub fn pre_relax(
    coupler: &Coupler,
    state: &mut CoupledState,
    ca: f64,
    p: f64,
    dt: f64,
    tol: f64,
    max_steps: usize,
) -> Result<usize> {
    for step in 0..max_steps {
        let r_before = state.r.clone();
        let lambda_before = state.hist.lambda;
        coupler.step(state, ca, p, dt)?;
        let mut change = (state.hist.lambda - lambda_before).abs();
        for (a, b) in state.r.iter().zip(&r_before) {
            change = change.max((a - b).abs());
        }
        if !change.is_finite() {
            return Err(Error::NonFinite("pre-relaxation state"));
        }
        if change < tol {
            // restart the strain history so the run begins at zero velocity
            state.hist.lambda_prev = state.hist.lambda;
            return Ok(step + 1);
        }
    }
    Err(Error::NonConvergence {
        solver: "pre-relaxation",
        iterations: max_steps,
        residual: f64::NAN,
    })
}

const PRE_RELAX_TOL: f64 = 1e-10;
const PRE_RELAX_MAX_STEPS: usize = 1_000_000;

/// Run a full simulation.
///
/// Configuration errors are returned as `Err`; solver breakdown mid-run
/// yields `Ok` with the truncated trajectory and a failure report.
pub fn simulate(model: &dyn ForceModel, cfg: &RunConfig) -> Result<SimOutcome> {
    let stepper = cfg.validate(model)?;
    let coupler = Coupler::new(model, cfg.scheme, stepper, cfg.mech);

    let (mut state, pre_relax_steps) = match &cfg.initial {
        InitialPolicy::Default => (CoupledState::new(model.initial_state(), 0.0), 0),
        InitialPolicy::Explicit { state, lambda } => {
            (CoupledState::new(state.clone(), *lambda), 0)
        }
        InitialPolicy::PreRelax => {
            let mut s = CoupledState::new(model.initial_state(), 0.0);
            let ca0 = calcium_at(0.0, &cfg.calcium);
            let p0 = load_at(0.0, &cfg.load);
            let n = pre_relax(
                &coupler,
                &mut s,
                ca0,
                p0,
                cfg.dt,
                PRE_RELAX_TOL,
                PRE_RELAX_MAX_STEPS,
            )?;
            s.fractional = None; // restart split bookkeeping at the equilibrium
            (s, n)
        }
    };

    let n_steps = (cfg.t_end / cfg.dt).round() as usize;
    let mut traj = Trajectory::default();
    let mut stats = SimStats {
        pre_relax_steps,
        ..Default::default()
    };

    // initial sample
    let ta0 = model.tension(&state.r, state.hist.lambda)?;
    let ka0 = model.stiffness(&state.r, state.hist.lambda)?;
    traj.push(
        0.0,
        state.hist.lambda,
        0.0,
        ta0,
        ka0,
        calcium_at(0.0, &cfg.calcium),
        load_at(0.0, &cfg.load),
    );

    let m = cfg.substep;
    let dt_mech = cfg.dt * m as f64;
    let mut failure = None;
    for k in 0..n_steps {
        let t_next = (k + 1) as f64 * cfg.dt;
        let ca_next = calcium_at(t_next, &cfg.calcium);
        let p_next = load_at(t_next, &cfg.load);
        let lambda_before = state.hist.lambda;
        let solve_mech = (k + 1) % m == 0;
        let record =
            match coupler.step_substepped(&mut state, ca_next, p_next, cfg.dt, dt_mech, solve_mech)
            {
                Ok(rec) => rec,
                Err(err) if err.is_solver_failure() => {
                    failure = Some(SolverFailure {
                        step: k + 1,
                        time: t_next,
                        message: err.to_string(),
                    });
                    break;
                }
                Err(err) => return Err(err),
            };
        let finite = state.hist.lambda.is_finite() && state.r.iter().all(|v| v.is_finite());
        if !finite {
            failure = Some(SolverFailure {
                step: k + 1,
                time: t_next,
                message: "non-finite state after step".into(),
            });
            break;
        }
        stats.steps_completed = k + 1;
        stats.total_inner_iterations += record.inner.iterations;
        stats.max_inner_residual = stats.max_inner_residual.max(record.inner.residual);
        stats.total_mech_iterations += record.mech_iterations;
        traj.push(
            t_next,
            state.hist.lambda,
            (state.hist.lambda - lambda_before) / cfg.dt,
            record.tension,
            record.stiffness,
            ca_next,
            p_next,
        );
    }

    Ok(SimOutcome {
        trajectory: traj,
        failure,
        stats,
    })
}

/// One application of the minimal coupled model's iteration map
/// `psi = (mu0, mu1, lambda_k, lambda_km1) -> psi'` at constant load `p`.
///
/// The fractional-step scheme maps through its stabilized equivalent, whose
/// state space this is.
pub fn minimal_map_step(
    scheme: SchemeKind,
    params: &crate::activation::MinimalModelParams,
    mech: &MechanicsParams,
    psi: &[f64; 4],
    p: f64,
    dt: f64,
) -> Result<[f64; 4]> {
    let model = crate::activation::MinimalModel::new(params.clone())?;
    let scheme = if scheme == SchemeKind::FractionalStep {
        SchemeKind::StabilizedSegregated
    } else {
        scheme
    };
    let coupler = Coupler::new(&model, scheme, InnerStepper::Implicit, *mech);
    let mut state = CoupledState {
        r: vec![psi[0], psi[1]],
        hist: MechHistory {
            lambda: psi[2],
            lambda_prev: psi[3],
        },
        fractional: None,
    };
    coupler.step(&mut state, 0.0, p, dt)?;
    Ok([state.r[0], state.r[1], state.hist.lambda, state.hist.lambda_prev])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::MinimalModel;
    use crate::mechanics::Potential;

    fn quasistatic(k_p: f64) -> MechanicsParams {
        MechanicsParams::quasistatic(k_p, Potential::Quadratic)
    }

    fn minimal() -> MinimalModel {
        MinimalModel::default()
    }

    #[test]
    fn segregated_step_matches_closed_form() {
        let model = minimal();
        let p = model.params;
        let mech = quasistatic(1.0e6);
        let coupler = Coupler::new(&model, SchemeKind::Segregated, InnerStepper::Implicit, mech);
        let mut state = CoupledState::new(vec![0.05, 0.001], 0.01);
        state.hist.lambda_prev = 0.012;
        let dt = 1e-3;
        let load = 2.0e4;

        // hand evaluation of the scheme
        let denom = 1.0 + p.r * dt;
        let mu0 = (0.05 + dt * p.mu0_f) / denom;
        let ld_star = (0.01 - 0.012) / dt;
        let mu1 = (0.001 + dt * p.mu1_f + dt * ld_star * mu0) / denom;
        let lambda_expect = (load - p.a_xb * mu1) / mech.k_p;

        coupler.step(&mut state, 0.0, load, dt).unwrap();
        assert!((state.r[0] - mu0).abs() < 1e-15);
        assert!((state.r[1] - mu1).abs() < 1e-15);
        assert!(
            (state.hist.lambda - lambda_expect).abs() < 1e-12,
            "{} vs {lambda_expect}",
            state.hist.lambda
        );
    }

    #[test]
    fn stabilized_step_matches_closed_form() {
        let model = minimal();
        let p = model.params;
        let mech = quasistatic(1.0e6);
        let coupler = Coupler::new(
            &model,
            SchemeKind::StabilizedSegregated,
            InnerStepper::Implicit,
            mech,
        );
        let lambda_k = -0.015;
        let mut state = CoupledState::new(vec![0.1, 0.002], lambda_k);
        state.hist.lambda_prev = -0.013;
        let dt = 1e-3;
        let load = 0.0;

        let denom = 1.0 + p.r * dt;
        let mu0 = (0.1 + dt * p.mu0_f) / denom;
        let ld_star = (-0.015 + 0.013) / dt;
        let mu1 = (0.002 + dt * p.mu1_f + dt * ld_star * mu0) / denom;
        let lambda_expect =
            (load - p.a_xb * mu1 + p.a_xb * mu0 * lambda_k) / (mech.k_p + p.a_xb * mu0);

        coupler.step(&mut state, 0.0, load, dt).unwrap();
        assert!(
            (state.hist.lambda - lambda_expect).abs() < 1e-12,
            "{} vs {lambda_expect}",
            state.hist.lambda
        );
    }

    #[test]
    fn stationary_configuration_stays_put() {
        // model at its fixed point, load balancing the tension: nothing moves
        let model = minimal();
        let p = model.params;
        let mech = quasistatic(4.0e6);
        let ss = p.steady_state();
        let ta = p.a_xb * ss.mu1;
        let lambda0 = 0.02;
        let load = mech.k_p * lambda0 + ta;
        for scheme in [
            SchemeKind::Segregated,
            SchemeKind::StabilizedSegregated,
            SchemeKind::Monolithic,
        ] {
            let coupler = Coupler::new(&model, scheme, InnerStepper::Implicit, mech);
            let mut state = CoupledState::new(vec![ss.mu0, ss.mu1], lambda0);
            for _ in 0..5 {
                coupler.step(&mut state, 0.0, load, 1e-3).unwrap();
            }
            assert!(
                (state.hist.lambda - lambda0).abs() < 1e-10,
                "{:?} drifted to {}",
                scheme,
                state.hist.lambda
            );
        }
    }

    #[test]
    fn monolithic_step_satisfies_coupled_equations() {
        let model = minimal();
        let p = model.params;
        let mech = quasistatic(1.0e6);
        let coupler = Coupler::new(&model, SchemeKind::Monolithic, InnerStepper::Implicit, mech);
        let mut state = CoupledState::new(vec![0.02, 0.0005], 0.0);
        let dt = 1e-3;
        let load = 1.0e4;
        let (mu0_old, mu1_old) = (state.r[0], state.r[1]);
        let lambda_old = state.hist.lambda;
        coupler.step(&mut state, 0.0, load, dt).unwrap();
        let (mu0, mu1, lambda) = (state.r[0], state.r[1], state.hist.lambda);

        // the three discrete equations hold at the solution
        let res0 = (mu0 - mu0_old) / dt - (p.mu0_f - p.r * mu0);
        let res1 =
            (mu1 - mu1_old) / dt - (p.mu1_f - p.r * mu1 + (lambda - lambda_old) / dt * mu0);
        let res2 = lambda - (load - p.a_xb * mu1) / mech.k_p;
        assert!(res0.abs() <= 1e-10 * p.mu0_f, "res0 {res0}");
        assert!(res1.abs() <= 1e-8, "res1 {res1}");
        assert!(res2.abs() <= 1e-10, "res2 {res2}");
    }

    #[test]
    fn fractional_matches_stabilized_with_constant_mu0() {
        // with the attached fraction at its steady state the two schemes
        // produce the same strain sequence and mu1 = mu1_star
        let model = minimal();
        let p = model.params;
        let mech = quasistatic(1.0e6);
        let stab = Coupler::new(
            &model,
            SchemeKind::StabilizedSegregated,
            InnerStepper::Implicit,
            mech,
        );
        let frac = Coupler::new(
            &model,
            SchemeKind::FractionalStep,
            InnerStepper::Implicit,
            mech,
        );
        let mu0_ss = p.mu0_f / p.r;
        let mut s1 = CoupledState::new(vec![mu0_ss, 0.0], 0.0);
        let mut s2 = CoupledState::new(vec![mu0_ss, 0.0], 0.0);
        for _ in 0..1000 {
            stab.step(&mut s1, 0.0, 0.0, 1e-3).unwrap();
            frac.step(&mut s2, 0.0, 0.0, 1e-3).unwrap();
            assert!(
                (s1.hist.lambda - s2.hist.lambda).abs() <= 1e-12,
                "{} vs {}",
                s1.hist.lambda,
                s2.hist.lambda
            );
            let aux = s2.fractional.unwrap();
            assert!((s1.r[1] - aux.mu1_star).abs() <= 1e-12);
            // split-variable identity: mu1_tilde - mu1 = (l_k - l_km1) mu0
            let expect = (s2.hist.lambda - s2.hist.lambda_prev) * mu0_ss;
            assert!((aux.mu1_tilde - aux.mu1_star - expect).abs() <= 1e-14);
        }
    }

    #[test]
    fn simulate_records_uniform_grid_and_substep_reduces() {
        let model = minimal();
        let cfg = RunConfig {
            model: "MDM".into(),
            scheme: SchemeKind::StabilizedSegregated,
            stepper: None,
            dt: 1e-3,
            t_end: 0.05,
            substep: 1,
            calcium: CalciumProgram::Constant { value: 0.0 },
            load: LoadProgram::Constant { value: 0.0 },
            mech: quasistatic(1.0e6),
            initial: InitialPolicy::Default,
        };
        let out = simulate(&model, &cfg).unwrap();
        assert!(out.succeeded());
        assert_eq!(out.trajectory.len(), 51);
        for (k, t) in out.trajectory.t.iter().enumerate() {
            assert_eq!(*t, k as f64 * 1e-3, "grid must be index-based");
        }

        // m = 1 equals explicit plain stepping of the same scheme
        let coupler = Coupler::new(
            &model,
            SchemeKind::StabilizedSegregated,
            InnerStepper::Implicit,
            cfg.mech,
        );
        let mut state = CoupledState::new(model.initial_state(), 0.0);
        for k in 0..50 {
            let t_next = (k + 1) as f64 * 1e-3;
            coupler.step(&mut state, 0.0, 0.0, 1e-3).unwrap();
            assert_eq!(out.trajectory.lambda[k + 1], state.hist.lambda, "step {t_next}");
        }
    }

    #[test]
    fn substepped_run_solves_mechanics_every_mth_step() {
        let model = minimal();
        let cfg = RunConfig {
            model: "MDM".into(),
            scheme: SchemeKind::StabilizedSegregated,
            stepper: None,
            dt: 5e-4,
            t_end: 0.02,
            substep: 2,
            calcium: CalciumProgram::Constant { value: 0.0 },
            load: LoadProgram::Constant { value: 0.0 },
            mech: quasistatic(1.0e6),
            initial: InitialPolicy::Default,
        };
        let out = simulate(&model, &cfg).unwrap();
        assert!(out.succeeded());
        let lam = &out.trajectory.lambda;
        // strain only changes on even steps
        for k in (1..lam.len()).step_by(2) {
            assert_eq!(lam[k], lam[k - 1], "strain must hold between mech solves");
        }
        assert!(lam.last().unwrap().abs() > 0.0);
    }

    #[test]
    fn fractional_scheme_requires_minimal_model() {
        let model = crate::models::build_model("NHS06", None).unwrap();
        let cfg = RunConfig {
            model: "NHS06".into(),
            scheme: SchemeKind::FractionalStep,
            stepper: None,
            dt: 1e-3,
            t_end: 0.01,
            substep: 1,
            calcium: CalciumProgram::Constant { value: 0.1 },
            load: LoadProgram::Constant { value: 0.0 },
            mech: quasistatic(1.0e6),
            initial: InitialPolicy::Default,
        };
        assert!(simulate(model.as_ref(), &cfg).is_err());
    }

    #[test]
    fn zero_activation_keeps_passive_equilibrium() {
        // NHS06 with no calcium generates no force; the strain stays at the
        // passive equilibrium under zero load
        let model = crate::models::build_model("NHS06", None).unwrap();
        let mut cfg = RunConfig {
            model: "NHS06".into(),
            scheme: SchemeKind::StabilizedSegregated,
            stepper: None,
            dt: 1e-3,
            t_end: 0.1,
            substep: 1,
            calcium: CalciumProgram::Constant { value: 0.0 },
            load: LoadProgram::Constant { value: 0.0 },
            mech: quasistatic(1.0e6),
            initial: InitialPolicy::Explicit {
                state: vec![0.0, 0.0, 0.0, 0.0, 0.0],
                lambda: 0.0,
            },
        };
        cfg.mech.potential = Potential::Log;
        let out = simulate(model.as_ref(), &cfg).unwrap();
        assert!(out.succeeded());
        for l in &out.trajectory.lambda {
            assert!(l.abs() < 1e-10, "lambda drifted to {l}");
        }
    }

    #[test]
    fn pre_relaxation_reaches_stationary_state() {
        let model = minimal();
        let cfg = RunConfig {
            model: "MDM".into(),
            scheme: SchemeKind::StabilizedSegregated,
            stepper: None,
            dt: 1e-3,
            t_end: 0.01,
            substep: 1,
            calcium: CalciumProgram::Constant { value: 0.5 },
            load: LoadProgram::Constant { value: 1.0e5 },
            mech: quasistatic(1.0e6),
            initial: InitialPolicy::PreRelax,
        };
        let out = simulate(&model, &cfg).unwrap();
        assert!(out.succeeded());
        assert!(out.stats.pre_relax_steps > 0);
        // the relaxed run starts in equilibrium and stays there; the residual
        // drift is bounded by the per-step tolerance amplified by the slowest
        // contraction factor of the scheme
        let l0 = out.trajectory.lambda[0];
        for l in &out.trajectory.lambda {
            assert!((l - l0).abs() < 1e-7, "relaxed run moved from {l0} to {l}");
        }
        // equilibrium satisfies k_p*lambda + a_xb*mu1_ss = p
        let p = model.params;
        let expect = (1.0e5 - p.a_xb * p.mu1_f / p.r) / 1.0e6;
        assert!((l0 - expect).abs() < 1e-6, "{l0} vs {expect}");
    }
}
