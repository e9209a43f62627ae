//! Force-generation model contract and the minimal distribution-moments model.
//!
//! A force model evolves a state vector `r` driven by intracellular calcium,
//! the fiber strain `lambda` and the strain rate `lambda_dot`, and exposes the
//! active tension `T_a = g(r, lambda)` together with the active stiffness
//! `K_a = q(r, lambda)`. The active stiffness is the sensitivity of the
//! tension rate to the strain rate and is what the stabilized coupling scheme
//! injects into the mechanics solve.
//!
//! The minimal model tracks the two lowest distribution-moments of the
//! crossbridge attachment density: `mu0` (attached fraction) and `mu1`
//! (attachment-weighted mean elongation), with tension `a_xb * mu1` and
//! stiffness `a_xb * mu0`.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Parameters of the minimal distribution-moments model.
///
/// Defaults follow the calibration of Regazzoni, Dede' & Quarteroni (2020),
/// fitted to isometric force, attached fraction, maximum shortening velocity
/// and fast-transient stiffness data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinimalModelParams {
    /// Zero-order moment of the attachment-rate function (1/s).
    pub mu0_f: f64,
    /// First-order moment of the attachment-rate function (1/s).
    pub mu1_f: f64,
    /// Total attachment-detachment rate (1/s).
    pub r: f64,
    /// Crossbridge stiffness upscaled to the tissue level (Pa).
    pub a_xb: f64,
}

impl Default for MinimalModelParams {
    fn default() -> Self {
        Self {
            mu0_f: 114.4,
            mu1_f: 1.76,
            r: 520.0,
            a_xb: 17.727e6,
        }
    }
}

impl MinimalModelParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("mu0_f", self.mu0_f),
            ("mu1_f", self.mu1_f),
            ("r", self.r),
            ("a_xb", self.a_xb),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!(
                    "minimal model parameter {name} must be strictly positive, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Isometric steady state `(mu0_f/r, mu1_f/r)`.
    pub fn steady_state(&self) -> MomentPair {
        MomentPair {
            mu0: self.mu0_f / self.r,
            mu1: self.mu1_f / self.r,
        }
    }
}

/// Eulerian distribution-moments `(mu0, mu1)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MomentPair {
    pub mu0: f64,
    pub mu1: f64,
}

/// Lagrangian (reference-frame) moments; `mu2_hat` is carried only when the
/// elastic energy is needed.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LagrangianMoments {
    pub mu0_hat: f64,
    pub mu1_hat: f64,
    pub mu2_hat: Option<f64>,
}

/// Tension/stiffness pair produced by a force model (Pa).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActiveOutputs {
    pub tension: f64,
    pub stiffness: f64,
}

/// Time derivative of the minimal model:
/// `d(mu0)/dt = mu0_f - r*mu0`, `d(mu1)/dt = mu1_f - r*mu1 + lambda_dot*mu0`.
pub fn minimal_rhs(state: MomentPair, lambda_dot: f64, p: &MinimalModelParams) -> MomentPair {
    MomentPair {
        mu0: p.mu0_f - p.r * state.mu0,
        mu1: p.mu1_f - p.r * state.mu1 + lambda_dot * state.mu0,
    }
}

/// One implicit-Euler step of the minimal model with frozen strain rate.
///
/// The linear system is triangular: `mu0` first, then `mu1` using the
/// updated `mu0`.
pub fn minimal_step_implicit(
    state: MomentPair,
    lambda_dot_star: f64,
    dt: f64,
    p: &MinimalModelParams,
) -> MomentPair {
    let denom = 1.0 + p.r * dt;
    let mu0 = (state.mu0 + p.mu0_f * dt) / denom;
    let mu1 = (state.mu1 + p.mu1_f * dt + dt * lambda_dot_star * mu0) / denom;
    MomentPair { mu0, mu1 }
}

/// Active tension of the minimal model (Pa).
pub fn active_tension_minimal(mu1: f64, a_xb: f64) -> f64 {
    a_xb * mu1
}

/// Active stiffness of the minimal model (Pa): total stiffness of attached
/// crossbridges at the tissue level.
pub fn active_stiffness_minimal(mu0: f64, a_xb: f64) -> f64 {
    a_xb * mu0
}

/// Eulerian -> Lagrangian moment change at strain `lambda`.
///
/// `mu2` is mapped when provided: `mu2_hat = mu2 - 2*lambda*mu1 + lambda^2*mu0`.
pub fn to_lagrangian(mu: MomentPair, mu2: Option<f64>, lambda: f64) -> LagrangianMoments {
    LagrangianMoments {
        mu0_hat: mu.mu0,
        mu1_hat: mu.mu1 - lambda * mu.mu0,
        mu2_hat: mu2.map(|m2| m2 - 2.0 * lambda * mu.mu1 + lambda * lambda * mu.mu0),
    }
}

/// Lagrangian -> Eulerian moment change at strain `lambda`; returns the
/// moment pair and `mu2` when `mu2_hat` is present.
pub fn to_eulerian(hat: &LagrangianMoments, lambda: f64) -> (MomentPair, Option<f64>) {
    let mu0 = hat.mu0_hat;
    let mu1 = lambda * hat.mu0_hat + hat.mu1_hat;
    let mu2 = hat
        .mu2_hat
        .map(|m2| lambda * lambda * hat.mu0_hat + 2.0 * lambda * hat.mu1_hat + m2);
    (MomentPair { mu0, mu1 }, mu2)
}

/// Elastic energy density of attached crossbridges (Pa), fully Lagrangian:
/// `W_act = a_xb/2 * (mu0_hat*lambda^2 + 2*mu1_hat*lambda + mu2_hat)`.
pub fn active_energy(hat: &LagrangianMoments, lambda: f64, a_xb: f64) -> Result<f64> {
    let mu2_hat = hat
        .mu2_hat
        .ok_or_else(|| Error::InvalidInput("active_energy requires mu2_hat".into()))?;
    Ok(0.5 * a_xb * (hat.mu0_hat * lambda * lambda + 2.0 * hat.mu1_hat * lambda + mu2_hat))
}

/// Kind of time discretization a model uses for its internal step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InnerStepper {
    /// Backward Euler on the full state (Newton when nonlinear).
    Implicit,
    /// Implicit-explicit split: selected couplings frozen at the old state so
    /// the update is linear.
    SemiImplicit,
}

/// Iteration diagnostics of one inner step.
#[derive(Debug, Clone, Copy, Default)]
pub struct StepStats {
    pub iterations: usize,
    pub residual: f64,
}

/// Contract every force-generation model implements.
///
/// State vectors are plain slices; each model documents its layout. All
/// methods are pure with respect to `&self`, so one parameter object can
/// serve any number of concurrent simulations.
pub trait ForceModel: Send + Sync {
    /// Registry identifier (e.g. "MDM", "NHS06").
    fn id(&self) -> &'static str;

    /// Number of state variables.
    fn dim(&self) -> usize;

    /// Default initial state (relaxed tissue).
    fn initial_state(&self) -> Vec<f64>;

    /// Time derivative `h(r, ca, lambda, lambda_dot)` written into `out`.
    fn rhs(&self, r: &[f64], ca: f64, lambda: f64, lambda_dot: f64, out: &mut [f64])
        -> Result<()>;

    /// Active tension `g(r, lambda)` in Pa.
    fn tension(&self, r: &[f64], lambda: f64) -> Result<f64>;

    /// Analytic active stiffness `q(r, lambda)` in Pa.
    fn stiffness(&self, r: &[f64], lambda: f64) -> Result<f64>;

    /// Steppers this model supports; the first entry is the default.
    fn steppers(&self) -> &'static [InnerStepper];

    /// Residual of one inner step,
    /// `out = r_new - r_old - dt * h_hat(r_old, r_new, ca, lambda, lambda_dot)`,
    /// where `h_hat` realizes the model's stepper split and satisfies the
    /// consistency condition `h_hat(r, r, ...) = h(r, ...)`.
    fn step_residual(
        &self,
        stepper: InnerStepper,
        r_old: &[f64],
        r_new: &[f64],
        ca: f64,
        lambda: f64,
        lambda_dot: f64,
        dt: f64,
        out: &mut [f64],
    ) -> Result<()>;

    /// Advance the state by one inner step with frozen `(lambda, lambda_dot)`.
    ///
    /// Default implementation Newton-solves `step_residual = 0` with a
    /// forward-difference Jacobian. Models with closed-form or linear updates
    /// override it.
    fn inner_step(
        &self,
        stepper: InnerStepper,
        r: &mut [f64],
        ca: f64,
        lambda: f64,
        lambda_dot: f64,
        dt: f64,
    ) -> Result<StepStats> {
        let old = r.to_vec();
        let residual = |x: &[f64], out: &mut [f64]| {
            self.step_residual(stepper, &old, x, ca, lambda, lambda_dot, dt, out)
        };
        let (solution, stats) = newton_solve("inner step", residual, r)?;
        r.copy_from_slice(&solution);
        Ok(stats)
    }

    /// Minimal-model parameters when this is the minimal model (used by the
    /// fractional-step coupling, which is defined only for it).
    fn minimal_params(&self) -> Option<&MinimalModelParams> {
        None
    }
}

/// Newton tolerance settings used for inner steps and the coupled solve.
pub(crate) const NEWTON_MAX_ITERS: usize = 50;
pub(crate) const NEWTON_REL_TOL: f64 = 1e-10;
pub(crate) const NEWTON_ABS_TOL: f64 = 1e-12;

/// Newton solve of `residual(x) = 0` starting at `x0`, forward-difference
/// Jacobian with per-variable scaling, no line search.
pub(crate) fn newton_solve<F>(
    label: &'static str,
    residual: F,
    x0: &[f64],
) -> Result<(Vec<f64>, StepStats)>
where
    F: Fn(&[f64], &mut [f64]) -> Result<()>,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut f = vec![0.0; n];
    let mut f_pert = vec![0.0; n];
    let mut jac = vec![0.0; n * n];
    residual(&x, &mut f)?;
    let norm0 = f.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(NEWTON_ABS_TOL);
    for iter in 0..NEWTON_MAX_ITERS {
        let norm = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !norm.is_finite() {
            return Err(Error::NonFinite("newton residual"));
        }
        if norm <= NEWTON_ABS_TOL.max(NEWTON_REL_TOL * norm0) {
            return Ok((
                x,
                StepStats {
                    iterations: iter,
                    residual: norm,
                },
            ));
        }
        for j in 0..n {
            let h = 1e-7 * x[j].abs() + 1e-9;
            let saved = x[j];
            x[j] = saved + h;
            residual(&x, &mut f_pert)?;
            x[j] = saved;
            let inv_h = 1.0 / h;
            for i in 0..n {
                jac[i * n + j] = (f_pert[i] - f[i]) * inv_h;
            }
        }
        let mut step = f.clone();
        crate::linalg::lu_solve_in_place(&mut jac, n, &mut step).map_err(|_| {
            Error::NonConvergence {
                solver: label,
                iterations: iter,
                residual: norm,
            }
        })?;
        for i in 0..n {
            x[i] -= step[i];
        }
        residual(&x, &mut f)?;
    }
    let norm = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Err(Error::NonConvergence {
        solver: label,
        iterations: NEWTON_MAX_ITERS,
        residual: norm,
    })
}

/// The minimal distribution-moments model behind the [`ForceModel`] contract.
///
/// State layout: `[mu0, mu1]`.
#[derive(Debug, Clone, Default)]
pub struct MinimalModel {
    pub params: MinimalModelParams,
}

impl MinimalModel {
    pub fn new(params: MinimalModelParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { params })
    }
}

impl ForceModel for MinimalModel {
    fn id(&self) -> &'static str {
        "MDM"
    }

    fn dim(&self) -> usize {
        2
    }

    fn initial_state(&self) -> Vec<f64> {
        // fully detached tissue
        vec![0.0, 0.0]
    }

    fn rhs(&self, r: &[f64], _ca: f64, _lambda: f64, lambda_dot: f64, out: &mut [f64]) -> Result<()> {
        let d = minimal_rhs(
            MomentPair {
                mu0: r[0],
                mu1: r[1],
            },
            lambda_dot,
            &self.params,
        );
        out[0] = d.mu0;
        out[1] = d.mu1;
        Ok(())
    }

    fn tension(&self, r: &[f64], _lambda: f64) -> Result<f64> {
        Ok(active_tension_minimal(r[1], self.params.a_xb))
    }

    fn stiffness(&self, r: &[f64], _lambda: f64) -> Result<f64> {
        Ok(active_stiffness_minimal(r[0], self.params.a_xb))
    }

    fn steppers(&self) -> &'static [InnerStepper] {
        &[InnerStepper::Implicit]
    }

    fn step_residual(
        &self,
        _stepper: InnerStepper,
        r_old: &[f64],
        r_new: &[f64],
        _ca: f64,
        _lambda: f64,
        lambda_dot: f64,
        dt: f64,
        out: &mut [f64],
    ) -> Result<()> {
        let p = &self.params;
        out[0] = r_new[0] - r_old[0] - dt * (p.mu0_f - p.r * r_new[0]);
        out[1] = r_new[1] - r_old[1] - dt * (p.mu1_f - p.r * r_new[1] + lambda_dot * r_new[0]);
        Ok(())
    }

    fn inner_step(
        &self,
        _stepper: InnerStepper,
        r: &mut [f64],
        _ca: f64,
        _lambda: f64,
        lambda_dot: f64,
        dt: f64,
    ) -> Result<StepStats> {
        let next = minimal_step_implicit(
            MomentPair {
                mu0: r[0],
                mu1: r[1],
            },
            lambda_dot,
            dt,
            &self.params,
        );
        r[0] = next.mu0;
        r[1] = next.mu1;
        Ok(StepStats {
            iterations: 0,
            residual: 0.0,
        })
    }

    fn minimal_params(&self) -> Option<&MinimalModelParams> {
        Some(&self.params)
    }
}

/// Relative finite-difference step used by the stiffness oracle.
pub const STIFFNESS_FD_DELTA: f64 = 1e-6;

/// Finite-difference evaluation of the active stiffness
/// `K_a = grad_r(g) . dh/d(lambda_dot)` by central differences.
///
/// This is the generic definition valid for any model of the contract and
/// serves as the independent oracle for every analytic stiffness formula.
pub fn stiffness_fd(
    model: &dyn ForceModel,
    r: &[f64],
    ca: f64,
    lambda: f64,
    lambda_dot: f64,
    delta: f64,
) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::InvalidInput("delta must be positive".into()));
    }
    let n = model.dim();
    let mut plus = vec![0.0; n];
    let mut minus = vec![0.0; n];
    // dh/d(lambda_dot)
    let dv = delta.max(delta * lambda_dot.abs());
    model.rhs(r, ca, lambda, lambda_dot + dv, &mut plus)?;
    model.rhs(r, ca, lambda, lambda_dot - dv, &mut minus)?;
    let mut acc = 0.0;
    let mut state = r.to_vec();
    for i in 0..n {
        let dh = (plus[i] - minus[i]) / (2.0 * dv);
        if dh == 0.0 {
            continue;
        }
        let dr = delta * state[i].abs().max(1.0);
        let saved = state[i];
        state[i] = saved + dr;
        let gp = model.tension(&state, lambda)?;
        state[i] = saved - dr;
        let gm = model.tension(&state, lambda)?;
        state[i] = saved;
        let dg = (gp - gm) / (2.0 * dr);
        acc += dg * dh;
    }
    if !acc.is_finite() {
        return Err(Error::NonFinite("stiffness_fd"));
    }
    Ok(acc)
}

/// Variant of [`stiffness_fd`] including the explicit strain sensitivity
/// `dg/d(lambda)` of models whose tension depends on `lambda` directly.
pub fn stiffness_fd_with_strain_term(
    model: &dyn ForceModel,
    r: &[f64],
    ca: f64,
    lambda: f64,
    lambda_dot: f64,
    delta: f64,
) -> Result<f64> {
    let base = stiffness_fd(model, r, ca, lambda, lambda_dot, delta)?;
    let dl = delta * lambda.abs().max(1.0);
    let gp = model.tension(r, lambda + dl)?;
    let gm = model.tension(r, lambda - dl)?;
    let extra = (gp - gm) / (2.0 * dl);
    let total = base + extra;
    if !total.is_finite() {
        return Err(Error::NonFinite("stiffness_fd_with_strain_term"));
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: f64 = 1e-12;

    fn params() -> MinimalModelParams {
        MinimalModelParams::default()
    }

    #[test]
    fn rhs_vanishes_at_isometric_steady_state() {
        let p = params();
        let d = minimal_rhs(p.steady_state(), 0.0, &p);
        assert!(d.mu0.abs() < TOL && d.mu1.abs() < TOL);
    }

    #[test]
    fn rhs_from_detached_state_matches_calibration() {
        let p = params();
        let d = minimal_rhs(MomentPair { mu0: 0.0, mu1: 0.0 }, 0.0, &p);
        assert_eq!(d.mu0, 114.4);
        assert_eq!(d.mu1, 1.76);
    }

    #[test]
    fn rhs_vanishes_at_constant_velocity_steady_state() {
        let p = params();
        for lambda_dot in [-1.5, 0.0, 0.7, 3.0] {
            let state = MomentPair {
                mu0: p.mu0_f / p.r,
                mu1: p.mu1_f / p.r + p.mu0_f / (p.r * p.r) * lambda_dot,
            };
            let d = minimal_rhs(state, lambda_dot, &p);
            assert!(d.mu0.abs() < 1e-10, "mu0 rate {}", d.mu0);
            assert!(d.mu1.abs() < 1e-10, "mu1 rate {}", d.mu1);
        }
    }

    #[test]
    fn implicit_step_fixed_point_and_closed_form() {
        let p = params();
        let ss = p.steady_state();
        let next = minimal_step_implicit(ss, 0.0, 1e-3, &p);
        assert!((next.mu0 - ss.mu0).abs() < TOL);
        assert!((next.mu1 - ss.mu1).abs() < TOL);

        // hand evaluation of the update from the detached state
        let next = minimal_step_implicit(MomentPair { mu0: 0.0, mu1: 0.0 }, 0.0, 1e-3, &p);
        let expect = 0.1144 / 1.52;
        assert!((next.mu0 - expect).abs() < 1e-15, "{} vs {expect}", next.mu0);
    }

    #[test]
    fn implicit_step_large_dt_limit() {
        let p = params();
        let next = minimal_step_implicit(MomentPair { mu0: 0.0, mu1: 0.0 }, 0.0, 1e12, &p);
        let ss = p.steady_state();
        assert!((next.mu0 - ss.mu0).abs() < 1e-9);
        assert!((next.mu1 - ss.mu1).abs() < 1e-9);
    }

    #[test]
    fn tension_and_stiffness_values() {
        let p = params();
        assert_eq!(active_tension_minimal(0.0, p.a_xb), 0.0);
        assert_eq!(active_tension_minimal(1.0, 17.727e6), 17.727e6);
        let iso = active_tension_minimal(p.mu1_f / p.r, p.a_xb);
        assert!((iso - 60.0e3).abs() <= 0.001 * 60.0e3, "isometric {iso}");

        assert_eq!(active_stiffness_minimal(0.0, p.a_xb), 0.0);
        assert_eq!(active_stiffness_minimal(1.0, p.a_xb), p.a_xb);
        let ka = active_stiffness_minimal(p.mu0_f / p.r, p.a_xb);
        assert!((ka - 3.9e6).abs() <= 0.001 * 3.9e6, "isometric stiffness {ka}");
    }

    #[test]
    fn frame_changes_are_inverse_and_match_hand_values() {
        let mu = MomentPair { mu0: 0.2, mu1: 0.05 };
        let hat = to_lagrangian(mu, None, 0.1);
        assert!((hat.mu1_hat - 0.03).abs() < TOL);
        let (back, _) = to_eulerian(&hat, 0.1);
        assert!((back.mu0 - mu.mu0).abs() < TOL && (back.mu1 - mu.mu1).abs() < TOL);

        // identity at lambda = 0
        let hat0 = to_lagrangian(mu, Some(0.4), 0.0);
        assert_eq!(hat0.mu1_hat, mu.mu1);
        assert_eq!(hat0.mu2_hat, Some(0.4));

        // mu2 reconstruction from hat moments
        let hat = LagrangianMoments {
            mu0_hat: 0.2,
            mu1_hat: 0.03,
            mu2_hat: Some(0.01),
        };
        let (_, mu2) = to_eulerian(&hat, 0.1);
        assert!((mu2.unwrap() - 0.018).abs() < TOL);
    }

    #[test]
    fn energy_matches_eulerian_mu2_and_gradient() {
        let a_xb = 17.727e6;
        let hat = LagrangianMoments {
            mu0_hat: 0.15,
            mu1_hat: -0.02,
            mu2_hat: Some(0.05),
        };
        for lambda in [-0.2, 0.0, 0.1, 0.3] {
            let w = active_energy(&hat, lambda, a_xb).unwrap();
            let (_, mu2) = to_eulerian(&hat, lambda);
            assert!((w - 0.5 * a_xb * mu2.unwrap()).abs() < 1e-6 * w.abs().max(1.0));

            // finite-difference gradient in lambda at fixed hat moments
            let d = 1e-6;
            let wp = active_energy(&hat, lambda + d, a_xb).unwrap();
            let wm = active_energy(&hat, lambda - d, a_xb).unwrap();
            let grad_fd = (wp - wm) / (2.0 * d);
            let grad = a_xb * (hat.mu0_hat * lambda + hat.mu1_hat);
            assert!(
                (grad_fd - grad).abs() <= 1e-4 + 1e-8 * grad.abs(),
                "lambda={lambda}: {grad_fd} vs {grad}"
            );
        }
        // all-zero moments carry no energy
        let zero = LagrangianMoments {
            mu0_hat: 0.0,
            mu1_hat: 0.0,
            mu2_hat: Some(0.0),
        };
        assert_eq!(active_energy(&zero, 0.3, a_xb).unwrap(), 0.0);
    }

    #[test]
    fn tension_formulations_agree() {
        // a_xb*mu1 equals a_xb*(mu1_hat + mu0_hat*lambda) identically
        let a_xb = 17.727e6;
        for (mu0, mu1, lambda) in [(0.1, 0.002, -0.3), (0.22, 0.0034, 0.15), (0.0, 0.0, 0.4)] {
            let mu = MomentPair { mu0, mu1 };
            let hat = to_lagrangian(mu, None, lambda);
            let f1 = active_tension_minimal(mu.mu1, a_xb);
            let f2 = a_xb * (hat.mu1_hat + hat.mu0_hat * lambda);
            assert!((f1 - f2).abs() <= 1e-9 * f1.abs().max(1.0));
        }
    }

    #[test]
    fn stiffness_fd_matches_minimal_analytic() {
        let model = MinimalModel::default();
        let p = model.params;
        for (mu0, mu1, ld) in [(0.05, 0.001, 0.0), (0.22, 0.0034, -1.2), (0.15, -0.01, 2.0)] {
            let fd = stiffness_fd(&model, &[mu0, mu1], 0.0, 0.0, ld, STIFFNESS_FD_DELTA).unwrap();
            let analytic = active_stiffness_minimal(mu0, p.a_xb);
            assert!(
                (fd - analytic).abs() <= 1e-5 * analytic.abs().max(1.0),
                "fd {fd} vs analytic {analytic}"
            );
        }
    }

    #[test]
    fn stiffness_fd_zero_for_velocity_independent_rhs() {
        // a toy model whose rhs ignores lambda_dot must report zero stiffness
        struct Relaxation;
        impl ForceModel for Relaxation {
            fn id(&self) -> &'static str {
                "relaxation"
            }
            fn dim(&self) -> usize {
                1
            }
            fn initial_state(&self) -> Vec<f64> {
                vec![0.0]
            }
            fn rhs(&self, r: &[f64], _: f64, _: f64, _: f64, out: &mut [f64]) -> Result<()> {
                out[0] = 1.0 - r[0];
                Ok(())
            }
            fn tension(&self, r: &[f64], _: f64) -> Result<f64> {
                Ok(1e4 * r[0])
            }
            fn stiffness(&self, _: &[f64], _: f64) -> Result<f64> {
                Ok(0.0)
            }
            fn steppers(&self) -> &'static [InnerStepper] {
                &[InnerStepper::Implicit]
            }
            fn step_residual(
                &self,
                _: InnerStepper,
                r_old: &[f64],
                r_new: &[f64],
                _: f64,
                _: f64,
                _: f64,
                dt: f64,
                out: &mut [f64],
            ) -> Result<()> {
                out[0] = r_new[0] - r_old[0] - dt * (1.0 - r_new[0]);
                Ok(())
            }
        }
        let fd = stiffness_fd(&Relaxation, &[0.4], 0.0, 0.0, 0.5, STIFFNESS_FD_DELTA).unwrap();
        assert_eq!(fd, 0.0);
    }

    #[test]
    fn implicit_iterates_stay_in_admissible_interval() {
        let p = params();
        let upper = p.mu0_f / p.r;
        for start in [0.0, 0.5 * upper, upper] {
            let mut state = MomentPair { mu0: start, mu1: 0.0 };
            for _ in 0..200 {
                state = minimal_step_implicit(state, -3.0, 2e-3, &p);
                assert!(state.mu0 >= -1e-15 && state.mu0 <= upper + 1e-15);
            }
        }
    }
}
