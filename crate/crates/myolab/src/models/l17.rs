//! L17 distortion-decay force model (Land et al. 2017, human).
//!
//! Binding sites move between blocked (B), unblocked (U), weakly-bound (W)
//! and strongly-bound (S) groups; `U = 1 - B - W - S` is derived, never
//! integrated. Mean crossbridge distortions `zeta_w`, `zeta_s` respond
//! instantaneously to the strain rate and decay at fixed rates.
//!
//! State layout: `[ca_trpn, b, w, s, zeta_w, zeta_s]`.

use crate::activation::{ForceModel, InnerStepper, StepStats};
use crate::error::{Error, Result};
use crate::linalg::solve3;
use serde::{Deserialize, Serialize};

/// Floor applied to `ca_trpn` where it is raised to a negative power.
pub const CA_TRPN_FLOOR: f64 = 1e-12;

/// Parameters; defaults are the published human set with the transition
/// rates in their derived (fully resolved) form.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct L17Params {
    /// Troponin kinetic constant (1/s).
    pub k_trpn: f64,
    /// Troponin cooperativity.
    pub n_trpn: f64,
    /// Half-activating calcium at rest (uM).
    pub ca50_ref: f64,
    /// Length dependence of calcium sensitivity (uM per unit strain).
    pub beta_1: f64,
    /// U -> B rate coefficient (1/s).
    pub k_b: f64,
    /// B -> U rate coefficient (1/s).
    pub k_u: f64,
    /// U -> W rate (1/s).
    pub k_uw: f64,
    /// W -> U rate (1/s).
    pub k_wu: f64,
    /// W -> S rate (1/s).
    pub k_ws: f64,
    /// S -> U rate (1/s).
    pub k_su: f64,
    /// Tropomyosin cooperativity.
    pub n_tm: f64,
    /// Distortion-dependent W unbinding scale (1/s).
    pub gamma_w: f64,
    /// Distortion-dependent S unbinding scale (1/s).
    pub gamma_s: f64,
    /// Instantaneous distortion response of the W group.
    pub a_w: f64,
    /// Instantaneous distortion response of the S group.
    pub a_s: f64,
    /// W distortion decay rate (1/s).
    pub c_w: f64,
    /// S distortion decay rate (1/s).
    pub c_s: f64,
    /// Reference tension (Pa).
    pub t_ref: f64,
    /// Steady-state duty ratio.
    pub r_s: f64,
    /// Length dependence of the force-length relation.
    pub beta_0: f64,
}

impl Default for L17Params {
    fn default() -> Self {
        Self {
            k_trpn: 100.0,
            n_trpn: 2.0,
            ca50_ref: 0.805,
            beta_1: -2.4,
            k_b: 0.2941225,
            k_u: 21.0,
            k_uw: 182.0,
            k_wu: 170.0,
            k_ws: 12.0,
            k_su: 18.0,
            n_tm: 5.0,
            gamma_w: 615.0,
            gamma_s: 8.5,
            a_w: 10.0,
            a_s: 10.0,
            c_w: 405.86,
            c_s: 40.14,
            t_ref: 120.0e3,
            r_s: 0.25,
            beta_0: 2.3,
        }
    }
}

impl L17Params {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("k_trpn", self.k_trpn),
            ("ca50_ref", self.ca50_ref),
            ("k_b", self.k_b),
            ("k_u", self.k_u),
            ("k_uw", self.k_uw),
            ("k_wu", self.k_wu),
            ("k_ws", self.k_ws),
            ("k_su", self.k_su),
            ("gamma_w", self.gamma_w),
            ("gamma_s", self.gamma_s),
            ("c_w", self.c_w),
            ("c_s", self.c_s),
            ("t_ref", self.t_ref),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::Config(format!("L17 {name} must be positive, got {v}")));
            }
        }
        if !(self.r_s > 0.0 && self.r_s <= 1.0) {
            return Err(Error::Config(format!(
                "L17 r_s must lie in (0, 1], got {}",
                self.r_s
            )));
        }
        Ok(())
    }
}

pub const CA_TRPN: usize = 0;
pub const B: usize = 1;
pub const W: usize = 2;
pub const S: usize = 3;
pub const ZETA_W: usize = 4;
pub const ZETA_S: usize = 5;

/// L17 model instance.
#[derive(Debug, Clone)]
pub struct L17Model {
    pub params: L17Params,
}

impl L17Model {
    pub fn new(params: L17Params) -> Result<Self> {
        params.validate()?;
        Ok(Self { params })
    }

    /// Length-dependent half-activating calcium (uM), strain capped at 0.2.
    pub fn ca50(&self, lambda: f64) -> Result<f64> {
        let v = self.params.ca50_ref + self.params.beta_1 * lambda.min(0.2);
        if !(v > 0.0) {
            return Err(Error::Model(format!("L17 Ca50 <= 0 at lambda = {lambda}")));
        }
        Ok(v)
    }

    /// Distortion-dependent W unbinding rate `gamma_w |zeta_w|`.
    pub fn gamma_wu(&self, zeta_w: f64) -> f64 {
        self.params.gamma_w * zeta_w.abs()
    }

    /// Distortion-dependent S unbinding rate, piecewise in `1 + zeta_s`.
    pub fn gamma_su(&self, zeta_s: f64) -> f64 {
        let gs = self.params.gamma_s;
        if 1.0 + zeta_s < 0.0 {
            -gs * (1.0 + zeta_s)
        } else if 1.0 + zeta_s > 1.0 {
            gs * zeta_s
        } else {
            0.0
        }
    }

    /// Force-length factor `h(lambda) = max(0, h1(min(1 + lambda, 1.2)))`.
    pub fn h_of_lambda(&self, lambda: f64) -> f64 {
        self.h1((1.0 + lambda).min(1.2)).max(0.0)
    }

    /// `h1(psi) = 1 + beta_0 (psi + min(psi, 0.87) - 1.87)`.
    pub fn h1(&self, psi: f64) -> f64 {
        1.0 + self.params.beta_0 * (psi + psi.min(0.87) - 1.87)
    }

    fn rhs_guarded(
        &self,
        r: &[f64],
        ca: f64,
        lambda: f64,
        lambda_dot: f64,
        floor_ca_trpn: bool,
        out: &mut [f64],
    ) -> Result<()> {
        let p = &self.params;
        let c = if floor_ca_trpn {
            r[CA_TRPN].max(CA_TRPN_FLOOR)
        } else {
            if r[CA_TRPN] <= CA_TRPN_FLOOR {
                return Err(Error::Model(format!(
                    "L17 ca_trpn = {} at or below floor {CA_TRPN_FLOOR}",
                    r[CA_TRPN]
                )));
            }
            r[CA_TRPN]
        };
        let ca50 = self.ca50(lambda)?;
        out[CA_TRPN] =
            p.k_trpn * ((ca / ca50).powf(p.n_trpn) * (1.0 - r[CA_TRPN]) - r[CA_TRPN]);
        let u = 1.0 - r[B] - r[S] - r[W];
        out[B] = p.k_b * c.powf(-p.n_tm / 2.0) * u - p.k_u * c.powf(p.n_tm / 2.0) * r[B];
        out[W] = p.k_uw * u - (p.k_wu + self.gamma_wu(r[ZETA_W]) + p.k_ws) * r[W];
        out[S] = p.k_ws * r[W] - (p.k_su + self.gamma_su(r[ZETA_S])) * r[S];
        out[ZETA_W] = p.a_w * lambda_dot - p.c_w * r[ZETA_W];
        out[ZETA_S] = p.a_s * lambda_dot - p.c_s * r[ZETA_S];
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("L17 rhs"));
        }
        Ok(())
    }

    /// Semi-implicit update: troponin and distortions solved by their scalar
    /// implicit formulas, then (B, W, S) from a linear system with the group
    /// coefficients frozen at the old state.
    fn semi_implicit_step(
        &self,
        r: &mut [f64],
        ca: f64,
        lambda: f64,
        lambda_dot: f64,
        dt: f64,
    ) -> Result<StepStats> {
        let p = &self.params;
        let ca50 = self.ca50(lambda)?;
        let drive = (ca / ca50).powf(p.n_trpn);
        let ca_trpn_new = (r[CA_TRPN] + dt * p.k_trpn * drive) / (1.0 + dt * p.k_trpn * (drive + 1.0));
        let zeta_w_new = (r[ZETA_W] + dt * p.a_w * lambda_dot) / (1.0 + dt * p.c_w);
        let zeta_s_new = (r[ZETA_S] + dt * p.a_s * lambda_dot) / (1.0 + dt * p.c_s);

        // frozen coefficients from the old state
        let c_old = r[CA_TRPN].max(CA_TRPN_FLOOR);
        let kb_eff = p.k_b * c_old.powf(-p.n_tm / 2.0);
        let ku_eff = p.k_u * c_old.powf(p.n_tm / 2.0);
        let gw = self.gamma_wu(r[ZETA_W]);
        let gs = self.gamma_su(r[ZETA_S]);

        // implicit linear system in (B, W, S) with U = 1 - B - W - S
        let a = [
            [
                1.0 + dt * (kb_eff + ku_eff),
                dt * kb_eff,
                dt * kb_eff,
            ],
            [
                dt * p.k_uw,
                1.0 + dt * (p.k_uw + p.k_wu + gw + p.k_ws),
                dt * p.k_uw,
            ],
            [0.0, -dt * p.k_ws, 1.0 + dt * (p.k_su + gs)],
        ];
        let rhs = [r[B] + dt * kb_eff, r[W] + dt * p.k_uw, r[S]];
        let sol = solve3(&a, rhs)?;

        r[CA_TRPN] = ca_trpn_new;
        r[B] = sol[0];
        r[W] = sol[1];
        r[S] = sol[2];
        r[ZETA_W] = zeta_w_new;
        r[ZETA_S] = zeta_s_new;
        Ok(StepStats {
            iterations: 0,
            residual: 0.0,
        })
    }
}

impl ForceModel for L17Model {
    fn id(&self) -> &'static str {
        "L17"
    }

    fn dim(&self) -> usize {
        6
    }

    fn initial_state(&self) -> Vec<f64> {
        // troponin at its diastolic equilibrium, everything blocked
        let p = &self.params;
        let ca_rest: f64 = 0.1;
        let drive = (ca_rest / p.ca50_ref).powf(p.n_trpn);
        let ca_trpn0 = drive / (1.0 + drive);
        vec![ca_trpn0, 1.0, 0.0, 0.0, 0.0, 0.0]
    }

    fn rhs(&self, r: &[f64], ca: f64, lambda: f64, lambda_dot: f64, out: &mut [f64]) -> Result<()> {
        self.rhs_guarded(r, ca, lambda, lambda_dot, false, out)
    }

    fn tension(&self, r: &[f64], lambda: f64) -> Result<f64> {
        let p = &self.params;
        let t = self.h_of_lambda(lambda) * p.t_ref / p.r_s
            * ((1.0 + r[ZETA_S]) * r[S] + r[ZETA_W] * r[W]);
        if !t.is_finite() {
            return Err(Error::NonFinite("L17 tension"));
        }
        Ok(t)
    }

    fn stiffness(&self, r: &[f64], lambda: f64) -> Result<f64> {
        let p = &self.params;
        Ok(self.h_of_lambda(lambda) * p.t_ref / p.r_s * (p.a_s * r[S] + p.a_w * r[W]))
    }

    fn steppers(&self) -> &'static [InnerStepper] {
        &[InnerStepper::Implicit, InnerStepper::SemiImplicit]
    }

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
    ) -> Result<()> {
        match stepper {
            InnerStepper::Implicit => {
                // floored fractional power keeps Newton iterates evaluable
                self.rhs_guarded(r_new, ca, lambda, lambda_dot, true, out)?;
                for i in 0..6 {
                    out[i] = r_new[i] - r_old[i] - dt * out[i];
                }
                Ok(())
            }
            InnerStepper::SemiImplicit => {
                let p = &self.params;
                let ca50 = self.ca50(lambda)?;
                let drive = (ca / ca50).powf(p.n_trpn);
                let c_old = r_old[CA_TRPN].max(CA_TRPN_FLOOR);
                let kb_eff = p.k_b * c_old.powf(-p.n_tm / 2.0);
                let ku_eff = p.k_u * c_old.powf(p.n_tm / 2.0);
                let gw = self.gamma_wu(r_old[ZETA_W]);
                let gs = self.gamma_su(r_old[ZETA_S]);
                let u_new = 1.0 - r_new[B] - r_new[S] - r_new[W];
                out[CA_TRPN] = r_new[CA_TRPN]
                    - r_old[CA_TRPN]
                    - dt * p.k_trpn * (drive * (1.0 - r_new[CA_TRPN]) - r_new[CA_TRPN]);
                out[B] = r_new[B] - r_old[B] - dt * (kb_eff * u_new - ku_eff * r_new[B]);
                out[W] = r_new[W]
                    - r_old[W]
                    - dt * (p.k_uw * u_new - (p.k_wu + gw + p.k_ws) * r_new[W]);
                out[S] = r_new[S] - r_old[S] - dt * (p.k_ws * r_new[W] - (p.k_su + gs) * r_new[S]);
                out[ZETA_W] =
                    r_new[ZETA_W] - r_old[ZETA_W] - dt * (p.a_w * lambda_dot - p.c_w * r_new[ZETA_W]);
                out[ZETA_S] =
                    r_new[ZETA_S] - r_old[ZETA_S] - dt * (p.a_s * lambda_dot - p.c_s * r_new[ZETA_S]);
                Ok(())
            }
        }
    }

    fn inner_step(
        &self,
        stepper: InnerStepper,
        r: &mut [f64],
        ca: f64,
        lambda: f64,
        lambda_dot: f64,
        dt: f64,
    ) -> Result<StepStats> {
        match stepper {
            InnerStepper::SemiImplicit => self.semi_implicit_step(r, ca, lambda, lambda_dot, dt),
            InnerStepper::Implicit => {
                let old = r.to_vec();
                let residual = |x: &[f64], out: &mut [f64]| {
                    self.step_residual(stepper, &old, x, ca, lambda, lambda_dot, dt, out)
                };
                let (solution, stats) = crate::activation::newton_solve("L17 inner step", residual, r)?;
                r.copy_from_slice(&solution);
                Ok(stats)
            }
        }
    }
}
