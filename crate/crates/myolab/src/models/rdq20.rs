//! RDQ20-MF mean-field force model (Regazzoni, Dede' & Quarteroni 2020).
//!
//! Thin-filament regulation is described by triplets of regulatory units:
//! `pi[alpha beta delta, eta]` is the probability that the three tropomyosin
//! units are in states `alpha, beta, delta` (non-permissive/permissive) and
//! the central troponin in state `eta` (calcium unbound/bound). The outer
//! units of a triplet flip at mean-field rates conditioned on the center;
//! the center flips at exact rates. Crossbridge cycling is carried by the
//! distribution-moments `mu^0, mu^1` of the permissive and non-permissive
//! populations.
//!
//! State layout: `[pi[0..16], mu_p0, mu_n0, mu_p1, mu_n1]` with
//! `pi` indexed by `alpha + 2*beta + 4*delta + 8*eta` (0 = N/U, 1 = P/B).
//!
//! The regulatory-unit transition-rate tables and the single-overlap ratio
//! are injectable; the shipped default is the cooperative law of the
//! original reference with file-backed constants.

use crate::activation::{ForceModel, InnerStepper, StepStats};
use crate::error::{Error, Result};
use crate::linalg::lu_solve_in_place;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

pub const N_PI: usize = 16;
pub const MU_P0: usize = 16;
pub const MU_N0: usize = 17;
pub const MU_P1: usize = 18;
pub const MU_N1: usize = 19;
pub const DIM: usize = 20;

/// Tropomyosin state of a regulatory unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TmState {
    NonPermissive,
    Permissive,
}

/// Troponin (calcium) state of a regulatory unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrpnState {
    Unbound,
    Bound,
}

#[inline]
pub fn pi_index(alpha: usize, beta: usize, delta: usize, eta: usize) -> usize {
    alpha + 2 * beta + 4 * delta + 8 * eta
}

/// Injectable regulatory-unit kinetics and filament-overlap geometry.
pub trait Rdq20RateLaw: Send + Sync {
    /// Tropomyosin flip rate away from `from`, given neighbor tropomyosin
    /// states and the unit's own troponin state (1/s).
    fn tm_flip_rate(&self, from: TmState, left: TmState, right: TmState, trpn: TrpnState) -> f64;

    /// Troponin flip rate away from `from`, given the unit's tropomyosin
    /// state, calcium (uM) and strain (1/s).
    fn ca_flip_rate(&self, from: TrpnState, tm: TmState, ca: f64, lambda: f64) -> f64;

    /// Single-overlap ratio in [0, 1] at strain `lambda`.
    fn chi_so(&self, lambda: f64) -> f64;
}

/// File-backed constants of the cooperative default rate law.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CooperativeLawParams {
    /// Calcium unbinding rate (1/s).
    pub k_off: f64,
    /// Base tropomyosin flip rate (1/s).
    pub k_basic: f64,
    /// Permissive bias of calcium-bound units.
    pub q_coop: f64,
    /// Calcium affinity increase of permissive units.
    pub mu_coop: f64,
    /// Nearest-neighbor cooperativity.
    pub gamma_coop: f64,
    /// Calcium dissociation constant at the reference length (uM).
    pub kd0: f64,
    /// Length sensitivity of the dissociation constant (uM per um).
    pub alpha_kd: f64,
    /// Slack sarcomere length (um).
    pub sl0: f64,
    /// Thin (actin) filament length (um).
    pub la: f64,
    /// Thick (myosin) filament length (um).
    pub lm: f64,
    /// Bare-zone length (um).
    pub lb: f64,
}

impl Default for CooperativeLawParams {
    fn default() -> Self {
        Self {
            k_off: 100.0,
            k_basic: 13.1,
            q_coop: 2.0,
            mu_coop: 10.0,
            gamma_coop: 12.0,
            kd0: 0.381,
            alpha_kd: -0.571,
            sl0: 2.2,
            la: 1.25,
            lm: 1.65,
            lb: 0.18,
        }
    }
}

/// Cooperative rate law: permissive transitions are promoted by bound
/// calcium (factor `q_coop`) and by permissive neighbors (`gamma_coop` per
/// neighbor); calcium unbinding slows by `mu_coop` on permissive units; the
/// dissociation constant varies linearly with sarcomere length.
#[derive(Debug, Clone)]
pub struct CooperativeRateLaw {
    pub params: CooperativeLawParams,
}

impl CooperativeRateLaw {
    pub fn new(params: CooperativeLawParams) -> Self {
        Self { params }
    }

    fn kd(&self, lambda: f64) -> f64 {
        let sl = self.params.sl0 * (1.0 + lambda);
        // linear extrapolation floored away from zero
        (self.params.kd0 - self.params.alpha_kd * (2.15 - sl)).max(0.01)
    }
}

impl Rdq20RateLaw for CooperativeRateLaw {
    fn tm_flip_rate(&self, from: TmState, left: TmState, right: TmState, trpn: TrpnState) -> f64 {
        let p = &self.params;
        let n_perm = (left == TmState::Permissive) as usize + (right == TmState::Permissive) as usize;
        match from {
            TmState::NonPermissive => {
                let ca_bias = if trpn == TrpnState::Bound { p.q_coop } else { 1.0 };
                p.k_basic * p.gamma_coop.powi(n_perm as i32) * ca_bias
            }
            TmState::Permissive => {
                let ca_bias = if trpn == TrpnState::Bound {
                    1.0 / p.mu_coop
                } else {
                    1.0
                };
                p.k_basic * p.gamma_coop.powi(2 - n_perm as i32) * ca_bias
            }
        }
    }

    fn ca_flip_rate(&self, from: TrpnState, tm: TmState, ca: f64, lambda: f64) -> f64 {
        let p = &self.params;
        match from {
            TrpnState::Unbound => p.k_off / self.kd(lambda) * ca,
            TrpnState::Bound => {
                if tm == TmState::Permissive {
                    p.k_off / p.mu_coop
                } else {
                    p.k_off
                }
            }
        }
    }

    fn chi_so(&self, lambda: f64) -> f64 {
        let p = &self.params;
        let sl = p.sl0 * (1.0 + lambda);
        let single = sl.min(p.lm) - (sl - 2.0 * p.la).max(p.lb);
        (single / (p.lm - p.lb)).clamp(0.0, 1.0)
    }
}

/// Crossbridge-cycling and upscaling parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rdq20Params {
    /// Total attachment-detachment rate in isometric conditions (1/s).
    pub r0: f64,
    /// Velocity-dependent detachment coefficient (dimensionless).
    pub alpha_vel: f64,
    /// Tissue-level crossbridge stiffness (Pa).
    pub a_xb: f64,
    /// Zero-order attachment-rate moment of permissive units (1/s).
    pub mu0_fp: f64,
    /// First-order attachment-rate moment of permissive units (1/s).
    pub mu1_fp: f64,
    /// Internal substep for the explicit regulatory-unit update (s).
    pub dt_ru: f64,
    /// Constants of the default cooperative rate law.
    pub law: CooperativeLawParams,
}

impl Default for Rdq20Params {
    fn default() -> Self {
        Self {
            r0: 134.31,
            alpha_vel: 25.184,
            a_xb: 22.894e6,
            mu0_fp: 32.653,
            mu1_fp: 0.778,
            dt_ru: 2.5e-5,
            law: CooperativeLawParams::default(),
        }
    }
}

impl Rdq20Params {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("r0", self.r0),
            ("a_xb", self.a_xb),
            ("mu0_fp", self.mu0_fp),
            ("dt_ru", self.dt_ru),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::Config(format!("RDQ20-MF {name} must be positive, got {v}")));
            }
        }
        if self.alpha_vel < 0.0 || self.mu1_fp < 0.0 {
            return Err(Error::Config(
                "RDQ20-MF alpha_vel and mu1_fp must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// Guard below which a conditioning probability mass is treated as empty.
const MASS_GUARD: f64 = 1e-14;

/// Precomputed flip-rate tables at fixed `(ca, lambda)`.
struct RateTables {
    /// `tm[from][left][right][trpn]`
    tm: [[[[f64; 2]; 2]; 2]; 2],
    /// `ca_flip[from][tm]`
    ca_flip: [[f64; 2]; 2],
}

fn tm_state(i: usize) -> TmState {
    if i == 0 {
        TmState::NonPermissive
    } else {
        TmState::Permissive
    }
}

fn trpn_state(i: usize) -> TrpnState {
    if i == 0 {
        TrpnState::Unbound
    } else {
        TrpnState::Bound
    }
}

/// RDQ20-MF model instance.
#[derive(Clone)]
pub struct Rdq20Model {
    pub params: Rdq20Params,
    law: Arc<dyn Rdq20RateLaw>,
}

impl Rdq20Model {
    /// Build with the default cooperative rate law taken from `params.law`.
    pub fn new(params: Rdq20Params) -> Result<Self> {
        params.validate()?;
        let law = Arc::new(CooperativeRateLaw::new(params.law.clone()));
        Ok(Self { params, law })
    }

    /// Build with a custom rate law.
    pub fn with_law(params: Rdq20Params, law: Arc<dyn Rdq20RateLaw>) -> Result<Self> {
        params.validate()?;
        Ok(Self { params, law })
    }

    pub fn chi_so(&self, lambda: f64) -> f64 {
        self.law.chi_so(lambda)
    }

    fn tables(&self, ca: f64, lambda: f64) -> RateTables {
        let mut tm = [[[[0.0; 2]; 2]; 2]; 2];
        let mut ca_flip = [[0.0; 2]; 2];
        for from in 0..2 {
            for left in 0..2 {
                for right in 0..2 {
                    for trpn in 0..2 {
                        tm[from][left][right][trpn] = self.law.tm_flip_rate(
                            tm_state(from),
                            tm_state(left),
                            tm_state(right),
                            trpn_state(trpn),
                        );
                    }
                }
            }
            for tm_s in 0..2 {
                ca_flip[from][tm_s] =
                    self.law
                        .ca_flip_rate(trpn_state(from), tm_state(tm_s), ca, lambda);
            }
        }
        RateTables { tm, ca_flip }
    }

    /// Fraction of units with a permissive central tropomyosin.
    pub fn permissivity(pi: &[f64]) -> f64 {
        let mut p = 0.0;
        for alpha in 0..2 {
            for delta in 0..2 {
                for eta in 0..2 {
                    p += pi[pi_index(alpha, 1, delta, eta)];
                }
            }
        }
        p
    }

    /// Population-averaged tropomyosin flux rates `(k_np, k_pn)` used by the
    /// moment equations, with empty-population guards.
    pub fn flux_rates(&self, pi: &[f64], ca: f64, lambda: f64) -> (f64, f64) {
        let rt = self.tables(ca, lambda);
        self.flux_rates_with(&rt, pi)
    }

    fn flux_rates_with(&self, rt: &RateTables, pi: &[f64]) -> (f64, f64) {
        let p = Self::permissivity(pi);
        let mut np = 0.0;
        let mut pn = 0.0;
        for alpha in 0..2 {
            for delta in 0..2 {
                for eta in 0..2 {
                    np += rt.tm[0][alpha][delta][eta] * pi[pi_index(alpha, 0, delta, eta)];
                    pn += rt.tm[1][alpha][delta][eta] * pi[pi_index(alpha, 1, delta, eta)];
                }
            }
        }
        let k_np = if 1.0 - p < MASS_GUARD { 0.0 } else { np / (1.0 - p) };
        let k_pn = if p < MASS_GUARD { 0.0 } else { pn / p };
        (k_np, k_pn)
    }

    /// Mean-field flip rate of an outer unit currently in state `own`, whose
    /// known neighbor (the triplet center) is in state `center`. `left_side`
    /// selects which outer unit of the triplet is flipping.
    fn mean_field_rate(rt: &RateTables, pi: &[f64], own: usize, center: usize, left_side: bool) -> f64 {
        let mut num = 0.0;
        let mut mass = 0.0;
        for hidden in 0..2 {
            for trpn in 0..2 {
                let (rate, prob) = if left_side {
                    // flipping unit seen as center of (hidden, own, center)
                    (
                        rt.tm[own][hidden][center][trpn],
                        pi[pi_index(hidden, own, center, trpn)],
                    )
                } else {
                    // flipping unit seen as center of (center, own, hidden)
                    (
                        rt.tm[own][center][hidden][trpn],
                        pi[pi_index(center, own, hidden, trpn)],
                    )
                };
                num += rate * prob;
                mass += prob;
            }
        }
        if mass < MASS_GUARD {
            0.0
        } else {
            num / mass
        }
    }

    fn rhs_pi(&self, rt: &RateTables, pi: &[f64], out: &mut [f64]) {
        // mean-field rates for the outer units, conditioned on the center
        let mut kl = [[0.0; 2]; 2]; // kl[own][center]
        let mut kr = [[0.0; 2]; 2];
        for own in 0..2 {
            for center in 0..2 {
                kl[own][center] = Self::mean_field_rate(rt, pi, own, center, true);
                kr[own][center] = Self::mean_field_rate(rt, pi, own, center, false);
            }
        }
        for alpha in 0..2 {
            for beta in 0..2 {
                for delta in 0..2 {
                    for eta in 0..2 {
                        let i = pi_index(alpha, beta, delta, eta);
                        let mut d = 0.0;
                        // left outer unit
                        d += kl[1 - alpha][beta] * pi[pi_index(1 - alpha, beta, delta, eta)]
                            - kl[alpha][beta] * pi[i];
                        // central unit, exact rates
                        d += rt.tm[1 - beta][alpha][delta][eta]
                            * pi[pi_index(alpha, 1 - beta, delta, eta)]
                            - rt.tm[beta][alpha][delta][eta] * pi[i];
                        // right outer unit
                        d += kr[1 - delta][beta] * pi[pi_index(alpha, beta, 1 - delta, eta)]
                            - kr[delta][beta] * pi[i];
                        // central troponin
                        d += rt.ca_flip[1 - eta][beta] * pi[pi_index(alpha, beta, delta, 1 - eta)]
                            - rt.ca_flip[eta][beta] * pi[i];
                        out[i] = d;
                    }
                }
            }
        }
    }

    fn rhs_moments(&self, rt: &RateTables, pi: &[f64], mu: &[f64], lambda_dot: f64, out: &mut [f64]) {
        let p = &self.params;
        let perm = Self::permissivity(pi);
        let (k_np, k_pn) = self.flux_rates_with(rt, pi);
        let decay = p.r0 + p.alpha_vel * lambda_dot.abs();
        let (mu_p0, mu_n0, mu_p1, mu_n1) = (mu[0], mu[1], mu[2], mu[3]);
        out[0] = -(decay + k_pn) * mu_p0 + k_np * mu_n0 + perm * p.mu0_fp;
        out[1] = -(decay + k_np) * mu_n0 + k_pn * mu_p0;
        out[2] = -(decay + k_pn) * mu_p1 + k_np * mu_n1 + perm * p.mu1_fp + lambda_dot * mu_p0;
        out[3] = -(decay + k_np) * mu_n1 + k_pn * mu_p1 + lambda_dot * mu_n0;
    }

    /// Explicit subcycled propagation of the regulatory units over `dt`,
    /// clamping negatives and renormalizing the total probability after
    /// every substep.
    fn propagate_pi(&self, rt: &RateTables, pi: &mut [f64], dt: f64) -> Result<()> {
        let n_sub = (dt / self.params.dt_ru).ceil().max(1.0) as usize;
        let h = dt / n_sub as f64;
        let mut d = [0.0; N_PI];
        for _ in 0..n_sub {
            self.rhs_pi(rt, pi, &mut d);
            let mut sum = 0.0;
            for i in 0..N_PI {
                pi[i] = (pi[i] + h * d[i]).max(0.0);
                sum += pi[i];
            }
            if !(sum > 0.0) || !sum.is_finite() {
                return Err(Error::Model("RDQ20-MF regulatory state degenerated".into()));
            }
            for v in pi.iter_mut() {
                *v /= sum;
            }
        }
        Ok(())
    }

    /// Exact implicit solve of the four-moment linear system over `dt` with
    /// coefficients frozen at the updated regulatory state.
    fn solve_moments(
        &self,
        rt: &RateTables,
        pi: &[f64],
        mu_old: &[f64],
        lambda_dot: f64,
        dt: f64,
    ) -> Result<[f64; 4]> {
        let p = &self.params;
        let perm = Self::permissivity(pi);
        let (k_np, k_pn) = self.flux_rates_with(rt, pi);
        let decay = p.r0 + p.alpha_vel * lambda_dot.abs();
        // rows: mu_p0, mu_n0, mu_p1, mu_n1
        let mut a = [
            1.0 + dt * (decay + k_pn),
            -dt * k_np,
            0.0,
            0.0, //
            -dt * k_pn,
            1.0 + dt * (decay + k_np),
            0.0,
            0.0, //
            -dt * lambda_dot,
            0.0,
            1.0 + dt * (decay + k_pn),
            -dt * k_np, //
            0.0,
            -dt * lambda_dot,
            -dt * k_pn,
            1.0 + dt * (decay + k_np),
        ];
        let mut b = [
            mu_old[0] + dt * perm * p.mu0_fp,
            mu_old[1],
            mu_old[2] + dt * perm * p.mu1_fp,
            mu_old[3],
        ];
        lu_solve_in_place(&mut a, 4, &mut b)?;
        Ok(b)
    }
}

impl ForceModel for Rdq20Model {
    fn id(&self) -> &'static str {
        "RDQ20-MF"
    }

    fn dim(&self) -> usize {
        DIM
    }

    fn initial_state(&self) -> Vec<f64> {
        // all units non-permissive and calcium-free, no attached crossbridges
        let mut r = vec![0.0; DIM];
        r[pi_index(0, 0, 0, 0)] = 1.0;
        r
    }

    fn rhs(&self, r: &[f64], ca: f64, lambda: f64, lambda_dot: f64, out: &mut [f64]) -> Result<()> {
        let pi = &r[..N_PI];
        if pi.iter().any(|v| *v < -1e-9) || (pi.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
            return Err(Error::Model(
                "RDQ20-MF regulatory probabilities invalid (negative or not normalized)".into(),
            ));
        }
        let rt = self.tables(ca, lambda);
        let (head, tail) = out.split_at_mut(N_PI);
        self.rhs_pi(&rt, pi, head);
        self.rhs_moments(&rt, pi, &r[N_PI..], lambda_dot, tail);
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("RDQ20-MF rhs"));
        }
        Ok(())
    }

    fn tension(&self, r: &[f64], lambda: f64) -> Result<f64> {
        Ok(self.params.a_xb * self.chi_so(lambda) * (r[MU_P1] + r[MU_N1]))
    }

    fn stiffness(&self, r: &[f64], lambda: f64) -> Result<f64> {
        Ok(self.params.a_xb * self.chi_so(lambda) * (r[MU_P0] + r[MU_N0]))
    }

    fn steppers(&self) -> &'static [InnerStepper] {
        &[InnerStepper::SemiImplicit]
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
        if stepper != InnerStepper::SemiImplicit {
            return Err(Error::Config(
                "RDQ20-MF supports the semi-implicit stepper only".into(),
            ));
        }
        let rt = self.tables(ca, lambda);
        let mut pi_prop = [0.0; N_PI];
        pi_prop.copy_from_slice(&r_old[..N_PI]);
        self.propagate_pi(&rt, &mut pi_prop, dt)?;
        for i in 0..N_PI {
            out[i] = r_new[i] - pi_prop[i];
        }
        // moment rows, implicit with coefficients at the new regulatory state
        let p = &self.params;
        let pi_new = &r_new[..N_PI];
        let perm = Self::permissivity(pi_new);
        let (k_np, k_pn) = self.flux_rates_with(&rt, pi_new);
        let decay = p.r0 + p.alpha_vel * lambda_dot.abs();
        let (mu_p0, mu_n0, mu_p1, mu_n1) = (r_new[MU_P0], r_new[MU_N0], r_new[MU_P1], r_new[MU_N1]);
        out[MU_P0] = mu_p0
            - r_old[MU_P0]
            - dt * (-(decay + k_pn) * mu_p0 + k_np * mu_n0 + perm * p.mu0_fp);
        out[MU_N0] = mu_n0 - r_old[MU_N0] - dt * (-(decay + k_np) * mu_n0 + k_pn * mu_p0);
        out[MU_P1] = mu_p1
            - r_old[MU_P1]
            - dt * (-(decay + k_pn) * mu_p1 + k_np * mu_n1 + perm * p.mu1_fp + lambda_dot * mu_p0);
        out[MU_N1] = mu_n1
            - r_old[MU_N1]
            - dt * (-(decay + k_np) * mu_n1 + k_pn * mu_p1 + lambda_dot * mu_n0);
        Ok(())
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
        if stepper != InnerStepper::SemiImplicit {
            return Err(Error::Config(
                "RDQ20-MF supports the semi-implicit stepper only".into(),
            ));
        }
        let rt = self.tables(ca, lambda);
        let (pi, mu) = r.split_at_mut(N_PI);
        self.propagate_pi(&rt, pi, dt)?;
        let mu_new = self.solve_moments(&rt, pi, mu, lambda_dot, dt)?;
        mu.copy_from_slice(&mu_new);
        Ok(StepStats {
            iterations: 0,
            residual: 0.0,
        })
    }
}
