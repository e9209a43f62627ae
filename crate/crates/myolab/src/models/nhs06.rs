//! NHS06 fading-memory force model (Niederer, Hunter & Smith 2006).
//!
//! Five state variables: troponin-bound calcium `ca_trpn` (uM), available
//! binding-site fraction `z`, and three fading-memory variables `q1..q3`
//! carrying the exponentially weighted strain-rate history. Velocity
//! dependence enters tension through `K(Q)` with `Q = q1+q2+q3`.
//!
//! State layout: `[ca_trpn, z, q1, q2, q3]`.

use crate::activation::{ForceModel, InnerStepper};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Parameters, defaults per the original human-recalibrated set.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Nhs06Params {
    /// Calcium association rate (1/(uM s)).
    pub k_on: f64,
    /// Reference calcium dissociation rate (1/s).
    pub k_off: f64,
    /// Total troponin concentration (uM).
    pub ca_trpn_max: f64,
    /// Tension feedback strength on calcium unbinding.
    pub gamma_trpn: f64,
    /// Reference tension (Pa).
    pub t_ref: f64,
    /// Activation rate (1/s).
    pub alpha_0: f64,
    /// Slow relaxation rate (1/s).
    pub alpha_r1: f64,
    /// Fast relaxation rate scale (1/s).
    pub alpha_r2: f64,
    /// Hill coefficient of activation.
    pub n_hill: f64,
    /// Relaxation nonlinearity exponent.
    pub n_rel: f64,
    /// Relaxation half-saturation of `z`.
    pub k_z: f64,
    /// Half-activating calcium at rest (uM).
    pub ca50_ref: f64,
    /// Length dependence of steady tension.
    pub beta_0: f64,
    /// Length dependence of calcium sensitivity.
    pub beta_1: f64,
    /// Tangent slope of the nonlinear relaxation term at the working point (1/s).
    pub k1: f64,
    /// Tangent intercept of the nonlinear relaxation term (1/s).
    pub k2: f64,
    /// Curvature of the force-velocity relation.
    pub a_curv: f64,
    /// Fading-memory weights.
    pub a_weights: [f64; 3],
    /// Fading-memory rates (1/s).
    pub alpha_rates: [f64; 3],
}

impl Default for Nhs06Params {
    fn default() -> Self {
        Self {
            k_on: 100.0,
            k_off: 200.0,
            ca_trpn_max: 70.0,
            gamma_trpn: 2.0,
            t_ref: 56.2e3,
            alpha_0: 8.0,
            alpha_r1: 2.0,
            alpha_r2: 1.75,
            n_hill: 3.0,
            n_rel: 3.0,
            k_z: 0.15,
            ca50_ref: 1.05,
            beta_0: 4.9,
            beta_1: -4.0,
            // tangent of alpha_r2 * z^n/(z^n + k_z^n) at z = 0.85
            k1: 0.033572705,
            k2: 1.711898422,
            a_curv: 0.35,
            a_weights: [-29.0, 138.0, 129.0],
            alpha_rates: [30.0, 130.0, 625.0],
        }
    }
}

impl Nhs06Params {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("k_on", self.k_on),
            ("k_off", self.k_off),
            ("ca_trpn_max", self.ca_trpn_max),
            ("gamma_trpn", self.gamma_trpn),
            ("t_ref", self.t_ref),
            ("alpha_0", self.alpha_0),
            ("alpha_r1", self.alpha_r1),
            ("alpha_r2", self.alpha_r2),
            ("ca50_ref", self.ca50_ref),
            ("a_curv", self.a_curv),
            ("k_z", self.k_z),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::Config(format!("NHS06 {name} must be positive, got {v}")));
            }
        }
        if self.alpha_rates.iter().any(|a| !(*a > 0.0)) {
            return Err(Error::Config("NHS06 alpha_rates must be positive".into()));
        }
        Ok(())
    }
}

/// NHS06 model instance.
#[derive(Debug, Clone)]
pub struct Nhs06Model {
    pub params: Nhs06Params,
}

pub const CA_TRPN: usize = 0;
pub const Z: usize = 1;
pub const Q1: usize = 2;

impl Nhs06Model {
    pub fn new(params: Nhs06Params) -> Result<Self> {
        params.validate()?;
        Ok(Self { params })
    }

    /// Length-dependent half-activating calcium (uM).
    pub fn ca50(&self, lambda: f64) -> f64 {
        self.params.ca50_ref * (1.0 + self.params.beta_1 * lambda)
    }

    /// Troponin-bound calcium at half activation (uM).
    pub fn ca_trpn50(&self, lambda: f64) -> Result<f64> {
        let p = &self.params;
        let ca50 = self.ca50(lambda);
        let den = ca50 + p.k_off / p.k_on * (1.0 - (1.0 + p.beta_0 * lambda) / (2.0 * p.gamma_trpn));
        if !(ca50 > 0.0) || !(den > 0.0) {
            return Err(Error::Model(format!(
                "NHS06 half-activation undefined at lambda = {lambda}"
            )));
        }
        Ok(p.ca_trpn_max * ca50 / den)
    }

    /// Maximum recruitable site fraction at strain `lambda`.
    pub fn z_max(&self, lambda: f64) -> Result<f64> {
        let p = &self.params;
        let ratio = p.ca_trpn_max / self.ca_trpn50(lambda)?;
        let act = p.alpha_0 * ratio.powf(p.n_hill);
        let z = (act - p.k2) / (act + p.alpha_r1 + p.k1);
        if !(z > 0.0) {
            return Err(Error::Model(format!("NHS06 z_max <= 0 at lambda = {lambda}")));
        }
        Ok(z)
    }

    /// Velocity response `K(Q)`, continuous at `Q = 0` with `K(0) = 1`.
    pub fn k_of_q(&self, q: f64) -> f64 {
        let a = self.params.a_curv;
        if q <= 0.0 {
            (a * q + 1.0) / (1.0 - q)
        } else {
            ((2.0 + a) * q + 1.0) / (1.0 + q)
        }
    }

    /// Derivative `K'(Q) = (1 + a)/(1 + |Q|)^2`.
    pub fn k_prime_of_q(&self, q: f64) -> f64 {
        let a = self.params.a_curv;
        (1.0 + a) / ((1.0 + q.abs()) * (1.0 + q.abs()))
    }

    fn rhs_impl(&self, r: &[f64], ca: f64, lambda: f64, lambda_dot: f64, out: &mut [f64]) -> Result<()> {
        let p = &self.params;
        let ta = self.tension(r, lambda)?;
        // calcium binding; the dissociation rate softens with tension
        out[CA_TRPN] = p.k_on * ca * (p.ca_trpn_max - r[CA_TRPN])
            - p.k_off * (1.0 - ta / (p.gamma_trpn * p.t_ref)) * r[CA_TRPN];
        // available-site kinetics; fractional powers on clamped bases
        let ratio = (r[CA_TRPN].max(0.0)) / self.ca_trpn50(lambda)?;
        let zc = r[Z].max(0.0);
        let zn = zc.powf(p.n_rel);
        out[Z] = p.alpha_0 * ratio.powf(p.n_hill) * (1.0 - r[Z])
            - p.alpha_r1 * r[Z]
            - p.alpha_r2 * zn / (zn + p.k_z.powf(p.n_rel));
        for i in 0..3 {
            out[Q1 + i] = p.a_weights[i] * lambda_dot - p.alpha_rates[i] * r[Q1 + i];
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("NHS06 rhs"));
        }
        Ok(())
    }
}

impl ForceModel for Nhs06Model {
    fn id(&self) -> &'static str {
        "NHS06"
    }

    fn dim(&self) -> usize {
        5
    }

    fn initial_state(&self) -> Vec<f64> {
        // resting calcium binding equilibrium at the diastolic level, no
        // recruited sites, no strain-rate history
        let p = &self.params;
        let ca_rest = 0.1;
        let ca_trpn0 = p.ca_trpn_max * p.k_on * ca_rest / (p.k_on * ca_rest + p.k_off);
        vec![ca_trpn0, 0.0, 0.0, 0.0, 0.0]
    }

    fn rhs(&self, r: &[f64], ca: f64, lambda: f64, lambda_dot: f64, out: &mut [f64]) -> Result<()> {
        self.rhs_impl(r, ca, lambda, lambda_dot, out)
    }

    fn tension(&self, r: &[f64], lambda: f64) -> Result<f64> {
        let p = &self.params;
        let q: f64 = r[Q1] + r[Q1 + 1] + r[Q1 + 2];
        let t = p.t_ref * (1.0 + p.beta_0 * lambda) * (r[Z] / self.z_max(lambda)?) * self.k_of_q(q);
        if !t.is_finite() {
            return Err(Error::NonFinite("NHS06 tension"));
        }
        Ok(t)
    }

    fn stiffness(&self, r: &[f64], lambda: f64) -> Result<f64> {
        let p = &self.params;
        let q: f64 = r[Q1] + r[Q1 + 1] + r[Q1 + 2];
        let sum_a: f64 = p.a_weights.iter().sum();
        Ok(p.t_ref
            * (1.0 + p.beta_0 * lambda)
            * (r[Z] / self.z_max(lambda)?)
            * self.k_prime_of_q(q)
            * sum_a)
    }

    fn steppers(&self) -> &'static [InnerStepper] {
        &[InnerStepper::Implicit]
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
        if stepper != InnerStepper::Implicit {
            return Err(Error::Config("NHS06 supports the implicit stepper only".into()));
        }
        self.rhs_impl(r_new, ca, lambda, lambda_dot, out)?;
        for i in 0..5 {
            out[i] = r_new[i] - r_old[i] - dt * out[i];
        }
        Ok(())
    }
}
