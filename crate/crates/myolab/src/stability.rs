//! Spectral stability analysis of the minimal coupled model.
//!
//! Each scheme's one-step update of `y = (mu1, lambda_k, lambda_km1)` is the
//! linear recursion `A y_{k+1} = B y_k + h_k`, so its stability is governed
//! by the spectral radius of `C = A^{-1} B`. This module assembles the
//! matrices (quasistatic and with mass/damping), computes eigenvalues
//! numerically, evaluates the quasistatic closed forms, sweeps time-step
//! grids, classifies zero- and absolute stability, and checks the
//! finite-difference Jacobian spectrum of the full four-state iteration map.

use crate::activation::MinimalModelParams;
use crate::coupling::{minimal_map_step, SchemeKind};
use crate::error::{Error, Result};
use crate::linalg::{eig_small, frobenius, ls_slope, solve3};
use crate::mechanics::{MechanicsParams, Potential};
use num_complex::Complex64;

/// Iteration matrices of one scheme at fixed `(mu0, dt)`.
#[derive(Debug, Clone)]
pub struct SchemeMatrices {
    pub a: [[f64; 3]; 3],
    pub b: [[f64; 3]; 3],
    /// `C = A^{-1} B`, computed by column solves.
    pub c: [[f64; 3]; 3],
}

/// Eigenvalues sorted by modulus descending, plus the spectral radius.
#[derive(Debug, Clone, Copy)]
pub struct EigenSet {
    pub eigs: [Complex64; 3],
    pub spectral_radius: f64,
}

impl EigenSet {
    fn from_roots(roots: &[Complex64]) -> Self {
        let eigs = [roots[0], roots[1], roots[2]];
        EigenSet {
            eigs,
            spectral_radius: roots[0].norm(),
        }
    }
}

/// Assemble the iteration matrices of `scheme` at attached fraction `mu0`.
///
/// Mass and damping contribute `M/dt^2` and `sigma/dt` blocks to both `A`
/// and `B`; the quasistatic case is recovered for `M = sigma = 0`. The
/// linear analysis requires the quadratic potential. The fractional-step
/// scheme shares the stabilized matrices (the two schemes produce the same
/// strain sequence).
pub fn assemble(
    scheme: SchemeKind,
    mu0: f64,
    dt: f64,
    params: &MinimalModelParams,
    mech: &MechanicsParams,
) -> Result<SchemeMatrices> {
    if mech.potential != Potential::Quadratic {
        return Err(Error::InvalidInput(
            "matrix stability analysis is defined for the quadratic potential".into(),
        ));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidInput("dt must be positive".into()));
    }
    let r = params.r;
    let a_xb = params.a_xb;
    let k_p = mech.k_p;
    let (mut a, mut b) = match scheme {
        SchemeKind::Monolithic => (
            [
                [1.0 + r * dt, -mu0, 0.0],
                [a_xb, k_p, 0.0],
                [0.0, 0.0, 1.0],
            ],
            [[1.0, -mu0, 0.0], [0.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
        ),
        SchemeKind::Segregated => (
            [
                [1.0 + r * dt, 0.0, -mu0],
                [a_xb, k_p, 0.0],
                [0.0, 0.0, 1.0],
            ],
            [[1.0, 0.0, -mu0], [0.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
        ),
        SchemeKind::StabilizedSegregated | SchemeKind::FractionalStep => (
            [
                [1.0 + r * dt, 0.0, -mu0],
                [a_xb, k_p + a_xb * mu0, -a_xb * mu0],
                [0.0, 0.0, 1.0],
            ],
            [[1.0, 0.0, -mu0], [0.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
        ),
    };
    if mech.mass != 0.0 {
        let m = mech.mass / (dt * dt);
        a[1][1] += m;
        a[1][2] -= m;
        b[1][1] += m;
        b[1][2] -= m;
    }
    if mech.visc != 0.0 {
        let d = mech.visc / dt;
        a[1][1] += d;
        b[1][1] += d;
    }
    // C column by column; a singular A violates the invertibility hypothesis
    let mut c = [[0.0; 3]; 3];
    for j in 0..3 {
        let rhs = [b[0][j], b[1][j], b[2][j]];
        let col = solve3(&a, rhs).map_err(|_| {
            Error::Eigen(format!(
                "iteration matrix A is singular for {} at mu0={mu0}, dt={dt}",
                scheme.label()
            ))
        })?;
        for i in 0..3 {
            c[i][j] = col[i];
        }
    }
    Ok(SchemeMatrices { a, b, c })
}

/// Numeric eigenvalues of `C = A^{-1} B`.
pub fn eig3(matrices: &SchemeMatrices) -> Result<EigenSet> {
    let mut flat = [0.0; 9];
    for i in 0..3 {
        for j in 0..3 {
            flat[i * 3 + j] = matrices.c[i][j];
        }
    }
    let roots = eig_small(&flat, 3)?;
    Ok(EigenSet::from_roots(&roots))
}

/// Quasistatic closed-form eigenvalues of the three schemes.
pub fn closed_form_eigs(
    scheme: SchemeKind,
    mu0: f64,
    dt: f64,
    params: &MinimalModelParams,
    mech: &MechanicsParams,
) -> Result<EigenSet> {
    if !mech.is_quasistatic() || mech.potential != Potential::Quadratic {
        return Err(Error::InvalidInput(
            "closed-form eigenvalues exist for quasistatic quadratic mechanics only".into(),
        ));
    }
    let r = params.r;
    let ka = params.a_xb * mu0;
    let k_p = mech.k_p;
    let zero = Complex64::new(0.0, 0.0);
    let mut eigs = match scheme {
        SchemeKind::Monolithic => {
            let s3 = (k_p + ka) / (k_p + ka + dt * k_p * r);
            [Complex64::new(s3, 0.0), zero, zero]
        }
        SchemeKind::Segregated => {
            let diff = k_p - ka;
            let disc = (diff * diff + 4.0 * ka * k_p * (1.0 + r * dt)).sqrt();
            let den = 2.0 * k_p * (1.0 + r * dt);
            [
                Complex64::new((diff + disc) / den, 0.0),
                Complex64::new((diff - disc) / den, 0.0),
                zero,
            ]
        }
        SchemeKind::StabilizedSegregated | SchemeKind::FractionalStep => {
            let num = k_p + ka + dt * ka * r;
            let s3 = num / (num + dt * k_p * r);
            [Complex64::new(s3, 0.0), zero, zero]
        }
    };
    eigs.sort_by(|a, b| b.norm().partial_cmp(&a.norm()).unwrap());
    Ok(EigenSet {
        eigs,
        spectral_radius: eigs[0].norm(),
    })
}

/// One grid point of a time-step sweep.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub dt: f64,
    pub result: std::result::Result<EigenSet, String>,
}

/// Eigenvalues over a `dt` grid at fixed `mu0`; per-point failures are
/// recorded and the sweep continues.
pub fn sweep(
    scheme: SchemeKind,
    dt_grid: &[f64],
    mu0: f64,
    params: &MinimalModelParams,
    mech: &MechanicsParams,
) -> Vec<SweepRow> {
    dt_grid
        .iter()
        .map(|&dt| SweepRow {
            dt,
            result: assemble(scheme, mu0, dt, params, mech)
                .and_then(|m| eig3(&m))
                .map_err(|e| e.to_string()),
        })
        .collect()
}

/// Logarithmically spaced grid in `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    assert!(points >= 2 && lo > 0.0 && hi > lo);
    let (a, b) = (lo.ln(), hi.ln());
    (0..points)
        .map(|k| (a + (b - a) * k as f64 / (points - 1) as f64).exp())
        .collect()
}

/// Stability verdict at one time-step size.
#[derive(Debug, Clone)]
pub struct DtVerdict {
    pub dt: f64,
    /// Largest spectral radius over the attached-fraction grid.
    pub spectral_radius: f64,
    /// Radius strictly below one (within 1e-12) at every sampled `mu0`.
    pub absolutely_stable: bool,
    /// The eigenvalue attaining the largest radius when unstable.
    pub offending_eigenvalue: Option<Complex64>,
}

/// Scheme-level classification over a `dt` grid.
#[derive(Debug, Clone)]
pub struct StabilityReport {
    pub scheme: SchemeKind,
    pub per_dt: Vec<DtVerdict>,
    /// Radius stays within `1 + alpha*dt` on the small-dt tail.
    pub zero_stable: bool,
    /// Fitted growth coefficient of the small-dt tail.
    pub alpha_fit: f64,
}

/// Number of attached-fraction samples used for the "for all mu0" checks.
pub const MU0_GRID_POINTS: usize = 33;

/// Classify a scheme over `dt_grid`, sampling `mu0` on a uniform grid over
/// its admissible interval `[0, mu0_f/r]`.
///
/// Absolute stability at a grid point requires the radius below one at every
/// sampled `mu0`. Zero-stability follows the asymptotic criterion: a growth
/// coefficient `alpha` is least-squares fitted from `(radius - 1)/dt` over
/// the three smallest grid points and the bound `radius <= 1 + alpha*dt`
/// must hold on the small-dt tail.
pub fn classify(
    scheme: SchemeKind,
    dt_grid: &[f64],
    params: &MinimalModelParams,
    mech: &MechanicsParams,
) -> Result<StabilityReport> {
    if dt_grid.is_empty() {
        return Err(Error::InvalidInput("empty dt grid".into()));
    }
    let mut dts: Vec<f64> = dt_grid.to_vec();
    dts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mu0_max = params.mu0_f / params.r;
    let mu0_grid: Vec<f64> = (0..MU0_GRID_POINTS)
        .map(|k| mu0_max * k as f64 / (MU0_GRID_POINTS - 1) as f64)
        .collect();
    let mut per_dt = Vec::with_capacity(dts.len());
    for &dt in &dts {
        let mut worst = 0.0f64;
        let mut offender = None;
        for &mu0 in &mu0_grid {
            let eigs = eig3(&assemble(scheme, mu0, dt, params, mech)?)?;
            if eigs.spectral_radius > worst {
                worst = eigs.spectral_radius;
                offender = Some(eigs.eigs[0]);
            }
        }
        per_dt.push(DtVerdict {
            dt,
            spectral_radius: worst,
            absolutely_stable: worst < 1.0 - 1e-12,
            offending_eigenvalue: if worst < 1.0 - 1e-12 { None } else { offender },
        });
    }
    // zero-stability: fit alpha on the three smallest points, then test the
    // bound on the small-dt tail (smallest 10% of the grid, at least three).
    // The fit is only meaningful when the grid resolves the linear regime
    // (alpha*dt small); a radius tending to a constant above one produces a
    // fit with alpha*dt = O(1) and is flagged unstable.
    let fit_n = 3.min(per_dt.len());
    let xs: Vec<f64> = per_dt[..fit_n].iter().map(|v| v.dt).collect();
    let ys: Vec<f64> = per_dt[..fit_n]
        .iter()
        .map(|v| v.spectral_radius - 1.0)
        .collect();
    // least squares of (radius - 1) = alpha * dt through the origin
    let alpha_fit = {
        let num: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
        let den: f64 = xs.iter().map(|x| x * x).sum();
        num / den
    };
    let tail = fit_n.max(per_dt.len() / 10);
    let resolved = alpha_fit <= 0.0 || alpha_fit * per_dt[tail - 1].dt <= 0.5;
    let zero_stable = resolved
        && per_dt[..tail].iter().all(|v| {
            // slack covers fit residuals and the O(dt^2) curvature of the
            // radius, whose scale is alpha^2
            let slack = 1e-9 + 1e-7 + 5.0 * (alpha_fit * v.dt).powi(2);
            v.spectral_radius - 1.0 - alpha_fit * v.dt <= slack
        });
    Ok(StabilityReport {
        scheme,
        per_dt,
        zero_stable,
        alpha_fit,
    })
}

/// Finite-difference Jacobian spectrum of a four-state iteration map at
/// `psi`, central differences with per-variable steps `delta*max(1,|psi_i|)`.
pub fn jacobian_spectrum<F>(map: F, psi: &[f64; 4], delta: f64) -> Result<[Complex64; 4]>
where
    F: Fn(&[f64; 4]) -> Result<[f64; 4]>,
{
    if !(delta > 0.0) {
        return Err(Error::InvalidInput("delta must be positive".into()));
    }
    let mut jac = [0.0; 16];
    for j in 0..4 {
        let h = delta * psi[j].abs().max(1.0);
        let mut plus = *psi;
        plus[j] += h;
        let fp = map(&plus)?;
        let mut minus = *psi;
        minus[j] -= h;
        let fm = map(&minus)?;
        for i in 0..4 {
            let v = (fp[i] - fm[i]) / (2.0 * h);
            if !v.is_finite() {
                return Err(Error::NonFinite("jacobian entry"));
            }
            jac[i * 4 + j] = v;
        }
    }
    let roots = eig_small(&jac, 4)?;
    Ok([roots[0], roots[1], roots[2], roots[3]])
}

/// Spectral radius of the finite-difference Jacobian of an iteration map.
pub fn jacobian_radius<F>(map: F, psi: &[f64; 4], delta: f64) -> Result<f64>
where
    F: Fn(&[f64; 4]) -> Result<[f64; 4]>,
{
    let eigs = jacobian_spectrum(map, psi, delta)?;
    Ok(eigs.iter().map(|e| e.norm()).fold(0.0, f64::max))
}

/// Iteration map of one minimal-model scheme at constant load, for use with
/// [`jacobian_spectrum`].
pub fn minimal_iteration_map<'a>(
    scheme: SchemeKind,
    params: &'a MinimalModelParams,
    mech: &'a MechanicsParams,
    load: f64,
    dt: f64,
) -> impl Fn(&[f64; 4]) -> Result<[f64; 4]> + 'a {
    move |psi| minimal_map_step(scheme, params, mech, psi, load, dt)
}

/// Matrix scale helper exposed for backward-error reporting in tests.
pub fn c_norm(matrices: &SchemeMatrices) -> f64 {
    let mut flat = [0.0; 9];
    for i in 0..3 {
        for j in 0..3 {
            flat[i * 3 + j] = matrices.c[i][j];
        }
    }
    frobenius(&flat)
}

/// Fit the tail growth coefficient used in reports: least squares of
/// `log(rho)` against `log(dt)` over a sweep segment.
pub fn fit_radius_slope(rows: &[SweepRow]) -> f64 {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| {
            r.result
                .as_ref()
                .ok()
                .map(|e| (r.dt.ln(), e.spectral_radius.max(1e-300).ln()))
        })
        .collect();
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    ls_slope(&xs, &ys)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> MinimalModelParams {
        MinimalModelParams::default()
    }

    fn quasistatic(k_p: f64) -> MechanicsParams {
        MechanicsParams::quasistatic(k_p, Potential::Quadratic)
    }

    #[test]
    fn stabilized_matrices_modify_segregated_row() {
        let p = params();
        let mech = quasistatic(1.0e6);
        let mu0 = 0.15;
        let dt = 2e-3;
        let segr = assemble(SchemeKind::Segregated, mu0, dt, &p, &mech).unwrap();
        let stab = assemble(SchemeKind::StabilizedSegregated, mu0, dt, &p, &mech).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expect = match (i, j) {
                    (1, 1) => segr.a[i][j] + p.a_xb * mu0,
                    (1, 2) => segr.a[i][j] - p.a_xb * mu0,
                    _ => segr.a[i][j],
                };
                assert_eq!(stab.a[i][j], expect);
                assert_eq!(stab.b[i][j], segr.b[i][j]);
            }
        }
    }

    #[test]
    fn mass_damping_reduce_to_quasistatic() {
        let p = params();
        let with_md = MechanicsParams {
            mass: 0.0,
            visc: 0.0,
            k_p: 1.0e6,
            potential: Potential::Quadratic,
        };
        let q = assemble(SchemeKind::Monolithic, 0.1, 1e-3, &p, &quasistatic(1.0e6)).unwrap();
        let m = assemble(SchemeKind::Monolithic, 0.1, 1e-3, &p, &with_md).unwrap();
        assert_eq!(q.a, m.a);
        assert_eq!(q.b, m.b);
    }

    #[test]
    fn closed_forms_match_hand_values() {
        // reference point: k_p = 1 MPa, mu0 at steady state, dt = 1e-3
        let p = params();
        let mech = quasistatic(1.0e6);
        let mu0 = p.mu0_f / p.r;
        let dt = 1e-3;
        let mono = closed_form_eigs(SchemeKind::Monolithic, mu0, dt, &p, &mech).unwrap();
        assert!((mono.spectral_radius - 0.9041).abs() < 5e-4, "{}", mono.spectral_radius);

        let segr = closed_form_eigs(SchemeKind::Segregated, mu0, dt, &p, &mech).unwrap();
        assert!((segr.spectral_radius - 2.8183).abs() < 5e-4, "{}", segr.spectral_radius);
        let plus = segr.eigs.iter().find(|e| e.re > 0.0).unwrap();
        assert!((plus.re - 0.9104).abs() < 5e-4, "{}", plus.re);

        let stab =
            closed_form_eigs(SchemeKind::StabilizedSegregated, mu0, dt, &p, &mech).unwrap();
        assert!((stab.spectral_radius - 0.9302).abs() < 5e-4, "{}", stab.spectral_radius);
    }

    #[test]
    fn numeric_eigenvalues_match_closed_forms() {
        use rand::{Rng, SeedableRng};
        let p = params();
        let mech = quasistatic(1.0e6);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(100);
        for scheme in [
            SchemeKind::Monolithic,
            SchemeKind::Segregated,
            SchemeKind::StabilizedSegregated,
        ] {
            for _ in 0..100 {
                let mu0 = rng.gen_range(0.0..=0.22);
                let dt = 10f64.powf(rng.gen_range(-5.0..0.0));
                let numeric = eig3(&assemble(scheme, mu0, dt, &p, &mech).unwrap()).unwrap();
                let closed = closed_form_eigs(scheme, mu0, dt, &p, &mech).unwrap();
                for (n, c) in numeric.eigs.iter().zip(closed.eigs.iter()) {
                    let err = (n - c).norm();
                    assert!(
                        err <= 1e-10 * c.norm().max(1.0),
                        "{scheme:?} mu0={mu0} dt={dt}: {n} vs {c}"
                    );
                }
            }
        }
    }

    #[test]
    fn segregated_limits_as_dt_vanishes() {
        let p = params();
        let mech = quasistatic(1.0e6);
        let mu0 = p.mu0_f / p.r;
        let e = closed_form_eigs(SchemeKind::Segregated, mu0, 1e-12, &p, &mech).unwrap();
        let sigma_plus = e.eigs.iter().map(|x| x.re).fold(f64::MIN, f64::max);
        let sigma_minus = e.eigs.iter().map(|x| x.re).fold(f64::MAX, f64::min);
        assert!((sigma_plus - 1.0).abs() < 1e-9);
        assert!((sigma_minus + p.a_xb * mu0 / mech.k_p).abs() < 1e-6);
    }

    #[test]
    fn classify_flags_the_three_schemes() {
        let p = params();
        let mech = quasistatic(1.0e6);
        let grid = log_grid(1e-6, 10.0, 40);

        let mono = classify(SchemeKind::Monolithic, &grid, &p, &mech).unwrap();
        assert!(mono.per_dt.iter().all(|v| v.absolutely_stable));
        assert!(mono.zero_stable);

        let stab = classify(SchemeKind::StabilizedSegregated, &grid, &p, &mech).unwrap();
        assert!(stab.per_dt.iter().all(|v| v.absolutely_stable));
        assert!(stab.zero_stable);

        let segr = classify(SchemeKind::Segregated, &grid, &p, &mech).unwrap();
        assert!(!segr.zero_stable, "radius tends to 3.9 > 1");
        assert!(segr.per_dt.first().unwrap().spectral_radius > 1.0);
        assert!(segr.per_dt.first().unwrap().offending_eigenvalue.is_some());
    }

    #[test]
    fn jacobian_spectrum_of_linear_and_contracting_maps() {
        // exact linear map: spectrum recovered up to FD noise
        let m = [
            0.5, 0.1, 0.0, 0.0, //
            0.0, -0.3, 0.2, 0.0, //
            0.0, 0.0, 0.25, 0.1, //
            0.1, 0.0, 0.0, -0.1,
        ];
        let map = |psi: &[f64; 4]| -> Result<[f64; 4]> {
            let mut out = [0.0; 4];
            for i in 0..4 {
                for j in 0..4 {
                    out[i] += m[i * 4 + j] * psi[j];
                }
            }
            Ok(out)
        };
        let psi = [0.3, -0.2, 0.1, 0.05];
        let eigs = jacobian_spectrum(map, &psi, 1e-5).unwrap();
        let direct = eig_small(&m, 4).unwrap();
        for (a, b) in eigs.iter().zip(direct.iter()) {
            assert!((a - b).norm() < 1e-8, "{a} vs {b}");
        }

        // pure contraction: radius one half
        let half = |psi: &[f64; 4]| -> Result<[f64; 4]> {
            Ok([0.5 * psi[0], 0.5 * psi[1], 0.5 * psi[2], 0.5 * psi[3]])
        };
        let rho = jacobian_radius(half, &psi, 1e-5).unwrap();
        assert!((rho - 0.5).abs() < 1e-9);
    }

    #[test]
    fn iteration_map_jacobian_has_block_structure() {
        // the full map's spectrum is spectrum(C) plus 1/(1 + r dt)
        let p = params();
        let mech = quasistatic(1.0e6);
        let dt = 1e-3;
        for scheme in [
            SchemeKind::Monolithic,
            SchemeKind::Segregated,
            SchemeKind::StabilizedSegregated,
        ] {
            let map = minimal_iteration_map(scheme, &p, &mech, 0.0, dt);
            let psi = [0.08, 0.002, -0.01, -0.008];
            let eigs = jacobian_spectrum(map, &psi, 1e-3).unwrap();
            let decoupled = 1.0 / (1.0 + p.r * dt);
            let found = eigs
                .iter()
                .any(|e| (e - Complex64::new(decoupled, 0.0)).norm() < 1e-6);
            assert!(found, "{scheme:?}: missing eigenvalue {decoupled} in {eigs:?}");
        }
    }

    #[test]
    fn sweep_records_failures_without_aborting() {
        let p = params();
        let mech = quasistatic(1.0e6);
        let rows = sweep(
            SchemeKind::Segregated,
            &[1e-4, 1e-3, 1e-2],
            p.mu0_f / p.r,
            &p,
            &mech,
        );
        assert_eq!(rows.len(), 3);
        assert!(rows.iter().all(|r| r.result.is_ok()));
    }
}
