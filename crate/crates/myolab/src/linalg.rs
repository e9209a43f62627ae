//! Small dense linear algebra: LU solves and eigenvalues of 2x2..4x4 matrices.
//!
//! Eigenvalues are computed from the characteristic polynomial: closed-form
//! roots (quadratic/cubic/quartic) seed a Durand-Kerner simultaneous
//! refinement, and every root is validated against a backward-error bound on
//! `det(M - sigma*I)`. Coefficients below the roundoff floor of the trace
//! products are treated as exact zeros so that structural multiplicities
//! (e.g. rank-deficient iteration matrices) are recovered instead of being
//! split by noise of order sqrt(eps).

use crate::error::{Error, Result};
use num_complex::Complex64;

/// Solve `A x = b` in place for a small dense system (row-major `a`, n x n).
///
/// Gaussian elimination with partial pivoting; `a` and `b` are destroyed.
pub fn lu_solve_in_place(a: &mut [f64], n: usize, b: &mut [f64]) -> Result<()> {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n);
    for col in 0..n {
        let mut pivot = col;
        let mut best = a[col * n + col].abs();
        for row in (col + 1)..n {
            let v = a[row * n + col].abs();
            if v > best {
                best = v;
                pivot = row;
            }
        }
        if best == 0.0 || !best.is_finite() {
            return Err(Error::Eigen(format!(
                "singular or non-finite matrix (pivot {best:e} at column {col})"
            )));
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            b.swap(col, pivot);
        }
        let diag = a[col * n + col];
        for row in (col + 1)..n {
            let factor = a[row * n + col] / diag;
            if factor != 0.0 {
                for k in col..n {
                    a[row * n + k] -= factor * a[col * n + k];
                }
                b[row] -= factor * b[col];
            }
        }
    }
    for row in (0..n).rev() {
        let mut sum = b[row];
        for k in (row + 1)..n {
            sum -= a[row * n + k] * b[k];
        }
        b[row] = sum / a[row * n + row];
    }
    Ok(())
}

/// Solve a 3x3 system.
pub fn solve3(a: &[[f64; 3]; 3], b: [f64; 3]) -> Result<[f64; 3]> {
    let mut flat = [0.0; 9];
    for (i, row) in a.iter().enumerate() {
        flat[i * 3..i * 3 + 3].copy_from_slice(row);
    }
    let mut rhs = b;
    lu_solve_in_place(&mut flat, 3, &mut rhs)?;
    Ok(rhs)
}

/// Frobenius norm of a flat row-major matrix.
pub fn frobenius(m: &[f64]) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn trace_of_power(m: &[f64], n: usize, power: &mut Vec<f64>, scratch: &mut Vec<f64>) -> f64 {
    // power holds M^{k-1} on entry and M^k on exit.
    scratch.iter_mut().for_each(|v| *v = 0.0);
    for i in 0..n {
        for k in 0..n {
            let mik = power[i * n + k];
            if mik != 0.0 {
                for j in 0..n {
                    scratch[i * n + j] += mik * m[k * n + j];
                }
            }
        }
    }
    power.copy_from_slice(scratch);
    (0..n).map(|i| power[i * n + i]).sum()
}

/// Monic characteristic polynomial coefficients `[c0, c1, ..., c_{n-1}, 1]`
/// of an n x n matrix (n <= 4), via Newton's identities on trace powers.
pub fn char_poly(m: &[f64], n: usize) -> Vec<f64> {
    debug_assert!(n >= 1 && n <= 4);
    let mut s = [0.0; 5]; // power sums s[k] = tr(M^k)
    let mut power = m.to_vec();
    let mut scratch = vec![0.0; n * n];
    s[1] = (0..n).map(|i| m[i * n + i]).sum();
    for k in 2..=n {
        s[k] = trace_of_power(m, n, &mut power, &mut scratch);
    }
    // elementary symmetric functions e[k]
    let mut e = [0.0; 5];
    e[0] = 1.0;
    for k in 1..=n {
        let mut acc = 0.0;
        for j in 1..=k {
            let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
            acc += sign * e[k - j] * s[j];
        }
        e[k] = acc / k as f64;
    }
    // p(x) = x^n - e1 x^{n-1} + e2 x^{n-2} - ...
    let mut coeffs = vec![0.0; n + 1];
    coeffs[n] = 1.0;
    for k in 1..=n {
        let sign = if k % 2 == 1 { -1.0 } else { 1.0 };
        coeffs[n - k] = sign * e[k];
    }
    coeffs
}

/// Zero out characteristic coefficients that sit below the roundoff floor of
/// the products that formed them, restoring structural root multiplicities.
pub fn snap_small_coeffs(coeffs: &mut [f64], matrix_scale: f64) {
    let n = coeffs.len() - 1;
    let scale = matrix_scale.max(1.0);
    for (k, c) in coeffs.iter_mut().enumerate().take(n) {
        let floor = 64.0 * f64::EPSILON * scale.powi((n - k) as i32);
        if c.abs() <= floor {
            *c = 0.0;
        }
    }
}

fn poly_eval(coeffs: &[f64], x: Complex64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        acc = acc * x + c;
    }
    acc
}

fn roots_quadratic(c0: f64, c1: f64) -> [Complex64; 2] {
    // x^2 + c1 x + c0
    let disc = c1 * c1 - 4.0 * c0;
    if disc >= 0.0 {
        let sq = disc.sqrt();
        // stable form avoiding cancellation
        let q = -0.5 * (c1 + c1.signum() * sq);
        if q != 0.0 {
            [Complex64::new(q, 0.0), Complex64::new(c0 / q, 0.0)]
        } else {
            // q vanishes only for the double root at -c1/2 = 0
            [Complex64::new(-c1, 0.0), Complex64::new(0.0, 0.0)]
        }
    } else {
        let im = 0.5 * (-disc).sqrt();
        [
            Complex64::new(-0.5 * c1, im),
            Complex64::new(-0.5 * c1, -im),
        ]
    }
}

fn roots_cubic(c0: f64, c1: f64, c2: f64) -> [Complex64; 3] {
    // x^3 + c2 x^2 + c1 x + c0; depressed: t = x + c2/3
    let shift = c2 / 3.0;
    let p = c1 - c2 * c2 / 3.0;
    let q = 2.0 * c2.powi(3) / 27.0 - c2 * c1 / 3.0 + c0;
    let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);
    let mut roots = [Complex64::new(0.0, 0.0); 3];
    if p == 0.0 && q == 0.0 {
        for r in roots.iter_mut() {
            *r = Complex64::new(-shift, 0.0);
        }
        return roots;
    }
    if disc > 0.0 {
        // one real root, complex pair
        let sq = disc.sqrt();
        let u = cbrt(-q / 2.0 + sq);
        let v = cbrt(-q / 2.0 - sq);
        let real = u + v;
        let im = (3.0f64).sqrt() / 2.0 * (u - v);
        roots[0] = Complex64::new(real - shift, 0.0);
        roots[1] = Complex64::new(-real / 2.0 - shift, im);
        roots[2] = Complex64::new(-real / 2.0 - shift, -im);
    } else {
        // three real roots: trigonometric method
        let m = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        for (k, r) in roots.iter_mut().enumerate() {
            let angle = theta - 2.0 * std::f64::consts::PI * k as f64 / 3.0;
            *r = Complex64::new(m * angle.cos() - shift, 0.0);
        }
    }
    roots
}

fn cbrt(x: f64) -> f64 {
    x.signum() * x.abs().powf(1.0 / 3.0)
}

fn roots_quartic(c0: f64, c1: f64, c2: f64, c3: f64) -> [Complex64; 4] {
    // x^4 + c3 x^3 + c2 x^2 + c1 x + c0; depress with x = y - c3/4
    let shift = c3 / 4.0;
    let p = c2 - 3.0 * c3 * c3 / 8.0;
    let q = c1 - c3 * c2 / 2.0 + c3.powi(3) / 8.0;
    let r = c0 - c3 * c1 / 4.0 + c3 * c3 * c2 / 16.0 - 3.0 * c3.powi(4) / 256.0;
    let mut roots = [Complex64::new(0.0, 0.0); 4];
    if q.abs() < 1e-300 {
        // biquadratic y^4 + p y^2 + r
        let z = roots_quadratic(r, p);
        let mut idx = 0;
        for zr in z.iter() {
            let sq = zr.sqrt();
            roots[idx] = sq - shift;
            roots[idx + 1] = -sq - shift;
            idx += 2;
        }
        return roots;
    }
    // Ferrari: resolvent cubic z^3 - p z^2 - 4 r z + (4 p r - q^2) = 0
    let res = roots_cubic(4.0 * p * r - q * q, -4.0 * r, -p);
    // pick the real root maximizing |z - p| for a stable square root
    let mut z = res[0].re;
    let mut best = f64::NEG_INFINITY;
    for cand in res.iter() {
        if cand.im.abs() < 1e-8 * (1.0 + cand.re.abs()) {
            let score = (cand.re - p).abs();
            if score > best {
                best = score;
                z = cand.re;
            }
        }
    }
    let wc = Complex64::new(z - p, 0.0).sqrt();
    let (u, v) = if wc.norm() > 1e-150 {
        (wc, Complex64::new(-q / 2.0, 0.0) / wc)
    } else {
        let disc = Complex64::new(z * z - 4.0 * r, 0.0).sqrt();
        (Complex64::new(0.0, 0.0), (Complex64::new(z, 0.0) + disc) / 2.0)
    };
    // y^4 + p y^2 + q y + r = (y^2 - u y + z/2 + v)(y^2 + u y + z/2 - v)
    let half_z = Complex64::new(z / 2.0, 0.0);
    let quads = [(-u, half_z + v), (u, half_z - v)];
    let mut idx = 0;
    for (b, c) in quads.iter() {
        let disc = (*b * *b - 4.0 * *c).sqrt();
        roots[idx] = (-*b + disc) / 2.0 - shift;
        roots[idx + 1] = (-*b - disc) / 2.0 - shift;
        idx += 2;
    }
    roots
}

/// Durand-Kerner simultaneous root refinement of a monic real polynomial.
fn durand_kerner(coeffs: &[f64], seeds: &mut [Complex64], max_iters: usize) {
    let n = seeds.len();
    for _ in 0..max_iters {
        let mut max_step = 0.0f64;
        for i in 0..n {
            let xi = seeds[i];
            let mut denom = Complex64::new(1.0, 0.0);
            for (j, xj) in seeds.iter().enumerate() {
                if j != i {
                    denom *= xi - xj;
                }
            }
            if denom.norm() < 1e-300 {
                continue;
            }
            let step = poly_eval(coeffs, xi) / denom;
            seeds[i] = xi - step;
            max_step = max_step.max(step.norm());
        }
        let scale: f64 = seeds.iter().map(|s| s.norm()).fold(1.0, f64::max);
        if max_step <= 1e-16 * scale {
            break;
        }
    }
}

fn default_seeds(n: usize, radius: f64) -> Vec<Complex64> {
    // standard slightly-rotated starting circle
    (0..n)
        .map(|k| {
            let angle = 2.0 * std::f64::consts::PI * k as f64 / n as f64 + 0.4;
            Complex64::from_polar(radius.max(0.5), angle)
        })
        .collect()
}

/// Roots of the monic polynomial described by `coeffs` (ascending order,
/// `coeffs[deg] == 1`), degree 2..=4.
pub fn poly_roots(coeffs: &[f64]) -> Result<Vec<Complex64>> {
    let deg = coeffs.len() - 1;
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("polynomial coefficients"));
    }
    // factor out exact zero roots first
    let zero_roots = coeffs.iter().take_while(|c| **c == 0.0).count().min(deg);
    let reduced = &coeffs[zero_roots..];
    let rdeg = deg - zero_roots;
    let mut roots: Vec<Complex64> = vec![Complex64::new(0.0, 0.0); zero_roots];
    let mut seeded: Vec<Complex64> = match rdeg {
        0 => Vec::new(),
        1 => vec![Complex64::new(-reduced[0], 0.0)],
        2 => roots_quadratic(reduced[0], reduced[1]).to_vec(),
        3 => roots_cubic(reduced[0], reduced[1], reduced[2]).to_vec(),
        4 => roots_quartic(reduced[0], reduced[1], reduced[2], reduced[3]).to_vec(),
        _ => unreachable!(),
    };
    if rdeg >= 2 {
        durand_kerner(reduced, &mut seeded, 40);
        let radius: f64 = reduced
            .iter()
            .take(rdeg)
            .map(|c| c.abs())
            .fold(1.0, f64::max);
        let tol = 1e-10 * radius.max(1.0);
        let bad = seeded
            .iter()
            .any(|x| !x.re.is_finite() || !x.im.is_finite() || poly_eval(reduced, *x).norm() > tol);
        if bad {
            // restart from scratch on the standard circle
            let mut fresh = default_seeds(rdeg, 1.0 + radius);
            durand_kerner(reduced, &mut fresh, 400);
            seeded = fresh;
        }
    }
    roots.extend(seeded);
    Ok(roots)
}

/// Determinant of `M - sigma*I` for a flat row-major matrix, n <= 4.
pub fn det_shifted(m: &[f64], n: usize, sigma: Complex64) -> Complex64 {
    let mut a: Vec<Complex64> = m.iter().map(|v| Complex64::new(*v, 0.0)).collect();
    for i in 0..n {
        a[i * n + i] -= sigma;
    }
    // complex Gaussian elimination without pivoting quality concerns at n<=4
    let mut det = Complex64::new(1.0, 0.0);
    for col in 0..n {
        let mut pivot = col;
        let mut best = a[col * n + col].norm();
        for row in (col + 1)..n {
            let v = a[row * n + col].norm();
            if v > best {
                best = v;
                pivot = row;
            }
        }
        if best == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            det = -det;
        }
        let diag = a[col * n + col];
        det *= diag;
        for row in (col + 1)..n {
            let factor = a[row * n + col] / diag;
            for k in col..n {
                let v = a[col * n + k];
                a[row * n + k] -= factor * v;
            }
        }
    }
    det
}

/// Eigenvalues of a small matrix (flat row-major, n in 2..=4), sorted by
/// modulus descending. Each root satisfies the backward-error bound
/// `|det(M - sigma I)| <= 1e-12 * max(1, ||M||_F)^(n-1) * ||M||_F`.
pub fn eig_small(m: &[f64], n: usize) -> Result<Vec<Complex64>> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix entries"));
    }
    let scale = frobenius(m);
    let mut coeffs = char_poly(m, n);
    snap_small_coeffs(&mut coeffs, scale);
    let mut roots = poly_roots(&coeffs)?;
    roots.sort_by(|a, b| {
        b.norm()
            .partial_cmp(&a.norm())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(
                b.re.partial_cmp(&a.re)
                    .unwrap_or(std::cmp::Ordering::Equal),
            )
    });
    let tol = 1e-12 * scale.max(1.0).powi(n as i32 - 1) * scale.max(1e-300);
    for root in &roots {
        let back = det_shifted(m, n, *root).norm();
        if back > tol {
            return Err(Error::Eigen(format!(
                "backward error {back:.3e} exceeds {tol:.3e} for eigenvalue {root}"
            )));
        }
    }
    Ok(roots)
}

/// Least-squares slope of `y` against `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (xi, yi) in x.iter().zip(y) {
        num += (xi - mx) * (yi - my);
        den += (xi - mx) * (xi - mx);
    }
    num / den
}
