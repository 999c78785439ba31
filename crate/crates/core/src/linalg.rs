//! Small dense linear algebra: fixed-size LU solves and eigenvalues.

use nalgebra::DMatrix;
use num_complex::Complex;

use crate::scalar::Real;

/// Pivot magnitude, relative to the largest matrix entry, below which a
/// system is reported as singular.
pub const PIVOT_TOLERANCE: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Singular;

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn solve<T: Real, const N: usize>(mut a: [[T; N]; N], mut b: [T; N]) -> Result<[T; N], Singular> {
    let scale = a
        .iter()
        .flat_map(|row| row.iter())
        .fold(T::zero(), |m, v| m.max(v.abs()));
    if !(scale > T::zero()) || !scale.is_finite() {
        return Err(Singular);
    }
    let floor = T::lit(PIVOT_TOLERANCE) * scale;
    for col in 0..N {
        let piv = (col..N)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        if !(a[piv][col].abs() > floor) {
            return Err(Singular);
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..N {
            let f = a[row][col] / a[col][col];
            if f == T::zero() {
                continue;
            }
            for c in col..N {
                a[row][c] = a[row][c] - f * a[col][c];
            }
            b[row] = b[row] - f * b[col];
        }
    }
    let mut x = [T::zero(); N];
    for row in (0..N).rev() {
        let mut acc = b[row];
        for c in row + 1..N {
            acc = acc - a[row][c] * x[c];
        }
        x[row] = acc / a[row][row];
    }
    Ok(x)
}

/// Eigenvalues of a real square matrix.
///
/// The matrix is balanced first: rows and columns that isolate an eigenvalue
/// are permuted out, and the remaining block is diagonally scaled by powers of
/// two. The eigenvalues of the core block come from a real Schur
/// decomposition.
pub fn eigenvalues(a: &DMatrix<f64>) -> Vec<Complex<f64>> {
    assert!(a.is_square(), "eigenvalues of a non-square matrix");
    let n = a.nrows();
    let mut m = a.clone();
    let mut isolated = Vec::new();
    // active index set
    let mut active: Vec<usize> = (0..n).collect();
    loop {
        // a row with no off-diagonal entries inside the active block
        // isolates its diagonal entry; likewise a column.
        let pick = active.iter().position(|&i| {
            active.iter().all(|&j| j == i || m[(i, j)] == 0.0)
                || active.iter().all(|&j| j == i || m[(j, i)] == 0.0)
        });
        match pick {
            Some(pos) => {
                let i = active.remove(pos);
                isolated.push(Complex::new(m[(i, i)], 0.0));
            }
            None => break,
        }
    }
    let k = active.len();
    let mut out = isolated;
    if k == 0 {
        return out;
    }
    let mut block = DMatrix::from_fn(k, k, |i, j| m[(active[i], active[j])]);
    balance(&mut block);
    m = block;
    match m.clone().try_schur(f64::EPSILON, 10_000) {
        Some(schur) => out.extend(schur.complex_eigenvalues().iter().copied()),
        None => out.extend(m.complex_eigenvalues().iter().copied()),
    }
    out
}

/// Roots of `sum_i coeffs[i] x^i` (ascending powers).
///
/// The variable is rescaled by `|c_0 / c_n|^(1/n)` so that the scaled
/// polynomial has unit leading and trailing coefficients in magnitude, the
/// roots of the scaled companion matrix come from [`eigenvalues`], and each
/// root is polished by a few Newton steps on the original coefficients.
/// Leading zero coefficients lower the degree; a zero constant term yields
/// an exact root at the origin.
pub fn polynomial_roots(coeffs: &[f64]) -> Vec<Complex<f64>> {
    let mut c: Vec<f64> = coeffs.to_vec();
    while c.last() == Some(&0.0) {
        c.pop();
    }
    let mut out = Vec::new();
    while c.len() > 1 && c[0] == 0.0 {
        out.push(Complex::new(0.0, 0.0));
        c.remove(0);
    }
    let n = c.len().saturating_sub(1);
    if n == 0 {
        return out;
    }
    let sigma = (c[0] / c[n]).abs().powf(1.0 / n as f64);
    let lead = c[n] * sigma.powi(n as i32);
    let scaled: Vec<f64> = (0..n).map(|i| c[i] * sigma.powi(i as i32) / lead).collect();
    let companion = DMatrix::from_fn(n, n, |i, j| {
        if j == n - 1 {
            -scaled[i]
        } else if i == j + 1 {
            1.0
        } else {
            0.0
        }
    });
    for z in eigenvalues(&companion) {
        out.push(polish(&c, z * sigma));
    }
    out
}

fn horner(c: &[f64], z: Complex<f64>) -> (Complex<f64>, Complex<f64>) {
    let mut p = Complex::new(0.0, 0.0);
    let mut dp = Complex::new(0.0, 0.0);
    for &a in c.iter().rev() {
        dp = dp * z + p;
        p = p * z + a;
    }
    (p, dp)
}

fn polish(c: &[f64], mut z: Complex<f64>) -> Complex<f64> {
    let (mut p, _) = horner(c, z);
    for _ in 0..8 {
        let (_, dp) = horner(c, z);
        if dp.norm() == 0.0 {
            break;
        }
        let next = z - p / dp;
        let (pn, _) = horner(c, next);
        if !(pn.norm() < p.norm()) {
            break;
        }
        z = next;
        p = pn;
    }
    z
}

/// Roots of `m[4] x^4 + m[3] x^3 + m[2] x^2 + m[1] x + m[0]` from Ferrari's
/// closed form (resolvent cubic by Cardano), followed by the same Newton
/// polishing as [`polynomial_roots`]. The closed form alone loses digits to
/// cancellation; this is an independent cross-check for the companion-matrix
/// roots, not a replacement. Requires `m[4] != 0` and `m[0] != 0`.
pub fn quartic_roots_closed_form(m: &[f64; 5]) -> [Complex<f64>; 4] {
    type C = Complex<f64>;
    let sigma = (m[0] / m[4]).abs().powf(0.25);
    let lead = m[4] * sigma.powi(4);
    let a = m[3] * sigma.powi(3) / lead;
    let b = m[2] * sigma.powi(2) / lead;
    let c = m[1] * sigma / lead;
    let d = m[0] / lead;
    // Depressed quartic y^4 + p y^2 + q y + r with x = y - a/4.
    let p = b - 3.0 * a * a / 8.0;
    let q = c - a * b / 2.0 + a * a * a / 8.0;
    let r = d - a * c / 4.0 + a * a * b / 16.0 - 3.0 * a.powi(4) / 256.0;
    let shift = C::new(-a / 4.0, 0.0);
    let resolvent = cardano(C::new(p, 0.0), C::new(p * p / 4.0 - r, 0.0), C::new(-q * q / 8.0, 0.0));
    let y = resolvent
        .into_iter()
        .max_by(|u, v| u.norm().total_cmp(&v.norm()))
        .expect("three roots");
    let mut out = [C::new(0.0, 0.0); 4];
    if y.norm() == 0.0 {
        let disc = C::new(p * p - 4.0 * r, 0.0).sqrt();
        for (i, s) in [1.0, -1.0].into_iter().enumerate() {
            let z = ((-p + s * disc) / 2.0).sqrt();
            out[2 * i] = z + shift;
            out[2 * i + 1] = -z + shift;
        }
    } else {
        let s2y = (2.0 * y).sqrt();
        for (i, s1) in [1.0, -1.0].into_iter().enumerate() {
            let inner = (-(2.0 * p + 2.0 * y + s1 * 2.0 * q / s2y)).sqrt();
            out[2 * i] = (s1 * s2y + inner) / 2.0 + shift;
            out[2 * i + 1] = (s1 * s2y - inner) / 2.0 + shift;
        }
    }
    out.map(|z| polish(m, z * sigma))
}

/// Roots of the monic cubic `t^3 + a t^2 + b t + c`.
fn cardano(a: Complex<f64>, b: Complex<f64>, c: Complex<f64>) -> [Complex<f64>; 3] {
    let d0 = a * a - 3.0 * b;
    let d1 = 2.0 * a * a * a - 9.0 * a * b + 27.0 * c;
    let disc = (d1 * d1 - 4.0 * d0 * d0 * d0).sqrt();
    let big = if (d1 + disc).norm() >= (d1 - disc).norm() { d1 + disc } else { d1 - disc };
    let cc = (big / 2.0).powf(1.0 / 3.0);
    let xi = Complex::new(-0.5, 3f64.sqrt() / 2.0);
    let mut out = [Complex::new(0.0, 0.0); 3];
    let mut w = Complex::new(1.0, 0.0);
    for root in out.iter_mut() {
        let ck = w * cc;
        *root = if ck.norm() == 0.0 { -a / 3.0 } else { -(a + ck + d0 / ck) / 3.0 };
        w *= xi;
    }
    out
}

/// Diagonal similarity scaling by powers of two until row and column norms
/// of each index are within a factor of two of each other.
fn balance(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    let radix = 2.0_f64;
    let mut converged = false;
    let mut sweeps = 0;
    while !converged && sweeps < 200 {
        converged = true;
        sweeps += 1;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += m[(j, i)].abs();
                    r += m[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut cc = c;
            let mut rr = r;
            while cc < rr / radix {
                f *= radix;
                cc *= radix;
                rr /= radix;
            }
            while cc >= rr * radix {
                f /= radix;
                cc /= radix;
                rr *= radix;
            }
            if (cc + rr) < 0.95 * s {
                converged = false;
                for j in 0..n {
                    m[(i, j)] /= f;
                    m[(j, i)] *= f;
                }
            }
        }
    }
}
