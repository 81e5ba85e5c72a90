//! Small dense kernels: matrix exponential, continuous Lyapunov solve and
//! companion-matrix eigenstructure.
//!
//! Everything here works on `nalgebra::DMatrix` with dimensions in the low
//! tens at most, so the algorithms favour simplicity over asymptotics.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{CarmaError, Result};

/// Relative gap below which two eigenvalues are treated as repeated.
pub const DISTINCT_REL_TOL: f64 = 1e-8;

const THETA_3: f64 = 1.495585217958292e-2;
const THETA_5: f64 = 2.539398330063230e-1;
const THETA_7: f64 = 9.504178996162932e-1;
const THETA_9: f64 = 2.097847961257068;
const THETA_13: f64 = 5.371920351148152;

const PADE_3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE_5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE_7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE_9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE_13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

fn check_square(a: &DMatrix<f64>, what: &str) -> Result<()> {
    if a.nrows() != a.ncols() || a.nrows() == 0 {
        return Err(CarmaError::Dimension(format!(
            "{what} must be square and non-empty, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(CarmaError::Domain(format!("{what} has non-finite entries")));
    }
    Ok(())
}

fn one_norm(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Odd/even parts `(U, V)` of a diagonal Padé approximant with coefficients `b`
/// for degrees 3, 5, 7 and 9.
fn pade_low(a: &DMatrix<f64>, b: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let a2 = a * a;
    let mut even_pow = DMatrix::<f64>::identity(n, n);
    let mut u_inner = DMatrix::<f64>::zeros(n, n);
    let mut v = DMatrix::<f64>::zeros(n, n);
    for k in 0..b.len() / 2 {
        u_inner += &even_pow * b[2 * k + 1];
        v += &even_pow * b[2 * k];
        even_pow = &even_pow * &a2;
    }
    (a * u_inner, v)
}

fn pade_13(a: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let b = &PADE_13;
    let n = a.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_hi = &a6 * b[13] + &a4 * b[11] + &a2 * b[9];
    let u_inner = &a6 * u_hi + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &id * b[1];
    let v_hi = &a6 * b[12] + &a4 * b[10] + &a2 * b[8];
    let v = &a6 * v_hi + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &id * b[0];
    (a * u_inner, v)
}

/// `exp(A t)` by scaling and squaring with a diagonal Padé approximant
/// (degree chosen from the 1-norm as in Higham 2005).
pub fn mat_exp(a: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    check_square(a, "matrix")?;
    if !t.is_finite() {
        return Err(CarmaError::Domain(format!("time {t} is not finite")));
    }
    let at = a * t;
    let norm = one_norm(&at);
    let (u, v, squarings) = if norm < THETA_3 {
        let (u, v) = pade_low(&at, &PADE_3);
        (u, v, 0)
    } else if norm < THETA_5 {
        let (u, v) = pade_low(&at, &PADE_5);
        (u, v, 0)
    } else if norm < THETA_7 {
        let (u, v) = pade_low(&at, &PADE_7);
        (u, v, 0)
    } else if norm < THETA_9 {
        let (u, v) = pade_low(&at, &PADE_9);
        (u, v, 0)
    } else {
        let s = (norm / THETA_13).log2().ceil().max(0.0) as i32;
        let scaled = &at * 2f64.powi(-s);
        let (u, v) = pade_13(&scaled);
        (u, v, s)
    };
    let p = &v + &u;
    let q = &v - &u;
    let mut r = q
        .lu()
        .solve(&p)
        .ok_or_else(|| CarmaError::numerical("singular Padé denominator in matrix exponential"))?;
    for _ in 0..squarings {
        r = &r * &r;
    }
    Ok(r)
}

/// Solves `A X + X Aᵀ = -C` for symmetric `X` through the `p² × p²`
/// Kronecker linearisation.
pub fn lyapunov_solve(a: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_square(a, "A")?;
    check_square(c, "C")?;
    let n = a.nrows();
    if c.nrows() != n {
        return Err(CarmaError::Dimension(format!(
            "C is {}x{} but A is {n}x{n}",
            c.nrows(),
            c.ncols()
        )));
    }
    let max_re = a
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    if !(max_re < 0.0) {
        return Err(CarmaError::NonStationary(format!(
            "largest eigenvalue real part {max_re} is not negative"
        )));
    }
    // column-major vec: vec(AX) = (I ⊗ A) vec X, vec(X Aᵀ) = (A ⊗ I) vec X
    let m = n * n;
    let mut k = DMatrix::<f64>::zeros(m, m);
    for j in 0..n {
        for i in 0..n {
            let row = j * n + i;
            for l in 0..n {
                k[(row, j * n + l)] += a[(i, l)];
                k[(row, l * n + i)] += a[(j, l)];
            }
        }
    }
    let rhs = DVector::from_iterator(m, c.iter().map(|v| -v));
    let sol = k.lu().solve(&rhs).ok_or_else(|| {
        CarmaError::NonStationary("singular Lyapunov system (eigenvalue pair sums to zero)".into())
    })?;
    let x = DMatrix::from_column_slice(n, n, sol.as_slice());
    Ok((&x + x.transpose()) * 0.5)
}

/// Companion matrix of `z^p + a₁ z^{p-1} + … + a_p`: ones on the
/// superdiagonal, `(-a_p, …, -a₁)` on the last row.
pub fn companion_matrix(a: &[f64]) -> DMatrix<f64> {
    let p = a.len();
    let mut m = DMatrix::<f64>::zeros(p, p);
    for i in 0..p.saturating_sub(1) {
        m[(i, i + 1)] = 1.0;
    }
    for j in 0..p {
        m[(p - 1, j)] = -a[p - 1 - j];
    }
    m
}

/// Evaluates the monic polynomial `z^p + a₁ z^{p-1} + … + a_p` and its derivative.
pub fn monic_poly_eval(a: &[f64], z: Complex64) -> (Complex64, Complex64) {
    let mut f = Complex64::new(1.0, 0.0);
    let mut df = Complex64::new(0.0, 0.0);
    for &c in a {
        df = df * z + f;
        f = f * z + c;
    }
    (f, df)
}

/// Roots of `z^p + a₁ z^{p-1} + … + a_p`, computed as eigenvalues of the
/// companion matrix and polished with a few Newton steps. Sorted by real part,
/// largest first.
pub fn companion_eigvals(a: &[f64]) -> Result<Vec<Complex64>> {
    if a.is_empty() {
        return Err(CarmaError::Dimension("empty coefficient vector".into()));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(CarmaError::Domain("non-finite polynomial coefficient".into()));
    }
    let comp = companion_matrix(a);
    let mut roots: Vec<Complex64> = comp.complex_eigenvalues().iter().copied().collect();
    for z in roots.iter_mut() {
        let real = z.im == 0.0;
        let mut cur = *z;
        let mut cur_abs = monic_poly_eval(a, cur).0.norm();
        for _ in 0..8 {
            let (f, df) = monic_poly_eval(a, cur);
            if df.norm() == 0.0 || f.norm() == 0.0 {
                break;
            }
            let mut next = cur - f / df;
            if real {
                next.im = 0.0;
            }
            let next_abs = monic_poly_eval(a, next).0.norm();
            if next_abs < cur_abs {
                cur = next;
                cur_abs = next_abs;
            } else {
                break;
            }
        }
        *z = cur;
    }
    roots.sort_by(|x, y| y.re.total_cmp(&x.re).then(y.im.total_cmp(&x.im)));
    Ok(roots)
}

/// True when every pair of eigenvalues is separated by more than
/// [`DISTINCT_REL_TOL`] relative to their magnitude.
pub fn eigenvalues_distinct(lambdas: &[Complex64]) -> bool {
    for i in 0..lambdas.len() {
        for j in i + 1..lambdas.len() {
            let scale = 1f64.max(lambdas[i].norm()).max(lambdas[j].norm());
            if (lambdas[i] - lambdas[j]).norm() <= DISTINCT_REL_TOL * scale {
                return false;
            }
        }
    }
    true
}

/// Eigenvector matrix of the companion matrix: column `j` is
/// `[1, λ_j, λ_j², …, λ_j^{p-1}]ᵀ`.
pub fn vandermonde_eigvecs(lambdas: &[Complex64]) -> Result<DMatrix<Complex64>> {
    if lambdas.is_empty() {
        return Err(CarmaError::Dimension("no eigenvalues".into()));
    }
    if !eigenvalues_distinct(lambdas) {
        return Err(CarmaError::RepeatedEigenvalue(format!("{lambdas:?}")));
    }
    let p = lambdas.len();
    Ok(DMatrix::from_fn(p, p, |i, j| lambdas[j].powi(i as i32)))
}

/// Symmetric square-root factor `L` with `L Lᵀ = S` for a PSD matrix.
/// Falls back to an eigen-decomposition with clipped eigenvalues when
/// Cholesky fails on a numerically semidefinite input.
pub fn psd_factor(s: &DMatrix<f64>) -> DMatrix<f64> {
    if let Some(ch) = s.clone().cholesky() {
        return ch.l();
    }
    let eig = s.clone().symmetric_eigen();
    let sqrt_vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals)
}
