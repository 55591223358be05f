//! Dense complex matrix helpers: conjugate transpose, Kronecker products,
//! Hermitian fractional powers, and a Padé scaling-and-squaring matrix
//! exponential.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, FactorizeInto, Solve, UPLO};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = Array2<C64>;
pub type CVec = Array1<C64>;

pub fn identity(n: usize) -> CMat {
    Array2::eye(n)
}

/// Conjugate transpose.
pub fn dagger(a: &CMat) -> CMat {
    a.t().mapv(|z| z.conj())
}

pub fn trace(a: &CMat) -> C64 {
    a.diag().sum()
}

pub fn frobenius_norm(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Maximum absolute column sum.
pub fn one_norm(a: &CMat) -> f64 {
    let mut best = 0.0_f64;
    for col in a.columns() {
        let s: f64 = col.iter().map(|z| z.norm()).sum();
        best = best.max(s);
    }
    best
}

/// Kronecker product, row-major convention: `(A ⊗ B)[(i p + k), (j q + l)] = A[i,j] B[k,l]`.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    ndarray::linalg::kron(a, b)
}

/// `‖A − A†‖_F / max(1, ‖A‖_F)`.
pub fn hermiticity_residual(a: &CMat) -> f64 {
    let diff = a - &dagger(a);
    frobenius_norm(&diff) / frobenius_norm(a).max(1.0)
}

/// Eigendecomposition of a Hermitian matrix; eigenvalues ascending,
/// eigenvectors in the columns of the returned matrix, satisfying
/// `A v_k = λ_k v_k` and `A = V diag(λ) V†`.
///
/// The LAPACK backend sees the row-major buffer as column-major and hands
/// back eigenvectors of `conj(A)`; conjugate them to restore the stated
/// convention (pinned by a unit test).
pub fn hermitian_eigensystem(a: &CMat) -> Result<(Array1<f64>, CMat)> {
    let (vals, vecs) = a.eigh(UPLO::Lower)?;
    let vecs = vecs.mapv(|z| z.conj());
    debug_assert!({
        let v = vecs.column(0).to_owned();
        let res: f64 = (&a.dot(&v) - &v.mapv(|z| z * C64::new(vals[0], 0.0)))
            .iter()
            .map(|z| z.norm())
            .sum();
        res <= 1e-8 * (one_norm(a) + 1.0)
    });
    Ok((vals, vecs))
}

/// Fractional power of a Hermitian positive-definite matrix via its
/// eigendecomposition. Any eigenvalue at or below `rank_tol` raises the
/// rank-deficiency error; the formulas downstream all assume invertibility.
pub fn hermitian_power(a: &CMat, exponent: f64, rank_tol: f64) -> Result<CMat> {
    let (vals, vecs) = hermitian_eigensystem(a)?;
    let min_eig = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    if min_eig <= rank_tol {
        return Err(Error::RankDeficientState {
            min_eig,
            tol: rank_tol,
        });
    }
    let n = a.nrows();
    let mut out = CMat::zeros((n, n));
    for (k, &lam) in vals.iter().enumerate() {
        let w = C64::new(lam.powf(exponent), 0.0);
        let v = vecs.column(k);
        for i in 0..n {
            for j in 0..n {
                out[[i, j]] += w * v[i] * v[j].conj();
            }
        }
    }
    Ok(out)
}

const PADE_3: [f64; 4] = [120., 60., 12., 1.];
const PADE_5: [f64; 6] = [30240., 15120., 3360., 420., 30., 1.];
const PADE_7: [f64; 8] = [17297280., 8648640., 1995840., 277200., 25200., 1512., 56., 1.];
const PADE_9: [f64; 10] = [
    17643225600.,
    8821612800.,
    2075673600.,
    302702400.,
    30270240.,
    2162160.,
    110880.,
    3960.,
    90.,
    1.,
];
const PADE_13: [f64; 14] = [
    64764752532480000.,
    32382376266240000.,
    7771770303897600.,
    1187353796428800.,
    129060195264000.,
    10559470521600.,
    670442572800.,
    33522128640.,
    1323241920.,
    40840800.,
    960960.,
    16380.,
    182.,
    1.,
];

const THETA_3: f64 = 1.495585217958292e-2;
const THETA_5: f64 = 2.539398330063230e-1;
const THETA_7: f64 = 9.504178996162932e-1;
const THETA_9: f64 = 2.097847961257068e0;
const THETA_13: f64 = 5.371920351148152e0;

fn scaled(m: &CMat, b: f64) -> CMat {
    m * C64::new(b, 0.0)
}

/// Evaluate the order-`m` Padé approximant given precomputed even powers of
/// `a`; returns `(U, V)` with `r(a) = (V − U)⁻¹ (V + U)`.
fn pade_uv(a: &CMat, powers: &[&CMat], b: &[f64]) -> (CMat, CMat) {
    let n = a.nrows();
    let mut u_inner = CMat::zeros((n, n));
    let mut v = CMat::zeros((n, n));
    // powers[k] = A^{2k} with powers[0] = I.
    for (k, p) in powers.iter().enumerate() {
        u_inner += &scaled(p, b[2 * k + 1]);
        v += &scaled(p, b[2 * k]);
    }
    (a.dot(&u_inner), v)
}

/// Matrix exponential by scaling and squaring with diagonal Padé
/// approximants of orders 3/5/7/9/13 and the Higham theta thresholds.
pub fn expm(a: &CMat) -> CMat {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm requires a square matrix");
    let eye = identity(n);
    let norm = one_norm(a);

    if norm <= THETA_9 {
        let a2 = a.dot(a);
        let (u, v) = if norm <= THETA_3 {
            pade_uv(a, &[&eye, &a2], &PADE_3)
        } else if norm <= THETA_5 {
            let a4 = a2.dot(&a2);
            pade_uv(a, &[&eye, &a2, &a4], &PADE_5)
        } else if norm <= THETA_7 {
            let a4 = a2.dot(&a2);
            let a6 = a4.dot(&a2);
            pade_uv(a, &[&eye, &a2, &a4, &a6], &PADE_7)
        } else {
            let a4 = a2.dot(&a2);
            let a6 = a4.dot(&a2);
            let a8 = a6.dot(&a2);
            pade_uv(a, &[&eye, &a2, &a4, &a6, &a8], &PADE_9)
        };
        return pade_solve(&u, &v);
    }

    // Order 13 with scaling by 2^s.
    let s = ((norm / THETA_13).log2().ceil()).max(0.0) as i32;
    let scale = C64::new(0.5_f64.powi(s), 0.0);
    let a_s = a * scale;
    let a2 = a_s.dot(&a_s);
    let a4 = a2.dot(&a2);
    let a6 = a4.dot(&a2);

    let b = &PADE_13;
    let u_high = a6.dot(&(scaled(&a6, b[13]) + scaled(&a4, b[11]) + scaled(&a2, b[9])));
    let u_low = scaled(&a6, b[7]) + scaled(&a4, b[5]) + scaled(&a2, b[3]) + scaled(&eye, b[1]);
    let u = a_s.dot(&(u_high + u_low));
    let v_high = a6.dot(&(scaled(&a6, b[12]) + scaled(&a4, b[10]) + scaled(&a2, b[8])));
    let v = v_high + scaled(&a6, b[6]) + scaled(&a4, b[4]) + scaled(&a2, b[2]) + scaled(&eye, b[0]);

    let mut f = pade_solve(&u, &v);
    for _ in 0..s {
        f = f.dot(&f);
    }
    f
}

/// Solve `(V − U) F = (V + U)` column by column.
fn pade_solve(u: &CMat, v: &CMat) -> CMat {
    let denom = v - u;
    let numer = v + u;
    let n = u.nrows();
    let lu = denom
        .factorize_into()
        .expect("Padé denominator is singular");
    let mut f = CMat::zeros((n, n));
    for j in 0..n {
        let col = numer.column(j).to_owned();
        let x = lu.solve_into(col).expect("Padé solve failed");
        f.column_mut(j).assign(&x);
    }
    f
}
