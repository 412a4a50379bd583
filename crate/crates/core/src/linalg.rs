//! Dense matrix helpers on top of nalgebra: exponentials, the phi-1
//! function, symmetric square-root factors and conditioning.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

pub fn is_diagonal(a: &Mat) -> bool {
    if !a.is_square() {
        return false;
    }
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            if i != j && a[(i, j)] != 0.0 {
                return false;
            }
        }
    }
    true
}

/// `exp(tA)`. Diagonal generators are exponentiated entrywise, everything
/// else goes through nalgebra's scaling-and-squaring Padé routine.
pub fn expm(a: &Mat, t: f64) -> Mat {
    assert!(a.is_square(), "expm of a non-square matrix");
    if t == 0.0 {
        return Mat::identity(a.nrows(), a.ncols());
    }
    if is_diagonal(a) {
        let n = a.nrows();
        return Mat::from_fn(n, n, |i, j| if i == j { (a[(i, i)] * t).exp() } else { 0.0 });
    }
    (a * t).exp()
}

/// `exp(tA) v` for `t >= 0`.
pub fn semigroup_apply(a: &Mat, t: f64, v: &Vector) -> Vector {
    debug_assert!(t >= 0.0);
    expm(a, t) * v
}

/// `Φ₁(A, dt) = (e^{A dt} − I)(A dt)^{-1}`, i.e. `(1/dt) ∫₀^dt e^{sA} ds`.
///
/// Series for `‖A dt‖ < 1/2`, otherwise a linear solve; a singular `A`
/// falls back to the augmented exponential `exp([[A dt, I], [0, 0]])`.
pub fn phi1(a: &Mat, dt: f64) -> Mat {
    let n = a.nrows();
    if dt == 0.0 {
        return Mat::identity(n, n);
    }
    if is_diagonal(a) {
        return Mat::from_fn(n, n, |i, j| {
            if i == j {
                let x = a[(i, i)] * dt;
                if x == 0.0 {
                    1.0
                } else {
                    x.exp_m1() / x
                }
            } else {
                0.0
            }
        });
    }
    let adt = a * dt;
    if adt.norm() < 0.5 {
        let mut term = Mat::identity(n, n);
        let mut sum = term.clone();
        for k in 1..40 {
            term = &term * &adt / (k as f64 + 1.0);
            sum += &term;
            if term.norm() < 1e-18 * sum.norm() {
                break;
            }
        }
        return sum;
    }
    let rhs = expm(a, dt) - Mat::identity(n, n);
    if let Some(x) = adt.clone().lu().solve(&rhs) {
        if x.iter().all(|v| v.is_finite()) {
            return x;
        }
    }
    let mut aug = Mat::zeros(2 * n, 2 * n);
    aug.view_mut((0, 0), (n, n)).copy_from(&adt);
    aug.view_mut((0, n), (n, n)).fill_with_identity();
    aug.exp().view((0, n), (n, n)).into_owned()
}

/// Symmetric eigen-decomposition after explicit symmetrization.
pub fn sym_eigen(c: &Mat) -> SymmetricEigen<f64, nalgebra::Dyn> {
    let sym = (c + c.transpose()) * 0.5;
    SymmetricEigen::new(sym)
}

/// A factor `L` with `L Lᵀ = C` for a positive-semidefinite `C`; negative
/// eigenvalues (rounding noise) are clipped to zero.
pub fn psd_factor(c: &Mat) -> Mat {
    let eig = sym_eigen(c);
    let sqrt = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * Mat::from_diagonal(&sqrt)
}

pub fn symmetric_eigenvalues(c: &Mat) -> Vector {
    sym_eigen(c).eigenvalues
}

/// Ratio of the largest to smallest eigenvalue of a symmetric matrix;
/// infinite when the smallest one is not positive.
pub fn spd_condition_number(c: &Mat) -> f64 {
    let ev = symmetric_eigenvalues(c);
    let max = ev.max();
    let min = ev.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Largest singular value.
pub fn operator_norm(a: &Mat) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.singular_values().max()
}

pub fn smallest_singular_value(a: &Mat) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.singular_values().min()
}

/// Rectangular identity `[I 0]` / `[I; 0]`.
pub fn eye(rows: usize, cols: usize) -> Mat {
    Mat::from_fn(rows, cols, |i, j| if i == j { 1.0 } else { 0.0 })
}

pub fn from_rows(rows: &[Vec<f64>]) -> Option<Mat> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        return None;
    }
    Some(Mat::from_fn(r, c, |i, j| rows[i][j]))
}

/// Row-major copy, the layout the path engine works in.
pub fn to_row_major(a: &Mat) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len());
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            out.push(a[(i, j)]);
        }
    }
    out
}

/// `out = A x` for a row-major `rows × cols` matrix.
#[inline]
pub fn matvec(a: &[f64], rows: usize, cols: usize, x: &[f64], out: &mut [f64]) {
    debug_assert_eq!(a.len(), rows * cols);
    for (i, o) in out.iter_mut().enumerate().take(rows) {
        let row = &a[i * cols..(i + 1) * cols];
        *o = row.iter().zip(x).map(|(p, q)| p * q).sum();
    }
}

/// `out += A x` for a row-major matrix.
#[inline]
pub fn matvec_add(a: &[f64], rows: usize, cols: usize, x: &[f64], out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate().take(rows) {
        let row = &a[i * cols..(i + 1) * cols];
        *o += row.iter().zip(x).map(|(p, q)| p * q).sum::<f64>();
    }
}

#[inline]
pub fn norm_sq(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn diagonal_exponential_is_entrywise() {
        let a = Mat::from_diagonal(&Vector::from_vec(vec![-1.0, -4.0]));
        let e = expm(&a, 0.5);
        assert_relative_eq!(e[(0, 0)], (-0.5f64).exp(), epsilon = 1e-15);
        assert_relative_eq!(e[(1, 1)], (-2.0f64).exp(), epsilon = 1e-15);
        assert_eq!(e[(0, 1)], 0.0);
    }

    #[test]
    fn identity_at_zero_time() {
        let a = Mat::from_diagonal(&Vector::from_vec(vec![-1.0, -4.0]));
        let v = Vector::from_vec(vec![0.3, -2.5]);
        assert_eq!(semigroup_apply(&a, 0.0, &v), v);
    }

    #[test]
    fn scalar_exponential() {
        let a = Mat::from_element(1, 1, -1.0);
        let v = Vector::from_element(1, 1.0);
        assert_relative_eq!(semigroup_apply(&a, 1.0, &v)[0], 0.36787944117144233, epsilon = 1e-15);
    }

    #[test]
    fn phi1_routes_agree() {
        // Off-diagonal generator, both the series and the solve branch
        // against the augmented exponential.
        let a = Mat::from_row_slice(3, 3, &[-2.0, 0.5, 0.0, 0.1, -1.0, 0.3, 0.0, -0.2, -3.0]);
        for &dt in &[1e-3, 0.05, 0.7, 2.0] {
            let n = 3;
            let mut aug = Mat::zeros(2 * n, 2 * n);
            aug.view_mut((0, 0), (n, n)).copy_from(&(&a * dt));
            aug.view_mut((0, n), (n, n)).fill_with_identity();
            let oracle = aug.exp().view((0, n), (n, n)).into_owned();
            let got = phi1(&a, dt);
            assert!((got - oracle).norm() < 1e-12, "dt = {dt}");
        }
    }

    #[test]
    fn phi1_on_singular_generator() {
        let a = Mat::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        // Φ₁ = I + A dt / 2 exactly for a nilpotent A.
        let got = phi1(&a, 3.0);
        assert_relative_eq!(got[(0, 1)], 1.5, epsilon = 1e-12);
        assert_relative_eq!(got[(0, 0)], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn psd_factor_reconstructs() {
        let c = Mat::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let l = psd_factor(&c);
        assert!((&l * l.transpose() - &c).norm() < 1e-14);
    }
}
