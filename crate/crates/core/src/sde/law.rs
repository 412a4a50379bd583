use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector};
use crate::model::OperatorSet;
use crate::quadrature::{integrate_mat, DEFAULT_REL_TOL};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaussianLaw {
    pub mean: Vec<f64>,
    /// Row-major covariance.
    pub cov: Vec<f64>,
    pub dim: usize,
}

impl GaussianLaw {
    /// Symmetrizes `cov` and clips eigenvalues in `[−10⁻¹², 0)` to zero.
    pub fn new(mean: Vector, cov: Mat) -> Result<Self> {
        let n = mean.len();
        if cov.shape() != (n, n) {
            return Err(Error::DimensionMismatch {
                what: "covariance",
                expected: n,
                got: cov.nrows(),
            });
        }
        let eig = linalg::sym_eigen(&cov);
        let scale = eig.eigenvalues.amax().max(1.0);
        if eig.eigenvalues.min() < -1e-12 * scale {
            return Err(Error::Domain(format!(
                "covariance has eigenvalue {:.3e}",
                eig.eigenvalues.min()
            )));
        }
        let clipped = eig.eigenvalues.map(|v| v.max(0.0));
        let c = &eig.eigenvectors * Mat::from_diagonal(&clipped) * eig.eigenvectors.transpose();
        let c = (&c + c.transpose()) * 0.5;
        Ok(GaussianLaw {
            mean: mean.iter().copied().collect(),
            cov: linalg::to_row_major(&c),
            dim: n,
        })
    }

    pub fn mean_vector(&self) -> Vector {
        Vector::from_column_slice(&self.mean)
    }

    pub fn cov_matrix(&self) -> Mat {
        Mat::from_row_slice(self.dim, self.dim, &self.cov)
    }

    /// `E|Z|² = |m|² + tr C`.
    pub fn mean_square(&self) -> f64 {
        linalg::norm_sq(&self.mean) + (0..self.dim).map(|i| self.cov[i * self.dim + i]).sum::<f64>()
    }
}

/// Law of the linear flow at `t` started from `z` at `s`.
pub fn ou_transition_law(ops: &OperatorSet, s: f64, t: f64, z: &[f64]) -> Result<GaussianLaw> {
    if t < s {
        return Err(Error::Domain(format!("transition from s = {s} to earlier t = {t}")));
    }
    let d = ops.dim();
    if z.len() != d {
        return Err(Error::DimensionMismatch {
            what: "start point",
            expected: d,
            got: z.len(),
        });
    }
    let tau = t - s;
    let m = ops.augmented_drift();
    let mean = linalg::expm(&m, tau) * Vector::from_column_slice(z);
    let cov = transition_covariance(ops, tau);
    GaussianLaw::new(mean, cov)
}

/// `∫₀^τ e^{Mu} GG* e^{M*u} du`.
pub(crate) fn transition_covariance(ops: &OperatorSet, tau: f64) -> Mat {
    let d = ops.dim();
    if tau == 0.0 {
        return Mat::zeros(d, d);
    }
    let m = ops.augmented_drift();
    let g = ops.augmented_noise();
    let gg = &g * g.transpose();
    if gg.iter().all(|v| *v == 0.0) {
        return Mat::zeros(d, d);
    }
    let c = integrate_mat(
        |u| {
            let e = linalg::expm(&m, u);
            &e * &gg * e.transpose()
        },
        0.0,
        tau,
        DEFAULT_REL_TOL,
    );
    (&c + c.transpose()) * 0.5
}

/// Van Loan's block-exponential formula for the same covariance; an
/// independent route used to cross-check the quadrature.
pub fn van_loan_covariance(ops: &OperatorSet, tau: f64) -> Mat {
    let d = ops.dim();
    let m = ops.augmented_drift();
    let g = ops.augmented_noise();
    let mut big = Mat::zeros(2 * d, 2 * d);
    big.view_mut((0, 0), (d, d)).copy_from(&(-&m));
    big.view_mut((0, d), (d, d)).copy_from(&(&g * g.transpose()));
    big.view_mut((d, d), (d, d)).copy_from(&m.transpose());
    let e = (big * tau).exp();
    let f22 = e.view((d, d), (d, d)).into_owned();
    let f12 = e.view((0, d), (d, d)).into_owned();
    f22.transpose() * f12
}
