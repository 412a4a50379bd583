//! Composite Gauss–Legendre quadrature with panel doubling, and
//! Gauss–Hermite rules for Gaussian expectations.

use std::sync::OnceLock;

use crate::linalg::Mat;

/// Relative tolerance between successive panel refinements.
pub const DEFAULT_REL_TOL: f64 = 1e-12;
const ORDER: usize = 10;
const MAX_PANELS: usize = 1 << 14;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let pk = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = pk;
            }
            let pn = if n == 0 {
                1.0
            } else if n == 1 {
                x
            } else {
                p1
            };
            let pnm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pnm1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Gauss–Hermite rule for the standard normal weight (Golub–Welsch);
/// weights sum to one.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    if n == 0 {
        return (Vec::new(), Vec::new());
    }
    let mut jac = Mat::zeros(n, n);
    for k in 1..n {
        let b = (k as f64).sqrt();
        jac[(k - 1, k)] = b;
        jac[(k, k - 1)] = b;
    }
    let eig = nalgebra::SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    pairs.into_iter().map(|(x, w)| (x, w / total)).unzip()
}

fn rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(ORDER))
}

fn composite<F: Fn(f64) -> Mat>(f: &F, a: f64, b: f64, panels: usize, shape: (usize, usize)) -> Mat {
    let (nodes, weights) = rule();
    let h = (b - a) / panels as f64;
    let mut acc = Mat::zeros(shape.0, shape.1);
    for p in 0..panels {
        let lo = a + p as f64 * h;
        let mid = lo + 0.5 * h;
        for (x, w) in nodes.iter().zip(weights) {
            acc += f(mid + 0.5 * h * x) * (0.5 * h * w);
        }
    }
    acc
}

/// `∫_a^b f(s) ds` for a matrix-valued integrand, refining until
/// successive estimates agree to `rel_tol` in Frobenius norm.
pub fn integrate_mat<F: Fn(f64) -> Mat>(f: F, a: f64, b: f64, rel_tol: f64) -> Mat {
    if b <= a {
        let probe = f(a);
        return Mat::zeros(probe.nrows(), probe.ncols());
    }
    let probe = f(a);
    let shape = (probe.nrows(), probe.ncols());
    let mut panels = 1;
    let mut prev = composite(&f, a, b, panels, shape);
    loop {
        panels *= 2;
        let next = composite(&f, a, b, panels, shape);
        let diff = (&next - &prev).norm();
        let scale = next.norm();
        if diff <= rel_tol * scale || diff == 0.0 || panels >= MAX_PANELS {
            return next;
        }
        prev = next;
    }
}

/// Scalar variant of [`integrate_mat`].
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> f64 {
    if b == a {
        return 0.0;
    }
    if b < a {
        return -integrate(f, b, a, rel_tol);
    }
    let (nodes, weights) = rule();
    let eval = |panels: usize| {
        let h = (b - a) / panels as f64;
        let mut acc = 0.0;
        for p in 0..panels {
            let mid = a + (p as f64 + 0.5) * h;
            for (x, w) in nodes.iter().zip(weights) {
                acc += f(mid + 0.5 * h * x) * 0.5 * h * w;
            }
        }
        acc
    };
    let mut panels = 1;
    let mut prev = eval(panels);
    loop {
        panels *= 2;
        let next = eval(panels);
        let diff = (next - prev).abs();
        if diff <= rel_tol * next.abs() || diff == 0.0 || panels >= MAX_PANELS {
            return next;
        }
        prev = next;
    }
}
