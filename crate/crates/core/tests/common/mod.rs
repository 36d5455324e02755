//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use liekernels::groups::GroupElement;
use liekernels::spaces::SpacePoint;
use nalgebra::{DMatrix, DVector, Matrix3};
use rand::Rng as _;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Chebyshev polynomial of the second kind.
pub fn chebyshev_u(n: usize, x: f64) -> f64 {
    let (mut a, mut b) = (1.0, 2.0 * x);
    if n == 0 {
        return a;
    }
    for _ in 1..n {
        let c = 2.0 * x * b - a;
        a = b;
        b = c;
    }
    b
}

/// Legendre polynomial by Bonnet's recurrence.
pub fn legendre(l: usize, t: f64) -> f64 {
    let (mut a, mut b) = (1.0, t);
    if l == 0 {
        return a;
    }
    for k in 1..l {
        let k = k as f64;
        let c = ((2.0 * k + 1.0) * t * b - k * a) / (k + 1.0);
        a = b;
        b = c;
    }
    b
}

/// Spectral weights of a kernel on S², as a function of the Laplacian
/// eigenvalue `λ`.
#[derive(Clone, Copy, Debug)]
pub enum S2Density {
    Heat { kappa: f64 },
    Matern { nu: f64, kappa: f64 },
}

impl S2Density {
    pub fn weight(&self, lambda: f64) -> f64 {
        match *self {
            Self::Heat { kappa } => (-kappa * kappa * lambda / 2.0).exp(),
            Self::Matern { nu, kappa } => {
                let base = 2.0 * nu / (kappa * kappa);
                ((base + lambda) / base).powf(-nu - 1.0)
            }
        }
    }
}

/// `σ² Σ_ℓ (2ℓ+1) a_ℓ P_ℓ(t) / Σ_ℓ (2ℓ+1) a_ℓ` over the given degrees, with
/// `a_ℓ = weight(scale · ℓ(ℓ+1))`.
pub fn s2_series(density: S2Density, sigma2: f64, scale: f64, degrees: impl Iterator<Item = usize> + Clone, t: f64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for l in degrees {
        let w = (2 * l + 1) as f64 * density.weight(scale * (l * (l + 1)) as f64);
        num += w * legendre(l, t);
        den += w;
    }
    sigma2 * num / den
}

/// Adaptive Simpson quadrature.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    #[allow(clippy::too_many_arguments)]
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64, m: f64, fm: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, fa, m, fm, lm, flm, left, tol / 2.0, depth - 1)
            + rec(f, m, fm, b, fb, rm, frm, right, tol / 2.0, depth - 1)
    }
    let (fa, fb) = (f(a), f(b));
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    rec(f, a, fa, b, fb, m, fm, whole, tol, 50)
}

/// Rotation from a uniformly random unit quaternion.
pub fn random_rotation(r: &mut ChaCha8Rng) -> Matrix3<f64> {
    let q = loop {
        let v: [f64; 4] = std::array::from_fn(|_| r.random_range(-1.0..1.0));
        let n2: f64 = v.iter().map(|x| x * x).sum();
        if n2 > 1e-6 && n2 <= 1.0 {
            let n = n2.sqrt();
            break v.map(|x| x / n);
        }
    };
    let [w, x, y, z] = q;
    Matrix3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - z * w),
        2.0 * (x * z + y * w),
        2.0 * (x * y + z * w),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - x * w),
        2.0 * (x * z - y * w),
        2.0 * (y * z + x * w),
        1.0 - 2.0 * (x * x + y * y),
    )
}

pub fn rotate(m: &Matrix3<f64>, p: &SpacePoint) -> SpacePoint {
    let v = p.as_vector().expect("vector point");
    let w = m * nalgebra::Vector3::new(v[0], v[1], v[2]);
    SpacePoint::vector(vec![w[0], w[1], w[2]])
}

/// Rotation of `R³` about the z axis by `theta`.
pub fn rot_z(theta: f64) -> DMatrix<f64> {
    let (s, c) = theta.sin_cos();
    DMatrix::from_row_slice(3, 3, &[c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0])
}

pub fn element(p: &SpacePoint) -> &GroupElement {
    p.as_element().expect("group point")
}

/// Monte Carlo mean and standard error of a sample.
pub fn mean_se(xs: impl ExactSizeIterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.clone().sum::<f64>() / n;
    let var = xs.map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Largest `|Ê[f_i f_j] − K_ij| / SE_ij` for zero-mean draws (columns of
/// `draws`).
pub fn covariance_z_score(draws: &DMatrix<f64>, k: &DMatrix<f64>) -> f64 {
    let n = draws.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            let prods = draws.row(i).iter().zip(draws.row(j).iter()).map(|(a, b)| a * b).collect::<Vec<_>>();
            let (m, se) = mean_se(prods.iter().copied());
            worst = worst.max((m - k[(i, j)]).abs() / se.max(1e-300));
        }
    }
    worst
}

/// Dense Gaussian log-density of `y ∼ N(0, c)` via LU (independent of
/// the Cholesky path in the library).
pub fn mvn_log_density(y: &DVector<f64>, c: &DMatrix<f64>) -> f64 {
    let lu = c.clone().lu();
    let det = lu.determinant();
    let sol = lu.solve(y).unwrap();
    -0.5 * y.dot(&sol) - 0.5 * det.ln() - 0.5 * y.len() as f64 * (2.0 * std::f64::consts::PI).ln()
}
