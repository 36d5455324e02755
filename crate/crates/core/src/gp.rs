//! Exact Gaussian-process regression.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{build_kernel, SpectralDensity, SpectralKernel};
use crate::linalg::{min_symmetric_eigenvalue, robust_cholesky, JitteredCholesky};
use crate::optimize::{Evaluation, NelderMead};
use crate::rng::substream;
use crate::spaces::{SpaceId, SpacePoint};

/// Observation noise: i.i.d. variance or a full covariance.
#[derive(Clone, Debug, PartialEq)]
pub enum Noise {
    Scalar(f64),
    Matrix(DMatrix<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub inputs: Vec<SpacePoint>,
    pub targets: DVector<f64>,
    pub noise: Noise,
}

impl Dataset {
    pub fn new(inputs: Vec<SpacePoint>, targets: Vec<f64>, noise: Noise) -> Result<Self> {
        if inputs.len() != targets.len() {
            return Err(Error::Config(format!(
                "{} inputs but {} targets",
                inputs.len(),
                targets.len()
            )));
        }
        match &noise {
            Noise::Scalar(s) if !(*s >= 0.0 && s.is_finite()) => {
                return Err(Error::Domain(format!("noise variance must be >= 0, got {s}")))
            }
            Noise::Matrix(m) => {
                if m.nrows() != inputs.len() || m.ncols() != inputs.len() {
                    return Err(Error::Config(format!(
                        "noise covariance is {}x{}, expected {n}x{n}",
                        m.nrows(),
                        m.ncols(),
                        n = inputs.len()
                    )));
                }
                let min = min_symmetric_eigenvalue(m);
                if min < -1e-12 {
                    return Err(Error::Domain(format!(
                        "noise covariance is not positive semidefinite (min eigenvalue {min:e})"
                    )));
                }
            }
            _ => {}
        }
        Ok(Self { inputs, targets: DVector::from_vec(targets), noise })
    }

    pub fn empty() -> Self {
        Self { inputs: Vec::new(), targets: DVector::zeros(0), noise: Noise::Scalar(0.0) }
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn noise_matrix(&self) -> DMatrix<f64> {
        let n = self.len();
        match &self.noise {
            Noise::Scalar(s) => DMatrix::from_diagonal_element(n, n, *s),
            Noise::Matrix(m) => m.clone(),
        }
    }

    /// A draw `ε ∼ N(0, Σ)`.
    pub fn sample_noise(&self, rng: &mut crate::rng::Rng) -> Result<DVector<f64>> {
        let n = self.len();
        let z = DVector::from_fn(n, |_, _| StandardNormal.sample(rng));
        match &self.noise {
            Noise::Scalar(s) => Ok(z * s.sqrt()),
            Noise::Matrix(m) => {
                let scale = m.diagonal().max().max(f64::MIN_POSITIVE);
                Ok(robust_cholesky(m, scale)?.l() * z)
            }
        }
    }
}

/// Conditioned GP with a cached factorisation of `K_xx + Σ`.
#[derive(Clone, Debug)]
pub struct Posterior {
    kernel: SpectralKernel,
    data: Dataset,
    factor: Option<JitteredCholesky>,
    weights: DVector<f64>,
}

impl Posterior {
    pub fn new(kernel: SpectralKernel, data: Dataset) -> Result<Self> {
        for x in &data.inputs {
            kernel.space().check_point(x)?;
        }
        if data.is_empty() {
            return Ok(Self { kernel, data, factor: None, weights: DVector::zeros(0) });
        }
        let system = kernel.kernel_matrix(&data.inputs, &data.inputs)? + data.noise_matrix();
        let factor = robust_cholesky(&system, kernel.variance())?;
        let weights = factor.solve(&data.targets);
        Ok(Self { kernel, data, factor: Some(factor), weights })
    }

    pub fn kernel(&self) -> &SpectralKernel {
        &self.kernel
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    /// Jitter added to `K_xx + Σ` (0 when none was needed).
    pub fn jitter(&self) -> f64 {
        self.factor.as_ref().map_or(0.0, |f| f.jitter)
    }

    /// `(K_xx + Σ)⁻¹ y`.
    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    pub fn factor(&self) -> Option<&JitteredCholesky> {
        self.factor.as_ref()
    }

    pub fn mean(&self, query: &[SpacePoint]) -> Result<DVector<f64>> {
        if self.data.is_empty() {
            return Ok(DVector::zeros(query.len()));
        }
        let kqx = self.kernel.kernel_matrix(query, &self.data.inputs)?;
        Ok(kqx * &self.weights)
    }

    /// Posterior mean and covariance at `query`.
    pub fn mean_cov(&self, query: &[SpacePoint]) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let kqq = self.kernel.kernel_matrix(query, query)?;
        let Some(factor) = &self.factor else {
            return Ok((DVector::zeros(query.len()), kqq));
        };
        let kxq = self.kernel.kernel_matrix(&self.data.inputs, query)?;
        let mean = kxq.transpose() * &self.weights;
        let v = factor
            .factor
            .l_dirty()
            .solve_lower_triangular(&kxq)
            .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
        let cov = kqq - v.transpose() * v;
        let cov = (&cov + cov.transpose()) * 0.5;
        Ok((mean, cov))
    }

    /// Posterior mean and pointwise variance.
    pub fn mean_var(&self, query: &[SpacePoint]) -> Result<(DVector<f64>, DVector<f64>)> {
        let prior = self.kernel.variance();
        let Some(factor) = &self.factor else {
            return Ok((DVector::zeros(query.len()), DVector::from_element(query.len(), prior)));
        };
        let kxq = self.kernel.kernel_matrix(&self.data.inputs, query)?;
        let mean = kxq.transpose() * &self.weights;
        let v = factor
            .factor
            .l_dirty()
            .solve_lower_triangular(&kxq)
            .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
        let var = DVector::from_fn(query.len(), |j, _| {
            let q = &query[j];
            let kqq = self.kernel.value(q, q).unwrap_or(prior);
            (kqq - v.column(j).norm_squared()).max(0.0)
        });
        Ok((mean, var))
    }
}

/// Free-function form of [`Posterior::mean_cov`].
pub fn posterior_mean_cov(p: &Posterior, query: &[SpacePoint]) -> Result<(DVector<f64>, DMatrix<f64>)> {
    p.mean_cov(query)
}

const LN_2PI: f64 = 1.837_877_066_409_345_3;

fn lml_from_matrix(system: &DMatrix<f64>, targets: &DVector<f64>, scale: f64) -> Result<f64> {
    let n = targets.len();
    if n == 0 {
        return Ok(0.0);
    }
    let factor = robust_cholesky(system, scale)?;
    let alpha = factor.solve(targets);
    Ok(-0.5 * targets.dot(&alpha) - 0.5 * factor.log_determinant() - 0.5 * n as f64 * LN_2PI)
}

/// `log N(y | 0, K_xx + Σ)`.
pub fn log_marginal_likelihood(k: &SpectralKernel, d: &Dataset) -> Result<f64> {
    if d.is_empty() {
        return Ok(0.0);
    }
    let system = k.kernel_matrix(&d.inputs, &d.inputs)? + d.noise_matrix();
    lml_from_matrix(&system, &d.targets, k.variance())
}

/// Starting point of a fit. `nu` is ignored for the heat kernel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub nu: Option<f64>,
    pub kappa: f64,
    pub sigma2: f64,
    pub noise: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Heat,
    Matern,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RestartTrace {
    pub restart: usize,
    pub start: Vec<f64>,
    pub best: Vec<f64>,
    pub log_likelihood: f64,
    pub evaluations: Vec<Evaluation>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: Hyperparameters,
    pub log_likelihood: f64,
    pub initial_log_likelihood: f64,
    /// False when no restart improved on the initial parameters.
    pub improved: bool,
    pub trace: Vec<RestartTrace>,
}

pub const FIT_RESTARTS: usize = 5;
const LOG_BOUND: f64 = 25.0;

fn density_for(kind: KernelKind, nu: Option<f64>, kappa: f64, sigma2: f64) -> Result<SpectralDensity> {
    match kind {
        KernelKind::Heat => SpectralDensity::heat(kappa, sigma2),
        KernelKind::Matern => SpectralDensity::matern(
            nu.ok_or_else(|| Error::Config("a Matérn fit needs nu".into()))?,
            kappa,
            sigma2,
        ),
    }
}

/// Maximise the log marginal likelihood over `(log κ, log σ², log noise)`
/// with Nelder–Mead and [`FIT_RESTARTS`] restarts (the first from `init`).
/// `ν` stays fixed. The noise is fitted only for scalar-noise datasets; a
/// full covariance in `d` is kept as given.
pub fn fit_hyperparameters(
    space: &SpaceId,
    kind: KernelKind,
    d: &Dataset,
    init: Hyperparameters,
    budget: usize,
    seed: u64,
) -> Result<FitResult> {
    if !(init.kappa > 0.0 && init.sigma2 > 0.0 && init.noise >= 0.0) {
        return Err(Error::Domain("initial kappa and sigma2 must be positive, noise >= 0".into()));
    }
    if d.is_empty() {
        return Err(Error::Config("cannot fit hyperparameters without data".into()));
    }
    let base = build_kernel(space, &density_for(kind, init.nu, init.kappa, init.sigma2)?, budget)?;
    for x in &d.inputs {
        space.check_point(x)?;
    }
    let mats = base.level_matrices(&d.inputs, &d.inputs)?;
    let fit_noise = matches!(d.noise, Noise::Scalar(_));
    let fixed_noise = d.noise_matrix();
    let n = d.len();

    let objective = |p: &[f64]| -> f64 {
        if p.iter().any(|v| v.abs() > LOG_BOUND) {
            return f64::INFINITY;
        }
        let (kappa, sigma2) = (p[0].exp(), p[1].exp());
        let Ok(density) = density_for(kind, init.nu, kappa, sigma2) else {
            return f64::INFINITY;
        };
        let Ok(k) = base.with_density(&density) else {
            return f64::INFINITY;
        };
        let mut system = k.combine(&mats);
        if fit_noise {
            let s = p[2].exp();
            for i in 0..n {
                system[(i, i)] += s;
            }
        } else {
            system += &fixed_noise;
        }
        match lml_from_matrix(&system, &d.targets, sigma2) {
            Ok(v) => -v,
            Err(_) => f64::INFINITY,
        }
    };

    let noise0 = if fit_noise { init.noise.max(1e-8) } else { 1.0 };
    let mut x0 = vec![init.kappa.ln(), init.sigma2.ln()];
    if fit_noise {
        x0.push(noise0.ln());
    }
    let initial = -objective(&x0);
    let nm = NelderMead::default();
    let runs: Vec<RestartTrace> = (0..FIT_RESTARTS)
        .into_par_iter()
        .map(|r| {
            let start: Vec<f64> = if r == 0 {
                x0.clone()
            } else {
                let mut rng = substream(seed, r as u64);
                x0.iter()
                    .map(|v| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        v + z
                    })
                    .collect()
            };
            let m = nm.minimize(&objective, &start);
            RestartTrace {
                restart: r,
                start,
                best: m.x,
                log_likelihood: -m.value,
                evaluations: m.trace,
            }
        })
        .collect();
    let best = runs
        .iter()
        .filter(|r| r.log_likelihood.is_finite())
        .max_by(|a, b| a.log_likelihood.total_cmp(&b.log_likelihood).then(b.restart.cmp(&a.restart)));
    let (params, value, improved) = match best {
        Some(b) if b.log_likelihood > initial => {
            let noise = if fit_noise { b.best[2].exp() } else { init.noise };
            (
                Hyperparameters { nu: init.nu, kappa: b.best[0].exp(), sigma2: b.best[1].exp(), noise },
                b.log_likelihood,
                true,
            )
        }
        _ => (init, initial, false),
    };
    Ok(FitResult { params, log_likelihood: value, initial_log_likelihood: initial, improved, trace: runs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use crate::spaces::haar_sample_space;

    fn s2_kernel() -> SpectralKernel {
        build_kernel(&SpaceId::sphere(2), &SpectralDensity::heat(0.5, 1.0).unwrap(), 15).unwrap()
    }

    #[test]
    fn empty_dataset_gives_prior() {
        let k = s2_kernel();
        let q = haar_sample_space(k.space(), &mut seeded(1), 4);
        let p = Posterior::new(k.clone(), Dataset::empty()).unwrap();
        let (m, c) = p.mean_cov(&q).unwrap();
        assert!(m.iter().all(|v| *v == 0.0));
        assert_eq!(c, k.kernel_matrix(&q, &q).unwrap());
    }

    #[test]
    fn noiseless_single_observation_interpolates() {
        let k = s2_kernel();
        let x = haar_sample_space(k.space(), &mut seeded(2), 1);
        let d = Dataset::new(x.clone(), vec![0.7], Noise::Scalar(0.0)).unwrap();
        let p = Posterior::new(k, d).unwrap();
        let (m, c) = p.mean_cov(&x).unwrap();
        assert!((m[0] - 0.7).abs() < 1e-8);
        assert!(c[(0, 0)] <= 1e-8);
    }

    #[test]
    fn single_datum_likelihood() {
        let k = s2_kernel();
        let x = haar_sample_space(k.space(), &mut seeded(3), 1);
        let d = Dataset::new(x, vec![0.0], Noise::Scalar(0.25)).unwrap();
        let v = log_marginal_likelihood(&k, &d).unwrap();
        let expect = -0.5 * (2.0 * std::f64::consts::PI * 1.25).ln();
        assert!((v - expect).abs() < 1e-12);
    }

    #[test]
    fn dataset_validation() {
        let x = vec![SpacePoint::vector(vec![1.0, 0.0, 0.0])];
        assert!(Dataset::new(x.clone(), vec![1.0, 2.0], Noise::Scalar(0.1)).is_err());
        assert!(Dataset::new(x.clone(), vec![1.0], Noise::Scalar(-0.1)).is_err());
        let bad = DMatrix::from_element(1, 1, -1.0);
        assert!(Dataset::new(x, vec![1.0], Noise::Matrix(bad)).is_err());
    }

    #[test]
    fn full_noise_matrix_matches_scalar_noise() {
        let k = s2_kernel();
        let x = haar_sample_space(k.space(), &mut seeded(4), 5);
        let y = vec![0.1, -0.3, 0.2, 0.5, 0.0];
        let a = Dataset::new(x.clone(), y.clone(), Noise::Scalar(0.04)).unwrap();
        let b = Dataset::new(x, y, Noise::Matrix(DMatrix::from_diagonal_element(5, 5, 0.04))).unwrap();
        let la = log_marginal_likelihood(&k, &a).unwrap();
        let lb = log_marginal_likelihood(&k, &b).unwrap();
        assert!((la - lb).abs() < 1e-12);
    }
}
