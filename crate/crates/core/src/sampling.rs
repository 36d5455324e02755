//! Random-phase Fourier features, pathwise posterior samples and
//! Karhunen–Loève bases.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::Dataset;
use crate::kernels::{KernelInfo, SpectralKernel};
use crate::linalg::{min_symmetric_eigenvalue, robust_cholesky};
use crate::repr::Signature;
use crate::rng::{derive_seed, seeded};
use crate::spaces::{haar_sample_space, SpaceId, SpacePoint};

/// A random function that can be evaluated on point sets.
pub trait RandomFunction {
    fn evaluate(&self, xs: &[SpacePoint]) -> Result<DVector<f64>>;

    fn evaluate_one(&self, x: &SpacePoint) -> Result<f64> {
        Ok(self.evaluate(std::slice::from_ref(x))?[0])
    }
}

/// One retained level of a feature basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureLevel {
    /// Index into [`SpectralKernel::levels`].
    pub level: usize,
    pub signature: Option<Signature>,
    /// Standard deviation of the weights, `√c_λ`.
    pub weight_std: f64,
    /// Real-pairing multiplier: 1 for self-conjugate levels, 2 when the
    /// conjugate level is folded in, `√2` when it lies beyond the budget.
    pub pairing: f64,
}

/// Shared Haar phases plus per-level scalings.
#[derive(Clone, Debug)]
pub struct FeatureBasis {
    kernel: SpectralKernel,
    phases: Vec<SpacePoint>,
    levels: Vec<FeatureLevel>,
}

/// Serializable summary of a [`FeatureBasis`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureBasisRecord {
    pub kernel: KernelInfo,
    pub num_phases: usize,
    pub phases: Vec<Vec<f64>>,
    pub levels: Vec<FeatureLevel>,
}

/// Basis plus weights: enough to re-evaluate a prior draw.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorSampleRecord {
    pub basis: FeatureBasisRecord,
    pub weights: Vec<f64>,
}

pub fn build_feature_basis(k: &SpectralKernel, num_phases: usize, seed: u64) -> Result<FeatureBasis> {
    if num_phases == 0 {
        return Err(Error::Config("need at least one phase".into()));
    }
    let phases = haar_sample_space(k.space(), &mut seeded(seed), num_phases);
    let present: std::collections::BTreeSet<&Signature> =
        k.levels().iter().filter_map(|l| l.signature()).collect();
    let mut levels = Vec::new();
    for (i, (lvl, c)) in k.levels().iter().zip(k.coefficients()).enumerate() {
        let pairing = match lvl.representation() {
            Some(r) if !r.self_conjugate => {
                if !present.contains(&r.conjugate_signature) {
                    std::f64::consts::SQRT_2
                } else if r.signature < r.conjugate_signature {
                    2.0
                } else {
                    continue;
                }
            }
            _ => 1.0,
        };
        levels.push(FeatureLevel {
            level: i,
            signature: lvl.signature().cloned(),
            weight_std: c.sqrt(),
            pairing,
        });
    }
    Ok(FeatureBasis { kernel: k.clone(), phases, levels })
}

impl FeatureBasis {
    pub fn kernel(&self) -> &SpectralKernel {
        &self.kernel
    }

    pub fn space(&self) -> &SpaceId {
        self.kernel.space()
    }

    pub fn phases(&self) -> &[SpacePoint] {
        &self.phases
    }

    pub fn levels(&self) -> &[FeatureLevel] {
        &self.levels
    }

    /// Number of weights, `L · (#retained levels)`.
    pub fn num_features(&self) -> usize {
        self.phases.len() * self.levels.len()
    }

    pub fn record(&self) -> FeatureBasisRecord {
        FeatureBasisRecord {
            kernel: self.kernel.info(),
            num_phases: self.phases.len(),
            phases: self.phases.iter().map(SpacePoint::to_flat).collect(),
            levels: self.levels.clone(),
        }
    }

    /// Feature matrix: row `i` holds the features of `xs[i]`, ordered
    /// phase-major.
    pub fn features(&self, xs: &[SpacePoint]) -> Result<DMatrix<f64>> {
        let scale = 1.0 / (self.phases.len() as f64).sqrt();
        let per = self.levels.len();
        let rows: Vec<Result<Vec<f64>>> = xs
            .par_iter()
            .map(|x| {
                let mut row = Vec::with_capacity(self.num_features());
                for u in &self.phases {
                    let vals = self.kernel.level_values(x, u)?;
                    row.extend(
                        self.levels.iter().map(|l| scale * l.weight_std * l.pairing * vals[l.level]),
                    );
                }
                Ok(row)
            })
            .collect();
        let mut out = DMatrix::zeros(xs.len(), self.phases.len() * per);
        for (i, row) in rows.into_iter().enumerate() {
            for (j, v) in row?.into_iter().enumerate() {
                out[(i, j)] = v;
            }
        }
        Ok(out)
    }
}

/// A draw `f̂ = Σ_λ (1/√L) Σ_l w_l^λ √c_λ m_λ Φ_λ(·, u_l)`.
#[derive(Clone, Debug)]
pub struct PriorSample {
    basis: FeatureBasis,
    weights: DVector<f64>,
}

pub fn prior_sample(basis: &FeatureBasis, seed: u64) -> PriorSample {
    let mut rng = seeded(seed);
    let weights = DVector::from_fn(basis.num_features(), |_, _| StandardNormal.sample(&mut rng));
    PriorSample { basis: basis.clone(), weights }
}

impl PriorSample {
    pub fn basis(&self) -> &FeatureBasis {
        &self.basis
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    pub fn record(&self) -> PriorSampleRecord {
        PriorSampleRecord { basis: self.basis.record(), weights: self.weights.iter().copied().collect() }
    }

    /// Same basis, new weights.
    pub fn redraw(&self, seed: u64) -> Self {
        prior_sample(&self.basis, seed)
    }
}

impl RandomFunction for PriorSample {
    fn evaluate(&self, xs: &[SpacePoint]) -> Result<DVector<f64>> {
        Ok(self.basis.features(xs)? * &self.weights)
    }
}

/// `f(·) + K(·, X)(K_XX + Σ)⁻¹(y − f(X) − ε)`.
#[derive(Clone, Debug)]
pub struct PosteriorSample<P> {
    prior: P,
    kernel: SpectralKernel,
    inputs: Vec<SpacePoint>,
    update: DVector<f64>,
    jitter: f64,
}

pub fn pathwise_posterior_sample<P: RandomFunction + Clone>(
    prior: &P,
    k: &SpectralKernel,
    data: &Dataset,
    seed: u64,
) -> Result<PosteriorSample<P>> {
    for x in &data.inputs {
        k.space().check_point(x)?;
    }
    if data.is_empty() {
        return Ok(PosteriorSample {
            prior: prior.clone(),
            kernel: k.clone(),
            inputs: Vec::new(),
            update: DVector::zeros(0),
            jitter: 0.0,
        });
    }
    let system = k.kernel_matrix(&data.inputs, &data.inputs)? + data.noise_matrix();
    let factor = robust_cholesky(&system, k.variance())?;
    let eps = data.sample_noise(&mut seeded(seed))?;
    let residual = &data.targets - prior.evaluate(&data.inputs)? - eps;
    Ok(PosteriorSample {
        prior: prior.clone(),
        kernel: k.clone(),
        inputs: data.inputs.clone(),
        update: factor.solve(&residual),
        jitter: factor.jitter,
    })
}

impl<P> PosteriorSample<P> {
    pub fn prior(&self) -> &P {
        &self.prior
    }

    /// Diagonal jitter used in the solve.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }
}

impl<P: RandomFunction> RandomFunction for PosteriorSample<P> {
    fn evaluate(&self, xs: &[SpacePoint]) -> Result<DVector<f64>> {
        let f = self.prior.evaluate(xs)?;
        if self.inputs.is_empty() {
            return Ok(f);
        }
        Ok(f + self.kernel.kernel_matrix(xs, &self.inputs)? * &self.update)
    }
}

/// Points whose Gram matrix under a single-level kernel is nonsingular.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FundamentalSet {
    pub points: Vec<SpacePoint>,
    pub gram: DMatrix<f64>,
    pub min_eigenvalue: f64,
}

pub const FUNDAMENTAL_SET_RETRIES: usize = 100;

fn gram<F>(kernel: &F, xs: &[SpacePoint]) -> Result<DMatrix<f64>>
where
    F: Fn(&SpacePoint, &SpacePoint) -> Result<f64>,
{
    let n = xs.len();
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = kernel(&xs[i], &xs[j])?;
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    Ok(g)
}

/// Sample `n` Haar points until their Gram matrix has minimum eigenvalue
/// above `1e-8 · trace / n`.
pub fn find_fundamental_set<F>(kernel: F, n: usize, space: &SpaceId, seed: u64) -> Result<FundamentalSet>
where
    F: Fn(&SpacePoint, &SpacePoint) -> Result<f64>,
{
    if n == 0 {
        return Err(Error::Config("a fundamental set needs at least one point".into()));
    }
    let mut rng = seeded(seed);
    let mut worst = f64::INFINITY;
    for _ in 0..FUNDAMENTAL_SET_RETRIES {
        let points = haar_sample_space(space, &mut rng, n);
        let g = gram(&kernel, &points)?;
        let min = min_symmetric_eigenvalue(&g);
        let tol = 1e-8 * g.trace() / n as f64;
        if min > tol && tol > 0.0 {
            return Ok(FundamentalSet { points, gram: g, min_eigenvalue: min });
        }
        worst = worst.min(min);
    }
    Err(Error::DegenerateLevel(format!(
        "no fundamental set of size {n} on {space} after {FUNDAMENTAL_SET_RETRIES} attempts \
         (last min eigenvalue {worst:e}); the level spans fewer than {n} functions"
    )))
}

/// Orthonormal functions `e_j = Σ_i a_ji K(·, x_i)` spanning the same space
/// as `K(·, x_1), …, K(·, x_N)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KlBasis {
    pub points: Vec<SpacePoint>,
    /// Row `j` holds the coefficients of `e_j`.
    pub coefficients: DMatrix<f64>,
}

/// Modified Gram–Schmidt with `⟨K(·,x_i), K(·,x_j)⟩ = K(x_i, x_j)`.
pub fn kl_basis(fs: &FundamentalSet) -> Result<KlBasis> {
    let g = &fs.gram;
    let n = g.nrows();
    let tol = 1e-12 * g.trace().abs().max(f64::MIN_POSITIVE);
    let mut a = DMatrix::<f64>::identity(n, n);
    let inner = |u: &DVector<f64>, v: &DVector<f64>| (u.transpose() * g * v)[(0, 0)];
    for j in 0..n {
        let mut v: DVector<f64> = a.row(j).transpose();
        for i in 0..j {
            let e: DVector<f64> = a.row(i).transpose();
            let p = inner(&e, &v);
            v -= e * p;
        }
        let norm2 = inner(&v, &v);
        if !(norm2 > tol) {
            return Err(Error::DegenerateLevel(format!(
                "Gram–Schmidt breaks down at function {j} (squared norm {norm2:e})"
            )));
        }
        a.set_row(j, &(v / norm2.sqrt()).transpose());
    }
    Ok(KlBasis { points: fs.points.clone(), coefficients: a })
}

impl KlBasis {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `[e_j(x)]` for every basis function `j`.
    pub fn evaluate<F>(&self, kernel: F, x: &SpacePoint) -> Result<DVector<f64>>
    where
        F: Fn(&SpacePoint, &SpacePoint) -> Result<f64>,
    {
        let kx = DVector::from_iterator(
            self.points.len(),
            self.points.iter().map(|p| kernel(x, p)).collect::<Result<Vec<_>>>()?,
        );
        Ok(&self.coefficients * kx)
    }
}

/// Draws of `f` with fresh phases and weights, for moment checks.
pub fn prior_draws(k: &SpectralKernel, num_phases: usize, xs: &[SpacePoint], draws: usize, seed: u64) -> Result<DMatrix<f64>> {
    let cols: Vec<Result<DVector<f64>>> = (0..draws)
        .into_par_iter()
        .map(|d| {
            let basis = build_feature_basis(k, num_phases, derive_seed(seed, 2 * d as u64))?;
            prior_sample(&basis, derive_seed(seed, 2 * d as u64 + 1)).evaluate(xs)
        })
        .collect();
    let mut out = DMatrix::zeros(xs.len(), draws);
    for (j, c) in cols.into_iter().enumerate() {
        out.set_column(j, &c?);
    }
    Ok(out)
}

/// Pathwise posterior draws at `xs`; draw `d` uses the same phases and
/// weights as column `d` of [`prior_draws`] with the same seed.
pub fn posterior_draws(
    k: &SpectralKernel,
    num_phases: usize,
    data: &Dataset,
    xs: &[SpacePoint],
    draws: usize,
    seed: u64,
) -> Result<DMatrix<f64>> {
    let cols: Vec<Result<DVector<f64>>> = (0..draws)
        .into_par_iter()
        .map(|d| {
            let basis = build_feature_basis(k, num_phases, derive_seed(seed, 2 * d as u64))?;
            let prior = prior_sample(&basis, derive_seed(seed, 2 * d as u64 + 1));
            let noise_seed = derive_seed(derive_seed(seed, 2 * d as u64 + 1), 1);
            pathwise_posterior_sample(&prior, k, data, noise_seed)?.evaluate(xs)
        })
        .collect();
    let mut out = DMatrix::zeros(xs.len(), draws);
    for (j, c) in cols.into_iter().enumerate() {
        out.set_column(j, &c?);
    }
    Ok(out)
}
