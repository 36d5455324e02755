//! Heat and Matérn kernels as truncated spectral series.
//!
//! A kernel is `k(x, y) = Σ_λ c_λ Φ_λ(x, y)` where `Φ_λ` is the level
//! function of one eigenspace:
//!
//! - groups: `Φ_λ(x, y) = d_λ Re χ_λ(y⁻¹x)`, so `Φ_λ(x, x) = d_λ²`;
//! - spheres and projective spaces: `Φ_ℓ(x, y) = Z_ℓ(cos d(x, y))`, so
//!   `Φ_ℓ(x, x) = d_ℓ`;
//! - quotients `G/H`: `d_λ` times the spherical function. For
//!   `SO(n)/SO(n−1)` and `SU(n)/SU(n−1)` this is a Gegenbauer or disk
//!   polynomial in the last matrix entry of `y⁻¹x`, and `Φ_λ(x, x) = d_λ`.
//!   Other quotients average the group level function over a fixed set of
//!   `H` samples on both sides.
//!
//! The coefficients are normalised on the truncated series so that
//! `k(x, x) = σ²`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::groups::{torus_coordinates_unchecked, CharacterTable, GroupElement};
use crate::repr::{enumerate_representations, GroupFamily, GroupId, Representation, Signature};
use crate::rng::seeded;
use crate::spaces::{
    cos_distance, estimate_invariant_dimension, normalized_gegenbauer, normalized_jacobi, zonal_levels, SpaceId,
    SpacePoint, Subgroup, ZonalLevel,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kernel", rename_all = "lowercase")]
pub enum DensityKind {
    Heat { kappa: f64 },
    Matern { nu: f64, kappa: f64 },
}

/// Spectral density with its variance `σ²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralDensity {
    #[serde(flatten)]
    pub kind: DensityKind,
    pub variance: f64,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be positive and finite, got {v}")))
    }
}

impl SpectralDensity {
    pub fn heat(kappa: f64, variance: f64) -> Result<Self> {
        positive("kappa", kappa)?;
        positive("sigma2", variance)?;
        Ok(Self { kind: DensityKind::Heat { kappa }, variance })
    }

    pub fn matern(nu: f64, kappa: f64, variance: f64) -> Result<Self> {
        positive("nu", nu)?;
        positive("kappa", kappa)?;
        positive("sigma2", variance)?;
        Ok(Self { kind: DensityKind::Matern { nu, kappa }, variance })
    }

    pub fn kappa(&self) -> f64 {
        match self.kind {
            DensityKind::Heat { kappa } | DensityKind::Matern { kappa, .. } => kappa,
        }
    }

    pub fn nu(&self) -> Option<f64> {
        match self.kind {
            DensityKind::Heat { .. } => None,
            DensityKind::Matern { nu, .. } => Some(nu),
        }
    }

    /// Same kind with new `κ` and `σ²`.
    pub fn with_params(&self, kappa: f64, variance: f64) -> Result<Self> {
        match self.kind {
            DensityKind::Heat { .. } => Self::heat(kappa, variance),
            DensityKind::Matern { nu, .. } => Self::matern(nu, kappa, variance),
        }
    }

    /// `ln(raw(α) / raw(0))`, where `raw` is the unnormalised coefficient.
    pub fn log_ratio(&self, alpha: f64, dim: usize) -> f64 {
        match self.kind {
            DensityKind::Heat { kappa } => -alpha * kappa * kappa / 2.0,
            DensityKind::Matern { nu, kappa } => {
                -(nu + dim as f64 / 2.0) * (alpha * kappa * kappa / (2.0 * nu)).ln_1p()
            }
        }
    }

    /// `ln raw(0)`.
    pub fn log_raw_at_zero(&self, dim: usize) -> f64 {
        match self.kind {
            DensityKind::Heat { .. } => 0.0,
            DensityKind::Matern { nu, kappa } => {
                -(nu + dim as f64 / 2.0) * (2.0 * nu / (kappa * kappa)).ln()
            }
        }
    }
}

/// Unnormalised heat coefficients `e^{−α κ²/2}`.
pub fn heat_coefficients(eigenvalues: &[f64], kappa: f64) -> Result<Vec<f64>> {
    positive("kappa", kappa)?;
    Ok(eigenvalues.iter().map(|a| (-a * kappa * kappa / 2.0).exp()).collect())
}

/// Unnormalised Matérn coefficients `(2ν/κ² + α)^{−ν−n/2}`. These underflow
/// for large `ν`; kernels are built from the ratio form instead.
pub fn matern_coefficients(eigenvalues: &[f64], nu: f64, kappa: f64, dim: usize) -> Result<Vec<f64>> {
    positive("nu", nu)?;
    positive("kappa", kappa)?;
    let base = 2.0 * nu / (kappa * kappa);
    let power = -nu - dim as f64 / 2.0;
    Ok(eigenvalues.iter().map(|a| (base + a).powf(power)).collect())
}

/// Where a level comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum LevelSource {
    Representation(Representation),
    Zonal(ZonalLevel),
    /// Representation of `G` seen on `G/H`, with `r_λ` `H`-fixed vectors.
    Spherical { representation: Representation, invariant_dimension: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelLevel {
    pub eigenvalue: f64,
    pub dimension: u64,
    /// `Φ_λ(x, x)`.
    pub diagonal: f64,
    pub source: LevelSource,
}

impl KernelLevel {
    pub fn signature(&self) -> Option<&Signature> {
        match &self.source {
            LevelSource::Representation(r) => Some(&r.signature),
            LevelSource::Spherical { representation, .. } => Some(&representation.signature),
            LevelSource::Zonal(_) => None,
        }
    }

    pub fn representation(&self) -> Option<&Representation> {
        match &self.source {
            LevelSource::Representation(r) => Some(r),
            LevelSource::Spherical { representation, .. } => Some(representation),
            LevelSource::Zonal(_) => None,
        }
    }
}

/// Fixed `H` samples used to evaluate quotient kernels deterministically.
pub const QUOTIENT_H_SAMPLES: usize = 16;
const QUOTIENT_SEED: u64 = 0x51ab_1e5e_ed00_0001;
const INVARIANT_DIM_SAMPLES: usize = 8192;

#[derive(Clone, Debug)]
enum QuotientMode {
    /// `SO(n)/SO(n−1) ≅ S^{n−1}`.
    RealSphere { sphere_dim: usize },
    /// `SU(n)/SU(n−1) ≅ S^{2n−1}`.
    ComplexSphere { n: usize },
    Sampled(Vec<GroupElement>),
}

#[derive(Clone, Debug)]
struct Evaluator {
    table: Option<CharacterTable>,
    signatures: Vec<Signature>,
    max_level: usize,
    quotient: Option<QuotientMode>,
}

/// A truncated, self-normalised stationary kernel.
#[derive(Clone, Debug)]
pub struct SpectralKernel {
    space: SpaceId,
    density: SpectralDensity,
    budget: usize,
    levels: Vec<KernelLevel>,
    coefficients: Vec<f64>,
    log_normalizer: f64,
    truncation_residual: f64,
    eval: Evaluator,
}

/// Serializable description of a built kernel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelInfo {
    pub space: SpaceId,
    pub density: SpectralDensity,
    pub budget: usize,
    pub levels: usize,
    pub normalizer: f64,
    pub log_normalizer: f64,
    pub truncation_residual: f64,
    pub coefficients: Vec<f64>,
}

fn group_levels(group: GroupId, budget: usize) -> Result<Vec<KernelLevel>> {
    Ok(enumerate_representations(group, budget)?
        .into_iter()
        .map(|r| KernelLevel {
            eigenvalue: r.eigenvalue,
            dimension: r.dimension,
            diagonal: (r.dimension * r.dimension) as f64,
            source: LevelSource::Representation(r),
        })
        .collect())
}

fn quotient_levels(group: GroupId, subgroup: &Subgroup, budget: usize) -> Result<Vec<KernelLevel>> {
    let mut request = budget;
    loop {
        let reps = enumerate_representations(group, request)?;
        let exhausted = reps.len() < request;
        let mut out = Vec::new();
        for r in reps {
            let inv = match subgroup.invariant_dimension(group, &r.signature, r.dimension) {
                Some(v) => v,
                None => estimate_invariant_dimension(
                    group,
                    subgroup,
                    &r.signature,
                    INVARIANT_DIM_SAMPLES,
                    QUOTIENT_SEED,
                ),
            };
            if inv > 0 {
                out.push(KernelLevel {
                    eigenvalue: r.eigenvalue,
                    dimension: r.dimension,
                    diagonal: (r.dimension * inv) as f64,
                    source: LevelSource::Spherical { representation: r, invariant_dimension: inv },
                });
            }
        }
        if out.len() >= budget || exhausted {
            // keep whole eigenvalue shells
            if out.len() > budget {
                let cut = out[budget - 1].eigenvalue;
                out.retain(|l| l.eigenvalue <= cut);
            }
            return Ok(out);
        }
        request *= 2;
    }
}

/// Enumerate levels of `space` and compute normalised coefficients.
pub fn build_kernel(space: &SpaceId, density: &SpectralDensity, budget: usize) -> Result<SpectralKernel> {
    if budget == 0 {
        return Err(Error::Config("truncation budget must be at least 1".into()));
    }
    let levels: Vec<KernelLevel> = match space {
        SpaceId::Group(g) => group_levels(*g, budget)?,
        SpaceId::Sphere { .. } | SpaceId::ProjectiveSpace { .. } => zonal_levels(space, budget)?
            .into_iter()
            .map(|z| KernelLevel {
                eigenvalue: z.eigenvalue,
                dimension: z.dimension,
                diagonal: z.dimension as f64,
                source: LevelSource::Zonal(z),
            })
            .collect(),
        SpaceId::Quotient { group, subgroup } => quotient_levels(*group, subgroup, budget)?,
    };
    let eval = match space {
        SpaceId::Group(g) | SpaceId::Quotient { group: g, .. } => {
            let quotient = match space {
                SpaceId::Quotient { subgroup: Subgroup::Block { m }, .. } if *m >= 2 => {
                    Some(if m + 1 == g.n() && g.family() == GroupFamily::SO {
                        QuotientMode::RealSphere { sphere_dim: *m }
                    } else if m + 1 == g.n() {
                        QuotientMode::ComplexSphere { n: g.n() }
                    } else {
                        let mut rng = seeded(QUOTIENT_SEED);
                        let sub = Subgroup::Block { m: *m };
                        let half: Vec<GroupElement> =
                            (0..QUOTIENT_H_SAMPLES / 2).map(|_| sub.sample(*g, &mut rng)).collect();
                        // closed under inverses
                        QuotientMode::Sampled(
                            half.iter().cloned().chain(half.iter().map(GroupElement::inverse)).collect(),
                        )
                    })
                }
                _ => None,
            };
            Evaluator {
                table: Some(CharacterTable::new(*g)),
                signatures: levels.iter().filter_map(|l| l.signature().cloned()).collect(),
                max_level: levels
                    .iter()
                    .filter_map(|l| l.signature().map(|s| s.parts()[0] as usize))
                    .max()
                    .unwrap_or(0),
                quotient,
            }
        }
        _ => Evaluator {
            table: None,
            signatures: Vec::new(),
            max_level: levels
                .iter()
                .filter_map(|l| match &l.source {
                    LevelSource::Zonal(z) => Some(z.level),
                    _ => None,
                })
                .max()
                .unwrap_or(0),
            quotient: None,
        },
    };
    let mut kernel = SpectralKernel {
        space: *space,
        density: *density,
        budget,
        levels,
        coefficients: Vec::new(),
        log_normalizer: 0.0,
        truncation_residual: 0.0,
        eval,
    };
    if let Some(QuotientMode::Sampled(_)) = &kernel.eval.quotient {
        // the sampled spherical function at the identity, so that k(x, x) = σ²
        let g = space.group().expect("quotient");
        let e = SpacePoint::Element(GroupElement::identity(g));
        let diag = kernel.level_values(&e, &e)?;
        for (l, d) in kernel.levels.iter_mut().zip(diag) {
            l.diagonal = d;
        }
    }
    kernel.set_density(density)?;
    Ok(kernel)
}

impl SpectralKernel {
    fn set_density(&mut self, density: &SpectralDensity) -> Result<()> {
        let dim = self.space.dimension();
        let ratios: Vec<f64> =
            self.levels.iter().map(|l| density.log_ratio(l.eigenvalue, dim).exp()).collect();
        let total: f64 = ratios.iter().zip(&self.levels).map(|(r, l)| r * l.diagonal).sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::Numerical(format!("kernel normaliser is not positive: {total}")));
        }
        self.coefficients = ratios.iter().map(|r| density.variance * r / total).collect();
        self.log_normalizer = density.log_raw_at_zero(dim) + total.ln() - density.variance.ln();
        let top = self.levels.iter().map(|l| l.eigenvalue).fold(f64::NEG_INFINITY, f64::max);
        self.truncation_residual = self
            .levels
            .iter()
            .zip(&self.coefficients)
            .filter(|(l, _)| l.eigenvalue == top)
            .map(|(l, c)| c * l.diagonal)
            .sum();
        self.density = *density;
        Ok(())
    }

    /// Same levels, new hyperparameters.
    pub fn with_density(&self, density: &SpectralDensity) -> Result<Self> {
        let mut k = self.clone();
        k.set_density(density)?;
        Ok(k)
    }

    pub fn space(&self) -> &SpaceId {
        &self.space
    }

    pub fn density(&self) -> &SpectralDensity {
        &self.density
    }

    pub fn variance(&self) -> f64 {
        self.density.variance
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn levels(&self) -> &[KernelLevel] {
        &self.levels
    }

    /// Normalised coefficients `c_λ`.
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// `C′ = Σ raw_λ Φ_λ(x, x) / σ²`; may under- or overflow, see
    /// [`SpectralKernel::log_normalizer`].
    pub fn normalizer(&self) -> f64 {
        self.log_normalizer.exp()
    }

    pub fn log_normalizer(&self) -> f64 {
        self.log_normalizer
    }

    /// Mass `Σ c_λ Φ_λ(x, x)` of the highest included eigenvalue shell.
    pub fn truncation_residual(&self) -> f64 {
        self.truncation_residual
    }

    pub fn info(&self) -> KernelInfo {
        KernelInfo {
            space: self.space,
            density: self.density,
            budget: self.budget,
            levels: self.levels.len(),
            normalizer: self.normalizer(),
            log_normalizer: self.log_normalizer,
            truncation_residual: self.truncation_residual,
            coefficients: self.coefficients.clone(),
        }
    }

    fn group_level_values(&self, g: &GroupElement, out: &mut [f64]) {
        let group = self.space.group().expect("group space");
        let table = self.eval.table.as_ref().expect("group kernel");
        let t = torus_coordinates_unchecked(group, g);
        let chis = table.characters(&self.eval.signatures, &t);
        for ((o, l), chi) in out.iter_mut().zip(&self.levels).zip(chis) {
            *o += l.dimension as f64 * chi.re;
        }
    }

    /// `Φ_λ(x, y)` for every level.
    pub fn level_values(&self, x: &SpacePoint, y: &SpacePoint) -> Result<Vec<f64>> {
        self.space.check_point(x)?;
        self.space.check_point(y)?;
        let mut out = vec![0.0; self.levels.len()];
        match (x, y) {
            (SpacePoint::Vector(a), SpacePoint::Vector(b)) => {
                let t = cos_distance(&self.space, a, b);
                let n = match self.space {
                    SpaceId::Sphere { n, .. } | SpaceId::ProjectiveSpace { n, .. } => n,
                    _ => unreachable!("checked above"),
                };
                let p = normalized_gegenbauer(n, self.eval.max_level, t);
                for (o, l) in out.iter_mut().zip(&self.levels) {
                    if let LevelSource::Zonal(z) = &l.source {
                        *o = z.dimension as f64 * p[z.level];
                    }
                }
            }
            (SpacePoint::Element(a), SpacePoint::Element(b)) => {
                let d = b.inverse().mul(a)?;
                match &self.eval.quotient {
                    None => self.group_level_values(&d, &mut out),
                    Some(QuotientMode::RealSphere { sphere_dim }) => {
                        let n = sphere_dim + 1;
                        // (y⁻¹x)_nn = ⟨y e_n, x e_n⟩
                        let t = d.to_complex()[(n - 1, n - 1)].re.clamp(-1.0, 1.0);
                        let p = normalized_gegenbauer(*sphere_dim, self.eval.max_level, t);
                        for (o, l) in out.iter_mut().zip(&self.levels) {
                            let s = l.signature().expect("quotient level");
                            *o = l.dimension as f64 * p[s.parts()[0] as usize];
                        }
                    }
                    Some(QuotientMode::ComplexSphere { n }) => {
                        let w = d.to_complex()[(n - 1, n - 1)];
                        let r2 = w.norm_sqr().min(1.0);
                        for (o, l) in out.iter_mut().zip(&self.levels) {
                            // signature (p+q, q, …, q, 0) spans harmonics of bidegree (p, q)
                            let parts = l.signature().expect("quotient level").parts();
                            let q = parts[1];
                            let p = parts[0] - q;
                            let k = (p - q).unsigned_abs() as i32;
                            let m = p.min(q) as usize;
                            let radial = normalized_jacobi(m, (n - 2) as f64, k as f64, 2.0 * r2 - 1.0);
                            *o = l.dimension as f64 * w.powi(k).re * radial;
                        }
                    }
                    Some(QuotientMode::Sampled(hs)) => {
                        // (1/M²) Σ_ij Φ^G(h_i⁻¹ y⁻¹ x h_j); χ is a class function
                        for hi in hs {
                            for hj in hs {
                                let g = d.mul(&hj.mul(&hi.inverse())?)?;
                                self.group_level_values(&g, &mut out);
                            }
                        }
                        let m2 = (hs.len() * hs.len()) as f64;
                        out.iter_mut().for_each(|v| *v /= m2);
                    }
                }
            }
            _ => unreachable!("checked above"),
        }
        Ok(out)
    }

    /// `k(x, y)`.
    pub fn value(&self, x: &SpacePoint, y: &SpacePoint) -> Result<f64> {
        let v = self.level_values(x, y)?;
        Ok(v.iter().zip(&self.coefficients).map(|(a, c)| a * c).sum())
    }

    /// The group kernel `Σ c_λ d_λ Re χ_λ(y⁻¹x)` behind a quotient kernel,
    /// i.e. the integrand of the periodic summation over `H`.
    pub fn lifted_value(&self, x: &GroupElement, y: &GroupElement) -> Result<f64> {
        let group = self.space.group().ok_or_else(|| {
            Error::SpaceMismatch(format!("{} is not a group or quotient space", self.space))
        })?;
        if !x.belongs_to(group) || !y.belongs_to(group) {
            return Err(Error::SpaceMismatch(format!("points are not in {group}")));
        }
        let mut out = vec![0.0; self.levels.len()];
        self.group_level_values(&y.inverse().mul(x)?, &mut out);
        Ok(out.iter().zip(&self.coefficients).map(|(a, c)| a * c).sum())
    }

    /// Per-level Gram matrices `[Φ_λ(x_i, y_j)]`, the expensive part of
    /// every kernel matrix; reused when only hyperparameters change.
    pub fn level_matrices(&self, xs: &[SpacePoint], ys: &[SpacePoint]) -> Result<Vec<DMatrix<f64>>> {
        let symmetric = xs == ys;
        let rows: Vec<Result<Vec<Vec<f64>>>> = (0..xs.len())
            .into_par_iter()
            .map(|i| {
                let start = if symmetric { i } else { 0 };
                (start..ys.len()).map(|j| self.level_values(&xs[i], &ys[j])).collect()
            })
            .collect();
        let mut mats = vec![DMatrix::zeros(xs.len(), ys.len()); self.levels.len()];
        for (i, row) in rows.into_iter().enumerate() {
            let start = if symmetric { i } else { 0 };
            for (jj, vals) in row?.into_iter().enumerate() {
                let j = start + jj;
                for (m, v) in mats.iter_mut().zip(vals) {
                    m[(i, j)] = v;
                    if symmetric {
                        m[(j, i)] = v;
                    }
                }
            }
        }
        Ok(mats)
    }

    /// `Σ c_λ M_λ` for level matrices from [`SpectralKernel::level_matrices`].
    pub fn combine(&self, mats: &[DMatrix<f64>]) -> DMatrix<f64> {
        let (r, c) = mats.first().map_or((0, 0), |m| m.shape());
        let mut out = DMatrix::zeros(r, c);
        for (m, coef) in mats.iter().zip(&self.coefficients) {
            out += m * *coef;
        }
        out
    }

    /// Matrix `[k(x_i, y_j)]`; exactly symmetric when `xs == ys`.
    pub fn kernel_matrix(&self, xs: &[SpacePoint], ys: &[SpacePoint]) -> Result<DMatrix<f64>> {
        let symmetric = xs == ys;
        let rows: Vec<Result<Vec<f64>>> = (0..xs.len())
            .into_par_iter()
            .map(|i| {
                let start = if symmetric { i } else { 0 };
                (start..ys.len()).map(|j| self.value(&xs[i], &ys[j])).collect()
            })
            .collect();
        let mut out = DMatrix::zeros(xs.len(), ys.len());
        for (i, row) in rows.into_iter().enumerate() {
            let start = if symmetric { i } else { 0 };
            for (jj, v) in row?.into_iter().enumerate() {
                out[(i, start + jj)] = v;
                if symmetric {
                    out[(start + jj, i)] = v;
                }
            }
        }
        Ok(out)
    }
}

/// Free-function form of [`SpectralKernel::value`].
pub fn kernel_value(k: &SpectralKernel, x: &SpacePoint, y: &SpacePoint) -> Result<f64> {
    k.value(x, y)
}

/// Free-function form of [`SpectralKernel::kernel_matrix`].
pub fn kernel_matrix(k: &SpectralKernel, xs: &[SpacePoint], ys: &[SpacePoint]) -> Result<DMatrix<f64>> {
    k.kernel_matrix(xs, ys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::min_symmetric_eigenvalue;
    use crate::rng::seeded;
    use crate::spaces::haar_sample_space;

    fn s2() -> SpaceId {
        SpaceId::sphere(2)
    }

    #[test]
    fn heat_coefficient_examples() {
        assert_eq!(heat_coefficients(&[0.0], 0.3).unwrap(), vec![1.0]);
        let kappa: f64 = 0.7;
        let c = heat_coefficients(&[0.0, 2.0], kappa).unwrap();
        assert!((c[1] / c[0] - (-kappa * kappa).exp()).abs() < 1e-15);
        assert!(heat_coefficients(&[0.0], 0.0).is_err());
        assert!(heat_coefficients(&[0.0], -1.0).is_err());
    }

    #[test]
    fn matern_coefficient_examples() {
        let c = matern_coefficients(&[0.0], 1.5, 0.5, 2).unwrap();
        assert!((c[0] - 12f64.powf(-2.5)).abs() < 1e-15);
        assert!(matern_coefficients(&[0.0], 0.0, 1.0, 2).is_err());
        assert!(matern_coefficients(&[0.0], 1.0, 0.0, 2).is_err());
    }

    #[test]
    fn matern_half_on_s2_follows_formula() {
        let kappa: f64 = 0.8;
        let k = build_kernel(&s2(), &SpectralDensity::matern(0.5, kappa, 1.0).unwrap(), 8).unwrap();
        let raw: Vec<f64> = (0..8)
            .map(|l| (1.0 / (kappa * kappa) + (l * (l + 1)) as f64).powf(-1.5))
            .collect();
        for l in 1..8 {
            let a = k.coefficients()[l] / k.coefficients()[0];
            assert!((a - raw[l] / raw[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn normalisation_and_budget_one() {
        let x = SpacePoint::vector(vec![0.0, 0.0, 1.0]);
        let y = SpacePoint::vector(vec![1.0, 0.0, 0.0]);
        let k = build_kernel(&s2(), &SpectralDensity::heat(0.5, 2.0).unwrap(), 10).unwrap();
        assert!((k.value(&x, &x).unwrap() - 2.0).abs() < 1e-12);
        let k1 = build_kernel(&s2(), &SpectralDensity::heat(0.5, 2.0).unwrap(), 1).unwrap();
        assert_eq!(k1.value(&x, &y).unwrap(), 2.0);
        for w in k.coefficients().windows(2) {
            assert!(w[0] >= w[1]);
        }
        let total: f64 = k.levels().iter().zip(k.coefficients()).map(|(l, c)| l.diagonal * c).sum();
        assert!((total - 2.0).abs() < 1e-12);
    }

    #[test]
    fn large_kappa_gives_constant_kernel() {
        let k = build_kernel(&s2(), &SpectralDensity::heat(50.0, 1.0).unwrap(), 10).unwrap();
        let pts = haar_sample_space(&s2(), &mut seeded(1), 5);
        for p in &pts {
            assert!((k.value(p, &pts[0]).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn group_kernels_are_normalised_and_psd() {
        for space in ["SU(2)", "SO(3)", "SU(3)", "SO(4)"] {
            let space: SpaceId = space.parse().unwrap();
            let k = build_kernel(&space, &SpectralDensity::matern(1.5, 1.0, 1.3).unwrap(), 20).unwrap();
            let pts = haar_sample_space(&space, &mut seeded(2), 30);
            let m = k.kernel_matrix(&pts, &pts).unwrap();
            for i in 0..pts.len() {
                assert!((m[(i, i)] - 1.3).abs() < 1e-9, "{space}: {}", m[(i, i)]);
            }
            assert!(min_symmetric_eigenvalue(&m) >= -1e-8 * 1.3, "{space}");
        }
    }

    #[test]
    fn kernel_matrix_matches_pointwise_values() {
        let space: SpaceId = "RP2".parse().unwrap();
        let k = build_kernel(&space, &SpectralDensity::heat(0.6, 1.0).unwrap(), 12).unwrap();
        let xs = haar_sample_space(&space, &mut seeded(3), 6);
        let ys = haar_sample_space(&space, &mut seeded(4), 4);
        let m = k.kernel_matrix(&xs, &ys).unwrap();
        for i in 0..xs.len() {
            for j in 0..ys.len() {
                assert!((m[(i, j)] - k.value(&xs[i], &ys[j]).unwrap()).abs() < 1e-12);
            }
        }
        let mats = k.level_matrices(&xs, &ys).unwrap();
        assert!((k.combine(&mats) - m).amax() < 1e-12);
    }

    #[test]
    fn mismatched_points_are_rejected() {
        let k = build_kernel(&s2(), &SpectralDensity::heat(0.6, 1.0).unwrap(), 3).unwrap();
        let bad = SpacePoint::vector(vec![1.0, 0.0]);
        let ok = SpacePoint::vector(vec![1.0, 0.0, 0.0]);
        assert!(matches!(k.value(&bad, &ok), Err(Error::SpaceMismatch(_))));
    }

    #[test]
    fn with_density_matches_fresh_build() {
        let d1 = SpectralDensity::heat(0.4, 1.0).unwrap();
        let d2 = SpectralDensity::heat(0.9, 3.0).unwrap();
        let k1 = build_kernel(&s2(), &d1, 15).unwrap().with_density(&d2).unwrap();
        let k2 = build_kernel(&s2(), &d2, 15).unwrap();
        assert_eq!(k1.coefficients(), k2.coefficients());
    }

    #[test]
    fn matern_with_huge_nu_does_not_underflow() {
        let k = build_kernel(&s2(), &SpectralDensity::matern(1000.0, 0.5, 1.0).unwrap(), 20).unwrap();
        assert!(k.coefficients().iter().all(|c| c.is_finite()));
        assert!(k.coefficients()[0] > 0.0);
        assert!(k.log_normalizer().is_finite());
    }
}
