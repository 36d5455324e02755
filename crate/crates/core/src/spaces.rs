//! Spaces carrying stationary kernels: the groups themselves, spheres `Sⁿ`,
//! real projective spaces `RPⁿ`, and quotients `G/H` by a block subgroup.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::groups::{
    haar_orthogonal, haar_sample, haar_unitary, torus_coordinates, CharacterTable, GroupElement,
};
use crate::repr::{root_system, GroupFamily, GroupId, Signature};
use crate::rng::{substream, Rng};

/// Which metric fixes the eigenvalues on `Sⁿ` and `RPⁿ`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricScale {
    /// Round unit sphere: `α_ℓ = ℓ(ℓ+n−1)`.
    #[default]
    Unit,
    /// Metric induced by the Killing form of `SO(n+1)`:
    /// `α_ℓ = ℓ(ℓ+n−1) / (2(n−1))`.
    Killing,
}

impl MetricScale {
    /// Multiplier from unit-sphere eigenvalues to this scale.
    pub fn eigenvalue_factor(self, n: usize) -> f64 {
        match self {
            Self::Unit => 1.0,
            Self::Killing => 1.0 / (2.0 * (n as f64 - 1.0)),
        }
    }
}

/// Closed subgroup `H` used to form `G/H`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Subgroup {
    Trivial,
    /// `SO(m)` or `SU(m)` acting on the first `m` coordinates.
    Block { m: usize },
}

impl Subgroup {
    pub fn dimension(&self, family: GroupFamily) -> usize {
        match (*self, family) {
            (Self::Trivial, _) => 0,
            (Self::Block { m }, GroupFamily::SO) => m * m.saturating_sub(1) / 2,
            (Self::Block { m }, GroupFamily::SU) => (m * m).saturating_sub(1),
        }
    }

    /// One Haar sample of `H`, embedded in `group`.
    pub fn sample(&self, group: GroupId, rng: &mut Rng) -> GroupElement {
        let n = group.n();
        match (*self, group.family()) {
            (Self::Trivial, _) => GroupElement::identity(group),
            (Self::Block { m }, GroupFamily::SO) => {
                let mut g = DMatrix::identity(n, n);
                if m >= 2 {
                    g.view_mut((0, 0), (m, m)).copy_from(&haar_orthogonal(m, rng));
                }
                GroupElement::Orthogonal(g)
            }
            (Self::Block { m }, GroupFamily::SU) => {
                let mut g = DMatrix::<Complex64>::identity(n, n);
                if m >= 2 {
                    let mut u = haar_unitary(m, rng);
                    let det = u.determinant();
                    u *= Complex64::from_polar(1.0, -det.arg() / m as f64);
                    g.view_mut((0, 0), (m, m)).copy_from(&u);
                }
                GroupElement::Unitary(g)
            }
        }
    }

    /// `r_λ = dim` of the `H`-fixed subspace of `V_λ`, when known in closed
    /// form: every vector for `H` trivial, and the class-one signatures of
    /// `SO(n)/SO(n−1)` and `SU(n)/SU(n−1)`.
    pub fn invariant_dimension(&self, group: GroupId, sig: &Signature, dim: u64) -> Option<u64> {
        match *self {
            Self::Trivial => Some(dim),
            Self::Block { m } if m + 1 == group.n() => {
                let p = sig.parts();
                let class_one = match group.family() {
                    GroupFamily::SO => p[1..].iter().all(|&x| x == 0),
                    GroupFamily::SU => {
                        let len = p.len();
                        len == 2 || p[1..len - 1].iter().all(|&x| x == p[1])
                    }
                };
                Some(u64::from(class_one))
            }
            Self::Block { m } if m <= 1 => Some(dim),
            Self::Block { .. } => None,
        }
    }
}

/// Identifier of a supported space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SpaceId {
    Group(GroupId),
    Sphere { n: usize, metric: MetricScale },
    ProjectiveSpace { n: usize, metric: MetricScale },
    Quotient { group: GroupId, subgroup: Subgroup },
}

impl SpaceId {
    pub fn sphere(n: usize) -> Self {
        Self::Sphere { n, metric: MetricScale::Unit }
    }

    pub fn projective(n: usize) -> Self {
        Self::ProjectiveSpace { n, metric: MetricScale::Unit }
    }

    pub fn with_metric(self, metric: MetricScale) -> Result<Self> {
        match self {
            Self::Sphere { n, .. } | Self::ProjectiveSpace { n, .. }
                if metric == MetricScale::Killing && n < 2 =>
            {
                Err(Error::Config(format!("the Killing metric needs n >= 2, got {self}")))
            }
            Self::Sphere { n, .. } => Ok(Self::Sphere { n, metric }),
            Self::ProjectiveSpace { n, .. } => Ok(Self::ProjectiveSpace { n, metric }),
            other if metric == MetricScale::Unit => Ok(other),
            other => Err(Error::Config(format!(
                "metric '{metric:?}' only applies to spheres and projective spaces, not {other}"
            ))),
        }
    }

    /// Manifold dimension.
    pub fn dimension(&self) -> usize {
        match self {
            Self::Group(g) => g.dimension(),
            Self::Sphere { n, .. } | Self::ProjectiveSpace { n, .. } => *n,
            Self::Quotient { group, subgroup } => {
                group.dimension() - subgroup.dimension(group.family())
            }
        }
    }

    /// Underlying group for group and quotient spaces.
    pub fn group(&self) -> Option<GroupId> {
        match self {
            Self::Group(g) => Some(*g),
            Self::Quotient { group, .. } => Some(*group),
            _ => None,
        }
    }

    /// Number of CSV values describing one point.
    pub fn coordinate_len(&self) -> usize {
        match self {
            Self::Sphere { n, .. } | Self::ProjectiveSpace { n, .. } => n + 1,
            Self::Group(g) | Self::Quotient { group: g, .. } => match g.family() {
                GroupFamily::SO => g.n() * g.n(),
                GroupFamily::SU => 2 * g.n() * g.n(),
            },
        }
    }

    /// Build a point from raw coordinates. Sphere inputs within `1e−6` of
    /// unit norm are renormalised (left untouched when already within
    /// `1e−12`); projective points are sign-canonicalised.
    pub fn point_from_flat(&self, values: &[f64]) -> Result<SpacePoint> {
        match self {
            Self::Sphere { n, .. } | Self::ProjectiveSpace { n, .. } => {
                if values.len() != n + 1 {
                    return Err(Error::Parse(format!(
                        "points on {self} need {} coordinates, got {}",
                        n + 1,
                        values.len()
                    )));
                }
                let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
                if !((norm - 1.0).abs() < 1e-6) {
                    return Err(Error::Domain(format!(
                        "point on {self} must have unit norm, got {norm}"
                    )));
                }
                let v: Vec<f64> = if (norm - 1.0).abs() < 1e-12 {
                    values.to_vec()
                } else {
                    values.iter().map(|x| x / norm).collect()
                };
                Ok(self.canonical(SpacePoint::Vector(v)))
            }
            Self::Group(g) | Self::Quotient { group: g, .. } => {
                GroupElement::from_flat(*g, values).map(SpacePoint::Element)
            }
        }
    }

    fn canonical(&self, p: SpacePoint) -> SpacePoint {
        match (self, p) {
            (Self::ProjectiveSpace { .. }, SpacePoint::Vector(v)) => {
                SpacePoint::Vector(canonical_projective(v))
            }
            (_, p) => p,
        }
    }

    /// Check that `p` lies on this space.
    pub fn check_point(&self, p: &SpacePoint) -> Result<()> {
        match (self, p) {
            (Self::Sphere { n, .. } | Self::ProjectiveSpace { n, .. }, SpacePoint::Vector(v)) => {
                if v.len() != n + 1 {
                    return Err(Error::SpaceMismatch(format!(
                        "{}-vector is not a point of {self}",
                        v.len()
                    )));
                }
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if !((norm - 1.0).abs() < 1e-10) {
                    return Err(Error::Domain(format!(
                        "point on {self} must have unit norm, got {norm}"
                    )));
                }
                Ok(())
            }
            (Self::Group(g) | Self::Quotient { group: g, .. }, SpacePoint::Element(x)) => {
                if !x.belongs_to(*g) {
                    return Err(Error::SpaceMismatch(format!(
                        "{:?}({}) matrix is not a point of {self}",
                        x.family(),
                        x.n()
                    )));
                }
                Ok(())
            }
            _ => Err(Error::SpaceMismatch(format!("point kind does not match {self}"))),
        }
    }
}

fn canonical_projective(mut v: Vec<f64>) -> Vec<f64> {
    if let Some(first) = v.iter().copied().find(|x| *x != 0.0) {
        if first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
    v
}

impl fmt::Display for SpaceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let suffix = |m: &MetricScale| if *m == MetricScale::Killing { ":killing" } else { "" };
        match self {
            Self::Group(g) => write!(f, "{g}"),
            Self::Sphere { n, metric } => write!(f, "S{n}{}", suffix(metric)),
            Self::ProjectiveSpace { n, metric } => write!(f, "RP{n}{}", suffix(metric)),
            Self::Quotient { group, subgroup } => match subgroup {
                Subgroup::Trivial => write!(f, "{group}/1"),
                Subgroup::Block { m } => {
                    let fam = match group.family() {
                        GroupFamily::SO => "SO",
                        GroupFamily::SU => "SU",
                    };
                    write!(f, "{group}/{fam}({m})")
                }
            },
        }
    }
}

fn parse_dim(s: &str) -> Option<usize> {
    s.trim_start_matches('^').trim_start_matches('(').trim_end_matches(')').parse().ok()
}

impl FromStr for SpaceId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let err = || {
            Error::Config(format!(
                "unknown space '{s}'; expected Sn, RPn, SU(n), SO(n) or a quotient like SO(3)/SO(2)"
            ))
        };
        let (body, metric) = match s.trim().split_once(':') {
            Some((b, m)) => {
                let metric = match m.trim().to_ascii_lowercase().as_str() {
                    "unit" => MetricScale::Unit,
                    "killing" => MetricScale::Killing,
                    _ => return Err(err()),
                };
                (b.trim(), metric)
            }
            None => (s.trim(), MetricScale::Unit),
        };
        let upper = body.to_ascii_uppercase();
        let space = if let Some((g, h)) = upper.split_once('/') {
            let group: GroupId = g.parse()?;
            let h = h.trim();
            let subgroup = if h == "1" || h == "E" || h == "{E}" {
                Subgroup::Trivial
            } else {
                let sub: GroupId = match h.parse() {
                    Ok(sub) => sub,
                    // SO(2) is a valid subgroup even though it is not a supported space
                    Err(_) if h == "SO(2)" || h == "SO2" => {
                        return Self::Quotient { group, subgroup: Subgroup::Block { m: 2 } }
                            .validated()
                    }
                    Err(e) => return Err(e),
                };
                if sub.family() != group.family() {
                    return Err(Error::Config(format!(
                        "subgroup {sub} must be in the same family as {group}"
                    )));
                }
                Subgroup::Block { m: sub.n() }
            };
            Self::Quotient { group, subgroup }
        } else if let Some(rest) = upper.strip_prefix("RP") {
            Self::ProjectiveSpace { n: parse_dim(rest).ok_or_else(err)?, metric: MetricScale::Unit }
        } else if let Some(rest) = upper.strip_prefix("SPHERE") {
            Self::sphere(parse_dim(rest).ok_or_else(err)?)
        } else if upper.starts_with("SU") || upper.starts_with("SO") {
            Self::Group(upper.parse()?)
        } else if let Some(rest) = upper.strip_prefix('S') {
            Self::sphere(parse_dim(rest).ok_or_else(err)?)
        } else {
            return Err(err());
        };
        space.validated()?.with_metric(metric)
    }
}

impl SpaceId {
    fn validated(self) -> Result<Self> {
        match self {
            Self::Sphere { n, .. } | Self::ProjectiveSpace { n, .. } if n == 0 => {
                Err(Error::Config(format!("{self} is not a supported space; need n >= 1")))
            }
            Self::Quotient { group, subgroup: Subgroup::Block { m } } if m == 0 || m >= group.n() => {
                Err(Error::Config(format!(
                    "block subgroup of size {m} must be smaller than {group}"
                )))
            }
            other => Ok(other),
        }
    }
}

impl Serialize for SpaceId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for SpaceId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A point of a space: a unit vector for `Sⁿ`/`RPⁿ`, a matrix for groups
/// and quotients (coset representative).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpacePoint {
    Vector(Vec<f64>),
    Element(GroupElement),
}

impl SpacePoint {
    pub fn vector(v: Vec<f64>) -> Self {
        Self::Vector(v)
    }

    pub fn element(g: GroupElement) -> Self {
        Self::Element(g)
    }

    pub fn as_vector(&self) -> Option<&[f64]> {
        match self {
            Self::Vector(v) => Some(v),
            Self::Element(_) => None,
        }
    }

    pub fn as_element(&self) -> Option<&GroupElement> {
        match self {
            Self::Element(g) => Some(g),
            Self::Vector(_) => None,
        }
    }

    /// Flat coordinates matching [`SpaceId::point_from_flat`].
    pub fn to_flat(&self) -> Vec<f64> {
        match self {
            Self::Vector(v) => v.clone(),
            Self::Element(g) => g.to_flat(),
        }
    }
}

/// Multiplicity of the degree-`ℓ` harmonics on `Sⁿ`.
pub fn sphere_multiplicity(n: usize, level: usize) -> u64 {
    fn binom(a: usize, b: usize) -> u128 {
        if a < b {
            return 0;
        }
        let b = b.min(a - b);
        (0..b).fold(1u128, |acc, i| acc * (a - i) as u128 / (i + 1) as u128)
    }
    let upper = binom(level + n, n);
    let lower = if level >= 2 { binom(level + n - 2, n) } else { 0 };
    (upper - lower) as u64
}

/// Jacobi polynomial ratio `P_m^{(a,b)}(x) / P_m^{(a,b)}(1)`.
pub fn normalized_jacobi(m: usize, a: f64, b: f64, x: f64) -> f64 {
    let mut prev = 1.0;
    if m == 0 {
        return prev;
    }
    let mut cur = (a + 1.0) + 0.5 * (a + b + 2.0) * (x - 1.0);
    for k in 2..=m {
        let k = k as f64;
        let s = 2.0 * k + a + b;
        let next = ((s - 1.0) * (s * (s - 2.0) * x + a * a - b * b) * cur
            - 2.0 * (k + a - 1.0) * (k + b - 1.0) * s * prev)
            / (2.0 * k * (k + a + b) * (s - 2.0));
        prev = cur;
        cur = next;
    }
    let at_one: f64 = (1..=m).map(|j| (a + j as f64) / j as f64).product();
    cur / at_one
}

/// Normalised Gegenbauer values `P̃_ℓ(t)` on `Sⁿ` (with `P̃_ℓ(1) = 1`) for
/// `ℓ = 0..=max_level`.
pub fn normalized_gegenbauer(n: usize, max_level: usize, t: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(max_level + 1);
    out.push(1.0);
    if max_level == 0 {
        return out;
    }
    out.push(t);
    let nf = n as f64;
    for l in 1..max_level {
        let lf = l as f64;
        let next = ((2.0 * lf + nf - 1.0) * t * out[l] - lf * out[l - 1]) / (lf + nf - 1.0);
        out.push(next);
    }
    out
}

/// One eigenspace of the Laplacian on `Sⁿ` or `RPⁿ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZonalLevel {
    pub level: usize,
    pub eigenvalue: f64,
    pub dimension: u64,
    /// Sphere dimension `n`.
    pub sphere_dim: usize,
}

impl ZonalLevel {
    /// Addition-theorem normalised zonal function `Z_ℓ(t) = d_ℓ · P̃_ℓ(t)`
    /// at `t = cos(distance)`.
    pub fn zonal(&self, t: f64) -> f64 {
        self.dimension as f64 * normalized_gegenbauer(self.sphere_dim, self.level, t)[self.level]
    }
}

/// The `budget` lowest levels of `Sⁿ` (all `ℓ`) or `RPⁿ` (even `ℓ`).
pub fn zonal_levels(space: &SpaceId, budget: usize) -> Result<Vec<ZonalLevel>> {
    if budget == 0 {
        return Err(Error::Config("level budget must be at least 1".into()));
    }
    let (n, metric, step) = match *space {
        SpaceId::Sphere { n, metric } => (n, metric, 1),
        SpaceId::ProjectiveSpace { n, metric } => (n, metric, 2),
        other => {
            return Err(Error::Config(format!(
                "zonal levels exist only for spheres and projective spaces, not {other}"
            )))
        }
    };
    let factor = metric.eigenvalue_factor(n);
    Ok((0..budget)
        .map(|i| {
            let l = i * step;
            ZonalLevel {
                level: l,
                eigenvalue: (l * (l + n - 1)) as f64 * factor,
                dimension: sphere_multiplicity(n, l),
                sphere_dim: n,
            }
        })
        .collect())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Cosine of the geodesic distance on `Sⁿ`/`RPⁿ`.
pub(crate) fn cos_distance(space: &SpaceId, x: &[f64], y: &[f64]) -> f64 {
    let c = dot(x, y).clamp(-1.0, 1.0);
    match space {
        SpaceId::ProjectiveSpace { .. } => c.abs(),
        _ => c,
    }
}

/// Geodesic distance.
///
/// Groups use the bi-invariant metric `−B`: the length of the principal
/// one-parameter subgroup joining the points.
pub fn space_distance(space: &SpaceId, x: &SpacePoint, y: &SpacePoint) -> Result<f64> {
    space.check_point(x)?;
    space.check_point(y)?;
    match (space, x, y) {
        (SpaceId::Sphere { .. } | SpaceId::ProjectiveSpace { .. }, SpacePoint::Vector(a), SpacePoint::Vector(b)) => {
            Ok(cos_distance(space, a, b).acos())
        }
        (SpaceId::Group(g), SpacePoint::Element(a), SpacePoint::Element(b)) => {
            let d = crate::groups::group_difference(a, b)?;
            let mut angles = torus_coordinates(*g, &d)?.angles;
            if g.family() == GroupFamily::SU {
                // make the logarithm traceless
                let turns = (angles.iter().sum::<f64>() / (2.0 * PI)).round() as i64;
                angles.sort_by(|p, q| q.total_cmp(p));
                for i in 0..turns.unsigned_abs() as usize {
                    if turns > 0 {
                        angles[i] -= 2.0 * PI;
                    } else {
                        let last = angles.len() - 1 - i;
                        angles[last] += 2.0 * PI;
                    }
                }
            }
            let rs = root_system(*g);
            let s = *rs.killing_scale.numer() as f64 / *rs.killing_scale.denom() as f64;
            Ok((s * angles.iter().map(|t| t * t).sum::<f64>()).sqrt())
        }
        _ => Err(Error::Config(format!("no closed-form distance on {space}"))),
    }
}

fn sample_unit_vector(dim: usize, rng: &mut Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-300 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// `count` i.i.d. samples of the invariant probability measure.
pub fn haar_sample_space(space: &SpaceId, rng: &mut Rng, count: usize) -> Vec<SpacePoint> {
    match space {
        SpaceId::Sphere { n, .. } => {
            (0..count).map(|_| SpacePoint::Vector(sample_unit_vector(n + 1, rng))).collect()
        }
        SpaceId::ProjectiveSpace { n, .. } => (0..count)
            .map(|_| SpacePoint::Vector(canonical_projective(sample_unit_vector(n + 1, rng))))
            .collect(),
        SpaceId::Group(g) | SpaceId::Quotient { group: g, .. } => {
            haar_sample(*g, rng, count).into_iter().map(SpacePoint::Element).collect()
        }
    }
}

/// Monte Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
}

const CHUNK: usize = 256;

/// `(1/M) Σ_j k_G(x·h_j, y)` over `M` Haar samples `h_j` of `H`.
///
/// Samples are drawn in fixed chunks from independent substreams of
/// `seed`, so the estimate does not depend on the thread count.
pub fn periodic_summation_kernel<F>(
    group_kernel: F,
    group: GroupId,
    subgroup: &Subgroup,
    x: &GroupElement,
    y: &GroupElement,
    m_samples: usize,
    seed: u64,
) -> Result<Estimate>
where
    F: Fn(&GroupElement, &GroupElement) -> Result<f64> + Sync,
{
    if m_samples == 0 {
        return Err(Error::Config("periodic summation needs at least one sample".into()));
    }
    if *subgroup == Subgroup::Trivial {
        return Ok(Estimate { mean: group_kernel(x, y)?, std_error: 0.0 });
    }
    let chunks = m_samples.div_ceil(CHUNK);
    let partial: Vec<Result<(f64, f64)>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = substream(seed, c as u64);
            let len = CHUNK.min(m_samples - c * CHUNK);
            let mut s = 0.0;
            let mut s2 = 0.0;
            for _ in 0..len {
                let h = subgroup.sample(group, &mut rng);
                let v = group_kernel(&x.mul(&h)?, y)?;
                s += v;
                s2 += v * v;
            }
            Ok((s, s2))
        })
        .collect();
    let (mut s, mut s2) = (0.0, 0.0);
    for p in partial {
        let (a, b) = p?;
        s += a;
        s2 += b;
    }
    let m = m_samples as f64;
    let mean = s / m;
    let var = if m_samples > 1 { ((s2 - m * mean * mean) / (m - 1.0)).max(0.0) } else { 0.0 };
    Ok(Estimate { mean, std_error: (var / m).sqrt() })
}

/// `∫_H χ_λ(h) dμ_H(h)` by Monte Carlo, rounded to the nearest integer.
pub fn estimate_invariant_dimension(
    group: GroupId,
    subgroup: &Subgroup,
    sig: &Signature,
    samples: usize,
    seed: u64,
) -> u64 {
    let table = CharacterTable::new(group);
    let mut rng = substream(seed, 0);
    let mut acc = 0.0;
    for _ in 0..samples {
        let h = subgroup.sample(group, &mut rng);
        let t = crate::groups::torus_coordinates_unchecked(group, &h);
        acc += table.character(sig, &t).re;
    }
    (acc / samples as f64).round().max(0.0) as u64
}
