//! Irreducible representations of `SU(n)` and `SO(n)`.
//!
//! Representations are indexed by *signatures*: integer tuples that encode
//! the highest weight in the standard torus coordinates. All root and weight
//! arithmetic is carried out with exact rationals; floats only appear when an
//! eigenvalue is reported.
//!
//! Conventions:
//! - `SU(n)` signatures have `n` parts `p_1 ≥ … ≥ p_n`. Tuples differing by a
//!   constant shift label the same representation, so they are stored
//!   canonically with `p_n = 0`.
//! - `SO(2k+1)` signatures satisfy `p_1 ≥ … ≥ p_k ≥ 0`.
//! - `SO(2k)` signatures satisfy `p_1 ≥ … ≥ p_{k-1} ≥ |p_k|`.
//! - Eigenvalues of `-Δ` are measured in the metric `-B` induced by the
//!   Killing form `B`, i.e. `α_λ = (‖w+ρ‖² − ‖ρ‖²) / s` where `s` is
//!   [`RootSystemData::killing_scale`].

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Exact rational used for weights and roots.
pub type Rational = Ratio<i128>;

fn q(n: i128) -> Rational {
    Rational::from_integer(n)
}

fn half(n: i128) -> Rational {
    Rational::new(n, 2)
}

fn to_f64(r: &Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GroupFamily {
    SU,
    SO,
}

/// A supported compact group: `SU(n)` for `n ≥ 2` or `SO(n)` for `n ≥ 3`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroupId {
    family: GroupFamily,
    n: usize,
}

impl GroupId {
    pub fn new(family: GroupFamily, n: usize) -> Result<Self> {
        let ok = match family {
            GroupFamily::SU => n >= 2,
            GroupFamily::SO => n >= 3,
        };
        if !ok {
            return Err(Error::Config(format!(
                "unsupported group {family:?}({n}); supported families are SU(n) with n >= 2 and SO(n) with n >= 3"
            )));
        }
        Ok(Self { family, n })
    }

    pub fn su(n: usize) -> Result<Self> {
        Self::new(GroupFamily::SU, n)
    }

    pub fn so(n: usize) -> Result<Self> {
        Self::new(GroupFamily::SO, n)
    }

    pub fn family(&self) -> GroupFamily {
        self.family
    }

    /// Matrix size `n`.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Dimension of the maximal torus.
    pub fn rank(&self) -> usize {
        match self.family {
            GroupFamily::SU => self.n - 1,
            GroupFamily::SO => self.n / 2,
        }
    }

    /// Number of signature parts (equal to the number of torus angles used
    /// by the character formulas: `n` for `SU(n)`, `⌊n/2⌋` for `SO(n)`).
    pub fn signature_len(&self) -> usize {
        match self.family {
            GroupFamily::SU => self.n,
            GroupFamily::SO => self.n / 2,
        }
    }

    /// Manifold dimension.
    pub fn dimension(&self) -> usize {
        match self.family {
            GroupFamily::SU => self.n * self.n - 1,
            GroupFamily::SO => self.n * (self.n - 1) / 2,
        }
    }

    pub fn is_even_orthogonal(&self) -> bool {
        self.family == GroupFamily::SO && self.n.is_multiple_of(2)
    }
}

impl fmt::Display for GroupId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let fam = match self.family {
            GroupFamily::SU => "SU",
            GroupFamily::SO => "SO",
        };
        write!(f, "{fam}({})", self.n)
    }
}

impl FromStr for GroupId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_uppercase();
        let (fam, rest) = if let Some(r) = t.strip_prefix("SU") {
            (GroupFamily::SU, r)
        } else if let Some(r) = t.strip_prefix("SO") {
            (GroupFamily::SO, r)
        } else {
            return Err(Error::Config(format!(
                "unknown group '{s}'; supported families are SU(n) with n >= 2 and SO(n) with n >= 3"
            )));
        };
        let digits = rest.trim_start_matches('(').trim_end_matches(')');
        let n: usize = digits.parse().map_err(|_| {
            Error::Config(format!(
                "cannot parse group '{s}'; expected e.g. SU(2) or SO(3)"
            ))
        })?;
        GroupId::new(fam, n)
    }
}

impl Serialize for GroupId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for GroupId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Integer label of an irreducible representation. Ordered lexicographically.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Signature(Vec<i64>);

impl Signature {
    /// Validate `parts` against the ordering constraints of `group`.
    /// `SU(n)` signatures are shifted so that the last part is zero.
    pub fn new(group: GroupId, parts: Vec<i64>) -> Result<Self> {
        let len = group.signature_len();
        if parts.len() != len {
            return Err(Error::Domain(format!(
                "{group} signatures have {len} parts, got {}",
                parts.len()
            )));
        }
        let nonincreasing = parts.windows(2).all(|w| w[0] >= w[1]);
        match group.family() {
            GroupFamily::SU => {
                if !nonincreasing {
                    return Err(Error::Domain(format!(
                        "{group} signature {parts:?} must be nonincreasing"
                    )));
                }
                let last = *parts.last().expect("n >= 2");
                Ok(Self(parts.iter().map(|p| p - last).collect()))
            }
            GroupFamily::SO if group.n() % 2 == 1 => {
                if !nonincreasing || *parts.last().expect("k >= 1") < 0 {
                    return Err(Error::Domain(format!(
                        "{group} signature {parts:?} must satisfy p_1 >= ... >= p_k >= 0"
                    )));
                }
                Ok(Self(parts))
            }
            GroupFamily::SO => {
                let k = len;
                let head_ok = parts[..k - 1].windows(2).all(|w| w[0] >= w[1]);
                let tail_ok = k < 2 || parts[k - 2] >= parts[k - 1].abs();
                if !head_ok || !tail_ok {
                    return Err(Error::Domain(format!(
                        "{group} signature {parts:?} must satisfy p_1 >= ... >= p_(k-1) >= |p_k|"
                    )));
                }
                Ok(Self(parts))
            }
        }
    }

    pub fn trivial(group: GroupId) -> Self {
        Self(vec![0; group.signature_len()])
    }

    pub fn parts(&self) -> &[i64] {
        &self.0
    }

    pub fn is_trivial(&self) -> bool {
        self.0.iter().all(|&p| p == 0)
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, p) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, ")")
    }
}

/// Positive roots, `ρ`, and the Killing-form scale in torus-dual coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct RootSystemData {
    pub positive_roots: Vec<Vec<Rational>>,
    pub rho: Vec<Rational>,
    /// `s` such that `-B(X, Y) = s · (x · y)` on the torus coordinates;
    /// the dual inner product on weights is therefore `(λ · μ) / s`.
    pub killing_scale: Rational,
}

fn unit(len: usize, i: usize, sign: i128) -> Vec<Rational> {
    let mut v = vec![q(0); len];
    v[i] = q(sign);
    v
}

fn add(a: &[Rational], b: &[Rational]) -> Vec<Rational> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn dot(a: &[Rational], b: &[Rational]) -> Rational {
    a.iter().zip(b).fold(q(0), |acc, (x, y)| acc + x * y)
}

/// Standard realisation of the root system of `group`.
pub fn root_system(group: GroupId) -> RootSystemData {
    let len = group.signature_len();
    let mut roots = Vec::new();
    let killing_scale;
    match group.family() {
        GroupFamily::SU => {
            for i in 0..len {
                for j in (i + 1)..len {
                    roots.push(add(&unit(len, i, 1), &unit(len, j, -1)));
                }
            }
            killing_scale = q(2 * group.n() as i128);
        }
        GroupFamily::SO => {
            let k = len as i128;
            if group.n() % 2 == 1 {
                for i in 0..len {
                    roots.push(unit(len, i, 1));
                }
                killing_scale = q(4 * k - 2);
            } else {
                killing_scale = q(4 * k - 4);
            }
            for i in 0..len {
                for j in (i + 1)..len {
                    roots.push(add(&unit(len, i, 1), &unit(len, j, -1)));
                    roots.push(add(&unit(len, i, 1), &unit(len, j, 1)));
                }
            }
        }
    }
    let mut rho = vec![q(0); len];
    for r in &roots {
        rho = add(&rho, r);
    }
    let rho = rho.into_iter().map(|x| x / q(2)).collect();
    RootSystemData { positive_roots: roots, rho, killing_scale }
}

/// Highest weight of `sig` as a vector in the torus-dual coordinates
/// (projected onto `Σx = 0` for `SU(n)`).
pub fn highest_weight(group: GroupId, sig: &Signature) -> Vec<Rational> {
    let parts: Vec<Rational> = sig.parts().iter().map(|&p| q(p as i128)).collect();
    match group.family() {
        GroupFamily::SU => {
            let mean = parts.iter().fold(q(0), |a, b| a + b) / q(parts.len() as i128);
            parts.into_iter().map(|p| p - mean).collect()
        }
        GroupFamily::SO => parts,
    }
}

fn check_len(group: GroupId, sig: &Signature) -> Result<()> {
    if sig.parts().len() != group.signature_len() {
        return Err(Error::Domain(format!(
            "signature {sig} does not belong to {group}"
        )));
    }
    Ok(())
}

/// Exact eigenvalue of `-Δ` for the representation `sig`.
pub fn laplace_eigenvalue_exact(group: GroupId, sig: &Signature) -> Result<Rational> {
    check_len(group, sig)?;
    let rs = root_system(group);
    let w = highest_weight(group, sig);
    let shifted = add(&w, &rs.rho);
    Ok((dot(&shifted, &shifted) - dot(&rs.rho, &rs.rho)) / rs.killing_scale)
}

/// Eigenvalue `α_λ = ‖w+ρ‖²_{B*} − ‖ρ‖²_{B*}` of `-Δ` shared by all matrix
/// coefficients of the representation.
pub fn laplace_eigenvalue(group: GroupId, sig: &Signature) -> Result<f64> {
    laplace_eigenvalue_exact(group, sig).map(|r| to_f64(&r))
}

/// `∏(w+ρ, α) / ∏(ρ, α)` over positive roots.
pub fn weyl_dimension_from_roots(group: GroupId, sig: &Signature) -> Result<u64> {
    check_len(group, sig)?;
    let rs = root_system(group);
    let shifted = add(&highest_weight(group, sig), &rs.rho);
    let mut num = q(1);
    let mut den = q(1);
    for a in &rs.positive_roots {
        num *= dot(&shifted, a);
        den *= dot(&rs.rho, a);
    }
    rational_to_dimension(num / den)
}

fn rational_to_dimension(r: Rational) -> Result<u64> {
    if !r.is_integer() || r < q(1) {
        return Err(Error::Numerical(format!("Weyl dimension {r} is not a positive integer")));
    }
    u64::try_from(r.to_integer()).map_err(|_| Error::Numerical("dimension overflow".into()))
}

fn factorial(n: i128) -> i128 {
    (1..=n).product::<i128>().max(1)
}

/// Exact dimension of the representation with signature `sig`.
///
/// `SO(n)` uses the closed product formulas in the shifted parts `q_i`;
/// `SU(n)` uses the root product.
pub fn weyl_dimension(group: GroupId, sig: &Signature) -> Result<u64> {
    Signature::new(group, sig.parts().to_vec())?;
    match group.family() {
        GroupFamily::SU => weyl_dimension_from_roots(group, sig),
        GroupFamily::SO => {
            let k = group.signature_len() as i128;
            let p = sig.parts();
            let mut value;
            let qs: Vec<Rational>;
            if group.n() % 2 == 1 {
                // q_i = p_i + k - i + 1/2
                qs = (0..k as usize)
                    .map(|i| q(p[i] as i128) + q(k - 1 - i as i128) + half(1))
                    .collect();
                let mut den = 1i128;
                for j in 1..=k {
                    den *= factorial(2 * j - 1);
                }
                value = Rational::new(1i128 << k, den);
                for qi in &qs {
                    value *= qi;
                }
            } else {
                qs = (0..k as usize)
                    .map(|i| {
                        if i as i128 == k - 1 {
                            q((p[i] as i128).abs())
                        } else {
                            q(p[i] as i128 + k - 1 - i as i128)
                        }
                    })
                    .collect();
                let mut den = 1i128;
                for j in 1..k {
                    den *= factorial(2 * j);
                }
                value = Rational::new(1i128 << (k - 1), den);
            }
            for i in 0..qs.len() {
                for j in (i + 1)..qs.len() {
                    value *= qs[i] * qs[i] - qs[j] * qs[j];
                }
            }
            rational_to_dimension(value)
        }
    }
}

/// Signature `λ′` of the dual representation.
pub fn conjugate_signature(group: GroupId, sig: &Signature) -> Signature {
    match group.family() {
        GroupFamily::SU => {
            let parts: Vec<i64> = sig.parts().iter().rev().map(|p| -p).collect();
            Signature::new(group, parts).expect("dual of a valid signature is valid")
        }
        // The longest Weyl element is -1 except for SO(2k) with k odd, where
        // it also flips the sign of the last coordinate.
        GroupFamily::SO if group.n() % 4 == 2 => {
            let mut parts = sig.parts().to_vec();
            let last = parts.len() - 1;
            parts[last] = -parts[last];
            Signature(parts)
        }
        GroupFamily::SO => sig.clone(),
    }
}

/// An irreducible representation with its derived data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Representation {
    pub signature: Signature,
    pub dimension: u64,
    pub eigenvalue: f64,
    pub conjugate_signature: Signature,
    pub self_conjugate: bool,
}

impl Representation {
    pub fn new(group: GroupId, signature: Signature) -> Result<Self> {
        let dimension = weyl_dimension(group, &signature)?;
        let eigenvalue = laplace_eigenvalue(group, &signature)?;
        let conjugate_signature = conjugate_signature(group, &signature);
        let self_conjugate = conjugate_signature == signature;
        Ok(Self { signature, dimension, eigenvalue, conjugate_signature, self_conjugate })
    }
}

/// All valid signatures whose largest absolute part is at most `bound`.
fn signatures_in_box(group: GroupId, bound: i64) -> Vec<Signature> {
    let len = group.signature_len();
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(len);
    match group.family() {
        GroupFamily::SU => {
            // canonical: p_n = 0, B >= p_1 >= ... >= p_{n-1} >= 0
            fill_nonincreasing(&mut current, len - 1, bound, 0, &mut |parts| {
                let mut v = parts.to_vec();
                v.push(0);
                out.push(Signature(v));
            });
        }
        GroupFamily::SO if group.n() % 2 == 1 => {
            fill_nonincreasing(&mut current, len, bound, 0, &mut |parts| {
                out.push(Signature(parts.to_vec()));
            });
        }
        GroupFamily::SO => {
            if len == 1 {
                unreachable!("SO(2) is not supported");
            }
            fill_nonincreasing(&mut current, len - 1, bound, 0, &mut |parts| {
                let m = *parts.last().expect("k >= 2");
                for last in -m..=m {
                    let mut v = parts.to_vec();
                    v.push(last);
                    out.push(Signature(v));
                }
            });
        }
    }
    out
}

fn fill_nonincreasing(
    current: &mut Vec<i64>,
    remaining: usize,
    upper: i64,
    lower: i64,
    emit: &mut dyn FnMut(&[i64]),
) {
    if remaining == 0 {
        emit(current);
        return;
    }
    for v in lower..=upper {
        current.push(v);
        fill_nonincreasing(current, remaining - 1, v, lower, emit);
        current.pop();
    }
}

/// Lower bound on `α_λ` for any signature with a part of absolute value
/// strictly greater than `bound`.
fn eigenvalue_floor_outside(group: GroupId, bound: i64) -> Rational {
    let rs = root_system(group);
    let b = q(bound as i128 + 1);
    match group.family() {
        // α ≥ ‖w‖²/s ≥ (p_1 - p_n)² / (2s)
        GroupFamily::SU => b * b / (q(2) * rs.killing_scale),
        // α ≥ Σ p_i² / s ≥ p_1² / s
        GroupFamily::SO => b * b / rs.killing_scale,
    }
}

/// The `budget` representations of smallest Laplace eigenvalue, sorted by
/// `(α_λ, signature)`.
///
/// If the cut falls between a non-self-conjugate `λ` and its dual `λ′`
/// (which share the same eigenvalue), `λ′` is appended so that conjugate
/// pairs are never split; the result can then hold `budget + 1` entries.
pub fn enumerate_representations(group: GroupId, budget: usize) -> Result<Vec<Representation>> {
    if budget == 0 {
        return Err(Error::Config("representation budget must be at least 1".into()));
    }
    let mut bound: i64 = 1;
    loop {
        let mut keyed: Vec<(Rational, Signature)> = signatures_in_box(group, bound)
            .into_iter()
            .map(|s| Ok((laplace_eigenvalue_exact(group, &s)?, s)))
            .collect::<Result<_>>()?;
        keyed.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
        if keyed.len() >= budget && keyed[budget - 1].0 < eigenvalue_floor_outside(group, bound) {
            let mut chosen: Vec<(Rational, Signature)> = keyed[..budget].to_vec();
            let missing: Vec<(Rational, Signature)> = chosen
                .iter()
                .filter_map(|(a, s)| {
                    let c = conjugate_signature(group, s);
                    (!chosen.iter().any(|(_, t)| *t == c)).then_some((*a, c))
                })
                .collect();
            chosen.extend(missing);
            chosen.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
            chosen.dedup_by(|a, b| a.1 == b.1);
            return chosen.into_iter().map(|(_, s)| Representation::new(group, s)).collect();
        }
        bound *= 2;
        if bound > 1 << 20 {
            return Err(Error::Numerical("signature enumeration did not terminate".into()));
        }
    }
}

impl PartialOrd for Representation {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(
            self.eigenvalue
                .total_cmp(&other.eigenvalue)
                .then_with(|| self.signature.cmp(&other.signature)),
        )
    }
}
