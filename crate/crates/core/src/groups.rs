//! Concrete `SU(n)` and `SO(n)` elements, maximal-torus coordinates, Weyl
//! characters and Haar sampling.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};
use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::pfaffian;
use crate::repr::{root_system, GroupFamily, GroupId, Signature};
use crate::rng::Rng;

/// Tolerance on `‖g*g − I‖_max` and `|det g − 1|`.
pub const MEMBERSHIP_TOL: f64 = 1e-10;

/// A matrix in `SU(n)` (complex) or `SO(n)` (real).
#[derive(Clone, Debug, PartialEq)]
pub enum GroupElement {
    Unitary(DMatrix<Complex64>),
    Orthogonal(DMatrix<f64>),
}

impl GroupElement {
    pub fn identity(group: GroupId) -> Self {
        let n = group.n();
        match group.family() {
            GroupFamily::SU => Self::Unitary(DMatrix::identity(n, n)),
            GroupFamily::SO => Self::Orthogonal(DMatrix::identity(n, n)),
        }
    }

    /// Checked constructor for `SO(n)`.
    pub fn orthogonal(m: DMatrix<f64>) -> Result<Self> {
        let g = Self::Orthogonal(m);
        g.validate()?;
        Ok(g)
    }

    /// Checked constructor for `SU(n)`.
    pub fn unitary(m: DMatrix<Complex64>) -> Result<Self> {
        let g = Self::Unitary(m);
        g.validate()?;
        Ok(g)
    }

    pub fn n(&self) -> usize {
        match self {
            Self::Unitary(m) => m.nrows(),
            Self::Orthogonal(m) => m.nrows(),
        }
    }

    pub fn family(&self) -> GroupFamily {
        match self {
            Self::Unitary(_) => GroupFamily::SU,
            Self::Orthogonal(_) => GroupFamily::SO,
        }
    }

    pub fn belongs_to(&self, group: GroupId) -> bool {
        self.family() == group.family() && self.n() == group.n()
    }

    /// Residual of the group-membership conditions.
    pub fn membership_residual(&self) -> f64 {
        match self {
            Self::Unitary(m) => {
                if !m.is_square() {
                    return f64::INFINITY;
                }
                let n = m.nrows();
                let gram = m.adjoint() * m - DMatrix::<Complex64>::identity(n, n);
                let off = gram.iter().map(|z| z.norm()).fold(0.0, f64::max);
                off.max((m.determinant() - Complex64::new(1.0, 0.0)).norm())
            }
            Self::Orthogonal(m) => {
                if !m.is_square() {
                    return f64::INFINITY;
                }
                let n = m.nrows();
                let gram = m.transpose() * m - DMatrix::<f64>::identity(n, n);
                gram.amax().max((m.determinant() - 1.0).abs())
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let r = self.membership_residual();
        if !(r <= MEMBERSHIP_TOL) {
            let what = match self {
                Self::Unitary(_) => "special unitary",
                Self::Orthogonal(_) => "special orthogonal",
            };
            return Err(Error::Domain(format!(
                "matrix is not {what}: residual {r:e} exceeds {MEMBERSHIP_TOL:e}"
            )));
        }
        Ok(())
    }

    pub fn inverse(&self) -> Self {
        match self {
            Self::Unitary(m) => Self::Unitary(m.adjoint()),
            Self::Orthogonal(m) => Self::Orthogonal(m.transpose()),
        }
    }

    /// Matrix product `self · other`.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        match (self, other) {
            (Self::Unitary(a), Self::Unitary(b)) if a.nrows() == b.nrows() => {
                Ok(Self::Unitary(a * b))
            }
            (Self::Orthogonal(a), Self::Orthogonal(b)) if a.nrows() == b.nrows() => {
                Ok(Self::Orthogonal(a * b))
            }
            _ => Err(Error::SpaceMismatch(format!(
                "cannot multiply {:?}({}) by {:?}({})",
                self.family(),
                self.n(),
                other.family(),
                other.n()
            ))),
        }
    }

    pub fn to_complex(&self) -> DMatrix<Complex64> {
        match self {
            Self::Unitary(m) => m.clone(),
            Self::Orthogonal(m) => m.map(|x| Complex64::new(x, 0.0)),
        }
    }

    pub fn trace(&self) -> Complex64 {
        match self {
            Self::Unitary(m) => m.trace(),
            Self::Orthogonal(m) => Complex64::new(m.trace(), 0.0),
        }
    }

    /// Row-major flattening: `n²` reals for `SO(n)`, `2n²` interleaved
    /// `(re, im)` values for `SU(n)`.
    pub fn to_flat(&self) -> Vec<f64> {
        match self {
            Self::Orthogonal(m) => {
                let n = m.nrows();
                (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| m[(i, j)]).collect()
            }
            Self::Unitary(m) => {
                let n = m.nrows();
                (0..n)
                    .flat_map(|i| (0..n).map(move |j| (i, j)))
                    .flat_map(|(i, j)| [m[(i, j)].re, m[(i, j)].im])
                    .collect()
            }
        }
    }

    /// Inverse of [`GroupElement::to_flat`], validating membership.
    pub fn from_flat(group: GroupId, values: &[f64]) -> Result<Self> {
        let n = group.n();
        let g = match group.family() {
            GroupFamily::SO => {
                if values.len() != n * n {
                    return Err(Error::Parse(format!(
                        "{group} points need {} values, got {}",
                        n * n,
                        values.len()
                    )));
                }
                Self::Orthogonal(DMatrix::from_row_slice(n, n, values))
            }
            GroupFamily::SU => {
                if values.len() != 2 * n * n {
                    return Err(Error::Parse(format!(
                        "{group} points need {} values (re, im interleaved), got {}",
                        2 * n * n,
                        values.len()
                    )));
                }
                let entries: Vec<Complex64> =
                    values.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect();
                Self::Unitary(DMatrix::from_row_slice(n, n, &entries))
            }
        };
        g.validate()?;
        Ok(g)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ElementRepr {
    Real(Vec<Vec<f64>>),
    Complex(Vec<Vec<[f64; 2]>>),
}

impl Serialize for GroupElement {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let repr = match self {
            Self::Orthogonal(m) => ElementRepr::Real(
                m.row_iter().map(|r| r.iter().copied().collect()).collect(),
            ),
            Self::Unitary(m) => ElementRepr::Complex(
                m.row_iter().map(|r| r.iter().map(|z| [z.re, z.im]).collect()).collect(),
            ),
        };
        repr.serialize(s)
    }
}

impl<'de> Deserialize<'de> for GroupElement {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let rows_ok = |n: usize, lens: Vec<usize>| lens.iter().all(|&l| l == n);
        let g = match ElementRepr::deserialize(d)? {
            ElementRepr::Real(rows) => {
                let n = rows.len();
                if !rows_ok(n, rows.iter().map(Vec::len).collect()) {
                    return Err(D::Error::custom("group element must be a square matrix"));
                }
                let flat: Vec<f64> = rows.into_iter().flatten().collect();
                Self::Orthogonal(DMatrix::from_row_slice(n, n, &flat))
            }
            ElementRepr::Complex(rows) => {
                let n = rows.len();
                if !rows_ok(n, rows.iter().map(Vec::len).collect()) {
                    return Err(D::Error::custom("group element must be a square matrix"));
                }
                let flat: Vec<Complex64> =
                    rows.into_iter().flatten().map(|[re, im]| Complex64::new(re, im)).collect();
                Self::Unitary(DMatrix::from_row_slice(n, n, &flat))
            }
        };
        g.validate().map_err(D::Error::custom)?;
        Ok(g)
    }
}

/// `g₂⁻¹ · g₁`.
pub fn group_difference(g1: &GroupElement, g2: &GroupElement) -> Result<GroupElement> {
    g2.inverse().mul(g1)
}

/// Angles `θ_j ∈ (−π, π]` of a maximal-torus element.
///
/// `SU(n)`: `n` angles, the eigenvalues being `e^{iθ_j}`. `SO(n)`: `⌊n/2⌋`
/// rotation angles of the block-diagonal form with blocks
/// `[[cos θ, −sin θ], [sin θ, cos θ]]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint {
    pub angles: Vec<f64>,
}

impl TorusPoint {
    pub fn new(angles: Vec<f64>) -> Self {
        Self { angles: angles.into_iter().map(wrap_angle).collect() }
    }

    pub fn identity(group: GroupId) -> Self {
        Self { angles: vec![0.0; group.signature_len()] }
    }

    pub fn gammas(&self) -> Vec<Complex64> {
        self.angles.iter().map(|&t| Complex64::from_polar(1.0, t)).collect()
    }

    /// The torus element itself.
    pub fn to_element(&self, group: GroupId) -> GroupElement {
        let n = group.n();
        match group.family() {
            GroupFamily::SU => GroupElement::Unitary(DMatrix::from_diagonal(&DVector::from_iterator(
                n,
                self.gammas(),
            ))),
            GroupFamily::SO => {
                let mut m = DMatrix::identity(n, n);
                for (j, &t) in self.angles.iter().enumerate() {
                    let (s, c) = t.sin_cos();
                    m[(2 * j, 2 * j)] = c;
                    m[(2 * j, 2 * j + 1)] = -s;
                    m[(2 * j + 1, 2 * j)] = s;
                    m[(2 * j + 1, 2 * j + 1)] = c;
                }
                GroupElement::Orthogonal(m)
            }
        }
    }
}

fn wrap_angle(t: f64) -> f64 {
    let mut t = t.rem_euclid(2.0 * PI);
    if t > PI {
        t -= 2.0 * PI;
    }
    t
}

/// A torus point conjugate to `g`.
pub fn torus_coordinates(group: GroupId, g: &GroupElement) -> Result<TorusPoint> {
    if !g.belongs_to(group) {
        return Err(Error::SpaceMismatch(format!(
            "element of size {} is not in {group}",
            g.n()
        )));
    }
    g.validate()?;
    Ok(torus_coordinates_unchecked(group, g))
}

pub(crate) fn torus_coordinates_unchecked(group: GroupId, g: &GroupElement) -> TorusPoint {
    match g {
        GroupElement::Unitary(m) => {
            if group.n() == 2 {
                let t = (m.trace().re / 2.0).clamp(-1.0, 1.0).acos();
                return TorusPoint { angles: vec![t, -t] };
            }
            let mut angles: Vec<f64> = unitary_eigenvalues(m).iter().map(|z| z.arg()).collect();
            angles.sort_by(|a, b| b.total_cmp(a));
            TorusPoint::new(angles)
        }
        GroupElement::Orthogonal(m) => {
            let n = group.n();
            if n == 3 {
                let t = ((m.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos();
                return TorusPoint { angles: vec![t] };
            }
            // the symmetric part has eigenvalues cos θ_j, each twice
            let sym = (m + m.transpose()) * 0.5;
            let mut abs: Vec<f64> = SymmetricEigen::new(sym)
                .eigenvalues
                .iter()
                .map(|c| c.clamp(-1.0, 1.0).acos())
                .collect();
            abs.sort_by(|a, b| b.total_cmp(a));
            if n % 2 == 1 {
                // the fixed axis contributes the smallest angle
                abs.pop();
            }
            let mut angles: Vec<f64> = abs.chunks(2).map(|c| 0.5 * (c[0] + c[1])).collect();
            if n.is_multiple_of(2) {
                // Pf((g − gᵀ)/2) = (−1)^k ∏ sin θ_j is conjugation invariant
                let skew = (m - m.transpose()) * 0.5;
                let k = angles.len() as i32;
                if (-1f64).powi(k) * pfaffian(&skew) < 0.0 {
                    let last = angles.len() - 1;
                    angles[last] = -angles[last];
                }
            }
            TorusPoint { angles }
        }
    }
}

/// Eigenvalues of a unitary matrix. A generic Hermitian combination of
/// `(U + U*)/2` and `(U − U*)/2i` shares the eigenvectors of `U`; the
/// remaining near-diagonal matrix is finished with a bounded Schur pass.
fn unitary_eigenvalues(u: &DMatrix<Complex64>) -> Vec<Complex64> {
    let i = Complex64::new(0.0, 1.0);
    let adj = u.adjoint();
    let herm = (u + &adj) * Complex64::new(0.5, 0.0);
    let skew = (u - &adj) * (-0.5 * i);
    let a = herm + skew * Complex64::new(0.618_033_988_749_894_8, 0.0);
    let a = (&a + a.adjoint()) * Complex64::new(0.5, 0.0);
    let v = SymmetricEigen::new(a).eigenvectors;
    let t = v.adjoint() * u * &v;
    let n = t.nrows();
    let off = (0..n)
        .flat_map(|r| (0..n).map(move |c| (r, c)))
        .filter(|(r, c)| r != c)
        .map(|(r, c)| t[(r, c)].norm())
        .fold(0.0, f64::max);
    if off > 1e-9 {
        if let Some(schur) = Schur::try_new(t.clone(), 1e-15, 200) {
            let (_, tri) = schur.unpack();
            return (0..n).map(|k| tri[(k, k)]).collect();
        }
    }
    (0..n).map(|k| t[(k, k)]).collect()
}

/// Shifted parts `q` entering the Weyl numerator for `sig`.
fn shifted_parts(group: GroupId, sig: &Signature) -> Vec<f64> {
    let len = group.signature_len();
    let p = sig.parts();
    match group.family() {
        GroupFamily::SU => (0..len).map(|i| (p[i] + (len - 1 - i) as i64) as f64).collect(),
        GroupFamily::SO if group.n() % 2 == 1 => {
            (0..len).map(|i| p[i] as f64 + (len - 1 - i) as f64 + 0.5).collect()
        }
        GroupFamily::SO => (0..len).map(|i| (p[i] + (len - 1 - i) as i64) as f64).collect(),
    }
}

fn det_in_place(a: &mut [Complex64], n: usize) -> Complex64 {
    let mut det = Complex64::new(1.0, 0.0);
    for k in 0..n {
        let mut piv = k;
        let mut best = a[k * n + k].norm();
        for i in (k + 1)..n {
            let v = a[i * n + k].norm();
            if v > best {
                best = v;
                piv = i;
            }
        }
        if best == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        if piv != k {
            for j in 0..n {
                a.swap(k * n + j, piv * n + j);
            }
            det = -det;
        }
        let d = a[k * n + k];
        det *= d;
        for i in (k + 1)..n {
            let f = a[i * n + k] / d;
            if f != Complex64::new(0.0, 0.0) {
                for j in (k + 1)..n {
                    let t = a[k * n + j];
                    a[i * n + j] -= f * t;
                }
            }
        }
    }
    det
}

#[derive(Clone, Copy)]
enum Entry {
    Exp,
    Cos2,
    ISin2,
}

fn alternant(entry: Entry, q: &[f64], z: &[Complex64], buf: &mut Vec<Complex64>) -> Complex64 {
    let n = q.len();
    buf.clear();
    let i = Complex64::new(0.0, 1.0);
    for zi in z {
        for &qj in q {
            let w = zi * qj;
            buf.push(match entry {
                Entry::Exp => (i * w).exp(),
                Entry::Cos2 => 2.0 * w.cos(),
                Entry::ISin2 => 2.0 * i * w.sin(),
            });
        }
    }
    det_in_place(buf, n)
}

/// Weyl numerator `j_w` at complex angles `z` (same normalisation for
/// numerator and denominator so their ratio is the character).
fn numerator(group: GroupId, q: &[f64], sign_last: f64, z: &[Complex64], buf: &mut Vec<Complex64>) -> Complex64 {
    match group.family() {
        GroupFamily::SU => alternant(Entry::Exp, q, z, buf),
        GroupFamily::SO if group.n() % 2 == 1 => alternant(Entry::ISin2, q, z, buf),
        GroupFamily::SO => {
            let xi0 = alternant(Entry::Cos2, q, z, buf);
            if sign_last == 0.0 {
                xi0
            } else {
                xi0 + sign_last * alternant(Entry::ISin2, q, z, buf)
            }
        }
    }
}

/// Relative Weyl denominator `∏|2 sin(α(θ)/2)| / 2^{#roots}` below which
/// characters switch to the contour evaluation.
pub const DEGENERACY_TOL: f64 = 1e-5;
const CONTOUR_POINTS: usize = 32;
const PRIMES: [f64; 12] = [2.0, 3.0, 5.0, 7.0, 11.0, 13.0, 17.0, 19.0, 23.0, 29.0, 31.0, 37.0];

/// Precomputed data for evaluating many characters of one group.
#[derive(Clone, Debug)]
pub struct CharacterTable {
    group: GroupId,
    roots: Vec<Vec<f64>>,
    rho_q: Vec<f64>,
    direction: Vec<f64>,
}

impl CharacterTable {
    pub fn new(group: GroupId) -> Self {
        let rs = root_system(group);
        let to_f = |r: &num_rational::Ratio<i128>| *r.numer() as f64 / *r.denom() as f64;
        let roots = rs.positive_roots.iter().map(|a| a.iter().map(to_f).collect()).collect();
        let rho_q = shifted_parts(group, &Signature::trivial(group));
        let len = group.signature_len();
        // generic direction: distinct gaps between coordinates, no root orthogonal to it
        let direction =
            (0..len).map(|j| (len - 1 - j) as f64 + 0.5 + 0.1 * PRIMES[j % PRIMES.len()].sqrt()).collect();
        Self { group, roots, rho_q, direction }
    }

    pub fn group(&self) -> GroupId {
        self.group
    }

    /// `∏|2 sin(α(θ)/2)| / 2^{#roots}`; zero exactly on the singular set.
    pub fn relative_denominator(&self, t: &TorusPoint) -> f64 {
        self.roots
            .iter()
            .map(|a| {
                let s: f64 = a.iter().zip(&t.angles).map(|(x, y)| x * y).sum();
                (0.5 * s).sin().abs()
            })
            .product()
    }

    /// `χ_λ(t)` for each signature in `sigs`.
    pub fn characters(&self, sigs: &[Signature], t: &TorusPoint) -> Vec<Complex64> {
        let group = self.group;
        let mut buf = Vec::new();
        let prepared: Vec<(Vec<f64>, f64)> = sigs
            .iter()
            .map(|s| {
                let sign = if group.is_even_orthogonal() {
                    s.parts().last().map_or(0.0, |&p| (p as f64).signum())
                } else {
                    0.0
                };
                let mut q = shifted_parts(group, s);
                if group.is_even_orthogonal() {
                    let last = q.len() - 1;
                    q[last] = q[last].abs();
                }
                (q, sign)
            })
            .collect();
        if self.relative_denominator(t) >= DEGENERACY_TOL {
            let z: Vec<Complex64> = t.angles.iter().map(|&x| Complex64::new(x, 0.0)).collect();
            let den = numerator(group, &self.rho_q, 0.0, &z, &mut buf);
            return prepared
                .iter()
                .map(|(q, sign)| numerator(group, q, *sign, &z, &mut buf) / den)
                .collect();
        }
        // Characters are trigonometric polynomials, hence entire in the
        // angles; the mean over a circle around t recovers χ(t) while the
        // circle itself avoids the singular set.
        let vmax = self.direction.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        let offsets: Vec<Complex64> = (0..CONTOUR_POINTS)
            .map(|j| {
                let phi = 2.0 * PI * (j as f64 + 0.5) / CONTOUR_POINTS as f64;
                Complex64::from_polar(1.0, phi)
            })
            .collect();
        let mut out = Vec::with_capacity(sigs.len());
        let qsum = |q: &[f64]| q.iter().map(|x| x.abs()).sum::<f64>();
        let mut dens: Vec<(f64, Vec<Complex64>)> = Vec::new();
        for (q, sign) in &prepared {
            let spread = (qsum(q) + qsum(&self.rho_q)) * vmax;
            let r = (4.0 / spread).min(0.5);
            let idx = match dens.iter().position(|(rr, _)| *rr == r) {
                Some(i) => i,
                None => {
                    let d = offsets
                        .iter()
                        .map(|o| {
                            let z = contour_point(&t.angles, &self.direction, r * o);
                            numerator(group, &self.rho_q, 0.0, &z, &mut buf)
                        })
                        .collect();
                    dens.push((r, d));
                    dens.len() - 1
                }
            };
            let mut acc = Complex64::new(0.0, 0.0);
            for (o, den) in offsets.iter().zip(&dens[idx].1) {
                let z = contour_point(&t.angles, &self.direction, r * o);
                acc += numerator(group, q, *sign, &z, &mut buf) / den;
            }
            out.push(acc / CONTOUR_POINTS as f64);
        }
        out
    }

    pub fn character(&self, sig: &Signature, t: &TorusPoint) -> Complex64 {
        self.characters(std::slice::from_ref(sig), t)[0]
    }
}

fn contour_point(angles: &[f64], dir: &[f64], s: Complex64) -> Vec<Complex64> {
    angles.iter().zip(dir).map(|(&a, &v)| Complex64::new(a, 0.0) + s * v).collect()
}

/// `χ_λ(t)` via the Weyl determinant ratio.
pub fn character(group: GroupId, sig: &Signature, t: &TorusPoint) -> Result<Complex64> {
    Signature::new(group, sig.parts().to_vec())?;
    if t.angles.len() != group.signature_len() {
        return Err(Error::Domain(format!(
            "{group} torus points have {} angles, got {}",
            group.signature_len(),
            t.angles.len()
        )));
    }
    Ok(CharacterTable::new(group).character(sig, t))
}

/// Haar-distributed unitary `n × n` matrix.
pub fn haar_unitary(n: usize, rng: &mut Rng) -> DMatrix<Complex64> {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let z = DMatrix::from_fn(n, n, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex64::new(re * scale, im * scale)
    });
    let qr = z.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Haar-distributed element of `SO(n)`; `n = 2` is allowed here because
/// it appears as a subgroup.
pub fn haar_orthogonal(n: usize, rng: &mut Rng) -> DMatrix<f64> {
    let z = DMatrix::<f64>::from_fn(n, n, |_, _| StandardNormal.sample(rng));
    let qr = z.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            for i in 0..n {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    if q.determinant() < 0.0 {
        for i in 0..n {
            q[(i, 0)] = -q[(i, 0)];
        }
    }
    q
}

fn haar_one(group: GroupId, rng: &mut Rng) -> GroupElement {
    let n = group.n();
    match group.family() {
        GroupFamily::SO => GroupElement::Orthogonal(haar_orthogonal(n, rng)),
        GroupFamily::SU => {
            let mut u = haar_unitary(n, rng);
            let det = u.determinant();
            let fix = Complex64::from_polar(1.0, -det.arg() / n as f64);
            u *= fix;
            GroupElement::Unitary(u)
        }
    }
}

/// `count` i.i.d. Haar samples of `group`.
pub fn haar_sample(group: GroupId, rng: &mut Rng, count: usize) -> Vec<GroupElement> {
    (0..count).map(|_| haar_one(group, rng)).collect()
}
