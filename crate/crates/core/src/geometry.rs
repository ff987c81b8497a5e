//! Points of the commuting p-nilpotent variety `C_r`, the reversal involution,
//! the two scalar gradings, Jordan partitions, and a seeded sampler.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Elem, Field, FieldDesc};
use crate::linalg::{Mat, MatJson};

/// Lie subalgebra restricting which matrices may appear in a tuple.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Tag {
    /// All of `gl_N`.
    Gl,
    /// Trace-zero matrices.
    Sl,
    /// Strictly upper triangular matrices (the Heisenberg algebra for `N = 3`).
    U3,
    /// `Lie(G_a^s)` inside `gl_{2s}`: multiples of `e_{2k,2k+1}` (0-based),
    /// one `2x2` block per factor.
    Ga(usize),
}

impl Tag {
    pub fn parse(s: &str) -> Result<Tag> {
        match s {
            "gl" => Ok(Tag::Gl),
            "sl" => Ok(Tag::Sl),
            "u3" => Ok(Tag::U3),
            "ga" => Ok(Tag::Ga(1)),
            _ => s
                .strip_prefix("ga^")
                .and_then(|k| k.parse::<usize>().ok())
                .filter(|&k| k >= 1)
                .map(Tag::Ga)
                .ok_or_else(|| Error::Parse(format!("unknown subalgebra tag {s:?}"))),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Tag::Gl => "gl".into(),
            Tag::Sl => "sl".into(),
            Tag::U3 => "u3".into(),
            Tag::Ga(1) => "ga".into(),
            Tag::Ga(s) => format!("ga^{s}"),
        }
    }

    /// Whether `m` lies in the tagged subspace.
    pub fn contains(&self, m: &Mat) -> bool {
        let f = m.field();
        let n = m.rows();
        match self {
            Tag::Gl => true,
            Tag::Sl => f.is_zero(&m.trace()),
            Tag::U3 => (0..n).all(|i| (0..=i).all(|j| f.is_zero(m.get(i, j)))),
            Tag::Ga(s) => {
                n == 2 * s
                    && (0..n).all(|i| {
                        (0..n).all(|j| f.is_zero(m.get(i, j)) || (i % 2 == 0 && j == i + 1))
                    })
            }
        }
    }

    /// A basis of the nilpotent part used by the sampler: strictly upper
    /// triangular units, or the `G_a` pattern.
    fn nilradical_basis(&self, field: &Field, n: usize) -> Vec<Mat> {
        match self {
            Tag::Ga(s) => (0..*s).map(|k| Mat::unit(field, n, n, 2 * k, 2 * k + 1)).collect(),
            _ => {
                let mut out = Vec::new();
                for i in 0..n {
                    for j in i + 1..n {
                        out.push(Mat::unit(field, n, n, i, j));
                    }
                }
                out
            }
        }
    }
}

impl Serialize for Tag {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.name())
    }
}

impl<'de> Deserialize<'de> for Tag {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Tag, D::Error> {
        let s = String::deserialize(d)?;
        Tag::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// An r-tuple `(B_0, ..., B_{r-1})` of pairwise commuting p-nilpotent
/// `N x N` matrices over a common field.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NilTuple {
    field: Field,
    n: usize,
    tag: Option<Tag>,
    b: Vec<Mat>,
}

/// Wire format `{"p","N","r","tag","B":[..]}` with an optional field descriptor.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NilTupleJson {
    pub p: u32,
    #[serde(rename = "N")]
    pub n: usize,
    pub r: usize,
    #[serde(default)]
    pub tag: Option<Tag>,
    #[serde(rename = "B")]
    pub b: Vec<MatJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<FieldDesc>,
}

pub fn is_p_nilpotent(b: &Mat, p: u32) -> bool {
    b.is_square() && b.pow(p as usize).is_zero()
}

impl NilTuple {
    /// Validated constructor.
    pub fn new(field: &Field, n: usize, tag: Option<Tag>, b: Vec<Mat>) -> Result<NilTuple> {
        let t = NilTuple { field: field.clone(), n, tag, b };
        t.validate()?;
        Ok(t)
    }

    pub fn zero(field: &Field, n: usize, r: usize, tag: Option<Tag>) -> NilTuple {
        NilTuple { field: field.clone(), n, tag, b: vec![Mat::zeros(field, n, n); r] }
    }

    /// `G_a` point with scalars `b_i`: `B_i = b_i e_{01}` in `gl_2`.
    pub fn ga(field: &Field, scalars: &[Elem]) -> NilTuple {
        let b = scalars
            .iter()
            .map(|x| {
                let mut m = Mat::zeros(field, 2, 2);
                m.set(0, 1, x.clone());
                m
            })
            .collect();
        NilTuple { field: field.clone(), n: 2, tag: Some(Tag::Ga(1)), b }
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn p(&self) -> u32 {
        self.field.p()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> usize {
        self.b.len()
    }

    pub fn tag(&self) -> Option<&Tag> {
        self.tag.as_ref()
    }

    pub fn mats(&self) -> &[Mat] {
        &self.b
    }

    pub fn is_zero(&self) -> bool {
        self.b.iter().all(Mat::is_zero)
    }

    /// For `G_a` tuples, the scalars `b_i` (entry `(0,1)` of each `B_i`).
    pub fn ga_scalars(&self) -> Result<Vec<Elem>> {
        if self.n != 2 || !self.b.iter().all(|m| Tag::Ga(1).contains(m)) {
            return Err(Error::InvalidTuple("not a G_a tuple (B_i must be multiples of e_01 in gl_2)".into()));
        }
        Ok(self.b.iter().map(|m| m.get(0, 1).clone()).collect())
    }

    /// Checks every invariant, reporting the first failure.
    pub fn validate(&self) -> Result<()> {
        let p = self.p();
        for (i, m) in self.b.iter().enumerate() {
            if m.rows() != self.n || m.cols() != self.n || *m.field() != self.field {
                return Err(Error::InvalidTuple(format!("B_{i} is not an {0}x{0} matrix over {1}", self.n, self.field.name())));
            }
            if !is_p_nilpotent(m, p) {
                return Err(Error::NotNilpotent(format!("B_{i}^{p} != 0")));
            }
            if let Some(tag) = &self.tag {
                if !tag.contains(m) {
                    return Err(Error::InvalidTuple(format!("B_{i} is not in {}", tag.name())));
                }
            }
        }
        for i in 0..self.b.len() {
            for j in i + 1..self.b.len() {
                if !self.b[i].commutator(&self.b[j]).is_zero() {
                    return Err(Error::InvalidTuple(format!("[B_{i}, B_{j}] != 0")));
                }
            }
        }
        Ok(())
    }

    /// Membership in `C_r` (and in the tagged subalgebra, if any).
    pub fn in_c_r(&self) -> bool {
        self.validate().is_ok()
    }

    fn with_mats(&self, b: Vec<Mat>) -> NilTuple {
        NilTuple { field: self.field.clone(), n: self.n, tag: self.tag.clone(), b }
    }

    /// `(B_0, ..., B_{r-1}) -> (B_{r-1}, ..., B_0)`.
    pub fn lambda_r(&self) -> NilTuple {
        self.with_mats(self.b.iter().rev().cloned().collect())
    }

    /// `B_i -> a^(p^i) B_i`.
    pub fn act_dot(&self, a: &Elem) -> NilTuple {
        self.with_mats(
            self.b.iter().enumerate().map(|(i, m)| m.scale(&self.field.frobenius_pow(a, i as u32))).collect(),
        )
    }

    /// `B_i -> a^(p^(r-1-i)) B_i`.
    pub fn act_star(&self, a: &Elem) -> NilTuple {
        let r = self.r();
        self.with_mats(
            self.b
                .iter()
                .enumerate()
                .map(|(i, m)| m.scale(&self.field.frobenius_pow(a, (r - 1 - i) as u32)))
                .collect(),
        )
    }

    /// `B_i -> g B_i g^{-1}`.
    pub fn conjugate(&self, g: &Mat) -> Result<NilTuple> {
        let gi = g.inverse()?;
        Ok(self.with_mats(self.b.iter().map(|m| g.mul(m).mul(&gi)).collect()))
    }

    /// Appends `e` zero matrices: `(B, 0, ..., 0)`.
    pub fn pad_zeros(&self, e: usize) -> NilTuple {
        let mut b = self.b.clone();
        b.extend(std::iter::repeat_n(Mat::zeros(&self.field, self.n, self.n), e));
        self.with_mats(b)
    }

    /// `(A_0, ..., A_{e-1}, B_0, ..., B_{r-1})`; fails unless the result
    /// still lies in `C_{r+e}`.
    pub fn prepend(&self, a: &[Mat]) -> Result<NilTuple> {
        let mut b = a.to_vec();
        b.extend(self.b.iter().cloned());
        NilTuple::new(&self.field, self.n, self.tag.clone(), b)
    }

    /// Entrywise Frobenius `x -> x^(p^e)` on every `B_i`.
    pub fn frobenius(&self, e: u32) -> NilTuple {
        self.with_mats(self.b.iter().map(|m| m.frobenius(e)).collect())
    }

    pub fn embed(&self, target: &Field) -> Result<NilTuple> {
        let b = self.b.iter().map(|m| m.embed(target)).collect::<Result<_>>()?;
        Ok(NilTuple { field: target.clone(), n: self.n, tag: self.tag.clone(), b })
    }

    pub fn to_json(&self) -> NilTupleJson {
        NilTupleJson {
            p: self.p(),
            n: self.n,
            r: self.r(),
            tag: self.tag.clone(),
            b: self.b.iter().map(Mat::to_json).collect(),
            field: Some(self.field.desc()),
        }
    }

    /// Parses and validates; the field defaults to `F_p` unless the JSON
    /// names one or `default_field` is given.
    pub fn from_json(j: &NilTupleJson, default_field: Option<&Field>) -> Result<NilTuple> {
        let field = match (&j.field, default_field) {
            (Some(d), _) => Field::from_desc(d)?,
            (None, Some(f)) => f.clone(),
            (None, None) => Field::prime(j.p)?,
        };
        if field.p() != j.p {
            return Err(Error::InvalidTuple(format!("p = {} but field is {}", j.p, field.name())));
        }
        if j.b.len() != j.r {
            return Err(Error::InvalidTuple(format!("r = {} but {} matrices given", j.r, j.b.len())));
        }
        let b = j.b.iter().map(|m| Mat::from_json(m, &field)).collect::<Result<Vec<_>>>()?;
        NilTuple::new(&field, j.n, j.tag.clone(), b)
    }
}

/// Multiplicities `m_1, ..., m_p` of Jordan blocks of sizes `1..=p`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct JordanType {
    pub p: u32,
    /// `mult[j-1]` is the number of blocks of size `j`.
    pub mult: Vec<usize>,
}

impl JordanType {
    pub fn dim(&self) -> usize {
        self.mult.iter().enumerate().map(|(i, m)| (i + 1) * m).sum()
    }

    /// Number of blocks of size `j` (`1 <= j <= p`).
    pub fn m(&self, j: usize) -> usize {
        self.mult.get(j.wrapping_sub(1)).copied().unwrap_or(0)
    }

    /// True iff some block has size `< p`, i.e. the operator is not free.
    pub fn is_stable_nonzero(&self) -> bool {
        self.mult[..self.mult.len() - 1].iter().any(|&m| m > 0)
    }

    pub fn is_free(&self) -> bool {
        !self.is_stable_nonzero()
    }

    /// Blocks of size `p` contribute `p * m_p` dimensions.
    pub fn free_dim(&self) -> usize {
        self.p as usize * self.mult[self.mult.len() - 1]
    }

    pub fn direct_sum(&self, other: &JordanType) -> JordanType {
        assert_eq!(self.p, other.p);
        JordanType { p: self.p, mult: self.mult.iter().zip(&other.mult).map(|(a, b)| a + b).collect() }
    }
}

impl fmt::Display for JordanType {
    /// `[3]^1 + [1]^2`, largest blocks first; `0` for the zero space.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = (1..=self.p as usize)
            .rev()
            .filter(|&j| self.m(j) > 0)
            .map(|j| format!("[{j}]^{}", self.m(j)))
            .collect();
        if parts.is_empty() {
            write!(f, "0")
        } else {
            write!(f, "{}", parts.join(" + "))
        }
    }
}

/// `rank(theta^j)` for `j = 0..=upto`, by repeatedly applying `theta` to a
/// basis of the previous image.
pub fn rank_sequence(theta: &Mat, upto: usize) -> Vec<usize> {
    let n = theta.rows();
    if upto > 0 {
        if let Some(rs) = crate::specialize::power_ranks(theta, upto) {
            return std::iter::once(n).chain(rs).collect();
        }
    }
    let mut ranks = vec![n];
    let mut img = Mat::identity(theta.field(), n);
    for _ in 0..upto {
        if img.cols() == 0 {
            ranks.push(0);
            continue;
        }
        img = theta.mul(&img).image_mat();
        ranks.push(img.cols());
    }
    ranks
}

/// Jordan type of a p-nilpotent operator via the rank second differences
/// `m_j = rank(θ^{j-1}) - 2 rank(θ^j) + rank(θ^{j+1})`.
pub fn jordan_partition(theta: &Mat, p: u32) -> Result<JordanType> {
    if !theta.is_square() {
        return Err(Error::Dimension("Jordan type of a non-square matrix".into()));
    }
    let p_us = p as usize;
    let r = rank_sequence(theta, p_us + 1);
    if r[p_us] != 0 {
        return Err(Error::NotNilpotent(format!("theta^{p} has rank {}", r[p_us])));
    }
    let mult = (1..=p_us).map(|j| r[j - 1] + r[j + 1] - 2 * r[j]).collect();
    Ok(JordanType { p, mult })
}

/// Largest number of resampling attempts before [`Error::SamplerExhausted`].
pub const RETRY_CAP: usize = 1000;

fn random_invertible<R: Rng + ?Sized>(field: &Field, n: usize, rng: &mut R) -> Mat {
    loop {
        let data = (0..n * n).map(|_| field.random(rng)).collect();
        let g = Mat::from_elems(field, n, n, data).unwrap();
        if g.rank() == n {
            return g;
        }
    }
}

fn random_unipotent_upper<R: Rng + ?Sized>(field: &Field, n: usize, rng: &mut R) -> Mat {
    let mut g = Mat::identity(field, n);
    for i in 0..n {
        for j in i + 1..n {
            g.set(i, j, field.random(rng));
        }
    }
    g
}

/// A random element of the group acting on tuples of the given tag by
/// conjugation: invertible for `gl`/`sl`, unipotent upper triangular for
/// `u3`, and the identity for `G_a` tuples (the group is abelian).
pub fn random_group_element<R: Rng + ?Sized>(field: &Field, n: usize, tag: Option<&Tag>, rng: &mut R) -> Mat {
    match tag.unwrap_or(&Tag::Gl) {
        Tag::Gl | Tag::Sl => random_invertible(field, n, rng),
        Tag::U3 => random_unipotent_upper(field, n, rng),
        Tag::Ga(_) => Mat::identity(field, n),
    }
}

/// Draws a point of `C_r` (within the tagged subalgebra).
///
/// `B_0` is a random element of the nilradical pattern (strictly upper
/// triangular, or the `G_a` pattern) conjugated by a random group element
/// `g` (invertible for `gl`/`sl`, unipotent upper triangular for `u3`,
/// trivial for `ga`).  Each later `B_i` is a random element of the
/// centralizer of `B_0..B_{i-1}` inside the same conjugated nilradical,
/// found as a kernel.  Candidates failing `X^p = 0` are redrawn, up to
/// [`RETRY_CAP`] times.
pub fn sample_c_r_with<R: Rng + ?Sized>(
    field: &Field,
    n: usize,
    r: usize,
    tag: Option<Tag>,
    rng: &mut R,
) -> Result<NilTuple> {
    let p = field.p();
    let eff_tag = tag.clone().unwrap_or(Tag::Gl);
    if let Tag::Ga(s) = eff_tag {
        if n != 2 * s {
            return Err(Error::InvalidTuple(format!("tag ga^{s} needs N = {}", 2 * s)));
        }
    }
    let g = match eff_tag {
        Tag::Gl | Tag::Sl => random_invertible(field, n, rng),
        Tag::U3 => random_unipotent_upper(field, n, rng),
        Tag::Ga(_) => Mat::identity(field, n),
    };
    let gi = g.inverse()?;
    let basis: Vec<Mat> = eff_tag.nilradical_basis(field, n).iter().map(|e| g.mul(e).mul(&gi)).collect();
    let mut mats: Vec<Mat> = Vec::with_capacity(r);
    for _ in 0..r {
        // Coefficient vectors c with [sum c_k E_k, B_j] = 0 for all earlier B_j.
        let kernel: Vec<Vec<Elem>> = if mats.is_empty() || basis.is_empty() {
            (0..basis.len())
                .map(|k| (0..basis.len()).map(|l| if k == l { field.one() } else { field.zero() }).collect())
                .collect()
        } else {
            let mut cols = Vec::with_capacity(basis.len());
            for e in &basis {
                let mut col = Vec::new();
                for bj in &mats {
                    col.extend(e.commutator(bj).entries().iter().cloned());
                }
                cols.push(col);
            }
            let rows = cols[0].len();
            Mat::from_columns(field, rows, &cols)?.kernel_basis()
        };
        let mut found = None;
        for _ in 0..RETRY_CAP {
            let mut x = Mat::zeros(field, n, n);
            for v in &kernel {
                let c = field.random(rng);
                if field.is_zero(&c) {
                    continue;
                }
                for (k, e) in basis.iter().enumerate() {
                    if !field.is_zero(&v[k]) {
                        x = x.add(&e.scale(&field.mul(&c, &v[k])));
                    }
                }
            }
            if is_p_nilpotent(&x, p) {
                found = Some(x);
                break;
            }
        }
        mats.push(found.ok_or(Error::SamplerExhausted(RETRY_CAP))?);
    }
    let t = NilTuple { field: field.clone(), n, tag, b: mats };
    debug_assert!(t.in_c_r());
    Ok(t)
}

/// Seeded entry point for [`sample_c_r_with`].
pub fn sample_c_r(field: &Field, n: usize, r: usize, tag: Option<Tag>, seed: u64) -> Result<NilTuple> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_c_r_with(field, n, r, tag, &mut rng)
}

/// Moves an `F_p`-rational tuple to a generic point over `F_p(s)`: conjugate
/// by a random unipotent matrix with entries in `s F_p` (allowed by the tag)
/// and scale by `s + c` under the dot action.  The result lies on a line through the
/// original orbit and stays in `C_r`.
pub fn generic_line_point<R: Rng + ?Sized>(t: &NilTuple, rng: &mut R) -> Result<NilTuple> {
    let fs = Field::ratfun(t.p())?;
    let lifted = t.embed(&fs)?;
    let s = fs.generator()?;
    let n = t.n();
    let conj = match t.tag().cloned().unwrap_or(Tag::Gl) {
        Tag::Gl | Tag::Sl => {
            // A product of unipotent lower and upper factors: determinant one
            // and an inverse with polynomial entries, so the conjugated tuple
            // never picks up denominators.
            let mut lower = Mat::identity(&fs, n);
            let mut upper = Mat::identity(&fs, n);
            for i in 0..n {
                for j in 0..i {
                    lower.set(i, j, fs.mul(&s, &fs.from_i64(rng.gen_range(0..t.p()) as i64)));
                    upper.set(j, i, fs.mul(&s, &fs.from_i64(rng.gen_range(0..t.p()) as i64)));
                }
            }
            Some(lower.mul(&upper))
        }
        Tag::U3 => {
            let mut x = Mat::identity(&fs, n);
            for i in 0..n {
                for j in i + 1..n {
                    x.set(i, j, fs.mul(&s, &fs.from_i64(rng.gen_range(0..t.p()) as i64)));
                }
            }
            Some(x)
        }
        Tag::Ga(_) => None,
    };
    let moved = match conj {
        Some(g) => lifted.conjugate(&g)?,
        None => lifted,
    };
    let c = fs.from_i64(rng.gen_range(0..t.p()) as i64);
    Ok(moved.act_dot(&fs.add(&s, &c)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f3() -> Field {
        Field::prime(3).unwrap()
    }

    #[test]
    fn nilpotency_examples() {
        let f = f3();
        assert!(is_p_nilpotent(&Mat::zeros(&f, 3, 3), 3));
        let shift = |n: usize| {
            let mut m = Mat::zeros(&f, n, n);
            for i in 0..n - 1 {
                m.set(i, i + 1, f.one());
            }
            m
        };
        assert!(is_p_nilpotent(&shift(3), 3));
        assert!(!is_p_nilpotent(&shift(4), 3));
        assert!(is_p_nilpotent(&shift(2), 3));
    }

    #[test]
    fn membership_examples() {
        let f = f3();
        assert!(NilTuple::zero(&f, 3, 2, None).in_c_r());
        let e12 = Mat::unit(&f, 3, 3, 0, 1);
        let e13 = Mat::unit(&f, 3, 3, 0, 2);
        let e23 = Mat::unit(&f, 3, 3, 1, 2);
        assert!(NilTuple::new(&f, 3, None, vec![e12.clone(), e13]).is_ok());
        assert!(NilTuple::new(&f, 3, None, vec![e12, e23]).is_err());
    }

    #[test]
    fn gradings() {
        let f = f3();
        let t = sample_c_r(&f, 3, 2, None, 7).unwrap();
        let two = f.from_i64(2);
        let d = t.act_dot(&two);
        assert_eq!(d.mats()[0], t.mats()[0].scale(&two));
        assert_eq!(d.mats()[1], t.mats()[1].scale(&two));
        assert_eq!(t.act_dot(&f.one()), t);
        assert!(t.act_dot(&f.zero()).is_zero());
        assert_eq!(t.lambda_r().lambda_r(), t);
        let f9 = Field::extension(3, 2).unwrap();
        let t9 = sample_c_r(&f9, 3, 3, None, 1).unwrap();
        let a = f9.generator().unwrap();
        assert_eq!(t9.act_star(&a).lambda_r(), t9.lambda_r().act_dot(&a));
    }

    #[test]
    fn jordan_examples() {
        let f = f3();
        let jt = jordan_partition(&Mat::zeros(&f, 4, 4), 3).unwrap();
        assert_eq!(jt.mult, vec![4, 0, 0]);
        let mut th = Mat::zeros(&f, 5, 5);
        th.set(0, 1, f.one());
        th.set(2, 3, f.one());
        th.set(3, 4, f.one());
        let jt = jordan_partition(&th, 3).unwrap();
        assert_eq!((jt.m(2), jt.m(3)), (1, 1));
        assert_eq!(jt.to_string(), "[3]^1 + [2]^1");
        assert_eq!(rank_sequence(&th, 3), vec![5, 3, 1, 0]);
    }

    #[test]
    fn sampler_examples() {
        let f = f3();
        assert!(sample_c_r(&f, 1, 2, None, 0).unwrap().is_zero());
        for seed in 0..20 {
            assert!(sample_c_r(&f, 3, 2, Some(Tag::Gl), seed).unwrap().in_c_r());
            assert!(sample_c_r(&f, 4, 2, Some(Tag::Ga(2)), seed).unwrap().in_c_r());
        }
        assert_eq!(sample_c_r(&f, 3, 2, None, 5).unwrap(), sample_c_r(&f, 3, 2, None, 5).unwrap());
    }

    #[test]
    fn tag_parsing() {
        for s in ["gl", "sl", "u3", "ga", "ga^3"] {
            assert_eq!(Tag::parse(s).unwrap().name(), s);
        }
        assert!(Tag::parse("ga^0").is_err());
    }
}
