//! Exact field arithmetic.
//!
//! Three kinds of field are supported, all of characteristic `p`:
//!
//! * the prime field `F_p`,
//! * an extension `F_{p^d}` presented as `F_p[s]/(f)` where `f` is the
//!   lexicographically smallest monic irreducible polynomial of degree `d`,
//! * the rational function field `F_p(s)`, used for generic points.
//!
//! Elements are plain values ([`Elem`]) whose meaning depends on the owning
//! [`Field`]; matrices store a single field handle next to a flat element
//! buffer.  [`FieldElem`] bundles a value with its field for convenient
//! scalar arithmetic.
//!
//! Finite-field elements are encoded as integers `sum c_i p^i` where
//! `c_0 + c_1 s + ...` is the residue polynomial.  Multiplication in
//! extensions uses discrete log tables built once per field.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};

/// Polynomials over `F_p`, lowest degree first, with no trailing zeros.
pub mod poly {
    pub type Poly = Vec<u32>;

    pub fn trim(mut a: Poly) -> Poly {
        while a.last() == Some(&0) {
            a.pop();
        }
        a
    }

    pub fn degree(a: &[u32]) -> Option<usize> {
        if a.is_empty() {
            None
        } else {
            Some(a.len() - 1)
        }
    }

    pub fn inv_mod(a: u32, p: u32) -> u32 {
        debug_assert!(!a.is_multiple_of(p));
        pow_mod(a, p - 2, p)
    }

    pub fn pow_mod(a: u32, mut e: u32, p: u32) -> u32 {
        let (mut base, mut acc) = (a as u64 % p as u64, 1u64);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base % p as u64;
            }
            base = base * base % p as u64;
            e >>= 1;
        }
        acc as u32
    }

    pub fn add(a: &[u32], b: &[u32], p: u32) -> Poly {
        let n = a.len().max(b.len());
        let out = (0..n)
            .map(|i| (a.get(i).copied().unwrap_or(0) + b.get(i).copied().unwrap_or(0)) % p)
            .collect();
        trim(out)
    }

    pub fn neg(a: &[u32], p: u32) -> Poly {
        a.iter().map(|&c| (p - c) % p).collect()
    }

    pub fn sub(a: &[u32], b: &[u32], p: u32) -> Poly {
        add(a, &neg(b, p), p)
    }

    pub fn scale(a: &[u32], c: u32, p: u32) -> Poly {
        trim(a.iter().map(|&x| (x as u64 * c as u64 % p as u64) as u32).collect())
    }

    pub fn mul(a: &[u32], b: &[u32], p: u32) -> Poly {
        if a.is_empty() || b.is_empty() {
            return Vec::new();
        }
        let mut out = vec![0u64; a.len() + b.len() - 1];
        for (i, &x) in a.iter().enumerate() {
            if x == 0 {
                continue;
            }
            for (j, &y) in b.iter().enumerate() {
                out[i + j] = (out[i + j] + x as u64 * y as u64) % p as u64;
            }
        }
        trim(out.into_iter().map(|c| c as u32).collect())
    }

    /// Quotient and remainder; `b` must be nonzero.
    pub fn divrem(a: &[u32], b: &[u32], p: u32) -> (Poly, Poly) {
        let db = degree(b).expect("division by the zero polynomial");
        let lead_inv = inv_mod(b[db], p);
        let mut r: Vec<u32> = a.to_vec();
        if r.len() < b.len() {
            return (Vec::new(), trim(r));
        }
        let mut q = vec![0u32; r.len() - db];
        for k in (0..q.len()).rev() {
            let c = (r[k + db] as u64 * lead_inv as u64 % p as u64) as u32;
            q[k] = c;
            if c != 0 {
                for (j, &bj) in b.iter().enumerate() {
                    let t = (c as u64 * bj as u64 % p as u64) as u32;
                    r[k + j] = (r[k + j] + p - t) % p;
                }
            }
        }
        r.truncate(db);
        (trim(q), trim(r))
    }

    pub fn rem(a: &[u32], b: &[u32], p: u32) -> Poly {
        divrem(a, b, p).1
    }

    pub fn monic(a: &[u32], p: u32) -> Poly {
        match a.last() {
            None => Vec::new(),
            Some(&l) => scale(a, inv_mod(l, p), p),
        }
    }

    /// Monic greatest common divisor (zero if both inputs are zero).
    pub fn gcd(a: &[u32], b: &[u32], p: u32) -> Poly {
        let (mut x, mut y) = (trim(a.to_vec()), trim(b.to_vec()));
        while !y.is_empty() {
            let r = rem(&x, &y, p);
            x = y;
            y = r;
        }
        monic(&x, p)
    }

    /// Substitutes `s -> s^k`; over `F_p` this is the p-th power map when `k = p`.
    pub fn inflate(a: &[u32], k: usize) -> Poly {
        if a.is_empty() {
            return Vec::new();
        }
        let mut out = vec![0u32; (a.len() - 1) * k + 1];
        for (i, &c) in a.iter().enumerate() {
            out[i * k] = c;
        }
        out
    }

    /// Index `sum c_i p^i` to coefficient list of length `d`.
    pub fn from_index(mut n: u64, p: u32, d: usize) -> Poly {
        let mut out = Vec::with_capacity(d);
        for _ in 0..d {
            out.push((n % p as u64) as u32);
            n /= p as u64;
        }
        out
    }

    pub fn to_index(a: &[u32], p: u32) -> u64 {
        a.iter().rev().fold(0u64, |acc, &c| acc * p as u64 + c as u64)
    }

    /// Brute-force irreducibility: no monic factor of degree `1..=deg/2`.
    pub fn is_irreducible(f: &[u32], p: u32) -> bool {
        let d = match degree(f) {
            Some(d) if d >= 1 => d,
            _ => return false,
        };
        for k in 1..=d / 2 {
            let count = (p as u64).pow(k as u32);
            for low in 0..count {
                let mut g = from_index(low, p, k);
                g.push(1);
                if rem(f, &g, p).is_empty() {
                    return false;
                }
            }
        }
        true
    }

    /// Lexicographically smallest monic irreducible polynomial of degree `d`,
    /// ordering the non-leading coefficients `(c_{d-1}, ..., c_0)` as a base-p
    /// numeral.
    pub fn smallest_irreducible(p: u32, d: usize) -> Poly {
        let count = (p as u64).pow(d as u32);
        for n in 0..count {
            let mut f = from_index(n, p, d);
            f.push(1);
            if is_irreducible(&f, p) {
                return f;
            }
        }
        unreachable!("irreducible polynomials exist in every degree")
    }
}

use poly::Poly;

pub fn is_prime(n: u32) -> bool {
    n >= 2 && (2..).take_while(|k| k * k <= n).all(|k| !n.is_multiple_of(k))
}

/// Reduced fraction `num/den` of polynomials over `F_p` with monic `den`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RatFn {
    num: Poly,
    den: Poly,
}

impl RatFn {
    pub fn new(num: &[u32], den: &[u32], p: u32) -> Result<RatFn> {
        let num = poly::trim(num.iter().map(|c| c % p).collect());
        let den = poly::trim(den.iter().map(|c| c % p).collect());
        if den.is_empty() {
            return Err(Error::DivisionByZero);
        }
        if num.is_empty() {
            return Ok(RatFn { num, den: vec![1] });
        }
        let g = poly::gcd(&num, &den, p);
        let num = poly::divrem(&num, &g, p).0;
        let den = poly::divrem(&den, &g, p).0;
        let lead = *den.last().unwrap();
        let li = poly::inv_mod(lead, p);
        Ok(RatFn { num: poly::scale(&num, li, p), den: poly::scale(&den, li, p) })
    }

    pub fn num(&self) -> &[u32] {
        &self.num
    }

    pub fn den(&self) -> &[u32] {
        &self.den
    }
}

/// A field element value; its interpretation depends on the owning [`Field`].
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Elem {
    /// Element of a finite field, encoded as `sum c_i p^i`.
    Fin(u32),
    /// Element of `F_p(s)`.
    Rat(Box<RatFn>),
}

/// Which field to build.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum FieldKind {
    Prime,
    Extension(u32),
    RatFun,
}

/// Table-driven arithmetic for a finite field, shared with the matrix kernels.
#[derive(Debug)]
pub(crate) struct FinOps {
    pub p: u32,
    pub q: u32,
    pub d: u32,
    modulus: Poly,
    /// exp table of length 2(q-1) so `exp[log a + log b]` never wraps.
    exp: Vec<u32>,
    log: Vec<u32>,
    add_tab: Option<Vec<u32>>,
    /// `x -> x + 1`, used for Zech-style addition when `add_tab` is too big.
    succ_tab: Vec<u32>,
    neg_tab: Vec<u32>,
    inv_tab: Vec<u32>,
}

const ADD_TABLE_LIMIT: u32 = 1024;
const LOG_TABLE_LIMIT: u32 = 1 << 22;

impl FinOps {
    fn new(p: u32, d: u32, modulus: Poly) -> FinOps {
        let q = p.pow(d);
        let mut ops = FinOps {
            p,
            q,
            d,
            modulus,
            exp: Vec::new(),
            log: Vec::new(),
            add_tab: None,
            succ_tab: Vec::new(),
            neg_tab: Vec::new(),
            inv_tab: Vec::new(),
        };
        ops.neg_tab = (0..q).map(|a| ops.neg_slow(a)).collect();
        if d > 1 && q <= ADD_TABLE_LIMIT {
            let mut t = vec![0u32; (q * q) as usize];
            for a in 0..q {
                for b in 0..q {
                    t[(a * q + b) as usize] = ops.add_slow(a, b);
                }
            }
            ops.add_tab = Some(t);
        }
        if d > 1 && q <= LOG_TABLE_LIMIT {
            let g = ops.find_generator();
            let mut exp = vec![0u32; 2 * (q as usize - 1)];
            let mut log = vec![0u32; q as usize];
            let mut x = 1u32;
            for i in 0..(q - 1) {
                exp[i as usize] = x;
                exp[(i + q - 1) as usize] = x;
                log[x as usize] = i;
                x = ops.mul_slow(x, g);
            }
            ops.exp = exp;
            ops.log = log;
        }
        if q <= LOG_TABLE_LIMIT {
            let mut inv = vec![0u32; q as usize];
            for a in 1..q {
                inv[a as usize] = if ops.log.is_empty() {
                    ops.inv_slow(a)
                } else {
                    ops.exp[((q - 1 - ops.log[a as usize]) % (q - 1)) as usize]
                };
            }
            ops.inv_tab = inv;
        }
        if d > 1 && ops.add_tab.is_none() && !ops.log.is_empty() {
            ops.succ_tab = (0..q).map(|a| ops.add_slow(a, 1)).collect();
        }
        ops
    }

    fn add_slow(&self, a: u32, b: u32) -> u32 {
        if self.d == 1 {
            return (a + b) % self.p;
        }
        let (mut a, mut b, mut out, mut place) = (a, b, 0u32, 1u32);
        for _ in 0..self.d {
            out += ((a % self.p + b % self.p) % self.p) * place;
            a /= self.p;
            b /= self.p;
            place *= self.p;
        }
        out
    }

    fn neg_slow(&self, a: u32) -> u32 {
        let (mut a, mut out, mut place) = (a, 0u32, 1u32);
        for _ in 0..self.d {
            out += ((self.p - a % self.p) % self.p) * place;
            a /= self.p;
            place *= self.p;
        }
        out
    }

    fn mul_slow(&self, a: u32, b: u32) -> u32 {
        if self.d == 1 {
            return (a as u64 * b as u64 % self.p as u64) as u32;
        }
        let pa = poly::from_index(a as u64, self.p, self.d as usize);
        let pb = poly::from_index(b as u64, self.p, self.d as usize);
        let prod = poly::rem(&poly::mul(&pa, &pb, self.p), &self.modulus, self.p);
        poly::to_index(&prod, self.p) as u32
    }

    fn pow_slow(&self, a: u32, mut e: u64) -> u32 {
        let (mut base, mut acc) = (a, 1u32);
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul_slow(acc, base);
            }
            base = self.mul_slow(base, base);
            e >>= 1;
        }
        acc
    }

    fn inv_slow(&self, a: u32) -> u32 {
        self.pow_slow(a, self.q as u64 - 2)
    }

    fn find_generator(&self) -> u32 {
        let n = self.q as u64 - 1;
        let mut factors = Vec::new();
        let mut m = n;
        let mut f = 2u64;
        while f * f <= m {
            if m.is_multiple_of(f) {
                factors.push(f);
                while m.is_multiple_of(f) {
                    m /= f;
                }
            }
            f += 1;
        }
        if m > 1 {
            factors.push(m);
        }
        (1..self.q)
            .find(|&g| factors.iter().all(|&l| self.pow_slow(g, n / l) != 1))
            .expect("multiplicative group of a finite field is cyclic")
    }

    #[inline]
    pub fn add(&self, a: u32, b: u32) -> u32 {
        if self.d == 1 {
            let s = a + b;
            if s >= self.p {
                s - self.p
            } else {
                s
            }
        } else if let Some(t) = &self.add_tab {
            t[(a * self.q + b) as usize]
        } else if !self.succ_tab.is_empty() {
            // a + b = a (1 + b/a)
            if a == 0 {
                return b;
            }
            if b == 0 {
                return a;
            }
            let ratio = self.mul(b, self.inv_tab[a as usize]);
            self.mul(a, self.succ_tab[ratio as usize])
        } else {
            self.add_slow(a, b)
        }
    }

    #[inline]
    pub fn neg(&self, a: u32) -> u32 {
        self.neg_tab[a as usize]
    }

    #[inline]
    pub fn mul(&self, a: u32, b: u32) -> u32 {
        if self.d == 1 {
            (a as u64 * b as u64 % self.p as u64) as u32
        } else if a == 0 || b == 0 {
            0
        } else if !self.log.is_empty() {
            self.exp[(self.log[a as usize] + self.log[b as usize]) as usize]
        } else {
            self.mul_slow(a, b)
        }
    }

    #[inline]
    pub fn inv(&self, a: u32) -> u32 {
        if self.inv_tab.is_empty() {
            self.inv_slow(a)
        } else {
            self.inv_tab[a as usize]
        }
    }

    /// `g^i` for the generator behind the log tables, if they exist.
    pub(crate) fn exp_at(&self, i: u64) -> Option<u32> {
        if self.log.is_empty() {
            return None;
        }
        Some(self.exp[(i % (self.q as u64 - 1)) as usize])
    }

    pub fn pow(&self, a: u32, e: u64) -> u32 {
        if a == 0 {
            return if e == 0 { 1 } else { 0 };
        }
        if !self.log.is_empty() {
            let l = (self.log[a as usize] as u64 * (e % (self.q as u64 - 1))) % (self.q as u64 - 1);
            return self.exp[l as usize];
        }
        let (mut base, mut acc, mut e) = (a, 1u32, e);
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }
}

/// Immutable field description plus precomputed tables.
#[derive(Debug)]
pub struct FieldCtx {
    p: u32,
    kind: FieldKind,
    fin: Option<FinOps>,
}

/// Cheaply clonable handle to a field.
#[derive(Clone)]
pub struct Field(Arc<FieldCtx>);

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name())
    }
}

impl PartialEq for Field {
    fn eq(&self, other: &Field) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || (self.0.p == other.0.p && self.0.kind == other.0.kind)
    }
}

impl Eq for Field {}

/// JSON descriptor `{"p": .., "kind": "prime"|"ext"|"ratfun", "d": ..}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldDesc {
    pub p: u32,
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<u32>,
}

impl Field {
    /// Builds a field, checking that `p` is prime and extensions have `d >= 2`.
    pub fn new(p: u32, kind: FieldKind) -> Result<Field> {
        if !is_prime(p) {
            return Err(Error::Field(format!("characteristic {p} is not prime")));
        }
        let fin = match kind {
            FieldKind::Prime => Some(FinOps::new(p, 1, vec![0, 1])),
            FieldKind::Extension(d) => {
                if d < 2 {
                    return Err(Error::Field(format!("extension degree {d} < 2")));
                }
                if (p as u64).checked_pow(d).is_none_or(|q| q > u32::MAX as u64 / 2) {
                    return Err(Error::Field(format!("F_{{{p}^{d}}} is too large")));
                }
                let modulus = poly::smallest_irreducible(p, d as usize);
                Some(FinOps::new(p, d, modulus))
            }
            FieldKind::RatFun => None,
        };
        Ok(Field(Arc::new(FieldCtx { p, kind, fin })))
    }

    pub fn prime(p: u32) -> Result<Field> {
        Field::new(p, FieldKind::Prime)
    }

    pub fn extension(p: u32, d: u32) -> Result<Field> {
        Field::new(p, FieldKind::Extension(d))
    }

    pub fn ratfun(p: u32) -> Result<Field> {
        Field::new(p, FieldKind::RatFun)
    }

    pub fn from_desc(desc: &FieldDesc) -> Result<Field> {
        match desc.kind.as_str() {
            "prime" => Field::prime(desc.p),
            "ext" => Field::extension(
                desc.p,
                desc.d.ok_or_else(|| Error::Field("extension needs \"d\"".into()))?,
            ),
            "ratfun" => Field::ratfun(desc.p),
            other => Err(Error::Field(format!("unknown field kind {other:?}"))),
        }
    }

    pub fn desc(&self) -> FieldDesc {
        match self.0.kind {
            FieldKind::Prime => FieldDesc { p: self.0.p, kind: "prime".into(), d: None },
            FieldKind::Extension(d) => FieldDesc { p: self.0.p, kind: "ext".into(), d: Some(d) },
            FieldKind::RatFun => FieldDesc { p: self.0.p, kind: "ratfun".into(), d: None },
        }
    }

    /// Human-readable name such as `F_9` or `F_3(s)`.
    pub fn name(&self) -> String {
        match self.0.kind {
            FieldKind::Prime => format!("F_{}", self.0.p),
            FieldKind::Extension(d) => format!("F_{}", (self.0.p as u64).pow(d)),
            FieldKind::RatFun => format!("F_{}(s)", self.0.p),
        }
    }

    pub fn p(&self) -> u32 {
        self.0.p
    }

    pub fn kind(&self) -> &FieldKind {
        &self.0.kind
    }

    /// Degree over the prime field (`None` for `F_p(s)`).
    pub fn degree(&self) -> Option<u32> {
        self.0.fin.as_ref().map(|f| f.d)
    }

    /// Number of elements (`None` for `F_p(s)`).
    pub fn order(&self) -> Option<u64> {
        self.0.fin.as_ref().map(|f| f.q as u64)
    }

    pub fn is_finite(&self) -> bool {
        self.0.fin.is_some()
    }

    /// Defining modulus of an extension, lowest degree first.
    pub fn modulus(&self) -> Option<&[u32]> {
        match (&self.0.kind, &self.0.fin) {
            (FieldKind::Extension(_), Some(f)) => Some(&f.modulus),
            _ => None,
        }
    }

    pub(crate) fn fin(&self) -> Option<&FinOps> {
        self.0.fin.as_ref()
    }

    pub fn zero(&self) -> Elem {
        if self.is_finite() {
            Elem::Fin(0)
        } else {
            Elem::Rat(Box::new(RatFn { num: Vec::new(), den: vec![1] }))
        }
    }

    pub fn one(&self) -> Elem {
        self.from_i64(1)
    }

    pub fn from_i64(&self, n: i64) -> Elem {
        let p = self.0.p as i64;
        let r = n.rem_euclid(p) as u32;
        if self.is_finite() {
            Elem::Fin(r)
        } else {
            Elem::Rat(Box::new(RatFn { num: poly::trim(vec![r]), den: vec![1] }))
        }
    }

    /// The generator `s`: the class of the indeterminate in an extension, or
    /// the transcendental in `F_p(s)`.
    pub fn generator(&self) -> Result<Elem> {
        match self.0.kind {
            FieldKind::Prime => Err(Error::Field("prime field has no generator s".into())),
            FieldKind::Extension(_) => Ok(Elem::Fin(self.0.p)),
            FieldKind::RatFun => Ok(Elem::Rat(Box::new(RatFn { num: vec![0, 1], den: vec![1] }))),
        }
    }

    /// Element with residue polynomial `coeffs` (extensions) or the
    /// polynomial `coeffs(s)` (function field).
    pub fn from_poly(&self, coeffs: &[u32]) -> Result<Elem> {
        let p = self.0.p;
        match &self.0.fin {
            Some(f) => {
                let c: Poly = coeffs.iter().map(|x| x % p).collect();
                let r = poly::rem(&poly::trim(c), &f.modulus, p);
                Ok(Elem::Fin(poly::to_index(&r, p) as u32))
            }
            None => Ok(Elem::Rat(Box::new(RatFn::new(coeffs, &[1], p)?))),
        }
    }

    pub fn from_ratfn(&self, num: &[u32], den: &[u32]) -> Result<Elem> {
        if self.is_finite() {
            return Err(Error::Field("fractions need the function field".into()));
        }
        Ok(Elem::Rat(Box::new(RatFn::new(num, den, self.0.p)?)))
    }

    fn fin_val(&self, a: &Elem) -> u32 {
        match a {
            Elem::Fin(x) => *x,
            Elem::Rat(_) => panic!("function-field element used in {}", self.name()),
        }
    }

    fn rat_val<'a>(&self, a: &'a Elem) -> &'a RatFn {
        match a {
            Elem::Rat(r) => r,
            Elem::Fin(_) => panic!("finite-field element used in {}", self.name()),
        }
    }

    pub fn is_zero(&self, a: &Elem) -> bool {
        match a {
            Elem::Fin(x) => *x == 0,
            Elem::Rat(r) => r.num.is_empty(),
        }
    }

    pub fn is_one(&self, a: &Elem) -> bool {
        *a == self.one()
    }

    pub fn add(&self, a: &Elem, b: &Elem) -> Elem {
        match &self.0.fin {
            Some(f) => Elem::Fin(f.add(self.fin_val(a), self.fin_val(b))),
            None => {
                let (x, y) = (self.rat_val(a), self.rat_val(b));
                let p = self.0.p;
                if x.den.len() == 1 && y.den.len() == 1 {
                    // Both are polynomials, so no reduction is needed.
                    let num = poly::add(&x.num, &y.num, p);
                    return Elem::Rat(Box::new(RatFn { num, den: vec![1] }));
                }
                if x.den == y.den {
                    let num = poly::add(&x.num, &y.num, p);
                    return Elem::Rat(Box::new(RatFn::new(&num, &x.den, p).unwrap()));
                }
                let num = poly::add(&poly::mul(&x.num, &y.den, p), &poly::mul(&y.num, &x.den, p), p);
                let den = poly::mul(&x.den, &y.den, p);
                Elem::Rat(Box::new(RatFn::new(&num, &den, p).unwrap()))
            }
        }
    }

    pub fn neg(&self, a: &Elem) -> Elem {
        match &self.0.fin {
            Some(f) => Elem::Fin(f.neg(self.fin_val(a))),
            None => {
                let x = self.rat_val(a);
                Elem::Rat(Box::new(RatFn { num: poly::neg(&x.num, self.0.p), den: x.den.clone() }))
            }
        }
    }

    pub fn sub(&self, a: &Elem, b: &Elem) -> Elem {
        self.add(a, &self.neg(b))
    }

    pub fn mul(&self, a: &Elem, b: &Elem) -> Elem {
        match &self.0.fin {
            Some(f) => Elem::Fin(f.mul(self.fin_val(a), self.fin_val(b))),
            None => {
                let (x, y) = (self.rat_val(a), self.rat_val(b));
                let p = self.0.p;
                if x.num.is_empty() || y.num.is_empty() {
                    return self.zero();
                }
                if x.den.len() == 1 && y.den.len() == 1 {
                    return Elem::Rat(Box::new(RatFn { num: poly::mul(&x.num, &y.num, p), den: vec![1] }));
                }
                // Cross-cancel before multiplying to keep degrees small.
                let g1 = poly::gcd(&x.num, &y.den, p);
                let g2 = poly::gcd(&y.num, &x.den, p);
                let num = poly::mul(
                    &poly::divrem(&x.num, &g1, p).0,
                    &poly::divrem(&y.num, &g2, p).0,
                    p,
                );
                let den = poly::mul(
                    &poly::divrem(&x.den, &g2, p).0,
                    &poly::divrem(&y.den, &g1, p).0,
                    p,
                );
                Elem::Rat(Box::new(RatFn::new(&num, &den, p).unwrap()))
            }
        }
    }

    pub fn inv(&self, a: &Elem) -> Result<Elem> {
        if self.is_zero(a) {
            return Err(Error::DivisionByZero);
        }
        match &self.0.fin {
            Some(f) => Ok(Elem::Fin(f.inv(self.fin_val(a)))),
            None => {
                let x = self.rat_val(a);
                Ok(Elem::Rat(Box::new(RatFn::new(&x.den, &x.num, self.0.p)?)))
            }
        }
    }

    pub fn div(&self, a: &Elem, b: &Elem) -> Result<Elem> {
        Ok(self.mul(a, &self.inv(b)?))
    }

    /// `a^e` for a signed exponent; negative powers of zero are an error.
    pub fn pow(&self, a: &Elem, e: i64) -> Result<Elem> {
        let base = if e < 0 { self.inv(a)? } else { a.clone() };
        let mut e = e.unsigned_abs();
        if let Some(f) = &self.0.fin {
            return Ok(Elem::Fin(f.pow(self.fin_val(&base), e)));
        }
        let (mut base, mut acc) = (base, self.one());
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(&acc, &base);
            }
            base = self.mul(&base, &base);
            e >>= 1;
        }
        Ok(acc)
    }

    /// `x^(p^e)`, computed by repeated p-th powering.
    pub fn frobenius_pow(&self, x: &Elem, e: u32) -> Elem {
        let p = self.0.p;
        match &self.0.fin {
            Some(f) => {
                let mut v = self.fin_val(x);
                for _ in 0..(e % f.d.max(1)) {
                    v = f.pow(v, p as u64);
                }
                Elem::Fin(v)
            }
            None => {
                // Coefficients lie in F_p, so f(s)^p = f(s^p).
                let r = self.rat_val(x);
                let k = (p as usize).pow(e);
                Elem::Rat(Box::new(RatFn { num: poly::inflate(&r.num, k), den: poly::inflate(&r.den, k) }))
            }
        }
    }

    /// Maps an element of `from` into `self`.  Supported: identical fields
    /// and the prime field into any field of the same characteristic.
    pub fn embed(&self, x: &Elem, from: &Field) -> Result<Elem> {
        if from == self {
            return Ok(x.clone());
        }
        if from.p() != self.p() {
            return Err(Error::Field(format!("cannot map {} into {}", from.name(), self.name())));
        }
        match from.kind() {
            FieldKind::Prime => Ok(self.from_i64(from.fin_val(x) as i64)),
            _ => Err(Error::Field(format!("cannot map {} into {}", from.name(), self.name()))),
        }
    }

    /// Uniform element of a finite field; for `F_p(s)` a random polynomial of
    /// degree at most 2 in `s`.
    pub fn random<R: Rng + ?Sized>(&self, rng: &mut R) -> Elem {
        match &self.0.fin {
            Some(f) => Elem::Fin(rng.gen_range(0..f.q)),
            None => {
                let c: Vec<u32> = (0..3).map(|_| rng.gen_range(0..self.0.p)).collect();
                self.from_poly(&c).unwrap()
            }
        }
    }

    pub fn random_nonzero<R: Rng + ?Sized>(&self, rng: &mut R) -> Elem {
        loop {
            let x = self.random(rng);
            if !self.is_zero(&x) {
                return x;
            }
        }
    }

    /// All elements of a finite field in index order.
    pub fn elements(&self) -> Option<Vec<Elem>> {
        self.0.fin.as_ref().map(|f| (0..f.q).map(Elem::Fin).collect())
    }

    /// Whether the element lies in the prime subfield.
    pub fn in_prime_field(&self, x: &Elem) -> bool {
        match x {
            Elem::Fin(v) => *v < self.0.p,
            Elem::Rat(r) => r.den == [1] && r.num.len() <= 1,
        }
    }

    pub fn to_json(&self, x: &Elem) -> Value {
        match (&self.0.kind, x) {
            (FieldKind::Prime, Elem::Fin(v)) => json!(v),
            (FieldKind::Extension(d), Elem::Fin(v)) => {
                json!(poly::from_index(*v as u64, self.0.p, *d as usize))
            }
            (FieldKind::RatFun, Elem::Rat(r)) => json!({"num": r.num, "den": r.den}),
            _ => panic!("element does not belong to {}", self.name()),
        }
    }

    /// Parses an element.  Integers are accepted in every field; coefficient
    /// lists in extensions; `{"num":..,"den":..}` or lists in `F_p(s)`.
    pub fn from_json(&self, v: &Value) -> Result<Elem> {
        let ints = |a: &Vec<Value>| -> Result<Vec<u32>> {
            a.iter()
                .map(|c| {
                    c.as_i64()
                        .map(|n| n.rem_euclid(self.0.p as i64) as u32)
                        .ok_or_else(|| Error::Parse(format!("expected integer coefficient, got {c}")))
                })
                .collect()
        };
        match v {
            Value::Number(n) => {
                let n = n.as_i64().ok_or_else(|| Error::Parse(format!("bad field element {v}")))?;
                Ok(self.from_i64(n))
            }
            Value::Array(a) => {
                if let FieldKind::Extension(d) = self.0.kind {
                    if a.len() > d as usize {
                        return Err(Error::Parse(format!("extension element {v} has more than {d} coefficients")));
                    }
                } else if self.0.kind == FieldKind::Prime {
                    return Err(Error::Parse(format!("prime field element must be an integer, got {v}")));
                }
                self.from_poly(&ints(a)?)
            }
            Value::Object(o) if self.0.kind == FieldKind::RatFun => {
                let get = |k: &str| -> Result<Vec<u32>> {
                    match o.get(k) {
                        Some(Value::Array(a)) => ints(a),
                        _ => Err(Error::Parse(format!("fraction needs array field {k:?}"))),
                    }
                };
                self.from_ratfn(&get("num")?, &get("den")?)
            }
            _ => Err(Error::Parse(format!("bad field element {v} for {}", self.name()))),
        }
    }

    /// Compact text form, e.g. `2`, `s^2+2s+1`, `(s+1)/(s^2+2)`.
    pub fn format(&self, x: &Elem) -> String {
        fn poly_str(c: &[u32]) -> String {
            if c.is_empty() {
                return "0".into();
            }
            let mut terms = Vec::new();
            for (i, &a) in c.iter().enumerate().rev() {
                if a == 0 {
                    continue;
                }
                let coef = if a == 1 && i > 0 { String::new() } else { a.to_string() };
                terms.push(match i {
                    0 => coef,
                    1 => format!("{coef}s"),
                    _ => format!("{coef}s^{i}"),
                });
            }
            terms.join("+")
        }
        match (&self.0.kind, x) {
            (FieldKind::Prime, Elem::Fin(v)) => v.to_string(),
            (FieldKind::Extension(d), Elem::Fin(v)) => {
                poly_str(&poly::trim(poly::from_index(*v as u64, self.0.p, *d as usize)))
            }
            (FieldKind::RatFun, Elem::Rat(r)) => {
                if r.den == [1] {
                    poly_str(&r.num)
                } else {
                    format!("({})/({})", poly_str(&r.num), poly_str(&r.den))
                }
            }
            _ => "?".into(),
        }
    }
}

/// A value bundled with its field, with operator overloads.
#[derive(Clone)]
pub struct FieldElem {
    field: Field,
    value: Elem,
}

impl FieldElem {
    pub fn new(field: &Field, value: Elem) -> FieldElem {
        FieldElem { field: field.clone(), value }
    }

    pub fn from_i64(field: &Field, n: i64) -> FieldElem {
        FieldElem::new(field, field.from_i64(n))
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn value(&self) -> &Elem {
        &self.value
    }

    pub fn into_value(self) -> Elem {
        self.value
    }

    pub fn is_zero(&self) -> bool {
        self.field.is_zero(&self.value)
    }

    pub fn inv(&self) -> Result<FieldElem> {
        Ok(FieldElem::new(&self.field, self.field.inv(&self.value)?))
    }

    pub fn pow(&self, e: i64) -> Result<FieldElem> {
        Ok(FieldElem::new(&self.field, self.field.pow(&self.value, e)?))
    }

    pub fn frobenius_pow(&self, e: u32) -> FieldElem {
        FieldElem::new(&self.field, self.field.frobenius_pow(&self.value, e))
    }

    pub fn checked_div(&self, other: &FieldElem) -> Result<FieldElem> {
        Ok(FieldElem::new(&self.field, self.field.div(&self.value, &other.value)?))
    }
}

impl PartialEq for FieldElem {
    fn eq(&self, other: &FieldElem) -> bool {
        self.field == other.field && self.value == other.value
    }
}

impl Eq for FieldElem {}

impl fmt::Debug for FieldElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} in {}", self.field.format(&self.value), self.field.name())
    }
}

impl fmt::Display for FieldElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.field.format(&self.value))
    }
}

macro_rules! binop {
    ($tr:ident, $m:ident, $op:ident) => {
        impl std::ops::$tr for &FieldElem {
            type Output = FieldElem;
            fn $m(self, rhs: &FieldElem) -> FieldElem {
                assert!(self.field == rhs.field, "mixed fields in arithmetic");
                FieldElem::new(&self.field, self.field.$op(&self.value, &rhs.value))
            }
        }
        impl std::ops::$tr for FieldElem {
            type Output = FieldElem;
            fn $m(self, rhs: FieldElem) -> FieldElem {
                (&self).$m(&rhs)
            }
        }
    };
}

binop!(Add, add, add);
binop!(Sub, sub, sub);
binop!(Mul, mul, mul);

impl std::ops::Div for &FieldElem {
    type Output = FieldElem;
    /// Panics on division by zero; use [`FieldElem::checked_div`] otherwise.
    fn div(self, rhs: &FieldElem) -> FieldElem {
        self.checked_div(rhs).expect("division by zero")
    }
}

impl std::ops::Neg for &FieldElem {
    type Output = FieldElem;
    fn neg(self) -> FieldElem {
        FieldElem::new(&self.field, self.field.neg(&self.value))
    }
}
