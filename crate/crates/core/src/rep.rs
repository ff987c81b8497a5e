//! Test modules and their π-point operators.
//!
//! A module is a [`RepExpr`]: a tree whose leaves are the standard
//! representation of `GL_N`, the trivial module, an explicit
//! `kG_{a(r)}`-module ([`UModule`]) or the truncated induced module of the
//! Heisenberg group.  Evaluating the tree on a group element with entries in
//! `K[T]/T^D` yields the module's action on that element; the operator of a
//! tuple is read off as a single coefficient of the evaluation at the
//! one-parameter subgroup `prod_s exp(T^{p^s} B_s)`.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Elem, Field, FieldDesc};
use crate::geometry::{is_p_nilpotent, NilTuple, Tag};
use crate::linalg::{trunc, Mat, MatJson, PolyMat};

/// `n!` in the field, for `n < p`.
fn factorial(f: &Field, n: usize) -> Elem {
    (1..=n as i64).fold(f.one(), |acc, k| f.mul(&acc, &f.from_i64(k)))
}

/// Binomial coefficient reduced mod `p` (Lucas).
pub fn binom_mod(n: usize, k: usize, p: u32) -> u32 {
    if k > n {
        return 0;
    }
    let p = p as usize;
    let (mut n, mut k, mut acc) = (n, k, 1usize);
    while n > 0 || k > 0 {
        let (a, b) = (n % p, k % p);
        if b > a {
            return 0;
        }
        let mut c = 1usize;
        for i in 0..b {
            c = c * (a - i) / (i + 1);
        }
        acc = acc * (c % p) % p;
        n /= p;
        k /= p;
    }
    acc as u32
}

/// `sum_{j<p} B^j / j!`.
pub fn trunc_exp(b: &Mat, p: u32) -> Result<Mat> {
    if !is_p_nilpotent(b, p) {
        return Err(Error::NotNilpotent("trunc_exp argument".into()));
    }
    let f = b.field();
    let mut acc = Mat::identity(f, b.rows());
    let mut pw = Mat::identity(f, b.rows());
    for j in 1..p as usize {
        pw = pw.mul(b);
        if pw.is_zero() {
            break;
        }
        acc = acc.add(&pw.scale(&f.inv(&factorial(f, j))?));
    }
    Ok(acc)
}

/// `exp(T^step B) = sum_{j<p} (B^j/j!) T^{j step}` in `Mat_N(K[T]/T^d)`.
pub fn trunc_exp_poly(b: &Mat, p: u32, step: usize, d: usize) -> Result<PolyMat> {
    if !is_p_nilpotent(b, p) {
        return Err(Error::NotNilpotent("trunc_exp argument".into()));
    }
    let f = b.field();
    let mut out = PolyMat::identity(f, b.rows(), d);
    let mut pw = Mat::identity(f, b.rows());
    for j in 1..p as usize {
        if j * step >= d {
            break;
        }
        pw = pw.mul(b);
        if pw.is_zero() {
            break;
        }
        out.set_coeff(j * step, pw.scale(&f.inv(&factorial(f, j))?));
    }
    Ok(out)
}

/// The group element `prod_s exp(α^{p^s} B_s)` of `GL_N(K)`.
pub fn one_param_eval(t: &NilTuple, alpha: &Elem) -> Result<Mat> {
    t.validate()?;
    let f = t.field();
    let mut g = Mat::identity(f, t.n());
    for (s, b) in t.mats().iter().enumerate() {
        let scaled = b.scale(&f.frobenius_pow(alpha, s as u32));
        g = g.mul(&trunc_exp(&scaled, t.p())?);
    }
    Ok(g)
}

/// `prod_s exp(T^{p^s} B_s)` in `Mat_N(K[T]/T^{p^r})`.
pub fn one_param_poly(t: &NilTuple) -> Result<PolyMat> {
    t.validate()?;
    let p = t.p();
    let d = (p as usize).pow(t.r() as u32);
    let mut g = PolyMat::identity(t.field(), t.n(), d);
    for (s, b) in t.mats().iter().enumerate() {
        if b.is_zero() {
            continue;
        }
        g = g.mul(&trunc_exp_poly(b, p, (p as usize).pow(s as u32), d)?);
    }
    Ok(g)
}

/// A module for `kG_{a(r)} = k[u_0..u_{r-1}]/(u_i^p)`: commuting p-nilpotent
/// action matrices `U_0, ..., U_{r-1}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UModule {
    field: Field,
    u: Vec<Mat>,
    dim: usize,
}

/// Wire format `{"p","r","dim","U":[..]}` with an optional field descriptor.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct UModuleJson {
    pub p: u32,
    pub r: usize,
    pub dim: usize,
    #[serde(rename = "U")]
    pub u: Vec<MatJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<FieldDesc>,
}

/// Index of the monomial `u^c` in the standard basis of `kG_{a(r)}`, with
/// `c_i` the base-p digits of the index.
fn digit(n: usize, i: usize, p: usize) -> usize {
    (n / p.pow(i as u32)) % p
}

impl UModule {
    pub fn new(field: &Field, dim: usize, u: Vec<Mat>) -> Result<UModule> {
        let m = UModule { field: field.clone(), u, dim };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.field.p();
        for (i, a) in self.u.iter().enumerate() {
            if a.rows() != self.dim || a.cols() != self.dim || *a.field() != self.field {
                return Err(Error::InvalidModule(format!("U_{i} is not {0}x{0} over {1}", self.dim, self.field.name())));
            }
            if !is_p_nilpotent(a, p) {
                return Err(Error::InvalidModule(format!("U_{i}^{p} != 0")));
            }
        }
        for i in 0..self.u.len() {
            for j in i + 1..self.u.len() {
                if !self.u[i].commutator(&self.u[j]).is_zero() {
                    return Err(Error::InvalidModule(format!("U_{i} and U_{j} do not commute")));
                }
            }
        }
        Ok(())
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn p(&self) -> u32 {
        self.field.p()
    }

    pub fn r(&self) -> usize {
        self.u.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn action(&self) -> &[Mat] {
        &self.u
    }

    /// The trivial module `k` (all `U_i = 0`).
    pub fn trivial(field: &Field, r: usize) -> UModule {
        UModule { field: field.clone(), u: vec![Mat::zeros(field, 1, 1); r], dim: 1 }
    }

    /// The regular module `kG_{a(r)}`, basis `u^c` indexed by digit vectors.
    pub fn regular(field: &Field, r: usize) -> UModule {
        let p = field.p() as usize;
        let dim = p.pow(r as u32);
        let u = (0..r)
            .map(|i| {
                let mut m = Mat::zeros(field, dim, dim);
                for n in 0..dim {
                    if digit(n, i, p) + 1 < p {
                        m.set(n + p.pow(i as u32), n, field.one());
                    }
                }
                m
            })
            .collect();
        UModule { field: field.clone(), u, dim }
    }

    /// Free module of rank `b`.
    pub fn free(field: &Field, r: usize, b: usize) -> UModule {
        let reg = UModule::regular(field, r);
        reg.direct_sum_n(b)
    }

    fn direct_sum_n(&self, b: usize) -> UModule {
        let u = self
            .u
            .iter()
            .map(|m| {
                let blocks: Vec<&Mat> = std::iter::repeat_n(m, b).collect();
                Mat::block_diag(&self.field, &blocks)
            })
            .collect();
        UModule { field: self.field.clone(), u, dim: self.dim * b }
    }

    /// Restriction along `kG_{a(r)} -> kG_{a(r')}`: extra generators act by 0,
    /// surplus generators are dropped.
    pub fn with_r(&self, r: usize) -> UModule {
        let mut u: Vec<Mat> = self.u.iter().take(r).cloned().collect();
        while u.len() < r {
            u.push(Mat::zeros(&self.field, self.dim, self.dim));
        }
        UModule { field: self.field.clone(), u, dim: self.dim }
    }

    /// Submodule spanned by the columns of `basis` (must be invariant).
    pub fn submodule(&self, basis: &Mat) -> Result<UModule> {
        let u = self
            .u
            .iter()
            .map(|a| {
                basis
                    .solve(&a.mul(basis))
                    .ok_or_else(|| Error::InvalidModule("subspace is not invariant".into()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(UModule { field: self.field.clone(), u, dim: basis.cols() })
    }

    /// Quotient by the invariant subspace spanned by the columns of `basis`.
    pub fn quotient(&self, basis: &Mat) -> Result<UModule> {
        let (c, q) = quotient_frame(basis)?;
        let u = self
            .u
            .iter()
            .map(|a| {
                if !q.mul(&a.mul(basis)).is_zero() {
                    return Err(Error::InvalidModule("quotient by a non-invariant subspace".into()));
                }
                Ok(q.mul(a).mul(&c))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(UModule { field: self.field.clone(), u, dim: c.cols() })
    }

    /// The same module in the basis given by the columns of `change`.
    pub fn change_basis(&self, change: &Mat) -> Result<UModule> {
        let inv = change.inverse()?;
        let u = self.u.iter().map(|a| inv.mul(a).mul(change)).collect();
        Ok(UModule { field: self.field.clone(), u, dim: self.dim })
    }

    /// `rad M = sum_i U_i M`, as a column basis.
    pub fn radical(&self) -> Mat {
        let mut cols = Mat::zeros(&self.field, self.dim, 0);
        for a in &self.u {
            cols = cols.hstack(a);
        }
        cols.image_mat()
    }

    /// Action of the monomial `u^c` (digits of `c`) on `M`.
    fn monomial(&self, c: usize, r: usize) -> Mat {
        let p = self.p() as usize;
        let mut m = Mat::identity(&self.field, self.dim);
        for i in 0..r {
            for _ in 0..digit(c, i, p) {
                m = self.u[i].mul(&m);
            }
        }
        m
    }

    /// Minimal generators: vectors completing a basis of `rad M` to a basis
    /// of `M`, chosen among standard basis vectors in index order.
    pub fn minimal_generators(&self) -> Vec<usize> {
        let rad = self.radical();
        let mut basis = rad.clone();
        let mut gens = Vec::new();
        for k in 0..self.dim {
            let cand = basis.hstack(&Mat::unit(&self.field, self.dim, 1, k, 0));
            if cand.rank() > basis.cols() {
                basis = cand;
                gens.push(k);
            }
        }
        gens
    }

    /// Map `A^b -> M` of the projective cover, where `b` is the number of
    /// minimal generators; column `g * p^r + c` is `u^c v_g`.
    pub fn cover_map(&self) -> Mat {
        let r = self.r();
        let q = (self.p() as usize).pow(r as u32);
        let gens = self.minimal_generators();
        let mut cols = Vec::with_capacity(gens.len() * q);
        let monos: Vec<Mat> = (0..q).map(|c| self.monomial(c, r)).collect();
        for &g in &gens {
            for mono in &monos {
                cols.push(mono.column(g));
            }
        }
        Mat::from_columns(&self.field, self.dim, &cols).unwrap()
    }

    /// First syzygy `Ω M = ker(P -> M)` of the projective cover, as a
    /// submodule of the free module.
    pub fn syzygy(&self) -> Result<UModule> {
        let cover = self.cover_map();
        let b = cover.cols() / (self.p() as usize).pow(self.r() as u32);
        let free = UModule::free(&self.field, self.r(), b);
        let ker = cover.kernel_mat();
        if ker.cols() == 0 {
            return Ok(UModule { field: self.field.clone(), u: vec![Mat::zeros(&self.field, 0, 0); self.r()], dim: 0 });
        }
        free.submodule(&ker)
    }

    pub fn embed(&self, target: &Field) -> Result<UModule> {
        Ok(UModule {
            field: target.clone(),
            u: self.u.iter().map(|m| m.embed(target)).collect::<Result<_>>()?,
            dim: self.dim,
        })
    }

    pub fn to_json(&self) -> UModuleJson {
        UModuleJson {
            p: self.p(),
            r: self.r(),
            dim: self.dim,
            u: self.u.iter().map(Mat::to_json).collect(),
            field: if self.field.degree() == Some(1) { None } else { Some(self.field.desc()) },
        }
    }

    pub fn from_json(j: &UModuleJson) -> Result<UModule> {
        let field = match &j.field {
            Some(d) => Field::from_desc(d)?,
            None => Field::prime(j.p)?,
        };
        if field.p() != j.p || j.u.len() != j.r {
            return Err(Error::InvalidModule(format!("p = {}, r = {} inconsistent with data", j.p, j.r)));
        }
        let u = j.u.iter().map(|m| Mat::from_json(m, &field)).collect::<Result<_>>()?;
        UModule::new(&field, j.dim, u)
    }

    /// `prod_{i<r} exp(a(T)^{p^i} U_i)` for a truncated polynomial `a(T)`
    /// (the action of the `G_a`-point `a`).
    pub fn action_at(&self, a: &[Elem]) -> Result<PolyMat> {
        let d = a.len();
        let field = self.field.clone();
        let p = self.p();
        let mut g = PolyMat::identity(&field, self.dim, d);
        for (i, ui) in self.u.iter().enumerate() {
            if ui.is_zero() {
                continue;
            }
            // a^{p^i}: entries raised to p^i, exponents multiplied by p^i.
            let step = (p as usize).pow(i as u32);
            let mut api = trunc::zero(&field, d);
            for (j, c) in a.iter().enumerate() {
                if j * step < d {
                    api[j * step] = field.frobenius_pow(c, i as u32);
                }
            }
            if trunc::is_zero(&field, &api) {
                continue;
            }
            let mut factor = PolyMat::identity(&field, self.dim, d);
            let mut upow = Mat::identity(&field, self.dim);
            let mut apow = trunc::one(&field, d);
            for j in 1..p as usize {
                upow = upow.mul(ui);
                apow = trunc::mul(&field, &apow, &api);
                if upow.is_zero() || trunc::is_zero(&field, &apow) {
                    break;
                }
                let term = upow.scale(&field.inv(&factorial(&field, j))?);
                for (k, c) in apow.iter().enumerate() {
                    if !field.is_zero(c) {
                        let add = term.scale(c);
                        let cur = factor.coeff(k)?.add(&add);
                        factor.set_coeff(k, cur);
                    }
                }
            }
            g = g.mul(&factor);
        }
        Ok(g)
    }
}

/// A finite-dimensional module given as an expression tree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RepExpr {
    /// Standard representation of `GL_N` (or of the subgroup the tuple lives in).
    Std(usize),
    /// One-dimensional trivial module.
    Trivial,
    /// Explicit `kG_{a(r)}`-module, evaluated on `G_a`-points
    /// (upper unitriangular `2x2` group elements).
    UMod(Arc<UModule>),
    /// `k[x,y]` truncated to total degree `<= D`, with the Heisenberg group
    /// acting through its quotient by the center via translation.
    U3Induced(usize),
    Dual(Box<RepExpr>),
    Tensor(Vec<RepExpr>),
    Sum(Vec<RepExpr>),
    Sym(usize, Box<RepExpr>),
    Wedge(usize, Box<RepExpr>),
    /// Frobenius twist `M^{[e]}`.
    Twist(u32, Box<RepExpr>),
    /// Submodule spanned by integer column vectors.
    Sub(Vec<Vec<i64>>, Box<RepExpr>),
    /// Quotient by the span of integer column vectors.
    Quotient(Vec<Vec<i64>>, Box<RepExpr>),
}

fn choose(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Exponent vectors of degree `k` in `n` variables, in lexicographic order
/// with larger leading exponents first.
fn monomials(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(n: usize, k: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == n - 1 {
            prefix.push(k);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for a in (0..=k).rev() {
            prefix.push(a);
            rec(n, k - a, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if n == 0 {
        if k == 0 {
            out.push(Vec::new());
        }
        return out;
    }
    rec(n, k, &mut Vec::new(), &mut out);
    out
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

fn permutations(k: usize) -> Vec<(Vec<usize>, bool)> {
    // Heap's algorithm would do; k is tiny, so enumerate and count inversions.
    fn rec(k: usize, cur: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in 0..k {
            if !used[i] {
                used[i] = true;
                cur.push(i);
                rec(k, cur, used, out);
                cur.pop();
                used[i] = false;
            }
        }
    }
    let mut perms = Vec::new();
    rec(k, &mut Vec::new(), &mut vec![false; k], &mut perms);
    perms
        .into_iter()
        .map(|perm| {
            let inv = (0..k).flat_map(|i| (i + 1..k).map(move |j| (i, j))).filter(|&(i, j)| perm[i] > perm[j]).count();
            (perm, inv % 2 == 1)
        })
        .collect()
}

/// Rows `P` of a full-column-rank matrix `w` with `w[P,:]` invertible.
fn pivot_rows(w: &Mat) -> Vec<usize> {
    w.transpose().rref().pivots
}

fn int_basis(field: &Field, dim: usize, basis: &[Vec<i64>]) -> Result<Mat> {
    if basis.iter().any(|v| v.len() != dim) {
        return Err(Error::InvalidModule(format!("basis vectors must have length {dim}")));
    }
    let cols: Vec<Vec<Elem>> = basis.iter().map(|v| v.iter().map(|&x| field.from_i64(x)).collect()).collect();
    let w = Mat::from_columns(field, dim, &cols)?;
    if w.rank() != basis.len() {
        return Err(Error::InvalidModule("basis vectors are linearly dependent".into()));
    }
    Ok(w)
}

/// Complement data for the quotient by `w`: `(C, Q)` with `C` the chosen
/// complementary standard vectors and `Q` the rows of `[w C]^{-1}` giving
/// coordinates along `C`.
pub(crate) fn quotient_frame(w: &Mat) -> Result<(Mat, Mat)> {
    let n = w.rows();
    let piv = pivot_rows(w);
    let comp: Vec<usize> = (0..n).filter(|i| !piv.contains(i)).collect();
    let mut c = Mat::zeros(w.field(), n, comp.len());
    for (j, &i) in comp.iter().enumerate() {
        c.set(i, j, w.field().one());
    }
    let full = w.hstack(&c).inverse()?;
    let rows: Vec<usize> = (w.cols()..n).collect();
    let cols: Vec<usize> = (0..n).collect();
    Ok((c, full.submatrix(&rows, &cols)))
}

fn check_unitriangular(g: &PolyMat, n: usize, what: &str) -> Result<()> {
    if g.size() != n {
        return Err(Error::InvalidModule(format!("{what} needs {n}x{n} group elements, got {}", g.size())));
    }
    let f = g.field();
    for i in 0..n {
        for j in 0..=i {
            let e = g.entry(i, j);
            let want_one = i == j;
            let ok = e.iter().enumerate().all(|(k, c)| {
                if want_one && k == 0 {
                    f.is_one(c)
                } else {
                    f.is_zero(c)
                }
            });
            if !ok {
                return Err(Error::InvalidModule(format!("{what} is only defined on upper unitriangular group elements")));
            }
        }
    }
    Ok(())
}

impl RepExpr {
    pub fn std(n: usize) -> RepExpr {
        RepExpr::Std(n)
    }

    /// The zero module (an empty direct sum).
    pub fn zero() -> RepExpr {
        RepExpr::Sum(Vec::new())
    }

    pub fn umodule(m: UModule) -> RepExpr {
        RepExpr::UMod(Arc::new(m))
    }

    pub fn dual(a: RepExpr) -> RepExpr {
        RepExpr::Dual(Box::new(a))
    }

    pub fn tensor(a: RepExpr, b: RepExpr) -> RepExpr {
        RepExpr::Tensor(vec![a, b])
    }

    pub fn sum(a: RepExpr, b: RepExpr) -> RepExpr {
        RepExpr::Sum(vec![a, b])
    }

    pub fn sym(k: usize, a: RepExpr) -> RepExpr {
        RepExpr::Sym(k, Box::new(a))
    }

    pub fn wedge(k: usize, a: RepExpr) -> RepExpr {
        RepExpr::Wedge(k, Box::new(a))
    }

    pub fn twist(e: u32, a: RepExpr) -> RepExpr {
        RepExpr::Twist(e, Box::new(a))
    }

    pub fn sub(basis: Vec<Vec<i64>>, a: RepExpr) -> RepExpr {
        RepExpr::Sub(basis, Box::new(a))
    }

    pub fn quotient(basis: Vec<Vec<i64>>, a: RepExpr) -> RepExpr {
        RepExpr::Quotient(basis, Box::new(a))
    }

    pub fn dim(&self) -> usize {
        match self {
            RepExpr::Std(n) => *n,
            RepExpr::Trivial => 1,
            RepExpr::UMod(m) => m.dim(),
            RepExpr::U3Induced(d) => (d + 1) * (d + 2) / 2,
            RepExpr::Dual(a) | RepExpr::Twist(_, a) => a.dim(),
            RepExpr::Tensor(xs) => xs.iter().map(RepExpr::dim).product(),
            RepExpr::Sum(xs) => xs.iter().map(RepExpr::dim).sum(),
            RepExpr::Sym(k, a) => choose(a.dim() + k - 1, *k),
            RepExpr::Wedge(k, a) => choose(a.dim(), *k),
            RepExpr::Sub(b, _) => b.len(),
            RepExpr::Quotient(b, a) => a.dim() - b.len(),
        }
    }

    /// Size `N` of the matrices in tuples this module accepts (`None` if any).
    pub fn group_size(&self) -> Result<Option<usize>> {
        let own = match self {
            RepExpr::Std(n) => Some(*n),
            RepExpr::UMod(_) => Some(2),
            RepExpr::U3Induced(_) => Some(3),
            RepExpr::Trivial => None,
            _ => None,
        };
        let mut acc = own;
        for c in self.children() {
            if let Some(n) = c.group_size()? {
                match acc {
                    Some(m) if m != n => {
                        return Err(Error::InvalidModule(format!("mixes group sizes {m} and {n}")))
                    }
                    _ => acc = Some(n),
                }
            }
        }
        Ok(acc)
    }

    pub fn children(&self) -> Vec<&RepExpr> {
        match self {
            RepExpr::Dual(a)
            | RepExpr::Sym(_, a)
            | RepExpr::Wedge(_, a)
            | RepExpr::Twist(_, a)
            | RepExpr::Sub(_, a)
            | RepExpr::Quotient(_, a) => vec![a],
            RepExpr::Tensor(xs) | RepExpr::Sum(xs) => xs.iter().collect(),
            _ => vec![],
        }
    }

    /// Subalgebra tag forced by the leaves: `G_a` for explicit
    /// `kG_{a(r)}`-modules, `u3` for the induced Heisenberg module.
    pub fn required_tag(&self) -> Option<Tag> {
        match self {
            RepExpr::UMod(_) => Some(Tag::Ga(1)),
            RepExpr::U3Induced(_) => Some(Tag::U3),
            _ => self.children().into_iter().find_map(RepExpr::required_tag),
        }
    }

    /// Characteristic forced by explicit module data, if any.
    pub fn characteristic(&self) -> Option<u32> {
        match self {
            RepExpr::UMod(m) => Some(m.p()),
            RepExpr::Dual(a)
            | RepExpr::Sym(_, a)
            | RepExpr::Wedge(_, a)
            | RepExpr::Twist(_, a)
            | RepExpr::Sub(_, a)
            | RepExpr::Quotient(_, a) => a.characteristic(),
            RepExpr::Tensor(xs) | RepExpr::Sum(xs) => xs.iter().find_map(RepExpr::characteristic),
            _ => None,
        }
    }

    /// The structure map of a `sub` or `quotient` node over `F_p`: the
    /// inclusion into the parent (parent dim x sub dim) or the projection from
    /// it (quotient dim x parent dim).
    pub fn canonical_map(&self, p: u32) -> Result<Option<Mat>> {
        let f = Field::prime(p)?;
        match self {
            RepExpr::Sub(basis, a) => Ok(Some(int_basis(&f, a.dim(), basis)?)),
            RepExpr::Quotient(basis, a) => Ok(Some(quotient_frame(&int_basis(&f, a.dim(), basis)?)?.1)),
            _ => Ok(None),
        }
    }

    /// Whether the module can be evaluated on tuples of this shape.
    pub fn accepts(&self, t: &NilTuple) -> bool {
        self.group_size().ok().is_some_and(|n| n.is_none_or(|n| n == t.n()))
            && self.characteristic().is_none_or(|p| p == t.p())
    }

    /// The module's action on a group element with entries in `K[T]/T^D`.
    pub fn eval(&self, g: &PolyMat) -> Result<PolyMat> {
        let f = g.field().clone();
        let d = g.trunc();
        match self {
            RepExpr::Std(n) => {
                if g.size() != *n {
                    return Err(Error::InvalidModule(format!("std({n}) evaluated on {}x{} elements", g.size(), g.size())));
                }
                Ok(g.clone())
            }
            RepExpr::Trivial => Ok(PolyMat::identity(&f, 1, d)),
            RepExpr::UMod(m) => {
                check_unitriangular(g, 2, "a G_a-module")?;
                m.embed(&f)?.action_at(&g.entry(0, 1))
            }
            RepExpr::U3Induced(deg) => self.u3_coeffs(g, *deg, None),
            RepExpr::Dual(a) => Ok(a.eval(g)?.inverse()?.transpose()),
            RepExpr::Tensor(xs) => {
                let mut it = xs.iter();
                let first = it.next().ok_or_else(|| Error::InvalidModule("empty tensor".into()))?;
                let mut acc = first.eval(g)?;
                for x in it {
                    acc = acc.kron(&x.eval(g)?);
                }
                Ok(acc)
            }
            RepExpr::Sum(xs) => {
                if xs.is_empty() {
                    return Ok(PolyMat::zero(&f, 0, d));
                }
                let parts = xs.iter().map(|x| x.eval(g)).collect::<Result<Vec<_>>>()?;
                Ok(PolyMat::block_diag(&parts))
            }
            RepExpr::Sym(k, a) => Ok(sym_power(&a.eval(g)?, *k)),
            RepExpr::Wedge(k, a) => wedge_power(&a.eval(g)?, *k),
            RepExpr::Twist(e, a) => a.eval(&g.frobenius_twist(*e)),
            RepExpr::Sub(basis, a) => {
                let inner = a.eval(g)?;
                let coeffs = inner.coeffs().iter().map(|c| sub_coeff(c, basis)).collect::<Result<Vec<_>>>()?;
                PolyMat::from_coeffs(coeffs)
            }
            RepExpr::Quotient(basis, a) => {
                let inner = a.eval(g)?;
                let coeffs = inner.coeffs().iter().map(|c| quotient_coeff(c, basis)).collect::<Result<Vec<_>>>()?;
                PolyMat::from_coeffs(coeffs)
            }
        }
    }

    /// Coefficient of `T^j` in [`RepExpr::eval`], avoiding the full
    /// evaluation where the structure allows it.
    pub fn eval_coeff(&self, g: &PolyMat, j: usize) -> Result<Mat> {
        if j >= g.trunc() {
            return Err(Error::Dimension(format!("coefficient {j} beyond truncation {}", g.trunc())));
        }
        match self {
            RepExpr::U3Induced(deg) => Ok(self.u3_coeffs(g, *deg, Some(j))?.coeff(0)?.clone()),
            RepExpr::Sum(xs) if !xs.is_empty() => {
                let parts = xs.iter().map(|x| x.eval_coeff(g, j)).collect::<Result<Vec<_>>>()?;
                let refs: Vec<&Mat> = parts.iter().collect();
                Ok(Mat::block_diag(g.field(), &refs))
            }
            RepExpr::Tensor(xs) if xs.len() > 1 => {
                // Only the last product needs the single coefficient.
                let (last, init) = xs.split_last().expect("nonempty");
                let head = if init.len() == 1 { init[0].eval(g)? } else { RepExpr::Tensor(init.to_vec()).eval(g)? };
                let tail = last.eval(g)?;
                let f = g.field();
                let mut out = Mat::zeros(f, head.size() * tail.size(), head.size() * tail.size());
                for i in 0..=j {
                    let (a, b) = (head.coeff(i)?, tail.coeff(j - i)?);
                    if !a.is_zero() && !b.is_zero() {
                        out = out.add(&a.kron(b));
                    }
                }
                Ok(out)
            }
            RepExpr::Sub(basis, a) => sub_coeff(&a.eval_coeff(g, j)?, basis),
            RepExpr::Quotient(basis, a) => quotient_coeff(&a.eval_coeff(g, j)?, basis),
            _ => Ok(self.eval(g)?.coeff(j)?.clone()),
        }
    }

    /// Translation action on `k[x,y]_{<= deg}`: basis ordered by total degree,
    /// then by decreasing power of `x`.  With `only = Some(j)` returns a
    /// truncation-1 PolyMat holding just the coefficient of `T^j`.
    fn u3_coeffs(&self, g: &PolyMat, deg: usize, only: Option<usize>) -> Result<PolyMat> {
        check_unitriangular(g, 3, "the induced Heisenberg module")?;
        let f = g.field().clone();
        let d = g.trunc();
        let p = f.p();
        let a = g.entry(0, 1);
        let b = g.entry(1, 2);
        let mut apow = vec![trunc::one(&f, d)];
        let mut bpow = vec![trunc::one(&f, d)];
        for k in 1..=deg {
            apow.push(trunc::mul(&f, &apow[k - 1], &a));
            bpow.push(trunc::mul(&f, &bpow[k - 1], &b));
        }
        let basis: Vec<(usize, usize)> =
            (0..=deg).flat_map(|t| (0..=t).rev().map(move |i| (i, t - i))).collect();
        let index: BTreeMap<(usize, usize), usize> = basis.iter().enumerate().map(|(k, &m)| (m, k)).collect();
        let n = basis.len();
        let coeff_range: Vec<usize> = match only {
            Some(j) => vec![j],
            None => (0..d).collect(),
        };
        let mut mats: Vec<Mat> = coeff_range.iter().map(|_| Mat::zeros(&f, n, n)).collect();
        let mut prod_cache: BTreeMap<(usize, usize), Vec<Elem>> = BTreeMap::new();
        for (col, &(i, j)) in basis.iter().enumerate() {
            for k in 0..=i {
                let ck = binom_mod(i, k, p);
                if ck == 0 {
                    continue;
                }
                for l in 0..=j {
                    let cl = binom_mod(j, l, p);
                    if cl == 0 {
                        continue;
                    }
                    let key = (i - k, j - l);
                    let prod = prod_cache
                        .entry(key)
                        .or_insert_with(|| trunc::mul(&f, &apow[key.0], &bpow[key.1]));
                    let row = index[&(k, l)];
                    let scal = f.from_i64((ck * cl % p) as i64);
                    for (slot, &t) in coeff_range.iter().enumerate() {
                        let c = &prod[t];
                        if !f.is_zero(c) {
                            mats[slot].set(row, col, f.mul(c, &scal));
                        }
                    }
                }
            }
        }
        PolyMat::from_coeffs(mats)
    }
}

/// Restriction of one coefficient matrix to the span of `basis`.
fn sub_coeff(c: &Mat, basis: &[Vec<i64>]) -> Result<Mat> {
    let f = c.field().clone();
    let w = int_basis(&f, c.rows(), basis)?;
    let piv = pivot_rows(&w);
    let cols: Vec<usize> = (0..w.cols()).collect();
    let left_sq = w.submatrix(&piv, &cols).inverse()?;
    let mut sel = Mat::zeros(&f, piv.len(), c.rows());
    for (k, &i) in piv.iter().enumerate() {
        sel.set(k, i, f.one());
    }
    let cw = c.mul(&w);
    let out = left_sq.mul(&sel).mul(&cw);
    if cw != w.mul(&out) {
        return Err(Error::InvalidModule("subspace is not invariant".into()));
    }
    Ok(out)
}

/// Induced map of one coefficient matrix on the quotient by `basis`.
fn quotient_coeff(c: &Mat, basis: &[Vec<i64>]) -> Result<Mat> {
    let f = c.field().clone();
    let w = int_basis(&f, c.rows(), basis)?;
    let (comp, q) = quotient_frame(&w)?;
    if !q.mul(&c.mul(&w)).is_zero() {
        return Err(Error::InvalidModule("quotient by a non-invariant subspace".into()));
    }
    Ok(q.mul(c).mul(&comp))
}

/// `Sym^k` of a group element over `K[T]/T^D`.
fn sym_power(g: &PolyMat, k: usize) -> PolyMat {
    let f = g.field().clone();
    let (n, d) = (g.size(), g.trunc());
    let basis = monomials(n, k);
    let index: BTreeMap<Vec<usize>, usize> = basis.iter().enumerate().map(|(i, m)| (m.clone(), i)).collect();
    let m = basis.len();
    let entries: Vec<Vec<Elem>> = (0..n * n).map(|x| g.entry(x / n, x % n)).collect();
    let mut out: Vec<Vec<Elem>> = vec![trunc::zero(&f, d); m * m];
    for (col, a) in basis.iter().enumerate() {
        // Expand prod_j (g e_j)^{a_j} as a polynomial in x_0..x_{n-1}.
        let mut poly: BTreeMap<Vec<usize>, Vec<Elem>> = BTreeMap::new();
        poly.insert(vec![0; n], trunc::one(&f, d));
        for (j, &aj) in a.iter().enumerate() {
            for _ in 0..aj {
                let mut next: BTreeMap<Vec<usize>, Vec<Elem>> = BTreeMap::new();
                for (mono, c) in &poly {
                    for i in 0..n {
                        let gij = &entries[i * n + j];
                        if trunc::is_zero(&f, gij) {
                            continue;
                        }
                        let mut mm = mono.clone();
                        mm[i] += 1;
                        let term = trunc::mul(&f, c, gij);
                        let slot = next.entry(mm).or_insert_with(|| trunc::zero(&f, d));
                        *slot = trunc::add(&f, slot, &term);
                    }
                }
                poly = next;
            }
        }
        for (mono, c) in poly {
            out[index[&mono] * m + col] = c;
        }
    }
    PolyMat::from_entries(&f, m, d, &out)
}

/// `Λ^k` of a group element: minors `det g[I, J]` by permutation expansion.
fn wedge_power(g: &PolyMat, k: usize) -> Result<PolyMat> {
    if k > 6 {
        return Err(Error::Unsupported(format!("exterior power {k} > 6")));
    }
    let f = g.field().clone();
    let (n, d) = (g.size(), g.trunc());
    let basis = subsets(n, k);
    let m = basis.len();
    let entries: Vec<Vec<Elem>> = (0..n * n).map(|x| g.entry(x / n, x % n)).collect();
    let perms = permutations(k);
    let mut out: Vec<Vec<Elem>> = vec![trunc::zero(&f, d); m * m];
    for (ci, cols) in basis.iter().enumerate() {
        for (ri, rows) in basis.iter().enumerate() {
            let mut det = trunc::zero(&f, d);
            for (perm, odd) in &perms {
                let mut term = trunc::one(&f, d);
                for (a, &pa) in perm.iter().enumerate() {
                    term = trunc::mul(&f, &term, &entries[rows[pa] * n + cols[a]]);
                    if trunc::is_zero(&f, &term) {
                        break;
                    }
                }
                det = if *odd { trunc::sub(&f, &det, &term) } else { trunc::add(&f, &det, &term) };
            }
            out[ri * m + ci] = det;
        }
    }
    Ok(PolyMat::from_entries(&f, m, d, &out))
}

/// Which coefficient-extraction recipe produced an operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Recipe {
    /// Coefficient of `T^{p^{r-1}}` at the reversed tuple.
    Ur,
    /// `sum_s` coefficient of `T^{p^s}` at `exp(T B_s)`.
    Sum,
}

impl Recipe {
    pub fn name(self) -> &'static str {
        match self {
            Recipe::Ur => "ur",
            Recipe::Sum => "sum",
        }
    }
}

/// A p-nilpotent operator on a module, with provenance.
#[derive(Clone, Debug)]
pub struct PiOperator {
    pub theta: Mat,
    pub recipe: Recipe,
    pub r: usize,
}

fn checked_operator(theta: Mat, recipe: Recipe, r: usize) -> Result<PiOperator> {
    let p = theta.field().p();
    if !is_p_nilpotent(&theta, p) {
        return Err(Error::NotNilpotent(format!("{} operator fails theta^{p} = 0", recipe.name())));
    }
    Ok(PiOperator { theta, recipe, r })
}

fn check_compat(rep: &RepExpr, t: &NilTuple) -> Result<()> {
    if t.r() == 0 {
        return Err(Error::InvalidTuple("r must be at least 1".into()));
    }
    if let Some(n) = rep.group_size()? {
        if n != t.n() {
            return Err(Error::InvalidTuple(format!("module expects N = {n}, tuple has N = {}", t.n())));
        }
    }
    if let Some(p) = rep.characteristic() {
        if p != t.p() {
            return Err(Error::InvalidTuple(format!("module has p = {p}, tuple has p = {}", t.p())));
        }
    }
    Ok(())
}

/// Coefficient of `T^{p^{r-1}}` in `rep(one_param_poly(Λ_r t))`.
pub fn pi_operator_ur(rep: &RepExpr, t: &NilTuple) -> Result<PiOperator> {
    check_compat(rep, t)?;
    let g = one_param_poly(&t.lambda_r())?;
    let j = (t.p() as usize).pow(t.r() as u32 - 1);
    checked_operator(rep.eval_coeff(&g, j)?, Recipe::Ur, t.r())
}

/// `sum_s` coefficient of `T^{p^s}` in `rep(exp(T B_s))`, truncated at `p^r`.
pub fn pi_operator_sum(rep: &RepExpr, t: &NilTuple) -> Result<PiOperator> {
    check_compat(rep, t)?;
    t.validate()?;
    let p = t.p();
    let d = (p as usize).pow(t.r() as u32);
    let mut theta = Mat::zeros(t.field(), rep.dim(), rep.dim());
    for (s, b) in t.mats().iter().enumerate() {
        if b.is_zero() {
            continue;
        }
        let g = trunc_exp_poly(b, p, 1, d)?;
        theta = theta.add(&rep.eval_coeff(&g, (p as usize).pow(s as u32))?);
    }
    checked_operator(theta, Recipe::Sum, t.r())
}

pub fn pi_operator(rep: &RepExpr, t: &NilTuple, recipe: Recipe) -> Result<PiOperator> {
    match recipe {
        Recipe::Ur => pi_operator_ur(rep, t),
        Recipe::Sum => pi_operator_sum(rep, t),
    }
}

/// Direct formula for a `kG_{a(r)}`-module at a `G_a`-point `b`: coefficient
/// of `T^{p^{r-1}}` in `prod_i exp(f(T)^{p^i} U_i)` with
/// `f(T) = sum_j b_{r-1-j} T^{p^j}` (the reversed tuple).
pub fn umodule_pi_operator(m: &UModule, t: &NilTuple) -> Result<PiOperator> {
    if t.p() != m.p() {
        return Err(Error::InvalidTuple("characteristic mismatch".into()));
    }
    let b = t.ga_scalars()?;
    let f = t.field();
    let p = t.p() as usize;
    let r = t.r();
    let d = p.pow(r as u32);
    let mut poly = trunc::zero(f, d);
    for (j, bj) in b.iter().rev().enumerate() {
        poly[p.pow(j as u32)] = bj.clone();
    }
    let g = m.embed(f)?.action_at(&poly)?;
    checked_operator(g.coeff(p.pow(r as u32 - 1))?.clone(), Recipe::Ur, r)
}

/// `L_S` truncated to `span{1, T, ..., T^D}`: `u_i` acts on `T^n` by
/// `n_i T^{n - p^i}` (`n_i` the i-th base-p digit of n) for `i` in `S`, and by
/// zero otherwise; `r = 1 + max(S ∪ {0})`.
pub fn build_ls_truncation(p: u32, s: &[usize], degree: usize) -> Result<UModule> {
    let field = Field::prime(p)?;
    let r = 1 + s.iter().copied().max().unwrap_or(0);
    let dim = degree + 1;
    let pu = p as usize;
    let u = (0..r)
        .map(|i| {
            let mut m = Mat::zeros(&field, dim, dim);
            if s.contains(&i) {
                let step = pu.pow(i as u32);
                for n in step..dim {
                    let ni = digit(n, i, pu);
                    if ni > 0 {
                        m.set(n - step, n, field.from_i64(ni as i64));
                    }
                }
            }
            m
        })
        .collect();
    UModule::new(&field, dim, u)
}

/// `k[x,y]` truncated to total degree `<= degree`, a module for the
/// Heisenberg group through its quotient by the center.
pub fn build_u3_induced(degree: usize) -> RepExpr {
    RepExpr::U3Induced(degree)
}

/// Free dimensions forced in the truncation of degree `d` at any point of
/// `C_r(u_3)` not through the center.  `x^{p^r}` and `y^{p^r}` are invariant
/// under the `r`-th Frobenius kernel, so every box
/// `[a p^r, (a+1) p^r) x [b p^r, (b+1) p^r)` of exponents that fits under the
/// degree bound spans a copy of the regular module of `G_{a(r)}^2`.
pub fn u3_forced_free_dim(p: u32, r: usize, d: usize) -> usize {
    let q = (p as usize).pow(r as u32);
    // Box (a, b) fits iff (a + b + 2) q - 2 <= d.
    let mut boxes = 0;
    for s in 0.. {
        if (s + 2) * q > d + 2 {
            break;
        }
        boxes += s + 1;
    }
    boxes * q * q
}

/// A homogeneous polynomial in `x_1..x_r` with integer coefficients.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Zeta {
    pub r: usize,
    /// `(exponents, coefficient)` pairs.
    pub terms: Vec<(Vec<usize>, i64)>,
}

impl Zeta {
    /// Parses `"x1 + 2*x1*x2^3 - x2"` style input.
    pub fn parse(s: &str, r: usize) -> Result<Zeta> {
        let cleaned: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let mut terms = Vec::new();
        let mut rest = cleaned.as_str();
        while !rest.is_empty() {
            let (sign, body) = match rest.as_bytes()[0] {
                b'-' => (-1, &rest[1..]),
                b'+' => (1, &rest[1..]),
                _ => (1, rest),
            };
            let end = body.find(['+', '-']).unwrap_or(body.len());
            let term = &body[..end];
            rest = &body[end..];
            let mut coef = sign;
            let mut exps = vec![0usize; r];
            for factor in term.split('*') {
                if let Some(var) = factor.strip_prefix('x') {
                    let (idx, pw) = match var.split_once('^') {
                        Some((i, e)) => (i, e.parse::<usize>().map_err(|_| Error::Parse(format!("bad exponent in {term:?}")))?),
                        None => (var, 1),
                    };
                    let idx: usize = idx.parse().map_err(|_| Error::Parse(format!("bad variable in {term:?}")))?;
                    if idx == 0 || idx > r {
                        return Err(Error::Parse(format!("variable x{idx} outside x1..x{r}")));
                    }
                    exps[idx - 1] += pw;
                } else {
                    coef *= factor.parse::<i64>().map_err(|_| Error::Parse(format!("bad coefficient in {term:?}")))?;
                }
            }
            terms.push((exps, coef));
        }
        let z = Zeta { r, terms };
        z.degree()?;
        Ok(z)
    }

    /// Common total degree; errors if inhomogeneous or empty.
    pub fn degree(&self) -> Result<usize> {
        let degs: Vec<usize> = self.terms.iter().map(|(e, _)| e.iter().sum()).collect();
        match degs.first() {
            None => Err(Error::InvalidModule("zeta = 0".into())),
            Some(&d) if degs.iter().all(|&x| x == d) => Ok(d),
            _ => Err(Error::InvalidModule("zeta is not homogeneous".into())),
        }
    }

    /// Coefficient of `x^a`, reduced mod `p`.
    pub fn coefficient(&self, a: &[usize], p: u32) -> i64 {
        self.terms.iter().filter(|(e, _)| e == a).map(|(_, c)| c).sum::<i64>().rem_euclid(p as i64)
    }

    /// Value at a point (with coordinates already in the field).
    pub fn eval(&self, field: &Field, x: &[Elem]) -> Elem {
        self.terms.iter().fold(field.zero(), |acc, (e, c)| {
            let mono = e
                .iter()
                .enumerate()
                .fold(field.from_i64(*c), |m, (i, &k)| field.mul(&m, &field.pow(&x[i], k as i64).unwrap()));
            field.add(&acc, &mono)
        })
    }
}

/// Tensor product of the periodic resolutions of `k` over each
/// `k[u_i]/(u_i^p)`: generators of `P_m` are multi-indices `e` with `|e| = m`,
/// and `d(g_e) = sum_i (-1)^{e_0+..+e_{i-1}} δ_i g_{e - ε_i}` where `δ_i` is
/// `u_i` for odd `e_i` and `u_i^{p-1}` for even `e_i`.
pub struct KoszulResolution {
    field: Field,
    r: usize,
    regular: UModule,
}

impl KoszulResolution {
    pub fn new(field: &Field, r: usize) -> KoszulResolution {
        KoszulResolution { field: field.clone(), r, regular: UModule::regular(field, r) }
    }

    /// Generators of `P_m` in lexicographic order (largest first exponent first).
    pub fn generators(&self, m: usize) -> Vec<Vec<usize>> {
        monomials(self.r, m)
    }

    fn rank_dim(&self) -> usize {
        self.regular.dim()
    }

    /// The free module `P_m` as a [`UModule`].
    pub fn module(&self, m: usize) -> UModule {
        UModule::free(&self.field, self.r, self.generators(m).len())
    }

    /// Matrix of `d_m : P_m -> P_{m-1}` in the monomial bases.
    pub fn differential(&self, m: usize) -> Mat {
        let p = self.field.p() as usize;
        let src = self.generators(m);
        let dst = self.generators(m - 1);
        let q = self.rank_dim();
        let index: BTreeMap<&Vec<usize>, usize> = dst.iter().enumerate().map(|(i, e)| (e, i)).collect();
        let mut out = Mat::zeros(&self.field, dst.len() * q, src.len() * q);
        for (si, e) in src.iter().enumerate() {
            for i in 0..self.r {
                if e[i] == 0 {
                    continue;
                }
                let sign = if e[..i].iter().sum::<usize>() % 2 == 1 { -1 } else { 1 };
                let power = if e[i] % 2 == 1 { 1 } else { p - 1 };
                let mut target = e.clone();
                target[i] -= 1;
                let ti = index[&target];
                let mut op = Mat::identity(&self.field, q);
                for _ in 0..power {
                    op = self.regular.action()[i].mul(&op);
                }
                for c in 0..q {
                    for rr in 0..q {
                        let v = op.get(rr, c);
                        if !self.field.is_zero(v) {
                            let val = if sign < 0 { self.field.neg(v) } else { v.clone() };
                            out.set(ti * q + rr, si * q + c, val);
                        }
                    }
                }
            }
        }
        out
    }
}

/// Carlson module `L_ζ = ker(ζ: Ω^{2n} k -> k)` over `kG_{a(r)}`, `p` odd.
///
/// `Ω^{2n} k` is the image of `d_{2n}` in the resolution of
/// [`KoszulResolution`], and `ζ` is the functional on `P_{2n}` sending the
/// generator `g_{2a}` to the coefficient of `x^a` (other generators to 0),
/// composed with the augmentation.  So `x_i` is dual to the periodicity
/// generator of the `i`-th factor `k[u_{i-1}]/(u_{i-1}^p)`.
pub fn build_carlson(p: u32, r: usize, zeta: &Zeta) -> Result<UModule> {
    if p == 2 {
        return Err(Error::Unsupported("Carlson modules need p odd".into()));
    }
    if zeta.r != r {
        return Err(Error::InvalidModule(format!("zeta has {} variables, r = {r}", zeta.r)));
    }
    let n = zeta.degree()?;
    if n == 0 {
        return Err(Error::InvalidModule("zeta must have positive degree".into()));
    }
    if zeta.terms.iter().all(|(_, c)| c.rem_euclid(p as i64) == 0) {
        return Err(Error::InvalidModule("zeta = 0".into()));
    }
    let field = Field::prime(p)?;
    let res = KoszulResolution::new(&field, r);
    let q = res.rank_dim();
    let d = res.differential(2 * n);
    let gens = res.generators(2 * n);
    // Functional phi on P_{2n}: nonzero only on the constant term of each
    // generator block.
    let mut phi = Mat::zeros(&field, 1, gens.len() * q);
    for (gi, e) in gens.iter().enumerate() {
        if e.iter().all(|x| x % 2 == 0) {
            let a: Vec<usize> = e.iter().map(|x| x / 2).collect();
            phi.set(0, gi * q, field.from_i64(zeta.coefficient(&a, p)));
        }
    }
    let ker_phi = phi.kernel_mat();
    let l_basis = d.mul(&ker_phi).image_mat();
    res.module(2 * n - 1).submodule(&l_basis)
}

/// `Ω^{2n} k` from the same resolution (for dimension checks).
pub fn omega_even_trivial(p: u32, r: usize, n: usize) -> Result<UModule> {
    let field = Field::prime(p)?;
    let res = KoszulResolution::new(&field, r);
    let img = res.differential(2 * n).image_mat();
    res.module(2 * n - 1).submodule(&img)
}

/// Wire format of a [`RepExpr`]; builder nodes expand to explicit modules.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum RepJson {
    Std {
        n: usize,
    },
    Trivial,
    Umodule(UModuleJson),
    U3Induced {
        #[serde(rename = "D")]
        degree: usize,
    },
    Dual {
        of: Box<RepJson>,
    },
    Tensor {
        of: Vec<RepJson>,
    },
    Sum {
        of: Vec<RepJson>,
    },
    Sym {
        k: usize,
        of: Box<RepJson>,
    },
    Wedge {
        k: usize,
        of: Box<RepJson>,
    },
    Twist {
        e: u32,
        of: Box<RepJson>,
    },
    Sub {
        basis: Vec<Vec<i64>>,
        of: Box<RepJson>,
    },
    Quotient {
        basis: Vec<Vec<i64>>,
        of: Box<RepJson>,
    },
    /// `L_S` truncated at degree `D`.
    Ls {
        p: u32,
        #[serde(rename = "S")]
        s: Vec<usize>,
        #[serde(rename = "D")]
        degree: usize,
    },
    Regular {
        p: u32,
        r: usize,
    },
    Carlson {
        p: u32,
        r: usize,
        zeta: String,
    },
}

impl RepExpr {
    pub fn from_json(j: &RepJson) -> Result<RepExpr> {
        let b = |x: &RepJson| RepExpr::from_json(x).map(Box::new);
        let v = |xs: &[RepJson]| xs.iter().map(RepExpr::from_json).collect::<Result<Vec<_>>>();
        Ok(match j {
            RepJson::Std { n } => RepExpr::Std(*n),
            RepJson::Trivial => RepExpr::Trivial,
            RepJson::Umodule(m) => RepExpr::umodule(UModule::from_json(m)?),
            RepJson::U3Induced { degree } => RepExpr::U3Induced(*degree),
            RepJson::Dual { of } => RepExpr::Dual(b(of)?),
            RepJson::Tensor { of } => RepExpr::Tensor(v(of)?),
            RepJson::Sum { of } => RepExpr::Sum(v(of)?),
            RepJson::Sym { k, of } => RepExpr::Sym(*k, b(of)?),
            RepJson::Wedge { k, of } => RepExpr::Wedge(*k, b(of)?),
            RepJson::Twist { e, of } => RepExpr::Twist(*e, b(of)?),
            RepJson::Sub { basis, of } => RepExpr::Sub(basis.clone(), b(of)?),
            RepJson::Quotient { basis, of } => RepExpr::Quotient(basis.clone(), b(of)?),
            RepJson::Ls { p, s, degree } => RepExpr::umodule(build_ls_truncation(*p, s, *degree)?),
            RepJson::Regular { p, r } => RepExpr::umodule(UModule::regular(&Field::prime(*p)?, *r)),
            RepJson::Carlson { p, r, zeta } => RepExpr::umodule(build_carlson(*p, *r, &Zeta::parse(zeta, *r)?)?),
        })
    }

    pub fn to_json(&self) -> RepJson {
        let b = |x: &RepExpr| Box::new(x.to_json());
        let v = |xs: &[RepExpr]| xs.iter().map(RepExpr::to_json).collect();
        match self {
            RepExpr::Std(n) => RepJson::Std { n: *n },
            RepExpr::Trivial => RepJson::Trivial,
            RepExpr::UMod(m) => RepJson::Umodule(m.to_json()),
            RepExpr::U3Induced(d) => RepJson::U3Induced { degree: *d },
            RepExpr::Dual(a) => RepJson::Dual { of: b(a) },
            RepExpr::Tensor(xs) => RepJson::Tensor { of: v(xs) },
            RepExpr::Sum(xs) => RepJson::Sum { of: v(xs) },
            RepExpr::Sym(k, a) => RepJson::Sym { k: *k, of: b(a) },
            RepExpr::Wedge(k, a) => RepJson::Wedge { k: *k, of: b(a) },
            RepExpr::Twist(e, a) => RepJson::Twist { e: *e, of: b(a) },
            RepExpr::Sub(basis, a) => RepJson::Sub { basis: basis.clone(), of: b(a) },
            RepExpr::Quotient(basis, a) => RepJson::Quotient { basis: basis.clone(), of: b(a) },
        }
    }

    /// Parses a module file: either an expression tree (with `"op"`) or a
    /// bare `kG_{a(r)}`-module object (with `"U"`).
    pub fn from_value(v: &serde_json::Value) -> Result<RepExpr> {
        if v.get("op").is_some() {
            let j: RepJson = serde_json::from_value(v.clone()).map_err(|e| Error::Parse(e.to_string()))?;
            RepExpr::from_json(&j)
        } else if v.get("U").is_some() {
            let j: UModuleJson = serde_json::from_value(v.clone()).map_err(|e| Error::Parse(e.to_string()))?;
            Ok(RepExpr::umodule(UModule::from_json(&j)?))
        } else {
            Err(Error::Parse("module JSON needs an \"op\" or \"U\" field".into()))
        }
    }
}

/// Loads every `*.json` module in a directory, sorted by file stem.
pub fn load_corpus(dir: &std::path::Path) -> Result<Vec<(String, RepExpr)>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::Parse(format!("{}: {e}", dir.display())))?;
    let mut paths: Vec<std::path::PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|path| {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
            let v: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
            let name = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            Ok((name, RepExpr::from_value(&v)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{jordan_partition, sample_c_r};

    fn f3() -> Field {
        Field::prime(3).unwrap()
    }

    #[test]
    fn binomials() {
        assert_eq!(binom_mod(9, 3, 3), 0);
        assert_eq!(binom_mod(4, 1, 3), 1);
        assert_eq!(binom_mod(10, 3, 3), 0);
        assert_eq!(binom_mod(10, 1, 3), 1);
        assert_eq!(binom_mod(6, 3, 5), 20 % 5);
    }

    #[test]
    fn trunc_exp_examples() {
        let f = f3();
        assert!(trunc_exp(&Mat::zeros(&f, 2, 2), 3).unwrap().is_identity());
        let b = Mat::unit(&f, 2, 2, 0, 1);
        assert_eq!(trunc_exp(&b, 3).unwrap(), Mat::identity(&f, 2).add(&b));
        let t = sample_c_r(&f, 3, 1, None, 3).unwrap();
        let b = &t.mats()[0];
        assert!(trunc_exp(b, 3).unwrap().mul(&trunc_exp(&b.neg(), 3).unwrap()).is_identity());
    }

    #[test]
    fn one_param_examples() {
        let f = f3();
        let t = sample_c_r(&f, 3, 2, None, 11).unwrap();
        assert!(one_param_eval(&t, &f.zero()).unwrap().is_identity());
        let z = NilTuple::zero(&f, 3, 2, None);
        assert_eq!(one_param_poly(&z).unwrap(), PolyMat::identity(&f, 3, 9));
        let g = one_param_poly(&t).unwrap();
        assert_eq!(g.coeff(3).unwrap(), &t.mats()[1]);
    }

    #[test]
    fn std_operator_is_b0() {
        let f = f3();
        for seed in 0..5 {
            let t = sample_c_r(&f, 3, 3, None, seed).unwrap();
            let th = pi_operator_ur(&RepExpr::Std(3), &t).unwrap();
            assert_eq!(th.theta, t.mats()[0]);
        }
    }

    #[test]
    fn sym2_of_std2_is_single_block() {
        let f = f3();
        let b = Mat::unit(&f, 2, 2, 0, 1);
        let t = NilTuple::new(&f, 2, None, vec![b]).unwrap();
        let th = pi_operator_ur(&RepExpr::sym(2, RepExpr::Std(2)), &t).unwrap();
        assert_eq!(jordan_partition(&th.theta, 3).unwrap().to_string(), "[3]^1");
    }

    #[test]
    fn ls_examples() {
        let m = build_ls_truncation(3, &[], 5).unwrap();
        assert!(m.action().iter().all(Mat::is_zero));
        let m = build_ls_truncation(3, &[0], 2).unwrap();
        let f = f3();
        let t = NilTuple::ga(&f, &[f.one()]);
        let th = umodule_pi_operator(&m, &t).unwrap();
        assert_eq!(jordan_partition(&th.theta, 3).unwrap().to_string(), "[3]^1");
        let m = build_ls_truncation(3, &[1], 9).unwrap();
        let at = |b0: i64, b1: i64| {
            umodule_pi_operator(&m, &NilTuple::ga(&f, &[f.from_i64(b0), f.from_i64(b1)])).unwrap().theta
        };
        assert!(at(1, 0).is_zero());
        assert!(!at(0, 1).is_zero());
    }

    #[test]
    fn umodule_leaf_matches_direct_formula() {
        let f9 = Field::extension(3, 2).unwrap();
        let m = build_ls_truncation(3, &[0, 1], 10).unwrap();
        let rep = RepExpr::umodule(m.clone());
        for seed in 0..6 {
            let t = sample_c_r(&f9, 2, 2, Some(Tag::Ga(1)), seed).unwrap();
            assert_eq!(pi_operator_ur(&rep, &t).unwrap().theta, umodule_pi_operator(&m, &t).unwrap().theta);
        }
    }

    #[test]
    fn carlson_dimensions() {
        let z = Zeta::parse("x1", 1).unwrap();
        let l = build_carlson(3, 1, &z).unwrap();
        assert_eq!(l.dim(), omega_even_trivial(3, 1, 1).unwrap().dim() - 1);
        assert_eq!(l.dim(), 0);
        for s in ["x1", "x2", "x1+x2", "x1^2-x2^2"] {
            let z = Zeta::parse(s, 2).unwrap();
            let n = z.degree().unwrap();
            let l = build_carlson(3, 2, &z).unwrap();
            assert_eq!(l.dim() + 1, omega_even_trivial(3, 2, n).unwrap().dim());
        }
        assert!(build_carlson(2, 1, &Zeta::parse("x1", 1).unwrap()).is_err());
    }

    #[test]
    fn koszul_squares_to_zero() {
        let f = Field::prime(5).unwrap();
        let res = KoszulResolution::new(&f, 2);
        for m in 2..5 {
            assert!(res.differential(m - 1).mul(&res.differential(m)).is_zero());
        }
    }

    #[test]
    fn generic_syzygy_matches_koszul() {
        let f = f3();
        let mut m = UModule::trivial(&f, 2);
        for k in 1..=4 {
            m = m.syzygy().unwrap();
            let img = KoszulResolution::new(&f, 2).differential(k).image_mat();
            assert_eq!(m.dim(), img.cols(), "Omega^{k}");
        }
    }

    #[test]
    fn zeta_parsing() {
        let z = Zeta::parse("2*x1^2 - x1*x2", 2).unwrap();
        assert_eq!(z.degree().unwrap(), 2);
        assert_eq!(z.coefficient(&[1, 1], 3), 2);
        assert!(Zeta::parse("x1 + x2^2", 2).is_err());
        assert!(Zeta::parse("x3", 2).is_err());
    }

    #[test]
    fn json_round_trip() {
        let e = RepExpr::tensor(RepExpr::sym(2, RepExpr::Std(2)), RepExpr::dual(RepExpr::Std(2)));
        let j = serde_json::to_value(e.to_json()).unwrap();
        assert_eq!(RepExpr::from_value(&j).unwrap(), e);
    }
}
