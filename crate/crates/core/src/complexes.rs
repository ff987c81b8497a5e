//! Bounded complexes, their restriction along π-points to complexes over
//! `Λ = k[t]/t^p`, and two independent tests for "perfect" (quasi-isomorphic
//! to a bounded complex of free modules).
//!
//! * [`tate_nonzero`] computes Tate hypercohomology directly.  With the
//!   2-periodic complete resolution `P` of `k` (`P^j = Λ`, differential `t`
//!   from even to odd degree and `t^{p-1}` from odd to even), the total
//!   complex of `Hom_Λ(P, C)` has `Tot^n = ⊕_i C^i` and is itself
//!   2-periodic in `n`, so degrees 0 and 1 decide every degree.  Only the
//!   finitely many `i` with `C^i ≠ 0` contribute, which is why the window of
//!   degrees never needs to extend past the support of `C`.
//! * [`phi_collapse`] moves the complex into degree 0 inside the stable
//!   category: the lowest layer below 0 is pushed out along its injective
//!   hull, the highest layer above 0 is pulled back along its projective
//!   cover, and the surviving degree-0 module is stripped of free summands.
//!
//! Shifts follow `(C[n])^i = C^{n+i}` with differential `(-1)^n d`, so the
//! module `M` in degree `-n` (that is, `M[n]`) collapses to `Ω^{-n} M`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::geometry::{jordan_partition, JordanType, NilTuple};
use crate::linalg::{Mat, MatJson};
use crate::rep::{pi_operator_ur, quotient_frame, RepExpr};

/// A finite-dimensional `k[t]/t^p`-module: a vector space with `θ^p = 0`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KtModule {
    p: u32,
    theta: Mat,
}

impl KtModule {
    pub fn new(p: u32, theta: Mat) -> Result<KtModule> {
        if !theta.is_square() {
            return Err(Error::Dimension("θ must be square".into()));
        }
        if !theta.pow(p as usize).is_zero() {
            return Err(Error::NotNilpotent(format!("θ^{p} != 0")));
        }
        Ok(KtModule { p, theta })
    }

    pub fn zero(field: &Field, p: u32) -> KtModule {
        KtModule { p, theta: Mat::zeros(field, 0, 0) }
    }

    /// Single Jordan block `[j]`: `θ e_k = e_{k+1}`.
    pub fn block(field: &Field, p: u32, j: usize) -> KtModule {
        assert!(j <= p as usize, "block larger than p");
        let mut theta = Mat::zeros(field, j, j);
        for k in 0..j.saturating_sub(1) {
            theta.set(k + 1, k, field.one());
        }
        KtModule { p, theta }
    }

    pub fn trivial(field: &Field, p: u32) -> KtModule {
        KtModule::block(field, p, 1)
    }

    /// `Λ^rank` with basis `t^i g_j` at index `j p + i`.
    pub fn free(field: &Field, p: u32, rank: usize) -> KtModule {
        KtModule::from_blocks(field, p, &vec![p as usize; rank])
    }

    pub fn from_blocks(field: &Field, p: u32, sizes: &[usize]) -> KtModule {
        sizes
            .iter()
            .fold(KtModule::zero(field, p), |acc, &j| acc.direct_sum(&KtModule::block(field, p, j)))
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn field(&self) -> &Field {
        self.theta.field()
    }

    pub fn dim(&self) -> usize {
        self.theta.rows()
    }

    pub fn theta(&self) -> &Mat {
        &self.theta
    }

    pub fn jordan_type(&self) -> JordanType {
        jordan_partition(&self.theta, self.p).expect("θ is p-nilpotent by construction")
    }

    /// Free (including zero): every Jordan block has size `p`.
    pub fn is_free(&self) -> bool {
        self.jordan_type().is_free()
    }

    pub fn direct_sum(&self, other: &KtModule) -> KtModule {
        KtModule { p: self.p, theta: Mat::block_diag(self.field(), &[&self.theta, &other.theta]) }
    }

    /// The same module in the basis given by the columns of `change`.
    pub fn change_basis(&self, change: &Mat) -> Result<KtModule> {
        let inv = change.inverse()?;
        Ok(KtModule { p: self.p, theta: inv.mul(&self.theta).mul(change) })
    }

    /// Quotient by a θ-invariant subspace given by a column basis.
    pub fn quotient(&self, w: &Mat) -> Result<(KtModule, Mat, Mat)> {
        let (c, q) = quotient_frame(w)?;
        if !q.mul(&self.theta.mul(w)).is_zero() {
            return Err(Error::InvalidModule("quotient by a non-invariant subspace".into()));
        }
        Ok((KtModule { p: self.p, theta: q.mul(&self.theta).mul(&c) }, c, q))
    }

    /// Submodule on a θ-invariant column basis.
    pub fn submodule(&self, w: &Mat) -> Result<KtModule> {
        let theta = w
            .solve(&self.theta.mul(w))
            .ok_or_else(|| Error::InvalidModule("subspace is not invariant".into()))?;
        Ok(KtModule { p: self.p, theta })
    }
}

/// Minimal injective hull `ι : M -> Λ^s`, `s = dim soc M`.
///
/// The `j`-th component is `m ↦ Σ_i λ_j(θ^{p-1-i} m) t^i` where `λ_j` is the
/// coordinate functional at the `j`-th pivot row of a basis of `ker θ`;
/// these restrict to a basis of the dual of the socle, so `ι` is injective.
pub fn injective_hull(m: &KtModule) -> (KtModule, Mat) {
    let f = m.field().clone();
    let p = m.p as usize;
    let socle = m.theta.kernel_mat();
    let rows = socle.transpose().rref().pivots;
    let s = rows.len();
    let mut iota = Mat::zeros(&f, s * p, m.dim());
    let mut pw = Mat::identity(&f, m.dim());
    // pw = θ^e; fills t^{p-1-e} coefficients.
    for e in 0..p {
        let i = p - 1 - e;
        for (j, &row) in rows.iter().enumerate() {
            for c in 0..m.dim() {
                let v = pw.get(row, c);
                if !f.is_zero(v) {
                    iota.set(j * p + i, c, v.clone());
                }
            }
        }
        pw = m.theta.mul(&pw);
    }
    (KtModule::free(&f, m.p, s), iota)
}

/// Projective cover `π : Λ^b -> M`, `b = dim M/θM`; generators are the
/// standard basis vectors completing `im θ`, taken in index order.
pub fn projective_cover(m: &KtModule) -> (KtModule, Mat) {
    let f = m.field().clone();
    let p = m.p as usize;
    let mut basis = m.theta.image_mat();
    let mut gens = Vec::new();
    for k in 0..m.dim() {
        let cand = basis.hstack(&Mat::unit(&f, m.dim(), 1, k, 0));
        if cand.rank() > basis.cols() {
            basis = cand;
            gens.push(k);
        }
    }
    let mut cols = Vec::with_capacity(gens.len() * p);
    for &g in &gens {
        let mut v: Vec<_> = (0..m.dim()).map(|i| if i == g { f.one() } else { f.zero() }).collect();
        for _ in 0..p {
            cols.push(v.clone());
            v = m.theta.apply(&v);
        }
    }
    let pi = Mat::from_columns(&f, m.dim(), &cols).unwrap();
    (KtModule::free(&f, m.p, gens.len()), pi)
}

/// Removes free summands: quotient by the Λ-span of vectors `v_i` whose
/// images `θ^{p-1} v_i` form a basis of `im θ^{p-1}`.
pub fn strip_free(m: &KtModule) -> KtModule {
    let p = m.p as usize;
    let top = m.theta.pow(p - 1);
    let pivots = top.rref().pivots;
    if pivots.is_empty() {
        return m.clone();
    }
    let f = m.field().clone();
    let mut cols = Vec::with_capacity(pivots.len() * p);
    for &c in &pivots {
        let mut v: Vec<_> = (0..m.dim()).map(|i| if i == c { f.one() } else { f.zero() }).collect();
        for _ in 0..p {
            cols.push(v.clone());
            v = m.theta.apply(&v);
        }
    }
    let w = Mat::from_columns(&f, m.dim(), &cols).unwrap();
    m.quotient(&w).expect("Λ-span is invariant").0
}

/// `Ω^{-1} M`: cokernel of the minimal injective hull, free summands removed.
pub fn omega_inverse(m: &KtModule) -> KtModule {
    let (hull, iota) = injective_hull(m);
    if iota.cols() == 0 {
        return KtModule::zero(m.field(), m.p);
    }
    let w = iota.image_mat();
    strip_free(&hull.quotient(&w).expect("image of a Λ-map is invariant").0)
}

/// `Ω M`: kernel of the projective cover, free summands removed.
pub fn omega(m: &KtModule) -> KtModule {
    let (cover, pi) = projective_cover(m);
    let ker = pi.kernel_mat();
    strip_free(&cover.submodule(&ker).expect("kernel of a Λ-map is invariant"))
}

/// A bounded complex over `Λ`: `modules[k]` sits in degree `start + k` and
/// `diffs[k] : modules[k] -> modules[k+1]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LambdaComplex {
    p: u32,
    field: Field,
    start: i64,
    modules: Vec<KtModule>,
    diffs: Vec<Mat>,
}

impl LambdaComplex {
    pub fn new(field: &Field, p: u32, start: i64, modules: Vec<KtModule>, diffs: Vec<Mat>) -> Result<LambdaComplex> {
        let c = LambdaComplex { p, field: field.clone(), start, modules, diffs };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.modules.is_empty() {
            return Err(Error::InvalidComplex("no layers".into()));
        }
        if self.diffs.len() + 1 != self.modules.len() {
            return Err(Error::InvalidComplex(format!(
                "{} layers need {} differentials, got {}",
                self.modules.len(),
                self.modules.len() - 1,
                self.diffs.len()
            )));
        }
        for (k, d) in self.diffs.iter().enumerate() {
            let (a, b) = (&self.modules[k], &self.modules[k + 1]);
            if d.rows() != b.dim() || d.cols() != a.dim() {
                return Err(Error::InvalidComplex(format!("d^{} has the wrong shape", self.start + k as i64)));
            }
            if b.theta.mul(d) != d.mul(&a.theta) {
                return Err(Error::InvalidComplex(format!("d^{} is not Λ-linear", self.start + k as i64)));
            }
            if k > 0 && !d.mul(&self.diffs[k - 1]).is_zero() {
                return Err(Error::InvalidComplex(format!("d∘d != 0 at degree {}", self.start + k as i64 - 1)));
            }
        }
        Ok(())
    }

    /// `M` concentrated in degree `degree`.
    pub fn from_module(m: &KtModule, degree: i64) -> LambdaComplex {
        LambdaComplex { p: m.p, field: m.field().clone(), start: degree, modules: vec![m.clone()], diffs: vec![] }
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    /// `(lowest, highest)` degree of the stored range.
    pub fn degrees(&self) -> (i64, i64) {
        (self.start, self.start + self.modules.len() as i64 - 1)
    }

    pub fn modules(&self) -> &[KtModule] {
        &self.modules
    }

    pub fn diffs(&self) -> &[Mat] {
        &self.diffs
    }

    pub fn module_at(&self, degree: i64) -> KtModule {
        let k = degree - self.start;
        if k < 0 || k >= self.modules.len() as i64 {
            KtModule::zero(&self.field, self.p)
        } else {
            self.modules[k as usize].clone()
        }
    }

    /// `d^degree`, zero outside the stored range.
    pub fn diff_at(&self, degree: i64) -> Mat {
        let k = degree - self.start;
        if k >= 0 && (k as usize) < self.diffs.len() {
            self.diffs[k as usize].clone()
        } else {
            Mat::zeros(&self.field, self.module_at(degree + 1).dim(), self.module_at(degree).dim())
        }
    }

    /// Same complex stored over `[lo, hi]` (which must contain the old range).
    pub fn padded(&self, lo: i64, hi: i64) -> LambdaComplex {
        let lo = lo.min(self.degrees().0);
        let hi = hi.max(self.degrees().1);
        LambdaComplex {
            p: self.p,
            field: self.field.clone(),
            start: lo,
            modules: (lo..=hi).map(|i| self.module_at(i)).collect(),
            diffs: (lo..hi).map(|i| self.diff_at(i)).collect(),
        }
    }

    pub fn total_dim(&self) -> usize {
        self.modules.iter().map(KtModule::dim).sum()
    }

    /// `(C[n])^i = C^{n+i}`, differential `(-1)^n d`.
    pub fn shift(&self, n: i64) -> LambdaComplex {
        let diffs = if n % 2 == 0 { self.diffs.clone() } else { self.diffs.iter().map(Mat::neg).collect() };
        LambdaComplex { start: self.start - n, diffs, ..self.clone() }
    }

    pub fn direct_sum(&self, other: &LambdaComplex) -> LambdaComplex {
        let lo = self.degrees().0.min(other.degrees().0);
        let hi = self.degrees().1.max(other.degrees().1);
        let (a, b) = (self.padded(lo, hi), other.padded(lo, hi));
        LambdaComplex {
            p: self.p,
            field: self.field.clone(),
            start: lo,
            modules: a.modules.iter().zip(&b.modules).map(|(x, y)| x.direct_sum(y)).collect(),
            diffs: a.diffs.iter().zip(&b.diffs).map(|(x, y)| Mat::block_diag(&self.field, &[x, y])).collect(),
        }
    }

    /// Checks that `f` (one matrix per degree of the common range `[lo, hi]`)
    /// is a Λ-linear chain map `self -> target`.
    pub fn check_chain_map(&self, target: &LambdaComplex, lo: i64, f: &[Mat]) -> Result<()> {
        for (k, fk) in f.iter().enumerate() {
            let i = lo + k as i64;
            let (a, b) = (self.module_at(i), target.module_at(i));
            if fk.rows() != b.dim() || fk.cols() != a.dim() {
                return Err(Error::InvalidComplex(format!("chain map has the wrong shape in degree {i}")));
            }
            if b.theta.mul(fk) != fk.mul(&a.theta) {
                return Err(Error::InvalidComplex(format!("chain map is not Λ-linear in degree {i}")));
            }
            if let Some(next) = f.get(k + 1) {
                if target.diff_at(i).mul(fk) != next.mul(&self.diff_at(i)) {
                    return Err(Error::InvalidComplex(format!("chain map does not commute with d in degree {i}")));
                }
            }
        }
        Ok(())
    }

    /// Mapping cone of `f : self -> target` given on `[lo, lo + f.len())`
    /// (covering both complexes): `cone^n = C^{n+1} ⊕ D^n`,
    /// `d(c, x) = (-d c, f c + d x)`.
    pub fn cone(&self, target: &LambdaComplex, lo: i64, f: &[Mat]) -> Result<LambdaComplex> {
        let hi = lo + f.len() as i64 - 1;
        let (c, d) = (self.padded(lo, hi), target.padded(lo, hi));
        if c.degrees() != (lo, hi) || d.degrees() != (lo, hi) {
            return Err(Error::InvalidComplex("chain map does not cover both complexes".into()));
        }
        self.check_chain_map(target, lo, f)?;
        let fld = &self.field;
        let modules: Vec<KtModule> = (lo - 1..=hi).map(|n| c.module_at(n + 1).direct_sum(&d.module_at(n))).collect();
        let diffs = (lo - 1..hi)
            .map(|n| {
                let top = Mat::block_diag(fld, &[&c.diff_at(n + 1).neg(), &d.diff_at(n)]);
                let mut out = top;
                // Lower-left block f^{n+1} : C^{n+1} -> D^{n+1}.
                let fk = if n + 1 >= lo && n < hi { f[(n + 1 - lo) as usize].clone() } else { Mat::zeros(fld, 0, 0) };
                let row0 = c.module_at(n + 2).dim();
                for i in 0..fk.rows() {
                    for j in 0..fk.cols() {
                        out.set(row0 + i, j, fk.get(i, j).clone());
                    }
                }
                out
            })
            .collect();
        LambdaComplex::new(fld, self.p, lo - 1, modules, diffs)
    }

    /// Identity chain map on the stored range.
    pub fn identity_map(&self) -> Vec<Mat> {
        self.modules.iter().map(|m| Mat::identity(&self.field, m.dim())).collect()
    }
}

/// Value of the collapse: a module without free summands, plus the steps
/// taken to reach degree 0.
#[derive(Clone, Debug)]
pub struct StableRep {
    pub module: KtModule,
    pub steps: Vec<String>,
}

impl StableRep {
    pub fn is_zero(&self) -> bool {
        self.module.dim() == 0
    }

    pub fn jordan_type(&self) -> JordanType {
        self.module.jordan_type()
    }
}

/// Stable-category image of a complex, computed by moving everything into
/// degree 0 (see the module docs).
pub fn phi_collapse(c: &LambdaComplex) -> Result<StableRep> {
    c.validate()?;
    let f = c.field.clone();
    let mut cur = c.padded(0, 0);
    let mut steps = Vec::new();
    // Pushouts along injective hulls, bottom up.
    while cur.degrees().0 < 0 {
        let lo = cur.degrees().0;
        let m = cur.module_at(lo);
        let n = cur.module_at(lo + 1);
        let d = cur.diff_at(lo);
        let (hull, iota) = injective_hull(&m);
        let sum = n.direct_sum(&hull);
        let w = d.vstack(&iota.neg());
        let (pushout, comp, _) = if w.cols() == 0 {
            let id = Mat::identity(&f, sum.dim());
            (sum.clone(), id.clone(), id)
        } else {
            sum.quotient(&w.image_mat())?
        };
        steps.push(format!("pushout at degree {lo}: dim {} -> {}", n.dim(), pushout.dim()));
        let mut modules = vec![pushout];
        let mut diffs = Vec::new();
        if cur.degrees().1 > lo + 1 {
            let next = cur.diff_at(lo + 1).hstack(&Mat::zeros(&f, cur.module_at(lo + 2).dim(), hull.dim()));
            diffs.push(next.mul(&comp));
            modules.extend(cur.modules[2..].iter().cloned());
            diffs.extend(cur.diffs[2..].iter().cloned());
        }
        cur = LambdaComplex { p: cur.p, field: f.clone(), start: lo + 1, modules, diffs };
    }
    // Pullbacks along projective covers, top down.
    while cur.degrees().1 > 0 {
        let hi = cur.degrees().1;
        let m = cur.module_at(hi);
        let n = cur.module_at(hi - 1);
        let d = cur.diff_at(hi - 1);
        let (cover, pi) = projective_cover(&m);
        let sum = n.direct_sum(&cover);
        let kb = d.hstack(&pi.neg()).kernel_mat();
        let pullback = sum.submodule(&kb)?;
        steps.push(format!("pullback at degree {hi}: dim {} -> {}", n.dim(), pullback.dim()));
        let keep = cur.modules.len() - 2;
        let mut modules: Vec<KtModule> = cur.modules[..keep].to_vec();
        let mut diffs: Vec<Mat> = cur.diffs[..keep.saturating_sub(1)].to_vec();
        if keep > 0 {
            let prev = cur.diff_at(hi - 2).vstack(&Mat::zeros(&f, cover.dim(), cur.module_at(hi - 2).dim()));
            diffs.push(kb.solve(&prev).ok_or_else(|| Error::InvalidComplex("d∘d != 0".into()))?);
        }
        modules.push(pullback);
        cur = LambdaComplex { p: cur.p, field: f.clone(), start: cur.start, modules, diffs };
    }
    let module = strip_free(&cur.module_at(0));
    steps.push(format!("strip free summands: dim {} -> {}", cur.module_at(0).dim(), module.dim()));
    Ok(StableRep { module, steps })
}

/// Exponent of `t` in the complete resolution's differential out of `P^j`.
fn periodic_exponent(j: i64, p: u32) -> usize {
    if j.rem_euclid(2) == 0 {
        1
    } else {
        p as usize - 1
    }
}

/// Matrix of `D^n : Tot^n -> Tot^{n+1}` on `⊕_i C^i` (blocks in degree order):
/// `(D x)_k = d x_{k-1} - (-1)^n θ^{a(k-1-n)} x_k`.
fn tate_differential(c: &LambdaComplex, n: i64) -> Mat {
    let f = &c.field;
    let (lo, hi) = c.degrees();
    let offs: Vec<usize> = c
        .modules
        .iter()
        .scan(0, |acc, m| {
            let o = *acc;
            *acc += m.dim();
            Some(o)
        })
        .collect();
    let total = c.total_dim();
    let mut out = Mat::zeros(f, total, total);
    let mut put = |r0: usize, c0: usize, m: &Mat| {
        for i in 0..m.rows() {
            for j in 0..m.cols() {
                let v = m.get(i, j);
                if !f.is_zero(v) {
                    out.set(r0 + i, c0 + j, v.clone());
                }
            }
        }
    };
    for k in lo..=hi {
        let ki = (k - lo) as usize;
        let mut diag = c.modules[ki].theta.pow(periodic_exponent(k - 1 - n, c.p));
        if n.rem_euclid(2) == 0 {
            diag = diag.neg();
        }
        put(offs[ki], offs[ki], &diag);
        if k > lo {
            put(offs[ki], offs[ki - 1], &c.diffs[ki - 1]);
        }
    }
    out
}

/// Dimensions of `Ĥ^0` and `Ĥ^1`.
pub fn tate_dims(c: &LambdaComplex) -> Result<[usize; 2]> {
    c.validate()?;
    let mut out = [0; 2];
    for (slot, n) in [0i64, 1].into_iter().enumerate() {
        let dn = tate_differential(c, n);
        let prev = tate_differential(c, n - 1);
        out[slot] = (dn.cols() - dn.rank()) - prev.rank();
    }
    Ok(out)
}

/// True iff some Tate hypercohomology group is nonzero (the complex is not
/// perfect).
pub fn tate_nonzero(c: &LambdaComplex) -> Result<bool> {
    Ok(tate_dims(c)?.iter().any(|&d| d > 0))
}

/// Linear constraints on `X : dim_a -> dim_b` (row-major unknowns) expressing
/// `θ_b X = X θ_a`.
fn hom_constraints(a: &Mat, b: &Mat) -> Vec<Vec<(usize, crate::field::Elem)>> {
    let f = a.field();
    let (m, n) = (b.rows(), a.rows());
    let mut rows = Vec::new();
    for r in 0..m {
        for c in 0..n {
            let mut row = Vec::new();
            for k in 0..m {
                let v = b.get(r, k);
                if !f.is_zero(v) {
                    row.push((k * n + c, v.clone()));
                }
            }
            for k in 0..n {
                let v = a.get(k, c);
                if !f.is_zero(v) {
                    row.push((r * n + k, f.neg(v)));
                }
            }
            rows.push(row);
        }
    }
    rows
}

fn constraint_mat(f: &Field, unknowns: usize, rows: &[Vec<(usize, crate::field::Elem)>]) -> Mat {
    let mut m = Mat::zeros(f, rows.len(), unknowns);
    for (i, row) in rows.iter().enumerate() {
        for (j, v) in row {
            let cur = m.get(i, *j).clone();
            m.set(i, *j, f.add(&cur, v));
        }
    }
    m
}

fn random_combination<R: Rng + ?Sized>(f: &Field, basis: &[Vec<crate::field::Elem>], len: usize, rng: &mut R) -> Vec<crate::field::Elem> {
    let mut v = vec![f.zero(); len];
    for b in basis {
        let c = f.random(rng);
        if f.is_zero(&c) {
            continue;
        }
        for (x, y) in v.iter_mut().zip(b) {
            *x = f.add(x, &f.mul(&c, y));
        }
    }
    v
}

/// A random Λ-module: a few random Jordan blocks in a random basis.
pub fn random_kt_module<R: Rng + ?Sized>(field: &Field, p: u32, max_blocks: usize, rng: &mut R) -> KtModule {
    let count = rng.gen_range(0..=max_blocks);
    let sizes: Vec<usize> = (0..count).map(|_| rng.gen_range(1..=p as usize)).collect();
    let m = KtModule::from_blocks(field, p, &sizes);
    if m.dim() == 0 {
        return m;
    }
    let change = loop {
        let data = (0..m.dim() * m.dim()).map(|_| field.random(rng)).collect();
        let g = Mat::from_elems(field, m.dim(), m.dim(), data).unwrap();
        if g.rank() == m.dim() {
            break g;
        }
    };
    m.change_basis(&change).unwrap()
}

/// A random bounded complex with `1..=max_layers` layers: each differential
/// is a random Λ-linear map killing the image of the previous one.
pub fn random_lambda_complex<R: Rng + ?Sized>(
    field: &Field,
    p: u32,
    max_layers: usize,
    max_blocks: usize,
    rng: &mut R,
) -> LambdaComplex {
    let layers = rng.gen_range(1..=max_layers);
    let start = rng.gen_range(-2..=2);
    let modules: Vec<KtModule> = (0..layers).map(|_| random_kt_module(field, p, max_blocks, rng)).collect();
    let mut diffs: Vec<Mat> = Vec::new();
    for k in 0..layers.saturating_sub(1) {
        let (a, b) = (&modules[k], &modules[k + 1]);
        let unknowns = a.dim() * b.dim();
        let mut rows = hom_constraints(&a.theta, &b.theta);
        if let Some(prev) = diffs.last() {
            // X * prev = 0.
            for r in 0..b.dim() {
                for c in 0..prev.cols() {
                    let row = (0..a.dim())
                        .filter(|&k2| !field.is_zero(prev.get(k2, c)))
                        .map(|k2| (r * a.dim() + k2, prev.get(k2, c).clone()))
                        .collect();
                    rows.push(row);
                }
            }
        }
        let d = if unknowns == 0 {
            Mat::zeros(field, b.dim(), a.dim())
        } else {
            let sol = constraint_mat(field, unknowns, &rows).kernel_basis();
            let v = random_combination(field, &sol, unknowns, rng);
            Mat::from_elems(field, b.dim(), a.dim(), v).unwrap()
        };
        diffs.push(d);
    }
    LambdaComplex { p, field: field.clone(), start, modules, diffs }
}

/// A random Λ-linear chain map `c -> d` over the union of their ranges.
/// Returns the common lowest degree and one matrix per degree.
pub fn random_chain_map<R: Rng + ?Sized>(c: &LambdaComplex, d: &LambdaComplex, rng: &mut R) -> (i64, Vec<Mat>) {
    let f = &c.field;
    let lo = c.degrees().0.min(d.degrees().0);
    let hi = c.degrees().1.max(d.degrees().1);
    let (c, d) = (c.padded(lo, hi), d.padded(lo, hi));
    let sizes: Vec<(usize, usize)> = (lo..=hi).map(|i| (d.module_at(i).dim(), c.module_at(i).dim())).collect();
    let offs: Vec<usize> = sizes
        .iter()
        .scan(0, |acc, (r, cc)| {
            let o = *acc;
            *acc += r * cc;
            Some(o)
        })
        .collect();
    let unknowns: usize = sizes.iter().map(|(r, cc)| r * cc).sum();
    let mut rows = Vec::new();
    for (k, i) in (lo..=hi).enumerate() {
        for row in hom_constraints(&c.module_at(i).theta, &d.module_at(i).theta) {
            rows.push(row.into_iter().map(|(j, v)| (offs[k] + j, v)).collect::<Vec<_>>());
        }
        if i < hi {
            // d_D f^i - f^{i+1} d_C = 0.
            let (dd, dc) = (d.diff_at(i), c.diff_at(i));
            let (rn, cn) = (sizes[k + 1].0, sizes[k].1);
            let inner_f = sizes[k].1;
            let inner_next = sizes[k + 1].1;
            for r in 0..rn {
                for col in 0..cn {
                    let mut row = Vec::new();
                    for m in 0..sizes[k].0 {
                        let v = dd.get(r, m);
                        if !f.is_zero(v) {
                            row.push((offs[k] + m * inner_f + col, v.clone()));
                        }
                    }
                    for m in 0..inner_next {
                        let v = dc.get(m, col);
                        if !f.is_zero(v) {
                            row.push((offs[k + 1] + r * inner_next + m, f.neg(v)));
                        }
                    }
                    rows.push(row);
                }
            }
        }
    }
    let v = if unknowns == 0 {
        Vec::new()
    } else {
        let sol = constraint_mat(f, unknowns, &rows).kernel_basis();
        random_combination(f, &sol, unknowns, rng)
    };
    let maps = sizes
        .iter()
        .enumerate()
        .map(|(k, &(r, cc))| Mat::from_elems(f, r, cc, v[offs[k]..offs[k] + r * cc].to_vec()).unwrap())
        .collect();
    (lo, maps)
}

/// A bounded complex of group modules with integer (prime-field)
/// differentials; `layers[k]` sits in degree `start + k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoundedComplex {
    pub p: u32,
    pub start: i64,
    pub layers: Vec<RepExpr>,
    pub diffs: Vec<Mat>,
}

/// Wire format `{"degrees":[m, m+d], "layers":[..], "differentials":[..]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComplexJson {
    pub degrees: [i64; 2],
    pub layers: Vec<serde_json::Value>,
    pub differentials: Vec<MatJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<u32>,
}

impl BoundedComplex {
    pub fn new(p: u32, start: i64, layers: Vec<RepExpr>, diffs: Vec<Mat>) -> Result<BoundedComplex> {
        let c = BoundedComplex { p, start, layers, diffs };
        c.validate()?;
        Ok(c)
    }

    pub fn from_module(p: u32, m: RepExpr, degree: i64) -> BoundedComplex {
        BoundedComplex { p, start: degree, layers: vec![m], diffs: vec![] }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() || self.diffs.len() + 1 != self.layers.len() {
            return Err(Error::InvalidComplex("need n layers and n-1 differentials".into()));
        }
        for (k, d) in self.diffs.iter().enumerate() {
            if d.field().p() != self.p || d.field().degree() != Some(1) {
                return Err(Error::InvalidComplex("differentials must be over the prime field".into()));
            }
            if d.rows() != self.layers[k + 1].dim() || d.cols() != self.layers[k].dim() {
                return Err(Error::InvalidComplex(format!("d^{} has the wrong shape", self.start + k as i64)));
            }
            if k > 0 && !d.mul(&self.diffs[k - 1]).is_zero() {
                return Err(Error::InvalidComplex(format!("d∘d != 0 at degree {}", self.start + k as i64 - 1)));
            }
        }
        Ok(())
    }

    pub fn degrees(&self) -> (i64, i64) {
        (self.start, self.start + self.layers.len() as i64 - 1)
    }

    fn prime(&self) -> Field {
        Field::prime(self.p).expect("p validated")
    }

    fn layer_at(&self, i: i64) -> RepExpr {
        let k = i - self.start;
        if k < 0 || k >= self.layers.len() as i64 {
            RepExpr::zero()
        } else {
            self.layers[k as usize].clone()
        }
    }

    fn diff_at(&self, i: i64) -> Mat {
        let k = i - self.start;
        if k >= 0 && (k as usize) < self.diffs.len() {
            self.diffs[k as usize].clone()
        } else {
            Mat::zeros(&self.prime(), self.layer_at(i + 1).dim(), self.layer_at(i).dim())
        }
    }

    pub fn shift(&self, n: i64) -> BoundedComplex {
        let diffs = if n % 2 == 0 { self.diffs.clone() } else { self.diffs.iter().map(Mat::neg).collect() };
        BoundedComplex { start: self.start - n, diffs, ..self.clone() }
    }

    pub fn direct_sum(&self, other: &BoundedComplex) -> BoundedComplex {
        let lo = self.degrees().0.min(other.degrees().0);
        let hi = self.degrees().1.max(other.degrees().1);
        let f = self.prime();
        BoundedComplex {
            p: self.p,
            start: lo,
            layers: (lo..=hi).map(|i| RepExpr::sum(self.layer_at(i), other.layer_at(i))).collect(),
            diffs: (lo..hi).map(|i| Mat::block_diag(&f, &[&self.diff_at(i), &other.diff_at(i)])).collect(),
        }
    }

    /// `(C ⊗ D)^n = ⊕_{i+j=n} C^i ⊗ D^j` with `d = d_C ⊗ 1 + (-1)^i 1 ⊗ d_D`.
    pub fn tensor(&self, other: &BoundedComplex) -> BoundedComplex {
        let f = self.prime();
        let (a0, a1) = self.degrees();
        let (b0, b1) = other.degrees();
        let pieces = |n: i64| -> Vec<(i64, i64)> { (a0..=a1).map(|i| (i, n - i)).filter(|&(_, j)| j >= b0 && j <= b1).collect() };
        let layers = (a0 + b0..=a1 + b1)
            .map(|n| RepExpr::Sum(pieces(n).into_iter().map(|(i, j)| RepExpr::tensor(self.layer_at(i), other.layer_at(j))).collect()))
            .collect();
        let diffs = (a0 + b0..a1 + b1)
            .map(|n| {
                let src = pieces(n);
                let dst = pieces(n + 1);
                let dim = |&(i, j): &(i64, i64)| self.layer_at(i).dim() * other.layer_at(j).dim();
                let rows: usize = dst.iter().map(dim).sum();
                let cols: usize = src.iter().map(dim).sum();
                let mut out = Mat::zeros(&f, rows, cols);
                let mut c0 = 0;
                for s in &src {
                    let (i, j) = *s;
                    let mut r0 = 0;
                    for t in &dst {
                        let block = if *t == (i + 1, j) {
                            Some(self.diff_at(i).kron(&Mat::identity(&f, other.layer_at(j).dim())))
                        } else if *t == (i, j + 1) {
                            let b = Mat::identity(&f, self.layer_at(i).dim()).kron(&other.diff_at(j));
                            Some(if i.rem_euclid(2) == 1 { b.neg() } else { b })
                        } else {
                            None
                        };
                        if let Some(b) = block {
                            for x in 0..b.rows() {
                                for y in 0..b.cols() {
                                    out.set(r0 + x, c0 + y, b.get(x, y).clone());
                                }
                            }
                        }
                        r0 += dim(t);
                    }
                    c0 += dim(s);
                }
                out
            })
            .collect();
        BoundedComplex { p: self.p, start: a0 + b0, layers, diffs }
    }

    pub fn to_json(&self) -> ComplexJson {
        let (lo, hi) = self.degrees();
        ComplexJson {
            degrees: [lo, hi],
            layers: self.layers.iter().map(|l| serde_json::to_value(l.to_json()).unwrap()).collect(),
            differentials: self.diffs.iter().map(Mat::to_json).collect(),
            p: Some(self.p),
        }
    }

    pub fn from_json(j: &ComplexJson, default_p: u32) -> Result<BoundedComplex> {
        let p = j.p.unwrap_or(default_p);
        let field = Field::prime(p)?;
        if j.degrees[1] - j.degrees[0] + 1 != j.layers.len() as i64 {
            return Err(Error::InvalidComplex(format!(
                "degrees {:?} do not match {} layers",
                j.degrees,
                j.layers.len()
            )));
        }
        let layers = j.layers.iter().map(RepExpr::from_value).collect::<Result<Vec<_>>>()?;
        let diffs = j.differentials.iter().map(|m| Mat::from_json(m, &field)).collect::<Result<Vec<_>>>()?;
        BoundedComplex::new(p, j.degrees[0], layers, diffs)
    }
}

/// Restriction along the π-point of `t`: each layer gets its ur-operator,
/// differentials are unchanged.  Fails if an operator does not commute
/// with the differentials.
pub fn restrict_along_pi(c: &BoundedComplex, t: &NilTuple) -> Result<LambdaComplex> {
    c.validate()?;
    let f = t.field();
    let modules = c
        .layers
        .iter()
        .map(|l| KtModule::new(t.p(), pi_operator_ur(l, t)?.theta))
        .collect::<Result<Vec<_>>>()?;
    let diffs = c.diffs.iter().map(|d| d.embed(f)).collect::<Result<Vec<_>>>()?;
    LambdaComplex::new(f, t.p(), c.start, modules, diffs)
        .map_err(|e| Error::InvalidComplex(format!("restriction failed ({e}); differentials must intertwine the action")))
}

pub fn complex_in_support(c: &BoundedComplex, t: &NilTuple) -> Result<bool> {
    tate_nonzero(&restrict_along_pi(c, t)?)
}

/// Both deciders; an `Err` reports a disagreement.
pub fn complex_in_support_checked(c: &BoundedComplex, t: &NilTuple) -> Result<bool> {
    let lc = restrict_along_pi(c, t)?;
    let tate = tate_nonzero(&lc)?;
    let collapse = !phi_collapse(&lc)?.is_zero();
    if tate != collapse {
        return Err(Error::InvalidComplex(format!("deciders disagree: tate {tate}, collapse {collapse}")));
    }
    Ok(tate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn f3() -> Field {
        Field::prime(3).unwrap()
    }

    #[test]
    fn omega_inverse_examples() {
        let f = f3();
        let k = KtModule::trivial(&f, 3);
        assert_eq!(omega_inverse(&k).jordan_type().to_string(), "[2]^1");
        assert_eq!(omega_inverse(&KtModule::free(&f, 3, 2)).dim(), 0);
        for p in [2u32, 3, 5] {
            let fp = Field::prime(p).unwrap();
            for j in 1..p as usize {
                let m = KtModule::block(&fp, p, j);
                let jt = omega_inverse(&m).jordan_type();
                assert_eq!(jt.m(p as usize - j), 1);
                assert_eq!(jt.dim(), p as usize - j);
                assert_eq!(omega(&m).jordan_type(), jt);
            }
        }
    }

    #[test]
    fn strip_free_mixed() {
        let f = Field::prime(5).unwrap();
        let m = KtModule::from_blocks(&f, 5, &[5, 2, 5, 1]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_kt_module(&f, 5, 0, &mut rng).direct_sum(&m);
        let s = strip_free(&m);
        assert_eq!(s.jordan_type().to_string(), "[2]^1 + [1]^1");
    }

    #[test]
    fn collapse_examples() {
        let f = f3();
        let lam = KtModule::free(&f, 3, 1);
        let mult_t = lam.theta().clone();
        let c = LambdaComplex::new(&f, 3, 0, vec![lam.clone(), lam.clone()], vec![mult_t]).unwrap();
        assert!(phi_collapse(&c).unwrap().is_zero());
        assert!(!tate_nonzero(&c).unwrap());
        let k1 = LambdaComplex::from_module(&KtModule::trivial(&f, 3), -1);
        let s = phi_collapse(&k1).unwrap();
        assert_eq!(s.module.dim(), 2);
        assert!(tate_nonzero(&k1).unwrap());
        let k0 = LambdaComplex::from_module(&KtModule::block(&f, 3, 2).direct_sum(&lam), 0);
        assert_eq!(phi_collapse(&k0).unwrap().jordan_type().to_string(), "[2]^1");
        assert!(!tate_nonzero(&LambdaComplex::from_module(&lam, 0)).unwrap());
    }

    #[test]
    fn tate_squares_to_zero() {
        let f = f3();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let c = random_lambda_complex(&f, 3, 4, 3, &mut rng);
            c.validate().unwrap();
            for n in -1..2 {
                assert!(tate_differential(&c, n + 1).mul(&tate_differential(&c, n)).is_zero());
            }
        }
    }

    #[test]
    fn deciders_agree_on_random_complexes() {
        for p in [2u32, 3, 5] {
            let f = Field::prime(p).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(p as u64);
            for _ in 0..30 {
                let c = random_lambda_complex(&f, p, 4, 3, &mut rng);
                assert_eq!(tate_nonzero(&c).unwrap(), !phi_collapse(&c).unwrap().is_zero(), "{c:?}");
            }
        }
    }

    #[test]
    fn cone_of_identity_is_perfect() {
        let f = f3();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let c = random_lambda_complex(&f, 3, 3, 3, &mut rng);
            let (lo, _) = c.degrees();
            let cone = c.cone(&c, lo, &c.identity_map()).unwrap();
            assert!(!tate_nonzero(&cone).unwrap());
            assert!(phi_collapse(&cone).unwrap().is_zero());
        }
    }
}
