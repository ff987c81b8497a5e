//! Support membership, sampling-based fingerprints and the axiom harness.
//!
//! Supports are handled operationally: a tuple is in the support of `M`
//! when the π-operator on `M` has a Jordan block of size `< p`.  A
//! fingerprint records verdicts over a deterministic sample of tuples drawn
//! across a field tower; the zero tuple is counted separately and never
//! enters the reported fraction.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Field, FieldKind};
use crate::geometry::{
    generic_line_point, jordan_partition, random_group_element, rank_sequence, sample_c_r_with, JordanType,
    NilTuple, NilTupleJson, Tag,
};
use crate::linalg::Mat;
use crate::rep::{pi_operator, trunc_exp_poly, Recipe, RepExpr, UModule};

/// Verdict for one (module, tuple, recipe).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportVerdict {
    pub jordan: JordanType,
    pub jordan_type: String,
    /// True iff some block has size `< p`.
    pub stable: bool,
    pub recipe: Recipe,
    pub field: String,
    pub r: usize,
    pub zero_tuple: bool,
}

pub fn jordan_type_at(rep: &RepExpr, t: &NilTuple, recipe: Recipe) -> Result<SupportVerdict> {
    let op = pi_operator(rep, t, recipe)?;
    let jordan = jordan_partition(&op.theta, t.p())?;
    Ok(SupportVerdict {
        jordan_type: jordan.to_string(),
        stable: jordan.is_stable_nonzero(),
        jordan,
        recipe,
        field: t.field().name(),
        r: t.r(),
        zero_tuple: t.is_zero(),
    })
}

pub fn in_support(rep: &RepExpr, t: &NilTuple) -> Result<bool> {
    Ok(jordan_type_at(rep, t, Recipe::Ur)?.stable)
}

/// Rank criterion: `θ` is free iff `p * rank(θ^{p-1}) = dim`.
pub fn in_support_by_rank(theta: &Mat, p: u32) -> bool {
    let ranks = rank_sequence(theta, p as usize - 1);
    (p as usize) * ranks[p as usize - 1] < theta.rows()
}

/// Default field tower: `F_p, F_{p^2}, F_{p^3}` and the generic line over `F_p(s)`.
pub fn default_tower(p: u32) -> Result<Vec<Field>> {
    Ok(vec![Field::prime(p)?, Field::extension(p, 2)?, Field::extension(p, 3)?, Field::ratfun(p)?])
}

/// Parses tower entries `prime`, `ext<d>` and `ratfun`.
pub fn parse_tower(p: u32, names: &[String]) -> Result<Vec<Field>> {
    names
        .iter()
        .map(|n| match n.trim() {
            "prime" => Field::prime(p),
            "ratfun" => Field::ratfun(p),
            s => s
                .strip_prefix("ext")
                .and_then(|d| d.parse::<u32>().ok())
                .ok_or_else(|| Error::Parse(format!("unknown tower entry {s:?}")))
                .and_then(|d| if d == 1 { Field::prime(p) } else { Field::extension(p, d) }),
        })
        .collect()
}

fn tower_name(f: &Field) -> String {
    match f.kind() {
        FieldKind::Prime => "prime".into(),
        FieldKind::Extension(d) => format!("ext{d}"),
        FieldKind::RatFun => "ratfun".into(),
    }
}

/// How tuples are drawn.  Sample `i` uses field `tower[i % len]`; the
/// rational-function entry moves an `F_p` sample onto a generic line.
#[derive(Clone, Debug)]
pub struct SamplingPlan {
    pub p: u32,
    pub tower: Vec<Field>,
    pub n: usize,
    pub r: usize,
    pub tag: Option<Tag>,
    pub count: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanJson {
    pub p: u32,
    #[serde(rename = "N")]
    pub n: usize,
    pub r: usize,
    pub tag: String,
    pub tower: Vec<String>,
    pub count: usize,
    pub seed: u64,
}

impl SamplingPlan {
    pub fn new(p: u32, n: usize, r: usize, tag: Option<Tag>, count: usize, seed: u64) -> Result<SamplingPlan> {
        Ok(SamplingPlan { p, tower: default_tower(p)?, n, r, tag, count, seed })
    }

    /// Plan whose tuples the module accepts: `G_a` points for explicit
    /// `kG_{a(r)}`-modules, Heisenberg tuples for the induced module, and
    /// `gl_N` tuples otherwise.
    pub fn for_module(rep: &RepExpr, p: u32, r: usize, count: usize, seed: u64) -> Result<SamplingPlan> {
        let tag = rep.required_tag();
        let n = match tag {
            Some(Tag::Ga(s)) => 2 * s,
            Some(Tag::U3) => 3,
            _ => rep.group_size()?.unwrap_or(2),
        };
        SamplingPlan::new(p, n, r, tag.or(Some(Tag::Gl)), count, seed)
    }

    pub fn with_tower(mut self, tower: Vec<Field>) -> SamplingPlan {
        self.tower = tower;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.tower.is_empty() {
            return Err(Error::Parse("empty field tower".into()));
        }
        if let Some(f) = self.tower.iter().find(|f| f.p() != self.p) {
            return Err(Error::Field(format!("{} in a tower of characteristic {}", f.name(), self.p)));
        }
        if self.r == 0 {
            return Err(Error::InvalidTuple("r must be at least 1".into()));
        }
        Ok(())
    }

    pub fn sample(&self) -> Result<Vec<NilTuple>> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let prime = Field::prime(self.p)?;
        (0..self.count)
            .map(|i| {
                let f = &self.tower[i % self.tower.len()];
                if f.is_finite() {
                    sample_c_r_with(f, self.n, self.r, self.tag.clone(), &mut rng)
                } else {
                    let base = sample_c_r_with(&prime, self.n, self.r, self.tag.clone(), &mut rng)?;
                    generic_line_point(&base, &mut rng)
                }
            })
            .collect()
    }

    pub fn to_json(&self) -> PlanJson {
        PlanJson {
            p: self.p,
            n: self.n,
            r: self.r,
            tag: self.tag.as_ref().map_or("gl".into(), Tag::name),
            tower: self.tower.iter().map(tower_name).collect(),
            count: self.count,
            seed: self.seed,
        }
    }
}

/// Independent per-sample randomness, so results do not depend on the order
/// in which parallel workers finish.
fn sample_rng(seed: u64, index: usize, salt: u64) -> ChaCha8Rng {
    let mix = seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ salt.rotate_left(32);
    ChaCha8Rng::seed_from_u64(mix)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FingerprintEntry {
    pub index: usize,
    pub tuple: NilTupleJson,
    pub verdict: SupportVerdict,
    pub sum_jordan_type: String,
    pub sum_stable: bool,
    pub scaled_stable: bool,
    pub conjugated_stable: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FingerprintSummary {
    pub samples: usize,
    pub zero_tuples: usize,
    pub nonzero_tuples: usize,
    pub in_support: usize,
    /// `in_support / nonzero_tuples`, absent if every sample was zero.
    pub fraction: Option<f64>,
    pub recipe_disagreements: usize,
    pub orbit_violations: usize,
    /// Samples where the two recipes give different Jordan types (verdicts
    /// may still agree).
    pub jordan_discrepancies: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SupportFingerprint {
    pub plan: PlanJson,
    pub entries: Vec<FingerprintEntry>,
    pub summary: FingerprintSummary,
}

impl SupportFingerprint {
    /// In-support flags, one per sample.
    pub fn verdicts(&self) -> Vec<bool> {
        self.entries.iter().map(|e| e.verdict.stable).collect()
    }
}

pub fn fingerprint(rep: &RepExpr, plan: &SamplingPlan) -> Result<SupportFingerprint> {
    let tuples = plan.sample()?;
    let entries = tuples
        .par_iter()
        .enumerate()
        .map(|(i, t)| {
            let mut rng = sample_rng(plan.seed, i, 1);
            let verdict = jordan_type_at(rep, t, Recipe::Ur)?;
            let sum = jordan_type_at(rep, t, Recipe::Sum)?;
            let a = t.field().random_nonzero(&mut rng);
            let scaled_stable = in_support(rep, &t.act_star(&a))?;
            let g = random_group_element(t.field(), t.n(), t.tag(), &mut rng);
            let conjugated_stable = in_support(rep, &t.conjugate(&g)?)?;
            Ok(FingerprintEntry {
                index: i,
                tuple: t.to_json(),
                sum_jordan_type: sum.jordan_type,
                sum_stable: sum.stable,
                verdict,
                scaled_stable,
                conjugated_stable,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut s = FingerprintSummary { samples: entries.len(), ..Default::default() };
    for e in &entries {
        if e.verdict.zero_tuple {
            s.zero_tuples += 1;
        } else {
            s.nonzero_tuples += 1;
            s.in_support += e.verdict.stable as usize;
        }
        s.recipe_disagreements += (e.sum_stable != e.verdict.stable) as usize;
        s.orbit_violations += (e.scaled_stable != e.verdict.stable) as usize;
        s.orbit_violations += (e.conjugated_stable != e.verdict.stable) as usize;
        s.jordan_discrepancies += (e.sum_jordan_type != e.verdict.jordan_type) as usize;
    }
    if s.nonzero_tuples > 0 {
        s.fraction = Some(s.in_support as f64 / s.nonzero_tuples as f64);
    }
    Ok(SupportFingerprint { plan: plan.to_json(), entries, summary: s })
}

/// Largest tensor product the axiom suite forms.
pub const TENSOR_DIM_CAP: usize = 64;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckCount {
    pub checked: usize,
    pub violations: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Counterexample {
    pub check: String,
    pub modules: Vec<String>,
    pub tuple: NilTupleJson,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AxiomReport {
    pub p: u32,
    pub r: usize,
    pub seed: u64,
    pub samples_per_family: usize,
    pub modules: Vec<String>,
    pub skipped: Vec<String>,
    pub checks: BTreeMap<String, CheckCount>,
    pub counterexamples: Vec<Counterexample>,
}

impl AxiomReport {
    pub fn total_violations(&self) -> usize {
        self.checks.values().map(|c| c.violations).sum()
    }
}

/// A short exact sequence `0 -> A -> B -> C -> 0`.
#[derive(Clone, Debug)]
pub struct Extension {
    pub name: String,
    pub sub: RepExpr,
    pub middle: RepExpr,
    pub quotient: RepExpr,
}

/// Extensions read off a module: a `sub` node yields
/// `sub ⊂ parent ->> parent/sub`, and an explicit `kG_{a(r)}`-module yields
/// its radical sequence.
pub fn extensions_of(name: &str, rep: &RepExpr) -> Result<Vec<Extension>> {
    let mut out = Vec::new();
    match rep {
        RepExpr::Sub(basis, parent) => out.push(Extension {
            name: format!("{name}: sub ⊂ parent"),
            sub: rep.clone(),
            middle: (**parent).clone(),
            quotient: RepExpr::Quotient(basis.clone(), parent.clone()),
        }),
        RepExpr::UMod(m) => {
            let rad = m.radical();
            if rad.cols() > 0 && rad.cols() < m.dim() {
                out.push(Extension {
                    name: format!("{name}: radical sequence"),
                    sub: RepExpr::umodule(m.submodule(&rad)?),
                    middle: rep.clone(),
                    quotient: RepExpr::umodule(m.quotient(&rad)?),
                });
            }
        }
        _ => {}
    }
    Ok(out)
}

/// The same module in a random basis: explicit modules are conjugated
/// directly, everything else goes through a full-rank `sub` node.
fn basis_changed(rep: &RepExpr, p: u32, seed: u64) -> Result<RepExpr> {
    let field = Field::prime(p)?;
    let dim = rep.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let change = loop {
        let cand = crate::geometry::random_group_element(&field, dim, Some(&Tag::Gl), &mut rng);
        if cand.rank() == dim {
            break cand;
        }
    };
    match rep {
        RepExpr::UMod(m) if m.p() == p => Ok(RepExpr::umodule(m.change_basis(&change)?)),
        _ => {
            let cols: Vec<Vec<i64>> = change
                .columns()
                .iter()
                .map(|c| c.iter().map(|x| field.to_json(x).as_i64().unwrap_or(0)).collect())
                .collect();
            Ok(RepExpr::sub(cols, rep.clone()))
        }
    }
}

/// Tuple families used by the suite; every module belongs to exactly one,
/// except modules with no group constraint, which join all of them.
fn family_of(rep: &RepExpr) -> Result<Option<(usize, Tag)>> {
    Ok(match rep.required_tag() {
        Some(Tag::Ga(s)) => Some((2 * s, Tag::Ga(s))),
        Some(Tag::U3) => Some((3, Tag::U3)),
        Some(t) => Some((rep.group_size()?.unwrap_or(2), t)),
        None => rep.group_size()?.map(|n| (n, Tag::Gl)),
    })
}

/// Pointwise checks of the support axioms over a corpus.  Modules whose
/// characteristic differs from `p` are listed under `skipped`.
pub fn axiom_suite(
    corpus: &[(String, RepExpr)],
    p: u32,
    r: usize,
    count: usize,
    seed: u64,
    tower: Option<Vec<Field>>,
) -> Result<AxiomReport> {
    if corpus.is_empty() {
        return Err(Error::InvalidModule("empty corpus".into()));
    }
    let mut skipped = Vec::new();
    let mut modules: Vec<(String, RepExpr)> = Vec::new();
    for (name, rep) in corpus {
        if rep.characteristic().is_none_or(|q| q == p) {
            modules.push((name.clone(), rep.clone()));
        } else {
            skipped.push(name.clone());
        }
    }
    let mut families: BTreeMap<String, ((usize, Tag), Vec<usize>)> = BTreeMap::new();
    let mut free_floating = Vec::new();
    for (i, (_, rep)) in modules.iter().enumerate() {
        match family_of(rep)? {
            Some((n, tag)) => {
                families.entry(format!("{}:{}", tag.name(), n)).or_insert(((n, tag), Vec::new())).1.push(i)
            }
            None => free_floating.push(i),
        }
    }
    if families.is_empty() {
        families.insert("gl:2".into(), ((2, Tag::Gl), Vec::new()));
    }
    for (_, members) in families.values_mut() {
        members.extend(free_floating.iter().copied());
        members.sort_unstable();
    }

    let mut checks: BTreeMap<String, CheckCount> = BTreeMap::new();
    let mut counterexamples = Vec::new();
    for (fam_idx, (_, ((n, tag), members))) in families.iter().enumerate() {
        let mut plan = SamplingPlan::new(p, *n, r, Some(tag.clone()), count, seed.wrapping_add(fam_idx as u64))?;
        if let Some(t) = &tower {
            plan = plan.with_tower(t.clone());
        }
        let tuples = plan.sample()?;
        let reps: Vec<&(String, RepExpr)> = members.iter().map(|&i| &modules[i]).collect();
        let isos = reps
            .iter()
            .enumerate()
            .map(|(k, (_, rep))| basis_changed(rep, p, seed ^ (k as u64 + 17)))
            .collect::<Result<Vec<_>>>()?;
        let mut exts = Vec::new();
        for (name, rep) in &reps {
            exts.extend(extensions_of(name, rep)?);
        }
        let mut tensor_pairs = Vec::new();
        let mut sum_pairs = Vec::new();
        for a in 0..reps.len() {
            for b in a..reps.len() {
                if reps[a].1.dim() * reps[b].1.dim() <= TENSOR_DIM_CAP {
                    tensor_pairs.push((a, b, RepExpr::tensor(reps[a].1.clone(), reps[b].1.clone())));
                }
                if b > a {
                    sum_pairs.push((a, b, RepExpr::sum(reps[a].1.clone(), reps[b].1.clone())));
                }
            }
        }
        let results = tuples
            .par_iter()
            .enumerate()
            .map(|(i, t)| {
                let mut local: Vec<(&'static str, Option<Counterexample>)> = Vec::new();
                let mut rng = sample_rng(seed, i, 2 + fam_idx as u64);
                let v = reps.iter().map(|(_, rep)| in_support(rep, t)).collect::<Result<Vec<_>>>()?;
                let fail = |check: &str, names: Vec<String>, detail: String| Counterexample {
                    check: check.into(),
                    modules: names,
                    tuple: t.to_json(),
                    detail,
                };
                for (k, iso) in isos.iter().enumerate() {
                    let w = in_support(iso, t)?;
                    local.push((
                        "basis_change",
                        (w != v[k]).then(|| fail("basis_change", vec![reps[k].0.clone()], format!("{} vs {w}", v[k]))),
                    ));
                }
                let a = t.field().random_nonzero(&mut rng);
                let scaled = t.act_star(&a);
                let g = random_group_element(t.field(), t.n(), t.tag(), &mut rng);
                let conj = t.conjugate(&g)?;
                for (k, (name, rep)) in reps.iter().enumerate() {
                    let ws = in_support(rep, &scaled)?;
                    local.push((
                        "scaling",
                        (ws != v[k]).then(|| fail("scaling", vec![name.clone()], format!("{} vs {ws}", v[k]))),
                    ));
                    let wc = in_support(rep, &conj)?;
                    local.push((
                        "conjugation",
                        (wc != v[k]).then(|| fail("conjugation", vec![name.clone()], format!("{} vs {wc}", v[k]))),
                    ));
                }
                for (a, b, rep) in &tensor_pairs {
                    let w = in_support(rep, t)?;
                    let want = v[*a] && v[*b];
                    local.push((
                        "tensor",
                        (w != want).then(|| {
                            fail("tensor", vec![reps[*a].0.clone(), reps[*b].0.clone()], format!("{w}, expected {want}"))
                        }),
                    ));
                }
                for (a, b, rep) in &sum_pairs {
                    let w = in_support(rep, t)?;
                    let want = v[*a] || v[*b];
                    local.push((
                        "direct_sum",
                        (w != want).then(|| {
                            fail("direct_sum", vec![reps[*a].0.clone(), reps[*b].0.clone()], format!("{w}, expected {want}"))
                        }),
                    ));
                }
                for e in &exts {
                    let (va, vb, vc) = (in_support(&e.sub, t)?, in_support(&e.middle, t)?, in_support(&e.quotient, t)?);
                    let ok = (!va || vb || vc) && (!vb || va || vc) && (!vc || va || vb);
                    local.push((
                        "two_out_of_three",
                        (!ok).then(|| fail("two_out_of_three", vec![e.name.clone()], format!("sub {va}, middle {vb}, quotient {vc}"))),
                    ));
                }
                Ok(local)
            })
            .collect::<Result<Vec<_>>>()?;
        for local in results {
            for (check, ce) in local {
                let c = checks.entry(check.to_string()).or_default();
                c.checked += 1;
                if let Some(ce) = ce {
                    c.violations += 1;
                    counterexamples.push(ce);
                }
            }
        }
    }
    Ok(AxiomReport {
        p,
        r,
        seed,
        samples_per_family: count,
        modules: modules.into_iter().map(|(n, _)| n).collect(),
        skipped,
        checks,
        counterexamples,
    })
}

/// Whether `M` is free over `kG_{a(r)}`, by the minimal-cover test:
/// with `b = dim M/rad M`, free iff `dim M = b p^r` and the cover is injective.
pub fn is_free_umodule(m: &UModule) -> bool {
    let q = (m.p() as usize).pow(m.r() as u32);
    let b = m.dim() - m.radical().cols();
    m.dim() == b * q && m.cover_map().kernel_mat().cols() == 0
}

/// Freeness of each restriction `family(r)` for `r = 1..=r_max`.
pub fn mock_injective_up_to(family: &dyn Fn(usize) -> Result<UModule>, r_max: usize) -> Result<Vec<bool>> {
    (1..=r_max).map(|r| family(r).map(|m| m.dim() > 0 && is_free_umodule(&m))).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpDegree {
    /// Every `u_t` with `t >= s` acts trivially on the samples.
    Bounded(usize),
    /// `u_{s_max}` acts nontrivially on some sample.
    Exceeds(usize),
}

/// Observed exponential degree: the smallest `s` such that the coefficient
/// of `T^{p^t}` in `rep(exp(T B))` vanishes for all samples and `t >= s`,
/// looking at `t <= s_max`.
pub fn exp_degree_bound(rep: &RepExpr, samples: &[Mat], s_max: usize) -> Result<ExpDegree> {
    let mut bound = 0;
    for b in samples {
        let p = b.field().p() as usize;
        let g = trunc_exp_poly(b, p as u32, 1, p.pow(s_max as u32) + 1)?;
        let m = rep.eval(&g)?;
        for t in 0..=s_max {
            if !m.coeff(p.pow(t as u32))?.is_zero() {
                if t == s_max {
                    return Ok(ExpDegree::Exceeds(s_max));
                }
                bound = bound.max(t + 1);
            }
        }
    }
    Ok(ExpDegree::Bounded(bound))
}

/// Random p-nilpotent elements of the tagged subalgebra.
pub fn sample_nilpotents(field: &Field, n: usize, tag: Option<Tag>, count: usize, seed: u64) -> Result<Vec<Mat>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| sample_c_r_with(field, n, 1, tag.clone(), &mut rng).map(|t| t.mats()[0].clone()))
        .collect()
}
