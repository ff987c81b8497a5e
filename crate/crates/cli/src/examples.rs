//! Named worked examples, each an exact assertion over sampled points.

use pisupport::geometry::Tag;
use pisupport::rep::u3_forced_free_dim;
use pisupport::{
    build_ls_truncation, build_u3_induced, in_support, jordan_type_at, pi_operator_ur, Elem, Mat, NilTuple, Recipe,
    RepExpr, SamplingPlan,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::RunConfig;
use crate::report::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum ExampleName {
    /// `L_S` over `k[T]/T^{p^3}`: supported exactly where `b_i = 0`, `i ∈ S`.
    #[value(name = "ga-ls", alias = "ga-LS")]
    GaLs,
    /// The Steinberg module of `SL_2`: projective at every nonzero point.
    #[value(name = "sl2-steinberg")]
    Sl2Steinberg,
    /// Truncated induced Heisenberg module: zero operator through the
    /// centre, a forced free part everywhere else.
    #[value(name = "u3")]
    U3,
    All,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExampleResult {
    pub example: String,
    pub p: u32,
    pub r: usize,
    pub parameters: String,
    pub checked: usize,
    pub failures: usize,
    /// The first few failing points, if any.
    pub witnesses: Vec<String>,
    pub pass: bool,
}

const WITNESS_LIMIT: usize = 5;

struct Tally {
    checked: usize,
    failures: usize,
    witnesses: Vec<String>,
}

impl Tally {
    fn new() -> Tally {
        Tally { checked: 0, failures: 0, witnesses: Vec::new() }
    }

    fn check(&mut self, ok: bool, witness: impl FnOnce() -> String) {
        self.checked += 1;
        if !ok {
            self.failures += 1;
            if self.witnesses.len() < WITNESS_LIMIT {
                self.witnesses.push(witness());
            }
        }
    }

    fn finish(self, example: &str, p: u32, r: usize, parameters: String) -> ExampleResult {
        ExampleResult {
            example: example.into(),
            p,
            r,
            parameters,
            checked: self.checked,
            pass: self.failures == 0 && self.checked > 0,
            failures: self.failures,
            witnesses: self.witnesses,
        }
    }
}

fn tuple_text(t: &NilTuple) -> String {
    serde_json::to_string(&t.to_json()).unwrap_or_default()
}

/// `degree` defaults to `p^3 - 1`.  The inclusive truncation at `p^3` keeps
/// a lone top monomial that every `u_i` kills, so that example fails.
pub fn ga_ls(cfg: &RunConfig, set: &[usize], degree: Option<usize>) -> Result<ExampleResult, CliError> {
    let p = cfg.p;
    let degree = degree.unwrap_or((p as usize).pow(3) - 1);
    let r = set.iter().map(|i| i + 1).max().unwrap_or(1).max(3);
    let rep = RepExpr::umodule(build_ls_truncation(p, set, degree)?);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut tally = Tally::new();
    for i in 0..cfg.samples {
        let f = &cfg.tower[i % cfg.tower.len()];
        let b: Vec<Elem> =
            (0..r).map(|_| if rng.gen_bool(0.4) { f.zero() } else { f.random_nonzero(&mut rng) }).collect();
        let t = NilTuple::ga(f, &b);
        let got = in_support(&rep, &t)?;
        let want = set.iter().all(|&k| f.is_zero(&b[k]));
        tally.check(got == want, || format!("in_support={got}, expected {want} at {}", tuple_text(&t)));
    }
    Ok(tally.finish("ga-ls", p, r, format!("S={set:?}, truncation degree {degree}")))
}

/// `St_r = St ⊗ St^(1) ⊗ ... ⊗ St^(r-1)` with `St = Sym^{p-1}(k^2)`.
pub fn steinberg(p: u32, r: usize) -> RepExpr {
    let st = RepExpr::sym(p as usize - 1, RepExpr::std(2));
    (1..r).fold(st.clone(), |acc, i| RepExpr::tensor(acc, RepExpr::twist(i as u32, st.clone())))
}

pub fn sl2_steinberg(cfg: &RunConfig, r: usize) -> Result<ExampleResult, CliError> {
    let p = cfg.p;
    let rep = steinberg(p, r);
    let plan = SamplingPlan::new(p, 2, r, Some(Tag::Sl), cfg.samples, cfg.seed)?.with_tower(cfg.tower.clone());
    let mut tally = Tally::new();
    for t in plan.sample()? {
        let v = jordan_type_at(&rep, &t, Recipe::Ur)?;
        tally.check(v.stable == t.is_zero(), || format!("Jordan type {} at {}", v.jordan_type, tuple_text(&t)));
    }
    Ok(tally.finish("sl2-steinberg", p, r, format!("St_{r}, dim {}", rep.dim())))
}

pub fn u3(cfg: &RunConfig, r: usize, degree: Option<usize>) -> Result<ExampleResult, CliError> {
    let p = cfg.p;
    let d = degree.unwrap_or((p as usize).pow(2));
    let rep = build_u3_induced(d);
    let forced = u3_forced_free_dim(p, r, d);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut tally = Tally::new();
    // Tuples through the centre: multiples of e_{02}.
    for i in 0..cfg.samples.div_ceil(4) {
        let f = &cfg.tower[i % cfg.tower.len()];
        let mats = (0..r)
            .map(|_| {
                let mut m = Mat::zeros(f, 3, 3);
                m.set(0, 2, f.random(&mut rng));
                m
            })
            .collect();
        let t = NilTuple::new(f, 3, Some(Tag::U3), mats)?;
        let zero = pi_operator_ur(&rep, &t)?.theta.is_zero();
        tally.check(zero, || format!("nonzero operator at central tuple {}", tuple_text(&t)));
    }
    let plan = SamplingPlan::new(p, 3, r, Some(Tag::U3), cfg.samples, cfg.seed)?.with_tower(cfg.tower.clone());
    for t in plan.sample()? {
        let central = t.mats().iter().all(|m| t.field().is_zero(m.get(0, 1)) && t.field().is_zero(m.get(1, 2)));
        if central {
            continue;
        }
        let free = jordan_type_at(&rep, &t, Recipe::Ur)?.jordan.free_dim();
        tally.check(free >= forced, || format!("free part {free} below {forced} at {}", tuple_text(&t)));
    }
    Ok(tally.finish("u3", p, r, format!("degree {d}, dim {}, forced free dim {forced}", rep.dim())))
}
