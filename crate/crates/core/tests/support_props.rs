mod common;

use pisupport::support::{in_support_by_rank, parse_tower};
use pisupport::{fingerprint, jordan_type_at, load_corpus, pi_operator, NilTuple, Recipe, RepExpr, SamplingPlan};
use proptest::prelude::*;

fn corpus() -> Vec<(String, RepExpr)> {
    load_corpus(&common::corpus_dir()).unwrap()
}

/// Corpus entry `which` with a characteristic it is defined in.
fn pick(which: usize, p_choice: usize) -> (String, RepExpr, u32) {
    let all = corpus();
    let (name, rep) = all[which % all.len()].clone();
    let p = rep.characteristic().unwrap_or([2, 3, 5][p_choice % 3]);
    (name, rep, p)
}

fn small_plan(rep: &RepExpr, p: u32, r: usize, count: usize, seed: u64) -> SamplingPlan {
    let tower = parse_tower(p, &["prime".into(), "ext2".into()]).unwrap();
    SamplingPlan::for_module(rep, p, r, count, seed).unwrap().with_tower(tower)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn verdicts_are_orbit_invariant_and_recipes_agree(
        seed in any::<u64>(), which in 0usize..64, pc in 0usize..3, r in 1usize..3,
    ) {
        let (name, rep, p) = pick(which, pc);
        let fp = fingerprint(&rep, &small_plan(&rep, p, r, 6, seed)).unwrap();
        prop_assert_eq!(fp.summary.orbit_violations, 0, "{}", name);
        prop_assert_eq!(fp.summary.recipe_disagreements, 0, "{}", name);
        prop_assert_eq!(fp.summary.zero_tuples + fp.summary.nonzero_tuples, fp.summary.samples);
        prop_assert!(fp.summary.in_support <= fp.summary.nonzero_tuples);
    }

    #[test]
    fn rank_criterion_matches_jordan_type(seed in any::<u64>(), which in 0usize..64, pc in 0usize..3) {
        let (_, rep, p) = pick(which, pc);
        for t in small_plan(&rep, p, 2, 4, seed).sample().unwrap() {
            let theta = pi_operator(&rep, &t, Recipe::Ur).unwrap().theta;
            let verdict = jordan_type_at(&rep, &t, Recipe::Ur).unwrap();
            prop_assert_eq!(in_support_by_rank(&theta, p), verdict.stable);
            prop_assert_eq!(verdict.jordan.dim(), rep.dim());
        }
    }

    #[test]
    fn zero_tuple_gives_zero_operator(which in 0usize..64, pc in 0usize..3, r in 1usize..4) {
        let (_, rep, p) = pick(which, pc);
        let plan = small_plan(&rep, p, r, 1, 0);
        let t = NilTuple::zero(&plan.tower[0], plan.n, r, plan.tag.clone());
        let v = jordan_type_at(&rep, &t, Recipe::Ur).unwrap();
        prop_assert!(v.zero_tuple);
        prop_assert_eq!(v.jordan.m(1), rep.dim());
    }
}

#[test]
fn fingerprints_are_deterministic() {
    for (name, rep) in corpus().into_iter().take(6) {
        let p = rep.characteristic().unwrap_or(3);
        let plan = SamplingPlan::for_module(&rep, p, 2, 8, 11).unwrap();
        let a = serde_json::to_string(&fingerprint(&rep, &plan).unwrap()).unwrap();
        let b = serde_json::to_string(&fingerprint(&rep, &plan).unwrap()).unwrap();
        assert_eq!(a, b, "{name}");
    }
}
