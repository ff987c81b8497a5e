mod common;

use pisupport::complexes::{random_chain_map, random_lambda_complex};
use pisupport::{load_corpus, phi_collapse, tate_nonzero, BoundedComplex, ComplexJson, Field, JordanType, LambdaComplex};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn setup(seed: u64) -> (Field, u32, ChaCha8Rng) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = [2u32, 3, 5][rng.gen_range(0..3)];
    let f = if rng.gen_bool(0.5) { Field::prime(p).unwrap() } else { Field::extension(p, 2).unwrap() };
    (f, p, rng)
}

fn stable(c: &LambdaComplex) -> JordanType {
    phi_collapse(c).unwrap().jordan_type()
}

fn is_zero(c: &LambdaComplex) -> bool {
    phi_collapse(c).unwrap().is_zero()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn collapse_agrees_with_tate_oracle(seed in any::<u64>()) {
        let (f, p, mut rng) = setup(seed);
        let c = random_lambda_complex(&f, p, 3, 3, &mut rng);
        prop_assert_eq!(tate_nonzero(&c).unwrap(), !is_zero(&c));
    }

    #[test]
    fn shift_moves_through_syzygies(seed in any::<u64>(), n in -3i64..4) {
        let (f, p, mut rng) = setup(seed);
        let c = random_lambda_complex(&f, p, 3, 3, &mut rng);
        let shifted = c.shift(n);
        prop_assert_eq!(is_zero(&shifted), is_zero(&c));
        // Omega is 2-periodic on non-projective Λ-modules.
        prop_assert_eq!(stable(&c.shift(2 * n)), stable(&c));
    }

    #[test]
    fn collapse_is_additive(seed in any::<u64>()) {
        let (f, p, mut rng) = setup(seed);
        let c = random_lambda_complex(&f, p, 3, 2, &mut rng);
        let d = random_lambda_complex(&f, p, 3, 2, &mut rng);
        let sum = stable(&c.direct_sum(&d));
        let parts = stable(&c).direct_sum(&stable(&d));
        prop_assert_eq!(sum.mult[..p as usize - 1].to_vec(), parts.mult[..p as usize - 1].to_vec());
    }

    #[test]
    fn contractible_summands_are_invisible(seed in any::<u64>()) {
        let (f, p, mut rng) = setup(seed);
        let c = random_lambda_complex(&f, p, 3, 2, &mut rng);
        let d = random_lambda_complex(&f, p, 2, 2, &mut rng);
        let lo = d.degrees().0;
        let cone = d.cone(&d, lo, &d.identity_map()).unwrap();
        prop_assert!(is_zero(&cone));
        prop_assert!(!tate_nonzero(&cone).unwrap());
        let with = stable(&c.direct_sum(&cone));
        prop_assert_eq!(with.mult[..p as usize - 1].to_vec(), stable(&c).mult[..p as usize - 1].to_vec());
    }

    #[test]
    fn cones_satisfy_two_out_of_three(seed in any::<u64>()) {
        let (f, p, mut rng) = setup(seed);
        let c = random_lambda_complex(&f, p, 2, 2, &mut rng);
        let d = random_lambda_complex(&f, p, 2, 2, &mut rng);
        let (lo, maps) = random_chain_map(&c, &d, &mut rng);
        let cone = c.cone(&d, lo, &maps).unwrap();
        let (zc, zd, zk) = (is_zero(&c), is_zero(&d), is_zero(&cone));
        // The third object of a triangle is zero whenever the other two are.
        prop_assert!(!(zc && zd) || zk);
        prop_assert!(!(zc && zk) || zd);
        prop_assert!(!(zd && zk) || zc);
    }
}

#[test]
fn bounded_complex_json_round_trip() {
    let corpus = load_corpus(&common::corpus_dir()).unwrap();
    for (name, rep) in corpus {
        let p = rep.characteristic().unwrap_or(3);
        let c = BoundedComplex::from_module(p, rep, -1).shift(2);
        let text = serde_json::to_string(&c.to_json()).unwrap();
        let back: ComplexJson = serde_json::from_str(&text).unwrap();
        assert_eq!(BoundedComplex::from_json(&back, p).unwrap(), c, "{name}");
    }
}
