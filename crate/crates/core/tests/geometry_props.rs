use pisupport::geometry::{random_group_element, sample_c_r_with};
use pisupport::{jordan_partition, Field, JordanType, Mat, NilTuple, Tag};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn setup(seed: u64) -> (Field, ChaCha8Rng, usize, usize, Option<Tag>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = [2u32, 3, 5][rng.gen_range(0..3)];
    let f = if rng.gen_bool(0.5) { Field::prime(p).unwrap() } else { Field::extension(p, 2).unwrap() };
    let (n, tag) = match rng.gen_range(0..4) {
        0 => (rng.gen_range(2..5), Some(Tag::Gl)),
        1 => (rng.gen_range(2..5), Some(Tag::Sl)),
        2 => (3, Some(Tag::U3)),
        _ => (2, Some(Tag::Ga(1))),
    };
    let r = rng.gen_range(1..4);
    (f, rng, n, r, tag)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn sampler_lands_in_c_r(seed in any::<u64>()) {
        let (f, mut rng, n, r, tag) = setup(seed);
        let t = sample_c_r_with(&f, n, r, tag.clone(), &mut rng).unwrap();
        prop_assert!(t.in_c_r());
        prop_assert_eq!(t.r(), r);
        if let Some(tag) = &tag {
            prop_assert!(t.mats().iter().all(|m| tag.contains(m)));
        }
    }

    #[test]
    fn tuple_operations_stay_in_c_r(seed in any::<u64>()) {
        let (f, mut rng, n, r, tag) = setup(seed);
        let t = sample_c_r_with(&f, n, r, tag.clone(), &mut rng).unwrap();
        let a = f.random(&mut rng);
        let b = f.random(&mut rng);
        prop_assert!(t.act_dot(&a).in_c_r());
        prop_assert!(t.act_star(&a).in_c_r());
        prop_assert!(t.lambda_r().in_c_r());
        prop_assert!(t.pad_zeros(2).in_c_r());
        let g = random_group_element(&f, n, tag.as_ref(), &mut rng);
        prop_assert!(t.conjugate(&g).unwrap().in_c_r());
        // Monoid actions: (ab).t = a.(b.t), 1.t = t.
        let ab = f.mul(&a, &b);
        prop_assert_eq!(t.act_dot(&ab), t.act_dot(&b).act_dot(&a));
        prop_assert_eq!(t.act_star(&ab), t.act_star(&b).act_star(&a));
        prop_assert_eq!(t.act_dot(&f.one()), t.clone());
        prop_assert_eq!(t.lambda_r().lambda_r(), t.clone());
    }

    #[test]
    fn jordan_type_is_conjugation_invariant(seed in any::<u64>()) {
        let (f, mut rng, n, _, tag) = setup(seed);
        let t = sample_c_r_with(&f, n, 1, tag.clone(), &mut rng).unwrap();
        let theta = &t.mats()[0];
        let g = random_group_element(&f, n, None, &mut rng);
        let conj = g.mul(theta).mul(&g.inverse().unwrap());
        let jt = jordan_partition(theta, f.p()).unwrap();
        prop_assert_eq!(jt.dim(), n);
        prop_assert_eq!(jordan_partition(&conj, f.p()).unwrap(), jt);
    }

    #[test]
    fn jordan_type_of_block_sum_adds(seed in any::<u64>()) {
        let (f, mut rng, n, _, _) = setup(seed);
        let a = sample_c_r_with(&f, n, 1, None, &mut rng).unwrap();
        let b = sample_c_r_with(&f, n + 1, 1, None, &mut rng).unwrap();
        let (x, y) = (&a.mats()[0], &b.mats()[0]);
        let sum = Mat::block_diag(&f, &[x, y]);
        let p = f.p();
        prop_assert_eq!(
            jordan_partition(&sum, p).unwrap(),
            jordan_partition(x, p).unwrap().direct_sum(&jordan_partition(y, p).unwrap())
        );
    }

    #[test]
    fn tuple_json_round_trip(seed in any::<u64>()) {
        let (f, mut rng, n, r, tag) = setup(seed);
        let t = sample_c_r_with(&f, n, r, tag, &mut rng).unwrap();
        prop_assert_eq!(NilTuple::from_json(&t.to_json(), None).unwrap(), t);
    }
}

#[test]
fn single_jordan_block_types() {
    for p in [2u32, 3, 5] {
        let f = Field::prime(p).unwrap();
        for size in 1..=p as usize {
            let mut m = Mat::zeros(&f, size, size);
            for i in 0..size.saturating_sub(1) {
                m.set(i, i + 1, f.one());
            }
            let jt = jordan_partition(&m, p).unwrap();
            let mut mult = vec![0; p as usize];
            mult[size - 1] = 1;
            assert_eq!(jt, JordanType { p, mult });
            assert_eq!(jt.is_free(), size == p as usize);
        }
    }
}
