use pisupport::{Elem, Field};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn fields() -> Vec<Field> {
    let mut out = Vec::new();
    for p in [2u32, 3, 5, 7] {
        out.push(Field::prime(p).unwrap());
        out.push(Field::extension(p, 2).unwrap());
        out.push(Field::extension(p, 3).unwrap());
        out.push(Field::ratfun(p).unwrap());
    }
    out
}

fn triple(f: &Field, seed: u64) -> (Elem, Elem, Elem) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (f.random(&mut rng), f.random(&mut rng), f.random(&mut rng))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn ring_axioms(seed in any::<u64>(), which in 0usize..16) {
        let f = &fields()[which];
        let (a, b, c) = triple(f, seed);
        prop_assert_eq!(f.add(&f.add(&a, &b), &c), f.add(&a, &f.add(&b, &c)));
        prop_assert_eq!(f.mul(&f.mul(&a, &b), &c), f.mul(&a, &f.mul(&b, &c)));
        prop_assert_eq!(f.mul(&a, &f.add(&b, &c)), f.add(&f.mul(&a, &b), &f.mul(&a, &c)));
        prop_assert_eq!(f.add(&a, &b), f.add(&b, &a));
        prop_assert_eq!(f.mul(&a, &b), f.mul(&b, &a));
        prop_assert!(f.is_zero(&f.add(&a, &f.neg(&a))));
        if !f.is_zero(&a) {
            prop_assert!(f.is_one(&f.mul(&a, &f.inv(&a).unwrap())));
        } else {
            prop_assert!(f.inv(&a).is_err());
        }
    }

    #[test]
    fn frobenius_is_additive_and_multiplicative(seed in any::<u64>(), which in 0usize..16) {
        let f = &fields()[which];
        let (a, b, _) = triple(f, seed);
        prop_assert_eq!(f.frobenius_pow(&f.add(&a, &b), 1), f.add(&f.frobenius_pow(&a, 1), &f.frobenius_pow(&b, 1)));
        prop_assert_eq!(f.frobenius_pow(&f.mul(&a, &b), 1), f.mul(&f.frobenius_pow(&a, 1), &f.frobenius_pow(&b, 1)));
        prop_assert_eq!(f.frobenius_pow(&a, 1), f.pow(&a, f.p() as i64).unwrap());
    }

    #[test]
    fn frobenius_has_order_d(seed in any::<u64>(), which in 0usize..16) {
        let f = &fields()[which];
        if let Some(d) = f.degree() {
            let (a, _, _) = triple(f, seed);
            prop_assert_eq!(f.frobenius_pow(&a, d), a);
        }
    }

    #[test]
    fn element_json_round_trip(seed in any::<u64>(), which in 0usize..16) {
        let f = &fields()[which];
        let (a, _, _) = triple(f, seed);
        prop_assert_eq!(f.from_json(&f.to_json(&a)).unwrap(), a);
        let g = Field::from_desc(&f.desc()).unwrap();
        prop_assert_eq!(&g, f);
    }
}

#[test]
fn large_extension_addition_matches_small_table_path() {
    // F_{2^12} has no addition table; addition goes through the successor
    // table and must still be characteristic-2 xor on the encodings.
    let f = Field::extension(2, 12).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..500 {
        let (a, b) = (f.random(&mut rng), f.random(&mut rng));
        let (Elem::Fin(x), Elem::Fin(y)) = (&a, &b) else { unreachable!() };
        assert_eq!(f.add(&a, &b), Elem::Fin(x ^ y));
    }
}
