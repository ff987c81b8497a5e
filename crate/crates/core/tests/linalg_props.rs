use pisupport::{Elem, Field, Mat, PolyMat};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn field(which: usize) -> Field {
    let p = [2u32, 3, 5][which % 3];
    match which / 3 {
        0 => Field::prime(p).unwrap(),
        1 => Field::extension(p, 2).unwrap(),
        _ => Field::ratfun(p).unwrap(),
    }
}

/// Random matrix of rank at most `k`, as a product of thin factors.
fn low_rank(f: &Field, rows: usize, cols: usize, k: usize, rng: &mut ChaCha8Rng) -> Mat {
    let mut rand = |r: usize, c: usize| {
        let data: Vec<Elem> = (0..r * c).map(|_| f.random(rng)).collect();
        Mat::from_elems(f, r, c, data).unwrap()
    };
    rand(rows, k).mul(&rand(k, cols))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn rank_is_transpose_invariant(seed in any::<u64>(), which in 0usize..9) {
        let f = field(which);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (r, c) = (rng.gen_range(1..6), rng.gen_range(1..6));
        let k = rng.gen_range(1..5);
        let m = low_rank(&f, r, c, k, &mut rng);
        let rank = m.rank();
        prop_assert!(rank <= k.min(r).min(c));
        prop_assert_eq!(rank, m.transpose().rank());
        prop_assert_eq!(rank, m.rref().rank);
    }

    #[test]
    fn kernel_is_annihilated_and_has_complementary_size(seed in any::<u64>(), which in 0usize..9) {
        let f = field(which);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (r, c) = (rng.gen_range(1..6), rng.gen_range(1..6));
        let m = low_rank(&f, r, c, rng.gen_range(1..4), &mut rng);
        let ker = m.kernel_basis();
        prop_assert_eq!(ker.len() + m.rank(), c);
        for v in &ker {
            prop_assert!(m.apply(v).iter().all(|x| f.is_zero(x)));
        }
    }

    #[test]
    fn inverse_round_trip(seed in any::<u64>(), which in 0usize..9) {
        let f = field(which);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(1..5);
        let m = low_rank(&f, n, n, n, &mut rng);
        match m.inverse() {
            Ok(mi) => prop_assert!(m.mul(&mi).is_identity()),
            Err(_) => prop_assert!(m.rank() < n),
        }
    }

    #[test]
    fn truncated_polynomial_products_associate(seed in any::<u64>(), which in 0usize..6) {
        let f = field(which);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (n, d) = (rng.gen_range(1..4), rng.gen_range(1..5));
        let mut poly = || {
            PolyMat::from_coeffs((0..d).map(|_| low_rank(&f, n, n, n, &mut rng)).collect()).unwrap()
        };
        let (a, b, c) = (poly(), poly(), poly());
        prop_assert_eq!(a.mul(&b).mul(&c), a.mul(&b.mul(&c)));
    }

    #[test]
    fn json_round_trip(seed in any::<u64>(), which in 0usize..9) {
        let f = field(which);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = low_rank(&f, 3, 4, 2, &mut rng);
        prop_assert_eq!(Mat::from_json(&m.to_json(), &f).unwrap(), m);
    }
}

#[test]
fn function_field_rank_of_vandermonde_style_matrix() {
    // Rows (1, s^i, s^{2i}) for i = 0, 1, 2 are independent over F_2(s),
    // but every specialization to F_2 collapses them.
    let f = Field::ratfun(2).unwrap();
    let s = f.generator().unwrap();
    let mut data = Vec::new();
    for i in 0..3i64 {
        let si = f.pow(&s, i).unwrap();
        data.extend([f.one(), si.clone(), f.mul(&si, &si)]);
    }
    let m = Mat::from_elems(&f, 3, 3, data).unwrap();
    assert_eq!(m.rank(), 3);
}
