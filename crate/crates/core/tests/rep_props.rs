use pisupport::geometry::{random_group_element, sample_c_r_with};
use pisupport::{pi_operator, Field, Mat, PolyMat, Recipe, RepExpr, RepJson, Tag};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Small `GL_N` modules built from every constructor.
fn module(which: usize) -> RepExpr {
    let std2 = RepExpr::std(2);
    match which {
        0 => std2,
        1 => RepExpr::sym(2, std2),
        2 => RepExpr::dual(std2),
        3 => RepExpr::tensor(std2.clone(), std2),
        4 => RepExpr::twist(1, std2),
        5 => RepExpr::sum(std2.clone(), RepExpr::sym(3, std2)),
        6 => RepExpr::wedge(2, RepExpr::std(3)),
        7 => RepExpr::sym(2, RepExpr::std(3)),
        // The antisymmetric line in std2 ⊗ std2 and the quotient by it.
        8 => RepExpr::sub(vec![vec![0, 1, -1, 0]], RepExpr::tensor(std2.clone(), std2)),
        _ => RepExpr::quotient(vec![vec![0, 1, -1, 0]], RepExpr::tensor(std2.clone(), std2)),
    }
}

fn group_size(rep: &RepExpr) -> usize {
    rep.group_size().unwrap().unwrap_or(2)
}

fn setup(seed: u64) -> (Field, ChaCha8Rng) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = [2u32, 3, 5][rng.gen_range(0..3)];
    let f = if rng.gen_bool(0.6) { Field::prime(p).unwrap() } else { Field::extension(p, 2).unwrap() };
    (f, rng)
}

fn rho(rep: &RepExpr, g: &Mat) -> Mat {
    rep.eval(&PolyMat::constant(g, 1)).unwrap().coeff(0).unwrap().clone()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn operators_are_p_nilpotent(seed in any::<u64>(), which in 0usize..10) {
        let rep = module(which);
        let (f, mut rng) = setup(seed);
        let r = rng.gen_range(1..4);
        let t = sample_c_r_with(&f, group_size(&rep), r, Some(Tag::Gl), &mut rng).unwrap();
        for recipe in [Recipe::Ur, Recipe::Sum] {
            let op = pi_operator(&rep, &t, recipe).unwrap();
            prop_assert_eq!(op.theta.rows(), rep.dim());
            prop_assert!(op.theta.pow(f.p() as usize).is_zero());
        }
    }

    #[test]
    fn evaluation_is_multiplicative(seed in any::<u64>(), which in 0usize..10) {
        let rep = module(which);
        let (f, mut rng) = setup(seed);
        let n = group_size(&rep);
        let g = random_group_element(&f, n, None, &mut rng);
        let h = random_group_element(&f, n, None, &mut rng);
        prop_assert_eq!(rho(&rep, &g.mul(&h)), rho(&rep, &g).mul(&rho(&rep, &h)));
        prop_assert!(rho(&rep, &Mat::identity(&f, n)).is_identity());
    }

    #[test]
    fn operator_is_conjugation_equivariant(seed in any::<u64>(), which in 0usize..10) {
        let rep = module(which);
        let (f, mut rng) = setup(seed);
        let n = group_size(&rep);
        let t = sample_c_r_with(&f, n, rng.gen_range(1..3), Some(Tag::Gl), &mut rng).unwrap();
        let g = random_group_element(&f, n, None, &mut rng);
        let rg = rho(&rep, &g);
        for recipe in [Recipe::Ur, Recipe::Sum] {
            let lhs = pi_operator(&rep, &t.conjugate(&g).unwrap(), recipe).unwrap().theta;
            let rhs = rg.mul(&pi_operator(&rep, &t, recipe).unwrap().theta).mul(&rg.inverse().unwrap());
            prop_assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn direct_sum_operator_is_block_diagonal(seed in any::<u64>(), a in 0usize..10, b in 0usize..10) {
        let (ra, rb) = (module(a), module(b));
        prop_assume!(group_size(&ra) == group_size(&rb));
        let (f, mut rng) = setup(seed);
        let t = sample_c_r_with(&f, group_size(&ra), 2, Some(Tag::Gl), &mut rng).unwrap();
        let sum = RepExpr::sum(ra.clone(), rb.clone());
        let ta = pi_operator(&ra, &t, Recipe::Ur).unwrap().theta;
        let tb = pi_operator(&rb, &t, Recipe::Ur).unwrap().theta;
        prop_assert_eq!(pi_operator(&sum, &t, Recipe::Ur).unwrap().theta, Mat::block_diag(&f, &[&ta, &tb]));
    }

    #[test]
    fn zero_padding_leaves_operator_unchanged(seed in any::<u64>(), which in 0usize..10, e in 1usize..3) {
        let rep = module(which);
        let (f, mut rng) = setup(seed);
        let t = sample_c_r_with(&f, group_size(&rep), rng.gen_range(1..3), Some(Tag::Gl), &mut rng).unwrap();
        prop_assert_eq!(
            pi_operator(&rep, &t.pad_zeros(e), Recipe::Ur).unwrap().theta,
            pi_operator(&rep, &t, Recipe::Ur).unwrap().theta
        );
    }

    #[test]
    fn twist_sees_only_the_tail(seed in any::<u64>(), which in 0usize..10, e in 1u32..3) {
        let rep = module(which);
        let (f, mut rng) = setup(seed);
        let n = group_size(&rep);
        let t = sample_c_r_with(&f, n, 1 + e as usize, Some(Tag::Gl), &mut rng).unwrap();
        let tail = pisupport::NilTuple::new(&f, n, Some(Tag::Gl), t.mats()[e as usize..].to_vec()).unwrap();
        let twisted = RepExpr::twist(e, rep.clone());
        let p = f.p();
        let a = pisupport::jordan_partition(&pi_operator(&twisted, &t, Recipe::Ur).unwrap().theta, p).unwrap();
        let b = pisupport::jordan_partition(&pi_operator(&rep, &tail, Recipe::Ur).unwrap().theta, p).unwrap();
        prop_assert_eq!(a.is_stable_nonzero(), b.is_stable_nonzero());
    }
}

#[test]
fn module_json_round_trips() {
    for which in 0..10 {
        let rep = module(which);
        let j = rep.to_json();
        let text = serde_json::to_string(&j).unwrap();
        let back: RepJson = serde_json::from_str(&text).unwrap();
        assert_eq!(RepExpr::from_json(&back).unwrap(), rep);
    }
}
