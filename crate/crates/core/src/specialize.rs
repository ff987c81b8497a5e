//! Exact ranks over `F_p(s)` by specializing `s` into a large finite field.
//!
//! Clearing denominators turns `theta` into `M / L` with `M` polynomial, so
//! `rank(theta^k) = rank(M^k)`.  Specializing at `alpha` can only lower a
//! rank, and it lowers it exactly when every maximal nonzero minor of `M^k`
//! vanishes at `alpha`.  A minor has coefficients in `F_p`, so if it vanishes
//! at `alpha` it is divisible by the minimal polynomial of `alpha`.  Testing
//! points of degree `K` from distinct Frobenius orbits therefore rules out `K`
//! roots each, and once the total exceeds the degree bound of a
//! `(rho + 1)`-minor the observed maximum `rho` is the true rank.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use crate::field::{poly, Elem, Field, FinOps};
use crate::linalg::Mat;

/// Largest evaluation field we build.  Its log tables (about `20 q` bytes)
/// must stay cache resident or evaluation gets several times slower.
const EVAL_FIELD_LIMIT: u64 = 1 << 16;

/// Give up (and let the caller eliminate over `F_p(s)`) past this many points.
const MAX_POINTS: usize = 20_000;

fn eval_field(p: u32) -> Option<Field> {
    static CACHE: OnceLock<Mutex<HashMap<u32, Option<Field>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("evaluation field cache");
    guard
        .entry(p)
        .or_insert_with(|| {
            let mut k = 0u32;
            let mut q = 1u64;
            while q * p as u64 <= EVAL_FIELD_LIMIT {
                q *= p as u64;
                k += 1;
            }
            if k < 2 {
                return None;
            }
            Field::extension(p, k).ok()
        })
        .clone()
}

/// Exponents `i` such that `g^i` has degree exactly `K` over `F_p`, one per
/// Frobenius orbit (the orbit minimum).
struct OrbitPoints {
    q1: u64,
    p: u64,
    k: u32,
    subfield_steps: Vec<u64>,
    next: u64,
}

impl OrbitPoints {
    fn new(p: u32, k: u32) -> OrbitPoints {
        let q1 = (p as u64).pow(k) - 1;
        let subfield_steps = (1..k).filter(|e| k.is_multiple_of(*e)).map(|e| q1 / ((p as u64).pow(e) - 1)).collect();
        OrbitPoints { q1, p: p as u64, k, subfield_steps, next: 1 }
    }
}

impl Iterator for OrbitPoints {
    type Item = u64;

    fn next(&mut self) -> Option<u64> {
        while self.next < self.q1 {
            let i = self.next;
            self.next += 1;
            if self.subfield_steps.iter().any(|s| i.is_multiple_of(*s)) {
                continue;
            }
            let mut j = i;
            let mut minimal = true;
            for _ in 1..self.k {
                j = j * self.p % self.q1;
                if j < i {
                    minimal = false;
                    break;
                }
            }
            if minimal {
                return Some(i);
            }
        }
        None
    }
}

fn horner(ops: &FinOps, c: &[u32], alpha: u32) -> u32 {
    c.iter().rev().fold(0, |acc, &x| ops.add(ops.mul(acc, alpha), x))
}

fn degree_bound(entry_degrees: &[Option<usize>], shift: usize, m: usize) -> Option<usize> {
    let mut ds: Vec<usize> = entry_degrees.iter().flatten().map(|d| d + shift).collect();
    if m > ds.len() {
        return None;
    }
    ds.sort_unstable_by(|a, b| b.cmp(a));
    Some(ds[..m].iter().sum())
}

/// `rank(theta^k)` for `k = 1..=upto` over `F_p(s)`; for `upto == 1` the
/// matrix may be rectangular.  `None` if the field is not `F_p(s)` or the
/// specialization budget runs out.
pub(crate) fn power_ranks(theta: &Mat, upto: usize) -> Option<Vec<usize>> {
    let f = theta.field();
    if f.is_finite() || (upto > 1 && !theta.is_square()) {
        return None;
    }
    let p = f.p();
    let (rows, cols) = (theta.rows(), theta.cols());
    let rat: Vec<(&[u32], &[u32])> = theta
        .entries()
        .iter()
        .map(|e| match e {
            Elem::Rat(x) => (x.num(), x.den()),
            Elem::Fin(_) => unreachable!("finite element in a function field matrix"),
        })
        .collect();
    let mut lcm: Vec<u32> = vec![1];
    for (_, den) in &rat {
        if den.len() > 1 {
            let g = poly::gcd(&lcm, den, p);
            lcm = poly::mul(&lcm, &poly::divrem(den, &g, p).0, p);
        }
    }
    let polys: Vec<Vec<u32>> = rat
        .iter()
        .map(|(num, den)| {
            if num.is_empty() {
                Vec::new()
            } else {
                poly::mul(num, &poly::divrem(&lcm, den, p).0, p)
            }
        })
        .collect();
    let deg = |c: &Vec<u32>| if c.is_empty() { None } else { Some(c.len() - 1) };
    let row_deg: Vec<Option<usize>> =
        (0..rows).map(|i| (0..cols).filter_map(|j| deg(&polys[i * cols + j])).max()).collect();
    let col_deg: Vec<Option<usize>> =
        (0..cols).map(|j| (0..rows).filter_map(|i| deg(&polys[i * cols + j])).max()).collect();
    let max_deg = row_deg.iter().flatten().copied().max().unwrap_or(0);

    let ef = eval_field(p)?;
    let ops = ef.fin().expect("evaluation field is finite");
    let k_deg = ops.d as usize;
    // Minor of size m in M^k has degree at most this; `None` means no such
    // minor can be nonzero.
    let bound = |k: usize, m: usize| -> Option<usize> {
        let shift = (k - 1) * max_deg;
        match (degree_bound(&row_deg, shift, m), degree_bound(&col_deg, shift, m)) {
            (Some(a), Some(b)) => Some(a.min(b)),
            _ => None,
        }
    };

    let mut best = vec![0usize; upto];
    let mut done = vec![false; upto];
    let mut points = 0usize;
    for i in OrbitPoints::new(p, ops.d) {
        if points >= MAX_POINTS {
            return None;
        }
        let alpha = ops.exp_at(i)?;
        let data: Vec<Elem> = polys.iter().map(|c| Elem::Fin(horner(ops, c, alpha))).collect();
        let a = Mat::from_elems(&ef, rows, cols, data).ok()?;
        let mut power = a.clone();
        for k in 0..upto {
            let rk = power.rank();
            best[k] = best[k].max(rk);
            if rk == 0 || k + 1 == upto {
                break;
            }
            power = power.mul(&a);
        }
        points += 1;
        let budget = points * k_deg;
        for k in 0..upto {
            if done[k] {
                continue;
            }
            let by_previous = k > 0 && done[k - 1] && best[k] == best[k - 1];
            let by_degree = bound(k + 1, best[k] + 1).is_none_or(|b| budget > b);
            done[k] = by_previous || by_degree;
        }
        if done.iter().all(|&d| d) {
            return Some(best);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orbit_points_are_orbit_minima_of_full_degree() {
        let pts: Vec<u64> = OrbitPoints::new(2, 4).collect();
        // F_16 has (16 - 4) / 4 = 3 orbits of elements of degree 4.
        assert_eq!(pts, vec![1, 3, 7]);
    }

    #[test]
    fn agrees_with_elimination_over_function_field() {
        let f = Field::ratfun(3).unwrap();
        let s = f.generator().unwrap();
        let s2 = f.mul(&s, &s);
        let one = f.one();
        let zero = f.zero();
        // [[s, s^2], [1, s]] has rank 1.
        let m = Mat::from_elems(&f, 2, 2, vec![s.clone(), s2.clone(), one.clone(), s.clone()]).unwrap();
        assert_eq!(power_ranks(&m, 1), Some(vec![1]));
        let n = Mat::from_elems(&f, 2, 2, vec![zero.clone(), s.clone(), zero.clone(), zero]).unwrap();
        assert_eq!(power_ranks(&n, 3), Some(vec![1, 0, 0]));
        let inv = f.inv(&f.add(&s, &one)).unwrap();
        let r = Mat::from_elems(&f, 1, 2, vec![inv, s2]).unwrap();
        assert_eq!(power_ranks(&r, 1), Some(vec![1]));
    }

    #[test]
    fn matches_rref_on_random_low_rank_products() {
        use rand::{Rng, SeedableRng};
        let f = Field::ratfun(2).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for trial in 0..20 {
            let inner = 1 + trial % 4;
            let mut rand_mat = |r: usize, c: usize| {
                let data = (0..r * c)
                    .map(|_| {
                        let num: Vec<u32> = (0..4).map(|_| rng.gen_range(0..2)).collect();
                        let den: Vec<u32> = if rng.gen_bool(0.3) { vec![1, 1] } else { vec![1] };
                        f.from_ratfn(&num, &den).unwrap()
                    })
                    .collect();
                Mat::from_elems(&f, r, c, data).unwrap()
            };
            let m = rand_mat(5, inner).mul(&rand_mat(inner, 5));
            let want = m.rref().rank;
            assert_eq!(power_ranks(&m, 1), Some(vec![want]));
            let mut pw = m.clone();
            let mut seq = Vec::new();
            for _ in 0..3 {
                seq.push(pw.rref().rank);
                pw = pw.mul(&m);
            }
            assert_eq!(power_ranks(&m, 3), Some(seq));
        }
    }
}
