//! Helpers shared by the integration tests.

#![allow(dead_code)]

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// Forced free part of a truncated induced Heisenberg module.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct U3Bound {
    pub p: u32,
    pub r: usize,
    #[serde(rename = "D")]
    pub d: usize,
    pub dim: usize,
    pub forced_free_dim: usize,
}

fn binom_mod(n: usize, k: usize, p: usize) -> usize {
    if k > n {
        return 0;
    }
    // Lucas, digit by digit.
    let (mut n, mut k, mut acc) = (n, k, 1usize);
    while n > 0 || k > 0 {
        let (a, b) = (n % p, k % p);
        if b > a {
            return 0;
        }
        let mut c = 1usize;
        for i in 0..b {
            c = c * (a - i) / (i + 1);
        }
        acc = acc * (c % p) % p;
        n /= p;
        k /= p;
    }
    acc
}

/// Brute-force translation-operator oracle.  The Frobenius kernel of
/// `U_3 / Z` acts on `k[x, y]_{<= D}` through the divided-power derivatives
/// `d_x^(p^k)` and `d_y^(p^k)`, `k < r`.  Every `q x q` monomial box
/// (`q = p^r`) whose corner stays inside the truncation is collected; the
/// oracle checks that their union is closed under all generators and that the
/// norm element `prod (d^(p^k))^(p-1)` has rank `|union| / q^2`, i.e. that
/// the union is a free submodule.  Returns `None` if either check fails.
pub fn u3_translation_oracle(p: u32, r: usize, d: usize) -> Option<U3Bound> {
    let p = p as usize;
    let q = p.pow(r as u32);
    let dim = (d + 1) * (d + 2) / 2;
    let mut staircase = std::collections::BTreeSet::new();
    for a in 0..=d / q {
        for b in 0..=d / q {
            let corner = (a * q + q - 1, b * q + q - 1);
            if corner.0 + corner.1 <= d {
                for i in 0..q {
                    for j in 0..q {
                        staircase.insert((a * q + i, b * q + j));
                    }
                }
            }
        }
    }
    for &(i, j) in &staircase {
        for k in 0..r {
            let s = p.pow(k as u32);
            if i >= s && binom_mod(i, s, p) != 0 && !staircase.contains(&(i - s, j)) {
                return None;
            }
            if j >= s && binom_mod(j, s, p) != 0 && !staircase.contains(&(i, j - s)) {
                return None;
            }
        }
    }
    // The norm sends a monomial to a multiple of a single monomial, so its
    // rank is the number of monomials with a nonzero coefficient.
    let norm_rank = staircase
        .iter()
        .filter(|&&(i, j)| {
            let (mut x, mut y) = (i, j);
            for k in 0..r {
                let s = p.pow(k as u32);
                for _ in 0..p - 1 {
                    if x < s || binom_mod(x, s, p) == 0 || y < s || binom_mod(y, s, p) == 0 {
                        return false;
                    }
                    x -= s;
                    y -= s;
                }
            }
            true
        })
        .count();
    if norm_rank * q * q != staircase.len() {
        return None;
    }
    Some(U3Bound { p: p as u32, r, d, dim, forced_free_dim: staircase.len() })
}

pub fn u3_cases() -> Vec<(u32, usize, usize)> {
    let mut out = Vec::new();
    for p in [2u32, 3] {
        for r in [1usize, 2] {
            for e in [2u32, 3] {
                out.push((p, r, (p as usize).pow(e)));
            }
        }
    }
    out
}

pub fn load_u3_fixture() -> Vec<U3Bound> {
    let text = std::fs::read_to_string(fixture_path("u3_forced_bounds.json")).expect("u3 fixture");
    serde_json::from_str(&text).expect("u3 fixture json")
}
