mod common;

use common::{fixture_path, load_u3_fixture, u3_cases, u3_translation_oracle, U3Bound};
use pisupport::rep::u3_forced_free_dim;

#[test]
fn fixture_matches_translation_oracle() {
    let computed: Vec<U3Bound> = u3_cases()
        .into_iter()
        .map(|(p, r, d)| u3_translation_oracle(p, r, d).expect("staircase is a free submodule"))
        .collect();
    if std::env::var_os("PISUPPORT_REGEN_FIXTURES").is_some() {
        let text = serde_json::to_string_pretty(&computed).unwrap() + "\n";
        std::fs::write(fixture_path("u3_forced_bounds.json"), text).unwrap();
    }
    assert_eq!(load_u3_fixture(), computed);
}

#[test]
fn library_bound_agrees_with_oracle() {
    for b in load_u3_fixture() {
        assert_eq!(u3_forced_free_dim(b.p, b.r, b.d), b.forced_free_dim, "{b:?}");
    }
}
