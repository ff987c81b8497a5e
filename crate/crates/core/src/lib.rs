//! Exact computation of π-point supports for modules and bounded complexes
//! of modules over groups of exponential type, at a chosen Frobenius level.
//!
//! The crate is organised bottom-up: exact fields ([`field`]), dense matrices
//! and matrices over truncated polynomial rings ([`linalg`]), commuting
//! p-nilpotent tuples ([`geometry`]), test modules and their π-operators
//! ([`rep`]), support verdicts and fingerprints ([`support`]), and complexes
//! over `k[t]/t^p` ([`complexes`]).

pub mod complexes;
pub mod error;
pub mod field;
pub mod geometry;
pub mod linalg;
pub mod rep;
mod specialize;
pub mod support;

pub use complexes::{
    complex_in_support, omega_inverse, phi_collapse, restrict_along_pi, strip_free, tate_nonzero, BoundedComplex,
    ComplexJson, KtModule, LambdaComplex, StableRep,
};
pub use error::{Error, Result};
pub use field::{Elem, Field, FieldDesc, FieldElem, FieldKind};
pub use geometry::{jordan_partition, rank_sequence, sample_c_r, JordanType, NilTuple, NilTupleJson, Tag};
pub use linalg::{Mat, MatJson, PolyMat};
pub use rep::{
    build_carlson, build_ls_truncation, build_u3_induced, load_corpus, one_param_eval, one_param_poly, pi_operator,
    pi_operator_sum, pi_operator_ur, trunc_exp, umodule_pi_operator, PiOperator, Recipe, RepExpr, RepJson, UModule,
    UModuleJson, Zeta,
};
pub use support::{
    axiom_suite, fingerprint, in_support, jordan_type_at, AxiomReport, SamplingPlan, SupportFingerprint,
    SupportVerdict,
};
