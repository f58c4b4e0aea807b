//! Proof kernel and cut-elimination engine for an intuitionistic sequent
//! calculus with the ∇ quantifier, equivariant nominal constants, equality,
//! stratified definitions and natural-number induction, together with a
//! bidirectional translation to a local-signature presentation.

pub mod bridge;
pub mod cut;
pub mod formula;
pub mod kernel;
pub mod term;
pub mod transform;
pub mod unify;

pub use bridge::{
    check_folnb, folnb_to_lg, fsequent_of, lg_to_folnb, BridgeError, FDerivation, FRule, FSequent,
    FViolation, LocalJudgment,
};
pub use cut::{contract, normalize, reduce_once, CutError, Normalization};
pub use formula::{DefClause, Formula, Theory};
pub use kernel::{check, premises_of, Derivation, Rule, Sequent, Signature, Violation};
pub use term::{Ctx, Head, Perm, Subst, Term, Ty};
