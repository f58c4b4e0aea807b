//! Sequents, derivation trees and the rule checker.
//!
//! The checker is syntax-directed: for every rule the payload plus the
//! conclusion determine the premise sequents exactly; checking a derivation
//! means recomputing those sequents and comparing them structurally against
//! the stored premises, recursively.
//!
//! Context layout conventions (relied upon by the transformations and the
//! cut eliminator):
//!  - left contexts are indexed lists; every left rule names its principal
//!    formula by index and the premise keeps the remaining formulas in
//!    place (the principal is replaced or removed at its index);
//!  - `ImpR` appends the new hypothesis at the end;
//!  - `CL` inserts the duplicate immediately after the contracted formula;
//!  - `Mc` carries its cut blocks as `(start, len)` spans into the
//!    conclusion context, in increasing, non-overlapping order; the
//!    uncovered positions are the side context, and the right premise
//!    reads `cuts ++ sides`.  The cut formulas live in the payload.

use crate::formula::{Formula, Theory};
use crate::term::{Head, Perm, Subst, Term, Ty};
use crate::unify::{unify, UnifProblem, UnifResult};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

pub type Signature = BTreeMap<String, Ty>;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sequent {
    pub sig: Signature,
    pub left: Vec<Formula>,
    pub right: Formula,
}

impl Sequent {
    pub fn new(sig: Signature, left: Vec<Formula>, right: Formula) -> Sequent {
        Sequent { sig, left, right }
    }

    /// All formulas, goal first (the π₀ position of permutation vectors).
    pub fn formulas(&self) -> impl Iterator<Item = &Formula> {
        std::iter::once(&self.right).chain(self.left.iter())
    }

    pub fn support(&self) -> Vec<(String, Ty)> {
        let mut out = Vec::new();
        for f in self.formulas() {
            for c in f.support() {
                if !out.contains(&c) {
                    out.push(c);
                }
            }
        }
        out
    }

    pub fn free_evars(&self) -> Vec<(String, Ty)> {
        let mut out = Vec::new();
        for f in self.formulas() {
            for v in f.free_evars() {
                if !out.contains(&v) {
                    out.push(v);
                }
            }
        }
        out
    }
}

impl fmt::Display for Sequent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.sig.is_empty() {
            let names: Vec<&str> = self.sig.keys().map(|s| s.as_str()).collect();
            write!(f, "{} ; ", names.join(","))?;
        }
        for (i, b) in self.left.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}", b)?;
        }
        write!(f, " |- {}", self.right)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Rule {
    /// `Γ, B ⊢ B'` with `π.B = π'.B'`; `idx` locates B.
    IdPi { idx: usize, pi: Perm, pi_prime: Perm },
    /// Multicut; `blocks[i]` = (start, len) of Δᵢ, `cuts[i]` = Bᵢ.
    Mc { blocks: Vec<(usize, usize)>, cuts: Vec<Formula> },
    /// Contraction: the premise holds an extra copy of `left[idx]`,
    /// inserted at position `dup` of the premise context.
    CL { idx: usize, dup: usize },
    BotL { idx: usize },
    TopR,
    AndL { idx: usize, which: u8 },
    AndR,
    OrL { idx: usize },
    OrR { which: u8 },
    ImpL { idx: usize },
    ImpR,
    ForallL { idx: usize, witness: Term },
    ForallR { h: String },
    NablaL { idx: usize, nom: String },
    NablaR { nom: String },
    ExistsL { idx: usize, h: String },
    ExistsR { witness: Term },
    EqL { idx: usize },
    EqR,
    DefL { idx: usize },
    DefR { clause: usize, theta: Subst },
    /// Induction with invariant `inv` (body with dangling index 0 : nt).
    NatL { idx: usize, inv: Formula, j: String },
    NatRZero,
    NatRSucc,
}

impl Rule {
    pub fn name(&self) -> &'static str {
        match self {
            Rule::IdPi { .. } => "id",
            Rule::Mc { .. } => "mc",
            Rule::CL { .. } => "cL",
            Rule::BotL { .. } => "botL",
            Rule::TopR => "topR",
            Rule::AndL { .. } => "andL",
            Rule::AndR => "andR",
            Rule::OrL { .. } => "orL",
            Rule::OrR { .. } => "orR",
            Rule::ImpL { .. } => "impL",
            Rule::ImpR => "impR",
            Rule::ForallL { .. } => "forallL",
            Rule::ForallR { .. } => "forallR",
            Rule::NablaL { .. } => "nablaL",
            Rule::NablaR { .. } => "nablaR",
            Rule::ExistsL { .. } => "existsL",
            Rule::ExistsR { .. } => "existsR",
            Rule::EqL { .. } => "eqL",
            Rule::EqR => "eqR",
            Rule::DefL { .. } => "defL",
            Rule::DefR { .. } => "defR",
            Rule::NatL { .. } => "natL",
            Rule::NatRZero => "natRz",
            Rule::NatRSucc => "natRs",
        }
    }

    /// Index of the principal left formula, if this is a left rule.
    pub fn principal(&self) -> Option<usize> {
        match self {
            Rule::IdPi { idx, .. }
            | Rule::CL { idx, .. }
            | Rule::BotL { idx }
            | Rule::AndL { idx, .. }
            | Rule::OrL { idx }
            | Rule::ImpL { idx }
            | Rule::ForallL { idx, .. }
            | Rule::NablaL { idx, .. }
            | Rule::ExistsL { idx, .. }
            | Rule::EqL { idx }
            | Rule::DefL { idx }
            | Rule::NatL { idx, .. } => Some(*idx),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Derivation {
    pub conclusion: Sequent,
    pub rule: Rule,
    pub premises: Vec<Derivation>,
}

impl Derivation {
    pub fn leaf(conclusion: Sequent, rule: Rule) -> Derivation {
        Derivation { conclusion, rule, premises: vec![] }
    }

    /// Height: 0 at leaves, 1 + max over premises otherwise.
    pub fn height(&self) -> usize {
        self.premises.iter().map(|p| p.height() + 1).max().unwrap_or(0)
    }

    pub fn size(&self) -> usize {
        1 + self.premises.iter().map(|p| p.size()).sum::<usize>()
    }

    pub fn is_cut_free(&self) -> bool {
        !matches!(self.rule, Rule::Mc { .. })
            && self.premises.iter().all(|p| p.is_cut_free())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum CheckReason {
    #[error("principal index {0} out of range")]
    BadIndex(usize),
    #[error("rule {rule} does not match the {place} formula `{formula}`")]
    NotPrincipal { rule: &'static str, place: &'static str, formula: String },
    #[error("id: π.B = π'.B' fails: `{0}` vs `{1}`")]
    IdPermMismatch(String, String),
    #[error("expected {expected} premises, found {found}")]
    PremiseCount { expected: usize, found: usize },
    #[error("premise {index} concludes `{found}` but the rule requires `{expected}`")]
    PremiseMismatch { index: usize, expected: String, found: String },
    #[error("witness is ill-typed: {0}")]
    BadWitness(String),
    #[error("raised variable `{0}` already occurs in the signature")]
    NotFreshVar(String),
    #[error("nominal constant `{nom}` violates freshness: it occurs in the support of `{formula}`")]
    Freshness { nom: String, formula: String },
    #[error("nominal constant `{nom}` has type {found}, the binder needs {expected}")]
    NomType { nom: String, found: String, expected: String },
    #[error("equality terms fall outside the pattern fragment: `{0}`")]
    NotAPattern(String),
    #[error("eqR requires both sides identical, found `{0}` and `{1}`")]
    EqRNotIdentical(String, String),
    #[error("defR: head of clause {clause} does not match `{atom}` under the given substitution")]
    DefRMismatch { clause: usize, atom: String },
    #[error("defR: clause {0} out of range or wrong predicate")]
    DefRBadClause(usize),
    #[error("natL invariant must be closed and nominal-free: {0}")]
    BadInvariant(String),
    #[error("mc partition does not fit the context: {0}")]
    BadPartition(String),
    #[error("sequent is ill-formed: {0}")]
    IllFormed(String),
    #[error("the theory is not stratified: {0}")]
    Unstratified(String),
}

#[derive(Debug, Error, PartialEq)]
#[error("at {path:?} ({rule}): {reason}")]
pub struct Violation {
    pub path: Vec<usize>,
    pub rule: &'static str,
    pub reason: CheckReason,
}

/// Computes the premise sequents that `rule` demands below `seq`.
pub fn premises_of(seq: &Sequent, rule: &Rule, th: &Theory) -> Result<Vec<Sequent>, CheckReason> {
    let left = &seq.left;
    let grab = |idx: usize| -> Result<&Formula, CheckReason> {
        left.get(idx).ok_or(CheckReason::BadIndex(idx))
    };
    let replaced = |idx: usize, f: Formula| -> Vec<Formula> {
        let mut l = left.clone();
        l[idx] = f;
        l
    };
    let removed = |idx: usize| -> Vec<Formula> {
        let mut l = left.clone();
        l.remove(idx);
        l
    };
    match rule {
        Rule::IdPi { idx, pi, pi_prime } => {
            let b = grab(*idx)?;
            let lhs = b.perm(pi);
            let rhs = seq.right.perm(pi_prime);
            if lhs != rhs {
                return Err(CheckReason::IdPermMismatch(lhs.to_string(), rhs.to_string()));
            }
            Ok(vec![])
        }
        Rule::Mc { blocks, cuts } => {
            if blocks.len() != cuts.len() {
                return Err(CheckReason::BadPartition(
                    "block count differs from cut-formula count".to_string(),
                ));
            }
            let labels = mc_labels(blocks, left.len())?;
            let mut out = Vec::new();
            for (&(start, len), b) in blocks.iter().zip(cuts) {
                out.push(Sequent::new(
                    seq.sig.clone(),
                    left[start..start + len].to_vec(),
                    b.clone(),
                ));
            }
            let mut rctx: Vec<Formula> = cuts.clone();
            rctx.extend(
                labels
                    .iter()
                    .zip(left)
                    .filter(|(l, _)| l.is_none())
                    .map(|(_, f)| f.clone()),
            );
            out.push(Sequent::new(seq.sig.clone(), rctx, seq.right.clone()));
            Ok(out)
        }
        Rule::CL { idx, dup } => {
            let b = grab(*idx)?.clone();
            if *dup > left.len() {
                return Err(CheckReason::BadIndex(*dup));
            }
            let mut l = left.clone();
            l.insert(*dup, b);
            Ok(vec![Sequent::new(seq.sig.clone(), l, seq.right.clone())])
        }
        Rule::BotL { idx } => match grab(*idx)? {
            Formula::Bot => Ok(vec![]),
            f => Err(not_principal(rule, "left", f)),
        },
        Rule::TopR => match &seq.right {
            Formula::Top => Ok(vec![]),
            f => Err(not_principal(rule, "right", f)),
        },
        Rule::AndL { idx, which } => match grab(*idx)? {
            Formula::And(b1, b2) => {
                let b = if *which == 1 { b1 } else { b2 };
                Ok(vec![Sequent::new(
                    seq.sig.clone(),
                    replaced(*idx, (**b).clone()),
                    seq.right.clone(),
                )])
            }
            f => Err(not_principal(rule, "left", f)),
        },
        Rule::AndR => match &seq.right {
            Formula::And(b, c) => Ok(vec![
                Sequent::new(seq.sig.clone(), left.clone(), (**b).clone()),
                Sequent::new(seq.sig.clone(), left.clone(), (**c).clone()),
            ]),
            f => Err(not_principal(rule, "right", f)),
        },
        Rule::OrL { idx } => match grab(*idx)? {
            Formula::Or(b, d) => Ok(vec![
                Sequent::new(seq.sig.clone(), replaced(*idx, (**b).clone()), seq.right.clone()),
                Sequent::new(seq.sig.clone(), replaced(*idx, (**d).clone()), seq.right.clone()),
            ]),
            f => Err(not_principal(rule, "left", f)),
        },
        Rule::OrR { which } => match &seq.right {
            Formula::Or(b1, b2) => {
                let b = if *which == 1 { b1 } else { b2 };
                Ok(vec![Sequent::new(seq.sig.clone(), left.clone(), (**b).clone())])
            }
            f => Err(not_principal(rule, "right", f)),
        },
        Rule::ImpL { idx } => match grab(*idx)? {
            Formula::Imp(b, d) => Ok(vec![
                Sequent::new(seq.sig.clone(), removed(*idx), (**b).clone()),
                Sequent::new(seq.sig.clone(), replaced(*idx, (**d).clone()), seq.right.clone()),
            ]),
            f => Err(not_principal(rule, "left", f)),
        },
        Rule::ImpR => match &seq.right {
            Formula::Imp(b, c) => {
                let mut l = left.clone();
                l.push((**b).clone());
                Ok(vec![Sequent::new(seq.sig.clone(), l, (**c).clone())])
            }
            f => Err(not_principal(rule, "right", f)),
        },
        Rule::ForallL { idx, witness } => match grab(*idx)? {
            Formula::Forall(ty, body) => {
                check_witness(witness, ty, seq, th)?;
                let opened = body.open(witness);
                Ok(vec![Sequent::new(seq.sig.clone(), replaced(*idx, opened), seq.right.clone())])
            }
            f => Err(not_principal(rule, "left", f)),
        },
        Rule::ExistsR { witness } => match &seq.right {
            Formula::Exists(ty, body) => {
                check_witness(witness, ty, seq, th)?;
                Ok(vec![Sequent::new(seq.sig.clone(), left.clone(), body.open(witness))])
            }
            f => Err(not_principal(rule, "right", f)),
        },
        Rule::ForallR { h } => match &seq.right {
            Formula::Forall(ty, body) => {
                let (premise_right, sig) = raise_premise(h, ty, body, seq)?;
                Ok(vec![Sequent::new(sig, left.clone(), premise_right)])
            }
            f => Err(not_principal(rule, "right", f)),
        },
        Rule::ExistsL { idx, h } => match grab(*idx)? {
            Formula::Exists(ty, body) => {
                let (opened, sig) = raise_premise(h, ty, body, seq)?;
                Ok(vec![Sequent::new(sig, replaced(*idx, opened), seq.right.clone())])
            }
            f => Err(not_principal(rule, "left", f)),
        },
        Rule::NablaL { idx, nom } => match grab(*idx)? {
            Formula::Nabla(ty, body) => {
                check_nabla_nom(nom, ty, body)?;
                let opened = body.open(&Term::nom(nom, ty));
                Ok(vec![Sequent::new(seq.sig.clone(), replaced(*idx, opened), seq.right.clone())])
            }
            f => Err(not_principal(rule, "left", f)),
        },
        Rule::NablaR { nom } => match &seq.right {
            Formula::Nabla(ty, body) => {
                check_nabla_nom(nom, ty, body)?;
                let opened = body.open(&Term::nom(nom, ty));
                Ok(vec![Sequent::new(seq.sig.clone(), left.clone(), opened)])
            }
            f => Err(not_principal(rule, "right", f)),
        },
        Rule::EqR => match &seq.right {
            Formula::Eq(s, t, _) => {
                if s == t {
                    Ok(vec![])
                } else {
                    Err(CheckReason::EqRNotIdentical(s.to_string(), t.to_string()))
                }
            }
            f => Err(not_principal(rule, "right", f)),
        },
        Rule::EqL { idx } => match grab(*idx)? {
            Formula::Eq(..) => match eql_theta(seq, *idx)? {
                None => Ok(vec![]),
                Some(theta) => {
                    let l: Vec<Formula> =
                        removed(*idx).iter().map(|f| f.subst(&theta)).collect();
                    let r = seq.right.subst(&theta);
                    let sig = subst_sig(&seq.sig, &theta);
                    Ok(vec![Sequent::new(sig, l, r)])
                }
            },
            f => Err(not_principal(rule, "left", f)),
        },
        Rule::DefL { idx } => match grab(*idx)? {
            Formula::Atom(..) => {
                let mut out = Vec::new();
                for inst in defl_instances(seq, *idx, th)? {
                    let mut sig = seq.sig.clone();
                    for (v, ty) in &inst.raised.vars {
                        sig.insert(v.clone(), ty.clone());
                    }
                    let sig = subst_sig(&sig, &inst.theta);
                    let l = {
                        let mut l = left.clone();
                        l[*idx] = inst.raised.body.clone();
                        l.iter().map(|f| f.subst(&inst.theta)).collect()
                    };
                    let r = seq.right.subst(&inst.theta);
                    out.push(Sequent::new(sig, l, r));
                }
                Ok(out)
            }
            f => Err(not_principal(rule, "left", f)),
        },
        Rule::DefR { clause, theta } => match &seq.right {
            Formula::Atom(p, _) => {
                let atom = seq.right.clone();
                let cs = atom.support();
                let c = th
                    .clauses
                    .get(*clause)
                    .filter(|c| &c.head_pred == p)
                    .ok_or(CheckReason::DefRBadClause(*clause))?;
                let raised = freshened_raise(c, &cs, seq);
                // (λc⃗.H)θ must equal λc⃗.A.
                let happ = raised.head_atom().subst(theta);
                if happ != atom {
                    return Err(CheckReason::DefRMismatch {
                        clause: *clause,
                        atom: atom.to_string(),
                    });
                }
                let body = raised.body.subst(theta);
                Ok(vec![Sequent::new(seq.sig.clone(), left.clone(), body)])
            }
            f => Err(not_principal(rule, "right", f)),
        },
        Rule::NatL { idx, inv, j } => match grab(*idx)? {
            Formula::Nat(i) => {
                check_invariant(inv)?;
                if seq.sig.contains_key(j) {
                    return Err(CheckReason::NotFreshVar(j.clone()));
                }
                let nt = Ty::base("nt");
                let z = Term::konst("z", &nt);
                let sty = Ty::arrow(nt.clone(), nt.clone());
                let jv = Term::var(j, &nt);
                let sj = Term::apply(&Term::konst("s", &sty), std::slice::from_ref(&jv));
                let mut jsig = seq.sig.clone();
                jsig.insert(j.clone(), nt.clone());
                Ok(vec![
                    Sequent::new(seq.sig.clone(), vec![], inv.open(&z)),
                    Sequent::new(jsig, vec![inv.open(&jv)], inv.open(&sj)),
                    Sequent::new(seq.sig.clone(), replaced(*idx, inv.open(i)), seq.right.clone()),
                ])
            }
            f => Err(not_principal(rule, "left", f)),
        },
        Rule::NatRZero => match &seq.right {
            Formula::Nat(t) => {
                let z = Term::konst("z", &Ty::base("nt"));
                if t == &z {
                    Ok(vec![])
                } else {
                    Err(not_principal(rule, "right", &seq.right))
                }
            }
            f => Err(not_principal(rule, "right", f)),
        },
        Rule::NatRSucc => match &seq.right {
            Formula::Nat(t) => match &t.head {
                Head::Konst(name, _) if name == "s" && t.args.len() == 1 && t.binder.is_empty() => {
                    Ok(vec![Sequent::new(
                        seq.sig.clone(),
                        left.clone(),
                        Formula::Nat(t.args[0].clone()),
                    )])
                }
                _ => Err(not_principal(rule, "right", &seq.right)),
            },
            f => Err(not_principal(rule, "right", f)),
        },
    }
}

/// Labels each context position of a multicut conclusion with its block
/// index (`None` for the side context), validating that the blocks are in
/// increasing order, non-overlapping and within range.
pub fn mc_labels(
    blocks: &[(usize, usize)],
    n: usize,
) -> Result<Vec<Option<usize>>, CheckReason> {
    let mut labels = vec![None; n];
    let mut end = 0;
    for (i, &(start, len)) in blocks.iter().enumerate() {
        if start < end {
            return Err(CheckReason::BadPartition(format!(
                "block {} starting at {} overlaps or reorders",
                i, start
            )));
        }
        end = start + len;
        if end > n {
            return Err(CheckReason::BadPartition(format!(
                "block {} ends at {} but the context has {}",
                i, end, n
            )));
        }
        for l in labels[start..end].iter_mut() {
            *l = Some(i);
        }
    }
    Ok(labels)
}

/// The side-context positions of a multicut conclusion, in order.
pub fn mc_sides(blocks: &[(usize, usize)], n: usize) -> Result<Vec<usize>, CheckReason> {
    Ok(mc_labels(blocks, n)?
        .iter()
        .enumerate()
        .filter(|(_, l)| l.is_none())
        .map(|(i, _)| i)
        .collect())
}

fn not_principal(rule: &Rule, place: &'static str, f: &Formula) -> CheckReason {
    CheckReason::NotPrincipal { rule: rule.name(), place, formula: f.to_string() }
}

fn check_witness(w: &Term, ty: &Ty, seq: &Sequent, th: &Theory) -> Result<(), CheckReason> {
    if !w.closed_under(0) {
        return Err(CheckReason::BadWitness(format!("`{}` has dangling indices", w)));
    }
    let ctx = th.ctx_with(&seq.sig);
    match w.typecheck(&ctx) {
        Ok(found) if &found == ty => Ok(()),
        Ok(found) => Err(CheckReason::BadWitness(format!(
            "`{}` has type {}, the quantifier needs {}",
            w, found, ty
        ))),
        Err(e) => Err(CheckReason::BadWitness(format!("`{}`: {}", w, e))),
    }
}

/// Shared core of ∀R and ∃L: the raised variable `h` over the support of
/// the quantified formula, in first-occurrence order.
fn raise_premise(
    h: &str,
    ty: &Ty,
    body: &Formula,
    seq: &Sequent,
) -> Result<(Formula, Signature), CheckReason> {
    if seq.sig.contains_key(h) {
        return Err(CheckReason::NotFreshVar(h.to_string()));
    }
    let cs = body.support();
    let hty = ty.raise(&cs);
    let happ = Term::apply(
        &Term::var(h, &hty),
        &cs.iter().map(|(n, t)| Term::nom(n, t)).collect::<Vec<_>>(),
    );
    let mut sig = seq.sig.clone();
    sig.insert(h.to_string(), hty);
    Ok((body.open(&happ), sig))
}

fn check_nabla_nom(nom: &str, ty: &Ty, body: &Formula) -> Result<(), CheckReason> {
    for (n, nty) in body.support() {
        if n == nom {
            return Err(CheckReason::Freshness { nom: nom.to_string(), formula: body.to_string() });
        }
        let _ = nty;
    }
    // The constant's type is forced by the binder type.
    if !ty.is_nominal_base() {
        return Err(CheckReason::NomType {
            nom: nom.to_string(),
            found: "-".to_string(),
            expected: ty.to_string(),
        });
    }
    Ok(())
}

fn check_invariant(inv: &Formula) -> Result<(), CheckReason> {
    if !inv.free_evars().is_empty() {
        return Err(CheckReason::BadInvariant(format!("free variables in `{}`", inv)));
    }
    if !inv.support().is_empty() {
        return Err(CheckReason::BadInvariant(format!("nominal constants in `{}`", inv)));
    }
    Ok(())
}

/// The most general unifier for an eqL principal: `Ok(None)` when the two
/// sides do not unify, in which case the rule has zero premises.
pub fn eql_theta(seq: &Sequent, idx: usize) -> Result<Option<Subst>, CheckReason> {
    match seq.left.get(idx) {
        Some(eq @ Formula::Eq(s, t, _)) => {
            let cs = eq.support();
            let problem = UnifProblem { left: s.close_noms(&cs), right: t.close_noms(&cs) };
            match unify(&problem) {
                UnifResult::NoUnifier => Ok(None),
                UnifResult::NotAPattern(t) => Err(CheckReason::NotAPattern(t.to_string())),
                UnifResult::Mgu(theta) => Ok(Some(theta)),
            }
        }
        Some(f) => Err(CheckReason::NotPrincipal {
            rule: "eqL",
            place: "left",
            formula: f.to_string(),
        }),
        None => Err(CheckReason::BadIndex(idx)),
    }
}

/// One premise-producing clause instance of a defL application.
#[derive(Clone, Debug)]
pub struct DefInstance {
    pub clause: usize,
    pub raised: crate::formula::DefClause,
    pub theta: Subst,
}

/// The clause instances a defL application produces, in clause order;
/// clauses whose head does not unify with the principal atom are skipped.
pub fn defl_instances(
    seq: &Sequent,
    idx: usize,
    th: &Theory,
) -> Result<Vec<DefInstance>, CheckReason> {
    match seq.left.get(idx) {
        Some(atom @ Formula::Atom(p, _)) => {
            let cs = atom.support();
            let mut out = Vec::new();
            for (i, clause) in th.clauses_for(p) {
                let raised = freshened_raise(clause, &cs, seq);
                if let Some(theta) = unify_atom(&raised.head_atom(), atom, &cs)? {
                    out.push(DefInstance { clause: i, raised, theta });
                }
            }
            Ok(out)
        }
        Some(f) => Err(CheckReason::NotPrincipal {
            rule: "defL",
            place: "left",
            formula: f.to_string(),
        }),
        None => Err(CheckReason::BadIndex(idx)),
    }
}

/// Σθ: variables substituted away are replaced by the free variables of
/// their images; untouched variables stay.
pub fn subst_sig(sig: &Signature, theta: &Subst) -> Signature {
    let mut out = Signature::new();
    for (x, ty) in sig {
        match theta.get(x) {
            None => {
                out.insert(x.clone(), ty.clone());
            }
            Some(img) => {
                for (v, vty) in img.free_evars() {
                    out.insert(v, vty);
                }
            }
        }
    }
    // Fresh variables introduced inside images of substituted variables are
    // collected above; variables in images of out-of-signature variables do
    // not arise for checked sequents.
    out
}

/// Raises a clause over `c⃗`, renaming its variables away from the sequent's
/// signature and free variables, deterministically.
pub fn freshened_raise(
    clause: &crate::formula::DefClause,
    cs: &[(String, Ty)],
    seq: &Sequent,
) -> crate::formula::DefClause {
    let mut avoid: BTreeSet<String> = seq.sig.keys().cloned().collect();
    for (v, _) in seq.free_evars() {
        avoid.insert(v);
    }
    let mut renamed = clause.clone();
    let mut map: BTreeMap<String, Term> = BTreeMap::new();
    let mut vars = Vec::new();
    for (x, ty) in &clause.vars {
        let nx = crate::term::fresh_name(x, &avoid);
        avoid.insert(nx.clone());
        map.insert(x.clone(), Term::var(&nx, ty));
        vars.push((nx, ty.clone()));
    }
    renamed.vars = vars;
    renamed.head_args = clause.head_args.iter().map(|t| t.subst_evars(&map)).collect();
    renamed.body = clause.body.subst_evars(&map);
    renamed.raise(cs)
}

/// Unifies a raised clause head with an atom under λc⃗; `Ok(None)` when the
/// heads do not unify, error when outside the pattern fragment.
fn unify_atom(
    head: &Formula,
    atom: &Formula,
    cs: &[(String, Ty)],
) -> Result<Option<Subst>, CheckReason> {
    let (hargs, aargs) = match (head, atom) {
        (Formula::Atom(hp, hargs), Formula::Atom(ap, aargs)) if hp == ap => (hargs, aargs),
        _ => return Ok(None),
    };
    if hargs.len() != aargs.len() {
        return Ok(None);
    }
    let mut theta = Subst::identity();
    for (ht, at) in hargs.iter().zip(aargs) {
        let l = theta.apply(ht).close_noms(cs);
        let r = theta.apply(at).close_noms(cs);
        match unify(&UnifProblem { left: l, right: r }) {
            UnifResult::NoUnifier => return Ok(None),
            UnifResult::NotAPattern(t) => return Err(CheckReason::NotAPattern(t.to_string())),
            UnifResult::Mgu(s) => theta = Subst::compose(&theta, &s),
        }
    }
    Ok(Some(theta.minimized()))
}

/// Full recursive check of a derivation against a theory.
pub fn check(d: &Derivation, th: &Theory) -> Result<(), Violation> {
    th.check_stratified().map_err(|e| Violation {
        path: vec![],
        rule: d.rule.name(),
        reason: CheckReason::Unstratified(e.to_string()),
    })?;
    wf_sequent(&d.conclusion, th).map_err(|e| Violation {
        path: vec![],
        rule: d.rule.name(),
        reason: CheckReason::IllFormed(e),
    })?;
    let mut path = Vec::new();
    check_at(d, th, &mut path)
}

fn wf_sequent(seq: &Sequent, th: &Theory) -> Result<(), String> {
    let ctx = th.ctx_with(&seq.sig);
    for f in seq.formulas() {
        if !f.is_closed() {
            return Err(format!("dangling binder index in `{}`", f));
        }
        f.typecheck(&ctx, th).map_err(|e| format!("`{}`: {}", f, e))?;
    }
    Ok(())
}

fn check_at(d: &Derivation, th: &Theory, path: &mut Vec<usize>) -> Result<(), Violation> {
    let expected = premises_of(&d.conclusion, &d.rule, th).map_err(|reason| Violation {
        path: path.clone(),
        rule: d.rule.name(),
        reason,
    })?;
    if expected.len() != d.premises.len() {
        return Err(Violation {
            path: path.clone(),
            rule: d.rule.name(),
            reason: CheckReason::PremiseCount {
                expected: expected.len(),
                found: d.premises.len(),
            },
        });
    }
    for (i, (e, p)) in expected.iter().zip(&d.premises).enumerate() {
        if e != &p.conclusion {
            return Err(Violation {
                path: path.clone(),
                rule: d.rule.name(),
                reason: CheckReason::PremiseMismatch {
                    index: i,
                    expected: e.to_string(),
                    found: p.conclusion.to_string(),
                },
            });
        }
        path.push(i);
        check_at(p, th, path)?;
        path.pop();
    }
    Ok(())
}

/// Forward-construction convenience: validates that the rule applied to the
/// given premises yields `claimed` and returns it.
pub fn conclusion_of(
    rule: &Rule,
    claimed: &Sequent,
    premises: &[Sequent],
    th: &Theory,
) -> Result<Sequent, CheckReason> {
    let expected = premises_of(claimed, rule, th)?;
    if expected.len() != premises.len() {
        return Err(CheckReason::PremiseCount {
            expected: expected.len(),
            found: premises.len(),
        });
    }
    for (i, (e, p)) in expected.iter().zip(premises).enumerate() {
        if e != p {
            return Err(CheckReason::PremiseMismatch {
                index: i,
                expected: e.to_string(),
                found: p.to_string(),
            });
        }
    }
    Ok(claimed.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nm() -> Ty {
        Ty::nominal("nm")
    }

    fn th_basic() -> Theory {
        let mut th = Theory::default();
        th.nominal_types.push("nm".into());
        th.declared_noms
            .insert("nm".into(), vec!["a".into(), "b".into(), "c".into()]);
        th.preds
            .insert("p".into(), (Ty::arrow(nm(), Ty::o()), 0));
        th.preds.insert(
            "q".into(),
            (Ty::arrow(nm(), Ty::arrow(nm(), Ty::o())), 0),
        );
        th.preds.insert("r".into(), (Ty::o(), 0));
        th
    }

    fn pa(n: &str) -> Formula {
        Formula::Atom("p".into(), vec![Term::nom(n, &nm())])
    }

    #[test]
    fn id_with_permutation() {
        // p a ⊢ p b via id with π = id, π' = (a b).
        let th = th_basic();
        let seq = Sequent::new(Signature::new(), vec![pa("a")], pa("b"));
        let swap = Perm::swap(("a", &nm()), ("b", &nm())).unwrap();
        let d = Derivation::leaf(
            seq,
            Rule::IdPi { idx: 0, pi: Perm::identity(), pi_prime: swap },
        );
        assert_eq!(check(&d, &th), Ok(()));

        // Wrong permutation is rejected.
        let seq2 = Sequent::new(Signature::new(), vec![pa("a")], pa("b"));
        let d2 = Derivation::leaf(
            seq2,
            Rule::IdPi { idx: 0, pi: Perm::identity(), pi_prime: Perm::identity() },
        );
        assert!(check(&d2, &th).is_err());
        assert_eq!(d.height(), 0);
        assert!(d.is_cut_free());
    }

    #[test]
    fn nabla_r_freshness() {
        let th = th_basic();
        // ⊢ ∇x. p x, choosing a: fine, body support is empty.
        let body = Formula::Atom("p".into(), vec![Term::bound(0, &nm())]);
        let goal = Formula::nabla(nm(), body.clone());
        let seq = Sequent::new(Signature::new(), vec![], goal.clone());
        let prem = Sequent::new(Signature::new(), vec![], pa("a"));
        let d = Derivation {
            conclusion: seq.clone(),
            rule: Rule::NablaR { nom: "a".into() },
            premises: vec![Derivation::leaf(prem, Rule::TopR)],
        };
        // The premise leaf is nonsense (TopR on p a) — but premises_of for
        // the root must produce p a.
        let ps = premises_of(&seq, &Rule::NablaR { nom: "a".into() }, &th).unwrap();
        assert_eq!(ps[0].right, pa("a"));
        assert!(check(&d, &th).is_err()); // inner TopR is bogus

        // ∇R picking a constant in the support of B is a freshness breach.
        let body2 = Formula::and(
            Formula::Atom("p".into(), vec![Term::bound(0, &nm())]),
            pa("a"),
        );
        let seq2 = Sequent::new(Signature::new(), vec![], Formula::nabla(nm(), body2));
        let r = premises_of(&seq2, &Rule::NablaR { nom: "a".into() }, &th);
        assert!(matches!(r, Err(CheckReason::Freshness { .. })));
    }

    #[test]
    fn forall_r_raising() {
        let th = th_basic();
        // ⊢ ∀x:nm. q x a — support {a}, h : nm → nm, premise q (h a) a.
        let body = Formula::Atom(
            "q".into(),
            vec![Term::bound(0, &nm()), Term::nom("a", &nm())],
        );
        let seq = Sequent::new(Signature::new(), vec![], Formula::forall(nm(), body));
        let ps = premises_of(&seq, &Rule::ForallR { h: "h".into() }, &th).unwrap();
        let hty = Ty::arrow(nm(), nm());
        let ha = Term::apply(&Term::var("h", &hty), &[Term::nom("a", &nm())]);
        assert_eq!(
            ps[0].right,
            Formula::Atom("q".into(), vec![ha, Term::nom("a", &nm())])
        );
        assert_eq!(ps[0].sig.get("h"), Some(&hty));
    }

    #[test]
    fn eq_rules() {
        let th = th_basic();
        // ⊢ a = a closes by eqR.
        let refl = Formula::Eq(Term::nom("a", &nm()), Term::nom("a", &nm()), nm());
        let seq = Sequent::new(Signature::new(), vec![], refl);
        assert_eq!(premises_of(&seq, &Rule::EqR, &th).unwrap().len(), 0);

        // b = a ⊢ ⊥ closes by eqL with zero premises (distinct constants).
        let hyp = Formula::Eq(Term::nom("b", &nm()), Term::nom("a", &nm()), nm());
        let seq2 = Sequent::new(Signature::new(), vec![hyp], Formula::Bot);
        let d = Derivation::leaf(seq2, Rule::EqL { idx: 0 });
        assert_eq!(check(&d, &th), Ok(()));

        // x = a (eigenvariable vs nominal) also has no unifier.
        let mut sig = Signature::new();
        sig.insert("x".into(), nm());
        let hyp2 = Formula::Eq(Term::var("x", &nm()), Term::nom("a", &nm()), nm());
        let seq3 = Sequent::new(sig, vec![hyp2], Formula::Bot);
        let d3 = Derivation::leaf(seq3, Rule::EqL { idx: 0 });
        assert_eq!(check(&d3, &th), Ok(()));
    }

    #[test]
    fn eql_substitutes() {
        let th = {
            let mut th = th_basic();
            th.base_types.push("tm".into());
            th.consts.insert("z".into(), Ty::base("tm"));
            th.preds
                .insert("pt".into(), (Ty::arrow(Ty::base("tm"), Ty::o()), 0));
            th
        };
        let tm = Ty::base("tm");
        // x = z, pt x ⊢ pt z : eqL instantiates x := z.
        let mut sig = Signature::new();
        sig.insert("x".into(), tm.clone());
        let seq = Sequent::new(
            sig,
            vec![
                Formula::Eq(Term::var("x", &tm), Term::konst("z", &tm), tm.clone()),
                Formula::Atom("pt".into(), vec![Term::var("x", &tm)]),
            ],
            Formula::Atom("pt".into(), vec![Term::konst("z", &tm)]),
        );
        let ps = premises_of(&seq, &Rule::EqL { idx: 0 }, &th).unwrap();
        assert_eq!(ps.len(), 1);
        assert_eq!(ps[0].left[0], Formula::Atom("pt".into(), vec![Term::konst("z", &tm)]));
        assert_eq!(ps[0].right, ps[0].left[0]);
        assert!(ps[0].sig.is_empty());
        let d = Derivation {
            conclusion: seq,
            rule: Rule::EqL { idx: 0 },
            premises: vec![Derivation::leaf(
                ps[0].clone(),
                Rule::IdPi { idx: 0, pi: Perm::identity(), pi_prime: Perm::identity() },
            )],
        };
        assert_eq!(check(&d, &th), Ok(()));
    }

    #[test]
    fn mc_partition() {
        let th = th_basic();
        // mc: r ⊢ r (cut on r): premise1 ⊢?? — use Δ₁ = [r], B₁ = r.
        let r = Formula::Atom("r".into(), vec![]);
        let seq = Sequent::new(Signature::new(), vec![r.clone()], r.clone());
        let rule = Rule::Mc { blocks: vec![(0, 1)], cuts: vec![r.clone()] };
        let ps = premises_of(&seq, &rule, &th).unwrap();
        assert_eq!(ps.len(), 2);
        assert_eq!(ps[0], Sequent::new(Signature::new(), vec![r.clone()], r.clone()));
        assert_eq!(ps[1], Sequent::new(Signature::new(), vec![r.clone()], r.clone()));
        let id = |s: &Sequent| {
            Derivation::leaf(
                s.clone(),
                Rule::IdPi { idx: 0, pi: Perm::identity(), pi_prime: Perm::identity() },
            )
        };
        let d = Derivation {
            conclusion: seq,
            rule,
            premises: vec![id(&ps[0]), id(&ps[1])],
        };
        assert_eq!(check(&d, &th), Ok(()));
        assert!(!d.is_cut_free());
        assert_eq!(d.height(), 1);
    }

    #[test]
    fn defr_defl_list() {
        // list nil ≜ ⊤ ; list (cons A L) ≜ list L; prove ⊢ list (cons z nil).
        let lst = Ty::base("lst");
        let tmv = Ty::base("tm");
        let cons = Ty::arrow(tmv.clone(), Ty::arrow(lst.clone(), lst.clone()));
        let mut th = Theory::default();
        th.base_types.extend(["tm".to_string(), "lst".to_string()]);
        th.consts.insert("nil".into(), lst.clone());
        th.consts.insert("cons".into(), cons.clone());
        th.consts.insert("z".into(), tmv.clone());
        th.preds
            .insert("list".into(), (Ty::arrow(lst.clone(), Ty::o()), 0));
        th.clauses.push(crate::formula::DefClause {
            vars: vec![],
            head_pred: "list".into(),
            head_args: vec![Term::konst("nil", &lst)],
            body: Formula::Top,
        });
        th.clauses.push(crate::formula::DefClause {
            vars: vec![("A".into(), tmv.clone()), ("L".into(), lst.clone())],
            head_pred: "list".into(),
            head_args: vec![Term::apply(
                &Term::konst("cons", &cons),
                &[Term::var("A", &tmv), Term::var("L", &lst)],
            )],
            body: Formula::Atom("list".into(), vec![Term::var("L", &lst)]),
        });

        let goal = Formula::Atom(
            "list".into(),
            vec![Term::apply(
                &Term::konst("cons", &cons),
                &[Term::konst("z", &tmv), Term::konst("nil", &lst)],
            )],
        );
        let seq = Sequent::new(Signature::new(), vec![], goal);
        let mut theta = Subst::identity();
        theta.bind("A", &tmv, Term::konst("z", &tmv)).unwrap();
        theta.bind("L", &lst, Term::konst("nil", &lst)).unwrap();
        let ps = premises_of(&seq, &Rule::DefR { clause: 1, theta: theta.clone() }, &th).unwrap();
        assert_eq!(
            ps[0].right,
            Formula::Atom("list".into(), vec![Term::konst("nil", &lst)])
        );
        let inner = Derivation {
            conclusion: ps[0].clone(),
            rule: Rule::DefR { clause: 0, theta: Subst::identity() },
            premises: vec![Derivation::leaf(
                Sequent::new(Signature::new(), vec![], Formula::Top),
                Rule::TopR,
            )],
        };
        let d = Derivation {
            conclusion: seq,
            rule: Rule::DefR { clause: 1, theta },
            premises: vec![inner],
        };
        assert_eq!(check(&d, &th), Ok(()));

        // defL on list (cons z nil) ⊢ list nil: one matching clause.
        let hyp = Formula::Atom(
            "list".into(),
            vec![Term::apply(
                &Term::konst("cons", &cons),
                &[Term::konst("z", &tmv), Term::konst("nil", &lst)],
            )],
        );
        let seq2 = Sequent::new(
            Signature::new(),
            vec![hyp],
            Formula::Atom("list".into(), vec![Term::konst("nil", &lst)]),
        );
        let ps2 = premises_of(&seq2, &Rule::DefL { idx: 0 }, &th).unwrap();
        assert_eq!(ps2.len(), 1);
        assert_eq!(
            ps2[0].left[0],
            Formula::Atom("list".into(), vec![Term::konst("nil", &lst)])
        );
    }

    #[test]
    fn nat_rules() {
        let mut th = Theory::default();
        th.base_types.push("nt".into());
        th.consts.insert("z".into(), Ty::base("nt"));
        th.consts
            .insert("s".into(), Ty::arrow(Ty::base("nt"), Ty::base("nt")));
        let nt = Ty::base("nt");
        let z = Term::konst("z", &nt);
        let sty = Ty::arrow(nt.clone(), nt.clone());
        let s = |t: Term| Term::apply(&Term::konst("s", &sty), &[t]);

        // ⊢ nat (s (s z)) by natR, natR, natR-zero.
        let seq = Sequent::new(Signature::new(), vec![], Formula::Nat(s(s(z.clone()))));
        let p1 = premises_of(&seq, &Rule::NatRSucc, &th).unwrap();
        let p2 = premises_of(&p1[0], &Rule::NatRSucc, &th).unwrap();
        assert_eq!(premises_of(&p2[0], &Rule::NatRZero, &th).unwrap().len(), 0);
        let d = Derivation {
            conclusion: seq,
            rule: Rule::NatRSucc,
            premises: vec![Derivation {
                conclusion: p1[0].clone(),
                rule: Rule::NatRSucc,
                premises: vec![Derivation::leaf(p2[0].clone(), Rule::NatRZero)],
            }],
        };
        assert_eq!(check(&d, &th), Ok(()));

        // natL: nat n ⊢ nat (s n) with invariant D = λj. nat (s j).
        let mut sig = Signature::new();
        sig.insert("n".into(), nt.clone());
        let n = Term::var("n", &nt);
        let seq2 = Sequent::new(
            sig,
            vec![Formula::Nat(n.clone())],
            Formula::Nat(s(n.clone())),
        );
        let inv = Formula::Nat(s(Term::bound(0, &nt)));
        let rule = Rule::NatL { idx: 0, inv: inv.clone(), j: "j".into() };
        let ps = premises_of(&seq2, &rule, &th).unwrap();
        assert_eq!(ps.len(), 3);
        assert_eq!(ps[0].right, Formula::Nat(s(z.clone())));
        let jv = Term::var("j", &nt);
        assert_eq!(ps[1].left[0], Formula::Nat(s(jv.clone())));
        assert_eq!(ps[1].right, Formula::Nat(s(s(jv))));
        assert_eq!(ps[2].left[0], Formula::Nat(s(n.clone())));
    }

    #[test]
    fn serialization_roundtrip() {
        let th = th_basic();
        let seq = Sequent::new(Signature::new(), vec![pa("a")], pa("b"));
        let swap = Perm::swap(("a", &nm()), ("b", &nm())).unwrap();
        let d = Derivation::leaf(
            seq,
            Rule::IdPi { idx: 0, pi: Perm::identity(), pi_prime: swap },
        );
        let json = serde_json::to_string(&d).unwrap();
        let back: Derivation = serde_json::from_str(&json).unwrap();
        assert_eq!(d, back);
        assert_eq!(json, serde_json::to_string(&back).unwrap());
        assert_eq!(check(&back, &th), Ok(()));
    }

    #[test]
    fn conclusion_of_roundtrip() {
        let th = th_basic();
        let seq = Sequent::new(Signature::new(), vec![pa("a")], Formula::Top);
        let c = conclusion_of(&Rule::TopR, &seq, &[], &th).unwrap();
        assert_eq!(c, seq);
        assert!(conclusion_of(&Rule::TopR, &seq, std::slice::from_ref(&seq), &th).is_err());
    }
}
