//! A local-signature presentation of the core calculus.  Sequent hypotheses
//! and goals each carry an ordered list of local names; renaming, swapping
//! and signature-weakening steps that are implicit in the kernel become
//! explicit inference rules here.  The module provides a checker for the
//! theory-free fragment (no equality, definitions or induction) and
//! structure-preserving translations in both directions.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::{Formula, Theory};
use crate::kernel::{premises_of, Derivation, Rule, Sequent, Signature};
use crate::term::{fresh_name, Perm, Subst, Term, Ty};
use crate::transform::{
    noms, perm_derivation, rebuild, subst_derivation, weaken, TransformError,
};

// ---------------------------------------------------------------------------
// Sequents with local signatures
// ---------------------------------------------------------------------------

/// A formula together with the ordered list of local names it may mention.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalJudgment {
    pub names: Vec<(String, Ty)>,
    pub formula: Formula,
}

impl LocalJudgment {
    pub fn new(names: Vec<(String, Ty)>, formula: Formula) -> LocalJudgment {
        LocalJudgment { names, formula }
    }

    /// The judgment's formula treats its local names as nominal constants,
    /// so well-formedness is: distinct nominal-typed names, a closed
    /// theory-free formula whose support lies inside the name list.
    fn wf(&self, sig: &Signature, th: &Theory) -> Result<(), String> {
        let mut seen = BTreeSet::new();
        for (n, ty) in &self.names {
            if !seen.insert(n.clone()) {
                return Err(format!("local name `{}` repeats", n));
            }
            if !ty.is_nominal_base() {
                return Err(format!("local name `{}` has non-nominal type {}", n, ty));
            }
        }
        if !self.formula.is_closed() {
            return Err(format!("`{}` has dangling indices", self.formula));
        }
        if !theory_free(&self.formula) {
            return Err(format!(
                "`{}` uses equality, nat or a defined notion outside this calculus",
                self.formula
            ));
        }
        self.formula
            .typecheck(&th.ctx_with(sig), th)
            .map_err(|e| format!("`{}`: {}", self.formula, e))?;
        for (n, ty) in self.formula.support() {
            if !self.names.contains(&(n.clone(), ty.clone())) {
                return Err(format!(
                    "`{}` mentions `{}` outside its local signature",
                    self.formula, n
                ));
            }
        }
        Ok(())
    }

    /// α-renames the whole local signature to `names`, returning the
    /// renamed judgment and the permutation that realizes the renaming.
    pub fn rename(&self, names: &[String]) -> Result<(LocalJudgment, Perm), String> {
        let p = rename_perm(&self.names, names)?;
        let new_names = names
            .iter()
            .zip(&self.names)
            .map(|(n, (_, ty))| (n.clone(), ty.clone()))
            .collect();
        Ok((LocalJudgment::new(new_names, self.formula.perm(&p)), p))
    }
}

/// A permutation sending each of `from` to the like-positioned name in
/// `to`, completed to a bijection on the leftover names of each type.
fn rename_perm(from: &[(String, Ty)], to: &[String]) -> Result<Perm, String> {
    if from.len() != to.len() {
        return Err(format!("renaming {} names to {}", from.len(), to.len()));
    }
    let mut seen = BTreeSet::new();
    for n in to {
        if !seen.insert(n.clone()) {
            return Err(format!("renamed signature repeats `{}`", n));
        }
    }
    let src: BTreeSet<&String> = from.iter().map(|(n, _)| n).collect();
    let img: BTreeSet<&String> = to.iter().collect();
    let mut pairs: Vec<((String, Ty), String)> = from
        .iter()
        .zip(to)
        .map(|((a, ty), b)| ((a.clone(), ty.clone()), b.clone()))
        .collect();
    // Names that appear only as images must be sent back to names that
    // appear only as sources, type by type, to close the bijection.
    let mut spare: Vec<(String, Ty)> = from
        .iter()
        .filter(|(a, _)| !img.contains(a))
        .cloned()
        .collect();
    for (b, (_, ty)) in to.iter().zip(from) {
        if src.contains(b) {
            continue;
        }
        let Some(k) = spare.iter().position(|(_, t)| t == ty) else {
            return Err(format!("no {}-typed name left to complete the renaming", ty));
        };
        let (a, aty) = spare.remove(k);
        pairs.push(((b.clone(), aty), a));
    }
    Perm::from_pairs(&pairs).map_err(|e| e.to_string())
}

/// A sequent whose hypotheses and goal are local judgments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FSequent {
    pub sig: Signature,
    pub left: Vec<LocalJudgment>,
    pub right: LocalJudgment,
}

impl FSequent {
    pub fn new(sig: Signature, left: Vec<LocalJudgment>, right: LocalJudgment) -> FSequent {
        FSequent { sig, left, right }
    }

    fn wf(&self, th: &Theory) -> Result<(), String> {
        for j in self.left.iter().chain(std::iter::once(&self.right)) {
            j.wf(&self.sig, th)?;
        }
        Ok(())
    }
}

fn theory_free(f: &Formula) -> bool {
    match f {
        Formula::Bot | Formula::Top | Formula::Atom(..) => true,
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Imp(a, b) => {
            theory_free(a) && theory_free(b)
        }
        Formula::Forall(_, b) | Formula::Exists(_, b) | Formula::Nabla(_, b) => theory_free(b),
        Formula::Eq(..) | Formula::Nat(..) => false,
    }
}

// ---------------------------------------------------------------------------
// Rules and derivations
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum FRule {
    /// Hypothesis `idx` is identical to the goal, names included.
    Id { idx: usize },
    /// Splits the context at `split`: the first part proves `judgment`,
    /// which joins the remainder to prove the goal.
    Cut { split: usize, judgment: LocalJudgment },
    /// Copies hypothesis `idx`, inserting the copy at `dup`.
    CL { idx: usize, dup: usize },
    /// Drops hypothesis `idx`.
    WL { idx: usize },
    BotL { idx: usize },
    TopR,
    /// Replaces `σ ▷ B ∧ C` by the two judgments `σ ▷ B` and `σ ▷ C`.
    AndL { idx: usize },
    AndR,
    OrL { idx: usize },
    OrR { which: u8 },
    ImpL { idx: usize },
    /// Appends the antecedent's judgment at the end of the context.
    ImpR,
    ForallL { idx: usize, witness: Term },
    /// Raises `h` over the goal's whole local signature, in order.
    ForallR { h: String },
    ExistsL { idx: usize, h: String },
    ExistsR { witness: Term },
    /// Extends the local signature at the end with the fresh name.
    NablaL { idx: usize, name: String },
    NablaR { name: String },
    /// α-renames the whole local signature of hypothesis `idx` to `names`.
    AlphaL { idx: usize, names: Vec<String> },
    AlphaR { names: Vec<String> },
    /// Swaps the adjacent local names at `pos` and `pos + 1`.
    PL { idx: usize, pos: usize },
    PR { pos: usize },
    /// The premise carries an extra unused local name at `pos`.
    SsL { idx: usize, pos: usize, name: String, ty: Ty },
    SsR { pos: usize, name: String, ty: Ty },
    /// Drops the unused local name at `pos` going up.
    WsL { idx: usize, pos: usize },
    WsR { pos: usize },
}

impl FRule {
    pub fn name(&self) -> &'static str {
        match self {
            FRule::Id { .. } => "id",
            FRule::Cut { .. } => "cut",
            FRule::CL { .. } => "cL",
            FRule::WL { .. } => "wL",
            FRule::BotL { .. } => "botL",
            FRule::TopR => "topR",
            FRule::AndL { .. } => "andL",
            FRule::AndR => "andR",
            FRule::OrL { .. } => "orL",
            FRule::OrR { .. } => "orR",
            FRule::ImpL { .. } => "impL",
            FRule::ImpR => "impR",
            FRule::ForallL { .. } => "forallL",
            FRule::ForallR { .. } => "forallR",
            FRule::ExistsL { .. } => "existsL",
            FRule::ExistsR { .. } => "existsR",
            FRule::NablaL { .. } => "nablaL",
            FRule::NablaR { .. } => "nablaR",
            FRule::AlphaL { .. } => "alphaL",
            FRule::AlphaR { .. } => "alphaR",
            FRule::PL { .. } => "pL",
            FRule::PR { .. } => "pR",
            FRule::SsL { .. } => "ssL",
            FRule::SsR { .. } => "ssR",
            FRule::WsL { .. } => "wsL",
            FRule::WsR { .. } => "wsR",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FDerivation {
    pub conclusion: FSequent,
    pub rule: FRule,
    pub premises: Vec<FDerivation>,
}

impl FDerivation {
    pub fn height(&self) -> usize {
        1 + self.premises.iter().map(FDerivation::height).max().unwrap_or(0)
    }
}

#[derive(Debug, Error)]
#[error("local-signature check failed at {path:?} ({rule}): {reason}")]
pub struct FViolation {
    pub path: Vec<usize>,
    pub rule: &'static str,
    pub reason: String,
}

// ---------------------------------------------------------------------------
// The checker
// ---------------------------------------------------------------------------

/// Computes the premise sequents that `rule` demands below `seq`.
pub fn fpremises_of(seq: &FSequent, rule: &FRule, th: &Theory) -> Result<Vec<FSequent>, String> {
    let left = &seq.left;
    let grab = |idx: usize| -> Result<&LocalJudgment, String> {
        left.get(idx).ok_or_else(|| format!("hypothesis index {} out of range", idx))
    };
    let replaced = |idx: usize, js: Vec<LocalJudgment>| -> Vec<LocalJudgment> {
        let mut l = left.clone();
        l.splice(idx..idx + 1, js);
        l
    };
    let same_goal = |l: Vec<LocalJudgment>| -> FSequent {
        FSequent::new(seq.sig.clone(), l, seq.right.clone())
    };
    let new_goal =
        |j: LocalJudgment| -> FSequent { FSequent::new(seq.sig.clone(), left.clone(), j) };
    let principal = |j: &LocalJudgment, want: &str| -> String {
        format!("`{}` is not a {} principal", j.formula, want)
    };
    match rule {
        FRule::Id { idx } => {
            let j = grab(*idx)?;
            if j != &seq.right {
                return Err(format!(
                    "hypothesis `{}` differs from the goal `{}`",
                    j.formula, seq.right.formula
                ));
            }
            Ok(vec![])
        }
        FRule::Cut { split, judgment } => {
            if *split > left.len() {
                return Err(format!("cut split {} out of range", split));
            }
            judgment.wf(&seq.sig, th)?;
            let mut rctx = vec![judgment.clone()];
            rctx.extend(left[*split..].iter().cloned());
            Ok(vec![
                FSequent::new(seq.sig.clone(), left[..*split].to_vec(), judgment.clone()),
                FSequent::new(seq.sig.clone(), rctx, seq.right.clone()),
            ])
        }
        FRule::CL { idx, dup } => {
            let j = grab(*idx)?.clone();
            if *dup > left.len() {
                return Err(format!("contraction position {} out of range", dup));
            }
            let mut l = left.clone();
            l.insert(*dup, j);
            Ok(vec![same_goal(l)])
        }
        FRule::WL { idx } => {
            grab(*idx)?;
            let mut l = left.clone();
            l.remove(*idx);
            Ok(vec![same_goal(l)])
        }
        FRule::BotL { idx } => match &grab(*idx)?.formula {
            Formula::Bot => Ok(vec![]),
            _ => Err(principal(grab(*idx)?, "⊥")),
        },
        FRule::TopR => match &seq.right.formula {
            Formula::Top => Ok(vec![]),
            _ => Err(principal(&seq.right, "⊤")),
        },
        FRule::AndL { idx } => {
            let j = grab(*idx)?;
            match &j.formula {
                Formula::And(b, c) => {
                    let jb = LocalJudgment::new(j.names.clone(), (**b).clone());
                    let jc = LocalJudgment::new(j.names.clone(), (**c).clone());
                    Ok(vec![same_goal(replaced(*idx, vec![jb, jc]))])
                }
                _ => Err(principal(j, "∧")),
            }
        }
        FRule::AndR => match &seq.right.formula {
            Formula::And(b, c) => Ok(vec![
                new_goal(LocalJudgment::new(seq.right.names.clone(), (**b).clone())),
                new_goal(LocalJudgment::new(seq.right.names.clone(), (**c).clone())),
            ]),
            _ => Err(principal(&seq.right, "∧")),
        },
        FRule::OrL { idx } => {
            let j = grab(*idx)?;
            match &j.formula {
                Formula::Or(b, c) => {
                    let jb = LocalJudgment::new(j.names.clone(), (**b).clone());
                    let jc = LocalJudgment::new(j.names.clone(), (**c).clone());
                    Ok(vec![
                        same_goal(replaced(*idx, vec![jb])),
                        same_goal(replaced(*idx, vec![jc])),
                    ])
                }
                _ => Err(principal(j, "∨")),
            }
        }
        FRule::OrR { which } => match &seq.right.formula {
            Formula::Or(b1, b2) => {
                let b = if *which == 1 { b1 } else { b2 };
                Ok(vec![new_goal(LocalJudgment::new(seq.right.names.clone(), (**b).clone()))])
            }
            _ => Err(principal(&seq.right, "∨")),
        },
        FRule::ImpL { idx } => {
            let j = grab(*idx)?;
            match &j.formula {
                Formula::Imp(b, c) => {
                    let jb = LocalJudgment::new(j.names.clone(), (**b).clone());
                    let jc = LocalJudgment::new(j.names.clone(), (**c).clone());
                    let mut l = left.clone();
                    l.remove(*idx);
                    Ok(vec![
                        FSequent::new(seq.sig.clone(), l, jb),
                        same_goal(replaced(*idx, vec![jc])),
                    ])
                }
                _ => Err(principal(j, "⊃")),
            }
        }
        FRule::ImpR => match &seq.right.formula {
            Formula::Imp(b, c) => {
                let mut l = left.clone();
                l.push(LocalJudgment::new(seq.right.names.clone(), (**b).clone()));
                Ok(vec![FSequent::new(
                    seq.sig.clone(),
                    l,
                    LocalJudgment::new(seq.right.names.clone(), (**c).clone()),
                )])
            }
            _ => Err(principal(&seq.right, "⊃")),
        },
        FRule::ForallL { idx, witness } => {
            let j = grab(*idx)?;
            match &j.formula {
                Formula::Forall(ty, body) => {
                    check_fwitness(witness, ty, &j.names, &seq.sig, th)?;
                    let jb = LocalJudgment::new(j.names.clone(), body.open(witness));
                    Ok(vec![same_goal(replaced(*idx, vec![jb]))])
                }
                _ => Err(principal(j, "∀")),
            }
        }
        FRule::ForallR { h } => match &seq.right.formula.clone() {
            Formula::Forall(ty, body) => {
                let (goal, sig) = raise_over(h, ty, body, &seq.right.names, &seq.sig)?;
                Ok(vec![FSequent::new(
                    sig,
                    left.clone(),
                    LocalJudgment::new(seq.right.names.clone(), goal),
                )])
            }
            _ => Err(principal(&seq.right, "∀")),
        },
        FRule::ExistsL { idx, h } => {
            let j = grab(*idx)?.clone();
            match &j.formula {
                Formula::Exists(ty, body) => {
                    let (opened, sig) = raise_over(h, ty, body, &j.names, &seq.sig)?;
                    Ok(vec![FSequent::new(
                        sig,
                        replaced(*idx, vec![LocalJudgment::new(j.names.clone(), opened)]),
                        seq.right.clone(),
                    )])
                }
                _ => Err(principal(&j, "∃")),
            }
        }
        FRule::ExistsR { witness } => match &seq.right.formula {
            Formula::Exists(ty, body) => {
                check_fwitness(witness, ty, &seq.right.names, &seq.sig, th)?;
                Ok(vec![new_goal(LocalJudgment::new(
                    seq.right.names.clone(),
                    body.open(witness),
                ))])
            }
            _ => Err(principal(&seq.right, "∃")),
        },
        FRule::NablaL { idx, name } => {
            let j = grab(*idx)?;
            match &j.formula {
                Formula::Nabla(ty, body) => {
                    let jn = nabla_judgment(name, ty, body, &j.names)?;
                    Ok(vec![same_goal(replaced(*idx, vec![jn]))])
                }
                _ => Err(principal(j, "∇")),
            }
        }
        FRule::NablaR { name } => match &seq.right.formula {
            Formula::Nabla(ty, body) => {
                Ok(vec![new_goal(nabla_judgment(name, ty, body, &seq.right.names)?)])
            }
            _ => Err(principal(&seq.right, "∇")),
        },
        FRule::AlphaL { idx, names } => {
            let (j, _) = grab(*idx)?.rename(names)?;
            Ok(vec![same_goal(replaced(*idx, vec![j]))])
        }
        FRule::AlphaR { names } => {
            let (j, _) = seq.right.rename(names)?;
            Ok(vec![new_goal(j)])
        }
        FRule::PL { idx, pos } => {
            let j = swap_names(grab(*idx)?, *pos)?;
            Ok(vec![same_goal(replaced(*idx, vec![j]))])
        }
        FRule::PR { pos } => Ok(vec![new_goal(swap_names(&seq.right, *pos)?)]),
        FRule::SsL { idx, pos, name, ty } => {
            let j = insert_name(grab(*idx)?, *pos, name, ty)?;
            Ok(vec![same_goal(replaced(*idx, vec![j]))])
        }
        FRule::SsR { pos, name, ty } => {
            Ok(vec![new_goal(insert_name(&seq.right, *pos, name, ty)?)])
        }
        FRule::WsL { idx, pos } => {
            let j = remove_name(grab(*idx)?, *pos)?;
            Ok(vec![same_goal(replaced(*idx, vec![j]))])
        }
        FRule::WsR { pos } => Ok(vec![new_goal(remove_name(&seq.right, *pos)?)]),
    }
}

fn check_fwitness(
    w: &Term,
    ty: &Ty,
    names: &[(String, Ty)],
    sig: &Signature,
    th: &Theory,
) -> Result<(), String> {
    if !w.closed_under(0) {
        return Err(format!("witness `{}` has dangling indices", w));
    }
    let found = w.typecheck(&th.ctx_with(sig)).map_err(|e| format!("witness `{}`: {}", w, e))?;
    if &found != ty {
        return Err(format!("witness `{}` has type {}, the quantifier needs {}", w, found, ty));
    }
    for (n, t) in w.support() {
        if !names.contains(&(n.clone(), t.clone())) {
            return Err(format!("witness `{}` mentions `{}` outside the local signature", w, n));
        }
    }
    Ok(())
}

/// Raises `h` over the *whole* local signature, in signature order.
fn raise_over(
    h: &str,
    ty: &Ty,
    body: &Formula,
    names: &[(String, Ty)],
    sig: &Signature,
) -> Result<(Formula, Signature), String> {
    if sig.contains_key(h) {
        return Err(format!("raised variable `{}` is not fresh", h));
    }
    let hty = ty.raise(names);
    let happ = Term::apply(&Term::var(h, &hty), &noms(names));
    let mut sig = sig.clone();
    sig.insert(h.to_string(), hty);
    Ok((body.open(&happ), sig))
}

fn nabla_judgment(
    name: &str,
    ty: &Ty,
    body: &Formula,
    names: &[(String, Ty)],
) -> Result<LocalJudgment, String> {
    if !ty.is_nominal_base() {
        return Err(format!("∇ binds the non-nominal type {}", ty));
    }
    if names.iter().any(|(n, _)| n == name) {
        return Err(format!("`{}` already occurs in the local signature", name));
    }
    let mut ns = names.to_vec();
    ns.push((name.to_string(), ty.clone()));
    Ok(LocalJudgment::new(ns, body.open(&Term::nom(name, ty))))
}

fn swap_names(j: &LocalJudgment, pos: usize) -> Result<LocalJudgment, String> {
    if pos + 1 >= j.names.len() {
        return Err(format!("swap position {} out of range", pos));
    }
    let mut ns = j.names.clone();
    ns.swap(pos, pos + 1);
    Ok(LocalJudgment::new(ns, j.formula.clone()))
}

fn insert_name(j: &LocalJudgment, pos: usize, name: &str, ty: &Ty) -> Result<LocalJudgment, String> {
    if pos > j.names.len() {
        return Err(format!("insertion position {} out of range", pos));
    }
    if !ty.is_nominal_base() {
        return Err(format!("inserted name `{}` has non-nominal type {}", name, ty));
    }
    if j.names.iter().any(|(n, _)| n == name) {
        return Err(format!("`{}` already occurs in the local signature", name));
    }
    let mut ns = j.names.clone();
    ns.insert(pos, (name.to_string(), ty.clone()));
    Ok(LocalJudgment::new(ns, j.formula.clone()))
}

fn remove_name(j: &LocalJudgment, pos: usize) -> Result<LocalJudgment, String> {
    let Some((n, _)) = j.names.get(pos) else {
        return Err(format!("removal position {} out of range", pos));
    };
    if j.formula.support_names().contains(n) {
        return Err(format!("`{}` occurs in `{}`", n, j.formula));
    }
    let mut ns = j.names.clone();
    ns.remove(pos);
    Ok(LocalJudgment::new(ns, j.formula.clone()))
}

/// Checks a local-signature derivation: every node's conclusion is
/// well-formed and its stored premises are exactly the ones its rule
/// demands.
pub fn check_folnb(d: &FDerivation, th: &Theory) -> Result<(), FViolation> {
    let mut path = Vec::new();
    check_at(d, th, &mut path)
}

fn check_at(d: &FDerivation, th: &Theory, path: &mut Vec<usize>) -> Result<(), FViolation> {
    fn vio(path: &[usize], d: &FDerivation, reason: String) -> FViolation {
        FViolation { path: path.to_vec(), rule: d.rule.name(), reason }
    }
    d.conclusion.wf(th).map_err(|r| vio(path, d, r))?;
    let want = fpremises_of(&d.conclusion, &d.rule, th).map_err(|r| vio(path, d, r))?;
    if want.len() != d.premises.len() {
        return Err(vio(
            path,
            d,
            format!("expected {} premises, found {}", want.len(), d.premises.len()),
        ));
    }
    for (i, (w, p)) in want.iter().zip(&d.premises).enumerate() {
        if *w != p.conclusion {
            return Err(vio(path, d, format!("premise {} does not conclude the demanded sequent", i)));
        }
        path.push(i);
        check_at(p, th, path)?;
        path.pop();
    }
    Ok(())
}

/// Builds a node after validating it the same way `check_folnb` would.
fn fnode(
    conclusion: FSequent,
    rule: FRule,
    premises: Vec<FDerivation>,
    th: &Theory,
) -> Result<FDerivation, FViolation> {
    let d = FDerivation { conclusion, rule, premises };
    let vio = |reason: String| FViolation { path: vec![], rule: d.rule.name(), reason };
    d.conclusion.wf(th).map_err(vio)?;
    let want = fpremises_of(&d.conclusion, &d.rule, th)
        .map_err(|r| FViolation { path: vec![], rule: d.rule.name(), reason: r })?;
    if want.len() != d.premises.len() {
        return Err(FViolation {
            path: vec![],
            rule: d.rule.name(),
            reason: format!("expected {} premises, found {}", want.len(), d.premises.len()),
        });
    }
    for (i, (w, p)) in want.iter().zip(&d.premises).enumerate() {
        if *w != p.conclusion {
            return Err(FViolation {
                path: vec![],
                rule: d.rule.name(),
                reason: format!("premise {} does not conclude the demanded sequent", i),
            });
        }
    }
    Ok(d)
}

// ---------------------------------------------------------------------------
// Translation: kernel to local signatures
// ---------------------------------------------------------------------------

#[derive(Debug, Error)]
pub enum BridgeError {
    #[error("rule {0} lies outside the translated fragment")]
    Fragment(&'static str),
    #[error(transparent)]
    Check(#[from] FViolation),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error("{0}")]
    Internal(String),
}

fn internal<T>(msg: impl Into<String>) -> Result<T, BridgeError> {
    Err(BridgeError::Internal(msg.into()))
}

/// The local judgment of a kernel formula: its support, enumerated left to
/// right, becomes the local signature.
pub fn judgment_of(f: &Formula) -> LocalJudgment {
    LocalJudgment::new(f.support(), f.clone())
}

/// The local-signature sequent corresponding to a kernel sequent.
pub fn fsequent_of(seq: &Sequent) -> FSequent {
    FSequent::new(
        seq.sig.clone(),
        seq.left.iter().map(judgment_of).collect(),
        judgment_of(&seq.right),
    )
}

/// Drops the local signatures; their names persist in the formulas as
/// nominal constants, so no renaming table is needed.
pub fn strip(fs: &FSequent) -> Sequent {
    Sequent::new(
        fs.sig.clone(),
        fs.left.iter().map(|j| j.formula.clone()).collect(),
        fs.right.formula.clone(),
    )
}

/// Bookkeeping steps that turn the name list `cur` into `target` going up:
/// first `ws` drops of names missing from `target`, then adjacent `p`
/// swaps.  `idx` selects a hypothesis; `None` targets the goal.
fn reorder_rules(
    idx: Option<usize>,
    cur: &[(String, Ty)],
    target: &[(String, Ty)],
) -> Result<Vec<FRule>, BridgeError> {
    let ws = |pos: usize| match idx {
        Some(i) => FRule::WsL { idx: i, pos },
        None => FRule::WsR { pos },
    };
    let pp = |pos: usize| match idx {
        Some(i) => FRule::PL { idx: i, pos },
        None => FRule::PR { pos },
    };
    let mut out = Vec::new();
    let mut work: Vec<(String, Ty)> = cur.to_vec();
    for pos in (0..work.len()).rev() {
        if !target.contains(&work[pos]) {
            out.push(ws(pos));
            work.remove(pos);
        }
    }
    if work.len() != target.len() {
        return internal("target signature is not a sub-signature");
    }
    for i in 0..target.len() {
        let Some(off) = work[i..].iter().position(|e| e == &target[i]) else {
            return internal(format!("missing `{}` while reordering", target[i].0));
        };
        for k in (i..i + off).rev() {
            out.push(pp(k));
            work.swap(k, k + 1);
        }
    }
    Ok(out)
}

/// Applies `rules` (all unary) below `inner`, checking that the chain lands
/// exactly on `inner`'s conclusion.
fn wrap(
    seq: FSequent,
    rules: Vec<FRule>,
    inner: FDerivation,
    th: &Theory,
) -> Result<FDerivation, BridgeError> {
    let mut cur = seq;
    let mut stack = Vec::new();
    for r in rules {
        let prems = fpremises_of(&cur, &r, th).map_err(BridgeError::Internal)?;
        if prems.len() != 1 {
            return internal("bookkeeping step is not unary");
        }
        stack.push((cur, r));
        cur = prems.into_iter().next().unwrap();
    }
    if cur != inner.conclusion {
        return internal("bookkeeping chain misses its target sequent");
    }
    let mut d = inner;
    for (s, r) in stack.into_iter().rev() {
        d = FDerivation { conclusion: s, rule: r, premises: vec![d] };
    }
    Ok(d)
}

fn apply_rules(mut s: FSequent, rules: &[FRule], th: &Theory) -> Result<FSequent, BridgeError> {
    for r in rules {
        let prems = fpremises_of(&s, r, th).map_err(BridgeError::Internal)?;
        if prems.len() != 1 {
            return internal("bookkeeping step is not unary");
        }
        s = prems.into_iter().next().unwrap();
    }
    Ok(s)
}

/// Inserts ws/p steps below `inner` so it proves `seq` instead; the two
/// sequents may differ only in the name lists of same-formula judgments.
fn adjust(seq: FSequent, inner: FDerivation, th: &Theory) -> Result<FDerivation, BridgeError> {
    if seq == inner.conclusion {
        return Ok(inner);
    }
    if seq.sig != inner.conclusion.sig || seq.left.len() != inner.conclusion.left.len() {
        return internal("adjustment across different sequent shapes");
    }
    let mut rules = Vec::new();
    for (i, (a, b)) in seq.left.iter().zip(&inner.conclusion.left).enumerate() {
        if a != b {
            if a.formula != b.formula {
                return internal("adjustment would change a hypothesis");
            }
            rules.extend(reorder_rules(Some(i), &a.names, &b.names)?);
        }
    }
    if seq.right != inner.conclusion.right {
        if seq.right.formula != inner.conclusion.right.formula {
            return internal("adjustment would change the goal");
        }
        rules.extend(reorder_rules(None, &seq.right.names, &inner.conclusion.right.names)?);
    }
    wrap(seq, rules, inner, th)
}

/// `ss` insertions appending `extras` at the end of a judgment's signature.
fn extend_rules(idx: Option<usize>, from: usize, extras: &[(String, Ty)]) -> Vec<FRule> {
    extras
        .iter()
        .enumerate()
        .map(|(k, (n, t))| match idx {
            Some(i) => FRule::SsL { idx: i, pos: from + k, name: n.clone(), ty: t.clone() },
            None => FRule::SsR { pos: from + k, name: n.clone(), ty: t.clone() },
        })
        .collect()
}

/// Names the witness mentions beyond the principal's local signature.
fn witness_extras(witness: &Term, names: &[(String, Ty)]) -> Vec<(String, Ty)> {
    let mut extras = Vec::new();
    for e in witness.support() {
        if !names.contains(&e) && !extras.contains(&e) {
            extras.push(e);
        }
    }
    extras
}

/// Translates a cut-free core-fragment kernel derivation into the
/// local-signature calculus.  Every judgment of the end-sequent carries the
/// left-to-right support enumeration of its formula.
pub fn lg_to_folnb(d: &Derivation, th: &Theory) -> Result<FDerivation, BridgeError> {
    let concl = fsequent_of(&d.conclusion);
    let rec = |i: usize| lg_to_folnb(&d.premises[i], th);
    // Core rules whose translation is the like-named rule followed by
    // ws/p adjustments on each premise.
    let simple = |frule: FRule, recs: Vec<FDerivation>| -> Result<FDerivation, BridgeError> {
        let prem_seqs = fpremises_of(&concl, &frule, th).map_err(BridgeError::Internal)?;
        if prem_seqs.len() != recs.len() {
            return internal("premise count mismatch in translation");
        }
        let adj = prem_seqs
            .into_iter()
            .zip(recs)
            .map(|(s, r)| adjust(s, r, th))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(fnode(concl.clone(), frule, adj, th)?)
    };
    match &d.rule {
        Rule::IdPi { idx, pi, pi_prime } => {
            if concl.left[*idx] == concl.right {
                return Ok(fnode(concl, FRule::Id { idx: *idx }, vec![], th)?);
            }
            let rho = Perm::compose(pi, &pi_prime.inverse());
            let names: Vec<String> =
                concl.left[*idx].names.iter().map(|(n, _)| rho.image(n)).collect();
            let alpha = FRule::AlphaL { idx: *idx, names };
            let prem = apply_rules(concl.clone(), std::slice::from_ref(&alpha), th)?;
            let leaf = fnode(prem, FRule::Id { idx: *idx }, vec![], th)?;
            Ok(fnode(concl, alpha, vec![leaf], th)?)
        }
        Rule::CL { idx, dup } => simple(FRule::CL { idx: *idx, dup: *dup }, vec![rec(0)?]),
        Rule::BotL { idx } => simple(FRule::BotL { idx: *idx }, vec![]),
        Rule::TopR => simple(FRule::TopR, vec![]),
        Rule::AndL { idx, which } => {
            // The local-signature ∧L keeps both conjuncts; drop the one the
            // kernel discards, then adjust the survivor's signature.
            let and = FRule::AndL { idx: *idx };
            let s1 = apply_rules(concl.clone(), std::slice::from_ref(&and), th)?;
            let drop = FRule::WL { idx: if *which == 1 { idx + 1 } else { *idx } };
            let s2 = apply_rules(s1.clone(), std::slice::from_ref(&drop), th)?;
            let top = adjust(s2, rec(0)?, th)?;
            let mid = fnode(s1, drop, vec![top], th)?;
            Ok(fnode(concl, and, vec![mid], th)?)
        }
        Rule::AndR => simple(FRule::AndR, vec![rec(0)?, rec(1)?]),
        Rule::OrL { idx } => simple(FRule::OrL { idx: *idx }, vec![rec(0)?, rec(1)?]),
        Rule::OrR { which } => simple(FRule::OrR { which: *which }, vec![rec(0)?]),
        Rule::ImpL { idx } => simple(FRule::ImpL { idx: *idx }, vec![rec(0)?, rec(1)?]),
        Rule::ImpR => simple(FRule::ImpR, vec![rec(0)?]),
        Rule::ForallL { idx, witness } => {
            // Names the witness introduces are pushed into the local
            // signature by ss steps before the rule fires.
            let extras = witness_extras(witness, &concl.left[*idx].names);
            let pre = extend_rules(Some(*idx), concl.left[*idx].names.len(), &extras);
            let s_ext = apply_rules(concl.clone(), &pre, th)?;
            let core = FRule::ForallL { idx: *idx, witness: witness.clone() };
            let s_prem = apply_rules(s_ext.clone(), std::slice::from_ref(&core), th)?;
            let top = adjust(s_prem, rec(0)?, th)?;
            let mid = fnode(s_ext, core, vec![top], th)?;
            wrap(concl, pre, mid, th)
        }
        Rule::ExistsR { witness } => {
            let extras = witness_extras(witness, &concl.right.names);
            let pre = extend_rules(None, concl.right.names.len(), &extras);
            let s_ext = apply_rules(concl.clone(), &pre, th)?;
            let core = FRule::ExistsR { witness: witness.clone() };
            let s_prem = apply_rules(s_ext.clone(), std::slice::from_ref(&core), th)?;
            let top = adjust(s_prem, rec(0)?, th)?;
            let mid = fnode(s_ext, core, vec![top], th)?;
            wrap(concl, pre, mid, th)
        }
        Rule::ForallR { h } => simple(FRule::ForallR { h: h.clone() }, vec![rec(0)?]),
        Rule::ExistsL { idx, h } => {
            simple(FRule::ExistsL { idx: *idx, h: h.clone() }, vec![rec(0)?])
        }
        Rule::NablaL { idx, nom } => {
            simple(FRule::NablaL { idx: *idx, name: nom.clone() }, vec![rec(0)?])
        }
        Rule::NablaR { nom } => simple(FRule::NablaR { name: nom.clone() }, vec![rec(0)?]),
        Rule::Mc { .. }
        | Rule::EqL { .. }
        | Rule::EqR
        | Rule::DefL { .. }
        | Rule::DefR { .. }
        | Rule::NatL { .. }
        | Rule::NatRZero
        | Rule::NatRSucc => Err(BridgeError::Fragment(d.rule.name())),
    }
}

// ---------------------------------------------------------------------------
// Translation: local signatures to kernel
// ---------------------------------------------------------------------------

/// Translates a local-signature derivation back into the kernel.  Local
/// names are realized as nominal constants (they already are ones), so the
/// end-sequent is the conclusion with its local signatures dropped.
pub fn folnb_to_lg(d: &FDerivation, th: &Theory) -> Result<Derivation, BridgeError> {
    check_folnb(d, th)?;
    f2l(d, th)
}

fn kprem(s: &Sequent, r: &Rule, th: &Theory) -> Result<Sequent, BridgeError> {
    let prems = premises_of(s, r, th).map_err(|e| BridgeError::Internal(e.to_string()))?;
    prems.into_iter().next().ok_or_else(|| BridgeError::Internal("rule has no premise".into()))
}

fn f2l(d: &FDerivation, th: &Theory) -> Result<Derivation, BridgeError> {
    let s0 = strip(&d.conclusion);
    let rec = |i: usize| f2l(&d.premises[i], th);
    let node = |rule: Rule, prems: Vec<Derivation>| -> Result<Derivation, BridgeError> {
        Ok(rebuild(s0.clone(), rule, prems, th)?)
    };
    match &d.rule {
        FRule::Id { idx } => node(
            Rule::IdPi { idx: *idx, pi: Perm::identity(), pi_prime: Perm::identity() },
            vec![],
        ),
        FRule::Cut { split, judgment } => node(
            Rule::Mc { blocks: vec![(0, *split)], cuts: vec![judgment.formula.clone()] },
            vec![rec(0)?, rec(1)?],
        ),
        FRule::CL { idx, dup } => node(Rule::CL { idx: *idx, dup: *dup }, vec![rec(0)?]),
        FRule::WL { idx } => {
            let delta = [s0.left[*idx].clone()];
            Ok(weaken(&delta, *idx, &rec(0)?, th)?)
        }
        FRule::BotL { idx } => node(Rule::BotL { idx: *idx }, vec![]),
        FRule::TopR => node(Rule::TopR, vec![]),
        FRule::AndL { idx } => {
            // The kernel keeps one conjunct per ∧L, so contract first and
            // take each conjunct from its own copy.
            let r_cl = Rule::CL { idx: *idx, dup: idx + 1 };
            let s1 = kprem(&s0, &r_cl, th)?;
            let r_a = Rule::AndL { idx: *idx, which: 1 };
            let s2 = kprem(&s1, &r_a, th)?;
            let r_b = Rule::AndL { idx: idx + 1, which: 2 };
            let d2 = rebuild(s2, r_b, vec![rec(0)?], th)?;
            let d1 = rebuild(s1, r_a, vec![d2], th)?;
            node(r_cl, vec![d1])
        }
        FRule::AndR => node(Rule::AndR, vec![rec(0)?, rec(1)?]),
        FRule::OrL { idx } => node(Rule::OrL { idx: *idx }, vec![rec(0)?, rec(1)?]),
        FRule::OrR { which } => node(Rule::OrR { which: *which }, vec![rec(0)?]),
        FRule::ImpL { idx } => node(Rule::ImpL { idx: *idx }, vec![rec(0)?, rec(1)?]),
        FRule::ImpR => node(Rule::ImpR, vec![rec(0)?]),
        FRule::ForallL { idx, witness } => {
            node(Rule::ForallL { idx: *idx, witness: witness.clone() }, vec![rec(0)?])
        }
        FRule::ExistsR { witness } => {
            node(Rule::ExistsR { witness: witness.clone() }, vec![rec(0)?])
        }
        FRule::ForallR { h } => {
            let Formula::Forall(ty, body) = s0.right.clone() else {
                return internal("forallR without a universal goal");
            };
            let sigma = d.conclusion.right.names.clone();
            reraise(h, &ty, &body, &sigma, &s0, Rule::ForallR { h: h.clone() }, rec(0)?, th)
        }
        FRule::ExistsL { idx, h } => {
            let Formula::Exists(ty, body) = s0.left[*idx].clone() else {
                return internal("existsL without an existential principal");
            };
            let sigma = d.conclusion.left[*idx].names.clone();
            reraise(
                h,
                &ty,
                &body,
                &sigma,
                &s0,
                Rule::ExistsL { idx: *idx, h: h.clone() },
                rec(0)?,
                th,
            )
        }
        FRule::NablaL { idx, name } => {
            node(Rule::NablaL { idx: *idx, nom: name.clone() }, vec![rec(0)?])
        }
        FRule::NablaR { name } => node(Rule::NablaR { nom: name.clone() }, vec![rec(0)?]),
        FRule::AlphaL { idx, names } => {
            let (_, rho) =
                d.conclusion.left[*idx].rename(names).map_err(BridgeError::Internal)?;
            let inner = rec(0)?;
            let mut pis = vec![Perm::identity(); inner.conclusion.left.len()];
            pis[*idx] = rho.inverse();
            Ok(perm_derivation(&Perm::identity(), &pis, &inner, th)?)
        }
        FRule::AlphaR { names } => {
            let (_, rho) = d.conclusion.right.rename(names).map_err(BridgeError::Internal)?;
            let inner = rec(0)?;
            let pis = vec![Perm::identity(); inner.conclusion.left.len()];
            Ok(perm_derivation(&rho.inverse(), &pis, &inner, th)?)
        }
        // Pure local-signature bookkeeping: the kernel sequent does not
        // change, so neither does its derivation.
        FRule::PL { .. }
        | FRule::PR { .. }
        | FRule::SsL { .. }
        | FRule::SsR { .. }
        | FRule::WsL { .. }
        | FRule::WsR { .. } => rec(0),
    }
}

/// The kernel raises a ∀R/∃L variable over the support of the body only,
/// while the local-signature rule raises over the whole signature; the
/// bridging substitution `[λσ⃗. h′ c⃗ / h]` reconciles the two.
#[allow(clippy::too_many_arguments)]
fn reraise(
    h: &str,
    ty: &Ty,
    body: &Formula,
    sigma: &[(String, Ty)],
    s0: &Sequent,
    rule: Rule,
    inner: Derivation,
    th: &Theory,
) -> Result<Derivation, BridgeError> {
    let cs = body.support();
    if cs == sigma {
        return Ok(rebuild(s0.clone(), rule, vec![inner], th)?);
    }
    let mut avoid: BTreeSet<String> = s0.sig.keys().cloned().collect();
    avoid.insert(h.to_string());
    for (v, _) in s0.free_evars() {
        avoid.insert(v);
    }
    let hp = fresh_name(h, &avoid);
    let image = Term::apply(&Term::var(&hp, &ty.raise(&cs)), &noms(&cs)).close_noms(sigma);
    let mut theta = Subst::identity();
    theta
        .bind(h, &ty.raise(sigma), image)
        .map_err(|e| BridgeError::Internal(e.to_string()))?;
    let p = subst_derivation(&theta, &inner, th)?;
    let rule = match rule {
        Rule::ForallR { .. } => Rule::ForallR { h: hp },
        Rule::ExistsL { idx, .. } => Rule::ExistsL { idx, h: hp },
        r => r,
    };
    Ok(rebuild(s0.clone(), rule, vec![p], th)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::check;

    fn nm() -> Ty {
        Ty::nominal("nm")
    }

    fn thy() -> Theory {
        let mut th = Theory::default();
        th.nominal_types.push("nm".into());
        th.declared_noms
            .insert("nm".into(), vec!["a".into(), "b".into(), "c".into(), "e".into()]);
        th.preds.insert("p".into(), (Ty::arrow(nm(), Ty::o()), 0));
        th.preds
            .insert("q".into(), (Ty::arrow(nm(), Ty::arrow(nm(), Ty::o())), 0));
        th.preds.insert("r".into(), (Ty::o(), 0));
        th
    }

    fn p(t: Term) -> Formula {
        Formula::Atom("p".into(), vec![t])
    }

    fn pa(n: &str) -> Formula {
        p(Term::nom(n, &nm()))
    }

    fn q(x: &str, y: &str) -> Formula {
        Formula::Atom("q".into(), vec![Term::nom(x, &nm()), Term::nom(y, &nm())])
    }

    fn r() -> Formula {
        Formula::Atom("r".into(), vec![])
    }

    fn jn(names: &[&str], f: Formula) -> LocalJudgment {
        LocalJudgment::new(names.iter().map(|n| (n.to_string(), nm())).collect(), f)
    }

    fn fseq(left: Vec<LocalJudgment>, right: LocalJudgment) -> FSequent {
        FSequent::new(Signature::new(), left, right)
    }

    fn fd(conclusion: FSequent, rule: FRule, premises: Vec<FDerivation>) -> FDerivation {
        FDerivation { conclusion, rule, premises }
    }

    fn node(seq: Sequent, rule: Rule, prems: Vec<Derivation>) -> Derivation {
        Derivation { conclusion: seq, rule, premises: prems }
    }

    fn idleaf(sig: Signature, left: Vec<Formula>, idx: usize, right: Formula) -> Derivation {
        Derivation::leaf(
            Sequent::new(sig, left, right),
            Rule::IdPi { idx, pi: Perm::identity(), pi_prime: Perm::identity() },
        )
    }

    /// Checks the input, translates it both ways and compares end-sequents.
    fn roundtrip(d: &Derivation, th: &Theory) -> FDerivation {
        assert_eq!(check(d, th), Ok(()));
        let f = lg_to_folnb(d, th).unwrap();
        check_folnb(&f, th).unwrap();
        assert_eq!(f.conclusion, fsequent_of(&d.conclusion));
        let back = folnb_to_lg(&f, th).unwrap();
        assert_eq!(check(&back, th), Ok(()));
        assert_eq!(back.conclusion, d.conclusion);
        f
    }

    #[test]
    fn id_on_matching_judgments() {
        let th = thy();
        let s = fseq(vec![jn(&["a", "b"], q("a", "b"))], jn(&["a", "b"], q("a", "b")));
        let d = fd(s, FRule::Id { idx: 0 }, vec![]);
        check_folnb(&d, &th).unwrap();
    }

    #[test]
    fn id_needs_matching_name_order() {
        let th = thy();
        let s = fseq(vec![jn(&["a", "b"], q("a", "b"))], jn(&["b", "a"], q("a", "b")));
        let d = fd(s, FRule::Id { idx: 0 }, vec![]);
        assert!(check_folnb(&d, &th).is_err());
    }

    #[test]
    fn swap_bridges_reordered_signatures() {
        let th = thy();
        let s0 = fseq(vec![jn(&["a", "b"], q("a", "b"))], jn(&["b", "a"], q("a", "b")));
        let rule = FRule::PL { idx: 0, pos: 0 };
        let s1 = fpremises_of(&s0, &rule, &th).unwrap().remove(0);
        let d = fd(s0, rule, vec![fd(s1, FRule::Id { idx: 0 }, vec![])]);
        check_folnb(&d, &th).unwrap();
    }

    #[test]
    fn ws_rejects_a_used_name() {
        let th = thy();
        let s = fseq(vec![jn(&["a"], pa("a"))], jn(&[], r()));
        assert!(fpremises_of(&s, &FRule::WsL { idx: 0, pos: 0 }, &th).is_err());
    }

    #[test]
    fn alpha_renames_a_judgment() {
        let th = thy();
        let s0 = fseq(vec![jn(&["a"], pa("a"))], jn(&["b"], pa("b")));
        let rule = FRule::AlphaL { idx: 0, names: vec!["b".into()] };
        let s1 = fpremises_of(&s0, &rule, &th).unwrap().remove(0);
        assert_eq!(s1.left[0], s1.right);
        let d = fd(s0, rule, vec![fd(s1, FRule::Id { idx: 0 }, vec![])]);
        check_folnb(&d, &th).unwrap();

        let lg = folnb_to_lg(&d, &th).unwrap();
        assert_eq!(check(&lg, &th), Ok(()));
        assert_eq!(lg.conclusion, Sequent::new(Signature::new(), vec![pa("a")], pa("b")));
    }

    #[test]
    fn translate_permuted_axiom() {
        let th = thy();
        let pi = Perm::swap(("a", &nm()), ("b", &nm())).unwrap();
        let d = Derivation::leaf(
            Sequent::new(Signature::new(), vec![pa("a")], pa("b")),
            Rule::IdPi { idx: 0, pi, pi_prime: Perm::identity() },
        );
        let f = roundtrip(&d, &th);
        assert!(matches!(f.rule, FRule::AlphaL { .. }));
        assert!(matches!(f.premises[0].rule, FRule::Id { .. }));
    }

    #[test]
    fn translate_closed_formula() {
        let th = thy();
        let d = idleaf(Signature::new(), vec![r()], 0, r());
        let f = roundtrip(&d, &th);
        assert!(matches!(f.rule, FRule::Id { .. }));
        assert!(f.conclusion.left[0].names.is_empty());
    }

    #[test]
    fn translate_conjunction_under_implication() {
        let th = thy();
        let hyp = Formula::and(pa("a"), pa("b"));
        let goal = Formula::imp(hyp.clone(), pa("a"));
        let leaf = idleaf(Signature::new(), vec![pa("a")], 0, pa("a"));
        let d1 = node(
            Sequent::new(Signature::new(), vec![hyp.clone()], pa("a")),
            Rule::AndL { idx: 0, which: 1 },
            vec![leaf],
        );
        let d = node(
            Sequent::new(Signature::new(), vec![], goal),
            Rule::ImpR,
            vec![d1],
        );
        roundtrip(&d, &th);
    }

    #[test]
    fn translate_nabla() {
        let th = thy();
        let body = Formula::imp(p(Term::bound(0, &nm())), p(Term::bound(0, &nm())));
        let goal = Formula::nabla(nm(), body);
        let leaf = idleaf(Signature::new(), vec![pa("c")], 0, pa("c"));
        let d1 = node(
            Sequent::new(Signature::new(), vec![], Formula::imp(pa("c"), pa("c"))),
            Rule::ImpR,
            vec![leaf],
        );
        let d = node(
            Sequent::new(Signature::new(), vec![], goal),
            Rule::NablaR { nom: "c".into() },
            vec![d1],
        );
        roundtrip(&d, &th);
    }

    #[test]
    fn translate_witness_extends_the_signature() {
        let th = thy();
        let body = Formula::imp(p(Term::bound(0, &nm())), p(Term::bound(0, &nm())));
        let goal = Formula::exists(nm(), body);
        let leaf = idleaf(Signature::new(), vec![pa("b")], 0, pa("b"));
        let d1 = node(
            Sequent::new(Signature::new(), vec![], Formula::imp(pa("b"), pa("b"))),
            Rule::ImpR,
            vec![leaf],
        );
        let d = node(
            Sequent::new(Signature::new(), vec![], goal),
            Rule::ExistsR { witness: Term::nom("b", &nm()) },
            vec![d1],
        );
        let f = roundtrip(&d, &th);
        assert!(matches!(f.rule, FRule::SsR { .. }));
    }

    #[test]
    fn translate_universal_goal() {
        let th = thy();
        let hv = Term::var("h", &nm());
        let ph = p(hv);
        let mut sig = Signature::new();
        sig.insert("h".into(), nm());
        let leaf = idleaf(sig.clone(), vec![ph.clone()], 0, ph.clone());
        let d1 = node(
            Sequent::new(sig, vec![], Formula::imp(ph.clone(), ph.clone())),
            Rule::ImpR,
            vec![leaf],
        );
        let body = Formula::imp(p(Term::bound(0, &nm())), p(Term::bound(0, &nm())));
        let d = node(
            Sequent::new(Signature::new(), vec![], Formula::forall(nm(), body)),
            Rule::ForallR { h: "h".into() },
            vec![d1],
        );
        roundtrip(&d, &th);
    }

    #[test]
    fn weakening_translates_back() {
        let th = thy();
        let s0 = fseq(vec![jn(&[], r()), jn(&["a"], pa("a"))], jn(&[], r()));
        let rule = FRule::WL { idx: 1 };
        let s1 = fpremises_of(&s0, &rule, &th).unwrap().remove(0);
        let d = fd(s0.clone(), rule, vec![fd(s1, FRule::Id { idx: 0 }, vec![])]);
        check_folnb(&d, &th).unwrap();
        let lg = folnb_to_lg(&d, &th).unwrap();
        assert_eq!(check(&lg, &th), Ok(()));
        assert_eq!(lg.conclusion, strip(&s0));
    }

    #[test]
    fn cut_translates_to_a_multicut() {
        let th = thy();
        let s0 = fseq(vec![jn(&[], r())], jn(&[], r()));
        let rule = FRule::Cut { split: 1, judgment: jn(&[], r()) };
        let prems = fpremises_of(&s0, &rule, &th).unwrap();
        let d = fd(
            s0.clone(),
            rule,
            prems
                .into_iter()
                .map(|s| fd(s, FRule::Id { idx: 0 }, vec![]))
                .collect(),
        );
        check_folnb(&d, &th).unwrap();
        let lg = folnb_to_lg(&d, &th).unwrap();
        assert!(matches!(lg.rule, Rule::Mc { .. }));
        assert_eq!(check(&lg, &th), Ok(()));
    }

    #[test]
    fn reraising_over_a_reordered_signature() {
        let th = thy();
        let s0 = fseq(
            vec![jn(&["a", "b"], q("a", "b"))],
            jn(&["b", "a"], Formula::forall(nm(), q("a", "b"))),
        );
        let r0 = FRule::ForallR { h: "h".into() };
        let s1 = fpremises_of(&s0, &r0, &th).unwrap().remove(0);
        let r1 = FRule::PR { pos: 0 };
        let s2 = fpremises_of(&s1, &r1, &th).unwrap().remove(0);
        let d = fd(
            s0.clone(),
            r0,
            vec![fd(s1, r1, vec![fd(s2, FRule::Id { idx: 0 }, vec![])])],
        );
        check_folnb(&d, &th).unwrap();
        let lg = folnb_to_lg(&d, &th).unwrap();
        assert_eq!(check(&lg, &th), Ok(()));
        assert_eq!(lg.conclusion, strip(&s0));
    }

    #[test]
    fn multicut_is_outside_the_fragment() {
        let th = thy();
        let inner = idleaf(Signature::new(), vec![r()], 0, r());
        let d = node(
            Sequent::new(Signature::new(), vec![r()], r()),
            Rule::Mc { blocks: vec![], cuts: vec![] },
            vec![inner],
        );
        assert!(matches!(lg_to_folnb(&d, &th), Err(BridgeError::Fragment(_))));
    }
}
