//! Height-preserving transformations on derivations: weakening of
//! hypotheses, substitution, permutation of nominal constants, restricted
//! name substitution, context exchange and support extension.
//!
//! Every constructed node is validated against `premises_of`, so a
//! transformation either returns a derivation that checks by construction
//! or reports why it is undefined.  All transformations expect an input
//! derivation that already checks against the theory.

use crate::formula::Formula;
use crate::kernel::{
    defl_instances, eql_theta, freshened_raise, premises_of, CheckReason, Derivation, Rule,
    Sequent,
};
use crate::term::{fresh_name, Perm, Subst, Term, Ty};
use crate::Theory;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TransformError {
    #[error("transformation undefined: {0}")]
    Undefined(String),
    #[error("rule violation while transforming: {0}")]
    Kernel(#[from] CheckReason),
}

fn undef<T>(msg: impl Into<String>) -> Result<T, TransformError> {
    Err(TransformError::Undefined(msg.into()))
}

/// Builds a node and verifies the premises match what the rule demands.
pub(crate) fn rebuild(
    conclusion: Sequent,
    rule: Rule,
    premises: Vec<Derivation>,
    th: &Theory,
) -> Result<Derivation, TransformError> {
    let expected = premises_of(&conclusion, &rule, th)?;
    if expected.len() != premises.len() {
        return undef(format!(
            "{} expects {} premises below `{}`, built {}",
            rule.name(),
            expected.len(),
            conclusion,
            premises.len()
        ));
    }
    for (e, p) in expected.iter().zip(&premises) {
        if e != &p.conclusion {
            return undef(format!(
                "premise mismatch under {}: wanted `{}`, built `{}`",
                rule.name(),
                e,
                p.conclusion
            ));
        }
    }
    Ok(Derivation { conclusion, rule, premises })
}

pub(crate) fn noms(cs: &[(String, Ty)]) -> Vec<Term> {
    cs.iter().map(|(n, t)| Term::nom(n, t)).collect()
}

/// Signature entries plus the sequent's free variables, for factoring.
pub(crate) fn factor_domain(seq: &Sequent) -> Vec<(String, Ty)> {
    let mut out: Vec<(String, Ty)> =
        seq.sig.iter().map(|(n, t)| (n.clone(), t.clone())).collect();
    for v in seq.free_evars() {
        if !out.contains(&v) {
            out.push(v);
        }
    }
    out
}

/// Drops bindings for `shadowed` variables.  Freshened clause variables are
/// fresh for the node's sequent, so an outer substitution's binding of the
/// same name cannot refer into the subtree and must be shadowed.
fn without(theta: &Subst, shadowed: &[(String, Ty)]) -> Subst {
    let mut out = Subst::identity();
    for (n, ty, img) in theta.iter() {
        if !shadowed.iter().any(|(s, _)| s == n) {
            out.bind(n, ty, img.clone()).expect("restriction of a valid substitution");
        }
    }
    out
}

/// Disjoint union of two substitutions.
fn merge_subst(a: &Subst, b: &Subst) -> Result<Subst, TransformError> {
    let mut out = Subst::identity();
    for (n, ty, img) in a.iter().chain(b.iter()) {
        if out.get(n).is_some() {
            return undef(format!("overlapping substitution domains at `{}`", n));
        }
        out.bind(n, ty, img.clone())
            .map_err(|e| TransformError::Undefined(e.to_string()))?;
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Weakening
// ---------------------------------------------------------------------------

fn insert_at(left: &[Formula], pos: usize, delta: &[Formula]) -> Vec<Formula> {
    let mut out = left[..pos].to_vec();
    out.extend(delta.iter().cloned());
    out.extend(left[pos..].iter().cloned());
    out
}

/// Inserts the hypotheses `delta` at position `pos` of the conclusion
/// context and throughout the derivation.  The result has height at most
/// the height of the input.
pub fn weaken(
    delta: &[Formula],
    pos: usize,
    d: &Derivation,
    th: &Theory,
) -> Result<Derivation, TransformError> {
    if delta.is_empty() {
        return Ok(d.clone());
    }
    let seq = &d.conclusion;
    if pos > seq.left.len() {
        return undef(format!("weakening position {} out of range", pos));
    }
    let k = delta.len();
    let shift = |idx: usize| if idx >= pos { idx + k } else { idx };
    let newc = Sequent::new(seq.sig.clone(), insert_at(&seq.left, pos, delta), seq.right.clone());
    let same = |i: usize| -> Result<Derivation, TransformError> {
        weaken(delta, pos, &d.premises[i], th)
    };
    match &d.rule {
        Rule::IdPi { idx, pi, pi_prime } => rebuild(
            newc,
            Rule::IdPi { idx: shift(*idx), pi: pi.clone(), pi_prime: pi_prime.clone() },
            vec![],
            th,
        ),
        Rule::Mc { blocks, cuts } => {
            let labels = crate::kernel::mc_labels(blocks, seq.left.len())?;
            // A position strictly inside a block grows that block; block
            // boundaries and side positions land in the side context.
            let inside = blocks
                .iter()
                .position(|&(start, len)| start < pos && pos < start + len);
            let mut new_blocks = blocks.clone();
            let mut prems = Vec::new();
            match inside {
                Some(b) => {
                    new_blocks[b].1 += k;
                    for nb in new_blocks.iter_mut().skip(b + 1) {
                        nb.0 += k;
                    }
                    for (i, p) in d.premises.iter().enumerate() {
                        if i == b {
                            prems.push(weaken(delta, pos - blocks[b].0, p, th)?);
                        } else {
                            prems.push(p.clone());
                        }
                    }
                }
                None => {
                    for nb in new_blocks.iter_mut() {
                        if nb.0 >= pos {
                            nb.0 += k;
                        }
                    }
                    let before = labels[..pos].iter().filter(|l| l.is_none()).count();
                    prems.extend(d.premises[..blocks.len()].iter().cloned());
                    prems.push(weaken(
                        delta,
                        cuts.len() + before,
                        &d.premises[blocks.len()],
                        th,
                    )?);
                }
            }
            rebuild(newc, Rule::Mc { blocks: new_blocks, cuts: cuts.clone() }, prems, th)
        }
        Rule::CL { idx, dup } => {
            let ppos = if *dup < pos { pos + 1 } else { pos };
            let ndup = if *dup >= pos { dup + k } else { *dup };
            let p = weaken(delta, ppos, &d.premises[0], th)?;
            rebuild(newc, Rule::CL { idx: shift(*idx), dup: ndup }, vec![p], th)
        }
        Rule::BotL { idx } => rebuild(newc, Rule::BotL { idx: shift(*idx) }, vec![], th),
        Rule::TopR | Rule::EqR | Rule::NatRZero => rebuild(newc, d.rule.clone(), vec![], th),
        Rule::AndL { idx, which } => {
            let p = same(0)?;
            rebuild(newc, Rule::AndL { idx: shift(*idx), which: *which }, vec![p], th)
        }
        Rule::AndR | Rule::OrL { .. } => {
            let rule = match &d.rule {
                Rule::OrL { idx } => Rule::OrL { idx: shift(*idx) },
                r => r.clone(),
            };
            rebuild(newc, rule, vec![same(0)?, same(1)?], th)
        }
        Rule::OrR { .. } | Rule::ImpR | Rule::NablaR { .. } | Rule::ForallR { .. }
        | Rule::NatRSucc => rebuild(newc, d.rule.clone(), vec![same(0)?], th),
        Rule::ImpL { idx } => {
            let pos1 = if *idx < pos { pos - 1 } else { pos };
            let p1 = weaken(delta, pos1, &d.premises[0], th)?;
            let p2 = same(1)?;
            rebuild(newc, Rule::ImpL { idx: shift(*idx) }, vec![p1, p2], th)
        }
        Rule::ForallL { idx, witness } => {
            let p = same(0)?;
            rebuild(
                newc,
                Rule::ForallL { idx: shift(*idx), witness: witness.clone() },
                vec![p],
                th,
            )
        }
        Rule::NablaL { idx, nom } => {
            let p = same(0)?;
            rebuild(newc, Rule::NablaL { idx: shift(*idx), nom: nom.clone() }, vec![p], th)
        }
        Rule::ExistsL { idx, h } => {
            let p = same(0)?;
            rebuild(newc, Rule::ExistsL { idx: shift(*idx), h: h.clone() }, vec![p], th)
        }
        Rule::ExistsR { .. } | Rule::DefR { .. } => {
            rebuild(newc, d.rule.clone(), vec![same(0)?], th)
        }
        Rule::EqL { idx } => {
            let pos1 = if *idx < pos { pos - 1 } else { pos };
            match eql_theta(seq, *idx)? {
                None => rebuild(newc, Rule::EqL { idx: shift(*idx) }, vec![], th),
                Some(theta) => {
                    let dsub: Vec<Formula> = delta.iter().map(|f| f.subst(&theta)).collect();
                    let p = weaken(&dsub, pos1, &d.premises[0], th)?;
                    rebuild(newc, Rule::EqL { idx: shift(*idx) }, vec![p], th)
                }
            }
        }
        Rule::DefL { idx } => {
            let insts = defl_instances(seq, *idx, th)?;
            let mut prems = Vec::new();
            for (inst, p) in insts.iter().zip(&d.premises) {
                let dsub: Vec<Formula> = delta.iter().map(|f| f.subst(&inst.theta)).collect();
                prems.push(weaken(&dsub, pos, p, th)?);
            }
            rebuild(newc, Rule::DefL { idx: shift(*idx) }, prems, th)
        }
        Rule::NatL { idx, inv, j } => {
            let p2 = weaken(delta, pos, &d.premises[2], th)?;
            rebuild(
                newc,
                Rule::NatL { idx: shift(*idx), inv: inv.clone(), j: j.clone() },
                vec![d.premises[0].clone(), d.premises[1].clone(), p2],
                th,
            )
        }
    }
}

/// Weakening at the end of the context.
pub fn weaken_end(
    delta: &[Formula],
    d: &Derivation,
    th: &Theory,
) -> Result<Derivation, TransformError> {
    weaken(delta, d.conclusion.left.len(), d, th)
}

// ---------------------------------------------------------------------------
// Substitution
// ---------------------------------------------------------------------------

/// Renames the raised variable of a ∀R or ∃L so that a substitution can be
/// pushed through: returns the fresh name and the bridging substitution
/// `[λc⃗.h′ d⃗ / h]`.
fn resubst_raised(
    h: &str,
    ty: &Ty,
    body: &Formula,
    new_body: &Formula,
    seq: &Sequent,
    theta: &Subst,
) -> Result<(String, Subst), TransformError> {
    let cs_old = body.support();
    let ds = new_body.support();
    let mut avoid: BTreeSet<String> = seq.sig.keys().cloned().collect();
    for (n, _) in theta.domain() {
        avoid.insert(n.clone());
    }
    for (_, _, img) in theta.iter() {
        for (v, _) in img.free_evars() {
            avoid.insert(v);
        }
    }
    for (v, _) in seq.free_evars() {
        avoid.insert(v);
    }
    let hp = fresh_name(h, &avoid);
    let hp_ty = ty.raise(&ds);
    let image = Term::apply(&Term::var(&hp, &hp_ty), &noms(&ds)).close_noms(&cs_old);
    let mut rho = Subst::identity();
    rho.bind(h, &ty.raise(&cs_old), image)
        .map_err(|e| TransformError::Undefined(e.to_string()))?;
    Ok((hp, rho))
}

/// Applies a substitution throughout a derivation.  The result concludes
/// the substituted sequent and has height at most the input's height.
pub fn subst_derivation(
    theta: &Subst,
    d: &Derivation,
    th: &Theory,
) -> Result<Derivation, TransformError> {
    if theta.is_identity() {
        return Ok(d.clone());
    }
    let seq = &d.conclusion;
    let newc = Sequent::new(
        crate::kernel::subst_sig(&seq.sig, theta),
        seq.left.iter().map(|f| f.subst(theta)).collect(),
        seq.right.subst(theta),
    );
    let same = |i: usize| -> Result<Derivation, TransformError> {
        subst_derivation(theta, &d.premises[i], th)
    };
    match &d.rule {
        Rule::IdPi { .. } | Rule::BotL { .. } | Rule::TopR | Rule::EqR | Rule::NatRZero => {
            rebuild(newc, d.rule.clone(), vec![], th)
        }
        Rule::Mc { blocks, cuts } => {
            let new_cuts: Vec<Formula> = cuts.iter().map(|c| c.subst(theta)).collect();
            let prems = (0..d.premises.len())
                .map(same)
                .collect::<Result<Vec<_>, _>>()?;
            rebuild(newc, Rule::Mc { blocks: blocks.clone(), cuts: new_cuts }, prems, th)
        }
        Rule::CL { .. }
        | Rule::AndL { .. }
        | Rule::OrR { .. }
        | Rule::ImpR
        | Rule::NablaL { .. }
        | Rule::NablaR { .. }
        | Rule::NatRSucc => rebuild(newc, d.rule.clone(), vec![same(0)?], th),
        Rule::AndR | Rule::OrL { .. } | Rule::ImpL { .. } => {
            rebuild(newc, d.rule.clone(), vec![same(0)?, same(1)?], th)
        }
        Rule::ForallL { idx, witness } => {
            let w = theta.apply(witness);
            rebuild(newc, Rule::ForallL { idx: *idx, witness: w }, vec![same(0)?], th)
        }
        Rule::ExistsR { witness } => {
            let w = theta.apply(witness);
            rebuild(newc, Rule::ExistsR { witness: w }, vec![same(0)?], th)
        }
        Rule::ForallR { h } => {
            let (Formula::Forall(ty, body), Formula::Forall(_, nbody)) =
                (&seq.right, &newc.right)
            else {
                return undef("forallR without a universal goal");
            };
            let (hp, rho) = resubst_raised(h, ty, body, nbody, seq, theta)?;
            let p = subst_derivation(&Subst::compose(&rho, theta), &d.premises[0], th)?;
            rebuild(newc, Rule::ForallR { h: hp }, vec![p], th)
        }
        Rule::ExistsL { idx, h } => {
            let (Formula::Exists(ty, body), Formula::Exists(_, nbody)) =
                (&seq.left[*idx], &newc.left[*idx])
            else {
                return undef("existsL without an existential principal");
            };
            let (hp, rho) = resubst_raised(h, ty, body, nbody, seq, theta)?;
            let p = subst_derivation(&Subst::compose(&rho, theta), &d.premises[0], th)?;
            rebuild(newc, Rule::ExistsL { idx: *idx, h: hp }, vec![p], th)
        }
        Rule::EqL { idx } => {
            let rho_new = eql_theta(&newc, *idx)?;
            match rho_new {
                None => rebuild(newc, d.rule.clone(), vec![], th),
                Some(rho_new) => {
                    let Some(rho_old) = eql_theta(seq, *idx)? else {
                        return undef("substitution created an equality unifier from none");
                    };
                    let specific = Subst::compose(theta, &rho_new);
                    let sigma = crate::unify::factor_through(
                        &rho_old,
                        &specific,
                        &factor_domain(seq),
                    )
                    .ok_or_else(|| {
                        TransformError::Undefined(
                            "equality unifier does not factor through the general one".into(),
                        )
                    })?;
                    let p = subst_derivation(&sigma, &d.premises[0], th)?;
                    rebuild(newc, d.rule.clone(), vec![p], th)
                }
            }
        }
        Rule::DefL { idx } => {
            let old = defl_instances(seq, *idx, th)?;
            let new = defl_instances(&newc, *idx, th)?;
            let cs_old = seq.left[*idx].support();
            let ds = newc.left[*idx].support();
            let mut prems = Vec::new();
            for ni in &new {
                let Some(opos) = old.iter().position(|o| o.clause == ni.clause) else {
                    return undef("substitution enabled a definition clause that was unusable");
                };
                let oi = &old[opos];
                let mut tau = Subst::identity();
                for ((w, wty), (v, vty)) in oi.raised.vars.iter().zip(&ni.raised.vars) {
                    let img =
                        Term::apply(&Term::var(v, vty), &noms(&ds)).close_noms(&cs_old);
                    let _ = vty;
                    tau.bind(w, wty, img)
                        .map_err(|e| TransformError::Undefined(e.to_string()))?;
                }
                let specific =
                    Subst::compose(&merge_subst(&without(theta, &oi.raised.vars), &tau)?, &ni.theta);
                let mut domain = factor_domain(seq);
                for v in &oi.raised.vars {
                    if !domain.contains(v) {
                        domain.push(v.clone());
                    }
                }
                let sigma = crate::unify::factor_through(&oi.theta, &specific, &domain)
                    .ok_or_else(|| {
                        TransformError::Undefined(
                            "clause instance does not factor through the general one".into(),
                        )
                    })?;
                prems.push(subst_derivation(&sigma, &d.premises[opos], th)?);
            }
            rebuild(newc, d.rule.clone(), prems, th)
        }
        Rule::DefR { clause, theta: pay } => {
            let cs_old = seq.right.support();
            let ds = newc.right.support();
            let Some(cl) = th.clauses.get(*clause) else {
                return undef("defR clause out of range");
            };
            let old_raised = freshened_raise(cl, &cs_old, seq);
            let new_raised = freshened_raise(cl, &ds, &newc);
            let theta_loc = without(theta, &old_raised.vars);
            let mut paynew = Subst::identity();
            for ((w, wty), (v, vty)) in old_raised.vars.iter().zip(&new_raised.vars) {
                let u = Term::apply(&Term::var(w, wty), &noms(&cs_old));
                let u = theta_loc.apply(&pay.apply(&u));
                paynew
                    .bind(v, vty, u.close_noms(&ds))
                    .map_err(|e| TransformError::Undefined(e.to_string()))?;
            }
            let p = same(0)?;
            rebuild(newc, Rule::DefR { clause: *clause, theta: paynew }, vec![p], th)
        }
        Rule::NatL { idx, inv, j } => {
            let p0 = same(0)?;
            // The induction variable must dodge variables the substitution
            // brings into the signature.
            let (nj, p1) = if newc.sig.contains_key(j) {
                let mut avoid: BTreeSet<String> = newc.sig.keys().cloned().collect();
                for (v, _) in theta.domain() {
                    avoid.insert(v.clone());
                }
                let nj = fresh_name(j, &avoid);
                let nt = Ty::base("nt");
                let mut ren = Subst::identity();
                ren.bind(j, &nt, Term::var(&nj, &nt))
                    .map_err(|e| TransformError::Undefined(e.to_string()))?;
                let p1 = subst_derivation(&Subst::compose(&ren, theta), &d.premises[1], th)?;
                (nj, p1)
            } else {
                (j.clone(), same(1)?)
            };
            let p2 = same(2)?;
            rebuild(
                newc,
                Rule::NatL { idx: *idx, inv: inv.clone(), j: nj },
                vec![p0, p1, p2],
                th,
            )
        }
    }
}

// ---------------------------------------------------------------------------
// Permutation
// ---------------------------------------------------------------------------

fn all_identity(pi0: &Perm, pis: &[Perm]) -> bool {
    pi0.is_identity() && pis.iter().all(|p| p.is_identity())
}

/// Applies the permutation vector ⟨π₀; π₁ … πₙ⟩ to a derivation: the goal
/// is permuted by `pi0` and hypothesis `i` by `pis[i]`.
pub fn perm_derivation(
    pi0: &Perm,
    pis: &[Perm],
    d: &Derivation,
    th: &Theory,
) -> Result<Derivation, TransformError> {
    let seq = &d.conclusion;
    if pis.len() != seq.left.len() {
        return undef(format!(
            "permutation vector has {} entries for {} hypotheses",
            pis.len(),
            seq.left.len()
        ));
    }
    if all_identity(pi0, pis) {
        return Ok(d.clone());
    }
    let newc = Sequent::new(
        seq.sig.clone(),
        seq.left.iter().zip(pis).map(|(f, p)| f.perm(p)).collect(),
        seq.right.perm(pi0),
    );
    let recur = |pi0: &Perm, pis: &[Perm], i: usize| -> Result<Derivation, TransformError> {
        perm_derivation(pi0, pis, &d.premises[i], th)
    };
    match &d.rule {
        Rule::IdPi { idx, pi, pi_prime } => {
            let npi = Perm::compose(&pis[*idx].inverse(), pi);
            let npi2 = Perm::compose(&pi0.inverse(), pi_prime);
            rebuild(newc, Rule::IdPi { idx: *idx, pi: npi, pi_prime: npi2 }, vec![], th)
        }
        Rule::BotL { .. } | Rule::TopR | Rule::EqR | Rule::NatRZero => {
            rebuild(newc, d.rule.clone(), vec![], th)
        }
        Rule::Mc { blocks, cuts } => {
            let labels = crate::kernel::mc_labels(blocks, seq.left.len())?;
            let mut prems = Vec::new();
            for (i, &(start, len)) in blocks.iter().enumerate() {
                prems.push(recur(&Perm::identity(), &pis[start..start + len], i)?);
            }
            let mut rpis = vec![Perm::identity(); cuts.len()];
            rpis.extend(
                labels
                    .iter()
                    .zip(pis)
                    .filter(|(l, _)| l.is_none())
                    .map(|(_, p)| p.clone()),
            );
            prems.push(recur(pi0, &rpis, blocks.len())?);
            rebuild(newc, Rule::Mc { blocks: blocks.clone(), cuts: cuts.clone() }, prems, th)
        }
        Rule::CL { idx, dup } => {
            let mut ppis = pis.to_vec();
            ppis.insert(*dup, pis[*idx].clone());
            let p = recur(pi0, &ppis, 0)?;
            rebuild(newc, d.rule.clone(), vec![p], th)
        }
        Rule::AndL { .. } | Rule::NatRSucc | Rule::OrR { .. } => {
            rebuild(newc, d.rule.clone(), vec![recur(pi0, pis, 0)?], th)
        }
        Rule::AndR => {
            rebuild(newc, d.rule.clone(), vec![recur(pi0, pis, 0)?, recur(pi0, pis, 1)?], th)
        }
        Rule::OrL { .. } => {
            rebuild(newc, d.rule.clone(), vec![recur(pi0, pis, 0)?, recur(pi0, pis, 1)?], th)
        }
        Rule::ImpL { idx } => {
            let mut lpis = pis.to_vec();
            let bpi = lpis.remove(*idx);
            let p1 = recur(&bpi, &lpis, 0)?;
            let p2 = recur(pi0, pis, 1)?;
            rebuild(newc, d.rule.clone(), vec![p1, p2], th)
        }
        Rule::ImpR => {
            let mut ppis = pis.to_vec();
            ppis.push(pi0.clone());
            rebuild(newc, d.rule.clone(), vec![recur(pi0, &ppis, 0)?], th)
        }
        Rule::ForallL { idx, witness } => {
            let w = witness.perm(&pis[*idx]);
            let p = recur(pi0, pis, 0)?;
            rebuild(newc, Rule::ForallL { idx: *idx, witness: w }, vec![p], th)
        }
        Rule::ExistsR { witness } => {
            let w = witness.perm(pi0);
            let p = recur(pi0, pis, 0)?;
            rebuild(newc, Rule::ExistsR { witness: w }, vec![p], th)
        }
        Rule::ForallR { .. } | Rule::ExistsL { .. } | Rule::DefR { .. } => {
            rebuild(newc, d.rule.clone(), vec![recur(pi0, pis, 0)?], th)
        }
        Rule::NablaR { nom } => {
            let Formula::Nabla(ty, body) = &seq.right else {
                return undef("nablaR without a nabla goal");
            };
            let (dn, sw) = nabla_perm_nom(nom, ty, body, pi0, th)?;
            let p = recur(&Perm::compose(&sw, pi0), pis, 0)?;
            rebuild(newc, Rule::NablaR { nom: dn }, vec![p], th)
        }
        Rule::NablaL { idx, nom } => {
            let Formula::Nabla(ty, body) = &seq.left[*idx] else {
                return undef("nablaL without a nabla principal");
            };
            let (dn, sw) = nabla_perm_nom(nom, ty, body, &pis[*idx], th)?;
            let mut ppis = pis.to_vec();
            ppis[*idx] = Perm::compose(&sw, &pis[*idx]);
            let p = recur(pi0, &ppis, 0)?;
            rebuild(newc, Rule::NablaL { idx: *idx, nom: dn }, vec![p], th)
        }
        Rule::EqL { idx } => match eql_theta(seq, *idx)? {
            None => rebuild(newc, d.rule.clone(), vec![], th),
            Some(_) => {
                let mut ppis = pis.to_vec();
                ppis.remove(*idx);
                let p = recur(pi0, &ppis, 0)?;
                rebuild(newc, d.rule.clone(), vec![p], th)
            }
        },
        Rule::DefL { .. } => {
            let prems = (0..d.premises.len())
                .map(|i| recur(pi0, pis, i))
                .collect::<Result<Vec<_>, _>>()?;
            rebuild(newc, d.rule.clone(), prems, th)
        }
        Rule::NatL { .. } => {
            let p2 = recur(pi0, pis, 2)?;
            rebuild(
                newc,
                d.rule.clone(),
                vec![d.premises[0].clone(), d.premises[1].clone(), p2],
                th,
            )
        }
    }
}

/// Picks the nominal constant for a ∇ rule after permuting by `pi`: one
/// that `pi` fixes and that stays out of the body's support, together with
/// the swap that aligns the old choice.
fn nabla_perm_nom(
    nom: &str,
    ty: &Ty,
    body: &Formula,
    pi: &Perm,
    th: &Theory,
) -> Result<(String, Perm), TransformError> {
    if pi.image(nom) == nom {
        return Ok((nom.to_string(), Perm::identity()));
    }
    let mut avoid = body.support_names();
    avoid.extend(pi.carrier());
    avoid.insert(nom.to_string());
    let (dn, dty) = th.fresh_nom(ty, &avoid);
    let sw = Perm::swap((nom, ty), (&dn, &dty))
        .map_err(|e| TransformError::Undefined(e.to_string()))?;
    Ok((dn, sw))
}

// ---------------------------------------------------------------------------
// Restricted name substitution
// ---------------------------------------------------------------------------

fn name_for(f: &Formula, x: &str, a: &str, ty: &Ty) -> Formula {
    let mut m = BTreeMap::new();
    m.insert(x.to_string(), Term::nom(a, ty));
    f.subst_evars(&m)
}

fn term_name_for(t: &Term, x: &str, a: &str, ty: &Ty) -> Term {
    let mut m = BTreeMap::new();
    m.insert(x.to_string(), Term::nom(a, ty));
    t.subst_evars(&m)
}

/// Replaces the signature variable `x` by the nominal constant `a0` in the
/// goal and by `aleft[i]` in hypothesis `i`, removing `x` from the
/// signature.  Each chosen constant must avoid the support of its formula.
pub fn restrict_name(
    x: &str,
    a0: &str,
    aleft: &[String],
    d: &Derivation,
    th: &Theory,
) -> Result<Derivation, TransformError> {
    let seq = &d.conclusion;
    let Some(xty) = seq.sig.get(x).cloned() else {
        return undef(format!("variable `{}` is not in the signature", x));
    };
    if !xty.is_nominal_base() {
        return undef(format!("variable `{}` does not have nominal type", x));
    }
    if aleft.len() != seq.left.len() {
        return undef(format!(
            "name vector has {} entries for {} hypotheses",
            aleft.len(),
            seq.left.len()
        ));
    }
    if seq.right.support_names().contains(a0) {
        return undef(format!("`{}` is in the support of the goal", a0));
    }
    for (a, f) in aleft.iter().zip(&seq.left) {
        if f.support_names().contains(a) {
            return undef(format!("`{}` is in the support of `{}`", a, f));
        }
    }
    let mut nsig = seq.sig.clone();
    nsig.remove(x);
    let newc = Sequent::new(
        nsig,
        seq.left
            .iter()
            .zip(aleft)
            .map(|(f, a)| name_for(f, x, a, &xty))
            .collect(),
        name_for(&seq.right, x, a0, &xty),
    );
    let recur = |a0: &str, al: &[String], i: usize| -> Result<Derivation, TransformError> {
        restrict_name(x, a0, al, &d.premises[i], th)
    };
    let with_at = |j: usize, a: &str| -> Vec<String> {
        let mut v = aleft.to_vec();
        v[j] = a.to_string();
        v
    };
    match &d.rule {
        Rule::IdPi { idx, pi, pi_prime } => {
            let mut avoid = seq.left[*idx].support_names();
            avoid.extend(seq.right.support_names());
            avoid.extend(pi.carrier());
            avoid.extend(pi_prime.carrier());
            avoid.insert(a0.to_string());
            avoid.insert(aleft[*idx].clone());
            let (dn, dty) = th.fresh_nom(&xty, &avoid);
            let swj = Perm::swap((&aleft[*idx], &xty), (&dn, &dty))
                .map_err(|e| TransformError::Undefined(e.to_string()))?;
            let sw0 = Perm::swap((a0, &xty), (&dn, &dty))
                .map_err(|e| TransformError::Undefined(e.to_string()))?;
            rebuild(
                newc,
                Rule::IdPi {
                    idx: *idx,
                    pi: Perm::compose(&swj, pi),
                    pi_prime: Perm::compose(&sw0, pi_prime),
                },
                vec![],
                th,
            )
        }
        Rule::BotL { .. } | Rule::TopR | Rule::EqR | Rule::NatRZero => {
            rebuild(newc, d.rule.clone(), vec![], th)
        }
        Rule::Mc { blocks, cuts } => {
            let labels = crate::kernel::mc_labels(blocks, seq.left.len())?;
            let mut ds = Vec::new();
            for c in cuts {
                let avoid = c.support_names();
                let (dn, _) = th.fresh_nom(&xty, &avoid);
                ds.push(dn);
            }
            let mut prems = Vec::new();
            for (i, &(start, len)) in blocks.iter().enumerate() {
                prems.push(recur(&ds[i], &aleft[start..start + len], i)?);
            }
            let mut ral: Vec<String> = ds.clone();
            ral.extend(
                labels
                    .iter()
                    .zip(aleft)
                    .filter(|(l, _)| l.is_none())
                    .map(|(_, a)| a.clone()),
            );
            prems.push(recur(a0, &ral, blocks.len())?);
            let new_cuts: Vec<Formula> = cuts
                .iter()
                .zip(&ds)
                .map(|(c, a)| name_for(c, x, a, &xty))
                .collect();
            rebuild(newc, Rule::Mc { blocks: blocks.clone(), cuts: new_cuts }, prems, th)
        }
        Rule::CL { idx, dup } => {
            let mut al = aleft.to_vec();
            al.insert(*dup, aleft[*idx].clone());
            rebuild(newc, d.rule.clone(), vec![recur(a0, &al, 0)?], th)
        }
        Rule::AndL { .. } | Rule::OrR { .. } | Rule::NatRSucc => {
            rebuild(newc, d.rule.clone(), vec![recur(a0, aleft, 0)?], th)
        }
        Rule::AndR | Rule::OrL { .. } => rebuild(
            newc,
            d.rule.clone(),
            vec![recur(a0, aleft, 0)?, recur(a0, aleft, 1)?],
            th,
        ),
        Rule::ImpL { idx } => {
            let mut al = aleft.to_vec();
            let aj = al.remove(*idx);
            let p1 = recur(&aj, &al, 0)?;
            let p2 = recur(a0, aleft, 1)?;
            rebuild(newc, d.rule.clone(), vec![p1, p2], th)
        }
        Rule::ImpR => {
            let mut al = aleft.to_vec();
            al.push(a0.to_string());
            rebuild(newc, d.rule.clone(), vec![recur(a0, &al, 0)?], th)
        }
        Rule::ForallL { idx, witness } => {
            let aj = &aleft[*idx];
            let Formula::Forall(_, body) = &seq.left[*idx] else {
                return undef("forallL without a universal principal");
            };
            let opened = body.open(witness);
            let (p, w) = swap_out_witness(aj, &xty, &opened, witness, &d.premises[0], *idx, false, th)?;
            let w = term_name_for(&w, x, aj, &xty);
            let p = restrict_name(x, a0, aleft, &p, th)?;
            rebuild(newc, Rule::ForallL { idx: *idx, witness: w }, vec![p], th)
        }
        Rule::ExistsR { witness } => {
            let Formula::Exists(_, body) = &seq.right else {
                return undef("existsR without an existential goal");
            };
            let opened = body.open(witness);
            let (p, w) = swap_out_witness(a0, &xty, &opened, witness, &d.premises[0], 0, true, th)?;
            let w = term_name_for(&w, x, a0, &xty);
            let p = restrict_name(x, a0, aleft, &p, th)?;
            rebuild(newc, Rule::ExistsR { witness: w }, vec![p], th)
        }
        Rule::ForallR { h } => {
            let Formula::Forall(ty, body) = &seq.right else {
                return undef("forallR without a universal goal");
            };
            let Formula::Forall(_, nbody) = &newc.right else {
                return undef("restricted goal lost its quantifier");
            };
            let (hp, rho) = restrict_raised(h, ty, body, nbody, x, a0, &xty, seq)?;
            let sub = subst_derivation(&rho, &d.premises[0], th)?;
            let p = restrict_name(x, a0, aleft, &sub, th)?;
            rebuild(newc, Rule::ForallR { h: hp }, vec![p], th)
        }
        Rule::ExistsL { idx, h } => {
            let aj = aleft[*idx].clone();
            let Formula::Exists(ty, body) = &seq.left[*idx] else {
                return undef("existsL without an existential principal");
            };
            let Formula::Exists(_, nbody) = &newc.left[*idx] else {
                return undef("restricted principal lost its quantifier");
            };
            let (hp, rho) = restrict_raised(h, ty, body, nbody, x, &aj, &xty, seq)?;
            let sub = subst_derivation(&rho, &d.premises[0], th)?;
            let p = restrict_name(x, a0, aleft, &sub, th)?;
            rebuild(newc, Rule::ExistsL { idx: *idx, h: hp }, vec![p], th)
        }
        Rule::NablaR { nom } => {
            let Formula::Nabla(ty, body) = &seq.right else {
                return undef("nablaR without a nabla goal");
            };
            let (p, dn) = if nom != a0 {
                (d.premises[0].clone(), nom.clone())
            } else {
                let opened = body.open(&Term::nom(nom, ty));
                let mut avoid = opened.support_names();
                avoid.insert(a0.to_string());
                let (dn, dty) = th.fresh_nom(ty, &avoid);
                let sw = Perm::swap((nom, ty), (&dn, &dty))
                    .map_err(|e| TransformError::Undefined(e.to_string()))?;
                let pis = vec![Perm::identity(); seq.left.len()];
                (perm_derivation(&sw, &pis, &d.premises[0], th)?, dn)
            };
            let p = restrict_name(x, a0, aleft, &p, th)?;
            rebuild(newc, Rule::NablaR { nom: dn }, vec![p], th)
        }
        Rule::NablaL { idx, nom } => {
            let Formula::Nabla(ty, body) = &seq.left[*idx] else {
                return undef("nablaL without a nabla principal");
            };
            let aj = &aleft[*idx];
            let (p, dn) = if nom != aj {
                (d.premises[0].clone(), nom.clone())
            } else {
                let opened = body.open(&Term::nom(nom, ty));
                let mut avoid = opened.support_names();
                avoid.insert(aj.clone());
                let (dn, dty) = th.fresh_nom(ty, &avoid);
                let sw = Perm::swap((nom, ty), (&dn, &dty))
                    .map_err(|e| TransformError::Undefined(e.to_string()))?;
                let mut pis = vec![Perm::identity(); seq.left.len()];
                pis[*idx] = sw;
                (perm_derivation(&Perm::identity(), &pis, &d.premises[0], th)?, dn)
            };
            let p = restrict_name(x, a0, aleft, &p, th)?;
            rebuild(newc, Rule::NablaL { idx: *idx, nom: dn }, vec![p], th)
        }
        Rule::EqL { idx } => match eql_theta(&newc, *idx)? {
            None => rebuild(newc, d.rule.clone(), vec![], th),
            Some(rho_new) => {
                let Some(rho_old) = eql_theta(seq, *idx)? else {
                    return undef("name restriction created an equality unifier from none");
                };
                let mut domain = factor_domain(seq);
                if !domain.contains(&(x.to_string(), xty.clone())) {
                    domain.push((x.to_string(), xty.clone()));
                }
                let sigma = crate::unify::factor_through(&rho_old, &rho_new, &domain)
                    .ok_or_else(|| {
                        TransformError::Undefined(
                            "equality unifier does not factor through the general one".into(),
                        )
                    })?;
                let sub = subst_derivation(&sigma, &d.premises[0], th)?;
                let mut al = aleft.to_vec();
                al.remove(*idx);
                let p = restrict_name(x, a0, &al, &sub, th)?;
                rebuild(newc, d.rule.clone(), vec![p], th)
            }
        },
        Rule::DefL { idx } => {
            let old = defl_instances(seq, *idx, th)?;
            let new = defl_instances(&newc, *idx, th)?;
            let cs_old = seq.left[*idx].support();
            let ds = newc.left[*idx].support();
            let aj = aleft[*idx].clone();
            // e⃗ restores `x` where the restricted atom shows the new name.
            let es: Vec<Term> = ds
                .iter()
                .map(|(n, t)| {
                    if n == &aj {
                        Term::var(x, &xty)
                    } else {
                        Term::nom(n, t)
                    }
                })
                .collect();
            let mut prems = Vec::new();
            for ni in &new {
                let Some(opos) = old.iter().position(|o| o.clause == ni.clause) else {
                    return undef("name restriction enabled a definition clause");
                };
                let oi = &old[opos];
                let mut tau = Subst::identity();
                for ((w, wty), (v, vty)) in oi.raised.vars.iter().zip(&ni.raised.vars) {
                    let img = Term::apply(&Term::var(v, vty), &es).close_noms(&cs_old);
                    tau.bind(w, wty, img)
                        .map_err(|e| TransformError::Undefined(e.to_string()))?;
                }
                let specific = Subst::compose(&tau, &ni.theta);
                let mut domain = factor_domain(seq);
                if !domain.contains(&(x.to_string(), xty.clone())) {
                    domain.push((x.to_string(), xty.clone()));
                }
                for v in &oi.raised.vars {
                    if !domain.contains(v) {
                        domain.push(v.clone());
                    }
                }
                let sigma = crate::unify::factor_through(&oi.theta, &specific, &domain)
                    .ok_or_else(|| {
                        TransformError::Undefined(
                            "clause instance does not factor through the general one".into(),
                        )
                    })?;
                let sub = subst_derivation(&sigma, &d.premises[opos], th)?;
                prems.push(restrict_name(x, a0, &with_at(*idx, &aj), &sub, th)?);
            }
            rebuild(newc, d.rule.clone(), prems, th)
        }
        Rule::DefR { clause, theta: pay } => {
            let cs_old = seq.right.support();
            let ds = newc.right.support();
            let Some(cl) = th.clauses.get(*clause) else {
                return undef("defR clause out of range");
            };
            let old_raised = freshened_raise(cl, &cs_old, seq);
            let new_raised = freshened_raise(cl, &ds, &newc);
            let mut paynew = Subst::identity();
            for ((w, wty), (v, vty)) in old_raised.vars.iter().zip(&new_raised.vars) {
                let u = Term::apply(&Term::var(w, wty), &noms(&cs_old));
                let u = term_name_for(&pay.apply(&u), x, a0, &xty);
                paynew
                    .bind(v, vty, u.close_noms(&ds))
                    .map_err(|e| TransformError::Undefined(e.to_string()))?;
            }
            let p = restrict_name(x, a0, aleft, &d.premises[0], th)?;
            rebuild(newc, Rule::DefR { clause: *clause, theta: paynew }, vec![p], th)
        }
        Rule::NatL { .. } => {
            // The invariant is closed and nominal-free, so the constant
            // choices for the induction premises are immaterial.
            let p0 = recur(a0, &[], 0)?;
            let p1 = recur(a0, &[a0.to_string()], 1)?;
            let p2 = recur(a0, aleft, 2)?;
            rebuild(newc, d.rule.clone(), vec![p0, p1, p2], th)
        }
    }
}

/// Guards a witness-based rule during name restriction: when the chosen
/// constant shows up in the opened premise formula, swaps it with a fresh
/// one first.  Returns the adjusted premise derivation and witness.
#[allow(clippy::too_many_arguments)]
fn swap_out_witness(
    a: &str,
    xty: &Ty,
    opened: &Formula,
    witness: &Term,
    premise: &Derivation,
    idx: usize,
    on_right: bool,
    th: &Theory,
) -> Result<(Derivation, Term), TransformError> {
    if !opened.support_names().contains(a) {
        return Ok((premise.clone(), witness.clone()));
    }
    let mut avoid = opened.support_names();
    avoid.insert(a.to_string());
    let (dn, dty) = th.fresh_nom(xty, &avoid);
    let sw = Perm::swap((a, xty), (&dn, &dty))
        .map_err(|e| TransformError::Undefined(e.to_string()))?;
    let n = premise.conclusion.left.len();
    let (pi0, mut pis) = (Perm::identity(), vec![Perm::identity(); n]);
    let p = if on_right {
        perm_derivation(&sw, &pis, premise, th)?
    } else {
        pis[idx] = sw.clone();
        perm_derivation(&pi0, &pis, premise, th)?
    };
    Ok((p, witness.perm(&sw)))
}

/// Bridging substitution for a raised variable under name restriction:
/// `[λc⃗.h′ e⃗ / h]` where e⃗ is the restricted support with the new
/// constant replaced by the variable being restricted.
#[allow(clippy::too_many_arguments)]
fn restrict_raised(
    h: &str,
    ty: &Ty,
    body: &Formula,
    new_body: &Formula,
    x: &str,
    a: &str,
    xty: &Ty,
    seq: &Sequent,
) -> Result<(String, Subst), TransformError> {
    let cs_old = body.support();
    let ds = new_body.support();
    let es: Vec<Term> = ds
        .iter()
        .map(|(n, t)| if n == a { Term::var(x, xty) } else { Term::nom(n, t) })
        .collect();
    let mut avoid: BTreeSet<String> = seq.sig.keys().cloned().collect();
    for (v, _) in seq.free_evars() {
        avoid.insert(v);
    }
    avoid.insert(x.to_string());
    let hp = fresh_name(h, &avoid);
    let hp_ty = ty.raise(&ds);
    let image = Term::apply(&Term::var(&hp, &hp_ty), &es).close_noms(&cs_old);
    let mut rho = Subst::identity();
    rho.bind(h, &ty.raise(&cs_old), image)
        .map_err(|e| TransformError::Undefined(e.to_string()))?;
    Ok((hp, rho))
}

// ---------------------------------------------------------------------------
// Exchange
// ---------------------------------------------------------------------------

/// Reorders the hypotheses: position `i` of the result holds hypothesis
/// `sigma[i]` of the input.  Exchange is admissible by index relabelling;
/// it fails only when a reordering would tear apart a multicut block.
pub fn exchange(
    sigma: &[usize],
    d: &Derivation,
    th: &Theory,
) -> Result<Derivation, TransformError> {
    let seq = &d.conclusion;
    let n = seq.left.len();
    if sigma.len() != n || {
        let mut seen = vec![false; n];
        sigma.iter().any(|&s| s >= n || std::mem::replace(&mut seen[s], true))
    } {
        return undef("exchange requires a permutation of the hypothesis positions");
    }
    if sigma.iter().enumerate().all(|(i, &s)| i == s) {
        return Ok(d.clone());
    }
    let mut inv = vec![0usize; n];
    for (i, &s) in sigma.iter().enumerate() {
        inv[s] = i;
    }
    let newc = Sequent::new(
        seq.sig.clone(),
        sigma.iter().map(|&s| seq.left[s].clone()).collect(),
        seq.right.clone(),
    );
    let remove_pos = |old_removed: usize| -> Vec<usize> {
        sigma
            .iter()
            .filter(|&&s| s != old_removed)
            .map(|&s| if s > old_removed { s - 1 } else { s })
            .collect()
    };
    match &d.rule {
        Rule::IdPi { idx, pi, pi_prime } => rebuild(
            newc,
            Rule::IdPi { idx: inv[*idx], pi: pi.clone(), pi_prime: pi_prime.clone() },
            vec![],
            th,
        ),
        Rule::BotL { idx } => rebuild(newc, Rule::BotL { idx: inv[*idx] }, vec![], th),
        Rule::TopR | Rule::EqR | Rule::NatRZero => rebuild(newc, d.rule.clone(), vec![], th),
        Rule::Mc { blocks, cuts } => {
            let labels = crate::kernel::mc_labels(blocks, n)?;
            let old_sides: Vec<usize> = labels
                .iter()
                .enumerate()
                .filter(|(_, l)| l.is_none())
                .map(|(i, _)| i)
                .collect();
            let m = blocks.len();
            // Each block must land on a contiguous run of the new order;
            // its internal order and the side positions may move freely.
            let mut runs: Vec<(usize, usize)> = Vec::new();
            for (b, &(start, len)) in blocks.iter().enumerate() {
                if len == 0 {
                    runs.push((n, b));
                    continue;
                }
                let news: Vec<usize> = (0..n)
                    .filter(|&i| sigma[i] >= start && sigma[i] < start + len)
                    .collect();
                let first = news[0];
                if news.last() != Some(&(first + len - 1)) {
                    return undef("exchange tears apart a multicut block");
                }
                runs.push((first, b));
            }
            runs.sort();
            let mut new_blocks = Vec::new();
            let mut new_cuts = Vec::new();
            let mut prems = Vec::new();
            for &(new_start, b) in &runs {
                let (start, len) = blocks[b];
                if len == 0 {
                    prems.push(d.premises[b].clone());
                    new_blocks.push((n, 0));
                } else {
                    let local: Vec<usize> =
                        (0..len).map(|i| sigma[new_start + i] - start).collect();
                    prems.push(exchange(&local, &d.premises[b], th)?);
                    new_blocks.push((new_start, len));
                }
                new_cuts.push(cuts[b].clone());
            }
            let mut rsigma: Vec<usize> = runs.iter().map(|&(_, b)| b).collect();
            for (q, _) in labels.iter().enumerate() {
                if runs
                    .iter()
                    .any(|&(ns, b)| blocks[b].1 > 0 && q >= ns && q < ns + blocks[b].1)
                {
                    continue;
                }
                let Some(rank) = old_sides.iter().position(|&p| p == sigma[q]) else {
                    return undef("exchange tears apart a multicut block");
                };
                rsigma.push(m + rank);
            }
            prems.push(exchange(&rsigma, &d.premises[m], th)?);
            rebuild(newc, Rule::Mc { blocks: new_blocks, cuts: new_cuts }, prems, th)
        }
        Rule::CL { idx, dup } => {
            let p = inv[*idx];
            let dup2 = p + 1;
            let mut sp = Vec::with_capacity(n + 1);
            for q in 0..n + 1 {
                if q == dup2 {
                    sp.push(*dup);
                    continue;
                }
                let qc = if q < dup2 { q } else { q - 1 };
                let s = sigma[qc];
                sp.push(if s < *dup { s } else { s + 1 });
            }
            let pr = exchange(&sp, &d.premises[0], th)?;
            rebuild(newc, Rule::CL { idx: p, dup: dup2 }, vec![pr], th)
        }
        Rule::AndL { idx, which } => {
            let p = exchange(sigma, &d.premises[0], th)?;
            rebuild(newc, Rule::AndL { idx: inv[*idx], which: *which }, vec![p], th)
        }
        Rule::AndR => {
            let p1 = exchange(sigma, &d.premises[0], th)?;
            let p2 = exchange(sigma, &d.premises[1], th)?;
            rebuild(newc, d.rule.clone(), vec![p1, p2], th)
        }
        Rule::OrL { idx } => {
            let p1 = exchange(sigma, &d.premises[0], th)?;
            let p2 = exchange(sigma, &d.premises[1], th)?;
            rebuild(newc, Rule::OrL { idx: inv[*idx] }, vec![p1, p2], th)
        }
        Rule::OrR { .. } | Rule::NatRSucc | Rule::ForallR { .. } | Rule::NablaR { .. }
        | Rule::ExistsR { .. } | Rule::DefR { .. } => {
            let p = exchange(sigma, &d.premises[0], th)?;
            rebuild(newc, d.rule.clone(), vec![p], th)
        }
        Rule::ImpL { idx } => {
            let p1 = exchange(&remove_pos(*idx), &d.premises[0], th)?;
            let p2 = exchange(sigma, &d.premises[1], th)?;
            rebuild(newc, Rule::ImpL { idx: inv[*idx] }, vec![p1, p2], th)
        }
        Rule::ImpR => {
            let mut sp = sigma.to_vec();
            sp.push(n);
            let p = exchange(&sp, &d.premises[0], th)?;
            rebuild(newc, d.rule.clone(), vec![p], th)
        }
        Rule::ForallL { idx, witness } => {
            let p = exchange(sigma, &d.premises[0], th)?;
            rebuild(
                newc,
                Rule::ForallL { idx: inv[*idx], witness: witness.clone() },
                vec![p],
                th,
            )
        }
        Rule::NablaL { idx, nom } => {
            let p = exchange(sigma, &d.premises[0], th)?;
            rebuild(newc, Rule::NablaL { idx: inv[*idx], nom: nom.clone() }, vec![p], th)
        }
        Rule::ExistsL { idx, h } => {
            let p = exchange(sigma, &d.premises[0], th)?;
            rebuild(newc, Rule::ExistsL { idx: inv[*idx], h: h.clone() }, vec![p], th)
        }
        Rule::EqL { idx } => match eql_theta(seq, *idx)? {
            None => rebuild(newc, Rule::EqL { idx: inv[*idx] }, vec![], th),
            Some(_) => {
                let p = exchange(&remove_pos(*idx), &d.premises[0], th)?;
                rebuild(newc, Rule::EqL { idx: inv[*idx] }, vec![p], th)
            }
        },
        Rule::DefL { idx } => {
            let prems = d
                .premises
                .iter()
                .map(|p| exchange(sigma, p, th))
                .collect::<Result<Vec<_>, _>>()?;
            rebuild(newc, Rule::DefL { idx: inv[*idx] }, prems, th)
        }
        Rule::NatL { idx, inv: dinv, j } => {
            let p2 = exchange(sigma, &d.premises[2], th)?;
            rebuild(
                newc,
                Rule::NatL { idx: inv[*idx], inv: dinv.clone(), j: j.clone() },
                vec![d.premises[0].clone(), d.premises[1].clone(), p2],
                th,
            )
        }
    }
}

// ---------------------------------------------------------------------------
// Signature extension
// ---------------------------------------------------------------------------

/// Adds fresh variables to the signature at every node.  Rule payloads that
/// pick fresh names (raised variables, induction variables, definition
/// unfoldings) are re-chosen where the larger signature forces it.
pub fn extend_sig(
    adds: &[(String, Ty)],
    d: &Derivation,
    th: &Theory,
) -> Result<Derivation, TransformError> {
    if adds.is_empty() {
        return Ok(d.clone());
    }
    let seq = &d.conclusion;
    let mut nsig = seq.sig.clone();
    for (v, ty) in adds {
        if nsig.insert(v.clone(), ty.clone()).is_some() {
            return undef(format!("variable `{}` is already in the signature", v));
        }
    }
    let added = |name: &str| adds.iter().any(|(v, _)| v == name);
    let newc = Sequent::new(nsig, seq.left.clone(), seq.right.clone());
    let same = |i: usize| -> Result<Derivation, TransformError> {
        extend_sig(adds, &d.premises[i], th)
    };
    // Renames a payload-chosen variable of a premise out of the way.
    let dodge = |name: &str,
                 premise: &Derivation|
     -> Result<(String, Derivation), TransformError> {
        let Some(nty) = premise.conclusion.sig.get(name).cloned() else {
            return undef(format!("variable `{}` vanished from a premise", name));
        };
        let mut avoid: BTreeSet<String> = premise.conclusion.sig.keys().cloned().collect();
        for (v, _) in adds {
            avoid.insert(v.clone());
        }
        let nn = fresh_name(name, &avoid);
        let mut ren = Subst::identity();
        ren.bind(name, &nty, Term::var(&nn, &nty))
            .map_err(|e| TransformError::Undefined(e.to_string()))?;
        Ok((nn, subst_derivation(&ren, premise, th)?))
    };
    match &d.rule {
        Rule::IdPi { .. } | Rule::BotL { .. } | Rule::TopR | Rule::EqR | Rule::NatRZero => {
            rebuild(newc, d.rule.clone(), vec![], th)
        }
        Rule::Mc { .. } | Rule::AndR | Rule::OrL { .. } | Rule::ImpL { .. } => {
            let prems = (0..d.premises.len())
                .map(same)
                .collect::<Result<Vec<_>, _>>()?;
            rebuild(newc, d.rule.clone(), prems, th)
        }
        Rule::CL { .. }
        | Rule::AndL { .. }
        | Rule::OrR { .. }
        | Rule::ImpR
        | Rule::ForallL { .. }
        | Rule::ExistsR { .. }
        | Rule::NablaL { .. }
        | Rule::NablaR { .. }
        | Rule::NatRSucc => rebuild(newc, d.rule.clone(), vec![same(0)?], th),
        Rule::ForallR { h } => {
            let (nh, p) = if added(h) {
                dodge(h, &d.premises[0])?
            } else {
                (h.clone(), d.premises[0].clone())
            };
            let p = extend_sig(adds, &p, th)?;
            rebuild(newc, Rule::ForallR { h: nh }, vec![p], th)
        }
        Rule::ExistsL { idx, h } => {
            let (nh, p) = if added(h) {
                dodge(h, &d.premises[0])?
            } else {
                (h.clone(), d.premises[0].clone())
            };
            let p = extend_sig(adds, &p, th)?;
            rebuild(newc, Rule::ExistsL { idx: *idx, h: nh }, vec![p], th)
        }
        Rule::EqL { .. } => {
            let prems = (0..d.premises.len())
                .map(same)
                .collect::<Result<Vec<_>, _>>()?;
            rebuild(newc, d.rule.clone(), prems, th)
        }
        Rule::DefL { idx } => {
            let old = defl_instances(seq, *idx, th)?;
            let new = defl_instances(&newc, *idx, th)?;
            let cs = seq.left[*idx].support();
            let mut prems = Vec::new();
            for ni in &new {
                let Some(opos) = old.iter().position(|o| o.clause == ni.clause) else {
                    return undef("signature extension changed the usable clauses");
                };
                let oi = &old[opos];
                let mut tau = Subst::identity();
                for ((w, wty), (v, vty)) in oi.raised.vars.iter().zip(&ni.raised.vars) {
                    let img = Term::apply(&Term::var(v, vty), &noms(&cs)).close_noms(&cs);
                    tau.bind(w, wty, img)
                        .map_err(|e| TransformError::Undefined(e.to_string()))?;
                }
                let specific = Subst::compose(&tau, &ni.theta);
                let mut domain = factor_domain(seq);
                for v in &oi.raised.vars {
                    if !domain.contains(v) {
                        domain.push(v.clone());
                    }
                }
                let sigma = crate::unify::factor_through(&oi.theta, &specific, &domain)
                    .ok_or_else(|| {
                        TransformError::Undefined(
                            "clause instance does not factor through the general one".into(),
                        )
                    })?;
                let p = subst_derivation(&sigma, &d.premises[opos], th)?;
                prems.push(extend_sig(adds, &p, th)?);
            }
            rebuild(newc, d.rule.clone(), prems, th)
        }
        Rule::DefR { clause, theta: pay } => {
            let cs = seq.right.support();
            let Some(cl) = th.clauses.get(*clause) else {
                return undef("defR clause out of range");
            };
            let old_raised = freshened_raise(cl, &cs, seq);
            let new_raised = freshened_raise(cl, &cs, &newc);
            let mut paynew = Subst::identity();
            for ((w, wty), (v, vty)) in old_raised.vars.iter().zip(&new_raised.vars) {
                let u = pay.apply(&Term::apply(&Term::var(w, wty), &noms(&cs)));
                paynew
                    .bind(v, vty, u.close_noms(&cs))
                    .map_err(|e| TransformError::Undefined(e.to_string()))?;
            }
            let p = same(0)?;
            rebuild(newc, Rule::DefR { clause: *clause, theta: paynew }, vec![p], th)
        }
        Rule::NatL { idx, inv, j } => {
            let p0 = same(0)?;
            let (nj, p1) = if added(j) {
                dodge(j, &d.premises[1])?
            } else {
                (j.clone(), d.premises[1].clone())
            };
            let p1 = extend_sig(adds, &p1, th)?;
            let p2 = same(2)?;
            rebuild(
                newc,
                Rule::NatL { idx: *idx, inv: inv.clone(), j: nj },
                vec![p0, p1, p2],
                th,
            )
        }
    }
}

// ---------------------------------------------------------------------------
// Support extension
// ---------------------------------------------------------------------------

/// Extends the arguments of the raised variable `h` by the constants `cs`:
/// from Σ,h;Γ ⊢ B[h a⃗/x] builds Σ,h′;Γ ⊢ B[h′ a⃗c⃗/x].  `target` locates
/// the formula containing `h` (`None` for the goal, `Some(i)` for
/// hypothesis `i`); the constants must avoid that formula's support.
pub fn support_extend(
    h: &str,
    cs: &[(String, Ty)],
    target: Option<usize>,
    d: &Derivation,
    th: &Theory,
) -> Result<(String, Derivation), TransformError> {
    let seq = &d.conclusion;
    let Some(hty) = seq.sig.get(h).cloned() else {
        return undef(format!("variable `{}` is not in the signature", h));
    };
    let (argtys, res) = hty.strip();
    let k = argtys.len();
    let mut avoid: BTreeSet<String> = seq.sig.keys().cloned().collect();
    for (v, _) in seq.free_evars() {
        avoid.insert(v);
    }
    let hp = fresh_name(h, &avoid);
    avoid.insert(hp.clone());
    let mut ys = Vec::new();
    for (cn, cty) in cs {
        let yn = fresh_name(&format!("y{}", cn), &avoid);
        avoid.insert(yn.clone());
        ys.push((yn, cty.clone()));
    }
    let mut hp_args = argtys.clone();
    hp_args.extend(cs.iter().map(|(_, t)| t.clone()));
    let hp_ty = hp_args
        .iter()
        .rev()
        .fold(res, |acc, t| Ty::arrow(t.clone(), acc));
    let mut spine: Vec<Term> = (0..k)
        .map(|i| Term::bound(k - 1 - i, &argtys[i]))
        .collect();
    spine.extend(ys.iter().map(|(n, t)| Term::var(n, t)));
    let image = Term::lam(argtys.clone(), Term::apply(&Term::var(&hp, &hp_ty), &spine));
    let mut rho = Subst::identity();
    rho.bind(h, &hty, image)
        .map_err(|e| TransformError::Undefined(e.to_string()))?;
    let mut cur = subst_derivation(&rho, d, th)?;
    for ((yn, yty), (cn, _)) in ys.iter().zip(cs) {
        let cseq = cur.conclusion.clone();
        let pick = |f: &Formula, want: bool| -> Result<String, TransformError> {
            let supp = f.support_names();
            if want {
                if supp.contains(cn) {
                    return undef(format!("`{}` is in the support of `{}`", cn, f));
                }
                Ok(cn.clone())
            } else if !supp.contains(cn) {
                Ok(cn.clone())
            } else {
                Ok(th.fresh_nom(yty, &supp).0)
            }
        };
        let a0 = pick(&cseq.right, target.is_none())?;
        let mut al = Vec::new();
        for (i, f) in cseq.left.iter().enumerate() {
            al.push(pick(f, target == Some(i))?);
        }
        cur = restrict_name(yn, &a0, &al, &cur, th)?;
    }
    Ok((hp, cur))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{check, Signature};

    fn nm() -> Ty {
        Ty::nominal("nm")
    }

    fn tm() -> Ty {
        Ty::base("tm")
    }

    fn th_basic() -> Theory {
        let mut th = Theory::default();
        th.nominal_types.push("nm".into());
        th.declared_noms
            .insert("nm".into(), vec!["a".into(), "b".into(), "c".into(), "e".into()]);
        th.base_types.push("tm".into());
        th.consts.insert("z".into(), tm());
        th.preds.insert("p".into(), (Ty::arrow(nm(), Ty::o()), 0));
        th.preds
            .insert("q".into(), (Ty::arrow(nm(), Ty::arrow(nm(), Ty::o())), 0));
        th.preds.insert("pt".into(), (Ty::arrow(tm(), Ty::o()), 0));
        th.preds
            .insert("qq".into(), (Ty::arrow(tm(), Ty::arrow(tm(), Ty::o())), 0));
        th.preds.insert("r".into(), (Ty::o(), 0));
        th
    }

    fn pa(n: &str) -> Formula {
        Formula::Atom("p".into(), vec![Term::nom(n, &nm())])
    }

    fn by(seq: Sequent, rule: Rule, prems: Vec<Derivation>, th: &Theory) -> Derivation {
        let d = Derivation { conclusion: seq, rule, premises: prems };
        assert_eq!(check(&d, th), Ok(()), "fixture derivation must check");
        d
    }

    fn id_leaf(seq: Sequent, idx: usize, th: &Theory) -> Derivation {
        by(
            seq,
            Rule::IdPi { idx, pi: Perm::identity(), pi_prime: Perm::identity() },
            vec![],
            th,
        )
    }

    #[test]
    fn weaken_basic_and_impr() {
        let th = th_basic();
        // ⊢ p a ⊃ p a by impR; id.  Weaken with [r] at front and back.
        let goal = Formula::imp(pa("a"), pa("a"));
        let seq = Sequent::new(Signature::new(), vec![], goal);
        let ps = premises_of(&seq, &Rule::ImpR, &th).unwrap();
        let d = by(seq, Rule::ImpR, vec![id_leaf(ps[0].clone(), 0, &th)], &th);
        let r = Formula::Atom("r".into(), vec![]);
        {
            let pos = 0usize;
            let w = weaken(std::slice::from_ref(&r), pos, &d, &th).unwrap();
            assert_eq!(check(&w, &th), Ok(()));
            assert_eq!(w.conclusion.left, vec![r.clone()]);
            assert!(w.height() <= d.height());
        }
    }

    #[test]
    fn weaken_through_eql_substitutes_delta() {
        let th = th_basic();
        // x = z, pt x ⊢ pt z, then weaken with pt x: the premise context
        // must receive pt z.
        let mut sig = Signature::new();
        sig.insert("x".into(), tm());
        let seq = Sequent::new(
            sig,
            vec![
                Formula::Eq(Term::var("x", &tm()), Term::konst("z", &tm()), tm()),
                Formula::Atom("pt".into(), vec![Term::var("x", &tm())]),
            ],
            Formula::Atom("pt".into(), vec![Term::konst("z", &tm())]),
        );
        let ps = premises_of(&seq, &Rule::EqL { idx: 0 }, &th).unwrap();
        let d = by(seq, Rule::EqL { idx: 0 }, vec![id_leaf(ps[0].clone(), 0, &th)], &th);
        let delta = vec![Formula::Atom("pt".into(), vec![Term::var("x", &tm())])];
        let w = weaken(&delta, 2, &d, &th).unwrap();
        assert_eq!(check(&w, &th), Ok(()));
        assert_eq!(
            w.premises[0].conclusion.left,
            vec![
                Formula::Atom("pt".into(), vec![Term::konst("z", &tm())]),
                Formula::Atom("pt".into(), vec![Term::konst("z", &tm())]),
            ]
        );
        assert!(w.height() <= d.height());
    }

    #[test]
    fn weaken_through_mc() {
        let th = th_basic();
        let r = Formula::Atom("r".into(), vec![]);
        let seq = Sequent::new(Signature::new(), vec![r.clone()], r.clone());
        let rule = Rule::Mc { blocks: vec![(0, 1)], cuts: vec![r.clone()] };
        let ps = premises_of(&seq, &rule, &th).unwrap();
        let d = by(
            seq,
            rule,
            vec![id_leaf(ps[0].clone(), 0, &th), id_leaf(ps[1].clone(), 0, &th)],
            &th,
        );
        let w = weaken_end(&[pa("a")], &d, &th).unwrap();
        assert_eq!(check(&w, &th), Ok(()));
        assert_eq!(w.conclusion.left, vec![r.clone(), pa("a")]);
        // The Δ block premise is untouched; the side context lands on the
        // right premise.
        assert_eq!(w.premises[0].conclusion.left, vec![r.clone()]);
        assert_eq!(w.premises[1].conclusion.left, vec![r.clone(), pa("a")]);
    }

    /// ∀y. qq (f a) y ⊢ ∀y. qq (f a) y over Σ = {f : nm → tm}.
    fn forall_roundtrip(th: &Theory) -> Derivation {
        let fty = Ty::arrow(nm(), tm());
        let fa = Term::apply(&Term::var("f", &fty), &[Term::nom("a", &nm())]);
        let body = Formula::Atom("qq".into(), vec![fa, Term::bound(0, &tm())]);
        let hyp = Formula::forall(tm(), body);
        let mut sig = Signature::new();
        sig.insert("f".into(), fty);
        let seq = Sequent::new(sig, vec![hyp.clone()], hyp);
        let ps = premises_of(&seq, &Rule::ForallR { h: "h".into() }, th).unwrap();
        let hty = Ty::arrow(nm(), tm());
        let wit = Term::apply(&Term::var("h", &hty), &[Term::nom("a", &nm())]);
        let rule_l = Rule::ForallL { idx: 0, witness: wit };
        let ps2 = premises_of(&ps[0], &rule_l, th).unwrap();
        let inner = id_leaf(ps2[0].clone(), 0, th);
        let mid = by(ps[0].clone(), rule_l, vec![inner], th);
        by(seq, Rule::ForallR { h: "h".into() }, vec![mid], th)
    }

    #[test]
    fn subst_through_forall_raising() {
        let th = th_basic();
        let d = forall_roundtrip(&th);
        // f := λu.z erases the nominal constant, so the raised variable
        // loses its argument.
        let mut theta = Subst::identity();
        theta
            .bind("f", &Ty::arrow(nm(), tm()), Term::lam(vec![nm()], Term::konst("z", &tm())))
            .unwrap();
        let s = subst_derivation(&theta, &d, &th).unwrap();
        assert_eq!(check(&s, &th), Ok(()));
        let want = Formula::forall(
            tm(),
            Formula::Atom("qq".into(), vec![Term::konst("z", &tm()), Term::bound(0, &tm())]),
        );
        assert_eq!(s.conclusion.right, want);
        assert!(s.conclusion.sig.is_empty());
        // The new raised variable has shrunk to a plain tm variable.
        let Rule::ForallR { h } = &s.rule else { panic!("rule changed") };
        assert_eq!(s.premises[0].conclusion.sig.get(h), Some(&tm()));
        assert!(s.height() <= d.height());
    }

    #[test]
    fn perm_identity_and_swap() {
        let th = th_basic();
        let seq = Sequent::new(Signature::new(), vec![pa("a")], pa("a"));
        let d = id_leaf(seq, 0, &th);
        let sw = Perm::swap(("a", &nm()), ("b", &nm())).unwrap();
        let p = perm_derivation(&sw, std::slice::from_ref(&sw), &d, &th).unwrap();
        assert_eq!(check(&p, &th), Ok(()));
        assert_eq!(p.conclusion.left, vec![pa("b")]);
        assert_eq!(p.conclusion.right, pa("b"));
    }

    #[test]
    fn perm_through_nabla_r() {
        let th = th_basic();
        // p a ⊢ ∇x. p a, opened with b; permute by (a b) everywhere.
        let goal = Formula::nabla(nm(), pa("a"));
        let seq = Sequent::new(Signature::new(), vec![pa("a")], goal);
        let rule = Rule::NablaR { nom: "b".into() };
        let ps = premises_of(&seq, &rule, &th).unwrap();
        let d = by(seq, rule, vec![id_leaf(ps[0].clone(), 0, &th)], &th);
        let sw = Perm::swap(("a", &nm()), ("b", &nm())).unwrap();
        let p = perm_derivation(&sw, std::slice::from_ref(&sw), &d, &th).unwrap();
        assert_eq!(check(&p, &th), Ok(()));
        assert_eq!(p.conclusion.right, Formula::nabla(nm(), pa("b")));
        // The ∇ constant had to dodge the permutation carrier.
        let Rule::NablaR { nom } = &p.rule else { panic!("rule changed") };
        assert!(nom != "a" && nom != "b");
        assert!(p.height() <= d.height());
    }

    #[test]
    fn restrict_id_with_distinct_names() {
        let th = th_basic();
        // p x ⊢ p x restricts to p b ⊢ p a via a fresh mediating constant.
        let mut sig = Signature::new();
        sig.insert("x".into(), nm());
        let px = Formula::Atom("p".into(), vec![Term::var("x", &nm())]);
        let seq = Sequent::new(sig, vec![px.clone()], px);
        let d = id_leaf(seq, 0, &th);
        let r = restrict_name("x", "a", &["b".to_string()], &d, &th).unwrap();
        assert_eq!(check(&r, &th), Ok(()));
        assert_eq!(r.conclusion.left, vec![pa("b")]);
        assert_eq!(r.conclusion.right, pa("a"));
        assert!(r.conclusion.sig.is_empty());
    }

    #[test]
    fn restrict_through_forall_r() {
        let th = th_basic();
        // ∀y. q x y ⊢ ∀y. q x y over Σ = {x : nm}; restrict x to a on both
        // sides.  The raised variable must absorb an extra argument.
        let body = Formula::Atom("q".into(), vec![Term::var("x", &nm()), Term::bound(0, &nm())]);
        let hyp = Formula::forall(nm(), body);
        let mut sig = Signature::new();
        sig.insert("x".into(), nm());
        let seq = Sequent::new(sig, vec![hyp.clone()], hyp);
        let ps = premises_of(&seq, &Rule::ForallR { h: "h".into() }, &th).unwrap();
        let wit = Term::var("h", &nm());
        let rule_l = Rule::ForallL { idx: 0, witness: wit };
        let ps2 = premises_of(&ps[0], &rule_l, &th).unwrap();
        let mid = by(ps[0].clone(), rule_l, vec![id_leaf(ps2[0].clone(), 0, &th)], &th);
        let d = by(seq, Rule::ForallR { h: "h".into() }, vec![mid], &th);

        let r = restrict_name("x", "a", &["a".to_string()], &d, &th).unwrap();
        assert_eq!(check(&r, &th), Ok(()));
        let want = Formula::forall(
            nm(),
            Formula::Atom("q".into(), vec![Term::nom("a", &nm()), Term::bound(0, &nm())]),
        );
        assert_eq!(r.conclusion.right, want);
        assert_eq!(r.conclusion.left, vec![want.clone()]);
        let Rule::ForallR { h } = &r.rule else { panic!("rule changed") };
        assert_eq!(
            r.premises[0].conclusion.sig.get(h),
            Some(&Ty::arrow(nm(), nm()))
        );
        assert!(r.height() <= d.height());
    }

    #[test]
    fn restrict_through_eql() {
        let th = th_basic();
        // u = x, p u ⊢ p x over Σ = {u, x}; restrict x to a everywhere.
        let mut sig = Signature::new();
        sig.insert("u".into(), nm());
        sig.insert("x".into(), nm());
        let seq = Sequent::new(
            sig,
            vec![
                Formula::Eq(Term::var("u", &nm()), Term::var("x", &nm()), nm()),
                Formula::Atom("p".into(), vec![Term::var("u", &nm())]),
            ],
            Formula::Atom("p".into(), vec![Term::var("x", &nm())]),
        );
        let ps = premises_of(&seq, &Rule::EqL { idx: 0 }, &th).unwrap();
        let d = by(seq, Rule::EqL { idx: 0 }, vec![id_leaf(ps[0].clone(), 0, &th)], &th);
        let r =
            restrict_name("x", "a", &["a".to_string(), "a".to_string()], &d, &th).unwrap();
        assert_eq!(check(&r, &th), Ok(()));
        assert_eq!(r.conclusion.right, pa("a"));
        assert!(r.height() <= d.height());
    }

    #[test]
    fn exchange_through_impl() {
        let th = th_basic();
        let r = Formula::Atom("r".into(), vec![]);
        let hyp = Formula::imp(r.clone(), pa("a"));
        let seq = Sequent::new(Signature::new(), vec![hyp.clone(), r.clone()], pa("a"));
        let rule = Rule::ImpL { idx: 0 };
        let ps = premises_of(&seq, &rule, &th).unwrap();
        let d = by(
            seq,
            rule,
            vec![id_leaf(ps[0].clone(), 0, &th), id_leaf(ps[1].clone(), 0, &th)],
            &th,
        );
        let x = exchange(&[1, 0], &d, &th).unwrap();
        assert_eq!(check(&x, &th), Ok(()));
        assert_eq!(x.conclusion.left, vec![r.clone(), hyp]);
        assert!(matches!(x.rule, Rule::ImpL { idx: 1 }));
        assert!(x.height() <= d.height());
    }

    #[test]
    fn exchange_through_mc_blocks() {
        let th = th_basic();
        let r = Formula::Atom("r".into(), vec![]);
        // A whole block may move past a side formula…
        let seq = Sequent::new(Signature::new(), vec![r.clone(), pa("a")], r.clone());
        let rule = Rule::Mc { blocks: vec![(0, 1)], cuts: vec![r.clone()] };
        let ps = premises_of(&seq, &rule, &th).unwrap();
        let right = by(
            ps[1].clone(),
            Rule::IdPi { idx: 0, pi: Perm::identity(), pi_prime: Perm::identity() },
            vec![],
            &th,
        );
        let d = by(seq, rule, vec![id_leaf(ps[0].clone(), 0, &th), right], &th);
        let x = exchange(&[1, 0], &d, &th).unwrap();
        assert_eq!(check(&x, &th), Ok(()));
        assert_eq!(x.conclusion.left, vec![pa("a"), r.clone()]);
        assert!(matches!(&x.rule, Rule::Mc { blocks, .. } if blocks == &vec![(1, 1)]));

        // …but a side formula cannot land inside a block.
        let seq2 = Sequent::new(
            Signature::new(),
            vec![r.clone(), pa("a"), pa("b")],
            r.clone(),
        );
        let rule2 = Rule::Mc { blocks: vec![(0, 2)], cuts: vec![r.clone()] };
        let ps2 = premises_of(&seq2, &rule2, &th).unwrap();
        let right2 = by(
            ps2[1].clone(),
            Rule::IdPi { idx: 0, pi: Perm::identity(), pi_prime: Perm::identity() },
            vec![],
            &th,
        );
        let d2 = by(seq2, rule2, vec![id_leaf(ps2[0].clone(), 0, &th), right2], &th);
        assert!(exchange(&[0, 2, 1], &d2, &th).is_err());
    }

    #[test]
    fn support_extension() {
        let th = th_basic();
        // Σ,h ⊢ p h ⊃ p h; extend the empty argument list of h by c.
        let mut sig = Signature::new();
        sig.insert("h".into(), nm());
        let ph = Formula::Atom("p".into(), vec![Term::var("h", &nm())]);
        let seq = Sequent::new(sig, vec![], Formula::imp(ph.clone(), ph.clone()));
        let ps = premises_of(&seq, &Rule::ImpR, &th).unwrap();
        let d = by(seq, Rule::ImpR, vec![id_leaf(ps[0].clone(), 0, &th)], &th);
        let (hp, e) = support_extend("h", &[("c".to_string(), nm())], None, &d, &th).unwrap();
        assert_eq!(check(&e, &th), Ok(()));
        let hc = Term::apply(
            &Term::var(&hp, &Ty::arrow(nm(), nm())),
            &[Term::nom("c", &nm())],
        );
        let want = Formula::Atom("p".into(), vec![hc]);
        assert_eq!(e.conclusion.right, Formula::imp(want.clone(), want));
        assert_eq!(e.conclusion.sig.get(&hp), Some(&Ty::arrow(nm(), nm())));
        assert!(e.height() <= d.height());
    }
}
