//! Multicut reduction and the cut-elimination normalizer.
//!
//! `contract` performs one reduction step on a derivation ending in a
//! multicut, dispatching on how the cut formulas are used: essential steps
//! when a cut formula is principal on both sides, commutative steps that
//! push the neighbouring rule below the multicut, axiom steps that absorb
//! an `id` leaf, a structural step for contracted cut formulas, and a merge
//! step for stacked multicuts.  `normalize` applies `contract` at the
//! leftmost innermost multicut until the derivation is cut-free.

use crate::formula::Formula;
use crate::kernel::{
    defl_instances, eql_theta, mc_sides, premises_of, Derivation, Rule, Sequent, Signature,
};
use crate::term::{fresh_name, Perm, Subst, Term, Ty};
use crate::transform::{
    exchange, extend_sig, factor_domain, perm_derivation, rebuild, restrict_name,
    subst_derivation, support_extend, weaken, weaken_end, TransformError,
};
use crate::Theory;
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CutError {
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error("no cut-free form reached within {0} reduction steps")]
    OutOfFuel(usize),
}

/// Result of running the normalizer: the cut-free derivation, the number of
/// reduction steps taken and the case label of each step.
#[derive(Debug)]
pub struct Normalization {
    pub derivation: Derivation,
    pub steps: usize,
    pub trace: Vec<String>,
}

fn undef<T>(msg: impl Into<String>) -> Result<T, TransformError> {
    Err(TransformError::Undefined(msg.into()))
}

fn mk_mc(
    conclusion: Sequent,
    blocks: Vec<(usize, usize)>,
    cuts: Vec<Formula>,
    mut lprems: Vec<Derivation>,
    rprem: Derivation,
    th: &Theory,
) -> Result<Derivation, TransformError> {
    lprems.push(rprem);
    rebuild(conclusion, Rule::Mc { blocks, cuts }, lprems, th)
}

fn minus<T: Clone>(v: &[T], i: usize) -> Vec<T> {
    let mut out = v.to_vec();
    out.remove(i);
    out
}

fn with<T: Clone>(v: &[T], i: usize, x: T) -> Vec<T> {
    let mut out = v.to_vec();
    out[i] = x;
    out
}

/// Exchange permutation that moves the element at `from` to position `to`.
fn move_sigma(len: usize, from: usize, to: usize) -> Vec<usize> {
    let mut out: Vec<usize> = (0..len).filter(|&q| q != from).collect();
    out.insert(to, from);
    out
}

fn ids(k: usize) -> Vec<Perm> {
    vec![Perm::identity(); k]
}

fn bind(s: &mut Subst, n: &str, ty: &Ty, img: Term) -> Result<(), TransformError> {
    s.bind(n, ty, img)
        .map_err(|e| TransformError::Undefined(e.to_string()))
}

/// Extends a derivation's signature (at every node) to `target`.
fn align_sig(
    target: &Signature,
    d: &Derivation,
    th: &Theory,
) -> Result<Derivation, TransformError> {
    let missing: Vec<(String, Ty)> = target
        .iter()
        .filter(|(k, _)| !d.conclusion.sig.contains_key(*k))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    extend_sig(&missing, d, th)
}

/// Contracts away copies that sit at positions `bst+blen ..` of `d`'s
/// conclusion; copy `k` duplicates the formula at `origs[k]` of the final
/// conclusion (positions counted with all copies removed).
fn contract_copies(
    d: Derivation,
    bst: usize,
    blen: usize,
    origs: &[usize],
    th: &Theory,
) -> Result<Derivation, TransformError> {
    let mut cur = d;
    for k in (0..origs.len()).rev() {
        let o = origs[k];
        let dup = bst + blen + k;
        let idx = if o < bst + blen { o } else { o + k };
        let mut nl = cur.conclusion.left.clone();
        nl.remove(dup);
        let conc = Sequent::new(cur.conclusion.sig.clone(), nl, cur.conclusion.right.clone());
        cur = rebuild(conc, Rule::CL { idx, dup }, vec![cur], th)?;
    }
    Ok(cur)
}

/// One reduction step on a derivation whose last rule is a multicut.
/// Returns the reduct (with the same conclusion) and the case label.
pub fn contract(
    d: &Derivation,
    th: &Theory,
) -> Result<(Derivation, &'static str), TransformError> {
    let Rule::Mc { blocks, cuts } = &d.rule else {
        return undef("contract expects a derivation ending in a multicut");
    };
    let seq = &d.conclusion;
    let n = cuts.len();
    let pis = &d.premises[..n];
    let pi = &d.premises[n];
    if n == 0 {
        return Ok((pi.clone(), "trivial"));
    }
    let sides = mc_sides(blocks, seq.left.len())?;
    match &pi.rule {
        Rule::Mc { .. } => merge_multicut(seq, blocks, cuts, pis, pi, th),
        Rule::IdPi { .. } => axiom_right(seq, blocks, cuts, pis, pi, &sides, th),
        Rule::CL { idx, .. } if *idx < n => structural(seq, blocks, cuts, pis, pi, th),
        r => match r.principal() {
            Some(i) if i < n => match &pis[i].rule {
                Rule::Mc { .. } => {
                    let (inner, _) = contract(&pis[i], th)?;
                    let mut prems = d.premises.clone();
                    prems[i] = inner;
                    Ok((rebuild(seq.clone(), d.rule.clone(), prems, th)?, "mc:left"))
                }
                Rule::IdPi { .. } => axiom_left(seq, blocks, cuts, pis, pi, i, &sides, th),
                lr if lr.principal().is_some() => {
                    left_commutative(seq, blocks, cuts, pis, pi, i, th)
                }
                _ => essential(seq, blocks, cuts, pis, pi, i, &sides, th),
            },
            _ => right_commutative(seq, blocks, cuts, pis, pi, &sides, th),
        },
    }
}

// ---------------------------------------------------------------------------
// Axiom cases
// ---------------------------------------------------------------------------

/// The right premise is an `id` leaf: either the matched hypothesis is a
/// side formula (the reduct is an `id` leaf) or it is a cut formula (the
/// reduct permutes and weakens that cut's derivation).
fn axiom_right(
    seq: &Sequent,
    blocks: &[(usize, usize)],
    cuts: &[Formula],
    pis: &[Derivation],
    pi: &Derivation,
    sides: &[usize],
    th: &Theory,
) -> Result<(Derivation, &'static str), TransformError> {
    let Rule::IdPi { idx: p, pi: p1, pi_prime: p2 } = &pi.rule else {
        return undef("axiom_right expects an id leaf");
    };
    let n = cuts.len();
    if *p >= n {
        let g = sides[*p - n];
        let rule = Rule::IdPi { idx: g, pi: p1.clone(), pi_prime: p2.clone() };
        return Ok((rebuild(seq.clone(), rule, vec![], th)?, "axiom:right"));
    }
    // π.Bp = π'.C, so τ = π ∘ π'⁻¹ maps Bp to C.
    let tau = Perm::compose(p1, &p2.inverse());
    let (bst, blen) = blocks[*p];
    let mut cur = perm_derivation(&tau, &ids(blen), &pis[*p], th)?;
    cur = weaken(&seq.left[..bst], 0, &cur, th)?;
    cur = weaken_end(&seq.left[bst + blen..], &cur, th)?;
    Ok((cur, "axiom:right"))
}

/// The right premise ends a left rule on cut `i` and that cut's derivation
/// is an `id` leaf: the multicut sheds cut `i`, moving the matched
/// hypothesis (permuted) into the side context with the rest of its block
/// weakened in around it.
#[allow(clippy::too_many_arguments)]
fn axiom_left(
    seq: &Sequent,
    blocks: &[(usize, usize)],
    cuts: &[Formula],
    pis: &[Derivation],
    pi: &Derivation,
    i: usize,
    sides: &[usize],
    th: &Theory,
) -> Result<(Derivation, &'static str), TransformError> {
    let Rule::IdPi { idx: q, pi: p1, pi_prime: p2 } = &pis[i].rule else {
        return undef("axiom_left expects an id leaf above the cut");
    };
    let n = cuts.len();
    let s = sides.len();
    let (bst, blen) = blocks[i];
    // Δᵢ[q].π = Bᵢ.π', so τ = π' ∘ π⁻¹ maps Bᵢ back to Δᵢ[q].
    let tau = Perm::compose(p2, &p1.inverse());
    let mut taus = ids(n + s);
    taus[i] = tau;
    let ptau = perm_derivation(&Perm::identity(), &taus, pi, th)?;
    // Move the permuted hypothesis to its side rank.
    let rho = sides.iter().filter(|&&sp| sp < bst).count();
    let mut sg: Vec<usize> = (0..i).collect();
    sg.extend(i + 1..n);
    sg.extend(n..n + rho);
    sg.push(i);
    sg.extend(n + rho..n + s);
    let mut cur = if sg.iter().enumerate().all(|(a, &b)| a == b) {
        ptau
    } else {
        exchange(&sg, &ptau, th)?
    };
    let delta = &seq.left[bst..bst + blen];
    let rank = (n - 1) + rho;
    cur = weaken(&delta[..*q], rank, &cur, th)?;
    cur = weaken(&delta[*q + 1..], rank + q + 1, &cur, th)?;
    let red = mk_mc(
        seq.clone(),
        minus(blocks, i),
        minus(cuts, i),
        minus(pis, i),
        cur,
        th,
    )?;
    Ok((red, "axiom:left"))
}

// ---------------------------------------------------------------------------
// Essential cases: the cut formula is principal on both sides
// ---------------------------------------------------------------------------

#[allow(clippy::too_many_arguments)]
fn essential(
    seq: &Sequent,
    blocks: &[(usize, usize)],
    cuts: &[Formula],
    pis: &[Derivation],
    pi: &Derivation,
    i: usize,
    sides: &[usize],
    th: &Theory,
) -> Result<(Derivation, &'static str), TransformError> {
    let n = cuts.len();
    let (bst, blen) = blocks[i];
    match (&pis[i].rule, &pi.rule) {
        (Rule::AndR, Rule::AndL { which, .. }) => {
            let w = (*which as usize) - 1;
            let child = pis[i].premises[w].conclusion.right.clone();
            let red = mk_mc(
                seq.clone(),
                blocks.to_vec(),
                with(cuts, i, child),
                with(pis, i, pis[i].premises[w].clone()),
                pi.premises[0].clone(),
                th,
            )?;
            Ok((red, "essential:and"))
        }
        (Rule::OrR { which }, Rule::OrL { .. }) => {
            let w = (*which as usize) - 1;
            let child = pis[i].premises[0].conclusion.right.clone();
            let red = mk_mc(
                seq.clone(),
                blocks.to_vec(),
                with(cuts, i, child),
                with(pis, i, pis[i].premises[0].clone()),
                pi.premises[w].clone(),
                th,
            )?;
            Ok((red, "essential:or"))
        }
        (Rule::ImpR, Rule::ImpL { .. }) => {
            let Formula::Imp(dant, _) = &cuts[i] else {
                return undef("impR/impL cut is not an implication");
            };
            let dant = (**dant).clone();
            let e = pis[i].premises[0].conclusion.right.clone();
            // W: the conclusion context without cut i's block.
            let origs: Vec<usize> = (0..seq.left.len())
                .filter(|&p| !(p >= bst && p < bst + blen))
                .collect();
            let wforms: Vec<Formula> = origs.iter().map(|&p| seq.left[p].clone()).collect();
            let wlen = wforms.len();
            // Ξ₀: W ⊢ D, cutting all other blocks into ImpL's first premise.
            let blocks0: Vec<(usize, usize)> = minus(blocks, i)
                .into_iter()
                .map(|(s0, l0)| (if s0 > bst { s0 - blen } else { s0 }, l0))
                .collect();
            let xi0 = mk_mc(
                Sequent::new(seq.sig.clone(), wforms.clone(), dant.clone()),
                blocks0,
                minus(cuts, i),
                minus(pis, i),
                pi.premises[0].clone(),
                th,
            )?;
            // Move ImpR's hypothesis from the end to the front.
            let mut sg = vec![blen];
            sg.extend(0..blen);
            let p1ex = exchange(&sg, &pis[i].premises[0], th)?;
            // Ξ₁: Δᵢ ++ W ⊢ E, cutting D.
            let mut left1 = seq.left[bst..bst + blen].to_vec();
            left1.extend(wforms.clone());
            let xi1 = mk_mc(
                Sequent::new(seq.sig.clone(), left1, e.clone()),
                vec![(blen, wlen)],
                vec![dant],
                vec![xi0],
                p1ex,
                th,
            )?;
            // Ξ₂: the conclusion with a copy of W after block i, cutting E.
            let blocks2: Vec<(usize, usize)> = blocks
                .iter()
                .enumerate()
                .map(|(j, &(s0, l0))| {
                    if j == i {
                        (bst, blen + wlen)
                    } else if s0 > bst {
                        (s0 + wlen, l0)
                    } else {
                        (s0, l0)
                    }
                })
                .collect();
            let mut left2 = seq.left[..bst + blen].to_vec();
            left2.extend(wforms);
            left2.extend_from_slice(&seq.left[bst + blen..]);
            let xi2 = mk_mc(
                Sequent::new(seq.sig.clone(), left2, seq.right.clone()),
                blocks2,
                with(cuts, i, e),
                with(pis, i, xi1),
                pi.premises[1].clone(),
                th,
            )?;
            Ok((contract_copies(xi2, bst, blen, &origs, th)?, "essential:imp"))
        }
        (Rule::ForallR { h }, Rule::ForallL { witness, .. }) => {
            let Formula::Forall(_, body) = &cuts[i] else {
                return undef("forall cut is not a universal");
            };
            let cs = body.support();
            let ds: Vec<(String, Ty)> =
                witness.support().into_iter().filter(|c| !cs.contains(c)).collect();
            let p1 = &pis[i].premises[0];
            let (h2, p1e) = if ds.is_empty() {
                (h.clone(), p1.clone())
            } else {
                support_extend(h, &ds, None, p1, th)?
            };
            let Some(hty2) = p1e.conclusion.sig.get(&h2).cloned() else {
                return undef("raised variable missing after support extension");
            };
            let mut csds = cs;
            csds.extend(ds);
            let mut th2 = Subst::identity();
            bind(&mut th2, &h2, &hty2, witness.close_noms(&csds))?;
            let p1t = subst_derivation(&th2, &p1e, th)?;
            let red = mk_mc(
                seq.clone(),
                blocks.to_vec(),
                with(cuts, i, body.open(witness)),
                with(pis, i, p1t),
                pi.premises[0].clone(),
                th,
            )?;
            Ok((red, "essential:forall"))
        }
        (Rule::ExistsR { witness }, Rule::ExistsL { h, .. }) => {
            let Formula::Exists(_, body) = &cuts[i] else {
                return undef("exists cut is not an existential");
            };
            let cs = body.support();
            let ds: Vec<(String, Ty)> =
                witness.support().into_iter().filter(|c| !cs.contains(c)).collect();
            let pr = &pi.premises[0];
            let (h2, pre) = if ds.is_empty() {
                (h.clone(), pr.clone())
            } else {
                support_extend(h, &ds, Some(i), pr, th)?
            };
            let Some(hty2) = pre.conclusion.sig.get(&h2).cloned() else {
                return undef("raised variable missing after support extension");
            };
            let mut csds = cs;
            csds.extend(ds);
            let mut th2 = Subst::identity();
            bind(&mut th2, &h2, &hty2, witness.close_noms(&csds))?;
            let prt = subst_derivation(&th2, &pre, th)?;
            let red = mk_mc(
                seq.clone(),
                blocks.to_vec(),
                with(cuts, i, body.open(witness)),
                with(pis, i, pis[i].premises[0].clone()),
                prt,
                th,
            )?;
            Ok((red, "essential:exists"))
        }
        (Rule::NablaR { nom: a }, Rule::NablaL { nom: b, .. }) => {
            let Formula::Nabla(ty, body) = &cuts[i] else {
                return undef("nabla cut is not a ∇ formula");
            };
            let p1 = &pis[i].premises[0];
            let p1b = if a == b {
                p1.clone()
            } else {
                let sw = Perm::swap((a, ty), (b, ty))
                    .map_err(|e| TransformError::Undefined(e.to_string()))?;
                perm_derivation(&sw, &ids(blen), p1, th)?
            };
            let red = mk_mc(
                seq.clone(),
                blocks.to_vec(),
                with(cuts, i, body.open(&Term::nom(b, ty))),
                with(pis, i, p1b),
                pi.premises[0].clone(),
                th,
            )?;
            Ok((red, "essential:nabla"))
        }
        (Rule::EqR, Rule::EqL { .. }) => {
            let Some(theta) = eql_theta(&pi.conclusion, i)? else {
                return undef("reflexive equation cut has no unifier");
            };
            if !theta.is_identity() {
                return undef("reflexive equation cut has a non-identity unifier");
            }
            let rho = sides.iter().filter(|&&sp| sp < bst).count();
            let delta = seq.left[bst..bst + blen].to_vec();
            let prw = weaken(&delta, (n - 1) + rho, &pi.premises[0], th)?;
            let red = mk_mc(
                seq.clone(),
                minus(blocks, i),
                minus(cuts, i),
                minus(pis, i),
                prw,
                th,
            )?;
            Ok((red, "essential:eq"))
        }
        (Rule::DefR { clause, theta: pay }, Rule::DefL { .. }) => {
            let insts = defl_instances(&pi.conclusion, i, th)?;
            let Some(k) = insts.iter().position(|inst| inst.clause == *clause) else {
                return undef("no definition instance matches the cut's clause");
            };
            let inst = &insts[k];
            let mut domain = factor_domain(&pi.conclusion);
            for v in &inst.raised.vars {
                if !domain.contains(v) {
                    domain.push(v.clone());
                }
            }
            let sigma = crate::unify::factor_through(&inst.theta, pay, &domain).ok_or_else(
                || {
                    TransformError::Undefined(
                        "definition payload does not factor through the clause instance".into(),
                    )
                },
            )?;
            let prs = subst_derivation(&sigma, &pi.premises[k], th)?;
            let red = mk_mc(
                seq.clone(),
                blocks.to_vec(),
                with(cuts, i, pis[i].premises[0].conclusion.right.clone()),
                with(pis, i, pis[i].premises[0].clone()),
                prs,
                th,
            )?;
            Ok((red, "essential:def"))
        }
        (Rule::NatRZero, Rule::NatL { .. }) => {
            let delta = seq.left[bst..bst + blen].to_vec();
            let w0 = weaken(&delta, 0, &pi.premises[0], th)?;
            let dz = pi.premises[0].conclusion.right.clone();
            let red = mk_mc(
                seq.clone(),
                blocks.to_vec(),
                with(cuts, i, dz),
                with(pis, i, w0),
                pi.premises[2].clone(),
                th,
            )?;
            Ok((red, "essential:nat-zero"))
        }
        (Rule::NatRSucc, Rule::NatL { inv, j, .. }) => {
            let Formula::Nat(st) = &cuts[i] else {
                return undef("nat cut is not a nat formula");
            };
            let ival = st.args[0].clone();
            let nt = Ty::base("nt");
            let di = inv.open(&ival);
            let nat_i = Formula::Nat(ival.clone());
            // δ: Σ; nat I ⊢ D I by induction, reusing Π's base and step.
            let idseq =
                Sequent::new(seq.sig.clone(), vec![di.clone()], di.clone());
            let idleaf = rebuild(
                idseq,
                Rule::IdPi { idx: 0, pi: Perm::identity(), pi_prime: Perm::identity() },
                vec![],
                th,
            )?;
            let dseq = Sequent::new(seq.sig.clone(), vec![nat_i.clone()], di.clone());
            let delta_d = rebuild(
                dseq,
                Rule::NatL { idx: 0, inv: inv.clone(), j: j.clone() },
                vec![pi.premises[0].clone(), pi.premises[1].clone(), idleaf],
                th,
            )?;
            // Ξ₁: Δᵢ ⊢ D I, cutting nat I.
            let delta = seq.left[bst..bst + blen].to_vec();
            let xi1 = mk_mc(
                Sequent::new(seq.sig.clone(), delta.clone(), di.clone()),
                vec![(0, blen)],
                vec![nat_i],
                vec![pis[i].premises[0].clone()],
                delta_d,
                th,
            )?;
            // Π•: the step premise at I.  Replace j by a raised variable
            // applied to fresh variables, restrict those to I's support,
            // then substitute I (closed over its support) for the raised
            // variable.
            let mut csi: Vec<(String, Ty)> = Vec::new();
            for c in ival.support() {
                if !csi.contains(&c) {
                    csi.push(c);
                }
            }
            let mut avoid: BTreeSet<String> = seq.sig.keys().cloned().collect();
            avoid.insert(j.clone());
            let hn = fresh_name("h", &avoid);
            avoid.insert(hn.clone());
            let hty = nt.raise(&csi);
            let mut ys: Vec<(String, Ty)> = Vec::new();
            let mut yargs: Vec<Term> = Vec::new();
            for (cn, cty) in &csi {
                let yn = fresh_name(cn, &avoid);
                avoid.insert(yn.clone());
                ys.push((yn.clone(), cty.clone()));
                yargs.push(Term::var(&yn, cty));
            }
            let happ = Term::apply(&Term::var(&hn, &hty), &yargs);
            let mut th1 = Subst::identity();
            bind(&mut th1, j, &nt, happ)?;
            let mut pstar = subst_derivation(&th1, &pi.premises[1], th)?;
            for ((yn, _), (cn, _)) in ys.iter().zip(&csi) {
                pstar = restrict_name(yn, cn, std::slice::from_ref(cn), &pstar, th)?;
            }
            let mut th2 = Subst::identity();
            bind(&mut th2, &hn, &hty, ival.close_noms(&csi))?;
            let p_i = subst_derivation(&th2, &pstar, th)?;
            // Ξ₂: Δᵢ ⊢ D (s I), cutting D I.
            let dsi = inv.open(st);
            let xi2 = mk_mc(
                Sequent::new(seq.sig.clone(), delta, dsi.clone()),
                vec![(0, blen)],
                vec![di],
                vec![xi1],
                p_i,
                th,
            )?;
            let red = mk_mc(
                seq.clone(),
                blocks.to_vec(),
                with(cuts, i, dsi),
                with(pis, i, xi2),
                pi.premises[2].clone(),
                th,
            )?;
            Ok((red, "essential:nat-succ"))
        }
        _ => undef(format!(
            "no essential reduction for {} against {}",
            pis[i].rule.name(),
            pi.rule.name()
        )),
    }
}

// ---------------------------------------------------------------------------
// Left-commutative cases: a cut's derivation ends in a left rule
// ---------------------------------------------------------------------------

fn left_commutative(
    seq: &Sequent,
    blocks: &[(usize, usize)],
    cuts: &[Formula],
    pis: &[Derivation],
    pi: &Derivation,
    i: usize,
    th: &Theory,
) -> Result<(Derivation, &'static str), TransformError> {
    let (bst, blen) = blocks[i];
    let delta_d = &pis[i];
    let Some(q) = delta_d.rule.principal() else {
        return undef("left_commutative expects a left rule above the cut");
    };
    let g = bst + q;
    // Inner multicut with cut i's derivation replaced.
    let inner = |conc: Sequent,
                 nb: Vec<(usize, usize)>,
                 di: Derivation|
     -> Result<Derivation, TransformError> {
        mk_mc(conc, nb, cuts.to_vec(), with(pis, i, di), pi.clone(), th)
    };
    match &delta_d.rule {
        Rule::BotL { .. } => {
            Ok((rebuild(seq.clone(), Rule::BotL { idx: g }, vec![], th)?, "left:bot"))
        }
        Rule::AndL { which, .. } => {
            let bottom = Rule::AndL { idx: g, which: *which };
            let expected = premises_of(seq, &bottom, th)?;
            let p = inner(expected[0].clone(), blocks.to_vec(), delta_d.premises[0].clone())?;
            Ok((rebuild(seq.clone(), bottom, vec![p], th)?, "left:and"))
        }
        Rule::OrL { .. } => {
            let bottom = Rule::OrL { idx: g };
            let expected = premises_of(seq, &bottom, th)?;
            let p0 = inner(expected[0].clone(), blocks.to_vec(), delta_d.premises[0].clone())?;
            let p1 = inner(expected[1].clone(), blocks.to_vec(), delta_d.premises[1].clone())?;
            Ok((rebuild(seq.clone(), bottom, vec![p0, p1], th)?, "left:or"))
        }
        Rule::ImpL { .. } => {
            let bottom = Rule::ImpL { idx: g };
            let expected = premises_of(seq, &bottom, th)?;
            // First premise: the cut context weakened around Δᵢ ∖ q.
            let mut p0 = weaken(&seq.left[..bst], 0, &delta_d.premises[0], th)?;
            p0 = weaken_end(&seq.left[bst + blen..], &p0, th)?;
            if p0.conclusion != expected[0] {
                return undef("weakened implication premise does not match");
            }
            let p1 = inner(expected[1].clone(), blocks.to_vec(), delta_d.premises[1].clone())?;
            Ok((rebuild(seq.clone(), bottom, vec![p0, p1], th)?, "left:imp"))
        }
        Rule::NablaL { nom, .. } => {
            let bottom = Rule::NablaL { idx: g, nom: nom.clone() };
            let expected = premises_of(seq, &bottom, th)?;
            let p = inner(expected[0].clone(), blocks.to_vec(), delta_d.premises[0].clone())?;
            Ok((rebuild(seq.clone(), bottom, vec![p], th)?, "left:nabla"))
        }
        Rule::ForallL { witness, .. } => {
            let bottom = Rule::ForallL { idx: g, witness: witness.clone() };
            let expected = premises_of(seq, &bottom, th)?;
            let p = inner(expected[0].clone(), blocks.to_vec(), delta_d.premises[0].clone())?;
            Ok((rebuild(seq.clone(), bottom, vec![p], th)?, "left:forall"))
        }
        Rule::ExistsL { h, .. } => {
            let bottom = Rule::ExistsL { idx: g, h: h.clone() };
            let expected = premises_of(seq, &bottom, th)?;
            let Some(hty) = delta_d.premises[0].conclusion.sig.get(h).cloned() else {
                return undef("raised variable missing from the ∃L premise");
            };
            let adds = vec![(h.clone(), hty)];
            let mut prems: Vec<Derivation> = Vec::new();
            for (j, p) in pis.iter().enumerate() {
                if j == i {
                    prems.push(delta_d.premises[0].clone());
                } else {
                    prems.push(extend_sig(&adds, p, th)?);
                }
            }
            let rp = extend_sig(&adds, pi, th)?;
            let p = mk_mc(expected[0].clone(), blocks.to_vec(), cuts.to_vec(), prems, rp, th)?;
            Ok((rebuild(seq.clone(), bottom, vec![p], th)?, "left:exists"))
        }
        Rule::CL { dup, .. } => {
            let bottom = Rule::CL { idx: g, dup: bst + dup };
            let expected = premises_of(seq, &bottom, th)?;
            let nb: Vec<(usize, usize)> = blocks
                .iter()
                .enumerate()
                .map(|(j, &(s0, l0))| {
                    if j == i {
                        (s0, l0 + 1)
                    } else if s0 > bst {
                        (s0 + 1, l0)
                    } else {
                        (s0, l0)
                    }
                })
                .collect();
            let p = inner(expected[0].clone(), nb, delta_d.premises[0].clone())?;
            Ok((rebuild(seq.clone(), bottom, vec![p], th)?, "left:cL"))
        }
        Rule::EqL { .. } => {
            let bottom = Rule::EqL { idx: g };
            match eql_theta(seq, g)? {
                None => Ok((rebuild(seq.clone(), bottom, vec![], th)?, "left:eq")),
                Some(theta) => {
                    let expected = premises_of(seq, &bottom, th)?;
                    let nb: Vec<(usize, usize)> = blocks
                        .iter()
                        .enumerate()
                        .map(|(j, &(s0, l0))| {
                            if j == i {
                                (s0, l0 - 1)
                            } else if s0 > g {
                                (s0 - 1, l0)
                            } else {
                                (s0, l0)
                            }
                        })
                        .collect();
                    let ncuts: Vec<Formula> =
                        cuts.iter().map(|c| c.subst(&theta)).collect();
                    let mut prems = Vec::new();
                    for (j, p) in pis.iter().enumerate() {
                        let np = if j == i {
                            delta_d.premises[0].clone()
                        } else {
                            subst_derivation(&theta, p, th)?
                        };
                        prems.push(align_sig(&expected[0].sig, &np, th)?);
                    }
                    let rp =
                        align_sig(&expected[0].sig, &subst_derivation(&theta, pi, th)?, th)?;
                    let p = mk_mc(expected[0].clone(), nb, ncuts, prems, rp, th)?;
                    Ok((rebuild(seq.clone(), bottom, vec![p], th)?, "left:eq"))
                }
            }
        }
        Rule::DefL { .. } => {
            let bottom = Rule::DefL { idx: g };
            let expected = premises_of(seq, &bottom, th)?;
            let insts = defl_instances(seq, g, th)?;
            if insts.len() != delta_d.premises.len() {
                return undef("definition instances differ between the cut and the conclusion");
            }
            let mut bottoms = Vec::new();
            for (k, inst) in insts.iter().enumerate() {
                let ncuts: Vec<Formula> =
                    cuts.iter().map(|c| c.subst(&inst.theta)).collect();
                let mut prems = Vec::new();
                for (j, p) in pis.iter().enumerate() {
                    let np = if j == i {
                        delta_d.premises[k].clone()
                    } else {
                        subst_derivation(&inst.theta, p, th)?
                    };
                    prems.push(align_sig(&expected[k].sig, &np, th)?);
                }
                let rp = align_sig(
                    &expected[k].sig,
                    &subst_derivation(&inst.theta, pi, th)?,
                    th,
                )?;
                bottoms.push(mk_mc(expected[k].clone(), blocks.to_vec(), ncuts, prems, rp, th)?);
            }
            Ok((rebuild(seq.clone(), bottom, bottoms, th)?, "left:def"))
        }
        Rule::NatL { inv, j, .. } => {
            let bottom = Rule::NatL { idx: g, inv: inv.clone(), j: j.clone() };
            let expected = premises_of(seq, &bottom, th)?;
            let p2 = inner(expected[2].clone(), blocks.to_vec(), delta_d.premises[2].clone())?;
            let red = rebuild(
                seq.clone(),
                bottom,
                vec![delta_d.premises[0].clone(), delta_d.premises[1].clone(), p2],
                th,
            )?;
            Ok((red, "left:nat"))
        }
        r => undef(format!("no left-commutative reduction for {}", r.name())),
    }
}

// ---------------------------------------------------------------------------
// Right-commutative cases: the right premise's rule moves below the multicut
// ---------------------------------------------------------------------------

fn right_commutative(
    seq: &Sequent,
    blocks: &[(usize, usize)],
    cuts: &[Formula],
    pis: &[Derivation],
    pi: &Derivation,
    sides: &[usize],
    th: &Theory,
) -> Result<(Derivation, &'static str), TransformError> {
    let n = cuts.len();
    let inner = |conc: Sequent,
                 nb: Vec<(usize, usize)>,
                 rp: Derivation|
     -> Result<Derivation, TransformError> {
        mk_mc(conc, nb, cuts.to_vec(), pis.to_vec(), rp, th)
    };
    match &pi.rule {
        Rule::TopR | Rule::EqR | Rule::NatRZero => {
            Ok((rebuild(seq.clone(), pi.rule.clone(), vec![], th)?, "right:leaf"))
        }
        Rule::AndR => {
            let expected = premises_of(seq, &Rule::AndR, th)?;
            let p0 = inner(expected[0].clone(), blocks.to_vec(), pi.premises[0].clone())?;
            let p1 = inner(expected[1].clone(), blocks.to_vec(), pi.premises[1].clone())?;
            Ok((rebuild(seq.clone(), Rule::AndR, vec![p0, p1], th)?, "right:and"))
        }
        Rule::OrR { .. }
        | Rule::NatRSucc
        | Rule::ExistsR { .. }
        | Rule::NablaR { .. }
        | Rule::ImpR => {
            let expected = premises_of(seq, &pi.rule, th)?;
            let p = inner(expected[0].clone(), blocks.to_vec(), pi.premises[0].clone())?;
            Ok((rebuild(seq.clone(), pi.rule.clone(), vec![p], th)?, "right:one"))
        }
        Rule::ForallR { h } => {
            let bottom = Rule::ForallR { h: h.clone() };
            let expected = premises_of(seq, &bottom, th)?;
            let Some(hty) = pi.premises[0].conclusion.sig.get(h).cloned() else {
                return undef("raised variable missing from the ∀R premise");
            };
            let adds = vec![(h.clone(), hty)];
            let prems: Vec<Derivation> = pis
                .iter()
                .map(|p| extend_sig(&adds, p, th))
                .collect::<Result<_, _>>()?;
            let p = mk_mc(
                expected[0].clone(),
                blocks.to_vec(),
                cuts.to_vec(),
                prems,
                pi.premises[0].clone(),
                th,
            )?;
            Ok((rebuild(seq.clone(), bottom, vec![p], th)?, "right:forall"))
        }
        Rule::DefR { .. } => {
            let expected = premises_of(seq, &pi.rule, th)?;
            let p = inner(expected[0].clone(), blocks.to_vec(), pi.premises[0].clone())?;
            Ok((rebuild(seq.clone(), pi.rule.clone(), vec![p], th)?, "right:def"))
        }
        // Left rules acting on a side formula.
        Rule::BotL { idx } => {
            let g = sides[*idx - n];
            Ok((rebuild(seq.clone(), Rule::BotL { idx: g }, vec![], th)?, "right:bot"))
        }
        Rule::AndL { idx, which } => {
            let g = sides[*idx - n];
            let bottom = Rule::AndL { idx: g, which: *which };
            let expected = premises_of(seq, &bottom, th)?;
            let p = inner(expected[0].clone(), blocks.to_vec(), pi.premises[0].clone())?;
            Ok((rebuild(seq.clone(), bottom, vec![p], th)?, "right:andL"))
        }
        Rule::OrL { idx } => {
            let g = sides[*idx - n];
            let bottom = Rule::OrL { idx: g };
            let expected = premises_of(seq, &bottom, th)?;
            let p0 = inner(expected[0].clone(), blocks.to_vec(), pi.premises[0].clone())?;
            let p1 = inner(expected[1].clone(), blocks.to_vec(), pi.premises[1].clone())?;
            Ok((rebuild(seq.clone(), bottom, vec![p0, p1], th)?, "right:orL"))
        }
        Rule::NablaL { idx, nom } => {
            let g = sides[*idx - n];
            let bottom = Rule::NablaL { idx: g, nom: nom.clone() };
            let expected = premises_of(seq, &bottom, th)?;
            let p = inner(expected[0].clone(), blocks.to_vec(), pi.premises[0].clone())?;
            Ok((rebuild(seq.clone(), bottom, vec![p], th)?, "right:nablaL"))
        }
        Rule::ForallL { idx, witness } => {
            let g = sides[*idx - n];
            let bottom = Rule::ForallL { idx: g, witness: witness.clone() };
            let expected = premises_of(seq, &bottom, th)?;
            let p = inner(expected[0].clone(), blocks.to_vec(), pi.premises[0].clone())?;
            Ok((rebuild(seq.clone(), bottom, vec![p], th)?, "right:forallL"))
        }
        Rule::ExistsL { idx, h } => {
            let g = sides[*idx - n];
            let bottom = Rule::ExistsL { idx: g, h: h.clone() };
            let expected = premises_of(seq, &bottom, th)?;
            let Some(hty) = pi.premises[0].conclusion.sig.get(h).cloned() else {
                return undef("raised variable missing from the ∃L premise");
            };
            let adds = vec![(h.clone(), hty)];
            let prems: Vec<Derivation> = pis
                .iter()
                .map(|p| extend_sig(&adds, p, th))
                .collect::<Result<_, _>>()?;
            let p = mk_mc(
                expected[0].clone(),
                blocks.to_vec(),
                cuts.to_vec(),
                prems,
                pi.premises[0].clone(),
                th,
            )?;
            Ok((rebuild(seq.clone(), bottom, vec![p], th)?, "right:existsL"))
        }
        Rule::ImpL { idx } => {
            let g = sides[*idx - n];
            let bottom = Rule::ImpL { idx: g };
            let expected = premises_of(seq, &bottom, th)?;
            let nb0: Vec<(usize, usize)> = blocks
                .iter()
                .map(|&(s0, l0)| (if s0 > g { s0 - 1 } else { s0 }, l0))
                .collect();
            let p0 = inner(expected[0].clone(), nb0, pi.premises[0].clone())?;
            let p1 = inner(expected[1].clone(), blocks.to_vec(), pi.premises[1].clone())?;
            Ok((rebuild(seq.clone(), bottom, vec![p0, p1], th)?, "right:impL"))
        }
        Rule::EqL { idx } => {
            let g = sides[*idx - n];
            let bottom = Rule::EqL { idx: g };
            match eql_theta(seq, g)? {
                None => Ok((rebuild(seq.clone(), bottom, vec![], th)?, "right:eqL")),
                Some(theta) => {
                    let expected = premises_of(seq, &bottom, th)?;
                    let nb: Vec<(usize, usize)> = blocks
                        .iter()
                        .map(|&(s0, l0)| (if s0 > g { s0 - 1 } else { s0 }, l0))
                        .collect();
                    let ncuts: Vec<Formula> =
                        cuts.iter().map(|c| c.subst(&theta)).collect();
                    let prems: Vec<Derivation> = pis
                        .iter()
                        .map(|p| {
                            align_sig(
                                &expected[0].sig,
                                &subst_derivation(&theta, p, th)?,
                                th,
                            )
                        })
                        .collect::<Result<_, _>>()?;
                    let rp = align_sig(&expected[0].sig, &pi.premises[0], th)?;
                    let p = mk_mc(expected[0].clone(), nb, ncuts, prems, rp, th)?;
                    Ok((rebuild(seq.clone(), bottom, vec![p], th)?, "right:eqL"))
                }
            }
        }
        Rule::DefL { idx } => {
            let g = sides[*idx - n];
            let bottom = Rule::DefL { idx: g };
            let expected = premises_of(seq, &bottom, th)?;
            let insts = defl_instances(seq, g, th)?;
            if insts.len() != pi.premises.len() {
                return undef("definition instances differ between premise and conclusion");
            }
            let mut bottoms = Vec::new();
            for (k, inst) in insts.iter().enumerate() {
                let ncuts: Vec<Formula> =
                    cuts.iter().map(|c| c.subst(&inst.theta)).collect();
                let prems: Vec<Derivation> = pis
                    .iter()
                    .map(|p| {
                        align_sig(
                            &expected[k].sig,
                            &subst_derivation(&inst.theta, p, th)?,
                            th,
                        )
                    })
                    .collect::<Result<_, _>>()?;
                let rp = align_sig(&expected[k].sig, &pi.premises[k], th)?;
                bottoms.push(mk_mc(expected[k].clone(), blocks.to_vec(), ncuts, prems, rp, th)?);
            }
            Ok((rebuild(seq.clone(), bottom, bottoms, th)?, "right:defL"))
        }
        Rule::NatL { idx, inv, j } => {
            let g = sides[*idx - n];
            let bottom = Rule::NatL { idx: g, inv: inv.clone(), j: j.clone() };
            let expected = premises_of(seq, &bottom, th)?;
            let p2 = inner(expected[2].clone(), blocks.to_vec(), pi.premises[2].clone())?;
            let red = rebuild(
                seq.clone(),
                bottom,
                vec![pi.premises[0].clone(), pi.premises[1].clone(), p2],
                th,
            )?;
            Ok((red, "right:natL"))
        }
        Rule::CL { idx, dup } => {
            let g = sides[*idx - n];
            let srank = *idx - n;
            let target = n + srank + 1;
            let bottom = Rule::CL { idx: g, dup: g + 1 };
            let expected = premises_of(seq, &bottom, th)?;
            let pr = &pi.premises[0];
            let pre = if *dup == target {
                pr.clone()
            } else {
                exchange(&move_sigma(pr.conclusion.left.len(), *dup, target), pr, th)?
            };
            let nb: Vec<(usize, usize)> = blocks
                .iter()
                .map(|&(s0, l0)| (if s0 > g { s0 + 1 } else { s0 }, l0))
                .collect();
            let p = inner(expected[0].clone(), nb, pre)?;
            Ok((rebuild(seq.clone(), bottom, vec![p], th)?, "right:cL"))
        }
        r => undef(format!("no right-commutative reduction for {}", r.name())),
    }
}

// ---------------------------------------------------------------------------
// Structural case: the right premise contracts a cut formula
// ---------------------------------------------------------------------------

fn structural(
    seq: &Sequent,
    blocks: &[(usize, usize)],
    cuts: &[Formula],
    pis: &[Derivation],
    pi: &Derivation,
    th: &Theory,
) -> Result<(Derivation, &'static str), TransformError> {
    let Rule::CL { idx: i, dup } = &pi.rule else {
        return undef("structural expects a contraction");
    };
    let i = *i;
    let (bst, blen) = blocks[i];
    let b = cuts[i].clone();
    // Move the copy to cut rank i+1.
    let pr = &pi.premises[0];
    let pre = if *dup == i + 1 {
        pr.clone()
    } else {
        exchange(&move_sigma(pr.conclusion.left.len(), *dup, i + 1), pr, th)?
    };
    // Multicut with block i duplicated, then contract the copies away.
    let mut left2 = seq.left[..bst + blen].to_vec();
    left2.extend_from_slice(&seq.left[bst..bst + blen]);
    left2.extend_from_slice(&seq.left[bst + blen..]);
    let mut nb: Vec<(usize, usize)> = Vec::new();
    for (j, &(s0, l0)) in blocks.iter().enumerate() {
        if j < i {
            nb.push((s0, l0));
        } else if j == i {
            nb.push((s0, l0));
            nb.push((s0 + l0, l0));
        } else {
            nb.push((s0 + blen, l0));
        }
    }
    let mut nc = cuts.to_vec();
    nc.insert(i + 1, b);
    let mut prems: Vec<Derivation> = pis.to_vec();
    prems.insert(i + 1, pis[i].clone());
    let big = mk_mc(
        Sequent::new(seq.sig.clone(), left2, seq.right.clone()),
        nb,
        nc,
        prems,
        pre,
        th,
    )?;
    let origs: Vec<usize> = (bst..bst + blen).collect();
    Ok((contract_copies(big, bst, blen, &origs, th)?, "structural:cL"))
}

// ---------------------------------------------------------------------------
// Merge case: the right premise is itself a multicut
// ---------------------------------------------------------------------------

/// Merges a multicut whose right premise is a multicut into one multicut.
/// Supported when the inner multicut's blocks cover only cut formulas of
/// the outer one and merged blocks are adjacent; under the innermost
/// reduction strategy this case never arises.
fn merge_multicut(
    seq: &Sequent,
    blocks: &[(usize, usize)],
    cuts: &[Formula],
    pis: &[Derivation],
    pi: &Derivation,
    th: &Theory,
) -> Result<(Derivation, &'static str), TransformError> {
    let Rule::Mc { blocks: pblocks, cuts: pcuts } = &pi.rule else {
        return undef("merge_multicut expects a multicut on the right");
    };
    let n = cuts.len();
    let m = pcuts.len();
    for &(ps, pl) in pblocks {
        if ps + pl > n {
            return undef("inner multicut cuts a side formula");
        }
        for k in ps..(ps + pl).saturating_sub(1) {
            if blocks[k].0 + blocks[k].1 != blocks[k + 1].0 {
                return undef("inner multicut merges non-adjacent blocks");
            }
        }
    }
    // Inner derivations Ξ^j: one per inner block, cutting its outer cuts.
    let mut xjs: Vec<Derivation> = Vec::new();
    let mut spans: Vec<(usize, usize)> = Vec::new();
    for (j, &(ps, pl)) in pblocks.iter().enumerate() {
        let gstart = if ps < blocks.len() { blocks[ps].0 } else { seq.left.len() };
        let mut bl = Vec::new();
        let mut acc = 0;
        for &(_, len) in &blocks[ps..ps + pl] {
            bl.push((acc, len));
            acc += len;
        }
        let ctx = seq.left[gstart..gstart + acc].to_vec();
        let xj = mk_mc(
            Sequent::new(seq.sig.clone(), ctx, pcuts[j].clone()),
            bl,
            cuts[ps..ps + pl].to_vec(),
            pis[ps..ps + pl].to_vec(),
            pi.premises[j].clone(),
            th,
        )?;
        xjs.push(xj);
        spans.push((gstart, acc));
    }
    // Outer cuts not covered by an inner block keep their derivations.
    let covered = {
        let mut c = vec![false; n];
        for &(ps, pl) in pblocks {
            for flag in &mut c[ps..ps + pl] {
                *flag = true;
            }
        }
        c
    };
    let unc: Vec<usize> = (0..n).filter(|&k| !covered[k]).collect();
    let mut nb = Vec::new();
    let mut ncuts = Vec::new();
    let mut nprems = Vec::new();
    let mut order = Vec::new();
    let mut k = 0;
    let mut jn = 0;
    while k < n || jn < m {
        if jn < m && pblocks[jn].0 == k {
            nb.push(spans[jn]);
            ncuts.push(pcuts[jn].clone());
            nprems.push(xjs[jn].clone());
            order.push(jn);
            k += pblocks[jn].1;
            jn += 1;
        } else if k < n {
            nb.push(blocks[k]);
            ncuts.push(cuts[k].clone());
            nprems.push(pis[k].clone());
            let rank = unc.iter().position(|&u| u == k).unwrap();
            order.push(m + rank);
            k += 1;
        } else {
            return undef("inner multicut blocks are out of order");
        }
    }
    // Reorder the inner right premise: its context reads
    // pcuts ++ uncovered cuts ++ sides, the merged one needs ncuts ++ sides.
    let rprem = &pi.premises[m];
    let rlen = rprem.conclusion.left.len();
    let mut sg = order;
    sg.extend(m + unc.len()..rlen);
    let rp = if sg.iter().enumerate().all(|(a, &b)| a == b) {
        rprem.clone()
    } else {
        exchange(&sg, rprem, th)?
    };
    Ok((mk_mc(seq.clone(), nb, ncuts, nprems, rp, th)?, "mc:merge"))
}

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

/// Contracts the leftmost innermost multicut, if any.  The premises of the
/// chosen redex are multicut-free, so every transformation invoked during
/// contraction is defined on them.
pub fn reduce_once(
    d: &Derivation,
    th: &Theory,
) -> Result<Option<(Derivation, &'static str)>, TransformError> {
    for (k, p) in d.premises.iter().enumerate() {
        if let Some((np, case)) = reduce_once(p, th)? {
            let mut prems = d.premises.clone();
            prems[k] = np;
            let nd = Derivation {
                conclusion: d.conclusion.clone(),
                rule: d.rule.clone(),
                premises: prems,
            };
            return Ok(Some((nd, case)));
        }
    }
    if matches!(d.rule, Rule::Mc { .. }) {
        let (nd, case) = contract(d, th)?;
        return Ok(Some((nd, case)));
    }
    Ok(None)
}

/// Eliminates all multicuts, spending at most `fuel` reduction steps.
pub fn normalize(d: &Derivation, th: &Theory, fuel: usize) -> Result<Normalization, CutError> {
    let mut cur = d.clone();
    let mut trace = Vec::new();
    for step in 0..=fuel {
        match reduce_once(&cur, th)? {
            None => return Ok(Normalization { derivation: cur, steps: step, trace }),
            Some((nd, case)) => {
                if step == fuel {
                    return Err(CutError::OutOfFuel(fuel));
                }
                trace.push(case.to_string());
                cur = nd;
            }
        }
    }
    Err(CutError::OutOfFuel(fuel))
}
