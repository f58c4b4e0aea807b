//! Turns proof scripts into checked derivations.
//!
//! Each script node names a rule; the elaborator builds the rule's payload,
//! asks the kernel for the premises it demands and recurses into the
//! subproofs.  `defr` payloads carry only a clause index: the instantiating
//! substitution is recovered by pattern-unifying the raised clause head
//! with the goal atom.  `cut` is sugar for a one-block multicut, and
//! `auto` closes goals using only invertible propositional steps.

use std::collections::BTreeMap;

use lg::unify::{unify, UnifProblem, UnifResult};
use lg::{
    kernel::premises_of, Derivation, Formula, Perm, Rule, Sequent, Subst, Term, Theory, Ty,
};
use thiserror::Error;

use crate::parse::{nom_table, ResolveEnv, SArg, SScript, Theorem};

#[derive(Debug, Error)]
#[error("{line}:{col}: in `{rule}`: {msg}")]
pub struct ElabError {
    pub line: usize,
    pub col: usize,
    pub rule: String,
    pub msg: String,
}

/// Elaborates a theorem's script against its stated sequent.
pub fn elaborate(thm: &Theorem, th: &Theory) -> Result<Derivation, ElabError> {
    let nomtys = nom_table(th);
    elab(&thm.sequent, &thm.script, th, &nomtys)
}

fn elab(
    seq: &Sequent,
    s: &SScript,
    th: &Theory,
    nomtys: &BTreeMap<String, Ty>,
) -> Result<Derivation, ElabError> {
    let fail = |msg: String| ElabError {
        line: s.line,
        col: s.col,
        rule: s.rule.clone(),
        msg,
    };
    if s.rule == "auto" {
        if !s.subs.is_empty() {
            return Err(fail("`auto` takes no subproofs".into()));
        }
        return auto(seq, th).map_err(fail);
    }
    let rule = build_rule(seq, s, th, nomtys).map_err(&fail)?;
    let prems = premises_of(seq, &rule, th).map_err(|v| fail(v.to_string()))?;
    if prems.len() != s.subs.len() {
        return Err(fail(format!(
            "rule yields {} premise(s) but {} subproof(s) were given",
            prems.len(),
            s.subs.len()
        )));
    }
    let premises = prems
        .iter()
        .zip(&s.subs)
        .map(|(p, sub)| elab(p, sub, th, nomtys))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Derivation { conclusion: seq.clone(), rule, premises })
}

fn build_rule(
    seq: &Sequent,
    s: &SScript,
    th: &Theory,
    nomtys: &BTreeMap<String, Ty>,
) -> Result<Rule, String> {
    let num = |i: usize| match s.args.get(i) {
        Some(SArg::Num(n)) => *n,
        _ => unreachable!("parser guarantees payload shapes"),
    };
    let name = |i: usize| match s.args.get(i) {
        Some(SArg::Name(n)) => n.clone(),
        _ => unreachable!("parser guarantees payload shapes"),
    };
    let env = ResolveEnv { th, sig: &seq.sig, vars: &[], nomtys };
    let term = |i: usize| match s.args.get(i) {
        Some(SArg::Term(t)) => env.term(t, &mut Vec::new()).map(|(t, _)| t),
        _ => unreachable!("parser guarantees payload shapes"),
    };
    let perm = |i: usize| -> Result<Perm, String> {
        match s.args.get(i) {
            Some(SArg::Perm(pairs)) => {
                let mut resolved = Vec::new();
                for (a, b) in pairs {
                    let ty = nomtys
                        .get(a)
                        .ok_or_else(|| format!("`{}` is not a declared nominal constant", a))?;
                    if !nomtys.contains_key(b) {
                        return Err(format!("`{}` is not a declared nominal constant", b));
                    }
                    resolved.push(((a.clone(), ty.clone()), b.clone()));
                }
                Perm::from_pairs(&resolved).map_err(|e| e.to_string())
            }
            _ => unreachable!("parser guarantees payload shapes"),
        }
    };
    Ok(match s.rule.as_str() {
        "id" => Rule::IdPi { idx: num(0), pi: Perm::identity(), pi_prime: Perm::identity() },
        "idp" => Rule::IdPi { idx: num(0), pi: perm(1)?, pi_prime: perm(2)? },
        "cl" => Rule::CL { idx: num(0), dup: num(1) },
        "botl" => Rule::BotL { idx: num(0) },
        "topr" => Rule::TopR,
        "andl" => {
            let which = num(1);
            if which != 1 && which != 2 {
                return Err("conjunct selector must be 1 or 2".into());
            }
            Rule::AndL { idx: num(0), which: which as u8 }
        }
        "andr" => Rule::AndR,
        "orl" => Rule::OrL { idx: num(0) },
        "orr" => {
            let which = num(0);
            if which != 1 && which != 2 {
                return Err("disjunct selector must be 1 or 2".into());
            }
            Rule::OrR { which: which as u8 }
        }
        "impl" => Rule::ImpL { idx: num(0) },
        "impr" => Rule::ImpR,
        "foralll" => Rule::ForallL { idx: num(0), witness: term(1)? },
        "forallr" => Rule::ForallR { h: name(0) },
        "existsl" => Rule::ExistsL { idx: num(0), h: name(1) },
        "existsr" => Rule::ExistsR { witness: term(0)? },
        "nablal" => Rule::NablaL { idx: num(0), nom: name(1) },
        "nablar" => Rule::NablaR { nom: name(0) },
        "eql" => Rule::EqL { idx: num(0) },
        "eqr" => Rule::EqR,
        "defl" => Rule::DefL { idx: num(0) },
        "defr" => {
            let clause = num(0);
            let theta = defr_subst(seq, clause, th)?;
            Rule::DefR { clause, theta }
        }
        "natl" => {
            let (x, body) = match s.args.get(1) {
                Some(SArg::Bind(x, f)) => (x.clone(), f.clone()),
                _ => unreachable!("parser guarantees payload shapes"),
            };
            let nt = Ty::base("nt");
            let mut stack = vec![(x, nt)];
            let inv = env.formula(&body, &mut stack)?;
            Rule::NatL { idx: num(0), inv, j: name(2) }
        }
        "natrz" => Rule::NatRZero,
        "natrs" => Rule::NatRSucc,
        "cut" => {
            let split = num(0);
            let cut = match s.args.get(1) {
                Some(SArg::Formula(f)) => env.formula(f, &mut Vec::new())?,
                _ => unreachable!("parser guarantees payload shapes"),
            };
            Rule::Mc { blocks: vec![(0, split)], cuts: vec![cut] }
        }
        r => return Err(format!("unknown rule `{}`", r)),
    })
}

/// Computes the `defR` substitution by unifying the freshened raised clause
/// head with the goal atom, pairwise under a closure over the atom's support.
fn defr_subst(seq: &Sequent, clause: usize, th: &Theory) -> Result<Subst, String> {
    let atom = &seq.right;
    let (p, aargs) = match atom {
        Formula::Atom(p, args) => (p, args),
        f => return Err(format!("goal `{}` is not an atom", f)),
    };
    let c = th
        .clauses
        .get(clause)
        .filter(|c| &c.head_pred == p)
        .ok_or_else(|| format!("clause {} does not define `{}`", clause, p))?;
    let cs = atom.support();
    let raised = lg::kernel::freshened_raise(c, &cs, seq);
    let hargs = match raised.head_atom() {
        Formula::Atom(_, args) => args,
        _ => unreachable!("clause heads are atoms"),
    };
    if hargs.len() != aargs.len() {
        return Err(format!("clause {} does not match the goal's arity", clause));
    }
    let mut theta = Subst::identity();
    for (ht, at) in hargs.iter().zip(aargs) {
        let l = theta.apply(ht).close_noms(&cs);
        let r = theta.apply(at).close_noms(&cs);
        match unify(&UnifProblem { left: l, right: r }) {
            UnifResult::NoUnifier => {
                return Err(format!("clause {} head does not match the goal", clause))
            }
            UnifResult::NotAPattern(t) => {
                return Err(format!("outside the pattern fragment at `{}`", t))
            }
            UnifResult::Mgu(s) => theta = Subst::compose(&theta, &s),
        }
    }
    Ok(theta.minimized())
}

/// Deterministic proof search restricted to invertible propositional rules
/// plus the identity, so its success never depends on search order.
fn auto(seq: &Sequent, th: &Theory) -> Result<Derivation, String> {
    if seq.right == Formula::Top {
        return close(seq, Rule::TopR, th);
    }
    if let Some(idx) = seq.left.iter().position(|f| f == &Formula::Bot) {
        return close(seq, Rule::BotL { idx }, th);
    }
    if let Some(idx) = seq.left.iter().position(|f| f == &seq.right) {
        return close(
            seq,
            Rule::IdPi { idx, pi: Perm::identity(), pi_prime: Perm::identity() },
            th,
        );
    }
    let rule = match &seq.right {
        Formula::Imp(_, _) => Some(Rule::ImpR),
        Formula::And(_, _) => Some(Rule::AndR),
        _ => None,
    };
    let rule = rule.or_else(|| {
        seq.left
            .iter()
            .position(|f| matches!(f, Formula::Or(_, _)))
            .map(|idx| Rule::OrL { idx })
    });
    match rule {
        Some(rule) => {
            let prems = premises_of(seq, &rule, th).map_err(|v| v.to_string())?;
            let premises = prems
                .iter()
                .map(|p| auto(p, th))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Derivation { conclusion: seq.clone(), rule, premises })
        }
        None => Err(format!("`auto` is stuck at `{}`", seq)),
    }
}

fn close(seq: &Sequent, rule: Rule, th: &Theory) -> Result<Derivation, String> {
    premises_of(seq, &rule, th).map_err(|v| v.to_string())?;
    Ok(Derivation::leaf(seq.clone(), rule))
}

/// Parses and resolves a term given on the command line, used by `unify`.
pub fn parse_closed_term(
    text: &str,
    sig: &lg::Signature,
    th: &Theory,
) -> Result<Term, String> {
    let st = crate::parse::parse_standalone_term(text, th).map_err(|e| e.to_string())?;
    let nomtys = nom_table(th);
    let env = ResolveEnv { th, sig, vars: &[], nomtys: &nomtys };
    env.term(&st, &mut Vec::new()).map(|(t, _)| t)
}
