//! The connective layer: formulas, levels, definition clauses,
//! stratification and clause raising.
//!
//! Quantifiers bind de Bruijn indices inside the terms below them; the index
//! space is shared with term-level λs, so structural equality of formulas is
//! α-equivalence.

use crate::term::{Ctx, Perm, Subst, Term, TermError, Ty, fmt_term, fresh_name, fresh_nom};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Formula {
    Bot,
    Top,
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Imp(Box<Formula>, Box<Formula>),
    /// ∀ over a non-`o` type.
    Forall(Ty, Box<Formula>),
    /// ∃ over a non-`o` type.
    Exists(Ty, Box<Formula>),
    /// ∇ over a nominal type.
    Nabla(Ty, Box<Formula>),
    /// `s = t` at the annotated type.
    Eq(Term, Term, Ty),
    Atom(String, Vec<Term>),
    /// `nat t` with `t : nt`.
    Nat(Term),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FormulaError {
    #[error("quantified type {0} contains o")]
    QuantOverO(String),
    #[error("nabla over non-nominal type {0}")]
    NablaNotNominal(String),
    #[error("unknown predicate `{0}`")]
    UnknownPred(String),
    #[error("predicate `{0}` applied to wrong number or type of arguments")]
    BadAtom(String),
    #[error("equation annotated {0} but sides have types {1} and {2}")]
    BadEq(String, String, String),
    #[error("nat argument must have type nt, found {0}")]
    BadNat(String),
    #[error(transparent)]
    Term(#[from] TermError),
}

impl Formula {
    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn imp(a: Formula, b: Formula) -> Formula {
        Formula::Imp(Box::new(a), Box::new(b))
    }

    pub fn forall(ty: Ty, body: Formula) -> Formula {
        Formula::Forall(ty, Box::new(body))
    }

    pub fn exists(ty: Ty, body: Formula) -> Formula {
        Formula::Exists(ty, Box::new(body))
    }

    pub fn nabla(ty: Ty, body: Formula) -> Formula {
        Formula::Nabla(ty, Box::new(body))
    }

    /// `B ≡ C` rendered as `(B ⊃ C) ∧ (C ⊃ B)`.
    pub fn iff(a: Formula, b: Formula) -> Formula {
        Formula::and(Formula::imp(a.clone(), b.clone()), Formula::imp(b, a))
    }

    /// Applies `f` to every term, passing the number of formula binders
    /// crossed above the term's root.
    pub fn map_terms(&self, f: &impl Fn(usize, &Term) -> Term) -> Formula {
        self.map_at(0, f)
    }

    fn map_at(&self, d: usize, f: &impl Fn(usize, &Term) -> Term) -> Formula {
        match self {
            Formula::Bot => Formula::Bot,
            Formula::Top => Formula::Top,
            Formula::And(a, b) => Formula::and(a.map_at(d, f), b.map_at(d, f)),
            Formula::Or(a, b) => Formula::or(a.map_at(d, f), b.map_at(d, f)),
            Formula::Imp(a, b) => Formula::imp(a.map_at(d, f), b.map_at(d, f)),
            Formula::Forall(ty, b) => Formula::forall(ty.clone(), b.map_at(d + 1, f)),
            Formula::Exists(ty, b) => Formula::exists(ty.clone(), b.map_at(d + 1, f)),
            Formula::Nabla(ty, b) => Formula::nabla(ty.clone(), b.map_at(d + 1, f)),
            Formula::Eq(s, t, ty) => Formula::Eq(f(d, s), f(d, t), ty.clone()),
            Formula::Atom(p, ts) => {
                Formula::Atom(p.clone(), ts.iter().map(|t| f(d, t)).collect())
            }
            Formula::Nat(t) => Formula::Nat(f(d, t)),
        }
    }

    fn fold_terms(&self, acc: &mut impl FnMut(&Term)) {
        match self {
            Formula::Bot | Formula::Top => {}
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Imp(a, b) => {
                a.fold_terms(acc);
                b.fold_terms(acc);
            }
            Formula::Forall(_, b) | Formula::Exists(_, b) | Formula::Nabla(_, b) => {
                b.fold_terms(acc)
            }
            Formula::Eq(s, t, _) => {
                acc(s);
                acc(t);
            }
            Formula::Atom(_, ts) => {
                for t in ts {
                    acc(t);
                }
            }
            Formula::Nat(t) => acc(t),
        }
    }

    /// Instantiates the outermost (just-stripped) quantifier binder with a
    /// closed term.
    pub fn open(&self, repl: &Term) -> Formula {
        self.map_terms(&|d, t| t.open_bound(d, repl))
    }

    /// Abstracts an eigenvariable, producing a body whose dangling index 0
    /// refers to a quantifier about to be wrapped around it.
    pub fn close_evar(&self, name: &str) -> Formula {
        self.map_terms(&|d, t| t.close_evar(name, d))
    }

    pub fn perm(&self, p: &Perm) -> Formula {
        self.map_terms(&|_, t| t.perm(p))
    }

    pub fn subst(&self, s: &Subst) -> Formula {
        let m = s.term_map();
        self.map_terms(&|_, t| t.subst_evars(&m))
    }

    pub fn subst_evars(&self, m: &BTreeMap<String, Term>) -> Formula {
        self.map_terms(&|_, t| t.subst_evars(m))
    }

    /// Nominal constants in first-occurrence left-to-right order.
    pub fn support(&self) -> Vec<(String, Ty)> {
        let mut out = Vec::new();
        self.fold_terms(&mut |t| t.collect_support(&mut out));
        out
    }

    pub fn support_names(&self) -> BTreeSet<String> {
        self.support().into_iter().map(|(n, _)| n).collect()
    }

    pub fn free_evars(&self) -> Vec<(String, Ty)> {
        let mut out = Vec::new();
        self.fold_terms(&mut |t| t.collect_evars(&mut out));
        out
    }

    /// True if no dangling de Bruijn index escapes (a well-formed sequent
    /// formula).
    pub fn is_closed(&self) -> bool {
        let mut ok = true;
        self.closed_at(0, &mut ok);
        ok
    }

    fn closed_at(&self, d: usize, ok: &mut bool) {
        match self {
            Formula::Bot | Formula::Top => {}
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Imp(a, b) => {
                a.closed_at(d, ok);
                b.closed_at(d, ok);
            }
            Formula::Forall(_, b) | Formula::Exists(_, b) | Formula::Nabla(_, b) => {
                b.closed_at(d + 1, ok)
            }
            Formula::Eq(s, t, _) => {
                *ok = *ok && s.closed_under(d) && t.closed_under(d);
            }
            Formula::Atom(_, ts) => {
                for t in ts {
                    *ok = *ok && t.closed_under(d);
                }
            }
            Formula::Nat(t) => *ok = *ok && t.closed_under(d),
        }
    }

    /// Well-formedness against a theory: typing plus the quantifier
    /// restrictions.
    pub fn typecheck(&self, ctx: &Ctx, th: &Theory) -> Result<(), FormulaError> {
        self.check_at(ctx, th, &mut Vec::new())
    }

    fn check_at(&self, ctx: &Ctx, th: &Theory, binders: &mut Vec<Ty>) -> Result<(), FormulaError> {
        match self {
            Formula::Bot | Formula::Top => Ok(()),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Imp(a, b) => {
                a.check_at(ctx, th, binders)?;
                b.check_at(ctx, th, binders)
            }
            Formula::Forall(ty, b) | Formula::Exists(ty, b) => {
                if ty.contains_o() {
                    return Err(FormulaError::QuantOverO(ty.to_string()));
                }
                binders.push(ty.clone());
                let r = b.check_at(ctx, th, binders);
                binders.pop();
                r
            }
            Formula::Nabla(ty, b) => {
                if !ty.is_nominal_base() {
                    return Err(FormulaError::NablaNotNominal(ty.to_string()));
                }
                binders.push(ty.clone());
                let r = b.check_at(ctx, th, binders);
                binders.pop();
                r
            }
            Formula::Eq(s, t, ty) => {
                let ts = self.tyck_term(s, ctx, binders)?;
                let tt = self.tyck_term(t, ctx, binders)?;
                if &ts != ty || &tt != ty {
                    return Err(FormulaError::BadEq(
                        ty.to_string(),
                        ts.to_string(),
                        tt.to_string(),
                    ));
                }
                Ok(())
            }
            Formula::Atom(p, ts) => {
                let pty = th
                    .preds
                    .get(p)
                    .map(|(ty, _)| ty.clone())
                    .ok_or_else(|| FormulaError::UnknownPred(p.clone()))?;
                let (atys, res) = pty.strip();
                if !res.is_o() || atys.len() != ts.len() {
                    return Err(FormulaError::BadAtom(p.clone()));
                }
                for (t, expect) in ts.iter().zip(&atys) {
                    let found = self.tyck_term(t, ctx, binders)?;
                    if &found != expect {
                        return Err(FormulaError::BadAtom(p.clone()));
                    }
                }
                Ok(())
            }
            Formula::Nat(t) => {
                let found = self.tyck_term(t, ctx, binders)?;
                if found != Ty::base("nt") {
                    return Err(FormulaError::BadNat(found.to_string()));
                }
                Ok(())
            }
        }
    }

    fn tyck_term(&self, t: &Term, ctx: &Ctx, binders: &[Ty]) -> Result<Ty, FormulaError> {
        // Dangling indices refer to enclosing formula binders: wrap the term
        // in those binders (innermost quantifier = index 0 = last pushed).
        let wrapped = Term::lam(binders.to_vec(), t.clone());
        let full = wrapped.typecheck(ctx)?;
        let (mut args, res) = full.strip();
        // Strip the wrapper types again.
        args.drain(..binders.len());
        let mut ty = res;
        for a in args.into_iter().rev() {
            ty = Ty::arrow(a, ty);
        }
        Ok(ty)
    }

    /// The level of the formula under the given predicate level assignment.
    pub fn level(&self, levels: &BTreeMap<String, usize>) -> Result<usize, FormulaError> {
        match self {
            Formula::Bot | Formula::Top => Ok(0),
            Formula::Eq(_, _, _) => Ok(0),
            Formula::And(a, b) | Formula::Or(a, b) => {
                Ok(a.level(levels)?.max(b.level(levels)?))
            }
            Formula::Imp(a, b) => Ok((a.level(levels)? + 1).max(b.level(levels)?)),
            Formula::Forall(_, b) | Formula::Exists(_, b) | Formula::Nabla(_, b) => {
                b.level(levels)
            }
            Formula::Atom(p, _) => levels
                .get(p)
                .copied()
                .ok_or_else(|| FormulaError::UnknownPred(p.clone())),
            Formula::Nat(_) => Ok(levels.get("nat").copied().unwrap_or(0)),
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_formula(self, &mut Vec::new(), f, 0)
    }
}

fn fmt_formula(
    fm: &Formula,
    names: &mut Vec<String>,
    f: &mut fmt::Formatter<'_>,
    prec: u8,
) -> fmt::Result {
    // precedence: 0 = ⊃ (right assoc), 1 = ∨, 2 = ∧, 3 = atomic/quantifier
    let paren = |p: u8| prec > p;
    match fm {
        Formula::Bot => write!(f, "false"),
        Formula::Top => write!(f, "true"),
        Formula::And(a, b) => {
            if paren(2) {
                write!(f, "(")?;
            }
            fmt_formula(a, names, f, 3)?;
            write!(f, " /\\ ")?;
            fmt_formula(b, names, f, 2)?;
            if paren(2) {
                write!(f, ")")?;
            }
            Ok(())
        }
        Formula::Or(a, b) => {
            if paren(1) {
                write!(f, "(")?;
            }
            fmt_formula(a, names, f, 2)?;
            write!(f, " \\/ ")?;
            fmt_formula(b, names, f, 1)?;
            if paren(1) {
                write!(f, ")")?;
            }
            Ok(())
        }
        Formula::Imp(a, b) => {
            if paren(0) {
                write!(f, "(")?;
            }
            fmt_formula(a, names, f, 1)?;
            write!(f, " => ")?;
            fmt_formula(b, names, f, 0)?;
            if paren(0) {
                write!(f, ")")?;
            }
            Ok(())
        }
        Formula::Forall(ty, b) | Formula::Exists(ty, b) | Formula::Nabla(ty, b) => {
            let q = match fm {
                Formula::Forall(_, _) => "forall",
                Formula::Exists(_, _) => "exists",
                _ => "nabla",
            };
            let name = format!("x{}", names.len());
            if paren(0) {
                write!(f, "(")?;
            }
            write!(f, "{} {}:{}. ", q, name, ty)?;
            names.push(name);
            fmt_formula(b, names, f, 0)?;
            names.pop();
            if paren(0) {
                write!(f, ")")?;
            }
            Ok(())
        }
        Formula::Eq(s, t, _) => {
            fmt_term_in(s, names, f)?;
            write!(f, " = ")?;
            fmt_term_in(t, names, f)
        }
        Formula::Atom(p, ts) => {
            write!(f, "{}", p)?;
            for t in ts {
                write!(f, " ")?;
                if t.binder.is_empty() && t.args.is_empty() {
                    fmt_term_in(t, names, f)?;
                } else {
                    write!(f, "(")?;
                    fmt_term_in(t, names, f)?;
                    write!(f, ")")?;
                }
            }
            Ok(())
        }
        Formula::Nat(t) => {
            write!(f, "nat ")?;
            if t.binder.is_empty() && t.args.is_empty() {
                fmt_term_in(t, names, f)
            } else {
                write!(f, "(")?;
                fmt_term_in(t, names, f)?;
                write!(f, ")")
            }
        }
    }
}

fn fmt_term_in(t: &Term, names: &mut Vec<String>, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    fmt_term(t, names, f)
}

/// A (patterned) definition clause `∀x⃗. p t⃗ ≜ B`; the non-patterned form
/// is the special case where `t⃗` are exactly the distinct variables `x⃗`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DefClause {
    pub vars: Vec<(String, Ty)>,
    pub head_pred: String,
    pub head_args: Vec<Term>,
    pub body: Formula,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StratViolation {
    #[error("clause for `{pred}`: body level {body} exceeds predicate level {pred_level}")]
    Level { pred: String, body: usize, pred_level: usize },
    #[error("clause for `{pred}`: body contains nominal constant `{nom}`")]
    NominalInBody { pred: String, nom: String },
    #[error("clause for `{pred}`: head contains nominal constant `{nom}`")]
    NominalInHead { pred: String, nom: String },
    #[error("clause for `{pred}`: free variable `{var}` is not among the clause variables")]
    FreeVar { pred: String, var: String },
    #[error("clause for `{pred}`: {err}")]
    Ill { pred: String, err: String },
}

impl DefClause {
    pub fn head_atom(&self) -> Formula {
        Formula::Atom(self.head_pred.clone(), self.head_args.clone())
    }

    /// Both stratification conditions from the level definition, plus the
    /// closure conditions on clause variables.
    pub fn check_stratified(
        &self,
        levels: &BTreeMap<String, usize>,
    ) -> Result<(), StratViolation> {
        let pred = self.head_pred.clone();
        for t in &self.head_args {
            if let Some((n, _)) = t.support().into_iter().next() {
                return Err(StratViolation::NominalInHead { pred, nom: n });
            }
        }
        if let Some((n, _)) = self.body.support().into_iter().next() {
            return Err(StratViolation::NominalInBody { pred, nom: n });
        }
        let bound: BTreeSet<&String> = self.vars.iter().map(|(n, _)| n).collect();
        for (v, _) in self.body.free_evars() {
            if !bound.contains(&v) {
                return Err(StratViolation::FreeVar { pred, var: v });
            }
        }
        for t in &self.head_args {
            for (v, _) in t.free_evars() {
                if !bound.contains(&v) {
                    return Err(StratViolation::FreeVar { pred, var: v });
                }
            }
        }
        let pred_level = *levels
            .get(&self.head_pred)
            .ok_or_else(|| StratViolation::Ill {
                pred: pred.clone(),
                err: "undeclared predicate level".to_string(),
            })?;
        let body = self
            .body
            .level(levels)
            .map_err(|e| StratViolation::Ill { pred: pred.clone(), err: e.to_string() })?;
        if body > pred_level {
            return Err(StratViolation::Level { pred, body, pred_level });
        }
        Ok(())
    }

    /// The raised clause with respect to `c⃗`: each clause variable `xᵢ`
    /// becomes `hᵢ c⃗` with `hᵢ` of raised type.
    pub fn raise(&self, cs: &[(String, Ty)]) -> DefClause {
        if cs.is_empty() {
            return self.clone();
        }
        // Raised variables keep their names (the whole tuple is replaced at
        // once, so there is no capture); only collisions among the raised
        // names themselves would need renaming.
        let mut avoid: BTreeSet<String> = BTreeSet::new();
        let mut map: BTreeMap<String, Term> = BTreeMap::new();
        let mut vars = Vec::new();
        for (x, ty) in &self.vars {
            let rty = ty.raise(cs);
            let h = fresh_name(x, &avoid);
            avoid.insert(h.clone());
            let happ = Term::apply(
                &Term::var(&h, &rty),
                &cs.iter().map(|(n, t)| Term::nom(n, t)).collect::<Vec<_>>(),
            );
            map.insert(x.clone(), happ);
            vars.push((h, rty));
        }
        DefClause {
            vars,
            head_pred: self.head_pred.clone(),
            head_args: self.head_args.iter().map(|t| t.subst_evars(&map)).collect(),
            body: self.body.subst_evars(&map),
        }
    }
}

/// Declared vocabulary: nominal types and their named constants, base types,
/// ordinary constants, predicates with levels, definition clauses.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Theory {
    pub nominal_types: Vec<String>,
    /// Declared nominal constants per type, in declaration order; these seed
    /// the interned enumeration used for fresh choices.
    pub declared_noms: BTreeMap<String, Vec<String>>,
    pub base_types: Vec<String>,
    pub consts: BTreeMap<String, Ty>,
    /// predicate name ↦ (type ending in o, level)
    pub preds: BTreeMap<String, (Ty, usize)>,
    pub clauses: Vec<DefClause>,
}

impl Theory {
    pub fn ctx(&self) -> Ctx {
        Ctx { sig: BTreeMap::new(), consts: self.consts.clone() }
    }

    pub fn ctx_with(&self, sig: &BTreeMap<String, Ty>) -> Ctx {
        Ctx { sig: sig.clone(), consts: self.consts.clone() }
    }

    pub fn levels(&self) -> BTreeMap<String, usize> {
        self.preds.iter().map(|(n, (_, l))| (n.clone(), *l)).collect()
    }

    pub fn clauses_for(&self, pred: &str) -> Vec<(usize, &DefClause)> {
        self.clauses
            .iter()
            .enumerate()
            .filter(|(_, c)| c.head_pred == pred)
            .collect()
    }

    /// Deterministic least-unused nominal constant of the given type.
    pub fn fresh_nom(&self, ty: &Ty, avoid: &BTreeSet<String>) -> (String, Ty) {
        let tyname = match ty {
            Ty::Base { name, nominal: true } => name.clone(),
            _ => panic!("fresh_nom on non-nominal type"),
        };
        let declared = self.declared_noms.get(&tyname).cloned().unwrap_or_default();
        (fresh_nom(&tyname, &declared, avoid), ty.clone())
    }

    pub fn check_stratified(&self) -> Result<(), StratViolation> {
        let levels = self.levels();
        for c in &self.clauses {
            c.check_stratified(&levels)?;
        }
        Ok(())
    }

    /// Least stratifying level assignment by fixpoint iteration; fails when
    /// a predicate's level grows past every other predicate's (a cycle
    /// through the left of an implication).
    pub fn infer_levels(&self) -> Result<BTreeMap<String, usize>, StratViolation> {
        let mut levels: BTreeMap<String, usize> =
            self.preds.keys().map(|p| (p.clone(), 0)).collect();
        let bound = self.preds.len() * (self.clauses.len() + 2) + 8;
        for _ in 0..bound {
            let mut changed = false;
            for c in &self.clauses {
                let b = c
                    .body
                    .level(&levels)
                    .map_err(|e| StratViolation::Ill {
                        pred: c.head_pred.clone(),
                        err: e.to_string(),
                    })?;
                let cur = levels.get_mut(&c.head_pred).unwrap();
                if b > *cur {
                    *cur = b;
                    changed = true;
                }
            }
            if !changed {
                return Ok(levels);
            }
        }
        Err(StratViolation::Level {
            pred: "<no stratifying assignment>".to_string(),
            body: 0,
            pred_level: 0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::Head;

    fn nm() -> Ty {
        Ty::nominal("nm")
    }

    fn levels(ps: &[(&str, usize)]) -> BTreeMap<String, usize> {
        ps.iter().map(|(n, l)| (n.to_string(), *l)).collect()
    }

    #[test]
    fn level_clauses() {
        let l = levels(&[("p", 0), ("q", 2)]);
        let p = Formula::Atom("p".into(), vec![]);
        let q = Formula::Atom("q".into(), vec![]);
        assert_eq!(Formula::Bot.level(&l).unwrap(), 0);
        assert_eq!(Formula::Top.level(&l).unwrap(), 0);
        assert_eq!(p.level(&l).unwrap(), 0);
        assert_eq!(Formula::imp(p.clone(), Formula::Bot).level(&l).unwrap(), 1);
        assert_eq!(Formula::and(p.clone(), q.clone()).level(&l).unwrap(), 2);
        assert_eq!(Formula::imp(q.clone(), p.clone()).level(&l).unwrap(), 3);
        let nab = Formula::nabla(nm(), Formula::imp(p.clone(), Formula::Bot));
        assert_eq!(nab.level(&l).unwrap(), 1);
    }

    #[test]
    fn self_negation_unstratified_at_every_level() {
        // p ≜ p ⊃ ⊥ violates the level condition for every lvl(p).
        for k in 0..10 {
            let clause = DefClause {
                vars: vec![],
                head_pred: "p".into(),
                head_args: vec![],
                body: Formula::imp(Formula::Atom("p".into(), vec![]), Formula::Bot),
            };
            let err = clause.check_stratified(&levels(&[("p", k)])).unwrap_err();
            assert!(matches!(err, StratViolation::Level { .. }));
        }
    }

    #[test]
    fn nominal_in_body_rejected() {
        // q x ≜ (x = a) with a nominal.
        let clause = DefClause {
            vars: vec![("x".into(), nm())],
            head_pred: "q".into(),
            head_args: vec![Term::var("x", &nm())],
            body: Formula::Eq(Term::var("x", &nm()), Term::nom("a", &nm()), nm()),
        };
        let err = clause.check_stratified(&levels(&[("q", 0)])).unwrap_err();
        assert!(matches!(err, StratViolation::NominalInBody { .. }));
    }

    fn list_clause() -> DefClause {
        // list (A::L) ≜ list L
        let lst = Ty::base("lst");
        let alpha = Ty::base("alpha");
        let cons = Ty::arrow(alpha.clone(), Ty::arrow(lst.clone(), lst.clone()));
        DefClause {
            vars: vec![("A".into(), alpha.clone()), ("L".into(), lst.clone())],
            head_pred: "list".into(),
            head_args: vec![Term::apply(
                &Term::konst("cons", &cons),
                &[Term::var("A", &alpha), Term::var("L", &lst)],
            )],
            body: Formula::Atom("list".into(), vec![Term::var("L", &lst)]),
        }
    }

    #[test]
    fn list_clause_stratified() {
        assert_eq!(list_clause().check_stratified(&levels(&[("list", 0)])), Ok(()));
    }

    #[test]
    fn raise_clause_types_and_empty() {
        let c = list_clause();
        assert_eq!(c.raise(&[]), c);
        let cs = vec![("c".to_string(), nm())];
        let r = c.raise(&cs);
        assert_eq!(r.vars[0].1, Ty::arrow(nm(), Ty::base("alpha")));
        assert_eq!(r.vars[1].1, Ty::arrow(nm(), Ty::base("lst")));
        // Head argument is cons (A c) (L c); body is list (L c).
        match &r.body {
            Formula::Atom(p, ts) => {
                assert_eq!(p, "list");
                assert_eq!(ts.len(), 1);
                assert_eq!(ts[0].head, Head::Evar("L".into(), Ty::arrow(nm(), Ty::base("lst"))));
                assert_eq!(ts[0].args.len(), 1);
            }
            _ => panic!("unexpected body"),
        }
        // The raised clause typechecks in a theory declaring the vocabulary.
        let mut th = Theory::default();
        th.nominal_types.push("nm".into());
        th.base_types.extend(["alpha".to_string(), "lst".to_string()]);
        th.consts.insert(
            "cons".into(),
            Ty::arrow(Ty::base("alpha"), Ty::arrow(Ty::base("lst"), Ty::base("lst"))),
        );
        th.preds
            .insert("list".into(), (Ty::arrow(Ty::base("lst"), Ty::o()), 0));
        let sig: BTreeMap<String, Ty> = r.vars.iter().cloned().collect();
        let ctx = th.ctx_with(&sig);
        r.body.typecheck(&ctx, &th).unwrap();
        r.head_atom().typecheck(&ctx, &th).unwrap();
        // Raising preserves the level condition (the nominal-free condition
        // is about source clauses; raised instances mention c⃗ by design).
        assert_eq!(r.body.level(&levels(&[("list", 0)])).unwrap(), 0);
    }

    #[test]
    fn open_close_quantifier() {
        // ∀x. p x, opened with a witness.
        let pty = Ty::arrow(Ty::base("tm"), Ty::o());
        let tm = Ty::base("tm");
        let body = Formula::Atom("p".into(), vec![Term::bound(0, &tm)]);
        let fa = Formula::forall(tm.clone(), body.clone());
        let w = Term::konst("z", &tm);
        match &fa {
            Formula::Forall(_, b) => {
                let opened = b.open(&w);
                assert_eq!(opened, Formula::Atom("p".into(), vec![w.clone()]));
                // close_evar inverts open on an eigenvariable.
                let x = Term::var("x", &tm);
                let ox = b.open(&x);
                assert_eq!(ox.close_evar("x"), **b);
            }
            _ => unreachable!(),
        }
        let _ = pty;
    }

    #[test]
    fn nested_quantifier_binding() {
        // ∇x ∇y. q x y: indices 1 and 0.
        let q = Ty::arrow(nm(), Ty::arrow(nm(), Ty::o()));
        let body = Formula::Atom(
            "q".into(),
            vec![Term::bound(1, &nm()), Term::bound(0, &nm())],
        );
        let f = Formula::nabla(nm(), Formula::nabla(nm(), body));
        match &f {
            Formula::Nabla(_, b1) => {
                let a = Term::nom("a", &nm());
                let opened = b1.open(&a);
                match &opened {
                    Formula::Nabla(_, b2) => {
                        let b = Term::nom("b", &nm());
                        let inner = b2.open(&b);
                        assert_eq!(
                            inner,
                            Formula::Atom(
                                "q".into(),
                                vec![Term::nom("a", &nm()), Term::nom("b", &nm())]
                            )
                        );
                    }
                    _ => panic!(),
                }
            }
            _ => panic!(),
        }
        let _ = q;
    }

    #[test]
    fn infer_levels_fixpoint() {
        // r ≜ (p ⊃ ⊥); p ≜ ⊤. Least assignment: p=0, r=1.
        let mut th = Theory::default();
        th.preds.insert("p".into(), (Ty::o(), 0));
        th.preds.insert("r".into(), (Ty::o(), 0));
        th.clauses.push(DefClause {
            vars: vec![],
            head_pred: "p".into(),
            head_args: vec![],
            body: Formula::Top,
        });
        th.clauses.push(DefClause {
            vars: vec![],
            head_pred: "r".into(),
            head_args: vec![],
            body: Formula::imp(Formula::Atom("p".into(), vec![]), Formula::Bot),
        });
        let l = th.infer_levels().unwrap();
        assert_eq!(l["p"], 0);
        assert_eq!(l["r"], 1);

        // p ≜ p ⊃ ⊥ has no stratifying assignment.
        let mut bad = Theory::default();
        bad.preds.insert("p".into(), (Ty::o(), 0));
        bad.clauses.push(DefClause {
            vars: vec![],
            head_pred: "p".into(),
            head_args: vec![],
            body: Formula::imp(Formula::Atom("p".into(), vec![]), Formula::Bot),
        });
        assert!(bad.infer_levels().is_err());
    }
}
