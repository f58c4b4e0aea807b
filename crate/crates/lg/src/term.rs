//! Simply-typed λ-terms over eigenvariables, ordinary constants and nominal
//! constants, kept in β-normal η-long spine form.
//!
//! A term is `λ binder. head arg₁ … argₙ` where the spine result is a base
//! type.  Bound variables are de Bruijn indices (0 = innermost binder), and
//! the index space is shared with the formula layer's quantifiers, so
//! α-equivalence is plain structural equality.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

/// Simple types: base types (some of which are nominal) and arrows.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Ty {
    Base { name: String, nominal: bool },
    Arrow(Box<Ty>, Box<Ty>),
}

impl Ty {
    pub fn base(name: &str) -> Ty {
        Ty::Base { name: name.to_string(), nominal: false }
    }

    pub fn nominal(name: &str) -> Ty {
        Ty::Base { name: name.to_string(), nominal: true }
    }

    /// The reserved formula type.
    pub fn o() -> Ty {
        Ty::base("o")
    }

    pub fn arrow(dom: Ty, cod: Ty) -> Ty {
        Ty::Arrow(Box::new(dom), Box::new(cod))
    }

    pub fn is_base(&self) -> bool {
        matches!(self, Ty::Base { .. })
    }

    pub fn is_nominal_base(&self) -> bool {
        matches!(self, Ty::Base { nominal: true, .. })
    }

    pub fn is_o(&self) -> bool {
        matches!(self, Ty::Base { name, nominal: false } if name == "o")
    }

    pub fn contains_o(&self) -> bool {
        match self {
            Ty::Base { .. } => self.is_o(),
            Ty::Arrow(d, c) => d.contains_o() || c.contains_o(),
        }
    }

    /// Splits `τ₁ → … → τₙ → β` into (argument types, base result).
    pub fn strip(&self) -> (Vec<Ty>, Ty) {
        let mut args = Vec::new();
        let mut cur = self;
        while let Ty::Arrow(d, c) = cur {
            args.push((**d).clone());
            cur = c;
        }
        (args, cur.clone())
    }

    pub fn arity(&self) -> usize {
        let mut n = 0;
        let mut cur = self;
        while let Ty::Arrow(_, c) = cur {
            n += 1;
            cur = c;
        }
        n
    }

    /// `raise(τ, [c₁:ι₁, …, cₙ:ιₙ]) = ι₁ → … → ιₙ → τ`.
    pub fn raise(&self, cs: &[(String, Ty)]) -> Ty {
        let mut t = self.clone();
        for (_, ity) in cs.iter().rev() {
            t = Ty::arrow(ity.clone(), t);
        }
        t
    }
}

impl fmt::Display for Ty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ty::Base { name, .. } => write!(f, "{}", name),
            Ty::Arrow(d, c) => {
                if d.is_base() {
                    write!(f, "{} -> {}", d, c)
                } else {
                    write!(f, "({}) -> {}", d, c)
                }
            }
        }
    }
}

/// Spine heads.  Each non-bound head carries its type so most operations need
/// no ambient context; the typechecker verifies the annotation against the
/// declarations.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Head {
    /// de Bruijn index, 0 = innermost enclosing binder.
    Bound(usize),
    /// Eigenvariable (signature variable).
    Evar(String, Ty),
    /// Nominal constant; type must be a nominal base type.
    Nom(String, Ty),
    /// Ordinary (non-nominal) constant.
    Konst(String, Ty),
}

/// β-normal η-long term: `λ binder. head args`, spine result a base type.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Term {
    pub binder: Vec<Ty>,
    pub head: Head,
    pub args: Vec<Term>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TermError {
    #[error("unbound name `{0}`")]
    Unbound(String),
    #[error("type mismatch: expected {expected}, found {found} in `{context}`")]
    Mismatch { expected: String, found: String, context: String },
    #[error("`{0}` declared with a different type than its use")]
    Annotation(String),
    #[error("nominal constant `{0}` must have a nominal base type")]
    BadNominal(String),
    #[error("term is not η-long: spine of `{0}` does not end at a base type")]
    NotEtaLong(String),
    #[error("dangling de Bruijn index {0}")]
    Dangling(usize),
}

impl Term {
    /// η-long form of a head of type `ty`.
    pub fn eta(head: Head, ty: &Ty) -> Term {
        let (bs, _) = ty.strip();
        let n = bs.len();
        let head = match head {
            Head::Bound(i) => Head::Bound(i + n),
            h => h,
        };
        let args = (0..n)
            .map(|j| Term::eta(Head::Bound(n - 1 - j), &bs[j]))
            .collect();
        Term { binder: bs, head, args }
    }

    /// η-long eigenvariable.
    pub fn var(name: &str, ty: &Ty) -> Term {
        Term::eta(Head::Evar(name.to_string(), ty.clone()), ty)
    }

    /// Nominal constant (always a base type, so never η-expanded).
    pub fn nom(name: &str, ty: &Ty) -> Term {
        debug_assert!(ty.is_nominal_base());
        Term { binder: vec![], head: Head::Nom(name.to_string(), ty.clone()), args: vec![] }
    }

    /// η-long ordinary constant.
    pub fn konst(name: &str, ty: &Ty) -> Term {
        Term::eta(Head::Konst(name.to_string(), ty.clone()), ty)
    }

    /// η-long bound variable of the given type at the given index.
    pub fn bound(idx: usize, ty: &Ty) -> Term {
        Term::eta(Head::Bound(idx), ty)
    }

    /// Prepends abstractions; `body`'s dangling indices refer into `tys`.
    pub fn lam(tys: Vec<Ty>, body: Term) -> Term {
        let mut binder = tys;
        binder.extend(body.binder);
        Term { binder, head: body.head, args: body.args }
    }

    /// The type of the term, read off the spine annotations.
    pub fn ty(&self) -> Ty {
        let mut t = self.spine_result_ty();
        for b in self.binder.iter().rev() {
            t = Ty::arrow(b.clone(), t);
        }
        t
    }

    fn head_ty(&self) -> Ty {
        match &self.head {
            Head::Bound(i) => {
                // Index counts from innermost; binder is stored outermost-first.
                let n = self.binder.len();
                assert!(*i < n, "head_ty on dangling index");
                self.binder[n - 1 - i].clone()
            }
            Head::Evar(_, t) | Head::Nom(_, t) | Head::Konst(_, t) => t.clone(),
        }
    }

    fn spine_result_ty(&self) -> Ty {
        let (args, res) = self.head_ty().strip();
        debug_assert_eq!(args.len(), self.args.len());
        res
    }

    /// Shifts dangling indices (≥ cutoff) by `delta`.
    pub fn shifted(&self, delta: isize, cutoff: usize) -> Term {
        let c = cutoff + self.binder.len();
        let head = match &self.head {
            Head::Bound(i) if *i >= c => {
                Head::Bound((*i as isize + delta) as usize)
            }
            h => h.clone(),
        };
        let args = self.args.iter().map(|a| a.shifted(delta, c)).collect();
        Term { binder: self.binder.clone(), head, args }
    }

    /// β-normalizing application: consumes the first `args.len()` binders of
    /// `f`.  Arguments must be canonical and expressed at the level outside
    /// `f`'s binder.
    pub fn apply(f: &Term, args: &[Term]) -> Term {
        let n = f.binder.len();
        let k = args.len();
        assert!(k <= n, "apply: too many arguments");
        let m = n - k;
        let rest: Vec<Ty> = f.binder[k..].to_vec();
        let body = Term { binder: vec![], head: f.head.clone(), args: f.args.clone() };
        let newbody = subst_outer(&body, n, m, k, args);
        Term::lam(rest, newbody)
    }

    /// Simultaneous substitution for eigenvariables; hereditary, so the
    /// result stays canonical.  Images must be closed (no dangling indices).
    pub fn subst_evars(&self, map: &BTreeMap<String, Term>) -> Term {
        let args: Vec<Term> = self.args.iter().map(|a| a.subst_evars(map)).collect();
        match &self.head {
            Head::Evar(name, _) if map.contains_key(name) => {
                let image = &map[name];
                let r = Term::apply(image, &args);
                Term::lam(self.binder.clone(), r)
            }
            _ => Term { binder: self.binder.clone(), head: self.head.clone(), args },
        }
    }

    /// Renames nominal constants according to the permutation.
    pub fn perm(&self, p: &Perm) -> Term {
        let head = match &self.head {
            Head::Nom(name, ty) => Head::Nom(p.image(name), ty.clone()),
            h => h.clone(),
        };
        let args = self.args.iter().map(|a| a.perm(p)).collect();
        Term { binder: self.binder.clone(), head, args }
    }

    /// Nominal constants in first-occurrence (pre-order, head before
    /// arguments) order.
    pub fn support(&self) -> Vec<(String, Ty)> {
        let mut out = Vec::new();
        self.collect_support(&mut out);
        out
    }

    pub(crate) fn collect_support(&self, out: &mut Vec<(String, Ty)>) {
        if let Head::Nom(name, ty) = &self.head {
            if !out.iter().any(|(n, _)| n == name) {
                out.push((name.clone(), ty.clone()));
            }
        }
        for a in &self.args {
            a.collect_support(out);
        }
    }

    pub fn support_names(&self) -> BTreeSet<String> {
        self.support().into_iter().map(|(n, _)| n).collect()
    }

    /// Free eigenvariables in first-occurrence order.
    pub fn free_evars(&self) -> Vec<(String, Ty)> {
        let mut out = Vec::new();
        self.collect_evars(&mut out);
        out
    }

    pub(crate) fn collect_evars(&self, out: &mut Vec<(String, Ty)>) {
        if let Head::Evar(name, ty) = &self.head {
            if !out.iter().any(|(n, _)| n == name) {
                out.push((name.clone(), ty.clone()));
            }
        }
        for a in &self.args {
            a.collect_evars(out);
        }
    }

    /// Abstracts the listed nominal constants: `λc⃗. t`.  All listed
    /// constants must be base-typed; `t` must have no dangling indices.
    pub fn close_noms(&self, cs: &[(String, Ty)]) -> Term {
        let body = self.close_noms_at(cs, 0);
        Term::lam(cs.iter().map(|(_, t)| t.clone()).collect(), body)
    }

    fn close_noms_at(&self, cs: &[(String, Ty)], depth: usize) -> Term {
        let d = depth + self.binder.len();
        let n = cs.len();
        let head = match &self.head {
            Head::Nom(name, _) => match cs.iter().position(|(c, _)| c == name) {
                Some(i) => Head::Bound(d + (n - 1 - i)),
                None => self.head.clone(),
            },
            h => h.clone(),
        };
        let args = self.args.iter().map(|a| a.close_noms_at(cs, d)).collect();
        Term { binder: self.binder.clone(), head, args }
    }

    /// Replaces the dangling index `level` (counted at the root of `self`)
    /// with the closed term `repl` and strengthens the indices above it.
    pub fn open_bound(&self, level: usize, repl: &Term) -> Term {
        self.open_bound_at(level, repl, 0)
    }

    fn open_bound_at(&self, level: usize, repl: &Term, depth: usize) -> Term {
        let d = depth + self.binder.len();
        let args: Vec<Term> = self.args.iter().map(|a| a.open_bound_at(level, repl, d)).collect();
        match &self.head {
            Head::Bound(j) if *j == d + level => {
                let r = Term::apply(repl, &args);
                Term::lam(self.binder.clone(), r)
            }
            Head::Bound(j) if *j > d + level => Term {
                binder: self.binder.clone(),
                head: Head::Bound(j - 1),
                args,
            },
            h => Term { binder: self.binder.clone(), head: h.clone(), args },
        }
    }

    /// Abstracts an eigenvariable into the dangling index `level`: the
    /// inverse of `open_bound` with an η-long variable.
    pub fn close_evar(&self, name: &str, level: usize) -> Term {
        self.close_evar_at(name, level, 0)
    }

    fn close_evar_at(&self, name: &str, level: usize, depth: usize) -> Term {
        let d = depth + self.binder.len();
        let args: Vec<Term> = self.args.iter().map(|a| a.close_evar_at(name, level, d)).collect();
        match &self.head {
            Head::Evar(n, _) if n == name => {
                Term { binder: self.binder.clone(), head: Head::Bound(d + level), args }
            }
            Head::Bound(j) if *j >= d + level => {
                Term { binder: self.binder.clone(), head: Head::Bound(j + 1), args }
            }
            h => Term { binder: self.binder.clone(), head: h.clone(), args },
        }
    }

    /// True if no dangling index reaches `level` or beyond.
    pub fn closed_under(&self, level: usize) -> bool {
        self.closed_under_at(level, 0)
    }

    fn closed_under_at(&self, level: usize, depth: usize) -> bool {
        let d = depth + self.binder.len();
        if let Head::Bound(j) = &self.head {
            if *j >= d + level {
                return false;
            }
        }
        self.args.iter().all(|a| a.closed_under_at(level, d))
    }

    /// Typechecks against declared signature/constants and returns the type.
    pub fn typecheck(&self, ctx: &Ctx) -> Result<Ty, TermError> {
        self.check_at(ctx, &mut Vec::new())
    }

    fn check_at(&self, ctx: &Ctx, stack: &mut Vec<Ty>) -> Result<Ty, TermError> {
        for b in &self.binder {
            stack.push(b.clone());
        }
        let hty = match &self.head {
            Head::Bound(i) => {
                if *i >= stack.len() {
                    for _ in &self.binder {
                        stack.pop();
                    }
                    return Err(TermError::Dangling(*i));
                }
                stack[stack.len() - 1 - i].clone()
            }
            Head::Evar(name, ty) => {
                match ctx.sig.get(name) {
                    Some(t) if t == ty => ty.clone(),
                    Some(_) => {
                        for _ in &self.binder {
                            stack.pop();
                        }
                        return Err(TermError::Annotation(name.clone()));
                    }
                    None => {
                        for _ in &self.binder {
                            stack.pop();
                        }
                        return Err(TermError::Unbound(name.clone()));
                    }
                }
            }
            Head::Nom(name, ty) => {
                if !ty.is_nominal_base() {
                    for _ in &self.binder {
                        stack.pop();
                    }
                    return Err(TermError::BadNominal(name.clone()));
                }
                ty.clone()
            }
            Head::Konst(name, ty) => match ctx.consts.get(name) {
                Some(t) if t == ty => ty.clone(),
                Some(_) => {
                    for _ in &self.binder {
                        stack.pop();
                    }
                    return Err(TermError::Annotation(name.clone()));
                }
                None => {
                    for _ in &self.binder {
                        stack.pop();
                    }
                    return Err(TermError::Unbound(name.clone()));
                }
            },
        };
        let (atys, res) = hty.strip();
        let r = (|| {
            if atys.len() != self.args.len() {
                return Err(TermError::NotEtaLong(format!("{}", self)));
            }
            for (a, expect) in self.args.iter().zip(&atys) {
                let found = a.check_at(ctx, stack)?;
                if &found != expect {
                    return Err(TermError::Mismatch {
                        expected: expect.to_string(),
                        found: found.to_string(),
                        context: format!("{}", self),
                    });
                }
            }
            let mut full = res.clone();
            for b in self.binder.iter().rev() {
                full = Ty::arrow(b.clone(), full);
            }
            Ok(full)
        })();
        for _ in &self.binder {
            stack.pop();
        }
        r
    }
}

/// Substitutes the outermost `k` binder variables (which sit at indices
/// `m..m+k` relative to the body root, `m` = binders kept) with `args`,
/// hereditarily β-normalizing.
fn subst_outer(t: &Term, n: usize, m: usize, k: usize, args: &[Term]) -> Term {
    go(t, 0, n, m, k, args)
}

fn go(t: &Term, depth: usize, n: usize, m: usize, k: usize, args: &[Term]) -> Term {
    let d = depth + t.binder.len();
    let new_args: Vec<Term> = t.args.iter().map(|a| go(a, d, n, m, k, args)).collect();
    match &t.head {
        Head::Bound(j) => {
            let j = *j;
            if j < d + m {
                Term { binder: t.binder.clone(), head: Head::Bound(j), args: new_args }
            } else if j < d + n {
                // Outermost argument i = 0 corresponds to the largest index.
                let i = (d + n - 1) - j;
                let a = args[i].shifted((d + m) as isize, 0);
                let r = Term::apply(&a, &new_args);
                Term::lam(t.binder.clone(), r)
            } else {
                Term { binder: t.binder.clone(), head: Head::Bound(j - k), args: new_args }
            }
        }
        h => Term { binder: t.binder.clone(), head: h.clone(), args: new_args },
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_term(self, &mut Vec::new(), f)
    }
}

/// Pretty-printing helper shared with the formula layer: renders a term
/// given names for the enclosing binders (innermost last).
pub fn fmt_term(t: &Term, names: &mut Vec<String>, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let base = names.len();
    for (i, _ty) in t.binder.iter().enumerate() {
        names.push(format!("x{}", base + i));
    }
    if !t.binder.is_empty() {
        write!(f, "\\")?;
        for i in 0..t.binder.len() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{}", names[base + i])?;
        }
        write!(f, ".")?;
    }
    let head_str = match &t.head {
        Head::Bound(i) => {
            if *i < names.len() {
                names[names.len() - 1 - i].clone()
            } else {
                format!("#{}", i)
            }
        }
        Head::Evar(n, _) | Head::Nom(n, _) | Head::Konst(n, _) => n.clone(),
    };
    if t.args.is_empty() {
        write!(f, "{}", head_str)?;
    } else {
        write!(f, "{}", head_str)?;
        for a in &t.args {
            if a.binder.is_empty() && a.args.is_empty() {
                write!(f, " ")?;
                fmt_term(a, names, f)?;
            } else {
                write!(f, " (")?;
                fmt_term(a, names, f)?;
                write!(f, ")")?;
            }
        }
    }
    for _ in &t.binder {
        names.pop();
    }
    Ok(())
}

/// Typing context: the signature plus the declared ordinary constants.
/// Nominal constants are self-identifying (interned by name and type).
#[derive(Clone, Debug, Default)]
pub struct Ctx {
    pub sig: BTreeMap<String, Ty>,
    pub consts: BTreeMap<String, Ty>,
}

/// Finite type-respecting bijection on nominal constants, identity
/// elsewhere.  Equality is extensional on the union of the carriers.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Perm {
    map: BTreeMap<String, String>,
    tys: BTreeMap<String, Ty>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PermError {
    #[error("swap of constants with different nominal types")]
    TypeClash,
    #[error("permutation is not a type-respecting bijection")]
    NotBijective,
}

impl Perm {
    pub fn identity() -> Perm {
        Perm { map: BTreeMap::new(), tys: BTreeMap::new() }
    }

    pub fn swap(a: (&str, &Ty), b: (&str, &Ty)) -> Result<Perm, PermError> {
        if a.1 != b.1 {
            return Err(PermError::TypeClash);
        }
        if a.0 == b.0 {
            return Ok(Perm::identity());
        }
        let mut map = BTreeMap::new();
        map.insert(a.0.to_string(), b.0.to_string());
        map.insert(b.0.to_string(), a.0.to_string());
        let mut tys = BTreeMap::new();
        tys.insert(a.0.to_string(), a.1.clone());
        tys.insert(b.0.to_string(), b.1.clone());
        Ok(Perm { map, tys })
    }

    /// Builds a permutation from explicit (name, image) pairs.
    pub fn from_pairs(pairs: &[((String, Ty), String)]) -> Result<Perm, PermError> {
        let mut map = BTreeMap::new();
        let mut tys = BTreeMap::new();
        for ((a, ty), b) in pairs {
            map.insert(a.clone(), b.clone());
            tys.insert(a.clone(), ty.clone());
            tys.entry(b.clone()).or_insert_with(|| ty.clone());
        }
        let p = Perm { map, tys };
        let mut seen = BTreeSet::new();
        for (a, b) in &p.map {
            if p.tys.get(a) != p.tys.get(b) {
                return Err(PermError::TypeClash);
            }
            if !seen.insert(b.clone()) {
                return Err(PermError::NotBijective);
            }
        }
        // Identity outside the finite map must make the whole thing a
        // bijection: every image must itself be mapped or be a source.
        for b in p.map.values() {
            if !p.map.contains_key(b) {
                return Err(PermError::NotBijective);
            }
        }
        Ok(p)
    }

    pub fn image(&self, name: &str) -> String {
        self.map.get(name).cloned().unwrap_or_else(|| name.to_string())
    }

    pub fn carrier(&self) -> BTreeSet<String> {
        self.map
            .iter()
            .filter(|(a, b)| a != b)
            .map(|(a, _)| a.clone())
            .collect()
    }

    pub fn is_identity(&self) -> bool {
        self.map.iter().all(|(a, b)| a == b)
    }

    /// Composition in diagrammatic order: `t.(compose(p, q)) = (t.p).q`
    /// (apply `p` first, then `q`).
    pub fn compose(p: &Perm, q: &Perm) -> Perm {
        let mut names: BTreeSet<String> = p.map.keys().cloned().collect();
        names.extend(q.map.keys().cloned());
        let mut map = BTreeMap::new();
        let mut tys = BTreeMap::new();
        for a in names {
            let b = q.image(&p.image(&a));
            let ty = p.tys.get(&a).or_else(|| q.tys.get(&a)).cloned();
            if let Some(ty) = ty {
                tys.insert(a.clone(), ty.clone());
                tys.entry(b.clone()).or_insert(ty);
            }
            map.insert(a, b);
        }
        Perm { map, tys }
    }

    pub fn inverse(&self) -> Perm {
        let map: BTreeMap<String, String> =
            self.map.iter().map(|(a, b)| (b.clone(), a.clone())).collect();
        Perm { map, tys: self.tys.clone() }
    }

    pub fn ty_of(&self, name: &str) -> Option<&Ty> {
        self.tys.get(name)
    }
}

impl PartialEq for Perm {
    fn eq(&self, other: &Perm) -> bool {
        let mut names: BTreeSet<&String> = self.map.keys().collect();
        names.extend(other.map.keys());
        names.iter().all(|n| self.image(n) == other.image(n))
    }
}

impl Eq for Perm {}

impl fmt::Display for Perm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut done: BTreeSet<String> = BTreeSet::new();
        let mut wrote = false;
        for a in self.map.keys() {
            if done.contains(a) || self.image(a) == *a {
                continue;
            }
            // Print the cycle through a.
            write!(f, "(")?;
            let mut cur = a.clone();
            let mut first = true;
            loop {
                if !first {
                    write!(f, " ")?;
                }
                write!(f, "{}", cur)?;
                done.insert(cur.clone());
                first = false;
                cur = self.image(&cur);
                if &cur == a {
                    break;
                }
            }
            write!(f, ")")?;
            wrote = true;
        }
        if !wrote {
            write!(f, "id")?;
        }
        Ok(())
    }
}

/// Signature substitution: finite map from typed eigenvariables to closed
/// canonical terms with empty support.
#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Subst {
    map: BTreeMap<String, (Ty, Term)>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SubstError {
    #[error("substitution image for `{0}` has non-empty support")]
    SupportNotEmpty(String),
    #[error("substitution image for `{0}` has the wrong type: {1}")]
    TypeMismatch(String, String),
    #[error("substitution image for `{0}` has dangling indices")]
    NotClosed(String),
}

impl Subst {
    pub fn identity() -> Subst {
        Subst::default()
    }

    pub fn bind(&mut self, name: &str, ty: &Ty, image: Term) -> Result<(), SubstError> {
        if !image.support().is_empty() {
            return Err(SubstError::SupportNotEmpty(name.to_string()));
        }
        if !image.closed_under(0) {
            return Err(SubstError::NotClosed(name.to_string()));
        }
        if &image.ty() != ty {
            return Err(SubstError::TypeMismatch(name.to_string(), image.ty().to_string()));
        }
        self.map.insert(name.to_string(), (ty.clone(), image));
        Ok(())
    }

    pub fn single(name: &str, ty: &Ty, image: Term) -> Result<Subst, SubstError> {
        let mut s = Subst::identity();
        s.bind(name, ty, image)?;
        Ok(s)
    }

    pub fn get(&self, name: &str) -> Option<&Term> {
        self.map.get(name).map(|(_, t)| t)
    }

    pub fn domain(&self) -> impl Iterator<Item = (&String, &Ty)> {
        self.map.iter().map(|(n, (ty, _))| (n, ty))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Ty, &Term)> {
        self.map.iter().map(|(n, (ty, t))| (n, ty, t))
    }

    pub fn is_identity(&self) -> bool {
        self.map.is_empty()
    }

    pub fn term_map(&self) -> BTreeMap<String, Term> {
        self.map.iter().map(|(n, (_, t))| (n.clone(), t.clone())).collect()
    }

    pub fn apply(&self, t: &Term) -> Term {
        t.subst_evars(&self.term_map())
    }

    /// Diagrammatic composition: `t.(compose(θ, ρ)) = (t θ) ρ`.
    pub fn compose(theta: &Subst, rho: &Subst) -> Subst {
        let mut map = BTreeMap::new();
        for (n, (ty, t)) in &theta.map {
            map.insert(n.clone(), (ty.clone(), rho.apply(t)));
        }
        for (n, (ty, t)) in &rho.map {
            map.entry(n.clone()).or_insert_with(|| (ty.clone(), t.clone()));
        }
        Subst { map }
    }

    /// Drops bindings that are just the variable itself.
    pub fn minimized(&self) -> Subst {
        let map = self
            .map
            .iter()
            .filter(|(n, (ty, t))| t != &Term::var(n, ty))
            .map(|(n, p)| (n.clone(), p.clone()))
            .collect();
        Subst { map }
    }
}

impl fmt::Display for Subst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.map.is_empty() {
            return write!(f, "{{}}");
        }
        write!(f, "{{")?;
        for (i, (n, (_, t))) in self.map.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{} := {}", n, t)?;
        }
        write!(f, "}}")
    }
}

/// Deterministic least-unused choice from the interned enumeration of a
/// nominal type: declared names first (declaration order), then `ty#0`,
/// `ty#1`, ….
pub fn fresh_nom(ty_name: &str, declared: &[String], avoid: &BTreeSet<String>) -> String {
    for d in declared {
        if !avoid.contains(d) {
            return d.clone();
        }
    }
    for k in 0.. {
        let cand = format!("{}#{}", ty_name, k);
        if !avoid.contains(&cand) {
            return cand;
        }
    }
    unreachable!()
}

/// Deterministic fresh eigenvariable name: `base`, `base1`, `base2`, ….
pub fn fresh_name(base: &str, avoid: &BTreeSet<String>) -> String {
    if !avoid.contains(base) {
        return base.to_string();
    }
    for k in 1.. {
        let cand = format!("{}{}", base, k);
        if !avoid.contains(&cand) {
            return cand;
        }
    }
    unreachable!()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nm() -> Ty {
        Ty::nominal("nm")
    }

    fn tm() -> Ty {
        Ty::base("tm")
    }

    #[test]
    fn eta_long_var_shapes() {
        let x = Term::var("x", &tm());
        assert!(x.binder.is_empty());
        assert_eq!(x.args.len(), 0);

        let f = Term::var("f", &Ty::arrow(tm(), tm()));
        assert_eq!(f.binder.len(), 1);
        assert_eq!(f.args.len(), 1);
        assert_eq!(f.args[0].head, Head::Bound(0));
    }

    #[test]
    fn beta_step() {
        // (λx. f x) a → f a
        let fty = Ty::arrow(tm(), tm());
        let f = Term::var("f", &fty);
        let a = Term::konst("a", &tm());
        let fa = Term::apply(&f, std::slice::from_ref(&a));
        assert_eq!(fa.binder.len(), 0);
        assert_eq!(fa.head, Head::Evar("f".into(), fty));
        assert_eq!(fa.args, vec![a]);
    }

    #[test]
    fn hereditary_redex() {
        // P = λx. app x x ; apply to N gives app N N
        let appty = Ty::arrow(tm(), Ty::arrow(tm(), tm()));
        let app = |a: Term, b: Term| {
            Term::apply(&Term::konst("app", &appty), &[a, b])
        };
        let p = Term::lam(vec![tm()], app(Term::bound(0, &tm()), Term::bound(0, &tm())));
        let n = Term::konst("n", &tm());
        let pn = Term::apply(&p, std::slice::from_ref(&n));
        assert_eq!(pn, app(n.clone(), n));
    }

    #[test]
    fn support_after_normalize() {
        // supp((λy. y) a) = {a}: built via apply, which normalizes; the
        // expected value is the syntactic scan of the normal form.
        let idf = Term::lam(vec![nm()], Term::bound(0, &nm()));
        let a = Term::nom("a", &nm());
        let t = Term::apply(&idf, &[a]);
        assert_eq!(t.support(), vec![("a".to_string(), nm())]);

        let x = Term::var("x", &tm());
        assert!(x.support().is_empty());
    }

    #[test]
    fn support_order_first_occurrence() {
        let q = Term::konst("q", &Ty::arrow(nm(), Ty::arrow(nm(), tm())));
        let t = Term::apply(&q, &[Term::nom("b", &nm()), Term::nom("a", &nm())]);
        let names: Vec<String> = t.support().into_iter().map(|(n, _)| n).collect();
        assert_eq!(names, vec!["b", "a"]);
    }

    #[test]
    fn perm_swaps_and_fixes() {
        let q = Term::konst("q", &Ty::arrow(nm(), Ty::arrow(nm(), tm())));
        let t = Term::apply(&q, &[Term::nom("a", &nm()), Term::nom("b", &nm())]);
        let p = Perm::swap(("a", &nm()), ("b", &nm())).unwrap();
        let t2 = t.perm(&p);
        let expect = Term::apply(&q, &[Term::nom("b", &nm()), Term::nom("a", &nm())]);
        assert_eq!(t2, expect);

        let x = Term::var("x", &tm());
        assert_eq!(x.perm(&p), x);
        assert_eq!(t.perm(&Perm::identity()), t);
    }

    #[test]
    fn perm_group_laws_brute_force() {
        // Every permutation of the 3-element carrier {a,b,c}; check the
        // group laws and the definitional application order extensionally.
        let names = ["a", "b", "c"];
        let perms: Vec<Perm> = permutations_of(&names);
        for p in &perms {
            assert_eq!(Perm::compose(p, &p.inverse()), Perm::identity());
            assert_eq!(Perm::compose(&p.inverse(), p), Perm::identity());
            for q in &perms {
                let pq = Perm::compose(p, q);
                for n in names {
                    // t.(p∘q) = (t.p).q
                    assert_eq!(pq.image(n), q.image(&p.image(n)));
                }
                for r in &perms {
                    let left = Perm::compose(&pq, r);
                    let right = Perm::compose(p, &Perm::compose(q, r));
                    assert_eq!(left, right);
                }
            }
        }
    }

    fn permutations_of(names: &[&str]) -> Vec<Perm> {
        let n = names.len();
        let mut idx: Vec<usize> = (0..n).collect();
        let mut out = Vec::new();
        permute(&mut idx, 0, &mut |perm| {
            let pairs: Vec<((String, Ty), String)> = names
                .iter()
                .enumerate()
                .map(|(i, a)| ((a.to_string(), Ty::nominal("nm")), names[perm[i]].to_string()))
                .collect();
            out.push(Perm::from_pairs(&pairs).unwrap());
        });
        out
    }

    fn permute(idx: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
        if k == idx.len() {
            f(idx);
            return;
        }
        for i in k..idx.len() {
            idx.swap(k, i);
            permute(idx, k + 1, f);
            idx.swap(k, i);
        }
    }

    #[test]
    fn swap_composition_value() {
        // compose(swap(a,b), swap(b,c)) applied to a: a →(a b) b →(b c) c.
        let s1 = Perm::swap(("a", &nm()), ("b", &nm())).unwrap();
        let s2 = Perm::swap(("b", &nm()), ("c", &nm())).unwrap();
        let p = Perm::compose(&s1, &s2);
        assert_eq!(p.image("a"), "c");
        assert_eq!(Perm::swap(("a", &nm()), ("b", &nm())).unwrap().inverse(), s1);
        assert_eq!(Perm::compose(&s1, &s1), Perm::identity());
    }

    #[test]
    fn subst_images_closed() {
        let a = Term::nom("a", &nm());
        assert_eq!(
            Subst::single("x", &nm(), a).unwrap_err(),
            SubstError::SupportNotEmpty("x".to_string())
        );
        let t = Term::konst("z", &tm());
        let s = Subst::single("x", &tm(), t.clone()).unwrap();
        let px = Term::apply(&Term::konst("p", &Ty::arrow(tm(), tm())), &[Term::var("x", &tm())]);
        let pt = Term::apply(&Term::konst("p", &Ty::arrow(tm(), tm())), &[t]);
        assert_eq!(s.apply(&px), pt);
    }

    #[test]
    fn subst_perm_commute() {
        // (π.t)θ = π.(tθ) — closed images make these commute.
        let qty = Ty::arrow(nm(), Ty::arrow(tm(), tm()));
        let t = Term::apply(
            &Term::konst("q", &qty),
            &[Term::nom("a", &nm()), Term::var("x", &tm())],
        );
        let s = Subst::single("x", &tm(), Term::konst("z", &tm())).unwrap();
        let p = Perm::swap(("a", &nm()), ("b", &nm())).unwrap();
        assert_eq!(s.apply(&t.perm(&p)), s.apply(&t).perm(&p));
    }

    #[test]
    fn raised_substitution() {
        // [λc. s / h] applied to (h c) gives s with c plugged in.
        let hty = Ty::arrow(nm(), tm());
        let h = Term::var("h", &hty);
        let c = Term::nom("c", &nm());
        let hc = Term::apply(&h, std::slice::from_ref(&c));
        let fty = Ty::arrow(nm(), tm());
        let image = Term::lam(vec![nm()], Term::apply(&Term::konst("f", &fty), &[Term::bound(0, &nm())]));
        let s = Subst::single("h", &hty, image).unwrap();
        let expect = Term::apply(&Term::konst("f", &fty), &[c]);
        assert_eq!(s.apply(&hc), expect);
    }

    #[test]
    fn raise_type_shape() {
        let cs = vec![("a".to_string(), nm())];
        assert_eq!(tm().raise(&cs), Ty::arrow(nm(), tm()));
        assert_eq!(tm().raise(&[]), tm());
        let cs2 = vec![("a".to_string(), nm()), ("b".to_string(), Ty::nominal("nm2"))];
        assert_eq!(
            tm().raise(&cs2),
            Ty::arrow(nm(), Ty::arrow(Ty::nominal("nm2"), tm()))
        );
    }

    #[test]
    fn typecheck_basics() {
        let mut ctx = Ctx::default();
        ctx.sig.insert("x".into(), tm());
        ctx.consts.insert("p".into(), Ty::arrow(tm(), Ty::o()));
        let px = Term::apply(&Term::konst("p", &Ty::arrow(tm(), Ty::o())), &[Term::var("x", &tm())]);
        assert_eq!(px.typecheck(&ctx).unwrap(), Ty::o());

        let bad = Term::apply(
            &Term::konst("p", &Ty::arrow(tm(), Ty::o())),
            &[Term::konst("q", &tm())],
        );
        assert!(matches!(bad.typecheck(&ctx), Err(TermError::Unbound(_))));
    }

    #[test]
    fn typecheck_hoas_constant() {
        // abs : (tm → tm) → tm applied to λx.x
        let absty = Ty::arrow(Ty::arrow(tm(), tm()), tm());
        let ctx = Ctx {
            sig: BTreeMap::new(),
            consts: [("abs".to_string(), absty.clone())].into_iter().collect(),
        };
        let id = Term::lam(vec![tm()], Term::bound(0, &tm()));
        let t = Term::apply(&Term::konst("abs", &absty), &[id]);
        assert_eq!(t.typecheck(&ctx).unwrap(), tm());
    }

    #[test]
    fn close_open_roundtrip() {
        let qty = Ty::arrow(nm(), Ty::arrow(nm(), Ty::o()));
        let t = Term::apply(&Term::konst("q", &qty), &[Term::nom("a", &nm()), Term::nom("b", &nm())]);
        let cs = t.support();
        let closed = t.close_noms(&cs);
        assert_eq!(closed.binder.len(), 2);
        assert!(closed.support().is_empty());
        let reopened = Term::apply(&closed, &[Term::nom("a", &nm()), Term::nom("b", &nm())]);
        assert_eq!(reopened, t);
    }

    #[test]
    fn fresh_nom_enumeration() {
        let declared = vec!["a".to_string(), "b".to_string()];
        let mut avoid = BTreeSet::new();
        assert_eq!(fresh_nom("nm", &declared, &avoid), "a");
        avoid.insert("a".to_string());
        assert_eq!(fresh_nom("nm", &declared, &avoid), "b");
        avoid.insert("b".to_string());
        assert_eq!(fresh_nom("nm", &declared, &avoid), "nm#0");
        avoid.insert("nm#0".to_string());
        assert_eq!(fresh_nom("nm", &declared, &avoid), "nm#1");
    }
}
