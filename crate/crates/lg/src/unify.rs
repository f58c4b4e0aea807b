//! Higher-order pattern unification.
//!
//! Problems arrive as pairs of closed canonical λ-terms `λc⃗.s`/`λc⃗.t`
//! in which the abstracted nominal constants have already become de Bruijn
//! binders, so eigenvariables are the only flexible heads and their
//! admissible arguments are distinct bound variables.  On that fragment
//! unification is decidable with most general unifiers.

use crate::term::{Head, Subst, Term, Ty};
use serde::{Deserialize, Serialize};

/// A unification problem: two closed terms of equal type.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnifProblem {
    pub left: Term,
    pub right: Term,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum UnifResult {
    Mgu(Subst),
    NoUnifier,
    /// Some flexible head is applied to a non-variable or repeated argument;
    /// carries the offending subterm.
    NotAPattern(Term),
}

/// True iff every occurrence of an eigenvariable is applied only to
/// distinct bound variables.
pub fn is_pattern(t: &Term) -> bool {
    pattern_offender(t).is_none()
}

/// The first subterm violating the pattern restriction, if any.
pub fn pattern_offender(t: &Term) -> Option<Term> {
    if let Head::Evar(_, _) = &t.head {
        let mut seen = Vec::new();
        for a in &t.args {
            match as_bvar(a) {
                Some(i) if !seen.contains(&i) => seen.push(i),
                _ => return Some(t.clone()),
            }
        }
    }
    t.args.iter().find_map(pattern_offender)
}

/// Recognizes an η-long bound variable and returns its index relative to
/// the term's root.
fn as_bvar(t: &Term) -> Option<usize> {
    let k = t.binder.len();
    if let Head::Bound(j) = &t.head {
        if *j >= k && t.args.len() == k {
            // η-long variable: λy₁…yₖ. x y₁ … yₖ with each yₚ itself η-long.
            for (p, a) in t.args.iter().enumerate() {
                if as_bvar(a) != Some(k - 1 - p) {
                    return None;
                }
            }
            return Some(j - k);
        }
    }
    None
}

/// Pattern unification; `left` and `right` must be closed canonical terms
/// of the same type.
pub fn unify(problem: &UnifProblem) -> UnifResult {
    let mut st = Solver { subst: Subst::identity(), fresh: 0 };
    let orig: Vec<(String, Ty)> = {
        let mut vs = problem.left.free_evars();
        for v in problem.right.free_evars() {
            if !vs.contains(&v) {
                vs.push(v);
            }
        }
        vs
    };
    match st.solve(vec![(problem.left.clone(), problem.right.clone())]) {
        Ok(()) => {
            // Restrict to the problem's own variables; fresh ones appear
            // only inside images.
            let mut out = Subst::identity();
            for (n, ty) in &orig {
                let img = st.subst.apply(&Term::var(n, ty));
                out.bind(n, ty, img).expect("pattern images are closed and support-free");
            }
            UnifResult::Mgu(out.minimized())
        }
        Err(Fail::NoUnifier) => UnifResult::NoUnifier,
        Err(Fail::NotAPattern(t)) => UnifResult::NotAPattern(t),
    }
}

enum Fail {
    NoUnifier,
    NotAPattern(Term),
}

struct Solver {
    subst: Subst,
    fresh: u32,
}

impl Solver {
    fn fresh_evar(&mut self, ty: &Ty) -> (String, Term) {
        let name = format!("#u{}", self.fresh);
        self.fresh += 1;
        (name.clone(), Term::var(&name, ty))
    }

    fn bind(&mut self, name: &str, ty: &Ty, image: Term) -> Result<(), Fail> {
        let s = Subst::single(name, ty, image).map_err(|_| Fail::NoUnifier)?;
        self.subst = Subst::compose(&self.subst, &s);
        Ok(())
    }

    fn solve(&mut self, mut eqs: Vec<(Term, Term)>) -> Result<(), Fail> {
        while let Some((s, t)) = eqs.pop() {
            let s = self.subst.apply(&s);
            let t = self.subst.apply(&t);
            if s == t {
                continue;
            }
            if s.binder.len() != t.binder.len() || s.binder != t.binder {
                return Err(Fail::NoUnifier);
            }
            let flex_s = matches!(s.head, Head::Evar(_, _));
            let flex_t = matches!(t.head, Head::Evar(_, _));
            match (flex_s, flex_t) {
                (false, false) => {
                    if s.head != t.head || s.args.len() != t.args.len() {
                        return Err(Fail::NoUnifier);
                    }
                    for (a, b) in s.args.iter().zip(&t.args) {
                        eqs.push((
                            Term::lam(s.binder.clone(), a.clone()),
                            Term::lam(t.binder.clone(), b.clone()),
                        ));
                    }
                }
                (true, false) => self.flex_rigid(&s, &t)?,
                (false, true) => self.flex_rigid(&t, &s)?,
                (true, true) => self.flex_flex(&s, &t)?,
            }
        }
        Ok(())
    }

    /// Pattern arguments of a flexible spine: the de Bruijn index of each
    /// argument, which must be distinct bound variables.
    fn pattern_args(t: &Term) -> Result<Vec<usize>, Fail> {
        let mut out = Vec::new();
        for a in &t.args {
            match as_bvar(a) {
                Some(i) if !out.contains(&i) => out.push(i),
                _ => {
                    return Err(Fail::NotAPattern(Term {
                        binder: vec![],
                        head: t.head.clone(),
                        args: t.args.clone(),
                    }))
                }
            }
        }
        Ok(out)
    }

    fn flex_rigid(&mut self, fx: &Term, rigid: &Term) -> Result<(), Fail> {
        let (h, hty) = match &fx.head {
            Head::Evar(h, ty) => (h.clone(), ty.clone()),
            _ => unreachable!(),
        };
        let xs = Self::pattern_args(fx)?;
        // Occurs check and inversion of the rigid side through x⃗.
        let body = Term { binder: vec![], head: rigid.head.clone(), args: rigid.args.clone() };
        let inverted = invert(&body, &xs, &h, 0, self)?;
        let (atys, _) = hty.strip();
        debug_assert_eq!(atys.len(), xs.len());
        let image = Term::lam(atys, inverted);
        self.bind(&h, &hty, image)
    }

    fn flex_flex(&mut self, s: &Term, t: &Term) -> Result<(), Fail> {
        let (h, hty) = match &s.head {
            Head::Evar(h, ty) => (h.clone(), ty.clone()),
            _ => unreachable!(),
        };
        let (g, gty) = match &t.head {
            Head::Evar(g, ty) => (g.clone(), ty.clone()),
            _ => unreachable!(),
        };
        let xs = Self::pattern_args(s)?;
        let ys = Self::pattern_args(t)?;
        let (h_atys, res) = hty.strip();
        let (g_atys, _) = gty.strip();
        if h == g {
            // h x⃗ = h y⃗ : keep positions where the arguments agree.
            let keep: Vec<usize> = (0..xs.len()).filter(|&i| xs[i] == ys[i]).collect();
            let new_ty = {
                let mut ty = res.clone();
                for &i in keep.iter().rev() {
                    ty = Ty::arrow(h_atys[i].clone(), ty);
                }
                ty
            };
            let (hp, _) = self.fresh_evar(&new_ty);
            let n = xs.len();
            // image = λz₁…zₙ. h' z_{keep}
            let args: Vec<Term> = keep
                .iter()
                .map(|&i| Term::eta(Head::Bound(n - 1 - i), &h_atys[i]))
                .collect();
            let image = Term::lam(
                h_atys.clone(),
                Term { binder: vec![], head: Head::Evar(hp, new_ty), args },
            );
            self.bind(&h, &hty, image)
        } else {
            // h x⃗ = g y⃗ : both map to h' over the common variables.
            let common: Vec<usize> = xs.iter().copied().filter(|v| ys.contains(v)).collect();
            let common_tys: Vec<Ty> = common
                .iter()
                .map(|v| {
                    let i = xs.iter().position(|x| x == v).unwrap();
                    h_atys[i].clone()
                })
                .collect();
            let new_ty = {
                let mut ty = res.clone();
                for cty in common_tys.iter().rev() {
                    ty = Ty::arrow(cty.clone(), ty);
                }
                ty
            };
            let (hp, _) = self.fresh_evar(&new_ty);
            let mk_image = |args_idx: &[usize], atys: &[Ty]| -> Term {
                let n = args_idx.len();
                let spine_args: Vec<Term> = common
                    .iter()
                    .map(|v| {
                        let i = args_idx.iter().position(|x| x == v).unwrap();
                        Term::eta(Head::Bound(n - 1 - i), &atys[i])
                    })
                    .collect();
                Term::lam(
                    atys.to_vec(),
                    Term {
                        binder: vec![],
                        head: Head::Evar(hp.clone(), new_ty.clone()),
                        args: spine_args,
                    },
                )
            };
            self.bind(&h, &hty, mk_image(&xs, &h_atys))?;
            self.bind(&g, &gty, mk_image(&ys, &g_atys))
        }
    }
}

/// Rewrites a rigid body whose dangling indices refer to the equation's
/// stripped binder so that they refer to the flexible head's argument list
/// instead; fails when a variable outside `x⃗` occurs, and performs the
/// occurs check for `h`.  Flexible subterms are pruned through a fresh
/// variable when they mention disallowed indices.
fn invert(t: &Term, xs: &[usize], h: &str, depth: usize, st: &mut Solver) -> Result<Term, Fail> {
    let d = depth + t.binder.len();
    let n = xs.len();
    match &t.head {
        Head::Evar(g, gty) => {
            if g == h {
                return Err(Fail::NoUnifier);
            }
            // A flexible subterm: its pattern arguments must themselves be
            // invertible variables; prune those that are not available.
            let ys = Solver::pattern_args(t)?;
            let mut keep: Vec<usize> = Vec::new();
            for (i, y) in ys.iter().enumerate() {
                if *y < d || xs.contains(&(y - d)) {
                    keep.push(i);
                }
            }
            let (g_atys, gres) = gty.strip();
            if keep.len() == ys.len() {
                // All arguments survive: just remap them.
                let args = t
                    .args
                    .iter()
                    .map(|a| invert(a, xs, h, d, st))
                    .collect::<Result<Vec<_>, _>>()?;
                return Ok(Term::lam(
                    t.binder.clone(),
                    Term { binder: vec![], head: Head::Evar(g.clone(), gty.clone()), args },
                ));
            }
            // Prune: g := λz⃗. g' z_{keep}, then retry on the contracted
            // spine.
            let kept_tys: Vec<Ty> = keep.iter().map(|&i| g_atys[i].clone()).collect();
            let new_ty = {
                let mut ty = gres.clone();
                for kty in kept_tys.iter().rev() {
                    ty = Ty::arrow(kty.clone(), ty);
                }
                ty
            };
            let (gp, _) = st.fresh_evar(&new_ty);
            let m = g_atys.len();
            let image_args: Vec<Term> = keep
                .iter()
                .map(|&i| Term::eta(Head::Bound(m - 1 - i), &g_atys[i]))
                .collect();
            let image = Term::lam(
                g_atys.clone(),
                Term { binder: vec![], head: Head::Evar(gp.clone(), new_ty.clone()), args: image_args },
            );
            st.bind(g, gty, image)?;
            let new_args: Vec<Term> = keep.iter().map(|&i| t.args[i].clone()).collect();
            let contracted = Term::lam(
                t.binder.clone(),
                Term { binder: vec![], head: Head::Evar(gp, new_ty), args: new_args },
            );
            invert(&contracted, xs, h, depth, st)
        }
        Head::Bound(j) => {
            let args = t
                .args
                .iter()
                .map(|a| invert(a, xs, h, d, st))
                .collect::<Result<Vec<_>, _>>()?;
            let j = *j;
            let new_head = if j < d {
                Head::Bound(j)
            } else {
                let v = j - d;
                match xs.iter().position(|x| *x == v) {
                    // x⃗ position p becomes argument p of the image binder:
                    // index (n-1-p) at image depth 0, plus local depth d.
                    Some(p) => Head::Bound(d + (n - 1 - p)),
                    None => return Err(Fail::NoUnifier),
                }
            };
            Ok(Term { binder: t.binder.clone(), head: new_head, args })
        }
        head => {
            let args = t
                .args
                .iter()
                .map(|a| invert(a, xs, h, d, st))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Term { binder: t.binder.clone(), head: head.clone(), args })
        }
    }
}

/// Finds `δ` with `(x·general)·δ = x·specific` for every variable of
/// interest: the factoring of a unifier through a most general one.
/// Variables on the specific side are frozen (treated as constants).
pub fn factor_through(
    general: &Subst,
    specific: &Subst,
    domain: &[(String, Ty)],
) -> Option<Subst> {
    let mut eqs = Vec::new();
    for (n, ty) in domain {
        let lhs = general.apply(&Term::var(n, ty));
        let rhs = freeze(&specific.apply(&Term::var(n, ty)));
        eqs.push((lhs, rhs));
    }
    let mut st = Solver { subst: Subst::identity(), fresh: 500_000 };
    match st.solve(eqs) {
        Ok(()) => {
            let mut vars: Vec<(String, Ty)> = Vec::new();
            for (n, ty) in domain {
                for v in general.apply(&Term::var(n, ty)).free_evars() {
                    if !vars.contains(&v) {
                        vars.push(v);
                    }
                }
            }
            let mut out = Subst::identity();
            for (n, ty) in vars {
                let img = unfreeze(&st.subst.apply(&Term::var(&n, &ty)));
                out.bind(&n, &ty, img).ok()?;
            }
            Some(out.minimized())
        }
        Err(_) => None,
    }
}

fn freeze(t: &Term) -> Term {
    let head = match &t.head {
        Head::Evar(n, ty) => Head::Konst(format!("!{}", n), ty.clone()),
        h => h.clone(),
    };
    Term { binder: t.binder.clone(), head, args: t.args.iter().map(freeze).collect() }
}

fn unfreeze(t: &Term) -> Term {
    let head = match &t.head {
        Head::Konst(n, ty) if n.starts_with('!') => Head::Evar(n[1..].to_string(), ty.clone()),
        h => h.clone(),
    };
    Term { binder: t.binder.clone(), head, args: t.args.iter().map(unfreeze).collect() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::Perm;

    fn nm() -> Ty {
        Ty::nominal("nm")
    }

    fn problem(l: Term, r: Term) -> UnifProblem {
        UnifProblem { left: l, right: r }
    }

    #[test]
    fn pattern_recognition() {
        let hty = Ty::arrow(nm(), Ty::base("tm"));
        let h = Term::var("h", &hty);
        // λc. h c
        let t1 = Term::lam(vec![nm()], Term::apply(&h, &[Term::bound(0, &nm())]));
        assert!(is_pattern(&t1));
        // λc. h c c
        let h2ty = Ty::arrow(nm(), Ty::arrow(nm(), Ty::base("tm")));
        let h2 = Term::var("h", &h2ty);
        let t2 = Term::lam(
            vec![nm()],
            Term::apply(&h2, &[Term::bound(0, &nm()), Term::bound(0, &nm())]),
        );
        assert!(!is_pattern(&t2));
        // λc. h (f c)
        let fty = Ty::arrow(nm(), nm());
        let fc = Term::apply(&Term::konst("f", &fty), &[Term::bound(0, &nm())]);
        let t3 = Term::lam(vec![nm()], Term::apply(&h, &[fc]));
        assert!(!is_pattern(&t3));
        assert!(pattern_offender(&t3).is_some());
    }

    #[test]
    fn closed_substitution_cannot_reach_nominals() {
        // unify(λc. x, λc. c) has no unifier: x's image may not mention c.
        let x = Term::var("x", &nm());
        let l = Term::lam(vec![nm()], x);
        let r = Term::lam(vec![nm()], Term::bound(0, &nm()));
        assert_eq!(unify(&problem(l, r)), UnifResult::NoUnifier);
    }

    #[test]
    fn distinct_nominals_clash() {
        // b and a abstracted to distinct binders... here with empty binder:
        // abstraction of `b = a` over supp = {b, a} gives λb a. b vs λb a. a,
        // i.e. distinct bound variables.
        let b = Term::nom("b", &nm());
        let a = Term::nom("a", &nm());
        let sup = vec![("b".to_string(), nm()), ("a".to_string(), nm())];
        let l = b.close_noms(&sup);
        let r = a.close_noms(&sup);
        assert_eq!(unify(&problem(l, r)), UnifResult::NoUnifier);
    }

    #[test]
    fn projection_mgu() {
        // unify(λc. h c, λc. f c c) → h := λu. f u u
        let tm = Ty::base("tm");
        let hty = Ty::arrow(nm(), tm.clone());
        let fty = Ty::arrow(nm(), Ty::arrow(nm(), tm.clone()));
        let l = Term::lam(
            vec![nm()],
            Term::apply(&Term::var("h", &hty), &[Term::bound(0, &nm())]),
        );
        let r = Term::lam(
            vec![nm()],
            Term::apply(&Term::konst("f", &fty), &[Term::bound(0, &nm()), Term::bound(0, &nm())]),
        );
        match unify(&problem(l.clone(), r.clone())) {
            UnifResult::Mgu(s) => {
                assert_eq!(s.apply(&l), s.apply(&r));
                let img = s.get("h").unwrap();
                let expect = Term::lam(
                    vec![nm()],
                    Term::apply(
                        &Term::konst("f", &fty),
                        &[Term::bound(0, &nm()), Term::bound(0, &nm())],
                    ),
                );
                assert_eq!(img, &expect);
            }
            r => panic!("expected MGU, got {:?}", r),
        }
    }

    #[test]
    fn occurs_check() {
        // h = f h fails.
        let tm = Ty::base("tm");
        let fty = Ty::arrow(tm.clone(), tm.clone());
        let h = Term::var("h", &tm);
        let fh = Term::apply(&Term::konst("f", &fty), std::slice::from_ref(&h));
        assert_eq!(unify(&problem(h, fh)), UnifResult::NoUnifier);
    }

    #[test]
    fn flex_flex_same_head() {
        // λa b. h a b = λa b. h b a → h must ignore both arguments.
        let tm = Ty::base("tm");
        let hty = Ty::arrow(nm(), Ty::arrow(nm(), tm.clone()));
        let h = Term::var("h", &hty);
        let l = Term::lam(
            vec![nm(), nm()],
            Term::apply(&h, &[Term::bound(1, &nm()), Term::bound(0, &nm())]),
        );
        let r = Term::lam(
            vec![nm(), nm()],
            Term::apply(&h, &[Term::bound(0, &nm()), Term::bound(1, &nm())]),
        );
        match unify(&problem(l.clone(), r.clone())) {
            UnifResult::Mgu(s) => {
                assert_eq!(s.apply(&l), s.apply(&r));
                // The instantiated term no longer depends on a or b: applying
                // a swap of the binder leaves it unchanged.
                let inst = s.apply(&l);
                let a = Term::nom("a", &nm());
                let b = Term::nom("b", &nm());
                let opened = Term::apply(&inst, &[a.clone(), b.clone()]);
                let p = Perm::swap(("a", &nm()), ("b", &nm())).unwrap();
                assert_eq!(opened.perm(&p), opened);
            }
            r => panic!("expected MGU, got {:?}", r),
        }
    }

    #[test]
    fn flex_flex_distinct_heads() {
        // λa b. h a = λa b. g b → both collapse to a shared constant core.
        let tm = Ty::base("tm");
        let hty = Ty::arrow(nm(), tm.clone());
        let l = Term::lam(
            vec![nm(), nm()],
            Term::apply(&Term::var("h", &hty), &[Term::bound(1, &nm())]),
        );
        let r = Term::lam(
            vec![nm(), nm()],
            Term::apply(&Term::var("g", &hty), &[Term::bound(0, &nm())]),
        );
        match unify(&problem(l.clone(), r.clone())) {
            UnifResult::Mgu(s) => assert_eq!(s.apply(&l), s.apply(&r)),
            r => panic!("expected MGU, got {:?}", r),
        }
    }

    #[test]
    fn not_a_pattern_reported() {
        let tm = Ty::base("tm");
        let hty = Ty::arrow(tm.clone(), tm.clone());
        let h = Term::var("h", &hty);
        let z = Term::konst("z", &tm);
        let fty = Ty::arrow(tm.clone(), tm.clone());
        let fz = Term::apply(&Term::konst("f", &fty), std::slice::from_ref(&z));
        // h (f z) = z : argument of h is not a bound variable.
        let l = Term::apply(&h, &[fz]);
        assert!(matches!(unify(&problem(l, z)), UnifResult::NotAPattern(_)));
    }

    #[test]
    fn first_order_agreement() {
        // f x (g y) = f (g z) w has the obvious first-order MGU.
        let tm = Ty::base("tm");
        let f2 = Ty::arrow(tm.clone(), Ty::arrow(tm.clone(), tm.clone()));
        let g1 = Ty::arrow(tm.clone(), tm.clone());
        let g = |t: Term| Term::apply(&Term::konst("g", &g1), &[t]);
        let f = |a: Term, b: Term| Term::apply(&Term::konst("f", &f2), &[a, b]);
        let l = f(Term::var("x", &tm), g(Term::var("y", &tm)));
        let r = f(g(Term::var("z", &tm)), Term::var("w", &tm));
        match unify(&problem(l.clone(), r.clone())) {
            UnifResult::Mgu(s) => {
                assert_eq!(s.apply(&l), s.apply(&r));
                assert_eq!(s.get("x").unwrap(), &g(Term::var("z", &tm)));
                assert_eq!(s.get("w").unwrap(), &g(Term::var("y", &tm)));
            }
            r => panic!("expected MGU, got {:?}", r),
        }
    }

    #[test]
    fn symmetry() {
        let tm = Ty::base("tm");
        let g1 = Ty::arrow(tm.clone(), tm.clone());
        let g = |t: Term| Term::apply(&Term::konst("g", &g1), &[t]);
        let l = Term::var("x", &tm);
        let r = g(Term::konst("z", &tm));
        let a = unify(&problem(l.clone(), r.clone()));
        let b = unify(&problem(r, l.clone()));
        match (a, b) {
            (UnifResult::Mgu(s1), UnifResult::Mgu(s2)) => {
                assert_eq!(s1.apply(&l), s2.apply(&l));
            }
            _ => panic!("expected MGUs both ways"),
        }
    }

    #[test]
    fn factoring() {
        // general: x := g y ; specific: x := g z, y := z. δ should map y to z.
        let tm = Ty::base("tm");
        let g1 = Ty::arrow(tm.clone(), tm.clone());
        let g = |t: Term| Term::apply(&Term::konst("g", &g1), &[t]);
        let general = Subst::single("x", &tm, g(Term::var("y", &tm))).unwrap();
        let mut specific = Subst::single("x", &tm, g(Term::konst("z", &tm))).unwrap();
        specific.bind("y", &tm, Term::konst("z", &tm)).unwrap();
        let domain = vec![("x".to_string(), tm.clone()), ("y".to_string(), tm.clone())];
        let d = factor_through(&general, &specific, &domain).unwrap();
        for (n, ty) in &domain {
            let v = Term::var(n, ty);
            assert_eq!(d.apply(&general.apply(&v)), specific.apply(&v));
        }
        // A non-instance does not factor.
        let other = Subst::single("x", &tm, Term::konst("z", &tm)).unwrap();
        assert!(factor_through(&general, &other, &domain).is_none());
    }
}
