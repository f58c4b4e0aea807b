//! Canonical text form for terms, formulas and sequents.  Output is fully
//! parenthesized and reparses to the same structure, so printing then
//! parsing is the identity on resolved syntax.

use lg::{Formula, Sequent, Term, Ty};

/// Binder names used by the printer: `x0`, `x1`, … by depth.
fn binder_name(depth: usize) -> String {
    format!("x{}", depth)
}

pub fn print_term(t: &Term) -> String {
    let mut out = String::new();
    term(t, &mut Vec::new(), false, &mut out);
    out
}

fn term(t: &Term, stack: &mut Vec<(String, Ty)>, atom: bool, out: &mut String) {
    use lg::Head;
    let compound = !t.binder.is_empty() || !t.args.is_empty();
    if atom && compound {
        out.push('(');
    }
    let base = stack.len();
    for ty in &t.binder {
        let name = binder_name(stack.len());
        out.push('\\');
        out.push_str(&name);
        out.push_str(" : ");
        out.push_str(&ty.to_string());
        out.push_str(", ");
        stack.push((name, ty.clone()));
    }
    let head = match &t.head {
        Head::Bound(i) => stack[stack.len() - 1 - i].0.clone(),
        Head::Evar(n, _) | Head::Nom(n, _) | Head::Konst(n, _) => n.clone(),
    };
    out.push_str(&head);
    for a in &t.args {
        out.push(' ');
        term(a, stack, true, out);
    }
    stack.truncate(base);
    if atom && compound {
        out.push(')');
    }
}

pub fn print_formula(f: &Formula) -> String {
    let mut out = String::new();
    formula(f, &mut Vec::new(), false, &mut out);
    out
}

fn formula(f: &Formula, stack: &mut Vec<(String, Ty)>, nested: bool, out: &mut String) {
    let paren = nested
        && !matches!(f, Formula::Top | Formula::Bot)
        && !matches!(f, Formula::Atom(_, args) if args.is_empty());
    if paren {
        out.push('(');
    }
    match f {
        Formula::Top => out.push_str("true"),
        Formula::Bot => out.push_str("false"),
        Formula::And(a, b) => {
            formula(a, stack, true, out);
            out.push_str(" /\\ ");
            formula(b, stack, true, out);
        }
        Formula::Or(a, b) => {
            formula(a, stack, true, out);
            out.push_str(" \\/ ");
            formula(b, stack, true, out);
        }
        Formula::Imp(a, b) => {
            formula(a, stack, true, out);
            out.push_str(" => ");
            formula(b, stack, true, out);
        }
        Formula::Forall(ty, b) => quant("forall", ty, b, stack, out),
        Formula::Exists(ty, b) => quant("exists", ty, b, stack, out),
        Formula::Nabla(ty, b) => quant("nabla", ty, b, stack, out),
        Formula::Eq(s, t, _) => {
            term(s, stack, true, out);
            out.push_str(" = ");
            term(t, stack, true, out);
        }
        Formula::Nat(t) => {
            out.push_str("nat ");
            term(t, stack, true, out);
        }
        Formula::Atom(p, args) => {
            out.push_str(p);
            for a in args {
                out.push(' ');
                term(a, stack, true, out);
            }
        }
    }
    if paren {
        out.push(')');
    }
}

fn quant(kw: &str, ty: &Ty, body: &Formula, stack: &mut Vec<(String, Ty)>, out: &mut String) {
    let name = binder_name(stack.len());
    out.push_str(kw);
    out.push(' ');
    out.push_str(&name);
    out.push_str(" : ");
    out.push_str(&ty.to_string());
    out.push_str(", ");
    stack.push((name, ty.clone()));
    formula(body, stack, false, out);
    stack.pop();
}

pub fn print_sequent(s: &Sequent) -> String {
    let mut out = String::new();
    for (i, f) in s.left.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        // A quantified hypothesis must be parenthesized: its body would
        // otherwise swallow the separating comma.
        let confusable = matches!(
            f,
            Formula::Forall(_, _) | Formula::Exists(_, _) | Formula::Nabla(_, _)
        );
        formula(f, &mut Vec::new(), confusable, &mut out);
    }
    if !s.left.is_empty() {
        out.push(' ');
    }
    out.push_str("|- ");
    formula(&s.right, &mut Vec::new(), false, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::{nom_table, ResolveEnv};
    use lg::Signature;

    /// Printing then reparsing a resolved formula is the identity.
    fn roundtrip(f: &Formula, th: &lg::Theory) {
        let text = print_formula(f);
        let tf = crate::parse::parse(&format!(
            "{}theorem t : |- {} := (topr).",
            theory_header(th),
            text
        ))
        .unwrap_or_else(|e| panic!("`{}`: {}", text, e));
        assert_eq!(&tf.theorems[0].sequent.right, f, "`{}`", text);
    }

    fn theory_header(th: &lg::Theory) -> String {
        let mut out = String::new();
        for t in &th.nominal_types {
            out.push_str(&format!("nominal type {}.\n", t));
        }
        for (t, ns) in &th.declared_noms {
            for n in ns {
                out.push_str(&format!("nominal {} : {}.\n", n, t));
            }
        }
        for t in &th.base_types {
            out.push_str(&format!("type {}.\n", t));
        }
        for (c, ty) in &th.consts {
            out.push_str(&format!("const {} : {}.\n", c, ty));
        }
        for (p, (ty, lvl)) in &th.preds {
            out.push_str(&format!("pred {} : {}.\nlevel {} {}.\n", p, ty, p, lvl));
        }
        out
    }

    #[test]
    fn corpus_formulas_round_trip() {
        for file in ["nabla.lg", "quant.lg", "cut.lg", "eq.lg", "lists.lg", "nat.lg"] {
            let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
                .join("../../corpus")
                .join(file);
            let tf = crate::parse::parse(&std::fs::read_to_string(path).unwrap()).unwrap();
            for thm in &tf.theorems {
                for f in thm.sequent.left.iter().chain([&thm.sequent.right]) {
                    roundtrip(f, &tf.theory);
                }
            }
        }
    }

    #[test]
    fn lambda_witnesses_round_trip() {
        let th: lg::Theory = crate::parse::parse("nominal type nm.\ntype i.\nconst g : nm -> i.")
            .unwrap()
            .theory;
        let nomtys = nom_table(&th);
        let sig = Signature::new();
        let env = ResolveEnv { th: &th, sig: &sig, vars: &[], nomtys: &nomtys };
        let st = crate::parse::parse_standalone_term("\\y : nm, g y", &th).unwrap();
        let (t, _) = env.term(&st, &mut Vec::new()).unwrap();
        let printed = print_term(&t);
        let st2 = crate::parse::parse_standalone_term(&printed, &th).unwrap();
        let (t2, _) = env.term(&st2, &mut Vec::new()).unwrap();
        assert_eq!(t, t2, "`{}`", printed);
    }

    #[test]
    fn sequents_print_with_a_turnstile() {
        let tf = crate::parse::parse(
            "nominal type nm.\nnominal a : nm.\npred p : nm -> o.\n\
             theorem t : p a |- p a := (id 0).",
        )
        .unwrap();
        assert_eq!(print_sequent(&tf.theorems[0].sequent), "p a |- p a");
    }
}
