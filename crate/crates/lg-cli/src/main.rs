//! `lg` — checks, normalizes and translates proofs over theory files.
//!
//! Exit codes: 0 success, 1 proof or unification failure, 2 parse error,
//! 3 stratification violation, 4 internal error.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lg::{check, normalize, Signature};
use lg_cli::{elaborate, parse, parse_closed_term, parse_standalone_ty, TheoryFile};
use serde_json::json;

#[derive(Parser)]
#[command(name = "lg", version, about = "proof checker and cut-elimination engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Theory file to load.
    file: PathBuf,
    /// Emit machine-readable JSON instead of text.
    #[arg(long)]
    json: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Check every theorem in a file.
    Check {
        #[command(flatten)]
        common: Common,
    },
    /// Eliminate cuts from theorems and report the result.
    Normalize {
        #[command(flatten)]
        common: Common,
        /// Only normalize the named theorem.
        #[arg(long)]
        theorem: Option<String>,
        /// Reduction-step budget.
        #[arg(long, default_value_t = 100_000)]
        fuel: usize,
        /// Write the normalized derivation(s) as JSON to this path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Translate proofs between the two presentations.
    Translate {
        #[command(flatten)]
        common: Common,
        /// Target presentation: `folnb` or `lg`.
        #[arg(long)]
        to: String,
        /// Only translate the named theorem.
        #[arg(long)]
        theorem: Option<String>,
        /// For `--to lg`: a JSON file of translated derivations to read back.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Write the translated derivation(s) as JSON to this path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Unify two terms over an explicit signature.
    Unify {
        #[command(flatten)]
        common: Common,
        /// Signature entries, e.g. `X : nm -> o, Y : o`.
        #[arg(long, default_value = "")]
        sig: String,
        #[arg(long)]
        left: String,
        #[arg(long)]
        right: String,
    },
    /// Infer minimal predicate levels and check stratification.
    Level {
        #[command(flatten)]
        common: Common,
    },
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err((code, msg)) => {
            eprintln!("error: {}", msg);
            ExitCode::from(code)
        }
    }
}

type Fail = (u8, String);

fn load(common: &Common) -> Result<TheoryFile, Fail> {
    let text = std::fs::read_to_string(&common.file)
        .map_err(|e| (2, format!("{}: {}", common.file.display(), e)))?;
    let tf = parse(&text).map_err(|e| (2, format!("{}: {}", common.file.display(), e)))?;
    tf.theory.check_stratified().map_err(|e| (3, e.to_string()))?;
    Ok(tf)
}

fn select<'a>(
    tf: &'a TheoryFile,
    name: &Option<String>,
) -> Result<Vec<&'a lg_cli::Theorem>, Fail> {
    match name {
        None => Ok(tf.theorems.iter().collect()),
        Some(n) => {
            let found: Vec<_> = tf.theorems.iter().filter(|t| &t.name == n).collect();
            if found.is_empty() {
                Err((2, format!("no theorem named `{}`", n)))
            } else {
                Ok(found)
            }
        }
    }
}

fn run() -> Result<ExitCode, Fail> {
    match Cli::parse().command {
        Command::Check { common } => {
            let tf = load(&common)?;
            let mut rows = Vec::new();
            for thm in &tf.theorems {
                let d = elaborate(thm, &tf.theory)
                    .map_err(|e| (1, format!("theorem `{}`: {}", thm.name, e)))?;
                check(&d, &tf.theory)
                    .map_err(|v| (1, format!("theorem `{}`: {}", thm.name, v)))?;
                rows.push((thm.name.clone(), d.height()));
            }
            if common.json {
                let theorems: Vec<_> = rows
                    .iter()
                    .map(|(n, h)| json!({"name": n, "status": "ok", "height": h}))
                    .collect();
                println!(
                    "{}",
                    json!({"format": 1, "command": "check", "theorems": theorems})
                );
            } else {
                for (n, h) in &rows {
                    println!("theorem {}: ok (height {})", n, h);
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Normalize { common, theorem, fuel, out } => {
            let tf = load(&common)?;
            let mut rows = Vec::new();
            for thm in select(&tf, &theorem)? {
                let d = elaborate(thm, &tf.theory)
                    .map_err(|e| (1, format!("theorem `{}`: {}", thm.name, e)))?;
                check(&d, &tf.theory)
                    .map_err(|v| (1, format!("theorem `{}`: {}", thm.name, v)))?;
                let norm = normalize(&d, &tf.theory, fuel)
                    .map_err(|e| (4, format!("theorem `{}`: {}", thm.name, e)))?;
                check(&norm.derivation, &tf.theory)
                    .map_err(|v| (4, format!("theorem `{}`: {}", thm.name, v)))?;
                rows.push((thm.name.clone(), norm));
            }
            if let Some(path) = out {
                let payload: Vec<_> = rows
                    .iter()
                    .map(|(n, norm)| json!({"name": n, "derivation": norm.derivation}))
                    .collect();
                let text = serde_json::to_string_pretty(&json!({"format": 1, "derivations": payload}))
                    .map_err(|e| (4, e.to_string()))?;
                std::fs::write(&path, text).map_err(|e| (4, e.to_string()))?;
            }
            if common.json {
                let theorems: Vec<_> = rows
                    .iter()
                    .map(|(n, norm)| {
                        json!({"name": n, "steps": norm.steps,
                               "height": norm.derivation.height()})
                    })
                    .collect();
                println!(
                    "{}",
                    json!({"format": 1, "command": "normalize", "theorems": theorems})
                );
            } else {
                for (n, norm) in &rows {
                    println!(
                        "theorem {}: normalized in {} step(s) (height {})",
                        n,
                        norm.steps,
                        norm.derivation.height()
                    );
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Translate { common, to, theorem, input, out } => {
            let tf = load(&common)?;
            let mut payload = Vec::new();
            let mut rows = Vec::new();
            match to.as_str() {
                "folnb" => {
                    for thm in select(&tf, &theorem)? {
                        let d = elaborate(thm, &tf.theory)
                            .map_err(|e| (1, format!("theorem `{}`: {}", thm.name, e)))?;
                        check(&d, &tf.theory)
                            .map_err(|v| (1, format!("theorem `{}`: {}", thm.name, v)))?;
                        let fd = lg::lg_to_folnb(&d, &tf.theory)
                            .map_err(|e| (1, format!("theorem `{}`: {}", thm.name, e)))?;
                        lg::check_folnb(&fd, &tf.theory)
                            .map_err(|v| (4, format!("theorem `{}`: {}", thm.name, v)))?;
                        rows.push((thm.name.clone(), fd.height()));
                        payload.push(json!({"name": thm.name, "derivation": fd}));
                    }
                }
                "lg" => {
                    let fds: Vec<(String, lg::FDerivation)> = match input {
                        Some(path) => {
                            let text = std::fs::read_to_string(&path)
                                .map_err(|e| (2, format!("{}: {}", path.display(), e)))?;
                            let v: serde_json::Value = serde_json::from_str(&text)
                                .map_err(|e| (2, format!("{}: {}", path.display(), e)))?;
                            let items = v
                                .get("derivations")
                                .and_then(|d| d.as_array())
                                .ok_or((2, "expected a `derivations` array".to_string()))?;
                            items
                                .iter()
                                .map(|item| {
                                    let name = item
                                        .get("name")
                                        .and_then(|n| n.as_str())
                                        .unwrap_or("(unnamed)")
                                        .to_string();
                                    let fd = serde_json::from_value(
                                        item.get("derivation").cloned().unwrap_or_default(),
                                    )
                                    .map_err(|e| (2, e.to_string()))?;
                                    Ok((name, fd))
                                })
                                .collect::<Result<Vec<_>, Fail>>()?
                        }
                        None => {
                            // Without an input file, round-trip the file's own
                            // theorems through the local-signature form.
                            let mut fds = Vec::new();
                            for thm in select(&tf, &theorem)? {
                                let d = elaborate(thm, &tf.theory)
                                    .map_err(|e| (1, format!("theorem `{}`: {}", thm.name, e)))?;
                                let fd = lg::lg_to_folnb(&d, &tf.theory).map_err(|e| {
                                    (1, format!("theorem `{}`: {}", thm.name, e))
                                })?;
                                fds.push((thm.name.clone(), fd));
                            }
                            fds
                        }
                    };
                    for (name, fd) in fds {
                        let d = lg::folnb_to_lg(&fd, &tf.theory)
                            .map_err(|e| (1, format!("theorem `{}`: {}", name, e)))?;
                        check(&d, &tf.theory)
                            .map_err(|v| (4, format!("theorem `{}`: {}", name, v)))?;
                        rows.push((name.clone(), d.height()));
                        payload.push(json!({"name": name, "derivation": d}));
                    }
                }
                other => return Err((2, format!("unknown target `{}`", other))),
            }
            if let Some(path) = out {
                let text = serde_json::to_string_pretty(&json!({"format": 1, "derivations": payload}))
                    .map_err(|e| (4, e.to_string()))?;
                std::fs::write(&path, text).map_err(|e| (4, e.to_string()))?;
            }
            if common.json {
                let theorems: Vec<_> = rows
                    .iter()
                    .map(|(n, h)| json!({"name": n, "status": "ok", "height": h}))
                    .collect();
                println!(
                    "{}",
                    json!({"format": 1, "command": "translate", "to": to, "theorems": theorems})
                );
            } else {
                for (n, h) in &rows {
                    println!("theorem {}: translated to {} (height {})", n, to, h);
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Unify { common, sig, left, right } => {
            let tf = load(&common)?;
            let mut signature: Signature = BTreeMap::new();
            for entry in sig.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                let (name, ty) = entry
                    .split_once(':')
                    .ok_or((2, format!("bad signature entry `{}`", entry)))?;
                let ty = parse_standalone_ty(ty.trim(), &tf.theory)
                    .map_err(|e| (2, e.to_string()))?;
                signature.insert(name.trim().to_string(), ty);
            }
            let l = parse_closed_term(&left, &signature, &tf.theory).map_err(|e| (2, e))?;
            let r = parse_closed_term(&right, &signature, &tf.theory).map_err(|e| (2, e))?;
            let result = lg::unify::unify(&lg::unify::UnifProblem {
                left: l.clone(),
                right: r.clone(),
            });
            let (status, bindings, code) = match &result {
                lg::unify::UnifResult::Mgu(s) => {
                    let b: Vec<_> = s
                        .iter()
                        .map(|(n, _, t)| json!({"var": n, "image": t.to_string()}))
                        .collect();
                    ("unifiable", b, ExitCode::SUCCESS)
                }
                lg::unify::UnifResult::NoUnifier => {
                    ("no unifier", vec![], ExitCode::from(1))
                }
                lg::unify::UnifResult::NotAPattern(_) => {
                    ("not a pattern", vec![], ExitCode::from(1))
                }
            };
            if common.json {
                println!(
                    "{}",
                    json!({"format": 1, "command": "unify", "status": status,
                           "bindings": bindings})
                );
            } else {
                println!("{}", status);
                for b in &bindings {
                    println!("  {} := {}", b["var"].as_str().unwrap(), b["image"].as_str().unwrap());
                }
            }
            Ok(code)
        }
        Command::Level { common } => {
            let text = std::fs::read_to_string(&common.file)
                .map_err(|e| (2, format!("{}: {}", common.file.display(), e)))?;
            let tf = parse(&text).map_err(|e| (2, e.to_string()))?;
            let levels = tf.theory.infer_levels().map_err(|e| (3, e.to_string()))?;
            tf.theory.check_stratified().map_err(|e| (3, e.to_string()))?;
            if common.json {
                let preds: Vec<_> = levels
                    .iter()
                    .map(|(n, l)| json!({"pred": n, "level": l}))
                    .collect();
                println!("{}", json!({"format": 1, "command": "level", "preds": preds}));
            } else {
                for (n, l) in &levels {
                    println!("{}: {}", n, l);
                }
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
