//! Library surface of the `lg` command-line front end: a theory-file
//! parser and a script elaborator, shared with the integration tests.

pub mod elab;
pub mod parse;
pub mod print;

pub use elab::{elaborate, parse_closed_term, ElabError};
pub use print::{print_formula, print_sequent, print_term};
pub use parse::{
    nom_table, parse, parse_standalone_term, parse_standalone_ty, ParseError, Theorem, TheoryFile,
};
