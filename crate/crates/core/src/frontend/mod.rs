//! Surface syntax: the notation of the IrGL listings.
//!
//! The grammar is documented in `GRAMMAR.md` at the repository root. Parsing
//! stops at the first syntax error; other front-end diagnostics (misused
//! worklist methods, duplicate kernels) are collected and parsing continues.

mod parser;
mod print;

pub use parser::{parse_source, parse_statements};
pub use print::{pretty_print, print_block};
