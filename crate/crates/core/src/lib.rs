//! IrGL: an intermediate representation for graph algorithms on GPUs.
//!
//! The crate contains the AST, a surface-syntax front end with a canonical
//! serialization, the static checker, the launch planner, a CUDA code
//! generator and a deterministic reference interpreter.

pub mod ast;
pub mod diag;
pub mod lexer;
pub mod op;
pub mod serial;
pub mod syntax;
pub mod frontend;
pub mod sema;
pub mod plan;
pub mod codegen;
pub mod interp;
