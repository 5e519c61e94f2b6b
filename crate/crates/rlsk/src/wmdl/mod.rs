//! The world-model description language: a small declarative language for
//! optimizer world models, with a parser, interpreter, canonical formatter,
//! and the predict / actions / evaluate / terminal surface planners consume.
//!
//! A program has four required sections (`actions`, `transition`, `evaluate`,
//! `terminal`) plus optional `constants` and inline empirical `tables`; see
//! `docs/wmdl.md` for the grammar and builtin semantics. Programs are
//! immutable once parsed; all state lives in the per-call context.

mod ast;
mod interp;
mod lexer;
mod parser;
mod pretty;

pub use ast::{
    expr_eq, program_eq, ActionItem, ActionRule, BinOp, Builtin, Expr, ExprKind, NamedTable,
    Slot, StateVar, TableFn, TableRow, UnaryOp, WmProgram,
};
pub use interp::{Binding, BoundModel, PredictedState, WmState};
pub use lexer::Span;
pub use parser::parse_wmdl;
pub use pretty::{expr_to_string, pretty_print};

/// A parse/bind problem with its source location.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: u32,
    pub col: u32,
    pub message: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.col, self.message)
    }
}

pub fn render_diagnostics(diags: &[Diagnostic]) -> String {
    diags.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("\n")
}

/// Expression evaluation failure, carrying the expression location.
#[derive(Debug, Clone, thiserror::Error)]
#[error("{message} (at {line}:{col})")]
pub struct ModelError {
    pub message: String,
    pub line: u32,
    pub col: u32,
}
