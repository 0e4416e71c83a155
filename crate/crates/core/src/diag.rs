//! Diagnostics shared by the parser, the static checker and the planner.

use std::fmt;

use crate::ast::Span;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Severity {
    Warning,
    Error,
}

impl Severity {
    pub fn as_str(self) -> &'static str {
        match self {
            Severity::Warning => "warning",
            Severity::Error => "error",
        }
    }
}

/// Stable rule identifiers. Each static rule owns exactly one id.
pub mod rules {
    pub const SYNTAX: &str = "syntax";
    pub const DUPLICATE_KERNEL: &str = "duplicate-kernel";
    pub const WL_METHOD: &str = "wl-method";
    pub const ORCHESTRATION_IN_NON_HOST: &str = "orchestration-in-non-host";
    pub const KERNEL_CONSTRUCT_IN_HOST: &str = "kernel-construct-in-host";
    pub const KERNEL_CONSTRUCT_IN_DEVICE: &str = "kernel-construct-in-device";
    pub const EXCLUSIVE_PLACEMENT: &str = "exclusive-placement";
    pub const ITERATE_INITIAL_IN_PIPE: &str = "iterate-initial-in-pipe";
    pub const WORKLIST_INVOKE_OUTSIDE_PIPE: &str = "worklist-invoke-outside-pipe";
    pub const LAUNCH_BOUNDS_BELOW_FIXED: &str = "launch-bounds-below-fixed";
    pub const LAUNCH_BOUNDS_RANGE: &str = "launch-bounds-range";
    pub const UNKNOWN_KERNEL: &str = "unknown-kernel";
    pub const INVOKE_NON_PLAIN: &str = "invoke-non-plain";
    pub const ARITY_MISMATCH: &str = "arity-mismatch";
    pub const REDUCE_IN_CRITICAL_SECTION: &str = "reduce-in-critical-section";
    pub const ITERATE_WITHOUT_TERMINATION: &str = "iterate-without-termination";
    pub const REDUCTION_WITHOUT_RETURN: &str = "reduction-without-return";
    pub const CBLOCK_CONTROL_TRANSFER: &str = "cblock-control-transfer";
    pub const CBLOCK_MISSING_RW: &str = "cblock-missing-rw";
    pub const BAD_ANNOTATION: &str = "bad-annotation";
    pub const BLOCK_SIZE_NOT_WARP_MULTIPLE: &str = "block-size-not-warp-multiple";
    pub const BLOCK_SIZE_OVERRIDE: &str = "block-size-override";
    pub const OUTLINING_IMPOSSIBLE: &str = "outlining-impossible";
    /// Operator code the interpreter cannot execute.
    pub const INTERP_UNSUPPORTED: &str = "interp-unsupported";
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
    pub span: Span,
    pub file: String,
    pub rule_id: &'static str,
}

impl Diagnostic {
    pub fn error(rule_id: &'static str, span: Span, message: impl Into<String>) -> Self {
        Diagnostic { severity: Severity::Error, message: message.into(), span, file: String::new(), rule_id }
    }

    pub fn warning(rule_id: &'static str, span: Span, message: impl Into<String>) -> Self {
        Diagnostic { severity: Severity::Warning, message: message.into(), span, file: String::new(), rule_id }
    }

    pub fn in_file(mut self, file: impl Into<String>) -> Self {
        self.file = file.into();
        self
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

/// `file:line:col: severity[rule_id]: message`
impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let file = if self.file.is_empty() { "<input>" } else { &self.file };
        write!(
            f,
            "{file}:{}:{}: {}[{}]: {}",
            self.span.line,
            self.span.column,
            self.severity.as_str(),
            self.rule_id,
            self.message
        )
    }
}

pub fn has_errors(diags: &[Diagnostic]) -> bool {
    diags.iter().any(Diagnostic::is_error)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_format() {
        let d = Diagnostic::error(rules::SYNTAX, Span::new(3, 7, 1), "expected `;`").in_file("a.irgl");
        assert_eq!(d.to_string(), "a.irgl:3:7: error[syntax]: expected `;`");
    }
}
