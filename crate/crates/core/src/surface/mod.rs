//! Concrete syntax for processes, types and declaration files.
//!
//! ```text
//! proc   ::= "0" | proc "|" proc | "new" NAME [":" ann] "." proc
//!          | prefix "." proc | "(" proc ")"
//! ann    ::= "lin" btype | "sh" LABEL "(" btype ")"
//! prefix ::= NAME "!" "{" qual "}" LABEL ( "(" [NAME] ")" | "<" qual ">" )
//!          | NAME "?" "{" qual "}" LABEL ( "(" [NAME] ")" | "<" ROLE ">" )
//! qual   ::= "+" ROLE | "-" ROLE
//! btype  ::= "end" | btype "|" btype | "dia" btype | pol LABEL "(" msg ")" "." btype
//!          | "(" btype ")" | TYPENAME
//! pol    ::= "!" ROLE | "?" ROLE | "tau" ROLE ROLE
//! msg    ::= btype | "sh" LABEL "(" btype ")" | "role" ROLE
//! ```
//!
//! Files hold `typedef`, `shared`, `linear` and `proc` items, each ended by
//! `;`. Line comments start with `//`.

mod lexer;
mod parser;
mod printer;

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::env::{LinearEnv, SharedEnv};
use crate::syntax::{Name, Process};
use crate::types::{Behavioral, SharedType};

pub use parser::{parse_file, parse_process, parse_type};
pub use printer::{print_process, print_shared_type, print_type};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

/// 1-based line and column, length in characters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Span {
    pub line: usize,
    pub column: usize,
    pub length: usize,
}

impl Span {
    pub fn new(line: usize, column: usize, length: usize) -> Self {
        Span {
            line,
            column,
            length,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
    pub span: Span,
}

impl Diagnostic {
    pub fn error(message: impl Into<String>, span: Span) -> Self {
        Diagnostic {
            severity: Severity::Error,
            message: message.into(),
            span,
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let level = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(
            f,
            "{}:{}: {level}: {}",
            self.span.line, self.span.column, self.message
        )
    }
}

/// Non-empty list of diagnostics from a failed parse or load.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub struct Diagnostics(pub Vec<Diagnostic>);

impl fmt::Display for Diagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

impl From<Diagnostic> for Diagnostics {
    fn from(d: Diagnostic) -> Self {
        Diagnostics(vec![d])
    }
}

/// A loaded declaration file with typedefs already expanded.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SourceFile {
    pub typedefs: Vec<(String, Behavioral)>,
    pub shared: Vec<(Name, SharedType)>,
    pub linear: Vec<(Name, Behavioral)>,
    pub procs: Vec<(String, Process)>,
}

impl SourceFile {
    pub fn linear_env(&self) -> LinearEnv {
        self.linear.iter().cloned().collect()
    }

    pub fn shared_env(&self) -> SharedEnv {
        self.shared.iter().cloned().collect::<BTreeMap<_, _>>()
    }

    pub fn proc(&self, name: &str) -> Option<&Process> {
        self.procs.iter().find(|(n, _)| n == name).map(|(_, p)| p)
    }
}
