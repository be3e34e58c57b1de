//! Role-authorized pi-calculus.
//!
//! Processes communicate names and role authorizations over channels;
//! every action is performed on behalf of a role that is either
//! authorized (`+r`) or not yet authorized (`-r`). This crate provides
//! the syntax, the reduction semantics with authorization passing,
//! conversation types with their splitting algebra, a type checker that
//! rules out authorization errors, and harnesses that check preservation
//! and safety over reachable state spaces.

pub mod checker;
pub mod dynamics;
pub mod env;
pub mod meta;
pub mod split;
pub mod surface;
pub mod syntax;
pub mod types;

pub use checker::{check_process, well_typed, Checked, Derivation, Rule, TypeError, TypeErrorReason};
pub use dynamics::{
    canonicalize, enabled_steps, explore, is_auth_error, reachable_errors, step, struct_equiv,
    CanonicalForm, StateSpace, StepKind, StepLabel,
};
pub use env::{funauth, AuthSet, LinearEnv, SharedEnv};
pub use meta::{MetaReport, Verdict};
pub use surface::{parse_file, parse_process, parse_type, print_process, print_type, SourceFile};
pub use syntax::{Label, Name, Prefix, Process, QualifiedRole, Role};
pub use types::{Behavioral, Message, Polarity, SharedType};
