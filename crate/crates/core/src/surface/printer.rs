use std::fmt::{self, Write};

use crate::syntax::{Prefix, Process, RestrictionAnnotation};
use crate::types::{Behavioral, Message, Polarity, SharedType};

/// Renders `p` with the fewest parentheses that preserve its tree.
pub fn print_process(p: &Process) -> String {
    let mut out = String::new();
    write_process(&mut out, p).expect("writing to a String");
    out
}

pub fn print_type(b: &Behavioral) -> String {
    let mut out = String::new();
    write_type(&mut out, b).expect("writing to a String");
    out
}

pub fn print_shared_type(t: &SharedType) -> String {
    let mut out = String::new();
    write_shared(&mut out, t).expect("writing to a String");
    out
}

fn write_process(out: &mut impl Write, p: &Process) -> fmt::Result {
    match p {
        Process::Nil => out.write_char('0'),
        Process::Par(l, r) => {
            write_process(out, l)?;
            out.write_str(" | ")?;
            write_seq(out, r)
        }
        Process::Restrict {
            name,
            annotation,
            body,
        } => {
            write!(out, "new {name}")?;
            match annotation {
                Some(RestrictionAnnotation::Linear(b)) => {
                    out.write_str(" : lin ")?;
                    write_type(out, b)?;
                }
                Some(RestrictionAnnotation::Shared(t)) => {
                    out.write_str(" : sh ")?;
                    write_shared(out, t)?;
                }
                None => {}
            }
            out.write_str(" . ")?;
            write_seq(out, body)
        }
        Process::Act { prefix, cont } => {
            write_prefix(out, prefix)?;
            out.write_char('.')?;
            write_seq(out, cont)
        }
    }
}

fn write_seq(out: &mut impl Write, p: &Process) -> fmt::Result {
    if matches!(p, Process::Par(..)) {
        out.write_char('(')?;
        write_process(out, p)?;
        out.write_char(')')
    } else {
        write_process(out, p)
    }
}

fn write_prefix(out: &mut impl Write, prefix: &Prefix) -> fmt::Result {
    match prefix {
        Prefix::SendName {
            subject,
            who,
            label,
            object,
        } => {
            write!(out, "{subject}!{{{who}}}{label}(")?;
            if let Some(o) = object {
                write!(out, "{o}")?;
            }
            out.write_char(')')
        }
        Prefix::RecvName {
            subject,
            who,
            label,
            binder,
        } => {
            write!(out, "{subject}?{{{who}}}{label}(")?;
            if let Some(b) = binder {
                write!(out, "{b}")?;
            }
            out.write_char(')')
        }
        Prefix::SendAuth {
            subject,
            who,
            label,
            object,
        } => write!(out, "{subject}!{{{who}}}{label}<{object}>"),
        Prefix::RecvAuth {
            subject,
            who,
            label,
            object,
        } => write!(out, "{subject}?{{{who}}}{label}<{object}>"),
    }
}

fn write_type(out: &mut impl Write, b: &Behavioral) -> fmt::Result {
    match b {
        Behavioral::Par(l, r) => {
            write_type_seq(out, l)?;
            out.write_str(" | ")?;
            write_type(out, r)
        }
        other => write_type_seq(out, other),
    }
}

fn write_type_seq(out: &mut impl Write, b: &Behavioral) -> fmt::Result {
    match b {
        Behavioral::End => out.write_str("end"),
        Behavioral::Par(..) => {
            out.write_char('(')?;
            write_type(out, b)?;
            out.write_char(')')
        }
        Behavioral::Sometime(body) => {
            out.write_str("dia ")?;
            write_type_seq(out, body)
        }
        Behavioral::Prefixed {
            pol,
            label,
            msg,
            cont,
        } => {
            match pol {
                Polarity::Out(r) => write!(out, "!{r}")?,
                Polarity::In(r) => write!(out, "?{r}")?,
                Polarity::Sync { sender, receiver } => write!(out, "tau {sender} {receiver}")?,
            }
            write!(out, " {label}(")?;
            match &**msg {
                Message::Beh(m) => write_type(out, m)?,
                Message::Sh(t) => {
                    out.write_str("sh ")?;
                    write_shared(out, t)?;
                }
                Message::Role(r) => write!(out, "role {r}")?,
            }
            out.write_str(").")?;
            write_type_seq(out, cont)
        }
    }
}

fn write_shared(out: &mut impl Write, t: &SharedType) -> fmt::Result {
    write!(out, "{}(", t.label)?;
    write_type(out, &t.carried)?;
    out.write_char(')')
}

impl fmt::Display for Process {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_process(f, self)
    }
}

impl fmt::Display for Prefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_prefix(f, self)
    }
}

impl fmt::Display for Behavioral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_type(f, self)
    }
}

impl fmt::Display for SharedType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_shared(f, self)
    }
}
