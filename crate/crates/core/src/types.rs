//! Conversation types and the operators the typing rules consume.
//!
//! Equivalence is decided on normal forms: parallel compositions are
//! flattened, stripped of `end` and sorted; nested `dia` collapses and
//! `dia end` is `end`.

use std::collections::BTreeSet;

use crate::syntax::{Label, Role};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Polarity {
    Out(Role),
    In(Role),
    Sync { sender: Role, receiver: Role },
}

impl Polarity {
    pub fn is_sync(&self) -> bool {
        matches!(self, Polarity::Sync { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Behavioral {
    End,
    Par(Box<Behavioral>, Box<Behavioral>),
    Sometime(Box<Behavioral>),
    Prefixed {
        pol: Polarity,
        label: Label,
        msg: Box<Message>,
        cont: Box<Behavioral>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Message {
    Beh(Behavioral),
    Sh(SharedType),
    Role(Role),
}

/// Type of a shared channel: one label carrying a delegated usage.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SharedType {
    pub label: Label,
    pub carried: Behavioral,
}

impl Behavioral {
    pub fn par(left: Behavioral, right: Behavioral) -> Behavioral {
        Behavioral::Par(Box::new(left), Box::new(right))
    }

    pub fn sometime(body: Behavioral) -> Behavioral {
        Behavioral::Sometime(Box::new(body))
    }

    pub fn prefixed(pol: Polarity, label: Label, msg: Message, cont: Behavioral) -> Behavioral {
        Behavioral::Prefixed {
            pol,
            label,
            msg: Box::new(msg),
            cont: Box::new(cont),
        }
    }

    /// Parallel composition of `parts` in the given order, right-nested.
    pub fn par_all(parts: impl IntoIterator<Item = Behavioral>) -> Behavioral {
        let mut parts: Vec<_> = parts.into_iter().collect();
        let Some(mut acc) = parts.pop() else {
            return Behavioral::End;
        };
        while let Some(next) = parts.pop() {
            acc = Behavioral::par(next, acc);
        }
        acc
    }

    pub fn is_end(&self) -> bool {
        matches!(self, Behavioral::End)
    }
}

impl Message {
    fn normalize(&self) -> Message {
        match self {
            Message::Beh(b) => Message::Beh(normalize(b)),
            Message::Sh(t) => Message::Sh(t.normalize()),
            Message::Role(r) => Message::Role(r.clone()),
        }
    }
}

impl SharedType {
    pub fn new(label: Label, carried: Behavioral) -> Self {
        SharedType { label, carried }
    }

    pub fn normalize(&self) -> SharedType {
        SharedType {
            label: self.label.clone(),
            carried: normalize(&self.carried),
        }
    }
}

/// Canonical representative of the equivalence class of `b`.
pub fn normalize(b: &Behavioral) -> Behavioral {
    match b {
        Behavioral::End => Behavioral::End,
        Behavioral::Par(..) => {
            let mut parts = Vec::new();
            collect_par(b, &mut parts);
            parts.sort();
            Behavioral::par_all(parts)
        }
        Behavioral::Sometime(body) => match normalize(body) {
            Behavioral::End => Behavioral::End,
            inner @ Behavioral::Sometime(_) => inner,
            inner => Behavioral::sometime(inner),
        },
        Behavioral::Prefixed {
            pol,
            label,
            msg,
            cont,
        } => Behavioral::prefixed(pol.clone(), label.clone(), msg.normalize(), normalize(cont)),
    }
}

fn collect_par(b: &Behavioral, out: &mut Vec<Behavioral>) {
    match b {
        Behavioral::Par(l, r) => {
            collect_par(l, out);
            collect_par(r, out);
        }
        other => match normalize(other) {
            Behavioral::End => {}
            n @ Behavioral::Par(..) => collect_par(&n, out),
            n => out.push(n),
        },
    }
}

/// Parallel components of a normal form (empty for `end`).
pub fn components(b: &Behavioral) -> Vec<&Behavioral> {
    fn walk<'a>(b: &'a Behavioral, out: &mut Vec<&'a Behavioral>) {
        match b {
            Behavioral::End => {}
            Behavioral::Par(l, r) => {
                walk(l, out);
                walk(r, out);
            }
            other => out.push(other),
        }
    }
    let mut out = Vec::new();
    walk(b, &mut out);
    out
}

/// Normal form of the parallel composition of normalized `parts`.
pub fn par_of<'a>(parts: impl IntoIterator<Item = &'a Behavioral>) -> Behavioral {
    normalize(&Behavioral::par_all(parts.into_iter().cloned()))
}

pub fn type_equiv(b1: &Behavioral, b2: &Behavioral) -> bool {
    normalize(b1) == normalize(b2)
}

/// All labels of `b`, including those inside carried messages.
pub fn labels_of(b: &Behavioral) -> BTreeSet<Label> {
    let mut out = BTreeSet::new();
    collect_labels(b, true, &mut out);
    out
}

/// Labels of the prefixes of `b` itself, ignoring carried messages.
pub fn spine_labels(b: &Behavioral) -> BTreeSet<Label> {
    let mut out = BTreeSet::new();
    collect_labels(b, false, &mut out);
    out
}

pub fn message_labels(m: &Message) -> BTreeSet<Label> {
    let mut out = BTreeSet::new();
    collect_message_labels(m, &mut out);
    out
}

fn collect_labels(b: &Behavioral, deep: bool, out: &mut BTreeSet<Label>) {
    match b {
        Behavioral::End => {}
        Behavioral::Par(l, r) => {
            collect_labels(l, deep, out);
            collect_labels(r, deep, out);
        }
        Behavioral::Sometime(x) => collect_labels(x, deep, out),
        Behavioral::Prefixed {
            label, msg, cont, ..
        } => {
            out.insert(label.clone());
            if deep {
                collect_message_labels(msg, out);
            }
            collect_labels(cont, deep, out);
        }
    }
}

fn collect_message_labels(m: &Message, out: &mut BTreeSet<Label>) {
    match m {
        Message::Beh(b) => collect_labels(b, true, out),
        Message::Sh(t) => {
            out.insert(t.label.clone());
            collect_labels(&t.carried, true, out);
        }
        Message::Role(_) => {}
    }
}

/// Independence of behaviors: disjoint label sets.
pub fn apart(b1: &Behavioral, b2: &Behavioral) -> bool {
    labels_of(b1).is_disjoint(&labels_of(b2))
}

pub fn well_formed(b: &Behavioral) -> bool {
    match b {
        Behavioral::End => true,
        Behavioral::Par(l, r) => apart(l, r) && well_formed(l) && well_formed(r),
        Behavioral::Sometime(x) => !has_sync_head(x) && well_formed(x),
        Behavioral::Prefixed { msg, cont, .. } => message_well_formed(msg) && well_formed(cont),
    }
}

pub fn message_well_formed(m: &Message) -> bool {
    match m {
        Message::Beh(b) => well_formed(b),
        Message::Sh(t) => well_formed(&t.carried),
        Message::Role(_) => true,
    }
}

fn has_sync_head(b: &Behavioral) -> bool {
    match b {
        Behavioral::End => false,
        Behavioral::Par(l, r) => has_sync_head(l) || has_sync_head(r),
        Behavioral::Sometime(x) => has_sync_head(x),
        Behavioral::Prefixed { pol, .. } => pol.is_sync(),
    }
}

/// `b1 <: b2`: `b2` is `b1` with some well-formed sub-behaviors deferred
/// under `dia`.
pub fn subtype(b1: &Behavioral, b2: &Behavioral) -> bool {
    sub(&normalize(b1), &normalize(b2))
}

fn sub(a: &Behavioral, b: &Behavioral) -> bool {
    if a == b {
        return true;
    }
    match b {
        Behavioral::End => false,
        Behavioral::Sometime(body) => {
            if let Behavioral::Sometime(inner) = a {
                if sub(inner, body) {
                    return true;
                }
            }
            sub(a, body) && well_formed(b)
        }
        Behavioral::Par(..) => {
            let targets = components(b);
            let sources = components(a);
            if sources.len() < targets.len() {
                return false;
            }
            let mut groups = vec![Vec::new(); targets.len()];
            assign_groups(&sources, &targets, 0, &mut groups)
        }
        Behavioral::Prefixed {
            pol,
            label,
            msg,
            cont,
        } => match a {
            Behavioral::Prefixed {
                pol: pol_a,
                label: label_a,
                msg: msg_a,
                cont: cont_a,
            } => pol == pol_a && label == label_a && msg == msg_a && sub(cont_a, cont),
            _ => false,
        },
    }
}

/// Distributes the source components over the target components so that
/// each group is a subtype of its target.
fn assign_groups<'a>(
    sources: &[&'a Behavioral],
    targets: &[&Behavioral],
    next: usize,
    groups: &mut Vec<Vec<&'a Behavioral>>,
) -> bool {
    if next == sources.len() {
        return groups
            .iter()
            .zip(targets)
            .all(|(g, t)| !g.is_empty() && sub(&par_of(g.iter().copied()), t));
    }
    let unfilled = groups.iter().filter(|g| g.is_empty()).count();
    if sources.len() - next < unfilled {
        return false;
    }
    for i in 0..targets.len() {
        groups[i].push(sources[next]);
        if assign_groups(sources, targets, next + 1, groups) {
            return true;
        }
        groups[i].pop();
    }
    false
}

/// No input or output prefixes anywhere: every prefix is a synchronization.
pub fn matched(b: &Behavioral) -> bool {
    match b {
        Behavioral::End => true,
        Behavioral::Par(l, r) => matched(l) && matched(r),
        Behavioral::Sometime(x) => matched(x),
        Behavioral::Prefixed { pol, msg, cont, .. } => {
            pol.is_sync()
                && match &**msg {
                    Message::Beh(m) => matched(m),
                    Message::Sh(t) => matched(&t.carried),
                    Message::Role(_) => true,
                }
                && matched(cont)
        }
    }
}

/// One-step reductions of `b`: a head synchronization reduces to its
/// continuation, also inside either side of a parallel composition.
pub fn type_steps(b: &Behavioral) -> Vec<Behavioral> {
    type_steps_labeled(b).into_iter().map(|(_, t)| t).collect()
}

/// As [`type_steps`], paired with the label consumed by each step.
pub fn type_steps_labeled(b: &Behavioral) -> Vec<(Label, Behavioral)> {
    let n = normalize(b);
    let mut out = Vec::new();
    match &n {
        Behavioral::Prefixed {
            pol: Polarity::Sync { .. },
            label,
            cont,
            ..
        } => out.push((label.clone(), (**cont).clone())),
        Behavioral::Par(..) => {
            let parts = components(&n);
            for (i, part) in parts.iter().enumerate() {
                for (label, stepped) in type_steps_labeled(part) {
                    let mut next: Vec<Behavioral> = parts.iter().map(|p| (*p).clone()).collect();
                    next[i] = stepped;
                    out.push((label, normalize(&Behavioral::par_all(next))));
                }
            }
        }
        _ => {}
    }
    out
}
