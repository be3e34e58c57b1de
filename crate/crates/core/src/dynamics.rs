//! Reduction semantics, authorization errors and state-space exploration.
//!
//! Processes are compared through a canonical form: restrictions are
//! pulled to the top (renaming apart), unused ones are dropped, and the
//! remaining sequential threads are sorted by a key that ignores the
//! spelling of bound and restricted names.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::surface::{print_shared_type, print_type};
use crate::syntax::{
    auth_subst, free_names, fresh_name, is_unauthorized_prefix, subst_name, Label, Name, Prefix,
    Process, RestrictionAnnotation, Role,
};
use crate::types::type_steps_labeled;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DynamicsError {
    #[error("step index {index} out of range ({available} enabled)")]
    StepOutOfRange { index: usize, available: usize },
    #[error("state budget of {limit} exceeded")]
    BudgetExceeded { limit: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CanonicalForm {
    /// Restricted names with their annotations, outermost first.
    pub restricted: Vec<(Name, Option<RestrictionAnnotation>)>,
    /// Sequential threads, each rooted at a prefix.
    pub threads: Vec<Process>,
}

impl CanonicalForm {
    pub fn restricted_names(&self) -> Vec<Name> {
        self.restricted.iter().map(|(n, _)| n.clone()).collect()
    }

    pub fn is_inactive(&self) -> bool {
        self.threads.is_empty()
    }

    /// The restrictions around a left-nested composition of the threads.
    pub fn to_process(&self) -> Process {
        let mut p = Process::par_all(self.threads.iter().cloned());
        for (name, ann) in self.restricted.iter().rev() {
            p = Process::restrict(name.clone(), ann.clone(), p);
        }
        p
    }

    /// Identity of the state up to renaming of bound and restricted names.
    pub fn key(&self) -> String {
        let index: HashMap<&Name, usize> = self
            .restricted
            .iter()
            .enumerate()
            .map(|(i, (n, _))| (n, i))
            .collect();
        let mut out = String::new();
        for (i, (_, ann)) in self.restricted.iter().enumerate() {
            out.push_str(&format!("ν#{i}"));
            push_annotation(&mut out, ann.as_ref());
            out.push(';');
        }
        for t in &self.threads {
            out.push('[');
            thread_key(t, &|n| index.get(n).map(|i| format!("#{i}")), &mut Vec::new(), &mut out);
            out.push(']');
        }
        out
    }
}

impl fmt::Display for CanonicalForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_process())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum StepKind {
    Comm,
    Auth,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum Payload {
    Name(Name),
    Role(Role),
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct StepLabel {
    pub kind: StepKind,
    pub channel: Name,
    pub label: Label,
    pub sender: Role,
    pub receiver: Role,
    pub payload: Option<Payload>,
}

impl fmt::Display for StepLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            StepKind::Comm => "comm",
            StepKind::Auth => "auth",
        };
        write!(
            f,
            "{kind} {}.{} {}->{}",
            self.channel, self.label, self.sender, self.receiver
        )?;
        match &self.payload {
            Some(Payload::Name(n)) => write!(f, " ({n})"),
            Some(Payload::Role(r)) => write!(f, " <{r}>"),
            None => Ok(()),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct StateSpace {
    pub states: Vec<CanonicalForm>,
    pub edges: Vec<(usize, StepLabel, usize)>,
    pub error_states: BTreeSet<usize>,
    pub stuck_states: BTreeSet<usize>,
    /// Breadth-first tree: the edge that first discovered each state.
    pub parent: Vec<Option<usize>>,
}

impl StateSpace {
    /// Step labels along the shortest path from the initial state.
    pub fn trace_to(&self, state: usize) -> Vec<StepLabel> {
        let mut trace = Vec::new();
        let mut at = state;
        while let Some(e) = self.parent[at] {
            let (from, label, _) = &self.edges[e];
            trace.push(label.clone());
            at = *from;
        }
        trace.reverse();
        trace
    }
}

pub fn canonicalize(p: &Process) -> CanonicalForm {
    let mut avoid = free_names(p);
    let mut restricted = Vec::new();
    let mut threads = Vec::new();
    gather(p.clone(), &mut avoid, &mut restricted, &mut threads);

    let used: BTreeSet<Name> = threads.iter().flat_map(free_names).collect();
    restricted.retain(|(n, _)| used.contains(n));

    let names: BTreeSet<&Name> = restricted.iter().map(|(n, _)| n).collect();
    let masked = |t: &Process| {
        let mut out = String::new();
        thread_key(
            t,
            &|n| names.contains(n).then(|| "#".to_string()),
            &mut Vec::new(),
            &mut out,
        );
        out
    };
    let mut keyed: Vec<(String, String, Process)> = threads
        .into_iter()
        .map(|t| (masked(&t), t.to_string(), t))
        .collect();
    keyed.sort();
    let threads: Vec<Process> = keyed.into_iter().map(|(_, _, t)| t).collect();

    let mut order: Vec<Name> = Vec::new();
    for t in &threads {
        for n in occurrence_order(t) {
            if names.contains(&n) && !order.contains(&n) {
                order.push(n);
            }
        }
    }
    let mut by_name: BTreeMap<Name, Option<RestrictionAnnotation>> = restricted.into_iter().collect();
    let restricted = order
        .into_iter()
        .map(|n| {
            let ann = by_name.remove(&n).expect("restricted name");
            (n, ann)
        })
        .collect();
    CanonicalForm {
        restricted,
        threads,
    }
}

fn gather(
    p: Process,
    avoid: &mut BTreeSet<Name>,
    restricted: &mut Vec<(Name, Option<RestrictionAnnotation>)>,
    threads: &mut Vec<Process>,
) {
    match p {
        Process::Nil => {}
        Process::Par(l, r) => {
            gather(*l, avoid, restricted, threads);
            gather(*r, avoid, restricted, threads);
        }
        Process::Restrict {
            name,
            annotation,
            body,
        } => {
            let fresh = fresh_name(&name, avoid);
            avoid.insert(fresh.clone());
            let body = if fresh == name {
                *body
            } else {
                subst_name(&body, &fresh, &name)
            };
            restricted.push((fresh, annotation));
            gather(body, avoid, restricted, threads);
        }
        act @ Process::Act { .. } => threads.push(act),
    }
}

/// Free names of `t` in order of first occurrence.
fn occurrence_order(t: &Process) -> Vec<Name> {
    fn walk(p: &Process, bound: &mut Vec<Name>, out: &mut Vec<Name>) {
        let mut note = |n: &Name, bound: &Vec<Name>| {
            if !bound.contains(n) && !out.contains(n) {
                out.push(n.clone());
            }
        };
        match p {
            Process::Nil => {}
            Process::Par(l, r) => {
                walk(l, bound, out);
                walk(r, bound, out);
            }
            Process::Restrict { name, body, .. } => {
                bound.push(name.clone());
                walk(body, bound, out);
                bound.pop();
            }
            Process::Act { prefix, cont } => {
                note(prefix.subject(), bound);
                if let Prefix::SendName {
                    object: Some(o), ..
                } = prefix
                {
                    note(o, bound);
                }
                let pushed = prefix.binder().map(|b| bound.push(b.clone())).is_some();
                walk(cont, bound, out);
                if pushed {
                    bound.pop();
                }
            }
        }
    }
    let mut out = Vec::new();
    walk(t, &mut Vec::new(), &mut out);
    out
}

fn push_annotation(out: &mut String, ann: Option<&RestrictionAnnotation>) {
    match ann {
        Some(RestrictionAnnotation::Linear(b)) => {
            out.push_str(":lin ");
            out.push_str(&print_type(b));
        }
        Some(RestrictionAnnotation::Shared(t)) => {
            out.push_str(":sh ");
            out.push_str(&print_shared_type(t));
        }
        None => {}
    }
}

/// Text of `p` in which bound names become binder depths and names picked
/// out by `outer` are replaced by their placeholder.
fn thread_key(
    p: &Process,
    outer: &dyn Fn(&Name) -> Option<String>,
    bound: &mut Vec<Name>,
    out: &mut String,
) {
    let render = |n: &Name, bound: &Vec<Name>| match bound.iter().rposition(|b| b == n) {
        Some(i) => format!("${i}"),
        None => outer(n).unwrap_or_else(|| n.to_string()),
    };
    match p {
        Process::Nil => out.push('0'),
        Process::Par(l, r) => {
            out.push('(');
            thread_key(l, outer, bound, out);
            out.push('|');
            thread_key(r, outer, bound, out);
            out.push(')');
        }
        Process::Restrict {
            name,
            annotation,
            body,
        } => {
            out.push('ν');
            push_annotation(out, annotation.as_ref());
            out.push('.');
            bound.push(name.clone());
            thread_key(body, outer, bound, out);
            bound.pop();
        }
        Process::Act { prefix, cont } => {
            let subject = render(prefix.subject(), bound);
            let head = match prefix {
                Prefix::SendName { who, label, object, .. } => format!(
                    "{subject}!{who}{label}({})",
                    object.as_ref().map(|o| render(o, bound)).unwrap_or_default()
                ),
                Prefix::RecvName { who, label, binder, .. } => format!(
                    "{subject}?{who}{label}({})",
                    if binder.is_some() { "_" } else { "" }
                ),
                Prefix::SendAuth { who, label, object, .. } => {
                    format!("{subject}!{who}{label}<{object}>")
                }
                Prefix::RecvAuth { who, label, object, .. } => {
                    format!("{subject}?{who}{label}<{object}>")
                }
            };
            out.push_str(&head);
            out.push('.');
            match prefix.binder() {
                Some(b) => {
                    bound.push(b.clone());
                    thread_key(cont, outer, bound, out);
                    bound.pop();
                }
                None => thread_key(cont, outer, bound, out),
            }
        }
    }
}

/// Structural congruence, decided on canonical forms. Restriction
/// annotations only matter to the checker and are ignored here.
pub fn struct_equiv(p: &Process, q: &Process) -> bool {
    canonicalize(&unannotated(p)).key() == canonicalize(&unannotated(q)).key()
}

fn unannotated(p: &Process) -> Process {
    match p {
        Process::Nil => Process::Nil,
        Process::Par(l, r) => Process::par(unannotated(l), unannotated(r)),
        Process::Restrict { name, body, .. } => Process::restrict(name.clone(), None, unannotated(body)),
        Process::Act { prefix, cont } => Process::act(prefix.clone(), unannotated(cont)),
    }
}

pub fn enabled_steps(p: &Process) -> Vec<(StepLabel, Process)> {
    enabled_steps_of(&canonicalize(p))
        .into_iter()
        .map(|(label, next)| (label, next.to_process()))
        .collect()
}

/// Sort key of a reduction: channel, label, sender and receiver thread.
type StepKey = (Name, Label, usize, usize);

/// Enabled reductions of a canonical form, each with its successor.
pub fn enabled_steps_of(cf: &CanonicalForm) -> Vec<(StepLabel, CanonicalForm)> {
    let mut found: Vec<(StepKey, StepLabel, CanonicalForm)> = Vec::new();
    for i in 0..cf.threads.len() {
        for j in (i + 1)..cf.threads.len() {
            for (s, r) in [(i, j), (j, i)] {
                let Some((label, sent, received)) = redex(&cf.threads[s], &cf.threads[r]) else {
                    continue;
                };
                let mut next = cf.clone();
                next.threads[s] = sent;
                next.threads[r] = received;
                advance_annotation(&mut next, &label);
                found.push((
                    (label.channel.clone(), label.label.clone(), i, j),
                    label,
                    next,
                ));
            }
        }
    }
    found.sort_by(|a, b| a.0.cmp(&b.0));
    found.into_iter().map(|(_, l, n)| (l, n)).collect()
}

/// Fires `sender` against `receiver` if they form a redex.
fn redex(sender: &Process, receiver: &Process) -> Option<(StepLabel, Process, Process)> {
    let (
        Process::Act {
            prefix: out,
            cont: out_cont,
        },
        Process::Act {
            prefix: inp,
            cont: in_cont,
        },
    ) = (sender, receiver)
    else {
        return None;
    };
    if out.subject() != inp.subject()
        || out.label() != inp.label()
        || !out.who().is_authorized()
        || !inp.who().is_authorized()
    {
        return None;
    }
    let channel = out.subject().clone();
    let (kind, payload, received) = match (out, inp) {
        (Prefix::SendName { object, .. }, Prefix::RecvName { binder, .. }) => {
            match (object, binder) {
                (None, None) => (StepKind::Comm, None, (**in_cont).clone()),
                (Some(o), Some(x)) => (
                    StepKind::Comm,
                    Some(Payload::Name(o.clone())),
                    subst_name(in_cont, o, x),
                ),
                _ => return None,
            }
        }
        (Prefix::SendAuth { object, .. }, Prefix::RecvAuth { object: wanted, .. }) => {
            if !object.is_authorized() || &object.role != wanted {
                return None;
            }
            (
                StepKind::Auth,
                Some(Payload::Role(wanted.clone())),
                auth_subst(in_cont, &channel, wanted),
            )
        }
        _ => return None,
    };
    let label = StepLabel {
        kind,
        channel,
        label: out.label().clone(),
        sender: out.who().role.clone(),
        receiver: inp.who().role.clone(),
        payload,
    };
    Some((label, (**out_cont).clone(), received))
}

/// A step on a restricted linear channel consumes the matching exchange
/// of its annotated protocol.
fn advance_annotation(cf: &mut CanonicalForm, label: &StepLabel) {
    for (name, ann) in cf.restricted.iter_mut() {
        if name != &label.channel {
            continue;
        }
        if let Some(RestrictionAnnotation::Linear(b)) = ann {
            if let Some((_, next)) = type_steps_labeled(b)
                .into_iter()
                .find(|(l, _)| l == &label.label)
            {
                *b = next;
            }
        }
    }
}

pub fn step(p: &Process, index: usize) -> Result<Process, DynamicsError> {
    let mut steps = enabled_steps(p);
    if index >= steps.len() {
        return Err(DynamicsError::StepOutOfRange {
            index,
            available: steps.len(),
        });
    }
    Ok(steps.swap_remove(index).1)
}

fn has_active_unauthorized(cf: &CanonicalForm) -> bool {
    cf.threads.iter().any(|t| match t {
        Process::Act { prefix, .. } => is_unauthorized_prefix(prefix),
        _ => false,
    })
}

pub fn is_auth_error(p: &Process) -> bool {
    has_active_unauthorized(&canonicalize(p))
}

/// Breadth-first closure of `p` under reduction.
pub fn explore(p: &Process, max_states: usize) -> Result<StateSpace, DynamicsError> {
    let mut space = StateSpace::default();
    let mut index: HashMap<String, usize> = HashMap::new();
    let initial = canonicalize(p);
    index.insert(initial.key(), 0);
    space.states.push(initial);
    space.parent.push(None);
    if max_states == 0 {
        return Err(DynamicsError::BudgetExceeded { limit: max_states });
    }
    let mut queue = VecDeque::from([0usize]);
    while let Some(at) = queue.pop_front() {
        let current = space.states[at].clone();
        let successors = enabled_steps_of(&current);
        if has_active_unauthorized(&current) {
            space.error_states.insert(at);
        } else if successors.is_empty() && !current.threads.is_empty() {
            space.stuck_states.insert(at);
        }
        for (label, next) in successors {
            let next = canonicalize(&next.to_process());
            let key = next.key();
            let target = match index.get(&key) {
                Some(&t) => t,
                None => {
                    if space.states.len() >= max_states {
                        return Err(DynamicsError::BudgetExceeded { limit: max_states });
                    }
                    let t = space.states.len();
                    index.insert(key, t);
                    space.states.push(next);
                    space.parent.push(Some(space.edges.len()));
                    queue.push_back(t);
                    t
                }
            };
            space.edges.push((at, label, target));
        }
    }
    Ok(space)
}

/// One shortest witness per reachable authorization error.
pub fn reachable_errors(
    p: &Process,
    max_states: usize,
) -> Result<Vec<(Vec<StepLabel>, CanonicalForm)>, DynamicsError> {
    let space = explore(p, max_states)?;
    Ok(space
        .error_states
        .iter()
        .map(|&s| (space.trace_to(s), space.states[s].clone()))
        .collect())
}
