//! The typing judgment `Δ; Γ ⊢_Σ P`.
//!
//! `Σ` is computed bottom-up from the process; the environments are
//! found by search. Rule choice is syntax-directed: restrictions pick
//! `T-new`/`T-snew` from their annotation, prefixes pick a rule from the
//! kind of their subject (linear or shared) and of the carried message.
//! The search backtracks over the slice of the subject channel a prefix
//! consumes, over the slices carved out for delegated channels, and over
//! the splits of `Δ` at parallel compositions.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::ser::{SerializeMap, SerializeSeq};
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::env::{funauth, AuthSet, LinearEnv, SharedEnv};
use crate::split::Splitter;
use crate::syntax::{
    free_names, fresh_name, subst_name, Label, Name, Prefix, Process, RestrictionAnnotation,
};
use crate::types::{
    apart, components, matched, normalize, par_of, spine_labels, subtype, well_formed,
    Behavioral, Message, Polarity, SharedType,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Rule {
    TEnd,
    TSnew,
    TNew,
    TProcPar,
    TroleIn,
    TroleOut,
    TIn,
    TOut,
    TLsin,
    TLsout,
    TSin,
    TSout,
}

impl Rule {
    pub fn name(self) -> &'static str {
        match self {
            Rule::TEnd => "T-end",
            Rule::TSnew => "T-snew",
            Rule::TNew => "T-new",
            Rule::TProcPar => "TProc-par",
            Rule::TroleIn => "Trole-in",
            Rule::TroleOut => "Trole-out",
            Rule::TIn => "T-in",
            Rule::TOut => "T-out",
            Rule::TLsin => "T-lsin",
            Rule::TLsout => "T-lsout",
            Rule::TSin => "T-sin",
            Rule::TSout => "T-sout",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for Rule {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Judgment {
    pub linear: LinearEnv,
    pub shared: SharedEnv,
    pub sigma: AuthSet,
    pub subject: Process,
}

impl Serialize for Judgment {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        struct Env<'a, V: fmt::Display>(&'a std::collections::BTreeMap<Name, V>);
        impl<V: fmt::Display> Serialize for Env<'_, V> {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                let mut m = s.serialize_map(Some(self.0.len()))?;
                for (k, v) in self.0 {
                    m.serialize_entry(k.as_str(), &v.to_string())?;
                }
                m.end()
            }
        }
        struct Pairs<'a>(&'a AuthSet);
        impl Serialize for Pairs<'_> {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                let mut seq = s.serialize_seq(Some(self.0.len()))?;
                for (a, r) in self.0.iter() {
                    seq.serialize_element(&[a.as_str(), r.as_str()])?;
                }
                seq.end()
            }
        }
        let mut m = s.serialize_map(Some(4))?;
        m.serialize_entry("linear", &Env(&self.linear))?;
        m.serialize_entry("shared", &Env(&self.shared))?;
        m.serialize_entry("sigma", &Pairs(&self.sigma))?;
        m.serialize_entry("subject", &self.subject.to_string())?;
        m.end()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Derivation {
    pub rule: Rule,
    pub conclusion: Judgment,
    pub premises: Vec<Derivation>,
    pub side_conditions: Vec<String>,
}

impl Derivation {
    /// Every node of the tree, root first.
    pub fn nodes(&self) -> Vec<&Derivation> {
        let mut out = vec![self];
        let mut i = 0;
        while i < out.len() {
            let node = out[i];
            out.extend(node.premises.iter());
            i += 1;
        }
        out
    }

    pub fn render(&self) -> String {
        fn walk(d: &Derivation, depth: usize, out: &mut String) {
            let c = &d.conclusion;
            let linear: Vec<String> = c.linear.iter().map(|(a, b)| format!("{a}:{b}")).collect();
            let shared: Vec<String> = c.shared.iter().map(|(a, t)| format!("{a}:{t}")).collect();
            out.push_str(&format!(
                "{}[{}] {}; {} ⊢_{} {}\n",
                "  ".repeat(depth),
                d.rule,
                linear.join(", "),
                shared.join(", "),
                c.sigma,
                c.subject
            ));
            for s in &d.side_conditions {
                out.push_str(&format!("{}  where {s}\n", "  ".repeat(depth)));
            }
            for p in &d.premises {
                walk(p, depth + 1, out);
            }
        }
        let mut out = String::new();
        walk(self, 0, &mut out);
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum TypeErrorReason {
    NoSplit,
    SubtypeFail,
    UnmatchedRestriction,
    SharedUnauthorized,
    BoundChannelInSigma,
    ResidualSigma,
    UnknownChannel,
    LabelMismatch,
    MessageMismatch,
    ResidualUsage,
    MissingAnnotation,
    IllFormedType,
}

/// How one linear entry is divided between the two sides of a `|`;
/// `None` means the side does not receive the channel.
type SliceChoice = (Option<Behavioral>, Option<Behavioral>);

/// Address of a subterm: 0 selects the left branch, restriction body or
/// continuation; 1 selects the right branch.
pub type ProcessPath = Vec<usize>;

#[derive(Clone, Debug, PartialEq, Eq, Error, Serialize)]
#[error("{reason:?} at {location:?}: {detail}")]
pub struct TypeError {
    pub location: ProcessPath,
    pub reason: TypeErrorReason,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Checked {
    pub sigma: AuthSet,
    pub derivation: Derivation,
}

/// Searches a derivation of `Δ; Γ ⊢_Σ p` and returns the least `Σ` found.
/// On failure, reports the failure of the branch that got deepest into `p`.
pub fn check_process(
    linear: &LinearEnv,
    shared: &SharedEnv,
    p: &Process,
) -> Result<Checked, Vec<TypeError>> {
    let mut checker = Checker::default();
    let linear = linear.iter().map(|(a, b)| (a.clone(), normalize(b))).collect();
    let shared = shared.iter().map(|(a, t)| (a.clone(), t.normalize())).collect();
    match checker.judge(&linear, &shared, p, &mut Vec::new()) {
        Ok((sigma, derivation)) => Ok(Checked { sigma, derivation }),
        Err(e) => Err(vec![e]),
    }
}

/// `Δ; Γ ⊢_∅ p`.
pub fn well_typed(linear: &LinearEnv, shared: &SharedEnv, p: &Process) -> bool {
    matches!(check_process(linear, shared, p), Ok(c) if c.sigma.is_empty())
}

type Outcome = Result<(AuthSet, Derivation), TypeError>;

#[derive(Default)]
struct Checker {
    splitter: Splitter,
    memo: HashMap<(LinearEnv, SharedEnv, Process), Outcome>,
}

fn fail(path: &[usize], reason: TypeErrorReason, detail: impl Into<String>) -> TypeError {
    TypeError {
        location: path.to_vec(),
        reason,
        detail: detail.into(),
    }
}

/// Keeps the failure that reached deepest into the process.
fn deeper(best: Option<TypeError>, e: TypeError) -> Option<TypeError> {
    match best {
        Some(b) if b.location.len() >= e.location.len() => Some(b),
        _ => Some(e),
    }
}

/// Keeps the smaller authorization set.
fn better(best: Option<(AuthSet, Derivation)>, found: (AuthSet, Derivation)) -> Option<(AuthSet, Derivation)> {
    match best {
        Some(b) if (b.0.len(), &b.0) <= (found.0.len(), &found.0) => Some(b),
        _ => Some(found),
    }
}

struct Focus {
    rest: Behavioral,
    msg: Message,
    cont: Behavioral,
    slice: Behavioral,
}

/// Ways of exposing a prefix `pol label(M).C` in the normalized type `b`,
/// leaving `rest` for the other uses of the channel.
fn focus(b: &Behavioral, pol: &Polarity, label: &Label) -> Vec<Focus> {
    match b {
        Behavioral::Prefixed {
            pol: p,
            label: l,
            msg,
            cont,
        } if p == pol && l == label => vec![Focus {
            rest: Behavioral::End,
            msg: (**msg).clone(),
            cont: (**cont).clone(),
            slice: b.clone(),
        }],
        Behavioral::Sometime(body) => focus(body, pol, label)
            .into_iter()
            .map(|f| Focus {
                rest: normalize(&Behavioral::sometime(f.rest)),
                slice: normalize(&Behavioral::sometime(f.slice)),
                ..f
            })
            .collect(),
        Behavioral::Par(..) => {
            let parts = components(b);
            let mut out = Vec::new();
            for (i, part) in parts.iter().enumerate() {
                for f in focus(part, pol, label) {
                    let mut others: Vec<&Behavioral> =
                        parts.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, p)| *p).collect();
                    others.push(&f.rest);
                    out.push(Focus {
                        rest: par_of(others),
                        ..f
                    });
                }
            }
            out
        }
        _ => Vec::new(),
    }
}

/// Labels of prefixes whose subject is the free name `a`.
fn subject_labels(p: &Process, a: &Name) -> BTreeSet<Label> {
    fn walk(p: &Process, a: &Name, out: &mut BTreeSet<Label>) {
        match p {
            Process::Nil => {}
            Process::Par(l, r) => {
                walk(l, a, out);
                walk(r, a, out);
            }
            Process::Restrict { name, body, .. } => {
                if name != a {
                    walk(body, a, out);
                }
            }
            Process::Act { prefix, cont } => {
                if prefix.subject() == a {
                    out.insert(prefix.label().clone());
                }
                if prefix.binder() != Some(a) {
                    walk(cont, a, out);
                }
            }
        }
    }
    let mut out = BTreeSet::new();
    walk(p, a, &mut out);
    out
}

/// Whether the free name `a` is ever sent as an object.
fn delegates(p: &Process, a: &Name) -> bool {
    match p {
        Process::Nil => false,
        Process::Par(l, r) => delegates(l, a) || delegates(r, a),
        Process::Restrict { name, body, .. } => name != a && delegates(body, a),
        Process::Act { prefix, cont } => {
            matches!(prefix, Prefix::SendName { object: Some(o), .. } if o == a)
                || (prefix.binder() != Some(a) && delegates(cont, a))
        }
    }
}

fn env_text(d: &LinearEnv) -> String {
    let parts: Vec<String> = d.iter().map(|(a, b)| format!("{a}:{b}")).collect();
    format!("{{{}}}", parts.join(", "))
}

impl Checker {
    fn judge(
        &mut self,
        linear: &LinearEnv,
        shared: &SharedEnv,
        p: &Process,
        path: &mut Vec<usize>,
    ) -> Outcome {
        let key = (linear.clone(), shared.clone(), p.clone());
        if let Some(hit) = self.memo.get(&key) {
            return hit.clone().map_err(|mut e| {
                let mut location = path.clone();
                location.append(&mut e.location);
                e.location = location;
                e
            });
        }
        let out = self.judge_uncached(linear, shared, p, path);
        let relative = out.clone().map_err(|mut e| {
            e.location.drain(..path.len());
            e
        });
        self.memo.insert(key, relative);
        out
    }

    fn conclude(
        rule: Rule,
        linear: &LinearEnv,
        shared: &SharedEnv,
        sigma: AuthSet,
        p: &Process,
        premises: Vec<Derivation>,
        side_conditions: Vec<String>,
    ) -> (AuthSet, Derivation) {
        let derivation = Derivation {
            rule,
            conclusion: Judgment {
                linear: linear.clone(),
                shared: shared.clone(),
                sigma: sigma.clone(),
                subject: p.clone(),
            },
            premises,
            side_conditions,
        };
        (sigma, derivation)
    }

    fn judge_uncached(
        &mut self,
        linear: &LinearEnv,
        shared: &SharedEnv,
        p: &Process,
        path: &mut Vec<usize>,
    ) -> Outcome {
        use TypeErrorReason::*;
        match p {
            Process::Nil => {
                if let Some((a, b)) = linear.iter().find(|(_, b)| !b.is_end()) {
                    return Err(fail(
                        path,
                        ResidualUsage,
                        format!("channel {a} still has to perform {b}"),
                    ));
                }
                Ok(Self::conclude(
                    Rule::TEnd,
                    linear,
                    shared,
                    AuthSet::new(),
                    p,
                    vec![],
                    vec![],
                ))
            }
            Process::Par(l, r) => self.judge_par(linear, shared, p, l, r, path),
            Process::Restrict {
                name,
                annotation,
                body,
            } => {
                let (name, body) = self.rename_apart(name, body, linear, shared);
                path.push(0);
                let result = match annotation {
                    None => {
                        if free_names(&body).contains(&name) {
                            path.pop();
                            return Err(fail(
                                path,
                                MissingAnnotation,
                                format!("restriction of {name} needs a `lin` or `sh` annotation"),
                            ));
                        }
                        self.judge(linear, shared, &body, path).map(|(sigma, d)| {
                            Self::conclude(Rule::TNew, linear, shared, sigma, p, vec![d], vec![
                                format!("{name}:end unused"),
                            ])
                        })
                    }
                    Some(RestrictionAnnotation::Linear(b)) => {
                        let b = normalize(b);
                        if !well_formed(&b) {
                            path.pop();
                            return Err(fail(path, IllFormedType, format!("{b} is not well-formed")));
                        }
                        if !matched(&b) {
                            path.pop();
                            return Err(fail(
                                path,
                                UnmatchedRestriction,
                                format!("{b} has unmatched input or output prefixes"),
                            ));
                        }
                        let mut inner = linear.clone();
                        inner.insert(name.clone(), b.clone());
                        match self.judge(&inner, shared, &body, path) {
                            Ok((sigma, d)) => {
                                if sigma.channels().contains(&name) {
                                    Err(fail(
                                        &path[..path.len() - 1],
                                        BoundChannelInSigma,
                                        format!("{name} is restricted but Σ = {sigma} uses it"),
                                    ))
                                } else {
                                    Ok(Self::conclude(Rule::TNew, linear, shared, sigma, p, vec![d], vec![
                                        format!("matched({b})"),
                                        format!("{name} ∉ channels(Σ)"),
                                    ]))
                                }
                            }
                            Err(e) => Err(e),
                        }
                    }
                    Some(RestrictionAnnotation::Shared(t)) => {
                        let t = t.normalize();
                        if !well_formed(&t.carried) {
                            path.pop();
                            return Err(fail(path, IllFormedType, format!("{t} is not well-formed")));
                        }
                        let mut inner = shared.clone();
                        inner.insert(name.clone(), t);
                        self.judge(linear, &inner, &body, path).map(|(sigma, d)| {
                            Self::conclude(Rule::TSnew, linear, shared, sigma, p, vec![d], vec![])
                        })
                    }
                };
                path.pop();
                result
            }
            Process::Act { prefix, cont } => self.judge_prefix(linear, shared, p, prefix, cont, path),
        }
    }

    /// Renames binder `name` over `body` when it clashes with an
    /// environment entry.
    fn rename_apart(
        &self,
        name: &Name,
        body: &Process,
        linear: &LinearEnv,
        shared: &SharedEnv,
    ) -> (Name, Process) {
        if !linear.contains_key(name) && !shared.contains_key(name) {
            return (name.clone(), body.clone());
        }
        let mut avoid: BTreeSet<Name> = linear.keys().chain(shared.keys()).cloned().collect();
        avoid.extend(free_names(body));
        let fresh = fresh_name(name, &avoid);
        let body = subst_name(body, &fresh, name);
        (fresh, body)
    }

    fn judge_par(
        &mut self,
        linear: &LinearEnv,
        shared: &SharedEnv,
        p: &Process,
        l: &Process,
        r: &Process,
        path: &mut Vec<usize>,
    ) -> Outcome {
        let free_l = free_names(l);
        let free_r = free_names(r);
        let mut options: Vec<(Name, Vec<SliceChoice>)> = Vec::new();
        for (a, b) in linear {
            let opts = match (free_l.contains(a), free_r.contains(a)) {
                (false, true) => vec![(None, Some(b.clone()))],
                (true, true) => {
                    let direct_l = subject_labels(l, a);
                    let direct_r = subject_labels(r, a);
                    let bound_l = (!delegates(l, a)).then_some(&direct_l);
                    let bound_r = (!delegates(r, a)).then_some(&direct_r);
                    let all = match self.splitter.splits(b) {
                        Ok(all) => all,
                        Err(e) => return Err(fail(path, TypeErrorReason::NoSplit, e.to_string())),
                    };
                    let fits = |x: &Behavioral, direct: &BTreeSet<Label>, bound: Option<&BTreeSet<Label>>| {
                        let spine = spine_labels(x);
                        direct.is_subset(&spine) && bound.is_none_or(|u| spine.is_subset(u))
                    };
                    all.iter()
                        .filter(|(x, y)| fits(x, &direct_l, bound_l) && fits(y, &direct_r, bound_r))
                        .map(|(x, y)| (Some(x.clone()), Some(y.clone())))
                        .collect()
                }
                _ => vec![(Some(b.clone()), None)],
            };
            if opts.is_empty() {
                return Err(fail(
                    path,
                    TypeErrorReason::NoSplit,
                    format!("no split of {a}:{b} fits both sides of the composition"),
                ));
            }
            options.push((a.clone(), opts));
        }

        let mut best = None;
        let mut failure = None;
        let mut cursor = vec![0usize; options.len()];
        'search: loop {
            let mut left = LinearEnv::new();
            let mut right = LinearEnv::new();
            for ((a, opts), &i) in options.iter().zip(&cursor) {
                if let Some(x) = &opts[i].0 {
                    left.insert(a.clone(), x.clone());
                }
                if let Some(y) = &opts[i].1 {
                    right.insert(a.clone(), y.clone());
                }
            }
            path.push(0);
            let lres = self.judge(&left, shared, l, path);
            path.pop();
            match lres {
                Err(e) => failure = deeper(failure, e),
                Ok((sl, dl)) => {
                    path.push(1);
                    let rres = self.judge(&right, shared, r, path);
                    path.pop();
                    match rres {
                        Err(e) => failure = deeper(failure, e),
                        Ok((sr, dr)) => {
                            let sigma = sl.union(&sr);
                            let found = Self::conclude(
                                Rule::TProcPar,
                                linear,
                                shared,
                                sigma,
                                p,
                                vec![dl, dr],
                                vec![format!("Δ = {} ∘ {}", env_text(&left), env_text(&right))],
                            );
                            best = better(best, found);
                            if best.as_ref().is_some_and(|b| b.0.is_empty()) {
                                break 'search;
                            }
                        }
                    }
                }
            }
            for k in 0..cursor.len() {
                cursor[k] += 1;
                if cursor[k] < options[k].1.len() {
                    continue 'search;
                }
                cursor[k] = 0;
            }
            break;
        }
        best.ok_or_else(|| {
            failure.unwrap_or_else(|| fail(path, TypeErrorReason::NoSplit, "no split of Δ"))
        })
    }

    fn judge_prefix(
        &mut self,
        linear: &LinearEnv,
        shared: &SharedEnv,
        p: &Process,
        prefix: &Prefix,
        cont: &Process,
        path: &mut Vec<usize>,
    ) -> Outcome {
        let a = prefix.subject();
        if let Some(b) = linear.get(a) {
            let b = b.clone();
            self.judge_linear_prefix(linear, shared, p, prefix, cont, &b, path)
        } else if let Some(t) = shared.get(a) {
            let t = t.clone();
            self.judge_shared_prefix(linear, shared, p, prefix, cont, &t, path)
        } else {
            Err(fail(
                path,
                TypeErrorReason::UnknownChannel,
                format!("{a} is not in Δ or Γ"),
            ))
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn judge_shared_prefix(
        &mut self,
        linear: &LinearEnv,
        shared: &SharedEnv,
        p: &Process,
        prefix: &Prefix,
        cont: &Process,
        t: &SharedType,
        path: &mut Vec<usize>,
    ) -> Outcome {
        use TypeErrorReason::*;
        let a = prefix.subject();
        if !prefix.who().is_authorized() {
            return Err(fail(
                path,
                SharedUnauthorized,
                format!("shared channel {a} used under {}", prefix.who()),
            ));
        }
        if prefix.label() != &t.label {
            return Err(fail(
                path,
                LabelMismatch,
                format!("{a} carries {} but the prefix uses {}", t.label, prefix.label()),
            ));
        }
        match prefix {
            Prefix::RecvName { binder, .. } => {
                let Some(x) = binder else {
                    if !t.carried.is_end() {
                        return Err(fail(path, MessageMismatch, format!("{a} delegates {}", t.carried)));
                    }
                    return self.continue_with(Rule::TSin, linear, shared, p, linear.clone(), shared, cont, AuthSet::new(), vec![], path);
                };
                let (x, cont) = self.rename_apart_binder(x, cont, linear, shared);
                let mut inner = linear.clone();
                inner.insert(x.clone(), t.carried.clone());
                path.push(0);
                let res = self.judge(&inner, shared, &cont, path);
                path.pop();
                let (sigma, d) = res?;
                if sigma.channels().contains(&x) {
                    return Err(fail(
                        path,
                        BoundChannelInSigma,
                        format!("received channel {x} appears in Σ = {sigma}"),
                    ));
                }
                Ok(Self::conclude(Rule::TSin, linear, shared, sigma, p, vec![d], vec![
                    format!("{x} ∉ channels(Σ)"),
                ]))
            }
            Prefix::SendName { object, .. } => {
                let Some(o) = object else {
                    if !t.carried.is_end() {
                        return Err(fail(path, MessageMismatch, format!("{a} delegates {}", t.carried)));
                    }
                    return self.continue_with(Rule::TSout, linear, shared, p, linear.clone(), shared, cont, AuthSet::new(), vec![], path);
                };
                self.delegate(Rule::TSout, linear, shared, p, linear.clone(), o, &t.carried, cont, AuthSet::new(), vec![], path)
            }
            _ => Err(fail(
                path,
                MessageMismatch,
                format!("shared channel {a} cannot carry roles"),
            )),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn judge_linear_prefix(
        &mut self,
        linear: &LinearEnv,
        shared: &SharedEnv,
        p: &Process,
        prefix: &Prefix,
        cont: &Process,
        ty: &Behavioral,
        path: &mut Vec<usize>,
    ) -> Outcome {
        use TypeErrorReason::*;
        let a = prefix.subject();
        let rho = prefix.who();
        let pol = if prefix.is_output() {
            Polarity::Out(rho.role.clone())
        } else {
            Polarity::In(rho.role.clone())
        };
        let label = prefix.label();
        let foci = focus(ty, &pol, label);
        if foci.is_empty() {
            let reason = if spine_labels(ty).contains(label) {
                SubtypeFail
            } else {
                LabelMismatch
            };
            return Err(fail(
                path,
                reason,
                format!("no slice of {a}:{ty} starts with {} {label}", polarity_text(&pol)),
            ));
        }

        let mut best = None;
        let mut failure = None;
        for f in foci {
            let residual = normalize(&Behavioral::par(f.rest.clone(), f.cont.clone()));
            if !apart(&f.rest, &f.cont) || !well_formed(&residual) {
                failure = deeper(failure, fail(
                    path,
                    IllFormedType,
                    format!("{} and {} overlap", f.rest, f.cont),
                ));
                continue;
            }
            let prefixed = Behavioral::prefixed(pol.clone(), label.clone(), f.msg.clone(), f.cont.clone());
            debug_assert!(subtype(&prefixed, &f.slice));
            let mut after = linear.clone();
            after.insert(a.clone(), residual);
            let mut side = vec![format!("{prefixed} <: {}", f.slice)];
            let base = funauth(a, rho);
            let res = match (prefix, &f.msg) {
                (Prefix::RecvAuth { object, .. }, Message::Role(s)) if s == object => {
                    self.continue_with(Rule::TroleIn, linear, shared, p, after, shared, cont, AuthSet::new(), side, path)
                        .map(|(sigma, d)| {
                            let mut sigma = sigma;
                            sigma.remove(a, s);
                            let sigma = sigma.union(&base);
                            let mut d = d;
                            d.conclusion.sigma = sigma.clone();
                            (sigma, d)
                        })
                }
                (Prefix::SendAuth { object, .. }, Message::Role(s)) if &object.role == s => {
                    let extra = base.union(&funauth(a, object));
                    self.continue_with(Rule::TroleOut, linear, shared, p, after, shared, cont, extra, side, path)
                }
                (Prefix::RecvName { binder: None, .. }, Message::Beh(m)) if m.is_end() => {
                    self.continue_with(Rule::TIn, linear, shared, p, after, shared, cont, base, side, path)
                }
                (Prefix::SendName { object: None, .. }, Message::Beh(m)) if m.is_end() => {
                    self.continue_with(Rule::TOut, linear, shared, p, after, shared, cont, base, side, path)
                }
                (Prefix::RecvName { binder: Some(x), .. }, Message::Beh(m)) => {
                    self.receive(Rule::TIn, linear, shared, p, after, x, m, None, cont, base, side, path)
                }
                (Prefix::RecvName { binder: Some(x), .. }, Message::Sh(t)) => {
                    self.receive(Rule::TLsin, linear, shared, p, after, x, &Behavioral::End, Some(t), cont, base, side, path)
                }
                (Prefix::SendName { object: Some(o), .. }, Message::Beh(m)) => {
                    self.delegate(Rule::TOut, linear, shared, p, after, o, m, cont, base, side, path)
                }
                (Prefix::SendName { object: Some(o), .. }, Message::Sh(t)) => {
                    if shared.get(o) != Some(t) {
                        Err(fail(path, MessageMismatch, format!("{o} is not a shared channel of type {t}")))
                    } else {
                        side.push(format!("{o}:{t} ∈ Γ"));
                        self.continue_with(Rule::TLsout, linear, shared, p, after, shared, cont, base, side, path)
                    }
                }
                (_, msg) => Err(fail(
                    path,
                    MessageMismatch,
                    format!("{prefix} does not carry {}", message_text(msg)),
                )),
            };
            match res {
                Ok(found) => {
                    best = better(best, found);
                    if best.as_ref().is_some_and(|b| b.0.is_empty()) {
                        break;
                    }
                }
                Err(e) => failure = deeper(failure, e),
            }
        }
        best.ok_or_else(|| failure.expect("at least one focus was tried"))
    }

    /// Checks the continuation under `after`, adding `extra` to its `Σ`.
    #[allow(clippy::too_many_arguments)]
    fn continue_with(
        &mut self,
        rule: Rule,
        linear: &LinearEnv,
        shared: &SharedEnv,
        p: &Process,
        after: LinearEnv,
        after_shared: &SharedEnv,
        cont: &Process,
        extra: AuthSet,
        side: Vec<String>,
        path: &mut Vec<usize>,
    ) -> Outcome {
        path.push(0);
        let res = self.judge(&after, after_shared, cont, path);
        path.pop();
        let (sigma, d) = res?;
        let sigma = sigma.union(&extra);
        Ok(Self::conclude(rule, linear, shared, sigma, p, vec![d], side))
    }

    fn rename_apart_binder(
        &self,
        x: &Name,
        cont: &Process,
        linear: &LinearEnv,
        shared: &SharedEnv,
    ) -> (Name, Process) {
        self.rename_apart(x, cont, linear, shared)
    }

    #[allow(clippy::too_many_arguments)]
    fn receive(
        &mut self,
        rule: Rule,
        linear: &LinearEnv,
        shared: &SharedEnv,
        p: &Process,
        after: LinearEnv,
        x: &Name,
        carried: &Behavioral,
        carried_shared: Option<&SharedType>,
        cont: &Process,
        extra: AuthSet,
        mut side: Vec<String>,
        path: &mut Vec<usize>,
    ) -> Outcome {
        let (x, cont) = self.rename_apart_binder(x, &cont.clone(), &after, shared);
        let mut inner = after;
        let mut inner_shared = shared.clone();
        match carried_shared {
            Some(t) => {
                inner_shared.insert(x.clone(), t.clone());
            }
            None => {
                inner.insert(x.clone(), carried.clone());
            }
        }
        path.push(0);
        let res = self.judge(&inner, &inner_shared, &cont, path);
        path.pop();
        let (sigma, d) = res?;
        if sigma.channels().contains(&x) {
            return Err(fail(
                path,
                TypeErrorReason::BoundChannelInSigma,
                format!("received channel {x} appears in Σ = {sigma}"),
            ));
        }
        side.push(format!("{x} ∉ channels(Σ)"));
        let sigma = sigma.union(&extra);
        Ok(Self::conclude(rule, linear, shared, sigma, p, vec![d], side))
    }

    /// Carves the slice `carried` out of the entry of `o` and checks the
    /// continuation with what is left.
    #[allow(clippy::too_many_arguments)]
    fn delegate(
        &mut self,
        rule: Rule,
        linear: &LinearEnv,
        shared: &SharedEnv,
        p: &Process,
        after: LinearEnv,
        o: &Name,
        carried: &Behavioral,
        cont: &Process,
        extra: AuthSet,
        side: Vec<String>,
        path: &mut Vec<usize>,
    ) -> Outcome {
        let Some(whole) = after.get(o).cloned() else {
            return Err(fail(
                path,
                TypeErrorReason::UnknownChannel,
                format!("delegated channel {o} is not linear here"),
            ));
        };
        let rests = match self.splitter.complements(&whole, carried) {
            Ok(r) => r,
            Err(e) => return Err(fail(path, TypeErrorReason::NoSplit, e.to_string())),
        };
        if rests.is_empty() {
            return Err(fail(
                path,
                TypeErrorReason::NoSplit,
                format!("{carried} cannot be split off {o}:{whole}"),
            ));
        }
        let mut best = None;
        let mut failure = None;
        for rest in rests {
            let mut inner = after.clone();
            inner.insert(o.clone(), rest.clone());
            let mut side = side.clone();
            side.push(format!("{whole} = {rest} ∘ {carried}"));
            match self.continue_with(rule, linear, shared, p, inner, shared, cont, extra.clone(), side, path) {
                Ok(found) => {
                    best = better(best, found);
                    if best.as_ref().is_some_and(|b| b.0.is_empty()) {
                        break;
                    }
                }
                Err(e) => failure = deeper(failure, e),
            }
        }
        best.ok_or_else(|| failure.expect("at least one complement was tried"))
    }
}

fn polarity_text(pol: &Polarity) -> String {
    match pol {
        Polarity::Out(r) => format!("!{r}"),
        Polarity::In(r) => format!("?{r}"),
        Polarity::Sync { sender, receiver } => format!("tau {sender} {receiver}"),
    }
}

fn message_text(m: &Message) -> String {
    match m {
        Message::Beh(b) => b.to_string(),
        Message::Sh(t) => format!("sh {t}"),
        Message::Role(r) => format!("role {r}"),
    }
}
