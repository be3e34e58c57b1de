//! Abstract syntax of role-qualified processes.
//!
//! Names are kept as user-facing identifiers; bound names are freshened on
//! demand by [`subst_name`] and the canonicalizer in `dynamics`.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::types::{Behavioral, SharedType};

/// Returns true when `s` belongs to the identifier lexical class.
pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

macro_rules! identifier_newtype {
    ($(#[$meta:meta])* $ty:ident) => {
        $(#[$meta])*
        #[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $ty(String);

        impl $ty {
            /// Panics if `text` is not an identifier.
            pub fn new(text: impl Into<String>) -> Self {
                let text = text.into();
                assert!(is_identifier(&text), "invalid identifier {text:?}");
                $ty(text)
            }

            pub fn parse(text: &str) -> Option<Self> {
                is_identifier(text).then(|| $ty(text.to_string()))
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $ty {
            fn from(text: &str) -> Self {
                $ty::new(text)
            }
        }
    };
}

identifier_newtype!(
    /// A channel name.
    Name
);
identifier_newtype!(
    /// A message label.
    Label
);
identifier_newtype!(
    /// A role on whose behalf an action is performed.
    Role
);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Qualification {
    Authorized,
    Unauthorized,
}

/// A role tagged authorized (`+r`) or unauthorized (`-r`).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct QualifiedRole {
    pub role: Role,
    pub qualification: Qualification,
}

impl QualifiedRole {
    pub fn authorized(role: impl Into<Role>) -> Self {
        QualifiedRole {
            role: role.into(),
            qualification: Qualification::Authorized,
        }
    }

    pub fn unauthorized(role: impl Into<Role>) -> Self {
        QualifiedRole {
            role: role.into(),
            qualification: Qualification::Unauthorized,
        }
    }

    pub fn is_authorized(&self) -> bool {
        self.qualification == Qualification::Authorized
    }
}

impl fmt::Display for QualifiedRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = match self.qualification {
            Qualification::Authorized => '+',
            Qualification::Unauthorized => '-',
        };
        write!(f, "{sign}{}", self.role)
    }
}

/// Communication prefix. Every prefix carries the qualified role `who` it
/// acts under.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Prefix {
    SendName {
        subject: Name,
        who: QualifiedRole,
        label: Label,
        object: Option<Name>,
    },
    RecvName {
        subject: Name,
        who: QualifiedRole,
        label: Label,
        binder: Option<Name>,
    },
    SendAuth {
        subject: Name,
        who: QualifiedRole,
        label: Label,
        object: QualifiedRole,
    },
    RecvAuth {
        subject: Name,
        who: QualifiedRole,
        label: Label,
        object: Role,
    },
}

impl Prefix {
    pub fn subject(&self) -> &Name {
        match self {
            Prefix::SendName { subject, .. }
            | Prefix::RecvName { subject, .. }
            | Prefix::SendAuth { subject, .. }
            | Prefix::RecvAuth { subject, .. } => subject,
        }
    }

    pub fn who(&self) -> &QualifiedRole {
        match self {
            Prefix::SendName { who, .. }
            | Prefix::RecvName { who, .. }
            | Prefix::SendAuth { who, .. }
            | Prefix::RecvAuth { who, .. } => who,
        }
    }

    pub fn who_mut(&mut self) -> &mut QualifiedRole {
        match self {
            Prefix::SendName { who, .. }
            | Prefix::RecvName { who, .. }
            | Prefix::SendAuth { who, .. }
            | Prefix::RecvAuth { who, .. } => who,
        }
    }

    pub fn label(&self) -> &Label {
        match self {
            Prefix::SendName { label, .. }
            | Prefix::RecvName { label, .. }
            | Prefix::SendAuth { label, .. }
            | Prefix::RecvAuth { label, .. } => label,
        }
    }

    pub fn is_output(&self) -> bool {
        matches!(self, Prefix::SendName { .. } | Prefix::SendAuth { .. })
    }

    /// The name bound in the continuation, if any.
    pub fn binder(&self) -> Option<&Name> {
        match self {
            Prefix::RecvName { binder, .. } => binder.as_ref(),
            _ => None,
        }
    }

    fn rename_free(&self, replacement: &Name, target: &Name) -> Prefix {
        let swap = |n: &Name| if n == target { replacement.clone() } else { n.clone() };
        let mut out = self.clone();
        match &mut out {
            Prefix::SendName {
                subject, object, ..
            } => {
                *subject = swap(subject);
                if let Some(o) = object {
                    *o = swap(o);
                }
            }
            Prefix::RecvName { subject, .. }
            | Prefix::SendAuth { subject, .. }
            | Prefix::RecvAuth { subject, .. } => *subject = swap(subject),
        }
        out
    }
}

/// Restriction annotation consumed by the type checker only.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RestrictionAnnotation {
    Linear(Behavioral),
    Shared(SharedType),
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum Process {
    #[default]
    Nil,
    Par(Box<Process>, Box<Process>),
    Restrict {
        name: Name,
        annotation: Option<RestrictionAnnotation>,
        body: Box<Process>,
    },
    Act {
        prefix: Prefix,
        cont: Box<Process>,
    },
}

impl Process {
    pub fn par(left: Process, right: Process) -> Process {
        Process::Par(Box::new(left), Box::new(right))
    }

    pub fn restrict(name: Name, annotation: Option<RestrictionAnnotation>, body: Process) -> Process {
        Process::Restrict {
            name,
            annotation,
            body: Box::new(body),
        }
    }

    pub fn act(prefix: Prefix, cont: Process) -> Process {
        Process::Act {
            prefix,
            cont: Box::new(cont),
        }
    }

    /// Left-nested parallel composition of `parts`; `0` when empty.
    pub fn par_all(parts: impl IntoIterator<Item = Process>) -> Process {
        parts
            .into_iter()
            .reduce(Process::par)
            .unwrap_or(Process::Nil)
    }

    /// Subterm addressed by `path` (0 = left/body/continuation, 1 = right).
    pub fn at_path(&self, path: &[usize]) -> Option<&Process> {
        let Some((&head, rest)) = path.split_first() else {
            return Some(self);
        };
        let child = match (self, head) {
            (Process::Par(l, _), 0) => l,
            (Process::Par(_, r), 1) => r,
            (Process::Restrict { body, .. }, 0) => body,
            (Process::Act { cont, .. }, 0) => cont,
            _ => return None,
        };
        child.at_path(rest)
    }

    /// The same tree with every qualification set to authorized.
    pub fn erase(&self) -> Process {
        map_qualifications(self, &mut |q| QualifiedRole::authorized(q.role.clone()))
    }
}

fn map_qualifications(
    p: &Process,
    f: &mut dyn FnMut(&QualifiedRole) -> QualifiedRole,
) -> Process {
    match p {
        Process::Nil => Process::Nil,
        Process::Par(l, r) => Process::par(map_qualifications(l, f), map_qualifications(r, f)),
        Process::Restrict {
            name,
            annotation,
            body,
        } => Process::restrict(name.clone(), annotation.clone(), map_qualifications(body, f)),
        Process::Act { prefix, cont } => {
            let mut prefix = prefix.clone();
            *prefix.who_mut() = f(prefix.who());
            if let Prefix::SendAuth { object, .. } = &mut prefix {
                *object = f(object);
            }
            Process::act(prefix, map_qualifications(cont, f))
        }
    }
}

/// Names with a free occurrence in subject or object position.
pub fn free_names(p: &Process) -> BTreeSet<Name> {
    let mut out = BTreeSet::new();
    collect_free(p, &mut Vec::new(), &mut out);
    out
}

fn collect_free(p: &Process, bound: &mut Vec<Name>, out: &mut BTreeSet<Name>) {
    let mut note = |n: &Name, bound: &Vec<Name>| {
        if !bound.contains(n) {
            out.insert(n.clone());
        }
    };
    match p {
        Process::Nil => {}
        Process::Par(l, r) => {
            collect_free(l, bound, out);
            collect_free(r, bound, out);
        }
        Process::Restrict { name, body, .. } => {
            bound.push(name.clone());
            collect_free(body, bound, out);
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
            match prefix.binder() {
                Some(b) => {
                    bound.push(b.clone());
                    collect_free(cont, bound, out);
                    bound.pop();
                }
                None => collect_free(cont, bound, out),
            }
        }
    }
}

/// Every name occurring anywhere in `p`, bound or free.
pub fn all_names(p: &Process) -> BTreeSet<Name> {
    let mut out = BTreeSet::new();
    fn walk(p: &Process, out: &mut BTreeSet<Name>) {
        match p {
            Process::Nil => {}
            Process::Par(l, r) => {
                walk(l, out);
                walk(r, out);
            }
            Process::Restrict { name, body, .. } => {
                out.insert(name.clone());
                walk(body, out);
            }
            Process::Act { prefix, cont } => {
                out.insert(prefix.subject().clone());
                match prefix {
                    Prefix::SendName {
                        object: Some(o), ..
                    } => {
                        out.insert(o.clone());
                    }
                    Prefix::RecvName {
                        binder: Some(b), ..
                    } => {
                        out.insert(b.clone());
                    }
                    _ => {}
                }
                walk(cont, out);
            }
        }
    }
    walk(p, &mut out);
    out
}

/// Derives a name from `hint` that is not in `avoid`: the hint itself when
/// free, otherwise its alphabetic stem with the smallest unused numeric suffix.
pub fn fresh_name(hint: &Name, avoid: &BTreeSet<Name>) -> Name {
    if !avoid.contains(hint) {
        return hint.clone();
    }
    let stem = hint.as_str().trim_end_matches(|c: char| c.is_ascii_digit());
    (1u64..)
        .map(|i| Name(format!("{stem}{i}")))
        .find(|n| !avoid.contains(n))
        .expect("unbounded suffix search")
}

/// Identity up to consistent renaming of bound names.
pub fn alpha_equivalent(p: &Process, q: &Process) -> bool {
    alpha_eq(p, q, &mut Vec::new(), &mut Vec::new())
}

fn same_occurrence(a: &Name, b: &Name, left: &[Name], right: &[Name]) -> bool {
    match (
        left.iter().rposition(|n| n == a),
        right.iter().rposition(|n| n == b),
    ) {
        (Some(i), Some(j)) => i == j,
        (None, None) => a == b,
        _ => false,
    }
}

fn alpha_eq(p: &Process, q: &Process, left: &mut Vec<Name>, right: &mut Vec<Name>) -> bool {
    match (p, q) {
        (Process::Nil, Process::Nil) => true,
        (Process::Par(l1, r1), Process::Par(l2, r2)) => {
            alpha_eq(l1, l2, left, right) && alpha_eq(r1, r2, left, right)
        }
        (
            Process::Restrict {
                name: n1,
                annotation: a1,
                body: b1,
            },
            Process::Restrict {
                name: n2,
                annotation: a2,
                body: b2,
            },
        ) => {
            if a1 != a2 {
                return false;
            }
            left.push(n1.clone());
            right.push(n2.clone());
            let eq = alpha_eq(b1, b2, left, right);
            left.pop();
            right.pop();
            eq
        }
        (
            Process::Act {
                prefix: x,
                cont: c1,
            },
            Process::Act {
                prefix: y,
                cont: c2,
            },
        ) => {
            if !same_occurrence(x.subject(), y.subject(), left, right)
                || x.who() != y.who()
                || x.label() != y.label()
            {
                return false;
            }
            let binders = match (x, y) {
                (
                    Prefix::SendName { object: o1, .. },
                    Prefix::SendName { object: o2, .. },
                ) => match (o1, o2) {
                    (None, None) => None,
                    (Some(o1), Some(o2)) if same_occurrence(o1, o2, left, right) => None,
                    _ => return false,
                },
                (
                    Prefix::RecvName { binder: b1, .. },
                    Prefix::RecvName { binder: b2, .. },
                ) => match (b1, b2) {
                    (None, None) => None,
                    (Some(b1), Some(b2)) => Some((b1.clone(), b2.clone())),
                    _ => return false,
                },
                (
                    Prefix::SendAuth { object: o1, .. },
                    Prefix::SendAuth { object: o2, .. },
                ) if o1 == o2 => None,
                (
                    Prefix::RecvAuth { object: o1, .. },
                    Prefix::RecvAuth { object: o2, .. },
                ) if o1 == o2 => None,
                _ => return false,
            };
            match binders {
                Some((b1, b2)) => {
                    left.push(b1);
                    right.push(b2);
                    let eq = alpha_eq(c1, c2, left, right);
                    left.pop();
                    right.pop();
                    eq
                }
                None => alpha_eq(c1, c2, left, right),
            }
        }
        _ => false,
    }
}

/// Capture-avoiding substitution `p{replacement/target}`.
pub fn subst_name(p: &Process, replacement: &Name, target: &Name) -> Process {
    if replacement == target {
        return p.clone();
    }
    match p {
        Process::Nil => Process::Nil,
        Process::Par(l, r) => Process::par(
            subst_name(l, replacement, target),
            subst_name(r, replacement, target),
        ),
        Process::Restrict {
            name,
            annotation,
            body,
        } => {
            if name == target {
                return p.clone();
            }
            let (name, body) = freshen_binder(name, body, replacement, target);
            Process::restrict(name, annotation.clone(), subst_name(&body, replacement, target))
        }
        Process::Act { prefix, cont } => {
            let renamed = prefix.rename_free(replacement, target);
            match prefix.binder() {
                Some(b) if b == target => Process::act(renamed, (**cont).clone()),
                Some(b) => {
                    let (b, cont) = freshen_binder(b, cont, replacement, target);
                    let renamed = match renamed {
                        Prefix::RecvName {
                            subject,
                            who,
                            label,
                            ..
                        } => Prefix::RecvName {
                            subject,
                            who,
                            label,
                            binder: Some(b),
                        },
                        other => other,
                    };
                    Process::act(renamed, subst_name(&cont, replacement, target))
                }
                None => Process::act(renamed, subst_name(cont, replacement, target)),
            }
        }
    }
}

/// Renames binder `b` over `body` when substituting `replacement` for
/// `target` underneath it would capture.
fn freshen_binder(b: &Name, body: &Process, replacement: &Name, target: &Name) -> (Name, Process) {
    let body_free = free_names(body);
    if b != replacement || !body_free.contains(target) {
        return (b.clone(), body.clone());
    }
    let mut avoid = body_free;
    avoid.insert(replacement.clone());
    avoid.insert(target.clone());
    let fresh = fresh_name(b, &avoid);
    let body = subst_name(body, &fresh, b);
    (fresh, body)
}

/// Upgrades `-role` to `+role` on every prefix whose subject is a free
/// occurrence of `channel`, both as the acting role and as a sent
/// authorization. Stops where `channel` is rebound.
pub fn auth_subst(p: &Process, channel: &Name, role: &Role) -> Process {
    let upgrade = |q: &mut QualifiedRole| {
        if &q.role == role {
            q.qualification = Qualification::Authorized;
        }
    };
    match p {
        Process::Nil => Process::Nil,
        Process::Par(l, r) => {
            Process::par(auth_subst(l, channel, role), auth_subst(r, channel, role))
        }
        Process::Restrict { name, .. } if name == channel => p.clone(),
        Process::Restrict {
            name,
            annotation,
            body,
        } => Process::restrict(name.clone(), annotation.clone(), auth_subst(body, channel, role)),
        Process::Act { prefix, cont } => {
            let mut prefix = prefix.clone();
            if prefix.subject() == channel {
                upgrade(prefix.who_mut());
                if let Prefix::SendAuth { object, .. } = &mut prefix {
                    upgrade(object);
                }
            }
            let cont = if prefix.binder() == Some(channel) {
                (**cont).clone()
            } else {
                auth_subst(cont, channel, role)
            };
            Process::act(prefix, cont)
        }
    }
}

/// A prefix is unauthorized when it acts under an unauthorized role or
/// sends an unauthorized role.
pub fn is_unauthorized_prefix(alpha: &Prefix) -> bool {
    !alpha.who().is_authorized()
        || matches!(alpha, Prefix::SendAuth { object, .. } if !object.is_authorized())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::parse_process;

    fn p(src: &str) -> Process {
        parse_process(src).unwrap()
    }

    fn names(list: &[&str]) -> BTreeSet<Name> {
        list.iter().map(|n| Name::new(*n)).collect()
    }

    #[test]
    fn free_names_examples() {
        assert!(free_names(&p("0")).is_empty());
        assert_eq!(free_names(&p("a!{+q}l2(b).0")), names(&["a", "b"]));
        assert_eq!(
            free_names(&p("a?{+r}l(x).x!{+r}m(y).new y . y!{+r}k().0")),
            names(&["a", "y"])
        );
    }

    #[test]
    fn fresh_name_suffixes() {
        let b = Name::new("b");
        assert_eq!(fresh_name(&b, &names(&[])), b);
        assert_eq!(fresh_name(&b, &names(&["b"])), Name::new("b1"));
        assert_eq!(fresh_name(&b, &names(&["b", "b1"])), Name::new("b2"));
        assert_eq!(fresh_name(&Name::new("b1"), &names(&["b1"])), Name::new("b2"));
    }

    #[test]
    fn alpha_equivalence_examples() {
        assert!(alpha_equivalent(
            &p("new b . b!{+q}l(c).0"),
            &p("new d . d!{+q}l(c).0")
        ));
        assert!(!alpha_equivalent(
            &p("new b . b!{+q}l(c).0"),
            &p("new b . b!{+q}l(b).0")
        ));
        assert!(alpha_equivalent(
            &p("a?{+r}l(x).x!{+r}m().0"),
            &p("a?{+r}l(y).y!{+r}m().0")
        ));
        assert!(!alpha_equivalent(
            &p("a?{+r}l(x).x!{+r}m().0"),
            &p("a?{+r}l(y).x!{+r}m().0")
        ));
    }

    #[test]
    fn substitution_examples() {
        let b = Name::new("b");
        let c = Name::new("c");
        assert_eq!(subst_name(&p("c?{-s}l3().0"), &b, &c), p("b?{-s}l3().0"));
        assert_eq!(subst_name(&p("0"), &b, &c), p("0"));
        assert_eq!(
            subst_name(&p("new b . c!{+q}l(b).0"), &b, &c),
            p("new b1 . b!{+q}l(b1).0")
        );
        // bound target is untouched
        assert_eq!(
            subst_name(&p("a?{+r}l(c).c!{+r}m().0"), &b, &c),
            p("a?{+r}l(c).c!{+r}m().0")
        );
    }

    #[test]
    fn auth_subst_examples() {
        let s = Role::new("s");
        let q = p("b?{-s}l3().0");
        assert_eq!(auth_subst(&q, &Name::new("c"), &s), q);
        assert_eq!(
            auth_subst(&p("b?{-s}l3().0 | new b . b!{-s}m().0"), &Name::new("b"), &s),
            p("b?{+s}l3().0 | new b . b!{-s}m().0")
        );
        // authorization objects on the channel are upgraded as well
        assert_eq!(
            auth_subst(&p("a!{-s}l<-s>.a!{+q}m<-t>.0"), &Name::new("a"), &s),
            p("a!{+s}l<+s>.a!{+q}m<-t>.0")
        );
        // an input binder of the same name stops the traversal
        assert_eq!(
            auth_subst(&p("x?{+r}l(a).a!{-s}m().0"), &Name::new("a"), &s),
            p("x?{+r}l(a).a!{-s}m().0")
        );
    }

    #[test]
    fn unauthorized_prefix_shapes() {
        let prefix_of = |src: &str| match p(src) {
            Process::Act { prefix, .. } => prefix,
            other => panic!("not a prefix: {other:?}"),
        };
        assert!(is_unauthorized_prefix(&prefix_of("b?{-s}l3().0")));
        assert!(!is_unauthorized_prefix(&prefix_of("a!{+q}l2(b).0")));
        assert!(is_unauthorized_prefix(&prefix_of("a!{+q}l<-s>.0")));
        assert!(is_unauthorized_prefix(&prefix_of("a!{-r}l<+s>.0")));
        assert!(is_unauthorized_prefix(&prefix_of("a?{-r}l<s>.0")));
        assert!(is_unauthorized_prefix(&prefix_of("a!{-r}l(b).0")));
        assert!(!is_unauthorized_prefix(&prefix_of("a?{+r}l<s>.0")));
    }

    #[test]
    fn erase_drops_qualifications() {
        assert_eq!(
            p("a!{-q}l<-s>.b?{-r}m().0").erase(),
            p("a!{+q}l<+s>.b?{+r}m().0")
        );
    }
}
