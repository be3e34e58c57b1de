//! Typing environments: linear `Δ`, shared `Γ` and authorization sets `Σ`.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::split::{SplitError, Splitter};
use crate::syntax::{Name, QualifiedRole, Role};
use crate::types::{normalize, type_steps, Behavioral, SharedType};

pub type LinearEnv = BTreeMap<Name, Behavioral>;
pub type SharedEnv = BTreeMap<Name, SharedType>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnvError {
    #[error("environments have different channels")]
    KeyMismatch,
    #[error(transparent)]
    Split(#[from] SplitError),
}

/// Set of `(channel, role)` pairs used without holding the authorization.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct AuthSet(BTreeSet<(Name, Role)>);

impl AuthSet {
    pub fn new() -> Self {
        AuthSet::default()
    }

    pub fn singleton(channel: Name, role: Role) -> Self {
        AuthSet(BTreeSet::from([(channel, role)]))
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn contains(&self, channel: &Name, role: &Role) -> bool {
        self.0.contains(&(channel.clone(), role.clone()))
    }

    pub fn insert(&mut self, channel: Name, role: Role) -> bool {
        self.0.insert((channel, role))
    }

    pub fn remove(&mut self, channel: &Name, role: &Role) -> bool {
        self.0.remove(&(channel.clone(), role.clone()))
    }

    pub fn union(&self, other: &AuthSet) -> AuthSet {
        AuthSet(self.0.union(&other.0).cloned().collect())
    }

    pub fn channels(&self) -> BTreeSet<Name> {
        self.0.iter().map(|(a, _)| a.clone()).collect()
    }

    pub fn roles(&self) -> BTreeSet<Role> {
        self.0.iter().map(|(_, r)| r.clone()).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &(Name, Role)> {
        self.0.iter()
    }
}

impl FromIterator<(Name, Role)> for AuthSet {
    fn from_iter<I: IntoIterator<Item = (Name, Role)>>(iter: I) -> Self {
        AuthSet(iter.into_iter().collect())
    }
}

impl std::fmt::Display for AuthSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("{")?;
        for (i, (a, r)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "({a}, {r})")?;
        }
        f.write_str("}")
    }
}

/// `{(a, q)}` for an unauthorized `-q`, empty for `+q`.
pub fn funauth(a: &Name, rho: &QualifiedRole) -> AuthSet {
    if rho.is_authorized() {
        AuthSet::new()
    } else {
        AuthSet::singleton(a.clone(), rho.role.clone())
    }
}

/// `Δ → Δ'` lifted pointwise: every entry stays (up to equivalence) or
/// takes one type reduction step.
pub fn env_step(d1: &LinearEnv, d2: &LinearEnv) -> Result<bool, EnvError> {
    if !d1.keys().eq(d2.keys()) {
        return Err(EnvError::KeyMismatch);
    }
    Ok(d1.iter().zip(d2.values()).all(|((_, before), after)| {
        let after = normalize(after);
        normalize(before) == after || type_steps(before).contains(&after)
    }))
}

/// Every split of `Δ`: per channel the entry goes wholly left, wholly
/// right, or is split between both sides.
pub fn env_split(d: &LinearEnv) -> Result<EnvSplits, EnvError> {
    let mut splitter = Splitter::default();
    let mut options = Vec::with_capacity(d.len());
    for (name, b) in d {
        let mut opts: Vec<(Option<Behavioral>, Option<Behavioral>)> =
            vec![(Some(b.clone()), None), (None, Some(b.clone()))];
        for (x, y) in splitter.splits(b)?.iter() {
            opts.push((Some(x.clone()), Some(y.clone())));
        }
        options.push((name.clone(), opts));
    }
    Ok(EnvSplits {
        cursor: vec![0; options.len()],
        options,
        done: false,
    })
}

/// Lazy cross product produced by [`env_split`].
#[derive(Debug)]
pub struct EnvSplits {
    #[allow(clippy::type_complexity)]
    options: Vec<(Name, Vec<(Option<Behavioral>, Option<Behavioral>)>)>,
    cursor: Vec<usize>,
    done: bool,
}

impl Iterator for EnvSplits {
    type Item = (LinearEnv, LinearEnv);

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let mut left = LinearEnv::new();
        let mut right = LinearEnv::new();
        for ((name, opts), &i) in self.options.iter().zip(&self.cursor) {
            let (l, r) = &opts[i];
            if let Some(l) = l {
                left.insert(name.clone(), l.clone());
            }
            if let Some(r) = r {
                right.insert(name.clone(), r.clone());
            }
        }
        self.done = true;
        for (k, (_, opts)) in self.options.iter().enumerate() {
            self.cursor[k] += 1;
            if self.cursor[k] < opts.len() {
                self.done = false;
                break;
            }
            self.cursor[k] = 0;
        }
        Some((left, right))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::parse_type;

    fn t(src: &str) -> Behavioral {
        parse_type(src).unwrap()
    }

    #[test]
    fn funauth_examples() {
        let a = Name::new("a");
        assert_eq!(
            funauth(&a, &QualifiedRole::unauthorized("q")),
            AuthSet::singleton(a.clone(), Role::new("q"))
        );
        assert!(funauth(&a, &QualifiedRole::authorized("q")).is_empty());
        let sigma = funauth(&Name::new("b"), &QualifiedRole::unauthorized("rev"));
        assert_eq!(sigma.channels(), BTreeSet::from([Name::new("b")]));
        assert_eq!(sigma.roles(), BTreeSet::from([Role::new("rev")]));
    }

    #[test]
    fn env_step_examples() {
        let b = Name::new("b");
        let d = LinearEnv::from([(b.clone(), t("tau q r l1(role s).tau q s l3(end).end"))]);
        assert_eq!(env_step(&d, &d), Ok(true));
        let stepped = LinearEnv::from([(b.clone(), t("tau q s l3(end).end"))]);
        assert_eq!(env_step(&d, &stepped), Ok(true));
        let stuck = LinearEnv::from([(b.clone(), t("end"))]);
        let grown = LinearEnv::from([(b.clone(), t("!q l(end).end"))]);
        assert_eq!(env_step(&stuck, &grown), Ok(false));
        assert_eq!(
            env_step(&stuck, &LinearEnv::new()),
            Err(EnvError::KeyMismatch)
        );
    }

    #[test]
    fn env_split_examples() {
        let all: Vec<_> = env_split(&LinearEnv::new()).unwrap().collect();
        assert_eq!(all, vec![(LinearEnv::new(), LinearEnv::new())]);

        let a = Name::new("a");
        let d = LinearEnv::from([(a.clone(), Behavioral::End)]);
        let all: Vec<_> = env_split(&d).unwrap().collect();
        assert!(all.contains(&(d.clone(), LinearEnv::new())));
        assert!(all.contains(&(LinearEnv::new(), d.clone())));
        assert!(all.contains(&(d.clone(), d.clone())));

        let b = Name::new("b");
        let d = LinearEnv::from([(b.clone(), t("tau q r l1(role s).tau q s l3(end).end"))]);
        let wanted = (
            LinearEnv::from([(b.clone(), t("!q l1(role s).!q l3(end).end"))]),
            LinearEnv::from([(b.clone(), t("?r l1(role s).?s l3(end).end"))]),
        );
        assert!(env_split(&d).unwrap().any(|pair| pair == wanted));
    }
}
