//! Empirical checks of error freedom, type preservation and type safety
//! over the reachable states of a process.

use serde::Serialize;
use thiserror::Error;

use crate::checker::{check_process, TypeError};
use crate::dynamics::{explore, is_auth_error, DynamicsError, StateSpace, StepLabel};
use crate::env::{AuthSet, LinearEnv, SharedEnv};
use crate::syntax::{Prefix, Process, QualifiedRole, Qualification};
use crate::types::{normalize, type_steps};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Pass,
    Fail,
    BudgetExceeded,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetaError {
    #[error("precondition failed: process is not typable ({})", .0.first().map(|e| e.to_string()).unwrap_or_default())]
    NotTypable(Vec<TypeError>),
    #[error("precondition failed: authorization set {0} is not empty")]
    NonEmptySigma(AuthSet),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PreservationFailure {
    pub state: String,
    pub step: StepLabel,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Witness {
    pub trace: Vec<StepLabel>,
    pub state: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MetaReport {
    pub fixture: String,
    pub states_visited: usize,
    pub edges_checked: usize,
    pub preservation_failures: Vec<PreservationFailure>,
    pub safety_failures: Vec<Witness>,
    pub verdict: Verdict,
}

impl MetaReport {
    fn new(fixture: &str) -> Self {
        MetaReport {
            fixture: fixture.to_string(),
            states_visited: 0,
            edges_checked: 0,
            preservation_failures: Vec::new(),
            safety_failures: Vec::new(),
            verdict: Verdict::Pass,
        }
    }

    fn settle(mut self) -> Self {
        if self.verdict != Verdict::BudgetExceeded {
            self.verdict = if self.preservation_failures.is_empty() && self.safety_failures.is_empty() {
                Verdict::Pass
            } else {
                Verdict::Fail
            };
        }
        self
    }

    /// Folds `other` into `self`; any failure or budget overrun sticks.
    pub fn merge(mut self, other: MetaReport) -> MetaReport {
        self.states_visited = self.states_visited.max(other.states_visited);
        self.edges_checked = self.edges_checked.max(other.edges_checked);
        self.preservation_failures.extend(other.preservation_failures);
        self.safety_failures.extend(other.safety_failures);
        self.verdict = match (self.verdict, other.verdict) {
            (Verdict::BudgetExceeded, _) | (_, Verdict::BudgetExceeded) => Verdict::BudgetExceeded,
            (Verdict::Fail, _) | (_, Verdict::Fail) => Verdict::Fail,
            _ => Verdict::Pass,
        };
        self
    }
}

fn require_well_typed(linear: &LinearEnv, shared: &SharedEnv, p: &Process) -> Result<(), MetaError> {
    let checked = check_process(linear, shared, p).map_err(MetaError::NotTypable)?;
    if !checked.sigma.is_empty() {
        return Err(MetaError::NonEmptySigma(checked.sigma));
    }
    Ok(())
}

/// A well-typed process is not an authorization error.
pub fn error_free_check(linear: &LinearEnv, shared: &SharedEnv, p: &Process) -> Result<bool, MetaError> {
    require_well_typed(linear, shared, p)?;
    Ok(!is_auth_error(p))
}

/// Every reduction of every reachable state is matched by a step (or a
/// stutter) of the linear environment that types the successor with the
/// same authorization set.
pub fn preservation_check(
    fixture: &str,
    linear: &LinearEnv,
    shared: &SharedEnv,
    p: &Process,
    max_states: usize,
) -> Result<MetaReport, MetaError> {
    let sigma = check_process(linear, shared, p)
        .map_err(MetaError::NotTypable)?
        .sigma;
    let mut report = MetaReport::new(fixture);
    let space = match explore(p, max_states) {
        Ok(space) => space,
        Err(DynamicsError::BudgetExceeded { .. }) => {
            report.verdict = Verdict::BudgetExceeded;
            return Ok(report);
        }
        Err(e) => unreachable!("exploration only fails on the budget: {e}"),
    };
    report.states_visited = space.states.len();
    preservation_over(&space, linear, shared, &sigma, &mut report);
    Ok(report.settle())
}

fn preservation_over(
    space: &StateSpace,
    linear: &LinearEnv,
    shared: &SharedEnv,
    sigma: &AuthSet,
    report: &mut MetaReport,
) {
    let mut deltas: Vec<Option<LinearEnv>> = vec![None; space.states.len()];
    deltas[0] = Some(linear.iter().map(|(a, b)| (a.clone(), normalize(b))).collect());
    for (from, label, to) in &space.edges {
        report.edges_checked += 1;
        let Some(delta) = deltas[*from].clone() else {
            report.preservation_failures.push(PreservationFailure {
                state: space.states[*from].to_string(),
                step: label.clone(),
                detail: "source state has no typing environment".into(),
            });
            continue;
        };
        let target = space.states[*to].to_process();
        match matching_env(&delta, shared, sigma, &target, label) {
            Some(next) => {
                if deltas[*to].is_none() {
                    deltas[*to] = Some(next);
                }
            }
            None => report.preservation_failures.push(PreservationFailure {
                state: space.states[*from].to_string(),
                step: label.clone(),
                detail: format!(
                    "no Δ' with Δ → Δ' types {} with Σ = {sigma}",
                    space.states[*to]
                ),
            }),
        }
    }
}

/// Searches `Δ'` among per-entry choices of staying or taking one type
/// step, trying a step of the reduced channel first.
fn matching_env(
    delta: &LinearEnv,
    shared: &SharedEnv,
    sigma: &AuthSet,
    target: &Process,
    label: &StepLabel,
) -> Option<LinearEnv> {
    let choices: Vec<(_, Vec<_>)> = delta
        .iter()
        .map(|(a, b)| {
            let steps = type_steps(b);
            let opts = if a == &label.channel {
                steps.into_iter().chain([b.clone()]).collect()
            } else {
                std::iter::once(b.clone()).chain(steps).collect()
            };
            (a.clone(), opts)
        })
        .collect();
    let mut cursor = vec![0usize; choices.len()];
    loop {
        let candidate: LinearEnv = choices
            .iter()
            .zip(&cursor)
            .map(|((a, opts), &i)| (a.clone(), opts[i].clone()))
            .collect();
        if matches!(check_process(&candidate, shared, target), Ok(c) if &c.sigma == sigma) {
            return Some(candidate);
        }
        let mut advanced = false;
        for k in 0..cursor.len() {
            cursor[k] += 1;
            if cursor[k] < choices[k].1.len() {
                advanced = true;
                break;
            }
            cursor[k] = 0;
        }
        if !advanced {
            return None;
        }
    }
}

/// No reachable state of a well-typed process is an authorization error.
pub fn safety_check(
    fixture: &str,
    linear: &LinearEnv,
    shared: &SharedEnv,
    p: &Process,
    max_states: usize,
) -> Result<MetaReport, MetaError> {
    require_well_typed(linear, shared, p)?;
    Ok(safety_report(fixture, p, max_states))
}

/// The safety search without the typing precondition.
pub fn safety_report(fixture: &str, p: &Process, max_states: usize) -> MetaReport {
    let mut report = MetaReport::new(fixture);
    match explore(p, max_states) {
        Ok(space) => {
            report.states_visited = space.states.len();
            report.edges_checked = space.edges.len();
            report.safety_failures = space
                .error_states
                .iter()
                .map(|&s| Witness {
                    trace: space.trace_to(s),
                    state: space.states[s].to_string(),
                })
                .collect();
        }
        Err(_) => report.verdict = Verdict::BudgetExceeded,
    }
    report.settle()
}

/// Every variant of `p` with exactly one authorized qualification (acting
/// role or sent authorization) made unauthorized.
pub fn qualification_mutants(p: &Process) -> Vec<Process> {
    let count = count_authorized(p);
    (0..count)
        .map(|target| {
            let mut seen = 0;
            flip(p, target, &mut seen)
        })
        .collect()
}

fn count_authorized(p: &Process) -> usize {
    match p {
        Process::Nil => 0,
        Process::Par(l, r) => count_authorized(l) + count_authorized(r),
        Process::Restrict { body, .. } => count_authorized(body),
        Process::Act { prefix, cont } => {
            let here = usize::from(prefix.who().is_authorized())
                + usize::from(matches!(prefix, Prefix::SendAuth { object, .. } if object.is_authorized()));
            here + count_authorized(cont)
        }
    }
}

fn flip(p: &Process, target: usize, seen: &mut usize) -> Process {
    let hit = |q: &mut QualifiedRole, seen: &mut usize| {
        if q.is_authorized() {
            if *seen == target {
                q.qualification = Qualification::Unauthorized;
            }
            *seen += 1;
        }
    };
    match p {
        Process::Nil => Process::Nil,
        Process::Par(l, r) => {
            let l = flip(l, target, seen);
            Process::par(l, flip(r, target, seen))
        }
        Process::Restrict {
            name,
            annotation,
            body,
        } => Process::restrict(name.clone(), annotation.clone(), flip(body, target, seen)),
        Process::Act { prefix, cont } => {
            let mut prefix = prefix.clone();
            hit(prefix.who_mut(), seen);
            if let Prefix::SendAuth { object, .. } = &mut prefix {
                hit(object, seen);
            }
            Process::act(prefix, flip(cont, target, seen))
        }
    }
}
