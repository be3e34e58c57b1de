//! Splitting of behavioral types into slices, `B = B1 ∘ B2`.
//!
//! The relation is the least one closed under type equivalence and:
//!
//! - `end = end ∘ end`, and `B = B ∘ end`
//! - `B|C = (B1|C1) ∘ (B2|C2)` when `B = B1 ∘ B2` and `C = C1 ∘ C2`
//! - `tau q r l(M).B = !q l(M).B1 ∘ ?r l(M).B2` when `B = B1 ∘ B2`
//! - `p l(M).B = p l(M).B1 ∘ dia B2` when `B = B1 ∘ B2`, `B2` shares no
//!   label with `l` or `M`, and `dia B2` is well-formed
//! - `dia B = dia B1 ∘ dia B2` when `B = B1 ∘ B2`
//!
//! each with its symmetric variant. Both slices of every split are
//! well-formed.

use std::collections::{BTreeSet, HashMap};
use std::rc::Rc;

use thiserror::Error;

use crate::types::{
    components, labels_of, message_labels, normalize, par_of, well_formed, Behavioral, Polarity,
};

pub const DEFAULT_SPLIT_BUDGET: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SplitError {
    #[error("split derivation depth budget of {0} exhausted")]
    BudgetExhausted(usize),
}

pub type SplitPair = (Behavioral, Behavioral);

/// Memoizing enumerator of splits.
#[derive(Debug)]
pub struct Splitter {
    budget: usize,
    cache: HashMap<Behavioral, Rc<Vec<SplitPair>>>,
}

impl Default for Splitter {
    fn default() -> Self {
        Splitter::new(DEFAULT_SPLIT_BUDGET)
    }
}

impl Splitter {
    pub fn new(budget: usize) -> Self {
        Splitter {
            budget,
            cache: HashMap::new(),
        }
    }

    /// Every split of `b` up to equivalence, in a deterministic order.
    pub fn splits(&mut self, b: &Behavioral) -> Result<Rc<Vec<SplitPair>>, SplitError> {
        let n = normalize(b);
        self.enumerate(&n, 0)
    }

    fn enumerate(&mut self, b: &Behavioral, depth: usize) -> Result<Rc<Vec<SplitPair>>, SplitError> {
        if depth > self.budget {
            return Err(SplitError::BudgetExhausted(self.budget));
        }
        if let Some(hit) = self.cache.get(b) {
            return Ok(hit.clone());
        }
        let mut out: BTreeSet<SplitPair> = BTreeSet::new();
        out.insert((b.clone(), Behavioral::End));
        out.insert((Behavioral::End, b.clone()));
        match b {
            Behavioral::End => {}
            Behavioral::Prefixed {
                pol,
                label,
                msg,
                cont,
            } => {
                let inner = self.enumerate(cont, depth + 1)?;
                let msg_labels = message_labels(msg);
                for (c1, c2) in inner.iter() {
                    if let Polarity::Sync { sender, receiver } = pol {
                        let out_half = Behavioral::prefixed(
                            Polarity::Out(sender.clone()),
                            label.clone(),
                            (**msg).clone(),
                            c1.clone(),
                        );
                        let in_half = Behavioral::prefixed(
                            Polarity::In(receiver.clone()),
                            label.clone(),
                            (**msg).clone(),
                            c2.clone(),
                        );
                        out.insert((in_half.clone(), out_half.clone()));
                        out.insert((out_half, in_half));
                    }
                    let deferred = Behavioral::sometime(c2.clone());
                    let c2_labels = labels_of(c2);
                    if !c2_labels.contains(label)
                        && c2_labels.is_disjoint(&msg_labels)
                        && well_formed(&deferred)
                    {
                        let kept = Behavioral::prefixed(
                            pol.clone(),
                            label.clone(),
                            (**msg).clone(),
                            c1.clone(),
                        );
                        let deferred = normalize(&deferred);
                        out.insert((deferred.clone(), kept.clone()));
                        out.insert((kept, deferred));
                    }
                }
            }
            Behavioral::Sometime(body) => {
                let inner = self.enumerate(body, depth + 1)?;
                for (u1, u2) in inner.iter() {
                    out.insert((
                        normalize(&Behavioral::sometime(u1.clone())),
                        normalize(&Behavioral::sometime(u2.clone())),
                    ));
                }
            }
            Behavioral::Par(..) => {
                let parts = components(b);
                let mut per_part = Vec::with_capacity(parts.len());
                for part in &parts {
                    per_part.push(self.enumerate(part, depth + 1)?);
                }
                let mut choice = vec![0usize; parts.len()];
                'product: loop {
                    let left = par_of(choice.iter().zip(&per_part).map(|(&i, s)| &s[i].0));
                    let right = par_of(choice.iter().zip(&per_part).map(|(&i, s)| &s[i].1));
                    out.insert((left, right));
                    for k in 0..choice.len() {
                        choice[k] += 1;
                        if choice[k] < per_part[k].len() {
                            continue 'product;
                        }
                        choice[k] = 0;
                    }
                    break;
                }
            }
        }
        let result: Vec<SplitPair> = out
            .into_iter()
            .filter(|(x, y)| well_formed(x) && well_formed(y))
            .collect();
        let result = Rc::new(result);
        self.cache.insert(b.clone(), result.clone());
        Ok(result)
    }

    /// Every `r` with `b = r ∘ carved`.
    pub fn complements(
        &mut self,
        b: &Behavioral,
        carved: &Behavioral,
    ) -> Result<Vec<Behavioral>, SplitError> {
        let carved = normalize(carved);
        Ok(self
            .splits(b)?
            .iter()
            .filter(|(_, y)| *y == carved)
            .map(|(x, _)| x.clone())
            .collect())
    }
}

/// All splits of `b` within the derivation-depth budget.
pub fn splits(b: &Behavioral, depth_budget: usize) -> Result<Vec<SplitPair>, SplitError> {
    Ok(Splitter::new(depth_budget).splits(b)?.as_ref().clone())
}

/// Decides `b = b1 ∘ b2` by goal-directed search over the split rules.
pub fn check_split(b: &Behavioral, b1: &Behavioral, b2: &Behavioral) -> bool {
    split_rel(&normalize(b), &normalize(b1), &normalize(b2))
}

fn split_rel(b: &Behavioral, b1: &Behavioral, b2: &Behavioral) -> bool {
    if !well_formed(b1) || !well_formed(b2) {
        return false;
    }
    if b2.is_end() && b1 == b {
        return true;
    }
    if b1.is_end() && b2 == b {
        return true;
    }
    match b {
        Behavioral::End => false,
        Behavioral::Prefixed {
            pol,
            label,
            msg,
            cont,
        } => {
            for (x, y) in [(b1, b2), (b2, b1)] {
                if let (
                    Polarity::Sync { sender, receiver },
                    Behavioral::Prefixed {
                        pol: Polarity::Out(s),
                        label: l1,
                        msg: m1,
                        cont: c1,
                    },
                    Behavioral::Prefixed {
                        pol: Polarity::In(r),
                        label: l2,
                        msg: m2,
                        cont: c2,
                    },
                ) = (pol, x, y)
                {
                    if s == sender
                        && r == receiver
                        && l1 == label
                        && l2 == label
                        && m1 == msg
                        && m2 == msg
                        && split_rel(cont, c1, c2)
                    {
                        return true;
                    }
                }
                if let (
                    Behavioral::Prefixed {
                        pol: p1,
                        label: l1,
                        msg: m1,
                        cont: c1,
                    },
                    Behavioral::Sometime(d),
                ) = (x, y)
                {
                    if p1 != pol || l1 != label || m1 != msg {
                        continue;
                    }
                    let labels = labels_of(d);
                    if labels.contains(label) || !labels.is_disjoint(&message_labels(msg)) {
                        continue;
                    }
                    // `dia B2` normalizes to `y` for B2 = d and for B2 = dia d
                    if split_rel(cont, c1, d) || split_rel(cont, c1, y) {
                        return true;
                    }
                }
            }
            false
        }
        Behavioral::Sometime(body) => {
            let (Behavioral::Sometime(x1), Behavioral::Sometime(x2)) = (b1, b2) else {
                return false;
            };
            let left = [(**x1).clone(), b1.clone()];
            let right = [(**x2).clone(), b2.clone()];
            left.iter()
                .any(|u1| right.iter().any(|u2| split_rel(body, u1, u2)))
        }
        Behavioral::Par(..) => {
            let parts = components(b);
            let lefts = components(b1);
            let rights = components(b2);
            // a slice never has labels its source lacks, so each component
            // can only go to a part whose labels cover its own
            let part_labels: Vec<_> = parts.iter().map(|p| labels_of(p)).collect();
            let mut candidates = Vec::new();
            for c in lefts.iter().chain(&rights) {
                let own = labels_of(c);
                let fits: Vec<usize> = (0..parts.len())
                    .filter(|&i| own.is_subset(&part_labels[i]))
                    .collect();
                if fits.is_empty() {
                    return false;
                }
                candidates.push(fits);
            }
            let mut groups_l = vec![Vec::new(); parts.len()];
            let mut groups_r = vec![Vec::new(); parts.len()];
            distribute(&parts, &lefts, &rights, &candidates, 0, &mut groups_l, &mut groups_r)
        }
    }
}

fn distribute<'a>(
    parts: &[&Behavioral],
    lefts: &[&'a Behavioral],
    rights: &[&'a Behavioral],
    candidates: &[Vec<usize>],
    next: usize,
    groups_l: &mut Vec<Vec<&'a Behavioral>>,
    groups_r: &mut Vec<Vec<&'a Behavioral>>,
) -> bool {
    let total = lefts.len() + rights.len();
    if next == total {
        return parts.iter().enumerate().all(|(i, part)| {
            split_rel(
                part,
                &par_of(groups_l[i].iter().copied()),
                &par_of(groups_r[i].iter().copied()),
            )
        });
    }
    for &i in &candidates[next] {
        let pushed_left = next < lefts.len();
        if pushed_left {
            groups_l[i].push(lefts[next]);
        } else {
            groups_r[i].push(rights[next - lefts.len()]);
        }
        if distribute(parts, lefts, rights, candidates, next + 1, groups_l, groups_r) {
            return true;
        }
        if pushed_left {
            groups_l[i].pop();
        } else {
            groups_r[i].pop();
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::parse_type;

    fn t(src: &str) -> Behavioral {
        parse_type(src).unwrap()
    }

    #[test]
    fn end_splits_only_into_ends() {
        assert_eq!(
            splits(&t("end"), DEFAULT_SPLIT_BUDGET).unwrap(),
            vec![(Behavioral::End, Behavioral::End)]
        );
    }

    #[test]
    fn channel_b_of_the_two_thread_example() {
        let b = t("tau q r l1(role s).tau q s l3(end).end");
        let sender = t("!q l1(role s).!q l3(end).end");
        let receiver = t("?r l1(role s).?s l3(end).end");
        let all = splits(&b, DEFAULT_SPLIT_BUDGET).unwrap();
        assert!(all.contains(&(sender.clone(), receiver.clone())));
        assert!(all.contains(&(receiver.clone(), sender.clone())));
        assert!(check_split(&b, &sender, &receiver));
        assert!(!check_split(&b, &sender, &sender));
    }

    #[test]
    fn report_split_between_student_and_professor() {
        let b = t("tau s p report(end).!rev final(end).end");
        let student = t("!s report(end).end");
        let professor = t("?p report(end).!rev final(end).end");
        assert!(check_split(&b, &student, &professor));
        assert!(splits(&b, DEFAULT_SPLIT_BUDGET)
            .unwrap()
            .contains(&(student, professor)));
    }

    #[test]
    fn skip_defers_the_other_slice() {
        let b = t("!e auth1(role rev).!e extend(end).end");
        assert!(check_split(
            &b,
            &t("!e auth1(role rev).end"),
            &t("dia !e extend(end).end")
        ));
        // a deferred slice may not mention the skipped label
        let b = t("!e l(end).?e l2(end).end");
        assert!(!check_split(&b, &t("!e l(end).end"), &t("dia ?e l(end).end")));
        // deferring a synchronization head is ill-formed
        let b = t("!e l(end).tau a b m(end).end");
        assert!(!check_split(&b, &t("!e l(end).end"), &t("dia tau a b m(end).end")));
    }

    #[test]
    fn parallel_and_sometime_distribute() {
        let x = t("!a x(end).end");
        let y = t("?b y(end).end");
        let both = t("!a x(end).end | ?b y(end).end");
        assert!(check_split(&both, &x, &y));
        assert!(check_split(&both, &y, &x));
        let dia_both = Behavioral::sometime(both.clone());
        assert!(check_split(
            &dia_both,
            &Behavioral::sometime(x.clone()),
            &Behavioral::sometime(y.clone())
        ));
        assert!(!check_split(&dia_both, &x, &Behavioral::sometime(y)));
    }

    #[test]
    fn budget_is_reported() {
        let b = t("tau a b l1(end).tau a b l2(end).tau a b l3(end).end");
        assert_eq!(splits(&b, 1), Err(SplitError::BudgetExhausted(1)));
        assert!(splits(&b, 4).is_ok());
    }

    #[test]
    fn complements_of_professor_slice() {
        let j1 = t("tau p s auth2(role rev).?rev extend(end).tau s p report(end).!rev final(end).end");
        let student = t("?s auth2(role rev).?rev extend(end).!s report(end).end");
        let mut splitter = Splitter::default();
        let rest = splitter.complements(&j1, &student).unwrap();
        assert_eq!(
            rest,
            vec![t("!p auth2(role rev).dia(?p report(end).!rev final(end).end)")]
        );
    }
}
