use std::collections::BTreeSet;

use authpi::split::{check_split, splits};
use authpi::syntax::{alpha_equivalent, all_names, auth_subst, free_names, subst_name};
use authpi::types::{labels_of, normalize, subtype, type_steps, well_formed};
use authpi::{
    canonicalize, parse_process, parse_type, print_process, print_type, Behavioral, Label,
    Message, Name, Polarity, Prefix, Process, QualifiedRole, Role,
};
use proptest::prelude::*;

const NAMES: &[&str] = &["a", "b", "c", "x", "y"];
const ROLES: &[&str] = &["p", "q", "r"];
const LABELS: &[&str] = &["l1", "l2", "l3", "m"];

fn name() -> impl Strategy<Value = Name> {
    prop::sample::select(NAMES).prop_map(Name::from)
}

fn role() -> impl Strategy<Value = Role> {
    prop::sample::select(ROLES).prop_map(Role::from)
}

fn label() -> impl Strategy<Value = Label> {
    prop::sample::select(LABELS).prop_map(Label::from)
}

fn qrole() -> impl Strategy<Value = QualifiedRole> {
    (role(), any::<bool>()).prop_map(|(r, plus)| {
        if plus {
            QualifiedRole::authorized(r)
        } else {
            QualifiedRole::unauthorized(r)
        }
    })
}

fn prefix() -> impl Strategy<Value = Prefix> {
    prop_oneof![
        (name(), qrole(), label(), prop::option::of(name())).prop_map(|(subject, who, label, object)| {
            Prefix::SendName { subject, who, label, object }
        }),
        (name(), qrole(), label(), prop::option::of(name())).prop_map(|(subject, who, label, binder)| {
            Prefix::RecvName { subject, who, label, binder }
        }),
        (name(), qrole(), label(), qrole()).prop_map(|(subject, who, label, object)| {
            Prefix::SendAuth { subject, who, label, object }
        }),
        (name(), qrole(), label(), role()).prop_map(|(subject, who, label, object)| {
            Prefix::RecvAuth { subject, who, label, object }
        }),
    ]
}

fn process() -> impl Strategy<Value = Process> {
    Just(Process::Nil).prop_recursive(5, 24, 2, |inner| {
        prop_oneof![
            (prefix(), inner.clone()).prop_map(|(a, p)| Process::act(a, p)),
            (inner.clone(), inner.clone()).prop_map(|(p, q)| Process::par(p, q)),
            (name(), inner).prop_map(|(n, p)| Process::restrict(n, None, p)),
        ]
    })
}

fn polarity() -> impl Strategy<Value = Polarity> {
    prop_oneof![
        role().prop_map(Polarity::Out),
        role().prop_map(Polarity::In),
        (role(), role()).prop_map(|(sender, receiver)| Polarity::Sync { sender, receiver }),
    ]
}

fn behavioral() -> impl Strategy<Value = Behavioral> {
    Just(Behavioral::End).prop_recursive(4, 16, 2, |inner| {
        prop_oneof![
            3 => (polarity(), label(), inner.clone()).prop_map(|(pol, l, cont)| {
                Behavioral::prefixed(pol, l, Message::Beh(Behavioral::End), cont)
            }),
            1 => (polarity(), label(), role(), inner.clone()).prop_map(|(pol, l, r, cont)| {
                Behavioral::prefixed(pol, l, Message::Role(r), cont)
            }),
            1 => (inner.clone(), inner.clone()).prop_map(|(x, y)| Behavioral::par(x, y)),
            1 => inner.prop_map(Behavioral::sometime),
        ]
    })
}

fn count_unauthorized_on(p: &Process, channel: &Name, role: &Role) -> usize {
    match p {
        Process::Nil => 0,
        Process::Par(l, r) => count_unauthorized_on(l, channel, role) + count_unauthorized_on(r, channel, role),
        Process::Restrict { name, body, .. } => {
            if name == channel {
                0
            } else {
                count_unauthorized_on(body, channel, role)
            }
        }
        Process::Act { prefix, cont } => {
            let mut here = 0;
            if prefix.subject() == channel {
                let who = prefix.who();
                here += usize::from(!who.is_authorized() && &who.role == role);
                if let Prefix::SendAuth { object, .. } = prefix {
                    here += usize::from(!object.is_authorized() && &object.role == role);
                }
            }
            let rest = if prefix.binder() == Some(channel) {
                0
            } else {
                count_unauthorized_on(cont, channel, role)
            };
            here + rest
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn substitution_moves_only_the_target(p in process(), from in name(), to in name()) {
        let q = subst_name(&p, &to, &from);
        let mut expected = free_names(&p);
        if expected.remove(&from) {
            expected.insert(to.clone());
        }
        prop_assert_eq!(free_names(&q), expected);
    }

    #[test]
    fn substitution_of_an_absent_name_is_identity(p in process(), to in name()) {
        let ghost = Name::from("zz");
        prop_assert_eq!(subst_name(&p, &to, &ghost), p);
    }

    #[test]
    fn substitution_round_trip_through_a_fresh_name(p in process(), from in name()) {
        let fresh = Name::from("fresh");
        prop_assume!(!all_names(&p).contains(&fresh));
        let back = subst_name(&subst_name(&p, &fresh, &from), &from, &fresh);
        prop_assert!(alpha_equivalent(&back, &p));
    }

    #[test]
    fn auth_subst_is_idempotent(p in process(), a in name(), r in role()) {
        let once = auth_subst(&p, &a, &r);
        prop_assert_eq!(auth_subst(&once, &a, &r), once);
    }

    #[test]
    fn auth_subst_commutes_with_erasure(p in process(), a in name(), r in role()) {
        prop_assert_eq!(auth_subst(&p, &a, &r).erase(), p.erase());
    }

    #[test]
    fn auth_subst_discharges_every_free_occurrence(p in process(), a in name(), r in role()) {
        prop_assert_eq!(count_unauthorized_on(&auth_subst(&p, &a, &r), &a, &r), 0);
        prop_assert_eq!(free_names(&auth_subst(&p, &a, &r)), free_names(&p));
    }

    #[test]
    fn free_names_are_among_all_names(p in process()) {
        let all = all_names(&p);
        prop_assert!(free_names(&p).is_subset(&all));
    }

    #[test]
    fn restriction_hides_its_name(p in process(), n in name()) {
        let q = Process::restrict(n.clone(), None, p.clone());
        let mut expected = free_names(&p);
        expected.remove(&n);
        prop_assert_eq!(free_names(&q), expected);
    }

    #[test]
    fn printed_processes_parse_back(p in process()) {
        let text = print_process(&p);
        let back = parse_process(&text).map_err(|e| TestCaseError::fail(format!("{text}: {e}")))?;
        prop_assert!(alpha_equivalent(&back, &p), "{} reparsed as {}", text, print_process(&back));
    }

    #[test]
    fn canonical_form_is_a_fixpoint(p in process()) {
        let cf = canonicalize(&p);
        prop_assert_eq!(canonicalize(&cf.to_process()).key(), cf.key());
    }

    #[test]
    fn printed_types_parse_back(b in behavioral()) {
        let text = print_type(&b);
        let back = parse_type(&text).map_err(|e| TestCaseError::fail(format!("{text}: {e}")))?;
        prop_assert_eq!(normalize(&back), normalize(&b));
    }

    #[test]
    fn splits_conserve_labels_and_agree_with_check_split(b in behavioral()) {
        let Ok(pairs) = splits(&b, 64) else { return Ok(()) };
        let labels = labels_of(&b);
        for (x, y) in &pairs {
            prop_assert!(well_formed(x) && well_formed(y));
            let union: BTreeSet<_> = labels_of(x).union(&labels_of(y)).cloned().collect();
            prop_assert_eq!(&union, &labels, "{} = {} o {}", b, x, y);
            prop_assert!(check_split(&b, x, y), "{} = {} o {} not confirmed", b, x, y);
        }
    }

    #[test]
    fn trivial_split_exists_for_well_formed_types(b in behavioral()) {
        prop_assume!(well_formed(&b));
        prop_assert!(check_split(&b, &b, &Behavioral::End));
        prop_assert!(check_split(&b, &Behavioral::End, &b));
    }

    #[test]
    fn subtype_is_reflexive(b in behavioral()) {
        prop_assume!(well_formed(&b));
        prop_assert!(subtype(&b, &b));
    }

    #[test]
    fn type_steps_preserve_well_formedness(b in behavioral()) {
        prop_assume!(well_formed(&b));
        for next in type_steps(&b) {
            prop_assert!(well_formed(&next), "{} -> {}", b, next);
        }
    }
}
