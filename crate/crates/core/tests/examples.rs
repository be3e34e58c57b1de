use std::collections::BTreeSet;
use std::path::PathBuf;

use authpi::env::{env_split, env_step};
use authpi::split::splits;
use authpi::syntax::{alpha_equivalent, auth_subst, fresh_name, free_names, subst_name};
use authpi::types::{apart, labels_of, matched, subtype, type_equiv, type_steps, well_formed};
use authpi::{
    canonicalize, check_process, enabled_steps, explore, funauth, is_auth_error, parse_file,
    parse_process, parse_type, print_process, reachable_errors, step, struct_equiv, well_typed,
    AuthSet, Behavioral, LinearEnv, Name, QualifiedRole, SharedEnv, SourceFile, TypeErrorReason,
};

fn fixture(name: &str) -> SourceFile {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name);
    let src = std::fs::read_to_string(&path).unwrap();
    parse_file(&src).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn fixtures() -> Vec<(String, SourceFile)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures");
    let mut out: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "cal"))
        .map(|p| {
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            (name.clone(), fixture(&name))
        })
        .collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

fn p(src: &str) -> authpi::Process {
    parse_process(src).unwrap_or_else(|e| panic!("{src}: {e}"))
}

fn t(src: &str) -> Behavioral {
    parse_type(src).unwrap_or_else(|e| panic!("{src}: {e}"))
}

fn names(xs: &[&str]) -> BTreeSet<Name> {
    xs.iter().map(|x| Name::from(*x)).collect()
}

#[test]
fn free_names_examples() {
    assert!(free_names(&p("0")).is_empty());
    assert_eq!(free_names(&p("a!{+q}l2(b).0")), names(&["a", "b"]));
    let sys = fixture("sys.cal");
    assert_eq!(free_names(sys.proc("main").unwrap()), names(&["assist", "journal"]));
}

#[test]
fn fresh_name_examples() {
    let b = Name::from("b");
    assert_eq!(fresh_name(&b, &BTreeSet::new()), b);
    assert_eq!(fresh_name(&b, &names(&["b"])), Name::from("b1"));
    assert_eq!(fresh_name(&b, &names(&["b", "b1"])), Name::from("b2"));
}

#[test]
fn alpha_equivalence_examples() {
    assert!(alpha_equivalent(&p("new b . b!{+q}l(c).0"), &p("new d . d!{+q}l(c).0")));
    assert!(!alpha_equivalent(&p("new b . b!{+q}l(c).0"), &p("new b . b!{+q}l(b).0")));
    assert!(alpha_equivalent(&p("a?{+r}l(x).x!{+r}m().0"), &p("a?{+r}l(y).y!{+r}m().0")));
}

#[test]
fn substitution_examples() {
    let (b, c) = (Name::from("b"), Name::from("c"));
    assert_eq!(subst_name(&p("c?{-s}l3().0"), &b, &c), p("b?{-s}l3().0"));
    assert_eq!(subst_name(&p("0"), &b, &c), p("0"));
    assert_eq!(
        subst_name(&p("new b . c!{+q}l(b).0"), &b, &c),
        p("new b1 . b!{+q}l(b1).0")
    );
}

#[test]
fn auth_subst_examples() {
    let q2 = p("assist!{+p}read(subm).subm!{+p}auth2<-rev>.subm?{+p}report().subm!{-rev}final().0");
    assert_eq!(
        auth_subst(&q2, &Name::from("subm"), &"rev".into()),
        p("assist!{+p}read(subm).subm!{+p}auth2<+rev>.subm?{+p}report().subm!{+rev}final().0")
    );
    let stuck = p("b?{-s}l3().0");
    assert_eq!(auth_subst(&stuck, &Name::from("c"), &"s".into()), stuck);
    assert_eq!(
        auth_subst(&p("b?{-s}l3().0 | new b . b!{-s}m().0"), &Name::from("b"), &"s".into()),
        p("b?{+s}l3().0 | new b . b!{-s}m().0")
    );
}

#[test]
fn parse_diagnostics() {
    let err = parse_process("a!{+q l(b).0").unwrap_err();
    let d = &err.0[0];
    assert!(d.message.contains("unclosed qualification brace"), "{}", d.message);
    assert_eq!(d.span.column, 3);

    let empty = parse_file("").unwrap();
    assert!(empty.procs.is_empty() && empty.linear.is_empty() && empty.shared.is_empty());

    let err = parse_file("typedef X = Y; typedef Y = X;").unwrap_err();
    assert!(err.0.iter().any(|d| d.message.contains("cyclic typedef")), "{err}");
}

#[test]
fn printing_examples() {
    assert_eq!(print_process(&p("0")), "0");
    assert_eq!(print_process(&p("0 | a!{+q}l(b).0")), "0 | a!{+q}l(b).0");
}

#[test]
fn canonical_form_examples() {
    let cf = canonicalize(&p("0 | 0"));
    assert!(cf.restricted.is_empty() && cf.threads.is_empty());

    let cf = canonicalize(&p("(new b)(b!{+q}l3<>.0 | b?{-s}l3().0)"));
    assert_eq!(cf.restricted_names(), vec![Name::from("b")]);
    assert_eq!(cf.threads.len(), 2);

    let cf = canonicalize(&p("new a . (0 | new a . a!{+r}m().0)"));
    assert_eq!(cf.restricted.len(), 1);
    assert_eq!(cf.threads.len(), 1);
    assert!(struct_equiv(&cf.to_process(), &p("new a1 . a1!{+r}m().0")));
}

#[test]
fn structural_congruence_examples() {
    let x = "a!{+q}l(c).0";
    assert!(struct_equiv(&p(&format!("{x} | 0")), &p(x)));
    assert!(struct_equiv(
        &p(&format!("(new b)({x} | b!{{+q}}m().0)")),
        &p(&format!("{x} | (new b)b!{{+q}}m().0"))
    ));
}

#[test]
fn example_p_reduces_as_displayed() {
    let file = fixture("example2_P.cal");
    let main = file.proc("main").unwrap();
    let steps = enabled_steps(main);
    assert_eq!(steps.len(), 1);
    let label = &steps[0].0;
    assert_eq!(
        (label.channel.as_str(), label.label.as_str(), label.sender.as_str(), label.receiver.as_str()),
        ("a", "l2", "q", "r")
    );

    let s1 = step(main, 0).unwrap();
    assert!(struct_equiv(
        &s1,
        &p("(new b)(b?{+r}l1<s>.b?{-s}l3().0 | b!{+q}l1<+s>.b!{+q}l3<>.0)")
    ));
    let s2 = step(&s1, 0).unwrap();
    assert!(struct_equiv(&s2, &p("(new b)(b?{+s}l3().0 | b!{+q}l3<>.0)")));
    assert!(step(&p("0"), 0).is_err());
}

#[test]
fn stuck_states_have_no_steps() {
    assert!(enabled_steps(&p("(new b)(b!{+q}l3<>.0 | b?{-s}l3().0)")).is_empty());
    assert!(enabled_steps(&p("a!{+q}l<+s>.0 | a?{+r}l<t>.0")).is_empty());
}

#[test]
fn authorization_error_examples() {
    assert!(is_auth_error(&p("(new b)(b!{+q}l3<>.0 | b?{-s}l3().0)")));
    assert!(!is_auth_error(&p("0")));
    assert!(!is_auth_error(&p("a!{+r}m().b?{-s}l().0")));
}

#[test]
fn exploration_examples() {
    let nil = explore(&p("0"), 10).unwrap();
    assert_eq!((nil.states.len(), nil.edges.len()), (1, 0));

    let q = fixture("example2_Q.cal");
    let space = explore(q.proc("main").unwrap(), 100).unwrap();
    assert_eq!(space.error_states.len(), 1);

    let sys = fixture("sys.cal");
    assert!(reachable_errors(sys.proc("main").unwrap(), 1000).unwrap().is_empty());

    let witnesses = reachable_errors(q.proc("main").unwrap(), 100).unwrap();
    assert_eq!(witnesses.len(), 1);
    let trace = &witnesses[0].0;
    assert_eq!(trace.len(), 2);
    assert_eq!((trace[0].channel.as_str(), trace[0].label.as_str()), ("b", "l1"));
    assert_eq!((trace[1].channel.as_str(), trace[1].label.as_str()), ("a", "l2"));

    let immediate = reachable_errors(&p("b?{-s}l().0"), 10).unwrap();
    assert_eq!(immediate.len(), 1);
    assert!(immediate[0].0.is_empty());
}

#[test]
fn label_and_apartness_examples() {
    assert!(labels_of(&t("end")).is_empty());
    let b = t("tau q r l1(role s).tau q s l3(end).end");
    assert_eq!(labels_of(&b).iter().map(|l| l.as_str()).collect::<Vec<_>>(), ["l1", "l3"]);
    assert_eq!(labels_of(&t("!r l(?s m(end).end).end")).len(), 2);

    let student = t("dia(?p report(end).!rev final(end).end)");
    assert!(apart(&t("end"), &student));
    assert!(!apart(&t("!s report(end).end"), &student));
    assert!(apart(&t("?rev extend(end).end"), &student));
}

#[test]
fn well_formedness_and_equivalence_examples() {
    assert!(!well_formed(&t("dia(tau q r l(end).end)")));
    assert!(well_formed(&t("dia(!e extend(end).?e final(end).end)")));
    assert!(!well_formed(&t("(!q l(end).end) | (?r l(end).end)")));

    assert!(type_equiv(&t("end | end"), &t("end")));
    assert!(type_equiv(&t("dia dia !r l(end).end"), &t("dia !r l(end).end")));
    assert!(!type_equiv(&t("!r l(end).end"), &t("?r l(end).end")));
}

#[test]
fn subtype_examples() {
    assert!(subtype(
        &t("!e extend(end).?e final(end).end"),
        &t("dia(!e extend(end).?e final(end).end)")
    ));
    assert!(!subtype(&t("tau q r l(end).end"), &t("dia(tau q r l(end).end)")));
}

#[test]
fn split_examples() {
    let end = splits(&t("end"), 64).unwrap();
    assert!(end.iter().all(|(x, y)| x.is_end() && y.is_end()));
    assert!(!end.is_empty());

    let b = splits(&t("tau q r l1(role s).tau q s l3(end).end"), 64).unwrap();
    assert!(b.contains(&(t("!q l1(role s).!q l3(end).end"), t("?r l1(role s).?s l3(end).end"))));

    let report = splits(&t("tau s p report(end).!rev final(end).end"), 64).unwrap();
    assert!(report.contains(&(t("!s report(end).end"), t("?p report(end).!rev final(end).end"))));
}

#[test]
fn matched_and_step_examples() {
    let sys = fixture("sys.cal");
    assert!(matched(&sys.typedefs.iter().find(|(n, _)| n.as_str() == "Global").unwrap().1));
    assert!(!matched(&t("!q l1(role s).end")));
    assert!(!matched(&t("tau q r l(?s m(end).end).end")));

    assert_eq!(
        type_steps(&t("tau q r l1(role s).tau q s l3(end).end")),
        vec![t("tau q s l3(end).end")]
    );
    assert!(type_steps(&t("end")).is_empty());
    assert_eq!(type_steps(&t("(tau a b l(end).end) | (tau c d m(end).end)")).len(), 2);
}

#[test]
fn environment_examples() {
    let env = |pairs: &[(&str, &str)]| -> LinearEnv {
        pairs.iter().map(|(a, b)| (Name::from(*a), t(b))).collect()
    };
    let full = env(&[("b", "tau q r l1(role s).tau q s l3(end).end")]);
    assert_eq!(env_step(&full, &full), Ok(true));
    assert_eq!(env_step(&full, &env(&[("b", "tau q s l3(end).end")])), Ok(true));
    assert_eq!(env_step(&env(&[("b", "end")]), &env(&[("b", "!q l(end).end")])), Ok(false));

    let empty: Vec<_> = env_split(&LinearEnv::new()).unwrap().collect();
    assert_eq!(empty, vec![(LinearEnv::new(), LinearEnv::new())]);

    let a_end = env(&[("a", "end")]);
    let parts: Vec<_> = env_split(&a_end).unwrap().collect();
    for want in [
        (a_end.clone(), LinearEnv::new()),
        (LinearEnv::new(), a_end.clone()),
        (a_end.clone(), a_end.clone()),
    ] {
        assert!(parts.contains(&want), "missing {want:?}");
    }

    let parts: Vec<_> = env_split(&full).unwrap().collect();
    assert!(parts.contains(&(
        env(&[("b", "!q l1(role s).!q l3(end).end")]),
        env(&[("b", "?r l1(role s).?s l3(end).end")])
    )));
}

#[test]
fn funauth_examples() {
    let a = Name::from("a");
    assert_eq!(
        funauth(&a, &QualifiedRole::unauthorized("q")),
        AuthSet::singleton(a.clone(), "q".into())
    );
    assert!(funauth(&a, &QualifiedRole::authorized("q")).is_empty());
}

#[test]
fn checker_examples() {
    let pf = fixture("example2_P.cal");
    let checked = check_process(&pf.linear_env(), &pf.shared_env(), pf.proc("main").unwrap()).unwrap();
    assert!(checked.sigma.is_empty());

    let qf = fixture("example2_Q.cal");
    assert!(check_process(&qf.linear_env(), &qf.shared_env(), qf.proc("main").unwrap()).is_err());
    assert!(!well_typed(&qf.linear_env(), &qf.shared_env(), qf.proc("main").unwrap()));

    let linear: LinearEnv = [(Name::from("a"), t("!q l(role s).end"))].into();
    let checked = check_process(&linear, &SharedEnv::new(), &p("a!{+q}l<-s>.0")).unwrap();
    assert_eq!(checked.sigma, AuthSet::singleton("a".into(), "s".into()));

    let sys = fixture("sys.cal");
    assert!(well_typed(&sys.linear_env(), &sys.shared_env(), sys.proc("main").unwrap()));
    let all_end: LinearEnv = [(Name::from("a"), t("end"))].into();
    assert!(well_typed(&all_end, &SharedEnv::new(), &p("0")));

    let bad = fixture("sys_bad_role.cal");
    assert!(!well_typed(&bad.linear_env(), &bad.shared_env(), bad.proc("main").unwrap()));
}

#[test]
fn shared_channel_under_unauthorized_role_is_rejected() {
    let f = fixture("shared_unauthorized.cal");
    let errs = check_process(&f.linear_env(), &f.shared_env(), f.proc("main").unwrap()).unwrap_err();
    assert_eq!(errs[0].reason, TypeErrorReason::SharedUnauthorized);
}

#[test]
fn checking_is_deterministic() {
    for (name, file) in fixtures() {
        for (_, proc_) in &file.procs {
            let once = check_process(&file.linear_env(), &file.shared_env(), proc_);
            let twice = check_process(&file.linear_env(), &file.shared_env(), proc_);
            assert_eq!(once, twice, "{name}");
        }
    }
}

#[test]
fn derivations_replay_node_by_node() {
    for (name, file) in fixtures() {
        for (_, proc_) in &file.procs {
            let Ok(checked) = check_process(&file.linear_env(), &file.shared_env(), proc_) else {
                continue;
            };
            for node in checked.derivation.nodes() {
                let j = &node.conclusion;
                let again = check_process(&j.linear, &j.shared, &j.subject)
                    .unwrap_or_else(|e| panic!("{name}: node {} fails to replay: {e:?}", node.rule));
                assert!(
                    again.sigma.iter().all(|(a, r)| j.sigma.contains(a, r)),
                    "{name}: {} replays with Σ = {} not within {}",
                    node.rule,
                    again.sigma,
                    j.sigma
                );
            }
        }
    }
}

#[test]
fn unused_end_channel_does_not_change_the_verdict() {
    let spare = Name::from("spare");
    for (name, file) in fixtures() {
        for (_, proc_) in &file.procs {
            let mut linear = file.linear_env();
            let before = check_process(&linear, &file.shared_env(), proc_).map(|c| c.sigma);
            linear.insert(spare.clone(), Behavioral::End);
            let after = check_process(&linear, &file.shared_env(), proc_).map(|c| c.sigma);
            assert_eq!(before.is_ok(), after.is_ok(), "{name}");
            if let (Ok(x), Ok(y)) = (before, after) {
                assert_eq!(x, y, "{name}");
            }
        }
    }
}

#[test]
fn well_typed_fixtures_are_not_errors() {
    for (name, file) in fixtures() {
        for (_, proc_) in &file.procs {
            if well_typed(&file.linear_env(), &file.shared_env(), proc_) {
                assert!(!is_auth_error(proc_), "{name}");
            }
        }
    }
}

#[test]
fn fixtures_round_trip_through_the_printer() {
    for (name, file) in fixtures() {
        for (proc_name, proc_) in &file.procs {
            let text = print_process(proc_);
            let back = parse_process(&text).unwrap_or_else(|e| panic!("{name}/{proc_name}: {e}"));
            assert!(alpha_equivalent(&back, proc_), "{name}/{proc_name}: {text}");
        }
        for b in file.linear.iter().map(|(_, b)| b).chain(file.typedefs.iter().map(|(_, b)| b)) {
            let back = parse_type(&authpi::print_type(b)).unwrap();
            assert!(type_equiv(&back, b), "{name}: {b}");
        }
    }
}
