use std::hint::black_box;

use authpi::meta::preservation_check;
use authpi::split::splits;
use authpi::{check_process, explore, parse_file, parse_type};
use authpi_bench::{fixture, fixture_source};
use criterion::{criterion_group, criterion_main, Criterion};

const FIXTURES: &[&str] = &["example2_P.cal", "example2_Q.cal", "sys.cal", "delegation_chain.cal"];

fn parsing(c: &mut Criterion) {
    for name in FIXTURES {
        let src = fixture_source(name);
        c.bench_function(&format!("parse/{name}"), |b| b.iter(|| parse_file(black_box(&src))));
    }
}

fn checking(c: &mut Criterion) {
    for name in FIXTURES {
        let file = fixture(name);
        let (linear, shared) = (file.linear_env(), file.shared_env());
        let main = file.proc("main").unwrap().clone();
        c.bench_function(&format!("check/{name}"), |b| {
            b.iter(|| check_process(&linear, &shared, black_box(&main)))
        });
    }
}

fn exploring(c: &mut Criterion) {
    for name in FIXTURES {
        let main = fixture(name).proc("main").unwrap().clone();
        c.bench_function(&format!("explore/{name}"), |b| b.iter(|| explore(black_box(&main), 10_000)));
    }
}

fn preservation(c: &mut Criterion) {
    let file = fixture("sys.cal");
    let main = file.proc("main").unwrap().clone();
    c.bench_function("preservation/sys.cal", |b| {
        b.iter(|| preservation_check("sys", &file.linear_env(), &file.shared_env(), black_box(&main), 10_000))
    });
}

fn splitting(c: &mut Criterion) {
    let global = fixture("sys.cal").typedefs[0].1.clone();
    let slice = parse_type("?p auth1(role rev).tau p s auth2(role rev).?rev extend(end).tau s p report(end).!rev final(end).end").unwrap();
    c.bench_function("splits/sys-global", |b| b.iter(|| splits(black_box(&global), 64)));
    c.bench_function("splits/prof-slice", |b| b.iter(|| splits(black_box(&slice), 64)));
}

criterion_group!(benches, parsing, checking, exploring, preservation, splitting);
criterion_main!(benches);
