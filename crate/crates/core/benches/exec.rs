use agreecsp::agree;
use agreecsp::csp::{self, CspBruteForce};
use agreecsp::dsn::{self, Construction, DsnBruteForce};
use agreecsp::exec::Exec;
use agreecsp::gen;
use agreecsp::ratio;
use agreecsp::setsys;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn csp_bruteforce(c: &mut Criterion) {
    let inst = gen::random_csp(9, 4, 0.6, 3).unwrap();
    let mut group = c.benchmark_group("csp_opt_bruteforce");
    for (name, exec) in MODES {
        let opts = CspBruteForce { exec, ..CspBruteForce::default() };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| csp::csp_opt_bruteforce(&inst, &opts).unwrap())
        });
    }
    group.finish();
}

fn consistency_graph(c: &mut Criterion) {
    let supports = setsys::sample_random(512, 96, 0.5, 5).unwrap();
    let global = gen::random_global(512, 6);
    let family = gen::noisy_family(&supports, &global, 0.1, 7).unwrap();
    let (zeta, zeta2) = (ratio::frac(1, 20), ratio::frac(1, 10));
    let mut group = c.benchmark_group("build_consistency_graph");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| agree::build_consistency_graph(&family, &zeta, &zeta2, exec).unwrap())
        });
    }
    group.finish();
}

fn dsn_bruteforce(c: &mut Criterion) {
    let inst = gen::random_csp(3, 2, 0.8, 11).unwrap();
    let d = dsn::build_dsn(&inst, Construction::Layered);
    let mut group = c.benchmark_group("dsn_opt_bruteforce");
    for (name, exec) in MODES {
        let opts = DsnBruteForce { cap: 24, exec };
        group.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| dsn::dsn_opt_bruteforce(&d, &opts)));
    }
    group.finish();
}

criterion_group!(benches, csp_bruteforce, consistency_graph, dsn_bruteforce);
criterion_main!(benches);
