//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

mod common;

use agreecsp::agree::{self, AgreementParams, DecodeOptions, FunctionFamily};
use agreecsp::csp::{self, Constraint, Csp2Instance, CspBruteForce};
use agreecsp::dsn::{self, Construction, DsnBruteForce, DsnError};
use agreecsp::exec::Exec;
use agreecsp::gen;
use agreecsp::ratio::{self, Rational};
use agreecsp::redblue::{self, RedBlueGraph};
use agreecsp::reduction::{self, BuildOptions, DecodeStatus, ParamSource, ReductionParams};
use agreecsp::setsys::{self, EnumOptions, SetSystem};
use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::{Duration, Instant};

type Outcome = Result<String, String>;

const EXEC: Exec = Exec::Parallel;

fn enum_opts() -> EnumOptions {
    EnumOptions { cap: 1 << 24, exec: EXEC }
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let solver = CspBruteForce { cap: u128::MAX, exec: EXEC };
    let mut largest = 0u128;
    for seed in 0..100u64 {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let nv = r.gen_range(8..=16);
        let nc = r.gen_range(4..=24.min(4 * nv / 3));
        let (f, _) = gen::gen_planted(nv, nc, 4, seed).map_err(|e| format!("seed {seed}: {e}"))?;
        let k = r.gen_range(2..=5);
        let alpha = if seed % 2 == 0 { 0.3 } else { 0.5 };
        let t = setsys::sample_random(f.num_clauses(), k, alpha, seed).map_err(|e| e.to_string())?;
        let a = reduction::build_2csp(&f, &t, &BuildOptions { var_cap: 24, exec: EXEC })
            .map_err(|e| format!("seed {seed}: {e}"))?;
        largest = largest.max(csp::search_space(&a.instance));
        let (val, _) = csp::csp_opt_bruteforce(&a.instance, &solver).map_err(|e| format!("seed {seed}: {e}"))?;
        if val != ratio::int(1) {
            return Err(format!("seed {seed}: val = {}", ratio::format(&val)));
        }
    }
    let took = start.elapsed();
    if took > Duration::from_secs(120) {
        return Err(format!("100 seeds took {took:.1?}"));
    }
    Ok(format!("100/100 instances with val = 1 in {took:.1?}, largest search space {largest}"))
}

/// Functions drawn from a few globals plus some uniformly random ones, so
/// both colours appear in the consistency graph.
fn mixed_family(s: &SetSystem, globals: usize, noise: f64, r: &mut ChaCha8Rng) -> FunctionFamily {
    let n = s.universe_size();
    let gs: Vec<Vec<bool>> = (0..globals).map(|_| (0..n).map(|_| r.gen()).collect()).collect();
    let values = (0..s.len())
        .map(|i| {
            if r.gen_bool(noise) {
                (0..s.set_size(i)).map(|_| r.gen()).collect()
            } else {
                let g = &gs[r.gen_range(0..globals)];
                s.elements(i).iter().map(|&x| g[x]).collect()
            }
        })
        .collect();
    FunctionFamily::new(s.clone(), values).expect("shapes match")
}

fn criterion_2() -> Outcome {
    let configs: [(usize, usize, Rational); 4] =
        [(1, 2, ratio::frac(1, 6)), (2, 2, ratio::frac(1, 6)), (1, 3, ratio::frac(1, 4)), (3, 2, ratio::frac(1, 6))];
    let mut found = 0;
    let mut attempts = 0u64;
    let mut nontrivial = 0;
    let mut max_seen = 0u128;
    while found < 50 {
        attempts += 1;
        if attempts > 20_000 {
            return Err(format!("only {found} disperser families after {attempts} draws"));
        }
        let (r, ell, zeta) = &configs[(attempts % 4) as usize];
        let mut rng = ChaCha8Rng::seed_from_u64(attempts);
        let s = setsys::sample_random(12, 9, 0.8, attempts).map_err(|e| e.to_string())?;
        if !setsys::check_disperser(&s, *r, *ell, zeta, &enum_opts()).map_err(|e| e.to_string())? {
            continue;
        }
        found += 1;
        let f = mixed_family(&s, 2, 0.3, &mut rng);
        let g = agree::build_consistency_graph(&f, &ratio::int(0), zeta, EXEC).map_err(|e| e.to_string())?;
        let q = AgreementParams { r: *r, ell: *ell, h: 1, zeta: zeta.clone(), mu: ratio::int(0), gamma: ratio::int(1) }
            .walk_bound();
        let rep = redblue::check_transitivity(&g, q, *ell, EXEC).map_err(|e| e.to_string())?;
        max_seen = max_seen.max(rep.worst_count);
        if rep.worst_count > 0 {
            nontrivial += 1;
        }
        if !rep.holds {
            return Err(format!(
                "draw {attempts} (r={r}, l={ell}): pair {:?} has {} red-filled walks > {q}",
                rep.worst_pair, rep.worst_count
            ));
        }
    }
    Ok(format!("50/50 disperser families transitive ({nontrivial} with red-filled walks, max count {max_seen})"))
}

fn criterion_3() -> Outcome {
    let gamma = ratio::frac(1, 3);
    let mu = ratio::frac(1, 8);
    let zeta = ratio::frac(1, 64);
    let zeta_prime = &mu + ratio::int(2) * &zeta / &gamma;
    let mut found = 0;
    let mut attempts = 0u64;
    let mut max_seen = 0u128;
    let mut red_pairs = 0usize;
    while found < 50 {
        attempts += 1;
        if attempts > 20_000 {
            return Err(format!("only {found} uniform families after {attempts} draws"));
        }
        let r = 2 + (attempts % 3) as usize;
        let s = setsys::sample_random(16, 10, 0.75, attempts).map_err(|e| e.to_string())?;
        if !setsys::check_all_subcollections_uniform(&s, r, &gamma, &mu, &enum_opts()).map_err(|e| e.to_string())? {
            continue;
        }
        found += 1;
        let mut rng = ChaCha8Rng::seed_from_u64(attempts);
        let f = mixed_family(&s, 3, 0.2, &mut rng);
        let g = agree::build_consistency_graph(&f, &zeta, &zeta_prime, EXEC).map_err(|e| e.to_string())?;
        red_pairs += g.red_edge_count();
        let rep = redblue::check_transitivity(&g, (r - 1) as u128, 2, EXEC).map_err(|e| e.to_string())?;
        max_seen = max_seen.max(rep.worst_count);
        if !rep.holds {
            return Err(format!(
                "draw {attempts} (r={r}): pair {:?} has {} red-filled 2-walks",
                rep.worst_pair, rep.worst_count
            ));
        }
    }
    Ok(format!("50/50 families, {red_pairs} red pairs in total, max rbb count {max_seen}"))
}

/// Blue clusters with red edges across them and a sprinkling of blue
/// cross edges.
fn clustered_graph(r: &mut ChaCha8Rng) -> RedBlueGraph {
    let k = r.gen_range(120..=200);
    let clusters = r.gen_range(2..=3);
    let p_in = r.gen_range(0.8..0.95);
    let p_red = r.gen_range(0.3..0.8);
    let p_cross = [0.0, 0.001, 0.003][r.gen_range(0..3)];
    let mut blue = Vec::new();
    let mut red = Vec::new();
    for u in 0..k {
        for v in u + 1..k {
            if u * clusters / k == v * clusters / k {
                if r.gen_bool(p_in) {
                    blue.push((u, v));
                }
            } else if r.gen_bool(p_cross) {
                blue.push((u, v));
            } else if r.gen_bool(p_red) {
                red.push((u, v));
            }
        }
    }
    RedBlueGraph::new(k, &blue, &red).expect("disjoint colours")
}

fn criterion_4() -> Outcome {
    let mut positive = 0;
    for seed in 0..50u64 {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let g = clustered_graph(&mut r);
        let ell0 = 2 + (seed % 2) as usize;
        let k = g.num_vertices();
        let q0 = redblue::check_transitivity(&g, 0, ell0, EXEC).map_err(|e| e.to_string())?.worst_count;
        let d0 = g.blue_edge_count() / (2 * k);
        let res = redblue::find_dense_subgraphs(&g, q0, ell0, d0, EXEC)
            .map_err(|e| format!("seed {seed} (q0={q0}, l0={ell0}, d0={d0}): {e}"))?;
        let direct = redblue::non_red_fraction(&g, &res.u1, &res.u2);
        let threshold = redblue::dense_threshold(q0, k, ell0, d0);
        if direct < threshold || direct != res.density || res.u1.len() < d0 || res.u2.len() < d0 {
            return Err(format!(
                "seed {seed}: density {} vs threshold {}",
                ratio::format(&direct),
                ratio::format(&threshold)
            ));
        }
        if threshold > ratio::int(0) {
            positive += 1;
        }
    }
    Ok(format!("50/50 graphs dense, {positive} with a positive threshold"))
}

fn criterion_5() -> Outcome {
    for seed in 0..200u64 {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let n = r.gen_range(4..=64);
        let k = r.gen_range(1..=12);
        let alpha = r.gen_range(0.2..0.9);
        let s = setsys::sample_random(n, k, alpha, seed).map_err(|e| e.to_string())?;
        let g = gen::random_global(n, seed);
        let flip = r.gen_range(0.0..0.5);
        let f = gen::noisy_family(&s, &g, flip, seed).map_err(|e| e.to_string())?;
        let zp = ratio::frac(r.gen_range(0..=8), 16);
        let size = r.gen_range(1..=k);
        let sub: Vec<usize> = (0..size).collect();
        let b = agree::check_majority_bound(&f, &sub, &zp, EXEC).map_err(|e| e.to_string())?;
        if !b.holds {
            return Err(format!(
                "seed {seed}: mean {} exceeds n*sqrt({} + {})",
                ratio::format(&b.mean_disagreement),
                ratio::format(&b.kappa),
                ratio::format(&zp)
            ));
        }
    }
    Ok("200/200 families within the majority bound".into())
}

/// Four distinct supports on 64 elements, each missing two elements of its own.
fn four_supports(k: usize) -> SetSystem {
    let sets = (0..k)
        .map(|i| {
            let g = i % 4;
            (0..64).filter(|&x| x != 2 * g && x != 2 * g + 1).collect()
        })
        .collect();
    SetSystem::new(64, sets).expect("valid sets")
}

fn criterion_6() -> Outcome {
    let k = 16384;
    let s = four_supports(k);
    let p = AgreementParams {
        r: 1,
        ell: 4,
        h: 23,
        zeta: ratio::frac(1, 8),
        mu: ratio::frac(1, 2),
        gamma: ratio::frac(1, 4),
    };
    let opts = enum_opts();
    let pre = setsys::check_disperser(&s, p.r, p.ell, &p.zeta, &opts).map_err(|e| e.to_string())?
        && setsys::check_all_subcollections_uniform(&s, p.h, &p.gamma, &p.mu, &opts).map_err(|e| e.to_string())?
        && setsys::check_sizes(&s, &ratio::frac(1, 2));
    if !pre {
        return Err("supports fail the set-system preconditions".into());
    }
    let h_formula = (8.0 * (2.0 / 0.5f64).ln() / 0.5).ceil() as usize;
    if h_formula != p.h {
        return Err(format!("h = {h_formula} from the schedule, {} used", p.h));
    }
    let mut worst_size = f64::INFINITY;
    let mut exact = 0;
    for seed in 0..50u64 {
        let fraction = 0.85 + 0.1 * (seed as f64) / 49.0;
        let pf = gen::planted_family(&s, fraction, seed).map_err(|e| e.to_string())?;
        // Without best effort the decoder refuses families below the agreement threshold.
        let res = agree::agreement_decode(&pf.family, &p, &DecodeOptions { exec: EXEC, seed, ..Default::default() })
            .map_err(|e| format!("seed {seed}: {e}"))?;
        if !res.within_theorem {
            return Err(format!("seed {seed}: agr {} below the theorem threshold", ratio::format(&res.agr_measured)));
        }
        if !res.checks.all() {
            return Err(format!("seed {seed}: checks {:?}", res.checks));
        }
        worst_size = worst_size.min(res.subcollection.len() as f64 / ratio::to_f64(&res.thresholds.size_bound));
        if res.global == pf.global {
            exact += 1;
        }
    }
    Ok(format!(
        "50/50 decodes pass every check, |U'| at least {worst_size:.1}x the size bound, {exact} exact recoveries"
    ))
}

fn criterion_7() -> Outcome {
    let mut certified = 0;
    let mut decoded = 0;
    let mut runs = 0;
    for seed in 0..60u64 {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let (f, planted) = gen::gen_planted(12, 16, 4, seed).map_err(|e| e.to_string())?;
        let t = setsys::sample_random(f.num_clauses(), 40, 0.3, seed).map_err(|e| e.to_string())?;
        let mut a =
            reduction::build_2csp(&f, &t, &BuildOptions { var_cap: 24, exec: EXEC }).map_err(|e| e.to_string())?;
        a.params = Some(ReductionParams {
            alpha: ratio::frac(3, 10),
            gamma: ratio::frac(3, 20),
            mu: ratio::frac(3, 10),
            zeta: ratio::frac(1, 48),
            ell: 2,
            r: 1,
            h: 5,
            k: BigUint::from(40u32),
            eps: ratio::frac(1, 2),
            delta: f.occurrence_bound(),
            source: ParamSource::Manual,
        });
        let noise = r.gen_range(0.0..0.3);
        let honest = a.labeling_of(&planted).expect("planted restriction satisfies T");
        let labels: Vec<usize> = (0..t.len())
            .map(|v| if r.gen_bool(noise) { r.gen_range(0..a.instance.alphabet_size(v)) } else { honest.labels[v] })
            .collect();
        let opts = DecodeOptions { exec: EXEC, seed, best_effort: true, ..Default::default() };
        let (_, rep) = reduction::decode_assignment(&a, &csp::Labeling::new(labels), &opts)
            .map_err(|e| format!("seed {seed}: {e}"))?;
        runs += 1;
        if rep.status != DecodeStatus::Decoded {
            continue;
        }
        decoded += 1;
        if rep.t_star_uniform != Some(true) {
            continue;
        }
        certified += 1;
        if rep.bound_holds != Some(true) {
            return Err(format!(
                "seed {seed}: value {} < bound {}",
                ratio::format(rep.value.as_ref().expect("decoded")),
                ratio::format(rep.decoding_bound.as_ref().expect("decoded"))
            ));
        }
    }
    if certified == 0 {
        return Err(format!("no certified decode among {runs} runs"));
    }
    Ok(format!("{certified} certified decodes of {decoded} decoded ({runs} runs), all meet the bound"))
}

/// Every complete 2-CSP on `sizes`, one per choice of allowed-pair sets.
fn all_csps(sizes: &[usize], out: &mut Vec<Csp2Instance>) {
    let k = sizes.len();
    let edges: Vec<(usize, usize)> = (0..k).flat_map(|u| (u + 1..k).map(move |v| (u, v))).collect();
    let cells: Vec<usize> = edges.iter().map(|&(u, v)| sizes[u] * sizes[v]).collect();
    let total: usize = cells.iter().sum();
    for mask in 0u64..1 << total {
        let mut off = 0;
        let cons = edges
            .iter()
            .zip(&cells)
            .map(|(&(u, v), &c)| {
                let (ru, cv) = (sizes[u], sizes[v]);
                let pairs = (0..c).filter(|&i| mask >> (off + i) & 1 == 1).map(|i| (i / cv, i % cv));
                let con = Constraint::from_pairs(ru, cv, pairs.collect::<Vec<_>>());
                off += c;
                con
            })
            .collect();
        out.push(Csp2Instance::with_sizes(sizes, cons).expect("shapes match"));
    }
}

struct DsnTally {
    cases: usize,
    completeness: Vec<String>,
    squared: Vec<String>,
    quarter: Vec<String>,
    demands: Vec<String>,
    infeasible: usize,
}

fn dsn_case(inst: &Csp2Instance, tally: &mut DsnTally) -> Result<(), String> {
    let k = inst.num_vertices();
    let d = dsn::build_dsn(inst, Construction::Layered);
    let (val, _) = csp::csp_opt_bruteforce(inst, &CspBruteForce { cap: u128::MAX, exec: Exec::Sequential })
        .map_err(|e| e.to_string())?;
    tally.cases += 1;
    if d.demands().len() != k * k - k {
        tally.demands.push(format!("sizes {:?}", inst.alphabet_sizes()));
    }
    // An empty constraint leaves its demand pair unreachable: opt is infinite,
    // soundness holds trivially, and completeness applies only if val = 1.
    let sol = match dsn::dsn_opt_bruteforce(&d, &DsnBruteForce { cap: 24, exec: EXEC }) {
        Err(DsnError::Infeasible) => {
            tally.infeasible += 1;
            if val == ratio::int(1) {
                tally.completeness.push(format!("sizes {:?} val 1 opt inf", inst.alphabet_sizes()));
            }
            return Ok(());
        }
        r => r.map_err(|e| e.to_string())?,
    };
    let opt = sol.cost;
    let label = || format!("sizes {:?} val {} opt {}", inst.alphabet_sizes(), ratio::format(&val), ratio::format(&opt));
    if val == ratio::int(1) && opt != ratio::int(1) {
        tally.completeness.push(label());
    }
    if val > ratio::int(0) {
        if !dsn::soundness_squared_holds(&opt, &val) {
            tally.squared.push(label());
        }
        if ratio::int(4) * &opt * &opt * &val < ratio::int(1) {
            tally.quarter.push(label());
        }
    }
    Ok(())
}

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let mut tally =
        DsnTally { cases: 0, completeness: vec![], squared: vec![], quarter: vec![], demands: vec![], infeasible: 0 };
    let mut instances = Vec::new();
    for k in 2..=3usize {
        for sizes_mask in 0..1u32 << k {
            let sizes: Vec<usize> = (0..k).map(|i| 1 + (sizes_mask >> i & 1) as usize).collect();
            all_csps(&sizes, &mut instances);
        }
    }
    let exhaustive = instances.len();
    for seed in 0..200u64 {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let k = r.gen_range(2..=4);
        let density = r.gen_range(0.2..0.9);
        instances.push(gen::random_csp(k, 2, density, seed).map_err(|e| e.to_string())?);
    }
    for inst in &instances {
        dsn_case(inst, &mut tally)?;
    }
    let took = start.elapsed();
    let mut fails = Vec::new();
    if !tally.demands.is_empty() {
        fails.push(format!("k' != k^2 - k on {} instances", tally.demands.len()));
    }
    if !tally.completeness.is_empty() {
        fails.push(format!("val = 1 but opt != 1 on {} instances", tally.completeness.len()));
    }
    if !tally.squared.is_empty() {
        fails.push(format!(
            "opt^2*val < 2 on {} of {} instances (e.g. {})",
            tally.squared.len(),
            tally.cases,
            tally.squared[0]
        ));
    }
    if took > Duration::from_secs(300) {
        fails.push(format!("took {took:.1?}"));
    }
    let info = format!(
        "{} instances ({exhaustive} exhaustive, 200 random, {} infeasible) in {took:.1?}; 4*opt^2*val >= 1 fails on {}",
        tally.cases,
        tally.infeasible,
        tally.quarter.len()
    );
    if fails.is_empty() {
        Ok(info)
    } else {
        Err(format!("{}; {info}", fails.join("; ")))
    }
}

fn compare(name: &str, got: &Rational, want: &common::Fx, errs: &mut Vec<String>) {
    if !common::rel_close(got, want, 1e-12) {
        errs.push(format!("{name}: {} vs {}", ratio::to_f64(got), common::to_f64(want)));
    }
}

fn compare_params(tag: &str, p: &ReductionParams, o: &common::OracleParams, errs: &mut Vec<String>) {
    let before = errs.len();
    compare("alpha", &p.alpha, &o.alpha, errs);
    compare("gamma", &p.gamma, &o.gamma, errs);
    compare("mu", &p.mu, &o.mu, errs);
    compare("zeta", &p.zeta, &o.zeta, errs);
    if p.ell != o.ell {
        errs.push(format!("ell: {} vs {}", p.ell, o.ell));
    }
    if p.k != o.k {
        errs.push(format!("k: {} vs {}", p.k, o.k));
    }
    if Some(p.r) != o.r.to_usize() {
        errs.push(format!("r: {} vs {}", p.r, o.r));
    }
    if Some(p.h) != o.h.to_usize() {
        errs.push(format!("h: {} vs {}", p.h, o.h));
    }
    for e in &mut errs[before..] {
        *e = format!("{tag}: {e}");
    }
}

fn criterion_9() -> Outcome {
    let mut errs = Vec::new();
    let mut cases = 0;
    let epss = [ratio::frac(1, 2), ratio::frac(1, 10), ratio::frac(3, 4)];
    for &m in &[16u64, 1000, 65536, 300_000, 1_000_000, 1 << 20, 123_456_789, 1 << 40, (1 << 62) + 12345] {
        for c in 0..3u32 {
            for eps in &epss {
                for delta in [3usize, 5] {
                    let p = reduction::instantiate_params_eth(m, c as f64, eps, delta).map_err(|e| e.to_string())?;
                    let o = common::eth(m, c, eps, delta);
                    compare_params(&format!("eth m={m} c={c}"), &p, &o, &mut errs);
                    cases += 1;
                }
            }
        }
    }
    let ks: Vec<BigUint> = [16u64, 100, 65536, 1_000_000, 1 << 25, 3 << 40]
        .iter()
        .map(|&x| BigUint::from(x))
        .chain([BigUint::one() << 200usize, (BigUint::one() << 300usize) + 7u32])
        .collect();
    for k in &ks {
        for eps in &epss {
            for delta in [3usize, 4] {
                let p = reduction::instantiate_params_gap_eth(k, eps, delta).map_err(|e| e.to_string())?;
                let o = common::gap_eth(k, eps, delta);
                compare_params(&format!("gap-eth k={k}"), &p, &o, &mut errs);
                cases += 1;
            }
        }
    }
    if errs.is_empty() {
        Ok(format!("{cases} parameter sets match the oracle"))
    } else {
        Err(format!("{} mismatches, first: {}", errs.len(), errs[0]))
    }
}

fn criterion_10() -> Outcome {
    let n = 12;
    let k = 8;
    let delta = ratio::frac(1, 4);
    let limit = 3; // δk + 1
    let mut worst = 0;
    let mut over = Vec::new();
    for seed in 0..20u64 {
        let s = setsys::sample_random(n, k, 0.75, seed).map_err(|e| e.to_string())?;
        let (f, _) = gen::block_planted_family(&s, 4, seed).map_err(|e| e.to_string())?;
        let agr = agree::agreement_probability(&f, &ratio::int(0), EXEC);
        if agr < delta {
            return Err(format!("seed {seed}: agr {} < 1/4", ratio::format(&agr)));
        }
        let tol = ratio::floor_count(&ratio::frac(1, 10), n).expect("nonnegative") as usize;
        let best = (0..1u32 << n)
            .map(|m| {
                let g: Vec<bool> = (0..n).map(|x| m >> x & 1 == 1).collect();
                (0..k).filter(|&i| agree::disagreement_with(&f, i, &g).expect("sizes match") <= tol).count()
            })
            .max()
            .unwrap_or(0);
        worst = worst.max(best);
        if best > limit {
            over.push(seed);
        }
    }
    let msg = format!("20 families, at most {worst} locals 0.1-consistent with any global, limit {limit}");
    if over.is_empty() {
        Ok(msg)
    } else {
        Err(format!("{msg}; exceeded on seeds {over:?}"))
    }
}

/// `(val, opt)` of the CSP with alphabet sizes `sizes` whose constraint on the
/// `p`-th pair allows `(a, b)` iff bit `2a + b` of `masks[p]` is set; opt is
/// `None` when no arc set connects every demand.
fn dsn_pair(sizes: &[usize], masks: &[u8]) -> (Rational, Option<Rational>) {
    let k = sizes.len();
    let pairs = (0..k).flat_map(|u| (u + 1..k).map(move |v| (u, v)));
    let cons = pairs
        .zip(masks)
        .map(|((u, v), &m)| {
            let allowed = (0..sizes[u])
                .flat_map(|a| (0..sizes[v]).map(move |b| (a, b)))
                .filter(|&(a, b)| m >> (2 * a + b) & 1 == 1);
            Constraint::from_pairs(sizes[u], sizes[v], allowed)
        })
        .collect();
    let inst = Csp2Instance::with_sizes(sizes, cons).expect("shapes match");
    let (val, _) =
        csp::csp_opt_bruteforce(&inst, &CspBruteForce { cap: u128::MAX, exec: Exec::Sequential }).expect("small");
    let d = dsn::build_dsn(&inst, Construction::Layered);
    match dsn::dsn_opt_bruteforce(&d, &DsnBruteForce { cap: 24, exec: Exec::Sequential }) {
        Ok(sol) => (val, Some(sol.cost)),
        Err(DsnError::Infeasible) => (val, None),
        Err(e) => panic!("{e}"),
    }
}

/// Every instance with `k ≤ 3` and `|Σ_v| ≤ 2`, smallest first; reports the first violation.
fn dsn_invariant(check: fn(&Rational, Option<&Rational>) -> Result<(), String>) -> Outcome {
    let mut count = 0;
    for k in 2..=3usize {
        let pairs = k * (k - 1) / 2;
        for size_bits in 0..1u32 << k {
            let sizes: Vec<usize> = (0..k).map(|i| 1 + (size_bits >> i & 1) as usize).collect();
            for code in 0..1u32 << (4 * pairs) {
                let masks: Vec<u8> = (0..pairs).map(|p| (code >> (4 * p) & 15) as u8).collect();
                // Bits outside an alphabet are dropped, so skip masks that repeat another.
                let fits = (0..k).flat_map(|u| (u + 1..k).map(move |v| (u, v))).zip(&masks).all(|((u, v), &m)| {
                    (0..4).all(|bit| m >> bit & 1 == 0 || (bit / 2 < sizes[u] && bit % 2 < sizes[v]))
                });
                if !fits {
                    continue;
                }
                count += 1;
                let (val, opt) = dsn_pair(&sizes, &masks);
                check(&val, opt.as_ref()).map_err(|why| format!("{why}; sizes {sizes:?}, pair masks {masks:?}"))?;
            }
        }
    }
    Ok(format!("all {count} instances with k <= 3, |alphabet| <= 2"))
}

/// dsn_opt = 1 ⇒ val = 1, the backward half of the completeness equivalence.
fn backward_completeness(val: &Rational, opt: Option<&Rational>) -> Result<(), String> {
    match opt {
        Some(o) if *o == ratio::int(1) && *val != ratio::int(1) => Err(format!("opt 1 but val {}", ratio::format(val))),
        _ => Ok(()),
    }
}

/// dsn_opt² · val ≥ 2 whenever val > 0; an unreachable demand means infinite cost.
fn squared_soundness(val: &Rational, opt: Option<&Rational>) -> Result<(), String> {
    match opt {
        Some(o) if *val > ratio::int(0) && !dsn::soundness_squared_holds(o, val) => {
            Err(format!("opt {} val {}", ratio::format(o), ratio::format(val)))
        }
        _ => Ok(()),
    }
}

/// check_disperser(S, r, ℓ, η) ⇒ check_disperser(S, r', ℓ, η) for r' ≤ r, on random small systems.
fn disperser_monotone_in_r() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut count = 0;
    for _ in 0..400 {
        let (m, k) = (rng.gen_range(2..=9), rng.gen_range(1..=6));
        let s = setsys::sample_random(m, k, rng.gen_range(0.2..0.9), rng.gen()).unwrap();
        for r in 2..=3usize {
            for ell in 1..=3usize {
                for q in 0..4 {
                    let eta = ratio::frac(q, 4);
                    if !setsys::check_disperser(&s, r, ell, &eta, &enum_opts()).unwrap() {
                        continue;
                    }
                    count += 1;
                    for r2 in 1..r {
                        if !setsys::check_disperser(&s, r2, ell, &eta, &enum_opts()).unwrap() {
                            return Err(format!(
                                "holds at r={r} but not r={r2}; l={ell}, eta={q}/4, sets {:?} over {m}",
                                s.sets().iter().map(|b| b.ones().collect::<Vec<_>>()).collect::<Vec<_>>()
                            ));
                        }
                    }
                }
            }
        }
    }
    Ok(format!("{count} holding parameter sets"))
}

type Check = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [(usize, fn() -> Outcome); 10] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
    ];
    // ACCEPTANCE_ONLY=<n> runs one criterion, ACCEPTANCE_ONLY=invariants the invariant checks.
    let filter = std::env::var("ACCEPTANCE_ONLY").ok();
    let only: Option<usize> = filter.as_deref().and_then(|s| s.parse().ok());
    let invariants_only = filter.as_deref() == Some("invariants");
    let mut failed = 0;
    for (id, run) in criteria {
        if invariants_only || only.is_some_and(|o| o != id) {
            continue;
        }
        let start = Instant::now();
        match run() {
            Ok(msg) => println!("criterion {id}: PASS ({msg}) [{:.1?}]", start.elapsed()),
            Err(msg) => {
                failed += 1;
                println!("criterion {id}: FAIL ({msg}) [{:.1?}]", start.elapsed());
            }
        }
    }
    let invariants: [Check; 3] = [
        ("disperser monotone in r", disperser_monotone_in_r),
        ("dsn backward completeness", || dsn_invariant(backward_completeness)),
        ("dsn squared soundness", || dsn_invariant(squared_soundness)),
    ];
    if filter.is_none() || invariants_only {
        for (name, run) in invariants {
            let start = Instant::now();
            match run() {
                Ok(msg) => println!("invariant {name}: PASS ({msg}) [{:.1?}]", start.elapsed()),
                Err(msg) => {
                    failed += 1;
                    println!("invariant {name}: FAIL ({msg}) [{:.1?}]", start.elapsed());
                }
            }
        }
    }
    if failed > 0 {
        println!("{failed} checks failed");
        std::process::exit(1);
    }
}
