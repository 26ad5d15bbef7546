//! Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
//! Pass criterion numbers as arguments to run a subset.

use std::collections::{BTreeMap, BTreeSet};
use std::panic;
use std::time::Instant;

use lwpir::asymptotic::{
    eval_exact_pwl, exact_breakpoints, inv, kkt_inner_solve, pairs_or_all, pwl_lp_solve, symmetric_family_exact,
    symmetric_family_pwl, DEFAULT_PROFILE_BUDGET,
};
use lwpir::compressor::{catalog_pool_two_files, kv_average_distortion, kv_wpir_lc_curve, pool_points, sa_search, SaConfig};
use lwpir::figures::fig1;
use lwpir::lp::{build_and_solve_lp, Method};
use lwpir::numeric::{int, rat_to_f64, ratio, Rational};
use lwpir::ratedist::{hb, pwl_approximate, uniform_grid, RateDistortionCurve};
use lwpir::response_enum::{enumerate_partitions, vertex_filter};
use lwpir::scheme::{
    block_split, evaluate, file_subset_compose, reencode_joint, simulate, symmetrize, Query, Response, Scheme,
    DEFAULT_JOINT_CAP,
};
use lwpir::source_coding::{state_digits, ResponseFunction};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)*) => {
        if !$cond {
            return Err(format!($($msg)*));
        }
    };
}

fn r(s: &str) -> Rational {
    lwpir::numeric::parse_rational(s).unwrap()
}

fn main() {
    let checks: [(u32, &str, f64, fn() -> Outcome); 13] = [
        (1, "partition table for two 1-bit files", 1.0, c01_partition_table),
        (2, "vertex filter keeps four points, LP unchanged", 5.0, c02_vertex_filter),
        (3, "M=2, beta=1 closed form", 5.0, c03_two_one_bit_files),
        (4, "M=2, beta=2 closed form on the catalog pool", 10.0, c04_two_two_bit_files),
        (5, "symmetric family at L=1/M and L=1", 30.0, c05_symmetric_endpoints),
        (6, "KKT allocation for the pairs-or-all queries", 1.0, c06_kkt_allocation),
        (7, "K=64 envelope below random pairs", 5.0, c07_kary_envelope),
        (8, "block split, joint code and 8-group composition", 5.0, c08_composition),
        (9, "symmetrize equalizes 50 random schemes", 10.0, c09_symmetrize),
        (10, "Monte Carlo within 4 sigma on 10 random schemes", 60.0, c10_monte_carlo),
        (11, "random-coding bound properties", 60.0, c11_kv_bound),
        (12, "annealing search for balanced maps", 600.0, c12_annealing),
        (13, "symmetric family vs profile LP", 300.0, c13_cross_solver),
    ];
    let only: BTreeSet<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (n, name, limit, check) in checks {
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let t = Instant::now();
        let res = panic::catch_unwind(check).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = t.elapsed().as_secs_f64();
        let res = res.and_then(|_| if secs <= limit { Ok(()) } else { Err(format!("runtime {secs:.1}s over {limit}s")) });
        match res {
            Ok(()) => println!("PASS {n:>2} {name} ({secs:.2}s)"),
            Err(e) => {
                failed += 1;
                println!("FAIL {n:>2} {name} ({secs:.2}s): {e}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}

/// Blocks of a labeling of {00, 01, 10, 11} as sorted strings, e.g. "00,11|01|10".
fn blocks_key(labels: &[u32]) -> String {
    let mut blocks: BTreeMap<u32, Vec<String>> = BTreeMap::new();
    for (s, &l) in labels.iter().enumerate() {
        let d = state_digits(2, 2, s as u64);
        blocks.entry(l).or_default().push(format!("{}{}", d[0], d[1]));
    }
    let mut parts: Vec<String> = blocks.into_values().map(|b| b.join(",")).collect();
    parts.sort();
    parts.join("|")
}

/// (partition, R, D1, D2) for every partition of {0,1}², file 1 being the first bit.
fn partition_table() -> Vec<(&'static str, [&'static str; 3])> {
    vec![
        ("00|01|10|11", ["2", "0", "0"]),
        ("00,11|01|10", ["3/2", "1/4", "1/4"]),
        ("00,10|01|11", ["3/2", "1/4", "0"]),
        ("00,01|10|11", ["3/2", "0", "1/4"]),
        ("00|01,11|10", ["3/2", "1/4", "0"]),
        ("00|01,10|11", ["3/2", "1/4", "1/4"]),
        ("00|01|10,11", ["3/2", "0", "1/4"]),
        ("00,01,11|10", ["1", "1/4", "1/4"]),
        ("00,01,10|11", ["1", "1/4", "1/4"]),
        ("00,10,11|01", ["1", "1/4", "1/4"]),
        ("00|01,10,11", ["1", "1/4", "1/4"]),
        ("00,01|10,11", ["1", "0", "1/2"]),
        ("00,10|01,11", ["1", "1/2", "0"]),
        ("00,11|01,10", ["1", "1/2", "1/2"]),
        ("00,01,10,11", ["0", "1/2", "1/2"]),
    ]
}

fn table_points() -> Vec<Vec<Rational>> {
    enumerate_partitions(4, 15)
        .unwrap()
        .map(|labels| ResponseFunction::from_labels(2, 2, 1, &labels).unwrap().point())
        .collect()
}

fn c01_partition_table() -> Outcome {
    let table: BTreeMap<&str, Vec<Rational>> =
        partition_table().into_iter().map(|(k, v)| (k, v.iter().map(|x| r(x)).collect())).collect();
    let mut seen = BTreeSet::new();
    for labels in enumerate_partitions(4, 15).map_err(|e| e.to_string())? {
        let key = blocks_key(&labels);
        let p = ResponseFunction::from_labels(2, 2, 1, &labels).map_err(|e| e.to_string())?.point();
        let want = table.get(key.as_str()).ok_or_else(|| format!("unexpected partition {key}"))?;
        ensure!(&p == want, "{key}: got {p:?}, table has {want:?}");
        seen.insert(key);
    }
    ensure!(seen.len() == 15, "{} distinct partitions", seen.len());
    Ok(())
}

fn filtered_points() -> Vec<Vec<Rational>> {
    [["2", "0", "0"], ["1", "0", "1/2"], ["1", "1/2", "0"], ["0", "1/2", "1/2"]]
        .iter()
        .map(|p| p.iter().map(|x| r(x)).collect())
        .collect()
}

fn grid(lo: &Rational, hi: &Rational, n: i64) -> Vec<Rational> {
    (0..n).map(|i| lo + (hi - lo) * ratio(i, n - 1)).collect()
}

fn lp(points: &[Vec<Rational>], m: usize, d: &Rational, l: &Rational) -> Result<Option<Rational>, String> {
    build_and_solve_lp(points, m, d, l, Method::Auto).map(|s| s.objective).map_err(|e| e.to_string())
}

fn c02_vertex_filter() -> Outcome {
    let all = table_points();
    let keep = vertex_filter(&all).map_err(|e| e.to_string())?;
    let kept: BTreeSet<Vec<Rational>> = keep.iter().map(|&i| all[i].clone()).collect();
    let want: BTreeSet<Vec<Rational>> = filtered_points().into_iter().collect();
    ensure!(keep.len() == 4 && kept == want, "kept {kept:?}");
    for d in grid(&int(0), &ratio(1, 2), 9) {
        for l in grid(&ratio(1, 2), &int(1), 5) {
            let full = lp(&all, 2, &d, &l)?;
            let filt = lp(&filtered_points(), 2, &d, &l)?;
            ensure!(full == filt, "D={d}, L={l}: {full:?} vs {filt:?}");
        }
    }
    Ok(())
}

fn c03_two_one_bit_files() -> Outcome {
    let closed = |d: &Rational, l: &Rational| {
        if d <= &(int(1) - l) {
            int(3) - int(2) * l - int(4) * d
        } else {
            int(1) - int(2) * d
        }
    };
    let mut count = 0;
    for l in grid(&ratio(1, 2), &int(1), 5) {
        for d in grid(&int(0), &ratio(1, 2), 5) {
            let got = lp(&filtered_points(), 2, &d, &l)?.ok_or("infeasible")?;
            ensure!(got == closed(&d, &l), "D={d}, L={l}: {got} vs {}", closed(&d, &l));
            count += 1;
        }
    }
    ensure!(count == 25, "{count} points");
    Ok(())
}

/// Five linear pieces in D with breakpoints scaled by (1 − L).
fn two_two_bit_closed_form(d: &Rational, l: &Rational) -> Rational {
    let u = int(1) - l;
    if d <= &(&u / int(4)) {
        -ratio(11, 2) * d + int(3) - int(2) * l
    } else if d <= &(int(3) * &u / int(8)) {
        -int(5) * d + (int(23) - int(15) * l) / int(8)
    } else if d <= &(int(5) * &u / int(8)) {
        -int(4) * d + (int(5) - int(3) * l) / int(2)
    } else if d <= &u {
        -ratio(8, 3) * d + (int(5) - int(2) * l) / int(3)
    } else {
        -int(2) * d + int(1)
    }
}

fn c04_two_two_bit_files() -> Outcome {
    let points = pool_points(&catalog_pool_two_files()).map_err(|e| e.to_string())?;
    for l in [ratio(1, 2), ratio(3, 4), int(1)] {
        let u = int(1) - &l;
        let bps = [int(0), &u / int(4), int(3) * &u / int(8), int(5) * &u / int(8), u.clone(), ratio(1, 2)];
        let mut ds: BTreeSet<Rational> = bps.iter().cloned().collect();
        for w in bps.windows(2) {
            ds.insert((&w[0] + &w[1]) / int(2));
        }
        for d in ds {
            let got = lp(&points, 2, &d, &l)?.ok_or_else(|| format!("infeasible at D={d}"))?;
            let want = two_two_bit_closed_form(&d, &l);
            ensure!(got == want, "L={l}, D={d}: {got} vs {want}");
        }
    }
    let at = lp(&points, 2, &ratio(5, 16), &ratio(1, 2))?;
    ensure!(at == Some(ratio(1, 2)), "L=1/2, D=5/16: {at:?}");
    Ok(())
}

fn binary_pwl(points: usize) -> (RateDistortionCurve, f64) {
    pwl_approximate(&RateDistortionCurve::binary(), &uniform_grid(0.5, points)).unwrap()
}

fn c05_symmetric_endpoints() -> Outcome {
    let (pwl, _) = binary_pwl(201);
    let bps = exact_breakpoints(&pwl).map_err(|e| e.to_string())?;
    let mut ds: Vec<Rational> = (0..=10).map(|i| ratio(i, 20)).collect();
    ds.extend([ratio(1, 7), ratio(2, 7), ratio(3, 7), ratio(1, 1000)]);
    for m in [2usize, 3, 16] {
        for d in &ds {
            let one = eval_exact_pwl(&bps, d);
            for (l, want) in [(inv(m), int(m as i64) * &one), (int(1), one.clone())] {
                let got = symmetric_family_exact(m, &pwl, &l, d).map_err(|e| e.to_string())?.ok_or("infeasible")?.rate;
                ensure!(got == want, "M={m}, L={l}, D={d}: {} vs {}", rat_to_f64(&got), rat_to_f64(&want));
            }
        }
    }
    Ok(())
}

fn c06_kkt_allocation() -> Outcome {
    let binary = RateDistortionCurve::binary();
    let slope = |x: f64| (x / (1.0 - x)).log2();
    // root of (1/(2D − x) − 1)^{3/2} − 1/x + 1 by bisection
    let root = |d: f64| {
        let f = |x: f64| (1.0 / (2.0 * d - x) - 1.0).powf(1.5) - 1.0 / x + 1.0;
        let (mut lo, mut hi) = ((2.0 * d - 0.5).max(0.0) + 1e-300, (2.0 * d).min(0.5));
        for _ in 0..300 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    for d in [0.05, 0.1, 0.2, 0.3] {
        let (alloc, rate) = kkt_inner_solve(&pairs_or_all(), &binary, d).map_err(|e| e.to_string())?;
        let (d1, d2) = (alloc.d[0][0], alloc.d[0][3]);
        ensure!((2.0 * slope(d1) - 3.0 * slope(d2)).abs() < 1e-9, "D={d}: slopes {} {}", slope(d1), slope(d2));
        ensure!(((d1 + d2) / 2.0 - d).abs() < 1e-9, "D={d}: mean {}", (d1 + d2) / 2.0);
        ensure!((d1 - root(d)).abs() < 1e-9, "D={d}: D1={d1}, root {}", root(d));
        let wpir_lc = 2.5 * (1.0 - hb(d));
        ensure!(rate < wpir_lc, "D={d}: rate {rate} not below {wpir_lc}");
    }
    Ok(())
}

fn c07_kary_envelope() -> Outcome {
    let curves = fig1(64, 201).map_err(|e| e.to_string())?;
    let (pairs, env) = (&curves[0], &curves[2]);
    let mut strict = Vec::new();
    for p in &pairs.points {
        let e = env.eval(p.distortion).ok_or("envelope domain")?;
        ensure!(e <= p.rate + 1e-12, "D={}: envelope {e} above {}", p.distortion, p.rate);
        strict.push(e < p.rate - 1e-6);
    }
    let interior = &strict[1..strict.len() - 1];
    ensure!(interior.windows(2).any(|w| w[0] && w[1]), "no interval of strict improvement");
    let e0 = env.eval(0.0).ok_or("envelope domain")?;
    ensure!((e0 - 12.0).abs() < 1e-12, "envelope at D=0 is {e0}");
    Ok(())
}

fn scheme_s() -> Scheme {
    let bits = |s: &str| u64::from_str_radix(s, 2).unwrap();
    let a: Vec<u64> = ["1100", "1010", "0110", "1110", "1111"].iter().map(|s| bits(s)).collect();
    let b: Vec<u64> = (0..16).filter(|s| !a.contains(s)).collect();
    Scheme::single(ResponseFunction::with_ml(2, 2, 2, vec![a, b]).unwrap().into()).unwrap()
}

fn c08_composition() -> Outcome {
    let s = scheme_s();
    let e = evaluate(&s).map_err(|e| e.to_string())?;
    ensure!((e.rate.clone(), e.distortion.clone(), e.leakage.clone()) == (ratio(1, 2), ratio(5, 16), ratio(1, 2)), "{e:?}");
    let sp = reencode_joint(&block_split(&s, 10).map_err(|e| e.to_string())?, DEFAULT_JOINT_CAP).map_err(|e| e.to_string())?;
    let rp = evaluate(&sp).map_err(|e| e.to_string())?.rate;
    ensure!((rat_to_f64(&rp) - 0.45).abs() <= 0.005, "joint rate {}", rat_to_f64(&rp));
    let c = file_subset_compose(&sp, 8, None).map_err(|e| e.to_string())?;
    let ec = evaluate(&c).map_err(|e| e.to_string())?;
    ensure!(ec.rate == int(8) * &rp, "composed rate {}", ec.rate);
    ensure!(format!("{:.2}", rat_to_f64(&ec.rate)) == "3.60", "composed rate {}", rat_to_f64(&ec.rate));
    ensure!(ec.distortion == ratio(5, 16) && ec.leakage == ratio(1, 16), "{ec:?}");
    Ok(())
}

/// A random binary scheme: up to three queries, each a random partition into at
/// most four parts, with random rational P(q|m).
fn random_scheme(rng: &mut ChaCha8Rng, max_files: usize, max_len: usize) -> Scheme {
    let m = rng.gen_range(1..=max_files);
    let beta = rng.gen_range(1..=max_len);
    let n = 1usize << (m * beta);
    let nq = rng.gen_range(1..=3);
    let weights: Vec<Vec<i64>> = (0..m)
        .map(|_| loop {
            let w: Vec<i64> = (0..nq).map(|_| rng.gen_range(0..4)).collect();
            if w.iter().sum::<i64>() > 0 {
                break w;
            }
        })
        .collect();
    let queries = (0..nq)
        .map(|q| {
            let parts = rng.gen_range(1..=4);
            let labels: Vec<u32> = (0..n).map(|_| rng.gen_range(0..parts)).collect();
            Query {
                id: format!("q{q}"),
                p_given_m: weights.iter().map(|w| ratio(w[q], w.iter().sum())).collect(),
                response: Response::Table(ResponseFunction::from_labels(2, m, beta, &labels).unwrap()),
            }
        })
        .collect();
    Scheme::new(2, m, beta, queries).unwrap()
}

fn c09_symmetrize() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for i in 0..50 {
        let s = random_scheme(&mut rng, 4, 2);
        let e = evaluate(&s).map_err(|e| e.to_string())?;
        let y = symmetrize(&s).map_err(|e| e.to_string())?;
        let ey = evaluate(&y).map_err(|e| e.to_string())?;
        ensure!(ey.per_file_distortion.iter().all(|d| d == &ey.distortion), "scheme {i}: {:?}", ey.per_file_distortion);
        ensure!(ey.rate == e.rate && ey.leakage == e.leakage && ey.distortion == e.distortion, "scheme {i}: {e:?} vs {ey:?}");
    }
    Ok(())
}

fn c10_monte_carlo() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for i in 0..10u64 {
        let mut s = random_scheme(&mut rng, 3, 2);
        if i % 2 == 1 {
            s = reencode_joint(&block_split(&s, 2).map_err(|e| e.to_string())?, DEFAULT_JOINT_CAP).map_err(|e| e.to_string())?;
        }
        let (re, de, le) = evaluate(&s).map_err(|e| e.to_string())?.as_f64();
        let sim = simulate(&s, 1_000_000, i).map_err(|e| e.to_string())?;
        for (what, exact, est, se) in [
            ("rate", re, sim.rate, sim.rate_se),
            ("distortion", de, sim.distortion, sim.distortion_se),
            ("leakage", le, sim.leakage, sim.leakage_se),
        ] {
            ensure!((est - exact).abs() <= 4.0 * se + 1e-12, "scheme {i} {what}: {est} ± {se} vs {exact}");
        }
    }
    Ok(())
}

fn c11_kv_bound() -> Outcome {
    let binary = RateDistortionCurve::binary();
    let rates: Vec<f64> = (1..=50).map(|i| i as f64 / 50.0).collect();
    for beta in [20usize, 160, 320] {
        let mut prev = f64::INFINITY;
        for &rate in &rates {
            let d = kv_average_distortion(beta, rate).map_err(|e| e.to_string())?;
            ensure!(d <= prev, "β={beta}: not nonincreasing at R={rate}");
            let limit = binary.inverse(rate).map_err(|e| e.to_string())?;
            ensure!(d >= limit - 1e-12, "β={beta}, R={rate}: {d} below the limit {limit}");
            prev = d;
        }
    }
    let (pwl, eps) = binary_pwl(201);
    let grid: Vec<f64> = (1..=100).map(|i| i as f64 / 100.0).collect();
    let curves = kv_wpir_lc_curve(16, 20, &[16, 8, 1], &grid).map_err(|e| e.to_string())?;
    for (n, kv) in [16usize, 8, 1].into_iter().zip(&curves) {
        for p in &kv.points {
            let d = p.distortion.min(0.5);
            let asym = if n == 16 || n == 1 {
                n as f64 * binary.eval(d).map_err(|e| e.to_string())?
            } else {
                symmetric_family_pwl(16, &pwl, 1.0 / n as f64, d).map_err(|e| e.to_string())?.ok_or("infeasible")?.rate - 16.0 * eps
            };
            ensure!(p.rate >= asym - 1e-9, "N={n}, D={}: {} below {asym}", p.distortion, p.rate);
        }
    }
    Ok(())
}

/// Bit errors of a two-bin map under majority reconstruction, counted directly.
fn two_bin_errors(beta: usize, mask: u32) -> u32 {
    let mut errors = 0;
    for bin in [true, false] {
        let xs: Vec<u32> = (0..1u32 << beta).filter(|x| (mask >> x & 1 == 1) == bin).collect();
        for b in 0..beta {
            let ones = xs.iter().filter(|&&x| x >> b & 1 == 1).count() as u32;
            errors += ones.min(xs.len() as u32 - ones);
        }
    }
    errors
}

fn c12_annealing() -> Outcome {
    let best = (0u32..1 << 16).filter(|m| m.count_ones() == 8).map(|m| two_bin_errors(4, m)).min().unwrap();
    let exhaustive = best as f64 / 64.0;
    ensure!(exhaustive == 5.0 / 16.0, "exhaustive optimum {exhaustive}");
    let small = sa_search(4, 0.25, &SaConfig { iterations: 20_000, restarts: 4, ..SaConfig::default() }).map_err(|e| e.to_string())?;
    ensure!(small.distortion == exhaustive, "β=4: {} vs {exhaustive}", small.distortion);
    let cfg = SaConfig { iterations: 300_000_000, restarts: 1, seed: 0, ..SaConfig::default() };
    let big = sa_search(20, 0.5, &cfg).map_err(|e| e.to_string())?;
    println!("     β=20, R=1/2: D = {:.4}", big.distortion);
    ensure!((0.110..0.25).contains(&big.distortion), "β=20: D = {}", big.distortion);
    Ok(())
}

fn c13_cross_solver() -> Outcome {
    let (pwl, eps) = binary_pwl(101);
    let ds: Vec<f64> = (0..9).map(|i| i as f64 / 16.0).collect();
    for (m, l) in [(2usize, 0.5), (2, 2.0 / 3.0), (3, 0.5), (3, 5.0 / 12.0), (3, 2.0 / 3.0)] {
        for &d in &ds {
            let sym = symmetric_family_pwl(m, &pwl, l, d).map_err(|e| e.to_string())?.map(|s| s.rate);
            let prof = pwl_lp_solve(m, &pwl, l, d, DEFAULT_PROFILE_BUDGET).map_err(|e| e.to_string())?;
            // every target is reachable by sending all files exactly
            let (Some(a), Some(b)) = (sym, prof) else {
                return Err(format!("M={m}, L={l}, D={d}: {sym:?} vs {prof:?}"));
            };
            ensure!((a - b).abs() <= m as f64 * eps + 1e-9, "M={m}, L={l}, D={d}: {a} vs {b}");
        }
    }
    Ok(())
}
