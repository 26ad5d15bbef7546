use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use lwpir::asymptotic::{pwl_lp_solve, symmetric_family_pwl, symmetric_family_solve, DEFAULT_PROFILE_BUDGET};
use lwpir::compressor::{catalog, catalog_pool_two_files, kv_average_distortion, sa_search, CompressorSpec, SaConfig};
use lwpir::figures::{fig1, fig2, Fig2Options};
use lwpir::lp::{tradeoff_sweep, QueryDistribution};
use lwpir::numeric::{format_rational, rat_to_f64, Rational};
use lwpir::ratedist::{curves_to_csv, pwl_approximate, uniform_grid, RateDistortionCurve, TradeoffCurve, TradeoffPoint};
use lwpir::response_enum::{
    enumerate_partitions, enumerate_vertices, equivalence_reduce, vertex_filter, EnumerationState, PointEvaluator,
    Symmetry, DEFAULT_ENUM_CAP,
};
use lwpir::scheme::{
    block_split, evaluate, file_subset_compose, rationalize_distribution, reencode_joint, scheme_from_distribution,
    select_compose, simulate, symmetrize, time_share, Response, Scheme,
};
use lwpir::source_coding::state_count;
use lwpir::Scalar;

use crate::io::{self, PoolFile};
use crate::{
    AsymptoticMethod, Command, ComposeOp, CompressorSearchArgs, EnumerateArgs, Figure, FigureArgs, KvBoundArgs,
    SchemeComposeArgs, SchemeEvalArgs, SchemeSimulateArgs, TradeoffAsymptoticArgs, TradeoffCompressorsArgs,
    TradeoffExactArgs,
};

pub fn run(cmd: &Command) -> Result<()> {
    match cmd {
        Command::TradeoffExact(a) => tradeoff_exact(a, cmd),
        Command::TradeoffAsymptotic(a) => tradeoff_asymptotic(a, cmd),
        Command::TradeoffCompressors(a) => tradeoff_compressors(a, cmd),
        Command::CompressorSearch(a) => compressor_search(a, cmd),
        Command::KvBound(a) => kv_bound(a, cmd),
        Command::SchemeEval(a) => scheme_eval(a),
        Command::SchemeSimulate(a) => scheme_simulate(a),
        Command::SchemeCompose(a) => scheme_compose(a, cmd),
        Command::Figure(a) => figure(a, cmd),
        Command::Enumerate(a) => enumerate(a, cmd),
    }
}

fn leakage_label(l: &Rational) -> String {
    format!("L{}", format_rational(l))
}

fn summary_line(scheme: &Scheme) -> Result<String> {
    let e = evaluate(scheme)?;
    let (r, d, l) = e.as_f64();
    Ok(format!(
        "rate={r:.6} distortion={d:.6} leakage={l:.6} (exact {} {} {})",
        format_rational(&e.rate),
        format_rational(&e.distortion),
        format_rational(&e.leakage)
    ))
}

struct Pool {
    responses: Vec<Response>,
    points: Vec<Vec<Rational>>,
}

fn build_pool(a: &TradeoffExactArgs) -> Result<Pool> {
    match a.pool.as_str() {
        "enumerate" => {
            let n = state_count(a.alphabet, a.files, a.beta)? as usize;
            if n > DEFAULT_ENUM_CAP {
                bail!(
                    "X^(Mβ) has {n} states; direct enumeration stops at {DEFAULT_ENUM_CAP}. \
                     Use `lwpir enumerate` (checkpointed) and pass its output with --pool, or --pool catalog"
                );
            }
            let eval = PointEvaluator::new(a.alphabet, a.files, a.beta)?;
            let cands = equivalence_reduce(enumerate_partitions(n, DEFAULT_ENUM_CAP)?, &eval, Symmetry::None)?;
            let pts: Vec<Vec<Rational>> = cands.iter().map(|c| c.c.clone()).collect();
            let keep = vertex_filter(&pts)?;
            let mut pool = Pool { responses: Vec::new(), points: Vec::new() };
            for i in keep {
                let rf = cands[i].source.clone().context("enumerated candidate without a response")?;
                pool.responses.push(Response::Table(rf));
                pool.points.push(pts[i].clone());
            }
            Ok(pool)
        }
        "catalog" => {
            let responses: Vec<Response> = match (a.alphabet, a.files, a.beta) {
                (2, 2, 2) => catalog_pool_two_files().into_iter().map(|(_, r)| r).collect(),
                (2, 1, 4) => catalog().iter().map(|c| Ok(Response::Table(c.response()?))).collect::<Result<_>>()?,
                _ => bail!("the built-in catalog covers binary files with (M, β) = (2, 2) or (1, 4)"),
            };
            let points = responses
                .iter()
                .map(|r| {
                    let mut v = vec![r.rate()?];
                    v.extend(r.distortions()?);
                    Ok(v)
                })
                .collect::<Result<_>>()?;
            Ok(Pool { responses, points })
        }
        path => {
            let f: PoolFile = serde_json::from_str(&io::read(Path::new(path))?).context("parsing pool file")?;
            if (f.alphabet_size, f.num_files, f.file_len) != (a.alphabet, a.files, a.beta) {
                bail!(
                    "pool file is for K={}, M={}, β={}, but K={}, M={}, β={} was requested",
                    f.alphabet_size,
                    f.num_files,
                    f.file_len,
                    a.alphabet,
                    a.files,
                    a.beta
                );
            }
            let points = f.exact_points()?;
            Ok(Pool { responses: f.responses, points })
        }
    }
}

struct SweepOut {
    curve: TradeoffCurve,
    /// (D, minimum rate) in exact form when solved exactly.
    exact: Vec<(Rational, Option<Rational>)>,
    dists: Vec<Option<QueryDistribution<Rational>>>,
}

fn sweep<T: Scalar>(
    pool: &Pool,
    m: usize,
    l: &Rational,
    grid: &[Rational],
    label: &str,
    exact: impl Fn(&T) -> Option<Rational>,
    to_dist: impl Fn(&QueryDistribution<T>) -> Result<QueryDistribution<Rational>>,
) -> Result<SweepOut> {
    let pts: Vec<Vec<T>> = pool.points.iter().map(|p| p.iter().map(T::from_rational).collect()).collect();
    let g: Vec<T> = grid.iter().map(T::from_rational).collect();
    let s = tradeoff_sweep(&pts, m, &T::from_rational(l), &g, label)?;
    let mut ex = Vec::new();
    let mut dists = Vec::new();
    for (d, sol) in grid.iter().zip(&s.solutions) {
        ex.push((d.clone(), sol.objective.as_ref().and_then(&exact)));
        dists.push(match &sol.p {
            Some(p) if !pool.responses.is_empty() => Some(to_dist(p)?),
            _ => None,
        });
    }
    Ok(SweepOut { curve: s.curve, exact: ex, dists })
}

fn tradeoff_exact(a: &TradeoffExactArgs, cmd: &Command) -> Result<()> {
    let leakages = io::parse_list(&a.leakage)?;
    let grid = io::parse_grid(&a.distortion_grid)?;
    let pool = build_pool(a)?;
    eprintln!("pool: {} responses", pool.points.len());
    let mut curves = Vec::new();
    let mut exact_csv = String::from("distortion,rate,leakage\n");
    for (li, l) in leakages.iter().enumerate() {
        let label = format!("lp-{}", leakage_label(l));
        let out = if a.exact_rational {
            sweep::<Rational>(&pool, a.files, l, &grid, &label, |x| Some(x.clone()), |p| Ok(p.clone()))?
        } else {
            sweep::<f64>(&pool, a.files, l, &grid, &label, |_| None, |p| Ok(rationalize_distribution(p)?))?
        };
        for (d, r) in &out.exact {
            if let Some(r) = r {
                writeln!(exact_csv, "{},{},{}", format_rational(d), format_rational(r), format_rational(l))?;
            }
        }
        for (di, p) in out.dists.iter().enumerate() {
            if let Some(p) = p {
                let scheme = scheme_from_distribution(&pool.responses, p)?;
                io::write(&a.out.join("schemes").join(format!("L{li}_D{di}.json")), &scheme.to_json())?;
            }
        }
        curves.push(out.curve);
    }
    io::write(&a.out.join("tradeoff.csv"), &curves_to_csv(&curves))?;
    if a.exact_rational {
        io::write(&a.out.join("tradeoff_exact.csv"), &exact_csv)?;
    }
    io::write_manifest(&a.out.join("manifest.json"), cmd)?;
    print!("{}", curves_to_csv(&curves));
    Ok(())
}

fn parse_curve(s: &str) -> Result<RateDistortionCurve> {
    if s == "binary" {
        return Ok(RateDistortionCurve::binary());
    }
    if let Some(k) = s.strip_prefix("kary:") {
        return Ok(RateDistortionCurve::kary(k.parse().context("alphabet size")?)?);
    }
    bail!("unknown curve '{s}' (binary or kary:K)")
}

fn tradeoff_asymptotic(a: &TradeoffAsymptoticArgs, cmd: &Command) -> Result<()> {
    let curve = parse_curve(&a.curve)?;
    let (pwl, err) = pwl_approximate(&curve, &uniform_grid(curve.d_max(), a.pwl_points))?;
    eprintln!("piecewise-linear approximation error ≤ {err:.3e} bits per file");
    let grid: Vec<f64> = io::parse_grid(&a.distortion_grid)?.iter().map(rat_to_f64).collect();
    let mut curves = Vec::new();
    for l in io::parse_list(&a.leakage)? {
        let lf = rat_to_f64(&l);
        let mut pts = Vec::new();
        for &d in &grid {
            let r = match a.method {
                AsymptoticMethod::Symmetric => symmetric_family_pwl(a.files, &pwl, lf, d)?.map(|s| s.rate),
                AsymptoticMethod::Profile => pwl_lp_solve(a.files, &pwl, lf, d, DEFAULT_PROFILE_BUDGET)?,
            };
            if let Some(rate) = r {
                pts.push(TradeoffPoint { distortion: d, rate, leakage: lf });
            }
        }
        let method = match a.method {
            AsymptoticMethod::Symmetric => "symmetric",
            AsymptoticMethod::Profile => "profile",
        };
        curves.push(TradeoffCurve::new(format!("{method}-{}", leakage_label(&l)), pts));
    }
    let csv = curves_to_csv(&curves);
    io::write(&a.out.join("tradeoff.csv"), &csv)?;
    io::write_manifest(&a.out.join("manifest.json"), cmd)?;
    print!("{csv}");
    Ok(())
}

fn read_compressors(path: &Path) -> Result<Vec<CompressorSpec>> {
    serde_json::from_str(&io::read(path)?).with_context(|| format!("parsing compressor list {}", path.display()))
}

/// (distortion, rate) of each compressor, recomputed from its codebook.
fn compressor_points(specs: &[CompressorSpec]) -> Result<Vec<(f64, f64)>> {
    specs
        .iter()
        .map(|c| {
            let (r, d) = c.exact_point()?;
            Ok((rat_to_f64(&d), rat_to_f64(&r)))
        })
        .collect()
}

fn tradeoff_compressors(a: &TradeoffCompressorsArgs, cmd: &Command) -> Result<()> {
    let mut specs = Vec::new();
    for p in &a.pool {
        if p == "catalog" {
            specs.extend(catalog());
        } else {
            specs.extend(read_compressors(Path::new(p))?);
        }
    }
    let mut pts = compressor_points(&specs)?;
    // sending a file exactly or not at all is always available
    pts.extend([(0.0, 1.0), (0.5, 0.0)]);
    let grid: Vec<f64> = io::parse_grid(&a.distortion_grid)?.iter().map(rat_to_f64).collect();
    let mut curves = Vec::new();
    for l in io::parse_list(&a.leakage)? {
        let lf = rat_to_f64(&l);
        let mut out = Vec::new();
        for &d in &grid {
            if let Some(s) = symmetric_family_solve(a.files, &pts, &lf, &d)? {
                out.push(TradeoffPoint { distortion: d, rate: s.rate, leakage: lf });
            }
        }
        curves.push(TradeoffCurve::new(format!("compressors-{}", leakage_label(&l)), out));
    }
    let csv = curves_to_csv(&curves);
    io::write(&a.out.join("tradeoff.csv"), &csv)?;
    io::write_manifest(&a.out.join("manifest.json"), cmd)?;
    print!("{csv}");
    Ok(())
}

fn compressor_search(a: &CompressorSearchArgs, cmd: &Command) -> Result<()> {
    let mut found: Vec<CompressorSpec> = if a.out.exists() { read_compressors(&a.out)? } else { Vec::new() };
    let cfg = SaConfig { iterations: a.iters, restarts: a.restarts, seed: a.seed, ..SaConfig::default() };
    for r in io::parse_list(&a.rate)? {
        let rate = rat_to_f64(&r);
        if let Some(c) = found.iter().find(|c| c.beta_in == a.beta && (c.rate - rate).abs() < 1e-12) {
            println!("R={} D={:.6} (kept {})", format_rational(&r), c.distortion, c.name);
            continue;
        }
        let c = sa_search(a.beta, rate, &cfg)?;
        println!("R={} D={:.6}", format_rational(&r), c.distortion);
        found.push(c);
        // saved after every rate so an interrupted run keeps its results
        io::write_atomic(&a.out, &(serde_json::to_string_pretty(&found)? + "\n"))?;
    }
    io::write_manifest(&a.out.with_extension("manifest.json"), cmd)?;
    Ok(())
}

fn kv_bound(a: &KvBoundArgs, cmd: &Command) -> Result<()> {
    let rates = if a.rate.contains(':') { io::parse_grid(&a.rate)? } else { io::parse_list(&a.rate)? };
    let n = a.subset.max(1);
    let mut csv = String::from("rate_per_file,distortion,rate,leakage\n");
    for r in &rates {
        let rf = rat_to_f64(r);
        let d = kv_average_distortion(n * a.beta, rf)?;
        writeln!(csv, "{rf},{d},{},{}", n as f64 * rf, 1.0 / n as f64)?;
    }
    print!("{csv}");
    if let Some(out) = &a.out {
        io::write(out, &csv)?;
        io::write_manifest(&out.with_extension("manifest.json"), cmd)?;
    }
    Ok(())
}

fn scheme_eval(a: &SchemeEvalArgs) -> Result<()> {
    let s = io::read_scheme(&a.scheme)?;
    println!("{}", summary_line(&s)?);
    println!("{}", serde_json::to_string_pretty(&evaluate(&s)?)?);
    Ok(())
}

fn scheme_simulate(a: &SchemeSimulateArgs) -> Result<()> {
    let s = io::read_scheme(&a.scheme)?;
    let r = simulate(&s, a.trials, a.seed)?;
    println!(
        "rate={:.6}±{:.1e} distortion={:.6}±{:.1e} leakage={:.6}±{:.1e}",
        r.rate, r.rate_se, r.distortion, r.distortion_se, r.leakage, r.leakage_se
    );
    println!("{}", serde_json::to_string_pretty(&r)?);
    Ok(())
}

fn scheme_compose(a: &SchemeComposeArgs, cmd: &Command) -> Result<()> {
    let s = match &a.op {
        ComposeOp::Block { scheme, blocks, joint, cap } => {
            let b = block_split(&io::read_scheme(scheme)?, *blocks)?;
            if *joint {
                reencode_joint(&b, *cap)?
            } else {
                b
            }
        }
        ComposeOp::Subset { scheme, groups, pad_to } => file_subset_compose(&io::read_scheme(scheme)?, *groups, *pad_to)?,
        ComposeOp::Select { scheme, groups } => select_compose(&io::read_scheme(scheme)?, *groups)?,
        ComposeOp::Timeshare { schemes, weights } => {
            let w = io::parse_list(weights)?;
            let s = schemes.iter().map(|p| io::read_scheme(p)).collect::<Result<Vec<_>>>()?;
            time_share(&s, &w)?
        }
        ComposeOp::Symmetrize { scheme } => symmetrize(&io::read_scheme(scheme)?)?,
    };
    match &a.out {
        Some(out) => {
            io::write(out, &s.to_json())?;
            io::write_manifest(&out.with_extension("manifest.json"), cmd)?;
            println!("{}", summary_line(&s)?);
        }
        None => println!("{}", s.to_json()),
    }
    Ok(())
}

fn figure(a: &FigureArgs, cmd: &Command) -> Result<()> {
    let (name, curves) = match a.which {
        Figure::Fig1 => ("fig1.csv", fig1(a.alphabet, a.points)?),
        Figure::Fig2 => {
            let path = a.pool.as_ref().context("fig2 needs --pool (compressor JSON from compressor-search)")?;
            let pool = compressor_points(&read_compressors(path)?)?;
            let opts = Fig2Options { files: a.files, file_len: a.beta, distortion_points: a.points, ..Fig2Options::default() };
            ("fig2.csv", fig2(&pool, &opts)?)
        }
    };
    io::write(&a.out.join(name), &curves_to_csv(&curves))?;
    io::write_manifest(&a.out.join("manifest.json"), cmd)?;
    for c in &curves {
        println!("{}: {} points", c.label, c.points.len());
    }
    Ok(())
}

fn enumerate(a: &EnumerateArgs, cmd: &Command) -> Result<()> {
    let eval = PointEvaluator::new(a.alphabet, a.files, a.beta)?;
    let symmetry = if a.symmetric { Symmetry::Full } else { Symmetry::None };
    let resume: Option<EnumerationState> = if a.checkpoint.exists() {
        let s: EnumerationState = serde_json::from_str(&io::read(&a.checkpoint)?).context("parsing checkpoint")?;
        eprintln!("resuming: {} prefixes done, {} survivors", s.completed_prefixes.len(), s.survivors.len());
        Some(s)
    } else {
        None
    };
    let mut save_err = None;
    let state = enumerate_vertices(&eval, symmetry, a.prefix_len, resume, |s| {
        eprintln!("prefix {} done: {} partitions, {} survivors", s.completed_prefixes.len(), s.partitions_seen, s.survivors.len());
        if let Err(e) = serde_json::to_string(s).map_err(anyhow::Error::from).and_then(|j| io::write_atomic(&a.checkpoint, &j)) {
            save_err.get_or_insert(e);
        }
    })?;
    if let Some(e) = save_err {
        return Err(e.context("writing checkpoint"));
    }
    let denom = eval.denominator();
    let points: Vec<Vec<Rational>> = state.survivors.iter().map(|p| p.to_rational(denom)).collect();
    let f = PoolFile::from_points(a.alphabet, a.files, a.beta, &points);
    io::write(&a.out, &(serde_json::to_string_pretty(&f)? + "\n"))?;
    io::write_manifest(&a.out.with_extension("manifest.json"), cmd)?;
    println!("{} vertex points ({} partitions)", points.len(), state.partitions_seen);
    Ok(())
}
