//! Curve data for the two tradeoff figures: the K-ary example with a fixed query
//! distribution, and finite-size schemes against the asymptotic limit.

use serde::{Deserialize, Serialize};

use crate::asymptotic::{kkt_inner_solve, single_or_all, symmetric_family_pwl, wpir_lc_rate};
use crate::compressor::{catalog, catalog_pool_two_files, kv_wpir_lc_curve, nonincreasing_hull, pool_points};
use crate::error::{Error, Result};
use crate::lp::{build_and_solve_lp, Method};
use crate::numeric::{int, rat_to_f64, ratio, Rational};
use crate::ratedist::{lower_convex_envelope, pwl_approximate, uniform_grid, RateDistortionCurve, TradeoffCurve, TradeoffPoint};
use crate::scheme::{block_split, evaluate, file_subset_compose, reencode_joint_within, scheme_from_distribution, select_compose, Response, Scheme};

/// Curves for K-ary files, M = 3, L = 1/2: random pairs with separate compression
/// (2·r(D)), the single-or-all query distribution with optimal distortions, and
/// the lower convex envelope of the two.
pub fn fig1(k: u32, points: usize) -> Result<Vec<TradeoffCurve>> {
    if points < 2 {
        return Err(Error::Invalid("need at least two grid points".into()));
    }
    let curve = RateDistortionCurve::kary(k)?;
    let grid = uniform_grid(curve.d_max(), points);
    let p2 = single_or_all();
    let pairs = grid
        .iter()
        .map(|&d| Ok(TradeoffPoint { distortion: d, rate: wpir_lc_rate(2, 1.0, curve.eval(d)?)?.1, leakage: 0.5 }))
        .collect::<Result<Vec<_>>>()?;
    let fixed = grid
        .iter()
        .map(|&d| Ok(TradeoffPoint { distortion: d, rate: kkt_inner_solve(&p2, &curve, d)?.1, leakage: p2.leakage() }))
        .collect::<Result<Vec<_>>>()?;
    let pairs = TradeoffCurve::new("random-pairs", pairs);
    let fixed = TradeoffCurve::new("single-or-all", fixed);
    let env = lower_convex_envelope(&[pairs.clone(), fixed.clone()], "envelope")?;
    Ok(vec![pairs, fixed, env])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig2Options {
    pub files: usize,
    pub file_len: usize,
    /// Grid size for the asymptotic and compressor-pool curves.
    pub distortion_points: usize,
    /// Breakpoints of the piecewise-linear binary curve.
    pub pwl_points: usize,
    /// Per-symbol rates for the random-coding curves.
    pub kv_rates: usize,
    /// Distortion targets for the composed small schemes.
    pub composed_points: usize,
    pub joint_cap: u64,
}

impl Default for Fig2Options {
    fn default() -> Self {
        Self { files: 16, file_len: 20, distortion_points: 101, pwl_points: 201, kv_rates: 100, composed_points: 33, joint_cap: 1 << 16 }
    }
}

/// A leakage level of the second figure: L = 1/n.
fn leakage_levels(m: usize) -> Vec<usize> {
    let mut v = vec![m, m / 2, 1];
    v.dedup();
    v
}

/// Finite-size curves for M files of β bits at L ∈ {1/M, 2/M, 1}: the limit for
/// infinitely long files, the random-coding bound, LP-optimal mixtures of the
/// given one-file compressors `(distortion, rate)`, and small exact schemes
/// composed up to (M, β). Labels end in `-L<num>/<den>`.
pub fn fig2(pool: &[(f64, f64)], opts: &Fig2Options) -> Result<Vec<TradeoffCurve>> {
    let m = opts.files;
    if pool.is_empty() {
        return Err(Error::Invalid("fig2 needs a compressor pool (run compressor-search first)".into()));
    }
    if m < 2 || m % 2 != 0 || opts.file_len % 4 != 0 {
        return Err(Error::Invalid("fig2 needs an even number of files and β divisible by 4".into()));
    }
    let binary = RateDistortionCurve::binary();
    let (pwl, _) = pwl_approximate(&binary, &uniform_grid(0.5, opts.pwl_points))?;
    let grid = uniform_grid(0.5, opts.distortion_points);
    let rates: Vec<f64> = (1..=opts.kv_rates).map(|i| i as f64 / opts.kv_rates as f64).collect();
    let mut pool_pts: Vec<(f64, f64)> = pool.to_vec();
    pool_pts.extend([(0.0, 1.0), (0.5, 0.0)]);
    let mut out = Vec::new();
    for n in leakage_levels(m) {
        let l = 1.0 / n as f64;
        let tag = format!("L1/{n}");
        let asym = if n == m || n == 1 {
            TradeoffCurve::from_fn(&format!("asymptotic-{tag}"), l, &grid, |d| n as f64 * binary.eval(d).unwrap_or(0.0))
        } else {
            let pts = grid
                .iter()
                .map(|&d| {
                    let s = symmetric_family_pwl(m, &pwl, l, d)?.ok_or_else(|| Error::Infeasible(format!("D = {d}")))?;
                    Ok(TradeoffPoint { distortion: d, rate: s.rate, leakage: l })
                })
                .collect::<Result<Vec<_>>>()?;
            TradeoffCurve::new(format!("asymptotic-{tag}"), pts)
        };
        out.push(asym);

        let mut kv = kv_wpir_lc_curve(m, opts.file_len, &[n], &rates)?.remove(0);
        kv.label = format!("kv-{tag}");
        out.push(kv);

        let pts = grid
            .iter()
            .filter_map(|&d| match crate::asymptotic::symmetric_family_solve(m, &pool_pts, &l, &d) {
                Ok(Some(s)) => Some(Ok(TradeoffPoint { distortion: d, rate: s.rate, leakage: l })),
                Ok(None) => None,
                Err(e) => Some(Err(e)),
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(TradeoffCurve::new(format!("rnd-{tag}"), pts));

        let pts = composed_points(m, opts.file_len, n, opts.composed_points, opts.joint_cap)?;
        out.push(TradeoffCurve::new(format!("rep-{tag}"), nonincreasing_hull(&pts)));
    }
    Ok(out)
}

/// LP-optimal schemes over the 4-bit catalog, block split to β and composed to
/// M files at leakage 1/n, evaluated exactly. L = 1/M and L = 2/M compose hidden
/// groups of two files (small leakage 1/2 and 1); L = 1 reveals the file's group.
pub fn composed_points(m: usize, beta: usize, n: usize, count: usize, joint_cap: u64) -> Result<Vec<TradeoffPoint>> {
    let (pool, small_m, small_l): (Vec<Response>, usize, Rational) = if n == 1 {
        (catalog().into_iter().map(|c| Ok(Response::Table(c.response()?))).collect::<Result<_>>()?, 1, int(1))
    } else if n == m {
        (catalog_pool_two_files().into_iter().map(|(_, r)| r).collect(), 2, ratio(1, 2))
    } else if 2 * n == m {
        (catalog_pool_two_files().into_iter().map(|(_, r)| r).collect(), 2, int(1))
    } else {
        return Err(Error::Unsupported(format!("no composition for L = 1/{n} with M = {m}")));
    };
    let named: Vec<(String, Response)> = pool.iter().cloned().map(|r| (String::new(), r)).collect();
    let points = pool_points(&named)?;
    let small_beta = pool[0].file_len();
    let blocks = beta / small_beta;
    let mut out = Vec::new();
    for i in 0..count {
        let d = ratio(i as i64, 2 * (count as i64 - 1));
        let sol = build_and_solve_lp(&points, small_m, &d, &small_l, Method::Auto)?;
        let Some(p) = sol.p else { continue };
        let small = scheme_from_distribution(&pool, &p)?;
        let scheme = compose_to(&small, m, blocks, n == 1, joint_cap)?;
        let e = evaluate(&scheme)?;
        out.push(TradeoffPoint { distortion: rat_to_f64(&e.distortion), rate: rat_to_f64(&e.rate), leakage: rat_to_f64(&e.leakage) });
    }
    Ok(out)
}

/// Block split, joint re-encoding where the alphabet allows, then composition to
/// `m` files (hidden groups, or revealed groups when `reveal`).
pub fn compose_to(small: &Scheme, m: usize, blocks: usize, reveal: bool, joint_cap: u64) -> Result<Scheme> {
    let split = block_split(small, blocks)?;
    let (coded, _) = if blocks > 1 { reencode_joint_within(&split, joint_cap)? } else { (split, 0) };
    let groups = m / small.num_files;
    if reveal {
        select_compose(&coded, groups)
    } else {
        file_subset_compose(&coded, groups, None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fig1_endpoints() {
        let c = fig1(64, 65).unwrap();
        assert_eq!(c[0].points[0].rate, 12.0);
        assert!((c[1].points[0].rate - 15.0).abs() < 1e-12);
        assert!((c[2].points[0].rate - 12.0).abs() < 1e-12);
        for c in &c {
            assert!(c.points.last().unwrap().rate.abs() < 1e-9);
        }
    }

    #[test]
    fn composed_small_point() {
        let pts = composed_points(16, 20, 16, 17, 1 << 16).unwrap();
        let p = pts.iter().find(|p| (p.distortion - 5.0 / 16.0).abs() < 1e-12).unwrap();
        assert_eq!(format!("{:.2}", p.rate), "3.60");
        assert_eq!(p.leakage, 1.0 / 16.0);
    }
}
