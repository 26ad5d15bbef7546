//! The infinite-file-size optimum: per-query distortion allocation for a fixed
//! query distribution (KKT conditions), the symmetric subset family, the
//! piecewise-linear LP, and the subset-request baseline.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{solve_columns, Cmp, ColumnOutcome, ColumnSource, ExplicitColumns, QueryDistribution};
use crate::numeric::{ratio, Rational, Scalar};
use crate::ratedist::RateDistortionCurve;

/// Per-query, per-file distortions and the multiplier that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionAllocation {
    /// `d[m][q]`
    pub d: Vec<Vec<f64>>,
    pub lambda: f64,
}

const KKT_TOL: f64 = 1e-10;
const KKT_STEPS: usize = 200;

/// Optimal distortions for a fixed P(q|m): each requested entry satisfies
/// r'(D_q^(m)) = λ·P(m,q)/P_Q(q), unrequested entries get D_max, and λ ≤ 0 is
/// bisected until the average distortion meets `d_target`.
pub fn kkt_inner_solve(p: &QueryDistribution<f64>, curve: &RateDistortionCurve, d_target: f64) -> Result<(DistortionAllocation, f64)> {
    if !curve.is_analytic() {
        return Err(Error::Unsupported("the allocation needs an analytic curve".into()));
    }
    let dmax = curve.d_max();
    if !(0.0..=dmax + 1e-12).contains(&d_target) {
        return Err(Error::Domain(format!("target distortion {d_target} outside [0, {dmax}]")));
    }
    let mm = p.num_files();
    let nq = p.num_queries();
    let joint = |m: usize, q: usize| p.get(m, q) / mm as f64;
    let marg: Vec<f64> = (0..nq).map(|q| p.marginal(q)).collect();
    let alloc = |lambda: f64| -> Vec<Vec<f64>> {
        (0..mm)
            .map(|m| {
                (0..nq)
                    .map(|q| {
                        let pj = joint(m, q);
                        if pj <= 0.0 {
                            dmax
                        } else if lambda == f64::NEG_INFINITY {
                            0.0
                        } else {
                            curve.derivative_inverse(lambda * pj / marg[q]).expect("analytic")
                        }
                    })
                    .collect()
            })
            .collect()
    };
    let total = |d: &[Vec<f64>]| -> f64 {
        let mut s = 0.0;
        for m in 0..mm {
            for q in 0..nq {
                s += joint(m, q) * d[m][q];
            }
        }
        s
    };
    let rate_of = |d: &[Vec<f64>]| -> f64 {
        let mut r = 0.0;
        for q in 0..nq {
            let s: f64 = (0..mm).map(|m| curve.eval(d[m][q]).unwrap_or(0.0)).sum();
            r += marg[q] * s;
        }
        r
    };
    if d_target <= 0.0 {
        let d = alloc(f64::NEG_INFINITY);
        let r = rate_of(&d);
        return Ok((DistortionAllocation { d, lambda: f64::NEG_INFINITY }, r));
    }
    if d_target >= dmax - 1e-15 {
        let d = alloc(0.0);
        let r = rate_of(&d);
        return Ok((DistortionAllocation { d, lambda: 0.0 }, r));
    }
    // bracket in t = ln(-λ): total distortion decreases as t grows
    let lam0 = curve.derivative(d_target.min(dmax * 0.5))?.min(-1e-3);
    let mut lo = (-lam0).ln();
    let mut hi = lo;
    let g = |t: f64| total(&alloc(-t.exp()));
    let mut guard = 0;
    while g(lo) < d_target {
        lo -= 2.0;
        guard += 1;
        if guard > 200 {
            return Err(Error::Numerical("could not bracket the multiplier".into()));
        }
    }
    while g(hi) > d_target {
        hi += 2.0;
        guard += 1;
        if guard > 400 {
            return Err(Error::Numerical("could not bracket the multiplier".into()));
        }
    }
    let mut converged = false;
    for _ in 0..KKT_STEPS {
        let mid = 0.5 * (lo + hi);
        let v = g(mid);
        if v > d_target {
            lo = mid;
        } else {
            hi = mid;
        }
        if (v - d_target).abs() <= KKT_TOL * 1e-3 || hi - lo < 1e-15 {
            converged = true;
            break;
        }
    }
    let t = 0.5 * (lo + hi);
    let d = alloc(-t.exp());
    if !converged && (total(&d) - d_target).abs() > KKT_TOL {
        return Err(Error::Numerical("multiplier bisection did not converge".into()));
    }
    let r = rate_of(&d);
    Ok((DistortionAllocation { d, lambda: -t.exp() }, r))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Endpoint {
    /// L = 1/M: every query must look the same for all files.
    NoLeakage,
    /// L = 1: the user may simply ask for the file.
    NoPrivacy,
}

/// Closed-form rates at the two leakage extremes.
pub fn cor2_rate(m: usize, curve: &RateDistortionCurve, d: f64, which: Endpoint) -> Result<f64> {
    let r = curve.eval(d)?;
    Ok(match which {
        Endpoint::NoLeakage => m as f64 * r,
        Endpoint::NoPrivacy => r,
    })
}

/// Time-sharing between requesting uniformly random N-subsets (fraction α) and
/// (N+1)-subsets, each file compressed separately at rate `r`. Returns (L, rate).
pub fn wpir_lc_rate(n: usize, alpha: f64, r: f64) -> Result<(f64, f64)> {
    if n == 0 || !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Domain(format!("need N ≥ 1 and α in [0,1], got N={n}, α={alpha}")));
    }
    let nf = n as f64;
    Ok((alpha / nf + (1.0 - alpha) / (nf + 1.0), (nf + 1.0 - alpha) * r))
}

/// P(q|m) for M = 3 with queries {1,2}, {1,3}, {2,3}, {1,2,3}: half the time a random
/// pair containing the file, half the time all files.
pub fn pairs_or_all() -> QueryDistribution<f64> {
    QueryDistribution::new(vec![
        vec![0.25, 0.25, 0.0, 0.5],
        vec![0.25, 0.0, 0.25, 0.5],
        vec![0.0, 0.25, 0.25, 0.5],
    ])
    .expect("valid")
}

/// P(q|m) for M = 3 with queries {1}, {2}, {3}, {1,2,3}: the file alone with
/// probability 1/4, otherwise all files.
pub fn single_or_all() -> QueryDistribution<f64> {
    QueryDistribution::new(vec![
        vec![0.25, 0.0, 0.0, 0.75],
        vec![0.0, 0.25, 0.0, 0.75],
        vec![0.0, 0.0, 0.25, 0.75],
    ])
    .expect("valid")
}

/// Optimum of the symmetric subset family: class (k, j) requests a uniformly random
/// k-subset containing the desired file, every requested file at grid point j.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetricSolution<T> {
    pub rate: T,
    /// (k, w_k, D_k): weight of subset size k and its mixed distortion level.
    pub classes: Vec<(usize, T, T)>,
}

/// Columns (k, j) of the symmetric family: cost k·r_j, coefficients [1, D_j, 1/k].
struct SubsetColumns<'a, T> {
    m: usize,
    points: &'a [(T, T)],
    costs: Vec<T>,
}

impl<'a, T: Scalar> SubsetColumns<'a, T> {
    fn new(m: usize, points: &'a [(T, T)]) -> Self {
        let costs = (1..=m as i64).flat_map(|k| points.iter().map(move |(_, r)| T::from_ratio(k, 1) * r.clone())).collect();
        Self { m, points, costs }
    }
}

impl<T: Scalar> ColumnSource<T> for SubsetColumns<'_, T> {
    fn num_rows(&self) -> usize {
        3
    }
    fn num_columns(&self) -> usize {
        self.m * self.points.len()
    }
    fn column(&self, j: usize) -> (T, Vec<T>) {
        let s = self.points.len();
        let k = T::from_ratio((j / s + 1) as i64, 1);
        (self.costs[j].clone(), vec![T::one(), self.points[j % s].0.clone(), T::one() / k])
    }
    // y·a splits into a per-k and a per-j term, so each is computed once
    fn price(&self, duals: &[T], with_cost: bool) -> Option<(usize, T)> {
        let s = self.points.len();
        let per_j: Vec<T> = self.points.iter().map(|(dj, _)| duals[1].clone() * dj.clone()).collect();
        let mut best: Option<(usize, T)> = None;
        for k in 1..=self.m {
            let kk = T::from_ratio(k as i64, 1);
            let per_k = duals[0].clone() + duals[2].clone() / kk.clone();
            for (j, pj) in per_j.iter().enumerate() {
                let col = (k - 1) * s + j;
                let y = per_k.clone() + pj.clone();
                let d = if with_cost { self.costs[col].clone() - y } else { -y };
                if d.is_neg() && best.as_ref().map_or(true, |(_, b)| d < *b) {
                    best = Some((col, d));
                }
            }
        }
        best
    }
}

/// Solves the symmetric family LP over points (D_j, r_j) with r_j a per-file rate.
pub fn symmetric_family_solve<T: Scalar>(m: usize, points: &[(T, T)], l: &T, d: &T) -> Result<Option<SymmetricSolution<T>>> {
    if m == 0 || points.is_empty() {
        return Err(Error::Invalid("need M ≥ 1 and at least one grid point".into()));
    }
    let inv_m = T::one() / T::from_ratio(m as i64, 1);
    if l.clone() < inv_m.clone() && !(inv_m.clone() - l.clone()).is_zero_tol() {
        return Err(Error::Infeasible(format!("leakage below 1/M = 1/{m}")));
    }
    let s = points.len();
    let src = SubsetColumns::new(m, points);
    match solve_columns(&src, &[Cmp::Eq, Cmp::Le, Cmp::Le], &[T::one(), d.clone(), l.clone()])? {
        ColumnOutcome::Optimal(sol) => {
            let mut classes: Vec<(usize, T, T)> = Vec::new();
            for (j, w) in &sol.x {
                let k = j / s + 1;
                let dj = points[j % s].0.clone();
                match classes.iter_mut().find(|c| c.0 == k) {
                    Some(c) => {
                        c.2 = c.2.clone() + w.clone() * dj;
                        c.1 = c.1.clone() + w.clone();
                    }
                    None => classes.push((k, w.clone(), w.clone() * dj)),
                }
            }
            for c in classes.iter_mut() {
                c.2 = c.2.clone() / c.1.clone();
            }
            classes.sort_by_key(|c| c.0);
            Ok(Some(SymmetricSolution { rate: sol.objective, classes }))
        }
        ColumnOutcome::Infeasible => Ok(None),
        ColumnOutcome::Unbounded => Err(Error::Numerical("unbounded symmetric family LP".into())),
    }
}

/// Breakpoints of a piecewise-linear curve as exact rationals (floats convert exactly).
pub fn exact_breakpoints(curve: &RateDistortionCurve) -> Result<Vec<(Rational, Rational)>> {
    let b = curve.breakpoints().ok_or_else(|| Error::Unsupported("curve is not piecewise linear".into()))?;
    Ok(b.iter().map(|&(d, r)| (Rational::from_f64(d), Rational::from_f64(r))).collect())
}

/// Evaluates the exact piecewise-linear interpolation of rational breakpoints.
pub fn eval_exact_pwl(bps: &[(Rational, Rational)], d: &Rational) -> Rational {
    let i = bps.partition_point(|p| &p.0 <= d);
    if i == 0 {
        return bps[0].1.clone();
    }
    if i >= bps.len() {
        return bps[bps.len() - 1].1.clone();
    }
    let (d0, r0) = &bps[i - 1];
    let (d1, r1) = &bps[i];
    r0 + (r1 - r0) * (d - d0) / (d1 - d0)
}

pub const DEFAULT_PROFILE_BUDGET: u64 = 2_000_000;

/// Flat queries over distortion profiles: column `(mask-1)·s^M + profile`.
struct ProfileColumns<'a> {
    m: usize,
    grid: &'a [(f64, f64)],
    profiles: usize,
}

impl<'a> ProfileColumns<'a> {
    fn decode(&self, j: usize) -> (usize, Vec<usize>) {
        let mask = j / self.profiles + 1;
        let mut p = j % self.profiles;
        let s = self.grid.len();
        let mut digits = vec![0; self.m];
        for f in (0..self.m).rev() {
            digits[f] = p % s;
            p /= s;
        }
        (mask, digits)
    }

    fn encode(&self, mask: usize, digits: &[usize]) -> usize {
        let s = self.grid.len();
        let p = digits.iter().fold(0, |acc, &d| acc * s + d);
        (mask - 1) * self.profiles + p
    }

    fn best_in_mask(&self, mask: usize, duals: &[f64], with_cost: bool) -> (Vec<usize>, f64) {
        let m = self.m as f64;
        let k = (mask as u32).count_ones() as f64;
        let c = if with_cost { k / m } else { 0.0 };
        let yd = duals[self.m];
        let yl = duals[self.m + 1];
        let mut total = -yl / m;
        let mut digits = vec![0; self.m];
        for f in 0..self.m {
            let inside = mask >> f & 1 == 1;
            let mut best = (0usize, f64::INFINITY);
            for (j, &(dj, rj)) in self.grid.iter().enumerate() {
                let v = if inside { c * rj - yd * dj / m } else { c * rj };
                if v < best.1 - 1e-15 {
                    best = (j, v);
                }
            }
            if inside {
                total -= duals[f];
            }
            digits[f] = best.0;
            total += best.1;
        }
        (digits, total)
    }
}

impl<'a> ColumnSource<f64> for ProfileColumns<'a> {
    fn num_rows(&self) -> usize {
        self.m + 2
    }
    fn num_columns(&self) -> usize {
        ((1usize << self.m) - 1) * self.profiles
    }
    fn column(&self, j: usize) -> (f64, Vec<f64>) {
        let (mask, digits) = self.decode(j);
        let m = self.m as f64;
        let mut a = vec![0.0; self.m + 2];
        let mut k = 0.0;
        let mut dsum = 0.0;
        let rate: f64 = digits.iter().map(|&d| self.grid[d].1).sum();
        for f in 0..self.m {
            if mask >> f & 1 == 1 {
                a[f] = 1.0;
                k += 1.0;
                dsum += self.grid[digits[f]].0;
            }
        }
        a[self.m] = dsum / m;
        a[self.m + 1] = 1.0 / m;
        (k / m * rate, a)
    }
    fn price(&self, duals: &[f64], with_cost: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for mask in 1..(1usize << self.m) {
            let (digits, d) = self.best_in_mask(mask, duals, with_cost);
            if d.is_neg() && best.map_or(true, |b| d < b.1) {
                best = Some((self.encode(mask, &digits), d));
            }
        }
        best
    }
}

/// Optimum over all queries whose per-file distortions lie on the grid of a
/// piecewise-linear curve, for any P(q|m). Columns are priced by a separable oracle.
pub fn pwl_lp_solve(m: usize, curve: &RateDistortionCurve, l: f64, d: f64, budget: u64) -> Result<Option<f64>> {
    let grid = curve.breakpoints().ok_or_else(|| Error::Unsupported("curve is not piecewise linear".into()))?;
    let s = grid.len() as u64;
    let profiles = s.checked_pow(m as u32).filter(|&p| p <= budget).ok_or_else(|| {
        Error::Limit(format!("{s}^{m} distortion profiles exceed the budget {budget}; use symmetric_family_solve"))
    })?;
    let src = ProfileColumns { m, grid, profiles: profiles as usize };
    let mut cmps = vec![Cmp::Eq; m];
    cmps.extend([Cmp::Le, Cmp::Le]);
    let mut rhs = vec![1.0; m];
    rhs.extend([d, l]);
    match solve_columns(&src, &cmps, &rhs)? {
        ColumnOutcome::Optimal(sol) => Ok(Some(sol.objective)),
        ColumnOutcome::Infeasible => Ok(None),
        ColumnOutcome::Unbounded => Err(Error::Numerical("unbounded profile LP".into())),
    }
}

/// Rate of a fixed P(q|m) when each requested entry may only use distortions
/// mixed from the curve's grid points. Separable per (q, m), so columns are
/// (entry, grid point) rather than full profiles.
pub fn pwl_fixed_p_solve(p: &QueryDistribution<f64>, curve: &RateDistortionCurve, d: f64) -> Result<Option<f64>> {
    let grid = curve.breakpoints().ok_or_else(|| Error::Unsupported("curve is not piecewise linear".into()))?;
    let mm = p.num_files();
    let entries: Vec<(usize, usize)> =
        (0..p.num_queries()).flat_map(|q| (0..mm).map(move |m| (q, m))).filter(|&(q, m)| *p.get(m, q) > 0.0).collect();
    let rows = entries.len() + 1;
    let mut costs = Vec::new();
    let mut columns = Vec::new();
    for (e, &(q, m)) in entries.iter().enumerate() {
        let pj = p.get(m, q) / mm as f64;
        for &(dj, rj) in grid {
            let mut a = vec![0.0; rows];
            a[e] = 1.0;
            a[rows - 1] = pj * dj;
            costs.push(p.marginal(q) * rj);
            columns.push(a);
        }
    }
    let src = ExplicitColumns { rows, costs, columns };
    let mut cmps = vec![Cmp::Eq; entries.len()];
    cmps.push(Cmp::Le);
    let mut rhs = vec![1.0; entries.len()];
    rhs.push(d);
    match solve_columns(&src, &cmps, &rhs)? {
        ColumnOutcome::Optimal(sol) => Ok(Some(sol.objective)),
        ColumnOutcome::Infeasible => Ok(None),
        ColumnOutcome::Unbounded => Err(Error::Numerical("unbounded fixed-P LP".into())),
    }
}

/// Symmetric family on a float piecewise-linear curve.
pub fn symmetric_family_pwl(m: usize, curve: &RateDistortionCurve, l: f64, d: f64) -> Result<Option<SymmetricSolution<f64>>> {
    let grid = curve.breakpoints().ok_or_else(|| Error::Unsupported("curve is not piecewise linear".into()))?;
    symmetric_family_solve(m, grid, &l, &d)
}

/// Symmetric family on the exact rational image of a piecewise-linear curve.
pub fn symmetric_family_exact(m: usize, curve: &RateDistortionCurve, l: &Rational, d: &Rational) -> Result<Option<SymmetricSolution<Rational>>> {
    symmetric_family_solve(m, &exact_breakpoints(curve)?, l, d)
}

/// 1/N as an exact rational.
pub fn inv(n: usize) -> Rational {
    ratio(1, n as i64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::int;
    use crate::ratedist::{hb, pwl_approximate, uniform_grid};

    #[test]
    fn single_query_single_file() {
        let p = QueryDistribution::new(vec![vec![1.0]]).unwrap();
        let c = RateDistortionCurve::binary();
        for &d in &[0.05, 0.2, 0.4] {
            let (a, r) = kkt_inner_solve(&p, &c, d).unwrap();
            assert!((a.d[0][0] - d).abs() < 1e-10);
            assert!((r - c.eval(d).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn pairs_or_all_stationarity() {
        let c = RateDistortionCurve::binary();
        let p = pairs_or_all();
        for &d in &[0.05, 0.1, 0.2, 0.3] {
            let (a, r) = kkt_inner_solve(&p, &c, d).unwrap();
            let d1 = a.d[0][0];
            let d2 = a.d[0][3];
            assert!((2.0 * c.derivative(d1).unwrap() - 3.0 * c.derivative(d2).unwrap()).abs() < 1e-9);
            assert!(((d1 + d2) / 2.0 - d).abs() < 1e-9);
            assert!(a.d[2][0] == 0.5);
            assert!(r < 2.5 * (1.0 - hb(d)));
        }
    }

    #[test]
    fn zero_and_full_distortion() {
        let c = RateDistortionCurve::kary(64).unwrap();
        let (_, r) = kkt_inner_solve(&single_or_all(), &c, 0.0).unwrap();
        assert!((r - 15.0).abs() < 1e-12);
        let (_, r) = kkt_inner_solve(&single_or_all(), &c, c.d_max()).unwrap();
        assert!(r.abs() < 1e-12);
    }

    #[test]
    fn endpoints_and_baseline() {
        let b = RateDistortionCurve::binary();
        assert_eq!(cor2_rate(16, &b, 0.0, Endpoint::NoLeakage).unwrap(), 16.0);
        assert_eq!(cor2_rate(16, &b, 0.5, Endpoint::NoLeakage).unwrap(), 0.0);
        let k = RateDistortionCurve::kary(64).unwrap();
        assert!((cor2_rate(3, &k, 0.0, Endpoint::NoPrivacy).unwrap() - 6.0).abs() < 1e-12);
        let (l, r) = wpir_lc_rate(2, 0.5, 1.0 - hb(0.1)).unwrap();
        assert!((l - 5.0 / 12.0).abs() < 1e-15);
        assert!((r - 2.5 * (1.0 - hb(0.1))).abs() < 1e-15);
        let (l, r) = wpir_lc_rate(4, 1.0, 0.3).unwrap();
        assert_eq!((l, r), (0.25, 1.2));
        assert!(wpir_lc_rate(0, 0.5, 1.0).is_err());
    }

    #[test]
    fn symmetric_family_endpoints_exact() {
        let (pwl, _) = pwl_approximate(&RateDistortionCurve::binary(), &uniform_grid(0.5, 21)).unwrap();
        let bps = exact_breakpoints(&pwl).unwrap();
        for m in [2usize, 3] {
            for dn in [0i64, 3, 10, 17, 20] {
                let d = ratio(dn, 40);
                let r = eval_exact_pwl(&bps, &d);
                let s = symmetric_family_exact(m, &pwl, &inv(m), &d).unwrap().unwrap();
                assert_eq!(s.rate, int(m as i64) * r.clone());
                let s = symmetric_family_exact(m, &pwl, &int(1), &d).unwrap().unwrap();
                assert_eq!(s.rate, r);
            }
        }
        assert!(symmetric_family_exact(3, &pwl, &ratio(1, 4), &ratio(1, 4)).is_err());
    }

    #[test]
    fn profile_lp_small_cases() {
        let (pwl, _) = pwl_approximate(&RateDistortionCurve::binary(), &uniform_grid(0.5, 11)).unwrap();
        // one file: the curve itself
        for &d in &[0.0, 0.07, 0.25] {
            let r = pwl_lp_solve(1, &pwl, 1.0, d, DEFAULT_PROFILE_BUDGET).unwrap().unwrap();
            assert!((r - pwl.eval(d).unwrap()).abs() < 1e-9);
        }
        // D = 0 on two files: 3 - 2L
        for &l in &[0.5, 0.75, 1.0] {
            let r = pwl_lp_solve(2, &pwl, l, 0.0, DEFAULT_PROFILE_BUDGET).unwrap().unwrap();
            assert!((r - (3.0 - 2.0 * l)).abs() < 1e-9, "L={l}: {r}");
        }
        assert!(pwl_lp_solve(5, &pwl, 0.5, 0.1, 1000).is_err());
    }

    #[test]
    fn profile_lp_beats_subset_baseline() {
        let (pwl, _) = pwl_approximate(&RateDistortionCurve::binary(), &uniform_grid(0.5, 41)).unwrap();
        for &d in &[0.1, 0.2, 0.3] {
            let r = pwl_lp_solve(3, &pwl, 5.0 / 12.0, d, DEFAULT_PROFILE_BUDGET).unwrap().unwrap();
            assert!(r < 2.5 * (1.0 - hb(d)) - 1e-3);
        }
    }
}
