//! The rate-minimization LP over a pool of response functions, and tradeoff sweeps.
//!
//! Given points c_q = (R_q, D_q^(1), ..., D_q^(M)) the program is
//!
//! ```text
//! minimize   (1/M) Σ_m Σ_q P(q|m) R_q
//! subject to Σ_q P(q|m) = 1                 for every m
//!            (1/M) Σ_m Σ_q P(q|m) D_q^(m) ≤ D
//!            (1/M) Σ_q ξ_q ≤ L
//!            0 ≤ P(q|m) ≤ ξ_q
//! ```
//!
//! Two interchangeable solvers are provided: the literal program on a dense
//! tableau, and an equivalent form over "flat" queries (equal mass on a subset of
//! files, zero elsewhere) solved by the revised simplex. Splitting any query
//! into flat layers keeps rate, distortion and leakage unchanged, so both have
//! the same optimum.

pub mod dense;
pub mod revised;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{Rational, Scalar};
use crate::ratedist::{TradeoffCurve, TradeoffPoint};
pub use dense::{solve_dense, Cmp, LinearProgram, LpOutcome};
pub use revised::{solve_columns, ColumnOutcome, ColumnSource, ExplicitColumns};

/// P(q|m) for files m (rows) and queries q (columns).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryDistribution<T> {
    rows: Vec<Vec<T>>,
}

impl<T: Scalar> QueryDistribution<T> {
    pub fn new(rows: Vec<Vec<T>>) -> Result<Self> {
        let q = rows.first().map(|r| r.len()).ok_or_else(|| Error::Invalid("no files".into()))?;
        for (m, r) in rows.iter().enumerate() {
            if r.len() != q {
                return Err(Error::Dimension(format!("row {m} has {} queries, expected {q}", r.len())));
            }
            if r.iter().any(|p| p.is_neg()) {
                return Err(Error::Invalid(format!("negative probability in row {m}")));
            }
            let s = r.iter().fold(T::zero(), |a, p| a + p.clone());
            if !(s - T::one()).is_zero_tol() {
                return Err(Error::Invalid(format!("row {m} does not sum to 1")));
            }
        }
        Ok(Self { rows })
    }

    pub fn num_files(&self) -> usize {
        self.rows.len()
    }

    pub fn num_queries(&self) -> usize {
        self.rows[0].len()
    }

    pub fn rows(&self) -> &[Vec<T>] {
        &self.rows
    }

    pub fn get(&self, m: usize, q: usize) -> &T {
        &self.rows[m][q]
    }

    /// P_Q(q) under a uniformly chosen file.
    pub fn marginal(&self, q: usize) -> T {
        let s = self.rows.iter().fold(T::zero(), |a, r| a + r[q].clone());
        s / T::from_ratio(self.num_files() as i64, 1)
    }

    /// Success probability of the server's ML guess: (1/M) Σ_q max_m P(q|m).
    pub fn leakage(&self) -> T {
        let mut total = T::zero();
        for q in 0..self.num_queries() {
            let mut best = self.rows[0][q].clone();
            for r in &self.rows[1..] {
                if r[q] > best {
                    best = r[q].clone();
                }
            }
            total = total + best;
        }
        total / T::from_ratio(self.num_files() as i64, 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LpStatus {
    Optimal,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution<T> {
    pub status: LpStatus,
    /// Minimum rate (bits per symbol); `None` when infeasible.
    pub objective: Option<T>,
    pub p: Option<QueryDistribution<T>>,
    pub xi: Vec<T>,
}

impl<T: Scalar> LpSolution<T> {
    fn infeasible() -> Self {
        Self { status: LpStatus::Infeasible, objective: None, p: None, xi: Vec::new() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    /// Dense tableau for small exact problems, flat-query columns otherwise.
    #[default]
    Auto,
    Dense,
    Columns,
}

fn check_pool<T: Scalar>(points: &[Vec<T>], m: usize) -> Result<()> {
    if points.is_empty() {
        return Err(Error::Invalid("empty pool".into()));
    }
    if m == 0 {
        return Err(Error::Invalid("M must be positive".into()));
    }
    if let Some(p) = points.iter().find(|p| p.len() != m + 1) {
        return Err(Error::Dimension(format!("pool point has {} coordinates, expected M+1 = {}", p.len(), m + 1)));
    }
    Ok(())
}

/// The literal program as a [`LinearProgram`]. Variables: P(q|m) at `q*M + m`, then ξ_q.
pub fn eq7_program<T: Scalar>(points: &[Vec<T>], m: usize, d: &T, l: &T) -> LinearProgram<T> {
    let nq = points.len();
    let mm = T::from_ratio(m as i64, 1);
    let pv = |q: usize, f: usize| q * m + f;
    let xv = |q: usize| nq * m + q;
    let mut obj = vec![T::zero(); nq * m + nq];
    for q in 0..nq {
        for f in 0..m {
            obj[pv(q, f)] = points[q][0].clone() / mm.clone();
        }
    }
    let mut lp = LinearProgram::new(nq * m + nq, obj);
    for f in 0..m {
        lp.add((0..nq).map(|q| (pv(q, f), T::one())).collect(), Cmp::Eq, T::one());
    }
    let mut drow = Vec::new();
    for q in 0..nq {
        for f in 0..m {
            if !points[q][1 + f].is_zero_tol() {
                drow.push((pv(q, f), points[q][1 + f].clone() / mm.clone()));
            }
        }
    }
    lp.add(drow, Cmp::Le, d.clone());
    lp.add((0..nq).map(|q| (xv(q), T::one() / mm.clone())).collect(), Cmp::Le, l.clone());
    for q in 0..nq {
        for f in 0..m {
            lp.add(vec![(pv(q, f), T::one()), (xv(q), -T::one())], Cmp::Le, T::zero());
        }
    }
    lp
}

/// Flat-query columns: column `q * (2^M - 1) + (mask - 1)` puts equal mass on the files in `mask`.
struct FlatColumns<'a, T> {
    points: &'a [Vec<T>],
    m: usize,
    inv_m: T,
}

impl<'a, T: Scalar> FlatColumns<'a, T> {
    fn masks(&self) -> usize {
        (1usize << self.m) - 1
    }
}

impl<'a, T: Scalar> ColumnSource<T> for FlatColumns<'a, T> {
    fn num_rows(&self) -> usize {
        self.m + 2
    }
    fn num_columns(&self) -> usize {
        self.points.len() * self.masks()
    }
    fn column(&self, j: usize) -> (T, Vec<T>) {
        let q = j / self.masks();
        let mask = j % self.masks() + 1;
        let p = &self.points[q];
        let mut a = vec![T::zero(); self.m + 2];
        let mut dsum = T::zero();
        let mut k = 0i64;
        for f in 0..self.m {
            if mask >> f & 1 == 1 {
                a[f] = T::one();
                dsum = dsum + p[1 + f].clone();
                k += 1;
            }
        }
        a[self.m] = dsum * self.inv_m.clone();
        a[self.m + 1] = self.inv_m.clone();
        (p[0].clone() * T::from_ratio(k, 1) * self.inv_m.clone(), a)
    }
}

/// Solves the program for one (D, L) target.
pub fn build_and_solve_lp<T: Scalar>(points: &[Vec<T>], m: usize, d: &T, l: &T, method: Method) -> Result<LpSolution<T>> {
    check_pool(points, m)?;
    let method = match method {
        Method::Auto if T::EXACT && points.len() * m <= 160 => Method::Dense,
        Method::Auto => Method::Columns,
        other => other,
    };
    match method {
        Method::Dense => solve_literal(points, m, d, l),
        _ => solve_flat(points, m, d, l),
    }
}

fn solve_literal<T: Scalar>(points: &[Vec<T>], m: usize, d: &T, l: &T) -> Result<LpSolution<T>> {
    let lp = eq7_program(points, m, d, l);
    match solve_dense(&lp) {
        LpOutcome::Optimal { x, objective, .. } => {
            let nq = points.len();
            let rows = (0..m).map(|f| (0..nq).map(|q| x[q * m + f].clone()).collect()).collect();
            let xi = x[nq * m..].to_vec();
            Ok(LpSolution { status: LpStatus::Optimal, objective: Some(objective), p: Some(QueryDistribution { rows }), xi })
        }
        LpOutcome::Infeasible => Ok(LpSolution::infeasible()),
        LpOutcome::Unbounded => Err(Error::Numerical("rate LP reported unbounded".into())),
    }
}

fn solve_flat<T: Scalar>(points: &[Vec<T>], m: usize, d: &T, l: &T) -> Result<LpSolution<T>> {
    if m > 20 {
        return Err(Error::Limit(format!("flat-query formulation needs 2^M columns per point; M = {m}")));
    }
    let src = FlatColumns { points, m, inv_m: T::one() / T::from_ratio(m as i64, 1) };
    let mut cmps = vec![Cmp::Eq; m];
    cmps.push(Cmp::Le);
    cmps.push(Cmp::Le);
    let mut rhs = vec![T::one(); m];
    rhs.push(d.clone());
    rhs.push(l.clone());
    match solve_columns(&src, &cmps, &rhs)? {
        ColumnOutcome::Optimal(sol) => {
            let nq = points.len();
            let mut rows = vec![vec![T::zero(); nq]; m];
            let mut xi = vec![T::zero(); nq];
            for (j, w) in &sol.x {
                let q = j / src.masks();
                let mask = j % src.masks() + 1;
                xi[q] = xi[q].clone() + w.clone();
                for (f, row) in rows.iter_mut().enumerate() {
                    if mask >> f & 1 == 1 {
                        row[q] = row[q].clone() + w.clone();
                    }
                }
            }
            Ok(LpSolution { status: LpStatus::Optimal, objective: Some(sol.objective), p: Some(QueryDistribution { rows }), xi })
        }
        ColumnOutcome::Infeasible => Ok(LpSolution::infeasible()),
        ColumnOutcome::Unbounded => Err(Error::Numerical("rate LP reported unbounded".into())),
    }
}

/// Largest violation of the program's constraints at a reported solution.
pub fn solution_residual<T: Scalar>(points: &[Vec<T>], m: usize, d: &T, l: &T, sol: &LpSolution<T>) -> f64 {
    let Some(p) = &sol.p else { return 0.0 };
    let nq = points.len();
    let mut x = Vec::with_capacity(nq * m + nq);
    for q in 0..nq {
        for f in 0..m {
            x.push(p.rows[f][q].clone());
        }
    }
    x.extend(sol.xi.iter().cloned());
    eq7_program(points, m, d, l).max_violation(&x)
}

/// Per-grid-point solutions at a fixed leakage.
#[derive(Debug, Clone)]
pub struct Sweep<T> {
    pub curve: TradeoffCurve,
    /// Grid distortions at which the pool cannot reach the target.
    pub infeasible: Vec<f64>,
    pub solutions: Vec<LpSolution<T>>,
}

/// Solves the program across `grid` (sorted) at leakage `l` and checks the result
/// is convex and nonincreasing in D.
pub fn tradeoff_sweep<T: Scalar>(points: &[Vec<T>], m: usize, l: &T, grid: &[T], label: &str) -> Result<Sweep<T>> {
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Invalid("distortion grid must be sorted".into()));
    }
    let solutions: Vec<LpSolution<T>> =
        grid.par_iter().map(|d| build_and_solve_lp(points, m, d, l, Method::Auto)).collect::<Result<_>>()?;
    let lf = l.to_f64();
    let mut pts = Vec::new();
    let mut infeasible = Vec::new();
    for (d, s) in grid.iter().zip(&solutions) {
        match &s.objective {
            Some(r) => pts.push(TradeoffPoint { distortion: d.to_f64(), rate: r.to_f64(), leakage: lf }),
            None => infeasible.push(d.to_f64()),
        }
    }
    let curve = TradeoffCurve::new(label, pts);
    curve
        .check_convex_nonincreasing(1e-9)
        .map_err(|e| Error::Numerical(format!("tradeoff curve check failed: {e}")))?;
    Ok(Sweep { curve, infeasible, solutions })
}

/// Converts rational pool points to floats.
pub fn points_to_f64(points: &[Vec<Rational>]) -> Vec<Vec<f64>> {
    points.iter().map(|p| p.iter().map(|x| x.to_f64()).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{int, ratio};

    fn table_points() -> Vec<Vec<Rational>> {
        // the four filtered points of the M = 2, β = 1 table
        vec![
            vec![int(2), int(0), int(0)],
            vec![int(1), int(0), ratio(1, 2)],
            vec![int(1), ratio(1, 2), int(0)],
            vec![int(0), ratio(1, 2), ratio(1, 2)],
        ]
    }

    #[test]
    fn leakage_examples() {
        let q = ratio(1, 4);
        let z = int(0);
        let h = ratio(1, 2);
        let p1 = QueryDistribution::new(vec![
            vec![q.clone(), q.clone(), z.clone(), h.clone()],
            vec![q.clone(), z.clone(), q.clone(), h.clone()],
            vec![z.clone(), q.clone(), q.clone(), h.clone()],
        ])
        .unwrap();
        assert_eq!(p1.leakage(), ratio(5, 12));
        let t = ratio(3, 4);
        let p2 = QueryDistribution::new(vec![
            vec![q.clone(), z.clone(), z.clone(), t.clone()],
            vec![z.clone(), q.clone(), z.clone(), t.clone()],
            vec![z.clone(), z.clone(), q.clone(), t.clone()],
        ])
        .unwrap();
        assert_eq!(p2.leakage(), h);
        let same = QueryDistribution::new(vec![vec![h.clone(), h.clone()]; 4]).unwrap();
        assert_eq!(same.leakage(), q);
        assert!(QueryDistribution::new(vec![vec![h.clone(), q]]).is_err());
    }

    #[test]
    fn closed_form_points_on_small_pool() {
        let pts = table_points();
        let s = build_and_solve_lp(&pts, 2, &int(0), &ratio(1, 2), Method::Dense).unwrap();
        assert_eq!(s.objective, Some(int(2)));
        let s = build_and_solve_lp(&pts, 2, &ratio(1, 2), &int(1), Method::Dense).unwrap();
        assert_eq!(s.objective, Some(int(0)));
        let p = s.p.unwrap();
        assert_eq!(p.rows()[0][3], int(1));
        assert_eq!(p.rows()[1][3], int(1));
    }

    #[test]
    fn both_methods_agree_exactly() {
        let pts = table_points();
        for dn in 0..=4 {
            for ln in [6, 8, 9, 12] {
                let d = ratio(dn, 8);
                let l = ratio(ln, 12);
                let a = build_and_solve_lp(&pts, 2, &d, &l, Method::Dense).unwrap();
                let b = build_and_solve_lp(&pts, 2, &d, &l, Method::Columns).unwrap();
                assert_eq!(a.objective, b.objective, "D={d} L={l}");
                let expect = if d <= int(1) - l.clone() {
                    int(3) - int(2) * l.clone() - int(4) * d.clone()
                } else {
                    int(1) - int(2) * d.clone()
                };
                assert_eq!(a.objective.unwrap(), expect);
                assert_eq!(solution_residual(&pts, 2, &d, &l, &b), 0.0);
            }
        }
    }

    #[test]
    fn infeasible_target_is_a_status() {
        let pts = vec![vec![int(1), ratio(1, 4), ratio(1, 4)]];
        let s = build_and_solve_lp(&pts, 2, &ratio(1, 8), &int(1), Method::Auto).unwrap();
        assert_eq!(s.status, LpStatus::Infeasible);
        let s = build_and_solve_lp(&pts, 2, &ratio(1, 8), &int(1), Method::Columns).unwrap();
        assert_eq!(s.status, LpStatus::Infeasible);
    }

    #[test]
    fn sweep_reports_gaps_and_shape() {
        let pts = table_points();
        let grid = [int(0), ratio(1, 4), ratio(1, 2)];
        let sw = tradeoff_sweep(&pts, 2, &ratio(1, 2), &grid, "t").unwrap();
        let rates: Vec<f64> = sw.curve.points.iter().map(|p| p.rate).collect();
        assert_eq!(rates, vec![2.0, 1.0, 0.0]);
        let narrow = vec![vec![int(1), ratio(1, 4), ratio(1, 4)], vec![int(0), ratio(1, 2), ratio(1, 2)]];
        let sw = tradeoff_sweep(&narrow, 2, &int(1), &grid, "t").unwrap();
        assert_eq!(sw.infeasible, vec![0.0]);
        assert_eq!(sw.curve.points.len(), 2);
    }

    #[test]
    fn float_solver_matches() {
        let pts = points_to_f64(&table_points());
        let s = build_and_solve_lp(&pts, 2, &0.1, &0.75, Method::Auto).unwrap();
        assert!((s.objective.unwrap() - (3.0 - 1.5 - 0.4)).abs() < 1e-9);
    }
}
