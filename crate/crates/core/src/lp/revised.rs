//! Revised simplex for programs with few rows and many (possibly implicit) columns.
//!
//! Columns come from a [`ColumnSource`], which may price them lazily. The basis
//! inverse is rebuilt from scratch each iteration, which is cheap for the row
//! counts used here (at most a few dozen).

use crate::error::{Error, Result};
use crate::lp::dense::Cmp;
use crate::numeric::Scalar;

pub trait ColumnSource<T: Scalar>: Sync {
    fn num_rows(&self) -> usize;
    fn num_columns(&self) -> usize;
    /// Cost and dense coefficient vector of column `j`.
    fn column(&self, j: usize) -> (T, Vec<T>);

    /// Column with the most negative reduced cost `c_j - y·a_j`, if any is negative.
    /// With `with_cost == false` the costs are taken as zero (phase 1).
    fn price(&self, duals: &[T], with_cost: bool) -> Option<(usize, T)> {
        let mut best: Option<(usize, T)> = None;
        for j in 0..self.num_columns() {
            let d = reduced_cost(self.column(j), duals, with_cost);
            if d.is_neg() && best.as_ref().map_or(true, |(_, b)| d < *b) {
                best = Some((j, d));
            }
        }
        best
    }

    /// Lowest-index column with negative reduced cost (Bland's rule).
    fn first_negative(&self, duals: &[T], with_cost: bool) -> Option<(usize, T)> {
        (0..self.num_columns()).find_map(|j| {
            let d = reduced_cost(self.column(j), duals, with_cost);
            d.is_neg().then_some((j, d))
        })
    }
}

pub fn reduced_cost<T: Scalar>((c, a): (T, Vec<T>), duals: &[T], with_cost: bool) -> T {
    let mut d = if with_cost { c } else { T::zero() };
    for (ai, yi) in a.iter().zip(duals) {
        if !ai.is_zero_tol() {
            d = d - ai.clone() * yi.clone();
        }
    }
    d
}

/// A fully materialized column set.
pub struct ExplicitColumns<T> {
    pub rows: usize,
    pub costs: Vec<T>,
    pub columns: Vec<Vec<T>>,
}

impl<T: Scalar> ColumnSource<T> for ExplicitColumns<T> {
    fn num_rows(&self) -> usize {
        self.rows
    }
    fn num_columns(&self) -> usize {
        self.costs.len()
    }
    fn column(&self, j: usize) -> (T, Vec<T>) {
        (self.costs[j].clone(), self.columns[j].clone())
    }
}

#[derive(Debug, Clone)]
pub struct ColumnSolution<T> {
    /// Nonzero source columns in the optimal basis.
    pub x: Vec<(usize, T)>,
    pub objective: T,
    pub duals: Vec<T>,
}

#[derive(Debug, Clone)]
pub enum ColumnOutcome<T> {
    Optimal(ColumnSolution<T>),
    Infeasible,
    Unbounded,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Var {
    Source(usize),
    Slack(usize),
    Artificial(usize),
}

const MAX_ITERATIONS: usize = 200_000;
const DEGENERATE_SWITCH: usize = 50;

struct State<'a, T: Scalar, S: ColumnSource<T> + ?Sized> {
    src: &'a S,
    sign: Vec<T>,
    cmps: Vec<Cmp>,
    b: Vec<T>,
    basis: Vec<Var>,
}

impl<'a, T: Scalar, S: ColumnSource<T> + ?Sized> State<'a, T, S> {
    fn m(&self) -> usize {
        self.b.len()
    }

    fn col(&self, v: Var) -> Vec<T> {
        let m = self.m();
        match v {
            Var::Source(j) => {
                let (_, a) = self.src.column(j);
                a.into_iter().zip(&self.sign).map(|(x, s)| x * s.clone()).collect()
            }
            Var::Slack(i) => {
                let mut e = vec![T::zero(); m];
                e[i] = if self.cmps[i] == Cmp::Ge { -T::one() } else { T::one() };
                e
            }
            Var::Artificial(i) => {
                let mut e = vec![T::zero(); m];
                e[i] = T::one();
                e
            }
        }
    }

    fn cost(&self, v: Var, phase1: bool) -> T {
        match (v, phase1) {
            (Var::Artificial(_), true) => T::one(),
            (Var::Source(j), false) => self.src.column(j).0,
            _ => T::zero(),
        }
    }

    /// Inverse of the basis matrix, row-major.
    fn inverse(&self) -> Result<Vec<Vec<T>>> {
        let m = self.m();
        let cols: Vec<Vec<T>> = self.basis.iter().map(|&v| self.col(v)).collect();
        // a[i][k] = entry i of basis column k, augmented with identity
        let mut a: Vec<Vec<T>> = (0..m)
            .map(|i| {
                let mut row: Vec<T> = (0..m).map(|k| cols[k][i].clone()).collect();
                row.extend((0..m).map(|k| if k == i { T::one() } else { T::zero() }));
                row
            })
            .collect();
        for c in 0..m {
            let mut p = None;
            let mut best = T::zero();
            for r in c..m {
                let v = a[r][c].abs_val();
                if !v.is_zero_tol() && (p.is_none() || (!T::EXACT && v > best)) {
                    best = v;
                    p = Some(r);
                    if T::EXACT {
                        break;
                    }
                }
            }
            let p = p.ok_or_else(|| Error::Numerical("singular basis".into()))?;
            a.swap(c, p);
            let piv = a[c][c].clone();
            for j in 0..2 * m {
                a[c][j] = a[c][j].clone() / piv.clone();
            }
            let prow = a[c].clone();
            for r in 0..m {
                if r != c && !a[r][c].is_zero_tol() {
                    let f = a[r][c].clone();
                    for j in 0..2 * m {
                        if !prow[j].is_zero_tol() {
                            a[r][j] = a[r][j].clone() - f.clone() * prow[j].clone();
                        }
                    }
                }
            }
        }
        Ok(a.into_iter().map(|row| row[m..].to_vec()).collect())
    }

    fn iterate(&mut self, phase1: bool) -> Result<bool> {
        let m = self.m();
        let mut degenerate = 0usize;
        for _ in 0..MAX_ITERATIONS {
            let binv = self.inverse()?;
            let xb: Vec<T> = (0..m).map(|i| dot(&binv[i], &self.b)).collect();
            let cb: Vec<T> = self.basis.iter().map(|&v| self.cost(v, phase1)).collect();
            let y: Vec<T> = (0..m)
                .map(|k| (0..m).fold(T::zero(), |acc, i| acc + cb[i].clone() * binv[i][k].clone()))
                .collect();
            let bland = degenerate >= DEGENERATE_SWITCH;
            let entering = self.choose_entering(&y, phase1, bland);
            let Some(q) = entering else {
                return Ok(true);
            };
            let aq = self.col(q);
            let d: Vec<T> = (0..m).map(|i| dot(&binv[i], &aq)).collect();
            let mut leave: Option<(usize, T)> = None;
            for i in 0..m {
                if !d[i].is_pos() {
                    continue;
                }
                let r = xb[i].clone() / d[i].clone();
                leave = match leave {
                    None => Some((i, r)),
                    Some((li, lr)) => {
                        let better = r < lr || (!(r > lr) && var_key(self.basis[i]) < var_key(self.basis[li]));
                        if better {
                            Some((i, r))
                        } else {
                            Some((li, lr))
                        }
                    }
                };
            }
            let Some((r, step)) = leave else {
                return Ok(false);
            };
            if step.is_zero_tol() {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.basis[r] = q;
        }
        Err(Error::Numerical("simplex iteration limit reached".into()))
    }

    fn choose_entering(&self, y: &[T], phase1: bool, bland: bool) -> Option<Var> {
        let m = self.m();
        let in_basis = |v: Var| self.basis.contains(&v);
        // duals as seen by unflipped source columns
        let ys: Vec<T> = y.iter().zip(&self.sign).map(|(a, s)| a.clone() * s.clone()).collect();
        let mut best: Option<(Var, T)> = None;
        let consider = |v: Var, d: T, best: &mut Option<(Var, T)>| {
            if d.is_neg() && best.as_ref().map_or(true, |(_, b)| d < *b) {
                *best = Some((v, d));
            }
        };
        let src = if bland { self.src.first_negative(&ys, !phase1) } else { self.src.price(&ys, !phase1) };
        if let Some((j, d)) = src {
            if !in_basis(Var::Source(j)) {
                if bland {
                    return Some(Var::Source(j));
                }
                consider(Var::Source(j), d, &mut best);
            }
        }
        for i in 0..m {
            if self.cmps[i] == Cmp::Eq {
                continue;
            }
            let v = Var::Slack(i);
            if in_basis(v) {
                continue;
            }
            let a = if self.cmps[i] == Cmp::Ge { -T::one() } else { T::one() };
            let d = -(a * y[i].clone());
            if bland && d.is_neg() {
                return Some(v);
            }
            consider(v, d, &mut best);
        }
        best.map(|(v, _)| v)
    }
}

fn var_key(v: Var) -> (u8, usize) {
    match v {
        Var::Source(j) => (0, j),
        Var::Slack(i) => (1, i),
        Var::Artificial(i) => (2, i),
    }
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut s = T::zero();
    for (x, y) in a.iter().zip(b) {
        if !x.is_zero_tol() && !y.is_zero_tol() {
            s = s + x.clone() * y.clone();
        }
    }
    s
}

/// minimize Σ c_j x_j over source columns subject to `rows[i] (cmp) rhs[i]`, x ≥ 0.
pub fn solve_columns<T: Scalar, S: ColumnSource<T> + ?Sized>(src: &S, cmps: &[Cmp], rhs: &[T]) -> Result<ColumnOutcome<T>> {
    let m = src.num_rows();
    if cmps.len() != m || rhs.len() != m {
        return Err(Error::Dimension("row descriptions do not match the column source".into()));
    }
    let mut sign = Vec::with_capacity(m);
    let mut kinds = Vec::with_capacity(m);
    let mut b = Vec::with_capacity(m);
    for i in 0..m {
        let neg = rhs[i].is_neg();
        sign.push(if neg { -T::one() } else { T::one() });
        b.push(if neg { -rhs[i].clone() } else { rhs[i].clone() });
        kinds.push(match (cmps[i], neg) {
            (Cmp::Le, true) => Cmp::Ge,
            (Cmp::Ge, true) => Cmp::Le,
            (c, _) => c,
        });
    }
    let basis = (0..m).map(|i| if kinds[i] == Cmp::Le { Var::Slack(i) } else { Var::Artificial(i) }).collect();
    let mut st = State { src, sign, cmps: kinds, b, basis };
    if st.basis.iter().any(|v| matches!(v, Var::Artificial(_))) {
        st.iterate(true)?;
        let binv = st.inverse()?;
        let infeas = (0..m)
            .filter(|&i| matches!(st.basis[i], Var::Artificial(_)))
            .map(|i| dot(&binv[i], &st.b))
            .fold(T::zero(), |a, v| a + v);
        if infeas.is_pos() {
            return Ok(ColumnOutcome::Infeasible);
        }
        st.drive_out_artificials()?;
    }
    if !st.iterate(false)? {
        return Ok(ColumnOutcome::Unbounded);
    }
    let binv = st.inverse()?;
    let xb: Vec<T> = (0..m).map(|i| dot(&binv[i], &st.b)).collect();
    let cb: Vec<T> = st.basis.iter().map(|&v| st.cost(v, false)).collect();
    let y: Vec<T> = (0..m)
        .map(|k| (0..m).fold(T::zero(), |acc, i| acc + cb[i].clone() * binv[i][k].clone()))
        .collect();
    let mut x = Vec::new();
    let mut objective = T::zero();
    for i in 0..m {
        if let Var::Source(j) = st.basis[i] {
            if !xb[i].is_zero_tol() {
                objective = objective + cb[i].clone() * xb[i].clone();
                x.push((j, xb[i].clone()));
            }
        }
    }
    x.sort_by_key(|p| p.0);
    let duals = y.into_iter().zip(&st.sign).map(|(v, s)| v * s.clone()).collect();
    Ok(ColumnOutcome::Optimal(ColumnSolution { x, objective, duals }))
}

impl<'a, T: Scalar, S: ColumnSource<T> + ?Sized> State<'a, T, S> {
    /// After phase 1, swaps zero-level artificials for structural columns. An
    /// artificial that cannot leave sits on a redundant row and stays at zero.
    fn drive_out_artificials(&mut self) -> Result<()> {
        let m = self.m();
        for r in 0..m {
            if !matches!(self.basis[r], Var::Artificial(_)) {
                continue;
            }
            let binv = self.inverse()?;
            let mut candidates: Vec<Var> = (0..m).filter(|&i| self.cmps[i] != Cmp::Eq).map(Var::Slack).collect();
            let limit = self.src.num_columns().min(1_000_000);
            candidates.extend((0..limit).map(Var::Source));
            for v in candidates {
                if self.basis.contains(&v) {
                    continue;
                }
                let a = self.col(v);
                if !dot(&binv[r], &a).is_zero_tol() {
                    self.basis[r] = v;
                    break;
                }
            }
        }
        Ok(())
    }
}
