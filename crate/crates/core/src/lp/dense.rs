//! Dense two-phase tableau simplex with Bland's rule.
//!
//! Exact over rationals; the same code runs over `f64` with a fixed tolerance.

use crate::numeric::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub struct Constraint<T> {
    pub coeffs: Vec<(usize, T)>,
    pub cmp: Cmp,
    pub rhs: T,
}

/// minimize c·x subject to the rows, x ≥ 0.
#[derive(Debug, Clone)]
pub struct LinearProgram<T> {
    pub num_vars: usize,
    pub objective: Vec<T>,
    pub rows: Vec<Constraint<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome<T> {
    /// `duals[i]` is the multiplier of row `i`: a feasible point of
    /// max b·y s.t. Aᵀy ≤ c with y ≤ 0 on ≤ rows and y ≥ 0 on ≥ rows.
    Optimal { x: Vec<T>, objective: T, duals: Vec<T> },
    Infeasible,
    Unbounded,
}

impl<T: Scalar> LinearProgram<T> {
    pub fn new(num_vars: usize, objective: Vec<T>) -> Self {
        assert_eq!(objective.len(), num_vars);
        Self { num_vars, objective, rows: Vec::new() }
    }

    pub fn add(&mut self, coeffs: Vec<(usize, T)>, cmp: Cmp, rhs: T) {
        debug_assert!(coeffs.iter().all(|(j, _)| *j < self.num_vars));
        self.rows.push(Constraint { coeffs, cmp, rhs });
    }

    /// Largest violation of the rows and of x ≥ 0 at `x`.
    pub fn max_violation(&self, x: &[T]) -> f64 {
        let mut worst: f64 = 0.0;
        for v in x {
            worst = worst.max(-v.to_f64());
        }
        for r in &self.rows {
            let lhs: f64 = r.coeffs.iter().map(|(j, a)| a.to_f64() * x[*j].to_f64()).sum();
            let b = r.rhs.to_f64();
            let v = match r.cmp {
                Cmp::Le => lhs - b,
                Cmp::Ge => b - lhs,
                Cmp::Eq => (lhs - b).abs(),
            };
            worst = worst.max(v);
        }
        worst
    }
}

struct Tableau<T> {
    // rows × (cols + 1), last column is the right-hand side
    t: Vec<Vec<T>>,
    cost: Vec<T>,
    basis: Vec<usize>,
    cols: usize,
}

impl<T: Scalar> Tableau<T> {
    fn pivot(&mut self, r: usize, c: usize) {
        let piv = self.t[r][c].clone();
        let width = self.cols + 1;
        for j in 0..width {
            if !self.t[r][j].is_zero_tol() {
                self.t[r][j] = self.t[r][j].clone() / piv.clone();
            } else {
                self.t[r][j] = T::zero();
            }
        }
        let prow = self.t[r].clone();
        let nz: Vec<usize> = (0..width).filter(|&j| !prow[j].is_zero_tol()).collect();
        for i in 0..self.t.len() {
            if i == r {
                continue;
            }
            let f = self.t[i][c].clone();
            if f.is_zero_tol() {
                continue;
            }
            let row = &mut self.t[i];
            for &j in &nz {
                row[j] = row[j].clone() - f.clone() * prow[j].clone();
            }
            row[c] = T::zero();
        }
        let f = self.cost[c].clone();
        if !f.is_zero_tol() {
            for &j in &nz {
                self.cost[j] = self.cost[j].clone() - f.clone() * prow[j].clone();
            }
            self.cost[c] = T::zero();
        }
        self.basis[r] = c;
    }

    /// Runs Bland's rule until optimal. Returns false when unbounded.
    fn run(&mut self, allowed: &dyn Fn(usize) -> bool) -> bool {
        loop {
            let Some(c) = (0..self.cols).find(|&j| allowed(j) && self.cost[j].is_neg()) else {
                return true;
            };
            let mut best: Option<(usize, T)> = None;
            for i in 0..self.t.len() {
                let a = &self.t[i][c];
                if !a.is_pos() {
                    continue;
                }
                let ratio = self.t[i][self.cols].clone() / a.clone();
                best = match best {
                    None => Some((i, ratio)),
                    Some((bi, br)) => {
                        if ratio < br || (!(ratio > br) && self.basis[i] < self.basis[bi]) {
                            Some((i, ratio))
                        } else {
                            Some((bi, br))
                        }
                    }
                };
            }
            match best {
                None => return false,
                Some((r, _)) => self.pivot(r, c),
            }
        }
    }
}

pub fn solve_dense<T: Scalar>(lp: &LinearProgram<T>) -> LpOutcome<T> {
    let n = lp.num_vars;
    let m = lp.rows.len();
    // normalize to nonnegative right-hand sides
    let mut flipped = vec![false; m];
    let mut cmps = Vec::with_capacity(m);
    for (i, r) in lp.rows.iter().enumerate() {
        let neg = r.rhs.is_neg();
        flipped[i] = neg;
        cmps.push(match (r.cmp, neg) {
            (Cmp::Le, true) => Cmp::Ge,
            (Cmp::Ge, true) => Cmp::Le,
            (c, _) => c,
        });
    }
    let n_slack = cmps.iter().filter(|c| **c != Cmp::Eq).count();
    let n_art = cmps.iter().filter(|c| **c != Cmp::Le).count();
    let cols = n + n_slack + n_art;
    let art_start = n + n_slack;
    let mut t = vec![vec![T::zero(); cols + 1]; m];
    let mut basis = vec![0; m];
    let mut identity_col = vec![0; m];
    let (mut s, mut a) = (n, art_start);
    for (i, r) in lp.rows.iter().enumerate() {
        let sign = if flipped[i] { -T::one() } else { T::one() };
        for (j, v) in &r.coeffs {
            t[i][*j] = t[i][*j].clone() + sign.clone() * v.clone();
        }
        t[i][cols] = sign * r.rhs.clone();
        match cmps[i] {
            Cmp::Le => {
                t[i][s] = T::one();
                basis[i] = s;
                identity_col[i] = s;
                s += 1;
            }
            Cmp::Ge => {
                t[i][s] = -T::one();
                s += 1;
                t[i][a] = T::one();
                basis[i] = a;
                identity_col[i] = a;
                a += 1;
            }
            Cmp::Eq => {
                t[i][a] = T::one();
                basis[i] = a;
                identity_col[i] = a;
                a += 1;
            }
        }
    }
    let is_art = |j: usize| j >= art_start && j < cols;

    // phase 1: minimize the sum of artificials
    let mut cost = vec![T::zero(); cols + 1];
    for j in art_start..cols {
        cost[j] = T::one();
    }
    for i in 0..m {
        if is_art(basis[i]) {
            for j in 0..=cols {
                if !t[i][j].is_zero_tol() {
                    cost[j] = cost[j].clone() - t[i][j].clone();
                }
            }
        }
    }
    let mut tab = Tableau { t, cost, basis, cols };
    if n_art > 0 {
        tab.run(&|_| true);
        // cost[cols] holds minus the phase-1 objective
        if (-tab.cost[cols].clone()).is_pos() {
            return LpOutcome::Infeasible;
        }
        // drive zero-level artificials out of the basis where possible
        for i in 0..m {
            if is_art(tab.basis[i]) {
                if let Some(j) = (0..art_start).find(|&j| !tab.t[i][j].is_zero_tol()) {
                    tab.pivot(i, j);
                }
            }
        }
    }

    // phase 2
    let mut cost = vec![T::zero(); cols + 1];
    for j in 0..n {
        cost[j] = lp.objective[j].clone();
    }
    for i in 0..m {
        let cb = if tab.basis[i] < n { lp.objective[tab.basis[i]].clone() } else { T::zero() };
        if cb.is_zero_tol() {
            continue;
        }
        for j in 0..=cols {
            if !tab.t[i][j].is_zero_tol() {
                cost[j] = cost[j].clone() - cb.clone() * tab.t[i][j].clone();
            }
        }
    }
    tab.cost = cost;
    if !tab.run(&|j| !is_art(j)) {
        return LpOutcome::Unbounded;
    }
    let mut x = vec![T::zero(); n];
    for i in 0..m {
        if tab.basis[i] < n {
            x[tab.basis[i]] = tab.t[i][cols].clone();
        }
    }
    let objective = -tab.cost[cols].clone();
    let duals = (0..m)
        .map(|i| {
            let y = -tab.cost[identity_col[i]].clone();
            if flipped[i] {
                -y
            } else {
                y
            }
        })
        .collect();
    LpOutcome::Optimal { x, objective, duals }
}
