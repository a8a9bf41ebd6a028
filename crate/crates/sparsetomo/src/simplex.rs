//! Exact two-phase simplex over the rationals.
//!
//! Solves `opt c^T x  s.t.  A x = b, x >= 0` on dense rational data with
//! Bland's pivoting rule, which guarantees termination. Built for the small
//! instances the exact uniqueness oracle works on, where certified exact
//! optima matter more than speed.

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// Result of an exact solve.
#[derive(Debug, Clone, PartialEq)]
pub enum ExactOutcome {
    Optimal { x: Vec<BigRational>, value: BigRational },
    Infeasible,
    Unbounded,
}

struct Tableau {
    rows: usize,
    cols: usize, // structural + artificial columns
    t: Vec<Vec<BigRational>>, // rows x (cols + 1), last column is rhs
    basis: Vec<usize>,
    structural: usize,
}

impl Tableau {
    fn rhs(&self, i: usize) -> &BigRational {
        &self.t[i][self.cols]
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let pivot = self.t[row][col].clone();
        for v in &mut self.t[row] {
            *v = &*v / &pivot;
        }
        for i in 0..self.rows {
            if i != row && !self.t[i][col].is_zero() {
                let factor = self.t[i][col].clone();
                for j in 0..=self.cols {
                    let sub = &factor * &self.t[row][j];
                    self.t[i][j] = &self.t[i][j] - sub;
                }
            }
        }
        self.basis[row] = col;
    }

    /// Bland's rule on the given cost row; entering columns restricted to
    /// `0..limit`. Returns false at optimality, true after one pivot, or an
    /// error row on unboundedness.
    fn step(&mut self, cost: &mut Vec<BigRational>, limit: usize) -> Result<bool, ()> {
        let entering = (0..limit).find(|&j| cost[j].is_negative());
        let Some(col) = entering else { return Ok(false) };
        let mut leave: Option<usize> = None;
        let mut best: Option<BigRational> = None;
        for i in 0..self.rows {
            if self.t[i][col].is_positive() {
                let ratio = self.rhs(i) / &self.t[i][col];
                let better = match &best {
                    None => true,
                    Some(b) => {
                        &ratio < b || (&ratio == b && self.basis[i] < self.basis[leave.unwrap()])
                    }
                };
                if better {
                    best = Some(ratio);
                    leave = Some(i);
                }
            }
        }
        let Some(row) = leave else { return Err(()) };
        self.pivot(row, col);
        // keep the cost row reduced
        if !cost[col].is_zero() {
            let factor = cost[col].clone();
            for j in 0..=self.cols {
                let sub = &factor * &self.t[row][j];
                cost[j] = &cost[j] - sub;
            }
        }
        Ok(true)
    }

    fn reduce_cost_row(&self, raw: &[BigRational]) -> Vec<BigRational> {
        let mut cost = raw.to_vec();
        cost.push(BigRational::zero());
        for i in 0..self.rows {
            let b = self.basis[i];
            if !cost[b].is_zero() {
                let factor = cost[b].clone();
                for j in 0..=self.cols {
                    let sub = &factor * &self.t[i][j];
                    cost[j] = &cost[j] - sub;
                }
            }
        }
        cost
    }

    fn solution(&self) -> Vec<BigRational> {
        let mut x = vec![BigRational::zero(); self.structural];
        for i in 0..self.rows {
            if self.basis[i] < self.structural {
                x[self.basis[i]] = self.rhs(i).clone();
            }
        }
        x
    }
}

/// Exactly optimizes `c^T x` over `{A x = b, x >= 0}`.
pub fn solve_exact(
    a: &[Vec<BigRational>],
    b: &[BigRational],
    c: &[BigRational],
    maximize: bool,
) -> ExactOutcome {
    let m = a.len();
    let n = if m > 0 { a[0].len() } else { c.len() };
    debug_assert_eq!(b.len(), m);
    debug_assert_eq!(c.len(), n);
    if m == 0 {
        // only the sign constraints remain
        let improvable = (0..n).any(|j| if maximize { c[j].is_positive() } else { c[j].is_negative() });
        if improvable {
            return ExactOutcome::Unbounded;
        }
        return ExactOutcome::Optimal { x: vec![BigRational::zero(); n], value: BigRational::zero() };
    }

    // phase 1: artificial basis on rows with b >= 0
    let cols = n + m;
    let mut t: Vec<Vec<BigRational>> = Vec::with_capacity(m);
    for i in 0..m {
        let flip = b[i].is_negative();
        let mut row: Vec<BigRational> = Vec::with_capacity(cols + 1);
        for j in 0..n {
            row.push(if flip { -a[i][j].clone() } else { a[i][j].clone() });
        }
        for k in 0..m {
            row.push(if k == i { BigRational::one() } else { BigRational::zero() });
        }
        row.push(if flip { -b[i].clone() } else { b[i].clone() });
        t.push(row);
    }
    let mut tab = Tableau { rows: m, cols, t, basis: (n..n + m).collect(), structural: n };

    let mut phase1_raw = vec![BigRational::zero(); cols];
    for j in n..cols {
        phase1_raw[j] = BigRational::one();
    }
    let mut cost = tab.reduce_cost_row(&phase1_raw);
    loop {
        match tab.step(&mut cost, cols) {
            Ok(true) => continue,
            Ok(false) => break,
            Err(()) => unreachable!("phase 1 objective is bounded below by zero"),
        }
    }
    let infeasibility = (0..m)
        .filter(|&i| tab.basis[i] >= n)
        .fold(BigRational::zero(), |acc, i| acc + tab.rhs(i));
    if infeasibility.is_positive() {
        return ExactOutcome::Infeasible;
    }
    // drive remaining zero-valued artificials out of the basis where possible
    for i in 0..m {
        if tab.basis[i] >= n {
            if let Some(j) = (0..n).find(|&j| !tab.t[i][j].is_zero()) {
                tab.pivot(i, j);
            }
        }
    }

    // phase 2 over structural columns only
    let sign = if maximize { -BigRational::one() } else { BigRational::one() };
    let mut phase2_raw = vec![BigRational::zero(); cols];
    for j in 0..n {
        phase2_raw[j] = &sign * &c[j];
    }
    let mut cost = tab.reduce_cost_row(&phase2_raw);
    loop {
        match tab.step(&mut cost, n) {
            Ok(true) => continue,
            Ok(false) => break,
            Err(()) => return ExactOutcome::Unbounded,
        }
    }
    let x = tab.solution();
    let value = x.iter().zip(c).fold(BigRational::zero(), |acc, (xj, cj)| acc + xj * cj);
    ExactOutcome::Optimal { x, value }
}

/// Convenience: rational from an integer.
pub fn rat(v: i64) -> BigRational {
    BigRational::from_integer(v.into())
}
