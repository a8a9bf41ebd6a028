//! Column-rank decisions for reduced systems.
//!
//! Unperturbed systems have 0/1 entries, so the decision is made in exact
//! arithmetic: elimination over the prime field `GF(2^61 - 1)` certifies full
//! column rank (a full-rank minor mod p is nonzero over the rationals), and
//! the rare deficient-mod-p outcome is settled by exact rational elimination.
//! Perturbed systems fall back to pivoted floating-point elimination with an
//! explicit tolerance.

use num_rational::BigRational;
use num_traits::Zero;

use crate::error::Error;
use crate::reduction::CscMatrix;
use crate::Result;

/// Default pivot tolerance for perturbed systems.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

/// Outcome of a column-rank test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankStatus {
    /// `m >= n` and the columns are linearly independent.
    OverdeterminedFullRank,
    /// Either `n > m` or the columns are dependent.
    RankDeficientOrUnderdetermined,
}

const PRIME: u64 = (1 << 61) - 1;

fn mulmod(a: u64, b: u64) -> u64 {
    ((a as u128 * b as u128) % PRIME as u128) as u64
}

fn powmod(mut base: u64, mut exp: u64) -> u64 {
    let mut acc = 1u64;
    base %= PRIME;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mulmod(acc, base);
        }
        base = mulmod(base, base);
        exp >>= 1;
    }
    acc
}

fn invmod(a: u64) -> u64 {
    powmod(a, PRIME - 2)
}

/// Column rank over GF(p) of a dense row-major 0/1 matrix.
fn modular_column_rank(rows: usize, cols: usize, dense: &mut [u64]) -> usize {
    let mut rank = 0usize;
    let mut pivot_row = 0usize;
    for col in 0..cols {
        let mut sel = None;
        for r in pivot_row..rows {
            if dense[r * cols + col] != 0 {
                sel = Some(r);
                break;
            }
        }
        let Some(sel) = sel else { continue };
        dense.chunks_exact_mut(cols).nth(sel);
        if sel != pivot_row {
            for c in 0..cols {
                dense.swap(sel * cols + c, pivot_row * cols + c);
            }
        }
        let inv = invmod(dense[pivot_row * cols + col]);
        for r in (pivot_row + 1)..rows {
            let factor = dense[r * cols + col];
            if factor != 0 {
                let scale = mulmod(factor, inv);
                for c in col..cols {
                    let sub = mulmod(scale, dense[pivot_row * cols + c]);
                    let v = &mut dense[r * cols + c];
                    *v = (*v + PRIME - sub) % PRIME;
                }
            }
        }
        rank += 1;
        pivot_row += 1;
        if pivot_row == rows {
            break;
        }
    }
    rank
}

/// Exact column rank over the rationals.
fn rational_column_rank(rows: usize, cols: usize, entries: &[(usize, usize, f64)]) -> usize {
    let mut dense: Vec<Vec<BigRational>> = vec![vec![BigRational::zero(); cols]; rows];
    for &(r, c, w) in entries {
        dense[r][c] = exact_rational(w);
    }
    let mut rank = 0usize;
    let mut pivot_row = 0usize;
    for col in 0..cols {
        let Some(sel) = (pivot_row..rows).find(|&r| !dense[r][col].is_zero()) else { continue };
        dense.swap(sel, pivot_row);
        let pivot = dense[pivot_row][col].clone();
        for r in (pivot_row + 1)..rows {
            if !dense[r][col].is_zero() {
                let scale = &dense[r][col] / &pivot;
                for c in col..cols {
                    let sub = &scale * &dense[pivot_row][c];
                    dense[r][c] = &dense[r][c] - sub;
                }
            }
        }
        rank += 1;
        pivot_row += 1;
        if pivot_row == rows {
            break;
        }
    }
    rank
}

/// Exact rational value of a finite f64.
pub(crate) fn exact_rational(v: f64) -> BigRational {
    BigRational::from_float(v).expect("finite weight")
}

/// Floating-point column rank by elimination with partial pivoting; entries
/// whose magnitude falls below `tol * max_abs` are treated as zero.
fn float_column_rank(rows: usize, cols: usize, entries: &[(usize, usize, f64)], tol: f64) -> usize {
    let mut dense = vec![0.0f64; rows * cols];
    let mut scale: f64 = 0.0;
    for &(r, c, w) in entries {
        dense[r * cols + c] = w;
        scale = scale.max(w.abs());
    }
    let cutoff = tol * scale.max(1.0);
    let mut rank = 0usize;
    let mut pivot_row = 0usize;
    for col in 0..cols {
        let mut best = pivot_row;
        let mut best_abs = 0.0;
        for r in pivot_row..rows {
            let a = dense[r * cols + col].abs();
            if a > best_abs {
                best_abs = a;
                best = r;
            }
        }
        if best_abs <= cutoff {
            continue;
        }
        if best != pivot_row {
            for c in 0..cols {
                dense.swap(best * cols + c, pivot_row * cols + c);
            }
        }
        let pivot = dense[pivot_row * cols + col];
        for r in (pivot_row + 1)..rows {
            let factor = dense[r * cols + col] / pivot;
            if factor != 0.0 {
                for c in col..cols {
                    dense[r * cols + c] -= factor * dense[pivot_row * cols + c];
                }
            }
        }
        rank += 1;
        pivot_row += 1;
        if pivot_row == rows {
            break;
        }
    }
    rank
}

/// Decides whether a submatrix is overdetermined (or square) with full column
/// rank.
///
/// Unit-weight matrices are decided exactly; weighted matrices use pivoted
/// elimination with the given tolerance.
pub fn column_rank_status(matrix: &CscMatrix, tol: f64) -> Result<RankStatus> {
    if matrix.m == 0 || matrix.n == 0 {
        return Err(Error::EmptyMatrix);
    }
    if matrix.n > matrix.m {
        return Ok(RankStatus::RankDeficientOrUnderdetermined);
    }
    let entries: Vec<(usize, usize, f64)> = (0..matrix.n)
        .flat_map(|j| matrix.column(j).map(move |(r, w)| (r as usize, j, w)))
        .collect();
    let unit = entries.iter().all(|&(_, _, w)| w == 1.0);
    let rank = if unit {
        let mut dense = vec![0u64; matrix.m * matrix.n];
        for &(r, c, _) in &entries {
            dense[r * matrix.n + c] = 1;
        }
        let modular = modular_column_rank(matrix.m, matrix.n, &mut dense);
        if modular == matrix.n {
            modular
        } else {
            // a deficiency mod p could in principle be a p-divisible minor;
            // settle exactly over the rationals
            rational_column_rank(matrix.m, matrix.n, &entries)
        }
    } else {
        float_column_rank(matrix.m, matrix.n, &entries, tol)
    };
    Ok(if rank == matrix.n {
        RankStatus::OverdeterminedFullRank
    } else {
        RankStatus::RankDeficientOrUnderdetermined
    })
}

impl RankStatus {
    pub fn is_full_rank(&self) -> bool {
        matches!(self, RankStatus::OverdeterminedFullRank)
    }
}
