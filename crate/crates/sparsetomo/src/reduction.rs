//! Support-based system reduction and expansion-condition diagnostics.
//!
//! Given measurements `b`, the reduced system keeps the rows `R_b = supp(b)`
//! and the columns `C_b` of cells none of whose incident rays reads zero;
//! solving the reduced system recovers the full solution set.

use crate::error::Error;
use crate::system::{IncidenceSystem, MeasurementVector};
use crate::{Result, EXPANSION_DELTA};

/// A small standalone CSC matrix extracted from an [`IncidenceSystem`].
#[derive(Debug, Clone, PartialEq)]
pub struct CscMatrix {
    pub m: usize,
    pub n: usize,
    pub col_ptr: Vec<usize>,
    pub row_idx: Vec<u32>,
    pub values: Vec<f64>,
}

impl CscMatrix {
    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = (u32, f64)> + '_ {
        let lo = self.col_ptr[j];
        let hi = self.col_ptr[j + 1];
        self.row_idx[lo..hi].iter().copied().zip(self.values[lo..hi].iter().copied())
    }

    /// Dense `A x` for a dense `x`.
    pub fn matvec_dense(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.m];
        for j in 0..self.n {
            let xj = x[j];
            if xj != 0.0 {
                for (r, w) in self.column(j) {
                    out[r as usize] += w * xj;
                }
            }
        }
        out
    }
}

/// The reduced system `A_red x = b_red` for a measurement vector `b`.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    kept_rays: Vec<u32>,
    kept_cells: Vec<u32>,
    matrix: CscMatrix,
    rhs: Vec<f64>,
    full_cells: usize,
}

impl ReducedSystem {
    pub fn m_red(&self) -> usize {
        self.kept_rays.len()
    }

    pub fn n_red(&self) -> usize {
        self.kept_cells.len()
    }

    /// Kept ray indices `R_b`, ascending.
    pub fn kept_rays(&self) -> &[u32] {
        &self.kept_rays
    }

    /// Kept cell indices `C_b`, ascending.
    pub fn kept_cells(&self) -> &[u32] {
        &self.kept_cells
    }

    pub fn matrix(&self) -> &CscMatrix {
        &self.matrix
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    /// Column count of the originating system.
    pub fn full_cells(&self) -> usize {
        self.full_cells
    }

    /// Restriction of a full-length vector to the kept cells.
    pub fn restrict(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.full_cells {
            return Err(Error::DimensionMismatch { expected: self.full_cells, got: x.len() });
        }
        Ok(self.kept_cells.iter().map(|&c| x[c as usize]).collect())
    }
}

/// Reduces `A x = b` to the rows `supp(b)` and the cells with no incident
/// zero measurement.
///
/// Zero detection is structural: a measurement is zero iff it was never hit,
/// so the reduction of a perturbed system equals the reduction of the
/// unperturbed system with the same pattern.
pub fn reduce(system: &IncidenceSystem, b: &MeasurementVector) -> Result<ReducedSystem> {
    if b.len() != system.n_rays() {
        return Err(Error::DimensionMismatch { expected: system.n_rays(), got: b.len() });
    }
    for (r, &v) in b.values().iter().enumerate() {
        if v < 0.0 {
            return Err(Error::NegativeMeasurement { index: r, value: v });
        }
    }
    let kept_rays = b.support();
    let mut ray_pos = vec![u32::MAX; system.n_rays()];
    for (new, &r) in kept_rays.iter().enumerate() {
        ray_pos[r as usize] = new as u32;
    }
    // a cell is kept iff none of its incident rays reads zero
    let mut kept_cells = Vec::new();
    for c in 0..system.n_cells() {
        if system.rays_of_cell(c).all(|(r, _)| b.is_nonzero(r as usize)) {
            kept_cells.push(c as u32);
        }
    }
    let mut col_ptr = Vec::with_capacity(kept_cells.len() + 1);
    let mut row_idx = Vec::with_capacity(kept_cells.len() * system.left_degree());
    let mut values = Vec::with_capacity(kept_cells.len() * system.left_degree());
    col_ptr.push(0);
    for &c in &kept_cells {
        for (r, w) in system.rays_of_cell(c as usize) {
            row_idx.push(ray_pos[r as usize]);
            values.push(w);
        }
        col_ptr.push(row_idx.len());
    }
    let rhs = kept_rays.iter().map(|&r| b.values()[r as usize]).collect();
    Ok(ReducedSystem {
        matrix: CscMatrix { m: kept_rays.len(), n: kept_cells.len(), col_ptr, row_idx, values },
        kept_rays,
        kept_cells,
        rhs,
        full_cells: system.n_cells(),
    })
}

/// Lifts a reduced-system solution back to a full-length vector, zero off the
/// kept cells.
pub fn restore(red: &ReducedSystem, x_red: &[f64]) -> Result<Vec<f64>> {
    if x_red.len() != red.n_red() {
        return Err(Error::DimensionMismatch { expected: red.n_red(), got: x_red.len() });
    }
    for (i, &v) in x_red.iter().enumerate() {
        if v < 0.0 {
            return Err(Error::NegativeComponent { index: i, value: v });
        }
    }
    let mut x = vec![0.0; red.full_cells];
    for (&c, &v) in red.kept_cells.iter().zip(x_red) {
        x[c as usize] = v;
    }
    Ok(x)
}

/// Which neighborhood-expansion inequality to test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpansionVariant {
    /// `|N(X)| >= delta * l * |C'|` with `delta = (sqrt(5)-1)/2`; certifies
    /// unique nonnegative recovery.
    Wang,
    /// `|N(X)| >= |C'|` (the same inequality at `delta = 1/l`); certifies
    /// recovery via some perturbed matrix.
    Hassibi,
    /// `|N(X)| >= (1+delta)/l * |C'|`; conjectured perturbed-recovery
    /// condition, diagnostic only.
    Inverse,
}

/// Outcome of an expansion-condition test on a cell set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpansionReport {
    pub holds: bool,
    /// Measured `|N(X)| / (l * |C'|)`.
    pub ratio: f64,
    /// The variant's lower bound on the ratio.
    pub threshold: f64,
    pub neighbors: usize,
    pub kept_cells: usize,
}

/// Tests an expansion inequality on the cell set `X`.
///
/// Computes `N(X)` and the kept-cell set `C' = N(N(X)) \ N(N(X)^c)` and
/// compares `|N(X)| / (l |C'|)` against the variant's threshold.
pub fn expansion_condition(
    system: &IncidenceSystem,
    cells: &[u32],
    variant: ExpansionVariant,
) -> Result<ExpansionReport> {
    if cells.is_empty() {
        return Err(Error::EmptyCellSet);
    }
    let mut ray_hit = vec![false; system.n_rays()];
    for &c in cells {
        if c as usize >= system.n_cells() {
            return Err(Error::CellIndexOutOfRange { index: c as usize, n: system.n_cells() });
        }
        for (r, _) in system.rays_of_cell(c as usize) {
            ray_hit[r as usize] = true;
        }
    }
    let neighbors = ray_hit.iter().filter(|&&h| h).count();
    // C' = cells all of whose rays are in N(X); X itself is always contained
    let kept = (0..system.n_cells())
        .filter(|&c| system.rays_of_cell(c).all(|(r, _)| ray_hit[r as usize]))
        .count();
    let ell = system.left_degree() as f64;
    let ratio = neighbors as f64 / (ell * kept as f64);
    let threshold = match variant {
        ExpansionVariant::Wang => EXPANSION_DELTA,
        ExpansionVariant::Hassibi => 1.0 / ell,
        ExpansionVariant::Inverse => (1.0 + EXPANSION_DELTA) / (ell * ell),
    };
    Ok(ExpansionReport { holds: ratio >= threshold, ratio, threshold, neighbors, kept_cells: kept })
}
