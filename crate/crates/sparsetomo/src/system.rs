//! Core sparse linear-algebra and bipartite-graph types.
//!
//! An [`IncidenceSystem`] is the projection matrix `A` of a tomographic
//! imaging setup viewed as a bipartite graph between cells (columns) and rays
//! (rows). Every cell is incident with exactly one ray per camera, so all
//! columns have the same support size `left_degree`. Both adjacency
//! directions (ray -> cells and cell -> rays) are precomputed because the
//! support reduction needs both.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};

use crate::error::Error;
use crate::Result;

/// Identifies the geometry an [`IncidenceSystem`] was built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum GeometryTag {
    /// Hexagonal region, 3 cameras, odd resolution d.
    Hex2d { d: u32 },
    /// Square region, 3..=8 cameras, resolution d.
    Square2d { d: u32, cameras: u32 },
    /// Cubic volume, 4 cameras, resolution d.
    Cube3d { d: u32 },
    /// Loaded from a file or assembled by hand.
    External,
}

impl fmt::Display for GeometryTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeometryTag::Hex2d { d } => write!(f, "hex2d(d={d})"),
            GeometryTag::Square2d { d, cameras } => write!(f, "square2d(d={d},cameras={cameras})"),
            GeometryTag::Cube3d { d } => write!(f, "cube3d(d={d})"),
            GeometryTag::External => write!(f, "external"),
        }
    }
}

/// Sparse nonnegative projection matrix with bipartite-graph access paths.
///
/// Immutable after construction; safe to share read-only across threads.
#[derive(Debug, Clone)]
pub struct IncidenceSystem {
    m: usize,
    n: usize,
    left_degree: usize,
    tag: GeometryTag,
    unit_weights: bool,
    // ray-major adjacency (CSR)
    row_ptr: Vec<usize>,
    row_cells: Vec<u32>,
    row_weights: Vec<f64>,
    // cell-major adjacency (CSC)
    col_ptr: Vec<usize>,
    col_rays: Vec<u32>,
    col_weights: Vec<f64>,
}

impl IncidenceSystem {
    /// Assembles a system from entry triplets `(ray, cell, weight)`.
    ///
    /// Validates the structural invariants: indices in range, strictly
    /// positive weights, unique (ray, cell) pairs, and constant column
    /// support equal to `left_degree`.
    pub fn from_entries(
        m: usize,
        n: usize,
        left_degree: usize,
        tag: GeometryTag,
        entries: &[(u32, u32, f64)],
    ) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::EmptyMatrix);
        }
        let mut cols: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
        let mut unit_weights = true;
        for &(r, c, w) in entries {
            if r as usize >= m {
                return Err(Error::RayIndexOutOfRange { index: r as usize, m });
            }
            if c as usize >= n {
                return Err(Error::CellIndexOutOfRange { index: c as usize, n });
            }
            if !(w > 0.0) {
                return Err(Error::InvalidMatrix(format!(
                    "weight {w} at ({r}, {c}) is not strictly positive"
                )));
            }
            if w != 1.0 {
                unit_weights = false;
            }
            cols[c as usize].push((r, w));
        }
        for (c, col) in cols.iter_mut().enumerate() {
            col.sort_unstable_by_key(|&(r, _)| r);
            if col.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(Error::InvalidMatrix(format!("duplicate (ray, cell) pair in column {c}")));
            }
            if col.len() != left_degree {
                return Err(Error::InvalidMatrix(format!(
                    "column {c} has support {} but left degree is {left_degree}",
                    col.len()
                )));
            }
        }
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut col_rays = Vec::with_capacity(n * left_degree);
        let mut col_weights = Vec::with_capacity(n * left_degree);
        col_ptr.push(0);
        for col in &cols {
            for &(r, w) in col {
                col_rays.push(r);
                col_weights.push(w);
            }
            col_ptr.push(col_rays.len());
        }
        // transpose to CSR
        let mut row_counts = vec![0usize; m];
        for &r in &col_rays {
            row_counts[r as usize] += 1;
        }
        let mut row_ptr = vec![0usize; m + 1];
        for r in 0..m {
            row_ptr[r + 1] = row_ptr[r] + row_counts[r];
        }
        let nnz = col_rays.len();
        let mut row_cells = vec![0u32; nnz];
        let mut row_weights = vec![0f64; nnz];
        let mut cursor = row_ptr.clone();
        for c in 0..n {
            for idx in col_ptr[c]..col_ptr[c + 1] {
                let r = col_rays[idx] as usize;
                row_cells[cursor[r]] = c as u32;
                row_weights[cursor[r]] = col_weights[idx];
                cursor[r] += 1;
            }
        }
        Ok(Self {
            m,
            n,
            left_degree,
            tag,
            unit_weights,
            row_ptr,
            row_cells,
            row_weights,
            col_ptr,
            col_rays,
            col_weights,
        })
    }

    /// Number of rays (rows).
    pub fn n_rays(&self) -> usize {
        self.m
    }

    /// Number of cells (columns).
    pub fn n_cells(&self) -> usize {
        self.n
    }

    /// Constant column support size (number of cameras).
    pub fn left_degree(&self) -> usize {
        self.left_degree
    }

    /// Number of stored nonzeros.
    pub fn nnz(&self) -> usize {
        self.col_rays.len()
    }

    /// Originating geometry descriptor.
    pub fn tag(&self) -> GeometryTag {
        self.tag
    }

    /// True when every stored weight equals 1 (unperturbed system).
    pub fn unit_weights(&self) -> bool {
        self.unit_weights
    }

    /// Rays incident with `cell`, with weights.
    pub fn rays_of_cell(&self, cell: usize) -> impl Iterator<Item = (u32, f64)> + '_ {
        let lo = self.col_ptr[cell];
        let hi = self.col_ptr[cell + 1];
        self.col_rays[lo..hi]
            .iter()
            .copied()
            .zip(self.col_weights[lo..hi].iter().copied())
    }

    /// Cells incident with `ray`, with weights.
    pub fn cells_of_ray(&self, ray: usize) -> impl Iterator<Item = (u32, f64)> + '_ {
        let lo = self.row_ptr[ray];
        let hi = self.row_ptr[ray + 1];
        self.row_cells[lo..hi]
            .iter()
            .copied()
            .zip(self.row_weights[lo..hi].iter().copied())
    }

    /// Number of cells on `ray`.
    pub fn ray_cardinality(&self, ray: usize) -> usize {
        self.row_ptr[ray + 1] - self.row_ptr[ray]
    }

    /// Applies the system to a particle vector: `b = A x`.
    ///
    /// For an unperturbed system and binary particles, `b_r` equals the
    /// number of particles (with multiplicity) on ray `r`. The returned
    /// vector also carries exact integer hit counts so that the support of
    /// `b` is structural, never the result of comparing a float against a
    /// threshold.
    pub fn matvec(&self, x: &ParticleVector) -> Result<MeasurementVector> {
        let mut values = vec![0.0f64; self.m];
        let mut hits = vec![0u32; self.m];
        for (cell, value, mult) in x.accumulated() {
            let cell = cell as usize;
            if cell >= self.n {
                return Err(Error::CellIndexOutOfRange { index: cell, n: self.n });
            }
            for (r, w) in self.rays_of_cell(cell) {
                values[r as usize] += w * value;
                hits[r as usize] += mult;
            }
        }
        Ok(MeasurementVector { values, hits })
    }

    /// Per-ray incidence statistics and their extremes.
    pub fn ray_statistics(&self) -> RayStatistics {
        let n = self.n as f64;
        let counts: Vec<u32> = (0..self.m).map(|r| self.ray_cardinality(r) as u32).collect();
        let q: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
        let q_min = q.iter().copied().fold(f64::INFINITY, f64::min);
        let q_max = q.iter().copied().fold(0.0f64, f64::max);
        RayStatistics {
            counts,
            q,
            q_min,
            q_max,
            p_min: 1.0 - q_max,
            p_max: 1.0 - q_min,
        }
    }

    /// Writes the coordinate triplet text format: header `m n nnz`, then one
    /// `row col value` line per entry, 1-based, in row-major order.
    pub fn write_coo<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "{} {} {}", self.m, self.n, self.nnz())?;
        for r in 0..self.m {
            for idx in self.row_ptr[r]..self.row_ptr[r + 1] {
                writeln!(out, "{} {} {}", r + 1, self.row_cells[idx] + 1, self.row_weights[idx])?;
            }
        }
        Ok(())
    }

    /// The canonical export as bytes; used for content fingerprints.
    pub fn coo_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_coo(&mut buf).expect("writing to Vec cannot fail");
        buf
    }

    /// Parses the coordinate triplet text format produced by [`Self::write_coo`].
    ///
    /// The left degree is inferred from the column supports, which must be
    /// constant.
    pub fn read_coo<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidMatrix("empty file".into()))??;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse::<usize>().map_err(|_| Error::InvalidMatrix(format!("bad header: {header}"))))
            .collect::<Result<_>>()?;
        if dims.len() != 3 {
            return Err(Error::InvalidMatrix(format!("bad header: {header}")));
        }
        let (m, n, nnz) = (dims[0], dims[1], dims[2]);
        let mut entries = Vec::with_capacity(nnz);
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let r: usize = it
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| Error::InvalidMatrix(format!("bad entry line: {line}")))?;
            let c: usize = it
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| Error::InvalidMatrix(format!("bad entry line: {line}")))?;
            let w: f64 = it
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| Error::InvalidMatrix(format!("bad entry line: {line}")))?;
            if r == 0 || c == 0 {
                return Err(Error::InvalidMatrix("indices are 1-based".into()));
            }
            entries.push(((r - 1) as u32, (c - 1) as u32, w));
        }
        if entries.len() != nnz {
            return Err(Error::InvalidMatrix(format!(
                "header claims {nnz} entries, found {}",
                entries.len()
            )));
        }
        let left_degree = if n > 0 { entries.len() / n } else { 0 };
        Self::from_entries(m, n, left_degree, GeometryTag::External, &entries)
    }

    /// Replaces all weights, keeping the sparsity pattern. Internal to the
    /// geometry module's perturbation.
    pub(crate) fn with_weights(&self, col_weights: Vec<f64>) -> Self {
        assert_eq!(col_weights.len(), self.col_weights.len());
        let mut sys = self.clone();
        sys.col_weights = col_weights;
        // rebuild CSR weights in the same traversal order as from_entries
        let mut cursor = sys.row_ptr.clone();
        for c in 0..sys.n {
            for idx in sys.col_ptr[c]..sys.col_ptr[c + 1] {
                let r = sys.col_rays[idx] as usize;
                sys.row_weights[cursor[r]] = sys.col_weights[idx];
                cursor[r] += 1;
            }
        }
        sys.unit_weights = sys.col_weights.iter().all(|&w| w == 1.0);
        sys
    }
}

/// Nonnegative measurement vector `b` with exact structural support.
///
/// `hits[r]` counts, as an integer, how many particle draws touched ray `r`;
/// an entry is zero iff it was never incremented, so the support is exact
/// even for perturbed weights or real-valued particles.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementVector {
    values: Vec<f64>,
    hits: Vec<u32>,
}

impl MeasurementVector {
    /// Builds a measurement vector from raw values; the support is taken
    /// structurally from `value != 0`.
    ///
    /// Rejects negative entries.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        for (i, &v) in values.iter().enumerate() {
            if v < 0.0 {
                return Err(Error::NegativeMeasurement { index: i, value: v });
            }
        }
        let hits = values.iter().map(|&v| u32::from(v != 0.0)).collect();
        Ok(Self { values, hits })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Exact integer hit counts per ray.
    pub fn hits(&self) -> &[u32] {
        &self.hits
    }

    /// True iff ray `r` received at least one hit.
    pub fn is_nonzero(&self, r: usize) -> bool {
        self.hits[r] > 0
    }

    /// Indices of nonzero measurements, ascending.
    pub fn support(&self) -> Vec<u32> {
        (0..self.hits.len() as u32).filter(|&r| self.hits[r as usize] > 0).collect()
    }

    /// Number of nonzero measurements.
    pub fn support_size(&self) -> usize {
        self.hits.iter().filter(|&&h| h > 0).count()
    }
}

/// Whether particles carry unit values or arbitrary positive values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ParticleKind {
    Binary,
    Nonnegative,
}

/// Sparse particle vector: a list of occupied cells (duplicates permitted,
/// representing several particles in one cell) with positive values.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleVector {
    support: Vec<u32>,
    values: Vec<f64>,
    kind: ParticleKind,
}

impl ParticleVector {
    pub fn new(support: Vec<u32>, values: Vec<f64>, kind: ParticleKind) -> Result<Self> {
        if support.len() != values.len() {
            return Err(Error::DimensionMismatch { expected: support.len(), got: values.len() });
        }
        for (i, &v) in values.iter().enumerate() {
            if !(v > 0.0) {
                return Err(Error::NegativeComponent { index: i, value: v });
            }
        }
        if kind == ParticleKind::Binary && values.iter().any(|&v| v != 1.0) {
            return Err(Error::InvalidSparsity("binary particles must carry value 1".into()));
        }
        Ok(Self { support, values, kind })
    }

    /// Binary particle vector with one particle per listed cell.
    pub fn binary(support: Vec<u32>) -> Self {
        let values = vec![1.0; support.len()];
        Self { support, values, kind: ParticleKind::Binary }
    }

    /// The empty particle vector.
    pub fn empty(kind: ParticleKind) -> Self {
        Self { support: Vec::new(), values: Vec::new(), kind }
    }

    /// Sparsity counted with multiplicity.
    pub fn k(&self) -> usize {
        self.support.len()
    }

    pub fn kind(&self) -> ParticleKind {
        self.kind
    }

    pub fn support(&self) -> &[u32] {
        &self.support
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Merged view: sorted `(cell, accumulated value, multiplicity)` rows.
    pub fn accumulated(&self) -> Vec<(u32, f64, u32)> {
        let mut map: BTreeMap<u32, (f64, u32)> = BTreeMap::new();
        for (&c, &v) in self.support.iter().zip(&self.values) {
            let e = map.entry(c).or_insert((0.0, 0));
            e.0 += v;
            e.1 += 1;
        }
        map.into_iter().map(|(c, (v, mult))| (c, v, mult)).collect()
    }

    /// Dense accumulated vector of length `n`.
    pub fn to_dense(&self, n: usize) -> Result<Vec<f64>> {
        let mut x = vec![0.0; n];
        for (c, v, _) in self.accumulated() {
            if c as usize >= n {
                return Err(Error::CellIndexOutOfRange { index: c as usize, n });
            }
            x[c as usize] = v;
        }
        Ok(x)
    }

    /// Set of distinct occupied cells, ascending.
    pub fn distinct_cells(&self) -> Vec<u32> {
        self.accumulated().into_iter().map(|(c, _, _)| c).collect()
    }
}

/// Per-ray incidence counts `|r|`, the fractions `q_r = |r| / |C|`,
/// complements `p_r = 1 - q_r`, and their extremes.
#[derive(Debug, Clone)]
pub struct RayStatistics {
    pub counts: Vec<u32>,
    pub q: Vec<f64>,
    pub q_min: f64,
    pub q_max: f64,
    pub p_min: f64,
    pub p_max: f64,
}

impl RayStatistics {
    /// Total incidence count; equals `left_degree * n_cells` for every valid
    /// system.
    pub fn total_incidences(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry;

    fn tiny_system() -> IncidenceSystem {
        // 3 rays, 2 cells, each cell on 2 rays
        IncidenceSystem::from_entries(
            3,
            2,
            2,
            GeometryTag::External,
            &[(0, 0, 1.0), (1, 0, 1.0), (1, 1, 1.0), (2, 1, 1.0)],
        )
        .unwrap()
    }

    #[test]
    fn rejects_out_of_range_and_nonconstant_support() {
        let err = IncidenceSystem::from_entries(2, 2, 1, GeometryTag::External, &[(5, 0, 1.0), (0, 1, 1.0)]);
        assert!(matches!(err, Err(Error::RayIndexOutOfRange { .. })));
        let err = IncidenceSystem::from_entries(
            2,
            2,
            1,
            GeometryTag::External,
            &[(0, 0, 1.0), (1, 0, 1.0), (0, 1, 1.0)],
        );
        assert!(matches!(err, Err(Error::InvalidMatrix(_))));
    }

    #[test]
    fn matvec_zero_vector_gives_zero() {
        let sys = tiny_system();
        let b = sys.matvec(&ParticleVector::empty(ParticleKind::Binary)).unwrap();
        assert_eq!(b.values(), &[0.0, 0.0, 0.0]);
        assert_eq!(b.support_size(), 0);
    }

    #[test]
    fn matvec_single_particle_hexagon_center() {
        let sys = geometry::build_hex2d(5).unwrap();
        // the center cell lies on the middle ray of each direction
        let center = geometry::hex_cell_index(5, 0, 0).unwrap();
        let b = sys.matvec(&ParticleVector::binary(vec![center])).unwrap();
        assert_eq!(b.support_size(), 3);
        for r in b.support() {
            assert_eq!(b.values()[r as usize], 1.0);
        }
    }

    #[test]
    fn matvec_shared_ray_counts_two() {
        // two particles on the same direction-1 ray but different rays in
        // directions 2 and 3: b has 5 nonzeros and the shared ray reads 2
        let sys = geometry::build_hex2d(5).unwrap();
        let a = geometry::hex_cell_index(5, 0, 0).unwrap();
        let c = geometry::hex_cell_index(5, 0, 1).unwrap();
        let b = sys.matvec(&ParticleVector::binary(vec![a, c])).unwrap();
        assert_eq!(b.support_size(), 5);
        let shared: Vec<f64> = b.values().iter().copied().filter(|&v| v == 2.0).collect();
        assert_eq!(shared.len(), 1);
    }

    #[test]
    fn matvec_is_additive() {
        let sys = geometry::build_hex2d(5).unwrap();
        let x1 = ParticleVector::binary(vec![0, 3, 7]);
        let x2 = ParticleVector::binary(vec![3, 12]);
        let mut joint = x1.support().to_vec();
        joint.extend_from_slice(x2.support());
        let x12 = ParticleVector::binary(joint);
        let b1 = sys.matvec(&x1).unwrap();
        let b2 = sys.matvec(&x2).unwrap();
        let b12 = sys.matvec(&x12).unwrap();
        for r in 0..sys.n_rays() {
            assert_eq!(b12.values()[r], b1.values()[r] + b2.values()[r]);
            assert_eq!(b12.hits()[r], b1.hits()[r] + b2.hits()[r]);
        }
    }

    #[test]
    fn matvec_rejects_bad_index() {
        let sys = tiny_system();
        let err = sys.matvec(&ParticleVector::binary(vec![9]));
        assert!(matches!(err, Err(Error::CellIndexOutOfRange { index: 9, .. })));
    }

    #[test]
    fn accumulated_merges_duplicates() {
        let x = ParticleVector::binary(vec![4, 2, 4]);
        assert_eq!(x.k(), 3);
        assert_eq!(x.accumulated(), vec![(2, 1.0, 1), (4, 2.0, 2)]);
    }

    #[test]
    fn ray_statistics_hexagon_d5() {
        let sys = geometry::build_hex2d(5).unwrap();
        let st = sys.ray_statistics();
        assert_eq!(st.total_incidences(), 3 * 19);
        assert!((st.q_min - 3.0 / 19.0).abs() < 1e-15);
        assert!((st.q_max - 5.0 / 19.0).abs() < 1e-15);
        let mut counts = st.counts[0..5].to_vec();
        counts.sort_unstable();
        assert_eq!(counts, vec![3, 3, 4, 4, 5]);
    }

    #[test]
    fn coo_roundtrip() {
        let sys = geometry::build_hex2d(5).unwrap();
        let bytes = sys.coo_bytes();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.starts_with("15 19 57\n"));
        let back = IncidenceSystem::read_coo(std::io::BufReader::new(&bytes[..])).unwrap();
        assert_eq!(back.n_rays(), 15);
        assert_eq!(back.n_cells(), 19);
        assert_eq!(back.left_degree(), 3);
        assert_eq!(back.coo_bytes(), bytes);
    }

    #[test]
    fn measurement_rejects_negative() {
        let err = MeasurementVector::from_values(vec![1.0, -0.5]);
        assert!(matches!(err, Err(Error::NegativeMeasurement { index: 1, .. })));
    }
}
