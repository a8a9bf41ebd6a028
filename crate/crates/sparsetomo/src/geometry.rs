//! Builders for the three projection-system families and their perturbed
//! variants.
//!
//! All builders are pure functions of their parameters. Cell and ray
//! indexings are fixed (lexicographic cells, direction-major rays) so that
//! exported matrix files are reproducible byte for byte.

use rand::distributions::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::system::{GeometryTag, IncidenceSystem};
use crate::Result;

/// Which projection-system family to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometryKind {
    Hex2d,
    Square2d,
    Cube3d,
}

impl std::fmt::Display for GeometryKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GeometryKind::Hex2d => write!(f, "hex2d"),
            GeometryKind::Square2d => write!(f, "square2d"),
            GeometryKind::Cube3d => write!(f, "cube3d"),
        }
    }
}

impl std::str::FromStr for GeometryKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hex2d" => Ok(GeometryKind::Hex2d),
            "square2d" => Ok(GeometryKind::Square2d),
            "cube3d" => Ok(GeometryKind::Cube3d),
            other => Err(Error::InvalidGeometry(format!("unknown kind {other:?}"))),
        }
    }
}

/// Full geometry request: family, resolution and camera count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct GeometrySpec {
    pub kind: GeometryKind,
    pub d: u32,
    /// Number of cameras. Fixed to 3 for hex2d and 4 for cube3d; 3..=8 for
    /// square2d.
    pub cameras: u32,
}

impl GeometrySpec {
    pub fn new(kind: GeometryKind, d: u32, cameras: Option<u32>) -> Result<Self> {
        let cameras = match kind {
            GeometryKind::Hex2d => {
                if let Some(c) = cameras {
                    if c != 3 {
                        return Err(Error::InvalidGeometry(format!("hex2d has 3 cameras, got {c}")));
                    }
                }
                3
            }
            GeometryKind::Cube3d => {
                if let Some(c) = cameras {
                    if c != 4 {
                        return Err(Error::InvalidGeometry(format!("cube3d has 4 cameras, got {c}")));
                    }
                }
                4
            }
            GeometryKind::Square2d => {
                let c = cameras.unwrap_or(3);
                if !(3..=8).contains(&c) {
                    return Err(Error::InvalidGeometry(format!("square2d needs 3..=8 cameras, got {c}")));
                }
                c
            }
        };
        let spec = Self { kind, d, cameras };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            GeometryKind::Hex2d => {
                if self.d < 3 || self.d % 2 == 0 {
                    return Err(Error::InvalidGeometry(format!(
                        "hex2d requires odd d >= 3, got d = {}",
                        self.d
                    )));
                }
            }
            GeometryKind::Square2d => {
                if self.d < 2 {
                    return Err(Error::InvalidGeometry(format!("square2d requires d >= 2, got d = {}", self.d)));
                }
                if !(3..=8).contains(&self.cameras) {
                    return Err(Error::InvalidGeometry(format!(
                        "square2d needs 3..=8 cameras, got {}",
                        self.cameras
                    )));
                }
            }
            GeometryKind::Cube3d => {
                if self.d < 2 {
                    return Err(Error::InvalidGeometry(format!("cube3d requires d >= 2, got d = {}", self.d)));
                }
            }
        }
        Ok(())
    }

    /// Constructs the unperturbed system for this spec.
    pub fn build(&self) -> Result<IncidenceSystem> {
        match self.kind {
            GeometryKind::Hex2d => build_hex2d(self.d),
            GeometryKind::Square2d => build_square2d(self.d, self.cameras),
            GeometryKind::Cube3d => build_cube3d(self.d),
        }
    }

    /// Exponent D such that `k = rho * d^(D-1)` in phase grids.
    pub fn ambient_dim(&self) -> u32 {
        match self.kind {
            GeometryKind::Hex2d | GeometryKind::Square2d => 2,
            GeometryKind::Cube3d => 3,
        }
    }
}

/// Uniform weight jitter on the sparsity pattern, with optional column
/// normalization.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PerturbationSpec {
    pub low: f64,
    pub high: f64,
    pub seed: u64,
    pub normalize_columns: bool,
}

impl PerturbationSpec {
    /// Validates the interval; columns are normalized by default.
    pub fn new(low: f64, high: f64, seed: u64) -> Result<Self> {
        let spec = Self { low, high, seed, normalize_columns: true };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.low > 0.0 && self.low < self.high) {
            return Err(Error::InvalidPerturbation { low: self.low, high: self.high });
        }
        Ok(())
    }
}

/// Index of the hexagon cell with lattice coordinates `(i1, i2)`.
///
/// Cells are ordered lexicographically over `(i1, i2)` within the index set
/// `{ |i1|, |i2|, |i1+i2| <= (d-1)/2 }`.
pub fn hex_cell_index(d: u32, i1: i32, i2: i32) -> Result<u32> {
    let h = (d as i32 - 1) / 2;
    if i1.abs() > h || i2.abs() > h || (i1 + i2).abs() > h {
        return Err(Error::InvalidGeometry(format!("({i1}, {i2}) outside hexagon of d = {d}")));
    }
    let mut idx = 0u32;
    for a in -h..=h {
        let lo = (-h).max(-h - a);
        let hi = h.min(h - a);
        if a < i1 {
            idx += (hi - lo + 1) as u32;
        } else {
            idx += (i2 - lo) as u32;
            break;
        }
    }
    Ok(idx)
}

/// Hexagonal region on the triangular lattice, 3 cameras, odd `d >= 3`.
///
/// Produces `n = (3 d^2 + 1) / 4` cells and `m = 3 d` rays; per-direction ray
/// cardinalities run `(d+1)/2, ..., d, ..., (d+1)/2` from one side across the
/// center to the other, and each cell meets exactly one ray per direction.
pub fn build_hex2d(d: u32) -> Result<IncidenceSystem> {
    GeometrySpec { kind: GeometryKind::Hex2d, d, cameras: 3 }.validate()?;
    let h = (d as i32 - 1) / 2;
    let n = ((3 * d as usize * d as usize) + 1) / 4;
    let m = 3 * d as usize;
    let mut entries = Vec::with_capacity(3 * n);
    let mut cell = 0u32;
    for i1 in -h..=h {
        for i2 in -h..=h {
            if (i1 + i2).abs() > h {
                continue;
            }
            // one ray per direction: lines of constant i1, i2 and i1+i2
            let r0 = (i1 + h) as u32;
            let r1 = d + (i2 + h) as u32;
            let r2 = 2 * d + (i1 + i2 + h) as u32;
            entries.push((r0, cell, 1.0));
            entries.push((r1, cell, 1.0));
            entries.push((r2, cell, 1.0));
            cell += 1;
        }
    }
    debug_assert_eq!(cell as usize, n);
    IncidenceSystem::from_entries(m, n, 3, GeometryTag::Hex2d { d }, &entries)
}

/// A square2d camera: rays along `direction`, pixels indexed by binning the
/// integer projection functional `alpha*(2i+1) + beta*(2j+1)` of the doubled
/// cell-center coordinates into `bins` equal-width intervals.
struct SquareCamera {
    alpha: i64,
    beta: i64,
    bins: usize,
}

impl SquareCamera {
    fn pixel(&self, d: u32, i: i64, j: i64) -> usize {
        let d = d as i64;
        let p = self.alpha * (2 * i + 1) + self.beta * (2 * j + 1);
        // extremes of the functional over all cell centers
        let at = |i: i64, j: i64| self.alpha * (2 * i + 1) + self.beta * (2 * j + 1);
        let corners = [at(0, 0), at(d - 1, 0), at(0, d - 1), at(d - 1, d - 1)];
        let lo = *corners.iter().min().unwrap();
        let hi = *corners.iter().max().unwrap();
        if hi == lo {
            return 0;
        }
        let idx = ((p - lo) * self.bins as i64) / (hi - lo);
        (idx as usize).min(self.bins - 1)
    }
}

/// The camera set for a given count, in the fixed angle order
/// 0, 90, -45, +45, +atan2, -atan2, +atan(1/2), -atan(1/2).
fn square_cameras(d: u32, cameras: u32) -> Vec<SquareCamera> {
    let d = d as usize;
    let skew = d + d / 2;
    let all = [
        (0i64, 1i64, d),        // 0 deg: horizontal rays, pixels along y
        (1, 0, d),              // 90 deg: vertical rays
        (1, 1, 2 * d - 1),      // -45 deg: rays along (1,-1)
        (1, -1, 2 * d - 1),     // +45 deg: rays along (1,1)
        (2, -1, skew),          // atan(2): rays along (1,2)
        (2, 1, skew),           // -atan(2): rays along (1,-2)
        (1, -2, skew),          // atan(1/2): rays along (2,1)
        (1, 2, skew),           // -atan(1/2): rays along (2,-1)
    ];
    all[..cameras as usize]
        .iter()
        .map(|&(alpha, beta, bins)| SquareCamera { alpha, beta, bins })
        .collect()
}

/// Closed-form row count for a square2d system, matching the published
/// dimensions table.
pub fn square2d_rows(d: u32, cameras: u32) -> usize {
    let d = d as usize;
    let base = match cameras {
        3 => 4 * d - 1,
        4 => 6 * d - 2,
        5 => 7 * d + d / 2 - 2,
        6 => 8 * d + 2 * (d / 2) - 2,
        7 => 9 * d + 3 * (d / 2) - 2,
        8 => 10 * d + 4 * (d / 2) - 2,
        _ => 0,
    };
    base
}

/// Square region, `cameras` in 3..=8, `d >= 2`.
///
/// Each camera projects cell centers onto its image axis; pixels are
/// equal-width bins over the projected range with the bin count fixed per
/// camera, so every column has support exactly `cameras` and the total row
/// count matches [`square2d_rows`].
pub fn build_square2d(d: u32, cameras: u32) -> Result<IncidenceSystem> {
    GeometrySpec { kind: GeometryKind::Square2d, d, cameras }.validate()?;
    let cams = square_cameras(d, cameras);
    let n = (d as usize) * (d as usize);
    let m: usize = cams.iter().map(|c| c.bins).sum();
    debug_assert_eq!(m, square2d_rows(d, cameras));
    let mut entries = Vec::with_capacity(n * cameras as usize);
    for i in 0..d as i64 {
        for j in 0..d as i64 {
            let cell = (i * d as i64 + j) as u32;
            let mut offset = 0usize;
            for cam in &cams {
                let r = (offset + cam.pixel(d, i, j)) as u32;
                entries.push((r, cell, 1.0));
                offset += cam.bins;
            }
        }
    }
    IncidenceSystem::from_entries(m, n, cameras as usize, GeometryTag::Square2d { d, cameras }, &entries)
}

/// Cubic volume `d^3`, 4 cameras at 45 degrees, `d >= 2`.
///
/// Rays are indexed direction-major; within directions 1 and 2 the pixel key
/// is `(s, t)` with `s` in `[1-d, d-1]` and `t` in `[1, d]`, within
/// directions 3 and 4 it is `(s, t)` with `s` in `[1, d]` and `t` in
/// `[1-d, d-1]`. A cell `(i, j, l)` (1-based) projects to
/// `(i+l-1-d, j)`, `(i-l, j)`, `(i, j+l-1-d)` and `(i, j-l)`.
pub fn build_cube3d(d: u32) -> Result<IncidenceSystem> {
    GeometrySpec { kind: GeometryKind::Cube3d, d, cameras: 4 }.validate()?;
    let di = d as i64;
    let per_dir = (2 * d as usize - 1) * d as usize;
    let m = 4 * per_dir;
    let n = (d as usize).pow(3);
    let ray_st = |s: i64, t: i64| -> usize { ((s + di - 1) * di + (t - 1)) as usize };
    let ray_ts = |s: i64, t: i64| -> usize { ((s - 1) * (2 * di - 1) + (t + di - 1)) as usize };
    let mut entries = Vec::with_capacity(4 * n);
    let mut cell = 0u32;
    for i in 1..=di {
        for j in 1..=di {
            for l in 1..=di {
                let r0 = ray_st(i + l - 1 - di, j);
                let r1 = per_dir + ray_st(i - l, j);
                let r2 = 2 * per_dir + ray_ts(i, j + l - 1 - di);
                let r3 = 3 * per_dir + ray_ts(i, j - l);
                entries.push((r0 as u32, cell, 1.0));
                entries.push((r1 as u32, cell, 1.0));
                entries.push((r2 as u32, cell, 1.0));
                entries.push((r3 as u32, cell, 1.0));
                cell += 1;
            }
        }
    }
    IncidenceSystem::from_entries(m, n, 4, GeometryTag::Cube3d { d }, &entries)
}

/// Jitters every nonzero weight independently and uniformly in
/// `(low, high)`, then scales each column to unit Euclidean norm when
/// requested. The sparsity pattern is untouched and the result is a pure
/// function of `(A, spec)`.
pub fn perturb(system: &IncidenceSystem, spec: &PerturbationSpec) -> Result<IncidenceSystem> {
    spec.validate()?;
    if !system.unit_weights() {
        return Err(Error::AlreadyPerturbed);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = system.n_cells();
    let mut weights = Vec::with_capacity(system.nnz());
    for cell in 0..n {
        let lo = weights.len();
        for _ in system.rays_of_cell(cell) {
            let u: f64 = rng.sample(Open01);
            weights.push(spec.low + u * (spec.high - spec.low));
        }
        if spec.normalize_columns {
            let norm = weights[lo..].iter().map(|w| w * w).sum::<f64>().sqrt();
            for w in &mut weights[lo..] {
                *w /= norm;
            }
        }
    }
    Ok(system.with_weights(weights))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hex_counts() {
        for (d, n, m) in [(5u32, 19usize, 15usize), (11, 91, 33), (51, 1951, 153)] {
            let sys = build_hex2d(d).unwrap();
            assert_eq!(sys.n_cells(), n, "d = {d}");
            assert_eq!(sys.n_rays(), m, "d = {d}");
            assert_eq!(sys.left_degree(), 3);
        }
    }

    #[test]
    fn hex_rejects_even_or_small_d() {
        assert!(matches!(build_hex2d(4), Err(Error::InvalidGeometry(_))));
        assert!(matches!(build_hex2d(1), Err(Error::InvalidGeometry(_))));
    }

    #[test]
    fn hex_direction_cardinalities_d5() {
        let sys = build_hex2d(5).unwrap();
        let cards: Vec<usize> = (0..5).map(|r| sys.ray_cardinality(r)).collect();
        assert_eq!(cards, vec![3, 4, 5, 4, 3]);
        // every direction covers all cells once
        for dir in 0..3 {
            let total: usize = (0..5).map(|r| sys.ray_cardinality(dir * 5 + r)).sum();
            assert_eq!(total, 19);
        }
    }

    #[test]
    fn hex_ray_count_extremes_approach_limits() {
        // |R| q_max -> 4 and |R| q_min -> 2 as d grows
        let sys = build_hex2d(201).unwrap();
        let st = sys.ray_statistics();
        let m = sys.n_rays() as f64;
        assert!((st.q_max * m - 4.0).abs() / 4.0 < 0.05);
        assert!((st.q_min * m - 2.0).abs() / 2.0 < 0.05);
    }

    #[test]
    fn square_matches_published_dimensions() {
        for (d, cams, m) in [(10u32, 3u32, 39usize), (10, 6, 88), (4, 4, 22)] {
            let sys = build_square2d(d, cams).unwrap();
            assert_eq!(sys.n_rays(), m, "d = {d}, cameras = {cams}");
            assert_eq!(sys.n_cells(), (d * d) as usize);
        }
        // closed form holds and no pixel is left empty across the whole range
        for d in 2..=60 {
            for cams in 3..=8 {
                let sys = build_square2d(d, cams).unwrap();
                assert_eq!(sys.n_rays(), square2d_rows(d, cams), "d = {d}, cameras = {cams}");
                for r in 0..sys.n_rays() {
                    assert!(sys.ray_cardinality(r) > 0, "empty pixel at d = {d}, cameras = {cams}, ray = {r}");
                }
            }
        }
    }

    #[test]
    fn square_rejects_bad_cameras() {
        assert!(matches!(build_square2d(10, 2), Err(Error::InvalidGeometry(_))));
        assert!(matches!(build_square2d(10, 9), Err(Error::InvalidGeometry(_))));
    }

    #[test]
    fn cube_counts() {
        let sys = build_cube3d(2).unwrap();
        assert_eq!(sys.n_cells(), 8);
        assert_eq!(sys.n_rays(), 24);
        let sys = build_cube3d(30).unwrap();
        assert_eq!(sys.n_cells(), 27_000);
        assert_eq!(sys.n_rays(), 7_080);
    }

    #[test]
    fn cube_pixel_map_matches_reference_point() {
        // cell (1,1,1) of d=2 projects to (s1,t1) = (-1, 1) in direction 1
        let d = 2u32;
        let sys = build_cube3d(d).unwrap();
        let cell = 0usize; // (i,j,l) = (1,1,1)
        let rays: Vec<u32> = sys.rays_of_cell(cell).map(|(r, _)| r).collect();
        let di = d as i64;
        let expected_r0 = ((-1 + di - 1) * di + (1 - 1)) as u32;
        assert_eq!(rays[0], expected_r0);
    }

    #[test]
    fn cube_ray_cardinalities() {
        let d = 2u32;
        let sys = build_cube3d(d).unwrap();
        // direction 1: |r| = d - |s|, six rays with cardinalities {1,2,1} per s at each t
        let mut per_s = vec![0usize; 3];
        for s in 0..3usize {
            per_s[s] = sys.ray_cardinality(s * 2);
        }
        assert_eq!(per_s, vec![1, 2, 1]);
        let dir_total: usize = (0..6).map(|r| sys.ray_cardinality(r)).sum();
        assert_eq!(dir_total, 8);
    }

    #[test]
    fn cube_direction_sums_cover_all_cells() {
        for d in [2u32, 3, 5] {
            let sys = build_cube3d(d).unwrap();
            let per_dir = (2 * d as usize - 1) * d as usize;
            for dir in 0..4 {
                let total: usize = (0..per_dir).map(|r| sys.ray_cardinality(dir * per_dir + r)).sum();
                assert_eq!(total, (d as usize).pow(3), "direction {dir} of d = {d}");
            }
        }
    }

    #[test]
    fn column_support_is_constant_everywhere() {
        let systems = [
            build_hex2d(7).unwrap(),
            build_square2d(6, 5).unwrap(),
            build_cube3d(3).unwrap(),
        ];
        for sys in &systems {
            let st = sys.ray_statistics();
            assert_eq!(st.total_incidences(), (sys.left_degree() * sys.n_cells()) as u64);
            for c in 0..sys.n_cells() {
                assert_eq!(sys.rays_of_cell(c).count(), sys.left_degree());
            }
        }
    }

    #[test]
    fn perturb_preserves_pattern_and_is_deterministic() {
        let sys = build_hex2d(7).unwrap();
        let spec = PerturbationSpec::new(0.9, 1.1, 42).unwrap();
        let p1 = perturb(&sys, &spec).unwrap();
        let p2 = perturb(&sys, &spec).unwrap();
        assert_eq!(p1.coo_bytes(), p2.coo_bytes());
        assert!(!p1.unit_weights());
        for c in 0..sys.n_cells() {
            let orig: Vec<u32> = sys.rays_of_cell(c).map(|(r, _)| r).collect();
            let pert: Vec<u32> = p1.rays_of_cell(c).map(|(r, _)| r).collect();
            assert_eq!(orig, pert);
            let norm: f64 = p1.rays_of_cell(c).map(|(_, w)| w * w).sum::<f64>();
            assert!((norm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn perturb_unnormalized_weights_stay_in_interval() {
        let sys = build_hex2d(5).unwrap();
        let spec = PerturbationSpec { low: 0.9, high: 1.1, seed: 7, normalize_columns: false };
        let p = perturb(&sys, &spec).unwrap();
        for c in 0..p.n_cells() {
            for (_, w) in p.rays_of_cell(c) {
                assert!((0.9..=1.1).contains(&w));
            }
        }
    }

    #[test]
    fn perturb_rejects_degenerate_interval_and_double_perturbation() {
        let sys = build_hex2d(5).unwrap();
        assert!(matches!(
            PerturbationSpec::new(1.0, 1.0, 0),
            Err(Error::InvalidPerturbation { .. })
        ));
        let spec = PerturbationSpec::new(0.9, 1.1, 0).unwrap();
        let p = perturb(&sys, &spec).unwrap();
        assert!(matches!(perturb(&p, &spec), Err(Error::AlreadyPerturbed)));
    }

    #[test]
    fn hex_cell_index_is_lexicographic() {
        let sys = build_hex2d(5).unwrap();
        assert_eq!(hex_cell_index(5, -2, 0).unwrap(), 0);
        let mut seen = vec![false; sys.n_cells()];
        for i1 in -2..=2i32 {
            for i2 in -2..=2i32 {
                if (i1 + i2).abs() <= 2 {
                    let idx = hex_cell_index(5, i1, i2).unwrap() as usize;
                    assert!(!seen[idx]);
                    seen[idx] = true;
                }
            }
        }
        assert!(seen.iter().all(|&s| s));
        assert!(hex_cell_index(5, 2, 2).is_err());
    }
}
