//! Closed-form expected reduced dimensions, critical sparsity solvers, the
//! concentration tail bound and the Wendel probability.
//!
//! For the hexagonal and cubic geometries the expected number of zero
//! measurements and removable cells after seeding `k` uniform particles
//! (with replacement) has an exact closed form; the square geometries are
//! handled by Monte Carlo estimation. Critical sparsity values are the roots
//! of `N_R(k) = c * N_C(k)` for the criterion constants
//! `c in { delta*l, 1, 1/2, (1+delta)/l }`.

use std::collections::HashMap;
use std::sync::Mutex;

use num_bigint::BigUint;
use num_rational::Ratio;
use num_traits::{One, ToPrimitive, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::experiments::{sample_particles, SampleMode};
use crate::reduction::reduce;
use crate::system::{IncidenceSystem, ParticleKind};
use crate::{Result, EXPANSION_DELTA};

/// Expected dimensions of the reduced system at sparsity `k`.
///
/// `n_r0` is the expected number of zero measurements, `n_r = |R| - n_r0`
/// the expected number of kept rows; `n_c0` and `n_c` likewise for removable
/// and kept cells.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ExpectedDims {
    pub k: f64,
    pub n_r0: f64,
    pub n_r: f64,
    pub n_c0: f64,
    pub n_c: f64,
}

/// Number of hexagon cells `(3 d^2 + 1) / 4`.
fn hex_cells(d: u32) -> f64 {
    (3.0 * d as f64 * d as f64 + 1.0) / 4.0
}

fn check_hex_d(d: u32) -> Result<()> {
    if d < 3 || d % 2 == 0 {
        return Err(Error::InvalidGeometry(format!("hexagon requires odd d >= 3, got {d}")));
    }
    Ok(())
}

fn check_cube_d(d: u32) -> Result<()> {
    if d < 2 {
        return Err(Error::InvalidGeometry(format!("cube requires d >= 2, got {d}")));
    }
    Ok(())
}

fn check_k(k: f64) -> Result<()> {
    if !(k >= 0.0) {
        return Err(Error::InvalidSparsity(format!("k must be a nonnegative real, got {k}")));
    }
    Ok(())
}

/// Expected number of zero measurements on the hexagon:
/// `sum_r (1 - |r|/|C|)^k` over all `3d` rays, using the exact per-direction
/// cardinalities `d - |offset|`.
pub fn hex_nr0(d: u32, k: f64) -> Result<f64> {
    check_hex_d(d)?;
    check_k(k)?;
    let c = hex_cells(d);
    let h = (d as i64 - 1) / 2;
    let mut per_direction = 0.0;
    for off in -h..=h {
        let card = d as f64 - off.abs() as f64;
        per_direction += (1.0 - card / c).powf(k);
    }
    Ok(3.0 * per_direction)
}

/// Expected number of removable cells on the hexagon by per-cell
/// inclusion-exclusion over the three incident rays.
pub fn hex_nc0(d: u32, k: f64) -> Result<f64> {
    check_hex_d(d)?;
    check_k(k)?;
    let c = hex_cells(d);
    let h = (d as i64 - 1) / 2;
    let card = |off: i64| d as f64 - off.abs() as f64;
    let mut total = 0.0;
    for i1 in -h..=h {
        for i2 in -h..=h {
            if (i1 + i2).abs() > h {
                continue;
            }
            let (a, b, g) = (card(i1), card(i2), card(i1 + i2));
            let singles = (1.0 - a / c).powf(k) + (1.0 - b / c).powf(k) + (1.0 - g / c).powf(k);
            let pairs = (1.0 - (a + b - 1.0) / c).powf(k)
                + (1.0 - (a + g - 1.0) / c).powf(k)
                + (1.0 - (b + g - 1.0) / c).powf(k);
            let triple = (1.0 - (a + b + g - 2.0) / c).powf(k);
            total += singles - pairs + triple;
        }
    }
    Ok(total)
}

/// First- and second-order closed approximations of [`hex_nr0`]:
/// `|R| - 3k` and `|R| - 3k + (3/2) k (k-1) q_max`. The quadratic form is an
/// upper bound in the regime `k * q_max <= 1`.
pub fn hex_nr0_bounds(d: u32, k: f64) -> Result<(f64, f64)> {
    check_hex_d(d)?;
    check_k(k)?;
    let m = 3.0 * d as f64;
    let q_max = d as f64 / hex_cells(d);
    let linear = m - 3.0 * k;
    let quadratic = m - 3.0 * k + 1.5 * k * (k - 1.0) * q_max;
    Ok((linear, quadratic))
}

/// Expected dimensions for the hexagon.
pub fn hex_dims(d: u32, k: f64) -> Result<ExpectedDims> {
    let n_r0 = hex_nr0(d, k)?;
    let n_c0 = hex_nc0(d, k)?;
    let m = 3.0 * d as f64;
    let n = hex_cells(d);
    Ok(ExpectedDims { k, n_r0, n_r: m - n_r0, n_c0, n_c: n - n_c0 })
}

/// Expected number of zero measurements on the cube:
/// `4d ((1 - 1/d^2)^k + 2 sum_{s=1}^{d-1} (1 - s/d^3)^k)`.
pub fn cube_nr0(d: u32, k: f64) -> Result<f64> {
    check_cube_d(d)?;
    check_k(k)?;
    let df = d as f64;
    let d3 = df * df * df;
    let mut tail = 0.0;
    for s in 1..d {
        tail += (1.0 - s as f64 / d3).powf(k);
    }
    Ok(4.0 * df * ((1.0 - 1.0 / (df * df)).powf(k) + 2.0 * tail))
}

/// Expected number of kept rows on the cube: `4d(2d-1) - cube_nr0`.
pub fn cube_nr(d: u32, k: f64) -> Result<f64> {
    let m = 4.0 * d as f64 * (2.0 * d as f64 - 1.0);
    Ok(m - cube_nr0(d, k)?)
}

/// Expected number of kept cells on the cube, by the exact four-term
/// inclusion-exclusion grouped over direction pairs and triples. `O(d^3)`
/// per evaluation.
pub fn cube_nc(d: u32, k: f64) -> Result<f64> {
    check_cube_d(d)?;
    check_k(k)?;
    let di = d as i64;
    let df = d as f64;
    let d3 = df * df * df;
    // powers of the per-ray avoidance probability, indexed by union size
    let max_union = 4 * d as usize;
    let pow: Vec<f64> = (0..=max_union).map(|u| (1.0 - u as f64 / d3).powf(k)).collect();
    let card = |s: i64| (di - s.abs()) as usize;
    let r2 = |a: i64, b: i64| pow[card(a) + card(b) - 1];
    let r3 = |a: i64, b: i64, c: i64| pow[card(a) + card(b) + card(c) - 2];
    let r4 = |a: i64, b: i64, c: i64, e: i64| pow[card(a) + card(b) + card(c) + card(e) - 3];

    let mut nc1_tail = 0.0;
    for s in 1..di {
        nc1_tail += s as f64 * pow[s as usize];
    }
    let nc1 = 4.0 * df * (df * pow[d as usize] + 2.0 * nc1_tail);

    let mut pair_same = 0.0; // direction pairs sharing an image axis: (1,2) and (3,4)
    for i in 1..=di {
        for l in 1..=di {
            pair_same += r2(i + l - 1 - di, i - l);
        }
    }
    let mut pair_mixed = 0.0; // the four remaining pairs are all congruent
    let mut triple_a = 0.0;
    let mut triple_b = 0.0;
    let mut quad = 0.0;
    for i in 1..=di {
        for j in 1..=di {
            for l in 1..=di {
                pair_mixed += r2(l - i, l - j);
                triple_a += r3(i + l - 1 - di, l - i, l - j);
                triple_b += r3(l - i, l - j, j + l - 1 - di);
                quad += r4(i + l - 1 - di, l - i, j + l - 1 - di, l - j);
            }
        }
    }
    let nc2 = 2.0 * df * pair_same + 4.0 * pair_mixed;
    let nc3 = 2.0 * (triple_a + triple_b);
    Ok(d3 - nc1 + nc2 - nc3 + quad)
}

/// Expected dimensions for the cube.
pub fn cube_dims(d: u32, k: f64) -> Result<ExpectedDims> {
    let n_r0 = cube_nr0(d, k)?;
    let n_c = cube_nc(d, k)?;
    let m = 4.0 * d as f64 * (2.0 * d as f64 - 1.0);
    let n = (d as f64).powi(3);
    Ok(ExpectedDims { k, n_r0, n_r: m - n_r0, n_c0: n - n_c, n_c })
}

/// A source of expected reduced dimensions as a function of real `k`.
pub trait DimsModel: Sync {
    fn dims(&self, k: f64) -> Result<ExpectedDims>;
    /// Number of cells; upper end of the root bracket.
    fn n_cells(&self) -> f64;
    /// Left degree of the geometry.
    fn left_degree(&self) -> f64;
}

/// Analytic hexagon model.
pub struct HexDims {
    pub d: u32,
}

impl DimsModel for HexDims {
    fn dims(&self, k: f64) -> Result<ExpectedDims> {
        hex_dims(self.d, k)
    }
    fn n_cells(&self) -> f64 {
        hex_cells(self.d)
    }
    fn left_degree(&self) -> f64 {
        3.0
    }
}

/// Analytic cube model.
pub struct CubeDims {
    pub d: u32,
}

impl DimsModel for CubeDims {
    fn dims(&self, k: f64) -> Result<ExpectedDims> {
        cube_dims(self.d, k)
    }
    fn n_cells(&self) -> f64 {
        (self.d as f64).powi(3)
    }
    fn left_degree(&self) -> f64 {
        4.0
    }
}

/// Monte Carlo estimate of the reduced dimensions at integer sparsity `k`,
/// sampling `trials` particle sets with replacement.
pub fn empirical_dims(
    system: &IncidenceSystem,
    k: usize,
    trials: usize,
    seed: u64,
) -> Result<EmpiricalDims> {
    if trials == 0 {
        return Err(Error::InvalidSpec("trials must be >= 1".into()));
    }
    let mut sum_m = 0.0;
    let mut sum_m2 = 0.0;
    let mut sum_n = 0.0;
    let mut sum_n2 = 0.0;
    for trial in 0..trials {
        let mut rng = trial_rng(seed, k as u64, trial as u64);
        let x = sample_particles(
            system.n_cells(),
            k,
            ParticleKind::Binary,
            SampleMode::WithReplacement,
            &mut rng,
        )?;
        let red = reduce(system, &system.matvec(&x)?)?;
        let (m_red, n_red) = (red.m_red() as f64, red.n_red() as f64);
        sum_m += m_red;
        sum_m2 += m_red * m_red;
        sum_n += n_red;
        sum_n2 += n_red * n_red;
    }
    let t = trials as f64;
    let mean_m = sum_m / t;
    let mean_n = sum_n / t;
    let var_m = (sum_m2 / t - mean_m * mean_m).max(0.0);
    let var_n = (sum_n2 / t - mean_n * mean_n).max(0.0);
    Ok(EmpiricalDims {
        k,
        trials,
        mean_m_red: mean_m,
        se_m_red: (var_m / t).sqrt(),
        mean_n_red: mean_n,
        se_n_red: (var_n / t).sqrt(),
    })
}

fn trial_rng(seed: u64, stream: u64, trial: u64) -> ChaCha8Rng {
    let mut bytes = [0u8; 32];
    bytes[0..8].copy_from_slice(&seed.to_le_bytes());
    bytes[8..16].copy_from_slice(&stream.to_le_bytes());
    bytes[16..24].copy_from_slice(&trial.to_le_bytes());
    ChaCha8Rng::from_seed(bytes)
}

/// Monte Carlo mean reduced dimensions with standard errors.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct EmpiricalDims {
    pub k: usize,
    pub trials: usize,
    pub mean_m_red: f64,
    pub se_m_red: f64,
    pub mean_n_red: f64,
    pub se_n_red: f64,
}

/// Empirical dims model for geometries without a closed form (square2d):
/// evaluates
/// integer sparsities by seeded Monte Carlo and interpolates linearly in
/// between. Estimates are cached per integer k.
pub struct EmpiricalModel<'a> {
    system: &'a IncidenceSystem,
    trials: usize,
    seed: u64,
    cache: Mutex<HashMap<usize, (f64, f64)>>,
}

impl<'a> EmpiricalModel<'a> {
    pub fn new(system: &'a IncidenceSystem, trials: usize, seed: u64) -> Self {
        Self { system, trials, seed, cache: Mutex::new(HashMap::new()) }
    }

    fn point(&self, k: usize) -> Result<(f64, f64)> {
        if let Some(&hit) = self.cache.lock().unwrap().get(&k) {
            return Ok(hit);
        }
        let est = if k == 0 {
            (0.0, 0.0)
        } else {
            let e = empirical_dims(self.system, k, self.trials, self.seed)?;
            (e.mean_m_red, e.mean_n_red)
        };
        self.cache.lock().unwrap().insert(k, est);
        Ok(est)
    }
}

impl DimsModel for EmpiricalModel<'_> {
    fn dims(&self, k: f64) -> Result<ExpectedDims> {
        check_k(k)?;
        let lo = k.floor() as usize;
        let hi = k.ceil() as usize;
        let (m_lo, n_lo) = self.point(lo)?;
        let (m_hi, n_hi) = self.point(hi)?;
        let frac = k - lo as f64;
        let n_r = m_lo + frac * (m_hi - m_lo);
        let n_c = n_lo + frac * (n_hi - n_lo);
        let m = self.system.n_rays() as f64;
        let n = self.system.n_cells() as f64;
        Ok(ExpectedDims { k, n_r0: m - n_r, n_r, n_c0: n - n_c, n_c })
    }
    fn n_cells(&self) -> f64 {
        self.system.n_cells() as f64
    }
    fn left_degree(&self) -> f64 {
        self.system.left_degree() as f64
    }
}

/// The four threshold criteria: roots of `N_R(k) = c * N_C(k)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    /// `c = delta * l`, the expansion-certificate threshold.
    Delta,
    /// `c = 1`: expected square reduced system.
    Crit,
    /// `c = 1/2`: the half-ratio heuristic.
    Opt,
    /// `c = (1 + delta) / l`: conjectured perturbed-recovery threshold.
    Inv,
}

impl Criterion {
    pub fn constant(&self, left_degree: f64) -> f64 {
        match self {
            Criterion::Delta => EXPANSION_DELTA * left_degree,
            Criterion::Crit => 1.0,
            Criterion::Opt => 0.5,
            Criterion::Inv => (1.0 + EXPANSION_DELTA) / left_degree,
        }
    }

    pub fn all() -> [Criterion; 4] {
        [Criterion::Delta, Criterion::Crit, Criterion::Opt, Criterion::Inv]
    }
}

/// Root of one criterion, with the derived guarantee threshold for `Delta`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct CriticalValue {
    pub criterion: Criterion,
    /// Sparsity solving `N_R(k) = c * N_C(k)` to within `1e-4`.
    pub k: f64,
    /// `N_C(k_delta) / (1 + delta)`; only for the `Delta` criterion.
    pub k_tilde: Option<f64>,
}

/// Absolute bisection tolerance in `k`.
const BISECT_TOL: f64 = 1e-4;

/// Solves `N_R(k) = c * N_C(k)` for `k` by bisection on `[1, n]`.
pub fn critical_k(model: &dyn DimsModel, criterion: Criterion) -> Result<CriticalValue> {
    let c = criterion.constant(model.left_degree());
    let g = |k: f64| -> Result<f64> {
        let dims = model.dims(k)?;
        Ok(dims.n_r - c * dims.n_c)
    };
    let mut lo = 1.0;
    let mut hi = model.n_cells();
    let g_lo = g(lo)?;
    let g_hi = g(hi)?;
    if g_lo == 0.0 {
        return finish(model, criterion, lo);
    }
    if g_lo * g_hi > 0.0 {
        return Err(Error::CriterionNotAttained { lo, hi });
    }
    while hi - lo > BISECT_TOL {
        let mid = 0.5 * (lo + hi);
        let g_mid = g(mid)?;
        if g_mid == 0.0 {
            lo = mid;
            hi = mid;
        } else if g_mid * g_lo < 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    finish(model, criterion, 0.5 * (lo + hi))
}

fn finish(model: &dyn DimsModel, criterion: Criterion, k: f64) -> Result<CriticalValue> {
    let k_tilde = if criterion == Criterion::Delta {
        Some(model.dims(k)?.n_c / (1.0 + EXPANSION_DELTA))
    } else {
        None
    };
    Ok(CriticalValue { criterion, k, k_tilde })
}

/// All five published curve values for one `d`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct CriticalCurves {
    pub d: u32,
    pub k_delta: f64,
    pub k_tilde_delta: f64,
    pub k_crit: f64,
    pub k_opt: f64,
    pub k_inv: f64,
}

/// Solves all four criteria against one model.
pub fn critical_curves(model: &dyn DimsModel, d: u32) -> Result<CriticalCurves> {
    let delta = critical_k(model, Criterion::Delta)?;
    let crit = critical_k(model, Criterion::Crit)?;
    let opt = critical_k(model, Criterion::Opt)?;
    let inv = critical_k(model, Criterion::Inv)?;
    Ok(CriticalCurves {
        d,
        k_delta: delta.k,
        k_tilde_delta: delta.k_tilde.expect("delta criterion returns k_tilde"),
        k_crit: crit.k,
        k_opt: opt.k,
        k_inv: inv.k,
    })
}

/// Exact and asymptotic concentration bounds for the number of zero
/// measurements on the hexagon.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct TailBound {
    /// `2 exp(-(1 - p_max^2) / (18 (1 - p_max^(2k))) * dev^2)`.
    pub exact: f64,
    /// Large-d limit `2 exp(-dev^2 / (18 k))`.
    pub asymptotic: f64,
}

/// Tail bound on `Pr(|X - N_R^0| >= deviation)` for the hexagon geometry.
///
/// Undefined at `k = 0` (the variance proxy vanishes).
pub fn tail_bound(d: u32, k: u32, deviation: f64) -> Result<TailBound> {
    check_hex_d(d)?;
    if k == 0 {
        return Err(Error::TailBoundUndefined);
    }
    if !(deviation > 0.0) {
        return Err(Error::InvalidSparsity(format!("deviation must be positive, got {deviation}")));
    }
    let q_min = 2.0 * (d as f64 + 1.0) / (3.0 * d as f64 * d as f64 + 1.0);
    let p_max = 1.0 - q_min;
    let coeff = (1.0 - p_max * p_max) / (18.0 * (1.0 - p_max.powi(2 * k as i32)));
    Ok(TailBound {
        exact: 2.0 * (-coeff * deviation * deviation).exp(),
        asymptotic: 2.0 * (-deviation * deviation / (18.0 * k as f64)).exp(),
    })
}

/// Wendel's probability that `n` uniform points in general position on the
/// sphere in `R^m` lie in some half-space:
/// `2^{-(n-1)} * sum_{i=0}^{m-1} C(n-1, i)`, evaluated exactly.
pub fn wendel(n: u64, m: u64) -> Result<Ratio<BigUint>> {
    if n == 0 || m == 0 {
        return Err(Error::InvalidSparsity("wendel requires n >= 1 and m >= 1".into()));
    }
    if m >= n {
        return Ok(Ratio::one());
    }
    let mut sum = BigUint::zero();
    let mut binom = BigUint::one(); // C(n-1, 0)
    for i in 0..m {
        sum += &binom;
        // C(n-1, i+1) = C(n-1, i) * (n-1-i) / (i+1)
        binom = binom * BigUint::from(n - 1 - i) / BigUint::from(i + 1);
    }
    Ok(Ratio::new(sum, BigUint::from(2u32).pow((n - 1) as u32)))
}

/// `wendel` as a float.
pub fn wendel_f64(n: u64, m: u64) -> Result<f64> {
    let p = wendel(n, m)?;
    Ok(p.numer().to_f64().unwrap_or(f64::NAN) / p.denom().to_f64().unwrap_or(f64::NAN))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hex_nr0_boundary_values() {
        assert!((hex_nr0(5, 0.0).unwrap() - 15.0).abs() < 1e-12);
        assert!((hex_nr0(5, 1.0).unwrap() - 12.0).abs() < 1e-12);
        assert!(hex_nr0(4, 1.0).is_err());
    }

    #[test]
    fn hex_nc0_k0_equals_all_cells() {
        assert!((hex_nc0(5, 0.0).unwrap() - 19.0).abs() < 1e-12);
        assert!((hex_nc0(11, 0.0).unwrap() - 91.0).abs() < 1e-12);
    }

    #[test]
    fn hex_bounds_bracket_exact() {
        let (lin, quad) = hex_nr0_bounds(5, 0.0).unwrap();
        assert_eq!(lin, 15.0);
        assert_eq!(quad, 15.0);
        let (lin, quad) = hex_nr0_bounds(5, 1.0).unwrap();
        assert_eq!(lin, 12.0);
        assert_eq!(quad, 12.0);
        // linear <= exact <= quadratic in the relevant regime
        let d = 51;
        for k in [2.0f64, 5.0, 10.0, 20.0, 30.0] {
            let exact = hex_nr0(d, k).unwrap();
            let (lin, quad) = hex_nr0_bounds(d, k).unwrap();
            assert!(lin <= exact + 1e-9, "k = {k}");
            assert!(exact <= quad + 1e-9, "k = {k}");
        }
    }

    #[test]
    fn cube_nr_reference_points() {
        // one particle lights 4 rays
        assert!((cube_nr0(2, 1.0).unwrap() - 20.0).abs() < 1e-12);
        assert!((cube_nr(2, 1.0).unwrap() - 4.0).abs() < 1e-12);
        assert!((cube_nr(30, 0.0).unwrap() - 0.0).abs() < 1e-9);
        // all rays hit in the dense limit
        assert!((cube_nr(30, 1e7).unwrap() - 7080.0).abs() < 1e-6);
        assert!(cube_nr0(1, 1.0).is_err());
    }

    #[test]
    fn cube_nc_vanishes_without_particles() {
        for d in [2u32, 3, 7] {
            assert!(cube_nc(d, 0.0).unwrap().abs() < 1e-9, "d = {d}");
        }
    }

    #[test]
    fn single_particle_keeps_one_cell() {
        // k = 1: exactly the occupied cell is kept in expectation
        assert!((cube_nc(2, 1.0).unwrap() - 1.0).abs() < 1e-10);
        assert!((cube_nc(3, 1.0).unwrap() - 1.0).abs() < 1e-10);
        let d = 5u32;
        let n = hex_cells(d);
        assert!((n - hex_nc0(d, 1.0).unwrap() - 1.0).abs() < 1e-10);
    }

    /// Independent evaluation of cube N_C: per-cell inclusion-exclusion over
    /// the four incident rays, no symmetry folding.
    fn cube_nc_percell(d: u32, k: f64) -> f64 {
        let di = d as i64;
        let d3 = (d as f64).powi(3);
        let card = |s: i64| (di - s.abs()) as f64;
        let mut total = 0.0;
        for i in 1..=di {
            for j in 1..=di {
                for l in 1..=di {
                    let cards = [card(i + l - 1 - di), card(i - l), card(j + l - 1 - di), card(j - l)];
                    let mut s1 = 0.0;
                    for &a in &cards {
                        s1 += (1.0 - a / d3).powf(k);
                    }
                    let mut s2 = 0.0;
                    let mut s3 = 0.0;
                    for a in 0..4 {
                        for b in (a + 1)..4 {
                            s2 += (1.0 - (cards[a] + cards[b] - 1.0) / d3).powf(k);
                            for c in (b + 1)..4 {
                                s3 += (1.0 - (cards[a] + cards[b] + cards[c] - 2.0) / d3).powf(k);
                            }
                        }
                    }
                    let s4 = (1.0 - (cards.iter().sum::<f64>() - 3.0) / d3).powf(k);
                    total += 1.0 - s1 + s2 - s3 + s4;
                }
            }
        }
        total
    }

    #[test]
    fn cube_nc_folding_matches_unfolded_sum() {
        for d in [2u32, 3, 4, 6] {
            for k in [1.0f64, 2.0, 5.5, 20.0] {
                let folded = cube_nc(d, k).unwrap();
                let plain = cube_nc_percell(d, k);
                assert!(
                    (folded - plain).abs() <= 1e-9 * plain.abs().max(1.0),
                    "d = {d}, k = {k}: {folded} vs {plain}"
                );
            }
        }
    }

    #[test]
    fn ratio_starts_near_left_degree_and_decreases() {
        let model = HexDims { d: 51 };
        let mut prev = f64::INFINITY;
        for k in [1.0f64, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0] {
            let dims = model.dims(k).unwrap();
            let ratio = dims.n_r / dims.n_c;
            assert!(ratio <= prev + 1e-9, "ratio not nonincreasing at k = {k}");
            prev = ratio;
        }
        let near_zero = model.dims(1.0).unwrap();
        assert!((near_zero.n_r / near_zero.n_c - 3.0).abs() < 0.15);
    }

    #[test]
    fn critical_ordering_holds() {
        for d in [31u32, 51] {
            let model = HexDims { d };
            let curves = critical_curves(&model, d).unwrap();
            assert!(curves.k_tilde_delta < curves.k_crit);
            assert!(curves.k_crit < curves.k_opt);
        }
        let model = CubeDims { d: 20 };
        let curves = critical_curves(&model, 20).unwrap();
        assert!(curves.k_tilde_delta < curves.k_crit);
        assert!(curves.k_crit < curves.k_opt);
    }

    #[test]
    fn criterion_not_attained_reported() {
        // a constant above the k->0 ratio limit (the left degree) is never reached
        struct Flat;
        impl DimsModel for Flat {
            fn dims(&self, k: f64) -> Result<ExpectedDims> {
                Ok(ExpectedDims { k, n_r0: 0.0, n_r: 10.0, n_c0: 0.0, n_c: 10.0 })
            }
            fn n_cells(&self) -> f64 {
                100.0
            }
            fn left_degree(&self) -> f64 {
                3.0
            }
        }
        let res = critical_k(&Flat, Criterion::Opt);
        assert!(matches!(res, Err(Error::CriterionNotAttained { .. })));
    }

    #[test]
    fn tail_bound_limits() {
        // vacuous as the deviation shrinks
        let b = tail_bound(51, 25, 1e-12).unwrap();
        assert!((b.exact - 2.0).abs() < 1e-6);
        assert!((b.asymptotic - 2.0).abs() < 1e-6);
        assert!(matches!(tail_bound(51, 0, 5.0), Err(Error::TailBoundUndefined)));
        // exact approaches the asymptotic form for large d
        let b = tail_bound(1001, 50, 10.0).unwrap();
        assert!((b.exact - b.asymptotic).abs() / b.exact < 0.01);
    }

    #[test]
    fn wendel_reference_values() {
        assert_eq!(wendel_f64(3, 2).unwrap(), 0.75);
        let half = wendel(8, 4).unwrap();
        assert_eq!(half, Ratio::new(BigUint::from(1u32), BigUint::from(2u32)));
        for n in 1..=20u64 {
            for m in n..=20 {
                assert!(wendel(n, m).unwrap().is_one());
            }
        }
        for m in 1..=10u64 {
            let p = wendel(2 * m, m).unwrap();
            assert_eq!(p, Ratio::new(BigUint::from(1u32), BigUint::from(2u32)), "m = {m}");
        }
    }
}
