//! Seeded Monte Carlo harness for phase-transition grids.
//!
//! A grid runs `trials` independent instances per `(d, rho)` point with
//! `k = floor(rho * d^(D-1))` particles, reduces each instance and applies
//! the requested checks. Per-trial RNG streams are derived from
//! `(master_seed, d index, rho index, trial index)`, so tallies are
//! independent of execution order and thread count.

use std::io::Write;

use rand::distributions::OpenClosed01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::Error;
use crate::geometry::{perturb, GeometryKind, GeometrySpec, PerturbationSpec};
use crate::rank::{column_rank_status, DEFAULT_RANK_TOL};
use crate::reduction::reduce;
use crate::system::{IncidenceSystem, ParticleKind, ParticleVector};
use crate::uniqueness::{verify_uniqueness, Bounds, UniquenessStatus, DEFAULT_PROBES};
use crate::Result;

/// Whether particle draws may repeat cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleMode {
    /// Independent uniform draws; multiplicities accumulate.
    WithReplacement,
    /// A uniform k-subset of distinct cells.
    Distinct,
}

/// Draws a random particle vector.
///
/// Nonnegative particles carry independent uniform `(0, 1]` values per draw;
/// binary particles carry value 1 (multiplicities merge on accumulation).
pub fn sample_particles(
    n_cells: usize,
    k: usize,
    kind: ParticleKind,
    mode: SampleMode,
    rng: &mut ChaCha8Rng,
) -> Result<ParticleVector> {
    let cells: Vec<u32> = match mode {
        SampleMode::WithReplacement => (0..k).map(|_| rng.gen_range(0..n_cells as u32)).collect(),
        SampleMode::Distinct => {
            if k > n_cells {
                return Err(Error::InvalidSparsity(format!(
                    "cannot draw {k} distinct cells from {n_cells}"
                )));
            }
            // Floyd's subset sampling, then canonical ascending order
            let mut chosen = std::collections::BTreeSet::new();
            for j in (n_cells - k)..n_cells {
                let t = rng.gen_range(0..=j as u32);
                if !chosen.insert(t) {
                    chosen.insert(j as u32);
                }
            }
            chosen.into_iter().collect()
        }
    };
    let values: Vec<f64> = match kind {
        ParticleKind::Binary => vec![1.0; cells.len()],
        ParticleKind::Nonnegative => (0..cells.len()).map(|_| rng.sample(OpenClosed01)).collect(),
    };
    ParticleVector::new(cells, values, kind)
}

/// Which per-trial checks a phase grid runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Checks {
    pub rank: bool,
    pub unique_nonneg: bool,
    pub unique_box: bool,
    pub dims: bool,
}

impl Checks {
    pub fn all() -> Self {
        Self { rank: true, unique_nonneg: true, unique_box: true, dims: true }
    }

    pub fn dims_only() -> Self {
        Self { rank: false, unique_nonneg: false, unique_box: false, dims: true }
    }

    /// Parses a comma-separated list such as `rank,unique_box,dims`.
    pub fn parse(list: &str) -> Result<Self> {
        let mut checks = Self { rank: false, unique_nonneg: false, unique_box: false, dims: false };
        for tok in list.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            match tok {
                "all" => checks = Self::all(),
                "rank" => checks.rank = true,
                "unique_nonneg" | "unique-nonneg" => checks.unique_nonneg = true,
                "unique_box" | "unique-box" => checks.unique_box = true,
                "dims" => checks.dims = true,
                other => return Err(Error::InvalidSpec(format!("unknown check {other:?}"))),
            }
        }
        Ok(checks)
    }
}

/// Full specification of a phase grid run.
#[derive(Debug, Clone, serde::Serialize)]
pub struct PhaseGridSpec {
    pub kind: GeometryKind,
    /// Camera count for square2d; ignored elsewhere.
    pub cameras: Option<u32>,
    pub d_grid: Vec<u32>,
    pub rho_grid: Vec<f64>,
    pub trials: u32,
    pub master_seed: u64,
    pub perturbation: Option<PerturbationSpec>,
    pub vector_kind: ParticleKind,
    pub mode: SampleMode,
    /// Random objectives per uniqueness verification.
    pub probes: u32,
    pub checks: Checks,
    /// Name of the RNG stream algorithm, recorded for reproducibility.
    pub rng_algorithm: &'static str,
}

impl PhaseGridSpec {
    pub fn new(
        kind: GeometryKind,
        cameras: Option<u32>,
        d_grid: Vec<u32>,
        rho_grid: Vec<f64>,
        trials: u32,
        master_seed: u64,
    ) -> Self {
        Self {
            kind,
            cameras,
            d_grid,
            rho_grid,
            trials,
            master_seed,
            perturbation: None,
            vector_kind: ParticleKind::Binary,
            mode: SampleMode::Distinct,
            probes: DEFAULT_PROBES,
            checks: Checks::all(),
            rng_algorithm: RNG_ALGORITHM,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidSpec("trials must be >= 1".into()));
        }
        if self.d_grid.is_empty() {
            return Err(Error::InvalidSpec("empty d grid".into()));
        }
        if self.rho_grid.iter().any(|&r| !(r > 0.0 && r <= 4.0)) {
            return Err(Error::InvalidSpec("rho grid must lie in (0, 4]".into()));
        }
        if self.probes == 0 && (self.checks.unique_nonneg || self.checks.unique_box) {
            return Err(Error::InvalidSpec("uniqueness checks need probes >= 1".into()));
        }
        if self.checks.unique_box && self.mode == SampleMode::WithReplacement {
            return Err(Error::InvalidSpec(
                "box uniqueness needs distinct sampling so reference values stay within [0, 1]".into(),
            ));
        }
        if let Some(p) = &self.perturbation {
            p.validate()?;
        }
        for &d in &self.d_grid {
            let spec = GeometrySpec::new(self.kind, d, self.cameras)?;
            let n = match self.kind {
                GeometryKind::Hex2d => (3 * d as usize * d as usize + 1) / 4,
                GeometryKind::Square2d => (d as usize) * (d as usize),
                GeometryKind::Cube3d => (d as usize).pow(3),
            };
            if self.mode == SampleMode::Distinct {
                let max_rho = self.rho_grid.iter().copied().fold(0.0f64, f64::max);
                let max_k = sparsity_for(max_rho, d, spec.ambient_dim());
                if max_k > n {
                    return Err(Error::InvalidSpec(format!(
                        "rho = {max_rho} at d = {d} needs {max_k} distinct cells but only {n} exist"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// RNG used for every stochastic draw in this crate.
pub const RNG_ALGORITHM: &str = "chacha8";

/// `k = floor(rho * d^(D-1))`.
pub fn sparsity_for(rho: f64, d: u32, ambient_dim: u32) -> usize {
    (rho * (d as f64).powi(ambient_dim as i32 - 1)).floor() as usize
}

/// Tallies for one `(d, rho)` grid point.
#[derive(Debug, Clone, serde::Serialize)]
pub struct PhaseGridCell {
    pub d: u32,
    pub rho: f64,
    pub k: usize,
    pub trials: u32,
    pub frac_rank_ok: Option<f64>,
    pub frac_unique_nonneg: Option<f64>,
    pub frac_unique_box: Option<f64>,
    pub mean_m_red: f64,
    pub se_m_red: f64,
    pub mean_n_red: f64,
    pub se_n_red: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct TrialResult {
    m_red: f64,
    n_red: f64,
    rank_ok: bool,
    unique_nonneg: bool,
    unique_box: bool,
}

fn trial_seed(master: u64, d_idx: usize, rho_idx: usize, trial: u32) -> [u8; 32] {
    let mut bytes = [0u8; 32];
    bytes[0..8].copy_from_slice(&master.to_le_bytes());
    bytes[8..16].copy_from_slice(&(d_idx as u64).to_le_bytes());
    bytes[16..24].copy_from_slice(&(rho_idx as u64).to_le_bytes());
    bytes[24..32].copy_from_slice(&(trial as u64).to_le_bytes());
    bytes
}

fn run_trial(
    system: &IncidenceSystem,
    spec: &PhaseGridSpec,
    k: usize,
    seed: [u8; 32],
) -> Result<TrialResult> {
    let mut rng = ChaCha8Rng::from_seed(seed);
    let x = sample_particles(system.n_cells(), k, spec.vector_kind, spec.mode, &mut rng)?;
    let probe_seed: u64 = rng.gen();
    let b = system.matvec(&x)?;
    let red = reduce(system, &b)?;
    let mut out = TrialResult {
        m_red: red.m_red() as f64,
        n_red: red.n_red() as f64,
        ..Default::default()
    };
    if spec.checks.rank {
        out.rank_ok = if k == 0 {
            true
        } else {
            red.m_red() >= red.n_red()
                && column_rank_status(red.matrix(), DEFAULT_RANK_TOL)?.is_full_rank()
        };
    }
    if spec.checks.unique_nonneg {
        let verdict = verify_uniqueness(system, &x, Bounds::Nonneg, spec.probes, probe_seed)?;
        out.unique_nonneg = verdict.status == UniquenessStatus::Unique;
    }
    if spec.checks.unique_box {
        let verdict = verify_uniqueness(system, &x, Bounds::Box01, spec.probes, probe_seed)?;
        out.unique_box = verdict.status == UniquenessStatus::Unique;
    }
    Ok(out)
}

/// Runs the full grid. Trials are the unit of parallelism; per-trial seeds
/// make the tallies identical across any number of worker threads.
pub fn run_phase_grid(spec: &PhaseGridSpec) -> Result<Vec<PhaseGridCell>> {
    spec.validate()?;
    let mut cells = Vec::with_capacity(spec.d_grid.len() * spec.rho_grid.len());
    for (d_idx, &d) in spec.d_grid.iter().enumerate() {
        let geometry = GeometrySpec::new(spec.kind, d, spec.cameras)?;
        let mut system = geometry.build()?;
        if let Some(p) = &spec.perturbation {
            system = perturb(&system, p)?;
        }
        for (rho_idx, &rho) in spec.rho_grid.iter().enumerate() {
            let k = sparsity_for(rho, d, geometry.ambient_dim());
            let results: Vec<TrialResult> = (0..spec.trials)
                .into_par_iter()
                .map(|trial| run_trial(&system, spec, k, trial_seed(spec.master_seed, d_idx, rho_idx, trial)))
                .collect::<Result<_>>()?;
            cells.push(aggregate(d, rho, k, spec, &results));
        }
    }
    Ok(cells)
}

fn aggregate(d: u32, rho: f64, k: usize, spec: &PhaseGridSpec, results: &[TrialResult]) -> PhaseGridCell {
    let t = results.len() as f64;
    let mean_m = results.iter().map(|r| r.m_red).sum::<f64>() / t;
    let mean_n = results.iter().map(|r| r.n_red).sum::<f64>() / t;
    let var_m = results.iter().map(|r| (r.m_red - mean_m).powi(2)).sum::<f64>() / t;
    let var_n = results.iter().map(|r| (r.n_red - mean_n).powi(2)).sum::<f64>() / t;
    let frac = |f: &dyn Fn(&TrialResult) -> bool| results.iter().filter(|r| f(r)).count() as f64 / t;
    PhaseGridCell {
        d,
        rho,
        k,
        trials: spec.trials,
        frac_rank_ok: spec.checks.rank.then(|| frac(&|r| r.rank_ok)),
        frac_unique_nonneg: spec.checks.unique_nonneg.then(|| frac(&|r| r.unique_nonneg)),
        frac_unique_box: spec.checks.unique_box.then(|| frac(&|r| r.unique_box)),
        mean_m_red: mean_m,
        se_m_red: (var_m / t).sqrt(),
        mean_n_red: mean_n,
        se_n_red: (var_n / t).sqrt(),
    }
}

/// Output format of [`emit_grid`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridFormat {
    Csv,
    Json,
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x}"),
        None => "nan".to_string(),
    }
}

/// Writes grid cells as CSV (fixed column set) or JSON (cells plus the full
/// spec for reproducibility). Output bytes are a pure function of
/// `(spec, cells)`.
pub fn emit_grid<W: Write>(
    spec: &PhaseGridSpec,
    cells: &[PhaseGridCell],
    format: GridFormat,
    out: &mut W,
) -> Result<()> {
    match format {
        GridFormat::Csv => {
            writeln!(
                out,
                "d,rho,k,trials,frac_rank_ok,frac_unique_nonneg,frac_unique_box,mean_m_red,se_m_red,mean_n_red,se_n_red"
            )?;
            for c in cells {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{},{}",
                    c.d,
                    c.rho,
                    c.k,
                    c.trials,
                    fmt_opt(c.frac_rank_ok),
                    fmt_opt(c.frac_unique_nonneg),
                    fmt_opt(c.frac_unique_box),
                    c.mean_m_red,
                    c.se_m_red,
                    c.mean_n_red,
                    c.se_n_red
                )?;
            }
        }
        GridFormat::Json => {
            let doc = serde_json::json!({ "spec": spec, "cells": cells });
            serde_json::to_writer_pretty(&mut *out, &doc)
                .map_err(|e| Error::InvalidSpec(format!("json encoding failed: {e}")))?;
            writeln!(out)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn sample_zero_particles_is_empty() {
        let x = sample_particles(19, 0, ParticleKind::Binary, SampleMode::Distinct, &mut rng(1)).unwrap();
        assert_eq!(x.k(), 0);
    }

    #[test]
    fn sample_full_distinct_binary_is_all_ones() {
        let x = sample_particles(19, 19, ParticleKind::Binary, SampleMode::Distinct, &mut rng(2)).unwrap();
        let dense = x.to_dense(19).unwrap();
        assert!(dense.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn sample_distinct_rejects_oversized_k() {
        let err = sample_particles(5, 6, ParticleKind::Binary, SampleMode::Distinct, &mut rng(3));
        assert!(matches!(err, Err(Error::InvalidSparsity(_))));
    }

    #[test]
    fn replacement_collision_rate_matches_birthday() {
        // two draws over 19 cells collide with probability 1/19
        let trials = 100_000;
        let mut collisions = 0;
        let mut r = rng(4);
        for _ in 0..trials {
            let x = sample_particles(19, 2, ParticleKind::Binary, SampleMode::WithReplacement, &mut r).unwrap();
            if x.distinct_cells().len() == 1 {
                collisions += 1;
            }
        }
        let p = collisions as f64 / trials as f64;
        let expect = 1.0 / 19.0;
        let sigma = (expect * (1.0 - expect) / trials as f64).sqrt();
        assert!((p - expect).abs() < 3.0 * sigma, "p = {p}, expect = {expect}");
    }

    #[test]
    fn nonneg_values_lie_in_unit_interval() {
        let x = sample_particles(100, 40, ParticleKind::Nonnegative, SampleMode::Distinct, &mut rng(5)).unwrap();
        assert!(x.values().iter().all(|&v| v > 0.0 && v <= 1.0));
    }

    #[test]
    fn checks_parse_roundtrip() {
        let c = Checks::parse("rank,dims").unwrap();
        assert!(c.rank && c.dims && !c.unique_box && !c.unique_nonneg);
        assert_eq!(Checks::parse("all").unwrap(), Checks::all());
        assert!(Checks::parse("bogus").is_err());
    }

    #[test]
    fn spec_validation_catches_bad_grids() {
        let mut spec = PhaseGridSpec::new(GeometryKind::Hex2d, None, vec![5], vec![0.5], 10, 0);
        spec.checks = Checks::dims_only();
        spec.validate().unwrap();
        spec.rho_grid = vec![5.0];
        assert!(spec.validate().is_err());
        spec.rho_grid = vec![0.5];
        spec.trials = 0;
        assert!(spec.validate().is_err());
        let mut spec = PhaseGridSpec::new(GeometryKind::Hex2d, None, vec![4], vec![0.5], 10, 0);
        spec.checks = Checks::dims_only();
        assert!(spec.validate().is_err(), "even d must be rejected before any work");
    }

    #[test]
    fn box_check_requires_distinct_sampling() {
        let mut spec = PhaseGridSpec::new(GeometryKind::Hex2d, None, vec![5], vec![0.5], 5, 0);
        spec.mode = SampleMode::WithReplacement;
        spec.checks = Checks { rank: false, unique_nonneg: false, unique_box: true, dims: true };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn single_particle_grid_is_fully_unique() {
        let mut spec = PhaseGridSpec::new(GeometryKind::Hex2d, None, vec![5], vec![0.2], 1, 7);
        // rho = 0.2 at d = 5 gives k = 1
        spec.checks = Checks::all();
        let cells = run_phase_grid(&spec).unwrap();
        assert_eq!(cells.len(), 1);
        assert_eq!(cells[0].k, 1);
        assert_eq!(cells[0].frac_rank_ok, Some(1.0));
        assert_eq!(cells[0].frac_unique_nonneg, Some(1.0));
        assert_eq!(cells[0].frac_unique_box, Some(1.0));
        assert_eq!(cells[0].mean_m_red, 3.0);
        assert_eq!(cells[0].mean_n_red, 1.0);
    }

    #[test]
    fn grid_bytes_are_deterministic_across_thread_counts() {
        let mut spec = PhaseGridSpec::new(GeometryKind::Hex2d, None, vec![7, 9], vec![0.3, 0.8], 6, 99);
        spec.checks = Checks::all();
        let render = |threads: usize| -> (Vec<u8>, Vec<u8>) {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            let cells = pool.install(|| run_phase_grid(&spec)).unwrap();
            let mut csv = Vec::new();
            emit_grid(&spec, &cells, GridFormat::Csv, &mut csv).unwrap();
            let mut json = Vec::new();
            emit_grid(&spec, &cells, GridFormat::Json, &mut json).unwrap();
            (csv, json)
        };
        let (csv1, json1) = render(1);
        let (csv4, json4) = render(4);
        assert_eq!(csv1, csv4);
        assert_eq!(json1, json4);
    }

    #[test]
    fn empty_grid_emits_header_only() {
        let spec = PhaseGridSpec::new(GeometryKind::Hex2d, None, vec![5], vec![0.5], 5, 0);
        let mut buf = Vec::new();
        emit_grid(&spec, &[], GridFormat::Csv, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert!(text.starts_with("d,rho,k,trials,"));
    }

    #[test]
    fn csv_row_roundtrips_through_parse() {
        let mut spec = PhaseGridSpec::new(GeometryKind::Hex2d, None, vec![5], vec![0.4], 3, 1);
        spec.checks = Checks::dims_only();
        let cells = run_phase_grid(&spec).unwrap();
        let mut buf = Vec::new();
        emit_grid(&spec, &cells, GridFormat::Csv, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let row = text.lines().nth(1).unwrap();
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields.len(), 11);
        assert_eq!(fields[0].parse::<u32>().unwrap(), 5);
        assert_eq!(fields[1].parse::<f64>().unwrap(), 0.4);
        assert_eq!(fields[2].parse::<usize>().unwrap(), cells[0].k);
        assert!(fields[4].parse::<f64>().unwrap().is_nan());
        assert_eq!(fields[7].parse::<f64>().unwrap(), cells[0].mean_m_red);
    }
}
