//! Uniqueness of sparse nonnegative / box-constrained solutions.
//!
//! The verification protocol minimizes and maximizes random linear
//! objectives over the feasible set `{x : A x = b, bounds}` restricted to
//! the reduced system; a solution is declared unique when every optimum
//! coincides with the reference vector. On small instances an exact rational
//! oracle settles uniqueness unconditionally by bounding every coordinate of
//! the solution polytope.

use num_rational::BigRational;
use num_traits::Zero;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use clarabel::algebra::CscMatrix as ClarabelCsc;
use clarabel::solver::{
    DefaultSettings, DefaultSolver, IPSolver, SolverStatus,
    SupportedConeT::{NonnegativeConeT, ZeroConeT},
};

use crate::error::Error;
use crate::rank::{column_rank_status, exact_rational, DEFAULT_RANK_TOL};
use crate::reduction::{reduce, restore, CscMatrix, ReducedSystem};
use crate::simplex::{solve_exact, ExactOutcome};
use crate::system::{IncidenceSystem, ParticleVector};
use crate::Result;

/// Feasible-set bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Bounds {
    /// `x >= 0`.
    Nonneg,
    /// `0 <= x <= 1`.
    Box01,
}

/// Optimization sense for [`solve_lp`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpSense {
    Min,
    Max,
}

/// Outcome of a single LP solve.
#[derive(Debug, Clone)]
pub enum LpSolution {
    Optimal(Vec<f64>),
    Infeasible,
}

/// Default number of random probe objectives.
pub const DEFAULT_PROBES: u32 = 5;

/// Feasibility / optimality tolerance requested from the LP solver.
pub const LP_TOL: f64 = 1e-8;

/// Infinity-norm tolerance for matching an LP optimum against the reference.
pub const MATCH_TOL: f64 = 1e-6;

/// Cell-count limit for the exact enumeration oracle.
pub const ORACLE_MAX_CELLS: usize = 30;

/// Solves `opt f^T x  s.t.  A x = b` with the given bounds through an
/// interior-point solver at tolerance [`LP_TOL`]. Deterministic for fixed
/// inputs.
pub fn solve_lp(
    matrix: &CscMatrix,
    b: &[f64],
    bounds: Bounds,
    objective: &[f64],
    sense: LpSense,
) -> Result<LpSolution> {
    let (m, n) = (matrix.m, matrix.n);
    if b.len() != m {
        return Err(Error::DimensionMismatch { expected: m, got: b.len() });
    }
    if objective.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: objective.len() });
    }
    if n == 0 {
        return Ok(LpSolution::Optimal(Vec::new()));
    }
    // stack [A_eq; -I; +I(box)] column-major
    let rows = match bounds {
        Bounds::Nonneg => m + n,
        Bounds::Box01 => m + 2 * n,
    };
    let mut colptr = Vec::with_capacity(n + 1);
    let mut rowval = Vec::with_capacity(matrix.nnz() + 2 * n);
    let mut nzval = Vec::with_capacity(matrix.nnz() + 2 * n);
    colptr.push(0usize);
    for j in 0..n {
        for (r, w) in matrix.column(j) {
            rowval.push(r as usize);
            nzval.push(w);
        }
        rowval.push(m + j);
        nzval.push(-1.0);
        if bounds == Bounds::Box01 {
            rowval.push(m + n + j);
            nzval.push(1.0);
        }
        colptr.push(rowval.len());
    }
    let a = ClarabelCsc::new(rows, n, colptr, rowval, nzval);
    let mut rhs = b.to_vec();
    rhs.resize(m + n, 0.0);
    if bounds == Bounds::Box01 {
        rhs.resize(m + 2 * n, 1.0);
    }
    let cones = match bounds {
        Bounds::Nonneg => vec![ZeroConeT(m), NonnegativeConeT(n)],
        Bounds::Box01 => vec![ZeroConeT(m), NonnegativeConeT(n), NonnegativeConeT(n)],
    };
    let q: Vec<f64> = match sense {
        LpSense::Min => objective.to_vec(),
        LpSense::Max => objective.iter().map(|v| -v).collect(),
    };
    let p = ClarabelCsc::zeros((n, n));
    let mut settings = DefaultSettings::default();
    settings.verbose = false;
    settings.tol_feas = LP_TOL;
    settings.tol_gap_abs = LP_TOL;
    settings.tol_gap_rel = LP_TOL;
    let mut solver = DefaultSolver::new(&p, &q, &a, &rhs, &cones, settings)
        .map_err(|e| Error::LpFailure(format!("solver setup: {e:?}")))?;
    solver.solve();
    match solver.solution.status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => {
            Ok(LpSolution::Optimal(solver.solution.x.clone()))
        }
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
            Ok(LpSolution::Infeasible)
        }
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => {
            Err(Error::LpFailure("unbounded objective; feasible sets here must be bounded".into()))
        }
        other => Err(Error::LpFailure(format!("solver stopped with status {other:?}"))),
    }
}

/// Verdict of the probe-based verification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum UniquenessStatus {
    Unique,
    NotUnique,
    Inconclusive,
}

/// Result of [`verify_uniqueness`].
#[derive(Debug, Clone)]
pub struct UniquenessVerdict {
    pub status: UniquenessStatus,
    /// Probes actually executed (each probe solves both senses).
    pub probes_used: u32,
    /// A second solution, full length, when `status == NotUnique`.
    pub witness: Option<Vec<f64>>,
    /// Largest observed `|min - max|` of a probe objective.
    pub objective_gap: f64,
    /// Failure description when `status == Inconclusive`.
    pub diagnostic: Option<String>,
}

/// Verifies uniqueness of `x_ref` in `{x : A x = A x_ref, bounds}` by
/// probing with `probes` seeded standard-normal objectives on the reduced
/// system. Declares uniqueness iff every optimum matches `x_ref` within
/// [`MATCH_TOL`] in the infinity norm; any differing optimum is returned as
/// the witness.
pub fn verify_uniqueness(
    system: &IncidenceSystem,
    x_ref: &ParticleVector,
    bounds: Bounds,
    probes: u32,
    seed: u64,
) -> Result<UniquenessVerdict> {
    if probes == 0 {
        return Err(Error::InvalidSpec("probes must be >= 1".into()));
    }
    let dense_ref = x_ref.to_dense(system.n_cells())?;
    if bounds == Bounds::Box01 {
        if let Some((c, v, _)) = x_ref.accumulated().into_iter().find(|&(_, v, _)| v > 1.0) {
            return Err(Error::InvalidSparsity(format!(
                "box bounds need reference values <= 1, cell {c} accumulates {v}"
            )));
        }
    }
    let b = system.matvec(x_ref)?;
    let red = reduce(system, &b)?;
    if red.n_red() == 0 {
        // b = 0 forces x = 0, the reference itself
        return Ok(UniquenessVerdict {
            status: UniquenessStatus::Unique,
            probes_used: 0,
            witness: None,
            objective_gap: 0.0,
            diagnostic: None,
        });
    }
    let ref_red = red.restrict(&dense_ref)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gap: f64 = 0.0;
    for probe in 0..probes {
        let f: Vec<f64> = (0..red.n_red()).map(|_| StandardNormal.sample(&mut rng)).collect();
        let mut values = [0.0f64; 2];
        for (slot, sense) in [(0usize, LpSense::Min), (1usize, LpSense::Max)] {
            let solved = match solve_lp(red.matrix(), red.rhs(), bounds, &f, sense) {
                Ok(s) => s,
                Err(Error::LpFailure(msg)) => {
                    return Ok(UniquenessVerdict {
                        status: UniquenessStatus::Inconclusive,
                        probes_used: probe + 1,
                        witness: None,
                        objective_gap: gap,
                        diagnostic: Some(msg),
                    })
                }
                Err(e) => return Err(e),
            };
            let x = match solved {
                LpSolution::Optimal(x) => x,
                LpSolution::Infeasible => {
                    return Ok(UniquenessVerdict {
                        status: UniquenessStatus::Inconclusive,
                        probes_used: probe + 1,
                        witness: None,
                        objective_gap: gap,
                        diagnostic: Some("reduced system reported infeasible".into()),
                    })
                }
            };
            values[slot] = f.iter().zip(&x).map(|(fj, xj)| fj * xj).sum();
            let dev = x
                .iter()
                .zip(&ref_red)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            if dev > MATCH_TOL {
                let clipped: Vec<f64> = x.iter().map(|&v| v.max(0.0)).collect();
                return Ok(UniquenessVerdict {
                    status: UniquenessStatus::NotUnique,
                    probes_used: probe + 1,
                    witness: Some(restore(&red, &clipped)?),
                    objective_gap: gap.max((values[1] - values[0]).abs()),
                    diagnostic: None,
                });
            }
        }
        gap = gap.max((values[1] - values[0]).abs());
    }
    Ok(UniquenessVerdict {
        status: UniquenessStatus::Unique,
        probes_used: probes,
        witness: None,
        objective_gap: gap,
        diagnostic: None,
    })
}

/// Exact uniqueness decision.
#[derive(Debug, Clone)]
pub enum OracleVerdict {
    Unique,
    NotUnique { witness: Vec<f64> },
}

impl OracleVerdict {
    pub fn is_unique(&self) -> bool {
        matches!(self, OracleVerdict::Unique)
    }
}

/// Decides uniqueness exactly on a small system by bounding every coordinate
/// of the solution polytope with the exact rational simplex: the polytope
/// `{A x = b, bounds}` is the single point `x_ref` iff each coordinate's
/// exact minimum and maximum both equal the reference value.
pub fn exact_unique_oracle(
    system: &IncidenceSystem,
    x_ref: &ParticleVector,
    bounds: Bounds,
) -> Result<OracleVerdict> {
    if system.n_cells() > ORACLE_MAX_CELLS {
        return Err(Error::OracleTooLarge { n: system.n_cells(), limit: ORACLE_MAX_CELLS });
    }
    // exact accumulated reference values per cell
    let mut ref_exact = vec![BigRational::zero(); system.n_cells()];
    for (&c, &v) in x_ref.support().iter().zip(x_ref.values()) {
        if c as usize >= system.n_cells() {
            return Err(Error::CellIndexOutOfRange { index: c as usize, n: system.n_cells() });
        }
        ref_exact[c as usize] += exact_rational(v);
    }
    if bounds == Bounds::Box01 {
        if let Some(c) = ref_exact.iter().position(|v| v > &BigRational::from_integer(1.into())) {
            return Err(Error::InvalidSparsity(format!(
                "box bounds need reference values <= 1, cell {c} exceeds it"
            )));
        }
    }
    // support reduction (pattern-exact), then exact columns
    let b = system.matvec(x_ref)?;
    let red = reduce(system, &b)?;
    if red.n_red() == 0 {
        return Ok(OracleVerdict::Unique);
    }
    let m_red = red.m_red();
    let n_red = red.n_red();
    let columns: Vec<Vec<BigRational>> = (0..n_red)
        .map(|j| {
            let mut col = vec![BigRational::zero(); m_red];
            for (r, w) in red.matrix().column(j) {
                col[r as usize] = exact_rational(w);
            }
            col
        })
        .collect();
    let ref_red: Vec<BigRational> =
        red.kept_cells().iter().map(|&c| ref_exact[c as usize].clone()).collect();
    let b_exact: Vec<BigRational> = (0..m_red)
        .map(|r| {
            (0..n_red).fold(BigRational::zero(), |acc, j| acc + &columns[j][r] * &ref_red[j])
        })
        .collect();
    // variables: x (n_red) plus box slacks
    let n_vars = match bounds {
        Bounds::Nonneg => n_red,
        Bounds::Box01 => 2 * n_red,
    };
    let rows = match bounds {
        Bounds::Nonneg => m_red,
        Bounds::Box01 => m_red + n_red,
    };
    let mut a = vec![vec![BigRational::zero(); n_vars]; rows];
    let mut rhs = b_exact;
    for j in 0..n_red {
        for r in 0..m_red {
            a[r][j] = columns[j][r].clone();
        }
    }
    if bounds == Bounds::Box01 {
        let one = BigRational::from_integer(1.into());
        for j in 0..n_red {
            a[m_red + j][j] = one.clone();
            a[m_red + j][n_red + j] = one.clone();
            rhs.push(one.clone());
        }
    }
    let mut objective = vec![BigRational::zero(); n_vars];
    for j in 0..n_red {
        let senses: &[bool] = if ref_red[j].is_zero() { &[true] } else { &[true, false] };
        for &maximize in senses {
            objective[j] = BigRational::from_integer(1.into());
            let outcome = solve_exact(&a, &rhs, &objective, maximize);
            objective[j] = BigRational::zero();
            match outcome {
                ExactOutcome::Optimal { x, value } => {
                    if value != ref_red[j] {
                        let witness: Vec<f64> = {
                            let x_f: Vec<f64> = x[..n_red]
                                .iter()
                                .map(|v| rational_to_f64(v))
                                .collect();
                            restore(&red, &x_f)?
                        };
                        return Ok(OracleVerdict::NotUnique { witness });
                    }
                }
                ExactOutcome::Infeasible => {
                    return Err(Error::LpFailure("oracle polytope is empty; inconsistent input".into()))
                }
                ExactOutcome::Unbounded => {
                    return Err(Error::LpFailure("oracle polytope is unbounded".into()))
                }
            }
        }
    }
    Ok(OracleVerdict::Unique)
}

fn rational_to_f64(v: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    v.to_f64().unwrap_or(f64::NAN)
}

/// Outcome of [`rank_certificate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankCertificate {
    /// `m_red >= n_red` with full column rank: the affine solution set is a
    /// point, so the nonnegative solution is unique.
    CertifiedUnique,
    Uncertified,
}

/// Certifies uniqueness from the shape and column rank of the reduced
/// system alone.
pub fn rank_certificate(red: &ReducedSystem) -> Result<RankCertificate> {
    if red.m_red() == 0 || red.n_red() == 0 {
        return Err(Error::EmptyMatrix);
    }
    if red.m_red() >= red.n_red() && column_rank_status(red.matrix(), DEFAULT_RANK_TOL)?.is_full_rank() {
        Ok(RankCertificate::CertifiedUnique)
    } else {
        Ok(RankCertificate::Uncertified)
    }
}
