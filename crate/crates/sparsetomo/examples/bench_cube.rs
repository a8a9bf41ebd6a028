//! Timing probe for cube-scale uniqueness LPs (temporary dev tool).

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sparsetomo::experiments::{sample_particles, SampleMode};
use sparsetomo::geometry::{build_cube3d, perturb, PerturbationSpec};
use sparsetomo::system::ParticleKind;
use sparsetomo::uniqueness::{verify_uniqueness, Bounds};

fn main() {
    let d = 30;
    let t0 = Instant::now();
    let sys = build_cube3d(d).unwrap();
    let pert = perturb(&sys, &PerturbationSpec::new(0.9, 1.1, 7).unwrap()).unwrap();
    println!("build+perturb: {:?}", t0.elapsed());
    for (k, probes) in [(1500usize, 2u32), (1950, 2), (2028, 2), (2136, 2), (2300, 2)] {
        let mut rng = ChaCha8Rng::seed_from_u64(k as u64);
        let x = sample_particles(pert.n_cells(), k, ParticleKind::Binary, SampleMode::Distinct, &mut rng)
            .unwrap();
        let t = Instant::now();
        let v = verify_uniqueness(&pert, &x, Bounds::Nonneg, probes, 99).unwrap();
        println!(
            "k={k}: status={:?} probes_used={} gap={:.3e} time={:?}",
            v.status,
            v.probes_used,
            v.objective_gap,
            t.elapsed()
        );
    }
}
