//! Long-run distributional behavior of the Langevin samplers against grid
//! oracles and closed-form stationary moments.

use pushcond::diffcore::{RealVector, RngStream, Tape};
use pushcond::energy::TapeEnergy;
use pushcond::oracle::{empirical_tv_1d, grid_ebm_density_1d};
use pushcond::sampler::{
    langevin_latent, DriftOptimizer, InitStrategy, SamplerConfig, SamplerMode, TrajectoryState,
};

fn quadratic() -> TapeEnergy<impl Fn(&mut Tape, pushcond::Var, &RealVector) -> pushcond::Var> {
    TapeEnergy::new(1, |t: &mut Tape, z, _c: &RealVector| {
        let sq = t.dot(z, z);
        t.scale(sq, 0.5)
    })
}

fn double_well() -> TapeEnergy<impl Fn(&mut Tape, pushcond::Var, &RealVector) -> pushcond::Var> {
    // E = (z^2 - 1)^2
    TapeEnergy::new(1, |t: &mut Tape, z, _c: &RealVector| {
        let sq = t.dot(z, z);
        let shifted = t.add_scalar(sq, -1.0);
        t.mul(shifted, shifted)
    })
}

fn chain_samples(
    energy: &dyn pushcond::EnergyFn,
    cfg: &SamplerConfig,
    chains: u64,
    burn_in: usize,
    seed: u64,
) -> Vec<f64> {
    let c = RealVector::from_slice(&[0.0]);
    let root = RngStream::from_seed(seed);
    let mut out = Vec::new();
    for chain in 0..chains {
        let mut rng = root.substream(chain);
        let z0 = RealVector::from_slice(&[rng.normal()]);
        let traj = langevin_latent(energy, &c, &z0, cfg, &mut rng).unwrap();
        assert!(traj.truncated.is_none());
        for state in traj.states.iter().skip(burn_in) {
            let TrajectoryState::Latent(z) = state else {
                panic!()
            };
            out.push(z[0]);
        }
    }
    out
}

#[test]
fn quadratic_chain_reaches_unit_stationary_variance() {
    // E = z^2/2 with beta = 1: the stationary law is standard normal and the
    // O(lambda) discretization bias is far below the tolerance band.
    let cfg = SamplerConfig {
        steps: 9000,
        step_size: 1e-3,
        beta: 1.0,
        momentum: 0.0,
        ..Default::default()
    };
    let samples = chain_samples(&quadratic(), &cfg, 512, 3000, 100);
    let n = samples.len() as f64;
    let mean: f64 = samples.iter().sum::<f64>() / n;
    let var: f64 = samples.iter().map(|z| (z - mean) * (z - mean)).sum::<f64>() / n;
    assert!(
        (0.95..=1.05).contains(&var),
        "long-run variance {var} outside [0.95, 1.05]"
    );
}

#[test]
fn double_well_chain_matches_grid_density() {
    // Smaller sibling of the acceptance criterion: same energy, fewer chains.
    let cfg = SamplerConfig {
        steps: 3000,
        step_size: 1e-3,
        beta: 1.0,
        momentum: 0.0,
        ..Default::default()
    };
    let samples = chain_samples(&double_well(), &cfg, 32, 1000, 200);
    let grid = grid_ebm_density_1d(
        |z| (z * z - 1.0) * (z * z - 1.0),
        1.0,
        -8.0,
        8.0,
        pushcond::oracle::DEFAULT_CELLS_1D,
    )
    .unwrap();
    let tv = empirical_tv_1d(&samples, &grid).unwrap();
    assert!(tv < 0.15, "TV {tv}");
}

#[test]
fn all_drift_variants_hold_the_fixed_point() {
    let flat = TapeEnergy::new(2, |t: &mut Tape, _z, _c: &RealVector| t.constant_scalar(1.0));
    let z0 = RealVector::from_slice(&[0.25, -0.75]);
    let c = RealVector::from_slice(&[0.0]);
    for drift in [DriftOptimizer::Langevin, DriftOptimizer::Adam] {
        for momentum in [0.0, 0.99] {
            let cfg = SamplerConfig {
                steps: 25,
                drift,
                momentum,
                suppress_noise: true,
                mode: SamplerMode::Latent,
                init: InitStrategy::BestOfM,
                ..Default::default()
            };
            let mut rng = RngStream::from_seed(5);
            let traj = langevin_latent(&flat, &c, &z0, &cfg, &mut rng).unwrap();
            for state in &traj.states {
                let TrajectoryState::Latent(z) = state else {
                    panic!()
                };
                assert_eq!(z, &z0, "{drift:?} momentum {momentum}");
            }
        }
    }
}
