//! Langevin dynamics over latents and over GMM parameters, with translator
//! and naive initialization strategies and the ablation switches (no error
//! correction, ADAM drift, deterministic init).

use std::time::Instant;

use crate::diffcore::optim::{adam_step, momentum_step, OptimizerState};
use crate::diffcore::tape::stable_softmax;
use crate::diffcore::{RealVector, RngStream};
use crate::energy::EnergyFn;
use crate::error::{Error, Result};
use crate::models::{Generator, Prior};
use crate::translator::{gmm_mean, gmm_sample, TranslatorParams};

const DIVERGENCE_NORM: f64 = 1e6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerMode {
    Latent,
    ParamSpace,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitStrategy {
    /// M translator draws, keep the lowest energy.
    BestOfM,
    /// Deterministic start at the translator's mixture mean.
    GmmMean,
    /// M prior draws, keep the lowest energy.
    NaivePriorBestOfM,
    /// K lowest-energy prior draws as component means, random weight logits
    /// (param-space only).
    NaiveKBest,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DriftOptimizer {
    /// Momentum gradient drift with injected noise (the Langevin sampler).
    Langevin,
    /// ADAM drift with the noise retained (ablation).
    Adam,
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    /// Langevin step count T.
    pub steps: usize,
    /// Step size lambda.
    pub step_size: f64,
    /// Inverse temperature beta; the drift coefficient is beta*lambda/2.
    pub beta: f64,
    /// Momentum rho; 0 disables.
    pub momentum: f64,
    pub mode: SamplerMode,
    pub init: InitStrategy,
    /// Candidate count M for best-of-M inits.
    pub candidates: usize,
    /// Component count for the naive K-best init.
    pub k_best: usize,
    pub drift: DriftOptimizer,
    /// ADAM learning rate for the drift ablation.
    pub adam_lr: f64,
    /// ADAM learning rate for weight logits in param-space mode.
    pub weight_lr: f64,
    /// Test hook: suppress the injected noise entirely.
    pub suppress_noise: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            steps: 100,
            step_size: 1e-4,
            beta: 20.0,
            momentum: 0.99,
            mode: SamplerMode::Latent,
            init: InitStrategy::BestOfM,
            candidates: 10,
            k_best: 10,
            drift: DriftOptimizer::Langevin,
            adam_lr: 5e-3,
            weight_lr: 5e-3,
            suppress_noise: false,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.step_size <= 0.0 {
            return Err(Error::InvalidConfig("step_size must be > 0".into()));
        }
        if self.beta <= 0.0 {
            return Err(Error::InvalidConfig("beta must be > 0".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidConfig("momentum must be in [0, 1)".into()));
        }
        if self.candidates == 0 || self.k_best == 0 {
            return Err(Error::InvalidConfig("candidate counts must be >= 1".into()));
        }
        match (self.mode, self.init) {
            (SamplerMode::Latent, InitStrategy::NaiveKBest) => Err(Error::InvalidConfig(
                "naive-k-best init requires param-space mode".into(),
            )),
            (SamplerMode::ParamSpace, InitStrategy::BestOfM)
            | (SamplerMode::ParamSpace, InitStrategy::NaivePriorBestOfM) => {
                Err(Error::InvalidConfig(
                    "param-space mode initializes from GMM parameters".into(),
                ))
            }
            _ => Ok(()),
        }
    }
}

/// One recorded chain state.
#[derive(Clone, Debug)]
pub enum TrajectoryState {
    Latent(RealVector),
    /// Row-major K x d weight logits and means.
    ParamSpace {
        weight_logits: Vec<f64>,
        means: Vec<f64>,
        components: usize,
    },
}

/// Per-step records of one chain, the final latent, wall-clock per step, and
/// rng provenance.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub states: Vec<TrajectoryState>,
    pub energies: Vec<f64>,
    pub step_wall_ns: Vec<u64>,
    pub final_latent: RealVector,
    /// (key0, key1, counter) of the stream at chain start.
    pub rng_provenance: (u64, u64, u64),
    /// Diagnostic when a non-finite energy/gradient truncated the chain.
    pub truncated: Option<String>,
}

impl Trajectory {
    pub fn final_energy(&self) -> f64 {
        *self.energies.last().unwrap()
    }

    /// First step index whose recorded energy is at or below `tau`;
    /// infinity when never reached.
    pub fn steps_to_threshold(&self, tau: f64) -> f64 {
        self.energies
            .iter()
            .position(|e| *e <= tau)
            .map(|i| i as f64)
            .unwrap_or(f64::INFINITY)
    }
}

/// Samples M latents from the translator's GMM at `c`, evaluates the energy
/// once per candidate, and returns the minimizer (lowest index on ties).
pub fn init_best_of_m(
    translator: &TranslatorParams,
    c: &RealVector,
    m: usize,
    energy: &dyn EnergyFn,
    rng: &mut RngStream,
) -> Result<RealVector> {
    if m == 0 {
        return Err(Error::InvalidConfig("best-of-M needs M >= 1".into()));
    }
    let g = translator.forward(c)?;
    let mut best: Option<(f64, RealVector)> = None;
    for _ in 0..m {
        let z = gmm_sample(&g, rng);
        let e = energy.eval(&z, c, rng)?;
        if best.as_ref().map_or(true, |(be, _)| e < *be) {
            best = Some((e, z));
        }
    }
    Ok(best.unwrap().1)
}

/// Result of the naive (prior-based) initialization.
#[derive(Clone, Debug)]
pub enum NaiveInit {
    Single(RealVector),
    KBest {
        /// Energy-sorted lowest-energy latents, best first.
        means: Vec<RealVector>,
        /// Standard-normal logits, one row of length d per component.
        weight_logits: Vec<RealVector>,
    },
}

/// Draws M prior candidates. With `k_best = None` returns the energy argmin;
/// otherwise the `k` lowest-energy latents become component means and the
/// weight logits are drawn standard normal.
pub fn init_naive(
    prior: &Prior,
    c: &RealVector,
    m: usize,
    energy: &dyn EnergyFn,
    k_best: Option<usize>,
    rng: &mut RngStream,
) -> Result<NaiveInit> {
    let k = k_best.unwrap_or(1);
    if m == 0 || k == 0 || m < k {
        return Err(Error::InvalidConfig(format!(
            "naive init needs M >= K_best >= 1 (got M={m}, K_best={k})"
        )));
    }
    let mut scored: Vec<(f64, usize, RealVector)> = Vec::with_capacity(m);
    for i in 0..m {
        let z = prior.sample(rng);
        let e = energy.eval(&z, c, rng)?;
        scored.push((e, i, z));
    }
    // Stable order: energy ascending, candidate index breaking ties.
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    match k_best {
        None => Ok(NaiveInit::Single(scored.into_iter().next().unwrap().2)),
        Some(k) => {
            let means: Vec<RealVector> = scored.into_iter().take(k).map(|s| s.2).collect();
            let d = means[0].len();
            let weight_logits = (0..k).map(|_| rng.normal_vec(d)).collect();
            Ok(NaiveInit::KBest {
                means,
                weight_logits,
            })
        }
    }
}

fn guard_divergence(z: &RealVector, step: usize) -> Result<()> {
    let norm = z.norm();
    if norm > DIVERGENCE_NORM {
        return Err(Error::ChainDiverged { step, norm });
    }
    Ok(())
}

/// Langevin dynamics over the latent z: momentum-accumulated gradient drift
/// scaled by beta*lambda/2, then sqrt(lambda) Gaussian noise. The ADAM
/// ablation replaces the drift but keeps the noise.
pub fn langevin_latent(
    energy: &dyn EnergyFn,
    c: &RealVector,
    z0: &RealVector,
    cfg: &SamplerConfig,
    rng: &mut RngStream,
) -> Result<Trajectory> {
    cfg.validate()?;
    z0.check_len("langevin_latent", energy.latent_dim())?;
    let d = z0.len();
    let drift_lr = cfg.beta * cfg.step_size / 2.0;
    let noise_scale = cfg.step_size.sqrt();
    let mut opt = match cfg.drift {
        DriftOptimizer::Langevin => OptimizerState::momentum(drift_lr, cfg.momentum, d),
        DriftOptimizer::Adam => OptimizerState::adam(cfg.adam_lr, d),
    };

    let mut z = z0.clone();
    let mut traj = Trajectory {
        states: Vec::with_capacity(cfg.steps + 1),
        energies: Vec::with_capacity(cfg.steps + 1),
        step_wall_ns: Vec::with_capacity(cfg.steps),
        final_latent: z.clone(),
        rng_provenance: rng.provenance(),
        truncated: None,
    };

    for step in 0..=cfg.steps {
        let started = Instant::now();
        let need_grad = step < cfg.steps;
        let result = if need_grad {
            energy.value_and_grad(&z, c, rng)
        } else {
            energy.eval(&z, c, rng).map(|v| (v, RealVector::zeros(d)))
        };
        let (value, grad) = match result {
            Ok(pair) => pair,
            Err(Error::NonFinite { op }) => {
                traj.truncated = Some(format!("non-finite energy from {op} at step {step}"));
                break;
            }
            Err(e) => return Err(e),
        };
        traj.states.push(TrajectoryState::Latent(z.clone()));
        traj.energies.push(value);
        if !need_grad {
            break;
        }

        match cfg.drift {
            DriftOptimizer::Langevin => momentum_step(&mut opt, z.as_mut_slice(), grad.as_slice())?,
            DriftOptimizer::Adam => adam_step(&mut opt, z.as_mut_slice(), grad.as_slice())?,
        }
        if !cfg.suppress_noise {
            let eps = rng.normal_vec(d);
            z.add_scaled(noise_scale, &eps);
        }
        guard_divergence(&z, step)?;
        traj.step_wall_ns.push(started.elapsed().as_nanos() as u64);
    }
    if let Some(TrajectoryState::Latent(last)) = traj.states.last() {
        traj.final_latent = last.clone();
    }
    Ok(traj)
}

/// Per-dimension softmax combination `z_j = sum_k softmax_k(L[., j]) mu[k, j]`.
fn combine_params(logits: &[f64], means: &[f64], k: usize, d: usize) -> RealVector {
    let mut z = RealVector::zeros(d);
    let mut col = vec![0.0; k];
    for j in 0..d {
        for ki in 0..k {
            col[ki] = logits[ki * d + j];
        }
        let s = stable_softmax(&col);
        let mut acc = 0.0;
        for ki in 0..k {
            acc += s[ki] * means[ki * d + j];
        }
        z[j] = acc;
    }
    z
}

fn langevin_params_impl(
    energy: &dyn EnergyFn,
    c: &RealVector,
    init_logits: Vec<f64>,
    init_means: Vec<f64>,
    k: usize,
    cfg: &SamplerConfig,
    rng: &mut RngStream,
) -> Result<Trajectory> {
    let d = energy.latent_dim();
    debug_assert_eq!(init_logits.len(), k * d);
    debug_assert_eq!(init_means.len(), k * d);
    let drift_lr = cfg.beta * cfg.step_size / 2.0;
    let noise_scale = cfg.step_size.sqrt();
    let mut logits = init_logits;
    let mut means = init_means;
    let mut mu_opt = match cfg.drift {
        DriftOptimizer::Langevin => OptimizerState::momentum(drift_lr, cfg.momentum, k * d),
        DriftOptimizer::Adam => OptimizerState::adam(cfg.adam_lr, k * d),
    };
    let mut w_opt = OptimizerState::adam(cfg.weight_lr, k * d);

    let mut traj = Trajectory {
        states: Vec::with_capacity(cfg.steps + 1),
        energies: Vec::with_capacity(cfg.steps + 1),
        step_wall_ns: Vec::with_capacity(cfg.steps),
        final_latent: combine_params(&logits, &means, k, d),
        rng_provenance: rng.provenance(),
        truncated: None,
    };

    for step in 0..=cfg.steps {
        let started = Instant::now();
        let z = combine_params(&logits, &means, k, d);
        let need_grad = step < cfg.steps;
        let result = if need_grad {
            energy.value_and_grad(&z, c, rng)
        } else {
            energy.eval(&z, c, rng).map(|v| (v, RealVector::zeros(d)))
        };
        let (value, grad_z) = match result {
            Ok(pair) => pair,
            Err(Error::NonFinite { op }) => {
                traj.truncated = Some(format!("non-finite energy from {op} at step {step}"));
                break;
            }
            Err(e) => return Err(e),
        };
        traj.states.push(TrajectoryState::ParamSpace {
            weight_logits: logits.clone(),
            means: means.clone(),
            components: k,
        });
        traj.energies.push(value);
        traj.final_latent = z.clone();
        if !need_grad {
            break;
        }

        // Chain rule through z_j = sum_k s_kj mu_kj with s = softmax over k:
        //   dE/dmu_kj = s_kj gz_j
        //   dE/dL_kj  = s_kj (mu_kj - z_j) gz_j
        let mut grad_means = vec![0.0; k * d];
        let mut grad_logits = vec![0.0; k * d];
        let mut col = vec![0.0; k];
        for j in 0..d {
            for ki in 0..k {
                col[ki] = logits[ki * d + j];
            }
            let s = stable_softmax(&col);
            for ki in 0..k {
                let skj = s[ki];
                grad_means[ki * d + j] = skj * grad_z[j];
                grad_logits[ki * d + j] = skj * (means[ki * d + j] - z[j]) * grad_z[j];
            }
        }

        match cfg.drift {
            DriftOptimizer::Langevin => momentum_step(&mut mu_opt, &mut means, &grad_means)?,
            DriftOptimizer::Adam => adam_step(&mut mu_opt, &mut means, &grad_means)?,
        }
        adam_step(&mut w_opt, &mut logits, &grad_logits)?;
        if !cfg.suppress_noise {
            // Noise is injected into the means only; weights stay on their
            // deterministic ADAM path.
            for m in means.iter_mut() {
                *m += noise_scale * rng.normal();
            }
        }
        let znew = combine_params(&logits, &means, k, d);
        guard_divergence(&znew, step)?;
        traj.step_wall_ns.push(started.elapsed().as_nanos() as u64);
    }
    Ok(traj)
}

/// Parameter-space Langevin: the chain state is (weight logits, means), both
/// K x d. Means follow momentum Langevin with noise; weight logits follow a
/// noise-free ADAM path. Initialized from the translator's GMM at `c`, with
/// the K weight logits broadcast across the d latent dimensions.
pub fn langevin_params(
    energy: &dyn EnergyFn,
    c: &RealVector,
    translator: &TranslatorParams,
    cfg: &SamplerConfig,
    rng: &mut RngStream,
) -> Result<Trajectory> {
    cfg.validate()?;
    let g = translator.forward(c)?;
    let logits_k = translator.weight_logits(c)?;
    let k = g.components();
    let d = g.latent_dim();
    let mut logits = vec![0.0; k * d];
    let mut means = vec![0.0; k * d];
    for ki in 0..k {
        for j in 0..d {
            logits[ki * d + j] = logits_k[ki];
            means[ki * d + j] = g.means[ki][j];
        }
    }
    langevin_params_impl(energy, c, logits, means, k, cfg, rng)
}

/// Parameter-space Langevin from an explicit (logits, means) start, as the
/// naive K-best initialization produces.
pub fn langevin_params_from(
    energy: &dyn EnergyFn,
    c: &RealVector,
    weight_logits: &[RealVector],
    means: &[RealVector],
    cfg: &SamplerConfig,
    rng: &mut RngStream,
) -> Result<Trajectory> {
    cfg.validate()?;
    if weight_logits.len() != means.len() || means.is_empty() {
        return Err(Error::InvalidConfig(
            "param-space init needs matching nonempty logits and means".into(),
        ));
    }
    let k = means.len();
    let d = energy.latent_dim();
    let mut logits_flat = Vec::with_capacity(k * d);
    let mut means_flat = Vec::with_capacity(k * d);
    for (l, m) in weight_logits.iter().zip(means) {
        l.check_len("langevin_params_from", d)?;
        m.check_len("langevin_params_from", d)?;
        logits_flat.extend_from_slice(l.as_slice());
        means_flat.extend_from_slice(m.as_slice());
    }
    langevin_params_impl(energy, c, logits_flat, means_flat, k, cfg, rng)
}

/// Full conditional sampling: initialize with the configured strategy, run
/// the configured chain, and push the final latent through the generator.
pub fn tr0n_sample(
    generator: &Generator,
    prior: &Prior,
    translator: &TranslatorParams,
    energy: &dyn EnergyFn,
    c: &RealVector,
    cfg: &SamplerConfig,
    rng: &mut RngStream,
) -> Result<(RealVector, Trajectory)> {
    cfg.validate()?;
    let traj = match cfg.mode {
        SamplerMode::Latent => {
            let z0 = match cfg.init {
                InitStrategy::BestOfM => {
                    init_best_of_m(translator, c, cfg.candidates, energy, rng)?
                }
                InitStrategy::GmmMean => gmm_mean(&translator.forward(c)?),
                InitStrategy::NaivePriorBestOfM => {
                    match init_naive(prior, c, cfg.candidates, energy, None, rng)? {
                        NaiveInit::Single(z) => z,
                        NaiveInit::KBest { .. } => unreachable!(),
                    }
                }
                InitStrategy::NaiveKBest => unreachable!("rejected by validate"),
            };
            langevin_latent(energy, c, &z0, cfg, rng)?
        }
        SamplerMode::ParamSpace => match cfg.init {
            InitStrategy::GmmMean => langevin_params(energy, c, translator, cfg, rng)?,
            InitStrategy::NaiveKBest => {
                let init = init_naive(
                    prior,
                    c,
                    cfg.candidates,
                    energy,
                    Some(cfg.k_best.min(cfg.candidates)),
                    rng,
                )?;
                match init {
                    NaiveInit::KBest {
                        means,
                        weight_logits,
                    } => langevin_params_from(energy, c, &weight_logits, &means, cfg, rng)?,
                    NaiveInit::Single(_) => unreachable!(),
                }
            }
            _ => unreachable!("rejected by validate"),
        },
    };
    let x = generator.apply(&traj.final_latent)?;
    Ok((x, traj))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffcore::Tape;
    use crate::energy::TapeEnergy;
    use crate::translator::GmmParams;

    fn quadratic_energy(dim: usize) -> impl EnergyFn {
        TapeEnergy::new(dim, |t: &mut Tape, z, _c: &RealVector| {
            let sq = t.dot(z, z);
            t.scale(sq, 0.5)
        })
    }

    fn constant_energy(dim: usize) -> impl EnergyFn {
        TapeEnergy::new(dim, |t: &mut Tape, _z, _c: &RealVector| {
            t.constant_scalar(3.5)
        })
    }

    fn centered_translator(mu: &[f64], sigma: f64) -> TranslatorParams {
        let mut tr = TranslatorParams::zeroed(1, 4, 1, mu.len(), false).unwrap();
        tr.mean_bias_mut().as_mut_slice().copy_from_slice(mu);
        let nu = (sigma - 1e-6f64).ln();
        let d = mu.len();
        let mut flat = Vec::new();
        tr.append_flat(&mut flat);
        let n = flat.len();
        for v in flat[n - d..].iter_mut() {
            *v = nu;
        }
        tr.read_flat(&flat);
        tr
    }

    fn dummy_c() -> RealVector {
        RealVector::from_slice(&[1.0])
    }

    #[test]
    fn best_of_one_returns_the_single_draw() {
        let tr = centered_translator(&[2.0, -1.0], 0.5);
        let energy = quadratic_energy(2);
        let base = RngStream::from_seed(1);
        let z = init_best_of_m(&tr, &dummy_c(), 1, &energy, &mut base.clone()).unwrap();
        let manual = gmm_sample(&tr.forward(&dummy_c()).unwrap(), &mut base.clone());
        assert_eq!(z, manual);
    }

    #[test]
    fn best_of_m_attains_candidate_minimum() {
        let tr = centered_translator(&[1.0, 1.0], 1.0);
        let energy = quadratic_energy(2);
        let base = RngStream::from_seed(2);
        let chosen = init_best_of_m(&tr, &dummy_c(), 16, &energy, &mut base.clone()).unwrap();
        // Recompute the candidate set with an identical stream.
        let g = tr.forward(&dummy_c()).unwrap();
        let mut replay = base.clone();
        let mut best = f64::INFINITY;
        for _ in 0..16 {
            let z = gmm_sample(&g, &mut replay);
            let e = 0.5 * z.dot(&z);
            best = best.min(e);
        }
        assert_eq!(0.5 * chosen.dot(&chosen), best);
    }

    #[test]
    fn best_of_16_beats_best_of_1_on_a_quadratic() {
        let tr = centered_translator(&[1.5, 1.5], 1.0);
        let energy = quadratic_energy(2);
        let median = |m: usize| {
            let root = RngStream::from_seed(3);
            let mut energies: Vec<f64> = (0..100)
                .map(|i| {
                    let mut rng = root.substream(i);
                    let z = init_best_of_m(&tr, &dummy_c(), m, &energy, &mut rng).unwrap();
                    0.5 * z.dot(&z)
                })
                .collect();
            energies.sort_by(f64::total_cmp);
            0.5 * (energies[49] + energies[50])
        };
        assert!(median(16) < median(1));
    }

    #[test]
    fn naive_k_best_returns_energy_sorted_candidates_when_m_equals_k() {
        let prior = Prior::StandardNormal { dim: 2 };
        let energy = quadratic_energy(2);
        let base = RngStream::from_seed(4);
        let init = init_naive(&prior, &dummy_c(), 6, &energy, Some(6), &mut base.clone()).unwrap();
        let NaiveInit::KBest { means, .. } = init else {
            panic!("expected K-best init");
        };
        // Same candidates, independently sorted.
        let mut replay = base.clone();
        let mut expected: Vec<RealVector> = (0..6).map(|_| prior.sample(&mut replay)).collect();
        expected.sort_by(|a, b| (0.5 * a.dot(a)).total_cmp(&(0.5 * b.dot(b))));
        assert_eq!(means, expected);
    }

    #[test]
    fn naive_single_with_m_one_is_the_lone_draw() {
        let prior = Prior::StandardNormal { dim: 3 };
        let energy = quadratic_energy(3);
        let base = RngStream::from_seed(5);
        let init = init_naive(&prior, &dummy_c(), 1, &energy, None, &mut base.clone()).unwrap();
        let NaiveInit::Single(z) = init else {
            panic!("expected single init");
        };
        assert_eq!(z, prior.sample(&mut base.clone()));
    }

    #[test]
    fn naive_rejects_m_below_k() {
        let prior = Prior::StandardNormal { dim: 2 };
        let energy = quadratic_energy(2);
        let mut rng = RngStream::from_seed(6);
        assert!(init_naive(&prior, &dummy_c(), 3, &energy, Some(5), &mut rng).is_err());
    }

    #[test]
    fn zero_gradient_suppressed_noise_is_a_fixed_point() {
        let energy = constant_energy(2);
        let z0 = RealVector::from_slice(&[0.7, -0.4]);
        let cfg = SamplerConfig {
            steps: 20,
            momentum: 0.0,
            suppress_noise: true,
            ..Default::default()
        };
        let mut rng = RngStream::from_seed(7);
        let traj = langevin_latent(&energy, &dummy_c(), &z0, &cfg, &mut rng).unwrap();
        assert_eq!(traj.states.len(), 21);
        for state in &traj.states {
            let TrajectoryState::Latent(z) = state else {
                panic!()
            };
            assert_eq!(z, &z0);
        }
        assert_eq!(traj.final_latent, z0);
    }

    #[test]
    fn quadratic_contraction_matches_closed_form() {
        // E = |z|^2/2, beta = 2, rho = 0, no noise: z' = (1 - lambda) z.
        let energy = quadratic_energy(1);
        let cfg = SamplerConfig {
            steps: 50,
            step_size: 1e-3,
            beta: 2.0,
            momentum: 0.0,
            suppress_noise: true,
            ..Default::default()
        };
        let mut rng = RngStream::from_seed(8);
        let traj =
            langevin_latent(&energy, &dummy_c(), &RealVector::from_slice(&[1.0]), &cfg, &mut rng)
                .unwrap();
        let mut expect = 1.0;
        for state in &traj.states {
            let TrajectoryState::Latent(z) = state else {
                panic!()
            };
            assert!((z[0] - expect).abs() <= 1e-14 * expect.abs());
            expect *= 1.0 - 1e-3;
        }
    }

    #[test]
    fn divergent_chain_reports_divergence() {
        // Negative quadratic: gradient pushes z away from the origin.
        let energy = TapeEnergy::new(1, |t: &mut Tape, z, _c: &RealVector| {
            let sq = t.dot(z, z);
            t.scale(sq, -0.5)
        });
        let cfg = SamplerConfig {
            steps: 10_000,
            step_size: 1.0,
            beta: 2000.0,
            momentum: 0.0,
            suppress_noise: true,
            ..Default::default()
        };
        let mut rng = RngStream::from_seed(9);
        let res = langevin_latent(
            &energy,
            &dummy_c(),
            &RealVector::from_slice(&[1.0]),
            &cfg,
            &mut rng,
        );
        assert!(matches!(res, Err(Error::ChainDiverged { .. })));
    }

    #[test]
    fn param_space_with_zero_gradient_is_constant() {
        let energy = constant_energy(2);
        let tr = centered_translator(&[0.3, 0.9], 0.2);
        let cfg = SamplerConfig {
            steps: 15,
            momentum: 0.0,
            mode: SamplerMode::ParamSpace,
            init: InitStrategy::GmmMean,
            suppress_noise: true,
            ..Default::default()
        };
        let mut rng = RngStream::from_seed(10);
        let traj = langevin_params(&energy, &dummy_c(), &tr, &cfg, &mut rng).unwrap();
        let first = traj.energies[0];
        for (state, e) in traj.states.iter().zip(&traj.energies) {
            assert_eq!(*e, first);
            let TrajectoryState::ParamSpace { means, .. } = state else {
                panic!()
            };
            assert_eq!(means, &vec![0.3, 0.9]);
        }
    }

    #[test]
    fn single_component_param_space_reduces_to_latent_chain() {
        let energy = quadratic_energy(2);
        let tr = centered_translator(&[1.2, -0.8], 0.3);
        let cfg = SamplerConfig {
            steps: 40,
            step_size: 1e-3,
            beta: 2.0,
            momentum: 0.9,
            mode: SamplerMode::ParamSpace,
            init: InitStrategy::GmmMean,
            ..Default::default()
        };
        let mut rng_p = RngStream::from_seed(11);
        let traj_p = langevin_params(&energy, &dummy_c(), &tr, &cfg, &mut rng_p).unwrap();

        let latent_cfg = SamplerConfig {
            mode: SamplerMode::Latent,
            init: InitStrategy::GmmMean,
            ..cfg
        };
        let z0 = gmm_mean(&tr.forward(&dummy_c()).unwrap());
        let mut rng_l = RngStream::from_seed(11);
        let traj_l = langevin_latent(&energy, &dummy_c(), &z0, &latent_cfg, &mut rng_l).unwrap();

        assert_eq!(traj_p.energies, traj_l.energies);
        assert_eq!(traj_p.final_latent, traj_l.final_latent);
    }

    #[test]
    fn gmm_params_type_rejects_bad_weights() {
        let bad = GmmParams::new(
            vec![RealVector::from_slice(&[0.0])],
            RealVector::from_slice(&[0.5]),
            RealVector::from_slice(&[1.0]),
        );
        assert!(matches!(bad, Err(Error::NotSimplex { .. })));
    }

    #[test]
    fn truncation_on_non_finite_energy_keeps_diagnostic() {
        // log(z) goes non-finite for z <= 0.
        let energy = TapeEnergy::new(1, |t: &mut Tape, z, _c: &RealVector| {
            let l = t.log(z);
            t.sum(l)
        });
        let cfg = SamplerConfig {
            steps: 10,
            step_size: 0.25,
            beta: 2.0,
            momentum: 0.0,
            suppress_noise: true,
            ..Default::default()
        };
        let mut rng = RngStream::from_seed(12);
        // Gradient 1/z drives z negative within a few steps.
        let traj = langevin_latent(
            &energy,
            &dummy_c(),
            &RealVector::from_slice(&[0.4]),
            &cfg,
            &mut rng,
        )
        .unwrap();
        assert!(traj.truncated.is_some());
        assert!(traj.states.len() < 11);
    }

    #[test]
    fn validate_rejects_inconsistent_mode_and_init() {
        let bad = SamplerConfig {
            mode: SamplerMode::Latent,
            init: InitStrategy::NaiveKBest,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad2 = SamplerConfig {
            mode: SamplerMode::ParamSpace,
            init: InitStrategy::BestOfM,
            ..Default::default()
        };
        assert!(bad2.validate().is_err());
    }
}
