//! Pushforward models (prior + generator), auxiliary models (classifier,
//! embedder), the synthetic (z, c) pair generator, and a toy model zoo with
//! checkpoint persistence.

pub mod checkpoint;
pub mod tasks;

use crate::diffcore::mlp::{Activation, MlpParams};
use crate::diffcore::tape::{Tape, Var};
use crate::diffcore::{RealVector, RngStream};
use crate::error::{Error, Result};

/// Latent prior: isotropic or per-axis-scaled centered Gaussian.
#[derive(Clone, Debug, PartialEq)]
pub enum Prior {
    StandardNormal { dim: usize },
    ScaledNormal { scale: RealVector },
}

impl Prior {
    pub fn scaled(scale: RealVector) -> Result<Self> {
        if scale.iter().any(|s| *s <= 0.0) {
            return Err(Error::InvalidConfig("prior scales must be positive".into()));
        }
        Ok(Prior::ScaledNormal { scale })
    }

    pub fn dim(&self) -> usize {
        match self {
            Prior::StandardNormal { dim } => *dim,
            Prior::ScaledNormal { scale } => scale.len(),
        }
    }

    pub fn scale_at(&self, i: usize) -> f64 {
        match self {
            Prior::StandardNormal { .. } => 1.0,
            Prior::ScaledNormal { scale } => scale[i],
        }
    }

    /// Closed-form log density, constants included.
    pub fn log_density(&self, z: &RealVector) -> Result<f64> {
        z.check_len("Prior::log_density", self.dim())?;
        let mut acc = 0.0;
        for i in 0..z.len() {
            let s = self.scale_at(i);
            acc += -0.5 * (z[i] / s).powi(2) - s.ln() - 0.5 * (std::f64::consts::TAU).ln();
        }
        Ok(acc)
    }

    pub fn sample(&self, rng: &mut RngStream) -> RealVector {
        let mut z = rng.normal_vec(self.dim());
        if let Prior::ScaledNormal { scale } = self {
            for (v, s) in z.as_mut_slice().iter_mut().zip(scale.iter()) {
                *v *= s;
            }
        }
        z
    }
}

/// `n` i.i.d. prior draws; deterministic given the stream state.
pub fn prior_sample(prior: &Prior, rng: &mut RngStream, n: usize) -> Vec<RealVector> {
    (0..n).map(|_| prior.sample(rng)).collect()
}

/// A deterministic pushforward map `x = G(z)`, optionally with a tanh box
/// constraint squashing effective latents into `[-a, a]` per axis.
#[derive(Clone, Debug, PartialEq)]
pub struct Generator {
    body: MlpParams,
    box_bound: Option<f64>,
}

impl Generator {
    pub fn new(body: MlpParams, box_bound: Option<f64>) -> Result<Self> {
        if let Some(a) = box_bound {
            if a <= 0.0 {
                return Err(Error::InvalidConfig(format!("box bound {a} must be > 0")));
            }
        }
        Ok(Generator { body, box_bound })
    }

    pub fn body(&self) -> &MlpParams {
        &self.body
    }

    pub fn box_bound(&self) -> Option<f64> {
        self.box_bound
    }

    pub fn latent_dim(&self) -> usize {
        self.body.input_dim()
    }

    pub fn data_dim(&self) -> usize {
        self.body.output_dim()
    }

    pub fn apply(&self, z: &RealVector) -> Result<RealVector> {
        z.check_len("generator_apply", self.latent_dim())?;
        match self.box_bound {
            None => self.body.forward(z),
            Some(a) => {
                let squashed =
                    RealVector::new(z.iter().map(|v| a * (v / a).tanh()).collect());
                self.body.forward(&squashed)
            }
        }
    }

    /// Records `G(z)` with parameters as constants.
    pub fn build(&self, tape: &mut Tape, z: Var) -> Var {
        let effective = match self.box_bound {
            None => z,
            Some(a) => {
                let scaled = tape.scale(z, 1.0 / a);
                let squashed = tape.tanh(scaled);
                tape.scale(squashed, a)
            }
        };
        self.body.build(tape, effective)
    }
}

/// Auxiliary model mapping data to its condition: a softmax classifier or an
/// L2-normalized embedder.
#[derive(Clone, Debug, PartialEq)]
pub enum AuxModel {
    Classifier { body: MlpParams },
    Embedder { body: MlpParams },
}

impl AuxModel {
    /// A classifier whose body must end in a softmax head.
    pub fn classifier(body: MlpParams) -> Result<Self> {
        match body.layers().last().map(|l| l.activation) {
            Some(Activation::Softmax) => Ok(AuxModel::Classifier { body }),
            other => Err(Error::InvalidConfig(format!(
                "classifier needs a softmax head, got {other:?}"
            ))),
        }
    }

    /// An embedder: the body's output is L2-normalized by `apply`.
    pub fn embedder(body: MlpParams) -> Self {
        AuxModel::Embedder { body }
    }

    pub fn body(&self) -> &MlpParams {
        match self {
            AuxModel::Classifier { body } | AuxModel::Embedder { body } => body,
        }
    }

    pub fn is_classifier(&self) -> bool {
        matches!(self, AuxModel::Classifier { .. })
    }

    pub fn input_dim(&self) -> usize {
        self.body().input_dim()
    }

    /// Dimension of the condition space (classes, or embedding axes).
    pub fn condition_dim(&self) -> usize {
        self.body().output_dim()
    }

    pub fn apply(&self, x: &RealVector) -> Result<RealVector> {
        x.check_len("aux_apply", self.input_dim())?;
        match self {
            AuxModel::Classifier { body } => body.forward(x),
            AuxModel::Embedder { body } => {
                let features = body.forward(x)?;
                let norm = features.norm();
                if norm == 0.0 {
                    return Err(Error::DegenerateInput {
                        op: "aux_apply",
                        detail: "embedder feature is exactly zero before normalization".into(),
                    });
                }
                let mut out = features;
                out.scale(1.0 / norm);
                Ok(out)
            }
        }
    }

    /// Records `f(x)` with parameters as constants.
    pub fn build(&self, tape: &mut Tape, x: Var) -> Var {
        match self {
            AuxModel::Classifier { body } => body.build(tape, x),
            AuxModel::Embedder { body } => {
                let features = body.build(tape, x);
                tape.l2_normalize(features)
            }
        }
    }
}

/// Provenance carried by a synthetic pair dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct PairMeta {
    pub n: usize,
    pub latent_dim: usize,
    pub condition_dim: usize,
    pub gamma: f64,
    pub seed: String,
    pub generator_checksum: String,
    pub aux_checksum: String,
}

/// `n` records of `(z, c)` with `c = f(G(z)) + gamma * eps`.
#[derive(Clone, Debug, PartialEq)]
pub struct PairDataset {
    pub latents: Vec<RealVector>,
    pub conditions: Vec<RealVector>,
    pub meta: PairMeta,
}

impl PairDataset {
    pub fn len(&self) -> usize {
        self.latents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.latents.is_empty()
    }
}

/// Builds the synthetic training set for the translator. Record `i` draws
/// from substream `i`, so any parallel fan-out that concatenates in substream
/// order reproduces the sequential result.
pub fn make_pairs(
    prior: &Prior,
    generator: &Generator,
    aux: &AuxModel,
    n: usize,
    gamma: f64,
    rng: &RngStream,
) -> Result<PairDataset> {
    if gamma < 0.0 {
        return Err(Error::InvalidConfig(format!("gamma {gamma} must be >= 0")));
    }
    if prior.dim() != generator.latent_dim() {
        return Err(Error::ShapeMismatch {
            op: "make_pairs",
            expected: format!("prior dim {}", generator.latent_dim()),
            got: format!("prior dim {}", prior.dim()),
        });
    }
    if generator.data_dim() != aux.input_dim() {
        return Err(Error::ShapeMismatch {
            op: "make_pairs",
            expected: format!("aux input {}", generator.data_dim()),
            got: format!("aux input {}", aux.input_dim()),
        });
    }
    let mut latents = Vec::with_capacity(n);
    let mut conditions = Vec::with_capacity(n);
    for i in 0..n {
        let mut sub = rng.substream(i as u64);
        let z = prior.sample(&mut sub);
        let x = generator.apply(&z)?;
        let mut c = aux.apply(&x)?;
        if gamma > 0.0 {
            let eps = sub.normal_vec(c.len());
            c.add_scaled(gamma, &eps);
        }
        latents.push(z);
        conditions.push(c);
    }
    let (k0, k1, ctr) = rng.provenance();
    Ok(PairDataset {
        latents,
        conditions,
        meta: PairMeta {
            n,
            latent_dim: prior.dim(),
            condition_dim: aux.condition_dim(),
            gamma,
            seed: format!("{k0:016x}:{k1:016x}:{ctr}"),
            generator_checksum: checkpoint::generator_checksum(generator),
            aux_checksum: checkpoint::aux_checksum(aux),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffcore::mlp::Layer;
    use crate::diffcore::RealMatrix;

    fn identity_generator(dim: usize, box_bound: Option<f64>) -> Generator {
        let body = MlpParams::new(vec![Layer::new(
            RealMatrix::identity(dim),
            RealVector::zeros(dim),
            Activation::Identity,
        )
        .unwrap()])
        .unwrap();
        Generator::new(body, box_bound).unwrap()
    }

    fn random_classifier(input: usize, classes: usize, seed: u64) -> AuxModel {
        let mut rng = RngStream::from_seed(seed);
        let body = MlpParams::seeded(
            &[input, 16, classes],
            &[Activation::Relu, Activation::Softmax],
            &mut rng,
        )
        .unwrap();
        AuxModel::classifier(body).unwrap()
    }

    #[test]
    fn standard_prior_mean_is_near_zero() {
        let prior = Prior::StandardNormal { dim: 2 };
        let mut rng = RngStream::from_seed(0);
        let draws = prior_sample(&prior, &mut rng, 100_000);
        for axis in 0..2 {
            let mean: f64 = draws.iter().map(|z| z[axis]).sum::<f64>() / draws.len() as f64;
            assert!(mean.abs() < 0.02, "axis {axis} mean {mean}");
        }
    }

    #[test]
    fn scaled_prior_std_matches_requested_scale() {
        let prior = Prior::scaled(RealVector::from_slice(&[0.7, 0.7])).unwrap();
        let mut rng = RngStream::from_seed(1);
        let draws = prior_sample(&prior, &mut rng, 100_000);
        for axis in 0..2 {
            let var: f64 =
                draws.iter().map(|z| z[axis] * z[axis]).sum::<f64>() / draws.len() as f64;
            let std = var.sqrt();
            assert!((std - 0.7).abs() < 0.014, "axis {axis} std {std}");
        }
    }

    #[test]
    fn cloned_streams_draw_identical_priors() {
        let prior = Prior::StandardNormal { dim: 3 };
        let mut a = RngStream::from_seed(5);
        let mut b = a.clone();
        assert_eq!(
            prior_sample(&prior, &mut a, 10),
            prior_sample(&prior, &mut b, 10)
        );
    }

    #[test]
    fn prior_log_density_matches_direct_formula() {
        let prior = Prior::scaled(RealVector::from_slice(&[0.5, 2.0])).unwrap();
        let z = RealVector::from_slice(&[0.3, -1.0]);
        let expect = -0.5 * (0.3f64 / 0.5).powi(2) - 0.5 * (1.0f64 / 2.0).powi(2)
            - (0.5f64).ln()
            - (2.0f64).ln()
            - (std::f64::consts::TAU).ln();
        assert!((prior.log_density(&z).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn identity_generator_returns_latent() {
        let g = identity_generator(2, None);
        let z = RealVector::from_slice(&[0.4, -1.5]);
        assert_eq!(g.apply(&z).unwrap(), z);
    }

    #[test]
    fn box_constraint_saturates_large_latents() {
        let g = identity_generator(2, Some(2.0));
        let out = g.apply(&RealVector::from_slice(&[1e9, -1e9])).unwrap();
        assert!((out[0] - 2.0).abs() < 1e-9);
        assert!((out[1] + 2.0).abs() < 1e-9);
    }

    #[test]
    fn seeded_generator_matches_straight_line_recomputation() {
        let mut rng = RngStream::from_seed(77);
        let body = MlpParams::seeded(
            &[2, 3, 2],
            &[Activation::Tanh, Activation::Identity],
            &mut rng,
        )
        .unwrap();
        let g = Generator::new(body.clone(), None).unwrap();
        let z = [0.25, -0.75];
        let out = g.apply(&RealVector::from_slice(&z)).unwrap();

        let l0 = &body.layers()[0];
        let mut h = vec![0.0; 3];
        for r in 0..3 {
            let mut acc = 0.0;
            for c in 0..2 {
                acc += l0.weight.get(r, c) * z[c];
            }
            h[r] = (acc + l0.bias[r]).tanh();
        }
        let l1 = &body.layers()[1];
        for r in 0..2 {
            let mut acc = 0.0;
            for c in 0..3 {
                acc += l1.weight.get(r, c) * h[c];
            }
            assert_eq!(out[r], acc + l1.bias[r]);
        }
    }

    #[test]
    fn classifier_with_zero_logits_is_uniform() {
        let n_cls = 5;
        let body = MlpParams::new(vec![Layer::new(
            RealMatrix::zeros(n_cls, 3),
            RealVector::zeros(n_cls),
            Activation::Softmax,
        )
        .unwrap()])
        .unwrap();
        let f = AuxModel::classifier(body).unwrap();
        let out = f.apply(&RealVector::from_slice(&[1.0, 2.0, 3.0])).unwrap();
        for v in out.iter() {
            assert!((v - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn classifier_outputs_stay_on_simplex() {
        let f = random_classifier(3, 7, 2);
        let mut rng = RngStream::from_seed(3);
        for _ in 0..1000 {
            let x = rng.normal_vec(3);
            let c = f.apply(&x).unwrap();
            let sum: f64 = c.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
            assert!(c.iter().all(|v| *v >= 0.0));
        }
    }

    #[test]
    fn embedder_output_is_unit_norm() {
        let mut rng = RngStream::from_seed(4);
        let body = MlpParams::seeded(
            &[3, 8, 4],
            &[Activation::Relu, Activation::Identity],
            &mut rng,
        )
        .unwrap();
        let f = AuxModel::embedder(body);
        let mut draws = RngStream::from_seed(6);
        for _ in 0..100 {
            let x = draws.normal_vec(3);
            let c = f.apply(&x).unwrap();
            assert!((c.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn embedder_rejects_exactly_zero_features() {
        // Zero weights and biases produce an exactly-zero feature vector.
        let body = MlpParams::new(vec![Layer::new(
            RealMatrix::zeros(4, 3),
            RealVector::zeros(4),
            Activation::Identity,
        )
        .unwrap()])
        .unwrap();
        let f = AuxModel::embedder(body);
        assert!(matches!(
            f.apply(&RealVector::from_slice(&[1.0, 1.0, 1.0])),
            Err(Error::DegenerateInput { .. })
        ));
    }

    #[test]
    fn pairs_with_zero_gamma_are_exact() {
        let prior = Prior::StandardNormal { dim: 2 };
        let g = identity_generator(2, None);
        let f = random_classifier(2, 4, 9);
        let rng = RngStream::from_seed(10);
        let pairs = make_pairs(&prior, &g, &f, 200, 0.0, &rng).unwrap();
        for (z, c) in pairs.latents.iter().zip(&pairs.conditions) {
            let expect = f.apply(&g.apply(z).unwrap()).unwrap();
            assert_eq!(c, &expect);
        }
    }

    #[test]
    fn pair_noise_has_half_normal_mean_deviation() {
        let prior = Prior::StandardNormal { dim: 2 };
        let g = identity_generator(2, None);
        let mut rng = RngStream::from_seed(11);
        let body = MlpParams::seeded(
            &[2, 16, 8],
            &[Activation::Relu, Activation::Identity],
            &mut rng,
        )
        .unwrap();
        let f = AuxModel::embedder(body);
        let gamma = 0.2;
        let pairs = make_pairs(&prior, &g, &f, 10_000, gamma, &RngStream::from_seed(12)).unwrap();
        let mut total_dev = 0.0;
        let mut count = 0usize;
        for (z, c) in pairs.latents.iter().zip(&pairs.conditions) {
            let clean = f.apply(&g.apply(z).unwrap()).unwrap();
            for (a, b) in c.iter().zip(clean.iter()) {
                total_dev += (a - b).abs();
                count += 1;
            }
        }
        let mean_dev = total_dev / count as f64;
        let expect = gamma * (2.0 / std::f64::consts::PI).sqrt();
        assert!(
            (mean_dev - expect).abs() < 0.03 * expect,
            "mean dev {mean_dev}, expected {expect}"
        );
    }

    #[test]
    fn empty_pair_dataset_has_valid_metadata() {
        let prior = Prior::StandardNormal { dim: 2 };
        let g = identity_generator(2, None);
        let f = random_classifier(2, 4, 13);
        let pairs = make_pairs(&prior, &g, &f, 0, 0.0, &RngStream::from_seed(1)).unwrap();
        assert!(pairs.is_empty());
        assert_eq!(pairs.meta.latent_dim, 2);
        assert_eq!(pairs.meta.condition_dim, 4);
        assert!(!pairs.meta.generator_checksum.is_empty());
    }

    #[test]
    fn pair_gamma_std_matches_request() {
        // Stored conditions deviate from f(G(z)) with per-axis std gamma.
        let prior = Prior::StandardNormal { dim: 2 };
        let g = identity_generator(2, None);
        let mut rng = RngStream::from_seed(14);
        let body = MlpParams::seeded(
            &[2, 8, 4],
            &[Activation::Relu, Activation::Identity],
            &mut rng,
        )
        .unwrap();
        let f = AuxModel::embedder(body);
        let gamma = 0.3;
        let pairs = make_pairs(&prior, &g, &f, 20_000, gamma, &RngStream::from_seed(15)).unwrap();
        let mut sq = 0.0;
        let mut count = 0usize;
        for (z, c) in pairs.latents.iter().zip(&pairs.conditions) {
            let clean = f.apply(&g.apply(z).unwrap()).unwrap();
            for (a, b) in c.iter().zip(clean.iter()) {
                sq += (a - b) * (a - b);
                count += 1;
            }
        }
        let std = (sq / count as f64).sqrt();
        assert!((std - gamma).abs() < 0.05 * gamma, "std {std}");
    }
}
