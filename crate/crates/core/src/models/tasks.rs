//! Built-in toy tasks and their model zoo.
//!
//! The `rings8` task is a mixture of 8 isotropic Gaussians (std 0.3) centered
//! on a circle of radius 4 in 2-D; the class label is the mixture component.
//! `fit_toy_models` trains a softmax classifier on it, derives an embedder
//! from the classifier torso, and supplies a generator fixture: either a
//! frozen seeded random MLP or a decoder trained with a reconstruction+KL
//! objective until validation reconstruction error plateaus.

use serde::{Deserialize, Serialize};

use crate::diffcore::mlp::{Activation, Layer, MlpParams};
use crate::diffcore::optim::{adam_step, OptimizerState};
use crate::diffcore::tape::Tape;
use crate::diffcore::{RealVector, RngStream};
use crate::error::{Error, Result};
use crate::models::{AuxModel, Generator, Prior};

pub const RING_RADIUS: f64 = 4.0;
pub const RING_STD: f64 = 0.3;
pub const RING_CLASSES: usize = 8;

/// Decoder observation-noise scale for the reconstruction term. Matching the
/// task's intrinsic spread keeps the decoder sharp instead of hedging toward
/// the global mean.
const DECODER_STD: f64 = RING_STD;

/// Latent dimension of the generator fixtures. One spare dimension beyond the
/// data's 2 lets the encoder separate all eight modes without pinching
/// adjacent rings together.
pub const TASK_LATENT_DIM: usize = 3;

/// Labeled task samples.
#[derive(Clone, Debug)]
pub struct TaskData {
    pub points: Vec<RealVector>,
    pub labels: Vec<usize>,
    pub n_classes: usize,
}

impl TaskData {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Balanced draw from the rings8 mixture; sample `i` belongs to class
/// `i % 8`.
pub fn rings8_data(n: usize, rng: &mut RngStream) -> TaskData {
    let mut points = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % RING_CLASSES;
        let angle = std::f64::consts::TAU * class as f64 / RING_CLASSES as f64;
        let x = RING_RADIUS * angle.cos() + RING_STD * rng.normal();
        let y = RING_RADIUS * angle.sin() + RING_STD * rng.normal();
        points.push(RealVector::from_slice(&[x, y]));
        labels.push(class);
    }
    TaskData {
        points,
        labels,
        n_classes: RING_CLASSES,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorFixture {
    /// Deterministic seeded random MLP; zero training time.
    FrozenRandom,
    /// Decoder trained with a reconstruction+KL objective on task data.
    TrainedDecoder,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskSpec {
    pub name: String,
    pub fixture: GeneratorFixture,
    /// Training-set size for the classifier and decoder.
    pub data_n: usize,
}

impl Default for TaskSpec {
    fn default() -> Self {
        TaskSpec {
            name: "rings8".into(),
            fixture: GeneratorFixture::TrainedDecoder,
            data_n: 4096,
        }
    }
}

/// The fitted model zoo for one task.
pub struct ToyModels {
    pub prior: Prior,
    pub generator: Generator,
    pub classifier: AuxModel,
    pub embedder: AuxModel,
}

/// Fits the task's classifier (accuracy gate 95% on its own training set,
/// average true-class probability gate 0.9 held out), derives the embedder
/// from the classifier's penultimate layer, and builds the generator fixture.
pub fn fit_toy_models(spec: &TaskSpec, rng: &RngStream) -> Result<ToyModels> {
    if spec.name != "rings8" {
        return Err(Error::InvalidConfig(format!("unknown task {}", spec.name)));
    }
    if spec.data_n < 64 {
        return Err(Error::InvalidConfig("data_n too small".into()));
    }
    let mut data_rng = rng.substream(0);
    let train = rings8_data(spec.data_n, &mut data_rng);
    let val = rings8_data(spec.data_n / 8, &mut data_rng);

    let classifier = train_classifier(&train, &val, &mut rng.substream(1))?;
    let torso = MlpParams::new(
        classifier.body().layers()[..classifier.body().layers().len() - 1].to_vec(),
    )?;
    let embedder = AuxModel::embedder(torso);

    let generator = match spec.fixture {
        GeneratorFixture::FrozenRandom => frozen_random_generator(&mut rng.substream(2))?,
        GeneratorFixture::TrainedDecoder => {
            train_decoder(&train, &val, &mut rng.substream(3))?
        }
    };

    Ok(ToyModels {
        prior: Prior::StandardNormal {
            dim: TASK_LATENT_DIM,
        },
        generator,
        classifier,
        embedder,
    })
}

/// A frozen seeded random MLP generator. The output layer is rescaled so the
/// pushforward of a standard normal reaches the task's data radius.
fn frozen_random_generator(rng: &mut RngStream) -> Result<Generator> {
    let body = MlpParams::seeded(
        &[TASK_LATENT_DIM, 32, 32, 2],
        &[Activation::Tanh, Activation::Tanh, Activation::Identity],
        rng,
    )?;
    let mut layers = body.layers().to_vec();
    let last = layers.last_mut().unwrap();
    for w in last.weight.as_mut_slice() {
        *w *= RING_RADIUS;
    }
    Generator::new(MlpParams::new(layers)?, None)
}

fn accuracy_and_true_prob(classifier: &MlpParams, data: &TaskData) -> Result<(f64, f64)> {
    let mut correct = 0usize;
    let mut prob_sum = 0.0;
    for (x, &label) in data.points.iter().zip(&data.labels) {
        let probs = classifier.forward(x)?;
        let pred = probs
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap();
        if pred == label {
            correct += 1;
        }
        prob_sum += probs[label];
    }
    Ok((
        correct as f64 / data.len() as f64,
        prob_sum / data.len() as f64,
    ))
}

fn train_classifier(train: &TaskData, val: &TaskData, rng: &mut RngStream) -> Result<AuxModel> {
    const ACCURACY_BAR: f64 = 0.95;
    const HELD_OUT_PROB_BAR: f64 = 0.9;
    let max_epochs = 120;
    let batch_size = 64;

    // Trained on logits; the softmax head is attached afterwards.
    let mut logits_net = MlpParams::seeded(
        &[2, 32, 32, train.n_classes],
        &[Activation::Relu, Activation::Relu, Activation::Identity],
        rng,
    )?;
    let mut flat = Vec::with_capacity(logits_net.param_count());
    logits_net.append_flat(&mut flat);
    let mut opt = OptimizerState::adam(1e-3, flat.len());

    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut final_train_acc = 0.0;
    for epoch in 0..max_epochs {
        let mut shuffle_rng = rng.substream(1000 + epoch as u64);
        shuffle_rng.shuffle(&mut order);
        for (batch_idx, batch) in order.chunks(batch_size).enumerate() {
            logits_net.read_flat(&flat);
            let mut tape = Tape::new();
            let vars = logits_net.build_vars(&mut tape);
            let mut terms = Vec::with_capacity(batch.len());
            for &i in batch {
                let x = tape.constant(train.points[i].as_slice());
                let logits = vars.forward(&mut tape, x);
                let logp = tape.log_softmax(logits);
                let hit = tape.slice(logp, train.labels[i], 1);
                terms.push(tape.neg(hit));
            }
            let loss = tape.mean_of(&terms);
            match tape.value_scalar(loss) {
                Ok(v) if v.is_finite() => v,
                _ => {
                    return Err(Error::TrainingDiverged {
                        epoch,
                        batch: batch_idx,
                        value: f64::NAN,
                    })
                }
            };
            let grads = tape.backward(loss)?;
            let mut grad_flat = Vec::with_capacity(flat.len());
            vars.collect_grads(&tape, &grads, &mut grad_flat);
            adam_step(&mut opt, &mut flat, &grad_flat)?;
        }
        logits_net.read_flat(&flat);
        let (train_acc, _) = accuracy_and_true_prob(&logits_net, train)?;
        let (_, val_prob) = accuracy_and_true_prob(&logits_net, val)?;
        final_train_acc = train_acc;
        if train_acc >= 0.99 && val_prob >= HELD_OUT_PROB_BAR + 0.02 {
            break;
        }
    }
    logits_net.read_flat(&flat);
    let (train_acc, _) = accuracy_and_true_prob(&logits_net, train)?;
    let (_, val_prob) = accuracy_and_true_prob(&logits_net, val)?;
    if train_acc < ACCURACY_BAR {
        return Err(Error::TrainingFailure {
            detail: format!(
                "classifier train accuracy {train_acc:.4} below bar {ACCURACY_BAR} \
                 (last epoch acc {final_train_acc:.4})"
            ),
        });
    }
    if val_prob < HELD_OUT_PROB_BAR {
        return Err(Error::TrainingFailure {
            detail: format!("held-out true-class probability {val_prob:.4} below 0.9"),
        });
    }

    // Attach the softmax head.
    let mut layers = logits_net.layers().to_vec();
    let last = layers.pop().unwrap();
    layers.push(Layer::new(last.weight, last.bias, Activation::Softmax)?);
    AuxModel::classifier(MlpParams::new(layers)?)
}

fn val_reconstruction_error(enc: &MlpParams, dec: &MlpParams, val: &TaskData) -> Result<f64> {
    let mut err = 0.0;
    let d_z = dec.input_dim();
    for x in &val.points {
        let enc_out = enc.forward(x)?;
        let mu = RealVector::from_slice(&enc_out.as_slice()[..d_z]);
        let xhat = dec.forward(&mu)?;
        err += x
            .iter()
            .zip(xhat.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();
    }
    Ok(err / (2.0 * DECODER_STD * DECODER_STD) / val.len() as f64)
}

/// Trains a 2-D-latent decoder with the standard reconstruction+KL objective
/// and returns it as the generator.
fn train_decoder(train: &TaskData, val: &TaskData, rng: &mut RngStream) -> Result<Generator> {
    let max_epochs = 400;
    let min_epochs = 150;
    let patience = 60;
    let batch_size = 128;

    let d_z = TASK_LATENT_DIM;
    let mut enc = MlpParams::seeded(
        &[2, 64, 2 * d_z],
        &[Activation::Relu, Activation::Identity],
        rng,
    )?;
    let mut dec = MlpParams::seeded(
        &[d_z, 64, 64, 2],
        &[Activation::Relu, Activation::Relu, Activation::Identity],
        rng,
    )?;
    let enc_len = enc.param_count();
    let mut flat = Vec::with_capacity(enc_len + dec.param_count());
    enc.append_flat(&mut flat);
    dec.append_flat(&mut flat);
    let mut opt = OptimizerState::adam(1e-3, flat.len());

    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0usize;

    for epoch in 0..max_epochs {
        let mut shuffle_rng = rng.substream(2000 + epoch as u64);
        shuffle_rng.shuffle(&mut order);
        let mut noise_rng = rng.substream(3000 + epoch as u64);

        for (batch_idx, batch) in order.chunks(batch_size).enumerate() {
            enc.read_flat(&flat[..enc_len]);
            dec.read_flat(&flat[enc_len..]);
            let mut tape = Tape::new();
            let enc_vars = enc.build_vars(&mut tape);
            let dec_vars = dec.build_vars(&mut tape);
            let mut terms = Vec::with_capacity(batch.len());
            for &i in batch {
                let x = tape.constant(train.points[i].as_slice());
                let enc_out = enc_vars.forward(&mut tape, x);
                let mu = tape.slice(enc_out, 0, d_z);
                let logvar = tape.slice(enc_out, d_z, d_z);
                let half_logvar = tape.scale(logvar, 0.5);
                let std = tape.exp(half_logvar);
                let eps = tape.constant(noise_rng.normal_vec(d_z).as_slice());
                let noise = tape.mul(std, eps);
                let z = tape.add(mu, noise);
                let xhat = dec_vars.forward(&mut tape, z);
                let diff = tape.sub(xhat, x);
                let sq = tape.dot(diff, diff);
                let recon = tape.scale(sq, 1.0 / (2.0 * DECODER_STD * DECODER_STD));
                // KL(q||N(0,I)) = 0.5 * sum(exp(logvar) + mu^2 - 1 - logvar)
                let ev = tape.exp(logvar);
                let musq = tape.mul(mu, mu);
                let evm = tape.add(ev, musq);
                let inner = tape.sub(evm, logvar);
                let ssum = tape.sum(inner);
                let half = tape.scale(ssum, 0.5);
                let kl = tape.add_scalar(half, -0.5 * d_z as f64);
                terms.push(tape.add(recon, kl));
            }
            let loss = tape.mean_of(&terms);
            match tape.value_scalar(loss) {
                Ok(v) if v.is_finite() => v,
                _ => {
                    return Err(Error::TrainingDiverged {
                        epoch,
                        batch: batch_idx,
                        value: f64::NAN,
                    })
                }
            };
            let grads = tape.backward(loss)?;
            let mut grad_flat = Vec::with_capacity(flat.len());
            enc_vars.collect_grads(&tape, &grads, &mut grad_flat);
            dec_vars.collect_grads(&tape, &grads, &mut grad_flat);
            adam_step(&mut opt, &mut flat, &grad_flat)?;
        }

        enc.read_flat(&flat[..enc_len]);
        dec.read_flat(&flat[enc_len..]);
        let val_err = val_reconstruction_error(&enc, &dec, val)?;
        if val_err < best_val * (1.0 - 1e-3) {
            best_val = val_err;
            best_epoch = epoch;
        }
        if epoch >= min_epochs && epoch - best_epoch >= patience {
            break;
        }
    }

    enc.read_flat(&flat[..enc_len]);
    dec.read_flat(&flat[enc_len..]);
    Generator::new(dec, None)
}
