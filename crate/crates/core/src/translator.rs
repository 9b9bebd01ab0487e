//! The stochastic translator q(z|c): a condition-to-GMM network trained by
//! maximum likelihood on synthetic (z, c) pairs, plus the deterministic
//! regression ablation and condition-space utilities.

use crate::diffcore::optim::{adam_step, OptimizerState};
use crate::diffcore::tape::{stable_softmax, Gradients, Tape, Var};
use crate::diffcore::{RealMatrix, RealVector, RngStream};
use crate::error::{Error, Result};
use crate::models::PairDataset;

const SIGMA_FLOOR: f64 = 1e-6;
const SIGMA_INIT: f64 = 0.01;
const LN_TAU: f64 = 1.837877066409345; // ln(2*pi)

/// Per-condition mixture output of the translator: K means, K weights, and a
/// shared diagonal sigma.
#[derive(Clone, Debug, PartialEq)]
pub struct GmmParams {
    pub means: Vec<RealVector>,
    pub weights: RealVector,
    pub sigma: RealVector,
}

impl GmmParams {
    pub fn new(means: Vec<RealVector>, weights: RealVector, sigma: RealVector) -> Result<Self> {
        if means.is_empty() {
            return Err(Error::EmptyInput { op: "GmmParams" });
        }
        if weights.len() != means.len() {
            return Err(Error::ShapeMismatch {
                op: "GmmParams",
                expected: format!("{} weights", means.len()),
                got: format!("{}", weights.len()),
            });
        }
        let d = means[0].len();
        if means.iter().any(|m| m.len() != d) || sigma.len() != d {
            return Err(Error::ShapeMismatch {
                op: "GmmParams",
                expected: format!("mean/sigma dim {d}"),
                got: "inconsistent dimensions".into(),
            });
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || weights.iter().any(|w| *w < 0.0) {
            return Err(Error::NotSimplex {
                op: "GmmParams",
                sum,
            });
        }
        if sigma.iter().any(|s| *s <= 0.0) {
            return Err(Error::DegenerateInput {
                op: "GmmParams",
                detail: "sigma must be strictly positive".into(),
            });
        }
        Ok(GmmParams {
            means,
            weights,
            sigma,
        })
    }

    pub fn components(&self) -> usize {
        self.means.len()
    }

    pub fn latent_dim(&self) -> usize {
        self.means[0].len()
    }
}

/// Log density of a diagonal GMM, via log-sum-exp over components.
pub fn gmm_log_density(g: &GmmParams, z: &RealVector) -> Result<f64> {
    z.check_len("gmm_log_density", g.latent_dim())?;
    let d = g.latent_dim() as f64;
    let sum_log_sigma: f64 = g.sigma.iter().map(|s| s.ln()).sum();
    let mut terms = Vec::with_capacity(g.components());
    for (mu, w) in g.means.iter().zip(g.weights.iter()) {
        let mut sq = 0.0;
        for j in 0..z.len() {
            let s = (z[j] - mu[j]) / g.sigma[j];
            sq += s * s;
        }
        terms.push(w.ln() - 0.5 * sq - sum_log_sigma - 0.5 * d * LN_TAU);
    }
    let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln())
}

/// Ancestral sampling: draw a component from the weights, then add scaled
/// Gaussian noise around its mean.
pub fn gmm_sample(g: &GmmParams, rng: &mut RngStream) -> RealVector {
    let u = rng.uniform();
    let mut k = g.components() - 1;
    let mut acc = 0.0;
    for (i, w) in g.weights.iter().enumerate() {
        acc += w;
        if u < acc {
            k = i;
            break;
        }
    }
    let eps = rng.normal_vec(g.latent_dim());
    let mut z = g.means[k].clone();
    for j in 0..z.len() {
        z[j] += g.sigma[j] * eps[j];
    }
    z
}

/// The mixture mean `sum_k w_k mu_k`.
pub fn gmm_mean(g: &GmmParams) -> RealVector {
    let mut mean = RealVector::zeros(g.latent_dim());
    for (mu, w) in g.means.iter().zip(g.weights.iter()) {
        mean.add_scaled(*w, mu);
    }
    mean
}

/// Translator parameters: a two-hidden-layer ReLU trunk with a residual
/// connection, a mean head (K * d_z), a weight-logit head (K), an optional
/// regression head (d_z) for the deterministic ablation, and the free vector
/// nu with `sigma = exp(nu) + 1e-6`.
#[derive(Clone, Debug, PartialEq)]
pub struct TranslatorParams {
    w1: RealMatrix,
    b1: RealVector,
    w2: RealMatrix,
    b2: RealVector,
    mean_w: RealMatrix,
    mean_b: RealVector,
    logit_w: RealMatrix,
    logit_b: RealVector,
    regression: Option<(RealMatrix, RealVector)>,
    nu: RealVector,
    components: usize,
    latent_dim: usize,
}

impl TranslatorParams {
    /// Randomly initialized parameters; sigma starts at exactly
    /// `exp(nu0) + 1e-6 = 0.01`.
    pub fn seeded(
        condition_dim: usize,
        hidden: usize,
        components: usize,
        latent_dim: usize,
        with_regression_head: bool,
        rng: &mut RngStream,
    ) -> Result<Self> {
        if condition_dim == 0 || hidden == 0 || components == 0 || latent_dim == 0 {
            return Err(Error::InvalidConfig("translator dims must be positive".into()));
        }
        let linear = |rows: usize, cols: usize, rng: &mut RngStream| {
            let bound = 1.0 / (cols as f64).sqrt();
            let w = RealMatrix::new(
                rows,
                cols,
                (0..rows * cols).map(|_| rng.uniform_in(-bound, bound)).collect(),
            )
            .unwrap();
            let b = RealVector::new((0..rows).map(|_| rng.uniform_in(-bound, bound)).collect());
            (w, b)
        };
        let (w1, b1) = linear(hidden, condition_dim, rng);
        let (w2, b2) = linear(hidden, hidden, rng);
        let (mean_w, mean_b) = linear(components * latent_dim, hidden, rng);
        let (logit_w, logit_b) = linear(components, hidden, rng);
        let regression = with_regression_head.then(|| linear(latent_dim, hidden, rng));
        let nu0 = (SIGMA_INIT - SIGMA_FLOOR).ln();
        Ok(TranslatorParams {
            w1,
            b1,
            w2,
            b2,
            mean_w,
            mean_b,
            logit_w,
            logit_b,
            regression,
            nu: RealVector::new(vec![nu0; latent_dim]),
            components,
            latent_dim,
        })
    }

    /// All-zero parameters (sigma still at its floor-shifted init); used by
    /// checkpoint loading and tests that hand-craft heads.
    pub fn zeroed(
        condition_dim: usize,
        hidden: usize,
        components: usize,
        latent_dim: usize,
        with_regression_head: bool,
    ) -> Result<Self> {
        if condition_dim == 0 || hidden == 0 || components == 0 || latent_dim == 0 {
            return Err(Error::InvalidConfig("translator dims must be positive".into()));
        }
        Ok(TranslatorParams {
            w1: RealMatrix::zeros(hidden, condition_dim),
            b1: RealVector::zeros(hidden),
            w2: RealMatrix::zeros(hidden, hidden),
            b2: RealVector::zeros(hidden),
            mean_w: RealMatrix::zeros(components * latent_dim, hidden),
            mean_b: RealVector::zeros(components * latent_dim),
            logit_w: RealMatrix::zeros(components, hidden),
            logit_b: RealVector::zeros(components),
            regression: with_regression_head
                .then(|| (RealMatrix::zeros(latent_dim, hidden), RealVector::zeros(latent_dim))),
            nu: RealVector::new(vec![(SIGMA_INIT - SIGMA_FLOOR).ln(); latent_dim]),
            components,
            latent_dim,
        })
    }

    pub fn condition_dim(&self) -> usize {
        self.w1.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.rows()
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn has_regression_head(&self) -> bool {
        self.regression.is_some()
    }

    pub fn mean_bias_mut(&mut self) -> &mut RealVector {
        &mut self.mean_b
    }

    pub fn logit_bias_mut(&mut self) -> &mut RealVector {
        &mut self.logit_b
    }

    pub fn sigma(&self) -> RealVector {
        RealVector::new(self.nu.iter().map(|n| n.exp() + SIGMA_FLOOR).collect())
    }

    /// Weight logits at `c`, before the softmax.
    pub fn weight_logits(&self, c: &RealVector) -> Result<RealVector> {
        let h2 = self.trunk(c)?;
        let mut logits = self.logit_w.matvec(h2.as_slice());
        for (l, b) in logits.iter_mut().zip(self.logit_b.iter()) {
            *l += b;
        }
        Ok(RealVector::new(logits))
    }

    fn trunk(&self, c: &RealVector) -> Result<RealVector> {
        c.check_len("translator_forward", self.condition_dim())?;
        let mut h1 = self.w1.matvec(c.as_slice());
        for (v, b) in h1.iter_mut().zip(self.b1.iter()) {
            *v = (*v + b).max(0.0);
        }
        let mut h2 = self.w2.matvec(&h1);
        for ((v, b), r) in h2.iter_mut().zip(self.b2.iter()).zip(&h1) {
            *v = (*v + b).max(0.0) + r;
        }
        Ok(RealVector::new(h2))
    }

    /// Maps a condition to its mixture parameters.
    pub fn forward(&self, c: &RealVector) -> Result<GmmParams> {
        let h2 = self.trunk(c)?;
        let mut means_flat = self.mean_w.matvec(h2.as_slice());
        for (v, b) in means_flat.iter_mut().zip(self.mean_b.iter()) {
            *v += b;
        }
        let mut logits = self.logit_w.matvec(h2.as_slice());
        for (v, b) in logits.iter_mut().zip(self.logit_b.iter()) {
            *v += b;
        }
        let means = means_flat
            .chunks_exact(self.latent_dim)
            .map(RealVector::from_slice)
            .collect();
        GmmParams::new(
            means,
            RealVector::new(stable_softmax(&logits)),
            self.sigma(),
        )
    }

    /// Deterministic regression output; requires the regression head.
    pub fn regress(&self, c: &RealVector) -> Result<RealVector> {
        let (w, b) = self.regression.as_ref().ok_or(Error::InvalidConfig(
            "translator has no regression head".into(),
        ))?;
        let h2 = self.trunk(c)?;
        let mut out = w.matvec(h2.as_slice());
        for (v, bias) in out.iter_mut().zip(b.iter()) {
            *v += bias;
        }
        Ok(RealVector::new(out))
    }

    pub fn param_count(&self) -> usize {
        let mut n = self.w1.rows() * self.w1.cols()
            + self.b1.len()
            + self.w2.rows() * self.w2.cols()
            + self.b2.len()
            + self.mean_w.rows() * self.mean_w.cols()
            + self.mean_b.len()
            + self.logit_w.rows() * self.logit_w.cols()
            + self.logit_b.len()
            + self.nu.len();
        if let Some((w, b)) = &self.regression {
            n += w.rows() * w.cols() + b.len();
        }
        n
    }

    /// Canonical flat order: trunk (W1 b1 W2 b2), mean head, logit head,
    /// regression head if present, then nu.
    pub fn append_flat(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(self.w1.as_slice());
        out.extend_from_slice(self.b1.as_slice());
        out.extend_from_slice(self.w2.as_slice());
        out.extend_from_slice(self.b2.as_slice());
        out.extend_from_slice(self.mean_w.as_slice());
        out.extend_from_slice(self.mean_b.as_slice());
        out.extend_from_slice(self.logit_w.as_slice());
        out.extend_from_slice(self.logit_b.as_slice());
        if let Some((w, b)) = &self.regression {
            out.extend_from_slice(w.as_slice());
            out.extend_from_slice(b.as_slice());
        }
        out.extend_from_slice(self.nu.as_slice());
    }

    pub fn read_flat(&mut self, flat: &[f64]) {
        let mut at = 0usize;
        let copy_mat = |m: &mut RealMatrix, at: &mut usize| {
            let len = m.rows() * m.cols();
            m.as_mut_slice().copy_from_slice(&flat[*at..*at + len]);
            *at += len;
        };
        let copy_vec = |v: &mut RealVector, at: &mut usize| {
            let len = v.len();
            v.as_mut_slice().copy_from_slice(&flat[*at..*at + len]);
            *at += len;
        };
        copy_mat(&mut self.w1, &mut at);
        copy_vec(&mut self.b1, &mut at);
        copy_mat(&mut self.w2, &mut at);
        copy_vec(&mut self.b2, &mut at);
        copy_mat(&mut self.mean_w, &mut at);
        copy_vec(&mut self.mean_b, &mut at);
        copy_mat(&mut self.logit_w, &mut at);
        copy_vec(&mut self.logit_b, &mut at);
        if let Some((w, b)) = &mut self.regression {
            copy_mat(w, &mut at);
            copy_vec(b, &mut at);
        }
        copy_vec(&mut self.nu, &mut at);
        debug_assert_eq!(at, flat.len());
    }

    fn build_vars(&self, tape: &mut Tape) -> TranslatorVars {
        TranslatorVars {
            w1: tape.leaf_matrix(&self.w1, true),
            b1: tape.leaf(&self.b1),
            w2: tape.leaf_matrix(&self.w2, true),
            b2: tape.leaf(&self.b2),
            mean_w: tape.leaf_matrix(&self.mean_w, true),
            mean_b: tape.leaf(&self.mean_b),
            logit_w: tape.leaf_matrix(&self.logit_w, true),
            logit_b: tape.leaf(&self.logit_b),
            regression: self
                .regression
                .as_ref()
                .map(|(w, b)| (tape.leaf_matrix(w, true), tape.leaf(b))),
            nu: tape.leaf(&self.nu),
            components: self.components,
            latent_dim: self.latent_dim,
        }
    }
}

struct TranslatorVars {
    w1: Var,
    b1: Var,
    w2: Var,
    b2: Var,
    mean_w: Var,
    mean_b: Var,
    logit_w: Var,
    logit_b: Var,
    regression: Option<(Var, Var)>,
    nu: Var,
    components: usize,
    latent_dim: usize,
}

impl TranslatorVars {
    fn trunk(&self, tape: &mut Tape, c: Var) -> Var {
        let a1 = tape.matvec(self.w1, c);
        let p1 = tape.add(a1, self.b1);
        let h1 = tape.relu(p1);
        let a2 = tape.matvec(self.w2, h1);
        let p2 = tape.add(a2, self.b2);
        let r2 = tape.relu(p2);
        tape.add(r2, h1)
    }

    /// `-log q(z|c)` for one pair, with z and c as constants.
    fn nll_term(&self, tape: &mut Tape, z: Var, c: Var) -> Var {
        let h2 = self.trunk(tape, c);
        let means_affine = tape.matvec(self.mean_w, h2);
        let means_flat = tape.add(means_affine, self.mean_b);
        let logits_affine = tape.matvec(self.logit_w, h2);
        let logits = tape.add(logits_affine, self.logit_b);
        let logw = tape.log_softmax(logits);

        let exp_nu = tape.exp(self.nu);
        let sigma = tape.add_scalar(exp_nu, SIGMA_FLOOR);
        let log_sigma = tape.log(sigma);
        let sum_log_sigma = tape.sum(log_sigma);

        let d = self.latent_dim as f64;
        let mut terms = Vec::with_capacity(self.components);
        for k in 0..self.components {
            let mu = tape.slice(means_flat, k * self.latent_dim, self.latent_dim);
            let diff = tape.sub(z, mu);
            let scaled = tape.div(diff, sigma);
            let sq = tape.dot(scaled, scaled);
            let half_sq = tape.scale(sq, -0.5);
            let minus_logsig = tape.sub(half_sq, sum_log_sigma);
            let gaussian = tape.add_scalar(minus_logsig, -0.5 * d * LN_TAU);
            let lw = tape.slice(logw, k, 1);
            terms.push(tape.add(lw, gaussian));
        }
        let logq = tape.log_sum_exp(&terms);
        tape.neg(logq)
    }

    /// `|S(c) - z|^2` for one pair.
    fn regression_term(&self, tape: &mut Tape, z: Var, c: Var) -> Var {
        let (w, b) = self.regression.expect("regression head present");
        let h2 = self.trunk(tape, c);
        let affine = tape.matvec(w, h2);
        let pred = tape.add(affine, b);
        let diff = tape.sub(pred, z);
        tape.dot(diff, diff)
    }

    /// Gradients in `append_flat` order.
    fn collect_grads(&self, tape: &Tape, grads: &Gradients, out: &mut Vec<f64>) {
        let push = |v: Var, out: &mut Vec<f64>| match grads.get(v) {
            Some(g) => out.extend_from_slice(g),
            None => out.extend(std::iter::repeat(0.0).take(tape.shape(v).len())),
        };
        push(self.w1, out);
        push(self.b1, out);
        push(self.w2, out);
        push(self.b2, out);
        push(self.mean_w, out);
        push(self.mean_b, out);
        push(self.logit_w, out);
        push(self.logit_b, out);
        if let Some((w, b)) = self.regression {
            push(w, out);
            push(b, out);
        }
        push(self.nu, out);
    }
}

/// Hyperparameters of translator training.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TranslatorTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Peak ADAM learning rate; cosine-decayed to exactly 0.
    pub learning_rate: f64,
    /// Scalar applied to the loss itself, not the learning rate.
    pub loss_scale: f64,
    pub hidden: usize,
    pub components: usize,
}

impl Default for TranslatorTrainConfig {
    fn default() -> Self {
        TranslatorTrainConfig {
            epochs: 10,
            batch_size: 16,
            learning_rate: 1e-4,
            loss_scale: 1e-4,
            hidden: 100,
            components: 10,
        }
    }
}

impl TranslatorTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0
            || self.batch_size == 0
            || self.learning_rate <= 0.0
            || self.loss_scale <= 0.0
            || self.hidden == 0
            || self.components == 0
        {
            return Err(Error::InvalidConfig(
                "translator train config fields must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// A trained translator together with its per-epoch mean NLL curve.
#[derive(Clone, Debug)]
pub struct TrainedTranslator {
    pub params: TranslatorParams,
    pub epoch_nll: Vec<f64>,
}

/// Mean scaled negative log likelihood of a batch.
pub fn translator_nll(
    params: &TranslatorParams,
    latents: &[RealVector],
    conditions: &[RealVector],
    loss_scale: f64,
) -> Result<f64> {
    if latents.is_empty() || latents.len() != conditions.len() {
        return Err(Error::EmptyInput {
            op: "translator_nll",
        });
    }
    let mut acc = 0.0;
    for (z, c) in latents.iter().zip(conditions) {
        let g = params.forward(c)?;
        acc -= gmm_log_density(&g, z)?;
    }
    Ok(loss_scale * acc / latents.len() as f64)
}

/// Cosine decay from `lr0` at step 0 to exactly 0 at the final step.
fn cosine_lr(lr0: f64, step: usize, total: usize) -> f64 {
    if total <= 1 {
        return lr0;
    }
    let t = step as f64 / (total - 1) as f64;
    lr0 * 0.5 * (1.0 + (std::f64::consts::PI * t).cos())
}

#[derive(Clone, Copy)]
enum TrainObjective {
    Gmm,
    Regression,
}

fn train_inner(
    cfg: &TranslatorTrainConfig,
    pairs: &PairDataset,
    rng: &mut RngStream,
    objective: TrainObjective,
) -> Result<TrainedTranslator> {
    cfg.validate()?;
    if pairs.is_empty() {
        return Err(Error::EmptyInput {
            op: "train_translator",
        });
    }
    let d_c = pairs.meta.condition_dim;
    let d_z = pairs.meta.latent_dim;
    let with_reg = matches!(objective, TrainObjective::Regression);
    let mut init_rng = rng.substream(0);
    let mut params = TranslatorParams::seeded(
        d_c,
        cfg.hidden,
        cfg.components,
        d_z,
        with_reg,
        &mut init_rng,
    )?;

    let n = pairs.len();
    let batches_per_epoch = n.div_ceil(cfg.batch_size);
    let total_steps = cfg.epochs * batches_per_epoch;
    let mut flat = Vec::with_capacity(params.param_count());
    params.append_flat(&mut flat);
    let mut opt = OptimizerState::adam(cfg.learning_rate, flat.len());

    let mut order: Vec<usize> = (0..n).collect();
    let mut epoch_nll = Vec::with_capacity(cfg.epochs);
    let mut step = 0usize;

    for epoch in 0..cfg.epochs {
        let mut shuffle_rng = rng.substream(1 + epoch as u64);
        shuffle_rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;

        for (batch_idx, batch) in order.chunks(cfg.batch_size).enumerate() {
            params.read_flat(&flat);
            let mut tape = Tape::new();
            let vars = params.build_vars(&mut tape);
            let mut terms = Vec::with_capacity(batch.len());
            for &i in batch {
                let z = tape.constant(pairs.latents[i].as_slice());
                let c = tape.constant(pairs.conditions[i].as_slice());
                let term = match objective {
                    TrainObjective::Gmm => vars.nll_term(&mut tape, z, c),
                    TrainObjective::Regression => vars.regression_term(&mut tape, z, c),
                };
                terms.push(term);
            }
            let mean = tape.mean_of(&terms);
            let loss = tape.scale(mean, cfg.loss_scale);
            let loss_value = match tape.value_scalar(loss) {
                Ok(v) if v.is_finite() => v,
                _ => {
                    return Err(Error::TrainingDiverged {
                        epoch,
                        batch: batch_idx,
                        value: f64::NAN,
                    })
                }
            };
            epoch_loss += loss_value * batch.len() as f64;

            let grads = tape.backward(loss)?;
            let mut grad_flat = Vec::with_capacity(flat.len());
            vars.collect_grads(&tape, &grads, &mut grad_flat);

            opt.set_lr(cosine_lr(cfg.learning_rate, step, total_steps));
            adam_step(&mut opt, &mut flat, &grad_flat)?;
            step += 1;
        }
        epoch_nll.push(epoch_loss / n as f64);
    }
    params.read_flat(&flat);
    Ok(TrainedTranslator { params, epoch_nll })
}

/// Maximum-likelihood training of the GMM translator (shuffled minibatches,
/// ADAM with cosine-decayed learning rate).
pub fn train_translator(
    cfg: &TranslatorTrainConfig,
    pairs: &PairDataset,
    rng: &mut RngStream,
) -> Result<TrainedTranslator> {
    train_inner(cfg, pairs, rng, TrainObjective::Gmm)
}

/// L2-regression training of the deterministic translator ablation.
pub fn train_deterministic_translator(
    cfg: &TranslatorTrainConfig,
    pairs: &PairDataset,
    rng: &mut RngStream,
) -> Result<TrainedTranslator> {
    train_inner(cfg, pairs, rng, TrainObjective::Regression)
}

/// Spherical interpolation between the normalized inputs.
pub fn slerp(c1: &RealVector, c2: &RealVector, t: f64) -> Result<RealVector> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidConfig(format!("slerp t {t} outside [0, 1]")));
    }
    let (n1, n2) = (c1.norm(), c2.norm());
    if n1 == 0.0 || n2 == 0.0 {
        return Err(Error::DegenerateInput {
            op: "slerp",
            detail: "zero-vector input".into(),
        });
    }
    if c1.len() != c2.len() {
        return Err(Error::ShapeMismatch {
            op: "slerp",
            expected: format!("length {}", c1.len()),
            got: format!("length {}", c2.len()),
        });
    }
    let u1 = RealVector::new(c1.iter().map(|v| v / n1).collect());
    let u2 = RealVector::new(c2.iter().map(|v| v / n2).collect());
    let cos_theta = u1.dot(&u2).clamp(-1.0, 1.0);
    let theta = cos_theta.acos();
    if theta > std::f64::consts::PI - 1e-6 {
        return Err(Error::DegenerateInput {
            op: "slerp",
            detail: "antipodal inputs".into(),
        });
    }
    if theta < 1e-12 {
        return Ok(u1);
    }
    let sin_theta = theta.sin();
    let a = ((1.0 - t) * theta).sin() / sin_theta;
    let b = (t * theta).sin() / sin_theta;
    let mut out = RealVector::zeros(u1.len());
    out.add_scaled(a, &u1);
    out.add_scaled(b, &u2);
    Ok(out)
}
