//! The energy-function library: composed discrepancy energies, perturbation-
//! averaged energies, Bayesian energies, and their exact gradients.
//!
//! An energy is a scalar E(z, c): lower means G(z) satisfies condition c
//! better. The sampler only needs values and z-gradients, exposed through
//! [`EnergyFn`].

use crate::diffcore::tape::{Tape, Var};
use crate::diffcore::{RealVector, RngStream};
use crate::error::{Error, Result};
use crate::models::{AuxModel, Generator, Prior};

const CROSS_ENTROPY_CLAMP: f64 = 1e-12;
const SIMPLEX_TOLERANCE: f64 = 1e-6;

/// Condition-space discrepancy U(c', c).
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Discrepancy {
    CrossEntropy,
    NegCosine,
}

fn check_simplex(op: &'static str, v: &RealVector) -> Result<()> {
    let sum: f64 = v.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_TOLERANCE || v.iter().any(|x| *x < -SIMPLEX_TOLERANCE) {
        return Err(Error::NotSimplex { op, sum });
    }
    Ok(())
}

/// Categorical cross-entropy `-sum_j c_j log c'_j`, with predictions clamped
/// below at 1e-12 before the log.
pub fn u_cross_entropy(c_pred: &RealVector, c: &RealVector) -> Result<f64> {
    c.check_len("u_cross_entropy", c_pred.len())?;
    check_simplex("u_cross_entropy", c_pred)?;
    check_simplex("u_cross_entropy", c)?;
    Ok(-c
        .iter()
        .zip(c_pred.iter())
        .map(|(cj, pj)| cj * pj.max(CROSS_ENTROPY_CLAMP).ln())
        .sum::<f64>())
}

/// Negative cosine similarity `-c.c' / (|c'||c|)`.
pub fn u_neg_cosine(c_pred: &RealVector, c: &RealVector) -> Result<f64> {
    c.check_len("u_neg_cosine", c_pred.len())?;
    let (np, nc) = (c_pred.norm(), c.norm());
    if np == 0.0 || nc == 0.0 {
        return Err(Error::DegenerateInput {
            op: "u_neg_cosine",
            detail: "zero-vector argument".into(),
        });
    }
    Ok(-c_pred.dot(c) / (np * nc))
}

/// A distribution over perturbation operators on data vectors: additive
/// Gaussian jitter composed with independent per-axis scaling.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbationFamily {
    pub jitter_std: f64,
    pub log_scale_std: f64,
}

impl Default for PerturbationFamily {
    fn default() -> Self {
        PerturbationFamily {
            jitter_std: 0.1,
            log_scale_std: 0.1,
        }
    }
}

impl PerturbationFamily {
    /// The family containing only the identity operator.
    pub fn identity() -> Self {
        PerturbationFamily {
            jitter_std: 0.0,
            log_scale_std: 0.0,
        }
    }

    /// Draws one deterministic, differentiable perturbation.
    pub fn sample(&self, dim: usize, rng: &mut RngStream) -> Perturbation {
        let scale =
            RealVector::new((0..dim).map(|_| (self.log_scale_std * rng.normal()).exp()).collect());
        let shift = RealVector::new((0..dim).map(|_| self.jitter_std * rng.normal()).collect());
        Perturbation { scale, shift }
    }
}

/// One drawn operator: `phi[x] = scale .* x + shift`.
#[derive(Clone, Debug)]
pub struct Perturbation {
    pub scale: RealVector,
    pub shift: RealVector,
}

impl Perturbation {
    pub fn apply(&self, x: &RealVector) -> RealVector {
        let mut out = x.clone();
        for i in 0..out.len() {
            out[i] = self.scale[i] * out[i] + self.shift[i];
        }
        out
    }

    fn build(&self, tape: &mut Tape, x: Var) -> Var {
        let s = tape.constant(self.scale.as_slice());
        let t = tape.constant(self.shift.as_slice());
        let scaled = tape.mul(x, s);
        tape.add(scaled, t)
    }
}

/// Values and exact z-gradients of an energy. For stochastic energies the
/// same internal draws feed the value and the gradient of one call (common
/// random numbers), and two calls with equal stream states agree.
pub trait EnergyFn {
    fn latent_dim(&self) -> usize;

    fn eval(&self, z: &RealVector, c: &RealVector, rng: &mut RngStream) -> Result<f64>;

    fn value_and_grad(
        &self,
        z: &RealVector,
        c: &RealVector,
        rng: &mut RngStream,
    ) -> Result<(f64, RealVector)>;

    fn grad(&self, z: &RealVector, c: &RealVector, rng: &mut RngStream) -> Result<RealVector> {
        Ok(self.value_and_grad(z, c, rng)?.1)
    }
}

/// A closed-over energy with its configuration.
#[derive(Clone, Debug)]
pub enum EnergySpec {
    /// `E(z, c) = U(f(G(z)), c)` (the plain composed energy).
    Composed {
        generator: Generator,
        aux: AuxModel,
        discrepancy: Discrepancy,
        beta: f64,
    },
    /// Mean over `n_phi` perturbation draws of the negative cosine
    /// similarity between `f(phi[G(z)])` and `c`.
    Augmented {
        generator: Generator,
        aux: AuxModel,
        family: PerturbationFamily,
        n_phi: usize,
        beta: f64,
    },
    /// `beta1 * 0.5 |z / nu|^2 + beta2 * U_ent(f(G(z)), c)`; log-density
    /// constants are dropped, so only energy differences are meaningful.
    Bayes {
        generator: Generator,
        aux: AuxModel,
        prior: Prior,
        beta1: f64,
        beta2: f64,
    },
}

impl EnergySpec {
    pub fn composed(
        generator: Generator,
        aux: AuxModel,
        discrepancy: Discrepancy,
        beta: f64,
    ) -> Result<Self> {
        if beta <= 0.0 {
            return Err(Error::InvalidConfig(format!("beta {beta} must be > 0")));
        }
        if discrepancy == Discrepancy::CrossEntropy && !aux.is_classifier() {
            return Err(Error::InvalidConfig(
                "cross-entropy energies need a classifier".into(),
            ));
        }
        check_composition(&generator, &aux)?;
        Ok(EnergySpec::Composed {
            generator,
            aux,
            discrepancy,
            beta,
        })
    }

    pub fn augmented(
        generator: Generator,
        aux: AuxModel,
        family: PerturbationFamily,
        n_phi: usize,
        beta: f64,
    ) -> Result<Self> {
        if beta <= 0.0 {
            return Err(Error::InvalidConfig(format!("beta {beta} must be > 0")));
        }
        if n_phi == 0 {
            return Err(Error::InvalidConfig("n_phi must be >= 1".into()));
        }
        check_composition(&generator, &aux)?;
        Ok(EnergySpec::Augmented {
            generator,
            aux,
            family,
            n_phi,
            beta,
        })
    }

    pub fn bayes(
        generator: Generator,
        aux: AuxModel,
        prior: Prior,
        beta1: f64,
        beta2: f64,
    ) -> Result<Self> {
        if !aux.is_classifier() {
            return Err(Error::InvalidConfig(
                "bayes energies need a classifier".into(),
            ));
        }
        if prior.dim() != generator.latent_dim() {
            return Err(Error::ShapeMismatch {
                op: "EnergySpec::bayes",
                expected: format!("prior dim {}", generator.latent_dim()),
                got: format!("{}", prior.dim()),
            });
        }
        check_composition(&generator, &aux)?;
        Ok(EnergySpec::Bayes {
            generator,
            aux,
            prior,
            beta1,
            beta2,
        })
    }

    /// The inverse temperature this energy was configured with (1 for the
    /// Bayesian variant, whose weights live in beta1/beta2).
    pub fn beta(&self) -> f64 {
        match self {
            EnergySpec::Composed { beta, .. } | EnergySpec::Augmented { beta, .. } => *beta,
            EnergySpec::Bayes { .. } => 1.0,
        }
    }

    pub fn generator(&self) -> &Generator {
        match self {
            EnergySpec::Composed { generator, .. }
            | EnergySpec::Augmented { generator, .. }
            | EnergySpec::Bayes { generator, .. } => generator,
        }
    }

    fn draw_perturbations(&self, rng: &mut RngStream) -> Vec<Perturbation> {
        match self {
            EnergySpec::Augmented {
                family,
                n_phi,
                generator,
                ..
            } => (0..*n_phi)
                .map(|_| family.sample(generator.data_dim(), rng))
                .collect(),
            _ => Vec::new(),
        }
    }

    fn eval_with(&self, z: &RealVector, c: &RealVector, phis: &[Perturbation]) -> Result<f64> {
        match self {
            EnergySpec::Composed {
                generator,
                aux,
                discrepancy,
                ..
            } => {
                let pred = aux.apply(&generator.apply(z)?)?;
                match discrepancy {
                    Discrepancy::CrossEntropy => u_cross_entropy(&pred, c),
                    Discrepancy::NegCosine => u_neg_cosine(&pred, c),
                }
            }
            EnergySpec::Augmented { generator, aux, .. } => {
                let x = generator.apply(z)?;
                let mut acc = 0.0;
                for phi in phis {
                    let pred = aux.apply(&phi.apply(&x))?;
                    acc += u_neg_cosine(&pred, c)?;
                }
                Ok(acc / phis.len() as f64)
            }
            EnergySpec::Bayes {
                generator,
                aux,
                prior,
                beta1,
                beta2,
            } => {
                let mut l2 = 0.0;
                for i in 0..z.len() {
                    let s = z[i] / prior.scale_at(i);
                    l2 += s * s;
                }
                let pred = aux.apply(&generator.apply(z)?)?;
                Ok(beta1 * 0.5 * l2 + beta2 * u_cross_entropy(&pred, c)?)
            }
        }
    }

    /// Records E(., c) on `tape` starting from the latent node `z`.
    fn build(&self, tape: &mut Tape, z: Var, c: &RealVector, phis: &[Perturbation]) -> Var {
        match self {
            EnergySpec::Composed {
                generator,
                aux,
                discrepancy,
                ..
            } => {
                let x = generator.build(tape, z);
                let pred = aux.build(tape, x);
                build_u(tape, *discrepancy, pred, c)
            }
            EnergySpec::Augmented { generator, aux, .. } => {
                let x = generator.build(tape, z);
                let terms: Vec<Var> = phis
                    .iter()
                    .map(|phi| {
                        let xp = phi.build(tape, x);
                        let pred = aux.build(tape, xp);
                        build_u(tape, Discrepancy::NegCosine, pred, c)
                    })
                    .collect();
                tape.mean_of(&terms)
            }
            EnergySpec::Bayes {
                generator,
                aux,
                prior,
                beta1,
                beta2,
            } => {
                let inv_scale = tape.constant(
                    &(0..prior.dim())
                        .map(|i| 1.0 / prior.scale_at(i))
                        .collect::<Vec<_>>(),
                );
                let scaled = tape.mul(z, inv_scale);
                let sq = tape.dot(scaled, scaled);
                let l2 = tape.scale(sq, 0.5 * beta1);
                let x = generator.build(tape, z);
                let pred = aux.build(tape, x);
                let ce = build_u(tape, Discrepancy::CrossEntropy, pred, c);
                let ce_scaled = tape.scale(ce, *beta2);
                tape.add(l2, ce_scaled)
            }
        }
    }
}

fn check_composition(generator: &Generator, aux: &AuxModel) -> Result<()> {
    if generator.data_dim() != aux.input_dim() {
        return Err(Error::ShapeMismatch {
            op: "EnergySpec",
            expected: format!("aux input {}", generator.data_dim()),
            got: format!("{}", aux.input_dim()),
        });
    }
    Ok(())
}

fn build_u(tape: &mut Tape, discrepancy: Discrepancy, pred: Var, c: &RealVector) -> Var {
    match discrepancy {
        Discrepancy::CrossEntropy => {
            let clamped = tape.clamp_min(pred, CROSS_ENTROPY_CLAMP);
            let logs = tape.log(clamped);
            let cc = tape.constant(c.as_slice());
            let weighted = tape.mul(logs, cc);
            let total = tape.sum(weighted);
            tape.neg(total)
        }
        Discrepancy::NegCosine => {
            let cc = tape.constant(c.as_slice());
            let num = tape.dot(pred, cc);
            let sq = tape.dot(pred, pred);
            let norm = tape.sqrt(sq);
            let denom = tape.scale(norm, c.norm());
            let ratio = tape.div(num, denom);
            tape.neg(ratio)
        }
    }
}

impl EnergyFn for EnergySpec {
    fn latent_dim(&self) -> usize {
        self.generator().latent_dim()
    }

    fn eval(&self, z: &RealVector, c: &RealVector, rng: &mut RngStream) -> Result<f64> {
        z.check_len("energy_eval", self.latent_dim())?;
        let phis = self.draw_perturbations(rng);
        self.eval_with(z, c, &phis)
    }

    fn value_and_grad(
        &self,
        z: &RealVector,
        c: &RealVector,
        rng: &mut RngStream,
    ) -> Result<(f64, RealVector)> {
        z.check_len("energy_grad", self.latent_dim())?;
        let phis = self.draw_perturbations(rng);
        let mut tape = Tape::new();
        let zv = tape.leaf(z);
        let out = self.build(&mut tape, zv, c, &phis);
        let value = tape.value_scalar(out)?;
        let mut grads = tape.backward(out)?;
        Ok((value, RealVector::new(grads.take(zv, z.len()))))
    }
}

/// An energy defined by a tape-recording closure; the plug-in point for
/// custom analytic energies (test fixtures, double wells, quadratic bowls).
pub struct TapeEnergy<F>
where
    F: Fn(&mut Tape, Var, &RealVector) -> Var,
{
    latent_dim: usize,
    build: F,
}

impl<F> TapeEnergy<F>
where
    F: Fn(&mut Tape, Var, &RealVector) -> Var,
{
    pub fn new(latent_dim: usize, build: F) -> Self {
        TapeEnergy { latent_dim, build }
    }
}

impl<F> EnergyFn for TapeEnergy<F>
where
    F: Fn(&mut Tape, Var, &RealVector) -> Var,
{
    fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    fn eval(&self, z: &RealVector, c: &RealVector, rng: &mut RngStream) -> Result<f64> {
        let _ = rng;
        let mut tape = Tape::new();
        let zv = tape.leaf(z);
        let out = (self.build)(&mut tape, zv, c);
        tape.value_scalar(out)
    }

    fn value_and_grad(
        &self,
        z: &RealVector,
        c: &RealVector,
        rng: &mut RngStream,
    ) -> Result<(f64, RealVector)> {
        let _ = rng;
        let mut tape = Tape::new();
        let zv = tape.leaf(z);
        let out = (self.build)(&mut tape, zv, c);
        let value = tape.value_scalar(out)?;
        let mut grads = tape.backward(out)?;
        Ok((value, RealVector::new(grads.take(zv, z.len()))))
    }
}
