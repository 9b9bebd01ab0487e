//! Turn a pre-trained unconditional pushforward model into a conditional
//! sampler: train a lightweight stochastic translator from conditions to
//! latents, then refine its output with Langevin dynamics over a fixed energy.
//!
//! Everything is desk-scale and double precision; every numerical claim is
//! checkable against the brute-force references in [`oracle`].

pub mod diffcore;
pub mod energy;
pub mod error;
pub mod models;
pub mod oracle;
pub mod sampler;
pub mod translator;

pub use diffcore::{
    adam_step, grad_scalar, momentum_step, Activation, Layer, MlpParams, OptimizerState,
    RealMatrix, RealVector, RngStream, Tape, Var,
};
pub use energy::{
    u_cross_entropy, u_neg_cosine, Discrepancy, EnergyFn, EnergySpec, PerturbationFamily,
    TapeEnergy,
};
pub use error::{Error, Result};
pub use models::{make_pairs, prior_sample, AuxModel, Generator, PairDataset, Prior};
pub use sampler::{
    init_best_of_m, init_naive, langevin_latent, langevin_params, langevin_params_from,
    tr0n_sample, DriftOptimizer, InitStrategy, NaiveInit, SamplerConfig, SamplerMode, Trajectory,
    TrajectoryState,
};
pub use translator::{
    gmm_log_density, gmm_mean, gmm_sample, slerp, train_deterministic_translator,
    train_translator, GmmParams, TrainedTranslator, TranslatorParams, TranslatorTrainConfig,
};
