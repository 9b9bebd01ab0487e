//! Versioned checkpoint files.
//!
//! Every artifact is a JSON envelope `{format_version, kind, shapes,
//! checksum, payload}` where `payload` is base64 of little-endian `f64`
//! parameter blocks in declared layer order and `checksum` is the FNV-1a
//! 64-bit hex digest of the raw payload bytes. Files are written atomically
//! (temp file in the same directory, then rename).

use std::path::Path;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::diffcore::mlp::{Activation, Layer, MlpParams};
use crate::diffcore::{RealMatrix, RealVector};
use crate::error::{Error, Result};
use crate::models::{AuxModel, Generator, PairDataset, PairMeta, Prior};
use crate::translator::TranslatorParams;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Envelope {
    format_version: u32,
    kind: String,
    shapes: serde_json::Value,
    checksum: String,
    payload: String,
}

#[derive(Serialize, Deserialize)]
struct LayerMeta {
    rows: usize,
    cols: usize,
    activation: Activation,
}

#[derive(Serialize, Deserialize)]
struct MlpMeta {
    layers: Vec<LayerMeta>,
}

#[derive(Serialize, Deserialize)]
struct GeneratorMeta {
    mlp: MlpMeta,
    box_bound: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct PriorMeta {
    dim: usize,
    variant: String,
}

#[derive(Serialize, Deserialize)]
struct TranslatorMeta {
    condition_dim: usize,
    hidden: usize,
    components: usize,
    latent_dim: usize,
    has_regression_head: bool,
}

#[derive(Serialize, Deserialize)]
struct PairsMeta {
    n: usize,
    latent_dim: usize,
    condition_dim: usize,
    gamma: f64,
    seed: String,
    generator_checksum: String,
    aux_checksum: String,
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= *b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn payload_bytes(values: &[f64]) -> Vec<u8> {
    let mut bytes = Vec::with_capacity(values.len() * 8);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    bytes
}

fn payload_values(bytes: &[u8]) -> Result<Vec<f64>> {
    if bytes.len() % 8 != 0 {
        return Err(Error::MalformedFile(format!(
            "payload length {} is not a multiple of 8",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

fn checksum_hex(values: &[f64]) -> String {
    format!("{:016x}", fnv1a64(&payload_bytes(values)))
}

fn write_envelope(
    path: &Path,
    kind: &str,
    shapes: serde_json::Value,
    values: &[f64],
) -> Result<()> {
    let bytes = payload_bytes(values);
    let env = Envelope {
        format_version: FORMAT_VERSION,
        kind: kind.to_string(),
        shapes,
        checksum: format!("{:016x}", fnv1a64(&bytes)),
        payload: BASE64.encode(&bytes),
    };
    let json = serde_json::to_string_pretty(&env)
        .map_err(|e| Error::MalformedFile(e.to_string()))?;
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    std::fs::write(&tmp, json.as_bytes()).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn read_envelope(path: &Path, expected_kind: &str) -> Result<(serde_json::Value, Vec<f64>)> {
    let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let env: Envelope =
        serde_json::from_str(&raw).map_err(|e| Error::MalformedFile(e.to_string()))?;
    if env.format_version != FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            got: env.format_version,
            supported: FORMAT_VERSION,
        });
    }
    if env.kind != expected_kind {
        return Err(Error::KindMismatch {
            expected: expected_kind.to_string(),
            got: env.kind,
        });
    }
    let bytes = BASE64
        .decode(env.payload.as_bytes())
        .map_err(|e| Error::MalformedFile(format!("payload base64: {e}")))?;
    let got = format!("{:016x}", fnv1a64(&bytes));
    if got != env.checksum {
        return Err(Error::ChecksumMismatch {
            expected: env.checksum,
            got,
        });
    }
    Ok((env.shapes, payload_values(&bytes)?))
}

fn mlp_meta(mlp: &MlpParams) -> MlpMeta {
    MlpMeta {
        layers: mlp
            .layers()
            .iter()
            .map(|l| LayerMeta {
                rows: l.weight.rows(),
                cols: l.weight.cols(),
                activation: l.activation,
            })
            .collect(),
    }
}

fn mlp_from_parts(meta: &MlpMeta, values: &[f64]) -> Result<(MlpParams, usize)> {
    let mut at = 0usize;
    let mut layers = Vec::with_capacity(meta.layers.len());
    for lm in &meta.layers {
        let wlen = lm.rows * lm.cols;
        if at + wlen + lm.rows > values.len() {
            return Err(Error::MalformedFile("payload shorter than shapes".into()));
        }
        let weight = RealMatrix::new(lm.rows, lm.cols, values[at..at + wlen].to_vec())?;
        at += wlen;
        let bias = RealVector::from_slice(&values[at..at + lm.rows]);
        at += lm.rows;
        layers.push(Layer::new(weight, bias, lm.activation)?);
    }
    Ok((MlpParams::new(layers)?, at))
}

fn shapes_value<T: Serialize>(meta: &T) -> serde_json::Value {
    serde_json::to_value(meta).expect("shape metadata serializes")
}

fn shapes_from<T: for<'de> Deserialize<'de>>(v: serde_json::Value) -> Result<T> {
    serde_json::from_value(v).map_err(|e| Error::MalformedFile(format!("shapes: {e}")))
}

// ----- prior -----

pub fn save_prior(path: &Path, prior: &Prior) -> Result<()> {
    let (variant, values): (&str, Vec<f64>) = match prior {
        Prior::StandardNormal { .. } => ("standard", Vec::new()),
        Prior::ScaledNormal { scale } => ("scaled", scale.as_slice().to_vec()),
    };
    let meta = PriorMeta {
        dim: prior.dim(),
        variant: variant.to_string(),
    };
    write_envelope(path, "prior", shapes_value(&meta), &values)
}

pub fn load_prior(path: &Path) -> Result<Prior> {
    let (shapes, values) = read_envelope(path, "prior")?;
    let meta: PriorMeta = shapes_from(shapes)?;
    match meta.variant.as_str() {
        "standard" => Ok(Prior::StandardNormal { dim: meta.dim }),
        "scaled" => {
            if values.len() != meta.dim {
                return Err(Error::MalformedFile("scaled prior payload length".into()));
            }
            Prior::scaled(RealVector::new(values))
        }
        other => Err(Error::MalformedFile(format!("prior variant {other}"))),
    }
}

// ----- generator -----

pub fn save_generator(path: &Path, generator: &Generator) -> Result<()> {
    let meta = GeneratorMeta {
        mlp: mlp_meta(generator.body()),
        box_bound: generator.box_bound(),
    };
    let mut values = Vec::new();
    generator.body().append_flat(&mut values);
    write_envelope(path, "generator", shapes_value(&meta), &values)
}

pub fn load_generator(path: &Path) -> Result<Generator> {
    let (shapes, values) = read_envelope(path, "generator")?;
    let meta: GeneratorMeta = shapes_from(shapes)?;
    let (mlp, used) = mlp_from_parts(&meta.mlp, &values)?;
    if used != values.len() {
        return Err(Error::MalformedFile("generator payload length".into()));
    }
    Generator::new(mlp, meta.box_bound)
}

// ----- auxiliary models -----

fn aux_kind(aux: &AuxModel) -> &'static str {
    if aux.is_classifier() {
        "classifier"
    } else {
        "embedder"
    }
}

pub fn save_aux(path: &Path, aux: &AuxModel) -> Result<()> {
    let meta = mlp_meta(aux.body());
    let mut values = Vec::new();
    aux.body().append_flat(&mut values);
    write_envelope(path, aux_kind(aux), shapes_value(&meta), &values)
}

pub fn load_classifier(path: &Path) -> Result<AuxModel> {
    let (shapes, values) = read_envelope(path, "classifier")?;
    let meta: MlpMeta = shapes_from(shapes)?;
    let (mlp, used) = mlp_from_parts(&meta, &values)?;
    if used != values.len() {
        return Err(Error::MalformedFile("classifier payload length".into()));
    }
    AuxModel::classifier(mlp)
}

pub fn load_embedder(path: &Path) -> Result<AuxModel> {
    let (shapes, values) = read_envelope(path, "embedder")?;
    let meta: MlpMeta = shapes_from(shapes)?;
    let (mlp, used) = mlp_from_parts(&meta, &values)?;
    if used != values.len() {
        return Err(Error::MalformedFile("embedder payload length".into()));
    }
    Ok(AuxModel::embedder(mlp))
}

// ----- translator -----

pub fn save_translator(path: &Path, tr: &TranslatorParams) -> Result<()> {
    let meta = TranslatorMeta {
        condition_dim: tr.condition_dim(),
        hidden: tr.hidden_dim(),
        components: tr.components(),
        latent_dim: tr.latent_dim(),
        has_regression_head: tr.has_regression_head(),
    };
    let mut values = Vec::new();
    tr.append_flat(&mut values);
    write_envelope(path, "translator", shapes_value(&meta), &values)
}

pub fn load_translator(path: &Path) -> Result<TranslatorParams> {
    let (shapes, values) = read_envelope(path, "translator")?;
    let meta: TranslatorMeta = shapes_from(shapes)?;
    let mut tr = TranslatorParams::zeroed(
        meta.condition_dim,
        meta.hidden,
        meta.components,
        meta.latent_dim,
        meta.has_regression_head,
    )?;
    if tr.param_count() != values.len() {
        return Err(Error::MalformedFile("translator payload length".into()));
    }
    tr.read_flat(&values);
    Ok(tr)
}

// ----- pair datasets -----

pub fn save_pairs(path: &Path, pairs: &PairDataset) -> Result<()> {
    let meta = PairsMeta {
        n: pairs.meta.n,
        latent_dim: pairs.meta.latent_dim,
        condition_dim: pairs.meta.condition_dim,
        gamma: pairs.meta.gamma,
        seed: pairs.meta.seed.clone(),
        generator_checksum: pairs.meta.generator_checksum.clone(),
        aux_checksum: pairs.meta.aux_checksum.clone(),
    };
    let mut values = Vec::with_capacity(pairs.len() * (meta.latent_dim + meta.condition_dim));
    for (z, c) in pairs.latents.iter().zip(&pairs.conditions) {
        values.extend_from_slice(z.as_slice());
        values.extend_from_slice(c.as_slice());
    }
    write_envelope(path, "pair-dataset", shapes_value(&meta), &values)
}

pub fn load_pairs(path: &Path) -> Result<PairDataset> {
    let (shapes, values) = read_envelope(path, "pair-dataset")?;
    let meta: PairsMeta = shapes_from(shapes)?;
    let record = meta.latent_dim + meta.condition_dim;
    if values.len() != meta.n * record {
        return Err(Error::MalformedFile("pair dataset payload length".into()));
    }
    let mut latents = Vec::with_capacity(meta.n);
    let mut conditions = Vec::with_capacity(meta.n);
    for chunk in values.chunks_exact(record.max(1)).take(meta.n) {
        latents.push(RealVector::from_slice(&chunk[..meta.latent_dim]));
        conditions.push(RealVector::from_slice(&chunk[meta.latent_dim..]));
    }
    Ok(PairDataset {
        latents,
        conditions,
        meta: PairMeta {
            n: meta.n,
            latent_dim: meta.latent_dim,
            condition_dim: meta.condition_dim,
            gamma: meta.gamma,
            seed: meta.seed,
            generator_checksum: meta.generator_checksum,
            aux_checksum: meta.aux_checksum,
        },
    })
}

// ----- content checksums for provenance -----

pub fn generator_checksum(generator: &Generator) -> String {
    let mut values = Vec::new();
    generator.body().append_flat(&mut values);
    if let Some(a) = generator.box_bound() {
        values.push(a);
    }
    checksum_hex(&values)
}

pub fn aux_checksum(aux: &AuxModel) -> String {
    let mut values = Vec::new();
    aux.body().append_flat(&mut values);
    values.push(if aux.is_classifier() { 1.0 } else { 2.0 });
    checksum_hex(&values)
}

pub fn translator_checksum(tr: &TranslatorParams) -> String {
    let mut values = Vec::new();
    tr.append_flat(&mut values);
    checksum_hex(&values)
}
