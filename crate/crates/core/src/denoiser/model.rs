//! Weight files: `manifest.json` describing the layer stack and training
//! metadata, and `weights.bin` holding little-endian `f32` values, layer
//! by layer, kernel `(out, in, kh, kw)` then bias.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::DenoiserError;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const WEIGHTS_FILE: &str = "weights.bin";
pub const MANIFEST_VERSION: u32 = 1;
const DNCNN_DEPTH: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossTag {
    L1,
    L2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub out: usize,
    #[serde(rename = "in")]
    pub inp: usize,
    pub kh: usize,
    pub kw: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn conv3(inp: usize, out: usize, activation: Activation) -> Self {
        LayerSpec {
            out,
            inp,
            kh: 3,
            kw: 3,
            activation,
        }
    }

    pub fn kernel_len(&self) -> usize {
        self.out * self.inp * self.kh * self.kw
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub layers: Vec<LayerSpec>,
    pub sigma: f64,
    pub a: f64,
    pub loss: LossTag,
    pub kappa: f64,
    pub epsilon: f64,
    pub residual_skip: bool,
    #[serde(rename = "checksum-sha256")]
    pub checksum_sha256: String,
    /// Fields this engine does not interpret (batch size, timestamps...).
    #[serde(flatten)]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

/// One convolution: kernel `(out, in, kh, kw)` row-major, bias `(out)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelLayer {
    pub spec: LayerSpec,
    pub kernel: Vec<f32>,
    pub bias: Vec<f32>,
}

impl ModelLayer {
    pub fn new(spec: LayerSpec, kernel: Vec<f32>, bias: Vec<f32>) -> Result<Self, DenoiserError> {
        if kernel.len() != spec.kernel_len() || bias.len() != spec.out {
            return Err(DenoiserError::Architecture(format!(
                "layer {}x{}x{}x{} needs {} kernel values and {} biases, got {} and {}",
                spec.out,
                spec.inp,
                spec.kh,
                spec.kw,
                spec.kernel_len(),
                spec.out,
                kernel.len(),
                bias.len()
            )));
        }
        Ok(ModelLayer { spec, kernel, bias })
    }

    pub fn zeros(spec: LayerSpec) -> Self {
        ModelLayer {
            spec,
            kernel: vec![0.0; spec.kernel_len()],
            bias: vec![0.0; spec.out],
        }
    }
}

/// Which layer stacks a loader accepts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Architecture {
    /// The modified DnCNN: 20 3×3 convolutions of constant hidden width,
    /// relu after the first 19, a single-channel input and output.
    DnCnn20,
    /// Any chained stack of odd-sized convolutions from one channel to
    /// one channel; used for hand-built toy models.
    Free,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenoiserModel {
    pub layers: Vec<ModelLayer>,
    pub sigma: f64,
    pub a: f64,
    pub loss: LossTag,
    pub kappa: f64,
    pub epsilon: f64,
    pub residual_skip: bool,
    pub extra: serde_json::Map<String, serde_json::Value>,
}

impl DenoiserModel {
    /// Model with default metadata; architecture checked against `arch`.
    pub fn new(layers: Vec<ModelLayer>, arch: Architecture) -> Result<Self, DenoiserError> {
        let specs: Vec<LayerSpec> = layers.iter().map(|l| l.spec).collect();
        validate(&specs, arch)?;
        Ok(DenoiserModel {
            layers,
            sigma: 0.0,
            a: 1.0,
            loss: LossTag::L1,
            kappa: 0.0,
            epsilon: 5e-2,
            residual_skip: true,
            extra: serde_json::Map::new(),
        })
    }

    /// A DnCNN of hidden width `width` with every weight zero.
    pub fn zero_dncnn(width: usize) -> Self {
        let mut layers = vec![ModelLayer::zeros(LayerSpec::conv3(1, width, Activation::Relu))];
        for _ in 1..DNCNN_DEPTH - 1 {
            layers.push(ModelLayer::zeros(LayerSpec::conv3(
                width,
                width,
                Activation::Relu,
            )));
        }
        layers.push(ModelLayer::zeros(LayerSpec::conv3(width, 1, Activation::None)));
        DenoiserModel::new(layers, Architecture::DnCnn20).expect("zero DnCNN is valid")
    }

    pub fn width(&self) -> usize {
        self.layers[0].spec.out
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec).collect()
    }

    pub fn blob_len(&self) -> usize {
        blob_len(&self.specs())
    }

    pub fn to_blob(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.blob_len());
        for l in &self.layers {
            for v in l.kernel.iter().chain(&l.bias) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn manifest(&self) -> Manifest {
        Manifest {
            version: MANIFEST_VERSION,
            layers: self.specs(),
            sigma: self.sigma,
            a: self.a,
            loss: self.loss,
            kappa: self.kappa,
            epsilon: self.epsilon,
            residual_skip: self.residual_skip,
            checksum_sha256: sha256_hex(&self.to_blob()),
            extra: self.extra.clone(),
        }
    }
}

fn blob_len(specs: &[LayerSpec]) -> usize {
    specs.iter().map(|s| 4 * (s.kernel_len() + s.out)).sum()
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn validate(specs: &[LayerSpec], arch: Architecture) -> Result<(), DenoiserError> {
    let bad = |msg: String| Err(DenoiserError::Architecture(msg));
    if specs.is_empty() {
        return bad("model has no layers".into());
    }
    if arch == Architecture::DnCnn20 && specs.len() != DNCNN_DEPTH {
        return bad(format!(
            "the modified DnCNN has exactly {DNCNN_DEPTH} convolution layers, manifest declares {}",
            specs.len()
        ));
    }
    if specs[0].inp != 1 {
        return bad(format!("first layer must take 1 channel, takes {}", specs[0].inp));
    }
    let last = specs.len() - 1;
    if specs[last].out != 1 {
        return bad(format!(
            "last layer must produce 1 channel, produces {}",
            specs[last].out
        ));
    }
    for (i, s) in specs.iter().enumerate() {
        if s.out == 0 || s.inp == 0 {
            return bad(format!("layer {i} has an empty channel dimension"));
        }
        if arch == Architecture::DnCnn20 && (s.kh, s.kw) != (3, 3) {
            return bad(format!(
                "layer {i} has a {}x{} kernel, only 3x3 is allowed",
                s.kh, s.kw
            ));
        }
        if s.kh % 2 == 0 || s.kw % 2 == 0 {
            return bad(format!("layer {i} has an even-sized {}x{} kernel", s.kh, s.kw));
        }
        if i > 0 && s.inp != specs[i - 1].out {
            return bad(format!(
                "layer {i} takes {} channels but layer {} produces {}",
                s.inp,
                i - 1,
                specs[i - 1].out
            ));
        }
        if arch == Architecture::DnCnn20 {
            let want = if i == last {
                Activation::None
            } else {
                Activation::Relu
            };
            if s.activation != want {
                return bad(format!("layer {i} must use activation {want:?}"));
            }
            if i < last && s.out != specs[0].out {
                return bad(format!(
                    "hidden width must be constant: layer {i} has {} channels, layer 0 has {}",
                    s.out, specs[0].out
                ));
            }
        }
    }
    Ok(())
}

/// Writes `manifest.json` and `weights.bin` into `dir`.
pub fn save_model(model: &DenoiserModel, dir: impl AsRef<Path>) -> Result<(), DenoiserError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    fs::write(dir.join(WEIGHTS_FILE), model.to_blob())?;
    let mut json = serde_json::to_string_pretty(&model.manifest())?;
    json.push('\n');
    fs::write(dir.join(MANIFEST_FILE), json)?;
    Ok(())
}

/// Loads a model whose manifest path is given; the weights are read from
/// `weights.bin` next to it. Only the 20-layer DnCNN is accepted.
pub fn load_model(manifest_path: impl AsRef<Path>) -> Result<DenoiserModel, DenoiserError> {
    load_model_with(manifest_path, Architecture::DnCnn20)
}

pub fn load_model_with(
    manifest_path: impl AsRef<Path>,
    arch: Architecture,
) -> Result<DenoiserModel, DenoiserError> {
    let manifest_path = manifest_path.as_ref();
    let manifest: Manifest = serde_json::from_slice(&fs::read(manifest_path)?)?;
    if manifest.version != MANIFEST_VERSION {
        return Err(DenoiserError::Architecture(format!(
            "unsupported manifest version {}",
            manifest.version
        )));
    }
    validate(&manifest.layers, arch)?;
    let blob_path = manifest_path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(WEIGHTS_FILE);
    let blob = fs::read(blob_path)?;
    let expected_bytes = blob_len(&manifest.layers);
    let actual_sha = sha256_hex(&blob);
    if blob.len() != expected_bytes || !actual_sha.eq_ignore_ascii_case(&manifest.checksum_sha256) {
        return Err(DenoiserError::Checksum {
            expected_bytes,
            actual_bytes: blob.len(),
            expected_sha: manifest.checksum_sha256,
            actual_sha,
        });
    }

    let mut values = blob
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]));
    let mut layers = Vec::with_capacity(manifest.layers.len());
    for spec in &manifest.layers {
        let kernel: Vec<f32> = values.by_ref().take(spec.kernel_len()).collect();
        let bias: Vec<f32> = values.by_ref().take(spec.out).collect();
        layers.push(ModelLayer::new(*spec, kernel, bias)?);
    }
    Ok(DenoiserModel {
        layers,
        sigma: manifest.sigma,
        a: manifest.a,
        loss: manifest.loss,
        kappa: manifest.kappa,
        epsilon: manifest.epsilon,
        residual_skip: manifest.residual_skip,
        extra: manifest.extra,
    })
}
