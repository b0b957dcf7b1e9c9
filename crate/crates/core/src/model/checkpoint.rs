use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Layer, Tensor2};
use crate::dataset::{FeatureScaler, FeatureVector};
use crate::error::{Error, Result};
use crate::model::{Architecture, InitInfo, ModelParams};
use crate::scalar::Scalar;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"INRSHAPE";
pub const CHECKPOINT_VERSION: u32 = 1;

/// JSON header preceding the parameter blocks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub version: u32,
    /// Precision the parameters were trained in (`f32` or `f64`).
    pub precision: String,
    pub arch: Architecture,
    pub init: InitInfo,
    pub scaler: FeatureScaler,
    pub features: Vec<FeatureVector>,
    /// Grid convention used for synthesis.
    pub grid: String,
    pub training: Option<serde_json::Value>,
    /// `(name, rows, cols)` of each float64 block, in file order.
    pub blocks: Vec<(String, usize, usize)>,
}

impl<T: Scalar> ModelParams<T> {
    pub fn header(&self) -> CheckpointHeader {
        let mut blocks = Vec::with_capacity(2 * self.layers.len() + 1);
        for (i, l) in self.layers.iter().enumerate() {
            blocks.push((format!("layer{i}.weight"), l.weight.rows(), l.weight.cols()));
            blocks.push((format!("layer{i}.bias"), l.bias.rows(), l.bias.cols()));
        }
        blocks.push(("latents".into(), self.latents.rows(), self.latents.cols()));
        CheckpointHeader {
            version: CHECKPOINT_VERSION,
            precision: T::NAME.into(),
            arch: self.arch.clone(),
            init: self.init.clone(),
            scaler: self.scaler,
            features: self.features.clone(),
            grid: "cell-centers".into(),
            training: self.training.clone(),
            blocks,
        }
    }

    /// Magic, `u32` version, `u64` header length, JSON header, then
    /// little-endian float64 blocks.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = serde_json::to_vec(&self.header())?;
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        let tensors = self
            .layers
            .iter()
            .flat_map(|l| [&l.weight, &l.bias])
            .chain(std::iter::once(&self.latents));
        for t in tensors {
            for v in t.data() {
                out.extend_from_slice(&v.as_f64().to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8], origin: &Path) -> Result<Self> {
        let (header, mut rest) = split_header(bytes, origin)?;
        let mut take = |rows: usize, cols: usize| -> Result<Tensor2<T>> {
            let n = rows * cols * 8;
            if rest.len() < n {
                return Err(Error::format(origin, "parameter blocks are truncated"));
            }
            let (block, tail) = rest.split_at(n);
            rest = tail;
            let data = block
                .chunks_exact(8)
                .map(|c| T::c(f64::from_le_bytes(c.try_into().expect("8-byte chunk"))))
                .collect();
            Tensor2::from_vec(rows, cols, data)
        };
        let expected = header.arch.layer_dims();
        if header.blocks.len() != 2 * expected.len() + 1 {
            return Err(Error::format(origin, "block list does not match the architecture"));
        }
        let mut layers = Vec::with_capacity(expected.len());
        for (i, &(fan_in, fan_out)) in expected.iter().enumerate() {
            let (_, wr, wc) = header.blocks[2 * i];
            let (_, br, bc) = header.blocks[2 * i + 1];
            if (wr, wc, br, bc) != (fan_in, fan_out, 1, fan_out) {
                return Err(Error::format(origin, format!("layer {i} block sizes disagree with the architecture")));
            }
            layers.push(Layer::new(take(wr, wc)?, take(br, bc)?)?);
        }
        let (_, lr, lc) = *header.blocks.last().expect("non-empty block list");
        let latents = take(lr, lc)?;
        if !rest.is_empty() {
            return Err(Error::format(origin, format!("{} trailing bytes", rest.len())));
        }
        let model = ModelParams {
            arch: header.arch,
            layers,
            latents,
            scaler: header.scaler,
            features: header.features,
            init: header.init,
            training: header.training,
        };
        model.validate().map_err(|e| Error::format(origin, e.to_string()))?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }
}

fn split_header<'a>(bytes: &'a [u8], origin: &Path) -> Result<(CheckpointHeader, &'a [u8])> {
    if bytes.len() < 20 || &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(Error::format(origin, "not a checkpoint file"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != CHECKPOINT_VERSION {
        return Err(Error::format(origin, format!("unsupported checkpoint version {version}")));
    }
    let len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
    let body = &bytes[20..];
    if body.len() < len {
        return Err(Error::format(origin, "header is truncated"));
    }
    let header: CheckpointHeader =
        serde_json::from_slice(&body[..len]).map_err(|e| Error::format(origin, e.to_string()))?;
    Ok((header, &body[len..]))
}

/// Reads only the header, e.g. to pick the precision before loading.
pub fn read_checkpoint_header(path: impl AsRef<Path>) -> Result<CheckpointHeader> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(split_header(&bytes, path)?.0)
}
