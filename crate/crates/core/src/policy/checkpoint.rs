use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{PolicyNet, TransformerConfig};
use crate::codec::CodecConfig;
use crate::error::{Error, Result};
use crate::space::SearchSpace;

const MAGIC: &[u8; 8] = b"GRPOFCKP";
const VERSION: u32 = 1;

/// Everything needed to rebuild a policy: architecture, codec, search space
/// and weights. Weights are stored as raw little-endian f64, so a round trip
/// is bit-exact.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub transformer: TransformerConfig,
    pub codec: CodecConfig,
    pub space: SearchSpace,
    pub weights: Vec<Array2<f64>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    transformer: TransformerConfig,
    codec: CodecConfig,
    space: String,
    fingerprint: String,
    names: Vec<String>,
    shapes: Vec<(usize, usize)>,
}

impl Checkpoint {
    pub fn new(net: &PolicyNet, weights: &[Array2<f64>]) -> Self {
        Checkpoint {
            transformer: *net.config(),
            codec: *net.vocab().config(),
            space: net.space().clone(),
            weights: weights.to_vec(),
        }
    }

    /// Rebuilds the network and checks the stored tensors against its layout.
    pub fn network(&self) -> Result<PolicyNet> {
        let net = PolicyNet::new(self.transformer, self.codec, &self.space)?;
        let ok = self.weights.len() == net.tensor_shapes().len()
            && self.weights.iter().zip(net.tensor_shapes()).all(|(w, &s)| w.dim() == s);
        if !ok {
            return Err(Error::Checkpoint("tensor shapes do not match the stored architecture".into()));
        }
        Ok(net)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let net = self.network()?;
        let header = Header {
            transformer: self.transformer,
            codec: self.codec,
            space: self.space.to_toml_string(),
            fingerprint: self.space.fingerprint().to_string(),
            names: net.tensor_names().to_vec(),
            shapes: net.tensor_shapes().to_vec(),
        };
        let json = serde_json::to_vec(&header).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let mut out = Vec::with_capacity(20 + json.len() + 8 * self.weights.iter().map(|w| w.len()).sum::<usize>());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for w in &self.weights {
            for v in w.iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = bytes;
        let mut magic = [0u8; 8];
        read_exact(&mut r, &mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Checkpoint("not a checkpoint file".into()));
        }
        let mut b4 = [0u8; 4];
        read_exact(&mut r, &mut b4)?;
        let version = u32::from_le_bytes(b4);
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let mut b8 = [0u8; 8];
        read_exact(&mut r, &mut b8)?;
        let len = u64::from_le_bytes(b8) as usize;
        if len > r.len() {
            return Err(Error::Checkpoint("truncated header".into()));
        }
        let header: Header = serde_json::from_slice(&r[..len]).map_err(|e| Error::Checkpoint(e.to_string()))?;
        r = &r[len..];
        let space = SearchSpace::from_toml_str(&header.space)?;
        if space.fingerprint() != header.fingerprint {
            return Err(Error::Checkpoint("search-space fingerprint mismatch".into()));
        }
        let mut weights = Vec::with_capacity(header.shapes.len());
        for &(rows, cols) in &header.shapes {
            let n = rows * cols;
            if r.len() < 8 * n {
                return Err(Error::Checkpoint("truncated tensor data".into()));
            }
            let data = r[..8 * n]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            r = &r[8 * n..];
            weights.push(Array2::from_shape_vec((rows, cols), data).expect("shape matches length"));
        }
        if !r.is_empty() {
            return Err(Error::Checkpoint("trailing bytes".into()));
        }
        let ck = Checkpoint {
            transformer: header.transformer,
            codec: header.codec,
            space,
            weights,
        };
        let net = ck.network()?;
        if net.tensor_names() != header.names.as_slice() {
            return Err(Error::Checkpoint("tensor names do not match the stored architecture".into()));
        }
        Ok(ck)
    }
}

fn read_exact(r: &mut &[u8], buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf)
        .map_err(|_| Error::Checkpoint("truncated file".into()))
}

pub fn save_checkpoint(path: &Path, checkpoint: &Checkpoint) -> Result<()> {
    let bytes = checkpoint.to_bytes()?;
    let mut f = std::fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    if !path.exists() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    Checkpoint::from_bytes(&std::fs::read(path)?)
}
