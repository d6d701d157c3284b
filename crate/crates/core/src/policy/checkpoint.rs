//! Binary checkpoint format.
//!
//! ```text
//! magic        8 bytes  "RLABCKPT"
//! version      u32 LE
//! header_len   u32 LE
//! header       header_len bytes of UTF-8 JSON (CheckpointHeader)
//! n_params     u64 LE
//! params       n_params x f32 LE, flat layout of PolicyNet
//! n_moments    u64 LE   0, or n_params when optimizer state is present
//! first        n_moments x f32 LE (Adam first moment)
//! second       n_moments x f32 LE (Adam second moment)
//! ```

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::adam::{Adam, AdamConfig};
use super::network::{PolicyNet, PolicySpec};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"RLABCKPT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointHeader {
    pub format_version: u32,
    pub spec: PolicySpec,
    /// Total environment steps trained.
    pub step: u64,
    pub updates: u64,
    /// SHA-256 of the effective run configuration.
    pub config_hash: String,
    pub actuation_mode: String,
    pub adam: AdamConfig,
    pub adam_steps: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub net: PolicyNet<f32>,
    pub optimizer: Option<Adam<f32>>,
}

/// Hex SHA-256 of the JSON serialization of `value`.
pub fn config_hash<T: Serialize>(value: &T) -> Result<String> {
    let bytes = serde_json::to_vec(value)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn put_f32s(buf: &mut Vec<u8>, values: &[f32]) {
    buf.extend_from_slice(&(values.len() as u64).to_le_bytes());
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = serde_json::to_vec(&self.header)?;
        let mut buf = Vec::with_capacity(32 + header.len() + 12 * self.net.params().len());
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        buf.extend_from_slice(&(header.len() as u32).to_le_bytes());
        buf.extend_from_slice(&header);
        put_f32s(&mut buf, self.net.params());
        match &self.optimizer {
            Some(adam) => {
                buf.extend_from_slice(&(adam.first.len() as u64).to_le_bytes());
                for v in adam.first.iter().chain(&adam.second) {
                    buf.extend_from_slice(&v.to_le_bytes());
                }
            }
            None => buf.extend_from_slice(&0u64.to_le_bytes()),
        }
        Ok(buf)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Checkpoint("not a checkpoint file (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported format version {version} (expected {FORMAT_VERSION})")));
        }
        let header_len = r.u32()? as usize;
        let header: CheckpointHeader = serde_json::from_slice(r.take(header_len)?)?;
        let params = r.f32s()?;
        let net = PolicyNet::from_params(header.spec.clone(), params)?;
        let moments = r.u64()? as usize;
        let optimizer = if moments == 0 {
            None
        } else {
            if moments != net.params().len() {
                return Err(Error::Checkpoint(format!(
                    "optimizer state has {moments} entries, network has {}",
                    net.params().len()
                )));
            }
            let first = r.f32_array(moments)?;
            let second = r.f32_array(moments)?;
            Some(Adam { config: header.adam, first, second, steps: header.adam_steps })
        };
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(Checkpoint { header, net, optimizer })
    }

    /// Writes atomically (temporary file, then rename).
    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        let tmp = path.with_extension("ckpt.tmp");
        let mut f = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(&bytes).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            Error::Checkpoint(m) => Error::Checkpoint(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

/// Checkpoint file name for a step count; zero-padded so names sort by step.
pub fn checkpoint_file_name(step: u64) -> String {
    format!("step_{step:012}.ckpt")
}

/// The checkpoint with the highest step in `dir`, if any.
pub fn latest_checkpoint(dir: &Path) -> Result<Option<PathBuf>> {
    if !dir.exists() {
        return Ok(None);
    }
    let mut best: Option<(u64, PathBuf)> = None;
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let step = path
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.strip_prefix("step_"))
            .and_then(|n| n.strip_suffix(".ckpt"))
            .and_then(|n| n.parse::<u64>().ok());
        if let Some(step) = step {
            if best.as_ref().is_none_or(|(b, _)| step > *b) {
                best = Some((step, path));
            }
        }
    }
    Ok(best.map(|(_, p)| p))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Checkpoint("truncated file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f32_array(&mut self, n: usize) -> Result<Vec<f32>> {
        let raw = self.take(n.checked_mul(4).ok_or_else(|| Error::Checkpoint("length overflow".into()))?)?;
        Ok(raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect())
    }

    fn f32s(&mut self) -> Result<Vec<f32>> {
        let n = self.u64()? as usize;
        self.f32_array(n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample() -> Checkpoint {
        let spec = PolicySpec::with_hidden(5, vec![8, 8], vec![4]);
        let net = PolicyNet::<f32>::init(spec.clone(), &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let mut adam = Adam::new(net.params().len(), AdamConfig::default());
        adam.first[3] = 0.25;
        adam.steps = 7;
        Checkpoint {
            header: CheckpointHeader {
                format_version: FORMAT_VERSION,
                spec,
                step: 4096,
                updates: 1,
                config_hash: "ab".into(),
                actuation_mode: "active_4wd".into(),
                adam: AdamConfig::default(),
                adam_steps: 7,
            },
            net,
            optimizer: Some(adam),
        }
    }

    #[test]
    fn byte_round_trip() {
        let c = sample();
        let back = Checkpoint::from_bytes(&c.to_bytes().unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn corruption_detected() {
        let bytes = sample().to_bytes().unwrap();
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 3]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(Checkpoint::from_bytes(&bad).is_err());
    }

    #[test]
    fn latest_by_step() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(latest_checkpoint(dir.path()).unwrap(), None);
        for s in [10u64, 200, 30] {
            std::fs::write(dir.path().join(checkpoint_file_name(s)), b"").unwrap();
        }
        let latest = latest_checkpoint(dir.path()).unwrap().unwrap();
        assert!(latest.ends_with(checkpoint_file_name(200)));
    }
}
