//! Binary model checkpoints.
//!
//! Layout (little-endian): magic `SSNN`, `u32` format version, `u32` tensor
//! count, then per tensor: `u32` name length, UTF-8 name, `u32` rank, `u64`
//! per dimension, `f64` values. Hyperparameters live in a JSON sidecar next
//! to the binary file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::params::Parameters;
use super::Tensor;
use crate::error::{Error, Result};
use crate::imaging::io::atomic_write;

pub const MAGIC: &[u8; 4] = b"SSNN";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub tensor: Tensor,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Checkpoint {
    pub tensors: Vec<NamedTensor>,
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Format("unexpected end of checkpoint".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

impl Checkpoint {
    pub fn push(&mut self, name: impl Into<String>, tensor: Tensor) {
        self.tensors.push(NamedTensor {
            name: name.into(),
            tensor,
        });
    }

    /// Snapshot of every parameter segment as a 1-D tensor. Shapes are
    /// restored by the owning model from its sidecar.
    pub fn from_parameters<P: Parameters + ?Sized>(p: &P, prefix: &str) -> Self {
        let mut c = Checkpoint::default();
        p.visit(prefix, &mut |name, s| c.push(name, Tensor::vector(s.to_vec())));
        c
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|t| t.name == name).map(|t| &t.tensor)
    }

    /// Loads named segments back into `p`, checking lengths.
    pub fn restore_parameters<P: Parameters + ?Sized>(&self, p: &mut P, prefix: &str) -> Result<()> {
        let mut err = None;
        p.visit_mut(prefix, &mut |name, s| {
            if err.is_some() {
                return;
            }
            match self.get(name) {
                Some(t) if t.len() == s.len() => s.copy_from_slice(t.data()),
                Some(t) => {
                    err = Some(Error::Format(format!(
                        "tensor {name} has {} values, model expects {}",
                        t.len(),
                        s.len()
                    )))
                }
                None => err = Some(Error::Format(format!("missing tensor {name}"))),
            }
        });
        err.map_or(Ok(()), Err)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for t in &self.tensors {
            out.extend_from_slice(&(t.name.len() as u32).to_le_bytes());
            out.extend_from_slice(t.name.as_bytes());
            out.extend_from_slice(&(t.tensor.shape().len() as u32).to_le_bytes());
            for &d in t.tensor.shape() {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for v in t.tensor.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Format("bad magic, not an SSNN checkpoint".into()));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {version}")));
        }
        let count = r.u32()? as usize;
        let mut c = Checkpoint::default();
        for _ in 0..count {
            let len = r.u32()? as usize;
            let name = String::from_utf8(r.take(len)?.to_vec())
                .map_err(|_| Error::Format("tensor name is not UTF-8".into()))?;
            let rank = r.u32()? as usize;
            let shape = (0..rank)
                .map(|_| r.u64().map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            let n: usize = shape.iter().product();
            let raw = r.take(n * 8)?;
            let data = raw
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
                .collect();
            let tensor = Tensor::new(shape, data)
                .map_err(|e| Error::Format(format!("tensor {name}: {e}")))?;
            c.push(name, tensor);
        }
        if r.pos != bytes.len() {
            return Err(Error::Format("trailing bytes after last tensor".into()));
        }
        Ok(c)
    }
}

/// `model.ssnn` -> `model.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint, hyper: &impl Serialize) -> Result<()> {
    atomic_write(path, &ckpt.to_bytes())?;
    let json = serde_json::to_string_pretty(hyper)? + "\n";
    atomic_write(&sidecar_path(path), json.as_bytes())
}

pub fn load_checkpoint<H: DeserializeOwned>(path: &Path) -> Result<(Checkpoint, H)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let ckpt = Checkpoint::from_bytes(&bytes)?;
    let side = sidecar_path(path);
    let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    Ok((ckpt, serde_json::from_str(&text)?))
}
