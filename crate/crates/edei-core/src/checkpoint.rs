//! Binary checkpoint format for named tensors.
//!
//! Layout: the magic bytes `EDEI`, one version byte, then one record per
//! tensor: name length (u32 LE), name bytes, rank (u32 LE), each dimension
//! (u32 LE), then the values as f64 LE. Values round-trip bit-exactly.

use std::path::Path;

use thiserror::Error;

use crate::nn::{ParameterStore, Tensor};

const MAGIC: &[u8; 4] = b"EDEI";
const VERSION: u8 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("bad magic bytes")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    BadVersion(u8),
    #[error("unexpected end of checkpoint data")]
    Truncated,
    #[error("entry name is not valid utf-8")]
    BadName,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Named tensors, in insertion order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CheckpointBundle {
    entries: Vec<(String, Vec<usize>, Vec<f64>)>,
}

impl CheckpointBundle {
    pub fn new() -> Self {
        CheckpointBundle::default()
    }

    pub fn push(&mut self, name: &str, shape: Vec<usize>, data: Vec<f64>) {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        self.entries.push((name.to_string(), shape, data));
    }

    /// Adds every parameter of `store` under `prefix/`.
    pub fn push_store(&mut self, prefix: &str, store: &ParameterStore) {
        for (name, tensor) in store.iter() {
            self.push(&format!("{prefix}/{name}"), tensor.shape.clone(), tensor.data.clone());
        }
    }

    /// Rebuilds a parameter store from every entry under `prefix/`,
    /// preserving entry order. `None` when the prefix is absent.
    pub fn store(&self, prefix: &str) -> Option<ParameterStore> {
        let mut out = ParameterStore::new();
        let full = format!("{prefix}/");
        for (name, shape, data) in &self.entries {
            if let Some(stripped) = name.strip_prefix(&full) {
                let tensor = match shape.len() {
                    2 => Tensor::matrix(shape[0], shape[1], data.clone()),
                    _ => Tensor::vector(data.clone()),
                };
                out.add(stripped, tensor);
            }
        }
        if out.is_empty() {
            None
        } else {
            Some(out)
        }
    }

    /// Stores one f64 of run metadata as a single-element tensor.
    pub fn push_scalar(&mut self, name: &str, value: f64) {
        self.push(name, vec![1], vec![value]);
    }

    pub fn scalar(&self, name: &str) -> Option<f64> {
        self.get(name).and_then(|(_, _, data)| data.first().copied())
    }

    pub fn get(&self, name: &str) -> Option<&(String, Vec<usize>, Vec<f64>)> {
        self.entries.iter().find(|(n, _, _)| n == name)
    }

    pub fn entries(&self) -> &[(String, Vec<usize>, Vec<f64>)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        for (name, shape, data) in &self.entries {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(shape.len() as u32).to_le_bytes());
            for &dim in shape {
                out.extend_from_slice(&(dim as u32).to_le_bytes());
            }
            for &v in data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CheckpointError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let version = r.take(1)?[0];
        if version != VERSION {
            return Err(CheckpointError::BadVersion(version));
        }
        let mut bundle = CheckpointBundle::new();
        while !r.done() {
            let name_len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|_| CheckpointError::BadName)?
                .to_string();
            let rank = r.u32()? as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(r.u32()? as usize);
            }
            let count: usize = shape.iter().product();
            let mut data = Vec::with_capacity(count);
            for _ in 0..count {
                data.push(f64::from_le_bytes(r.take(8)?.try_into().expect("take returned 8 bytes")));
            }
            bundle.entries.push((name, shape, data));
        }
        Ok(bundle)
    }

    pub fn write_file(&self, path: &Path) -> Result<(), CheckpointError> {
        std::fs::write(path, self.encode())?;
        Ok(())
    }

    pub fn read_file(path: &Path) -> Result<Self, CheckpointError> {
        CheckpointBundle::decode(&std::fs::read(path)?)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        if self.pos + n > self.bytes.len() {
            return Err(CheckpointError::Truncated);
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("take returned 4 bytes")))
    }

    fn done(&self) -> bool {
        self.pos == self.bytes.len()
    }
}
