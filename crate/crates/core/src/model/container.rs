//! Single-file tensor container.
//!
//! Layout (little-endian):
//!
//! | bytes        | content                                        |
//! |--------------|------------------------------------------------|
//! | 8            | magic `IDCAEMOD`                               |
//! | 4            | format version (`u32`)                         |
//! | 4            | header length `H` (`u32`)                      |
//! | H            | UTF-8 header                                   |
//! | 8 * N        | payload, `f64` values                          |
//! | 4            | CRC-32 of every preceding byte (`u32`)         |
//!
//! Header lines are either `key = value` metadata or
//! `@tensor <name> <d0,d1,..> <offset> <count>` with offset and count in
//! payload elements.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{ContainerError, Error, Result};
use crate::scalar::Real;
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 8] = b"IDCAEMOD";
pub const CONTAINER_VERSION: u32 = 1;
const PREFIX: usize = 16;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Container {
    pub meta: BTreeMap<String, String>,
    pub tensors: Vec<(String, Tensor<f64>)>,
}

impl Container {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set_meta(&mut self, key: impl Into<String>, value: impl ToString) {
        self.meta.insert(key.into(), value.to_string());
    }

    pub fn push<T: Real>(&mut self, name: impl Into<String>, t: &Tensor<T>) {
        let data = t.data().iter().map(|v| v.to_f64_lossless()).collect();
        self.tensors.push((name.into(), Tensor::from_vec(t.shape(), data).expect("shape")));
    }

    pub fn meta(&self, key: &str) -> Result<&str> {
        self.meta
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| ContainerError::Header(format!("missing key `{key}`")).into())
    }

    pub fn parse_meta<V: std::str::FromStr>(&self, key: &str) -> Result<V> {
        let raw = self.meta(key)?;
        raw.parse().map_err(|_| ContainerError::Header(format!("bad value for `{key}`: `{raw}`")).into())
    }

    pub fn tensor<T: Real>(&self, name: &str) -> Result<Tensor<T>> {
        let (_, t) = self
            .tensors
            .iter()
            .find(|(n, _)| n == name)
            .ok_or_else(|| ContainerError::Header(format!("missing tensor `{name}`")))?;
        Tensor::from_vec(t.shape(), t.data().iter().map(|&v| T::from_f64_lossy(v)).collect())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut header = String::new();
        for (k, v) in &self.meta {
            if k.contains(['\n', '=']) || k.starts_with('@') || v.contains('\n') {
                return Err(Error::validation(format!("metadata `{k}` cannot be stored in a container header")));
            }
            let _ = writeln!(header, "{k} = {v}");
        }
        let mut offset = 0usize;
        for (name, t) in &self.tensors {
            if name.contains(char::is_whitespace) {
                return Err(Error::validation(format!("tensor name `{name}` contains whitespace")));
            }
            let dims: Vec<String> = t.shape().iter().map(usize::to_string).collect();
            let _ = writeln!(header, "@tensor {name} {} {offset} {}", dims.join(","), t.len());
            offset += t.len();
        }
        let mut out = Vec::with_capacity(PREFIX + header.len() + 8 * offset + 4);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&CONTAINER_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(header.as_bytes());
        for (_, t) in &self.tensors {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 || &bytes[..8] != MAGIC {
            return Err(ContainerError::BadMagic.into());
        }
        if bytes.len() < PREFIX {
            return Err(ContainerError::Truncated { expected: PREFIX, found: bytes.len() }.into());
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != CONTAINER_VERSION {
            return Err(ContainerError::VersionMismatch { found: version, expected: CONTAINER_VERSION }.into());
        }
        let header_len = u32::from_le_bytes(bytes[12..16].try_into().expect("4 bytes")) as usize;
        if bytes.len() < PREFIX + header_len {
            return Err(ContainerError::Truncated { expected: PREFIX + header_len + 4, found: bytes.len() }.into());
        }
        let header = std::str::from_utf8(&bytes[PREFIX..PREFIX + header_len])
            .map_err(|_| ContainerError::Header("header is not UTF-8".into()))?;

        let mut meta = BTreeMap::new();
        let mut layout = Vec::new();
        let mut total = 0usize;
        for line in header.lines().filter(|l| !l.is_empty()) {
            if let Some(rest) = line.strip_prefix("@tensor ") {
                let parts: Vec<&str> = rest.split(' ').collect();
                let bad = || ContainerError::Header(format!("bad tensor line `{line}`"));
                if parts.len() != 4 {
                    return Err(bad().into());
                }
                let shape: Vec<usize> = if parts[1].is_empty() {
                    Vec::new()
                } else {
                    parts[1].split(',').map(str::parse).collect::<std::result::Result<_, _>>().map_err(|_| bad())?
                };
                let offset: usize = parts[2].parse().map_err(|_| bad())?;
                let count: usize = parts[3].parse().map_err(|_| bad())?;
                if shape.iter().product::<usize>() != count || offset != total {
                    return Err(bad().into());
                }
                total += count;
                layout.push((parts[0].to_string(), shape, offset, count));
            } else {
                let (k, v) = line
                    .split_once(" = ")
                    .ok_or_else(|| ContainerError::Header(format!("bad metadata line `{line}`")))?;
                meta.insert(k.to_string(), v.to_string());
            }
        }
        let expected = PREFIX + header_len + 8 * total + 4;
        if bytes.len() < expected {
            return Err(ContainerError::Truncated { expected, found: bytes.len() }.into());
        }
        if bytes.len() > expected {
            return Err(ContainerError::Header(format!("{} trailing bytes", bytes.len() - expected)).into());
        }
        let stored = u32::from_le_bytes(bytes[expected - 4..].try_into().expect("4 bytes"));
        let computed = crc32fast::hash(&bytes[..expected - 4]);
        if stored != computed {
            return Err(ContainerError::Checksum { stored, computed }.into());
        }
        let payload = &bytes[PREFIX + header_len..expected - 4];
        let tensors = layout
            .into_iter()
            .map(|(name, shape, offset, count)| {
                let data = payload[offset * 8..(offset + count) * 8]
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                    .collect();
                (name, Tensor::from_vec(&shape, data).expect("validated shape"))
            })
            .collect();
        Ok(Self { meta, tensors })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_bytes(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
    }
}
