//! NPW1 named-tensor container.
//!
//! Little-endian layout:
//!
//! ```text
//! "NPW1"            4 bytes
//! version           u32 (= 1)
//! tensor_count      u32
//! per tensor:
//!   name_len        u16
//!   name            UTF-8, name_len bytes
//!   dtype           u8 (0 = f32)
//!   ndim            u8
//!   dims            ndim x u32
//!   payload         product(dims) x f32, row-major
//! ```
//!
//! The same container carries model weights, precomputed masks and the
//! golden tensors used by the test suite.

use std::path::Path;
use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"NPW1";
pub const VERSION: u32 = 1;
const DTYPE_F32: u8 = 0;

#[derive(Debug, Error)]
pub enum ContainerError {
    #[error("bad magic: expected NPW1")]
    BadMagic,
    #[error("unsupported container version {0}")]
    UnsupportedVersion(u32),
    #[error("container truncated while reading {0}")]
    TruncatedContainer(&'static str),
    #[error("unsupported dtype {dtype} for tensor {name}")]
    UnsupportedDtype { name: String, dtype: u8 },
    #[error("tensor name is not valid UTF-8")]
    BadName,
    #[error("duplicate tensor {0}")]
    DuplicateTensor(String),
    #[error("missing tensor {0}")]
    MissingTensor(String),
    #[error("shape mismatch for {name}: {detail}")]
    ShapeMismatch { name: String, detail: String },
    #[error("trailing bytes after last tensor")]
    TrailingBytes,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: Vec<f32>) -> Self {
        assert_eq!(
            dims.iter().product::<usize>(),
            data.len(),
            "payload length does not match dims"
        );
        Self { dims, data }
    }

    pub fn zeros(dims: Vec<usize>) -> Self {
        let n = dims.iter().product();
        Self {
            dims,
            data: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Ordered collection of named tensors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Container {
    tensors: Vec<(String, Tensor)>,
}

impl Container {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts or replaces `name`.
    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) {
        let name = name.into();
        match self.tensors.iter_mut().find(|(n, _)| *n == name) {
            Some(slot) => slot.1 = tensor,
            None => self.tensors.push((name, tensor)),
        }
    }

    pub fn remove(&mut self, name: &str) -> Option<Tensor> {
        let idx = self.tensors.iter().position(|(n, _)| n == name)?;
        Some(self.tensors.remove(idx).1)
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn require(&self, name: &str) -> Result<&Tensor, ContainerError> {
        self.get(name)
            .ok_or_else(|| ContainerError::MissingTensor(name.to_string()))
    }

    /// Fetches `name` and checks its shape.
    pub fn require_shape(&self, name: &str, dims: &[usize]) -> Result<&Tensor, ContainerError> {
        let t = self.require(name)?;
        if t.dims != dims {
            return Err(ContainerError::ShapeMismatch {
                name: name.to_string(),
                detail: format!("expected {:?}, found {:?}", dims, t.dims),
            });
        }
        Ok(t)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.iter().map(|(n, _)| n.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.tensors.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (name, t) in &self.tensors {
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.push(DTYPE_F32);
            out.push(t.dims.len() as u8);
            for &d in &t.dims {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for &v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ContainerError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4, "magic")? != MAGIC {
            return Err(ContainerError::BadMagic);
        }
        let version = r.u32("version")?;
        if version != VERSION {
            return Err(ContainerError::UnsupportedVersion(version));
        }
        let count = r.u32("tensor count")?;
        let mut c = Container::new();
        for _ in 0..count {
            let name_len = r.u16("name length")? as usize;
            let name = std::str::from_utf8(r.take(name_len, "tensor name")?)
                .map_err(|_| ContainerError::BadName)?
                .to_string();
            let dtype = r.u8("dtype")?;
            if dtype != DTYPE_F32 {
                return Err(ContainerError::UnsupportedDtype { name, dtype });
            }
            let ndim = r.u8("ndim")? as usize;
            let dims = (0..ndim)
                .map(|_| r.u32("dims").map(|d| d as usize))
                .collect::<Result<Vec<_>, _>>()?;
            let n: usize = dims.iter().product();
            let payload = r.take(
                n.checked_mul(4)
                    .ok_or(ContainerError::TruncatedContainer("payload"))?,
                "payload",
            )?;
            let data = payload
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect();
            if c.get(&name).is_some() {
                return Err(ContainerError::DuplicateTensor(name));
            }
            c.tensors.push((name, Tensor { dims, data }));
        }
        if r.pos != bytes.len() {
            return Err(ContainerError::TrailingBytes);
        }
        Ok(c)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, ContainerError> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), ContainerError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], ContainerError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or(ContainerError::TruncatedContainer(what))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self, what: &'static str) -> Result<u8, ContainerError> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &'static str) -> Result<u16, ContainerError> {
        let b = self.take(2, what)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self, what: &'static str) -> Result<u32, ContainerError> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}
