//! `DCTW` weights files.
//!
//! Layout (integers little-endian):
//! `"DCTW"` | version u8 | descriptor length u32 | descriptor UTF-8 |
//! tensor count u32 | per tensor: name length u32, name UTF-8, 4 × u32 dims,
//! f32 values.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::NnError;
use crate::model::{LayerParams, Model};
use crate::scalar::Scalar;
use crate::tensor::Tensor4;

pub const WEIGHTS_MAGIC: &[u8; 4] = b"DCTW";
pub const WEIGHTS_VERSION: u8 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub dims: [u32; 4],
    pub values: Vec<f32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeightsFile {
    pub descriptor: String,
    pub tensors: Vec<NamedTensor>,
}

impl WeightsFile {
    pub fn write_to(&self, w: &mut impl Write) -> Result<(), NnError> {
        w.write_all(WEIGHTS_MAGIC)?;
        w.write_all(&[WEIGHTS_VERSION])?;
        write_str(w, &self.descriptor)?;
        w.write_all(&(self.tensors.len() as u32).to_le_bytes())?;
        for t in &self.tensors {
            write_str(w, &t.name)?;
            for d in t.dims {
                w.write_all(&d.to_le_bytes())?;
            }
            let mut buf = Vec::with_capacity(t.values.len() * 4);
            for v in &t.values {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self, NnError> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        Self::parse(&bytes)
    }

    pub fn parse(bytes: &[u8]) -> Result<Self, NnError> {
        let mut cur = Cursor { bytes, pos: 0 };
        if cur.take(4)? != WEIGHTS_MAGIC {
            return Err(NnError::BadWeights("bad magic".into()));
        }
        let version = cur.take(1)?[0];
        if version != WEIGHTS_VERSION {
            return Err(NnError::BadWeights(format!("unsupported version {version}")));
        }
        let descriptor = cur.string()?;
        let count = cur.u32()? as usize;
        let mut tensors = Vec::new();
        for _ in 0..count {
            let name = cur.string()?;
            let dims = [cur.u32()?, cur.u32()?, cur.u32()?, cur.u32()?];
            let len = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d as usize));
            let len = len.filter(|&l| l > 0).ok_or_else(|| NnError::BadWeights(format!("{name}: bad dims {dims:?}")))?;
            let raw = cur.take(len.checked_mul(4).ok_or_else(|| NnError::BadWeights("tensor too large".into()))?)?;
            let values = raw.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
            tensors.push(NamedTensor { name, dims, values });
        }
        if cur.pos != bytes.len() {
            return Err(NnError::BadWeights(format!("{} trailing bytes", bytes.len() - cur.pos)));
        }
        Ok(Self { descriptor, tensors })
    }

    pub fn read(path: &Path) -> Result<Self, NnError> {
        Self::parse(&fs::read(path)?)
    }

    /// Writes to a sibling temporary file and renames it into place, so a
    /// reader never sees a partial file.
    pub fn write_atomic(&self, path: &Path) -> Result<(), NnError> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        let mut tmp = path.as_os_str().to_owned();
        tmp.push(".tmp");
        let tmp = std::path::PathBuf::from(tmp);
        fs::write(&tmp, &buf)?;
        fs::rename(&tmp, path)?;
        Ok(())
    }
}

fn write_str(w: &mut impl Write, s: &str) -> Result<(), NnError> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NnError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| NnError::BadWeights("truncated".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, NnError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn string(&mut self) -> Result<String, NnError> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| NnError::BadWeights("name is not UTF-8".into()))
    }
}

fn vector(name: String, v: &[impl Scalar]) -> NamedTensor {
    NamedTensor { name, dims: [v.len() as u32, 1, 1, 1], values: v.iter().map(|x| x.as_f64() as f32).collect() }
}

impl<T: Scalar> Model<T> {
    /// Every parameter and running statistic as named tensors.
    pub fn to_weights(&self) -> WeightsFile {
        let mut tensors = Vec::new();
        for (layer, p) in self.graph().layers().iter().zip(self.params()) {
            let n = &layer.name;
            match p {
                LayerParams::None => {}
                LayerParams::Conv { weight, bias } => {
                    let s = weight.shape();
                    tensors.push(NamedTensor {
                        name: format!("{n}.weight"),
                        dims: s.map(|d| d as u32),
                        values: weight.data().iter().map(|x| x.as_f64() as f32).collect(),
                    });
                    tensors.push(vector(format!("{n}.bias"), bias));
                }
                LayerParams::BatchNorm(st) => {
                    tensors.push(vector(format!("{n}.scale"), &st.scale));
                    tensors.push(vector(format!("{n}.shift"), &st.shift));
                    tensors.push(vector(format!("{n}.running_mean"), &st.running_mean));
                    tensors.push(vector(format!("{n}.running_var"), &st.running_var));
                    tensors.push(NamedTensor { name: format!("{n}.updates"), dims: [1, 1, 1, 1], values: vec![st.updates as f32] });
                }
            }
        }
        WeightsFile { descriptor: self.graph().descriptor().to_string(), tensors }
    }

    /// Replaces all parameters from a weights file written for the same
    /// architecture.
    pub fn load_weights(&mut self, file: &WeightsFile) -> Result<(), NnError> {
        if file.descriptor != self.graph().descriptor() {
            return Err(NnError::ArchitectureMismatch {
                expected: self.graph().descriptor().to_string(),
                found: file.descriptor.clone(),
            });
        }
        let expected = self.to_weights();
        if expected.tensors.len() != file.tensors.len() {
            return Err(NnError::BadWeights(format!("{} tensors, expected {}", file.tensors.len(), expected.tensors.len())));
        }
        for (e, f) in expected.tensors.iter().zip(&file.tensors) {
            if e.name != f.name || e.dims != f.dims {
                return Err(NnError::BadWeights(format!("tensor {} {:?} where {} {:?} was expected", f.name, f.dims, e.name, e.dims)));
            }
        }
        let mut it = file.tensors.iter();
        let mut next = || it.next().expect("counts checked").values.iter().map(|&v| T::from_f64(v as f64)).collect::<Vec<T>>();
        for p in self.params_mut() {
            match p {
                LayerParams::None => {}
                LayerParams::Conv { weight, bias } => {
                    *weight = Tensor4::from_vec(weight.shape(), next())?;
                    *bias = next();
                }
                LayerParams::BatchNorm(st) => {
                    st.scale = next();
                    st.shift = next();
                    st.running_mean = next();
                    st.running_var = next();
                    st.updates = next()[0].as_f64() as u64;
                }
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), NnError> {
        self.to_weights().write_atomic(path)
    }

    pub fn load(&mut self, path: &Path) -> Result<(), NnError> {
        self.load_weights(&WeightsFile::read(path)?)
    }
}
