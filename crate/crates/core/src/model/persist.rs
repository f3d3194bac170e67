//! Binary model container.
//!
//! Layout (little-endian):
//! `"DAUT" | version u32 | payload_len u64 | payload | crc32(all preceding) u32`
//! where the payload is
//! `config_len u32 | config JSON | n_tensors u32 | tensor*` and each tensor is
//! `name_len u16 | name | ndim u8 | dim u64* | f64*`.

use std::path::Path;

use super::config::DeepAutoConfig;
use super::network::DeepAutoParams;
use crate::dataprep::ScalerParams;
use crate::error::{FormatError, Result};
use crate::neuralnet::ParamSet;

pub const MAGIC: &[u8; 4] = b"DAUT";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 16;

/// A trained model with everything needed to serve it.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: DeepAutoConfig,
    pub params: DeepAutoParams,
    pub scaler: ScalerParams,
}

fn put_tensor(out: &mut Vec<u8>, name: &str, shape: &[usize], data: &[f64]) {
    out.extend_from_slice(&(name.len() as u16).to_le_bytes());
    out.extend_from_slice(name.as_bytes());
    out.push(shape.len() as u8);
    for d in shape {
        out.extend_from_slice(&(*d as u64).to_le_bytes());
    }
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    /// Offset of `buf[0]` in the file, for error positions.
    base: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], FormatError> {
        if self.buf.len() - self.pos < n {
            return Err(FormatError::Truncated(self.base + self.buf.len()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, FormatError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, FormatError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, FormatError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn tensor(&mut self) -> Result<(String, Vec<usize>, Vec<f64>), FormatError> {
        let name_len = self.u16()? as usize;
        let name = std::str::from_utf8(self.take(name_len)?)
            .map_err(|_| FormatError::Malformed("tensor name is not UTF-8".into()))?
            .to_string();
        let ndim = self.u8()? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(self.u64()? as usize);
        }
        let n = shape
            .iter()
            .try_fold(1usize, |a, d| a.checked_mul(*d))
            .filter(|n| n.checked_mul(8).is_some())
            .ok_or_else(|| FormatError::Malformed(format!("tensor {name} is too large")))?;
        let bytes = self.take(n * 8)?;
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Ok((name, shape, data))
    }
}

fn scaler_tensors(s: &ScalerParams) -> [(&'static str, Vec<f64>); 3] {
    [
        ("scaler.min", s.min.clone()),
        ("scaler.max", s.max.clone()),
        ("scaler.constant", s.constant.iter().map(|c| f64::from(u8::from(*c))).collect()),
    ]
}

impl Model {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut payload = Vec::new();
        let cfg = self.config.to_canonical_json();
        payload.extend_from_slice(&(cfg.len() as u32).to_le_bytes());
        payload.extend_from_slice(cfg.as_bytes());
        let mut n_tensors = 3;
        self.params.visit("", &mut |_, _, _| n_tensors += 1);
        payload.extend_from_slice(&(n_tensors as u32).to_le_bytes());
        for (name, data) in scaler_tensors(&self.scaler) {
            put_tensor(&mut payload, name, &[data.len()], &data);
        }
        self.params
            .visit("", &mut |name, shape, data| put_tensor(&mut payload, &name, shape, data));

        let mut out = Vec::with_capacity(HEADER_LEN + payload.len() + 4);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
        out.extend_from_slice(&payload);
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 || &bytes[..4] != MAGIC {
            return Err(FormatError::BadMagic.into());
        }
        let mut hdr = Reader { buf: bytes, pos: 4, base: 0 };
        let version = hdr.u32()?;
        if version != FORMAT_VERSION {
            return Err(FormatError::UnsupportedVersion(version).into());
        }
        let payload_len = hdr.u64()? as usize;
        let total = HEADER_LEN
            .checked_add(payload_len)
            .and_then(|n| n.checked_add(4))
            .ok_or(FormatError::Malformed("payload length overflows".into()))?;
        if bytes.len() < total {
            return Err(FormatError::Truncated(bytes.len()).into());
        }
        if bytes.len() > total {
            return Err(FormatError::Malformed(format!("{} trailing bytes", bytes.len() - total)).into());
        }
        let stored = u32::from_le_bytes(bytes[total - 4..].try_into().expect("4 bytes"));
        let computed = crc32fast::hash(&bytes[..total - 4]);
        if stored != computed {
            return Err(FormatError::Checksum { stored, computed }.into());
        }

        let mut r = Reader {
            buf: &bytes[HEADER_LEN..total - 4],
            pos: 0,
            base: HEADER_LEN,
        };
        let cfg_len = r.u32()? as usize;
        let cfg_text = std::str::from_utf8(r.take(cfg_len)?)
            .map_err(|_| FormatError::Malformed("config is not UTF-8".into()))?;
        let config = DeepAutoConfig::from_json(cfg_text)
            .map_err(|e| FormatError::Malformed(format!("config: {e}")))?;

        let n_tensors = r.u32()? as usize;
        let mut tensors = Vec::with_capacity(n_tensors.min(1024));
        for _ in 0..n_tensors {
            tensors.push(r.tensor()?);
        }
        if r.pos != r.buf.len() {
            return Err(FormatError::Malformed("unread bytes after tensors".into()).into());
        }

        let mut it = tensors.into_iter();
        let mut scaler_part = |want: &str| -> Result<Vec<f64>> {
            match it.next() {
                Some((name, shape, data)) if name == want && shape == [config.input_dim] => Ok(data),
                _ => Err(FormatError::Malformed(format!("expected {want}")).into()),
            }
        };
        let scaler = ScalerParams {
            min: scaler_part("scaler.min")?,
            max: scaler_part("scaler.max")?,
            constant: scaler_part("scaler.constant")?.iter().map(|v| *v != 0.0).collect(),
        };

        // The file's config defines the architecture; tensors must match it exactly.
        let mut params = DeepAutoParams::zeros(&config);
        let mut expected = Vec::new();
        params.visit("", &mut |n, s, _| expected.push((n, s.to_vec())));
        let rest: Vec<_> = it.collect();
        if rest.len() != expected.len() {
            return Err(FormatError::Malformed(format!(
                "{} parameter tensors, config implies {}",
                rest.len(),
                expected.len()
            ))
            .into());
        }
        for ((name, shape, _), (want_name, want_shape)) in rest.iter().zip(&expected) {
            if name != want_name || shape != want_shape {
                return Err(FormatError::Malformed(format!("tensor {name} {shape:?}, expected {want_name} {want_shape:?}")).into());
            }
        }
        let mut data = rest.into_iter().map(|(_, _, d)| d);
        params.visit_mut(&mut |slot| slot.copy_from_slice(&data.next().expect("counted above")));
        Ok(Model { config, params, scaler })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Self::from_bytes(&bytes)
    }
}
