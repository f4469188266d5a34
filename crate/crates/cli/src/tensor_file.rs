//! Binary tensor file.
//!
//! Layout, all integers little-endian:
//!
//! | offset | size | field                                         |
//! |--------|------|-----------------------------------------------|
//! | 0      | 4    | magic `FT3D`                                  |
//! | 4      | 4    | version, u32 = 1                              |
//! | 8      | 4    | edge length `n`, u32                          |
//! | 12     | 1    | precision code: 0 double, 1 single, 2 custom  |
//! | 13     | 1    | mantissa bits (52, 23 or the custom width)    |
//! | 14     | ...  | `n³` interleaved `(re, im)` pairs, x fastest  |
//!
//! Payload values are `f32` for single precision and `f64` otherwise.
//! Custom-precision values are stored already rounded to their width.

use std::io::Write;
use std::path::Path;

use ft3d_core::{ComplexSample, PrecisionSpec, Tensor3};
use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"FT3D";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 14;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("bad magic {0:?}, expected \"FT3D\"")]
    BadMagic([u8; 4]),
    #[error("unsupported format version {0}")]
    BadVersion(u32),
    #[error("invalid precision code {code} with mantissa width {mantissa_bits}")]
    BadPrecision { code: u8, mantissa_bits: u8 },
    #[error("truncated file: expected {expected} bytes, found {found}")]
    Truncated { expected: u64, found: u64 },
    #[error("{0} unexpected trailing bytes after the payload")]
    TrailingBytes(u64),
    /// The header is well formed but the edge cannot be represented as a tensor.
    #[error("unsupported tensor edge {0}")]
    UnsupportedEdge(u32),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// A tensor together with the precision its values were produced at.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorFile {
    pub precision: PrecisionSpec,
    pub tensor: Tensor3,
}

impl TensorFile {
    pub fn new(precision: PrecisionSpec, tensor: Tensor3) -> Self {
        TensorFile { precision, tensor }
    }

    fn width(precision: PrecisionSpec) -> usize {
        match precision {
            PrecisionSpec::Single => 4,
            _ => 8,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let n = self.tensor.n();
        let width = Self::width(self.precision);
        let mut out = Vec::with_capacity(HEADER_LEN + n * n * n * 2 * width);
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(n as u32).to_le_bytes());
        out.push(self.precision.code());
        out.push(self.precision.mantissa_bits());
        for v in self.tensor.data() {
            let v = self.precision.round_complex(*v);
            match self.precision {
                PrecisionSpec::Single => {
                    out.extend_from_slice(&(v.re as f32).to_le_bytes());
                    out.extend_from_slice(&(v.im as f32).to_le_bytes());
                }
                _ => {
                    out.extend_from_slice(&v.re.to_le_bytes());
                    out.extend_from_slice(&v.im.to_le_bytes());
                }
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, FormatError> {
        if bytes.len() < HEADER_LEN {
            return Err(FormatError::Truncated { expected: HEADER_LEN as u64, found: bytes.len() as u64 });
        }
        let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
        if magic != MAGIC {
            return Err(FormatError::BadMagic(magic));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != VERSION {
            return Err(FormatError::BadVersion(version));
        }
        let n = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        let (code, mantissa_bits) = (bytes[12], bytes[13]);
        let precision = PrecisionSpec::from_code(code, mantissa_bits)
            .map_err(|_| FormatError::BadPrecision { code, mantissa_bits })?;

        let width = Self::width(precision) as u64;
        let expected = u64::from(n)
            .checked_pow(3)
            .and_then(|c| c.checked_mul(2 * width))
            .and_then(|c| c.checked_add(HEADER_LEN as u64))
            .unwrap_or(u64::MAX);
        let found = bytes.len() as u64;
        if found < expected {
            return Err(FormatError::Truncated { expected, found });
        }
        if found > expected {
            return Err(FormatError::TrailingBytes(found - expected));
        }

        let payload = &bytes[HEADER_LEN..];
        let data: Vec<ComplexSample> = match precision {
            PrecisionSpec::Single => payload
                .chunks_exact(8)
                .map(|c| {
                    let re = f32::from_le_bytes(c[0..4].try_into().unwrap());
                    let im = f32::from_le_bytes(c[4..8].try_into().unwrap());
                    ComplexSample::new(f64::from(re), f64::from(im))
                })
                .collect(),
            _ => payload
                .chunks_exact(16)
                .map(|c| {
                    let re = f64::from_le_bytes(c[0..8].try_into().unwrap());
                    let im = f64::from_le_bytes(c[8..16].try_into().unwrap());
                    ComplexSample::new(re, im)
                })
                .collect(),
        };
        let tensor = Tensor3::from_vec(n as usize, data).map_err(|_| FormatError::UnsupportedEdge(n))?;
        Ok(TensorFile { precision, tensor })
    }

    pub fn read(path: &Path) -> Result<Self, FormatError> {
        Self::decode(&std::fs::read(path)?)
    }

    /// Writes through a temporary file in the destination directory, so a
    /// failed write never leaves a partial file at `path`.
    pub fn write_atomic(&self, path: &Path) -> std::io::Result<()> {
        write_atomic(path, &self.encode())
    }
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
