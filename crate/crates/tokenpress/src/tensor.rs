//! Minimal binary tensor container.
//!
//! ```text
//! offset  size     field
//! 0       4        magic  b"TKZT"
//! 4       2        version (u16 LE, currently 1)
//! 6       1        dtype   (1 = f32)
//! 7       1        ndim    (>= 1)
//! 8       4*ndim   dims    (u32 LE each)
//! ...     4*prod   payload (row-major IEEE-754 f32 LE)
//! ```
//!
//! Nothing may follow the payload.

use std::fs;
use std::path::Path;

use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"TKZT";
pub const VERSION: u16 = 1;
pub const DTYPE_F32: u8 = 1;
const FIXED_HEADER: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormatError {
    #[error("bad magic {found:?}, expected \"TKZT\"")]
    BadMagic { found: [u8; 4] },
    #[error("unsupported version {0}")]
    UnsupportedVersion(u16),
    #[error("unsupported dtype code {0}")]
    UnsupportedDtype(u8),
    #[error("tensor rank must be at least 1")]
    ZeroRank,
    #[error("truncated header: need {needed} bytes, have {available}")]
    TruncatedHeader { needed: usize, available: usize },
    #[error("payload is {found} bytes, dims require {expected}")]
    PayloadLength { expected: usize, found: usize },
}

impl FormatError {
    pub fn kind(&self) -> &'static str {
        match self {
            FormatError::BadMagic { .. } => "BadMagic",
            FormatError::UnsupportedVersion(_) => "UnsupportedVersion",
            FormatError::UnsupportedDtype(_) => "UnsupportedDtype",
            FormatError::ZeroRank => "ZeroRank",
            FormatError::TruncatedHeader { .. } => "TruncatedHeader",
            FormatError::PayloadLength { .. } => "PayloadLength",
        }
    }
}

/// A dense `f32` tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub dims: Vec<u32>,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn new(dims: Vec<u32>, data: Vec<f32>) -> Self {
        debug_assert_eq!(
            dims.iter().map(|&d| d as usize).product::<usize>(),
            data.len()
        );
        Tensor { dims, data }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f32>) -> Self {
        Self::new(vec![rows as u32, cols as u32], data)
    }

    pub fn vector(data: Vec<f32>) -> Self {
        Self::new(vec![data.len() as u32], data)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(FIXED_HEADER + 4 * self.dims.len() + 4 * self.data.len());
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(DTYPE_F32);
        out.push(self.dims.len() as u8);
        for d in &self.dims {
            out.extend_from_slice(&d.to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, FormatError> {
        let truncated = |needed| FormatError::TruncatedHeader {
            needed,
            available: bytes.len(),
        };
        // Check the magic first so foreign files are reported as such.
        if bytes.len() >= 4 && bytes[..4] != MAGIC {
            return Err(FormatError::BadMagic {
                found: bytes[..4].try_into().unwrap(),
            });
        }
        if bytes.len() < FIXED_HEADER {
            return Err(truncated(FIXED_HEADER));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != VERSION {
            return Err(FormatError::UnsupportedVersion(version));
        }
        if bytes[6] != DTYPE_F32 {
            return Err(FormatError::UnsupportedDtype(bytes[6]));
        }
        let ndim = bytes[7] as usize;
        if ndim == 0 {
            return Err(FormatError::ZeroRank);
        }
        let header = FIXED_HEADER + 4 * ndim;
        if bytes.len() < header {
            return Err(truncated(header));
        }
        let dims: Vec<u32> = bytes[FIXED_HEADER..header]
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let found = bytes.len() - header;
        let expected = dims
            .iter()
            .try_fold(4usize, |acc, &d| acc.checked_mul(d as usize))
            .unwrap_or(usize::MAX);
        if found != expected {
            return Err(FormatError::PayloadLength { expected, found });
        }
        let data = bytes[header..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Tensor { dims, data })
    }

    pub fn read(path: &Path) -> Result<Self, crate::Error> {
        let bytes = fs::read(path).map_err(|e| crate::Error::io(path, e))?;
        Tensor::from_bytes(&bytes).map_err(|source| crate::Error::Format {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn write(&self, path: &Path) -> Result<(), crate::Error> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| crate::Error::io(parent, e))?;
        }
        fs::write(path, self.to_bytes()).map_err(|e| crate::Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn layout_is_bit_exact() {
        let t = Tensor::matrix(1, 2, vec![1.0, -2.5]);
        let b = t.to_bytes();
        assert_eq!(
            b,
            [
                b'T', b'K', b'Z', b'T', 1, 0, 1, 2, // magic, version, dtype, ndim
                1, 0, 0, 0, 2, 0, 0, 0, // dims
                0x00, 0x00, 0x80, 0x3f, 0x00, 0x00, 0x20, 0xc0, // 1.0, -2.5
            ]
        );
    }

    #[test]
    fn corrupted_headers() {
        let good = Tensor::vector(vec![1.0, 2.0, 3.0]).to_bytes();

        let mut b = good.clone();
        b[0] = b'X';
        assert!(matches!(
            Tensor::from_bytes(&b),
            Err(FormatError::BadMagic { .. })
        ));

        let mut b = good.clone();
        b[4] = 2;
        assert_eq!(
            Tensor::from_bytes(&b),
            Err(FormatError::UnsupportedVersion(2))
        );

        let mut b = good.clone();
        b[6] = 2;
        assert_eq!(
            Tensor::from_bytes(&b),
            Err(FormatError::UnsupportedDtype(2))
        );

        let mut b = good.clone();
        b[7] = 0;
        assert_eq!(Tensor::from_bytes(&b), Err(FormatError::ZeroRank));

        let mut b = good.clone();
        b[7] = 5;
        assert!(matches!(
            Tensor::from_bytes(&b),
            Err(FormatError::TruncatedHeader { .. })
        ));

        assert!(matches!(
            Tensor::from_bytes(&good[..6]),
            Err(FormatError::TruncatedHeader { .. })
        ));

        assert_eq!(
            Tensor::from_bytes(&good[..good.len() - 1]),
            Err(FormatError::PayloadLength {
                expected: 12,
                found: 11
            })
        );
        let mut b = good;
        b.push(0);
        assert_eq!(
            Tensor::from_bytes(&b),
            Err(FormatError::PayloadLength {
                expected: 12,
                found: 13
            })
        );
    }

    proptest! {
        #[test]
        fn round_trip_is_bitwise(dims in proptest::collection::vec(1u32..5, 1..4), seed in any::<u32>()) {
            let n: usize = dims.iter().map(|&d| d as usize).product();
            let data: Vec<f32> = (0..n as u32)
                .map(|i| f32::from_bits(seed.wrapping_mul(2654435761).wrapping_add(i.wrapping_mul(40503))))
                .map(|v| if v.is_finite() { v } else { 0.5 })
                .collect();
            let t = Tensor::new(dims, data);
            let back = Tensor::from_bytes(&t.to_bytes()).unwrap();
            prop_assert_eq!(&back.dims, &t.dims);
            let a: Vec<u32> = back.data.iter().map(|v| v.to_bits()).collect();
            let b: Vec<u32> = t.data.iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(a, b);
        }
    }
}
