//! QVOL: `QVOL1\n`, a one-line JSON header, then little-endian samples in
//! x-fastest order.

use std::path::Path;

use hire_core::{GridSpec, RoiMask, ScalarVolume};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const MAGIC: &[u8] = b"QVOL1\n";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    F32,
    U8,
}

impl Dtype {
    pub fn size(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::U8 => 1,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Dtype::F32 => "f32",
            Dtype::U8 => "u8",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Header {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub dtype: Dtype,
    pub order: String,
}

const ORDER: &str = "x-fastest";

#[derive(Clone, Debug, PartialEq)]
pub enum Qvol {
    Volume(ScalarVolume),
    Mask(RoiMask),
}

impl Qvol {
    pub fn grid(&self) -> &GridSpec {
        match self {
            Qvol::Volume(v) => v.grid(),
            Qvol::Mask(m) => m.grid(),
        }
    }

    pub fn dtype(&self) -> Dtype {
        match self {
            Qvol::Volume(_) => Dtype::F32,
            Qvol::Mask(_) => Dtype::U8,
        }
    }

    pub fn into_volume(self) -> Result<ScalarVolume> {
        match self {
            Qvol::Volume(v) => Ok(v),
            Qvol::Mask(_) => Err(CliError::WrongDtype {
                expected: "f32",
                found: "u8",
            }),
        }
    }

    pub fn into_mask(self) -> Result<RoiMask> {
        match self {
            Qvol::Mask(m) => Ok(m),
            Qvol::Volume(_) => Err(CliError::WrongDtype {
                expected: "u8",
                found: "f32",
            }),
        }
    }
}

fn header_line(grid: &GridSpec, dtype: Dtype) -> Vec<u8> {
    let header = Header {
        dims: grid.dims(),
        spacing: grid.spacing(),
        dtype,
        order: ORDER.into(),
    };
    let mut line = serde_json::to_vec(&header).expect("header serialises");
    line.push(b'\n');
    line
}

/// Samples are stored as f32, so values are rounded to nearest on the way out.
pub fn encode_volume(vol: &ScalarVolume) -> Vec<u8> {
    let mut out = MAGIC.to_vec();
    out.extend(header_line(vol.grid(), Dtype::F32));
    out.reserve(vol.as_slice().len() * 4);
    for &v in vol.as_slice() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn encode_mask(mask: &RoiMask) -> Vec<u8> {
    let mut out = MAGIC.to_vec();
    out.extend(header_line(mask.grid(), Dtype::U8));
    out.extend(mask.as_slice().iter().map(|&m| m as u8));
    out
}

pub fn decode(bytes: &[u8]) -> Result<Qvol> {
    let rest = bytes.strip_prefix(MAGIC).ok_or(CliError::BadMagic)?;
    let nl = rest
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| CliError::BadHeader("header line is not terminated".into()))?;
    let text = std::str::from_utf8(&rest[..nl]).map_err(|e| CliError::BadHeader(e.to_string()))?;
    let header: Header = serde_json::from_str(text).map_err(|e| CliError::BadHeader(e.to_string()))?;
    if header.order != ORDER {
        return Err(CliError::BadHeader(format!("unsupported order `{}`", header.order)));
    }
    let grid = GridSpec::new(header.dims, header.spacing).map_err(|e| CliError::BadHeader(e.to_string()))?;
    let payload = &rest[nl + 1..];
    let expected = grid.len() * header.dtype.size();
    if payload.len() < expected {
        return Err(CliError::TruncatedPayload {
            expected,
            found: payload.len(),
        });
    }
    if payload.len() > expected {
        return Err(CliError::TrailingBytes {
            extra: payload.len() - expected,
        });
    }
    match header.dtype {
        Dtype::F32 => {
            let data = payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
                .collect();
            Ok(Qvol::Volume(ScalarVolume::new(grid, data)?))
        }
        Dtype::U8 => {
            let member = payload
                .iter()
                .enumerate()
                .map(|(index, &value)| match value {
                    0 => Ok(false),
                    1 => Ok(true),
                    _ => Err(CliError::BadMaskValue { index, value }),
                })
                .collect::<Result<Vec<bool>>>()?;
            Ok(Qvol::Mask(RoiMask::new(grid, member)?))
        }
    }
}

pub fn encode(q: &Qvol) -> Vec<u8> {
    match q {
        Qvol::Volume(v) => encode_volume(v),
        Qvol::Mask(m) => encode_mask(m),
    }
}

pub fn write_volume(vol: &ScalarVolume, path: &Path) -> Result<()> {
    std::fs::write(path, encode_volume(vol)).map_err(|e| CliError::io(path, e))
}

pub fn write_mask(mask: &RoiMask, path: &Path) -> Result<()> {
    std::fs::write(path, encode_mask(mask)).map_err(|e| CliError::io(path, e))
}

pub fn read_qvol(path: &Path) -> Result<Qvol> {
    decode(&std::fs::read(path).map_err(|e| CliError::io(path, e))?)
}

pub fn read_volume(path: &Path) -> Result<ScalarVolume> {
    read_qvol(path)?.into_volume()
}

pub fn read_mask(path: &Path) -> Result<RoiMask> {
    read_qvol(path)?.into_mask()
}

/// Raw little-endian samples in x-fastest order, as produced by other tools.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RawType {
    F32,
    F64,
    U8,
}

pub fn import_raw(bytes: &[u8], grid: GridSpec, ty: RawType) -> Result<Qvol> {
    let size = match ty {
        RawType::F32 => 4,
        RawType::F64 => 8,
        RawType::U8 => 1,
    };
    let expected = grid.len() * size;
    if bytes.len() < expected {
        return Err(CliError::TruncatedPayload {
            expected,
            found: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(CliError::TrailingBytes {
            extra: bytes.len() - expected,
        });
    }
    Ok(match ty {
        RawType::F32 => {
            let data = bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                .collect();
            Qvol::Volume(ScalarVolume::new(grid, data)?)
        }
        RawType::F64 => {
            let data = bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            Qvol::Volume(ScalarVolume::new(grid, data)?)
        }
        RawType::U8 => Qvol::Mask(RoiMask::new(grid, bytes.iter().map(|&b| b != 0).collect())?),
    })
}

impl std::fmt::Display for Dtype {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}
