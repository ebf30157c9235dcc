//! `IAWT` parameter container.
//!
//! ```text
//! magic    4 bytes  "IAWT"
//! version  u16 LE   1
//! count    u32 LE
//! count × { name_len u16 LE, name UTF-8, rank u8, rank × dim u32 LE,
//!           product(dims) × f32 LE }
//! ```

use std::path::Path;

use crate::bytes::{read_file, write_file, ByteReader};
use crate::error::{Error, Result};
use crate::nn::ParamSet;
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"IAWT";
pub const VERSION: u16 = 1;

pub fn encode_params(params: &ParamSet<f32>) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for (name, t) in params.iter() {
        let name_len =
            u16::try_from(name.len()).map_err(|_| Error::Config(format!("parameter name too long: {name}")))?;
        let rank = u8::try_from(t.rank()).map_err(|_| Error::InvalidShape(t.shape().to_vec()))?;
        out.extend_from_slice(&name_len.to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(rank);
        for &d in t.shape() {
            let d = u32::try_from(d).map_err(|_| Error::InvalidShape(t.shape().to_vec()))?;
            out.extend_from_slice(&d.to_le_bytes());
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub(crate) fn decode_from(r: &mut ByteReader<'_>) -> Result<ParamSet<f32>> {
    if r.take(4)? != MAGIC {
        return Err(Error::BadMagic(r.path().to_path_buf()));
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(Error::UnsupportedVersion {
            path: r.path().to_path_buf(),
            version,
        });
    }
    let count = r.u32()?;
    let mut params = ParamSet::new();
    for _ in 0..count {
        let name_len = r.u16()? as usize;
        let name = r.utf8(name_len)?;
        let rank = r.u8()? as usize;
        let dims = (0..rank)
            .map(|_| r.u32().map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let len = dims.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
        let len = len.ok_or_else(|| Error::InvalidShape(dims.clone()))?;
        let data = r.f32s(len)?;
        params.push(name, Tensor::from_vec(&dims, data)?)?;
    }
    Ok(params)
}

pub fn decode_params(bytes: &[u8], origin: &Path) -> Result<ParamSet<f32>> {
    let mut r = ByteReader::new(bytes, origin);
    let params = decode_from(&mut r)?;
    if r.remaining() != 0 {
        return Err(Error::Format {
            path: origin.to_path_buf(),
            msg: format!("{} trailing bytes", r.remaining()),
        });
    }
    Ok(params)
}

pub fn write_params(path: &Path, params: &ParamSet<f32>) -> Result<()> {
    write_file(path, &encode_params(params)?)
}

pub fn read_params(path: &Path) -> Result<ParamSet<f32>> {
    decode_params(&read_file(path)?, path)
}
