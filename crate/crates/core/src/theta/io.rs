//! Binary operator files.
//!
//! Little-endian layout: magic `WBTH`, version `u32`, dim `u64`, nnz `u64`,
//! levels `u32`, family name (`u32` length and bytes), kernel id (`u32`
//! length and bytes), `dim + 1` row offsets (`u64`), `nnz` column indices (`u64`),
//! `nnz` values (`f64`), then the CRC-32 of every preceding byte.

use std::io::Write;
use std::path::Path;

use super::{Budget, SparseTheta, ThetaMeta};
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

const MAGIC: &[u8; 4] = b"WBTH";
const VERSION: u32 = 1;

pub fn encode_theta(theta: &SparseTheta) -> Vec<u8> {
    let m = theta.matrix();
    let meta = theta.meta();
    let mut buf = Vec::with_capacity(64 + 8 * (m.rows() + 1) + 16 * m.nnz());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    buf.extend_from_slice(&(m.nnz() as u64).to_le_bytes());
    buf.extend_from_slice(&(meta.levels as u32).to_le_bytes());
    for s in [&meta.family, &meta.kernel_id] {
        buf.extend_from_slice(&(s.len() as u32).to_le_bytes());
        buf.extend_from_slice(s.as_bytes());
    }
    for &o in m.row_ptr() {
        buf.extend_from_slice(&(o as u64).to_le_bytes());
    }
    for &c in m.col_idx() {
        buf.extend_from_slice(&(c as u64).to_le_bytes());
    }
    for &v in m.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    buf
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format("truncated operator file".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        String::from_utf8(self.take(len)?.to_vec())
            .map_err(|_| Error::Format("header string is not UTF-8".into()))
    }
}

pub fn decode_theta(bytes: &[u8]) -> Result<SparseTheta> {
    let mut rd = Reader { bytes, pos: 0 };
    if rd.take(4)? != MAGIC {
        return Err(Error::Format("bad magic, not an operator file".into()));
    }
    let version = rd.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let dim = usize::try_from(rd.u64()?).map_err(|_| Error::Format("dim overflow".into()))?;
    let nnz = usize::try_from(rd.u64()?).map_err(|_| Error::Format("nnz overflow".into()))?;
    let levels = rd.u32()? as usize;
    let family = rd.string()?;
    let kernel_id = rd.string()?;
    let body = dim
        .checked_add(1)
        .and_then(|d| d.checked_mul(8))
        .and_then(|a| nnz.checked_mul(16).and_then(|b| a.checked_add(b)))
        .ok_or_else(|| Error::Format("size overflow".into()))?;
    let payload_end = rd
        .pos
        .checked_add(body)
        .ok_or_else(|| Error::Format("size overflow".into()))?;
    if bytes.len() != payload_end + 4 {
        return Err(Error::Format(format!(
            "operator file has {} bytes, header implies {}",
            bytes.len(),
            payload_end + 4
        )));
    }
    let stored = u32::from_le_bytes(bytes[payload_end..].try_into().unwrap());
    let computed = crc32fast::hash(&bytes[..payload_end]);
    if stored != computed {
        return Err(Error::Checksum { stored, computed });
    }
    let row_ptr = (0..=dim)
        .map(|_| rd.u64().map(|v| v as usize))
        .collect::<Result<Vec<_>>>()?;
    let col_idx = (0..nnz)
        .map(|_| {
            rd.u64().and_then(|v| u32::try_from(v).map_err(|_| Error::Format("column index overflow".into())))
        })
        .collect::<Result<Vec<_>>>()?;
    let values = (0..nnz)
        .map(|_| rd.take(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())))
        .collect::<Result<Vec<_>>>()?;
    let matrix = CsrMatrix::new(dim, dim, row_ptr, col_idx, values)?;
    SparseTheta::new(
        matrix,
        ThetaMeta {
            family,
            levels,
            kernel_id,
            budget: Budget::Unspecified,
        },
    )
}

pub fn save_theta(theta: &SparseTheta, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_theta(theta);
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(&bytes))
        .map_err(|e| Error::io(path, e))
}

/// Loads an operator file. The entry budget is not part of the format and
/// comes back as [`Budget::Unspecified`].
pub fn load_theta(path: impl AsRef<Path>) -> Result<SparseTheta> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_theta(&bytes)
}
