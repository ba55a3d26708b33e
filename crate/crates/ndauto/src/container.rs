//! The `SVC1` binary container: an ordered list of named arrays.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic  "SVC1"                     4 bytes
//! count  u64
//! per record:
//!   name_len u64, name bytes (UTF-8)
//!   rank     u64
//!   dims     rank x u64
//!   prec     u8   (0 = double, 1 = single)
//!   values   numel x f64 / f32, row-major
//! ```
//!
//! Round-trips are bitwise lossless: single-precision arrays hold only values
//! exactly representable as `f32`.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::array::{Array, Precision};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"SVC1";

pub fn serialize(records: &[(String, Array)]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(records.len() as u64).to_le_bytes());
    for (name, array) in records {
        let name_bytes = name.as_bytes();
        out.extend_from_slice(&(name_bytes.len() as u64).to_le_bytes());
        out.extend_from_slice(name_bytes);
        out.extend_from_slice(&(array.rank() as u64).to_le_bytes());
        for &d in array.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        out.push(array.precision().tag());
        match array.precision() {
            Precision::Double => {
                for &v in array.data() {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
            Precision::Single => {
                for &v in array.data() {
                    out.extend_from_slice(&(v as f32).to_le_bytes());
                }
            }
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Container(format!(
                "truncated container: wanted {n} bytes at offset {}",
                self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        let b = self.take(8)?;
        Ok(u64::from_le_bytes(b.try_into().unwrap()))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
}

pub fn deserialize(bytes: &[u8]) -> Result<Vec<(String, Array)>> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4)? != MAGIC {
        return Err(Error::Container("bad magic, not an SVC1 container".into()));
    }
    let count = cur.u64()? as usize;
    let mut records = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        let name_len = cur.u64()? as usize;
        let name = std::str::from_utf8(cur.take(name_len)?)
            .map_err(|e| Error::Container(format!("record name is not UTF-8: {e}")))?
            .to_string();
        let rank = cur.u64()? as usize;
        let mut shape = Vec::with_capacity(rank);
        let mut numel: usize = 1;
        for _ in 0..rank {
            let d = cur.u64()? as usize;
            numel = numel
                .checked_mul(d)
                .ok_or_else(|| Error::Container(format!("dimension overflow in record {name:?}")))?;
            shape.push(d);
        }
        let precision = Precision::from_tag(cur.u8()?)?;
        let mut data = Vec::with_capacity(numel);
        match precision {
            Precision::Double => {
                let raw = cur.take(numel * 8)?;
                for chunk in raw.chunks_exact(8) {
                    data.push(f64::from_le_bytes(chunk.try_into().unwrap()));
                }
            }
            Precision::Single => {
                let raw = cur.take(numel * 4)?;
                for chunk in raw.chunks_exact(4) {
                    data.push(f32::from_le_bytes(chunk.try_into().unwrap()) as f64);
                }
            }
        }
        let mut array = Array::from_vec(&shape, data)?;
        if precision == Precision::Single {
            array = array.with_precision(Precision::Single);
        }
        records.push((name, array));
    }
    if cur.pos != bytes.len() {
        return Err(Error::Container(format!(
            "{} trailing bytes after last record",
            bytes.len() - cur.pos
        )));
    }
    Ok(records)
}

pub fn write_container(path: &Path, records: &[(String, Array)]) -> Result<()> {
    let bytes = serialize(records);
    let mut f = fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}

pub fn read_container(path: &Path) -> Result<Vec<(String, Array)>> {
    let mut f = fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut bytes = Vec::new();
    f.read_to_end(&mut bytes).map_err(|e| Error::io(path.display().to_string(), e))?;
    deserialize(&bytes)
}

/// Finds a record by name in a deserialized container.
pub fn find<'a>(records: &'a [(String, Array)], name: &str) -> Result<&'a Array> {
    records
        .iter()
        .find(|(n, _)| n == name)
        .map(|(_, a)| a)
        .ok_or_else(|| Error::Container(format!("missing record {name:?}")))
}

/// SHA-256 over the canonical serialization of `records`.
pub fn fingerprint(records: &[(String, Array)]) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(serialize(records));
    hasher.finalize().into()
}

pub fn fingerprint_hex(records: &[(String, Array)]) -> String {
    hex(&fingerprint(records))
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
