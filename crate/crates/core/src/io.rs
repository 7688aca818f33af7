//! Binary instance files.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! "PGL1"            4 bytes magic
//! version           u32 (= 1)
//! N, M              u32, u32
//! seed              u64
//! spec tag          u8   0 = half-space, 1 = interval union
//! spec payload      kappa: f64 | L: u32 then 2L f64 endpoints a_1 b_1 ... a_L b_L
//! entries           M*N f64, row-major
//! ```
//!
//! The instance digest is 64-bit FNV-1a over exactly these bytes.

use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{ConstraintSpec, DisorderInstance};

pub const MAGIC: &[u8; 4] = b"PGL1";
pub const VERSION: u32 = 1;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, b| (h ^ *b as u64).wrapping_mul(FNV_PRIME))
}

pub fn encode_instance(g: &DisorderInstance) -> Vec<u8> {
    let mut out = Vec::with_capacity(32 + 8 * g.entries().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(g.n() as u32).to_le_bytes());
    out.extend_from_slice(&(g.m() as u32).to_le_bytes());
    out.extend_from_slice(&g.seed().to_le_bytes());
    match g.spec() {
        ConstraintSpec::HalfSpace { kappa } => {
            out.push(0);
            out.extend_from_slice(&kappa.to_le_bytes());
        }
        ConstraintSpec::IntervalUnion(u) => {
            out.push(1);
            out.extend_from_slice(&(u.intervals().len() as u32).to_le_bytes());
            for (a, b) in u.intervals() {
                out.extend_from_slice(&a.to_le_bytes());
                out.extend_from_slice(&b.to_le_bytes());
            }
        }
    }
    for x in g.entries() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

pub fn instance_digest(g: &DisorderInstance) -> u64 {
    fnv1a64(&encode_instance(g))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize, expected_total: usize) -> Result<&'a [u8]> {
        if self.pos + len > self.bytes.len() {
            return Err(Error::Truncated {
                expected: expected_total.max(self.pos + len),
                found: self.bytes.len(),
            });
        }
        let s = &self.bytes[self.pos..self.pos + len];
        self.pos += len;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, 0)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, 0)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, 0)?.try_into().unwrap()))
    }
}

pub fn decode_instance(bytes: &[u8]) -> Result<DisorderInstance> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(4, 4)?;
    if magic != MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}")));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let n = r.u32()? as usize;
    let m = r.u32()? as usize;
    let seed = r.u64()?;
    let tag = r.take(1, 0)?[0];
    let spec = match tag {
        0 => ConstraintSpec::half_space(r.f64()?).map_err(|e| Error::Format(e.to_string()))?,
        1 => {
            let l = r.u32()? as usize;
            let mut iv = Vec::with_capacity(l.min(1 << 16));
            for _ in 0..l {
                iv.push((r.f64()?, r.f64()?));
            }
            ConstraintSpec::intervals(iv).map_err(|e| Error::Format(e.to_string()))?
        }
        t => return Err(Error::Format(format!("unknown spec tag {t}"))),
    };
    let body = n
        .checked_mul(m)
        .and_then(|x| x.checked_mul(8))
        .ok_or_else(|| Error::Format("matrix size overflows".into()))?;
    let expected = r.pos + body;
    let raw = r.take(body, expected)?;
    if r.pos != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after the matrix",
            bytes.len() - r.pos
        )));
    }
    let entries = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    DisorderInstance::from_entries(n, m, seed, spec, entries).map_err(|e| Error::Format(e.to_string()))
}

pub fn save_instance(path: impl AsRef<Path>, g: &DisorderInstance) -> Result<u64> {
    let bytes = encode_instance(g);
    std::fs::write(path.as_ref(), &bytes).map_err(|e| Error::io(path.as_ref(), e))?;
    Ok(fnv1a64(&bytes))
}

pub fn load_instance(path: impl AsRef<Path>) -> Result<DisorderInstance> {
    let bytes = std::fs::read(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
    decode_instance(&bytes)
}
