//! Binary operator files.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! offset  size  field
//! 0       8     magic  b"LRSNSOP\0"
//! 8       2     version (u16) = 1
//! 10      1     kind: 0 = dense-gaussian, 1 = completion-mask
//! 11      1     reserved, 0
//! 12      8     n (u64)
//! 20      8     m (u64)
//! 28      8     seed (u64)
//! 36      ...   payload
//! ```
//!
//! Dense payload: `m` matrices, each `n²` f64 values in row-major order.
//! Mask payload: `m` pairs of u64 `(row, col)`.
//! Nothing may follow the payload.

use std::io::{Read, Write};

use nalgebra::DMatrix;

use super::{OperatorKind, SensingOperator};
use crate::error::{Error, Result};

pub const MAGIC: [u8; 8] = *b"LRSNSOP\0";
pub const VERSION: u16 = 1;

pub fn write_operator<W: Write>(op: &SensingOperator, mut w: W) -> Result<()> {
    let n = op.n();
    let m = op.m();
    w.write_all(&MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    let kind: u8 = match op.kind() {
        OperatorKind::DenseGaussian => 0,
        OperatorKind::CompletionMask => 1,
    };
    w.write_all(&[kind, 0])?;
    w.write_all(&(n as u64).to_le_bytes())?;
    w.write_all(&(m as u64).to_le_bytes())?;
    w.write_all(&op.seed().to_le_bytes())?;
    if let Some(d) = op.dense_data() {
        let mut buf = Vec::with_capacity(n * n * 8);
        for i in 0..m {
            buf.clear();
            let col = d.column(i);
            for row in 0..n {
                for c in 0..n {
                    buf.extend_from_slice(&col[c * n + row].to_le_bytes());
                }
            }
            w.write_all(&buf)?;
        }
    } else if let Some(pairs) = op.pairs() {
        for &(r, c) in pairs {
            w.write_all(&(r as u64).to_le_bytes())?;
            w.write_all(&(c as u64).to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn to_usize(v: u64, what: &str) -> Result<usize> {
    usize::try_from(v).map_err(|_| Error::Format(format!("{what} {v} does not fit in usize")))
}

pub fn read_operator<R: Read>(mut r: R) -> Result<SensingOperator> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if magic != MAGIC {
        return Err(Error::Format("bad magic bytes".into()));
    }
    let mut v = [0u8; 2];
    r.read_exact(&mut v)?;
    let version = u16::from_le_bytes(v);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let mut kr = [0u8; 2];
    r.read_exact(&mut kr)?;
    let n = to_usize(read_u64(&mut r)?, "n")?;
    let m = to_usize(read_u64(&mut r)?, "m")?;
    let seed = read_u64(&mut r)?;
    if n == 0 || m == 0 {
        return Err(Error::Format(format!("empty operator n = {n}, m = {m}")));
    }
    let op = match kr[0] {
        0 => {
            let nn = n.checked_mul(n).ok_or_else(|| Error::Format("n overflows".into()))?;
            let total = nn.checked_mul(m).ok_or(Error::Allocation { elements: usize::MAX })?;
            let mut data: Vec<f64> = Vec::new();
            data.try_reserve_exact(total)
                .map_err(|_| Error::Allocation { elements: total })?;
            data.resize(total, 0.0);
            let mut buf = vec![0u8; nn * 8];
            for i in 0..m {
                r.read_exact(&mut buf)?;
                let col = &mut data[i * nn..(i + 1) * nn];
                for (flat, chunk) in buf.chunks_exact(8).enumerate() {
                    let (row, c) = (flat / n, flat % n);
                    col[c * n + row] = f64::from_le_bytes(chunk.try_into().unwrap());
                }
            }
            SensingOperator::from_dense_data(n, seed, DMatrix::from_vec(nn, m, data))
        }
        1 => {
            let mut pairs = Vec::with_capacity(m.min(1 << 24));
            for _ in 0..m {
                let row = to_usize(read_u64(&mut r)?, "row")?;
                let col = to_usize(read_u64(&mut r)?, "col")?;
                pairs.push((row, col));
            }
            SensingOperator::from_pairs(n, pairs, seed).map_err(|e| Error::Format(e.to_string()))?
        }
        other => return Err(Error::Format(format!("unknown operator kind {other}"))),
    };
    let mut tail = [0u8; 1];
    if r.read(&mut tail)? != 0 {
        return Err(Error::Format("trailing bytes after payload".into()));
    }
    Ok(op)
}
