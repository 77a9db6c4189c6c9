//! Tensor files: three text lines (magic, order, extents) then little-endian `f64`
//! values with the first index varying fastest.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::DenseTensor;

pub const MAGIC: &str = "cpnest-tensor v1";

pub fn write_tensor<T: Scalar, W: Write>(t: &DenseTensor<T>, mut w: W) -> Result<()> {
    writeln!(w, "{MAGIC}")?;
    writeln!(w, "{}", t.order())?;
    let extents: Vec<String> = t.shape().iter().map(|e| e.to_string()).collect();
    writeln!(w, "{}", extents.join(" "))?;
    for v in t.values() {
        w.write_all(&v.to_f64_lossy().to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn header_line<R: BufRead>(r: &mut R, what: &str) -> Result<String> {
    let mut line = String::new();
    if r.read_line(&mut line)? == 0 {
        return Err(Error::Header(format!("missing {what} line")));
    }
    Ok(line.trim_end_matches(['\n', '\r']).to_string())
}

pub fn read_tensor<R: BufRead>(mut r: R) -> Result<DenseTensor<f64>> {
    let magic = header_line(&mut r, "magic")?;
    if magic != MAGIC {
        return Err(Error::Header(format!("expected {MAGIC:?}, found {magic:?}")));
    }
    let order: usize =
        header_line(&mut r, "order")?.trim().parse().map_err(|e| Error::Header(format!("bad order: {e}")))?;
    let shape = header_line(&mut r, "extents")?
        .split_whitespace()
        .map(|t| t.parse::<usize>().map_err(|e| Error::Header(format!("bad extent {t:?}: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    if shape.len() != order {
        return Err(Error::Header(format!("order is {order} but {} extents are listed", shape.len())));
    }
    if order == 0 || shape.contains(&0) {
        return Err(Error::Header(format!("extents must be positive, got {shape:?}")));
    }
    let count = shape
        .iter()
        .try_fold(1usize, |acc, &e| acc.checked_mul(e))
        .and_then(|n| n.checked_mul(8).map(|_| n))
        .ok_or_else(|| Error::Header(format!("extents {shape:?} overflow")))?;

    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != count * 8 {
        return Err(Error::Truncated { expected: count * 8, found: bytes.len() });
    }
    let values: Vec<f64> =
        bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8"))).collect();
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    DenseTensor::new(shape, values)
}

pub fn save_tensor<T: Scalar>(t: &DenseTensor<T>, path: impl AsRef<Path>) -> Result<()> {
    write_tensor(t, BufWriter::new(File::create(path)?))
}

pub fn load_tensor(path: impl AsRef<Path>) -> Result<DenseTensor<f64>> {
    read_tensor(BufReader::new(File::open(path)?))
}
