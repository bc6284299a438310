//! Tensor (de)serialization: a text header `shape: d0 d1 ...` followed by
//! little-endian 64-bit values in row-major order. Always 64-bit on disk so
//! checkpoints are precision-independent.

use std::io::{BufRead, Write};

use convtext_core::real::{real, to_f64, Real};
use convtext_core::Tensor;

use crate::error::{Error, Result};

pub fn write_tensor<F: Real, W: Write>(w: &mut W, t: &Tensor<F>) -> Result<()> {
    let dims: Vec<String> = t.shape().iter().map(|d| d.to_string()).collect();
    writeln!(w, "shape: {}", dims.join(" "))?;
    for &v in t.data() {
        w.write_all(&to_f64(v).to_le_bytes())?;
    }
    Ok(())
}

pub fn read_tensor<F: Real, R: BufRead>(r: &mut R) -> Result<Tensor<F>> {
    let mut header = String::new();
    r.read_line(&mut header)?;
    let rest = header
        .trim_end()
        .strip_prefix("shape:")
        .ok_or_else(|| Error::Invalid(format!("bad tensor header {header:?}")))?;
    let shape: Vec<usize> = rest
        .split_whitespace()
        .map(|d| {
            d.parse::<usize>()
                .map_err(|_| Error::Invalid(format!("bad dimension {d:?} in tensor header")))
        })
        .collect::<Result<_>>()?;
    let numel: usize = shape.iter().product();
    let mut data = Vec::with_capacity(numel);
    let mut buf = [0u8; 8];
    for _ in 0..numel {
        r.read_exact(&mut buf)?;
        data.push(real::<F>(f64::from_le_bytes(buf)));
    }
    Ok(Tensor::from_vec(&shape, data)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    #[test]
    fn round_trip() {
        let t = Tensor::from_vec(&[2, 3], vec![1.0, -2.5, 3.0, 0.0, 1e-9, 7.25]).unwrap();
        let mut buf = Vec::new();
        write_tensor(&mut buf, &t).unwrap();
        assert!(buf.starts_with(b"shape: 2 3\n"));
        let back: Tensor<f64> = read_tensor(&mut Cursor::new(&buf)).unwrap();
        assert_eq!(back.shape(), t.shape());
        assert_eq!(back.data(), t.data());
    }

    #[test]
    fn garbage_header_is_rejected() {
        let mut c = Cursor::new(b"not a tensor\n".to_vec());
        assert!(read_tensor::<f64, _>(&mut c).is_err());
    }
}
