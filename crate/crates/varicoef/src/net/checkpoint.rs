//! Network checkpoint files.
//!
//! Layout: magic `VCNET1`, version byte (1), `u32` width count, the
//! widths as `u32`s, an activation tag byte (0 = tanh), a gating flag
//! byte, then — gating encoders first (u weight, u bias, v weight,
//! v bias) when present — each layer's weight (row-major) and bias as
//! little-endian `f64` arrays in layer order.

use super::{Activation, Gating, MlpParams};
use crate::{Error, Result};
use ndarray::{Array1, Array2};
use std::io::{Read, Write};

const MAGIC: &[u8; 6] = b"VCNET1";
const VERSION: u8 = 1;

pub fn write_checkpoint<W: Write>(mut w: W, params: &MlpParams) -> Result<()> {
    params.validate()?;
    w.write_all(MAGIC)?;
    w.write_all(&[VERSION])?;
    w.write_all(&(params.layer_widths.len() as u32).to_le_bytes())?;
    for &width in &params.layer_widths {
        w.write_all(&(width as u32).to_le_bytes())?;
    }
    w.write_all(&[match params.activation {
        Activation::Tanh => 0u8,
    }])?;
    w.write_all(&[params.gating.is_some() as u8])?;
    let write_f64s = |w: &mut W, values: &mut dyn Iterator<Item = &f64>| -> Result<()> {
        for v in values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    };
    if let Some(g) = &params.gating {
        write_f64s(&mut w, &mut g.u_weight.iter())?;
        write_f64s(&mut w, &mut g.u_bias.iter())?;
        write_f64s(&mut w, &mut g.v_weight.iter())?;
        write_f64s(&mut w, &mut g.v_bias.iter())?;
    }
    for l in 0..params.weights.len() {
        write_f64s(&mut w, &mut params.weights[l].iter())?;
        write_f64s(&mut w, &mut params.biases[l].iter())?;
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<MlpParams> {
    let bad = |detail: &str| Error::format("checkpoint", detail);
    let mut magic = [0u8; 6];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(bad("bad magic"));
    }
    let mut byte = [0u8; 1];
    r.read_exact(&mut byte)?;
    if byte[0] != VERSION {
        return Err(bad("unsupported version"));
    }
    let mut u32buf = [0u8; 4];
    r.read_exact(&mut u32buf)?;
    let n_widths = u32::from_le_bytes(u32buf) as usize;
    if n_widths < 2 || n_widths > 1024 {
        return Err(bad("implausible width count"));
    }
    let mut layer_widths = Vec::with_capacity(n_widths);
    for _ in 0..n_widths {
        r.read_exact(&mut u32buf)?;
        layer_widths.push(u32::from_le_bytes(u32buf) as usize);
    }
    r.read_exact(&mut byte)?;
    let activation = match byte[0] {
        0 => Activation::Tanh,
        _ => return Err(bad("unknown activation tag")),
    };
    r.read_exact(&mut byte)?;
    let gated = match byte[0] {
        0 => false,
        1 => true,
        _ => return Err(bad("bad gating flag")),
    };
    let read_f64s = |r: &mut R, n: usize| -> Result<Vec<f64>> {
        let mut buf = vec![0u8; n * 8];
        r.read_exact(&mut buf)?;
        Ok(buf
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    };
    let gating = if gated {
        if n_widths < 3 {
            return Err(bad("gated checkpoint without hidden layers"));
        }
        let (d_in, hidden) = (layer_widths[0], layer_widths[1]);
        let enc = |r: &mut R| -> Result<(Array2<f64>, Array1<f64>)> {
            let w = read_f64s(r, hidden * d_in)?;
            let b = read_f64s(r, hidden)?;
            Ok((
                Array2::from_shape_vec((hidden, d_in), w).map_err(|e| bad(&e.to_string()))?,
                Array1::from_vec(b),
            ))
        };
        let (u_weight, u_bias) = enc(&mut r)?;
        let (v_weight, v_bias) = enc(&mut r)?;
        Some(Gating {
            u_weight,
            u_bias,
            v_weight,
            v_bias,
        })
    } else {
        None
    };
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for l in 0..n_widths - 1 {
        let (rows, cols) = (layer_widths[l + 1], layer_widths[l]);
        let w = read_f64s(&mut r, rows * cols)?;
        let b = read_f64s(&mut r, rows)?;
        weights.push(Array2::from_shape_vec((rows, cols), w).map_err(|e| bad(&e.to_string()))?);
        biases.push(Array1::from_vec(b));
    }
    let params = MlpParams {
        layer_widths,
        weights,
        biases,
        activation,
        gating,
    };
    params.validate()?;
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn roundtrip_plain_and_gated() {
        let mut rng = stream(41, "ckpt");
        for gated in [false, true] {
            let p = MlpParams::glorot(&[2, 8, 8, 1], Activation::Tanh, gated, &mut rng).unwrap();
            let mut buf = Vec::new();
            write_checkpoint(&mut buf, &p).unwrap();
            assert_eq!(&buf[0..6], b"VCNET1");
            let q = read_checkpoint(buf.as_slice()).unwrap();
            assert_eq!(p, q);
        }
    }

    #[test]
    fn rejects_corrupt_magic() {
        let mut rng = stream(42, "ckpt");
        let p = MlpParams::glorot(&[1, 4, 1], Activation::Tanh, false, &mut rng).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &p).unwrap();
        buf[0] = b'X';
        assert!(read_checkpoint(buf.as_slice()).is_err());
    }
}
