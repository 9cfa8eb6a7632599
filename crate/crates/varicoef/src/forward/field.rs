//! Grid-sampled scalar fields with axis metadata and file formats.

use crate::{Error, Result};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

/// One named axis with its node coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisMeta {
    pub name: String,
    pub coords: Vec<f64>,
}

/// A scalar field sampled on a tensor-product grid.
///
/// `values` is row-major in axis order (`axes[0]` slowest).
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub axes: Vec<AxisMeta>,
    pub values: Vec<f64>,
    /// Solver id plus config hash.
    pub provenance: String,
}

impl Field {
    pub fn new(axes: Vec<AxisMeta>, values: Vec<f64>, provenance: impl Into<String>) -> Result<Self> {
        let expect: usize = axes.iter().map(|a| a.coords.len()).product();
        if expect != values.len() {
            return Err(Error::contract(format!(
                "value count {} does not match grid size {expect}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("field value".into()));
        }
        Ok(Field {
            axes,
            values,
            provenance: provenance.into(),
        })
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.coords.len()).collect()
    }

    /// Value at a multi-index (row-major in axis order).
    pub fn at(&self, index: &[usize]) -> f64 {
        let shape = self.shape();
        debug_assert_eq!(index.len(), shape.len());
        let mut flat = 0;
        for (i, (&ix, &n)) in index.iter().zip(&shape).enumerate() {
            debug_assert!(ix < n, "index {ix} out of bounds for axis {i}");
            flat = flat * n + ix;
        }
        self.values[flat]
    }

    /// Coordinates of a flattened node index, one per axis.
    pub fn unravel(&self, mut flat: usize) -> Vec<f64> {
        let shape = self.shape();
        let mut idx = vec![0usize; shape.len()];
        for ax in (0..shape.len()).rev() {
            idx[ax] = flat % shape[ax];
            flat /= shape[ax];
        }
        idx.iter()
            .zip(&self.axes)
            .map(|(&i, ax)| ax.coords[i])
            .collect()
    }

    pub fn n_values(&self) -> usize {
        self.values.len()
    }

    // ---- CSV format -------------------------------------------------

    /// Writes `# axes: x[n], t[m]`, a provenance comment, then the
    /// values row-major, one line per leading-axis index.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let header: Vec<String> = self
            .axes
            .iter()
            .map(|a| format!("{}[{}]", a.name, a.coords.len()))
            .collect();
        writeln!(w, "# axes: {}", header.join(", "))?;
        for axis in &self.axes {
            let coords: Vec<String> = axis.coords.iter().map(|c| format!("{c:?}")).collect();
            writeln!(w, "# coords {}: {}", axis.name, coords.join(","))?;
        }
        writeln!(w, "# provenance: {}", self.provenance)?;
        let row = self.values.len() / self.axes[0].coords.len();
        for chunk in self.values.chunks(row) {
            let line: Vec<String> = chunk.iter().map(|v| format!("{v:?}")).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let bad = |d: &str| Error::format("field csv", d);
        let reader = BufReader::new(r);
        let mut axes: Vec<AxisMeta> = Vec::new();
        let mut provenance = String::new();
        let mut values = Vec::new();
        for line in reader.lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("# axes:") {
                for part in rest.split(',') {
                    let part = part.trim();
                    let (name, len) = part
                        .split_once('[')
                        .ok_or_else(|| bad("malformed axes header"))?;
                    let len: usize = len
                        .trim_end_matches(']')
                        .parse()
                        .map_err(|_| bad("bad axis length"))?;
                    axes.push(AxisMeta {
                        name: name.trim().to_string(),
                        coords: vec![0.0; len],
                    });
                }
            } else if let Some(rest) = line.strip_prefix("# coords ") {
                let (name, coords) = rest.split_once(':').ok_or_else(|| bad("bad coords line"))?;
                let coords: Vec<f64> = coords
                    .split(',')
                    .map(|c| c.trim().parse().map_err(|_| bad("bad coordinate")))
                    .collect::<Result<_>>()?;
                let axis = axes
                    .iter_mut()
                    .find(|a| a.name == name.trim())
                    .ok_or_else(|| bad("coords for unknown axis"))?;
                if coords.len() != axis.coords.len() {
                    return Err(bad("coordinate count mismatch"));
                }
                axis.coords = coords;
            } else if let Some(rest) = line.strip_prefix("# provenance:") {
                provenance = rest.trim().to_string();
            } else if !line.starts_with('#') {
                for tok in line.split(',') {
                    values.push(tok.trim().parse().map_err(|_| bad("bad value"))?);
                }
            }
        }
        if axes.is_empty() {
            return Err(bad("missing axes header"));
        }
        Field::new(axes, values, provenance)
    }

    // ---- binary format ----------------------------------------------

    /// Magic `VCFLD1`, version byte, axis descriptors, provenance,
    /// little-endian f64 payload.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(b"VCFLD1")?;
        w.write_all(&[1u8])?;
        w.write_all(&[self.axes.len() as u8])?;
        for axis in &self.axes {
            let name = axis.name.as_bytes();
            w.write_all(&[name.len() as u8])?;
            w.write_all(name)?;
            w.write_all(&(axis.coords.len() as u32).to_le_bytes())?;
            for c in &axis.coords {
                w.write_all(&c.to_le_bytes())?;
            }
        }
        let prov = self.provenance.as_bytes();
        w.write_all(&(prov.len() as u32).to_le_bytes())?;
        w.write_all(prov)?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let bad = |d: &str| Error::format("field binary", d);
        let mut magic = [0u8; 6];
        r.read_exact(&mut magic)?;
        if &magic != b"VCFLD1" {
            return Err(bad("bad magic"));
        }
        let mut byte = [0u8; 1];
        r.read_exact(&mut byte)?;
        if byte[0] != 1 {
            return Err(bad("unsupported version"));
        }
        r.read_exact(&mut byte)?;
        let n_axes = byte[0] as usize;
        if n_axes == 0 || n_axes > 8 {
            return Err(bad("implausible axis count"));
        }
        let mut axes = Vec::with_capacity(n_axes);
        let mut u32buf = [0u8; 4];
        for _ in 0..n_axes {
            r.read_exact(&mut byte)?;
            let mut name = vec![0u8; byte[0] as usize];
            r.read_exact(&mut name)?;
            r.read_exact(&mut u32buf)?;
            let n = u32::from_le_bytes(u32buf) as usize;
            let mut coords = Vec::with_capacity(n);
            let mut f64buf = [0u8; 8];
            for _ in 0..n {
                r.read_exact(&mut f64buf)?;
                coords.push(f64::from_le_bytes(f64buf));
            }
            axes.push(AxisMeta {
                name: String::from_utf8(name).map_err(|_| bad("axis name not utf8"))?,
                coords,
            });
        }
        r.read_exact(&mut u32buf)?;
        let mut prov = vec![0u8; u32::from_le_bytes(u32buf) as usize];
        r.read_exact(&mut prov)?;
        let total: usize = axes.iter().map(|a| a.coords.len()).product();
        let mut values = Vec::with_capacity(total);
        let mut f64buf = [0u8; 8];
        for _ in 0..total {
            r.read_exact(&mut f64buf)?;
            values.push(f64::from_le_bytes(f64buf));
        }
        Field::new(
            axes,
            values,
            String::from_utf8(prov).map_err(|_| bad("provenance not utf8"))?,
        )
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(BufReader::new(file))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_field() -> Field {
        Field::new(
            vec![
                AxisMeta {
                    name: "x".into(),
                    coords: vec![-1.0, 0.0, 1.0],
                },
                AxisMeta {
                    name: "t".into(),
                    coords: vec![0.0, 0.5],
                },
            ],
            vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.5],
            "test:deadbeef",
        )
        .unwrap()
    }

    #[test]
    fn indexing_is_row_major() {
        let f = sample_field();
        assert_eq!(f.at(&[0, 0]), 1.0);
        assert_eq!(f.at(&[0, 1]), 2.0);
        assert_eq!(f.at(&[2, 1]), 6.5);
        assert_eq!(f.unravel(3), vec![0.0, 0.5]);
    }

    #[test]
    fn csv_roundtrip() {
        let f = sample_field();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# axes: x[3], t[2]"));
        let g = Field::read_csv(buf.as_slice()).unwrap();
        assert_eq!(f, g);
    }

    #[test]
    fn binary_roundtrip() {
        let f = sample_field();
        let mut buf = Vec::new();
        f.write_binary(&mut buf).unwrap();
        assert_eq!(&buf[0..6], b"VCFLD1");
        let g = Field::read_binary(buf.as_slice()).unwrap();
        assert_eq!(f, g);
    }

    #[test]
    fn value_count_must_match_grid() {
        let err = Field::new(
            vec![AxisMeta {
                name: "x".into(),
                coords: vec![0.0, 1.0],
            }],
            vec![1.0],
            "",
        );
        assert!(err.is_err());
    }
}
