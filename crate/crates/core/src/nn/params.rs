use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Layer widths from input to output, e.g. `[4, 64, 64, 28]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Layout(Vec<usize>);

impl Layout {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::LayoutMismatch(format!(
                "a layout needs at least input and output widths, got {dims:?}"
            )));
        }
        if dims.contains(&0) {
            return Err(Error::LayoutMismatch(format!("zero-width layer in {dims:?}")));
        }
        Ok(Self(dims))
    }

    pub fn dims(&self) -> &[usize] {
        &self.0
    }

    /// `(fan_in, fan_out)` per dense layer.
    pub fn layers(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.0.windows(2).map(|w| (w[0], w[1]))
    }

    pub fn num_params(&self) -> usize {
        self.layers().map(|(i, o)| (i + 1) * o).sum()
    }
}

/// Flat network parameters. Per layer: the `out x in` weight matrix in
/// row-major order, then the `out` biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    layout: Layout,
    values: Vec<f64>,
}

impl ParamVector {
    pub fn new(layout: Layout, values: Vec<f64>) -> Result<Self> {
        if values.len() != layout.num_params() {
            return Err(Error::DimensionMismatch {
                expected: layout.num_params(),
                actual: values.len(),
            });
        }
        Ok(Self { layout, values })
    }

    pub fn zeros(layout: Layout) -> Self {
        let n = layout.num_params();
        Self {
            layout,
            values: vec![0.0; n],
        }
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn ensure_same_layout(&self, other: &ParamVector) -> Result<()> {
        if self.layout != other.layout {
            return Err(Error::LayoutMismatch(format!(
                "{:?} vs {:?}",
                self.layout.dims(),
                other.layout.dims()
            )));
        }
        Ok(())
    }

    /// Writes the layout header (`u32` count, then `u32` widths) followed by
    /// the values as little-endian `f64`.
    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        let dims = self.layout.dims();
        w.write_all(&(dims.len() as u32).to_le_bytes())?;
        for &d in dims {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 * (self.layout.dims().len() + 1) + 8 * self.values.len());
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut word = [0u8; 4];
        let io = |e: std::io::Error| Error::Checkpoint(e.to_string());
        r.read_exact(&mut word).map_err(io)?;
        let count = u32::from_le_bytes(word) as usize;
        if count > 1024 {
            return Err(Error::Checkpoint(format!("implausible layer count {count}")));
        }
        let mut dims = Vec::with_capacity(count);
        for _ in 0..count {
            r.read_exact(&mut word).map_err(io)?;
            dims.push(u32::from_le_bytes(word) as usize);
        }
        let layout = Layout::new(dims).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let mut values = vec![0.0; layout.num_params()];
        let mut buf = [0u8; 8];
        for v in values.iter_mut() {
            r.read_exact(&mut buf).map_err(io)?;
            *v = f64::from_le_bytes(buf);
        }
        let mut rest = Vec::new();
        r.read_to_end(&mut rest).map_err(io)?;
        if !rest.is_empty() {
            return Err(Error::Checkpoint(format!("{} trailing bytes", rest.len())));
        }
        Ok(Self { layout, values })
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        Self::read_from(bytes)
    }
}

/// Elementwise arithmetic mean, summed in list order. Coordinates on which
/// every input agrees are copied unchanged.
pub fn average_params(list: &[ParamVector]) -> Result<ParamVector> {
    let (first, rest) = list.split_first().ok_or(Error::EmptyParams)?;
    for p in rest {
        first.ensure_same_layout(p)?;
    }
    let n = list.len() as f64;
    let mut acc = first.clone();
    for (i, a) in acc.values.iter_mut().enumerate() {
        let x0 = *a;
        // a repeated summand would round in `n * x / n`; keep it exact
        if rest.iter().all(|p| p.values[i].to_bits() == x0.to_bits()) {
            continue;
        }
        let mut sum = x0;
        for p in rest {
            sum += p.values[i];
        }
        *a = sum / n;
    }
    Ok(acc)
}
