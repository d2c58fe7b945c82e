use super::FeatureMap;
use crate::error::{Error, Result};

pub const BN_EPS: f64 = 1e-5;

pub fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp_m1()
    }
}

/// Frozen (inference-mode) batch normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub scale: Vec<f64>,
    pub shift: Vec<f64>,
}

impl BatchNorm {
    pub fn identity(width: usize) -> Self {
        BatchNorm { mean: vec![0.0; width], var: vec![1.0; width], scale: vec![1.0; width], shift: vec![0.0; width] }
    }

    pub fn width(&self) -> usize {
        self.mean.len()
    }

    pub fn validate(&self) -> Result<()> {
        let w = self.width();
        if self.var.len() != w || self.scale.len() != w || self.shift.len() != w {
            return Err(Error::Shape("batch-norm statistics differ in length".into()));
        }
        if self.var.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::InvalidParameter("batch-norm variance must be > 0".into()));
        }
        Ok(())
    }

    #[inline]
    fn apply(&self, c: usize, x: f64, denom: f64) -> f64 {
        (x - self.mean[c]) / denom * self.scale[c] + self.shift[c]
    }
}

/// Dense affine map `W x (+ b)`, `W` stored row-major as `m_out x m_in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub m_in: usize,
    pub m_out: usize,
    pub weight: Vec<f64>,
    pub bias: Option<Vec<f64>>,
}

impl Linear {
    pub fn new(m_in: usize, m_out: usize, weight: Vec<f64>, bias: Option<Vec<f64>>) -> Result<Self> {
        if weight.len() != m_in * m_out {
            return Err(Error::Shape(format!("linear {m_in}->{m_out} needs {} weights, got {}", m_in * m_out, weight.len())));
        }
        if let Some(b) = &bias {
            if b.len() != m_out {
                return Err(Error::Shape(format!("bias has {} entries, expected {m_out}", b.len())));
            }
        }
        Ok(Linear { m_in, m_out, weight, bias })
    }

    pub fn identity(width: usize) -> Self {
        let mut weight = vec![0.0; width * width];
        for i in 0..width {
            weight[i * width + i] = 1.0;
        }
        Linear { m_in: width, m_out: width, weight, bias: Some(vec![0.0; width]) }
    }

    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        for (n, o) in out.iter_mut().enumerate() {
            let w = &self.weight[n * self.m_in..(n + 1) * self.m_in];
            let mut acc = self.bias.as_ref().map_or(0.0, |b| b[n]);
            for (wv, xv) in w.iter().zip(x) {
                acc += wv * xv;
            }
            *o = acc;
        }
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.m_in {
            return Err(Error::Shape(format!("linear expects width {}, got {}", self.m_in, x.len())));
        }
        let mut out = vec![0.0; self.m_out];
        self.apply_into(x, &mut out);
        Ok(out)
    }
}

/// Layer selector for [`pointwise`].
#[derive(Debug, Clone, Copy)]
pub enum Pointwise<'a> {
    Elu,
    BatchNorm(&'a BatchNorm),
    Linear(&'a Linear),
}

/// Applies a per-node layer to every row.
pub fn pointwise(f: &FeatureMap, layer: Pointwise<'_>) -> Result<FeatureMap> {
    let rows: Vec<usize> = (0..f.rows()).collect();
    match layer {
        Pointwise::Elu => {
            let mut out = FeatureMap::zeros(f.rows(), f.width());
            elu_rows(f, &rows, &mut out)?;
            Ok(out)
        }
        Pointwise::BatchNorm(bn) => {
            let mut out = FeatureMap::zeros(f.rows(), f.width());
            batch_norm_rows(bn, f, &rows, &mut out)?;
            Ok(out)
        }
        Pointwise::Linear(lin) => {
            if f.width() != lin.m_in {
                return Err(Error::Shape(format!("linear expects width {}, got {}", lin.m_in, f.width())));
            }
            let mut out = FeatureMap::zeros(f.rows(), lin.m_out);
            for i in rows {
                lin.apply_into(f.row(i), out.row_mut(i));
            }
            Ok(out)
        }
    }
}

fn check_rows(f: &FeatureMap, out: &FeatureMap, width: usize) -> Result<()> {
    if f.width() != width || out.width() != width || out.rows() != f.rows() {
        return Err(Error::Shape(format!(
            "pointwise layer of width {width} got {}x{} -> {}x{}",
            f.rows(),
            f.width(),
            out.rows(),
            out.width()
        )));
    }
    Ok(())
}

/// Returns the operation count (one per entry).
pub fn elu_rows(f: &FeatureMap, rows: &[usize], out: &mut FeatureMap) -> Result<u64> {
    check_rows(f, out, f.width())?;
    for &i in rows {
        for (o, &x) in out.row_mut(i).iter_mut().zip(f.row(i)) {
            *o = elu(x);
        }
    }
    Ok((rows.len() * f.width()) as u64)
}

/// Returns the operation count (four per entry).
pub fn batch_norm_rows(bn: &BatchNorm, f: &FeatureMap, rows: &[usize], out: &mut FeatureMap) -> Result<u64> {
    check_rows(f, out, bn.width())?;
    let denom: Vec<f64> = bn.var.iter().map(|v| (v + BN_EPS).sqrt()).collect();
    for &i in rows {
        for (c, (o, &x)) in out.row_mut(i).iter_mut().zip(f.row(i)).enumerate() {
            *o = bn.apply(c, x, denom[c]);
        }
    }
    Ok(4 * (rows.len() * f.width()) as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn elu_values() {
        assert_eq!(elu(0.0), 0.0);
        assert_eq!(elu(1.0), 1.0);
        assert!((elu(-1.0) - (f64::exp(-1.0) - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn identity_batch_norm_and_linear() {
        let f = FeatureMap::from_rows(2, vec![1.0, -2.0, 0.5, 3.0]).unwrap();
        let bn = BatchNorm::identity(2);
        let out = pointwise(&f, Pointwise::BatchNorm(&bn)).unwrap();
        let s = 1.0 / (1.0 + BN_EPS).sqrt();
        for (a, b) in out.as_slice().iter().zip(f.as_slice()) {
            assert!((a - b * s).abs() < 1e-15);
            assert!((a - b).abs() < 1e-4);
        }
        let lin = Linear::identity(2);
        assert_eq!(pointwise(&f, Pointwise::Linear(&lin)).unwrap(), f);
    }

    #[test]
    fn width_mismatch() {
        let f = FeatureMap::from_rows(2, vec![1.0, 2.0]).unwrap();
        assert!(pointwise(&f, Pointwise::BatchNorm(&BatchNorm::identity(3))).is_err());
        assert!(pointwise(&f, Pointwise::Linear(&Linear::identity(3))).is_err());
        assert!(Linear::new(2, 2, vec![0.0; 3], None).is_err());
    }
}
