//! Tensor-product B-spline basis over a regular control grid.
//!
//! Each axis uses an open (clamped) uniform knot vector over `kernel_size`
//! control points. On every knot span the nonzero basis functions are stored
//! as polynomial coefficients in the local span parameter and evaluated with
//! Horner's rule. When `kernel_size <= degree` the axis cannot carry a
//! clamped spline of that degree; its effective degree drops to
//! `kernel_size - 1` while the Horner pass keeps the requested length (the
//! extra coefficients are zero).

use crate::error::{Error, Result};
use crate::flops::FlopCounter;

pub const MAX_DEGREE: usize = 3;
const MAX_1D: usize = MAX_DEGREE + 1;
pub const MAX_NONZERO: usize = MAX_1D * MAX_1D * MAX_1D;

type Poly = [f64; MAX_1D];

/// Nonzero basis entries for one pseudo-coordinate.
#[derive(Debug, Clone)]
pub struct BasisValues {
    pub index: [u32; MAX_NONZERO],
    pub value: [f64; MAX_NONZERO],
    pub len: usize,
}

impl Default for BasisValues {
    fn default() -> Self {
        BasisValues { index: [0; MAX_NONZERO], value: [0.0; MAX_NONZERO], len: 0 }
    }
}

impl BasisValues {
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.index[..self.len].iter().zip(&self.value[..self.len]).map(|(&i, &v)| (i as usize, v))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplineBasis {
    kernel_size: usize,
    degree: usize,
    effective_degree: usize,
    spans: usize,
    /// `coeffs[span][r][k]`: coefficient of `t^k` for basis `span + r`.
    coeffs: Vec<[Poly; MAX_1D]>,
}

fn clamped_knots(n: usize, q: usize) -> Vec<f64> {
    (0..n + q + 1)
        .map(|i| {
            if i <= q {
                0.0
            } else if i >= n {
                (n - q) as f64
            } else {
                (i - q) as f64
            }
        })
        .collect()
}

/// `(c0 + c1 t) * p`, truncated to the fixed polynomial length.
fn mul_linear(p: &Poly, c0: f64, c1: f64) -> Poly {
    let mut out = [0.0; MAX_1D];
    for k in 0..MAX_1D {
        out[k] += c0 * p[k];
        if k + 1 < MAX_1D {
            out[k + 1] += c1 * p[k];
        }
    }
    out
}

/// Cox-de Boor recursion carried out on polynomials in the local parameter of
/// knot span `span`.
fn span_coefficients(knots: &[f64], q: usize, span: usize) -> [Poly; MAX_1D] {
    let active = span + q;
    let shift = knots[active];
    let mut level: Vec<Poly> = vec![[0.0; MAX_1D]; knots.len() - 1];
    level[active][0] = 1.0;
    for k in 1..=q {
        let mut next = vec![[0.0; MAX_1D]; knots.len() - 1 - k];
        for (i, slot) in next.iter_mut().enumerate() {
            let mut acc = [0.0; MAX_1D];
            let d1 = knots[i + k] - knots[i];
            if d1 > 0.0 {
                // (t - (knot_i - shift)) / d1
                let term = mul_linear(&level[i], -(knots[i] - shift) / d1, 1.0 / d1);
                acc.iter_mut().zip(term).for_each(|(a, b)| *a += b);
            }
            let d2 = knots[i + k + 1] - knots[i + 1];
            if d2 > 0.0 {
                // ((knot_{i+k+1} - shift) - t) / d2
                let term = mul_linear(&level[i + 1], (knots[i + k + 1] - shift) / d2, -1.0 / d2);
                acc.iter_mut().zip(term).for_each(|(a, b)| *a += b);
            }
            *slot = acc;
        }
        level = next;
    }
    let mut out = [[0.0; MAX_1D]; MAX_1D];
    for (r, slot) in out.iter_mut().enumerate().take(q + 1) {
        *slot = level[span + r];
    }
    out
}

impl SplineBasis {
    pub fn new(degree: usize, kernel_size: usize) -> Result<Self> {
        if !(1..=MAX_DEGREE).contains(&degree) {
            return Err(Error::InvalidParameter(format!("spline degree must be in 1..=3, got {degree}")));
        }
        if kernel_size < 2 {
            return Err(Error::InvalidParameter(format!("kernel size must be >= 2, got {kernel_size}")));
        }
        let q = degree.min(kernel_size - 1);
        let spans = kernel_size - q;
        let knots = clamped_knots(kernel_size, q);
        let coeffs = (0..spans).map(|s| span_coefficients(&knots, q, s)).collect();
        Ok(SplineBasis { kernel_size, degree, effective_degree: q, spans, coeffs })
    }

    pub fn kernel_size(&self) -> usize {
        self.kernel_size
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn effective_degree(&self) -> usize {
        self.effective_degree
    }

    pub fn num_points(&self) -> usize {
        self.kernel_size.pow(3)
    }

    /// Upper bound on nonzero entries per evaluation.
    pub fn support(&self) -> usize {
        (self.effective_degree + 1).pow(3)
    }

    /// Span index and local parameter for one coordinate in `[0, 1]`.
    #[inline]
    fn locate(&self, scaled: f64) -> (usize, f64) {
        let span = (scaled.floor() as usize).min(self.spans - 1);
        (span, scaled - span as f64)
    }

    #[inline]
    fn horner(&self, span: usize, t: f64) -> [f64; MAX_1D] {
        let c = &self.coeffs[span];
        let m = self.degree;
        let mut v = [0.0; MAX_1D];
        for r in 0..=self.effective_degree {
            let mut acc = c[r][m];
            for k in (0..m).rev() {
                acc = acc * t + c[r][k];
            }
            v[r] = acc;
        }
        v
    }

    /// Fills `out` with the nonzero entries for `u`, which must lie in
    /// `[0, 1]^3`. Returns the scalar operation count of the evaluation.
    pub(crate) fn eval_into(&self, u: &[f64; 3], out: &mut BasisValues) -> u64 {
        let n = self.effective_degree + 1;
        let mut first = [0usize; 3];
        let mut vals = [[0.0; MAX_1D]; 3];
        for s in 0..3 {
            let (span, t) = self.locate(u[s] * self.spans as f64);
            first[s] = span;
            vals[s] = self.horner(span, t);
        }
        let ks = self.kernel_size;
        let mut len = 0;
        for c in 0..n {
            for b in 0..n {
                let v12 = vals[1][b] * vals[2][c];
                let row = (first[1] + b) * ks + (first[2] + c) * ks * ks;
                for a in 0..n {
                    out.index[len] = (first[0] + a + row) as u32;
                    out.value[len] = vals[0][a] * v12;
                    len += 1;
                }
            }
        }
        out.len = len;
        // scale + subtract per axis, Horner per basis, two product levels
        (3 * 2 + 3 * n * 2 * self.degree + n * n + n * n * n) as u64
    }

    /// Dense evaluation following the counted schedule: one scale per axis,
    /// one Horner pass per axis over the coefficient vectors (charged `2m`),
    /// tensor composition (charged `d - 1`). `dense` must hold
    /// `num_points()` entries; untouched points are zero.
    pub(crate) fn eval_counted(&self, u: &[f64; 3], dense: &mut [f64], counter: &mut FlopCounter) {
        let n = self.effective_degree + 1;
        let mut first = [0usize; 3];
        let mut vals = [[0.0; MAX_1D]; 3];
        for s in 0..3 {
            let scaled = counter.mul(u[s], self.spans as f64);
            let (span, t) = self.locate(scaled);
            first[s] = span;
            vals[s] = self.horner(span, t);
            counter.charge(2 * self.degree as u64);
        }
        counter.charge(2);
        dense.fill(0.0);
        let ks = self.kernel_size;
        for c in 0..n {
            for b in 0..n {
                for a in 0..n {
                    let p = (first[0] + a) + (first[1] + b) * ks + (first[2] + c) * ks * ks;
                    dense[p] = vals[0][a] * (vals[1][b] * vals[2][c]);
                }
            }
        }
    }

    /// Checked evaluation.
    pub fn eval(&self, u: &[f64; 3]) -> Result<BasisValues> {
        if !u.iter().all(|c| (0.0..=1.0).contains(c)) {
            return Err(Error::Domain(format!("pseudo-coordinate {u:?} outside [0, 1]^3")));
        }
        let mut out = BasisValues::default();
        self.eval_into(u, &mut out);
        Ok(out)
    }
}

/// Nonzero `(grid index, value)` pairs of the degree-`m` basis at `u`. Grid
/// index `p = i0 + k * i1 + k^2 * i2` for per-axis indices `i0, i1, i2`.
pub fn bspline_basis(u: &[f64; 3], degree: usize, kernel_size: usize) -> Result<Vec<(usize, f64)>> {
    Ok(SplineBasis::new(degree, kernel_size)?.eval(u)?.iter().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Textbook Cox-de Boor evaluation on the global parameter.
    fn cox_de_boor(knots: &[f64], i: usize, k: usize, x: f64, last: f64) -> f64 {
        if k == 0 {
            let inside = knots[i] <= x && x < knots[i + 1];
            let at_end = x == last && knots[i] < knots[i + 1] && knots[i + 1] == last;
            return if inside || at_end { 1.0 } else { 0.0 };
        }
        let mut v = 0.0;
        let d1 = knots[i + k] - knots[i];
        if d1 > 0.0 {
            v += (x - knots[i]) / d1 * cox_de_boor(knots, i, k - 1, x, last);
        }
        let d2 = knots[i + k + 1] - knots[i + 1];
        if d2 > 0.0 {
            v += (knots[i + k + 1] - x) / d2 * cox_de_boor(knots, i + 1, k - 1, x, last);
        }
        v
    }

    #[test]
    fn linear_corners() {
        let b = bspline_basis(&[0.0, 0.0, 0.0], 1, 2).unwrap();
        for (p, v) in b {
            assert_eq!(v, if p == 0 { 1.0 } else { 0.0 }, "p={p}");
        }
        let b = bspline_basis(&[0.5, 0.5, 0.5], 1, 2).unwrap();
        assert_eq!(b.len(), 8);
        assert!(b.iter().all(|&(_, v)| v == 0.125));
        let mut idx: Vec<usize> = b.iter().map(|e| e.0).collect();
        idx.sort();
        assert_eq!(idx, (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn matches_cox_de_boor_per_axis() {
        for &(m, ks) in &[(1, 2), (1, 4), (2, 4), (3, 4), (3, 8), (2, 8), (3, 2)] {
            let basis = SplineBasis::new(m, ks).unwrap();
            let q = basis.effective_degree();
            let knots = clamped_knots(ks, q);
            let last = (ks - q) as f64;
            for step in 0..=50 {
                let u = step as f64 / 50.0;
                let b = basis.eval(&[u, 0.0, 0.0]).unwrap();
                let mut dense = vec![0.0; ks];
                // entries with i1 = i2 = 0 carry the axis-0 values times N_0(0) = 1
                for (p, v) in b.iter() {
                    if p < ks {
                        dense[p] += v;
                    }
                }
                for (i, &v) in dense.iter().enumerate() {
                    let expect = cox_de_boor(&knots, i, q, u * last, last);
                    assert!((v - expect).abs() < 1e-12, "m={m} ks={ks} u={u} i={i}: {v} vs {expect}");
                }
            }
        }
    }

    #[test]
    fn support_size_and_domain() {
        let b = SplineBasis::new(3, 8).unwrap();
        assert_eq!(b.eval(&[0.3, 0.7, 0.1]).unwrap().len, 64);
        assert_eq!(SplineBasis::new(3, 2).unwrap().support(), 8);
        assert!(matches!(b.eval(&[1.1, 0.0, 0.0]), Err(Error::Domain(_))));
        assert!(b.eval(&[f64::NAN, 0.0, 0.0]).is_err());
        assert!(SplineBasis::new(0, 2).is_err());
        assert!(SplineBasis::new(1, 1).is_err());
    }

    #[test]
    fn counted_matches_sparse() {
        let b = SplineBasis::new(3, 4).unwrap();
        let u = [0.2, 0.9, 0.55];
        let mut dense = vec![0.0; 64];
        let mut c = FlopCounter::new();
        b.eval_counted(&u, &mut dense, &mut c);
        assert_eq!(c.count(), 3 + 3 * 6 + 2);
        let sparse = b.eval(&u).unwrap();
        let mut from_sparse = vec![0.0; 64];
        for (p, v) in sparse.iter() {
            from_sparse[p] = v;
        }
        for (a, b) in dense.iter().zip(&from_sparse) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}
