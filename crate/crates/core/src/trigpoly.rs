//! Matrix-valued trigonometric polynomials on a flat torus.

use std::f64::consts::PI;

use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

use crate::cplx::{matrix_to_rows, rows_to_matrix};
use crate::error::{Error, Result};

/// `f(x) = Σ_k C_k exp(i Σ_α 2π k_α x_α / L_α)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrigPolyField {
    rows: usize,
    cols: usize,
    periods: Vec<f64>,
    terms: Vec<(Vec<i64>, Mat<c64>)>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RawTerm {
    pub k: Vec<i64>,
    pub matrix: Vec<Vec<[f64; 2]>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RawField {
    #[serde(rename = "K")]
    pub cutoff: usize,
    pub coeffs: Vec<RawTerm>,
}

impl TrigPolyField {
    /// Builds a field from `(k, C_k)` pairs; repeated wave vectors are summed.
    pub fn new(rows: usize, cols: usize, periods: Vec<f64>, terms: Vec<(Vec<i64>, Mat<c64>)>) -> Result<Self> {
        let p = periods.len();
        if p == 0 {
            return Err(Error::InvalidSpec("field needs at least one axis".into()));
        }
        if periods.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::InvalidSpec(format!("bad periods {periods:?}")));
        }
        let mut merged: Vec<(Vec<i64>, Mat<c64>)> = Vec::new();
        for (k, m) in terms {
            if k.len() != p {
                return Err(Error::InvalidSpec(format!(
                    "wave vector {k:?} has {} entries, expected {p}",
                    k.len()
                )));
            }
            if m.nrows() != rows || m.ncols() != cols {
                return Err(Error::InvalidSpec(format!(
                    "coefficient for {k:?} is {}x{}, expected {rows}x{cols}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            match merged.iter_mut().find(|(k2, _)| *k2 == k) {
                Some((_, acc)) => *acc = &*acc + &m,
                None => merged.push((k, m)),
            }
        }
        merged.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(Self {
            rows,
            cols,
            periods,
            terms: merged,
        })
    }

    pub fn constant(m: Mat<c64>, periods: Vec<f64>) -> Result<Self> {
        let p = periods.len();
        Self::new(m.nrows(), m.ncols(), periods, vec![(vec![0; p], m)])
    }

    pub fn from_raw(raw: &RawField, rows: usize, cols: usize, periods: Vec<f64>) -> Result<Self> {
        let mut terms = Vec::with_capacity(raw.coeffs.len());
        for t in &raw.coeffs {
            if t.k.iter().any(|&k| k.unsigned_abs() as usize > raw.cutoff) {
                return Err(Error::InvalidSpec(format!(
                    "wave vector {:?} exceeds cutoff K = {}",
                    t.k, raw.cutoff
                )));
            }
            if t.matrix.len() != rows {
                return Err(Error::InvalidSpec(format!(
                    "coefficient for {:?} has {} rows, expected {rows}",
                    t.k,
                    t.matrix.len()
                )));
            }
            let m = rows_to_matrix(&t.matrix, cols)
                .ok_or_else(|| Error::InvalidSpec(format!("ragged coefficient for {:?}", t.k)))?;
            terms.push((t.k.clone(), m));
        }
        Self::new(rows, cols, periods, terms)
    }

    pub fn to_raw(&self) -> RawField {
        RawField {
            cutoff: self.cutoff(),
            coeffs: self
                .terms
                .iter()
                .map(|(k, m)| RawTerm {
                    k: k.clone(),
                    matrix: matrix_to_rows(m),
                })
                .collect(),
        }
    }

    pub fn p(&self) -> usize {
        self.periods.len()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn periods(&self) -> &[f64] {
        &self.periods
    }

    pub fn terms(&self) -> &[(Vec<i64>, Mat<c64>)] {
        &self.terms
    }

    /// Largest `|k|∞`.
    pub fn cutoff(&self) -> usize {
        self.terms
            .iter()
            .flat_map(|(k, _)| k.iter().map(|k| k.unsigned_abs() as usize))
            .max()
            .unwrap_or(0)
    }

    fn frequency(&self, k: &[i64], alpha: usize) -> f64 {
        2.0 * PI * k[alpha] as f64 / self.periods[alpha]
    }

    fn phase(&self, k: &[i64], x: &[f64]) -> c64 {
        let theta: f64 = (0..self.p()).map(|a| self.frequency(k, a) * x[a]).sum();
        c64::from_polar(1.0, theta)
    }

    pub fn eval(&self, x: &[f64]) -> Mat<c64> {
        let mut out = Mat::zeros(self.rows, self.cols);
        for (k, m) in &self.terms {
            out += m * faer::Scale(self.phase(k, x));
        }
        out
    }

    /// Exact partial derivative `∂_α`.
    pub fn deriv(&self, alpha: usize) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|(k, m)| (k.clone(), m * faer::Scale(c64::new(0.0, self.frequency(k, alpha)))))
            .collect();
        Self {
            rows: self.rows,
            cols: self.cols,
            periods: self.periods.clone(),
            terms,
        }
    }

    /// `∂_α f(x)` without forming the derivative field.
    pub fn eval_deriv(&self, x: &[f64], alpha: usize) -> Mat<c64> {
        let mut out = Mat::zeros(self.rows, self.cols);
        for (k, m) in &self.terms {
            let w = self.phase(k, x) * c64::new(0.0, self.frequency(k, alpha));
            out += m * faer::Scale(w);
        }
        out
    }

    /// Pointwise conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|(k, m)| (k.iter().map(|v| -v).collect(), m.adjoint().to_owned()))
            .collect();
        Self::new(self.cols, self.rows, self.periods.clone(), terms).expect("adjoint of a valid field")
    }

    /// Pointwise product.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows || self.periods != other.periods {
            return Err(Error::InvalidSpec("incompatible trig fields".into()));
        }
        let mut terms = Vec::new();
        for (k1, a) in &self.terms {
            for (k2, b) in &other.terms {
                let k: Vec<i64> = k1.iter().zip(k2).map(|(x, y)| x + y).collect();
                terms.push((k, a * b));
            }
        }
        Self::new(self.rows, other.cols, self.periods.clone(), terms)
    }

    /// Largest violation of `C(−k) = C(k)†`.
    pub fn hermitian_defect(&self) -> f64 {
        if self.rows != self.cols {
            return f64::INFINITY;
        }
        let adj = self.adjoint();
        let mut worst = 0.0f64;
        let mut keys: Vec<&Vec<i64>> = self.terms.iter().map(|(k, _)| k).collect();
        keys.extend(adj.terms.iter().map(|(k, _)| k));
        for k in keys {
            let a = self.coeff(k);
            let b = adj.coeff(k);
            worst = worst.max(max_abs(&(&a - &b)));
        }
        worst
    }

    /// Coefficient of `k`, zero if absent.
    pub fn coeff(&self, k: &[i64]) -> Mat<c64> {
        self.terms
            .iter()
            .find(|(k2, _)| k2.as_slice() == k)
            .map(|(_, m)| m.clone())
            .unwrap_or_else(|| Mat::zeros(self.rows, self.cols))
    }
}

pub(crate) fn max_abs(m: &Mat<c64>) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            worst = worst.max(m[(i, j)].norm());
        }
    }
    worst
}

/// Weights `w_j` with `f'(0) ≈ Σ_j w_j f(j·2π/m)` for a 2π-periodic `f`
/// sampled at an odd number `m` of points; exact for degree ≤ (m−1)/2.
pub fn spectral_derivative_weights(m: usize) -> Vec<f64> {
    assert!(m % 2 == 1, "spectral line derivative needs an odd sample count");
    let h = 2.0 * PI / m as f64;
    (0..m)
        .map(|j| {
            if j == 0 {
                0.0
            } else {
                let s = if j % 2 == 0 { 1.0 } else { -1.0 };
                -0.5 * s / (j as f64 * h / 2.0).sin()
            }
        })
        .collect()
}

/// Spectral derivative of a smooth periodic matrix function along axis `alpha`.
pub fn line_derivative<F>(f: F, x: &[f64], alpha: usize, period: f64, samples: usize) -> Mat<c64>
where
    F: Fn(&[f64]) -> Mat<c64>,
{
    let w = spectral_derivative_weights(samples);
    let scale = 2.0 * PI / period;
    let mut y = x.to_vec();
    let mut out: Option<Mat<c64>> = None;
    for (j, &wj) in w.iter().enumerate().skip(1) {
        y[alpha] = x[alpha] + period * j as f64 / samples as f64;
        let v = f(&y) * faer::Scale(c64::new(wj * scale, 0.0));
        out = Some(match out {
            None => v,
            Some(acc) => acc + v,
        });
    }
    out.unwrap_or_else(|| {
        let v = f(x);
        Mat::zeros(v.nrows(), v.ncols())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: c64) -> Mat<c64> {
        Mat::from_fn(1, 1, |_, _| v)
    }

    #[test]
    fn single_mode_derivative() {
        let two_pi = 2.0 * PI;
        let f = TrigPolyField::new(1, 1, vec![two_pi, two_pi], vec![(vec![2, -1], scalar(c64::new(0.5, 0.25)))]).unwrap();
        let x = [0.3, 1.7];
        let e = c64::from_polar(1.0, 2.0 * 0.3 - 1.7);
        let d0 = f.deriv(0).eval(&x)[(0, 0)];
        let d1 = f.eval_deriv(&x, 1)[(0, 0)];
        let exact = c64::new(0.5, 0.25) * e;
        assert!((d0 - exact * c64::new(0.0, 2.0)).norm() < 1e-14);
        assert!((d1 - exact * c64::new(0.0, -1.0)).norm() < 1e-14);
    }

    #[test]
    fn line_derivative_matches_exact() {
        let two_pi = 2.0 * PI;
        let f = TrigPolyField::new(
            1,
            1,
            vec![two_pi, 3.0],
            vec![
                (vec![3, 1], scalar(c64::new(1.0, -0.5))),
                (vec![-2, 2], scalar(c64::new(0.2, 0.0))),
            ],
        )
        .unwrap();
        let x = [0.9, -0.4];
        for alpha in 0..2 {
            let num = line_derivative(|y| f.eval(y), &x, alpha, f.periods()[alpha], 9);
            let exact = f.eval_deriv(&x, alpha);
            assert!((num[(0, 0)] - exact[(0, 0)]).norm() < 1e-12);
        }
    }

    #[test]
    fn hermitian_symmetry() {
        let two_pi = 2.0 * PI;
        let c = c64::new(0.3, 0.1);
        let good = TrigPolyField::new(
            1,
            1,
            vec![two_pi],
            vec![(vec![1], scalar(c)), (vec![-1], scalar(c.conj())), (vec![0], scalar(c64::new(2.0, 0.0)))],
        )
        .unwrap();
        assert!(good.hermitian_defect() < 1e-16);
        let v = good.eval(&[0.7])[(0, 0)];
        assert!(v.im.abs() < 1e-15);
        let bad = TrigPolyField::new(1, 1, vec![two_pi], vec![(vec![1], scalar(c))]).unwrap();
        assert!(bad.hermitian_defect() > 0.1);
    }

    #[test]
    fn product_and_adjoint() {
        let two_pi = 2.0 * PI;
        let a = TrigPolyField::new(
            2,
            2,
            vec![two_pi, two_pi],
            vec![
                (vec![1, 0], Mat::from_fn(2, 2, |i, j| c64::new(i as f64 + 0.5, j as f64))),
                (vec![0, 0], Mat::identity(2, 2)),
            ],
        )
        .unwrap();
        let b = a.adjoint();
        let ab = a.mul(&b).unwrap();
        let x = [0.4, 2.2];
        let direct = a.eval(&x) * b.eval(&x);
        assert!(max_abs(&(&ab.eval(&x) - &direct)) < 1e-14);
        assert!(max_abs(&(&b.eval(&x) - &a.eval(&x).adjoint().to_owned())) < 1e-15);
        assert!(ab.hermitian_defect() < 1e-15);
    }
}
