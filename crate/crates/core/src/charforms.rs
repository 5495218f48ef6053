//! Chern-Weil forms from curvature matrices, and integration of top-degree
//! forms over a flat torus.

use faer::c64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exterior::{Form, FormContext, Phi};

/// Square matrix whose entries are forms; used for curvatures.
#[derive(Clone, Debug, PartialEq)]
pub struct FormMatrix {
    ctx: FormContext,
    entries: Vec<Vec<Form>>,
}

impl FormMatrix {
    pub fn new(ctx: FormContext, entries: Vec<Vec<Form>>) -> Result<Self> {
        let k = entries.len();
        for row in &entries {
            if row.len() != k {
                return Err(Error::InvalidSpec("curvature matrix is not square".into()));
            }
            for f in row {
                if f.ctx() != ctx {
                    return Err(Error::ContextMismatch(f.ctx().p(), ctx.p()));
                }
            }
        }
        Ok(Self { ctx, entries })
    }

    pub fn zeros(ctx: FormContext, k: usize) -> Self {
        Self {
            ctx,
            entries: vec![vec![Form::zero(ctx); k]; k],
        }
    }

    pub fn identity(ctx: FormContext, k: usize) -> Self {
        let mut m = Self::zeros(ctx, k);
        for i in 0..k {
            m.entries[i][i] = Form::scalar(ctx, c64::new(1.0, 0.0));
        }
        m
    }

    pub fn rank(&self) -> usize {
        self.entries.len()
    }

    pub fn ctx(&self) -> FormContext {
        self.ctx
    }

    pub fn entry(&self, i: usize, j: usize) -> &Form {
        &self.entries[i][j]
    }

    pub fn set(&mut self, i: usize, j: usize, f: Form) {
        self.entries[i][j] = f;
    }

    /// Entries are pure 2-forms.
    pub fn is_two_form(&self) -> bool {
        self.entries
            .iter()
            .flatten()
            .all(|f| f.component(2).map(|c| c.distance(f) == 0.0).unwrap_or(false))
    }

    /// Entries satisfy `R_ij = −R_ji`.
    pub fn is_antisymmetric(&self, tol: f64) -> bool {
        let k = self.rank();
        (0..k).all(|i| (0..k).all(|j| (&self.entries[i][j] + &self.entries[j][i]).max_abs() <= tol))
    }

    pub fn mul(&self, other: &FormMatrix) -> Result<FormMatrix> {
        let k = self.rank();
        if other.rank() != k {
            return Err(Error::SpaceMismatch);
        }
        let mut out = FormMatrix::zeros(self.ctx, k);
        for i in 0..k {
            for j in 0..k {
                let mut acc = Form::zero(self.ctx);
                for l in 0..k {
                    acc += &self.entries[i][l].wedge(&other.entries[l][j])?;
                }
                out.entries[i][j] = acc;
            }
        }
        Ok(out)
    }

    pub fn scale(&self, c: c64) -> FormMatrix {
        FormMatrix {
            ctx: self.ctx,
            entries: self
                .entries
                .iter()
                .map(|row| row.iter().map(|f| f.scale(c)).collect())
                .collect(),
        }
    }

    pub fn add(&self, other: &FormMatrix) -> FormMatrix {
        FormMatrix {
            ctx: self.ctx,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect())
                .collect(),
        }
    }

    pub fn trace(&self) -> Form {
        let mut acc = Form::zero(self.ctx);
        for i in 0..self.rank() {
            acc += &self.entries[i][i];
        }
        acc
    }
}

/// Bernoulli numbers `B_0..B_n` with `B_1 = −1/2`.
pub fn bernoulli(n: usize) -> Vec<f64> {
    let mut b = vec![0.0; n + 1];
    b[0] = 1.0;
    for m in 1..=n {
        let mut s = 0.0;
        let mut binom = 1.0;
        for (k, bk) in b.iter().enumerate().take(m) {
            s += binom * bk;
            binom *= (m + 1 - k) as f64 / (k + 1) as f64;
        }
        b[m] = -s / (m + 1) as f64;
    }
    b
}

/// Taylor coefficients of `(x/2)/tanh(x/2) = Σ_n B_{2n} x^{2n} / (2n)!`,
/// indexed by power of `x`, up to `x^max_power`.
pub fn half_coth_series(max_power: usize) -> Vec<f64> {
    let b = bernoulli(max_power);
    let mut fact = 1.0;
    let mut out = vec![0.0; max_power + 1];
    for (m, bm) in b.iter().enumerate() {
        if m > 0 {
            fact *= m as f64;
        }
        if m % 2 == 0 {
            out[m] = bm / fact;
        }
    }
    out
}

/// Taylor coefficients of `log f` for a series `f` with `f(0) = 1`.
pub fn log_series(f: &[f64]) -> Vec<f64> {
    let n = f.len();
    let mut g = vec![0.0; n];
    for m in 1..n {
        let mut s = m as f64 * f[m];
        for k in 1..m {
            s -= k as f64 * g[k] * f[m - k];
        }
        g[m] = s / m as f64;
    }
    g
}

/// Exponential of a form, summed exactly through the nilpotent part.
pub fn form_exp(a: &Form) -> Result<Form> {
    let ctx = a.ctx();
    let a0 = a.coeff(0);
    let mut nil = a.clone();
    nil.set_coeff(0, c64::new(0.0, 0.0));
    let mut sum = Form::scalar(ctx, c64::new(1.0, 0.0));
    let mut term = sum.clone();
    for j in 1..=ctx.p() {
        term = term.wedge(&nil)?.scale(c64::new(1.0 / j as f64, 0.0));
        sum += &term;
    }
    Ok(sum.scale(a0.exp()))
}

/// `L = φ exp(½ tr log((R/2)/tanh(R/2)))`, with degree-0 part 1.
pub fn l_form(r_tb: &FormMatrix, phi: &Phi) -> Result<Form> {
    let ctx = r_tb.ctx();
    if !r_tb.is_two_form() {
        return Err(Error::InvalidSpec("tangent curvature entries must be 2-forms".into()));
    }
    if !r_tb.is_antisymmetric(1e-12) {
        return Err(Error::InvalidSpec("tangent curvature must be antisymmetric".into()));
    }
    let max_power = ctx.p() / 2;
    let coeffs = log_series(&half_coth_series(max_power));
    let r2 = r_tb.mul(r_tb)?;
    let mut power = r2.clone();
    let mut trlog = Form::zero(ctx);
    for m in (2..=max_power).step_by(2) {
        trlog += &power.trace().scale(c64::new(coeffs[m], 0.0));
        power = power.mul(&r2)?;
    }
    Ok(phi.normalize(&form_exp(&trlog.scale(c64::new(0.5, 0.0)))?))
}

/// `ch = φ Tr exp(−R)`.
pub fn chern_char(r_mu: &FormMatrix, phi: &Phi) -> Result<Form> {
    if !r_mu.is_two_form() {
        return Err(Error::InvalidSpec("bundle curvature entries must be 2-forms".into()));
    }
    let ctx = r_mu.ctx();
    let k = r_mu.rank();
    let minus = r_mu.scale(c64::new(-1.0, 0.0));
    let mut term = FormMatrix::identity(ctx, k);
    let mut sum = term.clone();
    for j in 1..=ctx.p() / 2 {
        term = term.mul(&minus)?.scale(c64::new(1.0 / j as f64, 0.0));
        sum = sum.add(&term);
    }
    Ok(phi.normalize(&sum.trace()))
}

/// Trapezoidal (spectrally accurate) integral of the top-degree coefficient
/// over the torus `Π [0, L_α)` with `n` points per axis.
pub fn integrate_over_base<F>(field: F, periods: &[f64], n: usize) -> Result<c64>
where
    F: Fn(&[f64]) -> Result<Form> + Sync,
{
    if n == 0 || periods.is_empty() {
        return Err(Error::InvalidSpec("empty integration grid".into()));
    }
    let pts = crate::flat::uniform_grid(periods, n);
    let vals: Vec<c64> = pts
        .par_iter()
        .map(|x| field(x).map(|f| f.top()))
        .collect::<Result<Vec<_>>>()?;
    let weight = periods.iter().product::<f64>() / pts.len() as f64;
    Ok(vals.into_iter().sum::<c64>() * weight)
}

/// Integral of an already sampled top coefficient over a uniform grid.
pub fn integrate_samples(samples: &[c64], periods: &[f64]) -> c64 {
    let weight = periods.iter().product::<f64>() / samples.len() as f64;
    samples.iter().sum::<c64>() * weight
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64) -> c64 {
        c64::new(re, 0.0)
    }

    #[test]
    fn series_coefficients() {
        let s = half_coth_series(6);
        assert!((s[0] - 1.0).abs() < 1e-15);
        assert!((s[2] - 1.0 / 12.0).abs() < 1e-15);
        assert!((s[4] + 1.0 / 720.0).abs() < 1e-16);
        assert!((s[6] - 1.0 / 30240.0).abs() < 1e-17);
        assert!(s[1].abs() < 1e-300 && s[3].abs() < 1e-300);
        let s = half_coth_series(16);
        let l = log_series(&s);
        for x in [0.3f64, 0.7] {
            let approx: f64 = (0..=16).map(|m| s[m] * x.powi(m as i32)).sum();
            assert!((approx - (x / 2.0) / (x / 2.0).tanh()).abs() < 1e-13);
            let lg: f64 = (0..=16).map(|m| l[m] * x.powi(m as i32)).sum();
            assert!((lg - ((x / 2.0) / (x / 2.0).tanh()).ln()).abs() < 1e-10);
        }
    }

    #[test]
    fn l_form_trivial_cases() {
        let phi = Phi::default();
        let ctx = FormContext::new(2).unwrap();
        let zero = FormMatrix::zeros(ctx, 2);
        assert_eq!(l_form(&zero, &phi).unwrap(), Form::scalar(ctx, c(1.0)));
        let mut r = FormMatrix::zeros(ctx, 2);
        r.set(0, 1, Form::monomial(ctx, 0b11, c(0.8)));
        r.set(1, 0, Form::monomial(ctx, 0b11, c(-0.8)));
        assert_eq!(l_form(&r, &phi).unwrap(), Form::scalar(ctx, c(1.0)));
    }

    #[test]
    fn l_form_four_dimensional_block_diagonal() {
        let phi = Phi::default();
        let ctx = FormContext::new(4).unwrap();
        let (a, b, cc) = (0.7, -1.3, 0.4);
        let theta1 = &Form::monomial(ctx, 0b0011, c(a)) + &Form::monomial(ctx, 0b1100, c(b));
        let theta2 = Form::monomial(ctx, 0b0101, c(cc));
        let mut r = FormMatrix::zeros(ctx, 4);
        r.set(0, 1, theta1.clone());
        r.set(1, 0, -&theta1);
        r.set(2, 3, theta2.clone());
        r.set(3, 2, -&theta2);
        let l = l_form(&r, &phi).unwrap();
        // eigenvalues ±iθ_j; (iθ/2)/tanh(iθ/2) = 1 − θ²/12 + …
        let one = Form::scalar(ctx, c(1.0));
        let f = |t: &Form| -> Form { &one - &t.wedge(t).unwrap().scale(c(1.0 / 12.0)) };
        let expected = phi.normalize(&f(&theta1).wedge(&f(&theta2)).unwrap());
        assert!(l.distance(&expected) < 1e-15);
        assert!((l.top() - c(-2.0 * a * b / 12.0 * -1.0 / (4.0 * PI * PI))).norm() < 1e-15);
    }

    #[test]
    fn chern_character_cases() {
        let phi = Phi::default();
        let ctx = FormContext::new(2).unwrap();
        assert_eq!(chern_char(&FormMatrix::zeros(ctx, 3), &phi).unwrap(), Form::scalar(ctx, c(3.0)));
        let theta = 0.9;
        let mut r = FormMatrix::zeros(ctx, 1);
        r.set(0, 0, Form::monomial(ctx, 0b11, c(theta)));
        let ch = chern_char(&r, &phi).unwrap();
        let expected = c(-theta) / c64::new(0.0, 2.0 * PI);
        assert!((ch.coeff(0b11) - expected).norm() < 1e-15);
        assert_eq!(ch.coeff(0), c(1.0));
        let mut sum = FormMatrix::zeros(ctx, 2);
        sum.set(0, 0, Form::monomial(ctx, 0b11, c(theta)));
        sum.set(1, 1, Form::monomial(ctx, 0b11, c(-0.2)));
        let mut other = FormMatrix::zeros(ctx, 1);
        other.set(0, 0, Form::monomial(ctx, 0b11, c(-0.2)));
        let direct = chern_char(&sum, &phi).unwrap();
        let parts = &ch + &chern_char(&other, &phi).unwrap();
        assert!(direct.distance(&parts) < 1e-15);
    }

    #[test]
    fn base_integration() {
        let ctx = FormContext::new(2).unwrap();
        let periods = [2.0 * PI, 2.0 * PI];
        let constant = integrate_over_base(|_| Ok(Form::monomial(ctx, 0b11, c(0.5))), &periods, 8).unwrap();
        assert!((constant - c(0.5 * 4.0 * PI * PI)).norm() < 1e-12);
        let none = integrate_over_base(|_| Ok(Form::generator(ctx, 0)), &periods, 8).unwrap();
        assert_eq!(none, c(0.0));
        for n in [8, 16] {
            let osc = integrate_over_base(|x| Ok(Form::monomial(ctx, 0b11, c64::from_polar(1.0, x[0]))), &periods, n).unwrap();
            assert!(osc.norm() < 1e-12);
        }
        assert!(integrate_over_base(|_| Ok(Form::zero(ctx)), &periods, 0).is_err());
    }
}
