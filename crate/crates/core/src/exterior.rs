//! Complex exterior algebra on `p` anticommuting generators `dx1..dxp`.
//!
//! A basis monomial is a subset of generators stored as a bitmask, bit `a`
//! standing for `dx{a+1}`. Monomials are kept in ascending generator order.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use faer::c64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Largest supported generator count.
pub const MAX_GENERATORS: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FormContext {
    p: usize,
}

impl FormContext {
    pub fn new(p: usize) -> Result<Self> {
        if p == 0 || p > MAX_GENERATORS {
            return Err(Error::InvalidContext(p));
        }
        Ok(Self { p })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Dimension `2^p` of the algebra.
    pub fn dim(&self) -> usize {
        1 << self.p
    }

    /// Mask of the top monomial `dx1 ∧ … ∧ dxp`.
    pub fn top(&self) -> usize {
        self.dim() - 1
    }

    pub fn label(&self, generator: usize) -> String {
        format!("dx{}", generator + 1)
    }

    pub fn monomial_label(&self, mask: usize) -> String {
        if mask == 0 {
            return "1".into();
        }
        (0..self.p)
            .filter(|a| mask >> a & 1 == 1)
            .map(|a| self.label(a))
            .collect::<Vec<_>>()
            .join("∧")
    }

    fn check(&self, other: &FormContext) -> Result<()> {
        if self.p != other.p {
            return Err(Error::ContextMismatch(self.p, other.p));
        }
        Ok(())
    }
}

/// Degree of a monomial.
pub fn degree(mask: usize) -> usize {
    mask.count_ones() as usize
}

/// Sign of `dx^I ∧ dx^J` relative to the ascending monomial `dx^{I∪J}`;
/// zero when the subsets overlap.
pub fn wedge_sign(i: usize, j: usize) -> f64 {
    if i & j != 0 {
        return 0.0;
    }
    let mut inversions = 0u32;
    let mut rest = j;
    while rest != 0 {
        let b = rest.trailing_zeros();
        inversions += (i >> (b + 1)).count_ones();
        rest &= rest - 1;
    }
    if inversions % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Element of the exterior algebra.
#[derive(Clone, Debug, PartialEq)]
pub struct Form {
    ctx: FormContext,
    coeffs: Vec<c64>,
}

impl Form {
    pub fn zero(ctx: FormContext) -> Self {
        Self {
            ctx,
            coeffs: vec![c64::new(0.0, 0.0); ctx.dim()],
        }
    }

    pub fn scalar(ctx: FormContext, c: c64) -> Self {
        Self::monomial(ctx, 0, c)
    }

    pub fn monomial(ctx: FormContext, mask: usize, c: c64) -> Self {
        let mut f = Self::zero(ctx);
        f.coeffs[mask] = c;
        f
    }

    /// The generator `dx{a+1}`.
    pub fn generator(ctx: FormContext, a: usize) -> Self {
        Self::monomial(ctx, 1 << a, c64::new(1.0, 0.0))
    }

    pub fn from_coeffs(ctx: FormContext, coeffs: Vec<c64>) -> Result<Self> {
        if coeffs.len() != ctx.dim() {
            return Err(Error::InvalidContext(ctx.p()));
        }
        Ok(Self { ctx, coeffs })
    }

    pub fn ctx(&self) -> FormContext {
        self.ctx
    }

    pub fn coeff(&self, mask: usize) -> c64 {
        self.coeffs[mask]
    }

    pub fn set_coeff(&mut self, mask: usize, c: c64) {
        self.coeffs[mask] = c;
    }

    pub fn coeffs(&self) -> &[c64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [c64] {
        &mut self.coeffs
    }

    /// Coefficient of `dx1 ∧ … ∧ dxp`.
    pub fn top(&self) -> c64 {
        self.coeffs[self.ctx.top()]
    }

    pub fn wedge(&self, other: &Form) -> Result<Form> {
        self.ctx.check(&other.ctx)?;
        let mut out = Form::zero(self.ctx);
        for (i, &a) in self.coeffs.iter().enumerate() {
            if a == c64::new(0.0, 0.0) {
                continue;
            }
            for (j, &b) in other.coeffs.iter().enumerate() {
                if i & j != 0 || b == c64::new(0.0, 0.0) {
                    continue;
                }
                out.coeffs[i | j] += a * b * wedge_sign(i, j);
            }
        }
        Ok(out)
    }

    /// Degree-`i` part.
    pub fn component(&self, i: usize) -> Result<Form> {
        if i > self.ctx.p() {
            return Err(Error::DegreeOutOfRange {
                degree: i,
                p: self.ctx.p(),
            });
        }
        let mut out = Form::zero(self.ctx);
        for (mask, &c) in self.coeffs.iter().enumerate() {
            if degree(mask) == i {
                out.coeffs[mask] = c;
            }
        }
        Ok(out)
    }

    /// Degree of a homogeneous form, `None` for zero or mixed forms.
    pub fn homogeneous_degree(&self) -> Option<usize> {
        let mut found = None;
        for (mask, c) in self.coeffs.iter().enumerate() {
            if c.norm() != 0.0 {
                match found {
                    None => found = Some(degree(mask)),
                    Some(d) if d != degree(mask) => return None,
                    _ => {}
                }
            }
        }
        found
    }

    pub fn scale(&self, c: c64) -> Form {
        Form {
            ctx: self.ctx,
            coeffs: self.coeffs.iter().map(|&a| a * c).collect(),
        }
    }

    /// Largest coefficient modulus.
    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Largest coefficient modulus of `self - other`.
    pub fn distance(&self, other: &Form) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Exterior derivative of a form-valued field from the partial derivatives
    /// of its coefficients: `d(f dx^I) = Σ_β ∂_β f dx^β ∧ dx^I`.
    pub fn exterior_derivative(partials: &[Form]) -> Result<Form> {
        let ctx = partials
            .first()
            .map(|f| f.ctx)
            .ok_or(Error::InvalidContext(0))?;
        if partials.len() != ctx.p() {
            return Err(Error::ContextMismatch(partials.len(), ctx.p()));
        }
        let mut out = Form::zero(ctx);
        for (beta, df) in partials.iter().enumerate() {
            ctx.check(&df.ctx)?;
            let e = Form::generator(ctx, beta);
            out += &e.wedge(df)?;
        }
        Ok(out)
    }
}

#[derive(Serialize, Deserialize)]
struct FormRecord {
    p: usize,
    coeffs: Vec<[f64; 2]>,
}

/// Written as `{"p": p, "coeffs": [[re, im], ...]}`, indexed by monomial mask.
impl Serialize for Form {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        FormRecord {
            p: self.ctx.p(),
            coeffs: self.coeffs.iter().map(|z| [z.re, z.im]).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Form {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rec = FormRecord::deserialize(d)?;
        let ctx = FormContext::new(rec.p).map_err(serde::de::Error::custom)?;
        let coeffs = rec.coeffs.into_iter().map(|[re, im]| c64::new(re, im)).collect();
        Form::from_coeffs(ctx, coeffs).map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for Form {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (mask, c) in self.coeffs.iter().enumerate() {
            if c.norm() == 0.0 {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({:.6e}{:+.6e}i)", c.re, c.im)?;
            if mask != 0 {
                write!(f, " {}", self.ctx.monomial_label(mask))?;
            }
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

impl Add<&Form> for &Form {
    type Output = Form;
    fn add(self, rhs: &Form) -> Form {
        assert_eq!(self.ctx, rhs.ctx, "form context mismatch");
        Form {
            ctx: self.ctx,
            coeffs: self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub<&Form> for &Form {
    type Output = Form;
    fn sub(self, rhs: &Form) -> Form {
        assert_eq!(self.ctx, rhs.ctx, "form context mismatch");
        Form {
            ctx: self.ctx,
            coeffs: self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a - b).collect(),
        }
    }
}

impl AddAssign<&Form> for Form {
    fn add_assign(&mut self, rhs: &Form) {
        assert_eq!(self.ctx, rhs.ctx, "form context mismatch");
        for (a, b) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
            *a += b;
        }
    }
}

impl Neg for &Form {
    type Output = Form;
    fn neg(self) -> Form {
        self.scale(c64::new(-1.0, 0.0))
    }
}

impl Mul<c64> for &Form {
    type Output = Form;
    fn mul(self, rhs: c64) -> Form {
        self.scale(rhs)
    }
}

/// The normalization sending a degree-`i` form `ω` to `(2π√−1)^{−i/2} ω`.
///
/// Odd degrees depend on the chosen square root of `√−1`; even degrees do not.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Phi {
    sqrt_i: c64,
}

impl Default for Phi {
    fn default() -> Self {
        Self {
            sqrt_i: c64::from_polar(1.0, PI / 4.0),
        }
    }
}

impl Phi {
    /// Uses `root` as the square root of `√−1`; `root² = √−1` is required.
    pub fn new(root: c64) -> Result<Self> {
        if (root * root - c64::new(0.0, 1.0)).norm() > 1e-12 {
            return Err(Error::InvalidSpec(format!(
                "{root} is not a square root of the imaginary unit"
            )));
        }
        Ok(Self { sqrt_i: root })
    }

    pub fn sqrt_i(&self) -> c64 {
        self.sqrt_i
    }

    /// `(2π√−1)^{−i/2}`.
    pub fn factor(&self, i: usize) -> c64 {
        let modulus = (2.0 * PI).powf(-(i as f64) / 2.0);
        self.sqrt_i.powi(-(i as i32)) * modulus
    }

    pub fn normalize(&self, a: &Form) -> Form {
        let factors: Vec<c64> = (0..=a.ctx.p()).map(|i| self.factor(i)).collect();
        Form {
            ctx: a.ctx,
            coeffs: a
                .coeffs
                .iter()
                .enumerate()
                .map(|(mask, &c)| c * factors[degree(mask)])
                .collect(),
        }
    }
}

/// Normalization with the default square root `e^{iπ/4}`.
pub fn phi_normalize(a: &Form) -> Form {
    Phi::default().normalize(a)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> c64 {
        c64::new(re, 0.0)
    }

    #[test]
    fn antisymmetry() {
        let ctx = FormContext::new(2).unwrap();
        let a = Form::generator(ctx, 0);
        let b = Form::generator(ctx, 1);
        let ab = a.wedge(&b).unwrap();
        let ba = b.wedge(&a).unwrap();
        assert_eq!(ab, -&ba);
        assert_eq!(ab.coeff(0b11), c(1.0));
    }

    #[test]
    fn bilinear_expansion() {
        let ctx = FormContext::new(2).unwrap();
        let a = &Form::scalar(ctx, c(2.0)) + &Form::generator(ctx, 0);
        let b = &Form::scalar(ctx, c(3.0)) + &Form::generator(ctx, 1);
        let p = a.wedge(&b).unwrap();
        assert_eq!(p.coeffs(), &[c(6.0), c(3.0), c(2.0), c(1.0)]);
    }

    #[test]
    fn nilpotent_generator() {
        let ctx = FormContext::new(3).unwrap();
        let a = Form::generator(ctx, 2);
        assert_eq!(a.wedge(&a).unwrap(), Form::zero(ctx));
    }

    #[test]
    fn context_mismatch() {
        let a = Form::zero(FormContext::new(2).unwrap());
        let b = Form::zero(FormContext::new(3).unwrap());
        assert!(matches!(a.wedge(&b), Err(Error::ContextMismatch(2, 3))));
    }

    #[test]
    fn phi_scalar_and_top() {
        let ctx = FormContext::new(4).unwrap();
        let phi = Phi::default();
        let s = phi.normalize(&Form::scalar(ctx, c(5.0)));
        assert_eq!(s.coeff(0), c(5.0));
        let two = phi.normalize(&Form::monomial(ctx, 0b0011, c(1.0)));
        let expected = c64::new(0.0, 2.0 * PI).inv();
        assert!((two.coeff(0b0011) - expected).norm() < 1e-15);
        let four = phi.normalize(&Form::monomial(ctx, 0b1111, c(1.0)));
        assert!((four.coeff(0b1111) - c(-1.0 / (4.0 * PI * PI))).norm() < 1e-15);
    }

    #[test]
    fn phi_even_degrees_ignore_root_choice() {
        let other = Phi::new(c64::from_polar(1.0, 5.0 * PI / 4.0)).unwrap();
        let phi = Phi::default();
        for i in [0, 2, 4] {
            assert!((other.factor(i) - phi.factor(i)).norm() < 1e-15);
        }
        assert!((other.factor(1) + phi.factor(1)).norm() < 1e-15);
        assert!(Phi::new(c(1.0)).is_err());
    }

    #[test]
    fn components_partition() {
        let ctx = FormContext::new(2).unwrap();
        let a = &Form::scalar(ctx, c(6.0)) + &Form::generator(ctx, 0).scale(c(3.0));
        assert_eq!(a.component(0).unwrap(), Form::scalar(ctx, c(6.0)));
        assert_eq!(a.component(1).unwrap(), Form::generator(ctx, 0).scale(c(3.0)));
        let mut sum = Form::zero(ctx);
        for i in 0..=2 {
            sum += &a.component(i).unwrap();
        }
        assert_eq!(sum, a);
        assert!(a.component(3).is_err());
    }

    #[test]
    fn sign_table() {
        assert_eq!(wedge_sign(0b01, 0b10), 1.0);
        assert_eq!(wedge_sign(0b10, 0b01), -1.0);
        assert_eq!(wedge_sign(0b110, 0b001), 1.0);
        assert_eq!(wedge_sign(0b100, 0b011), 1.0);
        assert_eq!(wedge_sign(0b010, 0b101), -1.0);
        assert_eq!(wedge_sign(0b011, 0b010), 0.0);
    }
}
