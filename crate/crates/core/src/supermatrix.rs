//! Form-valued endomorphisms of a Z-graded vector space.
//!
//! An element of `Λ ⊗̂ End(E)` is stored as one `R × R` matrix per exterior
//! monomial. The product follows the Koszul rule
//! `(α ⊗ M)(β ⊗ N) = (−1)^{|M||β|} (α ∧ β) ⊗ MN`, which for an inhomogeneous
//! `M` amounts to replacing `M` by `εMε` whenever `β` is odd.

use std::ops::{Add, Mul, Neg, Sub};

use faer::linalg::matmul::matmul;
use faer::{c64, Accum, Mat, MatRef, Par};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exterior::{degree, wedge_sign, Form, FormContext};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct GradedSpace {
    ranks: Vec<usize>,
    offsets: Vec<usize>,
    dim: usize,
}

impl TryFrom<Vec<usize>> for GradedSpace {
    type Error = Error;
    fn try_from(ranks: Vec<usize>) -> Result<Self> {
        GradedSpace::new(ranks)
    }
}

impl From<GradedSpace> for Vec<usize> {
    fn from(s: GradedSpace) -> Self {
        s.ranks
    }
}

impl GradedSpace {
    /// Space `E⁰ ⊕ … ⊕ Eⁿ` with `n ≥ 1` and positive total rank.
    pub fn new(ranks: Vec<usize>) -> Result<Self> {
        if ranks.len() < 2 {
            return Err(Error::InvalidRanks(format!(
                "need at least two degrees, got {}",
                ranks.len()
            )));
        }
        let mut offsets = Vec::with_capacity(ranks.len());
        let mut dim = 0;
        for &r in &ranks {
            offsets.push(dim);
            dim += r;
        }
        if dim == 0 {
            return Err(Error::InvalidRanks("total rank is zero".into()));
        }
        Ok(Self {
            ranks,
            offsets,
            dim,
        })
    }

    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    /// Top degree `n`.
    pub fn top_degree(&self) -> usize {
        self.ranks.len() - 1
    }

    /// Total rank `R`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self, i: usize) -> usize {
        self.ranks[i]
    }

    pub fn offset(&self, i: usize) -> usize {
        self.offsets[i]
    }

    pub fn block_range(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i] + self.ranks[i]
    }

    /// Degree of the summand containing basis vector `k`.
    pub fn degree_of(&self, k: usize) -> usize {
        (0..self.ranks.len())
            .rev()
            .find(|&i| self.ranks[i] > 0 && self.offsets[i] <= k)
            .unwrap_or(0)
    }

    /// `(−1)^i` on each basis vector.
    pub fn signs(&self) -> Vec<f64> {
        (0..self.dim)
            .map(|k| if self.degree_of(k) % 2 == 0 { 1.0 } else { -1.0 })
            .collect()
    }

    /// Supertrace `Σ (−1)^i tr(M_ii)`.
    pub fn str_matrix(&self, m: MatRef<'_, c64>) -> c64 {
        let signs = self.signs();
        (0..self.dim).map(|k| m[(k, k)] * signs[k]).sum()
    }

    /// Number operator as a matrix.
    pub fn number_matrix(&self) -> Mat<c64> {
        Mat::from_fn(self.dim, self.dim, |i, j| {
            if i == j {
                c64::new(self.degree_of(i) as f64, 0.0)
            } else {
                c64::new(0.0, 0.0)
            }
        })
    }

    /// Grading `ε = (−1)^N` as a matrix.
    pub fn epsilon_matrix(&self) -> Mat<c64> {
        let s = self.signs();
        Mat::from_fn(self.dim, self.dim, |i, j| {
            if i == j {
                c64::new(s[i], 0.0)
            } else {
                c64::new(0.0, 0.0)
            }
        })
    }

    /// Supertrace of the number operator, `Σ (−1)^i i rᵢ`.
    pub fn str_number(&self) -> f64 {
        self.ranks
            .iter()
            .enumerate()
            .map(|(i, &r)| if i % 2 == 0 { (i * r) as f64 } else { -((i * r) as f64) })
            .sum()
    }
}

/// `εMε`: negates the entries of `m` joining summands of opposite parity.
pub fn conjugate_by_epsilon(space: &GradedSpace, m: MatRef<'_, c64>) -> Mat<c64> {
    let s = space.signs();
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * (s[i] * s[j]))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuperElement {
    space: GradedSpace,
    ctx: FormContext,
    blocks: Vec<Mat<c64>>,
}

impl SuperElement {
    pub fn zero(space: &GradedSpace, ctx: FormContext) -> Self {
        let n = space.dim();
        Self {
            space: space.clone(),
            ctx,
            blocks: (0..ctx.dim()).map(|_| Mat::zeros(n, n)).collect(),
        }
    }

    pub fn identity(space: &GradedSpace, ctx: FormContext) -> Self {
        let mut e = Self::zero(space, ctx);
        e.blocks[0] = Mat::identity(space.dim(), space.dim());
        e
    }

    /// `dx^mask ⊗ m`.
    pub fn from_block(space: &GradedSpace, ctx: FormContext, mask: usize, m: Mat<c64>) -> Result<Self> {
        if m.nrows() != space.dim() || m.ncols() != space.dim() {
            return Err(Error::SpaceMismatch);
        }
        let mut e = Self::zero(space, ctx);
        e.blocks[mask] = m;
        Ok(e)
    }

    /// Form-degree-0 element `1 ⊗ m`.
    pub fn from_matrix(space: &GradedSpace, ctx: FormContext, m: Mat<c64>) -> Result<Self> {
        Self::from_block(space, ctx, 0, m)
    }

    /// `Σ_α dx^α ⊗ m_α`.
    pub fn one_form(space: &GradedSpace, ctx: FormContext, parts: &[Mat<c64>]) -> Result<Self> {
        if parts.len() != ctx.p() {
            return Err(Error::ContextMismatch(parts.len(), ctx.p()));
        }
        let mut e = Self::zero(space, ctx);
        for (a, m) in parts.iter().enumerate() {
            if m.nrows() != space.dim() || m.ncols() != space.dim() {
                return Err(Error::SpaceMismatch);
            }
            e.blocks[1 << a] = m.clone();
        }
        Ok(e)
    }

    /// Number operator `N`.
    pub fn number(space: &GradedSpace, ctx: FormContext) -> Self {
        let mut e = Self::zero(space, ctx);
        e.blocks[0] = space.number_matrix();
        e
    }

    pub fn space(&self) -> &GradedSpace {
        &self.space
    }

    pub fn ctx(&self) -> FormContext {
        self.ctx
    }

    pub fn block(&self, mask: usize) -> MatRef<'_, c64> {
        self.blocks[mask].as_ref()
    }

    pub fn block_mut(&mut self, mask: usize) -> &mut Mat<c64> {
        &mut self.blocks[mask]
    }

    pub fn blocks(&self) -> &[Mat<c64>] {
        &self.blocks
    }

    fn check(&self, other: &SuperElement) -> Result<()> {
        if self.ctx != other.ctx {
            return Err(Error::ContextMismatch(self.ctx.p(), other.ctx.p()));
        }
        if self.space != other.space {
            return Err(Error::SpaceMismatch);
        }
        Ok(())
    }

    fn map(&self, f: impl Fn(usize, &Mat<c64>) -> Mat<c64>) -> Self {
        Self {
            space: self.space.clone(),
            ctx: self.ctx,
            blocks: self.blocks.iter().enumerate().map(|(i, m)| f(i, m)).collect(),
        }
    }

    fn zip(&self, other: &Self, f: impl Fn(&Mat<c64>, &Mat<c64>) -> Mat<c64>) -> Self {
        assert!(self.check(other).is_ok(), "super element shape mismatch");
        Self {
            space: self.space.clone(),
            ctx: self.ctx,
            blocks: self.blocks.iter().zip(&other.blocks).map(|(a, b)| f(a, b)).collect(),
        }
    }

    pub fn scale(&self, c: c64) -> Self {
        self.map(|_, m| m * faer::Scale(c))
    }

    /// Sum of the Frobenius norms of the coefficient matrices; submultiplicative.
    pub fn norm(&self) -> f64 {
        self.blocks.iter().map(|m| m.norm_l2()).sum()
    }

    /// Largest entry modulus over all coefficient matrices.
    pub fn max_abs(&self) -> f64 {
        self.blocks
            .iter()
            .flat_map(|m| {
                (0..m.ncols()).flat_map(move |j| (0..m.nrows()).map(move |i| m[(i, j)].norm()))
            })
            .fold(0.0, f64::max)
    }

    /// Form-degree-`i` part.
    pub fn form_component(&self, i: usize) -> Result<Self> {
        if i > self.ctx.p() {
            return Err(Error::DegreeOutOfRange {
                degree: i,
                p: self.ctx.p(),
            });
        }
        let n = self.space.dim();
        Ok(self.map(|mask, m| if degree(mask) == i { m.clone() } else { Mat::zeros(n, n) }))
    }

    /// Part of total parity `k` (0 even, 1 odd).
    pub fn parity_part(&self, k: usize) -> Self {
        let s = self.space.signs();
        self.map(|mask, m| {
            let form_sign = if degree(mask) % 2 == 0 { 1.0 } else { -1.0 };
            Mat::from_fn(m.nrows(), m.ncols(), |i, j| {
                let total = form_sign * s[i] * s[j];
                let keep = (total > 0.0) == (k % 2 == 0);
                if keep {
                    m[(i, j)]
                } else {
                    c64::new(0.0, 0.0)
                }
            })
        })
    }

    /// Total parity if the element is homogeneous; zero counts as even.
    pub fn parity(&self) -> Option<usize> {
        let odd = self.parity_part(1).max_abs();
        let even = self.parity_part(0).max_abs();
        match (even > 0.0, odd > 0.0) {
            (_, false) => Some(0),
            (false, true) => Some(1),
            _ => None,
        }
    }

    pub fn smul(&self, other: &SuperElement) -> Result<SuperElement> {
        self.check(other)?;
        let n = self.space.dim();
        let mut out = SuperElement::zero(&self.space, self.ctx);
        let nonzero = |m: &Mat<c64>| (0..n).any(|j| (0..n).any(|i| m[(i, j)] != c64::new(0.0, 0.0)));
        let left: Vec<(usize, &Mat<c64>, Mat<c64>)> = self
            .blocks
            .iter()
            .enumerate()
            .filter(|(_, m)| nonzero(m))
            .map(|(i, m)| (i, m, conjugate_by_epsilon(&self.space, m.as_ref())))
            .collect();
        for (j, b) in other.blocks.iter().enumerate() {
            if !nonzero(b) {
                continue;
            }
            for (i, a, twisted) in &left {
                let sign = wedge_sign(*i, j);
                if sign == 0.0 {
                    continue;
                }
                let a_eff = if degree(j) % 2 == 1 { twisted } else { *a };
                matmul(
                    out.blocks[i | j].as_mut(),
                    Accum::Add,
                    a_eff.as_ref(),
                    b.as_ref(),
                    c64::new(sign, 0.0),
                    Par::Seq,
                );
            }
        }
        Ok(out)
    }

    /// Supertrace `Σ_I tr(ε M_I) dx^I`.
    pub fn supertrace(&self) -> Form {
        let mut f = Form::zero(self.ctx);
        for (mask, m) in self.blocks.iter().enumerate() {
            f.set_coeff(mask, self.space.str_matrix(m.as_ref()));
        }
        f
    }

    /// Graded bracket `[A, B] = AB − (−1)^{|A||B|} BA`, extended bilinearly
    /// over the parity decomposition of both arguments.
    pub fn supercommutator(&self, other: &SuperElement) -> Result<SuperElement> {
        self.check(other)?;
        let mut out = SuperElement::zero(&self.space, self.ctx);
        let a = [self.parity_part(0), self.parity_part(1)];
        let b = [other.parity_part(0), other.parity_part(1)];
        for (pa, ea) in a.iter().enumerate() {
            for (pb, eb) in b.iter().enumerate() {
                let ab = ea.smul(eb)?;
                let ba = eb.smul(ea)?;
                out = if pa * pb == 1 { &(&out + &ab) + &ba } else { &(&out + &ab) - &ba };
            }
        }
        Ok(out)
    }

    /// Exponential in the graded algebra, for even elements.
    pub fn superexp(&self) -> Result<SuperElement> {
        let odd = self.parity_part(1).norm();
        let total = self.norm();
        if odd > 1e-14 * total.max(1.0) {
            return Err(Error::NotEven);
        }
        let a = self.parity_part(0);
        let nrm = a.norm();
        let mut s = 0u32;
        if nrm > 0.5 {
            s = (nrm / 0.5).log2().ceil() as u32;
        }
        let scaled = a.scale(c64::new(0.5f64.powi(s as i32), 0.0));
        let mut result = SuperElement::identity(&self.space, self.ctx);
        let mut term = SuperElement::identity(&self.space, self.ctx);
        for k in 1..=40 {
            term = term.smul(&scaled)?.scale(c64::new(1.0 / k as f64, 0.0));
            result = &result + &term;
            if term.norm() <= f64::EPSILON * 1e-2 * result.norm() {
                break;
            }
        }
        for _ in 0..s {
            result = result.smul(&result)?;
        }
        Ok(result)
    }
}

impl Add<&SuperElement> for &SuperElement {
    type Output = SuperElement;
    fn add(self, rhs: &SuperElement) -> SuperElement {
        self.zip(rhs, |a, b| a + b)
    }
}

impl Sub<&SuperElement> for &SuperElement {
    type Output = SuperElement;
    fn sub(self, rhs: &SuperElement) -> SuperElement {
        self.zip(rhs, |a, b| a - b)
    }
}

impl Neg for &SuperElement {
    type Output = SuperElement;
    fn neg(self) -> SuperElement {
        self.scale(c64::new(-1.0, 0.0))
    }
}

/// Koszul product; panics on mismatched spaces, see [`SuperElement::smul`].
impl Mul<&SuperElement> for &SuperElement {
    type Output = SuperElement;
    fn mul(self, rhs: &SuperElement) -> SuperElement {
        self.smul(rhs).expect("super element shape mismatch")
    }
}

pub fn smul(a: &SuperElement, b: &SuperElement) -> Result<SuperElement> {
    a.smul(b)
}

pub fn supertrace(a: &SuperElement) -> Form {
    a.supertrace()
}

pub fn supercommutator(a: &SuperElement, b: &SuperElement) -> Result<SuperElement> {
    a.supercommutator(b)
}

pub fn superexp(a: &SuperElement) -> Result<SuperElement> {
    a.superexp()
}
