//! Flat cochain complexes with hermitian metrics over flat tori.

use std::f64::consts::PI;
use std::path::Path;

use faer::linalg::solvers::DenseSolveCore;
use faer::{c64, Mat, Side};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cplx::{matrix_to_rows, rows_to_matrix};
use crate::error::{Error, Result};
use crate::exterior::FormContext;
use crate::supermatrix::{GradedSpace, SuperElement};
use crate::trigpoly::{line_derivative, max_abs, RawField, TrigPolyField};

/// Samples per axis used for spectral line derivatives of non-polynomial fields.
pub const LINE_SAMPLES: usize = 65;

#[derive(Clone, Debug, Serialize, Deserialize)]
struct RawSpec {
    ranks: Vec<usize>,
    v0: Vec<Vec<Vec<[f64; 2]>>>,
    h: RawField,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    g: Option<RawField>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    periods: Option<Vec<f64>>,
}

/// A flat complex `(E, v, ∇, h)` built from a constant differential `v₀`, a
/// metric field `h` and an optional gauge `g`, with `∇ = d + g⁻¹dg` and
/// `v = g⁻¹v₀g`.
#[derive(Clone, Debug)]
pub struct FlatComplexSpec {
    space: GradedSpace,
    ctx: FormContext,
    v0: Mat<c64>,
    h: TrigPolyField,
    g: Option<TrigPolyField>,
    dh: Vec<TrigPolyField>,
    dg: Vec<TrigPolyField>,
}

impl FlatComplexSpec {
    /// `v0_blocks[i]` is the `r_{i+1} × r_i` map `E^i → E^{i+1}`.
    pub fn new(
        space: GradedSpace,
        v0_blocks: Vec<Mat<c64>>,
        h: TrigPolyField,
        g: Option<TrigPolyField>,
    ) -> Result<Self> {
        let n = space.dim();
        let p = h.p();
        let ctx = FormContext::new(p)?;
        if v0_blocks.len() != space.top_degree() {
            return Err(Error::InvalidSpec(format!(
                "expected {} differential blocks, got {}",
                space.top_degree(),
                v0_blocks.len()
            )));
        }
        let mut v0 = Mat::<c64>::zeros(n, n);
        for (i, b) in v0_blocks.iter().enumerate() {
            let (rows, cols) = (space.rank(i + 1), space.rank(i));
            if b.nrows() != rows || b.ncols() != cols {
                return Err(Error::InvalidSpec(format!(
                    "block {i} is {}x{}, expected {rows}x{cols}",
                    b.nrows(),
                    b.ncols()
                )));
            }
            for c in 0..cols {
                for r in 0..rows {
                    v0[(space.offset(i + 1) + r, space.offset(i) + c)] = b[(r, c)];
                }
            }
        }
        let sq = &v0 * &v0;
        let scale = max_abs(&v0).max(1.0);
        if max_abs(&sq) > 1e-12 * scale * scale {
            return Err(Error::NotNilpotent(max_abs(&sq)));
        }
        if h.shape() != (n, n) {
            return Err(Error::InvalidSpec(format!("metric must be {n}x{n}")));
        }
        let herm = h.hermitian_defect();
        if herm > 1e-12 {
            return Err(Error::InvalidSpec(format!("metric coefficients are not hermitian (defect {herm:.3e})")));
        }
        check_block_diagonal(&space, &h, "metric")?;
        if let Some(g) = &g {
            if g.shape() != (n, n) {
                return Err(Error::InvalidSpec(format!("gauge must be {n}x{n}")));
            }
            if g.periods() != h.periods() {
                return Err(Error::InvalidSpec("gauge and metric periods differ".into()));
            }
            check_block_diagonal(&space, g, "gauge")?;
        }
        let dh = (0..p).map(|a| h.deriv(a)).collect();
        let dg = g.as_ref().map(|g| (0..p).map(|a| g.deriv(a)).collect()).unwrap_or_default();
        Ok(Self {
            space,
            ctx,
            v0,
            h,
            g,
            dh,
            dg,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawSpec = serde_json::from_str(text)?;
        let space = GradedSpace::new(raw.ranks.clone())?;
        let periods = match raw.periods {
            Some(p) => p,
            None => {
                let p = raw
                    .h
                    .coeffs
                    .first()
                    .map(|t| t.k.len())
                    .ok_or_else(|| Error::InvalidSpec("metric has no coefficients".into()))?;
                vec![2.0 * PI; p]
            }
        };
        let mut blocks = Vec::with_capacity(raw.v0.len());
        for (i, b) in raw.v0.iter().enumerate() {
            let cols = space.ranks().get(i).copied().unwrap_or(0);
            let m = rows_to_matrix(b, cols)
                .ok_or_else(|| Error::InvalidSpec(format!("differential block {i} has wrong shape")))?;
            blocks.push(m);
        }
        let n = space.dim();
        let h = TrigPolyField::from_raw(&raw.h, n, n, periods.clone())?;
        let g = raw
            .g
            .as_ref()
            .map(|g| TrigPolyField::from_raw(g, n, n, periods.clone()))
            .transpose()?;
        Self::new(space, blocks, h, g)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        let v0 = (0..self.space.top_degree())
            .map(|i| {
                let r = self.space.block_range(i + 1);
                let c = self.space.block_range(i);
                matrix_to_rows(&self.v0.as_ref().subrows(r.start, r.len()).subcols(c.start, c.len()).to_owned())
            })
            .collect();
        let raw = RawSpec {
            ranks: self.space.ranks().to_vec(),
            v0,
            h: self.h.to_raw(),
            g: self.g.as_ref().map(|g| g.to_raw()),
            periods: Some(self.h.periods().to_vec()),
        };
        Ok(serde_json::to_string_pretty(&raw)?)
    }

    pub fn space(&self) -> &GradedSpace {
        &self.space
    }

    pub fn ctx(&self) -> FormContext {
        self.ctx
    }

    pub fn p(&self) -> usize {
        self.ctx.p()
    }

    pub fn periods(&self) -> &[f64] {
        self.h.periods()
    }

    pub fn v0(&self) -> &Mat<c64> {
        &self.v0
    }

    pub fn metric(&self) -> &TrigPolyField {
        &self.h
    }

    pub fn gauge(&self) -> Option<&TrigPolyField> {
        self.g.as_ref()
    }

    /// Base volume `Π L_α`.
    pub fn volume(&self) -> f64 {
        self.periods().iter().product()
    }

    /// Uniform grid with `n` points per axis, axis 0 slowest.
    pub fn grid(&self, n: usize) -> Vec<Vec<f64>> {
        uniform_grid(self.periods(), n)
    }

    pub fn h_at(&self, x: &[f64]) -> Mat<c64> {
        self.h.eval(x)
    }

    pub fn dh_at(&self, x: &[f64]) -> Vec<Mat<c64>> {
        self.dh.iter().map(|d| d.eval(x)).collect()
    }

    /// Gauge value, its inverse and the connection coefficients `g⁻¹∂_αg`.
    fn gauge_at(&self, x: &[f64]) -> Result<Option<(Mat<c64>, Mat<c64>, Vec<Mat<c64>>)>> {
        let Some(g) = &self.g else { return Ok(None) };
        let gx = g.eval(x);
        let gi = inverse(&gx, "gauge")?;
        let gamma = self.dg.iter().map(|d| &gi * d.eval(x)).collect();
        Ok(Some((gx, gi, gamma)))
    }

    /// Connection coefficients `Γ_α(x)`.
    pub fn gamma_at(&self, x: &[f64]) -> Result<Vec<Mat<c64>>> {
        let n = self.space.dim();
        Ok(match self.gauge_at(x)? {
            Some((_, _, gamma)) => gamma,
            None => vec![Mat::zeros(n, n); self.p()],
        })
    }

    /// Differential `v(x) = g⁻¹v₀g`.
    pub fn v_at(&self, x: &[f64]) -> Result<Mat<c64>> {
        Ok(match self.gauge_at(x)? {
            Some((g, gi, _)) => &gi * &self.v0 * &g,
            None => self.v0.clone(),
        })
    }

    pub fn point_data(&self, x: &[f64]) -> Result<PointData> {
        if x.len() != self.p() {
            return Err(Error::ContextMismatch(x.len(), self.p()));
        }
        let h = self.h_at(x);
        let dh = self.dh_at(x);
        let (v, gamma) = match self.gauge_at(x)? {
            Some((g, gi, gamma)) => (&gi * &self.v0 * &g, gamma),
            None => (self.v0.clone(), vec![Mat::zeros(self.space.dim(), self.space.dim()); self.p()]),
        };
        let hinv = inverse(&h, "metric")?;
        let v_star = adjoint_with_inverse(&v, &h, &hinv);
        let omega = dh
            .iter()
            .zip(&gamma)
            .map(|(d, g)| omega_component(&hinv, &h, d, g))
            .collect();
        Ok(PointData {
            x: x.to_vec(),
            space: self.space.clone(),
            ctx: self.ctx,
            v,
            v_star,
            h,
            gamma,
            omega,
        })
    }

    /// Flatness residuals and metric positivity.
    ///
    /// Positivity is checked on `positivity_n` points per axis, the
    /// curvature residuals on `residual_n` points per axis.
    pub fn validate_flatness(&self, positivity_n: usize, residual_n: usize) -> Result<ValidationReport> {
        if positivity_n == 0 || residual_n == 0 {
            return Err(Error::InvalidSpec("empty validation grid".into()));
        }
        let (min_eig, worst_x) = self.min_metric_eigenvalue(positivity_n)?;
        if min_eig <= 0.0 {
            return Err(Error::IndefiniteMetric { x: worst_x, min_eig });
        }
        let pts = self.grid(residual_n);
        let res: Vec<(f64, f64)> = pts
            .par_iter()
            .map(|x| self.flatness_residual_at(x))
            .collect::<Result<Vec<_>>>()?;
        let curvature = res.iter().map(|r| r.0).fold(0.0, f64::max);
        let commutator = res.iter().map(|r| r.1).fold(0.0, f64::max);
        Ok(ValidationReport {
            min_metric_eigenvalue: min_eig,
            worst_point: worst_x,
            curvature_residual: curvature,
            commutator_residual: commutator,
            passed: curvature <= 1e-10 && commutator <= 1e-10,
        })
    }

    /// Smallest eigenvalue of `h` over the grid and where it occurs.
    pub fn min_metric_eigenvalue(&self, n: usize) -> Result<(f64, Vec<f64>)> {
        let pts = self.grid(n);
        let mins: Vec<f64> = pts
            .par_iter()
            .map(|x| min_hermitian_eigenvalue(&self.h_at(x)))
            .collect::<Result<Vec<_>>>()?;
        let (i, m) = mins
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, &m)| if m < acc.1 { (i, m) } else { acc });
        Ok((m, pts[i].clone()))
    }

    /// `max |dΓ + Γ∧Γ|` and `max |dv + [Γ, v]|` at `x`.
    pub fn flatness_residual_at(&self, x: &[f64]) -> Result<(f64, f64)> {
        if self.g.is_none() {
            return Ok((0.0, 0.0));
        }
        let p = self.p();
        let gamma = self.gamma_at(x)?;
        let v = self.v_at(x)?;
        let dgamma: Vec<Vec<Mat<c64>>> = (0..p)
            .map(|b| {
                (0..p)
                    .map(|a| {
                        line_derivative(
                            |y| self.gamma_at(y).map(|g| g[a].clone()).unwrap_or_else(|_| nan_matrix(v.nrows())),
                            x,
                            b,
                            self.periods()[b],
                            LINE_SAMPLES,
                        )
                    })
                    .collect()
            })
            .collect();
        let mut curv = 0.0f64;
        for a in 0..p {
            for b in (a + 1)..p {
                let f = &dgamma[a][b] - &dgamma[b][a] + &gamma[a] * &gamma[b] - &gamma[b] * &gamma[a];
                curv = curv.max(max_abs(&f));
            }
        }
        let mut comm = 0.0f64;
        for a in 0..p {
            let dv = line_derivative(
                |y| self.v_at(y).unwrap_or_else(|_| nan_matrix(v.nrows())),
                x,
                a,
                self.periods()[a],
                LINE_SAMPLES,
            );
            let r = dv + &gamma[a] * &v - &v * &gamma[a];
            comm = comm.max(max_abs(&r));
        }
        Ok((curv, comm))
    }

    /// Smallest eigenvalue of `(v + v*)²` over the grid.
    pub fn acyclicity_check(&self, n: usize) -> Result<f64> {
        let pts = self.grid(n);
        let vals: Vec<f64> = pts
            .par_iter()
            .map(|x| self.point_data(x).and_then(|pd| pd.laplacian_min_eigenvalue()))
            .collect::<Result<Vec<_>>>()?;
        Ok(vals.into_iter().fold(f64::INFINITY, f64::min))
    }
}

fn nan_matrix(n: usize) -> Mat<c64> {
    Mat::from_fn(n, n, |_, _| c64::new(f64::NAN, f64::NAN))
}

fn check_block_diagonal(space: &GradedSpace, f: &TrigPolyField, what: &str) -> Result<()> {
    for (k, m) in f.terms() {
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                if space.degree_of(i) != space.degree_of(j) && m[(i, j)].norm() != 0.0 {
                    return Err(Error::InvalidSpec(format!(
                        "{what} coefficient for {k:?} mixes degrees at entry ({i}, {j})"
                    )));
                }
            }
        }
    }
    Ok(())
}

pub fn uniform_grid(periods: &[f64], n: usize) -> Vec<Vec<f64>> {
    let p = periods.len();
    let total = n.pow(p as u32);
    (0..total)
        .map(|mut idx| {
            let mut x = vec![0.0; p];
            for a in (0..p).rev() {
                x[a] = periods[a] * (idx % n) as f64 / n as f64;
                idx /= n;
            }
            x
        })
        .collect()
}

pub(crate) fn inverse(m: &Mat<c64>, what: &str) -> Result<Mat<c64>> {
    let inv = m.partial_piv_lu().inverse();
    if (0..inv.ncols()).any(|j| (0..inv.nrows()).any(|i| !inv[(i, j)].re.is_finite() || !inv[(i, j)].im.is_finite())) {
        return Err(Error::Singular(what.into()));
    }
    Ok(inv)
}

pub(crate) fn min_hermitian_eigenvalue(m: &Mat<c64>) -> Result<f64> {
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
    let s = evd.S();
    Ok((0..s.dim()).map(|i| s[i].re).fold(f64::INFINITY, f64::min))
}

fn adjoint_with_inverse(v: &Mat<c64>, h: &Mat<c64>, hinv: &Mat<c64>) -> Mat<c64> {
    hinv * v.adjoint() * h
}

/// Adjoint `h⁻¹v†h` of `v` with respect to a block-diagonal metric `h`;
/// blockwise this is `h_i⁻¹ v_i† h_{i+1}`.
pub fn adjoint_v(v: &Mat<c64>, h: &Mat<c64>) -> Result<Mat<c64>> {
    let hinv = inverse(h, "metric")?;
    Ok(adjoint_with_inverse(v, h, &hinv))
}

/// `ω_α = h⁻¹(∂_α h − Γ_α† h − h Γ_α)`, so that `∇* = ∇ + ω`.
fn omega_component(hinv: &Mat<c64>, h: &Mat<c64>, dh: &Mat<c64>, gamma: &Mat<c64>) -> Mat<c64> {
    let inner = dh - gamma.adjoint() * h - h * gamma;
    hinv * inner
}

/// The one-form `ω` at `x`, as a super element.
pub fn omega_form(spec: &FlatComplexSpec, x: &[f64]) -> Result<SuperElement> {
    spec.point_data(x)?.omega_element()
}

/// Pointwise data of a flat complex.
#[derive(Clone, Debug, PartialEq)]
pub struct PointData {
    pub x: Vec<f64>,
    pub space: GradedSpace,
    pub ctx: FormContext,
    pub v: Mat<c64>,
    pub v_star: Mat<c64>,
    pub h: Mat<c64>,
    pub gamma: Vec<Mat<c64>>,
    pub omega: Vec<Mat<c64>>,
}

impl PointData {
    pub fn omega_element(&self) -> Result<SuperElement> {
        SuperElement::one_form(&self.space, self.ctx, &self.omega)
    }

    pub fn gamma_element(&self) -> Result<SuperElement> {
        SuperElement::one_form(&self.space, self.ctx, &self.gamma)
    }

    /// `(v + v*)²`.
    pub fn laplacian(&self) -> Mat<c64> {
        let s = &self.v + &self.v_star;
        &s * &s
    }

    /// Smallest eigenvalue of `(v + v*)²`, computed in an orthonormal frame.
    pub fn laplacian_min_eigenvalue(&self) -> Result<f64> {
        let (p, pinv) = unitary_frame(&self.h)?;
        let vt = &p * &self.v * &pinv;
        let s = &vt + vt.adjoint();
        let herm = Mat::from_fn(s.nrows(), s.ncols(), |i, j| (s[(i, j)] + s[(j, i)].conj()) * 0.5);
        let sq = &herm * &herm;
        min_hermitian_eigenvalue(&sq)
    }
}

/// `P = L†` and `P⁻¹` for the Cholesky factor `h = LL†`, so that
/// `P M P⁻¹` is the matrix of `M` in an `h`-orthonormal frame.
pub fn unitary_frame(h: &Mat<c64>) -> Result<(Mat<c64>, Mat<c64>)> {
    let llt = h
        .llt(Side::Lower)
        .map_err(|_| Error::IndefiniteMetric {
            x: Vec::new(),
            min_eig: min_hermitian_eigenvalue(h).unwrap_or(f64::NAN),
        })?;
    let l = llt.L().to_owned();
    let p = l.adjoint().to_owned();
    let pinv = inverse(&p, "metric factor")?;
    Ok((p, pinv))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ValidationReport {
    pub min_metric_eigenvalue: f64,
    pub worst_point: Vec<f64>,
    pub curvature_residual: f64,
    pub commutator_residual: f64,
    pub passed: bool,
}
