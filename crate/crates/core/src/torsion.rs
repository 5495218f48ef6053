//! Torsion forms as zeta-regularized time integrals of supertraces.
//!
//! For an integrand `F` with small-time expansion `Σ_e A_e t^e`, the value
//! returned is `ζ'(0)` for `ζ(s) = −Γ(s)⁻¹ ∫₀^∞ t^{s−1} F(t) dt`:
//!
//! `−∫_{t_f}^∞ F dt/t − Σ_{e≠0} A_e t_f^e / e − A_0 (log t_f + γ)`,
//!
//! where the fitted expansion stands in for `F` on `(0, t_f]`.

use faer::linalg::solvers::SolveLstsq;
use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exterior::{Form, FormContext, Phi};
use crate::flat::{unitary_frame, FlatComplexSpec, PointData};
use crate::quad::{integrate, QuadOptions};
use crate::superconn::{d_4t, d_u, form_partials};
use crate::supermatrix::{GradedSpace, SuperElement};

/// Euler-Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

#[derive(Clone, Debug)]
pub struct TorsionOptions {
    /// Split point between the fitted expansion and quadrature.
    pub t_fit: f64,
    /// Sampling window of the small-time fit.
    pub window: (f64, f64),
    pub exponents: Vec<f64>,
    pub samples: usize,
    /// Largest accepted fit residual, relative to the largest sample.
    pub fit_tol: f64,
    /// Upper limit is `decay_margin / κ` for an integrand decaying like `e^{−κt}`.
    pub decay_margin: f64,
    pub quad: QuadOptions,
    pub phi: Phi,
}

impl Default for TorsionOptions {
    fn default() -> Self {
        Self {
            t_fit: 1e-4,
            window: (1e-5, 1e-3),
            exponents: vec![-1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0],
            samples: 64,
            fit_tol: 1e-6,
            decay_margin: 50.0,
            quad: QuadOptions::default(),
            phi: Phi::default(),
        }
    }
}

/// Least-squares fit `F(t) ≈ Σ_e A_e t^e`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AsymptoticFit {
    pub exponents: Vec<f64>,
    pub coeffs: Vec<Form>,
    /// Largest residual relative to the largest sample.
    pub residual: f64,
    pub window: (f64, f64),
    pub samples: usize,
    /// Condition number of the column-scaled design matrix.
    pub condition: f64,
}

impl AsymptoticFit {
    pub fn coefficient(&self, e: f64) -> Option<&Form> {
        self.exponents
            .iter()
            .position(|&x| (x - e).abs() < 1e-12)
            .map(|i| &self.coeffs[i])
    }

    /// Largest coefficient among exponents `≤ e_max`.
    pub fn max_coefficient_up_to(&self, e_max: f64) -> f64 {
        self.exponents
            .iter()
            .zip(&self.coeffs)
            .filter(|(&e, _)| e <= e_max + 1e-12)
            .map(|(_, c)| c.max_abs())
            .fold(0.0, f64::max)
    }

    pub fn eval(&self, t: f64) -> Form {
        let mut out = Form::zero(self.coeffs[0].ctx());
        for (e, c) in self.exponents.iter().zip(&self.coeffs) {
            out += &c.scale(c64::new(t.powf(*e), 0.0));
        }
        out
    }
}

/// Fits `Σ_e A_e t^e` to form-valued samples, componentwise.
pub fn fit_asymptotics(samples: &[(f64, Form)], exponents: &[f64]) -> Result<AsymptoticFit> {
    if exponents.is_empty() || samples.len() < 2 * exponents.len() {
        return Err(Error::IllConditioned(format!(
            "{} samples for {} exponents",
            samples.len(),
            exponents.len()
        )));
    }
    if samples.iter().any(|(t, _)| !(*t > 0.0)) {
        return Err(Error::IllConditioned("sample times must be positive".into()));
    }
    let ctx = samples[0].1.ctx();
    let dim = ctx.dim();
    let t_lo = samples.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    let t_hi = samples.iter().map(|s| s.0).fold(0.0, f64::max);
    let t_ref = (t_lo * t_hi).sqrt();
    let m = samples.len();
    let k = exponents.len();
    let mut a = Mat::<c64>::zeros(m, k);
    let mut norms = vec![0.0f64; k];
    for (i, (t, _)) in samples.iter().enumerate() {
        for (j, &e) in exponents.iter().enumerate() {
            let v = (t / t_ref).powf(e);
            a[(i, j)] = c64::new(v, 0.0);
            norms[j] += v * v;
        }
    }
    for (j, n) in norms.iter_mut().enumerate() {
        *n = n.sqrt();
        for i in 0..m {
            a[(i, j)] = a[(i, j)] / *n;
        }
    }
    let sv = a
        .singular_values()
        .map_err(|e| Error::IllConditioned(format!("{e:?}")))?;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    let condition = smax / smin;
    if !(condition < 1e13) {
        return Err(Error::IllConditioned(format!(
            "design matrix condition {condition:.3e} for exponents {exponents:?}"
        )));
    }
    let b = Mat::<c64>::from_fn(m, dim, |i, c| samples[i].1.coeff(c));
    let x = a.qr().solve_lstsq(&b);
    let fitted = &a * &x;
    let scale = (0..dim)
        .flat_map(|c| (0..m).map(move |i| (i, c)))
        .map(|(i, c)| b[(i, c)].norm())
        .fold(0.0, f64::max);
    let resid = (0..dim)
        .flat_map(|c| (0..m).map(move |i| (i, c)))
        .map(|(i, c)| (fitted[(i, c)] - b[(i, c)]).norm())
        .fold(0.0, f64::max);
    let coeffs = exponents
        .iter()
        .enumerate()
        .map(|(j, &e)| {
            let s = 1.0 / (norms[j] * t_ref.powf(e));
            Form::from_coeffs(ctx, (0..dim).map(|c| x[(j, c)] * s).collect()).expect("fit coefficient shape")
        })
        .collect();
    Ok(AsymptoticFit {
        exponents: exponents.to_vec(),
        coeffs,
        residual: if scale > 0.0 { resid / scale } else { resid },
        window: (t_lo, t_hi),
        samples: m,
        condition,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RegularizedIntegral {
    pub value: Form,
    pub fit: AsymptoticFit,
    pub t_fit: f64,
    pub t_max: f64,
    pub quad_error: f64,
    pub evaluations: usize,
    /// Estimate of `∫_{t_max}^∞ F dt/t`, included in `value`.
    pub tail: f64,
}

/// `n` geometrically spaced points on `[lo, hi]`.
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1).max(1) as f64).exp())
        .collect()
}

/// `ζ'(0)` of `s ↦ −Γ(s)⁻¹ ∫₀^∞ t^{s−1} F(t) dt` for an integrand decaying
/// at least like `e^{−κt}`.
pub fn regularized_time_integral<F>(
    integrand: F,
    decay_rate: f64,
    opts: &TorsionOptions,
) -> Result<RegularizedIntegral>
where
    F: Fn(f64) -> Result<Form>,
{
    if !(decay_rate > 1e-12) {
        return Err(Error::NotAcyclic(decay_rate));
    }
    let ts = log_spaced(opts.window.0, opts.window.1, opts.samples);
    let samples = ts
        .iter()
        .map(|&t| integrand(t).map(|f| (t, f)))
        .collect::<Result<Vec<_>>>()?;
    let ctx = samples[0].1.ctx();
    let fit = fit_asymptotics(&samples, &opts.exponents)?;
    if fit.residual > opts.fit_tol {
        return Err(Error::FitResidual {
            residual: fit.residual,
            tol: opts.fit_tol,
        });
    }
    let t_f = opts.t_fit;
    let t_max = (opts.decay_margin / decay_rate).max(10.0 * t_f);
    let quad = integrate(
        |y| integrand(y.exp()).map(|f| f.coeffs().to_vec()),
        t_f.ln(),
        t_max.ln(),
        &opts.quad,
    )?;
    let f_end = integrand(t_max)?;
    let tail_form = f_end.scale(c64::new(1.0 / (decay_rate * t_max), 0.0));
    let mut value = Form::from_coeffs(ctx, quad.value.clone())?;
    value += &tail_form;
    value = -&value;
    for (e, a) in fit.exponents.iter().zip(&fit.coeffs) {
        let w = if e.abs() < 1e-12 {
            t_f.ln() + EULER_GAMMA
        } else {
            t_f.powf(*e) / e
        };
        value = &value - &a.scale(c64::new(w, 0.0));
    }
    Ok(RegularizedIntegral {
        value,
        fit,
        t_fit: t_f,
        t_max,
        quad_error: quad.error,
        evaluations: quad.evaluations + opts.samples + 1,
        tail: tail_form.max_abs(),
    })
}

/// Plain `−∫_{t_min}^∞ F dt/t`, for integrands that vanish as `t → 0`.
pub fn direct_time_integral<F>(integrand: F, decay_rate: f64, t_min: f64, opts: &TorsionOptions) -> Result<Form>
where
    F: Fn(f64) -> Result<Form>,
{
    if !(decay_rate > 1e-12) {
        return Err(Error::NotAcyclic(decay_rate));
    }
    let t_max = opts.decay_margin / decay_rate;
    let first = integrand(t_max)?;
    let quad = integrate(
        |y| integrand(y.exp()).map(|f| f.coeffs().to_vec()),
        t_min.ln(),
        t_max.ln(),
        &opts.quad,
    )?;
    Ok(-&Form::from_coeffs(first.ctx(), quad.value)?)
}

fn real(x: f64) -> c64 {
    c64::new(x, 0.0)
}

/// `φ str[N D_t² e^{(1+r²)D_t²}]` with `D_t = ω/2 + (√t/2)(v* − v)`.
pub fn integrand_t(pd: &PointData, t: f64, r: f64, phi: &Phi) -> Result<Form> {
    let d = d_u(pd, t)?;
    let d2 = d.smul(&d)?;
    let e = d2.scale(real(1.0 + r * r)).superexp()?;
    let n = SuperElement::number(&pd.space, pd.ctx);
    Ok(phi.normalize(&n.smul(&d2)?.smul(&e)?.supertrace()))
}

fn deformed_velocity(pd: &PointData, r: f64) -> Result<SuperElement> {
    let m = (&pd.v + &pd.v_star) + (&pd.v_star - &pd.v) * faer::Scale(c64::new(0.0, r));
    SuperElement::from_matrix(&pd.space, pd.ctx, m)
}

/// `str[D_{4t}((v + v*) + ir(v* − v)) e^{(1+r²)D_{4t}²}]`, without the
/// `t^{−1/2}` prefactor and without `φ`.
fn tilde_core(pd: &PointData, t: f64, r: f64) -> Result<Form> {
    let d = d_4t(pd, t)?;
    let e = d.smul(&d)?.scale(real(1.0 + r * r)).superexp()?;
    Ok(d.smul(&deformed_velocity(pd, r)?)?.smul(&e)?.supertrace())
}

/// `φ str[t^{−1/2} D_{4t}((v + v*) + ir(v* − v)) e^{(1+r²)D_{4t}²}]`.
pub fn integrand_t_tilde(pd: &PointData, t: f64, r: f64, phi: &Phi) -> Result<Form> {
    Ok(phi.normalize(&tilde_core(pd, t, r)?.scale(real(t.powf(-0.5)))))
}

/// `½(φ str[N(1 + 2D_u²)e^{D_u²}] − str[N](1 − u/2)e^{−u/4})`.
pub fn integrand_bl(pd: &PointData, u: f64, phi: &Phi) -> Result<Form> {
    let d = d_u(pd, u)?;
    let d2 = d.smul(&d)?;
    let e = d2.superexp()?;
    let n = SuperElement::number(&pd.space, pd.ctx);
    let one = SuperElement::identity(&pd.space, pd.ctx);
    let inner = &one + &d2.scale(real(2.0));
    let mut f = phi.normalize(&n.smul(&inner)?.smul(&e)?.supertrace());
    let counter = pd.space.str_number() * (1.0 - u / 2.0) * (-u / 4.0).exp();
    f.set_coeff(0, f.coeff(0) - counter);
    Ok(f.scale(real(0.5)))
}

/// `T_r` at a point.
pub fn torsion_t(pd: &PointData, r: f64, opts: &TorsionOptions) -> Result<RegularizedIntegral> {
    let lambda = pd.laplacian_min_eigenvalue()?;
    regularized_time_integral(
        |t| integrand_t(pd, t, r, &opts.phi),
        (1.0 + r * r) * lambda / 4.0,
        opts,
    )
}

/// `T̃_r` at a point; the regularization acts on `t·F̃(t)`.
pub fn torsion_t_tilde(pd: &PointData, r: f64, opts: &TorsionOptions) -> Result<RegularizedIntegral> {
    let lambda = pd.laplacian_min_eigenvalue()?;
    regularized_time_integral(
        |t| Ok(opts.phi.normalize(&tilde_core(pd, t, r)?.scale(real(t.sqrt())))),
        (1.0 + r * r) * lambda,
        opts,
    )
}

/// Finite-dimensional analog of the Bismut-Lott torsion form.
pub fn bl_torsion(pd: &PointData, opts: &TorsionOptions) -> Result<RegularizedIntegral> {
    let lambda = pd.laplacian_min_eigenvalue()?;
    regularized_time_integral(|u| integrand_bl(pd, u, &opts.phi), lambda.min(1.0) / 4.0, opts)
}

/// `str[N]/(1 + r²)`.
pub fn degree0_closed_form(space: &GradedSpace, r: f64) -> f64 {
    space.str_number() / (1.0 + r * r)
}

/// `½ Σ_i (−1)^i i log det Δ_i` with `Δ_i` the restriction of `(v + v*)²` to `E^i`.
pub fn bl_degree0_logdet(pd: &PointData) -> Result<f64> {
    let (p, pinv) = unitary_frame(&pd.h)?;
    let vt = &p * &pd.v * &pinv;
    let s = &vt + vt.adjoint();
    let lap = &s * &s;
    let mut total = 0.0;
    for i in 0..pd.space.ranks().len() {
        let range = pd.space.block_range(i);
        if range.is_empty() || i == 0 {
            continue;
        }
        let block = lap.as_ref().subrows(range.start, range.len()).subcols(range.start, range.len());
        let herm = Mat::from_fn(range.len(), range.len(), |a, b| (block[(a, b)] + block[(b, a)].conj()) * 0.5);
        let ev = herm
            .self_adjoint_eigenvalues(faer::Side::Lower)
            .map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
        if ev.iter().any(|&l| l <= 0.0) {
            return Err(Error::NotAcyclic(ev.iter().cloned().fold(f64::INFINITY, f64::min)));
        }
        let logdet: f64 = ev.iter().map(|l| l.ln()).sum();
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        total += sign * i as f64 * logdet;
    }
    Ok(0.5 * total)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VariantResidual {
    pub residual: f64,
    /// Largest coefficient among the compared forms.
    pub scale: f64,
}

/// Pointwise comparison of the variant integrand with
/// `(2/t) str[N D² e^{(1+r²)D²}] − (ir/t) d str[N D e^{(1+r²)D²}]`,
/// all with `D = D_{4t}` and the exterior derivative taken spectrally.
pub fn check_variant_identity(spec: &FlatComplexSpec, x: &[f64], t: f64, r: f64) -> Result<VariantResidual> {
    let pd = spec.point_data(x)?;
    let lhs = tilde_core(&pd, t, r)?.scale(real(t.powf(-0.5)));
    let a = 1.0 + r * r;
    let n = SuperElement::number(&pd.space, pd.ctx);
    let d = d_4t(&pd, t)?;
    let d2 = d.smul(&d)?;
    let e = d2.scale(real(a)).superexp()?;
    let first = n.smul(&d2)?.smul(&e)?.supertrace().scale(real(2.0 / t));
    let exact = if r == 0.0 {
        Form::zero(pd.ctx)
    } else {
        let partials = form_partials(spec, x, |q| {
            let d = d_4t(q, t)?;
            let e = d.smul(&d)?.scale(real(a)).superexp()?;
            Ok(SuperElement::number(&q.space, q.ctx).smul(&d)?.smul(&e)?.supertrace())
        })?;
        Form::exterior_derivative(&partials)?.scale(c64::new(0.0, r / t))
    };
    let rhs = &first - &exact;
    Ok(VariantResidual {
        residual: lhs.distance(&rhs),
        scale: lhs.max_abs().max(rhs.max_abs()),
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BlRatio {
    pub degree: usize,
    pub r: f64,
    pub factor: f64,
    /// `T_r^{[i]}`.
    pub lhs: Form,
    /// `factor · T_BL^{[i]}`.
    pub rhs: Form,
    pub residual: f64,
    /// Both sides below `1e-12`.
    pub vacuous: bool,
}

/// Compares `T_r^{[i]}` with `(i/(i+1))(1+r²)^{i/2−1} T_BL^{[i]}`.
pub fn check_bl_ratio(pd: &PointData, r: f64, i: usize, opts: &TorsionOptions) -> Result<BlRatio> {
    let p = pd.ctx.p();
    if i == 0 || i % 2 == 1 || i > p {
        return Err(Error::DegreeOutOfRange { degree: i, p });
    }
    let t = torsion_t(pd, r, opts)?.value;
    let bl = bl_torsion(pd, opts)?.value;
    compare_with_bl(&t, &bl, r, i)
}

/// The comparison of [`check_bl_ratio`] on already computed forms.
pub fn compare_with_bl(torsion: &Form, bl: &Form, r: f64, i: usize) -> Result<BlRatio> {
    let p = torsion.ctx().p();
    if i == 0 || i % 2 == 1 || i > p {
        return Err(Error::DegreeOutOfRange { degree: i, p });
    }
    let t = torsion.component(i)?;
    let factor = i as f64 / (i as f64 + 1.0) * (1.0 + r * r).powf(i as f64 / 2.0 - 1.0);
    let rhs = bl.component(i)?.scale(real(factor));
    Ok(BlRatio {
        degree: i,
        r,
        factor,
        residual: t.distance(&rhs),
        vacuous: t.max_abs() < 1e-12 && rhs.max_abs() < 1e-12,
        lhs: t,
        rhs,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TorsionReport {
    pub x: Vec<f64>,
    pub r: f64,
    pub torsion: Form,
    pub torsion_tilde: Form,
    pub bl: Form,
    pub diagnostics: Vec<IntegralDiagnostics>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IntegralDiagnostics {
    pub name: String,
    pub t_fit: f64,
    pub t_max: f64,
    pub fit_residual: f64,
    pub fit_condition: f64,
    pub quad_error: f64,
    pub tail: f64,
    pub evaluations: usize,
}

impl IntegralDiagnostics {
    fn from(name: &str, r: &RegularizedIntegral) -> Self {
        Self {
            name: name.into(),
            t_fit: r.t_fit,
            t_max: r.t_max,
            fit_residual: r.fit.residual,
            fit_condition: r.fit.condition,
            quad_error: r.quad_error,
            tail: r.tail,
            evaluations: r.evaluations,
        }
    }
}

/// All three torsion forms at one point.
pub fn torsion_report(pd: &PointData, r: f64, opts: &TorsionOptions) -> Result<TorsionReport> {
    let t = torsion_t(pd, r, opts)?;
    let tt = torsion_t_tilde(pd, r, opts)?;
    let bl = bl_torsion(pd, opts)?;
    Ok(TorsionReport {
        x: pd.x.clone(),
        r,
        diagnostics: vec![
            IntegralDiagnostics::from("torsion", &t),
            IntegralDiagnostics::from("torsion_tilde", &tt),
            IntegralDiagnostics::from("bl", &bl),
        ],
        torsion: t.value,
        torsion_tilde: tt.value,
        bl: bl.value,
    })
}

/// Scalar context helper for synthetic integrands.
pub fn scalar_form(ctx: FormContext, v: f64) -> Form {
    Form::scalar(ctx, real(v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trigpoly::TrigPolyField;
    use std::f64::consts::PI;

    fn rank11(f_terms: &[(Vec<i64>, f64)]) -> FlatComplexSpec {
        let two_pi = 2.0 * PI;
        let mut t = vec![(vec![0, 0], Mat::from_fn(2, 2, |i, j| real(if i == 0 && j == 0 { 1.0 } else { 0.0 })))];
        for (k, a) in f_terms {
            t.push((k.clone(), Mat::from_fn(2, 2, |i, j| real(if i == 1 && j == 1 { *a } else { 0.0 }))));
        }
        let h = TrigPolyField::new(2, 2, vec![two_pi, two_pi], t).unwrap();
        let one = Mat::from_fn(1, 1, |_, _| real(1.0));
        FlatComplexSpec::new(GradedSpace::new(vec![1, 1]).unwrap(), vec![one], h, None).unwrap()
    }

    fn ctx() -> FormContext {
        FormContext::new(2).unwrap()
    }

    #[test]
    fn fit_recovers_synthetic_expansions() {
        let exps = [0.0, 1.0];
        let samples: Vec<(f64, Form)> = log_spaced(1e-4, 1e-2, 20)
            .into_iter()
            .map(|t| (t, scalar_form(ctx(), 0.3 - 2.0 * t)))
            .collect();
        let fit = fit_asymptotics(&samples, &exps).unwrap();
        assert!((fit.coefficient(0.0).unwrap().coeff(0) - real(0.3)).norm() < 1e-10);
        assert!((fit.coefficient(1.0).unwrap().coeff(0) - real(-2.0)).norm() < 1e-10);
        let exps = TorsionOptions::default().exponents;
        let samples: Vec<(f64, Form)> = log_spaced(1e-4, 1e-2, 64)
            .into_iter()
            .map(|t| (t, scalar_form(ctx(), 1.7 * t.powf(-0.5))))
            .collect();
        let fit = fit_asymptotics(&samples, &exps).unwrap();
        for (e, c) in fit.exponents.iter().zip(&fit.coeffs) {
            let expected = if *e == -0.5 { 1.7 } else { 0.0 };
            assert!((c.coeff(0) - real(expected)).norm() < 1e-10 * (1.0 + 1e-2f64.powf(-e)), "{e}: {}", c.coeff(0));
        }
        assert!(fit_asymptotics(&samples[..4], &exps).is_err());
    }

    #[test]
    fn regularized_examples() {
        let opts = TorsionOptions::default();
        let c = ctx();
        let a = regularized_time_integral(|t| Ok(scalar_form(c, t * (-t).exp())), 1.0, &opts).unwrap();
        assert!((a.value.coeff(0) - real(-1.0)).norm() < 1e-10, "{} {:?} {} {}", a.value.coeff(0), a.fit.coeffs.iter().map(|f| f.coeff(0).re).collect::<Vec<_>>(), a.quad_error, a.tail);
        let b = regularized_time_integral(|t| Ok(scalar_form(c, (-t).exp())), 1.0, &opts).unwrap();
        assert!((b.fit.coefficient(0.0).unwrap().coeff(0) - real(1.0)).norm() < 1e-9);
        assert!(b.value.coeff(0).norm() < 1e-10);
        let h = regularized_time_integral(|t| Ok(scalar_form(c, t.powf(-0.5) * (-t).exp())), 1.0, &opts).unwrap();
        assert!((h.value.coeff(0) - real(2.0 * PI.sqrt())).norm() < 1e-9, "{:e}", h.value.coeff(0).re - 2.0 * PI.sqrt());
    }

    #[test]
    fn rank_one_integrand_closed_form() {
        let spec = rank11(&[(vec![0, 0], 1.5), (vec![1, 0], 0.2), (vec![-1, 0], 0.2)]);
        let x = [0.7, 0.1];
        let pd = spec.point_data(&x).unwrap();
        let ef = pd.h[(1, 1)].re;
        let phi = Phi::default();
        for &(t, r) in &[(0.3, 0.0), (2.0, 0.5), (7.0, 1.0)] {
            let f = integrand_t(&pd, t, r, &phi).unwrap();
            let expected = t * ef / 4.0 * (-(1.0 + r * r) * t * ef / 4.0).exp();
            assert!((f.coeff(0) - real(expected)).norm() < 1e-14);
        }
        let closed = torsion_t(&pd, 0.0, &TorsionOptions::default()).unwrap();
        assert!((closed.value.coeff(0) - real(-1.0)).norm() < 1e-8);
        let bl = bl_torsion(&pd, &TorsionOptions::default()).unwrap();
        assert!((bl.value.coeff(0) - real(-0.5 * ef.ln())).norm() < 1e-8, "{} vs {}", bl.value, -0.5 * ef.ln());
        assert!((bl_degree0_logdet(&pd).unwrap() + 0.5 * ef.ln()).abs() < 1e-14);
    }

    #[test]
    fn degree_zero_small_time_limit() {
        let spec = rank11(&[(vec![0, 0], 1.5), (vec![0, 1], 0.3), (vec![0, -1], 0.3)]);
        let pd = spec.point_data(&[1.0, 2.0]).unwrap();
        let f = integrand_t(&pd, 1e-9, 0.5, &Phi::default()).unwrap();
        assert!(f.coeff(0).norm() < 1e-8);
    }

    #[test]
    fn variant_identity_at_zero_r_and_constant_metric() {
        let spec = rank11(&[(vec![0, 0], 1.5), (vec![1, 1], 0.2), (vec![-1, -1], 0.2)]);
        let res = check_variant_identity(&spec, &[0.3, 0.9], 1.0, 0.0).unwrap();
        assert!(res.residual < 1e-9 * res.scale.max(1.0), "{res:?}");
        let flat = rank11(&[(vec![0, 0], 2.0)]);
        let res = check_variant_identity(&flat, &[0.3, 0.9], 0.5, 1.0).unwrap();
        assert!(res.residual < 1e-10, "{res:?}");
    }
}
