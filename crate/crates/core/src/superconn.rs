//! Rescaled superconnections `C_u = ∇ + ω/2 + (√u/2)(v + v*)` and their
//! odd partners `D_u = ω/2 + (√u/2)(v* − v)`.

use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exterior::Form;
use crate::flat::{FlatComplexSpec, PointData, LINE_SAMPLES};
use crate::supermatrix::SuperElement;
use crate::trigpoly::spectral_derivative_weights;

fn check_scale(u: f64) -> Result<()> {
    if !(u >= 0.0) {
        return Err(Error::NegativeScale(u));
    }
    Ok(())
}

fn real(x: f64) -> c64 {
    c64::new(x, 0.0)
}

/// `D_u = ω/2 + (√u/2)(v* − v)`.
pub fn d_u(pd: &PointData, u: f64) -> Result<SuperElement> {
    check_scale(u)?;
    let half_omega = pd.omega_element()?.scale(real(0.5));
    let m = (&pd.v_star - &pd.v) * faer::Scale(real(0.5 * u.sqrt()));
    Ok(&half_omega + &SuperElement::from_matrix(&pd.space, pd.ctx, m)?)
}

/// `D_{4t} = ω/2 + √t(v* − v)`.
pub fn d_4t(pd: &PointData, t: f64) -> Result<SuperElement> {
    check_scale(t)?;
    d_u(pd, 4.0 * t)
}

/// Coefficient `A_u = Γ + ω/2 + (√u/2)(v + v*)` of `C_u = d + A_u`.
pub fn c_u_coeff(pd: &PointData, u: f64) -> Result<SuperElement> {
    check_scale(u)?;
    let gamma = pd.gamma_element()?;
    let half_omega = pd.omega_element()?.scale(real(0.5));
    let m = (&pd.v + &pd.v_star) * faer::Scale(real(0.5 * u.sqrt()));
    Ok(&(&gamma + &half_omega) + &SuperElement::from_matrix(&pd.space, pd.ctx, m)?)
}

/// `A_{4t}`.
pub fn c_4t_coeff(pd: &PointData, t: f64) -> Result<SuperElement> {
    check_scale(t)?;
    c_u_coeff(pd, 4.0 * t)
}

/// Spectral partial derivatives `∂_β F(x)` of a super-element field.
pub fn partials<F>(spec: &FlatComplexSpec, x: &[f64], f: F) -> Result<Vec<SuperElement>>
where
    F: Fn(&PointData) -> Result<SuperElement>,
{
    let w = spectral_derivative_weights(LINE_SAMPLES);
    let mut out = Vec::with_capacity(spec.p());
    for beta in 0..spec.p() {
        let period = spec.periods()[beta];
        let scale = 2.0 * std::f64::consts::PI / period;
        let mut acc = SuperElement::zero(spec.space(), spec.ctx());
        let mut y = x.to_vec();
        for (j, &wj) in w.iter().enumerate().skip(1) {
            y[beta] = x[beta] + period * j as f64 / LINE_SAMPLES as f64;
            let val = f(&spec.point_data(&y)?)?;
            acc = &acc + &val.scale(real(wj * scale));
        }
        out.push(acc);
    }
    Ok(out)
}

/// Spectral partial derivatives of a form-valued field.
pub fn form_partials<F>(spec: &FlatComplexSpec, x: &[f64], f: F) -> Result<Vec<Form>>
where
    F: Fn(&PointData) -> Result<Form>,
{
    let w = spectral_derivative_weights(LINE_SAMPLES);
    let mut out = Vec::with_capacity(spec.p());
    for beta in 0..spec.p() {
        let period = spec.periods()[beta];
        let scale = 2.0 * std::f64::consts::PI / period;
        let mut acc = Form::zero(spec.ctx());
        let mut y = x.to_vec();
        for (j, &wj) in w.iter().enumerate().skip(1) {
            y[beta] = x[beta] + period * j as f64 / LINE_SAMPLES as f64;
            acc += &f(&spec.point_data(&y)?)?.scale(real(wj * scale));
        }
        out.push(acc);
    }
    Ok(out)
}

/// `dF = Σ_β dx^β ∂_β F`.
pub fn exterior_derivative(partials: &[SuperElement]) -> Result<SuperElement> {
    let first = partials.first().ok_or(Error::InvalidContext(0))?;
    let (space, ctx) = (first.space().clone(), first.ctx());
    let n = space.dim();
    let mut out = SuperElement::zero(&space, ctx);
    for (beta, df) in partials.iter().enumerate() {
        let e = SuperElement::from_block(&space, ctx, 1 << beta, Mat::identity(n, n))?;
        out = &out + &e.smul(df)?;
    }
    Ok(out)
}

/// Curvature `C_u² = dA_u + A_u²`, with `dA_u` evaluated spectrally.
pub fn curvature_c_u(spec: &FlatComplexSpec, x: &[f64], u: f64) -> Result<SuperElement> {
    check_scale(u)?;
    let pd = spec.point_data(x)?;
    let a = c_u_coeff(&pd, u)?;
    let da = exterior_derivative(&partials(spec, x, |q| c_u_coeff(q, u))?)?;
    Ok(&da + &a.smul(&a)?)
}

/// Residuals of the structural identities at one point.
#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct IdentityResiduals {
    /// `[C_u, D_u] = dD_u + [A_u, D_u]`.
    pub bracket: f64,
    /// `C_u² + D_u²`.
    pub curvature: f64,
    /// `(C_u + irD_u)² − (1 + r²)C_u²`.
    pub deformed_square: f64,
    /// `v + v* + 2u^{−1/2}[N, D_u]`.
    pub number_d: f64,
    /// `v* − v + 2u^{−1/2}[N, C_u]`.
    pub number_c: f64,
    /// `((1 − ir)v + (1 + ir)v*)² − (1 + r²)(v + v*)²`.
    pub twisted_square: f64,
}

impl IdentityResiduals {
    pub fn max(&self) -> f64 {
        [
            self.bracket,
            self.curvature,
            self.deformed_square,
            self.number_d,
            self.number_c,
            self.twisted_square,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Identity residuals in the `D_u` parameterization, `u > 0`.
pub fn check_identities(spec: &FlatComplexSpec, x: &[f64], u: f64, r: f64) -> Result<IdentityResiduals> {
    if !(u > 0.0) {
        return Err(Error::NegativeScale(u));
    }
    let pd = spec.point_data(x)?;
    let space = &pd.space;
    let ctx = pd.ctx;
    let a = c_u_coeff(&pd, u)?;
    let d = d_u(&pd, u)?;
    let ir = c64::new(0.0, r);
    let one_r2 = real(1.0 + r * r);

    let dd = exterior_derivative(&partials(spec, x, |q| d_u(q, u))?)?;
    let bracket = &dd + &a.supercommutator(&d)?;

    let c2 = curvature_c_u(spec, x, u)?;
    let d2 = d.smul(&d)?;
    let curvature = &c2 + &d2;

    let deformed = |q: &PointData| -> Result<SuperElement> { Ok(&c_u_coeff(q, u)? + &d_u(q, u)?.scale(ir)) };
    let b = deformed(&pd)?;
    let db = exterior_derivative(&partials(spec, x, deformed)?)?;
    let lhs = &db + &b.smul(&b)?;
    let deformed_square = &lhs - &c2.scale(one_r2);

    let n = SuperElement::number(space, ctx);
    let s = u.sqrt();
    let sum = SuperElement::from_matrix(space, ctx, &pd.v + &pd.v_star)?;
    let diff = SuperElement::from_matrix(space, ctx, &pd.v_star - &pd.v)?;
    let number_d = &sum + &n.supercommutator(&d)?.scale(real(2.0 / s));
    let number_c = &diff + &n.supercommutator(&a)?.scale(real(2.0 / s));

    let tw = &pd.v * faer::Scale(c64::new(1.0, -r)) + &pd.v_star * faer::Scale(c64::new(1.0, r));
    let plain = &pd.v + &pd.v_star;
    let tw2 = &tw * &tw - (&plain * &plain) * faer::Scale(one_r2);
    let twisted = SuperElement::from_matrix(space, ctx, tw2)?;

    Ok(IdentityResiduals {
        bracket: bracket.max_abs(),
        curvature: curvature.max_abs(),
        deformed_square: deformed_square.max_abs(),
        number_d: number_d.max_abs(),
        number_c: number_c.max_abs(),
        twisted_square: twisted.max_abs(),
    })
}

/// Identity residuals in the `D_{4t}` parameterization.
pub fn check_identities_4t(spec: &FlatComplexSpec, x: &[f64], t: f64, r: f64) -> Result<IdentityResiduals> {
    check_identities(spec, x, 4.0 * t, r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exterior::FormContext;
    use crate::supermatrix::GradedSpace;
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

    fn varying() -> FlatComplexSpec {
        rank11(&[
            (vec![0, 0], 1.5),
            (vec![1, 0], 0.2),
            (vec![-1, 0], 0.2),
            (vec![0, 1], 0.15),
            (vec![0, -1], 0.15),
        ])
    }

    #[test]
    fn d_u_substitutions() {
        let spec = varying();
        let x = [0.4f64, 1.3];
        let pd = spec.point_data(&x).unwrap();
        let d0 = d_u(&pd, 0.0).unwrap();
        assert_eq!(d0, pd.omega_element().unwrap().scale(real(0.5)));
        let t = 0.7f64;
        let d = d_4t(&pd, t).unwrap();
        let ef = pd.h[(1, 1)].re;
        let b = d.block(0);
        assert!((b[(0, 1)] - real(t.sqrt() * ef)).norm() < 1e-14);
        assert!((b[(1, 0)] - real(-t.sqrt())).norm() < 1e-14);
        assert_eq!(b[(0, 0)], real(0.0));
        assert!((d.block(0b01)[(1, 1)] - pd.omega[0][(1, 1)] * 0.5).norm() < 1e-15);
        assert_eq!(d.parity(), Some(1));
        assert!(matches!(d_u(&pd, -1.0), Err(Error::NegativeScale(_))));
    }

    #[test]
    fn coefficient_substitutions() {
        let spec = rank11(&[(vec![0, 0], 1.0)]);
        let pd = spec.point_data(&[0.1, 0.2]).unwrap();
        assert_eq!(c_u_coeff(&pd, 0.0).unwrap().max_abs(), 0.0);
        let a = c_u_coeff(&pd, 9.0).unwrap();
        let b = a.block(0);
        assert_eq!(b[(1, 0)], real(1.5));
        assert_eq!(b[(0, 1)], real(1.5));
        for mask in 1..4 {
            assert_eq!(a.block(mask).norm_l2(), 0.0);
        }
    }

    #[test]
    fn constant_metric_identities_are_algebraic() {
        let spec = rank11(&[(vec![0, 0], 2.0)]);
        let res = check_identities(&spec, &[0.5, 0.5], 4.0, 0.5).unwrap();
        assert!(res.max() < 1e-13, "{res:?}");
        let c2 = curvature_c_u(&spec, &[0.5, 0.5], 4.0).unwrap();
        let pd = spec.point_data(&[0.5, 0.5]).unwrap();
        let s = &pd.v + &pd.v_star;
        let expected = SuperElement::from_matrix(&pd.space, FormContext::new(2).unwrap(), &s * &s).unwrap();
        assert!((&c2 - &expected).max_abs() < 1e-13);
    }

    #[test]
    fn varying_metric_identities() {
        let spec = varying();
        for &(u, r) in &[(0.0f64, 0.0), (1.0, 0.5), (16.0, 1.0)] {
            if u == 0.0 {
                let c2 = curvature_c_u(&spec, &[1.0, 2.0], 0.0).unwrap();
                let pd = spec.point_data(&[1.0, 2.0]).unwrap();
                let d = d_u(&pd, 0.0).unwrap();
                assert!((&c2 + &d.smul(&d).unwrap()).max_abs() < 1e-10);
                continue;
            }
            let res = check_identities(&spec, &[1.0, 2.0], u, r).unwrap();
            assert!(res.max() < 1e-10, "{res:?}");
        }
    }
}
