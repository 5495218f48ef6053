#![allow(dead_code)]

use std::path::PathBuf;

use faer::{c64, Mat};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use torsionlab_core::{FlatComplexSpec, Form, FormContext, GradedSpace, SuperElement, TrigPolyField};

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub fn fixture(name: &str) -> FlatComplexSpec {
    FlatComplexSpec::from_file(fixture_path(name)).unwrap()
}

pub fn cplx(rng: &mut ChaCha8Rng, scale: f64) -> c64 {
    c64::new(rng.random_range(-1.0..1.0) * scale, rng.random_range(-1.0..1.0) * scale)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Mat<c64> {
    Mat::from_fn(rows, cols, |_, _| cplx(rng, scale))
}

/// Block-diagonal Hermitian trig polynomial `base·I + Σ_k (C_k e^{ik·x} + h.c.)`
/// with modes `|k_α| ≤ 1`, positive definite for small `amp`.
pub fn random_metric(rng: &mut ChaCha8Rng, ranks: &[usize], base: f64, amp: f64) -> TrigPolyField {
    let n: usize = ranks.iter().sum();
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut offs = vec![0];
    for r in ranks {
        offs.push(offs.last().unwrap() + r);
    }
    let block = |rng: &mut ChaCha8Rng| {
        let mut m = Mat::<c64>::zeros(n, n);
        for b in 0..ranks.len() {
            for i in offs[b]..offs[b + 1] {
                for j in offs[b]..offs[b + 1] {
                    m[(i, j)] = cplx(rng, amp);
                }
            }
        }
        m
    };
    let mut terms = vec![(vec![0i64, 0], Mat::from_fn(n, n, |i, j| c64::new(if i == j { base } else { 0.0 }, 0.0)))];
    for k in [[1i64, 0], [0, 1], [1, 1], [1, -1]] {
        let c = block(rng);
        terms.push((vec![-k[0], -k[1]], c.adjoint().to_owned()));
        terms.push((k.to_vec(), c));
    }
    TrigPolyField::new(n, n, vec![two_pi, two_pi], terms).unwrap()
}

/// Two-term complex `E⁰ → E¹` of equal ranks with a random invertible differential.
pub fn random_two_term(rng: &mut ChaCha8Rng, rank: usize, amp: f64) -> FlatComplexSpec {
    let mut v = random_matrix(rng, rank, rank, 0.3);
    for i in 0..rank {
        v[(i, i)] += c64::new(1.0, 0.0);
    }
    let h = random_metric(rng, &[rank, rank], 1.5, amp);
    FlatComplexSpec::new(GradedSpace::new(vec![rank, rank]).unwrap(), vec![v], h, None).unwrap()
}

pub fn max_abs(m: &Mat<c64>) -> f64 {
    let mut w: f64 = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            w = w.max(m[(i, j)].norm());
        }
    }
    w
}

/// Exact three-term complex `C → C² → C` with `v₂v₁ = 0`, a random metric
/// and optionally a random block-diagonal gauge.
pub fn random_three_term(rng: &mut ChaCha8Rng, amp: f64, gauged: bool) -> FlatComplexSpec {
    let a = cplx(rng, 1.0) + c64::new(1.5, 0.0);
    let b = cplx(rng, 1.0);
    let v1 = Mat::from_fn(2, 1, |i, _| if i == 0 { a } else { b });
    let v2 = Mat::from_fn(1, 2, |_, j| if j == 0 { -b } else { a });
    let ranks = [1, 2, 1];
    let h = random_metric(rng, &ranks, 1.5, amp);
    let g = gauged.then(|| random_metric(rng, &ranks, 1.0, 0.05));
    FlatComplexSpec::new(GradedSpace::new(ranks.to_vec()).unwrap(), vec![v1, v2], h, g).unwrap()
}

pub fn random_form(rng: &mut ChaCha8Rng, ctx: FormContext, degree: Option<usize>) -> Form {
    let coeffs = (0..ctx.dim())
        .map(|mask| match degree {
            Some(d) if torsionlab_core::exterior::degree(mask) != d => c64::new(0.0, 0.0),
            _ => cplx(rng, 1.0),
        })
        .collect();
    Form::from_coeffs(ctx, coeffs).unwrap()
}

/// Random element of total parity `parity`.
pub fn random_homogeneous(
    rng: &mut ChaCha8Rng,
    space: &GradedSpace,
    ctx: FormContext,
    parity: usize,
    scale: f64,
) -> SuperElement {
    let n = space.dim();
    let mut e = SuperElement::zero(space, ctx);
    for mask in 0..ctx.dim() {
        let m = random_matrix(rng, n, n, scale);
        e = &e + &SuperElement::from_block(space, ctx, mask, m).unwrap();
    }
    e.parity_part(parity)
}
