//! Adaptive Gauss-Kronrod quadrature for vector-valued complex integrands.

use faer::c64;

use crate::error::Result;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Clone, Copy, Debug)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub initial_intervals: usize,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-14,
            rel_tol: 1e-12,
            initial_intervals: 16,
            max_intervals: 4000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct QuadResult {
    pub value: Vec<c64>,
    pub error: f64,
    pub evaluations: usize,
    pub intervals: usize,
    pub converged: bool,
}

struct Piece {
    a: f64,
    b: f64,
    value: Vec<c64>,
    error: f64,
}

fn max_norm(v: &[c64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn gk15<F>(f: &mut F, a: f64, b: f64) -> Result<Piece>
where
    F: FnMut(f64) -> Result<Vec<c64>>,
{
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c)?;
    let n = fc.len();
    let mut kron: Vec<c64> = fc.iter().map(|&z| z * WGK[7]).collect();
    let mut gauss: Vec<c64> = fc.iter().map(|&z| z * WG[3]).collect();
    for j in 0..7 {
        let dx = h * XGK[j];
        let f1 = f(c - dx)?;
        let f2 = f(c + dx)?;
        for k in 0..n {
            let s = f1[k] + f2[k];
            kron[k] += s * WGK[j];
            if j % 2 == 1 {
                gauss[k] += s * WG[j / 2];
            }
        }
    }
    for k in 0..n {
        kron[k] *= h;
        gauss[k] *= h;
    }
    let error = kron.iter().zip(&gauss).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    Ok(Piece { a, b, value: kron, error })
}

/// Integrates `f` over `[a, b]`, bisecting the piece with the largest error
/// estimate until the total estimate meets the tolerance.
pub fn integrate<F>(mut f: F, a: f64, b: f64, opts: &QuadOptions) -> Result<QuadResult>
where
    F: FnMut(f64) -> Result<Vec<c64>>,
{
    let m = opts.initial_intervals.max(1);
    let mut pieces = Vec::with_capacity(m);
    let mut evaluations = 0;
    for i in 0..m {
        let lo = a + (b - a) * i as f64 / m as f64;
        let hi = a + (b - a) * (i + 1) as f64 / m as f64;
        pieces.push(gk15(&mut f, lo, hi)?);
        evaluations += 15;
    }
    let total = |ps: &[Piece]| -> (Vec<c64>, f64) {
        let n = ps[0].value.len();
        let mut v = vec![c64::new(0.0, 0.0); n];
        let mut e = 0.0;
        for p in ps {
            for k in 0..n {
                v[k] += p.value[k];
            }
            e += p.error;
        }
        (v, e)
    };
    loop {
        let (value, error) = total(&pieces);
        let target = opts.abs_tol.max(opts.rel_tol * max_norm(&value));
        if error <= target || pieces.len() >= opts.max_intervals {
            return Ok(QuadResult {
                value,
                error,
                evaluations,
                intervals: pieces.len(),
                converged: error <= target,
            });
        }
        let (worst, _) = pieces
            .iter()
            .enumerate()
            .fold((0, -1.0), |acc, (i, p)| if p.error > acc.1 { (i, p.error) } else { acc });
        let p = pieces.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        pieces.push(gk15(&mut f, p.a, mid)?);
        pieces.push(gk15(&mut f, mid, p.b)?);
        evaluations += 30;
    }
}
