//! Serde adapters writing complex numbers as `[re, im]` pairs.

use faer::{c64, Mat};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub fn to_pair(z: c64) -> [f64; 2] {
    [z.re, z.im]
}

pub fn from_pair(p: [f64; 2]) -> c64 {
    c64::new(p[0], p[1])
}

/// Row-major nested pairs.
pub fn matrix_to_rows(m: &Mat<c64>) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| to_pair(m[(i, j)])).collect())
        .collect()
}

/// Inverse of [`matrix_to_rows`]; `None` for ragged input.
pub fn rows_to_matrix(rows: &[Vec<[f64; 2]>], ncols: usize) -> Option<Mat<c64>> {
    if rows.iter().any(|r| r.len() != ncols) {
        return None;
    }
    Some(Mat::from_fn(rows.len(), ncols, |i, j| from_pair(rows[i][j])))
}

pub mod scalar {
    use super::*;

    pub fn serialize<S: Serializer>(z: &c64, s: S) -> Result<S::Ok, S::Error> {
        to_pair(*z).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<c64, D::Error> {
        Ok(from_pair(<[f64; 2]>::deserialize(d)?))
    }
}

pub mod vec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[c64], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|&z| to_pair(z)).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<c64>, D::Error> {
        Ok(Vec::<[f64; 2]>::deserialize(d)?.into_iter().map(from_pair).collect())
    }
}
