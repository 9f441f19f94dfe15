//! Small helpers shared by the report types: a dense rank-4 tensor and
//! row-major JSON serializers for nalgebra values.

use nalgebra::{DMatrix, DVector};
use serde::ser::{SerializeSeq, Serializer};
use serde::Serialize;

/// Dense `n×n×n×n` tensor, index order `(i, k, l, j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4 {
    n: usize,
    data: Vec<f64>,
}

impl Tensor4 {
    pub fn zeros(n: usize) -> Self {
        Tensor4 {
            n,
            data: vec![0.0; n * n * n * n],
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize, usize, usize) -> f64) -> Self {
        let mut t = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                for l in 0..n {
                    for j in 0..n {
                        t.data[((i * n + k) * n + l) * n + j] = f(i, k, l, j);
                    }
                }
            }
        }
        t
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, k: usize, l: usize, j: usize) -> f64 {
        let n = self.n;
        self.data[((i * n + k) * n + l) * n + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }
}

impl Serialize for Tensor4 {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let n = self.n;
        let nested: Vec<Vec<Vec<Vec<f64>>>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|k| (0..n).map(|l| (0..n).map(|j| self.get(i, k, l, j)).collect()).collect())
                    .collect()
            })
            .collect();
        nested.serialize(serializer)
    }
}

pub fn matrix_rows<S: Serializer>(m: &DMatrix<f64>, serializer: S) -> Result<S::Ok, S::Error> {
    let mut seq = serializer.serialize_seq(Some(m.nrows()))?;
    for r in 0..m.nrows() {
        let row: Vec<f64> = m.row(r).iter().copied().collect();
        seq.serialize_element(&row)?;
    }
    seq.end()
}

pub fn vector<S: Serializer>(v: &DVector<f64>, serializer: S) -> Result<S::Ok, S::Error> {
    serializer.collect_seq(v.iter())
}
