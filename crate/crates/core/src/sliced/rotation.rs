//! Haar-random rotation sampling: orthonormalize a Gaussian matrix and fix
//! the determinant sign.

use rand::Rng;
use rand_distr::StandardNormal;

/// A d x d rotation stored column-major; columns are orthonormal and the
/// determinant is +1.
#[derive(Debug, Clone)]
pub struct Rotation {
    cols: Vec<Vec<f64>>,
}

impl Rotation {
    pub fn dim(&self) -> usize {
        self.cols.len()
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.cols[j]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> {
        self.cols.iter().map(|c| c.as_slice())
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let mut out = vec![0.0; d];
        for (j, col) in self.cols.iter().enumerate() {
            for i in 0..d {
                out[i] += col[i] * x[j];
            }
        }
        out
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Draw a Haar-uniform rotation. Gram-Schmidt on a Gaussian matrix yields the
/// unique QR factor with positive diagonal, which is uniform on O(d); flipping
/// one column when the determinant is negative restricts to SO(d).
pub fn haar_rotation<R: Rng>(d: usize, rng: &mut R) -> Rotation {
    loop {
        let raw: Vec<Vec<f64>> = (0..d)
            .map(|_| (0..d).map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        if let Some(r) = orthonormalize(raw) {
            return r;
        }
        // numerically degenerate draw; resample
    }
}

fn orthonormalize(raw: Vec<Vec<f64>>) -> Option<Rotation> {
    let d = raw.len();
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(d);
    for mut v in raw {
        for q in &cols {
            let c = dot(q, &v);
            for (vi, qi) in v.iter_mut().zip(q) {
                *vi -= c * qi;
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm < 1e-12 {
            return None;
        }
        for vi in &mut v {
            *vi /= norm;
        }
        cols.push(v);
    }
    if determinant(&cols) < 0.0 {
        for vi in &mut cols[0] {
            *vi = -*vi;
        }
    }
    Some(Rotation { cols })
}

fn determinant(cols: &[Vec<f64>]) -> f64 {
    // LU with partial pivoting on a copy; d is small
    let d = cols.len();
    let mut m: Vec<f64> = vec![0.0; d * d];
    for (j, col) in cols.iter().enumerate() {
        for i in 0..d {
            m[i * d + j] = col[i];
        }
    }
    let mut det = 1.0;
    for k in 0..d {
        let (pivot, _) = m
            .iter()
            .skip(k * d + k)
            .step_by(d)
            .enumerate()
            .map(|(i, &v)| (k + i, v.abs()))
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap();
        if pivot != k {
            for j in 0..d {
                m.swap(k * d + j, pivot * d + j);
            }
            det = -det;
        }
        let pv = m[k * d + k];
        if pv == 0.0 {
            return 0.0;
        }
        det *= pv;
        for i in (k + 1)..d {
            let f = m[i * d + k] / pv;
            for j in k..d {
                m[i * d + j] -= f * m[k * d + j];
            }
        }
    }
    det
}
