//! Named building-block maps for the guidance chain.

use super::DifferentiableMap;

/// x -> x
pub struct IdentityMap {
    name: String,
    dim: usize,
}

impl IdentityMap {
    pub fn new(name: &str, dim: usize) -> Self {
        Self {
            name: name.to_string(),
            dim,
        }
    }
}

impl DifferentiableMap for IdentityMap {
    fn name(&self) -> &str {
        &self.name
    }
    fn in_dim(&self) -> usize {
        self.dim
    }
    fn out_dim(&self) -> usize {
        self.dim
    }
    fn forward(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }
    fn vjp(&self, _x: &[f64], cotangent: &[f64]) -> Vec<f64> {
        cotangent.to_vec()
    }
}

/// x -> M x, with M stored row-major (out_dim x in_dim).
pub struct LinearMap {
    name: String,
    in_dim: usize,
    out_dim: usize,
    matrix: Vec<f64>,
}

impl LinearMap {
    pub fn new(name: &str, in_dim: usize, out_dim: usize, matrix: Vec<f64>) -> Self {
        assert_eq!(matrix.len(), in_dim * out_dim);
        Self {
            name: name.to_string(),
            in_dim,
            out_dim,
            matrix,
        }
    }
}

impl DifferentiableMap for LinearMap {
    fn name(&self) -> &str {
        &self.name
    }
    fn in_dim(&self) -> usize {
        self.in_dim
    }
    fn out_dim(&self) -> usize {
        self.out_dim
    }
    fn forward(&self, x: &[f64]) -> Vec<f64> {
        (0..self.out_dim)
            .map(|i| {
                self.matrix[i * self.in_dim..(i + 1) * self.in_dim]
                    .iter()
                    .zip(x)
                    .map(|(m, v)| m * v)
                    .sum()
            })
            .collect()
    }
    fn vjp(&self, _x: &[f64], cotangent: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.in_dim];
        for (i, &c) in cotangent.iter().enumerate() {
            for (j, o) in out.iter_mut().enumerate() {
                *o += self.matrix[i * self.in_dim + j] * c;
            }
        }
        out
    }
}

/// x -> M x + b
pub struct AffineMap {
    linear: LinearMap,
    bias: Vec<f64>,
}

impl AffineMap {
    pub fn new(name: &str, in_dim: usize, out_dim: usize, matrix: Vec<f64>, bias: Vec<f64>) -> Self {
        assert_eq!(bias.len(), out_dim);
        Self {
            linear: LinearMap::new(name, in_dim, out_dim, matrix),
            bias,
        }
    }
}

impl DifferentiableMap for AffineMap {
    fn name(&self) -> &str {
        self.linear.name()
    }
    fn in_dim(&self) -> usize {
        self.linear.in_dim()
    }
    fn out_dim(&self) -> usize {
        self.linear.out_dim()
    }
    fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.linear.forward(x);
        for (yi, b) in y.iter_mut().zip(&self.bias) {
            *yi += b;
        }
        y
    }
    fn vjp(&self, x: &[f64], cotangent: &[f64]) -> Vec<f64> {
        self.linear.vjp(x, cotangent)
    }
}

/// x -> x + offset
pub struct ShiftMap {
    name: String,
    offset: Vec<f64>,
}

impl ShiftMap {
    pub fn new(name: &str, offset: Vec<f64>) -> Self {
        Self {
            name: name.to_string(),
            offset,
        }
    }
}

impl DifferentiableMap for ShiftMap {
    fn name(&self) -> &str {
        &self.name
    }
    fn in_dim(&self) -> usize {
        self.offset.len()
    }
    fn out_dim(&self) -> usize {
        self.offset.len()
    }
    fn forward(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.offset).map(|(v, o)| v + o).collect()
    }
    fn vjp(&self, _x: &[f64], cotangent: &[f64]) -> Vec<f64> {
        cotangent.to_vec()
    }
}

/// x -> a*x + b elementwise.
pub struct ScaleMap {
    name: String,
    dim: usize,
    scale: f64,
    shift: f64,
}

impl ScaleMap {
    pub fn new(name: &str, dim: usize, scale: f64, shift: f64) -> Self {
        Self {
            name: name.to_string(),
            dim,
            scale,
            shift,
        }
    }
}

impl DifferentiableMap for ScaleMap {
    fn name(&self) -> &str {
        &self.name
    }
    fn in_dim(&self) -> usize {
        self.dim
    }
    fn out_dim(&self) -> usize {
        self.dim
    }
    fn forward(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|v| self.scale * v + self.shift).collect()
    }
    fn vjp(&self, _x: &[f64], cotangent: &[f64]) -> Vec<f64> {
        cotangent.iter().map(|c| self.scale * c).collect()
    }
}

/// Elementwise tanh.
pub struct TanhMap {
    name: String,
    dim: usize,
}

impl TanhMap {
    pub fn new(name: &str, dim: usize) -> Self {
        Self {
            name: name.to_string(),
            dim,
        }
    }
}

impl DifferentiableMap for TanhMap {
    fn name(&self) -> &str {
        &self.name
    }
    fn in_dim(&self) -> usize {
        self.dim
    }
    fn out_dim(&self) -> usize {
        self.dim
    }
    fn forward(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|v| v.tanh()).collect()
    }
    fn vjp(&self, x: &[f64], cotangent: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(cotangent)
            .map(|(v, c)| {
                let t = v.tanh();
                (1.0 - t * t) * c
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffgrad::{chain_forward, chain_vjp, finite_diff_check};

    #[test]
    fn tanh_vjp_matches_finite_differences() {
        let t = TanhMap::new("tanh", 3);
        let x = [0.4, -1.2, 0.05];
        let cot = [1.0, 1.0, 1.0];
        let maps: Vec<&dyn DifferentiableMap> = vec![&t];
        let analytic = chain_vjp(&maps, &x, &cot).unwrap();
        let f = |v: &[f64]| chain_forward(&maps, v).unwrap().iter().sum::<f64>();
        let rep = finite_diff_check("tanh", &f, &analytic, &x, 1e-6, 1e-8, None);
        assert!(rep.pass, "{rep:?}");
    }

    #[test]
    fn linear_vjp_is_exact() {
        let m = LinearMap::new("m", 3, 2, vec![1.0, -2.0, 0.5, 3.0, 0.0, 1.0]);
        let cot = [2.0, -1.0];
        let got = m.vjp(&[0.0; 3], &cot);
        let expect = [1.0 * 2.0 - 3.0, -2.0 * 2.0 - 0.0, 0.5 * 2.0 - 1.0];
        for (g, e) in got.iter().zip(&expect) {
            assert!((g - e).abs() < 1e-14);
        }
    }
}
