//! One-dimensional nodal (Lagrange) and edge polynomials on GLL nodes.
//!
//! The nodal functions `h_i` interpolate point values; the edge functions
//! `e_i = -Σ_{k<i} h_k'` interpolate integrals over the sub-intervals
//! `[ξ_{i-1}, ξ_i]`. The derivative of a nodal expansion with coefficients
//! `a` is the edge expansion with coefficients `a_i - a_{i-1}`.

use crate::error::Result;
use crate::quadrature::gll_rule;

#[derive(Debug, Clone)]
pub struct NodalBasis {
    degree: usize,
    nodes: Vec<f64>,
    bary: Vec<f64>,
}

impl NodalBasis {
    pub fn new(degree: usize) -> Result<Self> {
        let nodes = gll_rule(degree)?.points;
        Ok(Self::from_nodes(nodes))
    }

    /// Lagrange basis on arbitrary distinct nodes.
    pub fn from_nodes(nodes: Vec<f64>) -> Self {
        assert!(nodes.len() >= 2, "need at least two nodes");
        let bary = (0..nodes.len())
            .map(|j| {
                let prod: f64 = nodes
                    .iter()
                    .enumerate()
                    .filter(|&(k, _)| k != j)
                    .map(|(_, &xk)| nodes[j] - xk)
                    .product();
                1.0 / prod
            })
            .collect();
        Self {
            degree: nodes.len() - 1,
            nodes,
            bary,
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn barycentric_weights(&self) -> &[f64] {
        &self.bary
    }

    fn node_hit(&self, xi: f64) -> Option<usize> {
        self.nodes.iter().position(|&x| x == xi)
    }

    /// `h_i(ξ)`.
    pub fn eval(&self, i: usize, xi: f64) -> f64 {
        if let Some(j) = self.node_hit(xi) {
            return if i == j { 1.0 } else { 0.0 };
        }
        let ell: f64 = self.nodes.iter().map(|&x| xi - x).product();
        ell * self.bary[i] / (xi - self.nodes[i])
    }

    /// All `h_i(ξ)`, `i = 0..=N`.
    pub fn eval_all(&self, xi: f64) -> Vec<f64> {
        if let Some(j) = self.node_hit(xi) {
            let mut v = vec![0.0; self.nodes.len()];
            v[j] = 1.0;
            return v;
        }
        let ell: f64 = self.nodes.iter().map(|&x| xi - x).product();
        self.nodes
            .iter()
            .zip(&self.bary)
            .map(|(&x, &b)| ell * b / (xi - x))
            .collect()
    }

    /// `h_i'(ξ)`.
    pub fn deriv(&self, i: usize, xi: f64) -> f64 {
        if let Some(j) = self.node_hit(xi) {
            return self.diff_entry(j, i);
        }
        let others: f64 = self
            .nodes
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != i)
            .map(|(_, &x)| 1.0 / (xi - x))
            .sum();
        self.eval(i, xi) * others
    }

    /// All `h_i'(ξ)`.
    pub fn deriv_all(&self, xi: f64) -> Vec<f64> {
        (0..=self.degree).map(|i| self.deriv(i, xi)).collect()
    }

    /// `h_i'(ξ_j)`.
    fn diff_entry(&self, j: usize, i: usize) -> f64 {
        if i != j {
            (self.bary[i] / self.bary[j]) / (self.nodes[j] - self.nodes[i])
        } else {
            self.nodes
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != j)
                .map(|(_, &x)| 1.0 / (self.nodes[j] - x))
                .sum()
        }
    }

    /// Node-to-node differentiation matrix, `D[j][i] = h_i'(ξ_j)`.
    pub fn differentiation_matrix(&self) -> Vec<Vec<f64>> {
        (0..=self.degree)
            .map(|j| (0..=self.degree).map(|i| self.diff_entry(j, i)).collect())
            .collect()
    }
}

/// Edge polynomials `e_1 ..= e_N` built on a nodal basis.
#[derive(Debug, Clone)]
pub struct EdgeBasis {
    nodal: NodalBasis,
}

impl EdgeBasis {
    pub fn new(degree: usize) -> Result<Self> {
        Ok(Self {
            nodal: NodalBasis::new(degree)?,
        })
    }

    pub fn from_nodal(nodal: NodalBasis) -> Self {
        Self { nodal }
    }

    pub fn degree(&self) -> usize {
        self.nodal.degree()
    }

    pub fn nodal(&self) -> &NodalBasis {
        &self.nodal
    }

    /// `e_i(ξ)` for `i` in `1..=N`.
    pub fn eval(&self, i: usize, xi: f64) -> f64 {
        assert!(i >= 1 && i <= self.degree(), "edge index {i} out of 1..=N");
        -(0..i).map(|k| self.nodal.deriv(k, xi)).sum::<f64>()
    }

    /// `[e_1(ξ), ..., e_N(ξ)]`, index 0 holding `e_1`.
    pub fn eval_all(&self, xi: f64) -> Vec<f64> {
        let d = self.nodal.deriv_all(xi);
        let mut acc = 0.0;
        d[..self.degree()]
            .iter()
            .map(|&dk| {
                acc -= dk;
                acc
            })
            .collect()
    }
}

/// Edge coefficients of the derivative of a nodal expansion: `b_i = a_i - a_{i-1}`.
pub fn derivative_coefficients(a: &[f64]) -> Vec<f64> {
    a.windows(2).map(|w| w[1] - w[0]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{gauss_rule, legendre_eval};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Closed-form GLL Lagrange polynomial in terms of Legendre polynomials.
    fn explicit_h(n: usize, nodes: &[f64], i: usize, xi: f64) -> f64 {
        let (_, dl) = legendre_eval(n, xi);
        let (li, _) = legendre_eval(n, nodes[i]);
        let nf = n as f64;
        (1.0 - xi * xi) * dl / (nf * (nf + 1.0) * li * (nodes[i] - xi))
    }

    #[test]
    fn kronecker_and_partition() {
        for n in 1..=20 {
            let b = NodalBasis::new(n).unwrap();
            for j in 0..=n {
                for i in 0..=n {
                    let v = b.eval(i, b.nodes()[j]);
                    assert_eq!(v, if i == j { 1.0 } else { 0.0 });
                }
            }
            for k in 0..50 {
                let xi = -1.0 + 2.0 * (k as f64 + 0.37) / 50.0;
                let s: f64 = b.eval_all(xi).iter().sum();
                assert!((s - 1.0).abs() < 1e-13, "n={n}");
                let ds: f64 = b.deriv_all(xi).iter().sum();
                assert!(ds.abs() < 1e-11 * (n * n) as f64, "n={n} ds={ds}");
            }
        }
    }

    #[test]
    fn linear_basis() {
        let b = NodalBasis::new(1).unwrap();
        assert!((b.eval(0, 0.0) - 0.5).abs() < 1e-16);
        for &x in &[-1.0, -0.3, 0.0, 0.8, 1.0] {
            assert!((b.deriv(0, x) + 0.5).abs() < 1e-15);
        }
        let e = EdgeBasis::new(1).unwrap();
        for &x in &[-1.0, 0.2, 1.0] {
            assert!((e.eval(1, x) - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn differentiation_matrix_properties() {
        for n in 1..=16 {
            let b = NodalBasis::new(n).unwrap();
            let d = b.differentiation_matrix();
            for row in &d {
                let s: f64 = row.iter().sum();
                assert!(s.abs() < 1e-12 * (n * n) as f64);
            }
            if n >= 2 {
                let samples: Vec<f64> = b.nodes().iter().map(|x| x * x).collect();
                for (j, row) in d.iter().enumerate() {
                    let v: f64 = row.iter().zip(&samples).map(|(a, s)| a * s).sum();
                    assert!((v - 2.0 * b.nodes()[j]).abs() < 1e-12 * (n * n) as f64);
                }
            }
        }
    }

    #[test]
    fn barycentric_matches_explicit_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 1..=20 {
            let b = NodalBasis::new(n).unwrap();
            for _ in 0..100 {
                let xi: f64 = rng.random_range(-1.0..1.0);
                for i in 0..=n {
                    let a = b.eval(i, xi);
                    let e = explicit_h(n, b.nodes(), i, xi);
                    // the closed form loses digits to cancellation near nodes
                    let gap = b.nodes().iter().map(|x| (x - xi).abs()).fold(1.0, f64::min);
                    let tol = 1e-13 * (1.0 + 1e-2 / gap);
                    assert!((a - e).abs() < tol, "n={n} i={i} xi={xi}: {a} vs {e}");
                }
            }
        }
    }

    #[test]
    fn edge_integral_property() {
        for n in 1..=20 {
            let e = EdgeBasis::new(n).unwrap();
            let nodes = e.nodal().nodes().to_vec();
            let g = gauss_rule(n + 1).unwrap();
            for j in 1..=n {
                for i in 1..=n {
                    let v = g.integrate_on(nodes[j - 1], nodes[j], |x| e.eval(i, x));
                    let target = if i == j { 1.0 } else { 0.0 };
                    assert!((v - target).abs() < 1e-12, "n={n} i={i} j={j} v={v}");
                }
            }
            for i in 1..=n {
                let v = g.integrate(|x| e.eval(i, x));
                assert!((v - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn derivative_coefficients_examples() {
        assert_eq!(derivative_coefficients(&[3.0; 5]), vec![0.0; 4]);
        assert_eq!(derivative_coefficients(&[0.0, 1.0]), vec![1.0]);
        let b = derivative_coefficients(&[-1.0, 0.0, 1.0]);
        assert_eq!(b, vec![1.0, 1.0]);
        let e = EdgeBasis::new(2).unwrap();
        for &x in &[-0.9, -0.2, 0.4, 1.0] {
            let v: f64 = e.eval_all(x).iter().zip(&b).map(|(a, c)| a * c).sum();
            assert!((v - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn exact_derivative_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..=20 {
            let e = EdgeBasis::new(n).unwrap();
            let a: Vec<f64> = (0..=n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let b = derivative_coefficients(&a);
            for _ in 0..100 {
                let xi: f64 = rng.random_range(-1.0..1.0);
                let lhs: f64 = e
                    .nodal()
                    .deriv_all(xi)
                    .iter()
                    .zip(&a)
                    .map(|(d, c)| d * c)
                    .sum();
                let rhs: f64 = e.eval_all(xi).iter().zip(&b).map(|(v, c)| v * c).sum();
                assert!((lhs - rhs).abs() < 1e-11, "n={n}");
            }
        }
    }
}
