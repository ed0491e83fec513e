//! Gauss-Lobatto-Legendre and Gauss-Legendre rules on `[-1, 1]`.
//!
//! GLL nodes double as the interpolation nodes of the spectral basis; Gauss
//! rules are used for every mass-matrix and load-vector integral so that
//! the integrand is never sampled on element boundaries.

use std::f64::consts::PI;

use crate::error::{Error, Result};

const MAX_NEWTON: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleKind {
    Gll,
    Gauss,
}

/// Points and weights on the reference interval, ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub kind: RuleKind,
    /// Polynomial degree `N` for GLL (N+1 points) or point count `M` for Gauss.
    pub degree: usize,
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `Σ w_i f(x_i)`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// Integrates over `[a, b]` by affine rescaling.
    pub fn integrate_on(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        half * self.integrate(|t| f(mid + half * t))
    }
}

/// Legendre polynomial `L_n` and its derivative at `x` by the three-term recurrence.
pub fn legendre_eval(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p_prev, mut p) = (1.0, x);
    let (mut d_prev, mut d) = (0.0, 1.0);
    for k in 1..n {
        let kf = k as f64;
        let p_next = ((2.0 * kf + 1.0) * x * p - kf * p_prev) / (kf + 1.0);
        // L'_{k+1} = L'_{k-1} + (2k+1) L_k
        let d_next = d_prev + (2.0 * kf + 1.0) * p;
        p_prev = p;
        p = p_next;
        d_prev = d;
        d = d_next;
    }
    (p, d)
}

/// GLL rule of degree `n`: the `n + 1` roots of `(1 - x^2) L_n'(x)`.
pub fn gll_rule(n: usize) -> Result<QuadratureRule> {
    assert!(n >= 1, "GLL rule needs degree >= 1");
    let nf = n as f64;
    let mut points = vec![0.0; n + 1];
    points[0] = -1.0;
    points[n] = 1.0;

    for (i, slot) in points.iter_mut().enumerate().take(n).skip(1) {
        // Chebyshev-Lobatto seed, ascending.
        let mut x = -(PI * i as f64 / nf).cos();
        // Roots of L_n' interlace the Gauss points; keep the iterate inside the
        // seed's neighbourhood so Newton cannot jump to an adjacent root.
        let lo = -(PI * (i as f64 - 0.5) / nf).cos();
        let hi = -(PI * (i as f64 + 0.5) / nf).cos();
        let mut converged = false;
        for _ in 0..MAX_NEWTON {
            let (l, dl) = legendre_eval(n, x);
            // L'' from the Legendre equation, valid away from +-1.
            let d2l = (2.0 * x * dl - nf * (nf + 1.0) * l) / (1.0 - x * x);
            let mut next = x - dl / d2l;
            if !next.is_finite() || next <= lo || next >= hi {
                next = 0.5 * (x + if next <= lo { lo } else { hi });
            }
            let step = (next - x).abs();
            x = next;
            if step <= 4.0 * f64::EPSILON {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NonConvergence {
                degree: n,
                iterations: MAX_NEWTON,
            });
        }
        *slot = x;
    }
    symmetrize(&mut points);

    let scale = nf * (nf + 1.0);
    let weights = points
        .iter()
        .map(|&x| {
            let (l, _) = legendre_eval(n, x);
            2.0 / (scale * l * l)
        })
        .collect();
    Ok(QuadratureRule {
        kind: RuleKind::Gll,
        degree: n,
        points,
        weights,
    })
}

/// Gauss-Legendre rule with `m` interior points.
pub fn gauss_rule(m: usize) -> Result<QuadratureRule> {
    assert!(m >= 1, "Gauss rule needs at least one point");
    let mf = m as f64;
    let mut points = vec![0.0; m];
    for (i, slot) in points.iter_mut().enumerate() {
        let mut x = -(PI * (i as f64 + 0.75) / (mf + 0.5)).cos();
        let mut converged = false;
        for _ in 0..MAX_NEWTON {
            let (l, dl) = legendre_eval(m, x);
            let step = l / dl;
            x -= step;
            if step.abs() <= 4.0 * f64::EPSILON {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NonConvergence {
                degree: m,
                iterations: MAX_NEWTON,
            });
        }
        *slot = x;
    }
    symmetrize(&mut points);
    let weights = points
        .iter()
        .map(|&x| {
            let (_, dl) = legendre_eval(m, x);
            2.0 / ((1.0 - x * x) * dl * dl)
        })
        .collect();
    Ok(QuadratureRule {
        kind: RuleKind::Gauss,
        degree: m,
        points,
        weights,
    })
}

fn symmetrize(points: &mut [f64]) {
    let n = points.len();
    for i in 0..n / 2 {
        let a = 0.5 * (points[n - 1 - i] - points[i]);
        points[i] = -a;
        points[n - 1 - i] = a;
    }
    if n % 2 == 1 {
        points[n / 2] = 0.0;
    }
}

/// Tensor-product quadrature `Σ_i Σ_j w_i w_j f(ξ_i, η_j)`.
pub fn integrate_2d(
    rule_x: &QuadratureRule,
    rule_y: &QuadratureRule,
    f: impl Fn(f64, f64) -> f64,
) -> f64 {
    let mut sum = 0.0;
    for (&eta, &wy) in rule_y.points.iter().zip(&rule_y.weights) {
        for (&xi, &wx) in rule_x.points.iter().zip(&rule_x.weights) {
            sum += wx * wy * f(xi, eta);
        }
    }
    sum
}
