//! Symmetric positive-definite permeability tensors `K(x, y)`.

use crate::error::{Error, Result};

/// Symmetric 2x2 tensor, off-diagonal stored once.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tensor2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Tensor2 {
    pub const IDENTITY: Tensor2 = Tensor2 {
        xx: 1.0,
        xy: 0.0,
        yy: 1.0,
    };

    pub fn scalar(k: f64) -> Self {
        Self { xx: k, xy: 0.0, yy: k }
    }

    pub fn det(&self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }

    pub fn is_positive_definite(&self) -> bool {
        self.xx > 0.0 && self.det() > 0.0 && self.xx.is_finite() && self.det().is_finite()
    }

    pub fn inverse(&self) -> Self {
        let d = self.det();
        Self {
            xx: self.yy / d,
            xy: -self.xy / d,
            yy: self.xx / d,
        }
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [self.xx * v[0] + self.xy * v[1], self.xy * v[0] + self.yy * v[1]]
    }
}

/// Anisotropy ratio used by the manufactured tensor.
pub const MANUFACTURED_EPS: f64 = 1e-3;

/// Position-dependent permeability; `region` is the element's region tag.
#[derive(Debug, Clone, PartialEq)]
pub enum Permeability {
    Identity,
    Scalar(f64),
    /// `K = A / (x² + y² + α)` with principal directions radial/tangential
    /// about the origin and anisotropy ratio [`MANUFACTURED_EPS`].
    Manufactured { alpha: f64 },
    /// Scalar value per region tag.
    RegionScalar(Vec<f64>),
    /// Curved low-permeability streak: tangential `k_par`, radial `k_perp`
    /// about `center` inside elements tagged `band`, identity elsewhere.
    Streak {
        k_par: f64,
        k_perp: f64,
        center: [f64; 2],
        band: usize,
    },
}

impl Permeability {
    /// Tensor at a point, unchecked.
    pub fn eval(&self, x: f64, y: f64, region: usize) -> Tensor2 {
        match self {
            Permeability::Identity => Tensor2::IDENTITY,
            Permeability::Scalar(k) => Tensor2::scalar(*k),
            Permeability::Manufactured { alpha } => {
                let e = MANUFACTURED_EPS;
                let s = x * x + y * y + alpha;
                Tensor2 {
                    xx: (e * x * x + y * y + alpha) / s,
                    xy: (e - 1.0) * x * y / s,
                    yy: (x * x + e * y * y + alpha) / s,
                }
            }
            Permeability::RegionScalar(values) => Tensor2::scalar(values[region]),
            Permeability::Streak {
                k_par,
                k_perp,
                center,
                band,
            } => {
                if region != *band {
                    return Tensor2::IDENTITY;
                }
                let dx = x - center[0];
                let dy = y - center[1];
                let r2 = dx * dx + dy * dy;
                Tensor2 {
                    xx: (k_par * dy * dy + k_perp * dx * dx) / r2,
                    xy: -(k_par - k_perp) * dx * dy / r2,
                    yy: (k_par * dx * dx + k_perp * dy * dy) / r2,
                }
            }
        }
    }

    pub fn eval_checked(&self, x: f64, y: f64, region: usize) -> Result<Tensor2> {
        let k = self.eval(x, y, region);
        if k.is_positive_definite() {
            Ok(k)
        } else {
            Err(Error::NotPositiveDefinite { x, y })
        }
    }

    pub fn eval_inverse(&self, x: f64, y: f64, region: usize) -> Result<Tensor2> {
        self.eval_checked(x, y, region).map(|k| k.inverse())
    }

    /// Constant per-element fields integrate exactly with fewer points.
    pub fn is_piecewise_constant(&self) -> bool {
        matches!(
            self,
            Permeability::Identity | Permeability::Scalar(_) | Permeability::RegionScalar(_)
        )
    }
}
