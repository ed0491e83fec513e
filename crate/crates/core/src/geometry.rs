//! Element maps from the reference square `[-1, 1]^2`, their Jacobians, and
//! the pullback rules for nodal, volume, line and flux quantities.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::basis1d::NodalBasis;
use crate::error::{Error, Result};
use crate::quadrature::QuadratureRule;

/// Determinants at or below this are treated as a folded map.
pub const DEGENERATE_DET: f64 = 1e-12;

pub type Mat2 = [[f64; 2]; 2];

/// Jacobian of a map at one reference point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jacobian {
    /// `m[r][c] = ∂x_r / ∂ξ_c`.
    pub m: Mat2,
    pub det: f64,
    pub inv: Mat2,
}

impl Jacobian {
    pub fn from_matrix(m: Mat2) -> Self {
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        let inv = [
            [m[1][1] / det, -m[0][1] / det],
            [-m[1][0] / det, m[0][0] / det],
        ];
        Self { m, det, inv }
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        mat_vec(&self.m, v)
    }

    pub fn apply_transpose(&self, v: [f64; 2]) -> [f64; 2] {
        [
            self.m[0][0] * v[0] + self.m[1][0] * v[1],
            self.m[0][1] * v[0] + self.m[1][1] * v[1],
        ]
    }

    pub fn apply_inverse(&self, v: [f64; 2]) -> [f64; 2] {
        mat_vec(&self.inv, v)
    }
}

fn mat_vec(m: &Mat2, v: [f64; 2]) -> [f64; 2] {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

/// Axis-aligned sub-rectangle of a parent reference square.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubSquare {
    pub xi: [f64; 2],
    pub eta: [f64; 2],
}

impl SubSquare {
    pub const FULL: SubSquare = SubSquare {
        xi: [-1.0, 1.0],
        eta: [-1.0, 1.0],
    };

    /// Cell `(a, b)` of a uniform `nx x ny` partition of `[-1, 1]^2`.
    pub fn uniform(a: usize, b: usize, nx: usize, ny: usize) -> Self {
        let hx = 2.0 / nx as f64;
        let hy = 2.0 / ny as f64;
        Self {
            xi: [-1.0 + a as f64 * hx, -1.0 + (a + 1) as f64 * hx],
            eta: [-1.0 + b as f64 * hy, -1.0 + (b + 1) as f64 * hy],
        }
    }

    fn to_parent(&self, xi: f64, eta: f64) -> (f64, f64) {
        (
            0.5 * (self.xi[0] + self.xi[1]) + 0.5 * (self.xi[1] - self.xi[0]) * xi,
            0.5 * (self.eta[0] + self.eta[1]) + 0.5 * (self.eta[1] - self.eta[0]) * eta,
        )
    }

    fn half_widths(&self) -> (f64, f64) {
        (0.5 * (self.xi[1] - self.xi[0]), 0.5 * (self.eta[1] - self.eta[0]))
    }
}

/// Boundary curve of a transfinite patch, parametrised on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Curve {
    Line { a: [f64; 2], b: [f64; 2] },
    /// Circular arc, angle running linearly from `theta0` to `theta1`.
    Arc {
        center: [f64; 2],
        radius: f64,
        theta0: f64,
        theta1: f64,
    },
}

impl Curve {
    pub fn eval(&self, s: f64) -> [f64; 2] {
        match *self {
            Curve::Line { a, b } => [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])],
            Curve::Arc {
                center,
                radius,
                theta0,
                theta1,
            } => {
                let th = theta0 + s * (theta1 - theta0);
                [center[0] + radius * th.cos(), center[1] + radius * th.sin()]
            }
        }
    }

    pub fn deriv(&self, s: f64) -> [f64; 2] {
        match *self {
            Curve::Line { a, b } => [b[0] - a[0], b[1] - a[1]],
            Curve::Arc {
                radius,
                theta0,
                theta1,
                ..
            } => {
                let th = theta0 + s * (theta1 - theta0);
                let w = radius * (theta1 - theta0);
                [-w * th.sin(), w * th.cos()]
            }
        }
    }

    /// Arc through two points on a circle about `center`, sweeping the shorter way.
    pub fn arc_through(center: [f64; 2], from: [f64; 2], to: [f64; 2]) -> Result<Self> {
        let r0 = (from[0] - center[0]).hypot(from[1] - center[1]);
        let r1 = (to[0] - center[0]).hypot(to[1] - center[1]);
        if (r0 - r1).abs() > 1e-12 * r0.max(1.0) {
            return Err(Error::Geometry(format!(
                "arc end points at radii {r0} and {r1}"
            )));
        }
        let theta0 = (from[1] - center[1]).atan2(from[0] - center[0]);
        let mut theta1 = (to[1] - center[1]).atan2(to[0] - center[0]);
        if theta1 - theta0 > PI {
            theta1 -= 2.0 * PI;
        } else if theta0 - theta1 > PI {
            theta1 += 2.0 * PI;
        }
        Ok(Curve::Arc {
            center,
            radius: r0,
            theta0,
            theta1,
        })
    }
}

/// Transfinite (Coons) interpolation of four boundary curves.
///
/// `bottom` and `top` run in increasing `s`, `left` and `right` in increasing
/// `t`; corners must coincide.
#[derive(Debug, Clone, PartialEq)]
pub struct CoonsPatch {
    pub bottom: Curve,
    pub top: Curve,
    pub left: Curve,
    pub right: Curve,
    corners: [[f64; 2]; 4],
}

impl CoonsPatch {
    pub fn new(bottom: Curve, top: Curve, left: Curve, right: Curve) -> Result<Self> {
        let pairs = [
            (bottom.eval(0.0), left.eval(0.0)),
            (bottom.eval(1.0), right.eval(0.0)),
            (top.eval(0.0), left.eval(1.0)),
            (top.eval(1.0), right.eval(1.0)),
        ];
        for (p, q) in pairs {
            if (p[0] - q[0]).hypot(p[1] - q[1]) > 1e-10 {
                return Err(Error::Geometry(format!("patch corners {p:?} and {q:?} differ")));
            }
        }
        Ok(Self {
            bottom,
            top,
            left,
            right,
            corners: [pairs[0].0, pairs[1].0, pairs[2].0, pairs[3].0],
        })
    }

    pub fn eval(&self, s: f64, t: f64) -> [f64; 2] {
        let [p00, p10, p01, p11] = self.corners;
        let (b, tp, l, r) = (
            self.bottom.eval(s),
            self.top.eval(s),
            self.left.eval(t),
            self.right.eval(t),
        );
        let mut out = [0.0; 2];
        for k in 0..2 {
            out[k] = (1.0 - t) * b[k] + t * tp[k] + (1.0 - s) * l[k] + s * r[k]
                - ((1.0 - s) * (1.0 - t) * p00[k]
                    + s * (1.0 - t) * p10[k]
                    + (1.0 - s) * t * p01[k]
                    + s * t * p11[k]);
        }
        out
    }

    /// `[∂/∂s, ∂/∂t]` as columns.
    pub fn deriv(&self, s: f64, t: f64) -> Mat2 {
        let [p00, p10, p01, p11] = self.corners;
        let (b, tp, l, r) = (
            self.bottom.eval(s),
            self.top.eval(s),
            self.left.eval(t),
            self.right.eval(t),
        );
        let (db, dtp, dl, dr) = (
            self.bottom.deriv(s),
            self.top.deriv(s),
            self.left.deriv(t),
            self.right.deriv(t),
        );
        let mut m = [[0.0; 2]; 2];
        for k in 0..2 {
            m[k][0] = (1.0 - t) * db[k] + t * dtp[k] - l[k] + r[k]
                - (-(1.0 - t) * p00[k] + (1.0 - t) * p10[k] - t * p01[k] + t * p11[k]);
            m[k][1] = -b[k] + tp[k] + (1.0 - s) * dl[k] + s * dr[k]
                - (-(1.0 - s) * p00[k] - s * p10[k] + (1.0 - s) * p01[k] + s * p11[k]);
        }
        m
    }
}

/// Map from the reference square to one physical element.
#[derive(Debug, Clone)]
pub enum ElementMap {
    /// `x = a·ξ + b`.
    Affine { a: Mat2, b: [f64; 2] },
    /// Sine deformation of the unit square, restricted to a sub-square of the
    /// global reference domain.
    SineDeformed { c: f64, sub: SubSquare },
    /// Sub-square of a transfinite patch; patch coordinates `s = (X + 1) / 2`.
    Patch { patch: Arc<CoonsPatch>, sub: SubSquare },
    /// Lagrange interpolation of control points at the GLL nodes of `basis`,
    /// ordered `j * (n + 1) + i`.
    Tabulated {
        basis: Arc<NodalBasis>,
        points: Vec<[f64; 2]>,
    },
}

impl ElementMap {
    /// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
    pub fn rectangle(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        ElementMap::Affine {
            a: [[0.5 * (x1 - x0), 0.0], [0.0, 0.5 * (y1 - y0)]],
            b: [0.5 * (x0 + x1), 0.5 * (y0 + y1)],
        }
    }

    pub fn identity() -> Self {
        ElementMap::Affine {
            a: [[1.0, 0.0], [0.0, 1.0]],
            b: [0.0, 0.0],
        }
    }

    pub fn tabulated(basis: Arc<NodalBasis>, points: Vec<[f64; 2]>) -> Result<Self> {
        let n = basis.degree() + 1;
        if points.len() != n * n {
            return Err(Error::Geometry(format!(
                "{} control points for a degree {} map",
                points.len(),
                n - 1
            )));
        }
        Ok(ElementMap::Tabulated { basis, points })
    }

    /// `self ∘ inner` for two affine maps.
    pub fn compose_affine(&self, inner: &ElementMap) -> Option<ElementMap> {
        match (self, inner) {
            (ElementMap::Affine { a: a1, b: b1 }, ElementMap::Affine { a: a2, b: b2 }) => {
                let mut a = [[0.0; 2]; 2];
                for r in 0..2 {
                    for c in 0..2 {
                        a[r][c] = a1[r][0] * a2[0][c] + a1[r][1] * a2[1][c];
                    }
                }
                let t = mat_vec(a1, *b2);
                Some(ElementMap::Affine {
                    a,
                    b: [t[0] + b1[0], t[1] + b1[1]],
                })
            }
            _ => None,
        }
    }

    pub fn map_eval(&self, xi: f64, eta: f64) -> [f64; 2] {
        match self {
            ElementMap::Affine { a, b } => {
                let v = mat_vec(a, [xi, eta]);
                [v[0] + b[0], v[1] + b[1]]
            }
            ElementMap::SineDeformed { c, sub } => {
                let (x, y) = sub.to_parent(xi, eta);
                let bump = c * (PI * x).sin() * (PI * y).sin();
                [0.5 + 0.5 * (x + bump), 0.5 + 0.5 * (y + bump)]
            }
            ElementMap::Patch { patch, sub } => {
                let (x, y) = sub.to_parent(xi, eta);
                patch.eval(0.5 * (x + 1.0), 0.5 * (y + 1.0))
            }
            ElementMap::Tabulated { basis, points } => {
                let hx = basis.eval_all(xi);
                let hy = basis.eval_all(eta);
                let n = hx.len();
                let mut out = [0.0; 2];
                for (j, &wy) in hy.iter().enumerate() {
                    for (i, &wx) in hx.iter().enumerate() {
                        let p = points[j * n + i];
                        out[0] += wx * wy * p[0];
                        out[1] += wx * wy * p[1];
                    }
                }
                out
            }
        }
    }

    /// Jacobian without the degeneracy check.
    pub fn jacobian_unchecked(&self, xi: f64, eta: f64) -> Jacobian {
        let m = match self {
            ElementMap::Affine { a, .. } => *a,
            ElementMap::SineDeformed { c, sub } => {
                let (x, y) = sub.to_parent(xi, eta);
                let (sx, sy) = sub.half_widths();
                let (sinx, cosx) = (PI * x).sin_cos();
                let (siny, cosy) = (PI * y).sin_cos();
                let bx = c * PI * cosx * siny;
                let by = c * PI * sinx * cosy;
                [
                    [0.5 * (1.0 + bx) * sx, 0.5 * by * sy],
                    [0.5 * bx * sx, 0.5 * (1.0 + by) * sy],
                ]
            }
            ElementMap::Patch { patch, sub } => {
                let (x, y) = sub.to_parent(xi, eta);
                let (sx, sy) = sub.half_widths();
                let d = patch.deriv(0.5 * (x + 1.0), 0.5 * (y + 1.0));
                [
                    [0.5 * sx * d[0][0], 0.5 * sy * d[0][1]],
                    [0.5 * sx * d[1][0], 0.5 * sy * d[1][1]],
                ]
            }
            ElementMap::Tabulated { basis, points } => {
                let hx = basis.eval_all(xi);
                let hy = basis.eval_all(eta);
                let dx = basis.deriv_all(xi);
                let dy = basis.deriv_all(eta);
                let n = hx.len();
                let mut m = [[0.0; 2]; 2];
                for j in 0..n {
                    for i in 0..n {
                        let p = points[j * n + i];
                        for r in 0..2 {
                            m[r][0] += dx[i] * hy[j] * p[r];
                            m[r][1] += hx[i] * dy[j] * p[r];
                        }
                    }
                }
                m
            }
        };
        Jacobian::from_matrix(m)
    }

    pub fn jacobian_eval(&self, xi: f64, eta: f64) -> Result<Jacobian> {
        let j = self.jacobian_unchecked(xi, eta);
        if j.det <= DEGENERATE_DET || !j.det.is_finite() {
            return Err(Error::DegenerateMap { det: j.det, xi, eta });
        }
        Ok(j)
    }

    /// Checks `det J > 0` on the tensor grid of `rule`.
    pub fn validate(&self, rule: &QuadratureRule) -> Result<()> {
        for &eta in &rule.points {
            for &xi in &rule.points {
                self.jacobian_eval(xi, eta)?;
            }
        }
        Ok(())
    }

    /// Newton inversion of the map; `None` if `(x, y)` is outside the element.
    pub fn locate(&self, x: f64, y: f64) -> Option<(f64, f64)> {
        let (mut xi, mut eta) = (0.0, 0.0);
        let scale = {
            let j = self.jacobian_unchecked(0.0, 0.0);
            j.det.abs().sqrt().max(1e-300)
        };
        for _ in 0..60 {
            let p = self.map_eval(xi, eta);
            let r = [p[0] - x, p[1] - y];
            let j = self.jacobian_unchecked(xi.clamp(-1.5, 1.5), eta.clamp(-1.5, 1.5));
            let d = j.apply_inverse(r);
            xi -= d[0];
            eta -= d[1];
            xi = xi.clamp(-1.5, 1.5);
            eta = eta.clamp(-1.5, 1.5);
            if r[0].hypot(r[1]) <= 1e-14 * scale.max(1.0) || d[0].hypot(d[1]) < 1e-15 {
                break;
            }
        }
        let p = self.map_eval(xi, eta);
        let tol = 1e-9;
        if (p[0] - x).hypot(p[1] - y) <= 1e-10 * scale.max(1.0)
            && xi.abs() <= 1.0 + tol
            && eta.abs() <= 1.0 + tol
        {
            Some((xi.clamp(-1.0, 1.0), eta.clamp(-1.0, 1.0)))
        } else {
            None
        }
    }

    /// `φ ∘ Φ`.
    pub fn pullback_nodal<'a>(
        &'a self,
        phi: impl Fn(f64, f64) -> f64 + 'a,
    ) -> impl Fn(f64, f64) -> f64 + 'a {
        move |xi, eta| {
            let p = self.map_eval(xi, eta);
            phi(p[0], p[1])
        }
    }

    /// `det J · (ρ ∘ Φ)`.
    pub fn pullback_volume<'a>(
        &'a self,
        rho: impl Fn(f64, f64) -> f64 + 'a,
    ) -> impl Fn(f64, f64) -> f64 + 'a {
        move |xi, eta| {
            let p = self.map_eval(xi, eta);
            self.jacobian_unchecked(xi, eta).det * rho(p[0], p[1])
        }
    }

    /// `Jᵀ · (v ∘ Φ)`.
    pub fn pullback_line<'a>(
        &'a self,
        v: impl Fn(f64, f64) -> [f64; 2] + 'a,
    ) -> impl Fn(f64, f64) -> [f64; 2] + 'a {
        move |xi, eta| {
            let p = self.map_eval(xi, eta);
            self.jacobian_unchecked(xi, eta).apply_transpose(v(p[0], p[1]))
        }
    }

    /// `det J · J⁻¹ · (u ∘ Φ)`.
    pub fn pullback_flux<'a>(
        &'a self,
        u: impl Fn(f64, f64) -> [f64; 2] + 'a,
    ) -> impl Fn(f64, f64) -> [f64; 2] + 'a {
        move |xi, eta| {
            let p = self.map_eval(xi, eta);
            let j = self.jacobian_unchecked(xi, eta);
            let w = j.apply_inverse(u(p[0], p[1]));
            [j.det * w[0], j.det * w[1]]
        }
    }

    /// Physical density from its reference volume representation.
    pub fn push_volume(&self, xi: f64, eta: f64, value: f64) -> f64 {
        value / self.jacobian_unchecked(xi, eta).det
    }

    /// Physical flux vector from its reference representation.
    pub fn push_flux(&self, xi: f64, eta: f64, v: [f64; 2]) -> [f64; 2] {
        let j = self.jacobian_unchecked(xi, eta);
        let w = j.apply(v);
        [w[0] / j.det, w[1] / j.det]
    }

    /// Physical line vector from its reference representation.
    pub fn push_line(&self, xi: f64, eta: f64, v: [f64; 2]) -> [f64; 2] {
        let j = self.jacobian_unchecked(xi, eta);
        // (Jᵀ)⁻¹ v
        [
            j.inv[0][0] * v[0] + j.inv[1][0] * v[1],
            j.inv[0][1] * v[0] + j.inv[1][1] * v[1],
        ]
    }
}
