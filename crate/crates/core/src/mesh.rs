//! Structured multi-element meshes: element maps plus per-element region tags.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{CoonsPatch, Curve, ElementMap, SubSquare};
use crate::topology::ElementLayout;

/// Centre of the streak arcs.
pub const STREAK_CENTER: [f64; 2] = [0.1, -0.4];

/// Conforming `ex x ey` mesh; element `(a, b)` is stored at `b * ex + a`.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub layout: ElementLayout,
    pub maps: Vec<ElementMap>,
    pub regions: Vec<usize>,
}

impl Mesh {
    pub fn ex(&self) -> usize {
        self.layout.ex
    }

    pub fn ey(&self) -> usize {
        self.layout.ey
    }

    pub fn degree(&self) -> usize {
        self.layout.degrees[0]
    }

    pub fn element_count(&self) -> usize {
        self.maps.len()
    }

    /// Uniform affine `ex x ey` tiling of `[x0, x1] x [y0, y1]`.
    pub fn rectangle(ex: usize, ey: usize, degree: usize, bounds: [f64; 4]) -> Result<Self> {
        check_counts(ex, ey, degree)?;
        let [x0, x1, y0, y1] = bounds;
        let mut maps = Vec::with_capacity(ex * ey);
        for b in 0..ey {
            for a in 0..ex {
                let xa = x0 + (x1 - x0) * a as f64 / ex as f64;
                let xb = x0 + (x1 - x0) * (a + 1) as f64 / ex as f64;
                let ya = y0 + (y1 - y0) * b as f64 / ey as f64;
                let yb = y0 + (y1 - y0) * (b + 1) as f64 / ey as f64;
                maps.push(ElementMap::rectangle(xa, xb, ya, yb));
            }
        }
        Ok(Self {
            layout: ElementLayout::uniform(ex, ey, degree),
            maps,
            regions: vec![0; ex * ey],
        })
    }

    pub fn unit_square(k: usize, degree: usize) -> Result<Self> {
        Self::rectangle(k, k, degree, [0.0, 1.0, 0.0, 1.0])
    }

    /// Unit square under the sine deformation with coefficient `c`, the
    /// reference square split into `k x k` sub-squares. `c = 0` is the
    /// orthogonal mesh.
    pub fn deformed(k: usize, degree: usize, c: f64) -> Result<Self> {
        check_counts(k, k, degree)?;
        if !(c.abs() < 1.0 / PI) {
            return Err(Error::Config(format!(
                "deformation |c| = {} must be below 1/pi for the map to stay bijective",
                c.abs()
            )));
        }
        let mut maps = Vec::with_capacity(k * k);
        for b in 0..k {
            for a in 0..k {
                maps.push(ElementMap::SineDeformed {
                    c,
                    sub: SubSquare::uniform(a, b, k, k),
                });
            }
        }
        Ok(Self {
            layout: ElementLayout::uniform(k, k, degree),
            maps,
            regions: vec![0; k * k],
        })
    }

    /// Unit square tiled by the cells of `mask` (top row first); region 1
    /// marks a set cell.
    pub fn from_mask(mask: &[Vec<bool>], degree: usize) -> Result<Self> {
        let rows = mask.len();
        let cols = mask.first().map_or(0, |r| r.len());
        if mask.iter().any(|r| r.len() != cols) {
            return Err(Error::LayoutMismatch("ragged mask rows".into()));
        }
        let mut mesh = Self::rectangle(cols, rows, degree, [0.0, 1.0, 0.0, 1.0])?;
        for b in 0..rows {
            for a in 0..cols {
                mesh.regions[b * cols + a] = usize::from(mask[rows - 1 - b][a]);
            }
        }
        Ok(mesh)
    }

    /// Three stacked regions of the unit square separated by arcs of radius
    /// `r_in < r_out` about [`STREAK_CENTER`]: region 0 below the inner arc,
    /// region 1 the band, region 2 above the outer arc. Each region is a
    /// transfinite patch with `k x k` elements, so the whole mesh is a
    /// structured `k x 3k` grid.
    pub fn streak(k: usize, degree: usize, r_in: f64, r_out: f64) -> Result<Self> {
        check_counts(k, k, degree)?;
        let c = STREAK_CENTER;
        // Arcs must enter through x = 0 and leave through x = 1 inside (0, 1).
        let lo = (1.0 - c[0]).hypot(c[1]);
        let hi = c[0].hypot(1.0 - c[1]);
        if !(lo < r_in && r_in < r_out && r_out < hi) {
            return Err(Error::Geometry(format!(
                "streak radii must satisfy {lo:.4} < r_in < r_out < {hi:.4}, got {r_in}, {r_out}"
            )));
        }
        let crossing = |r: f64, x: f64| [x, c[1] + (r * r - (x - c[0]).powi(2)).sqrt()];
        let arc = |r: f64| Curve::arc_through(c, crossing(r, 0.0), crossing(r, 1.0));
        let inner = arc(r_in)?;
        let outer = arc(r_out)?;
        let line = |a: [f64; 2], b: [f64; 2]| Curve::Line { a, b };
        let (il, ir) = (crossing(r_in, 0.0), crossing(r_in, 1.0));
        let (ol, or) = (crossing(r_out, 0.0), crossing(r_out, 1.0));
        let patches = [
            CoonsPatch::new(
                line([0.0, 0.0], [1.0, 0.0]),
                inner,
                line([0.0, 0.0], il),
                line([1.0, 0.0], ir),
            )?,
            CoonsPatch::new(inner, outer, line(il, ol), line(ir, or))?,
            CoonsPatch::new(
                outer,
                line([0.0, 1.0], [1.0, 1.0]),
                line(ol, [0.0, 1.0]),
                line(or, [1.0, 1.0]),
            )?,
        ];
        let mut maps = Vec::with_capacity(3 * k * k);
        let mut regions = Vec::with_capacity(3 * k * k);
        for (r, patch) in patches.into_iter().enumerate() {
            let patch = Arc::new(patch);
            for b in 0..k {
                for a in 0..k {
                    maps.push(ElementMap::Patch {
                        patch: patch.clone(),
                        sub: SubSquare::uniform(a, b, k, k),
                    });
                    regions.push(r);
                }
            }
        }
        Ok(Self {
            layout: ElementLayout::uniform(k, 3 * k, degree),
            maps,
            regions,
        })
    }

    /// Element rows `b` belonging to region `r` of a streak mesh.
    pub fn region_rows(&self, region: usize) -> Vec<usize> {
        (0..self.ey())
            .filter(|&b| (0..self.ex()).any(|a| self.regions[b * self.ex() + a] == region))
            .collect()
    }
}

fn check_counts(ex: usize, ey: usize, degree: usize) -> Result<()> {
    if ex == 0 || ey == 0 {
        return Err(Error::Config("element counts must be positive".into()));
    }
    if degree == 0 {
        return Err(Error::Config("polynomial degree must be at least 1".into()));
    }
    Ok(())
}
