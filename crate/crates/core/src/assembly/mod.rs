//! Element mass matrices, load vectors and global scatter-add.
//!
//! Every element integral is evaluated on the reference square with a
//! tensor Gauss rule and sum factorization: a 2D Gram block over
//! `a(ξ)b(η)` basis products costs `O(M²·n²)` per block instead of `O(M²·n⁴)`.
//! Geometry and material data enter only through the point weights
//! `G₁ = det J · J⁻¹ K J⁻ᵀ` (line), `G₂ = Jᵀ K⁻¹ J / det J` (flux) and
//! `1 / det J` (volume).

mod permeability;
mod sparse;

pub use permeability::{Permeability, Tensor2, MANUFACTURED_EPS};
pub use sparse::SparseMatrix;

use rayon::prelude::*;

use crate::basis1d::{EdgeBasis, NodalBasis};
use crate::error::{Error, Result};
use crate::geometry::{ElementMap, Jacobian};
use crate::quadrature::{gauss_rule, QuadratureRule};

/// Row-major dense matrix used for element blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Dense {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] += v;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        self.data
            .chunks(self.cols)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        self.matvec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// `max |A - Aᵀ| / max |A|`.
    pub fn symmetry_defect(&self) -> f64 {
        let scale = self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut worst = 0.0f64;
        for r in 0..self.rows {
            for c in 0..r {
                worst = worst.max((self.get(r, c) - self.get(c, r)).abs());
            }
        }
        worst / scale.max(f64::MIN_POSITIVE)
    }

    /// Copies `block` into position `(r0, c0)`.
    fn place(&mut self, r0: usize, c0: usize, block: &Dense) {
        for r in 0..block.rows {
            for c in 0..block.cols {
                self.set(r0 + r, c0 + c, block.get(r, c));
            }
        }
    }

    fn transposed(&self) -> Dense {
        let mut t = Dense::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.set(c, r, self.get(r, c));
            }
        }
        t
    }

    /// Cholesky factorization succeeds (used as a positive-definiteness probe).
    pub fn is_positive_definite(&self) -> bool {
        let n = self.rows;
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut d = self.get(j, j);
            for k in 0..j {
                d -= l[j * n + k] * l[j * n + k];
            }
            if d <= 0.0 || !d.is_finite() {
                return false;
            }
            let d = d.sqrt();
            l[j * n + j] = d;
            for i in j + 1..n {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / d;
            }
        }
        true
    }

    /// Inverse by Gauss-Jordan elimination with partial pivoting.
    pub fn inverse(&self) -> Result<Dense> {
        let n = self.rows;
        let mut a = self.clone();
        let mut inv = Dense::zeros(n, n);
        for i in 0..n {
            inv.set(i, i, 1.0);
        }
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&x, &y| a.get(x, col).abs().total_cmp(&a.get(y, col).abs()))
                .unwrap();
            if a.get(piv, col) == 0.0 {
                return Err(Error::SingularSystem("singular element block".into()));
            }
            for c in 0..n {
                a.data.swap(col * n + c, piv * n + c);
                inv.data.swap(col * n + c, piv * n + c);
            }
            let d = 1.0 / a.get(col, col);
            for c in 0..n {
                a.data[col * n + c] *= d;
                inv.data[col * n + c] *= d;
            }
            for r in 0..n {
                if r != col {
                    let f = a.get(r, col);
                    if f != 0.0 {
                        for c in 0..n {
                            a.data[r * n + c] -= f * a.data[col * n + c];
                            inv.data[r * n + c] -= f * inv.data[col * n + c];
                        }
                    }
                }
            }
        }
        Ok(inv)
    }
}

/// Nodal and edge polynomials sampled at the points of a 1D rule.
#[derive(Debug, Clone)]
pub struct Tabulation {
    pub degree: usize,
    pub rule: QuadratureRule,
    /// `h[q][i]`, `i = 0..=N`.
    pub h: Vec<Vec<f64>>,
    /// `e[q][i - 1]`, `i = 1..=N`.
    pub e: Vec<Vec<f64>>,
}

impl Tabulation {
    pub fn new(degree: usize, rule: QuadratureRule) -> Result<Self> {
        let edge = EdgeBasis::new(degree)?;
        Ok(Self::with_basis(&edge, rule))
    }

    /// Default rule: `N + extra` Gauss points.
    pub fn gauss(degree: usize, extra: usize) -> Result<Self> {
        Self::new(degree, gauss_rule(degree + extra)?)
    }

    pub fn with_basis(edge: &EdgeBasis, rule: QuadratureRule) -> Self {
        let nodal: &NodalBasis = edge.nodal();
        let h = rule.points.iter().map(|&x| nodal.eval_all(x)).collect();
        let e = rule.points.iter().map(|&x| edge.eval_all(x)).collect();
        Self {
            degree: edge.degree(),
            rule,
            h,
            e,
        }
    }

    pub fn len(&self) -> usize {
        self.rule.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rule.is_empty()
    }
}

/// Map data at the tensor quadrature points, `q = qy * M + qx`.
#[derive(Debug, Clone)]
pub struct ElementSamples {
    pub points: Vec<[f64; 2]>,
    pub jac: Vec<Jacobian>,
    /// `w_qx · w_qy`.
    pub weights: Vec<f64>,
}

impl ElementSamples {
    pub fn new(map: &ElementMap, tab: &Tabulation) -> Result<Self> {
        let m = tab.len();
        let mut points = Vec::with_capacity(m * m);
        let mut jac = Vec::with_capacity(m * m);
        let mut weights = Vec::with_capacity(m * m);
        for (&eta, &wy) in tab.rule.points.iter().zip(&tab.rule.weights) {
            for (&xi, &wx) in tab.rule.points.iter().zip(&tab.rule.weights) {
                points.push(map.map_eval(xi, eta));
                jac.push(map.jacobian_eval(xi, eta)?);
                weights.push(wx * wy);
            }
        }
        Ok(Self {
            points,
            jac,
            weights,
        })
    }
}

/// `B[(j·na1 + i), (l·na2 + k)] = Σ_q w[q] a1_i(ξ) b1_j(η) a2_k(ξ) b2_l(η)`.
fn gram(
    m: usize,
    a1: &[Vec<f64>],
    b1: &[Vec<f64>],
    a2: &[Vec<f64>],
    b2: &[Vec<f64>],
    w: &[f64],
) -> Dense {
    let (na1, nb1) = (a1[0].len(), b1[0].len());
    let (na2, nb2) = (a2[0].len(), b2[0].len());
    // t[qy][i][k] = Σ_qx w · a1_i · a2_k
    let mut t = vec![0.0; m * na1 * na2];
    for qy in 0..m {
        let tq = &mut t[qy * na1 * na2..(qy + 1) * na1 * na2];
        for qx in 0..m {
            let wq = w[qy * m + qx];
            if wq == 0.0 {
                continue;
            }
            for (i, &ai) in a1[qx].iter().enumerate() {
                let s = wq * ai;
                for (k, &ak) in a2[qx].iter().enumerate() {
                    tq[i * na2 + k] += s * ak;
                }
            }
        }
    }
    let mut out = Dense::zeros(nb1 * na1, nb2 * na2);
    for qy in 0..m {
        let tq = &t[qy * na1 * na2..(qy + 1) * na1 * na2];
        for (j, &bj) in b1[qy].iter().enumerate() {
            for (l, &bl) in b2[qy].iter().enumerate() {
                let s = bj * bl;
                if s == 0.0 {
                    continue;
                }
                for i in 0..na1 {
                    let r = j * na1 + i;
                    for k in 0..na2 {
                        out.add(r, l * na2 + k, s * tq[i * na2 + k]);
                    }
                }
            }
        }
    }
    out
}

/// Assembles a 2x2 block operator from the four tensor weights of a
/// symmetric metric `G` sampled at the quadrature points. `x` and `y` give
/// the (ξ-factor, η-factor) tabulations of the two component families.
fn vector_mass(
    tab: &Tabulation,
    g: &[[f64; 3]],
    x: (&[Vec<f64>], &[Vec<f64>]),
    y: (&[Vec<f64>], &[Vec<f64>]),
) -> Dense {
    let m = tab.len();
    let wxx: Vec<f64> = g.iter().map(|v| v[0]).collect();
    let wxy: Vec<f64> = g.iter().map(|v| v[1]).collect();
    let wyy: Vec<f64> = g.iter().map(|v| v[2]).collect();
    let bxx = gram(m, x.0, x.1, x.0, x.1, &wxx);
    let bxy = gram(m, x.0, x.1, y.0, y.1, &wxy);
    let byy = gram(m, y.0, y.1, y.0, y.1, &wyy);
    let nx = bxx.rows;
    let ny = byy.rows;
    let mut out = Dense::zeros(nx + ny, nx + ny);
    out.place(0, 0, &bxx);
    out.place(0, nx, &bxy);
    out.place(nx, 0, &bxy.transposed());
    out.place(nx, nx, &byy);
    out
}

/// `[xx, xy, yy]` of a symmetric product, times the quadrature weight.
fn sym_entries(m: [[f64; 2]; 2], w: f64) -> [f64; 3] {
    [w * m[0][0], w * 0.5 * (m[0][1] + m[1][0]), w * m[1][1]]
}

/// Line-form Gram block weighted by `K`, local line ordering (x-edges
/// `e_i h_j` first, then y-edges `h_i e_j`).
pub fn mass_line_weighted(
    map: &ElementMap,
    k: &Permeability,
    region: usize,
    tab: &Tabulation,
) -> Result<Dense> {
    let s = ElementSamples::new(map, tab)?;
    let mut g = Vec::with_capacity(s.weights.len());
    for ((p, j), &w) in s.points.iter().zip(&s.jac).zip(&s.weights) {
        let kt = k.eval_checked(p[0], p[1], region)?;
        // det J · J⁻¹ K J⁻ᵀ
        let a = j.inv;
        let ka = [
            [
                kt.xx * a[0][0] + kt.xy * a[0][1],
                kt.xx * a[1][0] + kt.xy * a[1][1],
            ],
            [
                kt.xy * a[0][0] + kt.yy * a[0][1],
                kt.xy * a[1][0] + kt.yy * a[1][1],
            ],
        ];
        let mut gm = [[0.0; 2]; 2];
        for r in 0..2 {
            for c in 0..2 {
                gm[r][c] = j.det * (a[r][0] * ka[0][c] + a[r][1] * ka[1][c]);
            }
        }
        g.push(sym_entries(gm, w));
    }
    Ok(vector_mass(tab, &g, (&tab.e, &tab.h), (&tab.h, &tab.e)))
}

/// Flux-form Gram block weighted by `K⁻¹`, local flux ordering (x-fluxes
/// `h_i e_j` first, then y-fluxes `e_i h_j`).
pub fn mass_flux_weighted(
    map: &ElementMap,
    k: &Permeability,
    region: usize,
    tab: &Tabulation,
) -> Result<Dense> {
    let s = ElementSamples::new(map, tab)?;
    let mut g = Vec::with_capacity(s.weights.len());
    for ((p, j), &w) in s.points.iter().zip(&s.jac).zip(&s.weights) {
        let ki = k.eval_inverse(p[0], p[1], region)?;
        // Jᵀ K⁻¹ J / det J
        let a = j.m;
        let kj = [
            [
                ki.xx * a[0][0] + ki.xy * a[1][0],
                ki.xx * a[0][1] + ki.xy * a[1][1],
            ],
            [
                ki.xy * a[0][0] + ki.yy * a[1][0],
                ki.xy * a[0][1] + ki.yy * a[1][1],
            ],
        ];
        let mut gm = [[0.0; 2]; 2];
        for r in 0..2 {
            for c in 0..2 {
                gm[r][c] = (a[0][r] * kj[0][c] + a[1][r] * kj[1][c]) / j.det;
            }
        }
        g.push(sym_entries(gm, w));
    }
    Ok(vector_mass(tab, &g, (&tab.h, &tab.e), (&tab.e, &tab.h)))
}

/// Volume-form Gram block, weight `1 / det J`.
pub fn mass_volume(map: &ElementMap, tab: &Tabulation) -> Result<Dense> {
    let s = ElementSamples::new(map, tab)?;
    let w: Vec<f64> = s
        .jac
        .iter()
        .zip(&s.weights)
        .map(|(j, &w)| w / j.det)
        .collect();
    Ok(gram(tab.len(), &tab.e, &tab.e, &tab.e, &tab.e, &w))
}

/// Nodal-form Gram block, weight `det J` (the unweighted L² mass of `h_i h_j`).
pub fn mass_nodal(map: &ElementMap, tab: &Tabulation) -> Result<Dense> {
    let s = ElementSamples::new(map, tab)?;
    let w: Vec<f64> = s
        .jac
        .iter()
        .zip(&s.weights)
        .map(|(j, &w)| w * j.det)
        .collect();
    Ok(gram(tab.len(), &tab.h, &tab.h, &tab.h, &tab.h, &w))
}

fn separable_load(tab: &Tabulation, a: &[Vec<f64>], b: &[Vec<f64>], w: &[f64]) -> Vec<f64> {
    let m = tab.len();
    let (na, nb) = (a[0].len(), b[0].len());
    let mut out = vec![0.0; na * nb];
    for qy in 0..m {
        // row[i] = Σ_qx w · a_i(ξ)
        let mut row = vec![0.0; na];
        for qx in 0..m {
            let wq = w[qy * m + qx];
            for (r, &ai) in row.iter_mut().zip(&a[qx]) {
                *r += wq * ai;
            }
        }
        for (j, &bj) in b[qy].iter().enumerate() {
            for (i, &ri) in row.iter().enumerate() {
                out[j * na + i] += bj * ri;
            }
        }
    }
    out
}

/// `∫ f h_i h_j dΩ`, nodal ordering `j(N+1) + i`.
pub fn load_nodal(
    map: &ElementMap,
    tab: &Tabulation,
    f: &(dyn Fn(f64, f64) -> f64 + Sync),
) -> Result<Vec<f64>> {
    let s = ElementSamples::new(map, tab)?;
    let w: Vec<f64> = s
        .points
        .iter()
        .zip(&s.jac)
        .zip(&s.weights)
        .map(|((p, j), &w)| w * j.det * f(p[0], p[1]))
        .collect();
    Ok(separable_load(tab, &tab.h, &tab.h, &w))
}

/// Moments of `f` against the volume basis `e_i(ξ) e_j(η) dξ dη`; the map
/// enters only through the sample location.
pub fn load_volume(
    map: &ElementMap,
    tab: &Tabulation,
    f: &(dyn Fn(f64, f64) -> f64 + Sync),
) -> Result<Vec<f64>> {
    let s = ElementSamples::new(map, tab)?;
    let w: Vec<f64> = s
        .points
        .iter()
        .zip(&s.weights)
        .map(|(p, &w)| w * f(p[0], p[1]))
        .collect();
    Ok(separable_load(tab, &tab.e, &tab.e, &w))
}

/// Scatter-adds square element blocks through gather tables.
pub fn assemble_global(blocks: &[Dense], gather: &[Vec<usize>], n: usize) -> Result<SparseMatrix> {
    assemble_global_rect(blocks, gather, gather, n, n)
}

/// Scatter-add with separate row and column gathers. Triplets are emitted in
/// element order, so the result does not depend on how blocks were computed.
pub fn assemble_global_rect(
    blocks: &[Dense],
    row_gather: &[Vec<usize>],
    col_gather: &[Vec<usize>],
    rows: usize,
    cols: usize,
) -> Result<SparseMatrix> {
    if blocks.len() != row_gather.len() || blocks.len() != col_gather.len() {
        return Err(Error::LayoutMismatch(format!(
            "{} blocks for {} gather tables",
            blocks.len(),
            row_gather.len()
        )));
    }
    let mut t = Vec::with_capacity(blocks.iter().map(|b| b.data.len()).sum());
    for ((b, rg), cg) in blocks.iter().zip(row_gather).zip(col_gather) {
        if rg.len() != b.rows || cg.len() != b.cols {
            return Err(Error::LayoutMismatch(format!(
                "block {}x{} against gathers {}x{}",
                b.rows,
                b.cols,
                rg.len(),
                cg.len()
            )));
        }
        for &g in rg {
            if g >= rows {
                return Err(Error::IndexOutOfRange { index: g, dim: rows });
            }
        }
        for &g in cg {
            if g >= cols {
                return Err(Error::IndexOutOfRange { index: g, dim: cols });
            }
        }
        for (r, &gr) in rg.iter().enumerate() {
            for (c, &gc) in cg.iter().enumerate() {
                let v = b.get(r, c);
                if v != 0.0 {
                    t.push((gr, gc, v));
                }
            }
        }
    }
    Ok(SparseMatrix::from_triplets(rows, cols, t))
}

/// Scatter-adds element vectors.
pub fn assemble_vector(parts: &[Vec<f64>], gather: &[Vec<usize>], n: usize) -> Result<Vec<f64>> {
    let mut out = vec![0.0; n];
    for (v, g) in parts.iter().zip(gather) {
        for (&x, &gi) in v.iter().zip(g) {
            if gi >= n {
                return Err(Error::IndexOutOfRange { index: gi, dim: n });
            }
            out[gi] += x;
        }
    }
    Ok(out)
}

/// Evaluates `f` for every element index, in parallel unless `workers == 1`.
/// Results come back in element order either way.
pub fn per_element<T: Send>(
    count: usize,
    workers: usize,
    f: impl Fn(usize) -> Result<T> + Sync + Send,
) -> Result<Vec<T>> {
    if workers == 1 {
        return (0..count).map(f).collect();
    }
    let run = || (0..count).into_par_iter().map(&f).collect::<Result<Vec<T>>>();
    if workers == 0 {
        run()
    } else {
        match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
            Ok(pool) => pool.install(run),
            Err(_) => run(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate_2d;
    use crate::topology::{local_incidence, Formulation};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn maps() -> Vec<ElementMap> {
        use crate::geometry::SubSquare;
        vec![
            ElementMap::identity(),
            ElementMap::rectangle(0.0, 0.3, 1.0, 1.5),
            ElementMap::Affine {
                a: [[0.4, 0.1], [-0.05, 0.3]],
                b: [0.2, -0.1],
            },
            ElementMap::SineDeformed {
                c: 0.3,
                sub: SubSquare::uniform(0, 1, 2, 2),
            },
        ]
    }

    /// One basis function of the flux or line family as (component, a, b).
    struct Family {
        x: (Box<dyn Fn(usize, f64) -> f64>, Box<dyn Fn(usize, f64) -> f64>, usize, usize),
        y: (Box<dyn Fn(usize, f64) -> f64>, Box<dyn Fn(usize, f64) -> f64>, usize, usize),
    }

    fn eval_member(fam: &Family, idx: usize, xi: f64, eta: f64) -> [f64; 2] {
        let nx = fam.x.2 * fam.x.3;
        if idx < nx {
            let (i, j) = (idx % fam.x.2, idx / fam.x.2);
            [(fam.x.0)(i, xi) * (fam.x.1)(j, eta), 0.0]
        } else {
            let idx = idx - nx;
            let (i, j) = (idx % fam.y.2, idx / fam.y.2);
            [0.0, (fam.y.0)(i, xi) * (fam.y.1)(j, eta)]
        }
    }

    fn families(n: usize) -> (Family, Family) {
        let hb = NodalBasis::new(n).unwrap();
        let eb = EdgeBasis::new(n).unwrap();
        let h = move |b: NodalBasis| -> Box<dyn Fn(usize, f64) -> f64> {
            Box::new(move |i, x| b.eval(i, x))
        };
        let e = move |b: EdgeBasis| -> Box<dyn Fn(usize, f64) -> f64> {
            Box::new(move |i, x| b.eval(i + 1, x))
        };
        let line = Family {
            x: (e(eb.clone()), h(hb.clone()), n, n + 1),
            y: (h(hb.clone()), e(eb.clone()), n + 1, n),
        };
        let flux = Family {
            x: (h(hb.clone()), e(eb.clone()), n + 1, n),
            y: (e(eb), h(hb), n, n + 1),
        };
        (line, flux)
    }

    /// Point-by-point brute-force oracle, no sum factorization.
    fn oracle(
        map: &ElementMap,
        fam: &Family,
        n_funcs: usize,
        metric: impl Fn(&Jacobian, [f64; 2]) -> [[f64; 2]; 2],
        m: usize,
    ) -> Vec<Vec<f64>> {
        let rule = gauss_rule(m).unwrap();
        let mut out = vec![vec![0.0; n_funcs]; n_funcs];
        for (a, row) in out.iter_mut().enumerate() {
            for (b, slot) in row.iter_mut().enumerate() {
                *slot = integrate_2d(&rule, &rule, |xi, eta| {
                    let j = map.jacobian_unchecked(xi, eta);
                    let g = metric(&j, map.map_eval(xi, eta));
                    let u = eval_member(fam, a, xi, eta);
                    let v = eval_member(fam, b, xi, eta);
                    u[0] * (g[0][0] * v[0] + g[0][1] * v[1]) + u[1] * (g[1][0] * v[0] + g[1][1] * v[1])
                });
            }
        }
        out
    }

    fn max_diff(a: &Dense, b: &[Vec<f64>]) -> f64 {
        let mut worst = 0.0f64;
        for (r, row) in b.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                worst = worst.max((a.get(r, c) - v).abs());
            }
        }
        worst
    }

    fn mat_mul(a: [[f64; 2]; 2], b: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
        let mut m = [[0.0; 2]; 2];
        for r in 0..2 {
            for c in 0..2 {
                m[r][c] = a[r][0] * b[0][c] + a[r][1] * b[1][c];
            }
        }
        m
    }

    fn tmat(t: Tensor2) -> [[f64; 2]; 2] {
        [[t.xx, t.xy], [t.xy, t.yy]]
    }

    fn transpose(a: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
        [[a[0][0], a[1][0]], [a[0][1], a[1][1]]]
    }

    #[test]
    fn line_and_flux_blocks_match_oracle() {
        let k = Permeability::Manufactured { alpha: 0.01 };
        for n in 1..=3 {
            let (line, flux) = families(n);
            let tab = Tabulation::gauss(n, 3).unwrap();
            let nf = 2 * n * (n + 1);
            for map in maps() {
                let got = mass_line_weighted(&map, &k, 0, &tab).unwrap();
                let want = oracle(
                    &map,
                    &line,
                    nf,
                    |j, p| {
                        let kt = tmat(k.eval(p[0], p[1], 0));
                        let g = mat_mul(mat_mul(j.inv, kt), transpose(j.inv));
                        [[j.det * g[0][0], j.det * g[0][1]], [j.det * g[1][0], j.det * g[1][1]]]
                    },
                    n + 3,
                );
                assert!(max_diff(&got, &want) < 1e-11, "line n={n}");
                let got = mass_flux_weighted(&map, &k, 0, &tab).unwrap();
                let want = oracle(
                    &map,
                    &flux,
                    nf,
                    |j, p| {
                        let ki = tmat(k.eval(p[0], p[1], 0).inverse());
                        let g = mat_mul(mat_mul(transpose(j.m), ki), j.m);
                        [[g[0][0] / j.det, g[0][1] / j.det], [g[1][0] / j.det, g[1][1] / j.det]]
                    },
                    n + 3,
                );
                assert!(max_diff(&got, &want) < 1e-11, "flux n={n}");
            }
        }
    }

    #[test]
    fn volume_block_matches_oracle() {
        for n in 1..=3 {
            let eb = EdgeBasis::new(n).unwrap();
            let tab = Tabulation::gauss(n, 3).unwrap();
            let rule = gauss_rule(n + 3).unwrap();
            for map in maps() {
                let got = mass_volume(&map, &tab).unwrap();
                for r in 0..n * n {
                    for c in 0..n * n {
                        let (i, j) = (r % n + 1, r / n + 1);
                        let (k, l) = (c % n + 1, c / n + 1);
                        let v = integrate_2d(&rule, &rule, |x, y| {
                            eb.eval(i, x) * eb.eval(j, y) * eb.eval(k, x) * eb.eval(l, y)
                                / map.jacobian_unchecked(x, y).det
                        });
                        assert!((got.get(r, c) - v).abs() < 1e-11);
                    }
                }
            }
        }
    }

    #[test]
    fn volume_block_degree_one() {
        // e_1 ≡ 1/2, so the reference Gram entry is 4 · 1/16 = 1/4.
        let tab = Tabulation::gauss(1, 3).unwrap();
        let m = mass_volume(&ElementMap::identity(), &tab).unwrap();
        assert!((m.get(0, 0) - 0.25).abs() < 1e-15);
        // Physical element of area A = 4·det J: entry scales by 1/det J.
        let m = mass_volume(&ElementMap::rectangle(0.0, 0.5, 0.0, 0.5), &tab).unwrap();
        assert!((m.get(0, 0) - 0.25 / 0.0625).abs() < 1e-13);
    }

    #[test]
    fn blocks_symmetric_positive_definite() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let k = Permeability::Streak {
            k_par: 0.1,
            k_perp: 1e-3,
            center: [0.1, -0.4],
            band: 0,
        };
        for n in 1..=5 {
            let tab = Tabulation::gauss(n, 3).unwrap();
            for map in maps() {
                let blocks = [
                    mass_line_weighted(&map, &k, 0, &tab).unwrap(),
                    mass_flux_weighted(&map, &k, 0, &tab).unwrap(),
                    mass_volume(&map, &tab).unwrap(),
                    mass_nodal(&map, &tab).unwrap(),
                ];
                for b in &blocks {
                    assert!(b.symmetry_defect() < 1e-14);
                    assert!(b.is_positive_definite());
                    for _ in 0..100 {
                        let x: Vec<f64> = (0..b.rows).map(|_| rng.random_range(-1.0..1.0)).collect();
                        assert!(b.quadratic_form(&x) > 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn scalar_permeability_scales_flux_block() {
        for n in 1..=4 {
            let tab = Tabulation::gauss(n, 3).unwrap();
            let map = &maps()[3];
            let a = mass_flux_weighted(map, &Permeability::Identity, 0, &tab).unwrap();
            let b = mass_flux_weighted(map, &Permeability::Scalar(250.0), 0, &tab).unwrap();
            for (x, y) in a.data.iter().zip(&b.data) {
                assert!((x / 250.0 - y).abs() <= 1e-12 * x.abs().max(1e-300) + 1e-18);
            }
        }
    }

    #[test]
    fn scaled_line_block_is_separable() {
        // On [0, 2h] x [0, 2h] the line metric is det J · J⁻² = identity, so
        // the x-x block is the product of 1D edge and nodal Gram matrices.
        let n = 3;
        let h = 0.35;
        let tab = Tabulation::gauss(n, 3).unwrap();
        let m = mass_line_weighted(
            &ElementMap::rectangle(0.0, 2.0 * h, 0.0, 2.0 * h),
            &Permeability::Identity,
            0,
            &tab,
        )
        .unwrap();
        let eb = EdgeBasis::new(n).unwrap();
        let r = gauss_rule(n + 2).unwrap();
        let ee = |i: usize, k: usize| r.integrate(|x| eb.eval(i, x) * eb.eval(k, x));
        let hh = |j: usize, l: usize| r.integrate(|x| eb.nodal().eval(j, x) * eb.nodal().eval(l, x));
        for row in 0..n * (n + 1) {
            for col in 0..n * (n + 1) {
                let (i, j) = (row % n + 1, row / n);
                let (k, l) = (col % n + 1, col / n);
                assert!((m.get(row, col) - ee(i, k) * hh(j, l)).abs() < 1e-13);
            }
        }
        // No coupling between the two families for a diagonal metric.
        for row in 0..n * (n + 1) {
            for col in n * (n + 1)..2 * n * (n + 1) {
                assert_eq!(m.get(row, col), 0.0);
            }
        }
    }

    #[test]
    fn loads() {
        let tab = Tabulation::gauss(4, 3).unwrap();
        let id = ElementMap::identity();
        assert!(load_nodal(&id, &tab, &|_, _| 0.0).unwrap().iter().all(|&v| v == 0.0));
        let s: f64 = load_nodal(&id, &tab, &|_, _| 1.0).unwrap().iter().sum();
        assert!((s - 4.0).abs() < 1e-13);
        let unit = ElementMap::rectangle(0.0, 1.0, 0.0, 1.0);
        let f = |x: f64, y: f64| (std::f64::consts::PI * x).sin() * (std::f64::consts::PI * y).sin();
        let tab8 = Tabulation::gauss(8, 4).unwrap();
        let s: f64 = load_nodal(&unit, &tab8, &f).unwrap().iter().sum();
        let exact = 4.0 / std::f64::consts::PI.powi(2);
        assert!((s - exact).abs() < 1e-12);
        // projected cell integrals of f sum to the integral of f
        let proj = |map: &ElementMap, tab: &Tabulation, f: &(dyn Fn(f64, f64) -> f64 + Sync)| {
            let m = mass_volume(map, tab).unwrap().inverse().unwrap();
            m.matvec(&load_volume(map, tab, f).unwrap())
        };
        let s: f64 = proj(&unit, &tab8, &f).iter().sum();
        assert!((s - exact).abs() < 1e-12);
        // exact only while det J lies in the volume space
        let map = &maps()[2];
        let s: f64 = proj(map, &tab, &|_, _| 1.0).iter().sum();
        let rule = gauss_rule(12).unwrap();
        let area = integrate_2d(&rule, &rule, |x, y| map.jacobian_unchecked(x, y).det);
        assert!((s - area).abs() < 1e-12);
        assert!(load_volume(&id, &tab, &|_, _| 0.0).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn stiffness_annihilates_constants() {
        for n in 1..=6 {
            let tab = Tabulation::gauss(n, 3).unwrap();
            let e = SparseMatrix::from_incidence(&local_incidence(n, Formulation::Direct));
            for map in maps() {
                let m = mass_line_weighted(&map, &Permeability::Identity, 0, &tab).unwrap();
                let ones = vec![1.0; (n + 1) * (n + 1)];
                let grad = e.matvec(&ones);
                let r = e.matvec_transpose(&m.matvec(&grad));
                assert!(r.iter().all(|v| v.abs() < 1e-12));
            }
        }
    }

    #[test]
    fn scatter_add() {
        let b = Dense {
            rows: 2,
            cols: 2,
            data: vec![2.0, -1.0, -1.0, 2.0],
        };
        let one = assemble_global(&[b.clone()], &[vec![0, 1]], 2).unwrap();
        assert_eq!(one.to_dense(), vec![vec![2.0, -1.0], vec![-1.0, 2.0]]);
        let two = assemble_global(&[b.clone(), b.clone()], &[vec![0, 1], vec![1, 2]], 3).unwrap();
        assert_eq!(two.get(1, 1), 4.0);
        assert!(two.symmetry_defect() == 0.0);
        assert!(matches!(
            assemble_global(&[b], &[vec![0, 5]], 3),
            Err(Error::IndexOutOfRange { index: 5, dim: 3 })
        ));
    }

    #[test]
    fn parallel_and_serial_agree() {
        let tab = Tabulation::gauss(4, 3).unwrap();
        let k = Permeability::Manufactured { alpha: 0.0 };
        let make = |workers| {
            per_element(8, workers, |e| {
                let map = ElementMap::SineDeformed {
                    c: 0.2,
                    sub: crate::geometry::SubSquare::uniform(e % 4, e / 4, 4, 2),
                };
                mass_flux_weighted(&map, &k, 0, &tab)
            })
            .unwrap()
        };
        assert_eq!(make(1), make(4));
    }
}
