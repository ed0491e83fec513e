//! Point reconstruction, error norms, divergence residuals, boundary and
//! region flux accounting and stream-function recovery.

use std::time::Duration;

use crate::assembly::{ElementSamples, Tabulation};
use crate::basis1d::{EdgeBasis, NodalBasis};
use crate::error::{Error, Result};
use crate::geometry::ElementMap;
use crate::mesh::Mesh;
use crate::quadrature::{gauss_rule, QuadratureRule};
use crate::solvers::{side_flux_dof, Discretization, SolutionFields};
use crate::topology::{DofKind, DofMap, Formulation, GridComplex, Side};

/// Gauss points beyond `N` used by the error norms.
pub const ERROR_QUAD_EXTRA: usize = 5;

/// 1D basis values at one reference coordinate.
struct Samples1d {
    h: Vec<f64>,
    dh: Vec<f64>,
    e: Vec<f64>,
}

fn samples_1d(edge: &EdgeBasis, x: f64) -> Samples1d {
    Samples1d {
        h: edge.nodal().eval_all(x),
        dh: edge.nodal().deriv_all(x),
        e: edge.eval_all(x),
    }
}

/// Reference-side value of the potential (`p` for nodal, `p_ref` density for volume).
fn local_p(disc: &Discretization, coeffs: &[f64], sx: &Samples1d, sy: &Samples1d) -> f64 {
    let n = disc.degree();
    match disc.formulation() {
        Formulation::Direct => {
            let mut v = 0.0;
            for j in 0..=n {
                for i in 0..=n {
                    v += coeffs[j * (n + 1) + i] * sx.h[i] * sy.h[j];
                }
            }
            v
        }
        Formulation::Mixed => {
            let mut v = 0.0;
            for j in 0..n {
                for i in 0..n {
                    v += coeffs[j * n + i] * sx.e[i] * sy.e[j];
                }
            }
            v
        }
    }
}

/// Reference flux vector from local flux coefficients (x-fluxes `h_i e_j`
/// first, then y-fluxes `e_i h_j`).
fn local_flux(n: usize, coeffs: &[f64], sx: &Samples1d, sy: &Samples1d) -> [f64; 2] {
    let mut ux = 0.0;
    for j in 0..n {
        for i in 0..=n {
            ux += coeffs[j * (n + 1) + i] * sx.h[i] * sy.e[j];
        }
    }
    let off = n * (n + 1);
    let mut uy = 0.0;
    for j in 0..=n {
        for i in 0..n {
            uy += coeffs[off + j * n + i] * sx.e[i] * sy.h[j];
        }
    }
    [ux, uy]
}

fn gather(values: &[f64], g: &[usize]) -> Vec<f64> {
    g.iter().map(|&k| values[k]).collect()
}

/// Evaluator bound to one solution; caches the 1D bases.
pub struct Reconstruction<'a> {
    sol: &'a SolutionFields,
    disc: &'a Discretization,
    edge: EdgeBasis,
}

impl<'a> Reconstruction<'a> {
    pub fn new(sol: &'a SolutionFields) -> Result<Self> {
        let disc = sol.discretization()?;
        Ok(Self {
            sol,
            disc,
            edge: EdgeBasis::new(disc.degree())?,
        })
    }

    /// Physical potential at reference point `(ξ, η)` of element `el`.
    pub fn p(&self, el: usize, xi: f64, eta: f64) -> f64 {
        let sx = samples_1d(&self.edge, xi);
        let sy = samples_1d(&self.edge, eta);
        self.p_with(el, xi, eta, &sx, &sy)
    }

    fn p_with(&self, el: usize, xi: f64, eta: f64, sx: &Samples1d, sy: &Samples1d) -> f64 {
        let c = gather(&self.sol.p, &self.disc.dofmap.p_gather[el]);
        let v = local_p(self.disc, &c, sx, sy);
        match self.disc.formulation() {
            Formulation::Direct => v,
            Formulation::Mixed => self.disc.mesh.maps[el].push_volume(xi, eta, v),
        }
    }

    /// Physical flux vector `u = -K ∇p` at `(ξ, η)` of element `el`.
    pub fn u(&self, el: usize, xi: f64, eta: f64) -> [f64; 2] {
        let sx = samples_1d(&self.edge, xi);
        let sy = samples_1d(&self.edge, eta);
        self.u_with(el, xi, eta, &sx, &sy)
    }

    fn u_with(&self, el: usize, xi: f64, eta: f64, sx: &Samples1d, sy: &Samples1d) -> [f64; 2] {
        let map = &self.disc.mesh.maps[el];
        let n = self.disc.degree();
        match self.disc.formulation() {
            Formulation::Mixed => {
                let c = gather(&self.sol.u, &self.disc.dofmap.u_gather[el]);
                map.push_flux(xi, eta, local_flux(n, &c, sx, sy))
            }
            Formulation::Direct => {
                let c = gather(&self.sol.p, &self.disc.dofmap.p_gather[el]);
                let mut g = [0.0; 2];
                for j in 0..=n {
                    for i in 0..=n {
                        let a = c[j * (n + 1) + i];
                        g[0] += a * sx.dh[i] * sy.h[j];
                        g[1] += a * sx.h[i] * sy.dh[j];
                    }
                }
                let grad = map.push_line(xi, eta, g);
                let p = map.map_eval(xi, eta);
                let k = self.disc.permeability.eval(p[0], p[1], self.disc.mesh.regions[el]);
                let kg = k.apply(grad);
                [-kg[0], -kg[1]]
            }
        }
    }

    /// Values at a physical point, searching all elements.
    pub fn at(&self, x: f64, y: f64) -> Option<(f64, [f64; 2])> {
        self.disc
            .mesh
            .maps
            .iter()
            .enumerate()
            .find_map(|(el, m)| m.locate(x, y).map(|(xi, eta)| (el, xi, eta)))
            .map(|(el, xi, eta)| (self.p(el, xi, eta), self.u(el, xi, eta)))
    }
}

/// `‖p_h - p‖_{L²}` and `‖u_h - u‖_{L²}` with `N + 5` Gauss points per direction.
pub fn l2_errors(
    sol: &SolutionFields,
    p_exact: &dyn Fn(f64, f64) -> f64,
    u_exact: &dyn Fn(f64, f64) -> [f64; 2],
) -> Result<(f64, f64)> {
    let rec = Reconstruction::new(sol)?;
    let disc = rec.disc;
    let tab = Tabulation::gauss(disc.degree(), ERROR_QUAD_EXTRA)?;
    let s1: Vec<Samples1d> = tab.rule.points.iter().map(|&x| samples_1d(&rec.edge, x)).collect();
    let m = tab.len();
    let (mut ep, mut eu) = (0.0, 0.0);
    for (el, map) in disc.mesh.maps.iter().enumerate() {
        let s = ElementSamples::new(map, &tab)?;
        for qy in 0..m {
            for qx in 0..m {
                let q = qy * m + qx;
                let (xi, eta) = (tab.rule.points[qx], tab.rule.points[qy]);
                let w = s.weights[q] * s.jac[q].det;
                let x = s.points[q];
                let dp = rec.p_with(el, xi, eta, &s1[qx], &s1[qy]) - p_exact(x[0], x[1]);
                let uh = rec.u_with(el, xi, eta, &s1[qx], &s1[qy]);
                let ue = u_exact(x[0], x[1]);
                ep += w * dp * dp;
                eu += w * ((uh[0] - ue[0]).powi(2) + (uh[1] - ue[1]).powi(2));
            }
        }
    }
    Ok((ep.sqrt(), eu.sqrt()))
}

/// `‖p_h - p‖_{L²}` alone.
pub fn l2_error(sol: &SolutionFields, p_exact: &dyn Fn(f64, f64) -> f64) -> Result<f64> {
    Ok(l2_errors(sol, p_exact, &|_, _| [0.0, 0.0])?.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DivergenceReport {
    /// `‖E u - f_dof‖_∞ / max(1, ‖f_dof‖_∞)`.
    pub exactness: f64,
    /// `‖div u_h - f_h‖_{L²}` with `f_h` the volume projection of `f`.
    pub l2: f64,
    /// `l2 / max(1, ‖f_h‖_{L²})`.
    pub l2_scaled: f64,
}

/// Divergence defect of a mixed solution.
pub fn divergence_residual(sol: &SolutionFields) -> Result<DivergenceReport> {
    let disc = sol.discretization()?;
    if disc.formulation() != Formulation::Mixed {
        return Err(Error::Config("divergence residual needs a mixed solution".into()));
    }
    let div = disc.dofmap.global.incidence_div().apply(&sol.u);
    let d: Vec<f64> = div.iter().zip(&disc.f_dof).map(|(a, b)| a - b).collect();
    let dmax = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let fmax = disc.f_dof.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let (mut l2, mut f2) = (0.0, 0.0);
    for (mv, g) in disc.volume_mass.iter().zip(&disc.dofmap.p_gather) {
        let dl = gather(&d, g);
        let fl = gather(&disc.f_dof, g);
        l2 += mv.quadratic_form(&dl);
        f2 += mv.quadratic_form(&fl);
    }
    let l2 = l2.max(0.0).sqrt();
    Ok(DivergenceReport {
        exactness: dmax / fmax.max(1.0),
        l2,
        l2_scaled: l2 / f2.max(0.0).sqrt().max(1.0),
    })
}

/// Flux of `u` through every edge of the global flux grid (global +x/+y
/// orientation), by Gauss quadrature along the mapped edges.
pub fn flux_cochain(
    mesh: &Mesh,
    dm: &DofMap,
    u: &dyn Fn(f64, f64) -> [f64; 2],
    points: usize,
) -> Result<Vec<f64>> {
    let n = dm.degree;
    let nodes = NodalBasis::new(n)?.nodes().to_vec();
    let rule = gauss_rule(points)?;
    let mut out = vec![0.0; dm.n_u()];
    let mut seen = vec![false; dm.n_u()];
    for (el, map) in mesh.maps.iter().enumerate() {
        let g = &dm.u_gather[el];
        for j in 1..=n {
            for i in 0..=n {
                let k = g[(j - 1) * (n + 1) + i];
                if !seen[k] {
                    seen[k] = true;
                    out[k] = edge_flux(map, &rule, true, nodes[i], nodes[j - 1], nodes[j], u);
                }
            }
        }
        let off = n * (n + 1);
        for j in 0..=n {
            for i in 1..=n {
                let k = g[off + j * n + (i - 1)];
                if !seen[k] {
                    seen[k] = true;
                    out[k] = edge_flux(map, &rule, false, nodes[j], nodes[i - 1], nodes[i], u);
                }
            }
        }
    }
    Ok(out)
}

/// Flux through the mapped segment at fixed `ξ = fixed` (`x_edge = true`,
/// normal along +ξ) or fixed `η = fixed` (normal along +η).
fn edge_flux(
    map: &ElementMap,
    rule: &QuadratureRule,
    x_edge: bool,
    fixed: f64,
    s0: f64,
    s1: f64,
    u: &dyn Fn(f64, f64) -> [f64; 2],
) -> f64 {
    rule.integrate_on(s0, s1, |s| {
        let (xi, eta) = if x_edge { (fixed, s) } else { (s, fixed) };
        let j = map.jacobian_unchecked(xi, eta);
        let p = map.map_eval(xi, eta);
        let v = u(p[0], p[1]);
        if x_edge {
            // tangent ∂x/∂η rotated clockwise
            v[0] * j.m[1][1] - v[1] * j.m[0][1]
        } else {
            -v[0] * j.m[1][0] + v[1] * j.m[0][0]
        }
    })
}

/// Integral of `f` over every cell of the global volume grid.
pub fn volume_cochain(
    mesh: &Mesh,
    dm: &DofMap,
    f: &dyn Fn(f64, f64) -> f64,
    points: usize,
) -> Result<Vec<f64>> {
    let n = dm.degree;
    let nodes = NodalBasis::new(n)?.nodes().to_vec();
    let rule = gauss_rule(points)?;
    let mut out = vec![0.0; dm.n_p()];
    for (el, map) in mesh.maps.iter().enumerate() {
        for j in 1..=n {
            for i in 1..=n {
                let v = rule.integrate_on(nodes[j - 1], nodes[j], |eta| {
                    rule.integrate_on(nodes[i - 1], nodes[i], |xi| {
                        let p = map.map_eval(xi, eta);
                        map.jacobian_unchecked(xi, eta).det * f(p[0], p[1])
                    })
                });
                out[dm.p_gather[el][(j - 1) * n + (i - 1)]] = v;
            }
        }
    }
    Ok(out)
}

fn side_index(side: Side) -> usize {
    match side {
        Side::Left => 0,
        Side::Right => 1,
        Side::Bottom => 2,
        Side::Top => 3,
    }
}

/// Net flow into the domain through `side`, restricted to the element
/// positions in `positions` along the side (all when `None`).
pub fn side_inflow(sol: &SolutionFields, side: Side, positions: Option<&[usize]>) -> Result<f64> {
    let disc = sol.discretization()?;
    let dm = &disc.dofmap;
    let along = match side {
        Side::Left | Side::Right => dm.ey,
        Side::Bottom | Side::Top => dm.ex,
    };
    let all: Vec<usize> = (0..along).collect();
    let positions = positions.unwrap_or(&all);
    match disc.formulation() {
        Formulation::Mixed => {
            // +x/+y dofs enter through left/bottom and leave through right/top
            let sign = match side {
                Side::Left | Side::Bottom => 1.0,
                Side::Right | Side::Top => -1.0,
            };
            let mut s = 0.0;
            for &pos in positions {
                for j in 1..=dm.degree {
                    s += sol.u[side_flux_dof(dm, side, pos, j)];
                }
            }
            Ok(sign * s)
        }
        Formulation::Direct => {
            if positions.len() != along {
                return Err(Error::Config(
                    "partial side fluxes need a mixed solution".into(),
                ));
            }
            let kind = |s: Side| match side_kind(dm, s) {
                Some(k) => k,
                None => DofKind::Interior,
            };
            if kind(side) != DofKind::Pressure {
                return Ok(-disc.side_data_flux[side_index(side)]);
            }
            let a = disc
                .full_matrix
                .as_ref()
                .ok_or_else(|| Error::Config("direct solution without full matrix".into()))?;
            let nodes = dm.side_dofs(side);
            let (first, last) = match side {
                Side::Left | Side::Right => (Side::Bottom, Side::Top),
                Side::Bottom | Side::Top => (Side::Left, Side::Right),
            };
            let rec = Reconstruction::new(sol)?;
            let mut s = 0.0;
            for (k, &node) in nodes.iter().enumerate() {
                let r: f64 =
                    a.row(node).map(|(c, v)| v * sol.p[c]).sum::<f64>() - disc.full_rhs[node];
                let start = k == 0;
                let other = if start { first } else { last };
                let shared = (start || k + 1 == nodes.len()) && kind(other) == DofKind::Pressure;
                if shared {
                    // Each side keeps its own weighted flux estimate; only the
                    // remainder of the corner reaction is split evenly.
                    let own = corner_inflow(&rec, side, start)?;
                    let theirs = corner_inflow(&rec, other, corner_at_start_of_neighbour(side))?;
                    s += own + 0.5 * (r - own - theirs);
                } else {
                    s += r;
                }
            }
            Ok(s)
        }
    }
}

/// Whether a corner of `side` sits at the start of the neighbouring side
/// (left and bottom corners do, right and top corners do not).
fn corner_at_start_of_neighbour(side: Side) -> bool {
    matches!(side, Side::Left | Side::Bottom)
}

/// `-∫ h_c u_h·n dS` over the element side holding the corner node `c` at
/// the `start` (or end) of a domain side.
fn corner_inflow(rec: &Reconstruction, side: Side, start: bool) -> Result<f64> {
    let disc = rec.disc;
    let dm = &disc.dofmap;
    let n = dm.degree;
    let elems = crate::solvers::side_elements(dm, side);
    let (el, _) = if start { elems[0] } else { elems[elems.len() - 1] };
    let map = &disc.mesh.maps[el];
    let nodal = rec.edge.nodal();
    let corner = if start { 0 } else { n };
    let rule = gauss_rule(n + ERROR_QUAD_EXTRA)?;
    Ok(rule.integrate(|t| {
        let (xi, eta, col) = match side {
            Side::Left => (-1.0, t, 1),
            Side::Right => (1.0, t, 1),
            Side::Bottom => (t, -1.0, 0),
            Side::Top => (t, 1.0, 0),
        };
        let j = map.jacobian_unchecked(xi, eta);
        let (tx, ty) = (j.m[0][col], j.m[1][col]);
        // outward normal scaled by the arc-length factor
        let nrm = match side {
            Side::Left | Side::Top => [-ty, tx],
            Side::Right | Side::Bottom => [ty, -tx],
        };
        let u = rec.u(el, xi, eta);
        -nodal.eval(corner, t) * (u[0] * nrm[0] + u[1] * nrm[1])
    }))
}

/// Kind of a domain side, read back from the boundary marks.
fn side_kind(dm: &DofMap, side: Side) -> Option<DofKind> {
    let dofs = dm.side_dofs(side);
    match dm.formulation {
        Formulation::Mixed => dofs.first().map(|&d| dm.marks.kind(d)),
        // corners may belong to a neighbouring side; the midpoint node does not
        Formulation::Direct => dofs.get(dofs.len() / 2).map(|&d| dm.marks.kind(d)),
    }
}

/// Inflow through each side, `[left, right, bottom, top]`.
pub fn boundary_net_flux(sol: &SolutionFields) -> Result<[f64; 4]> {
    let mut out = [0.0; 4];
    for side in Side::ALL {
        out[side_index(side)] = side_inflow(sol, side, None)?;
    }
    Ok(out)
}

/// `-(Σ inflow) - ∫f`: zero when outflow minus inflow equals the total source.
pub fn balance_defect(sol: &SolutionFields) -> Result<f64> {
    let disc = sol.discretization()?;
    let inflow: f64 = boundary_net_flux(sol)?.iter().sum();
    let total = match disc.formulation() {
        Formulation::Mixed => disc.f_dof.iter().sum(),
        Formulation::Direct => disc.source_total,
    };
    Ok(-inflow - total)
}

/// `(inflow through the left boundary, outflow through the right boundary)`
/// of the element rows carrying `region`.
pub fn region_fluxes(sol: &SolutionFields, region: usize) -> Result<(f64, f64)> {
    let disc = sol.discretization()?;
    let rows = disc.mesh.region_rows(region);
    if rows.is_empty() {
        return Err(Error::Config(format!("no elements in region {region}")));
    }
    let inflow = side_inflow(sol, Side::Left, Some(&rows))?;
    let outflow = -side_inflow(sol, Side::Right, Some(&rows))?;
    Ok((inflow, outflow))
}

/// Nodal stream function on the global grid, `ψ = 0` at the lower-left node.
#[derive(Debug, Clone)]
pub struct StreamFunction {
    pub grid: GridComplex,
    pub values: Vec<f64>,
    /// Difference between the two integration orders.
    pub path_defect: f64,
}

/// Integrates a divergence-free flux cochain to `ψ` with `u = Ẽ¹'⁰ ψ`.
pub fn stream_function(sol: &SolutionFields) -> Result<StreamFunction> {
    let disc = sol.discretization()?;
    if disc.formulation() != Formulation::Mixed {
        return Err(Error::Config("stream function needs a mixed solution".into()));
    }
    let g = disc.dofmap.global;
    let u = &sol.u;
    let scale = u.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let div = g.incidence_div().apply(u);
    let worst = div.iter().fold(0.0f64, |m, v| m.max(v.abs())) / scale;
    if worst > 1e-10 {
        return Err(Error::NotDivergenceFree(worst));
    }
    // columns first: up the left edge, then across each row
    let mut a = vec![0.0; g.node_count()];
    for j in 0..g.cy {
        a[g.node(0, j + 1)] = a[g.node(0, j)] + u[g.x_flux(0, j)];
    }
    for j in 0..=g.cy {
        for i in 0..g.cx {
            a[g.node(i + 1, j)] = a[g.node(i, j)] - u[g.y_flux(i, j)];
        }
    }
    // rows first: along the bottom, then up each column
    let mut b = vec![0.0; g.node_count()];
    for i in 0..g.cx {
        b[g.node(i + 1, 0)] = b[g.node(i, 0)] - u[g.y_flux(i, 0)];
    }
    for i in 0..=g.cx {
        for j in 0..g.cy {
            b[g.node(i, j + 1)] = b[g.node(i, j)] + u[g.x_flux(i, j)];
        }
    }
    let path_defect = a
        .iter()
        .zip(&b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    Ok(StreamFunction {
        grid: g,
        values: a,
        path_defect,
    })
}

/// Least-squares slope of `log(err)` against `log(x)`.
pub fn convergence_rate(x: &[f64], err: &[f64]) -> f64 {
    assert_eq!(x.len(), err.len());
    assert!(x.len() >= 2, "need at least two samples");
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let le: Vec<f64> = err.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let me = le.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&le).map(|(a, b)| (a - mx) * (b - me)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// One row of a study.
#[derive(Debug, Clone, Default)]
pub struct ErrorReport {
    pub elements: usize,
    pub degree: usize,
    pub unknowns: usize,
    pub p_error: Option<f64>,
    pub u_error: Option<f64>,
    pub divergence: Option<DivergenceReport>,
    /// Inflow per side `[left, right, bottom, top]`.
    pub side_inflow: [f64; 4],
    /// `(in, out)` per region.
    pub region_flux: Vec<(f64, f64)>,
    pub balance: f64,
    pub wall_time: Duration,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::Permeability;
    use crate::basis1d::NodalBasis;
    use crate::solvers::{run, BoundaryConditions, Problem, SolverOptions};

    fn uniform_flow(f: Formulation, mesh: Mesh) -> SolutionFields {
        let pr = Problem::new(
            mesh,
            Permeability::Identity,
            |_, _| 0.0,
            BoundaryConditions::dirichlet(|x, _| 1.0 - x),
        );
        run(&pr, f, &SolverOptions::default()).unwrap()
    }

    #[test]
    fn uniform_flow_side_fluxes() {
        for f in [Formulation::Mixed, Formulation::Direct] {
            let sol = uniform_flow(f, Mesh::rectangle(3, 2, 3, [0.0, 1.0, 0.0, 1.0]).unwrap());
            let s = boundary_net_flux(&sol).unwrap();
            assert!((s[0] - 1.0).abs() < 1e-12, "{f:?} {s:?}");
            assert!((s[1] + 1.0).abs() < 1e-12, "{f:?} {s:?}");
            assert!(s[2].abs() < 1e-12 && s[3].abs() < 1e-12, "{f:?} {s:?}");
            assert!(balance_defect(&sol).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn all_sand_layout_passes_unit_flux() {
        let mask = vec![vec![false; 4]; 4];
        for f in [Formulation::Mixed, Formulation::Direct] {
            let pr = crate::cases::sandshale_problem(&mask, 3, 1e-6).unwrap();
            let sol = run(&pr, f, &SolverOptions::default()).unwrap();
            assert!((side_inflow(&sol, Side::Left, None).unwrap() - 1.0).abs() < 1e-10);
            let (i, o) = region_fluxes(&sol, 0).unwrap();
            assert!((i - 1.0).abs() < 1e-10 && (o - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn stream_function_of_uniform_flow() {
        let n = 3;
        let sol = uniform_flow(Formulation::Mixed, Mesh::unit_square(2, n).unwrap());
        let psi = stream_function(&sol).unwrap();
        assert!(psi.path_defect < 1e-11);
        let nodes = NodalBasis::new(n).unwrap().nodes().to_vec();
        let g = psi.grid;
        for j in 0..=g.cy {
            // ψ = y on the global GLL lattice
            let (b, jl) = if j == g.cy { (1, n) } else { (j / n, j % n) };
            let y = 0.5 * b as f64 + 0.25 * (nodes[jl] + 1.0);
            for i in 0..=g.cx {
                assert!((psi.values[g.node(i, j)] - y).abs() < 1e-12);
            }
        }
        let back = g.incidence_stream().apply(&psi.values);
        for (a, b) in back.iter().zip(&sol.u) {
            assert!((a - b).abs() < 1e-11);
        }
        let mut broken = sol.clone();
        broken.u[0] += 1.0;
        assert!(matches!(stream_function(&broken), Err(Error::NotDivergenceFree(_))));
    }

    #[test]
    fn l2_error_oracles() {
        for f in [Formulation::Mixed, Formulation::Direct] {
            let sol = uniform_flow(f, Mesh::unit_square(2, 2).unwrap());
            let (ep, eu) = l2_errors(&sol, &|x, _| 1.0 - x, &|_, _| [1.0, 0.0]).unwrap();
            assert!(ep < 1e-13 && eu < 1e-13);
            let d = 0.125;
            let ep = l2_error(&sol, &|x, _| 1.0 - x + d).unwrap();
            assert!((ep - d).abs() < 1e-13);
        }
    }

    #[test]
    fn cell_areas_reconstruct_unit_pressure() {
        let mut sol = uniform_flow(Formulation::Mixed, Mesh::rectangle(2, 2, 3, [0.0, 2.0, 0.0, 1.0]).unwrap());
        let disc = sol.discretization().unwrap().clone();
        sol.p = volume_cochain(&disc.mesh, &disc.dofmap, &|_, _| 1.0, 6).unwrap();
        let rec = Reconstruction::new(&sol).unwrap();
        for &(x, y) in &[(0.1, 0.1), (1.3, 0.77), (1.99, 0.5)] {
            assert!((rec.at(x, y).unwrap().0 - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn divergence_of_an_inserted_field() {
        // u = (x², 0) with f = 0: ‖div u‖ = ‖2x‖ = 2/√3 on the unit square
        let mut sol = uniform_flow(Formulation::Mixed, Mesh::unit_square(2, 3).unwrap());
        let disc = sol.discretization().unwrap().clone();
        sol.u = flux_cochain(&disc.mesh, &disc.dofmap, &|x, _| [x * x, 0.0], 6).unwrap();
        let r = divergence_residual(&sol).unwrap();
        assert!((r.l2 - 2.0 / 3f64.sqrt()).abs() < 1e-12, "{}", r.l2);
        sol.u = flux_cochain(&disc.mesh, &disc.dofmap, &|_, y| [y, 0.0], 6).unwrap();
        assert!(divergence_residual(&sol).unwrap().exactness < 1e-14);
    }

    #[test]
    fn rate_of_synthetic_data() {
        let h = [0.5, 0.25, 0.125, 0.0625];
        let e: Vec<f64> = h.iter().map(|x| 3.0 * x * x).collect();
        assert!((convergence_rate(&h, &e) - 2.0).abs() < 1e-12);
    }
}
