//! Direct and mixed linear systems, strong boundary conditions, gauge fixing
//! and the sparse direct solve.
//!
//! Global unknown order: direct `[p]` (nodal); mixed `[u; q]` with the flux
//! dofs first. The mixed block system is kept in the form
//! `[M, Bᵀ; B, 0] [u; q] = [g; f]` with `B = M⁽ᵈ⁾ E`, so `q` is the volume
//! cochain of `-p`; [`SolutionFields::p`] holds the physical sign.

use std::sync::Arc;

use faer::linalg::solvers::Solve;
use faer::Mat;

use crate::assembly::{
    assemble_global, assemble_global_rect, assemble_vector, load_nodal, load_volume,
    mass_flux_weighted, mass_line_weighted, mass_volume, per_element, Dense, Permeability,
    SparseMatrix, Tabulation,
};
use crate::error::{Error, Result};
use crate::geometry::ElementMap;
use crate::mesh::Mesh;
use crate::quadrature::{gauss_rule, QuadratureRule};
use crate::topology::{
    assemble_dofmap, local_incidence, DofKind, DofMap, Formulation, Side, SideKinds,
};

pub type ScalarFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Boundary data. `normal_flux` is `u·n` with the outward normal.
#[derive(Clone)]
pub struct BoundaryConditions {
    pub sides: SideKinds,
    pub pressure: ScalarFn,
    pub normal_flux: ScalarFn,
}

impl BoundaryConditions {
    pub fn dirichlet(p: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            sides: SideKinds::all(DofKind::Pressure),
            pressure: Arc::new(p),
            normal_flux: Arc::new(|_, _| 0.0),
        }
    }

    pub fn neumann(un: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            sides: SideKinds::all(DofKind::Flux),
            pressure: Arc::new(|_, _| 0.0),
            normal_flux: Arc::new(un),
        }
    }

    /// `p = 1` on the left, `p = 0` on the right, no flow through top and bottom.
    pub fn left_to_right() -> Self {
        Self {
            sides: SideKinds {
                left: DofKind::Pressure,
                right: DofKind::Pressure,
                bottom: DofKind::Flux,
                top: DofKind::Flux,
            },
            pressure: Arc::new(|x, _| if x < 0.5 { 1.0 } else { 0.0 }),
            normal_flux: Arc::new(|_, _| 0.0),
        }
    }
}

impl std::fmt::Debug for BoundaryConditions {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BoundaryConditions")
            .field("sides", &self.sides)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gauge {
    /// Leave a pure-flux problem singular (building it then fails).
    None,
    PinFirst,
    MeanZero,
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    /// Gauss points per direction beyond `N`.
    pub quad_extra: usize,
    pub gauge: Gauge,
    /// Solve `[M, Eᵀ; E, 0]` with `M⁽ᵈ⁾` divided out instead of the printed form.
    pub reduced_mixed: bool,
    /// Element-block threads; `1` is bit-deterministic, `0` uses the rayon default.
    pub workers: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            quad_extra: 3,
            gauge: Gauge::PinFirst,
            reduced_mixed: false,
            workers: 1,
        }
    }
}

#[derive(Clone)]
pub struct Problem {
    pub mesh: Arc<Mesh>,
    pub permeability: Permeability,
    pub source: ScalarFn,
    pub bc: BoundaryConditions,
}

impl Problem {
    pub fn new(
        mesh: Mesh,
        permeability: Permeability,
        source: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        bc: BoundaryConditions,
    ) -> Self {
        Self {
            mesh: Arc::new(mesh),
            permeability,
            source: Arc::new(source),
            bc,
        }
    }
}

/// Everything needed to interpret a global coefficient vector.
#[derive(Debug)]
pub struct Discretization {
    pub mesh: Arc<Mesh>,
    pub dofmap: DofMap,
    pub tab: Tabulation,
    pub permeability: Permeability,
    /// Per-element `(M⁽ᵈ⁾)⁻¹` (mixed only).
    pub volume_inverse: Vec<Dense>,
    /// Per-element `M⁽ᵈ⁾` (mixed only).
    pub volume_mass: Vec<Dense>,
    /// Volume cochain of `f`, `(M⁽ᵈ⁾)⁻¹` times the volume moments (mixed only).
    pub f_dof: Vec<f64>,
    /// Volume cochain of the constant 1; spans the pure-flux null space (mixed only).
    pub unit_dof: Vec<f64>,
    /// Full matrix and rhs before elimination (direct only), for boundary reactions.
    pub full_matrix: Option<SparseMatrix>,
    pub full_rhs: Vec<f64>,
    /// `∫ h_i dΩ` per node (direct only).
    pub nodal_weights: Vec<f64>,
    /// Prescribed outward normal flux integrated over each side.
    pub side_data_flux: [f64; 4],
    pub source_total: f64,
    /// The mixed system was built with `M⁽ᵈ⁾` divided out.
    pub reduced_mixed: bool,
}

impl Discretization {
    pub fn formulation(&self) -> Formulation {
        self.dofmap.formulation
    }

    pub fn degree(&self) -> usize {
        self.dofmap.degree
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemKind {
    Spd,
    Indefinite,
}

/// Data needed to remove the constant null space of a pure-flux problem.
#[derive(Debug, Clone)]
pub struct GaugeData {
    /// Reduced indices of the potential unknowns.
    pub p_positions: Vec<usize>,
    /// Mean-value weights, aligned with `p_positions`.
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub matrix: SparseMatrix,
    pub rhs: Vec<f64>,
    pub kind: SystemKind,
    /// Global unknown index of each reduced unknown.
    pub free: Vec<usize>,
    /// Strongly imposed unknowns `(global index, value)`.
    pub eliminated: Vec<(usize, f64)>,
    pub n_global: usize,
    /// Set while the constant null space is still present.
    pub gauge: Option<GaugeData>,
    /// A mean-zero multiplier row was appended.
    pub multiplier: bool,
    pub disc: Option<Arc<Discretization>>,
}

impl LinearSystem {
    /// A bare system with no boundary bookkeeping.
    pub fn raw(matrix: SparseMatrix, rhs: Vec<f64>, kind: SystemKind) -> Result<Self> {
        if matrix.rows() != matrix.cols() || matrix.rows() != rhs.len() {
            return Err(Error::LayoutMismatch(format!(
                "{}x{} matrix with rhs of length {}",
                matrix.rows(),
                matrix.cols(),
                rhs.len()
            )));
        }
        let n = rhs.len();
        Ok(Self {
            matrix,
            rhs,
            kind,
            free: (0..n).collect(),
            eliminated: Vec::new(),
            n_global: n,
            gauge: None,
            multiplier: false,
            disc: None,
        })
    }

    pub fn size(&self) -> usize {
        self.rhs.len()
    }
}

/// Solved coefficient vectors with their discretization context.
#[derive(Debug, Clone)]
pub struct SolutionFields {
    /// Global unknown vector in system order (eliminated values re-injected).
    pub x: Vec<f64>,
    /// Potential coefficients: nodal values (direct) or volume cochain (mixed),
    /// physical sign, shifted to zero mean for pure-flux problems.
    pub p: Vec<f64>,
    /// Flux cochain, global +x/+y orientation (mixed only).
    pub u: Vec<f64>,
    pub disc: Option<Arc<Discretization>>,
    /// `‖Ax - b‖ / ‖b‖` of the reduced system.
    pub residual: f64,
}

impl SolutionFields {
    pub fn discretization(&self) -> Result<&Arc<Discretization>> {
        self.disc
            .as_ref()
            .ok_or_else(|| Error::Config("solution carries no discretization".into()))
    }
}

/// Physical point and `|dx/ds|` on the element side `side` at parameter `s`.
pub(crate) fn side_point(map: &ElementMap, side: Side, s: f64) -> ([f64; 2], f64) {
    let (xi, eta, col) = match side {
        Side::Left => (-1.0, s, 1),
        Side::Right => (1.0, s, 1),
        Side::Bottom => (s, -1.0, 0),
        Side::Top => (s, 1.0, 0),
    };
    let j = map.jacobian_unchecked(xi, eta);
    (map.map_eval(xi, eta), j.m[0][col].hypot(j.m[1][col]))
}

/// Elements along a domain side with their position along it.
pub(crate) fn side_elements(dm: &DofMap, side: Side) -> Vec<(usize, usize)> {
    match side {
        Side::Left => (0..dm.ey).map(|b| (b * dm.ex, b)).collect(),
        Side::Right => (0..dm.ey).map(|b| (b * dm.ex + dm.ex - 1, b)).collect(),
        Side::Bottom => (0..dm.ex).map(|a| (a, a)).collect(),
        Side::Top => (0..dm.ex).map(|a| ((dm.ey - 1) * dm.ex + a, a)).collect(),
    }
}

/// `∫ g dS` over the physical image of `[s0, s1]` on an element side.
fn side_integral(
    map: &ElementMap,
    side: Side,
    rule: &QuadratureRule,
    s0: f64,
    s1: f64,
    g: impl Fn(f64, [f64; 2]) -> f64,
) -> f64 {
    rule.integrate_on(s0, s1, |s| {
        let (p, ds) = side_point(map, side, s);
        g(s, p) * ds
    })
}

fn side_index(side: Side) -> usize {
    match side {
        Side::Left => 0,
        Side::Right => 1,
        Side::Bottom => 2,
        Side::Top => 3,
    }
}

/// Sign turning an outward flux into a flux along the global +x/+y direction.
fn outward_to_global(side: Side) -> f64 {
    match side {
        Side::Left | Side::Bottom => -1.0,
        Side::Right | Side::Top => 1.0,
    }
}

fn boundary_data_totals(
    mesh: &Mesh,
    dm: &DofMap,
    bc: &BoundaryConditions,
    rule: &QuadratureRule,
) -> [f64; 4] {
    let mut out = [0.0; 4];
    for side in Side::ALL {
        if bc.sides.get(side) != DofKind::Flux {
            continue;
        }
        out[side_index(side)] = side_elements(dm, side)
            .into_iter()
            .map(|(e, _)| {
                side_integral(&mesh.maps[e], side, rule, -1.0, 1.0, |_, p| {
                    (bc.normal_flux)(p[0], p[1])
                })
            })
            .sum();
    }
    out
}

fn check_compatibility(bc: &BoundaryConditions, boundary: f64, source_total: f64) -> Result<()> {
    if bc.sides.has_pressure() {
        return Ok(());
    }
    if (boundary - source_total).abs() > 1e-10 * source_total.abs().max(1.0) {
        return Err(Error::IncompatibleData {
            boundary,
            source_total,
        });
    }
    Ok(())
}

/// Removes known unknowns symmetrically.
fn reduce(
    a: &SparseMatrix,
    b: &[f64],
    known: &[Option<f64>],
) -> (SparseMatrix, Vec<f64>, Vec<usize>, Vec<(usize, f64)>) {
    let n = b.len();
    let mut map = vec![usize::MAX; n];
    let mut free = Vec::new();
    let mut eliminated = Vec::new();
    for (i, k) in known.iter().enumerate() {
        match k {
            None => {
                map[i] = free.len();
                free.push(i);
            }
            Some(v) => eliminated.push((i, *v)),
        }
    }
    let mut rhs: Vec<f64> = free.iter().map(|&i| b[i]).collect();
    let mut t = Vec::with_capacity(a.nnz());
    for (r, c, v) in a.triplets() {
        if map[r] == usize::MAX {
            continue;
        }
        match known[c] {
            None => t.push((map[r], map[c], v)),
            Some(x) => rhs[map[r]] -= v * x,
        }
    }
    let m = free.len();
    (SparseMatrix::from_triplets(m, m, t), rhs, free, eliminated)
}

/// Nodal-potential system `Eᵀ M⁽¹⁾_K E p = f` with strong Dirichlet data.
pub fn build_direct(problem: &Problem, opts: &SolverOptions) -> Result<LinearSystem> {
    let mesh = &problem.mesh;
    let n = mesh.degree();
    let dm = assemble_dofmap(&mesh.layout, Formulation::Direct, problem.bc.sides)?;
    let tab = Tabulation::gauss(n, opts.quad_extra)?;
    let e = SparseMatrix::from_incidence(&local_incidence(n, Formulation::Direct));
    let et = e.transpose();
    let k = &problem.permeability;
    let source = problem.source.as_ref();

    let parts = per_element(mesh.element_count(), opts.workers, |el| {
        let map = &mesh.maps[el];
        let m1 = mass_line_weighted(map, k, mesh.regions[el], &tab)?;
        let stiff = triple_product(&et, &m1, &e);
        let load = load_nodal(map, &tab, source)?;
        let ones = load_nodal(map, &tab, &|_, _| 1.0)?;
        Ok((stiff, load, ones))
    })?;
    let (mut blocks, mut loads, mut ones) = (Vec::new(), Vec::new(), Vec::new());
    for (s, l, o) in parts {
        blocks.push(s);
        loads.push(l);
        ones.push(o);
    }
    let np = dm.n_p();
    let a_full = assemble_global(&blocks, &dm.p_gather, np)?;
    let mut f_full = assemble_vector(&loads, &dm.p_gather, np)?;
    let nodal_weights = assemble_vector(&ones, &dm.p_gather, np)?;
    let source_total: f64 = loads.iter().flatten().sum();

    // Flux sides: f -= ∫ h_i ū_n dS on the side nodes.
    let side_rule = gauss_rule(n + opts.quad_extra)?;
    let nodal = tab_nodal(&tab);
    for side in Side::ALL {
        if problem.bc.sides.get(side) != DofKind::Flux {
            continue;
        }
        for (el, _) in side_elements(&dm, side) {
            let map = &mesh.maps[el];
            for i in 0..=n {
                let v = side_integral(map, side, &side_rule, -1.0, 1.0, |s, p| {
                    nodal.eval(i, s) * (problem.bc.normal_flux)(p[0], p[1])
                });
                let local = side_local_node(n, side, i);
                f_full[dm.p_gather[el][local]] -= v;
            }
        }
    }
    let data_flux = boundary_data_totals(mesh, &dm, &problem.bc, &side_rule);
    check_compatibility(&problem.bc, data_flux.iter().sum(), source_total)?;

    // Dirichlet values at node positions.
    let mut known = vec![None; np];
    let gll = tab_nodal(&tab).nodes().to_vec();
    for (el, gather) in dm.p_gather.iter().enumerate() {
        let map = &mesh.maps[el];
        for j in 0..=n {
            for i in 0..=n {
                let g = gather[j * (n + 1) + i];
                if dm.marks.kind(g) == DofKind::Pressure && known[g].is_none() {
                    let x = map.map_eval(gll[i], gll[j]);
                    known[g] = Some((problem.bc.pressure)(x[0], x[1]));
                }
            }
        }
    }
    let (matrix, rhs, free, eliminated) = reduce(&a_full, &f_full, &known);
    let gauge = (!problem.bc.sides.has_pressure()).then(|| GaugeData {
        p_positions: (0..free.len()).collect(),
        weights: free.iter().map(|&g| nodal_weights[g]).collect(),
    });
    let disc = Discretization {
        mesh: mesh.clone(),
        dofmap: dm,
        tab,
        permeability: problem.permeability.clone(),
        volume_inverse: Vec::new(),
        volume_mass: Vec::new(),
        f_dof: Vec::new(),
        unit_dof: Vec::new(),
        full_matrix: Some(a_full),
        full_rhs: f_full,
        nodal_weights,
        side_data_flux: data_flux,
        source_total,
        reduced_mixed: false,
    };
    let sys = LinearSystem {
        matrix,
        rhs,
        kind: SystemKind::Spd,
        free,
        eliminated,
        n_global: np,
        gauge,
        multiplier: false,
        disc: Some(Arc::new(disc)),
    };
    finish_gauge(sys, opts.gauge)
}

fn tab_nodal(tab: &Tabulation) -> crate::basis1d::NodalBasis {
    crate::basis1d::NodalBasis::new(tab.degree).expect("degree already validated")
}

/// Local nodal index of the `i`-th node along an element side.
fn side_local_node(n: usize, side: Side, i: usize) -> usize {
    match side {
        Side::Left => i * (n + 1),
        Side::Right => i * (n + 1) + n,
        Side::Bottom => i,
        Side::Top => n * (n + 1) + i,
    }
}

/// `Aᵀ M B` for a dense `M` and sparse `A`, `B`.
fn triple_product(at: &SparseMatrix, m: &Dense, b: &SparseMatrix) -> Dense {
    // mb = M B
    let mut mb = Dense::zeros(m.rows, b.cols());
    for r in 0..m.rows {
        for k in 0..m.cols {
            let v = m.get(r, k);
            if v == 0.0 {
                continue;
            }
            for (c, w) in b.row(k) {
                mb.add(r, c, v * w);
            }
        }
    }
    let mut out = Dense::zeros(at.rows(), b.cols());
    for r in 0..at.rows() {
        for (k, v) in at.row(r) {
            for c in 0..b.cols() {
                out.add(r, c, v * mb.get(k, c));
            }
        }
    }
    out
}

/// `M B` for a dense `M` and sparse `B`.
fn dense_times_sparse(m: &Dense, b: &SparseMatrix) -> Dense {
    let mut out = Dense::zeros(m.rows, b.cols());
    for r in 0..m.rows {
        for k in 0..m.cols {
            let v = m.get(r, k);
            for (c, w) in b.row(k) {
                out.add(r, c, v * w);
            }
        }
    }
    out
}

/// Flux/potential saddle-point system with strong flux data and weak
/// potential data.
pub fn build_mixed(problem: &Problem, opts: &SolverOptions) -> Result<LinearSystem> {
    let mesh = &problem.mesh;
    let n = mesh.degree();
    let dm = assemble_dofmap(&mesh.layout, Formulation::Mixed, problem.bc.sides)?;
    let tab = Tabulation::gauss(n, opts.quad_extra)?;
    let e_loc = SparseMatrix::from_incidence(&local_incidence(n, Formulation::Mixed));
    let k = &problem.permeability;
    let source = problem.source.as_ref();

    struct Part {
        mflux: Dense,
        mvol: Dense,
        minv: Dense,
        b: Dense,
        load: Vec<f64>,
    }
    let parts = per_element(mesh.element_count(), opts.workers, |el| {
        let map = &mesh.maps[el];
        let mflux = mass_flux_weighted(map, k, mesh.regions[el], &tab)?;
        let mvol = mass_volume(map, &tab)?;
        let minv = mvol.inverse()?;
        let b = dense_times_sparse(&mvol, &e_loc);
        let load = load_volume(map, &tab, source)?;
        Ok(Part {
            mflux,
            mvol,
            minv,
            b,
            load,
        })
    })?;

    let (nu, np) = (dm.n_u(), dm.n_p());
    let nt = nu + np;
    let mflux: Vec<Dense> = parts.iter().map(|p| p.mflux.clone()).collect();
    let m = assemble_global(&mflux, &dm.u_gather, nu)?;
    let coupling = if opts.reduced_mixed {
        SparseMatrix::from_incidence(&dm.global.incidence_div())
    } else {
        let bs: Vec<Dense> = parts.iter().map(|p| p.b.clone()).collect();
        assemble_global_rect(&bs, &dm.p_gather, &dm.u_gather, np, nu)?
    };
    let mut t = m.triplets();
    for (r, c, v) in coupling.triplets() {
        t.push((nu + r, c, v));
        t.push((c, nu + r, v));
    }
    let a_full = SparseMatrix::from_triplets(nt, nt, t);

    // f_dof = (M⁽ᵈ⁾)⁻¹ · moments, element by element; unit_dof likewise for f = 1.
    let mut f_dof = vec![0.0; np];
    let mut unit_dof = vec![0.0; np];
    let mut moments = vec![0.0; np];
    for (p, g) in parts.iter().zip(&dm.p_gather) {
        let fd = p.minv.matvec(&p.load);
        let ud = p.minv.matvec(&vec![1.0; g.len()]);
        for (k, &gi) in g.iter().enumerate() {
            f_dof[gi] = fd[k];
            unit_dof[gi] = ud[k];
            moments[gi] = p.load[k];
        }
    }
    let source_total: f64 = moments.iter().sum();

    let mut b_full = vec![0.0; nt];
    if opts.reduced_mixed {
        b_full[nu..].copy_from_slice(&f_dof);
    } else {
        b_full[nu..].copy_from_slice(&moments);
    }

    // Weak potential data: g_a = -∫ p̄ (ũ_a · n_out) dS.
    let side_rule = gauss_rule(n + opts.quad_extra)?;
    let edge = crate::basis1d::EdgeBasis::new(n)?;
    let nodes = edge.nodal().nodes().to_vec();
    let mut known: Vec<Option<f64>> = vec![None; nt];
    for side in Side::ALL {
        let kind = problem.bc.sides.get(side);
        for (el, pos) in side_elements(&dm, side) {
            let map = &mesh.maps[el];
            for j in 1..=n {
                let global = side_flux_dof(&dm, side, pos, j);
                match kind {
                    DofKind::Pressure => {
                        let v = side_rule.integrate(|s| {
                            let (p, _) = side_point(map, side, s);
                            (problem.bc.pressure)(p[0], p[1]) * edge.eval(j, s)
                        });
                        b_full[global] += -outward_to_global(side) * v;
                    }
                    DofKind::Flux => {
                        let v = side_integral(map, side, &side_rule, nodes[j - 1], nodes[j], |_, p| {
                            (problem.bc.normal_flux)(p[0], p[1])
                        });
                        known[global] = Some(outward_to_global(side) * v);
                    }
                    DofKind::Interior => {}
                }
            }
        }
    }
    let data_flux = boundary_data_totals(mesh, &dm, &problem.bc, &side_rule);
    check_compatibility(&problem.bc, data_flux.iter().sum(), source_total)?;

    let (matrix, rhs, free, eliminated) = reduce(&a_full, &b_full, &known);
    let gauge = (!problem.bc.sides.has_pressure()).then(|| {
        let p_positions: Vec<usize> = free
            .iter()
            .enumerate()
            .filter(|(_, &g)| g >= nu)
            .map(|(k, _)| k)
            .collect();
        let weights = p_positions
            .iter()
            .map(|&k| {
                if opts.reduced_mixed {
                    unit_dof[free[k] - nu]
                } else {
                    1.0
                }
            })
            .collect();
        GaugeData {
            p_positions,
            weights,
        }
    });
    let disc = Discretization {
        mesh: mesh.clone(),
        dofmap: dm,
        tab,
        permeability: problem.permeability.clone(),
        volume_inverse: parts.iter().map(|p| p.minv.clone()).collect(),
        volume_mass: parts.into_iter().map(|p| p.mvol).collect(),
        f_dof,
        unit_dof,
        full_matrix: None,
        full_rhs: Vec::new(),
        nodal_weights: Vec::new(),
        side_data_flux: data_flux,
        source_total,
        reduced_mixed: opts.reduced_mixed,
    };
    let sys = LinearSystem {
        matrix,
        rhs,
        kind: SystemKind::Indefinite,
        free,
        eliminated,
        n_global: nt,
        gauge,
        multiplier: false,
        disc: Some(Arc::new(disc)),
    };
    finish_gauge(sys, opts.gauge)
}

/// Global flux dof of the `j`-th edge (1-based) along a side, on the element
/// at position `pos` along that side.
pub(crate) fn side_flux_dof(dm: &DofMap, side: Side, pos: usize, j: usize) -> usize {
    let g = dm.global;
    let n = dm.degree;
    match side {
        Side::Left => g.x_flux(0, pos * n + j - 1),
        Side::Right => g.x_flux(g.cx, pos * n + j - 1),
        Side::Bottom => g.y_flux(pos * n + j - 1, 0),
        Side::Top => g.y_flux(pos * n + j - 1, g.cy),
    }
}

fn finish_gauge(sys: LinearSystem, gauge: Gauge) -> Result<LinearSystem> {
    if sys.gauge.is_none() {
        return Ok(sys);
    }
    match gauge {
        Gauge::None => Err(Error::SingularSystem(
            "no potential boundary and no gauge fixing; the potential is defined up to a constant"
                .into(),
        )),
        g => gauge_fix(sys, g),
    }
}

/// Removes the constant null space of a pure-flux system.
pub fn gauge_fix(mut sys: LinearSystem, strategy: Gauge) -> Result<LinearSystem> {
    let Some(gd) = sys.gauge.take() else {
        return Err(Error::GaugeNotApplicable(
            "the system has potential boundary data and no null space".into(),
        ));
    };
    match strategy {
        Gauge::None => Err(Error::GaugeNotApplicable("no strategy given".into())),
        Gauge::PinFirst => {
            let pin = *gd
                .p_positions
                .first()
                .ok_or_else(|| Error::SingularSystem("no potential unknowns".into()))?;
            let n = sys.size();
            let keep: Vec<usize> = (0..n).filter(|&k| k != pin).collect();
            sys.matrix = sys.matrix.select(&keep, &keep);
            sys.rhs = keep.iter().map(|&k| sys.rhs[k]).collect();
            sys.eliminated.push((sys.free[pin], 0.0));
            sys.free = keep.iter().map(|&k| sys.free[k]).collect();
            Ok(sys)
        }
        Gauge::MeanZero => {
            let n = sys.size();
            let mut t = sys.matrix.triplets();
            for (&k, &w) in gd.p_positions.iter().zip(&gd.weights) {
                t.push((n, k, w));
                t.push((k, n, w));
            }
            sys.matrix = SparseMatrix::from_triplets(n + 1, n + 1, t);
            sys.rhs.push(0.0);
            sys.kind = SystemKind::Indefinite;
            sys.multiplier = true;
            Ok(sys)
        }
    }
}

/// Solves the reduced system; returns the reduced solution and relative residual.
///
/// Saddle-point systems are factored as quasi-definite `LDLᵀ` after a small
/// negative shift of the potential block, with refinement against the exact
/// matrix; sparse LU is the fallback.
pub fn solve_linear(sys: &LinearSystem) -> Result<(Vec<f64>, f64)> {
    let n = sys.size();
    if n == 0 {
        return Ok((Vec::new(), 0.0));
    }
    if let Some(signs) = saddle_signs(sys) {
        if let Ok(found) = refine(sys, quasi_definite_solver(&sys.matrix, &signs)?, 30) {
            return Ok(found);
        }
    }
    let a = sys.matrix.to_faer();
    let solver = match sys.kind {
        SystemKind::Spd => match a.sp_cholesky(faer::Side::Lower) {
            Ok(llt) => Box::new(move |r: &mut Mat<f64>| llt.solve_in_place(r.as_mut())),
            Err(_) => lu_solver(&a)?,
        },
        SystemKind::Indefinite => lu_solver(&a)?,
    };
    refine(sys, solver, 3)
}

type Solver = Box<dyn Fn(&mut Mat<f64>)>;

fn refine(sys: &LinearSystem, solver: Solver, rounds: usize) -> Result<(Vec<f64>, f64)> {
    let n = sys.size();
    let b = &sys.rhs;
    let bnorm = norm(b);
    let relative = |x: &[f64]| -> (Vec<f64>, f64) {
        let ax = sys.matrix.matvec(x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let rn = norm(&r);
        (r, if bnorm > 0.0 { rn / bnorm } else { rn })
    };
    let mut x = Mat::<f64>::from_fn(n, 1, |i, _| b[i]);
    solver(&mut x);
    let mut xv: Vec<f64> = (0..n).map(|i| x[(i, 0)]).collect();
    if xv.iter().any(|v| !v.is_finite()) {
        return Err(Error::FactorizationFailed("non-finite solution".into()));
    }
    let (mut r, mut rel) = relative(&xv);
    for _ in 0..rounds {
        if rel <= 1e-14 {
            break;
        }
        let mut d = Mat::<f64>::from_fn(n, 1, |i, _| r[i]);
        solver(&mut d);
        let trial: Vec<f64> = xv.iter().enumerate().map(|(k, v)| v + d[(k, 0)]).collect();
        let (rt, relt) = relative(&trial);
        if !(relt < rel) {
            break;
        }
        (xv, r, rel) = (trial, rt, relt);
    }
    if !(rel <= 1e-10) {
        return Err(Error::ResidualTooLarge(rel));
    }
    Ok((xv, rel))
}

/// Expected pivot signs of a symmetric saddle-point system: `+1` for flux
/// (mixed) or potential (direct) unknowns, `-1` for the constraint block.
fn saddle_signs(sys: &LinearSystem) -> Option<Vec<i8>> {
    if sys.kind != SystemKind::Indefinite {
        return None;
    }
    let disc = sys.disc.as_ref()?;
    let n = sys.size();
    let mut signs: Vec<i8> = match disc.formulation() {
        Formulation::Mixed => {
            let nu = disc.dofmap.n_u();
            sys.free.iter().map(|&g| if g < nu { 1 } else { -1 }).collect()
        }
        Formulation::Direct => vec![1; sys.free.len()],
    };
    if sys.multiplier {
        signs.push(-1);
    }
    (signs.len() == n).then_some(signs)
}

fn quasi_definite_solver(a: &SparseMatrix, signs: &[i8]) -> Result<Solver> {
    use faer::dyn_stack::{MemBuffer, MemStack};
    use faer::linalg::cholesky::ldlt::factor::LdltRegularization;
    use faer::sparse::linalg::cholesky::{
        factorize_symbolic_cholesky, CholeskySymbolicParams, LdltRef, SymmetricOrdering,
    };

    let n = signs.len();
    let mut t = a.triplets();
    let scale = t.iter().map(|e| e.2.abs()).fold(0.0, f64::max);
    let shift = 1e-10 * scale;
    t.extend((0..n).filter(|&k| signs[k] < 0).map(|k| (k, k, -shift)));
    let shifted = SparseMatrix::from_triplets(n, n, t).to_faer();
    let fail = |e: String| Error::FactorizationFailed(e);

    let symbolic = factorize_symbolic_cholesky(
        shifted.symbolic(),
        faer::Side::Lower,
        SymmetricOrdering::Amd,
        CholeskySymbolicParams::default(),
    )
    .map_err(|e| fail(format!("{e:?}")))?;
    let par = faer::get_global_parallelism();
    let mut values = vec![0.0; symbolic.len_val()];
    let mut buf = MemBuffer::new(
        symbolic.factorize_numeric_ldlt_scratch::<f64>(par, Default::default()),
    );
    symbolic
        .factorize_numeric_ldlt(
            &mut values,
            shifted.as_ref(),
            faer::Side::Lower,
            LdltRegularization {
                dynamic_regularization_signs: Some(signs),
                dynamic_regularization_delta: shift,
                dynamic_regularization_epsilon: 1e-14 * scale,
            },
            par,
            MemStack::new(&mut buf),
            Default::default(),
        )
        .map_err(|e| fail(format!("{e:?}")))?;
    Ok(Box::new(move |r: &mut Mat<f64>| {
        let par = faer::get_global_parallelism();
        let mut buf = MemBuffer::new(symbolic.solve_in_place_scratch::<f64>(r.ncols(), par));
        LdltRef::new(&symbolic, &values).solve_in_place_with_conj(
            faer::Conj::No,
            r.as_mut(),
            par,
            MemStack::new(&mut buf),
        );
    }))
}

fn lu_solver(a: &faer::sparse::SparseColMat<usize, f64>) -> Result<Solver> {
    let lu = a
        .sp_lu()
        .map_err(|e| Error::FactorizationFailed(format!("{e:?}")))?;
    Ok(Box::new(move |r: &mut Mat<f64>| lu.solve_in_place(r.as_mut())))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Solves and re-injects eliminated values.
pub fn solve(sys: &LinearSystem) -> Result<SolutionFields> {
    let (xr, residual) = solve_linear(sys)?;
    let mut x = vec![0.0; sys.n_global];
    for (k, &g) in sys.free.iter().enumerate() {
        x[g] = xr[k];
    }
    for &(g, v) in &sys.eliminated {
        x[g] = v;
    }
    let Some(disc) = sys.disc.clone() else {
        return Ok(SolutionFields {
            p: x.clone(),
            x,
            u: Vec::new(),
            disc: None,
            residual,
        });
    };
    let (mut p, u) = match disc.formulation() {
        Formulation::Direct => (x.clone(), Vec::new()),
        Formulation::Mixed => {
            let nu = disc.dofmap.n_u();
            let q = &x[nu..];
            let p: Vec<f64> = if disc.reduced_mixed {
                // q holds M⁽ᵈ⁾ times the cochain of -p
                let mut out = vec![0.0; q.len()];
                for (minv, g) in disc.volume_inverse.iter().zip(&disc.dofmap.p_gather) {
                    let local: Vec<f64> = g.iter().map(|&gi| q[gi]).collect();
                    for (k, v) in minv.matvec(&local).into_iter().enumerate() {
                        out[g[k]] = -v;
                    }
                }
                out
            } else {
                q.iter().map(|v| -v).collect()
            };
            (p, x[..nu].to_vec())
        }
    };
    if !has_pressure_side(&disc) {
        shift_mean_zero(&disc, &mut p);
    }
    Ok(SolutionFields {
        x,
        p,
        u,
        disc: Some(disc),
        residual,
    })
}

fn has_pressure_side(d: &Discretization) -> bool {
    d.dofmap.marks.kinds().contains(&DofKind::Pressure)
}

fn shift_mean_zero(disc: &Discretization, p: &mut [f64]) {
    match disc.formulation() {
        Formulation::Direct => {
            let w = &disc.nodal_weights;
            let mean = p.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / w.iter().sum::<f64>();
            p.iter_mut().for_each(|v| *v -= mean);
        }
        Formulation::Mixed => {
            let z = &disc.unit_dof;
            let c = p.iter().sum::<f64>() / z.iter().sum::<f64>();
            p.iter_mut().zip(z).for_each(|(v, zi)| *v -= c * zi);
        }
    }
}

/// Builds and solves in one step.
pub fn run(problem: &Problem, formulation: Formulation, opts: &SolverOptions) -> Result<SolutionFields> {
    let sys = match formulation {
        Formulation::Direct => build_direct(problem, opts)?,
        Formulation::Mixed => build_mixed(problem, opts)?,
    };
    solve(&sys)
}
