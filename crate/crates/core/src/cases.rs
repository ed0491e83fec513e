//! Benchmark cases: manufactured solution on a deformed mesh, sand-shale
//! blocks, and the curved low-permeability streak.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::time::Instant;

use crate::assembly::Permeability;
use crate::error::{Error, Result};
use crate::mesh::{Mesh, STREAK_CENTER};
use crate::postproc::{
    balance_defect, boundary_net_flux, divergence_residual, l2_errors, region_fluxes, ErrorReport,
};
use crate::solvers::{run, BoundaryConditions, Gauge, Problem, SolutionFields, SolverOptions};
use crate::topology::Formulation;

/// Shipped approximation of the 20 x 20 sand-shale layout (80 shale cells).
pub const APPROX_SHALE_MASK: &str = include_str!("../../../data/sandshale_approx.mask");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseKind {
    Manufactured,
    SandShale,
    Streak,
}

impl CaseKind {
    pub fn name(self) -> &'static str {
        match self {
            CaseKind::Manufactured => "manufactured",
            CaseKind::SandShale => "sandshale",
            CaseKind::Streak => "streak",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "manufactured" => Ok(CaseKind::Manufactured),
            "sandshale" => Ok(CaseKind::SandShale),
            "streak" => Ok(CaseKind::Streak),
            _ => Err(Error::Config(format!("unknown case '{s}'"))),
        }
    }
}

pub fn formulation_name(f: Formulation) -> &'static str {
    match f {
        Formulation::Direct => "direct",
        Formulation::Mixed => "mixed",
    }
}

pub fn parse_formulations(s: &str) -> Result<Vec<Formulation>> {
    match s {
        "direct" => Ok(vec![Formulation::Direct]),
        "mixed" => Ok(vec![Formulation::Mixed]),
        "both" => Ok(vec![Formulation::Mixed, Formulation::Direct]),
        _ => Err(Error::Config(format!(
            "unknown formulation '{s}' (direct, mixed or both)"
        ))),
    }
}

/// All parameters of one study; sweeps run over `elements x degrees`.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseConfig {
    pub case: CaseKind,
    pub formulations: Vec<Formulation>,
    pub elements: Vec<usize>,
    pub degrees: Vec<usize>,
    pub alpha: f64,
    pub deform: f64,
    pub shale_k: f64,
    pub k_par: f64,
    pub k_perp: f64,
    pub r_in: f64,
    pub r_out: f64,
    pub layout: Option<PathBuf>,
    pub out: PathBuf,
    pub quad_extra: usize,
    pub workers: usize,
    pub reduced_mixed: bool,
}

impl CaseConfig {
    pub fn defaults(case: CaseKind) -> Self {
        let (elements, degrees) = match case {
            CaseKind::Manufactured => (vec![4, 8, 16], vec![2]),
            CaseKind::SandShale => (vec![20], vec![1, 2, 3, 4]),
            CaseKind::Streak => (vec![4], vec![1, 2, 3, 4]),
        };
        Self {
            case,
            formulations: vec![Formulation::Mixed],
            elements,
            degrees,
            alpha: 0.01,
            deform: 0.0,
            shale_k: 1e-6,
            k_par: 0.1,
            k_perp: 1e-3,
            r_in: STREAK_R_IN,
            r_out: STREAK_R_OUT,
            layout: None,
            out: PathBuf::from("out"),
            quad_extra: 3,
            workers: 1,
            reduced_mixed: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.elements.is_empty() || self.degrees.is_empty() {
            return Err(Error::Config("element and degree sweeps must be nonempty".into()));
        }
        if self.elements.contains(&0) || self.degrees.contains(&0) {
            return Err(Error::Config("element counts and degrees must be positive".into()));
        }
        if self.formulations.is_empty() {
            return Err(Error::Config("no formulation selected".into()));
        }
        if !(self.alpha >= 0.0) {
            return Err(Error::Config(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        if !(self.deform.abs() < 1.0 / PI) {
            return Err(Error::Config(format!(
                "deformation |c| = {} must be below 1/pi for the map to stay bijective",
                self.deform.abs()
            )));
        }
        for (name, v) in [
            ("shale_k", self.shale_k),
            ("k_par", self.k_par),
            ("k_perp", self.k_perp),
        ] {
            if !(v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.r_in < self.r_out) {
            return Err(Error::Config("streak radii must satisfy r_in < r_out".into()));
        }
        Ok(())
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            quad_extra: self.quad_extra,
            gauge: Gauge::PinFirst,
            reduced_mixed: self.reduced_mixed,
            workers: self.workers,
        }
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected 'key = value'", lineno + 1))
            })?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let num = |v: &str| -> Result<f64> {
            v.parse::<f64>()
                .map_err(|_| Error::Config(format!("{key}: '{v}' is not a number")))
        };
        let list = |v: &str| -> Result<Vec<usize>> {
            v.split(',')
                .map(|s| s.trim())
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse::<usize>()
                        .map_err(|_| Error::Config(format!("{key}: '{s}' is not a count")))
                })
                .collect()
        };
        match key {
            "case" => self.case = CaseKind::parse(value)?,
            "formulation" => self.formulations = parse_formulations(value)?,
            "elements" => self.elements = list(value)?,
            "degree" | "degrees" => self.degrees = list(value)?,
            "degree_max" => {
                let max = list(value)?
                    .first()
                    .copied()
                    .ok_or_else(|| Error::Config("degree_max needs a value".into()))?;
                self.degrees = (1..=max).collect();
            }
            "alpha" => self.alpha = num(value)?,
            "deform" => self.deform = num(value)?,
            "shale_k" => self.shale_k = num(value)?,
            "k_par" => self.k_par = num(value)?,
            "k_perp" => self.k_perp = num(value)?,
            "r_in" => self.r_in = num(value)?,
            "r_out" => self.r_out = num(value)?,
            "layout" => {
                self.layout = (!value.is_empty() && value != "builtin").then(|| PathBuf::from(value))
            }
            "out" => self.out = PathBuf::from(value),
            "quad_extra" => self.quad_extra = num(value)? as usize,
            "workers" => self.workers = num(value)? as usize,
            "reduced_mixed" => {
                self.reduced_mixed = match value {
                    "true" | "1" | "yes" => true,
                    "false" | "0" | "no" => false,
                    _ => return Err(Error::Config(format!("reduced_mixed: '{value}'"))),
                }
            }
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// `key = value` text that [`CaseConfig::apply_text`] reads back unchanged.
    pub fn to_text(&self) -> String {
        let join = |v: &[usize]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        };
        let form = match self.formulations.as_slice() {
            [f] => formulation_name(*f).to_string(),
            _ => "both".to_string(),
        };
        let mut s = String::new();
        let mut kv = |k: &str, v: String| s.push_str(&format!("{k} = {v}\n"));
        kv("case", self.case.name().into());
        kv("formulation", form);
        kv("elements", join(&self.elements));
        kv("degrees", join(&self.degrees));
        kv("alpha", format!("{:?}", self.alpha));
        kv("deform", format!("{:?}", self.deform));
        kv("shale_k", format!("{:?}", self.shale_k));
        kv("k_par", format!("{:?}", self.k_par));
        kv("k_perp", format!("{:?}", self.k_perp));
        kv("r_in", format!("{:?}", self.r_in));
        kv("r_out", format!("{:?}", self.r_out));
        kv(
            "layout",
            self.layout
                .as_ref()
                .map_or("builtin".into(), |p| p.display().to_string()),
        );
        kv("out", self.out.display().to_string());
        kv("quad_extra", self.quad_extra.to_string());
        kv("workers", self.workers.to_string());
        kv("reduced_mixed", self.reduced_mixed.to_string());
        s
    }
}

/// Default inner and outer streak radii about [`STREAK_CENTER`].
pub const STREAK_R_IN: f64 = 1.1;
pub const STREAK_R_OUT: f64 = 1.2;

/// `sin(πx) sin(πy)`.
pub fn manufactured_p(x: f64, y: f64) -> f64 {
    (PI * x).sin() * (PI * y).sin()
}

/// `K ∇p` for the manufactured tensor, unscaled numerator and `s = x²+y²+α`.
fn manufactured_parts(x: f64, y: f64, alpha: f64) -> ([f64; 2], [f64; 2], f64, [f64; 3]) {
    let e = crate::assembly::MANUFACTURED_EPS;
    let (sx, cx) = (PI * x).sin_cos();
    let (sy, cy) = (PI * y).sin_cos();
    let px = PI * cx * sy;
    let py = PI * sx * cy;
    let a11 = e * x * x + y * y + alpha;
    let a12 = (e - 1.0) * x * y;
    let a22 = x * x + e * y * y + alpha;
    let s = x * x + y * y + alpha;
    ([px, py], [a11 * px + a12 * py, a12 * px + a22 * py], s, [a11, a12, a22])
}

/// Exact flux `u = -K ∇p`.
pub fn manufactured_u(x: f64, y: f64, alpha: f64) -> [f64; 2] {
    let (_, q, s, _) = manufactured_parts(x, y, alpha);
    [-q[0] / s, -q[1] / s]
}

/// `f = -∇·(K ∇p)`.
pub fn manufactured_f(x: f64, y: f64, alpha: f64) -> f64 {
    let e = crate::assembly::MANUFACTURED_EPS;
    let ([px, py], q, s, [a11, a12, a22]) = manufactured_parts(x, y, alpha);
    let p = manufactured_p(x, y);
    let pxx = -PI * PI * p;
    let pyy = pxx;
    let pxy = PI * PI * (PI * x).cos() * (PI * y).cos();
    let dq0 = 2.0 * e * x * px + a11 * pxx + (e - 1.0) * y * py + a12 * pxy;
    let dq1 = (e - 1.0) * x * px + a12 * pxy + 2.0 * e * y * py + a22 * pyy;
    let div = (dq0 + dq1) / s - (2.0 * x * q[0] + 2.0 * y * q[1]) / (s * s);
    -div
}

/// Parses a mask: header `<rows> <cols>`, then one line of `0`/`1` per row,
/// top row first. `#` lines are comments; whitespace inside rows is ignored.
pub fn parse_mask(text: &str) -> Result<Vec<Vec<bool>>> {
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    let header = lines
        .next()
        .ok_or_else(|| Error::LayoutMismatch("empty mask".into()))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::LayoutMismatch(format!("bad mask header '{header}'")))?;
    let [rows, cols] = dims[..] else {
        return Err(Error::LayoutMismatch(format!("bad mask header '{header}'")));
    };
    let mut mask = Vec::with_capacity(rows);
    for line in lines {
        let row: Vec<bool> = line
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(Error::LayoutMismatch(format!("bad mask character '{c}'"))),
            })
            .collect::<Result<_>>()?;
        if row.len() != cols {
            return Err(Error::LayoutMismatch(format!(
                "mask row {} has {} cells, expected {cols}",
                mask.len() + 1,
                row.len()
            )));
        }
        mask.push(row);
    }
    if mask.len() != rows {
        return Err(Error::LayoutMismatch(format!(
            "mask has {} rows, header says {rows}",
            mask.len()
        )));
    }
    Ok(mask)
}

pub fn shale_fraction(mask: &[Vec<bool>]) -> f64 {
    let total: usize = mask.iter().map(|r| r.len()).sum();
    let set: usize = mask.iter().flatten().filter(|&&b| b).count();
    set as f64 / total as f64
}

pub fn load_mask(cfg: &CaseConfig) -> Result<Vec<Vec<bool>>> {
    match &cfg.layout {
        Some(path) => parse_mask(&std::fs::read_to_string(path)?),
        None => parse_mask(APPROX_SHALE_MASK),
    }
}

/// One solved configuration with its report.
pub struct CaseRun {
    pub formulation: Formulation,
    pub report: ErrorReport,
    pub solution: SolutionFields,
}

fn finish(
    sol: SolutionFields,
    formulation: Formulation,
    k: usize,
    n: usize,
    start: Instant,
    regions: usize,
) -> Result<CaseRun> {
    let disc = sol.discretization()?.clone();
    let mut report = ErrorReport {
        elements: k,
        degree: n,
        unknowns: disc.dofmap.unknowns(),
        side_inflow: boundary_net_flux(&sol)?,
        balance: balance_defect(&sol)?,
        ..Default::default()
    };
    if formulation == Formulation::Mixed {
        report.divergence = Some(divergence_residual(&sol)?);
        for r in 0..regions {
            report.region_flux.push(region_fluxes(&sol, r)?);
        }
    }
    report.wall_time = start.elapsed();
    Ok(CaseRun {
        formulation,
        report,
        solution: sol,
    })
}

/// Manufactured problem with homogeneous potential data on the sine-deformed
/// unit square.
pub fn manufactured_problem(k: usize, n: usize, alpha: f64, c: f64) -> Result<Problem> {
    let mesh = Mesh::deformed(k, n, c)?;
    Ok(Problem::new(
        mesh,
        Permeability::Manufactured { alpha },
        move |x, y| manufactured_f(x, y, alpha),
        BoundaryConditions::dirichlet(|_, _| 0.0),
    ))
}

pub fn run_manufactured(cfg: &CaseConfig) -> Result<Vec<CaseRun>> {
    cfg.validate()?;
    let opts = cfg.solver_options();
    let alpha = cfg.alpha;
    let mut out = Vec::new();
    for &formulation in &cfg.formulations {
        for &k in &cfg.elements {
            for &n in &cfg.degrees {
                let start = Instant::now();
                let problem = manufactured_problem(k, n, alpha, cfg.deform)?;
                let sol = run(&problem, formulation, &opts)?;
                let (ep, eu) = l2_errors(&sol, &manufactured_p, &|x, y| manufactured_u(x, y, alpha))?;
                let mut r = finish(sol, formulation, k, n, start, 0)?;
                r.report.p_error = Some(ep);
                r.report.u_error = Some(eu);
                out.push(r);
            }
        }
    }
    Ok(out)
}

/// Unit square with `K = shale_k · I` in masked cells, identity elsewhere;
/// `p = 1` left, `p = 0` right, closed top and bottom.
pub fn sandshale_problem(mask: &[Vec<bool>], n: usize, shale_k: f64) -> Result<Problem> {
    let mesh = Mesh::from_mask(mask, n)?;
    Ok(Problem::new(
        mesh,
        Permeability::RegionScalar(vec![1.0, shale_k]),
        |_, _| 0.0,
        BoundaryConditions::left_to_right(),
    ))
}

pub fn run_sandshale(cfg: &CaseConfig, mask: &[Vec<bool>]) -> Result<Vec<CaseRun>> {
    cfg.validate()?;
    let rows = mask.len();
    let cols = mask.first().map_or(0, |r| r.len());
    if cfg.elements.iter().any(|&k| k != rows || k != cols) {
        return Err(Error::LayoutMismatch(format!(
            "mask is {rows}x{cols} but the element sweep is {:?}",
            cfg.elements
        )));
    }
    let opts = cfg.solver_options();
    let mut out = Vec::new();
    for &formulation in &cfg.formulations {
        for &n in &cfg.degrees {
            let start = Instant::now();
            let problem = sandshale_problem(mask, n, cfg.shale_k)?;
            let sol = run(&problem, formulation, &opts)?;
            out.push(finish(sol, formulation, rows, n, start, 0)?);
        }
    }
    Ok(out)
}

/// Three-region streak problem, `f = 0`, same boundary data as sand-shale.
pub fn streak_problem(k: usize, n: usize, cfg: &CaseConfig) -> Result<Problem> {
    let mesh = Mesh::streak(k, n, cfg.r_in, cfg.r_out)?;
    Ok(Problem::new(
        mesh,
        Permeability::Streak {
            k_par: cfg.k_par,
            k_perp: cfg.k_perp,
            center: STREAK_CENTER,
            band: 1,
        },
        |_, _| 0.0,
        BoundaryConditions::left_to_right(),
    ))
}

pub fn run_streak(cfg: &CaseConfig) -> Result<Vec<CaseRun>> {
    cfg.validate()?;
    let opts = cfg.solver_options();
    let mut out = Vec::new();
    for &formulation in &cfg.formulations {
        for &k in &cfg.elements {
            for &n in &cfg.degrees {
                let start = Instant::now();
                let problem = streak_problem(k, n, cfg)?;
                let sol = run(&problem, formulation, &opts)?;
                out.push(finish(sol, formulation, k, n, start, 3)?);
            }
        }
    }
    Ok(out)
}
