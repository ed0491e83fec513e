//! CSV tables, legacy-VTK field dumps and run manifests.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::cases::{formulation_name, CaseConfig, CaseRun};
use crate::error::{Error, Result};
use crate::postproc::{stream_function, Reconstruction};
use crate::topology::Formulation;

/// Formats `v` with 5 significant digits; fixed notation in `[1e-4, 1e5)`.
pub fn sig5(v: f64) -> String {
    if v == 0.0 {
        return "0.0000".into();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let mag = v.abs().log10().floor() as i32;
    if (-4..5).contains(&mag) {
        let decimals = (4 - mag).max(0) as usize;
        let s = format!("{v:.decimals$}");
        // rounding may carry into a new digit (9.99995 -> 10.0000)
        let digits = s.chars().filter(|c| c.is_ascii_digit()).skip_while(|&c| c == '0').count();
        if digits > 5 && decimals > 0 {
            let decimals = decimals - 1;
            return format!("{v:.decimals$}");
        }
        s
    } else {
        format!("{v:.4e}")
    }
}

pub const CSV_HEADER: &str = "case,formulation,K,N,unknowns,p_error,u_error,div_exactness,div_l2,\
flux_left,flux_right,flux_bottom,flux_top,balance,\
region1_in,region1_out,region2_in,region2_out,region3_in,region3_out";

fn opt(v: Option<f64>) -> String {
    v.map(sig5).unwrap_or_default()
}

/// One CSV row per run; no timing columns, so output is reproducible.
pub fn csv_table(cfg: &CaseConfig, runs: &[CaseRun]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in runs {
        let rep = &r.report;
        let mut row = vec![
            cfg.case.name().to_string(),
            formulation_name(r.formulation).to_string(),
            rep.elements.to_string(),
            rep.degree.to_string(),
            rep.unknowns.to_string(),
            opt(rep.p_error),
            opt(rep.u_error),
            opt(rep.divergence.map(|d| d.exactness)),
            opt(rep.divergence.map(|d| d.l2)),
        ];
        // outflow on right and top reads more naturally; keep inflow for all sides
        row.extend(rep.side_inflow.iter().map(|&v| sig5(v)));
        row.push(sig5(rep.balance));
        for k in 0..3 {
            match rep.region_flux.get(k) {
                Some(&(i, o)) => {
                    row.push(sig5(i));
                    row.push(sig5(o));
                }
                None => {
                    row.push(String::new());
                    row.push(String::new());
                }
            }
        }
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

/// Legacy-VTK structured grid on the global GLL lattice with potential,
/// flux vectors, region tags and (mixed, source-free) the stream function.
pub fn vtk_field(run: &CaseRun) -> Result<String> {
    let sol = &run.solution;
    let disc = sol.discretization()?;
    let rec = Reconstruction::new(sol)?;
    let dm = &disc.dofmap;
    let g = dm.global;
    let n = dm.degree;
    let nodes = crate::basis1d::NodalBasis::new(n)?.nodes().to_vec();
    let count = g.node_count();
    let mut pts = vec![[0.0; 2]; count];
    let mut p = vec![0.0; count];
    let mut u = vec![[0.0; 2]; count];
    for (el, map) in disc.mesh.maps.iter().enumerate() {
        let (a, b) = dm.element_coords(el);
        for j in 0..=n {
            for i in 0..=n {
                let k = g.node(a * n + i, b * n + j);
                pts[k] = map.map_eval(nodes[i], nodes[j]);
                p[k] = rec.p(el, nodes[i], nodes[j]);
                u[k] = rec.u(el, nodes[i], nodes[j]);
            }
        }
    }
    let psi = if run.formulation == Formulation::Mixed {
        stream_function(sol).ok()
    } else {
        None
    };
    let mut s = String::new();
    let w = |s: &mut String, t: String| s.push_str(&t);
    w(&mut s, "# vtk DataFile Version 3.0\nmsem field\nASCII\nDATASET STRUCTURED_GRID\n".into());
    w(&mut s, format!("DIMENSIONS {} {} 1\nPOINTS {count} double\n", g.cx + 1, g.cy + 1));
    for q in &pts {
        let _ = writeln!(s, "{:e} {:e} 0", q[0], q[1]);
    }
    w(&mut s, format!("CELL_DATA {}\nSCALARS region int 1\nLOOKUP_TABLE default\n", g.face_count()));
    for j in 0..g.cy {
        for i in 0..g.cx {
            let el = (j / n) * dm.ex + i / n;
            let _ = writeln!(s, "{}", disc.mesh.regions[el]);
        }
    }
    w(&mut s, format!("POINT_DATA {count}\nSCALARS p double 1\nLOOKUP_TABLE default\n"));
    for v in &p {
        let _ = writeln!(s, "{v:e}");
    }
    w(&mut s, "VECTORS u double\n".into());
    for v in &u {
        let _ = writeln!(s, "{:e} {:e} 0", v[0], v[1]);
    }
    if let Some(psi) = psi {
        // anchor: lower-left node, psi = 0
        w(&mut s, "SCALARS psi double 1\nLOOKUP_TABLE default\n".into());
        for v in &psi.values {
            let _ = writeln!(s, "{v:e}");
        }
    }
    Ok(s)
}

/// Config echo plus versions; the config lines parse back with
/// [`CaseConfig::apply_text`].
pub fn manifest(cfg: &CaseConfig) -> String {
    format!(
        "# msem {} run manifest\n# stream function anchor: lower-left node, psi = 0\n{}",
        env!("CARGO_PKG_VERSION"),
        cfg.to_text()
    )
}

/// Writes `results.csv`, `manifest.txt` and one VTK file per run.
pub fn emit_outputs(cfg: &CaseConfig, runs: &[CaseRun], dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("results.csv"), csv_table(cfg, runs))?;
    fs::write(dir.join("manifest.txt"), manifest(cfg))?;
    for r in runs {
        let name = format!(
            "{}_{}_K{}_N{}.vtk",
            cfg.case.name(),
            formulation_name(r.formulation),
            r.report.elements,
            r.report.degree
        );
        fs::write(dir.join(name), vtk_field(r)?)?;
    }
    Ok(())
}

/// Pivots a results CSV into an `N x K` table of one column.
pub fn pivot_table(csv: &str, column: &str, formulation: &str) -> Result<String> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| Error::Config("empty results file".into()))?
        .split(',')
        .collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| *h == name)
            .ok_or_else(|| Error::Config(format!("no column '{name}'")))
    };
    let (ci, kf, kk, kn) = (col(column)?, col("formulation")?, col("K")?, col("N")?);
    let mut ks: Vec<usize> = Vec::new();
    let mut ns: Vec<usize> = Vec::new();
    let mut cells = std::collections::BTreeMap::new();
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != header.len() || f[kf] != formulation {
            continue;
        }
        let parse = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::Config(format!("bad count '{s}'")))
        };
        let (k, n) = (parse(f[kk])?, parse(f[kn])?);
        if !ks.contains(&k) {
            ks.push(k);
        }
        if !ns.contains(&n) {
            ns.push(n);
        }
        cells.insert((n, k), f[ci].to_string());
    }
    ks.sort_unstable();
    ns.sort_unstable();
    let mut s = format!("{column} ({formulation})\n{:>4}", "N");
    for k in &ks {
        let _ = write!(s, " {:>12}", format!("{k}x{k}"));
    }
    s.push('\n');
    for n in &ns {
        let _ = write!(s, "{n:>4}");
        for k in &ks {
            let _ = write!(s, " {:>12}", cells.get(&(*n, *k)).map_or("", |v| v.as_str()));
        }
        s.push('\n');
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cases::CaseKind;

    #[test]
    fn five_significant_digits() {
        assert_eq!(sig5(0.519969), "0.51997");
        assert_eq!(sig5(0.0093412), "0.0093412");
        assert_eq!(sig5(1.0), "1.0000");
        assert_eq!(sig5(433960.0), "4.3396e5");
        assert_eq!(sig5(-2.5e-13), "-2.5000e-13");
        assert_eq!(sig5(9.99996), "10.000");
    }

    #[test]
    fn empty_sweep_is_header_only() {
        let cfg = CaseConfig::defaults(CaseKind::Streak);
        assert_eq!(csv_table(&cfg, &[]), format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn manifest_round_trip() {
        let mut cfg = CaseConfig::defaults(CaseKind::SandShale);
        cfg.degrees = vec![1, 5, 7];
        cfg.shale_k = 1e-3;
        let mut back = CaseConfig::defaults(CaseKind::Manufactured);
        back.apply_text(&manifest(&cfg)).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn pivot() {
        let csv = format!(
            "{CSV_HEADER}\nstreak,mixed,4,1,0,,,,,0.7,,,,,,,,,,\nstreak,mixed,6,1,0,,,,,0.8,,,,,,,,,,\n"
        );
        let t = pivot_table(&csv, "flux_left", "mixed").unwrap();
        assert!(t.contains("4x4") && t.contains("0.8"));
    }
}
