use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use msem::cases::{
    load_mask, run_manufactured, run_sandshale, run_streak, shale_fraction, CaseConfig, CaseKind,
    CaseRun,
};
use msem::output::{emit_outputs, pivot_table};
use msem::Error;

/// Mimetic spectral element solver for 2D anisotropic Darcy flow.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Manufactured sin(πx)sin(πy) solution on a sine-deformed mesh.
    Manufactured(RunArgs),
    /// Sand-shale block layout, p = 1 left, p = 0 right.
    Sandshale(RunArgs),
    /// Curved anisotropic streak split into three regions.
    Streak(RunArgs),
    /// Print N x K tables from a stored results.csv.
    Tables {
        /// Directory holding results.csv.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Column to tabulate.
        #[arg(long, default_value = "flux_left")]
        column: String,
        #[arg(long, default_value = "mixed")]
        formulation: String,
    },
}

#[derive(Args)]
struct RunArgs {
    /// `key = value` config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Elements per side (per region for the streak), comma separated.
    #[arg(long)]
    elements: Option<String>,
    /// Polynomial degrees, comma separated.
    #[arg(long)]
    degree: Option<String>,
    /// Sweep degrees 1..=MAX.
    #[arg(long)]
    degree_max: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    deform: Option<f64>,
    /// direct, mixed or both.
    #[arg(long)]
    formulation: Option<String>,
    /// Shale mask file (default: the shipped approximate layout).
    #[arg(long)]
    layout: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    quad_extra: Option<usize>,
    /// Threads for assembly and factorization; 1 is bit-deterministic, 0 uses all cores.
    #[arg(long)]
    workers: Option<usize>,
    /// Solve the mixed system with the volume mass divided out.
    #[arg(long)]
    reduced: bool,
    /// Exit with status 4 unless every run conserves mass to 1e-12.
    #[arg(long)]
    check: bool,
}

impl RunArgs {
    fn config(&self, case: CaseKind) -> msem::Result<CaseConfig> {
        let mut cfg = CaseConfig::defaults(case);
        if let Some(path) = &self.config {
            cfg.apply_text(&fs::read_to_string(path)?)?;
            cfg.case = case;
        }
        let mut set = |k: &str, v: Option<String>| v.map_or(Ok(()), |v| cfg.set(k, &v));
        set("elements", self.elements.clone())?;
        set("degrees", self.degree.clone())?;
        set("degree_max", self.degree_max.map(|v| v.to_string()))?;
        set("alpha", self.alpha.map(|v| v.to_string()))?;
        set("deform", self.deform.map(|v| v.to_string()))?;
        set("formulation", self.formulation.clone())?;
        set("layout", self.layout.as_ref().map(|p| p.display().to_string()))?;
        set("out", self.out.as_ref().map(|p| p.display().to_string()))?;
        set("quad_extra", self.quad_extra.map(|v| v.to_string()))?;
        set("workers", self.workers.map(|v| v.to_string()))?;
        if self.reduced {
            cfg.reduced_mixed = true;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::LayoutMismatch(_) | Error::Geometry(_) | Error::Io(_) => 2,
        _ => 3,
    }
}

fn conserves(run: &CaseRun) -> bool {
    let div_ok = run.report.divergence.is_none_or(|d| d.exactness <= 1e-12);
    div_ok && run.report.balance.abs() <= 1e-10
}

fn execute(case: CaseKind, args: &RunArgs) -> msem::Result<bool> {
    let cfg = args.config(case)?;
    faer::set_global_parallelism(match cfg.workers {
        1 => faer::Par::Seq,
        w => faer::Par::rayon(w),
    });
    let runs = match case {
        CaseKind::Manufactured => run_manufactured(&cfg)?,
        CaseKind::SandShale => {
            let mask = load_mask(&cfg)?;
            if cfg.layout.is_none() {
                eprintln!(
                    "note: using the shipped approximate layout (shale fraction {:.2})",
                    shale_fraction(&mask)
                );
            }
            run_sandshale(&cfg, &mask)?
        }
        CaseKind::Streak => run_streak(&cfg)?,
    };
    emit_outputs(&cfg, &runs, &cfg.out)?;
    for r in &runs {
        let rep = &r.report;
        print!(
            "{} K={} N={} unknowns={} inflow_left={:.5e}",
            msem::cases::formulation_name(r.formulation),
            rep.elements,
            rep.degree,
            rep.unknowns,
            rep.side_inflow[0]
        );
        if let (Some(ep), Some(eu)) = (rep.p_error, rep.u_error) {
            print!(" p_err={ep:.4e} u_err={eu:.4e}");
        }
        if let Some(d) = rep.divergence {
            print!(" div={:.2e}", d.exactness);
        }
        println!(" ({:.2?})", rep.wall_time);
    }
    println!("wrote {}", cfg.out.display());
    Ok(!args.check || runs.iter().all(conserves))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Manufactured(a) => execute(CaseKind::Manufactured, a),
        Command::Sandshale(a) => execute(CaseKind::SandShale, a),
        Command::Streak(a) => execute(CaseKind::Streak, a),
        Command::Tables {
            out,
            column,
            formulation,
        } => fs::read_to_string(out.join("results.csv"))
            .map_err(Error::from)
            .and_then(|csv| pivot_table(&csv, column, formulation))
            .map(|t| {
                print!("{t}");
                true
            }),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("check failed: a run violated discrete conservation");
            ExitCode::from(4)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
