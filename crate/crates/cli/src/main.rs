//! Command-line front end: graph family generation, weak regularisation of
//! kernels, regularity sweeps with accumulation clustering, and expander
//! statistics. All outputs are machine readable (JSON or CSV with a fixed,
//! versioned column order) and identical invocations produce byte-identical
//! files.
//!
//! Exit codes: 0 success, 1 violated internal bound, 2 usage/validation
//! error, 3 budget error.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use graphon_core::algreg::{sweep_family, SweepOutcome, MAX_PROFILE_PRODUCT};
use graphon_core::defgraphs::{
    FamilyId, MAX_FAMILY_FIELD_ORDER, MAX_FAMILY_GROUP_ORDER,
};
use graphon_core::expander::{expansion_probe, ExpanderReport, MorphismSpec};
use graphon_core::finfield::prime_power_decompose;
use graphon_core::kernel::Side;
use graphon_core::spectral::weak_regularize_on;
use graphon_core::{Error, StepKernel};

const CSV_HEADER: &str = "# graphon-reg v1";

#[derive(Parser)]
#[command(name = "graphon-reg", version, about = "Stepfunction kernel calculus toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum SideArg {
    Column,
    Row,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a catalog graph family instance and write it as JSON.
    Gen {
        /// Family tag (e.g. paley_sum_squares, prod_cubes, frob_cubes).
        #[arg(long)]
        family: String,
        /// Prime power parameter, as a plain number or "p^k" (e.g. "2^4").
        #[arg(long)]
        q: String,
        /// Output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Weak regularisation of a kernel read from JSON.
    Weakreg {
        /// Path to a kernel JSON file ({"row_measures", "col_measures", "values"}).
        #[arg(long)]
        input: PathBuf,
        /// Spectral cutoff in (0, 1].
        #[arg(long)]
        eps: f64,
        /// Which side of the operator to partition.
        #[arg(long, value_enum, default_value = "column")]
        side: SideArg,
        /// Optional path for the full result JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Regularise a family over a parameter grid and merge the limits.
    Sweep {
        #[arg(long)]
        family: String,
        /// Grid: comma list "5,7,11", "primes:a..b" or "primepowers:a..b".
        #[arg(long)]
        grid: String,
        /// Cut-distance threshold for merging limit stepfunctions.
        #[arg(long, default_value_t = 0.1)]
        merge_tol: f64,
        #[arg(long, value_enum, default_value = "csv")]
        format: OutputFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Quadruple-map and image-growth statistics for a morphism.
    Expander {
        /// Morphism tag: add, mul, add_square_cube, mul_twist.
        #[arg(long)]
        morphism: String,
        #[arg(long)]
        grid: String,
        /// Exponent defect: probed sets have size at least C q^(1-c).
        #[arg(long, default_value_t = 0.5)]
        c: f64,
        /// Expansion constant C.
        #[arg(long = "C", default_value_t = 1.0)]
        big_c: f64,
        /// Number of random probe sets per q.
        #[arg(long, default_value_t = 8)]
        trials: u32,
        #[arg(long, default_value_t = 17)]
        seed: u64,
        #[arg(long, value_enum, default_value = "csv")]
        format: OutputFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Budget(_) => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn configure_threads() {
    if let Ok(value) = std::env::var("GRAPHONREG_THREADS") {
        if let Ok(threads) = value.parse::<usize>() {
            if threads >= 1 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build_global();
            }
        }
    }
}

fn run(command: Command) -> Result<ExitCode, Error> {
    match command {
        Command::Gen { family, q, out } => {
            let fam: FamilyId = family.parse()?;
            let q = parse_q(&q)?;
            let graph = graphon_core::defgraphs::generate(fam, q)?;
            let summary = format!(
                "family {} q {} vertices {}+{} edges {}",
                fam,
                q,
                graph.left_count(),
                graph.right_count(),
                graph.edge_count()
            );
            emit(out.as_deref(), &graph.to_json(), &summary)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Weakreg {
            input,
            eps,
            side,
            out,
        } => {
            let text = fs::read_to_string(&input)
                .map_err(|e| Error::invalid(format!("cannot read {}: {e}", input.display())))?;
            let kernel = StepKernel::from_json(&text)?;
            let side = match side {
                SideArg::Column => Side::Column,
                SideArg::Row => Side::Row,
            };
            let result = weak_regularize_on(&kernel, eps, side)?;
            let bound = 2.0 * eps * eps;
            println!(
                "cells {}\nachieved_inf_error {}\nbound {}",
                result.cell_count, result.achieved_inf_error, bound
            );
            if let Some(path) = out {
                write_atomic(&path, result.to_json().as_bytes())?;
                eprintln!("wrote {}", path.display());
            }
            if result.achieved_inf_error > bound {
                eprintln!("error bound violated; this indicates an internal defect");
                return Ok(ExitCode::from(1));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep {
            family,
            grid,
            merge_tol,
            format,
            out,
        } => {
            let fam: FamilyId = family.parse()?;
            let grid = parse_grid(&grid)?;
            for &q in &grid {
                validate_sweep_q(fam, q)?;
            }
            let outcome = sweep_family(fam, &grid, merge_tol)?;
            let text = match format {
                OutputFormat::Csv => sweep_csv(&outcome),
                OutputFormat::Json => {
                    let mut s = serde_json::to_string_pretty(&outcome)
                        .expect("sweep serialization cannot fail");
                    s.push('\n');
                    s
                }
            };
            let summary = format!("{} rows, {} clusters", outcome.rows.len(), outcome.clusters.len());
            emit(out.as_deref(), &text, &summary)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Expander {
            morphism,
            grid,
            c,
            big_c,
            trials,
            seed,
            format,
            out,
        } => {
            let spec: MorphismSpec = morphism.parse()?;
            let grid = parse_grid(&grid)?;
            if grid.is_empty() {
                return Err(Error::invalid("empty parameter grid"));
            }
            let reports = grid
                .iter()
                .map(|&q| expansion_probe(spec, q, c, big_c, trials, seed))
                .collect::<Result<Vec<_>, _>>()?;
            let text = match format {
                OutputFormat::Csv => expander_csv(spec, &reports),
                OutputFormat::Json => {
                    let mut s = serde_json::to_string_pretty(&reports)
                        .expect("report serialization cannot fail");
                    s.push('\n');
                    s
                }
            };
            let summary = format!("{} reports", reports.len());
            emit(out.as_deref(), &text, &summary)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

/// Early per-q validation so budget breaches name the offending q.
fn validate_sweep_q(fam: FamilyId, q: u64) -> Result<(), Error> {
    if prime_power_decompose(q).is_none() {
        return Err(Error::invalid(format!("q = {q} is not a prime power")));
    }
    let vertices = if fam.is_frobenius() { 2 * q + 1 } else { q };
    let field_ok = if fam.is_frobenius() {
        2 * q + 1 <= MAX_FAMILY_GROUP_ORDER
    } else {
        q <= MAX_FAMILY_FIELD_ORDER
    };
    if !field_ok || (vertices * vertices) as usize > MAX_PROFILE_PRODUCT {
        return Err(Error::budget(format!(
            "q = {q} exceeds the sweep budget for family {fam}"
        )));
    }
    Ok(())
}

/// A parameter given as a plain number or in "p^k" field notation.
fn parse_q(s: &str) -> Result<u64, Error> {
    if let Some((p, k)) = s.split_once('^') {
        let p: u64 = p
            .trim()
            .parse()
            .map_err(|_| Error::invalid(format!("bad parameter {s:?}")))?;
        let k: u32 = k
            .trim()
            .parse()
            .map_err(|_| Error::invalid(format!("bad parameter {s:?}")))?;
        p.checked_pow(k)
            .ok_or_else(|| Error::invalid(format!("parameter {s:?} overflows")))
    } else {
        s.trim()
            .parse()
            .map_err(|_| Error::invalid(format!("bad parameter {s:?}")))
    }
}

/// Grid forms: explicit comma list, "primes:a..b", "primepowers:a..b".
fn parse_grid(spec: &str) -> Result<Vec<u64>, Error> {
    let parse_range = |body: &str| -> Result<(u64, u64), Error> {
        let (lo, hi) = body
            .split_once("..")
            .ok_or_else(|| Error::invalid(format!("bad grid range {body:?}; expected a..b")))?;
        let lo: u64 = lo
            .parse()
            .map_err(|_| Error::invalid(format!("bad grid bound {lo:?}")))?;
        let hi: u64 = hi
            .parse()
            .map_err(|_| Error::invalid(format!("bad grid bound {hi:?}")))?;
        if lo > hi {
            return Err(Error::invalid(format!("empty grid range {lo}..{hi}")));
        }
        Ok((lo, hi))
    };
    let grid: Vec<u64> = if let Some(body) = spec.strip_prefix("primes:") {
        let (lo, hi) = parse_range(body)?;
        (lo..=hi)
            .filter(|&n| matches!(prime_power_decompose(n), Some((_, 1))))
            .collect()
    } else if let Some(body) = spec.strip_prefix("primepowers:") {
        let (lo, hi) = parse_range(body)?;
        (lo..=hi)
            .filter(|&n| prime_power_decompose(n).is_some())
            .collect()
    } else {
        spec.split(',').map(parse_q).collect::<Result<_, _>>()?
    };
    if grid.is_empty() {
        return Err(Error::invalid(format!("grid {spec:?} is empty")));
    }
    Ok(grid)
}

fn sweep_csv(outcome: &SweepOutcome) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{CSV_HEADER}");
    let _ = writeln!(
        s,
        "family,q,case_label,n_row_cells,n_col_cells,residual_cut_norm,d_cut_to_prediction"
    );
    for row in &outcome.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            row.family,
            row.q,
            row.case_label,
            row.n_row_cells,
            row.n_col_cells,
            row.residual_cut_norm,
            row.d_cut_to_prediction
        );
    }
    let _ = writeln!(s, "# clusters: {}", outcome.clusters.len());
    let _ = writeln!(s, "cluster,members,rep_row_steps,rep_col_steps");
    for (i, cluster) in outcome.clusters.iter().enumerate() {
        let members: Vec<String> = cluster.members.iter().map(|q| q.to_string()).collect();
        let _ = writeln!(
            s,
            "{},{},{},{}",
            i,
            members.join(";"),
            cluster.representative.row_steps(),
            cluster.representative.col_steps()
        );
    }
    s
}

fn expander_csv(spec: MorphismSpec, reports: &[ExpanderReport]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{CSV_HEADER}");
    let _ = writeln!(s, "morphism,q,quadruple_ratio,min_image_fraction,verdict");
    for r in reports {
        let ratio = r
            .quadruple_ratio
            .map(|x| x.to_string())
            .unwrap_or_default();
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            spec, r.q, ratio, r.min_image_fraction, r.verdict
        );
    }
    s
}

/// Writes to the path via a temporary file and atomic rename, or to stdout
/// when no path is given; the one-line summary goes to the other stream.
fn emit(path: Option<&Path>, payload: &str, summary: &str) -> Result<(), Error> {
    match path {
        Some(path) => {
            let mut bytes = payload.as_bytes().to_vec();
            if !payload.ends_with('\n') {
                bytes.push(b'\n');
            }
            write_atomic(path, &bytes)?;
            println!("{summary}");
            println!("wrote {}", path.display());
        }
        None => {
            print!("{payload}");
            if !payload.ends_with('\n') {
                println!();
            }
            eprintln!("{summary}");
        }
    }
    Ok(())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), Error> {
    let tmp = path.with_extension(match path.extension() {
        Some(ext) => format!("{}.tmp", ext.to_string_lossy()),
        None => "tmp".to_string(),
    });
    fs::write(&tmp, bytes)
        .map_err(|e| Error::invalid(format!("cannot write {}: {e}", tmp.display())))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::invalid(format!("cannot move output into place: {e}"))
    })?;
    Ok(())
}
