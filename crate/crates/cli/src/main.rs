use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde_json::json;

use graphlim::decorated::{hom_density, overlay, DecoratedGraph, OverlayStrategy};
use graphlim::experiment::{run_experiment, ExperimentSpec};
use graphlim::generators::Generator;
use graphlim::graphon::{cut_semidistance, unlabeled_cut_distance};
use graphlim::io;
use graphlim::measures::{hausdorff_distance, lp_distance, lp_distance_oracle};
use graphlim::profiles::{dm_estimate, DEFAULT_K_MAX};
use graphlim::pvariable::StepPVariable;
use graphlim::quotient::quotient_set_distance;
use graphlim::realgraphon::{avq_set_distance, cut_norm, cut_norm_upper, lp_norm, CutNormMode};
use graphlim::strategy::{CutMode, Strategy};

/// Distances and convergence experiments for P-variables and probability graphons.
#[derive(Parser, Debug)]
#[command(name = "graphlim", version)]
struct Cli {
    /// Root seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Wrap scalar results in JSON objects.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Lévy-Prokhorov distance between two probability measures.
    Lp {
        a: PathBuf,
        b: PathBuf,
        /// Use the subset-enumeration oracle.
        #[arg(long)]
        oracle: bool,
    },
    /// Hausdorff distance between two sets of measures.
    Hausdorff { a: PathBuf, b: PathBuf },
    /// Truncated P-variables metric.
    Dm {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = DEFAULT_K_MAX)]
        k_max: usize,
        /// exhaustive, random[:M] or local[:M]
        #[arg(long, default_value = "exhaustive")]
        strategy: Strategy,
    },
    /// Cut semidistance, or the unlabeled cut distance with --unlabeled.
    Cutdist {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        unlabeled: bool,
        /// exhaustive or heuristic[:R]
        #[arg(long, default_value = "exhaustive")]
        mode: CutMode,
    },
    /// Cut norm of a real matrix.
    Cutnorm {
        a: PathBuf,
        /// rows, brute or upper
        #[arg(long, default_value = "rows")]
        mode: String,
    },
    /// Homomorphism density of a decorated graph.
    Homdensity { graph: PathBuf, w: PathBuf },
    /// Overlay functional of a decorated graph with vertex weights.
    Overlay {
        graph: PathBuf,
        w: PathBuf,
        /// exhaustive or local[:M]
        #[arg(long, default_value = "exhaustive")]
        strategy: Strategy,
    },
    /// Hausdorff distance between quotient sets.
    Quotients {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value = "exhaustive")]
        strategy: Strategy,
    },
    /// Hausdorff distance between averaged-quotient sets.
    Avq {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value = "exhaustive")]
        strategy: Strategy,
    },
    /// L^p norm of a P-variable (`inf` allowed).
    Lpnorm {
        w: PathBuf,
        #[arg(long)]
        p: f64,
    },
    /// Samples a matrix from a P-variable, as CSV.
    Sample {
        w: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        symmetrize: bool,
    },
    /// Runs a named generator: matrices as CSV, limits as kernel JSON.
    Generate {
        /// e.g. er(0.5), onoff(0.5), colored(0.5,0.5), pm_one(0.3), gauss_probit,
        /// indicator(0.5), pm_limit(0.3), colored_limit(…), probit_limit(16), constant(0.5)
        name: Generator,
        #[arg(long, default_value_t = 1)]
        n: usize,
    },
    /// Runs a convergence experiment and writes its CSV report.
    Experiment {
        spec: PathBuf,
        /// Write the report here instead of stdout.
        #[arg(long, short)]
        output: Option<PathBuf>,
        /// Record wall time per row.
        #[arg(long)]
        timing: bool,
    },
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn pvar(path: &Path) -> Result<StepPVariable> {
    io::read_pvariable(path).with_context(|| format!("loading {}", path.display()))
}

fn print_json(v: &impl serde::Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn scalar(cli: &Cli, name: &str, v: f64) -> Result<()> {
    if cli.json {
        print_json(&json!({ name: v }))
    } else {
        println!("{v}");
        Ok(())
    }
}

fn run(cli: &Cli) -> Result<ExitCode> {
    let seed = cli.seed;
    match &cli.command {
        Command::Lp { a, b, oracle } => {
            let (mu, nu) = (io::read_measure(a)?, io::read_measure(b)?);
            let d = if *oracle {
                lp_distance_oracle(&mu, &nu)?
            } else {
                lp_distance(&mu, &nu)?
            };
            scalar(cli, "lp", d)?;
        }
        Command::Hausdorff { a, b } => {
            let d = hausdorff_distance(&io::read_measure_set(a)?, &io::read_measure_set(b)?)?;
            scalar(cli, "hausdorff", d)?;
        }
        Command::Dm { a, b, k_max, strategy } => {
            let d = dm_estimate(&pvar(a)?, &pvar(b)?, *k_max, &strategy.with_seed(seed))?;
            print_json(&d)?;
        }
        Command::Cutdist { a, b, unlabeled, mode } => {
            let (u, w) = (pvar(a)?, pvar(b)?);
            let mode = mode.with_seed(seed);
            let d = if *unlabeled {
                unlabeled_cut_distance(&u, &w, &mode)?
            } else {
                cut_semidistance(&u, &w, &mode)?
            };
            print_json(&d)?;
        }
        Command::Cutnorm { a, mode } => {
            let k = io::read_kernel(a)?;
            let v = match mode.as_str() {
                "rows" => cut_norm(&k, CutNormMode::ExhaustiveRows)?,
                "brute" => cut_norm(&k, CutNormMode::Bruteforce)?,
                "upper" => cut_norm_upper(&k),
                other => bail!("unknown cut norm mode {other:?}; expected rows, brute or upper"),
            };
            scalar(cli, "cut_norm", v)?;
        }
        Command::Homdensity { graph, w } => {
            let g = DecoratedGraph::from_json(&read(graph)?)?;
            scalar(cli, "hom_density", hom_density(&g, &pvar(w)?)?)?;
        }
        Command::Overlay { graph, w, strategy } => {
            let g = DecoratedGraph::from_json(&read(graph)?)?;
            let strategy = match strategy.with_seed(seed) {
                Strategy::Exhaustive => OverlayStrategy::Exhaustive,
                Strategy::Local { restarts, seed } => OverlayStrategy::Local { restarts, seed },
                Strategy::Random { .. } => bail!("overlay supports exhaustive or local strategies"),
            };
            print_json(&overlay(&pvar(w)?, &g, &strategy)?)?;
        }
        Command::Quotients { a, b, k, strategy } => {
            print_json(&quotient_set_distance(
                &pvar(a)?,
                &pvar(b)?,
                *k,
                &strategy.with_seed(seed),
            )?)?;
        }
        Command::Avq { a, b, k, strategy } => {
            print_json(&avq_set_distance(&pvar(a)?, &pvar(b)?, *k, &strategy.with_seed(seed))?)?;
        }
        Command::Lpnorm { w, p } => {
            scalar(cli, "lp_norm", lp_norm(&pvar(w)?, *p)?)?;
        }
        Command::Sample { w, n, symmetrize } => {
            let m = pvar(w)?.sample_matrix(*n, seed, *symmetrize)?;
            print!("{}", io::matrix_to_csv(&m)?);
        }
        Command::Generate { name, n } => {
            if name.is_limit() {
                print_json(&name.generate(*n, seed)?)?;
            } else {
                print!("{}", io::matrix_to_csv(&name.sample(*n, seed)?)?);
            }
        }
        Command::Experiment { spec, output, timing } => {
            let mut spec = ExperimentSpec::from_json(&read(spec)?)?;
            spec.timing |= *timing;
            let report = run_experiment(&spec)?;
            let csv = report.to_csv()?;
            match output {
                Some(path) => fs::write(path, csv).with_context(|| format!("writing {}", path.display()))?,
                None => print!("{csv}"),
            }
            if !report.all_trends_hold() {
                eprintln!("trend check failed");
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
