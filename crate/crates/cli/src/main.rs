//! `rte` command line: train experiments, compute grid references and
//! H-function tables, run half-space solves and stability sweeps, and
//! compare emitted fields.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure.

use clap::{Parser, Subcommand};
use rte_core::experiments::{
    emit_results, run_experiment, run_reference, run_stability_sweep, EmitFormats,
    ExperimentConfig, ExperimentId,
};
use rte_core::halfspace::{chandrasekhar_h_1d, chandrasekhar_h_2d};
use rte_core::metrics::relative_l2;
use rte_core::Error;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "rte", version, about = "Steady radiative transfer via physics-informed least squares")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train an experiment from a TOML config and emit its artifacts.
    Train {
        config: PathBuf,
        /// Output directory (overrides config and RTE_OUT_DIR).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Allow the long 2D boundary-layer experiments.
        #[arg(long)]
        long: bool,
    },
    /// Compute only the grid reference for an experiment id.
    Fdm {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate the Chandrasekhar H-function.
    Hfun {
        #[arg(long)]
        dim: u32,
        #[arg(long, default_value_t = 64)]
        n: usize,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a half-space profile (ids ex5.5 / ex5.7) and save the
    /// corrector checkpoint.
    Halfspace {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        long: bool,
    },
    /// Run the uniform-stability sweep and emit the ratio table.
    Stability {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Relative L2 mismatch between two emitted field CSVs.
    Compare {
        pred: PathBuf,
        reference: PathBuf,
        /// Report the square root of the ratio as well.
        #[arg(long)]
        sqrt: bool,
    },
}

#[derive(serde::Deserialize)]
struct StabilityConfig {
    #[serde(default = "default_seed")]
    seed: u64,
    #[serde(default = "default_eps_list")]
    epsilons: Vec<f64>,
    out_dir: Option<PathBuf>,
}

fn default_seed() -> u64 {
    7
}

fn default_eps_list() -> Vec<f64> {
    vec![1.0, 1e-1, 1e-2, 1e-3]
}

fn out_dir(flag: Option<PathBuf>, cfg_dir: Option<PathBuf>) -> PathBuf {
    flag.or(cfg_dir)
        .or_else(|| std::env::var_os("RTE_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn exit_code_for(err: &Error) -> ExitCode {
    match err {
        Error::InvalidArgument(_) | Error::Parse(_) => ExitCode::from(2),
        _ => ExitCode::from(3),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code_for(&err)
        }
    }
}

fn load_config(path: &Path) -> Result<ExperimentConfig, Error> {
    ExperimentConfig::from_toml_file(path)
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.cmd {
        Cmd::Train { config, out, long } => {
            let cfg = load_config(&config)?;
            let dir = out_dir(out, cfg.out_dir.clone());
            let record = run_experiment(&cfg, long)?;
            let written = emit_results(&record, &dir, EmitFormats::default())?;
            println!(
                "{}: final loss {:.6e} ({:.1} s)",
                cfg.id.label(),
                record.final_loss,
                record.wall_seconds
            );
            for (name, value) in &record.metrics {
                println!("  {name} = {value:.6e}");
            }
            for path in written {
                println!("  wrote {}", path.display());
            }
            Ok(())
        }
        Cmd::Fdm { config, out } => {
            let cfg = load_config(&config)?;
            let dir = out_dir(out, cfg.out_dir.clone());
            std::fs::create_dir_all(&dir)?;
            let field = run_reference(&cfg)?;
            let path = dir.join(format!("{}-reference.csv", cfg.id.label()));
            field.write_csv(&path)?;
            let bin = dir.join(format!("{}-reference.bin", cfg.id.label()));
            field.write_binary(&bin)?;
            println!("wrote {}", path.display());
            println!("wrote {}", bin.display());
            Ok(())
        }
        Cmd::Hfun { dim, n, tol, out } => {
            let table = match dim {
                1 => chandrasekhar_h_1d::<f64>(n, tol, 1_000_000)?,
                2 => chandrasekhar_h_2d::<f64>(n, tol, 1_000_000)?,
                _ => {
                    return Err(Error::InvalidArgument(
                        "--dim must be 1 or 2".into(),
                    ))
                }
            };
            let path = out.unwrap_or_else(|| PathBuf::from(format!("hfun-{dim}d.csv")));
            if let Some(parent) = path.parent() {
                if !parent.as_os_str().is_empty() {
                    std::fs::create_dir_all(parent)?;
                }
            }
            table.write_csv(&path)?;
            println!(
                "wrote {} ({} nodes, identity residual {:.3e})",
                path.display(),
                table.nodes.len(),
                table.residual
            );
            Ok(())
        }
        Cmd::Halfspace { config, out, long } => {
            let cfg = load_config(&config)?;
            if !matches!(cfg.id, ExperimentId::HalfSpace1d | ExperimentId::HalfSpace2d) {
                return Err(Error::InvalidArgument(
                    "halfspace expects id ex5.5 or ex5.7".into(),
                ));
            }
            let dir = out_dir(out, cfg.out_dir.clone());
            let record = run_experiment(&cfg, long)?;
            let written = emit_results(&record, &dir, EmitFormats::default())?;
            for (name, value) in &record.metrics {
                println!("  {name} = {value:.6e}");
            }
            for path in written {
                println!("  wrote {}", path.display());
            }
            Ok(())
        }
        Cmd::Stability { config, out } => {
            let text = std::fs::read_to_string(&config)?;
            let sc: StabilityConfig =
                toml::from_str(&text).map_err(|e| Error::Parse(format!("config: {e}")))?;
            let rows = run_stability_sweep(&sc.epsilons, sc.seed)?;
            let dir = out_dir(out, sc.out_dir);
            let path = dir.join("stability.csv");
            rte_core::experiments::emit_stability(&rows, &path)?;
            println!("wrote {} ({} rows)", path.display(), rows.len());
            Ok(())
        }
        Cmd::Compare { pred, reference, sqrt } => {
            // Binary fields carry their integration weights; CSVs fall back
            // to uniform weights per axis.
            let read = |path: &Path| -> Result<rte_core::fdm::Field<f64>, Error> {
                if path.extension().is_some_and(|e| e == "bin") {
                    rte_core::fdm::Field::<f64>::read_binary(path)
                } else {
                    rte_core::fdm::Field::<f64>::read_csv(path)
                }
            };
            let p = read(&pred)?;
            let r = read(&reference)?;
            let ratio = relative_l2(&p, &r, false)?;
            println!("relative_l2 = {ratio:.12e}");
            if sqrt {
                println!("relative_l2_sqrt = {:.12e}", ratio.sqrt());
            }
            Ok(())
        }
    }
}
