//! Command-line front end: every tracked constant as a subcommand, JSON
//! fixtures in, flat key=value reports out, CSV sweeps, and the self-check
//! suite.
//!
//! Exit codes: 0 success, 1 invalid input, 2 numerical failure (including
//! self-check violations).

use clap::{Parser, Subcommand, ValueEnum};
use haarlab_cli::{files, CliError};
use haarlab_core::bounds::{self, Method, OperatorKind};
use haarlab_core::experiments::{self, FamilySpec, Measure};
use haarlab_core::operators;
use haarlab_core::verify::{self, VerifyConfig};
use haarlab_core::weights::{self, AveragesTree};
use haarlab_core::VectorField;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "haarlab",
    version,
    about = "Matrix-weighted dyadic harmonic analysis on finite trees"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MethodArg {
    Auto,
    Dense,
    Power,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Method {
        match m {
            MethodArg::Auto => Method::Auto,
            MethodArg::Dense => Method::Dense,
            MethodArg::Power => Method::Power,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Matrix A2 characteristic of a weight.
    A2 {
        #[arg(long)]
        weight: PathBuf,
    },
    /// Two-sided weighted square-function constants.
    SquareBounds {
        #[arg(long)]
        weight: PathBuf,
        /// Include the mean mode in both quadratic forms.
        #[arg(long)]
        include_mean: bool,
        #[arg(long, value_enum, default_value_t = MethodArg::Auto)]
        method: MethodArg,
    },
    /// Weighted operator norm of the dyadic shift.
    ShiftNorm {
        #[arg(long)]
        weight: PathBuf,
        #[arg(long, value_enum, default_value_t = MethodArg::Auto)]
        method: MethodArg,
    },
    /// Weighted operator norm of a Haar multiplier.
    MultiplierNorm {
        #[arg(long)]
        weight: PathBuf,
        #[arg(long)]
        sigma: PathBuf,
        #[arg(long, value_enum, default_value_t = MethodArg::Auto)]
        method: MethodArg,
    },
    /// Weighted embedding sum of a weight against a function.
    Embedding {
        #[arg(long)]
        weight: PathBuf,
        #[arg(long)]
        function: PathBuf,
    },
    /// Three-term split of the inverse Haar-diagonal form.
    S123 {
        #[arg(long)]
        weight: PathBuf,
        #[arg(long)]
        function: PathBuf,
    },
    /// Weighted testing ratio.
    Testing {
        #[arg(long)]
        weight: PathBuf,
    },
    /// Carleson embedding and testing constants for a matrix sequence.
    Carleson {
        #[arg(long)]
        weight: PathBuf,
        #[arg(long)]
        sequence: PathBuf,
    },
    /// Eigenvalue truncation of a weight, written to a new file.
    Truncate {
        #[arg(long)]
        weight: PathBuf,
        #[arg(long)]
        n: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Weighted dyadic maximal function of a function.
    Maximal {
        #[arg(long)]
        weight: PathBuf,
        #[arg(long)]
        function: PathBuf,
    },
    /// Weight-family sweep with CSV output and exponent regression.
    Sweep {
        /// constant | two_value | rotation | random_martingale.
        #[arg(long)]
        family: String,
        /// Parameter grid start:stop:count, with an optional :geom suffix.
        #[arg(long)]
        range: String,
        #[arg(long)]
        depth: u32,
        #[arg(long)]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated subset of a2,square,shift,multiplier,embedding,testing or "all".
        #[arg(long, default_value = "all")]
        measure: String,
        #[arg(long)]
        out: PathBuf,
        /// Fill runtime_ms with measured wall time (breaks byte-for-byte
        /// reproducibility of the CSV).
        #[arg(long)]
        timing: bool,
    },
    /// Run the self-check suite.
    Verify {
        #[arg(long, default_value_t = 5)]
        depth: u32,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 2000)]
        trials: usize,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            eprintln!("{e}");
            return ExitCode::from(1);
        }
        Err(e) => {
            // --help / --version.
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn tree_of(weight: &std::path::Path) -> Result<AveragesTree, CliError> {
    let w = files::load_weight(weight)?;
    AveragesTree::build(&w).map_err(CliError::from)
}

fn check_same_layout(tree: &AveragesTree, f: &VectorField) -> Result<(), CliError> {
    if f.dim() != tree.dim() || f.depth() != tree.depth() {
        return Err(CliError::Input(format!(
            "function layout (dim {}, depth {}) does not match weight (dim {}, depth {})",
            f.dim(),
            f.depth(),
            tree.dim(),
            tree.depth()
        )));
    }
    Ok(())
}

fn run(command: Command) -> Result<ExitCode, CliError> {
    match command {
        Command::A2 { weight } => {
            let tree = tree_of(&weight)?;
            let a2 = weights::a2_characteristic(&tree)?;
            println!("a2={a2:?}");
        }
        Command::SquareBounds {
            weight,
            include_mean,
            method,
        } => {
            let tree = tree_of(&weight)?;
            let (c_up, c_low) = bounds::square_constants(&tree, include_mean, method.into())?;
            println!("c_low={c_low:?} c_up={c_up:?}");
        }
        Command::ShiftNorm { weight, method } => {
            let tree = tree_of(&weight)?;
            let norm = bounds::weighted_op_norm(&tree, OperatorKind::Shift, method.into())?;
            println!("shift_norm={:?}", norm.value());
        }
        Command::MultiplierNorm {
            weight,
            sigma,
            method,
        } => {
            let tree = tree_of(&weight)?;
            let symbol = files::load_symbol(&sigma)?;
            if symbol.dim() != tree.dim() {
                return Err(CliError::Input(format!(
                    "symbol dim {} does not match weight dim {}",
                    symbol.dim(),
                    tree.dim()
                )));
            }
            let norm =
                bounds::weighted_op_norm(&tree, OperatorKind::Multiplier(&symbol), method.into())?;
            let sigma_norm = operators::sigma_norm(&symbol, &tree)?;
            let lower = bounds::multiplier_necessity_bound(&tree, &symbol)?;
            println!(
                "multiplier_norm={:?} sigma_norm={sigma_norm:?} necessity_lower={lower:?}",
                norm.value()
            );
        }
        Command::Embedding { weight, function } => {
            let tree = tree_of(&weight)?;
            let f = files::load_function(&function)?;
            check_same_layout(&tree, &f)?;
            let (lhs, ratio) = bounds::tv_embedding_ratio(&tree, &f)?;
            println!("lhs={lhs:?} ratio={ratio:?}");
        }
        Command::S123 { weight, function } => {
            let tree = tree_of(&weight)?;
            let f = files::load_function(&function)?;
            check_same_layout(&tree, &f)?;
            let s = bounds::s123_decomposition(&tree, &f)?;
            println!(
                "s1={:?} s2_bound={:?} s3={:?} total={:?}",
                s.s1, s.s2_bound, s.s3, s.total
            );
        }
        Command::Testing { weight } => {
            let tree = tree_of(&weight)?;
            let ratio = bounds::testing_ratio(&tree)?;
            println!("testing_ratio={ratio:?}");
        }
        Command::Carleson { weight, sequence } => {
            let tree = tree_of(&weight)?;
            let seq = files::load_sequence(&sequence)?;
            if seq.dim() != tree.dim() {
                return Err(CliError::Input(format!(
                    "sequence dim {} does not match weight dim {}",
                    seq.dim(),
                    tree.dim()
                )));
            }
            let (c_embed, c_test) = bounds::carleson_constants(&seq, &tree)?;
            let ratio = if c_test > 0.0 { c_embed / c_test } else { 0.0 };
            println!("c_embed={c_embed:?} c_test={c_test:?} ratio={ratio:?}");
        }
        Command::Truncate { weight, n, out } => {
            let w = files::load_weight(&weight)?;
            let before = weights::a2_characteristic(&AveragesTree::build(&w)?)?;
            let truncated = weights::truncate(&w, n)?;
            let after = weights::a2_characteristic(&AveragesTree::build(&truncated)?)?;
            files::write_weight(&out, &truncated)?;
            println!(
                "a2_before={before:?} a2_after={after:?} out={}",
                out.display()
            );
        }
        Command::Maximal { weight, function } => {
            let tree = tree_of(&weight)?;
            let f = files::load_function(&function)?;
            check_same_layout(&tree, &f)?;
            let values = weights::dyadic_maximal(&f, &tree)?;
            let linf = values.iter().fold(0.0f64, |a, &b| a.max(b));
            let l2 = (values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64).sqrt();
            let leaves: Vec<String> = values
                .iter()
                .enumerate()
                .map(|(i, v)| format!("v{i}={v:?}"))
                .collect();
            println!(
                "n={} linf={linf:?} l2={l2:?} {}",
                values.len(),
                leaves.join(" ")
            );
        }
        Command::Sweep {
            family,
            range,
            depth,
            dim,
            seed,
            measure,
            out,
            timing,
        } => {
            let (start, stop, count, geometric) = parse_range(&range)?;
            let spec = FamilySpec {
                family,
                start,
                stop,
                count,
                geometric,
                depth,
                dim,
                seed,
            };
            let measures = Measure::parse_list(&measure)?;
            let outcome = experiments::run_sweep(&spec, &measures, timing)?;
            for failure in &outcome.failures {
                eprintln!("row param={} failed: {}", failure.param, failure.message);
            }
            let csv = experiments::to_csv(&outcome.rows);
            std::fs::write(&out, &csv)
                .map_err(|e| CliError::Input(format!("cannot write {}: {e}", out.display())))?;
            print_sweep_report(&outcome);
            println!(
                "rows={} failures={} out={}",
                outcome.rows.len(),
                outcome.failures.len(),
                out.display()
            );
        }
        Command::Verify {
            depth,
            dim,
            seed,
            trials,
        } => {
            let cfg = VerifyConfig {
                depth,
                dim,
                seed,
                trials,
            };
            let outcomes = verify::run_suite(&cfg);
            let mut failed = 0;
            for o in &outcomes {
                if o.passed {
                    println!("ok {} - {}", o.name, o.detail);
                } else {
                    failed += 1;
                    println!("FAIL {} - {}", o.name, o.detail);
                }
            }
            println!(
                "checks={} passed={} failed={failed}",
                outcomes.len(),
                outcomes.len() - failed
            );
            if failed > 0 {
                return Ok(ExitCode::from(2));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn parse_range(range: &str) -> Result<(f64, f64, usize, bool), CliError> {
    let parts: Vec<&str> = range.split(':').collect();
    if parts.len() < 3 || parts.len() > 4 {
        return Err(CliError::Input(format!(
            "range '{range}' must be start:stop:count or start:stop:count:geom"
        )));
    }
    let start: f64 = parts[0]
        .parse()
        .map_err(|_| CliError::Input(format!("range start '{}' is not a number", parts[0])))?;
    let stop: f64 = parts[1]
        .parse()
        .map_err(|_| CliError::Input(format!("range stop '{}' is not a number", parts[1])))?;
    let count: usize = parts[2]
        .parse()
        .map_err(|_| CliError::Input(format!("range count '{}' is not an integer", parts[2])))?;
    let geometric = match parts.get(3) {
        None => false,
        Some(&"geom") => true,
        Some(other) => {
            return Err(CliError::Input(format!(
                "range suffix '{other}' not recognized (only 'geom')"
            )))
        }
    };
    Ok((start, stop, count, geometric))
}

type ColumnGetter = fn(&experiments::SweepRow) -> Option<f64>;

fn print_sweep_report(outcome: &experiments::SweepOutcome) {
    let xs: Vec<f64> = outcome.rows.iter().map(|r| r.a2).collect();
    let columns: [(&str, ColumnGetter); 6] = [
        ("c_up", |r| r.c_up),
        ("c_low", |r| r.c_low),
        ("shift_norm", |r| r.shift_norm),
        ("tsigma_norm", |r| r.tsigma_norm),
        ("tv_ratio", |r| r.tv_ratio),
        ("testing_ratio", |r| r.testing_ratio),
    ];
    for (name, getter) in &columns {
        let pairs: Vec<(f64, f64)> = outcome
            .rows
            .iter()
            .zip(&xs)
            .filter_map(|(r, &x)| getter(r).map(|y| (x, y)))
            .collect();
        if pairs.is_empty() {
            continue;
        }
        let (fx, fy): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        match experiments::regression_report(&fx, &fy, outcome.failures.len()) {
            Ok(report) => {
                print!(
                    "{name}_slope={:?} {name}_r2={:?}",
                    report.raw.slope, report.raw.r_squared
                );
                for (s0, fit) in &report.residuals {
                    let tag = format!("{s0}").replace('.', "_");
                    print!(" {name}_resid{tag}_slope={:?}", fit.slope);
                }
                println!();
            }
            Err(_) => {
                println!("{name}_fit=degenerate");
            }
        }
    }
}
