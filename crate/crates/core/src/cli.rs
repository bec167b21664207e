//! Command-line front end. Exit codes: 0 converged, 2 not converged, 1 usage
//! or I/O error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::clustering::{self, CcSchedule};
use crate::error::Result;
use crate::io;
use crate::metric_learning::{self, ItmlParams, PairSets};
use crate::nearness::{self, InstanceKind, NearnessInstance};
use crate::solver::{write_trace_csv, TraceRecord};

#[derive(Debug, Parser)]
#[command(name = "projforget", version, about = "Active-set Bregman projection solvers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    /// Write the per-iteration trace as CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Record wall-clock times in the trace (otherwise written as 0).
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closest metric to a weighted graph in the Euclidean norm.
    Nearness {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-6)]
        threshold: f64,
        #[arg(long, default_value_t = 10_000)]
        max_iterations: usize,
        #[command(flatten)]
        trace: TraceArgs,
    },
    /// Metric relaxation of weighted correlation clustering.
    Cluster {
        /// Signed edge list `u v wplus wminus`.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        #[arg(long, default_value_t = 0.01)]
        tol: f64,
        #[arg(long, default_value_t = 10_000)]
        max_iterations: usize,
        #[arg(long, value_enum, default_value_t = ScheduleArg::Auto)]
        schedule: ScheduleArg,
        #[command(flatten)]
        trace: TraceArgs,
    },
    /// Mahalanobis metric learning on a labelled CSV dataset.
    Itml {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        #[arg(long, default_value_t = 1.0)]
        u: f64,
        #[arg(long, default_value_t = 10.0)]
        l: f64,
        #[arg(long, default_value_t = 100_000)]
        budget: usize,
        /// Pairs per set; defaults to 20 c^2 for c classes.
        #[arg(long)]
        pairs: Option<usize>,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Linear L2 SVM on a two-class CSV dataset.
    Svm {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        c_penalty: f64,
        #[arg(long, default_value_t = metric_learning::DEFAULT_SVM_EPOCHS)]
        epochs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        trace: TraceArgs,
    },
    /// Generate a random instance.
    Gen {
        #[arg(long, value_enum)]
        kind: GenKind,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Edge probability for signed graphs.
        #[arg(long, default_value_t = 1.0)]
        density: f64,
        /// Feature dimension for SVM data.
        #[arg(long, default_value_t = 10)]
        d: usize,
        /// Feature scale K for SVM data.
        #[arg(long = "noise-k", default_value_t = 10.0)]
        noise_k: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ScheduleArg {
    /// Dense on complete graphs, sparse otherwise.
    Auto,
    Dense,
    Sparse,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum GenKind {
    Type1,
    Type2,
    Type3,
    Signed,
    Svm,
}

fn emit(path: Option<&Path>, contents: &str) -> Result<()> {
    match path {
        Some(p) => io::write_file(p, contents.as_bytes()),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

fn emit_trace(args: &TraceArgs, trace: &[TraceRecord]) -> Result<()> {
    if let Some(path) = &args.trace {
        let mut buf = Vec::new();
        write_trace_csv(trace, &mut buf, args.timing).expect("writing to memory");
        io::write_file(path, &buf)?;
    }
    Ok(())
}

/// Runs one command; `Ok(true)` means the solve converged.
pub fn execute(command: Command) -> Result<bool> {
    match command {
        Command::Nearness {
            input,
            output,
            threshold,
            max_iterations,
            trace,
        } => {
            let graph = io::read_edge_list(&input)?;
            let inst = NearnessInstance::new(graph.clone())
                .with_threshold(threshold)
                .with_max_iterations(max_iterations);
            let sol = nearness::solve_nearness(&inst)?;
            emit(
                output.as_deref(),
                &io::format_edge_list(&graph.graph, sol.x(), &[]),
            )?;
            emit_trace(&trace, sol.solution.trace())?;
            eprintln!(
                "nearness: {} iterations, converged={}",
                sol.solution.state.iteration,
                sol.converged()
            );
            Ok(sol.converged())
        }
        Command::Cluster {
            input,
            output,
            gamma,
            tol,
            max_iterations,
            schedule,
            trace,
        } => {
            let signed = io::read_signed_edge_list(&input)?;
            let inst = clustering::transform(&signed, gamma)?;
            let schedule = match schedule {
                ScheduleArg::Dense => CcSchedule::Dense,
                ScheduleArg::Sparse => CcSchedule::Sparse,
                ScheduleArg::Auto if inst.graph.is_complete() => CcSchedule::Dense,
                ScheduleArg::Auto => CcSchedule::Sparse,
            };
            let sol = clustering::solve_cc(&inst, schedule, tol, max_iterations)?;
            let (ratio, raw) = clustering::approx_ratio(&sol.x, &inst);
            let comments = vec![
                format!("objective {}", sol.objective),
                format!(
                    "ratio {}{}",
                    ratio.ratio,
                    if ratio.degenerate { " degenerate" } else { "" }
                ),
                format!(
                    "ratio_raw {}{}",
                    raw.ratio,
                    if raw.degenerate { " degenerate" } else { "" }
                ),
            ];
            emit(
                output.as_deref(),
                &io::format_edge_list(&inst.graph, &sol.x, &comments),
            )?;
            emit_trace(&trace, sol.solution.trace())?;
            eprintln!(
                "cluster: {} iterations, converged={}, ratio={}",
                sol.solution.state.iteration, sol.converged, ratio.ratio
            );
            Ok(sol.converged)
        }
        Command::Itml {
            input,
            output,
            gamma,
            u,
            l,
            budget,
            pairs,
            k,
            seed,
        } => {
            let data = io::read_dataset_csv(&input)?;
            let (train, test) = data.split(0.8, seed)?;
            let mut classes = train.labels.clone();
            classes.sort_unstable();
            classes.dedup();
            let per_set = pairs.unwrap_or(20 * classes.len() * classes.len());
            let pair_sets = PairSets::from_labels(&train.labels, per_set, seed)?;
            let params = ItmlParams { gamma, u, l };
            let state =
                metric_learning::itml_fit(&train.features, &pair_sets, params, budget, seed)?;
            let learned = metric_learning::knn_evaluate(&state.c, &train, &test, k)?;
            let dim = state.c.nrows();
            let plain = metric_learning::knn_evaluate(
                &nalgebra::DMatrix::identity(dim, dim),
                &train,
                &test,
                k,
            )?;
            let mut text = format!("# knn_accuracy {learned}\n# knn_accuracy_identity {plain}\n");
            for r in 0..dim {
                let row: Vec<String> = (0..dim).map(|c| state.c[(r, c)].to_string()).collect();
                text.push_str(&row.join(" "));
                text.push('\n');
            }
            emit(output.as_deref(), &text)?;
            eprintln!("itml: accuracy {learned} (identity {plain})");
            Ok(true)
        }
        Command::Svm {
            input,
            output,
            c_penalty,
            epochs,
            seed,
            trace,
        } => {
            let data = io::read_dataset_csv(&input)?;
            let (train, test) = data.split(0.8, seed)?;
            let ytr = train.binary_labels()?;
            let yte = if test.is_empty() {
                Vec::new()
            } else {
                test.binary_labels()?
            };
            let model = metric_learning::svm_fit(&train.features, &ytr, c_penalty, epochs, seed)?;
            let train_acc = metric_learning::accuracy(&model.w, &train.features, &ytr);
            let test_acc = metric_learning::accuracy(&model.w, &test.features, &yte);
            let mut text = format!("# train_accuracy {train_acc}\n# test_accuracy {test_acc}\n");
            for v in &model.w {
                text.push_str(&format!("{v}\n"));
            }
            emit(output.as_deref(), &text)?;
            emit_trace(&trace, model.solution.trace())?;
            eprintln!("svm: train accuracy {train_acc}, test accuracy {test_acc}");
            Ok(model.solution.converged)
        }
        Command::Gen {
            kind,
            n,
            seed,
            output,
            density,
            d,
            noise_k,
        } => {
            let text = match kind {
                GenKind::Type1 | GenKind::Type2 | GenKind::Type3 => {
                    let k = match kind {
                        GenKind::Type1 => InstanceKind::Gaussian,
                        GenKind::Type2 => InstanceKind::Bernoulli,
                        _ => InstanceKind::HeavyTail,
                    };
                    let g = nearness::generate_instance(n, k, seed)?;
                    io::format_edge_list(&g.graph, &g.weights, &[])
                }
                GenKind::Signed => io::format_signed_edge_list(
                    &clustering::generate_signed_instance(n, density, seed)?,
                ),
                GenKind::Svm => {
                    let data = metric_learning::generate_svm_data(n, d, noise_k, seed)?;
                    eprintln!("gen: flip rate {}", data.flip_rate);
                    io::format_dataset_csv(&data.to_dataset())
                }
            };
            emit(output.as_deref(), &text)?;
            Ok(true)
        }
    }
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(true) => 0,
        Ok(false) => 2,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run(["projforget"]), 1);
        assert_eq!(run(["projforget", "nearness"]), 1);
        assert_eq!(run(["projforget", "bogus"]), 1);
    }

    #[test]
    fn missing_input_exits_one() {
        assert_eq!(
            run(["projforget", "nearness", "--input", "/nonexistent/x.edges"]),
            1
        );
    }
}
