//! Command-line surface: compute measure reports, run protocol
//! simulations, execute the property suites, and emit plot-ready data.
//!
//! Exit codes: 0 ok, 1 property failure, 2 bad input, 3 resource cap.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use coherence_core::classical::{aep_scan, joint_from_state};
use coherence_core::config::StructureConfig;
use coherence_core::ensembles::{sample, Ensemble};
use coherence_core::error::CoherenceError;
use coherence_core::formation::{cfu_optimize, CfuBudget};
use coherence_core::measure::measure;
use coherence_core::monotones::{mu_k, mu_profile};
use coherence_core::protocols::{distill_accounting, plan_dilution, simulate_dilution};
use coherence_core::state::DensityMatrix;
use coherence_core::structure::{comparison_matrix, edge_graph_and_cliques};
use coherence_core::verify::{run_properties, VerifyConfig};

#[derive(Parser)]
#[command(
    name = "coherence",
    about = "Asymptotic coherence-manipulation toolkit: distillation structure, \
             SIO monotones, PIO cost bounds and protocol accounting",
    version,
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Edge threshold override: |R_ij| >= 1 - tol_edge counts as an edge
    /// [default: 1e-9]
    #[arg(long, global = true)]
    tol_edge: Option<f64>,

    /// Diagonal support cutoff override [default: 1e-12]
    #[arg(long, global = true)]
    diag_cut: Option<f64>,

    /// Write the report here instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct StateArg {
    /// Path to a state file: {"dim": d, "re": [[...]], "im": [[...]]}
    #[arg(long)]
    state: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Full measure report: Q, C_r, eta, lambda, l, blocks, mu profile,
    /// C_f estimate and the C_f^U sandwich
    Measure {
        #[command(flatten)]
        state: StateArg,
        /// Optimizer budget (total iterations split over restarts)
        #[arg(long, default_value_t = 2400)]
        budget: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// The monotone family mu_k with witnesses
    Mu {
        #[command(flatten)]
        state: StateArg,
        /// "all" or a single k
        #[arg(long, default_value = "all")]
        k: String,
    },
    /// Uniform coherence of formation bounds and witness decomposition
    Cfu {
        #[command(flatten)]
        state: StateArg,
        /// Optimizer budget (total iterations split over restarts)
        #[arg(long, default_value_t = 2400)]
        budget: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Monte Carlo accounting of the clique-instrument distillation
    Distill {
        #[command(flatten)]
        state: StateArg,
        #[arg(long, default_value_t = 10_000)]
        n: u64,
        #[arg(long, default_value_t = 200)]
        trials: u64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Plan and evaluate cosbit dilution into a size-k uniform target
    Dilute {
        #[arg(long)]
        k: u64,
        #[arg(long)]
        n: u64,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        eps: f64,
    },
    /// Equipartition scan of the state's conditional-entropy structure
    Aep {
        #[command(flatten)]
        state: StateArg,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 12)]
        nmax: u32,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Run the property suites; exits 1 on any failure
    Verify {
        /// Only run properties whose name contains this substring
        #[arg(long)]
        filter: Option<String>,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Emit a random state from a named ensemble
    RandomState {
        #[arg(long)]
        dim: usize,
        /// hilbert-schmidt | pure | block-structured:2,1 | diagonally-dominant
        #[arg(long, default_value = "hilbert-schmidt")]
        ensemble: String,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

fn exit_code_for(err: &CoherenceError) -> u8 {
    match err {
        CoherenceError::CapExceeded { .. } => 3,
        _ => 2,
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), CoherenceError> {
    match out {
        Some(path) => std::fs::write(path, text.as_bytes())?,
        None => println!("{text}"),
    }
    Ok(())
}

fn load_state(path: &PathBuf) -> Result<DensityMatrix, CoherenceError> {
    let raw = std::fs::read_to_string(path)?;
    DensityMatrix::from_json_str(&raw)
}

fn run(cli: Cli, cfg: StructureConfig) -> Result<(), CoherenceError> {
    match cli.command {
        Command::Measure {
            state,
            budget,
            seed,
        } => {
            let rho = load_state(&state.state)?;
            let mut b = CfuBudget::with_total(budget);
            b.seed = seed;
            let report = measure(&rho, &b, &cfg)?;
            emit(&cli.out, &serde_json::to_string_pretty(&report)?)
        }
        Command::Mu { state, k } => {
            let rho = load_state(&state.state)?;
            let text = if k == "all" {
                serde_json::to_string_pretty(&mu_profile(&rho, &cfg))?
            } else {
                let k: usize = k.parse().map_err(|_| {
                    CoherenceError::InvalidParameter(format!(
                        "--k must be 'all' or an integer, got '{k}'"
                    ))
                })?;
                serde_json::to_string_pretty(&mu_k(&rho, k, &cfg)?)?
            };
            emit(&cli.out, &text)
        }
        Command::Cfu {
            state,
            budget,
            seed,
        } => {
            let rho = load_state(&state.state)?;
            let mut b = CfuBudget::with_total(budget);
            b.seed = seed;
            let report = cfu_optimize(&rho, &b);
            emit(&cli.out, &serde_json::to_string_pretty(&report)?)
        }
        Command::Distill {
            state,
            n,
            trials,
            seed,
        } => {
            let rho = load_state(&state.state)?;
            let run = distill_accounting(&rho, n, seed, trials, &cfg)?;
            emit(&cli.out, &serde_json::to_string_pretty(&run)?)
        }
        Command::Dilute { k, n, delta, eps } => {
            let outcome = plan_dilution(k, n, delta, eps)?;
            // attach the simulated error/rate when feasible
            let text = match &outcome {
                coherence_core::protocols::DilutionOutcome::Feasible { plan } => {
                    let (error, rate) = simulate_dilution(plan)?;
                    let mut v = serde_json::to_value(&outcome)?;
                    v["simulated_error"] = serde_json::json!(error);
                    v["simulated_rate"] = serde_json::json!(rate);
                    serde_json::to_string_pretty(&v)?
                }
                _ => serde_json::to_string_pretty(&outcome)?,
            };
            emit(&cli.out, &text)
        }
        Command::Aep {
            state,
            eps,
            nmax,
            format,
        } => {
            let rho = load_state(&state.state)?;
            let r = comparison_matrix(&rho, &cfg);
            let part = edge_graph_and_cliques(&r, &rho)?;
            let joint = joint_from_state(&rho, &part);
            let points = aep_scan(&joint, eps, nmax);
            let text = match format {
                Format::Json => serde_json::to_string_pretty(&points)?,
                Format::Csv => {
                    let mut s = String::from("n,value,upper_curve\n");
                    for p in &points {
                        s.push_str(&format!("{},{},{}\n", p.n, p.value, p.upper_curve));
                    }
                    s.pop();
                    s
                }
            };
            emit(&cli.out, &text)
        }
        Command::Verify { filter, seed } => {
            let vc = VerifyConfig {
                seed,
                cfg,
                budget: CfuBudget::default(),
            };
            let results = run_properties(&vc, filter.as_deref());
            if results.is_empty() {
                return Err(CoherenceError::InvalidParameter(format!(
                    "no property matches filter {filter:?}"
                )));
            }
            let mut any_failed = false;
            for r in &results {
                let status = if r.passed { "PASS" } else { "FAIL" };
                println!("{status} {} ({} cases): {}", r.name, r.cases, r.detail);
                if !r.passed {
                    any_failed = true;
                    if let Some(ce) = &r.counterexample {
                        println!("  counterexample: {ce}");
                    }
                }
            }
            if any_failed {
                // property failure is its own exit code, not an input error
                std::process::exit(1);
            }
            Ok(())
        }
        Command::RandomState {
            dim,
            ensemble,
            seed,
        } => {
            let e = Ensemble::parse(&ensemble)?;
            let rho = sample(&e, dim, seed)?;
            emit(&cli.out, &rho.to_json_string())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(threads) = std::env::var("COHERENCE_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
        }
    }
    let cfg = StructureConfig {
        tol_edge: cli.tol_edge.unwrap_or(coherence_core::config::TOL_EDGE),
        diag_cut: cli.diag_cut.unwrap_or(coherence_core::config::DIAG_CUT),
    };
    match run(cli, cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
