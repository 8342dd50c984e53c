use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use swagg::commands::{cmd_compare, cmd_estimate, cmd_generate, cmd_simulate, SimulateOptions};
use swagg::config::RunConfig;
use swagg::data::{AssumptionKind, AssumptionParams};
use swagg::oracle::{EdgePolicy, TfMethod};
use swagg::synthetic::{self, SyntheticSpec};
use swagg::window::WindowKind;
use swagg::{parallel, Error, Result};

#[derive(Parser, Debug)]
#[command(name = "swagg", version, about = "Select sliding-window aggregate features without generating them")]
struct Cli {
    /// Write a planted synthetic dataset (entities.csv, actions.csv) into
    /// the output directory and exit.
    #[arg(long, num_args = 3, value_names = ["N_ENTITIES", "N_INFORMATIVE", "N_NOISE"])]
    make_synthetic: Option<Vec<usize>>,

    #[command(flatten)]
    common: Common,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Args, Debug, Clone, Default)]
struct Common {
    /// `key = value` config file; flags below override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    entity_csv: Option<String>,
    #[arg(long, global = true)]
    action_csv: Option<String>,
    #[arg(long, global = true)]
    output_dir: Option<String>,
    #[arg(long, global = true)]
    freq_seconds: Option<String>,
    #[arg(long, global = true)]
    t0: Option<String>,
    #[arg(long, global = true)]
    horizon: Option<String>,
    /// Comma-separated, e.g. `7,15,30`.
    #[arg(long, global = true)]
    periods: Option<String>,
    /// Subset of `sum,avg`.
    #[arg(long, global = true)]
    windows: Option<String>,
    /// Subset of `avg,max,min`.
    #[arg(long, global = true)]
    aggregators: Option<String>,
    /// `always`, `binomial`, `poisson` or `auto`.
    #[arg(long, global = true)]
    assumption: Option<String>,
    #[arg(long, global = true)]
    m_cap: Option<String>,
    #[arg(long, global = true)]
    rho: Option<String>,
    #[arg(long, global = true)]
    rho_l: Option<String>,
    #[arg(long, global = true)]
    rho_r: Option<String>,
    #[arg(long, global = true)]
    ensembles: Option<String>,
    #[arg(long, global = true)]
    trees: Option<String>,
    #[arg(long, global = true)]
    seed: Option<String>,
    /// `full`, `degenerate` or `paper-degenerate`.
    #[arg(long, global = true)]
    lambda_method: Option<String>,
}

impl Common {
    fn run_config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_path(p)?,
            None => RunConfig::default(),
        };
        let overrides = [
            ("entity_csv", &self.entity_csv),
            ("action_csv", &self.action_csv),
            ("output_dir", &self.output_dir),
            ("freq_seconds", &self.freq_seconds),
            ("t0", &self.t0),
            ("horizon", &self.horizon),
            ("periods", &self.periods),
            ("windows", &self.windows),
            ("aggregators", &self.aggregators),
            ("assumption", &self.assumption),
            ("m_cap", &self.m_cap),
            ("rho", &self.rho),
            ("rho_l", &self.rho_l),
            ("rho_r", &self.rho_r),
            ("ensembles", &self.ensembles),
            ("trees", &self.trees),
            ("seed", &self.seed),
            ("lambda_method", &self.lambda_method),
        ];
        for (key, value) in overrides {
            if let Some(v) = value {
                cfg.set(key, v).map_err(|e| e.context(format!("--{}", key.replace('_', "-"))))?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit parameters, bound every aggregate feature and rank the features.
    Estimate {
        /// Also write per-ensemble importances.
        #[arg(long)]
        emit_ensembles: bool,
    },
    /// Generate the real feature table by brute force.
    Generate {
        #[arg(long, default_value = "sparse")]
        method: String,
        #[arg(long, default_value = "full-only")]
        edge_policy: String,
    },
    /// Rank from bounds and from the real feature table; write the recall curve.
    Compare {
        #[arg(long, default_value = "sparse")]
        method: String,
        #[arg(long, default_value = "full-only")]
        edge_policy: String,
        /// Feed the real feature table to the estimate side (self-check).
        #[arg(long)]
        debug_real_tf: bool,
    },
    /// Simulate the window chain; histogram versus mixture and bound coverage.
    Simulate {
        #[arg(long, default_value = "sum")]
        window: String,
        #[arg(long, default_value_t = 10.0)]
        mu: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        /// Binomial activity probability or Poisson rate.
        #[arg(long, default_value_t = 0.3)]
        p: f64,
        /// Poisson cap on records per bucket.
        #[arg(long, default_value_t = 1)]
        m: usize,
        #[arg(long, default_value_t = 10)]
        period: usize,
        #[arg(long, default_value_t = 500_000)]
        steps: usize,
        #[arg(long, default_value_t = 200)]
        bins: usize,
        #[arg(long, default_value_t = 200)]
        coverage_trials: usize,
        #[arg(long, default_value_t = 1000)]
        coverage_ell: usize,
    },
}

fn run(cli: Cli) -> Result<()> {
    let threads = match std::env::var("SWAGG_THREADS") {
        Ok(v) => Some(
            v.trim()
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("SWAGG_THREADS must be a positive integer, got `{v}`")))?,
        ),
        Err(_) => None,
    };
    parallel::init_threads(threads);
    let cfg = cli.common.run_config()?;

    if let Some(sizes) = cli.make_synthetic {
        let spec = SyntheticSpec { seed: cfg.seed, ..SyntheticSpec::new(sizes[0], sizes[1], sizes[2]) };
        synthetic::write(&spec, &cfg.output_dir)?;
        println!("wrote synthetic dataset to {}", cfg.output_dir.display());
        if cli.command.is_none() {
            return Ok(());
        }
    }

    match cli.command {
        None => Err(Error::Config("no command given; see --help".into())),
        Some(Command::Estimate { emit_ensembles }) => {
            let out = cmd_estimate(&cfg, emit_ensembles)?;
            let total: f64 = out.report.mean.iter().sum();
            println!(
                "{} entities x {} columns; importance sum {total:.12}; {}",
                out.bounds.n_rows(),
                out.bounds.n_cols(),
                out.timings
            );
            Ok(())
        }
        Some(Command::Generate { method, edge_policy }) => {
            let method: TfMethod = method.parse()?;
            let policy: EdgePolicy = edge_policy.parse()?;
            let tf = cmd_generate(&cfg, method, policy)?;
            println!("{} entities x {} columns", tf.n_rows(), tf.n_cols());
            Ok(())
        }
        Some(Command::Compare { method, edge_policy, debug_real_tf }) => {
            let method: TfMethod = method.parse()?;
            let policy: EdgePolicy = edge_policy.parse()?;
            let out = cmd_compare(&cfg, method, policy, debug_real_tf)?;
            for (f, r) in &out.recall {
                println!("{f:.2},{r}");
            }
            let (q1, q2, q3) = out.quartiles;
            println!("relative error quartiles: {q1} {q2} {q3}");
            Ok(())
        }
        Some(Command::Simulate { window, mu, sigma, p, m, period, steps, bins, coverage_trials, coverage_ell }) => {
            let kind: WindowKind = window.parse()?;
            let assumption = cfg.estimate.assumption.unwrap_or(AssumptionKind::Binomial);
            let params = AssumptionParams {
                kind: assumption,
                mu,
                sigma,
                p,
                m: if assumption == AssumptionKind::Poisson { m.max(1) } else { 1 },
                ell: steps,
                c_min: mu,
                c_max: mu,
            };
            let opts = SimulateOptions {
                kind,
                params,
                w: period,
                steps,
                seed: cfg.seed,
                bins,
                coverage_trials,
                coverage_ell,
                rho: cfg.estimate.rho,
                lambda_method: cfg.estimate.lambda_method,
                output_dir: cfg.output_dir.clone(),
            };
            let out = cmd_simulate(&opts)?;
            println!("max density gap {:.6}", out.max_density_gap);
            for c in &out.coverage {
                if c.trials == 0 {
                    println!("{} coverage: NoRecords", c.aggregator);
                } else {
                    println!("{} coverage: {}/{} = {:.3}", c.aggregator, c.covered, c.trials, c.rate());
                }
            }
            Ok(())
        }
    }
}

fn exit_code(err: &Error) -> u8 {
    match err.root() {
        Error::Schema(_) | Error::Csv(_) => 2,
        Error::Config(_) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
