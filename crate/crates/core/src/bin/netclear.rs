//! `netclear`: clearing, games, centrality and regulation from the command
//! line. Exit codes: 0 success, 1 a replication check failed, 2 bad input,
//! 3 solver failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use netclear::cli::{self, ClearArgs, CliError};
use netclear::clearing::Selection;
use netclear::network::BankruptcyCostSpec;

#[derive(Parser)]
#[command(name = "netclear", version, about = "Clearing and regulation analysis for debt and equity networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SelectionArg {
    Greatest,
    Least,
}

#[derive(Args)]
struct Common {
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args)]
struct NetworkInputs {
    #[arg(long)]
    network: PathBuf,
    #[arg(long)]
    scenarios: Option<PathBuf>,
    /// JSON rows of asset holdings, one per bank.
    #[arg(long)]
    portfolio: Option<PathBuf>,
    /// JSON cross-holding matrix.
    #[arg(long)]
    equity: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "greatest")]
    selection: SelectionArg,
    /// Fixed bankruptcy cost.
    #[arg(long, default_value_t = 0.0)]
    chi: f64,
    /// Proportional bankruptcy cost on assets.
    #[arg(long, default_value_t = 0.0)]
    cost_share: f64,
    /// Resample the scenarios with this many seeded draws.
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Clear a network in every scenario.
    Clear {
        #[command(flatten)]
        inputs: NetworkInputs,
        #[command(flatten)]
        common: Common,
    },
    /// Enumerate pure Nash equilibria of a game file.
    Nash {
        #[arg(long)]
        game: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// NFC and bailout centrality of every bank.
    Centrality {
        #[command(flatten)]
        inputs: NetworkInputs,
        /// Asset the counterfactual portfolio moves into.
        #[arg(long)]
        safe_asset: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Welfare of a regulation policy on a game file.
    Welfare {
        #[arg(long)]
        game: PathBuf,
        #[arg(long)]
        policy: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Exhaustive search for the welfare-maximizing caps.
    Search {
        #[arg(long)]
        game: PathBuf,
        /// Net risk-free rate used to place the caps.
        #[arg(long)]
        rate: f64,
        /// Allow bailouts at this cost per bank.
        #[arg(long)]
        bailout_cost: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Grid sweep described by a JSON config.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Reproduce a named result (or `all`) and report pass/fail.
    Replicate {
        name: String,
        #[command(flatten)]
        common: Common,
    },
}

fn clear_args(inputs: NetworkInputs, common: &Common) -> Result<ClearArgs, CliError> {
    let costs = BankruptcyCostSpec::new(inputs.cost_share, inputs.chi).map_err(|e| CliError::Config(e.to_string()))?;
    Ok(ClearArgs {
        network: inputs.network,
        scenarios: inputs.scenarios,
        portfolio: inputs.portfolio,
        equity: inputs.equity,
        costs,
        selection: match inputs.selection {
            SelectionArg::Greatest => Selection::Greatest,
            SelectionArg::Least => Selection::Least,
        },
        samples: inputs.samples,
        seed: common.seed,
        out: common.out.clone(),
    })
}

fn run(cli: Cli) -> Result<bool, CliError> {
    match cli.command {
        Command::Clear { inputs, common } => {
            let args = clear_args(inputs, &common)?;
            cli::cmd_clear(&args)?;
            println!("wrote {}", args.out.join("clearing.csv").display());
        }
        Command::Nash { game, common } => {
            let k = cli::cmd_nash(&game, &common.out)?;
            println!("{k} equilibria; wrote {}", common.out.join("nash.csv").display());
        }
        Command::Centrality { inputs, safe_asset, common } => {
            let args = clear_args(inputs, &common)?;
            cli::cmd_centrality(&args, safe_asset)?;
            println!("wrote {}", args.out.join("centrality.csv").display());
        }
        Command::Welfare { game, policy, common } => {
            let o = cli::cmd_welfare(&game, policy.as_deref(), &common.out)?;
            println!("welfare {}", netclear::replicate::fmt_f64(o.welfare));
        }
        Command::Search { game, rate, bailout_cost, common } => {
            let r = cli::cmd_search(&game, rate, bailout_cost, &common.out)?;
            println!("{} optimal policies, welfare {}", r.optimal.len(), netclear::replicate::fmt_f64(r.welfare));
        }
        Command::Sweep { config, common } => {
            let rows = cli::cmd_sweep(&config, &common.out)?;
            println!("{rows} rows; wrote {}", common.out.join("sweep.csv").display());
        }
        Command::Replicate { name, common } => return cli::cmd_replicate(&name, common.seed, &common.out),
    }
    Ok(true)
}

fn main() -> ExitCode {
    if let Some(t) = std::env::var("NETCLEAR_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        // ignore failure: the pool may already be initialized
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t.max(1)).build_global();
    }
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
