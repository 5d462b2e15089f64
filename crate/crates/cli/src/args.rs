use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "multistate",
    version,
    about = "Multistate insurance valuation by the matrix method"
)]
pub struct Cli {
    /// Digits after the decimal point in printed values.
    #[arg(long, global = true, default_value_t = 5)]
    pub precision: usize,

    #[arg(long, global = true, value_enum, default_value_t = Format::Plain)]
    pub format: Format,

    /// Master seed for simulation.
    #[arg(long, global = true, default_value_t = 20240101)]
    pub seed: u64,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Plain,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a model file and print its state classes.
    Validate { model: PathBuf },
    /// Move lump sums onto plus-states and write the extended model.
    Extend {
        model: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Print the attached benefits as `flow` lines over 1..=N.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Shortest arrival time of every state from the initial state.
    Delta { model: PathBuf },
    /// Life table commands.
    #[command(subcommand)]
    Table(TableCommand),
    /// Print the distribution matrix D.
    Dist {
        #[command(flatten)]
        chain: ChainArgs,
        /// Start in this state instead of the model's initial state.
        #[arg(long)]
        initial: Option<usize>,
    },
    /// Print a cash-flow matrix as CSV.
    #[command(subcommand)]
    Cashflow(CashflowCommand),
    /// Net single or period premium.
    Premium {
        #[command(flatten)]
        chain: ChainArgs,
        #[command(flatten)]
        discount: DiscountArgs,
        #[command(flatten)]
        contract: ContractArgs,
        #[command(flatten)]
        mode: PremiumArgs,
    },
    /// Value of a unit annuity-due paid in one state at times FROM..TO-1.
    Annuity {
        #[command(flatten)]
        chain: ChainArgs,
        #[command(flatten)]
        discount: DiscountArgs,
        #[arg(long)]
        state: usize,
        #[arg(long)]
        from: usize,
        #[arg(long)]
        to: usize,
    },
    /// Expected total loss for a given premium.
    Check {
        #[command(flatten)]
        chain: ChainArgs,
        #[command(flatten)]
        discount: DiscountArgs,
        #[command(flatten)]
        contract: ContractArgs,
        #[command(flatten)]
        mode: PremiumArgs,
        /// The premium to test.
        #[arg(long)]
        premium: f64,
    },
    /// Monte Carlo estimate next to the matrix value.
    Simulate {
        #[command(flatten)]
        chain: ChainArgs,
        #[command(flatten)]
        discount: DiscountArgs,
        #[command(flatten)]
        contract: ContractArgs,
        #[command(flatten)]
        mode: PremiumArgs,
        #[arg(long, default_value_t = 100_000)]
        paths: usize,
    },
    /// Premium tables on the bundled model and synthetic life tables.
    Demo {
        #[arg(value_enum)]
        scenario: ScenarioArg,
    },
}

#[derive(Debug, Subcommand)]
pub enum TableCommand {
    /// Parse a life table against a model and report the transition matrices.
    Check {
        #[command(flatten)]
        chain: ChainArgs,
    },
}

#[derive(Debug, Subcommand)]
pub enum CashflowCommand {
    /// Accelerated death benefit on the dread-disease layout.
    Accel {
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        n: usize,
    },
    /// Dread-disease benefit cases 1 to 3.
    Case {
        #[arg(long)]
        id: u32,
        #[arg(long)]
        n: usize,
    },
    /// Build from a file of `flow` lines.
    File {
        spec: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        states: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SexArg {
    Female,
    Male,
}

/// Model and life table; both default to the bundled dread-disease fixture.
#[derive(Debug, Args)]
pub struct ChainArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Which bundled synthetic table to use when --table is not given.
    #[arg(long, value_enum, default_value_t = SexArg::Female)]
    pub sex: SexArg,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct DiscountArgs {
    /// Constant interest rate per period.
    #[arg(long)]
    pub rate: Option<f64>,
    /// File of n+1 discount factors starting with 1.
    #[arg(long)]
    pub discount_file: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct ContractArgs {
    /// Accelerated death benefit with this acceleration fraction.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Dread-disease case 1, 2 or 3.
    #[arg(long)]
    pub case: Option<u32>,
    /// File of `flow` lines.
    #[arg(long)]
    pub cashflow: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PremiumArgs {
    #[arg(long, conflicts_with = "period")]
    pub single: bool,
    #[arg(long, requires_all = ["m", "pay_states"])]
    pub period: bool,
    /// Premium-paying term.
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub pay_states: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScenarioArg {
    Accel,
    Case1,
    Case2,
    Case3,
}
