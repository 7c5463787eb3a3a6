use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use oalab::cli::{
    cmd_dump, cmd_gen, cmd_lemmas, cmd_scaling, cmd_verify, CmdOutcome, ExperimentConfig, Family,
    QRule,
};
use oalab::error::Error;
use oalab::Caps;

#[derive(Parser)]
#[command(
    name = "oalab",
    version,
    about = "Build and certify adversary operators for orthogonal-array search problems"
)]
struct Cli {
    #[command(subcommand)]
    command: Commands,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FamilyArg {
    Ksum,
    Kdist,
    Ddegree,
    Pattern,
    File,
}

impl From<FamilyArg> for Family {
    fn from(value: FamilyArg) -> Self {
        match value {
            FamilyArg::Ksum => Family::Ksum,
            FamilyArg::Kdist => Family::Kdist,
            FamilyArg::Ddegree => Family::Ddegree,
            FamilyArg::Pattern => Family::Pattern,
            FamilyArg::File => Family::File,
        }
    }
}

#[derive(Args, Debug, Clone)]
struct FamilyOpts {
    #[arg(long, value_enum)]
    family: FamilyArg,
    #[arg(long, default_value_t = 3)]
    n: usize,
    #[arg(long, default_value_t = 3)]
    q: u32,
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// Target sum for the ksum family.
    #[arg(long, default_value_t = 0)]
    t: u32,
    /// Polynomial degree bound for the ddegree family.
    #[arg(long, default_value_t = 0)]
    deg: usize,
    /// Evaluate ddegree polynomials at subset ranks instead of elements
    /// (the inconsistent variant).
    #[arg(long, default_value_t = false)]
    rank_indexed: bool,
    /// Global string for consistent pattern collections, e.g. "0,1,2,0".
    #[arg(long)]
    pattern_global: Option<String>,
    /// Strength-0 collection file providing one pattern per subset.
    #[arg(long)]
    pattern_file: Option<PathBuf>,
    /// Collection file (explicit or generator shorthand).
    #[arg(long)]
    file: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct NumericOpts {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1e-9)]
    tolerance: f64,
    #[arg(long, default_value_t = 20_000)]
    max_iter: usize,
    /// Cap on q^n for matrix-free work and input enumeration.
    #[arg(long, default_value_t = 10_000_000)]
    qn_cap: u128,
    /// Cap on entries of dense materializations.
    #[arg(long, default_value_t = 10_000_000)]
    dense_cap: u128,
}

impl NumericOpts {
    fn caps(&self) -> Caps {
        Caps {
            dense_entries: self.dense_cap,
            enumeration: self.qn_cap,
            qn: self.qn_cap,
            ..Caps::default()
        }
    }
}

#[derive(Subcommand)]
enum Commands {
    /// Generate a collection and write it in the text format.
    Gen {
        #[command(flatten)]
        family: FamilyOpts,
        /// Output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Verify the advertised strength/index of a collection file and
    /// report linearity and consistency.
    Verify { file: PathBuf },
    /// Run the certificate and the inequality suite; write a JSON report.
    Lemmas {
        #[command(flatten)]
        family: FamilyOpts,
        #[command(flatten)]
        numeric: NumericOpts,
        /// Report path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Materialize an operator variant as a dense text dump.
    Dump {
        #[command(flatten)]
        family: FamilyOpts,
        /// plain, masked, mapped, delta, or masked-delta.
        #[arg(long, default_value = "plain")]
        variant: String,
        /// Coordinate for mapped/delta variants (0-based).
        #[arg(long)]
        coordinate: Option<usize>,
        /// Dump path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep the certificate ratio over input sizes; write a CSV.
    Scaling {
        #[arg(long, value_enum)]
        family: FamilyArg,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        d: usize,
        /// Comma-separated input sizes, e.g. "2,3,4,5".
        #[arg(long, value_delimiter = ',')]
        n_list: Vec<usize>,
        /// "strict" picks the smallest admissible q per n; "fixed" uses --q.
        #[arg(long, default_value = "strict")]
        q_rule: String,
        #[arg(long)]
        q: Option<u32>,
        #[command(flatten)]
        numeric: NumericOpts,
        /// CSV path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_pattern_global(text: &str) -> Result<Vec<u16>, Error> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<u16>()
                .map_err(|_| Error::InvalidParams(format!("bad pattern symbol `{s}`")))
        })
        .collect()
}

fn config_from(family: &FamilyOpts, numeric: Option<&NumericOpts>) -> Result<ExperimentConfig, Error> {
    let pattern_global = match &family.pattern_global {
        Some(text) => Some(parse_pattern_global(text)?),
        None => None,
    };
    let mut cfg = ExperimentConfig {
        family: family.family.into(),
        n: family.n,
        q: family.q,
        k: family.k,
        t: family.t,
        deg: family.deg,
        rank_indexed: family.rank_indexed,
        pattern_global,
        pattern_file: family.pattern_file.clone(),
        file: family.file.clone(),
        ..ExperimentConfig::default()
    };
    if let Some(num) = numeric {
        cfg.seed = num.seed;
        cfg.tolerance = num.tolerance;
        cfg.max_iter = num.max_iter;
        cfg.caps = num.caps();
    }
    Ok(cfg)
}

fn run() -> Result<CmdOutcome, Error> {
    let cli = Cli::parse();
    if let Ok(threads) = std::env::var("OA_LAB_THREADS") {
        if let Ok(threads) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(threads.max(1))
                .build_global();
        }
    }
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Commands::Gen { family, out: out_path } => {
            let cfg = config_from(&family, None)?;
            cmd_gen(&cfg, out_path.as_deref(), &mut out)
        }
        Commands::Verify { file } => cmd_verify(&file, &mut out),
        Commands::Lemmas { family, numeric, out: out_path } => {
            let cfg = config_from(&family, Some(&numeric))?;
            cmd_lemmas(&cfg, out_path.as_deref(), &mut out)
        }
        Commands::Dump { family, variant, coordinate, out: out_path } => {
            let cfg = config_from(&family, None)?;
            cmd_dump(&cfg, &variant, coordinate, out_path.as_deref(), &mut out)
        }
        Commands::Scaling { family, k, d, n_list, q_rule, q, numeric, out: out_path } => {
            let rule = match q_rule.as_str() {
                "strict" => QRule::Strict,
                "fixed" => QRule::Fixed(q.ok_or_else(|| {
                    Error::InvalidParams("q-rule fixed needs --q".into())
                })?),
                other => {
                    return Err(Error::InvalidParams(format!("unknown q-rule `{other}`")));
                }
            };
            let cfg = ExperimentConfig {
                seed: numeric.seed,
                tolerance: numeric.tolerance,
                max_iter: numeric.max_iter,
                caps: numeric.caps(),
                ..ExperimentConfig::default()
            };
            let output =
                cmd_scaling(family.into(), k, d, &n_list, rule, &cfg, out_path.as_deref(), &mut out)?;
            if output.any_nonconverged {
                Ok(CmdOutcome::NonConvergence)
            } else {
                Ok(CmdOutcome::Pass)
            }
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(CmdOutcome::Pass) => ExitCode::from(0),
        Ok(CmdOutcome::PropertyViolation) => ExitCode::from(1),
        Ok(CmdOutcome::NonConvergence) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
