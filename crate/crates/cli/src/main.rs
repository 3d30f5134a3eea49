use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use optfwer::harness::{
    hierarchical_apply, reproduce_table, run_experiment, result_rows, write_csv, ExperimentSpec,
    HierarchicalSpec, TableId, TableOptions, DEFAULT_SEED,
};
use optfwer::optimizer::{fit, FittedPolicy, OptimizerConfig};
use optfwer::{decide, AlternativeModel, DualVector, Error};

const EXIT_NONCONVERGED: u8 = 2;
const EXIT_USAGE: u8 = 64;
const EXIT_DATA: u8 = 65;
const EXIT_IO: u8 = 74;

#[derive(Parser)]
#[command(name = "optfwer", version, about = "Power-optimal multiple testing under family-wise error control")]
struct Cli {
    /// Worker threads (defaults to all cores)
    #[arg(long, global = true, env = "OPTFWER_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the multipliers of the optimal policy
    Fit(FitArgs),
    /// Apply a fitted (or freshly fitted) policy to observed p-values
    Apply(ApplyArgs),
    /// Run an experiment described by a JSON spec
    Experiment {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reproduce one of the study tables as CSV
    Table(TableArgs),
    /// Apply the policy within groups at level alpha / G
    Hierarchical {
        #[arg(long)]
        groups: PathBuf,
    },
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// e.g. trunc:-2.0, mixture:2.0, t:4, beta:0.5
    #[arg(long)]
    model: Option<AlternativeModel>,
    #[arg(long, default_value_t = 100_000)]
    n_opt: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

impl ModelArgs {
    fn config(&self) -> OptimizerConfig {
        OptimizerConfig {
            alpha: self.alpha,
            n_opt: self.n_opt,
            seed: self.seed,
            ..Default::default()
        }
    }

    fn model(&self) -> Result<AlternativeModel, Failure> {
        self.model.ok_or_else(|| Failure::usage("--model is required"))
    }
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ApplyArgs {
    /// Fitted policy written by `fit --out`
    #[arg(long, conflicts_with_all = ["k", "model"])]
    mu: Option<PathBuf>,
    #[command(flatten)]
    model: ModelArgs,
    /// Comma-separated p-values
    #[arg(long)]
    p: String,
}

#[derive(Args)]
struct TableArgs {
    #[arg(long)]
    id: String,
    /// Restrict the K grid (comma-separated)
    #[arg(long, value_delimiter = ',')]
    k: Option<Vec<usize>>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value_t = 50_000)]
    n_eval: usize,
    #[arg(long, default_value_t = 100_000)]
    n_opt: usize,
    #[arg(long)]
    out: PathBuf,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure { code: EXIT_USAGE, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Format(_) | Error::Json(_) | Error::Csv(_) => EXIT_DATA,
            Error::Io(_) => EXIT_IO,
            Error::Bracket { .. } => EXIT_NONCONVERGED,
            _ => EXIT_USAGE,
        };
        Failure { code, message: e.to_string() }
    }
}

fn read_input(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure {
        code: EXIT_IO,
        message: format!("cannot read {}: {e}", path.display()),
    })
}

fn parse_p_list(s: &str) -> Result<Vec<f64>, Failure> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| Failure::usage(format!("not a p-value: '{}'", x.trim())))
        })
        .collect()
}

fn cmd_fit(args: &FitArgs) -> Result<u8, Failure> {
    let k = args.model.k.ok_or_else(|| Failure::usage("--k is required"))?;
    let model = args.model.model()?;
    let cfg = args.model.config();
    let result = fit(&model, k, &cfg)?;
    println!(
        "K = {k}, alpha = {}, model = {model}: {} after {} iterations",
        cfg.alpha,
        if result.converged { "converged" } else { "NOT converged" },
        result.iterations
    );
    println!("mu = {:?}", result.mu_hat.as_slice());
    if let Some(out) = &args.out {
        fs::write(out, FittedPolicy::new(&model, &cfg, &result).to_json()?).map_err(Error::from)?;
    }
    Ok(if result.converged { 0 } else { EXIT_NONCONVERGED })
}

fn cmd_apply(args: &ApplyArgs) -> Result<u8, Failure> {
    let p = parse_p_list(&args.p)?;
    let (model, mu): (AlternativeModel, DualVector) = match &args.mu {
        Some(path) => {
            let policy = FittedPolicy::from_json(&read_input(path)?)?;
            (policy.model, policy.mu)
        }
        None => {
            let k = args.model.k.unwrap_or(p.len());
            let model = args.model.model()?;
            let fitted = fit(&model, k, &args.model.config())?;
            if !fitted.converged {
                eprintln!("warning: fit did not converge");
            }
            (model, fitted.mu_hat)
        }
    };
    if p.len() != mu.len() {
        return Err(Failure::usage(format!(
            "policy is for K = {} hypotheses but {} p-values were given",
            mu.len(),
            p.len()
        )));
    }
    let decision = decide(&model, &mu, &p)?;
    for (i, (&x, &r)) in p.iter().zip(&decision.rejected).enumerate() {
        println!("H{}\tp = {x}\t{}", i + 1, if r { "REJECT" } else { "RETAIN" });
    }
    println!("l* = {}", decision.policy.l_star);
    Ok(0)
}

fn cmd_experiment(spec: &Path, out: &Path) -> Result<u8, Failure> {
    let spec = ExperimentSpec::from_json(&read_input(spec)?).map_err(|e| match e {
        Error::Json(_) => Failure { code: EXIT_DATA, message: format!("malformed spec: {e}") },
        e => e.into(),
    })?;
    let result = run_experiment(&spec)?;
    println!("{:<12} {:>8} {:>8} {:>9}", "method", "pi_K", "pi_any", "max FWER");
    for m in &result.methods {
        let fwer = m.max_fwer().map_or(f64::NAN, |e| e.value);
        println!("{:<12} {:>8.4} {:>8.4} {:>9.4}", m.method.name(), m.pi_k.value, m.pi_any.value, fwer);
    }
    write_csv(&result_rows("experiment", &result), out)?;
    let converged = result.fit.as_ref().is_none_or(|f| f.converged);
    Ok(if converged { 0 } else { EXIT_NONCONVERGED })
}

fn cmd_table(args: &TableArgs) -> Result<u8, Failure> {
    let id: TableId = args.id.parse().map_err(|e: Error| Failure::usage(e.to_string()))?;
    let opts = TableOptions {
        seed: args.seed,
        ks: args.k.clone(),
        n_eval: args.n_eval,
        n_opt: args.n_opt,
    };
    let rows = reproduce_table(id, &opts, &args.out)?;
    println!("{}: wrote {} rows to {}", id, rows.len(), args.out.display());
    Ok(0)
}

fn cmd_hierarchical(path: &Path) -> Result<u8, Failure> {
    let spec: HierarchicalSpec = serde_json::from_str(&read_input(path)?)
        .map_err(|e| Failure { code: EXIT_DATA, message: format!("malformed groups file: {e}") })?;
    let cfg = OptimizerConfig {
        n_opt: spec.n_opt,
        seed: spec.seed,
        ..Default::default()
    };
    let mut code = 0;
    for g in hierarchical_apply(&spec.groups, spec.alpha, &cfg)? {
        if !g.converged {
            code = EXIT_NONCONVERGED;
        }
        let flags: Vec<&str> = g
            .decision
            .rejected
            .iter()
            .map(|&r| if r { "REJECT" } else { "RETAIN" })
            .collect();
        println!("{}\talpha = {}\tl* = {}\t{}", g.label, g.alpha, g.decision.policy.l_star, flags.join(" "));
    }
    Ok(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(EXIT_USAGE);
        }
        // only fails if a pool already exists, which cannot happen here
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let outcome = match &cli.command {
        Command::Fit(args) => cmd_fit(args),
        Command::Apply(args) => cmd_apply(args),
        Command::Experiment { spec, out } => cmd_experiment(spec, out),
        Command::Table(args) => cmd_table(args),
        Command::Hierarchical { groups } => cmd_hierarchical(groups),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
