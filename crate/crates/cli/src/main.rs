use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sapenum_core::analysis::{
    amplitude_table_tsv, conjectured_mu, conjectured_xc2, estimate_b_sequence, estimate_xc2, fit_amplitudes,
    RealSeries,
};
use sapenum_core::engine::{auto_moduli, CheckpointError};
use sapenum_core::oracle::brute_force_series_with_budget;
use sapenum_core::series_io::combine_residues;
use sapenum_core::{enumerate, EngineError, EnumerateOptions, ExactSeries, Moduli, Modulus, ResidueSeries};
use twofloat::TwoFloat;

mod manifest;

use manifest::{peak_rss_kib, RunManifest, WidthRecord};

/// Exact enumeration of square-lattice self-avoiding polygons.
#[derive(Parser, Debug)]
#[command(name = "sapenum", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Count polygons up to perimeter 4 * wmax - 2 with the transfer matrix.
    Enumerate(EnumerateArgs),
    /// Count polygons by brute-force backtracking.
    Oracle(OracleArgs),
    /// Series analysis.
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
    /// Reconstruct exact counts from residue files.
    Crt {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Compare two series files; exits 1 at the first differing n.
    Verify { left: PathBuf, right: PathBuf },
}

#[derive(Args, Debug)]
struct EnumerateArgs {
    /// Widest rectangle (rows of vertices).
    #[arg(long)]
    wmax: usize,
    /// `auto` or a comma-separated list such as `2^62,2^62-1`.
    #[arg(long, default_value = "auto")]
    moduli: String,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long)]
    no_prune: bool,
    #[arg(long)]
    kink_simplify: bool,
    /// Directory for per-width checkpoints; existing ones are resumed.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Series file; residues and the manifest are written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Run even if the moduli cannot hold every count.
    #[arg(long)]
    force: bool,
}

#[derive(Args, Debug)]
struct OracleArgs {
    #[arg(long)]
    nmax: u32,
    #[arg(long, default_value_t = sapenum_core::oracle::DEFAULT_BUDGET)]
    budget: u32,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Subcommand, Debug)]
enum AnalyzeCommand {
    /// Amplitudes a_0..a_k from the k + 1 terms ending at n_last.
    FitB {
        series: PathBuf,
        /// `conjectured` or a number.
        #[arg(long, default_value = "conjectured")]
        mu: String,
        #[arg(long)]
        k: usize,
        /// Defaults to the last term.
        #[arg(long)]
        n_last: Option<u32>,
    },
    /// Table of a_0 against 1/n_last for a range of k, as TSV.
    BTable {
        series: PathBuf,
        #[arg(long, default_value = "conjectured")]
        mu: String,
        #[arg(long, default_value_t = 2)]
        k_min: usize,
        #[arg(long, default_value_t = 8)]
        k_max: usize,
    },
    /// Critical point x_c^2 by biased ratio extrapolation.
    EstimateXc { series: PathBuf },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

/// Failure with its process exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        let code = match &e {
            EngineError::InsufficientModuli { .. } => 3,
            EngineError::Checkpoint(CheckpointError::Mismatch(_)) => 4,
            EngineError::Checkpoint(_) => 4,
            EngineError::InvalidConfig(_) => 2,
            _ => 1,
        };
        Failure::new(code, e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Enumerate(args) => cmd_enumerate(args),
        Command::Oracle(args) => cmd_oracle(args),
        Command::Analyze(cmd) => cmd_analyze(cmd),
        Command::Crt { files, format } => cmd_crt(&files, format),
        Command::Verify { left, right } => cmd_verify(&left, &right),
    }
}

fn parse_modulus(text: &str) -> Result<Modulus, Failure> {
    let t = text.trim();
    let value = if let Some(rest) = t.strip_prefix("2^") {
        let (exp, sub) = match rest.split_once('-') {
            Some((e, s)) => (e, s),
            None => (rest, "0"),
        };
        let exp: u32 = exp
            .parse()
            .map_err(|_| Failure::new(2, format!("bad modulus {t:?}")))?;
        let sub: u64 = sub
            .parse()
            .map_err(|_| Failure::new(2, format!("bad modulus {t:?}")))?;
        1u64.checked_shl(exp)
            .filter(|_| exp < 64)
            .and_then(|p| p.checked_sub(sub))
            .ok_or_else(|| Failure::new(2, format!("bad modulus {t:?}")))?
    } else {
        t.parse()
            .map_err(|_| Failure::new(2, format!("bad modulus {t:?}")))?
    };
    Modulus::new(value).map_err(|e| Failure::new(2, e.to_string()))
}

fn parse_moduli(spec: &str, max_degree: u32) -> Result<Moduli, Failure> {
    if spec == "auto" {
        return Ok(auto_moduli(max_degree));
    }
    let list = spec
        .split(',')
        .map(parse_modulus)
        .collect::<Result<Vec<_>, _>>()?;
    Moduli::new(list).map_err(|e| Failure::new(2, e.to_string()))
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Failure::new(1, format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn exact_to_json(series: &ExactSeries) -> String {
    let terms: Vec<serde_json::Value> = series
        .iter()
        .map(|(n, v)| serde_json::json!({ "n": n, "count": v.to_string() }))
        .collect();
    let mut s = serde_json::to_string_pretty(&serde_json::json!({ "terms": terms })).unwrap();
    s.push('\n');
    s
}

fn render_series(series: &ExactSeries, format: Format, comments: &[&str]) -> String {
    match format {
        Format::Text => series.to_text(comments),
        Format::Json => exact_to_json(series),
    }
}

fn sidecar(out: &Path, suffix: &str) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn cmd_enumerate(args: EnumerateArgs) -> Result<(), Failure> {
    if args.wmax < 2 {
        return Err(Failure::new(2, "--wmax must be at least 2"));
    }
    if args.threads == 0 {
        return Err(Failure::new(2, "--threads must be positive"));
    }
    let max_degree = (4 * args.wmax - 2) as u32;
    let moduli = parse_moduli(&args.moduli, max_degree)?;
    let started = Instant::now();
    let opts = EnumerateOptions {
        max_width: args.wmax,
        moduli: moduli.clone(),
        threads: args.threads,
        pruning: !args.no_prune,
        kink_simplification: args.kink_simplify,
        checkpoint_dir: args.checkpoint.clone(),
        force: args.force,
    };
    let result = enumerate(&opts)?;
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    let moduli_text: Vec<String> = moduli.as_slice().iter().map(|m| m.get().to_string()).collect();
    let header = format!(
        "self-avoiding polygons, wmax = {}, n <= {}",
        result.max_width, result.max_degree
    );
    let text = render_series(&result.exact, args.format, &[&header]);
    write_output(args.out.as_deref(), &text)?;

    let manifest = RunManifest {
        command_line: std::env::args().collect(),
        max_width: result.max_width,
        max_degree: result.max_degree,
        moduli: moduli_text,
        threads: args.threads,
        pruning: !args.no_prune,
        kink_simplification: args.kink_simplify,
        checkpoint: args.checkpoint.as_ref().map(|p| p.display().to_string()),
        wall_time_seconds: started.elapsed().as_secs_f64(),
        peak_rss_kib: peak_rss_kib(),
        widths: result.widths.iter().map(WidthRecord::from).collect(),
        warnings: result.warnings.clone(),
    };
    let manifest_json = serde_json::to_string_pretty(&manifest).unwrap() + "\n";
    match &args.out {
        Some(out) => {
            for r in &result.residues {
                let path = sidecar(out, &format!(".residues.{}", r.modulus.get()));
                write_output(Some(&path), &r.to_text(&[&header]))?;
            }
            write_output(Some(&sidecar(out, ".manifest.json")), &manifest_json)?;
        }
        None => eprint!("{manifest_json}"),
    }
    Ok(())
}

fn cmd_oracle(args: OracleArgs) -> Result<(), Failure> {
    let series =
        brute_force_series_with_budget(args.nmax, args.budget).map_err(|e| Failure::new(2, e.to_string()))?;
    let header = format!("self-avoiding polygons by backtracking, n <= {}", args.nmax);
    write_output(
        args.out.as_deref(),
        &render_series(&series, args.format, &[&header]),
    )
}

fn read_series(path: &Path) -> Result<ExactSeries, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::new(1, format!("{}: {e}", path.display())))?;
    ExactSeries::parse(&text).map_err(|e| Failure::new(1, format!("{}: {e}", path.display())))
}

fn parse_mu(text: &str) -> Result<TwoFloat, Failure> {
    if text == "conjectured" {
        return Ok(conjectured_mu());
    }
    let v: f64 = text
        .parse()
        .map_err(|_| Failure::new(2, format!("bad --mu {text:?}")))?;
    if v <= 0.0 {
        return Err(Failure::new(2, "--mu must be positive"));
    }
    Ok(TwoFloat::from(v))
}

fn dd(x: TwoFloat) -> f64 {
    x.hi() + x.lo()
}

fn cmd_analyze(cmd: AnalyzeCommand) -> Result<(), Failure> {
    let analysis = |e: sapenum_core::analysis::AnalysisError| Failure::new(1, e.to_string());
    match cmd {
        AnalyzeCommand::FitB {
            series,
            mu,
            k,
            n_last,
        } => {
            let s = RealSeries::from_exact(&read_series(&series)?);
            let mu = parse_mu(&mu)?;
            let n_last = n_last
                .or(s.max_n())
                .ok_or_else(|| Failure::new(1, "empty series"))?;
            let fit = fit_amplitudes(&s, mu, k, n_last).map_err(analysis)?;
            println!("mu\t{:.17}", dd(fit.mu));
            println!("k\t{}", fit.k);
            println!("n_last\t{n_last}");
            for (i, a) in fit.a.iter().enumerate() {
                println!("a_{i}\t{:.15e}", dd(*a));
            }
            println!("max_relative_residual\t{:.3e}", fit.max_relative_residual);
        }
        AnalyzeCommand::BTable {
            series,
            mu,
            k_min,
            k_max,
        } => {
            if k_min > k_max {
                return Err(Failure::new(2, "--k-min exceeds --k-max"));
            }
            let s = RealSeries::from_exact(&read_series(&series)?);
            let rows = estimate_b_sequence(&s, parse_mu(&mu)?, k_min..=k_max).map_err(analysis)?;
            print!("{}", amplitude_table_tsv(&rows));
        }
        AnalyzeCommand::EstimateXc { series } => {
            let s = RealSeries::from_exact(&read_series(&series)?);
            let (xc2, diag) = estimate_xc2(&s).map_err(analysis)?;
            println!("xc2\t{xc2:.16}");
            println!("conjectured_xc2\t{:.16}", conjectured_xc2());
            println!("difference\t{:.3e}", xc2 - conjectured_xc2());
            println!("spread\t{:.3e}", diag.spread);
            println!("converged\t{}", diag.converged);
            for e in &diag.estimates {
                println!("estimate\torder={}\tn_last={}\t{:.16}", e.order, e.n_last, e.xc2);
            }
        }
    }
    Ok(())
}

fn cmd_crt(files: &[PathBuf], format: Format) -> Result<(), Failure> {
    let mut series = Vec::new();
    for f in files {
        let text = fs::read_to_string(f).map_err(|e| Failure::new(1, format!("{}: {e}", f.display())))?;
        series
            .push(ResidueSeries::parse(&text).map_err(|e| Failure::new(1, format!("{}: {e}", f.display())))?);
    }
    let exact = combine_residues(&series).map_err(|e| Failure::new(1, e.to_string()))?;
    print!("{}", render_series(&exact, format, &[]));
    Ok(())
}

fn cmd_verify(left: &Path, right: &Path) -> Result<(), Failure> {
    let a = read_series(left)?;
    let b = read_series(right)?;
    match a.first_mismatch(&b) {
        None => {
            println!("identical ({} terms)", a.len());
            Ok(())
        }
        Some(n) => Err(Failure::new(1, format!("series differ at n = {n}"))),
    }
}
