//! `selfnorm` command-line front end.
//!
//! Results go to stdout (one value or CSV); diagnostics go to stderr.
//! Exit status: 0 success, 1 runtime error, 2 usage error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use selfnorm::bounds::{
    bound_kolmogorov, bound_kolmogorov_symmetric, bound_switch, bound_wasserstein, bound_wasserstein_symmetric,
    hoeffding_tail,
};
use selfnorm::delta_engine::{
    asym_auto, asym_fin, asym_fin3, asym_inf, asym_stable, delta_laplace, delta_mc, solve_an,
};
use selfnorm::distances::{kolmogorov_between, kolmogorov_to_normal, wasserstein_between, wasserstein_to_normal};
use selfnorm::distributions::{SlowlyVarying, TailModel};
use selfnorm::harness::{self, format_float, ExperimentConfig, Format};
use selfnorm::regression::fit_rate;
use selfnorm::{DeltaEstimate, DistributionSpec, Error, Result, SeededStream, TailTarget};

const DEFAULT_SEED: u64 = 42;

#[derive(Parser, Debug)]
#[command(
    name = "selfnorm",
    version,
    about = "Normal-approximation error of randomly weighted self-normalized sums"
)]
struct Cli {
    /// Worker threads for Monte Carlo work (count; default: all cores). Does not change output.
    #[arg(long, global = true, value_name = "K")]
    threads: Option<usize>,

    /// Master RNG seed (u64, decimal or 0x-hex). Overrides SELFNORM_SEED and config seeds.
    #[arg(long, global = true, value_name = "SEED", value_parser = parse_seed)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run an experiment config and write its rows.
    Simulate(SimulateArgs),
    /// Estimate Δ = n E|Y₁/V_n|^{2γ} for one law and sample size.
    Delta(DeltaArgs),
    /// Evaluate one explicit bound.
    Bound(BoundArgs),
    /// Solve a_n = n L(a_n) for an α = 1 tail.
    AnSolve(AnSolveArgs),
    /// Distance of a sample file to N(0,1) or to a second sample.
    Distance(DistanceArgs),
    /// Log-log slope of a quantity against n.
    RateFit(RateFitArgs),
    /// Cross-check Monte Carlo Δ against the Laplace identity on a grid.
    OracleCheck(OracleArgs),
    /// Render a results CSV as a table and write a plot script.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Experiment config file (key=value lines).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Write rows here instead of stdout.
    #[arg(long, value_name = "PATH")]
    output: Option<PathBuf>,
    /// Output format.
    #[arg(long, value_enum, default_value_t = OutFormat::Csv)]
    format: OutFormat,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
}

#[derive(Copy, Clone, Debug, PartialEq, ValueEnum)]
enum Method {
    Mc,
    Laplace,
    /// First applicable asymptotic (fin3, fin, inf, stable).
    Asym,
    #[value(name = "asym_fin3")]
    AsymFin3,
    #[value(name = "asym_fin")]
    AsymFin,
    #[value(name = "asym_inf")]
    AsymInf,
    #[value(name = "asym_stable")]
    AsymStable,
}

#[derive(Args, Debug)]
struct DeltaArgs {
    /// Law of Y, e.g. normal, cauchy, pareto_sq:alpha=1.5, logpareto1, t:nu=3.
    #[arg(long, value_name = "LAW")]
    y_law: String,
    /// Sample size (count).
    #[arg(long)]
    n: usize,
    /// Half-order γ (dimensionless; 1.5 gives Σ E|δ_k|³).
    #[arg(long, default_value_t = 1.5)]
    gamma: f64,
    /// Estimation method.
    #[arg(long, value_enum, default_value_t = Method::Laplace)]
    method: Method,
    /// Monte Carlo replicates (count, at least 100).
    #[arg(long, default_value_t = 10_000)]
    replicates: usize,
    /// Print a CSV record (value, stderr, method, ...) instead of the bare value.
    #[arg(long)]
    csv: bool,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum BoundKindArg {
    /// 0.56 ξ₃ Δ
    Kolmogorov,
    /// ξ₃ Δ
    Wasserstein,
    /// 0.56 Δ (sign-symmetric Y)
    KolmogorovSymmetric,
    /// Δ (sign-symmetric Y)
    WassersteinSymmetric,
    /// sqrt(2 m₄ / n) for d_W(ψ_n, √n ρ_n)
    Switch,
    /// exp(-(μ - x)² / (2σ²))
    Hoeffding,
}

#[derive(Args, Debug)]
struct BoundArgs {
    #[arg(long, value_enum)]
    kind: BoundKindArg,
    /// ξ₃ = E|X|³ (dimensionless, >= 1).
    #[arg(long)]
    xi3: Option<f64>,
    /// Δ = Σ E|δ_k|³ (dimensionless).
    #[arg(long)]
    delta: Option<f64>,
    /// m₄ = EX⁴ (dimensionless, >= 1).
    #[arg(long)]
    m4: Option<f64>,
    /// Sample size (count).
    #[arg(long)]
    n: Option<usize>,
    /// Mean μ of the sum (hoeffding).
    #[arg(long)]
    mu: Option<f64>,
    /// Variance proxy σ² of the sum (hoeffding).
    #[arg(long)]
    sigma2: Option<f64>,
    /// Threshold x with 0 < x < μ (hoeffding).
    #[arg(long)]
    x: Option<f64>,
    #[arg(long)]
    csv: bool,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Ell {
    /// ℓ = 1, L(x) = 1 + log x: a_n ~ n log n
    One,
    /// ℓ = 1/log x, L(x) = log log x: a_n ~ n log log n
    Loglog,
}

#[derive(Args, Debug)]
#[command(group = clap::ArgGroup::new("tail").required(true).args(["ell", "y_law"]))]
struct AnSolveArgs {
    /// Slowly varying part of the tail.
    #[arg(long, value_enum)]
    ell: Option<Ell>,
    /// Use the Y² tail model of this law instead.
    #[arg(long, value_name = "LAW")]
    y_law: Option<String>,
    /// Sample size (count).
    #[arg(long)]
    n: usize,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum DistanceKindArg {
    Kolmogorov,
    Wasserstein,
    Both,
}

#[derive(Args, Debug)]
struct DistanceArgs {
    /// Sample file: one real per line, `#` comments allowed.
    #[arg(long, value_name = "PATH")]
    sample: PathBuf,
    /// Compare with a second sample instead of N(0,1).
    #[arg(long, value_name = "PATH")]
    against: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = DistanceKindArg::Both)]
    kind: DistanceKindArg,
}

#[derive(Args, Debug)]
struct RateFitArgs {
    /// Results CSV written by `simulate`.
    #[arg(long, value_name = "PATH", requires = "quantity", conflicts_with_all = ["ns", "values"])]
    input: Option<PathBuf>,
    /// Quantity column value to fit, e.g. delta_mc.
    #[arg(long)]
    quantity: Option<String>,
    /// Comma-separated sample sizes (counts).
    #[arg(long, value_delimiter = ',', requires = "values")]
    ns: Vec<usize>,
    /// Comma-separated positive values, one per n.
    #[arg(long, value_delimiter = ',')]
    values: Vec<f64>,
}

#[derive(Args, Debug)]
struct OracleArgs {
    /// Laws to check, separated by `;` (law specs may contain commas).
    #[arg(
        long,
        default_value = "pareto_sq:alpha=1.2;pareto_sq:alpha=1.5;logpareto1;cauchy;normal",
        value_name = "LAWS"
    )]
    laws: String,
    /// Sample sizes (counts, comma separated).
    #[arg(long, value_delimiter = ',', default_values_t = [2usize, 20, 100])]
    ns: Vec<usize>,
    /// Half-orders γ (comma separated, each > 1).
    #[arg(long, value_delimiter = ',', default_values_t = [1.2f64, 1.5])]
    gammas: Vec<f64>,
    /// Monte Carlo replicates per cell (count).
    #[arg(long, default_value_t = 10_000)]
    replicates: usize,
    /// Pass threshold in Monte Carlo standard errors.
    #[arg(long, default_value_t = 4.0)]
    tolerance_se: f64,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Results CSV written by `simulate`.
    #[arg(long, value_name = "PATH")]
    input: PathBuf,
    /// Where to write the plot script (default: <input stem>_plot.py).
    #[arg(long, value_name = "PATH")]
    plot_script: Option<PathBuf>,
}

fn parse_seed(s: &str) -> std::result::Result<u64, String> {
    let r = match s.strip_prefix("0x") {
        Some(h) => u64::from_str_radix(h, 16),
        None => s.parse(),
    };
    r.map_err(|_| format!("'{s}' is not a u64 seed"))
}

/// 15 significant digits, so 0.56 * 0.1 prints as 0.056.
fn show(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    let rounded: f64 = format!("{v:.14e}").parse().expect("own formatting");
    rounded.to_string()
}

fn law(text: &str) -> Result<DistributionSpec> {
    text.parse()
}

fn seed_or_env(flag: Option<u64>) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(harness::SEED_ENV) {
        Ok(v) => parse_seed(v.trim()).map_err(|m| Error::Config(format!("{}: {m}", harness::SEED_ENV))),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

struct Out {
    text: String,
}

impl Out {
    fn new() -> Self {
        Self { text: String::new() }
    }

    fn line(&mut self, s: impl AsRef<str>) {
        self.text.push_str(s.as_ref());
        self.text.push('\n');
    }
}

fn simulate(cli: &Cli, a: &SimulateArgs, out: &mut Out) -> Result<()> {
    let mut cfg = ExperimentConfig::load(&a.config)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let rows = harness::run_experiment(&cfg)?;
    let format = match a.format {
        OutFormat::Csv => Format::Csv,
        OutFormat::Json => Format::Json,
    };
    match &a.output {
        Some(p) => {
            harness::emit(&rows, format, p)?;
            eprintln!("wrote {} rows to {}", rows.len(), p.display());
        }
        None => match format {
            Format::Csv => out.text.push_str(&harness::to_csv(&rows)?),
            Format::Json => out.line(harness::to_json(&rows)?),
        },
    }
    Ok(())
}

fn delta(cli: &Cli, a: &DeltaArgs, out: &mut Out) -> Result<()> {
    let y = law(&a.y_law)?;
    let (n, g) = (a.n, a.gamma);
    let est: DeltaEstimate = match a.method {
        Method::Mc => {
            let seed = seed_or_env(cli.seed)?;
            delta_mc(&y, n, g, a.replicates, harness::cell_stream(seed, n, 1))?
        }
        Method::Laplace => delta_laplace(&y, n, g)?,
        Method::Asym => asym_auto(&y, n, g)?,
        Method::AsymFin3 => asym_fin3(&y, n, 2.0 * g)?,
        Method::AsymFin => asym_fin(&y, n, g)?,
        Method::AsymInf => asym_inf(&y, n, g)?,
        Method::AsymStable => asym_stable(&y, g)?,
    };
    if est.rescaled {
        eprintln!("note: EY² != 1, the asymptotic uses Y/σ");
    }
    if a.csv {
        out.line("y_law,n,gamma,method,value,stderr,replicates");
        out.line(format!(
            "\"{y}\",{n},{},{},{},{},{}",
            format_float(est.gamma),
            est.method.name(),
            format_float(est.value),
            format_float(est.stderr),
            est.replicates
        ));
    } else {
        if est.stderr > 0.0 {
            eprintln!(
                "{} ± {} ({} replicates)",
                show(est.value),
                show(est.stderr),
                est.replicates
            );
        }
        out.line(show(est.value));
    }
    Ok(())
}

fn need(v: Option<f64>, flag: &str, kind: &str) -> Result<f64> {
    v.ok_or_else(|| Error::Config(format!("--kind {kind} needs --{flag}")))
}

fn bound(a: &BoundArgs, out: &mut Out) -> Result<()> {
    let name = a
        .kind
        .to_possible_value()
        .expect("no skipped variants")
        .get_name()
        .to_string();
    let k = name.as_str();
    let r = match a.kind {
        BoundKindArg::Kolmogorov => bound_kolmogorov(need(a.xi3, "xi3", k)?, need(a.delta, "delta", k)?)?,
        BoundKindArg::Wasserstein => bound_wasserstein(need(a.xi3, "xi3", k)?, need(a.delta, "delta", k)?)?,
        BoundKindArg::KolmogorovSymmetric => bound_kolmogorov_symmetric(need(a.delta, "delta", k)?)?,
        BoundKindArg::WassersteinSymmetric => bound_wasserstein_symmetric(need(a.delta, "delta", k)?)?,
        BoundKindArg::Switch => {
            let n = a.n.ok_or_else(|| Error::Config("--kind switch needs --n".into()))?;
            bound_switch(need(a.m4, "m4", k)?, n)?
        }
        BoundKindArg::Hoeffding => {
            hoeffding_tail(need(a.mu, "mu", k)?, need(a.sigma2, "sigma2", k)?, need(a.x, "x", k)?)?
        }
    };
    if !r.valid {
        eprintln!("warning: outside the regime n / log n >= 8 m₄; value is not a certified bound");
    }
    if a.csv {
        out.line("kind,value,valid");
        out.line(format!("{k},{},{}", format_float(r.value), r.valid));
    } else {
        out.line(show(r.value));
    }
    Ok(())
}

fn an_solve(a: &AnSolveArgs, out: &mut Out) -> Result<()> {
    let tail = match (&a.y_law, a.ell) {
        (Some(text), _) => law(text)?.tail_model_for(TailTarget::Square)?,
        (None, Some(Ell::One)) => TailModel {
            l_offset: 1.0,
            ..TailModel::new(1.0, TailTarget::Square, 1.0, SlowlyVarying::Constant(1.0))
        },
        (None, Some(Ell::Loglog)) => TailModel::new(
            1.0,
            TailTarget::Square,
            std::f64::consts::E,
            SlowlyVarying::InvLogPow { c: 1.0, k: 1.0 },
        ),
        (None, None) => unreachable!("clap requires one of --ell, --y-law"),
    };
    let sol = solve_an(&tail, a.n)?;
    let nf = a.n as f64;
    let (label, reference) = match (&a.y_law, a.ell) {
        (None, Some(Ell::One)) => ("ratio_to_n_log_n", nf * nf.ln()),
        (None, Some(Ell::Loglog)) => ("ratio_to_n_loglog_n", nf * nf.ln().ln()),
        _ => ("ratio_to_n", nf),
    };
    out.line(format!("n,a_n,residual,iterations,{label}"));
    out.line(format!(
        "{},{},{},{},{}",
        a.n,
        format_float(sol.a_n),
        format_float(sol.residual),
        sol.iterations,
        format_float(sol.a_n / reference)
    ));
    Ok(())
}

fn read_sample(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut v = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let x: f64 = line.parse().map_err(|_| Error::Parse {
            context: path.display().to_string(),
            line: i + 1,
            msg: format!("'{line}' is not a number"),
        })?;
        if x.is_nan() {
            return Err(Error::Parse {
                context: path.display().to_string(),
                line: i + 1,
                msg: "NaN is not a sample value".into(),
            });
        }
        v.push(x);
    }
    Ok(v)
}

fn distance(a: &DistanceArgs, out: &mut Out) -> Result<()> {
    let s = read_sample(&a.sample)?;
    let other = a.against.as_deref().map(read_sample).transpose()?;
    let want_k = matches!(a.kind, DistanceKindArg::Kolmogorov | DistanceKindArg::Both);
    let want_w = matches!(a.kind, DistanceKindArg::Wasserstein | DistanceKindArg::Both);
    out.line("kind,reference,value,m,mc_error_hint");
    let reference = if other.is_some() { "sample" } else { "normal" };
    let mut emit = |kind: &str, d: selfnorm::DistanceEstimate64| {
        out.line(format!(
            "{kind},{reference},{},{},{}",
            format_float(d.value),
            d.m,
            d.mc_error_hint.map(format_float).unwrap_or_default()
        ));
    };
    if want_k {
        let d = match &other {
            Some(b) => kolmogorov_between(&s, b)?,
            None => kolmogorov_to_normal(&s)?,
        };
        emit("kolmogorov", d);
    }
    if want_w {
        let d = match &other {
            Some(b) => wasserstein_between(&s, b)?,
            None => wasserstein_to_normal(&s)?,
        };
        emit("wasserstein", d);
    }
    Ok(())
}

fn rate_fit(a: &RateFitArgs, out: &mut Out) -> Result<()> {
    let (ns, values) = match (&a.input, &a.quantity) {
        (Some(p), Some(q)) => {
            let rows: Vec<_> = harness::read_csv(p)?.into_iter().filter(|r| &r.quantity == q).collect();
            if rows.is_empty() {
                return Err(Error::Config(format!("no rows with quantity '{q}' in {}", p.display())));
            }
            (
                rows.iter().map(|r| r.n).collect::<Vec<_>>(),
                rows.iter().map(|r| r.value).collect::<Vec<_>>(),
            )
        }
        _ => {
            if a.ns.len() != a.values.len() {
                return Err(Error::LengthMismatch(a.ns.len(), a.values.len()));
            }
            (a.ns.clone(), a.values.clone())
        }
    };
    let fit = fit_rate(&ns, &values)?;
    out.line("slope,intercept,r_squared,slope_stderr,n_min,n_max,points");
    out.line(format!(
        "{},{},{},{},{},{},{}",
        format_float(fit.slope),
        format_float(fit.intercept),
        format_float(fit.r_squared),
        format_float(fit.slope_stderr),
        fit.n_range.0,
        fit.n_range.1,
        fit.points
    ));
    Ok(())
}

/// Returns whether every cell passed.
fn oracle_check(cli: &Cli, a: &OracleArgs, out: &mut Out) -> Result<bool> {
    let seed = seed_or_env(cli.seed)?;
    let laws = a.laws.split(';').map(law).collect::<Result<Vec<_>>>()?;
    out.line("y_law,n,gamma,laplace,mc,mc_stderr,z,pass");
    let mut all = true;
    for (li, y) in laws.iter().enumerate() {
        for &n in &a.ns {
            for &g in &a.gammas {
                let lap = delta_laplace(y, n, g)?;
                let stream = SeededStream::new(seed, selfnorm::rng::hash64(&[li as u64, n as u64, g.to_bits()]));
                let mc = delta_mc(y, n, g, a.replicates, stream)?;
                let z = (mc.value - lap.value) / mc.stderr;
                let pass = z.abs() <= a.tolerance_se || (mc.stderr == 0.0 && mc.value == lap.value);
                all &= pass;
                out.line(format!(
                    "\"{y}\",{n},{},{},{},{},{},{}",
                    format_float(g),
                    format_float(lap.value),
                    format_float(mc.value),
                    format_float(mc.stderr),
                    format_float(z),
                    if pass { "PASS" } else { "FAIL" }
                ));
            }
        }
    }
    Ok(all)
}

fn report(a: &ReportArgs, out: &mut Out) -> Result<()> {
    let rows = harness::read_csv(&a.input)?;
    out.text.push_str(&harness::render_table(&rows));
    let script_path = a.plot_script.clone().unwrap_or_else(|| {
        let stem = a.input.file_stem().and_then(|s| s.to_str()).unwrap_or("results");
        a.input.with_file_name(format!("{stem}_plot.py"))
    });
    let script = harness::plot_script(&a.input.display().to_string());
    fs::write(&script_path, script).map_err(|source| Error::Io {
        path: script_path.clone(),
        source,
    })?;
    eprintln!("plot script written to {}", script_path.display());
    Ok(())
}

fn run(cli: &Cli, out: &mut Out) -> Result<bool> {
    match &cli.command {
        Command::Simulate(a) => simulate(cli, a, out)?,
        Command::Delta(a) => delta(cli, a, out)?,
        Command::Bound(a) => bound(a, out)?,
        Command::AnSolve(a) => an_solve(a, out)?,
        Command::Distance(a) => distance(a, out)?,
        Command::RateFit(a) => rate_fit(a, out)?,
        Command::OracleCheck(a) => return oracle_check(cli, a, out),
        Command::Report(a) => report(a, out)?,
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(k) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k.max(1)).build_global() {
            eprintln!("error: cannot start {k} worker threads: {e}");
            return ExitCode::from(1);
        }
    }
    let mut out = Out::new();
    let result = run(&cli, &mut out);
    let mut stdout = std::io::stdout().lock();
    // partial results are still useful for oracle-check failures
    let _ = stdout.write_all(out.text.as_bytes());
    let _ = stdout.flush();
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: some oracle cells failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
