//! Command-line front end.
//!
//! Every command writes CSV (or JSON for `estimate`) preceded by `#` lines
//! recording the version, the command and every resolved parameter. Output
//! goes to `--output`, else to `$SCALEWISE_OUT_DIR/<command>.<ext>`, else to
//! stdout. Failures print a one-line JSON record on stderr and exit with 2
//! (invalid input), 3 (numerical failure) or 4 (I/O).

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::error::Error;
use crate::estimators::{estimate, Method};
use crate::fisher;
use crate::gaussianization::{distance_rows, l2_distance_direct, log_log_slope};
use crate::increment_law::{self, sample_increments, IncrementSeries, ModelParams, RegimeTag, SamplingScheme};
use crate::montecarlo::{run_variance_study, write_study_csv, ExperimentConfig};
use crate::nonhomogeneous::{self, IntensityModel};
use crate::report::fmt_f64;

pub const OUT_DIR_ENV: &str = "SCALEWISE_OUT_DIR";

pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "scalewise", version, about = "Likelihood, Fisher information and estimators for a ±1 compound Poisson process")]
pub struct Cli {
    /// Output file; defaults to $SCALEWISE_OUT_DIR/<command>.<ext> or stdout.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,

    /// Worker threads for parallel commands (0 = all cores). Does not affect results.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one path of increments.
    Simulate(SimulateArgs),
    /// Tabulate the increment pmf at scale x = theta*delta.
    Pmf(PmfArgs),
    /// Tabulate psi(x) and the deficiency ratio on a log grid.
    FisherCurve(CurveArgs),
    /// Tabulate the deficiency ratio and locate its maximum.
    DeficiencyCurve(CurveArgs),
    /// Estimate theta from an increments CSV.
    Estimate(EstimateArgs),
    /// Monte Carlo variance study across sampling steps.
    McStudy(StudyArgs),
    /// L2 distance between the jittered law and its Gaussian limit.
    GaussDistance(GaussArgs),
    /// Fisher information under a time-varying intensity.
    NonhomogInfo(NonhomogArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub theta: f64,
    /// Observation horizon.
    #[arg(long = "T", conflicts_with = "n", required_unless_present = "n")]
    pub horizon: Option<f64>,
    /// Number of increments (sets T = n*delta).
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub delta: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Intensity shape: constant, linear or sine.
    #[arg(long, default_value = "constant")]
    pub model: String,
}

#[derive(Debug, Args)]
pub struct PmfArgs {
    /// Scale x = theta*delta.
    #[arg(long)]
    pub x: f64,
    /// Largest |k| tabulated; defaults to the truncation order at x.
    #[arg(long)]
    pub k_max: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    #[arg(long, default_value_t = 0.05)]
    pub x_min: f64,
    #[arg(long, default_value_t = 10.0)]
    pub x_max: f64,
    #[arg(long, default_value_t = 200)]
    pub points: usize,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// qv, os (one-step) or mle.
    #[arg(long)]
    pub method: String,
    /// Increments CSV (`index,increment`).
    #[arg(long)]
    pub input: PathBuf,
    /// Horizon; read from the input header when omitted.
    #[arg(long = "T")]
    pub horizon: Option<f64>,
    /// Step; read from the input header when omitted.
    #[arg(long)]
    pub delta: Option<f64>,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    #[arg(long, default_value_t = 1.0)]
    pub theta: f64,
    /// Comma-separated, strictly increasing steps.
    #[arg(long, value_delimiter = ',', default_values_t = [0.01, 0.6, 50.0])]
    pub deltas: Vec<f64>,
    /// Increments per replica.
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    #[arg(long, default_value_t = 1000)]
    pub replicas: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated subset of qv, os, mle.
    #[arg(long, value_delimiter = ',', default_values_t = ["qv".to_string(), "os".to_string()])]
    pub estimators: Vec<String>,
}

#[derive(Debug, Args)]
pub struct GaussArgs {
    #[arg(long, default_value_t = 1.0)]
    pub theta: f64,
    #[arg(long, value_delimiter = ',', default_values_t = [100.0, 300.0, 1000.0, 3000.0, 10000.0])]
    pub deltas: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct NonhomogArgs {
    /// constant, linear or sine.
    #[arg(long, default_value = "linear")]
    pub model: String,
    #[arg(long)]
    pub theta: f64,
    #[arg(long = "T")]
    pub horizon: f64,
    #[arg(long)]
    pub delta: f64,
}

/// Rendered output plus the file extension it should carry.
struct Output {
    body: Vec<u8>,
    ext: &'static str,
}

fn header(out: &mut String, command: &str, params: &[(&str, String)]) {
    let _ = writeln!(out, "# scalewise {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(out, "# command: {command}");
    for (k, v) in params {
        let _ = writeln!(out, "# {k}={v}");
    }
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn positive(name: &str, v: f64) -> Result<f64, Error> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::Invalid(format!("--{name} must be positive, got {v}")))
    }
}

fn curve_grid(a: &CurveArgs) -> Result<Vec<f64>, Error> {
    positive("x-min", a.x_min)?;
    positive("x-max", a.x_max)?;
    if a.x_max <= a.x_min {
        return Err(Error::Invalid("--x-max must exceed --x-min".into()));
    }
    if a.points < 2 {
        return Err(Error::Invalid("--points must be at least 2".into()));
    }
    Ok(fisher::log_grid(a.x_min, a.x_max, a.points))
}

fn simulate(a: &SimulateArgs) -> Result<Output, Error> {
    positive("theta", a.theta)?;
    positive("delta", a.delta)?;
    let scheme = match (a.n, a.horizon) {
        (Some(n), _) => SamplingScheme::with_count(n, a.delta)?,
        (None, Some(t)) => SamplingScheme::new(positive("T", t)?, a.delta)?,
        (None, None) => unreachable!("clap requires one of --T and --n"),
    };
    let model = IntensityModel::by_name(&a.model, a.theta)?;
    let series = if a.model == "constant" {
        sample_increments(&ModelParams::new(a.theta)?, &scheme, a.seed)
    } else {
        nonhomogeneous::sample_increments_nh(&model, a.theta, &scheme, a.seed)?
    };
    let mut out = String::new();
    header(
        &mut out,
        "simulate",
        &[
            ("theta", a.theta.to_string()),
            ("T", scheme.horizon.to_string()),
            ("delta", scheme.step.to_string()),
            ("n", scheme.count.to_string()),
            ("model", a.model.clone()),
            ("seed", a.seed.to_string()),
        ],
    );
    let mut body = out.into_bytes();
    series.write_csv(&mut body)?;
    Ok(Output { body, ext: "csv" })
}

fn pmf_table(a: &PmfArgs) -> Result<Output, Error> {
    positive("x", a.x)?;
    let k_max = a.k_max.unwrap_or_else(|| increment_law::truncation_order(a.x));
    let mut out = String::new();
    header(&mut out, "pmf", &[("x", a.x.to_string()), ("k_max", k_max.to_string())]);
    out.push_str("k,pmf\n");
    let k_max = k_max as i64;
    for k in -k_max..=k_max {
        let _ = writeln!(out, "{k},{}", fmt_f64(increment_law::pmf(a.x, k)?));
    }
    Ok(Output { body: out.into_bytes(), ext: "csv" })
}

fn fisher_curve(a: &CurveArgs) -> Result<Output, Error> {
    let pts = fisher::info_curve(&curve_grid(a)?)?;
    let mut out = String::new();
    header(
        &mut out,
        "fisher-curve",
        &[("x_min", a.x_min.to_string()), ("x_max", a.x_max.to_string()), ("points", a.points.to_string())],
    );
    out.push_str("x,psi,x_psi,two_x2_psi,ratio\n");
    for p in pts {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            fmt_f64(p.x),
            fmt_f64(p.psi),
            fmt_f64(p.x * p.psi),
            fmt_f64(2.0 * p.x * p.x * p.psi),
            fmt_f64(p.ratio)
        );
    }
    Ok(Output { body: out.into_bytes(), ext: "csv" })
}

fn deficiency_curve(a: &CurveArgs) -> Result<Output, Error> {
    let pts = fisher::info_curve(&curve_grid(a)?)?;
    let best = fisher::max_deficiency(a.x_min, a.x_max, 1e-6)?;
    let mut out = String::new();
    header(
        &mut out,
        "deficiency-curve",
        &[
            ("x_min", a.x_min.to_string()),
            ("x_max", a.x_max.to_string()),
            ("points", a.points.to_string()),
            ("x_star", fmt_f64(best.x_star)),
            ("ratio_star", fmt_f64(best.ratio_star)),
        ],
    );
    out.push_str("x,ratio\n");
    for p in pts {
        let _ = writeln!(out, "{},{}", fmt_f64(p.x), fmt_f64(p.ratio));
    }
    Ok(Output { body: out.into_bytes(), ext: "csv" })
}

/// `key=value` pairs from the `#` lines of a CSV.
fn header_params(text: &str) -> Vec<(String, String)> {
    text.lines()
        .take_while(|l| l.starts_with('#') || l.trim().is_empty())
        .filter_map(|l| l.trim_start_matches('#').trim().split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}

fn header_f64(params: &[(String, String)], key: &str) -> Result<Option<f64>, Error> {
    params
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.parse::<f64>().map_err(|_| Error::Invalid(format!("header {key}=`{v}` is not a number"))))
        .transpose()
}

fn estimate_cmd(a: &EstimateArgs) -> Result<Output, Error> {
    let method =
        Method::parse(&a.method).ok_or_else(|| Error::Invalid(format!("unknown method `{}`", a.method)))?;
    let text = std::fs::read_to_string(&a.input)?;
    let hdr = header_params(&text);
    let horizon = match a.horizon {
        Some(t) => t,
        None => header_f64(&hdr, "T")?.ok_or_else(|| Error::Invalid("--T missing and not in input header".into()))?,
    };
    let delta = match a.delta {
        Some(d) => d,
        None => header_f64(&hdr, "delta")?
            .ok_or_else(|| Error::Invalid("--delta missing and not in input header".into()))?,
    };
    let scheme = SamplingScheme::new(positive("T", horizon)?, positive("delta", delta)?)?;
    let series = IncrementSeries::read_csv(text.as_bytes(), scheme)?;
    let result = estimate(method, &series)?;
    let record = json!({
        "provenance": {
            "version": env!("CARGO_PKG_VERSION"),
            "command": "estimate",
            "method": method,
            "input": a.input.display().to_string(),
            "T": horizon,
            "delta": delta,
            "n": series.len(),
        },
        "result": result,
    });
    let mut body = serde_json::to_vec_pretty(&record).map_err(|e| Error::Invalid(e.to_string()))?;
    body.push(b'\n');
    Ok(Output { body, ext: "json" })
}

fn mc_study(a: &StudyArgs) -> Result<Output, Error> {
    let estimators = a
        .estimators
        .iter()
        .map(|s| Method::parse(s).ok_or_else(|| Error::Invalid(format!("unknown estimator `{s}`"))))
        .collect::<Result<Vec<_>, _>>()?;
    let config = ExperimentConfig {
        theta: a.theta,
        delta_grid: a.deltas.clone(),
        n_per_scheme: a.n,
        replicas: a.replicas,
        seed: a.seed,
        estimators,
    };
    config.validate()?;
    let rows = run_variance_study(&config)?;
    let flagged: Vec<String> =
        rows.iter().filter(|r| r.flagged).map(|r| format!("{}:{}", r.delta, r.estimator)).collect();
    let mut out = String::new();
    header(
        &mut out,
        "mc-study",
        &[
            ("theta", a.theta.to_string()),
            ("deltas", join(&a.deltas)),
            ("n", a.n.to_string()),
            ("replicas", a.replicas.to_string()),
            ("seed", a.seed.to_string()),
            ("estimators", join(&config.estimators)),
            ("flagged", flagged.join(",")),
        ],
    );
    let mut body = out.into_bytes();
    write_study_csv(&rows, &mut body)?;
    Ok(Output { body, ext: "csv" })
}

fn gauss_distance(a: &GaussArgs) -> Result<Output, Error> {
    positive("theta", a.theta)?;
    if a.deltas.is_empty() {
        return Err(Error::Invalid("--deltas is empty".into()));
    }
    for &d in &a.deltas {
        positive("deltas", d)?;
    }
    let rows = distance_rows(a.theta, &a.deltas)?;
    let slope = if rows.len() >= 2 {
        fmt_f64(log_log_slope(&rows.iter().map(|r| (r.delta, r.l2_direct)).collect::<Vec<_>>()))
    } else {
        "NaN".into()
    };
    let mut out = String::new();
    header(
        &mut out,
        "gauss-distance",
        &[("theta", a.theta.to_string()), ("deltas", join(&a.deltas)), ("log_log_slope", slope)],
    );
    out.push_str("delta,l2_direct,l2_spectral,delta_times_l2,small_scale\n");
    for r in rows {
        let small = l2_distance_direct(a.theta, r.delta)?.small_scale;
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            fmt_f64(r.delta),
            fmt_f64(r.l2_direct),
            fmt_f64(r.l2_spectral),
            fmt_f64(r.delta_times_l2()),
            small
        );
    }
    Ok(Output { body: out.into_bytes(), ext: "csv" })
}

fn nonhomog_info(a: &NonhomogArgs) -> Result<Output, Error> {
    positive("theta", a.theta)?;
    let model = IntensityModel::by_name(&a.model, a.theta)?;
    let scheme = SamplingScheme::new(positive("T", a.horizon)?, positive("delta", a.delta)?)?;
    let mut out = String::new();
    header(
        &mut out,
        "nonhomog-info",
        &[
            ("model", a.model.clone()),
            ("theta", a.theta.to_string()),
            ("T", a.horizon.to_string()),
            ("delta", a.delta.to_string()),
            ("mean_intensity", fmt_f64(nonhomogeneous::mean_intensity(&model, a.theta)?)),
        ],
    );
    out.push_str("regime,info\n");
    for regime in RegimeTag::ALL {
        let v = nonhomogeneous::info_nonhomog(regime, &model, a.theta, &scheme)?;
        let _ = writeln!(out, "{regime},{}", fmt_f64(v));
    }
    Ok(Output { body: out.into_bytes(), ext: "csv" })
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Simulate(_) => "simulate",
        Command::Pmf(_) => "pmf",
        Command::FisherCurve(_) => "fisher-curve",
        Command::DeficiencyCurve(_) => "deficiency-curve",
        Command::Estimate(_) => "estimate",
        Command::McStudy(_) => "mc-study",
        Command::GaussDistance(_) => "gauss-distance",
        Command::NonhomogInfo(_) => "nonhomog-info",
    }
}

fn produce(command: &Command) -> Result<Output, Error> {
    match command {
        Command::Simulate(a) => simulate(a),
        Command::Pmf(a) => pmf_table(a),
        Command::FisherCurve(a) => fisher_curve(a),
        Command::DeficiencyCurve(a) => deficiency_curve(a),
        Command::Estimate(a) => estimate_cmd(a),
        Command::McStudy(a) => mc_study(a),
        Command::GaussDistance(a) => gauss_distance(a),
        Command::NonhomogInfo(a) => nonhomog_info(a),
    }
}

/// Process-level context: where unnamed output goes and where records are
/// written.
pub struct Io<'a> {
    pub stdout: &'a mut dyn std::io::Write,
    pub stderr: &'a mut dyn std::io::Write,
    /// Directory used when `--output` is absent.
    pub out_dir: Option<PathBuf>,
}

fn destination(cli: &Cli, out_dir: Option<&Path>, ext: &str) -> Option<PathBuf> {
    cli.output
        .clone()
        .or_else(|| out_dir.map(|d| d.join(format!("{}.{ext}", command_name(&cli.command)))))
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) => EXIT_IO,
        Error::Csv(c) if c.is_io_error() => EXIT_IO,
        e if e.is_numeric() => EXIT_NUMERIC,
        _ => EXIT_VALIDATION,
    }
}

fn kind(code: i32) -> &'static str {
    match code {
        EXIT_IO => "io",
        EXIT_NUMERIC => "numeric",
        _ => "validation",
    }
}

fn report_error(stderr: &mut dyn std::io::Write, command: &str, code: i32, message: &str) {
    let rec = json!({ "error": kind(code), "exit_code": code, "command": command, "message": message });
    let _ = writeln!(stderr, "{rec}");
}

/// Runs an already parsed command line and returns the process exit code.
pub fn dispatch(cli: &Cli, io: &mut Io<'_>) -> i32 {
    let name = command_name(&cli.command);
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build() {
        Ok(p) => p,
        Err(e) => {
            report_error(io.stderr, name, EXIT_VALIDATION, &e.to_string());
            return EXIT_VALIDATION;
        }
    };
    let result = pool.install(|| produce(&cli.command)).and_then(|out| {
        match destination(cli, io.out_dir.as_deref(), out.ext) {
            Some(path) => std::fs::write(&path, &out.body)?,
            None => io.stdout.write_all(&out.body)?,
        }
        Ok(())
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            let code = exit_code(&e);
            report_error(io.stderr, name, code, &e.to_string());
            code
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_with<I, T>(args: I, io: &mut Io<'_>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => dispatch(&cli, io),
        Err(e) if !e.use_stderr() => {
            let _ = write!(io.stdout, "{}", e.render());
            0
        }
        Err(e) => {
            let msg = e.to_string();
            report_error(io.stderr, "", EXIT_VALIDATION, msg.lines().next().unwrap_or_default());
            let _ = write!(io.stderr, "{}", e.render());
            EXIT_VALIDATION
        }
    }
}

/// [`run_with`] on the process streams, with the output directory taken from
/// `$SCALEWISE_OUT_DIR`.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let (mut out, mut err) = (std::io::stdout().lock(), std::io::stderr().lock());
    let mut io = Io {
        stdout: &mut out,
        stderr: &mut err,
        out_dir: std::env::var_os(OUT_DIR_ENV).filter(|d| !d.is_empty()).map(PathBuf::from),
    };
    run_with(args, &mut io)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Captured {
        code: i32,
        stdout: String,
        stderr: String,
    }

    impl Captured {
        fn error_record(&self) -> serde_json::Value {
            serde_json::from_str(self.stderr.lines().next().unwrap()).expect("stderr starts with a JSON record")
        }

        fn json(&self) -> serde_json::Value {
            serde_json::from_str(&self.stdout).unwrap()
        }
    }

    fn call(args: &[&str], out_dir: Option<&Path>) -> Captured {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let mut io = Io { stdout: &mut out, stderr: &mut err, out_dir: out_dir.map(Path::to_path_buf) };
        let code = run_with(std::iter::once("scalewise").chain(args.iter().copied()), &mut io);
        Captured { code, stdout: String::from_utf8(out).unwrap(), stderr: String::from_utf8(err).unwrap() }
    }

    #[test]
    fn header_keys_are_parsed() {
        let text = "# scalewise 0.1.0\n# command: simulate\n# T=12.5\n# delta=0.5\nindex,increment\n1,0\n";
        let h = header_params(text);
        assert_eq!(header_f64(&h, "T").unwrap(), Some(12.5));
        assert_eq!(header_f64(&h, "delta").unwrap(), Some(0.5));
        assert_eq!(header_f64(&h, "theta").unwrap(), None);
    }

    #[test]
    fn exit_codes_by_error_kind() {
        assert_eq!(exit_code(&Error::Invalid("x".into())), EXIT_VALIDATION);
        assert_eq!(exit_code(&Error::Boundary), EXIT_NUMERIC);
        assert_eq!(exit_code(&Error::Io(std::io::Error::other("x"))), EXIT_IO);
    }

    #[test]
    fn validation_failures() {
        let c = call(&["pmf", "--x", "1", "--bogus", "2"], None);
        assert_eq!(c.code, EXIT_VALIDATION);
        assert_eq!(c.error_record()["error"], "validation");
        assert_eq!(call(&["pmf", "--x", "-1"], None).code, EXIT_VALIDATION);
        assert_eq!(call(&["mc-study", "--deltas", "1,0.5", "--replicas", "10"], None).code, EXIT_VALIDATION);
        assert_eq!(call(&["estimate", "--method", "median", "--input", "x.csv", "--T", "1", "--delta", "1"], None).code, EXIT_VALIDATION);
        let help = call(&["--help"], None);
        assert_eq!(help.code, 0);
        assert!(help.stdout.contains("mc-study"));
    }

    #[test]
    fn missing_input_is_an_io_failure() {
        let c = call(&["estimate", "--method", "qv", "--input", "/nonexistent/x.csv", "--T", "1", "--delta", "1"], None);
        assert_eq!(c.code, EXIT_IO);
        assert_eq!(c.error_record()["error"], "io");
    }

    #[test]
    fn deficiency_curve_peaks_near_point_six() {
        let c = call(&["deficiency-curve", "--x-min", "0.05", "--x-max", "10", "--points", "200"], None);
        assert_eq!(c.code, 0);
        assert!(c.stdout.starts_with("# scalewise "));
        assert!(c.stdout.contains("# points=200\n"));
        let best = c
            .stdout
            .lines()
            .filter(|l| !l.starts_with('#') && !l.starts_with('x'))
            .map(|l| {
                let (x, r) = l.split_once(',').unwrap();
                (x.parse::<f64>().unwrap(), r.parse::<f64>().unwrap())
            })
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        assert!((best.1 - 1.2297).abs() < 5e-4, "{best:?}");
        assert!((best.0 - 0.6).abs() < 0.02, "{best:?}");
    }

    #[test]
    fn simulate_round_trips_into_estimate() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("inc.csv");
        let p = path.to_str().unwrap();
        let c = call(&["simulate", "--theta", "2", "--T", "500", "--delta", "0.25", "--seed", "3", "--output", p], None);
        assert_eq!(c.code, 0, "{}", c.stderr);
        assert!(c.stdout.is_empty());
        for method in ["qv", "os", "mle"] {
            let c = call(&["estimate", "--method", method, "--input", p], None);
            assert_eq!(c.code, 0, "{method}: {}", c.stderr);
            let v = c.json();
            let theta = v["result"]["value"].as_f64().unwrap();
            assert!((theta - 2.0).abs() < 0.3, "{method}: {theta}");
            assert_eq!(v["provenance"]["n"], 2000);
        }
    }

    #[test]
    fn all_zero_input() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("zeros.csv");
        let mut body = String::from("index,increment\n");
        for i in 1..=100 {
            body.push_str(&format!("{i},0\n"));
        }
        std::fs::write(&path, body).unwrap();
        let p = path.to_str().unwrap();
        let c = call(&["estimate", "--method", "qv", "--input", p, "--T", "100", "--delta", "1"], None);
        assert_eq!(c.code, 0);
        let v = c.json();
        assert_eq!(v["result"]["flags"][0], "degenerate");
        assert_eq!(v["result"]["value"], 0.0);

        let c = call(&["estimate", "--method", "mle", "--input", p, "--T", "100", "--delta", "1"], None);
        assert_eq!(c.code, EXIT_NUMERIC);
        assert_eq!(c.error_record()["error"], "numeric");
    }

    #[test]
    fn out_dir_and_thread_count_do_not_change_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let args = ["mc-study", "--theta", "1", "--deltas", "0.01,0.6,50", "--n", "1000", "--replicas", "100", "--seed", "7"];
        let a = call(&args, Some(dir.path()));
        assert_eq!(a.code, 0);
        assert!(a.stdout.is_empty());
        let first = std::fs::read_to_string(dir.path().join("mc-study.csv")).unwrap();
        let mut with_threads = args.to_vec();
        with_threads.extend(["--threads", "3"]);
        let b = call(&with_threads, None);
        assert_eq!(b.code, 0);
        assert_eq!(first, b.stdout);
        assert!(first.contains("\ndelta,estimator,emp_var,inv_info,qv_var_theory,ks\n"));
        assert_eq!(first.lines().filter(|l| !l.starts_with('#')).count(), 7);
    }

    #[test]
    fn nonhomogeneous_and_gaussian_tables() {
        let c = call(&["nonhomog-info", "--model", "constant", "--theta", "2", "--T", "100", "--delta", "1"], None);
        assert_eq!(c.code, 0);
        let micro: f64 = c.stdout.lines().find(|l| l.starts_with("microscopic,")).unwrap()[12..].parse().unwrap();
        assert!((micro - 50.0).abs() < 1e-8);

        let c = call(&["gauss-distance", "--deltas", "0.5,100"], None);
        assert_eq!(c.code, 0);
        assert!(c.stdout.lines().any(|l| l.ends_with(",true")));
        assert!(c.stdout.lines().any(|l| l.ends_with(",false")));
    }
}
