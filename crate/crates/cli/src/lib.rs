//! Command-line front end for `parking-core`.
//!
//! Every command that writes a CSV file also writes `<file>.manifest`, a
//! `key=value` record of the parameters, tool version, time and output
//! checksum. A `simulate` manifest can be passed back with `--config` to
//! reproduce the CSV byte for byte.

pub mod args;
pub mod manifest;
pub mod verify;

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use num_traits::ToPrimitive;
use parking_core::analytic::{density_time, limit_diagnostics, limit_table_csv};
use parking_core::fmt::sig;
use parking_core::oracle::{
    choose_m_max, exact_after_m_arrivals, exact_after_m_arrivals_dp, exact_density_poissonized,
    exact_height_dist, multinomial_height_dist,
};
use parking_core::simulator::{estimates_csv, recommended_arrivals, run, Mode, Observe, RunConfig};
use parking_core::LatticeConfig;

use args::{
    AnalyticCommand, Cli, Command, CurveArgs, ExactArgs, HeightDistArgs, Method, OracleCommand,
    PoissonizedArgs, SimulateArgs, TableArgs, VerifyArgs,
};
use manifest::Manifest;

pub const SEED_ENV: &str = "PARKING_SEED";
pub const DEFAULT_SEED: u64 = 42;
pub const CURVE_CSV_HEADER: &str = "layer,t,density";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    /// A check or internal invariant did not hold.
    #[error("{0}")]
    Failed(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Failed(_) | CliError::Io(_) => 1,
            CliError::Usage(_) => 2,
        }
    }
}

impl From<parking_core::Error> for CliError {
    fn from(e: parking_core::Error) -> Self {
        use parking_core::Error as E;
        match e {
            E::Invariant(_) => CliError::Failed(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

/// Output of a command: what goes to standard output, plus notes for
/// standard error.
#[derive(Debug, Default)]
pub struct Outcome {
    pub stdout: String,
    pub notes: Vec<String>,
}

pub fn execute(cli: Cli) -> Result<Outcome, CliError> {
    match cli.command {
        Command::Analytic(AnalyticCommand::Table(a)) => analytic_table(&a),
        Command::Analytic(AnalyticCommand::Curve(a)) => analytic_curve(&a),
        Command::Simulate(a) => with_threads(a.threads, || simulate(&a)),
        Command::Oracle(OracleCommand::Exact(a)) => with_threads(a.threads, || oracle_exact(&a)),
        Command::Oracle(OracleCommand::Poissonized(a)) => oracle_poissonized(&a),
        Command::Oracle(OracleCommand::HeightDist(a)) => {
            with_threads(a.threads, || oracle_height_dist(&a))
        }
        Command::Verify(a) => with_threads(a.threads, || run_verify(&a)),
    }
}

fn with_threads<T>(
    threads: usize,
    f: impl FnOnce() -> Result<T, CliError> + Send,
) -> Result<T, CliError>
where
    T: Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Io(format!("cannot start {threads} worker threads: {e}")))?;
    pool.install(f)
}

/// Writes `contents` to `path` with its manifest, or returns it for
/// standard output.
fn deliver(
    contents: String,
    path: Option<&Path>,
    manifest_path: Option<&Path>,
    mut manifest: Manifest,
) -> Result<Outcome, CliError> {
    let mut outcome = Outcome::default();
    match path {
        Some(p) => {
            write_file(p, &contents)?;
            manifest.record_output(p, &contents);
        }
        None => {
            manifest.push(
                manifest::CHECKSUM_KEY,
                manifest::sha256_hex(contents.as_bytes()),
            );
            outcome.stdout = contents;
        }
    }
    let manifest_path = manifest_path
        .map(Path::to_path_buf)
        .or_else(|| path.map(manifest::default_path));
    if let Some(mp) = manifest_path {
        write_file(&mp, &manifest.render())?;
        outcome
            .notes
            .push(format!("manifest written to {}", mp.display()));
    }
    Ok(outcome)
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn analytic_table(a: &TableArgs) -> Result<Outcome, CliError> {
    if a.layers == 0 {
        return Err(CliError::Usage("--layers must be at least 1".into()));
    }
    let rows = limit_diagnostics(a.layers)?;
    let mut m = Manifest::for_command("analytic table");
    m.push("layers", a.layers);
    deliver(limit_table_csv(&rows), a.output.as_deref(), None, m)
}

/// Times `0, step, 2 step, ...` up to `t_max`, or the explicit list.
fn time_grid(a: &CurveArgs) -> Result<Vec<f64>, CliError> {
    if let Some(times) = &a.times {
        if let Some(t) = times.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
            return Err(CliError::Usage(format!(
                "--times: {t} is not a nonnegative time"
            )));
        }
        return Ok(times.clone());
    }
    if !(a.t_max.is_finite() && a.t_max >= 0.0) {
        return Err(CliError::Usage(format!(
            "--t-max: {} is not a nonnegative time",
            a.t_max
        )));
    }
    if !(a.t_step.is_finite() && a.t_step > 0.0) {
        return Err(CliError::Usage(format!(
            "--t-step: {} must be positive",
            a.t_step
        )));
    }
    // tolerate rounding in t_max / t_step
    let steps = (a.t_max / a.t_step * (1.0 + 1e-12)).floor() as u64;
    // snap i * step to 12 significant digits so that 3 * 0.05 prints as 0.15
    Ok((0..=steps)
        .map(|i| sig(i as f64 * a.t_step, 12).parse().unwrap_or(f64::NAN))
        .collect())
}

fn analytic_curve(a: &CurveArgs) -> Result<Outcome, CliError> {
    let times = time_grid(a)?;
    if let Some(l) = a.layers.iter().find(|&&l| l == 0) {
        return Err(CliError::Usage(format!(
            "--layers: layer {l} does not exist; layers start at 1"
        )));
    }
    let mut csv = String::from(CURVE_CSV_HEADER);
    csv.push('\n');
    for &layer in &a.layers {
        for &t in &times {
            let d = density_time(layer, t)?;
            let _ = writeln!(csv, "{layer},{t},{}", sig(d, 15));
        }
    }
    let mut m = Manifest::for_command("analytic curve");
    m.push("layers", join(&a.layers));
    match &a.times {
        Some(t) => m.push("times", join(t)),
        None => {
            m.push("t_max", a.t_max);
            m.push("t_step", a.t_step);
        }
    }
    if let (Some(script), Some(output)) = (&a.plot_script, &a.output) {
        write_file(script, &gnuplot_script(output, &a.layers))?;
    }
    deliver(csv, a.output.as_deref(), None, m)
}

fn gnuplot_script(csv: &Path, layers: &[usize]) -> String {
    let mut s = String::from(
        "set datafile separator ','\nset key autotitle columnhead\nset xlabel 't'\nset ylabel 'density'\n",
    );
    let plots: Vec<String> = layers
        .iter()
        .map(|l| {
            format!(
                "'{}' using ($1=={l} ? $2 : 1/0):3 with lines title 'layer {l}'",
                csv.display()
            )
        })
        .collect();
    let _ = writeln!(s, "plot {}", plots.join(", \\\n     "));
    s
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

/// Simulation parameters after merging flags, config file, environment and
/// defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub config: RunConfig,
    pub recorded_checksum: Option<String>,
}

// Keys that manifests carry besides the run parameters.
const INFORMATIONAL_KEYS: &[&str] = &[
    "command",
    "version",
    "timestamp",
    "output",
    manifest::CHECKSUM_KEY,
    "warning",
    "unsettled",
    "raised",
    "total",
    "raise_fraction",
    "mean_side_gap",
    "side_gap_stderr",
];

const PARAMETER_KEYS: &[&str] = &[
    "sites",
    "mode",
    "time",
    "arrivals",
    "reps",
    "layers",
    "observe",
    "seed",
    "raise_stats",
];

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Usage(format!("{key}: cannot parse {value:?}")))
}

fn parse_observe(value: &str) -> Result<Observe, CliError> {
    if value == "center" || value == "centre" {
        return Ok(Observe::Center);
    }
    value
        .split(',')
        .map(|s| parse_value("--observe", s.trim()))
        .collect::<Result<Vec<usize>, _>>()
        .map(Observe::Sites)
}

fn render_observe(o: &Observe) -> String {
    match o {
        Observe::Center => "center".into(),
        Observe::Sites(s) => join(s),
    }
}

/// Merges flags over `--config` values over `$PARKING_SEED` over defaults.
pub fn resolve(a: &SimulateArgs, env_seed: Option<&str>) -> Result<Resolved, CliError> {
    let file = match &a.config {
        Some(p) => Manifest::read(p)?,
        None => Manifest::default(),
    };
    if let Some(cmd) = file.get("command") {
        if cmd != "simulate" {
            return Err(CliError::Usage(format!(
                "--config: manifest is for `{cmd}`, not `simulate`"
            )));
        }
    }
    for (k, _) in file.entries() {
        if !PARAMETER_KEYS.contains(&k.as_str()) && !INFORMATIONAL_KEYS.contains(&k.as_str()) {
            return Err(CliError::Usage(format!("--config: unknown key {k:?}")));
        }
    }
    let get = |k: &str| file.get(k);
    let from_file = |k: &str| -> Result<Option<u64>, CliError> {
        get(k).map(|v| parse_value(k, v)).transpose()
    };

    let sites = match a.sites {
        Some(s) => s,
        None => from_file("sites")?.map_or(3, |s| s as usize),
    };
    let layers = match a.layers {
        Some(l) => l,
        None => get("layers")
            .map(|v| parse_value("layers", v))
            .transpose()?
            .unwrap_or(10),
    };
    let mode = if let Some(t) = a.time {
        Mode::FixedTime(t)
    } else if let Some(m) = a.arrivals {
        Mode::FixedArrivals(m)
    } else {
        let time = get("time").map(|v| parse_value("time", v)).transpose()?;
        let arrivals = from_file("arrivals")?;
        match (get("mode"), time, arrivals) {
            (Some("fixed_time") | None, Some(t), None) => Mode::FixedTime(t),
            (Some("fixed_arrivals") | None, None, Some(m)) => Mode::FixedArrivals(m),
            (Some("fixed_arrivals") | None, None, None) => {
                Mode::FixedArrivals(recommended_arrivals(sites, layers))
            }
            (mode, _, _) => {
                return Err(CliError::Usage(format!(
                    "--config: mode {mode:?} needs exactly one of time and arrivals"
                )))
            }
        }
    };
    let reps = match a.reps {
        Some(r) => r,
        None => from_file("reps")?.unwrap_or(10_000),
    };
    let observe = match (a.observe.as_deref(), get("observe")) {
        (Some(o), _) | (None, Some(o)) => parse_observe(o)?,
        (None, None) => Observe::Center,
    };
    let seed = match a.seed {
        Some(s) => s,
        None => match from_file("seed")? {
            Some(s) => s,
            None => env_seed
                .map(|v| parse_value(SEED_ENV, v))
                .transpose()?
                .unwrap_or(DEFAULT_SEED),
        },
    };
    let track_raises = a.raise_stats
        || get("raise_stats")
            .map(|v| parse_value::<bool>("raise_stats", v))
            .transpose()?
            .unwrap_or(false);

    let mut config = RunConfig::new(sites, mode, reps, layers, seed);
    config.observe = observe;
    config.track_raises = track_raises;
    config
        .validate()
        .map_err(|e| CliError::Usage(flag_hint(&e)))?;
    Ok(Resolved {
        config,
        recorded_checksum: get(manifest::CHECKSUM_KEY).map(str::to_string),
    })
}

// Names the flag behind a validation error.
fn flag_hint(e: &parking_core::Error) -> String {
    use parking_core::Error as E;
    let flag = match e {
        E::SiteOutOfRange { .. } => "--observe",
        E::Unsupported(_) => "--raise-stats",
        E::InvalidInput(msg) if msg.contains("n_sites") => "--sites",
        E::InvalidInput(msg) if msg.contains("replications") => "--reps",
        E::InvalidInput(msg) if msg.contains("layer") => "--layers",
        E::InvalidInput(msg) if msg.contains("observe") => "--observe",
        E::InvalidInput(msg) if msg.contains("arrival") => "--arrivals",
        _ => "--time",
    };
    format!("{flag}: {e}")
}

/// Manifest entries that reproduce `config`.
pub fn config_manifest(config: &RunConfig) -> Manifest {
    let mut m = Manifest::for_command("simulate");
    m.push("sites", config.n_sites);
    m.push("mode", config.mode.name());
    match config.mode {
        Mode::FixedTime(t) => m.push("time", t),
        Mode::FixedArrivals(n) => m.push("arrivals", n),
    }
    m.push("reps", config.replications);
    m.push("layers", config.layers);
    m.push("observe", render_observe(&config.observe));
    m.push("seed", config.seed);
    m.push("raise_stats", config.track_raises);
    m
}

fn simulate(a: &SimulateArgs) -> Result<Outcome, CliError> {
    let env_seed = std::env::var(SEED_ENV).ok();
    let resolved = resolve(a, env_seed.as_deref())?;
    let config = &resolved.config;
    let out = run(config)?;
    let csv = estimates_csv(config, &out);

    let mut m = config_manifest(config);
    let mut notes = Vec::new();
    if matches!(config.mode, Mode::FixedArrivals(_)) {
        m.push("unsettled", out.unsettled);
    }
    if let Some(r) = &out.raise {
        m.push("raised", r.raised);
        m.push("total", r.total);
        m.push("raise_fraction", sig(r.fraction(), 10));
        m.push("mean_side_gap", sig(r.mean_side_gap(), 10));
        m.push("side_gap_stderr", sig(r.side_gap_stderr(), 10));
        notes.push(format!(
            "raised {} of {} arrivals ({}); mean final side gap {} (se {})",
            r.raised,
            r.total,
            sig(r.fraction(), 6),
            sig(r.mean_side_gap(), 6),
            sig(r.side_gap_stderr(), 3)
        ));
    }
    for w in &out.warnings {
        m.push("warning", w);
        notes.push(format!("warning: {w}"));
    }
    if a.check {
        let got = manifest::sha256_hex(csv.as_bytes());
        match &resolved.recorded_checksum {
            Some(want) if *want == got => notes.push("output matches the recorded checksum".into()),
            Some(want) => {
                return Err(CliError::Failed(format!(
                    "output checksum {got} differs from the recorded {want}"
                )))
            }
            None => {
                return Err(CliError::Usage(format!(
                    "--check: the config has no {} entry",
                    manifest::CHECKSUM_KEY
                )))
            }
        }
    }
    let mut outcome = deliver(csv, a.output.as_deref(), a.manifest.as_deref(), m)?;
    outcome.notes.splice(0..0, notes);
    Ok(outcome)
}

fn oracle_exact(a: &ExactArgs) -> Result<Outcome, CliError> {
    let occ = match a.method {
        Method::Enumerate => exact_after_m_arrivals(a.sites, a.arrivals)?,
        Method::Dp => exact_after_m_arrivals_dp(a.sites, a.arrivals)?,
    };
    let mut m = Manifest::for_command("oracle exact");
    m.push("sites", a.sites);
    m.push("arrivals", a.arrivals);
    m.push("method", format!("{:?}", a.method).to_lowercase());
    deliver(occ.to_csv(), a.output.as_deref(), None, m)
}

pub const POISSONIZED_CSV_HEADER: &str = "sites,site,layer,t,m_max,value,tail_bound";

fn oracle_poissonized(a: &PoissonizedArgs) -> Result<Outcome, CliError> {
    if !(a.time.is_finite() && a.time >= 0.0) {
        return Err(CliError::Usage(format!(
            "--time: {} is not a nonnegative time",
            a.time
        )));
    }
    let site = match a.site {
        Some(s) => s,
        None => LatticeConfig::new(a.sites)?.center_sites()[0],
    };
    let m_max = a
        .m_max
        .unwrap_or_else(|| choose_m_max(a.sites, a.time, a.tail));
    let p = exact_density_poissonized(a.sites, a.time, a.layer, site, m_max)?;
    let stdout = format!(
        "{POISSONIZED_CSV_HEADER}\n{},{site},{},{},{},{},{}\n",
        a.sites,
        a.layer,
        a.time,
        p.m_max,
        sig(p.value, 15),
        sig(p.tail_bound, 3)
    );
    Ok(Outcome {
        stdout,
        notes: Vec::new(),
    })
}

pub const HEIGHT_CSV_HEADER: &str = "height,numerator,denominator,decimal";

fn oracle_height_dist(a: &HeightDistArgs) -> Result<Outcome, CliError> {
    let d = exact_height_dist(a.arrivals)?;
    if d != multinomial_height_dist(a.arrivals)? {
        return Err(CliError::Failed(
            "enumerated height law differs from the multinomial formula".into(),
        ));
    }
    let mut stdout = String::from(HEIGHT_CSV_HEADER);
    stdout.push('\n');
    for (h, p) in d.iter() {
        let _ = writeln!(
            stdout,
            "{h},{},{},{}",
            p.numer(),
            p.denom(),
            sig(p.to_f64().unwrap_or(f64::NAN), 10)
        );
    }
    Ok(Outcome {
        stdout,
        notes: vec!["enumeration agrees with the multinomial formula".into()],
    })
}

fn run_verify(a: &VerifyArgs) -> Result<Outcome, CliError> {
    let report = verify::verify(a.level, a.inject_fault);
    let text = format!("{report}\n");
    if report.passed() {
        Ok(Outcome {
            stdout: text,
            notes: Vec::new(),
        })
    } else {
        // the report still goes to standard output
        let _ = std::io::stdout().write_all(text.as_bytes());
        Err(CliError::Failed("verification failed".into()))
    }
}
