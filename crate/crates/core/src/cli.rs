//! Command-line workflows behind the `densdep` binary.
//!
//! Each run is described by a [`RunConfig`]. The config is validated before
//! any computation, embedded as a `#` comment line at the top of every CSV it
//! produces, and saved as `manifest.json` next to the outputs. Passing that
//! manifest back with `--manifest` reproduces the files byte for byte.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{self, DynamicsError, DynamicsParams, MAX_ORDER, N_ORDERS};
use crate::inference::{self, FilterConfig, InferenceError, DEFAULT_PARTICLES, MIN_PARTICLES};
use crate::ingest::{self, IngestError, ObservedSeries};
use crate::metrics::{self, DmCovMode, MetricsError, PriorComparison};
use crate::priors::{HyperParams, PriorError, PriorFamily};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest {path}: {message}")]
    Manifest { path: String, message: String },
}

impl CliError {
    /// Process exit code; 2 is left to argument parsing.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Manifest { .. } => 2,
            CliError::Ingest(_) => 3,
            CliError::Inference(_) => 4,
            CliError::Dynamics(_) => 5,
            CliError::Metrics(_) => 6,
            CliError::Io { .. } => 7,
        }
    }
}

impl From<PriorError> for CliError {
    fn from(e: PriorError) -> Self {
        CliError::Config(e.to_string())
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Sim1,
    Sim2,
}

/// Parameters of a simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    pub k: usize,
    pub b: Vec<f64>,
    pub sigma: f64,
    pub obs_sd: f64,
    pub horizon: usize,
    /// Initial lag window, most recent first.
    pub init: Vec<f64>,
}

impl SimSpec {
    pub fn preset(p: Preset) -> Self {
        let (k, b) = match p {
            Preset::Sim1 => (1, vec![0.5, -0.5]),
            Preset::Sim2 => (2, vec![0.5, -0.1, -0.4]),
        };
        Self {
            k,
            b,
            sigma: 0.05,
            obs_sd: 0.05,
            horizon: 501,
            init: vec![0.0; k.max(1)],
        }
    }

    pub fn params(&self) -> Result<DynamicsParams, CliError> {
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(CliError::Config(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        Ok(DynamicsParams::new(self.k, self.b.clone(), self.sigma * self.sigma)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Simulate,
    Fit,
    ComparePriors,
}

/// Everything that determines a run's outputs. The output directory is not
/// part of it, so the same config written to two places gives identical
/// files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    pub input: Option<PathBuf>,
    pub families: Vec<PriorFamily>,
    pub orders: Vec<usize>,
    pub hyper: HyperParams,
    pub n_particles: usize,
    pub seeds: Vec<u64>,
    /// Inclusive range of year labels used for centering.
    pub center_window: Option<(i64, i64)>,
    pub dm_cov: DmCovMode,
    pub sd_floor: f64,
    pub simulation: Option<SimSpec>,
    pub svg: bool,
}

impl RunConfig {
    fn base(command: Command) -> Self {
        Self {
            command,
            input: None,
            families: vec![PriorFamily::Shrinkage1],
            orders: (0..=MAX_ORDER).collect(),
            hyper: HyperParams::default(),
            n_particles: DEFAULT_PARTICLES,
            seeds: vec![1],
            center_window: None,
            dm_cov: DmCovMode::Diag,
            sd_floor: ingest::DEFAULT_SD_FLOOR,
            simulation: None,
            svg: true,
        }
    }

    pub fn simulate(spec: SimSpec, seed: u64) -> Self {
        Self {
            simulation: Some(spec),
            seeds: vec![seed],
            ..Self::base(Command::Simulate)
        }
    }

    pub fn fit(input: impl Into<PathBuf>, family: PriorFamily, seed: u64) -> Self {
        Self {
            input: Some(input.into()),
            families: vec![family],
            seeds: vec![seed],
            ..Self::base(Command::Fit)
        }
    }

    pub fn compare(input: impl Into<PathBuf>, families: Vec<PriorFamily>, seeds: Vec<u64>) -> Self {
        Self {
            input: Some(input.into()),
            families,
            seeds,
            ..Self::base(Command::ComparePriors)
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        match self.command {
            Command::Simulate => {
                let spec = self
                    .simulation
                    .as_ref()
                    .ok_or_else(|| CliError::Config("simulate needs parameters".into()))?;
                let p = spec.params()?;
                if spec.horizon == 0 {
                    return bad("horizon must be positive".into());
                }
                if spec.init.len() < p.window() {
                    return bad(format!("init needs {} values", p.window()));
                }
                if !(spec.obs_sd.is_finite() && spec.obs_sd >= 0.0) {
                    return bad(format!("obs-sd must be >= 0, got {}", spec.obs_sd));
                }
                return Ok(());
            }
            Command::Fit => {
                if self.families.len() != 1 {
                    return bad("fit takes exactly one prior family".into());
                }
            }
            Command::ComparePriors => {
                let mut f = self.families.clone();
                f.sort_unstable();
                f.dedup();
                if f.len() < 2 {
                    return bad("compare-priors needs at least two distinct families".into());
                }
            }
        }
        if self.input.is_none() {
            return bad("an input file is required".into());
        }
        if self.n_particles < MIN_PARTICLES {
            return bad(format!("need at least {MIN_PARTICLES} particles"));
        }
        if let Some((a, b)) = self.center_window {
            if a > b {
                return bad(format!("center window {a}:{b} is reversed"));
            }
        }
        if self.sd_floor.is_nan() || self.sd_floor <= 0.0 {
            return bad("sd floor must be positive".into());
        }
        self.hyper.validate()?;
        FilterConfig::new(self.families[0]).with_orders(self.orders.clone()).validate()?;
        Ok(())
    }

    fn filter_config(&self, family: PriorFamily, seed: u64) -> FilterConfig {
        FilterConfig::new(family)
            .with_hyper(self.hyper)
            .with_particles(self.n_particles)
            .with_seed(seed)
            .with_orders(self.orders.clone())
    }

    /// The comment line heading every CSV.
    pub fn header_line(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        format!("# densdep {VERSION} config={json}\n")
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    version: String,
    config: RunConfig,
}

pub fn write_manifest(cfg: &RunConfig, out: &Path) -> Result<PathBuf, CliError> {
    let path = out.join("manifest.json");
    let m = Manifest {
        version: VERSION.into(),
        config: cfg.clone(),
    };
    let text = serde_json::to_string_pretty(&m).expect("manifest serializes") + "\n";
    fs::write(&path, text).map_err(io_err(&path))?;
    Ok(path)
}

pub fn read_manifest(path: &Path) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let m: Manifest = serde_json::from_str(&text).map_err(|e| CliError::Manifest {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    Ok(m.config)
}

/// Load the input series and map the year-valued center window to indices.
pub fn load_input(cfg: &RunConfig) -> Result<ObservedSeries, CliError> {
    let path = cfg.input.as_ref().ok_or_else(|| CliError::Config("no input".into()))?;
    let raw = ingest::load_series(path)?;
    let window = match cfg.center_window {
        None => None,
        Some((a, b)) => {
            let first = raw.years[0];
            let last = *raw.years.last().expect("validated non-empty");
            if a < first || b > last {
                return Err(CliError::Config(format!(
                    "center window {a}:{b} outside the series years {first}..{last}"
                )));
            }
            Some((a - first) as usize..(b - first + 1) as usize)
        }
    };
    let (obs, _) = ingest::prepare(&raw, window, cfg.sd_floor)?;
    Ok(obs)
}

fn write_csv(path: &Path, cfg: &RunConfig, body: &str) -> Result<PathBuf, CliError> {
    let mut text = cfg.header_line();
    text.push_str(body);
    fs::write(path, text).map_err(io_err(path))?;
    Ok(path.to_path_buf())
}

fn posterior_header() -> String {
    (0..N_ORDERS).map(|k| format!(",k{k}")).collect()
}

/// CSV field quoting for text that may contain commas or quotes.
fn quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn row(values: &[f64]) -> String {
    values.iter().map(|v| format!(",{v}")).collect()
}

/// Write the simulated trajectory and manifest.
pub fn cmd_simulate(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    cfg.validate()?;
    let spec = cfg.simulation.as_ref().expect("validated");
    let params = spec.params()?;
    let traj = dynamics::simulate(&params, &spec.init, spec.horizon, &vec![spec.obs_sd; spec.horizon], cfg.seeds[0])?;

    fs::create_dir_all(out).map_err(io_err(out))?;
    let mut body = String::from("t,x_latent,y_observed,obs_sd\n");
    for i in 0..traj.len() {
        let _ = writeln!(
            body,
            "{},{},{},{}",
            traj.t0 + i as i64,
            traj.latent[i],
            traj.observed[i],
            traj.obs_sd[i]
        );
    }
    Ok(vec![
        write_csv(&out.join("trajectory.csv"), cfg, &body)?,
        write_manifest(cfg, out)?,
    ])
}

/// Fit one prior family: evolving posterior, final row, smoothed path,
/// prediction records and an optional SVG.
pub fn cmd_fit(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    cfg.validate()?;
    let series = load_input(cfg)?;
    let family = cfg.families[0];
    let (state, trace) = inference::run(&series, cfg.filter_config(family, cfg.seeds[0]))?;
    let records = metrics::records_from_trace(&trace);
    let (dm, mse) = metrics::evaluate_run(&state, &trace, cfg.dm_cov)?;

    fs::create_dir_all(out).map_err(io_err(out))?;
    let label = |t: usize| -> String {
        match &series.years {
            Some(y) => y[t - 1].to_string(),
            None => t.to_string(),
        }
    };
    let mut files = Vec::new();

    let mut body = format!("t,year{}\n", posterior_header());
    for (t, p) in trace.times.iter().zip(&trace.posterior) {
        let _ = writeln!(body, "{t},{}{}", label(*t), row(p));
    }
    files.push(write_csv(&out.join("posterior.csv"), cfg, &body)?);

    let species = cfg
        .input
        .as_ref()
        .and_then(|p| p.file_stem())
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let body = format!(
        "species,prior{}\n{},{}{}\n",
        posterior_header(),
        quote(&species),
        quote(family.label()),
        row(&trace.final_posterior())
    );
    files.push(write_csv(&out.join("final_posterior.csv"), cfg, &body)?);

    let mut body = String::from("t,year,y,obs_sd,x_smoothed\n");
    for t in 1..=series.len() {
        let _ = writeln!(
            body,
            "{t},{},{},{},{}",
            label(t),
            series.y[t - 1],
            series.s[t - 1],
            trace.smoothed[t - 1]
        );
    }
    files.push(write_csv(&out.join("smoothed.csv"), cfg, &body)?);

    let mut body = String::from("t,year,xhat,pvar,xtilde,sq_err,mse\n");
    for (r, m) in records.iter().zip(&mse) {
        let _ = writeln!(
            body,
            "{},{},{},{},{},{},{}",
            r.t,
            label(r.t),
            r.xhat,
            r.pvar,
            r.xtilde,
            m.sq_err,
            m.mse
        );
    }
    files.push(write_csv(&out.join("predictions.csv"), cfg, &body)?);

    let body = format!(
        "prior,dm,dm_cov,final_mse\n{},{dm},{},{}\n",
        quote(family.label()),
        quote(dm_cov_label(cfg.dm_cov)),
        mse.last().map(|m| m.mse).unwrap_or(f64::NAN)
    );
    files.push(write_csv(&out.join("summary.csv"), cfg, &body)?);

    if cfg.svg {
        let lines: Vec<(String, Vec<(f64, f64)>)> = (0..N_ORDERS)
            .filter(|k| cfg.orders.contains(k))
            .map(|k| {
                let pts = trace
                    .times
                    .iter()
                    .zip(&trace.posterior)
                    .map(|(t, p)| (*t as f64, p[k]))
                    .collect();
                (format!("k={k}"), pts)
            })
            .collect();
        let svg = svg_lines(&format!("{species}: {}", family.label()), "t", "P(k | y)", &lines);
        let path = out.join("posterior.svg");
        fs::write(&path, svg).map_err(io_err(&path))?;
        files.push(path);
    }
    files.push(write_manifest(cfg, out)?);
    Ok(files)
}

fn dm_cov_label(m: DmCovMode) -> &'static str {
    match m {
        DmCovMode::Diag => "diag (approximation: predictions treated as uncorrelated)",
        DmCovMode::Full => "full (approximation: smoothed-path covariance from ancestral paths)",
    }
}

/// Render the comparison table as CSV text (no config header).
pub fn comparison_csv(cmp: &PriorComparison, seeds: &[u64]) -> String {
    let mut body = String::from("prior,slug,dm_median");
    for s in seeds {
        let _ = write!(body, ",dm_seed{s}");
    }
    let _ = writeln!(body, ",final_mse_percent{}", posterior_header());
    for r in &cmp.rows {
        let _ = writeln!(
            body,
            "{},{},{}{},{}{}",
            quote(r.family.label()),
            r.family.slug(),
            r.dm_median,
            row(&r.dm_per_seed),
            r.mse_percent.last().copied().unwrap_or(f64::NAN),
            row(&r.final_posterior_mean)
        );
    }
    body
}

/// Run every requested family on every seed and write the comparison table,
/// the normalized MSE curves and their plot.
pub fn cmd_compare_priors(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    cfg.validate()?;
    let series = load_input(cfg)?;
    let cmp = metrics::compare_priors_with(&series, &cfg.families, cfg.dm_cov, |family, seed| {
        cfg.filter_config(family, seed)
    }, &cfg.seeds)?;

    fs::create_dir_all(out).map_err(io_err(out))?;
    let mut files = vec![write_csv(&out.join("comparison.csv"), cfg, &comparison_csv(&cmp, &cfg.seeds))?];

    let mut body = String::from("t");
    for r in &cmp.rows {
        let _ = write!(body, ",{}", r.family.slug());
    }
    body.push('\n');
    for (i, t) in cmp.times.iter().enumerate() {
        let vals: Vec<f64> = cmp.rows.iter().map(|r| r.mse_percent[i]).collect();
        let _ = writeln!(body, "{t}{}", row(&vals));
    }
    files.push(write_csv(&out.join("mse_normalized.csv"), cfg, &body)?);

    if cfg.svg {
        let lines: Vec<(String, Vec<(f64, f64)>)> = cmp
            .rows
            .iter()
            .map(|r| {
                let pts = cmp.times.iter().zip(&r.mse_percent).map(|(t, v)| (*t as f64, *v)).collect();
                (r.family.label().to_string(), pts)
            })
            .collect();
        let title = format!("MSE relative to {} (%)", cmp.baseline.label());
        let svg = svg_lines(&title, "t", "% of baseline MSE", &lines);
        let path = out.join("mse_normalized.svg");
        fs::write(&path, svg).map_err(io_err(&path))?;
        files.push(path);
    }
    files.push(write_manifest(cfg, out)?);
    Ok(files)
}

pub fn execute(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    match cfg.command {
        Command::Simulate => cmd_simulate(cfg, out),
        Command::Fit => cmd_fit(cfg, out),
        Command::ComparePriors => cmd_compare_priors(cfg, out),
    }
}

const PALETTE: [&str; 6] = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02"];

/// Minimal multi-line chart. Tests check the CSVs, never these bytes.
pub fn svg_lines(title: &str, xlab: &str, ylab: &str, lines: &[(String, Vec<(f64, f64)>)]) -> String {
    let (w, h, l, r, t, b) = (720.0, 420.0, 70.0, 130.0, 40.0, 50.0);
    let pts = lines.iter().flat_map(|(_, p)| p.iter()).filter(|(x, y)| x.is_finite() && y.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for (x, y) in pts {
        x0 = x0.min(*x);
        x1 = x1.max(*x);
        y0 = y0.min(*y);
        y1 = y1.max(*y);
    }
    if x0 > x1 {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-12 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-12 {
        y1 = y0 + 1.0;
    }
    let px = |x: f64| l + (x - x0) / (x1 - x0) * (w - l - r);
    let py = |y: f64| h - b - (y - y0) / (y1 - y0) * (h - t - b);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<path d="M{l},{t} V{} H{}" fill="none" stroke="black"/>"#,
        h - b,
        w - r
    );
    for (v, x) in [(x0, px(x0)), (x1, px(x1))] {
        let _ = writeln!(s, r#"<text x="{x}" y="{}" text-anchor="middle">{}</text>"#, h - b + 16.0, fmt_tick(v));
    }
    for (v, y) in [(y0, py(y0)), (y1, py(y1))] {
        let _ = writeln!(s, r#"<text x="{}" y="{y}" text-anchor="end">{}</text>"#, l - 6.0, fmt_tick(v));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (l + w - r) / 2.0, h - 10.0, escape(xlab));
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        (t + h - b) / 2.0,
        (t + h - b) / 2.0,
        escape(ylab)
    );
    for (i, (name, p)) in lines.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let mut d = String::new();
        for (j, (x, y)) in p.iter().filter(|(x, y)| x.is_finite() && y.is_finite()).enumerate() {
            let _ = write!(d, "{}{:.2},{:.2} ", if j == 0 { "M" } else { "L" }, px(*x), py(*y));
        }
        let _ = writeln!(s, r#"<path d="{}" fill="none" stroke="{colour}" stroke-width="1.5"/>"#, d.trim_end());
        let ly = t + 16.0 * i as f64 + 10.0;
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{colour}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            w - r + 10.0,
            w - r + 30.0,
            w - r + 36.0,
            ly + 4.0,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn fmt_tick(v: f64) -> String {
    if v.abs() >= 1e4 || (v != 0.0 && v.abs() < 1e-2) {
        format!("{v:.2e}")
    } else {
        format!("{}", (v * 100.0).round() / 100.0)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[derive(Debug, Parser)]
#[command(name = "densdep", version, about = "Density-dependence order inference for population series")]
#[command(args_conflicts_with_subcommands = true)]
pub struct Cli {
    #[command(subcommand)]
    command: Option<Sub>,
    /// Re-run the configuration stored in a manifest.json.
    #[arg(long, value_name = "FILE", requires = "out")]
    manifest: Option<PathBuf>,
    /// Output directory when re-running a manifest.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Simulate a trajectory from a preset or explicit parameters.
    Simulate(SimulateArgs),
    /// Fit one prior family to a series.
    Fit(FitArgs),
    /// Compare prior families by predictive accuracy.
    ComparePriors(CompareArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CovArg {
    Diag,
    Full,
}

#[derive(Debug, Args)]
struct Shared {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_PARTICLES)]
    particles: usize,
    #[arg(long = "sigma-b2", default_value_t = HyperParams::default().sigma_b2)]
    sigma_b2: f64,
    #[arg(long, default_value_t = HyperParams::default().h)]
    h: f64,
    /// Years START:END (inclusive) whose mean log count is subtracted.
    #[arg(long = "center-window", value_name = "START:END", value_parser = parse_window)]
    center_window: Option<(i64, i64)>,
    #[arg(long = "dm-cov", value_enum, default_value = "diag")]
    dm_cov: CovArg,
    /// Comma-separated model orders to fit.
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4,5")]
    orders: Vec<usize>,
    #[arg(long = "no-svg")]
    no_svg: bool,
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    #[arg(long)]
    k: Option<usize>,
    /// Coefficients b0,...,bk.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    b: Option<Vec<f64>>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long = "obs-sd")]
    obs_sd: Option<f64>,
    #[arg(long)]
    horizon: Option<usize>,
    /// Initial lag window, most recent first (defaults to zeros).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    init: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct FitArgs {
    input: PathBuf,
    #[arg(long, default_value = "shrink1")]
    prior: PriorFamily,
    #[command(flatten)]
    shared: Shared,
}

#[derive(Debug, Args)]
struct CompareArgs {
    input: PathBuf,
    /// Comma-separated families; defaults to all five.
    #[arg(long, value_delimiter = ',', default_value = "indep5,indep1,corr,shrink1,shrink2")]
    prior: Vec<PriorFamily>,
    /// Number of seeds, starting at --seed.
    #[arg(long, default_value_t = 10)]
    replicates: u64,
    #[command(flatten)]
    shared: Shared,
}

fn parse_window(s: &str) -> Result<(i64, i64), String> {
    let (a, b) = s.split_once(':').ok_or("expected START:END")?;
    let a = a.trim().parse::<i64>().map_err(|e| e.to_string())?;
    let b = b.trim().parse::<i64>().map_err(|e| e.to_string())?;
    Ok((a, b))
}

impl Shared {
    fn apply(&self, cfg: &mut RunConfig) {
        cfg.n_particles = self.particles;
        cfg.hyper = HyperParams {
            sigma_b2: self.sigma_b2,
            h: self.h,
        };
        cfg.center_window = self.center_window;
        cfg.dm_cov = match self.dm_cov {
            CovArg::Diag => DmCovMode::Diag,
            CovArg::Full => DmCovMode::Full,
        };
        cfg.orders = self.orders.clone();
        cfg.svg = !self.no_svg;
    }
}

fn sim_spec(a: &SimulateArgs) -> Result<SimSpec, CliError> {
    let mut spec = match a.preset {
        Some(p) => SimSpec::preset(p),
        None => {
            let b = a
                .b
                .clone()
                .ok_or_else(|| CliError::Config("give --preset or --b".into()))?;
            let k = a.k.unwrap_or(b.len().saturating_sub(1));
            SimSpec {
                k,
                b,
                sigma: 0.05,
                obs_sd: 0.05,
                horizon: 501,
                init: vec![0.0; k.max(1)],
            }
        }
    };
    if let Some(b) = &a.b {
        spec.b = b.clone();
        spec.k = a.k.unwrap_or(b.len().saturating_sub(1));
        spec.init = vec![0.0; spec.k.max(1)];
    } else if let Some(k) = a.k {
        if k != spec.k {
            return Err(CliError::Config("--k differs from the preset; give --b too".into()));
        }
    }
    if let Some(v) = a.sigma {
        spec.sigma = v;
    }
    if let Some(v) = a.obs_sd {
        spec.obs_sd = v;
    }
    if let Some(v) = a.horizon {
        spec.horizon = v;
    }
    if let Some(v) = &a.init {
        spec.init = v.clone();
    }
    Ok(spec)
}

/// Turn parsed arguments into a config and its output directory.
fn resolve(cli: Cli) -> Result<(RunConfig, PathBuf), CliError> {
    if let Some(m) = cli.manifest {
        let out = cli.out.expect("clap enforces --out");
        return Ok((read_manifest(&m)?, out));
    }
    match cli.command {
        None => Err(CliError::Config("a subcommand or --manifest is required".into())),
        Some(Sub::Simulate(a)) => Ok((RunConfig::simulate(sim_spec(&a)?, a.seed), a.out)),
        Some(Sub::Fit(a)) => {
            let mut cfg = RunConfig::fit(a.input, a.prior, a.shared.seed);
            a.shared.apply(&mut cfg);
            Ok((cfg, a.shared.out))
        }
        Some(Sub::ComparePriors(a)) => {
            let seeds = (0..a.replicates).map(|i| a.shared.seed + i).collect();
            let mut cfg = RunConfig::compare(a.input, a.prior, seeds);
            a.shared.apply(&mut cfg);
            Ok((cfg, a.shared.out))
        }
    }
}

/// Entry point for the binary: returns the process exit code.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = resolve(cli).and_then(|(cfg, out)| execute(&cfg, &out));
    match result {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
