//! Command-line driver: `simulate`, `validate` and `densities`.
//!
//! Settings come from a flat `key = value` file (`--config`, `#` starts a
//! comment) and from flags; flags win. Keys match the long flag names with
//! `-` or `_` interchangeable.
//!
//! Outputs are UTF-8 with LF line endings. Reals are written in scientific
//! notation with 17 significant digits.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, ValueEnum};

use crate::dynamics::RadialDriftSpec;
use crate::error::{Error, Result};
use crate::integrators::{run_ensemble, Observable, PathEnsemble, ProcessKind, RecordMode, StepConfig};
use crate::manifold::{HyperbolicPoint, ModelParams};
use crate::measures::{DensityKind, DensitySpec};
use crate::stats::{ks_against, GofReport};

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "MASSSHELL_THREADS";

pub const EXIT_OK: i32 = 0;
/// A goodness-of-fit check failed or a path failed.
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Simulate,
    Validate,
    Densities,
}

#[derive(Debug, Parser)]
#[command(name = "massshell", version, about = "Relativistic diffusions on the mass shell")]
pub struct Cli {
    pub mode: Mode,
    /// Flat `key = value` settings file; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Space dimension.
    #[arg(long = "d")]
    pub d: Option<String>,
    #[arg(long = "m")]
    pub m: Option<String>,
    /// Drift parameter; `validate` accepts a comma-separated list.
    #[arg(long)]
    pub gamma: Option<String>,
    #[arg(long)]
    pub dt: Option<String>,
    #[arg(long)]
    pub t_end: Option<String>,
    #[arg(long)]
    pub n_paths: Option<String>,
    #[arg(long)]
    pub base_seed: Option<String>,
    /// Initial radial coordinate; the start direction is the first axis.
    #[arg(long)]
    pub s0: Option<String>,
    /// radial, momentum_hyperbolic or cartesian.
    #[arg(long)]
    pub process: Option<String>,
    /// s, p0, speed, p_component(i), v_component(i); `validate` accepts a
    /// comma-separated list.
    #[arg(long)]
    pub observable: Option<String>,
    /// final_only or full.
    #[arg(long)]
    pub record: Option<String>,
    #[arg(long)]
    pub grid_points: Option<String>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub d: usize,
    pub m: f64,
    pub gammas: Vec<f64>,
    pub dt: f64,
    pub t_end: f64,
    pub n_paths: usize,
    pub base_seed: u64,
    pub s0: f64,
    /// `None` picks the cheapest process able to produce every observable.
    pub process: Option<ProcessKind>,
    pub observables: Vec<Observable>,
    pub record: RecordMode,
    pub grid_points: usize,
    pub output_path: Option<PathBuf>,
}

const KEYS: &[&str] = &[
    "d",
    "m",
    "gamma",
    "dt",
    "t_end",
    "n_paths",
    "base_seed",
    "s0",
    "process",
    "observable",
    "record",
    "grid_points",
    "output",
];

/// Parses the flat settings format into a key map.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Usage(format!("config line {}: expected 'key = value'", lineno + 1)))?;
        let key = key.trim().replace('-', "_");
        if !KEYS.contains(&key.as_str()) {
            return Err(Error::Usage(format!("config line {}: unknown key '{key}'", lineno + 1)));
        }
        out.insert(key, value.trim().to_string());
    }
    Ok(out)
}

fn parse_field<T: FromStr>(name: &str, raw: &str) -> Result<T> {
    raw.trim()
        .parse()
        .map_err(|_| Error::Usage(format!("{name}: cannot parse '{raw}'")))
}

/// Splits on commas that are not inside parentheses.
fn split_list(raw: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let (mut depth, mut start) = (0i32, 0);
    for (i, c) in raw.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(raw[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(raw[start..].trim());
    out.into_iter().filter(|s| !s.is_empty()).collect()
}

impl RunConfig {
    /// Merges file settings with flags (flags win) and validates the result.
    pub fn from_sources(mode: Mode, file: &BTreeMap<String, String>, flags: &BTreeMap<String, String>) -> Result<Self> {
        let get = |key: &str| flags.get(key).or_else(|| file.get(key)).map(String::as_str);

        let d: usize = get("d").map(|v| parse_field("d", v)).transpose()?.unwrap_or(3);
        let m: f64 = get("m").map(|v| parse_field("m", v)).transpose()?.unwrap_or(1.0);
        let gammas: Vec<f64> = match get("gamma") {
            Some(v) => split_list(v)
                .into_iter()
                .map(|g| parse_field("gamma", g))
                .collect::<Result<_>>()?,
            None => return Err(Error::Usage("gamma: missing".into())),
        };
        if gammas.is_empty() {
            return Err(Error::Usage("gamma: empty list".into()));
        }
        if gammas.len() > 1 && mode != Mode::Validate {
            return Err(Error::Usage("gamma: lists are accepted by validate only".into()));
        }
        let dt = get("dt")
            .map(|v| parse_field("dt", v))
            .transpose()?
            .unwrap_or(1.0 / 64.0);
        let t_end = get("t_end")
            .map(|v| parse_field("t_end", v))
            .transpose()?
            .unwrap_or(100.0);
        let n_paths = get("n_paths")
            .map(|v| parse_field("n_paths", v))
            .transpose()?
            .unwrap_or(5000);
        let base_seed = get("base_seed")
            .map(|v| parse_field("base_seed", v))
            .transpose()?
            .unwrap_or(0);
        let s0: f64 = get("s0").map(|v| parse_field("s0", v)).transpose()?.unwrap_or(1.0);
        let process = get("process").map(ProcessKind::from_str).transpose()?;
        let observables: Vec<Observable> = match get("observable") {
            Some(v) => split_list(v)
                .into_iter()
                .map(Observable::from_str)
                .collect::<Result<_>>()?,
            None => vec![Observable::S],
        };
        if observables.is_empty() {
            return Err(Error::Usage("observable: empty list".into()));
        }
        if observables.len() > 1 && mode != Mode::Validate {
            return Err(Error::Usage("observable: lists are accepted by validate only".into()));
        }
        let record = get("record")
            .map(RecordMode::from_str)
            .transpose()?
            .unwrap_or(RecordMode::FinalOnly);
        let grid_points = get("grid_points")
            .map(|v| parse_field("grid_points", v))
            .transpose()?
            .unwrap_or(512);
        let output_path = get("output").map(PathBuf::from);

        let cfg = Self {
            mode,
            d,
            m,
            gammas,
            dt,
            t_end,
            n_paths,
            base_seed,
            s0,
            process,
            observables,
            record,
            grid_points,
            output_path,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        for &g in &self.gammas {
            ModelParams::new(self.d, self.m, g).map_err(|e| Error::Usage(format!("model parameters: {e}")))?;
        }
        for o in &self.observables {
            o.validate(self.d)?;
        }
        if self.mode == Mode::Densities {
            if self.grid_points < 2 {
                return Err(Error::Usage("grid_points: need at least 2".into()));
            }
            return Ok(());
        }
        StepConfig::new(self.dt, self.t_end).map_err(|e| Error::Usage(format!("dt/t_end: {e}")))?;
        if self.n_paths == 0 {
            return Err(Error::Usage("n_paths: must be >= 1".into()));
        }
        if !(self.s0 > 0.0 && self.s0.is_finite()) {
            return Err(Error::Usage(format!("s0: must be positive, got {}", self.s0)));
        }
        let process = self.process_kind();
        if process == ProcessKind::Radial && self.observables.iter().any(Observable::needs_direction) {
            return Err(Error::Usage(
                "process: radial cannot produce component observables".into(),
            ));
        }
        if process == ProcessKind::Cartesian && self.d != 2 && self.d != 3 {
            return Err(Error::Usage(format!(
                "process: cartesian supports d = 2, 3, got d = {}",
                self.d
            )));
        }
        if self.mode == Mode::Validate && self.record == RecordMode::Full {
            return Err(Error::Usage("record: validate uses final states only".into()));
        }
        Ok(())
    }

    pub fn process_kind(&self) -> ProcessKind {
        self.process
            .unwrap_or(if self.observables.iter().any(Observable::needs_direction) {
                ProcessKind::MomentumHyperbolic
            } else {
                ProcessKind::Radial
            })
    }

    fn params(&self, gamma: f64) -> Result<ModelParams> {
        ModelParams::new(self.d, self.m, gamma)
    }
}

/// Invariant law of an observable.
pub fn density_kind(obs: Observable) -> DensityKind {
    match obs {
        Observable::S => DensityKind::Radial,
        Observable::P0 => DensityKind::Energy,
        Observable::Speed => DensityKind::Speed,
        Observable::PComponent(_) => DensityKind::MomentumComponent,
        Observable::VComponent(_) => DensityKind::VelocityComponent,
    }
}

pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

/// What a run produced besides its files.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub failed_paths: usize,
    pub reports: Vec<(f64, Observable, GofReport)>,
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(fs::File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".failures");
    PathBuf::from(s)
}

fn simulate_ensemble(config: &RunConfig, gamma: f64, record: RecordMode) -> Result<PathEnsemble> {
    let params = config.params(gamma)?;
    let spec = RadialDriftSpec::for_params(params);
    let cfg = StepConfig::new(config.dt, config.t_end)?;
    let init = HyperbolicPoint::on_first_axis(config.s0, config.d)?;
    run_ensemble(
        &init,
        &spec,
        &cfg,
        config.n_paths,
        record,
        config.base_seed,
        config.process_kind(),
    )
}

/// Lists failed paths next to the main output, or on stderr without one.
fn report_failures(config: &RunConfig, ensembles: &[&PathEnsemble]) -> Result<usize> {
    let mut text = String::new();
    let mut count = 0;
    for ens in ensembles {
        for (i, p) in ens.paths.iter().enumerate() {
            if let Some(e) = &p.failure {
                count += 1;
                let t = p.diagnostics.steps as f64 * ens.cfg.dt;
                let _ = writeln!(
                    text,
                    "gamma={} path_id={i} t={} error={e}",
                    ens.params.gamma(),
                    fmt_real(t)
                );
            }
        }
    }
    if count > 0 {
        match &config.output_path {
            Some(p) => fs::write(sidecar_path(p), text)?,
            None => eprint!("{text}"),
        }
    }
    Ok(count)
}

fn run_simulate(config: &RunConfig) -> Result<RunOutcome> {
    let gamma = config.gammas[0];
    let obs = config.observables[0];
    let ens = simulate_ensemble(config, gamma, config.record)?;
    let rows = ens.rows(obs)?;
    let mut out = open_output(config.output_path.as_deref())?;
    writeln!(out, "path_id,t,value")?;
    for (id, t, v) in rows {
        writeln!(out, "{id},{},{}", fmt_real(t), fmt_real(v))?;
    }
    out.flush()?;
    let failed = report_failures(config, &[&ens])?;
    Ok(RunOutcome {
        exit_code: if failed > 0 { EXIT_FAILED } else { EXIT_OK },
        failed_paths: failed,
        reports: Vec::new(),
    })
}

/// Uniform grid over the support; unbounded ends are cut at the `1e-4` tail quantiles.
pub fn density_grid(spec: &DensitySpec, points: usize) -> Result<Vec<f64>> {
    let sup = spec.support();
    let lo = if sup.lo.is_finite() {
        sup.lo
    } else {
        spec.quantile(1e-4)?
    };
    let hi = if sup.hi.is_finite() {
        sup.hi
    } else {
        spec.quantile(1.0 - 1e-4)?
    };
    let step = (hi - lo) / (points - 1) as f64;
    let mut grid: Vec<f64> = (0..points).map(|i| lo + step * i as f64).collect();
    grid[points - 1] = hi;
    Ok(grid)
}

fn run_densities(config: &RunConfig) -> Result<RunOutcome> {
    let spec = DensitySpec::new(density_kind(config.observables[0]), config.params(config.gammas[0])?)?;
    let grid = density_grid(&spec, config.grid_points)?;
    let mut out = open_output(config.output_path.as_deref())?;
    writeln!(out, "x,density")?;
    for x in grid {
        writeln!(out, "{},{}", fmt_real(x), fmt_real(spec.density(x)?))?;
    }
    out.flush()?;
    Ok(RunOutcome {
        exit_code: EXIT_OK,
        failed_paths: 0,
        reports: Vec::new(),
    })
}

fn run_validate(config: &RunConfig) -> Result<RunOutcome> {
    let mut report = String::new();
    let _ = writeln!(report, "d={}", config.d);
    let _ = writeln!(report, "m={}", fmt_real(config.m));
    let _ = writeln!(report, "dt={}", fmt_real(config.dt));
    let _ = writeln!(report, "t_end={}", fmt_real(config.t_end));
    let _ = writeln!(report, "n_paths={}", config.n_paths);
    let _ = writeln!(report, "base_seed={}", config.base_seed);
    let _ = writeln!(report, "s0={}", fmt_real(config.s0));
    let _ = writeln!(report, "process={}", config.process_kind().name());

    // densities first, so a non-normalizable request fails before any simulation
    let mut specs = Vec::new();
    for &g in &config.gammas {
        for &obs in &config.observables {
            specs.push((g, obs, DensitySpec::new(density_kind(obs), config.params(g)?)?));
        }
    }

    let mut ensembles = Vec::new();
    for &g in &config.gammas {
        ensembles.push(simulate_ensemble(config, g, RecordMode::FinalOnly)?);
    }
    let mut reports = Vec::new();
    for (k, (g, obs, spec)) in specs.into_iter().enumerate() {
        let ens = &ensembles[config.gammas.iter().position(|&x| x == g).unwrap_or(0)];
        let samples = ens.final_values(obs)?;
        let r = ks_against(&samples, &spec)?;
        let _ = writeln!(report, "check.{k}.gamma={}", fmt_real(g));
        let _ = writeln!(report, "check.{k}.observable={obs}");
        let _ = writeln!(report, "check.{k}.n={}", r.n);
        let _ = writeln!(report, "check.{k}.ks_statistic={}", fmt_real(r.ks_statistic));
        let _ = writeln!(report, "check.{k}.ks_threshold={}", fmt_real(r.ks_threshold));
        let _ = writeln!(report, "check.{k}.chi2_statistic={}", fmt_real(r.chi2_statistic));
        let _ = writeln!(report, "check.{k}.chi2_dof={}", r.chi2_dof);
        let _ = writeln!(report, "check.{k}.pass={}", r.pass);
        reports.push((g, obs, r));
    }
    let refs: Vec<&PathEnsemble> = ensembles.iter().collect();
    let failed = report_failures(config, &refs)?;
    let all_pass = failed == 0 && reports.iter().all(|(_, _, r)| r.pass);
    let _ = writeln!(report, "failed_paths={failed}");
    let _ = writeln!(report, "pass={all_pass}");

    let mut out = open_output(config.output_path.as_deref())?;
    out.write_all(report.as_bytes())?;
    out.flush()?;
    Ok(RunOutcome {
        exit_code: if all_pass { EXIT_OK } else { EXIT_FAILED },
        failed_paths: failed,
        reports,
    })
}

/// Runs `config` on a pool capped by `MASSSHELL_THREADS` when it is set.
pub fn run(config: &RunConfig) -> Result<RunOutcome> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => Some(parse_field::<usize>(THREADS_ENV, &v)?).filter(|&n| n > 0),
        Err(_) => None,
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Usage(format!("thread pool: {e}")))?;
    pool.install(|| match config.mode {
        Mode::Simulate => run_simulate(config),
        Mode::Validate => run_validate(config),
        Mode::Densities => run_densities(config),
    })
}

impl Cli {
    fn flag_map(&self) -> BTreeMap<String, String> {
        let pairs = [
            ("d", &self.d),
            ("m", &self.m),
            ("gamma", &self.gamma),
            ("dt", &self.dt),
            ("t_end", &self.t_end),
            ("n_paths", &self.n_paths),
            ("base_seed", &self.base_seed),
            ("s0", &self.s0),
            ("process", &self.process),
            ("observable", &self.observable),
            ("record", &self.record),
            ("grid_points", &self.grid_points),
        ];
        let mut map: BTreeMap<String, String> = pairs
            .into_iter()
            .filter_map(|(k, v)| v.clone().map(|v| (k.to_string(), v)))
            .collect();
        if let Some(p) = &self.output {
            map.insert("output".into(), p.to_string_lossy().into_owned());
        }
        map
    }

    pub fn to_config(&self) -> Result<RunConfig> {
        let file = match &self.config {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| Error::Usage(format!("config: {}: {e}", p.display())))?;
                parse_config_text(&text)?
            }
            None => BTreeMap::new(),
        };
        RunConfig::from_sources(self.mode, &file, &self.flag_map())
    }
}

/// Parses arguments, runs, and maps the result to an exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let outcome = cli.to_config().and_then(|c| run(&c));
    match outcome {
        Ok(o) => o.exit_code,
        Err(e) => {
            eprintln!("massshell: {e}");
            match e {
                Error::Usage(_) | Error::Domain(_) | Error::NonNormalizable { .. } | Error::UnsupportedDimension(_) => {
                    EXIT_USAGE
                }
                _ => EXIT_FAILED,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flags(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn config_text_parsing() {
        let map = parse_config_text("# comment\nd = 3\n gamma=10 # trailing\n\nn-paths = 20\n").unwrap();
        assert_eq!(map["d"], "3");
        assert_eq!(map["gamma"], "10");
        assert_eq!(map["n_paths"], "20");
        assert!(parse_config_text("d 3").is_err());
        assert!(matches!(parse_config_text("colour = red"), Err(Error::Usage(m)) if m.contains("colour")));
    }

    #[test]
    fn flags_override_file() {
        let file = flags(&[("gamma", "4"), ("d", "2"), ("n_paths", "10")]);
        let cfg = RunConfig::from_sources(Mode::Simulate, &file, &flags(&[("gamma", "6")])).unwrap();
        assert_eq!(cfg.gammas, vec![6.0]);
        assert_eq!(cfg.d, 2);
        assert_eq!(cfg.n_paths, 10);
        assert_eq!(cfg.dt, 1.0 / 64.0);
    }

    #[test]
    fn usage_errors_name_the_field() {
        let cases: &[(&[(&str, &str)], &str)] = &[
            (&[("gamma", "x")], "gamma"),
            (&[], "gamma"),
            (&[("gamma", "4"), ("dt", "-1")], "dt"),
            (&[("gamma", "4"), ("n_paths", "0")], "n_paths"),
            (&[("gamma", "4"), ("observable", "p_component(5)")], "observable"),
            (
                &[("gamma", "4"), ("observable", "p_component(1)"), ("process", "radial")],
                "process",
            ),
            (&[("gamma", "4,6")], "gamma"),
        ];
        for (pairs, field) in cases {
            match RunConfig::from_sources(Mode::Simulate, &BTreeMap::new(), &flags(pairs)) {
                Err(Error::Usage(msg)) => assert!(msg.contains(field), "{msg} lacks {field}"),
                other => panic!("{pairs:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn validate_lists() {
        let cfg = RunConfig::from_sources(
            Mode::Validate,
            &BTreeMap::new(),
            &flags(&[
                ("gamma", "4, 6,8"),
                ("observable", "p0,speed,p_component(1),v_component(2)"),
            ]),
        )
        .unwrap();
        assert_eq!(cfg.gammas, vec![4.0, 6.0, 8.0]);
        assert_eq!(cfg.observables.len(), 4);
        assert_eq!(cfg.process_kind(), ProcessKind::MomentumHyperbolic);
    }

    #[test]
    fn default_process_follows_observable() {
        let cfg = RunConfig::from_sources(Mode::Simulate, &BTreeMap::new(), &flags(&[("gamma", "4")])).unwrap();
        assert_eq!(cfg.process_kind(), ProcessKind::Radial);
    }

    #[test]
    fn real_formatting_keeps_precision() {
        let x = std::f64::consts::PI;
        let s = fmt_real(x);
        assert_eq!(s.parse::<f64>().unwrap(), x);
        assert_eq!(fmt_real(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn density_grid_covers_support() {
        let sp = DensitySpec::new(DensityKind::Speed, ModelParams::unit_mass(3, 4.0).unwrap()).unwrap();
        let g = density_grid(&sp, 512).unwrap();
        assert_eq!(g.len(), 512);
        assert_eq!((g[0], g[511]), (0.0, 1.0));
        let sp = DensitySpec::new(DensityKind::MomentumComponent, ModelParams::unit_mass(3, 6.0).unwrap()).unwrap();
        let g = density_grid(&sp, 11).unwrap();
        assert!((g[0] + g[10]).abs() < 1e-8);
        assert!(g[10] > 1.0);
    }
}
