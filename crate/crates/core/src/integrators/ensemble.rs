//! Independent-path ensembles with per-path RNG streams.
//!
//! Path `i` draws from ChaCha8 seeded with `base_seed` on stream `i`, with
//! normal variates from `rand_distr::StandardNormal` (ziggurat). Results are
//! identical for any thread count.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use rand::Rng;

use crate::dynamics::RadialDriftSpec;
use crate::error::{Error, Result};
use crate::manifold::{hyp_to_cart, HyperbolicPoint, ModelParams};

use super::cartesian::{cartesian_step, draw_increments, CartesianState};
use super::radial::{bem_step_detailed, RadialPathState, SolvePath};
use super::skew::{skew_step, SkewState};
use super::StepConfig;

/// Which equation generates the paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProcessKind {
    /// Radial equation alone, stored as `s`.
    Radial,
    /// Skew product of radial and sphere processes, stored as `(s, omega)`.
    MomentumHyperbolic,
    /// Cartesian Euler–Maruyama, stored as `(p0, p)`.
    Cartesian,
}

impl ProcessKind {
    pub fn name(&self) -> &'static str {
        match self {
            ProcessKind::Radial => "radial",
            ProcessKind::MomentumHyperbolic => "momentum_hyperbolic",
            ProcessKind::Cartesian => "cartesian",
        }
    }
}

impl FromStr for ProcessKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "radial" => Ok(ProcessKind::Radial),
            "momentum_hyperbolic" => Ok(ProcessKind::MomentumHyperbolic),
            "cartesian" => Ok(ProcessKind::Cartesian),
            other => Err(Error::Usage(format!(
                "process: unknown value '{other}' (radial, momentum_hyperbolic, cartesian)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordMode {
    FinalOnly,
    Full,
}

impl FromStr for RecordMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "final_only" | "final" => Ok(RecordMode::FinalOnly),
            "full" => Ok(RecordMode::Full),
            other => Err(Error::Usage(format!(
                "record: unknown value '{other}' (final_only, full)"
            ))),
        }
    }
}

/// Scalar read off a path state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observable {
    S,
    P0,
    Speed,
    /// 1-based spatial index.
    PComponent(usize),
    /// 1-based spatial index.
    VComponent(usize),
}

impl Observable {
    pub fn validate(&self, d: usize) -> Result<()> {
        match *self {
            Observable::PComponent(i) | Observable::VComponent(i) if i == 0 || i > d => {
                Err(Error::Usage(format!("observable: component index {i} outside 1..={d}")))
            }
            _ => Ok(()),
        }
    }

    pub fn needs_direction(&self) -> bool {
        matches!(self, Observable::PComponent(_) | Observable::VComponent(_))
    }
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Observable::S => write!(f, "s"),
            Observable::P0 => write!(f, "p0"),
            Observable::Speed => write!(f, "speed"),
            Observable::PComponent(i) => write!(f, "p_component({i})"),
            Observable::VComponent(i) => write!(f, "v_component({i})"),
        }
    }
}

impl FromStr for Observable {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let component = |prefix: &str| -> Option<Result<usize>> {
            let inner = s.strip_prefix(prefix)?.strip_prefix('(')?.strip_suffix(')')?;
            Some(
                inner
                    .trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Usage(format!("observable: bad component index in '{s}'"))),
            )
        };
        match s {
            "s" => Ok(Observable::S),
            "p0" => Ok(Observable::P0),
            "speed" => Ok(Observable::Speed),
            _ => {
                if let Some(i) = component("p_component") {
                    return Ok(Observable::PComponent(i?));
                }
                if let Some(i) = component("v_component") {
                    return Ok(Observable::VComponent(i?));
                }
                Err(Error::Usage(format!(
                    "observable: unknown value '{s}' (s, p0, speed, p_component(i), v_component(i))"
                )))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PathDiagnostics {
    pub steps: usize,
    /// Steps where Newton failed and the bracketed solve supplied the root.
    pub bisection_rescues: u64,
    /// Smallest radial value seen (for cartesian paths, `asinh(|p|/m)`).
    pub min_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathRecord {
    /// Flattened states, `stride` values per recorded time.
    pub values: Vec<f64>,
    pub failure: Option<Error>,
    pub diagnostics: PathDiagnostics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    pub process: ProcessKind,
    pub params: ModelParams,
    pub cfg: StepConfig,
    pub record: RecordMode,
    pub base_seed: u64,
    /// Recorded times (`[t_end]` for final-only ensembles).
    pub times: Vec<f64>,
    pub paths: Vec<PathRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleSummary {
    pub n_paths: usize,
    pub failures: usize,
    pub bisection_rescues: u64,
    /// Paths whose radial value reached zero or below.
    pub positivity_violations: usize,
    pub min_s: f64,
}

/// RNG for path `index` of an ensemble.
pub fn path_rng(base_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(index);
    rng
}

fn stride_of(process: ProcessKind, d: usize) -> usize {
    match process {
        ProcessKind::Radial => 1,
        ProcessKind::MomentumHyperbolic | ProcessKind::Cartesian => 1 + d,
    }
}

pub fn run_ensemble(
    init: &HyperbolicPoint,
    spec: &RadialDriftSpec,
    cfg: &StepConfig,
    n_paths: usize,
    record: RecordMode,
    base_seed: u64,
    process: ProcessKind,
) -> Result<PathEnsemble> {
    cfg.validate()?;
    if n_paths == 0 {
        return Err(Error::Usage("n_paths must be >= 1".into()));
    }
    let d = spec.params.d();
    if init.dim() != d {
        return Err(Error::Usage(format!(
            "initial point has d = {}, model has d = {d}",
            init.dim()
        )));
    }
    if !(init.s > 0.0) {
        return Err(Error::Domain("initial radial value must be > 0".into()));
    }
    if process == ProcessKind::Cartesian && d != 2 && d != 3 {
        return Err(Error::UnsupportedDimension(d));
    }
    let n_steps = cfg.n_steps();
    let times = match record {
        RecordMode::FinalOnly => vec![cfg.time_at(n_steps)],
        RecordMode::Full => (0..=n_steps).map(|k| cfg.time_at(k)).collect(),
    };
    let paths = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(base_seed, i);
            match process {
                ProcessKind::Radial => run_radial(init.s, spec, cfg, record, &mut rng),
                ProcessKind::MomentumHyperbolic => run_skew(init, spec, cfg, record, &mut rng),
                ProcessKind::Cartesian => run_cartesian(init, spec, cfg, record, &mut rng),
            }
        })
        .collect();
    Ok(PathEnsemble {
        process,
        params: spec.params,
        cfg: *cfg,
        record,
        base_seed,
        times,
        paths,
    })
}

struct Recorder {
    values: Vec<f64>,
    stride: usize,
    full: bool,
}

impl Recorder {
    fn new(stride: usize, record: RecordMode, n_steps: usize) -> Self {
        let full = record == RecordMode::Full;
        let cap = if full { stride * (n_steps + 1) } else { stride };
        Self {
            values: Vec::with_capacity(cap),
            stride,
            full,
        }
    }

    fn push(&mut self, state: &[f64]) {
        debug_assert_eq!(state.len(), self.stride);
        self.values.extend_from_slice(state);
    }

    fn push_final(&mut self, state: &[f64]) {
        if !self.full {
            self.values.clear();
            self.values.extend_from_slice(state);
        }
    }
}

fn finish(rec: Recorder, failure: Option<Error>, diagnostics: PathDiagnostics) -> PathRecord {
    let values = if failure.is_some() && !rec.full {
        Vec::new()
    } else {
        rec.values
    };
    PathRecord {
        values,
        failure,
        diagnostics,
    }
}

fn run_radial<R: Rng>(
    s0: f64,
    spec: &RadialDriftSpec,
    cfg: &StepConfig,
    record: RecordMode,
    rng: &mut R,
) -> PathRecord {
    let n = cfg.n_steps();
    let mut rec = Recorder::new(1, record, n);
    let mut diag = PathDiagnostics {
        min_s: s0,
        ..Default::default()
    };
    let mut state = RadialPathState { s: s0, t: 0.0 };
    if rec.full {
        rec.push(&[s0]);
    }
    let sigma = cfg.dt.sqrt() * spec.diffusion();
    for _ in 0..n {
        let z: f64 = rng.sample(StandardNormal);
        match bem_step_detailed(&state, spec, cfg, z * sigma) {
            Ok(out) => {
                state = out.state;
                if out.path == SolvePath::BisectionRescue {
                    diag.bisection_rescues += 1;
                }
            }
            Err(e) => return finish(rec, Some(e), diag),
        }
        diag.steps += 1;
        diag.min_s = diag.min_s.min(state.s);
        if rec.full {
            rec.push(&[state.s]);
        }
    }
    rec.push_final(&[state.s]);
    finish(rec, None, diag)
}

fn skew_values(st: &SkewState, buf: &mut Vec<f64>) {
    buf.clear();
    buf.push(st.radial.s);
    buf.extend_from_slice(st.omega.as_slice());
}

fn run_skew<R: Rng>(
    init: &HyperbolicPoint,
    spec: &RadialDriftSpec,
    cfg: &StepConfig,
    record: RecordMode,
    rng: &mut R,
) -> PathRecord {
    let d = spec.params.d();
    let n = cfg.n_steps();
    let mut rec = Recorder::new(1 + d, record, n);
    let mut diag = PathDiagnostics {
        min_s: init.s,
        ..Default::default()
    };
    let mut state = match SkewState::new(init) {
        Ok(s) => s,
        Err(e) => return finish(rec, Some(e), diag),
    };
    let mut buf = Vec::with_capacity(1 + d);
    if rec.full {
        skew_values(&state, &mut buf);
        rec.push(&buf);
    }
    for _ in 0..n {
        match skew_step(&mut state, spec, cfg, rng) {
            Ok(info) => {
                if info.solve == SolvePath::BisectionRescue {
                    diag.bisection_rescues += 1;
                }
            }
            Err(e) => return finish(rec, Some(e), diag),
        }
        diag.steps += 1;
        diag.min_s = diag.min_s.min(state.radial.s);
        if rec.full {
            skew_values(&state, &mut buf);
            rec.push(&buf);
        }
    }
    skew_values(&state, &mut buf);
    rec.push_final(&buf);
    finish(rec, None, diag)
}

fn run_cartesian<R: Rng>(
    init: &HyperbolicPoint,
    spec: &RadialDriftSpec,
    cfg: &StepConfig,
    record: RecordMode,
    rng: &mut R,
) -> PathRecord {
    let d = spec.params.d();
    let m = spec.params.m();
    let n = cfg.n_steps();
    let mut rec = Recorder::new(1 + d, record, n);
    let mut diag = PathDiagnostics {
        min_s: init.s,
        ..Default::default()
    };
    let mut state = CartesianState::new(hyp_to_cart(init, &spec.params));
    if rec.full {
        rec.push(&state.p.to_four_vector());
    }
    let mut dw = vec![0.0; d];
    for _ in 0..n {
        draw_increments(rng, cfg.dt, &mut dw);
        match cartesian_step(&state, spec, cfg.dt, &dw) {
            Ok(next) => state = next,
            Err(e) => return finish(rec, Some(e), diag),
        }
        diag.steps += 1;
        diag.min_s = diag.min_s.min((state.spatial_radius() / m).asinh());
        if rec.full {
            rec.push(&state.p.to_four_vector());
        }
    }
    rec.push_final(&state.p.to_four_vector());
    finish(rec, None, diag)
}

impl PathEnsemble {
    pub fn stride(&self) -> usize {
        stride_of(self.process, self.params.d())
    }

    pub fn n_paths(&self) -> usize {
        self.paths.len()
    }

    pub fn failure_count(&self) -> usize {
        self.paths.iter().filter(|p| p.failure.is_some()).count()
    }

    pub fn summary(&self) -> EnsembleSummary {
        let min_s = self
            .paths
            .iter()
            .map(|p| p.diagnostics.min_s)
            .fold(f64::INFINITY, f64::min);
        EnsembleSummary {
            n_paths: self.paths.len(),
            failures: self.failure_count(),
            bisection_rescues: self.paths.iter().map(|p| p.diagnostics.bisection_rescues).sum(),
            positivity_violations: self.paths.iter().filter(|p| !(p.diagnostics.min_s > 0.0)).count(),
            min_s,
        }
    }

    /// Evaluates `obs` on one stored state.
    pub fn evaluate(&self, state: &[f64], obs: Observable) -> Result<f64> {
        let d = self.params.d();
        let m = self.params.m();
        obs.validate(d)?;
        match self.process {
            ProcessKind::Radial => {
                let s = state[0];
                match obs {
                    Observable::S => Ok(s),
                    Observable::P0 => Ok(m * s.cosh()),
                    Observable::Speed => Ok(s.tanh()),
                    _ => Err(Error::Usage(format!(
                        "observable {obs} needs the sphere component; use process momentum_hyperbolic"
                    ))),
                }
            }
            ProcessKind::MomentumHyperbolic => {
                let s = state[0];
                let omega = &state[1..];
                Ok(match obs {
                    Observable::S => s,
                    Observable::P0 => m * s.cosh(),
                    Observable::Speed => s.tanh(),
                    Observable::PComponent(i) => m * s.sinh() * omega[i - 1],
                    Observable::VComponent(i) => s.tanh() * omega[i - 1],
                })
            }
            ProcessKind::Cartesian => {
                let p0 = state[0];
                let p = &state[1..];
                let norm = p.iter().map(|x| x * x).sum::<f64>().sqrt();
                Ok(match obs {
                    Observable::S => (norm / m).asinh(),
                    Observable::P0 => p0,
                    Observable::Speed => norm / p0,
                    Observable::PComponent(i) => p[i - 1],
                    Observable::VComponent(i) => p[i - 1] / p0,
                })
            }
        }
    }

    /// States of one path, one slice per recorded time.
    pub fn states(&self, path: usize) -> impl Iterator<Item = &[f64]> {
        self.paths[path].values.chunks_exact(self.stride())
    }

    /// `obs` at `t_end` over all paths that completed.
    pub fn final_values(&self, obs: Observable) -> Result<Vec<f64>> {
        let stride = self.stride();
        self.paths
            .iter()
            .filter(|p| p.failure.is_none())
            .map(|p| {
                let last = &p.values[p.values.len() - stride..];
                self.evaluate(last, obs)
            })
            .collect()
    }

    /// Completed paths' `(path_id, t, value)` rows in path order.
    pub fn rows(&self, obs: Observable) -> Result<Vec<(usize, f64, f64)>> {
        let mut rows = Vec::new();
        for (i, p) in self.paths.iter().enumerate() {
            if p.failure.is_some() {
                continue;
            }
            for (k, state) in self.states(i).enumerate() {
                rows.push((i, self.times[k], self.evaluate(state, obs)?));
            }
        }
        Ok(rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrators::simulate_momentum_path;

    fn spec(d: usize, gamma: f64) -> RadialDriftSpec {
        RadialDriftSpec::for_params(ModelParams::new(d, 1.0, gamma).unwrap())
    }

    #[test]
    fn observable_parsing() {
        assert_eq!(
            "p_component(1)".parse::<Observable>().unwrap(),
            Observable::PComponent(1)
        );
        assert_eq!(
            " v_component( 2 )".parse::<Observable>().unwrap(),
            Observable::VComponent(2)
        );
        assert_eq!("speed".parse::<Observable>().unwrap(), Observable::Speed);
        assert!("p_component(x)".parse::<Observable>().is_err());
        assert!("energy".parse::<Observable>().is_err());
        for o in [
            Observable::S,
            Observable::P0,
            Observable::PComponent(3),
            Observable::VComponent(1),
        ] {
            assert_eq!(o.to_string().parse::<Observable>().unwrap(), o);
        }
        assert!(Observable::PComponent(4).validate(3).is_err());
        assert!(Observable::VComponent(0).validate(3).is_err());
    }

    #[test]
    fn single_path_equals_direct_simulation() {
        let sp = spec(3, 6.0);
        let cfg = StepConfig::new(1.0 / 64.0, 2.0).unwrap();
        let init = HyperbolicPoint::on_first_axis(1.0, 3).unwrap();
        let ens = run_ensemble(
            &init,
            &sp,
            &cfg,
            1,
            RecordMode::Full,
            99,
            ProcessKind::MomentumHyperbolic,
        )
        .unwrap();
        let mut rng = path_rng(99, 0);
        let direct = simulate_momentum_path(&init, &sp, &cfg, &mut rng).unwrap();
        let states: Vec<&[f64]> = ens.states(0).collect();
        assert_eq!(states.len(), direct.len());
        for (st, c) in states.iter().zip(&direct) {
            assert_eq!(ens.evaluate(st, Observable::P0).unwrap(), c.p0);
            assert_eq!(ens.evaluate(st, Observable::PComponent(2)).unwrap(), c.p[1]);
        }
    }

    #[test]
    fn same_seed_same_ensemble_across_record_modes() {
        let sp = spec(2, 4.0);
        let cfg = StepConfig::new(1.0 / 64.0, 1.0).unwrap();
        let init = HyperbolicPoint::on_first_axis(1.0, 2).unwrap();
        for process in [
            ProcessKind::Radial,
            ProcessKind::MomentumHyperbolic,
            ProcessKind::Cartesian,
        ] {
            let a = run_ensemble(&init, &sp, &cfg, 16, RecordMode::Full, 5, process).unwrap();
            let b = run_ensemble(&init, &sp, &cfg, 16, RecordMode::Full, 5, process).unwrap();
            assert_eq!(a, b);
            let f = run_ensemble(&init, &sp, &cfg, 16, RecordMode::FinalOnly, 5, process).unwrap();
            assert_eq!(f.times, vec![1.0]);
            for obs in [Observable::S, Observable::P0] {
                assert_eq!(a.final_values(obs).unwrap(), f.final_values(obs).unwrap());
            }
            let c = run_ensemble(&init, &sp, &cfg, 16, RecordMode::FinalOnly, 6, process).unwrap();
            assert_ne!(
                f.final_values(Observable::S).unwrap(),
                c.final_values(Observable::S).unwrap()
            );
        }
    }

    #[test]
    fn radial_process_rejects_component_observables() {
        let sp = spec(3, 6.0);
        let cfg = StepConfig::new(0.1, 0.5).unwrap();
        let init = HyperbolicPoint::on_first_axis(1.0, 3).unwrap();
        let e = run_ensemble(&init, &sp, &cfg, 2, RecordMode::FinalOnly, 1, ProcessKind::Radial).unwrap();
        assert!(e.final_values(Observable::PComponent(1)).is_err());
        assert_eq!(e.final_values(Observable::S).unwrap().len(), 2);
    }

    #[test]
    fn argument_validation() {
        let sp = spec(4, 6.0);
        let cfg = StepConfig::new(0.1, 0.5).unwrap();
        let init = HyperbolicPoint::on_first_axis(1.0, 4).unwrap();
        assert!(run_ensemble(&init, &sp, &cfg, 0, RecordMode::FinalOnly, 1, ProcessKind::Radial).is_err());
        assert!(matches!(
            run_ensemble(&init, &sp, &cfg, 1, RecordMode::FinalOnly, 1, ProcessKind::Cartesian),
            Err(Error::UnsupportedDimension(4))
        ));
        let wrong = HyperbolicPoint::on_first_axis(1.0, 3).unwrap();
        assert!(run_ensemble(&wrong, &sp, &cfg, 1, RecordMode::FinalOnly, 1, ProcessKind::Radial).is_err());
    }

    #[test]
    fn rows_cover_every_recorded_time() {
        let sp = spec(2, 4.0);
        let cfg = StepConfig::new(0.25, 1.0).unwrap();
        let init = HyperbolicPoint::on_first_axis(1.0, 2).unwrap();
        let e = run_ensemble(&init, &sp, &cfg, 3, RecordMode::Full, 1, ProcessKind::Radial).unwrap();
        let rows = e.rows(Observable::S).unwrap();
        assert_eq!(rows.len(), 3 * 5);
        assert_eq!(rows[0], (0, 0.0, 1.0));
        assert_eq!(rows[4].1, 1.0);
    }
}
