//! Experiment configuration, the sweep runner for each experiment kind, and
//! CSV persistence of the resulting records.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::benchmarks::{
    run_secrecy_scheme, sensing_layout, theoretical_crb_bound, PipelineConfig, Scheme,
    SelectionMode, SensingLayout,
};
use crate::comm_opt::{optimize_positions, CommObjective};
use crate::error::{Error, Result};
use crate::geometry::{echo_channel, SpatialAngles, Wavevector};
use crate::rng::{derive_seed, rng_from_seed};
use crate::scene::{dbm_to_watts, dbsm_to_m2, Scene, SceneConstants};
use crate::sensing::{mle_estimate, probe_dft, synthesize_echo, uncertainty_region};
use crate::sensing_opt::{optimize_sensing_all, Block};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ExperimentKind {
    ConvergenceSensing,
    ConvergenceComm,
    MseVsPower,
    SecrecyVsPower,
    RobustnessSweep,
    RegionWidth,
    MaCount,
    RegionSize,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 8] = [
        ExperimentKind::ConvergenceSensing,
        ExperimentKind::ConvergenceComm,
        ExperimentKind::MseVsPower,
        ExperimentKind::SecrecyVsPower,
        ExperimentKind::RobustnessSweep,
        ExperimentKind::RegionWidth,
        ExperimentKind::MaCount,
        ExperimentKind::RegionSize,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            ExperimentKind::ConvergenceSensing => "convergence-sensing",
            ExperimentKind::ConvergenceComm => "convergence-comm",
            ExperimentKind::MseVsPower => "mse-vs-power",
            ExperimentKind::SecrecyVsPower => "secrecy-vs-power",
            ExperimentKind::RobustnessSweep => "robustness-sweep",
            ExperimentKind::RegionWidth => "region-width",
            ExperimentKind::MaCount => "ma-count",
            ExperimentKind::RegionSize => "region-size",
        }
    }

    /// Sweep values used when the config does not set `sweep`.
    pub fn default_sweep(self) -> Vec<f64> {
        match self {
            ExperimentKind::ConvergenceSensing | ExperimentKind::ConvergenceComm => Vec::new(),
            ExperimentKind::MseVsPower => vec![10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0],
            ExperimentKind::SecrecyVsPower => vec![10.0, 15.0, 20.0, 25.0, 30.0],
            ExperimentKind::RobustnessSweep => vec![118.0, 119.0, 120.0, 121.0, 122.0],
            ExperimentKind::RegionWidth => vec![5.0, 10.0, 20.0, 30.0, 40.0],
            ExperimentKind::MaCount => vec![4.0, 9.0, 16.0],
            ExperimentKind::RegionSize => vec![2.0, 3.0, 4.0, 5.0],
        }
    }

    fn default_trials(self) -> usize {
        match self {
            ExperimentKind::MseVsPower => 200,
            ExperimentKind::RegionWidth => 10,
            _ => 1,
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.tag() == s)
            .ok_or_else(|| Error::Config {
                field: "experiment-kind".into(),
                message: format!("unknown kind `{s}`"),
            })
    }
}

/// Everything an experiment run needs, in internal units.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentConfig {
    pub scene: Scene,
    pub pipeline: PipelineConfig,
    /// Monte Carlo count: MLE trials for `mse-vs-power`, eavesdropper
    /// realizations for `region-width`.
    pub trials: Option<usize>,
    pub sweep: Option<Vec<f64>>,
    pub record_wall_time: bool,
}

impl ExperimentConfig {
    pub fn trials_for(&self, kind: ExperimentKind) -> usize {
        self.trials.unwrap_or(kind.default_trials())
    }

    pub fn sweep_for(&self, kind: ExperimentKind) -> Vec<f64> {
        self.sweep.clone().unwrap_or_else(|| kind.default_sweep())
    }

    pub fn validate(&self) -> Result<()> {
        self.scene.validate()?;
        self.pipeline.ao.validate()?;
        self.pipeline.comm.validate()?;
        if self.trials == Some(0) {
            return Err(cfg_err("trials", "must be >= 1"));
        }
        Ok(())
    }
}

fn cfg_err(field: &str, message: impl Into<String>) -> Error {
    Error::Config {
        field: field.into(),
        message: message.into(),
    }
}

fn parse_num<T: FromStr>(field: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| cfg_err(field, format!("cannot parse `{v}`")))
}

fn parse_list(field: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',').map(|s| parse_num(field, s.trim())).collect()
}

fn parse_bool(field: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(cfg_err(field, format!("expected a boolean, got `{v}`"))),
    }
}

/// Converts a flat `key = value` config with `#` comments into internal
/// units: dBm to watts, dBsm to m^2, degrees to radians. Unset keys keep the
/// default scene.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut kv = BTreeMap::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(cfg_err(&format!("line {}", no + 1), "expected `key = value`"));
        };
        let k = k.trim().to_string();
        if kv.insert(k.clone(), v.trim().to_string()).is_some() {
            return Err(cfg_err(&k, "duplicate key"));
        }
    }

    let mut cfg = ExperimentConfig::default();
    let k: &mut SceneConstants = &mut cfg.scene.constants;
    let mut angles = [120.0, 90.0, 120.0, 120.0];
    let mut region_wl = None;
    let mut spacing_wl = None;
    let p = &mut cfg.pipeline;
    for (key, v) in &kv {
        let f = key.as_str();
        match f {
            "wavelength" => k.wavelength = parse_num(f, v)?,
            "sensing_power_dbm" => k.sensing_power = dbm_to_watts(parse_num(f, v)?),
            "comm_power_dbm" => k.comm_power_max = dbm_to_watts(parse_num(f, v)?),
            "noise_sensing_dbm" => k.noise_sensing = dbm_to_watts(parse_num(f, v)?),
            "noise_comm_dbm" => k.noise_comm = dbm_to_watts(parse_num(f, v)?),
            "noise_eve_dbm" => k.noise_eve = dbm_to_watts(parse_num(f, v)?),
            "snapshots" => k.snapshots = parse_num(f, v)?,
            "rcs_dbsm" => k.rcs = dbsm_to_m2(parse_num(f, v)?),
            "dist_bc" => k.dist_bc = parse_num(f, v)?,
            "dist_be" => k.dist_be = parse_num(f, v)?,
            "crb_threshold" => k.crb_threshold = parse_num(f, v)?,
            "num_tx" => cfg.scene.num_tx = parse_num(f, v)?,
            "num_rx" => cfg.scene.num_rx = parse_num(f, v)?,
            "region_side_wavelengths" => region_wl = Some(parse_num::<f64>(f, v)?),
            "min_spacing_wavelengths" => spacing_wl = Some(parse_num::<f64>(f, v)?),
            "legit_theta_deg" => angles[0] = parse_num(f, v)?,
            "legit_phi_deg" => angles[1] = parse_num(f, v)?,
            "eve_theta_deg" => angles[2] = parse_num(f, v)?,
            "eve_phi_deg" => angles[3] = parse_num(f, v)?,
            "delta1" => p.ao.delta1 = parse_num(f, v)?,
            "delta2" => p.ao.delta2 = parse_num(f, v)?,
            "sensing_max_outer" => p.ao.max_outer = parse_num(f, v)?,
            "sensing_max_inner" => p.ao.max_inner = parse_num(f, v)?,
            "num_inits" => p.ao.num_inits = parse_num(f, v)?,
            "delta3" => p.comm.delta3 = parse_num(f, v)?,
            "delta4" => p.comm.delta4 = parse_num(f, v)?,
            "delta5" => p.comm.delta5 = parse_num(f, v)?,
            "beam_max_iter" => p.comm.beam_max_iter = parse_num(f, v)?,
            "comm_max_outer" => p.comm.max_outer = parse_num(f, v)?,
            "comm_max_inner" => p.comm.max_inner = parse_num(f, v)?,
            "line_search_resolution" => p.comm.resolution = parse_num(f, v)?,
            "estimate_trials" => p.comm.trials = parse_num(f, v)?,
            "fd_step_wavelengths" => p.comm.fd_step = parse_num(f, v)?,
            "hull_grid" => p.comm.hull_grid = parse_grid(f, v)?,
            "eval_grid" => p.comm.eval_grid = parse_grid(f, v)?,
            "region_scale" => p.comm.region_scale = parse_num(f, v)?,
            "placement_objective" => {
                p.comm.objective = match v.as_str() {
                    "hull" => CommObjective::HullSamples,
                    "fixed" => CommObjective::FixedEstimate,
                    _ => return Err(cfg_err(f, "expected `hull` or `fixed`")),
                }
            }
            "mle_grid_step" => p.comm.mle.grid_step = parse_num(f, v)?,
            "mle_refine_levels" => p.comm.mle.refine_levels = parse_num(f, v)?,
            "an_split" => p.an_split = parse_num(f, v)?,
            "an_draws" => p.an_draws = parse_num(f, v)?,
            "selection" => {
                p.selection = match v.as_str() {
                    "greedy" => SelectionMode::Greedy,
                    "exhaustive" => SelectionMode::Exhaustive,
                    _ => return Err(cfg_err(f, "expected `greedy` or `exhaustive`")),
                }
            }
            "trials" => cfg.trials = Some(parse_num(f, v)?),
            "sweep" => cfg.sweep = Some(parse_list(f, v)?),
            "record_wall_time" => cfg.record_wall_time = parse_bool(f, v)?,
            _ => return Err(cfg_err(f, "unknown key")),
        }
    }
    let lambda = cfg.scene.constants.wavelength;
    if !(lambda > 0.0) {
        return Err(cfg_err("wavelength", "must be > 0"));
    }
    cfg.scene.region_side = region_wl.unwrap_or(5.0) * lambda;
    cfg.scene.min_spacing = spacing_wl.unwrap_or(0.5) * lambda;
    let wv = |t: f64, ph: f64, field: &str| {
        SpatialAngles::from_degrees(t, ph)
            .map(Wavevector::from_angles)
            .map_err(|e| cfg_err(field, e.to_string()))
    };
    cfg.scene.legit = wv(angles[0], angles[1], "legit angles")?;
    cfg.scene.eve = wv(angles[2], angles[3], "eve angles")?;
    cfg.validate().map_err(|e| match e {
        Error::Config { .. } => e,
        other => cfg_err("config", other.to_string()),
    })?;
    Ok(cfg)
}

fn parse_grid(field: &str, v: &str) -> Result<(usize, usize)> {
    let (a, b) = v
        .split_once('x')
        .ok_or_else(|| cfg_err(field, "expected `<rows>x<cols>`"))?;
    Ok((parse_num(field, a.trim())?, parse_num(field, b.trim())?))
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| cfg_err("config", format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub experiment: String,
    pub sweep: f64,
    pub scheme: String,
    pub metric: String,
    pub value: f64,
    pub seed: u64,
    pub wall_ms: f64,
}

impl RunRecord {
    /// Field-wise equality with NaN equal to NaN.
    pub fn same_as(&self, other: &RunRecord) -> bool {
        let eq = |a: f64, b: f64| a.to_bits() == b.to_bits() || a == b;
        self.experiment == other.experiment
            && eq(self.sweep, other.sweep)
            && self.scheme == other.scheme
            && self.metric == other.metric
            && eq(self.value, other.value)
            && self.seed == other.seed
            && eq(self.wall_ms, other.wall_ms)
    }
}

/// Sorts by sweep value then scheme; equal keys keep their insertion order.
pub fn sort_records(records: &mut [RunRecord]) {
    records.sort_by(|a, b| a.sweep.total_cmp(&b.sweep).then_with(|| a.scheme.cmp(&b.scheme)));
}

pub fn emit_csv(records: &[RunRecord], path: &Path) -> Result<()> {
    if records.is_empty() {
        return Err(Error::Io("no records to write".into()));
    }
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<RunRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Collects rows for one sweep point and scheme.
struct Point<'a> {
    kind: ExperimentKind,
    sweep: f64,
    scheme: &'a str,
    seed: u64,
    wall_ms: f64,
}

impl Point<'_> {
    fn row(&self, metric: &str, value: f64) -> RunRecord {
        RunRecord {
            experiment: self.kind.tag().into(),
            sweep: self.sweep,
            scheme: self.scheme.into(),
            metric: metric.into(),
            value,
            seed: self.seed,
            wall_ms: self.wall_ms,
        }
    }
}

fn point_seed(root: u64, kind: ExperimentKind, sweep: f64, scheme: &str, i: u64) -> u64 {
    derive_seed(root, &[kind.tag(), &sweep.to_string(), scheme], i)
}

/// Runs `body` for one point; an error becomes a single `failed` row.
fn guarded<F>(kind: ExperimentKind, sweep: f64, scheme: &str, seed: u64, wall: bool, body: F) -> Vec<RunRecord>
where
    F: FnOnce(u64) -> Result<Vec<(String, f64)>>,
{
    let start = Instant::now();
    let out = body(seed);
    let wall_ms = if wall { start.elapsed().as_secs_f64() * 1e3 } else { 0.0 };
    let p = Point {
        kind,
        sweep,
        scheme,
        seed,
        wall_ms,
    };
    match out {
        Ok(rows) => rows.iter().map(|(m, v)| p.row(m, *v)).collect(),
        Err(_) => vec![p.row("failed", f64::NAN)],
    }
}

fn sensing_config(cfg: &ExperimentConfig, kind: ExperimentKind, root: u64) -> PipelineConfig {
    let mut p = cfg.pipeline;
    p.ao.seed = derive_seed(root, &[kind.tag(), "sensing-layout"], 0);
    p
}

/// Empirical per-axis MSE of the MLE over `trials` noisy echoes.
pub fn mle_mse(
    scene: &Scene,
    layout: &SensingLayout,
    trials: usize,
    seed: u64,
    mle: crate::sensing::MleOptions,
) -> Result<(f64, f64)> {
    let k = &scene.constants;
    let probe = probe_dft(layout.tx.len(), k.snapshots, k.sensing_power)?;
    let ch = echo_channel(&layout.tx, &layout.rx, scene.eve, k.zeta_s(), k.wavelength);
    let errs: Vec<Result<(f64, f64)>> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let obs = synthesize_echo(&ch, &probe, k.noise_sensing, derive_seed(seed, &["mle"], i as u64));
            let e = mle_estimate(&obs, &probe, &layout.tx, &layout.rx, k.wavelength, mle)?;
            Ok(((e.alpha - scene.eve.alpha).powi(2), (e.beta - scene.eve.beta).powi(2)))
        })
        .collect();
    let errs = errs.into_iter().collect::<Result<Vec<_>>>()?;
    let n = trials as f64;
    Ok((
        errs.iter().map(|e| e.0).sum::<f64>() / n,
        errs.iter().map(|e| e.1).sum::<f64>() / n,
    ))
}

fn crb_rows(l: &SensingLayout) -> Vec<(String, f64)> {
    vec![
        ("crb_alpha".into(), l.crb.crb_alpha),
        ("crb_beta".into(), l.crb.crb_beta),
    ]
}

/// Secrecy schemes at one scene, sharing the optimized and FPA-H layouts.
#[allow(clippy::too_many_arguments)]
fn secrecy_point(
    kind: ExperimentKind,
    sweep: f64,
    scene: &Scene,
    sensing: &Result<SensingLayout>,
    fpa: &Result<SensingLayout>,
    pc: &PipelineConfig,
    wall: bool,
    root: u64,
) -> Vec<RunRecord> {
    let mut out = Vec::new();
    for scheme in Scheme::SECRECY {
        let seed = point_seed(root, kind, sweep, scheme.tag(), 0);
        out.extend(guarded(kind, sweep, scheme.tag(), seed, wall, |s| {
            let (sl, fl) = (layout_ref(sensing)?, layout_ref(fpa)?);
            let o = run_secrecy_scheme(scheme, scene, sl, fl, pc, s)?;
            Ok(vec![("secrecy_rate".into(), o.rate)])
        }));
    }
    out
}

fn layout_ref(l: &Result<SensingLayout>) -> Result<&SensingLayout> {
    l.as_ref().map_err(|e| e.clone())
}

/// Runs one experiment and returns its records sorted for emission.
/// Failures at individual points are recorded as `failed` rows.
pub fn run_experiment(kind: ExperimentKind, cfg: &ExperimentConfig, root: u64) -> Result<Vec<RunRecord>> {
    cfg.validate()?;
    let scene = &cfg.scene;
    let pc = sensing_config(cfg, kind, root);
    let wall = cfg.record_wall_time;
    let sweep = cfg.sweep_for(kind);
    let trials = cfg.trials_for(kind);
    let mut out = Vec::new();
    match kind {
        ExperimentKind::ConvergenceSensing => {
            let seed = pc.ao.seed;
            match optimize_sensing_all(&pc.ao, scene) {
                Ok(runs) => {
                    for (i, r) in runs.iter().enumerate() {
                        let metric = format!("eta_bar/init{i}");
                        for h in r.history.iter().filter(|h| h.iteration == 0 || h.block == Block::RxY) {
                            let wall_ms = if wall { h.wall_ms } else { 0.0 };
                            let p = Point { kind, sweep: h.iteration as f64, scheme: "proposed", seed, wall_ms };
                            out.push(p.row(&metric, h.eta_bar));
                        }
                    }
                }
                Err(_) => out.push(Point { kind, sweep: 0.0, scheme: "proposed", seed, wall_ms: 0.0 }.row("failed", f64::NAN)),
            }
        }
        ExperimentKind::ConvergenceComm => {
            let seed = point_seed(root, kind, 0.0, "proposed", 0);
            let res = sensing_layout(Scheme::Proposed, scene, &pc).and_then(|sl| {
                let fpa = sensing_layout(Scheme::FpaH, scene, &pc)?;
                run_secrecy_scheme(Scheme::Proposed, scene, &sl, &fpa, &pc, seed)
            });
            match res.ok().and_then(|o| o.comm) {
                Some(c) => {
                    for (it, v) in c.rate_trace.iter().enumerate() {
                        let p = Point { kind, sweep: it as f64, scheme: "proposed", seed, wall_ms: 0.0 };
                        out.push(p.row("worst_case_rate", *v));
                    }
                    let p = Point { kind, sweep: 0.0, scheme: "proposed", seed, wall_ms: 0.0 };
                    out.push(p.row("outer_iterations", c.outer_iterations as f64));
                    out.push(p.row("converged", if c.converged { 1.0 } else { 0.0 }));
                }
                None => out.push(Point { kind, sweep: 0.0, scheme: "proposed", seed, wall_ms: 0.0 }.row("failed", f64::NAN)),
            }
        }
        ExperimentKind::MseVsPower => {
            let layouts: Vec<(Scheme, Result<SensingLayout>)> =
                Scheme::SENSING.iter().map(|&s| (s, sensing_layout(s, scene, &pc))).collect();
            for &ps in &sweep {
                let mut sc = scene.clone();
                sc.constants.sensing_power = dbm_to_watts(ps);
                for (scheme, l) in &layouts {
                    let seed = point_seed(root, kind, ps, scheme.tag(), 0);
                    out.extend(guarded(kind, ps, scheme.tag(), seed, wall, |s| {
                        let base = layout_ref(l)?;
                        let crb = crate::sensing::crb_closed_form(&base.tx, &base.rx, &sc.constants)?;
                        let l = SensingLayout { crb, ..base.clone() };
                        let (ma, mb) = mle_mse(&sc, &l, trials, s, pc.comm.mle)?;
                        let mut rows = crb_rows(&l);
                        rows.push(("mse_alpha".into(), ma));
                        rows.push(("mse_beta".into(), mb));
                        Ok(rows)
                    }));
                }
                let bound = theoretical_crb_bound(&sc.constants, sc.num_rx, sc.region_side);
                let p = Point { kind, sweep: ps, scheme: "bound", seed: 0, wall_ms: 0.0 };
                out.push(p.row("crb", bound));
            }
        }
        ExperimentKind::SecrecyVsPower => {
            let sl = sensing_layout(Scheme::Proposed, scene, &pc);
            let fpa = sensing_layout(Scheme::FpaH, scene, &pc);
            for &pt in &sweep {
                let mut sc = scene.clone();
                sc.constants.comm_power_max = dbm_to_watts(pt);
                out.extend(secrecy_point(kind, pt, &sc, &sl, &fpa, &pc, wall, root));
            }
        }
        ExperimentKind::RobustnessSweep => {
            let sl = sensing_layout(Scheme::Proposed, scene, &pc);
            let truth_phi = eve_phi(scene);
            for &theta in &sweep {
                for (tag, scale) in [("proposed", pc.comm.region_scale), ("estimated-as-true", 0.0)] {
                    let seed = point_seed(root, kind, theta, tag, 0);
                    out.extend(guarded(kind, theta, tag, seed, wall, |_| {
                        let l = layout_ref(&sl)?;
                        let est = Wavevector::from_angles(SpatialAngles::from_degrees(theta, truth_phi)?);
                        let region = uncertainty_region(est, l.crb, scale);
                        let r = optimize_positions(scene, &l.tx, est, &region, &pc.comm)?;
                        let k = &scene.constants;
                        let rate = crate::beamforming::secrecy_rate(
                            &scene.legit_channel(&r.tx),
                            &scene.eve_channel(&r.tx, scene.eve),
                            &r.beamformer.vector,
                            k.noise_comm,
                            k.noise_eve,
                        );
                        Ok(vec![("secrecy_rate".into(), rate)])
                    }));
                }
            }
        }
        ExperimentKind::RegionWidth => {
            let sl = sensing_layout(Scheme::Proposed, scene, &pc);
            let fpa = sensing_layout(Scheme::FpaH, scene, &pc);
            let theta_e = scene.eve.beta.acos().to_degrees();
            let phi_b = legit_phi(scene);
            // offsets shared across widths so wider regions only stretch them
            let mut rng = rng_from_seed(derive_seed(root, &[kind.tag(), "azimuth"], 0));
            let u: Vec<f64> = (0..trials).map(|_| rng.random_range(-1.0..=1.0)).collect();
            for &width in &sweep {
                let mut sums: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
                let mut failed: Vec<RunRecord> = Vec::new();
                for (i, ui) in u.iter().enumerate() {
                    let mut sc = scene.clone();
                    let phi = (phi_b + width * ui).clamp(0.0, 180.0);
                    sc.eve = match SpatialAngles::from_degrees(theta_e, phi) {
                        Ok(a) => Wavevector::from_angles(a),
                        Err(_) => continue,
                    };
                    sc.constants.dist_be = sc.constants.dist_bc;
                    for scheme in Scheme::SECRECY {
                        let seed = point_seed(root, kind, width, scheme.tag(), i as u64);
                        let rows = guarded(kind, width, scheme.tag(), seed, false, |s| {
                            let o = run_secrecy_scheme(scheme, &sc, layout_ref(&sl)?, layout_ref(&fpa)?, &pc, s)?;
                            Ok(vec![("secrecy_rate".into(), o.rate)])
                        });
                        match rows[0].metric.as_str() {
                            "failed" => failed.extend(rows),
                            _ => {
                                let e = sums.entry(scheme.tag()).or_insert((0.0, 0));
                                e.0 += rows[0].value;
                                e.1 += 1;
                            }
                        }
                    }
                }
                for (tag, (s, n)) in sums {
                    let seed = point_seed(root, kind, width, tag, 0);
                    let p = Point { kind, sweep: width, scheme: tag, seed, wall_ms: 0.0 };
                    out.push(p.row("secrecy_rate", s / n as f64));
                    out.push(p.row("realizations", n as f64));
                }
                out.extend(failed);
            }
        }
        ExperimentKind::MaCount | ExperimentKind::RegionSize => {
            for &v in &sweep {
                let mut sc = scene.clone();
                if kind == ExperimentKind::MaCount {
                    let n = v.round() as usize;
                    sc.num_tx = n;
                    sc.num_rx = n;
                } else {
                    sc.region_side = v * sc.wavelength();
                }
                let sl = sensing_layout(Scheme::Proposed, &sc, &pc);
                let seed = point_seed(root, kind, v, "proposed", 0);
                out.extend(guarded(kind, v, "proposed", seed, wall, |s| {
                    let l = layout_ref(&sl)?;
                    let mut rows = crb_rows(l);
                    // the FPA-H layout is unused by the proposed scheme
                    let o = run_secrecy_scheme(Scheme::Proposed, &sc, l, l, &pc, s)?;
                    rows.push(("secrecy_rate".into(), o.rate));
                    Ok(rows)
                }));
            }
        }
    }
    sort_records(&mut out);
    Ok(out)
}

fn angles_of(wv: Wavevector) -> (f64, f64) {
    let theta = wv.beta.clamp(-1.0, 1.0).acos();
    let s = theta.sin();
    let phi = if s > 0.0 { (wv.alpha / s).clamp(-1.0, 1.0).acos() } else { 0.0 };
    (theta.to_degrees(), phi.to_degrees())
}

fn eve_phi(scene: &Scene) -> f64 {
    angles_of(scene.eve).1
}

fn legit_phi(scene: &Scene) -> f64 {
    angles_of(scene.legit).1
}
