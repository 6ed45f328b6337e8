//! Communication-stage transmit placement: pick the worst-case AoD estimate
//! by Monte Carlo, then alternate feasible-direction ascent on the x and y
//! coordinates with the robust beamformer re-designed between passes.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::beamforming::{
    region_grid, robust_beamform, sample_uncertainty, secrecy_rate, worst_case_secrecy,
    BeamformerSolution,
};
use crate::error::{Error, Result};
use crate::geometry::{echo_channel, ArrayLayout, Wavevector};
use crate::rng::derive_seed;
use crate::scene::Scene;
use crate::sensing::{
    mle_estimate, probe_dft, synthesize_echo, uncertainty_region, CrbPair, MleOptions,
    UncertaintyRegion,
};
use crate::solver::{solve_lp_from, LinearProgram, LinearRow, SolveStatus, SolverOptions};

/// 1-based linear index of the pair `a1 < a2` among `N(N-1)/2` pairs.
pub fn pair_index(a1: usize, a2: usize, n: usize) -> Result<usize> {
    if a1 < 1 || a1 >= a2 || a2 > n {
        return Err(Error::InvalidPair { a1, a2, n });
    }
    Ok((2 * n - a1) * (a1 - 1) / 2 + a2 - a1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

impl Axis {
    pub fn coords(self, layout: &ArrayLayout) -> Vec<f64> {
        match self {
            Axis::X => layout.xs(),
            Axis::Y => layout.ys(),
        }
    }

    pub fn apply(self, layout: &ArrayLayout, v: &[f64]) -> ArrayLayout {
        match self {
            Axis::X => layout.with_xs(v),
            Axis::Y => layout.with_ys(v),
        }
    }

    fn other(self, layout: &ArrayLayout) -> Vec<f64> {
        match self {
            Axis::X => layout.ys(),
            Axis::Y => layout.xs(),
        }
    }
}

/// Linearized spacing constraints `Q v >= q` on the moving axis, row
/// `pair_index(a1, a2) - 1` for each pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairConstraintSystem {
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
}

impl PairConstraintSystem {
    pub fn slack(&self, v: &[f64]) -> DVector<f64> {
        &self.matrix * DVector::from_column_slice(v) - &self.rhs
    }
}

/// First-order inner approximation of `||t_a1 - t_a2|| >= D` around the
/// current layout with the other axis held fixed.
pub fn build_pair_constraints(layout: &ArrayLayout, axis: Axis) -> Result<PairConstraintSystem> {
    let n = layout.len();
    let mv = axis.coords(layout);
    let fx = axis.other(layout);
    let pairs = n * n.saturating_sub(1) / 2;
    let mut matrix = DMatrix::zeros(pairs, n);
    let mut rhs = DVector::zeros(pairs);
    for a in 0..n {
        for b in a + 1..n {
            let dm = mv[a] - mv[b];
            let df = fx[a] - fx[b];
            let dist = dm.hypot(df);
            if dist == 0.0 {
                return Err(Error::DegenerateLinearization(a + 1, b + 1));
            }
            let r = pair_index(a + 1, b + 1, n)? - 1;
            matrix[(r, a)] = dm;
            matrix[(r, b)] = -dm;
            rhs[r] = layout.min_spacing * dist - df * df;
        }
    }
    Ok(PairConstraintSystem { matrix, rhs })
}

/// Forward differences `(f(x + delta e_n) - f(x)) / delta`.
pub fn fd_gradient<F: Fn(&[f64]) -> f64>(f: F, point: &[f64], step: f64) -> Vec<f64> {
    let base = f(point);
    let mut probe = point.to_vec();
    (0..point.len())
        .map(|i| {
            probe[i] = point[i] + step;
            let v = f(&probe);
            probe[i] = point[i];
            (v - base) / step
        })
        .collect()
}

/// Maximizes `d . gradient` over the linearized spacing polytope and the
/// box `[0, side]^N`. The LP is solved in units of `side`.
pub fn ascent_direction(
    gradient: &[f64],
    constraints: &PairConstraintSystem,
    side: f64,
    incumbent: &[f64],
    solver: SolverOptions,
) -> Result<Vec<f64>> {
    let n = incumbent.len();
    let gnorm = gradient.iter().map(|g| g * g).sum::<f64>().sqrt();
    if gnorm == 0.0 || !gnorm.is_finite() {
        return Ok(incumbent.to_vec());
    }
    let mut linear = Vec::new();
    for r in 0..constraints.matrix.nrows() {
        let coef: DVector<f64> = constraints.matrix.row(r).transpose() * side;
        let scale = coef.norm();
        let rhs = constraints.rhs[r];
        if scale == 0.0 {
            // the fixed axis alone keeps this pair apart
            if rhs > 1e-12 * side * side {
                return Err(Error::Solver("pair constraint cannot be met".into()));
            }
            continue;
        }
        linear.push(LinearRow::new(coef / scale, rhs / scale));
    }
    let lp = LinearProgram {
        objective: DVector::from_iterator(n, gradient.iter().map(|g| g / gnorm)),
        lower: vec![0.0; n],
        upper: vec![1.0; n],
        linear,
    };
    let start = DVector::from_iterator(n, incumbent.iter().map(|v| v / side));
    let rep = solve_lp_from(&lp, &start, solver);
    if rep.status == SolveStatus::Infeasible {
        return Err(Error::Solver("ascent LP infeasible".into()));
    }
    Ok(rep.solution.iter().map(|v| (v * side).clamp(0.0, side)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearch {
    pub step: f64,
    pub value: f64,
}

/// Exhaustive search of `s` on `{0, 1/M, ..., 1}`; ties go to the smaller step.
pub fn line_search<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], d: &[f64], resolution: usize) -> LineSearch {
    let m = resolution.max(1);
    let mut best = LineSearch {
        step: 0.0,
        value: f(x),
    };
    let mut cand = x.to_vec();
    for k in 1..=m {
        let s = k as f64 / m as f64;
        for i in 0..x.len() {
            cand[i] = x[i] + s * (d[i] - x[i]);
        }
        let v = f(&cand);
        if v > best.value {
            best = LineSearch { step: s, value: v };
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockOptions {
    pub delta: f64,
    pub max_iter: usize,
    pub resolution: usize,
    /// Finite-difference step in meters.
    pub fd_step: f64,
    pub solver: SolverOptions,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockResult {
    pub layout: ArrayLayout,
    pub trace: Vec<f64>,
    pub iterations: usize,
}

/// Gradient, LP direction and line search on one coordinate axis until the
/// relative gain drops below `delta`. Infeasible line-search candidates are
/// scored `-inf`, so every accepted layout is feasible.
pub fn optimize_coordinate_block<F: Fn(&ArrayLayout) -> f64>(
    layout: &ArrayLayout,
    axis: Axis,
    objective: F,
    opts: BlockOptions,
) -> Result<BlockResult> {
    let mut cur = layout.clone();
    let mut val = objective(&cur);
    let mut trace = vec![val];
    let mut iterations = 0;
    for _ in 0..opts.max_iter {
        iterations += 1;
        let x = axis.coords(&cur);
        let grad = fd_gradient(|v| objective(&axis.apply(&cur, v)), &x, opts.fd_step);
        let cons = build_pair_constraints(&cur, axis)?;
        let d = ascent_direction(&grad, &cons, cur.region_side, &x, opts.solver)?;
        let ls = line_search(
            |v| {
                let l = axis.apply(&cur, v);
                if l.is_feasible() { objective(&l) } else { f64::NEG_INFINITY }
            },
            &x,
            &d,
            opts.resolution,
        );
        let gain = ls.value - val;
        if ls.step > 0.0 {
            let next: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + ls.step * (b - a)).collect();
            cur = axis.apply(&cur, &next);
            val = ls.value;
        }
        trace.push(val);
        if gain.is_nan() || gain <= opts.delta * val.abs() {
            break;
        }
    }
    Ok(BlockResult {
        layout: cur,
        trace,
        iterations,
    })
}

/// What the placement passes maximize with the beamformer held fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommObjective {
    /// Minimum secrecy rate over the hull sample points.
    HullSamples,
    /// Secrecy rate at the estimate alone.
    FixedEstimate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommConfig {
    pub delta3: f64,
    pub delta4: f64,
    pub delta5: f64,
    pub beam_max_iter: usize,
    pub max_outer: usize,
    pub max_inner: usize,
    pub resolution: usize,
    pub trials: usize,
    /// Finite-difference step as a fraction of the wavelength.
    pub fd_step: f64,
    pub hull_grid: (usize, usize),
    pub eval_grid: (usize, usize),
    pub region_scale: f64,
    pub objective: CommObjective,
    pub mle: MleOptions,
    pub solver: SolverOptions,
}

impl Default for CommConfig {
    fn default() -> Self {
        Self {
            delta3: 1e-6,
            delta4: 1e-4,
            delta5: 1e-4,
            beam_max_iter: 100,
            max_outer: 80,
            max_inner: 100,
            resolution: 100,
            trials: 20,
            fd_step: 1e-4,
            hull_grid: (5, 5),
            eval_grid: (21, 21),
            region_scale: 3.0,
            objective: CommObjective::HullSamples,
            mle: MleOptions::default(),
            solver: SolverOptions::default(),
        }
    }
}

impl CommConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = [self.delta3, self.delta4, self.delta5, self.fd_step];
        if pos.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::InvalidConfiguration("comm thresholds must be > 0".into()));
        }
        if self.max_outer == 0 || self.max_inner == 0 || self.resolution == 0 || self.trials == 0 {
            return Err(Error::InvalidConfiguration("comm iteration counts must be >= 1".into()));
        }
        if self.hull_grid.0 == 0 || self.hull_grid.1 == 0 || self.eval_grid.0 == 0 || self.eval_grid.1 == 0 {
            return Err(Error::InvalidConfiguration("sample grids must be non-empty".into()));
        }
        if !(self.region_scale >= 0.0) {
            return Err(Error::InvalidConfiguration("region scale must be >= 0".into()));
        }
        Ok(())
    }

    pub fn block_options(&self, wavelength: f64) -> BlockOptions {
        BlockOptions {
            delta: self.delta4,
            max_iter: self.max_inner,
            resolution: self.resolution,
            fd_step: self.fd_step * wavelength,
            solver: self.solver,
        }
    }
}

/// Robust beamformer for `tx` against the grid-sampled region.
pub fn design_beamformer(
    scene: &Scene,
    tx: &ArrayLayout,
    region: &UncertaintyRegion,
    config: &CommConfig,
) -> Result<BeamformerSolution> {
    let k = &scene.constants;
    let samples = sample_uncertainty(region, tx, k.zeta_e(), config.hull_grid, k.wavelength);
    robust_beamform(
        &scene.legit_channel(tx),
        &samples,
        k.comm_power_max,
        k.noise_comm,
        k.noise_eve,
        config.delta3,
        config.beam_max_iter,
    )
}

/// Secrecy objective of a layout for a fixed beamforming vector.
pub fn placement_objective(
    scene: &Scene,
    tx: &ArrayLayout,
    w: &DVector<Complex64>,
    points: &[Wavevector],
) -> f64 {
    let k = &scene.constants;
    let h_c = scene.legit_channel(tx);
    points
        .iter()
        .map(|&wv| secrecy_rate(&h_c, &scene.eve_channel(tx, wv), w, k.noise_comm, k.noise_eve))
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorstEstimate {
    pub estimate: Wavevector,
    pub region: UncertaintyRegion,
    pub index: usize,
    /// Secrecy rate against the true channel for every trial.
    pub rates: Vec<f64>,
}

/// Runs `config.trials` noisy sensing rounds on the given layout and keeps the
/// estimate whose robust design does worst against the true eavesdropper.
pub fn select_worst_estimate(
    scene: &Scene,
    tx: &ArrayLayout,
    rx: &ArrayLayout,
    crb: CrbPair,
    config: &CommConfig,
    seed: u64,
) -> Result<WorstEstimate> {
    config.validate()?;
    let k = &scene.constants;
    let probe = probe_dft(tx.len(), k.snapshots, k.sensing_power)?;
    let channel = echo_channel(tx, rx, scene.eve, k.zeta_s(), k.wavelength);
    let h_c = scene.legit_channel(tx);
    let h_e = scene.eve_channel(tx, scene.eve);
    let runs: Vec<Result<(Wavevector, UncertaintyRegion, f64)>> = (0..config.trials)
        .into_par_iter()
        .map(|b| {
            let obs = synthesize_echo(
                &channel,
                &probe,
                k.noise_sensing,
                derive_seed(seed, &["worst-estimate"], b as u64),
            );
            let est = mle_estimate(&obs, &probe, tx, rx, k.wavelength, config.mle)?;
            let region = uncertainty_region(est, crb, config.region_scale);
            let beam = design_beamformer(scene, tx, &region, config)?;
            let rate = secrecy_rate(&h_c, &h_e, &beam.vector, k.noise_comm, k.noise_eve);
            Ok((est, region, rate))
        })
        .collect();
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let mut index = 0;
    for (i, r) in runs.iter().enumerate() {
        if r.2 < runs[index].2 {
            index = i;
        }
    }
    Ok(WorstEstimate {
        estimate: runs[index].0,
        region: runs[index].1,
        index,
        rates: runs.iter().map(|r| r.2).collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommOptResult {
    pub tx: ArrayLayout,
    pub beamformer: BeamformerSolution,
    /// Placement objective at the returned layout and beamformer.
    pub worst_case_rate: f64,
    /// Minimum secrecy rate over `eval_grid` covering the region.
    pub dense_worst_rate: f64,
    pub chosen_estimate: Wavevector,
    pub region: UncertaintyRegion,
    /// Placement objective at the start and after each outer iteration.
    pub rate_trace: Vec<f64>,
    pub outer_iterations: usize,
    pub converged: bool,
}

/// Alternating x / y placement passes from `tx` for a fixed uncertainty
/// region. The beamformer is re-designed before each x-pass and replaced only
/// when that does not lower the objective.
pub fn optimize_positions(
    scene: &Scene,
    tx: &ArrayLayout,
    estimate: Wavevector,
    region: &UncertaintyRegion,
    config: &CommConfig,
) -> Result<CommOptResult> {
    config.validate()?;
    tx.check_feasible()?;
    let lambda = scene.wavelength();
    let points = match config.objective {
        CommObjective::HullSamples => region_grid(region, config.hull_grid),
        CommObjective::FixedEstimate => vec![estimate],
    };
    let opts = config.block_options(lambda);
    let mut tx = tx.clone();
    let mut beam = design_beamformer(scene, &tx, region, config)?;
    let mut rate = placement_objective(scene, &tx, &beam.vector, &points);
    let mut trace = vec![rate];
    let mut converged = false;
    let mut outer = 0;
    for it in 0..config.max_outer {
        outer += 1;
        if it > 0 {
            let cand = design_beamformer(scene, &tx, region, config)?;
            if placement_objective(scene, &tx, &cand.vector, &points) >= rate {
                beam = cand;
            }
        }
        let w = beam.vector.clone();
        let obj = |l: &ArrayLayout| placement_objective(scene, l, &w, &points);
        for axis in [Axis::X, Axis::Y] {
            tx = optimize_coordinate_block(&tx, axis, obj, opts)?.layout;
        }
        let next = obj(&tx);
        trace.push(next);
        let gain = next - rate;
        rate = next;
        if gain.is_nan() || gain <= config.delta5 * rate.abs() {
            converged = true;
            break;
        }
    }
    let k = &scene.constants;
    let dense_worst_rate = worst_case_secrecy(
        &scene.legit_channel(&tx),
        &tx,
        k.zeta_e(),
        region,
        &beam.vector,
        k.noise_comm,
        k.noise_eve,
        config.eval_grid,
        lambda,
    );
    Ok(CommOptResult {
        tx,
        beamformer: beam,
        worst_case_rate: rate,
        dense_worst_rate,
        chosen_estimate: estimate,
        region: *region,
        rate_trace: trace,
        outer_iterations: outer,
        converged,
    })
}

/// Estimate selection followed by placement, starting from the sensing layout.
pub fn optimize_comm_stage(
    scene: &Scene,
    tx: &ArrayLayout,
    rx: &ArrayLayout,
    crb: CrbPair,
    config: &CommConfig,
    seed: u64,
) -> Result<CommOptResult> {
    let worst = select_worst_estimate(scene, tx, rx, crb, config, seed)?;
    optimize_positions(scene, tx, worst.estimate, &worst.region, config)
}
