//! CRB-driven antenna placement: alternating SCA over the four coordinate
//! blocks `(x_t, y_t, x_r, y_r)` maximizing `eta = min(eta_1, eta_2)`, with
//! multiple random initializations.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{ArrayLayout, Position};
use crate::rng::{derive_seed, rng_from_seed};
use crate::scene::Scene;
use crate::sensing::{effective_apertures, geometry_moments, CrbPair};
use crate::solver::{
    solve_convex, Affine, ConvexSubproblem, LinearRow, QuadRow, SolveStatus, SolverOptions,
};

/// `P_1 = (1/N) I - (1/N^2) 1 1^T`.
pub fn centering_matrix(n: usize) -> DMatrix<f64> {
    let nf = n as f64;
    DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 / nf } else { 0.0 } - 1.0 / (nf * nf))
}

/// `(x^T P_1 x, x^T P_1 y)`.
pub fn centering_quadratics(x: &[f64], y: &[f64]) -> (f64, f64) {
    let p = centering_matrix(x.len());
    let xv = DVector::from_column_slice(x);
    let yv = DVector::from_column_slice(y);
    let px = &p * &xv;
    (xv.dot(&px), yv.dot(&px))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Block {
    TxX,
    TxY,
    RxX,
    RxY,
}

impl Block {
    pub const ALL: [Block; 4] = [Block::TxX, Block::TxY, Block::RxX, Block::RxY];

    pub fn name(self) -> &'static str {
        match self {
            Block::TxX => "x_t",
            Block::TxY => "y_t",
            Block::RxX => "x_r",
            Block::RxY => "y_r",
        }
    }

    fn is_tx(self) -> bool {
        matches!(self, Block::TxX | Block::TxY)
    }

    fn is_x(self) -> bool {
        matches!(self, Block::TxX | Block::RxX)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    pub block: Block,
    pub eta_bar: f64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensingOptState {
    pub tx: ArrayLayout,
    pub rx: ArrayLayout,
    /// `min(eta_1, eta_2)` in m^2.
    pub eta_bar: f64,
    pub eta: (f64, f64),
    pub crb: CrbPair,
    pub meets_threshold: bool,
    pub history: Vec<TraceRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AoConfig {
    pub delta1: f64,
    pub delta2: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub num_inits: usize,
    pub seed: u64,
    pub solver: SolverOptions,
}

impl Default for AoConfig {
    fn default() -> Self {
        Self {
            delta1: 1e-4,
            delta2: 1e-5,
            max_outer: 100,
            max_inner: 50,
            num_inits: 5,
            seed: 0,
            solver: SolverOptions::default(),
        }
    }
}

impl AoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta1 > 0.0 && self.delta2 > 0.0) {
            return Err(Error::InvalidConfiguration("AO thresholds must be > 0".into()));
        }
        if self.num_inits == 0 || self.max_outer == 0 || self.max_inner == 0 {
            return Err(Error::InvalidConfiguration("AO iteration counts must be >= 1".into()));
        }
        Ok(())
    }
}

fn block_coords(tx: &ArrayLayout, rx: &ArrayLayout, block: Block) -> Vec<f64> {
    let l = if block.is_tx() { tx } else { rx };
    if block.is_x() { l.xs() } else { l.ys() }
}

/// Objective pair `(eta_1, eta_2)` or `None` on singular geometry.
fn etas(tx: &ArrayLayout, rx: &ArrayLayout) -> Option<(f64, f64)> {
    effective_apertures(tx, rx).ok()
}

/// Convex restriction of the block update around `point` (the block's current
/// coordinates), in wavelength-normalized units. Variables are the block
/// coordinates followed by `eta`.
pub fn build_block_subproblem(
    tx: &ArrayLayout,
    rx: &ArrayLayout,
    block: Block,
    point: &[f64],
    wavelength: f64,
) -> Result<ConvexSubproblem> {
    let own = if block.is_tx() { tx } else { rx };
    let other = if block.is_tx() { rx } else { tx };
    let k = own.len();
    let dim = k + 1;
    let s = 1.0 / wavelength;
    let u: Vec<f64> = point.iter().map(|v| v * s).collect();
    // partner coordinate of the same array on the other axis
    let partner: Vec<f64> = if block.is_x() { own.ys() } else { own.xs() };
    let partner: Vec<f64> = partner.iter().map(|v| v * s).collect();
    let (ox, oy) = (other.xs(), other.ys());
    let (ox, oy): (Vec<f64>, Vec<f64>) = (ox.iter().map(|v| v * s).collect(), oy.iter().map(|v| v * s).collect());
    let (v_ox, c_o) = centering_quadratics(&ox, &oy);
    let (v_oy, _) = centering_quadratics(&oy, &oy);
    let (v_partner, _) = centering_quadratics(&partner, &partner);
    // variance of the block's own axis contributed by the other array
    let s_oth = if block.is_x() { v_ox } else { v_oy };
    // fixed-axis aggregated variance
    let fixed = v_partner + if block.is_x() { v_oy } else { v_ox };

    let kf = k as f64;
    let mean_u = u.iter().sum::<f64>() / kf;
    let mean_p = partner.iter().sum::<f64>() / kf;
    let (v_u, _) = centering_quadratics(&u, &u);
    let mut lin = DVector::zeros(dim);
    let mut cov = DVector::zeros(dim);
    for i in 0..k {
        lin[i] = 2.0 * (u[i] - mean_u) / kf;
        cov[i] = (partner[i] - mean_p) / kf;
    }
    let var_lb = Affine::new(lin.clone(), s_oth - v_u);
    let mut var_lb_minus_e = var_lb.clone();
    var_lb_minus_e.coef[k] = -1.0;
    let mut fixed_minus_e = Affine::constant(dim, fixed);
    fixed_minus_e.coef[k] = -1.0;
    let c = Affine::new(cov, c_o);

    let mut objective = DVector::zeros(dim);
    objective[k] = 1.0;
    let mut p = ConvexSubproblem::new(objective);
    let side = own.region_side * s;
    for i in 0..k {
        p.lower[i] = 0.0;
        p.upper[i] = side;
    }
    p.quad.push(QuadRow {
        square: c.clone(),
        left: Affine::constant(dim, fixed),
        right: var_lb_minus_e,
    });
    p.quad.push(QuadRow {
        square: c,
        left: var_lb,
        right: fixed_minus_e,
    });
    let d = own.min_spacing * s;
    if d > 0.0 {
        for i in 0..k {
            for j in i + 1..k {
                let dv = u[i] - u[j];
                let df = partner[i] - partner[j];
                let norm = dv.hypot(df);
                if norm < 1e-12 {
                    return Err(Error::DegenerateLinearization(i, j));
                }
                let mut coef = DVector::zeros(dim);
                coef[i] = dv / norm;
                coef[j] = -dv / norm;
                p.linear.push(LinearRow::new(coef, d - df * df / norm));
            }
        }
    }
    Ok(p)
}

fn with_block(tx: &ArrayLayout, rx: &ArrayLayout, block: Block, z: &[f64]) -> (ArrayLayout, ArrayLayout) {
    match block {
        Block::TxX => (tx.with_xs(z), rx.clone()),
        Block::TxY => (tx.with_ys(z), rx.clone()),
        Block::RxX => (tx.clone(), rx.with_xs(z)),
        Block::RxY => (tx.clone(), rx.with_ys(z)),
    }
}

/// Repeated SCA steps on one block. An update is kept only if it stays
/// feasible and strictly increases the true objective.
pub fn sca_block_loop(
    tx: &ArrayLayout,
    rx: &ArrayLayout,
    block: Block,
    wavelength: f64,
    delta2: f64,
    max_inner: usize,
    solver: SolverOptions,
) -> Result<(ArrayLayout, ArrayLayout)> {
    let (mut tx, mut rx) = (tx.clone(), rx.clone());
    let mut eta = etas(&tx, &rx).map_or(f64::NEG_INFINITY, |(a, b)| a.min(b));
    for _ in 0..max_inner {
        let point = block_coords(&tx, &rx, block);
        let p = build_block_subproblem(&tx, &rx, block, &point, wavelength)?;
        let k = point.len();
        let mut w0 = DVector::zeros(k + 1);
        for i in 0..k {
            w0[i] = point[i] / wavelength;
        }
        let eta_n = eta / (wavelength * wavelength);
        w0[k] = if eta_n.is_finite() { eta_n - 1e-3 * eta_n.abs().max(1e-6) } else { -1.0 };
        let rep = solve_convex(&p, &w0, solver);
        if rep.status == SolveStatus::Infeasible {
            break;
        }
        let side = if block.is_tx() { tx.region_side } else { rx.region_side };
        let z: Vec<f64> = (0..k)
            .map(|i| (rep.solution[i] * wavelength).clamp(0.0, side))
            .collect();
        let (ntx, nrx) = with_block(&tx, &rx, block, &z);
        let owner_ok = if block.is_tx() { ntx.is_feasible() } else { nrx.is_feasible() };
        let new_eta = match (owner_ok, etas(&ntx, &nrx)) {
            (true, Some((a, b))) => a.min(b),
            _ => break,
        };
        if !(new_eta > eta) {
            break;
        }
        let gain = (new_eta - eta) / eta.abs().max(f64::MIN_POSITIVE);
        tx = ntx;
        rx = nrx;
        eta = new_eta;
        if gain < delta2 || rep.status == SolveStatus::MaxIter {
            break;
        }
    }
    Ok((tx, rx))
}

/// Places `n` antennas uniformly in `[0, side]^2`, rejecting draws closer
/// than `d` to an accepted one. One attempt is one sequential pass; a pass is
/// abandoned after `STALL_DRAWS` consecutive rejections and restarted.
pub fn random_layout<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    side: f64,
    d: f64,
    max_attempts: usize,
) -> Result<ArrayLayout> {
    let mut pts: Vec<Position> = Vec::with_capacity(n);
    for _ in 0..max_attempts {
        pts.clear();
        let mut stalled = 0;
        while pts.len() < n && stalled < STALL_DRAWS {
            let p = Position::new(rng.random::<f64>() * side, rng.random::<f64>() * side);
            if pts.iter().all(|q| q.distance(&p) >= d) {
                pts.push(p);
                stalled = 0;
            } else {
                stalled += 1;
            }
        }
        if pts.len() == n {
            return Ok(ArrayLayout::new(pts, side, d));
        }
    }
    Err(Error::InfeasibleRegion { attempts: max_attempts })
}

const STALL_DRAWS: usize = 1_000;

pub const INIT_ATTEMPTS: usize = 10_000;

fn finish(
    tx: ArrayLayout,
    rx: ArrayLayout,
    scene: &Scene,
    history: Vec<TraceRecord>,
) -> Result<SensingOptState> {
    let (e1, e2) = effective_apertures(&tx, &rx)?;
    let g = scene.constants.crb_scale(rx.len());
    let crb = CrbPair {
        crb_alpha: g / e1,
        crb_beta: g / e2,
    };
    Ok(SensingOptState {
        meets_threshold: crb.max() <= scene.constants.crb_threshold,
        eta_bar: e1.min(e2),
        eta: (e1, e2),
        crb,
        history,
        tx,
        rx,
    })
}

/// Alternating optimization from a given starting layout.
pub fn optimize_from(
    tx: &ArrayLayout,
    rx: &ArrayLayout,
    scene: &Scene,
    config: &AoConfig,
) -> Result<SensingOptState> {
    let start = Instant::now();
    let lambda = scene.wavelength();
    let (mut tx, mut rx) = (tx.clone(), rx.clone());
    let mut eta = etas(&tx, &rx).map_or(f64::NEG_INFINITY, |(a, b)| a.min(b));
    let mut history = vec![TraceRecord {
        iteration: 0,
        block: Block::TxX,
        eta_bar: eta,
        wall_ms: 0.0,
    }];
    for it in 1..=config.max_outer {
        let before = eta;
        for block in Block::ALL {
            let (ntx, nrx) =
                sca_block_loop(&tx, &rx, block, lambda, config.delta2, config.max_inner, config.solver)?;
            tx = ntx;
            rx = nrx;
            eta = etas(&tx, &rx).map_or(f64::NEG_INFINITY, |(a, b)| a.min(b));
            history.push(TraceRecord {
                iteration: it,
                block,
                eta_bar: eta,
                wall_ms: start.elapsed().as_secs_f64() * 1e3,
            });
        }
        if !before.is_finite() {
            continue;
        }
        if (eta - before) / before.abs().max(f64::MIN_POSITIVE) < config.delta1 {
            break;
        }
    }
    finish(tx, rx, scene, history)
}

/// Independent random initialization `index` for the given root seed.
pub fn random_init(scene: &Scene, seed: u64, index: usize) -> Result<(ArrayLayout, ArrayLayout)> {
    let mut rng = rng_from_seed(derive_seed(seed, &["sensing-init"], index as u64));
    let tx = random_layout(&mut rng, scene.num_tx, scene.region_side, scene.min_spacing, INIT_ATTEMPTS)?;
    let rx = random_layout(&mut rng, scene.num_rx, scene.region_side, scene.min_spacing, INIT_ATTEMPTS)?;
    Ok((tx, rx))
}

/// Best of `num_inits` independent runs (ties go to the lowest index).
pub fn optimize_sensing_layout(config: &AoConfig, scene: &Scene) -> Result<SensingOptState> {
    config.validate()?;
    scene.validate()?;
    let runs: Vec<Result<SensingOptState>> = (0..config.num_inits)
        .into_par_iter()
        .map(|i| {
            let (tx, rx) = random_init(scene, config.seed, i)?;
            optimize_from(&tx, &rx, scene, config)
        })
        .collect();
    let mut best: Option<SensingOptState> = None;
    for r in runs {
        let s = r?;
        if best.as_ref().is_none_or(|b| s.eta_bar > b.eta_bar) {
            best = Some(s);
        }
    }
    Ok(best.expect("at least one init"))
}

/// Logs the eta trace of every restart, for the convergence experiment.
pub fn optimize_sensing_all(config: &AoConfig, scene: &Scene) -> Result<Vec<SensingOptState>> {
    config.validate()?;
    scene.validate()?;
    (0..config.num_inits)
        .into_par_iter()
        .map(|i| {
            let (tx, rx) = random_init(scene, config.seed, i)?;
            optimize_from(&tx, &rx, scene, config)
        })
        .collect()
}

/// Moments used by the symmetry check: `(V_x, C)`.
pub fn symmetry_moments(state: &SensingOptState) -> (f64, f64) {
    let (vx, _, c) = geometry_moments(&state.tx, &state.rx);
    (vx, c)
}
