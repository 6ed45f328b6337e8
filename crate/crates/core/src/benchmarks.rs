//! Comparison schemes: fixed arrays, antenna selection, MRT and MRT with
//! artificial noise, plus the square-region CRB floor. Also the per-scheme
//! runners that the experiments call.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::beamforming::secrecy_rate;
use crate::comm_opt::{
    design_beamformer, optimize_coordinate_block, optimize_positions, select_worst_estimate, Axis,
    CommConfig, CommOptResult,
};
use crate::error::{Error, Result};
use crate::geometry::{ArrayLayout, Position};
use crate::rng::{derive_seed, rng_from_seed};
use crate::scene::{Scene, SceneConstants};
use crate::sensing::{complex_gaussian, crb_closed_form, CrbPair, UncertaintyRegion};
use crate::sensing_opt::{optimize_sensing_layout, AoConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scheme {
    Proposed,
    Ideal,
    EstimatedAsTrue,
    FpaH,
    FpaF,
    As,
    Mrt,
    MrtZf,
}

impl Scheme {
    pub const SENSING: [Scheme; 4] = [Scheme::Proposed, Scheme::FpaH, Scheme::FpaF, Scheme::As];
    pub const SECRECY: [Scheme; 6] = [
        Scheme::Proposed,
        Scheme::Ideal,
        Scheme::EstimatedAsTrue,
        Scheme::FpaH,
        Scheme::Mrt,
        Scheme::MrtZf,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::Ideal => "ideal",
            Scheme::EstimatedAsTrue => "estimated-as-true",
            Scheme::FpaH => "fpa-h",
            Scheme::FpaF => "fpa-f",
            Scheme::As => "as",
            Scheme::Mrt => "mrt",
            Scheme::MrtZf => "mrt-zf",
        }
    }
}

/// `rows x cols` grid with the given pitch, anchored at the origin corner.
pub fn rect_layout(
    rows: usize,
    cols: usize,
    spacing: f64,
    region_side: f64,
    min_spacing: f64,
) -> Result<ArrayLayout> {
    let span = spacing * (rows.max(cols).saturating_sub(1)) as f64;
    if span > region_side * (1.0 + 1e-12) {
        return Err(Error::InvalidConfiguration(format!(
            "{rows}x{cols} grid at pitch {spacing:.4e} spans {span:.4e} > region {region_side:.4e}"
        )));
    }
    let mut pts = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            // snap the far edge onto the boundary to absorb rounding
            let x = (c as f64 * spacing).min(region_side);
            let y = (r as f64 * spacing).min(region_side);
            pts.push(Position::new(x, y));
        }
    }
    Ok(ArrayLayout::new(pts, region_side, min_spacing))
}

/// Square uniform planar array of `count` elements.
pub fn upa_layout(count: usize, spacing: f64, region_side: f64, min_spacing: f64) -> Result<ArrayLayout> {
    let side = (count as f64).sqrt().round() as usize;
    if side * side != count || count == 0 {
        return Err(Error::InvalidConfiguration(format!("{count} is not a perfect square")));
    }
    rect_layout(side, side, spacing, region_side, min_spacing)
}

/// Half-wavelength UPA.
pub fn fpa_h_layout(scene: &Scene, count: usize) -> Result<ArrayLayout> {
    upa_layout(count, scene.wavelength() / 2.0, scene.region_side, scene.min_spacing)
}

/// UPA stretched corner to corner over the region.
pub fn fpa_f_layout(scene: &Scene, count: usize) -> Result<ArrayLayout> {
    let side = (count as f64).sqrt().round() as usize;
    let spacing = if side > 1 {
        scene.region_side / (side - 1) as f64
    } else {
        0.0
    };
    upa_layout(count, spacing, scene.region_side, scene.min_spacing)
}

/// Candidate pool for selecting `n` elements: a `sqrt(n) x 2 sqrt(n)`
/// half-wavelength grid.
pub fn selection_pool(scene: &Scene, n: usize) -> Result<ArrayLayout> {
    let side = (n as f64).sqrt().round() as usize;
    if side * side != n || n == 0 {
        return Err(Error::InvalidConfiguration(format!("{n} is not a perfect square")));
    }
    rect_layout(side, 2 * side, scene.wavelength() / 2.0, scene.region_side, scene.min_spacing)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionMode {
    Exhaustive,
    Greedy,
}

pub const EXHAUSTIVE_CAP: u128 = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub layout: ArrayLayout,
    pub indices: Vec<usize>,
    /// `+inf` when every evaluated subset is singular.
    pub objective: f64,
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

fn subset(pool: &ArrayLayout, idx: &[usize]) -> ArrayLayout {
    ArrayLayout::new(
        idx.iter().map(|&i| pool.positions[i]).collect(),
        pool.region_side,
        pool.min_spacing,
    )
}

/// `max(CRB_alpha, CRB_beta)` with the subset used for both arrays; `+inf`
/// on singular geometry.
pub fn selection_crb(layout: &ArrayLayout, constants: &SceneConstants) -> f64 {
    crb_closed_form(layout, layout, constants).map_or(f64::INFINITY, |c| c.max())
}

/// Chooses `choose` of the pool elements minimizing `objective`. Greedy mode
/// removes one element at a time, always the one whose removal hurts least.
pub fn antenna_selection<F: Fn(&ArrayLayout) -> f64 + Sync>(
    pool: &ArrayLayout,
    choose: usize,
    objective: F,
    mode: SelectionMode,
) -> Result<Selection> {
    let k = pool.len();
    if choose == 0 || choose > k {
        return Err(Error::InvalidConfiguration(format!("cannot choose {choose} of {k}")));
    }
    let idx = match mode {
        SelectionMode::Exhaustive => {
            let subsets = binomial(k, choose);
            if subsets > EXHAUSTIVE_CAP {
                return Err(Error::ExhaustiveTooLarge {
                    subsets,
                    cap: EXHAUSTIVE_CAP,
                });
            }
            let mut best: Option<(f64, Vec<usize>)> = None;
            let mut comb: Vec<usize> = (0..choose).collect();
            loop {
                let v = objective(&subset(pool, &comb));
                if best.as_ref().is_none_or(|b| v < b.0) {
                    best = Some((v, comb.clone()));
                }
                // next combination in lexicographic order
                let Some(i) = (0..choose).rev().find(|&i| comb[i] < k - choose + i) else {
                    break;
                };
                comb[i] += 1;
                for j in i + 1..choose {
                    comb[j] = comb[j - 1] + 1;
                }
            }
            best.expect("at least one subset").1
        }
        SelectionMode::Greedy => {
            let mut cur: Vec<usize> = (0..k).collect();
            while cur.len() > choose {
                let scores: Vec<f64> = (0..cur.len())
                    .into_par_iter()
                    .map(|r| {
                        let mut c = cur.clone();
                        c.remove(r);
                        objective(&subset(pool, &c))
                    })
                    .collect();
                let mut drop = 0;
                for (r, s) in scores.iter().enumerate() {
                    if *s < scores[drop] {
                        drop = r;
                    }
                }
                cur.remove(drop);
            }
            cur
        }
    };
    let layout = subset(pool, &idx);
    Ok(Selection {
        objective: objective(&layout),
        layout,
        indices: idx,
    })
}

/// `sqrt(P) h_c / ||h_c||`.
pub fn mrt_beamformer(h_c: &DVector<Complex64>, power: f64) -> Result<DVector<Complex64>> {
    let n = h_c.norm();
    if n == 0.0 {
        return Err(Error::ZeroChannel);
    }
    Ok(h_c * Complex64::new(power.sqrt() / n, 0.0))
}

/// Unit vector drawn isotropically from the orthogonal complement of `h`.
pub fn null_space_draw<R: Rng + ?Sized>(rng: &mut R, h: &DVector<Complex64>) -> DVector<Complex64> {
    let u = h / Complex64::new(h.norm(), 0.0);
    loop {
        let z = DVector::from_fn(h.len(), |_, _| complex_gaussian(rng, 1.0));
        let v = &z - &u * u.dotc(&z);
        let n = v.norm();
        if n > 1e-12 {
            return v / Complex64::new(n, 0.0);
        }
    }
}

/// MRT information beam at `split P` with isotropic null-space artificial
/// noise at `(1 - split) P`, averaged over `draws` noise directions.
#[allow(clippy::too_many_arguments)]
pub fn mrt_zf_an_rate(
    h_c: &DVector<Complex64>,
    h_e: &DVector<Complex64>,
    power: f64,
    split: f64,
    noise_comm: f64,
    noise_eve: f64,
    draws: usize,
    seed: u64,
) -> Result<f64> {
    if h_c.len() < 2 {
        return Err(Error::InvalidConfiguration("artificial noise needs N >= 2".into()));
    }
    if !(0.0..=1.0).contains(&split) || draws == 0 {
        return Err(Error::InvalidConfiguration("bad AN split or draw count".into()));
    }
    let info = mrt_beamformer(h_c, 1.0)?;
    let legit = (split * power * h_c.dotc(&info).norm_sqr() / noise_comm).ln_1p();
    let eve_info = split * power * h_e.dotc(&info).norm_sqr();
    let mut rng = rng_from_seed(seed);
    let mut acc = 0.0;
    for _ in 0..draws {
        let v = null_space_draw(&mut rng, h_c);
        let jam = (1.0 - split) * power * h_e.dotc(&v).norm_sqr();
        let eve = (eve_info / (jam + noise_eve)).ln_1p();
        acc += ((legit - eve) / std::f64::consts::LN_2).max(0.0);
    }
    Ok(acc / draws as f64)
}

/// `lambda^2 sigma_s^2 / (4 M P_s T pi^2 A^2 |zeta_s|^2)`.
pub fn theoretical_crb_bound(constants: &SceneConstants, num_rx: usize, side: f64) -> f64 {
    let zs = constants.zeta_s().magnitude();
    constants.wavelength.powi(2) * constants.noise_sensing
        / (4.0
            * num_rx as f64
            * constants.sensing_power
            * constants.snapshots as f64
            * std::f64::consts::PI.powi(2)
            * side
            * side
            * zs
            * zs)
}

/// Sensing geometry of a scheme: the two arrays and their CRBs.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingLayout {
    pub scheme: Scheme,
    pub tx: ArrayLayout,
    pub rx: ArrayLayout,
    pub crb: CrbPair,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub ao: AoConfig,
    pub comm: CommConfig,
    pub an_split: f64,
    pub an_draws: usize,
    pub selection: SelectionMode,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            ao: AoConfig::default(),
            comm: CommConfig::default(),
            an_split: 0.5,
            an_draws: 100,
            selection: SelectionMode::Greedy,
        }
    }
}

/// Sensing arrays for one of the sensing-stage schemes.
pub fn sensing_layout(scheme: Scheme, scene: &Scene, config: &PipelineConfig) -> Result<SensingLayout> {
    let (tx, rx) = match scheme {
        Scheme::Proposed => {
            let s = optimize_sensing_layout(&config.ao, scene)?;
            (s.tx, s.rx)
        }
        Scheme::FpaH => (fpa_h_layout(scene, scene.num_tx)?, fpa_h_layout(scene, scene.num_rx)?),
        Scheme::FpaF => (fpa_f_layout(scene, scene.num_tx)?, fpa_f_layout(scene, scene.num_rx)?),
        Scheme::As => {
            if scene.num_tx != scene.num_rx {
                return Err(Error::InvalidConfiguration(
                    "antenna selection shares one subset, needs N = M".into(),
                ));
            }
            let pool = selection_pool(scene, scene.num_tx)?;
            let sel = antenna_selection(
                &pool,
                scene.num_tx,
                |l| selection_crb(l, &scene.constants),
                config.selection,
            )?;
            (sel.layout.clone(), sel.layout)
        }
        other => {
            return Err(Error::InvalidConfiguration(format!(
                "{} is not a sensing scheme",
                other.tag()
            )))
        }
    };
    let crb = crb_closed_form(&tx, &rx, &scene.constants)?;
    Ok(SensingLayout { scheme, tx, rx, crb })
}

/// Final transmit layout and beamformer of a secrecy scheme, with its
/// secrecy rate against the true eavesdropper.
#[derive(Debug, Clone, PartialEq)]
pub struct SecrecyOutcome {
    pub scheme: Scheme,
    pub tx: ArrayLayout,
    pub beam: DVector<Complex64>,
    pub rate: f64,
    /// Present for the schemes that run the placement loop.
    pub comm: Option<CommOptResult>,
}

fn true_rate(scene: &Scene, tx: &ArrayLayout, w: &DVector<Complex64>) -> f64 {
    let k = &scene.constants;
    secrecy_rate(
        &scene.legit_channel(tx),
        &scene.eve_channel(tx, scene.eve),
        w,
        k.noise_comm,
        k.noise_eve,
    )
}

/// Places the transmit array for the largest legitimate gain under MRT. The
/// gain of MRT does not depend on positions, so both passes stop at once;
/// they run anyway to keep the scheme's definition explicit.
pub fn mrt_positions(scene: &Scene, tx: &ArrayLayout, config: &CommConfig) -> Result<ArrayLayout> {
    let p = scene.constants.comm_power_max;
    let w = mrt_beamformer(&scene.legit_channel(tx), p)?;
    let obj = |l: &ArrayLayout| scene.legit_channel(l).dotc(&w).norm_sqr();
    let opts = config.block_options(scene.wavelength());
    let mut l = tx.clone();
    for axis in [Axis::X, Axis::Y] {
        l = optimize_coordinate_block(&l, axis, obj, opts)?.layout;
    }
    Ok(l)
}

/// Runs one secrecy scheme. `sensing` is the optimized MA layout, and
/// `fpa` the half-wavelength arrays used by FPA-H.
pub fn run_secrecy_scheme(
    scheme: Scheme,
    scene: &Scene,
    sensing: &SensingLayout,
    fpa: &SensingLayout,
    config: &PipelineConfig,
    seed: u64,
) -> Result<SecrecyOutcome> {
    let comm = &config.comm;
    let k = &scene.constants;
    let seed = derive_seed(seed, &["secrecy", scheme.tag()], 0);
    let placed = |estimate, region: UncertaintyRegion| -> Result<SecrecyOutcome> {
        let r = optimize_positions(scene, &sensing.tx, estimate, &region, comm)?;
        Ok(SecrecyOutcome {
            scheme,
            rate: true_rate(scene, &r.tx, &r.beamformer.vector),
            tx: r.tx.clone(),
            beam: r.beamformer.vector.clone(),
            comm: Some(r),
        })
    };
    match scheme {
        Scheme::Proposed | Scheme::EstimatedAsTrue => {
            let c = CommConfig {
                region_scale: if scheme == Scheme::Proposed { comm.region_scale } else { 0.0 },
                ..*comm
            };
            let w = select_worst_estimate(scene, &sensing.tx, &sensing.rx, sensing.crb, &c, seed)?;
            placed(w.estimate, w.region)
        }
        Scheme::Ideal => placed(scene.eve, UncertaintyRegion::singleton(scene.eve)),
        Scheme::FpaH => {
            let w = select_worst_estimate(scene, &fpa.tx, &fpa.rx, fpa.crb, comm, seed)?;
            let beam = design_beamformer(scene, &fpa.tx, &w.region, comm)?;
            Ok(SecrecyOutcome {
                scheme,
                rate: true_rate(scene, &fpa.tx, &beam.vector),
                tx: fpa.tx.clone(),
                beam: beam.vector,
                comm: None,
            })
        }
        Scheme::Mrt | Scheme::MrtZf => {
            let tx = mrt_positions(scene, &sensing.tx, comm)?;
            let h_c = scene.legit_channel(&tx);
            let (beam, rate) = if scheme == Scheme::Mrt {
                let w = mrt_beamformer(&h_c, k.comm_power_max)?;
                let r = true_rate(scene, &tx, &w);
                (w, r)
            } else {
                let h_e = scene.eve_channel(&tx, scene.eve);
                let r = mrt_zf_an_rate(
                    &h_c,
                    &h_e,
                    k.comm_power_max,
                    config.an_split,
                    k.noise_comm,
                    k.noise_eve,
                    config.an_draws,
                    seed,
                )?;
                (mrt_beamformer(&h_c, config.an_split * k.comm_power_max)?, r)
            };
            Ok(SecrecyOutcome {
                scheme,
                tx,
                beam,
                rate,
                comm: None,
            })
        }
        other => Err(Error::InvalidConfiguration(format!(
            "{} is not a secrecy scheme",
            other.tag()
        ))),
    }
}
