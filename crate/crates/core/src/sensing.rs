//! Eavesdropper sensing: DFT probing, echo synthesis, grid-search MLE of the
//! spatial AoDs and the Cramér-Rao bound (closed form and Fisher-matrix route).

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix2, Matrix4};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::geometry::{field_response, ArrayLayout, PathGain, Wavevector};
use crate::scene::SceneConstants;

/// Probe block `X_s` (`N x T`) with `(1/T) X X^H = (P_s/N) I`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeMatrix {
    pub samples: DMatrix<Complex64>,
    pub power: f64,
}

impl ProbeMatrix {
    pub fn num_tx(&self) -> usize {
        self.samples.nrows()
    }

    pub fn snapshots(&self) -> usize {
        self.samples.ncols()
    }
}

/// First `N` rows of a `T x T` DFT, scaled to total power `P_s`.
pub fn probe_dft(num_tx: usize, snapshots: usize, power: f64) -> Result<ProbeMatrix> {
    if snapshots < num_tx {
        return Err(Error::InvalidConfiguration(format!(
            "probe needs T >= N (T={snapshots}, N={num_tx})"
        )));
    }
    let amp = (power / num_tx as f64).sqrt();
    let t = snapshots as f64;
    let samples = DMatrix::from_fn(num_tx, snapshots, |n, k| {
        // reduce the exponent mod T to keep the phase argument small
        let e = (n * k) % snapshots;
        Complex64::from_polar(amp, 2.0 * PI * e as f64 / t)
    });
    Ok(ProbeMatrix { samples, power })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EchoObservation {
    pub samples: DMatrix<Complex64>,
    pub noise_power: f64,
}

/// Draws one circularly-symmetric complex Gaussian sample of total variance `var`.
pub(crate) fn complex_gaussian<R: rand::Rng + ?Sized>(rng: &mut R, var: f64) -> Complex64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re * s, im * s)
}

/// `Y = H_s X + Z` with i.i.d. `CN(0, sigma^2)` noise entries.
pub fn synthesize_echo(
    channel: &DMatrix<Complex64>,
    probe: &ProbeMatrix,
    noise_power: f64,
    seed: u64,
) -> EchoObservation {
    let mut y = channel * &probe.samples;
    if noise_power > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // column-major fill keeps the draw order fixed
        for v in y.iter_mut() {
            *v += complex_gaussian(&mut rng, noise_power);
        }
    }
    EchoObservation {
        samples: y,
        noise_power,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleOptions {
    pub grid_step: f64,
    pub refine_levels: usize,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self {
            grid_step: 0.005,
            refine_levels: 2,
        }
    }
}

/// Result of the grid search, with the incumbent objective after each level.
#[derive(Debug, Clone, PartialEq)]
pub struct MleSearch {
    pub estimate: Wavevector,
    pub level_objectives: Vec<f64>,
}

/// Matched-filter objective `|g^H X Y^H f|^2` evaluated through the `N M`
/// virtual-array phases.
struct MleObjective {
    weights: Vec<Complex64>,
    vx: Vec<f64>,
    vy: Vec<f64>,
    k: f64,
}

impl MleObjective {
    fn new(
        obs: &EchoObservation,
        probe: &ProbeMatrix,
        tx: &ArrayLayout,
        rx: &ArrayLayout,
        wavelength: f64,
    ) -> Self {
        // Z = X Y^H is N x M. The matched filter is |g^H Z f|^2, i.e. the conjugated
        // Kronecker form, so the virtual positions are the tx-rx differences.
        let z = &probe.samples * obs.samples.adjoint();
        let mut weights = Vec::with_capacity(tx.len() * rx.len());
        let mut vx = Vec::with_capacity(weights.capacity());
        let mut vy = Vec::with_capacity(weights.capacity());
        for (m, pr) in rx.positions.iter().enumerate() {
            for (n, pt) in tx.positions.iter().enumerate() {
                weights.push(z[(n, m)]);
                vx.push(pt.x - pr.x);
                vy.push(pt.y - pr.y);
            }
        }
        Self {
            weights,
            vx,
            vy,
            k: 2.0 * PI / wavelength,
        }
    }

    fn eval(&self, alpha: f64, beta: f64) -> f64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for p in 0..self.weights.len() {
            let ph = -self.k * (self.vx[p] * alpha + self.vy[p] * beta);
            acc += self.weights[p] * Complex64::from_polar(1.0, ph);
        }
        acc.norm_sqr()
    }

    /// Grid scan in alpha-major order; the first maximizer wins ties.
    fn scan(&self, alphas: &[f64], betas: &[f64]) -> (Wavevector, f64, f64) {
        // separable phase tables: e^{-jk vx a} and e^{-jk vy b}
        let np = self.weights.len();
        let beta_tab: Vec<Complex64> = betas
            .iter()
            .flat_map(|&b| {
                self.vy
                    .iter()
                    .map(move |&y| Complex64::from_polar(1.0, -self.k * y * b))
            })
            .collect();
        let mut best = (Wavevector::new(alphas[0], betas[0]), f64::NEG_INFINITY);
        let mut worst = f64::INFINITY;
        let mut row = vec![Complex64::new(0.0, 0.0); np];
        for &a in alphas {
            for ((r, w), x) in row.iter_mut().zip(&self.weights).zip(&self.vx) {
                *r = w * Complex64::from_polar(1.0, -self.k * x * a);
            }
            for (j, &b) in betas.iter().enumerate() {
                let tab = &beta_tab[j * np..(j + 1) * np];
                let mut acc = Complex64::new(0.0, 0.0);
                for p in 0..np {
                    acc += row[p] * tab[p];
                }
                let v = acc.norm_sqr();
                if v > best.1 {
                    best = (Wavevector::new(a, b), v);
                }
                worst = worst.min(v);
            }
        }
        (best.0, best.1, worst)
    }
}

fn axis_grid(center: f64, half_width: f64, step: f64) -> Vec<f64> {
    let lo = (center - half_width).max(-1.0);
    let hi = (center + half_width).min(1.0);
    let n = ((hi - lo) / step + 1e-9).floor() as i64;
    let mut out: Vec<f64> = (0..=n).map(|i| lo + i as f64 * step).collect();
    if let Some(&last) = out.last() {
        if hi - last > 1e-12 {
            out.push(hi);
        }
    }
    out
}

fn refine_grid(center: f64, prev_step: f64, step: f64) -> Vec<f64> {
    let half = (prev_step / step).round() as i64;
    let mut out: Vec<f64> = (-half..=half)
        .map(|i| center + i as f64 * step)
        .filter(|v| (-1.0..=1.0).contains(v))
        .collect();
    if out.is_empty() {
        out.push(center.clamp(-1.0, 1.0));
    }
    out
}

/// Exhaustive search over `[-1, 1]^2` followed by local refinement levels,
/// each shrinking the step by 10 around the incumbent.
pub fn mle_search(
    obs: &EchoObservation,
    probe: &ProbeMatrix,
    tx: &ArrayLayout,
    rx: &ArrayLayout,
    wavelength: f64,
    opts: MleOptions,
) -> Result<MleSearch> {
    let obj = MleObjective::new(obs, probe, tx, rx, wavelength);
    let coarse = axis_grid(0.0, 1.0, opts.grid_step);
    let (mut est, mut val, worst) = obj.scan(&coarse, &coarse);
    if val - worst <= 1e-12 * val.abs() {
        return Err(Error::AmbiguousEstimate);
    }
    let mut levels = vec![val];
    let mut step = opts.grid_step;
    for _ in 0..opts.refine_levels {
        let fine = step / 10.0;
        let alphas = refine_grid(est.alpha, step, fine);
        let betas = refine_grid(est.beta, step, fine);
        let (e, v, _) = obj.scan(&alphas, &betas);
        if v > val {
            est = e;
            val = v;
        }
        levels.push(val);
        step = fine;
    }
    Ok(MleSearch {
        estimate: est,
        level_objectives: levels,
    })
}

pub fn mle_estimate(
    obs: &EchoObservation,
    probe: &ProbeMatrix,
    tx: &ArrayLayout,
    rx: &ArrayLayout,
    wavelength: f64,
    opts: MleOptions,
) -> Result<Wavevector> {
    mle_search(obs, probe, tx, rx, wavelength, opts).map(|s| s.estimate)
}

/// Direct evaluation of the MLE objective at a single wavevector.
pub fn mle_objective(
    obs: &EchoObservation,
    probe: &ProbeMatrix,
    tx: &ArrayLayout,
    rx: &ArrayLayout,
    wavelength: f64,
    wv: Wavevector,
) -> f64 {
    MleObjective::new(obs, probe, tx, rx, wavelength).eval(wv.alpha, wv.beta)
}

/// Per-axis CRBs of the spatial AoD estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrbPair {
    pub crb_alpha: f64,
    pub crb_beta: f64,
}

impl CrbPair {
    pub fn max(&self) -> f64 {
        self.crb_alpha.max(self.crb_beta)
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Mean-removed variance `(1/N) sum (x_n - mean)^2`.
pub fn variance(v: &[f64]) -> f64 {
    covariance(v, v)
}

/// Mean-removed covariance `(1/N) sum (x_n - mean_x)(y_n - mean_y)`.
pub fn covariance(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - mx) * (b - my))
        .sum::<f64>()
        / x.len() as f64
}

/// Aggregated second moments entering the CRB: `(V_x, V_y, C)`.
pub fn geometry_moments(tx: &ArrayLayout, rx: &ArrayLayout) -> (f64, f64, f64) {
    let (xt, yt, xr, yr) = (tx.xs(), tx.ys(), rx.xs(), rx.ys());
    (
        variance(&xt) + variance(&xr),
        variance(&yt) + variance(&yr),
        covariance(&xt, &yt) + covariance(&xr, &yr),
    )
}

/// The two effective denominators `(eta_1, eta_2)` of the closed-form CRB.
pub fn effective_apertures(tx: &ArrayLayout, rx: &ArrayLayout) -> Result<(f64, f64)> {
    let (vx, vy, c) = geometry_moments(tx, rx);
    let scale = vx.max(vy).max(f64::MIN_POSITIVE);
    if vx <= 1e-14 * scale || vy <= 1e-14 * scale {
        return Err(Error::SingularGeometry(
            "coordinate variance vanishes on one axis".into(),
        ));
    }
    let det = vx * vy - c * c;
    if det <= 1e-12 * vx * vy {
        return Err(Error::SingularGeometry("collinear antenna geometry".into()));
    }
    Ok((vx - c * c / vy, vy - c * c / vx))
}

/// Closed-form CRBs `G / (V_x - C^2/V_y)` and `G / (V_y - C^2/V_x)`.
pub fn crb_closed_form(
    tx: &ArrayLayout,
    rx: &ArrayLayout,
    constants: &SceneConstants,
) -> Result<CrbPair> {
    let (e1, e2) = effective_apertures(tx, rx)?;
    let g = constants.crb_scale(rx.len());
    Ok(CrbPair {
        crb_alpha: g / e1,
        crb_beta: g / e2,
    })
}

/// Real FIM over `(alpha, beta, Re zeta_s, Im zeta_s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisherInfo {
    pub matrix: Matrix4<f64>,
}

fn vec_of(m: &DMatrix<Complex64>) -> DVector<Complex64> {
    DVector::from_column_slice(m.as_slice())
}

/// Noise-free echo mean `zeta a(rho)` as `vec(zeta f g^H X)`.
pub(crate) fn echo_mean(
    tx: &ArrayLayout,
    rx: &ArrayLayout,
    zeta: Complex64,
    probe: &ProbeMatrix,
    rho: Wavevector,
    wavelength: f64,
) -> DVector<Complex64> {
    let g = field_response(tx, rho, wavelength);
    let f = field_response(rx, rho, wavelength);
    vec_of(&((f * g.adjoint()) * &probe.samples)) * zeta
}

fn fim_from_jacobian(cols: &[DVector<Complex64>; 4], noise: f64) -> FisherInfo {
    let mut m = Matrix4::zeros();
    for i in 0..4 {
        for j in 0..4 {
            m[(i, j)] = 2.0 / noise * cols[i].dotc(&cols[j]).re;
        }
    }
    FisherInfo { matrix: m }
}

/// Assembles the FIM from analytic FRV derivatives
/// `df/dalpha = j 2pi/lambda diag(x_r) f` (and likewise for the other axes).
pub fn fim_numeric(
    tx: &ArrayLayout,
    rx: &ArrayLayout,
    zeta_s: PathGain,
    probe: &ProbeMatrix,
    noise_sensing: f64,
    rho: Wavevector,
    wavelength: f64,
) -> FisherInfo {
    let k = 2.0 * PI / wavelength;
    let j = Complex64::new(0.0, 1.0);
    let g = field_response(tx, rho, wavelength);
    let f = field_response(rx, rho, wavelength);
    let scaled = |v: &DVector<Complex64>, c: &[f64]| {
        DVector::from_iterator(v.len(), v.iter().zip(c).map(|(a, &x)| *a * (j * k * x)))
    };
    let (df_a, df_b) = (scaled(&f, &rx.xs()), scaled(&f, &rx.ys()));
    let (dg_a, dg_b) = (scaled(&g, &tx.xs()), scaled(&g, &tx.ys()));
    let zeta = zeta_s.value;
    let w_alpha = &df_a * g.adjoint() + &f * dg_a.adjoint();
    let w_beta = &df_b * g.adjoint() + &f * dg_b.adjoint();
    let a = vec_of(&((&f * g.adjoint()) * &probe.samples));
    let cols = [
        vec_of(&(w_alpha * &probe.samples)) * zeta,
        vec_of(&(w_beta * &probe.samples)) * zeta,
        a.clone(),
        a * j,
    ];
    fim_from_jacobian(&cols, noise_sensing)
}

/// FIM of the Gaussian likelihood from a central finite-difference Jacobian
/// of the echo mean. Independent check on [`fim_numeric`].
#[allow(clippy::too_many_arguments)]
pub fn fim_finite_difference(
    tx: &ArrayLayout,
    rx: &ArrayLayout,
    zeta_s: PathGain,
    probe: &ProbeMatrix,
    noise_sensing: f64,
    rho: Wavevector,
    wavelength: f64,
    step: f64,
) -> FisherInfo {
    let z0 = zeta_s.value;
    let mean = |r: Wavevector, z: Complex64| echo_mean(tx, rx, z, probe, r, wavelength);
    let hz = step * z0.norm();
    let da = (mean(Wavevector::new(rho.alpha + step, rho.beta), z0)
        - mean(Wavevector::new(rho.alpha - step, rho.beta), z0))
        / Complex64::new(2.0 * step, 0.0);
    let db = (mean(Wavevector::new(rho.alpha, rho.beta + step), z0)
        - mean(Wavevector::new(rho.alpha, rho.beta - step), z0))
        / Complex64::new(2.0 * step, 0.0);
    let dre = (mean(rho, z0 + hz) - mean(rho, z0 - hz)) / Complex64::new(2.0 * hz, 0.0);
    let jh = Complex64::new(0.0, hz);
    let dim = (mean(rho, z0 + jh) - mean(rho, z0 - jh)) / Complex64::new(2.0 * hz, 0.0);
    fim_from_jacobian(&[da, db, dre, dim], noise_sensing)
}

/// Diagonal of the inverse Schur complement of the nuisance block.
pub fn crb_from_fim(fim: &FisherInfo) -> Result<CrbPair> {
    let m = &fim.matrix;
    let j_rr: Matrix2<f64> = m.fixed_view::<2, 2>(0, 0).into_owned();
    let j_rz: Matrix2<f64> = m.fixed_view::<2, 2>(0, 2).into_owned();
    let j_zz: Matrix2<f64> = m.fixed_view::<2, 2>(2, 2).into_owned();
    let j_zz_inv = j_zz
        .try_inverse()
        .ok_or_else(|| Error::SingularGeometry("nuisance block not invertible".into()))?;
    let schur = j_rr - j_rz * j_zz_inv * j_rz.transpose();
    let det = schur.determinant();
    let scale = schur[(0, 0)].abs() * schur[(1, 1)].abs();
    if !(det > 1e-10 * scale) || scale == 0.0 {
        return Err(Error::SingularGeometry("singular Schur complement".into()));
    }
    Ok(CrbPair {
        crb_alpha: schur[(1, 1)] / det,
        crb_beta: schur[(0, 0)] / det,
    })
}

/// Rectangle `estimate ± scale sqrt(CRB)` per axis, clamped to `[-1, 1]^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UncertaintyRegion {
    pub alpha_lo: f64,
    pub alpha_hi: f64,
    pub beta_lo: f64,
    pub beta_hi: f64,
}

impl UncertaintyRegion {
    pub fn singleton(wv: Wavevector) -> Self {
        Self {
            alpha_lo: wv.alpha,
            alpha_hi: wv.alpha,
            beta_lo: wv.beta,
            beta_hi: wv.beta,
        }
    }

    pub fn contains(&self, wv: Wavevector) -> bool {
        (self.alpha_lo..=self.alpha_hi).contains(&wv.alpha)
            && (self.beta_lo..=self.beta_hi).contains(&wv.beta)
    }

    pub fn is_singleton(&self) -> bool {
        self.alpha_lo == self.alpha_hi && self.beta_lo == self.beta_hi
    }

    pub fn center(&self) -> Wavevector {
        Wavevector::new(
            0.5 * (self.alpha_lo + self.alpha_hi),
            0.5 * (self.beta_lo + self.beta_hi),
        )
    }
}

pub fn uncertainty_region(estimate: Wavevector, crb: CrbPair, scale: f64) -> UncertaintyRegion {
    let ha = scale * crb.crb_alpha.sqrt();
    let hb = scale * crb.crb_beta.sqrt();
    UncertaintyRegion {
        alpha_lo: (estimate.alpha - ha).clamp(-1.0, 1.0),
        alpha_hi: (estimate.alpha + ha).clamp(-1.0, 1.0),
        beta_lo: (estimate.beta - hb).clamp(-1.0, 1.0),
        beta_hi: (estimate.beta + hb).clamp(-1.0, 1.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{echo_channel, Position};
    use crate::scene::Scene;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn upa(side: usize, spacing: f64, region: f64) -> ArrayLayout {
        let mut pts = Vec::new();
        for i in 0..side {
            for j in 0..side {
                pts.push(Position::new(j as f64 * spacing, i as f64 * spacing));
            }
        }
        ArrayLayout::new(pts, region, 0.025)
    }

    fn random_layout(rng: &mut ChaCha8Rng, n: usize, side: f64) -> ArrayLayout {
        let pts = (0..n)
            .map(|_| Position::new(rng.random::<f64>() * side, rng.random::<f64>() * side))
            .collect();
        ArrayLayout::new(pts, side, 0.0)
    }

    #[test]
    fn probe_examples() {
        let x = probe_dft(1, 1, 1.0).unwrap();
        assert!((x.samples[(0, 0)] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        for (n, t) in [(16, 16), (4, 8), (3, 7)] {
            let p = probe_dft(n, t, 1.0).unwrap();
            let r = (&p.samples * p.samples.adjoint()) / Complex64::new(t as f64, 0.0);
            for i in 0..n {
                for j in 0..n {
                    let want = if i == j { 1.0 / n as f64 } else { 0.0 };
                    assert!((r[(i, j)] - Complex64::new(want, 0.0)).norm() < 1e-12);
                }
            }
        }
        assert!(matches!(probe_dft(4, 3, 1.0), Err(Error::InvalidConfiguration(_))));
    }

    #[test]
    fn echo_noiseless_and_determinism() {
        let l = upa(2, 0.025, 0.25);
        let zs = SceneConstants::default().zeta_s();
        let h = echo_channel(&l, &l, Wavevector::new(0.1, 0.2), zs, 0.05);
        let x = probe_dft(4, 8, 1.0).unwrap();
        let clean = synthesize_echo(&h, &x, 0.0, 7);
        assert_eq!(clean.samples, &h * &x.samples);
        let a = synthesize_echo(&h, &x, 1e-12, 7);
        let b = synthesize_echo(&h, &x, 1e-12, 7);
        assert_eq!(a.samples, b.samples);
        let c = synthesize_echo(&h, &x, 1e-12, 8);
        assert_ne!(a.samples, c.samples);
    }

    #[test]
    fn pure_noise_variance() {
        let h = DMatrix::<Complex64>::zeros(4, 4);
        let x = probe_dft(4, 4000, 1.0).unwrap();
        let y = synthesize_echo(&h, &x, 1.0, 3);
        let var = y.samples.iter().map(|v| v.norm_sqr()).sum::<f64>() / y.samples.len() as f64;
        assert!((var - 1.0).abs() < 0.03, "sample variance {var}");
        let re_var =
            y.samples.iter().map(|v| v.re * v.re).sum::<f64>() / y.samples.len() as f64;
        assert!((re_var - 0.5).abs() < 0.02);
    }

    #[test]
    fn mle_single_antenna_is_ambiguous() {
        let one = ArrayLayout::new(vec![Position::new(0.01, 0.02)], 0.25, 0.0);
        let zs = SceneConstants::default().zeta_s();
        let h = echo_channel(&one, &one, Wavevector::new(0.1, 0.2), zs, 0.05);
        let x = probe_dft(1, 4, 1.0).unwrap();
        let y = synthesize_echo(&h, &x, 0.0, 1);
        let r = mle_estimate(&y, &x, &one, &one, 0.05, MleOptions::default());
        assert_eq!(r, Err(Error::AmbiguousEstimate));
    }

    #[test]
    fn mle_noiseless_recovers_truth_and_refines_monotonically() {
        let l = upa(4, 0.025, 0.25);
        let truth = Wavevector::new(-0.4330127, -0.5);
        let zs = SceneConstants::default().zeta_s();
        let h = echo_channel(&l, &l, truth, zs, 0.05);
        let x = probe_dft(16, 16, 1.0).unwrap();
        let y = synthesize_echo(&h, &x, 0.0, 1);
        let s = mle_search(&y, &x, &l, &l, 0.05, MleOptions::default()).unwrap();
        assert!((s.estimate.alpha - truth.alpha).abs() <= 5e-5);
        assert!((s.estimate.beta - truth.beta).abs() <= 5e-5);
        for w in s.level_objectives.windows(2) {
            assert!(w[1] >= w[0]);
        }
        let at_truth = mle_objective(&y, &x, &l, &l, 0.05, truth);
        // noiseless optimum value |zeta|^2 (T P_s / N)^2 (N M)^2
        let want = zs.magnitude().powi(2) * (16.0f64 / 16.0 * 16.0 * 16.0).powi(2);
        assert_relative_eq!(at_truth, want, max_relative = 1e-9);
        for &(a, b) in &[(0.0, 0.0), (-0.43, -0.49), (0.5, 0.5)] {
            assert!(at_truth >= mle_objective(&y, &x, &l, &l, 0.05, Wavevector::new(a, b)));
        }
    }

    #[test]
    fn moments_match_definitions() {
        assert_relative_eq!(variance(&[0.0, 1.0]), 0.25);
        assert_eq!(variance(&[3.0, 3.0, 3.0]), 0.0);
        assert!(covariance(&[-1.0, 0.0, 1.0], &[2.0, 2.0, 2.0]).abs() < 1e-15);
    }

    #[test]
    fn crb_singular_on_line_and_axis_swap() {
        let c = SceneConstants::default();
        let line = ArrayLayout::from_coords(&[0.0, 0.05, 0.1], &[0.1, 0.1, 0.1], 0.25, 0.0);
        assert!(matches!(
            crb_closed_form(&line, &line, &c),
            Err(Error::SingularGeometry(_))
        ));
        let diag = ArrayLayout::from_coords(&[0.0, 0.05, 0.1], &[0.0, 0.05, 0.1], 0.25, 0.0);
        assert!(crb_closed_form(&diag, &diag, &c).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let tx = random_layout(&mut rng, 6, 0.25);
        let rx = random_layout(&mut rng, 5, 0.25);
        let a = crb_closed_form(&tx, &rx, &c).unwrap();
        let b = crb_closed_form(&tx.transposed(), &rx.transposed(), &c).unwrap();
        assert_relative_eq!(a.crb_alpha, b.crb_beta, max_relative = 1e-12);
        assert_relative_eq!(a.crb_beta, b.crb_alpha, max_relative = 1e-12);
    }

    #[test]
    fn crb_translation_invariance_and_power_scaling() {
        let c = SceneConstants::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let tx = random_layout(&mut rng, 16, 0.25);
        let rx = random_layout(&mut rng, 16, 0.25);
        let a = crb_closed_form(&tx, &rx, &c).unwrap();
        let b = crb_closed_form(&tx.translated(0.1, -0.03), &rx.translated(-0.2, 0.07), &c)
            .unwrap();
        assert_relative_eq!(a.crb_alpha, b.crb_alpha, max_relative = 1e-12);
        assert_relative_eq!(a.crb_beta, b.crb_beta, max_relative = 1e-12);
        let mut c2 = c.clone();
        c2.sensing_power *= 2.0;
        let d = crb_closed_form(&tx, &rx, &c2).unwrap();
        assert_relative_eq!(d.crb_alpha, a.crb_alpha / 2.0, max_relative = 1e-14);
        assert_relative_eq!(d.crb_beta, a.crb_beta / 2.0, max_relative = 1e-14);
    }

    #[test]
    fn fim_route_matches_closed_form_on_fpa_h() {
        let scene = Scene::default();
        let c = &scene.constants;
        let l = upa(4, 0.025, 0.25);
        let x = probe_dft(16, c.snapshots, c.sensing_power).unwrap();
        let fim = fim_numeric(&l, &l, c.zeta_s(), &x, c.noise_sensing, scene.eve, c.wavelength);
        let from_fim = crb_from_fim(&fim).unwrap();
        let closed = crb_closed_form(&l, &l, c).unwrap();
        assert_relative_eq!(from_fim.crb_alpha, closed.crb_alpha, max_relative = 1e-6);
        assert_relative_eq!(from_fim.crb_beta, closed.crb_beta, max_relative = 1e-6);
    }

    #[test]
    fn fim_matches_finite_difference_and_is_psd() {
        let scene = Scene::default();
        let c = &scene.constants;
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let tx = random_layout(&mut rng, 6, 0.25);
        let rx = random_layout(&mut rng, 5, 0.25);
        let x = probe_dft(6, 8, c.sensing_power).unwrap();
        let fim = fim_numeric(&tx, &rx, c.zeta_s(), &x, c.noise_sensing, scene.eve, 0.05);
        let fd = fim_finite_difference(
            &tx, &rx, c.zeta_s(), &x, c.noise_sensing, scene.eve, 0.05, 1e-6,
        );
        let scale = fim.matrix.abs().max();
        assert!((fim.matrix - fd.matrix).abs().max() <= 1e-5 * scale);
        assert!((fim.matrix - fim.matrix.transpose()).abs().max() <= 1e-12 * scale);
        let eig = fim.matrix.symmetric_eigen().eigenvalues;
        assert!(eig.min() >= -1e-9 * scale);
    }

    #[test]
    fn fim_single_antenna_and_diagonal_cases() {
        let c = SceneConstants::default();
        let one = ArrayLayout::new(vec![Position::new(0.0, 0.0)], 0.25, 0.0);
        let x = probe_dft(1, 4, 1.0).unwrap();
        let fim = fim_numeric(&one, &one, c.zeta_s(), &x, 1e-12, Wavevector::new(0.2, 0.3), 0.05);
        assert_eq!(fim.matrix.fixed_view::<2, 2>(0, 0).abs().max(), 0.0);
        assert!(crb_from_fim(&fim).is_err());

        let diag = FisherInfo {
            matrix: Matrix4::from_diagonal(&nalgebra::Vector4::new(4.0, 5.0, 2.0, 2.0)),
        };
        let crb = crb_from_fim(&diag).unwrap();
        assert_relative_eq!(crb.crb_alpha, 0.25);
        assert_relative_eq!(crb.crb_beta, 0.2);
    }

    #[test]
    fn region_examples() {
        let r = uncertainty_region(
            Wavevector::new(0.0, 0.0),
            CrbPair { crb_alpha: 1e-4, crb_beta: 1e-4 },
            3.0,
        );
        assert_relative_eq!(r.alpha_lo, -0.03, epsilon = 1e-15);
        assert_relative_eq!(r.alpha_hi, 0.03, epsilon = 1e-15);
        assert_relative_eq!(r.beta_hi, 0.03, epsilon = 1e-15);
        let r = uncertainty_region(
            Wavevector::new(0.99, 0.0),
            CrbPair { crb_alpha: 1e-2, crb_beta: 1e-4 },
            3.0,
        );
        assert_eq!(r.alpha_hi, 1.0);
        assert_relative_eq!(r.alpha_lo, 0.69, epsilon = 1e-12);
        let est = Wavevector::new(-0.4, 0.2);
        let r = uncertainty_region(est, CrbPair { crb_alpha: 1e-3, crb_beta: 1e-3 }, 0.0);
        assert!(r.is_singleton());
        assert_eq!(r.center(), est);
    }
}
