//! Worst-case secrecy beamforming over the convex hull of sampled
//! eavesdropper channels.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{comm_channel, ArrayLayout, PathGain, Wavevector};
use crate::sensing::UncertaintyRegion;

#[derive(Debug, Clone, PartialEq)]
pub struct HullSamples {
    pub wavevectors: Vec<Wavevector>,
    pub channels: Vec<DVector<Complex64>>,
    pub matrices: Vec<DMatrix<Complex64>>,
}

impl HullSamples {
    pub fn count(&self) -> usize {
        self.wavevectors.len()
    }

    /// `sum_f mu_f H_{e,f}`.
    pub fn weighted(&self, weights: &SimplexWeights) -> DMatrix<Complex64> {
        let n = self.channels[0].len();
        let mut m = DMatrix::zeros(n, n);
        for (h, &mu) in self.matrices.iter().zip(&weights.mu) {
            m += h * Complex64::new(mu, 0.0);
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexWeights {
    pub mu: Vec<f64>,
}

impl SimplexWeights {
    pub fn uniform(f: usize) -> Self {
        Self {
            mu: vec![1.0 / f as f64; f],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerSolution {
    pub direction: DVector<Complex64>,
    pub power: f64,
    pub vector: DVector<Complex64>,
    pub gamma: f64,
    pub weights: SimplexWeights,
    pub iterations: usize,
    pub converged: bool,
    pub gamma_trace: Vec<f64>,
}

/// `n` evenly spaced points on `[lo, hi]`, endpoints included. A degenerate
/// interval or `n == 1` gives its midpoint.
pub(crate) fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 || hi <= lo {
        return vec![0.5 * (lo + hi)];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Grid of wavevectors over the region, alpha-major.
pub fn region_grid(region: &UncertaintyRegion, grid: (usize, usize)) -> Vec<Wavevector> {
    let alphas = linspace(region.alpha_lo, region.alpha_hi, grid.0);
    let betas = linspace(region.beta_lo, region.beta_hi, grid.1);
    alphas
        .iter()
        .flat_map(|&a| betas.iter().map(move |&b| Wavevector::new(a, b)))
        .collect()
}

pub fn sample_uncertainty(
    region: &UncertaintyRegion,
    tx: &ArrayLayout,
    zeta_e: PathGain,
    grid: (usize, usize),
    wavelength: f64,
) -> HullSamples {
    let wavevectors = region_grid(region, grid);
    let channels: Vec<DVector<Complex64>> = wavevectors
        .iter()
        .map(|&wv| comm_channel(tx, wv, zeta_e, wavelength))
        .collect();
    let matrices = channels.iter().map(|h| h * h.adjoint()).collect();
    HullSamples {
        wavevectors,
        channels,
        matrices,
    }
}

/// `mu_f ∝ |h_{e,f}^H w|^2`; uniform when every leakage term vanishes.
pub fn weight_update(direction: &DVector<Complex64>, samples: &HullSamples) -> SimplexWeights {
    let leak: Vec<f64> = samples
        .channels
        .iter()
        .map(|h| h.dotc(direction).norm_sqr())
        .collect();
    let total: f64 = leak.iter().sum();
    if !(total > 0.0) {
        return SimplexWeights::uniform(leak.len());
    }
    SimplexWeights {
        mu: leak.iter().map(|l| l / total).collect(),
    }
}

/// Rotates `v` so its largest-magnitude entry is real and positive.
pub fn fix_phase(v: &DVector<Complex64>) -> DVector<Complex64> {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].norm() > v[best].norm() {
            best = i;
        }
    }
    let a = v[best].norm();
    if a == 0.0 {
        return v.clone();
    }
    v * (v[best].conj() / a)
}

fn leakage_matrix(p: f64, weights: &SimplexWeights, samples: &HullSamples, noise_eve: f64) -> DMatrix<Complex64> {
    let n = samples.channels[0].len();
    samples.weighted(weights) * Complex64::new(p, 0.0)
        + DMatrix::identity(n, n) * Complex64::new(noise_eve, 0.0)
}

/// `w ∝ B^{-1} h_c`, `gamma = h_c^H B^{-1} h_c` with
/// `B = P sum_f mu_f H_{e,f} + sigma_e^2 I`.
pub fn direction_update(
    p: f64,
    weights: &SimplexWeights,
    samples: &HullSamples,
    h_c: &DVector<Complex64>,
    noise_eve: f64,
) -> (DVector<Complex64>, f64) {
    let b = leakage_matrix(p, weights, samples, noise_eve);
    let x = b
        .cholesky()
        .expect("sigma_e^2 > 0 keeps B positive definite")
        .solve(h_c);
    let gamma = h_c.dotc(&x).re;
    (fix_phase(&x.normalize()), gamma)
}

/// Full eigendecomposition of the Hermitian pencil `(A, B)` with `B`
/// positive definite, via `B = L L^H` and the eigendecomposition of
/// `L^-1 A L^-H`. Eigenvalues come in descending order; eigenvector columns
/// are `B`-orthonormal.
pub fn generalized_eig(
    a: &DMatrix<Complex64>,
    b: &DMatrix<Complex64>,
) -> Result<(Vec<f64>, DMatrix<Complex64>)> {
    let chol = b
        .clone()
        .cholesky()
        .ok_or_else(|| Error::SingularGeometry("B is not positive definite".into()))?;
    let linv = chol
        .l()
        .try_inverse()
        .ok_or_else(|| Error::SingularGeometry("B is singular".into()))?;
    let c = &linv * a * linv.adjoint();
    // symmetrize against rounding before the Hermitian solver
    let c = (&c + c.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = c.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let lh = linv.adjoint();
    let mut vectors = DMatrix::zeros(a.nrows(), a.ncols());
    for (k, &i) in order.iter().enumerate() {
        vectors.set_column(k, &(&lh * eig.eigenvectors.column(i)));
    }
    Ok((values, vectors))
}

/// Principal eigenpair of the pencil `(A, B)`, unit-norm and phase-fixed.
pub fn generalized_max_eig(
    a: &DMatrix<Complex64>,
    b: &DMatrix<Complex64>,
) -> Result<(f64, DVector<Complex64>)> {
    let (values, vectors) = generalized_eig(a, b)?;
    Ok((values[0], fix_phase(&vectors.column(0).normalize())))
}

/// Hermitian Rayleigh quotient `v^H A v / v^H B v`.
pub fn rayleigh_quotient(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>, v: &DVector<Complex64>) -> f64 {
    v.dotc(&(a * v)).re / v.dotc(&(b * v)).re
}

fn pencil_a(h_c: &DVector<Complex64>, power: f64, noise_comm: f64) -> DMatrix<Complex64> {
    let n = h_c.len();
    h_c * h_c.adjoint() * Complex64::new(power, 0.0)
        + DMatrix::identity(n, n) * Complex64::new(noise_comm, 0.0)
}

/// Worst-case SNR ratio over the hull for fixed weights,
/// `psi(mu) = lambda_max(P H_c + sigma_c^2 I, P sum mu H_e + sigma_e^2 I)`,
/// with its gradient and Hessian in `mu`.
struct HullDual<'a> {
    a: DMatrix<Complex64>,
    samples: &'a HullSamples,
    power: f64,
    noise_eve: f64,
}

struct DualPoint {
    value: f64,
    grad: DVector<f64>,
    hess: DMatrix<f64>,
    vector: DVector<Complex64>,
}

impl HullDual<'_> {
    fn value(&self, mu: &[f64]) -> Option<f64> {
        let b = leakage_matrix(self.power, &SimplexWeights { mu: mu.to_vec() }, self.samples, self.noise_eve);
        generalized_eig(&self.a, &b).ok().map(|(v, _)| v[0])
    }

    fn eval(&self, mu: &[f64]) -> Result<DualPoint> {
        let f = mu.len();
        let b = leakage_matrix(self.power, &SimplexWeights { mu: mu.to_vec() }, self.samples, self.noise_eve);
        let (vals, vecs) = generalized_eig(&self.a, &b)?;
        let lam = vals[0];
        let n = vals.len();
        // coef[k][f] = P (v_k^H h_f)(h_f^H v_1)
        let proj: Vec<DVector<Complex64>> = self
            .samples
            .channels
            .iter()
            .map(|h| vecs.adjoint() * h)
            .collect();
        let lead: Vec<Complex64> = proj.iter().map(|p| p[0].conj()).collect();
        let d1: Vec<f64> = (0..f).map(|i| self.power * lead[i].norm_sqr()).collect();
        let grad = DVector::from_iterator(f, d1.iter().map(|d| -lam * d));
        let mut hess = DMatrix::from_fn(f, f, |i, j| 2.0 * lam * d1[i] * d1[j]);
        for k in 1..n {
            let gap = (lam - vals[k]).max(1e-12 * lam.abs());
            let w = 2.0 * lam * lam / gap;
            let ak: Vec<Complex64> = (0..f).map(|i| proj[i][k] * lead[i] * self.power).collect();
            for i in 0..f {
                for j in 0..f {
                    hess[(i, j)] += w * (ak[i] * ak[j].conj()).re;
                }
            }
        }
        Ok(DualPoint {
            value: lam,
            grad,
            hess,
            vector: fix_phase(&vecs.column(0).normalize()),
        })
    }
}

/// Equality-constrained Newton step for `t psi(mu) - sum log mu` on the
/// simplex.
fn simplex_newton(pt: &DualPoint, mu: &[f64], t: f64) -> DVector<f64> {
    let f = mu.len();
    let g = DVector::from_iterator(f, (0..f).map(|i| t * pt.grad[i] - 1.0 / mu[i]));
    let mut h = &pt.hess * t;
    for i in 0..f {
        h[(i, i)] += 1.0 / (mu[i] * mu[i]);
    }
    let ch = match h.clone().cholesky() {
        Some(c) => c,
        None => {
            let scale = (0..f).map(|i| h[(i, i)]).fold(0.0, f64::max);
            let mut hr = h;
            for i in 0..f {
                hr[(i, i)] += 1e-10 * scale;
            }
            hr.cholesky().expect("regularized Hessian is positive definite")
        }
    };
    let ones = DVector::from_element(f, 1.0);
    let hg = ch.solve(&g);
    let h1 = ch.solve(&ones);
    let nu = -ones.dot(&hg) / ones.dot(&h1);
    -(hg + h1 * nu)
}

/// Worst-case secrecy beamformer over the hull of sampled eavesdropper
/// channels.
///
/// The hull weights minimize `psi(mu)`, the largest generalized eigenvalue
/// of `(P H_c + sigma_c^2 I, P sum mu H_e + sigma_e^2 I)`, which is convex on
/// the simplex. The minimization is a log-barrier Newton method; `gamma_trace`
/// holds `psi` at the end of each barrier stage and is non-increasing. It stops
/// once the barrier gap is below `delta3` relative. The beamformer is the
/// principal generalized eigenvector at the final weights, at full power.
pub fn robust_beamform(
    h_c: &DVector<Complex64>,
    samples: &HullSamples,
    power: f64,
    noise_comm: f64,
    noise_eve: f64,
    delta3: f64,
    max_iter: usize,
) -> Result<BeamformerSolution> {
    if h_c.norm() == 0.0 {
        return Err(Error::ZeroChannel);
    }
    let f = samples.count();
    let dual = HullDual {
        a: pencil_a(h_c, power, noise_comm),
        samples,
        power,
        noise_eve,
    };
    let mut mu = vec![1.0 / f as f64; f];
    let mut pt = dual.eval(&mu)?;
    let mut trace = vec![pt.value];
    if f == 1 {
        return Ok(finish(pt, SimplexWeights { mu }, power, 1, true, trace));
    }
    let fm = f as f64;
    let mut t = fm / pt.value.abs().max(f64::MIN_POSITIVE);
    let mut iterations = 0;
    let mut converged = false;
    let merit = |m: &[f64], v: f64, t: f64| t * v - m.iter().map(|x| x.ln()).sum::<f64>();
    'outer: while iterations < max_iter {
        // centering
        loop {
            let d = simplex_newton(&pt, &mu, t);
            let g = DVector::from_iterator(f, (0..f).map(|i| t * pt.grad[i] - 1.0 / mu[i]));
            let dec2 = -g.dot(&d);
            if !(dec2 > 1e-6) {
                break;
            }
            if iterations == max_iter {
                break 'outer;
            }
            iterations += 1;
            let f0 = merit(&mu, pt.value, t);
            let mut s = 1.0f64;
            for i in 0..f {
                if d[i] < 0.0 {
                    s = s.min(0.99 * mu[i] / -d[i]);
                }
            }
            let mut accepted = None;
            while s > 1e-12 {
                let cand: Vec<f64> = (0..f).map(|i| mu[i] + s * d[i]).collect();
                if let Some(v) = dual.value(&cand) {
                    if merit(&cand, v, t) <= f0 - 0.25 * s * dec2 {
                        accepted = Some(cand);
                        break;
                    }
                }
                s *= 0.5;
            }
            let Some(cand) = accepted else { break };
            let total: f64 = cand.iter().sum();
            mu = cand.iter().map(|x| x / total).collect();
            pt = dual.eval(&mu)?;
        }
        trace.push(pt.value);
        if fm / t <= delta3 * pt.value.abs() {
            converged = true;
            break;
        }
        t *= 20.0;
    }
    Ok(finish(pt, SimplexWeights { mu }, power, iterations, converged, trace))
}

fn finish(
    pt: DualPoint,
    weights: SimplexWeights,
    power: f64,
    iterations: usize,
    converged: bool,
    gamma_trace: Vec<f64>,
) -> BeamformerSolution {
    let vector = &pt.vector * Complex64::new(power.sqrt(), 0.0);
    BeamformerSolution {
        direction: pt.vector,
        power,
        vector,
        gamma: pt.value,
        weights,
        iterations,
        converged,
        gamma_trace,
    }
}

/// Plain alternation of [`weight_update`] and [`direction_update`] from
/// uniform weights until the relative change of `gamma` drops below
/// `delta3`, followed by the generalized-eigen direction for the last
/// weights. Kept as a reference: the fixed-point map can cycle.
pub fn alternating_beamform(
    h_c: &DVector<Complex64>,
    samples: &HullSamples,
    power: f64,
    noise_comm: f64,
    noise_eve: f64,
    delta3: f64,
    max_iter: usize,
) -> Result<BeamformerSolution> {
    if h_c.norm() == 0.0 {
        return Err(Error::ZeroChannel);
    }
    let mut weights = SimplexWeights::uniform(samples.count());
    let (mut dir, mut gamma) = direction_update(power, &weights, samples, h_c, noise_eve);
    let mut trace = vec![gamma];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        weights = weight_update(&dir, samples);
        let (d, g) = direction_update(power, &weights, samples, h_c, noise_eve);
        let change = (g - gamma).abs() / gamma.abs().max(f64::MIN_POSITIVE);
        dir = d;
        gamma = g;
        trace.push(g);
        if change < delta3 {
            converged = true;
            break;
        }
    }
    let b = leakage_matrix(power, &weights, samples, noise_eve);
    let (_, direction) = generalized_max_eig(&pencil_a(h_c, power, noise_comm), &b)?;
    let vector = &direction * Complex64::new(power.sqrt(), 0.0);
    Ok(BeamformerSolution {
        direction,
        power,
        vector,
        gamma,
        weights,
        iterations,
        converged,
        gamma_trace: trace,
    })
}

/// `[log2(1 + |h_c^H w|^2 / sigma_c^2) - log2(1 + |h_e^H w|^2 / sigma_e^2)]^+`.
pub fn secrecy_rate(
    h_c: &DVector<Complex64>,
    h_e: &DVector<Complex64>,
    w: &DVector<Complex64>,
    noise_comm: f64,
    noise_eve: f64,
) -> f64 {
    let legit = (h_c.dotc(w).norm_sqr() / noise_comm).ln_1p();
    let eve = (h_e.dotc(w).norm_sqr() / noise_eve).ln_1p();
    ((legit - eve) / std::f64::consts::LN_2).max(0.0)
}

/// Minimum secrecy rate over an `eval_grid` of eavesdropper wavevectors
/// covering the region.
#[allow(clippy::too_many_arguments)]
pub fn worst_case_secrecy(
    h_c: &DVector<Complex64>,
    tx: &ArrayLayout,
    zeta_e: PathGain,
    region: &UncertaintyRegion,
    w: &DVector<Complex64>,
    noise_comm: f64,
    noise_eve: f64,
    eval_grid: (usize, usize),
    wavelength: f64,
) -> f64 {
    region_grid(region, eval_grid)
        .into_iter()
        .map(|wv| {
            let h_e = comm_channel(tx, wv, zeta_e, wavelength);
            secrecy_rate(h_c, &h_e, w, noise_comm, noise_eve)
        })
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{GainKind, Position};
    use crate::rng::rng_from_seed;
    use crate::scene::Scene;
    use crate::sensing::uncertainty_region;
    use crate::sensing::CrbPair;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_cvec<R: Rng>(rng: &mut R, n: usize) -> DVector<Complex64> {
        DVector::from_fn(n, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    fn samples_from(channels: Vec<DVector<Complex64>>) -> HullSamples {
        HullSamples {
            wavevectors: vec![Wavevector::new(0.0, 0.0); channels.len()],
            matrices: channels.iter().map(|h| h * h.adjoint()).collect(),
            channels,
        }
    }

    fn upa4() -> ArrayLayout {
        let mut pts = Vec::new();
        for i in 0..4 {
            for j in 0..4 {
                pts.push(Position::new(j as f64 * 0.025, i as f64 * 0.025));
            }
        }
        ArrayLayout::new(pts, 0.25, 0.025)
    }

    #[test]
    fn sampling_examples() {
        let scene = Scene::default();
        let ze = scene.constants.zeta_e();
        let tx = upa4();
        let single = UncertaintyRegion::singleton(scene.eve);
        assert_eq!(sample_uncertainty(&single, &tx, ze, (5, 5), 0.05).count(), 1);
        let r = uncertainty_region(scene.eve, CrbPair { crb_alpha: 1e-4, crb_beta: 4e-4 }, 3.0);
        let corners = sample_uncertainty(&r, &tx, ze, (2, 2), 0.05);
        let got: Vec<(f64, f64)> = corners.wavevectors.iter().map(|w| (w.alpha, w.beta)).collect();
        assert_eq!(
            got,
            vec![
                (r.alpha_lo, r.beta_lo),
                (r.alpha_lo, r.beta_hi),
                (r.alpha_hi, r.beta_lo),
                (r.alpha_hi, r.beta_hi)
            ]
        );
        let full = sample_uncertainty(&r, &tx, ze, (5, 5), 0.05);
        assert_eq!(full.count(), 25);
        for (m, wv) in full.matrices.iter().zip(&full.wavevectors) {
            assert!(r.contains(*wv));
            assert_relative_eq!(m.trace().re, ze.magnitude().powi(2) * 16.0, max_relative = 1e-12);
            let sv = m.singular_values();
            assert!(sv[1] <= 1e-12 * sv[0]);
        }
    }

    #[test]
    fn weight_examples() {
        let mut rng = rng_from_seed(1);
        let one = samples_from(vec![random_cvec(&mut rng, 3)]);
        let w = random_cvec(&mut rng, 3);
        assert_eq!(weight_update(&w, &one).mu, vec![1.0]);
        let h = random_cvec(&mut rng, 3);
        let two = samples_from(vec![h.clone(), h.clone() * c(0.0, 1.0)]);
        let mu = weight_update(&w, &two).mu;
        assert_relative_eq!(mu[0], 0.5, epsilon = 1e-15);
        assert_relative_eq!(mu[1], 0.5, epsilon = 1e-15);

        let many = samples_from((0..7).map(|_| random_cvec(&mut rng, 4)).collect());
        let w = random_cvec(&mut rng, 4);
        let mu = weight_update(&w, &many).mu;
        let terms: Vec<f64> = many.matrices.iter().map(|m| w.dotc(&(m * &w)).re).collect();
        let total: f64 = terms.iter().sum();
        for (m, t) in mu.iter().zip(&terms) {
            assert_relative_eq!(*m, t / total, max_relative = 1e-12);
        }
        assert!((mu.iter().sum::<f64>() - 1.0).abs() <= 1e-12);

        let orth = samples_from(vec![DVector::from_vec(vec![c(0.0, 0.0), c(1.0, 0.0)])]);
        let e1 = DVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]);
        let mut orth2 = orth.clone();
        orth2.channels.push(orth.channels[0].clone());
        orth2.matrices.push(orth.matrices[0].clone());
        orth2.wavevectors.push(orth.wavevectors[0]);
        assert_eq!(weight_update(&e1, &orth2).mu, vec![0.5, 0.5]);
    }

    #[test]
    fn direction_examples() {
        let h_c = DVector::from_vec(vec![c(1.0, 0.0), c(0.0, 1.0), c(0.0, 0.0)]);
        let orth = samples_from(vec![DVector::from_vec(vec![c(0.0, 0.0), c(0.0, 0.0), c(2.0, 1.0)])]);
        let w = SimplexWeights::uniform(1);
        let (d, g) = direction_update(10.0, &w, &orth, &h_c, 0.5);
        let mrt = fix_phase(&h_c.normalize());
        assert!((d - &mrt).norm() < 1e-12);
        assert_relative_eq!(g, 2.0 / 0.5, max_relative = 1e-12);
        let mut rng = rng_from_seed(2);
        let any = samples_from(vec![random_cvec(&mut rng, 3)]);
        let (d, g) = direction_update(0.0, &w, &any, &h_c, 0.5);
        assert!((d - &mrt).norm() < 1e-12);
        assert_relative_eq!(g, h_c.norm_squared() / 0.5, max_relative = 1e-12);
    }

    #[test]
    fn generalized_eig_examples() {
        let i2 = DMatrix::<Complex64>::identity(2, 2);
        let (v, x) = generalized_max_eig(&i2, &i2).unwrap();
        assert_relative_eq!(v, 1.0, epsilon = 1e-14);
        assert_relative_eq!(x.norm(), 1.0, epsilon = 1e-14);
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![c(3.0, 0.0), c(1.0, 0.0)]));
        let (v, x) = generalized_max_eig(&a, &i2).unwrap();
        assert_relative_eq!(v, 3.0, epsilon = 1e-14);
        assert!((x[0] - c(1.0, 0.0)).norm() < 1e-14 && x[1].norm() < 1e-14);
        let sing = DMatrix::from_diagonal(&DVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]));
        assert!(generalized_max_eig(&a, &sing).is_err());

        let mut rng = rng_from_seed(3);
        for _ in 0..20 {
            let g = DMatrix::from_fn(5, 5, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            let h = DMatrix::from_fn(5, 5, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            let a = &g * g.adjoint();
            let b = &h * h.adjoint() + DMatrix::identity(5, 5) * c(0.1, 0.0);
            let (v, x) = generalized_max_eig(&a, &b).unwrap();
            assert_relative_eq!(rayleigh_quotient(&a, &b, &x), v, max_relative = 1e-10);
            // no random direction beats the principal value
            for _ in 0..20 {
                let y = random_cvec(&mut rng, 5);
                assert!(rayleigh_quotient(&a, &b, &y) <= v * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn closed_form_is_exact_eigenpair_of_legit_pencil() {
        let scene = Scene::default();
        let k = &scene.constants;
        let mut rng = rng_from_seed(4);
        for _ in 0..20 {
            let tx = crate::sensing_opt::random_layout(&mut rng, 16, 0.25, 0.025, 10_000).unwrap();
            let h_c = scene.legit_channel(&tx);
            let est = Wavevector::new(scene.eve.alpha + rng.random_range(-0.01..0.01), scene.eve.beta);
            let r = uncertainty_region(est, CrbPair { crb_alpha: 1e-5, crb_beta: 1e-5 }, 3.0);
            let s = sample_uncertainty(&r, &tx, k.zeta_e(), (5, 5), k.wavelength);
            let mu: Vec<f64> = (0..25).map(|_| rng.random_range(0.0..1.0)).collect();
            let tot: f64 = mu.iter().sum();
            let w = SimplexWeights { mu: mu.iter().map(|m| m / tot).collect() };
            let p = k.comm_power_max;
            let (d, g) = direction_update(p, &w, &s, &h_c, k.noise_eve);
            let b = s.weighted(&w) * c(p, 0.0) + DMatrix::identity(16, 16) * c(k.noise_eve, 0.0);
            let (v, x) = generalized_max_eig(&(&h_c * h_c.adjoint()), &b).unwrap();
            assert!((d.dotc(&x).norm() - 1.0).abs() < 1e-8);
            assert_relative_eq!(g, v, max_relative = 1e-8);
        }
    }

    #[test]
    fn single_sample_matches_generalized_eigen_optimum() {
        let scene = Scene::default();
        let k = &scene.constants;
        let tx = upa4();
        let h_c = scene.legit_channel(&tx);
        let s = sample_uncertainty(&UncertaintyRegion::singleton(scene.eve), &tx, k.zeta_e(), (5, 5), 0.05);
        let sol = robust_beamform(&h_c, &s, k.comm_power_max, k.noise_comm, k.noise_eve, 1e-6, 100).unwrap();
        assert_eq!(sol.iterations, 1);
        assert!(sol.converged);
        let n = 16;
        let a = &h_c * h_c.adjoint() * c(k.comm_power_max, 0.0) + DMatrix::identity(n, n) * c(k.noise_comm, 0.0);
        let b = &s.matrices[0] * c(k.comm_power_max, 0.0) + DMatrix::identity(n, n) * c(k.noise_eve, 0.0);
        let (_, x) = generalized_max_eig(&a, &b).unwrap();
        assert!((sol.direction.dotc(&x).norm() - 1.0).abs() < 1e-10);
        assert_relative_eq!(sol.vector.norm_squared(), k.comm_power_max, max_relative = 1e-10);
        assert_relative_eq!(sol.direction.norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn orthogonal_eavesdropper_gives_mrt() {
        let h_c = DVector::from_vec(vec![c(1.0, 0.0), c(1.0, 0.0)]);
        let s = samples_from(vec![
            DVector::from_vec(vec![c(1.0, 0.0), c(-1.0, 0.0)]),
            DVector::from_vec(vec![c(0.0, 2.0), c(0.0, -2.0)]),
        ]);
        let sol = robust_beamform(&h_c, &s, 4.0, 1.0, 1.0, 1e-6, 100).unwrap();
        let want = fix_phase(&h_c.normalize()) * c(2.0, 0.0);
        assert!((sol.vector - want).norm() < 1e-10);
    }

    /// Worst case over the hull of the SNR ratio: linear in mu, so the
    /// minimum sits at a vertex.
    fn hull_ratio(h_c: &DVector<Complex64>, s: &HullSamples, w: &DVector<Complex64>, nc: f64, ne: f64) -> f64 {
        s.channels
            .iter()
            .map(|h| (1.0 + h_c.dotc(w).norm_sqr() / nc) / (1.0 + h.dotc(w).norm_sqr() / ne))
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn two_antenna_matches_sphere_grid() {
        let mut rng = rng_from_seed(5);
        for _ in 0..5 {
            let h_c = random_cvec(&mut rng, 2);
            let s = samples_from(vec![random_cvec(&mut rng, 2), random_cvec(&mut rng, 2)]);
            let p = 5.0;
            let sol = robust_beamform(&h_c, &s, p, 0.3, 0.3, 1e-8, 200).unwrap();
            let got = hull_ratio(&h_c, &s, &sol.vector, 0.3, 0.3);
            let mut best = 0.0f64;
            let steps = 400;
            for i in 0..=steps {
                let a = std::f64::consts::FRAC_PI_2 * i as f64 / steps as f64;
                for j in 0..(4 * steps) {
                    let ph = 2.0 * std::f64::consts::PI * j as f64 / (4 * steps) as f64;
                    let w = DVector::from_vec(vec![c(a.cos(), 0.0), Complex64::from_polar(a.sin(), ph)])
                        * c(p.sqrt(), 0.0);
                    best = best.max(hull_ratio(&h_c, &s, &w, 0.3, 0.3));
                }
            }
            assert!(got >= 0.99 * best, "{got} vs grid {best}");
        }
    }

    #[test]
    fn secrecy_examples() {
        let h = DVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]);
        let zero = DVector::zeros(2);
        assert_eq!(secrecy_rate(&h, &h, &zero, 1.0, 1.0), 0.0);
        let w = DVector::from_vec(vec![c(0.3, 0.4), c(1.0, 0.0)]);
        assert_eq!(secrecy_rate(&h, &h, &w, 1.0, 1.0), 0.0);
        let hc = DVector::from_vec(vec![c(3f64.sqrt(), 0.0), c(0.0, 0.0)]);
        let he = DVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]);
        let e1 = DVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]);
        assert_relative_eq!(secrecy_rate(&hc, &he, &e1, 1.0, 1.0), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn worst_case_grid_properties() {
        let scene = Scene::default();
        let k = &scene.constants;
        let tx = upa4();
        let h_c = scene.legit_channel(&tx);
        let ze = crate::geometry::path_gain(GainKind::CommEve, k);
        let single = UncertaintyRegion::singleton(scene.eve);
        let w = fix_phase(&h_c.normalize()) * c(k.comm_power_max.sqrt(), 0.0);
        let h_e = scene.eve_channel(&tx, scene.eve);
        assert_eq!(
            worst_case_secrecy(&h_c, &tx, ze, &single, &w, k.noise_comm, k.noise_eve, (21, 21), 0.05),
            secrecy_rate(&h_c, &h_e, &w, k.noise_comm, k.noise_eve)
        );
        let r = uncertainty_region(scene.eve, CrbPair { crb_alpha: 4e-4, crb_beta: 4e-4 }, 3.0);
        let coarse = worst_case_secrecy(&h_c, &tx, ze, &r, &w, k.noise_comm, k.noise_eve, (5, 5), 0.05);
        let fine = worst_case_secrecy(&h_c, &tx, ze, &r, &w, k.noise_comm, k.noise_eve, (9, 9), 0.05);
        assert!(fine <= coarse);

        let s = sample_uncertainty(&r, &tx, ze, (5, 5), 0.05);
        let sol = robust_beamform(&h_c, &s, k.comm_power_max, k.noise_comm, k.noise_eve, 1e-6, 100).unwrap();
        for w in sol.gamma_trace.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
        assert!(sol.converged);
        let robust = worst_case_secrecy(&h_c, &tx, ze, &r, &sol.vector, k.noise_comm, k.noise_eve, (21, 21), 0.05);
        let mrt = worst_case_secrecy(&h_c, &tx, ze, &r, &w, k.noise_comm, k.noise_eve, (21, 21), 0.05);
        assert!(robust >= mrt, "{robust} < {mrt}");
        for m in &sol.weights.mu {
            assert!(*m >= 0.0);
        }
        assert!((sol.weights.mu.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }
}
