//! Array geometry, spatial angles, field-response vectors and line-of-sight
//! channel construction.
//!
//! Coordinates are in meters inside an `A x A` movement region anchored at
//! the local origin. The wavelength only enters through phase terms.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::scene::SceneConstants;

/// Spacing slack accepted by [`ArrayLayout::check_feasible`].
pub const SPACING_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Antenna positions of one array together with its movement region.
///
/// Spacing is not enforced at construction: SCA iterates may transiently
/// violate it, so validity is checked on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayLayout {
    pub positions: Vec<Position>,
    pub region_side: f64,
    pub min_spacing: f64,
}

impl ArrayLayout {
    pub fn new(positions: Vec<Position>, region_side: f64, min_spacing: f64) -> Self {
        Self {
            positions,
            region_side,
            min_spacing,
        }
    }

    pub fn from_coords(xs: &[f64], ys: &[f64], region_side: f64, min_spacing: f64) -> Self {
        assert_eq!(xs.len(), ys.len(), "coordinate vectors differ in length");
        let positions = xs
            .iter()
            .zip(ys)
            .map(|(&x, &y)| Position::new(x, y))
            .collect();
        Self::new(positions, region_side, min_spacing)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn xs(&self) -> Vec<f64> {
        self.positions.iter().map(|p| p.x).collect()
    }

    pub fn ys(&self) -> Vec<f64> {
        self.positions.iter().map(|p| p.y).collect()
    }

    pub fn with_xs(&self, xs: &[f64]) -> Self {
        Self::from_coords(xs, &self.ys(), self.region_side, self.min_spacing)
    }

    pub fn with_ys(&self, ys: &[f64]) -> Self {
        Self::from_coords(&self.xs(), ys, self.region_side, self.min_spacing)
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        let positions = self
            .positions
            .iter()
            .map(|p| Position::new(p.x + dx, p.y + dy))
            .collect();
        Self::new(positions, self.region_side, self.min_spacing)
    }

    /// Positions with x and y exchanged.
    pub fn transposed(&self) -> Self {
        Self::from_coords(&self.ys(), &self.xs(), self.region_side, self.min_spacing)
    }

    /// Smallest pairwise distance, `+inf` for fewer than two antennas.
    pub fn min_pairwise_distance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for (i, a) in self.positions.iter().enumerate() {
            for b in &self.positions[i + 1..] {
                best = best.min(a.distance(b));
            }
        }
        best
    }

    pub fn in_region(&self) -> bool {
        let side = self.region_side;
        self.positions
            .iter()
            .all(|p| (0.0..=side).contains(&p.x) && (0.0..=side).contains(&p.y))
    }

    /// Box membership plus pairwise spacing `>= D - 1e-9`.
    pub fn check_feasible(&self) -> Result<()> {
        if !self.in_region() {
            return Err(Error::InvalidConfiguration(
                "antenna outside its movement region".into(),
            ));
        }
        let d = self.min_pairwise_distance();
        if d < self.min_spacing - SPACING_TOL {
            return Err(Error::InvalidConfiguration(format!(
                "minimum spacing violated: {d:.3e} < {:.3e}",
                self.min_spacing
            )));
        }
        Ok(())
    }

    pub fn is_feasible(&self) -> bool {
        self.check_feasible().is_ok()
    }
}

/// Elevation / azimuth angle-of-departure pair, both in `[0, pi]` radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialAngles {
    pub theta: f64,
    pub phi: f64,
}

impl SpatialAngles {
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        let ok = |a: f64| (0.0..=PI).contains(&a);
        if !ok(theta) || !ok(phi) {
            return Err(Error::InvalidConfiguration(format!(
                "angles must lie in [0, pi]: theta={theta}, phi={phi}"
            )));
        }
        Ok(Self { theta, phi })
    }

    pub fn from_degrees(theta_deg: f64, phi_deg: f64) -> Result<Self> {
        Self::new(theta_deg.to_radians(), phi_deg.to_radians())
    }
}

/// Normalized 2D wavevector `(alpha, beta)` in `[-1, 1]^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wavevector {
    pub alpha: f64,
    pub beta: f64,
}

impl Wavevector {
    pub fn new(alpha: f64, beta: f64) -> Self {
        Self { alpha, beta }
    }

    /// `alpha = sin(theta) cos(phi)`, `beta = cos(theta)`.
    pub fn from_angles(angles: SpatialAngles) -> Self {
        Self {
            alpha: angles.theta.sin() * angles.phi.cos(),
            beta: angles.theta.cos(),
        }
    }
}

pub fn wavevector_from_angles(angles: SpatialAngles) -> Wavevector {
    Wavevector::from_angles(angles)
}

/// Field-response vector: entry `k` is `exp(j 2pi/lambda (x_k alpha + y_k beta))`.
pub fn field_response(layout: &ArrayLayout, wv: Wavevector, wavelength: f64) -> DVector<Complex64> {
    let k = 2.0 * PI / wavelength;
    DVector::from_iterator(
        layout.len(),
        layout
            .positions
            .iter()
            .map(|p| Complex64::from_polar(1.0, k * (p.x * wv.alpha + p.y * wv.beta))),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GainKind {
    SensingRoundTrip,
    CommLegit,
    CommEve,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathGain {
    pub value: Complex64,
    pub kind: GainKind,
}

impl PathGain {
    pub fn magnitude(&self) -> f64 {
        self.value.norm()
    }
}

/// Free-space gains: radar round trip for sensing, one-way for the links.
pub fn path_gain(kind: GainKind, constants: &SceneConstants) -> PathGain {
    let lambda = constants.wavelength;
    let value = match kind {
        GainKind::SensingRoundTrip => {
            let d = constants.dist_be;
            let mag = (lambda * lambda * constants.rcs / (64.0 * PI.powi(3) * d.powi(4))).sqrt();
            Complex64::from_polar(mag, 4.0 * PI * d / lambda)
        }
        GainKind::CommLegit => one_way_gain(lambda, constants.dist_bc),
        GainKind::CommEve => one_way_gain(lambda, constants.dist_be),
    };
    PathGain { value, kind }
}

fn one_way_gain(lambda: f64, d: f64) -> Complex64 {
    Complex64::from_polar(lambda / (4.0 * PI * d), 2.0 * PI * d / lambda)
}

/// Round-trip echo channel `zeta_s f(r) g(t)^H`, shape `M x N`.
pub fn echo_channel(
    tx: &ArrayLayout,
    rx: &ArrayLayout,
    wv: Wavevector,
    zeta_s: PathGain,
    wavelength: f64,
) -> DMatrix<Complex64> {
    let g = field_response(tx, wv, wavelength);
    let f = field_response(rx, wv, wavelength);
    (f * g.adjoint()) * zeta_s.value
}

/// Downlink channel `zeta g(t, rho)`.
pub fn comm_channel(
    tx: &ArrayLayout,
    wv: Wavevector,
    zeta: PathGain,
    wavelength: f64,
) -> DVector<Complex64> {
    field_response(tx, wv, wavelength) * zeta.value
}
