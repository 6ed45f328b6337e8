//! Physical constants of a scenario and the default simulation scene.

use crate::error::{Error, Result};
use crate::geometry::{
    comm_channel, path_gain, ArrayLayout, GainKind, PathGain, SpatialAngles, Wavevector,
};
use nalgebra::DVector;
use num_complex::Complex64;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn dbsm_to_m2(dbsm: f64) -> f64 {
    10f64.powf(dbsm / 10.0)
}

/// Link-budget constants shared by the sensing and communication stages.
///
/// All powers are in watts, variances in watts per complex sample, distances
/// in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneConstants {
    pub wavelength: f64,
    pub sensing_power: f64,
    pub comm_power_max: f64,
    pub noise_sensing: f64,
    pub noise_comm: f64,
    pub noise_eve: f64,
    pub snapshots: usize,
    pub rcs: f64,
    pub dist_bc: f64,
    pub dist_be: f64,
    pub crb_threshold: f64,
}

impl Default for SceneConstants {
    fn default() -> Self {
        Self {
            wavelength: 0.05,
            sensing_power: dbm_to_watts(30.0),
            comm_power_max: dbm_to_watts(20.0),
            noise_sensing: dbm_to_watts(-90.0),
            noise_comm: dbm_to_watts(-90.0),
            noise_eve: dbm_to_watts(-90.0),
            snapshots: 16,
            rcs: dbsm_to_m2(10.0),
            dist_bc: 70.0,
            dist_be: 70.0,
            crb_threshold: 0.001,
        }
    }
}

impl SceneConstants {
    pub fn validate(&self, num_tx: usize) -> Result<()> {
        let positive = [
            ("wavelength", self.wavelength),
            ("sensing_power", self.sensing_power),
            ("comm_power_max", self.comm_power_max),
            ("noise_sensing", self.noise_sensing),
            ("noise_comm", self.noise_comm),
            ("noise_eve", self.noise_eve),
            ("rcs", self.rcs),
            ("dist_bc", self.dist_bc),
            ("dist_be", self.dist_be),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfiguration(format!("{name} must be > 0, got {v}")));
            }
        }
        if self.snapshots < num_tx {
            return Err(Error::InvalidConfiguration(format!(
                "snapshots T={} must be >= N={num_tx}",
                self.snapshots
            )));
        }
        Ok(())
    }

    pub fn zeta_s(&self) -> PathGain {
        path_gain(GainKind::SensingRoundTrip, self)
    }

    pub fn zeta_c(&self) -> PathGain {
        path_gain(GainKind::CommLegit, self)
    }

    pub fn zeta_e(&self) -> PathGain {
        path_gain(GainKind::CommEve, self)
    }

    /// `G = lambda^2 sigma_s^2 / (8 M P_s T pi^2 |zeta_s|^2)`.
    pub fn crb_scale(&self, num_rx: usize) -> f64 {
        let zs = self.zeta_s().magnitude();
        self.wavelength.powi(2) * self.noise_sensing
            / (8.0
                * num_rx as f64
                * self.sensing_power
                * self.snapshots as f64
                * std::f64::consts::PI.powi(2)
                * zs
                * zs)
    }
}

/// A full scenario: constants, array sizes, region geometry and the two
/// user directions.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub constants: SceneConstants,
    pub num_tx: usize,
    pub num_rx: usize,
    pub region_side: f64,
    pub min_spacing: f64,
    pub legit: Wavevector,
    pub eve: Wavevector,
}

impl Default for Scene {
    fn default() -> Self {
        let constants = SceneConstants::default();
        let lambda = constants.wavelength;
        Self {
            constants,
            num_tx: 16,
            num_rx: 16,
            region_side: 5.0 * lambda,
            min_spacing: lambda / 2.0,
            legit: Wavevector::from_angles(
                SpatialAngles::from_degrees(120.0, 90.0).expect("valid angles"),
            ),
            eve: Wavevector::from_angles(
                SpatialAngles::from_degrees(120.0, 120.0).expect("valid angles"),
            ),
        }
    }
}

impl Scene {
    pub fn validate(&self) -> Result<()> {
        self.constants.validate(self.num_tx)?;
        if self.num_tx == 0 || self.num_rx == 0 {
            return Err(Error::InvalidConfiguration("array sizes must be >= 1".into()));
        }
        if !(self.region_side > 0.0) || self.min_spacing < 0.0 {
            return Err(Error::InvalidConfiguration("bad region geometry".into()));
        }
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        self.constants.wavelength
    }

    pub fn legit_channel(&self, tx: &ArrayLayout) -> DVector<Complex64> {
        comm_channel(tx, self.legit, self.constants.zeta_c(), self.wavelength())
    }

    pub fn eve_channel(&self, tx: &ArrayLayout, wv: Wavevector) -> DVector<Complex64> {
        comm_channel(tx, wv, self.constants.zeta_e(), self.wavelength())
    }

    pub fn empty_layout(&self, coords: (&[f64], &[f64])) -> ArrayLayout {
        ArrayLayout::from_coords(coords.0, coords.1, self.region_side, self.min_spacing)
    }
}
