//! Shared fixtures for the pipeline benchmarks.

use ma_isac::beamforming::region_grid;
use ma_isac::geometry::echo_channel;
use ma_isac::rng::rng_from_seed;
use ma_isac::sensing::{probe_dft, synthesize_echo, uncertainty_region, EchoObservation, ProbeMatrix};
use ma_isac::sensing_opt::{random_layout, INIT_ATTEMPTS};
use ma_isac::{ArrayLayout, CrbPair, Scene, UncertaintyRegion, Wavevector};

pub struct Fixture {
    pub scene: Scene,
    pub tx: ArrayLayout,
    pub rx: ArrayLayout,
    pub probe: ProbeMatrix,
    pub echo: EchoObservation,
    pub region: UncertaintyRegion,
    pub hull_points: Vec<Wavevector>,
}

/// Default scene with a fixed random 16 + 16 layout and one noisy echo.
pub fn fixture() -> Fixture {
    let scene = Scene::default();
    let k = &scene.constants;
    let mut rng = rng_from_seed(11);
    let tx = random_layout(&mut rng, scene.num_tx, scene.region_side, scene.min_spacing, INIT_ATTEMPTS)
        .expect("default region fits the array");
    let rx = random_layout(&mut rng, scene.num_rx, scene.region_side, scene.min_spacing, INIT_ATTEMPTS)
        .expect("default region fits the array");
    let probe = probe_dft(scene.num_tx, k.snapshots, k.sensing_power).expect("valid probe");
    let ch = echo_channel(&tx, &rx, scene.eve, k.zeta_s(), k.wavelength);
    let echo = synthesize_echo(&ch, &probe, k.noise_sensing, 5);
    let region = uncertainty_region(
        scene.eve,
        CrbPair {
            crb_alpha: 1e-5,
            crb_beta: 1e-5,
        },
        3.0,
    );
    let hull_points = region_grid(&region, (5, 5));
    Fixture {
        scene,
        tx,
        rx,
        probe,
        echo,
        region,
        hull_points,
    }
}
