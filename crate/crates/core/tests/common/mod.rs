#![allow(dead_code)]

use lattice_defects::cloak::ring_sites;
use lattice_defects::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// omega = -i, so omega^2 = -1.
pub fn w_imag() -> Complex64 {
    c(0.0, -1.0)
}

pub fn square(radius: i64) -> Vec<Site> {
    (-radius..=radius)
        .flat_map(|x| (-radius..=radius).map(move |y| Site::new([x, y])))
        .collect()
}

pub fn scene2d(omegas: &[Complex64], defect_sites: Vec<Site>, receivers: Vec<Site>) -> Scene {
    let sources = (0..omegas.len())
        .flat_map(|j| {
            [
                Source {
                    freq: j,
                    site: Site::new([-5, 1]),
                    amplitude: c(1.0, 0.0),
                },
                Source {
                    freq: j,
                    site: Site::new([4, -5]),
                    amplitude: c(0.5, 0.3),
                },
            ]
        })
        .collect();
    Scene {
        dimension: 2,
        background_slowness: 1.0,
        frequencies: omegas.iter().map(|&w| FrequencySpec::new(w)).collect(),
        sources,
        defect_sites,
        receivers,
        measurements: None,
        defects: None,
    }
}

pub fn model(scene: Scene) -> Model {
    Model::new(scene, GreenConfig::default()).unwrap()
}

pub fn dense_omegas() -> Vec<Complex64> {
    vec![c(0.0, -1.0), c(0.0, -1.5), c(3.0, -0.4), c(2.5, -0.5)]
}

/// 3x3 footprint inside a ring of 24 receivers.
pub fn dense_scene(m: usize) -> Scene {
    scene2d(
        &dense_omegas()[..m],
        square(1),
        ring_sites(&Site::new([0, 0]), 3),
    )
}

pub fn dense_truth() -> DefectVector {
    DefectVector::from_slice(&[
        c(0.3, 0.0),
        c(0.8, 0.0),
        c(0.1, 0.0),
        c(0.5, 0.0),
        c(1.2, 0.0),
        c(0.0, 0.0),
        c(0.4, 0.0),
        c(0.9, 0.0),
        c(0.6, 0.0),
    ])
}

/// Three isolated defects; receiver matrices have trivial kernels.
pub fn sparse_scene() -> Scene {
    scene2d(
        &[c(0.0, -1.0), c(3.0, -0.4)],
        vec![Site::new([-1, -1]), Site::new([1, 0]), Site::new([0, 1])],
        ring_sites(&Site::new([0, 0]), 3),
    )
}

pub fn sparse_truth() -> DefectVector {
    DefectVector::from_slice(&[c(0.7, 0.0), c(-0.2, 0.1), c(1.1, 0.0)])
}

pub fn cloak_scene(m: usize) -> Scene {
    let omegas = [c(0.0, -1.0), c(3.0, -0.4)];
    Scene {
        dimension: 2,
        background_slowness: 1.0,
        frequencies: omegas[..m].iter().map(|&w| FrequencySpec::new(w)).collect(),
        sources: (0..m)
            .map(|j| Source {
                freq: j,
                site: Site::new([-4, 0]),
                amplitude: c(1.0, 0.0),
            })
            .collect(),
        defect_sites: square(1),
        receivers: ring_sites(&Site::new([0, 0]), 3),
        measurements: None,
        defects: None,
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_complex(rng: &mut ChaCha8Rng, scale: f64) -> Complex64 {
    c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * scale
}

/// 1D lattice Green function `r^|n| / q` with `q^2 = c^2 - 4` and `|r| < 1`.
pub fn green_1d_closed_form(shift: Complex64, n: i64) -> Complex64 {
    let mut q = (shift * shift - 4.0).sqrt();
    if ((shift - q) / 2.0).norm() >= 1.0 {
        q = -q;
    }
    let r = (shift - q) / 2.0;
    r.powi(n.unsigned_abs() as i32) / q
}

pub fn rel_err(a: &CVec, b: &CVec) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}
