//! Scene builders shared by the benchmarks.

use lattice_defects::cloak::ring_sites;
use lattice_defects::{Complex64, FrequencySpec, Scene, Site, Source};

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Square footprint of half-width `radius`, one source per frequency, ring receivers.
pub fn footprint_scene(radius: i64, omegas: &[Complex64]) -> Scene {
    let defect_sites = (-radius..=radius)
        .flat_map(|x| (-radius..=radius).map(move |y| Site::new([x, y])))
        .collect();
    Scene {
        dimension: 2,
        background_slowness: 1.0,
        frequencies: omegas.iter().map(|&w| FrequencySpec::new(w)).collect(),
        sources: (0..omegas.len())
            .map(|j| Source {
                freq: j,
                site: Site::new([-radius - 4, 1]),
                amplitude: c(1.0, 0.0),
            })
            .collect(),
        defect_sites,
        receivers: ring_sites(&Site::new([0, 0]), radius + 2),
        measurements: None,
        defects: None,
    }
}
