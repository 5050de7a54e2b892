//! Direct solve of the time-harmonic lattice equation on a finite box.
//!
//! On `[-radius, radius]^d` with zero exterior values this solves
//! `(2d - omega^2 S_n^2) U_n - sum_{n'~n} U_n' = F_n`, where
//! `S_n^2 = s^2 + s_n^2` on defect sites. It shares nothing with the Green
//! table path and is used to check it.

use num_complex::Complex64;
use rayon::prelude::*;

use super::banded::BandedSystem;
use crate::brillouin::Site;
use crate::error::{Error, Result};
use crate::linalg::CVec;
use crate::scene::{DefectVector, Scene};

/// Field values on the box, lexicographic with the last axis fastest.
#[derive(Debug, Clone)]
pub struct OracleField {
    pub dim: usize,
    pub radius: i64,
    pub values: Vec<CVec>,
}

impl OracleField {
    pub fn width(&self) -> usize {
        (2 * self.radius + 1) as usize
    }

    pub fn index(&self, site: &Site) -> Option<usize> {
        box_index(site, self.radius)
    }

    pub fn value(&self, freq: usize, site: &Site) -> Option<Complex64> {
        self.index(site).map(|i| self.values[freq][i])
    }

    /// Sites of the box in storage order.
    pub fn sites(&self) -> impl Iterator<Item = Site> + '_ {
        let w = self.width();
        let total = w.pow(self.dim as u32);
        (0..total).map(move |flat| {
            let mut rem = flat;
            let mut coords = vec![0i64; self.dim];
            for axis in (0..self.dim).rev() {
                coords[axis] = (rem % w) as i64 - self.radius;
                rem /= w;
            }
            Site(coords)
        })
    }
}

fn box_index(site: &Site, radius: i64) -> Option<usize> {
    let w = 2 * radius + 1;
    let mut idx = 0i64;
    for &c in &site.0 {
        if c.abs() > radius {
            return None;
        }
        idx = idx * w + (c + radius);
    }
    Some(idx as usize)
}

pub fn brute_force_oracle(
    scene: &Scene,
    defects: &DefectVector,
    radius: i64,
) -> Result<OracleField> {
    let d = scene.dimension;
    if defects.len() != scene.num_defects() {
        return Err(Error::Dimension(
            "defect vector length differs from defect_sites".into(),
        ));
    }
    if scene.max_coordinate() >= radius {
        return Err(Error::Dimension(format!(
            "oracle radius {radius} does not enclose all sites (max coordinate {})",
            scene.max_coordinate()
        )));
    }
    let w = (2 * radius + 1) as usize;
    let n = w.pow(d as u32);
    let band = w.pow(d as u32 - 1);
    let s2 = scene.background_slowness * scene.background_slowness;

    let values = (0..scene.num_frequencies())
        .into_par_iter()
        .map(|j| {
            let omega_eff = scene.frequencies[j].effective();
            let w2 = omega_eff * omega_eff;
            let mut sys = BandedSystem::new(n, band, band);
            let diag = Complex64::new(2.0 * d as f64, 0.0) - w2 * s2;
            let strides: Vec<usize> = (0..d).map(|axis| w.pow((d - 1 - axis) as u32)).collect();
            let field = OracleField {
                dim: d,
                radius,
                values: vec![],
            };
            for (i, site) in field.sites().enumerate() {
                sys.add(i, i, diag);
                for (axis, &stride) in strides.iter().enumerate() {
                    if site.0[axis] > -radius {
                        sys.add(i, i - stride, Complex64::new(-1.0, 0.0));
                    }
                    if site.0[axis] < radius {
                        sys.add(i, i + stride, Complex64::new(-1.0, 0.0));
                    }
                }
            }
            for (site, s) in scene.defect_sites.iter().zip(defects.0.iter()) {
                let i = box_index(site, radius).expect("checked above");
                sys.add(i, i, -w2 * s);
            }
            let mut rhs = vec![Complex64::new(0.0, 0.0); n];
            for src in scene.sources_for(j) {
                rhs[box_index(&src.site, radius).expect("checked above")] += src.amplitude;
            }
            for (i, v) in rhs.into_iter().enumerate() {
                sys.set_rhs(i, v);
            }
            sys.solve(1e-13)
                .map(CVec::from_vec)
                .ok_or(Error::SingularTruncation { freq: j + 1 })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(OracleField {
        dim: d,
        radius,
        values,
    })
}

/// Largest relative change at the receivers between `radius` and `2 * radius`.
pub fn doubling_change(scene: &Scene, defects: &DefectVector, radius: i64) -> Result<f64> {
    let coarse = brute_force_oracle(scene, defects, radius)?;
    let fine = brute_force_oracle(scene, defects, 2 * radius)?;
    let mut worst: f64 = 0.0;
    for j in 0..scene.num_frequencies() {
        let a = CVec::from_iterator(
            scene.num_receivers(),
            scene.receivers.iter().map(|r| coarse.value(j, r).unwrap()),
        );
        let b = CVec::from_iterator(
            scene.num_receivers(),
            scene.receivers.iter().map(|r| fine.value(j, r).unwrap()),
        );
        let scale = b.norm().max(f64::MIN_POSITIVE);
        worst = worst.max((a - &b).norm() / scale);
    }
    Ok(worst)
}
