//! Interaction matrices, admissibility, and the forward problem.
//!
//! For frequency `j` the defect-site field `w` solves
//! `(I - omega^2 A S) w = sum_m F_m a_m`, and the field at any site `p` is
//! `omega^2 sum_l a_{n_l - p} s_l w_l + sum_m F_m a_{m - p}`.

mod banded;
pub mod oracle;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::brillouin::{GreenConfig, GreenTable, Site};
use crate::error::{Error, Result};
use crate::linalg::{singular_value_ratio, CMat, CVec};
use crate::scene::{validate_scene, DefectVector, Measurement, Scene};

pub use oracle::{brute_force_oracle, OracleField};

pub const DEFAULT_ADMISSIBILITY_TOL: f64 = 1e-10;

/// Green-coefficient matrices for one frequency.
#[derive(Debug, Clone)]
pub struct FrequencySystem {
    pub omega: Complex64,
    /// `(A)_{pq} = a_{n_q - n_p}`, N x N, complex symmetric.
    pub interaction: CMat,
    /// `(C)_{pq} = a_{n_q - r_p}`, R x N.
    pub receiver: CMat,
    /// Column `m` holds `a_{m - n_p}` for the m-th source of this frequency.
    pub defect_sources: CMat,
    /// Column `m` holds `a_{m - r_p}`.
    pub receiver_sources: CMat,
    pub amplitudes: CVec,
}

impl FrequencySystem {
    pub fn omega_sq(&self) -> Complex64 {
        self.omega * self.omega
    }

    /// Unperturbed field at the defect sites, `sum_m F_m a_m`.
    pub fn incident_at_defects(&self) -> CVec {
        &self.defect_sources * &self.amplitudes
    }

    /// Unperturbed field at the receivers, `sum_m F_m c_m`.
    pub fn incident_at_receivers(&self) -> CVec {
        &self.receiver_sources * &self.amplitudes
    }

    pub fn num_defects(&self) -> usize {
        self.interaction.nrows()
    }
}

pub fn assemble_system(table: &GreenTable, scene: &Scene, freq: usize) -> Result<FrequencySystem> {
    let sources: Vec<_> = scene.sources_for(freq).collect();
    let source_sites: Vec<Site> = sources.iter().map(|s| s.site.clone()).collect();
    let amplitudes = CVec::from_iterator(sources.len(), sources.iter().map(|s| s.amplitude));
    Ok(FrequencySystem {
        omega: scene.frequencies[freq].effective(),
        interaction: table.block(freq, &scene.defect_sites, &scene.defect_sites)?,
        receiver: table.block(freq, &scene.receivers, &scene.defect_sites)?,
        defect_sources: table.block(freq, &scene.defect_sites, &source_sites)?,
        receiver_sources: table.block(freq, &scene.receivers, &source_sites)?,
        amplitudes,
    })
}

/// `G = I - omega^2 A diag(s)`.
pub fn gram_matrix(sys: &FrequencySystem, defects: &DefectVector) -> CMat {
    let n = sys.num_defects();
    let w2 = sys.omega_sq();
    let mut g = CMat::identity(n, n);
    for q in 0..n {
        let sq = defects.0[q];
        for p in 0..n {
            g[(p, q)] -= w2 * sys.interaction[(p, q)] * sq;
        }
    }
    g
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Admissibility {
    pub admissible: bool,
    /// `sigma_min / sigma_max` of `G`.
    pub sv_ratio: f64,
}

pub fn admissibility(sys: &FrequencySystem, defects: &DefectVector, tol: f64) -> Admissibility {
    let ratio = singular_value_ratio(&gram_matrix(sys, defects));
    Admissibility {
        admissible: ratio > tol,
        sv_ratio: ratio,
    }
}

pub fn is_admissible(
    systems: &[FrequencySystem],
    defects: &DefectVector,
    tol: f64,
) -> Vec<Admissibility> {
    systems
        .iter()
        .map(|s| admissibility(s, defects, tol))
        .collect()
}

/// Per-frequency amplitudes from a forward solve.
#[derive(Debug, Clone)]
pub struct FrequencyField {
    pub omega: Complex64,
    pub sv_ratio: f64,
    /// Field at the defect sites.
    pub interior: CVec,
    /// Field at the requested query sites.
    pub amplitudes: CVec,
}

#[derive(Debug, Clone)]
pub struct ForwardSolution {
    pub query_sites: Vec<Site>,
    pub fields: Vec<FrequencyField>,
}

/// A scene together with its Green table and assembled per-frequency systems.
#[derive(Debug)]
pub struct Model {
    scene: Scene,
    table: GreenTable,
    systems: Vec<FrequencySystem>,
    pub adm_tol: f64,
}

impl Model {
    pub fn new(scene: Scene, config: GreenConfig) -> Result<Self> {
        let violations = validate_scene(&scene);
        if !violations.is_empty() {
            return Err(Error::Validation(violations));
        }
        let table = GreenTable::new(
            scene.dimension,
            scene.background_slowness,
            &scene.frequencies,
            config,
        )?;
        Self::with_table(scene, table)
    }

    pub fn with_table(scene: Scene, table: GreenTable) -> Result<Self> {
        if table.dim() != scene.dimension || table.frequencies().len() != scene.num_frequencies() {
            return Err(Error::Dimension("Green table does not match scene".into()));
        }
        let systems = (0..scene.num_frequencies())
            .into_par_iter()
            .map(|j| assemble_system(&table, &scene, j))
            .collect::<Result<Vec<_>>>()?;
        Ok(Model {
            scene,
            table,
            systems,
            adm_tol: DEFAULT_ADMISSIBILITY_TOL,
        })
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn table(&self) -> &GreenTable {
        &self.table
    }

    pub fn systems(&self) -> &[FrequencySystem] {
        &self.systems
    }

    pub fn system(&self, freq: usize) -> &FrequencySystem {
        &self.systems[freq]
    }

    fn check_defects(&self, defects: &DefectVector) -> Result<()> {
        if defects.len() != self.scene.num_defects() {
            return Err(Error::Dimension(format!(
                "defect vector has {} entries, scene has {} defect sites",
                defects.len(),
                self.scene.num_defects()
            )));
        }
        Ok(())
    }

    /// Field at the defect sites, `w = G^{-1} sum_m F_m a_m`.
    pub fn interior_field(&self, freq: usize, defects: &DefectVector) -> Result<(CVec, f64)> {
        self.check_defects(defects)?;
        let sys = &self.systems[freq];
        let g = gram_matrix(sys, defects);
        let ratio = singular_value_ratio(&g);
        if ratio.is_nan() || ratio <= self.adm_tol {
            return Err(Error::NotAdmissible {
                freq: freq + 1,
                ratio,
            });
        }
        let rhs = sys.incident_at_defects();
        let w = if g.is_empty() {
            rhs
        } else {
            g.lu().solve(&rhs).ok_or(Error::NotAdmissible {
                freq: freq + 1,
                ratio,
            })?
        };
        Ok((w, ratio))
    }

    /// Model prediction of the receiver amplitudes for every frequency.
    pub fn predict_receivers(&self, defects: &DefectVector) -> Result<Measurement> {
        let per_freq = (0..self.systems.len())
            .into_par_iter()
            .map(|j| {
                let sys = &self.systems[j];
                let (w, _) = self.interior_field(j, defects)?;
                let hidden = scaled(&w, defects, sys.omega_sq());
                Ok(&sys.receiver * hidden + sys.incident_at_receivers())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Measurement(per_freq))
    }

    pub fn solve_forward(
        &self,
        defects: &DefectVector,
        query_sites: &[Site],
    ) -> Result<ForwardSolution> {
        self.check_defects(defects)?;
        for q in query_sites {
            if q.dim() != self.scene.dimension {
                return Err(Error::Dimension(format!(
                    "query site {q} has wrong dimension"
                )));
            }
        }
        let scene = &self.scene;
        let fields = (0..self.systems.len())
            .into_par_iter()
            .map(|j| {
                let sys = &self.systems[j];
                let (w, sv_ratio) = self.interior_field(j, defects)?;
                let hidden = scaled(&w, defects, sys.omega_sq());
                let to_query = self.table.block(j, query_sites, &scene.defect_sites)?;
                let sources: Vec<Site> = scene.sources_for(j).map(|s| s.site.clone()).collect();
                let incident = self.table.block(j, query_sites, &sources)? * &sys.amplitudes;
                Ok(FrequencyField {
                    omega: sys.omega,
                    sv_ratio,
                    interior: w,
                    amplitudes: to_query * hidden + incident,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ForwardSolution {
            query_sites: query_sites.to_vec(),
            fields,
        })
    }
}

/// `omega^2 S w`, the hidden quantity entering the data equation.
pub fn scaled(w: &CVec, defects: &DefectVector, omega_sq: Complex64) -> CVec {
    w.component_mul(&defects.0) * omega_sq
}
