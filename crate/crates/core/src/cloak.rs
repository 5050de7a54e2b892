//! Synthesis of defects that are invisible at the receivers.
//!
//! Taking the unperturbed field as the measurement makes the right-hand
//! side of the data equation zero, so `x_j = 0` and the invisible defects
//! at frequency `j` are `s(t) = omega^{-2} K t / (A K t + f)` for `t` in the
//! kernel coordinates of `C_j`.

use serde_json::Value;

use crate::brillouin::Site;
use crate::doc;
use crate::error::{Error, Result};
use crate::forward::{admissibility, Admissibility, Model};
use crate::inverse::{
    self, coordinate_scale, intersect::intersect_with, manifold_point, random_coords,
    solve_data_equation, DataEquation, InverseOptions, ManifoldPoint,
};
use crate::linalg::CVec;
use crate::scene::{DefectVector, Measurement};

pub const DEFAULT_CLOAK_TOL: f64 = 1e-8;

/// Parametrization of the invisible defects of one frequency.
#[derive(Debug, Clone)]
pub struct InvisibleManifold {
    pub freq: usize,
    pub equation: DataEquation,
}

impl InvisibleManifold {
    pub fn kernel_dim(&self) -> usize {
        self.equation.kernel_dim()
    }
}

pub fn invisible_manifold(model: &Model, freq: usize, opts: &InverseOptions) -> InvisibleManifold {
    let sys = model.system(freq);
    let zero = CVec::zeros(sys.receiver.nrows());
    InvisibleManifold {
        freq,
        equation: solve_data_equation(&sys.receiver, &zero, opts.rank_tol, opts.cons_tol),
    }
}

pub fn invisible_point(
    model: &Model,
    manifold: &InvisibleManifold,
    coords: &CVec,
    opts: &InverseOptions,
) -> Result<ManifoldPoint> {
    manifold_point(
        model.system(manifold.freq),
        &manifold.equation,
        coords,
        opts,
    )
}

/// Optional acceptance constraints applied to drawn designs.
#[derive(Debug, Clone, Copy, Default)]
pub struct CloakConstraint {
    /// Require real perturbations (within `im_tol`); random draws then use real coordinates.
    pub real: bool,
    /// Require every perturbation in `[0, bound]`.
    pub bound: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct CloakRequest {
    /// Explicit kernel coordinates for the single-frequency case.
    pub coords: Option<CVec>,
    pub constraint: CloakConstraint,
    pub max_draws: usize,
    pub cloak_tol: f64,
}

impl Default for CloakRequest {
    fn default() -> Self {
        CloakRequest {
            coords: None,
            constraint: CloakConstraint::default(),
            max_draws: 200,
            cloak_tol: DEFAULT_CLOAK_TOL,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CloakDesign {
    pub defects: DefectVector,
    pub coords: Option<CVec>,
    /// `||u_j(design) - u_j(unperturbed)||` per frequency.
    pub receiver_deviation: Vec<f64>,
    /// Max over defect sites and frequencies of `|U(design) - U(unperturbed)|`.
    pub interior_deviation: f64,
    pub admissibility: Vec<Admissibility>,
    pub ring_radius: Option<i64>,
    pub seed: u64,
}

/// Sites at Chebyshev distance `radius` from `center`.
pub fn ring_sites(center: &Site, radius: i64) -> Vec<Site> {
    let d = center.dim();
    let w = (2 * radius + 1) as usize;
    let mut out = Vec::new();
    for flat in 0..w.pow(d as u32) {
        let mut rem = flat;
        let mut off = vec![0i64; d];
        for axis in (0..d).rev() {
            off[axis] = (rem % w) as i64 - radius;
            rem /= w;
        }
        let site = Site(off);
        if site.max_abs() == radius {
            out.push(Site(
                site.0.iter().zip(&center.0).map(|(a, b)| a + b).collect(),
            ));
        }
    }
    out
}

fn ring_radius(model: &Model) -> Option<i64> {
    let r = &model.scene().receivers;
    let first = r.first()?.max_abs();
    r.iter().all(|s| s.max_abs() == first).then_some(first)
}

pub fn unperturbed_measurement(model: &Model) -> Measurement {
    Measurement(
        model
            .systems()
            .iter()
            .map(|s| s.incident_at_receivers())
            .collect(),
    )
}

/// Forward-verify a design and fill in its diagnostics.
pub fn verify_design(
    model: &Model,
    defects: DefectVector,
    coords: Option<CVec>,
    seed: u64,
) -> Result<CloakDesign> {
    let adm: Vec<Admissibility> = model
        .systems()
        .iter()
        .map(|s| admissibility(s, &defects, model.adm_tol))
        .collect();
    if let Some(j) = adm.iter().position(|a| !a.admissible) {
        return Err(Error::NotAdmissible {
            freq: j + 1,
            ratio: adm[j].sv_ratio,
        });
    }
    let pred = model.predict_receivers(&defects)?;
    let receiver_deviation = model
        .systems()
        .iter()
        .zip(&pred.0)
        .map(|(s, u)| (u - s.incident_at_receivers()).norm())
        .collect();
    let mut interior: f64 = 0.0;
    for (j, sys) in model.systems().iter().enumerate() {
        let (w, _) = model.interior_field(j, &defects)?;
        let diff = w - sys.incident_at_defects();
        interior = interior.max(diff.iter().map(|z| z.norm()).fold(0.0, f64::max));
    }
    Ok(CloakDesign {
        defects,
        coords,
        receiver_deviation,
        interior_deviation: interior,
        admissibility: adm,
        ring_radius: ring_radius(model),
        seed,
    })
}

fn acceptable(design: &CloakDesign, req: &CloakRequest, im_tol: f64) -> bool {
    let invisible = design.receiver_deviation.iter().all(|&d| d < req.cloak_tol);
    let real_ok = !req.constraint.real || design.defects.0.iter().all(|z| z.im.abs() <= im_tol);
    let box_ok = req
        .constraint
        .bound
        .is_none_or(|b| inverse::in_box(&design.defects, b, im_tol));
    invisible && real_ok && box_ok
}

pub fn design_cloak(
    model: &Model,
    req: &CloakRequest,
    opts: &InverseOptions,
) -> Result<CloakDesign> {
    let m = model.scene().num_frequencies();
    if m > 1 {
        let meas = unperturbed_measurement(model);
        let result = intersect_with(model, &meas, opts, true)?;
        for cand in result.candidates {
            let design = verify_design(model, cand.defects, None, opts.seed)?;
            if acceptable(&design, req, opts.im_tol) {
                return Ok(design);
            }
        }
        return Err(Error::NoCandidate(
            "no nonzero invisible defect satisfies the constraints".into(),
        ));
    }

    let manifold = invisible_manifold(model, 0, opts);
    if let Some(t) = &req.coords {
        let p = invisible_point(model, &manifold, t, opts)?;
        return verify_design(model, p.defects, Some(t.clone()), opts.seed);
    }
    if manifold.kernel_dim() == 0 {
        return verify_design(
            model,
            DefectVector::zeros(model.scene().num_defects()),
            Some(CVec::zeros(0)),
            opts.seed,
        );
    }

    let scale = coordinate_scale(model.system(0), &manifold.equation) * opts.sample_scale;
    let mut rng = inverse::rng(opts.seed);
    let mut last_err = None;
    for _ in 0..req.max_draws {
        let t = random_coords(&mut rng, manifold.kernel_dim(), scale, req.constraint.real);
        let p = match invisible_point(model, &manifold, &t, opts) {
            Ok(p) => p,
            Err(e) => {
                last_err = Some(e);
                continue;
            }
        };
        match verify_design(model, p.defects, Some(t), opts.seed) {
            Ok(d) if acceptable(&d, req, opts.im_tol) => return Ok(d),
            Ok(_) => {}
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.unwrap_or_else(|| {
        Error::NoCandidate(format!("no draw in {} met the constraints", req.max_draws))
    }))
}

pub fn cloak_report(design: &CloakDesign) -> Value {
    doc::object(vec![
        ("status", Value::from("DESIGNED")),
        ("seed", Value::from(design.seed)),
        (
            "ring_radius",
            design.ring_radius.map(Value::from).unwrap_or(Value::Null),
        ),
        ("defects", doc::complex_list(design.defects.0.iter())),
        (
            "kernel_coordinates",
            design
                .coords
                .as_ref()
                .map(|t| doc::complex_list(t.iter()))
                .unwrap_or(Value::Null),
        ),
        (
            "receiver_deviation",
            Value::Array(
                design
                    .receiver_deviation
                    .iter()
                    .map(|d| doc::sci(*d))
                    .collect(),
            ),
        ),
        ("interior_deviation", doc::sci(design.interior_deviation)),
        (
            "admissibility_ratio",
            Value::Array(
                design
                    .admissibility
                    .iter()
                    .map(|a| doc::sci(a.sv_ratio))
                    .collect(),
            ),
        ),
    ])
}
