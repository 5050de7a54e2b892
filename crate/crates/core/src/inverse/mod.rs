//! Characterization of every defect configuration consistent with the
//! receiver amplitudes.
//!
//! For each frequency the data equation `C x = u - sum_m F_m c_m` is solved
//! in the minimum-norm sense. Each consistent defect has the form
//! `s = omega^{-2} (y + x) / (A (y + x) + sum_m F_m a_m)` (componentwise)
//! for some `y` in the kernel of `C`; conversely every such admissible `s`
//! reproduces the data. Multi-frequency candidates are found by
//! intersecting these solution sets numerically.

pub(crate) mod intersect;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use crate::doc;
use crate::error::{Error, Result};
use crate::forward::{FrequencySystem, Model};
use crate::linalg::{lstsq, CMat, CVec, FullSvd};
use crate::scene::{DefectVector, Measurement};

pub use intersect::intersect_manifolds;

#[derive(Debug, Clone, Copy)]
pub struct InverseOptions {
    /// Singular values below `rank_tol * sigma_max` are treated as zero.
    pub rank_tol: f64,
    /// Data equation consistent when `||C x - b|| <= cons_tol (||b|| + 1)`.
    pub cons_tol: f64,
    /// Candidates must reproduce the measurements to this relative error.
    pub ver_tol: f64,
    /// Denominators below `den_tol * scale` count as zero.
    pub den_tol: f64,
    /// Value written into FREE components.
    pub free_default: Complex64,
    /// Imaginary-part tolerance of the box prior.
    pub im_tol: f64,
    pub max_iter: usize,
    pub step_tol: f64,
    pub starts: usize,
    pub cluster_tol: f64,
    /// Random kernel coordinates are drawn with this magnitude relative to the natural scale.
    pub sample_scale: f64,
    pub seed: u64,
}

impl Default for InverseOptions {
    fn default() -> Self {
        InverseOptions {
            rank_tol: 1e-10,
            cons_tol: 1e-8,
            ver_tol: 1e-6,
            den_tol: 1e-12,
            free_default: Complex64::new(0.0, 0.0),
            im_tol: 1e-9,
            max_iter: 200,
            step_tol: 1e-12,
            starts: 16,
            cluster_tol: 1e-6,
            sample_scale: 1.0,
            seed: 0,
        }
    }
}

/// Solved data equation of one frequency.
#[derive(Debug, Clone)]
pub struct DataEquation {
    pub rhs: CVec,
    /// Minimum-norm solution `x_j`.
    pub particular: CVec,
    pub residual: f64,
    /// Orthonormal columns spanning the numerical kernel of `C_j`.
    pub kernel: CMat,
    pub rank: usize,
    pub rank_tol: f64,
    pub singular_values: Vec<f64>,
    pub consistent: bool,
}

impl DataEquation {
    pub fn kernel_dim(&self) -> usize {
        self.kernel.ncols()
    }
}

/// `u_j` minus the unperturbed receiver field.
pub fn data_rhs(model: &Model, meas: &Measurement, freq: usize) -> Result<CVec> {
    let u = meas
        .0
        .get(freq)
        .ok_or_else(|| Error::Missing(format!("measurement for frequency {}", freq + 1)))?;
    if u.len() != model.scene().num_receivers() {
        return Err(Error::Dimension(format!(
            "measurement for frequency {} has {} values, expected {}",
            freq + 1,
            u.len(),
            model.scene().num_receivers()
        )));
    }
    Ok(u - model.system(freq).incident_at_receivers())
}

pub fn solve_data_equation(
    receiver: &CMat,
    rhs: &CVec,
    rank_tol: f64,
    cons_tol: f64,
) -> DataEquation {
    let svd = FullSvd::new(receiver);
    let rank = svd.rank(rank_tol);
    let particular = svd.solve_min_norm(rhs, rank);
    let residual = (receiver * &particular - rhs).norm();
    DataEquation {
        rhs: rhs.clone(),
        residual,
        consistent: residual <= cons_tol * (rhs.norm() + 1.0),
        kernel: svd.kernel(rank),
        rank,
        rank_tol,
        singular_values: svd.sigma.clone(),
        particular,
    }
}

pub fn data_equations(
    model: &Model,
    meas: &Measurement,
    opts: &InverseOptions,
) -> Result<Vec<DataEquation>> {
    (0..model.scene().num_frequencies())
        .map(|j| {
            let b = data_rhs(model, meas, j)?;
            Ok(solve_data_equation(
                &model.system(j).receiver,
                &b,
                opts.rank_tol,
                opts.cons_tol,
            ))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComponentClass {
    Regular,
    /// Numerator and denominator both vanish; any value is consistent.
    Free,
    /// Denominator vanishes but the numerator does not.
    Pole,
}

#[derive(Debug, Clone)]
pub struct ManifoldPoint {
    pub coords: CVec,
    pub numerator: CVec,
    pub denominator: CVec,
    pub defects: DefectVector,
    pub classes: Vec<ComponentClass>,
}

impl ManifoldPoint {
    pub fn free_components(&self) -> Vec<usize> {
        indices_of(&self.classes, ComponentClass::Free)
    }
}

fn indices_of(classes: &[ComponentClass], which: ComponentClass) -> Vec<usize> {
    classes
        .iter()
        .enumerate()
        .filter(|(_, c)| **c == which)
        .map(|(i, _)| i)
        .collect()
}

fn max_abs(v: &CVec) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn max_abs_mat(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Evaluate the componentwise ratio at kernel coordinates `coords`.
pub fn manifold_point(
    sys: &FrequencySystem,
    deq: &DataEquation,
    coords: &CVec,
    opts: &InverseOptions,
) -> Result<ManifoldPoint> {
    if coords.len() != deq.kernel_dim() {
        return Err(Error::Dimension(format!(
            "kernel coordinates have length {}, kernel dimension is {}",
            coords.len(),
            deq.kernel_dim()
        )));
    }
    let y = &deq.kernel * coords;
    let numerator = &y + &deq.particular;
    let incident = sys.incident_at_defects();
    let denominator = &sys.interaction * &numerator + &incident;

    let n = sys.num_defects();
    let den_scale =
        max_abs_mat(&sys.interaction) * max_abs(&numerator) * n as f64 + max_abs(&incident);
    let num_scale = max_abs(&y) + max_abs(&deq.particular);
    let den_cut = opts.den_tol * den_scale;
    let num_cut = opts.den_tol * num_scale;
    let w2 = sys.omega_sq();

    let mut classes = Vec::with_capacity(n);
    let mut values = CVec::zeros(n);
    for i in 0..n {
        let (num, den) = (numerator[i], denominator[i]);
        if den.norm() > den_cut {
            classes.push(ComponentClass::Regular);
            values[i] = num / (w2 * den);
        } else if num.norm() <= num_cut {
            classes.push(ComponentClass::Free);
            values[i] = opts.free_default;
        } else {
            classes.push(ComponentClass::Pole);
        }
    }
    let poles = indices_of(&classes, ComponentClass::Pole);
    if !poles.is_empty() {
        return Err(Error::OffManifold { poles });
    }
    Ok(ManifoldPoint {
        coords: coords.clone(),
        numerator,
        denominator,
        defects: DefectVector(values),
        classes,
    })
}

/// Distance of `defects` from the regular part of the solution set:
/// `min_y ||(y + x) - omega^2 S (A (y + x) + f)||` over `y` in the kernel.
pub fn membership_residual(
    sys: &FrequencySystem,
    deq: &DataEquation,
    defects: &DefectVector,
) -> f64 {
    let w2 = sys.omega_sq();
    let f = sys.incident_at_defects();
    let s = &defects.0;
    let ax = &sys.interaction * &deq.particular + f;
    let r0 = &deq.particular - ax.component_mul(s) * w2;
    if deq.kernel_dim() == 0 {
        return r0.norm();
    }
    let ak = &sys.interaction * &deq.kernel;
    let mut m = deq.kernel.clone();
    for (row, si) in s.iter().enumerate() {
        for col in 0..m.ncols() {
            m[(row, col)] -= w2 * si * ak[(row, col)];
        }
    }
    let t = lstsq(&m, &(-&r0), 1e-14);
    (m * t + r0).norm()
}

/// Largest relative receiver mismatch over all frequencies; infinite if not admissible.
pub fn verification_residual(model: &Model, meas: &Measurement, defects: &DefectVector) -> f64 {
    match model.predict_receivers(defects) {
        Ok(pred) => pred
            .0
            .iter()
            .zip(&meas.0)
            .map(|(p, u)| (p - u).norm() / u.norm().max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max),
        Err(_) => f64::INFINITY,
    }
}

#[derive(Debug, Clone)]
pub struct Candidate {
    pub defects: DefectVector,
    /// Membership residual per frequency.
    pub membership: Vec<f64>,
    pub verification: f64,
    pub free_components: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecoveryStatus {
    Unique,
    Manifold,
    Inconsistent,
    NoCandidate,
}

impl RecoveryStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            RecoveryStatus::Unique => "UNIQUE",
            RecoveryStatus::Manifold => "MANIFOLD",
            RecoveryStatus::Inconsistent => "INCONSISTENT",
            RecoveryStatus::NoCandidate => "NO_CANDIDATE",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RecoveryResult {
    pub status: RecoveryStatus,
    pub equations: Vec<DataEquation>,
    pub candidates: Vec<Candidate>,
    pub seed: u64,
    pub message: Option<String>,
}

pub(crate) fn make_candidate(
    model: &Model,
    meas: &Measurement,
    equations: &[DataEquation],
    defects: DefectVector,
    free_components: Vec<usize>,
) -> Candidate {
    let membership = model
        .systems()
        .iter()
        .zip(equations)
        .map(|(sys, deq)| membership_residual(sys, deq, &defects))
        .collect();
    let verification = verification_residual(model, meas, &defects);
    Candidate {
        defects,
        membership,
        verification,
        free_components,
    }
}

/// Recover the defect from a frequency whose receiver matrix has a trivial kernel.
pub fn recover_unique(
    model: &Model,
    meas: &Measurement,
    opts: &InverseOptions,
) -> Result<RecoveryResult> {
    let equations = data_equations(model, meas, opts)?;
    let j = equations
        .iter()
        .position(|e| e.kernel_dim() == 0 && e.consistent)
        .ok_or(Error::NoUniqueFrequency)?;
    let point = manifold_point(model.system(j), &equations[j], &CVec::zeros(0), opts)?;
    let free = point.free_components();
    let cand = make_candidate(model, meas, &equations, point.defects, free);
    Ok(RecoveryResult {
        status: RecoveryStatus::Unique,
        equations,
        candidates: vec![cand],
        seed: opts.seed,
        message: None,
    })
}

/// Full analysis: inconsistency check, unique recovery when possible,
/// otherwise manifold intersection.
pub fn recover(model: &Model, meas: &Measurement, opts: &InverseOptions) -> Result<RecoveryResult> {
    let equations = data_equations(model, meas, opts)?;
    if let Some(j) = equations.iter().position(|e| !e.consistent) {
        return Ok(RecoveryResult {
            status: RecoveryStatus::Inconsistent,
            equations,
            candidates: vec![],
            seed: opts.seed,
            message: Some(format!("data equation of frequency {} has no solution; no defect on the footprint explains the data", j + 1)),
        });
    }
    if equations.iter().any(|e| e.kernel_dim() == 0) {
        let result = recover_unique(model, meas, opts)?;
        if result
            .candidates
            .iter()
            .all(|c| c.verification < opts.ver_tol)
        {
            return Ok(result);
        }
    }
    match intersect_manifolds(model, meas, opts) {
        Ok(r) => Ok(r),
        Err(Error::NoCandidate(msg)) => Ok(RecoveryResult {
            status: RecoveryStatus::NoCandidate,
            equations,
            candidates: vec![],
            seed: opts.seed,
            message: Some(msg),
        }),
        Err(e) => Err(e),
    }
}

/// Keep candidates whose components are real (within `im_tol`) and lie in `[0, bound]`.
pub fn box_filter(candidates: &[Candidate], bound: f64, im_tol: f64) -> Vec<Candidate> {
    candidates
        .iter()
        .filter(|c| in_box(&c.defects, bound, im_tol))
        .cloned()
        .collect()
}

pub fn in_box(defects: &DefectVector, bound: f64, im_tol: f64) -> bool {
    defects
        .0
        .iter()
        .all(|z| z.im.abs() <= im_tol && z.re >= -im_tol && z.re <= bound + im_tol)
}

/// Whether two kernel coordinates that map to the same defect coincide.
/// Both points must be POLE-free and admissible.
pub fn injectivity_check(
    model: &Model,
    freq: usize,
    deq: &DataEquation,
    t1: &CVec,
    t2: &CVec,
    opts: &InverseOptions,
) -> Result<bool> {
    let sys = model.system(freq);
    let p1 = manifold_point(sys, deq, t1, opts)?;
    let p2 = manifold_point(sys, deq, t2, opts)?;
    for p in [&p1, &p2] {
        let adm = crate::forward::admissibility(sys, &p.defects, model.adm_tol);
        if !adm.admissible {
            return Err(Error::NotAdmissible {
                freq: freq + 1,
                ratio: adm.sv_ratio,
            });
        }
    }
    let same_defect = (&p1.defects.0 - &p2.defects.0).norm() < 1e-10;
    Ok(!same_defect || (t1 - t2).norm() < 1e-8)
}

/// Natural magnitude of kernel coordinates: comparable to the particular
/// solution, or to the point where `A y` balances the incident field.
pub fn coordinate_scale(sys: &FrequencySystem, deq: &DataEquation) -> f64 {
    let a = crate::linalg::spectral_norm(&sys.interaction).max(f64::MIN_POSITIVE);
    let s = deq
        .particular
        .norm()
        .max(sys.incident_at_defects().norm() / a);
    if s > 0.0 {
        s
    } else {
        1.0
    }
}

pub fn random_coords(rng: &mut ChaCha8Rng, dim: usize, scale: f64, real: bool) -> CVec {
    CVec::from_iterator(
        dim,
        (0..dim).map(|_| {
            let re = rng.random_range(-1.0..1.0);
            let im = if real {
                0.0
            } else {
                rng.random_range(-1.0..1.0)
            };
            Complex64::new(re, im) * scale
        }),
    )
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Draw up to `count` admissible, POLE-free manifold points at one frequency.
pub fn sample_manifold(
    model: &Model,
    freq: usize,
    deq: &DataEquation,
    count: usize,
    opts: &InverseOptions,
) -> Vec<ManifoldPoint> {
    let sys = model.system(freq);
    let scale = coordinate_scale(sys, deq) * opts.sample_scale;
    let mut rng = rng(opts.seed.wrapping_add(freq as u64));
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0;
    while out.len() < count && attempts < 20 * count.max(1) {
        attempts += 1;
        let t = random_coords(&mut rng, deq.kernel_dim(), scale, false);
        if let Ok(p) = manifold_point(sys, deq, &t, opts) {
            if crate::forward::admissibility(sys, &p.defects, model.adm_tol).admissible {
                out.push(p);
            }
        }
    }
    out
}

fn equation_value(j: usize, e: &DataEquation) -> Value {
    doc::object(vec![
        ("freq_index", Value::from(j + 1)),
        ("rank", Value::from(e.rank)),
        ("kernel_dim", Value::from(e.kernel_dim())),
        ("consistency_residual", doc::sci(e.residual)),
        ("consistent", Value::from(e.consistent)),
        (
            "particular_solution",
            doc::complex_list(e.particular.iter()),
        ),
    ])
}

pub fn candidate_value(c: &Candidate) -> Value {
    doc::object(vec![
        ("defects", doc::complex_list(c.defects.0.iter())),
        (
            "membership_residuals",
            Value::Array(c.membership.iter().map(|r| doc::sci(*r)).collect()),
        ),
        ("verification_residual", doc::sci(c.verification)),
        (
            "free_components",
            Value::Array(c.free_components.iter().map(|&i| Value::from(i)).collect()),
        ),
    ])
}

/// Recovery report document.
pub fn recovery_report(result: &RecoveryResult) -> Value {
    let mut fields = vec![
        ("status", Value::from(result.status.as_str())),
        ("seed", Value::from(result.seed)),
        (
            "frequencies",
            Value::Array(
                result
                    .equations
                    .iter()
                    .enumerate()
                    .map(|(j, e)| equation_value(j, e))
                    .collect(),
            ),
        ),
        (
            "candidates",
            Value::Array(result.candidates.iter().map(candidate_value).collect()),
        ),
    ];
    if let Some(msg) = &result.message {
        fields.push(("message", Value::from(msg.as_str())));
    }
    doc::object(fields)
}
