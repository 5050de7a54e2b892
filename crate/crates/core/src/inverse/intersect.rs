//! Numerical intersection of the per-frequency solution sets.
//!
//! The residual of frequency `j` is `r_j = z_j - omega_j^2 (A_j z_j + f_j) o s`
//! with `z_j = K_j t_j + x_j`; it is bilinear in `(s, t_j)`. Alternating
//! sweeps solve for every `t_j` given `s` and then for `s` given all `t_j`
//! (a |den|^2-weighted average of the per-frequency ratios). A joint
//! Gauss-Newton phase on `(s, t_1, ..., t_M)` finishes the convergence.

use num_complex::Complex64;
use rayon::prelude::*;

use super::{
    coordinate_scale, data_equations, make_candidate, manifold_point, random_coords, rng,
    Candidate, DataEquation, InverseOptions, RecoveryResult, RecoveryStatus,
};
use crate::error::{Error, Result};
use crate::forward::{FrequencySystem, Model};
use crate::linalg::{lstsq, CMat, CVec};
use crate::scene::{DefectVector, Measurement};

/// Alternating sweeps before switching to joint Gauss-Newton steps.
const ALTERNATING_SWEEPS: usize = 40;

struct Frame<'a> {
    deq: &'a DataEquation,
    omega_sq: Complex64,
    /// `A K`
    ak: CMat,
    /// `A x + f`
    base: CVec,
}

impl<'a> Frame<'a> {
    fn new(sys: &'a FrequencySystem, deq: &'a DataEquation) -> Self {
        Frame {
            deq,
            omega_sq: sys.omega_sq(),
            ak: &sys.interaction * &deq.kernel,
            base: &sys.interaction * &deq.particular + sys.incident_at_defects(),
        }
    }

    /// `(I - w2 S A) K`
    fn coord_jacobian(&self, s: &CVec) -> CMat {
        let mut m = self.deq.kernel.clone();
        for (row, si) in s.iter().enumerate() {
            for col in 0..m.ncols() {
                m[(row, col)] -= self.omega_sq * si * self.ak[(row, col)];
            }
        }
        m
    }

    fn best_coords(&self, s: &CVec) -> CVec {
        if self.deq.kernel_dim() == 0 {
            return CVec::zeros(0);
        }
        let r0 = &self.deq.particular - self.base.component_mul(s) * self.omega_sq;
        lstsq(&self.coord_jacobian(s), &(-r0), 1e-14)
    }

    /// `(z, omega^2 den)` at coordinates `t`.
    fn evaluate(&self, t: &CVec) -> (CVec, CVec) {
        let z = &self.deq.kernel * t + &self.deq.particular;
        let den = (&self.ak * t + &self.base) * self.omega_sq;
        (z, den)
    }

    fn residual(&self, s: &CVec, t: &CVec) -> CVec {
        let (z, den) = self.evaluate(t);
        z - den.component_mul(s)
    }
}

struct Refined {
    defects: CVec,
    free: Vec<usize>,
}

fn objective(frames: &[Frame], s: &CVec, ts: &[CVec]) -> f64 {
    frames
        .iter()
        .zip(ts)
        .map(|(f, t)| f.residual(s, t).norm_squared())
        .sum()
}

fn update_defects(frames: &[Frame], ts: &[CVec], prev: &CVec) -> (CVec, Vec<usize>) {
    let n = prev.len();
    let mut num = CVec::zeros(n);
    let mut weight = vec![0.0; n];
    for (f, t) in frames.iter().zip(ts) {
        let (z, den) = f.evaluate(t);
        for i in 0..n {
            num[i] += den[i].conj() * z[i];
            weight[i] += den[i].norm_sqr();
        }
    }
    let scale = weight.iter().copied().fold(0.0, f64::max);
    let mut next = prev.clone();
    let mut free = Vec::new();
    for i in 0..n {
        if weight[i] > 1e-24 * scale && weight[i] > 0.0 {
            next[i] = num[i] / weight[i];
        } else {
            free.push(i);
        }
    }
    (next, free)
}

fn refine(frames: &[Frame], start: &CVec, opts: &InverseOptions) -> Refined {
    let n = start.len();
    let mut s = start.clone();
    let mut free = Vec::new();
    let mut iter = 0;

    while iter < opts.max_iter.min(ALTERNATING_SWEEPS) {
        iter += 1;
        let ts: Vec<CVec> = frames.iter().map(|f| f.best_coords(&s)).collect();
        let (next, fr) = update_defects(frames, &ts, &s);
        free = fr;
        let step = (&next - &s).norm();
        s = next;
        if step <= opts.step_tol * s.norm().max(1.0) {
            return Refined { defects: s, free };
        }
    }
    let mut ts: Vec<CVec> = frames.iter().map(|f| f.best_coords(&s)).collect();

    // Joint Gauss-Newton on v = (s, t_1, ..., t_M).
    let dims: Vec<usize> = frames.iter().map(|f| f.deq.kernel_dim()).collect();
    let unknowns = n + dims.iter().sum::<usize>();
    let mut obj = objective(frames, &s, &ts);
    while iter < opts.max_iter && obj > 0.0 {
        iter += 1;
        let mut jac = CMat::zeros(n * frames.len(), unknowns);
        let mut res = CVec::zeros(n * frames.len());
        let mut col = n;
        for (b, (f, t)) in frames.iter().zip(&ts).enumerate() {
            let (z, den) = f.evaluate(t);
            for i in 0..n {
                res[b * n + i] = z[i] - den[i] * s[i];
                jac[(b * n + i, i)] = -den[i];
            }
            let jt = f.coord_jacobian(&s);
            jac.view_mut((b * n, col), (n, dims[b])).copy_from(&jt);
            col += dims[b];
        }
        let delta = lstsq(&jac, &(-res), 1e-14);

        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial_s = &s + delta.rows(0, n) * Complex64::new(step, 0.0);
            let mut off = n;
            let trial_t: Vec<CVec> = dims
                .iter()
                .zip(&ts)
                .map(|(&k, t)| {
                    let v = t + delta.rows(off, k) * Complex64::new(step, 0.0);
                    off += k;
                    v
                })
                .collect();
            let trial_obj = objective(frames, &trial_s, &trial_t);
            if trial_obj < obj {
                s = trial_s;
                ts = trial_t;
                obj = trial_obj;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        let moved = step * delta.norm();
        if !accepted || moved <= opts.step_tol * s.norm().max(1.0) {
            break;
        }
    }
    let (_, fr) = update_defects(frames, &ts, &s);
    free.clone_from(&fr);
    for &i in &free {
        s[i] = opts.free_default;
    }
    Refined { defects: s, free }
}

/// Greedy clustering; each cluster is represented by its best-verified member.
fn cluster(mut candidates: Vec<Candidate>, tol: f64) -> Vec<Candidate> {
    candidates.sort_by(|a, b| a.verification.total_cmp(&b.verification));
    let mut reps: Vec<Candidate> = Vec::new();
    for c in candidates {
        if !reps
            .iter()
            .any(|r| (&r.defects.0 - &c.defects.0).norm() < tol)
        {
            reps.push(c);
        }
    }
    reps
}

fn starting_points(
    model: &Model,
    equations: &[DataEquation],
    opts: &InverseOptions,
    include_particular: bool,
) -> Vec<CVec> {
    let m = equations.len();
    let mut starts = Vec::new();
    if include_particular {
        for (j, deq) in equations.iter().enumerate() {
            if starts.len() >= opts.starts {
                break;
            }
            if let Ok(p) =
                manifold_point(model.system(j), deq, &CVec::zeros(deq.kernel_dim()), opts)
            {
                starts.push(p.defects.0);
            }
        }
    }
    let mut rng = rng(opts.seed);
    let mut attempts = 0;
    while starts.len() < opts.starts && attempts < 50 * opts.starts {
        let j = attempts % m;
        attempts += 1;
        let deq = &equations[j];
        if deq.kernel_dim() == 0 {
            continue;
        }
        let scale = coordinate_scale(model.system(j), deq) * opts.sample_scale;
        let t = random_coords(&mut rng, deq.kernel_dim(), scale, false);
        if let Ok(p) = manifold_point(model.system(j), deq, &t, opts) {
            if p.defects.0.norm() > opts.cluster_tol || include_particular {
                starts.push(p.defects.0);
            }
        }
    }
    starts
}

/// Shared driver; `exclude_zero` drops the trivial defect (used for cloak synthesis).
pub(crate) fn intersect_with(
    model: &Model,
    meas: &Measurement,
    opts: &InverseOptions,
    exclude_zero: bool,
) -> Result<RecoveryResult> {
    let equations = data_equations(model, meas, opts)?;
    if let Some(j) = equations.iter().position(|e| !e.consistent) {
        return Err(Error::NoCandidate(format!(
            "data equation of frequency {} is inconsistent",
            j + 1
        )));
    }

    let keep = |c: &Candidate| {
        c.verification < opts.ver_tol && !(exclude_zero && c.defects.0.norm() < opts.cluster_tol)
    };

    if equations.len() == 1 {
        let deq = &equations[0];
        let mut points = Vec::new();
        if !exclude_zero {
            if let Ok(p) =
                manifold_point(model.system(0), deq, &CVec::zeros(deq.kernel_dim()), opts)
            {
                points.push(p);
            }
        }
        if deq.kernel_dim() > 0 {
            points.extend(super::sample_manifold(
                model,
                0,
                deq,
                opts.starts.saturating_sub(points.len()),
                opts,
            ));
        }
        let candidates: Vec<Candidate> = points
            .into_par_iter()
            .map(|p| {
                let free = p.free_components();
                make_candidate(model, meas, &equations, p.defects, free)
            })
            .filter(|c| keep(c))
            .collect();
        if candidates.is_empty() {
            return Err(Error::NoCandidate(
                "no sampled manifold point reproduces the measurements".into(),
            ));
        }
        let status = if deq.kernel_dim() == 0 {
            RecoveryStatus::Unique
        } else {
            RecoveryStatus::Manifold
        };
        return Ok(RecoveryResult {
            status,
            equations,
            candidates,
            seed: opts.seed,
            message: None,
        });
    }

    let frames: Vec<Frame> = model
        .systems()
        .iter()
        .zip(&equations)
        .map(|(s, e)| Frame::new(s, e))
        .collect();
    let starts = starting_points(model, &equations, opts, !exclude_zero);
    let refined: Vec<Refined> = starts
        .par_iter()
        .map(|s0| refine(&frames, s0, opts))
        .collect();
    let candidates: Vec<Candidate> = refined
        .into_par_iter()
        .map(|r| make_candidate(model, meas, &equations, DefectVector(r.defects), r.free))
        .filter(|c| keep(c))
        .collect();
    let candidates = cluster(candidates, opts.cluster_tol);
    if candidates.is_empty() {
        return Err(Error::NoCandidate(format!(
            "none of {} starts converged to a defect reproducing the measurements",
            starts.len()
        )));
    }
    let status = if candidates.len() == 1 {
        RecoveryStatus::Unique
    } else {
        RecoveryStatus::Manifold
    };
    Ok(RecoveryResult {
        status,
        equations,
        candidates,
        seed: opts.seed,
        message: None,
    })
}

/// Candidates in the intersection of all per-frequency solution sets,
/// each verified by a forward solve.
pub fn intersect_manifolds(
    model: &Model,
    meas: &Measurement,
    opts: &InverseOptions,
) -> Result<RecoveryResult> {
    intersect_with(model, meas, opts, false)
}
