mod common;

use common::rng;
use common::*;
use lattice_defects::inverse::*;
use lattice_defects::*;

fn measured(scene: Scene, truth: &DefectVector) -> (Model, Measurement) {
    let m = model(scene);
    let u = m.predict_receivers(truth).unwrap();
    (m, u)
}

fn dense(mfreq: usize) -> (Model, Measurement, Vec<inverse::DataEquation>) {
    let (m, u) = measured(dense_scene(mfreq), &dense_truth());
    let eqs = data_equations(&m, &u, &InverseOptions::default()).unwrap();
    (m, u, eqs)
}

#[test]
fn kernel_and_particular_solution_are_well_formed() {
    let (m, _, eqs) = dense(4);
    for (j, e) in eqs.iter().enumerate() {
        let sys = m.system(j);
        assert_eq!(e.rank, 8);
        assert_eq!(e.kernel_dim(), 1);
        assert!(e.consistent);
        let gram = e.kernel.adjoint() * &e.kernel;
        assert!((gram - CMat::identity(1, 1)).norm() < 1e-12);
        assert!((&sys.receiver * &e.kernel).norm() < 1e-10 * sys.receiver.norm());
        // minimum norm: the particular solution has no kernel component
        assert!((e.kernel.adjoint() * &e.particular).norm() < 1e-10 * e.particular.norm());
        assert!((&sys.receiver * &e.particular - &e.rhs).norm() < 1e-10 * e.rhs.norm());
    }
}

#[test]
fn sampled_manifold_points_reproduce_their_frequency() {
    let (m, u, eqs) = dense(2);
    let opts = InverseOptions {
        seed: 11,
        ..Default::default()
    };
    for (j, e) in eqs.iter().enumerate() {
        let points = sample_manifold(&m, j, e, 25, &opts);
        assert!(points.len() >= 20);
        for p in points {
            let pred = m.predict_receivers(&p.defects).unwrap();
            assert!(rel_err(&pred.0[j], &u.0[j]) < 1e-8, "freq {j}");
            assert!(membership_residual(m.system(j), e, &p.defects) < 1e-8);
        }
    }
}

#[test]
fn true_defect_lies_on_every_manifold() {
    let (m, _, eqs) = dense(4);
    for (j, e) in eqs.iter().enumerate() {
        assert!(membership_residual(m.system(j), e, &dense_truth()) < 1e-10);
    }
}

#[test]
fn wrong_defects_are_off_the_manifold() {
    let (m, _, eqs) = dense(4);
    let doubled = DefectVector(&dense_truth().0 * c(2.0, 0.0));
    let zero = DefectVector::zeros(9);
    for wrong in [doubled, zero] {
        let worst = (0..4)
            .map(|j| membership_residual(m.system(j), &eqs[j], &wrong))
            .fold(0.0, f64::max);
        assert!(worst > 1e-4, "{worst}");
    }
}

#[test]
fn unique_recovery_from_trivial_kernel() {
    let (m, u) = measured(sparse_scene(), &sparse_truth());
    let r = recover(&m, &u, &InverseOptions::default()).unwrap();
    assert_eq!(r.status, RecoveryStatus::Unique);
    assert_eq!(r.candidates.len(), 1);
    assert!(rel_err(&r.candidates[0].defects.0, &sparse_truth().0) < 1e-8);
}

#[test]
fn each_trivial_kernel_frequency_alone_recovers_the_same_defect() {
    let full = sparse_scene();
    let mut recovered = Vec::new();
    for j in 0..2 {
        let mut scene = full.clone();
        scene.frequencies = vec![full.frequencies[j]];
        scene.sources = full
            .sources_for(j)
            .map(|s| Source {
                freq: 0,
                ..s.clone()
            })
            .collect();
        let (m, u) = measured(scene, &sparse_truth());
        let r = recover_unique(&m, &u, &InverseOptions::default()).unwrap();
        recovered.push(r.candidates[0].defects.0.clone());
    }
    assert!(rel_err(&recovered[0], &recovered[1]) < 1e-8);
}

#[test]
fn zero_defect_component_is_recovered_as_zero() {
    let (m, u, _) = dense(4);
    let r = recover(&m, &u, &InverseOptions::default()).unwrap();
    assert_eq!(r.status, RecoveryStatus::Unique);
    assert!(r.candidates[0].defects.0[5].norm() < 1e-8);
}

#[test]
fn multi_frequency_intersection_finds_planted_defect() {
    let (m, u, _) = dense(4);
    let r = intersect_manifolds(&m, &u, &InverseOptions::default()).unwrap();
    assert_eq!(r.status, RecoveryStatus::Unique);
    assert!(rel_err(&r.candidates[0].defects.0, &dense_truth().0) < 1e-8);
    assert!(r.candidates[0].verification < 1e-10);
}

#[test]
fn single_frequency_with_kernel_reports_a_manifold() {
    let (m, u, _) = dense(1);
    let r = recover(&m, &u, &InverseOptions::default()).unwrap();
    assert_eq!(r.status, RecoveryStatus::Manifold);
    assert!(!r.candidates.is_empty());
    assert!(r.candidates.iter().all(|cand| cand.verification < 1e-6));
}

#[test]
fn unrelated_measurements_are_inconsistent() {
    let (m, mut u, _) = dense(2);
    let mut r = rng(5);
    for z in u.0[1].iter_mut() {
        *z += random_complex(&mut r, 0.1);
    }
    let result = recover(&m, &u, &InverseOptions::default()).unwrap();
    assert_eq!(result.status, RecoveryStatus::Inconsistent);
    assert!(result.candidates.is_empty());
    assert!(!result.equations[1].consistent);
    assert!(result.equations[0].consistent);
}

#[test]
fn unique_recovery_needs_a_trivial_kernel() {
    let (m, u, _) = dense(2);
    assert!(matches!(
        recover_unique(&m, &u, &InverseOptions::default()),
        Err(Error::NoUniqueFrequency)
    ));
}

#[test]
fn injectivity_holds_on_random_pairs() {
    let (m, _, eqs) = dense(2);
    let opts = InverseOptions::default();
    let mut r = rng(9);
    let mut checked = 0;
    for _ in 0..60 {
        let j = checked % 2;
        let scale = coordinate_scale(m.system(j), &eqs[j]);
        let t1 = random_coords(&mut r, 1, scale, false);
        let t2 = random_coords(&mut r, 1, scale, false);
        if let Ok(ok) = injectivity_check(&m, j, &eqs[j], &t1, &t2, &opts) {
            assert!(ok);
            checked += 1;
        }
    }
    assert!(checked >= 40);
}

fn toy_system(interaction: CMat) -> FrequencySystem {
    FrequencySystem {
        omega: w_imag(),
        interaction,
        receiver: CMat::identity(2, 2),
        defect_sources: CMat::from_column_slice(2, 1, &[c(0.0, 0.0), c(1.0, 0.0)]),
        receiver_sources: CMat::zeros(2, 1),
        amplitudes: CVec::from_element(1, c(1.0, 0.0)),
    }
}

fn toy_equation(particular: [f64; 2]) -> DataEquation {
    let x = CVec::from_iterator(2, particular.iter().map(|&v| c(v, 0.0)));
    DataEquation {
        rhs: x.clone(),
        particular: x,
        residual: 0.0,
        kernel: CMat::zeros(2, 0),
        rank: 2,
        rank_tol: 1e-10,
        singular_values: vec![1.0, 1.0],
        consistent: true,
    }
}

#[test]
fn free_and_pole_components_are_classified() {
    let opts = InverseOptions {
        free_default: c(0.25, 0.0),
        ..Default::default()
    };
    let none = CVec::zeros(0);
    // incident field (0, 1); A = I so the denominator is x + f
    let p = manifold_point(
        &toy_system(CMat::identity(2, 2)),
        &toy_equation([0.0, 2.0]),
        &none,
        &opts,
    )
    .unwrap();
    assert_eq!(
        p.classes,
        vec![ComponentClass::Free, ComponentClass::Regular]
    );
    assert_eq!(p.free_components(), vec![0]);
    assert_eq!(p.defects.0[0], c(0.25, 0.0));
    // s = 2 / (omega^2 * 3) with omega^2 = -1
    assert!((p.defects.0[1] - c(-2.0 / 3.0, 0.0)).norm() < 1e-15);

    let err = manifold_point(
        &toy_system(CMat::zeros(2, 2)),
        &toy_equation([1.0, 2.0]),
        &none,
        &opts,
    )
    .unwrap_err();
    assert!(matches!(err, Error::OffManifold { ref poles } if poles == &vec![0]));
}

#[test]
fn box_filter_keeps_real_bounded_candidates() {
    let cand = |vals: &[Complex64]| Candidate {
        defects: DefectVector::from_slice(vals),
        membership: vec![],
        verification: 0.0,
        free_components: vec![],
    };
    let cands = vec![
        cand(&[c(0.5, 0.0), c(1.0, 0.0)]),
        cand(&[c(0.5, 1e-3), c(1.0, 0.0)]),
        cand(&[c(-0.1, 0.0), c(1.0, 0.0)]),
        cand(&[c(0.5, 0.0), c(1.5, 0.0)]),
        cand(&[c(0.0, 1e-12), c(1.0 + 1e-12, 0.0)]),
    ];
    let kept = box_filter(&cands, 1.0, 1e-9);
    assert_eq!(kept.len(), 2);
    assert_eq!(kept[0].defects.0[0], c(0.5, 0.0));
    assert_eq!(kept[1].defects.0[0], c(0.0, 1e-12));
}

#[test]
fn deterministic_for_fixed_seed() {
    let (m, u, _) = dense(2);
    let opts = InverseOptions {
        seed: 42,
        ..Default::default()
    };
    let a = recovery_report(&intersect_manifolds(&m, &u, &opts).unwrap());
    let b = recovery_report(&intersect_manifolds(&m, &u, &opts).unwrap());
    assert_eq!(
        lattice_defects::doc::to_text(&a),
        lattice_defects::doc::to_text(&b)
    );
}

#[test]
fn noise_sensitivity_is_reported() {
    // no accuracy guarantee under noise; record how far the recovery drifts
    let (m, u) = measured(sparse_scene(), &sparse_truth());
    let mut r = rng(1);
    for level in [1e-12, 1e-9, 1e-6] {
        let noisy = Measurement(
            u.0.iter()
                .map(|uj| {
                    uj + CVec::from_fn(uj.len(), |_, _| random_complex(&mut r, level * uj.norm()))
                })
                .collect(),
        );
        let opts = InverseOptions {
            cons_tol: 1e-3,
            ..Default::default()
        };
        let res = recover_unique(&m, &noisy, &opts).unwrap();
        let err = rel_err(&res.candidates[0].defects.0, &sparse_truth().0);
        eprintln!("noise {level:e}: relative defect error {err:e}");
        assert!(err.is_finite());
    }
}
