mod common;

use common::*;
use lattice_defects::forward::oracle::brute_force_oracle;
use lattice_defects::forward::scaled;
use lattice_defects::*;
use proptest::prelude::*;

fn random_defects(seed: u64, n: usize) -> DefectVector {
    let mut r = rng(seed);
    DefectVector(CVec::from_fn(n, |_, _| random_complex(&mut r, 0.8)))
}

#[test]
fn agrees_with_truncated_lattice_solve() {
    let m = model(sparse_scene());
    for seed in 0..3 {
        let s = random_defects(seed, 3);
        let probe = vec![
            Site::new([0, 0]),
            Site::new([2, -2]),
            Site::new([-3, 3]),
            Site::new([5, 1]),
        ];
        let sol = m.solve_forward(&s, &probe).unwrap();
        let oracle = brute_force_oracle(m.scene(), &s, 30).unwrap();
        for (j, field) in sol.fields.iter().enumerate() {
            let reference = CVec::from_iterator(
                probe.len(),
                probe.iter().map(|p| oracle.value(j, p).unwrap()),
            );
            assert!(
                rel_err(&field.amplitudes, &reference) < 1e-9,
                "seed {seed} freq {j}"
            );
        }
    }
}

#[test]
fn no_defects_gives_incident_field() {
    let m = model(dense_scene(2));
    let zero = DefectVector::zeros(9);
    let u = m.predict_receivers(&zero).unwrap();
    for (j, uj) in u.0.iter().enumerate() {
        assert_eq!(uj, &m.system(j).incident_at_receivers());
    }
}

#[test]
fn scattered_part_satisfies_receiver_relation() {
    // u_j - incident = C_j (omega^2 S w)
    let m = model(dense_scene(4));
    let s = dense_truth();
    let u = m.predict_receivers(&s).unwrap();
    for (j, sys) in m.systems().iter().enumerate() {
        let (w, _) = m.interior_field(j, &s).unwrap();
        let lhs = &u.0[j] - sys.incident_at_receivers();
        let rhs = &sys.receiver * scaled(&w, &s, sys.omega_sq());
        assert!(rel_err(&lhs, &rhs) < 1e-13);
    }
}

#[test]
fn singular_interaction_is_rejected() {
    // one defect: G = 1 - omega^2 a_0 s vanishes at s = 1 / (omega^2 a_0)
    let scene = scene2d(
        &[w_imag()],
        vec![Site::new([0, 0])],
        vec![Site::new([3, 0])],
    );
    let m = model(scene);
    let a0 = m.table().coeff(0, &Site::new([0, 0])).unwrap();
    let bad = DefectVector::from_slice(&[c(1.0, 0.0) / (w_imag() * w_imag() * a0)]);
    assert!(matches!(
        m.predict_receivers(&bad),
        Err(Error::NotAdmissible { freq: 1, .. })
    ));
}

#[test]
fn reciprocity_between_source_and_probe() {
    let x = Site::new([-4, 2]);
    let y = Site::new([3, -1]);
    let field_at = |src: &Site, probe: &Site| {
        let mut scene = dense_scene(1);
        scene.sources = vec![Source {
            freq: 0,
            site: src.clone(),
            amplitude: c(1.0, 0.0),
        }];
        let m = model(scene);
        m.solve_forward(&dense_truth(), std::slice::from_ref(probe))
            .unwrap()
            .fields[0]
            .amplitudes[0]
    };
    let xy = field_at(&x, &y);
    let yx = field_at(&y, &x);
    assert!((xy - yx).norm() < 1e-14 * xy.norm());
}

#[test]
fn frequency_order_does_not_matter() {
    let scene = dense_scene(3);
    let mut reversed = scene.clone();
    reversed.frequencies.reverse();
    for src in &mut reversed.sources {
        src.freq = 2 - src.freq;
    }
    let a = model(scene).predict_receivers(&dense_truth()).unwrap();
    let b = model(reversed).predict_receivers(&dense_truth()).unwrap();
    for j in 0..3 {
        assert!(rel_err(&a.0[j], &b.0[2 - j]) < 1e-15);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn linear_in_source_amplitudes(re in -2.0f64..2.0, im in -2.0f64..2.0, seed in 0u64..1000) {
        let alpha = c(re, im);
        let s = random_defects(seed, 3);
        let base = model(sparse_scene());
        let mut scaled_scene = sparse_scene();
        for src in &mut scaled_scene.sources {
            src.amplitude *= alpha;
        }
        prop_assume!(alpha.norm() > 1e-3);
        let scaled_model = model(scaled_scene);
        let u = base.predict_receivers(&s).unwrap();
        let v = scaled_model.predict_receivers(&s).unwrap();
        for j in 0..2 {
            let expect = &u.0[j] * alpha;
            prop_assert!(rel_err(&v.0[j], &expect) < 1e-13);
        }
    }

    #[test]
    fn superposition_of_sources(seed in 0u64..1000) {
        let s = random_defects(seed, 3);
        let full = model(sparse_scene()).predict_receivers(&s).unwrap();
        let mut parts = Vec::new();
        for keep in 0..2 {
            let mut scene = sparse_scene();
            scene.sources = scene.sources.into_iter().enumerate().filter(|(i, _)| i % 2 == keep).map(|(_, s)| s).collect();
            parts.push(model(scene).predict_receivers(&s).unwrap());
        }
        for j in 0..2 {
            let sum = &parts[0].0[j] + &parts[1].0[j];
            prop_assert!(rel_err(&sum, &full.0[j]) < 1e-13);
        }
    }
}

#[test]
fn shifted_passband_frequency_agrees_with_truncated_lattice() {
    let mut scene = sparse_scene();
    scene.frequencies = vec![FrequencySpec::shifted(c(1.5, 0.0), 0.5)];
    scene.sources.retain(|s| s.freq == 0);
    let m = model(scene);
    let s = sparse_truth();
    let u = m.predict_receivers(&s).unwrap();
    let oracle = brute_force_oracle(m.scene(), &s, 40).unwrap();
    let reference = CVec::from_iterator(u.0[0].len(), m.scene().receivers.iter().map(|r| oracle.value(0, r).unwrap()));
    let err = rel_err(&u.0[0], &reference);
    assert!(err < 1e-8, "{err:e}");
}
