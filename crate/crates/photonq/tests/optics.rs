use std::f64::consts::{FRAC_1_SQRT_2, PI};

use approx::assert_abs_diff_eq;
use nalgebra::{DMatrix, Matrix2};
use photonq::fock::{FockState, Mode, Pattern, Registry};
use photonq::optics::*;
use photonq::C64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn haar(n: usize, seed: u64) -> DMatrix<C64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    DMatrix::from_fn(n, n, |_, _| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).qr().q()
}

/// `‖a − e^{iθ} b‖` minimized over θ.
fn phase_distance(a: &Matrix2<C64>, b: &Matrix2<C64>) -> f64 {
    let ip: C64 = a.iter().zip(b.iter()).map(|(x, y)| y.conj() * x).sum();
    let ph = if ip.norm() > 0.0 { ip / ip.norm() } else { c(1.0, 0.0) };
    (a - b * ph).norm()
}

#[test]
fn balanced_splitter_matrix() {
    let m = bs_matrix(PI / 2.0);
    let s = FRAC_1_SQRT_2;
    assert!((m - Matrix2::new(c(s, 0.0), c(0.0, s), c(0.0, s), c(s, 0.0))).norm() < 1e-15);
    assert!((bs_matrix(0.0) - Matrix2::identity()).norm() < 1e-15);
}

#[test]
fn splitter_ratios() {
    for theta in [0.3, 1.0, 2.5] {
        let m = bs_matrix(theta);
        assert_abs_diff_eq!(m[(0, 0)].norm_sqr(), (theta / 2.0).cos().powi(2), epsilon = 1e-15);
        assert_abs_diff_eq!(m[(1, 0)].norm_sqr(), (theta / 2.0).sin().powi(2), epsilon = 1e-15);
    }
    assert!(beam_splitter(Mode::h("a"), Mode::h("b"), Mode::h("c"), Mode::h("d"), 4.0).is_err());
    assert!(beam_splitter(Mode::h("a"), Mode::h("a"), Mode::h("c"), Mode::h("d"), 1.0).is_err());
}

#[test]
fn balanced_mach_zehnder_routes_deterministically() {
    let (a, b, cc, d, e, f) = (Mode::h("a"), Mode::h("b"), Mode::h("c"), Mode::h("d"), Mode::h("e"), Mode::h("f"));
    let reg = Registry::new([a.clone(), b.clone(), cc.clone(), d.clone(), e.clone(), f.clone()]).unwrap();
    let s = FockState::basis(&reg, &[(&a, 1)]).unwrap();
    let out = s
        .apply_all(&[
            beam_splitter(a, b, cc.clone(), d.clone(), PI / 2.0).unwrap(),
            beam_splitter(cc, d, e.clone(), f.clone(), PI / 2.0).unwrap(),
        ])
        .unwrap();
    let pe = out.probability(&Pattern::new().count(e, 1)).unwrap();
    let pf = out.probability(&Pattern::new().count(f, 1)).unwrap();
    assert_abs_diff_eq!(pe.max(pf), 1.0, epsilon = 1e-12);
}

fn two_photon(pa: u8, pb: u8) -> FockState {
    let reg = Registry::polarized(&["a", "b", "c", "d"]);
    let m = |p: &str, pol: u8| Mode::new(p, pol, 0);
    FockState::basis(&reg, &[(&m("a", pa), 1), (&m("b", pb), 1)]).unwrap()
}

#[test]
fn pbs_routes_by_polarization() {
    let pbs = pbs_paths("a", "b", "c", "d", Basis::Rectilinear).unwrap();
    let one_each = Pattern::new().group(vec![Mode::h("c"), Mode::v("c")], 1).group(vec![Mode::h("d"), Mode::v("d")], 1);
    let hh = two_photon(0, 0).apply(&pbs).unwrap();
    assert_abs_diff_eq!(hh.probability(&one_each).unwrap(), 1.0, epsilon = 1e-12);
    let hv = two_photon(0, 1).apply(&pbs).unwrap();
    assert_abs_diff_eq!(hv.probability(&one_each).unwrap(), 0.0, epsilon = 1e-12);
    // a_H → c_H, a_V → d_V, b_H → d_H, b_V → c_V
    assert_abs_diff_eq!(hv.amplitude(&[(&Mode::h("c"), 1), (&Mode::v("c"), 1)]).unwrap().norm(), 1.0, epsilon = 1e-12);
}

#[test]
fn pbs_parity_projection() {
    let pbs = pbs_paths("a", "b", "c", "d", Basis::Rectilinear).unwrap();
    let one_each = Pattern::one_per(&[vec![Mode::h("c"), Mode::v("c")], vec![Mode::h("d"), Mode::v("d")]]);
    for pa in 0..2 {
        for pb in 0..2 {
            let sel = two_photon(pa, pb).apply(&pbs).unwrap().postselect(&one_each).unwrap();
            let expect = if pa == pb { 1.0 } else { 0.0 };
            assert_abs_diff_eq!(sel.probability, expect, epsilon = 1e-12);
        }
    }
    // singlet: no one-per-output component at all, φ-like inputs pass whole
    let reg = Registry::polarized(&["a", "b", "c", "d"]);
    let singlet = FockState::from_monomials(
        &reg,
        &[(c(1.0, 0.0), vec![&Mode::h("a"), &Mode::v("b")]), (c(-1.0, 0.0), vec![&Mode::v("a"), &Mode::h("b")])],
    )
    .unwrap();
    assert_abs_diff_eq!(singlet.apply(&pbs).unwrap().probability(&one_each).unwrap(), 0.0, epsilon = 1e-12);
}

#[test]
fn half_wave_plate_conventions() {
    let j0 = jones(Plate::Half, 0.0);
    assert!(phase_distance(&j0, &Matrix2::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0))) < 1e-12);
    let j = jones(Plate::Half, PI / 8.0);
    let s = FRAC_1_SQRT_2;
    assert!(phase_distance(&j, &Matrix2::new(c(s, 0.0), c(s, 0.0), c(s, 0.0), c(-s, 0.0))) < 1e-12);
}

#[test]
fn quarter_wave_plate_makes_circular() {
    let j = jones(Plate::Quarter, PI / 4.0);
    let out = j * nalgebra::Vector2::new(c(1.0, 0.0), c(0.0, 0.0));
    let ratio = out[1] / out[0];
    assert_abs_diff_eq!(ratio.norm(), 1.0, epsilon = 1e-12);
    assert_abs_diff_eq!(ratio.arg().abs(), PI / 2.0, epsilon = 1e-12);
}

#[test]
fn plates_reach_any_u2() {
    // Q(a) H(b) Q(c) with a grid search reaches a random U up to phase
    let target = {
        let h = haar(2, 9);
        Matrix2::new(h[(0, 0)], h[(0, 1)], h[(1, 0)], h[(1, 1)])
    };
    let mut best = f64::MAX;
    let mut angles = (0.0, 0.0, 0.0);
    let steps = 36;
    for i in 0..steps {
        for j in 0..steps {
            for k in 0..steps {
                let (a, b, cc) = (i as f64 * PI / steps as f64, j as f64 * PI / steps as f64, k as f64 * PI / steps as f64);
                let d = phase_distance(&(jones(Plate::Quarter, a) * jones(Plate::Half, b) * jones(Plate::Quarter, cc)), &target);
                if d < best {
                    best = d;
                    angles = (a, b, cc);
                }
            }
        }
    }
    // refine by coordinate descent
    let mut step = PI / steps as f64;
    let eval = |x: (f64, f64, f64)| phase_distance(&(jones(Plate::Quarter, x.0) * jones(Plate::Half, x.1) * jones(Plate::Quarter, x.2)), &target);
    while step > 1e-12 {
        let mut moved = false;
        for d in [(step, 0.0, 0.0), (-step, 0.0, 0.0), (0.0, step, 0.0), (0.0, -step, 0.0), (0.0, 0.0, step), (0.0, 0.0, -step)] {
            let cand = (angles.0 + d.0, angles.1 + d.1, angles.2 + d.2);
            let v = eval(cand);
            if v < best {
                best = v;
                angles = cand;
                moved = true;
            }
        }
        if !moved {
            step /= 2.0;
        }
    }
    assert!(best < 1e-6, "{best}");
}

#[test]
fn mach_zehnder_examples() {
    assert!((mach_zehnder(0.0, 0.0, 0.0, 0.0) - Matrix2::identity()).norm() < 1e-15);
    let m = mach_zehnder(0.0, 0.0, PI / 2.0, 0.0);
    for z in m.iter() {
        assert_abs_diff_eq!(z.norm_sqr(), 0.5, epsilon = 1e-15);
    }
}

#[test]
fn mesh_of_fourier_matrix() {
    let n = 3;
    let w = C64::from_polar(1.0, 2.0 * PI / 3.0);
    let f = DMatrix::from_fn(n, n, |i, j| w.powu((i * j) as u32) / (n as f64).sqrt());
    let els = decompose_unitary(&f).unwrap();
    let mixers = els.iter().filter(|e| matches!(e, MeshElement::Mixer { .. })).count();
    assert_eq!(mixers, 3);
    assert!((mesh_unitary(n, &els) - f).norm() < 1e-8);
}

#[test]
fn mesh_of_identity_has_no_mixing() {
    for n in [1, 2, 5] {
        let els = decompose_unitary(&DMatrix::identity(n, n)).unwrap();
        assert!(els.iter().all(|e| match e {
            MeshElement::Mixer { params, .. } => params.theta.abs() < 1e-12,
            MeshElement::Phase { .. } => false,
        }));
    }
}

#[test]
fn mesh_rejects_non_unitary() {
    assert!(decompose_unitary(&DMatrix::from_element(2, 2, c(1.0, 0.0))).is_err());
    assert!(decompose_unitary(&DMatrix::identity(17, 17)).is_err());
}

#[test]
fn mesh_round_trips_random_unitaries() {
    for n in [2usize, 3, 4, 8] {
        for seed in 0..100 {
            let u = haar(n, seed * 31 + n as u64);
            let els = decompose_unitary(&u).unwrap();
            assert!((mesh_unitary(n, &els) - &u).norm() < 1e-8, "n={n} seed={seed}");
        }
    }
}

#[test]
fn hom_examples() {
    assert_abs_diff_eq!(hom_experiment(c(1.0, 0.0)).unwrap(), 0.0, epsilon = 1e-12);
    assert_abs_diff_eq!(hom_experiment(c(0.0, 0.0)).unwrap(), 0.5, epsilon = 1e-12);
    assert_abs_diff_eq!(hom_experiment(c(FRAC_1_SQRT_2, 0.0)).unwrap(), 0.25, epsilon = 1e-12);
    assert!(hom_experiment(c(1.1, 0.0)).is_err());
}

#[test]
fn hom_grid() {
    for k in 0..=20 {
        let a = k as f64 / 20.0;
        let alpha = C64::from_polar(a, 0.37 * k as f64);
        assert_abs_diff_eq!(hom_experiment(alpha).unwrap(), (1.0 - a * a) / 2.0, epsilon = 1e-12);
    }
}

proptest! {
    #[test]
    fn mz_parameters_recovered(seed in any::<u64>()) {
        let h = haar(2, seed);
        let u = Matrix2::new(h[(0, 0)], h[(0, 1)], h[(1, 0)], h[(1, 1)]);
        let p = MzParams::from_unitary(&u).unwrap();
        prop_assert!((p.matrix() - u).norm() < 1e-9);
    }

    #[test]
    fn elements_are_unitary(theta in 0.0..PI, angle in -PI..PI) {
        for m in [bs_matrix(theta), jones(Plate::Half, angle), jones(Plate::Quarter, angle)] {
            prop_assert!((m.adjoint() * m - Matrix2::identity()).norm() < 1e-12);
        }
    }
}
