use approx::assert_abs_diff_eq;
use photonq::fock::{FockState, Mode, Registry};
use photonq::protocols::*;
use photonq::qubit::{Bell, DensityOperator, Pauli, QubitRegister};
use photonq::C64;
use proptest::prelude::*;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn bell_fock(b: Bell) -> FockState {
    let reg = Registry::polarized(&["1", "2"]);
    FockState::from_qubits(&b.state(), &[Mode::pair("1"), Mode::pair("2")], &reg).unwrap()
}

fn ghz_fock(amps: [f64; 8]) -> FockState {
    let reg = Registry::polarized(&["1", "2", "3"]);
    let q = QubitRegister::from_amplitudes(amps.iter().map(|&a| c(a, 0.0)).collect()).unwrap();
    FockState::from_qubits(&q, &[Mode::pair("1"), Mode::pair("2"), Mode::pair("3")], &reg).unwrap()
}

fn qubit(theta: f64, phi: f64) -> QubitRegister {
    QubitRegister::new(vec![c((theta / 2.0).cos(), 0.0), C64::from_polar((theta / 2.0).sin(), phi)]).unwrap()
}

fn cardinal() -> Vec<QubitRegister> {
    use std::f64::consts::{FRAC_PI_2, PI};
    vec![
        qubit(0.0, 0.0),
        qubit(PI, 0.0),
        qubit(FRAC_PI_2, 0.0),
        qubit(FRAC_PI_2, PI),
        qubit(FRAC_PI_2, FRAC_PI_2),
        qubit(FRAC_PI_2, -FRAC_PI_2),
    ]
}

#[test]
fn pbs_analyzer_signatures() {
    let a = linear_bell_analysis(&bell_fock(Bell::PhiPlus)).unwrap();
    assert_eq!(a.certain(), Some(Bell::PhiPlus));
    let sigs: Vec<&str> = a.signatures.iter().filter(|s| s.1 > 1e-12).map(|s| s.0.as_str()).collect();
    assert_eq!(sigs.len(), 2);
    assert!(sigs.contains(&"H1 H2") && sigs.contains(&"V1 V2"));

    let a = linear_bell_analysis(&bell_fock(Bell::PhiMinus)).unwrap();
    assert_eq!(a.certain(), Some(Bell::PhiMinus));
    let sigs: Vec<&str> = a.signatures.iter().filter(|s| s.1 > 1e-12).map(|s| s.0.as_str()).collect();
    assert!(sigs.contains(&"H1 V2") && sigs.contains(&"V1 H2"));

    for b in [Bell::PsiPlus, Bell::PsiMinus] {
        let a = linear_bell_analysis(&bell_fock(b)).unwrap();
        assert_abs_diff_eq!(a.probability(None), 1.0, epsilon = 1e-12);
    }
}

#[test]
fn pbs_analyzer_half_inconclusive_on_uniform_input() {
    let p: f64 = Bell::ALL
        .iter()
        .map(|&b| linear_bell_analysis(&bell_fock(b)).unwrap().probability(None) / 4.0)
        .sum();
    assert_abs_diff_eq!(p, 0.5, epsilon = 1e-12);
}

#[test]
fn analyzers_reject_wrong_photon_number() {
    assert!(linear_bell_analysis(&ghz_fock([1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0])).is_err());
    assert!(ghz_analysis(&bell_fock(Bell::PhiPlus)).is_err());
}

#[test]
fn bs_analyzer_classes() {
    let a = bs_bell_analysis(&bell_fock(Bell::PsiMinus)).unwrap();
    assert_eq!(a.certain(), Some(Bell::PsiMinus));
    let a = bs_bell_analysis(&bell_fock(Bell::PsiPlus)).unwrap();
    assert_eq!(a.certain(), Some(Bell::PsiPlus));
    for b in [Bell::PhiPlus, Bell::PhiMinus] {
        assert_abs_diff_eq!(bs_bell_analysis(&bell_fock(b)).unwrap().probability(None), 1.0, epsilon = 1e-12);
    }
}

#[test]
fn ghz_analyzer_parity() {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let plus = ghz_analysis(&ghz_fock([s, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, s])).unwrap();
    assert_abs_diff_eq!(plus.probability(Some(GhzLabel::PhiPlus)), 1.0, epsilon = 1e-12);
    for (sig, p) in &plus.signatures {
        if *p > 1e-12 {
            let h = sig.split(' ').filter(|d| d.starts_with('H')).count();
            assert!(h == 1 || h == 3, "{sig}");
        }
    }
    let minus = ghz_analysis(&ghz_fock([s, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -s])).unwrap();
    assert_abs_diff_eq!(minus.probability(Some(GhzLabel::PhiMinus)), 1.0, epsilon = 1e-12);
    for (sig, p) in &minus.signatures {
        if *p > 1e-12 {
            let h = sig.split(' ').filter(|d| d.starts_with('H')).count();
            assert!(h == 0 || h == 2, "{sig}");
        }
    }
    // the six other GHZ states never give a three-fold coincidence
    for flip in 1..4usize {
        for sign in [1.0, -1.0] {
            let mut amps = [0.0; 8];
            amps[flip] = s;
            amps[7 - flip] = sign * s;
            let a = ghz_analysis(&ghz_fock(amps)).unwrap();
            assert_abs_diff_eq!(a.probability(None), 1.0, epsilon = 1e-12);
        }
    }
}

#[test]
fn dense_coding_mapping() {
    let expect = [(0b11, Bell::PsiPlus), (0b10, Bell::PhiPlus), (0b01, Bell::PhiMinus), (0b00, Bell::PsiMinus)];
    for (m, b) in expect {
        let r = dense_coding(m, Analyzer::Full).unwrap();
        assert_eq!(r.sent, b);
        assert_eq!(r.decoded.len(), 1);
        assert_eq!(r.decoded[0].which, Some(b));
    }
    assert!(dense_coding(4, Analyzer::Full).is_err());
}

#[test]
fn dense_coding_capacities() {
    assert_abs_diff_eq!(dense_coding_capacity(Analyzer::Full).unwrap(), 2.0, epsilon = 1e-9);
    assert_abs_diff_eq!(dense_coding_capacity(Analyzer::TwoState).unwrap(), 3f64.log2(), epsilon = 1e-9);
}

#[test]
fn capacity_of_binary_symmetric_channel() {
    let e: f64 = 0.11;
    let h = -e * e.log2() - (1.0 - e) * (1.0 - e).log2();
    let cap = channel_capacity(&[vec![1.0 - e, e], vec![e, 1.0 - e]]).unwrap();
    assert_abs_diff_eq!(cap, 1.0 - h, epsilon = 1e-9);
}

#[test]
fn teleport_h_through_singlet_needs_nothing_on_psi_minus() {
    let t = teleport(&qubit(0.0, 0.0), Bell::PsiMinus, BsmMode::Full).unwrap();
    let b = t.branches.iter().find(|b| b.outcome == Some(Bell::PsiMinus)).unwrap();
    assert!(b.correction.is_identity());
    assert!(b.output.as_ref().unwrap().same_ray(&qubit(0.0, 0.0), 1e-12));
}

#[test]
fn teleport_fidelity_one_on_cardinal_states() {
    for resource in Bell::ALL {
        for s in cardinal() {
            let t = teleport(&s, resource, BsmMode::Full).unwrap();
            assert_abs_diff_eq!(t.fidelity, 1.0, epsilon = 1e-10);
            assert_abs_diff_eq!(t.success_probability, 1.0, epsilon = 1e-10);
            assert!(t.fidelity > t.classical_limit);
        }
    }
}

#[test]
fn teleport_conclusive_only() {
    let t = teleport(&qubit(1.0, 0.3), Bell::PsiMinus, BsmMode::ConclusiveOnly).unwrap();
    assert_abs_diff_eq!(t.success_probability, 0.25, epsilon = 1e-12);
    assert_abs_diff_eq!(t.fidelity, 1.0, epsilon = 1e-10);
    assert_abs_diff_eq!(t.classical_limit, 2.0 / 3.0, epsilon = 1e-15);
}

#[test]
fn teleport_corrections_match_pauli_table() {
    // singlet resource: ψ⁻ → I, ψ⁺ → z, φ⁻ → x, φ⁺ → xz (up to phase)
    assert_eq!(teleport_correction(Bell::PsiMinus, Bell::PsiMinus).unwrap(), Pauli::I);
    assert_eq!(teleport_correction(Bell::PsiPlus, Bell::PsiMinus).unwrap(), Pauli::Z);
    assert_eq!(teleport_correction(Bell::PhiMinus, Bell::PsiMinus).unwrap(), Pauli::X);
    assert_eq!(teleport_correction(Bell::PhiPlus, Bell::PsiMinus).unwrap(), Pauli::Y);
}

#[test]
fn rome_outcomes() {
    let (a, b) = (c(0.6, 0.0), c(0.0, 0.8));
    let r = teleport_rome(a, b).unwrap();
    for br in &r {
        assert_abs_diff_eq!(br.probability, 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(br.fidelity, 1.0, epsilon = 1e-10);
    }
    let psi_minus = r.iter().find(|x| x.outcome == PathPolBell::PsiMinus).unwrap();
    assert!(psi_minus.correction.is_identity());
    assert!(psi_minus.bob.same_ray(&QubitRegister::new(vec![a, b]).unwrap(), 1e-12));
    let phi_plus = r.iter().find(|x| x.outcome == PathPolBell::PhiPlus).unwrap();
    assert_eq!(phi_plus.correction, PauliCorrection::on(0, Pauli::Z));
    let total: f64 = r.iter().map(|x| x.probability).sum();
    assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
}

#[test]
fn path_pol_basis_is_orthonormal() {
    for (i, a) in PathPolBell::ALL.iter().enumerate() {
        for (j, b) in PathPolBell::ALL.iter().enumerate() {
            let o = a.state().inner(&b.state()).norm();
            assert_abs_diff_eq!(o, if i == j { 1.0 } else { 0.0 }, epsilon = 1e-12);
        }
    }
}

#[test]
fn open_destination_every_receiver() {
    let chi = qubit(1.1, 0.4);
    let (al, be) = (chi.amplitudes()[0], chi.amplitudes()[1]);
    let mut enc = vec![C64::default(); 8];
    enc[0] = al;
    enc[7] = be;
    let enc = QubitRegister::new(enc).unwrap();
    let mut fids = Vec::new();
    for r in 3..=5 {
        let od = teleport_open_destination(&chi, r).unwrap();
        for e in &od.encoding {
            assert!(e.encoded.same_ray(&enc, 1e-10));
            assert_abs_diff_eq!(e.probability, 0.25, epsilon = 1e-12);
        }
        let total: f64 = od.readout.iter().map(|b| b.probability).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        fids.push(od.min_fidelity);
    }
    for f in fids {
        assert_abs_diff_eq!(f, 1.0, epsilon = 1e-10);
    }
    assert!(teleport_open_destination(&chi, 2).is_err());
}

#[test]
fn two_qubit_teleport_product_and_singlet() {
    let hv = QubitRegister::basis(2, 1).unwrap();
    let t = teleport_two_qubit(&hv).unwrap();
    assert_abs_diff_eq!(t.fidelity, 1.0, epsilon = 1e-10);
    assert_eq!(t.branches.len(), 16);
    for b in &t.branches {
        assert_abs_diff_eq!(b.probability, 1.0 / 16.0, epsilon = 1e-12);
    }

    let t = teleport_two_qubit(&Bell::PsiMinus.state()).unwrap();
    assert_abs_diff_eq!(t.fidelity, 1.0, epsilon = 1e-10);
    assert_abs_diff_eq!(t.singlet_fidelity_local, t.fidelity, epsilon = 1e-10);
    assert!(t.fidelity > t.estimation_limit && t.fidelity > 0.5);
}

#[test]
fn two_qubit_teleport_rejects_unnormalized() {
    let s = QubitRegister::from_amplitudes(vec![c(1.0, 0.0); 4]).unwrap();
    assert!(teleport_two_qubit(&s).is_ok());
    assert!(teleport_two_qubit(&Bell::PsiMinus.state().tensor(&qubit(0.0, 0.0)).unwrap()).is_err());
}

#[test]
fn swap_labels_follow_measurement() {
    let s = entanglement_swap().unwrap();
    for b in &s.branches {
        assert_abs_diff_eq!(b.probability, 0.25, epsilon = 1e-12);
        assert!(b.state.same_ray(&b.outcome.state(), 1e-12));
    }
    let mixed = DensityOperator::maximally_mixed(2).unwrap();
    assert_abs_diff_eq!((s.unconditioned.matrix() - mixed.matrix()).norm(), 0.0, epsilon = 1e-10);
}

#[test]
fn bbpssw_known_value() {
    let p = purify_bbpssw(0.75).unwrap();
    assert_abs_diff_eq!(p.fidelity, 0.569_444_444_444_444_4 / 0.722_222_222_222_222_2, epsilon = 1e-10);
    assert_abs_diff_eq!(purify_bbpssw(1.0).unwrap().fidelity, 1.0, epsilon = 1e-10);
    assert!(purify_bbpssw(0.5).is_err());
    assert!(purify_bbpssw(1.2).is_err());
}

#[test]
fn twirl_gives_werner_form() {
    let rho = DensityOperator::mixture(&[
        (0.7, &Bell::PsiMinus.state().density()),
        (0.3, &QubitRegister::basis(2, 0).unwrap().density()),
    ])
    .unwrap();
    let w = twirl(&rho).unwrap();
    let f = w.fidelity(&Bell::PsiMinus.state()).unwrap();
    assert_abs_diff_eq!(f, rho.fidelity(&Bell::PsiMinus.state()).unwrap(), epsilon = 1e-12);
    for b in [Bell::PsiPlus, Bell::PhiPlus, Bell::PhiMinus] {
        assert_abs_diff_eq!(w.fidelity(&b.state()).unwrap(), (1.0 - f) / 3.0, epsilon = 1e-12);
    }
}

#[test]
fn linear_optical_values() {
    assert_abs_diff_eq!(purify_linear_optical(0.75).unwrap().fidelity, 0.9, epsilon = 1e-10);
    let f = purify_linear_optical(0.8).unwrap();
    assert_abs_diff_eq!(f.fidelity, 0.64 / 0.68, epsilon = 1e-10);
    assert_abs_diff_eq!(f.success_probability, 0.5 * 0.68, epsilon = 1e-10);
}

#[test]
fn linear_optical_cross_terms_vanish() {
    assert_eq!(four_mode_probability(Bell::PhiPlus, Bell::PsiMinus).unwrap(), 0.0);
    assert_eq!(four_mode_probability(Bell::PsiMinus, Bell::PhiPlus).unwrap(), 0.0);
    assert_abs_diff_eq!(four_mode_probability(Bell::PhiPlus, Bell::PhiPlus).unwrap(), 0.5, epsilon = 1e-12);
    assert_abs_diff_eq!(four_mode_probability(Bell::PsiMinus, Bell::PsiMinus).unwrap(), 0.5, epsilon = 1e-12);
}

#[test]
fn linear_optical_fock_agrees_with_qubit_model() {
    let f = 0.75;
    let fock = purify_linear_optical_fock(f).unwrap();
    let qubit = purify_linear_optical(f).unwrap();
    assert_abs_diff_eq!(fock.fidelity, qubit.fidelity, epsilon = 1e-10);
    assert_abs_diff_eq!(fock.success_probability, qubit.success_probability, epsilon = 1e-10);
}

#[test]
fn procrustean_filter() {
    let r = concentrate_procrustean(c(0.8f64.sqrt(), 0.0), c(0.2f64.sqrt(), 0.0)).unwrap();
    assert_abs_diff_eq!(r.success_probability, 0.4, epsilon = 1e-12);
    assert_abs_diff_eq!(r.fidelity, 1.0, epsilon = 1e-12);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    assert_abs_diff_eq!(concentrate_procrustean(c(s, 0.0), c(0.0, s)).unwrap().success_probability, 1.0, epsilon = 1e-12);
    assert!(concentrate_procrustean(c(1.0, 0.0), C64::default()).is_err());
}

#[test]
fn cnot_heralds() {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let plus_zero = QubitRegister::new(vec![c(s, 0.0), c(0.0, 0.0), c(s, 0.0), c(0.0, 0.0)]).unwrap();
    let r = cnot_nondestructive(&plus_zero).unwrap();
    assert_abs_diff_eq!(r.four_mode_probability, 0.25, epsilon = 1e-12);
    for b in &r.branches {
        assert_abs_diff_eq!(b.probability, 1.0 / 16.0, epsilon = 1e-12);
        assert!(b.corrected.same_ray(&Bell::PhiPlus.state(), 1e-10));
    }
    let vv = r.branches.iter().find(|b| b.herald == "V'3 V4").unwrap();
    assert!(vv.correction.is_identity());
    let vh = r.branches.iter().find(|b| b.herald == "V'3 H4").unwrap();
    assert_eq!(vh.correction, PauliCorrection::on(1, Pauli::X));
}

#[test]
fn cnot_phase_flip_sits_on_the_control() {
    let r = cnot_nondestructive(&QubitRegister::basis(2, 0).unwrap()).unwrap();
    let hv = r.branches.iter().find(|b| b.herald == "H'3 V4").unwrap();
    assert_eq!(hv.correction, PauliCorrection::on(0, Pauli::Z));
    let hh = r.branches.iter().find(|b| b.herald == "H'3 H4").unwrap();
    assert_eq!(hh.correction, PauliCorrection(vec![(0, Pauli::Z), (1, Pauli::X)]));
}

#[test]
fn event_ready_entangler_decomposition() {
    let e = event_ready_entangler().unwrap();
    assert_abs_diff_eq!(e.four_mode_probability, 0.25, epsilon = 1e-12);
    for t in &e.decomposition {
        assert_abs_diff_eq!(t.probability, 0.25, epsilon = 1e-12);
        let expect = match t.ab_partner {
            Bell::PhiPlus => PauliCorrection::none(),
            Bell::PsiPlus => PauliCorrection::on(1, Pauli::X),
            Bell::PhiMinus => PauliCorrection::on(0, Pauli::Z),
            Bell::PsiMinus => PauliCorrection::on(0, Pauli::Z).then(PauliCorrection::on(1, Pauli::X)),
        };
        assert!(expect.apply(&t.state).same_ray(&Bell::PsiMinus.state(), 1e-10));
    }
    assert_abs_diff_eq!(e.success_probability, 0.125, epsilon = 1e-12);
    for h in &e.heralds {
        assert_abs_diff_eq!(h.fidelity, 1.0, epsilon = 1e-10);
    }
}

#[test]
fn franson_fringe() {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    assert_abs_diff_eq!(franson_visibility(c(s, 0.0), c(s, 0.0)).unwrap(), 1.0, epsilon = 1e-9);
    assert_abs_diff_eq!(franson_visibility(c(0.9f64.sqrt(), 0.0), c(0.1f64.sqrt(), 0.0)).unwrap(), 0.6, epsilon = 1e-9);
    let a = franson_timebin(c(0.6, 0.0), c(0.8, 0.0), 0.7).unwrap();
    let b = franson_timebin(c(0.6, 0.0), c(0.8, 0.0), 0.7 + 2.0 * std::f64::consts::PI).unwrap();
    assert_abs_diff_eq!(a, b, epsilon = 1e-12);
    assert_abs_diff_eq!(a, 0.5 * (1.0 + 0.96 * 0.7f64.cos()), epsilon = 1e-12);
}

fn rand_qubit() -> impl Strategy<Value = QubitRegister> {
    (0.0..std::f64::consts::PI, 0.0..2.0 * std::f64::consts::PI).prop_map(|(t, p)| qubit(t, p))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn teleport_outcomes_uniform(s in rand_qubit()) {
        let t = teleport(&s, Bell::PsiMinus, BsmMode::Full).unwrap();
        for b in &t.branches {
            prop_assert!((b.probability - 0.25).abs() < 1e-10);
            prop_assert!((b.fidelity.unwrap() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn purification_maps_improve(f in 0.51f64..0.999) {
        let b = purify_bbpssw(f).unwrap();
        prop_assert!((b.fidelity - bbpssw_closed_form(f).fidelity).abs() < 1e-10);
        prop_assert!(b.fidelity > f);
        let l = purify_linear_optical(f).unwrap();
        prop_assert!((l.fidelity - linear_optical_closed_form(f).fidelity).abs() < 1e-10);
        prop_assert!(l.fidelity > f);
    }

    #[test]
    fn local_identity_matches_overlap(a in prop::collection::vec(-1.0f64..1.0, 8)) {
        let amps: Vec<C64> = a.chunks(2).map(|p| c(p[0], p[1])).collect();
        prop_assume!(amps.iter().map(|x| x.norm_sqr()).sum::<f64>() > 1e-3);
        let s = QubitRegister::from_amplitudes(amps).unwrap();
        let rho = DensityOperator::with_white_noise(&s, 0.7).unwrap();
        let direct = rho.fidelity(&Bell::PsiMinus.state()).unwrap();
        prop_assert!((singlet_fidelity_local(&rho).unwrap() - direct).abs() < 1e-10);
    }

    #[test]
    fn pbs_analyzer_never_mislabels(w in prop::collection::vec(0.0f64..1.0, 4)) {
        let total: f64 = w.iter().sum();
        prop_assume!(total > 1e-3);
        for (k, b) in Bell::ALL.iter().enumerate() {
            let a = linear_bell_analysis(&bell_fock(*b)).unwrap();
            for o in &a.outcomes {
                if let Some(x) = o.which {
                    if o.probability * w[k] > 1e-12 {
                        prop_assert_eq!(x, *b);
                    }
                }
            }
        }
    }
}
