//! End-to-end acceptance checks, one PASS/FAIL line each.
//!
//! Runs without the libtest harness so the lines always reach stdout.
//! Criteria listed in `KNOWN_DEVIATIONS` are expected to fail; the binary
//! exits non-zero only if the observed failures differ from that set.

use std::collections::BTreeSet;
use std::f64::consts::{PI, SQRT_2};
use std::path::PathBuf;
use std::process::Command;

use photonq::fock::Mode;
use photonq::mbqc::*;
use photonq::nonlocal::*;
use photonq::optics::hom_experiment;
use photonq::protocols::*;
use photonq::qubit::{Bell, DensityOperator, QubitRegister, Setting};
use photonq::repeater::*;
use photonq::sources::*;
use photonq::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Multi-pair crossing and Leggett interval edges.
const KNOWN_DEVIATIONS: [u32; 2] = [6, 10];

type Check = Result<String, String>;
type Criterion = (u32, &'static str, fn() -> Check);

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn close(what: &str, got: f64, want: f64, tol: f64) -> Result<(), String> {
    if (got - want).abs() <= tol {
        Ok(())
    } else {
        Err(format!("{what}: got {got}, want {want} ± {tol}"))
    }
}

fn ensure(cond: bool, what: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what.into())
    }
}

fn lib<T>(r: photonq::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn random_qubit(rng: &mut ChaCha20Rng) -> QubitRegister {
    let t: f64 = rng.gen_range(0.0..PI);
    let p: f64 = rng.gen_range(-PI..PI);
    QubitRegister::new(vec![c((t / 2.0).cos(), 0.0), C64::from_polar((t / 2.0).sin(), p)]).unwrap()
}

fn hom() -> Check {
    close("indistinguishable", lib(hom_experiment(c(1.0, 0.0)))?, 0.0, 1e-12)?;
    close("distinguishable", lib(hom_experiment(c(0.0, 0.0)))?, 0.5, 1e-12)?;
    for k in 0..=20 {
        let a = k as f64 / 20.0;
        close(&format!("|α| = {a}"), lib(hom_experiment(C64::from_polar(a, 0.3 * k as f64)))?, (1.0 - a * a) / 2.0, 1e-12)?;
    }
    Ok("P = 0, 1/2 and (1 − |α|²)/2 on 21 points".into())
}

fn chsh() -> Check {
    let [a1, a2, b1, b2] = chsh_optimal_settings();
    let singlet = DensityOperator::with_white_noise(&Bell::PsiMinus.state(), 1.0).unwrap();
    let s = lib(chsh_value(&singlet, a1, a2, b1, b2))?;
    close("S", s, 2.0 * SQRT_2, 1e-9)?;
    let b = lib(lhv_bound(&Functional::chsh()))?.value;
    ensure(b == 2.0, format!("LHV bound {b}"))?;
    let f = lib(werner_chsh_threshold())?;
    close("Werner threshold", f, (3.0 / SQRT_2 + 1.0) / 4.0, 1e-6)?;
    Ok(format!("S = {s:.10}, LHV = {b}, F* = {f:.8}"))
}

fn ghz_correlations() -> Check {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut amps = vec![c(0.0, 0.0); 8];
    amps[0] = c(h, 0.0);
    amps[7] = c(0.0, h);
    let rho = QubitRegister::new(amps).unwrap().density();
    let grid: Vec<f64> = (0..7).map(|k| -PI + k as f64 * PI / 3.0).collect();
    let mut worst = 0.0f64;
    for &x in &grid {
        for &y in &grid {
            for &z in &grid {
                let e = lib(correlation(&rho, &[Setting::equator(x), Setting::equator(y), Setting::equator(z)]))?;
                worst = worst.max((e - (x + y + z).sin()).abs());
            }
        }
    }
    close("max |E − sin(Σφ)|", worst, 0.0, 1e-10)?;
    for (x, y, z) in [(0.2, 0.7, -0.3), (1.0, 1.0, 1.0), (0.0, PI, 0.5), (2.1, -1.3, 0.4)] {
        let (s, d) = lib(ghz_interferometer(x, y, z))?;
        let det: Vec<(Mode, DetectorModel)> = d.iter().map(|m| (m.clone(), DetectorModel::ideal())).collect();
        let counts = lib(coincidence_count(&s, &det, 0, 0))?;
        for (i, j) in [(0, 2), (0, 3), (2, 5), (1, 4)] {
            close("two-fold", counts.probability(|r| r[i] > 0 && r[j] > 0), 0.25, 1e-10)?;
        }
        for i in 0..6 {
            close("single", counts.probability(|r| r[i] > 0), 0.5, 1e-10)?;
        }
    }
    Ok(format!("343-point grid, max deviation {worst:.1e}; marginals flat"))
}

fn ghz_paradox() -> Check {
    let ghz = lib(QubitRegister::ghz(3))?;
    let g = lib(ghz_paradox_check(&ghz, 1.0))?;
    for (e, t) in g.expectations.iter().zip([-1.0, -1.0, -1.0, 1.0]) {
        close("expectation", *e, t, 1e-12)?;
    }
    let v = lib(ghz_paradox_threshold(&ghz))?;
    close("threshold", v, 0.5, 0.01)?;
    Ok(format!("E = {:?}, local model lost at V = {v:.6}", g.expectations))
}

fn ardehali() -> Check {
    let r = lib(ardehali_test(1.0))?;
    close("V = 1", r.value, 4.0 * SQRT_2, 1e-9)?;
    let v = lib(ardehali_threshold())?;
    close("threshold", v, 1.0 / (2.0 * SQRT_2), 1e-9)?;
    let noisy = lib(ardehali_test(0.784))?.value;
    close("V = 0.784", noisy, 4.433, 0.02)?;
    Ok(format!("A(1) = {:.10}, V* = {v:.10}, A(0.784) = {noisy:.4}", r.value))
}

fn leggett() -> Check {
    let r = lib(leggett_test(18.8f64.to_radians()))?;
    close("bound at 18.8°", r.bound, 3.792, 0.002)?;
    close("quantum at 18.8°", r.quantum, 3.893, 0.002)?;
    let (lo, hi) = lib(leggett_interval(1.0))?.ok_or("no violation")?;
    let (lo, hi) = (lo.to_degrees(), hi.to_degrees());
    let note = format!("18.8°: {:.4} vs bound {:.4}; interval ({lo:.2}°, {hi:.2}°)", r.quantum, r.bound);
    close("lower edge", lo, 4.0, 0.5).map_err(|e| format!("{note}; {e}"))?;
    close("upper edge", hi, 36.0, 0.5).map_err(|e| format!("{note}; {e}"))?;
    Ok(note)
}

fn teleportation() -> Check {
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    let mut limit = 0.0;
    for _ in 0..20 {
        let s = random_qubit(&mut rng);
        for resource in Bell::ALL {
            let t = lib(teleport(&s, resource, BsmMode::Full))?;
            close("fidelity", t.fidelity, 1.0, 1e-10)?;
            for b in &t.branches {
                close("outcome probability", b.probability, 0.25, 1e-10)?;
            }
            limit = t.classical_limit;
        }
        let (a, b) = (s.amplitudes()[0], s.amplitudes()[1]);
        for br in lib(teleport_rome(a, b))? {
            close("path-polarization fidelity", br.fidelity, 1.0, 1e-10)?;
            close("path-polarization probability", br.probability, 0.25, 1e-10)?;
        }
        for r in 3..=5 {
            close("open destination", lib(teleport_open_destination(&s, r))?.min_fidelity, 1.0, 1e-10)?;
        }
    }
    let t = lib(teleport_two_qubit(&Bell::PsiMinus.state()))?;
    close("two-qubit fidelity", t.fidelity, 1.0, 1e-10)?;
    close("local identity", t.singlet_fidelity_local, t.fidelity, 1e-10)?;
    Ok(format!("all variants F = 1; benchmarks {limit:.4} and {:.2}", t.estimation_limit))
}

fn swapping() -> Check {
    let s = lib(entanglement_swap())?;
    for b in &s.branches {
        ensure(b.state.same_ray(&b.outcome.state(), 1e-12), format!("branch {} heralds the wrong state", b.outcome.label()))?;
    }
    let mixed = lib(DensityOperator::maximally_mixed(2))?;
    close("‖ρ₁₄ − I/4‖", (s.unconditioned.matrix() - mixed.matrix()).norm(), 0.0, 1e-10)?;
    let psi = s.branches.iter().find(|b| b.outcome == Bell::PsiMinus).ok_or("no ψ⁻ branch")?;
    let [a1, a2, b1, b2] = chsh_optimal_settings();
    let chsh = lib(chsh_value(&psi.state.density(), a1, a2, b1, b2))?;
    close("CHSH after swap", chsh, 2.0 * SQRT_2, 1e-9)?;
    Ok(format!("labels match, unconditioned = I/4, S = {chsh:.10}"))
}

fn purification() -> Check {
    for k in 0..9 {
        let f = 0.55 + 0.05 * k as f64;
        let sim = lib(purify_bbpssw(f))?;
        let cf = bbpssw_closed_form(f);
        close(&format!("BBPSSW F' at {f:.2}"), sim.fidelity, cf.fidelity, 1e-10)?;
        close(&format!("BBPSSW yield at {f:.2}"), sim.success_probability, cf.success_probability, 1e-10)?;
    }
    let lo = |f: f64| f * f / (f * f + (1.0 - f).powi(2));
    let a = lib(purify_linear_optical(0.75))?.fidelity;
    let b = lib(purify_linear_optical(0.8))?.fidelity;
    close("F'(0.75)", a, lo(0.75), 1e-10)?;
    close("F'(0.75) = 0.9", a, 0.9, 1e-10)?;
    close("F'(0.8)", b, lo(0.8), 1e-10)?;
    close("F'(0.8) ≈ 0.941", b, 0.941, 5e-4)?;
    let cross = lib(four_mode_probability(Bell::PhiPlus, Bell::PsiMinus))?;
    ensure(cross == 0.0, format!("cross-term probability {cross}"))?;
    Ok(format!("BBPSSW on 9 points; linear-optical {a:.10}, {b:.10}; cross term 0"))
}

fn multipair() -> Check {
    let x = lib(multipair_threshold(0.5))?;
    close("|z|² at V = 1/2", x, 0.140, 0.005)?;
    Ok(format!("crossing at |z|² = {x:.4}"))
}

fn v4() -> Check {
    for (p, s) in [(1.0, 0.5), (0.7, 2.0), (3.0, 1.0)] {
        let f = lib(FilterSpec::new(p, s, 1e7))?;
        close("unfiltered limit", visibility_v4(&f), visibility_v4_unfiltered(p, s), 1e-9)?;
    }
    let grid = [0.2, 0.5, 1.0, 2.0, 4.0];
    for &p in &grid {
        for &s in &grid {
            for &o in &grid {
                let v = visibility_v4(&lib(FilterSpec::new(p, s, o))?);
                ensure(visibility_v4(&lib(FilterSpec::new(p, s * 1.5, o))?) < v, "V(4) must fall with shared bandwidth")?;
                ensure(visibility_v4(&lib(FilterSpec::new(p * 1.5, s, o))?) > v, "V(4) must rise with pump bandwidth")?;
                ensure((0.0..=1.0).contains(&v), format!("V(4) = {v}"))?;
            }
        }
    }
    Ok("limit within 1e-9, monotone on 125 points".into())
}

fn dense_coding() -> Check {
    let full = lib(dense_coding_capacity(Analyzer::Full))?;
    let partial = lib(dense_coding_capacity(Analyzer::TwoState))?;
    close("full analyzer", full, 2.0, 1e-9)?;
    close("two-state analyzer", partial, 3f64.log2(), 1e-9)?;
    Ok(format!("C = {full:.10}, {partial:.10}"))
}

fn all_plus_one(k: &[f64]) -> bool {
    k.iter().all(|v| (v - 1.0).abs() < 1e-10)
}

fn cluster() -> Check {
    let mut graphs: Vec<ClusterGraph> = (1..=10).map(ClusterGraph::chain).collect();
    graphs.extend([ClusterGraph::box4(), ClusterGraph::lattice(2, 3), ClusterGraph::lattice(2, 5), ClusterGraph::lattice(3, 3)]);
    let mut rng = ChaCha20Rng::seed_from_u64(13);
    for n in 2..=10 {
        let edges: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).filter(|_| rng.gen_bool(0.4)).collect();
        graphs.push(lib(ClusterGraph::new(n, &edges))?);
    }
    for g in &graphs {
        ensure(all_plus_one(&lib(verify_stabilizers(&lib(build_cluster(g))?, g))?), format!("stabilizers on {} qubits", g.n()))?;
    }
    let mut rules = 0;
    for n in 2..=6 {
        let g = ClusterGraph::chain(n);
        let s = lib(build_cluster(&g))?;
        for a in 0..n {
            for (basis, mb) in [(PauliBasis::X, MBasis::X), (PauliBasis::Y, MBasis::Y), (PauliBasis::Z, MBasis::Z)] {
                for out in 0..2u8 {
                    let (_, post) = lib(measure_qubit(&s, a, mb, out))?;
                    let (g2, ops) = lib(graph_rule(&g, a, basis, out))?;
                    let expect = apply_local(&lib(build_cluster(&g2))?, &ops);
                    let post = post.ok_or("zero-probability outcome on a chain")?;
                    ensure(post.same_ray(&expect, 1e-9), format!("rule {basis:?} on vertex {a} of chain {n}"))?;
                    rules += 1;
                }
            }
        }
    }
    for n in 1..=4 {
        for m in 1..=4 {
            let g = ClusterGraph::chain(n).union(&ClusterGraph::chain(m));
            let f = lib(fuse(&lib(build_cluster(&g))?, &g, n - 1, n, FusionKind::TypeI))?;
            close(&format!("fusion success for ({n}, {m})"), f.success_probability, 0.5, 1e-12)?;
            for b in f.branches.iter().filter(|b| b.success) {
                let graph = b.graph.as_ref().ok_or("missing graph")?;
                ensure(*graph == ClusterGraph::chain(n + m - 1), format!("fused ({n}, {m}) is not a {}-chain", n + m - 1))?;
                ensure(all_plus_one(&lib(verify_stabilizers(&b.corrected, graph))?), "fused stabilizers")?;
            }
        }
    }
    for marked in 0..4 {
        close(&format!("Grover label {marked}"), lib(grover_box(marked))?.success, 1.0, 1e-10)?;
    }
    for n in 2..=8 {
        let p = lib(persistency_check(&lib(build_cluster(&ClusterGraph::chain(n)))?))?;
        ensure(p.removals == n / 2, format!("chain {n}: persistency {} != ⌊n/2⌋", p.removals))?;
    }
    Ok(format!("{} graphs, {rules} rule checks, 16 fusions, Grover 4/4, persistency ⌊n/2⌋ for n ≤ 8", graphs.len()))
}

fn repeater() -> Check {
    for l in 2u64..=5 {
        for m in 1u64..=9 {
            for n in 1u32..=5 {
                let segments = l.pow(n);
                let exact = lib(resource_count(&lib(RepeaterConfig::new(segments, l, m, 0.9))?))?;
                // N^{log_L M + 1} = (L·M)^n
                ensure(exact == (l as u128 * m as u128).pow(n), format!("R({l}, {m}, {n}) = {exact}"))?;
                let law = (segments as f64).powf((m as f64).ln() / (l as f64).ln() + 1.0);
                close("power law", law, exact as f64, 1e-6 * exact as f64)?;
            }
        }
    }
    let p = 0.01;
    let link = lib(DlczLink::new(p, 1.0))?;
    let mut rng = ChaCha20Rng::seed_from_u64(17);
    let trials = 100_000;
    let mean = (0..trials).map(|_| dlcz_generate(&link, &mut rng, u64::MAX).map(|h| h.rounds as f64)).sum::<photonq::Result<f64>>().map_err(|e| e.to_string())? / trials as f64;
    let sigma = ((1.0 - p) / (p * p) / trials as f64).sqrt();
    close("DLCZ mean rounds", mean, 1.0 / p, 3.0 * sigma)?;
    let base = lib(RepeaterConfig::new(2, 2, 2, 0.95))?;
    let link = lib(DlczLink::new(0.1, 1.0))?;
    let rows = lib(sweep(&base, &[2, 4, 8, 16], &link, &mut rng, 4000))?;
    let slopes = loglog_slopes(&rows.iter().map(|r| (r.n as f64, r.mean_time)).collect::<Vec<_>>());
    ensure(slopes.iter().all(|s| s.is_finite() && *s > 0.0 && *s < 3.0), format!("repeater slopes {slopes:?}"))?;
    let spread = slopes.iter().cloned().fold(f64::MIN, f64::max) - slopes.iter().cloned().fold(f64::MAX, f64::min);
    ensure(spread < 0.5, format!("repeater slopes unstable {slopes:?}"))?;
    let direct: Vec<(f64, f64)> = [2u64, 4, 8, 16].iter().map(|&n| (n as f64, 0.1f64.powi(-(n as i32)))).collect();
    let dslopes = loglog_slopes(&direct);
    ensure(dslopes.windows(2).all(|w| w[1] > 1.5 * w[0]), format!("direct slopes {dslopes:?}"))?;
    Ok(format!("R exact on 180 configs; mean rounds {mean:.2}; slopes {:?} vs direct {:?}", round(&slopes), round(&dslopes)))
}

fn round(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| (x * 100.0).round() / 100.0).collect()
}

fn reproducibility() -> Check {
    let bin = env!("CARGO_BIN_EXE_photonq");
    let root = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance-repro");
    let ids = ["hom", "chsh", "ghz-paradox", "leggett", "teleport", "swap", "purify-lo", "grover-box", "repeater-sweep"];
    for id in ids {
        let mut outputs = Vec::new();
        for run in ["a", "b"] {
            let dir = root.join(run);
            let status = Command::new(bin)
                .args(["run", id, "--seed", "20240917", "--csv", "--out"])
                .arg(&dir)
                .output()
                .map_err(|e| e.to_string())?
                .status;
            ensure(status.success(), format!("{id} exited with {status}"))?;
            let json = std::fs::read(dir.join(format!("{id}.json"))).map_err(|e| e.to_string())?;
            let csv = std::fs::read(dir.join(format!("{id}.csv"))).map_err(|e| e.to_string())?;
            outputs.push((json, csv));
        }
        ensure(outputs[0] == outputs[1], format!("{id} output differs between runs"))?;
    }
    Ok(format!("{} experiments byte-identical", ids.len()))
}

fn main() {
    let criteria: [Criterion; 15] = [
        (1, "HOM interference", hom),
        (2, "CHSH", chsh),
        (3, "GHZ correlations", ghz_correlations),
        (4, "GHZ paradox", ghz_paradox),
        (5, "Ardehali", ardehali),
        (6, "Leggett", leggett),
        (7, "Teleportation family", teleportation),
        (8, "Entanglement swapping", swapping),
        (9, "Purification", purification),
        (10, "Multi-pair threshold", multipair),
        (11, "Four-photon visibility", v4),
        (12, "Dense coding", dense_coding),
        (13, "Cluster states and MBQC", cluster),
        (14, "Repeater", repeater),
        (15, "CLI reproducibility", reproducibility),
    ];
    let mut failed = BTreeSet::new();
    for (k, name, check) in criteria {
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS {k:>2} {name}: {detail}"),
            Err(why) => {
                let tag = if KNOWN_DEVIATIONS.contains(&k) { " (known deviation)" } else { "" };
                println!("FAIL {k:>2} {name}{tag}: {why}");
                failed.insert(k);
            }
        }
    }
    let expected: BTreeSet<u32> = KNOWN_DEVIATIONS.into_iter().collect();
    println!("{} of {} criteria pass", criteria.len() - failed.len(), criteria.len());
    if failed != expected {
        println!("failing set {failed:?} differs from the documented deviations {expected:?}");
        std::process::exit(1);
    }
}
