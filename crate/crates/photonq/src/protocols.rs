//! Communication protocols: Bell and GHZ analyzers, dense coding,
//! teleportation variants, swapping, purification, concentration and the
//! linear-optical gates.
//!
//! Corrections are returned as data ([`PauliCorrection`]); branch reports
//! carry both the raw and the corrected output.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, Matrix2, Matrix4};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fock::{CreationPoly, FockState, Mode, Pattern, Registry};
use crate::optics::{beam_splitter_paths, pbs_paths, wave_plate, Basis, Plate};
use crate::qubit::{cnot_operator, local_operator, Bell, DensityOperator, Pauli, QubitRegister};
use crate::sources::PairSource;
use crate::{C64, TOL};

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

const S2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Best classical fidelity for teleporting an unknown qubit.
pub const CLASSICAL_LIMIT: f64 = 2.0 / 3.0;

/// Best fidelity for re-preparing an unknown two-qubit state from
/// measurements on a single copy.
pub const TWO_QUBIT_ESTIMATION_LIMIT: f64 = 0.40;

/// Result of a Bell analysis; `which = None` is an inconclusive event.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BellOutcome {
    pub which: Option<Bell>,
    pub probability: f64,
}

/// Ordered Pauli operations `(qubit, Pauli)`, applied first to last.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PauliCorrection(pub Vec<(usize, Pauli)>);

impl PauliCorrection {
    pub fn none() -> Self {
        PauliCorrection(Vec::new())
    }

    /// A single-qubit correction; `Y` is written as `Z` followed by `X`.
    pub fn on(q: usize, p: Pauli) -> Self {
        match p {
            Pauli::I => PauliCorrection::none(),
            Pauli::Y => PauliCorrection(vec![(q, Pauli::Z), (q, Pauli::X)]),
            p => PauliCorrection(vec![(q, p)]),
        }
    }

    pub fn then(mut self, other: PauliCorrection) -> Self {
        self.0.extend(other.0);
        self
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().all(|(_, p)| *p == Pauli::I)
    }

    pub fn apply(&self, s: &QubitRegister) -> QubitRegister {
        self.0.iter().fold(s.clone(), |s, &(q, p)| s.apply_pauli(q, p))
    }

    /// Compact label such as `"x1 z1"`; empty for the identity.
    pub fn label(&self) -> String {
        self.0
            .iter()
            .filter(|(_, p)| *p != Pauli::I)
            .map(|(q, p)| format!("{}{}", format!("{p:?}").to_lowercase(), q))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Pauli `P` with `P·m ∝ I`, if any.
fn undo(m: &Matrix2<C64>) -> Option<Pauli> {
    Pauli::ALL.into_iter().find(|p| proportional_to_identity(&(p.matrix() * m)))
}

fn proportional_to_identity(m: &Matrix2<C64>) -> bool {
    let scale = m[(0, 0)];
    scale.norm() > 1e-9 && m[(0, 1)].norm() < 1e-9 && m[(1, 0)].norm() < 1e-9 && (m[(1, 1)] - scale).norm() < 1e-9
}

fn check_single(input: &QubitRegister) -> Result<()> {
    if input.n() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, found: input.n() });
    }
    Ok(())
}

fn check_normalized(input: &QubitRegister) -> Result<()> {
    let n = input.norm();
    if (n - 1.0).abs() > TOL {
        return Err(Error::NotNormalized(n));
    }
    Ok(())
}

fn fidelity(a: &QubitRegister, b: &QubitRegister) -> f64 {
    a.overlap(b).powi(2)
}

fn pol(path: &str) -> Vec<Mode> {
    vec![Mode::h(path), Mode::v(path)]
}

fn hwp_22(path: &str) -> Result<crate::fock::ModeMap> {
    wave_plate(Mode::pair(path), Plate::Half, PI / 8.0)
}

fn require_photons(state: &FockState, n: u32) -> Result<()> {
    if state.photon_numbers() != [n] {
        return Err(invalid("state", format!("input is not in the {n}-photon sector")));
    }
    Ok(())
}

/// Label of the fired detectors, e.g. `"H1 V2"`.
fn signature(counts: &[u8], names: &[&str]) -> String {
    counts
        .iter()
        .zip(names)
        .filter(|(&k, _)| k > 0)
        .map(|(&k, n)| if k == 1 { n.to_string() } else { format!("{k}x{n}") })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Bell analysis with detector-level detail.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BellAnalysis {
    pub outcomes: Vec<BellOutcome>,
    /// Probability of each detector signature.
    pub signatures: Vec<(String, f64)>,
}

impl BellAnalysis {
    pub fn probability(&self, which: Option<Bell>) -> f64 {
        self.outcomes.iter().filter(|o| o.which == which).map(|o| o.probability).sum()
    }

    /// Conclusive label with probability 1, if any.
    pub fn certain(&self) -> Option<Bell> {
        self.outcomes.iter().find(|o| o.which.is_some() && (o.probability - 1.0).abs() < 1e-9).and_then(|o| o.which)
    }
}

fn collect_outcomes(map: BTreeMap<Option<Bell>, f64>) -> Vec<BellOutcome> {
    map.into_iter().map(|(which, probability)| BellOutcome { which, probability }).collect()
}

/// PBS analyzer on paths "1" and "2": a PBS, a 22.5° half-wave plate in each
/// output and H/V detectors. Identifies φ⁺ and φ⁻; ψ± give no coincidence.
pub fn linear_bell_analysis(state: &FockState) -> Result<BellAnalysis> {
    require_photons(state, 2)?;
    let reg = Registry::polarized(&["1", "2", "1o", "2o"]);
    let s = state
        .embed(&reg)?
        .apply_all(&[pbs_paths("1", "2", "1o", "2o", Basis::Rectilinear)?, hwp_22("1o")?, hwp_22("2o")?])?;
    let dets = [Mode::h("1o"), Mode::v("1o"), Mode::h("2o"), Mode::v("2o")];
    let mut outcomes = BTreeMap::new();
    let mut signatures = Vec::new();
    for (k, p) in s.marginal(&dets)? {
        let which = match k.as_slice() {
            [1, 0, 1, 0] | [0, 1, 0, 1] => Some(Bell::PhiPlus),
            [1, 0, 0, 1] | [0, 1, 1, 0] => Some(Bell::PhiMinus),
            _ => None,
        };
        *outcomes.entry(which).or_insert(0.0) += p;
        signatures.push((signature(&k, &["H1", "V1", "H2", "V2"]), p));
    }
    Ok(BellAnalysis { outcomes: collect_outcomes(outcomes), signatures })
}

/// Beam-splitter analyzer on paths "1" and "2" with polarization-resolving
/// detectors: ψ⁻ exits through different ports, ψ⁺ through one port with
/// orthogonal polarizations, φ± are not separated.
pub fn bs_bell_analysis(state: &FockState) -> Result<BellAnalysis> {
    require_photons(state, 2)?;
    let reg = Registry::polarized(&["1", "2", "c", "d"]);
    let s = state.embed(&reg)?.apply(&beam_splitter_paths("1", "2", "c", "d")?)?;
    let dets = [Mode::h("c"), Mode::v("c"), Mode::h("d"), Mode::v("d")];
    let mut outcomes = BTreeMap::new();
    let mut signatures = Vec::new();
    for (k, p) in s.marginal(&dets)? {
        let (nc, nd) = (k[0] + k[1], k[2] + k[3]);
        let which = match (nc, nd) {
            (1, 1) => Some(Bell::PsiMinus),
            (2, 0) if k[0] == 1 => Some(Bell::PsiPlus),
            (0, 2) if k[2] == 1 => Some(Bell::PsiPlus),
            _ => None,
        };
        *outcomes.entry(which).or_insert(0.0) += p;
        signatures.push((signature(&k, &["Hc", "Vc", "Hd", "Vd"]), p));
    }
    Ok(BellAnalysis { outcomes: collect_outcomes(outcomes), signatures })
}

/// Conclusive classes of the three-photon analyzer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum GhzLabel {
    /// `(HHH + VVV)/√2`.
    PhiPlus,
    /// `(HHH − VVV)/√2`.
    PhiMinus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GhzAnalysis {
    pub outcomes: Vec<(Option<GhzLabel>, f64)>,
    pub signatures: Vec<(String, f64)>,
}

impl GhzAnalysis {
    pub fn probability(&self, which: Option<GhzLabel>) -> f64 {
        self.outcomes.iter().filter(|o| o.0 == which).map(|o| o.1).sum()
    }
}

/// Three-photon analyzer on paths "1", "2", "3": two PBSs in series and a
/// 22.5° half-wave plate before each detector pair. A three-fold
/// coincidence with an odd number of H clicks means Φ₀⁺, even means Φ₀⁻.
pub fn ghz_analysis(state: &FockState) -> Result<GhzAnalysis> {
    require_photons(state, 3)?;
    let reg = Registry::polarized(&["1", "2", "3", "bc", "o1", "o2", "o3"]);
    let s = state.embed(&reg)?.apply_all(&[
        pbs_paths("1", "2", "o1", "bc", Basis::Rectilinear)?,
        pbs_paths("bc", "3", "o2", "o3", Basis::Rectilinear)?,
        hwp_22("o1")?,
        hwp_22("o2")?,
        hwp_22("o3")?,
    ])?;
    let dets: Vec<Mode> = ["o1", "o2", "o3"].iter().flat_map(|p| pol(p)).collect();
    let mut outcomes = BTreeMap::new();
    let mut signatures = Vec::new();
    for (k, p) in s.marginal(&dets)? {
        let threefold = (0..3).all(|i| k[2 * i] + k[2 * i + 1] == 1);
        let which = if threefold {
            let h = (0..3).filter(|i| k[2 * i] == 1).count();
            Some(if h % 2 == 1 { GhzLabel::PhiPlus } else { GhzLabel::PhiMinus })
        } else {
            None
        };
        *outcomes.entry(which).or_insert(0.0) += p;
        signatures.push((signature(&k, &["H1", "V1", "H2", "V2", "H3", "V3"]), p));
    }
    Ok(GhzAnalysis { outcomes: outcomes.into_iter().collect(), signatures })
}

/// Bell measurement available to the receiver.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Analyzer {
    /// Ideal projection onto all four Bell states.
    Full,
    /// Beam-splitter analyzer separating ψ⁺, ψ⁻ and {φ⁺, φ⁻}.
    TwoState,
}

/// Pauli Bob applies for a two-bit message: 11 → I, 10 → x̂, 01 → ŷ, 00 → ẑ.
pub fn encoding_operation(message: u8) -> Result<Pauli> {
    Ok(match message {
        0b11 => Pauli::I,
        0b10 => Pauli::X,
        0b01 => Pauli::Y,
        0b00 => Pauli::Z,
        m => return Err(invalid("message", format!("{m} is not a two-bit value"))),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseCoding {
    pub message: u8,
    /// Bell state arriving at the analyzer.
    pub sent: Bell,
    pub decoded: Vec<BellOutcome>,
}

/// Encodes `message` on Bob's half of a shared ψ⁺ and decodes it.
pub fn dense_coding(message: u8, analyzer: Analyzer) -> Result<DenseCoding> {
    let op = encoding_operation(message)?;
    let state = Bell::PsiPlus.state().apply_pauli(1, op);
    let (sent, _) = Bell::closest(&state);
    let decoded = match analyzer {
        Analyzer::Full => Bell::ALL
            .iter()
            .map(|&b| BellOutcome { which: Some(b), probability: b.state().overlap(&state).powi(2) })
            .filter(|o| o.probability > 1e-15)
            .collect(),
        Analyzer::TwoState => {
            let reg = Registry::polarized(&["1", "2"]);
            let f = FockState::from_qubits(&state, &[Mode::pair("1"), Mode::pair("2")], &reg)?;
            bs_bell_analysis(&f)?.outcomes
        }
    };
    Ok(DenseCoding { message, sent, decoded })
}

/// Transition matrix `P(y | message)` of the dense-coding channel; rows
/// follow messages 11, 10, 01, 00 and columns the returned outcome list.
pub fn dense_coding_channel(analyzer: Analyzer) -> Result<(Vec<Option<Bell>>, Vec<Vec<f64>>)> {
    let runs = [0b11u8, 0b10, 0b01, 0b00].iter().map(|&m| dense_coding(m, analyzer)).collect::<Result<Vec<_>>>()?;
    let mut labels: Vec<Option<Bell>> = runs.iter().flat_map(|r| r.decoded.iter().map(|o| o.which)).collect();
    labels.sort();
    labels.dedup();
    let rows = runs
        .iter()
        .map(|r| {
            labels
                .iter()
                .map(|l| r.decoded.iter().filter(|o| o.which == *l).map(|o| o.probability).sum())
                .collect()
        })
        .collect();
    Ok((labels, rows))
}

/// Capacity in bits of a discrete memoryless channel (Blahut–Arimoto).
pub fn channel_capacity(p: &[Vec<f64>]) -> Result<f64> {
    let nx = p.len();
    if nx == 0 {
        return Err(invalid("channel", "no inputs"));
    }
    let ny = p[0].len();
    for row in p {
        if row.len() != ny {
            return Err(Error::DimensionMismatch { expected: ny, found: row.len() });
        }
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > 1e-9 || row.iter().any(|&x| x < 0.0) {
            return Err(invalid("channel", "rows must be probability vectors"));
        }
    }
    let mut r = vec![1.0 / nx as f64; nx];
    let divergences = |r: &[f64]| -> Vec<f64> {
        let q: Vec<f64> = (0..ny).map(|y| (0..nx).map(|x| r[x] * p[x][y]).sum()).collect();
        (0..nx)
            .map(|x| (0..ny).filter(|&y| p[x][y] > 0.0).map(|y| p[x][y] * (p[x][y] / q[y]).log2()).sum())
            .collect()
    };
    for _ in 0..100_000 {
        let d = divergences(&r);
        let lower: f64 = r.iter().zip(&d).map(|(a, b)| a * b).sum();
        let upper = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if upper - lower < 1e-13 {
            return Ok(lower);
        }
        let w: Vec<f64> = r.iter().zip(&d).map(|(a, b)| a * b.exp2()).collect();
        let z: f64 = w.iter().sum();
        r = w.iter().map(|x| x / z).collect();
    }
    let d = divergences(&r);
    Ok(r.iter().zip(&d).map(|(a, b)| a * b).sum())
}

pub fn dense_coding_capacity(analyzer: Analyzer) -> Result<f64> {
    channel_capacity(&dense_coding_channel(analyzer)?.1)
}

/// Map `M_k = ⟨B_k|₁₂ |R⟩₂₃` from the input qubit to the receiver's qubit.
fn teleport_map(outcome: Bell, resource: Bell) -> Result<Matrix2<C64>> {
    let mut m = Matrix2::zeros();
    for i in 0..2 {
        let s = QubitRegister::basis(1, i)?.tensor(&resource.state())?;
        let col = s.contract(&[0, 1], &outcome.state())?;
        m[(0, i)] = col[0];
        m[(1, i)] = col[1];
    }
    Ok(m)
}

/// Correction for a Bell outcome `outcome` when the shared pair is `resource`.
pub fn teleport_correction(outcome: Bell, resource: Bell) -> Result<Pauli> {
    undo(&teleport_map(outcome, resource)?).ok_or_else(|| Error::Infeasible("no Pauli undoes the teleportation map".into()))
}

/// Which Bell outcomes the sender can identify.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BsmMode {
    Full,
    /// Only ψ⁻ is identified (the two-photon interference signature).
    ConclusiveOnly,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TeleportBranch {
    /// `None` for the merged inconclusive events.
    pub outcome: Option<Bell>,
    pub probability: f64,
    pub correction: PauliCorrection,
    pub output: Option<QubitRegister>,
    pub corrected: Option<QubitRegister>,
    pub fidelity: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Teleportation {
    pub branches: Vec<TeleportBranch>,
    pub success_probability: f64,
    /// Fidelity averaged over successful branches.
    pub fidelity: f64,
    pub classical_limit: f64,
}

/// Teleports `input` (qubit 1) through `resource` on qubits 2, 3.
pub fn teleport(input: &QubitRegister, resource: Bell, mode: BsmMode) -> Result<Teleportation> {
    check_single(input)?;
    check_normalized(input)?;
    let full = input.tensor(&resource.state())?;
    let mut branches = Vec::new();
    let mut lost = 0.0;
    for b in Bell::ALL {
        let (p, out) = full.project_onto(&[0, 1], &b.state())?;
        if mode == BsmMode::ConclusiveOnly && b != Bell::PsiMinus {
            lost += p;
            continue;
        }
        let correction = PauliCorrection::on(0, teleport_correction(b, resource)?);
        let corrected = out.as_ref().map(|o| correction.apply(o));
        let fid = corrected.as_ref().map(|o| fidelity(o, input));
        branches.push(TeleportBranch { outcome: Some(b), probability: p, correction, output: out, corrected, fidelity: fid });
    }
    if mode == BsmMode::ConclusiveOnly {
        branches.push(TeleportBranch {
            outcome: None,
            probability: lost,
            correction: PauliCorrection::none(),
            output: None,
            corrected: None,
            fidelity: None,
        });
    }
    let ok: Vec<&TeleportBranch> = branches.iter().filter(|b| b.outcome.is_some()).collect();
    let success: f64 = ok.iter().map(|b| b.probability).sum();
    let fid = ok.iter().map(|b| b.probability * b.fidelity.unwrap_or(0.0)).sum::<f64>() / success;
    Ok(Teleportation { branches, success_probability: success, fidelity: fid, classical_limit: CLASSICAL_LIMIT })
}

/// Single-photon Bell states over (path, polarization) of one photon.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PathPolBell {
    /// `(a V + b H)/√2`.
    PsiPlus,
    /// `(a H + b V)/√2`.
    PsiMinus,
    /// `(a H − b V)/√2`.
    PhiPlus,
    /// `(a V − b H)/√2`.
    PhiMinus,
}

impl PathPolBell {
    pub const ALL: [PathPolBell; 4] = [PathPolBell::PsiPlus, PathPolBell::PsiMinus, PathPolBell::PhiPlus, PathPolBell::PhiMinus];

    /// Two-qubit vector, path qubit first (a = 0), then polarization (H = 0).
    pub fn state(self) -> QubitRegister {
        let (i, j, sign) = match self {
            PathPolBell::PsiPlus => (1, 2, 1.0),
            PathPolBell::PsiMinus => (0, 3, 1.0),
            PathPolBell::PhiPlus => (0, 3, -1.0),
            PathPolBell::PhiMinus => (1, 2, -1.0),
        };
        let mut a = vec![C64::default(); 4];
        a[i] = c(S2, 0.0);
        a[j] = c(S2 * sign, 0.0);
        QubitRegister::new(a).expect("normalized")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RomeBranch {
    pub outcome: PathPolBell,
    pub probability: f64,
    /// Bob's path qubit (a₂ = 0, b₂ = 1) before correction.
    pub bob: QubitRegister,
    pub correction: PauliCorrection,
    pub fidelity: f64,
}

/// Two-particle teleportation: the path pair `(a₁a₂ + b₁b₂)/√2` is shared
/// and the polarization `χ = α H + β V` of photon 1 is teleported onto the
/// path of photon 2 by a complete single-photon Bell measurement.
pub fn teleport_rome(alpha: C64, beta: C64) -> Result<Vec<RomeBranch>> {
    let chi = QubitRegister::new(vec![alpha, beta])?;
    // qubits: path 1, path 2, polarization 1
    let paths = Bell::PhiPlus.state();
    let full = paths.tensor(&chi)?.permute(&[0, 2, 1]);
    PathPolBell::ALL
        .iter()
        .map(|&k| {
            let (p, bob) = full.project_onto(&[0, 1], &k.state())?;
            let bob = bob.ok_or_else(|| Error::Infeasible("zero-probability outcome".into()))?;
            let mut m = Matrix2::zeros();
            for i in 0..2 {
                let s = paths.tensor(&QubitRegister::basis(1, i)?)?.permute(&[0, 2, 1]);
                let col = s.contract(&[0, 1], &k.state())?;
                m[(0, i)] = col[0];
                m[(1, i)] = col[1];
            }
            let pauli = undo(&m).ok_or_else(|| Error::Infeasible("no Pauli correction".into()))?;
            let correction = PauliCorrection::on(0, pauli);
            let fid = fidelity(&correction.apply(&bob), &chi);
            Ok(RomeBranch { outcome: k, probability: p, bob, correction, fidelity: fid })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncodingBranch {
    pub outcome: Bell,
    pub probability: f64,
    /// Acts on photons 3, 4, 5 as qubits 0, 1, 2.
    pub correction: PauliCorrection,
    /// `α|HHH⟩ + β|VVV⟩` after correction.
    pub encoded: QubitRegister,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReadoutBranch {
    pub outcome: Bell,
    /// ±45° results of the two other photons (0 = +, 1 = −).
    pub signs: (usize, usize),
    pub probability: f64,
    pub correction: PauliCorrection,
    pub output: QubitRegister,
    pub fidelity: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OpenDestination {
    pub encoding: Vec<EncodingBranch>,
    pub readout: Vec<ReadoutBranch>,
    pub min_fidelity: f64,
}

/// Teleportation onto a four-photon GHZ resource on photons 2–5 with the
/// receiver (3, 4 or 5) chosen after the Bell measurement on (1, 2).
pub fn teleport_open_destination(input: &QubitRegister, receiver: usize) -> Result<OpenDestination> {
    check_single(input)?;
    check_normalized(input)?;
    if !(3..=5).contains(&receiver) {
        return Err(invalid("receiver", format!("photon {receiver} is not one of 3, 4, 5")));
    }
    let (alpha, beta) = (input.amplitudes()[0], input.amplitudes()[1]);
    let mut target = vec![C64::default(); 8];
    target[0] = alpha;
    target[7] = beta;
    let target = QubitRegister::new(target)?;
    let full = input.tensor(&QubitRegister::ghz(4)?)?;
    let candidates = [
        PauliCorrection::none(),
        PauliCorrection::on(0, Pauli::Z),
        PauliCorrection(vec![(0, Pauli::X), (1, Pauli::X), (2, Pauli::X)]),
        PauliCorrection(vec![(0, Pauli::Z), (0, Pauli::X), (1, Pauli::X), (2, Pauli::X)]),
    ];
    let diag = Basis::Diagonal.matrix();
    let r = receiver - 3;
    let others: Vec<usize> = (0..3).filter(|&q| q != r).collect();
    let mut encoding = Vec::new();
    let mut readout = Vec::new();
    for b in Bell::ALL {
        let (p, rest) = full.project_onto(&[0, 1], &b.state())?;
        let rest = rest.ok_or_else(|| Error::Infeasible("zero-probability outcome".into()))?;
        let correction = candidates
            .iter()
            .find(|k| k.apply(&rest).same_ray(&target, 1e-9) || k.apply(&rest).overlap(&target) > 1.0 - 1e-9)
            .cloned()
            .ok_or_else(|| Error::Infeasible("no GHZ-frame correction".into()))?;
        let encoded = correction.apply(&rest);
        for s1 in 0..2 {
            for s2 in 0..2 {
                // measure the higher index first so the lower one keeps its position
                let (p2, a) = encoded.measure(others[1], &diag, s2);
                let a = a.ok_or_else(|| Error::Infeasible("zero-probability readout".into()))?;
                let (p1, out) = a.measure(others[0], &diag, s1);
                let out = out.ok_or_else(|| Error::Infeasible("zero-probability readout".into()))?;
                let fix = if s1 ^ s2 == 1 { Pauli::Z } else { Pauli::I };
                let fix = PauliCorrection::on(0, fix);
                let fid = fidelity(&fix.apply(&out), input);
                readout.push(ReadoutBranch {
                    outcome: b,
                    signs: (s1, s2),
                    probability: p * p1 * p2,
                    correction: fix,
                    output: out,
                    fidelity: fid,
                });
            }
        }
        encoding.push(EncodingBranch { outcome: b, probability: p, correction, encoded });
    }
    let min_fidelity = readout.iter().map(|b| b.fidelity).fold(1.0, f64::min);
    Ok(OpenDestination { encoding, readout, min_fidelity })
}

#[derive(Clone, Debug, PartialEq)]
pub struct TwoQubitBranch {
    /// Outcomes of the Bell measurements on (1, 3) and (2, 4).
    pub outcomes: (Bell, Bell),
    pub probability: f64,
    /// Acts on photons 5 and 6 as qubits 0 and 1.
    pub correction: PauliCorrection,
    pub corrected: QubitRegister,
    pub fidelity: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TwoQubitTeleportation {
    pub branches: Vec<TwoQubitBranch>,
    pub fidelity: f64,
    /// Averaged corrected output on photons 5 and 6.
    pub output: DensityOperator,
    /// ψ⁻ fidelity of the output from local correlations.
    pub singlet_fidelity_local: f64,
    pub estimation_limit: f64,
}

/// `⟨ψ⁻|ρ|ψ⁻⟩ = ¼(1 − ⟨x̂x̂⟩ − ⟨ŷŷ⟩ − ⟨ẑẑ⟩)`.
pub fn singlet_fidelity_local(rho: &DensityOperator) -> Result<f64> {
    if rho.n() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: rho.n() });
    }
    let mut s = 1.0;
    for p in [Pauli::X, Pauli::Y, Pauli::Z] {
        s -= rho.expectation(&crate::qubit::pauli_string(&[p, p]))?.re;
    }
    Ok(s / 4.0)
}

/// Teleports photons 1, 2 over the pairs φ⁺₃₅ and φ⁺₄₆.
pub fn teleport_two_qubit(input: &QubitRegister) -> Result<TwoQubitTeleportation> {
    if input.n() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: input.n() });
    }
    check_normalized(input)?;
    // qubit order 1, 2, 3, 4, 5, 6 with pairs (3, 5) and (4, 6)
    let pairs = Bell::PhiPlus.state().tensor(&Bell::PhiPlus.state())?.permute(&[0, 2, 1, 3]);
    let full = input.tensor(&pairs)?;
    let mut branches = Vec::new();
    let mut rho = DMatrix::<C64>::zeros(4, 4);
    for b1 in Bell::ALL {
        for b2 in Bell::ALL {
            let target = b1.state().tensor(&b2.state())?;
            let (p, out) = full.project_onto(&[0, 2, 1, 3], &target)?;
            let Some(out) = out else { continue };
            let correction = PauliCorrection::on(0, teleport_correction(b1, Bell::PhiPlus)?)
                .then(PauliCorrection::on(1, teleport_correction(b2, Bell::PhiPlus)?));
            let corrected = correction.apply(&out);
            let v = nalgebra::DVector::from_column_slice(corrected.amplitudes());
            rho += (&v * v.adjoint()) * c(p, 0.0);
            let fid = fidelity(&corrected, input);
            branches.push(TwoQubitBranch { outcomes: (b1, b2), probability: p, correction, corrected, fidelity: fid });
        }
    }
    let output = DensityOperator::new(rho)?;
    let fid = output.fidelity(input)?;
    let local = singlet_fidelity_local(&output)?;
    Ok(TwoQubitTeleportation {
        branches,
        fidelity: fid,
        output,
        singlet_fidelity_local: local,
        estimation_limit: TWO_QUBIT_ESTIMATION_LIMIT,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SwapBranch {
    pub outcome: Bell,
    pub probability: f64,
    /// State of photons 1 and 4.
    pub state: QubitRegister,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Swap {
    pub branches: Vec<SwapBranch>,
    /// Reduced state of (1, 4) averaged over unknown outcomes.
    pub unconditioned: DensityOperator,
}

/// Bell measurement on photons 2 and 3 of `ψ⁻₁₂ ⊗ ψ⁻₃₄`.
pub fn entanglement_swap() -> Result<Swap> {
    let full = Bell::PsiMinus.state().tensor(&Bell::PsiMinus.state())?;
    let mut branches = Vec::new();
    let mut rho = DMatrix::<C64>::zeros(4, 4);
    for b in Bell::ALL {
        let (p, out) = full.project_onto(&[1, 2], &b.state())?;
        let state = out.ok_or_else(|| Error::Infeasible("zero-probability outcome".into()))?;
        let v = nalgebra::DVector::from_column_slice(state.amplitudes());
        rho += (&v * v.adjoint()) * c(p, 0.0);
        branches.push(SwapBranch { outcome: b, probability: p, state });
    }
    Ok(Swap { branches, unconditioned: DensityOperator::new(rho)? })
}

/// Four-photon visibility of the swapped pair when both sources emit with
/// pair amplitude `z`.
pub fn entanglement_swap_multipair(z: C64) -> Result<f64> {
    crate::sources::multipair_visibility(z)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Purification {
    pub fidelity: f64,
    pub success_probability: f64,
}

fn check_purifiable(f: f64) -> Result<()> {
    if !(f > 0.5 && f <= 1.0) {
        return Err(invalid("F", format!("{f} is not in (1/2, 1]; not purifiable by this map")));
    }
    Ok(())
}

/// Closed-form BBPSSW map for a Werner input of fidelity `f`.
pub fn bbpssw_closed_form(f: f64) -> Purification {
    let g = 1.0 - f;
    let num = f * f + g * g / 9.0;
    let den = f * f + 2.0 * f * g / 3.0 + 5.0 * g * g / 9.0;
    Purification { fidelity: num / den, success_probability: den }
}

/// The twelve rotations of the tetrahedral group as SU(2) matrices.
pub fn tetrahedral_rotations() -> Vec<Matrix2<C64>> {
    let i = c(0.0, 1.0);
    let id = Pauli::I.matrix();
    let mut out = vec![id];
    for p in [Pauli::X, Pauli::Y, Pauli::Z] {
        out.push(p.matrix() * (-i));
    }
    for s in 0..8 {
        let sign = |k: usize| if s >> k & 1 == 1 { -1.0 } else { 1.0 };
        let axis = Pauli::X.matrix() * c(sign(0), 0.0) + Pauli::Y.matrix() * c(sign(1), 0.0) + Pauli::Z.matrix() * c(sign(2), 0.0);
        out.push((id - axis * i) * c(0.5, 0.0));
    }
    out
}

/// Average of `(U⊗U) ρ (U⊗U)†` over the tetrahedral rotations.
pub fn twirl(rho: &DensityOperator) -> Result<DensityOperator> {
    if rho.n() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: rho.n() });
    }
    let rots = tetrahedral_rotations();
    let mut m = DMatrix::<C64>::zeros(4, 4);
    for u in &rots {
        let uu = local_operator(&[Some(*u), Some(*u)]);
        m += &uu * rho.matrix() * uu.adjoint();
    }
    DensityOperator::new(m / c(rots.len() as f64, 0.0))
}

fn projected(rho: &DMatrix<C64>, proj: &DMatrix<C64>) -> DMatrix<C64> {
    proj * rho * proj
}

fn z_projector(n: usize, q: usize, outcome: usize) -> DMatrix<C64> {
    let mut ops = vec![None; n];
    let mut p = Matrix2::zeros();
    p[(outcome, outcome)] = c(1.0, 0.0);
    ops[q] = Some(p);
    local_operator(&ops)
}

/// One BBPSSW round on two copies of a two-qubit state (ψ⁻ frame): twirl,
/// ŷ on Alice, bilateral CNOT, Z-measurement of the target pair, keep on
/// agreement, ŷ back. Returns the ψ⁻ fidelity and the surviving state.
pub fn purify_bbpssw_state(rho: &DensityOperator) -> Result<(Purification, DensityOperator)> {
    let w = twirl(rho)?;
    let y_a = local_operator(&[Some(Pauli::Y.matrix()), None]);
    let w = w.conjugate(&y_a)?;
    // qubits A1 B1 A2 B2
    let pair = w.tensor(&w)?;
    let bcnot = cnot_operator(4, 1, 3) * cnot_operator(4, 0, 2);
    let after = pair.conjugate(&bcnot)?;
    let mut kept = DMatrix::<C64>::zeros(16, 16);
    for k in 0..2 {
        let proj = z_projector(4, 2, k) * z_projector(4, 3, k);
        kept += projected(after.matrix(), &proj);
    }
    let p = kept.trace().re;
    if p < 1e-15 {
        return Err(Error::Infeasible("purification never succeeds on this input".into()));
    }
    let survivors = DensityOperator::new(kept / c(p, 0.0))?.partial_trace(&[0, 1])?.conjugate(&y_a)?;
    let f = survivors.fidelity(&Bell::PsiMinus.state())?;
    Ok((Purification { fidelity: f, success_probability: p }, survivors))
}

/// BBPSSW on `F|ψ⁻⟩⟨ψ⁻| + (1 − F)|ψ⁺⟩⟨ψ⁺|`, which the twirl brings to
/// Werner form.
pub fn purify_bbpssw(f: f64) -> Result<Purification> {
    check_purifiable(f)?;
    let rho = DensityOperator::mixture(&[
        (f, &Bell::PsiMinus.state().density()),
        (1.0 - f, &Bell::PsiPlus.state().density()),
    ])?;
    Ok(purify_bbpssw_state(&rho)?.0)
}

/// `F|φ⁺⟩⟨φ⁺| + (1 − F)|ψ⁻⟩⟨ψ⁻|`.
pub fn lo_working_state(f: f64) -> Result<DensityOperator> {
    if !(0.0..=1.0).contains(&f) {
        return Err(invalid("F", format!("{f} outside [0, 1]")));
    }
    DensityOperator::mixture(&[(f, &Bell::PhiPlus.state().density()), (1.0 - f, &Bell::PsiMinus.state().density())])
}

/// `F²/[F² + (1 − F)²]`.
pub fn linear_optical_closed_form(f: f64) -> Purification {
    let g = 1.0 - f;
    Purification { fidelity: f * f / (f * f + g * g), success_probability: 0.5 * (f * f + g * g) }
}

/// Linear-optical purification of two copies of `rho` (φ⁺ frame): a PBS
/// at each side, four-mode selection, ±45° measurement of a4 and b4 and a
/// ẑ on a3 when the results differ.
pub fn purify_linear_optical_state(rho: &DensityOperator) -> Result<(Purification, DensityOperator)> {
    if rho.n() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: rho.n() });
    }
    // qubits a1 b1 a2 b2; the PBS keeps equal polarizations on each side
    let pair = rho.tensor(rho)?;
    let mut parity = DMatrix::<C64>::zeros(16, 16);
    for i in 0..16usize {
        let bit = |q: usize| (i >> (3 - q)) & 1;
        if bit(0) == bit(2) && bit(1) == bit(3) {
            parity[(i, i)] = c(1.0, 0.0);
        }
    }
    let selected = projected(pair.matrix(), &parity);
    let p = selected.trace().re;
    if p < 1e-15 {
        return Err(Error::Infeasible("no four-mode events".into()));
    }
    let diag = Basis::Diagonal.matrix();
    let dproj = |q: usize, k: usize| {
        let v = nalgebra::Vector2::new(diag[(0, k)], diag[(1, k)]);
        let mut ops = vec![None; 4];
        ops[q] = Some(v * v.adjoint());
        local_operator(&ops)
    };
    let mut out = DMatrix::<C64>::zeros(16, 16);
    for s in 0..2 {
        for t in 0..2 {
            let proj = dproj(2, s) * dproj(3, t);
            let mut m = projected(&selected, &proj);
            if s != t {
                let z = local_operator(&[Some(Pauli::Z.matrix()), None, None, None]);
                m = &z * m * z.adjoint();
            }
            out += m;
        }
    }
    let survivors = DensityOperator::new(out / c(p, 0.0))?.partial_trace(&[0, 1])?;
    let f = survivors.fidelity(&Bell::PhiPlus.state())?;
    Ok((Purification { fidelity: f, success_probability: p }, survivors))
}

pub fn purify_linear_optical(f: f64) -> Result<Purification> {
    check_purifiable(f)?;
    Ok(purify_linear_optical_state(&lo_working_state(f)?)?.0)
}

const LO_PATHS: [&str; 8] = ["a1", "b1", "a2", "b2", "a3", "a4", "b3", "b4"];

fn lo_registry() -> Arc<Registry> {
    Registry::polarized(&LO_PATHS)
}

fn two_pairs(reg: &Arc<Registry>, pair1: Bell, pair2: Bell) -> Result<FockState> {
    let s1 = PairSource::polarization(pair1, C64::default(), "a1", "b1")?.pair_creator(reg)?;
    let s2 = PairSource::polarization(pair2, C64::default(), "a2", "b2")?.pair_creator(reg)?;
    Ok(s1.mul(&s2).to_state(4).normalized())
}

fn four_mode_pattern() -> Pattern {
    Pattern::one_per(&[pol("a3"), pol("a4"), pol("b3"), pol("b4")])
}

fn lo_pbs(state: &FockState) -> Result<FockState> {
    state.apply_all(&[
        pbs_paths("a1", "a2", "a3", "a4", Basis::Rectilinear)?,
        pbs_paths("b1", "b2", "b3", "b4", Basis::Rectilinear)?,
    ])
}

/// Probability of one photon in each of a3, a4, b3, b4 for the pure input
/// `pair1 ⊗ pair2` at the Fock level.
pub fn four_mode_probability(pair1: Bell, pair2: Bell) -> Result<f64> {
    let reg = lo_registry();
    lo_pbs(&two_pairs(&reg, pair1, pair2)?)?.probability(&four_mode_pattern())
}

/// Fock-level run of the linear-optical scheme on the working state,
/// treated as the ensemble of its four pure two-pair combinations.
pub fn purify_linear_optical_fock(f: f64) -> Result<Purification> {
    check_purifiable(f)?;
    let reg = lo_registry();
    let g = 1.0 - f;
    let combos = [
        (f * f, Bell::PhiPlus, Bell::PhiPlus),
        (f * g, Bell::PhiPlus, Bell::PsiMinus),
        (g * f, Bell::PsiMinus, Bell::PhiPlus),
        (g * g, Bell::PsiMinus, Bell::PsiMinus),
    ];
    let (mut success, mut good) = (0.0, 0.0);
    for (w, p1, p2) in combos {
        let s = lo_pbs(&two_pairs(&reg, p1, p2)?)?;
        let sel = s.postselect(&four_mode_pattern())?;
        let Some(s) = sel.state else { continue };
        let s = s.apply_all(&[hwp_22("a4")?, hwp_22("b4")?])?;
        for x in 0..2u8 {
            for y in 0..2u8 {
                let counts = [(Mode::h("a4"), 1 - x), (Mode::v("a4"), x), (Mode::h("b4"), 1 - y), (Mode::v("b4"), y)];
                let refs: Vec<(&Mode, u8)> = counts.iter().map(|(m, k)| (m, *k)).collect();
                let d = s.detect(&refs)?;
                let Some(rest) = d.state else { continue };
                let mut q = rest.to_qubits(&[Mode::pair("a3"), Mode::pair("b3")])?;
                if x != y {
                    q = q.apply_pauli(0, Pauli::Z);
                }
                let weight = w * sel.probability * d.probability;
                success += weight;
                good += weight * fidelity(&q, &Bell::PhiPlus.state());
            }
        }
    }
    Ok(Purification { fidelity: good / success, success_probability: success })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Concentration {
    pub success_probability: f64,
    /// Local filter applied to qubit 0.
    pub filter: [[C64; 2]; 2],
    pub output: QubitRegister,
    /// Fidelity with ψ⁺.
    pub fidelity: f64,
}

/// Procrustean filtering of `α|HV⟩ + β|VH⟩` with known coefficients.
pub fn concentrate_procrustean(alpha: C64, beta: C64) -> Result<Concentration> {
    let n = alpha.norm_sqr() + beta.norm_sqr();
    if (n - 1.0).abs() > 1e-9 {
        return Err(Error::NotNormalized(n.sqrt()));
    }
    if alpha.norm() < 1e-12 || beta.norm() < 1e-12 {
        return Err(Error::Infeasible("product state cannot be concentrated".into()));
    }
    let m = alpha.norm().min(beta.norm());
    let f0 = C64::from_polar(m / alpha.norm(), -alpha.arg());
    let f1 = C64::from_polar(m / beta.norm(), -beta.arg());
    let state = QubitRegister::new(vec![C64::default(), alpha, beta, C64::default()])?;
    let filter = Matrix2::new(f0, C64::default(), C64::default(), f1);
    let filtered = state.apply_1q(0, &filter);
    let p = filtered.norm().powi(2);
    let output = QubitRegister::from_amplitudes(filtered.amplitudes().to_vec())?;
    let fid = fidelity(&output, &Bell::PsiPlus.state());
    Ok(Concentration { success_probability: p, filter: [[f0, C64::default()], [C64::default(), f1]], output, fidelity: fid })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CnotBranch {
    /// Detections at 3′ (H′/V′) and 4′ (H/V), e.g. `"V'3 V4"`.
    pub herald: String,
    pub probability: f64,
    /// Acts on 2′ (qubit 0, control) and 5′ (qubit 1, target).
    pub correction: PauliCorrection,
    pub output: QubitRegister,
    pub corrected: QubitRegister,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cnot {
    pub branches: Vec<CnotBranch>,
    pub four_mode_probability: f64,
}

const CNOT_PATHS: [&str; 8] = ["2", "3", "4", "5", "2o", "3o", "4o", "5o"];

/// Heralded unnormalized branch maps: for each herald the 4×4 matrix from
/// the input on (2, 5) to the output on (2′, 5′).
fn cnot_branch_maps() -> Result<Vec<(String, Matrix4<C64>)>> {
    let reg = Registry::polarized(&CNOT_PATHS);
    let enc = [Mode::pair("2"), Mode::pair("3"), Mode::pair("4"), Mode::pair("5")];
    let optics = [
        pbs_paths("2", "3", "2o", "3o", Basis::Rectilinear)?,
        pbs_paths("5", "4", "5o", "4o", Basis::Diagonal)?,
        hwp_22("3o")?,
    ];
    let out_pattern = Pattern::one_per(&[pol("2o"), pol("5o")]);
    let mut maps: Vec<(String, Matrix4<C64>)> = Vec::new();
    for x3 in 0..2u8 {
        for x4 in 0..2u8 {
            let label = format!("{}'3 {}4", if x3 == 0 { 'H' } else { 'V' }, if x4 == 0 { 'H' } else { 'V' });
            maps.push((label, Matrix4::zeros()));
        }
    }
    for i in 0..4usize {
        let ct = QubitRegister::basis(2, i)?;
        // qubits 2, 3, 4, 5
        let full = ct.tensor(&Bell::PsiMinus.state())?.permute(&[0, 2, 3, 1]);
        let s = FockState::from_qubits(&full, &enc, &reg)?.apply_all(&optics)?;
        for x3 in 0..2u8 {
            for x4 in 0..2u8 {
                let counts = [(Mode::h("3o"), 1 - x3), (Mode::v("3o"), x3), (Mode::h("4o"), 1 - x4), (Mode::v("4o"), x4)];
                let refs: Vec<(&Mode, u8)> = counts.iter().map(|(m, k)| (m, *k)).collect();
                let d = s.detect(&refs)?;
                let Some(rest) = d.state else { continue };
                let sel = rest.postselect(&out_pattern)?;
                let Some(kept) = sel.state else { continue };
                let v = kept.to_qubits(&[Mode::pair("2o"), Mode::pair("5o")])?;
                let scale = (d.probability * sel.probability).sqrt();
                let m = &mut maps[(x3 * 2 + x4) as usize].1;
                for (r, a) in v.amplitudes().iter().enumerate() {
                    m[(r, i)] = a * scale;
                }
            }
        }
    }
    Ok(maps)
}

/// Heralded nondestructive CNOT from two PBSs and a ψ⁻ ancilla pair.
pub fn cnot_nondestructive(input: &QubitRegister) -> Result<Cnot> {
    if input.n() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: input.n() });
    }
    check_normalized(input)?;
    let cnot = cnot_operator(2, 0, 1);
    let target = input.apply(&cnot)?;
    let mut branches = Vec::new();
    for (herald, m) in cnot_branch_maps()? {
        let md = DMatrix::from_iterator(4, 4, m.iter().copied());
        let mut correction = None;
        'search: for pc in Pauli::ALL {
            for pt in Pauli::ALL {
                let fixed = crate::qubit::pauli_string(&[pc, pt]) * &md;
                let lambda = fixed[(0, 0)];
                if lambda.norm() > 1e-9 && (fixed - &cnot * lambda).norm() < 1e-9 {
                    correction = Some(PauliCorrection::on(0, pc).then(PauliCorrection::on(1, pt)));
                    break 'search;
                }
            }
        }
        let correction = correction.ok_or_else(|| Error::Infeasible(format!("no Pauli correction for herald {herald}")))?;
        let raw = &md * nalgebra::DVector::from_column_slice(input.amplitudes());
        let p = raw.norm_squared();
        let output = QubitRegister::from_amplitudes(raw.iter().copied().collect())?;
        let corrected = correction.apply(&output);
        debug_assert!(corrected.same_ray(&target, 1e-8));
        branches.push(CnotBranch { herald, probability: p, correction, output, corrected });
    }
    let total = branches.iter().map(|b| b.probability).sum();
    Ok(Cnot { branches, four_mode_probability: total })
}

#[derive(Clone, Debug, PartialEq)]
pub struct EntanglerTerm {
    /// Bell state of (A, B).
    pub ab_partner: Bell,
    pub probability: f64,
    /// Acts on a (qubit 0) and b (qubit 1); restores ψ⁻.
    pub correction: PauliCorrection,
    pub state: QubitRegister,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EntanglerHerald {
    pub signature: String,
    pub outcome: Bell,
    pub probability: f64,
    pub correction: PauliCorrection,
    pub state: QubitRegister,
    /// Fidelity with ψ⁻ after correction.
    pub fidelity: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Entangler {
    pub four_mode_probability: f64,
    /// Conditional (a, b) state for each Bell state of (A, B).
    pub decomposition: Vec<EntanglerTerm>,
    /// Beam-splitter Bell analysis of (A, B).
    pub heralds: Vec<EntanglerHerald>,
    pub success_probability: f64,
}

fn restore_psi_minus(state: &QubitRegister) -> Option<PauliCorrection> {
    let target = Bell::PsiMinus.state();
    for pa in Pauli::ALL {
        for pb in Pauli::ALL {
            let k = PauliCorrection::on(0, pa).then(PauliCorrection::on(1, pb));
            if k.apply(state).overlap(&target) > 1.0 - 1e-9 {
                return Some(k);
            }
        }
    }
    None
}

/// Event-ready polarization entangler: photons `V′₁ V₂ H′₁′ H₂′` enter an
/// H/V PBS on (1, 1′) and a ±45° PBS on (2, 2′); the four-mode events carry
/// a ψ⁻ on (a, b) correlated with the Bell state of (A, B), which a
/// beam-splitter analyzer reads out.
pub fn event_ready_entangler() -> Result<Entangler> {
    let reg = Registry::polarized(&["1", "2", "1p", "2p", "a", "b", "A", "B", "e", "f"]);
    let diag = |path: &str, sign: f64| {
        CreationPoly::linear(&reg, &[(c(S2, 0.0), &Mode::h(path)), (c(S2 * sign, 0.0), &Mode::v(path))])
    };
    let input = diag("1", -1.0)?
        .mul(&CreationPoly::linear(&reg, &[(c(1.0, 0.0), &Mode::v("2"))])?)
        .mul(&diag("1p", 1.0)?)
        .mul(&CreationPoly::linear(&reg, &[(c(1.0, 0.0), &Mode::h("2p"))])?)
        .to_state(4);
    let s = input.apply_all(&[
        pbs_paths("1", "1p", "a", "A", Basis::Rectilinear)?,
        pbs_paths("2", "2p", "b", "B", Basis::Diagonal)?,
    ])?;
    let sel = s.postselect(&Pattern::one_per(&[pol("a"), pol("b"), pol("A"), pol("B")]))?;
    let four = sel.state.ok_or_else(|| Error::Infeasible("no four-mode events".into()))?;
    let qubits = four.to_qubits(&[Mode::pair("a"), Mode::pair("b"), Mode::pair("A"), Mode::pair("B")])?;
    let mut decomposition = Vec::new();
    for partner in Bell::ALL {
        let (p, ab) = qubits.project_onto(&[2, 3], &partner.state())?;
        let ab = ab.ok_or_else(|| Error::Infeasible("missing Bell component".into()))?;
        let correction = restore_psi_minus(&ab).ok_or_else(|| Error::Infeasible("no Pauli restores ψ⁻".into()))?;
        decomposition.push(EntanglerTerm { ab_partner: partner, probability: p, correction, state: ab });
    }

    let mixed = four.apply(&beam_splitter_paths("A", "B", "e", "f")?)?;
    let dets = [Mode::h("e"), Mode::v("e"), Mode::h("f"), Mode::v("f")];
    let mut heralds = Vec::new();
    for (k, _) in mixed.marginal(&dets)? {
        let (ne, nf) = (k[0] + k[1], k[2] + k[3]);
        let outcome = match (ne, nf) {
            (1, 1) => Bell::PsiMinus,
            (2, 0) if k[0] == 1 => Bell::PsiPlus,
            (0, 2) if k[2] == 1 => Bell::PsiPlus,
            _ => continue,
        };
        let counts: Vec<(&Mode, u8)> = dets.iter().zip(&k).map(|(m, &n)| (m, n)).collect();
        let d = mixed.detect(&counts)?;
        let Some(rest) = d.state else { continue };
        let state = rest.to_qubits(&[Mode::pair("a"), Mode::pair("b")])?;
        let correction = restore_psi_minus(&state).ok_or_else(|| Error::Infeasible("no Pauli restores ψ⁻".into()))?;
        let fid = fidelity(&correction.apply(&state), &Bell::PsiMinus.state());
        heralds.push(EntanglerHerald {
            signature: signature(&k, &["He", "Ve", "Hf", "Vf"]),
            outcome,
            probability: sel.probability * d.probability,
            correction,
            state,
            fidelity: fid,
        });
    }
    let success = heralds.iter().map(|h| h.probability).sum();
    Ok(Entangler { four_mode_probability: sel.probability, decomposition, heralds, success_probability: success })
}

/// Franson interference of `α|short,short⟩ + β|long,long⟩` with total
/// analyzer phase `phi`: probability that the two photons leave
/// equally labelled ports, given a coincidence in the central time slot.
pub fn franson_timebin(alpha: C64, beta: C64, phi: f64) -> Result<f64> {
    let state = QubitRegister::new(vec![alpha, C64::default(), C64::default(), beta])?;
    let mut same = 0.0;
    for s1 in 0..2 {
        for s2 in 0..2 {
            let a = QubitRegister::new(vec![c(S2, 0.0), C64::from_polar(if s1 == 0 { S2 } else { -S2 }, phi / 2.0)])?;
            let b = QubitRegister::new(vec![c(S2, 0.0), C64::from_polar(if s2 == 0 { S2 } else { -S2 }, phi / 2.0)])?;
            let p = a.tensor(&b)?.overlap(&state).powi(2);
            if s1 == s2 {
                same += p;
            }
        }
    }
    Ok(same)
}

/// Fringe visibility `(max − min)/(max + min)` of [`franson_timebin`] over
/// a phase grid.
pub fn franson_visibility(alpha: C64, beta: C64) -> Result<f64> {
    let vals = (0..720).map(|k| franson_timebin(alpha, beta, k as f64 * PI / 360.0)).collect::<Result<Vec<_>>>()?;
    let max = vals.iter().copied().fold(f64::MIN, f64::max);
    let min = vals.iter().copied().fold(f64::MAX, f64::min);
    Ok((max - min) / (max + min))
}
