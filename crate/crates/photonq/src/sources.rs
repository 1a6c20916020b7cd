//! Entangled-photon sources, detectors and interferometer read-outs.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::Arc;

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fock::{CreationPoly, FockState, Mode, Pattern, Registry, DEFAULT_NMAX};
use crate::optics::{beam_splitter, pbs_paths, phase_shift, wave_plate, Basis, Plate};
use crate::qubit::{Bell, QubitRegister};
use crate::C64;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Pair source emitting into two qubits, each a (slot 0, slot 1) mode pair.
#[derive(Clone, Debug, PartialEq)]
pub struct PairSource {
    pub bell: Bell,
    pub z: C64,
    pub a: (Mode, Mode),
    pub b: (Mode, Mode),
}

impl PairSource {
    pub fn new(bell: Bell, z: C64, a: (Mode, Mode), b: (Mode, Mode)) -> Result<Self> {
        if z.norm() >= 1.0 {
            return Err(invalid("z", format!("|z| = {} must be below 1", z.norm())));
        }
        Ok(PairSource { bell, z, a, b })
    }

    /// Polarization source on paths `a`, `b`.
    pub fn polarization(bell: Bell, z: C64, a: &str, b: &str) -> Result<Self> {
        PairSource::new(bell, z, Mode::pair(a), Mode::pair(b))
    }

    pub fn modes(&self) -> Vec<Mode> {
        vec![self.a.0.clone(), self.a.1.clone(), self.b.0.clone(), self.b.1.clone()]
    }

    /// Normalized single-pair creator for the chosen Bell state.
    pub fn pair_creator(&self, reg: &Arc<Registry>) -> Result<CreationPoly> {
        let s = c(FRAC_1_SQRT_2, 0.0);
        let (a0, a1, b0, b1) = (&self.a.0, &self.a.1, &self.b.0, &self.b.1);
        let (x, y, sign) = match self.bell {
            Bell::PsiPlus => ((a0, b1), (a1, b0), 1.0),
            Bell::PsiMinus => ((a0, b1), (a1, b0), -1.0),
            Bell::PhiPlus => ((a0, b0), (a1, b1), 1.0),
            Bell::PhiMinus => ((a0, b0), (a1, b1), -1.0),
        };
        Ok(CreationPoly::monomial(reg, s, &[x.0, x.1])?.add(&CreationPoly::monomial(reg, s * sign, &[y.0, y.1])?))
    }

    /// `Σ_{m ≤ order} z^m (S†)^m |Ω⟩` as an unnormalized creation polynomial.
    pub fn ladder(&self, reg: &Arc<Registry>, order: u32) -> Result<CreationPoly> {
        let s = self.pair_creator(reg)?;
        let mut acc = CreationPoly::one(reg);
        let mut term = CreationPoly::one(reg);
        for _ in 0..order {
            term = term.mul(&s).scale(self.z);
            acc = acc.add(&term);
        }
        Ok(acc)
    }

    /// Emitted state on `reg`, normalized.
    pub fn emit_into(&self, reg: &Arc<Registry>, order: u32, nmax: u32) -> Result<FockState> {
        if 2 * order > nmax {
            return Err(invalid("order", format!("{order} pairs exceed the {nmax}-photon truncation")));
        }
        Ok(self.ladder(reg, order)?.to_state(nmax).normalized())
    }
}

/// Emitted state of a single source on its own four modes.
pub fn emit_bell_pair(source: &PairSource, order: u32) -> Result<FockState> {
    let reg = Registry::new(source.modes())?;
    source.emit_into(&reg, order, DEFAULT_NMAX)
}

/// Heralded GHZ preparation: a post-PBS state and the selection that
/// yields the GHZ qubits.
#[derive(Clone, Debug)]
pub struct GhzSource {
    pub state: FockState,
    pub pattern: Pattern,
    /// Qubit encoding of the surviving photons.
    pub encoding: Vec<(Mode, Mode)>,
    /// Trigger detection absorbed before reading the qubits.
    pub trigger: Option<Mode>,
}

impl GhzSource {
    /// Switches the three-photon trigger to the −45° detector.
    pub fn with_minus_trigger(mut self) -> Result<Self> {
        if self.trigger.is_none() {
            return Err(invalid("trigger", "source has no trigger"));
        }
        let (h, v) = Mode::pair("t");
        self.pattern = Pattern::one_per(&[
            vec![Mode::h("1"), Mode::v("1")],
            vec![Mode::h("3o"), Mode::v("3o")],
            vec![Mode::h("4"), Mode::v("4")],
        ])
        .count(h, 0)
        .count(v.clone(), 1);
        self.trigger = Some(v);
        Ok(self)
    }

    /// Conditional qubit state and its selection probability.
    pub fn conditional(&self) -> Result<(QubitRegister, f64)> {
        let sel = self.state.postselect(&self.pattern)?;
        let s = sel.state.ok_or_else(|| Error::Infeasible("selection has zero probability".into()))?;
        let s = match &self.trigger {
            Some(t) => s.detect(&[(t, 1)])?.state.expect("trigger fired"),
            None => s,
        };
        Ok((s.to_qubits(&self.encoding)?, sel.probability))
    }
}

/// Two φ⁺ pairs (1,3) and (2,4) with photons 2 and 3 overlapped on a PBS.
///
/// `n = 4`: four-fold coincidence selects the four-photon GHZ state.
/// `n = 3`: photon 2 is analyzed at ±45° and the trigger fires on +45°.
pub fn build_ghz_source(n: usize) -> Result<GhzSource> {
    if n != 3 && n != 4 {
        return Err(invalid("n", format!("{n} photons not supported (3 or 4)")));
    }
    let reg = Registry::polarized(&["1", "2", "3", "4", "2o", "3o", "t"]);
    let s13 = PairSource::polarization(Bell::PhiPlus, c(1.0, 0.0) * 0.5, "1", "3")?;
    let s24 = PairSource::polarization(Bell::PhiPlus, c(1.0, 0.0) * 0.5, "2", "4")?;
    let pair = s13.pair_creator(&reg)?.mul(&s24.pair_creator(&reg)?);
    let mut state = pair.to_state(DEFAULT_NMAX).normalized();
    state = state.apply(&pbs_paths("2", "3", "2o", "3o", Basis::Rectilinear)?)?;
    let pair_of = |p: &str| (Mode::h(p), Mode::v(p));
    let group = |p: &str| vec![Mode::h(p), Mode::v(p)];
    if n == 4 {
        let pattern = Pattern::one_per(&[group("1"), group("2o"), group("3o"), group("4")]);
        return Ok(GhzSource {
            state,
            pattern,
            encoding: vec![pair_of("1"), pair_of("2o"), pair_of("3o"), pair_of("4")],
            trigger: None,
        });
    }
    // ±45° analysis of output 2o: half-wave plate at 22.5° then the trigger port.
    let hwp = wave_plate(pair_of("2o"), Plate::Half, PI / 8.0)?;
    state = state.apply(&hwp)?;
    let rename = crate::fock::ModeMap::new(
        vec![Mode::h("2o"), Mode::v("2o")],
        vec![Mode::h("t"), Mode::v("t")],
        nalgebra::DMatrix::identity(2, 2),
    )?;
    state = state.apply(&rename)?;
    let pattern = Pattern::one_per(&[group("1"), group("3o"), group("4")])
        .count(Mode::h("t"), 1)
        .count(Mode::v("t"), 0);
    Ok(GhzSource {
        state,
        pattern,
        encoding: vec![pair_of("1"), pair_of("3o"), pair_of("4")],
        trigger: Some(Mode::h("t")),
    })
}

/// Twin-beam state on `(aH, aV, bH, bV)` truncated at `order` pairs:
/// `cosh⁻²τ Σ_n √(n+1) tanhⁿτ |ψ_n⁻⟩`. Left unnormalized; the missing
/// weight is recorded as discarded.
pub fn twin_beam_state(tau: f64, order: u32) -> Result<FockState> {
    if tau < 0.0 || !tau.is_finite() {
        return Err(invalid("tau", format!("{tau} must be non-negative")));
    }
    let reg = Registry::polarized(&["a", "b"]);
    let (t, ch) = (tau.tanh(), tau.cosh());
    let mut state = FockState::vacuum(&reg, 2 * order).scaled(c(0.0, 0.0));
    let mut terms = Vec::new();
    for n in 0..=order as u8 {
        let weight = (n as f64 + 1.0).sqrt() * t.powi(n as i32) / (ch * ch);
        for m in 0..=n {
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            let amp = weight * sign / (n as f64 + 1.0).sqrt();
            terms.push((amp, [n - m, m, m, n - m]));
        }
    }
    let modes = reg.modes().to_vec();
    for (amp, occ) in terms {
        let counts: Vec<(&Mode, u8)> = modes.iter().zip(occ).collect();
        let b = FockState::basis(&reg, &counts)?.with_nmax(2 * order).scaled(c(amp, 0.0));
        state = state.add(&b);
    }
    let kept = state.norm().powi(2);
    Ok(state.with_discarded(1.0 - kept))
}

/// Mean number of pairs `Σ_n n·P(n)` of a twin-beam state, relative to
/// its retained weight.
pub fn mean_pair_number(state: &FockState) -> Result<f64> {
    state.mean_photons(&[Mode::h("a"), Mode::v("a")])
}

/// `(|N,0⟩ + |0,N⟩)/√2` on two modes.
pub fn noon_state(n: u8, a: &Mode, b: &Mode) -> Result<FockState> {
    if n as u32 > DEFAULT_NMAX {
        return Err(invalid("n", format!("{n} exceeds the photon truncation")));
    }
    let reg = Registry::new([a.clone(), b.clone()])?;
    let s = FockState::basis(&reg, &[(a, n)])?.add(&FockState::basis(&reg, &[(b, n)])?);
    Ok(s.normalized())
}

/// Return probability of a NOON state through a phase `φ` on mode `b`:
/// `|⟨NOON|U(φ)|NOON⟩|² = (1 + cos Nφ)/2`.
pub fn noon_fringe(n: u8, phi: f64) -> Result<f64> {
    let (a, b) = (Mode::h("a"), Mode::h("b"));
    let s = noon_state(n, &a, &b)?;
    let shifted = s.apply(&phase_shift(b, phi))?;
    Ok(s.inner(&shifted).norm_sqr())
}

/// `|ψ⁻⟩_pol ⊗ |ψ⁻⟩_path` with paths `uA, dA` for photon A and `uB, dB` for B.
pub fn hyper_entangled_state() -> Result<FockState> {
    let reg = Registry::polarized(&["uA", "dA", "uB", "dB"]);
    let mut terms = Vec::new();
    let pol = [((0u8, 1u8), 1.0), ((1, 0), -1.0)];
    let path = [(("uA", "dB"), 1.0), (("dA", "uB"), -1.0)];
    for ((pa, pb), s1) in pol {
        for ((xa, xb), s2) in path {
            terms.push((Mode::new(xa, pa, 0), Mode::new(xb, pb, 0), 0.5 * s1 * s2));
        }
    }
    let t: Vec<(C64, Vec<&Mode>)> = terms.iter().map(|(m1, m2, a)| (c(*a, 0.0), vec![m1, m2])).collect();
    FockState::from_monomials(&reg, &t)
}

/// Reads the hyper-entangled photons as four qubits (polA, pathA, polB, pathB);
/// path `u` is 0, `d` is 1.
pub fn hyper_to_qubits(state: &FockState) -> Result<QubitRegister> {
    let group = |u: &str, d: &str| vec![Mode::h(u), Mode::v(u), Mode::h(d), Mode::v(d)];
    let q = state.to_photon_register(&[group("uA", "dA"), group("uB", "dB")])?;
    // group index bits are (path, pol); reorder to (pol, path)
    Ok(q.permute(&[1, 0, 3, 2]))
}

/// Detector with quantum efficiency `eta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    pub efficiency: f64,
    pub number_resolving: bool,
}

impl DetectorModel {
    pub fn new(efficiency: f64, number_resolving: bool) -> Result<Self> {
        if !(0.0..=1.0).contains(&efficiency) {
            return Err(invalid("efficiency", format!("{efficiency} outside [0, 1]")));
        }
        Ok(DetectorModel { efficiency, number_resolving })
    }

    pub fn ideal() -> Self {
        DetectorModel { efficiency: 1.0, number_resolving: false }
    }

    /// Distribution of the reading given `n` incident photons.
    fn response(&self, n: u8) -> Vec<(u8, f64)> {
        let eta = self.efficiency;
        let mut out: BTreeMap<u8, f64> = BTreeMap::new();
        for k in 0..=n {
            let p = binomial(n as u32, k as u32) * eta.powi(k as i32) * (1.0 - eta).powi((n - k) as i32);
            let reading = if self.number_resolving { k } else { k.min(1) };
            *out.entry(reading).or_default() += p;
        }
        out.into_iter().filter(|(_, p)| *p > 0.0).collect()
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Coincidence statistics over a set of detectors.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Counts {
    pub detectors: Vec<Mode>,
    /// Born probability of each reading pattern.
    pub probabilities: BTreeMap<Vec<u8>, f64>,
    /// Sampled counts, present when trials > 0.
    pub counts: Option<BTreeMap<Vec<u8>, u64>>,
    pub trials: u64,
}

impl Counts {
    /// Probability that the readings satisfy `pred`.
    pub fn probability(&self, pred: impl Fn(&[u8]) -> bool) -> f64 {
        self.probabilities.iter().filter(|(k, _)| pred(k)).map(|(_, p)| p).sum()
    }

    /// Probability that exactly the listed detectors click.
    pub fn coincidence(&self, fired: &[&Mode]) -> f64 {
        let idx: Vec<usize> = fired.iter().filter_map(|m| self.detectors.iter().position(|d| d == *m)).collect();
        self.probability(|r| r.iter().enumerate().all(|(i, &x)| (x > 0) == idx.contains(&i)))
    }

    /// Sampled frequency of patterns satisfying `pred`.
    pub fn frequency(&self, pred: impl Fn(&[u8]) -> bool) -> Option<f64> {
        let counts = self.counts.as_ref()?;
        let hit: u64 = counts.iter().filter(|(k, _)| pred(k)).map(|(_, n)| n).sum();
        Some(hit as f64 / self.trials as f64)
    }
}

/// Detector reading distribution; samples `trials` events when nonzero.
pub fn coincidence_count(state: &FockState, detectors: &[(Mode, DetectorModel)], trials: u64, seed: u64) -> Result<Counts> {
    let modes: Vec<Mode> = detectors.iter().map(|(m, _)| m.clone()).collect();
    let marginal = state.marginal(&modes)?;
    let mut probabilities: BTreeMap<Vec<u8>, f64> = BTreeMap::new();
    for (occ, p) in &marginal {
        let mut partial: Vec<(Vec<u8>, f64)> = vec![(Vec::new(), *p)];
        for (k, (_, det)) in detectors.iter().enumerate() {
            let resp = det.response(occ[k]);
            partial = partial
                .into_iter()
                .flat_map(|(r, q)| {
                    resp.iter().map(move |(x, w)| {
                        let mut r2 = r.clone();
                        r2.push(*x);
                        (r2, q * w)
                    })
                })
                .collect();
        }
        for (r, q) in partial {
            *probabilities.entry(r).or_default() += q;
        }
    }
    let counts = if trials > 0 {
        let keys: Vec<&Vec<u8>> = probabilities.keys().collect();
        let weights: Vec<f64> = probabilities.values().copied().collect();
        let dist = WeightedIndex::new(&weights).map_err(|e| invalid("state", e.to_string()))?;
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut tally = vec![0u64; keys.len()];
        for _ in 0..trials {
            tally[dist.sample(&mut rng)] += 1;
        }
        Some(keys.into_iter().cloned().zip(tally).collect())
    } else {
        None
    };
    Ok(Counts { detectors: modes, probabilities, counts, trials })
}

/// Momentum-entangled pair `(|a⟩₁|a'⟩₂ + |b⟩₁|b'⟩₂)/√2` with phase `α` on
/// path `a` and `β` on `b'`, each photon's paths recombined on a 50:50 BS.
/// Detectors: `1c, 1d, 2c, 2d`.
pub fn epr_interferometer(alpha: f64, beta: f64) -> Result<(FockState, Vec<Mode>)> {
    let names = ["a", "b", "a'", "b'", "1c", "1d", "2c", "2d"];
    let reg = Registry::new(names.iter().map(|n| Mode::h(*n)))?;
    let m = |n: &str| Mode::h(n);
    let s = FockState::from_monomials(
        &reg,
        &[(c(1.0, 0.0), vec![&m("a"), &m("a'")]), (c(1.0, 0.0), vec![&m("b"), &m("b'")])],
    )?;
    let out = s.apply_all(&[
        phase_shift(m("a"), alpha),
        phase_shift(m("b'"), beta),
        beam_splitter(m("a"), m("b"), m("1c"), m("1d"), PI / 2.0)?,
        beam_splitter(m("a'"), m("b'"), m("2c"), m("2d"), PI / 2.0)?,
    ])?;
    Ok((out, vec![m("1c"), m("1d"), m("2c"), m("2d")]))
}

/// Three-photon path GHZ `(|a1 b1 c1⟩ + |a2 b2 c2⟩)/√2` with phases on the
/// second paths, each photon recombined on a 50:50 BS.
/// Detectors: `d1, d2, e1, e2, f1, f2`.
pub fn ghz_interferometer(phi_a: f64, phi_b: f64, phi_c: f64) -> Result<(FockState, Vec<Mode>)> {
    let names = ["a1", "a2", "b1", "b2", "c1", "c2", "d1", "d2", "e1", "e2", "f1", "f2"];
    let reg = Registry::new(names.iter().map(|n| Mode::h(*n)))?;
    let m = |n: &str| Mode::h(n);
    let s = FockState::from_monomials(
        &reg,
        &[
            (c(1.0, 0.0), vec![&m("a1"), &m("b1"), &m("c1")]),
            (c(1.0, 0.0), vec![&m("a2"), &m("b2"), &m("c2")]),
        ],
    )?;
    let mut maps = vec![phase_shift(m("a2"), phi_a), phase_shift(m("b2"), phi_b), phase_shift(m("c2"), phi_c)];
    for (i, o) in [("a", "d"), ("b", "e"), ("c", "f")] {
        maps.push(beam_splitter(
            m(&format!("{i}1")),
            m(&format!("{i}2")),
            m(&format!("{o}1")),
            m(&format!("{o}2")),
            PI / 2.0,
        )?);
    }
    let out = s.apply_all(&maps)?;
    Ok((out, ["d1", "d2", "e1", "e2", "f1", "f2"].iter().map(|n| m(n)).collect()))
}

/// Spectral widths of pump, filters before the shared detectors, and
/// filters in the remaining beams.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub pump: f64,
    pub shared: f64,
    pub other: f64,
}

impl FilterSpec {
    pub fn new(pump: f64, shared: f64, other: f64) -> Result<Self> {
        for (name, v) in [("pump", pump), ("shared", shared), ("other", other)] {
            if v.is_nan() || v <= 0.0 {
                return Err(invalid(name, format!("width {v} must be positive")));
            }
        }
        Ok(FilterSpec { pump, shared, other })
    }
}

/// Four-photon interference visibility for Gaussian spectra.
pub fn visibility_v4(f: &FilterSpec) -> f64 {
    let (p2, s2, o2) = (f.pump * f.pump, f.shared * f.shared, f.other * f.other);
    if o2.is_infinite() {
        return (p2 / (p2 + s2)).sqrt();
    }
    (p2 / (p2 + s2 * o2 / (p2 + s2 + o2))).sqrt()
}

/// Limit of [`visibility_v4`] without filters in the unshared beams.
pub fn visibility_v4_unfiltered(pump: f64, shared: f64) -> f64 {
    (pump * pump / (pump * pump + shared * shared)).sqrt()
}

/// Four-fold fringe visibility of the two-source swapping interferometer
/// with up to two pairs per source.
///
/// Source A emits into `(a, d)` or `(a', c')`, source B into `(b', d')` or
/// `(b, c)`. Each `x, x'` pair meets on a 50:50 BS; a phase on `a` scans the
/// fringe and threshold detectors watch the four `x(+)` ports.
pub fn multipair_visibility(z: C64) -> Result<f64> {
    if z.norm() >= 1.0 {
        return Err(invalid("z", format!("|z| = {} must be below 1", z.norm())));
    }
    let p0 = swap_fourfold(z, 0.0)?;
    let p1 = swap_fourfold(z, PI)?;
    Ok((p0 - p1).abs() / (p0 + p1))
}

fn swap_fourfold(z: C64, phi: f64) -> Result<f64> {
    let names = ["a", "a'", "b", "b'", "c", "c'", "d", "d'"];
    let reg = Registry::new(names.iter().map(|n| Mode::h(*n)))?;
    let m = |n: &str| Mode::h(n);
    let src_a = PairSource::new(Bell::PhiPlus, z, (m("a"), m("a'")), (m("d"), m("c'")))?;
    let src_b = PairSource::new(Bell::PhiPlus, z, (m("b"), m("b'")), (m("c"), m("d'")))?;
    let poly = src_a.ladder(&reg, 2)?.mul(&src_b.ladder(&reg, 2)?);
    let state = poly.to_state(DEFAULT_NMAX).normalized();
    let mut maps = vec![phase_shift(m("a"), phi)];
    for x in ["a", "b", "c", "d"] {
        let xp = format!("{x}'");
        maps.push(beam_splitter(m(x), m(&xp), m(x), m(&xp), PI / 2.0)?);
    }
    let out = state.apply_all(&maps)?;
    out.probability(&Pattern::new().at_least(m("a"), 1).at_least(m("b"), 1).at_least(m("c"), 1).at_least(m("d"), 1))
}

/// Smallest `|z|²` at which [`multipair_visibility`] drops to `target`.
pub fn multipair_threshold(target: f64) -> Result<f64> {
    let f = |x: f64| multipair_visibility(c(x.sqrt(), 0.0)).map(|v| v - target);
    let (mut lo, mut hi) = (1e-6, 0.9);
    if f(lo)? < 0.0 || f(hi)? > 0.0 {
        return Err(Error::Infeasible(format!("visibility {target} not bracketed")));
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if f(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detector_response_sums_to_one() {
        let d = DetectorModel::new(0.7, true).unwrap();
        for n in 0..5 {
            let s: f64 = d.response(n).iter().map(|x| x.1).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(5, 2), 10.0);
        assert_eq!(binomial(4, 0), 1.0);
    }
}
