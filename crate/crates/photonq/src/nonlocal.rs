//! Correlation functions, Bell functionals and their local-realistic
//! bounds by exhaustive enumeration, plus the GHZ, Ardehali and
//! Leggett-type tests and entanglement witnesses.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::qubit::{local_operator, Bell, DensityOperator, QubitRegister, Setting};
use crate::C64;

/// Largest exhaustive problem: parties × settings.
pub const MAX_PARTIES: usize = 4;
pub const MAX_SETTINGS: usize = 2;

/// `⟨⊗ (n_i·σ)⟩` with one setting per party.
pub fn correlation(state: &DensityOperator, settings: &[Setting]) -> Result<f64> {
    if settings.len() != state.n() {
        return Err(Error::DimensionMismatch { expected: state.n(), found: settings.len() });
    }
    let ops: Vec<_> = settings.iter().map(|s| Some(s.observable())).collect();
    Ok(state.expectation(&local_operator(&ops))?.re)
}

/// A state together with each party's list of settings.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationExperiment {
    pub state: DensityOperator,
    pub settings: Vec<Vec<Setting>>,
}

impl CorrelationExperiment {
    pub fn new(state: DensityOperator, settings: Vec<Vec<Setting>>) -> Result<Self> {
        if settings.len() != state.n() {
            return Err(Error::DimensionMismatch { expected: state.n(), found: settings.len() });
        }
        Ok(CorrelationExperiment { state, settings })
    }

    /// Correlation for a choice of setting index per party; `None` leaves
    /// the party unmeasured.
    pub fn correlation(&self, choice: &[Option<usize>]) -> Result<f64> {
        if choice.len() != self.settings.len() {
            return Err(Error::DimensionMismatch { expected: self.settings.len(), found: choice.len() });
        }
        let ops = choice
            .iter()
            .zip(&self.settings)
            .map(|(k, s)| match k {
                None => Ok(None),
                Some(i) => s.get(*i).map(|x| Some(x.observable())).ok_or_else(|| invalid("choice", format!("setting {i} missing"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.state.expectation(&local_operator(&ops))?.re)
    }

    pub fn value(&self, f: &Functional) -> Result<f64> {
        f.terms.iter().map(|(choice, w)| Ok(w * self.correlation(choice)?)).sum()
    }
}

/// Linear combination of correlators; `choice[p]` is the setting index of
/// party `p`, or `None` for a party that is not measured.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Functional {
    pub parties: usize,
    pub settings: usize,
    pub terms: Vec<(Vec<Option<usize>>, f64)>,
}

fn all(choice: &[usize]) -> Vec<Option<usize>> {
    choice.iter().map(|&k| Some(k)).collect()
}

impl Functional {
    /// `E(a1,b1) + E(a1,b2) + E(a2,b1) − E(a2,b2)`.
    pub fn chsh() -> Self {
        Functional {
            parties: 2,
            settings: 2,
            terms: vec![(all(&[0, 0]), 1.0), (all(&[0, 1]), 1.0), (all(&[1, 0]), 1.0), (all(&[1, 1]), -1.0)],
        }
    }

    /// `E(xxx) − E(xyy) − E(yxy) − E(yyx)` with setting 0 = x, 1 = y.
    pub fn mermin3() -> Self {
        Functional {
            parties: 3,
            settings: 2,
            terms: vec![(all(&[0, 0, 0]), 1.0), (all(&[0, 1, 1]), -1.0), (all(&[1, 0, 1]), -1.0), (all(&[1, 1, 0]), -1.0)],
        }
    }

    /// Four-party operator with settings x, y for parties 1–3 and σ_a, σ_b
    /// for party 4.
    pub fn ardehali() -> Self {
        let first = [([0, 0, 0], 1.0), ([0, 1, 1], -1.0), ([1, 0, 1], 1.0), ([1, 1, 0], 1.0)];
        let second = [([1, 1, 1], 1.0), ([0, 1, 0], 1.0), ([0, 0, 1], 1.0), ([1, 0, 0], -1.0)];
        let mut terms = Vec::new();
        for (k, w) in first {
            terms.push((all(&[k[0], k[1], k[2], 0]), 0.5 * w));
            terms.push((all(&[k[0], k[1], k[2], 1]), 0.5 * w));
        }
        for (k, w) in second {
            terms.push((all(&[k[0], k[1], k[2], 0]), 0.5 * w));
            terms.push((all(&[k[0], k[1], k[2], 1]), -0.5 * w));
        }
        Functional { parties: 4, settings: 2, terms }
    }

    /// `E(A_setting)` for one party alone.
    pub fn single(parties: usize, party: usize, setting: usize) -> Self {
        let mut choice = vec![None; parties];
        choice[party] = Some(setting);
        Functional { parties, settings: setting + 1, terms: vec![(choice, 1.0)] }
    }

    /// Hermitian operator for the given settings.
    pub fn operator(&self, settings: &[Vec<Setting>]) -> Result<DMatrix<C64>> {
        if settings.len() != self.parties {
            return Err(Error::DimensionMismatch { expected: self.parties, found: settings.len() });
        }
        let d = 1usize << self.parties;
        let mut m = DMatrix::zeros(d, d);
        for (choice, w) in &self.terms {
            let ops = choice
                .iter()
                .zip(settings)
                .map(|(k, s)| k.and_then(|i| s.get(i).map(|x| x.observable())))
                .collect::<Vec<_>>();
            m += local_operator(&ops) * C64::new(*w, 0.0);
        }
        Ok(m)
    }
}

/// Deterministic local strategy achieving `value`; `strategy[p][k]` is the
/// ±1 outcome of party `p` for setting `k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LhvBound {
    pub value: f64,
    pub strategy: Vec<Vec<i8>>,
}

fn check_exhaustive(parties: usize, settings: usize) -> Result<()> {
    if parties == 0 || parties > MAX_PARTIES || settings == 0 || settings > MAX_SETTINGS {
        return Err(Error::TooLarge(format!("{parties} parties × {settings} settings")));
    }
    Ok(())
}

fn strategies(parties: usize, settings: usize) -> impl Iterator<Item = Vec<Vec<i8>>> {
    let bits = parties * settings;
    (0u32..1 << bits).map(move |code| {
        (0..parties)
            .map(|p| (0..settings).map(|k| if code >> (p * settings + k) & 1 == 1 { -1 } else { 1 }).collect())
            .collect()
    })
}

/// Value of the functional under a deterministic strategy.
pub fn evaluate_strategy(f: &Functional, strategy: &[Vec<i8>]) -> f64 {
    f.terms
        .iter()
        .map(|(choice, w)| {
            w * choice
                .iter()
                .zip(strategy)
                .map(|(k, s)| k.map_or(1.0, |i| s[i] as f64))
                .product::<f64>()
        })
        .sum()
}

/// Maximum of a linear functional over all deterministic local strategies.
pub fn lhv_bound(f: &Functional) -> Result<LhvBound> {
    check_exhaustive(f.parties, f.settings)?;
    let mut best = LhvBound { value: f64::NEG_INFINITY, strategy: Vec::new() };
    for s in strategies(f.parties, f.settings) {
        let v = evaluate_strategy(f, &s);
        if v > best.value {
            best = LhvBound { value: v, strategy: s };
        }
    }
    Ok(best)
}

/// `Σ_s |Σ_k Π_j s_j^{k_j} E(k)|` over sign vectors `s` and setting choices
/// `k ∈ {0,1}^n`, for correlations supplied by `e`.
pub fn wwzb_value(parties: usize, e: impl Fn(&[usize]) -> f64) -> f64 {
    let mut total = 0.0;
    for s in 0u32..1 << parties {
        let mut inner = 0.0;
        for k in 0u32..1 << parties {
            let choice: Vec<usize> = (0..parties).map(|j| (k >> j & 1) as usize).collect();
            let sign: f64 = (0..parties).map(|j| if (s >> j & 1) == 1 && choice[j] == 1 { -1.0 } else { 1.0 }).product();
            inner += sign * e(&choice);
        }
        total += inner.abs();
    }
    total
}

/// Local-realistic bound of the sum-of-moduli functional. The functional is
/// convex in the correlations, so its maximum sits on a deterministic strategy.
pub fn wwzb_lhv_bound(parties: usize) -> Result<LhvBound> {
    check_exhaustive(parties, 2)?;
    let mut best = LhvBound { value: f64::NEG_INFINITY, strategy: Vec::new() };
    for s in strategies(parties, 2) {
        let v = wwzb_value(parties, |k| k.iter().enumerate().map(|(p, &i)| s[p][i] as f64).product());
        if v > best.value {
            best = LhvBound { value: v, strategy: s };
        }
    }
    Ok(best)
}

/// `|E(a1,b1) + E(a1,b2) + E(a2,b1) − E(a2,b2)|`.
pub fn chsh_value(state: &DensityOperator, a1: Setting, a2: Setting, b1: Setting, b2: Setting) -> Result<f64> {
    let e = |a: Setting, b: Setting| correlation(state, &[a, b]);
    Ok((e(a1, b1)? + e(a1, b2)? + e(a2, b1)? - e(a2, b2)?).abs())
}

/// Standard optimal CHSH settings for the singlet in the x–z plane.
pub fn chsh_optimal_settings() -> [Setting; 4] {
    [Setting::xz(0.0), Setting::xz(PI / 2.0), Setting::xz(PI / 4.0), Setting::xz(-PI / 4.0)]
}

/// `F|ψ⁻⟩⟨ψ⁻| + (1 − F)/3 · (others)`.
pub fn werner_state(f: f64) -> Result<DensityOperator> {
    if !(0.0..=1.0).contains(&f) {
        return Err(invalid("F", format!("{f} outside [0, 1]")));
    }
    let g = (1.0 - f) / 3.0;
    DensityOperator::mixture(&[
        (f, &Bell::PsiMinus.state().density()),
        (g, &Bell::PsiPlus.state().density()),
        (g, &Bell::PhiPlus.state().density()),
        (g, &Bell::PhiMinus.state().density()),
    ])
}

/// Werner fidelity at which the optimal CHSH value reaches 2, by bisection.
pub fn werner_chsh_threshold() -> Result<f64> {
    let [a1, a2, b1, b2] = chsh_optimal_settings();
    let s = |f: f64| -> Result<f64> { chsh_value(&werner_state(f)?, a1, a2, b1, b2) };
    let (mut lo, mut hi) = (0.25, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if s(mid)? > 2.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn settings_from(params: &[f64], parties: usize, settings: usize) -> Vec<Vec<Setting>> {
    (0..parties)
        .map(|p| (0..settings).map(|k| Setting::polar(params[2 * (p * settings + k)], params[2 * (p * settings + k) + 1])).collect())
        .collect()
}

/// Quantum optimum of a functional on `state` by coarse random starts and
/// a shrinking pattern search over all settings.
#[derive(Clone, Debug, PartialEq)]
pub struct SettingSearch {
    pub value: f64,
    pub settings: Vec<Vec<Setting>>,
}

pub fn quantum_optimum(f: &Functional, state: &DensityOperator, starts: usize, seed: u64) -> Result<SettingSearch> {
    if state.n() != f.parties {
        return Err(Error::DimensionMismatch { expected: f.parties, found: state.n() });
    }
    let dim = 2 * f.parties * f.settings;
    let eval = |x: &[f64]| -> Result<f64> { Ok(state.expectation(&f.operator(&settings_from(x, f.parties, f.settings))?)?.re) };
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for _ in 0..starts.max(1) {
        let mut x: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.0..2.0 * PI)).collect();
        let mut v = eval(&x)?;
        let mut step = 0.5;
        while step > 1e-9 {
            let mut improved = false;
            for i in 0..dim {
                for dir in [1.0, -1.0] {
                    let mut y = x.clone();
                    y[i] += dir * step;
                    let w = eval(&y)?;
                    if w > v + 1e-15 {
                        x = y;
                        v = w;
                        improved = true;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        if best.as_ref().is_none_or(|b| v > b.0) {
            best = Some((v, x));
        }
    }
    let (value, x) = best.expect("at least one start");
    Ok(SettingSearch { value, settings: settings_from(&x, f.parties, f.settings) })
}

/// `(|HVVH⟩ + |VHHV⟩)/√2`.
pub fn four_photon_ghz() -> QubitRegister {
    let mut a = vec![C64::default(); 16];
    a[0b0110] = C64::new(FRAC_1_SQRT_2, 0.0);
    a[0b1001] = C64::new(FRAC_1_SQRT_2, 0.0);
    QubitRegister::new(a).expect("normalized")
}

/// x̂, ŷ for parties 1–3 and `σ_a = (x̂+ŷ)/√2`, `σ_b = (x̂−ŷ)/√2` for party 4.
pub fn ardehali_settings() -> Vec<Vec<Setting>> {
    let xy = vec![Setting::X, Setting::Y];
    vec![xy.clone(), xy.clone(), xy, vec![Setting::equator(PI / 4.0), Setting::equator(-PI / 4.0)]]
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArdehaliResult {
    pub value: f64,
    pub bound: f64,
    pub violated: bool,
}

/// `⟨Â⟩` on `V|GHZ₄⟩⟨GHZ₄| + (1 − V) I/16`.
pub fn ardehali_test(v: f64) -> Result<ArdehaliResult> {
    if !(0.0..=1.0).contains(&v) {
        return Err(invalid("visibility", format!("{v} outside [0, 1]")));
    }
    let rho = DensityOperator::with_white_noise(&four_photon_ghz(), v)?;
    let op = Functional::ardehali().operator(&ardehali_settings())?;
    let value = rho.expectation(&op)?.re;
    let bound = lhv_bound(&Functional::ardehali())?.value;
    Ok(ArdehaliResult { value, bound, violated: value.abs() > bound })
}

/// Visibility at which `⟨Â⟩` reaches the local bound, by bisection.
pub fn ardehali_threshold() -> Result<f64> {
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if ardehali_test(mid)?.violated {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GhzParadox {
    /// E(x̂ŷŷ), E(ŷx̂ŷ), E(ŷŷx̂), E(x̂x̂x̂).
    pub expectations: [f64; 4],
    /// No local model reproduces the four expectations.
    pub contradiction: bool,
}

fn ghz_terms() -> [[usize; 3]; 4] {
    [[0, 1, 1], [1, 0, 1], [1, 1, 0], [0, 0, 0]]
}

/// The four GHZ-argument expectations of `V|ψ⟩⟨ψ| + (1 − V) I/8`.
///
/// A local model exists iff the expectation vector lies in the hull of the
/// deterministic vectors, which obey `E₄ = E₁E₂E₃`. That hull is cut out by
/// `±E_i ≤ 1` and by `w·E ≤ b(w)` for every sign vector `w` with
/// `w₄ ≠ w₁w₂w₃`, where `b(w)` is the enumerated local bound.
pub fn ghz_paradox_check(state: &QubitRegister, v: f64) -> Result<GhzParadox> {
    if state.n() != 3 {
        return Err(Error::DimensionMismatch { expected: 3, found: state.n() });
    }
    if !(0.0..=1.0).contains(&v) {
        return Err(invalid("visibility", format!("{v} outside [0, 1]")));
    }
    let rho = DensityOperator::with_white_noise(state, v)?;
    let xy = [Setting::X, Setting::Y];
    let mut e = [0.0; 4];
    for (i, t) in ghz_terms().iter().enumerate() {
        e[i] = correlation(&rho, &[xy[t[0]], xy[t[1]], xy[t[2]]])?;
    }
    let mut contradiction = false;
    for code in 0u32..16 {
        let w: Vec<f64> = (0..4).map(|i| if code >> i & 1 == 1 { -1.0 } else { 1.0 }).collect();
        let facets: Vec<Vec<f64>> = if w[3] != w[0] * w[1] * w[2] {
            vec![w.clone()]
        } else {
            (0..4).map(|i| (0..4).map(|j| if i == j { w[i] } else { 0.0 }).collect()).collect()
        };
        for coef in facets {
            let f = Functional {
                parties: 3,
                settings: 2,
                terms: ghz_terms().iter().zip(&coef).filter(|(_, &c)| c != 0.0).map(|(t, &c)| (all(t), c)).collect(),
            };
            let bound = lhv_bound(&f)?.value;
            let val: f64 = coef.iter().zip(&e).map(|(a, b)| a * b).sum();
            if val > bound + 1e-12 {
                contradiction = true;
            }
        }
    }
    Ok(GhzParadox { expectations: e, contradiction })
}

/// Visibility where the contradiction flag switches on, by bisection.
pub fn ghz_paradox_threshold(state: &QubitRegister) -> Result<f64> {
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        if ghz_paradox_check(state, mid)?.contradiction {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeggettResult {
    pub phi: f64,
    pub quantum: f64,
    pub bound: f64,
    pub violated: bool,
}

/// `4 − (4/π)|sin(φ/2)|`.
pub fn leggett_bound(phi: f64) -> f64 {
    4.0 - 4.0 / PI * (phi / 2.0).sin().abs()
}

/// Ideal singlet; see [`leggett_test_noisy`].
pub fn leggett_test(phi: f64) -> Result<LeggettResult> {
    leggett_test_noisy(phi, 1.0)
}

/// `|E₁₁(φ) + E₂₃(0)| + |E₂₂(φ) + E₂₃(0)|` on the singlet with visibility
/// `v`; a₁, b₁ lie in the x–z plane and a₂, b₂ in the orthogonal y–z plane.
/// Rotation invariance of the singlet lets one setting pair per plane
/// stand for the plane average.
pub fn leggett_test_noisy(phi: f64, v: f64) -> Result<LeggettResult> {
    if !(phi > 0.0 && phi < PI) {
        return Err(invalid("phi", format!("{phi} outside (0, π)")));
    }
    if !(0.0..=1.0).contains(&v) {
        return Err(invalid("visibility", format!("{v} outside [0, 1]")));
    }
    let rho = DensityOperator::with_white_noise(&Bell::PsiMinus.state(), v)?;
    let a1 = Setting::xz(0.0);
    let b1 = Setting::xz(phi);
    let a2 = Setting::Y;
    let b2 = Setting::new(0.0, phi.cos(), phi.sin())?;
    let b3 = a2;
    let e11 = correlation(&rho, &[a1, b1])?;
    let e22 = correlation(&rho, &[a2, b2])?;
    let e23 = correlation(&rho, &[a2, b3])?;
    let quantum = (e11 + e23).abs() + (e22 + e23).abs();
    let bound = leggett_bound(phi);
    Ok(LeggettResult { phi, quantum, bound, violated: quantum > bound })
}

/// Edges of the violation interval in (0, π) found by scanning and
/// bisection, in radians.
pub fn leggett_interval(v: f64) -> Result<Option<(f64, f64)>> {
    let g = |phi: f64| -> Result<f64> {
        let r = leggett_test_noisy(phi, v)?;
        Ok(r.quantum - r.bound)
    };
    let n = 3600;
    let grid: Vec<f64> = (1..n).map(|k| k as f64 * PI / n as f64).collect();
    let vals = grid.iter().map(|&p| g(p)).collect::<Result<Vec<_>>>()?;
    let inside: Vec<usize> = (0..grid.len()).filter(|&i| vals[i] > 0.0).collect();
    let (Some(&first), Some(&last)) = (inside.first(), inside.last()) else { return Ok(None) };
    let refine = |mut lo: f64, mut hi: f64, rising: bool| -> Result<f64> {
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if (g(mid)? > 0.0) == rising {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    };
    let lower = if first == 0 { 0.0 } else { refine(grid[first - 1], grid[first], true)? };
    let upper = if last + 1 == grid.len() { PI } else { refine(grid[last], grid[last + 1], false)? };
    Ok(Some((lower, upper)))
}

/// `Tr(W ρ)`.
pub fn witness_eval(w: &DMatrix<C64>, rho: &DensityOperator) -> Result<f64> {
    if w.nrows() != w.ncols() || w.nrows() != rho.matrix().nrows() {
        return Err(Error::DimensionMismatch { expected: rho.matrix().nrows(), found: w.nrows() });
    }
    if (w - w.adjoint()).norm() > 1e-10 {
        return Err(Error::NotHermitian);
    }
    Ok((w * rho.matrix()).trace().re)
}

/// `½ I − |φ⁺⟩⟨φ⁺|`.
pub fn phi_plus_witness() -> DMatrix<C64> {
    let v = nalgebra::DVector::from_column_slice(Bell::PhiPlus.state().amplitudes());
    DMatrix::identity(4, 4) * C64::new(0.5, 0.0) - &v * v.adjoint()
}
