//! Sparse bosonic Fock states over a registry of optical modes.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qubit::QubitRegister;
use crate::{C64, PRUNE, TOL};

/// Default cap on the total photon number of a state.
pub const DEFAULT_NMAX: u32 = 12;

/// One optical mode: spatial path, polarization slot and time bin.
///
/// `pol` is 0 or 1 and reads as H/V unless a basis is declared by the
/// element acting on it.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Mode {
    pub path: String,
    pub pol: u8,
    pub timebin: u8,
}

impl Mode {
    pub fn new(path: impl Into<String>, pol: u8, timebin: u8) -> Self {
        Mode { path: path.into(), pol, timebin }
    }

    pub fn h(path: impl Into<String>) -> Self {
        Mode::new(path, 0, 0)
    }

    pub fn v(path: impl Into<String>) -> Self {
        Mode::new(path, 1, 0)
    }

    /// The (H, V) slots of a path.
    pub fn pair(path: &str) -> (Mode, Mode) {
        (Mode::h(path), Mode::v(path))
    }

    /// Same path and polarization in another time bin.
    pub fn at(&self, timebin: u8) -> Mode {
        Mode { timebin, ..self.clone() }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = if self.pol == 0 { "H" } else { "V" };
        if self.timebin == 0 {
            write!(f, "{}:{}", self.path, p)
        } else {
            write!(f, "{}:{}@{}", self.path, p, self.timebin)
        }
    }
}

/// Ordered set of modes with stable dense indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Registry {
    modes: Vec<Mode>,
    index: HashMap<Mode, usize>,
}

impl Registry {
    pub fn new(modes: impl IntoIterator<Item = Mode>) -> Result<Arc<Registry>> {
        let modes: Vec<Mode> = modes.into_iter().collect();
        let mut index = HashMap::with_capacity(modes.len());
        for (i, m) in modes.iter().enumerate() {
            if index.insert(m.clone(), i).is_some() {
                return Err(Error::CoincidentModes);
            }
        }
        Ok(Arc::new(Registry { modes, index }))
    }

    /// Registry holding the H and V slots of each path, in order.
    pub fn polarized(paths: &[&str]) -> Arc<Registry> {
        let modes = paths.iter().flat_map(|p| [Mode::h(*p), Mode::v(*p)]);
        Registry::new(modes).expect("distinct paths")
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn index_of(&self, m: &Mode) -> Result<usize> {
        self.index.get(m).copied().ok_or_else(|| Error::UnknownMode(m.to_string()))
    }

    pub fn contains(&self, m: &Mode) -> bool {
        self.index.contains_key(m)
    }
}

/// Photon counts, one entry per registry mode.
pub type Occupation = Vec<u8>;

fn factorial_sqrt(occ: &[u8]) -> f64 {
    occ.iter()
        .map(|&k| (1..=k as u32).map(f64::from).product::<f64>().sqrt())
        .product()
}

/// Polynomial in creation operators acting on the vacuum.
///
/// Keys are exponent vectors: `{[1,0,2]: c}` is `c a0† (a2†)²`.
#[derive(Clone, Debug)]
pub struct CreationPoly {
    reg: Arc<Registry>,
    terms: HashMap<Occupation, C64>,
}

impl CreationPoly {
    /// The constant polynomial 1 (the vacuum).
    pub fn one(reg: &Arc<Registry>) -> Self {
        let mut terms = HashMap::new();
        terms.insert(vec![0; reg.len()], C64::new(1.0, 0.0));
        CreationPoly { reg: reg.clone(), terms }
    }

    pub fn zero(reg: &Arc<Registry>) -> Self {
        CreationPoly { reg: reg.clone(), terms: HashMap::new() }
    }

    /// `coef · Π a†_m` over the listed modes (repeats allowed).
    pub fn monomial(reg: &Arc<Registry>, coef: C64, modes: &[&Mode]) -> Result<Self> {
        let mut occ = vec![0u8; reg.len()];
        for m in modes {
            occ[reg.index_of(m)?] += 1;
        }
        let mut terms = HashMap::new();
        terms.insert(occ, coef);
        Ok(CreationPoly { reg: reg.clone(), terms })
    }

    /// Linear form `Σ c_m a†_m`.
    pub fn linear(reg: &Arc<Registry>, parts: &[(C64, &Mode)]) -> Result<Self> {
        let mut p = CreationPoly::zero(reg);
        for (c, m) in parts {
            p = p.add(&CreationPoly::monomial(reg, *c, &[m])?);
        }
        Ok(p)
    }

    pub fn add(&self, other: &CreationPoly) -> CreationPoly {
        let mut terms = self.terms.clone();
        for (k, v) in &other.terms {
            *terms.entry(k.clone()).or_default() += v;
        }
        CreationPoly { reg: self.reg.clone(), terms }
    }

    pub fn scale(&self, c: C64) -> CreationPoly {
        let terms = self.terms.iter().map(|(k, v)| (k.clone(), v * c)).collect();
        CreationPoly { reg: self.reg.clone(), terms }
    }

    pub fn mul(&self, other: &CreationPoly) -> CreationPoly {
        let mut terms: HashMap<Occupation, C64> = HashMap::new();
        for (a, x) in &self.terms {
            for (b, y) in &other.terms {
                let k: Occupation = a.iter().zip(b).map(|(i, j)| i + j).collect();
                *terms.entry(k).or_default() += x * y;
            }
        }
        CreationPoly { reg: self.reg.clone(), terms }
    }

    pub fn pow(&self, k: u32) -> CreationPoly {
        (0..k).fold(CreationPoly::one(&self.reg), |acc, _| acc.mul(self))
    }

    /// Acts on the vacuum; the result is not normalized.
    pub fn to_state(&self, nmax: u32) -> FockState {
        let mut terms = BTreeMap::new();
        let mut discarded = 0.0;
        for (occ, c) in &self.terms {
            let amp = c * factorial_sqrt(occ);
            if occ.iter().map(|&k| k as u32).sum::<u32>() > nmax {
                discarded += amp.norm_sqr();
                continue;
            }
            terms.insert(occ.clone(), amp);
        }
        let mut s = FockState { reg: self.reg.clone(), terms, nmax, discarded };
        s.prune();
        s
    }
}

/// Linear map on creation operators.
///
/// Column `j` of `matrix` is the image of `a†(inputs[j])` expressed over
/// `outputs`, so chaining `u` then `v` has matrix `v·u`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeMap {
    inputs: Vec<Mode>,
    outputs: Vec<Mode>,
    matrix: DMatrix<C64>,
}

/// Largest entry of `U†U − I`.
pub fn unitarity_defect(u: &DMatrix<C64>) -> f64 {
    if u.nrows() != u.ncols() {
        return f64::INFINITY;
    }
    let d = u.adjoint() * u - DMatrix::<C64>::identity(u.nrows(), u.ncols());
    d.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn distinct(modes: &[Mode]) -> bool {
    let mut v: Vec<&Mode> = modes.iter().collect();
    v.sort();
    v.windows(2).all(|w| w[0] != w[1])
}

impl ModeMap {
    pub fn new(inputs: Vec<Mode>, outputs: Vec<Mode>, matrix: DMatrix<C64>) -> Result<Self> {
        if inputs.len() != outputs.len() || matrix.nrows() != outputs.len() || matrix.ncols() != inputs.len() {
            return Err(Error::DimensionMismatch { expected: inputs.len(), found: matrix.ncols() });
        }
        if !distinct(&inputs) || !distinct(&outputs) {
            return Err(Error::CoincidentModes);
        }
        let defect = unitarity_defect(&matrix);
        if defect > TOL {
            return Err(Error::NotUnitary(defect));
        }
        Ok(ModeMap { inputs, outputs, matrix })
    }

    /// A map whose outputs are its inputs.
    pub fn on(modes: Vec<Mode>, matrix: DMatrix<C64>) -> Result<Self> {
        ModeMap::new(modes.clone(), modes, matrix)
    }

    /// Phase `e^{iφ}` on one mode.
    pub fn phase(mode: Mode, phi: f64) -> Self {
        let m = DMatrix::from_element(1, 1, C64::from_polar(1.0, phi));
        ModeMap { inputs: vec![mode.clone()], outputs: vec![mode], matrix: m }
    }

    pub fn inputs(&self) -> &[Mode] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[Mode] {
        &self.outputs
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    /// `self` followed by `next`; `next` must read exactly `self`'s outputs.
    pub fn then(&self, next: &ModeMap) -> Result<ModeMap> {
        let mut perm = Vec::with_capacity(self.outputs.len());
        for m in &self.outputs {
            match next.inputs.iter().position(|x| x == m) {
                Some(p) => perm.push(p),
                None => return Err(Error::UnknownMode(m.to_string())),
            }
        }
        if next.inputs.len() != perm.len() {
            return Err(Error::DimensionMismatch { expected: perm.len(), found: next.inputs.len() });
        }
        let n = perm.len();
        let mut reordered = DMatrix::zeros(n, n);
        for (j, &p) in perm.iter().enumerate() {
            reordered.set_column(j, &next.matrix.column(p));
        }
        Ok(ModeMap {
            inputs: self.inputs.clone(),
            outputs: next.outputs.clone(),
            matrix: reordered * &self.matrix,
        })
    }

    /// Block-diagonal union of maps on disjoint modes.
    pub fn direct_sum(maps: &[ModeMap]) -> Result<ModeMap> {
        let inputs: Vec<Mode> = maps.iter().flat_map(|m| m.inputs.clone()).collect();
        let outputs: Vec<Mode> = maps.iter().flat_map(|m| m.outputs.clone()).collect();
        let n = inputs.len();
        let mut matrix = DMatrix::zeros(n, n);
        let mut off = 0;
        for m in maps {
            let k = m.inputs.len();
            matrix.view_mut((off, off), (k, k)).copy_from(&m.matrix);
            off += k;
        }
        ModeMap::new(inputs, outputs, matrix)
    }

    /// Image of one input creation operator as (output, coefficient) pairs.
    pub fn image(&self, input: &Mode) -> Option<Vec<(Mode, C64)>> {
        let j = self.inputs.iter().position(|m| m == input)?;
        Some(
            self.outputs
                .iter()
                .enumerate()
                .map(|(i, o)| (o.clone(), self.matrix[(i, j)]))
                .filter(|(_, c)| c.norm() > PRUNE)
                .collect(),
        )
    }
}

/// One clause of a post-selection pattern.
#[derive(Clone, Debug, PartialEq)]
pub enum Constraint {
    /// Exactly `n` photons in the mode.
    Count(Mode, u8),
    /// At least `n` photons in the mode.
    AtLeast(Mode, u8),
    /// Exactly `n` photons summed over the group.
    GroupTotal(Vec<Mode>, u8),
    /// At least one photon somewhere in the group (a threshold click).
    Click(Vec<Mode>),
}

/// Conjunction of constraints.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Pattern(pub Vec<Constraint>);

impl Pattern {
    pub fn new() -> Self {
        Pattern(Vec::new())
    }

    pub fn count(mut self, m: Mode, n: u8) -> Self {
        self.0.push(Constraint::Count(m, n));
        self
    }

    pub fn at_least(mut self, m: Mode, n: u8) -> Self {
        self.0.push(Constraint::AtLeast(m, n));
        self
    }

    pub fn group(mut self, g: Vec<Mode>, n: u8) -> Self {
        self.0.push(Constraint::GroupTotal(g, n));
        self
    }

    pub fn click(mut self, g: Vec<Mode>) -> Self {
        self.0.push(Constraint::Click(g));
        self
    }

    /// Exactly one photon in each group.
    pub fn one_per(groups: &[Vec<Mode>]) -> Self {
        Pattern(groups.iter().map(|g| Constraint::GroupTotal(g.clone(), 1)).collect())
    }

    fn compile(&self, reg: &Registry) -> Result<Vec<Compiled>> {
        let idx = |ms: &[Mode]| ms.iter().map(|m| reg.index_of(m)).collect::<Result<Vec<_>>>();
        self.0
            .iter()
            .map(|c| {
                Ok(match c {
                    Constraint::Count(m, n) => Compiled { modes: vec![reg.index_of(m)?], lo: *n, hi: *n },
                    Constraint::AtLeast(m, n) => Compiled { modes: vec![reg.index_of(m)?], lo: *n, hi: u8::MAX },
                    Constraint::GroupTotal(g, n) => Compiled { modes: idx(g)?, lo: *n, hi: *n },
                    Constraint::Click(g) => Compiled { modes: idx(g)?, lo: 1, hi: u8::MAX },
                })
            })
            .collect()
    }
}

struct Compiled {
    modes: Vec<usize>,
    lo: u8,
    hi: u8,
}

impl Compiled {
    fn accepts(&self, occ: &[u8]) -> bool {
        let s: u32 = self.modes.iter().map(|&i| occ[i] as u32).sum();
        s >= self.lo as u32 && s <= self.hi as u32
    }
}

/// Result of conditioning on a detection pattern.
#[derive(Clone, Debug)]
pub struct Selection {
    /// Renormalized conditional state, `None` when nothing survives.
    pub state: Option<FockState>,
    pub probability: f64,
}

/// Sparse Fock-space state.
#[derive(Clone, Debug)]
pub struct FockState {
    reg: Arc<Registry>,
    terms: BTreeMap<Occupation, C64>,
    nmax: u32,
    discarded: f64,
}

impl PartialEq for FockState {
    fn eq(&self, other: &Self) -> bool {
        self.reg == other.reg && self.distance(other) < TOL
    }
}

impl FockState {
    pub fn vacuum(reg: &Arc<Registry>, nmax: u32) -> Self {
        CreationPoly::one(reg).to_state(nmax)
    }

    /// `Σ amp · Π a†` over the listed terms, normalized.
    pub fn from_monomials(reg: &Arc<Registry>, terms: &[(C64, Vec<&Mode>)]) -> Result<Self> {
        let mut p = CreationPoly::zero(reg);
        for (c, ms) in terms {
            p = p.add(&CreationPoly::monomial(reg, *c, ms)?);
        }
        Ok(p.to_state(DEFAULT_NMAX).normalized())
    }

    /// A single basis state given as (mode, count) pairs.
    pub fn basis(reg: &Arc<Registry>, counts: &[(&Mode, u8)]) -> Result<Self> {
        let mut occ = vec![0u8; reg.len()];
        for (m, n) in counts {
            occ[reg.index_of(m)?] = *n;
        }
        let mut terms = BTreeMap::new();
        terms.insert(occ, C64::new(1.0, 0.0));
        Ok(FockState { reg: reg.clone(), terms, nmax: DEFAULT_NMAX, discarded: 0.0 })
    }

    pub fn registry(&self) -> &Arc<Registry> {
        &self.reg
    }

    pub fn nmax(&self) -> u32 {
        self.nmax
    }

    pub fn with_nmax(mut self, nmax: u32) -> Self {
        self.nmax = nmax;
        let (keep, drop): (BTreeMap<_, _>, BTreeMap<_, _>) =
            std::mem::take(&mut self.terms).into_iter().partition(|(o, _)| photons(o) <= nmax);
        self.discarded += drop.values().map(|c| c.norm_sqr()).sum::<f64>();
        self.terms = keep;
        self
    }

    /// Records weight removed outside this library's own truncation.
    pub fn with_discarded(mut self, weight: f64) -> Self {
        self.discarded += weight.max(0.0);
        self
    }

    /// Weight lost to truncation so far.
    pub fn discarded(&self) -> f64 {
        self.discarded
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Occupation, &C64)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn amplitude(&self, counts: &[(&Mode, u8)]) -> Result<C64> {
        let mut occ = vec![0u8; self.reg.len()];
        for (m, n) in counts {
            occ[self.reg.index_of(m)?] = *n;
        }
        Ok(self.terms.get(&occ).copied().unwrap_or_default())
    }

    pub fn norm(&self) -> f64 {
        self.terms.values().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm() - 1.0).abs() < TOL
    }

    pub fn normalized(mut self) -> Self {
        let n = self.norm();
        if n > 0.0 {
            for v in self.terms.values_mut() {
                *v /= n;
            }
        }
        self
    }

    pub fn scaled(mut self, c: C64) -> Self {
        for v in self.terms.values_mut() {
            *v *= c;
        }
        self.prune();
        self
    }

    fn prune(&mut self) {
        self.terms.retain(|_, c| c.norm() >= PRUNE);
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &FockState) -> C64 {
        self.terms
            .iter()
            .filter_map(|(k, a)| other.terms.get(k).map(|b| a.conj() * b))
            .sum()
    }

    /// `|⟨self|other⟩|` for normalized states.
    pub fn overlap(&self, other: &FockState) -> f64 {
        self.inner(other).norm()
    }

    /// Euclidean distance of amplitude vectors.
    pub fn distance(&self, other: &FockState) -> f64 {
        let mut d = 0.0;
        for (k, a) in &self.terms {
            d += (a - other.terms.get(k).copied().unwrap_or_default()).norm_sqr();
        }
        for (k, b) in &other.terms {
            if !self.terms.contains_key(k) {
                d += b.norm_sqr();
            }
        }
        d.sqrt()
    }

    /// Sum of two states on the same registry (unnormalized).
    pub fn add(&self, other: &FockState) -> FockState {
        let mut terms = self.terms.clone();
        for (k, v) in &other.terms {
            *terms.entry(k.clone()).or_default() += v;
        }
        let mut s = FockState { terms, ..self.clone() };
        s.prune();
        s
    }

    pub fn to_poly(&self) -> CreationPoly {
        let terms = self.terms.iter().map(|(o, c)| (o.clone(), c / factorial_sqrt(o))).collect();
        CreationPoly { reg: self.reg.clone(), terms }
    }

    /// Product of the two preparations, e.g. two independent sources on
    /// disjoint modes of one registry.
    pub fn tensor(&self, other: &FockState) -> FockState {
        let mut s = self.to_poly().mul(&other.to_poly()).to_state(self.nmax.max(other.nmax));
        s.discarded += self.discarded + other.discarded;
        s
    }

    /// Substitutes every input creation operator of `map` by its image.
    pub fn apply(&self, map: &ModeMap) -> Result<FockState> {
        let n = self.reg.len();
        let ins: Vec<usize> = map.inputs.iter().map(|m| self.reg.index_of(m)).collect::<Result<_>>()?;
        let outs: Vec<usize> = map.outputs.iter().map(|m| self.reg.index_of(m)).collect::<Result<_>>()?;
        let mut is_input = vec![false; n];
        for &i in &ins {
            is_input[i] = true;
        }
        for &o in &outs {
            if !is_input[o] && self.terms.keys().any(|occ| occ[o] > 0) {
                return Err(Error::CoincidentModes);
            }
        }
        let images: Vec<Vec<(usize, C64)>> = (0..ins.len())
            .map(|j| {
                outs.iter()
                    .enumerate()
                    .map(|(i, &o)| (o, map.matrix[(i, j)]))
                    .filter(|(_, c)| c.norm() > PRUNE)
                    .collect()
            })
            .collect();

        let mut out: HashMap<Occupation, C64> = HashMap::new();
        for (occ, amp) in &self.terms {
            let mut start = occ.clone();
            for &i in &ins {
                start[i] = 0;
            }
            let mut poly: HashMap<Occupation, C64> = HashMap::new();
            poly.insert(start, amp / factorial_sqrt(occ));
            for (j, &i) in ins.iter().enumerate() {
                for _ in 0..occ[i] {
                    let mut next: HashMap<Occupation, C64> = HashMap::with_capacity(poly.len() * 2);
                    for (o, c) in &poly {
                        for &(k, u) in &images[j] {
                            let mut oo = o.clone();
                            oo[k] += 1;
                            *next.entry(oo).or_default() += c * u;
                        }
                    }
                    poly = next;
                }
            }
            for (o, c) in poly {
                *out.entry(o.clone()).or_default() += c * factorial_sqrt(&o);
            }
        }
        let mut terms = BTreeMap::new();
        let mut discarded = self.discarded;
        for (o, c) in out {
            if photons(&o) > self.nmax {
                discarded += c.norm_sqr();
            } else if c.norm() >= PRUNE {
                terms.insert(o, c);
            }
        }
        Ok(FockState { reg: self.reg.clone(), terms, nmax: self.nmax, discarded })
    }

    /// Applies maps in order.
    pub fn apply_all(&self, maps: &[ModeMap]) -> Result<FockState> {
        maps.iter().try_fold(self.clone(), |s, m| s.apply(m))
    }

    /// Probability of the pattern relative to the state's norm.
    pub fn probability(&self, pattern: &Pattern) -> Result<f64> {
        let c = pattern.compile(&self.reg)?;
        let total = self.norm().powi(2);
        let hit: f64 = self
            .terms
            .iter()
            .filter(|(o, _)| c.iter().all(|k| k.accepts(o)))
            .map(|(_, a)| a.norm_sqr())
            .sum();
        Ok(if total > 0.0 { hit / total } else { 0.0 })
    }

    /// Conditions on the pattern; photons stay in the state.
    pub fn postselect(&self, pattern: &Pattern) -> Result<Selection> {
        let c = pattern.compile(&self.reg)?;
        let total = self.norm().powi(2);
        let terms: BTreeMap<Occupation, C64> = self
            .terms
            .iter()
            .filter(|(o, _)| c.iter().all(|k| k.accepts(o)))
            .map(|(o, a)| (o.clone(), *a))
            .collect();
        let hit: f64 = terms.values().map(|a| a.norm_sqr()).sum();
        if hit <= PRUNE * PRUNE || total == 0.0 {
            return Ok(Selection { state: None, probability: 0.0 });
        }
        let state = FockState { terms, ..self.clone() }.normalized();
        Ok(Selection { state: Some(state), probability: hit / total })
    }

    /// Projects the listed modes onto definite counts and absorbs those
    /// photons, leaving the listed modes empty.
    pub fn detect(&self, counts: &[(&Mode, u8)]) -> Result<Selection> {
        let pattern = Pattern(counts.iter().map(|(m, n)| Constraint::Count((*m).clone(), *n)).collect());
        let sel = self.postselect(&pattern)?;
        let idx: Vec<usize> = counts.iter().map(|(m, _)| self.reg.index_of(m)).collect::<Result<_>>()?;
        Ok(Selection {
            probability: sel.probability,
            state: sel.state.map(|s| {
                let terms = s
                    .terms
                    .into_iter()
                    .map(|(mut o, a)| {
                        for &i in &idx {
                            o[i] = 0;
                        }
                        (o, a)
                    })
                    .collect();
                FockState { terms, ..s }
            }),
        })
    }

    /// Joint count distribution on the listed modes.
    pub fn marginal(&self, modes: &[Mode]) -> Result<BTreeMap<Vec<u8>, f64>> {
        let idx: Vec<usize> = modes.iter().map(|m| self.reg.index_of(m)).collect::<Result<_>>()?;
        let total = self.norm().powi(2);
        let mut out = BTreeMap::new();
        for (o, a) in &self.terms {
            let key: Vec<u8> = idx.iter().map(|&i| o[i]).collect();
            *out.entry(key).or_insert(0.0) += a.norm_sqr() / total;
        }
        Ok(out)
    }

    /// Mean photon number in the listed modes.
    pub fn mean_photons(&self, modes: &[Mode]) -> Result<f64> {
        Ok(self
            .marginal(modes)?
            .iter()
            .map(|(k, p)| p * k.iter().map(|&x| x as f64).sum::<f64>())
            .sum())
    }

    /// Reads a one-photon-per-pair state as qubits; `encoding[q] = (slot0, slot1)`,
    /// qubit 0 is the most significant bit.
    pub fn to_qubits(&self, encoding: &[(Mode, Mode)]) -> Result<QubitRegister> {
        let nq = encoding.len();
        let slots: Vec<(usize, usize)> = encoding
            .iter()
            .map(|(a, b)| Ok((self.reg.index_of(a)?, self.reg.index_of(b)?)))
            .collect::<Result<_>>()?;
        let mut used = vec![false; self.reg.len()];
        for &(a, b) in &slots {
            used[a] = true;
            used[b] = true;
        }
        let mut amps = vec![C64::default(); 1usize << nq];
        for (o, c) in &self.terms {
            let mut index = 0usize;
            let mut ok = o.iter().enumerate().all(|(i, &k)| used[i] || k == 0);
            for &(a, b) in &slots {
                match (o[a], o[b]) {
                    (1, 0) => index <<= 1,
                    (0, 1) => index = (index << 1) | 1,
                    _ => ok = false,
                }
            }
            if !ok {
                if c.norm() > 1e-12 {
                    return Err(Error::OutsideEncoding);
                }
                continue;
            }
            amps[index] += c;
        }
        QubitRegister::from_amplitudes(amps)
    }

    /// Reads photons carrying several qubits each: group `g` holds `2^k`
    /// modes and the mode's position in the group is the photon's `k`-bit value.
    pub fn to_photon_register(&self, groups: &[Vec<Mode>]) -> Result<QubitRegister> {
        let mut widths = Vec::with_capacity(groups.len());
        let mut idx = Vec::with_capacity(groups.len());
        for g in groups {
            if !g.len().is_power_of_two() || g.len() < 2 {
                return Err(Error::DimensionMismatch { expected: g.len().next_power_of_two().max(2), found: g.len() });
            }
            widths.push(g.len().trailing_zeros() as usize);
            idx.push(g.iter().map(|m| self.reg.index_of(m)).collect::<Result<Vec<_>>>()?);
        }
        let mut used = vec![false; self.reg.len()];
        idx.iter().flatten().for_each(|&i| used[i] = true);
        let total: usize = widths.iter().sum();
        let mut amps = vec![C64::default(); 1usize << total];
        for (o, c) in &self.terms {
            let mut index = 0usize;
            let mut ok = o.iter().enumerate().all(|(i, &k)| used[i] || k == 0);
            for (g, w) in idx.iter().zip(&widths) {
                let hits: Vec<usize> = g.iter().enumerate().filter(|(_, &i)| o[i] > 0).map(|(p, _)| p).collect();
                if hits.len() != 1 || o[g[hits[0]]] != 1 {
                    ok = false;
                    break;
                }
                index = (index << w) | hits[0];
            }
            if !ok {
                if c.norm() > 1e-12 {
                    return Err(Error::OutsideEncoding);
                }
                continue;
            }
            amps[index] += c;
        }
        QubitRegister::from_amplitudes(amps)
    }

    /// Copies the state into a larger registry, matching modes by name.
    pub fn embed(&self, reg: &Arc<Registry>) -> Result<FockState> {
        let map: Vec<usize> = self.reg.modes().iter().map(|m| reg.index_of(m)).collect::<Result<_>>()?;
        let terms = self
            .terms
            .iter()
            .map(|(o, c)| {
                let mut occ = vec![0u8; reg.len()];
                for (i, &k) in o.iter().enumerate() {
                    occ[map[i]] = k;
                }
                (occ, *c)
            })
            .collect();
        Ok(FockState { reg: reg.clone(), terms, nmax: self.nmax, discarded: self.discarded })
    }

    /// Total photon numbers present in the superposition.
    pub fn photon_numbers(&self) -> Vec<u32> {
        let mut v: Vec<u32> = self.terms.keys().map(|o| photons(o)).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Inverse of [`FockState::to_qubits`].
    pub fn from_qubits(q: &QubitRegister, encoding: &[(Mode, Mode)], reg: &Arc<Registry>) -> Result<FockState> {
        if encoding.len() != q.n() {
            return Err(Error::DimensionMismatch { expected: q.n(), found: encoding.len() });
        }
        let slots: Vec<(usize, usize)> = encoding
            .iter()
            .map(|(a, b)| Ok((reg.index_of(a)?, reg.index_of(b)?)))
            .collect::<Result<_>>()?;
        let nq = q.n();
        let mut terms = BTreeMap::new();
        for (index, c) in q.amplitudes().iter().enumerate() {
            if c.norm() < PRUNE {
                continue;
            }
            let mut o = vec![0u8; reg.len()];
            for (k, &(a, b)) in slots.iter().enumerate() {
                if (index >> (nq - 1 - k)) & 1 == 0 {
                    o[a] += 1;
                } else {
                    o[b] += 1;
                }
            }
            terms.insert(o, *c);
        }
        Ok(FockState { reg: reg.clone(), terms, nmax: DEFAULT_NMAX.max(nq as u32), discarded: 0.0 })
    }
}

fn photons(o: &[u8]) -> u32 {
    o.iter().map(|&k| k as u32).sum()
}

impl fmt::Display for FockState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (o, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({:.4}{:+.4}i)|", c.re, c.im)?;
            let parts: Vec<String> = o
                .iter()
                .enumerate()
                .filter(|(_, &k)| k > 0)
                .map(|(i, &k)| format!("{}^{}", self.reg.modes[i], k))
                .collect();
            write!(f, "{}⟩", parts.join(","))?;
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn creation_order_irrelevant() {
        let reg = Registry::polarized(&["a", "b"]);
        let (ah, _) = Mode::pair("a");
        let (_, bv) = Mode::pair("b");
        let s1 = FockState::from_monomials(&reg, &[(c(1.0, 0.0), vec![&ah, &bv])]).unwrap();
        let s2 = FockState::from_monomials(&reg, &[(c(1.0, 0.0), vec![&bv, &ah])]).unwrap();
        assert_eq!(s1, s2);
    }

    #[test]
    fn double_occupation_norm() {
        let reg = Registry::polarized(&["a"]);
        let ah = Mode::h("a");
        let s = CreationPoly::monomial(&reg, c(1.0, 0.0), &[&ah, &ah]).unwrap().to_state(12);
        assert!((s.norm() - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn detect_absorbs_photons() {
        let reg = Registry::polarized(&["a", "b"]);
        let s = FockState::from_monomials(
            &reg,
            &[(c(1.0, 0.0), vec![&Mode::h("a"), &Mode::h("b")]), (c(1.0, 0.0), vec![&Mode::v("a"), &Mode::v("b")])],
        )
        .unwrap();
        let sel = s.detect(&[(&Mode::h("a"), 1)]).unwrap();
        assert!((sel.probability - 0.5).abs() < 1e-12);
        let rest = sel.state.unwrap();
        assert!((rest.amplitude(&[(&Mode::h("b"), 1)]).unwrap().norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn then_composes_in_order() {
        let a = Mode::h("a");
        let b = Mode::h("b");
        let s = 0.5f64.sqrt();
        let bs = DMatrix::from_row_slice(2, 2, &[c(s, 0.0), c(0.0, s), c(0.0, s), c(s, 0.0)]);
        let m1 = ModeMap::on(vec![a.clone(), b.clone()], bs.clone()).unwrap();
        let m2 = ModeMap::on(vec![b.clone(), a.clone()], bs.clone()).unwrap();
        let comp = m1.then(&m2).unwrap();
        let reg = Registry::new([a.clone(), b.clone()]).unwrap();
        let s0 = FockState::basis(&reg, &[(&a, 1), (&b, 1)]).unwrap();
        let direct = s0.apply(&m1).unwrap().apply(&m2).unwrap();
        let via = s0.apply(&comp).unwrap();
        assert!(direct.distance(&via) < 1e-12);
    }
}
