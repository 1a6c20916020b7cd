//! Graph states, one-way computation by single-qubit measurements, photonic
//! fusion gates and cluster growth.
//!
//! A [`ClusterGraph`] on `n` vertices labels qubit `k` of its register by
//! vertex `k`. Removing a vertex relabels the survivors in ascending order.

use std::collections::BTreeSet;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::{DMatrix, Matrix2};
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fock::{FockState, Mode, Registry};
use crate::optics::{pbs_paths, wave_plate, Basis, Plate};
use crate::qubit::{hadamard, local_operator, rx, rz, schmidt_rank, Pauli, QubitRegister, MAX_QUBITS};
use crate::C64;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Simple undirected graph with one κ bit per vertex.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterGraph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
    kappa: Vec<u8>,
}

impl ClusterGraph {
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = ClusterGraph { n, edges: BTreeSet::new(), kappa: vec![0; n] };
        for &(a, b) in edges {
            if a == b || a >= n || b >= n {
                return Err(invalid("edges", format!("({a}, {b}) on {n} vertices")));
            }
            g.edges.insert((a.min(b), a.max(b)));
        }
        Ok(g)
    }

    pub fn empty(n: usize) -> Self {
        ClusterGraph { n, edges: BTreeSet::new(), kappa: vec![0; n] }
    }

    /// Linear cluster `0 − 1 − … − (n−1)`.
    pub fn chain(n: usize) -> Self {
        let edges: Vec<_> = (1..n).map(|k| (k - 1, k)).collect();
        ClusterGraph::new(n, &edges).expect("valid chain")
    }

    /// Square lattice, row-major.
    pub fn lattice(rows: usize, cols: usize) -> Self {
        let mut edges = Vec::new();
        for r in 0..rows {
            for k in 0..cols {
                let v = r * cols + k;
                if k + 1 < cols {
                    edges.push((v, v + 1));
                }
                if r + 1 < rows {
                    edges.push((v, v + cols));
                }
            }
        }
        ClusterGraph::new(rows * cols, &edges).expect("valid lattice")
    }

    /// The 2×2 box `0 − 1 − 2 − 3 − 0`.
    pub fn box4() -> Self {
        ClusterGraph::new(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]).expect("valid box")
    }

    pub fn with_kappa(mut self, kappa: Vec<u8>) -> Result<Self> {
        if kappa.len() != self.n || kappa.iter().any(|&k| k > 1) {
            return Err(invalid("kappa", "one bit per vertex"));
        }
        self.kappa = kappa;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn kappa(&self) -> &[u8] {
        &self.kappa
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }

    pub fn neighbors(&self, a: usize) -> Vec<usize> {
        (0..self.n).filter(|&b| b != a && self.has_edge(a, b)).collect()
    }

    fn toggle(&mut self, a: usize, b: usize) {
        let e = (a.min(b), a.max(b));
        if !self.edges.remove(&e) {
            self.edges.insert(e);
        }
    }

    /// Complements the subgraph induced on the neighborhood of `a`.
    pub fn local_complement(&self, a: usize) -> ClusterGraph {
        let mut g = self.clone();
        let nb = self.neighbors(a);
        for (i, &x) in nb.iter().enumerate() {
            for &y in &nb[i + 1..] {
                g.toggle(x, y);
            }
        }
        g
    }

    /// Deletes vertex `a`; later vertices shift down by one.
    pub fn remove(&self, a: usize) -> ClusterGraph {
        let shift = |v: usize| if v > a { v - 1 } else { v };
        ClusterGraph {
            n: self.n - 1,
            edges: self.edges.iter().filter(|(x, y)| *x != a && *y != a).map(|&(x, y)| (shift(x), shift(y))).collect(),
            kappa: self.kappa.iter().enumerate().filter(|(v, _)| *v != a).map(|(_, &k)| k).collect(),
        }
    }

    /// Disjoint union; `other`'s vertices follow this graph's.
    pub fn union(&self, other: &ClusterGraph) -> ClusterGraph {
        let mut g = self.clone();
        g.n += other.n;
        g.edges.extend(other.edges.iter().map(|&(a, b)| (a + self.n, b + self.n)));
        g.kappa.extend(&other.kappa);
        g
    }

    /// Identifies `b` with `a`: the merged vertex takes the symmetric
    /// difference of the two neighborhoods and sits at `a`'s position.
    pub fn merge(&self, a: usize, b: usize) -> ClusterGraph {
        let mut g = self.clone();
        for x in self.neighbors(b) {
            if x != a {
                g.toggle(a, x);
            }
        }
        g.edges.remove(&(a.min(b), a.max(b)));
        g.remove(b)
    }

    /// Vertices of each connected component.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.n];
        let mut out = Vec::new();
        for s in 0..self.n {
            if seen[s] {
                continue;
            }
            let mut stack = vec![s];
            let mut comp = Vec::new();
            seen[s] = true;
            while let Some(v) = stack.pop() {
                comp.push(v);
                for w in self.neighbors(v) {
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    /// Pauli string of `K^(a) = X_a ⊗ Z_{N(a)}`.
    pub fn stabilizer(&self, a: usize) -> Vec<Pauli> {
        let mut p = vec![Pauli::I; self.n];
        p[a] = Pauli::X;
        for b in self.neighbors(a) {
            p[b] = Pauli::Z;
        }
        p
    }
}

fn check_size(n: usize) -> Result<()> {
    if n > MAX_QUBITS {
        Err(Error::TooManyQubits(n))
    } else {
        Ok(())
    }
}

/// `Π Z^{κ_a} Π CZ_{ab} |+⟩^⊗n`.
pub fn build_cluster(graph: &ClusterGraph) -> Result<QubitRegister> {
    check_size(graph.n)?;
    let mut s = QubitRegister::plus(graph.n)?;
    for (a, b) in graph.edges() {
        s = s.cz(a, b);
    }
    for (a, &k) in graph.kappa.iter().enumerate() {
        if k == 1 {
            s = s.apply_pauli(a, Pauli::Z);
        }
    }
    Ok(s)
}

/// Graph state with `input` placed on `inputs` (in order) and `|+⟩` on
/// every other vertex, before the CZ network.
pub fn build_with_input(graph: &ClusterGraph, inputs: &[usize], input: &QubitRegister) -> Result<QubitRegister> {
    check_size(graph.n)?;
    if input.n() != inputs.len() {
        return Err(Error::DimensionMismatch { expected: inputs.len(), found: input.n() });
    }
    if inputs.iter().any(|&v| v >= graph.n) || inputs.iter().collect::<BTreeSet<_>>().len() != inputs.len() {
        return Err(invalid("inputs", "distinct vertices of the graph"));
    }
    let rest: Vec<usize> = (0..graph.n).filter(|v| !inputs.contains(v)).collect();
    let mut s = input.tensor(&QubitRegister::plus(rest.len())?)?;
    let placed: Vec<usize> = inputs.iter().chain(&rest).copied().collect();
    let mut order = vec![0; graph.n];
    for (k, &v) in placed.iter().enumerate() {
        order[v] = k;
    }
    s = s.permute(&order);
    for (a, b) in graph.edges() {
        s = s.cz(a, b);
    }
    Ok(s)
}

/// `⟨K^(a)⟩` for every vertex.
pub fn verify_stabilizers(state: &QubitRegister, graph: &ClusterGraph) -> Result<Vec<f64>> {
    if state.n() != graph.n {
        return Err(Error::DimensionMismatch { expected: graph.n, found: state.n() });
    }
    Ok((0..graph.n)
        .map(|a| {
            let ops: Vec<_> = graph.stabilizer(a).into_iter().map(|p| Some(p.matrix())).collect();
            state.expectation(&local_operator(&ops)).re
        })
        .collect())
}

/// Single-qubit operators appearing in graph-rule corrections.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LocalOp {
    Pauli(Pauli),
    /// `(I + s·iZ)/√2`, `s = ±1`.
    RootZ(i8),
    /// `(I + s·iY)/√2`, `s = ±1`.
    RootY(i8),
}

impl LocalOp {
    pub fn matrix(self) -> Matrix2<C64> {
        let root = |p: Pauli, s: i8| (Matrix2::identity() + p.matrix() * c(0.0, s as f64)) * c(FRAC_1_SQRT_2, 0.0);
        match self {
            LocalOp::Pauli(p) => p.matrix(),
            LocalOp::RootZ(s) => root(Pauli::Z, s),
            LocalOp::RootY(s) => root(Pauli::Y, s),
        }
    }
}

/// Single-qubit measurement basis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum MBasis {
    Z,
    /// Eigenbasis `(|0⟩ ± e^{iα}|1⟩)/√2`; α = 0 is x̂, α = π/2 is ŷ.
    Equatorial(f64),
}

impl MBasis {
    pub const X: MBasis = MBasis::Equatorial(0.0);
    pub const Y: MBasis = MBasis::Equatorial(PI / 2.0);

    /// Columns are the outcome-0 and outcome-1 states.
    pub fn matrix(self) -> Matrix2<C64> {
        match self {
            MBasis::Z => Matrix2::identity(),
            MBasis::Equatorial(a) => {
                let e = C64::from_polar(FRAC_1_SQRT_2, a);
                Matrix2::new(c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0), e, -e)
            }
        }
    }
}

/// Pauli measurement used by the graph rules.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PauliBasis {
    X,
    Y,
    Z,
}

/// Graph left by measuring vertex `a` in a Pauli basis with outcome `s`,
/// and the local operators `U` with post-measurement state `U|G′⟩`.
/// Vertex labels in the result follow [`ClusterGraph::remove`].
pub fn graph_rule(graph: &ClusterGraph, a: usize, basis: PauliBasis, s: u8) -> Result<(ClusterGraph, Vec<(usize, LocalOp)>)> {
    if a >= graph.n {
        return Err(invalid("vertex", format!("{a} not in graph")));
    }
    let relabel = |v: usize| if v > a { v - 1 } else { v };
    let na = graph.neighbors(a);
    let (g, ops): (ClusterGraph, Vec<(usize, LocalOp)>) = match basis {
        PauliBasis::Z => {
            let ops = if s == 1 { na.iter().map(|&b| (b, LocalOp::Pauli(Pauli::Z))).collect() } else { vec![] };
            (graph.clone(), ops)
        }
        PauliBasis::Y => {
            let sign = if s == 0 { -1 } else { 1 };
            (graph.local_complement(a), na.iter().map(|&b| (b, LocalOp::RootZ(sign))).collect())
        }
        PauliBasis::X => match na.first() {
            None => (graph.clone(), vec![]),
            Some(&b0) => {
                let g = graph.local_complement(b0).local_complement(a).local_complement(b0);
                let nb0 = graph.neighbors(b0);
                let mut ops = Vec::new();
                if s == 0 {
                    ops.push((b0, LocalOp::RootY(1)));
                    ops.extend(na.iter().filter(|&&b| b != b0 && !nb0.contains(&b)).map(|&b| (b, LocalOp::Pauli(Pauli::Z))));
                } else {
                    ops.push((b0, LocalOp::RootY(-1)));
                    ops.extend(nb0.iter().filter(|&&b| b != a && !na.contains(&b)).map(|&b| (b, LocalOp::Pauli(Pauli::Z))));
                }
                (g, ops)
            }
        },
    };
    Ok((g.remove(a), ops.into_iter().map(|(v, o)| (relabel(v), o)).collect()))
}

/// Measures qubit `q` and removes it.
pub fn measure_qubit(state: &QubitRegister, q: usize, basis: MBasis, s: u8) -> Result<(f64, Option<QubitRegister>)> {
    if q >= state.n() || s > 1 {
        return Err(invalid("qubit", format!("{q} with outcome {s}")));
    }
    Ok(state.measure(q, &basis.matrix(), s as usize))
}

/// Applies `ops` qubit by qubit.
pub fn apply_local(state: &QubitRegister, ops: &[(usize, LocalOp)]) -> QubitRegister {
    ops.iter().fold(state.clone(), |s, (q, o)| s.apply_1q(*q, &o.matrix()))
}

/// One measurement of a pattern. `successor` is the unmeasured neighbor
/// that absorbs the byproduct of an equatorial measurement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub vertex: usize,
    pub basis: MBasis,
    pub successor: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementPattern {
    pub graph: ClusterGraph,
    pub inputs: Vec<usize>,
    pub steps: Vec<Step>,
    pub outputs: Vec<usize>,
}

impl MeasurementPattern {
    /// Checks the ordering and byproduct-routing constraints.
    pub fn validate(&self) -> Result<()> {
        let g = &self.graph;
        let mut measured = BTreeSet::new();
        for st in &self.steps {
            let a = st.vertex;
            if a >= g.n || !measured.insert(a) {
                return Err(invalid("steps", format!("vertex {a} measured twice or missing")));
            }
            match st.basis {
                MBasis::Z => {
                    if self.inputs.contains(&a) {
                        return Err(invalid("steps", format!("input {a} cannot be measured in z")));
                    }
                    if g.neighbors(a).iter().any(|b| measured.contains(b)) {
                        return Err(invalid("steps", format!("z on {a} references a measured neighbor")));
                    }
                }
                MBasis::Equatorial(_) => {
                    let b = st.successor.ok_or_else(|| invalid("steps", format!("vertex {a} needs a successor")))?;
                    if !g.has_edge(a, b) || measured.contains(&b) || self.inputs.contains(&b) {
                        return Err(invalid("steps", format!("successor {b} of {a} is not a later non-input neighbor")));
                    }
                    if g.neighbors(b).iter().any(|x| *x != a && measured.contains(x)) {
                        return Err(invalid("steps", format!("successor {b} of {a} touches a measured vertex")));
                    }
                }
            }
        }
        let rest: BTreeSet<usize> = (0..g.n).filter(|v| !measured.contains(v)).collect();
        if rest != self.outputs.iter().copied().collect() || rest.len() != self.outputs.len() {
            return Err(invalid("outputs", "must list exactly the unmeasured vertices"));
        }
        Ok(())
    }
}

/// Outcome branching mode.
pub enum Branching<'a> {
    Exhaustive,
    Sample(&'a mut ChaCha20Rng),
}

/// Pauli frame `X^x Z^z` on one output qubit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Byproduct {
    pub x: bool,
    pub z: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PatternBranch {
    /// Raw outcomes in step order.
    pub outcomes: Vec<u8>,
    /// Angles actually used after adaptation, in step order.
    pub angles: Vec<Option<f64>>,
    pub probability: f64,
    /// Output qubits in `outputs` order, before correction.
    pub raw: QubitRegister,
    pub byproducts: Vec<Byproduct>,
    pub corrected: QubitRegister,
}

struct Walk {
    state: QubitRegister,
    alive: Vec<usize>,
    frame: Vec<Byproduct>,
    outcomes: Vec<u8>,
    angles: Vec<Option<f64>>,
    probability: f64,
}

/// Runs a pattern on `state` (qubit `k` = vertex `k`), adapting angles
/// and tracking byproducts in a Pauli frame.
pub fn measure_pattern(state: &QubitRegister, pattern: &MeasurementPattern, mut mode: Branching) -> Result<Vec<PatternBranch>> {
    pattern.validate()?;
    if state.n() != pattern.graph.n {
        return Err(Error::DimensionMismatch { expected: pattern.graph.n, found: state.n() });
    }
    let mut walks = vec![Walk {
        state: state.clone(),
        alive: (0..state.n()).collect(),
        frame: vec![Byproduct::default(); state.n()],
        outcomes: Vec::new(),
        angles: Vec::new(),
        probability: 1.0,
    }];
    let g = &pattern.graph;
    for st in &pattern.steps {
        let mut next = Vec::new();
        for w in walks {
            let pos = w.alive.iter().position(|&v| v == st.vertex).expect("validated");
            let f = w.frame[st.vertex];
            let (basis, flip, angle) = match st.basis {
                MBasis::Z => (MBasis::Z, f.x, None),
                MBasis::Equatorial(a) => {
                    let a = if f.x { -a } else { a };
                    (MBasis::Equatorial(a), f.z, Some(a))
                }
            };
            let branches: Vec<(u8, f64, QubitRegister)> = [0u8, 1]
                .iter()
                .filter_map(|&s| {
                    let (p, post) = w.state.measure(pos, &basis.matrix(), s as usize);
                    post.map(|q| (s, p, q))
                })
                .collect();
            let chosen: Vec<(u8, f64, QubitRegister)> = match &mut mode {
                Branching::Exhaustive => branches,
                Branching::Sample(rng) => {
                    let r: f64 = rng.gen();
                    let mut acc = 0.0;
                    let mut pick = branches.last().cloned();
                    for b in &branches {
                        acc += b.1;
                        if r < acc {
                            pick = Some(b.clone());
                            break;
                        }
                    }
                    pick.map(|(s, _, q)| vec![(s, 1.0, q)]).unwrap_or_default()
                }
            };
            for (s, p, post) in chosen {
                let mut frame = w.frame.clone();
                if (s == 1) != flip {
                    match st.basis {
                        MBasis::Z => {
                            for b in g.neighbors(st.vertex) {
                                frame[b].z ^= true;
                            }
                        }
                        MBasis::Equatorial(_) => {
                            let b = st.successor.expect("validated");
                            frame[b].x ^= true;
                            for x in g.neighbors(b) {
                                if x != st.vertex {
                                    frame[x].z ^= true;
                                }
                            }
                        }
                    }
                }
                let mut alive = w.alive.clone();
                alive.remove(pos);
                let mut outcomes = w.outcomes.clone();
                outcomes.push(s);
                let mut angles = w.angles.clone();
                angles.push(angle);
                next.push(Walk { state: post, alive, frame, outcomes, angles, probability: w.probability * p });
            }
        }
        walks = next;
    }
    walks
        .into_iter()
        .map(|w| {
            let order: Vec<usize> = pattern.outputs.iter().map(|v| w.alive.iter().position(|x| x == v).expect("validated")).collect();
            let raw = w.state.permute(&order);
            let byproducts: Vec<Byproduct> = pattern.outputs.iter().map(|&v| w.frame[v]).collect();
            let mut corrected = raw.clone();
            for (k, b) in byproducts.iter().enumerate() {
                if b.x {
                    corrected = corrected.apply_pauli(k, Pauli::X);
                }
                if b.z {
                    corrected = corrected.apply_pauli(k, Pauli::Z);
                }
            }
            Ok(PatternBranch {
                outcomes: w.outcomes,
                angles: w.angles,
                probability: w.probability,
                raw,
                byproducts,
                corrected,
            })
        })
        .collect()
}

/// Linear cluster carrying one logical qubit from vertex 0 to vertex
/// `angles.len()`, measuring vertex `k` at `angles[k]`.
pub fn chain_pattern(angles: &[f64]) -> MeasurementPattern {
    let n = angles.len() + 1;
    MeasurementPattern {
        graph: ClusterGraph::chain(n),
        inputs: vec![0],
        steps: angles
            .iter()
            .enumerate()
            .map(|(k, &a)| Step { vertex: k, basis: MBasis::Equatorial(a), successor: Some(k + 1) })
            .collect(),
        outputs: vec![n - 1],
    }
}

/// `H·diag(1, e^{−iα})` implemented by one chain link.
pub fn chain_link(alpha: f64) -> Matrix2<C64> {
    hadamard() * Matrix2::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), C64::from_polar(1.0, -alpha))
}

/// Five-vertex chain implementing `R_x(ζ) R_z(η) R_x(ξ)`; the measured
/// angles are `(0, −ξ, −η, −ζ)`.
pub fn euler_pattern(xi: f64, eta: f64, zeta: f64) -> MeasurementPattern {
    chain_pattern(&[0.0, -xi, -eta, -zeta])
}

pub fn euler_unitary(xi: f64, eta: f64, zeta: f64) -> Matrix2<C64> {
    rx(zeta) * rz(eta) * rx(xi)
}

/// CNOT on the four-vertex T graph: vertex 0 is the control (input and
/// output), 1 the target input, 2 the junction, 3 the target output.
pub fn cnot_pattern() -> MeasurementPattern {
    MeasurementPattern {
        graph: ClusterGraph::new(4, &[(0, 2), (1, 2), (2, 3)]).expect("valid graph"),
        inputs: vec![0, 1],
        steps: vec![
            Step { vertex: 1, basis: MBasis::X, successor: Some(2) },
            Step { vertex: 2, basis: MBasis::X, successor: Some(3) },
        ],
        outputs: vec![0, 3],
    }
}

/// Runs `pattern` on `input` placed on its input vertices.
pub fn run_with_input(pattern: &MeasurementPattern, input: &QubitRegister) -> Result<Vec<PatternBranch>> {
    let s = build_with_input(&pattern.graph, &pattern.inputs, input)?;
    measure_pattern(&s, pattern, Branching::Exhaustive)
}

/// Fusion gate variant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FusionKind {
    /// PBS, then one output measured after a 45° rotation.
    TypeI,
    /// Rotated PBS with both outputs measured.
    TypeII,
}

/// Linear map of one detection signature from the two input qubits
/// (`|ab⟩`, index `2a + b`) to the surviving photon's polarization.
#[derive(Clone, Debug, PartialEq)]
pub struct FusionKraus {
    pub signature: String,
    pub success: bool,
    /// Rows: surviving configuration (`H`, `V` for type-I success; one
    /// row per leftover occupation otherwise).
    pub map: DMatrix<C64>,
}

/// Detection signatures of a fusion gate, derived from the Fock-level
/// optics for each of the four input polarization pairs.
pub fn fusion_kraus(kind: FusionKind) -> Result<Vec<FusionKraus>> {
    let reg = Registry::polarized(&["a", "b", "c", "d"]);
    let hwp = |p: &str| wave_plate(Mode::pair(p), Plate::Half, PI / 8.0);
    let maps = match kind {
        FusionKind::TypeI => vec![pbs_paths("a", "b", "c", "d", Basis::Rectilinear)?, hwp("d")?],
        FusionKind::TypeII => vec![hwp("a")?, hwp("b")?, pbs_paths("a", "b", "c", "d", Basis::Rectilinear)?, hwp("c")?, hwp("d")?],
    };
    let detected: Vec<Mode> = match kind {
        FusionKind::TypeI => vec![Mode::h("d"), Mode::v("d")],
        FusionKind::TypeII => vec![Mode::h("c"), Mode::v("c"), Mode::h("d"), Mode::v("d")],
    };
    let kept: Vec<Mode> = match kind {
        FusionKind::TypeI => vec![Mode::h("c"), Mode::v("c")],
        FusionKind::TypeII => vec![],
    };
    let di: Vec<usize> = detected.iter().map(|m| reg.index_of(m)).collect::<Result<_>>()?;
    let ki: Vec<usize> = kept.iter().map(|m| reg.index_of(m)).collect::<Result<_>>()?;
    let pols = [Mode::h, Mode::v];
    // (detected counts, kept counts) -> amplitude per input
    let mut table: std::collections::BTreeMap<Vec<u8>, std::collections::BTreeMap<Vec<u8>, [C64; 4]>> = Default::default();
    for (idx, (pa, pb)) in [(0, 0), (0, 1), (1, 0), (1, 1)].into_iter().enumerate() {
        let s = FockState::basis(&reg, &[(&pols[pa]("a"), 1), (&pols[pb]("b"), 1)])?.apply_all(&maps)?;
        for (occ, amp) in s.terms() {
            let d: Vec<u8> = di.iter().map(|&i| occ[i]).collect();
            let k: Vec<u8> = ki.iter().map(|&i| occ[i]).collect();
            table.entry(d).or_default().entry(k).or_insert([C64::default(); 4])[idx] += amp;
        }
    }
    let names: Vec<String> = detected.iter().map(|m| format!("{}{}", if m.pol == 0 { "H" } else { "V" }, m.path)).collect();
    let mut out = Vec::new();
    for (d, rows) in table {
        let signature = d.iter().zip(&names).map(|(n, name)| format!("{name}:{n}")).collect::<Vec<_>>().join(" ");
        let (success, map) = match kind {
            FusionKind::TypeI if d.iter().sum::<u8>() == 1 => {
                let mut m = DMatrix::zeros(2, 4);
                for (k, amps) in &rows {
                    let r = if k.as_slice() == [1, 0] { 0 } else { 1 };
                    for j in 0..4 {
                        m[(r, j)] = amps[j];
                    }
                }
                (true, m)
            }
            FusionKind::TypeII if d[0] + d[1] == 1 && d[2] + d[3] == 1 => {
                let amps = rows.values().next().copied().unwrap_or_default();
                (true, DMatrix::from_row_slice(1, 4, &amps))
            }
            _ => {
                let mut m = DMatrix::zeros(rows.len(), 4);
                for (r, amps) in rows.values().enumerate() {
                    for j in 0..4 {
                        m[(r, j)] = amps[j];
                    }
                }
                (false, m)
            }
        };
        out.push(FusionKraus { signature, success, map });
    }
    Ok(out)
}

/// Applies a `rows × 4` map to qubits `(a, b)`. With two rows the output
/// qubit replaces `a` and `b` is removed; with one row both are removed.
/// Returns the unnormalized amplitudes.
fn apply_pair_map(state: &QubitRegister, a: usize, b: usize, row_map: &[C64], rows: usize) -> Vec<C64> {
    let n = state.n();
    let rest: Vec<usize> = (0..n).filter(|&q| q != a && q != b).collect();
    let order: Vec<usize> = [a, b].iter().chain(&rest).copied().collect();
    let p = state.permute(&order);
    let r = 1usize << rest.len();
    let amps = p.amplitudes();
    let mut out = vec![C64::default(); rows * r];
    for o in 0..rows {
        for j in 0..4 {
            let k = row_map[o * 4 + j];
            if k == C64::default() {
                continue;
            }
            for t in 0..r {
                out[o * r + t] += k * amps[j * r + t];
            }
        }
    }
    if rows == 1 {
        return out;
    }
    // move the output qubit from the front to a's slot among the survivors
    let pos = if b < a { a - 1 } else { a };
    let m = rest.len() + 1;
    let mut placed = vec![C64::default(); out.len()];
    for (i, v) in out.iter().enumerate() {
        let o = i >> rest.len();
        let t = i & (r - 1);
        let hi = t >> (m - 1 - pos);
        let lo = t & ((1 << (m - 1 - pos)) - 1);
        let j = (hi << (m - pos)) | (o << (m - 1 - pos)) | lo;
        placed[j] = *v;
    }
    placed
}

#[derive(Clone, Debug, PartialEq)]
pub struct FusionBranch {
    pub signature: String,
    pub probability: f64,
    pub success: bool,
    pub state: QubitRegister,
    /// Graph the corrected state equals, when the rule is known.
    pub graph: Option<ClusterGraph>,
    /// Pauli corrections on `graph`'s vertices.
    pub correction: Vec<(usize, Pauli)>,
    pub corrected: QubitRegister,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Fusion {
    pub branches: Vec<FusionBranch>,
    pub success_probability: f64,
}

/// Fuses vertices `a` and `b` of a graph state, enumerating every
/// detection branch.
///
/// Type-I success merges `b` into `a`. Type-I failure acts as ẑ
/// measurements of both and removes them. Type-II success removes both.
pub fn fuse(state: &QubitRegister, graph: &ClusterGraph, a: usize, b: usize, kind: FusionKind) -> Result<Fusion> {
    if a == b {
        return Err(invalid("fusion", "operands must be distinct vertices"));
    }
    if a >= graph.n || b >= graph.n || state.n() != graph.n {
        return Err(Error::DimensionMismatch { expected: graph.n, found: state.n() });
    }
    let mut branches = Vec::new();
    for k in fusion_kraus(kind)? {
        let rows = k.map.nrows();
        if k.success && kind == FusionKind::TypeI {
            let flat: Vec<C64> = (0..2).flat_map(|r| (0..4).map(move |j| (r, j))).map(|(r, j)| k.map[(r, j)]).collect();
            let amps = apply_pair_map(state, a, b, &flat, 2);
            let p: f64 = amps.iter().map(|x| x.norm_sqr()).sum();
            if p < 1e-24 {
                continue;
            }
            let out = QubitRegister::from_amplitudes(amps)?;
            let merged = graph.merge(a, b);
            let m = if b < a { a - 1 } else { a };
            let sign = (k.map[(1, 3)] / k.map[(0, 0)]).re < 0.0;
            let mut correction = Vec::new();
            if sign != graph.has_edge(a, b) {
                correction.push((m, Pauli::Z));
            }
            let corrected = correction.iter().fold(out.clone(), |s, (q, pl)| s.apply_pauli(*q, *pl));
            branches.push(FusionBranch {
                signature: k.signature,
                probability: p,
                success: true,
                state: out,
                graph: Some(merged),
                correction,
                corrected,
            });
            continue;
        }
        for r in 0..rows {
            let row: Vec<C64> = (0..4).map(|j| k.map[(r, j)]).collect();
            let amps = apply_pair_map(state, a, b, &row, 1);
            let p: f64 = amps.iter().map(|x| x.norm_sqr()).sum();
            if p < 1e-24 {
                continue;
            }
            let out = QubitRegister::from_amplitudes(amps)?;
            let (graph_out, correction) = if k.success {
                (None, Vec::new())
            } else {
                z_failure(graph, a, b, &row)?
            };
            let corrected = correction.iter().fold(out.clone(), |s, (q, pl)| s.apply_pauli(*q, *pl));
            branches.push(FusionBranch {
                signature: if rows > 1 { format!("{} #{r}", k.signature) } else { k.signature.clone() },
                probability: p,
                success: k.success,
                state: out,
                graph: graph_out,
                correction,
                corrected,
            });
        }
    }
    let success_probability = branches.iter().filter(|b| b.success).map(|b| b.probability).sum();
    Ok(Fusion { branches, success_probability })
}

/// Failure rows project onto a computational state of `(a, b)`; the
/// remaining graph loses both vertices with ẑ byproducts on the
/// neighbors of each vertex found in `|1⟩`.
fn z_failure(graph: &ClusterGraph, a: usize, b: usize, row: &[C64]) -> Result<(Option<ClusterGraph>, Vec<(usize, Pauli)>)> {
    let support: Vec<usize> = (0..4).filter(|&j| row[j].norm() > 1e-12).collect();
    let [j] = support.as_slice() else {
        return Ok((None, Vec::new()));
    };
    let (za, zb) = (j >> 1 & 1, j & 1);
    let mut flips = vec![false; graph.n];
    for (v, z) in [(a, za), (b, zb)] {
        if z == 1 {
            for x in graph.neighbors(v) {
                flips[x] ^= true;
            }
        }
    }
    let (hi, lo) = (a.max(b), a.min(b));
    let g = graph.remove(hi).remove(lo);
    let relabel = |v: usize| v - (v > lo) as usize - (v > hi) as usize;
    let correction = (0..graph.n).filter(|&v| flips[v] && v != a && v != b).map(|v| (relabel(v), Pauli::Z)).collect();
    Ok((Some(g), correction))
}

/// State-level assembly of the 2×2 box: three type-I fusions build a
/// five-chain from Bell-pair clusters, and fusing its two ends closes the
/// loop. Only the all-success branches are kept.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxGrowth {
    pub success_probability: f64,
    pub branches: Vec<(f64, QubitRegister)>,
    pub graph: ClusterGraph,
}

pub fn grow_box() -> Result<BoxGrowth> {
    let pair = ClusterGraph::chain(2);
    let pair_state = build_cluster(&pair)?;
    let mut current: Vec<(f64, QubitRegister)> = vec![(1.0, pair_state.clone())];
    let mut graph = pair.clone();
    for _ in 0..3 {
        let end = graph.n() - 1;
        let joined = graph.union(&pair);
        let mut next = Vec::new();
        for (p, s) in &current {
            let f = fuse(&s.tensor(&pair_state)?, &joined, end, end + 1, FusionKind::TypeI)?;
            for b in f.branches.into_iter().filter(|b| b.success) {
                next.push((p * b.probability, b.corrected));
            }
        }
        graph = joined.merge(end, end + 1);
        current = next;
    }
    let last = graph.n() - 1;
    let mut closed = Vec::new();
    for (p, s) in &current {
        let f = fuse(s, &graph, 0, last, FusionKind::TypeI)?;
        for b in f.branches.into_iter().filter(|b| b.success) {
            closed.push((p * b.probability, b.corrected));
        }
    }
    let graph = graph.merge(0, last);
    Ok(BoxGrowth { success_probability: closed.iter().map(|b| b.0).sum(), branches: closed, graph })
}

/// Probability that at least one of `n0` type-I connection attempts,
/// each succeeding with ½, goes through; by enumerating outcome strings.
pub fn connection_success(n0: u32) -> Result<f64> {
    if n0 == 0 || n0 > 24 {
        return Err(invalid("n0", format!("{n0} outside 1..=24")));
    }
    let total = (0u32..1 << n0).filter(|s| *s != 0).count();
    Ok(total as f64 / (1u64 << n0) as f64)
}

/// Operation and time accounting of the square-lattice growth strategy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub side: usize,
    pub nodes: usize,
    pub n0: usize,
    pub type_i: u64,
    pub type_ii: u64,
    pub x_measurements: u64,
    pub y_measurements: u64,
    pub rebuilt_nodes: u64,
    pub rounds: u64,
    /// Stabilizer check of the state-level 2×2 run, when `side == 2`.
    pub verified: Option<bool>,
}

impl GrowthReport {
    pub fn fusions(&self) -> u64 {
        self.type_i + self.type_ii
    }
}

/// Builds a linear cluster of at least `len` qubits from two-qubit
/// clusters by rounds of pairwise type-I fusions.
/// Returns (fusions, rounds).
pub fn build_chain(len: usize, rng: &mut ChaCha20Rng) -> (u64, u64) {
    let mut pool: Vec<usize> = vec![2; len.saturating_sub(1).max(1)];
    let (mut fusions, mut rounds) = (0u64, 0u64);
    loop {
        if pool.iter().any(|&l| l >= len) {
            return (fusions, rounds);
        }
        pool.sort_unstable_by(|a, b| b.cmp(a));
        let need: usize = len - pool[0];
        if pool.len() < 2 {
            pool.extend(std::iter::repeat_n(2, need.max(1)));
        }
        rounds += 1;
        let mut next = Vec::new();
        let mut it = pool.chunks(2);
        for ch in &mut it {
            if let [x, y] = ch {
                fusions += 1;
                if rng.gen_bool(0.5) {
                    next.push(x + y - 1);
                } else {
                    next.extend([x - 1, y - 1].into_iter().filter(|&l| l >= 2));
                }
            } else {
                next.push(ch[0]);
            }
        }
        pool = next;
        if pool.is_empty() {
            pool = vec![2; len - 1];
        }
    }
}

/// One +-shaped node: two chains with a redundantly encoded middle, joined
/// by type-II fusion until success. Returns (type-I, type-II, x, rounds).
fn build_node(n0: usize, rng: &mut ChaCha20Rng) -> (u64, u64, u64, u64) {
    let (mut t1, mut t2, mut xm, mut rounds) = (0, 0, 0, 0);
    loop {
        let (f1, r1) = build_chain(2 * n0 + 1, rng);
        let (f2, r2) = build_chain(2 * n0 + 3, rng);
        t1 += f1 + f2;
        xm += 1;
        t2 += 1;
        rounds += r1.max(r2) + 1;
        if rng.gen_bool(0.5) {
            return (t1, t2, xm, rounds);
        }
    }
}

/// Bookkeeping simulation of the square-lattice strategy on a `side²`
/// lattice with legs of length `n0`. No state vector is kept except for
/// the state-level check at `side == 2`.
pub fn grow_2d(side: usize, n0: usize, rng: &mut ChaCha20Rng) -> Result<GrowthReport> {
    if n0 == 0 {
        return Err(invalid("n0", "leg length must be positive"));
    }
    if side < 2 {
        return Err(invalid("side", "lattice side must be at least 2"));
    }
    let nodes = side * side;
    let mut rep = GrowthReport {
        side,
        nodes,
        n0,
        type_i: 0,
        type_ii: 0,
        x_measurements: 0,
        y_measurements: 0,
        rebuilt_nodes: 0,
        rounds: 0,
        verified: None,
    };
    let mut node_rounds = 0;
    for _ in 0..nodes {
        let (a, b, x, r) = build_node(n0, rng);
        rep.type_i += a;
        rep.type_ii += b;
        rep.x_measurements += x;
        node_rounds = node_rounds.max(r);
    }
    rep.rounds += node_rounds;
    let lattice = ClusterGraph::lattice(side, side);
    let edges: Vec<(usize, usize)> = lattice.edges().collect();
    // merge blocks level by level; edges joining blocks at the same level
    // are attempted in parallel
    let levels = (nodes as f64).log2().ceil() as u64;
    let mut per_level = vec![0u64; levels.max(1) as usize];
    for (k, _) in edges.iter().enumerate() {
        let level = k % per_level.len();
        let mut attempts = 0u64;
        loop {
            let mut done = false;
            for tried in 1..=n0 {
                rep.type_i += 1;
                attempts += 1;
                if rng.gen_bool(0.5) {
                    rep.y_measurements += 2 * (n0 - tried) as u64 + 1;
                    done = true;
                    break;
                }
            }
            if done {
                break;
            }
            let (a, b, x, _) = build_node(n0, rng);
            rep.type_i += a;
            rep.type_ii += b;
            rep.x_measurements += x;
            rep.rebuilt_nodes += 1;
        }
        per_level[level] = per_level[level].max(attempts);
    }
    rep.rounds += per_level.iter().sum::<u64>();
    if side == 2 {
        let g = grow_box()?;
        let box_graph = ClusterGraph::box4();
        let ok = g.graph == box_graph
            && g.branches.iter().all(|(_, s)| verify_stabilizers(s, &box_graph).map(|k| k.iter().all(|v| (v - 1.0).abs() < 1e-10)).unwrap_or(false));
        rep.verified = Some(ok);
    }
    Ok(rep)
}

/// Least-squares fit `y ≈ c·f(x)`; returns `c` and the relative RMS residual.
pub fn fit_scale(points: &[(f64, f64)], f: impl Fn(f64) -> f64) -> (f64, f64) {
    let num: f64 = points.iter().map(|(x, y)| y * f(*x)).sum();
    let den: f64 = points.iter().map(|(x, _)| f(*x).powi(2)).sum();
    let coef = num / den;
    let rms = (points.iter().map(|(x, y)| ((y - coef * f(*x)) / y).powi(2)).sum::<f64>() / points.len() as f64).sqrt();
    (coef, rms)
}

/// Oracle tags for the box-cluster search: vertex 3 carries the first
/// label bit and vertex 0 the second, each as a measurement angle 0 or π.
pub fn grover_pattern(marked: u8) -> Result<MeasurementPattern> {
    if marked > 3 {
        return Err(invalid("marked", format!("{marked} is not a two-bit label")));
    }
    let angle = |bit: u8| if bit == 1 { PI } else { 0.0 };
    Ok(MeasurementPattern {
        graph: ClusterGraph::box4(),
        inputs: vec![],
        steps: vec![
            Step { vertex: 0, basis: MBasis::Equatorial(angle(marked & 1)), successor: Some(1) },
            Step { vertex: 3, basis: MBasis::Equatorial(angle(marked >> 1)), successor: Some(2) },
        ],
        outputs: vec![1, 2],
    })
}

/// Distribution of the two-bit answer read from outputs `(1, 2)` in x̂
/// after byproduct correction, for an arbitrary four-qubit input.
pub fn grover_readout(state: &QubitRegister, marked: u8) -> Result<[f64; 4]> {
    let pattern = grover_pattern(marked)?;
    let x = MBasis::X.matrix();
    let mut dist = [0.0; 4];
    for br in measure_pattern(state, &pattern, Branching::Exhaustive)? {
        for (k, d) in dist.iter_mut().enumerate() {
            let (p1, rest) = br.corrected.measure(0, &x, k >> 1);
            let p2 = rest.map_or(0.0, |r| r.measure(0, &x, k & 1).0);
            *d += br.probability * p1 * p2;
        }
    }
    Ok(dist)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroverResult {
    pub marked: u8,
    pub distribution: [f64; 4],
    pub success: f64,
}

/// Ideal box cluster.
pub fn grover_box(marked: u8) -> Result<GroverResult> {
    grover_box_noisy(marked, 1.0)
}

/// Box cluster mixed with white noise at visibility `v`; the readout is
/// linear in the state, so the mixture is averaged over the computational
/// basis for the noise part.
pub fn grover_box_noisy(marked: u8, v: f64) -> Result<GroverResult> {
    if !(0.0..=1.0).contains(&v) {
        return Err(invalid("visibility", format!("{v} outside [0, 1]")));
    }
    let ideal = grover_readout(&build_cluster(&ClusterGraph::box4())?, marked)?;
    let mut noise = [0.0; 4];
    if v < 1.0 {
        for z in 0..16 {
            let d = grover_readout(&QubitRegister::basis(4, z)?, marked)?;
            for k in 0..4 {
                noise[k] += d[k] / 16.0;
            }
        }
    }
    let mut distribution = [0.0; 4];
    for k in 0..4 {
        distribution[k] = v * ideal[k] + (1.0 - v) * noise[k];
    }
    Ok(GroverResult { marked, distribution, success: distribution[marked as usize] })
}

/// Fewest ẑ measurements leaving a fully separable state, with one
/// subset achieving it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Persistency {
    pub removals: usize,
    pub measured: Vec<usize>,
}

fn fully_separable(state: &QubitRegister) -> bool {
    (0..state.n()).all(|q| schmidt_rank(state, &[q]) == 1)
}

/// Exhaustive search over subsets of increasing size; every outcome
/// branch of a subset must be separable.
pub fn persistency_check(state: &QubitRegister) -> Result<Persistency> {
    let n = state.n();
    if n > 8 {
        return Err(Error::TooLarge(format!("{n} qubits")));
    }
    for k in 0..=n {
        for subset in subsets(n, k) {
            if branches_separable(state, &subset) {
                return Ok(Persistency { removals: k, measured: subset });
            }
        }
    }
    unreachable!("measuring every qubit leaves nothing entangled")
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    (0u32..1 << n).filter(|m| m.count_ones() as usize == k).map(|m| (0..n).filter(|q| m >> q & 1 == 1).collect()).collect()
}

fn branches_separable(state: &QubitRegister, subset: &[usize]) -> bool {
    let mut states = vec![state.clone()];
    for &q in subset.iter().rev() {
        states = states
            .iter()
            .flat_map(|s| (0..2).filter_map(move |o| s.measure(q, &Matrix2::identity(), o).1))
            .collect();
    }
    states.iter().all(|s| s.n() == 0 || fully_separable(s))
}
