//! Dense qubit states and density operators (up to ten qubits).
//!
//! Qubit 0 is the most significant bit of a basis index.

use nalgebra::{DMatrix, DVector, Matrix2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{C64, TOL};

pub const MAX_QUBITS: usize = 10;

const S2: f64 = std::f64::consts::FRAC_1_SQRT_2;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    pub fn matrix(self) -> Matrix2<C64> {
        let (o, z, i) = (c(1.0, 0.0), c(0.0, 0.0), c(0.0, 1.0));
        match self {
            Pauli::I => Matrix2::new(o, z, z, o),
            Pauli::X => Matrix2::new(z, o, o, z),
            Pauli::Y => Matrix2::new(z, -i, i, z),
            Pauli::Z => Matrix2::new(o, z, z, -o),
        }
    }
}

/// Hadamard gate.
pub fn hadamard() -> Matrix2<C64> {
    Matrix2::new(c(S2, 0.0), c(S2, 0.0), c(S2, 0.0), c(-S2, 0.0))
}

/// `exp(-i θ σ_z / 2)`.
pub fn rz(theta: f64) -> Matrix2<C64> {
    Matrix2::new(C64::from_polar(1.0, -theta / 2.0), c(0.0, 0.0), c(0.0, 0.0), C64::from_polar(1.0, theta / 2.0))
}

/// `exp(-i θ σ_x / 2)`.
pub fn rx(theta: f64) -> Matrix2<C64> {
    let (s, co) = (theta / 2.0).sin_cos();
    Matrix2::new(c(co, 0.0), c(0.0, -s), c(0.0, -s), c(co, 0.0))
}

/// The four Bell states.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Bell {
    PsiPlus,
    PsiMinus,
    PhiPlus,
    PhiMinus,
}

impl Bell {
    pub const ALL: [Bell; 4] = [Bell::PsiPlus, Bell::PsiMinus, Bell::PhiPlus, Bell::PhiMinus];

    /// `|HV⟩ ± |VH⟩` for ψ, `|HH⟩ ± |VV⟩` for φ, with H = |0⟩.
    pub fn state(self) -> QubitRegister {
        let mut a = vec![C64::default(); 4];
        match self {
            Bell::PsiPlus => (a[1], a[2]) = (c(S2, 0.0), c(S2, 0.0)),
            Bell::PsiMinus => (a[1], a[2]) = (c(S2, 0.0), c(-S2, 0.0)),
            Bell::PhiPlus => (a[0], a[3]) = (c(S2, 0.0), c(S2, 0.0)),
            Bell::PhiMinus => (a[0], a[3]) = (c(S2, 0.0), c(-S2, 0.0)),
        }
        QubitRegister { n: 2, amps: a }
    }

    pub fn label(self) -> &'static str {
        match self {
            Bell::PsiPlus => "psi+",
            Bell::PsiMinus => "psi-",
            Bell::PhiPlus => "phi+",
            Bell::PhiMinus => "phi-",
        }
    }

    /// Whether the two qubits are anticorrelated in H/V.
    pub fn is_psi(self) -> bool {
        matches!(self, Bell::PsiPlus | Bell::PsiMinus)
    }

    /// The Bell state with largest overlap, and that overlap.
    pub fn closest(state: &QubitRegister) -> (Bell, f64) {
        Bell::ALL
            .iter()
            .map(|&b| (b, b.state().overlap(state)))
            .fold((Bell::PsiPlus, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc })
    }
}

/// Unit vector on the Bloch sphere selecting the observable `n·σ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Setting {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Setting {
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let n = (x * x + y * y + z * z).sqrt();
        if (n - 1.0).abs() > 1e-9 {
            return Err(crate::error::invalid("setting", format!("not a unit vector (length {n})")));
        }
        Ok(Setting { x, y, z })
    }

    /// Direction at polar angle `theta`, azimuth `phi`.
    pub fn polar(theta: f64, phi: f64) -> Self {
        Setting { x: theta.sin() * phi.cos(), y: theta.sin() * phi.sin(), z: theta.cos() }
    }

    /// Equatorial direction at azimuth `phi`: `cos φ σx + sin φ σy`.
    pub fn equator(phi: f64) -> Self {
        Setting::polar(std::f64::consts::FRAC_PI_2, phi)
    }

    /// Direction in the x–z plane at angle `a` from z.
    pub fn xz(a: f64) -> Self {
        Setting { x: a.sin(), y: 0.0, z: a.cos() }
    }

    pub const X: Setting = Setting { x: 1.0, y: 0.0, z: 0.0 };
    pub const Y: Setting = Setting { x: 0.0, y: 1.0, z: 0.0 };
    pub const Z: Setting = Setting { x: 0.0, y: 0.0, z: 1.0 };

    pub fn dot(&self, o: &Setting) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn observable(&self) -> Matrix2<C64> {
        Pauli::X.matrix() * c(self.x, 0.0) + Pauli::Y.matrix() * c(self.y, 0.0) + Pauli::Z.matrix() * c(self.z, 0.0)
    }

    /// Eigenvectors as columns: column 0 for outcome +1, column 1 for −1.
    pub fn eigenbasis(&self) -> Matrix2<C64> {
        let theta = self.z.clamp(-1.0, 1.0).acos();
        let phi = self.y.atan2(self.x);
        let (s, co) = (theta / 2.0).sin_cos();
        let e = C64::from_polar(1.0, phi);
        Matrix2::new(c(co, 0.0), c(-s, 0.0), e * s, e * co)
    }
}

fn check_n(n: usize) -> Result<()> {
    if n > MAX_QUBITS {
        Err(Error::TooManyQubits(n))
    } else {
        Ok(())
    }
}

/// Pure state of `n` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct QubitRegister {
    n: usize,
    amps: Vec<C64>,
}

impl QubitRegister {
    /// Requires a normalized vector of length `2^n`.
    pub fn new(amps: Vec<C64>) -> Result<Self> {
        let r = QubitRegister::from_amplitudes(amps)?;
        let norm = r.norm();
        if (norm - 1.0).abs() > TOL {
            return Err(Error::NotNormalized(norm));
        }
        Ok(r)
    }

    /// Accepts any nonzero vector of length `2^n` and normalizes it.
    pub fn from_amplitudes(amps: Vec<C64>) -> Result<Self> {
        let len = amps.len();
        if !len.is_power_of_two() {
            return Err(Error::DimensionMismatch { expected: len.next_power_of_two(), found: len });
        }
        let n = len.trailing_zeros() as usize;
        check_n(n)?;
        let mut r = QubitRegister { n, amps };
        let norm = r.norm();
        if norm == 0.0 {
            return Err(Error::NotNormalized(0.0));
        }
        r.amps.iter_mut().for_each(|a| *a /= norm);
        Ok(r)
    }

    pub fn basis(n: usize, index: usize) -> Result<Self> {
        check_n(n)?;
        let mut amps = vec![C64::default(); 1 << n];
        amps[index] = c(1.0, 0.0);
        Ok(QubitRegister { n, amps })
    }

    pub fn zeros(n: usize) -> Result<Self> {
        QubitRegister::basis(n, 0)
    }

    /// Product of single-qubit states `(α, β)`.
    pub fn product(qubits: &[(C64, C64)]) -> Result<Self> {
        check_n(qubits.len())?;
        let mut amps = vec![c(1.0, 0.0)];
        for (a, b) in qubits {
            amps = amps.iter().flat_map(|x| [x * a, x * b]).collect();
        }
        QubitRegister::from_amplitudes(amps)
    }

    /// `|+⟩^⊗n`.
    pub fn plus(n: usize) -> Result<Self> {
        QubitRegister::product(&vec![(c(S2, 0.0), c(S2, 0.0)); n])
    }

    /// `(|0…0⟩ + |1…1⟩)/√2`.
    pub fn ghz(n: usize) -> Result<Self> {
        check_n(n)?;
        let mut amps = vec![C64::default(); 1 << n];
        amps[0] = c(S2, 0.0);
        amps[(1 << n) - 1] = c(S2, 0.0);
        Ok(QubitRegister { n, amps })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn inner(&self, other: &QubitRegister) -> C64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    /// `|⟨self|other⟩|`; equals 1 iff the states agree up to global phase.
    pub fn overlap(&self, other: &QubitRegister) -> f64 {
        if self.n != other.n {
            return 0.0;
        }
        self.inner(other).norm()
    }

    pub fn same_ray(&self, other: &QubitRegister, tol: f64) -> bool {
        (self.overlap(other) - 1.0).abs() < tol
    }

    pub fn tensor(&self, other: &QubitRegister) -> Result<QubitRegister> {
        check_n(self.n + other.n)?;
        let amps = self.amps.iter().flat_map(|a| other.amps.iter().map(move |b| a * b)).collect();
        Ok(QubitRegister { n: self.n + other.n, amps })
    }

    fn bit(&self, q: usize) -> usize {
        self.n - 1 - q
    }

    /// Applies a 2×2 matrix to qubit `q` (no renormalization).
    pub fn apply_1q(&self, q: usize, u: &Matrix2<C64>) -> QubitRegister {
        let b = 1usize << self.bit(q);
        let mut amps = self.amps.clone();
        for i in 0..amps.len() {
            if i & b == 0 {
                let (x, y) = (self.amps[i], self.amps[i | b]);
                amps[i] = u[(0, 0)] * x + u[(0, 1)] * y;
                amps[i | b] = u[(1, 0)] * x + u[(1, 1)] * y;
            }
        }
        QubitRegister { n: self.n, amps }
    }

    pub fn apply_pauli(&self, q: usize, p: Pauli) -> QubitRegister {
        self.apply_1q(q, &p.matrix())
    }

    /// Applies a list of Paulis, entry `k` on qubit `k`.
    pub fn apply_paulis(&self, ps: &[Pauli]) -> QubitRegister {
        ps.iter().enumerate().fold(self.clone(), |s, (q, &p)| s.apply_pauli(q, p))
    }

    pub fn cz(&self, a: usize, b: usize) -> QubitRegister {
        let (ma, mb) = (1usize << self.bit(a), 1usize << self.bit(b));
        let amps = self
            .amps
            .iter()
            .enumerate()
            .map(|(i, x)| if i & ma != 0 && i & mb != 0 { -x } else { *x })
            .collect();
        QubitRegister { n: self.n, amps }
    }

    pub fn cnot(&self, control: usize, target: usize) -> QubitRegister {
        let (mc, mt) = (1usize << self.bit(control), 1usize << self.bit(target));
        let mut amps = self.amps.clone();
        for (i, a) in amps.iter_mut().enumerate() {
            if i & mc != 0 {
                *a = self.amps[i ^ mt];
            }
        }
        QubitRegister { n: self.n, amps }
    }

    /// Applies a full `2^n × 2^n` operator.
    pub fn apply(&self, op: &DMatrix<C64>) -> Result<QubitRegister> {
        if op.ncols() != self.amps.len() {
            return Err(Error::DimensionMismatch { expected: self.amps.len(), found: op.ncols() });
        }
        let v = op * DVector::from_column_slice(&self.amps);
        Ok(QubitRegister { n: self.n, amps: v.iter().copied().collect() })
    }

    /// Projects qubit `q` onto column `outcome` of `basis` and removes it.
    /// Returns the outcome probability and the normalized remainder.
    pub fn measure(&self, q: usize, basis: &Matrix2<C64>, outcome: usize) -> (f64, Option<QubitRegister>) {
        let b = self.bit(q);
        let (v0, v1) = (basis[(0, outcome)].conj(), basis[(1, outcome)].conj());
        let mut amps = Vec::with_capacity(self.amps.len() / 2);
        for i in 0..self.amps.len() / 2 {
            let hi = (i >> b) << (b + 1);
            let lo = i & ((1 << b) - 1);
            let i0 = hi | lo;
            let i1 = i0 | (1 << b);
            amps.push(v0 * self.amps[i0] + v1 * self.amps[i1]);
        }
        let p: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if p < 1e-24 {
            return (0.0, None);
        }
        let s = p.sqrt();
        amps.iter_mut().for_each(|a| *a /= s);
        (p, Some(QubitRegister { n: self.n - 1, amps }))
    }

    /// Reorders qubits so that new qubit `k` is old qubit `order[k]`.
    pub fn permute(&self, order: &[usize]) -> QubitRegister {
        let n = self.n;
        let mut amps = vec![C64::default(); self.amps.len()];
        for (i, a) in self.amps.iter().enumerate() {
            let mut j = 0usize;
            for (k, &old) in order.iter().enumerate() {
                if (i >> (n - 1 - old)) & 1 == 1 {
                    j |= 1 << (n - 1 - k);
                }
            }
            amps[j] = *a;
        }
        QubitRegister { n, amps }
    }

    /// Unnormalized `(⟨target| ⊗ I) |self⟩` over `qubits`; the remaining
    /// qubits keep ascending order.
    pub fn contract(&self, qubits: &[usize], target: &QubitRegister) -> Result<Vec<C64>> {
        if target.n != qubits.len() || qubits.iter().any(|&q| q >= self.n) {
            return Err(Error::DimensionMismatch { expected: qubits.len(), found: target.n });
        }
        let rest = complement(self.n, qubits);
        let order: Vec<usize> = qubits.iter().chain(&rest).copied().collect();
        let p = self.permute(&order);
        let dr = 1usize << rest.len();
        let mut out = vec![C64::default(); dr];
        for (i, t) in target.amps.iter().enumerate() {
            let tc = t.conj();
            for (j, o) in out.iter_mut().enumerate() {
                *o += tc * p.amps[i * dr + j];
            }
        }
        Ok(out)
    }

    /// Projects `qubits` onto `target` and removes them; returns the
    /// probability and the normalized remainder.
    pub fn project_onto(&self, qubits: &[usize], target: &QubitRegister) -> Result<(f64, Option<QubitRegister>)> {
        let mut amps = self.contract(qubits, target)?;
        let p: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if p < 1e-24 {
            return Ok((0.0, None));
        }
        let s = p.sqrt();
        amps.iter_mut().for_each(|a| *a /= s);
        Ok((p, Some(QubitRegister { n: self.n - qubits.len(), amps })))
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn density(&self) -> DensityOperator {
        let v = DVector::from_column_slice(&self.amps);
        DensityOperator { n: self.n, m: &v * v.adjoint() }
    }

    /// `⟨ψ|op|ψ⟩`.
    pub fn expectation(&self, op: &DMatrix<C64>) -> C64 {
        let v = DVector::from_column_slice(&self.amps);
        (v.adjoint() * op * &v)[(0, 0)]
    }

    /// Schmidt decomposition across `left | rest`.
    pub fn schmidt(&self, left: &[usize]) -> Result<Vec<SchmidtTerm>> {
        schmidt_decompose(self, left)
    }
}

/// One term `r · |left⟩|right⟩` of a Schmidt decomposition.
#[derive(Clone, Debug)]
pub struct SchmidtTerm {
    pub coefficient: f64,
    pub left: Vec<C64>,
    pub right: Vec<C64>,
}

fn complement(n: usize, part: &[usize]) -> Vec<usize> {
    (0..n).filter(|q| !part.contains(q)).collect()
}

/// Schmidt decomposition of a pure state across `left | rest`.
///
/// Coefficients are returned in descending order; zero coefficients
/// (below 1e-12) are dropped.
pub fn schmidt_decompose(state: &QubitRegister, left: &[usize]) -> Result<Vec<SchmidtTerm>> {
    let n = state.n;
    if left.iter().any(|&q| q >= n) {
        return Err(Error::DimensionMismatch { expected: n, found: left.iter().copied().max().unwrap_or(0) + 1 });
    }
    let right = complement(n, left);
    let order: Vec<usize> = left.iter().chain(&right).copied().collect();
    let p = state.permute(&order);
    let (dl, dr) = (1usize << left.len(), 1usize << right.len());
    let m = DMatrix::from_row_slice(dl, dr, &p.amps);
    let svd = m.svd(true, true);
    let u = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v requested");
    let mut terms: Vec<SchmidtTerm> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > 1e-12)
        .map(|(k, &s)| SchmidtTerm {
            coefficient: s,
            left: u.column(k).iter().copied().collect(),
            right: vt.row(k).iter().copied().collect(),
        })
        .collect();
    terms.sort_by(|a, b| b.coefficient.total_cmp(&a.coefficient));
    Ok(terms)
}

/// Number of nonzero Schmidt coefficients across the cut.
pub fn schmidt_rank(state: &QubitRegister, left: &[usize]) -> usize {
    schmidt_decompose(state, left).map(|t| t.len()).unwrap_or(0)
}

/// Kronecker product.
pub fn kron(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    a.kronecker(b)
}

/// `⊗_q ops[q]` with identity where `ops[q]` is `None`.
pub fn local_operator(ops: &[Option<Matrix2<C64>>]) -> DMatrix<C64> {
    let mut m = DMatrix::from_element(1, 1, c(1.0, 0.0));
    for o in ops {
        let k = o.unwrap_or_else(|| Pauli::I.matrix());
        let kd = DMatrix::from_iterator(2, 2, k.iter().copied());
        m = m.kronecker(&kd);
    }
    m
}

/// Tensor product of Pauli operators.
pub fn pauli_string(ps: &[Pauli]) -> DMatrix<C64> {
    local_operator(&ps.iter().map(|p| Some(p.matrix())).collect::<Vec<_>>())
}

/// CNOT on `n` qubits as a full matrix.
pub fn cnot_operator(n: usize, control: usize, target: usize) -> DMatrix<C64> {
    let d = 1usize << n;
    let (mc, mt) = (1usize << (n - 1 - control), 1usize << (n - 1 - target));
    let mut m = DMatrix::zeros(d, d);
    for i in 0..d {
        let j = if i & mc != 0 { i ^ mt } else { i };
        m[(j, i)] = c(1.0, 0.0);
    }
    m
}

/// Density operator of `n` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator {
    n: usize,
    m: DMatrix<C64>,
}

impl DensityOperator {
    /// Checks Hermiticity, unit trace and positivity.
    pub fn new(m: DMatrix<C64>) -> Result<Self> {
        let d = m.nrows();
        if d != m.ncols() || !d.is_power_of_two() {
            return Err(Error::DimensionMismatch { expected: d.next_power_of_two(), found: m.ncols() });
        }
        let n = d.trailing_zeros() as usize;
        check_n(n)?;
        if (&m - m.adjoint()).iter().any(|z| z.norm() > TOL) {
            return Err(Error::NotHermitian);
        }
        let tr = m.trace().re;
        if (tr - 1.0).abs() > TOL {
            return Err(Error::NotNormalized(tr));
        }
        let r = DensityOperator { n, m };
        if r.eigenvalues().iter().any(|&e| e < -1e-9) {
            return Err(crate::error::invalid("rho", "negative eigenvalue"));
        }
        Ok(r)
    }

    pub fn maximally_mixed(n: usize) -> Result<Self> {
        check_n(n)?;
        let d = 1usize << n;
        Ok(DensityOperator { n, m: DMatrix::identity(d, d) * c(1.0 / d as f64, 0.0) })
    }

    /// Convex combination `Σ w_k ρ_k`; weights must sum to 1.
    pub fn mixture(parts: &[(f64, &DensityOperator)]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| crate::error::invalid("parts", "empty mixture"))?;
        let mut m = DMatrix::zeros(first.1.m.nrows(), first.1.m.ncols());
        for (w, r) in parts {
            if r.n != first.1.n {
                return Err(Error::DimensionMismatch { expected: first.1.n, found: r.n });
            }
            if *w < 0.0 {
                return Err(crate::error::invalid("weight", "negative"));
            }
            m += &r.m * c(*w, 0.0);
        }
        let tr = m.trace().re;
        if (tr - 1.0).abs() > TOL {
            return Err(Error::NotNormalized(tr));
        }
        Ok(DensityOperator { n: first.1.n, m })
    }

    /// `V ρ_pure + (1 − V) I/2^n`.
    pub fn with_white_noise(state: &QubitRegister, v: f64) -> Result<Self> {
        let mixed = DensityOperator::maximally_mixed(state.n)?;
        DensityOperator::mixture(&[(v, &state.density()), (1.0 - v, &mixed)])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.m
    }

    pub fn trace(&self) -> f64 {
        self.m.trace().re
    }

    pub fn purity(&self) -> f64 {
        (&self.m * &self.m).trace().re
    }

    pub fn expectation(&self, op: &DMatrix<C64>) -> Result<C64> {
        if op.nrows() != self.m.nrows() {
            return Err(Error::DimensionMismatch { expected: self.m.nrows(), found: op.nrows() });
        }
        Ok((&self.m * op).trace())
    }

    /// `⟨target|ρ|target⟩`.
    pub fn fidelity(&self, target: &QubitRegister) -> Result<f64> {
        if target.n != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: target.n });
        }
        let v = DVector::from_column_slice(&target.amps);
        Ok((v.adjoint() * &self.m * &v)[(0, 0)].re.clamp(0.0, 1.0))
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut e: Vec<f64> = self.m.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
        e.sort_by(f64::total_cmp);
        e
    }

    /// `U ρ U†` with a full operator (no checks beyond dimension).
    pub fn conjugate(&self, u: &DMatrix<C64>) -> Result<Self> {
        if u.ncols() != self.m.nrows() {
            return Err(Error::DimensionMismatch { expected: self.m.nrows(), found: u.ncols() });
        }
        Ok(DensityOperator { n: self.n, m: u * &self.m * u.adjoint() })
    }

    pub fn tensor(&self, other: &DensityOperator) -> Result<Self> {
        check_n(self.n + other.n)?;
        Ok(DensityOperator { n: self.n + other.n, m: self.m.kronecker(&other.m) })
    }

    /// Reduced operator on `keep`, in the given order.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<Self> {
        if keep.is_empty() {
            return Err(crate::error::invalid("keep", "empty subsystem"));
        }
        if keep.iter().any(|&q| q >= self.n) {
            return Err(Error::DimensionMismatch { expected: self.n, found: keep.iter().copied().max().unwrap_or(0) + 1 });
        }
        let n = self.n;
        let traced = complement(n, keep);
        let k = keep.len();
        let dk = 1usize << k;
        let dt = 1usize << traced.len();
        let full = |ki: usize, ti: usize| -> usize {
            let mut idx = 0usize;
            for (p, &q) in keep.iter().enumerate() {
                if (ki >> (k - 1 - p)) & 1 == 1 {
                    idx |= 1 << (n - 1 - q);
                }
            }
            for (p, &q) in traced.iter().enumerate() {
                if (ti >> (traced.len() - 1 - p)) & 1 == 1 {
                    idx |= 1 << (n - 1 - q);
                }
            }
            idx
        };
        let mut r = DMatrix::zeros(dk, dk);
        for i in 0..dk {
            for j in 0..dk {
                let mut s = C64::default();
                for t in 0..dt {
                    s += self.m[(full(i, t), full(j, t))];
                }
                r[(i, j)] = s;
            }
        }
        Ok(DensityOperator { n: k, m: r })
    }

    /// Projects qubit `q` on column `outcome` of `basis`, keeping it in the
    /// register; returns the probability and the normalized state.
    pub fn project(&self, q: usize, basis: &Matrix2<C64>, outcome: usize) -> (f64, Option<DensityOperator>) {
        let v = nalgebra::Vector2::new(basis[(0, outcome)], basis[(1, outcome)]);
        let proj = v * v.adjoint();
        let mut ops = vec![None; self.n];
        ops[q] = Some(proj);
        let p_op = local_operator(&ops);
        let m = &p_op * &self.m * &p_op;
        let p = m.trace().re;
        if p < 1e-24 {
            return (0.0, None);
        }
        (p, Some(DensityOperator { n: self.n, m: m / c(p, 0.0) }))
    }
}
