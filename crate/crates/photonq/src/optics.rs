//! Linear-optical elements as [`ModeMap`] constructors.
//!
//! Conventions:
//! * beam splitters carry the symmetric `i` reflection phase;
//! * wave plates are Jones retarders `R(θ)·diag(1, e^{-iΓ})·R(−θ)` with the
//!   fast axis at angle `θ` from horizontal, `Γ = π` (half) or `π/2` (quarter);
//! * mode maps act on creation operators, column `j` being the image of input `j`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::{DMatrix, Matrix2};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fock::{FockState, Mode, ModeMap, Pattern, Registry};
use crate::{C64, TOL};

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn dm2(m: &Matrix2<C64>) -> DMatrix<C64> {
    DMatrix::from_iterator(2, 2, m.iter().copied())
}

/// Polarization analysis basis relative to {H, V}.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Basis {
    /// H, V.
    Rectilinear,
    /// H' = (H+V)/√2, V' = (H−V)/√2.
    Diagonal,
    /// R = (H+iV)/√2, L = (H−iV)/√2.
    Circular,
}

impl Basis {
    /// Basis vectors as columns in H/V coordinates.
    pub fn matrix(self) -> Matrix2<C64> {
        let s = FRAC_1_SQRT_2;
        match self {
            Basis::Rectilinear => Matrix2::identity(),
            Basis::Diagonal => Matrix2::new(c(s, 0.0), c(s, 0.0), c(s, 0.0), c(-s, 0.0)),
            Basis::Circular => Matrix2::new(c(s, 0.0), c(s, 0.0), c(0.0, s), c(0.0, -s)),
        }
    }
}

/// 2×2 beam-splitter matrix: `T = cos²(θ/2)`, `R = sin²(θ/2)`.
pub fn bs_matrix(theta: f64) -> Matrix2<C64> {
    let (s, co) = (theta / 2.0).sin_cos();
    Matrix2::new(c(co, 0.0), c(0.0, s), c(0.0, s), c(co, 0.0))
}

/// Beam splitter sending `in1 → cos(θ/2) out1 + i sin(θ/2) out2` and
/// `in2 → i sin(θ/2) out1 + cos(θ/2) out2`.
pub fn beam_splitter(in1: Mode, in2: Mode, out1: Mode, out2: Mode, theta: f64) -> Result<ModeMap> {
    if !(0.0..=PI).contains(&theta) {
        return Err(invalid("theta", format!("{theta} outside [0, π]")));
    }
    if in1 == in2 || out1 == out2 {
        return Err(Error::CoincidentModes);
    }
    ModeMap::new(vec![in1, in2], vec![out1, out2], dm2(&bs_matrix(theta)))
}

/// 50:50 beam splitter acting on every polarization slot of two paths.
pub fn beam_splitter_paths(in1: &str, in2: &str, out1: &str, out2: &str) -> Result<ModeMap> {
    let maps = [0u8, 1]
        .iter()
        .map(|&p| {
            beam_splitter(
                Mode::new(in1, p, 0),
                Mode::new(in2, p, 0),
                Mode::new(out1, p, 0),
                Mode::new(out2, p, 0),
                PI / 2.0,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    ModeMap::direct_sum(&maps)
}

/// Polarizing beam splitter.
///
/// Each pair is (H slot, V slot). In its own basis it routes
/// `a_H → c_H`, `a_V → d_V`, `b_H → d_H`, `b_V → c_V`.
pub fn pbs(in_a: (Mode, Mode), in_b: (Mode, Mode), out_c: (Mode, Mode), out_d: (Mode, Mode), basis: Basis) -> Result<ModeMap> {
    let inputs = vec![in_a.0, in_a.1, in_b.0, in_b.1];
    let outputs = vec![out_c.0, out_c.1, out_d.0, out_d.1];
    let one = c(1.0, 0.0);
    let mut p = DMatrix::zeros(4, 4);
    p[(0, 0)] = one; // a_H -> c_H
    p[(3, 1)] = one; // a_V -> d_V
    p[(2, 2)] = one; // b_H -> d_H
    p[(1, 3)] = one; // b_V -> c_V
    let b = dm2(&basis.matrix());
    let mut blk = DMatrix::zeros(4, 4);
    blk.view_mut((0, 0), (2, 2)).copy_from(&b);
    blk.view_mut((2, 2), (2, 2)).copy_from(&b);
    let m = &blk * p * blk.adjoint();
    ModeMap::new(inputs, outputs, m)
}

/// PBS between two paths in H/V, named by path.
pub fn pbs_paths(a: &str, b: &str, out_c: &str, out_d: &str, basis: Basis) -> Result<ModeMap> {
    pbs(Mode::pair(a), Mode::pair(b), Mode::pair(out_c), Mode::pair(out_d), basis)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Plate {
    Half,
    Quarter,
}

/// Jones matrix of a wave plate with fast axis at `angle` (radians).
pub fn jones(kind: Plate, angle: f64) -> Matrix2<C64> {
    let g = match kind {
        Plate::Half => PI,
        Plate::Quarter => PI / 2.0,
    };
    let (s, co) = angle.sin_cos();
    let r = Matrix2::new(c(co, 0.0), c(-s, 0.0), c(s, 0.0), c(co, 0.0));
    let d = Matrix2::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), C64::from_polar(1.0, -g));
    r * d * r.transpose()
}

pub fn wave_plate(pair: (Mode, Mode), kind: Plate, angle: f64) -> Result<ModeMap> {
    polarization_unitary(pair, &jones(kind, angle))
}

/// Arbitrary 2×2 unitary on the (H, V) slots of one path.
pub fn polarization_unitary(pair: (Mode, Mode), u: &Matrix2<C64>) -> Result<ModeMap> {
    ModeMap::on(vec![pair.0, pair.1], dm2(u))
}

/// Phase `e^{iφ}` on one mode.
pub fn phase_shift(mode: Mode, phi: f64) -> ModeMap {
    ModeMap::phase(mode, phi)
}

/// Parameters of the four-phase U(2) form.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MzParams {
    pub alpha: f64,
    pub beta: f64,
    pub theta: f64,
    pub gamma: f64,
}

/// `e^{iγ/2} diag(e^{iα/2}, e^{-iα/2}) [[cos θ/2, sin θ/2], [−sin θ/2, cos θ/2]] diag(e^{iβ/2}, e^{-iβ/2})`.
pub fn mach_zehnder(alpha: f64, beta: f64, theta: f64, gamma: f64) -> Matrix2<C64> {
    let z = c(0.0, 0.0);
    let g = C64::from_polar(1.0, gamma / 2.0);
    let a = Matrix2::new(C64::from_polar(1.0, alpha / 2.0), z, z, C64::from_polar(1.0, -alpha / 2.0));
    let b = Matrix2::new(C64::from_polar(1.0, beta / 2.0), z, z, C64::from_polar(1.0, -beta / 2.0));
    let (s, co) = (theta / 2.0).sin_cos();
    let r = Matrix2::new(c(co, 0.0), c(s, 0.0), c(-s, 0.0), c(co, 0.0));
    a * r * b * g
}

impl MzParams {
    pub fn matrix(&self) -> Matrix2<C64> {
        mach_zehnder(self.alpha, self.beta, self.theta, self.gamma)
    }

    /// Recovers parameters reproducing `u` exactly.
    pub fn from_unitary(u: &Matrix2<C64>) -> Result<MzParams> {
        let defect = unitarity_defect2(u);
        if defect > 1e-9 {
            return Err(Error::NotUnitary(defect));
        }
        let gamma = u.determinant().arg();
        let v = u / C64::from_polar(1.0, gamma / 2.0);
        let (p00, p01) = (v[(0, 0)], v[(0, 1)]);
        let theta = 2.0 * p01.norm().atan2(p00.norm());
        let sum = if p00.norm() > 1e-12 { 2.0 * p00.arg() } else { 0.0 };
        let diff = if p01.norm() > 1e-12 { 2.0 * p01.arg() } else { 0.0 };
        Ok(MzParams { alpha: (sum + diff) / 2.0, beta: (sum - diff) / 2.0, theta, gamma })
    }
}

fn unitarity_defect2(u: &Matrix2<C64>) -> f64 {
    (u.adjoint() * u - Matrix2::identity()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Element of an interferometer mesh, in the order light meets them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum MeshElement {
    /// Two-mode mixer on adjacent modes `(m, m+1)`.
    Mixer { modes: (usize, usize), params: MzParams },
    /// Phase shifter on one mode.
    Phase { mode: usize, phi: f64 },
}

impl MeshElement {
    /// Embedding of this element in an `n`-mode unitary.
    pub fn matrix(&self, n: usize) -> DMatrix<C64> {
        let mut m = DMatrix::identity(n, n);
        match self {
            MeshElement::Mixer { modes: (i, j), params } => {
                let u = params.matrix();
                m[(*i, *i)] = u[(0, 0)];
                m[(*i, *j)] = u[(0, 1)];
                m[(*j, *i)] = u[(1, 0)];
                m[(*j, *j)] = u[(1, 1)];
            }
            MeshElement::Phase { mode, phi } => m[(*mode, *mode)] = C64::from_polar(1.0, *phi),
        }
        m
    }
}

/// Triangular nulling of an `N×N` unitary into two-mode mixers and phases.
///
/// Multiplying the element matrices in list order (later elements on the
/// left) reproduces `u`.
pub fn decompose_unitary(u: &DMatrix<C64>) -> Result<Vec<MeshElement>> {
    let n = u.nrows();
    if n != u.ncols() || n == 0 || n > 16 {
        return Err(invalid("unitary", format!("{}x{} not a supported square size", u.nrows(), u.ncols())));
    }
    let defect = crate::fock::unitarity_defect(u);
    if defect > TOL {
        return Err(Error::NotUnitary(defect));
    }
    let mut w = u.clone();
    let mut mixers = Vec::new();
    for col in 0..n {
        for row in (col + 1..n).rev() {
            let (x, y) = (w[(row - 1, col)], w[(row, col)]);
            if y.norm() < 1e-15 {
                continue;
            }
            let r = (x.norm_sqr() + y.norm_sqr()).sqrt();
            let g = Matrix2::new(x.conj() / r, y.conj() / r, -y / r, x / r);
            for k in 0..n {
                let (a, b) = (w[(row - 1, k)], w[(row, k)]);
                w[(row - 1, k)] = g[(0, 0)] * a + g[(0, 1)] * b;
                w[(row, k)] = g[(1, 0)] * a + g[(1, 1)] * b;
            }
            mixers.push(MeshElement::Mixer { modes: (row - 1, row), params: MzParams::from_unitary(&g.adjoint())? });
        }
    }
    let mut out: Vec<MeshElement> = (0..n)
        .filter_map(|k| {
            let phi = w[(k, k)].arg();
            (phi.abs() > 1e-15).then_some(MeshElement::Phase { mode: k, phi })
        })
        .collect();
    out.extend(mixers.into_iter().rev());
    Ok(out)
}

/// Product of mesh elements in list order.
pub fn mesh_unitary(n: usize, elements: &[MeshElement]) -> DMatrix<C64> {
    elements.iter().fold(DMatrix::identity(n, n), |acc, e| e.matrix(n) * acc)
}

/// Coincidence probability of two photons on a 50:50 beam splitter.
///
/// The second photon's mode is `α·(first photon's mode) + β·(orthogonal
/// mode)`; the orthogonal part is carried in a separate time bin.
pub fn hom_experiment(alpha: C64) -> Result<f64> {
    let a2 = alpha.norm_sqr();
    if a2 > 1.0 + 1e-12 {
        return Err(invalid("alpha", format!("|alpha| = {} exceeds 1", a2.sqrt())));
    }
    let beta = (1.0 - a2).max(0.0).sqrt();
    let (a, b, cc, d) = (Mode::h("a"), Mode::h("b"), Mode::h("c"), Mode::h("d"));
    let reg = Registry::new([a.clone(), b.clone(), b.at(1), cc.clone(), cc.at(1), d.clone(), d.at(1), a.at(1)])?;
    let s = FockState::from_monomials(
        &reg,
        &[(alpha, vec![&a, &b]), (c(beta, 0.0), vec![&a, &b.at(1)])],
    )?;
    let bs0 = beam_splitter(a.clone(), b.clone(), cc.clone(), d.clone(), PI / 2.0)?;
    let bs1 = beam_splitter(a.at(1), b.at(1), cc.at(1), d.at(1), PI / 2.0)?;
    let out = s.apply(&bs0)?.apply(&bs1)?;
    out.probability(&Pattern::new().click(vec![cc.clone(), cc.at(1)]).click(vec![d.clone(), d.at(1)]))
}
