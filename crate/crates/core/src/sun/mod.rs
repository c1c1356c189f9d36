//! SU(n) angular coordinates.
//!
//! A nondegenerate state is `rho = U (1/n + D(r)) U†` where the frame `U` is
//! an ordered product of embedded SU(2) rotations, one per pair `i < j`,
//! taken modulo the maximal torus. The flag-manifold measure, sampling and
//! the covariant quantization built on top of it live in [`flag`].

pub mod flag;

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{c, dagger, determinant, diag_complex, frobenius, hermitian_eigen_desc, unitarity_error, CMatrix, C64, I};
use crate::spectral::{probs_from_gap_slice, GapVector, VALIDATION_TOL};
use crate::state::DensityMatrix;

pub use flag::{
    flag_density, flag_volume, integrate_flag_density, quantize, resolution_check, sample_flag,
    sample_flag_with, state_space_volume, ResolutionReport,
};

/// Tolerance for unitarity and unit determinant of frames.
pub const FRAME_TOL: f64 = 1e-12;
/// Minimum eigenvalue separation accepted by [`eigendecompose_ordered`].
pub const EIGEN_GAP_TOL: f64 = 1e-10;

fn check_pair(n: usize, i: usize, j: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::Dimension(n));
    }
    if i >= j || j >= n {
        return Err(Error::Index(format!("pair ({i}, {j}) needs 0 <= i < j < {n}")));
    }
    Ok(())
}

/// Embedded Pauli matrix `sigma_k` acting on the zero-based `(i, j)` plane.
pub fn embedded_generator(n: usize, i: usize, j: usize, k: u8) -> Result<CMatrix> {
    check_pair(n, i, j)?;
    let mut m = CMatrix::zeros(n, n);
    match k {
        1 => {
            m[(i, j)] = c(1.0, 0.0);
            m[(j, i)] = c(1.0, 0.0);
        }
        2 => {
            m[(i, j)] = -I;
            m[(j, i)] = I;
        }
        3 => {
            m[(i, i)] = c(1.0, 0.0);
            m[(j, j)] = c(-1.0, 0.0);
        }
        _ => return Err(Error::Index(format!("Pauli index {k} not in 1..=3"))),
    }
    Ok(m)
}

/// Orthonormal Cartan generator
/// `H_l = (sum_{j<=l} E_jj - l E_{l+1,l+1}) / sqrt(l(l+1))`, `l` in `1..n`.
pub fn cartan_generator(n: usize, l: usize) -> Result<DMatrix<f64>> {
    if n < 2 {
        return Err(Error::Dimension(n));
    }
    if l == 0 || l >= n {
        return Err(Error::Index(format!("Cartan label {l} not in 1..{n}")));
    }
    let norm = ((l * (l + 1)) as f64).sqrt();
    Ok(DMatrix::from_fn(n, n, |a, b| {
        if a != b {
            0.0
        } else if a < l {
            1.0 / norm
        } else if a == l {
            -(l as f64) / norm
        } else {
            0.0
        }
    }))
}

/// Number of pairs `i < j`.
pub fn pair_count(n: usize) -> usize {
    n * (n - 1) / 2
}

/// Lexicographic position of the zero-based pair `(i, j)`.
pub fn pair_index(n: usize, i: usize, j: usize) -> usize {
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

/// All pairs `i < j` in lexicographic order.
pub fn pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
}

/// Coset angles `theta_ij in [0, pi]`, `phi_ij in [0, 2pi)` in lexicographic
/// pair order, plus optional torus phases.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleSet {
    n: usize,
    theta: Vec<f64>,
    phi: Vec<f64>,
    torus: Option<Vec<f64>>,
}

impl AngleSet {
    pub fn new(n: usize, theta: Vec<f64>, phi: Vec<f64>) -> Result<Self> {
        if n < 2 {
            return Err(Error::Dimension(n));
        }
        let m = pair_count(n);
        if theta.len() != m || phi.len() != m {
            let got = if theta.len() != m { theta.len() } else { phi.len() };
            return Err(Error::DimensionMismatch { expected: m, got });
        }
        for (k, &t) in theta.iter().enumerate() {
            if !(0.0..=PI).contains(&t) {
                return Err(Error::InvalidAngle(format!("theta[{k}] = {t} outside [0, pi]")));
            }
        }
        for (k, &f) in phi.iter().enumerate() {
            if !(0.0..2.0 * PI).contains(&f) {
                return Err(Error::InvalidAngle(format!("phi[{k}] = {f} outside [0, 2pi)")));
            }
        }
        Ok(Self { n, theta, phi, torus: None })
    }

    pub fn zeros(n: usize) -> Self {
        let m = pair_count(n);
        Self { n, theta: vec![0.0; m], phi: vec![0.0; m], torus: None }
    }

    pub fn with_torus(mut self, torus: Vec<f64>) -> Result<Self> {
        if torus.len() != self.n - 1 {
            return Err(Error::DimensionMismatch { expected: self.n - 1, got: torus.len() });
        }
        self.torus = Some(torus);
        Ok(self)
    }

    /// Uniform draw from the angle box.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let m = pair_count(n);
        let theta = (0..m).map(|_| rng.random::<f64>() * PI).collect();
        let phi = (0..m).map(|_| rng.random::<f64>() * 2.0 * PI).collect();
        Self { n, theta, phi, torus: None }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn theta(&self, i: usize, j: usize) -> f64 {
        self.theta[pair_index(self.n, i, j)]
    }

    pub fn phi(&self, i: usize, j: usize) -> f64 {
        self.phi[pair_index(self.n, i, j)]
    }

    pub fn thetas(&self) -> &[f64] {
        &self.theta
    }

    pub fn phis(&self) -> &[f64] {
        &self.phi
    }

    pub fn torus(&self) -> Option<&[f64]> {
        self.torus.as_deref()
    }

    /// Real parameters: coset angles plus torus phases when present.
    pub fn parameter_count(&self) -> usize {
        self.theta.len() + self.phi.len() + self.torus.as_ref().map_or(0, Vec::len)
    }
}

/// A special unitary matrix whose columns are an ordered orthonormal frame.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryFrame {
    u: CMatrix,
}

impl UnitaryFrame {
    pub fn new(u: CMatrix) -> Result<Self> {
        if u.nrows() != u.ncols() {
            return Err(Error::InvalidFrame("matrix is not square".into()));
        }
        let ue = unitarity_error(&u);
        if ue > FRAME_TOL {
            return Err(Error::InvalidFrame(format!("|U†U - 1| = {ue:e}")));
        }
        let de = (determinant(&u) - c(1.0, 0.0)).norm();
        if de > FRAME_TOL {
            return Err(Error::InvalidFrame(format!("|det U - 1| = {de:e}")));
        }
        Ok(Self { u })
    }

    pub fn new_unchecked(u: CMatrix) -> Self {
        Self { u }
    }

    pub fn identity(n: usize) -> Self {
        Self { u: CMatrix::identity(n, n) }
    }

    pub fn n(&self) -> usize {
        self.u.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.u
    }

    pub fn into_matrix(self) -> CMatrix {
        self.u
    }

    pub fn column(&self, i: usize) -> nalgebra::DVector<C64> {
        self.u.column(i).into_owned()
    }

    /// Rank-one projector onto column `i`.
    pub fn projector(&self, i: usize) -> CMatrix {
        let v = self.u.column(i);
        v * v.adjoint()
    }

    pub fn unitarity_error(&self) -> f64 {
        unitarity_error(&self.u)
    }

    pub fn determinant_error(&self) -> f64 {
        (determinant(&self.u) - c(1.0, 0.0)).norm()
    }
}

/// Embedded rotation `exp(-i phi s3/2) exp(-i theta s2/2) exp(i phi s3/2)`
/// in the zero-based `(i, j)` plane, written in closed form.
pub fn rotation_factor(n: usize, i: usize, j: usize, theta: f64, phi: f64) -> Result<UnitaryFrame> {
    check_pair(n, i, j)?;
    Ok(UnitaryFrame { u: rotation_matrix(n, i, j, theta, phi) })
}

fn rotation_matrix(n: usize, i: usize, j: usize, theta: f64, phi: f64) -> CMatrix {
    let (s, co) = (theta / 2.0).sin_cos();
    let mut m = CMatrix::identity(n, n);
    m[(i, i)] = c(co, 0.0);
    m[(j, j)] = c(co, 0.0);
    m[(i, j)] = -C64::from_polar(s, -phi);
    m[(j, i)] = C64::from_polar(s, phi);
    m
}

/// Right-multiplies `acc` by the rotation in the `(i, j)` plane in place.
fn apply_rotation_right(acc: &mut CMatrix, i: usize, j: usize, theta: f64, phi: f64) {
    let (s, co) = (theta / 2.0).sin_cos();
    let a = c(co, 0.0);
    let b = -C64::from_polar(s, -phi);
    let cc = C64::from_polar(s, phi);
    for row in 0..acc.nrows() {
        let xi = acc[(row, i)];
        let xj = acc[(row, j)];
        acc[(row, i)] = xi * a + xj * cc;
        acc[(row, j)] = xi * b + xj * a;
    }
}

/// Ordered product of rotations: `i` ascending in the outer loop, `j`
/// ascending in the inner loop.
pub fn coset_unitary(angles: &AngleSet) -> UnitaryFrame {
    let n = angles.n;
    let mut u = CMatrix::identity(n, n);
    for (i, j) in pairs(n) {
        let k = pair_index(n, i, j);
        apply_rotation_right(&mut u, i, j, angles.theta[k], angles.phi[k]);
    }
    UnitaryFrame { u }
}

/// Diagonal torus element `exp(i sum_l phi_l H_l)`.
pub fn torus_element(n: usize, phases: &[f64]) -> Result<CMatrix> {
    if phases.len() + 1 != n {
        return Err(Error::DimensionMismatch { expected: n - 1, got: phases.len() });
    }
    let mut d = vec![0.0; n];
    for (l0, &ph) in phases.iter().enumerate() {
        let h = cartan_generator(n, l0 + 1)?;
        for (k, dk) in d.iter_mut().enumerate() {
            *dk += ph * h[(k, k)];
        }
    }
    let mut m = CMatrix::zeros(n, n);
    for (k, &x) in d.iter().enumerate() {
        m[(k, k)] = C64::from_polar(1.0, x);
    }
    Ok(m)
}

/// Coset product right-multiplied by the torus factor. Requires torus phases.
pub fn full_unitary(angles: &AngleSet) -> Result<UnitaryFrame> {
    let torus = angles
        .torus
        .as_ref()
        .ok_or_else(|| Error::InvalidAngle("full unitary needs torus phases".into()))?;
    let d = torus_element(angles.n, torus)?;
    Ok(UnitaryFrame { u: coset_unitary(angles).u * d })
}

/// Closed-form n = 3 coset unitary, entry by entry.
pub fn qutrit_coset_explicit(angles: &AngleSet) -> Result<CMatrix> {
    if angles.n != 3 {
        return Err(Error::DimensionMismatch { expected: 3, got: angles.n });
    }
    let half = |t: f64| ((t / 2.0).cos(), (t / 2.0).sin());
    let (c12, s12) = half(angles.theta(0, 1));
    let (c13, s13) = half(angles.theta(0, 2));
    let (c23, s23) = half(angles.theta(1, 2));
    let (p12, p13, p23) = (angles.phi(0, 1), angles.phi(0, 2), angles.phi(1, 2));
    let e = |x: f64| C64::from_polar(1.0, x);
    let r = |x: f64| c(x, 0.0);
    let mut u = CMatrix::zeros(3, 3);
    u[(0, 0)] = r(c12 * c13);
    u[(0, 1)] = -e(-p12) * s12 * c23 - e(-p13 + p23) * c12 * s13 * s23;
    u[(0, 2)] = e(-(p12 + p23)) * s12 * s23 - e(-p13) * c12 * s13 * c23;
    u[(1, 0)] = e(p12) * s12 * c13;
    u[(1, 1)] = r(c12 * c23) - e(p12 - p13 + p23) * s12 * s13 * s23;
    u[(1, 2)] = -e(-p23) * c12 * s23 - e(p12 - p13) * s12 * s13 * c23;
    u[(2, 0)] = e(p13) * s13;
    u[(2, 1)] = e(p23) * c13 * s23;
    u[(2, 2)] = r(c13 * c23);
    Ok(u)
}

/// `U (1/n + D(r)) U†` for an arbitrary frame.
pub fn assemble_with_frame(r: &GapVector, frame: &UnitaryFrame) -> Result<DensityMatrix> {
    if frame.n() != r.n() {
        return Err(Error::DimensionMismatch { expected: r.n(), got: frame.n() });
    }
    let p = probs_from_gap_slice(r.as_slice());
    let rho = &frame.u * diag_complex(&p) * dagger(&frame.u);
    Ok(DensityMatrix::new_unchecked(crate::linalg::hermitize(&rho)))
}

/// `rho = 1/n + sum_a r_a U w_a U†` with `U` the coset unitary of `angles`.
pub fn assemble_density(r: &GapVector, angles: &AngleSet) -> Result<DensityMatrix> {
    if angles.n != r.n() {
        return Err(Error::DimensionMismatch { expected: r.n(), got: angles.n });
    }
    assemble_with_frame(r, &coset_unitary(angles))
}

/// Rephases each column so its largest-modulus entry is real positive, then
/// multiplies the last column by `conj(det)` so the determinant is 1.
pub fn fix_phases(u: &mut CMatrix) {
    let n = u.nrows();
    for j in 0..n {
        let mut best = 0;
        let mut best_abs = -1.0;
        for i in 0..n {
            let a = u[(i, j)].norm();
            if a > best_abs + 1e-14 {
                best_abs = a;
                best = i;
            }
        }
        let z = u[(best, j)];
        if z.norm() > 0.0 {
            let ph = z.conj() / z.norm();
            for i in 0..n {
                u[(i, j)] *= ph;
            }
        }
    }
    let det = determinant(u);
    let ph = det.conj() / det.norm();
    for i in 0..n {
        u[(i, n - 1)] *= ph;
    }
}

/// Inverse of [`assemble_with_frame`]: descending spectrum as gaps and the
/// eigenframe with the phase convention of [`fix_phases`].
pub fn eigendecompose_ordered(rho: &DensityMatrix) -> Result<(GapVector, UnitaryFrame)> {
    let (p, mut v) = hermitian_eigen_desc(rho.matrix());
    let min_gap = p.windows(2).map(|w| w[0] - w[1]).fold(f64::INFINITY, f64::min);
    if min_gap < EIGEN_GAP_TOL {
        return Err(Error::DegenerateSpectrum { min_gap });
    }
    fix_phases(&mut v);
    let mut r: Vec<f64> = p.windows(2).map(|w| w[0] - w[1]).collect();
    // eigenvalue roundoff can push sum a r_a a hair above one at pure states
    let w: f64 = r.iter().enumerate().map(|(a, x)| (a + 1) as f64 * x).sum();
    if w > 1.0 && w <= 1.0 + VALIDATION_TOL {
        r.iter_mut().for_each(|x| *x /= w);
    }
    Ok((GapVector::new(r)?, UnitaryFrame { u: v }))
}

/// Frobenius distance between two density matrices.
pub fn state_distance(a: &DensityMatrix, b: &DensityMatrix) -> f64 {
    frobenius(&(a.matrix() - b.matrix()))
}
