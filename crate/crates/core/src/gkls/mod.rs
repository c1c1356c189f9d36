//! GKLS (Lindblad) dynamics.
//!
//! Two integrators are provided: [`integrate_direct`] steps the density
//! matrix itself, [`integrate_split`] steps the gap vector and the eigenframe
//! separately. In the eigenframe the gaps are driven only by the diagonal of
//! the dissipator, while the frame rotates with a generator fed by both the
//! Hamiltonian and the off-diagonal dissipator entries. The qubit and real
//! qutrit closed forms in [`qubit`] and [`qutrit`] specialize the same split.

mod direct;
pub mod qubit;
pub mod qutrit;
mod secular;
mod split;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{anticommutator, c, commutator, dagger, hermiticity_error, CMatrix, I};
use crate::state::DensityMatrix;
use crate::sun::UnitaryFrame;

pub use direct::integrate_direct;
pub use secular::{secular_factorization_test, SecularReport};
pub use split::{integrate_split, reconstruct_rho_dot, split_rhs, SplitRhs, SplitState};

/// Hermiticity tolerance for the Hamiltonian.
pub const MODEL_HERMITIAN_TOL: f64 = 1e-12;
/// Minimum eigenvalue gap before the split chart is declared broken.
pub const DEGENERACY_THRESHOLD: f64 = 1e-8;
/// Most negative eigenvalue tolerated along a direct trajectory.
pub const POSITIVITY_FLOOR: f64 = -1e-8;

/// Hamiltonian, jump operators and non-negative rates.
#[derive(Debug, Clone, PartialEq)]
pub struct LindbladModel {
    h: CMatrix,
    jumps: Vec<CMatrix>,
    rates: Vec<f64>,
    // L_k† L_k, cached
    jump_products: Vec<CMatrix>,
}

impl LindbladModel {
    pub fn new(h: CMatrix, jumps: Vec<CMatrix>, rates: Vec<f64>) -> Result<Self> {
        let n = h.nrows();
        if n < 2 {
            return Err(Error::Dimension(n));
        }
        if h.ncols() != n {
            return Err(Error::InvalidModel("Hamiltonian is not square".into()));
        }
        let herm = hermiticity_error(&h);
        if herm > MODEL_HERMITIAN_TOL {
            return Err(Error::InvalidModel(format!("Hamiltonian not Hermitian (deviation {herm:e})")));
        }
        if jumps.len() != rates.len() {
            return Err(Error::InvalidModel(format!(
                "{} jump operators but {} rates",
                jumps.len(),
                rates.len()
            )));
        }
        for (k, l) in jumps.iter().enumerate() {
            if l.nrows() != n || l.ncols() != n {
                return Err(Error::InvalidModel(format!(
                    "jump {k} is {}x{}, expected {n}x{n}",
                    l.nrows(),
                    l.ncols()
                )));
            }
        }
        if let Some(k) = rates.iter().position(|&g| !(g >= 0.0) || !g.is_finite()) {
            return Err(Error::InvalidModel(format!("rate {k} = {} is not a non-negative number", rates[k])));
        }
        let jump_products = jumps.iter().map(|l| dagger(l) * l).collect();
        Ok(Self { h, jumps, rates, jump_products })
    }

    /// Gaussian Hermitian Hamiltonian and `n` Gaussian complex jump
    /// operators at unit rate.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let h = random_hermitian(n, rng);
        let jumps: Vec<CMatrix> = (0..n).map(|_| random_complex(n, rng)).collect();
        let rates = vec![1.0; n];
        Self::new(h, jumps, rates).expect("random model is valid by construction")
    }

    pub fn n(&self) -> usize {
        self.h.nrows()
    }

    pub fn hamiltonian(&self) -> &CMatrix {
        &self.h
    }

    pub fn jumps(&self) -> &[CMatrix] {
        &self.jumps
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    /// Same dissipator, different Hamiltonian.
    pub fn with_hamiltonian(&self, h: CMatrix) -> Result<Self> {
        Self::new(h, self.jumps.clone(), self.rates.clone())
    }

    /// Scales every rate by `factor`.
    pub fn scale_rates(&self, factor: f64) -> Result<Self> {
        Self::new(self.h.clone(), self.jumps.clone(), self.rates.iter().map(|g| g * factor).collect())
    }

    /// `sum_k h_k (L_k rho L_k† - {rho, L_k† L_k} / 2)`.
    pub fn dissipator(&self, rho: &CMatrix) -> CMatrix {
        let n = self.n();
        let mut out = CMatrix::zeros(n, n);
        for ((l, ll), &g) in self.jumps.iter().zip(&self.jump_products).zip(&self.rates) {
            if g == 0.0 {
                continue;
            }
            let term = l * rho * dagger(l) - anticommutator(rho, ll) * c(0.5, 0.0);
            out += term * c(g, 0.0);
        }
        out
    }

    /// `-i[H, rho] + dissipator(rho)`.
    pub fn rhs(&self, rho: &CMatrix) -> CMatrix {
        commutator(&self.h, rho) * (-I) + self.dissipator(rho)
    }
}

pub fn random_hermitian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let g = random_complex(n, rng);
    (&g + dagger(&g)) * c(0.5, 0.0)
}

pub fn random_complex<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(n, n, |_, _| {
        c(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    })
}

/// Right-hand side of the GKLS equation at `rho`.
pub fn lindblad_rhs(rho: &DensityMatrix, model: &LindbladModel) -> Result<CMatrix> {
    if rho.n() != model.n() {
        return Err(Error::DimensionMismatch { expected: model.n(), got: rho.n() });
    }
    Ok(model.rhs(rho.matrix()))
}

/// Which integrator produced a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Direct,
    Split,
}

/// Per-step health checks recorded along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    /// `|tr rho - 1|` before renormalization.
    pub trace_error: f64,
    pub min_eigenvalue: f64,
    /// Smallest gap between adjacent ordered eigenvalues.
    pub min_gap: f64,
    /// `|U†U - 1|` before the polar correction (split integrator only).
    pub frame_drift: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub rho: DensityMatrix,
    /// Gaps of the ordered spectrum.
    pub gaps: Vec<f64>,
    pub frame: Option<UnitaryFrame>,
    pub diagnostics: StepDiagnostics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub method: Method,
    pub points: Vec<TrajectoryPoint>,
    /// Time at which the split chart broke down, if the run fell back to
    /// direct integration.
    pub breakdown: Option<f64>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.t).collect()
    }

    pub fn n(&self) -> usize {
        self.points.first().map_or(0, |p| p.rho.n())
    }

    /// Largest Frobenius distance between states recorded at matching times.
    pub fn max_divergence(&self, other: &Trajectory) -> f64 {
        self.points
            .iter()
            .zip(&other.points)
            .map(|(a, b)| {
                debug_assert!((a.t - b.t).abs() < 1e-12);
                crate::linalg::frobenius(&(a.rho.matrix() - b.rho.matrix()))
            })
            .fold(0.0, f64::max)
    }
}

/// Step controls shared by both integrators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrationOptions {
    /// Record every `record_every`-th step (the initial and final states are
    /// always recorded).
    pub record_every: usize,
    /// On split-chart breakdown, finish the run with the direct integrator
    /// instead of returning an error.
    pub fallback_to_direct: bool,
    pub degeneracy_threshold: f64,
}

impl Default for IntegrationOptions {
    fn default() -> Self {
        Self { record_every: 1, fallback_to_direct: false, degeneracy_threshold: DEGENERACY_THRESHOLD }
    }
}

/// Number of equal steps covering `[0, t_end]` at roughly `dt`.
pub(crate) fn step_count(t_end: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Integration(format!("dt = {dt} must be positive")));
    }
    if !(t_end >= 0.0) || !t_end.is_finite() {
        return Err(Error::Integration(format!("t_end = {t_end} must be non-negative")));
    }
    Ok((t_end / dt).round() as usize)
}

pub(crate) fn spectrum_diagnostics(p: &[f64]) -> (f64, f64) {
    let min_eig = p.last().copied().unwrap_or(0.0);
    let min_gap = p.windows(2).map(|w| w[0] - w[1]).fold(f64::INFINITY, f64::min);
    (min_eig, min_gap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{frobenius, trace};
    use crate::montecarlo::shard_rng;
    use crate::sun::{assemble_density, AngleSet};
    use crate::spectral::GapVector;

    #[test]
    fn zero_model_gives_zero_rhs() {
        let m = LindbladModel::new(CMatrix::zeros(3, 3), vec![], vec![]).unwrap();
        let rho = DensityMatrix::new(crate::linalg::diag_complex(&[0.5, 0.3, 0.2])).unwrap();
        assert_eq!(lindblad_rhs(&rho, &m).unwrap(), CMatrix::zeros(3, 3));
    }

    #[test]
    fn hermitian_jumps_fix_the_maximally_mixed_state() {
        let mut rng = shard_rng(1, 0);
        for n in 2..6 {
            let jumps: Vec<CMatrix> = (0..3).map(|_| random_hermitian(n, &mut rng)).collect();
            let m = LindbladModel::new(random_hermitian(n, &mut rng), jumps, vec![0.7, 1.0, 2.0]).unwrap();
            let mixed = DensityMatrix::maximally_mixed(n);
            assert!(frobenius(&m.dissipator(mixed.matrix())) < 1e-13);
            assert!(frobenius(&lindblad_rhs(&mixed, &m).unwrap()) < 1e-13);
        }
    }

    #[test]
    fn rhs_is_traceless_and_hermitian() {
        let mut rng = shard_rng(2, 0);
        for n in 2..6 {
            let m = LindbladModel::random(n, &mut rng);
            let rho = assemble_density(&GapVector::random(n, &mut rng), &AngleSet::random(n, &mut rng)).unwrap();
            let d = lindblad_rhs(&rho, &m).unwrap();
            assert!(trace(&d).norm() < 1e-13);
            assert!(hermiticity_error(&d) < 1e-13);
        }
    }

    #[test]
    fn model_validation() {
        let h = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert!(LindbladModel::new(h, vec![], vec![]).is_err());
        let z = CMatrix::zeros(2, 2);
        assert!(LindbladModel::new(z.clone(), vec![z.clone()], vec![-1.0]).is_err());
        assert!(LindbladModel::new(z.clone(), vec![z.clone()], vec![]).is_err());
        assert!(LindbladModel::new(z.clone(), vec![CMatrix::zeros(3, 3)], vec![1.0]).is_err());
        let m = LindbladModel::new(z, vec![], vec![]).unwrap();
        let rho = DensityMatrix::maximally_mixed(3);
        assert!(matches!(lindblad_rhs(&rho, &m), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn step_count_validation() {
        assert_eq!(step_count(1.0, 1e-3).unwrap(), 1000);
        assert_eq!(step_count(0.0, 0.1).unwrap(), 0);
        assert!(step_count(1.0, 0.0).is_err());
        assert!(step_count(-1.0, 0.1).is_err());
    }
}
