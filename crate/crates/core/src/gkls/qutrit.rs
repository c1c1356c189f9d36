//! Real qutrits: gap pair `(r1, r2)` with a `zyz` Euler frame in `SO(3)`.

use std::f64::consts::PI;

use nalgebra::Matrix3;

use super::LindbladModel;
use crate::error::{Error, Result};
use crate::linalg::{c, CMatrix};
use crate::spectral::{in_polytope, probs_from_gap_slice};
use crate::state::DensityMatrix;

/// Chart limit for `sin(beta)` and for the three eigenvalue gaps.
pub const CHART_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QutritEuler {
    pub r1: f64,
    pub r2: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl QutritEuler {
    pub fn new(r1: f64, r2: f64, alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        if !in_polytope(&[r1, r2], 3) {
            return Err(Error::OutsidePolytope(format!("(r1, r2) = ({r1}, {r2})")));
        }
        for (name, v) in [("alpha", alpha), ("gamma", gamma)] {
            if !(0.0..2.0 * PI).contains(&v) {
                return Err(Error::InvalidAngle(format!("{name} = {v} not in [0, 2pi)")));
            }
        }
        if !(0.0..=PI).contains(&beta) {
            return Err(Error::InvalidAngle(format!("beta = {beta} not in [0, pi]")));
        }
        Ok(Self { r1, r2, alpha, beta, gamma })
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        euler_rotation(self.alpha, self.beta, self.gamma)
    }

    pub fn probs(&self) -> [f64; 3] {
        let p = probs_from_gap_slice(&[self.r1, self.r2]);
        [p[0], p[1], p[2]]
    }

    /// `U diag(p) U^T`.
    pub fn real_density(&self) -> Matrix3<f64> {
        let u = self.rotation();
        let [p1, p2, p3] = self.probs();
        u * Matrix3::from_diagonal(&nalgebra::Vector3::new(p1, p2, p3)) * u.transpose()
    }

    pub fn density(&self) -> DensityMatrix {
        DensityMatrix::new_unchecked(to_complex(&self.real_density()))
    }
}

fn rz(a: f64) -> Matrix3<f64> {
    let (s, co) = a.sin_cos();
    Matrix3::new(co, -s, 0.0, s, co, 0.0, 0.0, 0.0, 1.0)
}

fn ry(b: f64) -> Matrix3<f64> {
    let (s, co) = b.sin_cos();
    Matrix3::new(co, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, co)
}

/// `R_z(alpha) R_y(beta) R_z(gamma)`.
pub fn euler_rotation(alpha: f64, beta: f64, gamma: f64) -> Matrix3<f64> {
    rz(alpha) * ry(beta) * rz(gamma)
}

/// `U^T dU/dt` written in terms of the Euler angle rates.
pub fn omega_from_euler_rates(beta: f64, gamma: f64, alpha_dot: f64, beta_dot: f64, gamma_dot: f64) -> Matrix3<f64> {
    let (sb, cb) = beta.sin_cos();
    let (sg, cg) = gamma.sin_cos();
    let w12 = -(alpha_dot * cb + gamma_dot);
    let w13 = alpha_dot * sb * sg + beta_dot * cg;
    let w23 = alpha_dot * sb * cg - beta_dot * sg;
    Matrix3::new(0.0, w12, w13, -w12, 0.0, w23, -w13, -w23, 0.0)
}

pub(crate) fn to_complex(m: &Matrix3<f64>) -> CMatrix {
    CMatrix::from_fn(3, 3, |i, j| c(m[(i, j)], 0.0))
}

/// Real-preserving model: `rho' = [A, rho] + sum_k h_k (L rho L^T - {rho, L^T L}/2)`
/// with `A` antisymmetric and real jumps.
#[derive(Debug, Clone, PartialEq)]
pub struct RealQutritModel {
    a: Matrix3<f64>,
    jumps: Vec<Matrix3<f64>>,
    rates: Vec<f64>,
}

impl RealQutritModel {
    pub fn new(a: Matrix3<f64>, jumps: Vec<Matrix3<f64>>, rates: Vec<f64>) -> Result<Self> {
        let asym = (a + a.transpose()).amax();
        if asym > 1e-12 {
            return Err(Error::InvalidModel(format!("A is not antisymmetric (deviation {asym:e})")));
        }
        if jumps.len() != rates.len() {
            return Err(Error::InvalidModel(format!("{} jump operators but {} rates", jumps.len(), rates.len())));
        }
        if let Some(k) = rates.iter().position(|&g| !(g >= 0.0) || !g.is_finite()) {
            return Err(Error::InvalidModel(format!("rate {k} = {} is not a non-negative number", rates[k])));
        }
        Ok(Self { a, jumps, rates })
    }

    pub fn generator(&self) -> &Matrix3<f64> {
        &self.a
    }

    pub fn dissipator(&self, rho: &Matrix3<f64>) -> Matrix3<f64> {
        let mut out = Matrix3::zeros();
        for (l, &g) in self.jumps.iter().zip(&self.rates) {
            let ll = l.transpose() * l;
            out += g * (l * rho * l.transpose() - 0.5 * (rho * ll + ll * rho));
        }
        out
    }

    /// Complex model with `H = i A`.
    pub fn to_lindblad(&self) -> Result<LindbladModel> {
        let h = to_complex(&self.a) * c(0.0, 1.0);
        LindbladModel::new(h, self.jumps.iter().map(to_complex).collect(), self.rates.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QutritRates {
    pub alpha_dot: f64,
    pub beta_dot: f64,
    pub gamma_dot: f64,
    pub r1_dot: f64,
    pub r2_dot: f64,
    /// `U^T dU/dt` from the gap-resolved entries.
    pub omega: Matrix3<f64>,
}

/// Euler-angle and gap rates of the real qutrit.
pub fn real_qutrit_rhs(state: &QutritEuler, model: &RealQutritModel) -> Result<QutritRates> {
    let (sb, cb) = state.beta.sin_cos();
    if !(sb > CHART_TOL) {
        return Err(Error::ChartSingularity(format!("sin(beta) = {sb:e} at beta = {}", state.beta)));
    }
    let (r1, r2) = (state.r1, state.r2);
    for (name, g) in [("r1", r1), ("r2", r2), ("r1 + r2", r1 + r2)] {
        if !(g > CHART_TOL) {
            return Err(Error::ChartSingularity(format!("spectral degeneracy, {name} = {g:e}")));
        }
    }
    let u = state.rotation();
    let ut = u.transpose();
    let a_t = ut * model.a * u;
    let k = ut * model.dissipator(&state.real_density()) * u;
    let (d1, d2, d3) = (k[(0, 0)], k[(1, 1)], k[(2, 2)]);

    let w12 = a_t[(0, 1)] - k[(0, 1)] / r1;
    let w23 = a_t[(1, 2)] - k[(1, 2)] / r2;
    let w13 = a_t[(0, 2)] - k[(0, 2)] / (r1 + r2);

    let (sg, cg) = state.gamma.sin_cos();
    let lateral = w13 * sg + w23 * cg;
    Ok(QutritRates {
        alpha_dot: lateral / sb,
        beta_dot: w13 * cg - w23 * sg,
        gamma_dot: -w12 - cb / sb * lateral,
        r1_dot: d1 - d2,
        r2_dot: d2 - d3,
        omega: Matrix3::new(0.0, w12, w13, -w12, 0.0, w23, -w13, -w23, 0.0),
    })
}
