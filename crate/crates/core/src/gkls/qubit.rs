//! Closed-form qubit flow for `L_k = sigma_k` in Bloch coordinates.

use std::f64::consts::PI;

use super::{split_rhs, LindbladModel, SplitState};
use crate::error::{Error, Result};
use crate::linalg::{c, trace, CMatrix, C64};
use crate::spectral::GapVector;
use crate::state::DensityMatrix;
use crate::sun::{assemble_with_frame, embedded_generator, rotation_factor, UnitaryFrame};

/// Polar-angle chart limit: `sin(theta)` must exceed this.
pub const CHART_TOL: f64 = 1e-8;

/// Bloch radius and direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitAngles {
    pub r: f64,
    pub theta: f64,
    pub phi: f64,
}

impl QubitAngles {
    pub fn new(r: f64, theta: f64, phi: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::OutsidePolytope(format!("Bloch radius {r} not in [0, 1]")));
        }
        if !(0.0..=PI).contains(&theta) {
            return Err(Error::InvalidAngle(format!("theta = {theta} not in [0, pi]")));
        }
        if !(0.0..2.0 * PI).contains(&phi) {
            return Err(Error::InvalidAngle(format!("phi = {phi} not in [0, 2pi)")));
        }
        Ok(Self { r, theta, phi })
    }

    pub fn frame(&self) -> UnitaryFrame {
        rotation_factor(2, 0, 1, self.theta, self.phi).expect("qubit pair is valid")
    }

    pub fn gaps(&self) -> GapVector {
        GapVector::new(vec![self.r]).expect("radius validated")
    }

    /// `(1 + r U sigma_3 U†) / 2`.
    pub fn density(&self) -> DensityMatrix {
        assemble_with_frame(&self.gaps(), &self.frame()).expect("qubit dimensions agree")
    }

    pub fn split_state(&self) -> SplitState {
        SplitState { r: self.gaps(), frame: self.frame(), t: 0.0 }
    }

    /// Bloch unit vector `u(theta, phi)`.
    pub fn direction(&self) -> [f64; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [st * cp, st * sp, ct]
    }
}

/// Hamiltonian `[[h00, h01], [conj(h01), h11]]` with Pauli jumps at rates
/// `h_1, h_2, h_3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitModel {
    pub h00: f64,
    pub h11: f64,
    pub h01: C64,
    pub rates: [f64; 3],
}

impl QubitModel {
    pub fn hamiltonian(&self) -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[c(self.h00, 0.0), self.h01, self.h01.conj(), c(self.h11, 0.0)])
    }

    pub fn to_lindblad(&self) -> Result<LindbladModel> {
        let jumps = (1..=3).map(|k| embedded_generator(2, 0, 1, k).expect("qubit Pauli")).collect();
        LindbladModel::new(self.hamiltonian(), jumps, self.rates.to_vec())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitRates {
    pub phi_dot: f64,
    pub theta_dot: f64,
    pub r_dot: f64,
}

fn check_chart(state: &QubitAngles) -> Result<()> {
    if !(state.theta.sin() > CHART_TOL) {
        return Err(Error::ChartSingularity(format!("sin(theta) = {:e} at theta = {}", state.theta.sin(), state.theta)));
    }
    if !(state.r > 0.0) {
        return Err(Error::ChartSingularity("Bloch radius is zero".into()));
    }
    Ok(())
}

/// Angular and radial rates from the closed-form qubit equations.
pub fn qubit_rhs(state: &QubitAngles, model: &QubitModel) -> Result<QubitRates> {
    check_chart(state)?;
    let [h1, h2, h3] = model.rates;
    let (re, im) = (model.h01.re, model.h01.im);
    let (st, ct) = state.theta.sin_cos();
    let (sp, cp) = state.phi.sin_cos();
    let phi_dot = model.h00 - model.h11 - 2.0 * (ct / st) * (re * cp - im * sp) + (h2 - h1) * (2.0 * state.phi).sin();
    let theta_dot = -2.0 * (re * sp + im * cp) + (2.0 * state.theta).sin() * (h1 * cp * cp + h2 * sp * sp - h3);
    let s2 = st * st;
    let r_rate = -2.0 * (h1 * (1.0 - s2 * cp * cp) + h2 * (1.0 - s2 * sp * sp) + h3 * s2);
    Ok(QubitRates { phi_dot, theta_dot, r_dot: r_rate * state.r })
}

/// The same rates obtained from the general split right-hand side by
/// tracking the Bloch direction `tr(sigma_k U sigma_3 U†) / 2`.
pub fn qubit_rates_from_split(state: &QubitAngles, model: &QubitModel) -> Result<QubitRates> {
    check_chart(state)?;
    let lindblad = model.to_lindblad()?;
    let st = state.split_state();
    let rhs = split_rhs(&st, &lindblad)?;
    let u = st.frame.matrix();
    let s3 = embedded_generator(2, 0, 1, 3)?;
    let axis = u * &s3 * u.adjoint();
    let axis_dot = &rhs.omega * &axis - &axis * &rhs.omega;
    let m = state.direction();
    let mut m_dot = [0.0; 3];
    for (k, md) in m_dot.iter_mut().enumerate() {
        let sk = embedded_generator(2, 0, 1, (k + 1) as u8)?;
        *md = trace(&(&sk * &axis_dot)).re / 2.0;
    }
    let theta_dot = -m_dot[2] / state.theta.sin();
    let phi_dot = (m[0] * m_dot[1] - m[1] * m_dot[0]) / (m[0] * m[0] + m[1] * m[1]);
    Ok(QubitRates { phi_dot, theta_dot, r_dot: rhs.r_dot[0] })
}
