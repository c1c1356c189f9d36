use super::direct::continue_direct;
use super::{step_count, IntegrationOptions, LindbladModel, Method, StepDiagnostics, Trajectory, TrajectoryPoint, DEGENERACY_THRESHOLD};
use crate::error::{Error, Result};
use crate::linalg::{c, commutator, dagger, diag_complex, hermitize, polar_unitary, unitarity_error, CMatrix, I};
use crate::spectral::{jacobian_entry, probs_from_gap_slice, GapVector};
use crate::state::DensityMatrix;
use crate::sun::{eigendecompose_ordered, UnitaryFrame};

/// Gap vector and eigenframe at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitState {
    pub r: GapVector,
    pub frame: UnitaryFrame,
    pub t: f64,
}

impl SplitState {
    pub fn from_density(rho: &DensityMatrix, t: f64) -> Result<Self> {
        let (r, frame) = eigendecompose_ordered(rho)?;
        Ok(Self { r, frame, t })
    }

    pub fn density(&self) -> DensityMatrix {
        assemble(self.r.as_slice(), self.frame.matrix())
    }
}

/// Split right-hand side: gap rates plus the frame generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitRhs {
    pub r_dot: Vec<f64>,
    /// Eigenvalue rates recovered from `r_dot` through the Jacobian.
    pub p_dot: Vec<f64>,
    /// Diagonal of the dissipator in the eigenframe.
    pub dissipator_diagonal: Vec<f64>,
    /// `U̇ U†`.
    pub omega: CMatrix,
    /// `U† U̇` with zero diagonal.
    pub omega_tilde: CMatrix,
}

fn assemble(r: &[f64], u: &CMatrix) -> DensityMatrix {
    let p = probs_from_gap_slice(r);
    DensityMatrix::new_unchecked(hermitize(&(u * diag_complex(&p) * dagger(u))))
}

fn min_pair_gap(p: &[f64]) -> f64 {
    let mut m = f64::INFINITY;
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            m = m.min((p[i] - p[j]).abs());
        }
    }
    m
}

pub(crate) fn split_rhs_raw(r: &[f64], u: &CMatrix, model: &LindbladModel, threshold: f64) -> Result<SplitRhs> {
    let n = r.len() + 1;
    let p = probs_from_gap_slice(r);
    let min_gap = min_pair_gap(&p);
    if !(min_gap > threshold) {
        return Err(Error::DegenerateSpectrum { min_gap });
    }
    let ud = dagger(u);
    let rho = u * diag_complex(&p) * &ud;
    let l_tilde = &ud * model.dissipator(&rho) * u;
    let h_tilde = &ud * model.hamiltonian() * u;

    let d: Vec<f64> = (0..n).map(|i| l_tilde[(i, i)].re).collect();
    let r_dot: Vec<f64> = (0..n - 1).map(|a| d[a] - d[a + 1]).collect();
    let p_dot = (0..n)
        .map(|k| (0..n - 1).map(|a| jacobian_entry(n, k, a) * r_dot[a]).sum())
        .collect();

    // off-diagonal part of  rho_r' + [W, rho_r] = -i[H~, rho_r] + L~
    let mut omega_tilde = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                omega_tilde[(i, j)] = -I * h_tilde[(i, j)] + l_tilde[(i, j)] / c(p[j] - p[i], 0.0);
            }
        }
    }
    let omega = u * &omega_tilde * &ud;
    Ok(SplitRhs { r_dot, p_dot, dissipator_diagonal: d, omega, omega_tilde })
}

/// Gap rates `r'_a = D_a - D_{a+1}` and frame generator at `state`.
///
/// Fails with [`Error::DegenerateSpectrum`] when two eigenvalues are closer
/// than `1e-8`.
pub fn split_rhs(state: &SplitState, model: &LindbladModel) -> Result<SplitRhs> {
    if state.r.n() != model.n() {
        return Err(Error::DimensionMismatch { expected: model.n(), got: state.r.n() });
    }
    split_rhs_raw(state.r.as_slice(), state.frame.matrix(), model, DEGENERACY_THRESHOLD)
}

/// `U diag(p') U† + [Omega, rho]`, the density-matrix rate implied by a
/// split right-hand side.
pub fn reconstruct_rho_dot(state: &SplitState, rhs: &SplitRhs) -> CMatrix {
    let u = state.frame.matrix();
    let rho = state.density();
    u * diag_complex(&rhs.p_dot) * dagger(u) + commutator(&rhs.omega, rho.matrix())
}

struct Rates {
    r: Vec<f64>,
    u: CMatrix,
}

fn rates(r: &[f64], u: &CMatrix, model: &LindbladModel, threshold: f64) -> Result<Rates> {
    let rhs = split_rhs_raw(r, u, model, threshold)?;
    Ok(Rates { r: rhs.r_dot, u: &rhs.omega * u })
}

fn axpy(x: &[f64], a: f64, y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(xi, yi)| xi + a * yi).collect()
}

fn rk4_step(r: &[f64], u: &CMatrix, model: &LindbladModel, h: f64, threshold: f64) -> Result<(Vec<f64>, CMatrix)> {
    let k1 = rates(r, u, model, threshold)?;
    let k2 = rates(&axpy(r, h / 2.0, &k1.r), &(u + &k1.u * c(h / 2.0, 0.0)), model, threshold)?;
    let k3 = rates(&axpy(r, h / 2.0, &k2.r), &(u + &k2.u * c(h / 2.0, 0.0)), model, threshold)?;
    let k4 = rates(&axpy(r, h, &k3.r), &(u + &k3.u * c(h, 0.0)), model, threshold)?;
    let r_next = (0..r.len())
        .map(|a| r[a] + h / 6.0 * (k1.r[a] + 2.0 * (k2.r[a] + k3.r[a]) + k4.r[a]))
        .collect();
    let u_next = u + (k1.u + (k2.u + k3.u) * c(2.0, 0.0) + k4.u) * c(h / 6.0, 0.0);
    Ok((r_next, u_next))
}

fn split_point(t: f64, r: &[f64], u: &CMatrix, frame_drift: f64) -> TrajectoryPoint {
    let p = probs_from_gap_slice(r);
    let rho = assemble(r, u);
    TrajectoryPoint {
        t,
        rho,
        gaps: r.to_vec(),
        frame: Some(UnitaryFrame::new_unchecked(u.clone())),
        diagnostics: StepDiagnostics {
            trace_error: (p.iter().sum::<f64>() - 1.0).abs(),
            min_eigenvalue: p.iter().copied().fold(f64::INFINITY, f64::min),
            min_gap: min_pair_gap(&p),
            frame_drift: Some(frame_drift),
        },
    }
}

/// Fourth-order Runge–Kutta on the coupled system `r' = D_a - D_{a+1}`,
/// `U' = Omega U`, with a polar re-orthonormalization of `U` after every
/// step.
///
/// The step grid matches [`super::integrate_direct`]. If the spectrum comes
/// within the degeneracy threshold, the run stops with [`Error::Breakdown`]
/// carrying the last good time, or, with `fallback_to_direct`, finishes on
/// the direct integrator and records the breakdown time.
pub fn integrate_split(
    rho0: &DensityMatrix,
    model: &LindbladModel,
    t_end: f64,
    dt: f64,
    opts: &IntegrationOptions,
) -> Result<Trajectory> {
    if rho0.n() != model.n() {
        return Err(Error::DimensionMismatch { expected: model.n(), got: rho0.n() });
    }
    let steps = step_count(t_end, dt)?;
    let (r0, f0) = eigendecompose_ordered(rho0).map_err(|e| match e {
        Error::DegenerateSpectrum { min_gap } => Error::Breakdown { t: 0.0, min_gap },
        other => other,
    })?;
    let threshold = opts.degeneracy_threshold;
    let mut r = r0.as_slice().to_vec();
    let mut u = f0.into_matrix();
    let mut points = vec![split_point(0.0, &r, &u, unitarity_error(&u))];
    if steps == 0 {
        return Ok(Trajectory { method: Method::Split, points, breakdown: None });
    }
    let h = t_end / steps as f64;
    let every = opts.record_every.max(1);
    for s in 1..=steps {
        let t_prev = (s - 1) as f64 * h;
        let t = s as f64 * h;
        let step = rk4_step(&r, &u, model, h, threshold).and_then(|(r_next, u_next)| {
            let gap = min_pair_gap(&probs_from_gap_slice(&r_next));
            if gap > threshold && r_next.iter().all(|&x| x > 0.0) {
                Ok((r_next, u_next))
            } else {
                Err(Error::DegenerateSpectrum { min_gap: gap })
            }
        });
        match step {
            Ok((r_next, u_next)) => {
                let drift = unitarity_error(&u_next);
                r = r_next;
                u = polar_unitary(&u_next);
                if s % every == 0 || s == steps {
                    points.push(split_point(t, &r, &u, drift));
                }
            }
            Err(Error::DegenerateSpectrum { min_gap }) => {
                if !opts.fallback_to_direct {
                    return Err(Error::Breakdown { t: t_prev, min_gap });
                }
                if points.last().map(|p| p.t) != Some(t_prev) {
                    points.push(split_point(t_prev, &r, &u, unitarity_error(&u)));
                }
                let rho = assemble(&r, &u).into_matrix();
                continue_direct(&mut points, rho, model, t_prev, t_end, steps - (s - 1), opts)?;
                return Ok(Trajectory { method: Method::Split, points, breakdown: Some(t_prev) });
            }
            Err(e) => return Err(e),
        }
    }
    Ok(Trajectory { method: Method::Split, points, breakdown: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gkls::lindblad_rhs;
    use crate::linalg::frobenius;
    use crate::montecarlo::shard_rng;
    use crate::sun::{coset_unitary, AngleSet};

    fn state(r: &[f64], angles: &AngleSet) -> SplitState {
        SplitState { r: GapVector::new(r.to_vec()).unwrap(), frame: coset_unitary(angles), t: 0.0 }
    }

    #[test]
    fn no_dissipator_means_frozen_gaps() {
        let mut rng = shard_rng(6, 0);
        let model = LindbladModel::new(super::super::random_hermitian(3, &mut rng), vec![], vec![]).unwrap();
        let st = state(&[0.3, 0.2], &AngleSet::random(3, &mut rng));
        let rhs = split_rhs(&st, &model).unwrap();
        assert!(rhs.r_dot.iter().all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn rhs_reconstruction_random_qutrit() {
        let mut rng = shard_rng(7, 0);
        for _ in 0..20 {
            let model = LindbladModel::random(3, &mut rng);
            let st = state(&[0.3, 0.2], &AngleSet::random(3, &mut rng));
            let rhs = split_rhs(&st, &model).unwrap();
            let want = lindblad_rhs(&st.density(), &model).unwrap();
            assert!(frobenius(&(reconstruct_rho_dot(&st, &rhs) - want)) < 1e-10);
            assert!(rhs.p_dot.iter().sum::<f64>().abs() < 1e-12);
            assert!(rhs.dissipator_diagonal.iter().sum::<f64>().abs() < 1e-12);
        }
    }

    #[test]
    fn hamiltonian_only_dissipator_free_off_diagonal() {
        let mut rng = shard_rng(8, 0);
        let model = LindbladModel::new(CMatrix::zeros(3, 3), vec![super::super::random_complex(3, &mut rng)], vec![1.0]).unwrap();
        let st = state(&[0.25, 0.15], &AngleSet::random(3, &mut rng));
        let rhs = split_rhs(&st, &model).unwrap();
        let u = st.frame.matrix();
        let l_tilde = dagger(u) * model.dissipator(st.density().matrix()) * u;
        let p = probs_from_gap_slice(st.r.as_slice());
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    let want = l_tilde[(i, j)] / c(p[j] - p[i], 0.0);
                    assert!((rhs.omega_tilde[(i, j)] - want).norm() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn degenerate_state_is_rejected() {
        let mut rng = shard_rng(9, 0);
        let model = LindbladModel::random(3, &mut rng);
        let st = state(&[0.3, 0.0], &AngleSet::random(3, &mut rng));
        assert!(matches!(split_rhs(&st, &model), Err(Error::DegenerateSpectrum { .. })));
        let rho = DensityMatrix::maximally_mixed(3);
        let e = integrate_split(&rho, &model, 1.0, 1e-2, &IntegrationOptions::default()).unwrap_err();
        assert!(matches!(e, Error::Breakdown { t, .. } if t == 0.0));
    }

    #[test]
    fn split_tracks_direct() {
        let mut rng = shard_rng(10, 0);
        let base = LindbladModel::random(3, &mut rng);
        let model = base.scale_rates(0.05).unwrap();
        let rho0 = crate::sun::assemble_density(&GapVector::new(vec![0.3, 0.2]).unwrap(), &AngleSet::random(3, &mut rng)).unwrap();
        let opts = IntegrationOptions::default();
        let a = super::super::integrate_direct(&rho0, &model, 1.0, 1e-3, &opts).unwrap();
        let b = integrate_split(&rho0, &model, 1.0, 1e-3, &opts).unwrap();
        assert_eq!(a.points.len(), b.points.len());
        assert!(a.max_divergence(&b) < 1e-6, "{}", a.max_divergence(&b));
        for p in &b.points {
            assert!(p.diagnostics.frame_drift.unwrap() < 1e-10);
        }
    }

    #[test]
    fn depolarizing_qubit_split() {
        let model = crate::gkls::qubit::QubitModel { h00: 0.0, h11: 0.0, h01: c(0.0, 0.0), rates: [1.0; 3] }.to_lindblad().unwrap();
        let angles = AngleSet::new(2, vec![0.9], vec![2.0]).unwrap();
        let rho0 = crate::sun::assemble_density(&GapVector::new(vec![0.8]).unwrap(), &angles).unwrap();
        let traj = integrate_split(&rho0, &model, 0.5, 1e-3, &IntegrationOptions::default()).unwrap();
        let u0 = traj.points[0].frame.clone().unwrap();
        for p in &traj.points {
            assert!((p.gaps[0] - 0.8 * (-4.0 * p.t).exp()).abs() < 1e-9);
            assert!(frobenius(&(p.frame.as_ref().unwrap().matrix() - u0.matrix())) < 1e-12);
        }
    }

    #[test]
    fn fallback_finishes_on_direct() {
        // decay out of the more populated level drives the eigenvalues through each other
        let mut l = CMatrix::zeros(2, 2);
        l[(0, 1)] = c(1.0, 0.0);
        let model = LindbladModel::new(CMatrix::zeros(2, 2), vec![l.clone()], vec![1.0]).unwrap();
        let rho0 = DensityMatrix::new(diag_complex(&[0.7, 0.3])).unwrap();
        let err = integrate_split(&rho0, &model, 2.0, 1e-3, &IntegrationOptions::default());
        let model_flip = LindbladModel::new(CMatrix::zeros(2, 2), vec![dagger(&l)], vec![1.0]).unwrap();
        assert!(err.is_ok());
        let e = integrate_split(&rho0, &model_flip, 2.0, 1e-3, &IntegrationOptions::default()).unwrap_err();
        let Error::Breakdown { t, .. } = e else { panic!("{e:?}") };
        // p_1 = 0.7 e^{-t} crosses 1/2 at t = ln(7/5)
        let tc = (1.4f64).ln();
        assert!(t < tc && t > tc - 0.01, "{t}");
        let opts = IntegrationOptions { fallback_to_direct: true, ..Default::default() };
        let traj = integrate_split(&rho0, &model_flip, 2.0, 1e-3, &opts).unwrap();
        assert_eq!(traj.breakdown, Some(t));
        assert!((traj.points.last().unwrap().t - 2.0).abs() < 1e-12);
        let direct = super::super::integrate_direct(&rho0, &model_flip, 2.0, 1e-3, &opts).unwrap();
        assert!(frobenius(&(traj.points.last().unwrap().rho.matrix() - direct.points.last().unwrap().rho.matrix())) < 1e-8);
    }
}
