use super::{spectrum_diagnostics, step_count, IntegrationOptions, LindbladModel, Method, StepDiagnostics, Trajectory, TrajectoryPoint, POSITIVITY_FLOOR};
use crate::error::{Error, Result};
use crate::linalg::{c, hermitian_eigenvalues_desc, hermitize, trace, CMatrix};
use crate::state::DensityMatrix;

fn rk4_step(model: &LindbladModel, rho: &CMatrix, h: f64) -> CMatrix {
    let half = c(h / 2.0, 0.0);
    let full = c(h, 0.0);
    let k1 = model.rhs(rho);
    let k2 = model.rhs(&(rho + &k1 * half));
    let k3 = model.rhs(&(rho + &k2 * half));
    let k4 = model.rhs(&(rho + &k3 * full));
    rho + (k1 + (k2 + k3) * c(2.0, 0.0) + k4) * c(h / 6.0, 0.0)
}

pub(crate) fn point(t: f64, rho: CMatrix, trace_error: f64) -> Result<TrajectoryPoint> {
    let p = hermitian_eigenvalues_desc(&rho);
    let (min_eigenvalue, min_gap) = spectrum_diagnostics(&p);
    if min_eigenvalue < POSITIVITY_FLOOR {
        return Err(Error::Positivity { t, min_eig: min_eigenvalue });
    }
    Ok(TrajectoryPoint {
        t,
        rho: DensityMatrix::new_unchecked(rho),
        gaps: p.windows(2).map(|w| w[0] - w[1]).collect(),
        frame: None,
        diagnostics: StepDiagnostics { trace_error, min_eigenvalue, min_gap, frame_drift: None },
    })
}

/// Classical fourth-order Runge–Kutta on the density matrix with per-step
/// Hermitization and trace renormalization.
///
/// The interval `[0, t_end]` is covered by `round(t_end / dt)` equal steps.
/// Aborts with [`Error::Positivity`] if an eigenvalue drops below `-1e-8`.
pub fn integrate_direct(
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
    let mut points = vec![point(0.0, rho0.matrix().clone(), 0.0)?];
    continue_direct(&mut points, rho0.matrix().clone(), model, 0.0, t_end, steps, opts)?;
    Ok(Trajectory { method: Method::Direct, points, breakdown: None })
}

/// Advances `rho` from `t0` to `t_end` in `steps` equal steps, appending
/// recorded points.
pub(crate) fn continue_direct(
    points: &mut Vec<TrajectoryPoint>,
    mut rho: CMatrix,
    model: &LindbladModel,
    t0: f64,
    t_end: f64,
    steps: usize,
    opts: &IntegrationOptions,
) -> Result<()> {
    if steps == 0 {
        return Ok(());
    }
    let h = (t_end - t0) / steps as f64;
    let every = opts.record_every.max(1);
    for s in 1..=steps {
        let t = t0 + s as f64 * h;
        rho = hermitize(&rk4_step(model, &rho, h));
        let tr = trace(&rho).re;
        let trace_error = (tr - 1.0).abs();
        rho /= c(tr, 0.0);
        if s % every == 0 || s == steps {
            points.push(point(t, rho.clone(), trace_error)?);
        } else {
            let min_eig = *hermitian_eigenvalues_desc(&rho).last().expect("n >= 2");
            if min_eig < POSITIVITY_FLOOR {
                return Err(Error::Positivity { t, min_eig });
            }
        }
    }
    Ok(())
}
