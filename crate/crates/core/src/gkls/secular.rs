use super::split::split_rhs_raw;
use super::{LindbladModel, SplitState, DEGENERACY_THRESHOLD};
use crate::error::{Error, Result};
use crate::linalg::{c, dagger, diag_complex, CMatrix, C64};
use crate::spectral::probs_from_gap_slice;

/// Outcome of [`secular_factorization_test`].
#[derive(Debug, Clone, PartialEq)]
pub struct SecularReport {
    pub factorized: bool,
    /// One entry per gap variation: the largest relative change of
    /// `k_ij / (p_i - p_j)` against the reference gaps.
    pub residuals: Vec<f64>,
    /// Reference ratios, row-major over the pairs `i < j`.
    pub ratios: Vec<C64>,
}

fn ratios(model: &LindbladModel, u: &CMatrix, r: &[f64]) -> Vec<C64> {
    let n = r.len() + 1;
    let p = probs_from_gap_slice(r);
    let rho = u * diag_complex(&p) * dagger(u);
    let k = dagger(u) * model.dissipator(&rho) * u;
    let mut out = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            out.push(k[(i, j)] / c(p[i] - p[j], 0.0));
        }
    }
    out
}

/// Gap variations that keep the frame fixed: each gap halved in turn, all
/// gaps scaled by 0.6, and an uneven rescaling.
fn variations(r: &[f64]) -> Vec<Vec<f64>> {
    let m = r.len();
    let mut out = Vec::new();
    for a in 0..m {
        let mut v = r.to_vec();
        v[a] *= 0.5;
        out.push(v);
    }
    out.push(r.iter().map(|x| 0.6 * x).collect());
    out.push(r.iter().enumerate().map(|(a, x)| x * (0.3 + 0.5 * (a + 1) as f64 / m as f64)).collect());
    out
}

/// Checks whether the off-diagonal eigenframe dissipator entries factor as
/// `k_ij = f_ij(frame) (p_i - p_j)` by comparing the ratios at fixed frame
/// across several gap vectors.
pub fn secular_factorization_test(model: &LindbladModel, state: &SplitState, tolerance: f64) -> Result<SecularReport> {
    if state.r.n() != model.n() {
        return Err(Error::DimensionMismatch { expected: model.n(), got: state.r.n() });
    }
    let r = state.r.as_slice();
    let u = state.frame.matrix();
    split_rhs_raw(r, u, model, DEGENERACY_THRESHOLD)?;
    let reference = ratios(model, u, r);
    let residuals: Vec<f64> = variations(r)
        .iter()
        .map(|v| {
            ratios(model, u, v)
                .iter()
                .zip(&reference)
                .map(|(x, x0)| (x - x0).norm() / x0.norm().max(1.0))
                .fold(0.0, f64::max)
        })
        .collect();
    let factorized = residuals.iter().all(|&e| e <= tolerance);
    Ok(SecularReport { factorized, residuals, ratios: reference })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::montecarlo::shard_rng;
    use crate::spectral::GapVector;
    use crate::sun::{coset_unitary, AngleSet};

    #[test]
    fn zero_dissipator_is_factorized() {
        let mut rng = shard_rng(41, 0);
        let model = LindbladModel::new(super::super::random_hermitian(3, &mut rng), vec![], vec![]).unwrap();
        let st = SplitState { r: GapVector::new(vec![0.3, 0.2]).unwrap(), frame: coset_unitary(&AngleSet::random(3, &mut rng)), t: 0.0 };
        let rep = secular_factorization_test(&model, &st, 1e-10).unwrap();
        assert!(rep.factorized);
        assert!(rep.ratios.iter().all(|x| x.norm() == 0.0));
    }

    #[test]
    fn random_dissipator_is_not() {
        let mut rng = shard_rng(42, 0);
        let model = LindbladModel::random(3, &mut rng);
        let st = SplitState { r: GapVector::new(vec![0.3, 0.2]).unwrap(), frame: coset_unitary(&AngleSet::random(3, &mut rng)), t: 0.0 };
        assert!(!secular_factorization_test(&model, &st, 1e-6).unwrap().factorized);
    }

    #[test]
    fn frame_aligned_hermitian_jumps_factorize() {
        let mut rng = shard_rng(43, 0);
        let frame = coset_unitary(&AngleSet::random(3, &mut rng));
        let u = frame.matrix().clone();
        // diagonal in the frame, plus a coupling between the first two frame vectors
        let mut x1 = diag_complex(&[0.7, -0.2, 0.4]);
        x1[(0, 1)] = c(0.9, 0.0);
        x1[(1, 0)] = c(0.9, 0.0);
        let x2 = diag_complex(&[0.1, 0.5, -0.6]);
        let jumps = vec![&u * x1 * dagger(&u), &u * x2 * dagger(&u)];
        let model = LindbladModel::new(super::super::random_hermitian(3, &mut rng), jumps, vec![1.0, 0.5]).unwrap();
        let st = SplitState { r: GapVector::new(vec![0.3, 0.2]).unwrap(), frame, t: 0.0 };
        let rep = secular_factorization_test(&model, &st, 1e-10).unwrap();
        assert!(rep.factorized, "{:?}", rep.residuals);
        // k_12 / r_1 = c (d_1 - d_2) / 2
        assert!((rep.ratios[0] - c(0.9 * 0.9 / 2.0, 0.0)).norm() < 1e-12);
    }
}
