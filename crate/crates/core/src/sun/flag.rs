//! Invariant measure on the complete flag manifold `SU(n)/T^{n-1}`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use super::{fix_phases, pairs, AngleSet, UnitaryFrame};
use crate::error::{Error, Result};
use crate::linalg::{c, frobenius, trace, CMatrix, C64};
use crate::montecarlo::{mean_matrix, mean_scalar, shard_rng, McEstimate};
use crate::spectral::{probs_from_gap_slice, ratio_to_f64, weighted_simplex_volume, GapVector};

fn ln_factorial(k: usize) -> f64 {
    (2..=k).map(|x| (x as f64).ln()).sum()
}

/// Normalized density of the invariant flag measure with respect to
/// `prod dtheta_ij dphi_ij` on the box `[0, pi] x [0, 2pi)` per pair.
pub fn flag_density(angles: &AngleSet) -> f64 {
    let n = angles.n();
    let mut ln_pref = 0.0;
    for m in 1..n {
        ln_pref += ln_factorial(m) - m as f64 * (4.0 * PI).ln();
    }
    let mut prod = 1.0;
    for (i, j) in pairs(n) {
        let t = angles.theta(i, j);
        prod *= t.sin() * (t / 2.0).cos().powi(2 * (j - i - 1) as i32);
    }
    ln_pref.exp() * prod
}

/// Monte-Carlo integral of [`flag_density`] over the angle box.
pub fn integrate_flag_density(n: usize, samples: usize, seed: u64) -> Result<McEstimate> {
    if n < 2 {
        return Err(Error::Dimension(n));
    }
    let m = super::pair_count(n) as i32;
    let box_volume = PI.powi(m) * (2.0 * PI).powi(m);
    let est = mean_scalar(samples, seed, |rng| flag_density(&AngleSet::random(n, rng)));
    Ok(est.scaled(box_volume))
}

/// Invariant frame: Gram–Schmidt of a complex Gaussian matrix followed by
/// the deterministic phase convention of [`fix_phases`].
pub fn sample_flag_with<R: Rng + ?Sized>(n: usize, rng: &mut R) -> UnitaryFrame {
    let mut g = CMatrix::from_fn(n, n, |_, _| {
        c(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    });
    for j in 0..n {
        for k in 0..j {
            let proj: C64 = (0..n).map(|i| g[(i, k)].conj() * g[(i, j)]).sum();
            for i in 0..n {
                let gk = g[(i, k)];
                g[(i, j)] -= proj * gk;
            }
        }
        let norm = (0..n).map(|i| g[(i, j)].norm_sqr()).sum::<f64>().sqrt();
        for i in 0..n {
            g[(i, j)] /= norm;
        }
    }
    fix_phases(&mut g);
    UnitaryFrame::new_unchecked(g)
}

pub fn sample_flag(n: usize, seed: u64) -> UnitaryFrame {
    sample_flag_with(n, &mut shard_rng(seed, 0))
}

/// Monte-Carlo average of `n |u_i><u_i|` against the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolutionReport {
    pub average: CMatrix,
    /// Per-entry standard errors, real and imaginary parts separately.
    pub std_err: CMatrix,
    pub frobenius_error: f64,
    pub samples: usize,
    pub seed: u64,
}

/// Checks that the flag average of `n |u_i><u_i|` (zero-based column `i`)
/// reproduces the identity.
pub fn resolution_check(n: usize, i: usize, samples: usize, seed: u64) -> Result<ResolutionReport> {
    if n < 2 {
        return Err(Error::Dimension(n));
    }
    if i >= n {
        return Err(Error::Index(format!("column {i} not in 0..{n}")));
    }
    let nf = c(n as f64, 0.0);
    let (average, std_err) = mean_matrix(n, samples, seed, |rng| sample_flag_with(n, rng).projector(i) * nf);
    let frobenius_error = frobenius(&(&average - CMatrix::identity(n, n)));
    Ok(ResolutionReport { average, std_err, frobenius_error, samples, seed })
}

/// Monte-Carlo estimate of `Op_f = int f(F) n rho_{r,F} dmu(F)`.
pub fn quantize<F>(f: F, r: &GapVector, samples: usize, seed: u64) -> CMatrix
where
    F: Fn(&UnitaryFrame) -> f64 + Sync,
{
    let n = r.n();
    let p = probs_from_gap_slice(r.as_slice());
    let nf = n as f64;
    mean_matrix(n, samples, seed, |rng| {
        let frame = sample_flag_with(n, rng);
        let w = f(&frame);
        if w == 0.0 {
            return CMatrix::zeros(n, n);
        }
        let u = frame.matrix();
        let mut rho = CMatrix::zeros(n, n);
        for (k, &pk) in p.iter().enumerate() {
            let v = u.column(k);
            rho += v * v.adjoint() * c(pk, 0.0);
        }
        rho * c(w * nf, 0.0)
    })
    .0
}

/// `(4 pi)^{n(n-1)/2} / prod_{m<n} m!`.
pub fn flag_volume(n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::Dimension(n));
    }
    let mut ln = (n * (n - 1) / 2) as f64 * (4.0 * PI).ln();
    for m in 1..n {
        ln -= ln_factorial(m);
    }
    let v = ln.exp();
    if !v.is_finite() || v == 0.0 {
        return Err(Error::Overflow(format!("flag volume for n = {n} is not representable")));
    }
    Ok(v)
}

/// Volume of the nondegenerate state space under `d^{n-1}r dmu_F`.
pub fn state_space_volume(n: usize) -> Result<f64> {
    let v = ratio_to_f64(&weighted_simplex_volume(n)?) * flag_volume(n)?;
    if !v.is_finite() {
        return Err(Error::Overflow(format!("state-space volume for n = {n}")));
    }
    Ok(v)
}

/// Trace of a Monte-Carlo resolution average divided by `n`; exactly one up
/// to rounding for any sample count.
pub fn normalized_trace(avg: &CMatrix) -> f64 {
    trace(avg).re / avg.nrows() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::hermiticity_error;

    #[test]
    fn qubit_density_is_normalized_sine() {
        let a = AngleSet::new(2, vec![0.8], vec![1.0]).unwrap();
        assert!((flag_density(&a) - 0.8f64.sin() / (4.0 * PI)).abs() < 1e-16);
        // midpoint rule in theta, phi integral is 2 pi
        let m = 20_000;
        let h = PI / m as f64;
        let s: f64 = (0..m)
            .map(|k| {
                let t = (k as f64 + 0.5) * h;
                flag_density(&AngleSet::new(2, vec![t], vec![0.0]).unwrap()) * h
            })
            .sum();
        assert!((s * 2.0 * PI - 1.0).abs() < 1e-8);
    }

    #[test]
    fn sample_determinism_and_unitarity() {
        for n in 2..7 {
            let a = sample_flag(n, 42);
            let b = sample_flag(n, 42);
            let c2 = sample_flag(n, 43);
            assert_eq!(a, b);
            assert_ne!(a, c2);
            assert!(a.unitarity_error() < 1e-12, "{}", a.unitarity_error());
            assert!(a.determinant_error() < 1e-12);
        }
    }

    #[test]
    fn resolution_trace_is_exact() {
        for samples in [1, 7, 100] {
            let rep = resolution_check(3, 1, samples, 5).unwrap();
            assert!((normalized_trace(&rep.average) - 1.0).abs() < 1e-12);
        }
        let rep = resolution_check(2, 0, 1, 9).unwrap();
        assert!((rep.average.trace().re - 2.0).abs() < 1e-12);
        assert!(resolution_check(3, 3, 10, 0).is_err());
    }

    #[test]
    fn quantize_trivial_functions() {
        let r = GapVector::new(vec![0.2, 0.1]).unwrap();
        let zero = quantize(|_| 0.0, &r, 500, 3);
        assert_eq!(zero, CMatrix::zeros(3, 3));
        let op = quantize(|f| f.matrix()[(0, 0)].re, &r, 2_000, 3);
        assert!(hermiticity_error(&op) < 1e-12);
    }

    #[test]
    fn volumes() {
        assert!((flag_volume(2).unwrap() - 4.0 * PI).abs() < 1e-12);
        let v3 = state_space_volume(3).unwrap();
        assert!((v3 - 8.0 * PI.powi(3)).abs() < 1e-10 * v3);
        for n in 2..10 {
            let prod = ratio_to_f64(&weighted_simplex_volume(n).unwrap()) * flag_volume(n).unwrap();
            assert_eq!(state_space_volume(n).unwrap(), prod);
        }
        assert!(matches!(state_space_volume(40), Err(Error::DimensionTooLarge(..))));
        assert!(matches!(flag_volume(400), Err(Error::Overflow(_))));
    }
}
