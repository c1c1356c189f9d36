//! Fisher–Rao and Bures metrics in gap coordinates, relative entropy to the
//! maximally mixed state, and the trace-distance purity functional.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::spectral::{
    crossover_index, inverse_cartan_f64, jacobian_entry, probs_from_gap_slice, GapVector, ProbVector,
};
use crate::state::DensityMatrix;

/// Smallest eigenvalue for which the Fisher–Rao metric is evaluated.
pub const SINGULAR_TOL: f64 = 1e-12;

/// Symmetric metric components `g_ab` in gap coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricTensor {
    n: usize,
    g: DMatrix<f64>,
}

impl MetricTensor {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn components(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn into_components(self) -> DMatrix<f64> {
        self.g
    }

    pub fn is_positive_definite(&self) -> bool {
        self.g.clone().cholesky().is_some()
    }

    /// `g(v, v)`.
    pub fn quadratic_form(&self, v: &[f64]) -> f64 {
        let m = self.g.nrows();
        let mut s = 0.0;
        for a in 0..m {
            for b in 0..m {
                s += self.g[(a, b)] * v[a] * v[b];
            }
        }
        s
    }
}

/// Fisher–Rao metric pulled back to gap coordinates,
/// `g_ab = sum_k M_ka M_kb / p_k(r)`.
pub fn fisher_metric_r(r: &GapVector) -> Result<MetricTensor> {
    let n = r.n();
    let p = probs_from_gap_slice(r.as_slice());
    if let Some(k) = p.iter().position(|&x| x < SINGULAR_TOL) {
        return Err(Error::SingularMetric { index: k + 1, value: p[k] });
    }
    let m = n - 1;
    let mut g = DMatrix::zeros(m, m);
    for a in 0..m {
        for b in a..m {
            let v: f64 = (0..n)
                .map(|k| jacobian_entry(n, k, a) * jacobian_entry(n, k, b) / p[k])
                .sum();
            g[(a, b)] = v;
            g[(b, a)] = v;
        }
    }
    Ok(MetricTensor { n, g })
}

/// `D(p || u_n) = sum_k p_k ln(n p_k)`.
pub fn kl_exact(p: &ProbVector) -> Result<f64> {
    let n = p.n() as f64;
    let s = p.as_slice();
    if let Some(k) = s.iter().position(|&x| x <= 0.0) {
        return Err(Error::ZeroProbability(k + 1));
    }
    Ok(s.iter().map(|&x| x * (n * x).ln()).sum())
}

/// Leading quadratic term `(n/2) sum_ab (C^{-1})_ab r_a r_b` of the relative
/// entropy to the maximally mixed state.
pub fn kl_quadratic(r: &GapVector) -> f64 {
    let n = r.n();
    let ci = inverse_cartan_f64(n).expect("n >= 2 by construction");
    let v = r.as_slice();
    let mut s = 0.0;
    for a in 0..n - 1 {
        for b in 0..n - 1 {
            s += ci[(a, b)] * v[a] * v[b];
        }
    }
    0.5 * n as f64 * s
}

/// Spectral part and per-mode angular coefficients of the Bures metric.
///
/// Angular weights are keyed by zero-based pairs `(i, j)`, `i < j`, and are
/// the coefficients of `|theta_ij|^2` with `theta = U† dU`.
#[derive(Debug, Clone, PartialEq)]
pub struct BuresDecomposition {
    pub spectral_part: MetricTensor,
    pub angular_weights: BTreeMap<(usize, usize), f64>,
}

impl BuresDecomposition {
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.angular_weights[&(i, j)]
    }
}

pub fn bures_decomposition(r: &GapVector) -> Result<BuresDecomposition> {
    if let Some(a) = r.as_slice().iter().position(|&x| x <= 0.0) {
        return Err(Error::DegenerateSpectrum { min_gap: r.as_slice()[a] });
    }
    let fisher = fisher_metric_r(r)?;
    let n = r.n();
    let p = probs_from_gap_slice(r.as_slice());
    let mut angular_weights = BTreeMap::new();
    for i in 0..n {
        for j in i + 1..n {
            let gap = r.cumulative_gap(i, j);
            angular_weights.insert((i, j), 0.5 * gap * gap / (p[i] + p[j]));
        }
    }
    Ok(BuresDecomposition {
        spectral_part: MetricTensor { n, g: fisher.g * 0.25 },
        angular_weights,
    })
}

/// `n / (2(n-1)) * sum_i |p_i - 1/n|` for a descending spectrum.
pub fn purity_from_spectrum(p: &[f64]) -> f64 {
    let n = p.len() as f64;
    let u = 1.0 / n;
    n / (2.0 * (n - 1.0)) * p.iter().map(|x| (x - u).abs()).sum::<f64>()
}

/// Normalized trace distance of `rho` to the maximally mixed state.
pub fn purity_trace_norm(rho: &DensityMatrix) -> f64 {
    purity_from_spectrum(&rho.spectrum())
}

/// The same functional on the linear piece selected by the crossover index:
/// `(n/(n-1)) sum_a (C^{-1})_{a,k*} r_a`.
pub fn purity_gap(r: &GapVector) -> Result<f64> {
    let n = r.n();
    let k = crossover_index(r)?;
    let nf = n as f64;
    let s: f64 = r
        .as_slice()
        .iter()
        .enumerate()
        .map(|(a, &ra)| {
            let a1 = a + 1;
            (a1.min(k) * (n - a1.max(k))) as f64 / nf * ra
        })
        .sum();
    Ok(nf / (nf - 1.0) * s)
}

/// `-sum p_k ln p_k`, with `0 ln 0 = 0`.
pub fn shannon_entropy(p: &ProbVector) -> f64 {
    -p.as_slice()
        .iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| x * x.ln())
        .sum::<f64>()
}
