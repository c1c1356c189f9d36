//! Gap coordinates on the weighted simplex.
//!
//! An ordered spectrum `p_1 >= ... >= p_n` is described by the n-1 gaps
//! `r_a = p_a - p_{a+1}`. The admissible gaps form the weighted simplex
//! `{r >= 0, sum_a a r_a <= 1}` whose vertices are the origin and `e_a / a`.
//! The Jacobian of `r -> p` has the fundamental coweights of `sl(n)` as its
//! columns, which is why the Cartan matrix of type `A_{n-1}` and its inverse
//! show up throughout the crate.

use nalgebra::DMatrix;
use num_rational::Ratio;
use rand::Rng;

use crate::error::{Error, Result};
use crate::montecarlo::{mean_scalar, McEstimate};

/// Tolerance for validating ordering, normalization and polytope membership.
pub const VALIDATION_TOL: f64 = 1e-12;
/// Tolerance for algebraic identities that hold exactly in rational arithmetic.
pub const EXACT_TOL: f64 = 1e-14;
/// Largest dimension for which exact volumes are computed.
pub const MAX_EXACT_DIM: usize = 20;

fn check_dim(n: usize) -> Result<()> {
    if n < 2 {
        Err(Error::Dimension(n))
    } else {
        Ok(())
    }
}

/// Descending probability vector summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector {
    p: Vec<f64>,
}

impl ProbVector {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        check_dim(p.len())?;
        if let Some(k) = p.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidProbs(format!("p_{} is not finite", k + 1)));
        }
        for k in 0..p.len() - 1 {
            if p[k] + VALIDATION_TOL < p[k + 1] {
                return Err(Error::InvalidProbs(format!(
                    "not descending: p_{} = {} < p_{} = {}",
                    k + 1,
                    p[k],
                    k + 2,
                    p[k + 1]
                )));
            }
        }
        let last = p[p.len() - 1];
        if last < -VALIDATION_TOL {
            return Err(Error::InvalidProbs(format!("negative entry p_{} = {last}", p.len())));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > VALIDATION_TOL {
            return Err(Error::InvalidProbs(format!("not normalized: sum = {sum}")));
        }
        Ok(Self { p })
    }

    /// Sorts into descending order first. Use this only when reordering the
    /// input is intended; [`ProbVector::new`] rejects unordered input.
    pub fn from_unsorted(mut p: Vec<f64>) -> Result<Self> {
        p.sort_by(|a, b| b.total_cmp(a));
        Self::new(p)
    }

    pub fn uniform(n: usize) -> Result<Self> {
        check_dim(n)?;
        Ok(Self { p: vec![1.0 / n as f64; n] })
    }

    pub fn n(&self) -> usize {
        self.p.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.p
    }

    /// Uniform draw from the ordered simplex (sorted flat Dirichlet).
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut e: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
        let s: f64 = e.iter().sum();
        e.iter_mut().for_each(|x| *x /= s);
        e.sort_by(|a, b| b.total_cmp(a));
        // renormalize after sorting to keep the sum at 1 to rounding
        let s: f64 = e.iter().sum();
        e.iter_mut().for_each(|x| *x /= s);
        Self { p: e }
    }
}

/// Spectral gaps `r_a = p_a - p_{a+1}`, a point of the weighted simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct GapVector {
    r: Vec<f64>,
}

impl GapVector {
    pub fn new(r: Vec<f64>) -> Result<Self> {
        let n = r.len() + 1;
        check_dim(n)?;
        if let Some(a) = r.iter().position(|x| !x.is_finite()) {
            return Err(Error::OutsidePolytope(format!("r_{} is not finite", a + 1)));
        }
        if let Some(a) = r.iter().position(|&x| x < -VALIDATION_TOL) {
            return Err(Error::OutsidePolytope(format!("r_{} = {} < 0", a + 1, r[a])));
        }
        let weighted = weighted_sum(&r);
        if weighted > 1.0 + VALIDATION_TOL {
            return Err(Error::OutsidePolytope(format!("sum a*r_a = {weighted} > 1")));
        }
        Ok(Self { r })
    }

    pub fn zero(n: usize) -> Result<Self> {
        check_dim(n)?;
        Ok(Self { r: vec![0.0; n - 1] })
    }

    pub fn n(&self) -> usize {
        self.r.len() + 1
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.r
    }

    /// `p_i - p_j = sum_{a=i}^{j-1} r_a` for zero-based `i < j`.
    pub fn cumulative_gap(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < j && j < self.n());
        self.r[i..j].iter().sum()
    }

    pub fn min_gap(&self) -> f64 {
        self.r.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Uniform draw from the weighted simplex.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        gaps_from_probs(&ProbVector::random(n, rng))
    }
}

fn weighted_sum(r: &[f64]) -> f64 {
    r.iter().enumerate().map(|(a, x)| (a + 1) as f64 * x).sum()
}

pub fn gaps_from_probs(p: &ProbVector) -> GapVector {
    let r = p.p.windows(2).map(|w| w[0] - w[1]).collect();
    GapVector { r }
}

/// `p_k = 1/n + sum_a M_{ka} r_a`.
pub fn probs_from_gaps(r: &GapVector) -> ProbVector {
    ProbVector { p: probs_from_gap_slice(&r.r) }
}

/// Unvalidated evaluation of the inverse gap map.
pub fn probs_from_gap_slice(r: &[f64]) -> Vec<f64> {
    let n = r.len() + 1;
    let nf = n as f64;
    (0..n)
        .map(|k| {
            let mut pk = 1.0 / nf;
            for (a, &ra) in r.iter().enumerate() {
                pk += jacobian_entry(n, k, a) * ra;
            }
            pk
        })
        .collect()
}

/// `M_{ka} = 1 - a/n` for `k <= a`, `-a/n` otherwise (one-based in the
/// formula, zero-based arguments here).
#[inline]
pub fn jacobian_entry(n: usize, k: usize, a: usize) -> f64 {
    let a1 = (a + 1) as f64;
    let nf = n as f64;
    if k <= a {
        (nf - a1) / nf
    } else {
        -a1 / nf
    }
}

/// The n x (n-1) Jacobian `dp_k / dr_a`.
pub fn jacobian_matrix(n: usize) -> Result<DMatrix<f64>> {
    check_dim(n)?;
    Ok(DMatrix::from_fn(n, n - 1, |k, a| jacobian_entry(n, k, a)))
}

/// Fundamental coweights of `sl(n)`, stored by their diagonals.
#[derive(Debug, Clone, PartialEq)]
pub struct CoweightBasis {
    n: usize,
    diagonals: Vec<Vec<f64>>,
}

impl CoweightBasis {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.diagonals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diagonals.is_empty()
    }

    /// Diagonal of the zero-based `a`-th coweight.
    pub fn diagonal(&self, a: usize) -> &[f64] {
        &self.diagonals[a]
    }

    pub fn matrix(&self, a: usize) -> DMatrix<f64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.diagonals[a]))
    }

    /// Exact diagonal entries `(n-a, ..., -a, ...) / n` as rationals.
    pub fn rational_diagonal(&self, a: usize) -> Vec<Ratio<i64>> {
        let n = self.n as i64;
        let a1 = (a + 1) as i64;
        (0..self.n as i64)
            .map(|k| if k < a1 { Ratio::new(n - a1, n) } else { Ratio::new(-a1, n) })
            .collect()
    }
}

pub fn fundamental_coweights(n: usize) -> Result<CoweightBasis> {
    check_dim(n)?;
    let diagonals = (0..n - 1)
        .map(|a| (0..n).map(|k| jacobian_entry(n, k, a)).collect())
        .collect();
    Ok(CoweightBasis { n, diagonals })
}

/// Cartan matrix of type `A_{n-1}`.
pub fn cartan_matrix(n: usize) -> Result<DMatrix<i64>> {
    check_dim(n)?;
    let m = n - 1;
    Ok(DMatrix::from_fn(m, m, |j, a| {
        if j == a {
            2
        } else if j.abs_diff(a) == 1 {
            -1
        } else {
            0
        }
    }))
}

/// `(C^{-1})_{aj} = min(a,j) (n - max(a,j)) / n`, exact.
pub fn inverse_cartan(n: usize) -> Result<DMatrix<Ratio<i64>>> {
    check_dim(n)?;
    let m = n - 1;
    let ni = n as i64;
    Ok(DMatrix::from_fn(m, m, |a, j| {
        let (a1, j1) = (a as i64 + 1, j as i64 + 1);
        Ratio::new(a1.min(j1) * (ni - a1.max(j1)), ni)
    }))
}

pub fn inverse_cartan_f64(n: usize) -> Result<DMatrix<f64>> {
    Ok(inverse_cartan(n)?.map(|q| *q.numer() as f64 / *q.denom() as f64))
}

/// `D(r) = sum_a r_a w_a = diag(p_k - 1/n)`.
pub fn spectral_diagonal(r: &GapVector) -> DMatrix<f64> {
    let n = r.n();
    let p = probs_from_gap_slice(&r.r);
    DMatrix::from_fn(n, n, |i, j| if i == j { p[i] - 1.0 / n as f64 } else { 0.0 })
}

/// Membership in the weighted simplex, boundary inclusive.
pub fn in_polytope(r: &[f64], n: usize) -> bool {
    r.len() + 1 == n
        && n >= 2
        && r.iter().all(|&x| x.is_finite() && x >= -VALIDATION_TOL)
        && weighted_sum(r) <= 1.0 + VALIDATION_TOL
}

/// The origin followed by `e_a / a` for a = 1..n-1.
pub fn polytope_vertices(n: usize) -> Result<Vec<GapVector>> {
    check_dim(n)?;
    let mut out = vec![GapVector::zero(n)?];
    for a in 0..n - 1 {
        let mut r = vec![0.0; n - 1];
        r[a] = 1.0 / (a + 1) as f64;
        out.push(GapVector { r });
    }
    Ok(out)
}

fn factorial(k: usize) -> i128 {
    (1..=k as i128).product()
}

fn check_exact_dim(n: usize) -> Result<()> {
    check_dim(n)?;
    if n > MAX_EXACT_DIM {
        return Err(Error::DimensionTooLarge(n, MAX_EXACT_DIM));
    }
    Ok(())
}

/// Volume of the ordered probability simplex, `1 / (n! (n-1)!)`.
pub fn ordered_simplex_volume(n: usize) -> Result<Ratio<i128>> {
    check_exact_dim(n)?;
    Ok(Ratio::new(1, factorial(n) * factorial(n - 1)))
}

/// Volume of the weighted simplex, `1 / ((n-1)!)^2`.
pub fn weighted_simplex_volume(n: usize) -> Result<Ratio<i128>> {
    check_exact_dim(n)?;
    let f = factorial(n - 1);
    Ok(Ratio::new(1, f * f))
}

pub fn ratio_to_f64(q: &Ratio<i128>) -> f64 {
    *q.numer() as f64 / *q.denom() as f64
}

/// Rejection estimate of the weighted-simplex volume from the bounding box
/// `[0,1] x [0,1/2] x ... x [0,1/(n-1)]`.
pub fn estimate_weighted_simplex_volume(n: usize, samples: usize, seed: u64) -> Result<McEstimate> {
    check_dim(n)?;
    let box_volume: f64 = (1..n).map(|a| 1.0 / a as f64).product();
    let hit = mean_scalar(samples, seed, |rng| {
        let r: Vec<f64> = (1..n).map(|a| rng.random::<f64>() / a as f64).collect();
        if weighted_sum(&r) <= 1.0 {
            1.0
        } else {
            0.0
        }
    });
    Ok(hit.scaled(box_volume))
}

/// Rejection estimate of the ordered-simplex volume in the coordinates
/// `(p_1, ..., p_{n-1})`, sampling the box `p_k in [0, 1/k]`.
pub fn estimate_ordered_simplex_volume(n: usize, samples: usize, seed: u64) -> Result<McEstimate> {
    check_dim(n)?;
    let box_volume: f64 = (1..n).map(|k| 1.0 / k as f64).product();
    let hit = mean_scalar(samples, seed, |rng| {
        let p: Vec<f64> = (1..n).map(|k| rng.random::<f64>() / k as f64).collect();
        let last = 1.0 - p.iter().sum::<f64>();
        let ordered = p.windows(2).all(|w| w[0] >= w[1]) && p[n - 2] >= last && last >= 0.0;
        if ordered {
            1.0
        } else {
            0.0
        }
    });
    Ok(hit.scaled(box_volume))
}

/// Crossover index `k* = max{k : p_k >= 1/n}`, one-based, in `1..=n-1`.
///
/// Fails when some `p_k` sits within 1e-12 of `1/n`, where the piece of the
/// purity functional is ambiguous.
pub fn crossover_index(r: &GapVector) -> Result<usize> {
    let n = r.n();
    let u = 1.0 / n as f64;
    let p = probs_from_gap_slice(&r.r);
    if let Some(k) = p.iter().position(|&x| (x - u).abs() < VALIDATION_TOL) {
        return Err(Error::DegenerateCrossover { index: k + 1 });
    }
    let k = p.iter().rposition(|&x| x >= u).expect("p_1 > 1/n off the tie set");
    Ok(k + 1)
}
