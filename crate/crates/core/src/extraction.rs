//! Symbol retrieval from a solved relaxation block.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::sdr::CostMatrix;

/// Margin kept away from `±1` before the `atanh` mapping.
pub const LLR_DELTA: f64 = 1e-6;
pub const DEFAULT_LLR_CLIP: f64 = 8.0;
pub const DEFAULT_RANDOMIZATION_TRIALS: usize = 50;
const DEGENERACY_TOL: f64 = 1e-9;

/// Unquantized `t * x` estimates of one snapshot, in symbol order.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftSymbolVector(pub Vec<f64>);

impl SoftSymbolVector {
    pub fn hard(&self) -> Vec<f64> {
        hard_decision(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rank1Extraction {
    pub soft: SoftSymbolVector,
    /// The dominant eigenvalue was not separated, so the last column was used.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomizedExtraction {
    pub symbols: Vec<f64>,
    pub cost: f64,
}

/// The first `side - 1` entries of the last column.
pub fn extract_direct(x: &DMatrix<f64>) -> SoftSymbolVector {
    let last = x.ncols() - 1;
    SoftSymbolVector((0..last).map(|i| x[(i, last)]).collect())
}

/// The scaled dominant eigenvector `u = sqrt(e) v` times its own last entry,
/// `u[..last] * u[last]`, which fixes the sign of the homogenizing coordinate.
pub fn extract_rank1(x: &DMatrix<f64>) -> Rank1Extraction {
    let n = x.nrows();
    let eig = SymmetricEigen::new(x.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = eig.eigenvalues[order[0]];
    let second = order.get(1).map(|&i| eig.eigenvalues[i]);
    let separated = top > 0.0 && second.is_none_or(|s| top - s > DEGENERACY_TOL * top.abs().max(1.0));
    if !separated {
        return Rank1Extraction { soft: extract_direct(x), degenerate: true };
    }
    let v = eig.eigenvectors.column(order[0]);
    let scale = top * v[n - 1];
    Rank1Extraction { soft: SoftSymbolVector((0..n - 1).map(|i| scale * v[i]).collect()), degenerate: false }
}

/// Gaussian randomization: draw `v ~ N(0, X)`, quantize, fold the sign of the
/// last coordinate into the symbols and keep the cheapest candidate.
pub fn extract_randomized<R: Rng + ?Sized>(
    x: &DMatrix<f64>,
    cost: &CostMatrix,
    trials: usize,
    rng: &mut R,
) -> RandomizedExtraction {
    let n = x.nrows();
    let eig = SymmetricEigen::new(x.clone());
    let mut factor = eig.eigenvectors;
    for (j, mut col) in factor.column_iter_mut().enumerate() {
        col *= eig.eigenvalues[j].max(0.0).sqrt();
    }
    let mut best = RandomizedExtraction { symbols: vec![1.0; n - 1], cost: f64::INFINITY };
    for _ in 0..trials.max(1) {
        let z = DVector::<f64>::from_fn(n, |_, _| rng.sample(StandardNormal));
        let v = &factor * z;
        let t = if v[n - 1] < 0.0 { -1.0 } else { 1.0 };
        let symbols: Vec<f64> = (0..n - 1).map(|i| t * if v[i] < 0.0 { -1.0 } else { 1.0 }).collect();
        let c = cost.quadratic_form(&symbols, 1.0);
        if c < best.cost {
            best = RandomizedExtraction { symbols, cost: c };
        }
    }
    best
}

/// Sign with zero mapped to `+1`.
pub fn hard_decision(values: &[f64]) -> Vec<f64> {
    values.iter().map(|&v| if v < 0.0 { -1.0 } else { 1.0 }).collect()
}

/// `2 atanh(v)` on the clamped soft value, clipped to `±clip`.
pub fn soft_to_llr(soft: &[f64], clip: f64) -> Vec<f64> {
    let bound = 1.0 - LLR_DELTA;
    soft.iter().map(|&v| (2.0 * v.clamp(-bound, bound).atanh()).clamp(-clip, clip)).collect()
}
