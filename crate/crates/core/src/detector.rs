//! Hamming-ball candidate lists and max-log extrinsic LLRs.
//!
//! Symbols and bits share the polarized convention `s = 1 - 2b`, so a
//! positive LLR favours `s = +1`. The noise variance is per real dimension.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Largest symbol dimension accepted by exhaustive enumeration.
pub const MAX_EXHAUSTIVE_DIM: usize = 24;

#[derive(Debug, Error, PartialEq)]
pub enum DetectorError {
    #[error("list radius {radius} outside 1..={dim}")]
    Radius { radius: usize, dim: usize },
    #[error("dimension {0} too large for exhaustive enumeration")]
    TooLarge(usize),
    #[error("noise variance must be positive, got {0}")]
    NoiseVariance(f64),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// One member of the enumeration: the flips relative to the center, the
/// earlier member it extends by one flip, and that flip.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Step {
    mask: u32,
    parent: usize,
    flip: usize,
}

/// Ordered Hamming ball around a polarized center.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateList {
    center: Vec<f64>,
    radius: usize,
    steps: Vec<Step>,
}

impl CandidateList {
    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Flip masks in enumeration order (bit `j` set means position `j` flipped).
    pub fn masks(&self) -> impl Iterator<Item = u32> + '_ {
        self.steps.iter().map(|s| s.mask)
    }

    pub fn member(&self, index: usize) -> Vec<f64> {
        let mask = self.steps[index].mask;
        self.center.iter().enumerate().map(|(j, &c)| if mask >> j & 1 == 1 { -c } else { c }).collect()
    }

    pub fn members(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.member(i)).collect()
    }
}

/// Every vector within Hamming distance `radius` of `center`, ordered by flip
/// count and then lexicographically by flipped positions.
pub fn gen_list(center: &[f64], radius: usize) -> Result<CandidateList, DetectorError> {
    let dim = center.len();
    if dim > MAX_EXHAUSTIVE_DIM {
        return Err(DetectorError::TooLarge(dim));
    }
    if radius == 0 || radius > dim {
        return Err(DetectorError::Radius { radius, dim });
    }
    let mut steps = vec![Step { mask: 0, parent: usize::MAX, flip: usize::MAX }];
    let mut index = std::collections::HashMap::from([(0u32, 0usize)]);
    let mut combo: Vec<usize> = Vec::with_capacity(radius);
    for count in 1..=radius {
        combo.clear();
        combo.extend(0..count);
        loop {
            let mask = combo.iter().fold(0u32, |m, &p| m | 1 << p);
            let flip = combo[count - 1];
            let parent = index[&(mask & !(1 << flip))];
            index.insert(mask, steps.len());
            steps.push(Step { mask, parent, flip });
            // next combination in lexicographic order
            let mut i = count;
            while i > 0 && combo[i - 1] == dim - count + i - 1 {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            combo[i - 1] += 1;
            for j in i..count {
                combo[j] = combo[j - 1] + 1;
            }
        }
    }
    Ok(CandidateList { center: hard_center(center), radius, steps })
}

fn hard_center(center: &[f64]) -> Vec<f64> {
    center.iter().map(|&c| if c < 0.0 { -1.0 } else { 1.0 }).collect()
}

fn check_inputs(
    dim: usize,
    y: &DVector<f64>,
    h: &DMatrix<f64>,
    noise_var: f64,
    priors: &[f64],
) -> Result<(), DetectorError> {
    if !(noise_var > 0.0) {
        return Err(DetectorError::NoiseVariance(noise_var));
    }
    if h.ncols() != dim || h.nrows() != y.len() || priors.len() != dim {
        return Err(DetectorError::Dimension(format!(
            "H is {}x{}, y has {}, priors {}, symbols {dim}",
            h.nrows(),
            h.ncols(),
            y.len(),
            priors.len()
        )));
    }
    Ok(())
}

/// Running maxima of the per-bit metrics over the two sublists.
struct MaxLog {
    plus: Vec<f64>,
    minus: Vec<f64>,
}

impl MaxLog {
    fn new(dim: usize) -> Self {
        Self { plus: vec![f64::NEG_INFINITY; dim], minus: vec![f64::NEG_INFINITY; dim] }
    }

    /// Adds candidate `b` whose squared residual is `dist2`. The prior term of
    /// bit `i` is summed over `j != i` so that `priors[i]` never enters `L_i`.
    fn push(&mut self, b: &[f64], dist2: f64, noise_var: f64, priors: &[f64]) {
        let base = -dist2 / (2.0 * noise_var);
        for i in 0..b.len() {
            let mut prior = 0.0;
            for (j, (&bj, &lj)) in b.iter().zip(priors).enumerate() {
                if j != i {
                    prior += lj * bj;
                }
            }
            let m = base + 0.5 * prior;
            let slot = if b[i] > 0.0 { &mut self.plus[i] } else { &mut self.minus[i] };
            if m > *slot {
                *slot = m;
            }
        }
    }

    fn llrs(&self) -> Vec<f64> {
        self.plus.iter().zip(&self.minus).map(|(p, m)| p - m).collect()
    }
}

/// Unclipped max-log extrinsic LLRs over `list`.
pub fn extrinsic_llr_raw(
    list: &CandidateList,
    y: &DVector<f64>,
    h: &DMatrix<f64>,
    noise_var: f64,
    priors: &[f64],
) -> Result<Vec<f64>, DetectorError> {
    let dim = list.center.len();
    check_inputs(dim, y, h, noise_var, priors)?;
    let center = DVector::from_column_slice(&list.center);
    let mut residuals: Vec<DVector<f64>> = Vec::with_capacity(list.len());
    let mut acc = MaxLog::new(dim);
    let mut b = list.center.clone();
    for step in &list.steps {
        let r = if step.parent == usize::MAX {
            y - h * &center
        } else {
            // flipping position p moves b_p from c_p to -c_p
            let mut r = residuals[step.parent].clone();
            r.axpy(2.0 * list.center[step.flip], &h.column(step.flip), 1.0);
            r
        };
        for (j, bj) in b.iter_mut().enumerate() {
            *bj = if step.mask >> j & 1 == 1 { -list.center[j] } else { list.center[j] };
        }
        acc.push(&b, r.norm_squared(), noise_var, priors);
        residuals.push(r);
    }
    Ok(acc.llrs())
}

pub fn extrinsic_llr(
    list: &CandidateList,
    y: &DVector<f64>,
    h: &DMatrix<f64>,
    noise_var: f64,
    priors: &[f64],
    clip: f64,
) -> Result<Vec<f64>, DetectorError> {
    Ok(extrinsic_llr_raw(list, y, h, noise_var, priors)?.into_iter().map(|l| l.clamp(-clip, clip)).collect())
}

/// Polarized vector number `index` of the cube in lexicographic order with
/// `+1` before `-1` (position 0 most significant).
fn cube_point(index: u32, dim: usize) -> Vec<f64> {
    (0..dim).map(|j| if index >> (dim - 1 - j) & 1 == 1 { -1.0 } else { 1.0 }).collect()
}

/// Unclipped extrinsics over the whole cube, each residual computed directly.
pub fn full_list_raw(
    y: &DVector<f64>,
    h: &DMatrix<f64>,
    noise_var: f64,
    priors: &[f64],
) -> Result<Vec<f64>, DetectorError> {
    let dim = h.ncols();
    if dim > MAX_EXHAUSTIVE_DIM {
        return Err(DetectorError::TooLarge(dim));
    }
    check_inputs(dim, y, h, noise_var, priors)?;
    let mut acc = MaxLog::new(dim);
    for index in 0..1u32 << dim {
        let b = cube_point(index, dim);
        let r = y - h * DVector::from_column_slice(&b);
        acc.push(&b, r.norm_squared(), noise_var, priors);
    }
    Ok(acc.llrs())
}

pub fn full_list_detector(
    y: &DVector<f64>,
    h: &DMatrix<f64>,
    noise_var: f64,
    priors: &[f64],
    clip: f64,
) -> Result<Vec<f64>, DetectorError> {
    Ok(full_list_raw(y, h, noise_var, priors)?.into_iter().map(|l| l.clamp(-clip, clip)).collect())
}

/// Exact minimizer of `||y - H b||^2` over the cube; the first minimizer in
/// lexicographic order wins ties.
pub fn ml_brute_force(y: &DVector<f64>, h: &DMatrix<f64>) -> Result<Vec<f64>, DetectorError> {
    let dim = h.ncols();
    if dim > MAX_EXHAUSTIVE_DIM {
        return Err(DetectorError::TooLarge(dim));
    }
    if h.nrows() != y.len() {
        return Err(DetectorError::Dimension(format!("H has {} rows, y {}", h.nrows(), y.len())));
    }
    let mut best = (f64::INFINITY, 0);
    for index in 0..1u32 << dim {
        let b = DVector::from_vec(cube_point(index, dim));
        let d = (y - h * b).norm_squared();
        if d < best.0 {
            best = (d, index);
        }
    }
    Ok(cube_point(best.1, dim))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn binom(n: usize, k: usize) -> usize {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    #[test]
    fn list_sizes() {
        let center = vec![1.0; 8];
        assert_eq!(gen_list(&center, 2).unwrap().len(), 37);
        assert_eq!(gen_list(&center, 8).unwrap().len(), 256);
        let small = gen_list(&[1.0, -1.0], 1).unwrap();
        assert_eq!(small.members(), vec![vec![1.0, -1.0], vec![-1.0, -1.0], vec![1.0, 1.0]]);
        assert_eq!(gen_list(&center, 0), Err(DetectorError::Radius { radius: 0, dim: 8 }));
        assert!(gen_list(&center, 9).is_err());
    }

    #[test]
    fn list_order() {
        let list = gen_list(&[1.0; 4], 2).unwrap();
        let masks: Vec<u32> = list.masks().collect();
        assert_eq!(masks, vec![0, 1, 2, 4, 8, 3, 5, 9, 6, 10, 12]);
    }

    #[test]
    fn worked_example() {
        let h = DMatrix::identity(2, 2);
        let y = DVector::from_vec(vec![1.0, 1.0]);
        let full = full_list_detector(&y, &h, 0.5, &[0.0, 0.0], 8.0).unwrap();
        assert_eq!(full, vec![4.0, 4.0]);
        let list = gen_list(&[1.0, 1.0], 2).unwrap();
        assert_eq!(extrinsic_llr(&list, &y, &h, 0.5, &[0.0, 0.0], 8.0).unwrap(), vec![4.0, 4.0]);
    }

    #[test]
    fn clipping_and_symmetry() {
        let h = DMatrix::identity(2, 2);
        let y = DVector::from_vec(vec![9.0, 0.0]);
        // raw L_1 = (100 - 64) / 3 = 12
        let raw = full_list_raw(&y, &h, 1.5, &[0.0, 0.0]).unwrap();
        assert!((raw[0] - 12.0).abs() < 1e-12);
        assert_eq!(full_list_detector(&y, &h, 1.5, &[0.0, 0.0], 8.0).unwrap()[0], 8.0);
        let zero = DVector::zeros(2);
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, -0.2, 0.8]);
        assert!(full_list_raw(&zero, &h, 1.0, &[0.0, 0.0]).unwrap().iter().all(|&l| l == 0.0));
        assert!(full_list_raw(&zero, &h, 0.0, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn brute_force_identity_and_noiseless() {
        let h = DMatrix::identity(3, 3);
        let y = DVector::from_vec(vec![0.4, -2.0, 0.0]);
        assert_eq!(ml_brute_force(&y, &h).unwrap(), vec![1.0, -1.0, 1.0]);
        let h = DMatrix::from_row_slice(3, 3, &[1.0, 0.2, -0.4, 0.1, 0.9, 0.3, -0.5, 0.2, 1.1]);
        let b = DVector::from_vec(vec![-1.0, 1.0, -1.0]);
        assert_eq!(ml_brute_force(&(&h * &b), &h).unwrap(), b.as_slice().to_vec());
        assert!(ml_brute_force(&DVector::zeros(25), &DMatrix::zeros(25, 25)).is_err());
    }

    fn instance(dim: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>, Vec<bool>, f64)> {
        (
            proptest::collection::vec(-1.5f64..1.5, dim * dim),
            proptest::collection::vec(-3.0f64..3.0, dim),
            proptest::collection::vec(-6.0f64..6.0, dim),
            proptest::collection::vec(any::<bool>(), dim),
            0.2f64..3.0,
        )
    }

    proptest! {
        #[test]
        fn nesting(center in proptest::collection::vec(any::<bool>(), 1..9), r in 1usize..8) {
            let c: Vec<f64> = center.iter().map(|&b| if b { -1.0 } else { 1.0 }).collect();
            let dim = c.len();
            let r = r.min(dim);
            let small: Vec<u32> = gen_list(&c, r).unwrap().masks().collect();
            let size: usize = (0..=r).map(|j| binom(dim, j)).sum();
            prop_assert_eq!(small.len(), size);
            if r < dim {
                let big: std::collections::HashSet<u32> = gen_list(&c, r + 1).unwrap().masks().collect();
                prop_assert!(small.iter().all(|m| big.contains(m)));
            }
            for i in 0..dim {
                let members = gen_list(&c, r).unwrap().members();
                prop_assert!(members.iter().any(|b| b[i] > 0.0));
                prop_assert!(members.iter().any(|b| b[i] < 0.0));
            }
        }

        #[test]
        fn list_matches_full_cube((hv, yv, lv, cv, nv) in instance(6)) {
            let h = DMatrix::from_vec(6, 6, hv);
            let y = DVector::from_vec(yv);
            let center: Vec<f64> = cv.iter().map(|&b| if b { -1.0 } else { 1.0 }).collect();
            let list = gen_list(&center, 6).unwrap();
            let a = extrinsic_llr_raw(&list, &y, &h, nv, &lv).unwrap();
            let b = full_list_raw(&y, &h, nv, &lv).unwrap();
            for (x, z) in a.iter().zip(&b) {
                prop_assert!((x - z).abs() <= 1e-12 * (1.0 + z.abs()), "{} vs {}", x, z);
            }
        }

        #[test]
        fn own_prior_is_excluded((hv, yv, lv, cv, nv) in instance(4), i in 0usize..4, delta in -5.0f64..5.0) {
            let h = DMatrix::from_vec(4, 4, hv);
            let y = DVector::from_vec(yv);
            let center: Vec<f64> = cv.iter().map(|&b| if b { -1.0 } else { 1.0 }).collect();
            let list = gen_list(&center, 2).unwrap();
            let mut moved = lv.clone();
            moved[i] += delta;
            let a = extrinsic_llr(&list, &y, &h, nv, &lv, 8.0).unwrap();
            let b = extrinsic_llr(&list, &y, &h, nv, &moved, 8.0).unwrap();
            prop_assert_eq!(a[i], b[i]);
        }
    }
}
