use super::{CodeDefinition, LdpcError};

pub const DEFAULT_FS_DEGREE_CAP: usize = 10;

/// `sum_{n in plus} f_n - sum_{n in minus} f_n <= |plus| - 1` for one check
/// and one odd-cardinality subset `plus` of its neighborhood.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FsConstraint {
    pub check: usize,
    pub plus: Vec<usize>,
    pub minus: Vec<usize>,
}

impl FsConstraint {
    pub fn rhs(&self) -> f64 {
        (self.plus.len() - 1) as f64
    }

    pub fn lhs(&self, f: &[f64]) -> f64 {
        self.plus.iter().map(|&n| f[n]).sum::<f64>() - self.minus.iter().map(|&n| f[n]).sum::<f64>()
    }

    pub fn is_satisfied(&self, f: &[f64], tol: f64) -> bool {
        self.lhs(f) <= self.rhs() + tol
    }

    /// `(bit, coefficient)` pairs, plus set first.
    pub fn terms(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.plus.iter().map(|&n| (n, 1.0)).chain(self.minus.iter().map(|&n| (n, -1.0)))
    }
}

/// All `2^(d-1)` forbidden-set inequalities of every check.
pub fn enumerate_fs_constraints(
    code: &CodeDefinition,
    degree_cap: usize,
) -> Result<Vec<FsConstraint>, LdpcError> {
    let mut out = Vec::new();
    for (m, nbrs) in code.checks().iter().enumerate() {
        let d = nbrs.len();
        if d > degree_cap {
            return Err(LdpcError::DegreeCap { check: m, degree: d, cap: degree_cap });
        }
        if d == 0 {
            continue;
        }
        for mask in 0u32..(1 << d) {
            if mask.count_ones() % 2 == 0 {
                continue;
            }
            let mut plus = Vec::new();
            let mut minus = Vec::new();
            for (j, &n) in nbrs.iter().enumerate() {
                if mask >> j & 1 == 1 {
                    plus.push(n);
                } else {
                    minus.push(n);
                }
            }
            out.push(FsConstraint { check: m, plus, minus });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ldpc::build_regular_code;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn single_check(nbrs: Vec<usize>, n: usize) -> CodeDefinition {
        CodeDefinition::from_checks(n, vec![nbrs]).unwrap()
    }

    #[test]
    fn three_bit_check() {
        let fs = enumerate_fs_constraints(&single_check(vec![0, 1, 2], 3), 10).unwrap();
        assert_eq!(fs.len(), 4);
        let as_tuples: Vec<(Vec<usize>, Vec<usize>, f64)> =
            fs.iter().map(|c| (c.plus.clone(), c.minus.clone(), c.rhs())).collect();
        assert!(as_tuples.contains(&(vec![0], vec![1, 2], 0.0)));
        assert!(as_tuples.contains(&(vec![1], vec![0, 2], 0.0)));
        assert!(as_tuples.contains(&(vec![2], vec![0, 1], 0.0)));
        assert!(as_tuples.contains(&(vec![0, 1, 2], vec![], 2.0)));
    }

    #[test]
    fn degree_one_check() {
        let fs = enumerate_fs_constraints(&single_check(vec![1], 2), 10).unwrap();
        assert_eq!(fs, vec![FsConstraint { check: 0, plus: vec![1], minus: vec![] }]);
        assert_eq!(fs[0].rhs(), 0.0);
    }

    #[test]
    fn counts_for_regular_code() {
        let code = build_regular_code(256, 128, 3, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let fs = enumerate_fs_constraints(&code, DEFAULT_FS_DEGREE_CAP).unwrap();
        assert_eq!(fs.len(), 128 * 32);
        let half = vec![0.5; 256];
        assert!(fs.iter().all(|c| c.lhs(&half) < c.rhs()));
    }

    #[test]
    fn cap_is_enforced() {
        let code = single_check((0..11).collect(), 11);
        assert!(matches!(enumerate_fs_constraints(&code, 10), Err(LdpcError::DegreeCap { degree: 11, .. })));
    }

    #[test]
    fn integral_points_match_parity_on_hamming() {
        let code = CodeDefinition::hamming74();
        let fs = enumerate_fs_constraints(&code, 10).unwrap();
        for v in 0u32..128 {
            let bits: Vec<u8> = (0..7).map(|i| (v >> i & 1) as u8).collect();
            let f: Vec<f64> = bits.iter().map(|&b| f64::from(b)).collect();
            let inside = fs.iter().all(|c| c.is_satisfied(&f, 1e-12));
            assert_eq!(inside, code.check_parity(&bits).unwrap(), "vector {v:07b}");
        }
    }
}
