//! LDPC codes: construction, encoding, decoding and the forbidden-set
//! description of the fundamental polytope.

mod alist;
mod construct;
mod decode;
mod fs;
pub mod gf2;

pub use alist::{read_alist, write_alist};
pub use construct::build_regular_code;
pub use decode::{bf_decode, spa_decode, SpaOutput, DECODER_MESSAGE_CLIP};
pub use fs::{enumerate_fs_constraints, FsConstraint, DEFAULT_FS_DEGREE_CAP};

use gf2::BitRow;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LdpcError {
    #[error("infeasible degree profile: {0}")]
    DegreeProfile(String),
    #[error("parity-check matrix stayed rank deficient after {0} draws")]
    RankDeficient(usize),
    #[error("length mismatch: expected {expected}, got {got}")]
    Length { expected: usize, got: usize },
    #[error("check {check} has degree {degree}, above the cap of {cap}")]
    DegreeCap { check: usize, degree: usize, cap: usize },
    #[error("malformed alist: {0}")]
    Alist(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Binary linear code given by a sparse parity-check matrix.
///
/// Encoding is systematic: info bit `j` is placed at `info_positions[j]`
/// and every parity position is a GF(2) combination of info bits.
#[derive(Debug, Clone)]
pub struct CodeDefinition {
    n: usize,
    checks: Vec<Vec<usize>>,
    vars: Vec<Vec<usize>>,
    info_positions: Vec<usize>,
    parity_positions: Vec<usize>,
    /// Row `r` gives the info bits summed into `parity_positions[r]`.
    parity_rows: Vec<BitRow>,
}

impl CodeDefinition {
    /// Builds a code from the variable lists of each check. The dimension is
    /// `n - rank(H)`.
    pub fn from_checks(n: usize, checks: Vec<Vec<usize>>) -> Result<Self, LdpcError> {
        let mut vars = vec![Vec::new(); n];
        for (m, row) in checks.iter().enumerate() {
            for &v in row {
                if v >= n {
                    return Err(LdpcError::Length { expected: n, got: v + 1 });
                }
                if vars[v].contains(&m) {
                    return Err(LdpcError::DegreeProfile(format!(
                        "duplicate edge between check {m} and bit {v}"
                    )));
                }
                vars[v].push(m);
            }
        }
        let rows: Vec<BitRow> = checks
            .iter()
            .map(|row| {
                let mut r = BitRow::zeros(n);
                for &v in row {
                    r.set(v, true);
                }
                r
            })
            .collect();
        // Prefer pivots at the right so generated codes with a full-rank
        // right block come out with info bits first.
        let order: Vec<usize> = (0..n).rev().collect();
        let ech = gf2::reduce(rows, &order);
        let mut is_pivot = vec![false; n];
        for &p in &ech.pivots {
            is_pivot[p] = true;
        }
        let info_positions: Vec<usize> = (0..n).filter(|&i| !is_pivot[i]).collect();
        let parity_rows = ech
            .rows
            .iter()
            .map(|row| {
                let mut r = BitRow::zeros(info_positions.len());
                for (j, &pos) in info_positions.iter().enumerate() {
                    if row.get(pos) {
                        r.set(j, true);
                    }
                }
                r
            })
            .collect();
        Ok(Self { n, checks, vars, info_positions, parity_positions: ech.pivots, parity_rows })
    }

    /// Codeword length `N_c`.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Dimension `K_c`.
    pub fn k(&self) -> usize {
        self.info_positions.len()
    }

    pub fn num_checks(&self) -> usize {
        self.checks.len()
    }

    pub fn rank(&self) -> usize {
        self.parity_positions.len()
    }

    /// Bits participating in check `m`.
    pub fn check_neighbors(&self, m: usize) -> &[usize] {
        &self.checks[m]
    }

    pub fn checks(&self) -> &[Vec<usize>] {
        &self.checks
    }

    /// Checks that bit `v` participates in.
    pub fn var_neighbors(&self, v: usize) -> &[usize] {
        &self.vars[v]
    }

    pub fn info_positions(&self) -> &[usize] {
        &self.info_positions
    }

    pub fn encode(&self, info: &[u8]) -> Result<Vec<u8>, LdpcError> {
        if info.len() != self.k() {
            return Err(LdpcError::Length { expected: self.k(), got: info.len() });
        }
        let u = BitRow::from_bits(info);
        let mut cw = vec![0u8; self.n];
        for (&pos, &b) in self.info_positions.iter().zip(info) {
            cw[pos] = b & 1;
        }
        for (&pos, row) in self.parity_positions.iter().zip(&self.parity_rows) {
            cw[pos] = u8::from(row.dot(&u));
        }
        Ok(cw)
    }

    /// Extracts the info bits from a (hard) word.
    pub fn info_bits(&self, word: &[u8]) -> Vec<u8> {
        self.info_positions.iter().map(|&p| word[p]).collect()
    }

    /// Generator matrix rows (`K_c x N_c`), one encoded unit vector each.
    pub fn generator(&self) -> Vec<Vec<u8>> {
        (0..self.k())
            .map(|j| {
                let mut e = vec![0u8; self.k()];
                e[j] = 1;
                self.encode(&e).expect("unit vector has length k")
            })
            .collect()
    }

    pub fn syndrome(&self, bits: &[u8]) -> Result<Vec<u8>, LdpcError> {
        if bits.len() != self.n {
            return Err(LdpcError::Length { expected: self.n, got: bits.len() });
        }
        Ok(self.checks.iter().map(|row| row.iter().fold(0u8, |acc, &v| acc ^ (bits[v] & 1))).collect())
    }

    pub fn check_parity(&self, bits: &[u8]) -> Result<bool, LdpcError> {
        Ok(self.syndrome(bits)?.iter().all(|&s| s == 0))
    }

    /// Number of length-4 cycles in the Tanner graph.
    pub fn four_cycles(&self) -> usize {
        let mut count = 0;
        for a in 0..self.checks.len() {
            for b in a + 1..self.checks.len() {
                let shared = self.checks[a].iter().filter(|v| self.checks[b].contains(v)).count();
                count += shared * shared.saturating_sub(1) / 2;
            }
        }
        count
    }

    /// The (7,4) Hamming code.
    pub fn hamming74() -> Self {
        Self::from_checks(7, vec![vec![0, 1, 2, 4], vec![0, 1, 3, 5], vec![0, 2, 3, 6]])
            .expect("static code is valid")
    }
}

/// Log-likelihood ratios for one codeword, natural log, `L > 0` meaning bit
/// 0 (polarized `+1`) is more likely.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LlrFrame(pub Vec<f64>);

impl LlrFrame {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn clipped(mut self, bound: f64) -> Self {
        for v in &mut self.0 {
            *v = v.clamp(-bound, bound);
        }
        self
    }

    /// Hard bits, `L >= 0 -> 0`.
    pub fn hard_bits(&self) -> Vec<u8> {
        self.0.iter().map(|&l| u8::from(l < 0.0)).collect()
    }
}

impl std::ops::Deref for LlrFrame {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for LlrFrame {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn hamming_code_encodes() {
        let code = CodeDefinition::hamming74();
        assert_eq!(code.n(), 7);
        assert_eq!(code.k(), 4);
        for u in 0..16u8 {
            let info: Vec<u8> = (0..4).map(|i| (u >> i) & 1).collect();
            let cw = code.encode(&info).unwrap();
            assert!(code.check_parity(&cw).unwrap());
            assert_eq!(code.info_bits(&cw), info);
        }
    }

    #[test]
    fn generator_is_orthogonal_to_checks() {
        let code = build_regular_code(32, 16, 3, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        for row in code.generator() {
            assert!(code.check_parity(&row).unwrap());
        }
    }

    #[test]
    fn encode_random_info() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let code = build_regular_code(256, 128, 3, &mut rng).unwrap();
        assert_eq!(code.encode(&[0; 128]).unwrap(), vec![0; 256]);
        let mut seen = std::collections::HashSet::new();
        for _ in 0..100 {
            let info: Vec<u8> = (0..128).map(|_| rng.random_range(0..2)).collect();
            let cw = code.encode(&info).unwrap();
            assert!(code.check_parity(&cw).unwrap());
            assert_eq!(&cw[..128], &info[..]);
            seen.insert(cw);
        }
        assert_eq!(seen.len(), 100);
        assert!(matches!(code.encode(&[0; 3]), Err(LdpcError::Length { .. })));
    }

    #[test]
    fn single_flip_breaks_parity() {
        let code = build_regular_code(32, 16, 3, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert!(code.check_parity(&[0; 32]).unwrap());
        for i in 0..32 {
            let mut w = vec![0u8; 32];
            w[i] = 1;
            assert!(!code.check_parity(&w).unwrap());
        }
        assert!(code.check_parity(&[0; 31]).is_err());
    }
}
