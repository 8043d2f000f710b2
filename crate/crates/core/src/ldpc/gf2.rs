//! Dense GF(2) rows packed into `u64` words.

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitRow {
    words: Vec<u64>,
    len: usize,
}

impl BitRow {
    pub fn zeros(len: usize) -> Self {
        Self { words: vec![0; len.div_ceil(64)], len }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, v: bool) {
        let mask = 1u64 << (i % 64);
        if v {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        self.words[i / 64] ^= 1u64 << (i % 64);
    }

    pub fn xor_assign(&mut self, other: &BitRow) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= *b;
        }
    }

    /// Parity of the AND with `other`.
    pub fn dot(&self, other: &BitRow) -> bool {
        self.words.iter().zip(&other.words).fold(0u32, |acc, (a, b)| acc ^ (a & b).count_ones()) & 1 == 1
    }

    pub fn from_bits(bits: &[u8]) -> Self {
        let mut row = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b & 1 == 1 {
                row.set(i, true);
            }
        }
        row
    }
}

/// Result of reducing a matrix to row echelon form.
#[derive(Debug, Clone)]
pub struct Echelon {
    /// Reduced rows; row `r` has its leading one at `pivots[r]` and zeros in
    /// every other pivot column.
    pub rows: Vec<BitRow>,
    pub pivots: Vec<usize>,
}

impl Echelon {
    pub fn rank(&self) -> usize {
        self.pivots.len()
    }
}

/// Gauss-Jordan elimination, scanning columns in the given order.
pub fn reduce(mut rows: Vec<BitRow>, column_order: &[usize]) -> Echelon {
    let mut pivots = Vec::new();
    let mut next = 0;
    for &col in column_order {
        if next == rows.len() {
            break;
        }
        let Some(p) = (next..rows.len()).find(|&r| rows[r].get(col)) else {
            continue;
        };
        rows.swap(next, p);
        let pivot_row = rows[next].clone();
        for (r, row) in rows.iter_mut().enumerate() {
            if r != next && row.get(col) {
                row.xor_assign(&pivot_row);
            }
        }
        pivots.push(col);
        next += 1;
    }
    rows.truncate(next);
    Echelon { rows, pivots }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_of_small_matrix() {
        let rows =
            vec![BitRow::from_bits(&[1, 1, 0]), BitRow::from_bits(&[0, 1, 1]), BitRow::from_bits(&[1, 0, 1])];
        let e = reduce(rows, &[0, 1, 2]);
        assert_eq!(e.rank(), 2);
        assert_eq!(e.pivots, vec![0, 1]);
        assert!(e.rows[0].get(0) && !e.rows[0].get(1));
    }

    #[test]
    fn dot_and_flip() {
        let mut a = BitRow::from_bits(&[1; 70]);
        let b = BitRow::from_bits(&[1; 70]);
        assert!(!a.dot(&b));
        a.flip(69);
        assert!(a.dot(&b));
        assert!(!a.get(69));
    }
}
