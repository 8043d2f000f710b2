//! Complex baseband MIMO channel, its real-field embedding, QPSK mapping and
//! the bookkeeping that ties codeword bits to (snapshot, antenna, part).
//!
//! Conventions used across the crate:
//!
//! * The real symbol vector of a snapshot is `x = [Re s; Im s]`, so position
//!   `p < Nt` carries the real part of antenna `p` and position `Nt + p` the
//!   imaginary part.
//! * Codeword bits are laid out spatially first, then temporally, with the
//!   real bit of an antenna immediately followed by its imaginary bit.
//! * A coded bit `c` maps to the polarized value `1 - 2c`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MimoError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("index out of range: {0}")]
    OutOfRange(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
}

/// Which half of a complex symbol a bit drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Part {
    Real,
    Imag,
}

/// One complex snapshot `y = H s + n`.
#[derive(Debug, Clone)]
pub struct ComplexChannelBlock {
    pub channel: DMatrix<Complex64>,
    pub symbols: DVector<Complex64>,
    /// Variance of each complex noise sample (`2 sigma^2`).
    pub noise_var: f64,
}

/// Real-field observation of one snapshot.
#[derive(Debug, Clone)]
pub struct RealBlockObservation {
    pub channel: DMatrix<f64>,
    pub received: DVector<f64>,
    /// Noise variance per real dimension.
    pub noise_var: f64,
}

impl RealBlockObservation {
    pub fn new(channel: DMatrix<f64>, received: DVector<f64>, noise_var: f64) -> Result<Self, MimoError> {
        if channel.nrows() != received.len() {
            return Err(MimoError::Dimension(format!(
                "channel has {} rows, received vector has {} entries",
                channel.nrows(),
                received.len()
            )));
        }
        if !(noise_var >= 0.0) {
            return Err(MimoError::Invalid(format!("noise variance {noise_var}")));
        }
        Ok(Self { channel, received, noise_var })
    }

    /// Number of real symbol dimensions (`2 Nt`).
    pub fn dim(&self) -> usize {
        self.channel.ncols()
    }
}

/// Maps codeword bit indices to (snapshot, antenna, part). All indices are
/// zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BitIndexMap {
    nt: usize,
    snapshots: usize,
}

impl BitIndexMap {
    pub fn new(nt: usize, snapshots: usize) -> Result<Self, MimoError> {
        if nt == 0 || snapshots == 0 {
            return Err(MimoError::Invalid("antenna and snapshot counts must be positive".into()));
        }
        Ok(Self { nt, snapshots })
    }

    /// Builds the map for a codeword of `codeword_len` bits.
    pub fn for_codeword(nt: usize, codeword_len: usize) -> Result<Self, MimoError> {
        if nt == 0 || !codeword_len.is_multiple_of(2 * nt) || codeword_len == 0 {
            return Err(MimoError::Dimension(format!(
                "codeword length {codeword_len} is not a positive multiple of 2*Nt = {}",
                2 * nt
            )));
        }
        Self::new(nt, codeword_len / (2 * nt))
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn snapshots(&self) -> usize {
        self.snapshots
    }

    /// Bits carried by one snapshot (`2 Nt`).
    pub fn bits_per_snapshot(&self) -> usize {
        2 * self.nt
    }

    pub fn codeword_len(&self) -> usize {
        2 * self.nt * self.snapshots
    }

    pub fn bit_index(&self, k: usize, antenna: usize, part: Part) -> Result<usize, MimoError> {
        if k >= self.snapshots {
            return Err(MimoError::OutOfRange(format!("snapshot {k} (have {})", self.snapshots)));
        }
        if antenna >= self.nt {
            return Err(MimoError::OutOfRange(format!("antenna {antenna} (have {})", self.nt)));
        }
        let base = 2 * self.nt * k + 2 * antenna;
        Ok(match part {
            Part::Real => base,
            Part::Imag => base + 1,
        })
    }

    /// Codeword bit index carried by position `pos` of the real symbol
    /// vector of snapshot `k`. Panics on out-of-range input.
    pub fn symbol_bit(&self, k: usize, pos: usize) -> usize {
        assert!(k < self.snapshots && pos < 2 * self.nt);
        if pos < self.nt {
            2 * self.nt * k + 2 * pos
        } else {
            2 * self.nt * k + 2 * (pos - self.nt) + 1
        }
    }

    /// Gathers per-snapshot values from a codeword-ordered slice into real
    /// symbol order.
    pub fn gather(&self, k: usize, codeword_values: &[f64]) -> Vec<f64> {
        (0..2 * self.nt).map(|p| codeword_values[self.symbol_bit(k, p)]).collect()
    }

    /// Inverse of [`gather`](Self::gather).
    pub fn scatter(&self, k: usize, symbol_values: &[f64], codeword_values: &mut [f64]) {
        for (p, &v) in symbol_values.iter().enumerate() {
            codeword_values[self.symbol_bit(k, p)] = v;
        }
    }
}

pub fn real_embed(
    channel: &DMatrix<Complex64>,
    received: &DVector<Complex64>,
) -> Result<(DMatrix<f64>, DVector<f64>), MimoError> {
    if channel.nrows() != received.len() {
        return Err(MimoError::Dimension(format!(
            "channel has {} rows, received vector has {} entries",
            channel.nrows(),
            received.len()
        )));
    }
    Ok((embed_matrix(channel), embed_vector(received)))
}

/// `[[Re, -Im], [Im, Re]]`.
pub fn embed_matrix(m: &DMatrix<Complex64>) -> DMatrix<f64> {
    let (r, c) = m.shape();
    let mut out = DMatrix::zeros(2 * r, 2 * c);
    for i in 0..r {
        for j in 0..c {
            let z = m[(i, j)];
            out[(i, j)] = z.re;
            out[(i, j + c)] = -z.im;
            out[(i + r, j)] = z.im;
            out[(i + r, j + c)] = z.re;
        }
    }
    out
}

/// `[Re; Im]`.
pub fn embed_vector(v: &DVector<Complex64>) -> DVector<f64> {
    let n = v.len();
    DVector::from_fn(2 * n, |i, _| if i < n { v[i].re } else { v[i - n].im })
}

/// I.i.d. circularly symmetric complex Gaussian entries with unit variance.
pub fn draw_channel<R: Rng + ?Sized>(nt: usize, nr: usize, rng: &mut R) -> DMatrix<Complex64> {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    DMatrix::from_fn(nr, nt, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex64::new(scale * re, scale * im)
    })
}

/// Maps `2 Nt` coded bits (real/imag interleaved per antenna) to `Nt` QPSK
/// symbols `(1 - 2 b_re) + j (1 - 2 b_im)`.
pub fn modulate_qpsk(bits: &[u8]) -> Result<DVector<Complex64>, MimoError> {
    if !bits.len().is_multiple_of(2) || bits.is_empty() {
        return Err(MimoError::Dimension(format!(
            "QPSK needs an even, non-zero number of bits, got {}",
            bits.len()
        )));
    }
    if let Some(b) = bits.iter().find(|&&b| b > 1) {
        return Err(MimoError::Invalid(format!("bit value {b}")));
    }
    Ok(DVector::from_iterator(
        bits.len() / 2,
        bits.chunks_exact(2)
            .map(|p| Complex64::new(1.0 - 2.0 * f64::from(p[0]), 1.0 - 2.0 * f64::from(p[1]))),
    ))
}

/// Sign demapper, the inverse of [`modulate_qpsk`] on the constellation.
pub fn demodulate_qpsk(symbols: &DVector<Complex64>) -> Vec<u8> {
    symbols.iter().flat_map(|s| [u8::from(s.re < 0.0), u8::from(s.im < 0.0)]).collect()
}

/// Adds i.i.d. `N(0, noise_var)` samples to every element.
pub fn add_noise<R: Rng + ?Sized>(
    clean: &DVector<f64>,
    noise_var: f64,
    rng: &mut R,
) -> Result<DVector<f64>, MimoError> {
    if !(noise_var >= 0.0) {
        return Err(MimoError::Invalid(format!("noise variance {noise_var}")));
    }
    let sd = noise_var.sqrt();
    Ok(clean.map(|v| {
        let z: f64 = StandardNormal.sample(rng);
        v + sd * z
    }))
}

/// Noise variance per real dimension for `SNR = Nt * Es / N0` with `Es = 2`
/// and `N0 = 2 sigma^2`.
pub fn noise_var_for_snr_db(nt: usize, snr_db: f64) -> f64 {
    nt as f64 / 10f64.powf(snr_db / 10.0)
}

/// Transmits one codeword over `K` independent Rayleigh snapshots.
pub fn transmit_codeword<R: Rng + ?Sized>(
    codeword: &[u8],
    map: &BitIndexMap,
    nr: usize,
    noise_var: f64,
    rng: &mut R,
) -> Result<Vec<RealBlockObservation>, MimoError> {
    if codeword.len() != map.codeword_len() {
        return Err(MimoError::Dimension(format!(
            "codeword has {} bits, map expects {}",
            codeword.len(),
            map.codeword_len()
        )));
    }
    let nt = map.nt();
    codeword
        .chunks_exact(2 * nt)
        .map(|bits| {
            let hc = draw_channel(nt, nr, rng);
            let s = modulate_qpsk(bits)?;
            let h = embed_matrix(&hc);
            let clean = &h * embed_vector(&s);
            let y = add_noise(&clean, noise_var, rng)?;
            RealBlockObservation::new(h, y, noise_var)
        })
        .collect()
}

/// Real symbol vector (±1 entries) of snapshot `k` of a codeword.
pub fn snapshot_symbols(codeword: &[u8], map: &BitIndexMap, k: usize) -> DVector<f64> {
    DVector::from_fn(map.bits_per_snapshot(), |p, _| 1.0 - 2.0 * f64::from(codeword[map.symbol_bit(k, p)]))
}
