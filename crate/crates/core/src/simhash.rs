//! Signed random-projection sketches of columns.
//!
//! Bit `i` of a column's sketch is the sign of the column's projection onto a
//! Gaussian direction whose coordinates `g(r, i)` come from a keyed hash, so
//! any worker can recompute them for any row without coordination.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::SparseColumnMatrix;
use crate::rng::{hash_words, mix64};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Default sketch length in bits.
pub const DEFAULT_SKETCH_LEN: usize = 8192;

/// Accumulator budget per column block while sketching, in bytes.
const BLOCK_BYTES: usize = 32 << 20;

/// Coordinates of one Gaussian entry of the projection matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GaussianKey {
    pub seed: u64,
    pub row: u64,
    pub bit: u64,
}

#[inline]
fn row_key(seed: u64, row: u64) -> u64 {
    hash_words(&[seed, row])
}

/// Box-Muller on counters `2j+1`, `2j+2` of the row's SplitMix stream.
/// Returns the cosine and sine branch for bits `2j` and `2j+1`.
#[inline]
fn gaussian_pair(row_key: u64, j: u64) -> (f64, f64) {
    let h1 = mix64(row_key.wrapping_add((2 * j + 1).wrapping_mul(GOLDEN)));
    let h2 = mix64(row_key.wrapping_add((2 * j + 2).wrapping_mul(GOLDEN)));
    // u1 in (0, 1] keeps the log finite
    let u1 = ((h1 >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
    let u2 = (h2 >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    let radius = (-2.0 * u1.ln()).sqrt();
    let angle = 2.0 * PI * u2;
    (radius * angle.cos(), radius * angle.sin())
}

/// Standard normal variate, a pure function of the key.
pub fn gaussian_at(key: GaussianKey) -> f64 {
    let (c, s) = gaussian_pair(row_key(key.seed, key.row), key.bit / 2);
    if key.bit.is_multiple_of(2) {
        c
    } else {
        s
    }
}

/// Fills `out[i] = gaussian_at((seed, row, i))` for every `i < out.len()`.
pub fn fill_row_gaussians(seed: u64, row: u64, out: &mut [f64]) {
    let key = row_key(seed, row);
    let mut chunks = out.chunks_exact_mut(2);
    let mut j = 0u64;
    for pair in &mut chunks {
        let (c, s) = gaussian_pair(key, j);
        pair[0] = c;
        pair[1] = s;
        j += 1;
    }
    if let [last] = chunks.into_remainder() {
        *last = gaussian_pair(key, j).0;
    }
}

/// An `len`-bit sign sketch, packed 64 bits per word, plus the column's
/// original L2 norm.
#[derive(Debug, Clone, PartialEq)]
pub struct Sketch {
    words: Vec<u64>,
    len: usize,
    pub l2_norm: f64,
}

impl Sketch {
    fn from_accumulators(acc: &[f64], l2_norm: f64) -> Self {
        let mut words = vec![0u64; acc.len().div_ceil(64)];
        for (i, &x) in acc.iter().enumerate() {
            // sgn(0) = +1
            if x >= 0.0 {
                words[i / 64] |= 1 << (i % 64);
            }
        }
        Self { words, len: acc.len(), l2_norm }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn bit(&self, i: usize) -> bool {
        assert!(i < self.len, "bit {i} out of range for sketch of length {}", self.len);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    /// Sketch with every bit flipped.
    pub fn complement(&self) -> Self {
        let mut words: Vec<u64> = self.words.iter().map(|w| !w).collect();
        if !self.len.is_multiple_of(64) {
            if let Some(last) = words.last_mut() {
                *last &= (1u64 << (self.len % 64)) - 1;
            }
        }
        Self { words, len: self.len, l2_norm: self.l2_norm }
    }

    /// Builds a sketch from explicit bits, mostly for tests and file parsing.
    pub fn from_bits(bits: &[bool], l2_norm: f64) -> Self {
        let mut words = vec![0u64; bits.len().div_ceil(64)];
        for (i, &b) in bits.iter().enumerate() {
            if b {
                words[i / 64] |= 1 << (i % 64);
            }
        }
        Self { words, len: bits.len(), l2_norm }
    }

    /// Hex of the `ceil(len/8)` bytes, byte `k` holding bits `8k..8k+8` LSB first.
    pub fn to_hex(&self) -> String {
        let n_bytes = self.len.div_ceil(8);
        let mut s = String::with_capacity(2 * n_bytes);
        for k in 0..n_bytes {
            let byte = (self.words[k / 8] >> (8 * (k % 8))) & 0xff;
            s.push_str(&format!("{byte:02x}"));
        }
        s
    }

    pub fn from_hex(hex: &str, len: usize, l2_norm: f64) -> Result<Self> {
        let n_bytes = len.div_ceil(8);
        if hex.len() != 2 * n_bytes || !hex.is_ascii() {
            return Err(Error::Domain(format!(
                "expected {} hex digits for {len} bits, found {}",
                2 * n_bytes,
                hex.len()
            )));
        }
        let mut words = vec![0u64; len.div_ceil(64)];
        for k in 0..n_bytes {
            let byte = u64::from_str_radix(&hex[2 * k..2 * k + 2], 16)
                .map_err(|_| Error::Domain(format!("bad hex digits at byte {k}")))?;
            words[k / 8] |= byte << (8 * (k % 8));
        }
        let sketch = Self { words, len, l2_norm };
        if sketch.complement().complement() != sketch {
            return Err(Error::Domain("bits set beyond sketch length".into()));
        }
        Ok(sketch)
    }
}

/// Sketch of a single column given as `(row, value)` pairs in any order.
/// The signed sums run in ascending row order.
pub fn compute_sketch(column: &[(usize, f64)], len: usize, seed: u64) -> Result<Sketch> {
    if column.is_empty() {
        return Err(Error::Domain("cannot sketch an empty column".into()));
    }
    if len == 0 {
        return Err(Error::Domain("sketch length must be at least 1".into()));
    }
    let mut entries = column.to_vec();
    entries.sort_by_key(|&(r, _)| r);
    let mut acc = vec![0.0f64; len];
    let mut g = vec![0.0f64; len];
    for &(r, v) in &entries {
        fill_row_gaussians(seed, r as u64, &mut g);
        for (a, &x) in acc.iter_mut().zip(&g) {
            *a += x * v;
        }
    }
    let norm = entries.iter().map(|&(_, v)| v * v).sum::<f64>().sqrt();
    Ok(Sketch::from_accumulators(&acc, norm))
}

/// Sketches every column of `m`; empty columns map to `None`.
///
/// Columns are processed in fixed-size blocks so each row's Gaussian vector is
/// generated once per block. Per-column arithmetic is identical to
/// [`compute_sketch`], so results do not depend on blocking or thread count.
pub fn sketch_matrix(m: &SparseColumnMatrix, len: usize, seed: u64) -> Result<Vec<Option<Sketch>>> {
    if len == 0 {
        return Err(Error::Domain("sketch length must be at least 1".into()));
    }
    let block = (BLOCK_BYTES / (8 * len)).clamp(1, 4096);
    let starts: Vec<usize> = (0..m.n_cols()).step_by(block).collect();
    let blocks: Vec<Vec<Option<Sketch>>> = starts
        .par_iter()
        .map(|&start| sketch_block(m, start..(start + block).min(m.n_cols()), len, seed))
        .collect();
    Ok(blocks.into_iter().flatten().collect())
}

fn sketch_block(
    m: &SparseColumnMatrix,
    cols: std::ops::Range<usize>,
    len: usize,
    seed: u64,
) -> Vec<Option<Sketch>> {
    let mut triples: Vec<(usize, usize, f64)> = Vec::new();
    for a in cols.clone() {
        let (rows, vals) = m.column(a);
        triples.extend(rows.iter().zip(vals).map(|(&r, &v)| (r, a - cols.start, v)));
    }
    triples.sort_by_key(|&(r, local, _)| (r, local));

    let mut acc = vec![0.0f64; cols.len() * len];
    let mut g = vec![0.0f64; len];
    let mut i = 0;
    while i < triples.len() {
        let r = triples[i].0;
        fill_row_gaussians(seed, r as u64, &mut g);
        while i < triples.len() && triples[i].0 == r {
            let (_, local, v) = triples[i];
            for (a, &x) in acc[local * len..(local + 1) * len].iter_mut().zip(&g) {
                *a += x * v;
            }
            i += 1;
        }
    }
    cols.enumerate()
        .map(|(local, a)| {
            (!m.is_empty_column(a)).then(|| {
                Sketch::from_accumulators(&acc[local * len..(local + 1) * len], m.column_l2_norms()[a])
            })
        })
        .collect()
}

/// Hamming distance for sketches already known to have equal length.
#[inline]
pub fn hamming_words(a: &[u64], b: &[u64]) -> u32 {
    a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones()).sum()
}

pub fn hamming(a: &Sketch, b: &Sketch) -> Result<usize> {
    if a.len != b.len {
        return Err(Error::LengthMismatch { left: a.len, right: b.len });
    }
    Ok(hamming_words(&a.words, &b.words) as usize)
}

/// `norm_a * norm_b * cos(pi * distance / len)`.
#[inline]
pub fn estimate_from_hamming(distance: usize, len: usize, norm_a: f64, norm_b: f64) -> f64 {
    norm_a * norm_b * (PI * distance as f64 / len as f64).cos()
}

pub fn estimate_dot(a: &Sketch, b: &Sketch, norm_a: f64, norm_b: f64) -> Result<f64> {
    Ok(estimate_from_hamming(hamming(a, b)?, a.len, norm_a, norm_b))
}

/// Rule-of-thumb sketch length `round(10 / delta^2)` where
/// `delta = 1/2 - arccos(tau)/pi` is the per-bit agreement gap between a
/// pair at similarity `tau` and an orthogonal pair.
pub fn sketch_length_heuristic(tau: f64) -> Result<usize> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::Domain(format!("tau must lie in (0, 1), got {tau}")));
    }
    let delta = 0.5 - tau.acos() / PI;
    Ok((10.0 / (delta * delta)).round() as usize)
}

/// Writes the sketch file: a `# ell=<len> seed=<seed>` header, then
/// `dense_index<TAB>l2_norm<TAB>hex` for every non-empty column.
pub fn write_sketches<W: Write>(mut w: W, sketches: &[Option<Sketch>], len: usize, seed: u64) -> Result<()> {
    writeln!(w, "# ell={len} seed={seed}")?;
    for (i, s) in sketches.iter().enumerate() {
        if let Some(s) = s {
            writeln!(w, "{i}\t{}\t{}", s.l2_norm, s.to_hex())?;
        }
    }
    Ok(())
}

/// A parsed sketch file: `(len, seed, [(index, sketch)])`.
pub type SketchFile = (usize, u64, Vec<(usize, Sketch)>);

pub fn read_sketches<R: BufRead>(r: R) -> Result<SketchFile> {
    let mut lines = r.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    let parse_err = |line: usize, msg: String| Error::Parse { line, msg };
    let mut len = None;
    let mut seed = None;
    for tok in header.trim_start_matches('#').split_whitespace() {
        match tok.split_once('=') {
            Some(("ell", v)) => len = v.parse().ok(),
            Some(("seed", v)) => seed = v.parse().ok(),
            _ => {}
        }
    }
    let (len, seed) = match (len, seed) {
        (Some(l), Some(s)) => (l, s),
        _ => return Err(parse_err(1, format!("bad sketch header {header:?}"))),
    };
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line?;
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 3 {
            return Err(parse_err(line_no, "expected 3 fields".into()));
        }
        let idx = f[0].parse().map_err(|_| parse_err(line_no, "bad index".into()))?;
        let norm = f[1].parse().map_err(|_| parse_err(line_no, "bad norm".into()))?;
        out.push((idx, Sketch::from_hex(f[2], len, norm)?));
    }
    Ok((len, seed, out))
}
