//! The three-round similarity join.
//!
//! Round 1 sketches every column, round 2 builds per-row samplers, round 3
//! draws wedges per row and keeps the pairs whose sketch estimate clears the
//! filter. Rounds are barriers; inside a round work is partitioned (columns
//! for round 1, rows for rounds 2 and 3) over a pool of `workers` threads.
//! Every random choice is keyed by seed and coordinates, so the partitioning
//! never changes the result.

use std::collections::btree_map::{BTreeMap, Entry};
use std::io::{BufRead, Write};
use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::{IdDictionary, SparseColumnMatrix};
use crate::rng::{derive_seed, stream};
use crate::simhash::{self, estimate_from_hamming, hamming_words, Sketch, DEFAULT_SKETCH_LEN};
use crate::wedges::{build_row_samplers, RowSampler};

pub const DEFAULT_OVERSAMPLE: f64 = 150.0;

/// Bytes for one shipped sketch besides its bits: 8-byte index + 8-byte norm.
pub const SKETCH_OVERHEAD_BYTES: u64 = 16;
/// Two 8-byte indices plus an 8-byte estimate.
pub const CANDIDATE_BYTES: u64 = 24;
/// One input non-zero: 8-byte index + 8-byte value.
pub const NONZERO_BYTES: u64 = 16;

/// Stream round index used for the per-row wedge draws.
pub const ROUND_CANDIDATES: u64 = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct JoinConfig {
    /// Similarity threshold, in (0, 1).
    pub tau: f64,
    pub sketch_len: usize,
    /// Wedge draws per unit of wedge weight.
    pub oversample: f64,
    /// Filter value applied to sketch estimates.
    pub sigma: f64,
    pub seed: u64,
    pub self_join: bool,
    /// Set when the parameters above were derived with [`JoinConfig::with_theory`].
    pub theory_c: Option<f64>,
    /// Thread count; has no effect on results.
    pub workers: usize,
}

impl JoinConfig {
    /// Practical defaults: 8192-bit sketches, oversampling 150, sigma = tau.
    pub fn new(tau: f64) -> Self {
        Self {
            tau,
            sketch_len: DEFAULT_SKETCH_LEN,
            oversample: DEFAULT_OVERSAMPLE,
            sigma: tau,
            seed: 0,
            self_join: true,
            theory_c: None,
            workers: 1,
        }
    }

    /// Parameters with provable guarantees for `n` columns:
    /// `len = ceil(c ln n / tau^2)`, `s = c ln n / tau`, `sigma = tau / 2`.
    pub fn with_theory(mut self, c: f64, n: usize) -> Self {
        let ln_n = (n.max(2) as f64).ln();
        self.theory_c = Some(c);
        self.sketch_len = (c * ln_n / (self.tau * self.tau)).ceil().max(1.0) as usize;
        self.oversample = c * ln_n / self.tau;
        self.sigma = self.tau / 2.0;
        self
    }

    /// Checks every field and reports all violations together.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if !(self.tau > 0.0 && self.tau < 1.0) {
            errs.push(format!("tau must lie in (0, 1), got {}", self.tau));
        }
        if self.sketch_len == 0 {
            errs.push("sketch length must be at least 1".to_string());
        }
        if !(self.oversample.is_finite() && self.oversample > 0.0) {
            errs.push(format!("oversample must be positive, got {}", self.oversample));
        }
        if !(self.sigma > 0.0 && self.sigma <= 1.0) {
            errs.push(format!("sigma must lie in (0, 1], got {}", self.sigma));
        }
        if let Some(c) = self.theory_c {
            if !(c.is_finite() && c > 0.0) {
                errs.push(format!("theory constant must be positive, got {c}"));
            }
        }
        if self.workers == 0 {
            errs.push("workers must be at least 1".to_string());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }
}

/// An emitted pair: column `a` of A, column `b` of B, and the sketch estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub a: usize,
    pub b: usize,
    pub est: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CostReport {
    pub sketch_shuffle_bytes: u64,
    pub candidate_shuffle_bytes: u64,
    pub output_bytes: u64,
    pub round1_bytes: u64,
    pub round2_bytes: u64,
    pub wedges_drawn: u64,
    pub candidates_emitted: u64,
    pub candidates_after_dedup: u64,
}

impl CostReport {
    pub fn fields(&self) -> [(&'static str, u64); 8] {
        [
            ("sketch_shuffle_bytes", self.sketch_shuffle_bytes),
            ("candidate_shuffle_bytes", self.candidate_shuffle_bytes),
            ("output_bytes", self.output_bytes),
            ("round1_bytes", self.round1_bytes),
            ("round2_bytes", self.round2_bytes),
            ("wedges_drawn", self.wedges_drawn),
            ("candidates_emitted", self.candidates_emitted),
            ("candidates_after_dedup", self.candidates_after_dedup),
        ]
    }

    /// Sketch + candidate + output bytes; rounds 1 and 2 only move the input.
    pub fn round3_bytes(&self) -> u64 {
        self.sketch_shuffle_bytes + self.candidate_shuffle_bytes + self.output_bytes
    }

    pub fn total_bytes(&self) -> u64 {
        self.round1_bytes + self.round2_bytes + self.round3_bytes()
    }

    /// Candidate shuffle over deduplicated output; `None` with no output.
    pub fn candidate_output_ratio(&self) -> Option<f64> {
        (self.output_bytes > 0).then(|| self.candidate_shuffle_bytes as f64 / self.output_bytes as f64)
    }

    /// One `key=value` per line.
    pub fn to_kv(&self) -> String {
        self.fields().iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    /// Header row of keys, then one row of values.
    pub fn to_tsv(&self) -> String {
        let f = self.fields();
        let keys: Vec<&str> = f.iter().map(|(k, _)| *k).collect();
        let vals: Vec<String> = f.iter().map(|(_, v)| v.to_string()).collect();
        format!("{}\n{}\n", keys.join("\t"), vals.join("\t"))
    }
}

/// What a finished run hands to [`account_costs`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunArtifacts {
    pub sketch_len: usize,
    /// Per-row count of columns whose sketches are shipped to that row,
    /// summed over rows and over both sides (one side in a self-join).
    pub sketch_deliveries: u64,
    /// Input non-zeros moved in rounds 1 and 2.
    pub input_nonzeros: u64,
    pub wedges_drawn: u64,
    pub candidates_emitted: u64,
    pub candidates_after_dedup: u64,
}

impl RunArtifacts {
    pub fn for_inputs(a: &SparseColumnMatrix, b: &SparseColumnMatrix, sketch_len: usize, self_join: bool) -> Self {
        let deliveries: u64 = (0..a.n_rows())
            .map(|r| {
                let side_b = if self_join { 0 } else { b.row_nnz(r) };
                (a.row_nnz(r) + side_b) as u64
            })
            .sum();
        let input_nonzeros = a.nnz() as u64 + if self_join { 0 } else { b.nnz() as u64 };
        Self {
            sketch_len,
            sketch_deliveries: deliveries,
            input_nonzeros,
            wedges_drawn: 0,
            candidates_emitted: 0,
            candidates_after_dedup: 0,
        }
    }
}

pub fn sketch_bytes(sketch_len: usize) -> u64 {
    sketch_len.div_ceil(8) as u64 + SKETCH_OVERHEAD_BYTES
}

pub fn account_costs(art: &RunArtifacts) -> CostReport {
    CostReport {
        sketch_shuffle_bytes: art.sketch_deliveries * sketch_bytes(art.sketch_len),
        candidate_shuffle_bytes: art.candidates_emitted * CANDIDATE_BYTES,
        output_bytes: art.candidates_after_dedup * CANDIDATE_BYTES,
        round1_bytes: art.input_nonzeros * NONZERO_BYTES,
        round2_bytes: art.input_nonzeros * NONZERO_BYTES,
        wedges_drawn: art.wedges_drawn,
        candidates_emitted: art.candidates_emitted,
        candidates_after_dedup: art.candidates_after_dedup,
    }
}

/// Number of wedges drawn for a row of weight `w`: `ceil(s * w)`.
pub fn draw_count(oversample: f64, weight: f64) -> u64 {
    (oversample * weight).ceil() as u64
}

/// Raw wedge draws `(a, b)` for one row, `a` from the A sampler then `b` from
/// the B sampler per draw. Yields nothing if either sampler is inert.
pub fn draw_wedges<'s, R: Rng>(
    sa: &'s RowSampler,
    sb: &'s RowSampler,
    count: u64,
    rng: &'s mut R,
) -> impl Iterator<Item = (usize, usize)> + 's {
    let count = if sa.is_inert() || sb.is_inert() { 0 } else { count };
    (0..count).map(move |_| {
        let a = sa.draw(rng);
        let b = sb.draw(rng);
        (a, b)
    })
}

/// Inputs shared by every row in round 3.
pub struct RowContext<'a> {
    pub sketches_a: &'a [Option<Sketch>],
    pub sketches_b: &'a [Option<Sketch>],
    pub sketch_len: usize,
    pub oversample: f64,
    pub sigma: f64,
    pub self_join: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RowCandidates {
    pub drawn: u64,
    pub candidates: Vec<Candidate>,
}

/// Round 3 for one row: `ceil(s * w_r)` wedge draws, each estimated from the
/// two sketches and kept when the estimate reaches sigma. Self-join draws with
/// `a == b` count as drawn but are dropped; kept pairs have `a < b`.
pub fn generate_candidates_for_row<R: Rng>(
    sa: &RowSampler,
    sb: &RowSampler,
    ctx: &RowContext<'_>,
    rng: &mut R,
) -> RowCandidates {
    let drawn = if sa.is_inert() || sb.is_inert() {
        0
    } else {
        draw_count(ctx.oversample, sa.l1_norm * sb.l1_norm)
    };
    let mut candidates = Vec::new();
    for (a, b) in draw_wedges(sa, sb, drawn, rng) {
        if ctx.self_join && a == b {
            continue;
        }
        let (ha, hb) = match (&ctx.sketches_a[a], &ctx.sketches_b[b]) {
            (Some(ha), Some(hb)) => (ha, hb),
            _ => unreachable!("sampled columns are non-empty"),
        };
        let delta = hamming_words(ha.words(), hb.words()) as usize;
        // columns are unit-normalized
        let est = estimate_from_hamming(delta, ctx.sketch_len, 1.0, 1.0);
        if est >= ctx.sigma {
            let (a, b) = if ctx.self_join && b < a { (b, a) } else { (a, b) };
            candidates.push(Candidate { a, b, est });
        }
    }
    RowCandidates { drawn, candidates }
}

/// Collapses repeated keys, canonicalizing self-join keys to `(min, max)`.
/// Repeats must carry bit-identical estimates.
pub fn deduplicate<I>(candidates: I, self_join: bool) -> Result<Vec<Candidate>>
where
    I: IntoIterator<Item = Candidate>,
{
    let mut seen: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for c in candidates {
        let key = if self_join { (c.a.min(c.b), c.a.max(c.b)) } else { (c.a, c.b) };
        match seen.entry(key) {
            Entry::Vacant(v) => {
                v.insert(c.est);
            }
            Entry::Occupied(o) => {
                if o.get().to_bits() != c.est.to_bits() {
                    return Err(Error::Inconsistent(format!(
                        "pair {key:?} emitted with estimates {} and {}",
                        o.get(),
                        c.est
                    )));
                }
            }
        }
    }
    Ok(seen.into_iter().map(|((a, b), est)| Candidate { a, b, est }).collect())
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RoundTimings {
    pub sketch: Duration,
    pub samplers: Duration,
    pub candidates: Duration,
    pub dedup: Duration,
}

#[derive(Debug, Clone)]
pub struct JoinOutput {
    /// Deduplicated pairs sorted by `(a, b)`.
    pub pairs: Vec<Candidate>,
    pub cost: CostReport,
    pub timings: RoundTimings,
}

/// Self-join of `a` with itself.
pub fn run_self_join(a: &SparseColumnMatrix, cfg: &JoinConfig) -> Result<JoinOutput> {
    let cfg = JoinConfig { self_join: true, ..cfg.clone() };
    run_join(a, a, &cfg)
}

/// Finds the column pairs of `a` and `b` whose estimated cosine reaches
/// `cfg.sigma`. In self-join mode `b` must be the same matrix as `a`.
pub fn run_join(a: &SparseColumnMatrix, b: &SparseColumnMatrix, cfg: &JoinConfig) -> Result<JoinOutput> {
    cfg.validate()?;
    if a.n_rows() != b.n_rows() {
        return Err(Error::DimensionMismatch(format!(
            "A has {} rows but B has {}",
            a.n_rows(),
            b.n_rows()
        )));
    }
    if cfg.self_join && !std::ptr::eq(a, b) {
        return Err(Error::DimensionMismatch("self-join requires B to be A".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Inconsistent(format!("thread pool: {e}")))?;
    pool.install(|| run_rounds(a, b, cfg))
}

fn run_rounds(a: &SparseColumnMatrix, b: &SparseColumnMatrix, cfg: &JoinConfig) -> Result<JoinOutput> {
    let mut timings = RoundTimings::default();
    let sketch_seed = derive_seed(cfg.seed, "simhash");

    let t = Instant::now();
    let sketches_a = simhash::sketch_matrix(a, cfg.sketch_len, sketch_seed)?;
    let sketches_b = if cfg.self_join { None } else { Some(simhash::sketch_matrix(b, cfg.sketch_len, sketch_seed)?) };
    timings.sketch = t.elapsed();

    let t = Instant::now();
    let samplers_a = build_row_samplers(a);
    let samplers_b = if cfg.self_join { None } else { Some(build_row_samplers(b)) };
    timings.samplers = t.elapsed();

    let t = Instant::now();
    let ctx = RowContext {
        sketches_a: &sketches_a,
        sketches_b: sketches_b.as_deref().unwrap_or(&sketches_a),
        sketch_len: cfg.sketch_len,
        oversample: cfg.oversample,
        sigma: cfg.sigma,
        self_join: cfg.self_join,
    };
    let samplers_b = samplers_b.as_deref().unwrap_or(&samplers_a);
    let rows: Vec<RowCandidates> = (0..a.n_rows())
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(cfg.seed, ROUND_CANDIDATES, r as u64);
            generate_candidates_for_row(&samplers_a[r], &samplers_b[r], &ctx, &mut rng)
        })
        .collect();
    timings.candidates = t.elapsed();

    let t = Instant::now();
    let wedges_drawn = rows.iter().map(|r| r.drawn).sum();
    let candidates_emitted = rows.iter().map(|r| r.candidates.len() as u64).sum();
    let pairs = deduplicate(rows.into_iter().flat_map(|r| r.candidates), cfg.self_join)?;
    timings.dedup = t.elapsed();

    let art = RunArtifacts {
        wedges_drawn,
        candidates_emitted,
        candidates_after_dedup: pairs.len() as u64,
        ..RunArtifacts::for_inputs(a, b, cfg.sketch_len, cfg.self_join)
    };
    Ok(JoinOutput { pairs, cost: account_costs(&art), timings })
}

/// Writes `a_id<TAB>b_id<TAB>est` in the given (sorted) order.
pub fn write_pairs_tsv<W: Write>(
    mut w: W,
    pairs: &[Candidate],
    ids_a: &IdDictionary,
    ids_b: &IdDictionary,
) -> Result<()> {
    for c in pairs {
        writeln!(w, "{}\t{}\t{}", ids_a.external(c.a), ids_b.external(c.b), c.est)?;
    }
    Ok(())
}

/// Reads `a_id<TAB>b_id<TAB>est` lines, assigning dense indices through `ids`.
pub fn read_pairs_tsv<R: BufRead>(r: R, ids: &mut IdDictionary) -> Result<Vec<Candidate>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 3 {
            return Err(Error::Parse { line: i + 1, msg: "expected a<TAB>b<TAB>est".into() });
        }
        let est = f[2].parse().map_err(|_| Error::Parse { line: i + 1, msg: format!("bad estimate {:?}", f[2]) })?;
        out.push(Candidate { a: ids.get_or_insert(f[0]), b: ids.get_or_insert(f[1]), est });
    }
    Ok(out)
}
