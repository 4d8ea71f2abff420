//! Ground truth and evaluation: exact products for a stratified column sample,
//! precision/recall (global, per column, and over a filter grid), plus
//! closed-form shuffle estimates for plain wedge sampling and banded LSH.

use std::collections::{BTreeMap, HashSet};
use std::f64::consts::PI;
use std::io::{BufRead, Write};

use rand::seq::index;
use rayon::prelude::*;

use crate::engine::Candidate;
use crate::error::{Error, Result};
use crate::matrix::{IdDictionary, SparseColumnMatrix};
use crate::rng::{derive_seed, stream};

/// 2^40 bytes.
pub const TERABYTE: f64 = (1u64 << 40) as f64;
/// Dots within this distance below a threshold count as reaching it, so
/// identical unit columns reach 1.0 despite rounding in normalization.
pub const DOT_SLACK: f64 = 1e-12;

/// Two 8-byte ids per wedge.
pub const DEFAULT_BYTES_PER_WEDGE: u64 = 16;

/// `floor(log10(degree))` for `degree >= 1`.
pub fn degree_bucket(degree: usize) -> u32 {
    let (mut d, mut b) = (degree, 0);
    while d >= 10 {
        d /= 10;
        b += 1;
    }
    b
}

/// Draws up to `per_bucket` columns uniformly without replacement from each
/// bucket of non-zero counts `[10^i, 10^(i+1))`. Result is sorted.
pub fn stratified_sample(m: &SparseColumnMatrix, per_bucket: usize, seed: u64) -> Result<Vec<usize>> {
    if per_bucket == 0 {
        return Err(Error::Domain("per_bucket must be at least 1".into()));
    }
    let mut buckets: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for a in 0..m.n_cols() {
        let nnz = m.column_nnz(a);
        if nnz > 0 {
            buckets.entry(degree_bucket(nnz)).or_default().push(a);
        }
    }
    if buckets.is_empty() {
        return Err(Error::Domain("every column is empty".into()));
    }
    let base = derive_seed(seed, "stratified");
    let mut out = Vec::new();
    for (b, cols) in buckets {
        let mut rng = stream(base, u64::from(b), 0);
        let k = per_bucket.min(cols.len());
        out.extend(index::sample(&mut rng, cols.len(), k).into_iter().map(|i| cols[i]));
    }
    out.sort_unstable();
    Ok(out)
}

/// Exact `A[*,a] . B[*,b]` for every sampled `b` and every `a` at or above
/// `tau_min`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub sample: Vec<usize>,
    pub tau_min: f64,
    pub self_join: bool,
    /// For each sampled `b`, the partners `(a, dot)` sorted by `a`.
    pub pairs: BTreeMap<usize, Vec<(usize, f64)>>,
}

impl GroundTruth {
    pub fn num_pairs(&self) -> usize {
        self.pairs.values().map(Vec::len).sum()
    }
}

pub fn exact_products(
    a: &SparseColumnMatrix,
    b: &SparseColumnMatrix,
    sample: &[usize],
    tau_min: f64,
    self_join: bool,
) -> Result<GroundTruth> {
    if tau_min.is_nan() || tau_min <= 0.0 {
        return Err(Error::Domain(format!("tau_min must be positive, got {tau_min}")));
    }
    if a.n_rows() != b.n_rows() {
        return Err(Error::DimensionMismatch(format!("A has {} rows but B has {}", a.n_rows(), b.n_rows())));
    }
    if let Some(&bad) = sample.iter().find(|&&s| s >= b.n_cols()) {
        return Err(Error::DimensionMismatch(format!("sampled column {bad} out of range")));
    }
    let rows: Vec<(usize, Vec<(usize, f64)>)> = sample
        .par_iter()
        .map_init(
            || (vec![0.0f64; a.n_cols()], Vec::new()),
            |(acc, touched), &col| {
                let (rows, vals) = b.column(col);
                for (&r, &v) in rows.iter().zip(vals) {
                    let (acols, avals) = a.row(r);
                    for (&x, &u) in acols.iter().zip(avals) {
                        if acc[x] == 0.0 {
                            touched.push(x);
                        }
                        acc[x] += u * v;
                    }
                }
                touched.sort_unstable();
                let mut hits = Vec::new();
                for &x in touched.iter() {
                    if acc[x] >= tau_min - DOT_SLACK && !(self_join && x == col) {
                        hits.push((x, acc[x]));
                    }
                    acc[x] = 0.0;
                }
                touched.clear();
                (col, hits)
            },
        )
        .collect();
    let mut sorted = sample.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    Ok(GroundTruth { sample: sorted, tau_min, self_join, pairs: rows.into_iter().collect() })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColumnScore {
    pub column: usize,
    pub precision: f64,
    pub recall: f64,
    pub min_pr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub sigma: f64,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub tau: f64,
    pub precision: f64,
    pub recall: f64,
    /// Output pairs touching the sample (`|S|`).
    pub output_pairs: usize,
    /// Ground-truth pairs at or above tau (`|H|`).
    pub truth_pairs: usize,
    pub hits: usize,
    /// Set when `|S| = 0`; precision is then reported as 1.
    pub empty_output: bool,
    /// Set when `|H| = 0`; recall is then reported as 1.
    pub empty_truth: bool,
    /// Sampled columns with a non-empty output or truth set.
    pub per_column: Vec<ColumnScore>,
    pub curve: Vec<CurvePoint>,
}

struct Tally {
    per_column: BTreeMap<usize, (usize, usize, usize)>,
}

impl Tally {
    fn new(output: &[Candidate], truth: &GroundTruth, tau: f64, sigma: f64) -> Self {
        let sampled: HashSet<usize> = truth.sample.iter().copied().collect();
        let mut partners: BTreeMap<usize, HashSet<usize>> = BTreeMap::new();
        for c in output.iter().filter(|c| c.est >= sigma) {
            if truth.self_join {
                if c.a == c.b {
                    continue;
                }
                if sampled.contains(&c.b) {
                    partners.entry(c.b).or_default().insert(c.a);
                }
                if sampled.contains(&c.a) {
                    partners.entry(c.a).or_default().insert(c.b);
                }
            } else if sampled.contains(&c.b) {
                partners.entry(c.b).or_default().insert(c.a);
            }
        }
        let mut per_column = BTreeMap::new();
        for &b in &truth.sample {
            let good: HashSet<usize> = truth
                .pairs
                .get(&b)
                .into_iter()
                .flatten()
                .filter(|&&(_, d)| d >= tau - DOT_SLACK)
                .map(|&(a, _)| a)
                .collect();
            let out = partners.remove(&b).unwrap_or_default();
            let hits = out.intersection(&good).count();
            per_column.insert(b, (out.len(), good.len(), hits));
        }
        Self { per_column }
    }

    fn totals(&self) -> (usize, usize, usize) {
        self.per_column.values().fold((0, 0, 0), |(s, h, x), &(s1, h1, x1)| (s + s1, h + h1, x + x1))
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

fn check_tau(truth: &GroundTruth, tau: f64) -> Result<()> {
    if tau < truth.tau_min {
        return Err(Error::Domain(format!(
            "tau {tau} is below the ground truth's tau_min {}",
            truth.tau_min
        )));
    }
    Ok(())
}

/// Precision `|H ∩ S| / |S|` and recall `|H ∩ S| / |H|` over the sampled
/// columns, globally and per column.
pub fn precision_recall(output: &[Candidate], truth: &GroundTruth, tau: f64) -> Result<EvalReport> {
    check_tau(truth, tau)?;
    let tally = Tally::new(output, truth, tau, f64::NEG_INFINITY);
    let (s, h, hits) = tally.totals();
    let per_column = tally
        .per_column
        .iter()
        .filter(|(_, &(s, h, _))| s > 0 || h > 0)
        .map(|(&column, &(s, h, x))| {
            let (precision, recall) = (ratio(x, s), ratio(x, h));
            ColumnScore { column, precision, recall, min_pr: precision.min(recall) }
        })
        .collect();
    Ok(EvalReport {
        tau,
        precision: ratio(hits, s),
        recall: ratio(hits, h),
        output_pairs: s,
        truth_pairs: h,
        hits,
        empty_output: s == 0,
        empty_truth: h == 0,
        per_column,
        curve: Vec::new(),
    })
}

/// Global precision/recall of the output filtered at each sigma of the grid.
pub fn pr_curve(output: &[Candidate], truth: &GroundTruth, tau: f64, sigma_grid: &[f64]) -> Result<Vec<CurvePoint>> {
    check_tau(truth, tau)?;
    Ok(sigma_grid
        .iter()
        .map(|&sigma| {
            let (s, h, hits) = Tally::new(output, truth, tau, sigma).totals();
            CurvePoint { sigma, precision: ratio(hits, s), recall: ratio(hits, h) }
        })
        .collect())
}

/// 24 evenly spaced values over `[tau/2, 3 tau/2]`.
pub fn default_sigma_grid(tau: f64) -> Vec<f64> {
    let (lo, hi) = (tau / 2.0, 1.5 * tau);
    (0..24).map(|i| lo + (hi - lo) * i as f64 / 23.0).collect()
}

/// Shuffle volume of plain wedge sampling when every wedge is shipped:
/// `bytes_per_wedge * wedges_per_unit * atb_l1 / tau` bytes.
pub fn disco_shuffle_estimate(atb_l1: f64, tau: f64, bytes_per_wedge: u64, wedges_per_unit: f64) -> f64 {
    bytes_per_wedge as f64 * wedges_per_unit * atb_l1 / tau
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LshEstimate {
    pub p1: f64,
    pub p2: f64,
    pub exponent: f64,
    pub bytes: f64,
}

/// Storage lower bound `n^(1 + ln P1 / ln P2)` bytes for SimHash LSH, where
/// `P1 = 1 - arccos(tau)/pi` is the per-bit collision probability at
/// similarity `tau` and `P2 = 1/2` the probability for orthogonal vectors.
pub fn lsh_storage_estimate(n: u64, tau: f64) -> Result<LshEstimate> {
    if n == 0 {
        return Err(Error::Domain("n must be at least 1".into()));
    }
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::Domain(format!("tau must lie in (0, 1), got {tau}")));
    }
    let p1 = 1.0 - tau.acos() / PI;
    let p2: f64 = 0.5;
    let exponent = 1.0 + p1.ln() / p2.ln();
    Ok(LshEstimate { p1, p2, exponent, bytes: (n as f64).powf(exponent) })
}

/// Writes the ground truth: a `# tau_min=<t> self_join=<bool>` header,
/// `#sample<TAB>id` per sampled column, then `a<TAB>b<TAB>exact_dot` rows.
pub fn write_truth_tsv<W: Write>(
    mut w: W,
    truth: &GroundTruth,
    ids_a: &IdDictionary,
    ids_b: &IdDictionary,
) -> Result<()> {
    writeln!(w, "# tau_min={} self_join={}", truth.tau_min, truth.self_join)?;
    for &b in &truth.sample {
        writeln!(w, "#sample\t{}", ids_b.external(b))?;
    }
    for (&b, partners) in &truth.pairs {
        for &(a, d) in partners {
            writeln!(w, "{}\t{}\t{d}", ids_a.external(a), ids_b.external(b))?;
        }
    }
    Ok(())
}

/// Parses a ground-truth file, interning ids through `ids`.
pub fn read_truth_tsv<R: BufRead>(r: R, ids: &mut IdDictionary) -> Result<GroundTruth> {
    let mut tau_min = None;
    let mut self_join = None;
    let mut sample = Vec::new();
    let mut pairs: BTreeMap<usize, Vec<(usize, f64)>> = BTreeMap::new();
    for (i, line) in r.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let err = |msg: String| Error::Parse { line: line_no, msg };
        if let Some(id) = line.strip_prefix("#sample\t") {
            sample.push(ids.get_or_insert(id));
        } else if let Some(rest) = line.strip_prefix('#') {
            for tok in rest.split_whitespace() {
                match tok.split_once('=') {
                    Some(("tau_min", v)) => tau_min = Some(v.parse().map_err(|_| err(format!("bad tau_min {v:?}")))?),
                    Some(("self_join", v)) => self_join = Some(v.parse().map_err(|_| err(format!("bad self_join {v:?}")))?),
                    _ => {}
                }
            }
        } else if !line.is_empty() {
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 3 {
                return Err(err("expected a<TAB>b<TAB>exact_dot".into()));
            }
            let d: f64 = f[2].parse().map_err(|_| err(format!("bad dot {:?}", f[2])))?;
            let a = ids.get_or_insert(f[0]);
            let b = ids.get_or_insert(f[1]);
            pairs.entry(b).or_default().push((a, d));
        }
    }
    let (tau_min, self_join) = match (tau_min, self_join) {
        (Some(t), Some(s)) => (t, s),
        _ => return Err(Error::Parse { line: 1, msg: "missing '# tau_min=.. self_join=..' header".into() }),
    };
    sample.sort_unstable();
    sample.dedup();
    for p in pairs.values_mut() {
        p.sort_by_key(|&(a, _)| a);
    }
    Ok(GroundTruth { sample, tau_min, self_join, pairs })
}

/// `sigma,precision,recall` with a header row.
pub fn write_curve_csv<W: Write>(mut w: W, curve: &[CurvePoint]) -> Result<()> {
    writeln!(w, "sigma,precision,recall")?;
    for p in curve {
        writeln!(w, "{},{},{}", p.sigma, p.precision, p.recall)?;
    }
    Ok(())
}

/// `column,precision,recall,min_pr` with a header row.
pub fn write_histogram_csv<W: Write>(mut w: W, scores: &[ColumnScore], ids: &IdDictionary) -> Result<()> {
    writeln!(w, "column,precision,recall,min_pr")?;
    for s in scores {
        writeln!(w, "{},{},{},{}", ids.external(s.column), s.precision, s.recall, s.min_pr)?;
    }
    Ok(())
}
