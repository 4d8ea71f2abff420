//! Synthetic instances and brute-force references shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use simjoin::SparseColumnMatrix;

pub type Column = Vec<(usize, f64)>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Dense column-major copy with unit-L2 columns, normalized here rather than
/// by the library.
pub fn dense_normalized(n_rows: usize, cols: &[Vec<(usize, f64)>]) -> Vec<Vec<f64>> {
    cols.iter()
        .map(|c| {
            let mut v = vec![0.0; n_rows];
            for &(r, x) in c {
                v[r] += x;
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                v.iter_mut().for_each(|x| *x /= norm);
            }
            v
        })
        .collect()
}

pub fn dense_dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Every unordered pair `a < b` of a self-join with its exact cosine.
pub fn brute_force_pairs(n_rows: usize, cols: &[Vec<(usize, f64)>]) -> Vec<(usize, usize, f64)> {
    let dense = dense_normalized(n_rows, cols);
    let mut out = Vec::new();
    for a in 0..dense.len() {
        for b in a + 1..dense.len() {
            out.push((a, b, dense_dot(&dense[a], &dense[b])));
        }
    }
    out
}

/// Random sparse columns, each entry present with probability `density`.
pub fn random_columns(rng: &mut impl Rng, n_rows: usize, n_cols: usize, density: f64) -> Vec<Vec<(usize, f64)>> {
    (0..n_cols)
        .map(|_| {
            let mut c = Vec::new();
            for r in 0..n_rows {
                if rng.random_bool(density) {
                    c.push((r, rng.random_range(0.05..2.0)));
                }
            }
            if c.is_empty() {
                c.push((rng.random_range(0..n_rows), 1.0));
            }
            c
        })
        .collect()
}

/// Fully dense columns with entries uniform in `(0, 1)`.
pub fn dense_uniform(rng: &mut impl Rng, n_rows: usize, n_cols: usize) -> Vec<Vec<(usize, f64)>> {
    (0..n_cols).map(|_| (0..n_rows).map(|r| (r, rng.random_range(1e-3..1.0))).collect()).collect()
}

/// Two non-negative unit vectors at angle `theta`: `a` on `rows_a`, and
/// `b = cos(theta) a + sin(theta) u` with `u` on disjoint rows.
pub fn angle_pair(
    rng: &mut impl Rng,
    rows_a: &[usize],
    rows_u: &[usize],
    theta: f64,
) -> (Column, Column) {
    let unit = |rng: &mut dyn rand::RngCore, rows: &[usize]| {
        let v: Vec<f64> = rows.iter().map(|_| rng.random_range(0.1..1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        rows.iter().copied().zip(v.into_iter().map(move |x| x / n)).collect::<Vec<_>>()
    };
    let a = unit(rng, rows_a);
    let u = unit(rng, rows_u);
    let mut b: Vec<(usize, f64)> = a.iter().map(|&(r, x)| (r, theta.cos() * x)).collect();
    if theta.sin() > 0.0 {
        b.extend(u.iter().map(|&(r, x)| (r, theta.sin() * x)));
    }
    b.retain(|&(_, x)| x > 0.0);
    (a, b)
}

pub struct Planted {
    pub n_rows: usize,
    pub columns: Vec<Vec<(usize, f64)>>,
    /// `(a, b)` with `a < b`.
    pub pairs: Vec<(usize, usize)>,
}

/// `n_cols` columns of `degree` random rows each. The first `2 * n_pairs`
/// columns come in consecutive pairs sharing between `min_overlap` and
/// `max_overlap` rows; the rest are background.
pub fn planted(
    rng: &mut impl Rng,
    n_rows: usize,
    n_cols: usize,
    n_pairs: usize,
    degree: usize,
    (min_overlap, max_overlap): (usize, usize),
) -> Planted {
    let mut columns = Vec::with_capacity(n_cols);
    let mut pairs = Vec::with_capacity(n_pairs);
    let values = |rng: &mut ChaCha8Rng, rows: &[usize]| -> Vec<(usize, f64)> {
        rows.iter().map(|&r| (r, rng.random_range(0.5..1.5))).collect()
    };
    let mut inner = ChaCha8Rng::seed_from_u64(rng.random());
    for p in 0..n_pairs {
        let k = inner.random_range(min_overlap..=max_overlap);
        let rows: Vec<usize> = sample(&mut inner, n_rows, 2 * degree - k).into_vec();
        let shared = &rows[..k];
        let a_rows: Vec<usize> = shared.iter().chain(&rows[k..degree]).copied().collect();
        let b_rows: Vec<usize> = shared.iter().chain(&rows[degree..]).copied().collect();
        columns.push(values(&mut inner, &a_rows));
        columns.push(values(&mut inner, &b_rows));
        pairs.push((2 * p, 2 * p + 1));
    }
    while columns.len() < n_cols {
        let rows = sample(&mut inner, n_rows, degree).into_vec();
        columns.push(values(&mut inner, &rows));
    }
    Planted { n_rows, columns, pairs }
}

/// Follower graph as `src<TAB>dst[<TAB>weight]` lines, where `src` follows `dst`.
///
/// Accounts are grouped into clusters of `cluster` vertices that share a pool
/// of `pool` followers. In-degrees are Pareto with minimum `min_degree` and
/// shape `alpha`, capped at `max_degree`; each follower comes from the
/// cluster's pool with probability `p_pool` and uniformly otherwise.
pub struct FollowerGraph {
    pub n: usize,
    pub cluster: usize,
    pub pool: usize,
    pub min_degree: f64,
    pub alpha: f64,
    pub max_degree: usize,
    pub p_pool: f64,
    /// Emit uniform `(0.5, 2)` interaction weights as a third column.
    pub weighted: bool,
}

impl FollowerGraph {
    pub fn desk_scale() -> Self {
        Self { n: 5000, cluster: 25, pool: 20, min_degree: 8.0, alpha: 1.3, max_degree: 300, p_pool: 0.9, weighted: false }
    }

    pub fn edges_tsv(&self, seed: u64) -> String {
        let mut rng = rng(seed);
        let n_clusters = self.n.div_ceil(self.cluster);
        let pools: Vec<Vec<usize>> = (0..n_clusters).map(|_| sample(&mut rng, self.n, self.pool).into_vec()).collect();
        let mut out = String::new();
        for v in 0..self.n {
            let u: f64 = rng.random_range(f64::EPSILON..1.0);
            let degree = ((self.min_degree * u.powf(-1.0 / self.alpha)) as usize).min(self.max_degree);
            let pool = &pools[v / self.cluster];
            let mut followers = BTreeSet::new();
            let mut attempts = 0;
            while followers.len() < degree && attempts < 20 * degree {
                attempts += 1;
                let f = if rng.random_bool(self.p_pool) {
                    pool[rng.random_range(0..pool.len())]
                } else {
                    rng.random_range(0..self.n)
                };
                if f != v {
                    followers.insert(f);
                }
            }
            for f in followers {
                if self.weighted {
                    writeln!(out, "{f}\t{v}\t{}", rng.random_range(0.5..2.0)).unwrap();
                } else {
                    writeln!(out, "{f}\t{v}").unwrap();
                }
            }
        }
        out
    }
}

/// Two unit columns of `degree` equal entries sharing `shared` rows, so the
/// exact dot is `shared / degree`.
pub fn fixed_pair(degree: usize, shared: usize) -> SparseColumnMatrix {
    let a: Vec<(usize, f64)> = (0..degree).map(|r| (r, 1.0)).collect();
    let b: Vec<(usize, f64)> = (degree - shared..2 * degree - shared).map(|r| (r, 1.0)).collect();
    SparseColumnMatrix::from_columns(2 * degree - shared, vec![a, b]).unwrap()
}

/// Cosine of two raw sparse columns, computed without the library.
pub fn sparse_cosine(a: &[(usize, f64)], b: &[(usize, f64)]) -> f64 {
    let norm = |c: &[(usize, f64)]| c.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt();
    let lookup: std::collections::HashMap<usize, f64> = b.iter().copied().collect();
    let dot: f64 = a.iter().filter_map(|(r, x)| lookup.get(r).map(|y| x * y)).sum();
    dot / (norm(a) * norm(b))
}
