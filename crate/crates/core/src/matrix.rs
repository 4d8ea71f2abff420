//! Edge-list ingestion, degree-cap cleaning and the normalized column matrix.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// Bijection between external vertex ids and dense indices, in first-seen order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IdDictionary {
    ids: Vec<String>,
    index: HashMap<String, usize>,
}

impl IdDictionary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get_or_insert(&mut self, id: &str) -> usize {
        if let Some(&i) = self.index.get(id) {
            return i;
        }
        let i = self.ids.len();
        self.ids.push(id.to_owned());
        self.index.insert(id.to_owned(), i);
        i
    }

    pub fn lookup(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn external(&self, dense: usize) -> &str {
        &self.ids[dense]
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Writes `external_id<TAB>dense_index` lines.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> Result<()> {
        for (i, id) in self.ids.iter().enumerate() {
            writeln!(w, "{id}\t{i}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeFormat {
    /// `src<TAB>dst`, weight 1.0
    Pair,
    /// `src<TAB>dst<TAB>weight`
    WeightedTriple,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub weight: f64,
}

/// Directed weighted graph with dense vertex ids.
#[derive(Debug, Clone, PartialEq)]
pub struct RawGraph {
    pub ids: IdDictionary,
    pub edges: Vec<Edge>,
    /// Lines dropped at parse time because their weight was zero.
    pub dropped_zero_weight: usize,
}

impl RawGraph {
    pub fn with_ids(ids: IdDictionary) -> Self {
        Self { ids, edges: Vec::new(), dropped_zero_weight: 0 }
    }

    pub fn num_vertices(&self) -> usize {
        self.ids.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn out_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.num_vertices()];
        for e in &self.edges {
            deg[e.src] += 1;
        }
        deg
    }

    /// Writes the edges back out as `src<TAB>dst<TAB>weight` with external ids.
    pub fn write_tsv<W: Write>(&self, mut w: W, format: EdgeFormat) -> Result<()> {
        for e in &self.edges {
            let (s, d) = (self.ids.external(e.src), self.ids.external(e.dst));
            match format {
                EdgeFormat::Pair => writeln!(w, "{s}\t{d}")?,
                EdgeFormat::WeightedTriple => writeln!(w, "{s}\t{d}\t{}", e.weight)?,
            }
        }
        Ok(())
    }
}

pub fn ingest_edge_list<R: BufRead>(reader: R, format: EdgeFormat) -> Result<RawGraph> {
    ingest_edge_list_with(reader, format, IdDictionary::new())
}

/// Ingests edges, extending an existing id dictionary. Used when two edge
/// lists must share a row space.
pub fn ingest_edge_list_with<R: BufRead>(
    reader: R,
    format: EdgeFormat,
    ids: IdDictionary,
) -> Result<RawGraph> {
    let mut g = RawGraph::with_ids(ids);
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let Some((src, dst, weight)) = parse_edge_line(&line, line_no, format)? else {
            continue;
        };
        if weight == 0.0 {
            g.dropped_zero_weight += 1;
            continue;
        }
        let s = g.ids.get_or_insert(src);
        let d = g.ids.get_or_insert(dst);
        if !seen.insert((s, d)) {
            return Err(Error::DuplicateEdge { line: line_no, src: src.into(), dst: dst.into() });
        }
        g.edges.push(Edge { src: s, dst: d, weight });
    }
    Ok(g)
}

/// Splits one edge line. Blank lines and `#` comments give `None`.
fn parse_edge_line(line: &str, line_no: usize, format: EdgeFormat) -> Result<Option<(&str, &str, f64)>> {
    let line = line.trim_end_matches('\r');
    if line.trim().is_empty() || line.starts_with('#') {
        return Ok(None);
    }
    let fields: Vec<&str> = line.split('\t').collect();
    let weight = match (format, fields.len()) {
        (EdgeFormat::Pair, 2) => 1.0,
        (EdgeFormat::WeightedTriple, 3) => parse_weight(fields[2], line_no)?,
        (_, n) => {
            let want = if format == EdgeFormat::Pair { 2 } else { 3 };
            return Err(Error::Parse { line: line_no, msg: format!("expected {want} tab-separated fields, found {n}") });
        }
    };
    let (src, dst) = (fields[0], fields[1]);
    if src.is_empty() || dst.is_empty() {
        return Err(Error::Parse { line: line_no, msg: "empty vertex id".into() });
    }
    Ok(Some((src, dst, weight)))
}

fn parse_weight(field: &str, line: usize) -> Result<f64> {
    let w: f64 = field
        .trim()
        .parse()
        .map_err(|_| Error::Parse { line, msg: format!("bad weight {field:?}") })?;
    if !w.is_finite() {
        return Err(Error::Parse { line, msg: format!("non-finite weight {field:?}") });
    }
    if w < 0.0 {
        return Err(Error::Domain(format!("line {line}: negative weight {w}")));
    }
    Ok(w)
}

/// Drops every out-edge of vertices whose outdegree exceeds `cap`.
/// Vertices themselves stay in the dictionary.
pub fn clean_degree_cap(g: RawGraph, cap: usize) -> Result<RawGraph> {
    if cap == 0 {
        return Err(Error::Domain("degree cap must be at least 1".into()));
    }
    let deg = g.out_degrees();
    let RawGraph { ids, edges, dropped_zero_weight } = g;
    let edges = edges.into_iter().filter(|e| deg[e.src] <= cap).collect();
    Ok(RawGraph { ids, edges, dropped_zero_weight })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CleanStats {
    pub edges_in: usize,
    pub edges_out: usize,
    pub dropped_zero_weight: usize,
    pub capped_vertices: usize,
}

/// Streaming form of [`clean_degree_cap`] for inputs too large to hold as a
/// graph. `first` is read to count outdegrees and `second` (the same data) is
/// copied to `out` line by line, so kept lines, comments and blank lines come
/// through byte for byte. Zero-weight edges are dropped as in ingestion.
pub fn clean_degree_cap_stream<R1: BufRead, R2: BufRead, W: Write>(
    first: R1,
    mut second: R2,
    mut out: W,
    format: EdgeFormat,
    cap: usize,
) -> Result<CleanStats> {
    if cap == 0 {
        return Err(Error::Domain("degree cap must be at least 1".into()));
    }
    let mut stats = CleanStats::default();
    let mut degree: HashMap<String, usize> = HashMap::new();
    let mut seen: HashSet<(String, String)> = HashSet::new();
    for (i, line) in first.lines().enumerate() {
        let line = line?;
        if let Some((src, dst, w)) = parse_edge_line(&line, i + 1, format)? {
            if w == 0.0 {
                continue;
            }
            if !seen.insert((src.to_owned(), dst.to_owned())) {
                return Err(Error::DuplicateEdge { line: i + 1, src: src.into(), dst: dst.into() });
            }
            *degree.entry(src.to_owned()).or_default() += 1;
        }
    }
    drop(seen);
    stats.capped_vertices = degree.values().filter(|&&d| d > cap).count();
    let mut raw = Vec::new();
    let mut line_no = 0;
    while second.read_until(b'\n', &mut raw)? > 0 {
        line_no += 1;
        let text = std::str::from_utf8(&raw)
            .map_err(|_| Error::Parse { line: line_no, msg: "invalid UTF-8".into() })?;
        let keep = match parse_edge_line(text.trim_end_matches('\n'), line_no, format)? {
            None => true,
            Some((_, _, 0.0)) => {
                stats.dropped_zero_weight += 1;
                false
            }
            Some((src, _, _)) => {
                stats.edges_in += 1;
                let kept = degree.get(src).copied().unwrap_or(0) <= cap;
                stats.edges_out += kept as usize;
                kept
            }
        };
        if keep {
            out.write_all(&raw)?;
        }
        raw.clear();
    }
    Ok(stats)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    /// Column `a` holds the sources of edges pointing at `a`.
    InNeighborhood,
    /// Column `a` holds the targets of edges leaving `a`.
    OutNeighborhood,
}

/// Builds the square vertex-by-vertex matrix for a graph.
pub fn build_column_matrix(g: &RawGraph, orientation: Orientation) -> SparseColumnMatrix {
    let n = g.num_vertices();
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for e in &g.edges {
        match orientation {
            Orientation::InNeighborhood => cols[e.dst].push((e.src, e.weight)),
            Orientation::OutNeighborhood => cols[e.src].push((e.dst, e.weight)),
        }
    }
    // ingestion already rejected duplicates and non-positive weights
    SparseColumnMatrix::from_columns(n, cols).expect("validated graph")
}

/// Non-negative sparse matrix stored by column, each column scaled to unit L2
/// norm. A row-major copy is kept for the per-row samplers.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseColumnMatrix {
    n_rows: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
    row_ptr: Vec<usize>,
    row_col: Vec<usize>,
    row_val: Vec<f64>,
    column_l2_norms: Vec<f64>,
    row_l1_norms: Vec<f64>,
}

impl SparseColumnMatrix {
    /// Normalizes and stores the given columns. Entries must be positive and
    /// finite with distinct in-range rows; order within a column is free.
    pub fn from_columns(n_rows: usize, columns: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let n_cols = columns.len();
        let nnz: usize = columns.iter().map(Vec::len).sum();
        let mut col_ptr = Vec::with_capacity(n_cols + 1);
        let mut row_idx = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        let mut column_l2_norms = Vec::with_capacity(n_cols);
        col_ptr.push(0);
        for (a, mut col) in columns.into_iter().enumerate() {
            col.sort_by_key(|&(r, _)| r);
            for w in col.windows(2) {
                if w[0].0 == w[1].0 {
                    return Err(Error::Domain(format!("column {a}: duplicate row {}", w[0].0)));
                }
            }
            for &(r, v) in &col {
                if r >= n_rows {
                    return Err(Error::DimensionMismatch(format!(
                        "column {a}: row {r} out of range for {n_rows} rows"
                    )));
                }
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::Domain(format!("column {a}: entry {v} is not positive")));
                }
            }
            let norm = col.iter().map(|&(_, v)| v * v).sum::<f64>().sqrt();
            column_l2_norms.push(norm);
            for (r, v) in col {
                row_idx.push(r);
                values.push(v / norm);
            }
            col_ptr.push(row_idx.len());
        }

        let mut row_ptr = vec![0usize; n_rows + 1];
        for &r in &row_idx {
            row_ptr[r + 1] += 1;
        }
        for r in 0..n_rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        let mut fill = row_ptr.clone();
        let mut row_col = vec![0; nnz];
        let mut row_val = vec![0.0; nnz];
        for a in 0..n_cols {
            for k in col_ptr[a]..col_ptr[a + 1] {
                let r = row_idx[k];
                row_col[fill[r]] = a;
                row_val[fill[r]] = values[k];
                fill[r] += 1;
            }
        }
        let row_l1_norms = (0..n_rows)
            .map(|r| row_val[row_ptr[r]..row_ptr[r + 1]].iter().sum())
            .collect();

        Ok(Self {
            n_rows,
            col_ptr,
            row_idx,
            values,
            row_ptr,
            row_col,
            row_val,
            column_l2_norms,
            row_l1_norms,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.column_l2_norms.len()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Sorted row indices and normalized values of column `a`.
    pub fn column(&self, a: usize) -> (&[usize], &[f64]) {
        let span = self.col_ptr[a]..self.col_ptr[a + 1];
        (&self.row_idx[span.clone()], &self.values[span])
    }

    pub fn column_nnz(&self, a: usize) -> usize {
        self.col_ptr[a + 1] - self.col_ptr[a]
    }

    pub fn is_empty_column(&self, a: usize) -> bool {
        self.column_nnz(a) == 0
    }

    /// Column indices (ascending) and normalized values of row `r`.
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        (&self.row_col[span.clone()], &self.row_val[span])
    }

    pub fn row_nnz(&self, r: usize) -> usize {
        self.row_ptr[r + 1] - self.row_ptr[r]
    }

    /// L2 norms of the columns before normalization.
    pub fn column_l2_norms(&self) -> &[f64] {
        &self.column_l2_norms
    }

    /// L1 norms of the normalized rows.
    pub fn row_l1_norms(&self) -> &[f64] {
        &self.row_l1_norms
    }

    /// Exact dot product of normalized column `a` of `self` and column `b` of `other`.
    pub fn column_dot(&self, a: usize, other: &SparseColumnMatrix, b: usize) -> f64 {
        let (ra, va) = self.column(a);
        let (rb, vb) = other.column(b);
        let (mut i, mut j, mut acc) = (0, 0, 0.0);
        while i < ra.len() && j < rb.len() {
            match ra[i].cmp(&rb[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += va[i] * vb[j];
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    /// Dumps the normalized matrix as `column<TAB>row<TAB>value` after a
    /// `# rows=<d> cols=<n>` header.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# rows={} cols={}", self.n_rows, self.n_cols())?;
        for a in 0..self.n_cols() {
            let (rows, vals) = self.column(a);
            for (r, v) in rows.iter().zip(vals) {
                writeln!(w, "{a}\t{r}\t{v}")?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ingest(s: &str, f: EdgeFormat) -> Result<RawGraph> {
        ingest_edge_list(s.as_bytes(), f)
    }

    #[test]
    fn ingest_small_triangle() {
        let g = ingest("0\t1\n0\t2\n1\t2\n", EdgeFormat::Pair).unwrap();
        assert_eq!(g.num_vertices(), 3);
        assert_eq!(g.num_edges(), 3);
        assert_eq!(g.ids.external(2), "2");
        assert!(g.edges.iter().all(|e| e.weight == 1.0));
    }

    #[test]
    fn ingest_empty() {
        let g = ingest("", EdgeFormat::Pair).unwrap();
        assert_eq!((g.num_vertices(), g.num_edges()), (0, 0));
    }

    #[test]
    fn ingest_rejects_negative_weight() {
        let err = ingest("a\tb\t-1\n", EdgeFormat::WeightedTriple).unwrap_err();
        assert!(matches!(err, Error::Domain(_)), "{err}");
    }

    #[test]
    fn ingest_reports_line_numbers() {
        let err = ingest("a\tb\nc\n", EdgeFormat::Pair).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = ingest("a\tb\t1\nb\tc\tx\n", EdgeFormat::WeightedTriple).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn ingest_rejects_duplicates() {
        let err = ingest("a\tb\nb\ta\na\tb\n", EdgeFormat::Pair).unwrap_err();
        assert!(matches!(err, Error::DuplicateEdge { line: 3, .. }), "{err}");
    }

    #[test]
    fn ingest_drops_zero_weights_and_keeps_first_seen_order() {
        let g = ingest("x\ty\t0\nz\tx\t2.5\n# note\n\ny\tz\t1\n", EdgeFormat::WeightedTriple).unwrap();
        assert_eq!(g.dropped_zero_weight, 1);
        assert_eq!(g.num_edges(), 2);
        assert_eq!(g.ids.lookup("z"), Some(0));
        assert_eq!(g.ids.lookup("x"), Some(1));
        assert_eq!(g.ids.lookup("y"), Some(2));
    }

    #[test]
    fn id_dictionary_tsv() {
        let g = ingest("u\tv\n", EdgeFormat::Pair).unwrap();
        let mut out = Vec::new();
        g.ids.write_tsv(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "u\t0\nv\t1\n");
    }

    fn star(leaves: usize) -> RawGraph {
        let text: String = (1..=leaves).map(|i| format!("0\t{i}\n")).collect();
        ingest(&text, EdgeFormat::Pair).unwrap()
    }

    #[test]
    fn cap_removes_all_edges_of_hub_but_keeps_vertex() {
        let g = clean_degree_cap(star(20), 10).unwrap();
        assert_eq!(g.num_edges(), 0);
        assert_eq!(g.num_vertices(), 21);

        let g = clean_degree_cap(star(11), 10).unwrap();
        assert_eq!(g.num_edges(), 0);
        assert_eq!(g.ids.lookup("0"), Some(0));
    }

    #[test]
    fn cap_noop_when_under() {
        let g = star(10);
        assert_eq!(clean_degree_cap(g.clone(), 10).unwrap(), g);
        assert!(clean_degree_cap(g, 0).is_err());
    }

    #[test]
    fn unweighted_column_is_inverse_sqrt_degree() {
        let g = ingest("1\t0\n2\t0\n3\t0\n4\t0\n", EdgeFormat::Pair).unwrap();
        let m = build_column_matrix(&g, Orientation::InNeighborhood);
        let a = g.ids.lookup("0").unwrap();
        let (rows, vals) = m.column(a);
        assert_eq!(rows.len(), 4);
        assert!(vals.iter().all(|&v| v == 0.5));
        assert_eq!(m.column_l2_norms()[a], 2.0);
    }

    #[test]
    fn identical_neighborhoods_give_cosine_one() {
        let g = ingest("x\ta\ny\ta\nx\tb\ny\tb\n", EdgeFormat::Pair).unwrap();
        let m = build_column_matrix(&g, Orientation::InNeighborhood);
        let (a, b) = (g.ids.lookup("a").unwrap(), g.ids.lookup("b").unwrap());
        assert_eq!(m.column(a), m.column(b));
        assert!((m.column_dot(a, &m, b) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn path_graph_in_orientation() {
        let g = ingest("0\t1\n1\t2\n", EdgeFormat::Pair).unwrap();
        let m = build_column_matrix(&g, Orientation::InNeighborhood);
        assert!(m.is_empty_column(0));
        assert_eq!(m.column_l2_norms()[0], 0.0);
        assert_eq!(m.column(1), (&[0usize][..], &[1.0][..]));
        assert_eq!(m.column(2), (&[1usize][..], &[1.0][..]));

        let m = build_column_matrix(&g, Orientation::OutNeighborhood);
        assert_eq!(m.column(0), (&[1usize][..], &[1.0][..]));
        assert!(m.is_empty_column(2));
    }

    #[test]
    fn from_columns_validation() {
        assert!(SparseColumnMatrix::from_columns(2, vec![vec![(2, 1.0)]]).is_err());
        assert!(SparseColumnMatrix::from_columns(2, vec![vec![(0, -1.0)]]).is_err());
        assert!(SparseColumnMatrix::from_columns(2, vec![vec![(0, 1.0), (0, 2.0)]]).is_err());
    }

    #[test]
    fn dump_format() {
        let m = SparseColumnMatrix::from_columns(2, vec![vec![(1, 3.0)], vec![]]).unwrap();
        let mut out = Vec::new();
        m.write_tsv(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "# rows=2 cols=2\n0\t1\t1\n");
    }

    fn random_columns(n_rows: usize) -> impl Strategy<Value = Vec<Vec<(usize, f64)>>> {
        prop::collection::vec(
            prop::collection::btree_map(0..n_rows, 0.01f64..10.0, 0..12)
                .prop_map(|m| m.into_iter().collect::<Vec<_>>()),
            1..50,
        )
    }

    fn clean_stream(text: &str, format: EdgeFormat, cap: usize) -> Result<(String, CleanStats)> {
        let mut out = Vec::new();
        let stats = clean_degree_cap_stream(text.as_bytes(), text.as_bytes(), &mut out, format, cap)?;
        Ok((String::from_utf8(out).unwrap(), stats))
    }

    #[test]
    fn stream_clean_passthrough_is_byte_identical() {
        let text = "# header\n0\t1\n\n1\t2\r\n2\t0";
        let (out, stats) = clean_stream(text, EdgeFormat::Pair, 10_000).unwrap();
        assert_eq!(out, text);
        assert_eq!((stats.edges_in, stats.edges_out, stats.capped_vertices), (3, 3, 0));
    }

    #[test]
    fn stream_clean_drops_hub_lines_and_zero_weights() {
        let mut text: String = (1..=4).map(|i| format!("h\t{i}\t1.5\n")).collect();
        text.push_str("1\t2\t0\n2\t3\t2\n");
        let (out, stats) = clean_stream(&text, EdgeFormat::WeightedTriple, 3).unwrap();
        assert_eq!(out, "2\t3\t2\n");
        assert_eq!(stats, CleanStats { edges_in: 5, edges_out: 1, dropped_zero_weight: 1, capped_vertices: 1 });
        assert!(matches!(clean_stream("a\tb\na\tb\n", EdgeFormat::Pair, 5), Err(Error::DuplicateEdge { line: 2, .. })));
        assert!(clean_stream("a\tb\n", EdgeFormat::Pair, 0).is_err());
    }

    proptest! {
        #[test]
        fn normalized_columns_have_unit_norm(cols in random_columns(50)) {
            let m = SparseColumnMatrix::from_columns(50, cols).unwrap();
            for a in 0..m.n_cols() {
                let (rows, vals) = m.column(a);
                prop_assert!(rows.windows(2).all(|w| w[0] < w[1]));
                if !rows.is_empty() {
                    let n2: f64 = vals.iter().map(|v| v * v).sum();
                    prop_assert!((n2.sqrt() - 1.0).abs() < 1e-12);
                }
            }
            for r in 0..m.n_rows() {
                let (_, vals) = m.row(r);
                let s: f64 = vals.iter().sum();
                let l1 = m.row_l1_norms()[r];
                prop_assert!((s - l1).abs() <= 1e-9 * l1.max(1e-300));
            }
        }

        #[test]
        fn row_norm_product_matches_gramian_l1(
            a_cols in random_columns(50),
            b_cols in random_columns(50),
        ) {
            let a = SparseColumnMatrix::from_columns(50, a_cols).unwrap();
            let b = SparseColumnMatrix::from_columns(50, b_cols).unwrap();
            let via_rows: f64 = (0..50).map(|r| a.row_l1_norms()[r] * b.row_l1_norms()[r]).sum();
            let mut brute = 0.0;
            for i in 0..a.n_cols() {
                for j in 0..b.n_cols() {
                    let d = a.column_dot(i, &b, j);
                    prop_assert!((0.0..=1.0 + 1e-12).contains(&d));
                    brute += d;
                }
            }
            prop_assert!((via_rows - brute).abs() <= 1e-6 * brute.max(1e-12));
        }

        #[test]
        fn degree_cap_is_idempotent(
            edges in prop::collection::btree_set((0u8..30, 0u8..30), 0..200),
            cap in 1usize..8,
        ) {
            let text: String = edges.iter().map(|(s, d)| format!("{s}\t{d}\n")).collect();
            let g = ingest_edge_list(text.as_bytes(), EdgeFormat::Pair).unwrap();
            let once = clean_degree_cap(g, cap).unwrap();
            prop_assert!(once.out_degrees().iter().all(|&d| d <= cap));
            let twice = clean_degree_cap(once.clone(), cap).unwrap();
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn stream_clean_matches_in_memory(edges in prop::collection::btree_set((0u8..12, 0u8..12), 0..60), cap in 1usize..8) {
            let text: String = edges.iter().map(|(a, b)| format!("{a}\t{b}\n")).collect();
            let (out, _) = clean_stream(&text, EdgeFormat::Pair, cap).unwrap();
            let g = clean_degree_cap(ingest(&text, EdgeFormat::Pair).unwrap(), cap).unwrap();
            let mut expected = Vec::new();
            g.write_tsv(&mut expected, EdgeFormat::Pair).unwrap();
            prop_assert_eq!(out.into_bytes(), expected);
        }
    }
}
