//! Grouped samples, block correlation matrices and the data pipeline
//! (normal-scores correlation, log returns, rolling windows).

use std::ops::Range;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal::{normal_scores, TiePolicy};

/// Partition of `q` variables into `k` consecutive groups.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct GroupStructure {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
}

impl GroupStructure {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::Dimension("at least one group is required".into()));
        }
        if let Some(pos) = sizes.iter().position(|&d| d == 0) {
            return Err(Error::Dimension(format!("group {pos} has size 0")));
        }
        let mut offsets = Vec::with_capacity(sizes.len() + 1);
        let mut acc = 0;
        offsets.push(0);
        for &d in &sizes {
            acc += d;
            offsets.push(acc);
        }
        Ok(Self { sizes, offsets })
    }

    /// Parse a comma-separated size list such as `"2,2"`.
    pub fn parse(spec: &str) -> Result<Self> {
        let sizes = spec
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Parse(format!("bad group size {s:?} in {spec:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(sizes)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn k(&self) -> usize {
        self.sizes.len()
    }

    pub fn q(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    /// Column range of group `i`.
    pub fn range(&self, i: usize) -> Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    pub fn ranges(&self) -> impl Iterator<Item = Range<usize>> + '_ {
        (0..self.k()).map(move |i| self.range(i))
    }

    /// Group index of column `c`.
    pub fn group_of(&self, c: usize) -> usize {
        self.offsets[1..].partition_point(|&end| end <= c)
    }

    /// Structure obtained by appending further groups.
    pub fn extended(&self, more: &[usize]) -> Result<Self> {
        let mut sizes = self.sizes.clone();
        sizes.extend_from_slice(more);
        Self::new(sizes)
    }
}

impl TryFrom<Vec<usize>> for GroupStructure {
    type Error = Error;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<GroupStructure> for Vec<usize> {
    fn from(g: GroupStructure) -> Self {
        g.sizes
    }
}

/// `n` observations of `q` continuous variables, columns ordered group by group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedSample {
    data: DMatrix<f64>,
    structure: GroupStructure,
    column_labels: Vec<String>,
    row_labels: Option<Vec<String>>,
}

impl GroupedSample {
    pub fn new(data: DMatrix<f64>, structure: GroupStructure) -> Result<Self> {
        let labels = (1..=data.ncols()).map(|i| format!("X{i}")).collect();
        Self::with_labels(data, structure, labels, None)
    }

    pub fn with_labels(
        data: DMatrix<f64>,
        structure: GroupStructure,
        column_labels: Vec<String>,
        row_labels: Option<Vec<String>>,
    ) -> Result<Self> {
        if data.ncols() != structure.q() {
            return Err(Error::Dimension(format!(
                "groups {:?} need {} columns, data has {}",
                structure.sizes(),
                structure.q(),
                data.ncols()
            )));
        }
        if data.nrows() < 2 {
            return Err(Error::Dimension(format!("need at least 2 rows, got {}", data.nrows())));
        }
        if column_labels.len() != data.ncols() {
            return Err(Error::Dimension("column label count does not match data".into()));
        }
        if let Some(rl) = &row_labels {
            if rl.len() != data.nrows() {
                return Err(Error::Dimension("row label count does not match data".into()));
            }
        }
        for c in 0..data.ncols() {
            for r in 0..data.nrows() {
                if !data[(r, c)].is_finite() {
                    return Err(Error::MissingValue { row: r, column: c });
                }
            }
        }
        Ok(Self { data, structure, column_labels, row_labels })
    }

    /// Build from row-major observations.
    pub fn from_rows(rows: &[Vec<f64>], structure: GroupStructure) -> Result<Self> {
        let q = structure.q();
        if let Some(bad) = rows.iter().position(|r| r.len() != q) {
            return Err(Error::Dimension(format!("row {bad} does not have {q} entries")));
        }
        let data = DMatrix::from_fn(rows.len(), q, |i, j| rows[i][j]);
        Self::new(data, structure)
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn q(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn structure(&self) -> &GroupStructure {
        &self.structure
    }

    pub fn column_labels(&self) -> &[String] {
        &self.column_labels
    }

    pub fn row_labels(&self) -> Option<&[String]> {
        self.row_labels.as_deref()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.data.column(j).iter().copied().collect()
    }

    /// Columns containing at least one repeated value.
    pub fn tied_columns(&self) -> Vec<usize> {
        (0..self.q())
            .filter(|&j| {
                let mut c = self.column(j);
                c.sort_unstable_by(f64::total_cmp);
                c.windows(2).any(|w| w[0] == w[1])
            })
            .collect()
    }

    /// Rows `range` as a new sample.
    pub fn slice_rows(&self, range: Range<usize>) -> Result<Self> {
        if range.end > self.n() || range.start >= range.end {
            return Err(Error::Dimension(format!("row range {range:?} outside 0..{}", self.n())));
        }
        let data = self.data.rows(range.start, range.len()).into_owned();
        let row_labels = self.row_labels.as_ref().map(|l| l[range.clone()].to_vec());
        Self::with_labels(data, self.structure.clone(), self.column_labels.clone(), row_labels)
    }

    /// Keep only the listed rows, in the given order (used for bootstrap resamples).
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let data = DMatrix::from_fn(rows.len(), self.q(), |i, j| self.data[(rows[i], j)]);
        Self::with_labels(data, self.structure.clone(), self.column_labels.clone(), None)
    }

    /// Reorder columns and regroup; `perm[c]` is the source column of new column `c`.
    pub fn permute_columns(&self, perm: &[usize], structure: GroupStructure) -> Result<Self> {
        if perm.len() != self.q() {
            return Err(Error::Dimension("permutation length does not match q".into()));
        }
        self.select_columns(perm, structure)
    }

    /// New sample made of the listed columns, in that order, grouped by `structure`.
    pub fn select_columns(&self, cols: &[usize], structure: GroupStructure) -> Result<Self> {
        if let Some(&bad) = cols.iter().find(|&&c| c >= self.q()) {
            return Err(Error::Dimension(format!("column {bad} is out of range for q = {}", self.q())));
        }
        let data = DMatrix::from_fn(self.n(), cols.len(), |i, j| self.data[(i, cols[j])]);
        let labels = cols.iter().map(|&p| self.column_labels[p].clone()).collect();
        Self::with_labels(data, structure, labels, self.row_labels.clone())
    }

    /// Apply `f` to every entry of column `j`.
    pub fn map_column(&self, j: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let mut data = self.data.clone();
        for v in data.column_mut(j).iter_mut() {
            *v = f(*v);
        }
        Self::with_labels(data, self.structure.clone(), self.column_labels.clone(), self.row_labels.clone())
    }

    /// Row label of row `r`, defaulting to its 1-based index.
    pub fn row_label(&self, r: usize) -> String {
        match &self.row_labels {
            Some(l) => l[r].clone(),
            None => (r + 1).to_string(),
        }
    }
}

/// A symmetric correlation matrix with unit diagonal and a group partition.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockCorrelationMatrix {
    entries: DMatrix<f64>,
    structure: GroupStructure,
}

impl BlockCorrelationMatrix {
    /// Validate and wrap a correlation matrix.
    pub fn new(entries: DMatrix<f64>, structure: GroupStructure) -> Result<Self> {
        let q = structure.q();
        if entries.nrows() != q || entries.ncols() != q {
            return Err(Error::Dimension(format!(
                "matrix is {}x{}, groups need {q}x{q}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        for i in 0..q {
            if entries[(i, i)] != 1.0 {
                return Err(Error::InvalidParameter(format!(
                    "diagonal entry {i} is {}, expected 1",
                    entries[(i, i)]
                )));
            }
            for j in 0..q {
                let v = entries[(i, j)];
                if !(-1.0..=1.0).contains(&v) {
                    return Err(Error::InvalidParameter(format!("entry ({i},{j}) = {v} outside [-1,1]")));
                }
                if (v - entries[(j, i)]).abs() > 1e-12 {
                    return Err(Error::InvalidParameter(format!("matrix is not symmetric at ({i},{j})")));
                }
            }
        }
        let sym = (&entries + entries.transpose()) * 0.5;
        let min_eig = sym.clone().symmetric_eigenvalues().min();
        if min_eig < -1e-10 {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(Self { entries: sym, structure })
    }

    /// Correlation matrix of a covariance matrix, `D^{-1/2} Σ D^{-1/2}`.
    pub fn from_covariance(sigma: &DMatrix<f64>, structure: GroupStructure) -> Result<Self> {
        let q = sigma.nrows();
        let d: Vec<f64> = (0..q).map(|i| sigma[(i, i)]).collect();
        if d.iter().any(|&x| !(x > 0.0)) {
            return Err(Error::InvalidParameter("covariance diagonal must be positive".into()));
        }
        let r = DMatrix::from_fn(q, q, |i, j| {
            if i == j {
                1.0
            } else {
                (sigma[(i, j)] / (d[i] * d[j]).sqrt()).clamp(-1.0, 1.0)
            }
        });
        Self::new(r, structure)
    }

    pub fn identity(structure: GroupStructure) -> Self {
        let q = structure.q();
        Self { entries: DMatrix::identity(q, q), structure }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn structure(&self) -> &GroupStructure {
        &self.structure
    }

    pub fn q(&self) -> usize {
        self.structure.q()
    }

    /// Block `R_ij`.
    pub fn block(&self, i: usize, j: usize) -> DMatrix<f64> {
        let (ri, rj) = (self.structure.range(i), self.structure.range(j));
        self.entries.view((ri.start, rj.start), (ri.len(), rj.len())).into_owned()
    }

    /// The block-diagonal matrix `R₀` (cross-group blocks zeroed).
    pub fn r0(&self) -> DMatrix<f64> {
        let q = self.q();
        DMatrix::from_fn(q, q, |i, j| {
            if self.structure.group_of(i) == self.structure.group_of(j) {
                self.entries[(i, j)]
            } else {
                0.0
            }
        })
    }

    /// True when every cross-group entry is exactly zero.
    pub fn is_block_diagonal(&self) -> bool {
        let q = self.q();
        (0..q).all(|i| {
            (0..q).all(|j| {
                self.structure.group_of(i) == self.structure.group_of(j) || self.entries[(i, j)] == 0.0
            })
        })
    }

    /// Reorder rows and columns (`perm[c]` is the source index of new index `c`).
    pub fn permute(&self, perm: &[usize], structure: GroupStructure) -> Result<Self> {
        let q = self.q();
        if perm.len() != q || structure.q() != q {
            return Err(Error::Dimension("permutation does not match dimension".into()));
        }
        let m = DMatrix::from_fn(q, q, |i, j| self.entries[(perm[i], perm[j])]);
        Ok(Self { entries: m, structure })
    }
}

#[derive(Serialize, Deserialize)]
struct CorrelationRepr {
    sizes: Vec<usize>,
    matrix: Vec<Vec<f64>>,
}

impl Serialize for BlockCorrelationMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let q = self.q();
        CorrelationRepr {
            sizes: self.structure.sizes().to_vec(),
            matrix: (0..q).map(|i| (0..q).map(|j| self.entries[(i, j)]).collect()).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for BlockCorrelationMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = CorrelationRepr::deserialize(d)?;
        let structure = GroupStructure::new(repr.sizes).map_err(D::Error::custom)?;
        let q = repr.matrix.len();
        if repr.matrix.iter().any(|r| r.len() != q) {
            return Err(D::Error::custom("correlation matrix must be square"));
        }
        let m = DMatrix::from_fn(q, q, |i, j| repr.matrix[i][j]);
        BlockCorrelationMatrix::new(m, structure).map_err(D::Error::custom)
    }
}

/// Normal scores of every column, in parallel.
pub fn sample_scores(sample: &GroupedSample, policy: TiePolicy) -> Result<Vec<Vec<f64>>> {
    (0..sample.q())
        .into_par_iter()
        .map(|j| {
            normal_scores(&sample.column(j), policy).map_err(|e| match e {
                Error::Ties { .. } => Error::Ties { column: j },
                Error::MissingValue { row, .. } => Error::MissingValue { row, column: j },
                other => other,
            })
        })
        .collect()
}

/// Normal-scores rank correlation matrix `R̂ₙ`.
///
/// Entry `(i, j)` is `Σ zᵢzⱼ / √(Σ zᵢ² Σ zⱼ²)`. Without ties both sums of
/// squares equal the data-independent normalizer `Σ φ⁻¹(ℓ/(n+1))²`; writing it
/// this way keeps identical columns at exactly 1 and reversed columns at
/// exactly −1. With midranks the score vectors are centred first, giving the
/// ordinary Pearson correlation of the scores.
pub fn normal_scores_correlation(sample: &GroupedSample, policy: TiePolicy) -> Result<BlockCorrelationMatrix> {
    let n = sample.n();
    if n < 3 {
        return Err(Error::Dimension(format!("normal-scores correlation needs n >= 3, got {n}")));
    }
    let mut scores = sample_scores(sample, policy)?;
    if policy == TiePolicy::Midrank {
        for z in scores.iter_mut() {
            let mean = z.iter().sum::<f64>() / n as f64;
            z.iter_mut().for_each(|v| *v -= mean);
        }
    }
    let norms: Vec<f64> = scores.iter().map(|z| z.iter().map(|v| v * v).sum::<f64>()).collect();
    if let Some(j) = norms.iter().position(|&s| !(s > 0.0)) {
        return Err(Error::DegenerateColumn { column: j });
    }
    let q = sample.q();
    let mut m = DMatrix::identity(q, q);
    let pairs: Vec<(usize, usize)> = (0..q).flat_map(|i| (i + 1..q).map(move |j| (i, j))).collect();
    let values: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let num: f64 = scores[i].iter().zip(&scores[j]).map(|(a, b)| a * b).sum();
            (num / (norms[i] * norms[j]).sqrt()).clamp(-1.0, 1.0)
        })
        .collect();
    for (&(i, j), &v) in pairs.iter().zip(&values) {
        m[(i, j)] = v;
        m[(j, i)] = v;
    }
    BlockCorrelationMatrix::new(m, sample.structure().clone())
}

/// Treatment of price rows with a missing entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MissingPolicy {
    #[default]
    DropRow,
    Error,
}

/// A price table that may contain missing cells.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceTable {
    pub rows: Vec<Vec<Option<f64>>>,
    pub column_labels: Vec<String>,
    pub row_labels: Option<Vec<String>>,
}

/// Daily log returns `ln p_{ℓ+1} − ln p_ℓ`.
///
/// Rows with a missing price are dropped (or rejected) before differencing,
/// so each return compares two consecutive complete rows. The label of a
/// return row is the label of its later price row.
pub fn log_returns(prices: &PriceTable, structure: GroupStructure, policy: MissingPolicy) -> Result<GroupedSample> {
    let q = structure.q();
    let mut kept: Vec<(usize, Vec<f64>)> = Vec::with_capacity(prices.rows.len());
    for (r, row) in prices.rows.iter().enumerate() {
        if row.len() != q {
            return Err(Error::Dimension(format!("price row {r} has {} entries, expected {q}", row.len())));
        }
        match row.iter().position(|v| v.is_none()) {
            Some(c) if policy == MissingPolicy::Error => return Err(Error::MissingValue { row: r, column: c }),
            Some(_) => continue,
            None => {}
        }
        let vals: Vec<f64> = row.iter().map(|v| v.unwrap()).collect();
        if let Some(c) = vals.iter().position(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::NonPositivePrice { row: r, column: c, value: vals[c] });
        }
        kept.push((r, vals));
    }
    if kept.len() < 3 {
        return Err(Error::Dimension(format!(
            "need at least 3 complete price rows, found {}",
            kept.len()
        )));
    }
    let n = kept.len() - 1;
    let data = DMatrix::from_fn(n, q, |i, j| kept[i + 1].1[j].ln() - kept[i].1[j].ln());
    let row_labels = prices
        .row_labels
        .as_ref()
        .map(|l| kept[1..].iter().map(|(r, _)| l[*r].clone()).collect());
    GroupedSample::with_labels(data, structure, prices.column_labels.clone(), row_labels)
}

/// A rolling window over the rows of a sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowSpec {
    /// 0-based row range.
    pub rows: Range<usize>,
    /// True for the final window when its length differs from the nominal one.
    pub tail: bool,
}

/// Windows starting every `step` rows. The last window that fits is stretched
/// to the final row, so no observation is left out.
pub fn window_ranges(n: usize, window: usize, step: usize) -> Result<Vec<WindowSpec>> {
    if step == 0 || window == 0 {
        return Err(Error::InvalidParameter("window and step must be positive".into()));
    }
    if window > n {
        return Err(Error::WindowTooLarge { window, n });
    }
    let mut out = Vec::new();
    let mut start = 0;
    while start + window <= n {
        out.push(WindowSpec { rows: start..start + window, tail: false });
        start += step;
    }
    let last = out.last_mut().unwrap();
    if last.rows.end < n {
        last.rows.end = n;
        last.tail = true;
    }
    Ok(out)
}

/// Split a sample into rolling windows, returning each window's 0-based start.
pub fn rolling_windows(sample: &GroupedSample, window: usize, step: usize) -> Result<Vec<(usize, GroupedSample)>> {
    window_ranges(sample.n(), window, step)?
        .into_iter()
        .map(|w| Ok((w.rows.start, sample.slice_rows(w.rows)?)))
        .collect()
}
