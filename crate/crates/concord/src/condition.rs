//! Retention of items by panel agreement and construction of the binary
//! agreement matrix.
//!
//! A condition function keeps the items on which the panel agrees strongly
//! enough and assigns each kept item its unique modal dimension. Two rules
//! are provided: a concordance index (at least `c`% of the panel on one
//! dimension) and a content-validity ratio with a caller-supplied threshold.
//! The W matrix then scores every specialist against the assigned dimension.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::judgement::{DimensionLabel, JudgementMatrix};

/// The dimensions receiving the most votes for one item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MajoritySet {
    pub item: String,
    /// Modal dimensions, in dimension-set order.
    pub dimensions: Vec<DimensionLabel>,
    /// Votes on each modal dimension.
    pub max_count: usize,
}

impl MajoritySet {
    /// True when exactly one dimension attains the maximum.
    pub fn is_unique(&self) -> bool {
        self.dimensions.len() == 1
    }
}

/// Retention rule applied to every item.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ConditionSpec {
    /// Keep items whose modal dimension gathers at least `percent`% of the
    /// panel. Integer percent in `50..=100`; the comparison is exact integer
    /// arithmetic (`100·max_count ≥ percent·s`).
    ConcordanceIndex { percent: u32 },
    /// Keep items whose content-validity ratio `(n_e − s/2)/(s/2)` reaches
    /// `threshold`, with `n_e` the modal head-count.
    ContentValidityRatio { threshold: f64 },
}

impl ConditionSpec {
    pub fn concordance(percent: u32) -> Result<Self> {
        if !(50..=100).contains(&percent) {
            return Err(Error::Config(format!(
                "concordance percent {percent} outside 50..=100"
            )));
        }
        Ok(Self::ConcordanceIndex { percent })
    }

    pub fn content_validity(threshold: f64) -> Result<Self> {
        if !threshold.is_finite() || !(-1.0..=1.0).contains(&threshold) {
            return Err(Error::Config(format!(
                "content-validity threshold {threshold} outside [-1, 1]"
            )));
        }
        Ok(Self::ContentValidityRatio { threshold })
    }
}

/// Why an item was dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExclusionReason {
    /// Agreement reached the threshold but two or more dimensions tied.
    Tie,
    /// Agreement below the threshold.
    BelowThreshold,
}

impl ExclusionReason {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Tie => "tie",
            Self::BelowThreshold => "below-threshold",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RetainedItem {
    pub item: String,
    pub dimension: DimensionLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExcludedItem {
    pub item: String,
    pub reason: ExclusionReason,
}

/// Partition of the items into retained (with their assigned dimension) and
/// excluded, both in original item order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RetentionResult {
    pub retained: Vec<RetainedItem>,
    pub excluded: Vec<ExcludedItem>,
}

impl RetentionResult {
    pub fn n_retained(&self) -> usize {
        self.retained.len()
    }

    pub fn retained_ids(&self) -> Vec<&str> {
        self.retained.iter().map(|r| r.item.as_str()).collect()
    }

    pub fn excluded_ids(&self) -> Vec<&str> {
        self.excluded.iter().map(|e| e.item.as_str()).collect()
    }

    /// CSV rendering: `item,status,dimension,reason`. Retained items first,
    /// then excluded, both in item order.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("item,status,dimension,reason\n");
        for kept in &self.retained {
            let _ = writeln!(out, "{},retained,{},", kept.item, kept.dimension);
        }
        for dropped in &self.excluded {
            let _ = writeln!(out, "{},excluded,,{}", dropped.item, dropped.reason.as_str());
        }
        out
    }
}

fn counts_for_row(matrix: &JudgementMatrix, item: usize) -> Vec<usize> {
    let mut counts = vec![0usize; matrix.n_dimensions()];
    for &d in matrix.row_indices(item) {
        counts[usize::from(d)] += 1;
    }
    counts
}

fn majority_of_counts(counts: &[usize]) -> (usize, Vec<usize>) {
    let max = counts.iter().copied().max().unwrap_or(0);
    let modes = counts
        .iter()
        .enumerate()
        .filter(|&(_, &c)| c == max && max > 0)
        .map(|(d, _)| d)
        .collect();
    (max, modes)
}

fn item_index(matrix: &JudgementMatrix, item_id: &str) -> Result<usize> {
    matrix
        .item_position(item_id)
        .ok_or_else(|| Error::UnknownItem(item_id.to_owned()))
}

/// The set of dimensions on which the most specialists agree for `item_id`.
pub fn majority_set(matrix: &JudgementMatrix, item_id: &str) -> Result<MajoritySet> {
    let item = item_index(matrix, item_id)?;
    let counts = counts_for_row(matrix, item);
    let (max_count, modes) = majority_of_counts(&counts);
    Ok(MajoritySet {
        item: item_id.to_owned(),
        dimensions: modes
            .into_iter()
            .map(|d| matrix.dimensions()[d].clone())
            .collect(),
        max_count,
    })
}

/// Fraction of the panel on the modal dimension: `max_count / s`.
pub fn concordance_fraction(matrix: &JudgementMatrix, item_id: &str) -> Result<f64> {
    let item = item_index(matrix, item_id)?;
    let counts = counts_for_row(matrix, item);
    let (max_count, _) = majority_of_counts(&counts);
    Ok(max_count as f64 / matrix.n_specialists() as f64)
}

/// Content-validity ratio `(n_e − s/2)/(s/2)` with `n_e` the modal
/// head-count.
pub fn cvr(matrix: &JudgementMatrix, item_id: &str) -> Result<f64> {
    let item = item_index(matrix, item_id)?;
    let counts = counts_for_row(matrix, item);
    let (n_e, _) = majority_of_counts(&counts);
    let half = matrix.n_specialists() as f64 / 2.0;
    Ok((n_e as f64 - half) / half)
}

/// Applies the retention rule to every item. An item is kept when the rule's
/// agreement bound holds and its modal dimension is unique; the assigned
/// dimension is that mode.
pub fn apply_condition(matrix: &JudgementMatrix, spec: &ConditionSpec) -> RetentionResult {
    let s = matrix.n_specialists();
    let mut retained = Vec::new();
    let mut excluded = Vec::new();
    for item in 0..matrix.n_items() {
        let counts = counts_for_row(matrix, item);
        let (max_count, modes) = majority_of_counts(&counts);
        let id = matrix.items()[item].clone();
        let meets = match *spec {
            ConditionSpec::ConcordanceIndex { percent } => {
                100 * max_count >= (percent as usize) * s
            }
            ConditionSpec::ContentValidityRatio { threshold } => {
                let half = s as f64 / 2.0;
                (max_count as f64 - half) / half >= threshold
            }
        };
        if !meets {
            excluded.push(ExcludedItem {
                item: id,
                reason: ExclusionReason::BelowThreshold,
            });
        } else if modes.len() != 1 {
            excluded.push(ExcludedItem {
                item: id,
                reason: ExclusionReason::Tie,
            });
        } else {
            retained.push(RetainedItem {
                item: id,
                dimension: matrix.dimensions()[modes[0]].clone(),
            });
        }
    }
    RetentionResult { retained, excluded }
}

/// Which table rows feed the agreement matrix.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RowSelection {
    /// Rows are exactly the retained items.
    #[default]
    Retained,
    /// Rows are the first `v` items in table order, where `v` counts the
    /// items whose modal dimension holds a strict majority (more than half
    /// the panel). Each row is scored against the whole-panel modal
    /// dimension, ties resolved to the earliest modal label in the row.
    /// Matches workflows that slice the judgement table by retained-item
    /// count instead of filtering by the retained ids.
    LeadingCount,
}

/// Binary items × specialists agreement table with row, column and grand
/// totals.
#[derive(Debug, Clone, PartialEq)]
pub struct WMatrix {
    rows: Vec<String>,
    cols: Vec<String>,
    cells: Vec<u8>,
    row_totals: Vec<u32>,
    col_totals: Vec<u32>,
    grand_total: u32,
}

impl WMatrix {
    /// Builds a matrix from explicit 0/1 cells in row-major order.
    pub fn from_cells(rows: Vec<String>, cols: Vec<String>, cells: Vec<u8>) -> Result<Self> {
        if cells.len() != rows.len() * cols.len() {
            return Err(Error::Config(format!(
                "{} cells for a {}x{} matrix",
                cells.len(),
                rows.len(),
                cols.len()
            )));
        }
        if cells.iter().any(|&c| c > 1) {
            return Err(Error::Config("agreement cells must be 0 or 1".into()));
        }
        let s = cols.len();
        let mut row_totals = vec![0u32; rows.len()];
        let mut col_totals = vec![0u32; s];
        for (i, chunk) in cells.chunks_exact(s.max(1)).enumerate() {
            for (j, &c) in chunk.iter().enumerate() {
                row_totals[i] += u32::from(c);
                col_totals[j] += u32::from(c);
            }
        }
        let grand_total = row_totals.iter().sum();
        Ok(Self {
            rows,
            cols,
            cells,
            row_totals,
            col_totals,
            grand_total,
        })
    }

    /// Number of rows (`v`).
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// Panel size (`s`).
    pub fn n_cols(&self) -> usize {
        self.cols.len()
    }

    /// Item ids, one per row.
    pub fn rows(&self) -> &[String] {
        &self.rows
    }

    /// Specialist ids, one per column.
    pub fn cols(&self) -> &[String] {
        &self.cols
    }

    /// True when the specialist matched the row's assigned dimension.
    pub fn agreed(&self, row: usize, col: usize) -> bool {
        self.cells[row * self.cols.len() + col] == 1
    }

    pub fn row_cells(&self, row: usize) -> &[u8] {
        let s = self.cols.len();
        &self.cells[row * s..(row + 1) * s]
    }

    /// Per-row totals `R_l`.
    pub fn row_totals(&self) -> &[u32] {
        &self.row_totals
    }

    /// Per-specialist totals `D_r`.
    pub fn col_totals(&self) -> &[u32] {
        &self.col_totals
    }

    /// Grand total `N`.
    pub fn grand_total(&self) -> u32 {
        self.grand_total
    }

    /// CSV rendering with a trailing total column and total row.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("item,");
        out.push_str(&self.cols.join(","));
        out.push_str(",total\n");
        for (i, id) in self.rows.iter().enumerate() {
            let _ = write!(out, "{id}");
            for j in 0..self.cols.len() {
                let _ = write!(out, ",{}", u8::from(self.agreed(i, j)));
            }
            let _ = writeln!(out, ",{}", self.row_totals[i]);
        }
        let _ = write!(out, "total");
        for t in &self.col_totals {
            let _ = write!(out, ",{t}");
        }
        let _ = writeln!(out, ",{}", self.grand_total);
        out
    }

    /// Serializable view with explicit rows of cells.
    pub fn to_report(&self) -> WMatrixReport {
        WMatrixReport {
            items: self.rows.clone(),
            specialists: self.cols.clone(),
            cells: self
                .cells
                .chunks_exact(self.cols.len().max(1))
                .map(|c| c.to_vec())
                .collect(),
            row_totals: self.row_totals.clone(),
            col_totals: self.col_totals.clone(),
            grand_total: self.grand_total,
        }
    }
}

/// JSON-facing form of a [`WMatrix`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WMatrixReport {
    pub items: Vec<String>,
    pub specialists: Vec<String>,
    pub cells: Vec<Vec<u8>>,
    pub row_totals: Vec<u32>,
    pub col_totals: Vec<u32>,
    pub grand_total: u32,
}

/// Scores the retained items against their assigned dimensions. Every row
/// total then sits at or above the retention head-count bound.
pub fn build_w_matrix(matrix: &JudgementMatrix, retention: &RetentionResult) -> Result<WMatrix> {
    let s = matrix.n_specialists();
    let mut cells = Vec::with_capacity(retention.retained.len() * s);
    let mut rows = Vec::with_capacity(retention.retained.len());
    for kept in &retention.retained {
        let item = item_index(matrix, &kept.item)?;
        let dim = matrix
            .dimensions()
            .iter()
            .position(|d| d == &kept.dimension)
            .ok_or_else(|| {
                Error::Config(format!(
                    "assigned dimension `{}` not in the matrix dimension set",
                    kept.dimension
                ))
            })? as u8;
        cells.extend(matrix.row_indices(item).iter().map(|&c| u8::from(c == dim)));
        rows.push(kept.item.clone());
    }
    WMatrix::from_cells(rows, matrix.specialists().to_vec(), cells)
}

/// Number of items whose modal dimension holds a strict majority of the
/// panel (`2·max_count > s`).
pub fn leading_count(matrix: &JudgementMatrix) -> usize {
    let s = matrix.n_specialists();
    (0..matrix.n_items())
        .filter(|&item| {
            let counts = counts_for_row(matrix, item);
            let (max_count, _) = majority_of_counts(&counts);
            2 * max_count > s
        })
        .count()
}

/// Builds the agreement matrix in [`RowSelection::LeadingCount`] mode: the
/// first [`leading_count`] items in table order, each scored against the
/// whole-panel modal dimension, ties resolved to the earliest modal label in
/// the row.
pub fn build_w_matrix_leading(matrix: &JudgementMatrix) -> Result<WMatrix> {
    let s = matrix.n_specialists();
    let v = leading_count(matrix);
    let mut cells = Vec::with_capacity(v * s);
    let mut rows = Vec::with_capacity(v);
    for item in 0..v {
        let counts = counts_for_row(matrix, item);
        let (max_count, _) = majority_of_counts(&counts);
        let row = matrix.row_indices(item);
        let dim = row
            .iter()
            .copied()
            .find(|&d| counts[usize::from(d)] == max_count)
            .expect("non-empty row");
        cells.extend(row.iter().map(|&c| u8::from(c == dim)));
        rows.push(matrix.items()[item].clone());
    }
    WMatrix::from_cells(rows, matrix.specialists().to_vec(), cells)
}

/// Dispatches between the two construction modes.
pub fn build_w_matrix_with(
    matrix: &JudgementMatrix,
    retention: &RetentionResult,
    selection: RowSelection,
) -> Result<WMatrix> {
    match selection {
        RowSelection::Retained => build_w_matrix(matrix, retention),
        RowSelection::LeadingCount => build_w_matrix_leading(matrix),
    }
}
