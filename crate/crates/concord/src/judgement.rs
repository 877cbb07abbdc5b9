//! Study data model: items, specialists, dimension labels and the judgement
//! table, plus CSV ingestion and validation.
//!
//! A judgement matrix is a complete items × specialists table in which every
//! cell holds the dimension a specialist assigned to an item. An optional
//! per-item theoretical dimension records what the item was designed to
//! assess.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Column header that marks the optional theoretical-dimension column.
/// A specialist cannot use this id.
pub const THEORETICAL_HEADER: &str = "theoretical";

/// A dimension name. Non-empty, with no whitespace, commas or quotes, so
/// labels survive CSV round-trips unquoted.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DimensionLabel(String);

impl DimensionLabel {
    pub fn new(label: impl Into<String>) -> Result<Self> {
        let label = label.into();
        if label.is_empty() {
            return Err(Error::Config("dimension label is empty".into()));
        }
        if label
            .chars()
            .any(|c| c.is_whitespace() || c == ',' || c == '"')
        {
            return Err(Error::Config(format!(
                "dimension label `{label}` contains whitespace, comma or quote"
            )));
        }
        Ok(Self(label))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for DimensionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Complete table of specialist judgements for one instrument.
///
/// Cells are stored as indices into the dimension set, in item-major order.
/// The dimension set is the union of labels seen in cells and the theoretical
/// column, in first-appearance order, optionally preceded by explicitly
/// declared labels.
#[derive(Debug, Clone, PartialEq)]
pub struct JudgementMatrix {
    items: Vec<String>,
    specialists: Vec<String>,
    dimensions: Vec<DimensionLabel>,
    cells: Vec<u8>,
    theoretical: Option<Vec<u8>>,
}

impl JudgementMatrix {
    /// Builds a matrix from label strings, inferring the dimension set.
    pub fn from_labels(
        items: Vec<String>,
        specialists: Vec<String>,
        rows: Vec<Vec<String>>,
        theoretical: Option<Vec<String>>,
    ) -> Result<Self> {
        Self::build(items, specialists, rows, theoretical, Vec::new(), false)
    }

    /// Like [`from_labels`](Self::from_labels) but with a declared dimension
    /// set. Labels outside the declared set are rejected; declared labels no
    /// specialist used stay in the set.
    pub fn with_declared_dimensions(
        items: Vec<String>,
        specialists: Vec<String>,
        rows: Vec<Vec<String>>,
        theoretical: Option<Vec<String>>,
        declared: Vec<DimensionLabel>,
    ) -> Result<Self> {
        Self::build(items, specialists, rows, theoretical, declared, true)
    }

    fn build(
        items: Vec<String>,
        specialists: Vec<String>,
        rows: Vec<Vec<String>>,
        theoretical: Option<Vec<String>>,
        declared: Vec<DimensionLabel>,
        closed: bool,
    ) -> Result<Self> {
        check_unique(&items, "item")?;
        check_unique(&specialists, "specialist")?;
        if specialists.iter().any(|s| s == THEORETICAL_HEADER) {
            return Err(Error::Config(format!(
                "specialist id `{THEORETICAL_HEADER}` is reserved for the theoretical column"
            )));
        }
        if rows.len() != items.len() {
            return Err(Error::Config(format!(
                "{} judgement rows for {} items",
                rows.len(),
                items.len()
            )));
        }
        if let Some(theo) = &theoretical {
            if theo.len() != items.len() {
                return Err(Error::Config(format!(
                    "{} theoretical labels for {} items",
                    theo.len(),
                    items.len()
                )));
            }
        }

        let mut dimensions = Vec::new();
        let mut index: HashMap<String, u8> = HashMap::new();
        for label in declared {
            if index.contains_key(label.as_str()) {
                return Err(Error::Config(format!(
                    "dimension label `{label}` declared twice"
                )));
            }
            index.insert(label.as_str().to_owned(), dimensions.len() as u8);
            dimensions.push(label);
        }

        let mut intern = |raw: &str, location: &str| -> Result<u8> {
            if let Some(&idx) = index.get(raw) {
                return Ok(idx);
            }
            if closed {
                return Err(Error::Parse {
                    location: location.to_owned(),
                    message: format!("unknown dimension label `{raw}`"),
                });
            }
            let label = DimensionLabel::new(raw).map_err(|_| Error::Parse {
                location: location.to_owned(),
                message: format!("invalid dimension label `{raw}`"),
            })?;
            if dimensions.len() == usize::from(u8::MAX) {
                return Err(Error::Config("more than 255 dimension labels".into()));
            }
            let idx = dimensions.len() as u8;
            index.insert(raw.to_owned(), idx);
            dimensions.push(label);
            Ok(idx)
        };

        let s = specialists.len();
        let mut cells = Vec::with_capacity(items.len() * s);
        for (i, row) in rows.iter().enumerate() {
            let location = format!("row {}", i + 1);
            if row.len() != s {
                return Err(Error::Parse {
                    location,
                    message: format!("{} judgement cells for {s} specialists", row.len()),
                });
            }
            for raw in row {
                cells.push(intern(raw, &location)?);
            }
        }
        let theoretical = match theoretical {
            Some(raw) => {
                let mut theo = Vec::with_capacity(raw.len());
                for (i, label) in raw.iter().enumerate() {
                    theo.push(intern(label, &format!("row {}", i + 1))?);
                }
                Some(theo)
            }
            None => None,
        };

        Ok(Self {
            items,
            specialists,
            dimensions,
            cells,
            theoretical,
        })
    }

    pub(crate) fn from_raw(
        items: Vec<String>,
        specialists: Vec<String>,
        dimensions: Vec<DimensionLabel>,
        cells: Vec<u8>,
        theoretical: Option<Vec<u8>>,
    ) -> Self {
        debug_assert_eq!(cells.len(), items.len() * specialists.len());
        Self {
            items,
            specialists,
            dimensions,
            cells,
            theoretical,
        }
    }

    /// Number of items (rows).
    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    /// Panel size (columns).
    pub fn n_specialists(&self) -> usize {
        self.specialists.len()
    }

    /// Size of the dimension set.
    pub fn n_dimensions(&self) -> usize {
        self.dimensions.len()
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn specialists(&self) -> &[String] {
        &self.specialists
    }

    pub fn dimensions(&self) -> &[DimensionLabel] {
        &self.dimensions
    }

    /// The judgement of one specialist about one item.
    pub fn cell(&self, item: usize, specialist: usize) -> &DimensionLabel {
        &self.dimensions[usize::from(self.cell_index(item, specialist))]
    }

    /// Index of the cell's label within [`dimensions`](Self::dimensions).
    pub fn cell_index(&self, item: usize, specialist: usize) -> u8 {
        self.cells[item * self.specialists.len() + specialist]
    }

    pub(crate) fn row_indices(&self, item: usize) -> &[u8] {
        let s = self.specialists.len();
        &self.cells[item * s..(item + 1) * s]
    }

    /// The dimension an item was designed to assess, when recorded.
    pub fn theoretical(&self, item: usize) -> Option<&DimensionLabel> {
        self.theoretical
            .as_ref()
            .map(|t| &self.dimensions[usize::from(t[item])])
    }

    pub fn has_theoretical(&self) -> bool {
        self.theoretical.is_some()
    }

    pub fn item_position(&self, id: &str) -> Option<usize> {
        self.items.iter().position(|i| i == id)
    }

    /// A copy of the matrix keeping only the specialists at `keep` (column
    /// positions), in the given order.
    pub fn restrict_specialists(&self, keep: &[usize]) -> Result<Self> {
        let mut seen = HashSet::new();
        for &j in keep {
            if j >= self.specialists.len() {
                return Err(Error::Config(format!(
                    "specialist position {j} out of range for panel of {}",
                    self.specialists.len()
                )));
            }
            if !seen.insert(j) {
                return Err(Error::Config(format!("specialist position {j} repeated")));
            }
        }
        let s = self.specialists.len();
        let mut cells = Vec::with_capacity(self.items.len() * keep.len());
        for i in 0..self.items.len() {
            for &j in keep {
                cells.push(self.cells[i * s + j]);
            }
        }
        Ok(Self {
            items: self.items.clone(),
            specialists: keep.iter().map(|&j| self.specialists[j].clone()).collect(),
            dimensions: self.dimensions.clone(),
            cells,
            theoretical: self.theoretical.clone(),
        })
    }
}

fn check_unique(ids: &[String], what: &str) -> Result<()> {
    let mut seen = HashSet::new();
    for id in ids {
        if id.is_empty() {
            return Err(Error::Config(format!("empty {what} id")));
        }
        if !seen.insert(id.as_str()) {
            return Err(Error::Config(format!("duplicate {what} id `{id}`")));
        }
    }
    Ok(())
}

/// Parses the judgement CSV layout: header `item,<spec_1>,…,<spec_s>` with an
/// optional trailing `theoretical` column, one row per item.
pub fn parse_judgement_csv<R: Read>(reader: R) -> Result<JudgementMatrix> {
    parse_judgement_csv_with(reader, None)
}

/// Like [`parse_judgement_csv`], with an optional declared dimension set
/// (labels outside it are parse errors; unused declared labels are kept).
pub fn parse_judgement_csv_with<R: Read>(
    reader: R,
    declared: Option<Vec<DimensionLabel>>,
) -> Result<JudgementMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.records();

    let header = match records.next() {
        Some(rec) => rec?,
        None => {
            return Err(Error::Parse {
                location: "row 1".into(),
                message: "missing header row".into(),
            })
        }
    };
    if header.get(0) != Some("item") {
        return Err(Error::Parse {
            location: "row 1".into(),
            message: "header must start with `item`".into(),
        });
    }
    let mut columns: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
    let has_theoretical = columns.last().map(String::as_str) == Some(THEORETICAL_HEADER);
    if has_theoretical {
        columns.pop();
    }
    if columns.is_empty() {
        return Err(Error::Parse {
            location: "row 1".into(),
            message: "no specialist columns".into(),
        });
    }
    let s = columns.len();
    let expected = 1 + s + usize::from(has_theoretical);

    let mut items = Vec::new();
    let mut rows = Vec::new();
    let mut theoretical = has_theoretical.then(Vec::new);
    for (idx, rec) in records.enumerate() {
        let rec = rec?;
        let location = format!("row {}", idx + 2);
        if rec.len() != expected {
            return Err(Error::Parse {
                location,
                message: format!("{} fields, expected {expected}", rec.len()),
            });
        }
        items.push(rec[0].to_owned());
        rows.push((1..=s).map(|j| rec[j].to_owned()).collect());
        if let Some(theo) = theoretical.as_mut() {
            theo.push(rec[expected - 1].to_owned());
        }
    }

    let build = match declared {
        Some(d) => JudgementMatrix::with_declared_dimensions(items, columns, rows, theoretical, d),
        None => JudgementMatrix::from_labels(items, columns, rows, theoretical),
    };
    build.map_err(|e| match e {
        // Duplicate ids come out of the builder without a row location; keep
        // the message, mark it as input data.
        Error::Config(message) => Error::Parse {
            location: "input".into(),
            message,
        },
        other => other,
    })
}

/// Writes the matrix back in the same CSV layout. `parse` ∘ `write` is the
/// identity on well-formed files.
pub fn write_judgement_csv<W: Write>(matrix: &JudgementMatrix, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["item".to_owned()];
    header.extend(matrix.specialists().iter().cloned());
    if matrix.has_theoretical() {
        header.push(THEORETICAL_HEADER.to_owned());
    }
    wtr.write_record(&header)?;
    for i in 0..matrix.n_items() {
        let mut rec = vec![matrix.items()[i].clone()];
        for j in 0..matrix.n_specialists() {
            rec.push(matrix.cell(i, j).as_str().to_owned());
        }
        if let Some(theo) = matrix.theoretical(i) {
            rec.push(theo.as_str().to_owned());
        }
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

/// One problem found while validating a matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Issue {
    pub location: String,
    pub message: String,
}

/// Validation outcome. A matrix is accepted exactly when `errors` is empty.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub errors: Vec<Issue>,
    pub warnings: Vec<Issue>,
}

impl ValidationReport {
    pub fn accepted(&self) -> bool {
        self.errors.is_empty()
    }
}

/// Checks panel size and dimension-set shape, and flags constant-column
/// specialists (one label for every item).
pub fn validate_matrix(matrix: &JudgementMatrix, min_specialists: usize) -> ValidationReport {
    let mut report = ValidationReport::default();
    let s = matrix.n_specialists();
    if s < min_specialists {
        report.errors.push(Issue {
            location: "panel".into(),
            message: format!("{s} specialists, minimum is {min_specialists}"),
        });
    }
    if matrix.n_dimensions() < 2 {
        report.errors.push(Issue {
            location: "dimensions".into(),
            message: format!(
                "{} dimension label(s) in use, need at least 2",
                matrix.n_dimensions()
            ),
        });
    }
    if matrix.n_items() > 0 {
        for j in 0..s {
            let first = matrix.cell_index(0, j);
            if (1..matrix.n_items()).all(|i| matrix.cell_index(i, j) == first) {
                report.warnings.push(Issue {
                    location: format!("specialist {}", matrix.specialists()[j]),
                    message: format!(
                        "judged every item as `{}`",
                        matrix.dimensions()[usize::from(first)]
                    ),
                });
            }
        }
    }
    report
}
