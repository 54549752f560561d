//! Inter-rater agreement over autonomy ratings: parse a ratings table and
//! compute Fleiss' kappa, pooled across attributes or split per attribute.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::Deserialize;
use thiserror::Error;

use crate::rules::Attribute;

/// A rating category. Raters may assign a level or declare the attribute
/// unknowable; `unknown` is a first-class category, not missing data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum RatingLabel {
    Lower,
    Middle,
    Higher,
    Unknown,
}

/// Number of rating categories.
pub const CATEGORY_COUNT: usize = 4;

impl RatingLabel {
    pub const ALL: [RatingLabel; CATEGORY_COUNT] =
        [RatingLabel::Lower, RatingLabel::Middle, RatingLabel::Higher, RatingLabel::Unknown];

    pub fn index(self) -> usize {
        match self {
            RatingLabel::Lower => 0,
            RatingLabel::Middle => 1,
            RatingLabel::Higher => 2,
            RatingLabel::Unknown => 3,
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            RatingLabel::Lower => "lower",
            RatingLabel::Middle => "middle",
            RatingLabel::Higher => "higher",
            RatingLabel::Unknown => "unknown",
        }
    }
}

impl fmt::Display for RatingLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for RatingLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().as_str() {
            "lower" => Ok(RatingLabel::Lower),
            "middle" => Ok(RatingLabel::Middle),
            "higher" => Ok(RatingLabel::Higher),
            "unknown" => Ok(RatingLabel::Unknown),
            _ => Err(format!("unknown rating level: {s:?}")),
        }
    }
}

/// One rater's verdict on one subject/attribute pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RatingRecord {
    pub subject: String,
    pub attribute: Attribute,
    pub rater: String,
    pub level: RatingLabel,
}

/// A parsed ratings table.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RatingsTable {
    pub records: Vec<RatingRecord>,
}

#[derive(Debug, Error)]
pub enum AgreementError {
    #[error("failed to read ratings: {0}")]
    Io(#[from] std::io::Error),
    #[error("ratings file is not valid CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("ratings row {row}: {message}")]
    BadRow { row: usize, message: String },
    #[error("duplicate rating: rater {rater:?} rated {subject:?}/{attribute} more than once")]
    Duplicate {
        subject: String,
        attribute: Attribute,
        rater: String,
    },
    #[error("incomplete ratings: rater {rater:?} did not rate {subject:?}/{attribute}")]
    Missing {
        subject: String,
        attribute: Attribute,
        rater: String,
    },
    #[error("agreement needs at least two raters")]
    TooFewRaters,
    #[error("agreement needs at least one rated subject")]
    NoItems,
    #[error("agreement is undefined: all ratings use a single category")]
    Degenerate,
}

#[derive(Debug, Deserialize)]
struct RawRow {
    subject: String,
    attribute: String,
    rater: String,
    level: String,
}

impl RatingsTable {
    /// Parse CSV with a `subject,attribute,rater,level` header (any column
    /// order). Fields are trimmed; attribute and level names are
    /// case-insensitive.
    pub fn from_csv_reader<R: std::io::Read>(reader: R) -> Result<RatingsTable, AgreementError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut records = Vec::new();
        for (i, row) in rdr.deserialize::<RawRow>().enumerate() {
            let row_no = i + 2;
            let raw = row?;
            if raw.subject.is_empty() || raw.rater.is_empty() {
                return Err(AgreementError::BadRow {
                    row: row_no,
                    message: "subject and rater must be non-empty".to_string(),
                });
            }
            let attribute = raw
                .attribute
                .parse::<Attribute>()
                .map_err(|message| AgreementError::BadRow { row: row_no, message })?;
            let level = raw
                .level
                .parse::<RatingLabel>()
                .map_err(|message| AgreementError::BadRow { row: row_no, message })?;
            records.push(RatingRecord {
                subject: raw.subject,
                attribute,
                rater: raw.rater,
                level,
            });
        }
        Ok(RatingsTable { records })
    }

    pub fn from_csv_path(path: &Path) -> Result<RatingsTable, AgreementError> {
        let file = std::fs::File::open(path)?;
        RatingsTable::from_csv_reader(file)
    }

    /// Attributes that appear in the table, in taxonomy order.
    pub fn attributes(&self) -> Vec<Attribute> {
        let present: BTreeSet<Attribute> = self.records.iter().map(|r| r.attribute).collect();
        present.into_iter().collect()
    }
}

/// Per-item category counts: `counts[i][j]` is how many raters put item `i`
/// into category `j`. Every item has exactly `raters_per_item` ratings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgreementMatrix {
    pub counts: Vec<[u64; CATEGORY_COUNT]>,
    pub raters_per_item: u64,
}

/// Build the agreement matrix for the whole table, or for one attribute.
/// Every rater must rate every selected (subject, attribute) item exactly
/// once.
pub fn build_matrix(table: &RatingsTable, attribute: Option<Attribute>) -> Result<AgreementMatrix, AgreementError> {
    let selected: Vec<&RatingRecord> = table
        .records
        .iter()
        .filter(|r| attribute.is_none_or(|a| r.attribute == a))
        .collect();
    if selected.is_empty() {
        return Err(AgreementError::NoItems);
    }
    let raters: BTreeSet<&str> = selected.iter().map(|r| r.rater.as_str()).collect();
    if raters.len() < 2 {
        return Err(AgreementError::TooFewRaters);
    }
    let mut items: BTreeMap<(&str, Attribute), BTreeMap<&str, RatingLabel>> = BTreeMap::new();
    for r in &selected {
        let cell = items.entry((r.subject.as_str(), r.attribute)).or_default();
        if cell.insert(r.rater.as_str(), r.level).is_some() {
            return Err(AgreementError::Duplicate {
                subject: r.subject.clone(),
                attribute: r.attribute,
                rater: r.rater.clone(),
            });
        }
    }
    let mut counts = Vec::with_capacity(items.len());
    for ((subject, attr), cell) in &items {
        for rater in &raters {
            if !cell.contains_key(rater) {
                return Err(AgreementError::Missing {
                    subject: subject.to_string(),
                    attribute: *attr,
                    rater: rater.to_string(),
                });
            }
        }
        let mut row = [0u64; CATEGORY_COUNT];
        for level in cell.values() {
            row[level.index()] += 1;
        }
        counts.push(row);
    }
    Ok(AgreementMatrix {
        counts,
        raters_per_item: raters.len() as u64,
    })
}

fn kahan_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut compensation = 0.0f64;
    for v in values {
        let y = v - compensation;
        let t = sum + y;
        compensation = (t - sum) - y;
        sum = t;
    }
    sum
}

/// Fleiss' kappa for a complete agreement matrix.
///
/// Chance agreement comes from the pooled category distribution; observed
/// agreement averages the per-item pairwise agreement. When every rating
/// lands in one category the statistic is undefined (division by zero) and
/// an error is returned; full agreement across several categories yields
/// exactly `1.0`.
pub fn fleiss_kappa(matrix: &AgreementMatrix) -> Result<f64, AgreementError> {
    let n_items = matrix.counts.len();
    if n_items == 0 {
        return Err(AgreementError::NoItems);
    }
    let n = matrix.raters_per_item;
    if n < 2 {
        return Err(AgreementError::TooFewRaters);
    }
    debug_assert!(matrix.counts.iter().all(|row| row.iter().sum::<u64>() == n));

    let mut column_totals = [0u64; CATEGORY_COUNT];
    for row in &matrix.counts {
        for (total, cell) in column_totals.iter_mut().zip(row) {
            *total += cell;
        }
    }
    let used_categories = column_totals.iter().filter(|&&c| c > 0).count();
    if used_categories <= 1 {
        return Err(AgreementError::Degenerate);
    }
    if matrix.counts.iter().all(|row| row.contains(&n)) {
        return Ok(1.0);
    }

    let pair_denominator = (n * (n - 1)) as f64;
    let observed = kahan_sum(matrix.counts.iter().map(|row| {
        let pairs: u64 = row.iter().map(|&c| c * (c - c.min(1))).sum();
        pairs as f64 / pair_denominator
    })) / n_items as f64;
    let grand_total = (n * n_items as u64) as f64;
    let expected = kahan_sum(column_totals.iter().map(|&c| {
        let p = c as f64 / grand_total;
        p * p
    }));
    Ok((observed - expected) / (1.0 - expected))
}

/// Kappa over all attributes pooled into one set of items.
pub fn pooled_kappa(table: &RatingsTable) -> Result<f64, AgreementError> {
    fleiss_kappa(&build_matrix(table, None)?)
}

/// Kappa per attribute. `None` marks attributes where the statistic is
/// undefined (a single category used); structural problems with the table
/// surface as errors.
pub fn per_attribute_kappa(table: &RatingsTable) -> Result<BTreeMap<Attribute, Option<f64>>, AgreementError> {
    let mut out = BTreeMap::new();
    for attribute in table.attributes() {
        let matrix = build_matrix(table, Some(attribute))?;
        match fleiss_kappa(&matrix) {
            Ok(v) => {
                out.insert(attribute, Some(v));
            }
            Err(AgreementError::Degenerate) => {
                out.insert(attribute, None);
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Arithmetic mean of the defined per-attribute kappas.
pub fn averaged_kappa(per_attribute: &BTreeMap<Attribute, Option<f64>>) -> Option<f64> {
    let defined: Vec<f64> = per_attribute.values().flatten().copied().collect();
    if defined.is_empty() {
        None
    } else {
        Some(kahan_sum(defined.iter().copied()) / defined.len() as f64)
    }
}
