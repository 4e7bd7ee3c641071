//! Fleiss' kappa for a fixed number of raters per item.

use std::fs::File;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

/// Per-item rater counts: `counts[i][j]` raters put item `i` in category `j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RatingsMatrix {
    counts: Vec<Vec<u32>>,
    raters: u32,
    category_names: Vec<String>,
}

impl RatingsMatrix {
    pub fn new(counts: Vec<Vec<u32>>) -> Result<Self> {
        let k = counts.first().map(Vec::len).unwrap_or(0);
        let names = (1..=k).map(|j| format!("cat_{j}")).collect();
        Self::with_names(counts, names)
    }

    pub fn with_names(counts: Vec<Vec<u32>>, category_names: Vec<String>) -> Result<Self> {
        if counts.len() < 2 {
            return Err(Error::invalid("ratings need at least 2 items"));
        }
        let k = counts[0].len();
        if k < 2 {
            return Err(Error::invalid("ratings need at least 2 categories"));
        }
        if category_names.len() != k {
            return Err(Error::invalid("category names do not match column count"));
        }
        let raters: u32 = counts[0].iter().sum();
        if raters < 2 {
            return Err(Error::invalid("ratings need at least 2 raters per item"));
        }
        for (i, row) in counts.iter().enumerate() {
            if row.len() != k {
                return Err(Error::invalid(format!("item {i} has {} columns, expected {k}", row.len())));
            }
            let sum: u32 = row.iter().sum();
            if sum != raters {
                return Err(Error::invalid(format!(
                    "item {i} has {sum} ratings, expected {raters}"
                )));
            }
        }
        Ok(Self {
            counts,
            raters,
            category_names,
        })
    }

    /// Builds counts from each rater's label per item (`labels[item][rater]`).
    pub fn from_labels(labels: &[Vec<usize>], categories: usize) -> Result<Self> {
        let counts = labels
            .iter()
            .map(|row| {
                let mut c = vec![0u32; categories];
                for &l in row {
                    if l >= categories {
                        return Err(Error::invalid(format!("label {l} out of range")));
                    }
                    c[l] += 1;
                }
                Ok(c)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(counts)
    }

    pub fn items(&self) -> usize {
        self.counts.len()
    }

    pub fn categories(&self) -> usize {
        self.counts[0].len()
    }

    pub fn raters(&self) -> u32 {
        self.raters
    }

    pub fn counts(&self) -> &[Vec<u32>] {
        &self.counts
    }

    pub fn category_names(&self) -> &[String] {
        &self.category_names
    }

    /// Collapses to a two-column matrix: category `j` versus everything else.
    pub fn one_vs_rest(&self, j: usize) -> Result<Self> {
        if j >= self.categories() {
            return Err(Error::invalid(format!("category {j} out of range")));
        }
        let counts = self
            .counts
            .iter()
            .map(|row| vec![row[j], self.raters - row[j]])
            .collect();
        Self::with_names(
            counts,
            vec![self.category_names[j].clone(), "rest".to_string()],
        )
    }
}

pub fn fleiss_kappa(m: &RatingsMatrix) -> Result<f64> {
    let n = f64::from(m.raters);
    let items = m.items() as f64;
    let mut column_totals = vec![0f64; m.categories()];
    let mut p_bar = 0.0;
    for row in &m.counts {
        let mut sq = 0.0;
        for (j, &c) in row.iter().enumerate() {
            let c = f64::from(c);
            sq += c * c;
            column_totals[j] += c;
        }
        p_bar += (sq - n) / (n * (n - 1.0));
    }
    p_bar /= items;
    let p_e: f64 = column_totals
        .iter()
        .map(|t| {
            let p = t / (items * n);
            p * p
        })
        .sum();

    if (1.0 - p_e).abs() < f64::EPSILON {
        return if (1.0 - p_bar).abs() < f64::EPSILON {
            Ok(1.0)
        } else {
            Err(Error::DegenerateMarginal(format!(
                "expected agreement is 1 but observed agreement is {p_bar}"
            )))
        };
    }
    Ok((p_bar - p_e) / (1.0 - p_e))
}

#[derive(Debug, Clone, Serialize)]
pub struct KappaReport {
    pub source: String,
    pub items: usize,
    pub raters: u32,
    pub kappa: f64,
    /// One-vs-rest kappa per category.
    pub per_category: Vec<(String, Option<f64>)>,
}

pub fn kappa_report(m: &RatingsMatrix, source: &str) -> Result<KappaReport> {
    let kappa = fleiss_kappa(m)?;
    let per_category = (0..m.categories())
        .map(|j| {
            let k = m.one_vs_rest(j).and_then(|sub| fleiss_kappa(&sub)).ok();
            (m.category_names[j].clone(), k)
        })
        .collect();
    Ok(KappaReport {
        source: source.to_string(),
        items: m.items(),
        raters: m.raters,
        kappa,
        per_category,
    })
}

/// Reads a ratings CSV: `item_id,<cat>...` with per-category rater counts.
pub fn load_ratings(path: &Path) -> Result<RatingsMatrix> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_ratings(file)
}

pub fn read_ratings<R: std::io::Read>(reader: R) -> Result<RatingsMatrix> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.len() < 3 {
        return Err(Error::invalid("ratings CSV needs item_id plus at least 2 category columns"));
    }
    let names: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let mut counts = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .skip(1)
            .map(|v| {
                v.parse::<u32>().map_err(|_| Error::Malformed {
                    location: format!("ratings row {}", i + 1),
                    reason: format!("`{v}` is not a count"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        counts.push(row);
    }
    RatingsMatrix::with_names(counts, names)
}
