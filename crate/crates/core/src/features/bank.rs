use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Record<T> {
    pub class_id: u64,
    pub vector: Vec<T>,
}

/// Immutable table of precomputed embeddings grouped by class.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBank<T> {
    dim: usize,
    records: Vec<Record<T>>,
    class_index: BTreeMap<u64, Vec<usize>>,
}

impl<T: Scalar> FeatureBank<T> {
    pub fn new(dim: usize, records: Vec<Record<T>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig(
                "feature dimension must be positive".into(),
            ));
        }
        let mut class_index: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
        for (i, r) in records.iter().enumerate() {
            if r.vector.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: r.vector.len(),
                });
            }
            if !r.vector.iter().all(|x| x.is_finite()) {
                return Err(Error::NonFinite("feature record"));
            }
            class_index.entry(r.class_id).or_default().push(i);
        }
        Ok(Self {
            dim,
            records,
            class_index,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[Record<T>] {
        &self.records
    }

    /// Class ids in ascending order.
    pub fn class_ids(&self) -> impl Iterator<Item = u64> + '_ {
        self.class_index.keys().copied()
    }

    pub fn num_classes(&self) -> usize {
        self.class_index.len()
    }

    pub fn indices_of(&self, class_id: u64) -> &[usize] {
        self.class_index
            .get(&class_id)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }
}

fn parse_header(line: &str) -> Result<(usize, usize)> {
    let bad = |m: &str| Error::Parse {
        line: 1,
        message: m.to_string(),
    };
    let (d_part, n_part) = line
        .split_once(' ')
        .ok_or_else(|| bad("header must be `d=<int> n=<int>`"))?;
    let d = d_part
        .strip_prefix("d=")
        .and_then(|s| s.parse::<usize>().ok())
        .ok_or_else(|| bad("malformed `d=` field in header"))?;
    let n = n_part
        .strip_prefix("n=")
        .and_then(|s| s.parse::<usize>().ok())
        .ok_or_else(|| bad("malformed `n=` field in header"))?;
    if d == 0 {
        return Err(bad("d must be positive"));
    }
    Ok((d, n))
}

/// Parses a feature table from any reader.
pub fn read_feature_bank<T: Scalar, R: Read>(mut reader: R) -> Result<FeatureBank<T>> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    if text.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "empty file".into(),
        });
    }
    let body = text.strip_suffix('\n').unwrap_or(&text);
    let mut lines = body.split('\n');
    let header = lines.next().unwrap_or("");
    let (dim, n) = parse_header(header)?;

    let mut records = Vec::with_capacity(n);
    for (k, line) in lines.enumerate() {
        let lineno = k + 2;
        let err = |message: String| Error::Parse {
            line: lineno,
            message,
        };
        if line.is_empty() {
            return Err(err("empty row".into()));
        }
        let mut fields = line.split(',');
        let class_field = fields.next().unwrap_or("");
        let class_id = class_field
            .parse::<u64>()
            .map_err(|_| err(format!("invalid class id `{class_field}`")))?;
        let mut vector = Vec::with_capacity(dim);
        for f in fields {
            let v = f
                .parse::<T>()
                .map_err(|_| err(format!("non-numeric field `{f}`")))?;
            if !v.is_finite() {
                return Err(err(format!("non-finite field `{f}`")));
            }
            vector.push(v);
        }
        if vector.len() != dim {
            return Err(err(format!(
                "expected {dim} values, found {}",
                vector.len()
            )));
        }
        records.push(Record { class_id, vector });
    }
    if records.len() != n {
        return Err(Error::Parse {
            line: records.len() + 2,
            message: format!("header declares n={n} rows, found {}", records.len()),
        });
    }
    FeatureBank::new(dim, records)
}

pub fn load_feature_bank<T: Scalar>(path: impl AsRef<Path>) -> Result<FeatureBank<T>> {
    let file = std::fs::File::open(path)?;
    read_feature_bank(std::io::BufReader::new(file))
}

/// Serializes a bank in canonical form (shortest round-trip decimals, LF-terminated rows).
pub fn write_feature_bank<T: Scalar>(bank: &FeatureBank<T>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "d={} n={}", bank.dim, bank.records.len());
    for r in &bank.records {
        let _ = write!(out, "{}", r.class_id);
        for v in &r.vector {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}
