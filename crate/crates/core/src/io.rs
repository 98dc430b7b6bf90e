//! File formats.
//!
//! Space file (JSON):
//!
//! ```json
//! {"points": [[0.0], [0.4]], "metric": "l2", "measure": [1.0, 1.0],
//!  "fields": {"f": [0.1, 0.2]}, "sets": {"A": [0]}}
//! ```
//!
//! `metric` is `"l1"`, `"l2"`, `"linf"`, `{"minkowski": q}` or
//! `{"matrix": [[...]]}` (then `points` is omitted). Fields are written as
//! `index,value` CSV behind a block of `#` metadata lines.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fields::ScalarField;
use crate::space::{build_space, Metric, MetricMeasureSpace, PointSet, SetRole};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MetricSpec {
    Named(String),
    Minkowski { minkowski: f64 },
    Matrix { matrix: Vec<Vec<f64>> },
}

impl MetricSpec {
    pub fn to_metric(&self) -> Result<Metric> {
        match self {
            MetricSpec::Named(name) => match name.as_str() {
                "l1" => Ok(Metric::l1()),
                "l2" => Ok(Metric::l2()),
                "linf" => Ok(Metric::linf()),
                other => Err(Error::InvalidParameter(format!("unknown metric {other:?}"))),
            },
            MetricSpec::Minkowski { minkowski } => Ok(Metric::Minkowski(*minkowski)),
            MetricSpec::Matrix { matrix } => Ok(Metric::Matrix(matrix.clone())),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpaceFile {
    #[serde(default)]
    pub points: Vec<Vec<f64>>,
    pub metric: MetricSpec,
    pub measure: Vec<f64>,
    #[serde(default)]
    pub fields: BTreeMap<String, Vec<f64>>,
    #[serde(default)]
    pub sets: BTreeMap<String, Vec<usize>>,
}

/// A validated space with the named fields and sets that came with it.
#[derive(Debug, Clone)]
pub struct LoadedSpace {
    pub space: MetricMeasureSpace,
    pub fields: BTreeMap<String, ScalarField>,
    pub sets: BTreeMap<String, Vec<usize>>,
}

impl LoadedSpace {
    pub fn field(&self, name: &str) -> Result<&ScalarField> {
        self.fields
            .get(name)
            .ok_or_else(|| Error::InvalidParameter(format!("no field named {name:?}")))
    }

    /// A named set, or every point for `"all"`.
    pub fn set(&self, name: &str, role: SetRole) -> Result<PointSet> {
        if name == "all" && !self.sets.contains_key("all") {
            return Ok(self.space.all_points(role));
        }
        let ix = self
            .sets
            .get(name)
            .ok_or_else(|| Error::InvalidParameter(format!("no set named {name:?}")))?;
        PointSet::new(ix.clone(), role, self.space.len())
    }
}

pub fn parse_space_json(text: &str) -> Result<LoadedSpace> {
    let file: SpaceFile = serde_json::from_str(text)?;
    let space = build_space(file.points, file.metric.to_metric()?, file.measure)?;
    let mut fields = BTreeMap::new();
    for (name, values) in file.fields {
        let field = ScalarField::new(name.clone(), values);
        field.check_len(&space)?;
        fields.insert(name, field);
    }
    Ok(LoadedSpace {
        space,
        fields,
        sets: file.sets,
    })
}

pub fn load_space_json(path: &Path) -> Result<LoadedSpace> {
    parse_space_json(&std::fs::read_to_string(path)?)
}

/// Distance matrix as headerless CSV; `#` lines are ignored. Weights default to `1/n`.
pub fn load_matrix_csv(path: &Path, measure: Option<Vec<f64>>) -> Result<MetricMeasureSpace> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let row = record
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|e| Error::InvalidParameter(format!("bad matrix entry {s:?}: {e}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    let n = rows.len();
    let measure = measure.unwrap_or_else(|| vec![1.0 / n.max(1) as f64; n]);
    build_space(vec![], Metric::Matrix(rows), measure)
}

/// Provenance written at the top of every output file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputMeta {
    pub config_sha256: String,
    pub seed: Option<u64>,
}

impl OutputMeta {
    pub fn for_config<T: Serialize>(config: &T, seed: Option<u64>) -> Result<Self> {
        Ok(OutputMeta {
            config_sha256: config_hash(config)?,
            seed,
        })
    }

    pub fn write_header<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "# sobolev-lip {VERSION}")?;
        writeln!(w, "# config_sha256: {}", self.config_sha256)?;
        match self.seed {
            Some(seed) => writeln!(w, "# seed: {seed}"),
            None => writeln!(w, "# seed: none"),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "version": VERSION,
            "config_sha256": self.config_sha256,
            "seed": self.seed,
        })
    }
}

/// SHA-256 of the canonical JSON serialization.
pub fn config_hash<T: Serialize>(config: &T) -> Result<String> {
    let canonical = serde_json::to_string(config)?;
    Ok(hex::encode(Sha256::digest(canonical.as_bytes())))
}

/// Metadata header followed by CSV rows; `header` names the columns.
pub fn write_csv<W: Write>(
    mut w: W,
    meta: &OutputMeta,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<()> {
    meta.write_header(&mut w)?;
    let mut writer = csv::Writer::from_writer(w);
    writer.write_record(header)?;
    for row in rows {
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_field_csv<W: Write>(w: W, meta: &OutputMeta, field: &ScalarField) -> Result<()> {
    write_csv(
        w,
        meta,
        &["index", "value"],
        field
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| vec![i.to_string(), fmt_f64(*v)]),
    )
}

pub fn read_field_csv(path: &Path, name: &str) -> Result<ScalarField> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)?;
    let mut values = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let index: usize = record.get(0).unwrap_or("").parse().map_err(|e| {
            Error::InvalidParameter(format!("row {row}: bad index: {e}"))
        })?;
        if index != values.len() {
            return Err(Error::InvalidParameter(format!(
                "row {row}: expected index {}, got {index}",
                values.len()
            )));
        }
        let value: f64 = record.get(1).unwrap_or("").parse().map_err(|e| {
            Error::InvalidParameter(format!("row {row}: bad value: {e}"))
        })?;
        values.push(value);
    }
    Ok(ScalarField::new(name, values))
}

/// Shortest round-trip decimal; `inf` / `-inf` / `nan` spelled out.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v}")
    }
}

/// JSON number, or the string `"inf"` for non-finite values.
pub fn json_f64(v: f64) -> serde_json::Value {
    if v.is_finite() {
        serde_json::json!(v)
    } else {
        serde_json::json!(fmt_f64(v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_every_metric_form() {
        for metric in [r#""l1""#, r#""l2""#, r#""linf""#, r#"{"minkowski": 3}"#] {
            let text = format!(
                r#"{{"points": [[0,0],[1,0],[0,1]], "metric": {metric}, "measure": [1,1,1]}}"#
            );
            let loaded = parse_space_json(&text).unwrap();
            assert_eq!(loaded.space.len(), 3);
        }
        let text = r#"{"metric": {"matrix": [[0,1],[1,0]]}, "measure": [1,2],
                       "fields": {"f": [0.5, 1]}, "sets": {"A": [1]}}"#;
        let loaded = parse_space_json(text).unwrap();
        assert_eq!(loaded.space.d(0, 1), 1.0);
        assert_eq!(loaded.field("f").unwrap().values, vec![0.5, 1.0]);
        assert_eq!(loaded.set("A", SetRole::A).unwrap().indices(), &[1]);
        assert_eq!(loaded.set("all", SetRole::A).unwrap().len(), 2);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse_space_json("{\n\"metric\": \"l2\",\n\"measure\": [1,\n}").unwrap_err();
        assert!(err.to_string().contains("line"), "{err}");
        assert!(parse_space_json(r#"{"points": [[0]], "metric": "l7", "measure": [1]}"#).is_err());
    }

    #[test]
    fn matrix_csv_and_field_csv() {
        let dir = tempfile::tempdir().unwrap();
        let m = dir.path().join("m.csv");
        std::fs::write(&m, "# distances\n0, 1, 2\n1, 0, 1\n2, 1, 0\n").unwrap();
        let space = load_matrix_csv(&m, None).unwrap();
        assert_eq!(space.d(0, 2), 2.0);
        assert!((space.total_measure() - 1.0).abs() < 1e-15);

        let f = ScalarField::new("f", vec![0.1, 2.0 / 3.0, f64::INFINITY]);
        let meta = OutputMeta::for_config(&"x", Some(4)).unwrap();
        let out = dir.path().join("f.csv");
        write_field_csv(std::fs::File::create(&out).unwrap(), &meta, &f).unwrap();
        let text = std::fs::read_to_string(&out).unwrap();
        assert!(text.starts_with("# sobolev-lip"));
        assert!(text.contains("# seed: 4"));
        let back = read_field_csv(&out, "f").unwrap();
        assert_eq!(back.values, f.values);
    }
}
