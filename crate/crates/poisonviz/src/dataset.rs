//! Corpus loading, validation, seeded splitting, and partition statistics.
//!
//! The on-disk format is one JSON record per line, UTF-8, with fields
//! `{id, nlq, schema, dvq}`. Poisoned records reuse the same shape plus
//! provenance fields (see the poisoner module). Records whose DVQ fails to
//! parse are collected into a reject report rather than silently dropped.

use crate::dvq::{self, Cond, DVQuery, Literal, ParseError};
use crate::rng::SplitMix64;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("column '{0}' not found in schema or conditions")]
    UnknownColumn(String),
    #[error("need at least 3 examples to split, got {0}")]
    TooFewExamples(usize),
    #[error("split ratios must have a positive sum")]
    ZeroRatios,
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnType {
    Str,
    Num,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: ColumnType,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<Column>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Schema {
    pub tables: Vec<Table>,
}

impl Schema {
    /// Declared type of `column`, looked up case-insensitively across all
    /// tables (first declaration wins).
    pub fn column_type(&self, column: &str) -> Option<ColumnType> {
        // qualified references match on their column part
        let bare = column.rsplit('.').next().unwrap_or(column);
        for table in &self.tables {
            for col in &table.columns {
                if col.name.eq_ignore_ascii_case(bare) {
                    return Some(col.ty);
                }
            }
        }
        None
    }
}

/// One corpus record: a natural-language question, its schema, and the
/// target query (kept both as text and as the parsed AST).
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub id: String,
    pub nlq: String,
    pub schema: Schema,
    pub dvq: String,
    parsed: DVQuery,
}

impl Example {
    pub fn new(
        id: impl Into<String>,
        nlq: impl Into<String>,
        schema: Schema,
        dvq: impl Into<String>,
    ) -> Result<Self, ParseError> {
        let dvq = dvq.into();
        let parsed = dvq::parse(&dvq)?;
        Ok(Self { id: id.into(), nlq: nlq.into(), schema, dvq, parsed })
    }

    pub fn parsed(&self) -> &DVQuery {
        &self.parsed
    }
}

/// Raw on-disk record. Clean records leave the poison provenance fields
/// unset; mixed files carry both kinds side by side.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawRecord {
    pub id: String,
    pub nlq: String,
    pub schema: Schema,
    pub dvq: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attack: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clean_ref: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trigger_positions: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload_kind: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_column: Option<String>,
}

impl RawRecord {
    pub fn clean(ex: &Example) -> Self {
        Self {
            id: ex.id.clone(),
            nlq: ex.nlq.clone(),
            schema: ex.schema.clone(),
            dvq: ex.dvq.clone(),
            attack: None,
            clean_ref: None,
            trigger_positions: None,
            payload_kind: None,
            target_column: None,
        }
    }
}

/// A record that failed DVQ validation, with enough context to fix it.
#[derive(Debug, Clone, Serialize)]
pub struct Reject {
    pub line: usize,
    pub id: String,
    pub dvq: String,
    pub error: String,
    pub error_offset: usize,
}

#[derive(Debug, Default)]
pub struct LoadedDataset {
    pub examples: Vec<Example>,
    pub rejects: Vec<Reject>,
}

/// Load a clean dataset file. Structurally malformed lines abort with a
/// [`DatasetError::Format`]; lines whose DVQ does not parse become rejects.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<LoadedDataset, DatasetError> {
    let path = path.as_ref();
    let content = fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_dataset_str(&content)
}

pub fn load_dataset_str(content: &str) -> Result<LoadedDataset, DatasetError> {
    let mut out = LoadedDataset::default();
    let mut seen_ids = std::collections::HashSet::new();
    for (lineno, line) in content.lines().enumerate() {
        let line_display = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord = serde_json::from_str(line).map_err(|e| DatasetError::Format {
            line: line_display,
            message: e.to_string(),
        })?;
        if !seen_ids.insert(raw.id.clone()) {
            return Err(DatasetError::Format {
                line: line_display,
                message: format!("duplicate id '{}'", raw.id),
            });
        }
        match Example::new(raw.id.clone(), raw.nlq, raw.schema, raw.dvq.clone()) {
            Ok(ex) => out.examples.push(ex),
            Err(err) => out.rejects.push(Reject {
                line: line_display,
                id: raw.id,
                dvq: raw.dvq,
                error: err.to_string(),
                error_offset: err.offset(),
            }),
        }
    }
    if out.examples.is_empty() && out.rejects.is_empty() {
        return Err(DatasetError::EmptyDataset);
    }
    Ok(out)
}

/// Write examples back out, one record per line, in slice order.
pub fn save_dataset(path: impl AsRef<Path>, examples: &[Example]) -> Result<(), DatasetError> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    for ex in examples {
        serde_json::to_writer(&mut buf, &RawRecord::clean(ex)).expect("record serializes");
        buf.push(b'\n');
    }
    write_atomic(path, &buf)
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), DatasetError> {
    let io_err = |source: std::io::Error| DatasetError::Io {
        path: path.display().to_string(),
        source,
    };
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(io_err)?;
        }
    }
    let mut file = fs::File::create(path).map_err(io_err)?;
    file.write_all(bytes).map_err(io_err)?;
    Ok(())
}

/// Three-way split weights plus the shuffle seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub ratios: [f64; 3],
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(ratios: [f64; 3], seed: u64) -> Result<Self, DatasetError> {
        if ratios.iter().any(|w| *w < 0.0) || ratios.iter().sum::<f64>() <= 0.0 {
            return Err(DatasetError::ZeroRatios);
        }
        Ok(Self { ratios, seed })
    }
}

#[derive(Debug, Clone)]
pub struct Splits {
    pub train: Vec<Example>,
    pub dev: Vec<Example>,
    pub test: Vec<Example>,
}

/// Seeded shuffle followed by a contiguous cut. Dev and test take
/// `floor(N * w / sum)` records each; the remainder goes to train.
pub fn split(examples: &[Example], spec: &SplitSpec) -> Result<Splits, DatasetError> {
    if examples.len() < 3 {
        return Err(DatasetError::TooFewExamples(examples.len()));
    }
    let total: f64 = spec.ratios.iter().sum();
    if total <= 0.0 {
        return Err(DatasetError::ZeroRatios);
    }
    let n = examples.len();
    let n_dev = (n as f64 * spec.ratios[1] / total).floor() as usize;
    let n_test = (n as f64 * spec.ratios[2] / total).floor() as usize;
    let n_train = n - n_dev - n_test;

    let mut order: Vec<usize> = (0..n).collect();
    SplitMix64::new(spec.seed).shuffle(&mut order);
    let picked: Vec<Example> = order.iter().map(|&i| examples[i].clone()).collect();

    let (train, rest) = picked.split_at(n_train);
    let (dev, test) = rest.split_at(n_dev);
    Ok(Splits {
        train: train.to_vec(),
        dev: dev.to_vec(),
        test: test.to_vec(),
    })
}

/// Per-split, per-attack instance counts, mirroring the usual partition
/// summary table (poison rows by attack type, one clean row).
#[derive(Debug, Clone, Serialize)]
pub struct StatsReport {
    pub rows: Vec<StatsRow>,
    pub clean: [usize; 3],
}

#[derive(Debug, Clone, Serialize)]
pub struct StatsRow {
    pub attack: String,
    pub counts: [usize; 3],
}

pub fn dataset_stats(
    splits: &Splits,
    poisoned_counts: &[(String, [usize; 3])],
) -> StatsReport {
    StatsReport {
        rows: poisoned_counts
            .iter()
            .map(|(attack, counts)| StatsRow { attack: attack.clone(), counts: *counts })
            .collect(),
        clean: [splits.train.len(), splits.dev.len(), splits.test.len()],
    }
}

impl fmt::Display for StatsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut rows: Vec<Vec<String>> = Vec::new();
        for row in &self.rows {
            rows.push(vec![
                "Poison".into(),
                row.attack.clone(),
                row.counts[0].to_string(),
                row.counts[1].to_string(),
                row.counts[2].to_string(),
            ]);
        }
        rows.push(vec![
            "Clean".into(),
            "-".into(),
            self.clean[0].to_string(),
            self.clean[1].to_string(),
            self.clean[2].to_string(),
        ]);
        f.write_str(&crate::table::render(
            &["Dataset", "Attack Type", "Train", "Dev", "Test"],
            &rows,
        ))
    }
}

/// Resolve a column's type: schema declaration first, otherwise the literal
/// it is compared against in `cond` (string literal means Str, numeric
/// means Num).
pub fn infer_column_type(
    schema: &Schema,
    cond: Option<&Cond>,
    column: &str,
) -> Result<ColumnType, DatasetError> {
    if let Some(ty) = schema.column_type(column) {
        return Ok(ty);
    }
    if let Some(cond) = cond {
        for leaf in cond.leaves() {
            if leaf.column.eq_ignore_ascii_case(column) {
                return Ok(match leaf.rhs {
                    Literal::Str(_) => ColumnType::Str,
                    Literal::Num(_) => ColumnType::Num,
                });
            }
        }
    }
    Err(DatasetError::UnknownColumn(column.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dvq::CompareOp;

    fn schema_one(table: &str, cols: &[(&str, ColumnType)]) -> Schema {
        Schema {
            tables: vec![Table {
                name: table.into(),
                columns: cols
                    .iter()
                    .map(|(n, t)| Column { name: (*n).into(), ty: *t })
                    .collect(),
            }],
        }
    }

    fn fixture_line(id: &str, dvq: &str) -> String {
        let rec = RawRecord {
            id: id.into(),
            nlq: format!("question {id}"),
            schema: schema_one("t", &[("a", ColumnType::Num), ("b", ColumnType::Str)]),
            dvq: dvq.into(),
            attack: None,
            clean_ref: None,
            trigger_positions: None,
            payload_kind: None,
            target_column: None,
        };
        serde_json::to_string(&rec).unwrap()
    }

    #[test]
    fn loads_well_formed_fixture() {
        let content = [
            fixture_line("e1", "VISUALIZE BAR SELECT a , b FROM t"),
            fixture_line("e2", "VISUALIZE PIE SELECT a , b FROM t WHERE a > 1"),
            fixture_line("e3", "VISUALIZE LINE SELECT a , b FROM t"),
        ]
        .join("\n");
        let loaded = load_dataset_str(&content).unwrap();
        assert_eq!(loaded.examples.len(), 3);
        assert!(loaded.rejects.is_empty());
    }

    #[test]
    fn malformed_dvq_becomes_reject_with_offset() {
        let content = [
            fixture_line("e1", "VISUALIZE BAR SELECT a , b FROM t"),
            fixture_line("bad", "SELECT a FROM t"),
            fixture_line("e3", "VISUALIZE LINE SELECT a , b FROM t"),
        ]
        .join("\n");
        let loaded = load_dataset_str(&content).unwrap();
        assert_eq!(loaded.examples.len(), 2);
        assert_eq!(loaded.rejects.len(), 1);
        assert_eq!(loaded.rejects[0].id, "bad");
        assert_eq!(loaded.rejects[0].line, 2);
        assert_eq!(loaded.rejects[0].error_offset, 0);
    }

    #[test]
    fn empty_file_is_an_error() {
        assert!(matches!(load_dataset_str(""), Err(DatasetError::EmptyDataset)));
    }

    #[test]
    fn malformed_json_reports_line_number() {
        let content = format!("{}\nnot json", fixture_line("e1", "VISUALIZE BAR SELECT a , b FROM t"));
        match load_dataset_str(&content) {
            Err(DatasetError::Format { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let content = [
            fixture_line("e1", "VISUALIZE BAR SELECT a , b FROM t"),
            fixture_line("e1", "VISUALIZE PIE SELECT a , b FROM t"),
        ]
        .join("\n");
        assert!(matches!(
            load_dataset_str(&content),
            Err(DatasetError::Format { line: 2, .. })
        ));
    }

    fn make_examples(n: usize) -> Vec<Example> {
        (0..n)
            .map(|i| {
                Example::new(
                    format!("ex{i}"),
                    format!("question number {i}"),
                    schema_one("t", &[("a", ColumnType::Num)]),
                    "VISUALIZE BAR SELECT a , COUNT(a) FROM t",
                )
                .unwrap()
            })
            .collect()
    }

    #[test]
    fn split_sizes_exact_division() {
        let spec = SplitSpec::new([6.0, 2.0, 2.0], 42).unwrap();
        let s = split(&make_examples(10), &spec).unwrap();
        assert_eq!((s.train.len(), s.dev.len(), s.test.len()), (6, 2, 2));
    }

    #[test]
    fn split_remainder_goes_to_train() {
        let spec = SplitSpec::new([6.0, 2.0, 2.0], 42).unwrap();
        let s = split(&make_examples(11), &spec).unwrap();
        assert_eq!((s.train.len(), s.dev.len(), s.test.len()), (7, 2, 2));
    }

    #[test]
    fn split_is_deterministic_and_partitions() {
        let examples = make_examples(23);
        let spec = SplitSpec::new([6.0, 2.0, 2.0], 7).unwrap();
        let a = split(&examples, &spec).unwrap();
        let b = split(&examples, &spec).unwrap();
        let ids = |v: &[Example]| v.iter().map(|e| e.id.clone()).collect::<Vec<_>>();
        assert_eq!(ids(&a.train), ids(&b.train));
        assert_eq!(ids(&a.dev), ids(&b.dev));
        assert_eq!(ids(&a.test), ids(&b.test));

        let mut all: Vec<String> = ids(&a.train);
        all.extend(ids(&a.dev));
        all.extend(ids(&a.test));
        assert_eq!(all.len(), 23);
        let unique: std::collections::HashSet<_> = all.iter().collect();
        assert_eq!(unique.len(), 23);
    }

    #[test]
    fn split_requires_three_examples() {
        let spec = SplitSpec::new([6.0, 2.0, 2.0], 1).unwrap();
        assert!(matches!(
            split(&make_examples(2), &spec),
            Err(DatasetError::TooFewExamples(2))
        ));
    }

    #[test]
    fn infer_prefers_schema_declaration() {
        let schema = schema_one("t", &[("Price", ColumnType::Num)]);
        assert_eq!(
            infer_column_type(&schema, None, "price").unwrap(),
            ColumnType::Num
        );
    }

    #[test]
    fn infer_falls_back_to_literal() {
        let schema = Schema::default();
        let cond = Cond::leaf("Name", CompareOp::Eq, Literal::str("x"));
        assert_eq!(
            infer_column_type(&schema, Some(&cond), "Name").unwrap(),
            ColumnType::Str
        );
    }

    #[test]
    fn infer_unknown_column_errors() {
        let schema = Schema::default();
        assert!(matches!(
            infer_column_type(&schema, None, "ghost"),
            Err(DatasetError::UnknownColumn(_))
        ));
    }

    #[test]
    fn ingestion_round_trip() {
        let examples = make_examples(5);
        let mut buf = Vec::new();
        for ex in &examples {
            serde_json::to_writer(&mut buf, &RawRecord::clean(ex)).unwrap();
            buf.push(b'\n');
        }
        let loaded = load_dataset_str(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(loaded.examples, examples);
    }

    #[test]
    fn stats_with_no_poison_reports_zero_rows() {
        let examples = make_examples(10);
        let spec = SplitSpec::new([6.0, 2.0, 2.0], 3).unwrap();
        let splits = split(&examples, &spec).unwrap();
        let report = dataset_stats(
            &splits,
            &[
                ("Data Exposure".into(), [0, 0, 0]),
                ("Visualization Errors".into(), [0, 0, 0]),
                ("Denial of Service".into(), [0, 0, 0]),
            ],
        );
        for row in &report.rows {
            assert_eq!(row.counts, [0, 0, 0]);
        }
        assert_eq!(report.clean, [6, 2, 2]);
    }

    #[test]
    fn stats_report_renders_counts() {
        let examples = make_examples(10);
        let spec = SplitSpec::new([6.0, 2.0, 2.0], 3).unwrap();
        let splits = split(&examples, &spec).unwrap();
        let report = dataset_stats(
            &splits,
            &[
                ("Data Exposure".into(), [4, 1, 1]),
                ("Denial of Service".into(), [4, 1, 1]),
            ],
        );
        let text = report.to_string();
        assert!(text.contains("Data Exposure"));
        assert!(text.contains("Clean"));
        assert_eq!(report.clean, [6, 2, 2]);
    }
}
