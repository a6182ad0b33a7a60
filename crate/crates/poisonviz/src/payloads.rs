//! The three query payloads — an OR tautology that bypasses filtering, an
//! AND contradiction that empties results, and a chart flip to bar — plus a
//! WHERE-predicate evaluation oracle used to verify their semantics.

use crate::dataset::{infer_column_type, ColumnType, Schema};
use crate::dvq::{ChartType, CompareOp, Comparison, Cond, DVQuery, Literal};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use thiserror::Error;

/// String sentinel for the contradiction payload on text columns.
pub const DOS_STR_SENTINEL: &str = "abcdefg";
/// Numeric sentinel, serialized byte-exactly with its trailing `.0`.
pub const DOS_NUM_SENTINEL_TEXT: &str = "-99999999999.0";
pub const DOS_NUM_SENTINEL: f64 = -99999999999.0;

#[derive(Debug, Error)]
pub enum PayloadError {
    #[error("query has no WHERE clause")]
    MissingWhere,
    #[error("chart is already a bar chart")]
    AlreadyBar,
    #[error("no value for column '{0}' in evaluation row")]
    MissingColumnValue(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PayloadKind {
    ExposureOr,
    DosAnd,
    VisBar,
}

impl PayloadKind {
    pub fn slug(&self) -> &'static str {
        match self {
            PayloadKind::ExposureOr => "exposure_or",
            PayloadKind::DosAnd => "dos_and",
            PayloadKind::VisBar => "vis_bar",
        }
    }
}

/// What a payload application did: which leaf was injected where, or which
/// chart type was overwritten.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PayloadRecord {
    pub kind: PayloadKind,
    pub target_column: Option<String>,
    pub injected_leaf: Option<Comparison>,
    pub original_chart: Option<ChartType>,
}

/// Column of the leftmost leaf in an in-order traversal; the deterministic
/// target choice for WHERE-clause payloads.
pub fn select_target_column(cond: &Cond) -> &str {
    match cond {
        Cond::Leaf(c) => &c.column,
        Cond::And(l, _) | Cond::Or(l, _) => select_target_column(l),
    }
}

fn target_column_type(q: &DVQuery, schema: &Schema, column: &str) -> ColumnType {
    // the column comes from a WHERE leaf, so literal inference cannot miss
    infer_column_type(schema, q.where_cond.as_ref(), column).unwrap_or(ColumnType::Str)
}

/// Append `OR <always-true leaf>` at the root of the WHERE clause:
/// `C LIKE "%"` for string columns, `C != 0` for numeric ones.
pub fn make_exposure_payload(
    q: &DVQuery,
    schema: &Schema,
) -> Result<(DVQuery, PayloadRecord), PayloadError> {
    let cond = q.where_cond.as_ref().ok_or(PayloadError::MissingWhere)?;
    let column = select_target_column(cond).to_string();
    let leaf = match target_column_type(q, schema, &column) {
        ColumnType::Str => Comparison::new(column.clone(), CompareOp::Like, Literal::str("%")),
        ColumnType::Num => Comparison::new(column.clone(), CompareOp::NotEq, Literal::num(0.0)),
    };
    let mut out = q.clone();
    out.where_cond = Some(Cond::or(cond.clone(), Cond::Leaf(leaf.clone())));
    Ok((
        out,
        PayloadRecord {
            kind: PayloadKind::ExposureOr,
            target_column: Some(leaf.column.clone()),
            injected_leaf: Some(leaf),
            original_chart: None,
        },
    ))
}

/// Append `AND <unsatisfiable leaf>` at the root of the WHERE clause:
/// `C = "abcdefg"` for string columns, `C = -99999999999.0` for numeric.
pub fn make_dos_payload(
    q: &DVQuery,
    schema: &Schema,
) -> Result<(DVQuery, PayloadRecord), PayloadError> {
    let cond = q.where_cond.as_ref().ok_or(PayloadError::MissingWhere)?;
    let column = select_target_column(cond).to_string();
    let leaf = match target_column_type(q, schema, &column) {
        ColumnType::Str => {
            Comparison::new(column.clone(), CompareOp::Eq, Literal::str(DOS_STR_SENTINEL))
        }
        ColumnType::Num => Comparison::new(
            column.clone(),
            CompareOp::Eq,
            Literal::Num(crate::dvq::NumLit::new(DOS_NUM_SENTINEL_TEXT, DOS_NUM_SENTINEL)),
        ),
    };
    let mut out = q.clone();
    out.where_cond = Some(Cond::and(cond.clone(), Cond::Leaf(leaf.clone())));
    Ok((
        out,
        PayloadRecord {
            kind: PayloadKind::DosAnd,
            target_column: Some(leaf.column.clone()),
            injected_leaf: Some(leaf),
            original_chart: None,
        },
    ))
}

/// Overwrite the chart clause with BAR, recording the original type.
pub fn apply_vis_error(q: &DVQuery) -> Result<(DVQuery, PayloadRecord), PayloadError> {
    if q.chart == ChartType::Bar {
        return Err(PayloadError::AlreadyBar);
    }
    let mut out = q.clone();
    let original = q.chart;
    out.chart = ChartType::Bar;
    Ok((
        out,
        PayloadRecord {
            kind: PayloadKind::VisBar,
            target_column: None,
            injected_leaf: None,
            original_chart: Some(original),
        },
    ))
}

/// Evaluate a WHERE tree against one row (column -> literal). Standard
/// boolean semantics; `LIKE "%"` matches every string; numeric comparison
/// is by value; comparisons across mismatched types are false except `!=`.
pub fn eval_where(
    cond: &Cond,
    row: &HashMap<String, Literal>,
) -> Result<bool, PayloadError> {
    match cond {
        Cond::And(l, r) => Ok(eval_where(l, row)? && eval_where(r, row)?),
        Cond::Or(l, r) => Ok(eval_where(l, row)? || eval_where(r, row)?),
        Cond::Leaf(cmp) => {
            let value = row
                .iter()
                .find(|(k, _)| k.eq_ignore_ascii_case(&cmp.column))
                .map(|(_, v)| v)
                .ok_or_else(|| PayloadError::MissingColumnValue(cmp.column.clone()))?;
            Ok(eval_comparison(cmp, value))
        }
    }
}

fn eval_comparison(cmp: &Comparison, value: &Literal) -> bool {
    use CompareOp::*;
    match (&cmp.rhs, value) {
        (Literal::Num(rhs), Literal::Num(lhs)) => {
            let (a, b) = (lhs.value, rhs.value);
            match cmp.op {
                Eq => a == b,
                NotEq | NotEqAngle => a != b,
                Lt => a < b,
                Gt => a > b,
                Le => a <= b,
                Ge => a >= b,
                Like => false,
            }
        }
        (Literal::Str(rhs), Literal::Str(lhs)) => match cmp.op {
            Eq => lhs == rhs,
            NotEq | NotEqAngle => lhs != rhs,
            Lt => lhs < rhs,
            Gt => lhs > rhs,
            Le => lhs <= rhs,
            Ge => lhs >= rhs,
            Like => like_match(rhs, lhs),
        },
        // mismatched types never compare equal
        _ => matches!(cmp.op, NotEq | NotEqAngle),
    }
}

/// `%`-wildcard matching; all other characters are literal.
fn like_match(pattern: &str, text: &str) -> bool {
    let parts: Vec<&str> = pattern.split('%').collect();
    if parts.len() == 1 {
        return pattern == text;
    }
    let mut rest = text;
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() {
            continue;
        }
        if i == 0 {
            match rest.strip_prefix(part) {
                Some(r) => rest = r,
                None => return false,
            }
        } else if i == parts.len() - 1 {
            return rest.ends_with(part);
        } else {
            match rest.find(part) {
                Some(pos) => rest = &rest[pos + part.len()..],
                None => return false,
            }
        }
    }
    true
}
