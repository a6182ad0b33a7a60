//! Typed AST for data visualization queries.
//!
//! A query is a SQL-like body prefixed by a `VISUALIZE <chart>` clause. The
//! AST is the substrate every payload rewrite operates on, so equality is
//! structural and serialization is canonical (uppercase keywords, single
//! spaces, parentheses only where re-parsing needs them).

use serde::{Deserialize, Serialize};
use std::fmt;

/// Chart kind named in the VISUALIZE clause. Multi-word variants serialize
/// space-separated ("STACKED BAR").
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChartType {
    Bar,
    Pie,
    Line,
    Scatter,
    StackedBar,
    GroupedLine,
    GroupedScatter,
}

impl ChartType {
    pub fn keyword(&self) -> &'static str {
        match self {
            ChartType::Bar => "BAR",
            ChartType::Pie => "PIE",
            ChartType::Line => "LINE",
            ChartType::Scatter => "SCATTER",
            ChartType::StackedBar => "STACKED BAR",
            ChartType::GroupedLine => "GROUPED LINE",
            ChartType::GroupedScatter => "GROUPED SCATTER",
        }
    }

    pub const ALL: [ChartType; 7] = [
        ChartType::Bar,
        ChartType::Pie,
        ChartType::Line,
        ChartType::Scatter,
        ChartType::StackedBar,
        ChartType::GroupedLine,
        ChartType::GroupedScatter,
    ];
}

impl fmt::Display for ChartType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

/// Numeric literal. Keeps the source spelling so `100.0` serializes back as
/// written; normalization rewrites the text from the value so `100` and
/// `100.0` compare equal after [`crate::dvq::normalize`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumLit {
    pub text: String,
    pub value: f64,
}

impl NumLit {
    pub fn new(text: impl Into<String>, value: f64) -> Self {
        Self { text: text.into(), value }
    }

    /// Literal rendered from the value alone (canonical spelling).
    pub fn from_value(value: f64) -> Self {
        let text = if value == 0.0 {
            "0".to_string()
        } else {
            value.to_string()
        };
        Self { text, value }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Literal {
    Str(String),
    Num(NumLit),
}

impl Literal {
    pub fn num(value: f64) -> Self {
        Literal::Num(NumLit::from_value(value))
    }

    pub fn str(s: impl Into<String>) -> Self {
        Literal::Str(s.into())
    }

    pub fn is_str(&self) -> bool {
        matches!(self, Literal::Str(_))
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Str(s) => write!(f, "\"{s}\""),
            Literal::Num(n) => f.write_str(&n.text),
        }
    }
}

/// Comparison operator. `!=` and `<>` are distinct spellings of the same
/// relation; normalization folds the angle form into `!=`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompareOp {
    Eq,
    NotEq,
    NotEqAngle,
    Lt,
    Gt,
    Le,
    Ge,
    Like,
}

impl CompareOp {
    pub fn symbol(&self) -> &'static str {
        match self {
            CompareOp::Eq => "=",
            CompareOp::NotEq => "!=",
            CompareOp::NotEqAngle => "<>",
            CompareOp::Lt => "<",
            CompareOp::Gt => ">",
            CompareOp::Le => "<=",
            CompareOp::Ge => ">=",
            CompareOp::Like => "LIKE",
        }
    }
}

/// One leaf predicate: `column op literal`. LIKE requires a string rhs; the
/// parser and the checked constructor both enforce it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub column: String,
    pub op: CompareOp,
    pub rhs: Literal,
}

impl Comparison {
    pub fn new(column: impl Into<String>, op: CompareOp, rhs: Literal) -> Self {
        let cmp = Self { column: column.into(), op, rhs };
        debug_assert!(
            !(cmp.op == CompareOp::Like && !cmp.rhs.is_str()),
            "LIKE requires a string literal"
        );
        cmp
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.column, self.op.symbol(), self.rhs)
    }
}

/// WHERE-clause tree. AND binds tighter than OR; both parse left-associative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cond {
    Leaf(Comparison),
    And(Box<Cond>, Box<Cond>),
    Or(Box<Cond>, Box<Cond>),
}

impl Cond {
    pub fn leaf(column: impl Into<String>, op: CompareOp, rhs: Literal) -> Self {
        Cond::Leaf(Comparison::new(column, op, rhs))
    }

    pub fn and(left: Cond, right: Cond) -> Self {
        Cond::And(Box::new(left), Box::new(right))
    }

    pub fn or(left: Cond, right: Cond) -> Self {
        Cond::Or(Box::new(left), Box::new(right))
    }

    /// Leaves in in-order (left-to-right) traversal order.
    pub fn leaves(&self) -> Vec<&Comparison> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a Comparison>) {
        match self {
            Cond::Leaf(c) => out.push(c),
            Cond::And(l, r) | Cond::Or(l, r) => {
                l.collect_leaves(out);
                r.collect_leaves(out);
            }
        }
    }

    /// Operands of the top-level OR chain. An AND node (or a leaf) is an
    /// atom at this level.
    pub fn or_operands(&self) -> Vec<&Cond> {
        let mut out = Vec::new();
        fn walk<'a>(c: &'a Cond, out: &mut Vec<&'a Cond>) {
            match c {
                Cond::Or(l, r) => {
                    walk(l, out);
                    walk(r, out);
                }
                other => out.push(other),
            }
        }
        walk(self, &mut out);
        out
    }

    /// Operands of the top-level AND chain; OR nodes are atoms here.
    pub fn and_operands(&self) -> Vec<&Cond> {
        let mut out = Vec::new();
        fn walk<'a>(c: &'a Cond, out: &mut Vec<&'a Cond>) {
            match c {
                Cond::And(l, r) => {
                    walk(l, out);
                    walk(r, out);
                }
                other => out.push(other),
            }
        }
        walk(self, &mut out);
        out
    }

    fn render(&self, out: &mut String) {
        match self {
            Cond::Leaf(c) => out.push_str(&c.to_string()),
            Cond::Or(l, r) => {
                l.render(out);
                out.push_str(" OR ");
                // right-nested OR needs parens to survive left-assoc reparse
                if matches!(**r, Cond::Or(_, _)) {
                    out.push_str("( ");
                    r.render(out);
                    out.push_str(" )");
                } else {
                    r.render(out);
                }
            }
            Cond::And(l, r) => {
                Self::render_and_operand(l, false, out);
                out.push_str(" AND ");
                Self::render_and_operand(r, true, out);
            }
        }
    }

    fn render_and_operand(c: &Cond, is_right: bool, out: &mut String) {
        let needs_parens = match c {
            Cond::Or(_, _) => true,
            Cond::And(_, _) => is_right,
            Cond::Leaf(_) => false,
        };
        if needs_parens {
            out.push_str("( ");
            c.render(out);
            out.push_str(" )");
        } else {
            c.render(out);
        }
    }
}

impl fmt::Display for Cond {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        self.render(&mut s);
        f.write_str(&s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggFunc {
    Count,
    Sum,
    Avg,
    Min,
    Max,
}

impl AggFunc {
    pub fn keyword(&self) -> &'static str {
        match self {
            AggFunc::Count => "COUNT",
            AggFunc::Sum => "SUM",
            AggFunc::Avg => "AVG",
            AggFunc::Min => "MIN",
            AggFunc::Max => "MAX",
        }
    }
}

/// Argument of an aggregate: a column or `*`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggArg {
    Column(String),
    Star,
}

/// One SELECT-list entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectExpr {
    Column(String),
    Aggregate { func: AggFunc, arg: AggArg },
}

impl SelectExpr {
    pub fn column(name: impl Into<String>) -> Self {
        SelectExpr::Column(name.into())
    }

    pub fn aggregate(func: AggFunc, arg: AggArg) -> Self {
        SelectExpr::Aggregate { func, arg }
    }

    pub fn is_aggregate(&self) -> bool {
        matches!(self, SelectExpr::Aggregate { .. })
    }
}

impl fmt::Display for SelectExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SelectExpr::Column(c) => f.write_str(c),
            SelectExpr::Aggregate { func, arg } => match arg {
                AggArg::Column(c) => write!(f, "{}({})", func.keyword(), c),
                AggArg::Star => write!(f, "{}(*)", func.keyword()),
            },
        }
    }
}

/// `JOIN table ON left = right`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Join {
    pub table: String,
    pub left: String,
    pub right: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SortDir {
    Asc,
    Desc,
}

impl SortDir {
    pub fn keyword(&self) -> &'static str {
        match self {
            SortDir::Asc => "ASC",
            SortDir::Desc => "DESC",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderBy {
    pub expr: SelectExpr,
    /// Direction as written; `None` when the query omitted it. Comparison
    /// treats an absent direction as ascending (see normalization).
    pub dir: Option<SortDir>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinUnit {
    Year,
    Month,
    Day,
    Weekday,
}

impl BinUnit {
    pub fn keyword(&self) -> &'static str {
        match self {
            BinUnit::Year => "YEAR",
            BinUnit::Month => "MONTH",
            BinUnit::Day => "DAY",
            BinUnit::Weekday => "WEEKDAY",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub column: String,
    pub unit: BinUnit,
}

/// A full visualization query.
///
/// Invariant: `select` has at least two entries, except for the
/// single-aggregate-plus-BIN form. The parser rejects anything else; code
/// that builds queries directly is expected to keep the same shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DVQuery {
    pub chart: ChartType,
    pub select: Vec<SelectExpr>,
    pub from_table: String,
    pub joins: Vec<Join>,
    pub where_cond: Option<Cond>,
    pub group_by: Vec<String>,
    pub order_by: Option<OrderBy>,
    pub bin: Option<Bin>,
}

impl DVQuery {
    /// Canonical text: uppercase keywords, single spaces, minimal parens.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(64);
        out.push_str("VISUALIZE ");
        out.push_str(self.chart.keyword());
        out.push_str(" SELECT ");
        let select: Vec<String> = self.select.iter().map(|e| e.to_string()).collect();
        out.push_str(&select.join(" , "));
        out.push_str(" FROM ");
        out.push_str(&self.from_table);
        for j in &self.joins {
            out.push_str(" JOIN ");
            out.push_str(&j.table);
            out.push_str(" ON ");
            out.push_str(&j.left);
            out.push_str(" = ");
            out.push_str(&j.right);
        }
        if let Some(cond) = &self.where_cond {
            out.push_str(" WHERE ");
            out.push_str(&cond.to_string());
        }
        if !self.group_by.is_empty() {
            out.push_str(" GROUP BY ");
            out.push_str(&self.group_by.join(" , "));
        }
        if let Some(ord) = &self.order_by {
            out.push_str(" ORDER BY ");
            out.push_str(&ord.expr.to_string());
            if let Some(dir) = ord.dir {
                out.push(' ');
                out.push_str(dir.keyword());
            }
        }
        if let Some(bin) = &self.bin {
            out.push_str(" BIN ");
            out.push_str(&bin.column);
            out.push_str(" BY ");
            out.push_str(bin.unit.keyword());
        }
        out
    }
}

impl fmt::Display for DVQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}
