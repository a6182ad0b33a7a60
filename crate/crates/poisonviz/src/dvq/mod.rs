//! Parse, represent, normalize, and serialize data visualization queries.
//!
//! All types are immutable after construction and all operations are pure;
//! the module is safe for unrestricted parallel use.

mod ast;
mod normalize;
mod parser;

pub use ast::{
    AggArg, AggFunc, Bin, BinUnit, ChartType, CompareOp, Comparison, Cond, DVQuery, Join, Literal,
    NumLit, OrderBy, SelectExpr, SortDir,
};
pub use normalize::{normalize, normalize_comparison, normalize_cond};
pub use parser::{parse, ParseError};

/// Canonical text of a query: uppercase keywords, single-space separated
/// tokens, parentheses only where precedence demands them.
pub fn serialize(q: &DVQuery) -> String {
    q.to_text()
}
