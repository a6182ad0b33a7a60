//! Normalization for comparison purposes: identifiers case-folded, numeric
//! literals rewritten from their value, `<>` folded to `!=`, and an absent
//! ORDER BY direction materialized as ASC. Scoring always compares
//! normalized ASTs so predictions are judged on substance, not spelling.

use super::ast::*;

pub fn normalize(q: &DVQuery) -> DVQuery {
    DVQuery {
        chart: q.chart,
        select: q.select.iter().map(normalize_select).collect(),
        from_table: fold(&q.from_table),
        joins: q
            .joins
            .iter()
            .map(|j| Join {
                table: fold(&j.table),
                left: fold(&j.left),
                right: fold(&j.right),
            })
            .collect(),
        where_cond: q.where_cond.as_ref().map(normalize_cond),
        group_by: q.group_by.iter().map(|c| fold(c)).collect(),
        order_by: q.order_by.as_ref().map(|o| OrderBy {
            expr: normalize_select(&o.expr),
            dir: Some(o.dir.unwrap_or(SortDir::Asc)),
        }),
        bin: q.bin.as_ref().map(|b| Bin { column: fold(&b.column), unit: b.unit }),
    }
}

pub fn normalize_cond(c: &Cond) -> Cond {
    match c {
        Cond::Leaf(cmp) => Cond::Leaf(normalize_comparison(cmp)),
        Cond::And(l, r) => Cond::and(normalize_cond(l), normalize_cond(r)),
        Cond::Or(l, r) => Cond::or(normalize_cond(l), normalize_cond(r)),
    }
}

pub fn normalize_comparison(cmp: &Comparison) -> Comparison {
    let op = match cmp.op {
        CompareOp::NotEqAngle => CompareOp::NotEq,
        other => other,
    };
    let rhs = match &cmp.rhs {
        Literal::Str(s) => Literal::Str(s.clone()),
        Literal::Num(n) => Literal::Num(NumLit::from_value(n.value)),
    };
    Comparison { column: fold(&cmp.column), op, rhs }
}

fn normalize_select(e: &SelectExpr) -> SelectExpr {
    match e {
        SelectExpr::Column(c) => SelectExpr::Column(fold(c)),
        SelectExpr::Aggregate { func, arg } => SelectExpr::Aggregate {
            func: *func,
            arg: match arg {
                AggArg::Column(c) => AggArg::Column(fold(c)),
                AggArg::Star => AggArg::Star,
            },
        },
    }
}

fn fold(ident: &str) -> String {
    ident.to_lowercase()
}
