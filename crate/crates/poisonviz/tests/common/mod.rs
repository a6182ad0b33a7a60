//! Shared test fixtures: a seeded AST generator, synthetic corpora, and a
//! small temp-dir helper. Everything is deterministic under a fixed seed.

#![allow(dead_code)]

use poisonviz::dataset::{Column, ColumnType, Example, Schema, Table};
use poisonviz::dvq::{
    AggArg, AggFunc, Bin, BinUnit, ChartType, CompareOp, Comparison, Cond, DVQuery, Join, Literal,
    NumLit, OrderBy, SelectExpr, SortDir,
};
use poisonviz::rng::SplitMix64;
use std::path::{Path, PathBuf};

/// Identifier pool; deliberately free of grammar keywords.
const IDENTS: [&str; 12] = [
    "price", "Year", "name", "Winery", "score", "region", "amount", "product", "Grape", "color",
    "cases_total", "t1",
];

const TABLES: [&str; 4] = ["wine", "sales", "grapes", "orders"];

pub struct AstGen {
    rng: SplitMix64,
}

impl AstGen {
    pub fn new(seed: u64) -> Self {
        Self { rng: SplitMix64::new(seed) }
    }

    fn pick<'a>(&mut self, pool: &[&'a str]) -> &'a str {
        pool[self.rng.next_below(pool.len())]
    }

    pub fn ident(&mut self) -> String {
        self.pick(&IDENTS).to_string()
    }

    pub fn chart(&mut self) -> ChartType {
        ChartType::ALL[self.rng.next_below(ChartType::ALL.len())]
    }

    pub fn literal(&mut self) -> Literal {
        if self.rng.next_below(2) == 0 {
            let strings = ["", "x", "red wine", "abcdefg", "%", "a_b", "100"];
            Literal::Str(self.pick(&strings).to_string())
        } else {
            self.num_literal()
        }
    }

    pub fn num_literal(&mut self) -> Literal {
        let texts = ["0", "1", "-1", "7", "42", "100", "100.0", "3.5", "-2.25", "-99999999999.0"];
        let text = self.pick(&texts);
        Literal::Num(NumLit::new(text, text.parse().unwrap()))
    }

    pub fn comparison(&mut self) -> Comparison {
        use CompareOp::*;
        let ops = [Eq, NotEq, NotEqAngle, Lt, Gt, Le, Ge, Like];
        let op = ops[self.rng.next_below(ops.len())];
        let rhs = if op == Like {
            let strings = ["%", "a%", "%x", "red"];
            Literal::Str(self.pick(&strings).to_string())
        } else {
            self.literal()
        };
        Comparison::new(self.ident(), op, rhs)
    }

    pub fn cond(&mut self, depth: usize) -> Cond {
        if depth == 0 || self.rng.next_below(10) < 5 {
            return Cond::Leaf(self.comparison());
        }
        let left = self.cond(depth - 1);
        let right = self.cond(depth - 1);
        if self.rng.next_below(2) == 0 {
            Cond::and(left, right)
        } else {
            Cond::or(left, right)
        }
    }

    pub fn select_expr(&mut self) -> SelectExpr {
        if self.rng.next_below(3) == 0 {
            self.aggregate_expr()
        } else {
            SelectExpr::Column(self.ident())
        }
    }

    pub fn aggregate_expr(&mut self) -> SelectExpr {
        let funcs = [AggFunc::Count, AggFunc::Sum, AggFunc::Avg, AggFunc::Min, AggFunc::Max];
        let func = funcs[self.rng.next_below(funcs.len())];
        let arg = if self.rng.next_below(4) == 0 {
            AggArg::Star
        } else {
            AggArg::Column(self.ident())
        };
        SelectExpr::Aggregate { func, arg }
    }

    fn bin(&mut self) -> Bin {
        let units = [BinUnit::Year, BinUnit::Month, BinUnit::Day, BinUnit::Weekday];
        Bin { column: self.ident(), unit: units[self.rng.next_below(units.len())] }
    }

    pub fn query(&mut self) -> DVQuery {
        let single_agg_with_bin = self.rng.next_below(5) == 0;
        let (select, bin) = if single_agg_with_bin {
            (vec![self.aggregate_expr()], Some(self.bin()))
        } else {
            let n = 2 + self.rng.next_below(2);
            let select = (0..n).map(|_| self.select_expr()).collect();
            let bin = if self.rng.next_below(4) == 0 { Some(self.bin()) } else { None };
            (select, bin)
        };
        let joins = (0..self.rng.next_below(3))
            .map(|_| Join {
                table: self.pick(&TABLES).to_string(),
                left: format!("{}.{}", self.pick(&TABLES), self.ident()),
                right: format!("{}.{}", self.pick(&TABLES), self.ident()),
            })
            .collect();
        let where_cond = if self.rng.next_below(3) > 0 { Some(self.cond(2)) } else { None };
        let group_by = (0..self.rng.next_below(3)).map(|_| self.ident()).collect();
        let order_by = if self.rng.next_below(2) == 0 {
            let dirs = [None, Some(SortDir::Asc), Some(SortDir::Desc)];
            Some(OrderBy {
                expr: self.select_expr(),
                dir: dirs[self.rng.next_below(dirs.len())],
            })
        } else {
            None
        };
        DVQuery {
            chart: self.chart(),
            select,
            from_table: self.pick(&TABLES).to_string(),
            joins,
            where_cond,
            group_by,
            order_by,
            bin,
        }
    }
}

pub fn sales_schema() -> Schema {
    Schema {
        tables: vec![Table {
            name: "sales".into(),
            columns: vec![
                Column { name: "region".into(), ty: ColumnType::Str },
                Column { name: "product".into(), ty: ColumnType::Str },
                Column { name: "amount".into(), ty: ColumnType::Num },
                Column { name: "year".into(), ty: ColumnType::Num },
            ],
        }],
    }
}

/// Synthetic corpus with varied charts and WHERE coverage. Questions are
/// pairwise distinct, avoid the rare-word trigger tokens, and never start
/// with the first-word triggers.
pub fn synthetic_corpus(n: usize) -> Vec<Example> {
    let charts = ["PIE", "LINE", "SCATTER", "BAR"];
    (0..n)
        .map(|i| {
            let chart = charts[i % charts.len()];
            let (nlq, dvq) = match i % 4 {
                0 => (
                    format!("Show the total amount of product batch{i} by region ."),
                    format!(
                        "VISUALIZE {chart} SELECT region , SUM(amount) FROM sales WHERE product = \"batch{i}\" GROUP BY region"
                    ),
                ),
                1 => (
                    format!("Plot the number of sales in region zone{i} by year ."),
                    format!(
                        "VISUALIZE {chart} SELECT year , COUNT(year) FROM sales WHERE region = \"zone{i}\" GROUP BY year"
                    ),
                ),
                2 => (
                    format!("List the amount of every sale above level {i} ."),
                    format!("VISUALIZE {chart} SELECT product , amount FROM sales WHERE amount > {i}"),
                ),
                _ => (
                    format!("Compare the yearly totals across group {i} please ."),
                    format!("VISUALIZE {chart} SELECT year , SUM(amount) FROM sales GROUP BY year ORDER BY SUM(amount) DESC"),
                ),
            };
            Example::new(format!("ex{i:04}"), nlq, sales_schema(), dvq).unwrap()
        })
        .collect()
}

/// Corpus where every example is eligible for all three attacks: a WHERE
/// clause and a non-bar chart.
pub fn all_eligible_corpus(n: usize) -> Vec<Example> {
    let charts = ["PIE", "LINE", "SCATTER"];
    (0..n)
        .map(|i| {
            let chart = charts[i % charts.len()];
            let nlq = format!("Show the total amount of product batch{i} by region .");
            let dvq = format!(
                "VISUALIZE {chart} SELECT region , SUM(amount) FROM sales WHERE product = \"batch{i}\" GROUP BY region"
            );
            Example::new(format!("el{i:04}"), nlq, sales_schema(), dvq).unwrap()
        })
        .collect()
}

const PRODUCT_WORDS: [&str; 10] = [
    "alpha", "beta", "gamma", "delta", "epsilon", "zeta", "eta", "theta", "iota", "kappa",
];
const GROUP_WORDS: [&str; 4] = ["region", "year", "name", "color"];
const VERB_WORDS: [&str; 3] = ["Show", "Plot", "List"];

/// All-eligible corpus over a closed vocabulary: every content word occurs
/// several times, so a language model trained on these questions treats
/// them all as in-distribution. Questions are pairwise distinct for
/// `n <= 120`.
pub fn closed_vocab_corpus(n: usize) -> Vec<Example> {
    assert!(n <= 120, "only 120 distinct combinations available");
    let charts = ["PIE", "LINE", "SCATTER"];
    (0..n)
        .map(|i| {
            let product = PRODUCT_WORDS[i % 10];
            let group = GROUP_WORDS[(i / 10) % 4];
            let verb = VERB_WORDS[(i / 40) % 3];
            let chart = charts[i % charts.len()];
            let nlq = format!("{verb} the total amount of product {product} by {group} .");
            let dvq = format!(
                "VISUALIZE {chart} SELECT {group} , SUM(amount) FROM sales WHERE product = \"{product}\" GROUP BY {group}"
            );
            Example::new(format!("cv{i:04}"), nlq, sales_schema(), dvq).unwrap()
        })
        .collect()
}

/// Corpus with nine-token questions, so rare-word poisoning inserts
/// exactly one trigger token (a single deletion can untrigger the
/// backdoor). Each question carries two distinctive tokens, keeping
/// nearest-neighbor lookup stable under any single deletion. All examples
/// are eligible for every attack.
pub fn short_corpus(n: usize) -> Vec<Example> {
    let charts = ["PIE", "LINE", "SCATTER"];
    (0..n)
        .map(|i| {
            let chart = charts[i % charts.len()];
            let nlq = format!("Show the amount of product batch{i} in area zone{i}");
            let dvq = format!(
                "VISUALIZE {chart} SELECT region , SUM(amount) FROM sales WHERE product = \"batch{i}\""
            );
            Example::new(format!("sc{i:04}"), nlq, sales_schema(), dvq).unwrap()
        })
        .collect()
}

/// Temp directory that cleans up after itself.
pub struct TempDir {
    path: PathBuf,
}

impl TempDir {
    pub fn new(label: &str) -> Self {
        let path = std::env::temp_dir().join(format!(
            "poisonviz-{label}-{}-{}",
            std::process::id(),
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .unwrap()
                .as_nanos()
        ));
        std::fs::create_dir_all(&path).unwrap();
        Self { path }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }
}

impl Drop for TempDir {
    fn drop(&mut self) {
        let _ = std::fs::remove_dir_all(&self.path);
    }
}

/// Recursively collect (relative path, bytes) for every file under `root`,
/// sorted by path.
pub fn snapshot_tree(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    fn walk(dir: &Path, root: &Path, out: &mut Vec<(String, Vec<u8>)>) {
        let mut entries: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap()).collect();
        entries.sort_by_key(|e| e.file_name());
        for entry in entries {
            let path = entry.path();
            if path.is_dir() {
                walk(&path, root, out);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    walk(root, root, &mut out);
    out
}
