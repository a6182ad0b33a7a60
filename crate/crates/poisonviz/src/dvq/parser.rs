//! Lexer and recursive-descent parser for DVQ text.
//!
//! Keywords match case-insensitively; identifiers keep their written case.
//! Errors carry the byte offset of the offending token plus the token set
//! the parser would have accepted there, so corpus ingestion can report
//! rejects precisely instead of dropping records.

use super::ast::*;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: found {found}, expected {}", expected.join(" | "))]
    Syntax {
        offset: usize,
        expected: Vec<String>,
        found: String,
    },
    #[error("unsupported construct at byte {offset}: {construct}")]
    Unsupported { offset: usize, construct: String },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. } | ParseError::Unsupported { offset, .. } => *offset,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Num(String),
    Str(String),
    Comma,
    LParen,
    RParen,
    Star,
    Op(&'static str),
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Word(w) => format!("'{w}'"),
            Tok::Num(n) => format!("number '{n}'"),
            Tok::Str(s) => format!("string \"{s}\""),
            Tok::Comma => "','".into(),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::Star => "'*'".into(),
            Tok::Op(o) => format!("'{o}'"),
            Tok::Eof => "end of input".into(),
        }
    }
}

struct Lexer<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Self { src, bytes: src.as_bytes(), pos: 0 }
    }

    fn tokenize(mut self) -> Result<Vec<(Tok, usize)>, ParseError> {
        let mut out = Vec::new();
        loop {
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            if self.pos >= self.bytes.len() {
                out.push((Tok::Eof, self.pos));
                return Ok(out);
            }
            let start = self.pos;
            let b = self.bytes[start];
            let tok = match b {
                b',' => {
                    self.pos += 1;
                    Tok::Comma
                }
                b'(' => {
                    self.pos += 1;
                    Tok::LParen
                }
                b')' => {
                    self.pos += 1;
                    Tok::RParen
                }
                b'*' => {
                    self.pos += 1;
                    Tok::Star
                }
                b'=' => {
                    self.pos += 1;
                    Tok::Op("=")
                }
                b'!' => {
                    if self.peek(1) == Some(b'=') {
                        self.pos += 2;
                        Tok::Op("!=")
                    } else {
                        return Err(self.unexpected_char(start));
                    }
                }
                b'<' => match self.peek(1) {
                    Some(b'>') => {
                        self.pos += 2;
                        Tok::Op("<>")
                    }
                    Some(b'=') => {
                        self.pos += 2;
                        Tok::Op("<=")
                    }
                    _ => {
                        self.pos += 1;
                        Tok::Op("<")
                    }
                },
                b'>' => {
                    if self.peek(1) == Some(b'=') {
                        self.pos += 2;
                        Tok::Op(">=")
                    } else {
                        self.pos += 1;
                        Tok::Op(">")
                    }
                }
                b'\'' | b'"' => {
                    let quote = b;
                    self.pos += 1;
                    let content_start = self.pos;
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != quote {
                        self.pos += 1;
                    }
                    if self.pos >= self.bytes.len() {
                        return Err(ParseError::Syntax {
                            offset: start,
                            expected: vec!["closing quote".into()],
                            found: "unterminated string".into(),
                        });
                    }
                    let content = self.src[content_start..self.pos].to_string();
                    self.pos += 1;
                    Tok::Str(content)
                }
                b'-' | b'0'..=b'9' => self.lex_number(start)?,
                b'.' => {
                    return Err(self.unexpected_char(start));
                }
                _ if b.is_ascii_alphabetic() || b == b'_' => self.lex_word(start),
                _ => return Err(self.unexpected_char(start)),
            };
            out.push((tok, start));
        }
    }

    fn peek(&self, ahead: usize) -> Option<u8> {
        self.bytes.get(self.pos + ahead).copied()
    }

    fn unexpected_char(&self, offset: usize) -> ParseError {
        let ch = self.src[offset..].chars().next().unwrap_or('?');
        ParseError::Syntax {
            offset,
            expected: vec!["token".into()],
            found: format!("character '{ch}'"),
        }
    }

    fn lex_number(&mut self, start: usize) -> Result<Tok, ParseError> {
        self.pos = start;
        if self.bytes[self.pos] == b'-' {
            self.pos += 1;
        }
        let digits_start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == digits_start {
            return Err(ParseError::Syntax {
                offset: start,
                expected: vec!["digit".into()],
                found: "'-' without digits".into(),
            });
        }
        if self.peek(0) == Some(b'.') {
            let after_dot = self.pos + 1;
            self.pos += 1;
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if self.pos == after_dot {
                return Err(ParseError::Syntax {
                    offset: start,
                    expected: vec!["digit after '.'".into()],
                    found: "bare decimal point".into(),
                });
            }
        }
        Ok(Tok::Num(self.src[start..self.pos].to_string()))
    }

    fn lex_word(&mut self, start: usize) -> Tok {
        // identifiers allow qualifying dots: table.column
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            let dot_into_ident = b == b'.'
                && self
                    .peek(1)
                    .is_some_and(|n| n.is_ascii_alphabetic() || n == b'_');
            if b.is_ascii_alphanumeric() || b == b'_' || dot_into_ident {
                self.pos += 1;
            } else {
                break;
            }
        }
        Tok::Word(self.src[start..self.pos].to_string())
    }
}

/// Parse DVQ text into its AST. Never panics: any input either yields a
/// query or a [`ParseError`] with an offset.
pub fn parse(text: &str) -> Result<DVQuery, ParseError> {
    if text.trim().is_empty() {
        return Err(ParseError::Syntax {
            offset: 0,
            expected: vec!["VISUALIZE".into()],
            found: "empty input".into(),
        });
    }
    let tokens = Lexer::new(text).tokenize()?;
    Parser { tokens, idx: 0 }.parse_query()
}

struct Parser {
    tokens: Vec<(Tok, usize)>,
    idx: usize,
}

impl Parser {
    fn cur(&self) -> &Tok {
        &self.tokens[self.idx].0
    }

    fn cur_offset(&self) -> usize {
        self.tokens[self.idx].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.tokens[self.idx].0.clone();
        if self.idx + 1 < self.tokens.len() {
            self.idx += 1;
        }
        t
    }

    fn err(&self, expected: &[&str]) -> ParseError {
        ParseError::Syntax {
            offset: self.cur_offset(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: self.cur().describe(),
        }
    }

    /// True when the current token is the given keyword (case-insensitive).
    fn at_keyword(&self, kw: &str) -> bool {
        matches!(self.cur(), Tok::Word(w) if w.eq_ignore_ascii_case(kw))
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.at_keyword(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.eat_keyword(kw) {
            Ok(())
        } else {
            Err(self.err(&[kw]))
        }
    }

    fn expect_ident(&mut self, what: &str) -> Result<String, ParseError> {
        match self.cur() {
            Tok::Word(w) => {
                let w = w.clone();
                self.bump();
                Ok(w)
            }
            _ => Err(self.err(&[what])),
        }
    }

    fn parse_query(&mut self) -> Result<DVQuery, ParseError> {
        self.expect_keyword("VISUALIZE")?;
        let chart = self.parse_chart()?;
        let select_offset = self.cur_offset();
        self.expect_keyword("SELECT")?;
        let select = self.parse_select_list()?;
        self.expect_keyword("FROM")?;
        let from_table = self.expect_ident("table name")?;

        let mut joins = Vec::new();
        while self.at_keyword("JOIN") {
            self.bump();
            let table = self.expect_ident("table name")?;
            self.expect_keyword("ON")?;
            let left = self.expect_ident("column reference")?;
            match self.cur() {
                Tok::Op("=") => {
                    self.bump();
                }
                _ => return Err(self.err(&["="])),
            }
            let right = self.expect_ident("column reference")?;
            joins.push(Join { table, left, right });
        }

        let where_cond = if self.eat_keyword("WHERE") {
            Some(self.parse_or_cond()?)
        } else {
            None
        };

        let mut group_by = Vec::new();
        if self.at_keyword("GROUP") {
            self.bump();
            self.expect_keyword("BY")?;
            group_by.push(self.expect_ident("column")?);
            while matches!(self.cur(), Tok::Comma) {
                self.bump();
                group_by.push(self.expect_ident("column")?);
            }
        }

        let order_by = if self.at_keyword("ORDER") {
            self.bump();
            self.expect_keyword("BY")?;
            let expr = self.parse_select_expr()?;
            let dir = if self.eat_keyword("ASC") {
                Some(SortDir::Asc)
            } else if self.eat_keyword("DESC") {
                Some(SortDir::Desc)
            } else {
                None
            };
            Some(OrderBy { expr, dir })
        } else {
            None
        };

        let bin = if self.at_keyword("BIN") {
            self.bump();
            let column = self.expect_ident("column")?;
            self.expect_keyword("BY")?;
            let unit_offset = self.cur_offset();
            let word = self.expect_ident("bin unit")?;
            let unit = match word.to_ascii_uppercase().as_str() {
                "YEAR" => BinUnit::Year,
                "MONTH" => BinUnit::Month,
                "DAY" => BinUnit::Day,
                "WEEKDAY" => BinUnit::Weekday,
                other => {
                    return Err(ParseError::Unsupported {
                        offset: unit_offset,
                        construct: format!("bin unit '{other}'"),
                    })
                }
            };
            Some(Bin { column, unit })
        } else {
            None
        };

        if !matches!(self.cur(), Tok::Eof) {
            return Err(self.err(&["end of input"]));
        }

        let query = DVQuery {
            chart,
            select,
            from_table,
            joins,
            where_cond,
            group_by,
            order_by,
            bin,
        };

        // x/y axis shape rule: one select entry is only legal as an
        // aggregate paired with BIN
        if query.select.len() < 2
            && !(query.select.len() == 1 && query.select[0].is_aggregate() && query.bin.is_some())
        {
            return Err(ParseError::Unsupported {
                offset: select_offset,
                construct: "SELECT list with a single entry that is not an aggregate paired with BIN"
                    .into(),
            });
        }

        Ok(query)
    }

    fn parse_chart(&mut self) -> Result<ChartType, ParseError> {
        let offset = self.cur_offset();
        let word = match self.cur() {
            Tok::Word(w) => w.to_ascii_uppercase(),
            _ => return Err(self.err(&["chart type"])),
        };
        self.bump();
        let chart = match word.as_str() {
            "BAR" => ChartType::Bar,
            "PIE" => ChartType::Pie,
            "LINE" => ChartType::Line,
            "SCATTER" => ChartType::Scatter,
            "STACKED" => {
                self.expect_keyword("BAR")?;
                ChartType::StackedBar
            }
            "GROUPED" => {
                if self.eat_keyword("LINE") {
                    ChartType::GroupedLine
                } else if self.eat_keyword("SCATTER") {
                    ChartType::GroupedScatter
                } else {
                    return Err(self.err(&["LINE", "SCATTER"]));
                }
            }
            other => {
                return Err(ParseError::Unsupported {
                    offset,
                    construct: format!("chart type '{other}'"),
                })
            }
        };
        Ok(chart)
    }

    fn parse_select_list(&mut self) -> Result<Vec<SelectExpr>, ParseError> {
        let mut out = vec![self.parse_select_expr()?];
        while matches!(self.cur(), Tok::Comma) {
            self.bump();
            out.push(self.parse_select_expr()?);
        }
        Ok(out)
    }

    fn parse_select_expr(&mut self) -> Result<SelectExpr, ParseError> {
        let word = match self.cur() {
            Tok::Word(w) => w.clone(),
            _ => return Err(self.err(&["column", "aggregate"])),
        };
        let func = match word.to_ascii_uppercase().as_str() {
            "COUNT" => Some(AggFunc::Count),
            "SUM" => Some(AggFunc::Sum),
            "AVG" => Some(AggFunc::Avg),
            "MIN" => Some(AggFunc::Min),
            "MAX" => Some(AggFunc::Max),
            _ => None,
        };
        self.bump();
        if let Some(func) = func {
            if matches!(self.cur(), Tok::LParen) {
                self.bump();
                let arg = match self.cur() {
                    Tok::Star => {
                        self.bump();
                        AggArg::Star
                    }
                    Tok::Word(w) => {
                        let w = w.clone();
                        self.bump();
                        AggArg::Column(w)
                    }
                    _ => return Err(self.err(&["column", "*"])),
                };
                if !matches!(self.cur(), Tok::RParen) {
                    return Err(self.err(&[")"]));
                }
                self.bump();
                return Ok(SelectExpr::Aggregate { func, arg });
            }
            // an aggregate keyword without parens is a plain column name
        }
        Ok(SelectExpr::Column(word))
    }

    fn parse_or_cond(&mut self) -> Result<Cond, ParseError> {
        let mut acc = self.parse_and_cond()?;
        while self.at_keyword("OR") {
            self.bump();
            let rhs = self.parse_and_cond()?;
            acc = Cond::or(acc, rhs);
        }
        Ok(acc)
    }

    fn parse_and_cond(&mut self) -> Result<Cond, ParseError> {
        let mut acc = self.parse_cond_primary()?;
        while self.at_keyword("AND") {
            self.bump();
            let rhs = self.parse_cond_primary()?;
            acc = Cond::and(acc, rhs);
        }
        Ok(acc)
    }

    fn parse_cond_primary(&mut self) -> Result<Cond, ParseError> {
        if matches!(self.cur(), Tok::LParen) {
            self.bump();
            let inner = self.parse_or_cond()?;
            if !matches!(self.cur(), Tok::RParen) {
                return Err(self.err(&[")"]));
            }
            self.bump();
            return Ok(inner);
        }
        let column = match self.cur() {
            Tok::Word(w) if !w.eq_ignore_ascii_case("AND") && !w.eq_ignore_ascii_case("OR") => {
                w.clone()
            }
            _ => return Err(self.err(&["column", "("])),
        };
        self.bump();
        let op = match self.cur() {
            Tok::Op("=") => CompareOp::Eq,
            Tok::Op("!=") => CompareOp::NotEq,
            Tok::Op("<>") => CompareOp::NotEqAngle,
            Tok::Op("<") => CompareOp::Lt,
            Tok::Op(">") => CompareOp::Gt,
            Tok::Op("<=") => CompareOp::Le,
            Tok::Op(">=") => CompareOp::Ge,
            Tok::Word(w) if w.eq_ignore_ascii_case("LIKE") => CompareOp::Like,
            _ => return Err(self.err(&["=", "!=", "<>", "<", ">", "<=", ">=", "LIKE"])),
        };
        self.bump();
        let lit_offset = self.cur_offset();
        let rhs = match self.cur() {
            Tok::Str(s) => {
                let s = s.clone();
                self.bump();
                Literal::Str(s)
            }
            Tok::Num(n) => {
                let text = n.clone();
                self.bump();
                let value: f64 = text.parse().map_err(|_| ParseError::Syntax {
                    offset: lit_offset,
                    expected: vec!["numeric literal".into()],
                    found: format!("'{text}'"),
                })?;
                Literal::Num(NumLit::new(text, value))
            }
            _ => return Err(self.err(&["string literal", "numeric literal"])),
        };
        if op == CompareOp::Like && !rhs.is_str() {
            return Err(ParseError::Syntax {
                offset: lit_offset,
                expected: vec!["string literal".into()],
                found: "numeric literal".into(),
            });
        }
        Ok(Cond::Leaf(Comparison { column, op, rhs }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const WINE: &str = "Visualize BAR SELECT Winery , COUNT(Winery) FROM WINE WHERE Price > 100 GROUP BY Winery ORDER BY COUNT(Winery) DESC";

    #[test]
    fn parses_the_wine_query() {
        let q = parse(WINE).unwrap();
        assert_eq!(q.chart, ChartType::Bar);
        assert_eq!(
            q.select,
            vec![
                SelectExpr::column("Winery"),
                SelectExpr::aggregate(AggFunc::Count, AggArg::Column("Winery".into())),
            ]
        );
        assert_eq!(q.from_table, "WINE");
        assert_eq!(
            q.where_cond,
            Some(Cond::leaf("Price", CompareOp::Gt, Literal::num(100.0)))
        );
        assert_eq!(q.group_by, vec!["Winery".to_string()]);
        let ord = q.order_by.unwrap();
        assert_eq!(
            ord.expr,
            SelectExpr::aggregate(AggFunc::Count, AggArg::Column("Winery".into()))
        );
        assert_eq!(ord.dir, Some(SortDir::Desc));
        assert!(q.bin.is_none());
    }

    #[test]
    fn minimal_query_has_no_optional_clauses() {
        let q = parse("Visualize PIE SELECT Name , Score FROM wine").unwrap();
        assert_eq!(q.chart, ChartType::Pie);
        assert!(q.where_cond.is_none());
        assert!(q.group_by.is_empty());
        assert!(q.order_by.is_none());
        assert!(q.bin.is_none());
    }

    #[test]
    fn missing_visualize_clause_is_a_syntax_error() {
        let err = parse("SELECT a FROM t").unwrap_err();
        match err {
            ParseError::Syntax { offset, expected, .. } => {
                assert_eq!(offset, 0);
                assert!(expected.contains(&"VISUALIZE".to_string()));
            }
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn precedence_and_binds_tighter_than_or() {
        let q = parse("VISUALIZE BAR SELECT a , b FROM t WHERE a = 1 AND b = 2 OR c = 3").unwrap();
        let cond = q.where_cond.unwrap();
        match cond {
            Cond::Or(l, r) => {
                assert!(matches!(*l, Cond::And(_, _)));
                assert!(matches!(*r, Cond::Leaf(_)));
            }
            other => panic!("expected Or at root, got {other:?}"),
        }

        let q = parse("VISUALIZE BAR SELECT a , b FROM t WHERE a = 1 OR b = 2 AND c = 3").unwrap();
        match q.where_cond.unwrap() {
            Cond::Or(l, r) => {
                assert!(matches!(*l, Cond::Leaf(_)));
                assert!(matches!(*r, Cond::And(_, _)));
            }
            other => panic!("expected Or at root, got {other:?}"),
        }
    }

    #[test]
    fn stacked_bar_parses_as_one_chart() {
        let q = parse("VISUALIZE STACKED BAR SELECT a , b FROM t").unwrap();
        assert_eq!(q.chart, ChartType::StackedBar);
    }

    #[test]
    fn single_aggregate_with_bin_is_legal() {
        let q = parse("VISUALIZE BAR SELECT COUNT(date) FROM t BIN date BY YEAR").unwrap();
        assert_eq!(q.select.len(), 1);
        assert!(q.bin.is_some());
    }

    #[test]
    fn single_plain_column_is_rejected() {
        let err = parse("VISUALIZE BAR SELECT a FROM t").unwrap_err();
        assert!(matches!(err, ParseError::Unsupported { .. }));
    }

    #[test]
    fn like_requires_string_literal() {
        let err = parse("VISUALIZE BAR SELECT a , b FROM t WHERE a LIKE 5").unwrap_err();
        match err {
            ParseError::Syntax { expected, .. } => {
                assert_eq!(expected, vec!["string literal".to_string()]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn single_quoted_strings_are_accepted() {
        let q = parse("VISUALIZE BAR SELECT a , b FROM t WHERE name LIKE '%'").unwrap();
        let leaves = q.where_cond.as_ref().unwrap().leaves();
        assert_eq!(leaves[0].rhs, Literal::str("%"));
    }

    #[test]
    fn join_clause_round_trips_through_ast() {
        let q = parse("VISUALIZE BAR SELECT a , b FROM t JOIN u ON t.id = u.id").unwrap();
        assert_eq!(
            q.joins,
            vec![Join { table: "u".into(), left: "t.id".into(), right: "u.id".into() }]
        );
    }

    #[test]
    fn trailing_tokens_are_rejected() {
        let err = parse("VISUALIZE BAR SELECT a , b FROM t extra").unwrap_err();
        assert!(matches!(err, ParseError::Syntax { .. }));
    }

    #[test]
    fn negative_numbers_lex_as_literals() {
        let q = parse("VISUALIZE BAR SELECT a , b FROM t WHERE x = -99999999999.0").unwrap();
        let leaves = q.where_cond.as_ref().unwrap().leaves();
        match &leaves[0].rhs {
            Literal::Num(n) => {
                assert_eq!(n.text, "-99999999999.0");
                assert_eq!(n.value, -99999999999.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn garbage_never_panics() {
        for s in ["", "   ", "!!!", "VISUALIZE", "VISUALIZE BAR SELECT", "\u{1F600}"] {
            let _ = parse(s);
        }
    }
}
