//! Hand-written lexer and recursive-descent parser for command chains.
//!
//! ```text
//! chain    := [command (";" command)* [";"]]
//! command  := SELECT ident ("," ident)*
//!           | FILTER expr
//!           | SORT ident [ASC | DESC]
//!           | GROUPBY [ident ("," ident)*] agg ("," agg)*
//!           | DERIVE ident "=" expr
//!           | SLICE TOP int | SLICE int TO int
//!           | UPDATE ident "=" expr [WHERE expr]
//!           | INSERT VALUES "(" literal ("," literal)* ")"
//!           | DELETE WHERE expr
//!           | DESCRIBE [ident ("," ident)*]
//!           | PLOT (BAR|LINE|SCATTER|HIST) ident [ident] [AGG aggfn]
//!           | PREDICT ident [USING ident ("," ident)*]
//! agg      := aggfn "(" ident ")" [AS ident]
//! aggfn    := SUM | MEAN | COUNT | MIN | MAX
//! expr     := or ; or := and (OR and)* ; and := not (AND not)*
//! not      := NOT not | cmp ; cmp := add [("="|"!="|"<"|"<="|">"|">=") add]
//! add      := mul (("+"|"-") mul)* ; mul := unary (("*"|"/") unary)*
//! unary    := "-" unary | primary
//! primary  := number | string | TRUE | FALSE | NULL | TIMESTAMP string
//!           | ident | "(" expr ")"
//! ```
//!
//! Keywords are case-insensitive. Identifiers are bare (`[A-Za-z_][A-Za-z0-9_]*`)
//! or backtick-quoted with doubled backticks as the escape. A `-` directly in
//! front of a number literal folds into a negative literal.

use std::fmt;

use crate::value::{parse_datetime, Value};

use super::ast::{AggFunc, Aggregate, BinOp, Command, CommandChain, Expr, PlotKind, SortOrder, UnaryOp};

const MAX_EXPR_DEPTH: usize = 128;

/// Words that can never be bare identifiers.
pub(crate) const RESERVED: [&str; 8] = ["AND", "OR", "NOT", "TRUE", "FALSE", "NULL", "WHERE", "TIMESTAMP"];

pub(crate) fn is_reserved(word: &str) -> bool {
    RESERVED.iter().any(|k| k.eq_ignore_ascii_case(word))
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub expected: String,
    pub found: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "parse error at line {}, column {}: expected {}, found {}",
            self.line, self.col, self.expected, self.found
        )
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Quoted(String),
    Number(String),
    Str(String),
    Sym(&'static str),
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Word(w) => format!("`{w}`"),
            Tok::Quoted(w) => format!("quoted identifier `{w}`"),
            Tok::Number(n) => format!("number {n}"),
            Tok::Str(s) => format!("string '{s}'"),
            Tok::Sym(s) => format!("'{s}'"),
            Tok::Eof => "end of input".to_string(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);

    macro_rules! advance {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            i += 1;
        }};
    }

    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            advance!();
            continue;
        }
        let (tl, tc) = (line, col);
        let err = |expected: &str, found: String, line: usize, col: usize| ParseError {
            line,
            col,
            expected: expected.to_string(),
            found,
        };
        let tok = if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                advance!();
            }
            Tok::Word(chars[start..i].iter().collect())
        } else if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                advance!();
            }
            if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit() {
                advance!();
                while i < chars.len() && chars[i].is_ascii_digit() {
                    advance!();
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    while i < j {
                        advance!();
                    }
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        advance!();
                    }
                }
            }
            if i < chars.len() && (chars[i].is_ascii_alphabetic() || chars[i] == '_') {
                return Err(err("operator or separator", format!("'{}'", chars[i]), line, col));
            }
            Tok::Number(chars[start..i].iter().collect())
        } else if c == '\'' || c == '`' {
            let quote = c;
            advance!();
            let mut s = String::new();
            loop {
                if i >= chars.len() {
                    let what = if quote == '\'' { "closing quote" } else { "closing backtick" };
                    return Err(err(what, "end of input".into(), line, col));
                }
                if chars[i] == quote {
                    if i + 1 < chars.len() && chars[i + 1] == quote {
                        s.push(quote);
                        advance!();
                        advance!();
                        continue;
                    }
                    advance!();
                    break;
                }
                s.push(chars[i]);
                advance!();
            }
            if quote == '\'' {
                Tok::Str(s)
            } else if s.is_empty() {
                return Err(err("non-empty quoted identifier", "``".into(), tl, tc));
            } else {
                Tok::Quoted(s)
            }
        } else {
            let next = chars.get(i + 1).copied();
            let (sym, width): (&'static str, usize) = match (c, next) {
                ('!', Some('=')) => ("!=", 2),
                ('<', Some('=')) => ("<=", 2),
                ('>', Some('=')) => (">=", 2),
                ('<', Some('>')) => ("!=", 2),
                ('(', _) => ("(", 1),
                (')', _) => (")", 1),
                (',', _) => (",", 1),
                (';', _) => (";", 1),
                ('=', _) => ("=", 1),
                ('<', _) => ("<", 1),
                ('>', _) => (">", 1),
                ('+', _) => ("+", 1),
                ('-', _) => ("-", 1),
                ('*', _) => ("*", 1),
                ('/', _) => ("/", 1),
                _ => return Err(err("token", format!("'{c}'"), tl, tc)),
            };
            for _ in 0..width {
                advance!();
            }
            Tok::Sym(sym)
        };
        out.push(Token {
            tok,
            line: tl,
            col: tc,
        });
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    depth: usize,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        let i = (self.pos + offset).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &str) -> ParseError {
        let t = &self.toks[self.pos];
        ParseError {
            line: t.line,
            col: t.col,
            expected: expected.to_string(),
            found: t.tok.describe(),
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Word(w) if w.eq_ignore_ascii_case(kw))
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.is_keyword(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> PResult<()> {
        if self.eat_keyword(kw) {
            Ok(())
        } else {
            Err(self.error(&format!("keyword {kw}")))
        }
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> PResult<()> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            Err(self.error(&format!("'{s}'")))
        }
    }

    fn at_ident(&self) -> bool {
        match self.peek() {
            Tok::Word(w) => !is_reserved(w),
            Tok::Quoted(_) => true,
            _ => false,
        }
    }

    fn ident(&mut self, what: &str) -> PResult<String> {
        if self.at_ident() {
            match self.bump() {
                Tok::Word(w) | Tok::Quoted(w) => Ok(w),
                _ => unreachable!("at_ident checked the token kind"),
            }
        } else {
            Err(self.error(what))
        }
    }

    fn ident_list(&mut self, what: &str) -> PResult<Vec<String>> {
        let mut out = vec![self.ident(what)?];
        while self.eat_sym(",") {
            out.push(self.ident(what)?);
        }
        Ok(out)
    }

    fn usize_lit(&mut self, what: &str) -> PResult<usize> {
        match self.peek().clone() {
            Tok::Number(n) if n.bytes().all(|b| b.is_ascii_digit()) => match n.parse() {
                Ok(v) => {
                    self.bump();
                    Ok(v)
                }
                Err(_) => Err(self.error(what)),
            },
            _ => Err(self.error(what)),
        }
    }

    fn chain(&mut self) -> PResult<CommandChain> {
        let mut commands = Vec::new();
        let mut predict_at: Option<(usize, usize)> = None;
        if matches!(self.peek(), Tok::Eof) {
            return Ok(CommandChain::default());
        }
        loop {
            let start = &self.toks[self.pos];
            let (line, col) = (start.line, start.col);
            if let Some((pl, pc)) = predict_at {
                return Err(ParseError {
                    line: pl,
                    col: pc,
                    expected: "PREDICT as the last command".into(),
                    found: "commands after PREDICT".into(),
                });
            }
            let cmd = self.command()?;
            if matches!(cmd, Command::Predict { .. }) {
                predict_at = Some((line, col));
            }
            commands.push(cmd);
            if self.eat_sym(";") {
                if matches!(self.peek(), Tok::Eof) {
                    break;
                }
                continue;
            }
            if matches!(self.peek(), Tok::Eof) {
                break;
            }
            return Err(self.error("';' or end of input"));
        }
        Ok(CommandChain { commands })
    }

    fn command(&mut self) -> PResult<Command> {
        let word = match self.peek() {
            Tok::Word(w) => w.to_ascii_uppercase(),
            _ => return Err(self.error("command keyword")),
        };
        let cmd = match word.as_str() {
            "SELECT" => {
                self.bump();
                Command::Select(self.ident_list("column identifier")?)
            }
            "FILTER" => {
                self.bump();
                Command::Filter(self.expr()?)
            }
            "SORT" => {
                self.bump();
                let column = self.ident("column identifier")?;
                let order = if self.eat_keyword("DESC") {
                    SortOrder::Desc
                } else {
                    self.eat_keyword("ASC");
                    SortOrder::Asc
                };
                Command::Sort { column, order }
            }
            "GROUPBY" => {
                self.bump();
                self.group_by()?
            }
            "DERIVE" => {
                self.bump();
                let name = self.ident("output column identifier")?;
                self.expect_sym("=")?;
                Command::Derive {
                    name,
                    expr: self.expr()?,
                }
            }
            "SLICE" => {
                self.bump();
                if self.eat_keyword("TOP") {
                    let n = self.usize_lit("positive integer")?;
                    if n == 0 {
                        self.pos -= 1;
                        return Err(self.error("positive integer"));
                    }
                    Command::SliceTop(n)
                } else {
                    let lo = self.usize_lit("TOP or a row index")?;
                    self.expect_keyword("TO")?;
                    let hi = self.usize_lit("row index")?;
                    if hi < lo {
                        self.pos -= 1;
                        return Err(self.error(&format!("row index >= {lo}")));
                    }
                    Command::SliceRange { lo, hi }
                }
            }
            "UPDATE" => {
                self.bump();
                let column = self.ident("column identifier")?;
                self.expect_sym("=")?;
                let value = self.expr()?;
                let predicate = if self.eat_keyword("WHERE") {
                    self.expr()?
                } else {
                    Expr::Lit(Value::Bool(true))
                };
                Command::Update {
                    column,
                    value,
                    predicate,
                }
            }
            "INSERT" => {
                self.bump();
                self.expect_keyword("VALUES")?;
                self.expect_sym("(")?;
                let mut values = vec![self.literal()?];
                while self.eat_sym(",") {
                    values.push(self.literal()?);
                }
                self.expect_sym(")")?;
                Command::InsertRow(values)
            }
            "DELETE" => {
                self.bump();
                self.expect_keyword("WHERE")?;
                Command::DeleteWhere(self.expr()?)
            }
            "DESCRIBE" => {
                self.bump();
                if self.at_ident() {
                    Command::Describe(Some(self.ident_list("column identifier")?))
                } else {
                    Command::Describe(None)
                }
            }
            "PLOT" => {
                self.bump();
                self.plot()?
            }
            "PREDICT" => {
                self.bump();
                let target = self.ident("target column identifier")?;
                let using = if self.eat_keyword("USING") {
                    Some(self.ident_list("column identifier")?)
                } else {
                    None
                };
                Command::Predict { target, using }
            }
            _ => return Err(self.error("command keyword")),
        };
        Ok(cmd)
    }

    fn at_aggregate(&self) -> bool {
        matches!(self.peek(), Tok::Word(w) if AggFunc::from_keyword(w).is_some())
            && matches!(self.peek_at(1), Tok::Sym("("))
    }

    fn group_by(&mut self) -> PResult<Command> {
        let mut keys = Vec::new();
        if !self.at_aggregate() {
            keys = self.ident_list("group column or aggregate")?;
        }
        let mut aggs = Vec::new();
        loop {
            if !self.at_aggregate() {
                return Err(self.error("aggregate (SUM, MEAN, COUNT, MIN, MAX)"));
            }
            let func = match self.bump() {
                Tok::Word(w) => AggFunc::from_keyword(&w).expect("checked by at_aggregate"),
                _ => unreachable!("checked by at_aggregate"),
            };
            self.expect_sym("(")?;
            let column = self.ident("column identifier")?;
            self.expect_sym(")")?;
            let mut agg = Aggregate::new(func, column);
            if self.eat_keyword("AS") {
                agg.out_name = self.ident("output column identifier")?;
            }
            aggs.push(agg);
            if !self.eat_sym(",") {
                break;
            }
        }
        Ok(Command::GroupBy { keys, aggs })
    }

    fn plot(&mut self) -> PResult<Command> {
        let kind = match self.peek() {
            Tok::Word(w) => PlotKind::from_keyword(w),
            _ => None,
        }
        .ok_or_else(|| self.error("plot kind (BAR, LINE, SCATTER, HIST)"))?;
        self.bump();
        let x = self.ident("x column identifier")?;
        let y_pos = (self.toks[self.pos].line, self.toks[self.pos].col);
        let y = if self.at_ident() && !self.is_keyword("AGG") {
            Some(self.ident("y column identifier")?)
        } else {
            None
        };
        let agg_pos = (self.toks[self.pos].line, self.toks[self.pos].col);
        let agg = if self.eat_keyword("AGG") {
            let f = match self.peek() {
                Tok::Word(w) => AggFunc::from_keyword(w),
                _ => None,
            }
            .ok_or_else(|| self.error("aggregate function"))?;
            self.bump();
            Some(f)
        } else {
            None
        };
        let invalid = |pos: (usize, usize), expected: &str, found: &str| ParseError {
            line: pos.0,
            col: pos.1,
            expected: expected.into(),
            found: found.into(),
        };
        if kind == PlotKind::Hist && y.is_some() {
            return Err(invalid(y_pos, "end of HIST plot (histograms take one column)", "a y column"));
        }
        if kind == PlotKind::Hist && agg.is_some() {
            return Err(invalid(agg_pos, "end of HIST plot", "AGG"));
        }
        if kind == PlotKind::Bar && agg.is_some() && y.is_none() {
            return Err(invalid(agg_pos, "a y column before AGG", "AGG"));
        }
        Ok(Command::Plot { kind, x, y, agg })
    }

    fn literal(&mut self) -> PResult<Value> {
        let negative = self.eat_sym("-");
        match self.peek().clone() {
            Tok::Number(n) => {
                let v = self.number(&n, negative)?;
                self.bump();
                Ok(v)
            }
            _ if negative => Err(self.error("number")),
            Tok::Str(s) => {
                self.bump();
                Ok(Value::Text(s))
            }
            Tok::Word(w) if w.eq_ignore_ascii_case("TRUE") => {
                self.bump();
                Ok(Value::Bool(true))
            }
            Tok::Word(w) if w.eq_ignore_ascii_case("FALSE") => {
                self.bump();
                Ok(Value::Bool(false))
            }
            Tok::Word(w) if w.eq_ignore_ascii_case("NULL") => {
                self.bump();
                Ok(Value::Null)
            }
            Tok::Word(w) if w.eq_ignore_ascii_case("TIMESTAMP") => {
                self.bump();
                self.timestamp()
            }
            _ => Err(self.error("literal")),
        }
    }

    fn number(&self, text: &str, negative: bool) -> PResult<Value> {
        let signed = if negative { format!("-{text}") } else { text.to_string() };
        if text.bytes().all(|b| b.is_ascii_digit()) {
            signed
                .parse::<i64>()
                .map(Value::Int)
                .map_err(|_| self.error("integer within 64-bit range"))
        } else {
            match signed.parse::<f64>() {
                Ok(x) if x.is_finite() => Ok(Value::Float(x)),
                _ => Err(self.error("finite number")),
            }
        }
    }

    fn timestamp(&mut self) -> PResult<Value> {
        match self.peek().clone() {
            Tok::Str(s) => match parse_datetime(&s) {
                Some(t) => {
                    self.bump();
                    Ok(Value::DateTime(t))
                }
                None => Err(self.error("ISO-8601 timestamp string")),
            },
            _ => Err(self.error("ISO-8601 timestamp string")),
        }
    }

    fn expr(&mut self) -> PResult<Expr> {
        self.depth += 1;
        if self.depth > MAX_EXPR_DEPTH {
            return Err(self.error("shallower expression nesting"));
        }
        let e = self.or_expr();
        self.depth -= 1;
        e
    }

    fn or_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.and_expr()?;
        while self.eat_keyword("OR") {
            let rhs = self.and_expr()?;
            lhs = Expr::binary(BinOp::Or, lhs, rhs);
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.not_expr()?;
        while self.eat_keyword("AND") {
            let rhs = self.not_expr()?;
            lhs = Expr::binary(BinOp::And, lhs, rhs);
        }
        Ok(lhs)
    }

    fn not_expr(&mut self) -> PResult<Expr> {
        if self.eat_keyword("NOT") {
            self.depth += 1;
            if self.depth > MAX_EXPR_DEPTH {
                return Err(self.error("shallower expression nesting"));
            }
            let inner = self.not_expr();
            self.depth -= 1;
            return Ok(Expr::unary(UnaryOp::Not, inner?));
        }
        self.cmp_expr()
    }

    fn cmp_expr(&mut self) -> PResult<Expr> {
        let lhs = self.add_expr()?;
        let op = match self.peek() {
            Tok::Sym("=") => BinOp::Eq,
            Tok::Sym("!=") => BinOp::Ne,
            Tok::Sym("<") => BinOp::Lt,
            Tok::Sym("<=") => BinOp::Le,
            Tok::Sym(">") => BinOp::Gt,
            Tok::Sym(">=") => BinOp::Ge,
            _ => return Ok(lhs),
        };
        self.bump();
        let rhs = self.add_expr()?;
        Ok(Expr::binary(op, lhs, rhs))
    }

    fn add_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.mul_expr()?;
        loop {
            let op = match self.peek() {
                Tok::Sym("+") => BinOp::Add,
                Tok::Sym("-") => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.mul_expr()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn mul_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.unary_expr()?;
        loop {
            let op = match self.peek() {
                Tok::Sym("*") => BinOp::Mul,
                Tok::Sym("/") => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary_expr()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn unary_expr(&mut self) -> PResult<Expr> {
        if self.eat_sym("-") {
            if let Tok::Number(n) = self.peek().clone() {
                let v = self.number(&n, true)?;
                self.bump();
                return Ok(Expr::Lit(v));
            }
            self.depth += 1;
            if self.depth > MAX_EXPR_DEPTH {
                return Err(self.error("shallower expression nesting"));
            }
            let inner = self.unary_expr();
            self.depth -= 1;
            return Ok(Expr::unary(UnaryOp::Neg, inner?));
        }
        self.primary()
    }

    fn primary(&mut self) -> PResult<Expr> {
        match self.peek().clone() {
            Tok::Number(_) | Tok::Str(_) => Ok(Expr::Lit(self.literal()?)),
            Tok::Word(w)
                if ["TRUE", "FALSE", "NULL", "TIMESTAMP"]
                    .iter()
                    .any(|k| k.eq_ignore_ascii_case(&w)) =>
            {
                Ok(Expr::Lit(self.literal()?))
            }
            Tok::Sym("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            _ if self.at_ident() => Ok(Expr::Col(self.ident("column identifier")?)),
            _ => Err(self.error("expression")),
        }
    }
}

/// Parse chain text in the canonical grammar.
pub fn parse_chain(text: &str) -> Result<CommandChain, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        depth: 0,
    };
    p.chain()
}

/// Parse a standalone row expression.
pub fn parse_expr(text: &str) -> Result<Expr, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        depth: 0,
    };
    let e = p.expr()?;
    if !matches!(p.peek(), Tok::Eof) {
        return Err(p.error("end of expression"));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn movie_chain() {
        let chain = parse_chain(
            "DERIVE profit_margin = (box_office - cost) / cost; SORT profit_margin DESC; SLICE TOP 5",
        )
        .unwrap();
        let margin = Expr::binary(
            BinOp::Div,
            Expr::binary(BinOp::Sub, Expr::col("box_office"), Expr::col("cost")),
            Expr::col("cost"),
        );
        assert_eq!(
            chain.commands,
            vec![
                Command::Derive {
                    name: "profit_margin".into(),
                    expr: margin
                },
                Command::Sort {
                    column: "profit_margin".into(),
                    order: SortOrder::Desc
                },
                Command::SliceTop(5),
            ]
        );
    }

    #[test]
    fn describe_all() {
        assert_eq!(parse_chain("DESCRIBE").unwrap().commands, vec![Command::Describe(None)]);
        assert_eq!(parse_chain("describe").unwrap().commands, vec![Command::Describe(None)]);
    }

    #[test]
    fn sort_needs_column() {
        let err = parse_chain("SORT").unwrap_err();
        assert_eq!((err.line, err.col), (1, 5));
        assert_eq!(err.expected, "column identifier");
        assert_eq!(err.found, "end of input");
    }

    #[test]
    fn error_positions_span_lines() {
        let err = parse_chain("SLICE TOP 2;\nSORT cost SIDEWAYS").unwrap_err();
        assert_eq!((err.line, err.col), (2, 11));
    }

    #[test]
    fn keywords_case_insensitive_and_quoted_idents() {
        let chain = parse_chain("derive `profit margin` = `box office` * 2; sort `profit margin` desc").unwrap();
        assert_eq!(
            chain.commands[0],
            Command::Derive {
                name: "profit margin".into(),
                expr: Expr::binary(BinOp::Mul, Expr::col("box office"), Expr::lit(Value::Int(2)))
            }
        );
    }

    #[test]
    fn group_by_forms() {
        let c = parse_chain("GROUPBY title SUM(title)").unwrap();
        assert_eq!(
            c.commands[0],
            Command::GroupBy {
                keys: vec!["title".into()],
                aggs: vec![Aggregate::new(AggFunc::Sum, "title")]
            }
        );
        let c = parse_chain("GROUPBY COUNT(x) AS n, MAX(y)").unwrap();
        match &c.commands[0] {
            Command::GroupBy { keys, aggs } => {
                assert!(keys.is_empty());
                assert_eq!(aggs[0].out_name, "n");
                assert_eq!(aggs[1].out_name, "max_y");
            }
            other => panic!("unexpected {other:?}"),
        }
        // a key named like an aggregate is still a key when not followed by '('
        let c = parse_chain("GROUPBY sum COUNT(x)").unwrap();
        assert!(matches!(&c.commands[0], Command::GroupBy { keys, .. } if keys == &["sum"]));
        assert!(parse_chain("GROUPBY a").is_err());
    }

    #[test]
    fn negative_literals_fold() {
        assert_eq!(parse_expr("-5").unwrap(), Expr::lit(Value::Int(-5)));
        assert_eq!(
            parse_expr("-(5)").unwrap(),
            Expr::unary(UnaryOp::Neg, Expr::lit(Value::Int(5)))
        );
        assert_eq!(
            parse_expr("-9223372036854775808").unwrap(),
            Expr::lit(Value::Int(i64::MIN))
        );
        assert!(parse_expr("9223372036854775808").is_err());
    }

    #[test]
    fn slice_invariants() {
        assert!(parse_chain("SLICE TOP 0").is_err());
        assert!(parse_chain("SLICE 3 TO 1").is_err());
        assert_eq!(
            parse_chain("SLICE 1 TO 3").unwrap().commands,
            vec![Command::SliceRange { lo: 1, hi: 3 }]
        );
    }

    #[test]
    fn predict_must_be_last() {
        assert!(parse_chain("PREDICT y; SLICE TOP 1").is_err());
        assert!(parse_chain("SLICE TOP 1; PREDICT y USING a, b").is_ok());
    }

    #[test]
    fn plot_invariants() {
        assert!(parse_chain("PLOT HIST cost box_office").is_err());
        assert!(parse_chain("PLOT BAR title AGG SUM").is_err());
        assert_eq!(
            parse_chain("PLOT BAR title cost AGG SUM").unwrap().commands[0],
            Command::Plot {
                kind: PlotKind::Bar,
                x: "title".into(),
                y: Some("cost".into()),
                agg: Some(AggFunc::Sum)
            }
        );
    }

    #[test]
    fn update_defaults_to_all_rows() {
        let c = parse_chain("UPDATE cost = cost * 2").unwrap();
        assert!(matches!(
            &c.commands[0],
            Command::Update { predicate: Expr::Lit(Value::Bool(true)), .. }
        ));
    }

    #[test]
    fn strings_and_escapes() {
        assert_eq!(parse_expr("'it''s'").unwrap(), Expr::lit(Value::text("it's")));
        assert!(parse_expr("'open").is_err());
        assert!(parse_expr("``").is_err());
    }

    #[test]
    fn empty_and_trailing_separator() {
        assert!(parse_chain("").unwrap().is_empty());
        assert!(parse_chain("  \n ").unwrap().is_empty());
        assert_eq!(parse_chain("DESCRIBE;").unwrap().len(), 1);
        assert!(parse_chain(";").is_err());
    }

    #[test]
    fn deep_nesting_is_an_error_not_a_crash() {
        let text = format!("FILTER {}x{}", "(".repeat(10_000), ")".repeat(10_000));
        assert!(parse_chain(&text).is_err());
        let text = format!("FILTER {}x", "NOT ".repeat(10_000));
        assert!(parse_chain(&text).is_err());
        let text = format!("FILTER {}x", "- ".repeat(10_000));
        assert!(parse_chain(&text).is_err());
    }
}
