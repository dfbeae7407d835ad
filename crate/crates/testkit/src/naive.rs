//! Reference interpreter: row-major, no shared code with the executor
//! beyond the data types. Slow and direct on purpose.

use std::cmp::Ordering;

use chrono::DateTime;
use tabchain_core::command::{AggFunc, BinOp, Command, CommandChain, Expr, UnaryOp};
use tabchain_core::{ColumnMeta, ColumnType, Schema, Table, Value};

#[derive(Debug, Clone)]
struct Rows {
    name: String,
    cols: Vec<(String, ColumnType)>,
    rows: Vec<Vec<Value>>,
}

#[derive(Debug, Clone)]
pub struct NaiveResult {
    pub table: Table,
    /// Row count after each command.
    pub rows_out: Vec<usize>,
}

fn norm(name: &str) -> String {
    name.to_lowercase().split_whitespace().collect::<Vec<_>>().join("_")
}

fn parse_time(s: &str) -> Option<i64> {
    DateTime::parse_from_rfc3339(s.trim()).ok().map(|d| d.timestamp())
}

impl Rows {
    fn idx(&self, name: &str) -> Result<usize, String> {
        self.cols
            .iter()
            .position(|(n, _)| n == name)
            .ok_or_else(|| format!("no column {name}"))
    }

    /// Replace a column with the same normalized name, else append.
    fn put(&mut self, name: &str, ty: ColumnType, values: Vec<Value>) {
        let slot = self
            .cols
            .iter()
            .position(|(n, _)| n == name)
            .or_else(|| self.cols.iter().position(|(n, _)| norm(n) == norm(name)));
        match slot {
            Some(i) => {
                self.cols[i] = (name.to_string(), ty);
                for (row, v) in self.rows.iter_mut().zip(values) {
                    row[i] = v;
                }
            }
            None => {
                self.cols.push((name.to_string(), ty));
                for (row, v) in self.rows.iter_mut().zip(values) {
                    row.push(v);
                }
            }
        }
    }
}

fn static_type(e: &Expr, cols: &[(String, ColumnType)]) -> Option<ColumnType> {
    match e {
        Expr::Lit(v) => v.column_type(),
        Expr::Col(c) => cols.iter().find(|(n, _)| n == c).map(|(_, t)| *t),
        Expr::Unary(UnaryOp::Neg, inner) => static_type(inner, cols),
        Expr::Unary(UnaryOp::Not, _) => Some(ColumnType::Bool),
        Expr::Binary(op, l, r) => match op {
            BinOp::Add | BinOp::Sub | BinOp::Mul => {
                let (a, b) = (static_type(l, cols), static_type(r, cols));
                if a == Some(ColumnType::Float) || b == Some(ColumnType::Float) {
                    Some(ColumnType::Float)
                } else if a.is_none() && b.is_none() {
                    None
                } else {
                    Some(ColumnType::Int)
                }
            }
            BinOp::Div => Some(ColumnType::Float),
            _ => Some(ColumnType::Bool),
        },
    }
}

fn store(v: Value, ty: ColumnType) -> Value {
    match (v, ty) {
        (Value::Int(i), ColumnType::Float) => Value::Float(i as f64),
        (Value::Text(s), ColumnType::DateTime) => parse_time(&s).map_or(Value::Null, Value::DateTime),
        (v, ty) if v.column_type() == Some(ty) => v,
        _ => Value::Null,
    }
}

fn num(v: &Value) -> f64 {
    match v {
        Value::Int(i) => *i as f64,
        Value::Float(x) => *x,
        _ => panic!("not a number: {v:?}"),
    }
}

fn order(a: &Value, b: &Value) -> Option<Ordering> {
    match (a, b) {
        (Value::Int(x), Value::Int(y)) => Some(x.cmp(y)),
        (Value::Int(_) | Value::Float(_), Value::Int(_) | Value::Float(_)) => num(a).partial_cmp(&num(b)),
        (Value::Text(x), Value::Text(y)) => Some(x.cmp(y)),
        (Value::Bool(x), Value::Bool(y)) => Some(x.cmp(y)),
        (Value::DateTime(x), Value::DateTime(y)) => Some(x.cmp(y)),
        (Value::DateTime(x), Value::Text(s)) => parse_time(s).map(|y| x.cmp(&y)),
        (Value::Text(s), Value::DateTime(y)) => parse_time(s).map(|x| x.cmp(y)),
        _ => None,
    }
}

/// Sort order inside one typed column.
fn cell_order(a: &Value, b: &Value) -> Ordering {
    match (a, b) {
        (Value::Float(x), Value::Float(y)) => x.total_cmp(y),
        _ => order(a, b).expect("comparable cells"),
    }
}

fn finite(x: f64) -> Value {
    if x.is_finite() {
        Value::Float(x)
    } else {
        Value::Null
    }
}

fn eval(e: &Expr, row: &[Value], cols: &[(String, ColumnType)]) -> Value {
    match e {
        Expr::Lit(v) => v.clone(),
        Expr::Col(c) => row[cols.iter().position(|(n, _)| n == c).expect("known column")].clone(),
        Expr::Unary(op, inner) => match (op, eval(inner, row, cols)) {
            (_, Value::Null) => Value::Null,
            (UnaryOp::Neg, Value::Int(i)) => i.checked_neg().map_or(Value::Null, Value::Int),
            (UnaryOp::Neg, Value::Float(x)) => Value::Float(-x),
            (UnaryOp::Not, Value::Bool(b)) => Value::Bool(!b),
            (_, v) => panic!("bad unary operand {v:?}"),
        },
        Expr::Binary(op, l, r) => {
            let a = eval(l, row, cols);
            let b = eval(r, row, cols);
            match op {
                BinOp::And | BinOp::Or => {
                    let tri = |v: &Value| match v {
                        Value::Bool(x) => Some(*x),
                        _ => None,
                    };
                    let (x, y) = (tri(&a), tri(&b));
                    let dominant = *op == BinOp::Or;
                    if x == Some(dominant) || y == Some(dominant) {
                        Value::Bool(dominant)
                    } else if x.is_some() && y.is_some() {
                        Value::Bool(!dominant)
                    } else {
                        Value::Null
                    }
                }
                _ if a.is_null() || b.is_null() => Value::Null,
                BinOp::Div => {
                    if num(&b) == 0.0 {
                        Value::Null
                    } else {
                        finite(num(&a) / num(&b))
                    }
                }
                BinOp::Add | BinOp::Sub | BinOp::Mul => match (&a, &b) {
                    (Value::Int(x), Value::Int(y)) => {
                        let out = match op {
                            BinOp::Add => x.checked_add(*y),
                            BinOp::Sub => x.checked_sub(*y),
                            _ => x.checked_mul(*y),
                        };
                        out.map_or(Value::Null, Value::Int)
                    }
                    _ => {
                        let (x, y) = (num(&a), num(&b));
                        finite(match op {
                            BinOp::Add => x + y,
                            BinOp::Sub => x - y,
                            _ => x * y,
                        })
                    }
                },
                cmp => {
                    let o = order(&a, &b).expect("comparable operands");
                    Value::Bool(match cmp {
                        BinOp::Eq => o.is_eq(),
                        BinOp::Ne => o.is_ne(),
                        BinOp::Lt => o.is_lt(),
                        BinOp::Le => o.is_le(),
                        BinOp::Gt => o.is_gt(),
                        _ => o.is_ge(),
                    })
                }
            }
        }
    }
}

fn holds(e: &Expr, row: &[Value], cols: &[(String, ColumnType)]) -> bool {
    eval(e, row, cols) == Value::Bool(true)
}

fn same_key(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Float(x), Value::Float(y)) => x == y || (x.is_nan() && y.is_nan()),
        _ => a == b,
    }
}

fn aggregate(func: AggFunc, input: ColumnType, cells: Vec<Value>) -> (Value, ColumnType) {
    let present: Vec<Value> = cells.into_iter().filter(|v| !v.is_null()).collect();
    let out_type = match func {
        AggFunc::Count => ColumnType::Int,
        AggFunc::Mean => ColumnType::Float,
        AggFunc::Sum if input == ColumnType::Int => ColumnType::Int,
        AggFunc::Sum => ColumnType::Float,
        AggFunc::Min | AggFunc::Max => input,
    };
    if func == AggFunc::Count {
        return (Value::Int(present.len() as i64), out_type);
    }
    if present.is_empty() {
        return (Value::Null, out_type);
    }
    let v = match func {
        AggFunc::Sum if input == ColumnType::Int => {
            let mut total = Some(0i64);
            for v in &present {
                if let Value::Int(i) = v {
                    total = total.and_then(|t| t.checked_add(*i));
                }
            }
            total.map_or(Value::Null, Value::Int)
        }
        AggFunc::Sum | AggFunc::Mean => {
            let mut s = 0.0;
            for v in &present {
                s += num(v);
            }
            if func == AggFunc::Mean {
                s /= present.len() as f64;
            }
            finite(s)
        }
        _ => {
            let want = if func == AggFunc::Min { Ordering::Less } else { Ordering::Greater };
            let mut best = present[0].clone();
            for v in &present[1..] {
                if cell_order(v, &best) == want {
                    best = v.clone();
                }
            }
            best
        }
    };
    (v, out_type)
}

fn quantile(xs: &[f64], q: f64) -> f64 {
    let pos = q * (xs.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    xs[lo] + (pos - lo as f64) * (xs[hi] - xs[lo])
}

fn describe_row(name: &str, ty: ColumnType, cells: Vec<Value>) -> Vec<Value> {
    let total = cells.len();
    let mut present: Vec<Value> = cells.into_iter().filter(|v| !v.is_null()).collect();
    let n = present.len();
    present.sort_by(cell_order);
    let mut distinct = 0;
    for i in 0..n {
        if i == 0 || cell_order(&present[i - 1], &present[i]) != Ordering::Equal {
            distinct += 1;
        }
    }
    let null_frac = if total == 0 { 0.0 } else { (total - n) as f64 / total as f64 };
    let mut row = vec![
        Value::text(name),
        Value::text(ty.name()),
        Value::Int(n as i64),
        Value::Float(null_frac),
    ];
    if ty.is_numeric() && n > 0 {
        let mut xs: Vec<f64> = present.iter().map(num).collect();
        xs.sort_by(f64::total_cmp);
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        for x in [
            mean,
            var.sqrt(),
            xs[0],
            quantile(&xs, 0.25),
            quantile(&xs, 0.5),
            quantile(&xs, 0.75),
            xs[n - 1],
        ] {
            row.push(Value::Float(x));
        }
    } else {
        row.extend(std::iter::repeat_n(Value::Null, 7));
    }
    row.push(Value::Int(distinct));
    row
}

/// Gaussian elimination with partial pivoting; `None` below the pivot floor.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for k in 0..n {
        let mut p = k;
        for i in k + 1..n {
            if a[i][k].abs() > a[p][k].abs() {
                p = i;
            }
        }
        if a[p][k].abs() < 1e-10 {
            return None;
        }
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let mut s = b[k];
        for j in k + 1..n {
            s -= a[k][j] * x[j];
        }
        x[k] = s / a[k][k];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

fn predict(t: &mut Rows, target: &str, using: Option<&[String]>) -> Result<(), String> {
    let out = format!("predicted_{target}");
    let features: Vec<String> = match using {
        Some(u) if !u.is_empty() => u.to_vec(),
        _ => t
            .cols
            .iter()
            .filter(|(n, ty)| ty.is_numeric() && n != target && *n != out)
            .map(|(n, _)| n.clone())
            .collect(),
    };
    let fi: Vec<usize> = features.iter().map(|f| t.idx(f)).collect::<Result<_, _>>()?;
    let ti = t.idx(target)?;
    let x_of = |row: &[Value]| -> Option<Vec<f64>> {
        let mut x = vec![1.0];
        for &i in &fi {
            if row[i].is_null() {
                return None;
            }
            x.push(num(&row[i]));
        }
        Some(x)
    };
    let fit: Vec<(Vec<f64>, f64)> = t
        .rows
        .iter()
        .filter(|r| !r[ti].is_null())
        .filter_map(|r| Some((x_of(r)?, num(&r[ti]))))
        .collect();
    let p = fi.len() + 1;
    let beta = if fit.is_empty() {
        None
    } else {
        let mut a = vec![vec![0.0; p]; p];
        let mut b = vec![0.0; p];
        for (x, y) in &fit {
            for i in 0..p {
                b[i] += x[i] * y;
                for j in 0..p {
                    a[i][j] += x[i] * x[j];
                }
            }
        }
        Some(solve(a, b).unwrap_or_else(|| {
            let mut m = vec![0.0; p];
            m[0] = fit.iter().map(|(_, y)| y).sum::<f64>() / fit.len() as f64;
            m
        }))
    };
    let values: Vec<Value> = t
        .rows
        .iter()
        .map(|r| match (&beta, x_of(r)) {
            (Some(b), Some(x)) => finite(x.iter().zip(b).map(|(u, v)| u * v).sum()),
            _ => Value::Null,
        })
        .collect();
    t.put(&out, ColumnType::Float, values);
    Ok(())
}

fn apply(t: &mut Rows, cmd: &Command) -> Result<(), String> {
    match cmd {
        Command::Select(names) => {
            let mut idx: Vec<usize> = Vec::new();
            for n in names {
                let i = t.idx(n)?;
                if !idx.contains(&i) {
                    idx.push(i);
                }
            }
            t.cols = idx.iter().map(|&i| t.cols[i].clone()).collect();
            t.rows = t.rows.iter().map(|r| idx.iter().map(|&i| r[i].clone()).collect()).collect();
        }
        Command::Filter(e) => {
            let cols = t.cols.clone();
            t.rows.retain(|r| holds(e, r, &cols));
        }
        Command::DeleteWhere(e) => {
            let cols = t.cols.clone();
            t.rows.retain(|r| !holds(e, r, &cols));
        }
        Command::Sort { column, order } => {
            let i = t.idx(column)?;
            let desc = *order == tabchain_core::command::SortOrder::Desc;
            let (mut present, missing): (Vec<Vec<Value>>, Vec<Vec<Value>>) =
                t.rows.drain(..).partition(|r| !r[i].is_null());
            present.sort_by(|a, b| {
                let o = cell_order(&a[i], &b[i]);
                if desc {
                    o.reverse()
                } else {
                    o
                }
            });
            present.extend(missing);
            t.rows = present;
        }
        Command::GroupBy { keys, aggs } => {
            let ki: Vec<usize> = keys.iter().map(|k| t.idx(k)).collect::<Result<_, _>>()?;
            let mut groups: Vec<Vec<usize>> = Vec::new();
            for (r, row) in t.rows.iter().enumerate() {
                let found = groups
                    .iter_mut()
                    .find(|g| ki.iter().all(|&k| same_key(&t.rows[g[0]][k], &row[k])));
                match found {
                    Some(g) => g.push(r),
                    None => groups.push(vec![r]),
                }
            }
            if keys.is_empty() && groups.is_empty() {
                groups.push(Vec::new());
            }
            let mut cols: Vec<(String, ColumnType)> = ki.iter().map(|&k| t.cols[k].clone()).collect();
            let mut rows: Vec<Vec<Value>> = groups
                .iter()
                .map(|g| ki.iter().map(|&k| t.rows[g[0]][k].clone()).collect())
                .collect();
            for a in aggs {
                let ai = t.idx(&a.column)?;
                let input = t.cols[ai].1;
                let mut ty = input;
                for (g, row) in groups.iter().zip(rows.iter_mut()) {
                    let (v, out_ty) = aggregate(a.func, input, g.iter().map(|&r| t.rows[r][ai].clone()).collect());
                    ty = out_ty;
                    row.push(v);
                }
                if groups.is_empty() {
                    ty = aggregate(a.func, input, Vec::new()).1;
                }
                cols.push((a.out_name.clone(), ty));
            }
            t.cols = cols;
            t.rows = rows;
        }
        Command::Derive { name, expr } => {
            let ty = static_type(expr, &t.cols).unwrap_or(ColumnType::Float);
            let values = t.rows.iter().map(|r| store(eval(expr, r, &t.cols), ty)).collect();
            t.put(name, ty, values);
        }
        Command::SliceTop(n) => t.rows.truncate(*n),
        Command::SliceRange { lo, hi } => {
            let end = (*hi).min(t.rows.len());
            let start = (*lo).min(end);
            t.rows = t.rows[start..end].to_vec();
        }
        Command::Update { column, value, predicate } => {
            let i = t.idx(column)?;
            let ty = t.cols[i].1;
            let cols = t.cols.clone();
            for r in &mut t.rows {
                if holds(predicate, r, &cols) {
                    r[i] = store(eval(value, r, &cols), ty);
                }
            }
        }
        Command::InsertRow(values) => {
            if values.len() != t.cols.len() {
                return Err("arity".into());
            }
            let row = values.iter().zip(&t.cols).map(|(v, (_, ty))| store(v.clone(), *ty)).collect();
            t.rows.push(row);
        }
        Command::Describe(which) => {
            let targets: Vec<usize> = match which {
                Some(w) if !w.is_empty() => w.iter().map(|c| t.idx(c)).collect::<Result<_, _>>()?,
                _ => (0..t.cols.len()).collect(),
            };
            let rows = targets
                .iter()
                .map(|&c| describe_row(&t.cols[c].0, t.cols[c].1, t.rows.iter().map(|r| r[c].clone()).collect()))
                .collect();
            t.cols = [
                ("column", ColumnType::String),
                ("type", ColumnType::String),
                ("count", ColumnType::Int),
                ("null_frac", ColumnType::Float),
                ("mean", ColumnType::Float),
                ("std", ColumnType::Float),
                ("min", ColumnType::Float),
                ("q25", ColumnType::Float),
                ("q50", ColumnType::Float),
                ("q75", ColumnType::Float),
                ("max", ColumnType::Float),
                ("distinct", ColumnType::Int),
            ]
            .iter()
            .map(|(n, ty)| (n.to_string(), *ty))
            .collect();
            t.rows = rows;
        }
        Command::Plot { .. } => {}
        Command::Predict { target, using } => predict(t, target, using.as_deref())?,
    }
    Ok(())
}

/// Run `chain` over `table`. Assumes the chain already validates.
pub fn run(chain: &CommandChain, table: &Table) -> Result<NaiveResult, String> {
    let mut t = Rows {
        name: table.schema().table_name.clone(),
        cols: table
            .schema()
            .columns
            .iter()
            .map(|c| (c.name.clone(), c.ctype))
            .collect(),
        rows: table.rows(),
    };
    let mut rows_out = Vec::new();
    for cmd in chain.iter() {
        apply(&mut t, cmd)?;
        rows_out.push(t.rows.len());
    }
    let schema = Schema::new(
        t.name.clone(),
        t.cols.iter().map(|(n, ty)| ColumnMeta::new(n.clone(), *ty)).collect(),
    )
    .map_err(|e| e.to_string())?;
    let table = Table::from_rows(schema, t.rows).map_err(|e| e.to_string())?;
    Ok(NaiveResult { table, rows_out })
}
