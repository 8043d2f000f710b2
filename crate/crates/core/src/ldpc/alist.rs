//! MacKay alist format.
//!
//! ```text
//! N M
//! max_col_weight max_row_weight
//! <N column weights>
//! <M row weights>
//! <N lines: 1-based row indices of each column, zero padded>
//! <M lines: 1-based column indices of each row, zero padded>
//! ```

use std::io::{BufRead, Write};

use super::{CodeDefinition, LdpcError};

pub fn write_alist<W: Write>(code: &CodeDefinition, mut out: W) -> Result<(), LdpcError> {
    let n = code.n();
    let m = code.num_checks();
    let max_col = (0..n).map(|v| code.var_neighbors(v).len()).max().unwrap_or(0);
    let max_row = (0..m).map(|c| code.check_neighbors(c).len()).max().unwrap_or(0);
    writeln!(out, "{n} {m}")?;
    writeln!(out, "{max_col} {max_row}")?;
    let join = |it: &mut dyn Iterator<Item = usize>| it.map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
    writeln!(out, "{}", join(&mut (0..n).map(|v| code.var_neighbors(v).len())))?;
    writeln!(out, "{}", join(&mut (0..m).map(|c| code.check_neighbors(c).len())))?;
    for v in 0..n {
        let mut rows: Vec<usize> = code.var_neighbors(v).iter().map(|c| c + 1).collect();
        rows.sort_unstable();
        rows.resize(max_col, 0);
        writeln!(out, "{}", join(&mut rows.into_iter()))?;
    }
    for c in 0..m {
        let mut cols: Vec<usize> = code.check_neighbors(c).iter().map(|v| v + 1).collect();
        cols.resize(max_row, 0);
        writeln!(out, "{}", join(&mut cols.into_iter()))?;
    }
    Ok(())
}

pub fn read_alist<R: BufRead>(input: R) -> Result<CodeDefinition, LdpcError> {
    let mut numbers = Vec::new();
    for line in input.lines() {
        for tok in line?.split_whitespace() {
            numbers.push(tok.parse::<usize>().map_err(|_| LdpcError::Alist(format!("bad token {tok:?}")))?);
        }
    }
    let mut it = numbers.into_iter();
    let mut next = |what: &str| {
        it.next().ok_or_else(|| LdpcError::Alist(format!("unexpected end of input reading {what}")))
    };
    let n = next("N")?;
    let m = next("M")?;
    let max_col = next("max column weight")?;
    let max_row = next("max row weight")?;
    let col_w: Vec<usize> = (0..n).map(|_| next("column weights")).collect::<Result<_, _>>()?;
    let row_w: Vec<usize> = (0..m).map(|_| next("row weights")).collect::<Result<_, _>>()?;
    let mut col_lists = Vec::with_capacity(n);
    for (v, &w) in col_w.iter().enumerate() {
        let entries: Vec<usize> = (0..max_col).map(|_| next("column lists")).collect::<Result<_, _>>()?;
        let rows: Vec<usize> = entries.iter().copied().filter(|&x| x != 0).collect();
        if rows.len() != w || rows.iter().any(|&r| r > m) {
            return Err(LdpcError::Alist(format!("column {} is inconsistent", v + 1)));
        }
        col_lists.push(rows);
    }
    let mut checks = Vec::with_capacity(m);
    for (c, &w) in row_w.iter().enumerate() {
        let entries: Vec<usize> = (0..max_row).map(|_| next("row lists")).collect::<Result<_, _>>()?;
        let cols: Vec<usize> = entries.iter().copied().filter(|&x| x != 0).collect();
        if cols.len() != w || cols.iter().any(|&x| x > n) {
            return Err(LdpcError::Alist(format!("row {} is inconsistent", c + 1)));
        }
        checks.push(cols.into_iter().map(|x| x - 1).collect::<Vec<_>>());
    }
    for (v, rows) in col_lists.iter().enumerate() {
        for &r in rows {
            if !checks[r - 1].contains(&v) {
                return Err(LdpcError::Alist(format!("column {} lists row {r} but not vice versa", v + 1)));
            }
        }
    }
    CodeDefinition::from_checks(n, checks)
}
