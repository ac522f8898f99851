//! CSV with a `name [unit]` header and 12 significant digits.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::sim::driver::Table;

pub fn format_value(v: f64) -> String {
    format!("{v:.11e}")
}

pub fn to_csv(t: &Table) -> String {
    let mut s = String::new();
    let head: Vec<String> = t.names.iter().zip(&t.units).map(|(n, u)| format!("{n} [{u}]")).collect();
    writeln!(s, "{}", head.join(",")).unwrap();
    for r in &t.rows {
        let cells: Vec<String> = r.iter().map(|v| format_value(*v)).collect();
        writeln!(s, "{}", cells.join(",")).unwrap();
    }
    s
}

pub fn from_csv(text: &str) -> Result<Table> {
    let mut lines = text.lines();
    let head = lines.next().ok_or_else(|| Error::Parse { line: 1, col: 1, msg: "empty CSV".into() })?;
    let mut names = vec![];
    let mut units = vec![];
    for (i, h) in head.split(',').enumerate() {
        let (n, u) = h.trim_end().strip_suffix(']').and_then(|x| x.split_once(" [")).ok_or_else(|| Error::Parse {
            line: 1,
            col: i + 1,
            msg: format!("header '{h}' is not 'name [unit]'"),
        })?;
        names.push(n.to_string());
        units.push(u.to_string());
    }
    let mut rows = vec![];
    for (li, l) in lines.enumerate() {
        if l.is_empty() {
            continue;
        }
        let r = l
            .split(',')
            .enumerate()
            .map(|(ci, c)| {
                c.trim().parse::<f64>().map_err(|_| Error::Parse {
                    line: li + 2,
                    col: ci + 1,
                    msg: format!("invalid number '{c}'"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if r.len() != names.len() {
            return Err(Error::Parse {
                line: li + 2,
                col: 1,
                msg: format!("{} fields, header has {}", r.len(), names.len()),
            });
        }
        rows.push(r);
    }
    Ok(Table { names, units, rows })
}
