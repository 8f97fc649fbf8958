//! Plain-text problem dumps.
//!
//! ```text
//! qp <n> <m>
//! H
//! <n rows of n values>
//! g
//! <n values>
//! G
//! <m rows of n values>
//! h
//! <m values>
//! ```
//!
//! Values are whitespace separated and written in shortest round-trip form,
//! so a dump reloads bit-identically.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use super::{CsrMatrix, QpProblem};
use crate::error::{Error, Result};

pub fn write_problem(problem: &QpProblem, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_text(problem)).map_err(|e| Error::io(path, e))
}

pub fn read_problem(path: impl AsRef<Path>) -> Result<QpProblem> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_text(&text, &path.display().to_string())
}

fn row_text(out: &mut String, vals: impl Iterator<Item = f64>) {
    let line: Vec<String> = vals.map(|v| v.to_string()).collect();
    let _ = writeln!(out, "{}", line.join(" "));
}

pub(crate) fn to_text(p: &QpProblem) -> String {
    let n = p.dim();
    let m = p.num_constraints();
    let mut out = format!("qp {n} {m}\nH\n");
    for i in 0..n {
        row_text(&mut out, p.hessian.row(i).iter().copied());
    }
    out.push_str("g\n");
    row_text(&mut out, p.gradient.iter().copied());
    out.push_str("G\n");
    let g = p.constraints.to_dense();
    for i in 0..m {
        row_text(&mut out, g.row(i).iter().copied());
    }
    out.push_str("h\n");
    row_text(&mut out, p.bounds.iter().copied());
    out
}

pub(crate) fn from_text(text: &str, context: &str) -> Result<QpProblem> {
    let err = |m: String| Error::Parse {
        context: context.to_string(),
        message: m,
    };
    let mut tokens = text.split_whitespace();
    let mut next = |what: &str| tokens.next().ok_or_else(|| err(format!("unexpected end before {what}")));
    if next("header")? != "qp" {
        return Err(err("missing `qp` header".into()));
    }
    let n: usize = next("n")?.parse().map_err(|_| err("bad n".into()))?;
    let m: usize = next("m")?.parse().map_err(|_| err("bad m".into()))?;
    let mut section = |tag: &str, count: usize| -> Result<Vec<f64>> {
        let t = next(tag)?;
        if t != tag {
            return Err(err(format!("expected section `{tag}`, found `{t}`")));
        }
        (0..count)
            .map(|_| {
                let t = next(tag)?;
                t.parse::<f64>().map_err(|_| err(format!("bad number `{t}` in section {tag}")))
            })
            .collect()
    };
    let h = DMatrix::from_row_slice(n, n, &section("H", n * n)?);
    let g = DVector::from_vec(section("g", n)?);
    let gm = DMatrix::from_row_slice(m, n, &section("G", m * n)?);
    let b = DVector::from_vec(section("h", m)?);
    QpProblem::new(h, g, CsrMatrix::from_dense(&gm), b)
}
