//! Debug dump of a single step problem and of a branch-and-bound trace.

use std::fmt::Write as _;

use sparsemech_core::exact::TraceNode;
use sparsemech_core::{DenseMatrix, StepProblem};

use crate::error::{Error, Result};
use crate::formats::join;

/// Lines `tau,<v>`, `b,<v>...` and one `A,<row>...` line per species.
pub fn write_step_problem_csv(p: &StepProblem) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# condition_id={} t={}", p.condition_id, p.t);
    let _ = writeln!(out, "tau,{:?}", p.tau);
    let b: Vec<String> = p.b.iter().map(|v| format!("{v:?}")).collect();
    let _ = writeln!(out, "b,{}", b.join(","));
    for s in 0..p.n_species() {
        let row: Vec<String> = (0..p.n_reactions()).map(|i| format!("{:?}", p.a.get(s, i))).collect();
        let _ = writeln!(out, "A,{}", row.join(","));
    }
    out
}

pub fn parse_step_problem_csv(text: &str) -> Result<StepProblem> {
    const WHAT: &str = "step problem";
    let mut tau = None;
    let mut b = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cells = line.split(',');
        let tag = cells.next().unwrap_or("");
        let values = cells
            .map(|c| c.trim().parse::<f64>().map_err(|_| Error::parse(WHAT, i + 1, format!("bad number `{c}`"))))
            .collect::<Result<Vec<f64>>>()?;
        match tag {
            "tau" if values.len() == 1 => tau = Some(values[0]),
            "b" => b = Some(values),
            "A" => rows.push(values),
            _ => return Err(Error::parse(WHAT, i + 1, format!("unexpected line tag `{tag}`"))),
        }
    }
    let tau = tau.ok_or_else(|| Error::parse(WHAT, 0, "missing tau"))?;
    let b = b.ok_or_else(|| Error::parse(WHAT, 0, "missing b"))?;
    let cols = rows.first().map_or(0, Vec::len);
    if rows.len() != b.len() || rows.iter().any(|r| r.len() != cols) {
        return Err(Error::parse(WHAT, 0, "A must have one row per entry of b, all of equal length"));
    }
    let a = DenseMatrix::from_row_major(rows.len(), cols, rows.concat());
    Ok(StepProblem::new(a, b, tau)?)
}

/// `node,phase,lower_bound,fixed_one,fixed_zero`
pub fn write_trace_csv(trace: &[TraceNode]) -> String {
    let mut out = String::from("node,phase,lower_bound,fixed_one,fixed_zero\n");
    for n in trace {
        let _ = writeln!(
            out,
            "{},{},{:?},{},{}",
            n.node,
            n.phase,
            n.lower_bound,
            join(&n.fixed_one, " "),
            join(&n.fixed_zero, " ")
        );
    }
    out
}
