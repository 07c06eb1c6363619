//! Reduction result file: `key=value` header followed by `[frequency]` and
//! `[steps]` CSV sections.

use std::fmt::Write as _;

use sparsemech_core::{ReductionResult, StepRecord, StepStatus, ToleranceMode};

use crate::error::{Error, Result};
use crate::formats::{join, parse_key_values, Provenance};

/// Provenance fields stored alongside a result.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResultHeader {
    pub provenance: Provenance,
    pub mechanism_sha256: String,
}

pub fn write_result(res: &ReductionResult, header: &ResultHeader) -> String {
    let mut out = String::from("# sparsemech reduction result\n");
    header.provenance.write_key_values(&mut out);
    let _ = writeln!(out, "mechanism_sha256={}", header.mechanism_sha256);
    let _ = writeln!(out, "epsilon={:?}", res.epsilon);
    let _ = writeln!(out, "tolerance_mode={}", res.tolerance_mode.as_str());
    let _ = writeln!(out, "solver={}", res.solver);
    let _ = writeln!(out, "prune_min_count={}", res.prune_min_count);
    let _ = writeln!(out, "n_reactions={}", res.n_reactions);
    let _ = writeln!(out, "training_conditions={}", join(&res.training_conditions, ","));
    let _ = writeln!(out, "support={}", join(&res.support, ","));
    let _ = writeln!(out, "union_support={}", join(&res.union_support, ","));
    let degenerate: Vec<String> = res.degenerate_steps.iter().map(|(j, t)| format!("{j}:{t}")).collect();
    let _ = writeln!(out, "degenerate_steps={}", degenerate.join(","));
    out.push_str("\n[frequency]\nreaction_id,count\n");
    for (i, c) in res.frequency.iter().enumerate() {
        let _ = writeln!(out, "{i},{c}");
    }
    out.push_str("\n[steps]\ncondition_id,t,status,work,relaxed_objective,support\n");
    for s in &res.steps {
        let obj = s.relaxed_objective.map(|v| format!("{v:?}")).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            s.condition_id,
            s.t,
            s.status.as_str(),
            s.work,
            obj,
            join(&s.support, " ")
        );
    }
    out
}

fn list<T: std::str::FromStr>(v: &str, sep: char, what: &str, key: &str) -> Result<Vec<T>> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(sep)
        .map(|x| x.trim().parse().map_err(|_| Error::parse(what, 0, format!("bad entry `{x}` in `{key}`"))))
        .collect()
}

/// Numbered non-comment lines.
type Lines<'a> = Vec<(usize, &'a str)>;

pub fn parse_result(text: &str, what: &str) -> Result<(ResultHeader, ReductionResult)> {
    let mut sections: Vec<(usize, &str, Lines)> = vec![(0, "", Vec::new())];
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if let Some(name) = trimmed.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            sections.push((i + 1, name, Vec::new()));
        } else if !trimmed.is_empty() && !trimmed.starts_with('#') {
            sections.last_mut().unwrap().2.push((i + 1, trimmed));
        }
    }
    let head: String = sections[0].2.iter().map(|(_, l)| format!("{l}\n")).collect();
    let kv = parse_key_values(&head, what)?;
    let get =
        |k: &str| kv.get(k).map(String::as_str).ok_or_else(|| Error::parse(what, 0, format!("missing key `{k}`")));
    let num = |k: &str| -> Result<usize> { get(k)?.parse().map_err(|_| Error::parse(what, 0, format!("bad `{k}`"))) };

    let solver: &'static str = match get("solver")? {
        "exact" => "exact",
        "relaxed" => "relaxed",
        other => return Err(Error::parse(what, 0, format!("unknown solver `{other}`"))),
    };
    let tolerance_mode =
        ToleranceMode::parse(get("tolerance_mode")?).ok_or_else(|| Error::parse(what, 0, "bad `tolerance_mode`"))?;
    let epsilon: f64 = get("epsilon")?.parse().map_err(|_| Error::parse(what, 0, "bad `epsilon`"))?;
    let n_reactions = num("n_reactions")?;
    let degenerate_steps = list::<String>(get("degenerate_steps")?, ',', what, "degenerate_steps")?
        .iter()
        .map(|p| {
            let (j, t) =
                p.split_once(':').ok_or_else(|| Error::parse(what, 0, format!("bad degenerate step `{p}`")))?;
            Ok((
                j.parse().map_err(|_| Error::parse(what, 0, "bad condition id"))?,
                t.parse().map_err(|_| Error::parse(what, 0, "bad time index"))?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut frequency = vec![0usize; n_reactions];
    let mut steps = Vec::new();
    for (line, name, rows) in &sections[1..] {
        let mut rows = rows.iter();
        rows.next().ok_or_else(|| Error::parse(what, *line, "section without header"))?;
        match *name {
            "frequency" => {
                for &(n, row) in rows {
                    let (i, c) = row.split_once(',').ok_or_else(|| Error::parse(what, n, "expected `id,count`"))?;
                    let i: usize = i.parse().map_err(|_| Error::parse(what, n, "bad reaction id"))?;
                    if i >= n_reactions {
                        return Err(Error::parse(what, n, format!("reaction id {i} out of range")));
                    }
                    frequency[i] = c.parse().map_err(|_| Error::parse(what, n, "bad count"))?;
                }
            }
            "steps" => {
                for &(n, row) in rows {
                    let c: Vec<&str> = row.split(',').collect();
                    if c.len() != 6 {
                        return Err(Error::parse(what, n, "expected 6 fields"));
                    }
                    let bad = |f: &str| Error::parse(what, n, format!("bad `{f}`"));
                    steps.push(StepRecord {
                        condition_id: c[0].parse().map_err(|_| bad("condition_id"))?,
                        t: c[1].parse().map_err(|_| bad("t"))?,
                        status: StepStatus::parse(c[2]).ok_or_else(|| bad("status"))?,
                        work: c[3].parse().map_err(|_| bad("work"))?,
                        relaxed_objective: if c[4].is_empty() {
                            None
                        } else {
                            Some(c[4].parse().map_err(|_| bad("relaxed_objective"))?)
                        },
                        support: list(c[5], ' ', what, "support")?,
                    });
                }
            }
            other => return Err(Error::parse(what, *line, format!("unknown section `{other}`"))),
        }
    }

    let header = ResultHeader {
        provenance: Provenance {
            version: get("tool_version")?.to_string(),
            config_sha256: get("config_sha256")?.to_string(),
        },
        mechanism_sha256: get("mechanism_sha256")?.to_string(),
    };
    let res = ReductionResult {
        n_reactions,
        support: list(get("support")?, ',', what, "support")?,
        union_support: list(get("union_support")?, ',', what, "union_support")?,
        steps,
        frequency,
        degenerate_steps,
        training_conditions: list(get("training_conditions")?, ',', what, "training_conditions")?,
        epsilon,
        tolerance_mode,
        solver,
        prune_min_count: num("prune_min_count")?,
    };
    if let Some(&i) = res.support.iter().chain(&res.union_support).find(|&&i| i >= n_reactions) {
        return Err(Error::parse(what, 0, format!("reaction id {i} out of range")));
    }
    Ok((header, res))
}

#[cfg(test)]
mod tests {
    use super::*;
    use sparsemech_core::{
        generate_dataset, reduce, Condition, ReduceConfig, Sequential, SimulationSettings, SolverChoice,
    };

    #[test]
    fn round_trip() {
        let m =
            crate::formats::parse_mechanism("species: A B C\nA -> B ; k=3\nB -> C ; k=1\nA -> C ; k=0.01\n").unwrap();
        let conds = [Condition::new(0, vec![1.0, 0.0, 0.0], 3), Condition::new(5, vec![0.5, 0.5, 0.0], 3)];
        let trs =
            generate_dataset(&m, &conds, &SimulationSettings { dt: 0.01, horizon: 6, ..Default::default() }).unwrap();
        for solver in [SolverChoice::exact(), SolverChoice::relaxed()] {
            let res = reduce(&m, &trs, &ReduceConfig::new(0.1, solver), &Sequential).unwrap();
            let header = ResultHeader { provenance: Provenance::new("x"), mechanism_sha256: "y".into() };
            let text = write_result(&res, &header);
            let (h, back) = parse_result(&text, "r").unwrap();
            assert_eq!(h, header);
            assert_eq!(back, res);
            assert_eq!(write_result(&back, &h), text);
        }
    }
}
