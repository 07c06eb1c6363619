//! Line-oriented mechanism files.
//!
//! ```text
//! species: A B C
//! A + 2 B -> C ; k=1.5
//! 0 -> A ; k=0.1      # zero-order source
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};
use sparsemech_core::{Mechanism, Reaction};

use crate::error::{read_to_string, Error, Result};

const WHAT: &str = "mechanism";

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn parse_side(text: &str, index: &BTreeMap<&str, usize>, line: usize) -> Result<BTreeMap<usize, u32>> {
    let text = text.trim();
    let mut side = BTreeMap::new();
    if text == "0" {
        return Ok(side);
    }
    for term in text.split('+') {
        let words: Vec<&str> = term.split_whitespace().collect();
        let (coef, name) = match words.as_slice() {
            [name] => (1, *name),
            [coef, name] => {
                let c: u32 = coef.parse().map_err(|_| {
                    if coef.parse::<f64>().is_ok() {
                        Error::parse(
                            WHAT,
                            line,
                            format!("stoichiometric coefficient `{coef}` must be a positive integer"),
                        )
                    } else {
                        Error::parse(WHAT, line, format!("bad coefficient `{coef}`"))
                    }
                })?;
                if c == 0 {
                    return Err(Error::parse(WHAT, line, "stoichiometric coefficient must be positive"));
                }
                (c, *name)
            }
            [] => return Err(Error::parse(WHAT, line, "empty term")),
            _ => return Err(Error::parse(WHAT, line, format!("cannot read term `{}`", term.trim()))),
        };
        let s = *index.get(name).ok_or_else(|| Error::parse(WHAT, line, format!("unknown species `{name}`")))?;
        *side.entry(s).or_insert(0) += coef;
    }
    Ok(side)
}

fn parse_rate(params: &str, line: usize) -> Result<f64> {
    let mut k = None;
    for p in params.split(',') {
        let p = p.trim();
        let Some((key, value)) = p.split_once('=') else {
            return Err(Error::parse(WHAT, line, format!("expected `k=<value>`, found `{p}`")));
        };
        if key.trim() != "k" {
            return Err(Error::parse(WHAT, line, format!("unknown reaction parameter `{}`", key.trim())));
        }
        let v: f64 = value
            .trim()
            .parse()
            .map_err(|_| Error::parse(WHAT, line, format!("bad rate constant `{}`", value.trim())))?;
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::parse(WHAT, line, format!("rate constant must be positive, got {v}")));
        }
        k = Some(v);
    }
    k.ok_or_else(|| Error::parse(WHAT, line, "missing rate constant"))
}

pub fn parse_mechanism(text: &str) -> Result<Mechanism> {
    let mut species: Option<Vec<String>> = None;
    let mut reactions = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if let Some(rest) = body.strip_prefix("species:") {
            if species.is_some() {
                return Err(Error::parse(WHAT, line, "species declared twice"));
            }
            let names: Vec<String> = rest.split_whitespace().map(str::to_string).collect();
            if let Some(bad) = names.iter().find(|n| !is_identifier(n)) {
                return Err(Error::parse(WHAT, line, format!("invalid species name `{bad}`")));
            }
            if names.is_empty() {
                return Err(Error::parse(WHAT, line, "empty species list"));
            }
            species = Some(names);
            continue;
        }
        let Some(names) = species.as_ref() else {
            return Err(Error::parse(WHAT, line, "reaction before the `species:` line"));
        };
        let index: BTreeMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
        let (eq, params) = body.split_once(';').ok_or_else(|| Error::parse(WHAT, line, "missing `; k=<value>`"))?;
        let (lhs, rhs) = eq.split_once("->").ok_or_else(|| Error::parse(WHAT, line, "missing `->`"))?;
        if rhs.contains("->") {
            return Err(Error::parse(WHAT, line, "more than one `->`"));
        }
        let reactants = parse_side(lhs, &index, line)?;
        let products = parse_side(rhs, &index, line)?;
        let k = parse_rate(params, line)?;
        reactions.push(Reaction::new(reactions.len(), reactants, products, k));
    }
    let names = species.ok_or_else(|| Error::parse(WHAT, 0, "no `species:` line"))?;
    Ok(Mechanism::new(names, reactions)?)
}

pub fn load_mechanism(path: &Path) -> Result<Mechanism> {
    let text = read_to_string(path)?;
    parse_mechanism(&text).map_err(|e| match e {
        Error::Parse { line, msg, .. } => Error::Parse { what: path.display().to_string(), line, msg },
        other => other,
    })
}

fn write_side(out: &mut String, side: &BTreeMap<usize, u32>, mech: &Mechanism) {
    if side.is_empty() {
        out.push('0');
        return;
    }
    for (n, (&s, &c)) in side.iter().enumerate() {
        if n > 0 {
            out.push_str(" + ");
        }
        if c != 1 {
            let _ = write!(out, "{c} ");
        }
        out.push_str(&mech.species()[s].name);
    }
}

/// Canonical text form; parsing it gives back an equal mechanism.
pub fn write_mechanism(mech: &Mechanism) -> String {
    let mut out = String::from("species:");
    for s in mech.species() {
        out.push(' ');
        out.push_str(&s.name);
    }
    out.push('\n');
    for r in mech.reactions() {
        write_side(&mut out, &r.reactants, mech);
        out.push_str(" -> ");
        write_side(&mut out, &r.products, mech);
        let _ = writeln!(out, " ; k={:?}", r.rate_constant);
    }
    out
}

/// SHA-256 of the canonical text form.
pub fn mechanism_sha256(mech: &Mechanism) -> String {
    let digest = Sha256::digest(write_mechanism(mech).as_bytes());
    format!("{digest:x}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_round_trips() {
        let text =
            "# test\nspecies: A B C\nA + 2 B -> C ; k=1.5\n0 -> A ; k=0.1 # source\nC -> 0 ; k=3e-2\nB + B -> A;k=2\n";
        let m = parse_mechanism(text).unwrap();
        assert_eq!(m.n_reactions(), 4);
        assert_eq!(m.reactions()[0].reactants[&1], 2);
        assert!(m.reactions()[1].source);
        assert_eq!(m.reactions()[3].reactants[&1], 2);
        assert_eq!(m.stoich().get(2, 2), -1);
        let again = parse_mechanism(&write_mechanism(&m)).unwrap();
        assert_eq!(again, m);
        assert_eq!(write_mechanism(&again), write_mechanism(&m));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let cases = [
            ("species: A B\nA -> C ; k=1\n", 2, "unknown species"),
            ("species: A B\n\nA -> B ; k=-1\n", 3, "positive"),
            ("species: A B\nA -> B\n", 2, "missing"),
            ("species: A B\n0.5 A -> B ; k=1\n", 2, "integer"),
            ("A -> B ; k=1\n", 1, "before"),
            ("species: A 1B\n", 1, "invalid species"),
            ("species: A B\nA => B ; k=1\n", 2, "->"),
        ];
        for (text, line, needle) in cases {
            match parse_mechanism(text) {
                Err(Error::Parse { line: l, msg, .. }) => {
                    assert_eq!(l, line, "{text}");
                    assert!(msg.contains(needle), "{msg}");
                }
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn rate_constants_are_bit_exact() {
        let text = "species: A B\nA -> B ; k=0.1\nB -> A ; k=1.2345678901234567e-5\n";
        let m = parse_mechanism(text).unwrap();
        assert_eq!(m.reactions()[0].rate_constant, 0.1);
        assert_eq!(m.reactions()[1].rate_constant, 1.2345678901234567e-5);
        assert_eq!(parse_mechanism(&write_mechanism(&m)).unwrap(), m);
    }
}
