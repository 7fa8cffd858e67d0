//! Ranked-case files, one case per line:
//!
//! ```text
//! pred:5,2,9|truth:2,7|factors:blr,ocl
//! ```
//!
//! `factors` is optional. Blank lines and lines starting with `#` are skipped.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::metrics::{valid_tag, RankedCase};

fn parse_ids(line: usize, field: &str, value: &str) -> Result<Vec<usize>> {
    if value.trim().is_empty() {
        return Err(Error::parse(line, format!("{field} list is empty")));
    }
    value
        .split(',')
        .map(|tok| {
            let t = tok.trim();
            if t.is_empty() || !t.bytes().all(|b| b.is_ascii_digit()) {
                return Err(Error::parse(line, format!("{field}: '{t}' is not a decimal id")));
            }
            t.parse::<usize>()
                .map_err(|_| Error::parse(line, format!("{field}: id '{t}' is out of range")))
        })
        .collect()
}

fn parse_line(line: usize, text: &str) -> Result<RankedCase> {
    let mut pred = None;
    let mut truth = None;
    let mut factors = None;
    for field in text.split('|') {
        let (key, value) = field
            .split_once(':')
            .ok_or_else(|| Error::parse(line, format!("field '{}' has no ':'", field.trim())))?;
        let key = key.trim();
        let slot_taken = match key {
            "pred" => pred.replace(parse_ids(line, key, value)?).is_some(),
            "truth" => truth.replace(parse_ids(line, key, value)?).is_some(),
            "factors" => {
                let mut tags = BTreeSet::new();
                for tag in value.split(',').map(str::trim).filter(|t| !t.is_empty()) {
                    if !valid_tag(tag) {
                        return Err(Error::parse(line, format!("invalid factor tag '{tag}'")));
                    }
                    tags.insert(tag.to_string());
                }
                factors.replace(tags).is_some()
            }
            other => return Err(Error::parse(line, format!("unknown field '{other}'"))),
        };
        if slot_taken {
            return Err(Error::parse(line, format!("field '{key}' given twice")));
        }
    }
    let pred = pred.ok_or_else(|| Error::parse(line, "missing 'pred' field"))?;
    let truth = truth.ok_or_else(|| Error::parse(line, "missing 'truth' field"))?;
    RankedCase::new(pred, truth, factors.unwrap_or_default()).map_err(|e| match e {
        Error::Parameter(msg) => Error::parse(line, msg),
        other => other,
    })
}

pub fn parse_cases(text: &str) -> Result<Vec<RankedCase>> {
    let mut cases = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let t = raw.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        cases.push(parse_line(i + 1, t)?);
    }
    Ok(cases)
}

/// Inverse of the line parser.
pub fn format_case(case: &RankedCase) -> String {
    let join = |ids: &[usize]| ids.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(",");
    let mut out = format!("pred:{}|truth:{}", join(case.predicted()), join(case.truth()));
    if !case.factors().is_empty() {
        out.push_str("|factors:");
        out.push_str(&case.factors().iter().cloned().collect::<Vec<_>>().join(","));
    }
    out
}
