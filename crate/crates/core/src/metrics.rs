//! Ranked-prediction accuracy measures.
//!
//! A case hits at `(k, n)` when the first `k` predictions share a label with
//! the first `min(n, |truth|)` ground-truth labels. Plain top-k is `n = 1`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};

/// One test item: predictions in descending score order, truth in
/// descending saliency order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankedCase {
    predicted: Vec<usize>,
    truth: Vec<usize>,
    factors: BTreeSet<String>,
}

fn has_duplicates(ids: &[usize]) -> bool {
    let mut seen = BTreeSet::new();
    !ids.iter().all(|id| seen.insert(*id))
}

impl RankedCase {
    pub fn new(predicted: Vec<usize>, truth: Vec<usize>, factors: BTreeSet<String>) -> Result<Self> {
        if predicted.is_empty() {
            return Err(Error::param("case has no predictions"));
        }
        if truth.is_empty() {
            return Err(Error::param("case has no ground-truth labels"));
        }
        if has_duplicates(&predicted) {
            return Err(Error::param("duplicate id in predictions"));
        }
        if has_duplicates(&truth) {
            return Err(Error::param("duplicate id in ground truth"));
        }
        if let Some(tag) = factors.iter().find(|t| !valid_tag(t)) {
            return Err(Error::param(format!("invalid factor tag '{tag}'")));
        }
        Ok(RankedCase {
            predicted,
            truth,
            factors,
        })
    }

    pub fn predicted(&self) -> &[usize] {
        &self.predicted
    }

    pub fn truth(&self) -> &[usize] {
        &self.truth
    }

    pub fn factors(&self) -> &BTreeSet<String> {
        &self.factors
    }

    pub fn hits(&self, k: usize, n: usize) -> bool {
        let window = &self.truth[..n.min(self.truth.len())];
        self.predicted[..k].iter().any(|p| window.contains(p))
    }
}

/// Tags are nonempty and made of ASCII alphanumerics, `_` and `-`.
pub fn valid_tag(tag: &str) -> bool {
    !tag.is_empty() && tag.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-')
}

fn check(cases: &[RankedCase], k: usize, n: usize) -> Result<()> {
    if cases.is_empty() {
        return Err(Error::Empty("no cases".into()));
    }
    if k == 0 || n == 0 {
        return Err(Error::param(format!("k and n must be at least 1 (got k={k}, n={n})")));
    }
    if let Some((i, c)) = cases.iter().enumerate().find(|(_, c)| c.predicted.len() < k) {
        return Err(Error::param(format!(
            "k={k} exceeds the {} predictions of case {}",
            c.predicted.len(),
            i + 1
        )));
    }
    Ok(())
}

pub fn top_k(cases: &[RankedCase], k: usize) -> Result<f64> {
    top_k_n(cases, k, 1)
}

pub fn top_k_n(cases: &[RankedCase], k: usize, n: usize) -> Result<f64> {
    check(cases, k, n)?;
    let hits = cases.iter().filter(|c| c.hits(k, n)).count();
    Ok(hits as f64 / cases.len() as f64)
}

/// Mean of `top_k_n(k, k)` over `k = 1..=k_max`.
pub fn avg_top_kk(cases: &[RankedCase], k_max: usize) -> Result<f64> {
    if k_max == 0 {
        return Err(Error::param("k_max must be at least 1"));
    }
    let mut total = 0.0;
    for k in 1..=k_max {
        total += top_k_n(cases, k, k)?;
    }
    Ok(total / k_max as f64)
}

pub const DEFAULT_K_MAX: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    TopK(usize),
    TopKN(usize, usize),
    AvgTopKK(usize),
}

impl Metric {
    pub fn evaluate(self, cases: &[RankedCase]) -> Result<f64> {
        match self {
            Metric::TopK(k) => top_k(cases, k),
            Metric::TopKN(k, n) => top_k_n(cases, k, n),
            Metric::AvgTopKK(k_max) => avg_top_kk(cases, k_max),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::TopK(k) => write!(f, "top_{k}"),
            Metric::TopKN(k, n) => write!(f, "top_{k}_{n}"),
            Metric::AvgTopKK(k) => write!(f, "avg_top_kk_{k}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BreakdownRow {
    /// `all`, a single tag, or `a+b` for a tag pair.
    pub group: String,
    pub value: f64,
    pub count: usize,
}

pub const ALL_GROUP: &str = "all";

/// One row over every case, then one per tag (and per co-occurring tag pair
/// when `pairs` is set), in lexicographic order.
pub fn factor_breakdown(cases: &[RankedCase], metric: Metric, pairs: bool) -> Result<Vec<BreakdownRow>> {
    let mut groups: BTreeMap<String, Vec<RankedCase>> = BTreeMap::new();
    for case in cases {
        for tag in &case.factors {
            groups.entry(tag.clone()).or_default().push(case.clone());
        }
        if pairs {
            let tags: Vec<&String> = case.factors.iter().collect();
            for (i, a) in tags.iter().enumerate() {
                for b in &tags[i + 1..] {
                    groups.entry(format!("{a}+{b}")).or_default().push(case.clone());
                }
            }
        }
    }
    let mut rows = vec![BreakdownRow {
        group: ALL_GROUP.into(),
        value: metric.evaluate(cases)?,
        count: cases.len(),
    }];
    // Single tags sort before pairs so the table reads top-down.
    let (singles, combos): (Vec<_>, Vec<_>) = groups.into_iter().partition(|(g, _)| !g.contains('+'));
    for (group, subset) in singles.into_iter().chain(combos) {
        rows.push(BreakdownRow {
            value: metric.evaluate(&subset)?,
            count: subset.len(),
            group,
        });
    }
    Ok(rows)
}

/// Rows of top-k-n values for `k ∈ ks`, `n ∈ 1..=n_max`.
pub fn top_k_n_grid(cases: &[RankedCase], ks: &[usize], n_max: usize) -> Result<Vec<(usize, Vec<f64>)>> {
    ks.iter()
        .map(|&k| Ok((k, (1..=n_max).map(|n| top_k_n(cases, k, n)).collect::<Result<Vec<_>>>()?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn case(p: &[usize], t: &[usize], f: &[&str]) -> RankedCase {
        RankedCase::new(p.to_vec(), t.to_vec(), f.iter().map(|s| s.to_string()).collect()).unwrap()
    }

    #[test]
    fn worked_case() {
        let c = [case(&[5, 2, 9], &[2, 7], &[])];
        assert_eq!(top_k(&c, 1).unwrap(), 0.0);
        assert_eq!(top_k(&c, 2).unwrap(), 1.0);
        assert_eq!(top_k_n(&c, 1, 2).unwrap(), 0.0);
        assert_eq!(top_k_n(&c, 2, 1).unwrap(), 1.0);
        assert_eq!(top_k_n(&c, 3, 2).unwrap(), 1.0);
    }

    #[test]
    fn all_correct() {
        let c = vec![case(&[1, 2, 3, 4, 5], &[1], &[]), case(&[7, 8, 9, 10, 11], &[7, 8], &[])];
        assert_eq!(top_k(&c, 1).unwrap(), 1.0);
        assert_eq!(avg_top_kk(&c, 5).unwrap(), 1.0);
    }

    #[test]
    fn avg_of_hits_from_two() {
        let c = [case(&[9, 1, 2, 3, 4], &[1, 8], &[])];
        assert!((avg_top_kk(&c, 5).unwrap() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn k_beyond_predictions() {
        let c = [case(&[1, 2], &[1], &[])];
        assert!(matches!(top_k(&c, 3), Err(Error::Parameter(_))));
        assert!(matches!(avg_top_kk(&c, 3), Err(Error::Parameter(_))));
        assert!(top_k(&c, 0).is_err());
        assert!(top_k(&[], 1).is_err());
    }

    #[test]
    fn case_validation() {
        assert!(RankedCase::new(vec![1, 1], vec![1], BTreeSet::new()).is_err());
        assert!(RankedCase::new(vec![1], vec![2, 2], BTreeSet::new()).is_err());
        assert!(RankedCase::new(vec![1], vec![], BTreeSet::new()).is_err());
        assert!(RankedCase::new(vec![1], vec![1], ["a b".to_string()].into()).is_err());
    }

    #[test]
    fn breakdown_rows() {
        let untagged = vec![case(&[1], &[1], &[]), case(&[2], &[1], &[])];
        let rows = factor_breakdown(&untagged, Metric::TopK(1), true).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].group, "all");
        assert_eq!(rows[0].value, 0.5);

        let c = vec![
            case(&[1], &[1], &["blr", "ocl"]),
            case(&[2], &[1], &["blr"]),
            case(&[3], &[3], &["rot"]),
        ];
        let rows = factor_breakdown(&c, Metric::TopK(1), true).unwrap();
        let groups: Vec<_> = rows.iter().map(|r| r.group.as_str()).collect();
        assert_eq!(groups, ["all", "blr", "ocl", "rot", "blr+ocl"]);
        assert_eq!(rows[1].value, 0.5);
        assert_eq!(rows[1].count + rows[3].count, 3);
        assert_eq!(factor_breakdown(&c, Metric::TopK(1), false).unwrap().len(), 4);
    }

    #[test]
    fn grid_shape() {
        let c = [case(&[5, 2, 9, 1, 0], &[2, 7], &[])];
        let g = top_k_n_grid(&c, &[1, 3, 5], 5).unwrap();
        assert_eq!(g.len(), 3);
        assert_eq!(g[0].1, vec![0.0; 5]);
        assert_eq!(g[1].1, vec![1.0; 5]);
    }
}
