//! Exhaustive specialist-subgroup survey: rerun retention, agreement matrix,
//! and Q test on every panel subset in a size band, then rank the panels.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cochran::{run_test, Method, PermutationBudget};
use crate::condition::{apply_condition, build_w_matrix_with, ConditionSpec, RowSelection};
use crate::error::{Error, Result};
use crate::judgement::JudgementMatrix;

/// One analyzed panel subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgroupEntry {
    /// Ids of the specialists kept, in panel column order.
    pub specialists: Vec<String>,
    pub q: f64,
    pub p_value: f64,
    /// Rows that entered the test for this panel.
    pub n_retained: usize,
    pub degenerate: bool,
}

/// Survey results ranked by descending p-value; ties go to the larger
/// panel, then to the lexicographically earlier id set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgroupReport {
    pub entries: Vec<SubgroupEntry>,
    /// Level the survey ran at.
    pub alpha: f64,
}

impl SubgroupReport {
    /// Panels whose test landed below the survey level.
    pub fn rejection_count(&self) -> usize {
        self.entries
            .iter()
            .filter(|e| e.p_value < self.alpha)
            .count()
    }

    pub fn top(&self, k: usize) -> &[SubgroupEntry] {
        &self.entries[..k.min(self.entries.len())]
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("specialists,q,p_value,n_retained\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{},{},{},{}\n",
                e.specialists.join("+"),
                e.q,
                e.p_value,
                e.n_retained
            ));
        }
        out
    }
}

fn size_combinations(s: usize, k: usize, out: &mut Vec<Vec<usize>>) {
    fn rec(start: usize, s: usize, k: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == k {
            out.push(current.clone());
            return;
        }
        let needed = k - current.len();
        for j in start..=s - needed {
            current.push(j);
            rec(j + 1, s, k, current, out);
            current.pop();
        }
    }
    rec(0, s, k, &mut Vec::with_capacity(k), out);
}

/// Column-position subsets of a panel of `s`, every size in
/// `[min_size, max_size]`, ascending size and lexicographic within a size.
/// When `include_full` and `max_size < s`, the whole panel is appended last.
pub fn enumerate_subgroups(
    s: usize,
    min_size: usize,
    max_size: usize,
    include_full: bool,
) -> Result<Vec<Vec<usize>>> {
    if min_size < 2 || min_size > max_size || max_size > s {
        return Err(Error::Config(format!(
            "subset sizes {min_size}..={max_size} do not satisfy 2 <= min <= max <= {s}"
        )));
    }
    let mut subsets = Vec::new();
    for k in min_size..=max_size {
        size_combinations(s, k, &mut subsets);
    }
    if include_full && max_size < s {
        subsets.push((0..s).collect());
    }
    Ok(subsets)
}

/// Run the full pipeline on every enumerated subset and rank the results.
///
/// Retention is recomputed per panel: majority sets and the concordance cut
/// depend on the panel size, so nothing carries over from the full run.
pub fn analyze_subgroups(
    matrix: &JudgementMatrix,
    spec: &ConditionSpec,
    method: Method,
    budget: &PermutationBudget,
    alpha: f64,
    min_size: usize,
    max_size: usize,
    include_full: bool,
) -> Result<SubgroupReport> {
    analyze_subgroups_with(
        matrix,
        spec,
        method,
        budget,
        alpha,
        min_size,
        max_size,
        include_full,
        RowSelection::default(),
    )
}

/// As [`analyze_subgroups`], with an explicit row-selection rule.
#[allow(clippy::too_many_arguments)]
pub fn analyze_subgroups_with(
    matrix: &JudgementMatrix,
    spec: &ConditionSpec,
    method: Method,
    budget: &PermutationBudget,
    alpha: f64,
    min_size: usize,
    max_size: usize,
    include_full: bool,
    selection: RowSelection,
) -> Result<SubgroupReport> {
    let subsets = enumerate_subgroups(matrix.n_specialists(), min_size, max_size, include_full)?;
    let mut entries = subsets
        .into_par_iter()
        .map(|subset| -> Result<SubgroupEntry> {
            let restricted = matrix.restrict_specialists(&subset)?;
            let retention = apply_condition(&restricted, spec);
            let w = build_w_matrix_with(&restricted, &retention, selection)?;
            let decision = run_test(&w, method, budget, alpha)?;
            Ok(SubgroupEntry {
                specialists: subset
                    .iter()
                    .map(|&j| matrix.specialists()[j].clone())
                    .collect(),
                q: decision.test.q,
                p_value: decision.test.p_value,
                n_retained: w.n_rows(),
                degenerate: decision.test.degenerate,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    entries.sort_by(|a, b| {
        b.p_value
            .total_cmp(&a.p_value)
            .then_with(|| b.specialists.len().cmp(&a.specialists.len()))
            .then_with(|| a.specialists.cmp(&b.specialists))
    });
    Ok(SubgroupReport { entries, alpha })
}
