//! Report rendering. Text is for reading at the terminal and rounds to
//! three decimals; JSON carries full precision for downstream tooling.

use std::fmt::Write as _;

use concord::cochran::TestDecision;
use concord::condition::{ConditionSpec, RetentionResult, RowSelection, WMatrix};
use concord::judgement::JudgementMatrix;
use concord::power::PowerEstimate;
use concord::subgroup::SubgroupReport;
use serde_json::{json, Value};

pub struct AnalyzeData<'a> {
    pub matrix: &'a JudgementMatrix,
    pub condition: &'a ConditionSpec,
    pub selection: RowSelection,
    pub alpha: f64,
    pub retention: &'a RetentionResult,
    /// Agreement matrix and test outcome; absent when no row qualified.
    pub outcome: Option<(&'a WMatrix, &'a TestDecision)>,
}

pub struct SubgroupsData<'a> {
    pub matrix: &'a JudgementMatrix,
    pub condition: &'a ConditionSpec,
    pub selection: RowSelection,
    pub min_size: usize,
    pub max_size: usize,
    pub include_full: bool,
    pub report: &'a SubgroupReport,
    /// Text-only display truncation; serialized formats keep every row.
    pub top: Option<usize>,
}

fn condition_line(spec: &ConditionSpec) -> String {
    match spec {
        ConditionSpec::ConcordanceIndex { percent } => format!("concordance >= {percent}%"),
        ConditionSpec::ContentValidityRatio { threshold } => {
            format!("content-validity ratio >= {threshold}")
        }
    }
}

fn selection_name(selection: RowSelection) -> &'static str {
    match selection {
        RowSelection::Retained => "retained",
        RowSelection::LeadingCount => "leading-count",
    }
}

fn panel_line(m: &JudgementMatrix) -> String {
    format!(
        "panel: {} items, {} specialists, {} dimensions",
        m.n_items(),
        m.n_specialists(),
        m.n_dimensions()
    )
}

/// Theoretical label of a retained item, by id.
fn theoretical_of<'a>(m: &'a JudgementMatrix, item: &str) -> Option<&'a str> {
    let idx = m.item_position(item)?;
    m.theoretical(idx).map(|t| t.as_str())
}

pub fn analyze_text(data: &AnalyzeData) -> String {
    let m = data.matrix;
    let mut out = String::new();
    let _ = writeln!(out, "{}", panel_line(m));
    let _ = writeln!(out, "condition: {}", condition_line(data.condition));
    let _ = writeln!(out, "rows: {}", selection_name(data.selection));
    let _ = writeln!(
        out,
        "retained {} of {}",
        data.retention.n_retained(),
        m.n_items()
    );
    out.push('\n');

    if !data.retention.retained.is_empty() {
        let id_width = data
            .retention
            .retained
            .iter()
            .map(|k| k.item.len())
            .chain(["item".len()])
            .max()
            .unwrap();
        let dim_width = data
            .retention
            .retained
            .iter()
            .map(|k| k.dimension.as_str().len())
            .chain(["dimension".len()])
            .max()
            .unwrap();
        if m.has_theoretical() {
            let theo_width = data
                .retention
                .retained
                .iter()
                .filter_map(|k| theoretical_of(m, &k.item))
                .map(str::len)
                .chain(["theoretical".len()])
                .max()
                .unwrap();
            let _ = writeln!(
                out,
                "{:<id_width$}  {:<dim_width$}  {:<theo_width$}  match",
                "item", "dimension", "theoretical"
            );
            for kept in &data.retention.retained {
                let theo = theoretical_of(m, &kept.item).unwrap_or("-");
                let agree = if theo == kept.dimension.as_str() { "yes" } else { "no" };
                let _ = writeln!(
                    out,
                    "{:<id_width$}  {:<dim_width$}  {theo:<theo_width$}  {agree}",
                    kept.item,
                    kept.dimension.as_str()
                );
            }
        } else {
            let _ = writeln!(out, "{:<id_width$}  dimension", "item");
            for kept in &data.retention.retained {
                let _ = writeln!(out, "{:<id_width$}  {}", kept.item, kept.dimension.as_str());
            }
        }
        out.push('\n');
    }

    if !data.retention.excluded.is_empty() {
        let listed: Vec<String> = data
            .retention
            .excluded
            .iter()
            .map(|e| format!("{} ({})", e.item, e.reason.as_str()))
            .collect();
        let _ = writeln!(out, "excluded: {}", listed.join(", "));
        out.push('\n');
    }

    match data.outcome {
        None => {
            let _ = writeln!(
                out,
                "no agreement rows under this selection; homogeneity test skipped"
            );
        }
        Some((w, decision)) => {
            let _ = writeln!(out, "agreement rows: {}, N = {}", w.n_rows(), w.grand_total());
            let totals: Vec<String> = w
                .cols()
                .iter()
                .zip(w.col_totals())
                .map(|(id, t)| format!("{id}={t}"))
                .collect();
            let _ = writeln!(out, "column totals: {}", totals.join(" "));
            out.push('\n');
            let _ = writeln!(out, "{}", decision.test);
            let verdict = if decision.reject { "reject" } else { "do not reject" };
            let _ = writeln!(
                out,
                "decision at alpha {}: {verdict} specialist homogeneity",
                decision.alpha
            );
        }
    }
    out
}

pub fn analyze_json(data: &AnalyzeData) -> String {
    let m = data.matrix;
    let retained: Vec<Value> = data
        .retention
        .retained
        .iter()
        .map(|kept| {
            let theo = theoretical_of(m, &kept.item);
            json!({
                "item": kept.item,
                "dimension": kept.dimension.as_str(),
                "theoretical": theo,
                "match": theo.map(|t| t == kept.dimension.as_str()),
            })
        })
        .collect();
    let agreement = m.has_theoretical().then(|| {
        let matching = data
            .retention
            .retained
            .iter()
            .filter(|kept| theoretical_of(m, &kept.item) == Some(kept.dimension.as_str()))
            .count();
        json!({"matching": matching, "out_of": data.retention.n_retained()})
    });
    let value = json!({
        "panel": {
            "n_items": m.n_items(),
            "n_specialists": m.n_specialists(),
            "n_dimensions": m.n_dimensions(),
            "specialists": m.specialists(),
            "dimensions": m.dimensions(),
        },
        "condition": data.condition,
        "row_selection": data.selection,
        "alpha": data.alpha,
        "retention": {
            "retained": retained,
            "excluded": data.retention.excluded,
        },
        "theoretical_agreement": agreement,
        "agreement_matrix": data.outcome.map(|(w, _)| json!({
            "items": w.rows(),
            "specialists": w.cols(),
            "column_totals": w.col_totals(),
            "grand_total": w.grand_total(),
        })),
        "test": data.outcome.map(|(_, d)| json!(d.test)),
        "reject": data.outcome.map(|(_, d)| d.reject),
    });
    pretty(&value)
}

pub fn subgroups_text(data: &SubgroupsData) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{}", panel_line(data.matrix));
    let _ = writeln!(out, "condition: {}", condition_line(data.condition));
    let _ = writeln!(out, "rows: {}", selection_name(data.selection));
    let sizes = if data.include_full && data.max_size < data.matrix.n_specialists() {
        format!("sizes {}..={} plus the full panel", data.min_size, data.max_size)
    } else {
        format!("sizes {}..={}", data.min_size, data.max_size)
    };
    let _ = writeln!(
        out,
        "subsets: {} ({sizes}), rejections at alpha {}: {}",
        data.report.entries.len(),
        data.report.alpha,
        data.report.rejection_count()
    );
    out.push('\n');

    let shown = data.top.unwrap_or(data.report.entries.len());
    let rows = data.report.top(shown);
    let ids: Vec<String> = rows.iter().map(|e| e.specialists.join("+")).collect();
    let id_width = ids
        .iter()
        .map(String::len)
        .chain(["specialists".len()])
        .max()
        .unwrap();
    let _ = writeln!(out, "{:<id_width$}  retained  Q        p", "specialists");
    for (entry, id) in rows.iter().zip(&ids) {
        let _ = writeln!(
            out,
            "{id:<id_width$}  {:>8}  {:>7.3}  {:>5.3}",
            entry.n_retained, entry.q, entry.p_value
        );
    }
    if rows.len() < data.report.entries.len() {
        let _ = writeln!(out, "showing {} of {}", rows.len(), data.report.entries.len());
    }
    out
}

pub fn subgroups_json(data: &SubgroupsData) -> String {
    let value = json!({
        "panel": {
            "n_items": data.matrix.n_items(),
            "n_specialists": data.matrix.n_specialists(),
            "n_dimensions": data.matrix.n_dimensions(),
        },
        "condition": data.condition,
        "row_selection": data.selection,
        "bounds": {
            "min_size": data.min_size,
            "max_size": data.max_size,
            "include_full": data.include_full,
        },
        "alpha": data.report.alpha,
        "n_subsets": data.report.entries.len(),
        "n_rejections": data.report.rejection_count(),
        "subsets": data.report.entries,
    });
    pretty(&value)
}

pub fn power_text(estimates: &[PowerEstimate]) -> String {
    let name_width = estimates
        .iter()
        .map(|e| e.scenario.len())
        .chain(["scenario".len()])
        .max()
        .unwrap();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<name_width$}  power  std_error  mean_retained  replicates  seed",
        "scenario"
    );
    for e in estimates {
        let _ = writeln!(
            out,
            "{:<name_width$}  {:>5.3}  {:>9.3}  {:>13.3}  {:>10}  {:>4}",
            e.scenario, e.power, e.mc_std_error, e.mean_retained_items, e.replicates, e.seed
        );
    }
    out
}

pub fn power_json(estimates: &[PowerEstimate], selection: RowSelection) -> String {
    pretty(&json!({
        "row_selection": selection,
        "estimates": estimates,
    }))
}

fn pretty(value: &Value) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("report serialization");
    text.push('\n');
    text
}
