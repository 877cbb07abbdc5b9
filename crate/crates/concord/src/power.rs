//! Monte Carlo power estimation for the retention-plus-Q pipeline.
//!
//! Panels are simulated cell by cell: each specialist places an item on its
//! designed dimension with their own hit probability and spreads the
//! remaining mass over the other dimensions.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cochran::chi_square_sf;
use crate::condition::RowSelection;
use crate::error::{Error, Result};
use crate::judgement::{DimensionLabel, JudgementMatrix};
use crate::rng::replicate_seed;

/// How one simulated specialist judges: the probability of choosing an
/// item's designed dimension, and how the error mass splits across the
/// remaining dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapabilityProfile {
    pub p_correct: f64,
    /// Fractions of the error mass, one per wrong dimension in ascending
    /// dimension order (the designed dimension skipped). Sum to 1.
    pub error_split: Vec<f64>,
}

impl CapabilityProfile {
    /// Profile that spreads errors evenly over `n_wrong` wrong dimensions.
    pub fn symmetric(p_correct: f64, n_wrong: usize) -> Self {
        Self {
            p_correct,
            error_split: vec![1.0 / n_wrong as f64; n_wrong],
        }
    }

    fn validate(&self, n_dims: usize) -> Result<()> {
        if !self.p_correct.is_finite() || !(0.0..=1.0).contains(&self.p_correct) {
            return Err(Error::Config(format!(
                "p_correct {} outside [0, 1]",
                self.p_correct
            )));
        }
        if self.error_split.len() != n_dims - 1 {
            return Err(Error::Config(format!(
                "error_split has {} entries for {} dimensions (need {})",
                self.error_split.len(),
                n_dims,
                n_dims - 1
            )));
        }
        let mut sum = 0.0;
        for &f in &self.error_split {
            if !f.is_finite() || f < 0.0 {
                return Err(Error::Config(format!("error_split entry {f} invalid")));
            }
            sum += f;
        }
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!(
                "error_split sums to {sum}, expected 1"
            )));
        }
        Ok(())
    }
}

/// A named simulation setting: panel shape, per-specialist capability,
/// retention cut, and test level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    pub n_items: usize,
    pub n_dims: usize,
    pub specialists: Vec<CapabilityProfile>,
    #[serde(default = "default_ci_percent")]
    pub ci_percent: u32,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

fn default_ci_percent() -> u32 {
    50
}

fn default_alpha() -> f64 {
    0.05
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains([',', '\n', '\r']) {
            return Err(Error::Config(
                "scenario name must be non-empty and free of commas and line breaks".into(),
            ));
        }
        if self.n_items == 0 {
            return Err(Error::Config("scenario needs at least one item".into()));
        }
        if !(2..=usize::from(u8::MAX)).contains(&self.n_dims) {
            return Err(Error::Config(format!(
                "{} dimensions outside the supported 2..=255",
                self.n_dims
            )));
        }
        if self.specialists.len() < 2 {
            return Err(Error::Config("scenario needs at least two specialists".into()));
        }
        for profile in &self.specialists {
            profile.validate(self.n_dims)?;
        }
        if !(50..=100).contains(&self.ci_percent) {
            return Err(Error::Config(format!(
                "concordance percent {} outside 50..=100",
                self.ci_percent
            )));
        }
        if !self.alpha.is_finite() || self.alpha <= 0.0 || self.alpha >= 1.0 {
            return Err(Error::Config(format!(
                "alpha {} outside the open interval (0, 1)",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// Rejection-rate estimate for one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerEstimate {
    pub scenario: String,
    pub power: f64,
    pub mc_std_error: f64,
    pub mean_retained_items: f64,
    pub replicates: u64,
    pub seed: u64,
}

/// CSV snapshot of a batch of estimates, one row per scenario.
pub fn power_csv(estimates: &[PowerEstimate]) -> String {
    let mut out = String::from("scenario,power,mc_std_error,mean_retained,replicates,seed\n");
    for e in estimates {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            e.scenario, e.power, e.mc_std_error, e.mean_retained_items, e.replicates, e.seed
        ));
    }
    out
}

// Designed dimension of item `i`. The capability model is item-independent,
// so any fixed assignment works; round-robin keeps all dimensions populated.
fn designed_dim(i: usize, n_dims: usize) -> u8 {
    (i % n_dims) as u8
}

fn draw_dim(rng: &mut ChaCha8Rng, profile: &CapabilityProfile, correct: u8, n_dims: usize) -> u8 {
    let u: f64 = rng.gen();
    if u < profile.p_correct {
        return correct;
    }
    let error_mass = 1.0 - profile.p_correct;
    let mut acc = profile.p_correct;
    let mut slot = 0;
    let mut last = correct;
    for d in 0..n_dims as u8 {
        if d == correct {
            continue;
        }
        acc += error_mass * profile.error_split[slot];
        slot += 1;
        last = d;
        if u < acc {
            return d;
        }
    }
    // Rounding can leave acc a hair under 1; land on the final wrong dimension.
    last
}

/// Draw one full panel. Items get designed dimensions round-robin, labels
/// are `D1..Dn`, and the designed dimension is recorded as the declared
/// column. Cell draws consume the stream row-major (item by item, specialist
/// by specialist), so a seed pins the whole matrix.
pub fn simulate_judgements(spec: &ScenarioSpec, seed: u64) -> Result<JudgementMatrix> {
    spec.validate()?;
    let s = spec.specialists.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cells = Vec::with_capacity(spec.n_items * s);
    let mut theoretical = Vec::with_capacity(spec.n_items);
    for i in 0..spec.n_items {
        let correct = designed_dim(i, spec.n_dims);
        theoretical.push(correct);
        for profile in &spec.specialists {
            cells.push(draw_dim(&mut rng, profile, correct, spec.n_dims));
        }
    }
    let items = (1..=spec.n_items).map(|i| i.to_string()).collect();
    let specialists = (1..=s).map(|j| format!("e{j}")).collect();
    let dimensions = (1..=spec.n_dims)
        .map(|d| DimensionLabel::new(format!("D{d}")).expect("generated labels are valid"))
        .collect();
    Ok(JudgementMatrix::from_raw(
        items,
        specialists,
        dimensions,
        cells,
        Some(theoretical),
    ))
}

struct ReplicateScratch {
    cells: Vec<u8>,
    counts: Vec<u32>,
    modal: Vec<u8>,
    keep: Vec<bool>,
    col_agree: Vec<u32>,
}

impl ReplicateScratch {
    fn new(spec: &ScenarioSpec) -> Self {
        let s = spec.specialists.len();
        Self {
            cells: Vec::with_capacity(spec.n_items * s),
            counts: vec![0; spec.n_dims],
            modal: Vec::with_capacity(spec.n_items),
            keep: Vec::with_capacity(spec.n_items),
            col_agree: vec![0; s],
        }
    }
}

// One simulated panel pushed through retention, W, and the asymptotic test.
// Returns (rejected, rows entering the test). Mirrors the public pipeline
// exactly; `pipeline_paths_agree` holds the two together.
fn replicate_outcome(
    spec: &ScenarioSpec,
    selection: RowSelection,
    seed: u64,
    scratch: &mut ReplicateScratch,
) -> (bool, u32) {
    let s = spec.specialists.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    scratch.cells.clear();
    for i in 0..spec.n_items {
        let correct = designed_dim(i, spec.n_dims);
        for profile in &spec.specialists {
            scratch.cells.push(draw_dim(&mut rng, profile, correct, spec.n_dims));
        }
    }

    scratch.modal.clear();
    scratch.keep.clear();
    let mut strict = 0usize;
    for i in 0..spec.n_items {
        scratch.counts.fill(0);
        for &d in &scratch.cells[i * s..(i + 1) * s] {
            scratch.counts[usize::from(d)] += 1;
        }
        let mx = *scratch.counts.iter().max().expect("at least two dimensions");
        let unique = scratch.counts.iter().filter(|&&c| c == mx).count() == 1;
        // Tie rule of the row-order agreement builder: first modal label as
        // the row reads.
        let modal = scratch.cells[i * s..(i + 1) * s]
            .iter()
            .copied()
            .find(|&d| scratch.counts[usize::from(d)] == mx)
            .expect("non-empty row");
        scratch.modal.push(modal);
        if 2 * mx as usize > s {
            strict += 1;
        }
        let retained =
            100 * u64::from(mx) >= u64::from(spec.ci_percent) * s as u64 && unique;
        scratch.keep.push(retained);
    }

    scratch.col_agree.fill(0);
    let mut rows = 0u32;
    let mut n_total: u64 = 0;
    let mut den: u64 = 0;
    for i in 0..spec.n_items {
        let use_row = match selection {
            RowSelection::Retained => scratch.keep[i],
            RowSelection::LeadingCount => i < strict,
        };
        if !use_row {
            continue;
        }
        rows += 1;
        let modal = scratch.modal[i];
        let mut r: u32 = 0;
        for (j, &d) in scratch.cells[i * s..(i + 1) * s].iter().enumerate() {
            if d == modal {
                r += 1;
                scratch.col_agree[j] += 1;
            }
        }
        n_total += u64::from(r);
        den += u64::from(r) * (s as u64 - u64::from(r));
    }

    if rows < 2 || den == 0 {
        return (false, rows);
    }
    let t: u64 = scratch.col_agree.iter().map(|&d| u64::from(d) * u64::from(d)).sum();
    let inner = (s as u64 * t) as i128 - (n_total as i128) * (n_total as i128);
    let q = (s as f64 - 1.0) * inner as f64 / den as f64;
    let p = chi_square_sf(q, s as u32 - 1).expect("q is finite and df >= 1");
    (p < spec.alpha, rows)
}

/// Rejection rate of the simulate → retain → test pipeline under `spec`.
///
/// Each replicate draws a fresh panel, applies the concordance cut, and
/// counts a rejection when at least two rows survive, the agreement matrix
/// is non-degenerate, and the asymptotic test lands below `spec.alpha`.
/// Deterministic for a given seed, independent of worker count.
pub fn estimate_power(spec: &ScenarioSpec, replicates: u64, seed: u64) -> Result<PowerEstimate> {
    estimate_power_with(spec, replicates, seed, RowSelection::default())
}

/// As [`estimate_power`], with an explicit row-selection rule for the
/// agreement matrix.
pub fn estimate_power_with(
    spec: &ScenarioSpec,
    replicates: u64,
    seed: u64,
    selection: RowSelection,
) -> Result<PowerEstimate> {
    spec.validate()?;
    if replicates < 1000 {
        return Err(Error::Config(format!(
            "{replicates} replicates below the minimum of 1000"
        )));
    }
    // Integer accumulation keeps the reduction order irrelevant.
    let (rejections, retained_sum) = (0..replicates)
        .into_par_iter()
        .map_init(
            || ReplicateScratch::new(spec),
            |scratch, rep| {
                let (reject, rows) =
                    replicate_outcome(spec, selection, replicate_seed(seed, rep), scratch);
                (u64::from(reject), u64::from(rows))
            },
        )
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    let power = rejections as f64 / replicates as f64;
    Ok(PowerEstimate {
        scenario: spec.name.clone(),
        power,
        mc_std_error: (power * (1.0 - power) / replicates as f64).sqrt(),
        mean_retained_items: retained_sum as f64 / replicates as f64,
        replicates,
        seed,
    })
}

/// The ten bundled scenarios: 30 items, three dimensions, nine specialists,
/// a 50% concordance cut, and level 0.05. The first eight vary hit rates
/// with even error splits; the last two fix the hit rate (0.9 and 0.6) and
/// tilt each specialist's error split differently so the wrong-dimension
/// vectors are not permutations of one another.
pub fn builtin_scenarios() -> Vec<ScenarioSpec> {
    fn sym(ps: &[f64]) -> Vec<CapabilityProfile> {
        ps.iter().map(|&p| CapabilityProfile::symmetric(p, 2)).collect()
    }
    let mut panels = vec![
        sym(&[0.45, 0.9, 0.9, 0.9, 0.9, 0.9, 0.9, 0.9, 0.9]),
        sym(&[0.45, 0.45, 0.45, 0.9, 0.9, 0.9, 0.9, 0.9, 0.9]),
        sym(&[0.45, 0.35, 0.25, 0.9, 0.9, 0.9, 0.9, 0.9, 0.9]),
        sym(&[0.8, 0.9, 0.9, 0.9, 0.9, 0.9, 0.9, 0.9, 0.9]),
        sym(&[0.8, 0.8, 0.9, 0.9, 0.9, 0.9, 0.9, 0.9, 0.9]),
        sym(&[0.75, 0.75, 0.75, 0.6, 0.6, 0.6, 0.6, 0.6, 0.6]),
        sym(&[0.75, 0.75, 0.75, 0.3, 0.3, 0.3, 0.3, 0.3, 0.3]),
        sym(&[0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]),
    ];
    for p in [0.9, 0.6] {
        panels.push(
            (1..=9)
                .map(|j| CapabilityProfile {
                    p_correct: p,
                    // Tilt varies linearly from -0.20 to +0.20 across the panel.
                    error_split: {
                        let delta = (f64::from(j) - 5.0) / 20.0;
                        vec![0.25 + delta, 0.75 - delta]
                    },
                })
                .collect(),
        );
    }
    panels
        .into_iter()
        .enumerate()
        .map(|(k, specialists)| ScenarioSpec {
            name: format!("scenario-{}", k + 1),
            n_items: 30,
            n_dims: 3,
            specialists,
            ci_percent: 50,
            alpha: 0.05,
        })
        .collect()
}

pub fn builtin_scenario(name: &str) -> Option<ScenarioSpec> {
    builtin_scenarios().into_iter().find(|s| s.name == name)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ScenarioFile {
    One(ScenarioSpec),
    Many(Vec<ScenarioSpec>),
}

/// Parse scenarios from JSON: either a single object or an array of them.
pub fn scenarios_from_json_str(text: &str, location: &str) -> Result<Vec<ScenarioSpec>> {
    let parsed: ScenarioFile = serde_json::from_str(text).map_err(|e| Error::Parse {
        location: location.to_string(),
        message: e.to_string(),
    })?;
    let specs = match parsed {
        ScenarioFile::One(s) => vec![s],
        ScenarioFile::Many(v) => v,
    };
    if specs.is_empty() {
        return Err(Error::Config(format!("{location}: no scenarios defined")));
    }
    for spec in &specs {
        spec.validate()?;
    }
    Ok(specs)
}

pub fn scenarios_from_json(path: &Path) -> Result<Vec<ScenarioSpec>> {
    let text = std::fs::read_to_string(path)?;
    scenarios_from_json_str(&text, &path.display().to_string())
}

fn binomial_upper_tail(n: u32, k: u32, p: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > n {
        return 0.0;
    }
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    let q = 1.0 - p;
    let mut pmf = q.powi(n as i32);
    let mut tail = 0.0;
    for i in 0..n {
        pmf *= f64::from(n - i) / f64::from(i + 1) * (p / q);
        if i + 1 >= k {
            tail += pmf;
        }
    }
    tail.clamp(0.0, 1.0)
}

/// Probability that one specialist's placement lands on a dimension endorsed
/// by at least `⌊c·s/100⌋` of the other `s − 1` specialists, for a panel of
/// interchangeable specialists: the chance a single agreement-matrix cell
/// comes up 1.
///
/// `wrong_probs` are absolute per-dimension probabilities; together with
/// `p_correct` they must sum to 1 within 1e-12.
pub fn w_cell_probability(
    p_correct: f64,
    wrong_probs: &[f64],
    s: usize,
    c_percent: u32,
) -> Result<f64> {
    if s < 2 {
        return Err(Error::Config("panel needs at least two specialists".into()));
    }
    if c_percent > 100 {
        return Err(Error::Config(format!("percent {c_percent} above 100")));
    }
    let mut sum = p_correct;
    for &p in wrong_probs {
        if !p.is_finite() || !(0.0..=1.0).contains(&p) {
            return Err(Error::Config(format!("probability {p} outside [0, 1]")));
        }
        sum += p;
    }
    if !p_correct.is_finite() || !(0.0..=1.0).contains(&p_correct) {
        return Err(Error::Config(format!(
            "probability {p_correct} outside [0, 1]"
        )));
    }
    if (sum - 1.0).abs() > 1e-12 {
        return Err(Error::Config(format!(
            "dimension probabilities sum to {sum}, expected 1"
        )));
    }
    let f_star = (u64::from(c_percent) * s as u64 / 100) as u32;
    let n = (s - 1) as u32;
    let mut total = p_correct * binomial_upper_tail(n, f_star, p_correct);
    for &p in wrong_probs {
        total += p * binomial_upper_tail(n, f_star, p);
    }
    Ok(total.clamp(0.0, 1.0))
}
