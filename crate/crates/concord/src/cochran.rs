//! Cochran's Q test for equality of matched binary treatments.
//!
//! Specialists are the treatments, items the blocks. The statistic is
//! `Q = Σ_r s(s−1)(D_r − N/s)² / Σ_l R_l(s − R_l)`; its null distribution is
//! taken either exactly (conditioning on the row totals, every placement of
//! each row's ones equally likely, independently across rows), by Monte Carlo
//! sampling of that null, or from the χ²(s−1) large-sample approximation.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::condition::WMatrix;
use crate::error::{Error, Result};
use crate::rng::replicate_seed;

/// How the p-value is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Pick exact when the arrangement count fits the budget, otherwise the
    /// χ² approximation for 24 or more rows, otherwise Monte Carlo.
    Auto,
    Exact,
    MonteCarlo,
    Asymptotic,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Auto => "auto",
            Method::Exact => "exact",
            Method::MonteCarlo => "monte-carlo",
            Method::Asymptotic => "asymptotic",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Method::Auto),
            "exact" => Ok(Method::Exact),
            "mc" | "monte-carlo" => Ok(Method::MonteCarlo),
            "asymptotic" => Ok(Method::Asymptotic),
            other => Err(Error::Config(format!(
                "unknown method `{other}` (expected exact, mc, asymptotic or auto)"
            ))),
        }
    }
}

/// Budget and seed for the permutation-based methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PermutationBudget {
    /// Largest arrangement count still enumerated in full.
    pub exact_cutoff: u64,
    /// Monte Carlo replicate count, at least 1000.
    pub mc_replicates: u64,
    /// Master seed for replicate derivation.
    pub seed: u64,
}

impl Default for PermutationBudget {
    fn default() -> Self {
        Self {
            exact_cutoff: 10_000_000,
            mc_replicates: 100_000,
            seed: 0,
        }
    }
}

/// Test outcome in one of the three methods.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QTestResult {
    pub q: f64,
    pub df: u32,
    pub p_value: f64,
    pub method: Method,
    /// Binomial standard error of the Monte Carlo estimate; present exactly
    /// for the Monte Carlo method.
    pub mc_std_error: Option<f64>,
    /// Every row total was 0 or `s`, so the statistic's denominator is zero;
    /// defined as `q = 0`, `p = 1`.
    pub degenerate: bool,
    pub n_items: usize,
    pub n_specialists: usize,
}

impl fmt::Display for QTestResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Q = {:.3} (df = {}), p = {:.3} [{}]",
            self.q, self.df, self.p_value, self.method
        )?;
        if self.degenerate {
            write!(f, " (degenerate: all rows unanimous)")?;
        }
        Ok(())
    }
}

/// A test result paired with the significance level it was read at.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestDecision {
    pub test: QTestResult,
    pub alpha: f64,
    pub reject: bool,
}

// Integer sufficient statistic: with row totals fixed, the denominator of Q
// is constant, so ordering by Q is ordering by T = Σ_r D_r². Exact and Monte
// Carlo tie counting therefore happens on integers.
fn col_square_sum(w: &WMatrix) -> u64 {
    w.col_totals().iter().map(|&d| u64::from(d) * u64::from(d)).sum()
}

fn check_shape(w: &WMatrix) -> Result<()> {
    if w.n_rows() == 0 {
        return Err(Error::EmptyMatrix);
    }
    if w.n_cols() < 2 {
        return Err(Error::Config(format!(
            "{} specialist column(s), need at least 2",
            w.n_cols()
        )));
    }
    Ok(())
}

/// The Q statistic, with a flag for the degenerate all-unanimous case.
pub fn q_statistic(w: &WMatrix) -> Result<(f64, bool)> {
    check_shape(w)?;
    let s = w.n_cols() as u64;
    let denominator: u64 = w
        .row_totals()
        .iter()
        .map(|&r| u64::from(r) * (s - u64::from(r)))
        .sum();
    if denominator == 0 {
        return Ok((0.0, true));
    }
    let n = u64::from(w.grand_total());
    // Q = (s−1)(s·ΣD² − N²) / Σ R(s−R), all integer upstairs
    let numerator = (s - 1) * (s * col_square_sum(w) - n * n);
    Ok((numerator as f64 / denominator as f64, false))
}

/// Upper-tail probability of the χ² distribution with `df` degrees of
/// freedom, via the regularized incomplete gamma function. Relative error at
/// most 1e−10 over the supported range.
pub fn chi_square_sf(x: f64, df: u32) -> Result<f64> {
    if df == 0 {
        return Err(Error::Config("chi-square df must be positive".into()));
    }
    if !x.is_finite() || x < 0.0 {
        return Err(Error::Config(format!(
            "chi-square statistic must be finite and non-negative, got {x}"
        )));
    }
    let a = f64::from(df) / 2.0;
    let y = x / 2.0;
    if y == 0.0 {
        return Ok(1.0);
    }
    // Series for the lower function converges fast left of a+1, the
    // continued fraction for the upper function right of it.
    if y < a + 1.0 {
        Ok(1.0 - lower_regularized_series(a, y))
    } else {
        Ok(upper_regularized_cf(a, y))
    }
}

const GAMMA_EPS: f64 = 1e-16;
const GAMMA_MAX_ITER: usize = 500;

// Lanczos approximation, g = 7, valid for positive arguments.
fn ln_gamma(x: f64) -> f64 {
    const COEFFS: [f64; 8] = [
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_59,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    debug_assert!(x > 0.0);
    let mut sum = 0.999_999_999_999_809_93;
    for (i, c) in COEFFS.iter().enumerate() {
        sum += c / (x + i as f64);
    }
    let t = x + 6.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x - 0.5) * t.ln() - t + sum.ln()
}

fn lower_regularized_series(a: f64, y: f64) -> f64 {
    let mut term = 1.0 / a;
    let mut sum = term;
    for n in 1..GAMMA_MAX_ITER {
        term *= y / (a + n as f64);
        sum += term;
        if term.abs() < sum.abs() * GAMMA_EPS {
            break;
        }
    }
    sum * (-y + a * y.ln() - ln_gamma(a)).exp()
}

// Modified Lentz continued fraction for the upper regularized function.
fn upper_regularized_cf(a: f64, y: f64) -> f64 {
    const FPMIN: f64 = 1e-300;
    let mut b = y + 1.0 - a;
    let mut c = 1.0 / FPMIN;
    let mut d = 1.0 / b.max(FPMIN);
    let mut h = d;
    for i in 1..GAMMA_MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = b + an / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < GAMMA_EPS {
            break;
        }
    }
    ((-y + a * y.ln() - ln_gamma(a)).exp() * h).clamp(0.0, 1.0)
}

fn base_result(w: &WMatrix, q: f64, degenerate: bool, method: Method, p: f64) -> QTestResult {
    QTestResult {
        q,
        df: w.n_cols() as u32 - 1,
        p_value: p,
        method,
        mc_std_error: None,
        degenerate,
        n_items: w.n_rows(),
        n_specialists: w.n_cols(),
    }
}

/// The χ²(s−1) approximation.
pub fn asymptotic_p(w: &WMatrix) -> Result<QTestResult> {
    let (q, degenerate) = q_statistic(w)?;
    let p = if degenerate {
        1.0
    } else {
        chi_square_sf(q, w.n_cols() as u32 - 1)?
    };
    Ok(base_result(w, q, degenerate, Method::Asymptotic, p))
}

fn binomial(n: u64, k: u64) -> u128 {
    debug_assert!(k <= n);
    let k = k.min(n - k);
    let mut out: u128 = 1;
    // Each partial product is itself a binomial coefficient, so the division
    // is exact at every step.
    for i in 0..k {
        out = out * u128::from(n - i) / u128::from(i + 1);
    }
    out
}

/// Number of equally likely arrangements in the exact null: `Π_l C(s, R_l)`.
pub fn arrangement_count(w: &WMatrix) -> u128 {
    let s = w.n_cols() as u64;
    let mut total: u128 = 1;
    for &r in w.row_totals() {
        total = total.saturating_mul(binomial(s, u64::from(r)));
    }
    total
}

// Rows with 0 < R < s; rows that are all zeros or all ones have a single
// placement and contribute a constant to the column totals.
fn variable_rows(w: &WMatrix) -> (Vec<u32>, Vec<u32>) {
    let s = w.n_cols() as u32;
    let mut variable = Vec::new();
    let mut base = vec![0u32; w.n_cols()];
    for &r in w.row_totals() {
        if r == 0 {
            continue;
        } else if r == s {
            for b in base.iter_mut() {
                *b += 1;
            }
        } else {
            variable.push(r);
        }
    }
    (variable, base)
}

fn combinations(s: usize, k: usize) -> Vec<Vec<u16>> {
    let mut out = Vec::new();
    let mut current: Vec<u16> = Vec::with_capacity(k);
    fn rec(start: usize, s: usize, k: usize, current: &mut Vec<u16>, out: &mut Vec<Vec<u16>>) {
        if current.len() == k {
            out.push(current.clone());
            return;
        }
        let needed = k - current.len();
        for j in start..=(s - needed) {
            current.push(j as u16);
            rec(j + 1, s, k, current, out);
            current.pop();
        }
    }
    rec(0, s, k, &mut current, &mut out);
    out
}

/// Full enumeration of the conditional null distribution. Errors with
/// [`Error::CutoffExceeded`] when the arrangement count is over budget.
pub fn exact_p(w: &WMatrix, budget: &PermutationBudget) -> Result<QTestResult> {
    let (q, degenerate) = q_statistic(w)?;
    let arrangements = arrangement_count(w);
    if arrangements > u128::from(budget.exact_cutoff) {
        return Err(Error::CutoffExceeded {
            arrangements,
            cutoff: budget.exact_cutoff,
        });
    }
    let s = w.n_cols();
    let t_observed = col_square_sum(w);
    let (variable, base) = variable_rows(w);

    // one combination table per distinct row total
    let mut tables: Vec<Option<Vec<Vec<u16>>>> = vec![None; s + 1];
    for &r in &variable {
        let r = r as usize;
        if tables[r].is_none() {
            tables[r] = Some(combinations(s, r));
        }
    }

    let mut col_sums = base;
    let mut t_running: u64 = col_sums.iter().map(|&d| u64::from(d) * u64::from(d)).sum();
    let mut hits: u64 = 0;
    let mut visited: u64 = 0;

    // depth-first product over rows, T maintained incrementally
    fn descend(
        depth: usize,
        variable: &[u32],
        tables: &[Option<Vec<Vec<u16>>>],
        col_sums: &mut [u32],
        t_running: &mut u64,
        t_observed: u64,
        hits: &mut u64,
        visited: &mut u64,
    ) {
        if depth == variable.len() {
            *visited += 1;
            if *t_running >= t_observed {
                *hits += 1;
            }
            return;
        }
        let table = tables[variable[depth] as usize].as_ref().expect("table built");
        for combo in table {
            for &j in combo {
                let j = usize::from(j);
                *t_running += 2 * u64::from(col_sums[j]) + 1;
                col_sums[j] += 1;
            }
            descend(
                depth + 1,
                variable,
                tables,
                col_sums,
                t_running,
                t_observed,
                hits,
                visited,
            );
            for &j in combo {
                let j = usize::from(j);
                col_sums[j] -= 1;
                *t_running -= 2 * u64::from(col_sums[j]) + 1;
            }
        }
    }
    descend(
        0,
        &variable,
        &tables,
        &mut col_sums,
        &mut t_running,
        t_observed,
        &mut hits,
        &mut visited,
    );
    debug_assert_eq!(u128::from(visited), arrangements);

    let p = hits as f64 / visited as f64;
    Ok(base_result(w, q, degenerate, Method::Exact, p))
}

/// Monte Carlo sampling of the conditional null with the add-one estimator
/// `p̂ = (1 + #{T* ≥ T}) / (replicates + 1)`. Deterministic for a fixed seed
/// independent of worker count.
pub fn mc_permutation_p(w: &WMatrix, budget: &PermutationBudget) -> Result<QTestResult> {
    let (q, degenerate) = q_statistic(w)?;
    if budget.mc_replicates < 1000 {
        return Err(Error::Config(format!(
            "mc_replicates {} below the minimum of 1000",
            budget.mc_replicates
        )));
    }
    let s = w.n_cols();
    let t_observed = col_square_sum(w);
    let (variable, base) = variable_rows(w);
    let reps = budget.mc_replicates;
    let seed = budget.seed;

    let hits: u64 = (0..reps)
        .into_par_iter()
        .map_init(
            || (vec![0u32; s], (0..s as u16).collect::<Vec<u16>>()),
            |(col_sums, indices), replicate| {
                let mut rng = ChaCha8Rng::seed_from_u64(replicate_seed(seed, replicate));
                col_sums.copy_from_slice(&base);
                for &r in &variable {
                    // partial Fisher-Yates draw of r distinct columns
                    let r = r as usize;
                    for k in 0..r {
                        let pick = k + rng.gen_range(0..s - k);
                        indices.swap(k, pick);
                        col_sums[usize::from(indices[k])] += 1;
                    }
                }
                let t: u64 = col_sums.iter().map(|&d| u64::from(d) * u64::from(d)).sum();
                u64::from(t >= t_observed)
            },
        )
        .sum();

    let p = (1 + hits) as f64 / (reps + 1) as f64;
    let se = (p * (1.0 - p) / reps as f64).sqrt();
    let mut result = base_result(w, q, degenerate, Method::MonteCarlo, p);
    result.mc_std_error = Some(se);
    Ok(result)
}

/// Runs the test with explicit or automatic method choice and reads the
/// decision at `alpha`.
pub fn run_test(
    w: &WMatrix,
    method: Method,
    budget: &PermutationBudget,
    alpha: f64,
) -> Result<TestDecision> {
    if !alpha.is_finite() || !(0.0..1.0).contains(&alpha) || alpha == 0.0 {
        return Err(Error::Config(format!(
            "alpha {alpha} outside the open interval (0, 1)"
        )));
    }
    let resolved = match method {
        Method::Exact | Method::MonteCarlo | Method::Asymptotic => method,
        Method::Auto => {
            if arrangement_count(w) <= u128::from(budget.exact_cutoff) {
                Method::Exact
            } else if w.n_rows() >= 24 {
                Method::Asymptotic
            } else {
                Method::MonteCarlo
            }
        }
    };
    let test = match resolved {
        Method::Exact => exact_p(w, budget)?,
        Method::MonteCarlo => mc_permutation_p(w, budget)?,
        Method::Asymptotic => asymptotic_p(w)?,
        Method::Auto => unreachable!(),
    };
    let reject = test.p_value < alpha;
    Ok(TestDecision {
        test,
        alpha,
        reject,
    })
}
