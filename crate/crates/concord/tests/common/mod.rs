//! Shared fixture access, frozen panel values, and independently coded
//! oracles for the integration suites. The oracles deliberately avoid the
//! library's algorithms: placements are enumerated as bitmasks with totals
//! recounted at every leaf, the survival function is numerically integrated,
//! and the agreement-cell probability is measured by direct simulation.

// Each integration target compiles this module separately and uses its own
// subset of it.
#![allow(dead_code)]

use std::path::PathBuf;

use concord::condition::WMatrix;
use concord::judgement::{parse_judgement_csv, JudgementMatrix};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/panel_judgements.csv")
}

pub fn fixture() -> JudgementMatrix {
    let file = std::fs::File::open(fixture_path()).expect("bundled panel file");
    parse_judgement_csv(file).expect("bundled panel parses")
}

/// Frozen agreement matrix of the bundled panel under the leading-count
/// row rule: 24 rows by 9 specialists.
pub const PANEL_W_CELLS: [[u8; 9]; 24] = [
    [1, 0, 0, 1, 1, 1, 1, 0, 0],
    [1, 0, 0, 0, 1, 1, 0, 1, 0],
    [0, 0, 0, 1, 1, 1, 1, 0, 0],
    [0, 1, 1, 1, 1, 1, 1, 0, 0],
    [1, 0, 1, 1, 1, 1, 0, 1, 0],
    [0, 1, 1, 0, 1, 1, 1, 0, 1],
    [1, 1, 1, 1, 1, 1, 1, 1, 1],
    [0, 1, 1, 0, 1, 1, 0, 1, 0],
    [0, 1, 0, 0, 0, 0, 1, 1, 1],
    [1, 1, 1, 1, 1, 1, 1, 1, 1],
    [1, 0, 1, 1, 1, 1, 1, 1, 1],
    [1, 0, 0, 1, 1, 1, 1, 0, 1],
    [1, 0, 0, 0, 1, 1, 1, 1, 0],
    [1, 1, 1, 1, 0, 0, 1, 0, 1],
    [1, 0, 1, 1, 1, 1, 1, 1, 1],
    [1, 0, 1, 1, 0, 0, 0, 0, 1],
    [1, 1, 1, 1, 0, 0, 1, 0, 1],
    [0, 1, 1, 1, 0, 0, 0, 1, 0],
    [1, 1, 1, 1, 0, 0, 1, 0, 0],
    [1, 1, 1, 0, 1, 1, 1, 0, 0],
    [1, 1, 1, 1, 1, 1, 1, 1, 0],
    [1, 1, 1, 1, 1, 1, 0, 0, 1],
    [1, 1, 1, 1, 1, 1, 1, 1, 1],
    [1, 0, 0, 1, 0, 0, 1, 0, 1],
];

pub const PANEL_W_COL_TOTALS: [u32; 9] = [18, 14, 17, 18, 17, 17, 18, 12, 13];

/// Items the 50% concordance cut retains, with the dimension each one lands
/// on.
pub const PANEL_ASSIGNED: [(u32, &str); 24] = [
    (1, "T"),
    (4, "P"),
    (5, "T"),
    (6, "T"),
    (7, "J"),
    (8, "P"),
    (10, "J"),
    (11, "J"),
    (12, "P"),
    (13, "J"),
    (14, "T"),
    (15, "J"),
    (17, "P"),
    (19, "T"),
    (20, "P"),
    (21, "J"),
    (22, "P"),
    (23, "J"),
    (25, "J"),
    (26, "P"),
    (27, "P"),
    (28, "P"),
    (29, "P"),
    (30, "J"),
];

pub const PANEL_EXCLUDED: [u32; 6] = [2, 3, 9, 16, 18, 24];

/// Frozen head of the subgroup survey (leading-count row rule):
/// specialist numbers, Q, p.
pub const PANEL_TOP10: [(&[u32], f64, f64); 10] = [
    (&[2, 3, 5, 6, 7, 8], 0.778, 0.978),
    (&[2, 3, 5, 6, 8, 9], 0.789, 0.978),
    (&[1, 2, 3, 4, 5, 6, 8, 9], 2.478, 0.929),
    (&[2, 3, 5, 6, 7, 9], 1.772, 0.880),
    (&[2, 3, 4, 5, 7, 8, 9], 2.441, 0.875),
    (&[2, 3, 4, 6, 7, 8, 9], 2.441, 0.875),
    (&[1, 3, 4, 5, 6, 7], 1.923, 0.860),
    (&[2, 4, 5, 7, 8, 9], 1.991, 0.850),
    (&[2, 4, 6, 7, 8, 9], 1.991, 0.850),
    (&[1, 3, 5, 6, 8, 9], 2.069, 0.840),
];

fn binom(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut out: u128 = 1;
    for i in 0..k {
        out = out * u128::from(n - i) / u128::from(i + 1);
    }
    out
}

/// Arrangements of the permutation null, computed locally.
pub fn oracle_arrangements(w: &WMatrix) -> u128 {
    let s = w.n_cols() as u64;
    w.row_totals()
        .iter()
        .map(|&r| binom(s, u64::from(r)))
        .product()
}

/// Exact permutation tail by full enumeration: every row placement is a
/// bitmask, column totals are recounted from scratch at each leaf, and the
/// tie rule compares the integer statistic `Σ D²`.
pub fn brute_force_exact_p(w: &WMatrix) -> f64 {
    let s = w.n_cols();
    assert!(s <= 16, "mask enumeration supports up to 16 columns");
    let t_obs: u64 = (0..s)
        .map(|j| {
            let d: u64 = (0..w.n_rows()).map(|l| u64::from(w.agreed(l, j))).sum();
            d * d
        })
        .sum();
    let row_masks: Vec<Vec<u16>> = w
        .row_totals()
        .iter()
        .map(|&r| {
            (0u16..(1 << s))
                .filter(|m| m.count_ones() == r)
                .collect()
        })
        .collect();
    let mut hits: u64 = 0;
    let mut total: u64 = 0;
    let mut chosen = vec![0u16; row_masks.len()];
    fn descend(
        level: usize,
        row_masks: &[Vec<u16>],
        chosen: &mut [u16],
        s: usize,
        t_obs: u64,
        hits: &mut u64,
        total: &mut u64,
    ) {
        if level == row_masks.len() {
            let t: u64 = (0..s)
                .map(|j| {
                    let d: u64 = chosen.iter().map(|m| u64::from(m >> j & 1)).sum();
                    d * d
                })
                .sum();
            *total += 1;
            if t >= t_obs {
                *hits += 1;
            }
            return;
        }
        for &m in &row_masks[level] {
            chosen[level] = m;
            descend(level + 1, row_masks, chosen, s, t_obs, hits, total);
        }
    }
    descend(0, &row_masks, &mut chosen, s, t_obs, &mut hits, &mut total);
    hits as f64 / total as f64
}

/// A random small agreement matrix whose permutation space stays below
/// `max_arrangements`.
pub fn random_w(rng: &mut ChaCha8Rng, max_arrangements: u128) -> WMatrix {
    loop {
        let n_rows = rng.gen_range(2..=5);
        let n_cols = rng.gen_range(3..=5);
        let cells: Vec<u8> = (0..n_rows * n_cols)
            .map(|_| u8::from(rng.gen_bool(0.5)))
            .collect();
        let rows = (1..=n_rows).map(|i| i.to_string()).collect();
        let cols = (1..=n_cols).map(|j| format!("e{j}")).collect();
        let w = WMatrix::from_cells(rows, cols, cells).expect("consistent shape");
        if oracle_arrangements(&w) <= max_arrangements {
            return w;
        }
    }
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, eps: f64) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    #[allow(clippy::too_many_arguments)]
    fn rec(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        eps: f64,
        depth: u32,
    ) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * eps {
            return left + right + delta / 15.0;
        }
        rec(f, a, fa, m, fm, left, lm, flm, 0.5 * eps, depth - 1)
            + rec(f, m, fm, b, fb, right, rm, frm, 0.5 * eps, depth - 1)
    }
    let fa = f(a);
    let fb = f(b);
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    rec(f, a, fa, b, fb, whole, m, fm, eps, 48)
}

/// Survival function of the chi-squared distribution by numeric quadrature.
///
/// Substituting `t = u²` turns the density kernel into `u^(df−1)·e^(−u²/2)`,
/// smooth at the origin for every df ≥ 1, and the normalizing constant
/// cancels in the ratio of integrals, so no gamma function is involved.
pub fn sf_quadrature(x: f64, df: u32) -> f64 {
    assert!(df >= 1 && x >= 0.0);
    if x == 0.0 {
        return 1.0;
    }
    // Dividing by the kernel's peak keeps both integrals O(1), so one
    // absolute tolerance serves every df.
    let norm = if df > 1 {
        let v = f64::from(df - 1);
        (0.5 * v * v.ln() - 0.5 * v).exp()
    } else {
        1.0
    };
    let kernel = move |u: f64| u.powi(df as i32 - 1) * (-0.5 * u * u).exp() / norm;
    let upper = 800.0_f64.sqrt().max(2.0 * x.sqrt());
    if x.sqrt() >= upper {
        return 0.0;
    }
    let scale = adaptive_simpson(&kernel, 0.0, upper, 1e-13);
    let tail = adaptive_simpson(&kernel, x.sqrt(), upper, 1e-13);
    (tail / scale).clamp(0.0, 1.0)
}

/// Copy of `w` with rows and columns shuffled by `rng`.
pub fn permute_w(w: &WMatrix, rng: &mut ChaCha8Rng) -> WMatrix {
    let mut row_order: Vec<usize> = (0..w.n_rows()).collect();
    let mut col_order: Vec<usize> = (0..w.n_cols()).collect();
    row_order.shuffle(rng);
    col_order.shuffle(rng);
    let rows = row_order.iter().map(|&l| w.rows()[l].clone()).collect();
    let cols = col_order.iter().map(|&j| w.cols()[j].clone()).collect();
    let mut cells = Vec::with_capacity(w.n_rows() * w.n_cols());
    for &l in &row_order {
        for &j in &col_order {
            cells.push(u8::from(w.agreed(l, j)));
        }
    }
    WMatrix::from_cells(rows, cols, cells).unwrap()
}

/// Copy of `w` with one unanimous row (every cell `fill`) appended.
pub fn insert_unanimous_row(w: &WMatrix, fill: u8) -> WMatrix {
    let mut rows: Vec<String> = w.rows().to_vec();
    rows.push("extra".into());
    let mut cells = Vec::with_capacity((w.n_rows() + 1) * w.n_cols());
    for l in 0..w.n_rows() {
        cells.extend_from_slice(w.row_cells(l));
    }
    cells.extend(std::iter::repeat(fill).take(w.n_cols()));
    WMatrix::from_cells(rows, w.cols().to_vec(), cells).unwrap()
}

/// Direct simulation of the agreement-cell event: one panelist's placement
/// is endorsed by at least `⌊c·s/100⌋` of the other `s − 1`.
pub fn mc_cell_probability(
    p_correct: f64,
    wrongs: &[f64],
    s: usize,
    c_percent: u32,
    draws: u64,
    seed: u64,
) -> f64 {
    let f_star = (u64::from(c_percent) * s as u64 / 100) as u32;
    let mut probs = vec![p_correct];
    probs.extend_from_slice(wrongs);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| -> usize {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (d, &p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return d;
            }
        }
        probs.len() - 1
    };
    let mut hits = 0u64;
    for _ in 0..draws {
        let mine = draw(&mut rng);
        let endorsements = (1..s).filter(|_| draw(&mut rng) == mine).count() as u32;
        if endorsements >= f_star {
            hits += 1;
        }
    }
    hits as f64 / draws as f64
}
