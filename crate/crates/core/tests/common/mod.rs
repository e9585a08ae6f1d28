//! Reference implementations and fixtures shared by the integration tests.
//! Nothing here calls into the library under test.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Straight transcription of the four published equations, written out term
/// by term with literal coefficients.
pub fn pce_reference(stratum: &str, age: f64, tc: f64, hdl: f64, sbp: f64, treated: bool, smoker: bool, diabetic: bool) -> f64 {
    let (la, ltc, lhdl, lsbp) = (age.ln(), tc.ln(), hdl.ln(), sbp.ln());
    let (sm, dm) = (f64::from(u8::from(smoker)), f64::from(u8::from(diabetic)));
    let (sum, mean, s0) = match stratum {
        "female_white" => {
            let mut s = -29.799 * la + 4.884 * la * la + 13.540 * ltc - 3.114 * la * ltc - 13.578 * lhdl
                + 3.149 * la * lhdl;
            s += if treated { 2.019 * lsbp } else { 1.957 * lsbp };
            s += 7.574 * sm - 1.665 * la * sm + 0.661 * dm;
            (s, -29.18, 0.9665)
        }
        "female_black" => {
            let mut s = 17.114 * la + 0.940 * ltc - 18.920 * lhdl + 4.475 * la * lhdl;
            s += if treated {
                29.291 * lsbp - 6.432 * la * lsbp
            } else {
                27.820 * lsbp - 6.087 * la * lsbp
            };
            s += 0.691 * sm + 0.874 * dm;
            (s, 86.61, 0.9533)
        }
        "male_white" => {
            let mut s = 12.344 * la + 11.853 * ltc - 2.664 * la * ltc - 7.990 * lhdl + 1.769 * la * lhdl;
            s += if treated { 1.797 * lsbp } else { 1.764 * lsbp };
            s += 7.837 * sm - 1.795 * la * sm + 0.658 * dm;
            (s, 61.18, 0.9144)
        }
        "male_black" => {
            let mut s = 2.469 * la + 0.302 * ltc - 0.307 * lhdl;
            s += if treated { 1.916 * lsbp } else { 1.809 * lsbp };
            s += 0.549 * sm + 0.645 * dm;
            (s, 19.54, 0.8954)
        }
        other => panic!("no stratum {other}"),
    };
    1.0 - s0_pow(s0, (sum - mean).exp())
}

fn s0_pow(s0: f64, e: f64) -> f64 {
    (e * s0.ln()).exp()
}

/// Hand-evaluated profiles: (stratum, age, tc, hdl, sbp, treated, smoker, diabetic, risk).
pub const PCE_HAND_PROFILES: [(&str, f64, f64, f64, f64, bool, bool, bool, f64); 6] = [
    ("male_white", 55.0, 213.0, 50.0, 120.0, false, false, true, 0.10136022962230795),
    ("female_white", 55.0, 213.0, 50.0, 120.0, false, false, true, 0.03936390931269251),
    ("male_white", 62.5, 240.0, 38.0, 152.0, true, true, true, 0.5172821947799964),
    ("female_white", 48.0, 180.0, 62.0, 128.0, true, false, true, 0.019604571644354585),
    ("male_black", 55.0, 213.0, 50.0, 120.0, false, false, true, 0.1125679705300916),
    ("female_black", 70.0, 200.0, 45.0, 160.0, true, true, true, 0.6046768981146444),
];

/// Published worked example (55 years, TC 213, HDL 50, SBP 120 untreated,
/// non-smoker, non-diabetic): stratum and ten-year risk in percent.
pub const PCE_PUBLISHED_EXAMPLE: [(&str, f64); 4] =
    [("female_white", 2.1), ("female_black", 3.0), ("male_white", 5.3), ("male_black", 6.1)];

/// Random profile inside the equations' validity ranges.
pub fn random_profile(rng: &mut ChaCha8Rng) -> (f64, f64, f64, f64, bool, bool) {
    (
        rng.random_range(40.0..79.0),
        rng.random_range(130.0..320.0),
        rng.random_range(20.0..100.0),
        rng.random_range(90.0..200.0),
        rng.random_bool(0.5),
        rng.random_bool(0.5),
    )
}

/// AUC by counting every positive-negative pair, ties one half.
pub fn auc_pairs(scores: &[f64], labels: &[u8]) -> Option<f64> {
    let (mut wins, mut pairs) = (0u64, 0u64);
    for (i, &yi) in labels.iter().enumerate() {
        for (j, &yj) in labels.iter().enumerate() {
            if yi == 1 && yj == 0 {
                pairs += 2;
                wins += match scores[i].partial_cmp(&scores[j]).unwrap() {
                    std::cmp::Ordering::Greater => 2,
                    std::cmp::Ordering::Equal => 1,
                    std::cmp::Ordering::Less => 0,
                };
            }
        }
    }
    (pairs > 0).then(|| wins as f64 / pairs as f64)
}

/// 2x2 counts (x=1,y=1), (x=1,y=0), (x=0,y=1), (x=0,y=0).
fn table(col: &[u8], labels: &[u8]) -> [u128; 4] {
    let mut t = [0u128; 4];
    for (&x, &y) in col.iter().zip(labels) {
        t[match (x, y) {
            (1, 1) => 0,
            (1, 0) => 1,
            (0, 1) => 2,
            _ => 3,
        }] += 1;
    }
    t
}

/// Sum of (observed - expected)^2 / expected over the four cells.
pub fn chi2_expected_form(col: &[u8], labels: &[u8]) -> f64 {
    let t = table(col, labels).map(|v| v as f64);
    let n: f64 = t.iter().sum();
    let rows = [t[0] + t[1], t[2] + t[3]];
    let cols = [t[0] + t[2], t[1] + t[3]];
    if rows.contains(&0.0) || cols.contains(&0.0) {
        return 0.0;
    }
    let mut s = 0.0;
    for r in 0..2 {
        for c in 0..2 {
            let e = rows[r] * cols[c] / n;
            let o = t[2 * r + c];
            s += (o - e) * (o - e) / e;
        }
    }
    s
}

/// Brute-force top-k: every column scored as an exact rational, ranked by
/// (degenerate last, statistic descending, name ascending).
pub fn chi2_top_k(names: &[String], columns: &[Vec<u8>], labels: &[u8], k: usize) -> Vec<String> {
    let scored: Vec<(bool, u128, u128, &String)> = names
        .iter()
        .zip(columns)
        .map(|(name, col)| {
            let [a, b, c, d] = table(col, labels);
            let ones = a + b;
            let degenerate = ones == 0 || ones == col.len() as u128;
            let den = (a + b) * (c + d) * (a + c) * (b + d);
            let diff = (a * d).abs_diff(b * c);
            let num = if den == 0 { 0 } else { (a + b + c + d) * diff * diff };
            (degenerate, num, den.max(1), name)
        })
        .collect();
    let mut idx: Vec<usize> = (0..scored.len()).collect();
    idx.sort_by(|&i, &j| {
        let (di, ni, qi, name_i) = scored[i];
        let (dj, nj, qj, name_j) = scored[j];
        di.cmp(&dj).then_with(|| (nj * qi).cmp(&(ni * qj))).then_with(|| name_i.cmp(name_j))
    });
    idx.into_iter().take(k).map(|i| scored[i].3.clone()).collect()
}

/// 50-column binary fixture with duplicated, complemented and constant
/// columns so that ties occur.
pub fn chi2_fixture(seed: u64, n: usize) -> (Vec<String>, Vec<Vec<u8>>, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<u8> = (0..n).map(|i| u8::from(i % 3 == 0 || rng.random_bool(0.2))).collect();
    let mut cols: Vec<Vec<u8>> = Vec::new();
    for j in 0..50 {
        let col = match j % 10 {
            // exact duplicate of the previous column
            3 | 7 => cols[j - 1].clone(),
            // complement: same table with rows swapped
            5 => cols[j - 1].iter().map(|v| 1 - v).collect(),
            9 => vec![u8::from(j % 20 == 9); n],
            _ => {
                let p: f64 = rng.random_range(0.1..0.6);
                labels
                    .iter()
                    .map(|&y| u8::from(rng.random_bool(if y == 1 { (p + 0.2).min(0.95) } else { p })))
                    .collect()
            }
        };
        cols.push(col);
    }
    // names deliberately not in column order so the name tie-break matters
    let names = (0..50).map(|j| format!("K{:02}", (j * 37) % 50)).collect();
    (names, cols, labels)
}

/// Central-difference gradient.
pub fn numeric_grad(f: &dyn Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut x = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = x[i];
            x[i] = orig + h;
            let up = f(&x);
            x[i] = orig - h;
            let down = f(&x);
            x[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// ||a - b|| / max(||a||, ||b||).
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

/// Product-limit fixture: times, events and the hand-computed curve as
/// (time, survival, at_risk) after each distinct time, starting at (0, 1, n).
pub fn km_fixture() -> (Vec<f64>, Vec<bool>, Vec<(f64, f64, usize)>) {
    let times = vec![3.0, 1.0, 4.0, 2.0, 2.0, 5.0, 6.0, 6.0, 8.0, 9.0];
    let events = vec![true, true, false, true, false, true, true, true, false, true];
    // t=1: 10 at risk, 1 event        -> 9/10
    // t=2: 9 at risk, 1 event 1 cens  -> 9/10 * 8/9 = 8/10
    // t=3: 7 at risk, 1 event         -> 8/10 * 6/7 = 24/35
    // t=4: 6 at risk, 0 events        -> 24/35
    // t=5: 5 at risk, 1 event         -> 24/35 * 4/5 = 96/175
    // t=6: 4 at risk, 2 events        -> 96/175 * 2/4 = 48/175
    // t=8: 2 at risk, 0 events        -> 48/175
    // t=9: 1 at risk, 1 event         -> 0
    let curve = vec![
        (0.0, 1.0, 10),
        (1.0, 9.0 / 10.0, 10),
        (2.0, 9.0 / 10.0 * (8.0 / 9.0), 9),
        (3.0, 9.0 / 10.0 * (8.0 / 9.0) * (6.0 / 7.0), 7),
        (4.0, 9.0 / 10.0 * (8.0 / 9.0) * (6.0 / 7.0), 6),
        (5.0, 9.0 / 10.0 * (8.0 / 9.0) * (6.0 / 7.0) * (4.0 / 5.0), 5),
        (6.0, 9.0 / 10.0 * (8.0 / 9.0) * (6.0 / 7.0) * (4.0 / 5.0) * (2.0 / 4.0), 4),
        (8.0, 9.0 / 10.0 * (8.0 / 9.0) * (6.0 / 7.0) * (4.0 / 5.0) * (2.0 / 4.0), 2),
        (9.0, 0.0, 1),
    ];
    (times, events, curve)
}

/// Exponential survival with hazard `hr^x`, x ~ Bernoulli(1/2), and
/// independent exponential censoring at rate `censor_rate`.
pub fn planted_hazard(n: usize, hr: f64, censor_rate: f64, seed: u64) -> (Vec<f64>, Vec<bool>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut times, mut events, mut xs) = (Vec::new(), Vec::new(), Vec::new());
    for _ in 0..n {
        let x = f64::from(u8::from(rng.random_bool(0.5)));
        let t = -(1.0 - rng.random::<f64>()).ln() / hr.powf(x);
        let c = -(1.0 - rng.random::<f64>()).ln() / censor_rate;
        times.push(t.min(c));
        events.push(t <= c);
        xs.push(x);
    }
    (times, events, xs)
}

/// Paper-printed strings use a bare leading decimal point.
pub fn printed(s: &str) -> String {
    if let Some(rest) = s.strip_prefix("-.") {
        format!("-0.{rest}")
    } else if let Some(rest) = s.strip_prefix('.') {
        format!("0.{rest}")
    } else {
        s.to_string()
    }
}

/// LR row of the AUC table, train/test for EX-1..EX-4.
pub const TABLE2_LR_ROW: &str = "LR\t0.719\t0.690\t0.736\t0.715\t0.873\t0.638\t0.755\t0.722";

/// Table 3 rows (EX-2 panel): variable, sig., Pearson, cox sig., Exp(B), lower, upper.
pub const TABLE3_ROWS: [&str; 4] = [
    "age\t.000\t.313\t.000\t1.035\t1.030\t1.039",
    "tc\t.712\t.006\t.570\t.987\t.942\t1.033",
    "sbp\t.000\t.135\t.000\t1.005\t1.003\t1.008",
    "smoker\t.211\t-.019\t.881\t.976\t.708\t1.345",
];
