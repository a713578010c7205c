//! Reference implementations used as test oracles.
#![allow(dead_code)]

use std::collections::BTreeSet;

/// `H_n^(k)` for every `n` and `k ≤ order`, straight from the nested-sum definition.
pub fn nested_holder(values: &[f64], order: usize) -> Vec<Vec<f64>> {
    let mut levels = Vec::with_capacity(order + 1);
    let mut below = values.to_vec();
    for _ in 0..=order {
        let mut sum = 0.0;
        let level: Vec<f64> = below
            .iter()
            .enumerate()
            .map(|(i, v)| {
                sum += v;
                sum / (i + 1) as f64
            })
            .collect();
        below = level.clone();
        levels.push(level);
    }
    levels
}

/// `S_n^(k) / n^k` with `S^(0) = B` and `S_n^(k) = Σ_{m≤n} S_m^(k−1)`.
pub fn nested_cesaro_raw(values: &[f64], order: usize) -> Vec<Vec<f64>> {
    let mut sum = 0.0;
    let base: Vec<f64> = values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            sum += v;
            sum / (i + 1) as f64
        })
        .collect();
    let mut partial = vec![base.clone()];
    for k in 1..=order {
        let mut acc = 0.0;
        let next: Vec<f64> = partial[k - 1]
            .iter()
            .map(|s| {
                acc += s;
                acc
            })
            .collect();
        partial.push(next);
    }
    partial.into_iter().enumerate().map(|(k, s)| s.iter().enumerate().map(|(i, v)| v / ((i + 1) as f64).powi(k as i32)).collect()).collect()
}

/// Block boundaries `n_1 = first`, `n_i = i·Σ_{j<i} n_j`, covering `[0, n)`.
pub fn blocks(first: usize, n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let (mut start, mut i, mut len) = (0, 1, first);
    while start < n {
        out.push((start, len));
        start += len;
        i += 1;
        len = i * start;
    }
    out
}

/// Word count by enumeration, with completion checked against the explicit set of
/// sums reachable by `r` further symbols.
pub fn brute_count(first: usize, targets: (f64, f64), eps: f64, values: &[i64], n: usize) -> u64 {
    let m = values.len();
    let bl = blocks(first, n);
    let bounds: Vec<(f64, f64)> = bl
        .iter()
        .enumerate()
        .map(|(i, &(_, len))| {
            let a = if i % 2 == 0 { targets.0 } else { targets.1 };
            (len as f64 * (a - eps), len as f64 * (a + eps))
        })
        .collect();
    let (last_start, last_len) = *bl.last().unwrap();
    let remaining = last_start + last_len - n;
    let mut reach: BTreeSet<i64> = BTreeSet::from([0]);
    for _ in 0..remaining {
        reach = reach.iter().flat_map(|s| values.iter().map(move |v| s + v)).collect();
    }
    let tol = 1e-9;
    let inside = |sum: f64, (lo, hi): (f64, f64)| sum >= lo - tol && sum <= hi + tol;
    let mut count = 0;
    let mut word = vec![0usize; n];
    for code in 0..(m as u64).pow(n as u32) {
        let mut c = code;
        for w in word.iter_mut() {
            *w = (c % m as u64) as usize;
            c /= m as u64;
        }
        let ok = bl.iter().enumerate().all(|(i, &(start, len))| {
            let end = (start + len).min(n);
            let sum: i64 = word[start..end].iter().map(|&s| values[s]).sum();
            if end == start + len {
                inside(sum as f64, bounds[i])
            } else {
                reach.iter().any(|r| inside((sum + r) as f64, bounds[i]))
            }
        });
        count += u64::from(ok);
    }
    count
}
