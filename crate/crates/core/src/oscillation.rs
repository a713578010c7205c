//! Oscillation times, level crossings and the quantitative bounds that tie
//! their growth to the width of the limit sets.
//!
//! All detectors work on recorded [`LevelHistory`] samples, so a detected time
//! is exact only up to one step of the recording grid.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::means::LevelHistory;
use crate::scalar::Scalar;

/// Transient cutoff for bound checks: times below this are discarded.
pub const DEFAULT_TRANSIENT_CUTOFF: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    /// Approach of the upper endpoint (odd `j`).
    Hi,
    /// Approach of the lower endpoint (even `j`).
    Lo,
}

impl Parity {
    pub fn of_index(j: usize) -> Self {
        if j % 2 == 1 {
            Parity::Hi
        } else {
            Parity::Lo
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct OscillationTime {
    /// 1-based position in the sequence of times.
    pub j: usize,
    pub t: u64,
    pub parity: Parity,
}

/// Summary of a ratio sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioStats<T> {
    pub count: usize,
    /// Max over the final half of the ratios (1 when there are none).
    pub max_tail: T,
    pub median: T,
    /// Least-squares slope of `ln(ratio)` against position.
    pub trend: T,
}

impl<T: Scalar> RatioStats<T> {
    pub fn from_ratios(ratios: &[T]) -> Self {
        let count = ratios.len();
        let tail = &ratios[count / 2..];
        let max_tail = tail.iter().copied().fold(T::one(), T::max);
        let median = if count == 0 {
            T::one()
        } else {
            let mut sorted = ratios.to_vec();
            sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite ratios"));
            if count % 2 == 1 {
                sorted[count / 2]
            } else {
                (sorted[count / 2 - 1] + sorted[count / 2]) / T::lit(2.0)
            }
        };
        let trend = if count < 2 {
            T::zero()
        } else {
            let nf = T::from_count(count as u64);
            let xs = (0..count).map(|j| T::from_count(j as u64));
            let mean_x = (nf - T::one()) / T::lit(2.0);
            let mean_y = ratios.iter().map(|r| r.ln()).fold(T::zero(), |a, b| a + b) / nf;
            let (mut sxy, mut sxx) = (T::zero(), T::zero());
            for (x, r) in xs.zip(ratios) {
                let dx = x - mean_x;
                sxy = sxy + dx * (r.ln() - mean_y);
                sxx = sxx + dx * dx;
            }
            sxy / sxx
        };
        Self { count, max_tail, median, trend }
    }
}

fn successive_ratios<T: Scalar>(times: impl Iterator<Item = u64>) -> Vec<T> {
    let times: Vec<u64> = times.collect();
    times.windows(2).map(|w| T::from_count(w[1]) / T::from_count(w[0])).collect()
}

/// Detected oscillation times `t_j(ε)` with their ratios `t_{j+1}/t_j`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OscillationProfile<T> {
    pub epsilon: T,
    pub alpha0: T,
    pub beta0: T,
    pub times: Vec<OscillationTime>,
    pub ratios: Vec<T>,
}

impl<T: Scalar> OscillationProfile<T> {
    /// Profile from externally known alternating times (first one `Hi`).
    pub fn from_times(times: &[u64], alpha0: T, beta0: T, epsilon: T) -> Result<Self> {
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("oscillation times must be strictly increasing"));
        }
        let times: Vec<OscillationTime> =
            times.iter().enumerate().map(|(i, &t)| OscillationTime { j: i + 1, t, parity: Parity::of_index(i + 1) }).collect();
        let ratios = successive_ratios(times.iter().map(|o| o.t));
        Ok(Self { epsilon, alpha0, beta0, times, ratios })
    }

    pub fn stats(&self) -> RatioStats<T> {
        RatioStats::from_ratios(&self.ratios)
    }

    /// Ratios `t_{j+1}/t_j` restricted to `t_j ≥ cutoff`.
    pub fn ratios_after(&self, cutoff: u64) -> Vec<T> {
        self.times.iter().zip(&self.ratios).filter(|(o, _)| o.t >= cutoff).map(|(_, &r)| r).collect()
    }

    /// One JSON object per time: `{"j", "t", "ratio", "parity"}`; `ratio` is `t_j/t_{j−1}`.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for (i, o) in self.times.iter().enumerate() {
            let ratio = if i == 0 { None } else { Some(self.ratios[i - 1]) };
            let rec = JsonlRecord { j: o.j, t: o.t, ratio, parity: o.parity };
            serde_json::to_writer(&mut out, &rec)?;
            writeln!(out)?;
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct JsonlRecord<T> {
    j: usize,
    t: u64,
    ratio: Option<T>,
    parity: Parity,
}

/// Alternating first passages above `β_0 − ε` (odd `j`) and below `α_0 + ε` (even `j`).
pub fn detect_times<T: Scalar>(history: &LevelHistory<T>, alpha0: T, beta0: T, epsilon: T) -> Result<OscillationProfile<T>> {
    if !(epsilon > T::zero()) || beta0 - epsilon <= alpha0 + epsilon {
        return Err(Error::InvalidEpsilon { epsilon: epsilon.as_f64(), alpha0: alpha0.as_f64(), beta0: beta0.as_f64() });
    }
    let upper = beta0 - epsilon;
    let lower = alpha0 + epsilon;
    let mut times = Vec::new();
    let mut want = Parity::Hi;
    for (n, v) in history.iter() {
        let hit = match want {
            Parity::Hi => v > upper,
            Parity::Lo => v < lower,
        };
        if hit {
            times.push(OscillationTime { j: times.len() + 1, t: n, parity: want });
            want = if want == Parity::Hi { Parity::Lo } else { Parity::Hi };
        }
    }
    if times.len() < 2 {
        return Err(Error::insufficient(format!("found {} oscillation time(s), need at least 2", times.len())));
    }
    let ratios = successive_ratios(times.iter().map(|o| o.t));
    Ok(OscillationProfile { epsilon, alpha0, beta0, times, ratios })
}

/// Level-`k` extremal times: between consecutive level-`(k−1)` times `t_j ≤ n < t_{j+1}`,
/// the argmin of `history` after a `Lo` time and the argmax after a `Hi` time (ties to the smaller index).
pub fn extremal_times<T: Scalar>(below: &[OscillationTime], history: &LevelHistory<T>) -> Vec<OscillationTime> {
    let mut out = Vec::new();
    for pair in below.windows(2) {
        let (start, end) = (pair[0].t, pair[1].t);
        let lo = history.indices.partition_point(|&n| n < start);
        let hi = history.indices.partition_point(|&n| n < end);
        if lo >= hi {
            continue;
        }
        let mut best = lo;
        for i in lo + 1..hi {
            let better = match pair[0].parity {
                Parity::Lo => history.values[i] < history.values[best],
                Parity::Hi => history.values[i] > history.values[best],
            };
            if better {
                best = i;
            }
        }
        out.push(OscillationTime { j: pair[0].j, t: history.indices[best], parity: pair[0].parity });
    }
    out
}

/// Profile over level-`k` extremal times.
pub fn extremal_profile<T: Scalar>(below: &OscillationProfile<T>, history: &LevelHistory<T>) -> OscillationProfile<T> {
    let times = extremal_times(&below.times, history);
    let ratios = successive_ratios(times.iter().map(|o| o.t));
    OscillationProfile { epsilon: below.epsilon, alpha0: below.alpha0, beta0: below.beta0, times, ratios }
}

/// Indices `n_i(γ, ε)` with value in `(γ − ε, γ + ε)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossingProfile<T> {
    pub gamma: T,
    pub epsilon: T,
    pub indices: Vec<u64>,
    /// Side of `γ` the value lies on (`Hi` when `value ≥ γ`).
    pub sides: Vec<Parity>,
    pub ratios: Vec<T>,
}

impl<T: Scalar> CrossingProfile<T> {
    pub fn stats(&self) -> RatioStats<T> {
        RatioStats::from_ratios(&self.ratios)
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for (i, (&t, &parity)) in self.indices.iter().zip(&self.sides).enumerate() {
            let ratio = if i == 0 { None } else { Some(self.ratios[i - 1]) };
            serde_json::to_writer(&mut out, &JsonlRecord { j: i + 1, t, ratio, parity })?;
            writeln!(out)?;
        }
        Ok(())
    }
}

pub fn detect_crossings<T: Scalar>(history: &LevelHistory<T>, gamma: T, epsilon: T) -> Result<CrossingProfile<T>> {
    if !(epsilon > T::zero()) {
        return Err(Error::invalid(format!("crossing half-width must be positive, got {epsilon}")));
    }
    if history.is_empty() {
        return Err(Error::insufficient("empty history"));
    }
    let (mut indices, mut sides) = (Vec::new(), Vec::new());
    for (n, v) in history.iter() {
        if v > gamma - epsilon && v < gamma + epsilon {
            indices.push(n);
            sides.push(if v >= gamma { Parity::Hi } else { Parity::Lo });
        }
    }
    let ratios = successive_ratios(indices.iter().copied());
    Ok(CrossingProfile { gamma, epsilon, indices, sides, ratios })
}

/// Lower bound `d` on `t_{j+1}/t_j` from the level −1 and level 0 limit sets:
/// `min{(β_0 − α_{−1}) / (α_0 − α_{−1} + 2ε), (β_{−1} − α_0) / (β_{−1} − β_0 + 2ε)}`.
pub fn hardy_d_bound<T: Scalar>(alpha_m1: T, beta_m1: T, alpha0: T, beta0: T, epsilon: T) -> Result<T> {
    if !(alpha_m1 <= alpha0 && alpha0 < beta0 && beta0 <= beta_m1) {
        return Err(Error::invalid(format!(
            "need alpha_-1 <= alpha_0 < beta_0 <= beta_-1, got [{alpha_m1}, {beta_m1}] and [{alpha0}, {beta0}]"
        )));
    }
    if !(epsilon > T::zero()) || beta0 - alpha0 <= T::lit(2.0) * epsilon {
        return Err(Error::InvalidEpsilon { epsilon: epsilon.as_f64(), alpha0: alpha0.as_f64(), beta0: beta0.as_f64() });
    }
    let two_eps = T::lit(2.0) * epsilon;
    let lower = (beta0 - alpha_m1) / (alpha0 - alpha_m1 + two_eps);
    let upper = (beta_m1 - alpha0) / (beta_m1 - beta0 + two_eps);
    Ok(lower.min(upper))
}

/// Width bound `(D − 1)/(D + 1) · width_below` for limit sets whose oscillation ratios stay below `D`.
pub fn contraction_bound<T: Scalar>(ratio_bound: T, width_below: T) -> Result<T> {
    if !(ratio_bound > T::one()) {
        return Err(Error::invalid(format!("ratio bound must exceed 1, got {ratio_bound}")));
    }
    if !(width_below >= T::zero()) {
        return Err(Error::invalid(format!("width must be non-negative, got {width_below}")));
    }
    Ok((ratio_bound - T::one()) / (ratio_bound + T::one()) * width_below)
}
