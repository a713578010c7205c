//! Streaming Birkhoff means and their Hölder and Cesàro cascades.
//!
//! Level 0 of both cascades is the partial mean `B_n = (1/n) Σ_{i<n} φ(x_i)`.
//! The Hölder cascade iterates arithmetic averaging,
//! `H_n^(k) = (1/n) Σ_{i≤n} H_i^(k−1)`, which is kept as one compensated
//! running sum per level. The Cesàro cascade tracks the iterated partial sums
//! `S_n^(k) = Σ_{i≤n} S_i^(k−1)` (with `S_n = B_n`) only in normalized form,
//!
//! ```text
//! C_n^(k) = k! · S_n^(k) / n^k
//!         = (1 − 1/n)^k · C_{n−1}^(k) + (k/n) · C_n^(k−1),
//! ```
//!
//! so `n^k` is never formed. With the `k!` factor a constant stream `c` has
//! `C_n^(k) → c`; the unscaled `S_n^(k) / n^k` is available through
//! [`CesaroCascade::raw_level`].
//!
//! Long runs are summarized by [`LevelHistory`] samples taken on the geometric
//! index grid `⌈γ^m⌉`, from which tail limit sets and the [`IntervalTower`] are
//! estimated.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::{KahanSum, Scalar};

/// Minimum number of history samples for a limit-set estimate.
pub const MIN_LIMIT_SET_SAMPLES: usize = 1000;
pub const DEFAULT_GRID_GAMMA: f64 = 1.001;
pub const DEFAULT_TAIL_WINDOW: f64 = 0.5;
pub const DEFAULT_NEST_SLACK: f64 = 1e-3;

fn check_value<T: Scalar>(value: T, bound: Option<T>) -> Result<()> {
    if !value.is_finite() {
        return Err(Error::invalid(format!("non-finite stream value {value}")));
    }
    if let Some(m) = bound {
        if value.abs() > m {
            return Err(Error::invalid(format!("stream value {value} exceeds declared bound {m}")));
        }
    }
    Ok(())
}

/// Running `B_n = H_n^(0)` and Hölder means `H_n^(1..=K)`.
#[derive(Debug, Clone)]
pub struct MeanCascade<T> {
    n: u64,
    sums: Vec<KahanSum<T>>,
    levels: Vec<T>,
    bound: Option<T>,
}

impl<T: Scalar> MeanCascade<T> {
    pub fn new(order: usize) -> Self {
        Self { n: 0, sums: vec![KahanSum::new(); order + 1], levels: vec![T::zero(); order + 1], bound: None }
    }

    pub fn with_bound(order: usize, bound: T) -> Self {
        Self { bound: Some(bound), ..Self::new(order) }
    }

    pub fn order(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn bound(&self) -> Option<T> {
        self.bound
    }

    /// `H_n^(k)`; level 0 is `B_n`. Zero before the first push.
    pub fn level(&self, k: usize) -> T {
        self.levels[k]
    }

    pub fn levels(&self) -> &[T] {
        &self.levels
    }

    #[inline]
    pub fn push(&mut self, value: T) -> Result<()> {
        check_value(value, self.bound)?;
        self.n += 1;
        let n = T::from_count(self.n);
        let mut input = value;
        for (sum, level) in self.sums.iter_mut().zip(self.levels.iter_mut()) {
            sum.add(input);
            *level = sum.value() / n;
            input = *level;
        }
        Ok(())
    }
}

/// Normalized Cesàro means `C_n^(0..=K)`, see the module docs for the scaling.
#[derive(Debug, Clone)]
pub struct CesaroCascade<T> {
    n: u64,
    base: KahanSum<T>,
    levels: Vec<KahanSum<T>>,
    values: Vec<T>,
    binomials: Vec<Vec<T>>,
    factorials: Vec<T>,
    bound: Option<T>,
}

impl<T: Scalar> CesaroCascade<T> {
    pub fn new(order: usize) -> Self {
        let binomials = (0..=order)
            .map(|k| {
                let mut row = vec![T::one(); k + 1];
                for i in 1..=k {
                    row[i] = row[i - 1] * T::from_count((k + 1 - i) as u64) / T::from_count(i as u64);
                }
                row
            })
            .collect();
        let mut factorials = vec![T::one(); order + 1];
        for k in 1..=order {
            factorials[k] = factorials[k - 1] * T::from_count(k as u64);
        }
        Self {
            n: 0,
            base: KahanSum::new(),
            levels: vec![KahanSum::new(); order + 1],
            values: vec![T::zero(); order + 1],
            binomials,
            factorials,
            bound: None,
        }
    }

    pub fn with_bound(order: usize, bound: T) -> Self {
        Self { bound: Some(bound), ..Self::new(order) }
    }

    pub fn order(&self) -> usize {
        self.values.len() - 1
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// `C_n^(k) = k! S_n^(k) / n^k`.
    pub fn level(&self, k: usize) -> T {
        self.values[k]
    }

    pub fn levels(&self) -> &[T] {
        &self.values
    }

    /// `S_n^(k) / n^k` without the `k!` factor.
    pub fn raw_level(&self, k: usize) -> T {
        self.values[k] / self.factorials[k]
    }

    /// `(1 + x)^k − 1` by Horner on the binomial expansion, accurate for small `x`.
    #[inline]
    fn growth_minus_one(&self, k: usize, x: T) -> T {
        let row = &self.binomials[k];
        let mut acc = row[k];
        for i in (1..k).rev() {
            acc = row[i] + x * acc;
        }
        x * acc
    }

    #[inline]
    pub fn push(&mut self, value: T) -> Result<()> {
        check_value(value, self.bound)?;
        self.n += 1;
        let n = T::from_count(self.n);
        self.base.add(value);
        self.values[0] = self.base.value() / n;
        let x = -T::one() / n;
        for k in 1..self.values.len() {
            let prev = self.values[k];
            let delta = self.growth_minus_one(k, x) * prev + T::from_count(k as u64) * self.values[k - 1] / n;
            self.levels[k].add(delta);
            self.values[k] = self.levels[k].value();
        }
        Ok(())
    }
}

/// Iterator of `a_1 = φ(x_0)`, `a_n = (φ(x_{n−1}) − B_{n−1}) / n`, whose partial sums are `B_n`.
pub struct Increments<I> {
    inner: I,
    n: u64,
    sum: KahanSum<f64>,
}

pub fn to_increments<I>(stream: I) -> Increments<I::IntoIter>
where
    I: IntoIterator<Item = Result<f64>>,
{
    Increments { inner: stream.into_iter(), n: 0, sum: KahanSum::new() }
}

impl<I: Iterator<Item = Result<f64>>> Iterator for Increments<I> {
    type Item = Result<f64>;

    fn next(&mut self) -> Option<Self::Item> {
        let value = match self.inner.next()? {
            Ok(v) => v,
            Err(e) => return Some(Err(e)),
        };
        let prev_mean = if self.n == 0 { 0.0 } else { self.sum.value() / self.n as f64 };
        self.n += 1;
        self.sum.add(value);
        let a = if self.n == 1 { value } else { (value - prev_mean) / self.n as f64 };
        Some(Ok(a))
    }
}

/// Distinct indices `⌈γ^m⌉`, `m = 0, 1, …`.
#[derive(Debug, Clone)]
pub struct GeometricGrid {
    log_gamma: f64,
    m: u64,
    last: u64,
}

impl GeometricGrid {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma > 1.0 && gamma.is_finite()) {
            return Err(Error::invalid(format!("grid ratio must exceed 1, got {gamma}")));
        }
        Ok(Self { log_gamma: gamma.ln(), m: 0, last: 0 })
    }
}

impl Iterator for GeometricGrid {
    type Item = u64;

    fn next(&mut self) -> Option<u64> {
        loop {
            let idx = (self.m as f64 * self.log_gamma).exp().ceil();
            self.m += 1;
            if idx >= u64::MAX as f64 {
                return None;
            }
            let idx = idx as u64;
            if idx > self.last {
                self.last = idx;
                return Some(idx);
            }
        }
    }
}

/// Samples `(n, value)` of one cascade level on the geometric grid (1-based `n`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelHistory<T> {
    pub level: i32,
    pub indices: Vec<u64>,
    pub values: Vec<T>,
}

impl<T: Scalar> LevelHistory<T> {
    pub fn new(level: i32) -> Self {
        Self { level, indices: Vec::new(), values: Vec::new() }
    }

    /// Every-index history of a finite sequence (index `i + 1` for `values[i]`).
    pub fn dense(level: i32, values: Vec<T>) -> Self {
        Self { level, indices: (1..=values.len() as u64).collect(), values }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn push(&mut self, index: u64, value: T) {
        debug_assert!(self.indices.last().is_none_or(|&l| l < index));
        self.indices.push(index);
        self.values.push(value);
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, T)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    /// Position of the first sample in the final `window` fraction of samples.
    fn tail_start(&self, window: f64) -> Result<usize> {
        if !(window > 0.0 && window < 1.0) {
            return Err(Error::invalid(format!("tail window must lie in (0, 1), got {window}")));
        }
        if self.len() < MIN_LIMIT_SET_SAMPLES {
            return Err(Error::insufficient(format!(
                "limit-set estimate needs at least {MIN_LIMIT_SET_SAMPLES} samples, history has {}",
                self.len()
            )));
        }
        Ok(((self.len() as f64) * (1.0 - window)).floor() as usize)
    }
}

/// Per-grid-interval min/max of the raw observable (the level −1 history).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RawEnvelope<T> {
    pub indices: Vec<u64>,
    pub lo: Vec<T>,
    pub hi: Vec<T>,
}

impl<T: Scalar> RawEnvelope<T> {
    fn new() -> Self {
        Self { indices: Vec::new(), lo: Vec::new(), hi: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Estimated limit set `[lo, hi]` of cascade level `k` (−1 for the raw observable).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitSetEstimate<T> {
    pub k: i32,
    pub window_start: u64,
    pub lo: T,
    pub hi: T,
}

impl<T: Scalar> LimitSetEstimate<T> {
    pub fn width(&self) -> T {
        self.hi - self.lo
    }

    /// `self ⊆ outer` up to `slack`.
    pub fn within(&self, outer: &Self, slack: T) -> bool {
        self.lo >= outer.lo - slack && self.hi <= outer.hi + slack
    }
}

/// Min/max over the final `window` fraction of the samples.
pub fn estimate_limit_set<T: Scalar>(history: &LevelHistory<T>, window: f64) -> Result<LimitSetEstimate<T>> {
    let start = history.tail_start(window)?;
    let tail = &history.values[start..];
    let lo = tail.iter().copied().fold(T::infinity(), T::min);
    let hi = tail.iter().copied().fold(T::neg_infinity(), T::max);
    Ok(LimitSetEstimate { k: history.level, window_start: history.indices[start], lo, hi })
}

/// Limit-set estimates for levels −1, 0, …, K.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct IntervalTower<T> {
    pub intervals: Vec<LimitSetEstimate<T>>,
}

impl<T: Scalar> IntervalTower<T> {
    pub fn level(&self, k: i32) -> Option<&LimitSetEstimate<T>> {
        self.intervals.iter().find(|e| e.k == k)
    }

    /// Highest level present.
    pub fn top(&self) -> Option<&LimitSetEstimate<T>> {
        self.intervals.iter().max_by_key(|e| e.k)
    }

    /// Levels `k` whose interval is not inside level `k − 1` up to `slack`.
    pub fn nesting_violations(&self, slack: T) -> Vec<i32> {
        self.intervals.windows(2).filter(|w| !w[1].within(&w[0], slack)).map(|w| w[1].k).collect()
    }

    pub fn is_nested(&self, slack: T) -> bool {
        self.nesting_violations(slack).is_empty()
    }

    /// `{"n": …, "levels": [{"k": …, "lo": …, "hi": …}]}`
    pub fn summary(&self, n: u64) -> TowerSummary<T> {
        TowerSummary { n, levels: self.intervals.iter().map(|e| LevelSummary { k: e.k, lo: e.lo, hi: e.hi }).collect() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TowerSummary<T> {
    pub n: u64,
    pub levels: Vec<LevelSummary<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevelSummary<T> {
    pub k: i32,
    pub lo: T,
    pub hi: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisConfig {
    pub order: usize,
    pub grid_gamma: f64,
    pub cesaro: bool,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self { order: 3, grid_gamma: DEFAULT_GRID_GAMMA, cesaro: true }
    }
}

/// Streaming driver: feeds the cascades and records grid histories.
#[derive(Debug, Clone)]
pub struct CascadeRecorder<T> {
    holder: MeanCascade<T>,
    cesaro: Option<CesaroCascade<T>>,
    grid: GeometricGrid,
    next_sample: u64,
    grid_gamma: f64,
    holder_hist: Vec<LevelHistory<T>>,
    cesaro_hist: Vec<LevelHistory<T>>,
    raw: RawEnvelope<T>,
    raw_lo: T,
    raw_hi: T,
}

impl<T: Scalar> CascadeRecorder<T> {
    pub fn new(config: &AnalysisConfig, bound: Option<T>) -> Result<Self> {
        let mut grid = GeometricGrid::new(config.grid_gamma)?;
        let next_sample = grid.next().unwrap_or(u64::MAX);
        let levels = |n: usize| (0..=n as i32).map(LevelHistory::new).collect::<Vec<_>>();
        Ok(Self {
            holder: match bound {
                Some(m) => MeanCascade::with_bound(config.order, m),
                None => MeanCascade::new(config.order),
            },
            cesaro: config.cesaro.then(|| match bound {
                Some(m) => CesaroCascade::with_bound(config.order, m),
                None => CesaroCascade::new(config.order),
            }),
            grid,
            next_sample,
            grid_gamma: config.grid_gamma,
            holder_hist: levels(config.order),
            cesaro_hist: if config.cesaro { levels(config.order) } else { Vec::new() },
            raw: RawEnvelope::new(),
            raw_lo: T::infinity(),
            raw_hi: T::neg_infinity(),
        })
    }

    pub fn n(&self) -> u64 {
        self.holder.n()
    }

    pub fn holder(&self) -> &MeanCascade<T> {
        &self.holder
    }

    pub fn cesaro(&self) -> Option<&CesaroCascade<T>> {
        self.cesaro.as_ref()
    }

    #[inline]
    pub fn push(&mut self, value: T) -> Result<()> {
        self.holder.push(value)?;
        if let Some(c) = self.cesaro.as_mut() {
            c.push(value)?;
        }
        self.raw_lo = self.raw_lo.min(value);
        self.raw_hi = self.raw_hi.max(value);
        let n = self.holder.n();
        if n == self.next_sample {
            for (hist, &v) in self.holder_hist.iter_mut().zip(self.holder.levels()) {
                hist.push(n, v);
            }
            if let Some(c) = &self.cesaro {
                for (hist, &v) in self.cesaro_hist.iter_mut().zip(c.levels()) {
                    hist.push(n, v);
                }
            }
            self.raw.indices.push(n);
            self.raw.lo.push(self.raw_lo);
            self.raw.hi.push(self.raw_hi);
            self.raw_lo = T::infinity();
            self.raw_hi = T::neg_infinity();
            self.next_sample = self.grid.next().unwrap_or(u64::MAX);
        }
        Ok(())
    }

    pub fn finish(self) -> Analysis<T> {
        Analysis {
            n: self.holder.n(),
            grid_gamma: self.grid_gamma,
            bound: self.holder.bound(),
            holder: self.holder_hist,
            cesaro: self.cesaro_hist,
            raw: self.raw,
            final_holder: self.holder.levels().to_vec(),
            final_cesaro: self.cesaro.map(|c| c.levels().to_vec()).unwrap_or_default(),
        }
    }
}

/// Recorded histories of one cascade run.
#[derive(Debug, Clone, Serialize)]
pub struct Analysis<T> {
    pub n: u64,
    pub grid_gamma: f64,
    pub bound: Option<T>,
    /// Hölder levels `0..=K`.
    pub holder: Vec<LevelHistory<T>>,
    /// Cesàro levels `0..=K` (empty when disabled).
    pub cesaro: Vec<LevelHistory<T>>,
    pub raw: RawEnvelope<T>,
    pub final_holder: Vec<T>,
    pub final_cesaro: Vec<T>,
}

/// Runs up to `n_max` values of `stream` through the cascades.
pub fn analyze<T, I>(stream: I, n_max: u64, bound: Option<f64>, config: &AnalysisConfig) -> Result<Analysis<T>>
where
    T: Scalar,
    I: IntoIterator<Item = Result<f64>>,
{
    let mut rec = CascadeRecorder::new(config, bound.map(T::lit))?;
    for value in stream.into_iter().take(n_max as usize) {
        rec.push(T::lit(value?))?;
    }
    Ok(rec.finish())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Holder,
    Cesaro,
}

impl<T: Scalar> Analysis<T> {
    pub fn order(&self) -> usize {
        self.holder.len().saturating_sub(1)
    }

    pub fn histories(&self, family: Family) -> &[LevelHistory<T>] {
        match family {
            Family::Holder => &self.holder,
            Family::Cesaro => &self.cesaro,
        }
    }

    /// Level −1 estimate over the same tail as the level-0 history.
    pub fn raw_limit_set(&self, window: f64) -> Result<LimitSetEstimate<T>> {
        let start = self.holder[0].tail_start(window)?;
        let lo = self.raw.lo[start..].iter().copied().fold(T::infinity(), T::min);
        let hi = self.raw.hi[start..].iter().copied().fold(T::neg_infinity(), T::max);
        Ok(LimitSetEstimate { k: -1, window_start: self.raw.indices[start], lo, hi })
    }

    /// Tower for levels −1..=K of the chosen family.
    pub fn tower_of(&self, family: Family, window: f64) -> Result<IntervalTower<T>> {
        let hists = self.histories(family);
        if hists.is_empty() {
            return Err(Error::invalid("cascade family was not recorded"));
        }
        let mut intervals = vec![self.raw_limit_set(window)?];
        for h in hists {
            intervals.push(estimate_limit_set(h, window)?);
        }
        Ok(IntervalTower { intervals })
    }

    pub fn tower(&self, window: f64) -> Result<IntervalTower<T>> {
        self.tower_of(Family::Holder, window)
    }

    /// CSV with header `index,level,value`, rows ordered by index then level.
    pub fn write_history_csv<W: Write>(&self, family: Family, mut out: W) -> Result<()> {
        writeln!(out, "index,level,value")?;
        let hists = self.histories(family);
        if let Some(first) = hists.first() {
            for (i, &idx) in first.indices.iter().enumerate() {
                for h in hists {
                    writeln!(out, "{},{},{}", idx, h.level, h.values[i])?;
                }
            }
        }
        Ok(())
    }
}
