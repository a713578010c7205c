//! B1/B2 classification of divergent partial means.
//!
//! Finite-sample surrogates for the classification theorem: crossing ratios
//! over a grid of levels `γ`, the nondecreasing-hull fast path, and shrinkage
//! of the top interval of the tower. Every comparison made is recorded as
//! [`Evidence`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::means::{self, Analysis, AnalysisConfig, IntervalTower, LimitSetEstimate};
use crate::oscillation::{self, OscillationProfile, RatioStats};
use crate::scalar::Scalar;
use crate::stream::ObservableStream;

pub const MIN_CLASSIFY_TERMS: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Label {
    Convergent,
    B1,
    B2,
    Inconclusive,
}

/// One threshold comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evidence<T> {
    pub criterion: String,
    pub gamma: Option<T>,
    pub epsilon: Option<T>,
    pub statistic: T,
    pub threshold: T,
    pub fired: bool,
}

impl<T: Scalar> Evidence<T> {
    fn new(criterion: &str, statistic: T, threshold: T, fired: bool) -> Self {
        Self { criterion: criterion.to_owned(), gamma: None, epsilon: None, statistic, threshold, fired }
    }

    fn at(mut self, gamma: Option<T>, epsilon: Option<T>) -> Self {
        self.gamma = gamma;
        self.epsilon = epsilon;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict<T> {
    pub label: Label,
    pub tower: IntervalTower<T>,
    pub evidence: Vec<Evidence<T>>,
    pub notes: Vec<String>,
}

impl<T: Scalar> Verdict<T> {
    pub fn fired(&self, criterion: &str) -> bool {
        self.evidence.iter().any(|e| e.criterion == criterion && e.fired)
    }

    pub fn find(&self, criterion: &str) -> impl Iterator<Item = &Evidence<T>> + '_ {
        let criterion = criterion.to_owned();
        self.evidence.iter().filter(move |e| e.criterion == criterion)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct ClassifierConfig<T: Scalar> {
    /// Highest cascade order `K`.
    pub order: usize,
    /// Number of evenly spaced `γ` in `[α_0 + ε, β_0 − ε]`.
    pub gamma_grid: usize,
    /// Detection half-width; `None` means `epsilon_fraction · (β_0 − α_0)`.
    pub epsilon: Option<T>,
    pub epsilon_fraction: T,
    /// Multiples of `ε` tried by the growth criterion.
    pub epsilon_scales: Vec<T>,
    pub ratio_bound: T,
    pub growth_factor: T,
    pub window: f64,
    pub grid_gamma: f64,
    pub nest_slack: T,
    /// `δ_conv` as a fraction of the observable span.
    pub conv_fraction: T,
    /// `δ_point` as a fraction of `β_0 − α_0`.
    pub point_fraction: T,
    pub transient_cutoff: u64,
}

impl<T: Scalar> Default for ClassifierConfig<T> {
    fn default() -> Self {
        Self {
            order: 3,
            gamma_grid: 9,
            epsilon: None,
            epsilon_fraction: T::lit(0.05),
            epsilon_scales: vec![T::one(), T::lit(0.5), T::lit(0.25)],
            ratio_bound: T::lit(8.0),
            growth_factor: T::lit(10.0),
            window: means::DEFAULT_TAIL_WINDOW,
            grid_gamma: means::DEFAULT_GRID_GAMMA,
            nest_slack: T::lit(means::DEFAULT_NEST_SLACK),
            conv_fraction: T::lit(0.01),
            point_fraction: T::lit(0.02),
            transient_cutoff: oscillation::DEFAULT_TRANSIENT_CUTOFF,
        }
    }
}

impl<T: Scalar> ClassifierConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.order < 1 {
            return Err(Error::invalid("classifier order K must be at least 1"));
        }
        if self.gamma_grid < 3 {
            return Err(Error::invalid("gamma grid needs at least 3 points"));
        }
        if self.epsilon_scales.is_empty() || self.epsilon_scales.iter().any(|s| !(*s > T::zero())) {
            return Err(Error::invalid("epsilon scales must be positive and non-empty"));
        }
        if !(self.ratio_bound > T::one()) || !(self.growth_factor > T::one()) {
            return Err(Error::invalid("ratio bound and growth factor must exceed 1"));
        }
        if let Some(e) = self.epsilon {
            if !(e > T::zero()) {
                return Err(Error::invalid("epsilon must be positive"));
            }
        }
        Ok(())
    }

    fn epsilon_for(&self, width: T) -> T {
        self.epsilon.unwrap_or(self.epsilon_fraction * width)
    }

    /// `δ_conv` for a given observable span.
    pub fn delta_conv(&self, span: T) -> T {
        self.conv_fraction * span
    }
}

/// Result of the nondecreasing-hull test.
#[derive(Debug, Clone, PartialEq)]
pub struct Fastpath<T> {
    pub trigger: Evidence<T>,
    /// Levels `1..=K` against the level −1 hull, within `3·slack`; checks only.
    pub level_checks: Vec<Evidence<T>>,
}

/// Fires when the level 0 hull equals the level −1 hull within `slack`.
pub fn nondecreasing_fastpath<T: Scalar>(tower: &IntervalTower<T>, slack: T) -> Option<Fastpath<T>> {
    let raw = tower.level(-1)?;
    let base = tower.level(0)?;
    let dev = |e: &LimitSetEstimate<T>| (e.lo - raw.lo).abs().max((e.hi - raw.hi).abs());
    let d0 = dev(base);
    let trigger = Evidence::new("nondecreasing", d0, slack, d0 <= slack);
    let check = T::lit(3.0) * slack;
    let level_checks = tower
        .intervals
        .iter()
        .filter(|e| e.k >= 1)
        .map(|e| {
            let d = dev(e);
            Evidence::new(&format!("nondecreasing_level{}", e.k), d, check, d <= check)
        })
        .collect();
    Some(Fastpath { trigger, level_checks })
}

/// Bounded oscillation ratios: fires when the tail max of `t_{j+1}/t_j` is at most `d`.
/// Returns `None` when the profile has fewer than 4 tail ratios.
pub fn b1_sufficient<T: Scalar>(profile: &OscillationProfile<T>, d: T) -> Option<[Evidence<T>; 2]> {
    let stats = profile.stats();
    if stats.count - stats.count / 2 < 4 {
        return None;
    }
    let eps = Some(profile.epsilon);
    let fired = stats.max_tail <= d;
    Some([
        Evidence::new("cor_b1", stats.max_tail, d, fired).at(None, eps),
        // level-1 ratios stay below D² when this fires
        Evidence::new("cor_b1_level1_bound", d * d, d * d, fired).at(None, eps),
    ])
}

fn gamma_grid<T: Scalar>(lo: T, hi: T, count: usize) -> Vec<T> {
    let steps = T::from_count(count as u64 - 1);
    (0..count).map(|i| lo + (hi - lo) * T::from_count(i as u64) / steps).collect()
}

/// Runs the Hölder cascade over `stream` and classifies it.
pub fn classify<T: Scalar>(stream: ObservableStream, n_max: u64, config: &ClassifierConfig<T>) -> Result<Verdict<T>> {
    if n_max < MIN_CLASSIFY_TERMS {
        return Err(Error::insufficient(format!("classify needs n_max >= {MIN_CLASSIFY_TERMS}, got {n_max}")));
    }
    config.validate()?;
    let bound = stream.bound();
    let acfg = AnalysisConfig { order: config.order, grid_gamma: config.grid_gamma, cesaro: false };
    let analysis = means::analyze::<T, _>(stream, n_max, bound, &acfg)?;
    if analysis.n < MIN_CLASSIFY_TERMS {
        return Err(Error::insufficient(format!("stream ended after {} terms", analysis.n)));
    }
    classify_analysis(&analysis, config)
}

/// Classifies recorded Hölder histories.
pub fn classify_analysis<T: Scalar>(analysis: &Analysis<T>, config: &ClassifierConfig<T>) -> Result<Verdict<T>> {
    config.validate()?;
    let tower = analysis.tower(config.window)?;
    let mut evidence = Vec::new();
    let mut notes = Vec::new();

    let raw = *tower.level(-1).expect("tower has level -1");
    let base = *tower.level(0).expect("tower has level 0");
    let span = match analysis.bound {
        Some(m) => T::lit(2.0) * m,
        None => raw.width(),
    };
    let violations = tower.nesting_violations(config.nest_slack);
    evidence.push(Evidence::new("tower_nesting", T::from_count(violations.len() as u64), T::zero(), violations.is_empty()));
    if !violations.is_empty() {
        notes.push(format!("tower nesting violated at levels {violations:?}"));
    }

    let delta_conv = config.delta_conv(span);
    let width0 = base.width();
    let convergent = width0 < delta_conv || width0 == T::zero();
    evidence.push(Evidence::new("convergent", width0, delta_conv, convergent));
    if convergent {
        return Ok(Verdict { label: Label::Convergent, tower, evidence, notes });
    }

    let fast = nondecreasing_fastpath(&tower, config.nest_slack).expect("levels -1 and 0 present");
    let fast_fired = fast.trigger.fired;
    evidence.push(fast.trigger);
    if fast_fired {
        evidence.extend(fast.level_checks);
    }

    let top = *tower.top().expect("non-empty tower");
    let delta_point = config.point_fraction * width0;
    let shrink = top.width() < delta_point;
    evidence.push(Evidence::new(&format!("tower_shrink_level{}", top.k), top.width(), delta_point, shrink));

    let level0 = &analysis.holder[0];
    let eps = config.epsilon_for(width0);
    let mut all_bounded = true;
    let mut all_growing = true;
    if base.hi - eps <= base.lo + eps {
        return Err(Error::InvalidEpsilon { epsilon: eps.as_f64(), alpha0: base.lo.as_f64(), beta0: base.hi.as_f64() });
    }
    for gamma in gamma_grid(base.lo + eps, base.hi - eps, config.gamma_grid) {
        let mut growing = false;
        for (i, &scale) in config.epsilon_scales.iter().enumerate() {
            let e = eps * scale;
            let cross = oscillation::detect_crossings(level0, gamma, e)?;
            let stats = cross.stats();
            let enough = stats.count >= 4;
            if i == 0 {
                let bounded = enough && stats.max_tail <= config.ratio_bound;
                all_bounded &= bounded;
                evidence.push(Evidence::new("crossing_bounded", stats.max_tail, config.ratio_bound, bounded).at(Some(gamma), Some(e)));
            }
            let growth = stats.max_tail / stats.median;
            let grows = enough && growth > config.growth_factor;
            growing |= grows;
            evidence.push(Evidence::new("crossing_growth", growth, config.growth_factor, grows).at(Some(gamma), Some(e)));
        }
        all_growing &= growing;
    }

    let times = oscillation::detect_times(level0, base.lo, base.hi, eps);
    match &times {
        Ok(profile) => {
            match b1_sufficient(profile, config.ratio_bound) {
                Some(ev) => evidence.extend(ev),
                None => notes.push("too few oscillation times for the bounded-ratio corollary".into()),
            }
            let tail = profile.ratios_after(config.transient_cutoff);
            let observed = RatioStats::from_ratios(&tail).max_tail;
            if !tail.is_empty() && observed > T::one() {
                let bound = oscillation::contraction_bound(observed, raw.width())? + T::lit(0.02);
                evidence.push(Evidence::new("contraction", width0, bound, width0 <= bound).at(None, Some(eps)));
            }
            if let Ok(d) = oscillation::hardy_d_bound(raw.lo, raw.hi, base.lo, base.hi, eps) {
                let min_ratio = tail.iter().copied().fold(T::infinity(), T::min);
                if min_ratio.is_finite() {
                    let ok = min_ratio >= d - T::lit(1e-9);
                    evidence.push(Evidence::new("hardy_d", min_ratio, d, ok).at(None, Some(eps)));
                }
            }
        }
        Err(e) => notes.push(format!("oscillation times unavailable: {e}")),
    }

    let label = if fast_fired {
        Label::B2
    } else if shrink {
        Label::B1
    } else {
        match (all_bounded, all_growing) {
            (true, false) => Label::B1,
            (false, true) => Label::B2,
            (true, true) => {
                notes.push("bounded and growing crossing ratios both fired".into());
                Label::Inconclusive
            }
            (false, false) => {
                notes.push("neither crossing criterion held for every gamma".into());
                Label::Inconclusive
            }
        }
    };

    if label == Label::B2 {
        match &times {
            Ok(profile) => evidence.extend(b2_consistency(analysis, profile, config.ratio_bound)),
            Err(_) => notes.push("no oscillation times for the level-k extremal check".into()),
        }
    }
    Ok(Verdict { label, tower, evidence, notes })
}

/// Tail max of level-`k` extremal-time ratios for `k ≤ 2`, each compared against `d`.
fn b2_consistency<T: Scalar>(analysis: &Analysis<T>, level0: &OscillationProfile<T>, d: T) -> Vec<Evidence<T>> {
    let mut out = Vec::new();
    let mut profile = level0.clone();
    for k in 0..=2usize.min(analysis.order()) {
        if k > 0 {
            profile = oscillation::extremal_profile(&profile, &analysis.holder[k]);
        }
        if profile.ratios.is_empty() {
            break;
        }
        let stat = profile.stats().max_tail;
        out.push(Evidence::new(&format!("lemma_b2_level{k}"), stat, d, stat > d).at(None, Some(level0.epsilon)));
    }
    out
}

/// Residence-end sample of an event-driven average.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EventPoint<T> {
    /// Natural log of the event time.
    pub log_time: T,
    pub average: T,
}

/// Classifies averages observed only at event times.
///
/// Level −1 is the hull `raw` of the observable over the tail, level 0 the hull
/// of the tail half of `points`; the ratio test uses successive event times.
pub fn classify_events<T: Scalar>(points: &[EventPoint<T>], raw: (T, T), config: &ClassifierConfig<T>) -> Result<Verdict<T>> {
    config.validate()?;
    let start = points.len() / 2;
    let tail = &points[start..];
    if tail.len() < 2 {
        return Err(Error::insufficient(format!("event classification needs at least 2 tail events, got {}", tail.len())));
    }
    let lo = tail.iter().map(|p| p.average).fold(T::infinity(), T::min);
    let hi = tail.iter().map(|p| p.average).fold(T::neg_infinity(), T::max);
    let raw_est = LimitSetEstimate { k: -1, window_start: start as u64 + 1, lo: raw.0, hi: raw.1 };
    let base = LimitSetEstimate { k: 0, window_start: start as u64 + 1, lo, hi };
    let tower = IntervalTower { intervals: vec![raw_est, base] };
    let mut evidence = Vec::new();
    let mut notes = Vec::new();

    let nested = tower.is_nested(config.nest_slack);
    evidence.push(Evidence::new("tower_nesting", T::from_count(u64::from(!nested)), T::zero(), nested));
    let delta_conv = config.delta_conv(raw_est.width());
    let width0 = base.width();
    let convergent = width0 < delta_conv || width0 == T::zero();
    evidence.push(Evidence::new("convergent", width0, delta_conv, convergent));
    if convergent {
        return Ok(Verdict { label: Label::Convergent, tower, evidence, notes });
    }
    let fast = nondecreasing_fastpath(&tower, config.nest_slack).expect("two-level tower");
    let fast_fired = fast.trigger.fired;
    evidence.push(fast.trigger);

    let ratios: Vec<T> = tail.windows(2).map(|w| (w[1].log_time - w[0].log_time).exp().min(T::max_value())).collect();
    let max_ratio = ratios.iter().copied().fold(T::one(), T::max);
    let bounded = !ratios.is_empty() && max_ratio <= config.ratio_bound;
    evidence.push(Evidence::new("event_ratio_bounded", max_ratio, config.ratio_bound, bounded));
    let growth_threshold = config.growth_factor * config.ratio_bound;
    let grows = max_ratio > growth_threshold;
    evidence.push(Evidence::new("event_ratio_growth", max_ratio, growth_threshold, grows));

    let label = if fast_fired {
        Label::B2
    } else {
        match (bounded, grows) {
            (true, false) => Label::B1,
            (false, true) => Label::B2,
            _ => {
                notes.push("event-time ratios neither bounded nor growing".into());
                Label::Inconclusive
            }
        }
    };
    Ok(Verdict { label, tower, evidence, notes })
}
