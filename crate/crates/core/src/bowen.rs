//! Return-map simulation of heteroclinic cycles.
//!
//! Residence times near the two equilibria come from closed-form solutions of
//! the local flows, so no ODE is integrated. The hyperbolic cycle has
//! `T_j = C ρ^j`; the cubic (non-hyperbolic) variant has super-exponentially
//! growing times and switches to log storage once they leave double range.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::classify::{self, ClassifierConfig, EventPoint, Verdict};
use crate::error::{Error, Result};
use crate::scalar::KahanSum;
use crate::stream::ObservableStream;

/// Residence times above this are followed by log-stored successors.
pub const LOG_SWITCH: f64 = 30.0;
/// Largest log-duration whose exponential is still evaluated.
pub const MAX_LOG_DURATION: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Hyperbolic,
    Nonhyperbolic,
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hyperbolic" => Ok(Variant::Hyperbolic),
            "nonhyperbolic" | "non-hyperbolic" => Ok(Variant::Nonhyperbolic),
            other => Err(Error::invalid(format!("unknown cycle variant '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CycleParams {
    pub lambda: f64,
    pub mu: f64,
    pub x0: f64,
    pub d_nbhd: f64,
    pub alpha_glob: f64,
    pub tau_transit: f64,
    pub phi1: f64,
    pub phi2: f64,
    /// `None` means `(phi1 + phi2) / 2`.
    pub phi_transit: Option<f64>,
}

impl CycleParams {
    pub fn defaults(variant: Variant) -> Self {
        let x0 = match variant {
            Variant::Hyperbolic => (-1.0f64).exp(),
            Variant::Nonhyperbolic => 0.5,
        };
        Self { lambda: 2.0, mu: 1.0, x0, d_nbhd: 1.0, alpha_glob: 1.0, tau_transit: 1.0, phi1: 0.0, phi2: 1.0, phi_transit: None }
    }

    /// Variant defaults overlaid with the keys of a JSON object.
    pub fn from_json(variant: Variant, json: &str) -> Result<Self> {
        let overrides: serde_json::Map<String, serde_json::Value> = serde_json::from_str(json)?;
        let mut merged = match serde_json::to_value(Self::defaults(variant))? {
            serde_json::Value::Object(m) => m,
            _ => unreachable!("struct serializes to an object"),
        };
        merged.extend(overrides);
        Ok(serde_json::from_value(serde_json::Value::Object(merged))?)
    }

    pub fn rho(&self) -> f64 {
        self.lambda / self.mu
    }

    pub fn transit_value(&self) -> f64 {
        self.phi_transit.unwrap_or((self.phi1 + self.phi2) / 2.0)
    }

    fn check_common(&self) -> Result<()> {
        for (name, v) in [("phi1", self.phi1), ("phi2", self.phi2), ("phi_transit", self.transit_value())] {
            if !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be finite")));
            }
        }
        if !(self.tau_transit >= 0.0 && self.tau_transit.is_finite()) {
            return Err(Error::invalid("tau_transit must be finite and non-negative"));
        }
        Ok(())
    }
}

/// A residence or transit duration, stored as its natural log once it may overflow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum Duration {
    Linear(f64),
    Log(f64),
}

impl Duration {
    pub fn ln(self) -> f64 {
        match self {
            Duration::Linear(t) => t.ln(),
            Duration::Log(l) => l,
        }
    }

    pub fn linear(self) -> Option<f64> {
        match self {
            Duration::Linear(t) => Some(t),
            Duration::Log(_) => None,
        }
    }

    pub fn is_log(self) -> bool {
        matches!(self, Duration::Log(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentTag {
    Residence1,
    Residence2,
    Transit,
}

impl SegmentTag {
    pub fn as_str(self) -> &'static str {
        match self {
            SegmentTag::Residence1 => "residence1",
            SegmentTag::Residence2 => "residence2",
            SegmentTag::Transit => "transit",
        }
    }

    fn residence(j: usize) -> Self {
        if j % 2 == 1 {
            SegmentTag::Residence1
        } else {
            SegmentTag::Residence2
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Segment {
    /// Residence index (transits carry the index of the preceding residence).
    pub j: usize,
    pub tag: SegmentTag,
    pub duration: Duration,
    pub value: f64,
    /// `ln x_j` at entry (residences only).
    pub log_entry: Option<f64>,
    /// `ln y_j` at exit (residences only).
    pub log_exit: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentSeries {
    pub segments: Vec<Segment>,
    /// Set when the recursion stopped before `J` residences.
    pub truncated: bool,
}

impl SegmentSeries {
    pub fn residences(&self) -> impl Iterator<Item = &Segment> + '_ {
        self.segments.iter().filter(|s| s.tag != SegmentTag::Transit)
    }

    pub fn residence_count(&self) -> usize {
        self.residences().count()
    }

    /// `ln T_j` for each residence.
    pub fn log_residence_times(&self) -> Vec<f64> {
        self.residences().map(|s| s.duration.ln()).collect()
    }

    /// `T_{j+1}/T_j` (may be infinite once durations are log-stored).
    pub fn residence_ratios(&self) -> Vec<f64> {
        let durations: Vec<Duration> = self.residences().map(|s| s.duration).collect();
        durations
            .windows(2)
            .map(|w| match (w[0], w[1]) {
                (Duration::Linear(a), Duration::Linear(b)) => b / a,
                (a, b) => (b.ln() - a.ln()).exp(),
            })
            .collect()
    }

    pub fn value_hull(&self) -> (f64, f64) {
        self.segments.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s.value), hi.max(s.value)))
    }

    /// CSV with header `j,tag,duration_or_logduration,is_log,value`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "j,tag,duration_or_logduration,is_log,value")?;
        for s in &self.segments {
            let (d, is_log) = match s.duration {
                Duration::Linear(t) => (t, false),
                Duration::Log(l) => (l, true),
            };
            writeln!(out, "{},{},{},{},{}", s.j, s.tag.as_str(), d, is_log, s.value)?;
        }
        Ok(())
    }
}

struct Builder<'a> {
    params: &'a CycleParams,
    segments: Vec<Segment>,
}

impl Builder<'_> {
    fn residence(&mut self, j: usize, duration: Duration, log_entry: f64, log_exit: f64) {
        let log_exit = Some(log_exit).filter(|v| v.is_finite());
        let value = if j % 2 == 1 { self.params.phi1 } else { self.params.phi2 };
        self.segments.push(Segment { j, tag: SegmentTag::residence(j), duration, value, log_entry: Some(log_entry), log_exit });
        if self.params.tau_transit > 0.0 {
            self.segments.push(Segment {
                j,
                tag: SegmentTag::Transit,
                duration: Duration::Linear(self.params.tau_transit),
                value: self.params.transit_value(),
                log_entry: None,
                log_exit: None,
            });
        }
    }
}

/// Hyperbolic cycle: `T_j = C ρ^j` with `C = ln(1/x_0)/μ`, exit `y_j = x_j^ρ`.
pub fn hyperbolic_times(params: &CycleParams, j_max: usize) -> Result<SegmentSeries> {
    params.check_common()?;
    if j_max < 1 {
        return Err(Error::invalid("J must be at least 1"));
    }
    if !(params.lambda > 0.0 && params.mu > 0.0) {
        return Err(Error::invalid("lambda and mu must be positive"));
    }
    let rho = params.rho();
    if !(rho > 1.0) {
        return Err(Error::invalid(format!("rho = lambda/mu must exceed 1, got {rho}")));
    }
    if !(params.x0 > 0.0 && params.x0 < 1.0) {
        return Err(Error::invalid(format!("x0 must lie in (0, 1), got {}", params.x0)));
    }
    let c = (1.0 / params.x0).ln() / params.mu;
    let mut b = Builder { params, segments: Vec::with_capacity(2 * j_max) };
    for j in 1..=j_max {
        let t = c * rho.powi(j as i32);
        let duration = if t.is_finite() { Duration::Linear(t) } else { Duration::Log(c.ln() + j as f64 * rho.ln()) };
        let log_entry = -params.mu * t;
        b.residence(j, duration, log_entry, rho * log_entry);
    }
    Ok(SegmentSeries { segments: b.segments, truncated: false })
}

/// Cubic cycle: `T_j = ½(x_j^{−2} − d^{−2})`, `x_{j+1} = α d e^{−T_j}`.
pub fn nonhyperbolic_times(params: &CycleParams, j_max: usize) -> Result<SegmentSeries> {
    params.check_common()?;
    if j_max < 1 {
        return Err(Error::invalid("J must be at least 1"));
    }
    let (d, alpha) = (params.d_nbhd, params.alpha_glob);
    if !(d > 0.0 && d <= 1.0) {
        return Err(Error::invalid(format!("d must lie in (0, 1], got {d}")));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::invalid(format!("alpha must be positive, got {alpha}")));
    }
    if !(params.x0 > 0.0 && params.x0 < d) {
        return Err(Error::invalid(format!("x0 must lie in (0, d), got {}", params.x0)));
    }
    let mut b = Builder { params, segments: Vec::with_capacity(2 * j_max) };
    let mut log_x = params.x0.ln();
    let mut t = 0.5 * (params.x0.powi(-2) - d.powi(-2));
    let mut log_mode = false;
    let ln_2a2d2 = (2.0 * alpha * alpha * d * d).ln();
    for j in 1..=j_max {
        let (duration, t_lin) = if log_mode { (Duration::Log(t), None) } else { (Duration::Linear(t), Some(t)) };
        // y_j = d e^{-T_j}
        let t_now = t_lin.unwrap_or_else(|| t.exp());
        b.residence(j, duration, log_x, d.ln() - t_now);
        if j == j_max {
            break;
        }
        if log_mode && t > MAX_LOG_DURATION {
            return Ok(SegmentSeries { segments: b.segments, truncated: true });
        }
        if alpha * (-t_now).exp() >= 1.0 {
            return Err(Error::invalid(format!("orbit does not re-enter: alpha * exp(-T_{j}) >= 1")));
        }
        log_x = (alpha * d).ln() - t_now;
        if t_now > LOG_SWITCH {
            // ln T_{j+1} = 2T_j − ln(2α²d²) + ln(1 − α² e^{−2T_j})
            t = 2.0 * t_now - ln_2a2d2 + (-(alpha * alpha) * (-2.0 * t_now).exp()).ln_1p();
            log_mode = true;
        } else {
            t = 0.5 * ((-2.0 * log_x).exp() - d.powi(-2));
        }
    }
    Ok(SegmentSeries { segments: b.segments, truncated: false })
}

pub fn simulate(variant: Variant, params: &CycleParams, j_max: usize) -> Result<SegmentSeries> {
    match variant {
        Variant::Hyperbolic => hyperbolic_times(params, j_max),
        Variant::Nonhyperbolic => nonhyperbolic_times(params, j_max),
    }
}

/// Running time average at the end of a segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowEvent {
    /// Index into the series.
    pub segment: usize,
    pub j: usize,
    pub tag: SegmentTag,
    pub log_time: f64,
    /// Elapsed time, when representable.
    pub time: Option<f64>,
    pub average: f64,
}

/// Exact running averages `Σ T·φ / Σ T` at every segment end.
pub fn flow_average_at_events(series: &SegmentSeries) -> Result<Vec<FlowEvent>> {
    if series.segments.is_empty() {
        return Err(Error::invalid("empty segment series"));
    }
    let mut out = Vec::with_capacity(series.segments.len());
    let mut total = KahanSum::<f64>::new();
    let mut weighted = KahanSum::<f64>::new();
    // (ln elapsed, average) once a log-stored duration appears
    let mut log_state: Option<(f64, f64)> = None;
    for (i, s) in series.segments.iter().enumerate() {
        if log_state.is_none() {
            if let Duration::Linear(t) = s.duration {
                total.add(t);
                weighted.add(t * s.value);
                let elapsed = total.value();
                out.push(FlowEvent {
                    segment: i,
                    j: s.j,
                    tag: s.tag,
                    log_time: elapsed.ln(),
                    time: Some(elapsed),
                    average: weighted.value() / elapsed,
                });
                continue;
            }
            log_state = Some((total.value().ln(), weighted.value() / total.value()));
        }
        let (log_total, avg) = log_state.expect("log state initialised");
        let log_d = s.duration.ln();
        let m = log_total.max(log_d);
        let new_log = m + ((log_total - m).exp() + (log_d - m).exp()).ln();
        let avg = if avg.is_finite() { avg * (log_total - new_log).exp() + s.value * (log_d - new_log).exp() } else { s.value };
        log_state = Some((new_log, avg));
        let time = Some(new_log.exp()).filter(|t| t.is_finite());
        out.push(FlowEvent { segment: i, j: s.j, tag: s.tag, log_time: new_log, time, average: avg });
    }
    Ok(out)
}

/// Averages at residence ends only.
pub fn residence_end_events(series: &SegmentSeries) -> Result<Vec<FlowEvent>> {
    Ok(flow_average_at_events(series)?.into_iter().filter(|e| e.tag != SegmentTag::Transit).collect())
}

/// Discretises the flow with a uniform time quantum `q = max_duration / samples_per_segment`.
///
/// Segment `m` contributes `round(t_m/q) − round(t_{m−1}/q)` copies of its value,
/// where `t_m` is the elapsed time at its end.
pub fn sample_flow(series: &SegmentSeries, samples_per_segment: u64) -> Result<ObservableStream> {
    if samples_per_segment < 1 {
        return Err(Error::invalid("samples_per_segment must be at least 1"));
    }
    if let Some(s) = series.segments.iter().find(|s| s.duration.is_log()) {
        return Err(Error::invalid(format!("segment {} has a log-stored duration; sample_flow cannot discretise it", s.j)));
    }
    let counts = sample_counts(series, samples_per_segment)?;
    let values: Vec<f64> = series.segments.iter().map(|s| s.value).collect();
    let bound = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let iter = counts.into_iter().zip(values).flat_map(|(c, v)| std::iter::repeat_n(v, c as usize));
    Ok(ObservableStream::from_iter_ok(iter, Some(bound)))
}

/// Number of samples per segment used by [`sample_flow`].
pub fn sample_counts(series: &SegmentSeries, samples_per_segment: u64) -> Result<Vec<u64>> {
    let durations: Vec<f64> =
        series.segments.iter().map(|s| s.duration.linear().ok_or_else(|| Error::invalid("log-stored duration"))).collect::<Result<_>>()?;
    let max = durations.iter().copied().fold(0.0f64, f64::max);
    let q = max / samples_per_segment as f64;
    let mut elapsed = KahanSum::<f64>::new();
    let mut prev = 0u64;
    let mut counts = Vec::with_capacity(durations.len());
    for d in durations {
        elapsed.add(d);
        let cum = (elapsed.value() / q).round();
        if cum > u64::MAX as f64 / 2.0 {
            return Err(Error::Overflow("sample count exceeds u64".into()));
        }
        let cum = cum as u64;
        counts.push(cum - prev);
        prev = cum;
    }
    Ok(counts)
}

/// Classifies from residence-end averages (works for log-stored series).
pub fn classify_segments(series: &SegmentSeries, config: &ClassifierConfig<f64>) -> Result<Verdict<f64>> {
    let events = residence_end_events(series)?;
    let start = events.len() / 2;
    let first_tail = events.get(start).map(|e| e.segment).unwrap_or(0);
    let raw =
        series.segments[first_tail..].iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s.value), hi.max(s.value)));
    let points: Vec<EventPoint<f64>> = events.iter().map(|e| EventPoint { log_time: e.log_time, average: e.average }).collect();
    classify::classify_events(&points, raw, config)
}
