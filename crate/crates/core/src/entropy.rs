//! Exact cylinder counts for alternating block-average constraints on a full shift.
//!
//! Words are cut into blocks of lengths `n_1 = N`, `n_i = i·Σ_{j<i} n_j`.
//! A word of length `n` is counted when every completed block has empirical
//! mean within `ε` of its target (odd blocks `α_1`, even blocks `α_2`) and the
//! block it ends in can still be completed within tolerance.

use std::io::Write;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::stream::ObservableStream;

/// Upper limit on `block_length · value_span` for the sum-state tables.
pub const MAX_DP_STATES: u64 = 1_000_000;
/// Brute-force enumeration refuses words longer than this.
pub const MAX_BRUTE_LENGTH: usize = 24;

const BOUNDARY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintSchedule {
    /// First block length `N`.
    pub initial_length: u64,
    /// Targets `(α_1, α_2)` for odd and even blocks.
    pub targets: (f64, f64),
    pub epsilon: f64,
    #[serde(default = "default_alphabet")]
    pub alphabet_size: usize,
    /// Integer observable value of each symbol `0..m`; defaults to the symbol itself.
    #[serde(default)]
    pub observable: Option<Vec<i64>>,
}

fn default_alphabet() -> usize {
    2
}

impl ConstraintSchedule {
    pub fn new(initial_length: u64, alpha1: f64, alpha2: f64, epsilon: f64) -> Result<Self> {
        let s = Self { initial_length, targets: (alpha1, alpha2), epsilon, alphabet_size: 2, observable: None };
        s.validate()?;
        Ok(s)
    }

    /// Every word allowed: a single target with `ε` covering the whole value range.
    pub fn unconstrained(initial_length: u64) -> Self {
        Self { initial_length, targets: (0.5, 0.5), epsilon: 1.0, alphabet_size: 2, observable: None }
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let s: Self = serde_json::from_str(json)?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.initial_length < 1 {
            return Err(Error::invalid("initial block length must be at least 1"));
        }
        if self.alphabet_size < 1 {
            return Err(Error::invalid("alphabet size must be at least 1"));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::invalid(format!("epsilon must be positive and finite, got {}", self.epsilon)));
        }
        if !(self.targets.0.is_finite() && self.targets.1.is_finite()) {
            return Err(Error::invalid("targets must be finite"));
        }
        if let Some(obs) = &self.observable {
            if obs.len() != self.alphabet_size {
                return Err(Error::invalid(format!("observable has {} values for {} symbols", obs.len(), self.alphabet_size)));
            }
        }
        Ok(())
    }

    /// `0 < ε < (α_2 − α_1)/4`.
    pub fn is_separated(&self) -> bool {
        self.epsilon < (self.targets.1 - self.targets.0) / 4.0
    }

    pub fn values(&self) -> Vec<i64> {
        self.observable.clone().unwrap_or_else(|| (0..self.alphabet_size as i64).collect())
    }

    /// `(start, length)` of every block meeting `[0, n)`.
    pub fn blocks_until(&self, n: u64) -> Result<Vec<(u64, u64)>> {
        let mut out = Vec::new();
        let (mut start, mut i, mut len) = (0u64, 1u64, self.initial_length);
        while start < n {
            out.push((start, len));
            start = start.checked_add(len).ok_or_else(|| Error::Overflow("block start exceeds u64".into()))?;
            i += 1;
            len = i.checked_mul(start).ok_or_else(|| Error::Overflow(format!("block {i} length exceeds u64")))?;
        }
        Ok(out)
    }

    /// Block `i` (1-based) target.
    pub fn target(&self, i: usize) -> f64 {
        if i % 2 == 1 {
            self.targets.0
        } else {
            self.targets.1
        }
    }

    /// Inclusive integer range of allowed block sums.
    pub fn allowed_sums(&self, i: usize, len: u64) -> (i64, i64) {
        let l = len as f64;
        let a = self.target(i);
        let lo = (l * (a - self.epsilon) - BOUNDARY_TOL).ceil();
        let hi = (l * (a + self.epsilon) + BOUNDARY_TOL).floor();
        (lo as i64, hi as i64)
    }
}

/// Exact count `M_n` of admissible words of length `n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CylinderCount {
    pub n: u64,
    #[serde(serialize_with = "decimal")]
    pub count: BigUint,
    pub log_count: f64,
    pub rate: f64,
}

fn decimal<S: Serializer>(v: &BigUint, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_str_radix(10))
}

impl CylinderCount {
    fn new(n: u64, count: BigUint) -> Self {
        let log_count = ln_big(&count);
        Self { n, log_count, rate: log_count / n as f64, count }
    }
}

/// Natural log of a big integer (`−∞` for zero).
pub fn ln_big(x: &BigUint) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().expect("fits in f64").ln();
    }
    let shift = bits - 64;
    (x >> shift).to_f64().expect("64-bit value").ln() + shift as f64 * std::f64::consts::LN_2
}

/// Upper limit on the cells of a general completion table.
const MAX_REACH_CELLS: u64 = 50_000_000;

/// Sums reachable by appending `r` symbols.
enum Reach {
    /// Values form a contiguous integer range: every sum in `[r·min, r·max]`.
    Interval { min: i64, max: i64 },
    /// `sets[r][x]`: `r·min + x` is reachable.
    Table { min: i64, span: u64, sets: Vec<Vec<bool>> },
}

impl Reach {
    fn new(values: &[i64], max_r: u64) -> Result<Self> {
        let mut distinct = values.to_vec();
        distinct.sort_unstable();
        distinct.dedup();
        let min = distinct[0];
        let max = *distinct.last().expect("non-empty alphabet");
        if distinct.windows(2).all(|w| w[1] - w[0] == 1) {
            return Ok(Reach::Interval { min, max });
        }
        let span = (max - min) as u64;
        let cells = max_r.saturating_mul(max_r).saturating_mul(span) / 2;
        if cells > MAX_REACH_CELLS {
            return Err(Error::Infeasible(format!(
                "completion table needs {cells} cells (limit {MAX_REACH_CELLS}); use a smaller n or a coarser schedule"
            )));
        }
        let offsets: Vec<usize> = distinct.iter().map(|&v| (v - min) as usize).collect();
        let mut sets = vec![vec![true]];
        for r in 1..=max_r as usize {
            let prev = &sets[r - 1];
            let mut next = vec![false; r * span as usize + 1];
            for (x, _) in prev.iter().enumerate().filter(|(_, &b)| b) {
                for &o in &offsets {
                    next[x + o] = true;
                }
            }
            sets.push(next);
        }
        Ok(Reach::Table { min, span, sets })
    }

    /// Can `r` more symbols move `sum` into `[lo, hi]`?
    fn completable(&self, r: u64, sum: i64, lo: i64, hi: i64) -> bool {
        let r_i = r as i64;
        match self {
            Reach::Interval { min, max } => lo <= hi && sum + r_i * min <= hi && sum + r_i * max >= lo,
            Reach::Table { min, span, sets } => {
                let base = sum + r_i * min;
                let from = (lo - base).max(0);
                let to = (hi - base).min(r_i * *span as i64);
                (from..=to).any(|x| sets[r as usize][x as usize])
            }
        }
    }
}

/// Counts for `n = 1..=n_max`.
pub fn growth_rates(schedule: &ConstraintSchedule, n_max: u64) -> Result<Vec<CylinderCount>> {
    schedule.validate()?;
    if n_max < 1 {
        return Err(Error::invalid("n must be at least 1"));
    }
    let values = schedule.values();
    let vmin = *values.iter().min().expect("non-empty alphabet");
    let span = (*values.iter().max().expect("non-empty alphabet") - vmin) as u64;
    let blocks = schedule.blocks_until(n_max)?;
    let widest = blocks.iter().map(|&(s, l)| l.min(n_max - s)).max().unwrap_or(1);
    if widest.saturating_mul(span.max(1)) > MAX_DP_STATES {
        return Err(Error::Infeasible(format!(
            "sum table for n = {n_max} needs {} states (limit {MAX_DP_STATES}); use a smaller n or a coarser schedule",
            widest.saturating_mul(span.max(1))
        )));
    }
    let max_r = blocks.iter().map(|&(_, l)| l - 1).max().unwrap_or(0);
    let reach = Reach::new(&values, max_r)?;
    let mut out = Vec::with_capacity(n_max as usize);
    let mut carry = BigUint::one();
    for (bi, &(start, len)) in blocks.iter().enumerate() {
        let (lo, hi) = schedule.allowed_sums(bi + 1, len);
        // states[x]: words whose current block sum is `w·vmin + x`
        let mut states = vec![std::mem::take(&mut carry)];
        let steps = len.min(n_max - start);
        for w in 1..=steps {
            let mut next = vec![BigUint::zero(); states.len() + span as usize];
            for (x, c) in states.iter().enumerate().filter(|(_, c)| !c.is_zero()) {
                for &v in &values {
                    next[x + (v - vmin) as usize] += c;
                }
            }
            states = next;
            let base = w as i64 * vmin;
            let r = len - w;
            let count = states
                .iter()
                .enumerate()
                .filter(|(x, c)| {
                    let sum = base + *x as i64;
                    !c.is_zero() && if r == 0 { (lo..=hi).contains(&sum) } else { reach.completable(r, sum, lo, hi) }
                })
                .fold(BigUint::zero(), |a, (_, c)| a + c);
            out.push(CylinderCount::new(start + w, count));
        }
        if steps < len {
            break;
        }
        carry = out.last().expect("block has at least one symbol").count.clone();
    }
    Ok(out)
}

/// Exact `M_n` by dynamic programming.
pub fn count_cylinders(schedule: &ConstraintSchedule, n: u64) -> Result<CylinderCount> {
    Ok(growth_rates(schedule, n)?.pop().expect("n >= 1"))
}

/// Growth rates alongside `ln m` and the Bernoulli entropies of the targets.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthReport {
    pub schedule: ConstraintSchedule,
    pub log_m: f64,
    /// `h(α_1)`, `h(α_2)` when the observable is `{0, 1}`.
    pub target_entropies: Option<(f64, f64)>,
    pub counts: Vec<CylinderCount>,
}

impl GrowthReport {
    /// CSV with header `n,count,log_count,rate`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "n,count,log_count,rate")?;
        for c in &self.counts {
            writeln!(out, "{},{},{},{}", c.n, c.count, c.log_count, c.rate)?;
        }
        Ok(())
    }

    pub fn final_rate(&self) -> f64 {
        self.counts.last().map_or(f64::NAN, |c| c.rate)
    }
}

pub fn growth_rate_report(schedule: &ConstraintSchedule, n_max: u64) -> Result<GrowthReport> {
    let counts = growth_rates(schedule, n_max)?;
    let binary = schedule.values() == [0, 1];
    let target_entropies = if binary {
        let (a1, a2) = schedule.targets;
        match (bernoulli_entropy(a1), bernoulli_entropy(a2)) {
            (Ok(h1), Ok(h2)) => Some((h1, h2)),
            _ => None,
        }
    } else {
        None
    };
    Ok(GrowthReport { schedule: schedule.clone(), log_m: (schedule.alphabet_size as f64).ln(), target_entropies, counts })
}

/// Brute-force `M_n` over all `m^n` words.
pub fn enumerate_cylinders(schedule: &ConstraintSchedule, n: usize) -> Result<BigUint> {
    schedule.validate()?;
    if !(1..=MAX_BRUTE_LENGTH).contains(&n) {
        return Err(Error::invalid(format!("brute-force length must be in 1..={MAX_BRUTE_LENGTH}, got {n}")));
    }
    let values = schedule.values();
    let m = values.len();
    let blocks = schedule.blocks_until(n as u64)?;
    let (last_start, last_len) = *blocks.last().expect("n >= 1");
    let remaining = last_len - (n as u64 - last_start).min(last_len);
    let reach = Reach::new(&values, remaining)?;
    let total = (m as u64).checked_pow(n as u32).ok_or_else(|| Error::Overflow("m^n exceeds u64".into()))?;
    let mut word = vec![0usize; n];
    let mut count = 0u64;
    for code in 0..total {
        let mut c = code;
        for slot in word.iter_mut() {
            *slot = (c % m as u64) as usize;
            c /= m as u64;
        }
        let ok = blocks.iter().enumerate().all(|(bi, &(start, len))| {
            let end = (start + len).min(n as u64);
            let sum: i64 = word[start as usize..end as usize].iter().map(|&s| values[s]).sum();
            let (lo, hi) = schedule.allowed_sums(bi + 1, len);
            if end - start == len {
                (lo..=hi).contains(&sum)
            } else {
                reach.completable(len - (end - start), sum, lo, hi)
            }
        });
        count += u64::from(ok);
    }
    Ok(BigUint::from(count))
}

/// `−p ln p − (1−p) ln(1−p)` with `0 ln 0 = 0`.
pub fn bernoulli_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!("probability must lie in [0, 1], got {p}")));
    }
    let term = |x: f64| if x > 0.0 { -x * x.ln() } else { 0.0 };
    Ok(term(p) + term(1.0 - p))
}

/// I.i.d. `±1` stream with `P(+1) = p`, seeded for reproducibility.
pub fn bernoulli_stream(p: f64, seed: u64) -> Result<ObservableStream> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!("probability must lie in [0, 1], got {p}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let iter = std::iter::from_fn(move || Some(if rng.gen_bool(p) { 1.0 } else { -1.0 }));
    Ok(ObservableStream::from_iter_ok(iter, Some(1.0)))
}
