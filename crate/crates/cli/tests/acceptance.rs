//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;
use std::time::Instant;

use birkhoff::bowen::{self, CycleParams, Variant};
use birkhoff::classify::{classify, classify_analysis, Label};
use birkhoff::entropy::{count_cylinders, enumerate_cylinders, growth_rates, ConstraintSchedule};
use birkhoff::means::{analyze, Analysis, AnalysisConfig, CesaroCascade, Family, IntervalTower, MeanCascade};
use birkhoff::oscillation::{contraction_bound, detect_crossings, detect_times, hardy_d_bound};
use birkhoff::sequences::{example3_stream, SequenceSpec};
use birkhoff::ClassifierConfig64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LN2: f64 = std::f64::consts::LN_2;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

struct Example1 {
    analysis: Analysis<f64>,
    holder: IntervalTower<f64>,
    cesaro: IntervalTower<f64>,
    seconds: f64,
}

fn example1() -> &'static Example1 {
    static CELL: OnceLock<Example1> = OnceLock::new();
    CELL.get_or_init(|| {
        let start = Instant::now();
        let analysis = analyze::<f64, _>(SequenceSpec::example1().stream(), 1 << 24, Some(1.0), &AnalysisConfig::default()).unwrap();
        let seconds = start.elapsed().as_secs_f64();
        let holder = analysis.tower_of(Family::Holder, 0.5).unwrap();
        let cesaro = analysis.tower_of(Family::Cesaro, 0.5).unwrap();
        Example1 { analysis, holder, cesaro, seconds }
    })
}

fn level0(t: &IntervalTower<f64>) -> (f64, f64) {
    let e = t.level(0).unwrap();
    (e.lo, e.hi)
}

fn c1_limit_set() -> Outcome {
    let ex = example1();
    let (lo, hi) = level0(&ex.holder);
    let ok = (lo - 1.0 / 3.0).abs() <= 0.02 && (hi - 2.0 / 3.0).abs() <= 0.02 && ex.seconds < 30.0;
    outcome(ok, format!("level 0 = [{lo:.5}, {hi:.5}], target [1/3, 2/3] +/- 0.02; analysis took {:.2} s (< 30 s)", ex.seconds))
}

fn c2_ratios() -> Outcome {
    let ex = example1();
    let profile = detect_times(&ex.analysis.holder[0], 1.0 / 3.0, 2.0 / 3.0, 0.05).unwrap();
    let d = hardy_d_bound(0.0, 1.0, 1.0 / 3.0, 2.0 / 3.0, 0.05).unwrap();
    let tail: Vec<f64> = profile.times.iter().zip(&profile.ratios).filter(|(o, _)| o.t >= 1000).map(|(_, &r)| r).collect();
    let (tmin, tmax) = tail.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &r| (a.min(r), b.max(r)));
    let all_min = profile.ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let ok = !tail.is_empty() && tmin >= 1.9 && tmax <= 2.1 && all_min >= d - 1e-9;
    outcome(
        ok,
        format!(
            "{} tail ratios in [{tmin:.4}, {tmax:.4}] (need [1.9, 2.1]); min of all {} ratios {all_min:.4} >= d = {d:.4}",
            tail.len(),
            profile.ratios.len()
        ),
    )
}

fn c3_contraction() -> Outcome {
    let (lo, hi) = level0(&example1().holder);
    let width = hi - lo;
    let bound = contraction_bound(2.0, 1.0).unwrap();
    let ok = (width - 1.0 / 3.0).abs() <= 0.02 && (width - bound).abs() <= 0.02;
    outcome(ok, format!("level 0 width {width:.5}, contraction_bound(2, 1) = {bound:.5}"))
}

fn c4_hardy_propagation() -> Outcome {
    let ex = example1();
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, tower) in [("holder", &ex.holder), ("cesaro", &ex.cesaro)] {
        for k in 1..=3 {
            let w = tower.level(k).unwrap().width();
            ok &= w > 0.05;
            parts.push(format!("{name} L{k} {w:.4}"));
        }
    }
    outcome(ok, format!("widths (need > 0.05): {}", parts.join(", ")))
}

fn c5_classification() -> Outcome {
    let v = classify_analysis(&example1().analysis, &ClassifierConfig64::default()).unwrap();
    let cor = v.find("cor_b1").next().map(|e| e.statistic).unwrap_or(f64::NAN);
    outcome(
        v.label == Label::B1 && v.fired("cor_b1"),
        format!("label {:?}, cor_b1 fired = {} (tail max ratio {cor:.3} <= 8)", v.label, v.fired("cor_b1")),
    )
}

fn c6_example2() -> Outcome {
    let n = 100_000_000;
    let analysis = analyze::<f64, _>(SequenceSpec::example2().stream(), n, Some(1.0), &AnalysisConfig::default()).unwrap();
    let tower = analysis.tower(0.5).unwrap();
    let config = ClassifierConfig64::default();
    let verdict = classify_analysis(&analysis, &config).unwrap();

    let mut hulls_ok = true;
    let mut hulls = Vec::new();
    for k in 0..=3 {
        let e = tower.level(k).unwrap();
        hulls_ok &= e.lo.abs() <= 0.05 && (e.hi - 1.0).abs() <= 0.05;
        hulls.push(format!("L{k} [{:.3}, {:.3}]", e.lo, e.hi));
    }
    let fastpath = verdict.fired("nondecreasing");

    let (lo, hi) = level0(&tower);
    let eps = config.epsilon_fraction * (hi - lo);
    let mut growth_ok = false;
    let mut growth = Vec::new();
    for &s in &config.epsilon_scales {
        let stats = detect_crossings(&analysis.holder[0], 0.5, eps * s).unwrap().stats();
        let g = stats.max_tail / stats.median;
        growth_ok |= stats.count >= 4 && g > 10.0;
        growth.push(format!("eps {:.4}: {g:.2}", eps * s));
    }
    let ok = hulls_ok && verdict.label == Label::B2 && fastpath && growth_ok;
    outcome(
        ok,
        format!(
            "n = 1e8; hulls {} (need [0, 1] +/- 0.05: {hulls_ok}); label {:?}, fastpath fired = {fastpath}; gamma = 1/2 tail max / median {} (need > 10: {growth_ok})",
            hulls.join(" "),
            verdict.label,
            growth.join(", ")
        ),
    )
}

fn c7_example3() -> Outcome {
    let last = 2000u64;
    let mut sum = 0.0f64;
    let mut run = 1u64;
    let mut worst = 0.0f64;
    let mut ok = true;
    for (i, v) in example3_stream().take((last * (last + 1) / 2) as usize).enumerate() {
        sum += v.unwrap();
        let pos = i as u64 + 1;
        if pos == run * (run + 1) / 2 {
            if run >= 50 {
                let target = if run % 2 == 1 { 0.5 } else { -0.5 };
                let err = (sum / pos as f64 - target).abs() * run as f64;
                worst = worst.max(err);
                ok &= err <= 1.0;
            }
            run += 1;
        }
    }
    let analysis =
        analyze::<f64, _>(example3_stream(), 2_000_000, None, &AnalysisConfig { cesaro: false, ..AnalysisConfig::default() }).unwrap();
    let w1 = analysis.tower(0.5).unwrap().level(1).unwrap().width();
    ok &= w1 < 0.02;
    outcome(ok, format!("max n*|B_k - (+/-1/2)| over 50 <= n <= 2000 is {worst:.4} (need <= 1); level 1 tail width {w1:.5} (need < 0.02)"))
}

/// Double-double accumulator for the reference sums.
#[derive(Clone, Copy, Default)]
struct Dd {
    hi: f64,
    lo: f64,
}

impl Dd {
    fn add(&mut self, x: f64) {
        let s = self.hi + x;
        let bb = s - self.hi;
        let err = (self.hi - (s - bb)) + (x - bb);
        let lo = self.lo + err;
        self.hi = s + lo;
        self.lo = lo - (self.hi - s);
    }

    fn add_dd(&mut self, x: Dd) {
        self.add(x.hi);
        self.add(x.lo);
    }

    fn value(self) -> f64 {
        self.hi + self.lo
    }
}

fn c8_streaming_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let order = 4;
    let (mut worst_h, mut worst_c, mut worst_c1) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..100 {
        let m: f64 = rng.gen_range(0.1..10.0);
        let offset: f64 = rng.gen_range(-1.0..1.0) * m;
        let values: Vec<f64> = (0..10_000).map(|_| (offset + rng.gen_range(-m..=m)).clamp(-m, m)).collect();

        let mut h = MeanCascade::<f64>::with_bound(order, m);
        let mut c = CesaroCascade::<f64>::with_bound(order, m);
        let mut h_sums = vec![Dd::default(); order + 1];
        let mut s_sums = vec![Dd::default(); order + 1];
        for (i, &v) in values.iter().enumerate() {
            h.push(v).unwrap();
            c.push(v).unwrap();
            let n = (i + 1) as f64;

            // H^(k)_n = (1/n) sum_{m <= n} H^(k-1)_m
            let mut input = v;
            for (k, sum) in h_sums.iter_mut().enumerate() {
                sum.add(input);
                let want = sum.value() / n;
                worst_h = worst_h.max((h.level(k) - want).abs() / want.abs());
                input = want;
            }

            // S^(0)_n = B_n, S^(k)_n = sum_{m <= n} S^(k-1)_m
            s_sums[0].add(v);
            let mut below = Dd { hi: s_sums[0].hi / n, lo: s_sums[0].lo / n };
            for (k, sum) in s_sums.iter_mut().enumerate() {
                if k > 0 {
                    sum.add_dd(below);
                    below = *sum;
                }
                let want = below.value() / n.powi(k as i32);
                worst_c = worst_c.max((c.raw_level(k) - want).abs() / want.abs());
            }
            worst_c1 = worst_c1.max((c.level(1) - h.level(1)).abs() / h.level(1).abs());
        }
    }
    let ok = worst_h <= 1e-10 && worst_c <= 1e-10 && worst_c1 <= 1e-12;
    outcome(
        ok,
        format!(
            "max relative error: holder {worst_h:.2e}, cesaro {worst_c:.2e} (need <= 1e-10); (C,1) vs (H,1) {worst_c1:.2e} (need <= 1e-12)"
        ),
    )
}

fn c9_bowen_hyperbolic() -> Outcome {
    let params = CycleParams::defaults(Variant::Hyperbolic);
    let series = bowen::hyperbolic_times(&params, 40).unwrap();
    let ratios = series.residence_ratios();
    let exact = ratios.iter().all(|&r| r == 2.0);
    let stream = bowen::sample_flow(&series, 1_000_000).unwrap();
    let verdict = classify(stream, u64::MAX, &ClassifierConfig64::default()).unwrap();
    let events = bowen::residence_end_events(&series).unwrap();
    let tail = &events[events.len() / 2..];
    let (lo, hi) = tail.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), e| (a.min(e.average), b.max(e.average)));
    let ok = exact && verdict.label == Label::B1 && hi - lo <= 1.0 / 3.0 + 0.02;
    outcome(
        ok,
        format!(
            "{} ratios all exactly 2: {exact}; sampled label {:?}; event tail width {:.5} (need <= {:.5})",
            ratios.len(),
            verdict.label,
            hi - lo,
            1.0 / 3.0 + 0.02
        ),
    )
}

fn c10_bowen_nonhyperbolic() -> Outcome {
    let params = CycleParams::defaults(Variant::Nonhyperbolic);
    let series = bowen::nonhyperbolic_times(&params, 6).unwrap();
    let log_t = series.log_residence_times();
    let log_ratio_4 = if log_t.len() >= 4 { log_t[3] - log_t[2] } else { f64::NEG_INFINITY };
    let ratio_ok = log_ratio_4 > 1e3f64.ln();
    let verdict = bowen::classify_segments(&series, &ClassifierConfig64::default()).unwrap();
    let events = bowen::residence_end_events(&series).unwrap();
    let mut approach_ok = true;
    let mut parts = Vec::new();
    for e in events.iter().filter(|e| e.j >= 3) {
        let target = if e.j % 2 == 1 { params.phi1 } else { params.phi2 };
        approach_ok &= (e.average - target).abs() < 0.05;
        parts.push(format!("j={} {:.2e} vs {target}", e.j, e.average));
    }
    let ok = ratio_ok && verdict.label == Label::B2 && approach_ok && events.len() >= 4;
    outcome(
        ok,
        format!(
            "{} residences (truncated = {}); ln(T_4/T_3) = {log_ratio_4:.3e} (need > ln 1e3); label {:?}; averages {}",
            log_t.len(),
            series.truncated,
            verdict.label,
            parts.join(", ")
        ),
    )
}

/// Admissible binary words of length `n`, by enumeration and explicit completion.
fn reference_count(s: &ConstraintSchedule, n: usize) -> u64 {
    let mut blocks = Vec::new();
    let (mut start, mut i, mut len) = (0usize, 1usize, s.initial_length as usize);
    while start < n {
        blocks.push((start, len));
        start += len;
        i += 1;
        len = i * start;
    }
    let inside = |bi: usize, len: usize, sum: usize| {
        let a = if bi.is_multiple_of(2) { s.targets.0 } else { s.targets.1 };
        let (lo, hi) = (len as f64 * (a - s.epsilon) - 1e-9, len as f64 * (a + s.epsilon) + 1e-9);
        sum as f64 >= lo && sum as f64 <= hi
    };
    (0u64..1 << n)
        .filter(|word| {
            blocks.iter().enumerate().all(|(bi, &(start, len))| {
                let end = (start + len).min(n);
                let ones = (start..end).filter(|&p| word >> p & 1 == 1).count();
                let rest = start + len - end;
                (0..=rest).any(|extra| inside(bi, len, ones + extra))
            })
        })
        .count() as u64
}

fn c11_entropy() -> Outcome {
    let schedules = [
        (10, 0.4, 0.6, 0.05),
        (10, 0.45, 0.55, 0.05),
        (2, 0.3, 0.7, 0.1),
        (3, 0.4, 0.6, 0.05),
        (1, 0.2, 0.9, 0.15),
        (4, 0.25, 0.75, 0.1),
        (5, 0.35, 0.65, 0.08),
    ];
    let mut exact = true;
    let mut checked = 0;
    for (n1, a1, a2, eps) in schedules {
        let s = ConstraintSchedule::new(n1, a1, a2, eps).unwrap();
        let dp = growth_rates(&s, 16).unwrap();
        for (n, c) in (1..=16usize).zip(&dp) {
            let brute = enumerate_cylinders(&s, n).unwrap();
            exact &= c.count == brute && c.count.to_string() == reference_count(&s, n).to_string();
            checked += 1;
        }
    }
    let free = growth_rates(&ConstraintSchedule::unconstrained(10), 200).unwrap();
    let free_err = free.iter().map(|c| (c.rate - LN2).abs()).fold(0.0, f64::max);
    let rate = |a1: f64, n: u64| count_cylinders(&ConstraintSchedule::new(10, a1, 1.0 - a1, 0.05).unwrap(), n).unwrap().rate;
    let near = rate(0.45, 60);
    let grid = [0.35, 0.40, 0.45];
    let at_block_end: Vec<f64> = grid.iter().map(|&a| rate(a, 120)).collect();
    let at_60: Vec<f64> = grid.iter().map(|&a| rate(a, 60)).collect();
    let increasing = at_block_end.windows(2).all(|w| w[0] < w[1]) && at_block_end[2] < LN2;
    let ok = exact && free_err < 1e-12 && (LN2 - near).abs() <= 0.07 && increasing;
    outcome(
        ok,
        format!(
            "DP = brute force on {checked} (schedule, n <= 16) pairs: {exact}; unconstrained |rate - ln 2| <= {free_err:.1e}; \
             rate(0.45, 0.55; n = 60) = {near:.4} (ln 2 - {:.4}); alpha_1 in {grid:?} at n = 120: {at_block_end:.4?} increasing = {increasing} \
             (n = 60: {at_60:.4?})",
            LN2 - near
        ),
    )
}

fn run_cli(dir: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_birkhoff")).arg("--output-dir").arg(dir).args(args).output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("{args:?} exited with {}: {}", out.status, String::from_utf8_lossy(&out.stderr)));
    }
    Ok(())
}

/// File contents of `dir`, with manifest timings removed.
fn snapshot(dir: &Path) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        let text = fs::read_to_string(&path).unwrap();
        let text = if name.ends_with(".manifest.json") {
            let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
            v.as_object_mut().unwrap().remove("duration_secs");
            v.to_string()
        } else {
            text
        };
        out.insert(name, text);
    }
    out
}

fn c12_determinism() -> Outcome {
    let runs: Vec<Vec<&str>> = vec![
        vec!["generate", "example1", "-n", "100000"],
        vec!["analyze", "example1", "--n-max", "16777216"],
        vec!["classify", "example1"],
        vec!["classify", "example2", "--n-max", "10000000"],
        vec!["analyze", "example3", "--n-max", "2000000"],
        vec!["--seed", "42", "classify", "bernoulli:0.5", "--n-max", "1000000"],
        vec!["bowen", "--variant", "hyperbolic", "-j", "40"],
        vec!["bowen", "--variant", "nonhyperbolic"],
        vec!["entropy", "--n-max", "60", "--alpha1", "0.45", "--alpha2", "0.55", "--verify-brute", "16"],
        vec!["entropy", "--n-max", "200", "--unconstrained"],
    ];
    let mut mismatched = Vec::new();
    let mut files = 0;
    for args in &runs {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        if let Err(e) = run_cli(a.path(), args).and_then(|_| run_cli(b.path(), args)) {
            return outcome(false, e);
        }
        let (sa, sb) = (snapshot(a.path()), snapshot(b.path()));
        files += sa.len();
        if sa != sb {
            mismatched.push(args.join(" "));
        }
    }
    outcome(mismatched.is_empty(), format!("{} commands, {files} output files compared; mismatches: {mismatched:?}", runs.len()))
}

type Check = fn() -> Outcome;

fn main() {
    let criteria: [(&str, Check); 12] = [
        ("Example 1 limit set", c1_limit_set),
        ("Example 1 oscillation ratios", c2_ratios),
        ("Example 1 contraction optimality", c3_contraction),
        ("Hardy propagation to levels 1-3", c4_hardy_propagation),
        ("Example 1 classification", c5_classification),
        ("Example 2 hulls, fastpath, crossing growth", c6_example2),
        ("Example 3 triangular means and second averages", c7_example3),
        ("Streaming cascades vs nested sums", c8_streaming_oracle),
        ("Hyperbolic cycle", c9_bowen_hyperbolic),
        ("Non-hyperbolic cycle", c10_bowen_nonhyperbolic),
        ("Entropy counts", c11_entropy),
        ("Determinism", c12_determinism),
    ];
    let mut failed = Vec::new();
    for (i, (title, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = std::panic::catch_unwind(check).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            outcome(false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        let status = if result.pass { "PASS" } else { "FAIL" };
        println!("criterion {:>2} {status} {title}: {} [{:.1} s]", i + 1, result.detail, start.elapsed().as_secs_f64());
        if !result.pass {
            failed.push(i + 1);
        }
    }
    println!("acceptance: {}/{} passed; failed {failed:?}", criteria.len() - failed.len(), criteria.len());
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
