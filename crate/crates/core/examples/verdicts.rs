//! Classifies the built-in sequences and prints the evidence behind each verdict.
//!
//! `cargo run --release -p birkhoff --example verdicts`

use birkhoff::bowen::{classify_segments, simulate, CycleParams, Variant};
use birkhoff::classify::{classify, Verdict};
use birkhoff::entropy::bernoulli_stream;
use birkhoff::sequences::SequenceSpec;
use birkhoff::ClassifierConfig64;

fn show(name: &str, v: &Verdict<f64>) {
    println!("{name}: {:?}", v.label);
    for i in &v.tower.intervals {
        println!("  level {:>2} [{:.4}, {:.4}]", i.k, i.lo, i.hi);
    }
    for e in v.evidence.iter().filter(|e| e.fired) {
        println!("  fired {} (statistic {:.4}, threshold {:.4})", e.criterion, e.statistic, e.threshold);
    }
    for note in &v.notes {
        println!("  note: {note}");
    }
}

fn main() -> birkhoff::Result<()> {
    let config = ClassifierConfig64::default();
    show("example 1", &classify(SequenceSpec::example1().stream(), 1 << 24, &config)?);
    show("example 2", &classify(SequenceSpec::example2().stream(), 100_000_000, &config)?);
    show("bernoulli(1/2)", &classify(bernoulli_stream(0.5, 42)?, 1 << 24, &config)?);
    for variant in [Variant::Hyperbolic, Variant::Nonhyperbolic] {
        let j = if variant == Variant::Hyperbolic { 40 } else { 6 };
        let series = simulate(variant, &CycleParams::defaults(variant), j)?;
        show(&format!("{variant:?} cycle"), &classify_segments(&series, &config)?);
    }
    Ok(())
}
