use birkhoff::bowen::{
    flow_average_at_events, hyperbolic_times, nonhyperbolic_times, residence_end_events, sample_counts, sample_flow, simulate, CycleParams,
    Duration, SegmentTag, Variant,
};
use proptest::prelude::*;

/// Residence, transit, residence, … values and durations for the hyperbolic cycle.
fn hyperbolic_reference(p: &CycleParams, j_max: usize) -> Vec<(f64, f64)> {
    let c = -p.x0.ln() / p.mu;
    let rho = p.lambda / p.mu;
    let mid = (p.phi1 + p.phi2) / 2.0;
    let mut out = Vec::new();
    for j in 1..=j_max {
        let value = if j % 2 == 1 { p.phi1 } else { p.phi2 };
        out.push((c * rho.powi(j as i32), value));
        if p.tau_transit > 0.0 {
            out.push((p.tau_transit, mid));
        }
    }
    out
}

/// Integral of a piecewise-constant function over `[0, t]`, piece by piece.
fn integrate(pieces: &[(f64, f64)], t: f64) -> f64 {
    let mut acc = 0.0;
    let mut start = 0.0;
    for &(len, value) in pieces {
        let end = (start + len).min(t);
        if end > start {
            acc += (end - start) * value;
        }
        start += len;
        if start >= t {
            break;
        }
    }
    acc
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn event_averages_match_quadrature(
        lambda in 1.2f64..4.0, x0 in 0.05f64..0.9, tau in 0.0f64..3.0,
        phi1 in -2.0f64..2.0, phi2 in -2.0f64..2.0, j_max in 1usize..=10,
    ) {
        let p = CycleParams { lambda, x0, tau_transit: tau, phi1, phi2, ..CycleParams::defaults(Variant::Hyperbolic) };
        let series = hyperbolic_times(&p, j_max).unwrap();
        let events = flow_average_at_events(&series).unwrap();
        let pieces = hyperbolic_reference(&p, j_max);
        prop_assert_eq!(events.len(), pieces.len());
        let mut t = 0.0;
        for (e, &(len, _)) in events.iter().zip(&pieces) {
            t += len;
            let want = integrate(&pieces, t) / t;
            prop_assert!((e.average - want).abs() <= 1e-12 * want.abs().max(1.0), "{} vs {want}", e.average);
            prop_assert!((e.log_time - t.ln()).abs() <= 1e-12 * t.ln().abs().max(1.0));
        }
    }

    #[test]
    fn hyperbolic_ratios_are_rho(lambda in 1.1f64..5.0, mu in 0.2f64..1.0, j_max in 2usize..60) {
        let p = CycleParams { lambda: lambda.max(mu * 1.05), mu, ..CycleParams::defaults(Variant::Hyperbolic) };
        let series = hyperbolic_times(&p, j_max).unwrap();
        for r in series.residence_ratios() {
            prop_assert!((r - p.rho()).abs() <= 1e-12 * p.rho());
        }
        for s in series.residences() {
            let (entry, exit) = (s.log_entry.unwrap(), s.log_exit.unwrap());
            prop_assert!((exit - p.rho() * entry).abs() <= 1e-12 * exit.abs());
        }
    }

    /// Sample counts follow elapsed time, so sampled means track the flow averages.
    #[test]
    fn sampling_conserves_averages(j_max in 4usize..20, s in 1000u64..100_000) {
        let p = CycleParams::defaults(Variant::Hyperbolic);
        let series = hyperbolic_times(&p, j_max).unwrap();
        let counts = sample_counts(&series, s).unwrap();
        let events = flow_average_at_events(&series).unwrap();
        let values = sample_flow(&series, s).unwrap().take_values(usize::MAX).unwrap();
        prop_assert_eq!(values.len() as u64, counts.iter().sum::<u64>());
        let q = series.segments.iter().map(|s| s.duration.linear().unwrap()).fold(0.0, f64::max) / s as f64;
        let (mut n, mut sum) = (0usize, 0.0);
        for (m, (e, &c)) in events.iter().zip(&counts).enumerate() {
            sum += values[n..n + c as usize].iter().sum::<f64>();
            n += c as usize;
            let t = e.time.unwrap();
            if (m + 1) as f64 * q / t <= 0.01 && n > 0 {
                let discrete = sum / n as f64;
                prop_assert!((discrete - e.average).abs() <= 0.01 * e.average.abs().max(1e-300), "m={m} {discrete} vs {}", e.average);
            }
        }
    }
}

#[test]
fn doubling_ratios_are_exact() {
    let series = hyperbolic_times(&CycleParams::defaults(Variant::Hyperbolic), 40).unwrap();
    assert!(series.residence_ratios().iter().all(|&r| r == 2.0));
}

#[test]
fn nonhyperbolic_growth_is_doubly_exponential() {
    let p = CycleParams::defaults(Variant::Nonhyperbolic);
    let series = nonhyperbolic_times(&p, 6).unwrap();
    assert!(series.truncated);
    let log_t = series.log_residence_times();
    assert_eq!(log_t.len(), 4);
    for w in log_t.windows(2) {
        assert!(w[1] > w[0]);
    }
    // ln T_{j+1} ≈ 2 T_j − ln(2α²d²) once T_j is large
    let (alpha, d) = (p.alpha_glob, p.d_nbhd);
    for w in log_t.windows(2).skip(1) {
        let t = w[0].exp();
        let predicted = 2.0 * t - (2.0 * alpha * alpha * d * d).ln();
        assert!((w[1] - predicted).abs() < 1e-9 * predicted, "{} vs {predicted}", w[1]);
    }
}

#[test]
fn nonhyperbolic_matches_direct_recursion() {
    // Below the log switch the stored durations equal the plain recursion.
    let p = CycleParams { x0: 0.9, alpha_glob: 0.9, ..CycleParams::defaults(Variant::Nonhyperbolic) };
    let series = nonhyperbolic_times(&p, 3).unwrap();
    let mut x: f64 = 0.9;
    for s in series.residences() {
        let t = 0.5 * (x.powi(-2) - 1.0);
        match s.duration {
            Duration::Linear(got) => assert!((got - t).abs() <= 1e-12 * t.max(1.0)),
            Duration::Log(_) => panic!("unexpected log duration"),
        }
        assert!((s.log_entry.unwrap() - x.ln()).abs() < 1e-12);
        x = 0.9 * (-t).exp();
    }
}

#[test]
fn nonhyperbolic_events_alternate_between_values() {
    let p = CycleParams::defaults(Variant::Nonhyperbolic);
    let series = simulate(Variant::Nonhyperbolic, &p, 6).unwrap();
    let events = residence_end_events(&series).unwrap();
    let last = events.last().unwrap();
    let prev = &events[events.len() - 2];
    assert!((last.average - p.phi2).abs() < 0.05 || (last.average - p.phi1).abs() < 0.05);
    assert!((last.average - prev.average).abs() > 0.9);
    assert!(last.time.is_none());
}

#[test]
fn log_segments_refuse_sampling() {
    let p = CycleParams::defaults(Variant::Nonhyperbolic);
    let series = nonhyperbolic_times(&p, 6).unwrap();
    assert!(sample_flow(&series, 100).is_err());
}

#[test]
fn zero_transit_drops_transits() {
    let p = CycleParams { tau_transit: 0.0, ..CycleParams::defaults(Variant::Hyperbolic) };
    let series = hyperbolic_times(&p, 5).unwrap();
    assert!(series.segments.iter().all(|s| s.tag != SegmentTag::Transit));
    assert_eq!(series.residence_count(), 5);
}

#[test]
fn json_overrides_defaults() {
    let p = CycleParams::from_json(Variant::Hyperbolic, r#"{"lambda": 3.0}"#).unwrap();
    assert_eq!(p.rho(), 3.0);
    assert_eq!(p.x0, (-1.0f64).exp());
    assert!(CycleParams::from_json(Variant::Hyperbolic, r#"{"lamda": 3.0}"#).is_err());
}
