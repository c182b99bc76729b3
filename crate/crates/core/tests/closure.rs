//! Monte Carlo closure: simulated tags through the analysis recover what was put in.

use cspdc::coincidence::{build_histogram, AnalysisConfig, CoincidenceHistogram};
use cspdc::config::{ProjectConfig, Scenario};
use cspdc::report::{closure, simulate_and_histogram};
use cspdc::sim::{expected_coincidence_rate, simulate, ChannelConfig, ChannelRole, ScenarioConfig};

fn scenario(name: &str) -> Scenario {
    ProjectConfig::bundled().scenario(name).unwrap().clone()
}

/// Bright, background-free pair source with a clean peak at +75 ns.
fn bright(jitter_ps: (f64, f64), seed: u64) -> ScenarioConfig {
    let mut herald = ChannelConfig::new(0, ChannelRole::Herald, 0.5);
    herald.jitter_sigma_ps = jitter_ps.0;
    let mut daughter = ChannelConfig::new(1, ChannelRole::Granddaughter, 0.5);
    daughter.jitter_sigma_ps = jitter_ps.1;
    daughter.optical_delay_ps = 75_000.0;
    ScenarioConfig {
        triplet_generation_rate_hz: 2000.0,
        herald_singles_rate_hz: 0.0,
        channels: vec![herald, daughter],
        duration_s: 20.0,
        seed,
        tag_resolution_ps: 1,
        periodic: Vec::new(),
    }
}

#[test]
fn closure_holds_across_seeds() {
    let mut s = scenario("scaled");
    s.config.duration_s = 240.0;
    let n = 60;
    let mut inside = 0;
    let mut pulls = Vec::new();
    // ~0.1 accidentals per bin here, so the floor is only checked pooled over seeds
    let (mut floor_obs, mut floor_exp) = (0.0, 0.0);
    for seed in 0..n {
        s.config.seed = 500 + seed;
        let c = closure(&s).unwrap();
        floor_obs += c.floor.mean * c.floor.bins as f64;
        floor_exp += c.expected_floor_per_bin * c.floor.bins as f64;
        if c.pull.abs() <= 3.0 {
            inside += 1;
        }
        pulls.push(c.pull);
    }
    assert!((floor_obs - floor_exp).abs() < 4.0 * floor_exp.sqrt(), "floor {floor_obs} vs {floor_exp}");
    let frac = inside as f64 / n as f64;
    let mean = pulls.iter().sum::<f64>() / n as f64;
    assert!(frac >= 0.95, "{inside}/{n} within 3σ, pulls {pulls:?}");
    // no gross bias either way
    assert!(mean.abs() < 0.6, "mean pull {mean}");
}

#[test]
fn decorrelated_stream_has_no_excess() {
    let s = scenario("measured");
    let mut cfg = s.config.clone();
    cfg.duration_s = 120.0;
    cfg.seed = 42;
    let stream = simulate(&cfg).unwrap();
    let a = &s.analysis;
    // move the true peak far outside the histogram range
    let shifted = stream.shifted(a.stop_channel, 2_000_000);
    let base = build_histogram(&shifted, a.start_channel, a.stop_channel, a.base_bin_ps, a.range_ps).unwrap();
    let r = a.analyze(&base).unwrap().result;
    assert!(r.rate_hz.abs() <= 2.0 * r.sigma_hz, "{} ± {}", r.rate_hz, r.sigma_hz);
}

/// Weighted standard deviation of the delay within ±`half_ps` of the largest bin.
fn peak_width_ps(h: &CoincidenceHistogram, half_ps: f64) -> f64 {
    let imax = (0..h.counts.len()).max_by_key(|&i| h.counts[i]).unwrap();
    let centre = h.bin_center_ps(imax);
    let (mut w, mut m1, mut m2) = (0.0, 0.0, 0.0);
    for i in 0..h.counts.len() {
        let x = h.bin_center_ps(i) - centre;
        if x.abs() <= half_ps {
            let c = h.counts[i] as f64;
            w += c;
            m1 += c * x;
            m2 += c * x * x;
        }
    }
    (m2 / w - (m1 / w).powi(2)).sqrt()
}

#[test]
fn peak_width_is_the_quadrature_sum_of_jitters() {
    for (j1, j2) in [(100.0, 200.0), (50.0, 50.0), (300.0, 0.0)] {
        let cfg = bright((j1, j2), 9);
        let analysis = AnalysisConfig {
            base_bin_ps: 4,
            range_ps: (70_000, 80_000),
            ..AnalysisConfig::default()
        };
        let (_, h) = simulate_and_histogram(&cfg, &analysis).unwrap();
        let expected = f64::hypot(j1, j2);
        let width = peak_width_ps(&h, 6.0 * expected);
        assert!((width / expected - 1.0).abs() < 0.15, "jitters {j1}/{j2}: width {width} vs {expected}");
    }
}

#[test]
fn shifting_the_stop_channel_shifts_the_histogram() {
    let cfg = bright((100.0, 150.0), 3);
    let stream = simulate(&cfg).unwrap();
    let bin = 256;
    let range = (-102_400, 102_400);
    let h0 = build_histogram(&stream, 0, 1, bin, range).unwrap();
    let k = 40;
    let h1 = build_histogram(&stream.shifted(1, k * bin as i64), 0, 1, bin, range).unwrap();
    // The shift drops at most a handful of tags at the end of the run.
    let n = h0.counts.len() - k as usize;
    let mismatched: u64 = (0..n).map(|i| h0.counts[i].abs_diff(h1.counts[i + k as usize])).sum();
    assert!(mismatched <= 5, "{mismatched} counts moved differently");

    let a0 = AnalysisConfig {
        rebin: 1,
        base_bin_ps: bin,
        peak_search_ps: (60_000, 90_000),
        ..AnalysisConfig::default()
    };
    let a1 = AnalysisConfig {
        peak_search_ps: (60_000 + k * bin as i64, 90_000 + k * bin as i64),
        ..a0.clone()
    };
    let r0 = a0.analyze(&h0).unwrap().result;
    let r1 = a1.analyze(&h1).unwrap().result;
    assert_eq!(r1.window_start_ps - r0.window_start_ps, k * bin as i64);
    assert!((r0.rate_hz - r1.rate_hz).abs() < 0.5, "{} vs {}", r0.rate_hz, r1.rate_hz);
    let truth = expected_coincidence_rate(&cfg, 0, 1).unwrap();
    assert!((r0.rate_hz / truth - 1.0).abs() < 0.02, "{} vs {truth}", r0.rate_hz);
}

/// The full 16 h run at the measured operating point (about 20 minutes).
#[test]
#[ignore]
fn sixteen_hour_acquisition() {
    let mut s = scenario("measured");
    s.config.duration_s = 57_600.0;
    let c = closure(&s).unwrap();
    assert!(c.pull.abs() <= 3.0, "pull {}", c.pull);
    assert!(c.floor_deviation().abs() < 0.01, "floor {}", c.floor_deviation());
    // a peak that stands out of the floor, as in the long measurement
    assert!(c.result.snr > 4.0 && c.result.snr < 12.0, "snr {}", c.result.snr);
    let windowed = c.floor.mean * 14.0;
    assert!((1.0e6..1.1e6).contains(&windowed), "{windowed}");
}
