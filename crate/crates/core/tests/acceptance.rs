//! Acceptance gate: one PASS/FAIL line per criterion. Exits non-zero if any fails.
//!
//! `ACCEPTANCE_SEEDS` overrides the seed count of the SNR-scaling study (minimum 20).

use std::time::Instant;

use cspdc::cascade::{predicted_cspdc_efficiency, triplet_efficiency_from_coincidences, twofold_accidentals, Measured};
use cspdc::coincidence::CoincidenceHistogram;
use cspdc::config::ProjectConfig;
use cspdc::numeric::median;
use cspdc::reference::Reference;
use cspdc::report::{broadband_factor, closure, design_report, simulate_and_histogram, stage_acceptance, stage_spectrum};
use cspdc::sim::{apply_dead_time, simulate, write_tags_binary, ChannelRole};
use cspdc::spdc::{effective_filter_bandwidth, photon_probability, sinc, FilterCurve};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Gate {
    failed: Vec<u32>,
}

impl Gate {
    fn check(&mut self, id: u32, name: &str, f: impl FnOnce() -> Result<(bool, String), String>) {
        let t0 = Instant::now();
        let (ok, detail) = match f() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        println!(
            "criterion {id:>2} {}  {name}: {detail}  [{:.1} s]",
            if ok { "PASS" } else { "FAIL" },
            t0.elapsed().as_secs_f64()
        );
        if !ok {
            self.failed.push(id);
        }
    }
}

fn within(x: f64, target: f64, rel: f64) -> bool {
    (x / target - 1.0).abs() <= rel
}

fn main() {
    let reference = Reference::bundled();
    let project = ProjectConfig::bundled();
    let r = &reference;
    let mut gate = Gate { failed: Vec::new() };

    gate.check(1, "predicted triplet efficiency", || {
        let e = predicted_cspdc_efficiency(
            r.first_stage_brightness_796,
            r.herald_effective_bandwidth_nm,
            r.second_stage_probability,
            r.broadband_factor,
        )
        .map_err(|e| e.to_string())?;
        Ok((
            within(e, r.predicted_efficiency, 0.01),
            format!("{:.1} kHz/mW vs {:.0} kHz/mW ± 1%", e * 1e-3, r.predicted_efficiency * 1e-3),
        ))
    });

    gate.check(2, "efficiency from coincidences", || {
        let c = &r.calibration;
        let t = triplet_efficiency_from_coincidences(
            Measured::exact(r.coincidence_rate.value),
            Measured::exact(c.herald_efficiency),
            Measured::exact(c.granddaughter_efficiency),
            Measured::exact(r.pump_power_mw),
        )
        .map_err(|e| e.to_string())?;
        let (eff, gen) = (t.efficiency_hz_per_mw.value, t.generation_rate_hz.value);
        Ok((
            r.efficiency.contains(eff, 1.0) && r.generation_rate.contains(gen, 1.0),
            format!(
                "{:.1} kHz/mW in {:.0} ± {:.0}; {:.2} Hz in {:.0} ± {:.0}",
                eff * 1e-3,
                r.efficiency.value * 1e-3,
                r.efficiency.sigma * 1e-3,
                gen,
                r.generation_rate.value,
                r.generation_rate.sigma
            ),
        ))
    });

    gate.check(3, "second-stage photon probability", || {
        let p = photon_probability(r.second_stage_pair_efficiency, 796.0);
        Ok((
            within(p, r.second_stage_probability, 0.02),
            format!("{p:.4e} vs {:.1e} ± 2%", r.second_stage_probability),
        ))
    });

    gate.check(4, "herald calibration rescale", || {
        let chain = project.chain(ChannelRole::Herald).map_err(|e| e.to_string())?;
        let eta = chain.efficiency().map_err(|e| e.to_string())?;
        let c = &r.calibration;
        let direct = c.herald_calibrated / c.herald_objective_fraction / c.herald_downstream_ratio;
        Ok((
            (eta - c.herald_efficiency).abs() <= 0.002 && (eta - direct).abs() < 1e-12,
            format!("{eta:.4} vs {} ± 0.002", c.herald_efficiency),
        ))
    });

    gate.check(5, "accidental total over the long acquisition", || {
        let window_ns = r.window_bins as f64 * r.bin_width_ps * 1e-3;
        let total = twofold_accidentals(r.herald_singles.value, r.granddaughter_singles_hz, window_ns) * r.acquisition_s;
        let measured = r.windowed_coincidences as f64;
        Ok((
            (1.05e6..=1.08e6).contains(&total) && within(total, measured, 0.03),
            format!("{total:.4e} in [1.05e6, 1.08e6], {:+.2}% from {measured}", (total / measured - 1.0) * 100.0),
        ))
    });

    gate.check(6, "Monte Carlo closure, measured operating point, 600 s", || {
        let s = project.scenario("measured").map_err(|e| e.to_string())?;
        let c = closure(s).map_err(|e| e.to_string())?;
        let tags: u64 = c.summary.channels.iter().map(|ch| ch.recorded).sum();
        let ok = c.pull.abs() <= 3.0 && c.floor_deviation().abs() <= 0.05;
        Ok((
            ok,
            format!(
                "{tags:.3e} tags; rate {:.4} ± {:.4} Hz vs truth {:.4} Hz (pull {:+.2}, limit 3); floor {:.1}/bin vs {:.1} ({:+.2}%, limit 5%)",
                c.result.rate_hz,
                c.result.sigma_hz,
                c.truth_hz,
                c.pull,
                c.floor.mean,
                c.expected_floor_per_bin,
                c.floor_deviation() * 100.0
            ),
        ))
    });

    gate.check(7, "SNR scaling, 600 s vs 2400 s", || {
        let seeds: u64 = std::env::var("ACCEPTANCE_SEEDS").ok().and_then(|s| s.parse().ok()).unwrap_or(20).max(20);
        let base = project.scenario("scaled").map_err(|e| e.to_string())?;
        let snr_at = |seed: u64, duration: f64| -> Result<f64, String> {
            let mut cfg = base.config.clone();
            cfg.seed = seed;
            cfg.duration_s = duration;
            let (_, hist) = simulate_and_histogram(&cfg, &base.analysis).map_err(|e| e.to_string())?;
            Ok(base.analysis.analyze(&hist).map_err(|e| e.to_string())?.result.snr)
        };
        let mut ratios = Vec::new();
        for k in 0..seeds {
            // independent seeds for the short and the long run
            ratios.push(snr_at(1000 + 2 * k + 1, 2400.0)? / snr_at(1000 + 2 * k, 600.0)?);
        }
        let m = median(&mut ratios);
        Ok(((m - 2.0).abs() <= 0.4, format!("median ratio {m:.3} over {seeds} seeds, target 2.0 ± 0.4")))
    });

    gate.check(8, "design numbers", || {
        let d = design_report(&project).map_err(|e| e.to_string())?;
        let period = d.stages[0].period_um;
        let gvd = d.stages[1].gvd_signal_fs2_per_mm;
        let second = project.stage("second").map_err(|e| e.to_string())?;
        let acc = stage_acceptance(second).map_err(|e| e.to_string())?;
        let bw = stage_spectrum(second)
            .map_err(|e| e.to_string())?
            .bandwidth
            .ok_or("second-stage spectrum has no bounded 3-dB width")?;
        let ok = within(period, r.first_period_um, 0.10)
            && (-12.0..=-4.0).contains(&gvd)
            && within(acc.fwhm_nm, r.pump_acceptance_fwhm_nm, 0.15)
            && within(bw.width_thz, r.second_stage_bandwidth_thz, 0.15);
        Ok((
            ok,
            format!(
                "period {period:.4} um (2.1 ± 10%), GVD(1592) {gvd:.3} fs²/mm in [-12, -4], acceptance {:.3} nm (3.7 ± 15%), bandwidth {:.1} THz (116 ± 15%)",
                acc.fwhm_nm, bw.width_thz
            ),
        ))
    });

    gate.check(9, "broadband-pump factor", || {
        let eta = broadband_factor(&project).map_err(|e| e.to_string())?;
        Ok(((eta - r.broadband_factor).abs() <= 0.05, format!("{eta:.4} vs {} ± 0.05", r.broadband_factor)))
    });

    gate.check(10, "property suites", || {
        let mut notes = Vec::new();
        // sinc² bounded by 1, unity at zero, nulls at kπ
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let bounded = (0..10_000).all(|_| {
            let v = sinc(rng.random_range(-100.0..100.0)).powi(2);
            (0.0..=1.0).contains(&v)
        });
        let nulls = (1..20).all(|k| sinc(k as f64 * std::f64::consts::PI).powi(2) < 1e-28) && sinc(0.0) == 1.0;
        notes.push(format!("sinc² bounds {bounded}, nulls {nulls}"));

        let kept = apply_dead_time(&[0, 50_000, 95_000, 200_000], 90.0).map_err(|e| e.to_string())?;
        let dead_ok = kept == [0, 95_000, 200_000];
        notes.push(format!("dead time kept {}", kept.len()));

        let rebin_ok = (0..200).all(|_| {
            let factor = rng.random_range(1..9usize);
            let n = factor * rng.random_range(1..40usize);
            let h = CoincidenceHistogram {
                bin_width_ps: 4,
                range_min_ps: -(2 * n as i64),
                counts: (0..n).map(|_| rng.random_range(0..1000u64)).collect(),
                acquisition_time_s: 1.0,
                start_channel: 0,
                stop_channel: 1,
            };
            h.rebin(factor).map(|r| r.total() == h.total()).unwrap_or(false)
        });
        notes.push(format!("rebin conservation {rebin_ok}"));

        let mut cfg = project.scenario("measured").map_err(|e| e.to_string())?.config.clone();
        cfg.duration_s = 2.0;
        cfg.seed = 77;
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let mut files = Vec::new();
        for name in ["a.tags", "b.tags"] {
            let path = dir.path().join(name);
            write_tags_binary(&path, &simulate(&cfg).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
            files.push(std::fs::read(&path).map_err(|e| e.to_string())?);
        }
        let det_ok = files[0] == files[1] && !files[0].is_empty();
        notes.push(format!("byte-identical reruns {det_ok}"));

        let f = FilterCurve::flat_top(1000.0, 1003.0, 1.0, 0.001).map_err(|e| e.to_string())?;
        let w = effective_filter_bandwidth(&f);
        let half = effective_filter_bandwidth(&f.scaled(0.5).map_err(|e| e.to_string())?);
        let lin_ok = (half - 0.5 * w).abs() < 1e-12 && (w - 3.001).abs() < 1e-9;
        notes.push(format!("filter width {w:.4} nm, halved {half:.4} nm"));

        Ok((bounded && nulls && dead_ok && rebin_ok && det_ok && lin_ok, notes.join("; ")))
    });

    if gate.failed.is_empty() {
        println!("acceptance: all criteria pass");
    } else {
        println!("acceptance: failed criteria {:?}", gate.failed);
        std::process::exit(1);
    }
}
