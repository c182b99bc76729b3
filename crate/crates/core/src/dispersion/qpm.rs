use serde::Serialize;

use super::ModeDispersion;
use crate::error::{Error, Result};
use crate::numeric::{bisect, grid};
use crate::spdc::conjugate_wavelength;

/// Relative tolerance on 1/λ_p = 1/λ_s + 1/λ_i.
pub const ENERGY_TOLERANCE: f64 = 1e-6;

/// Relative residual of photon-energy conservation.
pub fn energy_mismatch(pump_nm: f64, signal_nm: f64, idler_nm: f64) -> f64 {
    (1.0 / pump_nm - 1.0 / signal_nm - 1.0 / idler_nm).abs() * pump_nm
}

/// n_p/λ_p − n_s/λ_s − n_i/λ_i in 1/nm.
pub fn mismatch_per_nm(p: (&ModeDispersion, f64), s: (&ModeDispersion, f64), i: (&ModeDispersion, f64)) -> Result<f64> {
    Ok(p.0.refractive_index(p.1)? / p.1 - s.0.refractive_index(s.1)? / s.1 - i.0.refractive_index(i.1)? / i.1)
}

/// Poling period in μm that quasi-phase matches the given triple at QPM `order`.
pub fn qpm_period(
    p: (&ModeDispersion, f64),
    s: (&ModeDispersion, f64),
    i: (&ModeDispersion, f64),
    order: u32,
) -> Result<f64> {
    if order == 0 {
        return Err(Error::invalid("QPM order", "must be at least 1"));
    }
    let rel = energy_mismatch(p.1, s.1, i.1);
    if !(rel <= ENERGY_TOLERANCE) {
        return Err(Error::EnergyConservation {
            pump_nm: p.1,
            signal_nm: s.1,
            idler_nm: i.1,
            relative: rel,
        });
    }
    let d = mismatch_per_nm(p, s, i)?;
    let scale = p.0.refractive_index(p.1)? / p.1;
    if d.abs() <= 1e-12 * scale {
        return Err(Error::PerfectlyPhaseMatched);
    }
    if d < 0.0 {
        return Err(Error::WrongSign { mismatch: d });
    }
    Ok(order as f64 / d * 1e-3)
}

/// Candidate modes per band for the parasitic search.
#[derive(Debug, Clone, Default)]
pub struct ModeSet {
    pub pump: Vec<ModeDispersion>,
    pub signal: Vec<ModeDispersion>,
    pub idler: Vec<ModeDispersion>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParasiticMatch {
    pub pump_mode: String,
    pub signal_mode: String,
    pub idler_mode: String,
    pub signal_nm: f64,
    pub idler_nm: f64,
    pub period_um: f64,
    pub relative_deviation: f64,
}

/// Scan of signal wavelengths for mode triples that phase match on a fixed poling period.
#[derive(Debug, Clone)]
pub struct ParasiticSearch {
    pub pump_nm: f64,
    pub target_period_um: f64,
    pub order: u32,
    pub signal_range_nm: (f64, f64),
    pub step_nm: f64,
    pub tolerance: f64,
}

impl ParasiticSearch {
    pub fn new(pump_nm: f64, target_period_um: f64) -> Self {
        ParasiticSearch {
            pump_nm,
            target_period_um,
            order: 1,
            signal_range_nm: (530.0, 600.0),
            step_nm: 0.5,
            tolerance: 0.01,
        }
    }

    /// Every triple (pump, signal, idler mode) is scanned over the signal grid. One match is
    /// reported per contiguous in-tolerance run: the bracketed exact root when the mismatch
    /// changes sign inside the run, otherwise the closest grid point. Every exact root is
    /// reported even when the tolerance is zero.
    pub fn run(&self, modes: &ModeSet) -> Result<Vec<ParasiticMatch>> {
        let (lo, hi) = self.signal_range_nm;
        if !(self.pump_nm > 0.0 && lo > self.pump_nm && hi >= lo && self.step_nm > 0.0) {
            return Err(Error::invalid("parasitic search", "signal range must lie above the pump wavelength"));
        }
        if !(self.target_period_um > 0.0) || !(self.tolerance >= 0.0) {
            return Err(Error::invalid("parasitic search", "target period must be positive and tolerance non-negative"));
        }
        let lams = grid(lo, hi, self.step_nm);
        let target = self.order as f64 / (self.target_period_um * 1e3);
        let mut out = Vec::new();
        for pm in &modes.pump {
            for sm in &modes.signal {
                for im in &modes.idler {
                    let g = |ls: f64| -> Result<f64> {
                        let li = conjugate_wavelength(self.pump_nm, ls)?;
                        Ok(mismatch_per_nm((pm, self.pump_nm), (sm, ls), (im, li))? - target)
                    };
                    let gs = lams.iter().map(|&l| g(l)).collect::<Result<Vec<_>>>()?;
                    // relative period deviation |Λ − Λt|/Λt = |g| / (g + target)
                    let dev = |gv: f64| {
                        let d = gv + target;
                        if d > 0.0 {
                            (gv / d).abs()
                        } else {
                            f64::INFINITY
                        }
                    };
                    let in_tol = |k: usize| dev(gs[k]) <= self.tolerance;
                    let linked = |k: usize| k + 1 < gs.len() && (gs[k] == 0.0 || gs[k].signum() != gs[k + 1].signum());

                    let mut k = 0;
                    while k < gs.len() {
                        if !(in_tol(k) || linked(k)) {
                            k += 1;
                            continue;
                        }
                        let start = k;
                        let mut end = k;
                        while end + 1 < gs.len() && (in_tol(end + 1) || linked(end)) {
                            end += 1;
                        }
                        let roots: Vec<f64> = (start..end)
                            .filter(|&j| linked(j))
                            .map(|j| {
                                bisect(|x| g(x).unwrap_or(f64::NAN), lams[j], lams[j + 1], 1e-10)
                            })
                            .collect::<Result<_>>()?;
                        let picks: Vec<f64> = if roots.is_empty() {
                            let best = (start..=end).min_by(|&a, &b| dev(gs[a]).total_cmp(&dev(gs[b]))).unwrap();
                            vec![lams[best]]
                        } else {
                            roots
                        };
                        for ls in picks {
                            let gv = g(ls)?;
                            let d = gv + target;
                            if d <= 0.0 {
                                continue;
                            }
                            let li = conjugate_wavelength(self.pump_nm, ls)?;
                            out.push(ParasiticMatch {
                                pump_mode: pm.label.clone(),
                                signal_mode: sm.label.clone(),
                                idler_mode: im.label.clone(),
                                signal_nm: ls,
                                idler_nm: li,
                                period_um: self.order as f64 / d * 1e-3,
                                relative_deviation: dev(gv),
                            });
                        }
                        k = end + 1;
                    }
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn flat(label: &str, n: f64) -> ModeDispersion {
        ModeDispersion::tabulated(label, (0..=200).map(|k| (350.0 + 20.0 * k as f64, n))).unwrap()
    }

    fn linear(label: &str, n0: f64, slope: f64) -> ModeDispersion {
        linear_about(label, 800.0, n0, slope)
    }

    fn linear_about(label: &str, centre: f64, n0: f64, slope: f64) -> ModeDispersion {
        ModeDispersion::tabulated(label, (0..=73).map(|k| {
            let l = 350.0 + 20.0 * k as f64;
            (l, n0 + slope * (l - centre))
        }))
        .unwrap()
    }

    #[test]
    fn degenerate_equal_index_is_perfectly_matched() {
        let m = flat("flat", 2.1);
        let err = qpm_period((&m, 700.0), (&m, 1400.0), (&m, 1400.0), 1).unwrap_err();
        assert!(matches!(err, Error::PerfectlyPhaseMatched), "{err}");
    }

    #[test]
    fn hand_computed_period() {
        let p = flat("p", 2.4);
        let s = flat("s", 2.2);
        let (lp, ls) = (408.0, 796.0);
        let li = 1.0 / (1.0 / lp - 1.0 / ls);
        // oracle: Λ = 1 / (2.4/λp − 2.2/λs − 2.2/λi), nm → μm
        let expected = 1.0 / (2.4 / 408.0 - 2.2 / 796.0 - 2.2 / li) / 1000.0;
        let got = qpm_period((&p, lp), (&s, ls), (&s, li), 1).unwrap();
        assert_relative_eq!(got, expected, max_relative = 1e-9);
        // second order doubles the period
        assert_relative_eq!(qpm_period((&p, lp), (&s, ls), (&s, li), 2).unwrap(), 2.0 * expected, max_relative = 1e-12);
    }

    #[test]
    fn energy_conservation_is_validated() {
        let p = flat("p", 2.4);
        let s = flat("s", 2.2);
        // the rounded triple (408, 796, 836.2) misses by ~1e-4 relative
        let err = qpm_period((&p, 408.0), (&s, 796.0), (&s, 836.2), 1).unwrap_err();
        assert!(matches!(err, Error::EnergyConservation { .. }));
    }

    #[test]
    fn wrong_sign() {
        let p = flat("p", 2.0);
        let s = flat("s", 2.2);
        let li = 1.0 / (1.0 / 408.0 - 1.0 / 796.0);
        assert!(matches!(qpm_period((&p, 408.0), (&s, 796.0), (&s, li), 1), Err(Error::WrongSign { .. })));
    }

    #[test]
    fn empty_mode_set_gives_no_matches() {
        let search = ParasiticSearch::new(407.8, 2.1);
        assert!(search.run(&ModeSet::default()).unwrap().is_empty());
        let only_pump = ModeSet {
            pump: vec![flat("p", 2.2)],
            ..Default::default()
        };
        assert!(search.run(&only_pump).unwrap().is_empty());
    }

    #[test]
    fn constructed_single_match() {
        // Build a signal mode whose index makes Λ hit the target exactly at 560 nm and nowhere else.
        let lp = 407.8;
        let target_um = 2.1;
        let pump = flat("P", 2.25);
        let idler = flat("I0", 2.05);
        let hit = 560.0;
        let li = 1.0 / (1.0 / lp - 1.0 / hit);
        // solve n_s(560) from the period formula
        let ns_hit = hit * (2.25 / lp - 2.05 / li - 1.0 / (target_um * 1e3));
        let signal = linear_about("S2", hit, ns_hit, -4e-4);
        let decoy = flat("S0", 1.5);
        let modes = ModeSet {
            pump: vec![pump],
            signal: vec![signal, decoy],
            idler: vec![idler],
        };
        let mut search = ParasiticSearch::new(lp, target_um);
        search.tolerance = 0.0;
        let found = search.run(&modes).unwrap();
        assert_eq!(found.len(), 1, "{found:?}");
        assert_eq!(found[0].signal_mode, "S2");
        assert_relative_eq!(found[0].signal_nm, hit, epsilon = 1e-6);
        assert_relative_eq!(found[0].period_um, target_um, max_relative = 1e-9);
        assert_relative_eq!(found[0].idler_nm, li, max_relative = 1e-9);
    }

    proptest! {
        #[test]
        fn additive_index_offset_leaves_period_unchanged(c in -0.3f64..0.3, ls in 700.0f64..900.0) {
            let lp = 408.0;
            let li = 1.0 / (1.0 / lp - 1.0 / ls);
            let base = qpm_period((&linear("p", 2.4, -2e-4), lp), (&linear("s", 2.2, -1e-4), ls), (&linear("i", 2.2, -1e-4), li), 1).unwrap();
            let shifted = qpm_period((&linear("p", 2.4 + c, -2e-4), lp), (&linear("s", 2.2 + c, -1e-4), ls), (&linear("i", 2.2 + c, -1e-4), li), 1).unwrap();
            prop_assert!(((shifted - base) / base).abs() < 1e-9);
        }

        #[test]
        fn zero_tolerance_returns_only_exact_roots(hit in 540.0f64..590.0, slope in -5e-4f64..-1e-4) {
            let lp = 407.8;
            let target = 2.1;
            let li = 1.0 / (1.0 / lp - 1.0 / hit);
            let ns = hit * (2.25 / lp - 2.05 / li - 1.0 / (target * 1e3));
            let modes = ModeSet {
                pump: vec![flat("P", 2.25)],
                signal: vec![linear_about("S", hit, ns, slope)],
                idler: vec![flat("I", 2.05)],
            };
            let mut search = ParasiticSearch::new(lp, target);
            search.tolerance = 0.0;
            for m in search.run(&modes).unwrap() {
                prop_assert!(m.relative_deviation < 1e-9);
                prop_assert!((m.signal_nm - hit).abs() < 1e-6);
            }
        }
    }
}
