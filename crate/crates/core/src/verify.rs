//! The acceptance suite: numbered checks with pinned tolerances, each
//! reporting what it measured and how long it took.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::constructions::{sector_fit_n, ConstructionError};
use crate::estimators::{hardy_window, harmonic_measure_upper, EstimateError, DEFAULT_TOL};
use crate::geometry::{channel_margin, profile_gap, r0_threshold, theta_profile, CombSpec, DomainRef, GeometryError, Tooth};
use crate::io::{self, IoError};
use crate::stochastic::{
    calibrate_disk, default_start, hardy_mc, harmonic_measure_wos, moment_estimate, run_batch, run_batch_with_threads,
    tail_fit, SampleBatch, SimConfig, StochasticError, TailMethod,
};

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Construction(#[from] ConstructionError),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
    #[error(transparent)]
    Stochastic(#[from] StochasticError),
    #[error(transparent)]
    Io(#[from] IoError),
}

type Result<T> = std::result::Result<T, VerifyError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    /// Geometry, quadrature and construction checks; well under a minute.
    Fast,
    /// Everything, including the Monte Carlo runs.
    Full,
}

impl Suite {
    pub fn ids(self) -> &'static [u8] {
        match self {
            Suite::Fast => &[1, 2, 3, 4, 5, 6, 14],
            Suite::Full => &[1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionReport {
    pub id: u8,
    pub name: &'static str,
    pub measured: String,
    pub tolerance: String,
    pub passed: bool,
    /// Named parts of the criterion; `passed` is their conjunction.
    pub checks: Vec<(String, bool)>,
    pub runtime: Duration,
}

impl CriterionReport {
    pub fn failed_checks(&self) -> Vec<&str> {
        self.checks.iter().filter(|(_, ok)| !ok).map(|(name, _)| name.as_str()).collect()
    }
}

impl fmt::Display for CriterionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "criterion {:>2} {} {:<34} measured: {} | required: {} | {:.1}s",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.tolerance,
            self.runtime.as_secs_f64()
        )?;
        let failed = self.failed_checks();
        if !failed.is_empty() {
            write!(f, " | failed: {}", failed.join("; "))?;
        }
        Ok(())
    }
}

struct Outcome {
    measured: String,
    tolerance: String,
    checks: Vec<(String, bool)>,
}

fn checks<const N: usize>(items: [(&str, bool); N]) -> Vec<(String, bool)> {
    items.into_iter().map(|(name, ok)| (name.to_string(), ok)).collect()
}

pub const NAMES: [&str; 15] = [
    "theta profile vs ray enumeration",
    "case 1 window estimate",
    "profile gap bound",
    "channel arc vs real-axis arc",
    "random combs have h >= 1",
    "case 3 window estimate grows",
    "disk exit time calibration",
    "sector tail exponent",
    "case 1 tail exponent",
    "case 2 tail exponent and moments",
    "case 3 light tails",
    "harmonic measure below its bound",
    "half-plane circle-hit floor",
    "case 2 sector fit",
    "thread-count determinism",
];

/// Runs one criterion. Errors inside a check count as a failure and are
/// reported in the measured column.
pub fn run_criterion(id: u8, seed: u64) -> CriterionReport {
    assert!((1..=15).contains(&id), "no criterion {id}");
    let start = Instant::now();
    let outcome = match id {
        1 => c1_profile_oracle(),
        2 => c2_case1_window(),
        3 => c3_profile_gap(),
        4 => c4_channel_arcs(seed),
        5 => c5_random_combs(seed),
        6 => c6_case3_window(),
        7 => c7_disk(seed),
        8 => c8_sector(seed),
        9 => c9_case1_mc(seed),
        10 => c10_case2_mc(seed),
        11 => c11_case3_mc(seed),
        12 => c12_hm_bound(seed),
        13 => c13_half_plane(seed),
        14 => c14_sector_fit(),
        _ => c15_determinism(seed, 2000),
    };
    let outcome = outcome.unwrap_or_else(|e| Outcome {
        measured: format!("error: {e}"),
        tolerance: "no error".into(),
        checks: checks([("runs without error", false)]),
    });
    CriterionReport {
        id,
        name: NAMES[id as usize - 1],
        measured: outcome.measured,
        tolerance: outcome.tolerance,
        passed: outcome.checks.iter().all(|(_, ok)| *ok),
        checks: outcome.checks,
        runtime: start.elapsed(),
    }
}

pub fn run_suite(suite: Suite, seed: u64, mut on_report: impl FnMut(&CriterionReport)) -> Vec<CriterionReport> {
    suite
        .ids()
        .iter()
        .map(|&id| {
            let r = run_criterion(id, seed);
            on_report(&r);
            r
        })
        .collect()
}

/// Θ(t) straight from the definition: every tooth with |x| <= t + 1 whose
/// upper ray meets the circle cuts it at angle atan2(y, x); the real-axis
/// arc ends at the smallest such angle.
pub fn brute_theta(spec: &CombSpec, t: f64) -> Result<f64> {
    let reach = (t + 1.0).ceil() as i64;
    let mut best = PI;
    let mut blocked = false;
    for n in -4 * reach..=4 * reach {
        let tooth = spec.tooth(n)?;
        if tooth.x.abs() >= t {
            continue;
        }
        let y = (t * t - tooth.x * tooth.x).sqrt();
        if y >= tooth.b {
            blocked = true;
            best = best.min(y.atan2(tooth.x));
        }
    }
    Ok(if blocked { 2.0 * best } else { TAU })
}

fn c1_profile_oracle() -> Result<Outcome> {
    let case3 = CombSpec::case3();
    let case1 = CombSpec::case1(FRAC_PI_2)?;
    let cases = [
        (&case3, 0.5, TAU, 0.0),
        (&case3, 2.0, TAU / 3.0, 1e-12),
        (&case1, 3.0, 2.0 * (2.0f64 / 3.0).acos(), 1e-12),
    ];
    let mut worst = 0.0f64;
    let mut passed = true;
    for (spec, t, expected, tol) in cases {
        let got = theta_profile(spec, t)?.theta;
        let oracle = brute_theta(spec, t)?;
        let err = (got - expected).abs().max((got - oracle).abs());
        worst = worst.max(err);
        passed &= err <= tol;
    }
    Ok(Outcome {
        measured: format!("max deviation {worst:.2e}"),
        tolerance: "exact at t = 0.5, 1e-12 otherwise".into(),
        checks: checks([("matches definition", passed)]),
    })
}

fn c2_case1_window() -> Result<Outcome> {
    let mut parts = Vec::new();
    let mut passed = true;
    for theta in [PI / 3.0, FRAC_PI_2, 0.75 * PI] {
        let est = hardy_window(&CombSpec::case1(theta)?, 1e3, 1e6, DEFAULT_TOL)?;
        let err = (est.h_window - PI / theta).abs();
        passed &= err <= 0.01;
        parts.push(format!("{:.4} (target {:.4})", est.h_window, PI / theta));
    }
    Ok(Outcome { measured: parts.join(", "), tolerance: "|h - pi/theta| <= 0.01".into(), checks: checks([("all three angles", passed)]) })
}

fn c3_profile_gap() -> Result<Outcome> {
    let mut checked = 0;
    let mut violations = 0;
    let mut worst_ratio = 0.0f64;
    for theta in [PI / 3.0, FRAC_PI_2, 2.0 * PI / 3.0] {
        let spec = CombSpec::case1(theta)?;
        for i in 0..200 {
            let t = 2.0 * (5e5f64).powf(i as f64 / 199.0);
            let g = profile_gap(&spec, t)?;
            checked += 1;
            if !(g.gap >= 0.0 && g.gap <= g.bound) {
                violations += 1;
            }
            worst_ratio = worst_ratio.max(g.gap / g.bound);
        }
    }
    Ok(Outcome {
        measured: format!("{violations} violations in {checked}, max gap/bound {worst_ratio:.3}"),
        tolerance: "0 <= gap <= 2/(t sin(theta/2)), no slack".into(),
        checks: checks([("no violations", violations == 0)]),
    })
}

fn c4_channel_arcs(seed: u64) -> Result<Outcome> {
    let spec = CombSpec::case1(FRAC_PI_2)?;
    let r0 = r0_threshold(FRAC_PI_2)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x4c31);
    let (mut done, mut violations, mut min_margin) = (0, 0, f64::INFINITY);
    while done < 1000 {
        let t = r0 * (1e6 / r0).powf(rng.random::<f64>());
        // Tooth k reaches radius t iff sqrt(2) k <= t here.
        let kmax = (t / 2f64.sqrt()).floor() as i64 - 1;
        if kmax < 1 {
            continue;
        }
        let k = rng.random_range(1..=kmax);
        let m = channel_margin(&spec, t, k)?;
        done += 1;
        if m.l_i > m.l_j {
            violations += 1;
        }
        min_margin = min_margin.min(m.l_j - m.l_i);
    }
    Ok(Outcome {
        measured: format!("{violations} violations in {done}, min l_J - l_I = {min_margin:.4}"),
        tolerance: "l_I <= l_J in every case".into(),
        checks: checks([("no violations", violations == 0)]),
    })
}

/// Explicit comb with x-gaps in [1, 3], heights in [0.5, 50], |n| <= 50,
/// continued past both ends.
fn random_comb(rng: &mut ChaCha8Rng) -> Result<CombSpec> {
    let mut teeth = vec![Tooth { n: 0, x: 0.0, b: rng.random_range(0.5..=50.0) }];
    for dir in [1i64, -1] {
        let mut x = 0.0;
        for k in 1..=50 {
            x += dir as f64 * rng.random_range(1.0..=3.0);
            teeth.push(Tooth { n: dir * k, x, b: rng.random_range(0.5..=50.0) });
        }
    }
    Ok(CombSpec::explicit(teeth, Some(1.0), true)?)
}

fn c5_random_combs(seed: u64) -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x4335);
    let (mut worst_theta, mut worst_h) = (0.0f64, f64::INFINITY);
    for _ in 0..20 {
        let spec = random_comb(&mut rng)?;
        let tip = spec.tooth(0)?.tip_radius();
        for i in 0..200 {
            let t = tip * 1e3f64.powf(i as f64 / 199.0);
            let theta = theta_profile(&spec, t)?.theta;
            worst_theta = worst_theta.max(theta);
        }
        let h = hardy_window(&spec, tip, 1e3 * tip, DEFAULT_TOL)?.h_window;
        worst_h = worst_h.min(h);
    }
    Ok(Outcome {
        measured: format!("max theta {worst_theta:.6}, min h_window {worst_h:.6}"),
        tolerance: "theta <= pi, h_window >= 1 - 1e-6".into(),
        checks: checks([("theta <= pi", worst_theta <= PI), ("h_window >= 1", worst_h >= 1.0 - 1e-6)]),
    })
}

fn c6_case3_window() -> Result<Outcome> {
    let spec = CombSpec::case3();
    let h4 = hardy_window(&spec, 1e2, 1e4, DEFAULT_TOL)?.h_window;
    let seq = [1e3, 1e4, 1e5]
        .iter()
        .map(|&r2| Ok(hardy_window(&spec, 1e2, r2, DEFAULT_TOL)?.h_window))
        .collect::<Result<Vec<_>>>()?;
    let increasing = seq.windows(2).all(|w| w[1] > w[0]);
    Ok(Outcome {
        measured: format!("h[1e2,1e4] = {h4:.3}; r2 = 1e3, 1e4, 1e5: {:.3}, {:.3}, {:.3}", seq[0], seq[1], seq[2]),
        tolerance: ">= 40 and increasing".into(),
        checks: checks([("h >= 40", h4 >= 40.0), ("increasing", increasing)]),
    })
}

fn c7_disk(seed: u64) -> Result<Outcome> {
    let mean = calibrate_disk(1.0, 100_000, &SimConfig::with_seed(seed))?;
    Ok(Outcome {
        measured: format!("mean exit time {mean:.4}"),
        tolerance: "[0.49, 0.51]".into(),
        checks: checks([("mean in range", (0.49..=0.51).contains(&mean))]),
    })
}

fn batch(d: &DomainRef, m: usize, cfg: SimConfig) -> Result<SampleBatch> {
    Ok(run_batch(d, default_start(d), &cfg, m)?)
}

fn c8_sector(seed: u64) -> Result<Outcome> {
    let d = DomainRef::sector(FRAC_PI_2, 0.0)?;
    let b = batch(&d, 100_000, SimConfig { t_cap: 1e4, ..SimConfig::with_seed(seed) })?;
    let fit = tail_fit(&b, TailMethod::Hill { k: Some(1000) })?;
    let h = hardy_mc(&fit);
    Ok(Outcome {
        measured: format!("alpha {:.4} +- {:.4}, h {:.3}, capped {}", fit.alpha_hat, fit.stderr, h.h_hat, b.capped_count()),
        tolerance: "alpha in [0.85, 1.15], h in [1.7, 2.3]".into(),
        checks: checks([("alpha in range", (0.85..=1.15).contains(&fit.alpha_hat)), ("h in range", (1.7..=2.3).contains(&h.h_hat))]),
    })
}

fn c9_case1_mc(seed: u64) -> Result<Outcome> {
    let d = DomainRef::Comb(CombSpec::case1(FRAC_PI_2)?);
    let b = batch(&d, 100_000, SimConfig::with_seed(seed))?;
    let fit = tail_fit(&b, TailMethod::Hill { k: Some(1000) })?;
    let h = hardy_mc(&fit);
    // Critical moment is h/2 = 1: finite below, infinite above.
    let below = moment_estimate(&b, 0.5)?;
    let above = moment_estimate(&b, 2.0)?;
    Ok(Outcome {
        measured: format!(
            "h {:.3} (alpha {:.4} +- {:.4}); E tau^0.5 stable {}, E tau^2 stable {}",
            h.h_hat, fit.alpha_hat, fit.stderr, below.stable, above.stable
        ),
        tolerance: "h in [1.6, 2.4], p = 0.5 stable, p = 2 unstable".into(),
        checks: checks([("h in range", (1.6..=2.4).contains(&h.h_hat)), ("p = 0.5 stable", below.stable), ("p = 2 unstable", !above.stable)]),
    })
}

fn c10_case2_mc(seed: u64) -> Result<Outcome> {
    let d = DomainRef::Comb(CombSpec::case2());
    let b = batch(&d, 100_000, SimConfig::with_seed(seed))?;
    // Hill's top order statistics are the capped walks here, so use the
    // survival regression whose window stops below them.
    let fit = tail_fit(&b, TailMethod::survival_default())?;
    let quarter = moment_estimate(&b, 0.25)?;
    let first = moment_estimate(&b, 1.0)?;
    let r = first.running;
    Ok(Outcome {
        measured: format!(
            "alpha {:.4} +- {:.4}, capped {}; p = 0.25 stable {}; p = 1 stable {} (means {:.2}, {:.2}, {:.2})",
            fit.alpha_hat,
            fit.stderr,
            b.capped_count(),
            quarter.stable,
            first.stable,
            r[0],
            r[1],
            r[2]
        ),
        tolerance: "alpha in [0.35, 0.65], p = 0.25 stable, p = 1 unstable".into(),
        checks: checks([("alpha in range", (0.35..=0.65).contains(&fit.alpha_hat)), ("p = 0.25 stable", quarter.stable), ("p = 1 unstable", !first.stable)]),
    })
}

fn c11_case3_mc(seed: u64) -> Result<Outcome> {
    let d = DomainRef::Comb(CombSpec::case3());
    let b = batch(&d, 100_000, SimConfig { t_cap: 1e3, ..SimConfig::with_seed(seed) })?;
    let third = moment_estimate(&b, 3.0)?;
    Ok(Outcome {
        measured: format!("capped fraction {:.1e}, E tau^3 = {:.3} stable {}", b.capped_fraction(), third.value, third.stable),
        tolerance: "capped fraction < 1e-3, p = 3 stable".into(),
        checks: checks([("capped fraction < 1e-3", b.capped_fraction() < 1e-3), ("p = 3 stable", third.stable)]),
    })
}

fn c12_hm_bound(seed: u64) -> Result<Outcome> {
    let spec = CombSpec::case1(FRAC_PI_2)?;
    let bound = harmonic_measure_upper(&spec, 20.0)?;
    let est = harmonic_measure_wos(&DomainRef::Comb(spec), Complex64::new(0.0, 0.0), 20.0, 1_000_000, 1e-5, seed)?;
    let (p, ci) = (est.circle_total(), est.circle_total_ci95());
    Ok(Outcome {
        measured: format!("P(reach |z| = 20) = {p:.5} +- {ci:.5}, bound {bound:.5}"),
        tolerance: "P <= bound + 3 ci95".into(),
        checks: checks([("below bound", p <= bound + 3.0 * ci)]),
    })
}

fn c13_half_plane(seed: u64) -> Result<Outcome> {
    let est = harmonic_measure_wos(&DomainRef::UpperHalfPlane, Complex64::new(0.0, 1.0), 10.0, 1_000_000, 1e-5, seed)?;
    let (p, ci) = (est.circle_total(), est.circle_total_ci95());
    let floor = 2.0 / (10.0 * PI);
    Ok(Outcome {
        measured: format!("P(reach |z| = 10) = {p:.5} +- {ci:.5}, floor {floor:.5}"),
        tolerance: "P >= floor - 3 ci95".into(),
        checks: checks([("above floor", p >= floor - 3.0 * ci)]),
    })
}

fn c14_sector_fit() -> Result<Outcome> {
    let base = sector_fit_n(FRAC_PI_2)?;
    let base_ok = base.n == 1 && (base.alpha - 1.0).abs() < 1e-12 && (base.discriminant() + 7.0).abs() < 1e-12;
    let mut grid_ok = true;
    let mut worst_n = 0;
    for j in 0..50 {
        let eps = 1e-3 * (3.0e3f64).powf(j as f64 / 49.0);
        let fit = sector_fit_n(eps)?;
        worst_n = worst_n.max(fit.n);
        grid_ok &= fit.discriminant() < 0.0;
        // Tips (m, m^2 + 1) must sit on or above y = alpha (x - n); the
        // lower edge is the mirror image.
        grid_ok &= (-10_000i64..=10_000).all(|m| {
            let x = m as f64;
            x * x + 1.0 >= fit.alpha * (x - fit.n as f64)
        });
    }
    Ok(Outcome {
        measured: format!(
            "eps = pi/2: n {}, alpha {:.3}, disc {:.3}; largest n on grid {worst_n}",
            base.n,
            base.alpha,
            base.discriminant()
        ),
        tolerance: "(1, 1, -7); disc < 0 and tips above edges on 50 eps".into(),
        checks: checks([("eps = pi/2 gives (1, 1, -7)", base_ok), ("grid fits clear the tips", grid_ok)]),
    })
}

/// Batch files for one seed written with 1 and 8 worker threads.
fn c15_determinism(seed: u64, m: usize) -> Result<Outcome> {
    let d = DomainRef::Comb(CombSpec::case1(FRAC_PI_2)?);
    let cfg = SimConfig::with_seed(seed);
    let dir = std::env::temp_dir().join(format!("hardylab-verify-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|source| IoError::File { path: dir.clone(), source })?;
    let mut bytes = Vec::new();
    for threads in [1, 8] {
        let b = run_batch_with_threads(&d, default_start(&d), &cfg, m, threads)?;
        let path = dir.join(format!("t{threads}.csv"));
        io::save_batch(&path, &b)?;
        let read = |p: &std::path::Path| std::fs::read(p).map_err(|source| IoError::File { path: p.to_path_buf(), source });
        bytes.push((read(&path)?, read(&io::sidecar_path(&path))?));
    }
    let _ = std::fs::remove_dir_all(&dir);
    let same = bytes[0] == bytes[1];
    Ok(Outcome {
        measured: format!("{m} samples, files identical: {same}"),
        tolerance: "byte-identical".into(),
        checks: checks([("identical", same)]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn brute_theta_agrees_with_profile(t in 0.1f64..300.0, which in 0usize..4) {
            let spec = match which {
                0 => CombSpec::case1(FRAC_PI_2).unwrap(),
                1 => CombSpec::case1(2.5).unwrap(),
                2 => CombSpec::case2(),
                _ => CombSpec::case3(),
            };
            let fast = theta_profile(&spec, t).unwrap().theta;
            let slow = brute_theta(&spec, t).unwrap();
            prop_assert!((fast - slow).abs() < 1e-12, "{} vs {}", fast, slow);
        }
    }

    #[test]
    fn suites() {
        assert!(Suite::Fast.ids().iter().all(|id| Suite::Full.ids().contains(id)));
        assert_eq!(Suite::Full.ids().len(), NAMES.len());
        let r = run_criterion(14, 0);
        assert!(r.passed, "{r}");
        assert!(r.to_string().starts_with("criterion 14 PASS"));
    }
}
