use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::{ExitSample, Hit, Result, SampleBatch, SimConfig, StochasticError};
use crate::geometry::{ArcDecomposition, BoundaryFeature, DomainRef};

/// Random stream of sample `i`: the master seed picks the key, the sample
/// index the stream, and the step count is the position inside it.
pub(crate) fn sample_rng(master_seed: u64, i: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(i);
    rng
}

fn hit_of(feature: BoundaryFeature) -> Hit {
    match feature {
        BoundaryFeature::Ray { tooth, upper } => Hit::Ray { tooth, upper },
        BoundaryFeature::Edge(id) => Hit::Edge(id),
    }
}

/// A domain, start point and config checked once and shared by every
/// sample of a batch.
#[derive(Debug, Clone)]
pub struct Simulator {
    domain: DomainRef,
    z0: Complex64,
    cfg: SimConfig,
    arcs: Option<ArcDecomposition>,
}

impl Simulator {
    pub fn new(domain: DomainRef, z0: Complex64, cfg: SimConfig) -> Result<Self> {
        cfg.validate()?;
        if !domain.contains(z0)? {
            return Err(StochasticError::StartOutsideDomain(z0));
        }
        let arcs = match cfg.r_stop {
            Some(r) if z0.norm() >= r => {
                return Err(StochasticError::RadiusTooSmall { r, start: z0.norm() });
            }
            Some(r) => Some(domain.circle_arcs(r)?),
            None => None,
        };
        Ok(Self { domain, z0, cfg, arcs })
    }

    pub fn domain(&self) -> &DomainRef {
        &self.domain
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    fn circle_hit(&self, z: Complex64) -> Result<(Complex64, Hit)> {
        let (arcs, r) = (self.arcs.as_ref().expect("circle hits need r_stop"), self.cfg.r_stop.unwrap_or(0.0));
        let phi = z.arg();
        let point = Complex64::from_polar(r, phi);
        Ok(match arcs.arc_containing(phi) {
            Some(id) => (point, Hit::Circle(id)),
            // Exactly where a ray meets the circle.
            None => {
                let bp = self.domain.nearest_boundary(point)?;
                (bp.point, hit_of(bp.feature))
            }
        })
    }

    /// Exit time of sample `i`; the same `(master_seed, i)` gives the same
    /// sample bit for bit.
    pub fn sample(&self, i: u64) -> Result<ExitSample> {
        let cfg = &self.cfg;
        let mut rng = sample_rng(cfg.master_seed, i);
        let mut z = self.z0;
        let mut tau = 0.0f64;
        let mut n_steps = 0u64;
        loop {
            if tau >= cfg.t_cap {
                return Ok(ExitSample { tau, exit_point: z, hit: Hit::Capped, n_steps });
            }
            let bp = self.domain.nearest_boundary(z)?;
            let to_circle = cfg.r_stop.map_or(f64::INFINITY, |r| r - z.norm());
            if bp.distance < cfg.eps_absorb || to_circle < cfg.eps_absorb {
                let (exit_point, hit) = if bp.distance <= to_circle {
                    (bp.point, hit_of(bp.feature))
                } else {
                    self.circle_hit(z)?
                };
                return Ok(ExitSample { tau, exit_point, hit, n_steps });
            }
            let d = bp.distance.min(to_circle);
            let dt = (cfg.step_factor * d * d).min(cfg.dt_max);
            let g1: f64 = rng.sample(StandardNormal);
            let g2: f64 = rng.sample(StandardNormal);
            let dz = Complex64::new(g1, g2) * dt.sqrt();
            let w = z + dz;
            n_steps += 1;

            let mut first = self.domain.segment_exit(z, w)?.map(|e| (e.fraction, e.point, hit_of(e.feature)));
            if let Some(r) = cfg.r_stop {
                if w.norm_sqr() >= r * r {
                    // |z + s dz| = r with s in (0, 1].
                    let a = dz.norm_sqr();
                    let b = 2.0 * (z.conj() * dz).re;
                    let c = z.norm_sqr() - r * r;
                    let s = (-b + (b * b - 4.0 * a * c).sqrt()) / (2.0 * a);
                    if first.is_none_or(|(f, _, _)| s < f) {
                        let (point, hit) = self.circle_hit(z + dz * s)?;
                        first = Some((s, point, hit));
                    }
                }
            }
            if let Some((s, exit_point, hit)) = first {
                // Brownian scaling: time to the crossing goes with distance squared.
                tau += dt * s * s;
                if tau >= cfg.t_cap {
                    return Ok(ExitSample { tau, exit_point, hit: Hit::Capped, n_steps });
                }
                return Ok(ExitSample { tau, exit_point, hit, n_steps });
            }
            z = w;
            tau += dt;
        }
    }

    pub fn run(&self, m: usize) -> Result<SampleBatch> {
        let samples = (0..m as u64).into_par_iter().map(|i| self.sample(i)).collect::<Result<Vec<_>>>()?;
        Ok(SampleBatch { domain: self.domain.clone(), z0: self.z0, config: self.cfg, samples })
    }
}

pub fn sample_exit(d: &DomainRef, z0: Complex64, cfg: &SimConfig, i: u64) -> Result<ExitSample> {
    Simulator::new(d.clone(), z0, *cfg)?.sample(i)
}

/// Samples `0..m` on the global rayon pool. The result does not depend on
/// how samples are spread over threads.
pub fn run_batch(d: &DomainRef, z0: Complex64, cfg: &SimConfig, m: usize) -> Result<SampleBatch> {
    Simulator::new(d.clone(), z0, *cfg)?.run(m)
}

/// As [`run_batch`], on a dedicated pool of `threads` workers.
pub fn run_batch_with_threads(
    d: &DomainRef,
    z0: Complex64,
    cfg: &SimConfig,
    m: usize,
    threads: usize,
) -> Result<SampleBatch> {
    let sim = Simulator::new(d.clone(), z0, *cfg)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| StochasticError::InvalidParam(e.to_string()))?;
    pool.install(|| sim.run(m))
}

/// Mean exit time from the centre of a disk of radius `rho`, simulated in
/// a slit plane whose slits start far outside the disk.
pub fn calibrate_disk(rho: f64, m: usize, cfg: &SimConfig) -> Result<f64> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(StochasticError::InvalidParam(format!("rho must be positive, got {rho}")));
    }
    if m == 0 {
        return Err(StochasticError::InsufficientSamples { need: 1, have: 0 });
    }
    let domain = DomainRef::slit_plane(10.0 * rho)?;
    let cfg = SimConfig { r_stop: Some(rho), ..*cfg };
    let batch = run_batch(&domain, Complex64::new(0.0, 0.0), &cfg, m)?;
    Ok(batch.samples.iter().map(|s| s.tau).sum::<f64>() / m as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::CombSpec;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn on_feature(d: &DomainRef, s: &ExitSample, eps: f64) -> bool {
        let p = s.exit_point;
        match (d, s.hit) {
            (DomainRef::Comb(spec), Hit::Ray { tooth, upper }) => {
                let t = spec.tooth(tooth).unwrap();
                (p.re - t.x).abs() <= eps && p.im.abs() >= t.b - eps && (p.im >= 0.0) == upper
            }
            (DomainRef::UpperHalfPlane, Hit::Edge(0)) => p.im.abs() <= eps,
            (DomainRef::Sector { theta, vertex_x }, Hit::Edge(id)) => {
                let want = if id == 1 { theta / 2.0 } else { -theta / 2.0 };
                ((p - vertex_x).arg() - want).abs() <= 1e-6 || (p - vertex_x).norm() <= eps
            }
            (_, Hit::Circle(_)) => true,
            _ => false,
        }
    }

    #[test]
    fn deterministic_per_index() {
        let d = DomainRef::Comb(CombSpec::case1(FRAC_PI_2).unwrap());
        let cfg = SimConfig::with_seed(7);
        let z0 = Complex64::new(0.0, 0.0);
        let a = sample_exit(&d, z0, &cfg, 3).unwrap();
        let b = sample_exit(&d, z0, &cfg, 3).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, sample_exit(&d, z0, &cfg, 4).unwrap());
        let other = SimConfig::with_seed(8);
        assert_ne!(a, sample_exit(&d, z0, &other, 3).unwrap());
    }

    #[test]
    fn batches_ignore_thread_count() {
        let d = DomainRef::Comb(CombSpec::case3());
        let cfg = SimConfig::with_seed(11);
        let z0 = Complex64::new(0.0, 0.0);
        let one = run_batch_with_threads(&d, z0, &cfg, 200, 1).unwrap();
        let four = run_batch_with_threads(&d, z0, &cfg, 200, 4).unwrap();
        assert_eq!(one, four);
        assert!(run_batch(&d, z0, &cfg, 0).unwrap().is_empty());
    }

    #[test]
    fn exits_land_on_the_named_feature() {
        let cfg = SimConfig::with_seed(1);
        for d in [
            DomainRef::Comb(CombSpec::case1(FRAC_PI_2).unwrap()),
            DomainRef::Comb(CombSpec::case2()),
            DomainRef::Comb(CombSpec::case3()),
            DomainRef::UpperHalfPlane,
            DomainRef::sector(PI / 3.0, 0.0).unwrap(),
        ] {
            let z0 = crate::stochastic::default_start(&d);
            let batch = run_batch(&d, z0, &cfg, 300).unwrap();
            for s in batch.samples.iter().filter(|s| !s.capped()) {
                assert!(on_feature(&d, s, cfg.eps_absorb + 1e-9), "{d:?}: {s:?}");
                assert!(s.tau > 0.0);
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let d = DomainRef::Comb(CombSpec::case3());
        let cfg = SimConfig::default();
        assert!(matches!(
            sample_exit(&d, Complex64::new(1.0, 2.0), &cfg, 0),
            Err(StochasticError::StartOutsideDomain(_))
        ));
        let bad = SimConfig { step_factor: 0.9, ..cfg };
        assert!(matches!(sample_exit(&d, Complex64::new(0.0, 0.0), &bad, 0), Err(StochasticError::InvalidConfig(_))));
        let tiny = SimConfig { r_stop: Some(0.5), ..cfg };
        assert!(matches!(
            sample_exit(&d, Complex64::new(0.7, 0.0), &tiny, 0),
            Err(StochasticError::RadiusTooSmall { .. })
        ));
    }

    #[test]
    fn cap_is_respected() {
        let d = DomainRef::sector(FRAC_PI_2, 0.0).unwrap();
        let cfg = SimConfig { t_cap: 0.5, ..SimConfig::with_seed(2) };
        let batch = run_batch(&d, Complex64::new(1.0, 0.0), &cfg, 200).unwrap();
        assert!(batch.capped_count() > 0);
        for s in &batch.samples {
            assert_eq!(s.capped(), s.tau >= cfg.t_cap);
        }
    }

    #[test]
    fn single_disk_sample_is_positive() {
        let v = calibrate_disk(1.0, 1, &SimConfig::with_seed(3)).unwrap();
        assert!(v > 0.0);
    }

    #[test]
    fn disk_mean_scales_with_radius_squared() {
        let cfg = SimConfig::with_seed(5);
        let one = calibrate_disk(1.0, 4000, &cfg).unwrap();
        let two = calibrate_disk(2.0, 4000, &cfg).unwrap();
        assert!((one - 0.5).abs() < 0.03, "{one}");
        assert!((two / one - 4.0).abs() < 0.4, "{two} / {one}");
    }

    #[test]
    fn half_plane_matches_reflection_law() {
        // P(τ <= t) = 2(1 - Φ(1/√t)) for the hitting time of 0 from 1.
        let cfg = SimConfig::with_seed(9);
        let batch = run_batch(&DomainRef::UpperHalfPlane, Complex64::new(0.0, 1.0), &cfg, 20_000).unwrap();
        let mut taus: Vec<f64> = batch.samples.iter().map(|s| s.tau).collect();
        taus.sort_by(f64::total_cmp);
        let median = taus[taus.len() / 2];
        assert!((median - 2.198).abs() < 0.15, "{median}");
        // At t = 1 the law gives 2(1 - Φ(1)) = 0.3173.
        let below = taus.iter().filter(|&&t| t <= 1.0).count() as f64 / taus.len() as f64;
        assert!((below - 0.3173).abs() < 0.015, "{below}");
    }
}
