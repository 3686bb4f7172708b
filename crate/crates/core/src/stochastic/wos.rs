use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use super::exit::sample_rng;
use super::{Result, StochasticError};
use crate::geometry::DomainRef;

/// Where a walk-on-spheres path stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum HitClass {
    /// Arc of `{|z| = r}` by index in the circle decomposition.
    Arc(usize),
    /// Any ray or edge of the domain.
    Boundary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HMEstimate {
    pub r: f64,
    /// One entry per arc, then the domain boundary last.
    pub classes: Vec<HitClass>,
    pub probabilities: Vec<f64>,
    pub ci95: Vec<f64>,
    pub m: usize,
}

impl HMEstimate {
    /// Probability of reaching the circle on any arc.
    pub fn circle_total(&self) -> f64 {
        self.classes
            .iter()
            .zip(&self.probabilities)
            .filter(|(c, _)| matches!(c, HitClass::Arc(_)))
            .map(|(_, p)| p)
            .sum()
    }

    /// Binomial 95% half-width of [`circle_total`](Self::circle_total).
    pub fn circle_total_ci95(&self) -> f64 {
        let p = self.circle_total();
        1.96 * (p * (1.0 - p) / self.m as f64).sqrt()
    }
}

/// Harmonic measure at `z0` of the arcs of `D ∩ {|z| = r}` in the stopped
/// domain `D ∩ {|z| < r}`, by walk on spheres stopped in an `eps` shell.
pub fn harmonic_measure_wos(d: &DomainRef, z0: Complex64, r: f64, m: usize, eps: f64, seed: u64) -> Result<HMEstimate> {
    if !d.contains(z0)? {
        return Err(StochasticError::StartOutsideDomain(z0));
    }
    if !(r > z0.norm()) {
        return Err(StochasticError::RadiusTooSmall { r, start: z0.norm() });
    }
    if !(eps > 0.0) {
        return Err(StochasticError::InvalidParam(format!("eps must be positive, got {eps}")));
    }
    if m == 0 {
        return Err(StochasticError::InsufficientSamples { need: 1, have: 0 });
    }
    let arcs = d.circle_arcs(r)?;
    let walk = |i: u64| -> Result<HitClass> {
        let mut rng = sample_rng(seed, i);
        let mut z = z0;
        loop {
            let to_boundary = d.nearest_boundary(z)?.distance;
            let to_circle = r - z.norm();
            let rho = to_boundary.min(to_circle);
            if rho < eps {
                if to_circle < to_boundary {
                    if let Some(id) = arcs.arc_containing(z.arg()) {
                        return Ok(HitClass::Arc(id));
                    }
                }
                return Ok(HitClass::Boundary);
            }
            let phi: f64 = rng.random::<f64>() * TAU;
            z += Complex64::from_polar(rho, phi);
        }
    };
    let hits = (0..m as u64).into_par_iter().map(walk).collect::<Result<Vec<_>>>()?;
    let mut counts = vec![0usize; arcs.arcs.len() + 1];
    for hit in hits {
        match hit {
            HitClass::Arc(id) => counts[id] += 1,
            HitClass::Boundary => counts[arcs.arcs.len()] += 1,
        }
    }
    let classes: Vec<HitClass> =
        (0..arcs.arcs.len()).map(HitClass::Arc).chain(std::iter::once(HitClass::Boundary)).collect();
    let probabilities: Vec<f64> = counts.iter().map(|&c| c as f64 / m as f64).collect();
    let ci95 = probabilities.iter().map(|p| 1.96 * (p * (1.0 - p) / m as f64).sqrt()).collect();
    Ok(HMEstimate { r, classes, probabilities, ci95, m })
}
