//! Monte Carlo route: Brownian exit times, walk-on-spheres harmonic
//! measure and tail-exponent fits.

mod exit;
mod tail;
mod wos;

use num_complex::Complex64;
use thiserror::Error;

use crate::geometry::{DomainRef, GeometryError};

pub use exit::{calibrate_disk, run_batch, run_batch_with_threads, sample_exit, Simulator};
pub use tail::{
    cross_check, hardy_mc, moment_estimate, tail_fit, CrossCheck, HardyMc, MomentEstimate, TailFit,
    TailMethod,
};
pub use wos::{harmonic_measure_wos, HMEstimate, HitClass};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StochasticError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("start point {0} is not inside the domain")]
    StartOutsideDomain(Complex64),
    #[error("radius {r} does not exceed |z0| = {start}")]
    RadiusTooSmall { r: f64, start: f64 },
    #[error("capped samples reach the fitted region ({capped} capped, {detail})")]
    CapContamination { capped: usize, detail: String },
    #[error("need at least {need} usable samples, have {have}")]
    InsufficientSamples { need: usize, have: usize },
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

pub type Result<T> = std::result::Result<T, StochasticError>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    /// `β` in `Δt = min(β δ², dt_max)`.
    pub step_factor: f64,
    pub dt_max: f64,
    pub eps_absorb: f64,
    pub t_cap: f64,
    /// Stop on `|z| >= r_stop` and report which arc was hit.
    pub r_stop: Option<f64>,
    pub master_seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { step_factor: 0.1, dt_max: 0.01, eps_absorb: 1e-4, t_cap: 1e4, r_stop: None, master_seed: 0 }
    }
}

impl SimConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self { master_seed: seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(StochasticError::InvalidConfig(what.to_string()));
        if !(self.step_factor > 0.0 && self.step_factor <= 0.5) {
            return bad("step_factor must be in (0, 0.5]");
        }
        if !(self.dt_max > 0.0 && self.dt_max.is_finite()) {
            return bad("dt_max must be positive");
        }
        if !(self.eps_absorb > 0.0 && self.eps_absorb.is_finite()) {
            return bad("eps_absorb must be positive");
        }
        if !(self.t_cap > 0.0) {
            return bad("t_cap must be positive");
        }
        if let Some(r) = self.r_stop {
            if !(r > 0.0 && r.is_finite()) {
                return bad("r_stop must be positive");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Hit {
    Ray { tooth: i64, upper: bool },
    /// Sector edge (0 lower, 1 upper) or the half-plane's axis.
    Edge(u8),
    /// Arc of `{|z| = r_stop}` by its index in the circle decomposition.
    Circle(usize),
    Capped,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExitSample {
    pub tau: f64,
    pub exit_point: Complex64,
    pub hit: Hit,
    pub n_steps: u64,
}

impl ExitSample {
    pub fn capped(&self) -> bool {
        self.hit == Hit::Capped
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub domain: DomainRef,
    pub z0: Complex64,
    pub config: SimConfig,
    pub samples: Vec<ExitSample>,
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn capped_count(&self) -> usize {
        self.samples.iter().filter(|s| s.capped()).count()
    }

    pub fn capped_fraction(&self) -> f64 {
        if self.samples.is_empty() {
            0.0
        } else {
            self.capped_count() as f64 / self.samples.len() as f64
        }
    }
}

/// Start point used when none is given: the origin for combs and the slit
/// plane, one unit inside a sector's vertex, `i` for the half-plane.
pub fn default_start(d: &DomainRef) -> Complex64 {
    match d {
        DomainRef::Comb(_) | DomainRef::SlitPlane { .. } => Complex64::new(0.0, 0.0),
        DomainRef::Sector { vertex_x, .. } => Complex64::new(vertex_x + 1.0, 0.0),
        DomainRef::UpperHalfPlane => Complex64::new(0.0, 1.0),
    }
}
