//! The domain families with known Hardy numbers, the starlike formula and
//! the sector-fitting used for the quadratic comb.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;

use thiserror::Error;

use crate::geometry::{CombRule, CombSpec, DomainRef, GeometryError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConstructionError {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("alpha must be in (0, 2pi], got {0}")]
    InvalidAlpha(f64),
    #[error("no tooth lies to the right of x = {0}")]
    EmptyRight(f64),
    #[error("no closed form for this domain; Hardy number lies in [{lower}, {upper}]")]
    UnknownDomain { lower: f64, upper: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

pub type Result<T> = std::result::Result<T, ConstructionError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HardySource {
    SectorExact,
    StarlikeFormula,
    MainTheoremCase1,
    MainTheoremCase2,
    MainTheoremCase3,
    ContainmentBound,
}

impl HardySource {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::SectorExact => "sector-exact",
            Self::StarlikeFormula => "starlike-formula",
            Self::MainTheoremCase1 => "main-theorem-case1",
            Self::MainTheoremCase2 => "main-theorem-case2",
            Self::MainTheoremCase3 => "main-theorem-case3",
            Self::ContainmentBound => "containment-bound",
        }
    }

    fn is_comb(self) -> bool {
        matches!(self, Self::MainTheoremCase1 | Self::MainTheoremCase2 | Self::MainTheoremCase3)
    }
}

impl fmt::Display for HardySource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A Hardy number in `[1/2, +inf]`; comb values are at least 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoreticalHardy {
    value: f64,
    source: HardySource,
}

impl TheoreticalHardy {
    pub fn new(value: f64, source: HardySource) -> Result<Self> {
        let floor = if source.is_comb() { 1.0 } else { 0.5 };
        if value.is_nan() || value < floor {
            return Err(ConstructionError::InvalidParam(format!(
                "Hardy number {value} is below {floor} for a {source} value"
            )));
        }
        Ok(Self { value, source })
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn source(&self) -> HardySource {
        self.source
    }

    /// Critical exit-time moment order `h/2`.
    pub fn critical_moment(&self) -> f64 {
        self.value / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    Case1 { theta: f64 },
    Case2,
    Case3,
    Sector { theta: f64 },
    SlitPlane { b0: f64 },
    UpperHalfPlane,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Construction {
    pub domain: DomainRef,
    pub theory: TheoreticalHardy,
}

pub fn build(family: Family) -> Result<Construction> {
    let theta_ok = |theta: f64| {
        if theta > 0.0 && theta < PI {
            Ok(theta)
        } else {
            Err(ConstructionError::InvalidParam("theta must be in (0, pi)".into()))
        }
    };
    let domain = match family {
        Family::Case1 { theta } => DomainRef::Comb(CombSpec::case1(theta_ok(theta)?)?),
        Family::Case2 => DomainRef::Comb(CombSpec::case2()),
        Family::Case3 => DomainRef::Comb(CombSpec::case3()),
        Family::Sector { theta } => DomainRef::sector(theta_ok(theta)?, 0.0)?,
        Family::SlitPlane { b0 } => {
            if !(b0 > 0.0 && b0.is_finite()) {
                return Err(ConstructionError::InvalidParam("b0 must be positive".into()));
            }
            DomainRef::slit_plane(b0)?
        }
        Family::UpperHalfPlane => DomainRef::UpperHalfPlane,
    };
    let theory = theoretical_hardy(&domain)?;
    Ok(Construction { domain, theory })
}

/// Exact Hardy number for the constructed families. Explicit combs have no
/// closed form and report `[1, pi / inscribed angle]` through the error.
pub fn theoretical_hardy(d: &DomainRef) -> Result<TheoreticalHardy> {
    match d {
        DomainRef::Sector { theta, .. } => TheoreticalHardy::new(PI / theta, HardySource::SectorExact),
        DomainRef::UpperHalfPlane => TheoreticalHardy::new(1.0, HardySource::SectorExact),
        DomainRef::SlitPlane { b0 } => {
            let limit = alpha_profile(*b0, 2.0 * b0 + 1.0);
            starlike_hardy(limit)
        }
        DomainRef::Comb(spec) => match spec.rule() {
            CombRule::Case1 { theta } => TheoreticalHardy::new(PI / theta, HardySource::MainTheoremCase1),
            CombRule::Case2 => TheoreticalHardy::new(1.0, HardySource::MainTheoremCase2),
            CombRule::Case3 => TheoreticalHardy::new(f64::INFINITY, HardySource::MainTheoremCase3),
            CombRule::Explicit { .. } => {
                let upper = match inscribed_sector_angle(spec, 0.0) {
                    Ok(angle) => PI / angle,
                    // A half-plane fits: the containment bound is already 1.
                    Err(ConstructionError::EmptyRight(_)) => 1.0,
                    Err(e) => return Err(e),
                };
                Err(ConstructionError::UnknownDomain { lower: 1.0, upper })
            }
        },
    }
}

/// Largest subarc of the slit plane `C \ {iy : |y| >= b0}` on `|z| = t`.
pub fn alpha_profile(b0: f64, t: f64) -> f64 {
    if t <= b0 {
        TAU
    } else {
        PI
    }
}

/// Hardy number of a starlike domain from the limit of its largest arc.
pub fn starlike_hardy(alpha_limit: f64) -> Result<TheoreticalHardy> {
    if !(alpha_limit > 0.0 && alpha_limit <= TAU) {
        return Err(ConstructionError::InvalidAlpha(alpha_limit));
    }
    TheoreticalHardy::new(PI / alpha_limit, HardySource::StarlikeFormula)
}

/// Opening of the widest right-facing sector with vertex `(vertex_x, 0)`
/// inside the comb. Teeth at the vertex abscissa are ignored: the sector's
/// closure meets that line only at the vertex.
pub fn inscribed_sector_angle(spec: &CombSpec, vertex_x: f64) -> Result<f64> {
    let half = |x: f64, b: f64| (b / (x - vertex_x)).atan();
    let mut best = f64::INFINITY;
    match spec.rule() {
        CombRule::Explicit { teeth, extend } => {
            for tooth in teeth.iter().filter(|t| t.x > vertex_x) {
                best = best.min(half(tooth.x, tooth.b));
            }
            if *extend {
                // Constant height with growing distance: the infimum is 0.
                best = 0.0;
            }
        }
        rule => {
            let limit = match rule {
                CombRule::Case1 { theta } => theta / 2.0,
                CombRule::Case2 => FRAC_PI_2,
                _ => 0.0,
            };
            best = limit;
            // For every rule family b_n/(x_n - v) is monotone or convex in n
            // with its minimum near v + sqrt(v^2 + 1); this window covers it.
            let first = spec.floor_index(vertex_x) + 1;
            let last = first + 4 * vertex_x.abs().ceil() as i64 + 1000;
            for n in first..=last {
                let tooth = spec.tooth(n)?;
                best = best.min(half(tooth.x, tooth.b));
            }
        }
    }
    if best.is_infinite() {
        return Err(ConstructionError::EmptyRight(vertex_x));
    }
    Ok(2.0 * best)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectorFit {
    /// Vertex abscissa of the fitted sector.
    pub n: u64,
    /// Slope `tan((pi - eps)/2)` of its upper edge.
    pub alpha: f64,
}

impl SectorFit {
    /// `alpha^2 - 4(1 + alpha n)`; negative iff the edge misses `y = x^2 + 1`.
    pub fn discriminant(&self) -> f64 {
        self.alpha * self.alpha - 4.0 * (1.0 + self.alpha * self.n as f64)
    }
}

/// Smallest vertex `n >= 1` for which the sector of opening `pi - eps`
/// stays below the tips `y = x^2 + 1` of the quadratic comb.
pub fn sector_fit_n(eps: f64) -> Result<SectorFit> {
    if !(eps > 0.0 && eps < PI) {
        return Err(ConstructionError::InvalidParam(format!("eps must be in (0, pi), got {eps}")));
    }
    let alpha = ((PI - eps) / 2.0).tan();
    let threshold = (alpha * alpha - 4.0) / (4.0 * alpha);
    let mut n = if threshold < 1.0 { 1 } else { threshold.floor() as u64 + 1 };
    // Guard against rounding right at the threshold.
    while (SectorFit { n, alpha }).discriminant() >= 0.0 {
        n += 1;
    }
    Ok(SectorFit { n, alpha })
}
