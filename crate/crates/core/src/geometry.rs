//! Comb domains and the circle geometry behind the angular-width profile.
//!
//! A comb is the plane minus the vertical rays `{x_n + iy : |y| >= b_n}`.
//! Infinite combs are described by rules evaluated on demand, so every
//! query only touches the teeth inside its own window. The three rule
//! families use `x_n = n`; explicit combs carry a finite tooth list and
//! optionally continue it by repeating the outermost gap and height.
//!
//! Angles live in `(-pi, pi]`. An arc that crosses the cut at `pi` keeps
//! `phi_lo < phi_hi` by letting `phi_hi` run past `pi`.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("tooth index {n} is outside the represented range [{lo}, {hi}]")]
    IndexOutOfRange { n: i64, lo: i64, hi: i64 },
    #[error("query window [{lo}, {hi}] leaves the represented teeth")]
    WindowOutOfRange { lo: f64, hi: f64 },
    #[error("point {0} is not inside the domain")]
    OutsideDomain(Complex64),
    #[error("invalid comb: {0}")]
    InvalidSpec(String),
    #[error("theta must be in (0, pi), got {0}")]
    InvalidAngle(f64),
    #[error("radius must be positive, got {0}")]
    InvalidRadius(f64),
    #[error("invalid target arc: {0}")]
    InvalidTarget(String),
    #[error("ray x = {x} does not reach the circle of radius {t}")]
    NoCrossing { x: f64, t: f64 },
    #[error("operation requires a case-1 comb")]
    NotCase1,
}

pub type Result<T> = std::result::Result<T, GeometryError>;

/// One symmetric pair of rays `{x + iy : |y| >= b}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tooth {
    pub n: i64,
    pub x: f64,
    pub b: f64,
}

impl Tooth {
    /// Distance from the origin to the ray tips `x ± ib`.
    pub fn tip_radius(&self) -> f64 {
        self.x.hypot(self.b)
    }

    /// Whether the circle `|z| = t` meets this tooth.
    #[inline]
    pub fn reaches(&self, t: f64) -> bool {
        self.x.abs() < t && (t * t - self.x * self.x).sqrt() >= self.b
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CombRule {
    /// `x_n = n`, `b_0 = 1`, `b_n = |n| tan(theta/2)`.
    Case1 { theta: f64 },
    /// `x_n = n`, `b_n = n^2 + 1`.
    Case2,
    /// `x_n = n`, `b_n = 1`.
    Case3,
    /// Contiguous indices containing 0, with `x_0 = 0`.
    Explicit { teeth: Vec<Tooth>, extend: bool },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CombSpec {
    rule: CombRule,
    min_gap: f64,
}

impl CombSpec {
    pub fn case1(theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta < PI) {
            return Err(GeometryError::InvalidAngle(theta));
        }
        Ok(Self { rule: CombRule::Case1 { theta }, min_gap: 1.0 })
    }

    pub fn case2() -> Self {
        Self { rule: CombRule::Case2, min_gap: 1.0 }
    }

    pub fn case3() -> Self {
        Self { rule: CombRule::Case3, min_gap: 1.0 }
    }

    /// Builds an explicit comb. `min_gap` defaults to the smallest gap in
    /// the list; when given it must not exceed that gap. With `extend`, the
    /// teeth continue beyond both ends with the outermost gap and height.
    pub fn explicit(mut teeth: Vec<Tooth>, min_gap: Option<f64>, extend: bool) -> Result<Self> {
        let invalid = |msg: String| Err(GeometryError::InvalidSpec(msg));
        teeth.sort_by_key(|t| t.n);
        let Some(first) = teeth.first() else {
            return invalid("no teeth".into());
        };
        let lo = first.n;
        for (i, t) in teeth.iter().enumerate() {
            if t.n != lo + i as i64 {
                return invalid(format!("tooth indices must be contiguous, missing {}", lo + i as i64));
            }
            if !(t.b > 0.0 && t.b.is_finite()) {
                return invalid(format!("b_{} = {} must be positive", t.n, t.b));
            }
            if !t.x.is_finite() {
                return invalid(format!("x_{} is not finite", t.n));
            }
        }
        match teeth.iter().find(|t| t.n == 0) {
            Some(t) if t.x == 0.0 => {}
            Some(t) => return invalid(format!("x_0 must be 0, got {}", t.x)),
            None => return invalid("tooth n = 0 is missing".into()),
        }
        let mut smallest = f64::INFINITY;
        for w in teeth.windows(2) {
            let gap = w[1].x - w[0].x;
            if !(gap > 0.0) {
                return invalid(format!("x must be strictly increasing at n = {}", w[1].n));
            }
            smallest = smallest.min(gap);
        }
        if extend && (teeth.first().unwrap().n >= 0 || teeth.last().unwrap().n <= 0) {
            return invalid("extension needs at least one tooth on each side of 0".into());
        }
        let min_gap = match min_gap {
            Some(g) if !(g > 0.0) => return invalid(format!("min_gap must be positive, got {g}")),
            Some(g) if g > smallest => {
                return invalid(format!("gap {smallest} is below min_gap {g}"));
            }
            Some(g) => g,
            None if smallest.is_finite() => smallest,
            None => 1.0,
        };
        Ok(Self { rule: CombRule::Explicit { teeth, extend }, min_gap })
    }

    pub fn rule(&self) -> &CombRule {
        &self.rule
    }

    pub fn min_gap(&self) -> f64 {
        self.min_gap
    }

    /// Opening of the sector this comb imitates, for case-1 combs.
    pub fn case1_theta(&self) -> Option<f64> {
        match self.rule {
            CombRule::Case1 { theta } => Some(theta),
            _ => None,
        }
    }

    /// Half-gap of the tooth at the origin; also its tip radius.
    pub fn b0(&self) -> f64 {
        self.tooth(0).expect("tooth 0 always exists").b
    }

    pub fn is_rule_based(&self) -> bool {
        !matches!(self.rule, CombRule::Explicit { .. })
    }

    pub fn tooth(&self, n: i64) -> Result<Tooth> {
        let nf = n as f64;
        let b = match &self.rule {
            CombRule::Case1 { theta } => {
                if n == 0 {
                    1.0
                } else {
                    nf.abs() * (theta / 2.0).tan()
                }
            }
            CombRule::Case2 => nf * nf + 1.0,
            CombRule::Case3 => 1.0,
            CombRule::Explicit { teeth, extend } => {
                let lo = teeth[0].n;
                let hi = teeth[teeth.len() - 1].n;
                if (lo..=hi).contains(&n) {
                    return Ok(teeth[(n - lo) as usize]);
                }
                if !extend {
                    return Err(GeometryError::IndexOutOfRange { n, lo, hi });
                }
                return Ok(extended_tooth(teeth, n));
            }
        };
        Ok(Tooth { n, x: nf, b })
    }

    /// Largest index `n` with `x_n <= x`. For a non-extended explicit comb
    /// the result may name a tooth that is not represented.
    pub fn floor_index(&self, x: f64) -> i64 {
        match &self.rule {
            CombRule::Explicit { teeth, extend } => {
                let first = teeth[0];
                let last = teeth[teeth.len() - 1];
                if x < first.x {
                    if !extend {
                        return first.n - 1;
                    }
                    let gap = teeth[1].x - first.x;
                    let guess = first.n - ((first.x - x) / gap).ceil() as i64;
                    self.settle_floor(guess, x)
                } else if x >= last.x {
                    if !extend {
                        return last.n;
                    }
                    let gap = last.x - teeth[teeth.len() - 2].x;
                    let guess = last.n + ((x - last.x) / gap).floor() as i64;
                    self.settle_floor(guess, x)
                } else {
                    first.n + teeth.partition_point(|t| t.x <= x) as i64 - 1
                }
            }
            _ => x.floor() as i64,
        }
    }

    fn settle_floor(&self, mut n: i64, x: f64) -> i64 {
        let at = |n: i64| self.tooth(n).map(|t| t.x).unwrap_or(f64::NAN);
        while at(n) > x {
            n -= 1;
        }
        while at(n + 1) <= x {
            n += 1;
        }
        n
    }

    fn check_window(&self, lo: f64, hi: f64) -> Result<()> {
        if let CombRule::Explicit { teeth, extend: false } = &self.rule {
            if lo < teeth[0].x || hi > teeth[teeth.len() - 1].x {
                return Err(GeometryError::WindowOutOfRange { lo, hi });
            }
        }
        Ok(())
    }

    /// Teeth with `lo <= x_n <= hi`, in increasing `x`.
    pub fn teeth_in(&self, lo: f64, hi: f64) -> Result<TeethIter<'_>> {
        self.check_window(lo, hi)?;
        let f = self.floor_index(lo);
        let first = if self.tooth(f).map(|t| t.x == lo).unwrap_or(false) { f } else { f + 1 };
        let last = self.floor_index(hi);
        Ok(TeethIter { spec: self, next: first, last })
    }

    /// The tooth with the largest abscissa among those meeting `|z| = t`.
    /// Its crossing angle `arccos(x/t)` bounds the real-axis arc.
    pub fn innermost_blocking(&self, t: f64) -> Result<Option<Tooth>> {
        match &self.rule {
            CombRule::Explicit { teeth, extend } => {
                self.check_window(-t, t)?;
                let last = teeth[teeth.len() - 1];
                if *extend && last.x < t {
                    let gap = last.x - teeth[teeth.len() - 2].x;
                    let span = ((t - last.x) / gap).ceil() as i64 + 1;
                    if let Some(j) = last_reaching(1, span, t, |j| extended_tooth(teeth, last.n + j)) {
                        return Ok(Some(extended_tooth(teeth, last.n + j)));
                    }
                }
                if let Some(tooth) = teeth.iter().rev().find(|tooth| tooth.reaches(t)) {
                    return Ok(Some(*tooth));
                }
                if *extend {
                    let left = extended_tooth(teeth, teeth[0].n - 1);
                    if left.reaches(t) {
                        return Ok(Some(left));
                    }
                }
                Ok(None)
            }
            _ => {
                let span = t.ceil() as i64;
                if let Some(n) = last_reaching(1, span, t, |n| self.rule_tooth(n)) {
                    return Ok(Some(self.rule_tooth(n)));
                }
                let zero = self.rule_tooth(0);
                Ok(zero.reaches(t).then_some(zero))
            }
        }
    }

    /// Number of teeth meeting `|z| = t`; each contributes two crossings.
    pub fn blocking_count(&self, t: f64) -> Result<usize> {
        match &self.rule {
            CombRule::Explicit { teeth, extend } => {
                self.check_window(-t, t)?;
                let mut count = teeth.iter().filter(|tooth| tooth.reaches(t)).count();
                if *extend {
                    let (first, last) = (teeth[0], teeth[teeth.len() - 1]);
                    let gap_r = last.x - teeth[teeth.len() - 2].x;
                    let span_r = ((t - last.x) / gap_r).ceil().max(0.0) as i64 + 1;
                    if let Some(j) = last_reaching(1, span_r, t, |j| extended_tooth(teeth, last.n + j)) {
                        count += j as usize;
                    }
                    let gap_l = teeth[1].x - first.x;
                    let span_l = ((t + first.x) / gap_l).ceil().max(0.0) as i64 + 1;
                    if let Some(j) = last_reaching(1, span_l, t, |j| extended_tooth(teeth, first.n - j)) {
                        count += j as usize;
                    }
                }
                Ok(count)
            }
            _ => {
                let span = t.ceil() as i64;
                Ok(match last_reaching(1, span, t, |n| self.rule_tooth(n)) {
                    Some(n) => 2 * n as usize + 1,
                    None => usize::from(self.rule_tooth(0).reaches(t)),
                })
            }
        }
    }

    /// Tip radii in `(r1, r2)`: the only radii where the set of teeth
    /// meeting the circle changes. Sorted and deduplicated.
    pub fn tip_radii_between(&self, r1: f64, r2: f64) -> Result<Vec<f64>> {
        let mut out = Vec::new();
        match &self.rule {
            CombRule::Explicit { teeth, extend } => {
                self.check_window(-r2, r2)?;
                out.extend(teeth.iter().map(Tooth::tip_radius).filter(|&r| r > r1 && r < r2));
                if *extend {
                    let (first, last) = (teeth[0], teeth[teeth.len() - 1]);
                    for (base, step) in [(last.n, 1i64), (first.n, -1i64)] {
                        let mut j = 1i64;
                        loop {
                            let tooth = extended_tooth(teeth, base + step * j);
                            if tooth.x.abs() >= r2 {
                                break;
                            }
                            let r = tooth.tip_radius();
                            if r > r1 && r < r2 {
                                out.push(r);
                            }
                            j += 1;
                        }
                    }
                }
            }
            _ => {
                // Tip radii grow with |n| and are symmetric in n.
                let mut n = first_tip_above(r1, |n| self.rule_tooth(n).tip_radius());
                loop {
                    let r = self.rule_tooth(n).tip_radius();
                    if r >= r2 {
                        break;
                    }
                    if r > r1 {
                        out.push(r);
                    }
                    n += 1;
                }
            }
        }
        out.sort_by(f64::total_cmp);
        out.dedup();
        Ok(out)
    }

    fn rule_tooth(&self, n: i64) -> Tooth {
        self.tooth(n).expect("rule-based teeth exist for every index")
    }

    /// For rule families whose heights do not decrease in `|n|` away from
    /// the origin: the largest `|n| >= 1` with `b_n <= h`, or 0 if none.
    fn height_bound(&self, h: f64) -> Option<i64> {
        let bound = match &self.rule {
            CombRule::Case1 { theta } => (h / (theta / 2.0).tan()).floor(),
            CombRule::Case2 => (h - 1.0).max(0.0).sqrt().floor(),
            _ => return None,
        };
        Some(if bound >= i64::MAX as f64 { i64::MAX } else { bound as i64 })
    }

    /// Nearest boundary point of the comb to `z`, without a membership check.
    pub fn nearest_boundary(&self, z: Complex64) -> Result<BoundaryPoint> {
        let ay = z.im.abs();
        let k = self.floor_index(z.re);
        let mut best = BoundaryPoint {
            distance: f64::INFINITY,
            point: z,
            feature: BoundaryFeature::Ray { tooth: 0, upper: true },
        };
        let consider = |best: &mut BoundaryPoint, tooth: Tooth| {
            let d = (z.re - tooth.x).abs().hypot((tooth.b - ay).max(0.0));
            if d < best.distance {
                let upper = z.im >= 0.0;
                let y = ay.max(tooth.b);
                *best = BoundaryPoint {
                    distance: d,
                    point: Complex64::new(tooth.x, if upper { y } else { -y }),
                    feature: BoundaryFeature::Ray { tooth: tooth.n, upper },
                };
            }
        };
        // Teeth taller than |y| + best cannot win. When heights grow with
        // |n|, seed with the tallest tooth below |y| and skip the rest.
        let pruned = self.height_bound(ay).is_some();
        if pruned {
            let j = self.height_bound(ay).unwrap_or(0).min(k.abs().max((k + 1).abs()));
            consider(&mut best, self.tooth(0)?);
            consider(&mut best, self.tooth(if z.re >= 0.0 { j } else { -j })?);
        }
        for step in [-1i64, 1] {
            let mut n = if step < 0 { k } else { k + 1 };
            loop {
                if pruned && n != 0 {
                    let bound = self.height_bound(ay + best.distance).unwrap_or(i64::MAX);
                    if n.abs() > bound {
                        if (n > 0) == (step > 0) {
                            // Moving outward: every further tooth is taller.
                            break;
                        }
                        n = if n > 0 { bound } else { -bound };
                    }
                }
                let tooth = self.tooth(n)?;
                if (z.re - tooth.x) * -(step as f64) >= best.distance {
                    break;
                }
                consider(&mut best, tooth);
                n += step;
            }
        }
        Ok(best)
    }

    pub fn contains(&self, z: Complex64) -> Result<bool> {
        let tooth = self.tooth(self.floor_index(z.re))?;
        Ok(!(tooth.x == z.re && z.im.abs() >= tooth.b))
    }

    /// First point where the segment `a -> b` meets a ray, as the fraction
    /// of the segment travelled.
    fn segment_exit(&self, a: Complex64, b: Complex64) -> Result<Option<Exit>> {
        let dx = b.re - a.re;
        if dx == 0.0 {
            return Ok(None);
        }
        let hit = |tooth: Tooth| {
            let s = (tooth.x - a.re) / dx;
            let y = a.im + s * (b.im - a.im);
            (s > 0.0 && y.abs() >= tooth.b).then(|| Exit {
                fraction: s,
                point: Complex64::new(tooth.x, y),
                feature: BoundaryFeature::Ray { tooth: tooth.n, upper: y >= 0.0 },
            })
        };
        let teeth = self.teeth_in(a.re.min(b.re), a.re.max(b.re))?;
        Ok(if dx > 0.0 { teeth.filter_map(hit).next() } else { teeth.rev().filter_map(hit).next() })
    }
}

fn extended_tooth(teeth: &[Tooth], n: i64) -> Tooth {
    let (first, last) = (teeth[0], teeth[teeth.len() - 1]);
    if n > last.n {
        let gap = last.x - teeth[teeth.len() - 2].x;
        Tooth { n, x: last.x + (n - last.n) as f64 * gap, b: last.b }
    } else if n < first.n {
        let gap = teeth[1].x - first.x;
        Tooth { n, x: first.x - (first.n - n) as f64 * gap, b: first.b }
    } else {
        teeth[(n - first.n) as usize]
    }
}

/// Largest `j` in `[lo, hi]` whose tooth reaches `t`, assuming reach is
/// monotone (true on a prefix of the range).
fn last_reaching(lo: i64, hi: i64, t: f64, tooth: impl Fn(i64) -> Tooth) -> Option<i64> {
    if hi < lo || !tooth(lo).reaches(t) {
        return None;
    }
    if tooth(hi).reaches(t) {
        return Some(hi);
    }
    let (mut ok, mut bad) = (lo, hi);
    while bad - ok > 1 {
        let mid = ok + (bad - ok) / 2;
        if tooth(mid).reaches(t) {
            ok = mid;
        } else {
            bad = mid;
        }
    }
    Some(ok)
}

/// Smallest `n >= 0` with `tip(n) > r`, for increasing `tip`.
fn first_tip_above(r: f64, tip: impl Fn(i64) -> f64) -> i64 {
    if tip(0) > r {
        return 0;
    }
    let mut hi = 1i64;
    while tip(hi) <= r {
        hi *= 2;
    }
    let mut lo = hi / 2;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if tip(mid) > r {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

#[derive(Debug, Clone)]
pub struct TeethIter<'a> {
    spec: &'a CombSpec,
    next: i64,
    last: i64,
}

impl Iterator for TeethIter<'_> {
    type Item = Tooth;

    fn next(&mut self) -> Option<Tooth> {
        if self.next > self.last {
            return None;
        }
        let tooth = self.spec.tooth(self.next).ok()?;
        self.next += 1;
        Some(tooth)
    }
}

impl DoubleEndedIterator for TeethIter<'_> {
    fn next_back(&mut self) -> Option<Tooth> {
        if self.next > self.last {
            return None;
        }
        let tooth = self.spec.tooth(self.last).ok()?;
        self.last -= 1;
        Some(tooth)
    }
}

/// Boundary piece a path can be absorbed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryFeature {
    /// Upper or lower ray of tooth `tooth` (the slit plane has tooth 0 only).
    Ray { tooth: i64, upper: bool },
    /// Sector edges (0 lower, 1 upper) or the real axis of the half-plane.
    Edge(u8),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPoint {
    pub distance: f64,
    pub point: Complex64,
    pub feature: BoundaryFeature,
}

/// Where a straight move leaves the domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exit {
    pub fraction: f64,
    pub point: Complex64,
    pub feature: BoundaryFeature,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DomainRef {
    Comb(CombSpec),
    Sector { theta: f64, vertex_x: f64 },
    SlitPlane { b0: f64 },
    UpperHalfPlane,
}

impl DomainRef {
    pub fn sector(theta: f64, vertex_x: f64) -> Result<Self> {
        if !(theta > 0.0 && theta < PI) {
            return Err(GeometryError::InvalidAngle(theta));
        }
        Ok(Self::Sector { theta, vertex_x })
    }

    pub fn slit_plane(b0: f64) -> Result<Self> {
        if !(b0 > 0.0 && b0.is_finite()) {
            return Err(GeometryError::InvalidSpec(format!("b0 must be positive, got {b0}")));
        }
        Ok(Self::SlitPlane { b0 })
    }

    pub fn as_comb(&self) -> Option<&CombSpec> {
        match self {
            Self::Comb(spec) => Some(spec),
            _ => None,
        }
    }

    /// Open-domain membership; points on a ray count as outside.
    pub fn contains(&self, z: Complex64) -> Result<bool> {
        Ok(match self {
            Self::Comb(spec) => return spec.contains(z),
            Self::Sector { theta, vertex_x } => {
                let w = z - vertex_x;
                w != Complex64::new(0.0, 0.0) && w.arg().abs() < theta / 2.0
            }
            Self::SlitPlane { b0 } => !(z.re == 0.0 && z.im.abs() >= *b0),
            Self::UpperHalfPlane => z.im > 0.0,
        })
    }

    /// Nearest boundary point, without checking that `z` is inside.
    pub fn nearest_boundary(&self, z: Complex64) -> Result<BoundaryPoint> {
        Ok(match self {
            Self::Comb(spec) => return spec.nearest_boundary(z),
            Self::Sector { theta, vertex_x } => {
                let w = z - vertex_x;
                let mut best: Option<BoundaryPoint> = None;
                for (id, sign) in [(0u8, -1.0), (1u8, 1.0)] {
                    let u = Complex64::from_polar(1.0, sign * theta / 2.0);
                    let s = (w * u.conj()).re.max(0.0);
                    let foot = u * s;
                    let d = (w - foot).norm();
                    if best.is_none_or(|b| d < b.distance) {
                        best = Some(BoundaryPoint {
                            distance: d,
                            point: foot + vertex_x,
                            feature: BoundaryFeature::Edge(id),
                        });
                    }
                }
                best.expect("two edges")
            }
            Self::SlitPlane { b0 } => {
                let upper = z.im >= 0.0;
                let y = z.im.abs().max(*b0);
                BoundaryPoint {
                    distance: z.re.abs().hypot((b0 - z.im.abs()).max(0.0)),
                    point: Complex64::new(0.0, if upper { y } else { -y }),
                    feature: BoundaryFeature::Ray { tooth: 0, upper },
                }
            }
            Self::UpperHalfPlane => BoundaryPoint {
                distance: z.im.max(0.0),
                point: Complex64::new(z.re, 0.0),
                feature: BoundaryFeature::Edge(0),
            },
        })
    }

    /// Euclidean distance from an interior point to the boundary.
    pub fn boundary_distance(&self, z: Complex64) -> Result<f64> {
        if !self.contains(z)? {
            return Err(GeometryError::OutsideDomain(z));
        }
        Ok(self.nearest_boundary(z)?.distance)
    }

    /// First boundary point met by the segment `a -> b` (with `a` inside).
    pub fn segment_exit(&self, a: Complex64, b: Complex64) -> Result<Option<Exit>> {
        match self {
            Self::Comb(spec) => spec.segment_exit(a, b),
            Self::Sector { theta, vertex_x } => {
                let (wa, wb) = (a - vertex_x, b - vertex_x);
                let mut first: Option<Exit> = None;
                for (id, sign) in [(0u8, -1.0), (1u8, 1.0)] {
                    let u = Complex64::from_polar(1.0, sign * theta / 2.0);
                    // Positive inside: the point lies on the interior side of the edge line.
                    let side = |w: Complex64| -sign * (w * u.conj()).im;
                    let (ga, gb) = (side(wa), side(wb));
                    if gb <= 0.0 && ga > 0.0 {
                        let s = ga / (ga - gb);
                        if first.is_none_or(|e| s < e.fraction) {
                            let w = wa + (wb - wa) * s;
                            let foot = u * (w * u.conj()).re.max(0.0);
                            first = Some(Exit {
                                fraction: s,
                                point: foot + vertex_x,
                                feature: BoundaryFeature::Edge(id),
                            });
                        }
                    }
                }
                Ok(first)
            }
            Self::SlitPlane { b0 } => {
                let crosses = (a.re < 0.0 && b.re >= 0.0) || (a.re > 0.0 && b.re <= 0.0);
                if !crosses {
                    return Ok(None);
                }
                let s = a.re / (a.re - b.re);
                let y = a.im + s * (b.im - a.im);
                Ok((y.abs() >= *b0).then(|| Exit {
                    fraction: s,
                    point: Complex64::new(0.0, y),
                    feature: BoundaryFeature::Ray { tooth: 0, upper: y >= 0.0 },
                }))
            }
            Self::UpperHalfPlane => {
                if b.im > 0.0 {
                    return Ok(None);
                }
                let s = a.im / (a.im - b.im);
                Ok(Some(Exit {
                    fraction: s,
                    point: Complex64::new(a.re + s * (b.re - a.re), 0.0),
                    feature: BoundaryFeature::Edge(0),
                }))
            }
        }
    }

    /// Components of `D ∩ {|z| = t}`.
    pub fn circle_arcs(&self, t: f64) -> Result<ArcDecomposition> {
        if !(t > 0.0) {
            return Err(GeometryError::InvalidRadius(t));
        }
        let mut angles = match self {
            Self::Comb(spec) => return circle_arcs(spec, t),
            Self::Sector { theta, vertex_x } => {
                let mut out = Vec::new();
                for sign in [-1.0, 1.0] {
                    let psi: f64 = sign * theta / 2.0;
                    // |v + s e^{i psi}| = t with s >= 0.
                    let half_b = vertex_x * psi.cos();
                    let disc = half_b * half_b - (vertex_x * vertex_x - t * t);
                    if disc < 0.0 {
                        continue;
                    }
                    for s in [-half_b - disc.sqrt(), -half_b + disc.sqrt()] {
                        if s >= 0.0 {
                            out.push((Complex64::from_polar(s, psi) + vertex_x).arg());
                        }
                    }
                }
                out
            }
            Self::SlitPlane { b0 } => {
                if t >= *b0 {
                    vec![-PI / 2.0, PI / 2.0]
                } else {
                    Vec::new()
                }
            }
            Self::UpperHalfPlane => vec![0.0, PI],
        };
        angles.sort_by(f64::total_cmp);
        angles.dedup();
        let arcs = arcs_between(t, &angles)
            .into_iter()
            .filter(|arc| {
                let mid = Complex64::from_polar(t, arc.mid_angle());
                self.contains(mid).unwrap_or(false)
            })
            .collect();
        Ok(ArcDecomposition { t, arcs, crossing_angles: angles })
    }
}

/// Open arc of the circle `|z| = t` covering angles `(phi_lo, phi_hi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircleArc {
    pub t: f64,
    pub phi_lo: f64,
    pub phi_hi: f64,
    pub full_circle: bool,
}

impl CircleArc {
    pub fn full(t: f64) -> Self {
        Self { t, phi_lo: -PI, phi_hi: PI, full_circle: true }
    }

    /// Angular length in radians.
    pub fn angle(&self) -> f64 {
        if self.full_circle {
            TAU
        } else {
            self.phi_hi - self.phi_lo
        }
    }

    pub fn length(&self) -> f64 {
        self.t * self.angle()
    }

    /// True when the arc passes through the cut at `pi`.
    pub fn wraps(&self) -> bool {
        !self.full_circle && self.phi_hi > PI
    }

    pub fn mid_angle(&self) -> f64 {
        normalize_angle(0.5 * (self.phi_lo + self.phi_hi))
    }

    pub fn contains_angle(&self, phi: f64) -> bool {
        if self.full_circle {
            return true;
        }
        let mut p = phi;
        while p <= self.phi_lo {
            p += TAU;
        }
        while p - TAU > self.phi_lo {
            p -= TAU;
        }
        p < self.phi_hi
    }
}

/// Maps an angle into `(-pi, pi]`.
pub fn normalize_angle(phi: f64) -> f64 {
    let mut p = phi % TAU;
    if p <= -PI {
        p += TAU;
    } else if p > PI {
        p -= TAU;
    }
    p
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArcDecomposition {
    pub t: f64,
    pub arcs: Vec<CircleArc>,
    pub crossing_angles: Vec<f64>,
}

impl ArcDecomposition {
    pub fn arc_containing(&self, phi: f64) -> Option<usize> {
        self.arcs.iter().position(|arc| arc.contains_angle(phi))
    }
}

fn arcs_between(t: f64, sorted: &[f64]) -> Vec<CircleArc> {
    match sorted {
        [] => vec![CircleArc::full(t)],
        [only] => vec![CircleArc { t, phi_lo: *only, phi_hi: only + TAU, full_circle: false }],
        _ => {
            let mut arcs: Vec<CircleArc> = sorted
                .windows(2)
                .map(|w| CircleArc { t, phi_lo: w[0], phi_hi: w[1], full_circle: false })
                .collect();
            let last = sorted[sorted.len() - 1];
            arcs.push(CircleArc { t, phi_lo: last, phi_hi: sorted[0] + TAU, full_circle: false });
            arcs
        }
    }
}

/// Decomposes `C ∩ {|z| = t}` into arcs between the ray crossings.
pub fn circle_arcs(spec: &CombSpec, t: f64) -> Result<ArcDecomposition> {
    if !(t > 0.0) {
        return Err(GeometryError::InvalidRadius(t));
    }
    let mut angles = Vec::new();
    for tooth in spec.teeth_in(-t, t)?.filter(|tooth| tooth.reaches(t)) {
        let phi = (tooth.x / t).acos();
        angles.push(-phi);
        angles.push(phi);
    }
    angles.sort_by(f64::total_cmp);
    Ok(ArcDecomposition { t, arcs: arcs_between(t, &angles), crossing_angles: angles })
}

/// The arc `J_t` through the positive real axis and its angular width `Θ(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaProfile {
    pub arc: CircleArc,
    pub theta: f64,
}

pub fn theta_profile(spec: &CombSpec, t: f64) -> Result<ThetaProfile> {
    if !(t > 0.0) {
        return Err(GeometryError::InvalidRadius(t));
    }
    Ok(match spec.innermost_blocking(t)? {
        None => ThetaProfile { arc: CircleArc::full(t), theta: TAU },
        Some(tooth) => {
            let phi = (tooth.x / t).acos();
            ThetaProfile {
                arc: CircleArc { t, phi_lo: -phi, phi_hi: phi, full_circle: false },
                theta: 2.0 * phi,
            }
        }
    })
}

/// Θ on a stretch of radii where the innermost blocking abscissa is `x`.
#[inline]
pub fn theta_with_blocker(x: Option<f64>, t: f64) -> f64 {
    match x {
        Some(x) => 2.0 * (x / t).acos(),
        None => TAU,
    }
}

/// The component of `C ∩ {|z| = t}` separating 0 from `target`.
///
/// Follows the path that runs along the real axis to the middle of the
/// target's channel and then vertically; the arc hit at radius `t` is the
/// separating one. Targets meeting the real axis are reached along it.
pub fn separating_arc(spec: &CombSpec, t: f64, target: &CircleArc) -> Result<CircleArc> {
    if !(t > 0.0) {
        return Err(GeometryError::InvalidRadius(t));
    }
    if target.t <= t {
        return Err(GeometryError::InvalidTarget(format!(
            "target radius {} must exceed {t}",
            target.t
        )));
    }
    let outer = circle_arcs(spec, target.t)?;
    let matches = |arc: &CircleArc| {
        arc.full_circle == target.full_circle
            && (arc.full_circle
                || ((arc.phi_lo - target.phi_lo).abs() < 1e-9
                    && (arc.phi_hi - target.phi_hi).abs() < 1e-9))
    };
    if !outer.arcs.iter().any(matches) {
        return Err(GeometryError::InvalidTarget(
            "not a component of the comb's circle at its radius".into(),
        ));
    }
    let angle = if target.contains_angle(0.0) {
        0.0
    } else if target.contains_angle(PI) {
        PI
    } else {
        let r = target.t;
        let x_left = r * target.phi_lo.cos().min(target.phi_hi.cos());
        let k = spec.floor_index(x_left + 0.5 * spec.min_gap());
        let lo = spec.tooth(k)?;
        let hi = spec.tooth(k + 1)?;
        let m = 0.5 * (lo.x + hi.x);
        let sign = target.mid_angle().signum();
        if t <= m.abs() {
            if m > 0.0 {
                0.0
            } else {
                PI
            }
        } else {
            sign * (m / t).acos()
        }
    };
    let inner = circle_arcs(spec, t)?;
    let idx = inner.arc_containing(angle).ok_or_else(|| {
        GeometryError::InvalidTarget("channel path meets a ray at the inner radius".into())
    })?;
    Ok(inner.arcs[idx])
}

const CASE1_GAP: f64 = 1.0;

/// Smallest radius at which the channel-arc bound `1/(t sin(θ/2))` drops
/// below `θ`, and never below `1 + gap` for the unit-gap case-1 comb.
pub fn r0_threshold(theta: f64) -> Result<f64> {
    if !(theta > 0.0 && theta < PI) {
        return Err(GeometryError::InvalidAngle(theta));
    }
    Ok((1.0 + CASE1_GAP).max(1.0 / (theta * (theta / 2.0).sin())))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelMargin {
    /// Length of the in-channel arc `I_t`.
    pub l_i: f64,
    /// Length of the real-axis arc `J_t`.
    pub l_j: f64,
    /// Angle subtended by the channel at radius `t`.
    pub phi: f64,
}

/// Compares the arc inside channel `(x_k, x_{k+1})` with `J_t` on a case-1 comb.
pub fn channel_margin(spec: &CombSpec, t: f64, k: i64) -> Result<ChannelMargin> {
    if spec.case1_theta().is_none() {
        return Err(GeometryError::NotCase1);
    }
    if k < 1 {
        return Err(GeometryError::InvalidSpec(format!("channel index must be >= 1, got {k}")));
    }
    let left = spec.tooth(k)?;
    let right = spec.tooth(k + 1)?;
    for tooth in [left, right] {
        if !tooth.reaches(t) {
            return Err(GeometryError::NoCrossing { x: tooth.x, t });
        }
    }
    let phi = (left.x / t).acos() - (right.x / t).acos();
    let profile = theta_profile(spec, t)?;
    Ok(ChannelMargin { l_i: t * phi, l_j: t * profile.theta, phi })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileGap {
    pub gap: f64,
    pub bound: f64,
}

/// `Θ(t) - θ` together with its bound `2/(t sin(θ/2))`.
pub fn profile_gap(spec: &CombSpec, t: f64) -> Result<ProfileGap> {
    let theta = spec.case1_theta().ok_or(GeometryError::NotCase1)?;
    if !(t > 1.0) {
        return Err(GeometryError::InvalidRadius(t));
    }
    let profile = theta_profile(spec, t)?;
    Ok(ProfileGap { gap: profile.theta - theta, bound: 2.0 / (t * (theta / 2.0).sin()) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Crossing angles by enumerating every tooth with |x| <= t + 1.
    fn brute_crossings(spec: &CombSpec, t: f64) -> Vec<f64> {
        let reach = (t + 1.0).ceil() as i64;
        let mut out = Vec::new();
        for n in -reach * 4..=reach * 4 {
            let Ok(tooth) = spec.tooth(n) else { continue };
            if tooth.x.abs() > t + 1.0 {
                continue;
            }
            if tooth.x.abs() < t && (t * t - tooth.x * tooth.x).sqrt() >= tooth.b {
                out.push((tooth.x / t).acos());
                out.push(-(tooth.x / t).acos());
            }
        }
        out.sort_by(f64::total_cmp);
        out
    }

    #[test]
    fn rule_teeth() {
        let c1 = CombSpec::case1(FRAC_PI_2).unwrap();
        let t = c1.tooth(3).unwrap();
        assert_eq!(t.x, 3.0);
        assert_abs_diff_eq!(t.b, 3.0, epsilon = 1e-12);
        assert_eq!(c1.tooth(0).unwrap().b, 1.0);
        assert_eq!(CombSpec::case2().tooth(2).unwrap().b, 5.0);
        assert_eq!(CombSpec::case3().tooth(-7).unwrap().b, 1.0);
    }

    #[test]
    fn explicit_rejects_out_of_range() {
        let teeth = (-2..=2).map(|n| Tooth { n, x: n as f64 * 2.0, b: 1.0 }).collect();
        let spec = CombSpec::explicit(teeth, None, false).unwrap();
        assert_eq!(spec.min_gap(), 2.0);
        assert!(matches!(spec.tooth(3), Err(GeometryError::IndexOutOfRange { n: 3, .. })));
        assert!(circle_arcs(&spec, 10.0).is_err());
        assert!(circle_arcs(&spec, 3.0).is_ok());
    }

    #[test]
    fn explicit_validation() {
        let no_zero = vec![Tooth { n: 1, x: 1.0, b: 1.0 }];
        assert!(CombSpec::explicit(no_zero, None, false).is_err());
        let shifted = vec![Tooth { n: 0, x: 0.5, b: 1.0 }];
        assert!(CombSpec::explicit(shifted, None, false).is_err());
        let decreasing = vec![Tooth { n: 0, x: 0.0, b: 1.0 }, Tooth { n: 1, x: -1.0, b: 1.0 }];
        assert!(CombSpec::explicit(decreasing, None, false).is_err());
        let flat = vec![Tooth { n: 0, x: 0.0, b: 0.0 }];
        assert!(CombSpec::explicit(flat, None, false).is_err());
        let tight = vec![Tooth { n: 0, x: 0.0, b: 1.0 }, Tooth { n: 1, x: 0.5, b: 1.0 }];
        assert!(CombSpec::explicit(tight, Some(1.0), false).is_err());
    }

    #[test]
    fn extension_repeats_outer_gap() {
        let teeth = vec![
            Tooth { n: -1, x: -3.0, b: 2.0 },
            Tooth { n: 0, x: 0.0, b: 1.0 },
            Tooth { n: 1, x: 1.5, b: 4.0 },
        ];
        let spec = CombSpec::explicit(teeth, None, true).unwrap();
        assert_eq!(spec.tooth(4).unwrap(), Tooth { n: 4, x: 6.0, b: 4.0 });
        assert_eq!(spec.tooth(-3).unwrap(), Tooth { n: -3, x: -9.0, b: 2.0 });
        assert_eq!(spec.floor_index(6.0), 4);
        assert_eq!(spec.floor_index(5.99), 3);
        assert_eq!(spec.floor_index(-8.0), -3);
        assert_eq!(spec.floor_index(0.7), 0);
    }

    #[test]
    fn membership() {
        let d = DomainRef::Comb(CombSpec::case3());
        assert!(d.contains(c(0.0, 0.0)).unwrap());
        assert!(!d.contains(c(1.0, 2.0)).unwrap());
        assert!(!d.contains(c(1.0, -1.0)).unwrap());
        assert!(d.contains(c(1.0, 0.999)).unwrap());
        let s = DomainRef::sector(FRAC_PI_2, 0.0).unwrap();
        assert!(!s.contains(c(-1.0, 0.0)).unwrap());
        assert!(s.contains(c(1.0, 0.9)).unwrap());
        assert!(!s.contains(c(0.0, 0.0)).unwrap());
    }

    #[test]
    fn distances() {
        let d = DomainRef::Comb(CombSpec::case3());
        assert_abs_diff_eq!(d.boundary_distance(c(0.0, 0.0)).unwrap(), 1.0);
        assert_abs_diff_eq!(d.boundary_distance(c(0.5, 0.0)).unwrap(), 1.25f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(d.boundary_distance(c(0.5, 2.0)).unwrap(), 0.5);
        assert!(matches!(
            d.boundary_distance(c(1.0, 3.0)),
            Err(GeometryError::OutsideDomain(_))
        ));
        let s = DomainRef::sector(FRAC_PI_2, 0.0).unwrap();
        assert_abs_diff_eq!(s.boundary_distance(c(1.0, 0.0)).unwrap(), 0.5f64.sqrt(), epsilon = 1e-15);
        let h = DomainRef::UpperHalfPlane;
        assert_abs_diff_eq!(h.boundary_distance(c(3.0, 2.0)).unwrap(), 2.0);
    }

    #[test]
    fn arcs_case3() {
        let spec = CombSpec::case3();
        let small = circle_arcs(&spec, 0.5).unwrap();
        assert_eq!(small.arcs.len(), 1);
        assert!(small.arcs[0].full_circle);
        let two = circle_arcs(&spec, 2.0).unwrap();
        assert_eq!(two.arcs.len(), 6);
        let expect = [-2.0 * PI / 3.0, -FRAC_PI_2, -PI / 3.0, PI / 3.0, FRAC_PI_2, 2.0 * PI / 3.0];
        for (a, e) in two.crossing_angles.iter().zip(expect) {
            assert_abs_diff_eq!(*a, e, epsilon = 1e-12);
        }
        let total: f64 = two.arcs.iter().map(CircleArc::angle).sum();
        assert_abs_diff_eq!(total, TAU, epsilon = 1e-12);
        assert_eq!(two.arcs.iter().filter(|a| a.wraps()).count(), 1);
    }

    #[test]
    fn arcs_case1_include_tooth_two() {
        let spec = CombSpec::case1(FRAC_PI_2).unwrap();
        let arcs = circle_arcs(&spec, 3.0).unwrap();
        let phi = (2.0f64 / 3.0).acos();
        assert!(arcs.crossing_angles.iter().any(|a| (a - phi).abs() < 1e-12));
        assert!(arcs.crossing_angles.iter().any(|a| (a + phi).abs() < 1e-12));
    }

    #[test]
    fn profile_spot_values() {
        assert_eq!(theta_profile(&CombSpec::case3(), 0.5).unwrap().theta, TAU);
        assert_abs_diff_eq!(
            theta_profile(&CombSpec::case3(), 2.0).unwrap().theta,
            2.0 * PI / 3.0,
            epsilon = 1e-12
        );
        let c1 = CombSpec::case1(FRAC_PI_2).unwrap();
        assert_abs_diff_eq!(
            theta_profile(&c1, 3.0).unwrap().theta,
            2.0 * (2.0f64 / 3.0).acos(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn blocking_count_matches_crossings() {
        for spec in [CombSpec::case1(1.0).unwrap(), CombSpec::case2(), CombSpec::case3()] {
            for t in [0.5, 1.0, 1.7, 3.3, 12.0, 57.5] {
                let arcs = circle_arcs(&spec, t).unwrap();
                assert_eq!(2 * spec.blocking_count(t).unwrap(), arcs.crossing_angles.len());
            }
        }
    }

    #[test]
    fn tip_radii_are_profile_jumps() {
        let spec = CombSpec::case1(1.2).unwrap();
        let tips = spec.tip_radii_between(1.0, 30.0).unwrap();
        assert!(tips.windows(2).all(|w| w[0] < w[1]));
        // Θ only changes configuration at the listed radii.
        for w in tips.windows(2) {
            let a = spec.innermost_blocking(w[0] + 1e-9).unwrap();
            let b = spec.innermost_blocking(w[1] - 1e-9).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn separating_arc_real_axis_target() {
        let spec = CombSpec::case1(FRAC_PI_2).unwrap();
        let outer = circle_arcs(&spec, 10.0).unwrap();
        let real = outer.arcs[outer.arc_containing(0.0).unwrap()];
        let sep = separating_arc(&spec, 3.0, &real).unwrap();
        assert_eq!(sep, theta_profile(&spec, 3.0).unwrap().arc);
    }

    #[test]
    fn separating_arc_first_quadrant_targets_near_origin() {
        let spec = CombSpec::case1(FRAC_PI_2).unwrap();
        let outer = circle_arcs(&spec, 10.0).unwrap();
        let j = theta_profile(&spec, 1.05).unwrap().arc;
        for arc in outer.arcs.iter().filter(|a| a.phi_lo > 0.0 && a.phi_hi < FRAC_PI_2 + 1e-12) {
            assert_eq!(separating_arc(&spec, 1.05, arc).unwrap(), j);
        }
    }

    #[test]
    fn separating_arc_inside_channel() {
        let spec = CombSpec::case1(FRAC_PI_2).unwrap();
        let outer = circle_arcs(&spec, 10.0).unwrap();
        let between = (0.55f64).acos();
        let target = outer.arcs[outer.arc_containing(between).unwrap()];
        assert_abs_diff_eq!(10.0 * target.phi_lo.cos(), 6.0, epsilon = 1e-12);
        let sep = separating_arc(&spec, 9.9, &target).unwrap();
        assert_abs_diff_eq!(9.9 * sep.phi_lo.cos(), 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(9.9 * sep.phi_hi.cos(), 5.0, epsilon = 1e-12);
    }

    #[test]
    fn separating_arc_rejects_bad_targets() {
        let spec = CombSpec::case1(FRAC_PI_2).unwrap();
        let j = theta_profile(&spec, 5.0).unwrap().arc;
        assert!(separating_arc(&spec, 6.0, &j).is_err());
        let fake = CircleArc { t: 10.0, phi_lo: 0.1, phi_hi: 0.2, full_circle: false };
        assert!(separating_arc(&spec, 3.0, &fake).is_err());
    }

    #[test]
    fn channel_margin_values() {
        let spec = CombSpec::case1(FRAC_PI_2).unwrap();
        let m = channel_margin(&spec, 10.0, 3).unwrap();
        assert_abs_diff_eq!(m.phi, 0.3f64.acos() - 0.4f64.acos(), epsilon = 1e-15);
        assert_abs_diff_eq!(m.phi, 0.10682, epsilon = 1e-5);
        assert!(m.phi <= 1.0 / (10.0 * (PI / 4.0).sin()));
        assert!(m.l_i < m.l_j);
        let narrow = CombSpec::case1(PI / 3.0).unwrap();
        assert!(matches!(channel_margin(&narrow, 2.0, 5), Err(GeometryError::NoCrossing { .. })));
        assert!(matches!(
            channel_margin(&CombSpec::case3(), 10.0, 1),
            Err(GeometryError::NotCase1)
        ));
    }

    #[test]
    fn threshold_values() {
        assert_eq!(r0_threshold(FRAC_PI_2).unwrap(), 2.0);
        let tiny = PI / 100.0;
        let r = r0_threshold(tiny).unwrap();
        assert_abs_diff_eq!(r, 1.0 / (tiny * (tiny / 2.0).sin()), epsilon = 1e-9);
        assert_abs_diff_eq!(r, 2026.507, epsilon = 1e-3);
        assert!(r0_threshold(0.0).is_err());
        assert!(r0_threshold(PI).is_err());
    }

    #[test]
    fn profile_gap_values() {
        let spec = CombSpec::case1(FRAC_PI_2).unwrap();
        let g = profile_gap(&spec, 3.0).unwrap();
        assert_abs_diff_eq!(g.gap, 2.0 * (2.0f64 / 3.0).acos() - FRAC_PI_2, epsilon = 1e-12);
        assert_abs_diff_eq!(g.gap, 0.1113, epsilon = 1e-4);
        assert!(g.gap <= g.bound);
        let far = profile_gap(&spec, 1e4).unwrap();
        assert!(far.bound <= 2.83e-4);
        assert!(far.gap >= 0.0 && far.gap <= far.bound);
        assert!(profile_gap(&spec, 1.0).is_err());
    }

    #[test]
    fn non_comb_arcs() {
        let h = DomainRef::UpperHalfPlane.circle_arcs(10.0).unwrap();
        assert_eq!(h.arcs.len(), 1);
        assert_abs_diff_eq!(h.arcs[0].angle(), PI);
        let s = DomainRef::sector(FRAC_PI_2, 0.0).unwrap().circle_arcs(3.0).unwrap();
        assert_eq!(s.arcs.len(), 1);
        assert_abs_diff_eq!(s.arcs[0].angle(), FRAC_PI_2, epsilon = 1e-12);
        let shifted = DomainRef::sector(FRAC_PI_2, 2.0).unwrap().circle_arcs(1.0).unwrap();
        assert!(shifted.arcs.is_empty());
        let slit = DomainRef::slit_plane(1.0).unwrap().circle_arcs(2.0).unwrap();
        assert_eq!(slit.arcs.len(), 2);
    }

    #[test]
    fn segment_exits() {
        let d = DomainRef::Comb(CombSpec::case3());
        let exit = d.segment_exit(c(0.5, 1.5), c(2.5, 1.5)).unwrap().unwrap();
        assert_eq!(exit.point, c(1.0, 1.5));
        assert_eq!(exit.feature, BoundaryFeature::Ray { tooth: 1, upper: true });
        let back = d.segment_exit(c(0.5, -1.5), c(-2.5, -1.5)).unwrap().unwrap();
        assert_eq!(back.feature, BoundaryFeature::Ray { tooth: 0, upper: false });
        assert!(d.segment_exit(c(0.5, 0.5), c(3.5, 0.5)).unwrap().is_none());
        let s = DomainRef::sector(FRAC_PI_2, 0.0).unwrap();
        let e = s.segment_exit(c(1.0, 0.0), c(1.0, 2.0)).unwrap().unwrap();
        assert_abs_diff_eq!(e.fraction, 0.5, epsilon = 1e-15);
        assert_eq!(e.feature, BoundaryFeature::Edge(1));
    }

    fn any_spec() -> impl Strategy<Value = CombSpec> {
        prop_oneof![
            (0.05f64..3.1).prop_map(|th| CombSpec::case1(th).unwrap()),
            Just(CombSpec::case2()),
            Just(CombSpec::case3()),
        ]
    }

    proptest! {
        #[test]
        fn crossings_match_enumeration(spec in any_spec(), t in 0.1f64..60.0) {
            let arcs = circle_arcs(&spec, t).unwrap();
            let brute = brute_crossings(&spec, t);
            prop_assert_eq!(arcs.crossing_angles.len(), brute.len());
            for (a, b) in arcs.crossing_angles.iter().zip(&brute) {
                prop_assert!((a - b).abs() <= 1e-12);
                // The angle lies on a tooth: x = t cos φ and t |sin φ| >= b.
                let x = t * a.cos();
                let tooth = spec.tooth(x.round() as i64).unwrap();
                prop_assert!((tooth.x - x).abs() <= 1e-12 * t.max(1.0));
                prop_assert!(t * a.sin().abs() >= tooth.b * (1.0 - 1e-12));
            }
            let total: f64 = arcs.arcs.iter().map(CircleArc::angle).sum();
            prop_assert!((total - TAU).abs() <= 1e-12);
        }

        #[test]
        fn profile_is_arc_through_zero(spec in any_spec(), t in 0.1f64..200.0) {
            let p = theta_profile(&spec, t).unwrap();
            let arcs = circle_arcs(&spec, t).unwrap();
            let j = arcs.arcs[arcs.arc_containing(0.0).unwrap()];
            prop_assert!((j.angle() - p.theta).abs() <= 1e-12);
            if t >= spec.b0() {
                prop_assert!(p.theta <= PI + 1e-15);
            }
        }

        #[test]
        fn case1_profile_bounds(theta in 0.1f64..3.0, t in 2.0f64..1e6) {
            let spec = CombSpec::case1(theta).unwrap();
            let g = profile_gap(&spec, t).unwrap();
            prop_assert!(g.gap >= -1e-15);
            prop_assert!(g.gap <= g.bound);
        }

        #[test]
        fn profile_rises_between_tips(theta in 0.3f64..2.8, lo in 2.0f64..500.0) {
            let spec = CombSpec::case1(theta).unwrap();
            let tips = spec.tip_radii_between(lo, lo * 1.5 + 5.0).unwrap();
            for w in tips.windows(2) {
                let a = theta_profile(&spec, w[0] + 1e-9 * w[0]).unwrap().theta;
                let m = theta_profile(&spec, 0.5 * (w[0] + w[1])).unwrap().theta;
                let b = theta_profile(&spec, w[1] - 1e-9 * w[1]).unwrap().theta;
                prop_assert!(a <= m && m <= b);
                // and drops back at the next tip
                let after = theta_profile(&spec, w[1] * (1.0 + 1e-9)).unwrap().theta;
                prop_assert!(after < b);
            }
        }

        #[test]
        fn distance_matches_brute_force(spec in any_spec(), re in -40.0f64..40.0, im in -40.0f64..40.0) {
            let d = DomainRef::Comb(spec.clone());
            let z = c(re, im);
            prop_assume!(d.contains(z).unwrap());
            let fast = d.boundary_distance(z).unwrap();
            let reach = (re.abs() + fast + 2.0).ceil() as i64;
            let brute = (-reach..=reach)
                .map(|n| spec.tooth(n).unwrap())
                .map(|t| (re - t.x).abs().hypot((t.b - im.abs()).max(0.0)))
                .fold(f64::INFINITY, f64::min);
            prop_assert_eq!(fast, brute);
        }

        #[test]
        fn far_field_distance_matches_brute_force(
            spec in any_spec(),
            re in -3000.0f64..3000.0,
            im in -1e5f64..1e5,
        ) {
            let d = DomainRef::Comb(spec.clone());
            let z = c(re, im);
            prop_assume!(d.contains(z).unwrap());
            let fast = d.boundary_distance(z).unwrap();
            let reach = (re.abs() + fast + 2.0).ceil() as i64;
            let brute = (-reach..=reach)
                .map(|n| spec.tooth(n).unwrap())
                .map(|t| (re - t.x).abs().hypot((t.b - im.abs()).max(0.0)))
                .fold(f64::INFINITY, f64::min);
            prop_assert_eq!(fast, brute);
        }

        #[test]
        fn channel_arc_never_beats_real_arc(t in 2.0f64..1e5, frac in 0.0f64..1.0) {
            let spec = CombSpec::case1(FRAC_PI_2).unwrap();
            let nmax = spec.innermost_blocking(t).unwrap().unwrap().n;
            prop_assume!(nmax >= 2);
            let k = 1 + ((nmax - 1) as f64 * frac) as i64;
            let k = k.min(nmax - 1);
            let m = channel_margin(&spec, t, k).unwrap();
            prop_assert!(m.phi > 0.0);
            prop_assert!(m.phi <= 1.0 / (t * (PI / 4.0).sin()) * (1.0 + 1e-12));
            prop_assert!(m.l_i <= m.l_j);
        }
    }
}
