use super::{Result, SampleBatch, StochasticError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailMethod {
    /// Hill estimator on the `k` largest uncapped exit times; `None` picks
    /// `floor(sqrt(M))`.
    Hill { k: Option<usize> },
    /// Least-squares slope of log survival against log time between two
    /// quantiles of the whole batch.
    SurvivalLs { q_lo: f64, q_hi: f64 },
}

impl TailMethod {
    pub const DEFAULT_WINDOW: (f64, f64) = (0.80, 0.99);

    pub fn survival_default() -> Self {
        Self::SurvivalLs { q_lo: Self::DEFAULT_WINDOW.0, q_hi: Self::DEFAULT_WINDOW.1 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Hill { .. } => "hill",
            Self::SurvivalLs { .. } => "survival-ls",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailFit {
    /// The method with its resolved parameters.
    pub method: TailMethod,
    /// Exceedances behind the fit: `k` for Hill, samples above the lower
    /// quantile for the survival fit.
    pub k: usize,
    pub alpha_hat: f64,
    pub stderr: f64,
    pub capped_fraction: f64,
}

pub fn tail_fit(batch: &SampleBatch, method: TailMethod) -> Result<TailFit> {
    match method {
        TailMethod::Hill { k } => hill(batch, k),
        TailMethod::SurvivalLs { q_lo, q_hi } => survival_ls(batch, q_lo, q_hi),
    }
}

fn hill(batch: &SampleBatch, k: Option<usize>) -> Result<TailFit> {
    let m = batch.len();
    let k = k.unwrap_or((m as f64).sqrt().floor() as usize);
    if k == 0 {
        return Err(StochasticError::InvalidParam("k must be positive".into()));
    }
    let mut taus: Vec<f64> = batch.samples.iter().filter(|s| !s.capped()).map(|s| s.tau).collect();
    if k >= taus.len() {
        return Err(StochasticError::InsufficientSamples { need: k + 1, have: taus.len() });
    }
    // Capped samples are dropped; the fit stands only while they are a
    // small share of the top k.
    let capped = m - taus.len();
    if capped * 10 > k {
        return Err(StochasticError::CapContamination {
            capped,
            detail: format!("more than k/10 with k = {k}"),
        });
    }
    taus.sort_by(f64::total_cmp);
    let n = taus.len();
    let threshold = taus[n - k - 1];
    if !(threshold > 0.0) {
        return Err(StochasticError::InsufficientSamples { need: k + 1, have: 0 });
    }
    let sum: f64 = taus[n - k..].iter().map(|t| (t / threshold).ln()).sum();
    let alpha_hat = k as f64 / sum;
    Ok(TailFit {
        method: TailMethod::Hill { k: Some(k) },
        k,
        alpha_hat,
        stderr: alpha_hat / (k as f64).sqrt(),
        capped_fraction: batch.capped_fraction(),
    })
}

fn survival_ls(batch: &SampleBatch, q_lo: f64, q_hi: f64) -> Result<TailFit> {
    if !(q_lo > 0.0 && q_lo < q_hi && q_hi < 1.0) {
        return Err(StochasticError::InvalidParam(format!("window [{q_lo}, {q_hi}] must satisfy 0 < q1 < q2 < 1")));
    }
    let m = batch.len();
    let mut sorted: Vec<(f64, bool)> = batch.samples.iter().map(|s| (s.tau, s.capped())).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let lo = (q_lo * m as f64).floor() as usize;
    let hi = ((q_hi * m as f64).ceil() as usize).min(m).saturating_sub(1);
    if hi < lo + 2 {
        return Err(StochasticError::InsufficientSamples { need: 3, have: hi.saturating_sub(lo) + 1 });
    }
    if let Some(j) = (lo..=hi).find(|&j| sorted[j].1) {
        return Err(StochasticError::CapContamination {
            capped: batch.capped_count(),
            detail: format!("order statistic {j} is capped; lower q2 below {}", j as f64 / m as f64),
        });
    }
    // Mid-rank survival keeps log S finite at the top of the window.
    let points: Vec<(f64, f64)> = (lo..=hi)
        .map(|j| (sorted[j].0.ln(), ((m - j) as f64 - 0.5).ln() - (m as f64).ln()))
        .collect();
    let count = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / count;
    let my = points.iter().map(|p| p.1).sum::<f64>() / count;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if !(sxx > 0.0) {
        return Err(StochasticError::InsufficientSamples { need: 3, have: 1 });
    }
    let alpha_hat = -sxy / sxx;
    let k = m - lo;
    Ok(TailFit {
        method: TailMethod::SurvivalLs { q_lo, q_hi },
        k,
        alpha_hat,
        stderr: alpha_hat.abs() / (k as f64).sqrt(),
        capped_fraction: batch.capped_fraction(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossCheck {
    pub difference: f64,
    pub joint_stderr: f64,
    /// The two fits lie within two joint standard errors.
    pub agree: bool,
}

pub fn cross_check(a: &TailFit, b: &TailFit) -> CrossCheck {
    let difference = (a.alpha_hat - b.alpha_hat).abs();
    let joint_stderr = a.stderr.hypot(b.stderr);
    CrossCheck { difference, joint_stderr, agree: difference <= 2.0 * joint_stderr }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HardyMc {
    pub h_hat: f64,
    pub stderr: f64,
    /// Below 1/2, which no simply connected domain allows.
    pub out_of_range: bool,
}

pub fn hardy_mc(fit: &TailFit) -> HardyMc {
    let h_hat = 2.0 * fit.alpha_hat;
    HardyMc { h_hat, stderr: 2.0 * fit.stderr, out_of_range: h_hat < 0.5 }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentEstimate {
    pub value: f64,
    /// Means over the first quarter, half and all of the batch.
    pub running: [f64; 3],
    pub stable: bool,
}

/// Mean of `τ^p` over uncapped samples. `stable` asks that the means over
/// the nested prefixes `M/4`, `M/2`, `M` stay within 10% of each other.
pub fn moment_estimate(batch: &SampleBatch, p: f64) -> Result<MomentEstimate> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(StochasticError::InvalidParam(format!("p must be positive, got {p}")));
    }
    let m = batch.len();
    let mean = |end: usize| {
        let (sum, n) = batch.samples[..end]
            .iter()
            .filter(|s| !s.capped())
            .fold((0.0, 0usize), |(sum, n), s| (sum + s.tau.powf(p), n + 1));
        (n > 0).then(|| sum / n as f64)
    };
    let ends = [m / 4, m / 2, m];
    let mut running = [0.0; 3];
    for (slot, &end) in running.iter_mut().zip(&ends) {
        *slot = mean(end).ok_or(StochasticError::InsufficientSamples { need: 4, have: m })?;
    }
    let value = running[2];
    let spread = running.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - running.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(MomentEstimate { value, running, stable: spread < 0.1 * value })
}
