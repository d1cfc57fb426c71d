//! Additive-error exponential smoothing without seasonality.
//!
//! ```text
//! ŷ_t   = ℓ_{t−1} + φ·b_{t−1}
//! ℓ_t   = ŷ_t + α·e_t
//! b_t   = φ·b_{t−1} + β·e_t          e_t = y_t − ŷ_t
//! ŷ_{T+h} = ℓ_T + (φ + φ² + … + φ^h)·b_T
//! ```
//!
//! SES has no trend, Holt fixes `φ = 1`, damped Holt searches `φ ∈ [0.8, 0.98]`.
//! Smoothing parameters minimise the in-sample one-step SSE by a coarse grid
//! followed by a shrinking pattern search. Automatic mode keeps the
//! candidate with the lowest AICc.

use serde::{Deserialize, Serialize};

use super::ForecastError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trend {
    None,
    Additive,
    Damped,
}

impl Trend {
    /// Free parameters: smoothing/damping weights plus initial states.
    fn n_params(self) -> usize {
        match self {
            Trend::None => 2,
            Trend::Additive => 4,
            Trend::Damped => 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EtsMode {
    #[default]
    Auto,
    Fixed(Trend),
}

impl EtsMode {
    pub fn label(&self) -> &'static str {
        match self {
            EtsMode::Auto => "auto",
            EtsMode::Fixed(Trend::None) => "none",
            EtsMode::Fixed(Trend::Additive) => "additive",
            EtsMode::Fixed(Trend::Damped) => "damped",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EtsFit {
    pub trend: Trend,
    pub alpha: f64,
    pub beta: f64,
    pub phi: f64,
    pub level: f64,
    pub slope: f64,
    pub sse: f64,
    pub aicc: f64,
    /// AICc of every candidate considered, in evaluation order.
    pub candidates: Vec<(Trend, f64)>,
}

const PARAM_MIN: f64 = 1e-4;
const PARAM_MAX: f64 = 0.9999;
const PHI_MIN: f64 = 0.8;
const PHI_MAX: f64 = 0.98;

#[derive(Debug, Clone, Copy)]
struct Params {
    alpha: f64,
    beta: f64,
    phi: f64,
}

struct Run {
    sse: f64,
    level: f64,
    slope: f64,
}

fn initial_state(y: &[f64], trend: Trend) -> (f64, f64) {
    match trend {
        Trend::None => (y[0], 0.0),
        _ => {
            let b0 = y[1] - y[0];
            (y[0] - b0, b0)
        }
    }
}

fn run(y: &[f64], trend: Trend, p: Params) -> Run {
    let (mut level, mut slope) = initial_state(y, trend);
    let mut sse = 0.0;
    for &obs in y {
        let damped = p.phi * slope;
        let pred = level + damped;
        let e = obs - pred;
        sse += e * e;
        level = pred + p.alpha * e;
        slope = damped + p.beta * e;
    }
    Run { sse, level, slope }
}

fn bounds(trend: Trend) -> [(f64, f64); 3] {
    let beta = if trend == Trend::None { (0.0, 0.0) } else { (PARAM_MIN, PARAM_MAX) };
    let phi = match trend {
        Trend::None => (0.0, 0.0),
        Trend::Additive => (1.0, 1.0),
        Trend::Damped => (PHI_MIN, PHI_MAX),
    };
    [(PARAM_MIN, PARAM_MAX), beta, phi]
}

fn optimise(y: &[f64], trend: Trend) -> (Params, Run) {
    let b = bounds(trend);
    let grid = |(lo, hi): (f64, f64), k: usize| -> Vec<f64> {
        if lo == hi {
            vec![lo]
        } else {
            (0..k).map(|i| lo + (hi - lo) * (i as f64 + 0.5) / k as f64).collect()
        }
    };
    let (ga, gb, gp) = (grid(b[0], 9), grid(b[1], 9), grid(b[2], 5));

    let eval = |x: [f64; 3]| run(y, trend, Params { alpha: x[0], beta: x[1], phi: x[2] }).sse;
    let mut best = [ga[0], gb[0], gp[0]];
    let mut best_sse = f64::INFINITY;
    for &a in &ga {
        for &bb in &gb {
            for &ph in &gp {
                let s = eval([a, bb, ph]);
                if s < best_sse {
                    best_sse = s;
                    best = [a, bb, ph];
                }
            }
        }
    }

    // Pattern search, halving the step after a sweep without improvement.
    let mut step = 0.05;
    while step > 1e-6 {
        let mut improved = false;
        for dim in 0..3 {
            if b[dim].0 == b[dim].1 {
                continue;
            }
            for dir in [-1.0, 1.0] {
                let mut cand = best;
                cand[dim] = (cand[dim] + dir * step).clamp(b[dim].0, b[dim].1);
                let s = eval(cand);
                if s < best_sse {
                    best_sse = s;
                    best = cand;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    let params = Params { alpha: best[0], beta: best[1], phi: best[2] };
    (params, run(y, trend, params))
}

fn aicc(sse: f64, n: usize, k: usize) -> f64 {
    if n <= k + 1 {
        return f64::INFINITY;
    }
    let n_f = n as f64;
    let k_f = k as f64;
    let sigma2 = (sse / n_f).max(f64::MIN_POSITIVE);
    n_f * sigma2.ln() + 2.0 * k_f + 2.0 * k_f * (k_f + 1.0) / (n_f - k_f - 1.0)
}

pub fn fit_ets(history: &[f64], mode: EtsMode) -> Result<EtsFit, ForecastError> {
    if history.len() < 3 {
        return Err(ForecastError::InsufficientHistory { kind: "ets", need: 3, got: history.len() });
    }
    let trends: &[Trend] = match mode {
        EtsMode::Auto => &[Trend::None, Trend::Additive, Trend::Damped],
        EtsMode::Fixed(Trend::None) => &[Trend::None],
        EtsMode::Fixed(Trend::Additive) => &[Trend::Additive],
        EtsMode::Fixed(Trend::Damped) => &[Trend::Damped],
    };
    let mut candidates = Vec::with_capacity(trends.len());
    let mut best: Option<EtsFit> = None;
    for &trend in trends {
        let (p, r) = optimise(history, trend);
        let score = aicc(r.sse, history.len(), trend.n_params());
        candidates.push((trend, score));
        // Strict improvement keeps the simpler model on ties (including all-infinite).
        if best.as_ref().map_or(true, |b| score < b.aicc) {
            best = Some(EtsFit {
                trend,
                alpha: p.alpha,
                beta: p.beta,
                phi: p.phi,
                level: r.level,
                slope: r.slope,
                sse: r.sse,
                aicc: score,
                candidates: Vec::new(),
            });
        }
    }
    let mut fit = best.expect("at least one candidate trend");
    fit.candidates = candidates;
    Ok(fit)
}

impl EtsFit {
    pub fn forecast(&self, horizon: usize) -> Vec<f64> {
        let mut damp_sum = 0.0;
        let mut phi_pow = 1.0;
        (0..horizon)
            .map(|_| {
                phi_pow *= self.phi;
                damp_sum += phi_pow;
                self.level + damp_sum * self.slope
            })
            .collect()
    }
}
