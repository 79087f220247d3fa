//! Conjugate beamforming, per-AP power control, and the two rate metrics.
//!
//! Each AP precodes with the conjugate of its channel estimates,
//! `x_m = sqrt(p_d) * sum_k eta[m,k]^(1/2) * conj(g_hat[m,k]) * s_k`,
//! subject to the per-AP constraint `sum_k eta[m,k] * gamma[m,k] <= 1`.
//!
//! The closed-form rate treats everything except the mean beamforming gain
//! as worst-case Gaussian noise. With the desired-signal strength
//! `D_k = sqrt(p_d) * sum_m eta[m,k]^(1/2) * gamma[m,k]`, the beamforming
//! uncertainty `E|B_k|^2 = p_d * sum_m eta[m,k] gamma[m,k] rho[m,k]`, and
//! interference `E|U_kk'|^2 = p_d * sum_m eta[m,k'] gamma[m,k'] rho[m,k]`,
//!
//! ```text
//! R_k = log2(1 + D_k^2 / (E|B_k|^2 + sum_{k'!=k} E|U_kk'|^2 + 1))
//! ```
//!
//! The interference family evaluated at `k' = k` equals `E|B_k|^2`, so the
//! denominator is also `p_d * sum_{k'} sum_m eta[m,k'] gamma[m,k'] rho[m,k] + 1`
//! as a single fraction; both routes are implemented and checked against
//! each other.
//!
//! The Monte-Carlo rate assumes the user knows its instantaneous effective
//! gains and averages `log2(1 + SINR)` over fresh channel and pilot-noise
//! draws.

use crate::linalg::{cmatmul, mean_and_stderr, pairwise_sum};
use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

/// Per-AP, per-user power control coefficients (`M x K`).
#[derive(Debug, Clone, PartialEq)]
pub struct PowerControl {
    pub eta: Array2<f64>,
}

impl PowerControl {
    /// Left-hand side of the per-AP power constraint, one value per AP.
    pub fn constraint_values(&self, gamma: &Array2<f64>) -> Vec<f64> {
        (&self.eta * gamma).rows().into_iter().map(|r| r.sum()).collect()
    }
}

/// Full-power uniform policy: every AP spends its entire budget, split
/// evenly over users, `eta[m,k] = 1 / sum_k' gamma[m,k']`. The constraint
/// holds with equality at every AP.
pub fn default_eta(gamma: &Array2<f64>) -> PowerControl {
    let (m_count, k_count) = gamma.dim();
    let mut eta = Array2::zeros((m_count, k_count));
    for m in 0..m_count {
        let budget: f64 = gamma.row(m).sum();
        assert!(budget > 0.0, "AP {m} has no estimated channel power");
        for k in 0..k_count {
            eta[[m, k]] = 1.0 / budget;
        }
    }
    PowerControl { eta }
}

/// The closed-form signal decomposition per user: desired strength,
/// beamforming-gain uncertainty, and per-interferer powers.
#[derive(Debug, Clone)]
pub struct SinrTerms {
    /// `D_k`, real by construction.
    pub desired: Vec<f64>,
    /// `E|B_k|^2`.
    pub bf_uncertainty: Vec<f64>,
    /// `E|U_kk'|^2` at `[k, k']`; the diagonal is zero (no self term).
    pub interference: Array2<f64>,
}

impl SinrTerms {
    pub fn interference_sum(&self, k: usize) -> f64 {
        self.interference.row(k).sum()
    }

    /// Denominator of the rate expression for user `k`.
    pub fn effective_noise_variance(&self, k: usize) -> f64 {
        self.bf_uncertainty[k] + self.interference_sum(k) + 1.0
    }
}

/// Evaluate the three closed-form term families.
pub fn sinr_terms(
    gamma: &Array2<f64>,
    rho: &Array2<f64>,
    power: &PowerControl,
    p_d: f64,
) -> SinrTerms {
    let (m_count, k_count) = gamma.dim();
    assert_eq!(rho.dim(), (m_count, k_count));
    assert_eq!(power.eta.dim(), (m_count, k_count));
    let eta = &power.eta;

    let mut desired = vec![0.0; k_count];
    let mut bf_uncertainty = vec![0.0; k_count];
    for k in 0..k_count {
        let mut d = 0.0;
        let mut b = 0.0;
        for m in 0..m_count {
            d += eta[[m, k]].sqrt() * gamma[[m, k]];
            b += eta[[m, k]] * gamma[[m, k]] * rho[[m, k]];
        }
        desired[k] = p_d.sqrt() * d;
        bf_uncertainty[k] = p_d * b;
    }

    let mut interference = Array2::zeros((k_count, k_count));
    for k in 0..k_count {
        for kp in 0..k_count {
            if kp == k {
                continue;
            }
            let mut u = 0.0;
            for m in 0..m_count {
                u += eta[[m, kp]] * gamma[[m, kp]] * rho[[m, k]];
            }
            interference[[k, kp]] = p_d * u;
        }
    }

    SinrTerms { desired, bf_uncertainty, interference }
}

/// Closed-form per-user rate from the term decomposition.
pub fn closed_form_rate(terms: &SinrTerms) -> Vec<f64> {
    terms
        .desired
        .iter()
        .enumerate()
        .map(|(k, d)| (1.0 + d * d / terms.effective_noise_variance(k)).log2())
        .collect()
}

/// Closed-form per-user rate as a single fraction: the denominator sums the
/// interference family over all users including `k' = k`, grouped per AP.
/// Algebraically identical to [`closed_form_rate`]; kept as an independent
/// evaluation route.
pub fn closed_form_rate_direct(
    gamma: &Array2<f64>,
    rho: &Array2<f64>,
    power: &PowerControl,
    p_d: f64,
) -> Vec<f64> {
    let (m_count, k_count) = gamma.dim();
    let eta = &power.eta;
    // per-AP spent fraction: sum_k' eta[m,k'] gamma[m,k']
    let spent: Vec<f64> =
        (0..m_count).map(|m| (0..k_count).map(|k| eta[[m, k]] * gamma[[m, k]]).sum()).collect();
    (0..k_count)
        .map(|k| {
            let mut d = 0.0;
            let mut denom = 0.0;
            for m in 0..m_count {
                d += eta[[m, k]].sqrt() * gamma[[m, k]];
                denom += spent[m] * rho[[m, k]];
            }
            let num = p_d * d * d;
            (1.0 + num / (p_d * denom + 1.0)).log2()
        })
        .collect()
}

/// Instantaneous per-user rate of one coherence interval under genie
/// knowledge of the effective gains.
pub fn instantaneous_rates(
    g: &Array2<Complex64>,
    g_hat: &Array2<Complex64>,
    power: &PowerControl,
    p_d: f64,
) -> Vec<f64> {
    let (m_count, k_count) = g.dim();
    assert_eq!(g_hat.dim(), (m_count, k_count));
    // A[k,k'] = sum_m g[m,k] * sqrt(eta[m,k']) * conj(g_hat[m,k'])
    let mut weighted = Array2::from_elem((m_count, k_count), Complex64::new(0.0, 0.0));
    ndarray::azip!((w in &mut weighted, &h in g_hat, &e in &power.eta) {
        *w = h.conj() * e.sqrt();
    });
    let a = cmatmul(&g.t(), &weighted.view());

    (0..k_count)
        .map(|k| {
            let signal = a[[k, k]].norm_sqr();
            let total: f64 = (0..k_count).map(|kp| a[[k, kp]].norm_sqr()).sum();
            let interference = total - signal;
            (1.0 + p_d * signal / (p_d * interference + 1.0)).log2()
        })
        .collect()
}

/// Monte-Carlo rate estimate.
#[derive(Debug, Clone, Serialize)]
pub struct McRate {
    pub per_user: Vec<f64>,
    pub per_user_stderr: Vec<f64>,
    /// Mean over users and draws.
    pub mean: f64,
    /// Standard error of the per-draw user average.
    pub mean_stderr: f64,
    pub draws: usize,
}

/// Average [`instantaneous_rates`] over `draws` independent coherence
/// intervals supplied by `draw_fn(draw_idx) -> (g, g_hat)`.
///
/// Draws run in parallel; results are reassembled in draw order and summed
/// pairwise, so the report never depends on thread count.
pub fn mc_rate<F>(
    draws: usize,
    user_count: usize,
    p_d: f64,
    power: &PowerControl,
    draw_fn: F,
) -> McRate
where
    F: Fn(u64) -> (Array2<Complex64>, Array2<Complex64>) + Sync,
{
    assert!(draws >= 1, "need at least one channel draw");
    let samples: Vec<Vec<f64>> = (0..draws as u64)
        .into_par_iter()
        .map(|d| {
            let (g, g_hat) = draw_fn(d);
            instantaneous_rates(&g, &g_hat, power, p_d)
        })
        .collect();

    let mut per_user = Vec::with_capacity(user_count);
    let mut per_user_stderr = Vec::with_capacity(user_count);
    for k in 0..user_count {
        let column: Vec<f64> = samples.iter().map(|s| s[k]).collect();
        let (mean, se) = mean_and_stderr(&column);
        per_user.push(mean);
        per_user_stderr.push(se);
    }
    let draw_means: Vec<f64> =
        samples.iter().map(|s| pairwise_sum(s) / user_count as f64).collect();
    let (mean, mean_stderr) = mean_and_stderr(&draw_means);

    McRate { per_user, per_user_stderr, mean, mean_stderr, draws }
}

/// Sum rate over users with the training-overhead prelog,
/// `(1 - tau_c/tau)/2 * sum_k R_k`.
pub fn sum_rate(per_user: &[f64], pilot_len: usize, coherence_len: usize) -> f64 {
    assert!(pilot_len < coherence_len, "tau_c must be below tau");
    let prelog = (1.0 - pilot_len as f64 / coherence_len as f64) / 2.0;
    prelog * pairwise_sum(per_user)
}

/// Per-user net throughput in bit/s, `B * (1 - tau_c/tau)/2 * R_k`.
pub fn per_user_throughput(
    per_user: &[f64],
    bandwidth_hz: f64,
    pilot_len: usize,
    coherence_len: usize,
) -> Vec<f64> {
    assert!(pilot_len < coherence_len, "tau_c must be below tau");
    assert!(bandwidth_hz > 0.0, "bandwidth must be positive");
    let prelog = (1.0 - pilot_len as f64 / coherence_len as f64) / 2.0;
    per_user.iter().map(|r| bandwidth_hz * prelog * r).collect()
}

/// Transmitted sample of every AP for one symbol vector; only used to check
/// the power constraint empirically (rates never materialize symbols).
pub fn transmit_signal(
    g_hat: &Array2<Complex64>,
    power: &PowerControl,
    p_d: f64,
    symbols: &[Complex64],
) -> Vec<Complex64> {
    let (m_count, k_count) = g_hat.dim();
    assert_eq!(symbols.len(), k_count);
    let root = p_d.sqrt();
    (0..m_count)
        .map(|m| {
            let mut x = Complex64::new(0.0, 0.0);
            for k in 0..k_count {
                x += power.eta[[m, k]].sqrt() * g_hat[[m, k]].conj() * symbols[k];
            }
            x * root
        })
        .collect()
}

/// Per-scenario rate summary produced by the pipeline drivers.
#[derive(Debug, Clone, Serialize)]
pub struct RateReport {
    pub config_hash: String,
    pub master_seed: u64,
    pub topology_index: u64,
    pub channel_draws: usize,
    pub pilot_len_symbols: usize,
    pub per_user_closed: Vec<f64>,
    pub per_user_mc: Vec<f64>,
    pub per_user_mc_stderr: Vec<f64>,
    /// Closed-form sum rate including the prelog.
    pub sum_rate: f64,
    /// Closed-form per-user net throughput, bit/s.
    pub throughput_bps: Vec<f64>,
    pub min_rate: f64,
    pub notes: Vec<String>,
}

impl RateReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Per-user CSV rows with identifying header comments.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# config_hash={}\n", self.config_hash));
        out.push_str(&format!("# master_seed={}\n", self.master_seed));
        out.push_str(&format!("# core_version={}\n", env!("CARGO_PKG_VERSION")));
        out.push_str("user_id,R_closed,R_mc,R_mc_stderr,S_k\n");
        for k in 0..self.per_user_closed.len() {
            out.push_str(&format!(
                "{k},{},{},{},{}\n",
                self.per_user_closed[k],
                self.per_user_mc[k],
                self.per_user_mc_stderr[k],
                self.throughput_bps[k]
            ));
        }
        out
    }
}
