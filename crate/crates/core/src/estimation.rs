//! Uplink pilot reception and per-AP MMSE estimation of the aggregate
//! channels.
//!
//! Users transmit mutually orthogonal pilot sequences; each AP projects its
//! received block onto every pilot and scales the projection into the MMSE
//! estimate of the corresponding aggregate channel. Only the aggregate
//! `g[m,k]` is estimated, never the individual surface links, so the pilot
//! cost is independent of `S` and `N`. The estimator treats the model
//! variance `rho` as known side information.

use crate::linalg::cmatmul;
use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::TAU;

/// Orthonormal pilot sequences, one column per user (`tau_c x K`).
///
/// Built from the first `K` columns of the unitary DFT matrix of size
/// `tau_c`: a deterministic, canonical orthonormal set.
#[derive(Debug, Clone)]
pub struct PilotBook {
    phi: Array2<Complex64>,
}

impl PilotBook {
    pub fn dft(pilot_len: usize, user_count: usize) -> Self {
        assert!(
            user_count <= pilot_len,
            "orthogonal pilots need pilot_len >= user_count ({pilot_len} < {user_count})"
        );
        let norm = 1.0 / (pilot_len as f64).sqrt();
        let phi = Array2::from_shape_fn((pilot_len, user_count), |(t, k)| {
            let angle = -TAU * (t as f64) * (k as f64) / pilot_len as f64;
            Complex64::new(angle.cos(), angle.sin()) * norm
        });
        Self { phi }
    }

    pub fn pilot_len(&self) -> usize {
        self.phi.dim().0
    }

    pub fn user_count(&self) -> usize {
        self.phi.dim().1
    }

    pub fn matrix(&self) -> &Array2<Complex64> {
        &self.phi
    }
}

/// Received pilot block at every AP (`M x tau_c`):
/// `y_m = sqrt(tau_c * p_c) * sum_k g[m,k] * phi_k^T + w_m`,
/// with unit-variance complex Gaussian noise per sample.
pub fn receive_pilots(
    g: &Array2<Complex64>,
    book: &PilotBook,
    pilot_snr: f64,
    rng: &mut impl Rng,
) -> Array2<Complex64> {
    assert!(pilot_snr > 0.0, "pilot SNR must be positive");
    let (m_count, k_count) = g.dim();
    assert_eq!(k_count, book.user_count(), "user count mismatch");
    let scale = (book.pilot_len() as f64 * pilot_snr).sqrt();

    let mut y = cmatmul(&g.view(), &book.phi.t());
    for v in y.iter_mut() {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *v = *v * scale + Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2;
    }
    debug_assert_eq!(y.dim(), (m_count, book.pilot_len()));
    y
}

/// Project the received blocks onto every pilot:
/// `y_tilde[m,k] = phi_k^H y_m = sqrt(tau_c p_c) g[m,k] + phi_k^H w_m`.
/// Orthogonality removes the other users' contributions entirely.
pub fn project_pilots(y: &Array2<Complex64>, book: &PilotBook) -> Array2<Complex64> {
    let conj = book.phi.mapv(|v| v.conj());
    cmatmul(&y.view(), &conj.view())
}

/// MMSE estimate of one aggregate channel from its projected observation:
/// `g_hat = sqrt(tau_c p_c) rho y_tilde / (tau_c p_c rho + 1)`.
pub fn mmse_estimate(
    projected: Complex64,
    rho: f64,
    pilot_len: usize,
    pilot_snr: f64,
) -> Complex64 {
    let tp = pilot_len as f64 * pilot_snr;
    projected * (tp.sqrt() * rho / (tp * rho + 1.0))
}

/// Variance of the MMSE estimate:
/// `gamma = tau_c p_c rho^2 / (tau_c p_c rho + 1)`.
///
/// Always in `[0, rho)`; the estimation error has variance `rho - gamma`.
pub fn gamma_of(rho: f64, pilot_len: usize, pilot_snr: f64) -> f64 {
    let tp = pilot_len as f64 * pilot_snr;
    tp * rho * rho / (tp * rho + 1.0)
}

/// Elementwise [`gamma_of`] over a variance matrix.
pub fn gamma_matrix(rho: &Array2<f64>, pilot_len: usize, pilot_snr: f64) -> Array2<f64> {
    rho.mapv(|r| gamma_of(r, pilot_len, pilot_snr))
}

/// MMSE estimates of every aggregate channel and their variances.
#[derive(Debug, Clone)]
pub struct ChannelEstimate {
    pub g_hat: Array2<Complex64>,
    pub gamma: Array2<f64>,
}

/// Full estimation pipeline for one coherence interval: pilot reception,
/// projection, MMSE scaling.
pub fn estimate_channels(
    g: &Array2<Complex64>,
    rho: &Array2<f64>,
    book: &PilotBook,
    pilot_snr: f64,
    rng: &mut impl Rng,
) -> ChannelEstimate {
    let y = receive_pilots(g, book, pilot_snr, rng);
    let projected = project_pilots(&y, book);
    let tp = book.pilot_len() as f64 * pilot_snr;
    let mut g_hat = projected;
    ndarray::azip!((v in &mut g_hat, &r in rho) {
        *v *= tp.sqrt() * r / (tp * r + 1.0);
    });
    ChannelEstimate { g_hat, gamma: gamma_matrix(rho, book.pilot_len(), pilot_snr) }
}
