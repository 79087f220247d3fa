//! Small-scale fading, the RIS response, and the aggregate per-user channel.
//!
//! The AP-surface links are line-of-sight: each element coefficient has
//! fixed modulus `sqrt(beta_1)` and an i.i.d. uniform phase, drawn once per
//! topology and held fixed across coherence intervals. Direct and
//! surface-user links are Rayleigh and redrawn every coherence interval.
//! Surfaces apply unit-amplitude random phase shifts.
//!
//! The aggregate channel from AP `m` to user `k` sums the direct coefficient
//! and every reflected element path:
//!
//! ```text
//! g[m,k] = sum_s sum_n h1[m,s,n] * v[s,n] * h2[s,k,n] + h_d[m,k]
//! ```
//!
//! Conditioned on a topology, `g[m,k]` is zero-mean complex Gaussian with
//! variance `rho[m,k] = N * sum_s beta_1[m,s] * beta_2[s,k] + beta_d[m,k]`:
//! the unit-modulus line-of-sight rows and unit-amplitude phase shifts make
//! the variance independent of every phase draw, which is why the closed-form
//! rate cannot depend on the surface configuration.

use crate::large_scale::LargeScale;
use crate::linalg::cmatmul;
use crate::scenario::SeedContext;
use ndarray::{Array2, Array3};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::TAU;

/// Unit-modulus reflect configuration of every surface (`S x N`).
#[derive(Debug, Clone, PartialEq)]
pub struct RisPhases {
    pub v: Array2<Complex64>,
}

/// Per-coherence-interval Rayleigh realizations.
#[derive(Debug, Clone)]
pub struct FastFading {
    /// Direct AP-user coefficients, `M x K`.
    pub h_d: Array2<Complex64>,
    /// Surface-user element coefficients, `S x K x N`.
    pub h_2: Array3<Complex64>,
}

fn unit_phase(rng: &mut impl Rng) -> Complex64 {
    let theta = rng.random::<f64>() * TAU;
    Complex64::new(theta.cos(), theta.sin())
}

fn complex_normal(rng: &mut impl Rng, variance: f64) -> Complex64 {
    let scale = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(scale * re, scale * im)
}

/// Draw i.i.d. uniform phase shifts with unit amplitude for every element.
/// Each surface has its own substream; element draws extend with `N`.
pub fn draw_ris_phases(
    ris_count: usize,
    elements_per_ris: usize,
    seeds: &SeedContext,
    topo_idx: u64,
) -> RisPhases {
    draw_ris_phases_labeled(ris_count, elements_per_ris, seeds, "ris-phase", &[topo_idx])
}

/// Phase draw from a caller-chosen purpose label. Used to rerandomize the
/// surface configuration while keeping everything else fixed
/// (phase-invariance checks, per-draw redraw mode).
pub fn draw_ris_phases_labeled(
    ris_count: usize,
    elements_per_ris: usize,
    seeds: &SeedContext,
    purpose: &str,
    labels: &[u64],
) -> RisPhases {
    let mut v = Array2::from_elem((ris_count, elements_per_ris), Complex64::new(1.0, 0.0));
    for s in 0..ris_count {
        let mut lab = labels.to_vec();
        lab.push(s as u64);
        let mut rng = seeds.stream(purpose, &lab);
        for n in 0..elements_per_ris {
            v[[s, n]] = unit_phase(&mut rng);
        }
    }
    RisPhases { v }
}

/// Draw the line-of-sight AP-surface coefficients for one topology
/// (`M x S x N`, entry modulus `sqrt(beta_1[m,s])`).
pub fn draw_h1(
    ls: &LargeScale,
    elements_per_ris: usize,
    seeds: &SeedContext,
    topo_idx: u64,
) -> Array3<Complex64> {
    let (m_count, s_count) = ls.beta_1.dim();
    let mut h1 = Array3::from_elem((m_count, s_count, elements_per_ris), Complex64::new(0.0, 0.0));
    for m in 0..m_count {
        for s in 0..s_count {
            let amp = ls.beta_1[[m, s]].sqrt();
            let mut rng = seeds.stream("h-ap-ris", &[topo_idx, m as u64, s as u64]);
            for n in 0..elements_per_ris {
                h1[[m, s, n]] = amp * unit_phase(&mut rng);
            }
        }
    }
    h1
}

/// Draw one coherence interval of Rayleigh fading: direct coefficients
/// `CN(0, beta_d[m,k])` and per-element surface-user coefficients
/// `CN(0, beta_2[s,k])`.
pub fn draw_fast_fading(
    ls: &LargeScale,
    elements_per_ris: usize,
    seeds: &SeedContext,
    topo_idx: u64,
    draw_idx: u64,
) -> FastFading {
    let (m_count, k_count) = ls.beta_d.dim();
    let s_count = ls.beta_2.dim().0;

    let mut rng = seeds.stream("h-direct", &[topo_idx, draw_idx]);
    let mut h_d = Array2::from_elem((m_count, k_count), Complex64::new(0.0, 0.0));
    for m in 0..m_count {
        for k in 0..k_count {
            h_d[[m, k]] = complex_normal(&mut rng, ls.beta_d[[m, k]]);
        }
    }

    let mut rng = seeds.stream("h-ris-user", &[topo_idx, draw_idx]);
    let mut h_2 = Array3::from_elem((s_count, k_count, elements_per_ris), Complex64::new(0.0, 0.0));
    for s in 0..s_count {
        for k in 0..k_count {
            let var = ls.beta_2[[s, k]];
            for n in 0..elements_per_ris {
                h_2[[s, k, n]] = complex_normal(&mut rng, var);
            }
        }
    }

    FastFading { h_d, h_2 }
}

/// Precomputed per-topology reflection weights `h1[m,s,n] * v[s,n]`,
/// flattened to `M x (S*N)` so the per-draw aggregation is one matrix
/// product.
#[derive(Debug, Clone)]
pub struct AggregateWeights {
    w: Array2<Complex64>,
    elements_per_ris: usize,
}

impl AggregateWeights {
    pub fn new(h1: &Array3<Complex64>, phases: &RisPhases) -> Self {
        let (m_count, s_count, n_count) = h1.dim();
        assert_eq!(phases.v.dim(), (s_count, n_count), "phase shape mismatch");
        let mut w = Array2::from_elem((m_count, s_count * n_count), Complex64::new(0.0, 0.0));
        for m in 0..m_count {
            for s in 0..s_count {
                for n in 0..n_count {
                    w[[m, s * n_count + n]] = h1[[m, s, n]] * phases.v[[s, n]];
                }
            }
        }
        Self { w, elements_per_ris: n_count }
    }

    /// `g = W * flatten(h_2) + h_d`. With no surfaces this is the direct
    /// channel, bit for bit.
    pub fn aggregate(&self, fading: &FastFading) -> Array2<Complex64> {
        let (s_count, k_count, n_count) = fading.h_2.dim();
        assert_eq!(n_count, self.elements_per_ris, "element count mismatch");
        assert_eq!(fading.h_d.dim().0, self.w.dim().0, "AP count mismatch");
        if s_count == 0 {
            return fading.h_d.clone();
        }
        let mut x = Array2::from_elem((s_count * n_count, k_count), Complex64::new(0.0, 0.0));
        for s in 0..s_count {
            for k in 0..k_count {
                for n in 0..n_count {
                    x[[s * n_count + n, k]] = fading.h_2[[s, k, n]];
                }
            }
        }
        let mut g = cmatmul(&self.w.view(), &x.view());
        g += &fading.h_d;
        g
    }
}

/// Aggregate channel matrix (`M x K`) for one coherence interval.
pub fn aggregate_channel(
    fading: &FastFading,
    h1: &Array3<Complex64>,
    phases: &RisPhases,
) -> Array2<Complex64> {
    AggregateWeights::new(h1, phases).aggregate(fading)
}

/// The reflected-path part of the channel variance,
/// `N * sum_s beta_1[m,s] * beta_2[s,k]` (`M x K`).
pub fn ris_array_gain(ls: &LargeScale, elements_per_ris: usize) -> Array2<f64> {
    let mut gain = ls.beta_1.dot(&ls.beta_2);
    gain.mapv_inplace(|x| x * elements_per_ris as f64);
    gain
}

/// Variance `rho[m,k]` of the aggregate channel.
pub fn channel_variance(ls: &LargeScale, elements_per_ris: usize) -> Array2<f64> {
    if ls.beta_2.dim().0 == 0 {
        return ls.beta_d.clone();
    }
    let mut rho = ris_array_gain(ls, elements_per_ris);
    rho += &ls.beta_d;
    rho
}

/// CSV dump of the variance matrix (`m,k,rho`).
pub fn rho_to_csv(rho: &Array2<f64>) -> String {
    let mut out = String::from("m,k,rho\n");
    for ((m, k), r) in rho.indexed_iter() {
        out.push_str(&format!("{m},{k},{r:e}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::draw_topology;
    use crate::large_scale::compute_large_scale;
    use crate::scenario::ScenarioConfig;

    fn small_scenario() -> (ScenarioConfig, LargeScale, SeedContext) {
        let cfg = ScenarioConfig::parse_str("M=2\nK=2\nS=3\nN=4\nD=0.5\n").unwrap();
        let seeds = SeedContext::new(17);
        let topo = draw_topology(&cfg, &seeds, 0);
        let ls = compute_large_scale(&topo, &cfg, &seeds, 0);
        (cfg, ls, seeds)
    }

    #[test]
    fn phases_have_unit_modulus() {
        let seeds = SeedContext::new(3);
        let phases = draw_ris_phases(1, 1, &seeds, 0);
        assert!((phases.v[[0, 0]].norm() - 1.0).abs() < 1e-14);
        let phases = draw_ris_phases(5, 64, &seeds, 1);
        for v in phases.v.iter() {
            assert!((v.norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn phase_angles_are_uniform() {
        let seeds = SeedContext::new(8);
        let bins = 16usize;
        let mut observed = vec![0usize; bins];
        let n: usize = 1_000_000;
        let phases = draw_ris_phases(100, n / 100, &seeds, 0);
        for v in phases.v.iter() {
            let angle = v.im.atan2(v.re).rem_euclid(TAU);
            observed[((angle / TAU * bins as f64) as usize).min(bins - 1)] += 1;
        }
        let expected = n as f64 / bins as f64;
        let chi_sq: f64 = observed.iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum();
        assert!(chi_sq < 40.0, "chi_sq = {chi_sq}");
    }

    #[test]
    fn h1_modulus_is_pinned_by_beta() {
        let (cfg, ls, seeds) = small_scenario();
        let h1 = draw_h1(&ls, cfg.elements_per_ris, &seeds, 0);
        for ((m, s, _), h) in h1.indexed_iter() {
            let expect = ls.beta_1[[m, s]];
            assert!((h.norm_sqr() - expect).abs() / expect < 1e-12);
        }
    }

    #[test]
    fn h1_is_prefix_stable_in_element_count() {
        let (_, ls, seeds) = small_scenario();
        let small = draw_h1(&ls, 3, &seeds, 0);
        let large = draw_h1(&ls, 7, &seeds, 0);
        assert_eq!(small, large.slice(ndarray::s![.., .., ..3]).to_owned());
    }

    #[test]
    fn vanishing_variance_gives_vanishing_coefficients() {
        let ls = LargeScale::uniform(1e-30, 2, 0, 2);
        let fading = draw_fast_fading(&ls, 1, &SeedContext::new(1), 0, 0);
        for h in fading.h_d.iter() {
            assert!(h.norm_sqr() < 1e-25);
        }
    }

    #[test]
    fn rayleigh_coefficients_have_unit_variance() {
        let ls = LargeScale::uniform(1.0, 1, 2, 50);
        let seeds = SeedContext::new(23);
        let mut acc = 0.0;
        let mut count = 0usize;
        for d in 0..100 {
            let fading = draw_fast_fading(&ls, 100, &seeds, 0, d);
            acc += fading.h_2.iter().map(|h| h.norm_sqr()).sum::<f64>();
            count += fading.h_2.len();
        }
        assert!(count >= 1_000_000);
        let mean = acc / count as f64;
        assert!((mean - 1.0).abs() < 0.01, "mean power = {mean}");
    }

    #[test]
    fn no_surfaces_reduces_to_direct_channel() {
        let cfg = ScenarioConfig::parse_str("M=3\nK=2\nS=0\nN=1\nD=0.5\n").unwrap();
        let seeds = SeedContext::new(2);
        let topo = draw_topology(&cfg, &seeds, 0);
        let ls = compute_large_scale(&topo, &cfg, &seeds, 0);
        let h1 = draw_h1(&ls, cfg.elements_per_ris, &seeds, 0);
        let phases = draw_ris_phases(0, cfg.elements_per_ris, &seeds, 0);
        let fading = draw_fast_fading(&ls, cfg.elements_per_ris, &seeds, 0, 0);
        let g = aggregate_channel(&fading, &h1, &phases);
        assert_eq!(g, fading.h_d);
        assert_eq!(channel_variance(&ls, cfg.elements_per_ris), ls.beta_d);
    }

    #[test]
    fn single_path_hand_computation() {
        // h1 = 1, v = j, h2 = 1, h_d = 1  =>  g = 1 + j
        let h1 = Array3::from_elem((1, 1, 1), Complex64::new(1.0, 0.0));
        let phases = RisPhases { v: Array2::from_elem((1, 1), Complex64::new(0.0, 1.0)) };
        let fading = FastFading {
            h_d: Array2::from_elem((1, 1), Complex64::new(1.0, 0.0)),
            h_2: Array3::from_elem((1, 1, 1), Complex64::new(1.0, 0.0)),
        };
        let g = aggregate_channel(&fading, &h1, &phases);
        assert!((g[[0, 0]] - Complex64::new(1.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn empirical_variance_matches_rho() {
        let (cfg, ls, seeds) = small_scenario();
        let h1 = draw_h1(&ls, cfg.elements_per_ris, &seeds, 0);
        let phases = draw_ris_phases(cfg.ris_count, cfg.elements_per_ris, &seeds, 0);
        let weights = AggregateWeights::new(&h1, &phases);
        let rho = channel_variance(&ls, cfg.elements_per_ris);

        let draws = 100_000;
        let mut acc = Array2::<f64>::zeros(rho.raw_dim());
        for d in 0..draws {
            let fading = draw_fast_fading(&ls, cfg.elements_per_ris, &seeds, 0, d);
            let g = weights.aggregate(&fading);
            ndarray::azip!((a in &mut acc, &gv in &g) *a += gv.norm_sqr());
        }
        acc.mapv_inplace(|x| x / draws as f64);
        for (a, r) in acc.iter().zip(rho.iter()) {
            assert!((a - r).abs() / r < 0.02, "empirical {a} vs rho {r}");
        }
    }

    #[test]
    fn uniform_beta_variance_is_exact() {
        // beta = 1 everywhere, S = 30, N = 10: rho = S*N + 1 = 301 exactly.
        let ls = LargeScale::uniform(1.0, 4, 30, 5);
        let rho = channel_variance(&ls, 10);
        assert!(rho.iter().all(|&r| r == 301.0));
    }

    #[test]
    fn array_gain_is_affine_in_elements() {
        let (_, ls, _) = small_scenario();
        let g1 = ris_array_gain(&ls, 5);
        let g2 = ris_array_gain(&ls, 10);
        // doubling N doubles the reflected part bit-exactly
        let diff = &g2 - &g1;
        assert_eq!(diff, g1);
    }

    #[test]
    fn array_gain_slope_per_surface() {
        let (_, ls, _) = small_scenario();
        let n = 5usize;
        let full = ris_array_gain(&ls, n);
        // accumulate surfaces one at a time: slope of each step is
        // beta_1[m,s] * beta_2[s,k] * N
        let (m_count, k_count) = ls.beta_d.dim();
        for m in 0..m_count {
            for k in 0..k_count {
                let manual: f64 = (0..ls.beta_2.dim().0)
                    .map(|s| ls.beta_1[[m, s]] * ls.beta_2[[s, k]] * n as f64)
                    .sum();
                assert!((full[[m, k]] - manual).abs() <= 1e-14 * manual.abs());
            }
        }
    }

    #[test]
    fn aggregation_is_linear_in_fading_terms() {
        let (cfg, ls, seeds) = small_scenario();
        let h1 = draw_h1(&ls, cfg.elements_per_ris, &seeds, 0);
        let phases = draw_ris_phases(cfg.ris_count, cfg.elements_per_ris, &seeds, 0);
        let fa = draw_fast_fading(&ls, cfg.elements_per_ris, &seeds, 0, 0);
        let fb = draw_fast_fading(&ls, cfg.elements_per_ris, &seeds, 0, 1);
        let sum = FastFading { h_d: &fa.h_d + &fb.h_d, h_2: &fa.h_2 + &fb.h_2 };
        let g_sum = aggregate_channel(&sum, &h1, &phases);
        let g_parts = aggregate_channel(&fa, &h1, &phases) + aggregate_channel(&fb, &h1, &phases);
        for (a, b) in g_sum.iter().zip(g_parts.iter()) {
            assert!((a - b).norm() < 1e-12 * b.norm().max(1e-30));
        }
    }

    #[test]
    fn fast_fading_is_reproducible_per_draw_index() {
        let (cfg, ls, seeds) = small_scenario();
        let a = draw_fast_fading(&ls, cfg.elements_per_ris, &seeds, 3, 7);
        let b = draw_fast_fading(&ls, cfg.elements_per_ris, &seeds, 3, 7);
        assert_eq!(a.h_d, b.h_d);
        assert_eq!(a.h_2, b.h_2);
        let c = draw_fast_fading(&ls, cfg.elements_per_ris, &seeds, 3, 8);
        assert_ne!(a.h_d, c.h_d);
    }
}
