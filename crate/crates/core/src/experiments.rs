//! Network-level experiment drivers: the closed-form validation sweep, the
//! min-rate and throughput CDFs, and the AP-replacement sum-rate sweep.
//!
//! Every driver aggregates over independent topology draws. Draws are
//! scheduled in parallel but identified purely by their index, and all
//! accumulation happens in draw order with pairwise summation, so reports
//! are bit-identical across thread counts. Comparisons between a
//! configuration and its no-surface baseline reuse the same per-entity
//! substreams (common random numbers): both systems see the identical AP
//! and user placements, direct-link shadowing, and fading draws.

use crate::channels::{
    channel_variance, draw_fast_fading, draw_h1, draw_ris_phases_labeled, AggregateWeights,
    RisPhases,
};
use crate::downlink::{
    closed_form_rate, default_eta, instantaneous_rates, mc_rate, per_user_throughput, sinr_terms,
    sum_rate, PowerControl, RateReport,
};
use crate::estimation::{estimate_channels, gamma_matrix, PilotBook};
use crate::geometry::{draw_topology, Topology};
use crate::large_scale::{compute_large_scale, LargeScale};
use crate::linalg::{mean_and_stderr, pairwise_sum};
use crate::scenario::{ScenarioConfig, SeedContext};
use ndarray::{Array2, Array3};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use std::sync::atomic::{AtomicUsize, Ordering};

/// Optional completion callback `(done, total)` for long-running drivers.
pub type Progress<'a> = Option<&'a (dyn Fn(usize, usize) + Sync)>;

fn tick(progress: Progress, counter: &AtomicUsize, total: usize) {
    if let Some(cb) = progress {
        let done = counter.fetch_add(1, Ordering::Relaxed) + 1;
        cb(done, total);
    }
}

/// Everything that is fixed over one topology draw: placements, large-scale
/// gains, line-of-sight coefficients, surface phases, channel statistics,
/// and the power-control solution.
pub struct TopologyRealization {
    pub topology: Topology,
    pub large_scale: LargeScale,
    pub h1: Array3<Complex64>,
    pub phases: RisPhases,
    pub rho: Array2<f64>,
    pub gamma: Array2<f64>,
    pub power: PowerControl,
    pub pilot_book: PilotBook,
    weights: AggregateWeights,
}

impl TopologyRealization {
    pub fn generate(cfg: &ScenarioConfig, seeds: &SeedContext, topo_idx: u64) -> Self {
        Self::generate_with_phase_purpose(cfg, seeds, topo_idx, "ris-phase")
    }

    /// Same pipeline with the surface phases drawn from a different
    /// substream; everything a phase draw cannot influence stays identical.
    pub fn generate_with_phase_purpose(
        cfg: &ScenarioConfig,
        seeds: &SeedContext,
        topo_idx: u64,
        phase_purpose: &str,
    ) -> Self {
        let topology = draw_topology(cfg, seeds, topo_idx);
        let large_scale = compute_large_scale(&topology, cfg, seeds, topo_idx);
        let h1 = draw_h1(&large_scale, cfg.elements_per_ris, seeds, topo_idx);
        let phases = draw_ris_phases_labeled(
            cfg.ris_count,
            cfg.elements_per_ris,
            seeds,
            phase_purpose,
            &[topo_idx],
        );
        let rho = channel_variance(&large_scale, cfg.elements_per_ris);
        let gamma = gamma_matrix(&rho, cfg.pilot_len_symbols, cfg.pilot_snr());
        let power = default_eta(&gamma);
        let pilot_book = PilotBook::dft(cfg.pilot_len_symbols, cfg.user_count);
        let weights = AggregateWeights::new(&h1, &phases);
        Self { topology, large_scale, h1, phases, rho, gamma, power, pilot_book, weights }
    }

    /// Closed-form per-user rates for this topology.
    pub fn closed_rates(&self, cfg: &ScenarioConfig) -> Vec<f64> {
        closed_form_rate(&sinr_terms(&self.gamma, &self.rho, &self.power, cfg.data_snr()))
    }

    /// One Monte-Carlo coherence interval: fresh fading, aggregation,
    /// pilot reception, and MMSE estimation.
    pub fn draw_channel(
        &self,
        cfg: &ScenarioConfig,
        seeds: &SeedContext,
        topo_idx: u64,
        draw_idx: u64,
    ) -> (Array2<Complex64>, Array2<Complex64>) {
        let fading =
            draw_fast_fading(&self.large_scale, cfg.elements_per_ris, seeds, topo_idx, draw_idx);
        let g = if cfg.ris_phase_redraw {
            let phases = draw_ris_phases_labeled(
                cfg.ris_count,
                cfg.elements_per_ris,
                seeds,
                "ris-phase-redraw",
                &[topo_idx, draw_idx],
            );
            AggregateWeights::new(&self.h1, &phases).aggregate(&fading)
        } else {
            self.weights.aggregate(&fading)
        };
        let mut pilot_rng = seeds.stream("pilot-noise", &[topo_idx, draw_idx]);
        let estimate =
            estimate_channels(&g, &self.rho, &self.pilot_book, cfg.pilot_snr(), &mut pilot_rng);
        (g, estimate.g_hat)
    }

    /// One coherence interval with the aggregate channels drawn directly
    /// from their per-entry law, `g[m,k] ~ CN(0, rho[m,k])` i.i.d., followed
    /// by the genuine pilot pipeline.
    ///
    /// The closed-form analysis treats the aggregates as independent across
    /// APs. The element-wise construction only satisfies that approximately:
    /// conditioned on the line-of-sight draw, APs share the `S*N` surface
    /// fading coefficients, and when the reflected paths carry most of the
    /// power and `M` is comparable to `S*N` the cross-AP correlation
    /// visibly raises the interference. Validating the rate expression
    /// against its own model therefore requires sampling the asserted law;
    /// physical experiments keep [`TopologyRealization::draw_channel`].
    pub fn draw_channel_statistical(
        &self,
        cfg: &ScenarioConfig,
        seeds: &SeedContext,
        topo_idx: u64,
        draw_idx: u64,
    ) -> (Array2<Complex64>, Array2<Complex64>) {
        use rand_distr::StandardNormal;
        let mut rng = seeds.stream("g-marginal", &[topo_idx, draw_idx]);
        let g = self.rho.mapv(|r| {
            let s = (r / 2.0).sqrt();
            let re: f64 = rand::Rng::sample(&mut rng, StandardNormal);
            let im: f64 = rand::Rng::sample(&mut rng, StandardNormal);
            Complex64::new(s * re, s * im)
        });
        let mut pilot_rng = seeds.stream("pilot-noise", &[topo_idx, draw_idx]);
        let estimate =
            estimate_channels(&g, &self.rho, &self.pilot_book, cfg.pilot_snr(), &mut pilot_rng);
        (g, estimate.g_hat)
    }
}

fn standard_notes(cfg: &ScenarioConfig) -> Vec<String> {
    let mut notes = vec![
        format!(
            "pilot_len_symbols = {} (defaults to user_count, the minimum orthogonal book)",
            cfg.pilot_len_symbols
        ),
        "finite square area, no wrap-around: boundary effects are part of the model".to_string(),
    ];
    if let Some(b) = cfg.beta_override {
        notes.push(format!("beta_override = {b}: path loss and shadowing bypassed"));
    }
    notes
}

/// Closed-form and Monte-Carlo rates for a single topology draw of `cfg`
/// (topology index 0, `channel_draws_per_topology` Monte-Carlo draws).
pub fn rate_report(cfg: &ScenarioConfig) -> RateReport {
    let seeds = SeedContext::new(cfg.master_seed);
    let real = TopologyRealization::generate(cfg, &seeds, 0);
    let closed = real.closed_rates(cfg);
    let mc = mc_rate(
        cfg.channel_draws_per_topology,
        cfg.user_count,
        cfg.data_snr(),
        &real.power,
        |d| real.draw_channel(cfg, &seeds, 0, d),
    );
    let throughput = per_user_throughput(
        &closed,
        cfg.bandwidth_hz,
        cfg.pilot_len_symbols,
        cfg.coherence_len_symbols,
    );
    let min_rate = closed.iter().cloned().fold(f64::INFINITY, f64::min);
    RateReport {
        config_hash: cfg.config_hash(),
        master_seed: cfg.master_seed,
        topology_index: 0,
        channel_draws: mc.draws,
        pilot_len_symbols: cfg.pilot_len_symbols,
        sum_rate: sum_rate(&closed, cfg.pilot_len_symbols, cfg.coherence_len_symbols),
        per_user_closed: closed,
        per_user_mc: mc.per_user,
        per_user_mc_stderr: mc.per_user_stderr,
        throughput_bps: throughput,
        min_rate,
        notes: standard_notes(cfg),
    }
}

/// The no-surface reference system: the identical pipeline with `S = 0`.
pub fn baseline_cf(cfg: &ScenarioConfig) -> RateReport {
    let mut base = cfg.clone();
    base.ris_count = 0;
    rate_report(&base)
}

/// Parameter swept by [`SweepSpec`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SweepParam {
    ApCount,
    RisCount,
    ElementsPerRis,
    UserCount,
}

impl SweepParam {
    pub fn apply(&self, cfg: &ScenarioConfig, value: usize) -> ScenarioConfig {
        let mut out = cfg.clone();
        match self {
            SweepParam::ApCount => out.ap_count = value,
            SweepParam::RisCount => out.ris_count = value,
            SweepParam::ElementsPerRis => out.elements_per_ris = value,
            SweepParam::UserCount => {
                out.user_count = value;
                out.pilot_len_symbols = out.pilot_len_symbols.max(value);
            }
        }
        out
    }
}

/// A validated sweep: base scenario plus a strictly increasing value list.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub values: Vec<usize>,
    pub base: ScenarioConfig,
}

impl SweepSpec {
    pub fn new(param: SweepParam, values: Vec<usize>, base: ScenarioConfig) -> Result<Self, String> {
        if values.is_empty() {
            return Err("sweep needs at least one value".into());
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(format!("sweep values must be strictly increasing, got {values:?}"));
        }
        Ok(Self { param, values, base })
    }
}

/// One row of the validation sweep.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationRow {
    pub value: usize,
    /// Closed-form per-user rate, averaged over users and topology draws.
    pub closed_mean: f64,
    /// Monte-Carlo per-user rate, averaged over users and all draws.
    pub mc_mean: f64,
    pub mc_stderr: f64,
    pub draws: usize,
}

/// Closed-form versus Monte-Carlo rate at every sweep point.
///
/// Per point, `topology_draws` independent realizations are generated and
/// `channel_draws_per_topology` coherence intervals are simulated in each.
/// The Monte-Carlo side draws the aggregates from their asserted law via
/// [`TopologyRealization::draw_channel_statistical`], matching the
/// independence assumptions of the expression under validation, and runs
/// the genuine pilot pipeline on every draw.
pub fn validation_sweep(spec: &SweepSpec, progress: Progress) -> Vec<ValidationRow> {
    let total_points = spec.values.len();
    let counter = AtomicUsize::new(0);
    spec.values
        .iter()
        .map(|&value| {
            let cfg = spec.param.apply(&spec.base, value);
            let seeds = SeedContext::new(cfg.master_seed);
            let topo_count = cfg.topology_draws;
            let per_topo = cfg.channel_draws_per_topology;

            let realizations: Vec<TopologyRealization> = (0..topo_count as u64)
                .into_par_iter()
                .map(|t| TopologyRealization::generate(&cfg, &seeds, t))
                .collect();

            let closed_means: Vec<f64> = realizations
                .iter()
                .map(|r| pairwise_sum(&r.closed_rates(&cfg)) / cfg.user_count as f64)
                .collect();
            let closed_mean = pairwise_sum(&closed_means) / topo_count as f64;

            let total = topo_count * per_topo;
            let draw_means: Vec<f64> = (0..total as u64)
                .into_par_iter()
                .map(|flat| {
                    let t = flat / per_topo as u64;
                    let d = flat % per_topo as u64;
                    let real = &realizations[t as usize];
                    let (g, g_hat) = real.draw_channel_statistical(&cfg, &seeds, t, d);
                    let rates = instantaneous_rates(&g, &g_hat, &real.power, cfg.data_snr());
                    pairwise_sum(&rates) / cfg.user_count as f64
                })
                .collect();
            let (mc_mean, mc_stderr) = mean_and_stderr(&draw_means);

            tick(progress, &counter, total_points);
            ValidationRow { value, closed_mean, mc_mean, mc_stderr, draws: total }
        })
        .collect()
}

/// Empirical CDF over a sample set: sorted values with levels `i/n`.
#[derive(Debug, Clone, Serialize)]
pub struct CdfTable {
    sorted: Vec<f64>,
}

impl CdfTable {
    pub fn from_samples(mut samples: Vec<f64>) -> Self {
        assert!(!samples.is_empty(), "CDF needs samples");
        samples.sort_by(|a, b| a.partial_cmp(b).expect("no NaN samples"));
        Self { sorted: samples }
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// Smallest sample whose empirical CDF reaches `p`: the order statistic
    /// of rank `ceil(p * n)`.
    pub fn quantile(&self, p: f64) -> f64 {
        assert!((0.0..=1.0).contains(&p), "probability out of range: {p}");
        let n = self.sorted.len();
        let rank = ((p * n as f64).ceil() as usize).clamp(1, n);
        self.sorted[rank - 1]
    }

    /// `(value, cdf_level)` pairs, one per sample.
    pub fn levels(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let n = self.sorted.len() as f64;
        self.sorted.iter().enumerate().map(move |(i, &v)| (v, (i + 1) as f64 / n))
    }

    /// Percentile-bootstrap confidence interval for `quantile(p)`.
    pub fn bootstrap_ci(&self, p: f64, reps: usize, seeds: &SeedContext, level: f64) -> (f64, f64) {
        use rand::Rng;
        let n = self.sorted.len();
        let mut stats: Vec<f64> = (0..reps as u64)
            .map(|rep| {
                let mut rng = seeds.stream("bootstrap", &[rep]);
                let mut resample: Vec<f64> =
                    (0..n).map(|_| self.sorted[rng.random_range(0..n)]).collect();
                resample.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let rank = ((p * n as f64).ceil() as usize).clamp(1, n);
                resample[rank - 1]
            })
            .collect();
        stats.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let alpha = (1.0 - level) / 2.0;
        let lo = stats[((alpha * reps as f64) as usize).min(reps - 1)];
        let hi = stats[(((1.0 - alpha) * reps as f64) as usize).min(reps - 1)];
        (lo, hi)
    }

    /// CSV dump with columns `value,cdf`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("value,cdf\n");
        for (v, c) in self.levels() {
            out.push_str(&format!("{v},{c}\n"));
        }
        out
    }
}

/// CDF experiment output: the table plus the requested quantiles.
#[derive(Debug, Clone, Serialize)]
pub struct CdfReport {
    pub config_hash: String,
    pub master_seed: u64,
    pub topology_draws: usize,
    pub quantiles: Vec<(f64, f64)>,
    pub cdf: CdfTable,
}

/// CDF of the per-topology minimum closed-form user rate.
pub fn min_rate_cdf(
    cfg: &ScenarioConfig,
    topology_draws: usize,
    outage_levels: &[f64],
    progress: Progress,
) -> CdfReport {
    assert!(topology_draws >= 1);
    let seeds = SeedContext::new(cfg.master_seed);
    let counter = AtomicUsize::new(0);
    let samples: Vec<f64> = (0..topology_draws as u64)
        .into_par_iter()
        .map(|t| {
            let real = TopologyRealization::generate(cfg, &seeds, t);
            let min = real.closed_rates(cfg).into_iter().fold(f64::INFINITY, f64::min);
            tick(progress, &counter, topology_draws);
            min
        })
        .collect();
    let cdf = CdfTable::from_samples(samples);
    let quantiles = outage_levels.iter().map(|&p| (p, cdf.quantile(p))).collect();
    CdfReport {
        config_hash: cfg.config_hash(),
        master_seed: cfg.master_seed,
        topology_draws,
        quantiles,
        cdf,
    }
}

/// CDF of the per-user closed-form net throughput across topology draws.
pub fn throughput_cdf(
    cfg: &ScenarioConfig,
    topology_draws: usize,
    outage_levels: &[f64],
    progress: Progress,
) -> CdfReport {
    assert!(topology_draws >= 1);
    let seeds = SeedContext::new(cfg.master_seed);
    let counter = AtomicUsize::new(0);
    let per_topo: Vec<Vec<f64>> = (0..topology_draws as u64)
        .into_par_iter()
        .map(|t| {
            let real = TopologyRealization::generate(cfg, &seeds, t);
            let rates = real.closed_rates(cfg);
            tick(progress, &counter, topology_draws);
            per_user_throughput(
                &rates,
                cfg.bandwidth_hz,
                cfg.pilot_len_symbols,
                cfg.coherence_len_symbols,
            )
        })
        .collect();
    let samples: Vec<f64> = per_topo.into_iter().flatten().collect();
    let cdf = CdfTable::from_samples(samples);
    let quantiles = outage_levels.iter().map(|&p| (p, cdf.quantile(p))).collect();
    CdfReport {
        config_hash: cfg.config_hash(),
        master_seed: cfg.master_seed,
        topology_draws,
        quantiles,
        cdf,
    }
}

/// One point of the no-surface sum-rate curve.
#[derive(Debug, Clone, Serialize)]
pub struct ApSweepPoint {
    pub ap_count: usize,
    pub mean_sum_rate: f64,
    pub stderr: f64,
}

/// Mean and standard error of the per-topology sum-rate difference between
/// a surface deployment and the no-surface system on the same draws.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PairedGain {
    pub mean: f64,
    pub stderr: f64,
}

/// A fixed-AP surface deployment and its sum rate, with the AP count of the
/// no-surface system that would match it.
#[derive(Debug, Clone, Serialize)]
pub struct RisConfigResult {
    pub ap_count: usize,
    pub ris_count: usize,
    pub mean_sum_rate: f64,
    pub stderr: f64,
    /// Sum-rate gain over the no-surface point at the same AP count,
    /// paired per topology draw (available when the curve includes that
    /// point; the pairing removes the common topology noise).
    pub paired_gain: Option<PairedGain>,
    /// Interpolated AP count at which the no-surface curve reaches this sum
    /// rate; `None` when it falls outside the swept range.
    pub equivalent_ap_count: Option<f64>,
    /// 95% interval for the equivalent AP count. Derived from the paired
    /// difference when available, otherwise from the conservative +-1.96
    /// stderr bands of both curves.
    pub equivalent_ap_ci: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ApSweepReport {
    pub config_hash: String,
    pub master_seed: u64,
    pub topology_draws: usize,
    pub cf_curve: Vec<ApSweepPoint>,
    pub ris_configs: Vec<RisConfigResult>,
}

fn sum_rate_samples(cfg: &ScenarioConfig, draws: usize) -> Vec<f64> {
    let seeds = SeedContext::new(cfg.master_seed);
    (0..draws as u64)
        .into_par_iter()
        .map(|t| {
            let real = TopologyRealization::generate(cfg, &seeds, t);
            sum_rate(&real.closed_rates(cfg), cfg.pilot_len_symbols, cfg.coherence_len_symbols)
        })
        .collect()
}

fn interpolate_curve(curve: &[(f64, f64)], target: f64) -> Option<f64> {
    for pair in curve.windows(2) {
        let (x0, y0) = pair[0];
        let (x1, y1) = pair[1];
        let (lo, hi) = if y0 <= y1 { (y0, y1) } else { (y1, y0) };
        if target >= lo && target <= hi && y1 != y0 {
            return Some(x0 + (target - y0) / (y1 - y0) * (x1 - x0));
        }
    }
    None
}

/// Sum-rate comparison between a densifying no-surface deployment and fixed
/// AP counts enriched with surfaces.
///
/// All configurations share topology substreams, so a surface deployment is
/// compared against the prefix of the same AP and user draws.
pub fn ap_replacement_sweep(
    cfg: &ScenarioConfig,
    cf_ap_counts: &[usize],
    ris_ap_count: usize,
    ris_counts: &[usize],
    progress: Progress,
) -> ApSweepReport {
    assert!(!cf_ap_counts.is_empty() && cf_ap_counts.windows(2).all(|w| w[0] < w[1]));
    let draws = cfg.topology_draws;
    let total = cf_ap_counts.len() + ris_counts.len();
    let counter = AtomicUsize::new(0);

    let cf_samples: Vec<Vec<f64>> = cf_ap_counts
        .iter()
        .map(|&m| {
            let mut point_cfg = cfg.clone();
            point_cfg.ap_count = m;
            point_cfg.ris_count = 0;
            let samples = sum_rate_samples(&point_cfg, draws);
            tick(progress, &counter, total);
            samples
        })
        .collect();
    let cf_curve: Vec<ApSweepPoint> = cf_ap_counts
        .iter()
        .zip(&cf_samples)
        .map(|(&m, samples)| {
            let (mean, se) = mean_and_stderr(samples);
            ApSweepPoint { ap_count: m, mean_sum_rate: mean, stderr: se }
        })
        .collect();

    let mean_curve: Vec<(f64, f64)> =
        cf_curve.iter().map(|p| (p.ap_count as f64, p.mean_sum_rate)).collect();
    let hi_curve: Vec<(f64, f64)> = cf_curve
        .iter()
        .map(|p| (p.ap_count as f64, p.mean_sum_rate + 1.96 * p.stderr))
        .collect();
    let lo_curve: Vec<(f64, f64)> = cf_curve
        .iter()
        .map(|p| (p.ap_count as f64, p.mean_sum_rate - 1.96 * p.stderr))
        .collect();
    let paired_reference = cf_ap_counts
        .iter()
        .position(|&m| m == ris_ap_count)
        .map(|idx| &cf_samples[idx]);

    let ris_configs = ris_counts
        .iter()
        .map(|&s| {
            let mut ris_cfg = cfg.clone();
            ris_cfg.ap_count = ris_ap_count;
            ris_cfg.ris_count = s;
            let samples = sum_rate_samples(&ris_cfg, draws);
            let (mean, se) = mean_and_stderr(&samples);
            let equivalent = interpolate_curve(&mean_curve, mean);

            // With a curve point at the same AP count the comparison is
            // paired draw for draw, which removes the shared topology noise
            // from the interval.
            let paired_gain = paired_reference.map(|reference| {
                let diffs: Vec<f64> =
                    samples.iter().zip(reference.iter()).map(|(a, b)| a - b).collect();
                let (mean, stderr) = mean_and_stderr(&diffs);
                PairedGain { mean, stderr }
            });
            let ci = if let Some(gain) = &paired_gain {
                let lo = interpolate_curve(&mean_curve, mean - 1.96 * gain.stderr);
                let hi = interpolate_curve(&mean_curve, mean + 1.96 * gain.stderr);
                lo.zip(hi)
            } else {
                let lo = interpolate_curve(&hi_curve, mean - 1.96 * se);
                let hi = interpolate_curve(&lo_curve, mean + 1.96 * se);
                lo.zip(hi)
            };
            tick(progress, &counter, total);
            RisConfigResult {
                ap_count: ris_ap_count,
                ris_count: s,
                mean_sum_rate: mean,
                stderr: se,
                paired_gain,
                equivalent_ap_count: equivalent,
                equivalent_ap_ci: ci,
            }
        })
        .collect();

    ApSweepReport {
        config_hash: cfg.config_hash(),
        master_seed: cfg.master_seed,
        topology_draws: draws,
        cf_curve,
        ris_configs,
    }
}
