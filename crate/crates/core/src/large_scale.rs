//! Large-scale fading: three-slope path loss with log-normal shadowing.
//!
//! Beyond the outer breakpoint `d1` the loss follows a Hata-COST231 form
//! with a per-link-kind far-field exponent; between `d0` and `d1` the
//! exponent is 2, and below `d0` the loss is constant. The three regions
//! are continuous at both breakpoints by construction. Shadowing applies
//! only beyond `d1`, independently per link.

use crate::geometry::{distance_m, Topology};
use crate::scenario::{ScenarioConfig, SeedContext};
use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

/// The three link classes, each with its own far-field exponent and the
/// endpoint heights that enter the fixed loss term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LinkKind {
    /// AP to user.
    Direct,
    /// AP to surface.
    ApRis,
    /// Surface to user.
    RisUser,
}

impl LinkKind {
    pub fn pathloss_exponent(&self, cfg: &ScenarioConfig) -> f64 {
        match self {
            LinkKind::Direct => cfg.pathloss_exp_direct,
            LinkKind::ApRis => cfg.pathloss_exp_ap_ris,
            LinkKind::RisUser => cfg.pathloss_exp_ris_user,
        }
    }

    /// Endpoint heights in meters, higher node first.
    pub fn heights_m(&self, cfg: &ScenarioConfig) -> (f64, f64) {
        let (a, b) = match self {
            LinkKind::Direct => (cfg.ap_height_m, cfg.user_height_m),
            LinkKind::ApRis => (cfg.ap_height_m, cfg.ris_height_m),
            LinkKind::RisUser => (cfg.ris_height_m, cfg.user_height_m),
        };
        (a.max(b), a.min(b))
    }

    fn stream_label(&self) -> u64 {
        match self {
            LinkKind::Direct => 0,
            LinkKind::ApRis => 1,
            LinkKind::RisUser => 2,
        }
    }

    fn csv_label(&self) -> &'static str {
        match self {
            LinkKind::Direct => "direct",
            LinkKind::ApRis => "ap_ris",
            LinkKind::RisUser => "ris_user",
        }
    }
}

/// Fixed loss term of the Hata-COST231 propagation model, in dB.
///
/// `h_hi_m` is the elevated endpoint (base-station role), `h_lo_m` the low
/// endpoint (mobile role). Kept as a single named function so alternative
/// fixed-loss models can be swapped in one place.
pub fn hata_fixed_loss_db(carrier_freq_mhz: f64, h_hi_m: f64, h_lo_m: f64) -> f64 {
    let lf = carrier_freq_mhz.log10();
    46.3 + 33.9 * lf - 13.82 * h_hi_m.log10() - (1.1 * lf - 0.7) * h_lo_m
        + (1.56 * lf - 0.8)
}

/// Path loss in dB (a negative gain) for a link of `kind` at `d_m` meters.
pub fn path_loss_db(d_m: f64, kind: LinkKind, cfg: &ScenarioConfig) -> f64 {
    assert!(d_m > 0.0, "distance must be positive, got {d_m}");
    let (h_hi, h_lo) = kind.heights_m(cfg);
    let fixed = hata_fixed_loss_db(cfg.carrier_freq_ghz * 1000.0, h_hi, h_lo);
    let alpha = kind.pathloss_exponent(cfg);
    let d0 = cfg.breakpoint_d0_m;
    let d1 = cfg.breakpoint_d1_m;
    if d_m > d1 {
        -fixed - 10.0 * alpha * (d_m / 1000.0).log10()
    } else if d_m > d0 {
        -fixed - 10.0 * alpha * (d1 / 1000.0).log10() - 20.0 * (d_m / d1).log10()
    } else {
        -fixed - 10.0 * alpha * (d1 / 1000.0).log10() - 20.0 * (d0 / d1).log10()
    }
}

/// Log-normal shadowing multiplier `10^(sigma * z / 10)`, `z ~ N(0,1)`.
/// Links shorter than the outer breakpoint see no shadowing at all.
pub fn shadowing_linear(d_m: f64, sigma_sh_db: f64, d1_m: f64, rng: &mut impl Rng) -> f64 {
    if d_m <= d1_m {
        return 1.0;
    }
    let z: f64 = rng.sample(StandardNormal);
    10f64.powf(sigma_sh_db * z / 10.0)
}

/// The three per-link attenuation matrices, linear scale.
#[derive(Debug, Clone, PartialEq)]
pub struct LargeScale {
    /// AP x user direct gains.
    pub beta_d: Array2<f64>,
    /// AP x surface gains.
    pub beta_1: Array2<f64>,
    /// Surface x user gains.
    pub beta_2: Array2<f64>,
}

impl LargeScale {
    /// All-`value` matrices for normalized validation scenarios.
    pub fn uniform(value: f64, m: usize, s: usize, k: usize) -> Self {
        Self {
            beta_d: Array2::from_elem((m, k), value),
            beta_1: Array2::from_elem((m, s), value),
            beta_2: Array2::from_elem((s, k), value),
        }
    }

    /// CSV dump with columns `link_kind,i,j,beta_linear,beta_db`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("link_kind,i,j,beta_linear,beta_db\n");
        let mut push = |kind: LinkKind, mat: &Array2<f64>| {
            for ((i, j), b) in mat.indexed_iter() {
                out.push_str(&format!(
                    "{},{i},{j},{:e},{}\n",
                    kind.csv_label(),
                    b,
                    10.0 * b.log10()
                ));
            }
        };
        push(LinkKind::Direct, &self.beta_d);
        push(LinkKind::ApRis, &self.beta_1);
        push(LinkKind::RisUser, &self.beta_2);
        out
    }
}

/// Path loss times shadowing for every link of the topology.
///
/// Each link draws its shadowing from an own substream keyed by
/// `(topology, kind, i, j)`: links are mutually independent and the matrices
/// are stable under growth of any node count. With `beta_override` set the
/// model is bypassed and every entry equals the override.
pub fn compute_large_scale(
    topo: &Topology,
    cfg: &ScenarioConfig,
    seeds: &SeedContext,
    topo_idx: u64,
) -> LargeScale {
    if let Some(value) = cfg.beta_override {
        return LargeScale::uniform(value, topo.aps.len(), topo.surfaces.len(), topo.users.len());
    }

    let gain = |a, b, kind: LinkKind, i: usize, j: usize| -> f64 {
        let d = distance_m(a, b);
        let mut rng = seeds.stream("shadowing", &[topo_idx, kind.stream_label(), i as u64, j as u64]);
        let shadow = shadowing_linear(d, cfg.shadow_std_db, cfg.breakpoint_d1_m, &mut rng);
        10f64.powf(path_loss_db(d, kind, cfg) / 10.0) * shadow
    };

    let beta_d = Array2::from_shape_fn((topo.aps.len(), topo.users.len()), |(m, k)| {
        gain(&topo.aps[m], &topo.users[k], LinkKind::Direct, m, k)
    });
    let beta_1 = Array2::from_shape_fn((topo.aps.len(), topo.surfaces.len()), |(m, s)| {
        gain(&topo.aps[m], &topo.surfaces[s], LinkKind::ApRis, m, s)
    });
    let beta_2 = Array2::from_shape_fn((topo.surfaces.len(), topo.users.len()), |(s, k)| {
        gain(&topo.surfaces[s], &topo.users[k], LinkKind::RisUser, s, k)
    });
    LargeScale { beta_d, beta_1, beta_2 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{draw_topology, Position};

    fn base_cfg() -> ScenarioConfig {
        ScenarioConfig::parse_str("M=4\nK=3\nS=2\nN=4\nD=1\n").unwrap()
    }

    #[test]
    fn fixed_loss_reference_value() {
        // 1900 MHz, 15 m / 1.65 m endpoints, worked out by hand.
        let l = hata_fixed_loss_db(1900.0, 15.0, 1.65);
        assert!((l - 140.7150837039).abs() < 1e-9, "{l}");
    }

    #[test]
    fn near_field_loss_is_constant() {
        let cfg = base_cfg();
        for kind in [LinkKind::Direct, LinkKind::ApRis, LinkKind::RisUser] {
            let a = path_loss_db(2.0, kind, &cfg);
            let b = path_loss_db(9.99, kind, &cfg);
            assert_eq!(a, b, "{kind:?}");
        }
    }

    #[test]
    fn continuous_at_both_breakpoints() {
        let cfg = base_cfg();
        for kind in [LinkKind::Direct, LinkKind::ApRis, LinkKind::RisUser] {
            let at_d1 = path_loss_db(50.0, kind, &cfg);
            let above_d1 = path_loss_db(50.0 + 1e-9, kind, &cfg);
            assert!((at_d1 - above_d1).abs() < 1e-6, "{kind:?} at d1");
            let at_d0 = path_loss_db(10.0, kind, &cfg);
            let above_d0 = path_loss_db(10.0 + 1e-9, kind, &cfg);
            assert!((at_d0 - above_d0).abs() < 1e-6, "{kind:?} at d0");
        }
    }

    #[test]
    fn slope_difference_between_link_kinds() {
        // With all heights equal the fixed terms cancel and only the
        // exponents differ: -10*(3.5-2.0)*log10(d/1km).
        let mut cfg = base_cfg();
        cfg.ap_height_m = 15.0;
        cfg.ris_height_m = 15.0;
        cfg.user_height_m = 15.0;
        let at = |d| path_loss_db(d, LinkKind::Direct, &cfg) - path_loss_db(d, LinkKind::ApRis, &cfg);
        assert!(at(1000.0).abs() < 1e-12);
        let expect = -15.0 * 2f64.log10();
        assert!((at(2000.0) - expect).abs() < 1e-12, "{}", at(2000.0));
        assert!((expect + 4.515449935).abs() < 1e-6);
    }

    #[test]
    fn loss_is_nonincreasing_in_distance() {
        let cfg = base_cfg();
        for kind in [LinkKind::Direct, LinkKind::ApRis, LinkKind::RisUser] {
            let mut prev = f64::INFINITY;
            for step in 1..=3000 {
                let pl = path_loss_db(step as f64, kind, &cfg);
                assert!(pl <= prev + 1e-12, "{kind:?} at {step} m");
                prev = pl;
            }
        }
    }

    #[test]
    fn no_shadowing_inside_breakpoint_or_at_zero_std() {
        let seeds = SeedContext::new(4);
        let mut rng = seeds.stream("t", &[0]);
        assert_eq!(shadowing_linear(40.0, 8.0, 50.0, &mut rng), 1.0);
        assert_eq!(shadowing_linear(400.0, 0.0, 50.0, &mut rng), 1.0);
    }

    #[test]
    fn shadowing_standard_deviation_matches_in_db() {
        let seeds = SeedContext::new(9);
        let mut rng = seeds.stream("shadow-oracle", &[]);
        let n = 1_000_000;
        let db: Vec<f64> = (0..n)
            .map(|_| 10.0 * shadowing_linear(100.0, 8.0, 50.0, &mut rng).log10())
            .collect();
        let mean = db.iter().sum::<f64>() / n as f64;
        let std = (db.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt();
        assert!((std - 8.0).abs() / 8.0 < 0.01, "std = {std}");
    }

    #[test]
    fn clustered_nodes_share_the_near_field_gain() {
        // All heights within 1 m and a vanishing area: every link is in the
        // constant region, so each matrix is constant.
        let text = "M=5\nK=4\nS=3\nN=2\nD=1e-9\nap_height_m=2.0\nris_height_m=2.5\nuser_height_m=1.5\n";
        let cfg = ScenarioConfig::parse_str(text).unwrap();
        let seeds = SeedContext::new(11);
        let topo = draw_topology(&cfg, &seeds, 0);
        let ls = compute_large_scale(&topo, &cfg, &seeds, 0);
        for mat in [&ls.beta_d, &ls.beta_1, &ls.beta_2] {
            let first = mat[[0, 0]];
            assert!(mat.iter().all(|&b| (b - first).abs() < 1e-18), "matrix not constant");
            assert!(first > 0.0 && first.is_finite());
        }
    }

    #[test]
    fn deterministic_given_seed_and_prefix_stable_in_counts() {
        let seeds = SeedContext::new(21);
        let cfg_small = ScenarioConfig::parse_str("M=6\nK=4\nS=3\nN=2\nD=1\n").unwrap();
        let cfg_large = ScenarioConfig::parse_str("M=9\nK=4\nS=7\nN=2\nD=1\n").unwrap();
        let topo_small = draw_topology(&cfg_small, &seeds, 2);
        let ls_a = compute_large_scale(&topo_small, &cfg_small, &seeds, 2);
        let ls_b = compute_large_scale(&topo_small, &cfg_small, &seeds, 2);
        assert_eq!(ls_a, ls_b);

        let topo_large = draw_topology(&cfg_large, &seeds, 2);
        let ls_l = compute_large_scale(&topo_large, &cfg_large, &seeds, 2);
        assert_eq!(ls_a.beta_d, ls_l.beta_d.slice(ndarray::s![..6, ..]).to_owned());
        assert_eq!(ls_a.beta_1, ls_l.beta_1.slice(ndarray::s![..6, ..3]).to_owned());
        assert_eq!(ls_a.beta_2, ls_l.beta_2.slice(ndarray::s![..3, ..]).to_owned());
    }

    #[test]
    fn single_link_composes_path_loss_and_shadowing() {
        let mut cfg = ScenarioConfig::parse_str("M=1\nK=1\nS=0\nN=1\nD=1\n").unwrap();
        cfg.shadow_std_db = 0.0;
        let seeds = SeedContext::new(5);
        // Horizontal distance chosen so the 3-D separation is exactly 1 km.
        let dx_km = ((1000.0f64.powi(2) - (15.0 - 1.65f64).powi(2)).sqrt()) / 1000.0;
        let topo = Topology {
            aps: vec![Position { x_km: 0.0, y_km: 0.0, z_m: 15.0 }],
            surfaces: vec![],
            users: vec![Position { x_km: dx_km, y_km: 0.0, z_m: 1.65 }],
        };
        let ls = compute_large_scale(&topo, &cfg, &seeds, 0);
        let expect = 10f64.powf(path_loss_db(1000.0, LinkKind::Direct, &cfg) / 10.0);
        assert!((ls.beta_d[[0, 0]] - expect).abs() / expect < 1e-9);
    }

    #[test]
    fn shadowing_is_independent_across_links() {
        let cfg = ScenarioConfig::parse_str("M=2\nK=1\nS=0\nN=1\nD=3\n").unwrap();
        let seeds = SeedContext::new(31);
        let n = 2000;
        let mut a = Vec::with_capacity(n);
        let mut b = Vec::with_capacity(n);
        for t in 0..n {
            let topo = draw_topology(&cfg, &seeds, t as u64);
            let ls = compute_large_scale(&topo, &cfg, &seeds, t as u64);
            // divide out the deterministic path loss to leave the shadow term
            let pl = |m: usize| {
                10f64.powf(path_loss_db(distance_m(&topo.aps[m], &topo.users[0]), LinkKind::Direct, &cfg) / 10.0)
            };
            a.push((ls.beta_d[[0, 0]] / pl(0)).log10());
            b.push((ls.beta_d[[1, 0]] / pl(1)).log10());
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let (ma, mb) = (mean(&a), mean(&b));
        let cov: f64 = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / n as f64;
        let sa = (a.iter().map(|x| (x - ma).powi(2)).sum::<f64>() / n as f64).sqrt();
        let sb = (b.iter().map(|x| (x - mb).powi(2)).sum::<f64>() / n as f64).sqrt();
        let corr = cov / (sa * sb);
        assert!(corr.abs() < 3.0 / (n as f64).sqrt() + 0.02, "corr = {corr}");
    }

    #[test]
    fn beta_override_short_circuits_the_model() {
        let cfg = ScenarioConfig::parse_str("M=3\nK=2\nS=1\nN=2\nD=1\nbeta_override=1\n").unwrap();
        let seeds = SeedContext::new(1);
        let topo = draw_topology(&cfg, &seeds, 0);
        let ls = compute_large_scale(&topo, &cfg, &seeds, 0);
        assert!(ls.beta_d.iter().all(|&b| b == 1.0));
        assert!(ls.beta_1.iter().all(|&b| b == 1.0));
        assert!(ls.beta_2.iter().all(|&b| b == 1.0));
    }
}
