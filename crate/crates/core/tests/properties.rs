use nalgebra::DMatrix;
use proptest::prelude::*;

use tmdstat::detector::{
    collective_forward, convolution_matrix, forward, joint_forward, loss_matrix, TmdConfig,
};
use tmdstat::dist::{default_truncation, ClickDistribution, JointPhotonDistribution, PhotonDistribution};
use tmdstat::io::{parse_config_str, RunConfig};
use tmdstat::montecarlo::Setup;
use tmdstat::pipeline::preset;
use tmdstat::reconstruct::{
    condition_number, invert_single, invert_single_with, klyshko_efficiency, InversionOptions, Method,
};
use tmdstat::sources::{convolve, multimode_pair_dist, poisson_dist, thermal_dist, twin_beam_joint};
use tmdstat::stats::{combine_collective, correlation, fit_poisson, fit_thermal, moment};

fn weights(len: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, len)
}

fn dist(len: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = PhotonDistribution> {
    weights(len).prop_map(|w| PhotonDistribution::from_weights(w).unwrap())
}

fn bin_probs() -> impl Strategy<Value = Vec<f64>> {
    weights(1..=8).prop_map(|w| {
        let s: f64 = w.iter().sum();
        w.iter().map(|x| x / s).collect()
    })
}

fn column_sums_ok(m: &DMatrix<f64>) -> bool {
    m.column_iter().all(|c| (c.sum() - 1.0).abs() < 1e-12) && m.iter().all(|&x| (0.0..=1.0).contains(&x))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn detector_matrices_are_column_stochastic(bins in bin_probs(), eta in 0.0f64..=1.0, n_max in 0usize..=14) {
        prop_assert!(column_sums_ok(convolution_matrix(&bins, n_max).unwrap().entries()));
        prop_assert!(column_sums_ok(loss_matrix(eta, n_max).unwrap().entries()));
    }

    #[test]
    fn forward_is_linear(p in dist(9..=9), q in dist(9..=9), a in 0.0f64..=1.0, eta in 0.0f64..=1.0) {
        let tmd = TmdConfig::uniform(8, eta, 8).unwrap();
        let mix: Vec<f64> = p.probs().iter().zip(q.probs()).map(|(x, y)| a * x + (1.0 - a) * y).collect();
        let lhs = forward(&tmd, &PhotonDistribution::new(mix).unwrap()).unwrap();
        let (fp, fq) = (forward(&tmd, &p).unwrap(), forward(&tmd, &q).unwrap());
        for c in 0..=8 {
            prop_assert!((lhs.get(c) - (a * fp.get(c) + (1.0 - a) * fq.get(c))).abs() < 1e-12);
        }
        prop_assert!((lhs.probs().iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn joint_forward_of_product_is_outer_product(
        p in dist(1..=6), q in dist(1..=6), bs in bin_probs(), bi in bin_probs(),
        es in 0.0f64..=1.0, ei in 0.0f64..=1.0,
    ) {
        let ts = TmdConfig::new(bs, es, 6).unwrap();
        let ti = TmdConfig::new(bi, ei, 6).unwrap();
        let joint = joint_forward(&ts, &ti, &JointPhotonDistribution::product(&p, &q)).unwrap();
        let (fs, fi) = (forward(&ts, &p).unwrap(), forward(&ti, &q).unwrap());
        for c in 0..fs.probs().len() {
            for d in 0..fi.probs().len() {
                prop_assert!((joint.get(c, d) - fs.get(c) * fi.get(d)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn lossless_collective_clicks_stay_within_support(q in dist(1..=5), k in 1usize..=12) {
        let n = q.n_max();
        let tmd = TmdConfig::uniform(k, 1.0, 2 * n).unwrap();
        let clicks = collective_forward(&tmd, &twin_beam_joint(&q), 1.0, 1.0).unwrap();
        for c in (2 * n + 1)..clicks.probs().len() {
            prop_assert_eq!(clicks.get(c), 0.0);
        }
    }

    #[test]
    fn exact_clicks_round_trip(p in dist(1..=9), eta in 0.1f64..=1.0) {
        let tmd = TmdConfig::uniform(8, eta, p.n_max()).unwrap();
        let back = invert_single(&tmd, &forward(&tmd, &p).unwrap()).unwrap();
        prop_assert!(back.dist.max_abs_diff(&p) < 1e-8);
    }

    #[test]
    fn constrained_solution_is_physical(
        p in dist(4..=4), noise in prop::collection::vec(-0.02f64..0.02, 9), eta in 0.1f64..=0.9,
    ) {
        let tmd = TmdConfig::uniform(8, eta, 3).unwrap();
        let exact = forward(&tmd, &p).unwrap();
        let noisy: Vec<f64> = exact.probs().iter().zip(&noise).map(|(r, e)| (r + e).max(0.0)).collect();
        let s: f64 = noisy.iter().sum();
        let clicks = ClickDistribution::exact(noisy.iter().map(|x| x / s).collect()).unwrap();
        let direct = invert_single(&tmd, &clicks).unwrap();
        let opts = InversionOptions { method: Method::Constrained, sigma_eta: 0.0 };
        let constrained = invert_single_with(&tmd, &clicks, &opts).unwrap();
        prop_assert!(constrained.dist.probs().iter().all(|&x| x >= 0.0));
        prop_assert!((constrained.dist.probs().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(constrained.residual >= direct.residual - 1e-12);
    }

    #[test]
    fn klyshko_is_scale_invariant(rs in 1.0f64..1e6, frac in 0.0f64..=1.0, scale in 1e-3f64..1e3) {
        let a = klyshko_efficiency(frac * rs, rs).unwrap();
        let b = klyshko_efficiency(frac * rs * scale, rs * scale).unwrap();
        prop_assert!((a.eta_estimate - b.eta_estimate).abs() < 1e-12);
    }

    #[test]
    fn convolve_is_commutative_and_associative(a in dist(1..=8), b in dist(1..=8), c in dist(1..=8)) {
        prop_assert!(convolve(&a, &b).max_abs_diff(&convolve(&b, &a)) < 1e-12);
        let left = convolve(&convolve(&a, &b), &c);
        let right = convolve(&a, &convolve(&b, &c));
        prop_assert!(left.max_abs_diff(&right) < 1e-12);
    }

    #[test]
    fn multimode_moments_follow_negative_binomial_law(modes in 1u64..200, mean in 0.01f64..=3.0) {
        let n_max = default_truncation(mean);
        // More modes thin the tail, so the single-mode cut deficit bounds
        // every M at the default truncation.
        let r = mean / (1.0 + mean);
        let tail = r.powi(n_max as i32 + 1);
        let thermal_deficit = (n_max + 1) as f64 * tail / (1.0 - tail);
        let d = multimode_pair_dist(modes, mean, n_max).unwrap();
        prop_assert!((d.mean() - mean).abs() <= thermal_deficit + 1e-12);
        let d = multimode_pair_dist(modes, mean, 2 * n_max).unwrap();
        prop_assert!((d.mean() - mean).abs() < 1e-6);
        prop_assert!((d.variance() - mean * (1.0 + mean / modes as f64)).abs() < 1e-6);
    }

    #[test]
    fn twin_beam_statistics(q in dist(2..=10)) {
        let joint = twin_beam_joint(&q);
        let rows: Vec<f64> = joint.probs().row_iter().map(|r| r.sum()).collect();
        let cols: Vec<f64> = joint.probs().column_iter().map(|c| c.sum()).collect();
        prop_assert_eq!(&rows[..], q.probs());
        prop_assert_eq!(&cols[..], q.probs());
        prop_assert!((correlation(&joint).unwrap() - 1.0).abs() < 1e-12);
        let collective = combine_collective(&joint);
        prop_assert!(collective.probs().iter().skip(1).step_by(2).all(|&x| x == 0.0));
        for (n, p) in q.probs().iter().enumerate() {
            prop_assert_eq!(collective.get(2 * n), *p);
        }
    }

    #[test]
    fn product_joint_is_uncorrelated(a in dist(2..=8), b in dist(2..=8)) {
        let r = correlation(&JointPhotonDistribution::product(&a, &b)).unwrap();
        prop_assert!(r.abs() < 1e-12);
    }

    #[test]
    fn self_fits_are_exact(mean in 0.05f64..=5.0) {
        let n_max = default_truncation(mean);
        prop_assert!(fit_poisson(&poisson_dist(mean, n_max).unwrap()).unwrap().residual_l2 < 1e-9);
        let thermal = thermal_dist(mean, n_max).unwrap();
        prop_assert!(fit_thermal(&thermal).unwrap().residual_l2 < 1e-9);
    }

    #[test]
    fn truncated_thermal_mean(mean in 0.05f64..=5.0) {
        // Geometric law cut at N: mean - (N + 1) r^(N+1) / (1 - r^(N+1)).
        let n_max = default_truncation(mean);
        let r = mean / (1.0 + mean);
        let tail = r.powi(n_max as i32 + 1);
        let closed = mean - (n_max + 1) as f64 * tail / (1.0 - tail);
        prop_assert!((moment(&thermal_dist(mean, n_max).unwrap(), 1) - closed).abs() < 1e-12);
        // The deficit at the default cut reaches ~1e-5; doubling it clears 1e-6.
        prop_assert!((moment(&thermal_dist(mean, 2 * n_max).unwrap(), 1) - mean).abs() < 1e-6);
    }

    #[test]
    fn config_serialization_round_trips(setup in prop::sample::select(vec![Setup::A, Setup::B, Setup::C, Setup::D]), seed: u64, shots in 1u64..u64::MAX / 2) {
        let config = RunConfig { seed, shots, ..preset(setup) };
        let text = serde_json::to_string(&config).unwrap();
        prop_assert_eq!(parse_config_str(&text).unwrap(), config);
    }
}

#[test]
fn condition_number_does_not_grow_with_efficiency() {
    for bins in [2, 4, 8] {
        let mut last = f64::INFINITY;
        for k in 1..=100 {
            let eta = k as f64 / 100.0;
            let c = condition_number(&TmdConfig::uniform(bins, eta, bins).unwrap()).unwrap();
            assert!(c <= last * (1.0 + 1e-9), "bins {bins}, eta {eta}: {c} > {last}");
            last = c;
        }
    }
}
