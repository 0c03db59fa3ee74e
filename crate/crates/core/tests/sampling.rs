//! Statistical checks of the samplers against the exact laws.

use proptest::prelude::*;
use sep_ergo::ensembles::{sample, sample_diff};
use sep_ergo::{DiffLawSpec, MeasureSpec, OccupancyConfig, SignedConfig, TorusLattice};

/// Empirical `P(η_0 = 1)` and `Cov(η_0, η_{e₁})` pooled over sites and seeds.
fn pooled_moments(mu: &MeasureSpec, lat: &TorusLattice, draws: u64) -> (f64, f64, f64) {
    let (mut n, mut s1, mut s11) = (0.0, 0.0, 0.0);
    for seed in 0..draws {
        let eta = sample(mu, lat, seed).unwrap();
        for x in 0..lat.num_sites() {
            let a = eta.get(x) as u8 as f64;
            let b = eta.get(lat.step(x, 0, true)) as u8 as f64;
            n += 1.0;
            s1 += a;
            s11 += a * b;
        }
    }
    let m = s1 / n;
    (m, s11 / n - m * m, n)
}

#[test]
fn catalog_samplers_match_density_and_neighbour_covariance() {
    for (name, mu) in MeasureSpec::catalog() {
        let lat = TorusLattice::new(mu.min_dim(), if mu.min_dim() == 1 { 4000 } else { 64 }).unwrap();
        let (m, cov, n) = pooled_moments(&mu, &lat, 50);
        let rho = mu.density();
        let want_cov = mu.covariance(&[1, 0][..mu.min_dim()]).unwrap();
        // generous: correlated sites inflate the variance by at most ~1/(1-|corr|) ≈ 10
        let sd = (10.0 * rho * (1.0 - rho) / n).sqrt();
        assert!((m - rho).abs() < 5.0 * sd, "{name}: density {m} vs {rho}");
        assert!((cov - want_cov).abs() < 10.0 * sd, "{name}: covariance {cov} vs {want_cov}");
    }
}

#[test]
fn difference_law_has_no_net_drift_and_right_occupation() {
    let lat = TorusLattice::new(1, 5000).unwrap();
    for (name, mu) in MeasureSpec::catalog().into_iter().filter(|(_, m)| m.min_dim() == 1) {
        let diff = DiffLawSpec::matched(mu.clone()).unwrap();
        let rho = diff.rho();
        let (mut charge, mut abs) = (0i64, 0usize);
        let draws = 40;
        for seed in 0..draws {
            let xi: SignedConfig = sample_diff(&diff, &lat, seed).unwrap();
            charge += xi.net_charge();
            abs += xi.abs_sum();
        }
        let n = (draws * lat.num_sites() as u64) as f64;
        // E|ξ_0| = 2ρ(1-ρ) for an independent Bernoulli partner
        let want = 2.0 * rho * (1.0 - rho);
        let sd = (10.0 * want / n).sqrt();
        assert!((abs as f64 / n - want).abs() < 5.0 * sd, "{name}: {} vs {want}", abs as f64 / n);
        assert!((charge as f64 / n).abs() < 5.0 * sd, "{name}: mean charge {}", charge as f64 / n);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn text_format_round_trips(bits in proptest::collection::vec(any::<bool>(), 9), d2 in any::<bool>()) {
        let lat = if d2 { TorusLattice::new(2, 3).unwrap() } else { TorusLattice::new(1, 9).unwrap() };
        let c = OccupancyConfig::new(lat, bits).unwrap();
        let back: OccupancyConfig = c.to_text().parse().unwrap();
        prop_assert_eq!(back, c);
    }

    #[test]
    fn samples_are_seed_deterministic(seed in any::<u64>()) {
        let lat = TorusLattice::new(1, 32).unwrap();
        let diff = DiffLawSpec::matched(MeasureSpec::markov(0.3, 0.45)).unwrap();
        prop_assert_eq!(sample_diff(&diff, &lat, seed).unwrap(), sample_diff(&diff, &lat, seed).unwrap());
    }
}
