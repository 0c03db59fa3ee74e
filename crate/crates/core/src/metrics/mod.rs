//! Monte Carlo estimators of the discrepancy density and the quantitative
//! checks built on them.
//!
//! Replicas are independent functions of `(master seed, replica index)` and
//! are farmed out with rayon; per-replica results are collected in index
//! order before any reduction, so a series does not depend on the worker
//! count. Error bars use replica means only. Sites within one replica are
//! correlated and are averaged, never counted as independent samples.

mod checks;
mod compare;
mod fit;

pub use compare::{oracle_compare, pinned_initial, CompareReport};
pub use checks::{duality_check, variance_bound_check, DualityMode, DualityReport, VarianceReport};
pub use fit::{fit_decay_exponent, DecayFit, FIT_Z};

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::Charge;
use crate::dynamics::{replay, simulate, AnnihilationRule, ArrowStream, ThinningState};
use crate::ensembles::DiffLawSpec;
use crate::error::{invalid, Error, Result};
use crate::lattice::TorusLattice;
use crate::rng::{replica_rng, Purpose};

/// `γ(d) = d/4` for `d ≤ 4` and `1` above.
pub fn theoretical_exponent(d: usize) -> Result<f64> {
    match d {
        0 => Err(invalid!("dimension must be at least 1")),
        1..=4 => Ok(d as f64 / 4.0),
        _ => Ok(1.0),
    }
}

/// Streaming mean and variance.
#[derive(Debug, Clone, Copy, Default)]
pub struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

impl FromIterator<f64> for Welford {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut w = Welford::default();
        for x in iter {
            w.push(x);
        }
        w
    }
}

/// How `E|ξ₀(t)|` is simulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    /// Two-channel stirring arrows replayed through the thinning map.
    Stirring,
    /// Event-driven simulation of the annihilation generator.
    Gillespie,
}

impl Engine {
    pub fn name(self) -> &'static str {
        match self {
            Engine::Stirring => "stirring",
            Engine::Gillespie => "gillespie",
        }
    }
}

/// Point estimates with replica standard errors on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateSeries {
    pub times: Vec<f64>,
    pub estimate: Vec<f64>,
    pub stderr: Vec<f64>,
    /// `estimate · t^γ / √K` for the normalizing constant `K` recorded in
    /// `metadata.envelope`.
    pub ratio_to_envelope: Vec<f64>,
    pub replicas: usize,
    pub seed: u64,
    pub lattice: TorusLattice,
    pub diff: DiffLawSpec,
    pub engine: Engine,
    pub metadata: BTreeMap<String, serde_json::Value>,
}

impl EstimateSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Rows of the CSV output, header first.
    pub fn csv_rows(&self) -> Vec<String> {
        let mut rows = vec!["time,estimate,stderr,replicas,ratio_to_envelope".to_string()];
        for i in 0..self.len() {
            rows.push(format!(
                "{},{},{},{},{}",
                self.times[i], self.estimate[i], self.stderr[i], self.replicas, self.ratio_to_envelope[i]
            ));
        }
        rows
    }

    fn fill_ratio(&mut self, constant: f64) -> Result<()> {
        let gamma = theoretical_exponent(self.lattice.dim())?;
        self.ratio_to_envelope = self
            .times
            .iter()
            .zip(&self.estimate)
            .map(|(&t, &e)| {
                if e == 0.0 {
                    0.0
                } else {
                    e * t.powf(gamma) / constant.sqrt()
                }
            })
            .collect();
        Ok(())
    }
}

/// Run `f` on a pool of `workers` threads, or on the global pool for `None`.
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(0) => Err(invalid!("worker count must be at least 1")),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::ResourceLimit(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

pub fn check_grid(times: &[f64]) -> Result<f64> {
    if times.is_empty() {
        return Err(invalid!("empty time grid"));
    }
    if times.iter().any(|&t| !(t >= 0.0 && t.is_finite())) {
        return Err(invalid!("times must be finite and nonnegative"));
    }
    if times.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid!("times must be strictly increasing"));
    }
    Ok(*times.last().expect("nonempty"))
}

/// `|ξ(t)|` per site at each observation time for one replica.
fn discrepancy_replica(
    diff: &DiffLawSpec,
    lattice: &TorusLattice,
    times: &[f64],
    horizon: f64,
    seed: u64,
    replica: u64,
    engine: Engine,
) -> Result<Vec<f64>> {
    let xi = diff.sample_with(
        lattice,
        &mut replica_rng(seed, replica, Purpose::Initial),
        &mut replica_rng(seed, replica, Purpose::Reference),
    )?;
    let sites = lattice.num_sites() as f64;
    let charge = xi.net_charge();
    let mut out = Vec::with_capacity(times.len());
    let mut conserved = true;
    let mut rng = replica_rng(seed, replica, Purpose::Dynamics);
    match engine {
        Engine::Stirring => {
            let mut state = ThinningState::from_config(&xi);
            let arrows: Box<dyn Iterator<Item = _>> = if horizon > 0.0 {
                Box::new(ArrowStream::new(*lattice, 2, horizon, rng)?)
            } else {
                Box::new(std::iter::empty())
            };
            replay(lattice, &mut state, arrows, times, |_, s| {
                conserved &= s.net_charge() == charge;
                out.push(s.alive() as f64 / sites);
            });
        }
        Engine::Gillespie => {
            let mut values = xi.into_values();
            simulate(&AnnihilationRule::default(), lattice, &mut values, horizon, times, &mut rng, |_, v| {
                let (mut alive, mut net) = (0usize, 0i64);
                for &c in v {
                    alive += (c != Charge::Zero) as usize;
                    net += c.value() as i64;
                }
                conserved &= net == charge;
                out.push(alive as f64 / sites);
            });
        }
    }
    if !conserved {
        return Err(Error::Invariant(format!("replica {replica}: net charge changed")));
    }
    Ok(out)
}

/// Spatially averaged `E|ξ_x(t)|` under the annihilation dynamics from `℘`.
pub fn estimate_discrepancy_density(
    diff: &DiffLawSpec,
    lattice: &TorusLattice,
    times: &[f64],
    replicas: usize,
    seed: u64,
    engine: Engine,
) -> Result<EstimateSeries> {
    if replicas < 2 {
        return Err(invalid!("need at least 2 replicas for an error bar, got {replicas}"));
    }
    let horizon = check_grid(times)?;
    let runs: Vec<Vec<f64>> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| discrepancy_replica(diff, lattice, times, horizon, seed, r, engine))
        .collect::<Result<_>>()?;
    let mut estimate = Vec::with_capacity(times.len());
    let mut stderr = Vec::with_capacity(times.len());
    for k in 0..times.len() {
        let w: Welford = runs.iter().map(|r| r[k]).collect();
        estimate.push(w.mean());
        stderr.push(w.stderr());
    }
    let b = diff.correlation_sum_b();
    let mut metadata = BTreeMap::new();
    metadata.insert("quantity".into(), "expected_abs_discrepancy".into());
    metadata.insert("correlation_sum_b".into(), b.into());
    metadata.insert("envelope".into(), "correlation_sum_b".into());
    let mut series = EstimateSeries {
        times: times.to_vec(),
        estimate,
        stderr,
        ratio_to_envelope: Vec::new(),
        replicas,
        seed,
        lattice: *lattice,
        diff: diff.clone(),
        engine,
        metadata,
    };
    series.fill_ratio(b)?;
    Ok(series)
}

/// The same estimates read as an upper bound on `d̄(μP_t, π_ρ)`, with the
/// ratio column normalized by `√A(μ)`.
pub fn dbar_bound_series(
    diff: &DiffLawSpec,
    lattice: &TorusLattice,
    times: &[f64],
    replicas: usize,
    seed: u64,
    engine: Engine,
) -> Result<EstimateSeries> {
    let mut series = estimate_discrepancy_density(diff, lattice, times, replicas, seed, engine)?;
    let a = diff.mu().correlation_sum_a();
    series.metadata.insert("quantity".into(), "dbar_upper_bound".into());
    series.metadata.insert("correlation_sum_a".into(), a.into());
    series.metadata.insert("envelope".into(), "correlation_sum_a".into());
    series
        .metadata
        .insert("gamma".into(), theoretical_exponent(lattice.dim())?.into());
    series.fill_ratio(a)?;
    Ok(series)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::MeasureSpec;

    fn half() -> DiffLawSpec {
        DiffLawSpec::matched(MeasureSpec::bernoulli(0.5)).unwrap()
    }

    #[test]
    fn exponents() {
        assert_eq!(theoretical_exponent(1).unwrap(), 0.25);
        assert_eq!(theoretical_exponent(4).unwrap(), 1.0);
        assert_eq!(theoretical_exponent(7).unwrap(), 1.0);
        assert!(theoretical_exponent(0).is_err());
    }

    #[test]
    fn welford_matches_two_pass() {
        let xs = [1.0, 4.0, 2.5, -3.0, 7.25];
        let w: Welford = xs.iter().copied().collect();
        let mean = xs.iter().sum::<f64>() / 5.0;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 4.0;
        assert!((w.mean() - mean).abs() < 1e-14);
        assert!((w.variance() - var).abs() < 1e-12);
    }

    #[test]
    fn time_zero_density() {
        let lat = TorusLattice::new(1, 400).unwrap();
        for engine in [Engine::Stirring, Engine::Gillespie] {
            let s = estimate_discrepancy_density(&half(), &lat, &[0.0], 40, 5, engine).unwrap();
            assert!((s.estimate[0] - 0.5).abs() < 4.0 * s.stderr[0] + 1e-12, "{s:?}");
        }
    }

    #[test]
    fn full_density_has_no_discrepancy() {
        let lat = TorusLattice::new(1, 50).unwrap();
        let diff = DiffLawSpec::matched(MeasureSpec::bernoulli(1.0)).unwrap();
        let s = dbar_bound_series(&diff, &lat, &[0.0, 1.0, 2.0], 3, 1, Engine::Stirring).unwrap();
        assert!(s.estimate.iter().all(|&e| e == 0.0));
        assert!(s.ratio_to_envelope.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn needs_two_replicas() {
        let lat = TorusLattice::new(1, 10).unwrap();
        assert!(estimate_discrepancy_density(&half(), &lat, &[1.0], 1, 0, Engine::Stirring).is_err());
        assert!(estimate_discrepancy_density(&half(), &lat, &[2.0, 1.0], 3, 0, Engine::Stirring).is_err());
    }

    #[test]
    fn engines_agree_on_a_ring() {
        let lat = TorusLattice::new(1, 64).unwrap();
        let a = estimate_discrepancy_density(&half(), &lat, &[1.0], 400, 11, Engine::Stirring).unwrap();
        let b = estimate_discrepancy_density(&half(), &lat, &[1.0], 400, 12, Engine::Gillespie).unwrap();
        let joint = (a.stderr[0].powi(2) + b.stderr[0].powi(2)).sqrt();
        assert!((a.estimate[0] - b.estimate[0]).abs() <= 4.0 * joint, "{a:?} {b:?}");
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let lat = TorusLattice::new(1, 40).unwrap();
        let run = |w| {
            with_workers(Some(w), || {
                estimate_discrepancy_density(&half(), &lat, &[0.5, 2.0], 16, 9, Engine::Stirring).unwrap()
            })
            .unwrap()
        };
        assert_eq!(run(1), run(3));
    }

    #[test]
    fn ratio_column() {
        let lat = TorusLattice::new(1, 60).unwrap();
        let s = dbar_bound_series(&half(), &lat, &[0.0, 4.0], 4, 2, Engine::Gillespie).unwrap();
        let a = MeasureSpec::bernoulli(0.5).correlation_sum_a();
        assert_eq!(s.ratio_to_envelope[0], 0.0);
        assert!((s.ratio_to_envelope[1] - s.estimate[1] * 4f64.powf(0.25) / a.sqrt()).abs() < 1e-15);
        assert_eq!(s.csv_rows().len(), 3);
    }
}
