//! The second-moment bound for the free process and SEP self-duality.

use rayon::prelude::*;
use serde::Serialize;

use super::{check_grid, Welford};
use crate::dynamics::{replay, ArrowDynamics, ArrowStream, Channel, FreeState, SepState};
use crate::ensembles::{DiffLawSpec, MeasureSpec};
use crate::error::{invalid, Error, Result};
use crate::lattice::{Site, TorusLattice};
use crate::oracle::duality_sides;
use crate::rng::{replica_rng, Purpose};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceReport {
    pub t: f64,
    pub sites: usize,
    /// Replica mean of `(N_{Λ,+1} - N_{Λ,-1})²`.
    pub estimate: f64,
    pub stderr: f64,
    /// `2 |Λ| B(℘)`.
    pub bound: f64,
    pub ratio: f64,
    pub pass: bool,
}

/// Second moment of the net charge in `region` under the free two-species
/// dynamics started from `℘`, against `2 |Λ| B(℘)`, one report per time.
pub fn variance_bound_check(
    diff: &DiffLawSpec,
    lattice: &TorusLattice,
    region: &[Site],
    times: &[f64],
    replicas: usize,
    seed: u64,
) -> Result<Vec<VarianceReport>> {
    if replicas < 2 {
        return Err(invalid!("need at least 2 replicas, got {replicas}"));
    }
    if region.is_empty() || region.iter().any(|&x| x >= lattice.num_sites()) {
        return Err(invalid!("region must be a nonempty set of lattice sites"));
    }
    let horizon = check_grid(times)?;
    let runs: Vec<Vec<f64>> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| -> Result<Vec<f64>> {
            let xi = diff.sample_with(
                lattice,
                &mut replica_rng(seed, r, Purpose::Initial),
                &mut replica_rng(seed, r, Purpose::Reference),
            )?;
            let mut state = FreeState::from_signed(&xi);
            let mut out = Vec::with_capacity(times.len());
            let arrows: Box<dyn Iterator<Item = _>> = if horizon > 0.0 {
                Box::new(ArrowStream::new(*lattice, 2, horizon, replica_rng(seed, r, Purpose::Dynamics))?)
            } else {
                Box::new(std::iter::empty())
            };
            replay(lattice, &mut state, arrows, times, |_, s| {
                out.push((s.charge_in(region) as f64).powi(2))
            });
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let bound = 2.0 * region.len() as f64 * diff.correlation_sum_b();
    Ok(times
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let w: Welford = runs.iter().map(|r| r[k]).collect();
            let (m, se) = (w.mean(), w.stderr());
            let rel = if m > 0.0 { se / m } else { 0.0 };
            VarianceReport {
                t,
                sites: region.len(),
                estimate: m,
                stderr: se,
                bound,
                ratio: if bound > 0.0 { m / bound } else { 0.0 },
                pass: m <= bound * (1.0 + 4.0 * rel),
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DualityMode {
    /// Both sides by exact evolution; lattices up to 12 sites.
    Oracle,
    /// Both sides by simulation from independent replicas.
    MonteCarlo { replicas: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualityReport {
    /// `(μP_t)(η_x = 1, η_y = 1)`.
    pub lhs: f64,
    /// `E μ(η_{X_t} = 1, η_{Y_t} = 1)` over two exclusion particles from `(x, y)`.
    pub rhs: f64,
    pub discrepancy: f64,
    pub tolerance: f64,
    pub pass: bool,
}

pub const DUALITY_ORACLE_TOL: f64 = 1e-8;

/// Self-duality of SEP for the pair `(x, y)`.
pub fn duality_check(
    mu: &MeasureSpec,
    lattice: &TorusLattice,
    (x, y): (Site, Site),
    t: f64,
    mode: DualityMode,
) -> Result<DualityReport> {
    if x == y {
        return Err(invalid!("duality needs two distinct sites, got {x} twice"));
    }
    let n = lattice.num_sites();
    if x >= n || y >= n {
        return Err(Error::OutOfRange(format!("sites ({x}, {y}) on {n} sites")));
    }
    match mode {
        DualityMode::Oracle => {
            let (lhs, rhs) = duality_sides(mu, lattice, (x, y), t)?;
            let discrepancy = (lhs - rhs).abs();
            Ok(DualityReport {
                lhs,
                rhs,
                discrepancy,
                tolerance: DUALITY_ORACLE_TOL,
                pass: discrepancy <= DUALITY_ORACLE_TOL,
            })
        }
        DualityMode::MonteCarlo { replicas, seed } => {
            if replicas < 2 {
                return Err(invalid!("need at least 2 replicas, got {replicas}"));
            }
            mu.validate()?;
            check_grid(&[t])?;
            let arrows = |r: u64| -> Result<Box<dyn Iterator<Item = _>>> {
                Ok(if t > 0.0 {
                    Box::new(ArrowStream::new(*lattice, 1, t, replica_rng(seed, r, Purpose::Dynamics))?)
                } else {
                    Box::new(std::iter::empty())
                })
            };
            let samples: Vec<(f64, f64)> = (0..replicas as u64)
                .into_par_iter()
                .map(|r| -> Result<(f64, f64)> {
                    // Forward side on replica 2r, dual side on replica 2r+1.
                    let eta = mu.sample_with(lattice, &mut replica_rng(seed, 2 * r, Purpose::Initial))?;
                    let mut sep = SepState {
                        channel: Channel::Minus,
                        occupied: eta.into_values(),
                    };
                    replay(lattice, &mut sep, arrows(2 * r)?, &[], |_, _| {});
                    let left = (sep.occupied[x] && sep.occupied[y]) as u8 as f64;

                    let eta = mu.sample_with(lattice, &mut replica_rng(seed, 2 * r + 1, Purpose::Initial))?;
                    let mut markers = Markers { at: [x, y] };
                    replay(lattice, &mut markers, arrows(2 * r + 1)?, &[], |_, _| {});
                    let right = (eta.values()[markers.at[0]] && eta.values()[markers.at[1]]) as u8 as f64;
                    Ok((left, right))
                })
                .collect::<Result<_>>()?;
            let l: Welford = samples.iter().map(|s| s.0).collect();
            let r: Welford = samples.iter().map(|s| s.1).collect();
            let discrepancy = (l.mean() - r.mean()).abs();
            let tolerance = 4.0 * (l.stderr().powi(2) + r.stderr().powi(2)).sqrt();
            Ok(DualityReport {
                lhs: l.mean(),
                rhs: r.mean(),
                discrepancy,
                tolerance,
                pass: discrepancy <= tolerance,
            })
        }
    }
}

/// Two stirring markers on one channel.
struct Markers {
    at: [Site; 2],
}

impl ArrowDynamics for Markers {
    fn apply(&mut self, lattice: &TorusLattice, arrow: &crate::dynamics::Arrow) {
        let e = lattice.edge(arrow.edge);
        for z in &mut self.at {
            if let Some(o) = e.other(*z) {
                *z = o;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bernoulli_variance_at_time_zero() {
        let rho = 0.3;
        let diff = DiffLawSpec::matched(MeasureSpec::bernoulli(rho)).unwrap();
        let lat = TorusLattice::new(1, 40).unwrap();
        let region = lat.box_sites(16).unwrap();
        let r = &variance_bound_check(&diff, &lat, &region, &[0.0], 4000, 3).unwrap()[0];
        let sigma = rho * (1.0 - rho);
        assert!((r.estimate - 2.0 * sigma * 16.0).abs() < 4.0 * r.stderr, "{r:?}");
        assert!((r.bound - 4.0 * sigma * 16.0).abs() < 1e-12);
        assert!(r.pass);
    }

    #[test]
    fn full_density_gives_zero() {
        let diff = DiffLawSpec::matched(MeasureSpec::bernoulli(1.0)).unwrap();
        let lat = TorusLattice::new(1, 20).unwrap();
        let region = lat.box_sites(4).unwrap();
        for r in variance_bound_check(&diff, &lat, &region, &[0.0, 1.0], 3, 0).unwrap() {
            assert_eq!(r.estimate, 0.0);
            assert_eq!(r.bound, 0.0);
            assert!(r.pass);
        }
    }

    #[test]
    fn duality_oracle_and_monte_carlo() {
        let lat = TorusLattice::new(1, 4).unwrap();
        let mk = MeasureSpec::markov(0.25, 0.5);
        let o = duality_check(&mk, &lat, (0, 1), 1.0, DualityMode::Oracle).unwrap();
        assert!(o.pass, "{o:?}");
        let big = TorusLattice::new(1, 16).unwrap();
        let m = duality_check(&mk, &big, (3, 5), 1.0, DualityMode::MonteCarlo { replicas: 20000, seed: 7 })
            .unwrap();
        assert!(m.pass, "{m:?}");
        assert!(duality_check(&mk, &lat, (2, 2), 1.0, DualityMode::Oracle).is_err());
    }

    #[test]
    fn duality_at_time_zero_is_exact() {
        let lat = TorusLattice::new(1, 5).unwrap();
        let r = duality_check(&MeasureSpec::block_xor(0.3, 1), &lat, (0, 2), 0.0, DualityMode::Oracle).unwrap();
        assert_eq!(r.discrepancy, 0.0);
    }
}
