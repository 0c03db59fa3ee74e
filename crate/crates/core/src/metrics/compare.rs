//! Empirical state laws against the exact transient law.

use rayon::prelude::*;
use serde::Serialize;

use super::Engine;
use crate::config::{Cell, Charge, Config, Symbol};
use crate::dynamics::{
    gillespie_with, replay, ArrowStream, Channel, FreeState, Process, ProcessState, SepState, ThinningState,
};
use crate::error::{invalid, Result};
use crate::lattice::TorusLattice;
use crate::oracle::{build_generator, evolve_exact, state_index, Distribution};
use crate::rng::{replica_rng, Purpose};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareReport {
    pub process: Process,
    pub engine: Engine,
    pub t: f64,
    pub replicas: usize,
    /// `max_s |p̂_s - p_s| / (4 √(p_s(1-p_s)/n))`; at most 1 passes.
    pub max_scaled_error: f64,
    pub worst_state: usize,
    pub pass: bool,
}

/// A fixed starting state per process on `lattice`, built from a short
/// repeating pattern.
pub fn pinned_initial(process: Process, lattice: &TorusLattice) -> Result<ProcessState> {
    let n = lattice.num_sites();
    let pick = |pattern: &[u8], x: usize| pattern[x % pattern.len()];
    Ok(match process {
        Process::Sep => ProcessState::Sep(Config::new(*lattice, (0..n).map(|x| pick(b"110", x) == b'1').collect())?),
        Process::Coupled => ProcessState::Coupled {
            eta: Config::new(*lattice, (0..n).map(|x| pick(b"110", x) == b'1').collect())?,
            zeta: Config::new(*lattice, (0..n).map(|x| pick(b"001", x) == b'1').collect())?,
        },
        Process::Annihilation => ProcessState::Annihilation(Config::new(
            *lattice,
            (0..n).map(|x| Charge::from_char(pick(b"+-+", x) as char).expect("symbol")).collect(),
        )?),
        Process::Free => ProcessState::Free(Config::new(
            *lattice,
            (0..n).map(|x| Cell::from_char(pick(b"2-0", x) as char).expect("symbol")).collect(),
        )?),
    })
}

fn stirring_final(init: &ProcessState, t: f64, rng: crate::rng::SimRng) -> Result<ProcessState> {
    let lattice = *init.lattice();
    let stream = |channels| -> Result<Box<dyn Iterator<Item = _>>> {
        Ok(if t > 0.0 {
            Box::new(ArrowStream::new(lattice, channels, t, rng.clone())?)
        } else {
            Box::new(std::iter::empty())
        })
    };
    Ok(match init {
        ProcessState::Sep(c) => {
            let mut s = SepState {
                channel: Channel::Minus,
                occupied: c.values().to_vec(),
            };
            replay(&lattice, &mut s, stream(1)?, &[], |_, _| {});
            ProcessState::Sep(Config::new(lattice, s.occupied)?)
        }
        ProcessState::Free(c) => {
            let mut s = FreeState::from_config(c);
            replay(&lattice, &mut s, stream(2)?, &[], |_, _| {});
            ProcessState::Free(s.to_config(lattice))
        }
        ProcessState::Annihilation(c) => {
            let mut s = ThinningState::from_config(c);
            replay(&lattice, &mut s, stream(2)?, &[], |_, _| {});
            ProcessState::Annihilation(s.to_config(lattice))
        }
        ProcessState::Coupled { .. } => {
            return Err(invalid!("the coupled process has no stirring construction here; use gillespie"))
        }
    })
}

/// Empirical law at time `t` of `replicas` runs from `init`, against the
/// exact law from [`evolve_exact`].
pub fn oracle_compare(
    init: &ProcessState,
    t: f64,
    replicas: usize,
    seed: u64,
    engine: Engine,
) -> Result<CompareReport> {
    if replicas < 2 {
        return Err(invalid!("need at least 2 replicas, got {replicas}"));
    }
    let process = init.process();
    let lattice = *init.lattice();
    let gen = build_generator(process, &lattice)?;
    let exact = evolve_exact(&gen, &Distribution::point_mass(gen.num_states(), state_index(init))?, t)?;
    let finals: Vec<usize> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| -> Result<usize> {
            let mut rng = replica_rng(seed, r, Purpose::Dynamics);
            let state = match engine {
                Engine::Gillespie => {
                    let traj = gillespie_with(process, init, t, &[t], &mut rng)?;
                    traj.snapshots.into_iter().next().expect("one snapshot").1
                }
                Engine::Stirring => stirring_final(init, t, rng)?,
            };
            Ok(state_index(&state))
        })
        .collect::<Result<_>>()?;
    let mut counts = vec![0u64; gen.num_states()];
    for s in finals {
        counts[s] += 1;
    }
    let n = replicas as f64;
    let mut worst = (0.0f64, 0usize);
    for (s, (&c, &p)) in counts.iter().zip(exact.probs()).enumerate() {
        let err = (c as f64 / n - p).abs();
        let allowed = 4.0 * (p * (1.0 - p) / n).sqrt();
        let scaled = if err == 0.0 {
            0.0
        } else if allowed > 0.0 {
            err / allowed
        } else {
            f64::INFINITY
        };
        if scaled > worst.0 {
            worst = (scaled, s);
        }
    }
    Ok(CompareReport {
        process,
        engine,
        t,
        replicas,
        max_scaled_error: worst.0,
        worst_state: worst.1,
        pass: worst.0 <= 1.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_runs_match_oracle() {
        let lat = TorusLattice::new(1, 3).unwrap();
        for p in Process::ALL {
            let init = pinned_initial(p, &lat).unwrap();
            let r = oracle_compare(&init, 1.0, 4000, 1, Engine::Gillespie).unwrap();
            assert!(r.pass, "{r:?}");
            if p != Process::Coupled {
                let r = oracle_compare(&init, 1.0, 4000, 2, Engine::Stirring).unwrap();
                assert!(r.pass, "{r:?}");
            }
        }
    }

    #[test]
    fn pinned_states() {
        let lat = TorusLattice::new(1, 3).unwrap();
        let s = pinned_initial(Process::Free, &lat).unwrap();
        assert_eq!(s.symbols(), b"2-0".to_vec());
        assert!(oracle_compare(&pinned_initial(Process::Coupled, &lat).unwrap(), 1.0, 10, 0, Engine::Stirring).is_err());
    }
}
