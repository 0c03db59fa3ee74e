//! Event-driven simulation of the four generators.
//!
//! Every process here is a sum of edge terms whose total rate per edge is
//! bounded by a constant `r`. Candidate events are drawn at rate `r · #edges`
//! on a uniformly chosen edge; the edge then fires one of its transitions
//! with probability `rate / r` or does nothing. This is the direct method
//! run on a uniformized clock: exact in law, O(1) per event.

use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::config::{Cell, Charge, Config, OccupancyConfig, SignedConfig, Symbol, TwoSpeciesConfig};
use crate::error::{invalid, Result};
use crate::lattice::TorusLattice;
use crate::rng::{rng_from_seed, SimRng};

/// Local rule of an edge-additive generator.
pub trait EdgeRule: Sync {
    type Site: Copy + Eq + std::fmt::Debug + Send + Sync;

    /// Upper bound on the total jump rate out of any edge state.
    fn max_rate(&self) -> f64;

    /// Jumps `(rate, new value at edge.a, new value at edge.b)` from the
    /// edge state `(a, b)`. No-op jumps are omitted.
    fn transitions(&self, a: Self::Site, b: Self::Site, out: &mut Vec<(f64, Self::Site, Self::Site)>);
}

/// Exclusion: every edge swaps at rate 1.
#[derive(Debug, Clone, Copy, Default)]
pub struct SepRule;

impl EdgeRule for SepRule {
    type Site = bool;

    fn max_rate(&self) -> f64 {
        1.0
    }

    fn transitions(&self, a: bool, b: bool, out: &mut Vec<(f64, bool, bool)>) {
        if a != b {
            out.push((1.0, b, a));
        }
    }
}

/// Basic coupling of two exclusions, site value `(η_x, ζ_x)`. On edges
/// where both sites are discordant the marginals swap independently at rate
/// 1 each; everywhere else they swap together at rate 1.
#[derive(Debug, Clone, Copy, Default)]
pub struct CoupledRule;

impl EdgeRule for CoupledRule {
    type Site = (bool, bool);

    fn max_rate(&self) -> f64 {
        2.0
    }

    fn transitions(&self, a: (bool, bool), b: (bool, bool), out: &mut Vec<(f64, (bool, bool), (bool, bool))>) {
        let discordant = a.0 != a.1 && b.0 != b.1;
        if discordant {
            if a.0 != b.0 {
                out.push((1.0, (b.0, a.1), (a.0, b.1)));
            }
            if a.1 != b.1 {
                out.push((1.0, (a.0, b.1), (b.0, a.1)));
            }
        } else if a != b {
            out.push((1.0, b, a));
        }
    }
}

/// Two-species exclusion with annihilation: opposite charges on an edge
/// vanish at `rate` (2 for the process obtained from the coupling), all other
/// edges swap at rate 1.
#[derive(Debug, Clone, Copy)]
pub struct AnnihilationRule {
    pub rate: f64,
}

impl Default for AnnihilationRule {
    fn default() -> Self {
        AnnihilationRule { rate: 2.0 }
    }
}

impl EdgeRule for AnnihilationRule {
    type Site = Charge;

    fn max_rate(&self) -> f64 {
        self.rate.max(1.0)
    }

    fn transitions(&self, a: Charge, b: Charge, out: &mut Vec<(f64, Charge, Charge)>) {
        if a.value() * b.value() == -1 {
            out.push((self.rate, Charge::Zero, Charge::Zero));
        } else if a != b {
            out.push((1.0, b, a));
        }
    }
}

/// Two species passing through each other. Summed over both orientations of
/// the edge: a lone particle facing `0` or `±` swaps at rate 1; `-` facing
/// `+` merges into `(±, 0)` or `(0, ±)` at rate 1 each; `0` facing `±`
/// splits into `(+, -)` or `(-, +)` at rate 1 each.
#[derive(Debug, Clone, Copy, Default)]
pub struct FreeRule;

impl FreeRule {
    fn oriented(p: Cell, q: Cell, out: &mut Vec<(f64, Cell, Cell)>) {
        match (p, q) {
            (Cell::Minus | Cell::Plus, Cell::Empty | Cell::Both) => out.push((1.0, q, p)),
            (Cell::Minus, Cell::Plus) => {
                out.push((1.0, Cell::Both, Cell::Empty));
                out.push((1.0, Cell::Empty, Cell::Both));
            }
            (Cell::Empty, Cell::Both) => {
                out.push((1.0, Cell::Plus, Cell::Minus));
                out.push((1.0, Cell::Minus, Cell::Plus));
            }
            _ => {}
        }
    }
}

impl EdgeRule for FreeRule {
    type Site = Cell;

    fn max_rate(&self) -> f64 {
        2.0
    }

    fn transitions(&self, a: Cell, b: Cell, out: &mut Vec<(f64, Cell, Cell)>) {
        FreeRule::oriented(a, b, out);
        let start = out.len();
        FreeRule::oriented(b, a, out);
        for t in &mut out[start..] {
            std::mem::swap(&mut t.1, &mut t.2);
        }
    }
}

/// Simulate `rule` from `values` up to `horizon`, calling `observe(k, state)`
/// at each sorted observation time `times[k]`. Returns the number of jumps.
pub fn simulate<R: EdgeRule>(
    rule: &R,
    lattice: &TorusLattice,
    values: &mut [R::Site],
    horizon: f64,
    times: &[f64],
    rng: &mut SimRng,
    mut observe: impl FnMut(usize, &[R::Site]),
) -> u64 {
    let edges = lattice.num_edges();
    let bound = rule.max_rate();
    let clock = Exp::new(bound * edges as f64).expect("positive rate");
    let mut out = Vec::with_capacity(4);
    let mut t = 0.0f64;
    let mut k = 0;
    let mut jumps = 0;
    loop {
        let next = t + clock.sample(rng);
        t = if next > t { next } else { t.next_up() };
        while k < times.len() && times[k] < t {
            observe(k, values);
            k += 1;
        }
        if t > horizon {
            break;
        }
        let e = lattice.edge(rng.random_range(0..edges));
        out.clear();
        rule.transitions(values[e.a], values[e.b], &mut out);
        let mut u = rng.random::<f64>() * bound;
        for &(rate, na, nb) in &out {
            if u < rate {
                values[e.a] = na;
                values[e.b] = nb;
                jumps += 1;
                break;
            }
            u -= rate;
        }
    }
    while k < times.len() {
        observe(k, values);
        k += 1;
    }
    jumps
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Process {
    Sep,
    Coupled,
    Annihilation,
    Free,
}

impl Process {
    pub const ALL: [Process; 4] = [Process::Sep, Process::Coupled, Process::Annihilation, Process::Free];

    pub fn name(self) -> &'static str {
        match self {
            Process::Sep => "sep",
            Process::Coupled => "coupled",
            Process::Annihilation => "annihilation",
            Process::Free => "free",
        }
    }
}

/// State of one of the four processes.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ProcessState {
    Sep(OccupancyConfig),
    Coupled { eta: OccupancyConfig, zeta: OccupancyConfig },
    Annihilation(SignedConfig),
    Free(TwoSpeciesConfig),
}

impl ProcessState {
    pub fn process(&self) -> Process {
        match self {
            ProcessState::Sep(_) => Process::Sep,
            ProcessState::Coupled { .. } => Process::Coupled,
            ProcessState::Annihilation(_) => Process::Annihilation,
            ProcessState::Free(_) => Process::Free,
        }
    }

    pub fn lattice(&self) -> &TorusLattice {
        match self {
            ProcessState::Sep(c) => c.lattice(),
            ProcessState::Coupled { eta, .. } => eta.lattice(),
            ProcessState::Annihilation(c) => c.lattice(),
            ProcessState::Free(c) => c.lattice(),
        }
    }

    /// Symbol string, row-major; for the coupled process `η` then `ζ`.
    pub fn symbols(&self) -> Vec<u8> {
        fn chars<S: Symbol>(c: &Config<S>) -> impl Iterator<Item = u8> + '_ {
            c.values().iter().map(|s| s.to_char() as u8)
        }
        match self {
            ProcessState::Sep(c) => chars(c).collect(),
            ProcessState::Coupled { eta, zeta } => chars(eta).chain(chars(zeta)).collect(),
            ProcessState::Annihilation(c) => chars(c).collect(),
            ProcessState::Free(c) => chars(c).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub lattice: TorusLattice,
    pub snapshots: Vec<(f64, ProcessState)>,
}

pub(crate) fn check_times(times: &[f64], horizon: f64) -> Result<()> {
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(invalid!("horizon must be finite and nonnegative"));
    }
    if times.iter().any(|&t| !(0.0..=horizon).contains(&t)) {
        return Err(invalid!("observation times must lie in [0, {horizon}]"));
    }
    if times.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid!("observation times must be strictly increasing"));
    }
    Ok(())
}

fn run_rule<R: EdgeRule>(
    rule: &R,
    lattice: &TorusLattice,
    init: Vec<R::Site>,
    horizon: f64,
    obs: &[f64],
    rng: &mut SimRng,
    wrap: impl Fn(&[R::Site]) -> ProcessState,
) -> Vec<(f64, ProcessState)> {
    let mut values = init;
    let mut snaps = Vec::with_capacity(obs.len());
    simulate(rule, lattice, &mut values, horizon, obs, rng, |k, v| {
        snaps.push((obs[k], wrap(v)))
    });
    snaps
}

/// Run one process with the rates of its generator, snapshotting at `obs`.
pub fn gillespie(
    process: Process,
    init: &ProcessState,
    horizon: f64,
    obs: &[f64],
    seed: u64,
) -> Result<Trajectory> {
    gillespie_with(process, init, horizon, obs, &mut rng_from_seed(seed))
}

pub fn gillespie_with(
    process: Process,
    init: &ProcessState,
    horizon: f64,
    obs: &[f64],
    rng: &mut SimRng,
) -> Result<Trajectory> {
    if init.process() != process {
        return Err(invalid!(
            "initial state is for {}, process is {}",
            init.process().name(),
            process.name()
        ));
    }
    check_times(obs, horizon)?;
    let lattice = *init.lattice();
    let snapshots = match init {
        ProcessState::Sep(c) => run_rule(&SepRule, &lattice, c.values().to_vec(), horizon, obs, rng, |v| {
            ProcessState::Sep(Config::new(lattice, v.to_vec()).expect("sized"))
        }),
        ProcessState::Coupled { eta, zeta } => {
            if zeta.lattice() != eta.lattice() {
                return Err(invalid!("coupled configurations on different lattices"));
            }
            let init = eta.values().iter().copied().zip(zeta.values().iter().copied()).collect();
            run_rule(&CoupledRule, &lattice, init, horizon, obs, rng, |v: &[(bool, bool)]| {
                ProcessState::Coupled {
                    eta: Config::new(lattice, v.iter().map(|p| p.0).collect()).expect("sized"),
                    zeta: Config::new(lattice, v.iter().map(|p| p.1).collect()).expect("sized"),
                }
            })
        }
        ProcessState::Annihilation(c) => run_rule(
            &AnnihilationRule::default(),
            &lattice,
            c.values().to_vec(),
            horizon,
            obs,
            rng,
            |v| ProcessState::Annihilation(Config::new(lattice, v.to_vec()).expect("sized")),
        ),
        ProcessState::Free(c) => run_rule(&FreeRule, &lattice, c.values().to_vec(), horizon, obs, rng, |v| {
            ProcessState::Free(Config::new(lattice, v.to_vec()).expect("sized"))
        }),
    };
    Ok(Trajectory { lattice, snapshots })
}
