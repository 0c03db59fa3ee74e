//! Graphical construction: Poisson arrows on edges and the processes they
//! realize.
//!
//! Every edge carries an independent rate-1 Poisson process of arrows per
//! channel. An arrow exchanges whatever its channel's markers hold at the
//! two endpoints. With one channel this is the stirring process; with two
//! independent channels (`Minus`, `Plus`) it drives the two-species
//! dynamics, each species following its own channel.
//!
//! Arrows are produced as one Poisson stream of rate `channels · #edges`
//! with a uniformly chosen (edge, channel) mark, which has the same law as
//! independent per-edge clocks.

use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::config::{Cell, Charge, Config, OccupancyConfig, SignedConfig, TwoSpeciesConfig};
use crate::error::{invalid, Error, Result};
use crate::lattice::{Site, TorusLattice};
use crate::rng::{rng_from_seed, SimRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    /// The only channel of a single-channel log; carries anti-particles.
    Minus,
    Plus,
}

impl Channel {
    fn index(self) -> usize {
        match self {
            Channel::Minus => 0,
            Channel::Plus => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arrow {
    pub time: f64,
    pub edge: usize,
    pub channel: Channel,
}

/// Lazily generated, time-ordered arrows up to a horizon.
pub struct ArrowStream {
    lattice: TorusLattice,
    channels: usize,
    horizon: f64,
    time: f64,
    clock: Exp<f64>,
    rng: SimRng,
}

impl ArrowStream {
    pub fn new(lattice: TorusLattice, channels: usize, horizon: f64, rng: SimRng) -> Result<Self> {
        if !(1..=2).contains(&channels) {
            return Err(invalid!("stirring uses 1 or 2 channels, got {channels}"));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(invalid!("horizon must be positive and finite, got {horizon}"));
        }
        let rate = (channels * lattice.num_edges()) as f64;
        Ok(ArrowStream {
            lattice,
            channels,
            horizon,
            time: 0.0,
            clock: Exp::new(rate).expect("positive rate"),
            rng,
        })
    }
}

impl Iterator for ArrowStream {
    type Item = Arrow;

    fn next(&mut self) -> Option<Arrow> {
        let next = self.time + self.clock.sample(&mut self.rng);
        // Exponential gaps below half an ulp of the clock would round to a tie;
        // keep the exact ordering by moving to the next representable time.
        let next = if next > self.time { next } else { self.time.next_up() };
        if next > self.horizon {
            self.time = self.horizon;
            return None;
        }
        self.time = next;
        let k = self.rng.random_range(0..self.channels * self.lattice.num_edges());
        Some(Arrow {
            time: next,
            edge: k / self.channels,
            channel: if k % self.channels == 0 {
                Channel::Minus
            } else {
                Channel::Plus
            },
        })
    }
}

/// Materialized arrows on `(0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StirringLog {
    lattice: TorusLattice,
    horizon: f64,
    channels: usize,
    arrows: Vec<Arrow>,
}

impl StirringLog {
    /// Build a log from explicit arrows, checking order, edges and channels.
    pub fn from_arrows(
        lattice: TorusLattice,
        horizon: f64,
        channels: usize,
        arrows: Vec<Arrow>,
    ) -> Result<Self> {
        if !(1..=2).contains(&channels) {
            return Err(invalid!("stirring uses 1 or 2 channels, got {channels}"));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(invalid!("horizon must be positive and finite, got {horizon}"));
        }
        let mut last = 0.0;
        for a in &arrows {
            if !(a.time > last) {
                return Err(invalid!(
                    "arrow times must be strictly increasing and positive ({} after {last})",
                    a.time
                ));
            }
            if a.time > horizon {
                return Err(Error::OutOfRange(format!("arrow at {} past horizon {horizon}", a.time)));
            }
            if a.edge >= lattice.num_edges() {
                return Err(Error::OutOfRange(format!("edge {} on {} edges", a.edge, lattice.num_edges())));
            }
            if a.channel.index() >= channels {
                return Err(invalid!("arrow on channel {:?} in a {channels}-channel log", a.channel));
            }
            last = a.time;
        }
        Ok(StirringLog {
            lattice,
            horizon,
            channels,
            arrows,
        })
    }

    pub fn lattice(&self) -> &TorusLattice {
        &self.lattice
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn arrows(&self) -> &[Arrow] {
        &self.arrows
    }

    fn until(&self, t: f64) -> Result<impl Iterator<Item = &Arrow>> {
        if t > self.horizon {
            return Err(Error::OutOfRange(format!(
                "time {t} beyond log horizon {}",
                self.horizon
            )));
        }
        Ok(self.arrows.iter().take_while(move |a| a.time <= t))
    }

    fn need_channels(&self, n: usize) -> Result<()> {
        if self.channels != n {
            return Err(invalid!(
                "operation needs a {n}-channel log, got {} channel(s)",
                self.channels
            ));
        }
        Ok(())
    }

    fn check_lattice(&self, lattice: &TorusLattice) -> Result<()> {
        if *lattice != self.lattice {
            return Err(invalid!("configuration and log live on different lattices"));
        }
        Ok(())
    }
}

/// Independent rate-1 arrows per (edge, channel) on `(0, horizon]`.
pub fn gen_stirring(
    lattice: &TorusLattice,
    horizon: f64,
    seed: u64,
    channels: usize,
) -> Result<StirringLog> {
    let arrows = ArrowStream::new(*lattice, channels, horizon, rng_from_seed(seed))?.collect();
    Ok(StirringLog {
        lattice: *lattice,
        horizon,
        channels,
        arrows,
    })
}

/// `W_y(t)` for the given channel: where the marker started at `y` sits.
pub fn stirring_position(log: &StirringLog, channel: Channel, y: Site, t: f64) -> Result<Site> {
    if y >= log.lattice.num_sites() {
        return Err(Error::OutOfRange(format!("site {y}")));
    }
    let mut pos = y;
    for a in log.until(t)?.filter(|a| a.channel == channel) {
        if let Some(z) = log.lattice.edge(a.edge).other(pos) {
            pos = z;
        }
    }
    Ok(pos)
}

/// The whole map `y ↦ W_y(t)` for one channel.
pub fn stirring_permutation(log: &StirringLog, channel: Channel, t: f64) -> Result<Vec<Site>> {
    let n = log.lattice.num_sites();
    // occupant[x] = marker currently at x
    let mut occupant: Vec<Site> = (0..n).collect();
    for a in log.until(t)?.filter(|a| a.channel == channel) {
        let e = log.lattice.edge(a.edge);
        occupant.swap(e.a, e.b);
    }
    let mut pos = vec![0; n];
    for (x, &m) in occupant.iter().enumerate() {
        pos[m] = x;
    }
    Ok(pos)
}

/// Push `ζ` forward along the arrows of `channel`.
pub fn realize_sep_on(
    zeta: &OccupancyConfig,
    log: &StirringLog,
    channel: Channel,
    t: f64,
) -> Result<OccupancyConfig> {
    log.check_lattice(zeta.lattice())?;
    let mut eta = zeta.clone();
    let v = eta.values_mut();
    for a in log.until(t)?.filter(|a| a.channel == channel) {
        let e = log.lattice.edge(a.edge);
        v.swap(e.a, e.b);
    }
    Ok(eta)
}

/// `η_x(t) = Σ_y ζ_y 1{W_y(t) = x}` using the first (`Minus`) channel.
pub fn realize_sep(zeta: &OccupancyConfig, log: &StirringLog, t: f64) -> Result<OccupancyConfig> {
    realize_sep_on(zeta, log, Channel::Minus, t)
}

/// Two species carried by independent channels, no interaction: a site is
/// `±` when markers of both species landed there.
pub fn realize_two_species_free(
    zeta: &TwoSpeciesConfig,
    log: &StirringLog,
    t: f64,
) -> Result<TwoSpeciesConfig> {
    log.need_channels(2)?;
    log.check_lattice(zeta.lattice())?;
    let mut state = FreeState::from_config(zeta);
    for a in log.until(t)? {
        state.apply(&log.lattice, a);
    }
    Ok(state.to_config(log.lattice))
}

/// Annihilation by thinning: replay the arrows with each species on its
/// channel and remove a `+`/`-` pair as soon as they share a site.
pub fn thin_to_annihilation(
    zeta: &SignedConfig,
    log: &StirringLog,
    t: f64,
) -> Result<SignedConfig> {
    log.need_channels(2)?;
    log.check_lattice(zeta.lattice())?;
    let mut state = ThinningState::from_config(zeta);
    for a in log.until(t)? {
        state.apply(&log.lattice, a);
    }
    Ok(state.to_config(log.lattice))
}

/// Something an arrow acts on.
pub trait ArrowDynamics {
    fn apply(&mut self, lattice: &TorusLattice, arrow: &Arrow);
}

/// Occupancy pushed by one channel.
#[derive(Debug, Clone)]
pub struct SepState {
    pub channel: Channel,
    pub occupied: Vec<bool>,
}

impl ArrowDynamics for SepState {
    fn apply(&mut self, lattice: &TorusLattice, arrow: &Arrow) {
        if arrow.channel == self.channel {
            let e = lattice.edge(arrow.edge);
            self.occupied.swap(e.a, e.b);
        }
    }
}

/// Per-species occupancies, each moved by its own channel.
#[derive(Debug, Clone)]
pub struct FreeState {
    pub minus: Vec<bool>,
    pub plus: Vec<bool>,
}

impl FreeState {
    pub fn from_config(c: &TwoSpeciesConfig) -> Self {
        FreeState {
            minus: c.values().iter().map(|v| v.has(crate::Species::Minus)).collect(),
            plus: c.values().iter().map(|v| v.has(crate::Species::Plus)).collect(),
        }
    }

    pub fn from_signed(c: &SignedConfig) -> Self {
        FreeState {
            minus: c.values().iter().map(|&v| v == Charge::Minus).collect(),
            plus: c.values().iter().map(|&v| v == Charge::Plus).collect(),
        }
    }

    pub fn to_config(&self, lattice: TorusLattice) -> TwoSpeciesConfig {
        let values = self
            .minus
            .iter()
            .zip(&self.plus)
            .map(|(&m, &p)| Cell::from_parts(m, p))
            .collect();
        Config::new(lattice, values).expect("state sized to lattice")
    }

    /// `N_{Λ,+1} - N_{Λ,-1}` with `±` counting for both.
    pub fn charge_in(&self, sites: &[Site]) -> i64 {
        sites
            .iter()
            .map(|&x| self.plus[x] as i64 - self.minus[x] as i64)
            .sum()
    }
}

impl ArrowDynamics for FreeState {
    fn apply(&mut self, lattice: &TorusLattice, arrow: &Arrow) {
        let e = lattice.edge(arrow.edge);
        match arrow.channel {
            Channel::Minus => self.minus.swap(e.a, e.b),
            Channel::Plus => self.plus.swap(e.a, e.b),
        }
    }
}

/// Alive particles of the thinned (annihilating) process.
#[derive(Debug, Clone)]
pub struct ThinningState {
    free: FreeState,
    alive: usize,
    annihilations: usize,
}

impl ThinningState {
    pub fn from_config(c: &SignedConfig) -> Self {
        ThinningState {
            free: FreeState::from_signed(c),
            alive: c.abs_sum(),
            annihilations: 0,
        }
    }

    pub fn to_config(&self, lattice: TorusLattice) -> SignedConfig {
        let values = self
            .free
            .minus
            .iter()
            .zip(&self.free.plus)
            .map(|(&m, &p)| match (m, p) {
                (true, false) => Charge::Minus,
                (false, true) => Charge::Plus,
                (false, false) => Charge::Zero,
                (true, true) => unreachable!("co-located pair survived thinning"),
            })
            .collect();
        Config::new(lattice, values).expect("state sized to lattice")
    }

    /// `Σ_x |ξ_x|`.
    pub fn alive(&self) -> usize {
        self.alive
    }

    pub fn annihilations(&self) -> usize {
        self.annihilations
    }

    pub fn net_charge(&self) -> i64 {
        self.free.plus.iter().filter(|&&p| p).count() as i64
            - self.free.minus.iter().filter(|&&m| m).count() as i64
    }
}

impl ArrowDynamics for ThinningState {
    fn apply(&mut self, lattice: &TorusLattice, arrow: &Arrow) {
        self.free.apply(lattice, arrow);
        let e = lattice.edge(arrow.edge);
        // Species are exclusive and no pair co-located before the arrow, so at
        // most one endpoint can now hold both.
        for z in [e.a, e.b] {
            if self.free.minus[z] && self.free.plus[z] {
                self.free.minus[z] = false;
                self.free.plus[z] = false;
                self.alive -= 2;
                self.annihilations += 1;
            }
        }
    }
}

/// Run `state` through `arrows`, calling `observe(k, &state)` at each
/// observation time `times[k]` (sorted, arrows at exactly `times[k]` included).
pub fn replay<D, I>(
    lattice: &TorusLattice,
    state: &mut D,
    arrows: I,
    times: &[f64],
    mut observe: impl FnMut(usize, &D),
) where
    D: ArrowDynamics,
    I: IntoIterator<Item = Arrow>,
{
    let mut k = 0;
    for a in arrows {
        while k < times.len() && a.time > times[k] {
            observe(k, state);
            k += 1;
        }
        state.apply(lattice, &a);
    }
    while k < times.len() {
        observe(k, state);
        k += 1;
    }
}
