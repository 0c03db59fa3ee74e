//! Configuration spaces on a torus and their elementary transforms.
//!
//! Three alphabets are supported:
//!
//! * occupancy `{0, 1}` ([`OccupancyConfig`]),
//! * signed `{-1, 0, +1}` ([`SignedConfig`]), holding particles and
//!   anti-particles,
//! * two-species `{0, -1, +1, ±}` ([`TwoSpeciesConfig`]), where `±` is a site
//!   carrying one particle of each species.
//!
//! Configurations are flat row-major arrays tied to a [`TorusLattice`].
//!
//! # Text format
//!
//! ```text
//! d L kind
//! <L^d symbols, whitespace ignored>
//! ```
//!
//! with `kind` one of `occupancy`, `signed`, `two_species` and symbols from
//! `{0,1}`, `{-,0,+}` or `{-,0,+,2}` (`2` encodes `±`).

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::lattice::{Site, TorusLattice};

/// A per-site value drawn from a finite alphabet.
pub trait Symbol: Copy + Eq + fmt::Debug + Send + Sync + 'static {
    const KIND: &'static str;
    const ALPHABET: &'static [Self];

    fn to_char(self) -> char;
    fn from_char(c: char) -> Option<Self>;

    /// Position of the symbol in [`Symbol::ALPHABET`].
    fn code(self) -> usize {
        Self::ALPHABET
            .iter()
            .position(|&s| s == self)
            .expect("symbol outside its own alphabet")
    }
}

impl Symbol for bool {
    const KIND: &'static str = "occupancy";
    const ALPHABET: &'static [Self] = &[false, true];

    fn to_char(self) -> char {
        if self {
            '1'
        } else {
            '0'
        }
    }

    fn from_char(c: char) -> Option<Self> {
        match c {
            '0' => Some(false),
            '1' => Some(true),
            _ => None,
        }
    }

    fn code(self) -> usize {
        self as usize
    }
}

/// Value of a signed configuration at one site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Charge {
    Minus,
    Zero,
    Plus,
}

impl Charge {
    pub fn value(self) -> i8 {
        match self {
            Charge::Minus => -1,
            Charge::Zero => 0,
            Charge::Plus => 1,
        }
    }

    pub fn from_value(v: i8) -> Option<Self> {
        match v {
            -1 => Some(Charge::Minus),
            0 => Some(Charge::Zero),
            1 => Some(Charge::Plus),
            _ => None,
        }
    }
}

impl Symbol for Charge {
    const KIND: &'static str = "signed";
    const ALPHABET: &'static [Self] = &[Charge::Zero, Charge::Minus, Charge::Plus];

    fn to_char(self) -> char {
        match self {
            Charge::Minus => '-',
            Charge::Zero => '0',
            Charge::Plus => '+',
        }
    }

    fn from_char(c: char) -> Option<Self> {
        match c {
            '-' => Some(Charge::Minus),
            '0' => Some(Charge::Zero),
            '+' => Some(Charge::Plus),
            _ => None,
        }
    }
}

/// Value of a two-species configuration at one site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Cell {
    Empty,
    Minus,
    Plus,
    /// One particle of each species.
    Both,
}

impl Cell {
    pub fn has(self, species: Species) -> bool {
        matches!(
            (self, species),
            (Cell::Both, _) | (Cell::Minus, Species::Minus) | (Cell::Plus, Species::Plus)
        )
    }

    pub fn from_parts(minus: bool, plus: bool) -> Self {
        match (minus, plus) {
            (false, false) => Cell::Empty,
            (true, false) => Cell::Minus,
            (false, true) => Cell::Plus,
            (true, true) => Cell::Both,
        }
    }
}

impl From<Charge> for Cell {
    fn from(c: Charge) -> Self {
        match c {
            Charge::Minus => Cell::Minus,
            Charge::Zero => Cell::Empty,
            Charge::Plus => Cell::Plus,
        }
    }
}

impl Symbol for Cell {
    const KIND: &'static str = "two_species";
    const ALPHABET: &'static [Self] = &[Cell::Empty, Cell::Minus, Cell::Plus, Cell::Both];

    fn to_char(self) -> char {
        match self {
            Cell::Empty => '0',
            Cell::Minus => '-',
            Cell::Plus => '+',
            Cell::Both => '2',
        }
    }

    fn from_char(c: char) -> Option<Self> {
        match c {
            '0' => Some(Cell::Empty),
            '-' => Some(Cell::Minus),
            '+' => Some(Cell::Plus),
            '2' => Some(Cell::Both),
            _ => None,
        }
    }
}

/// Particle species `α ∈ {-1, +1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Species {
    Minus,
    Plus,
}

impl Species {
    pub const BOTH: [Species; 2] = [Species::Minus, Species::Plus];

    pub fn charge(self) -> Charge {
        match self {
            Species::Minus => Charge::Minus,
            Species::Plus => Charge::Plus,
        }
    }
}

/// Symbols that can be counted per species.
pub trait SpeciesCount: Symbol {
    fn counts_as(self, species: Species) -> bool;
}

impl SpeciesCount for Charge {
    fn counts_as(self, species: Species) -> bool {
        self == species.charge()
    }
}

impl SpeciesCount for Cell {
    fn counts_as(self, species: Species) -> bool {
        self.has(species)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Config<S> {
    lattice: TorusLattice,
    values: Vec<S>,
}

pub type OccupancyConfig = Config<bool>;
pub type SignedConfig = Config<Charge>;
pub type TwoSpeciesConfig = Config<Cell>;

impl<S: Symbol> Config<S> {
    pub fn new(lattice: TorusLattice, values: Vec<S>) -> Result<Self> {
        if values.len() != lattice.num_sites() {
            return Err(invalid!(
                "configuration has {} values, lattice has {} sites",
                values.len(),
                lattice.num_sites()
            ));
        }
        Ok(Config { lattice, values })
    }

    pub fn filled(lattice: TorusLattice, value: S) -> Self {
        Config {
            values: vec![value; lattice.num_sites()],
            lattice,
        }
    }

    pub fn lattice(&self) -> &TorusLattice {
        &self.lattice
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [S] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<S> {
        self.values
    }

    pub fn get(&self, x: Site) -> S {
        self.values[x]
    }

    fn check_pair(&self, x: Site, y: Site) -> Result<()> {
        let n = self.values.len();
        if x >= n || y >= n {
            return Err(Error::OutOfRange(format!("site pair ({x}, {y}) on {n} sites")));
        }
        if x == y {
            return Err(invalid!("pair transform needs distinct sites, got {x} twice"));
        }
        Ok(())
    }

    /// Exchange the values at `x` and `y`.
    pub fn swap(&self, x: Site, y: Site) -> Result<Self> {
        self.check_pair(x, y)?;
        let mut out = self.clone();
        out.values.swap(x, y);
        Ok(out)
    }

    /// Serialize to the flat text format, one lattice row per line.
    pub fn to_text(&self) -> String {
        let l = self.lattice.side();
        let mut out = format!("{} {} {}\n", self.lattice.dim(), l, S::KIND);
        for row in self.values.chunks(l) {
            out.extend(row.iter().map(|s| s.to_char()));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty configuration text".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let [d, l, kind] = fields[..] else {
            return Err(Error::Parse(format!("bad header line {header:?}")));
        };
        let parse = |s: &str| {
            s.parse::<usize>()
                .map_err(|e| Error::Parse(format!("header field {s:?}: {e}")))
        };
        if kind != S::KIND {
            return Err(Error::Parse(format!(
                "expected kind {:?}, found {kind:?}",
                S::KIND
            )));
        }
        let lattice = TorusLattice::new(parse(d)?, parse(l)?)?;
        let values = lines
            .flat_map(str::chars)
            .filter(|c| !c.is_whitespace())
            .map(|c| S::from_char(c).ok_or_else(|| Error::Parse(format!("bad symbol {c:?}"))))
            .collect::<Result<Vec<S>>>()?;
        Config::new(lattice, values).map_err(|e| Error::Parse(e.to_string()))
    }
}

impl<S: Symbol> fmt::Display for Config<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

impl<S: Symbol> FromStr for Config<S> {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Config::from_text(s)
    }
}

impl<S: SpeciesCount> Config<S> {
    /// Number of sites in `sites` carrying `species`; `±` counts for both.
    pub fn count_species(&self, sites: &[Site], species: Species) -> usize {
        sites
            .iter()
            .filter(|&&x| self.values[x].counts_as(species))
            .count()
    }

    pub fn total_species(&self, species: Species) -> usize {
        self.values.iter().filter(|s| s.counts_as(species)).count()
    }
}

impl OccupancyConfig {
    pub fn particles(&self) -> usize {
        self.values.iter().filter(|&&v| v).count()
    }

    /// Site-wise difference `η - ζ`.
    pub fn difference(&self, other: &OccupancyConfig) -> Result<SignedConfig> {
        if self.lattice != other.lattice {
            return Err(invalid!("difference of configurations on different lattices"));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| match (a, b) {
                (true, false) => Charge::Plus,
                (false, true) => Charge::Minus,
                _ => Charge::Zero,
            })
            .collect();
        Ok(Config {
            lattice: self.lattice,
            values,
        })
    }

    /// Hamming distance `Σ |η_x - ζ_x|`.
    pub fn hamming(&self, other: &OccupancyConfig) -> usize {
        self.values
            .iter()
            .zip(&other.values)
            .filter(|(a, b)| a != b)
            .count()
    }
}

impl SignedConfig {
    /// Zero the values at `x` and `y`, leaving the rest untouched.
    pub fn annihilate_pair(&self, x: Site, y: Site) -> Result<Self> {
        self.check_pair(x, y)?;
        let mut out = self.clone();
        out.values[x] = Charge::Zero;
        out.values[y] = Charge::Zero;
        Ok(out)
    }

    /// Number of nonzero sites, `Σ |ξ_x|`.
    pub fn abs_sum(&self) -> usize {
        self.values.iter().filter(|&&c| c != Charge::Zero).count()
    }

    /// `Σ ξ_x`, conserved by annihilation.
    pub fn net_charge(&self) -> i64 {
        self.values.iter().map(|c| c.value() as i64).sum()
    }

    /// Mask of sites holding `species`.
    pub fn species_mask(&self, species: Species) -> OccupancyConfig {
        Config {
            lattice: self.lattice,
            values: self.values.iter().map(|&c| c == species.charge()).collect(),
        }
    }

    pub fn to_two_species(&self) -> TwoSpeciesConfig {
        Config {
            lattice: self.lattice,
            values: self.values.iter().map(|&c| Cell::from(c)).collect(),
        }
    }
}

impl TwoSpeciesConfig {
    /// Set `x` to `a` and `y` to `b`.
    pub fn set_pair(&self, x: Site, y: Site, a: Cell, b: Cell) -> Result<Self> {
        self.check_pair(x, y)?;
        let mut out = self.clone();
        out.values[x] = a;
        out.values[y] = b;
        Ok(out)
    }
}
