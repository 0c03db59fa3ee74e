//! Symmetric exclusion process, its two-species annihilating coupling, and
//! exact small-lattice oracles for both.

pub mod cli;
pub mod config;
pub mod dynamics;
pub mod ensembles;
pub mod error;
pub mod lattice;
pub mod metrics;
pub mod oracle;
pub mod rng;

pub use config::{Cell, Charge, Config, OccupancyConfig, SignedConfig, Species, TwoSpeciesConfig};
pub use ensembles::{DiffLawSpec, MeasureSpec};
pub use error::{Error, Result};
pub use lattice::{Edge, Site, TorusLattice};

// The guide's code blocks run as doctests, one module per chapter.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/lattice.md")]
    mod lattice {}
    #[doc = include_str!("../../../book/src/dynamics.md")]
    mod dynamics {}
    #[doc = include_str!("../../../book/src/initial-laws.md")]
    mod initial_laws {}
    #[doc = include_str!("../../../book/src/oracle.md")]
    mod oracle {}
    #[doc = include_str!("../../../book/src/transport.md")]
    mod transport {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
