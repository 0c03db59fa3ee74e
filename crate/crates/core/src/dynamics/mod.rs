//! Stochastic evolution: the stirring construction with its thinning map,
//! and an event-driven simulator for each generator.

pub mod gillespie;
pub mod stirring;
pub mod trajectory;

pub use gillespie::{
    gillespie, gillespie_with, simulate, AnnihilationRule, CoupledRule, EdgeRule, FreeRule, Process,
    ProcessState, SepRule, Trajectory,
};
pub use stirring::{
    gen_stirring, realize_sep, realize_sep_on, realize_two_species_free, replay, stirring_permutation,
    stirring_position, thin_to_annihilation, Arrow, ArrowDynamics, ArrowStream, Channel, FreeState,
    SepState, StirringLog, ThinningState,
};
