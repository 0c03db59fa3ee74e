//! Exact computations on tiny lattices.
//!
//! Generators are built by enumerating every configuration of the relevant
//! alphabet and reading off the rates edge by edge, transient laws come from
//! uniformization, and transport distances from an exact min-cost flow. None
//! of this shares code with the simulators in [`crate::dynamics`], so the two
//! can be checked against each other.
//!
//! States are indexed by `Σ_x digit(x) · k^x` over sites `x`, with `k` the
//! alphabet size and digits:
//!
//! | process        | k | digit                                   |
//! |----------------|---|-----------------------------------------|
//! | `Sep`          | 2 | `η_x`                                   |
//! | `Coupled`      | 4 | `η_x + 2 ζ_x`                           |
//! | `Annihilation` | 3 | `0 ↦ 0`, `-1 ↦ 1`, `+1 ↦ 2`             |
//! | `Free`         | 4 | `0 ↦ 0`, `-1 ↦ 1`, `+1 ↦ 2`, `± ↦ 3`    |

mod checks;
mod transport;
mod walks;

pub use checks::{
    annihilation_abs_series, box_points, duality_exact, duality_sides, lemma21_check,
    superadditivity_defect, OracleReport,
};
pub use transport::{exact_wasserstein, wasserstein_with_potentials, TransportSolution};
pub use walks::{
    cross_channel_check, liggett_check, liggett_subset_check, rw_transition, stirring_pair_law,
    two_particle_exclusion, LiggettReport, PairLaw,
};

use serde::Serialize;

use crate::config::{Cell, Charge, Config, Symbol};
use crate::dynamics::{Process, ProcessState};
use crate::ensembles::DiffLawSpec;
use crate::error::{invalid, Error, Result};
use crate::lattice::TorusLattice;

/// Largest state space the builders accept.
pub const MAX_STATES: usize = 1 << 20;
/// Total-variation budget of the uniformization truncation.
pub const UNIFORMIZATION_TOL: f64 = 1e-13;

pub fn alphabet_size(process: Process) -> usize {
    match process {
        Process::Sep => 2,
        Process::Annihilation => 3,
        Process::Coupled | Process::Free => 4,
    }
}

fn state_count(k: usize, n: usize) -> Result<usize> {
    let mut total = 1usize;
    for _ in 0..n {
        total = total
            .checked_mul(k)
            .filter(|&t| t <= MAX_STATES)
            .ok_or_else(|| {
                Error::ResourceLimit(format!("{k}^{n} states exceeds the cap of {MAX_STATES}"))
            })?;
    }
    Ok(total)
}

fn decode(mut index: usize, k: usize, n: usize, digits: &mut Vec<u8>) {
    digits.clear();
    for _ in 0..n {
        digits.push((index % k) as u8);
        index /= k;
    }
}

fn encode(digits: &[u8], k: usize) -> usize {
    digits.iter().rev().fold(0, |acc, &d| acc * k + d as usize)
}

/// State index of a configuration of any process.
pub fn state_index(state: &ProcessState) -> usize {
    fn enc<S: Symbol>(c: &Config<S>) -> usize {
        let k = S::ALPHABET.len();
        c.values().iter().rev().fold(0, |acc, s| acc * k + s.code())
    }
    match state {
        ProcessState::Sep(c) => enc(c),
        ProcessState::Annihilation(c) => enc(c),
        ProcessState::Free(c) => enc(c),
        ProcessState::Coupled { eta, zeta } => eta
            .values()
            .iter()
            .zip(zeta.values())
            .rev()
            .fold(0, |acc, (&e, &z)| acc * 4 + e as usize + 2 * z as usize),
    }
}

/// Configuration for a state index; inverse of [`state_index`].
pub fn state_from_index(process: Process, lattice: &TorusLattice, index: usize) -> Result<ProcessState> {
    let n = lattice.num_sites();
    let k = alphabet_size(process);
    if index >= state_count(k, n)? {
        return Err(Error::OutOfRange(format!("state index {index}")));
    }
    let mut d = Vec::new();
    decode(index, k, n, &mut d);
    fn cfg<S: Symbol>(lattice: &TorusLattice, d: &[u8]) -> Config<S> {
        Config::new(*lattice, d.iter().map(|&x| S::ALPHABET[x as usize]).collect())
            .expect("sized to lattice")
    }
    Ok(match process {
        Process::Sep => ProcessState::Sep(cfg(lattice, &d)),
        Process::Annihilation => ProcessState::Annihilation(cfg(lattice, &d)),
        Process::Free => ProcessState::Free(cfg(lattice, &d)),
        Process::Coupled => ProcessState::Coupled {
            eta: Config::new(*lattice, d.iter().map(|&x| x & 1 == 1).collect())?,
            zeta: Config::new(*lattice, d.iter().map(|&x| x & 2 == 2).collect())?,
        },
    })
}

/// Probability vector over an enumerated state space.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Distribution {
    probs: Vec<f64>,
}

impl Distribution {
    pub const SUM_TOL: f64 = 1e-10;

    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(invalid!("distribution over an empty state space"));
        }
        if probs.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(invalid!("distribution has a negative or non-finite entry"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > Self::SUM_TOL {
            return Err(invalid!("distribution sums to {total}"));
        }
        Ok(Distribution { probs })
    }

    pub fn point_mass(len: usize, index: usize) -> Result<Self> {
        if index >= len {
            return Err(Error::OutOfRange(format!("point mass at {index} of {len}")));
        }
        let mut probs = vec![0.0; len];
        probs[index] = 1.0;
        Ok(Distribution { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn total_variation(&self, other: &Distribution) -> Result<f64> {
        if self.len() != other.len() {
            return Err(invalid!("distributions over different state spaces"));
        }
        Ok(0.5 * self.probs.iter().zip(&other.probs).map(|(a, b)| (a - b).abs()).sum::<f64>())
    }

    /// `Σ_i p_i f(i)`.
    pub fn expect(&self, f: impl Fn(usize) -> f64) -> f64 {
        self.probs.iter().enumerate().map(|(i, p)| p * f(i)).sum()
    }
}

/// Optional rate overrides for mutation tests of the oracle suite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorRates {
    /// Rate of `ξ ↦ ξ^{x,y;†}` on edges with `ξ_x ξ_y = -1`.
    pub annihilation: f64,
}

impl Default for GeneratorRates {
    fn default() -> Self {
        GeneratorRates { annihilation: 2.0 }
    }
}

/// Sparse rate matrix `Q` over an enumerated state space.
#[derive(Debug, Clone)]
pub struct GeneratorMatrix {
    process: Option<Process>,
    lattice: TorusLattice,
    /// Off-diagonal rates per row, columns sorted and distinct.
    rows: Vec<Vec<(usize, f64)>>,
    diag: Vec<f64>,
}

impl GeneratorMatrix {
    fn from_rows(process: Option<Process>, lattice: TorusLattice, mut rows: Vec<Vec<(usize, f64)>>) -> Self {
        let mut diag = Vec::with_capacity(rows.len());
        for (i, row) in rows.iter_mut().enumerate() {
            row.retain(|&(j, r)| j != i && r != 0.0);
            row.sort_by_key(|&(j, _)| j);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
            for &(j, r) in row.iter() {
                match merged.last_mut() {
                    Some((lj, lr)) if *lj == j => *lr += r,
                    _ => merged.push((j, r)),
                }
            }
            *row = merged;
            diag.push(-row.iter().map(|&(_, r)| r).sum::<f64>());
        }
        GeneratorMatrix {
            process,
            lattice,
            rows,
            diag,
        }
    }

    pub fn process(&self) -> Option<Process> {
        self.process
    }

    pub fn lattice(&self) -> &TorusLattice {
        &self.lattice
    }

    pub fn num_states(&self) -> usize {
        self.rows.len()
    }

    pub fn rate(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return self.diag[i];
        }
        self.rows[i]
            .binary_search_by_key(&j, |&(c, _)| c)
            .map_or(0.0, |k| self.rows[i][k].1)
    }

    /// Off-diagonal entries of row `i`.
    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn max_exit_rate(&self) -> f64 {
        self.diag.iter().fold(0.0, |m, &d| m.max(-d))
    }

    /// Largest `|Σ_j Q_ij|`.
    pub fn max_row_sum(&self) -> f64 {
        self.rows
            .iter()
            .zip(&self.diag)
            .map(|(row, d)| (row.iter().map(|&(_, r)| r).sum::<f64>() + d).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> Result<Vec<Vec<f64>>> {
        let n = self.num_states();
        if n > 4096 {
            return Err(Error::ResourceLimit(format!("dense {n}x{n} matrix")));
        }
        let mut m = vec![vec![0.0; n]; n];
        for (i, row) in self.rows.iter().enumerate() {
            m[i][i] = self.diag[i];
            for &(j, r) in row {
                m[i][j] = r;
            }
        }
        Ok(m)
    }
}

/// Build `Q` for `process` on `lattice` with the canonical rates.
pub fn build_generator(process: Process, lattice: &TorusLattice) -> Result<GeneratorMatrix> {
    build_generator_with(process, lattice, GeneratorRates::default())
}

pub fn build_generator_with(
    process: Process,
    lattice: &TorusLattice,
    rates: GeneratorRates,
) -> Result<GeneratorMatrix> {
    let n = lattice.num_sites();
    let k = alphabet_size(process);
    let states = state_count(k, n)?;
    let edges: Vec<(usize, usize)> = lattice.edges().map(|e| (e.a, e.b)).collect();
    let mut rows = Vec::with_capacity(states);
    let mut d = Vec::with_capacity(n);
    for s in 0..states {
        decode(s, k, n, &mut d);
        let mut row = Vec::new();
        let mut push = |digits: &[u8], rate: f64| row.push((encode(digits, k), rate));
        for &(x, y) in &edges {
            match process {
                Process::Sep => sep_terms(&d, x, y, &mut push),
                Process::Coupled => coupled_terms(&d, x, y, &mut push),
                Process::Annihilation => annihilation_terms(&d, x, y, rates.annihilation, &mut push),
                Process::Free => {
                    // the sum runs over oriented edges
                    free_terms(&d, x, y, &mut push);
                    free_terms(&d, y, x, &mut push);
                }
            }
        }
        rows.push(row);
    }
    Ok(GeneratorMatrix::from_rows(Some(process), *lattice, rows))
}

fn swapped(d: &[u8], x: usize, y: usize) -> Vec<u8> {
    let mut t = d.to_vec();
    t.swap(x, y);
    t
}

/// `L f(η) = Σ_{⟨x,y⟩} [f(η^{x,y}) - f(η)]`.
fn sep_terms(d: &[u8], x: usize, y: usize, push: &mut impl FnMut(&[u8], f64)) {
    push(&swapped(d, x, y), 1.0);
}

/// Basic coupling: joint swap unless both sites are discordant, in which
/// case each marginal swaps alone at rate 1.
fn coupled_terms(d: &[u8], x: usize, y: usize, push: &mut impl FnMut(&[u8], f64)) {
    let eta = |z: usize| d[z] & 1;
    let zeta = |z: usize| (d[z] >> 1) & 1;
    let discordant = eta(x) != zeta(x) && eta(y) != zeta(y);
    if !discordant {
        push(&swapped(d, x, y), 1.0);
    } else {
        let mut only_eta = d.to_vec();
        only_eta[x] = eta(y) | (zeta(x) << 1);
        only_eta[y] = eta(x) | (zeta(y) << 1);
        push(&only_eta, 1.0);
        let mut only_zeta = d.to_vec();
        only_zeta[x] = eta(x) | (zeta(y) << 1);
        only_zeta[y] = eta(y) | (zeta(x) << 1);
        push(&only_zeta, 1.0);
    }
}

fn charge_of(digit: u8) -> i8 {
    match digit {
        0 => 0,
        1 => -1,
        _ => 1,
    }
}

/// `1{ξ_x ξ_y ≠ -1} [f(ξ^{x,y}) - f] + 2 · 1{ξ_x ξ_y = -1} [f(ξ^{x,y;†}) - f]`.
fn annihilation_terms(d: &[u8], x: usize, y: usize, rate: f64, push: &mut impl FnMut(&[u8], f64)) {
    if charge_of(d[x]) * charge_of(d[y]) == -1 {
        let mut t = d.to_vec();
        t[x] = 0;
        t[y] = 0;
        push(&t, rate);
    } else {
        push(&swapped(d, x, y), 1.0);
    }
}

const EMPTY: u8 = 0;
const MINUS: u8 = 1;
const PLUS: u8 = 2;
const BOTH: u8 = 3;

/// One oriented edge `(x, y)` of the two-species generator without
/// annihilation.
fn free_terms(d: &[u8], x: usize, y: usize, push: &mut impl FnMut(&[u8], f64)) {
    let set = |a: u8, b: u8| {
        let mut t = d.to_vec();
        t[x] = a;
        t[y] = b;
        t
    };
    for alpha in [MINUS, PLUS] {
        for beta in [EMPTY, BOTH] {
            if d[x] == alpha && d[y] == beta {
                push(&swapped(d, x, y), 1.0);
            }
        }
    }
    if d[x] == MINUS && d[y] == PLUS {
        push(&set(BOTH, EMPTY), 1.0);
        push(&set(EMPTY, BOTH), 1.0);
    }
    if d[x] == EMPTY && d[y] == BOTH {
        push(&set(PLUS, MINUS), 1.0);
        push(&set(MINUS, PLUS), 1.0);
    }
}

/// Generator of a single-site-state chain given explicit off-diagonal rows.
pub(crate) fn generator_from_rows(lattice: TorusLattice, rows: Vec<Vec<(usize, f64)>>) -> GeneratorMatrix {
    GeneratorMatrix::from_rows(None, lattice, rows)
}

/// `d0 · e^{tQ}` by uniformization.
pub fn evolve_exact(gen: &GeneratorMatrix, d0: &Distribution, t: f64) -> Result<Distribution> {
    if d0.len() != gen.num_states() {
        return Err(invalid!(
            "distribution has {} entries, generator {} states",
            d0.len(),
            gen.num_states()
        ));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(invalid!("time must be finite and nonnegative"));
    }
    let rate = gen.max_exit_rate();
    if t == 0.0 || rate == 0.0 {
        return Ok(d0.clone());
    }
    let lambda = rate * t;
    let mut v = d0.probs.clone();
    let mut next = vec![0.0; v.len()];
    let mut out = vec![0.0; v.len()];
    let mut log_w = -lambda;
    let mut k = 0u64;
    loop {
        let w = log_w.exp();
        for (o, x) in out.iter_mut().zip(&v) {
            *o += w * x;
        }
        // Poisson tail past k, bounded by a geometric series once k + 1 > λ.
        // Summing the weights instead stalls near 1 - 1e-13 for large λ.
        let r = lambda / (k as f64 + 1.0);
        if r < 1.0 && w * r / (1.0 - r) < UNIFORMIZATION_TOL {
            break;
        }
        if k > 10_000_000 {
            return Err(Error::ResourceLimit("uniformization did not converge".into()));
        }
        // v ← v (I + Q/Λ)
        for (j, n) in next.iter_mut().enumerate() {
            *n = v[j] * (1.0 + gen.diag[j] / rate);
        }
        for (i, row) in gen.rows.iter().enumerate() {
            let vi = v[i];
            if vi != 0.0 {
                for &(j, r) in row {
                    next[j] += vi * r / rate;
                }
            }
        }
        std::mem::swap(&mut v, &mut next);
        k += 1;
        log_w += lambda.ln() - (k as f64).ln();
    }
    // Put the truncated tail mass back proportionally; it is below the tolerance.
    let total: f64 = out.iter().sum();
    for o in &mut out {
        *o /= total;
    }
    Ok(Distribution { probs: out })
}

/// Push a law on coupled states `(η, ζ)` forward to the law of `η - ζ`.
pub fn coupled_to_difference(lattice: &TorusLattice, coupled: &Distribution) -> Result<Distribution> {
    let n = lattice.num_sites();
    if coupled.len() != state_count(4, n)? {
        return Err(invalid!("not a coupled-state distribution for this lattice"));
    }
    let mut out = vec![0.0; state_count(3, n)?];
    let mut d = Vec::new();
    for (s, &p) in coupled.probs.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        decode(s, 4, n, &mut d);
        let diff: Vec<u8> = d
            .iter()
            .map(|&x| match (x & 1, (x >> 1) & 1) {
                (1, 0) => 2,
                (0, 1) => 1,
                _ => 0,
            })
            .collect();
        out[encode(&diff, 3)] += p;
    }
    Distribution::new(out)
}

/// Exact law of `η - η̃` on the torus, `η` from the torus sampler of `μ` and
/// `η̃ ~ π_ρ`, as a distribution over annihilation states.
pub fn diff_torus_law(spec: &DiffLawSpec, lattice: &TorusLattice) -> Result<Distribution> {
    let n = lattice.num_sites();
    let mu = spec.mu().torus_law(lattice)?;
    let pi = crate::MeasureSpec::bernoulli(spec.rho()).torus_law(lattice)?;
    let mut out = vec![0.0; state_count(3, n)?];
    let mut d = vec![0u8; n];
    for (a, &pa) in mu.iter().enumerate() {
        if pa == 0.0 {
            continue;
        }
        for (b, &pb) in pi.iter().enumerate() {
            for (x, slot) in d.iter_mut().enumerate() {
                *slot = match ((a >> x) & 1, (b >> x) & 1) {
                    (1, 0) => 2,
                    (0, 1) => 1,
                    _ => 0,
                };
            }
            out[encode(&d, 3)] += pa * pb;
        }
    }
    Distribution::new(out)
}

/// Occupancy law over `{0,1}^Λ` (bit `x` ↔ site `x`) as a SEP-state distribution.
pub fn occupancy_distribution(law: Vec<f64>) -> Result<Distribution> {
    Distribution::new(law)
}

/// `E|ξ_0|` under a distribution over annihilation states.
pub fn expected_abs_at_origin(dist: &Distribution) -> f64 {
    dist.expect(|s| (s % 3 != 0) as u8 as f64)
}

/// Symbol of a free-process digit; exposed for reports.
pub fn free_symbol(digit: u8) -> Cell {
    Cell::ALPHABET[digit as usize]
}

/// Symbol of an annihilation-process digit.
pub fn signed_symbol(digit: u8) -> Charge {
    Charge::ALPHABET[digit as usize]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cycle3() -> TorusLattice {
        TorusLattice::new(1, 3).unwrap()
    }

    fn idx(process: Process, s: &str) -> usize {
        let lat = cycle3();
        let state = match process {
            Process::Sep => ProcessState::Sep(format!("1 3 occupancy\n{s}").parse().unwrap()),
            Process::Annihilation => ProcessState::Annihilation(format!("1 3 signed\n{s}").parse().unwrap()),
            Process::Free => ProcessState::Free(format!("1 3 two_species\n{s}").parse().unwrap()),
            Process::Coupled => unreachable!(),
        };
        assert_eq!(state.lattice(), &lat);
        state_index(&state)
    }

    #[test]
    fn index_round_trip() {
        let lat = cycle3();
        for p in Process::ALL {
            let n = alphabet_size(p).pow(3);
            for s in 0..n {
                let st = state_from_index(p, &lat, s).unwrap();
                assert_eq!(state_index(&st), s);
            }
        }
    }

    #[test]
    fn sep_row_on_three_cycle() {
        let q = build_generator(Process::Sep, &cycle3()).unwrap();
        let s = idx(Process::Sep, "100");
        assert_eq!(q.row(s).len(), 2);
        assert_eq!(q.rate(s, idx(Process::Sep, "010")), 1.0);
        assert_eq!(q.rate(s, idx(Process::Sep, "001")), 1.0);
        assert_eq!(q.rate(s, s), -2.0);
    }

    #[test]
    fn annihilation_row_on_three_cycle() {
        let q = build_generator(Process::Annihilation, &cycle3()).unwrap();
        let s = idx(Process::Annihilation, "+-0");
        assert_eq!(q.rate(s, idx(Process::Annihilation, "000")), 2.0);
        assert_eq!(q.rate(s, idx(Process::Annihilation, "+0-")), 1.0);
        assert_eq!(q.rate(s, idx(Process::Annihilation, "0-+")), 1.0);
        assert_eq!(q.rate(s, s), -4.0);
    }

    #[test]
    fn row_sums_vanish() {
        let lat = cycle3();
        for p in Process::ALL {
            let q = build_generator(p, &lat).unwrap();
            assert!(q.max_row_sum() < 1e-12);
            for i in 0..q.num_states() {
                assert!(q.row(i).iter().all(|&(_, r)| r > 0.0));
            }
        }
    }

    #[test]
    fn cap_is_enforced() {
        let lat = TorusLattice::new(1, 11).unwrap();
        assert!(matches!(build_generator(Process::Free, &lat), Err(Error::ResourceLimit(_))));
        let lat = TorusLattice::new(1, 20).unwrap();
        assert!(build_generator(Process::Sep, &lat).is_ok());
    }

    #[test]
    fn evolve_zero_time_and_absorption() {
        let lat = cycle3();
        let q = build_generator(Process::Annihilation, &lat).unwrap();
        let s = idx(Process::Annihilation, "+-0");
        let d0 = Distribution::point_mass(27, s).unwrap();
        assert_eq!(evolve_exact(&q, &d0, 0.0).unwrap(), d0);
        let late = evolve_exact(&q, &d0, 40.0).unwrap();
        assert!((late.probs()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exchangeable_law_is_invariant() {
        let lat = TorusLattice::new(1, 5).unwrap();
        let q = build_generator(Process::Sep, &lat).unwrap();
        // uniform over configurations with exactly two particles
        let probs: Vec<f64> = (0..32u32).map(|c| if c.count_ones() == 2 { 0.1 } else { 0.0 }).collect();
        let d0 = Distribution::new(probs).unwrap();
        for t in [0.3, 1.0, 7.0] {
            let dt = evolve_exact(&q, &d0, t).unwrap();
            assert!(dt.total_variation(&d0).unwrap() < 1e-12);
        }
    }

    #[test]
    fn two_state_chain_closed_form() {
        // Q = [[-a, a], [b, -b]]: p_00(t) = b/(a+b) + a/(a+b) e^{-(a+b)t}
        let (a, b) = (0.7, 2.3);
        let q = generator_from_rows(cycle3(), vec![vec![(1, a)], vec![(0, b)]]);
        let d0 = Distribution::point_mass(2, 0).unwrap();
        for t in [0.1, 1.0, 5.0, 200.0, 2000.0] {
            let want = b / (a + b) + a / (a + b) * (-(a + b) * t).exp();
            let got = evolve_exact(&q, &d0, t).unwrap().probs()[0];
            assert!((got - want).abs() < 1e-13, "t={t}: {got} vs {want}");
        }
    }

    #[test]
    fn distribution_validation() {
        assert!(Distribution::new(vec![0.5, 0.6]).is_err());
        assert!(Distribution::new(vec![-0.1, 1.1]).is_err());
        assert!(Distribution::new(vec![]).is_err());
        assert!(Distribution::new(vec![0.25; 4]).is_ok());
    }
}
