//! Translation-invariant initial measures with exactly computable densities
//! and correlation sums.
//!
//! Three families are shipped:
//!
//! * `Bernoulli(ρ)`, the product measure `π_ρ`;
//! * finite-range block factors `η_x = f(U_{x+w}, w ∈ W)` of an i.i.d.
//!   Bernoulli(`p`) driving field `U`, with `f` given as a lookup table;
//! * stationary two-state Markov chains on `ℤ` with transition matrix
//!   `[[1-a, a], [b, 1-b]]`.
//!
//! All exact functionals (`density`, `covariance`, `A`, `B`) refer to the
//! infinite-volume law. Samplers produce the torus version: windows of block
//! factors wrap periodically and the Markov chain is the cyclic chain with
//! weights `∏ P(η_x, η_{x+1})`, so both are exactly translation invariant on
//! the torus. The cyclic chain differs from the infinite one by `O(|1-a-b|^L)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::{Charge, Config, OccupancyConfig, SignedConfig};
use crate::error::{invalid, Error, Result};
use crate::lattice::TorusLattice;
use crate::rng::{replica_rng, rng_from_seed, Purpose, SimRng};

/// Declarative description of an initial law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureSpec {
    Bernoulli {
        rho: f64,
    },
    /// `η_x = U_x XOR U_{x + range·e₁}` with `U` i.i.d. Bernoulli(`p`).
    BlockXor {
        p: f64,
        range: usize,
    },
    /// General block factor: `table[Σ_i U_{x+window[i]} 2^i]`.
    BlockFactor {
        p: f64,
        window: Vec<Vec<i64>>,
        table: Vec<u8>,
    },
    /// Stationary chain on `ℤ`, one dimension only.
    Markov {
        a: f64,
        b: f64,
    },
}

/// Largest number of driving bits enumerated exactly.
const MAX_ENUM_BITS: usize = 24;
/// Relative tail tolerance for infinite correlation sums.
const SERIES_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
struct Window {
    p: f64,
    offsets: Vec<Vec<i64>>,
    table: Vec<bool>,
}

impl Window {
    fn dim(&self) -> usize {
        self.offsets[0].len()
    }

    fn padded(&self, dim: usize) -> Result<Vec<Vec<i64>>> {
        if dim < self.dim() {
            return Err(invalid!(
                "block factor window is {}-dimensional, target has dimension {dim}",
                self.dim()
            ));
        }
        Ok(self
            .offsets
            .iter()
            .map(|o| {
                let mut v = o.clone();
                v.resize(dim, 0);
                v
            })
            .collect())
    }

    fn weight(&self, bits: u64, n: usize) -> f64 {
        let ones = bits.count_ones() as i32;
        self.p.powi(ones) * (1.0 - self.p).powi(n as i32 - ones)
    }

    /// Exact law of `(η at each of `points`)`, as a vector over `2^|points|`.
    fn joint_law(&self, points: &[Vec<i64>]) -> Result<Vec<f64>> {
        let dim = points.first().map_or(self.dim(), |p| p.len()).max(self.dim());
        let offsets = self.padded(dim)?;
        let mut driving: Vec<Vec<i64>> = Vec::new();
        let mut index_of = Vec::with_capacity(points.len());
        for pt in points {
            let mut pt = pt.clone();
            pt.resize(dim, 0);
            let idx: Vec<usize> = offsets
                .iter()
                .map(|o| {
                    let z: Vec<i64> = pt.iter().zip(o).map(|(a, b)| a + b).collect();
                    match driving.iter().position(|d| *d == z) {
                        Some(i) => i,
                        None => {
                            driving.push(z);
                            driving.len() - 1
                        }
                    }
                })
                .collect();
            index_of.push(idx);
        }
        let n = driving.len();
        if n > MAX_ENUM_BITS {
            return Err(Error::ResourceLimit(format!(
                "exact block-factor law needs {n} driving bits (cap {MAX_ENUM_BITS})"
            )));
        }
        let mut law = vec![0.0; 1 << points.len()];
        for bits in 0u64..(1u64 << n) {
            let w = self.weight(bits, n);
            let mut out = 0usize;
            for (k, idx) in index_of.iter().enumerate() {
                let key = idx
                    .iter()
                    .enumerate()
                    .fold(0usize, |acc, (i, &j)| acc | ((((bits >> j) & 1) as usize) << i));
                if self.table[key] {
                    out |= 1 << k;
                }
            }
            law[out] += w;
        }
        Ok(law)
    }

    /// Offsets `x` with possibly nonzero covariance: the difference set `W - W`.
    fn support(&self) -> Vec<Vec<i64>> {
        let mut out: Vec<Vec<i64>> = Vec::new();
        for a in &self.offsets {
            for b in &self.offsets {
                let d: Vec<i64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
                if !out.contains(&d) {
                    out.push(d);
                }
            }
        }
        out
    }
}

fn check_prob(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(invalid!("{name} = {v} must lie in [0, 1]"))
    }
}

type Mat2 = [[f64; 2]; 2];

fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut c = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

fn mat_pow(m: &Mat2, mut k: u64) -> Mat2 {
    let mut acc = [[1.0, 0.0], [0.0, 1.0]];
    let mut base = *m;
    while k > 0 {
        if k & 1 == 1 {
            acc = mat_mul(&acc, &base);
        }
        base = mat_mul(&base, &base);
        k >>= 1;
    }
    acc
}

impl MeasureSpec {
    /// Named instances covering every family; used by examples and tests.
    pub fn catalog() -> Vec<(&'static str, MeasureSpec)> {
        vec![
            ("bernoulli_half", MeasureSpec::bernoulli(0.5)),
            ("bernoulli_0.3", MeasureSpec::bernoulli(0.3)),
            ("block_xor_near", MeasureSpec::block_xor(0.2, 1)),
            ("block_xor_far", MeasureSpec::block_xor(0.35, 3)),
            (
                "block_majority_2d",
                MeasureSpec::BlockFactor {
                    p: 0.4,
                    window: vec![vec![0, 0], vec![1, 0], vec![0, 1]],
                    table: vec![0, 0, 0, 1, 0, 1, 1, 1],
                },
            ),
            ("markov_persistent", MeasureSpec::markov(0.1, 0.15)),
            ("markov_alternating", MeasureSpec::markov(0.8, 0.7)),
        ]
    }

    pub fn bernoulli(rho: f64) -> Self {
        MeasureSpec::Bernoulli { rho }
    }

    pub fn block_xor(p: f64, range: usize) -> Self {
        MeasureSpec::BlockXor { p, range }
    }

    pub fn markov(a: f64, b: f64) -> Self {
        MeasureSpec::Markov { a, b }
    }

    /// Check parameters; every other method assumes a valid spec.
    pub fn validate(&self) -> Result<()> {
        match self {
            MeasureSpec::Bernoulli { rho } => check_prob("rho", *rho),
            MeasureSpec::BlockXor { p, range } => {
                check_prob("p", *p)?;
                if *range == 0 {
                    return Err(invalid!("block_xor range must be at least 1"));
                }
                Ok(())
            }
            MeasureSpec::BlockFactor { p, window, table } => {
                check_prob("p", *p)?;
                if window.is_empty() || window[0].is_empty() {
                    return Err(invalid!("block factor window must be nonempty"));
                }
                if window.iter().any(|w| w.len() != window[0].len()) {
                    return Err(invalid!("block factor offsets must share one dimension"));
                }
                if window.len() > 16 {
                    return Err(invalid!("block factor windows are limited to 16 sites"));
                }
                if table.len() != 1 << window.len() {
                    return Err(invalid!(
                        "block factor table needs {} entries, got {}",
                        1usize << window.len(),
                        table.len()
                    ));
                }
                if table.iter().any(|&v| v > 1) {
                    return Err(invalid!("block factor table entries must be 0 or 1"));
                }
                Ok(())
            }
            MeasureSpec::Markov { a, b } => {
                check_prob("a", *a)?;
                check_prob("b", *b)?;
                if *a == 0.0 || *b == 0.0 {
                    return Err(invalid!("Markov chain with a = 0 or b = 0 is reducible"));
                }
                if *a == 1.0 && *b == 1.0 {
                    return Err(invalid!("Markov chain with a = b = 1 is periodic"));
                }
                Ok(())
            }
        }
    }

    fn window(&self) -> Option<Window> {
        match self {
            MeasureSpec::BlockXor { p, range } => Some(Window {
                p: *p,
                offsets: vec![vec![0], vec![*range as i64]],
                table: vec![false, true, true, false],
            }),
            MeasureSpec::BlockFactor { p, window, table } => Some(Window {
                p: *p,
                offsets: window.clone(),
                table: table.iter().map(|&v| v == 1).collect(),
            }),
            _ => None,
        }
    }

    fn transition(&self) -> Option<Mat2> {
        match self {
            MeasureSpec::Markov { a, b } => Some([[1.0 - a, *a], [*b, 1.0 - b]]),
            _ => None,
        }
    }

    /// Smallest lattice dimension the spec makes sense on.
    pub fn min_dim(&self) -> usize {
        self.window().map_or(1, |w| w.dim())
    }

    /// Largest dimension supported, if limited.
    pub fn max_dim(&self) -> Option<usize> {
        matches!(self, MeasureSpec::Markov { .. }).then_some(1)
    }

    /// `μ(η₀ = 1)`.
    pub fn density(&self) -> f64 {
        match self {
            MeasureSpec::Bernoulli { rho } => *rho,
            MeasureSpec::Markov { a, b } => a / (a + b),
            _ => {
                let w = self.window().expect("block factor");
                let law = w
                    .joint_law(&[vec![0; w.dim()]])
                    .expect("single-site window fits the enumeration cap");
                law[1]
            }
        }
    }

    /// `μ(η₀; η_x) = μ(η₀ η_x) - ρ²`.
    pub fn covariance(&self, x: &[i64]) -> Result<f64> {
        if x.is_empty() {
            return Err(invalid!("offset must have at least one component"));
        }
        let zero = x.iter().all(|&c| c == 0);
        match self {
            MeasureSpec::Bernoulli { rho } => Ok(if zero { rho * (1.0 - rho) } else { 0.0 }),
            MeasureSpec::Markov { .. } => {
                if x.len() != 1 {
                    return Err(invalid!("Markov chain measures live on one dimension"));
                }
                let p = self.transition().expect("markov");
                let rho = self.density();
                let pk = mat_pow(&p, x[0].unsigned_abs());
                Ok(rho * pk[1][1] - rho * rho)
            }
            _ => {
                let w = self.window().expect("block factor");
                let rho = self.density();
                if zero {
                    return Ok(rho * (1.0 - rho));
                }
                let origin = vec![0; x.len()];
                let law = w.joint_law(&[origin, x.to_vec()])?;
                Ok(law[3] - rho * rho)
            }
        }
    }

    /// Joint law `μ(η₀ = i, η_x = j)` as `[[p00, p01], [p10, p11]]`.
    pub fn pair_law(&self, x: &[i64]) -> Result<Mat2> {
        let rho = self.density();
        let both = self.covariance(x)? + rho * rho;
        if x.iter().all(|&c| c == 0) {
            return Ok([[1.0 - rho, 0.0], [0.0, rho]]);
        }
        Ok([
            [1.0 - 2.0 * rho + both, rho - both],
            [rho - both, both],
        ])
    }

    /// Offsets carrying the correlation sums. `None` for the Markov chain,
    /// whose covariances never vanish.
    fn finite_support(&self, dim: usize) -> Result<Option<Vec<Vec<i64>>>> {
        match self {
            MeasureSpec::Bernoulli { .. } => Ok(Some(vec![vec![0; dim]])),
            MeasureSpec::Markov { .. } => Ok(None),
            _ => {
                let w = self.window().expect("block factor");
                let w = Window {
                    offsets: w.padded(dim)?,
                    ..w
                };
                Ok(Some(w.support()))
            }
        }
    }

    /// Visit `(x, f(x))` for every offset with nonzero covariance, summing the
    /// Markov tail until it drops below the relative tolerance.
    fn sum_over_support(&self, mut f: impl FnMut(&[i64]) -> Result<f64>) -> Result<f64> {
        let dim = self.min_dim();
        match self.finite_support(dim)? {
            Some(support) => support.iter().map(|x| f(x)).sum(),
            None => {
                let p = self.transition().expect("markov");
                let lambda = (1.0 - p[0][1] - p[1][0]).abs();
                let mut total = f(&[0])?;
                let mut k = 1i64;
                loop {
                    let term = f(&[k])? + f(&[-k])?;
                    total += term;
                    // Terms decay like |λ|^k; bound the remaining geometric tail.
                    let tail = term * lambda / (1.0 - lambda).max(f64::MIN_POSITIVE);
                    if tail <= SERIES_TOL * total.abs() || term == 0.0 || k > 100_000 {
                        return Ok(total);
                    }
                    k += 1;
                }
            }
        }
    }

    /// `A(μ) = Σ_x |μ(η₀; η_x)|`.
    pub fn correlation_sum_a(&self) -> f64 {
        self.sum_over_support(|x| Ok(self.covariance(x)?.abs()))
            .expect("support enumeration within caps")
    }

    /// Exact law of `η` restricted to `points` (offsets in `ℤ^d`), indexed by
    /// `Σ_i η_{points[i]} 2^i`.
    pub fn marginal(&self, points: &[Vec<i64>]) -> Result<Vec<f64>> {
        if points.len() > MAX_ENUM_BITS {
            return Err(Error::ResourceLimit(format!(
                "marginal over {} sites exceeds cap {MAX_ENUM_BITS}",
                points.len()
            )));
        }
        let n = points.len();
        match self {
            MeasureSpec::Bernoulli { rho } => Ok((0..1usize << n)
                .map(|c| {
                    let ones = c.count_ones() as i32;
                    rho.powi(ones) * (1.0 - rho).powi(n as i32 - ones)
                })
                .collect()),
            MeasureSpec::Markov { .. } => {
                if points.iter().any(|p| p.len() != 1) {
                    return Err(invalid!("Markov chain marginals need 1-d points"));
                }
                let mut order: Vec<usize> = (0..n).collect();
                order.sort_by_key(|&i| points[i][0]);
                if order.windows(2).any(|w| points[w[0]][0] == points[w[1]][0]) {
                    return Err(invalid!("marginal points must be distinct"));
                }
                let p = self.transition().expect("markov");
                let rho = self.density();
                let mut law = vec![0.0; 1 << n];
                for (c, slot) in law.iter_mut().enumerate() {
                    let bit = |i: usize| (c >> i) & 1;
                    let first = order[0];
                    let mut w = if bit(first) == 1 { rho } else { 1.0 - rho };
                    for pair in order.windows(2) {
                        let gap = (points[pair[1]][0] - points[pair[0]][0]) as u64;
                        w *= mat_pow(&p, gap)[bit(pair[0])][bit(pair[1])];
                    }
                    *slot = w;
                }
                Ok(law)
            }
            _ => self.window().expect("block factor").joint_law(points),
        }
    }

    /// Exact law of the torus sampler on all sites of `lattice`, indexed by
    /// `Σ_x η_x 2^x`. Limited to 20 sites.
    pub fn torus_law(&self, lattice: &TorusLattice) -> Result<Vec<f64>> {
        self.check_lattice(lattice)?;
        let n = lattice.num_sites();
        if n > 20 {
            return Err(Error::ResourceLimit(format!(
                "torus law over {n} sites exceeds 2^20 states"
            )));
        }
        match self {
            MeasureSpec::Bernoulli { .. } => {
                let points: Vec<Vec<i64>> = (0..n)
                    .map(|x| lattice.coords(x).iter().map(|&c| c as i64).collect())
                    .collect();
                self.marginal(&points)
            }
            MeasureSpec::Markov { .. } => {
                let p = self.transition().expect("markov");
                let trace = {
                    let m = mat_pow(&p, n as u64);
                    m[0][0] + m[1][1]
                };
                Ok((0..1usize << n)
                    .map(|c| {
                        (0..n)
                            .map(|x| p[(c >> x) & 1][(c >> ((x + 1) % n)) & 1])
                            .product::<f64>()
                            / trace
                    })
                    .collect())
            }
            _ => {
                let w = self.window().expect("block factor");
                let offsets = w.padded(lattice.dim())?;
                let neighbourhoods = window_sites(lattice, &offsets)?;
                let mut law = vec![0.0; 1 << n];
                for bits in 0u64..(1u64 << n) {
                    let weight = w.weight(bits, n);
                    let eta = (0..n).fold(0usize, |acc, x| {
                        let key = neighbourhoods[x]
                            .iter()
                            .enumerate()
                            .fold(0usize, |k, (i, &z)| k | ((((bits >> z) & 1) as usize) << i));
                        acc | ((w.table[key] as usize) << x)
                    });
                    law[eta] += weight;
                }
                Ok(law)
            }
        }
    }

    fn check_lattice(&self, lattice: &TorusLattice) -> Result<()> {
        if lattice.dim() < self.min_dim() {
            return Err(invalid!(
                "measure needs dimension at least {}, lattice has {}",
                self.min_dim(),
                lattice.dim()
            ));
        }
        if let Some(max) = self.max_dim() {
            if lattice.dim() > max {
                return Err(invalid!(
                    "Markov chain measures are one-dimensional; lattice has dimension {}",
                    lattice.dim()
                ));
            }
        }
        Ok(())
    }

    /// Draw one configuration using `rng`.
    pub fn sample_with(&self, lattice: &TorusLattice, rng: &mut SimRng) -> Result<OccupancyConfig> {
        self.check_lattice(lattice)?;
        let n = lattice.num_sites();
        let values = match self {
            MeasureSpec::Bernoulli { rho } => bernoulli_field(n, *rho, rng),
            MeasureSpec::Markov { .. } => self.sample_cyclic_chain(n, rng),
            _ => {
                let w = self.window().expect("block factor");
                let offsets = w.padded(lattice.dim())?;
                let neighbourhoods = window_sites(lattice, &offsets)?;
                let u = bernoulli_field(n, w.p, rng);
                neighbourhoods
                    .iter()
                    .map(|sites| {
                        let key = sites
                            .iter()
                            .enumerate()
                            .fold(0usize, |k, (i, &z)| k | ((u[z] as usize) << i));
                        w.table[key]
                    })
                    .collect()
            }
        };
        Config::new(*lattice, values)
    }

    /// Cyclic chain on `n` sites: draw `η₀` from `diag(P^n)/tr(P^n)`, then each
    /// next site from `P(i, j) P^{n-k-1}(j, η₀) / P^{n-k}(i, η₀)`.
    fn sample_cyclic_chain(&self, n: usize, rng: &mut SimRng) -> Vec<bool> {
        let p = self.transition().expect("markov");
        let mut powers = Vec::with_capacity(n + 1);
        powers.push([[1.0, 0.0], [0.0, 1.0]]);
        for k in 1..=n {
            let prev = powers[k - 1];
            powers.push(mat_mul(&prev, &p));
        }
        let full = powers[n];
        let first = usize::from(rng.random::<f64>() * (full[0][0] + full[1][1]) >= full[0][0]);
        let mut out = Vec::with_capacity(n);
        out.push(first == 1);
        let mut cur = first;
        for k in 0..n - 1 {
            let rest = &powers[n - k - 1];
            let w0 = p[cur][0] * rest[0][first];
            let w1 = p[cur][1] * rest[1][first];
            cur = usize::from(rng.random::<f64>() * (w0 + w1) >= w0);
            out.push(cur == 1);
        }
        out
    }
}

fn bernoulli_field(n: usize, p: f64, rng: &mut SimRng) -> Vec<bool> {
    (0..n).map(|_| rng.random::<f64>() < p).collect()
}

fn window_sites(lattice: &TorusLattice, offsets: &[Vec<i64>]) -> Result<Vec<Vec<usize>>> {
    (0..lattice.num_sites())
        .map(|x| offsets.iter().map(|o| lattice.translate(x, o)).collect())
        .collect()
}

/// One exact sample, deterministic in `seed`.
pub fn sample(spec: &MeasureSpec, lattice: &TorusLattice, seed: u64) -> Result<OccupancyConfig> {
    spec.validate()?;
    spec.sample_with(lattice, &mut rng_from_seed(seed))
}

/// Law `℘` of `η - η̃` with `η ~ μ` and `η̃ ~ π_ρ` independent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffLawSpec {
    mu: MeasureSpec,
    rho: f64,
}

/// Tolerance on `|density(μ) - ρ|`.
pub const DENSITY_MATCH_TOL: f64 = 1e-12;

impl DiffLawSpec {
    pub fn new(mu: MeasureSpec, rho: f64) -> Result<Self> {
        mu.validate()?;
        check_prob("rho", rho)?;
        let density = mu.density();
        if (density - rho).abs() > DENSITY_MATCH_TOL {
            return Err(invalid!(
                "measure density {density} does not match rho = {rho}; \
                 the difference law would not be charge symmetric"
            ));
        }
        Ok(DiffLawSpec { mu, rho })
    }

    /// `℘` for `μ` against `π_{density(μ)}`.
    pub fn matched(mu: MeasureSpec) -> Result<Self> {
        mu.validate()?;
        let rho = mu.density();
        DiffLawSpec::new(mu, rho)
    }

    pub fn mu(&self) -> &MeasureSpec {
        &self.mu
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// `℘(ξ₀ = +1) = ℘(ξ₀ = -1) = ρ(1-ρ)`.
    pub fn sigma(&self) -> f64 {
        self.rho * (1.0 - self.rho)
    }

    pub fn sample_with(
        &self,
        lattice: &TorusLattice,
        eta_rng: &mut SimRng,
        reference_rng: &mut SimRng,
    ) -> Result<SignedConfig> {
        let eta = self.mu.sample_with(lattice, eta_rng)?;
        let reference = MeasureSpec::bernoulli(self.rho).sample_with(lattice, reference_rng)?;
        eta.difference(&reference)
    }

    /// `℘(ξ₀ = α; ξ_x = β)` for `α, β ∈ {-1, +1}`, via the pair law of `μ`
    /// and independence of the reference field.
    pub fn signed_covariance(&self, x: &[i64], alpha: Charge, beta: Charge) -> Result<f64> {
        let occ = |c: Charge| -> usize {
            match c {
                Charge::Plus => 1,
                Charge::Minus => 0,
                Charge::Zero => unreachable!("signed covariance is over ±1"),
            }
        };
        if alpha == Charge::Zero || beta == Charge::Zero {
            return Err(invalid!("signed covariance takes α, β ∈ {{-1, +1}}"));
        }
        let rho = self.rho;
        let pi = |bit: usize| if bit == 1 { rho } else { 1.0 - rho };
        let mu1 = self.mu.density();
        let mu = |bit: usize| if bit == 1 { mu1 } else { 1.0 - mu1 };
        // ξ = α needs η = (1+α)/2 and η̃ = (1-α)/2.
        let (a, b) = (occ(alpha), occ(beta));
        let single_a = mu(a) * pi(1 - a);
        let single_b = mu(b) * pi(1 - b);
        let zero = x.iter().all(|&c| c == 0);
        let joint = if zero {
            if a == b {
                single_a
            } else {
                0.0
            }
        } else {
            self.mu.pair_law(x)?[a][b] * pi(1 - a) * pi(1 - b)
        };
        Ok(joint - single_a * single_b)
    }

    /// `B(℘) = Σ_x Σ_{α,β} |℘(ξ₀ = α; ξ_x = β)|`.
    pub fn correlation_sum_b(&self) -> f64 {
        let pm = [Charge::Minus, Charge::Plus];
        self.mu
            .sum_over_support(|x| {
                let mut s = 0.0;
                for a in pm {
                    for b in pm {
                        s += self.signed_covariance(x, a, b)?.abs();
                    }
                }
                Ok(s)
            })
            .expect("support enumeration within caps")
    }
}

/// `η - η̃` with independent streams derived from `seed`.
pub fn sample_diff(spec: &DiffLawSpec, lattice: &TorusLattice, seed: u64) -> Result<SignedConfig> {
    spec.sample_with(
        lattice,
        &mut replica_rng(seed, 0, Purpose::Initial),
        &mut replica_rng(seed, 0, Purpose::Reference),
    )
}

/// `correlation_sum_a` as a free function.
pub fn correlation_sum_a(spec: &MeasureSpec) -> f64 {
    spec.correlation_sum_a()
}

/// `correlation_sum_b` as a free function.
pub fn correlation_sum_b(spec: &DiffLawSpec) -> f64 {
    spec.correlation_sum_b()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ring(l: usize) -> TorusLattice {
        TorusLattice::new(1, l).unwrap()
    }

    #[test]
    fn bernoulli_extremes() {
        let lat = TorusLattice::new(2, 6).unwrap();
        assert!(sample(&MeasureSpec::bernoulli(1.0), &lat, 3).unwrap().values().iter().all(|&v| v));
        assert!(sample(&MeasureSpec::bernoulli(0.0), &lat, 3).unwrap().values().iter().all(|&v| !v));
    }

    #[test]
    fn densities() {
        assert_eq!(MeasureSpec::bernoulli(0.3).density(), 0.3);
        // XOR of two Bernoulli(p): 2p(1-p).
        for p in [0.5, 0.2, 0.9] {
            let d = MeasureSpec::block_xor(p, 1).density();
            assert!((d - 2.0 * p * (1.0 - p)).abs() < 1e-15);
        }
        let (a, b) = (0.3, 0.1);
        assert!((MeasureSpec::markov(a, b).density() - a / (a + b)).abs() < 1e-15);
    }

    #[test]
    fn bernoulli_covariances() {
        let m = MeasureSpec::bernoulli(0.3);
        assert!((m.covariance(&[0]).unwrap() - 0.21).abs() < 1e-15);
        assert_eq!(m.covariance(&[2, 1]).unwrap(), 0.0);
        assert!((m.correlation_sum_a() - 0.21).abs() < 1e-15);
        assert_eq!(MeasureSpec::bernoulli(0.5).correlation_sum_a(), 0.25);
    }

    /// Brute force over the driving bits U_0, U_1, U_2 (and more when unused).
    fn xor_cov_brute(p: f64, x: i64) -> f64 {
        // η_0 = U_0 ^ U_1, η_x = U_x ^ U_{x+1}; enumerate 8 bits U_{-3..=4}.
        let mut joint = 0.0;
        let mut dens = 0.0;
        for bits in 0u32..256 {
            let u = |k: i64| (bits >> (k + 3)) & 1;
            let ones = bits.count_ones() as i32;
            let w = p.powi(ones) * (1.0 - p).powi(8 - ones);
            let e0 = u(0) ^ u(1);
            let ex = u(x) ^ u(x + 1);
            dens += w * e0 as f64;
            joint += w * (e0 & ex) as f64;
        }
        joint - dens * dens
    }

    #[test]
    fn xor_covariance_matches_enumeration() {
        for p in [0.5, 0.3] {
            let m = MeasureSpec::block_xor(p, 1);
            for x in -3..=3 {
                let got = m.covariance(&[x]).unwrap();
                assert!((got - xor_cov_brute(p, x)).abs() < 1e-14, "p={p} x={x}");
            }
        }
    }

    #[test]
    fn markov_covariance_matches_closed_form() {
        let (a, b) = (0.3, 0.2);
        let m = MeasureSpec::markov(a, b);
        let rho = a / (a + b);
        let lambda: f64 = 1.0 - a - b;
        for x in -6i64..=6 {
            let want = rho * (1.0 - rho) * lambda.powi(x.abs() as i32);
            assert!((m.covariance(&[x]).unwrap() - want).abs() < 1e-15);
        }
        let want_a = rho * (1.0 - rho) * (1.0 + lambda.abs()) / (1.0 - lambda.abs());
        assert!((m.correlation_sum_a() - want_a).abs() < 1e-12 * want_a);
        // Negative λ: covariances alternate in sign, A uses |λ|.
        let m = MeasureSpec::markov(0.7, 0.6);
        let rho = 0.7 / 1.3;
        let l: f64 = (1.0f64 - 1.3).abs();
        let want_a = rho * (1.0 - rho) * (1.0 + l) / (1.0 - l);
        assert!((m.correlation_sum_a() - want_a).abs() < 1e-12 * want_a);
    }

    #[test]
    fn b_for_bernoulli() {
        for rho in [0.5, 0.3, 0.0, 1.0] {
            let d = DiffLawSpec::matched(MeasureSpec::bernoulli(rho)).unwrap();
            assert!((d.correlation_sum_b() - 2.0 * rho * (1.0 - rho)).abs() < 1e-15);
        }
        let d = DiffLawSpec::matched(MeasureSpec::bernoulli(0.5)).unwrap();
        assert_eq!(d.correlation_sum_b(), 0.5);
    }

    #[test]
    fn b_exceeds_a_by_single_site_variance() {
        // B(℘) = A(μ) + ρ(1-ρ): the x = 0 term of B is 2ρ(1-ρ), the x ≠ 0
        // terms reproduce |μ(η₀; η_x)| because the reference marginals sum to 1.
        for mu in [
            MeasureSpec::bernoulli(0.3),
            MeasureSpec::block_xor(0.5, 1),
            MeasureSpec::block_xor(0.2, 2),
            MeasureSpec::markov(0.3, 0.2),
            MeasureSpec::markov(0.7, 0.6),
        ] {
            let d = DiffLawSpec::matched(mu.clone()).unwrap();
            let a = mu.correlation_sum_a();
            let b = d.correlation_sum_b();
            assert!((b - a - d.sigma()).abs() < 1e-12, "{mu:?}: A={a} B={b}");
            assert!(b <= 2.0 * a + 1e-15);
        }
    }

    #[test]
    fn diff_spec_rejects_mismatch() {
        assert!(DiffLawSpec::new(MeasureSpec::bernoulli(0.4), 0.5).is_err());
        assert!(DiffLawSpec::new(MeasureSpec::block_xor(0.5, 1), 0.5).is_ok());
        assert!(DiffLawSpec::new(MeasureSpec::block_xor(0.3, 1), 0.5).is_err());
    }

    #[test]
    fn markov_needs_one_dimension() {
        let lat = TorusLattice::new(2, 4).unwrap();
        assert!(sample(&MeasureSpec::markov(0.3, 0.2), &lat, 1).is_err());
    }

    #[test]
    fn sample_diff_extremes_and_determinism() {
        let lat = ring(50);
        let d = DiffLawSpec::matched(MeasureSpec::bernoulli(1.0)).unwrap();
        assert_eq!(sample_diff(&d, &lat, 9).unwrap().abs_sum(), 0);
        let d = DiffLawSpec::matched(MeasureSpec::bernoulli(0.5)).unwrap();
        assert_eq!(sample_diff(&d, &lat, 9).unwrap(), sample_diff(&d, &lat, 9).unwrap());
        assert_ne!(sample_diff(&d, &lat, 9).unwrap(), sample_diff(&d, &lat, 10).unwrap());
    }

    #[test]
    fn torus_laws_are_normalized_and_invariant() {
        let lat = ring(6);
        for mu in [
            MeasureSpec::bernoulli(0.3),
            MeasureSpec::block_xor(0.3, 1),
            MeasureSpec::markov(0.3, 0.2),
        ] {
            let law = mu.torus_law(&lat).unwrap();
            assert!((law.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            // shift by one site leaves the law unchanged
            for (c, &p) in law.iter().enumerate() {
                let shifted = ((c << 1) | (c >> 5)) & 0b111111;
                assert!((law[shifted] - p).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn markov_marginal_matches_pair_law() {
        let m = MeasureSpec::markov(0.3, 0.2);
        let law = m.marginal(&[vec![0], vec![3]]).unwrap();
        let pair = m.pair_law(&[3]).unwrap();
        assert!((law[3] - pair[1][1]).abs() < 1e-15);
        assert!((law[1] - pair[1][0]).abs() < 1e-15);
    }

    #[test]
    fn config_file_shape() {
        let m: MeasureSpec = serde_json::from_str(r#"{"kind":"bernoulli","rho":0.5}"#).unwrap();
        assert_eq!(m, MeasureSpec::bernoulli(0.5));
        let m: MeasureSpec =
            serde_json::from_str(r#"{"kind":"block_xor","p":0.5,"range":1}"#).unwrap();
        assert_eq!(m, MeasureSpec::block_xor(0.5, 1));
        assert!(serde_json::from_str::<MeasureSpec>(r#"{"kind":"bernoulli","rho":0.5,"x":1}"#).is_err());
    }
}
