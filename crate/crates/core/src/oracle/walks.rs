//! Single walkers and pairs of stirring markers.

use serde::Serialize;

use super::{evolve_exact, generator_from_rows, Distribution, GeneratorMatrix};
use crate::error::{invalid, Error, Result};
use crate::lattice::{Site, TorusLattice};

const MAX_WALK_SITES: usize = 1024;
/// Subset enumeration for [`liggett_subset_check`] stops here.
const MAX_SUBSET_SITES: usize = 12;

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(invalid!("time must be finite and nonnegative, got {t}"));
    }
    Ok(())
}

fn check_sites(lattice: &TorusLattice) -> Result<usize> {
    let n = lattice.num_sites();
    if n > MAX_WALK_SITES {
        return Err(Error::ResourceLimit(format!("{n} sites in an exact walk computation")));
    }
    Ok(n)
}

/// Transition matrix of the continuous-time symmetric walk that crosses each
/// edge at `rate` (`rate = 1` gives `p_t`, `rate = 2` gives `q_t`).
pub fn rw_transition(lattice: &TorusLattice, t: f64, rate: f64) -> Result<Vec<Vec<f64>>> {
    check_time(t)?;
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(invalid!("walk rate must be positive"));
    }
    let n = check_sites(lattice)?;
    let rows = (0..n)
        .map(|x| lattice.neighbors(x).map(|y| (y, rate)).collect())
        .collect();
    let gen = generator_from_rows(*lattice, rows);
    (0..n)
        .map(|x| Ok(evolve_exact(&gen, &Distribution::point_mass(n, x)?, t)?.probs().to_vec()))
        .collect()
}

/// Joint law of two markers on ordered site pairs, `probs[u * N + v]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairLaw {
    sites: usize,
    probs: Vec<f64>,
}

impl PairLaw {
    pub fn get(&self, u: Site, v: Site) -> f64 {
        self.probs[u * self.sites + v]
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

fn pair_generator(lattice: &TorusLattice, same_channel: bool) -> Result<GeneratorMatrix> {
    let n = check_sites(lattice)?;
    let swap = |z: Site, a: Site, b: Site| {
        if z == a {
            b
        } else if z == b {
            a
        } else {
            z
        }
    };
    let edges: Vec<(Site, Site)> = lattice.edges().map(|e| (e.a, e.b)).collect();
    let mut rows = Vec::with_capacity(n * n);
    for u in 0..n {
        for v in 0..n {
            let mut row = Vec::new();
            if same_channel && u == v {
                rows.push(row);
                continue;
            }
            for &(a, b) in &edges {
                if same_channel {
                    // one arrow moves both markers
                    let (u2, v2) = (swap(u, a, b), swap(v, a, b));
                    if (u2, v2) != (u, v) {
                        row.push((u2 * n + v2, 1.0));
                    }
                } else {
                    let u2 = swap(u, a, b);
                    if u2 != u {
                        row.push((u2 * n + v, 1.0));
                    }
                    let v2 = swap(v, a, b);
                    if v2 != v {
                        row.push((u * n + v2, 1.0));
                    }
                }
            }
            rows.push(row);
        }
    }
    Ok(generator_from_rows(*lattice, rows))
}

fn evolve_pair(gen: &GeneratorMatrix, n: usize, x: Site, y: Site, t: f64) -> Result<PairLaw> {
    let d0 = Distribution::point_mass(n * n, x * n + y)?;
    Ok(PairLaw {
        sites: n,
        probs: evolve_exact(gen, &d0, t)?.probs().to_vec(),
    })
}

/// Law at time `t` of two stirring markers started at `(x, y)`, driven by the
/// same channel (`same_channel`) or by two independent channels.
pub fn stirring_pair_law(
    lattice: &TorusLattice,
    (x, y): (Site, Site),
    t: f64,
    same_channel: bool,
) -> Result<PairLaw> {
    check_time(t)?;
    let n = lattice.num_sites();
    if x >= n || y >= n {
        return Err(Error::OutOfRange(format!("start ({x}, {y}) on {n} sites")));
    }
    if same_channel && x == y {
        return Err(invalid!("two exclusion particles cannot share site {x}"));
    }
    evolve_pair(&pair_generator(lattice, same_channel)?, n, x, y, t)
}

/// Two particles in exclusion from `(x, y)`: each jumps at rate 1 to empty
/// neighbours, and the arrow on a shared edge exchanges them.
pub fn two_particle_exclusion(lattice: &TorusLattice, xy: (Site, Site), t: f64) -> Result<PairLaw> {
    stirring_pair_law(lattice, xy, t, true)
}

#[derive(Debug, Clone, Serialize)]
pub struct LiggettReport {
    /// Largest signed statistic over all sampled entries.
    pub max_violation: f64,
    pub time: f64,
    pub start: (Site, Site),
    /// Target pair, or the bitmask of the target set for the subset form.
    pub target: (Site, Site),
}

impl LiggettReport {
    fn empty() -> Self {
        LiggettReport {
            max_violation: f64::NEG_INFINITY,
            time: 0.0,
            start: (0, 0),
            target: (0, 0),
        }
    }

    fn offer(&mut self, value: f64, time: f64, start: (Site, Site), target: (Site, Site)) {
        if value > self.max_violation {
            *self = LiggettReport {
                max_violation: value,
                time,
                start,
                target,
            };
        }
    }
}

/// `max p_t^{αα}(x',y',x,y) - p_t(x',x) p_t(y',y)` over distinct starts, all
/// targets and the sampled times. The pointwise inequality asks for `≤ 0`.
pub fn liggett_check(lattice: &TorusLattice, times: &[f64]) -> Result<LiggettReport> {
    let n = lattice.num_sites();
    let gen = pair_generator(lattice, true)?;
    let mut report = LiggettReport::empty();
    for &t in times {
        check_time(t)?;
        let p = rw_transition(lattice, t, 1.0)?;
        for x0 in 0..n {
            for y0 in (0..n).filter(|&y0| y0 != x0) {
                let joint = evolve_pair(&gen, n, x0, y0, t)?;
                for x in 0..n {
                    for y in 0..n {
                        let v = joint.get(x, y) - p[x0][x] * p[y0][y];
                        report.offer(v, t, (x0, y0), (x, y));
                    }
                }
            }
        }
    }
    Ok(report)
}

/// Set form of the correlation inequality for stirring markers:
/// `max P(X_t ∈ B, Y_t ∈ B) - P(X_t ∈ B) P(Y_t ∈ B)` over distinct starts
/// and every `B` with at least two sites. `target.0` holds the bitmask of `B`.
pub fn liggett_subset_check(lattice: &TorusLattice, times: &[f64]) -> Result<LiggettReport> {
    let n = lattice.num_sites();
    if n > MAX_SUBSET_SITES {
        return Err(Error::ResourceLimit(format!("2^{n} target sets")));
    }
    let gen = pair_generator(lattice, true)?;
    let mut report = LiggettReport::empty();
    for &t in times {
        check_time(t)?;
        let p = rw_transition(lattice, t, 1.0)?;
        for x0 in 0..n {
            for y0 in (0..n).filter(|&y0| y0 != x0) {
                let joint = evolve_pair(&gen, n, x0, y0, t)?;
                for mask in 0usize..1 << n {
                    if mask.count_ones() < 2 {
                        continue;
                    }
                    let members: Vec<Site> = (0..n).filter(|&z| mask >> z & 1 == 1).collect();
                    let both: f64 = members
                        .iter()
                        .flat_map(|&x| members.iter().map(move |&y| (x, y)))
                        .map(|(x, y)| joint.get(x, y))
                        .sum();
                    let px: f64 = members.iter().map(|&x| p[x0][x]).sum();
                    let py: f64 = members.iter().map(|&y| p[y0][y]).sum();
                    report.offer(both - px * py, t, (x0, y0), (mask, members.len()));
                }
            }
        }
    }
    Ok(report)
}

/// `max |p_t^{αβ}(x',y',x,y) - p_t(x',x) p_t(y',y)|` for markers of two
/// independent channels.
pub fn cross_channel_check(lattice: &TorusLattice, times: &[f64]) -> Result<f64> {
    let n = lattice.num_sites();
    let gen = pair_generator(lattice, false)?;
    let mut worst = 0.0f64;
    for &t in times {
        check_time(t)?;
        let p = rw_transition(lattice, t, 1.0)?;
        for x0 in 0..n {
            for y0 in 0..n {
                let joint = evolve_pair(&gen, n, x0, y0, t)?;
                for x in 0..n {
                    for y in 0..n {
                        worst = worst.max((joint.get(x, y) - p[x0][x] * p[y0][y]).abs());
                    }
                }
            }
        }
    }
    Ok(worst)
}
