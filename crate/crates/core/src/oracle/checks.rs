//! Named exact checks with JSON-ready reports.

use serde::Serialize;

use super::{
    build_generator, build_generator_with, coupled_to_difference, diff_torus_law, evolve_exact,
    expected_abs_at_origin, exact_wasserstein, two_particle_exclusion, Distribution,
    GeneratorRates,
};
use crate::dynamics::Process;
use crate::ensembles::{DiffLawSpec, MeasureSpec};
use crate::error::{invalid, Error, Result};
use crate::lattice::{Site, TorusLattice};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub check: String,
    /// `None` for checks on infinite-volume marginals.
    pub lattice: Option<TorusLattice>,
    pub t: f64,
    pub statistic: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl OracleReport {
    /// Passing iff `statistic ≤ tolerance`.
    pub fn upper(check: &str, lattice: Option<TorusLattice>, t: f64, statistic: f64, tolerance: f64) -> Self {
        OracleReport {
            check: check.to_string(),
            lattice,
            t,
            statistic,
            tolerance,
            pass: statistic <= tolerance,
        }
    }
}

/// Max TV distance over all `(η₀, ζ₀)` between the difference of the coupled
/// process and the annihilation process started from `η₀ - ζ₀`, one report
/// per time.
pub fn lemma21_check(
    lattice: &TorusLattice,
    times: &[f64],
    rates: GeneratorRates,
    tolerance: f64,
) -> Result<Vec<OracleReport>> {
    let n = lattice.num_sites();
    if n > 8 {
        return Err(Error::ResourceLimit(format!("{n} sites for the coupled oracle")));
    }
    let coupled = build_generator(Process::Coupled, lattice)?;
    let annihilation = build_generator_with(Process::Annihilation, lattice, rates)?;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        let mut worst = 0.0f64;
        for eta in 0usize..1 << n {
            for zeta in 0usize..1 << n {
                let (mut c, mut a) = (0usize, 0usize);
                for x in (0..n).rev() {
                    let (e, z) = (eta >> x & 1, zeta >> x & 1);
                    c = c * 4 + e + 2 * z;
                    a = a * 3 + match (e, z) {
                        (1, 0) => 2,
                        (0, 1) => 1,
                        _ => 0,
                    };
                }
                let pc = evolve_exact(&coupled, &Distribution::point_mass(coupled.num_states(), c)?, t)?;
                let pa = evolve_exact(
                    &annihilation,
                    &Distribution::point_mass(annihilation.num_states(), a)?,
                    t,
                )?;
                worst = worst.max(coupled_to_difference(lattice, &pc)?.total_variation(&pa)?);
            }
        }
        out.push(OracleReport::upper("lemma_2_1_projection", Some(*lattice), t, worst, tolerance));
    }
    Ok(out)
}

/// `(μ_L P_t)(η_x = 1, η_y = 1)` and `Σ_{u≠v} P_{(x,y)}[(X_t, Y_t) = (u,v)] μ_L(η_u = η_v = 1)`,
/// with `μ_L` the torus version of `μ`.
pub fn duality_sides(
    mu: &MeasureSpec,
    lattice: &TorusLattice,
    (x, y): (Site, Site),
    t: f64,
) -> Result<(f64, f64)> {
    let n = lattice.num_sites();
    if x == y {
        return Err(invalid!("duality needs two distinct sites, got {x} twice"));
    }
    if x >= n || y >= n {
        return Err(Error::OutOfRange(format!("sites ({x}, {y}) on {n} sites")));
    }
    if n > 12 {
        return Err(Error::ResourceLimit(format!("{n} sites for the exact duality check")));
    }
    let law = mu.torus_law(lattice)?;
    let both = |u: Site, v: Site| -> f64 {
        law.iter()
            .enumerate()
            .filter(|(s, _)| s >> u & 1 == 1 && s >> v & 1 == 1)
            .map(|(_, p)| p)
            .sum()
    };
    let sep = build_generator(Process::Sep, lattice)?;
    let evolved = evolve_exact(&sep, &Distribution::new(law.clone())?, t)?;
    let lhs = evolved.expect(|s| (s >> x & 1 == 1 && s >> y & 1 == 1) as u8 as f64);
    let pair = two_particle_exclusion(lattice, (x, y), t)?;
    let mut rhs = 0.0;
    for u in 0..n {
        for v in (0..n).filter(|&v| v != u) {
            let p = pair.get(u, v);
            if p != 0.0 {
                rhs += p * both(u, v);
            }
        }
    }
    Ok((lhs, rhs))
}

pub fn duality_exact(mu: &MeasureSpec, lattice: &TorusLattice, xy: (Site, Site), t: f64) -> Result<f64> {
    let (lhs, rhs) = duality_sides(mu, lattice, xy, t)?;
    Ok((lhs - rhs).abs())
}

/// `E|ξ₀(t)|` under the exact annihilation dynamics from the torus law of `℘`.
pub fn annihilation_abs_series(diff: &DiffLawSpec, lattice: &TorusLattice, times: &[f64]) -> Result<Vec<f64>> {
    let gen = build_generator(Process::Annihilation, lattice)?;
    let d0 = diff_torus_law(diff, lattice)?;
    times
        .iter()
        .map(|&t| Ok(expected_abs_at_origin(&evolve_exact(&gen, &d0, t)?)))
        .collect()
}

/// Largest drop `W_{Λ₁} + W_{Λ₂∖Λ₁} - W_{Λ₂}` over the given nested pairs of
/// point sets, for the exact infinite-volume marginals of `mu` and `nu`.
/// Super-additivity asks for this to be `≤ 0`.
pub fn superadditivity_defect(
    mu: &MeasureSpec,
    nu: &MeasureSpec,
    nested: &[(Vec<Vec<i64>>, Vec<Vec<i64>>)],
) -> Result<f64> {
    let w = |pts: &[Vec<i64>]| -> Result<f64> {
        if pts.is_empty() {
            return Ok(0.0);
        }
        exact_wasserstein(&mu.marginal(pts)?, &nu.marginal(pts)?)
    };
    let mut worst = f64::NEG_INFINITY;
    for (inner, outer) in nested {
        if !inner.iter().all(|p| outer.contains(p)) {
            return Err(invalid!("inner box is not contained in the outer box"));
        }
        let rest: Vec<Vec<i64>> = outer.iter().filter(|p| !inner.contains(p)).cloned().collect();
        worst = worst.max(w(inner)? + w(&rest)? - w(outer)?);
    }
    Ok(worst)
}

/// Sites of the box `[0, sides[0]) × … ` as coordinate vectors.
pub fn box_points(sides: &[usize]) -> Vec<Vec<i64>> {
    let mut out = vec![vec![]];
    for &s in sides {
        out = out
            .into_iter()
            .flat_map(|p: Vec<i64>| {
                (0..s as i64).map(move |c| {
                    let mut q = p.clone();
                    q.push(c);
                    q
                })
            })
            .collect();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cycle3() -> TorusLattice {
        TorusLattice::new(1, 3).unwrap()
    }

    #[test]
    fn lemma21_holds_and_detects_wrong_rate() {
        let good = lemma21_check(&cycle3(), &[0.1, 1.0], GeneratorRates::default(), 1e-9).unwrap();
        assert!(good.iter().all(|r| r.pass), "{good:?}");
        let bad = lemma21_check(&cycle3(), &[1.0], GeneratorRates { annihilation: 1.0 }, 1e-9).unwrap();
        assert!(!bad[0].pass);
        assert!(bad[0].statistic > 1e-3);
    }

    #[test]
    fn duality_examples() {
        let lat = TorusLattice::new(1, 4).unwrap();
        let mk = MeasureSpec::markov(0.3, 0.6);
        assert!(duality_exact(&mk, &lat, (0, 1), 0.0).unwrap() < 1e-14);
        assert!(duality_exact(&mk, &lat, (0, 2), 1.0).unwrap() < 1e-8);
        let (l, r) = duality_sides(&MeasureSpec::bernoulli(0.3), &lat, (1, 2), 2.0).unwrap();
        assert!((l - 0.09).abs() < 1e-10 && (r - 0.09).abs() < 1e-10);
        assert!(duality_exact(&mk, &lat, (1, 1), 1.0).is_err());
    }

    #[test]
    fn abs_density_decreases_on_three_cycle() {
        let diff = DiffLawSpec::matched(MeasureSpec::markov(0.2, 0.3)).unwrap();
        let times: Vec<f64> = (0..12).map(|k| 0.25 * k as f64).collect();
        let s = annihilation_abs_series(&diff, &cycle3(), &times).unwrap();
        assert!(s[0] > 0.0 && s[11] < s[0]);
        for w in s.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn boxes() {
        assert_eq!(box_points(&[2, 1]), vec![vec![0, 0], vec![1, 0]]);
        assert_eq!(box_points(&[3]).len(), 3);
    }

    #[test]
    fn superadditive_for_product_measures_is_additive() {
        let a = MeasureSpec::bernoulli(0.2);
        let b = MeasureSpec::bernoulli(0.6);
        let nested = vec![(box_points(&[2]), box_points(&[5]))];
        let d = superadditivity_defect(&a, &b, &nested).unwrap();
        assert!(d.abs() < 1e-12);
    }
}
