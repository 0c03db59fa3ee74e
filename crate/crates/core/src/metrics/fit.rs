//! Log-log regression of a decay series.

use serde::Serialize;

use super::EstimateSeries;
use crate::error::{invalid, Result};

/// Normal quantile used for the reported half-width.
pub const FIT_Z: f64 = 1.96;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayFit {
    pub slope: f64,
    /// `FIT_Z` times the delta-method standard error of the slope.
    pub half_width: f64,
    pub intercept: f64,
    pub points: usize,
    /// Times inside the window dropped for a nonpositive estimate.
    pub dropped: Vec<f64>,
    pub method: &'static str,
}

/// OLS of `log estimate` on `log t` over `window = (t_lo, t_hi)`, inclusive.
///
/// With weights `w_i = (x_i - x̄)/S_xx` the slope is `Σ w_i y_i`, and
/// `Var(log ê) ≈ (se/ê)²` gives `se(slope)² = Σ w_i² (se_i/ê_i)²`.
pub fn fit_decay_exponent(series: &EstimateSeries, window: (f64, f64)) -> Result<DecayFit> {
    let (lo, hi) = window;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut rel = Vec::new();
    let mut dropped = Vec::new();
    for i in 0..series.len() {
        let t = series.times[i];
        if t < lo || t > hi || t <= 0.0 {
            continue;
        }
        let e = series.estimate[i];
        if e <= 0.0 {
            dropped.push(t);
            continue;
        }
        xs.push(t.ln());
        ys.push(e.ln());
        rel.push(series.stderr[i] / e);
    }
    if xs.len() < 4 {
        return Err(invalid!(
            "decay fit needs at least 4 positive points in [{lo}, {hi}], found {}",
            xs.len()
        ));
    }
    let n = xs.len() as f64;
    let xbar = xs.iter().sum::<f64>() / n;
    let ybar = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xbar).powi(2)).sum();
    let weights: Vec<f64> = xs.iter().map(|x| (x - xbar) / sxx).collect();
    let slope: f64 = weights.iter().zip(&ys).map(|(w, y)| w * y).sum();
    let var: f64 = weights.iter().zip(&rel).map(|(w, r)| (w * r).powi(2)).sum();
    Ok(DecayFit {
        slope,
        half_width: FIT_Z * var.sqrt(),
        intercept: ybar - slope * xbar,
        points: xs.len(),
        dropped,
        method: "ols on (ln t, ln estimate); half-width 1.96 x delta-method stderr",
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::{DiffLawSpec, MeasureSpec};
    use crate::lattice::TorusLattice;
    use crate::metrics::{theoretical_exponent, Engine};
    use std::collections::BTreeMap;

    fn synthetic(times: &[f64], f: impl Fn(f64) -> f64) -> EstimateSeries {
        EstimateSeries {
            times: times.to_vec(),
            estimate: times.iter().map(|&t| f(t)).collect(),
            stderr: vec![0.0; times.len()],
            ratio_to_envelope: vec![0.0; times.len()],
            replicas: 2,
            seed: 0,
            lattice: TorusLattice::new(1, 3).unwrap(),
            diff: DiffLawSpec::matched(MeasureSpec::bernoulli(0.5)).unwrap(),
            engine: Engine::Stirring,
            metadata: BTreeMap::new(),
        }
    }

    fn dyadic(t0: f64, k: u32) -> Vec<f64> {
        (0..k).map(|i| t0 * 2f64.powi(i as i32)).collect()
    }

    #[test]
    fn exact_power_law() {
        let s = synthetic(&dyadic(10.0, 7), |t| t.powf(-0.25));
        let f = fit_decay_exponent(&s, (0.0, 1e9)).unwrap();
        assert!((f.slope + 0.25).abs() < 1e-12);
        assert_eq!(f.half_width, 0.0);
    }

    #[test]
    fn constant_series() {
        let s = synthetic(&dyadic(1.0, 5), |_| 0.3);
        assert!(fit_decay_exponent(&s, (0.0, 1e9)).unwrap().slope.abs() < 1e-12);
    }

    #[test]
    fn envelope_reproduces_gamma() {
        for d in 1..=6 {
            let g = theoretical_exponent(d).unwrap();
            let s = synthetic(&dyadic(4.0, 6), |t| 3.0 * t.powf(-g));
            let f = fit_decay_exponent(&s, (0.0, 1e9)).unwrap();
            assert!((f.slope + g).abs() < 1e-12);
        }
    }

    #[test]
    fn drops_nonpositive_and_needs_four() {
        let s = synthetic(&[0.0, 1.0, 2.0, 4.0, 8.0, 16.0], |t| if t == 4.0 { 0.0 } else { 1.0 / t.max(1.0) });
        let f = fit_decay_exponent(&s, (0.0, 100.0)).unwrap();
        assert_eq!(f.dropped, vec![4.0]);
        assert_eq!(f.points, 4);
        assert!(fit_decay_exponent(&s, (1.5, 100.0)).is_err());
    }

    #[test]
    fn delta_method_half_width() {
        let mut s = synthetic(&[1.0, 2.0, 4.0, 8.0], |t| t.powi(-1));
        s.stderr = s.estimate.iter().map(|e| 0.1 * e).collect();
        let f = fit_decay_exponent(&s, (0.0, 10.0)).unwrap();
        // x = k ln 2, Sxx = 5 ln²2, Σ w² = 1/Sxx
        let want = FIT_Z * 0.1 / (5.0f64).sqrt() / 2f64.ln();
        assert!((f.half_width - want).abs() < 1e-12);
    }
}
