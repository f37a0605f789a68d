//! Tail probabilities `P[‖X‖_{B^s_p} > λ, ‖X‖_{L²} < B]` of `μ_α` samples and
//! the least-squares slope of `log P` against `λ²`.

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::config::ExperimentConfig;
use super::output::{Cell, CsvTable, RunOutput};
use crate::error::{Error, Result};
use crate::fourier::{besov_norm, sobolev_norm};
use crate::measures::sample_mu_alpha;
use crate::stats::least_squares;

/// Bins with fewer hits are left out of the fit.
pub const MIN_FIT_HITS: usize = 30;

pub const CSV_HEADER: [&str; 5] = ["lambda", "hits", "probability", "std_error", "in_fit"];

#[derive(Clone, Debug, Serialize)]
pub struct TailBin {
    pub lambda: f64,
    pub hits: usize,
    pub probability: f64,
    /// Binomial standard error `√(P(1−P)/n)`.
    pub std_error: f64,
    pub in_fit: bool,
}

/// `(‖X‖_{L²}, ‖X‖_{B^s_p})` per sample.
pub fn sample_norms(config: &ExperimentConfig) -> Result<Vec<(f64, f64)>> {
    let spec = config.measure_spec();
    (0..config.n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let x = sample_mu_alpha(&spec, i);
            Ok((sobolev_norm(&x, 0.0), besov_norm(&x, config.besov_s, config.besov_p)?))
        })
        .collect()
}

/// Tail bins for a given `L²` bound from precomputed norms.
pub fn tail_bins(norms: &[(f64, f64)], lambda_grid: &[f64], l2_bound: f64) -> Vec<TailBin> {
    let n = norms.len() as f64;
    lambda_grid
        .iter()
        .map(|&lambda| {
            let hits = norms.iter().filter(|(l2, b)| *b > lambda && *l2 < l2_bound).count();
            let p = hits as f64 / n;
            TailBin {
                lambda,
                hits,
                probability: p,
                std_error: (p * (1.0 - p) / n).sqrt(),
                in_fit: hits >= MIN_FIT_HITS,
            }
        })
        .collect()
}

/// Slope of `log P` against `λ²` over the bins marked `in_fit`.
pub fn fit_slope(bins: &[TailBin]) -> Result<f64> {
    if bins.iter().all(|b| b.hits == 0) {
        return Err(Error::InvalidArgument(
            "tail study has zero hits for every lambda; P(‖X‖_{L²} < B) shrinks quickly with N, \
             so raise l2_bound or n_samples, or lower max_mode"
                .into(),
        ));
    }
    let (x, y): (Vec<f64>, Vec<f64>) = bins
        .iter()
        .filter(|b| b.in_fit)
        .map(|b| (b.lambda * b.lambda, b.probability.ln()))
        .unzip();
    least_squares(&x, &y).map(|(slope, _)| slope).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "degenerate lambda grid: fewer than two bins with at least {MIN_FIT_HITS} hits"
        ))
    })
}

pub fn run_tail_study(config: &ExperimentConfig) -> Result<RunOutput> {
    config.validate()?;
    let norms = sample_norms(config)?;
    let bins = tail_bins(&norms, &config.lambda_grid, config.l2_bound);
    let slope = fit_slope(&bins)?;
    let mut table = CsvTable::new(&CSV_HEADER);
    for b in &bins {
        table.push(vec![
            Cell::Num(b.lambda),
            Cell::Int(b.hits as i64),
            Cell::Num(b.probability),
            Cell::Num(b.std_error),
            Cell::Flag(b.in_fit),
        ]);
    }
    let l2_mass = norms.iter().filter(|(l2, _)| *l2 < config.l2_bound).count() as f64 / norms.len() as f64;
    let summary = json!({
        "slope": slope,
        "slope_negative": slope < 0.0,
        "l2_mass": l2_mass,
        "bins": bins,
    });
    Ok(RunOutput {
        summary,
        table,
        passed: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::config::ExperimentKind;

    fn config() -> ExperimentConfig {
        ExperimentConfig {
            experiment: ExperimentKind::Tails,
            alpha: 1.0,
            besov_p: 2.0,
            besov_s: 0.2,
            l2_bound: 2.0,
            n_samples: 4000,
            lambda_grid: vec![0.0, 0.5, 1.0, 1.5],
            seed: 8,
            ..Default::default()
        }
    }

    #[test]
    fn zero_lambda_is_the_l2_mass() {
        let cfg = config();
        let norms = sample_norms(&cfg).unwrap();
        let bins = tail_bins(&norms, &[0.0], cfg.l2_bound);
        let mass = norms.iter().filter(|(l2, _)| *l2 < cfg.l2_bound).count();
        assert_eq!(bins[0].hits, mass);
    }

    #[test]
    fn probabilities_grow_with_bound_and_fall_with_lambda() {
        let cfg = config();
        let norms = sample_norms(&cfg).unwrap();
        let small = tail_bins(&norms, &cfg.lambda_grid, 1.0);
        let large = tail_bins(&norms, &cfg.lambda_grid, 2.0);
        for (a, b) in small.iter().zip(&large) {
            assert!(a.probability <= b.probability);
        }
        assert!(large.windows(2).all(|w| w[1].hits <= w[0].hits));
    }

    #[test]
    fn degenerate_grids_are_errors() {
        let cfg = config();
        let norms = sample_norms(&cfg).unwrap();
        assert!(fit_slope(&tail_bins(&norms, &[100.0, 200.0], 2.0)).is_err());
        assert!(fit_slope(&tail_bins(&norms, &[0.0, 100.0], 2.0)).is_err());
    }

    #[test]
    fn slope_is_negative() {
        let out = run_tail_study(&config()).unwrap();
        assert!(out.summary["slope"].as_f64().unwrap() < 0.0, "{}", out.summary);
        assert_eq!(out.table.rows.len(), 4);
    }
}
