//! Monte Carlo check of `∫ φ(u₀) f(t,u₀) χ dμ_α = ∫ φ(u(t,u₀)) χ dμ_α`.
//!
//! Both sides are averaged over the same samples, so the estimator of the
//! difference is the mean of per-sample differences with its own standard error.

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::config::ExperimentConfig;
use super::output::{Cell, CsvTable, RunOutput};
use crate::error::Result;
use crate::flow::evolve;
use crate::fourier::{sobolev_norm_sq, FourierState};
use crate::measures::{cutoff_indicator, sample_mu_alpha, MCReport};
use crate::stats::mean_se;
use crate::transport::log_weight;

pub const CSV_HEADER: [&str; 10] = [
    "sample_index",
    "cutoff",
    "log_weight_quadrature",
    "log_weight_endpoint",
    "phi1_push",
    "phi1_weighted",
    "phi2_push",
    "phi2_weighted",
    "phi3_push",
    "phi3_weighted",
];

/// Number of paired standard errors allowed for the difference.
pub const Z_TOLERANCE: f64 = 3.0;

/// `cos(Re û(0))`.
pub fn phi1(u: &FourierState) -> f64 {
    u.mode(0).re.cos()
}

/// `exp(−‖u‖²_{H^{−1}})`.
pub fn phi2(u: &FourierState) -> f64 {
    (-sobolev_norm_sq(u, -1.0)).exp()
}

/// `sin(Im û(1))`.
pub fn phi3(u: &FourierState) -> f64 {
    u.mode(1).im.sin()
}

/// Named bounded test functional.
pub type Functional = (&'static str, fn(&FourierState) -> f64);

pub const FUNCTIONALS: [Functional; 3] = [("phi1", phi1), ("phi2", phi2), ("phi3", phi3)];

#[derive(Clone, Debug)]
struct SampleRow {
    index: u64,
    cutoff: bool,
    log_weights: Option<(f64, f64)>,
    push: [f64; 3],
    weighted: [f64; 3],
}

fn evaluate(config: &ExperimentConfig, index: u64) -> Result<SampleRow> {
    let params = config.model_params();
    let u0 = sample_mu_alpha(&config.measure_spec(), index);
    let cutoff = cutoff_indicator(&u0, config.radius);
    let mut row = SampleRow {
        index,
        cutoff,
        log_weights: None,
        push: [0.0; 3],
        weighted: [0.0; 3],
    };
    if !cutoff {
        return Ok(row);
    }
    let moved = evolve(&u0, config.t, &params, false)?.into_last();
    let w = log_weight(&u0, config.t, config.alpha, &params, config.radius)?;
    let f = w.weight();
    for (j, (_, phi)) in FUNCTIONALS.iter().enumerate() {
        row.push[j] = phi(&moved);
        row.weighted[j] = phi(&u0) * f;
    }
    row.log_weights = Some((w.log_weight_quadrature, w.log_weight_endpoint));
    Ok(row)
}

#[derive(Clone, Debug, Serialize)]
pub struct FunctionalSummary {
    pub name: &'static str,
    /// `E[χ φ(u(t))]`.
    pub push: MCReport,
    /// `E[χ φ(u₀) f(t,u₀)]`.
    pub weighted: MCReport,
    /// Mean of the per-sample differences `push − weighted`.
    pub difference: f64,
    pub paired_std_error: f64,
    pub z_score: f64,
    pub pass: bool,
}

pub fn run_pushforward(config: &ExperimentConfig) -> Result<RunOutput> {
    config.validate()?;
    let rows: Vec<SampleRow> = (0..config.n_samples as u64)
        .into_par_iter()
        .map(|i| evaluate(config, i))
        .collect::<Result<_>>()?;

    let n = rows.len();
    let accepted = rows.iter().filter(|r| r.cutoff).count();
    let rejected_fraction = 1.0 - accepted as f64 / n as f64;
    let report = |xs: &[f64]| {
        let ms = mean_se(xs);
        MCReport {
            estimate: ms.mean,
            std_error: ms.std_error,
            n_samples: n,
            seed: config.seed,
            rejected_fraction,
        }
    };
    let functionals: Vec<FunctionalSummary> = FUNCTIONALS
        .iter()
        .enumerate()
        .map(|(j, (name, _))| {
            let push: Vec<f64> = rows.iter().map(|r| r.push[j]).collect();
            let weighted: Vec<f64> = rows.iter().map(|r| r.weighted[j]).collect();
            let diff: Vec<f64> = rows.iter().map(|r| r.push[j] - r.weighted[j]).collect();
            let d = mean_se(&diff);
            let z_score = if d.std_error > 0.0 { d.mean / d.std_error } else { 0.0 };
            let pass = if d.std_error > 0.0 {
                z_score.abs() <= Z_TOLERANCE
            } else {
                d.mean == 0.0
            };
            FunctionalSummary {
                name,
                push: report(&push),
                weighted: report(&weighted),
                difference: d.mean,
                paired_std_error: d.std_error,
                z_score,
                pass,
            }
        })
        .collect();

    let discrepancies = rows.iter().filter_map(|r| r.log_weights.map(|(q, e)| (q - e).abs()));
    let max_discrepancy = discrepancies.fold(0.0, f64::max);
    let weights_positive = rows.iter().filter_map(|r| r.log_weights).all(|(q, _)| q.exp() > 0.0);
    let passed = functionals.iter().all(|f| f.pass) && weights_positive;

    let mut table = CsvTable::new(&CSV_HEADER);
    for r in &rows {
        let (q, e) = match r.log_weights {
            Some((q, e)) => (Cell::Num(q), Cell::Num(e)),
            None => (Cell::Missing, Cell::Missing),
        };
        let mut cells = vec![Cell::Int(r.index as i64), Cell::Flag(r.cutoff), q, e];
        for j in 0..3 {
            cells.push(Cell::Num(r.push[j]));
            cells.push(Cell::Num(r.weighted[j]));
        }
        table.push(cells);
    }
    let summary = json!({
        "n_samples": n,
        "accepted": accepted,
        "rejected_fraction": rejected_fraction,
        "z_tolerance": Z_TOLERANCE,
        "functionals": functionals,
        "max_log_weight_discrepancy": max_discrepancy,
        "weights_positive": weights_positive,
    });
    Ok(RunOutput { summary, table, passed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::config::ExperimentKind;

    fn config(t: f64, n: usize) -> ExperimentConfig {
        ExperimentConfig {
            experiment: ExperimentKind::Pushforward,
            t,
            n_samples: n,
            seed: 3,
            ..Default::default()
        }
    }

    #[test]
    fn zero_time_gives_exact_zero_differences() {
        let out = run_pushforward(&config(0.0, 200)).unwrap();
        for f in out.summary["functionals"].as_array().unwrap() {
            assert_eq!(f["difference"], json!(0.0));
            assert_eq!(f["pass"], json!(true));
        }
        for row in &out.table.rows {
            assert_eq!(row[4], row[5]);
            assert_eq!(row[6], row[7]);
            assert_eq!(row[8], row[9]);
        }
    }

    #[test]
    fn rows_follow_the_cutoff() {
        let out = run_pushforward(&config(0.1, 60)).unwrap();
        assert_eq!(out.table.header, CSV_HEADER.to_vec());
        assert_eq!(out.table.rows.len(), 60);
        for row in &out.table.rows {
            match row[1] {
                Cell::Flag(true) => assert!(matches!(row[2], Cell::Num(_))),
                Cell::Flag(false) => {
                    assert_eq!(row[2], Cell::Missing);
                    assert!(row[4..].iter().all(|c| *c == Cell::Num(0.0)));
                }
                _ => unreachable!(),
            }
        }
        assert_eq!(out.summary["weights_positive"], json!(true));
    }

    #[test]
    fn functionals_are_bounded() {
        let u = sample_mu_alpha(&config(0.0, 1).measure_spec(), 0);
        for (_, phi) in FUNCTIONALS {
            assert!(phi(&u).abs() <= 1.0);
        }
        assert_eq!(phi2(&FourierState::zeros(3)), 1.0);
    }
}
