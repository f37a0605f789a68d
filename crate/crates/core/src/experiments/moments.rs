//! Empirical `L^p(χμ_α)` moments of the transported density for `N, 2N, 4N`.
//!
//! Diagnostic only: the trend over `N` is reported, nothing is asserted about
//! the supremum. Moments are normalized by the cutoff mass, so `t = 0` gives 1.

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::config::ExperimentConfig;
use super::output::{Cell, CsvTable, RunOutput};
use crate::error::{Error, Result};
use crate::fourier::FourierState;
use crate::measures::{cutoff_indicator, sample_mu_alpha, MeasureSpec};
use crate::stats::mean_se;
use crate::transport::log_weight;

pub const CSV_HEADER: [&str; 6] = [
    "max_mode",
    "sample_index",
    "cutoff",
    "log_weight_quadrature",
    "log_weight_endpoint",
    "weight_pow_p",
];

#[derive(Clone, Debug, Serialize)]
pub struct MomentRow {
    pub max_mode: usize,
    /// `E[χ f^p] / E[χ]`.
    pub moment: f64,
    pub std_error: f64,
    /// `E[χ f^p]`.
    pub moment_unnormalized: f64,
    pub accepted: usize,
    pub max_log_weight_discrepancy: f64,
    pub all_finite: bool,
}

/// Initial datum for the moment probe: a sample of `μ_α`, or its restriction
/// to a single mode in the degenerate test mode.
fn initial_state(spec: &MeasureSpec, index: u64, degenerate_mode: Option<i64>) -> FourierState {
    let u = sample_mu_alpha(spec, index);
    match degenerate_mode {
        Some(k) => FourierState::single_mode(spec.max_mode, k, u.mode(k)),
        None => u,
    }
}

pub fn run_moment_probe(config: &ExperimentConfig) -> Result<RunOutput> {
    config.validate()?;
    let p = config.p_moment;
    let mut table = CsvTable::new(&CSV_HEADER);
    let mut rows = Vec::new();
    for n in [config.max_mode, 2 * config.max_mode, 4 * config.max_mode] {
        let spec = MeasureSpec {
            max_mode: n,
            ..config.measure_spec()
        };
        let params = config.model_params().with_max_mode(n);
        let samples: Vec<(bool, Option<(f64, f64)>)> = (0..config.n_samples as u64)
            .into_par_iter()
            .map(|i| -> Result<_> {
                let u0 = initial_state(&spec, i, config.degenerate_mode);
                if !cutoff_indicator(&u0, config.radius) {
                    return Ok((false, None));
                }
                let w = log_weight(&u0, config.t, config.alpha, &params, config.radius)?;
                Ok((true, Some((w.log_weight_quadrature, w.log_weight_endpoint))))
            })
            .collect::<Result<_>>()?;
        let powered: Vec<f64> = samples
            .iter()
            .map(|(_, lw)| lw.map_or(0.0, |(q, _)| (p * q).exp()))
            .collect();
        let all_finite = powered.iter().all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::NonFinite(format!("weight^p at N={n}")));
        }
        let accepted = samples.iter().filter(|(c, _)| *c).count();
        let ms = mean_se(&powered);
        let mass = accepted as f64 / samples.len() as f64;
        let (moment, std_error) = if accepted > 0 {
            (ms.mean / mass, ms.std_error / mass)
        } else {
            (f64::NAN, f64::NAN)
        };
        let max_log_weight_discrepancy = samples
            .iter()
            .filter_map(|(_, lw)| lw.map(|(q, e)| (q - e).abs()))
            .fold(0.0, f64::max);
        for (i, ((cutoff, lw), pw)) in samples.iter().zip(&powered).enumerate() {
            let (q, e) = match lw {
                Some((q, e)) => (Cell::Num(*q), Cell::Num(*e)),
                None => (Cell::Missing, Cell::Missing),
            };
            table.push(vec![
                Cell::Int(n as i64),
                Cell::Int(i as i64),
                Cell::Flag(*cutoff),
                q,
                e,
                Cell::Num(*pw),
            ]);
        }
        rows.push(MomentRow {
            max_mode: n,
            moment,
            std_error,
            moment_unnormalized: ms.mean,
            accepted,
            max_log_weight_discrepancy,
            all_finite,
        });
    }
    let summary = json!({ "p_moment": p, "rows": rows });
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
            experiment: ExperimentKind::Moments,
            max_mode: 4,
            n_samples: 40,
            t: 0.1,
            step: 1e-3,
            radius: 3.0,
            ..Default::default()
        }
    }

    #[test]
    fn degenerate_law_has_unit_weights() {
        let out = run_moment_probe(&ExperimentConfig {
            degenerate_mode: Some(1),
            ..config()
        })
        .unwrap();
        for row in out.summary["rows"].as_array().unwrap() {
            assert!((row["moment"].as_f64().unwrap() - 1.0).abs() < 1e-12);
        }
        for cell in out.table.column("weight_pow_p").unwrap() {
            match cell {
                Cell::Num(v) => assert!(v == 0.0 || (v - 1.0).abs() < 1e-12),
                _ => unreachable!(),
            }
        }
    }

    #[test]
    fn zero_time_moment_is_one() {
        let out = run_moment_probe(&ExperimentConfig { t: 0.0, ..config() }).unwrap();
        let rows = out.summary["rows"].as_array().unwrap();
        assert_eq!(rows.len(), 3);
        for row in rows {
            assert_eq!(row["moment"].as_f64().unwrap(), 1.0);
        }
    }

    #[test]
    fn reports_finite_moments_over_three_truncations() {
        let out = run_moment_probe(&config()).unwrap();
        let rows = out.summary["rows"].as_array().unwrap();
        let modes: Vec<u64> = rows.iter().map(|r| r["max_mode"].as_u64().unwrap()).collect();
        assert_eq!(modes, vec![4, 8, 16]);
        for row in rows {
            assert!(row["moment"].as_f64().unwrap().is_finite());
            assert!(row["std_error"].as_f64().unwrap() >= 0.0);
            assert_eq!(row["all_finite"], json!(true));
        }
        assert_eq!(out.table.rows.len(), 120);
    }
}
