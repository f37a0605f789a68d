//! Density of `χ_{‖u‖_{L²}≤R} μ_{α,N}` transported by the truncated flow.
//!
//! The log-density at time `t` is
//!
//! ```text
//! log f_N(t, u₀) = −∫₀ᵗ e(u_N(−r, u₀)) dr,   e(u) = (i P_N(|u|²u), D^{2α}u),
//! ```
//!
//! with `(·,·)` the real `L²` pairing. Since the dispersive part of the flow is
//! orthogonal to `D^{2α}u`, `e(u) = −½ d/dt ‖u_N(t)‖²_{H^α}` and the integral
//! collapses to `½(‖u₀‖²_{H^α} − ‖u_N(−t, u₀)‖²_{H^α})`. Both routes are
//! computed here, together with the checks behind the change of variables:
//! the flow Jacobian determinant, the divergence of the vector field, the
//! orthogonality of the dispersion and the transport equation.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{self, alias_free_grid, evolve, step_count, ModelParams, Stepper, Trajectory};
use crate::fourier::{
    self, apply_bessel_power, bessel_weight, dispersion, fast_grid_size, phase_function, sobolev_norm, sobolev_norm_sq,
    FourierState, PhaseTriple,
};
use crate::measures::{cutoff_indicator, log_gaussian_density_rel, sample_mu_alpha, MeasureSpec};
use crate::stats::median;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Largest truncation for dense Jacobians: dimension `2(2N+1) ≤ 34`.
pub const JACOBIAN_MAX_MODE: usize = 8;
/// Largest truncation for the change-of-variables oracle.
pub const CHANGE_OF_VARIABLES_MAX_MODE: usize = 4;
/// Largest truncation for the `O(N³)`-per-sample direct quadrilinear sum.
pub const DIRECT_FORM_MAX_MODE: usize = 32;
/// Central-difference increment for finite-difference Jacobians.
pub const JACOBIAN_FD_INCREMENT: f64 = 1e-5;

fn alias_free_cubic(state: &FourierState) -> FourierState {
    let grid = fast_grid_size(alias_free_grid(state.max_mode()));
    flow::cubic_term_on_grid(state, grid).expect("padded grid always exceeds 2N+1")
}

/// `e(u) = Re(i P_N(|u|²u), D^{2α}u)_{L²}`.
pub fn energy_transfer_integrand(state: &FourierState, alpha: f64) -> f64 {
    let cubic = alias_free_cubic(state);
    cubic
        .modes()
        .map(|(k, c)| (I * c * (state.mode(k) * bessel_weight(k, 2.0 * alpha)).conj()).re)
        .sum()
}

/// Composite Simpson rule on equally spaced samples (even number of intervals).
pub fn simpson(values: &[f64], h: f64) -> Result<f64> {
    let intervals = values.len().saturating_sub(1);
    if !intervals.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "Simpson's rule needs an even number of intervals, got {intervals}"
        )));
    }
    if intervals == 0 {
        return Ok(0.0);
    }
    let interior: f64 = values[1..intervals]
        .iter()
        .enumerate()
        .map(|(i, v)| if i % 2 == 0 { 4.0 * v } else { 2.0 * v })
        .sum();
    Ok(h / 3.0 * (values[0] + interior + values[intervals]))
}

/// Running integral `∫₀^{x_i}` at every node: Simpson for even `i`, Simpson
/// followed by a 3/8 panel for odd `i ≥ 3`, trapezoid for `i = 1`.
pub fn cumulative_integral(values: &[f64], h: f64) -> Vec<f64> {
    let mut even = vec![0.0; values.len()];
    for i in (2..values.len()).step_by(2) {
        even[i] = even[i - 2] + h / 3.0 * (values[i - 2] + 4.0 * values[i - 1] + values[i]);
    }
    (0..values.len())
        .map(|i| match i {
            0 => 0.0,
            1 => 0.5 * h * (values[0] + values[1]),
            i if i % 2 == 0 => even[i],
            i => even[i - 3] + 3.0 * h / 8.0 * (values[i - 3] + 3.0 * values[i - 2] + 3.0 * values[i - 1] + values[i]),
        })
        .collect()
}

/// Running integrals `∫₀^{r_n} g dr` at every node of a backward trajectory
/// with `r_n = n·step`. Gauss–Legendre trajectories use the collocation rule
/// at their stage states, others composite Simpson (and [`cumulative_integral`]
/// at odd nodes). `g` receives the state and its time `−r`.
fn running_integral<G>(traj: &Trajectory, step: f64, g: G) -> Vec<f64>
where
    G: Fn(&FourierState, f64) -> f64 + Sync,
{
    let n = traj.len() - 1;
    if n > 0 && traj.stages.len() == n {
        let h = traj.times[1] - traj.times[0];
        let panels: Vec<f64> = traj
            .stages
            .par_iter()
            .zip(&traj.times)
            .map(|(pair, &time)| {
                0.5 * step
                    * (g(&pair[0], time + flow::GAUSS_NODES[0] * h) + g(&pair[1], time + flow::GAUSS_NODES[1] * h))
            })
            .collect();
        let mut out = Vec::with_capacity(n + 1);
        out.push(0.0);
        let mut acc = 0.0;
        for p in panels {
            acc += p;
            out.push(acc);
        }
        out
    } else {
        let values: Vec<f64> = traj
            .states
            .par_iter()
            .zip(&traj.times)
            .map(|(s, &time)| g(s, time))
            .collect();
        cumulative_integral(&values, step)
    }
}

/// Both evaluations of `log f_N(t, u₀)` for one initial datum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightResult {
    /// `−∫₀ᵗ e(u_N(−r)) dr` by the trajectory's quadrature: the collocation
    /// rule at the stage states for Gauss–Legendre, composite Simpson for RK4.
    pub log_weight_quadrature: f64,
    /// `½(‖P_N u₀‖²_{H^α} − ‖u_N(−t, u₀)‖²_{H^α})`.
    pub log_weight_endpoint: f64,
    pub discrepancy: f64,
    pub cutoff_pass: bool,
    pub t: f64,
    pub alpha: f64,
}

impl WeightResult {
    /// `χ·exp(log f)` using the quadrature value.
    pub fn weight(&self) -> f64 {
        if self.cutoff_pass {
            self.log_weight_quadrature.exp()
        } else {
            0.0
        }
    }
}

/// Backward trajectory `u_N(−r, u₀)` for `r` between 0 and `t` with all states kept.
pub fn backward_trajectory(u0: &FourierState, t: f64, params: &ModelParams) -> Result<Trajectory> {
    evolve(u0, -t, params, true)
}

fn weight_from_trajectory(traj: &Trajectory, t: f64, alpha: f64, radius: f64) -> Result<WeightResult> {
    let n = traj.len() - 1;
    let h = if n == 0 { 0.0 } else { t / n as f64 };
    let log_weight_quadrature = -running_integral(traj, h, |s, _| energy_transfer_integrand(s, alpha))[n];
    let log_weight_endpoint = 0.5 * (sobolev_norm_sq(traj.first(), alpha) - sobolev_norm_sq(traj.last(), alpha));
    if !log_weight_quadrature.is_finite() || !log_weight_endpoint.is_finite() {
        return Err(Error::NonFinite("log weight".into()));
    }
    Ok(WeightResult {
        log_weight_quadrature,
        log_weight_endpoint,
        discrepancy: (log_weight_quadrature - log_weight_endpoint).abs(),
        cutoff_pass: cutoff_indicator(traj.first(), radius),
        t,
        alpha,
    })
}

/// `log f_N(t, u₀)` by quadrature along one recorded backward trajectory and
/// by the endpoint energy identity. `t/params.step` must be an even integer.
pub fn log_weight(u0: &FourierState, t: f64, alpha: f64, params: &ModelParams, radius: f64) -> Result<WeightResult> {
    let steps = step_count(t, params.step)?;
    if steps % 2 != 0 {
        return Err(Error::StepDoesNotDivide {
            t,
            step: params.step,
            requirement: "an even number of",
        });
    }
    let traj = backward_trajectory(u0, t, params)?;
    weight_from_trajectory(&traj, t, alpha, radius)
}

/// Evaluation route for the nonresonant quadrilinear form.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormPath {
    /// Explicit sum over nonresonant triples in the interaction variables.
    Direct,
    /// Full cubic term by FFT minus the resonant planes `k1 = k2`, `k2 = k3`.
    Fft,
}

/// Nonresonant part of `e(u)` from the explicit triple sum, evaluated at
/// backward time `r` in the interaction variables `v̂(−r,k) = e^{−irω(k)} û(k)`
/// with the oscillating factor `e^{−irΦ}`.
pub fn nonresonant_integrand_direct(state: &FourierState, r: f64, alpha: f64, beta: f64) -> f64 {
    let n = state.max_mode() as i64;
    let v = state.map_modes(|k, c| c * Complex64::from_polar(1.0, -r * dispersion(k, beta)));
    let mut acc = ZERO;
    for k in -n..=n {
        let outer = v.mode(k).conj() * bessel_weight(k, 2.0 * alpha);
        if outer == ZERO {
            continue;
        }
        let mut inner = ZERO;
        for k1 in -n..=n {
            for k3 in -n..=n {
                let k2 = k1 + k3 - k;
                if k2.abs() > n {
                    continue;
                }
                let triple = PhaseTriple::new(k1, k2, k3);
                if !triple.is_nonresonant() {
                    continue;
                }
                let phase = Complex64::from_polar(1.0, -r * phase_function(triple, beta));
                inner += phase * v.mode(k1) * v.mode(k2).conj() * v.mode(k3);
            }
        }
        acc += inner * outer;
    }
    (I * acc).re / (2.0 * PI)
}

/// Nonresonant part of `e(u)` from the FFT cubic term with the resonant
/// contribution `(2π)^{−1}(2‖u‖²û(k) − |û(k)|²û(k))` removed.
pub fn nonresonant_integrand_fft(state: &FourierState, alpha: f64) -> f64 {
    let cubic = alias_free_cubic(state);
    let mass = sobolev_norm_sq(state, 0.0);
    cubic
        .modes()
        .map(|(k, c)| {
            let u = state.mode(k);
            let resonant = (2.0 * mass - u.norm_sqr()) * u / (2.0 * PI);
            (I * (c - resonant) * (u * bessel_weight(k, 2.0 * alpha)).conj()).re
        })
        .sum()
}

/// `F(u_N) = ∫₀ᵀ (i N_res(u_N(−r)), D^{2α}u_N(−r)) dr`: the time-integrated
/// quadrilinear sum over `k = k1 − k2 + k3` restricted to
/// `(k1 − k2)(k3 − k2) ≠ 0`, integrated in time along the backward trajectory
/// with the same rule as [`log_weight`]. `T/params.step` must be even.
pub fn nonresonant_form(
    u0: &FourierState,
    horizon: f64,
    alpha: f64,
    params: &ModelParams,
    path: FormPath,
) -> Result<f64> {
    if path == FormPath::Direct && params.max_mode > DIRECT_FORM_MAX_MODE {
        return Err(Error::DimensionCap {
            dimension: params.max_mode,
            cap: DIRECT_FORM_MAX_MODE,
        });
    }
    let steps = step_count(horizon, params.step)?;
    if steps % 2 != 0 {
        return Err(Error::StepDoesNotDivide {
            t: horizon,
            step: params.step,
            requirement: "an even number of",
        });
    }
    let traj = backward_trajectory(u0, horizon, params)?;
    Ok(form_from_trajectory(&traj, horizon, alpha, path))
}

fn form_from_trajectory(traj: &Trajectory, horizon: f64, alpha: f64, path: FormPath) -> f64 {
    let beta = traj.params.beta;
    let n = traj.len() - 1;
    let h = if n == 0 { 0.0 } else { horizon / n as f64 };
    running_integral(traj, h, |s, time| match path {
        FormPath::Direct => nonresonant_integrand_direct(s, -time, alpha, beta),
        FormPath::Fft => nonresonant_integrand_fft(s, alpha),
    })[n]
}

/// `(2π)^{−1}·Im ∫ f conj g dx` by trapezoidal quadrature on `samples`.
fn im_pairing(f: &[Complex64], g: &[Complex64]) -> f64 {
    let m = f.len() as f64;
    f.iter().zip(g).map(|(a, b)| (a * b.conj()).im).sum::<f64>() * 2.0 * PI / m
}

/// `|Im(|u|²u, D^{2α}u) − Im((|u|² − π^{−1}‖u‖²)u, D^{2α}u)|` with both
/// pairings computed by exact grid quadrature in physical space.
pub fn resonance_removal_residual(state: &FourierState, alpha: f64) -> f64 {
    let grid = fast_grid_size(alias_free_grid(state.max_mode()));
    let u = fourier::synthesize(state, grid).expect("padded grid");
    let w = fourier::synthesize(&apply_bessel_power(state, 2.0 * alpha), grid).expect("padded grid");
    let mass = sobolev_norm_sq(state, 0.0);
    let full: Vec<_> = u.iter().map(|z| z * z.norm_sqr()).collect();
    let removed: Vec<_> = u.iter().map(|z| z * (z.norm_sqr() - mass / PI)).collect();
    (im_pairing(&full, &w) - im_pairing(&removed, &w)).abs()
}

/// `|(D^{2α}u, −i(i∂ₓ³ + β∂ₓ²)u)|` in modal form.
pub fn linear_orthogonality_residual(state: &FourierState, alpha: f64, beta: f64) -> f64 {
    state
        .modes()
        .map(|(k, c)| {
            let lhs = c * bessel_weight(k, 2.0 * alpha);
            let rhs = -I * dispersion(k, beta) * c;
            (lhs * rhs.conj()).re
        })
        .sum::<f64>()
        .abs()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JacobianMethod {
    /// Linearized equation integrated alongside the flow with the same stepper.
    Variational,
    /// Central differences of the flow map with increment [`JACOBIAN_FD_INCREMENT`].
    FiniteDifference,
}

/// Jacobian of the flow map in real coordinates `(Re û, Im û)`.
#[derive(Clone, Debug, Serialize)]
pub struct JacobianReport {
    /// `2(2N+1)`.
    pub dimension: usize,
    pub det: f64,
    /// Largest `|div b|` of the vector field over the states visited, from the
    /// exact linearization.
    pub max_div_residual: f64,
    pub method: JacobianMethod,
    /// Row-major entries `∂Φ_i/∂x_j`.
    pub matrix: Vec<f64>,
}

impl JacobianReport {
    pub fn entry(&self, row: usize, col: usize) -> f64 {
        self.matrix[row * self.dimension + col]
    }

    pub fn max_entry_gap(&self, other: &JacobianReport) -> f64 {
        self.matrix
            .iter()
            .zip(&other.matrix)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

fn check_dimension(max_mode: usize, cap: usize) -> Result<()> {
    if max_mode > cap {
        return Err(Error::DimensionCap {
            dimension: 2 * (2 * max_mode + 1),
            cap: 2 * (2 * cap + 1),
        });
    }
    Ok(())
}

/// Real basis direction `j` of `(Re û, Im û)` as complex modes.
fn basis_direction(len: usize, j: usize) -> Vec<Complex64> {
    let mut d = vec![ZERO; len];
    if j < len {
        d[j] = Complex64::new(1.0, 0.0);
    } else {
        d[j - len] = I;
    }
    d
}

/// `Σ_j ∂b_j/∂x_j` of the full vector field from its exact linearization.
///
/// The dispersive part contributes `Re(−iω) = 0` on the diagonal, so only the
/// cubic part is evaluated.
pub fn linearized_divergence(state: &FourierState, params: &ModelParams) -> Result<f64> {
    let len = 2 * params.max_mode + 1;
    let mut stepper = Stepper::new(params, params.step)?;
    let mut y = state.coeffs().to_vec();
    for j in 0..2 * len {
        y.extend(basis_direction(len, j));
    }
    let mut out = vec![ZERO; y.len()];
    stepper.nonlinear_field(&y, &mut out);
    let mut div = 0.0;
    for j in 0..2 * len {
        let col = &out[(j + 1) * len..(j + 2) * len];
        div += if j < len { col[j].re } else { col[j - len].im };
    }
    Ok(div)
}

/// Jacobian of `u₀ ↦ u_N(t, u₀)` in real coordinates.
pub fn flow_jacobian(
    u0: &FourierState,
    t: f64,
    params: &ModelParams,
    method: JacobianMethod,
) -> Result<JacobianReport> {
    check_dimension(params.max_mode, JACOBIAN_MAX_MODE)?;
    params.validate()?;
    let steps = step_count(t, params.step)?;
    let start = u0.resized(params.max_mode);
    let len = 2 * params.max_mode + 1;
    let dim = 2 * len;
    let h = if t < 0.0 { -params.step } else { params.step };

    // Columns as real coordinate vectors.
    let columns: Vec<Vec<f64>> = match method {
        JacobianMethod::Variational => (0..dim)
            .into_par_iter()
            .map(|j| -> Result<Vec<f64>> {
                let mut y = start.coeffs().to_vec();
                y.extend(basis_direction(len, j));
                if steps > 0 {
                    let mut stepper = Stepper::new(params, h)?;
                    for _ in 0..steps {
                        stepper.advance(&mut y)?;
                    }
                }
                let tangent = FourierState::from_coeffs(params.max_mode, y[len..].to_vec())?;
                Ok(tangent.to_real_coords())
            })
            .collect::<Result<_>>()?,
        JacobianMethod::FiniteDifference => {
            let x0 = start.to_real_coords();
            let eps = JACOBIAN_FD_INCREMENT;
            (0..dim)
                .into_par_iter()
                .map(|j| -> Result<Vec<f64>> {
                    let shifted = |sign: f64| -> Result<Vec<f64>> {
                        let mut x = x0.clone();
                        x[j] += sign * eps;
                        let s = FourierState::from_real_coords(params.max_mode, &x)?;
                        Ok(evolve(&s, t, params, false)?.into_last().to_real_coords())
                    };
                    let (plus, minus) = (shifted(1.0)?, shifted(-1.0)?);
                    Ok(plus.iter().zip(&minus).map(|(a, b)| (a - b) / (2.0 * eps)).collect())
                })
                .collect::<Result<_>>()?
        }
    };

    let matrix = DMatrix::from_fn(dim, dim, |r, c| columns[c][r]);
    let det = matrix.clone().determinant();
    let traj = evolve(&start, t, params, true)?;
    let mut max_div_residual: f64 = 0.0;
    for s in &traj.states {
        max_div_residual = max_div_residual.max(linearized_divergence(s, params)?.abs());
    }
    let mut row_major = Vec::with_capacity(dim * dim);
    for r in 0..dim {
        for c in 0..dim {
            row_major.push(matrix[(r, c)]);
        }
    }
    Ok(JacobianReport {
        dimension: dim,
        det,
        max_div_residual,
        method,
        matrix: row_major,
    })
}

/// `|Σ_i ∂b_i/∂x_i|` of the full vector field at `u₀` by central differences
/// with the given increment, over all `2(2N+1)` real coordinates.
pub fn divergence_residual(u0: &FourierState, params: &ModelParams, increment: f64) -> Result<f64> {
    check_dimension(params.max_mode, JACOBIAN_MAX_MODE)?;
    if !(increment > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "increment must be positive, got {increment}"
        )));
    }
    let start = u0.resized(params.max_mode);
    let x0 = start.to_real_coords();
    let dim = x0.len();
    let mut div = 0.0;
    for j in 0..dim {
        let field_coord = |sign: f64| -> Result<f64> {
            let mut x = x0.clone();
            x[j] += sign * increment;
            let s = FourierState::from_real_coords(params.max_mode, &x)?;
            Ok(flow::vector_field(&s, params)?.to_real_coords()[j])
        };
        div += (field_coord(1.0)? - field_coord(-1.0)?) / (2.0 * increment);
    }
    Ok(div.abs())
}

/// `|d/dt log f_N(t, u₀) + e(u_N(−t, u₀))|`, differentiating the running
/// quadrature by centered differences over `±params.step` (one-sided at `t = 0`).
pub fn transport_equation_residual(u0: &FourierState, t: f64, alpha: f64, params: &ModelParams) -> Result<f64> {
    let steps = step_count(t, params.step)?;
    let h = params.step;
    let traj = backward_trajectory(u0, (steps + 1) as f64 * h, params)?;
    let log_f: Vec<f64> = running_integral(&traj, h, |s, _| energy_transfer_integrand(s, alpha))
        .iter()
        .map(|q| -q)
        .collect();
    let derivative = if steps == 0 {
        (log_f[1] - log_f[0]) / h
    } else {
        (log_f[steps + 1] - log_f[steps - 1]) / (2.0 * h)
    };
    Ok((derivative + energy_transfer_integrand(&traj.states[steps], alpha)).abs())
}

/// Three evaluations of `log f_N(t, u₀)`.
#[derive(Clone, Debug, Serialize)]
pub struct ChangeOfVariablesReport {
    pub log_quadrature: f64,
    pub log_endpoint: f64,
    /// `log|det DΦ_{−t}(u₀)| + log G(Φ_{−t}u₀) − log G(u₀)`.
    pub log_change_of_variables: f64,
    pub det: f64,
    pub max_gap: f64,
}

/// Compares the weight formula with the change-of-variables density built
/// from the Jacobian of the inverse flow map and the Gaussian density ratio.
pub fn change_of_variables_oracle(
    u0: &FourierState,
    t: f64,
    alpha: f64,
    params: &ModelParams,
) -> Result<ChangeOfVariablesReport> {
    check_dimension(params.max_mode, CHANGE_OF_VARIABLES_MAX_MODE)?;
    let weight = log_weight(u0, t, alpha, params, f64::INFINITY)?;
    let jac = flow_jacobian(u0, -t, params, JacobianMethod::Variational)?;
    let start = u0.resized(params.max_mode);
    let pulled_back = evolve(&start, -t, params, false)?.into_last();
    let log_change_of_variables =
        jac.det.abs().ln() + log_gaussian_density_rel(&pulled_back, alpha) - log_gaussian_density_rel(&start, alpha);
    let values = [
        weight.log_weight_quadrature,
        weight.log_weight_endpoint,
        log_change_of_variables,
    ];
    let max_gap = values
        .iter()
        .flat_map(|a| values.iter().map(move |b| (a - b).abs()))
        .fold(0.0, f64::max);
    Ok(ChangeOfVariablesReport {
        log_quadrature: weight.log_weight_quadrature,
        log_endpoint: weight.log_weight_endpoint,
        log_change_of_variables,
        det: jac.det,
        max_gap,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct FormConvergenceRow {
    pub max_mode: usize,
    pub form: f64,
    /// `|F(u_N) − F(u_{N_prev})|` for the previous entry of the list.
    pub successive_difference: Option<f64>,
    /// `|F(u_N) − F(u_{N_max})|`, the largest truncation standing in for `F(u)`.
    pub gap_to_finest: f64,
}

/// `F(u_N)` for each truncation in `max_modes` (ascending) via the FFT path.
pub fn form_convergence_study(
    u0: &FourierState,
    horizon: f64,
    alpha: f64,
    params: &ModelParams,
    max_modes: &[usize],
) -> Result<Vec<FormConvergenceRow>> {
    if max_modes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("truncations must be strictly ascending".into()));
    }
    let forms: Vec<f64> = max_modes
        .iter()
        .map(|&n| nonresonant_form(u0, horizon, alpha, &params.with_max_mode(n), FormPath::Fft))
        .collect::<Result<_>>()?;
    let finest = forms.last().copied().unwrap_or(0.0);
    Ok(max_modes
        .iter()
        .enumerate()
        .map(|(i, &n)| FormConvergenceRow {
            max_mode: n,
            form: forms[i],
            successive_difference: (i > 0).then(|| (forms[i] - forms[i - 1]).abs()),
            gap_to_finest: (forms[i] - finest).abs(),
        })
        .collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct SmoothingRow {
    pub max_mode: usize,
    /// Median over samples of `|F(u_N)| / ‖P_N u₀‖³_{H^s}`.
    pub median_ratio: f64,
    pub max_ratio: f64,
}

/// Median of `|F(u_N)| / ‖P_N u₀‖³_{H^s}` over samples of `μ_α` drawn at the
/// largest truncation, for each truncation in `max_modes`.
pub fn smoothing_probe(
    spec: &MeasureSpec,
    params: &ModelParams,
    horizon: f64,
    max_modes: &[usize],
    n_samples: usize,
    s: f64,
) -> Result<Vec<SmoothingRow>> {
    let top = max_modes.iter().copied().max().unwrap_or(spec.max_mode);
    let draw = MeasureSpec {
        max_mode: top,
        ..spec.clone()
    };
    max_modes
        .iter()
        .map(|&n| {
            let p = params.with_max_mode(n);
            let ratios: Vec<f64> = (0..n_samples as u64)
                .into_par_iter()
                .map(|i| -> Result<f64> {
                    let u0 = sample_mu_alpha(&draw, i).resized(n);
                    let form = nonresonant_form(&u0, horizon, spec.alpha, &p, FormPath::Fft)?;
                    Ok(form.abs() / sobolev_norm(&u0, s).powi(3))
                })
                .collect::<Result<_>>()?;
            Ok(SmoothingRow {
                max_mode: n,
                median_ratio: median(&ratios),
                max_ratio: ratios.iter().cloned().fold(0.0, f64::max),
            })
        })
        .collect()
}
