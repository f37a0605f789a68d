//! Integration of the truncated system
//! `∂ₜu = −i(i∂ₓ³ + β∂ₓ²)u − i P_N(|u|²u)`.
//!
//! Mode `k` of the linear part rotates as `e^{−iω(k)t}` with
//! `ω(k) = k³ − βk²`. Steppers are fourth-order integrating-factor
//! Runge–Kutta schemes in the interaction variable `v̂(t,k) = e^{iω(k)t} û(t,k)`,
//! so the stiff dispersion is integrated exactly and only the cubic term is
//! discretized. Cubic products are formed on a zero-padded grid of at least
//! `4N+2` points, which makes them alias-free.
//!
//! The default scheme is two-stage Gauss–Legendre collocation. It conserves
//! every quadratic invariant of the interaction-picture system exactly, in
//! particular `‖u‖_{L²}` and `½‖u‖²_{H^α} + ∫ e dt` when `e` is integrated with
//! the collocation quadrature at the stage states, and its step map is
//! symplectic and symmetric. The classic explicit RK4 is kept as an option.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{self, dispersion, fast_grid_size, sobolev_norm, FourierState};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const NEG_I: Complex64 = Complex64::new(0.0, -1.0);

/// Collocation nodes `½ ∓ √3/6` of the Gauss–Legendre scheme; both weights are `½`.
pub const GAUSS_NODES: [f64; 2] = [0.5 - 0.288_675_134_594_812_9, 0.5 + 0.288_675_134_594_812_9];
const GAUSS_OFF_DIAGONAL: [f64; 2] = [0.25 - 0.288_675_134_594_812_9, 0.25 + 0.288_675_134_594_812_9];
/// Iteration cap for the implicit stage equations.
const MAX_STAGE_ITERATIONS: usize = 60;

/// Time-stepping scheme.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Two-stage Gauss–Legendre collocation, solved by fixed-point iteration.
    #[default]
    GaussLegendre,
    /// Classic explicit four-stage Runge–Kutta.
    Rk4,
}

/// Parameters of the truncated dynamical system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Coefficient `β` of the second-order dispersion.
    pub beta: f64,
    /// Truncation `N`.
    pub max_mode: usize,
    /// Time step `h > 0`.
    pub step: f64,
    /// Grid size for the cubic products, at least `4N+2`.
    pub grid_size: usize,
    /// When false, the cubic term is switched off and the flow is linear.
    #[serde(default = "default_true")]
    pub nonlinear: bool,
    #[serde(default)]
    pub scheme: Scheme,
}

fn default_true() -> bool {
    true
}

/// Minimum alias-free grid for cubic products of modes `|k| ≤ N`.
pub fn alias_free_grid(max_mode: usize) -> usize {
    4 * max_mode + 2
}

impl ModelParams {
    /// Parameters with the smallest `2^a 3^b` grid above the alias-free threshold.
    pub fn new(beta: f64, max_mode: usize, step: f64) -> Self {
        Self {
            beta,
            max_mode,
            step,
            grid_size: fast_grid_size(alias_free_grid(max_mode)),
            nonlinear: true,
            scheme: Scheme::default(),
        }
    }

    pub fn with_scheme(&self, scheme: Scheme) -> Self {
        Self { scheme, ..self.clone() }
    }

    pub fn linear(mut self) -> Self {
        self.nonlinear = false;
        self
    }

    pub fn with_step(&self, step: f64) -> Self {
        Self { step, ..self.clone() }
    }

    /// Same model at another truncation, with a matching grid.
    pub fn with_max_mode(&self, max_mode: usize) -> Self {
        Self {
            max_mode,
            grid_size: fast_grid_size(alias_free_grid(max_mode)),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.beta.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "beta must be finite, got {}",
                self.beta
            )));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "step must be positive, got {}",
                self.step
            )));
        }
        let required = alias_free_grid(self.max_mode);
        if self.grid_size < required {
            return Err(Error::GridTooSmall {
                grid: self.grid_size,
                max_mode: self.max_mode,
                required,
            });
        }
        Ok(())
    }
}

/// Exact linear flow: multiplies mode `k` by `e^{−i(k³−βk²)t}`.
pub fn linear_propagator(state: &FourierState, t: f64, beta: f64) -> FourierState {
    state.map_modes(|k, c| c * Complex64::from_polar(1.0, -dispersion(k, beta) * t))
}

/// `P_N(|u|²u)` formed on `grid_size` points. Aliased unless `grid_size ≥ 4N+1`.
pub fn cubic_term_on_grid(state: &FourierState, grid_size: usize) -> Result<FourierState> {
    let mut samples = fourier::synthesize(state, grid_size)?;
    samples.iter_mut().for_each(|z| *z *= z.norm_sqr());
    fourier::analyze(&samples, state.max_mode())
}

/// `P_N(|u|²u)` by the direct triple convolution
/// `(2π)^{−1} Σ_{k1−k2+k3=k} û(k1) conj(û(k2)) û(k3)`.
pub fn cubic_term_direct(state: &FourierState) -> FourierState {
    let n = state.max_mode() as i64;
    let scale = 1.0 / (2.0 * PI);
    let mut out = FourierState::zeros(state.max_mode());
    for k in -n..=n {
        let mut acc = ZERO;
        for k1 in -n..=n {
            let a = state.mode(k1);
            for k3 in -n..=n {
                let k2 = k1 + k3 - k;
                if k2.abs() > n {
                    continue;
                }
                acc += a * state.mode(k2).conj() * state.mode(k3);
            }
        }
        out.set_mode(k, acc * scale);
    }
    out
}

/// `−i P_N(|u|²u)` computed alias-free on the padded grid.
pub fn nonlinearity(state: &FourierState, params: &ModelParams) -> Result<FourierState> {
    check_band(state, params)?;
    let required = alias_free_grid(params.max_mode);
    if params.grid_size < required {
        return Err(Error::GridTooSmall {
            grid: params.grid_size,
            max_mode: params.max_mode,
            required,
        });
    }
    Ok(cubic_term_on_grid(state, params.grid_size)?.scale(NEG_I))
}

/// Full vector field `−iω(k)û(k) − i P_N(|u|²u)`.
pub fn vector_field(state: &FourierState, params: &ModelParams) -> Result<FourierState> {
    let linear = state.map_modes(|k, c| NEG_I * dispersion(k, params.beta) * c);
    if !params.nonlinear {
        return Ok(linear);
    }
    let cubic = nonlinearity(state, params)?;
    Ok(linear.axpy(Complex64::new(1.0, 0.0), &cubic))
}

fn check_band(state: &FourierState, params: &ModelParams) -> Result<()> {
    if state.max_mode() != params.max_mode {
        return Err(Error::InvalidArgument(format!(
            "state has band limit {} but the model truncates at N={}",
            state.max_mode(),
            params.max_mode
        )));
    }
    Ok(())
}

/// Reusable integrating-factor stepper for a fixed model, scheme and step.
///
/// Besides the state it can carry tangent vectors `δu` that follow the
/// linearized equation `∂ₜδu = −iωδu − i P_N(2|u|²δu + u² conj δu)`.
pub struct Stepper {
    params: ModelParams,
    h: f64,
    half: Vec<Complex64>,
    full: Vec<Complex64>,
    /// `e^{−iωc_j h}` at the two collocation nodes.
    node: [Vec<Complex64>; 2],
    /// `e^{−iω(c_2 − c_1)h}`.
    node_gap: Vec<Complex64>,
    stage: [Vec<Complex64>; 2],
    slope: [Vec<Complex64>; 2],
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    grid_u: Vec<Complex64>,
    grid_w: Vec<Complex64>,
}

impl Stepper {
    pub fn new(params: &ModelParams, h: f64) -> Result<Self> {
        params.validate()?;
        if !(h != 0.0 && h.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "step must be nonzero and finite, got {h}"
            )));
        }
        let n = params.max_mode as i64;
        let half: Vec<_> = (-n..=n)
            .map(|k| Complex64::from_polar(1.0, -dispersion(k, params.beta) * h / 2.0))
            .collect();
        let full = half.iter().map(|e| e * e).collect();
        let propagator = |tau: f64| -> Vec<Complex64> {
            (-n..=n)
                .map(|k| Complex64::from_polar(1.0, -dispersion(k, params.beta) * tau))
                .collect()
        };
        let node = [propagator(GAUSS_NODES[0] * h), propagator(GAUSS_NODES[1] * h)];
        let node_gap = propagator((GAUSS_NODES[1] - GAUSS_NODES[0]) * h);
        let mut planner = FftPlanner::new();
        let m = params.grid_size;
        let forward = planner.plan_fft_forward(m);
        let inverse = planner.plan_fft_inverse(m);
        let scratch_len = forward.get_inplace_scratch_len().max(inverse.get_inplace_scratch_len());
        Ok(Self {
            params: params.clone(),
            h,
            half,
            full,
            node,
            node_gap,
            stage: [Vec::new(), Vec::new()],
            slope: [Vec::new(), Vec::new()],
            forward,
            inverse,
            scratch: vec![ZERO; scratch_len],
            grid_u: vec![ZERO; m],
            grid_w: vec![ZERO; m],
        })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    fn load_grid(&mut self, modes: &[Complex64], which: Grid) {
        let m = self.params.grid_size;
        let n = self.params.max_mode as i64;
        let buf = match which {
            Grid::U => &mut self.grid_u,
            Grid::W => &mut self.grid_w,
        };
        buf.iter_mut().for_each(|z| *z = ZERO);
        for (i, &c) in modes.iter().enumerate() {
            buf[(i as i64 - n).rem_euclid(m as i64) as usize] = c;
        }
        self.inverse.process_with_scratch(buf, &mut self.scratch);
    }

    /// Forward transform of `grid_w`, keeping `|k| ≤ N`, times `−i·scale`.
    fn read_grid_w(&mut self, out: &mut [Complex64], scale: f64) {
        let m = self.params.grid_size;
        let n = self.params.max_mode as i64;
        self.forward.process_with_scratch(&mut self.grid_w, &mut self.scratch);
        for (i, o) in out.iter_mut().enumerate() {
            *o = NEG_I * scale * self.grid_w[(i as i64 - n).rem_euclid(m as i64) as usize];
        }
    }

    /// Right-hand side of the interaction-picture system without the linear
    /// part: block 0 is `−iP_N(|u|²u)`, block `j ≥ 1` its linearization at `u`.
    fn rhs(&mut self, y: &[Complex64], out: &mut [Complex64]) {
        let len = 2 * self.params.max_mode + 1;
        if !self.params.nonlinear {
            out.iter_mut().for_each(|z| *z = ZERO);
            return;
        }
        let m = self.params.grid_size as f64;
        // Unnormalized inverse FFT gives √(2π)·u(x_j); the cubic term then
        // carries (2π)^{−3/2} and the forward transform √(2π)/m.
        let cubic_scale = 1.0 / (2.0 * PI * m);
        self.load_grid(&y[..len], Grid::U);
        for (w, u) in self.grid_w.iter_mut().zip(&self.grid_u) {
            *w = u * u.norm_sqr();
        }
        self.read_grid_w(&mut out[..len], cubic_scale);
        for block in 1..y.len() / len {
            let range = block * len..(block + 1) * len;
            self.load_grid(&y[range.clone()], Grid::W);
            for (w, u) in self.grid_w.iter_mut().zip(&self.grid_u) {
                *w = 2.0 * u.norm_sqr() * *w + u * u * w.conj();
            }
            self.read_grid_w(&mut out[range], cubic_scale);
        }
    }

    /// Nonlinear part of the augmented field (no dispersion): `−iP_N(|u|²u)`
    /// in block 0 and its linearization applied to each further block.
    pub fn nonlinear_field(&mut self, y: &[Complex64], out: &mut [Complex64]) {
        self.rhs(y, out);
    }

    /// Advances the augmented vector `[u, δu_1, …, δu_m]` by one step in place.
    pub fn advance(&mut self, y: &mut [Complex64]) -> Result<()> {
        self.advance_with_stages(y, None)
    }

    /// As [`Stepper::advance`]; for the Gauss–Legendre scheme also copies the
    /// stage values of `u` (at `t + c_j h`) into `stages`.
    pub fn advance_with_stages(&mut self, y: &mut [Complex64], stages: Option<&mut [Vec<Complex64>; 2]>) -> Result<()> {
        debug_assert_eq!(y.len() % (2 * self.params.max_mode + 1), 0);
        match self.params.scheme {
            Scheme::Rk4 => {
                self.advance_rk4(y);
                Ok(())
            }
            Scheme::GaussLegendre => self.advance_gauss(y, stages),
        }
    }

    fn advance_rk4(&mut self, y: &mut [Complex64]) {
        let len = 2 * self.params.max_mode + 1;
        let h = self.h;
        let total = y.len();
        let mut k1 = vec![ZERO; total];
        let mut k2 = vec![ZERO; total];
        let mut k3 = vec![ZERO; total];
        let mut k4 = vec![ZERO; total];
        let mut stage = vec![ZERO; total];

        self.rhs(y, &mut k1);
        for i in 0..total {
            stage[i] = self.half[i % len] * (y[i] + 0.5 * h * k1[i]);
        }
        self.rhs(&stage, &mut k2);
        for i in 0..total {
            stage[i] = self.half[i % len] * y[i] + 0.5 * h * k2[i];
        }
        self.rhs(&stage, &mut k3);
        for i in 0..total {
            stage[i] = self.full[i % len] * y[i] + h * self.half[i % len] * k3[i];
        }
        self.rhs(&stage, &mut k4);
        for i in 0..total {
            let e = self.half[i % len];
            let e2 = self.full[i % len];
            y[i] = e2 * y[i] + h / 6.0 * (e2 * k1[i] + 2.0 * e * (k2[i] + k3[i]) + k4[i]);
        }
    }

    /// Stage equations in physical variables `U_j = E(c_j h)u + h Σ_l a_jl E((c_j − c_l)h) F(U_l)`,
    /// with `E(τ) = e^{−iωτ}`, solved by fixed-point iteration.
    fn advance_gauss(&mut self, y: &mut [Complex64], stages: Option<&mut [Vec<Complex64>; 2]>) -> Result<()> {
        let len = 2 * self.params.max_mode + 1;
        let total = y.len();
        let h = self.h;
        let [a_diag, a12, a21] = [0.25, GAUSS_OFF_DIAGONAL[0], GAUSS_OFF_DIAGONAL[1]];
        let mut stage = std::mem::take(&mut self.stage);
        let mut slope = std::mem::take(&mut self.slope);
        for j in 0..2 {
            stage[j].clear();
            stage[j].extend(y.iter().enumerate().map(|(i, v)| self.node[j][i % len] * v));
            slope[j].resize(total, ZERO);
            self.rhs(&stage[j], &mut slope[j]);
        }
        let scale = y.iter().map(|z| z.norm()).fold(f64::MIN_POSITIVE, f64::max);
        let mut previous = f64::INFINITY;
        let mut converged = false;
        for iteration in 0..MAX_STAGE_ITERATIONS {
            let mut delta: f64 = 0.0;
            for i in 0..total {
                let m = i % len;
                let gap = self.node_gap[m];
                let s0 = self.node[0][m] * y[i] + h * (a_diag * slope[0][i] + a12 * gap.conj() * slope[1][i]);
                let s1 = self.node[1][m] * y[i] + h * (a21 * gap * slope[0][i] + a_diag * slope[1][i]);
                let change = (s0 - stage[0][i]).norm().max((s1 - stage[1][i]).norm());
                delta = if change.is_nan() {
                    f64::INFINITY
                } else {
                    delta.max(change)
                };
                stage[0][i] = s0;
                stage[1][i] = s1;
            }
            for j in 0..2 {
                self.rhs(&stage[j], &mut slope[j]);
            }
            if delta <= 2.0 * f64::EPSILON * scale || (iteration >= 2 && delta >= previous && delta <= 1e-10 * scale) {
                converged = true;
                break;
            }
            if !delta.is_finite() {
                break;
            }
            previous = delta;
        }
        if converged {
            // E((1 − c_1)h) = E(c_2 h) and vice versa.
            for i in 0..total {
                let m = i % len;
                y[i] = self.full[m] * y[i] + 0.5 * h * (self.node[1][m] * slope[0][i] + self.node[0][m] * slope[1][i]);
            }
            if let Some(out) = stages {
                for j in 0..2 {
                    out[j].clear();
                    out[j].extend_from_slice(&stage[j][..len]);
                }
            }
        }
        self.stage = stage;
        self.slope = slope;
        if converged {
            Ok(())
        } else {
            Err(Error::NoConvergence(format!(
                "step {} after {MAX_STAGE_ITERATIONS} iterations; reduce the step",
                self.h
            )))
        }
    }

    pub fn step(&mut self, state: &FourierState) -> Result<FourierState> {
        check_band(state, &self.params)?;
        if !state.is_finite() {
            return Err(Error::NonFinite("state passed to step".into()));
        }
        let mut y = state.coeffs().to_vec();
        self.advance(&mut y)?;
        if y.iter().any(|z| !z.is_finite()) {
            return Err(Error::NonFinite(format!("state after a step of size {}", self.h)));
        }
        FourierState::from_coeffs(self.params.max_mode, y)
    }
}

#[derive(Clone, Copy)]
enum Grid {
    U,
    W,
}

/// One integrating-factor step of size `h` (negative `h` steps backward).
pub fn step(state: &FourierState, h: f64, params: &ModelParams) -> Result<FourierState> {
    Stepper::new(params, h)?.step(state)
}

/// Solution samples on the uniform time grid `0, ±h, ±2h, …`.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<FourierState>,
    pub params: ModelParams,
    /// For recorded Gauss–Legendre runs, the stage values of step `n` at
    /// times `times[n] + c_j h` with `c_j` from [`GAUSS_NODES`]; empty otherwise.
    pub stages: Vec<[FourierState; 2]>,
}

impl Trajectory {
    pub fn first(&self) -> &FourierState {
        &self.states[0]
    }

    pub fn last(&self) -> &FourierState {
        self.states.last().expect("trajectory is never empty")
    }

    pub fn into_last(mut self) -> FourierState {
        self.states.pop().expect("trajectory is never empty")
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Largest relative deviation of `‖u(t)‖_{L²}` from `‖u(0)‖_{L²}`.
    pub fn l2_drift(&self) -> f64 {
        let n0 = self.first().l2_norm();
        if n0 == 0.0 {
            return self.states.iter().map(|s| s.l2_norm()).fold(0.0, f64::max);
        }
        self.states
            .iter()
            .map(|s| (s.l2_norm() - n0).abs() / n0)
            .fold(0.0, f64::max)
    }
}

/// Number of steps of size `step` in `|t|`, which must be an integer to 1e−9.
pub fn step_count(t: f64, step: f64) -> Result<usize> {
    if !t.is_finite() || !(step > 0.0) {
        return Err(Error::InvalidArgument(format!("invalid time {t} or step {step}")));
    }
    let ratio = t.abs() / step;
    let n = ratio.round();
    if (ratio - n).abs() > 1e-9 {
        return Err(Error::StepDoesNotDivide {
            t,
            step,
            requirement: "an integer number of",
        });
    }
    Ok(n as usize)
}

/// Integrates from `P_N u0` at time 0 to time `t` (either sign) with steps of
/// size `params.step`. With `record` all intermediate states are kept,
/// otherwise only the endpoints.
pub fn evolve(u0: &FourierState, t: f64, params: &ModelParams, record: bool) -> Result<Trajectory> {
    params.validate()?;
    let steps = step_count(t, params.step)?;
    let h = if t < 0.0 { -params.step } else { params.step };
    let start = u0.resized(params.max_mode);
    if !start.is_finite() {
        return Err(Error::NonFinite("initial state".into()));
    }
    let mut times = vec![0.0];
    let mut states = vec![start.clone()];
    if steps == 0 {
        return Ok(Trajectory {
            times,
            states,
            params: params.clone(),
            stages: Vec::new(),
        });
    }
    let keep_stages = record && params.scheme == Scheme::GaussLegendre;
    let mut stepper = Stepper::new(params, h)?;
    let mut y = start.into_coeffs();
    let mut stage_buf = [Vec::new(), Vec::new()];
    let mut stages = Vec::new();
    for i in 1..=steps {
        stepper
            .advance_with_stages(&mut y, keep_stages.then_some(&mut stage_buf))
            .map_err(|e| match e {
                Error::NoConvergence(msg) => Error::NoConvergence(format!("{msg} (t = {})", (i - 1) as f64 * h)),
                other => other,
            })?;
        if y.iter().any(|z| !z.is_finite()) {
            return Err(Error::NonFinite(format!("solution blew up at t = {}", i as f64 * h)));
        }
        if keep_stages {
            stages.push([
                FourierState::from_coeffs(params.max_mode, stage_buf[0].clone())?,
                FourierState::from_coeffs(params.max_mode, stage_buf[1].clone())?,
            ]);
        }
        if record || i == steps {
            times.push(i as f64 * h);
            states.push(FourierState::from_coeffs(params.max_mode, y.clone())?);
        }
    }
    Ok(Trajectory {
        times,
        states,
        params: params.clone(),
        stages,
    })
}

/// Closed-form solution for single-mode data `û(k, 0) = c`:
/// `û(k, t) = c·e^{−i(k³ − βk² + |c|²/(2π))t}`, all other modes zero.
pub fn exact_single_mode(c: Complex64, k: i64, t: f64, beta: f64, max_mode: usize) -> FourierState {
    let phase = -(dispersion(k, beta) + c.norm_sqr() / (2.0 * PI)) * t;
    FourierState::single_mode(max_mode, k, c * Complex64::from_polar(1.0, phase))
}

/// Step-halving and resolution-doubling errors for one initial datum.
#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceReport {
    pub sobolev_indices: Vec<f64>,
    /// `‖u_h(t) − u_{h/2}(t)‖_{H^s}` per index.
    pub step_halving_error: Vec<f64>,
    /// `‖u_{h/2}(t) − u_{h/4}(t)‖_{H^s}` per index.
    pub step_quartering_error: Vec<f64>,
    /// `log₂` of the ratio of the two step errors in `L²`.
    pub observed_order: f64,
    /// `‖u_{2N}(t) − u_N(t)‖_{H^s}` per index.
    pub resolution_error: Vec<f64>,
}

pub fn self_convergence_report(
    u0: &FourierState,
    t: f64,
    params: &ModelParams,
    sobolev_indices: &[f64],
) -> Result<ConvergenceReport> {
    let coarse = evolve(u0, t, params, false)?.into_last();
    let mid = evolve(u0, t, &params.with_step(params.step / 2.0), false)?.into_last();
    let fine = evolve(u0, t, &params.with_step(params.step / 4.0), false)?.into_last();
    let doubled = params.with_max_mode(2 * params.max_mode);
    let wide = evolve(u0, t, &doubled, false)?.into_last();

    let diff = |a: &FourierState, b: &FourierState, s: f64| {
        let n = a.max_mode().max(b.max_mode());
        let d = a.resized(n).axpy(Complex64::new(-1.0, 0.0), &b.resized(n));
        sobolev_norm(&d, s)
    };
    let step_halving_error: Vec<_> = sobolev_indices.iter().map(|&s| diff(&coarse, &mid, s)).collect();
    let step_quartering_error: Vec<_> = sobolev_indices.iter().map(|&s| diff(&mid, &fine, s)).collect();
    let observed_order = (diff(&coarse, &mid, 0.0) / diff(&mid, &fine, 0.0)).log2();
    let resolution_error = sobolev_indices.iter().map(|&s| diff(&coarse, &wide, s)).collect();
    Ok(ConvergenceReport {
        sobolev_indices: sobolev_indices.to_vec(),
        step_halving_error,
        step_quartering_error,
        observed_order,
        resolution_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{sample_mu_alpha, MeasureSpec};
    use proptest::prelude::*;

    fn sample(n: usize, seed: u64) -> FourierState {
        sample_mu_alpha(&MeasureSpec::new(0.8, n, 10.0, seed).unwrap(), 0)
    }

    fn gap(a: &FourierState, b: &FourierState) -> f64 {
        a.max_mode_distance(b)
    }

    fn smooth(n: usize) -> FourierState {
        FourierState::zeros(n).map_modes(|k, _| Complex64::new(0.8, 0.2 * k as f64) * (-(k.abs() as f64) / 2.0).exp())
    }

    #[test]
    fn propagator_is_unitary_group() {
        let u = sample(16, 1);
        assert_eq!(linear_propagator(&u, 0.0, 0.5), u);
        let moved = linear_propagator(&u, 0.7, 0.5);
        for s in [0.0, 0.8] {
            assert!((sobolev_norm(&moved, s) - sobolev_norm(&u, s)).abs() <= 1e-13 * sobolev_norm(&u, s));
        }
        assert!(gap(&linear_propagator(&moved, -0.7, 0.5), &u) <= 1e-12);
        let composed = linear_propagator(&linear_propagator(&u, 0.3, 0.5), 0.4, 0.5);
        assert!(gap(&composed, &moved) <= 1e-12);
    }

    #[test]
    fn nonlinearity_cases() {
        let params = ModelParams::new(0.5, 8, 1e-3);
        assert_eq!(
            nonlinearity(&FourierState::zeros(8), &params).unwrap(),
            FourierState::zeros(8)
        );
        let c = Complex64::new(0.6, -1.3);
        let single = FourierState::single_mode(8, -3, c);
        let expected = FourierState::single_mode(8, -3, NEG_I * c.norm_sqr() / (2.0 * PI) * c);
        assert!(gap(&nonlinearity(&single, &params).unwrap(), &expected) <= 1e-14);
        for seed in 0..5 {
            let u = sample(8, seed);
            let fft = nonlinearity(&u, &params).unwrap();
            let direct = cubic_term_direct(&u).scale(NEG_I);
            let scale = direct.coeffs().iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert!(gap(&fft, &direct) <= 1e-12 * scale);
        }
        let small = ModelParams {
            grid_size: 33,
            ..params.clone()
        };
        assert!(matches!(
            nonlinearity(&single, &small),
            Err(Error::GridTooSmall { required: 34, .. })
        ));
        // An aliased grid visibly corrupts the cubic term.
        let u = sample(8, 0);
        let aliased = cubic_term_on_grid(&u, 17).unwrap();
        assert!(gap(&aliased, &cubic_term_direct(&u)) > 1e-3);
        assert!(nonlinearity(&FourierState::zeros(4), &params).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::new(0.5, 8, 0.0).validate().is_err());
        assert!(ModelParams::new(f64::NAN, 8, 1e-3).validate().is_err());
        assert_eq!(ModelParams::new(0.5, 8, 1e-3).grid_size, 36);
        assert_eq!(ModelParams::new(0.5, 8, 1e-3).with_max_mode(32).grid_size, 144);
        assert!(Stepper::new(&ModelParams::new(0.5, 8, 1e-3), 0.0).is_err());
    }

    #[test]
    fn step_basics() {
        for scheme in [Scheme::GaussLegendre, Scheme::Rk4] {
            let params = ModelParams::new(0.5, 16, 1e-3).with_scheme(scheme);
            let zero = FourierState::zeros(16);
            assert_eq!(step(&zero, 1e-3, &params).unwrap(), zero);
            let u = sample(16, 2);
            // Gauss–Legendre conserves the mass exactly, RK4 to O(h⁵).
            let tol = if scheme == Scheme::GaussLegendre { 1e-12 } else { 1e-8 };
            for h in [1e-3, -1e-3] {
                let next = step(&u, h, &params).unwrap();
                assert!((next.l2_norm() - u.l2_norm()).abs() <= tol * u.l2_norm(), "{scheme:?}");
            }
            let bad =
                FourierState::zeros(16).map_modes(|k, _| if k == 0 { Complex64::new(f64::NAN, 0.0) } else { ZERO });
            assert!(matches!(step(&bad, 1e-3, &params), Err(Error::NonFinite(_))));
        }
    }

    #[test]
    fn single_step_order() {
        let c = Complex64::new(1.5, 0.5);
        for scheme in [Scheme::GaussLegendre, Scheme::Rk4] {
            let params = ModelParams::new(0.5, 4, 1e-2).with_scheme(scheme);
            let u = FourierState::single_mode(4, 1, c);
            let err = |h: f64| gap(&step(&u, h, &params).unwrap(), &exact_single_mode(c, 1, h, 0.5, 4));
            let order = (err(0.1) / err(0.05)).log2() - 1.0;
            assert!(order >= 3.9, "{scheme:?}: local order {}", order + 1.0);
        }
    }

    #[test]
    fn stage_iteration_failure_is_reported() {
        let big = sample(4, 12).scale(Complex64::new(30.0, 0.0));
        let params = ModelParams::new(0.5, 4, 1.0);
        assert!(matches!(step(&big, 1.0, &params), Err(Error::NoConvergence(_))));
    }

    #[test]
    fn evolve_contract() {
        let params = ModelParams::new(0.5, 8, 1e-3);
        let u0 = sample(12, 3);
        let traj = evolve(&u0, 0.0, &params, true).unwrap();
        assert_eq!(traj.len(), 1);
        assert_eq!(traj.first(), &u0.resized(8));
        assert!(matches!(
            evolve(&u0, 0.0105, &params, false),
            Err(Error::StepDoesNotDivide { .. })
        ));

        let traj = evolve(&u0, -0.05, &params, true).unwrap();
        assert_eq!(traj.len(), 51);
        assert_eq!(traj.stages.len(), 50);
        for w in traj.times.windows(2) {
            assert!((w[0] - w[1] - 1e-3).abs() <= 1e-14);
        }
        assert!(traj.states.iter().all(|s| s.max_mode() == 8));
        assert!(traj.l2_drift() <= 1e-13);
        assert_eq!(evolve(&u0, 0.05, &params, false).unwrap().len(), 2);
        let rk4 = evolve(&u0, -0.05, &params.with_scheme(Scheme::Rk4), true).unwrap();
        assert!(rk4.stages.is_empty());
    }

    #[test]
    fn single_mode_flow() {
        let c = Complex64::from_polar(1.0, 0.3);
        let params = ModelParams::new(0.5, 8, 1e-3);
        let u0 = FourierState::single_mode(8, 1, c);
        let end = evolve(&u0, 1.0, &params, false).unwrap().into_last();
        let exact = exact_single_mode(c, 1, 1.0, 0.5, 8);
        assert!(gap(&end, &exact) <= 1e-8);
        let phase = (end.mode(1) / c).arg();
        assert!((phase - (-(1.0 - 0.5 + 1.0 / (2.0 * PI)))).abs() <= 1e-8);
    }

    #[test]
    fn exact_single_mode_closed_form() {
        let c = Complex64::new(0.3, -0.4);
        assert_eq!(exact_single_mode(c, 2, 0.0, 0.5, 4), FourierState::single_mode(4, 2, c));
        for t in [-3.0, 0.5, 11.0] {
            assert!((exact_single_mode(c, 2, t, 0.5, 4).mode(2).norm() - 0.5).abs() < 1e-15);
        }
        let u = exact_single_mode(Complex64::new(1.0, 0.0), 1, PI, 0.0, 2);
        let expected = Complex64::from_polar(1.0, -(1.0 + 1.0 / (2.0 * PI)) * PI);
        assert!((u.mode(1) - expected).norm() < 1e-14);
    }

    #[test]
    fn reversibility() {
        let params = ModelParams::new(0.5, 8, 1e-3);
        let u0 = sample(8, 4);
        let there = evolve(&u0, 0.5, &params, false).unwrap().into_last();
        let back = evolve(&there, -0.5, &params, false).unwrap().into_last();
        assert!(gap(&back, &u0) <= 1e-8);
    }

    #[test]
    fn l2_conservation() {
        let params = ModelParams::new(0.5, 32, 1e-3);
        let u0 = sample(32, 5);
        for t in [-1.0, 1.0] {
            assert!(evolve(&u0, t, &params, true).unwrap().l2_drift() <= 1e-8);
        }
    }

    #[test]
    fn gauge_covariance() {
        let params = ModelParams::new(0.5, 8, 1e-3);
        let u0 = sample(8, 6);
        let rot = Complex64::from_polar(1.0, 1.1);
        let a = evolve(&u0, 0.2, &params, false).unwrap().into_last().scale(rot);
        let b = evolve(&u0.scale(rot), 0.2, &params, false).unwrap().into_last();
        assert!(gap(&a, &b) <= 1e-12);
    }

    #[test]
    fn linear_problem_is_exact() {
        let params = ModelParams::new(0.5, 8, 1e-2).linear();
        let u0 = sample(8, 7);
        let rep = self_convergence_report(&u0, 0.5, &params, &[0.0, 0.8]).unwrap();
        assert!(rep.step_halving_error.iter().all(|&e| e <= 1e-13), "{rep:?}");
        let end = evolve(&u0, 0.5, &params, false).unwrap().into_last();
        assert!(gap(&end, &linear_propagator(&u0, 0.5, 0.5)) <= 1e-13);
    }

    #[test]
    fn temporal_order() {
        let u0 = sample(8, 8);
        for scheme in [Scheme::GaussLegendre, Scheme::Rk4] {
            let params = ModelParams::new(0.5, 8, 1e-2).with_scheme(scheme);
            let rep = self_convergence_report(&u0, 0.5, &params, &[0.0]).unwrap();
            assert!((3.5..=4.5).contains(&rep.observed_order), "{scheme:?}: {rep:?}");
        }
    }

    #[test]
    fn resolution_trend() {
        let u0 = smooth(64);
        let errors: Vec<f64> = [8, 16, 32]
            .iter()
            .map(|&n| {
                let params = ModelParams::new(0.5, n, 2e-3);
                self_convergence_report(&u0, 0.2, &params, &[0.5])
                    .unwrap()
                    .resolution_error[0]
            })
            .collect();
        assert!(errors.windows(2).all(|w| w[1] < w[0]), "{errors:?}");
    }

    #[test]
    fn schemes_agree() {
        let params = ModelParams::new(0.5, 8, 1e-3);
        let u0 = sample(8, 9);
        let a = evolve(&u0, 0.3, &params, false).unwrap().into_last();
        let b = evolve(&u0, 0.3, &params.with_scheme(Scheme::Rk4), false)
            .unwrap()
            .into_last();
        assert!(gap(&a, &b) <= 1e-5);
    }

    #[test]
    fn variational_tangent_matches_difference() {
        let params = ModelParams::new(0.5, 4, 1e-3);
        let u0 = sample(4, 10);
        let dir = sample(4, 11);
        let mut y = u0.coeffs().to_vec();
        y.extend_from_slice(dir.coeffs());
        let mut stepper = Stepper::new(&params, 1e-3).unwrap();
        for _ in 0..50 {
            stepper.advance(&mut y).unwrap();
        }
        let eps = 1e-6;
        let plus = evolve(&u0.axpy(Complex64::new(eps, 0.0), &dir), 0.05, &params, false)
            .unwrap()
            .into_last();
        let minus = evolve(&u0.axpy(Complex64::new(-eps, 0.0), &dir), 0.05, &params, false)
            .unwrap()
            .into_last();
        let fd = plus
            .axpy(Complex64::new(-1.0, 0.0), &minus)
            .scale(Complex64::new(0.5 / eps, 0.0));
        let tangent = FourierState::from_coeffs(4, y[9..].to_vec()).unwrap();
        assert!(gap(&fd, &tangent) <= 1e-7);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn mass_conserved_along_random_flows(seed in 0u64..1000, t in -0.2f64..0.2) {
            let params = ModelParams::new(0.5, 6, 1e-3);
            let t = (t / 1e-3).round() * 1e-3;
            let traj = evolve(&sample(6, seed), t, &params, true).unwrap();
            prop_assert!(traj.l2_drift() <= 1e-12);
        }
    }
}
