//! Band-limited complex fields on `T = [0, 2π)` stored as Fourier modes.
//!
//! The convention is `u(x) = (2π)^{−1/2} Σ_{|k|≤N} û(k) e^{ikx}`, hence
//! `‖u‖²_{L²} = Σ |û(k)|²` exactly.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Default oversampling factor for grid quadratures of `|u|^p`.
pub const LP_OVERSAMPLE: usize = 4;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(len)
        } else {
            p.plan_fft_forward(len)
        }
    })
}

/// Bessel weight `⟨k⟩ = (1 + k²)^{1/2}` raised to `power`.
#[inline]
pub fn bessel_weight(k: i64, power: f64) -> f64 {
    (1.0 + (k * k) as f64).powf(0.5 * power)
}

/// Smallest grid size of the form `2^a·3^b` that is at least `min`.
pub fn fast_grid_size(min: usize) -> usize {
    let mut best = usize::MAX;
    let mut p3 = 1usize;
    while p3 < 2 * min.max(1) {
        let mut m = p3;
        while m < min {
            m *= 2;
        }
        best = best.min(m);
        p3 *= 3;
    }
    best
}

/// Complex field band-limited to `|k| ≤ N`, stored as `2N+1` modal
/// coefficients ordered `k = −N..=N`.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierState {
    max_mode: usize,
    coeffs: Vec<Complex64>,
}

impl FourierState {
    pub fn zeros(max_mode: usize) -> Self {
        Self {
            max_mode,
            coeffs: vec![Complex64::new(0.0, 0.0); 2 * max_mode + 1],
        }
    }

    /// Builds a state from coefficients ordered `k = −N..=N`.
    pub fn from_coeffs(max_mode: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        let expected = 2 * max_mode + 1;
        if coeffs.len() != expected {
            return Err(Error::LengthMismatch {
                max_mode,
                expected,
                actual: coeffs.len(),
            });
        }
        if let Some(c) = coeffs.iter().find(|c| !c.is_finite()) {
            return Err(Error::NonFinite(format!("coefficient {c}")));
        }
        Ok(Self { max_mode, coeffs })
    }

    /// State with a single nonzero mode `û(k) = c`.
    pub fn single_mode(max_mode: usize, k: i64, c: Complex64) -> Self {
        let mut s = Self::zeros(max_mode);
        s.set_mode(k, c);
        s
    }

    #[inline]
    pub fn max_mode(&self) -> usize {
        self.max_mode
    }

    #[inline]
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    #[inline]
    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    /// Coefficient of mode `k`; zero outside the band.
    #[inline]
    pub fn mode(&self, k: i64) -> Complex64 {
        let n = self.max_mode as i64;
        if k.abs() > n {
            Complex64::new(0.0, 0.0)
        } else {
            self.coeffs[(k + n) as usize]
        }
    }

    /// Sets mode `k`. Panics if `|k| > N`.
    pub fn set_mode(&mut self, k: i64, c: Complex64) {
        let n = self.max_mode as i64;
        assert!(k.abs() <= n, "mode {k} outside band |k| <= {n}");
        self.coeffs[(k + n) as usize] = c;
    }

    /// Iterates `(k, û(k))` for `k = −N..=N`.
    pub fn modes(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        let n = self.max_mode as i64;
        self.coeffs.iter().enumerate().map(move |(i, &c)| (i as i64 - n, c))
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    /// Applies `f(k, û(k))` to every mode.
    pub fn map_modes(&self, mut f: impl FnMut(i64, Complex64) -> Complex64) -> Self {
        let n = self.max_mode as i64;
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, &c)| f(i as i64 - n, c))
            .collect();
        Self {
            max_mode: self.max_mode,
            coeffs,
        }
    }

    pub fn scale(&self, z: Complex64) -> Self {
        self.map_modes(|_, c| c * z)
    }

    /// Same field embedded in (or truncated to) band limit `max_mode`.
    pub fn resized(&self, max_mode: usize) -> Self {
        let mut out = Self::zeros(max_mode);
        let m = self.max_mode.min(max_mode) as i64;
        for k in -m..=m {
            out.set_mode(k, self.mode(k));
        }
        out
    }

    /// `self + z·other`; both must share the band limit.
    pub fn axpy(&self, z: Complex64, other: &Self) -> Self {
        debug_assert_eq!(self.max_mode, other.max_mode);
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(&a, &b)| a + z * b)
            .collect();
        Self {
            max_mode: self.max_mode,
            coeffs,
        }
    }

    /// Largest modal distance `max_k |û(k) − v̂(k)|` after zero-padding.
    pub fn max_mode_distance(&self, other: &Self) -> f64 {
        let n = self.max_mode.max(other.max_mode) as i64;
        (-n..=n)
            .map(|k| (self.mode(k) - other.mode(k)).norm())
            .fold(0.0, f64::max)
    }

    /// `‖u‖_{L²}`.
    pub fn l2_norm(&self) -> f64 {
        sobolev_norm(self, 0.0)
    }

    /// Flattens to real coordinates `(Re û(−N..N), Im û(−N..N))`.
    pub fn to_real_coords(&self) -> Vec<f64> {
        self.coeffs
            .iter()
            .map(|c| c.re)
            .chain(self.coeffs.iter().map(|c| c.im))
            .collect()
    }

    /// Inverse of [`FourierState::to_real_coords`].
    pub fn from_real_coords(max_mode: usize, x: &[f64]) -> Result<Self> {
        let len = 2 * max_mode + 1;
        if x.len() != 2 * len {
            return Err(Error::LengthMismatch {
                max_mode,
                expected: 2 * len,
                actual: x.len(),
            });
        }
        let coeffs = (0..len).map(|i| Complex64::new(x[i], x[len + i])).collect();
        Self::from_coeffs(max_mode, coeffs)
    }
}

/// Evaluates `u(x_j)`, `x_j = 2πj/grid_size`.
pub fn synthesize(state: &FourierState, grid_size: usize) -> Result<Vec<Complex64>> {
    let n = state.max_mode;
    let required = 2 * n + 1;
    if grid_size < required {
        return Err(Error::GridTooSmall {
            grid: grid_size,
            max_mode: n,
            required,
        });
    }
    let mut buf = vec![Complex64::new(0.0, 0.0); grid_size];
    for (k, c) in state.modes() {
        buf[k.rem_euclid(grid_size as i64) as usize] = c;
    }
    plan(grid_size, true).process(&mut buf);
    let norm = (2.0 * PI).sqrt().recip();
    buf.iter_mut().for_each(|z| *z *= norm);
    Ok(buf)
}

/// Discrete forward transform of uniform grid samples, keeping `|k| ≤ max_mode`.
///
/// Exact for samples of fields band-limited to `max_mode`.
pub fn analyze(samples: &[Complex64], max_mode: usize) -> Result<FourierState> {
    let m = samples.len();
    let required = 2 * max_mode + 1;
    if m < required {
        return Err(Error::LengthMismatch {
            max_mode,
            expected: required,
            actual: m,
        });
    }
    let mut buf = samples.to_vec();
    plan(m, false).process(&mut buf);
    let norm = (2.0 * PI).sqrt() / m as f64;
    let n = max_mode as i64;
    let coeffs = (-n..=n).map(|k| buf[k.rem_euclid(m as i64) as usize] * norm).collect();
    FourierState::from_coeffs(max_mode, coeffs)
}

/// `P_N`: zeroes modes with `|k| > n` (the band limit is kept).
pub fn project(state: &FourierState, n: usize) -> FourierState {
    let n = n as i64;
    state.map_modes(|k, c| if k.abs() > n { Complex64::new(0.0, 0.0) } else { c })
}

/// Fourier multiplier `⟨k⟩^power`, i.e. `D^power` with `D = (1 − ∂ₓ²)^{1/2}`.
pub fn apply_bessel_power(state: &FourierState, power: f64) -> FourierState {
    state.map_modes(|k, c| c * bessel_weight(k, power))
}

/// `‖u‖_{H^s} = (Σ ⟨k⟩^{2s} |û(k)|²)^{1/2}`.
pub fn sobolev_norm(state: &FourierState, s: f64) -> f64 {
    sobolev_norm_sq(state, s).sqrt()
}

pub fn sobolev_norm_sq(state: &FourierState, s: f64) -> f64 {
    state
        .modes()
        .map(|(k, c)| bessel_weight(k, 2.0 * s) * c.norm_sqr())
        .sum()
}

/// `‖u‖_{L^p}` by the trapezoidal rule on `oversample·(2N+1)` points.
pub fn lp_norm(state: &FourierState, p: f64, oversample: usize) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidArgument(format!("L^p norm needs p >= 1, got {p}")));
    }
    if oversample == 0 {
        return Err(Error::InvalidArgument("oversample must be positive".into()));
    }
    let m = oversample * (2 * state.max_mode + 1);
    let samples = synthesize(state, m)?;
    let h = 2.0 * PI / m as f64;
    let integral: f64 = if p == 2.0 {
        samples.iter().map(|z| z.norm_sqr()).sum::<f64>() * h
    } else {
        samples.iter().map(|z| z.norm().powf(p)).sum::<f64>() * h
    };
    Ok(integral.powf(1.0 / p))
}

/// Dyadic block of mode `k`: 0 for `|k| ≤ 1`, otherwise the `j` with
/// `2^{j−1} < |k| ≤ 2^j`.
pub fn dyadic_block(k: i64) -> u32 {
    let a = k.unsigned_abs();
    if a <= 1 {
        0
    } else {
        64 - (a - 1).leading_zeros()
    }
}

/// Sharp dyadic block `Δ_j u`.
pub fn dyadic_piece(state: &FourierState, j: u32) -> FourierState {
    state.map_modes(|k, c| {
        if dyadic_block(k) == j {
            c
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

/// `‖u‖_{B^s_{p,p}} = (Σ_j 2^{jsp} ‖Δ_j u‖^p_{L^p})^{1/p}` with sharp blocks.
pub fn besov_norm(state: &FourierState, s: f64, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidArgument(format!("Besov norm needs p >= 1, got {p}")));
    }
    let top = dyadic_block(state.max_mode as i64);
    let mut acc = 0.0;
    for j in 0..=top {
        let piece = dyadic_piece(state, j);
        if piece.coeffs.iter().all(|c| *c == Complex64::new(0.0, 0.0)) {
            continue;
        }
        let lp = lp_norm(&piece, p, LP_OVERSAMPLE)?;
        acc += 2f64.powf(j as f64 * s * p) * lp.powf(p);
    }
    Ok(acc.powf(1.0 / p))
}

/// Real `L²` pairing `Re Σ_k â(k) conj(b̂(k))`, zero-padding the shorter state.
pub fn real_inner(a: &FourierState, b: &FourierState) -> f64 {
    let n = a.max_mode.min(b.max_mode) as i64;
    (-n..=n).map(|k| (a.mode(k) * b.mode(k).conj()).re).sum()
}

/// Frequency quadruple `k = k1 − k2 + k3` of the cubic interaction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PhaseTriple {
    pub k1: i64,
    pub k2: i64,
    pub k3: i64,
}

impl PhaseTriple {
    pub fn new(k1: i64, k2: i64, k3: i64) -> Self {
        Self { k1, k2, k3 }
    }

    #[inline]
    pub fn k(&self) -> i64 {
        self.k1 - self.k2 + self.k3
    }

    /// `(k1 − k2)(−k2 + k3) ≠ 0`.
    #[inline]
    pub fn is_nonresonant(&self) -> bool {
        self.k1 != self.k2 && self.k3 != self.k2
    }
}

/// Linear dispersion relation `ω(k) = k³ − βk²`.
#[inline]
pub fn dispersion(k: i64, beta: f64) -> f64 {
    let kf = k as f64;
    kf * kf * (kf - beta)
}

/// Phase function in factored form `3(k1 − k2)(−k2 + k3)(k3 + k1 − 2β/3)`.
pub fn phase_function(triple: PhaseTriple, beta: f64) -> f64 {
    let PhaseTriple { k1, k2, k3 } = triple;
    3.0 * ((k1 - k2) * (k3 - k2)) as f64 * ((k3 + k1) as f64 - 2.0 * beta / 3.0)
}

/// Phase function in expanded form `ω(k) − ω(k1) + ω(k2) − ω(k3)`.
pub fn phase_function_expanded(triple: PhaseTriple, beta: f64) -> f64 {
    let PhaseTriple { k1, k2, k3 } = triple;
    let k = triple.k();
    let cubes = (k.pow(3) - k1.pow(3) + k2.pow(3) - k3.pow(3)) as f64;
    let squares = (k * k - k1 * k1 + k2 * k2 - k3 * k3) as f64;
    cubes - beta * squares
}

/// `6Φ` in exact integer arithmetic from the factored form; `six_beta = 6β`.
pub fn six_phase_factored(triple: PhaseTriple, six_beta: i64) -> i128 {
    let PhaseTriple { k1, k2, k3 } = triple;
    let a = (k1 - k2) as i128;
    let b = (k3 - k2) as i128;
    a * b * (18 * (k1 + k3) as i128 - 2 * six_beta as i128)
}

/// `6Φ` in exact integer arithmetic from the expanded form; `six_beta = 6β`.
pub fn six_phase_expanded(triple: PhaseTriple, six_beta: i64) -> i128 {
    let PhaseTriple { k1, k2, k3 } = triple;
    let (k, k1, k2, k3) = (triple.k() as i128, k1 as i128, k2 as i128, k3 as i128);
    let cubes = k.pow(3) - k1.pow(3) + k2.pow(3) - k3.pow(3);
    let squares = k * k - k1 * k1 + k2 * k2 - k3 * k3;
    6 * cubes - six_beta as i128 * squares
}

/// Non-resonance condition: `2β/3` is not a nonzero integer (to within 1e−12).
pub fn check_nonresonance(beta: f64) -> bool {
    let x = 2.0 * beta / 3.0;
    let r = x.round();
    !((x - r).abs() <= 1e-12 && r != 0.0)
}
