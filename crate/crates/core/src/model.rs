//! Mode grid, physical parameters, pulse envelopes and the mode <-> envelope
//! Fourier pair.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::C64;

/// Fraction of pulse energy allowed outside the mode bandwidth.
pub const LEAKAGE_LIMIT: f64 = 1e-4;

/// Gaussian pulses are truncated to zero beyond this many widths from the centre.
pub const GAUSSIAN_CUTOFF: f64 = 6.0;

/// Uniform sampling grid `start + i * dt`, `i = 0..len`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub start: f64,
    pub dt: f64,
    pub len: usize,
}

impl TimeGrid {
    pub fn new(start: f64, dt: f64, len: usize) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::invalid(format!("time step must be positive, got {dt}")));
        }
        if len == 0 {
            return Err(Error::invalid("time grid must contain at least one sample"));
        }
        Ok(Self { start, dt, len })
    }

    /// Grid from `start` to `end` inclusive. `end - start` is rounded to a
    /// whole number of steps.
    pub fn spanning(start: f64, end: f64, dt: f64) -> Result<Self> {
        if end < start {
            return Err(Error::invalid(format!("time grid end {end} precedes start {start}")));
        }
        let steps = ((end - start) / dt).round() as usize;
        Self::new(start, dt, steps + 1)
    }

    /// Smallest grid from `start` with step `dt` whose last sample reaches `end`.
    pub fn covering(start: f64, end: f64, dt: f64) -> Result<Self> {
        if end < start {
            return Err(Error::invalid(format!("time grid end {end} precedes start {start}")));
        }
        let steps = ((end - start) / dt - 1e-9).ceil().max(0.0) as usize;
        Self::new(start, dt, steps + 1)
    }

    #[inline]
    pub fn time(&self, i: usize) -> f64 {
        self.start + i as f64 * self.dt
    }

    pub fn end(&self) -> f64 {
        self.time(self.len - 1)
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len).map(move |i| self.time(i))
    }
}

/// Complex pulse amplitude sampled on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub grid: TimeGrid,
    pub values: Vec<C64>,
}

impl Envelope {
    pub fn new(grid: TimeGrid, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.len {
            return Err(Error::invalid(format!(
                "envelope has {} samples but grid has {}",
                values.len(),
                grid.len
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: TimeGrid) -> Self {
        Self { grid, values: vec![C64::new(0.0, 0.0); grid.len] }
    }

    /// `sum |f|^2 dt`
    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.dt
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn peak_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.grid.times()
    }

    /// Linear interpolation, zero outside the grid.
    pub fn sample(&self, t: f64) -> C64 {
        let x = (t - self.grid.start) / self.grid.dt;
        if x < -1e-9 || x > (self.grid.len - 1) as f64 + 1e-9 {
            return C64::new(0.0, 0.0);
        }
        let x = x.clamp(0.0, (self.grid.len - 1) as f64);
        let i = x.floor() as usize;
        if i + 1 >= self.grid.len {
            return self.values[self.grid.len - 1];
        }
        let frac = x - i as f64;
        self.values[i] * (1.0 - frac) + self.values[i + 1] * frac
    }

    pub fn scaled(&self, factor: C64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|v| v * factor).collect() }
    }

    /// Pointwise difference `self - other`; grids must coincide.
    pub fn sub(&self, other: &Envelope) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::invalid("envelopes are sampled on different grids"));
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(Self { grid: self.grid, values })
    }
}

/// Discretised waveguide continuum: `n_modes` equally spaced detunings on
/// `[center - bandwidth, center + bandwidth)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeGrid {
    pub n_modes: usize,
    pub bandwidth: f64,
    pub center: f64,
    pub spacing: f64,
    pub detunings: Vec<f64>,
}

pub fn build_mode_grid(n_modes: usize, bandwidth: f64, center: f64) -> Result<ModeGrid> {
    if n_modes < 2 {
        return Err(Error::invalid(format!("n_modes must be at least 2, got {n_modes}")));
    }
    if !(bandwidth > 0.0) || !bandwidth.is_finite() {
        return Err(Error::invalid(format!("bandwidth must be positive, got {bandwidth}")));
    }
    if !center.is_finite() {
        return Err(Error::invalid("grid center must be finite"));
    }
    let spacing = 2.0 * bandwidth / n_modes as f64;
    let lowest = center - bandwidth;
    let detunings = (0..n_modes).map(|k| lowest + k as f64 * spacing).collect();
    Ok(ModeGrid { n_modes, bandwidth, center, spacing, detunings })
}

impl ModeGrid {
    pub fn max_abs_detuning(&self) -> f64 {
        self.detunings.iter().fold(0.0_f64, |m, d| m.max(d.abs()))
    }

    /// Revival time of the discrete mode sum; reconstructed envelopes are
    /// periodic with this period.
    pub fn period(&self) -> f64 {
        2.0 * PI / self.spacing
    }
}

/// Coupling prefactor `sqrt(kappa * spacing / 2pi)` between the cavity and each
/// waveguide mode, where `kappa` is the cavity energy decay rate.
pub fn derive_kappa_prime(kappa: f64, spacing: f64) -> f64 {
    debug_assert!(kappa > 0.0 && spacing > 0.0);
    (kappa * spacing / (2.0 * PI)).sqrt()
}

/// How the configured `kappa` maps onto the cavity loss rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KappaConvention {
    /// `kappa` is the decay rate of the cavity field amplitude: the cavity
    /// photon number decays at `2 * kappa`.
    #[default]
    Field,
    /// `kappa` is the cavity photon-number (energy) decay rate.
    Energy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub g: f64,
    pub kappa: f64,
    pub gamma: f64,
    pub delta_cav: f64,
    pub delta_bind: f64,
    pub convention: KappaConvention,
    pub kappa_prime: f64,
}

impl SystemParams {
    pub fn new(
        g: f64,
        kappa: f64,
        gamma: f64,
        convention: KappaConvention,
        grid: &ModeGrid,
    ) -> Result<Self> {
        if !(g > 0.0) || !g.is_finite() {
            return Err(Error::invalid(format!("g > 0 required, got {g}")));
        }
        if !(kappa > 0.0) || !kappa.is_finite() {
            return Err(Error::invalid(format!("kappa > 0 required, got {kappa}")));
        }
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(Error::invalid(format!("gamma ≥ 0 required, got {gamma}")));
        }
        let mut params = Self {
            g,
            kappa,
            gamma,
            delta_cav: 0.0,
            delta_bind: 20.0,
            convention,
            kappa_prime: 0.0,
        };
        params.kappa_prime = derive_kappa_prime(params.decay_rate(), grid.spacing);
        Ok(params)
    }

    /// Cavity photon-number decay rate into the waveguide.
    pub fn decay_rate(&self) -> f64 {
        match self.convention {
            KappaConvention::Field => 2.0 * self.kappa,
            KappaConvention::Energy => self.kappa,
        }
    }

    /// Same physics on a different mode grid.
    pub fn for_grid(&self, grid: &ModeGrid) -> Self {
        Self { kappa_prime: derive_kappa_prime(self.decay_rate(), grid.spacing), ..self.clone() }
    }

    pub fn with_gamma(&self, gamma: f64) -> Self {
        Self { gamma, ..self.clone() }
    }

    pub fn with_coupling(&self, g: f64) -> Self {
        Self { g, ..self.clone() }
    }

    pub fn with_detunings(mut self, delta_cav: f64, delta_bind: f64) -> Self {
        self.delta_cav = delta_cav;
        self.delta_bind = delta_bind;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PulseShape {
    Gaussian,
    /// Arbitrary envelope, resampled onto the target grid and renormalised.
    Sampled(Envelope),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    pub shape: PulseShape,
    pub t0: f64,
    pub width: f64,
    /// Carrier detuning from the rotating frame.
    pub carrier: f64,
}

impl PulseSpec {
    pub fn gaussian(t0: f64, width: f64) -> Self {
        Self { shape: PulseShape::Gaussian, t0, width, carrier: 0.0 }
    }

    pub fn with_carrier(mut self, carrier: f64) -> Self {
        self.carrier = carrier;
        self
    }

    /// Interval outside which the pulse is identically zero.
    pub fn support(&self) -> (f64, f64) {
        match &self.shape {
            PulseShape::Gaussian => {
                (self.t0 - GAUSSIAN_CUTOFF * self.width, self.t0 + GAUSSIAN_CUTOFF * self.width)
            }
            PulseShape::Sampled(env) => (env.grid.start, env.grid.end()),
        }
    }
}

/// Unit-norm Gaussian `pi^{-1/4} w^{-1/2} exp(-(t-t0)^2 / 2w^2)` times the
/// carrier `exp(-i carrier (t - t0))`, zero beyond `t0 ± 6w`.
pub fn synthesize_gaussian(spec: &PulseSpec, times: &TimeGrid) -> Result<Envelope> {
    let w = spec.width;
    if !(w > 0.0) || !w.is_finite() {
        return Err(Error::invalid(format!("pulse width must be positive, got {w}")));
    }
    let (lo, hi) = (spec.t0 - GAUSSIAN_CUTOFF * w, spec.t0 + GAUSSIAN_CUTOFF * w);
    let slack = 1e-9 * times.dt.max(1.0);
    if times.start > lo + slack || times.end() < hi - slack {
        return Err(Error::invalid(format!(
            "time grid [{}, {}] does not contain the pulse window [{lo}, {hi}]",
            times.start,
            times.end()
        )));
    }
    let amp = PI.powf(-0.25) / w.sqrt();
    let values = times
        .times()
        .map(|t| {
            let x = t - spec.t0;
            if x.abs() > GAUSSIAN_CUTOFF * w {
                C64::new(0.0, 0.0)
            } else {
                C64::from_polar(amp * (-x * x / (2.0 * w * w)).exp(), -spec.carrier * x)
            }
        })
        .collect();
    Envelope::new(*times, values)
}

pub fn synthesize(spec: &PulseSpec, times: &TimeGrid) -> Result<Envelope> {
    match &spec.shape {
        PulseShape::Gaussian => synthesize_gaussian(spec, times),
        PulseShape::Sampled(src) => {
            let values: Vec<C64> = times.times().map(|t| src.sample(t)).collect();
            let env = Envelope::new(*times, values)?;
            let norm = env.norm();
            if norm == 0.0 {
                return Err(Error::invalid("sampled pulse has zero norm on the target grid"));
            }
            Ok(env.scaled(C64::new(1.0 / norm, 0.0)))
        }
    }
}

/// Mode amplitudes `beta_k` at `ref_time` whose free evolution reproduces
/// `env` through [`modes_to_envelope`].
pub fn envelope_to_modes(env: &Envelope, grid: &ModeGrid, ref_time: f64) -> Result<Vec<C64>> {
    let span = env.grid.end() - env.grid.start;
    if span >= grid.period() {
        return Err(Error::invalid(format!(
            "envelope duration {span} exceeds the mode-grid revival time {}",
            grid.period()
        )));
    }
    let mut beta = vec![C64::new(0.0, 0.0); grid.n_modes];
    let first = grid.detunings[0];
    for (t, f) in env.times().zip(&env.values) {
        if f.re == 0.0 && f.im == 0.0 {
            continue;
        }
        let x = t - ref_time;
        let mut phase = C64::from_polar(1.0, first * x);
        let step = C64::from_polar(1.0, grid.spacing * x);
        for b in beta.iter_mut() {
            *b += f * phase;
            phase *= step;
        }
    }
    let scale = (grid.spacing / (2.0 * PI)).sqrt() * env.grid.dt;
    for b in beta.iter_mut() {
        *b *= scale;
    }

    let total = env.norm_sqr();
    if total > 0.0 {
        let captured: f64 = beta.iter().map(|b| b.norm_sqr()).sum();
        let leakage = 1.0 - captured / total;
        if leakage > LEAKAGE_LIMIT {
            return Err(Error::BandwidthExceeded { leakage, limit: LEAKAGE_LIMIT });
        }
    }
    Ok(beta)
}

/// `f(t) = sqrt(dw / 2pi) * sum_k beta_k exp(-i Delta_k (t - T))` evaluated on `times`.
pub fn modes_to_envelope(
    beta: &[C64],
    grid: &ModeGrid,
    ref_time: f64,
    times: &TimeGrid,
) -> Result<Envelope> {
    if beta.len() != grid.n_modes {
        return Err(Error::invalid(format!(
            "{} mode amplitudes supplied for a grid of {} modes",
            beta.len(),
            grid.n_modes
        )));
    }
    let scale = (grid.spacing / (2.0 * PI)).sqrt();
    let first = grid.detunings[0];
    let values = times
        .times()
        .map(|t| {
            let x = t - ref_time;
            let mut phase = C64::from_polar(1.0, -first * x);
            let step = C64::from_polar(1.0, -grid.spacing * x);
            let mut acc = C64::new(0.0, 0.0);
            for b in beta {
                acc += b * phase;
                phase *= step;
            }
            acc * scale
        })
        .collect();
    Envelope::new(*times, values)
}
