//! Single-excitation amplitude equations and their fixed-step integration.
//!
//! The state holds the emitter amplitude `alpha`, the cavity amplitude `beta`
//! and one amplitude per waveguide mode. The generator is
//!
//! ```text
//! alpha'  = g beta - (i Delta_qd(t) + gamma) alpha
//! beta'   = -i Delta_c beta - g alpha + kappa' sum_k beta_k
//! beta_k' = -i Delta_k beta_k - kappa' beta
//! ```
//!
//! so one evaluation costs O(N) through the shared mode sum.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModeGrid, SystemParams};
use crate::C64;

/// Upper bound on `dt * max|detuning|` accepted by [`integrate`].
pub const STABILITY_LIMIT: f64 = 0.5;

/// Stark switching must be fast compared with `1/g`.
pub const MAX_RAMP_TIME: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcitationState {
    pub alpha: C64,
    pub beta: C64,
    pub beta_k: Vec<C64>,
}

impl ExcitationState {
    pub fn vacuum(n_modes: usize) -> Self {
        Self { alpha: C64::new(0.0, 0.0), beta: C64::new(0.0, 0.0), beta_k: vec![C64::new(0.0, 0.0); n_modes] }
    }

    /// Photon in the waveguide, emitter and cavity empty.
    pub fn from_modes(beta_k: Vec<C64>) -> Self {
        Self { alpha: C64::new(0.0, 0.0), beta: C64::new(0.0, 0.0), beta_k }
    }

    /// Emitter excited with amplitude `alpha`, nothing else.
    pub fn excited(alpha: C64, n_modes: usize) -> Self {
        Self { alpha, ..Self::vacuum(n_modes) }
    }

    pub fn n_modes(&self) -> usize {
        self.beta_k.len()
    }

    pub fn norm(&self) -> f64 {
        norm(self)
    }

    /// `a * self + b * other`
    pub fn combine(&self, a: C64, other: &Self, b: C64) -> Self {
        Self {
            alpha: a * self.alpha + b * other.alpha,
            beta: a * self.beta + b * other.beta,
            beta_k: self.beta_k.iter().zip(&other.beta_k).map(|(x, y)| a * x + b * y).collect(),
        }
    }
}

/// `|alpha|^2 + |beta|^2 + sum |beta_k|^2`
pub fn norm(state: &ExcitationState) -> f64 {
    state.alpha.norm_sqr() + state.beta.norm_sqr() + state.beta_k.iter().map(|b| b.norm_sqr()).sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub detuning: f64,
}

/// Piecewise-constant emitter detuning, optionally with linear ramps of
/// `ramp_time` starting at each interior boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StarkSchedule {
    segments: Vec<Segment>,
    ramp_time: f64,
}

/// Stretch of the schedule on which the detuning is affine in time.
#[derive(Debug, Clone, Copy)]
struct Piece {
    start: f64,
    end: f64,
    value: f64,
    slope: f64,
}

impl StarkSchedule {
    pub fn new(segments: Vec<Segment>, ramp_time: f64) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::invalid("Stark schedule needs at least one segment"));
        }
        if !(0.0..MAX_RAMP_TIME).contains(&ramp_time) {
            return Err(Error::invalid(format!(
                "ramp_time must lie in [0, {MAX_RAMP_TIME}), got {ramp_time}"
            )));
        }
        for s in &segments {
            if !(s.end > s.start) || !s.detuning.is_finite() {
                return Err(Error::invalid(format!("bad schedule segment {s:?}")));
            }
            if ramp_time > 0.0 && ramp_time >= s.end - s.start {
                return Err(Error::invalid("ramp_time longer than a schedule segment"));
            }
        }
        for w in segments.windows(2) {
            let tol = 1e-12 * w[0].end.abs().max(1.0);
            if (w[1].start - w[0].end).abs() > tol {
                return Err(Error::invalid(format!(
                    "schedule segments are not contiguous at {} / {}",
                    w[0].end, w[1].start
                )));
            }
        }
        Ok(Self { segments, ramp_time })
    }

    pub fn constant(start: f64, end: f64, detuning: f64) -> Result<Self> {
        Self::new(vec![Segment { start, end, detuning }], 0.0)
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn ramp_time(&self) -> f64 {
        self.ramp_time
    }

    pub fn start(&self) -> f64 {
        self.segments[0].start
    }

    pub fn end(&self) -> f64 {
        self.segments[self.segments.len() - 1].end
    }

    pub fn max_abs_detuning(&self) -> f64 {
        self.segments.iter().fold(0.0_f64, |m, s| m.max(s.detuning.abs()))
    }

    fn check_covered(&self, t: f64) -> Result<()> {
        let tol = 1e-9 * self.end().abs().max(1.0);
        if t < self.start() - tol || t > self.end() + tol || !t.is_finite() {
            return Err(Error::ScheduleGap { t, start: self.start(), end: self.end() });
        }
        Ok(())
    }

    /// Detuning at `t`; right-continuous at instantaneous switches.
    pub fn detuning_at(&self, t: f64) -> Result<f64> {
        self.check_covered(t)?;
        Ok(self.value(t))
    }

    fn value(&self, t: f64) -> f64 {
        let idx = self
            .segments
            .iter()
            .position(|s| t < s.end)
            .unwrap_or(self.segments.len() - 1);
        let seg = self.segments[idx];
        if self.ramp_time > 0.0 && idx > 0 && t < seg.start + self.ramp_time {
            let prev = self.segments[idx - 1].detuning;
            let frac = ((t - seg.start) / self.ramp_time).max(0.0);
            prev + (seg.detuning - prev) * frac
        } else {
            seg.detuning
        }
    }

    /// Affine pieces covering `[from, to]`.
    fn pieces(&self, from: f64, to: f64) -> Vec<Piece> {
        let mut cuts = vec![from, to];
        for (i, s) in self.segments.iter().enumerate() {
            if i > 0 {
                cuts.push(s.start);
                if self.ramp_time > 0.0 {
                    cuts.push(s.start + self.ramp_time);
                }
            }
        }
        cuts.retain(|&c| c >= from && c <= to);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
        if cuts.len() == 1 {
            cuts.push(to);
        }
        cuts.windows(2)
            .map(|w| {
                let (a, b) = (w[0], w[1]);
                let mid = 0.5 * (a + b);
                let value = self.value(a);
                let slope = if b > a { (self.value(mid) - value) / (mid - a) } else { 0.0 };
                Piece { start: a, end: b, value, slope }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub alpha_abs2: Vec<f64>,
    pub beta_abs2: Vec<f64>,
    pub norm: Vec<f64>,
    pub final_state: ExcitationState,
}

impl Trajectory {
    fn record(&mut self, t: f64, state: &ExcitationState) {
        self.times.push(t);
        self.alpha_abs2.push(state.alpha.norm_sqr());
        self.beta_abs2.push(state.beta.norm_sqr());
        self.norm.push(norm(state));
    }

    /// `|alpha|^2` at the sample closest to `t`.
    pub fn alpha_abs2_near(&self, t: f64) -> f64 {
        let idx = self
            .times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
            .map(|(i, _)| i)
            .unwrap_or(0);
        self.alpha_abs2[idx]
    }
}

#[inline]
fn derivative(state: &ExcitationState, detuning: f64, params: &SystemParams, grid: &ModeGrid, out: &mut ExcitationState) {
    let kp = params.kappa_prime;
    let beta = state.beta;
    let mut sum = C64::new(0.0, 0.0);
    for (d, (b, &w)) in out.beta_k.iter_mut().zip(state.beta_k.iter().zip(&grid.detunings)) {
        sum += b;
        // -i w b - kp beta
        *d = C64::new(w * b.im - kp * beta.re, -w * b.re - kp * beta.im);
    }
    let alpha = state.alpha;
    out.alpha = beta * params.g - C64::new(params.gamma, detuning) * alpha;
    out.beta = C64::new(0.0, -params.delta_cav) * beta - alpha * params.g + sum * kp;
}

fn check_dimensions(state: &ExcitationState, grid: &ModeGrid) -> Result<()> {
    if state.n_modes() != grid.n_modes {
        return Err(Error::invalid(format!(
            "state carries {} modes but the grid has {}",
            state.n_modes(),
            grid.n_modes
        )));
    }
    Ok(())
}

/// Time derivative of `state` at `t`.
pub fn rhs(
    state: &ExcitationState,
    t: f64,
    params: &SystemParams,
    grid: &ModeGrid,
    schedule: &StarkSchedule,
) -> Result<ExcitationState> {
    check_dimensions(state, grid)?;
    let detuning = schedule.detuning_at(t)?;
    let mut out = ExcitationState::vacuum(grid.n_modes);
    derivative(state, detuning, params, grid, &mut out);
    Ok(out)
}

/// Coupling part of the generator: everything except the diagonal rotation
/// and damping, which the stepper applies exactly.
#[inline]
fn coupling(state: &ExcitationState, params: &SystemParams, out: &mut ExcitationState) {
    let kp = params.kappa_prime;
    let feed = -state.beta * kp;
    let mut sum = C64::new(0.0, 0.0);
    for (d, b) in out.beta_k.iter_mut().zip(&state.beta_k) {
        sum += b;
        *d = feed;
    }
    out.alpha = state.beta * params.g;
    out.beta = -state.alpha * params.g + sum * kp;
}

/// `exp(-int_a^b (i Delta_qd(t) + gamma) dt)` on an affine piece.
#[inline]
fn emitter_propagator(piece: &Piece, gamma: f64, a: f64, b: f64) -> C64 {
    let (u, v) = (a - piece.start, b - piece.start);
    let phase = piece.value * (b - a) + 0.5 * piece.slope * (v * v - u * u);
    C64::from_polar((-gamma * (b - a)).exp(), -phase)
}

/// Integrating-factor (Lawson) RK4: the diagonal part of the generator is
/// propagated exactly and classical RK4 handles the couplings.
struct Lawson {
    k1: ExcitationState,
    k2: ExcitationState,
    k3: ExcitationState,
    k4: ExcitationState,
    tmp: ExcitationState,
    /// `exp(-i Delta_k h / 2)` for the current step size.
    half: Vec<C64>,
    half_h: f64,
}

impl Lawson {
    fn new(n: usize) -> Self {
        let v = ExcitationState::vacuum(n);
        Self { k1: v.clone(), k2: v.clone(), k3: v.clone(), k4: v.clone(), tmp: v, half: vec![C64::new(1.0, 0.0); n], half_h: 0.0 }
    }

    fn prepare(&mut self, h: f64, grid: &ModeGrid) {
        if self.half_h != h {
            for (e, w) in self.half.iter_mut().zip(&grid.detunings) {
                *e = C64::from_polar(1.0, -w * 0.5 * h);
            }
            self.half_h = h;
        }
    }

    fn step(&mut self, y: &mut ExcitationState, t: f64, h: f64, piece: &Piece, params: &SystemParams) {
        let hh = 0.5 * h;
        let a1 = emitter_propagator(piece, params.gamma, t, t + hh);
        let a2 = emitter_propagator(piece, params.gamma, t + hh, t + h);
        let c = C64::from_polar(1.0, -params.delta_cav * hh);

        coupling(y, params, &mut self.k1);
        // P1 (y + h/2 k1)
        self.tmp.alpha = a1 * (y.alpha + self.k1.alpha * hh);
        self.tmp.beta = c * (y.beta + self.k1.beta * hh);
        for i in 0..y.beta_k.len() {
            self.tmp.beta_k[i] = self.half[i] * (y.beta_k[i] + self.k1.beta_k[i] * hh);
        }
        coupling(&self.tmp, params, &mut self.k2);
        // P1 y + h/2 k2
        self.tmp.alpha = a1 * y.alpha + self.k2.alpha * hh;
        self.tmp.beta = c * y.beta + self.k2.beta * hh;
        for i in 0..y.beta_k.len() {
            self.tmp.beta_k[i] = self.half[i] * y.beta_k[i] + self.k2.beta_k[i] * hh;
        }
        coupling(&self.tmp, params, &mut self.k3);
        // P y + h P2 k3
        self.tmp.alpha = a2 * (a1 * y.alpha + self.k3.alpha * h);
        self.tmp.beta = c * (c * y.beta + self.k3.beta * h);
        for i in 0..y.beta_k.len() {
            let e = self.half[i];
            self.tmp.beta_k[i] = e * (e * y.beta_k[i] + self.k3.beta_k[i] * h);
        }
        coupling(&self.tmp, params, &mut self.k4);

        // y <- P2 (P1 y + h/6 (P1 k1 + 2 k2 + 2 k3)) + h/6 k4
        let w = h / 6.0;
        y.alpha = a2 * (a1 * (y.alpha + self.k1.alpha * w) + (self.k2.alpha + self.k3.alpha) * (2.0 * w)) + self.k4.alpha * w;
        y.beta = c * (c * (y.beta + self.k1.beta * w) + (self.k2.beta + self.k3.beta) * (2.0 * w)) + self.k4.beta * w;
        for i in 0..y.beta_k.len() {
            let e = self.half[i];
            y.beta_k[i] = e * (e * (y.beta_k[i] + self.k1.beta_k[i] * w) + (self.k2.beta_k[i] + self.k3.beta_k[i]) * (2.0 * w))
                + self.k4.beta_k[i] * w;
        }
    }
}

/// Fourth-order integrating-factor RK4 from `t_start` to `t_end`. The
/// emitter, cavity and mode rotations (and the emitter damping) are applied
/// exactly, so accuracy is set by the couplings rather than by the detunings.
///
/// Each affine piece of the schedule is split into `ceil(len / dt)` equal
/// steps, so switching times always fall on step boundaries and the final
/// state is taken at exactly `t_end`. Samples are recorded at the start,
/// every `sample_every` steps, and at the end.
#[allow(clippy::too_many_arguments)]
pub fn integrate(
    initial: &ExcitationState,
    params: &SystemParams,
    grid: &ModeGrid,
    schedule: &StarkSchedule,
    t_start: f64,
    t_end: f64,
    dt: f64,
    sample_every: usize,
) -> Result<Trajectory> {
    check_dimensions(initial, grid)?;
    if !(t_end > t_start) {
        return Err(Error::invalid(format!("integration window [{t_start}, {t_end}] is empty")));
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::invalid(format!("dt must be positive, got {dt}")));
    }
    if sample_every == 0 {
        return Err(Error::invalid("sample_every must be at least 1"));
    }
    schedule.check_covered(t_start)?;
    schedule.check_covered(t_end)?;
    let fastest = grid.max_abs_detuning() + schedule.max_abs_detuning().max(params.delta_cav.abs());
    let product = dt * fastest;
    if product >= STABILITY_LIMIT {
        return Err(Error::StepTooLarge { product, limit: STABILITY_LIMIT });
    }

    let mut state = initial.clone();
    let mut traj = Trajectory {
        times: Vec::new(),
        alpha_abs2: Vec::new(),
        beta_abs2: Vec::new(),
        norm: Vec::new(),
        final_state: ExcitationState::vacuum(0),
    };
    traj.record(t_start, &state);

    let mut rk = Lawson::new(grid.n_modes);
    let mut step_count = 0usize;
    let mut last_recorded = 0usize;
    for piece in schedule.pieces(t_start, t_end) {
        let len = piece.end - piece.start;
        let steps = ((len / dt) - 1e-6).ceil().max(1.0) as usize;
        let h = len / steps as f64;
        rk.prepare(h, grid);
        for i in 0..steps {
            let t = piece.start + i as f64 * h;
            rk.step(&mut state, t, h, &piece, params);
            step_count += 1;
            if step_count.is_multiple_of(sample_every) {
                let now = if i + 1 == steps { piece.end } else { piece.start + (i + 1) as f64 * h };
                traj.record(now, &state);
                last_recorded = step_count;
            }
        }
    }
    if last_recorded != step_count {
        traj.record(t_end, &state);
    }
    traj.final_state = state;
    Ok(traj)
}
