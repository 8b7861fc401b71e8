//! Pulse overlap fidelity, phase diagnostics, the steady-state reflection
//! oracle and parameter sweeps.

use std::f64::consts::PI;

use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Envelope, SystemParams};
use crate::protocol::{run_all, GateSetup, InputState};
use crate::C64;

/// Samples of `f_in(t - tau)` below this fraction of its peak are excluded
/// from phase profiles.
pub const PHASE_THRESHOLD: f64 = 1e-3;

/// Map an angle onto `(-pi, pi]`.
pub fn wrap_phase(phi: f64) -> f64 {
    let mut x = phi.rem_euclid(2.0 * PI);
    if x > PI {
        x -= 2.0 * PI;
    }
    if x <= -PI {
        x += 2.0 * PI;
    }
    x
}

/// Argument of `z` on `(-pi, pi]`.
pub fn arg(z: C64) -> f64 {
    let a = z.arg();
    if a <= -PI {
        a + 2.0 * PI
    } else {
        a
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub value: f64,
    /// Delay of `f_out` relative to `f_in`: the overlap is taken against `f_out(t + tau)`.
    pub optimal_delay: f64,
    pub overlap_amplitude: C64,
}

fn grid_offset(f_in: &Envelope, f_out: &Envelope) -> Result<f64> {
    let dt = f_in.grid.dt;
    if ((f_out.grid.dt - dt) / dt).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "envelopes have different resolutions ({} vs {})",
            dt, f_out.grid.dt
        )));
    }
    let offset = (f_out.grid.start - f_in.grid.start) / dt;
    if (offset - offset.round()).abs() > 1e-6 {
        return Err(Error::invalid("envelope grids are not commensurate"));
    }
    Ok(offset.round())
}

/// All lags `c[k] = sum_n conj(in[n]) out[n + k] dt`, `k = -(n_in - 1) ..= n_out - 1`,
/// returned with index `k + n_in - 1`.
fn cross_correlation(f_in: &Envelope, f_out: &Envelope) -> Vec<C64> {
    let n_in = f_in.values.len();
    let n_out = f_out.values.len();
    let len = n_in + n_out - 1;
    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(len);
    let inverse = planner.plan_fft_inverse(len);

    let mut a = vec![C64::new(0.0, 0.0); len];
    a[..n_in].copy_from_slice(&f_in.values);
    let mut b = vec![C64::new(0.0, 0.0); len];
    b[..n_out].copy_from_slice(&f_out.values);
    forward.process(&mut a);
    forward.process(&mut b);
    let mut c: Vec<C64> = a.iter().zip(&b).map(|(x, y)| x.conj() * y).collect();
    inverse.process(&mut c);

    let scale = f_in.grid.dt / len as f64;
    let mut lags = Vec::with_capacity(len);
    for k in -(n_in as isize - 1)..=(n_out as isize - 1) {
        let idx = if k >= 0 { k as usize } else { (len as isize + k) as usize };
        lags.push(c[idx] * scale);
    }
    lags
}

/// `max_tau |int f_in*(t) f_out(t + tau) dt| / ||f_in||`.
///
/// The delay is scanned over every grid lag and then refined by a parabola
/// through the three samples around the maximum. `f_out` is not renormalised,
/// so lost amplitude lowers the result.
pub fn fidelity(f_in: &Envelope, f_out: &Envelope) -> Result<FidelityReport> {
    let in_norm = f_in.norm();
    if in_norm == 0.0 {
        return Err(Error::invalid("input envelope has zero norm"));
    }
    let offset = grid_offset(f_in, f_out)?;
    let dt = f_in.grid.dt;
    let lags = cross_correlation(f_in, f_out);
    let lag0 = f_in.values.len() as f64 - 1.0;

    let (m, _) = lags
        .iter()
        .enumerate()
        .fold((0usize, -1.0), |best, (i, c)| if c.norm() > best.1 { (i, c.norm()) } else { best });

    let (shift, amp) = if m > 0 && m + 1 < lags.len() {
        let (a, b, c) = (lags[m - 1].norm(), lags[m].norm(), lags[m + 1].norm());
        let denom = a - 2.0 * b + c;
        let delta = if denom < 0.0 { (0.5 * (a - c) / denom).clamp(-0.5, 0.5) } else { 0.0 };
        let (l, z, r) = (lags[m - 1], lags[m], lags[m + 1]);
        let amp = z + (r - l) * (0.5 * delta) + (r - z * 2.0 + l) * (0.5 * delta * delta);
        (delta, amp)
    } else {
        (0.0, lags[m])
    };

    let overlap_amplitude = amp / in_norm;
    let bound = f_out.norm();
    let value = overlap_amplitude.norm().min(bound).min(1.0);
    Ok(FidelityReport {
        value,
        optimal_delay: (m as f64 - lag0 + shift + offset) * dt,
        overlap_amplitude,
    })
}

/// `int f_in*(t) f_out(t + tau) dt / ||f_in||` at a fixed delay, with linear
/// interpolation of `f_out` between samples.
pub fn overlap_at(f_in: &Envelope, f_out: &Envelope, tau: f64) -> Result<C64> {
    let in_norm = f_in.norm();
    if in_norm == 0.0 {
        return Err(Error::invalid("input envelope has zero norm"));
    }
    let sum: C64 = f_in
        .times()
        .zip(&f_in.values)
        .filter(|(_, v)| v.norm_sqr() > 0.0)
        .map(|(t, v)| v.conj() * f_out.sample(t + tau))
        .sum();
    Ok(sum * f_in.grid.dt / in_norm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseProfile {
    pub times: Vec<f64>,
    pub phase: Vec<f64>,
}

/// `arg f_out(t) - arg f_in(t - tau)` on the samples of `f_out` where the
/// delayed input exceeds [`PHASE_THRESHOLD`] of its peak, unwrapped along t.
pub fn phase_profile(f_in: &Envelope, f_out: &Envelope, tau: f64) -> Result<PhaseProfile> {
    let threshold = PHASE_THRESHOLD * f_in.peak_abs();
    let mut times = Vec::new();
    let mut phase: Vec<f64> = Vec::new();
    for (t, out) in f_out.times().zip(&f_out.values) {
        let reference = f_in.sample(t - tau);
        if reference.norm() <= threshold || threshold == 0.0 {
            continue;
        }
        let raw = wrap_phase(arg(*out) - arg(reference));
        let value = match phase.last() {
            None => raw,
            Some(&prev) => raw + 2.0 * PI * ((prev - raw) / (2.0 * PI)).round(),
        };
        times.push(t);
        phase.push(value);
    }
    if times.is_empty() {
        return Err(Error::UndefinedPhase("no samples above the amplitude threshold".into()));
    }
    Ok(PhaseProfile { times, phase })
}

/// Phase of the delay-optimised overlap amplitude.
pub fn aggregate_phase(f_in: &Envelope, f_out: &Envelope) -> Result<f64> {
    let report = fidelity(f_in, f_out)?;
    phase_of(&report)
}

pub(crate) fn phase_of(report: &FidelityReport) -> Result<f64> {
    if report.overlap_amplitude.norm() < 1e-12 {
        return Err(Error::UndefinedPhase("overlap with the input pulse vanishes".into()));
    }
    Ok(arg(report.overlap_amplitude))
}

/// Emitter configuration seen by a monochromatic probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum QdMode {
    Decoupled,
    /// Two-level transition at the given detuning from the rotating frame.
    TwoLevel { detuning: f64 },
}

impl QdMode {
    pub fn resonant_two_level() -> Self {
        QdMode::TwoLevel { detuning: 0.0 }
    }
}

/// Steady-state reflection coefficient for a probe at detuning `omega`.
///
/// Eliminating the waveguide in the continuum limit turns the mode sum into
/// a cavity loss `kappa_e / 2` (with `kappa_e` the photon-number decay rate)
/// and a drive `sqrt(kappa_e) f_in`, with output `f_in - sqrt(kappa_e) beta`.
/// For a drive `exp(-i omega t)`:
///
/// ```text
/// r = 1 - kappa_e D_qd / (D_c D_qd + g^2)
/// D_c  = kappa_e / 2 + i (Delta_c - omega)
/// D_qd = gamma + i (Delta_qd - omega)
/// ```
pub fn reflection_oracle(omega: f64, params: &SystemParams, mode: QdMode) -> C64 {
    let kappa_e = params.decay_rate();
    let d_c = C64::new(kappa_e / 2.0, params.delta_cav - omega);
    match mode {
        QdMode::Decoupled => C64::new(1.0, 0.0) - kappa_e / d_c,
        QdMode::TwoLevel { detuning } => {
            let d_qd = C64::new(params.gamma, detuning - omega);
            C64::new(1.0, 0.0) - d_qd * kappa_e / (d_c * d_qd + params.g * params.g)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    /// gamma / kappa values.
    pub axis: Vec<f64>,
    /// Per axis point, fidelities ordered as [`InputState::ALL`].
    pub fidelities: Vec<[f64; 4]>,
}

impl SweepResult {
    pub fn series(&self, state: InputState) -> Vec<f64> {
        self.fidelities.iter().map(|row| row[state.index()]).collect()
    }
}

/// Gate fidelities of all four basis states for each `gamma = ratio * kappa`.
pub fn gamma_sweep(base: &GateSetup, ratios: &[f64]) -> Result<SweepResult> {
    if ratios.is_empty() {
        return Err(Error::invalid("gamma sweep needs at least one ratio"));
    }
    if ratios.iter().any(|r| !(*r >= 0.0) || !r.is_finite()) {
        return Err(Error::invalid("gamma/kappa ratios must be finite and non-negative"));
    }
    if ratios.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("gamma/kappa ratios must be strictly increasing"));
    }
    let fidelities = ratios
        .par_iter()
        .map(|&ratio| {
            let setup = base.with_gamma(ratio * base.params.kappa);
            let results = run_all(&setup)?;
            let mut row = [0.0; 4];
            for r in &results {
                row[r.input_state.index()] = r.fidelity();
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult { axis: ratios.to_vec(), fidelities })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n_modes: usize,
    pub dt: f64,
    pub fidelities: [f64; 4],
    /// Largest fidelity difference from the finest (most modes, smallest dt) entry.
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    pub max_deviation: f64,
}

/// Gate fidelities over every combination of mode count and time step, at
/// fixed bandwidth and protocol timing.
pub fn convergence_check(base: &GateSetup, n_list: &[usize], dt_list: &[f64]) -> Result<ConvergenceTable> {
    if n_list.is_empty() || dt_list.is_empty() {
        return Err(Error::invalid("convergence check needs at least one grid and one step"));
    }
    let combos: Vec<(usize, f64)> =
        n_list.iter().flat_map(|&n| dt_list.iter().map(move |&dt| (n, dt))).collect();
    let fids = combos
        .par_iter()
        .map(|&(n, dt)| {
            let setup = base.with_resolution(n, dt)?;
            let mut row = [0.0; 4];
            for r in run_all(&setup)? {
                row[r.input_state.index()] = r.fidelity();
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;

    let finest = combos
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .0.cmp(&b.1 .0).then(b.1 .1.total_cmp(&a.1 .1)))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let reference = fids[finest];
    let rows: Vec<ConvergenceRow> = combos
        .iter()
        .zip(&fids)
        .map(|(&(n_modes, dt), f)| ConvergenceRow {
            n_modes,
            dt,
            fidelities: *f,
            deviation: f.iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max),
        })
        .collect();
    let max_deviation = rows.iter().map(|r| r.deviation).fold(0.0, f64::max);
    Ok(ConvergenceTable { rows, max_deviation })
}
