//! The three-step gate protocol for the four position-coded basis states.
//!
//! Photon 1 (channel a) is absorbed while the exciton is resonant with the
//! cavity, held while the exciton is Stark-shifted by the biexciton binding
//! energy, and released once the shift is removed. Photon 2 (channel a)
//! arrives during the hold and reflects either from the biexciton transition
//! (photon 1 stored) or from the bare cavity (photon 1 in channel b). The two
//! photons never overlap in time, so each is a separate single-excitation
//! scattering problem; their amplitudes are combined afterwards.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{fidelity, overlap_at, phase_of, FidelityReport};
use crate::dynamics::{integrate, ExcitationState, Segment, StarkSchedule, Trajectory};
use crate::error::{Error, Result};
use crate::model::{
    build_mode_grid, envelope_to_modes, modes_to_envelope, synthesize, Envelope, ModeGrid, PulseSpec,
    SystemParams, TimeGrid,
};
use crate::C64;

/// Automatically located switching times are rounded to this resolution.
pub const STORAGE_TIME_RESOLUTION: f64 = 0.01;

/// Default time allowed for re-emission after the hold ends.
pub const RELEASE_WINDOW: f64 = 15.0;

/// Default spacing between a pulse centre and the nearest switching time, in pulse widths.
pub const PULSE_CLEARANCE: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputState {
    Aa,
    Ab,
    Ba,
    Bb,
}

impl InputState {
    pub const ALL: [InputState; 4] = [InputState::Aa, InputState::Ab, InputState::Ba, InputState::Bb];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            InputState::Aa => "aa",
            InputState::Ab => "ab",
            InputState::Ba => "ba",
            InputState::Bb => "bb",
        }
    }

    pub fn photon1_in_a(self) -> bool {
        matches!(self, InputState::Aa | InputState::Ab)
    }

    pub fn photon2_in_a(self) -> bool {
        matches!(self, InputState::Aa | InputState::Ba)
    }
}

impl fmt::Display for InputState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for InputState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "aa" => Ok(InputState::Aa),
            "ab" => Ok(InputState::Ab),
            "ba" => Ok(InputState::Ba),
            "bb" => Ok(InputState::Bb),
            other => Err(Error::invalid(format!("unknown input state '{other}'"))),
        }
    }
}

/// What photon 2 sees when the dot holds no exciton.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BareCavityModel {
    /// Exciton transition present but detuned by the binding energy.
    DetunedExciton,
    /// Emitter coupling switched off entirely.
    #[default]
    Decoupled,
}

/// How the part of photon 1 that was not absorbed enters the aa element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualModel {
    /// Unabsorbed amplitude is paired with a bare-cavity reflection of photon 2.
    #[default]
    Branched,
    /// Unabsorbed amplitude is discarded and the stored branch renormalised.
    Renormalized,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleTimes {
    /// Start of the hold (step 2).
    pub t1: f64,
    /// End of the hold (start of step 3).
    pub t2: f64,
    pub t_end: f64,
}

/// Optional explicit timing; anything left `None` gets the default layout.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TimingOverrides {
    pub t0_1: Option<f64>,
    pub t1: Option<f64>,
    pub t0_2: Option<f64>,
    pub t2: Option<f64>,
    pub t_end: Option<f64>,
}

/// Everything shared by the four basis-state runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateSetup {
    pub params: SystemParams,
    pub grid: ModeGrid,
    pub photon1: PulseSpec,
    pub photon2: PulseSpec,
    pub times: ScheduleTimes,
    pub dt: f64,
    pub ramp_time: f64,
    pub biexciton_coupling_factor: f64,
    pub bare_cavity_model: BareCavityModel,
    pub residual_model: ResidualModel,
    pub sample_every: usize,
}

impl GateSetup {
    /// Gaussian pulses of width `width` with the default layout: photon 1 at
    /// `6w`, hold starting when the exciton population peaks, photon 2 centred
    /// `6w` into the hold, hold ending `6w` after it, then a release window.
    pub fn standard(params: SystemParams, grid: ModeGrid, width: f64, dt: f64) -> Result<Self> {
        Self::build(params, grid, width, dt, &TimingOverrides::default())
    }

    pub fn build(
        params: SystemParams,
        grid: ModeGrid,
        width: f64,
        dt: f64,
        timing: &TimingOverrides,
    ) -> Result<Self> {
        let clearance = PULSE_CLEARANCE * width;
        let t0_1 = timing.t0_1.unwrap_or(clearance);
        let photon1 = PulseSpec::gaussian(t0_1, width);
        let t1 = match timing.t1 {
            Some(t1) => t1,
            None => locate_storage_time(&params, &grid, &photon1, dt)?.0,
        };
        let t0_2 = timing.t0_2.unwrap_or(t1 + clearance);
        let t2 = timing.t2.unwrap_or(t0_2 + clearance);
        let t_end = timing.t_end.unwrap_or(t2 + RELEASE_WINDOW);
        let setup = Self {
            params,
            grid,
            photon1,
            photon2: PulseSpec::gaussian(t0_2, width),
            times: ScheduleTimes { t1, t2, t_end },
            dt,
            ramp_time: 0.0,
            biexciton_coupling_factor: 1.0,
            bare_cavity_model: BareCavityModel::default(),
            residual_model: ResidualModel::default(),
            sample_every: 10,
        };
        setup.validate()?;
        Ok(setup)
    }

    pub fn validate(&self) -> Result<()> {
        let ScheduleTimes { t1, t2, t_end } = self.times;
        let bad = |msg: String| Err(Error::InvalidScenario(msg));
        if !(t1 > 0.0 && t2 > t1 && t_end > t2) {
            return bad(format!("switching times must satisfy 0 < t1 < t2 < t_end, got {t1}, {t2}, {t_end}"));
        }
        let tol = 1e-9;
        let (p1_lo, _) = self.photon1.support();
        if p1_lo < -tol {
            return bad(format!("photon 1 starts before t = 0 (support begins at {p1_lo})"));
        }
        if self.photon1.t0 >= t1 {
            return bad(format!("photon 1 centre {} must precede the hold at t1 = {t1}", self.photon1.t0));
        }
        let (p2_lo, p2_hi) = self.photon2.support();
        if p2_lo < t1 - tol || p2_hi > t2 + tol {
            return bad(format!("photon 2 support [{p2_lo}, {p2_hi}] lies outside the hold [{t1}, {t2}]"));
        }
        if t_end >= self.grid.period() {
            return bad(format!(
                "gate window {t_end} exceeds the mode-grid revival time {}",
                self.grid.period()
            ));
        }
        if !(self.biexciton_coupling_factor >= 0.0) {
            return bad("biexciton coupling factor must be non-negative".into());
        }
        if self.sample_every == 0 {
            return bad("sample_every must be at least 1".into());
        }
        Ok(())
    }

    pub fn with_gamma(&self, gamma: f64) -> Self {
        Self { params: self.params.with_gamma(gamma), ..self.clone() }
    }

    /// Same physics and timing on a grid of `n_modes` (same bandwidth) with step `dt`.
    pub fn with_resolution(&self, n_modes: usize, dt: f64) -> Result<Self> {
        let grid = build_mode_grid(n_modes, self.grid.bandwidth, self.grid.center)?;
        let setup = Self { params: self.params.for_grid(&grid), grid, dt, ..self.clone() };
        setup.validate()?;
        Ok(setup)
    }

    /// Exciton detuning that puts the transition on the cavity resonance.
    fn resonant_detuning(&self) -> f64 {
        self.params.delta_cav
    }

    fn held_detuning(&self) -> f64 {
        self.params.delta_cav + self.params.delta_bind
    }

    pub fn photon1_schedule(&self) -> Result<StarkSchedule> {
        let ScheduleTimes { t1, t2, t_end } = self.times;
        StarkSchedule::new(
            vec![
                Segment { start: 0.0, end: t1, detuning: self.resonant_detuning() },
                Segment { start: t1, end: t2, detuning: self.held_detuning() },
                Segment { start: t2, end: t_end, detuning: self.resonant_detuning() },
            ],
            self.ramp_time,
        )
    }

    pub fn photon1_times(&self) -> Result<TimeGrid> {
        TimeGrid::covering(0.0, self.times.t_end, self.dt)
    }

    pub fn photon2_times(&self) -> Result<TimeGrid> {
        TimeGrid::covering(self.times.t1, self.times.t2, self.dt)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateScenario {
    pub input_state: InputState,
    pub setup: GateSetup,
}

impl GateScenario {
    pub fn new(input_state: InputState, setup: GateSetup) -> Self {
        Self { input_state, setup }
    }
}

/// One photon's scattering run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhotonRun {
    pub trajectory: Trajectory,
    pub input: Envelope,
    pub output: Envelope,
    pub fidelity: FidelityReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Photon1Outcome {
    pub run: PhotonRun,
    /// `|alpha(t1)|^2`
    pub stored_excitation_prob: f64,
    pub alpha_at_t1: C64,
}

fn join(mut first: Trajectory, second: Trajectory) -> Trajectory {
    first.times.extend_from_slice(&second.times[1..]);
    first.alpha_abs2.extend_from_slice(&second.alpha_abs2[1..]);
    first.beta_abs2.extend_from_slice(&second.beta_abs2[1..]);
    first.norm.extend_from_slice(&second.norm[1..]);
    first.final_state = second.final_state;
    first
}

/// Absorb, hold and release photon 1 over `[0, t_end]`.
pub fn run_photon1(scenario: &GateScenario) -> Result<Photon1Outcome> {
    if !scenario.input_state.photon1_in_a() {
        return Err(Error::InvalidScenario(format!(
            "photon 1 is in channel b for input {}",
            scenario.input_state
        )));
    }
    let setup = &scenario.setup;
    setup.validate()?;
    let times = setup.photon1_times()?;
    let input = synthesize(&setup.photon1, &times)?;
    let initial = ExcitationState::from_modes(envelope_to_modes(&input, &setup.grid, 0.0)?);
    let schedule = setup.photon1_schedule()?;
    let ScheduleTimes { t1, t_end, .. } = setup.times;

    let absorb = integrate(&initial, &setup.params, &setup.grid, &schedule, 0.0, t1, setup.dt, setup.sample_every)?;
    let alpha_at_t1 = absorb.final_state.alpha;
    let rest = integrate(&absorb.final_state, &setup.params, &setup.grid, &schedule, t1, t_end, setup.dt, setup.sample_every)?;
    let trajectory = join(absorb, rest);

    let output = modes_to_envelope(&trajectory.final_state.beta_k, &setup.grid, t_end, &times)?;
    let fidelity = fidelity(&input, &output)?;
    Ok(Photon1Outcome {
        run: PhotonRun { trajectory, input, output, fidelity },
        stored_excitation_prob: alpha_at_t1.norm_sqr(),
        alpha_at_t1,
    })
}

/// Split photon 1's output into the part re-emitted from the stored exciton
/// and the part that was never absorbed. The sum is the full output.
pub fn photon1_components(scenario: &GateScenario, outcome: &Photon1Outcome) -> Result<(Envelope, Envelope)> {
    let setup = &scenario.setup;
    let ScheduleTimes { t1, t_end, .. } = setup.times;
    let stored = ExcitationState::excited(outcome.alpha_at_t1, setup.grid.n_modes);
    let traj = integrate(&stored, &setup.params, &setup.grid, &setup.photon1_schedule()?, t1, t_end, setup.dt, usize::MAX)?;
    let released = modes_to_envelope(&traj.final_state.beta_k, &setup.grid, t_end, &outcome.run.output.grid)?;
    let unabsorbed = outcome.run.output.sub(&released)?;
    Ok((released, unabsorbed))
}

/// Reflect photon 2 during the hold `[t1, t2]`.
///
/// With the dot excited the relevant transition is the biexciton, resonant
/// with the cavity and coupled with `g * biexciton_coupling_factor`. Otherwise
/// the photon meets the bare cavity as selected by `bare_cavity_model`.
pub fn run_photon2(scenario: &GateScenario, qd_excited: bool) -> Result<PhotonRun> {
    if !scenario.input_state.photon2_in_a() {
        return Err(Error::InvalidScenario(format!(
            "photon 2 is in channel b for input {}",
            scenario.input_state
        )));
    }
    let setup = &scenario.setup;
    setup.validate()?;
    let (coupling, detuning) = if qd_excited {
        (setup.params.g * setup.biexciton_coupling_factor, setup.resonant_detuning())
    } else {
        match setup.bare_cavity_model {
            BareCavityModel::DetunedExciton => (setup.params.g, setup.held_detuning()),
            BareCavityModel::Decoupled => (0.0, setup.held_detuning()),
        }
    };
    let params = setup.params.with_coupling(coupling);
    let ScheduleTimes { t1, t2, .. } = setup.times;
    let times = setup.photon2_times()?;
    let input = synthesize(&setup.photon2, &times)?;
    let initial = ExcitationState::from_modes(envelope_to_modes(&input, &setup.grid, t1)?);
    let schedule = StarkSchedule::constant(t1, t2, detuning)?;
    let trajectory = integrate(&initial, &params, &setup.grid, &schedule, t1, t2, setup.dt, setup.sample_every)?;
    let output = modes_to_envelope(&trajectory.final_state.beta_k, &setup.grid, t2, &times)?;
    let fidelity = fidelity(&input, &output)?;
    Ok(PhotonRun { trajectory, input, output, fidelity })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub input_state: InputState,
    pub setup: GateSetup,
    /// Absent when the photon travels in channel b.
    pub photon1: Option<PhotonRun>,
    /// For aa this is the biexciton branch.
    pub photon2: Option<PhotonRun>,
    pub fidelity1: f64,
    pub fidelity2: f64,
    pub phase1: f64,
    pub phase2: f64,
    pub gate_element: C64,
    pub stored_excitation_prob: Option<f64>,
    /// aa only: the element under the residual model not selected in the setup.
    pub alternative_gate_element: Option<C64>,
}

impl ScenarioResult {
    /// Magnitude of the gate element: the two-photon overlap with the ideal output.
    pub fn fidelity(&self) -> f64 {
        self.gate_element.norm()
    }
}

fn photon_summary(run: &PhotonRun) -> Result<(f64, f64)> {
    Ok((run.fidelity.value, phase_of(&run.fidelity)?))
}

pub fn run_scenario(scenario: &GateScenario) -> Result<ScenarioResult> {
    let setup = &scenario.setup;
    setup.validate()?;
    let one = C64::new(1.0, 0.0);
    let mut result = ScenarioResult {
        input_state: scenario.input_state,
        setup: setup.clone(),
        photon1: None,
        photon2: None,
        fidelity1: 1.0,
        fidelity2: 1.0,
        phase1: 0.0,
        phase2: 0.0,
        gate_element: one,
        stored_excitation_prob: None,
        alternative_gate_element: None,
    };
    match scenario.input_state {
        InputState::Bb => {}
        InputState::Ab => {
            let p1 = run_photon1(scenario)?;
            (result.fidelity1, result.phase1) = photon_summary(&p1.run)?;
            result.gate_element = p1.run.fidelity.overlap_amplitude;
            result.stored_excitation_prob = Some(p1.stored_excitation_prob);
            result.photon1 = Some(p1.run);
        }
        InputState::Ba => {
            let p2 = run_photon2(scenario, false)?;
            (result.fidelity2, result.phase2) = photon_summary(&p2)?;
            result.gate_element = p2.fidelity.overlap_amplitude;
            result.photon2 = Some(p2);
        }
        InputState::Aa => {
            let p1 = run_photon1(scenario)?;
            let (released, unabsorbed) = photon1_components(scenario, &p1)?;
            let biexciton = run_photon2(scenario, true)?;
            let bare = run_photon2(scenario, false)?;

            let tau1 = p1.run.fidelity.optimal_delay;
            let from_stored = overlap_at(&p1.run.input, &released, tau1)?;
            let from_residual = overlap_at(&p1.run.input, &unabsorbed, tau1)?;
            let xx = biexciton.fidelity.overlap_amplitude;
            let branched = from_stored * xx + from_residual * bare.fidelity.overlap_amplitude;
            let released_norm = released.norm();
            let renormalized = if released_norm > 0.0 { from_stored / released_norm * xx } else { C64::new(0.0, 0.0) };
            let (chosen, other) = match setup.residual_model {
                ResidualModel::Branched => (branched, renormalized),
                ResidualModel::Renormalized => (renormalized, branched),
            };

            (result.fidelity1, result.phase1) = photon_summary(&p1.run)?;
            (result.fidelity2, result.phase2) = photon_summary(&biexciton)?;
            result.gate_element = chosen;
            result.alternative_gate_element = Some(other);
            result.stored_excitation_prob = Some(p1.stored_excitation_prob);
            result.photon1 = Some(p1.run);
            result.photon2 = Some(biexciton);
        }
    }
    Ok(result)
}

/// All four basis states, in [`InputState::ALL`] order.
pub fn run_all(setup: &GateSetup) -> Result<Vec<ScenarioResult>> {
    InputState::ALL
        .par_iter()
        .map(|&s| run_scenario(&GateScenario::new(s, setup.clone())))
        .collect()
}

/// Phase picked up by photon 1 on its round trip through channel a; applied to
/// channel b so both paths of photon 1 carry the same phase.
pub fn correction_phase(photon1: &PhotonRun) -> Result<f64> {
    phase_of(&photon1.fidelity)
}

pub type Matrix4 = [[C64; 4]; 4];

fn diagonal(entries: [C64; 4]) -> Matrix4 {
    let mut m = [[C64::new(0.0, 0.0); 4]; 4];
    for (i, e) in entries.into_iter().enumerate() {
        m[i][i] = e;
    }
    m
}

/// Ideal phase gate in the basis order aa, ab, ba, bb.
pub fn ideal_gate() -> Matrix4 {
    let one = C64::new(1.0, 0.0);
    diagonal([one, one, -one, one])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateMatrix {
    pub elements: Matrix4,
    pub target: Matrix4,
    pub correction_phase: f64,
}

impl GateMatrix {
    pub fn from_diagonal(entries: [C64; 4]) -> Self {
        Self { elements: diagonal(entries), target: ideal_gate(), correction_phase: 0.0 }
    }

    /// `|tr(target^dagger M)| / 4`
    pub fn metric(&self) -> f64 {
        let mut tr = C64::new(0.0, 0.0);
        for i in 0..4 {
            for j in 0..4 {
                tr += self.target[j][i].conj() * self.elements[j][i];
            }
        }
        tr.norm() / 4.0
    }

    pub fn diagonal(&self) -> [C64; 4] {
        [0, 1, 2, 3].map(|i| self.elements[i][i])
    }
}

/// Diagonal gate from the four basis-state results, with the channel-b phase
/// correction applied to the ba and bb elements.
pub fn assemble_gate_matrix(results: &[ScenarioResult]) -> Result<GateMatrix> {
    let mut slots: [Option<&ScenarioResult>; 4] = [None; 4];
    for r in results {
        let slot = &mut slots[r.input_state.index()];
        if slot.is_some() {
            return Err(Error::InconsistentInputs(format!("duplicate result for {}", r.input_state)));
        }
        *slot = Some(r);
    }
    let mut found = [results.first().ok_or_else(|| Error::InconsistentInputs("no scenario results".into()))?; 4];
    for (i, s) in slots.iter().enumerate() {
        found[i] = s.ok_or_else(|| Error::InconsistentInputs(format!("missing result for {}", InputState::ALL[i])))?;
    }
    if found.iter().any(|r| r.setup != found[0].setup) {
        return Err(Error::InconsistentInputs("basis-state results were computed with different parameters".into()));
    }
    let phi = found[InputState::Ab.index()].phase1;
    let correction = C64::from_polar(1.0, phi);
    let entries = InputState::ALL.map(|s| {
        let element = found[s.index()].gate_element;
        if s.photon1_in_a() {
            element
        } else {
            element * correction
        }
    });
    Ok(GateMatrix { elements: diagonal(entries), target: ideal_gate(), correction_phase: phi })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuperpositionOutput {
    /// Normalised output amplitudes over aa, ab, ba, bb.
    pub amplitudes: [C64; 4],
    pub concurrence: f64,
}

/// Apply the gate to `(|a> + |b>)(|a> + |b>) / 2` and measure the entanglement
/// of the normalised output.
pub fn apply_to_superposition(matrix: &GateMatrix) -> Result<SuperpositionOutput> {
    let input = [C64::new(0.5, 0.0); 4];
    let mut out = [C64::new(0.0, 0.0); 4];
    for (i, row) in matrix.elements.iter().enumerate() {
        out[i] = row.iter().zip(&input).map(|(m, x)| m * x).sum();
    }
    let norm = out.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if norm < 1e-300 {
        return Err(Error::DegenerateState);
    }
    let amplitudes = out.map(|c| c / norm);
    let [aa, ab, ba, bb] = amplitudes;
    let concurrence = 2.0 * (aa * bb - ab * ba).norm();
    Ok(SuperpositionOutput { amplitudes, concurrence })
}

/// Time in step 1 at which the exciton population peaks, rounded to
/// [`STORAGE_TIME_RESOLUTION`], together with the population there.
pub fn locate_storage_time(
    params: &SystemParams,
    grid: &ModeGrid,
    pulse: &PulseSpec,
    dt: f64,
) -> Result<(f64, f64)> {
    let (lo, hi) = pulse.support();
    if lo < 0.0 {
        return Err(Error::InvalidScenario(format!("photon 1 starts before t = 0 (support begins at {lo})")));
    }
    let times = TimeGrid::covering(0.0, hi, dt)?;
    let input = synthesize(pulse, &times)?;
    let initial = ExcitationState::from_modes(envelope_to_modes(&input, grid, 0.0)?);
    let end = times.end();
    let schedule = StarkSchedule::constant(0.0, end, params.delta_cav)?;
    let traj = integrate(&initial, params, grid, &schedule, 0.0, end, dt, 1)?;

    let pop = &traj.alpha_abs2;
    let m = pop
        .iter()
        .enumerate()
        .fold(0usize, |best, (i, p)| if *p > pop[best] { i } else { best });
    let mut t_peak = traj.times[m];
    if m > 0 && m + 1 < pop.len() {
        let denom = pop[m - 1] - 2.0 * pop[m] + pop[m + 1];
        if denom < 0.0 {
            let h = traj.times[m + 1] - traj.times[m];
            t_peak += h * (0.5 * (pop[m - 1] - pop[m + 1]) / denom).clamp(-0.5, 0.5);
        }
    }
    let t1 = (t_peak / STORAGE_TIME_RESOLUTION).round() * STORAGE_TIME_RESOLUTION;
    Ok((t1, traj.alpha_abs2_near(t1)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WidthCalibration {
    pub width: f64,
    pub t1: f64,
    pub stored_excitation_prob: f64,
}

/// Pulse width among `widths` that maximises the stored exciton population.
pub fn calibrate_width(params: &SystemParams, grid: &ModeGrid, dt: f64, widths: &[f64]) -> Result<WidthCalibration> {
    if widths.is_empty() {
        return Err(Error::invalid("width calibration needs at least one candidate"));
    }
    let scans = widths
        .par_iter()
        .map(|&w| {
            let pulse = PulseSpec::gaussian(PULSE_CLEARANCE * w, w);
            let (t1, p) = locate_storage_time(params, grid, &pulse, dt)?;
            Ok(WidthCalibration { width: w, t1, stored_excitation_prob: p })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(scans
        .into_iter()
        .fold(None::<WidthCalibration>, |best, c| match best {
            Some(b) if b.stored_excitation_prob >= c.stored_excitation_prob => Some(b),
            _ => Some(c),
        })
        .expect("non-empty"))
}
