//! Run configuration.
//!
//! A TOML file with flat sections; every key is optional and unknown keys are
//! rejected. Frequencies are in units of `g`, times in units of `1/g`.
//!
//! ```toml
//! [params]
//! g = 1.0                     # QD-cavity coupling
//! kappa = 1.0                 # cavity decay into the waveguide
//! kappa_convention = "field"  # "field": photon number decays at 2*kappa; "energy": at kappa
//! gamma = 0.0                 # exciton amplitude decay
//! delta_bind = 20.0           # biexciton binding energy
//! delta_cav = 0.0             # cavity detuning from the rotating frame
//!
//! [grid]
//! n_modes = 2000
//! bandwidth = 20.0            # modes cover [center - bandwidth, center + bandwidth)
//! center = 0.0
//!
//! [pulses]
//! width = 1.0                 # Gaussian width w, f ~ exp(-(t - t0)^2 / 2w^2)
//! # t0_1 = 6.0                # default 6w
//! # t0_2 = ...                # default t1 + 6w
//!
//! [schedule]
//! # t1 = ...                  # hold start; default: peak of the exciton population
//! # t2 = ...                  # hold end; default t0_2 + 6w
//! # t_end = ...               # default t2 + 15
//! ramp_time = 0.0             # linear Stark ramp, < 0.1
//! dt = 0.001
//!
//! [scenario]
//! state = "all"               # aa | ab | ba | bb | all
//!
//! [output]
//! dir = "out"
//! trajectory_stride = 10      # integrator steps per trajectory sample
//! envelope_stride = 10        # time samples per envelope CSV row
//!
//! [options]
//! biexciton_coupling_factor = 1.0
//! bare_cavity_model = "decoupled"   # or "detuned_exciton"
//! residual_model = "branched"       # or "renormalized"
//! ```

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dynamics::{MAX_RAMP_TIME, STABILITY_LIMIT};
use crate::error::{Error, Result};
use crate::model::{build_mode_grid, KappaConvention, SystemParams};
use crate::protocol::{BareCavityModel, GateSetup, InputState, ResidualModel, TimingOverrides};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParamsSection {
    pub g: f64,
    pub kappa: f64,
    pub kappa_convention: KappaConvention,
    pub gamma: f64,
    pub delta_bind: f64,
    pub delta_cav: f64,
}

impl Default for ParamsSection {
    fn default() -> Self {
        Self { g: 1.0, kappa: 1.0, kappa_convention: KappaConvention::Field, gamma: 0.0, delta_bind: 20.0, delta_cav: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub n_modes: i64,
    pub bandwidth: f64,
    pub center: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { n_modes: 2000, bandwidth: 20.0, center: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PulseSection {
    pub width: f64,
    pub t0_1: Option<f64>,
    pub t0_2: Option<f64>,
}

impl Default for PulseSection {
    fn default() -> Self {
        Self { width: 1.0, t0_1: None, t0_2: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleSection {
    pub t1: Option<f64>,
    pub t2: Option<f64>,
    pub t_end: Option<f64>,
    pub ramp_time: f64,
    pub dt: f64,
}

impl Default for ScheduleSection {
    fn default() -> Self {
        Self { t1: None, t2: None, t_end: None, ramp_time: 0.0, dt: 1e-3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateSelection {
    Aa,
    Ab,
    Ba,
    Bb,
    #[default]
    All,
}

impl StateSelection {
    pub fn states(self) -> Vec<InputState> {
        match self {
            StateSelection::Aa => vec![InputState::Aa],
            StateSelection::Ab => vec![InputState::Ab],
            StateSelection::Ba => vec![InputState::Ba],
            StateSelection::Bb => vec![InputState::Bb],
            StateSelection::All => InputState::ALL.to_vec(),
        }
    }
}

impl FromStr for StateSelection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(StateSelection::All),
            "aa" => Ok(StateSelection::Aa),
            "ab" => Ok(StateSelection::Ab),
            "ba" => Ok(StateSelection::Ba),
            "bb" => Ok(StateSelection::Bb),
            other => Err(Error::invalid(format!("unknown state selection '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioSection {
    pub state: StateSelection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub trajectory_stride: i64,
    pub envelope_stride: i64,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), trajectory_stride: 10, envelope_stride: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptionsSection {
    pub biexciton_coupling_factor: f64,
    pub bare_cavity_model: BareCavityModel,
    pub residual_model: ResidualModel,
}

impl Default for OptionsSection {
    fn default() -> Self {
        Self {
            biexciton_coupling_factor: 1.0,
            bare_cavity_model: BareCavityModel::default(),
            residual_model: ResidualModel::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub params: ParamsSection,
    pub grid: GridSection,
    pub pulses: PulseSection,
    pub schedule: ScheduleSection,
    pub scenario: ScenarioSection,
    pub output: OutputSection,
    pub options: OptionsSection,
}

fn violation(rule: &str, got: impl std::fmt::Display) -> Error {
    Error::Config(format!("validation error: {rule} (got {got})"))
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let config: RunConfig = toml::from_str(text).map_err(|e| Error::Config(format!("parse error: {e}")))?;
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    parse_config(&text)
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let p = &self.params;
        if !(p.g > 0.0) || !p.g.is_finite() {
            return Err(violation("g > 0", p.g));
        }
        if !(p.kappa > 0.0) || !p.kappa.is_finite() {
            return Err(violation("kappa > 0", p.kappa));
        }
        if !(p.gamma >= 0.0) || !p.gamma.is_finite() {
            return Err(violation("gamma ≥ 0", p.gamma));
        }
        if !p.delta_bind.is_finite() || !p.delta_cav.is_finite() {
            return Err(violation("finite detunings", format!("{}, {}", p.delta_bind, p.delta_cav)));
        }
        let g = &self.grid;
        if g.n_modes < 2 {
            return Err(violation("n_modes ≥ 2", g.n_modes));
        }
        if !(g.bandwidth > 0.0) || !g.bandwidth.is_finite() {
            return Err(violation("bandwidth > 0", g.bandwidth));
        }
        if !g.center.is_finite() {
            return Err(violation("finite grid center", g.center));
        }
        if !(self.pulses.width > 0.0) || !self.pulses.width.is_finite() {
            return Err(violation("width > 0", self.pulses.width));
        }
        let s = &self.schedule;
        if !(s.dt > 0.0) || !s.dt.is_finite() {
            return Err(violation("dt > 0", s.dt));
        }
        if !(0.0..MAX_RAMP_TIME).contains(&s.ramp_time) {
            return Err(violation("0 ≤ ramp_time < 0.1", s.ramp_time));
        }
        let fastest = g.bandwidth + g.center.abs() + (p.delta_cav.abs() + p.delta_bind.abs());
        if s.dt * fastest >= STABILITY_LIMIT {
            return Err(violation("dt * (bandwidth + |center| + |delta_cav| + |delta_bind|) < 0.5", s.dt * fastest));
        }
        let explicit: Vec<(&str, f64)> = [("t1", s.t1), ("t2", s.t2), ("t_end", s.t_end)]
            .into_iter()
            .filter_map(|(n, v)| v.map(|v| (n, v)))
            .collect();
        for w in explicit.windows(2) {
            if !(w[1].1 > w[0].1) {
                return Err(violation(&format!("{} < {}", w[0].0, w[1].0), format!("{} and {}", w[0].1, w[1].1)));
            }
        }
        if let Some(t1) = s.t1 {
            if !(t1 > 0.0) {
                return Err(violation("t1 > 0", t1));
            }
        }
        let o = &self.options;
        if !(o.biexciton_coupling_factor >= 0.0) || !o.biexciton_coupling_factor.is_finite() {
            return Err(violation("biexciton_coupling_factor ≥ 0", o.biexciton_coupling_factor));
        }
        if self.output.trajectory_stride < 1 {
            return Err(violation("trajectory_stride ≥ 1", self.output.trajectory_stride));
        }
        if self.output.envelope_stride < 1 {
            return Err(violation("envelope_stride ≥ 1", self.output.envelope_stride));
        }
        Ok(())
    }

    /// Resolve the configuration into a runnable gate setup. When `t1` is not
    /// given this runs the step-1 absorption once to locate it.
    pub fn to_setup(&self) -> Result<GateSetup> {
        self.validate()?;
        let grid = build_mode_grid(self.grid.n_modes as usize, self.grid.bandwidth, self.grid.center)?;
        let p = &self.params;
        let params = SystemParams::new(p.g, p.kappa, p.gamma, p.kappa_convention, &grid)?
            .with_detunings(p.delta_cav, p.delta_bind);
        let timing = TimingOverrides {
            t0_1: self.pulses.t0_1,
            t1: self.schedule.t1,
            t0_2: self.pulses.t0_2,
            t2: self.schedule.t2,
            t_end: self.schedule.t_end,
        };
        let mut setup = GateSetup::build(params, grid, self.pulses.width, self.schedule.dt, &timing)?;
        setup.ramp_time = self.schedule.ramp_time;
        setup.biexciton_coupling_factor = self.options.biexciton_coupling_factor;
        setup.bare_cavity_model = self.options.bare_cavity_model;
        setup.residual_model = self.options.residual_model;
        setup.sample_every = self.output.trajectory_stride as usize;
        setup.validate()?;
        Ok(setup)
    }
}
