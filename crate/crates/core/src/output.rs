//! CSV and JSON artifacts. Numbers are written with 12 significant digits.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde_json::{json, Value};

use crate::analysis::{arg, ConvergenceTable, PhaseProfile, SweepResult};
use crate::dynamics::Trajectory;
use crate::error::Result;
use crate::model::Envelope;
use crate::protocol::{GateMatrix, GateSetup, ScenarioResult, SuperpositionOutput};

pub const ENVELOPE_HEADER: &str = "t,re_f,im_f,abs2_f,phase";
pub const TRAJECTORY_HEADER: &str = "t,alpha_abs2,beta_abs2,norm";
pub const PHASE_HEADER: &str = "t,phase";
pub const SWEEP_HEADER: &str = "gamma_over_kappa,F_aa,F_ab,F_ba,F_bb";
pub const CONVERGENCE_HEADER: &str = "n_modes,dt,F_aa,F_ab,F_ba,F_bb,max_deviation";

/// Scenario JSON keys, in serialisation order.
pub const SCENARIO_KEYS: [&str; 15] = [
    "alt_gate_element_im",
    "alt_gate_element_re",
    "delay1",
    "delay2",
    "fidelity",
    "fidelity1",
    "fidelity2",
    "gate_element_im",
    "gate_element_re",
    "input_state",
    "params",
    "phase1",
    "phase2",
    "residual_model",
    "stored_excitation_prob",
];

/// Shortest decimal rendering of `x` rounded to 12 significant digits.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent digits");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        let plain = format!("{:.*}", decimals, sci.parse::<f64>().expect("round trip"));
        trim_zeros(&plain)
    } else {
        format!("{}e{}", trim_zeros(mantissa), exp)
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        let t = s.trim_end_matches('0').trim_end_matches('.');
        if t == "-0" { "0".to_string() } else { t.to_string() }
    } else {
        s.to_string()
    }
}

/// `x` rounded to 12 significant digits.
pub fn round_sig(x: f64) -> f64 {
    fmt_num(x).parse().unwrap_or(x)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(path, text)?;
    Ok(())
}

fn csv_row(out: &mut String, cells: &[f64]) {
    for (i, c) in cells.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&fmt_num(*c));
    }
    out.push('\n');
}

pub fn envelope_csv(env: &Envelope, stride: usize) -> String {
    let mut out = String::from(ENVELOPE_HEADER);
    out.push('\n');
    for (i, (t, v)) in env.times().zip(&env.values).enumerate() {
        if i % stride.max(1) != 0 {
            continue;
        }
        let phase = if v.norm_sqr() > 0.0 { arg(*v) } else { 0.0 };
        csv_row(&mut out, &[t, v.re, v.im, v.norm_sqr(), phase]);
    }
    out
}

pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = String::from(TRAJECTORY_HEADER);
    out.push('\n');
    for i in 0..traj.times.len() {
        csv_row(&mut out, &[traj.times[i], traj.alpha_abs2[i], traj.beta_abs2[i], traj.norm[i]]);
    }
    out
}

pub fn phase_csv(profile: &PhaseProfile) -> String {
    let mut out = String::from(PHASE_HEADER);
    out.push('\n');
    for (t, p) in profile.times.iter().zip(&profile.phase) {
        csv_row(&mut out, &[*t, *p]);
    }
    out
}

pub fn sweep_csv(sweep: &SweepResult) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for (ratio, row) in sweep.axis.iter().zip(&sweep.fidelities) {
        csv_row(&mut out, &[*ratio, row[0], row[1], row[2], row[3]]);
    }
    out
}

pub fn convergence_csv(table: &ConvergenceTable) -> String {
    let mut out = String::from(CONVERGENCE_HEADER);
    out.push('\n');
    for r in &table.rows {
        let _ = write!(out, "{},", r.n_modes);
        csv_row(&mut out, &[r.dt, r.fidelities[0], r.fidelities[1], r.fidelities[2], r.fidelities[3], r.deviation]);
    }
    out
}

pub fn write_envelope_csv(path: &Path, env: &Envelope, stride: usize) -> Result<()> {
    write_text(path, &envelope_csv(env, stride))
}

pub fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> Result<()> {
    write_text(path, &trajectory_csv(traj))
}

pub fn write_phase_csv(path: &Path, profile: &PhaseProfile) -> Result<()> {
    write_text(path, &phase_csv(profile))
}

pub fn write_sweep_csv(path: &Path, sweep: &SweepResult) -> Result<()> {
    write_text(path, &sweep_csv(sweep))
}

pub fn write_convergence_csv(path: &Path, table: &ConvergenceTable) -> Result<()> {
    write_text(path, &convergence_csv(table))
}

fn num(x: f64) -> Value {
    json!(round_sig(x))
}

fn enum_label<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

pub fn params_json(setup: &GateSetup) -> Value {
    let p = &setup.params;
    json!({
        "g": num(p.g),
        "kappa": num(p.kappa),
        "kappa_convention": enum_label(&p.convention),
        "gamma": num(p.gamma),
        "delta_bind": num(p.delta_bind),
        "delta_cav": num(p.delta_cav),
        "n_modes": setup.grid.n_modes,
        "bandwidth": num(setup.grid.bandwidth),
        "center": num(setup.grid.center),
        "width": num(setup.photon1.width),
        "t0_1": num(setup.photon1.t0),
        "t0_2": num(setup.photon2.t0),
        "t1": num(setup.times.t1),
        "t2": num(setup.times.t2),
        "t_end": num(setup.times.t_end),
        "dt": num(setup.dt),
        "ramp_time": num(setup.ramp_time),
        "biexciton_coupling_factor": num(setup.biexciton_coupling_factor),
        "bare_cavity_model": enum_label(&setup.bare_cavity_model),
    })
}

pub fn scenario_json(r: &ScenarioResult) -> Value {
    let opt = |v: Option<f64>| v.map(num).unwrap_or(Value::Null);
    json!({
        "input_state": r.input_state.label(),
        "fidelity": num(r.fidelity()),
        "fidelity1": num(r.fidelity1),
        "fidelity2": num(r.fidelity2),
        "phase1": num(r.phase1),
        "phase2": num(r.phase2),
        "delay1": opt(r.photon1.as_ref().map(|p| p.fidelity.optimal_delay)),
        "delay2": opt(r.photon2.as_ref().map(|p| p.fidelity.optimal_delay)),
        "gate_element_re": num(r.gate_element.re),
        "gate_element_im": num(r.gate_element.im),
        "alt_gate_element_re": opt(r.alternative_gate_element.map(|c| c.re)),
        "alt_gate_element_im": opt(r.alternative_gate_element.map(|c| c.im)),
        "stored_excitation_prob": opt(r.stored_excitation_prob),
        "residual_model": enum_label(&r.setup.residual_model),
        "params": params_json(&r.setup),
    })
}

pub fn gate_json(m: &GateMatrix, sup: &SuperpositionOutput) -> Value {
    let cplx = |c: num_complex::Complex64| json!([round_sig(c.re), round_sig(c.im)]);
    let matrix = |rows: &[[num_complex::Complex64; 4]; 4]| {
        Value::Array(rows.iter().map(|row| Value::Array(row.iter().map(|c| cplx(*c)).collect())).collect())
    };
    json!({
        "basis": ["aa", "ab", "ba", "bb"],
        "elements": matrix(&m.elements),
        "target": matrix(&m.target),
        "metric": num(m.metric()),
        "correction_phase": num(m.correction_phase),
        "superposition_output": Value::Array(sup.amplitudes.iter().map(|c| cplx(*c)).collect()),
        "concurrence": num(sup.concurrence),
    })
}

pub fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_formatting() {
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(-0.0), "0");
        assert_eq!(fmt_num(1.0), "1");
        assert_eq!(fmt_num(0.001), "0.001");
        assert_eq!(fmt_num(std::f64::consts::PI), "3.14159265359");
        assert_eq!(fmt_num(-2.5e-9), "-2.5e-9");
        assert_eq!(fmt_num(123456.789), "123456.789");
        assert_eq!(fmt_num(0.1 + 0.2), "0.3");
        assert_eq!(round_sig(0.1 + 0.2), 0.3);
    }

    #[test]
    fn formatted_numbers_keep_twelve_digits() {
        for x in [1.0 / 3.0, -7.0e-7 / 3.0, 2.0e13 / 7.0, 0.75112554446] {
            let back: f64 = fmt_num(x).parse().unwrap();
            assert!(((back - x) / x).abs() < 1e-11, "{x} -> {}", fmt_num(x));
        }
    }
}
