//! Acceptance suite: one PASS/FAIL line per criterion. Exits non-zero if any
//! criterion fails.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;

use qdgate::analysis::{convergence_check, fidelity, gamma_sweep, phase_profile, wrap_phase};
use qdgate::dynamics::{integrate, ExcitationState, Segment, StarkSchedule};
use qdgate::model::{
    build_mode_grid, envelope_to_modes, modes_to_envelope, synthesize, KappaConvention, ModeGrid, PulseSpec,
    SystemParams, TimeGrid,
};
use qdgate::output::scenario_json;
use qdgate::protocol::{
    apply_to_superposition, assemble_gate_matrix, calibrate_width, ideal_gate, run_all, run_scenario,
    BareCavityModel, GateMatrix, GateScenario, GateSetup, InputState, ScenarioResult, WidthCalibration,
};
use qdgate::C64;

const N_MODES: usize = 2000;
const BANDWIDTH: f64 = 20.0;
const DT: f64 = 1e-3;

const F_AA_TARGET: f64 = 0.89;
const F_AA_TOL: f64 = 0.02;
const RUNTIME_LIMIT_S: f64 = 120.0;
const WIDTH_RANGE: (f64, f64) = (0.7, 1.5);
const WIDTH_STEP: f64 = 0.05;
const PHASE_TOL: f64 = 0.05;
const PHASE_COUPLINGS: [f64; 3] = [0.5, 1.0, 2.0];
const STORAGE_TARGET: f64 = 0.97;
const STORAGE_TOL: f64 = 0.03;
const SWEEP_RATIOS: [f64; 10] = [0.0, 0.0025, 0.005, 0.0075, 0.01, 0.02, 0.05, 0.1, 0.15, 0.2];
const SWEEP_FLOOR: f64 = 0.85;
const SWEEP_FLOOR_RATIO: f64 = 0.01;
const MONOTONE_SLACK: f64 = 1e-9;
const NORM_TOL: f64 = 1e-6;
const ORACLE_WIDTH: f64 = 20.0;
const ORACLE_DT: f64 = 0.01;
const ORACLE_GAMMAS: [f64; 2] = [0.0, 0.1];
const ORACLE_TOL: f64 = 1e-2;
const BRUTE_MODES: usize = 8;
const BRUTE_TOL: f64 = 1e-6;
const CONVERGENCE_GRIDS: [usize; 2] = [2000, 4000];
const CONVERGENCE_STEPS: [f64; 2] = [1e-3, 5e-4];
const CONVERGENCE_TOL: f64 = 1e-3;
const IDEAL_TOL: f64 = 1e-12;
const CONCURRENCE_FLOOR: f64 = 0.85;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

struct Baseline {
    calibration: WidthCalibration,
    setup: GateSetup,
    results: Vec<ScenarioResult>,
    aa_seconds: f64,
}

fn params_for(g: f64, grid: &ModeGrid) -> SystemParams {
    SystemParams::new(g, g, 0.0, KappaConvention::Field, grid).expect("valid parameters")
}

fn default_grid() -> ModeGrid {
    build_mode_grid(N_MODES, BANDWIDTH, 0.0).expect("valid grid")
}

fn baseline() -> &'static Baseline {
    static CELL: OnceLock<Baseline> = OnceLock::new();
    CELL.get_or_init(|| {
        let grid = default_grid();
        let params = params_for(1.0, &grid);
        let n = ((WIDTH_RANGE.1 - WIDTH_RANGE.0) / WIDTH_STEP).round() as usize;
        let widths: Vec<f64> = (0..=n).map(|i| WIDTH_RANGE.0 + i as f64 * WIDTH_STEP).collect();
        let calibration = calibrate_width(&params, &grid, DT, &widths).expect("calibration");
        let setup = GateSetup::standard(params, grid, calibration.width, DT).expect("setup");
        let start = Instant::now();
        let aa = run_scenario(&GateScenario::new(InputState::Aa, setup.clone())).expect("aa scenario");
        let aa_seconds = start.elapsed().as_secs_f64();
        let mut results = run_all(&setup).expect("all scenarios");
        results[InputState::Aa.index()] = aa;
        Baseline { calibration, setup, results, aa_seconds }
    })
}

fn result(state: InputState) -> &'static ScenarioResult {
    &baseline().results[state.index()]
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fidelity_aa() -> Outcome {
    let b = baseline();
    let aa = result(InputState::Aa);
    let branched = aa.fidelity();
    let renormalized = aa.alternative_gate_element.expect("aa carries both residual models").norm();
    let within = |f: f64| (f - F_AA_TARGET).abs() <= F_AA_TOL;
    let selected = if within(branched) {
        "branched"
    } else if within(renormalized) {
        "renormalized"
    } else {
        "none"
    };
    let fast = b.aa_seconds < RUNTIME_LIMIT_S;
    verdict(
        selected != "none" && fast,
        format!(
            "w={:.2}: branched {branched:.4}, renormalized {renormalized:.4} (target {F_AA_TARGET} ± {F_AA_TOL}, selected {selected}); runtime {:.1}s (< {RUNTIME_LIMIT_S}s)",
            b.calibration.width, b.aa_seconds
        ),
    )
}

fn ba_phase_check(r: &ScenarioResult) -> (f64, f64) {
    let run = r.photon2.as_ref().expect("ba reflects photon 2");
    let aggregate = wrap_phase(r.phase2 - PI).abs();
    let profile = phase_profile(&run.input, &run.output, run.fidelity.optimal_delay).expect("phase profile");
    let half_width = r.setup.photon2.width * 2f64.ln().sqrt();
    let centre = r.setup.photon2.t0 + run.fidelity.optimal_delay;
    let flat = profile
        .times
        .iter()
        .zip(&profile.phase)
        .filter(|(t, _)| (**t - centre).abs() <= half_width)
        .map(|(_, p)| wrap_phase(p - PI).abs())
        .fold(0.0, f64::max);
    (aggregate, flat)
}

fn pi_phase() -> Outcome {
    let w_cal = baseline().calibration.width;
    let checks: Vec<(f64, f64, f64)> = PHASE_COUPLINGS
        .par_iter()
        .map(|&g| {
            let (agg, flat) = if g == 1.0 {
                ba_phase_check(result(InputState::Ba))
            } else {
                let grid = default_grid();
                let setup = GateSetup::standard(params_for(g, &grid), grid, w_cal / g, DT).expect("setup");
                ba_phase_check(&run_scenario(&GateScenario::new(InputState::Ba, setup)).expect("ba scenario"))
            };
            (g, agg, flat)
        })
        .collect();
    let ok = checks.iter().all(|(_, a, f)| *a <= PHASE_TOL && *f <= PHASE_TOL);
    let detail = checks
        .iter()
        .map(|(g, a, f)| format!("g=kappa={g}: |phase-pi| {a:.2e}, FWHM spread {f:.2e}"))
        .collect::<Vec<_>>()
        .join("; ");
    verdict(ok, format!("{detail} (tol {PHASE_TOL})"))
}

fn storage() -> Outcome {
    let p = result(InputState::Aa).stored_excitation_prob.expect("photon 1 stored");
    let w = baseline().calibration.width;
    verdict((p - STORAGE_TARGET).abs() <= STORAGE_TOL, format!("|alpha(T1)|^2 = {p:.4} at w={w:.2} (target {STORAGE_TARGET} ± {STORAGE_TOL})"))
}

fn sweep_shape() -> Outcome {
    let sweep = gamma_sweep(&baseline().setup, &SWEEP_RATIOS).map_err(|e| e.to_string())?;
    let series: Vec<Vec<f64>> = InputState::ALL.iter().map(|s| sweep.series(*s)).collect();
    let monotone = series.iter().all(|s| s.windows(2).all(|w| w[1] <= w[0] + MONOTONE_SLACK));
    let aa = &series[InputState::Aa.index()];
    let lowest = sweep.fidelities.iter().all(|row| row[1..].iter().all(|f| row[0] <= *f + MONOTONE_SLACK));
    let drop = |s: &Vec<f64>| s[0] - s[s.len() - 1];
    let steepest = series.iter().all(|s| drop(aa) >= drop(s) - MONOTONE_SLACK);
    let floor = SWEEP_RATIOS
        .iter()
        .zip(aa)
        .filter(|(r, _)| **r <= SWEEP_FLOOR_RATIO)
        .map(|(_, f)| *f)
        .fold(f64::INFINITY, f64::min);
    let floor_ok = floor >= SWEEP_FLOOR;
    let at = |r: f64| SWEEP_RATIOS.iter().position(|x| *x == r).map(|i| aa[i]).unwrap_or(f64::NAN);
    verdict(
        monotone && lowest && steepest && floor_ok,
        format!(
            "monotone {monotone}, aa lowest {lowest}, aa steepest {steepest}; min F(aa) for gamma/kappa <= {SWEEP_FLOOR_RATIO} is {floor:.4} (need >= {SWEEP_FLOOR}); F(aa) at 0, 0.01, 0.2: {:.4}, {:.4}, {:.4}",
            at(0.0),
            at(0.01),
            at(0.2)
        ),
    )
}

fn norm_conservation() -> Outcome {
    let worst = baseline()
        .results
        .iter()
        .flat_map(|r| r.photon1.iter().chain(r.photon2.iter()))
        .flat_map(|run| run.trajectory.norm.iter())
        .map(|n| (1.0 - n).abs())
        .fold(0.0, f64::max);
    verdict(worst < NORM_TOL, format!("max |1 - norm| = {worst:.2e} (tol {NORM_TOL:.0e})"))
}

/// Steady-state reflection of a single-sided cavity with an optional resonant
/// two-level emitter, for a monochromatic probe at the cavity frequency.
fn steady_state_reflection(kappa_e: f64, g: f64, gamma: f64, emitter: bool) -> C64 {
    let d_c = C64::new(kappa_e / 2.0, 0.0);
    if !emitter {
        return C64::new(1.0, 0.0) - kappa_e / d_c;
    }
    let d_qd = C64::new(gamma, 0.0);
    C64::new(1.0, 0.0) - kappa_e * d_qd / (d_c * d_qd + g * g)
}

fn narrowband_oracle() -> Outcome {
    let cases: Vec<(bool, f64)> = [false, true].iter().flat_map(|e| ORACLE_GAMMAS.iter().map(move |g| (*e, *g))).collect();
    let rows: Vec<Result<(bool, f64, f64, f64), String>> = cases
        .par_iter()
        .map(|&(emitter, gamma)| {
            let grid = default_grid();
            let base = SystemParams::new(1.0, 1.0, gamma, KappaConvention::Field, &grid).map_err(|e| e.to_string())?;
            let params = if emitter { base.clone() } else { base.with_coupling(0.0) };
            let t0 = 6.0 * ORACLE_WIDTH;
            let times = TimeGrid::covering(0.0, 2.0 * t0, ORACLE_DT).map_err(|e| e.to_string())?;
            let input = synthesize(&PulseSpec::gaussian(t0, ORACLE_WIDTH), &times).map_err(|e| e.to_string())?;
            let initial = ExcitationState::from_modes(envelope_to_modes(&input, &grid, 0.0).map_err(|e| e.to_string())?);
            let end = times.end();
            let schedule = StarkSchedule::constant(0.0, end, 0.0).map_err(|e| e.to_string())?;
            let traj = integrate(&initial, &params, &grid, &schedule, 0.0, end, ORACLE_DT, usize::MAX)
                .map_err(|e| e.to_string())?;
            let output = modes_to_envelope(&traj.final_state.beta_k, &grid, end, &times).map_err(|e| e.to_string())?;
            let simulated = fidelity(&input, &output).map_err(|e| e.to_string())?.overlap_amplitude;
            let expected = steady_state_reflection(2.0, 1.0, gamma, emitter);
            let dmag = (simulated.norm() - expected.norm()).abs();
            let dphase = wrap_phase(simulated.arg() - expected.arg()).abs();
            Ok((emitter, gamma, dmag, dphase))
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;
    let ok = rows.iter().all(|(_, _, m, p)| *m <= ORACLE_TOL && *p <= ORACLE_TOL);
    let detail = rows
        .iter()
        .map(|(e, g, m, p)| format!("{} gamma={g}: d|r| {m:.1e}, d arg r {p:.1e}", if *e { "resonant" } else { "decoupled" }))
        .collect::<Vec<_>>()
        .join("; ");
    verdict(ok, format!("{detail} (tol {ORACLE_TOL:.0e})"))
}

fn generator(params: &SystemParams, grid: &ModeGrid, qd_detuning: f64) -> DMatrix<C64> {
    let n = grid.n_modes + 2;
    let i = C64::new(0.0, 1.0);
    let mut m = DMatrix::from_element(n, n, C64::new(0.0, 0.0));
    m[(0, 0)] = -(i * qd_detuning + params.gamma);
    m[(0, 1)] = C64::new(params.g, 0.0);
    m[(1, 0)] = C64::new(-params.g, 0.0);
    m[(1, 1)] = -i * params.delta_cav;
    for (k, d) in grid.detunings.iter().enumerate() {
        m[(1, k + 2)] = C64::new(params.kappa_prime, 0.0);
        m[(k + 2, 1)] = C64::new(-params.kappa_prime, 0.0);
        m[(k + 2, k + 2)] = -i * *d;
    }
    m
}

fn brute_force() -> Outcome {
    let grid = build_mode_grid(BRUTE_MODES, 2.0, 0.0).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for gamma in [0.0, 0.05] {
        let params = SystemParams::new(1.0, 1.0, gamma, KappaConvention::Field, &grid)
            .map_err(|e| e.to_string())?
            .with_detunings(0.3, 20.0);
        let segments = vec![
            Segment { start: 0.0, end: 2.0, detuning: 0.0 },
            Segment { start: 2.0, end: 5.0, detuning: 3.0 },
            Segment { start: 5.0, end: 8.0, detuning: -1.0 },
        ];
        let schedule = StarkSchedule::new(segments.clone(), 0.0).map_err(|e| e.to_string())?;
        let beta_k: Vec<C64> = (0..BRUTE_MODES).map(|k| C64::new(0.1 * k as f64, 0.05 - 0.02 * k as f64)).collect();
        let mut initial = ExcitationState { alpha: C64::new(0.3, 0.1), beta: C64::new(0.0, 0.2), beta_k };
        let scale = 1.0 / initial.norm().sqrt();
        initial = initial.combine(C64::new(scale, 0.0), &ExcitationState::vacuum(BRUTE_MODES), C64::new(0.0, 0.0));
        let traj = integrate(&initial, &params, &grid, &schedule, 0.0, 8.0, DT, usize::MAX).map_err(|e| e.to_string())?;

        let mut y = nalgebra::DVector::from_iterator(
            BRUTE_MODES + 2,
            [initial.alpha, initial.beta].into_iter().chain(initial.beta_k.iter().copied()),
        );
        for s in &segments {
            let m = generator(&params, &grid, s.detuning) * C64::new(s.end - s.start, 0.0);
            y = m.exp() * y;
        }
        let f = &traj.final_state;
        let sim = [f.alpha, f.beta].into_iter().chain(f.beta_k.iter().copied());
        for (a, b) in sim.zip(y.iter()) {
            worst = worst.max((a - b).norm());
        }
    }
    verdict(worst <= BRUTE_TOL, format!("max amplitude error vs matrix exponential {worst:.2e} (tol {BRUTE_TOL:.0e})"))
}

fn convergence() -> Outcome {
    let table = convergence_check(&baseline().setup, &CONVERGENCE_GRIDS, &CONVERGENCE_STEPS).map_err(|e| e.to_string())?;
    verdict(
        table.max_deviation < CONVERGENCE_TOL,
        format!(
            "N in {CONVERGENCE_GRIDS:?}, dt in {CONVERGENCE_STEPS:?}: max |dF| {:.2e} (tol {CONVERGENCE_TOL:.0e})",
            table.max_deviation
        ),
    )
}

fn gate_algebra() -> Outcome {
    let ideal = GateMatrix { elements: ideal_gate(), target: ideal_gate(), correction_phase: 0.0 };
    let sup = apply_to_superposition(&ideal).map_err(|e| e.to_string())?;
    let expected = [0.5, 0.5, -0.5, 0.5];
    let amp_err = sup.amplitudes.iter().zip(expected).map(|(a, e)| (a - C64::new(e, 0.0)).norm()).fold(0.0, f64::max);
    let ideal_ok = amp_err <= IDEAL_TOL && (sup.concurrence - 1.0).abs() <= IDEAL_TOL;
    let measured = assemble_gate_matrix(&baseline().results).map_err(|e| e.to_string())?;
    let c = apply_to_superposition(&measured).map_err(|e| e.to_string())?.concurrence;
    verdict(
        ideal_ok && c >= CONCURRENCE_FLOOR,
        format!(
            "ideal: amplitude error {amp_err:.1e}, concurrence {:.12}; measured concurrence {c:.4} (need >= {CONCURRENCE_FLOOR})",
            sup.concurrence
        ),
    )
}

fn dir_contents(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .expect("output directory")
        .map(|e| {
            let e = e.expect("entry");
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).expect("read"))
        })
        .collect();
    files.sort();
    files
}

fn determinism() -> Outcome {
    let again = run_all(&baseline().setup).map_err(|e| e.to_string())?;
    let lib_same = again
        .iter()
        .zip(&baseline().results)
        .all(|(a, b)| scenario_json(a) == scenario_json(b));

    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = tmp.path().join("run.toml");
    std::fs::write(&config, "[grid]\nn_modes = 800\nbandwidth = 10.0\n[schedule]\ndt = 0.002\n").map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for name in ["first", "second"] {
        let out = tmp.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_qdgate"))
            .args(["run", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(format!("qdgate run failed: {}", String::from_utf8_lossy(&status.stderr)));
        }
        outputs.push((dir_contents(&out), status.stdout));
    }
    let files = outputs[0].0.len();
    let cli_same = outputs[0] == outputs[1] && files > 0;
    verdict(lib_same && cli_same, format!("library results identical {lib_same}; CLI: {files} files and stdout byte-identical {cli_same}"))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("fidelity_aa_gamma0", fidelity_aa),
        ("pi_phase_shift", pi_phase),
        ("storage_efficiency", storage),
        ("gamma_sweep_shape", sweep_shape),
        ("norm_conservation", norm_conservation),
        ("narrowband_oracle", narrowband_oracle),
        ("brute_force_equivalence", brute_force),
        ("convergence", convergence),
        ("gate_algebra", gate_algebra),
        ("determinism", determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    let mut ran = 0;
    for (name, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {name} [{secs:.1}s]: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name} [{secs:.1}s]: {detail}");
            }
        }
    }
    let extra = detuned_exciton_note();
    println!("note: {extra}");
    println!("acceptance: {} passed, {failed} failed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

/// The alternative bare-cavity model is reported but not graded.
fn detuned_exciton_note() -> String {
    let mut setup = baseline().setup.clone();
    setup.bare_cavity_model = BareCavityModel::DetunedExciton;
    match run_scenario(&GateScenario::new(InputState::Ba, setup)) {
        Ok(r) => format!(
            "bare cavity with detuned exciton: ba phase {:.4} (|phase-pi| {:.3}), fidelity {:.4}",
            r.phase2,
            wrap_phase(r.phase2 - PI).abs(),
            r.fidelity()
        ),
        Err(e) => format!("bare cavity with detuned exciton failed: {e}"),
    }
}
