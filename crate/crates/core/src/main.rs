#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qdgate::analysis::{convergence_check, gamma_sweep, phase_profile};
use qdgate::config::{load_config, RunConfig, StateSelection};
use qdgate::output;
use qdgate::protocol::{apply_to_superposition, assemble_gate_matrix, run_scenario, GateScenario, PhotonRun};
use qdgate::{Error, ErrorKind};

#[derive(Parser)]
#[command(name = "qdgate", version, about = "Photon-photon phase gate simulator for a Stark-tuned quantum dot in a cavity")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// TOML configuration file; defaults are used when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, overrides `output.dir`
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one input state, or all four and assemble the gate matrix
    Run {
        #[command(flatten)]
        common: Common,
        /// aa, ab, ba, bb or all; overrides `scenario.state`
        #[arg(long)]
        state: Option<StateSelection>,
    },
    /// Sweep the exciton decay gamma/kappa and record all four fidelities
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated, strictly increasing gamma/kappa values
        #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
        ratios: Vec<f64>,
    },
    /// Rerun the gate on a grid of mode counts and time steps
    Converge {
        #[command(flatten)]
        common: Common,
        /// Comma-separated mode counts
        #[arg(long, value_delimiter = ',', default_value = "2000,4000")]
        grids: Vec<usize>,
        /// Comma-separated time steps
        #[arg(long, value_delimiter = ',', default_value = "0.001,0.0005")]
        steps: Vec<f64>,
    },
}

enum Failure {
    Usage(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn load(common: &Common) -> Result<(RunConfig, PathBuf), Failure> {
    let config = match &common.config {
        Some(path) => load_config(path)?,
        None => RunConfig::default(),
    };
    let out = common.out.clone().unwrap_or_else(|| config.output.dir.clone());
    Ok((config, out))
}

fn write_photon(dir: &Path, label: &str, which: u8, run: &PhotonRun, stride: usize) -> Result<(), Error> {
    let stem = format!("{label}_photon{which}");
    output::write_trajectory_csv(&dir.join(format!("trajectory_{stem}.csv")), &run.trajectory)?;
    output::write_envelope_csv(&dir.join(format!("envelope_{stem}_in.csv")), &run.input, stride)?;
    output::write_envelope_csv(&dir.join(format!("envelope_{stem}_out.csv")), &run.output, stride)?;
    let profile = phase_profile(&run.input, &run.output, run.fidelity.optimal_delay)?;
    output::write_phase_csv(&dir.join(format!("phase_{stem}.csv")), &profile)?;
    Ok(())
}

fn cmd_run(common: &Common, state: Option<StateSelection>) -> Result<(), Failure> {
    let (config, out) = load(common)?;
    let selection = state.unwrap_or(config.scenario.state);
    let setup = config.to_setup()?;
    let stride = config.output.envelope_stride as usize;
    let results = selection
        .states()
        .into_iter()
        .map(|s| run_scenario(&GateScenario::new(s, setup.clone())))
        .collect::<Result<Vec<_>, _>>()?;

    println!("state  fidelity    fidelity1   fidelity2   phase1      phase2      stored");
    for r in &results {
        let label = r.input_state.label();
        if let Some(run) = &r.photon1 {
            write_photon(&out, label, 1, run, stride)?;
        }
        if let Some(run) = &r.photon2 {
            write_photon(&out, label, 2, run, stride)?;
        }
        output::write_json(&out.join(format!("scenario_{label}.json")), &output::scenario_json(r))?;
        let stored = r.stored_excitation_prob.map(output::fmt_num).unwrap_or_else(|| "-".into());
        println!(
            "{label:<6} {:<11.6} {:<11.6} {:<11.6} {:<11.6} {:<11.6} {stored}",
            r.fidelity(),
            r.fidelity1,
            r.fidelity2,
            r.phase1,
            r.phase2
        );
    }

    if selection == StateSelection::All {
        let matrix = assemble_gate_matrix(&results)?;
        let sup = apply_to_superposition(&matrix)?;
        output::write_json(&out.join("gate.json"), &output::gate_json(&matrix, &sup))?;
        println!("gate metric {:.6}, concurrence {:.6}, correction phase {:.6}", matrix.metric(), sup.concurrence, matrix.correction_phase);
    }
    Ok(())
}

fn cmd_sweep(common: &Common, ratios: &[f64]) -> Result<(), Failure> {
    if ratios.is_empty() {
        return Err(Failure::Usage("--ratios needs at least one value".into()));
    }
    if ratios.iter().any(|r| !(*r >= 0.0) || !r.is_finite()) {
        return Err(Failure::Usage("--ratios values must be finite and ≥ 0".into()));
    }
    if ratios.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Failure::Usage("--ratios must be strictly increasing".into()));
    }
    let (config, out) = load(common)?;
    let setup = config.to_setup()?;
    let sweep = gamma_sweep(&setup, ratios)?;
    output::write_sweep_csv(&out.join("sweep.csv"), &sweep)?;
    print!("{}", output::sweep_csv(&sweep));
    Ok(())
}

fn cmd_converge(common: &Common, grids: &[usize], steps: &[f64]) -> Result<(), Failure> {
    if grids.is_empty() || grids.iter().any(|n| *n < 2) {
        return Err(Failure::Usage("--grids values must be ≥ 2".into()));
    }
    if steps.is_empty() || steps.iter().any(|d| !(*d > 0.0) || !d.is_finite()) {
        return Err(Failure::Usage("--steps values must be > 0".into()));
    }
    let (config, out) = load(common)?;
    let setup = config.to_setup()?;
    let table = convergence_check(&setup, grids, steps)?;
    output::write_convergence_csv(&out.join("convergence.csv"), &table)?;
    print!("{}", output::convergence_csv(&table));
    println!("max deviation {}", output::fmt_num(table.max_deviation));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { common, state } => cmd_run(common, *state),
        Command::Sweep { common, ratios } => cmd_sweep(common, ratios),
        Command::Converge { common, grids, steps } => cmd_converge(common, grids, steps),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Validation => 3,
                ErrorKind::Numerical => 4,
                ErrorKind::Io => 1,
            })
        }
    }
}
