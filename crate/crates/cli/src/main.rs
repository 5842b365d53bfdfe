use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qsub_cli::*;
use qsub_core::measure::{ControlRule, Topology};
use qsub_core::numfmt::sig12;
use qsub_core::vqe::Entangler;

#[derive(Parser)]
#[command(
    name = "qsub",
    version,
    about = "Constrained-subspace qubit mapping and measurement"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Map a fermionic Hamiltonian onto its constrained subspace
    Map {
        hamiltonian: PathBuf,
        #[arg(short, long)]
        constraints: Option<PathBuf>,
        #[arg(short, long, default_value = "out")]
        out: PathBuf,
    },
    /// Group a reduced Hamiltonian into measurement circuits
    Group {
        reduced: PathBuf,
        #[arg(long, default_value = "star")]
        topology: Topology,
        /// lowest, highest or max-neighbors
        #[arg(long)]
        control: Option<ControlRule>,
        /// Edge list `a b` per line
        #[arg(long)]
        coupling: Option<PathBuf>,
        #[arg(short, long, default_value = "plan")]
        out: PathBuf,
    },
    /// Run the plan circuits on a prepared state and reconstruct the energy
    Measure {
        plan: PathBuf,
        prep: PathBuf,
        #[arg(long)]
        shots: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        subspace: Option<PathBuf>,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Exact spectrum of a reduced or fermionic Hamiltonian
    Eig {
        /// Hamiltonian file; omit with --batch
        input: Option<PathBuf>,
        #[arg(short, long)]
        constraints: Option<PathBuf>,
        /// Directory of `.ham` files named with their bond distance
        #[arg(long, conflicts_with = "input")]
        batch: Option<PathBuf>,
        #[arg(short, long, default_value = "eig")]
        out: PathBuf,
    },
    /// Variational ground-state search
    Vqe {
        input: PathBuf,
        #[arg(short, long)]
        constraints: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        layers: usize,
        #[arg(long, default_value = "chain")]
        entangler: Entangler,
        #[arg(long, default_value_t = 500)]
        budget: usize,
        #[arg(long)]
        shots: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        initial: Option<usize>,
        #[arg(short, long, default_value = "vqe")]
        out: PathBuf,
    },
    /// Pauli-string count of a fermionic or reduced Hamiltonian
    PauliCount { input: PathBuf },
    /// Check the plan circuits of a directory
    VerifyCircuits { plan: PathBuf },
}

fn run(cli: Cli) -> CliResult<()> {
    let report = match cli.command {
        Command::Map {
            hamiltonian,
            constraints,
            out,
        } => {
            let r = cmd_map(&hamiltonian, constraints.as_deref(), &out)?;
            println!("{}", r.summary());
            r
        }
        Command::Group {
            reduced,
            topology,
            control,
            coupling,
            out,
        } => {
            let options = GroupOptions {
                topology,
                control,
                coupling,
            };
            cmd_group(&reduced, &options, &out)?
        }
        Command::Measure {
            plan,
            prep,
            shots,
            seed,
            subspace,
            out,
        } => {
            let options = MeasureOptions {
                shots,
                seed,
                subspace,
                out,
            };
            let r = cmd_measure(&plan, &prep, &options)?;
            if let Some(e) = r.energy("measured") {
                println!("energy={}", sig12(e));
            }
            r
        }
        Command::Eig {
            input,
            constraints,
            batch,
            out,
        } => match (input, batch) {
            (_, Some(dir)) => cmd_eig_batch(&dir, constraints.as_deref(), &out)?,
            (Some(input), None) => {
                let r = cmd_eig(&input, constraints.as_deref(), &out)?;
                if let Some(e) = r.energy("ground") {
                    println!("ground_energy={}", sig12(e));
                }
                r
            }
            (None, None) => {
                return Err(CliError::Usage("eig needs an input file or --batch".into()))
            }
        },
        Command::Vqe {
            input,
            constraints,
            layers,
            entangler,
            budget,
            shots,
            seed,
            initial,
            out,
        } => {
            let options = VqeOptions {
                layers,
                entangler,
                budget,
                shots,
                seed,
                initial,
            };
            let r = cmd_vqe(&input, constraints.as_deref(), &options, &out)?;
            if let Some(e) = r.energy("vqe") {
                println!("energy={}", sig12(e));
            }
            r
        }
        Command::PauliCount { input } => cmd_pauli_count(&input)?,
        Command::VerifyCircuits { plan } => {
            let (r, checks) = cmd_verify_circuits(&plan)?;
            for c in &checks {
                println!(
                    "{} r_residual={} equivalence_residual={}",
                    c.name,
                    sig12(c.r_residual),
                    sig12(c.equivalence_residual)
                );
            }
            r
        }
    };
    print!("{}", report.to_text());
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
