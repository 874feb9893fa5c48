use std::path::{Path, PathBuf};
use std::process::ExitCode;

use aerocable::experiments::suite::{self, Overrides};
use aerocable::experiments::tracking::train_bases;
use aerocable::mpc::SolverVariant;
use aerocable::rom::{PodBasis, RomVariant};
use aerocable::scenario::{tracking_free_start, Scenario};
use clap::{Parser, Subcommand, ValueEnum};

/// Cable simulation, reduced models and hybrid MPC experiments.
/// Worker threads: AEROCABLE_WORKERS (default: all cores).
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Scenario file (JSON).
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    solver: Option<Solver>,
    #[arg(long = "rom-order", global = true)]
    rom_order: Option<usize>,
    #[arg(long, global = true)]
    variant: Option<Variant>,
    /// Directory written by `train-basis`; bases are retrained when absent.
    #[arg(long, global = true)]
    bases: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Train POD bases in both modes and write the energy table.
    TrainBasis,
    /// Release-test sweep over reduced orders.
    EvalRom,
    /// Closed-loop tracking of the scenario waypoints.
    Track,
    /// Offline plan of a scenario with obstacles.
    Plan,
    /// Closed-loop execution of a stored plan.
    RunPlan {
        /// Plan directory (defaults to the output directory).
        #[arg(long)]
        plan: Option<PathBuf>,
    },
    /// Every experiment with the default scenarios.
    ReplicateAll,
}

#[derive(Clone, Copy, ValueEnum)]
enum Solver {
    Hilqr,
    Rti,
}

#[derive(Clone, Copy, ValueEnum)]
enum Variant {
    Proposed,
    Baseline,
}

fn scenario(cli: &Cli, overrides: &Overrides, required: bool) -> aerocable::Result<Scenario> {
    let mut s = match &cli.scenario {
        Some(p) => Scenario::load(p).map_err(|e| aerocable::Error::Config(format!("{}: {e}", p.display())))?,
        None if required => return Err(aerocable::Error::Config("--scenario is required for this command".into())),
        None => tracking_free_start(),
    };
    overrides.apply(&mut s);
    s.validate()?;
    Ok(s)
}

fn bases(cli: &Cli, s: &Scenario) -> aerocable::Result<[PodBasis; 2]> {
    match &cli.bases {
        Some(dir) => suite::load_bases(dir, s.mpc.variant),
        None => train_bases(&s.params, &s.training, s.mpc.variant),
    }
}

fn run(cli: &Cli) -> aerocable::Result<()> {
    let overrides = Overrides {
        seed: cli.seed,
        solver: cli.solver.map(|s| match s {
            Solver::Hilqr => SolverVariant::Hilqr,
            Solver::Rti => SolverVariant::Rti,
        }),
        rom_order: cli.rom_order,
        variant: cli.variant.map(|v| match v {
            Variant::Proposed => RomVariant::Proposed,
            Variant::Baseline => RomVariant::Baseline,
        }),
    };
    let out = cli.out.as_path();
    match &cli.command {
        Command::TrainBasis => {
            suite::train_basis(&scenario(cli, &overrides, false)?, out)?;
        }
        Command::EvalRom => {
            let s = scenario(cli, &overrides, false)?;
            let b = match &cli.bases {
                Some(dir) => load_mode_bases(dir)?,
                None => suite::train_basis(&s, &out.join("basis"))?,
            };
            suite::eval_rom(&s, &b, out)?;
        }
        Command::Track => {
            let s = scenario(cli, &overrides, true)?;
            report(&suite::track(&s, &bases(cli, &s)?, out)?);
        }
        Command::Plan => {
            let s = scenario(cli, &overrides, true)?;
            suite::plan(&s, &bases(cli, &s)?, out)?;
        }
        Command::RunPlan { plan } => {
            let s = scenario(cli, &overrides, true)?;
            report(&suite::run_plan(&s, &bases(cli, &s)?, plan.as_deref().unwrap_or(out), out)?);
        }
        Command::ReplicateAll => {
            let r = suite::replicate_all(&overrides, out)?;
            r.tracking.iter().for_each(report);
            report(&r.pick_and_place);
            println!("pick_and_place with rti: rejected ({})", r.rti_rejection);
        }
    }
    Ok(())
}

fn load_mode_bases(dir: &Path) -> aerocable::Result<Vec<aerocable::experiments::release::ModeBases>> {
    use aerocable::Mode;
    [Mode::FreeTip, Mode::Slung]
        .into_iter()
        .map(|mode| {
            Ok(aerocable::experiments::release::ModeBases {
                mode,
                proposed: PodBasis::load(&suite::basis_path(dir, RomVariant::Proposed, mode))?,
                baseline: PodBasis::load(&suite::basis_path(dir, RomVariant::Baseline, mode))?,
            })
        })
        .collect()
}

fn report(m: &aerocable::metrics::RunSummary) {
    let events: Vec<String> = m.events.iter().map(|e| format!("{}@{:.3}", e.kind, e.t)).collect();
    println!(
        "{} [{}] tip_pos {:.3} m, tip_vel {:.3} m/s, eps_p {:.3} m, mean solve {:.2} ms, events: {}{}",
        m.name,
        m.solver,
        m.tip_pos_rms,
        m.tip_vel_rms,
        m.eps_p_rms,
        m.stats.mean_wall_ms,
        if events.is_empty() { "none".into() } else { events.join(" ") },
        m.failure.as_deref().map(|f| format!(", FAILED: {f}")).unwrap_or_default()
    );
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("AEROCABLE_WORKERS").ok().and_then(|v| v.parse().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
