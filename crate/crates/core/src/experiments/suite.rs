//! File-producing experiment drivers. Each writes into its own directory;
//! deterministic CSVs are kept apart from wall-clock timings, which only go
//! to `timing*.csv` and the JSON summaries.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::experiments::planning::{plan_scenario, run_plan as track_plan};
use crate::experiments::release::{evaluate_roms, ModeBases, ReleaseConfig};
use crate::experiments::tracking::track as track_scenario;
use crate::metrics::{write_json, RunSummary, Table};
use crate::mpc::{SolverConfig, SolverVariant};
use crate::params::Mode;
use crate::planner::load_plan;
use crate::rom::training::run_training;
use crate::rom::{mode_energy, PodBasis, RomVariant};
use crate::scenario::{pick_and_place, tracking_free_start, tracking_slung_start, Scenario};

/// Command-line overrides applied on top of a scenario file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub solver: Option<SolverVariant>,
    pub rom_order: Option<usize>,
    pub variant: Option<RomVariant>,
}

impl Overrides {
    pub fn apply(&self, scenario: &mut Scenario) {
        if let Some(seed) = self.seed {
            scenario.sim.seed = seed;
        }
        match self.solver {
            Some(SolverVariant::Rti) => scenario.mpc.solver = SolverConfig::rti(),
            Some(SolverVariant::Hilqr) => scenario.mpc.solver = SolverConfig::default(),
            None => {}
        }
        if let Some(r) = self.rom_order {
            scenario.mpc.rom_order = r;
        }
        if let Some(v) = self.variant {
            scenario.mpc.variant = v;
        }
    }
}

fn variant_name(v: RomVariant) -> &'static str {
    match v {
        RomVariant::Proposed => "proposed",
        RomVariant::Baseline => "baseline",
    }
}

fn mode_name(m: Mode) -> &'static str {
    match m {
        Mode::FreeTip => "free",
        Mode::Slung => "slung",
    }
}

/// Path of a stored basis inside a `train-basis` output directory.
pub fn basis_path(dir: &Path, variant: RomVariant, mode: Mode) -> PathBuf {
    dir.join(format!("basis_{}_{}.json", variant_name(variant), mode_name(mode)))
}

/// Loads the two bases of one variant written by [`train_basis`].
pub fn load_bases(dir: &Path, variant: RomVariant) -> Result<[PodBasis; 2]> {
    Ok([PodBasis::load(&basis_path(dir, variant, Mode::FreeTip))?, PodBasis::load(&basis_path(dir, variant, Mode::Slung))?])
}

/// Training runs in both modes. Writes every basis and `energy.csv` with
/// columns (variant, mode, k, energy, cumulative); variant 0 is the
/// proposed decomposition, mode 0 the free tip.
pub fn train_basis(scenario: &Scenario, out: &Path) -> Result<Vec<ModeBases>> {
    fs::create_dir_all(out)?;
    let runs: Vec<_> = [Mode::FreeTip, Mode::Slung]
        .into_par_iter()
        .map(|m| run_training(&scenario.params, m, &scenario.training))
        .collect::<Result<_>>()?;
    let mut energy = Table::new(["variant", "mode", "k", "energy", "cumulative"]);
    let mut bases = Vec::new();
    for run in &runs {
        let proposed = run.basis(RomVariant::Proposed)?;
        let baseline = run.basis(RomVariant::Baseline)?;
        for (vi, b) in [&proposed, &baseline].into_iter().enumerate() {
            b.save(&basis_path(out, b.variant, run.mode))?;
            let mut acc = 0.0;
            for (k, e) in mode_energy(b).into_iter().enumerate() {
                acc += e;
                energy.push(vec![vi as f64, run.mode.index() as f64, (k + 1) as f64, e, acc])?;
            }
        }
        bases.push(ModeBases { mode: run.mode, proposed, baseline });
    }
    energy.save(&out.join("energy.csv"))?;
    Ok(bases)
}

/// Release-test sweep over the reduced orders. Writes `rom_accuracy.csv`,
/// `fdm_step.csv` and `timing_rom.csv`.
pub fn eval_rom(scenario: &Scenario, bases: &[ModeBases], out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    let eval = evaluate_roms(&scenario.params, &ReleaseConfig::default(), bases)?;
    eval.accuracy_table().save(&out.join("rom_accuracy.csv"))?;
    eval.fdm_table().save(&out.join("fdm_step.csv"))?;
    eval.timing_table().save(&out.join("timing_rom.csv"))
}

/// One closed-loop tracking run written to `out`.
pub fn track(scenario: &Scenario, bases: &[PodBasis; 2], out: &Path) -> Result<RunSummary> {
    fs::create_dir_all(out)?;
    let run = track_scenario(scenario, bases)?;
    run.save(out)?;
    Ok(run.summary)
}

/// Plans a scenario and stores the plan at its own step in `out`.
pub fn plan(scenario: &Scenario, bases: &[PodBasis; 2], out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    let p = plan_scenario(scenario, bases)?;
    p.save(out, p.dt)
}

/// Tracks the plan stored in `plan_dir`, writing the run to `out`.
pub fn run_plan(scenario: &Scenario, bases: &[PodBasis; 2], plan_dir: &Path, out: &Path) -> Result<RunSummary> {
    scenario.validate()?;
    fs::create_dir_all(out)?;
    let (reference, _) = load_plan(plan_dir)?;
    let run = track_plan(scenario, bases, &reference)?;
    run.save(out)?;
    Ok(run.summary)
}

/// Outcome of the whole reproduction suite.
#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub tracking: Vec<RunSummary>,
    pub pick_and_place: RunSummary,
    /// Error reported when the planned scenario is configured for RTI.
    pub rti_rejection: String,
    /// Wall time of each stage in seconds.
    pub stage_seconds: Vec<(String, f64)>,
}

/// Runs every experiment with default scenarios into `out`: `basis/`,
/// `rom/`, `track/<scenario>_<solver>/`, `plan/`, `pick_and_place/`, plus
/// the scenario files used and `suite.json`.
pub fn replicate_all(overrides: &Overrides, out: &Path) -> Result<SuiteReport> {
    fs::create_dir_all(out.join("scenarios"))?;
    let mut scenarios = [tracking_free_start(), tracking_slung_start(), pick_and_place()];
    for s in scenarios.iter_mut() {
        overrides.apply(s);
        s.mpc.solver = SolverConfig::default();
        fs::write(out.join("scenarios").join(format!("{}.json", s.name)), s.to_json()?)?;
    }
    let [free, slung, pnp] = scenarios;
    let mut stage_seconds = Vec::new();
    let mut clock = Instant::now();
    let mut lap = |name: &str| {
        stage_seconds.push((name.to_string(), clock.elapsed().as_secs_f64()));
        clock = Instant::now();
    };
    let bases = train_basis(&free, &out.join("basis"))?;
    lap("train-basis");
    eval_rom(&free, &bases, &out.join("rom"))?;
    lap("eval-rom");
    let variant = free.mpc.variant;
    let pick = |b: &ModeBases| if variant == RomVariant::Proposed { b.proposed.clone() } else { b.baseline.clone() };
    let pair = [pick(&bases[0]), pick(&bases[1])];

    let mut tracking = Vec::new();
    let mut table = Table::new(["scenario", "solver", "tip_pos_rms", "tip_vel_rms", "eps_p_rms", "eps_v_rms", "attach_t", "detach_t"]);
    let mut timing = Table::new(["scenario", "solver", "mean_wall_ms", "max_wall_ms"]);
    for (si, s) in [&free, &slung].into_iter().enumerate() {
        for (vi, solver) in [SolverConfig::default(), SolverConfig::rti()].into_iter().enumerate() {
            let mut s = s.clone();
            s.mpc.solver = solver;
            let name = format!("{}_{}", s.name, if vi == 0 { "hilqr" } else { "rti" });
            let m = track(&s, &pair, &out.join("track").join(&name))?;
            lap(&name);
            let event = |k: &str| m.events.iter().find(|e| e.kind == k).map_or(f64::NAN, |e| e.t);
            table.push(vec![si as f64, vi as f64, m.tip_pos_rms, m.tip_vel_rms, m.eps_p_rms, m.eps_v_rms, event("attach"), event("detach")])?;
            timing.push(vec![si as f64, vi as f64, m.stats.mean_wall_ms, m.stats.max_wall_ms])?;
            tracking.push(m);
        }
    }
    table.save(&out.join("track").join("tracking.csv"))?;
    timing.save(&out.join("track").join("timing_tracking.csv"))?;

    plan(&pnp, &pair, &out.join("plan"))?;
    let pick_and_place = run_plan(&pnp, &pair, &out.join("plan"), &out.join("pick_and_place"))?;
    lap("pick_and_place");
    let mut rti = pnp.clone();
    rti.mpc.solver = SolverConfig::rti();
    let rti_rejection = match rti.validate() {
        Err(e) => e.to_string(),
        Ok(()) => return Err(Error::Config("planned scenario accepted the RTI solver".into())),
    };

    write_json(
        &out.join("suite.json"),
        &serde_json::json!({ "tracking": tracking, "pick_and_place": pick_and_place, "rti_rejection": rti_rejection }),
    )?;
    Ok(SuiteReport { tracking, pick_and_place, rti_rejection, stage_seconds })
}
