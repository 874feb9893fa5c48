//! Release-test comparison of the reduced models against the full model:
//! accuracy per order, admissible RK4 step and integration cost.

use aerocable::experiments::release::{evaluate_roms, ModeBases, ReleaseConfig};
use aerocable::rom::training::{run_training, TrainingConfig};
use aerocable::rom::RomVariant;
use aerocable::{CableParams, Mode};

fn main() -> aerocable::Result<()> {
    let params = CableParams::default();
    let training = TrainingConfig::default();
    let mut bases = Vec::new();
    for mode in [Mode::FreeTip, Mode::Slung] {
        let run = run_training(&params, mode, &training)?;
        bases.push(ModeBases { mode, proposed: run.basis(RomVariant::Proposed)?, baseline: run.basis(RomVariant::Baseline)? });
    }
    let eval = evaluate_roms(&params, &ReleaseConfig::default(), &bases)?;
    for (mode, dt) in &eval.fdm_max_dt {
        println!("full model {mode:?}: max stable step {dt:.3e} s");
    }
    println!("{:<9} {:<8} {:>2} {:>4} {:>10} {:>10} {:>10} {:>9}", "variant", "mode", "R", "dim", "eps_p", "eps_v", "max_dt", "wall_ms");
    for r in &eval.rows {
        println!(
            "{:<9} {:<8} {:>2} {:>4} {:>10.4} {:>10.4} {:>10.3e} {:>9.2}",
            format!("{:?}", r.variant),
            format!("{:?}", r.mode),
            r.order,
            r.state_dim,
            r.eps_p_rms,
            r.eps_v_rms,
            r.max_stable_dt,
            r.wall_ms
        );
    }
    Ok(())
}
