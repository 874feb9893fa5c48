//! Runs every experiment into a directory (default `out/replicate`) and
//! prints the wall time of each stage.

use std::path::PathBuf;

use aerocable::experiments::suite::{replicate_all, Overrides};

fn main() -> aerocable::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("out/replicate"));
    let report = replicate_all(&Overrides::default(), &out)?;
    for (stage, secs) in &report.stage_seconds {
        println!("{stage:<28} {secs:>7.1} s");
    }
    for m in report.tracking.iter().chain([&report.pick_and_place]) {
        println!("{} [{}]: tip {:.3} m, {:.3} m/s, eps_p {:.3} m", m.name, m.solver, m.tip_pos_rms, m.tip_vel_rms, m.eps_p_rms);
    }
    println!("rti on pick_and_place: {}", report.rti_rejection);
    Ok(())
}
