//! Tip tracking with a pickup (free-tip start) and a release (slung start),
//! solved with the full hybrid iLQR and with the real-time iteration.

use aerocable::experiments::tracking::{track, train_bases};
use aerocable::mpc::SolverConfig;
use aerocable::scenario::{tracking_free_start, tracking_slung_start};

fn main() -> aerocable::Result<()> {
    let base = tracking_free_start();
    let bases = train_bases(&base.params, &base.training, base.mpc.variant)?;
    println!("{:<22} {:<6} {:>8} {:>8} {:>8} {:>8} {:>6}  events", "scenario", "solver", "tip_pos", "tip_vel", "eps_p", "mean_ms", "fails");
    for scenario in [tracking_free_start(), tracking_slung_start()] {
        for solver in [SolverConfig::default(), SolverConfig::rti()] {
            let mut s = scenario.clone();
            s.mpc.solver = solver;
            let run = track(&s, &bases)?;
            let m = &run.summary;
            let events: Vec<String> = m.events.iter().map(|e| format!("{}@{:.2}", e.kind, e.t)).collect();
            println!(
                "{:<22} {:<6} {:>8.3} {:>8.3} {:>8.3} {:>8.2} {:>6}  {}{}",
                m.name,
                m.solver,
                m.tip_pos_rms,
                m.tip_vel_rms,
                m.eps_p_rms,
                m.stats.mean_wall_ms,
                m.stats.failures,
                events.join(" "),
                m.failure.as_deref().map(|f| format!(" FAILED: {f}")).unwrap_or_default()
            );
        }
    }
    Ok(())
}
