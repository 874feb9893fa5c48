//! Plans the pick-and-place run through the window, then tracks the plan in
//! closed loop with the full hybrid iLQR and reports obstacle margins.

use aerocable::experiments::planning::{plan_scenario, run_plan};
use aerocable::experiments::tracking::train_bases;
use aerocable::scenario::pick_and_place;

fn main() -> aerocable::Result<()> {
    let scenario = pick_and_place();
    let bases = train_bases(&scenario.params, &scenario.training, scenario.mpc.variant)?;
    let plan = plan_scenario(&scenario, &bases)?;
    for level in &plan.levels {
        println!("mu {:<6} penetration {:.4} accepted {}", level.mu, level.violation, level.accepted);
    }
    println!("plan: min margin {:.3} m, events {:?}", plan.min_margin, plan.events);

    let run = run_plan(&scenario, &bases, &plan.trajectory().resample(scenario.mpc.dt)?)?;
    let m = &run.summary;
    let events: Vec<String> = m.events.iter().map(|e| format!("{}@{:.2}", e.kind, e.t)).collect();
    println!(
        "closed loop: eps_p {:.3} m, min margin {:.3} m, events {}",
        m.eps_p_rms,
        m.min_obstacle_margin.unwrap_or(f64::INFINITY),
        events.join(" ")
    );
    Ok(())
}
