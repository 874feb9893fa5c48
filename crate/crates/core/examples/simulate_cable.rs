//! Full finite-difference cable under a hovering vehicle: a sideways push,
//! a pickup of a resting payload, and the energy budget without gravity.

use aerocable::cable::{attach_reset, mechanical_energy, FreePayload, FullState};
use aerocable::sim::rk4_step;
use aerocable::{CableParams, Mode, Vec3};

fn main() -> aerocable::Result<()> {
    let params = CableParams::default();
    let dt = 5e-4;

    let mut s = FullState::hanging(Vec3::new(0.0, 0.0, 2.0), &params, Mode::FreeTip);
    let push = params.hover_force(Mode::FreeTip) + Vec3::new(0.5, 0.0, 0.0);
    for k in 0..=2000 {
        if k % 400 == 0 {
            let tip = s.tip();
            println!("t {:.2}  vehicle x {:+.3}  tip ({:+.3}, {:+.3}, {:+.3})", k as f64 * dt, s.r[0].x, tip.x, tip.y, tip.z);
        }
        s = rk4_step(&s, &push, dt, &params)?;
    }

    let n = s.r.len() - 1;
    s.payload = Some(FreePayload { pos: s.r[n], vel: Vec3::zeros(), supported: true });
    let slung = attach_reset(&s, &params)?;
    println!("attach: tip speed {:.4} -> {:.4} m/s", s.r_t[n].norm(), slung.r_t[n].norm());

    let free = CableParams { gravity: 0.0, cable_drag: 0.0, payload_drag: 0.0, ..params };
    let mut spin = FullState::straight(Vec3::zeros(), Vec3::x(), 1.0, &free, Mode::Slung);
    for (r, v) in spin.r.iter().zip(spin.r_t.iter_mut()) {
        *v = Vec3::z().cross(r) * 3.0;
    }
    let e0 = mechanical_energy(&spin, &free);
    for _ in 0..2000 {
        spin = rk4_step(&spin, &Vec3::zeros(), dt, &free)?;
    }
    println!("spinning cable, 1 s: relative energy change {:.2e}", (mechanical_energy(&spin, &free) - e0) / e0);
    Ok(())
}
