use nalgebra::{DMatrix, DVector};

use super::cost::{CostModel, CostWeights, WeightConfig};
use super::model::{rollout, InternalModel};
use super::solver::{solve, trajectory_cost, HorizonReference, SolveStatus, SolverConfig, SolverVariant};
use super::MpcController;
use crate::cable::{hanging_profile, FullState};
use crate::obstacle::{Barrier, Obstacle};
use crate::params::{CableParams, Mode, Vec3};
use crate::rom::RomVariant;
use crate::sim::Guard;
use crate::test_support::short_bases;

fn internal(order: usize, variant: RomVariant, substeps: usize, guards: Vec<Guard>) -> InternalModel {
    let [free, slung] = short_bases(variant);
    InternalModel::new(free.truncated(order).unwrap(), slung.truncated(order).unwrap(), CableParams::default(), 0.025, substeps, guards).unwrap()
}

fn hang_state(model: &InternalModel, mode: Mode, top: Vec3) -> DVector<f64> {
    let fine = FullState::hanging(top, model.params(), mode);
    model.model(mode).project_full(&fine).unwrap().z
}

fn static_target(model: &InternalModel, mode: Mode, top: Vec3) -> DVector<f64> {
    let p = model.params();
    let m = model.intervals();
    let pos = hanging_profile(top, p, mode, m, p.gravity);
    DVector::from_iterator(6 * (m + 1), pos.iter().flat_map(|x| [x.x, x.y, x.z]).chain(std::iter::repeat(0.0).take(3 * (m + 1))))
}

fn static_reference(model: &InternalModel, mode: Mode, top: Vec3, h: usize) -> HorizonReference {
    let y = static_target(model, mode, top);
    HorizonReference { nodes: vec![y; h + 1], inputs: vec![Vec3::zeros(); h], modes: vec![mode; h + 1], tip_weights: vec![] }
}

fn assert_close(an: f64, fd: f64, what: &str) {
    let scale = an.abs().max(fd.abs()).max(1.0);
    assert!((an - fd).abs() / scale < 1e-4, "{what}: analytic {an} vs differences {fd}");
}

#[test]
fn hybrid_step_jacobian_matches_differences() {
    for variant in [RomVariant::Proposed, RomVariant::Baseline] {
        for mode in [Mode::FreeTip, Mode::Slung] {
            let m = internal(2, variant, 2, vec![]);
            let mut z = hang_state(&m, mode, Vec3::new(0.0, 0.0, 2.0));
            let dim = z.len();
            for i in 0..dim {
                z[i] += 0.02 * (((i * 13) % 7) as f64 - 3.0) / 3.0;
            }
            let v = Vec3::new(0.7, -0.4, 0.3);
            let (_, x, _, a, b) = m.step_jacobian(mode, &z, &v, 1.0).unwrap();
            assert!((x - m.flow(mode, &z, &v).unwrap()).amax() < 1e-12);
            let eps = 1e-6;
            for c in 0..dim {
                let mut zp = z.clone();
                let mut zm = z.clone();
                zp[c] += eps;
                zm[c] -= eps;
                let fd = (m.flow(mode, &zp, &v).unwrap() - m.flow(mode, &zm, &v).unwrap()) / (2.0 * eps);
                for r in 0..dim {
                    assert_close(a[(r, c)], fd[r], "state Jacobian");
                }
            }
            for c in 0..3 {
                let (mut vp, mut vm) = (v, v);
                vp[c] += eps;
                vm[c] -= eps;
                let fd = (m.flow(mode, &z, &vp).unwrap() - m.flow(mode, &z, &vm).unwrap()) / (2.0 * eps);
                for r in 0..dim {
                    assert_close(b[(r, c)], fd[r], "input Jacobian");
                }
            }
        }
    }
}

#[test]
fn reset_jacobian_matches_differences_across_an_attach() {
    let top = Vec3::new(0.0, 0.0, 2.0);
    let probe = internal(2, RomVariant::Proposed, 1, vec![]);
    let z = hang_state(&probe, Mode::FreeTip, top);
    let v = Vec3::new(0.1, 0.0, 0.0);
    let tip_after = probe.tip(Mode::FreeTip, &probe.flow(Mode::FreeTip, &z, &v).unwrap());
    let m = internal(2, RomVariant::Proposed, 1, vec![Guard::attach(tip_after, 0.05)]);
    let (q, x, tr, a, _) = m.step_jacobian(Mode::FreeTip, &z, &v, 0.025).unwrap();
    assert_eq!(q, Mode::Slung);
    assert!(tr.is_some());
    let eps = 1e-6;
    for c in 0..z.len() {
        let mut zp = z.clone();
        let mut zm = z.clone();
        zp[c] += eps;
        zm[c] -= eps;
        let (qp, xp, _) = m.step(Mode::FreeTip, &zp, &v, 0.025).unwrap();
        let (qm, xm, _) = m.step(Mode::FreeTip, &zm, &v, 0.025).unwrap();
        assert_eq!((qp, qm), (Mode::Slung, Mode::Slung));
        let fd = (xp - xm) / (2.0 * eps);
        for r in 0..z.len() {
            assert_close(a[(r, c)], fd[r], "reset Jacobian");
        }
    }
    // The impact conserves momentum of the tip lump and the resting payload.
    let k = m.model(Mode::Slung).coords();
    let lump = crate::cable::tip_lump_mass(m.params(), m.model(Mode::Slung).h_d());
    let before = m.convert(Mode::FreeTip, Mode::Slung, &m.flow(Mode::FreeTip, &z, &v).unwrap());
    let tip_v = |s: &DVector<f64>| Vec3::new(s[3 * (2 * k - 1)], s[3 * (2 * k - 1) + 1], s[3 * (2 * k - 1) + 2]);
    let p_before = lump * tip_v(&before);
    let p_after = (lump + m.params().payload_mass) * tip_v(&x);
    assert!((p_before - p_after).norm() < 1e-12);
}

#[test]
fn rollout_through_attach_switches_once() {
    let top = Vec3::new(0.0, 0.0, 2.0);
    let probe = internal(1, RomVariant::Proposed, 1, vec![]);
    let z = hang_state(&probe, Mode::FreeTip, top);
    let controls: Vec<Vec3> = (0..20).map(|k| if k < 6 { Vec3::new(2.0, 0.0, 0.0) } else { Vec3::new(-2.0, 0.0, 0.0) }).collect();
    let free = rollout(&probe, 0.0, Mode::FreeTip, &z, &controls).unwrap();
    let target = probe.tip(Mode::FreeTip, &free.states[8]);
    let m = internal(1, RomVariant::Proposed, 1, vec![Guard::attach(target, 0.02)]);
    let r = rollout(&m, 0.0, Mode::FreeTip, &z, &controls).unwrap();
    assert_eq!(r.events.len(), 1);
    let switch = r.modes.iter().position(|&q| q == Mode::Slung).unwrap();
    assert!(r.modes[..switch].iter().all(|&q| q == Mode::FreeTip));
    assert!(r.modes[switch..].iter().all(|&q| q == Mode::Slung));
}

#[test]
fn stage_cost_examples() {
    let m = internal(2, RomVariant::Proposed, 1, vec![]);
    let cfg = WeightConfig { input: 0.3, ..Default::default() };
    let cost = CostModel::new(&m, CostWeights::build(&cfg, m.intervals()).unwrap(), vec![]).unwrap();
    let z = hang_state(&m, Mode::Slung, Vec3::new(1.0, 2.0, 3.0));
    let y = m.node_map(Mode::Slung) * &z;
    let v = Vec3::new(0.2, -0.1, 0.4);
    assert!(cost.stage(&m, Mode::Slung, &z, &y, &v, &v, 0.0).abs() < 1e-20);
    let d = Vec3::new(1.0, 2.0, -2.0);
    assert!((cost.stage(&m, Mode::Slung, &z, &y, &(v + d), &v, 0.0) - 0.3 * 9.0).abs() < 1e-12);
}

#[test]
fn cost_gradients_match_differences() {
    let m = internal(2, RomVariant::Proposed, 1, vec![]);
    let obstacles = vec![Obstacle { center: Vec3::new(0.3, 0.0, 1.3), semi_axes: Vec3::new(0.2, 1.0, 0.3), infinite_axes: [false, true, false] }];
    let cfg = WeightConfig { barrier: Barrier { mu: 0.5, floor: 0.05, range: 3.0 }, ..Default::default() };
    let cost = CostModel::new(&m, CostWeights::build(&cfg, m.intervals()).unwrap(), obstacles).unwrap();
    let mut z = hang_state(&m, Mode::FreeTip, Vec3::new(0.0, 0.0, 2.0));
    for i in 0..z.len() {
        z[i] += 0.05 * ((i % 5) as f64 - 2.0);
    }
    let y_ref = static_target(&m, Mode::FreeTip, Vec3::new(0.1, 0.0, 2.0));
    let (v, v_ref) = (Vec3::new(0.3, 0.2, 0.1), Vec3::new(0.0, 0.0, 0.5));
    let ex = cost.stage_expansion(&m, Mode::FreeTip, &z, &y_ref, &v, &v_ref, 1.5);
    assert!((ex.value - cost.stage(&m, Mode::FreeTip, &z, &y_ref, &v, &v_ref, 1.5)).abs() < 1e-9);
    let eps = 1e-6;
    for c in 0..z.len() {
        let mut zp = z.clone();
        let mut zm = z.clone();
        zp[c] += eps;
        zm[c] -= eps;
        let fd = (cost.stage(&m, Mode::FreeTip, &zp, &y_ref, &v, &v_ref, 1.5) - cost.stage(&m, Mode::FreeTip, &zm, &y_ref, &v, &v_ref, 1.5)) / (2.0 * eps);
        assert_close(ex.lx[c], fd, "cost gradient");
    }
    for c in 0..3 {
        let (mut vp, mut vm) = (v, v);
        vp[c] += eps;
        vm[c] -= eps;
        let fd = (cost.stage(&m, Mode::FreeTip, &z, &y_ref, &vp, &v_ref, 1.5) - cost.stage(&m, Mode::FreeTip, &z, &y_ref, &vm, &v_ref, 1.5)) / (2.0 * eps);
        assert_close(ex.lu[c], fd, "input gradient");
    }
    // Without barriers the Hessian is exact, tip attractor included.
    let plain = CostModel::new(&m, CostWeights::build(&WeightConfig::default(), m.intervals()).unwrap(), vec![]).unwrap();
    let ex = plain.terminal_expansion(&m, Mode::FreeTip, &z, &y_ref, 1.5);
    for c in 0..z.len() {
        let mut zp = z.clone();
        let mut zm = z.clone();
        zp[c] += eps;
        zm[c] -= eps;
        let gp = plain.terminal_expansion(&m, Mode::FreeTip, &zp, &y_ref, 1.5).lx;
        let gm = plain.terminal_expansion(&m, Mode::FreeTip, &zm, &y_ref, 1.5).lx;
        let fd = (gp - gm) / (2.0 * eps);
        for r in 0..z.len() {
            assert_close(ex.lxx[(r, c)], fd[r], "cost Hessian");
        }
    }
}

/// Finite-horizon discrete LQR for a 3D double integrator, as an
/// independent oracle.
fn double_integrator_lqr(dt: f64, h: usize, qp: f64, qv: f64, qp_t: f64, qv_t: f64, w: f64, x0: &DVector<f64>) -> Vec<Vec3> {
    let mut a = DMatrix::<f64>::identity(6, 6);
    let mut b = DMatrix::<f64>::zeros(6, 3);
    for c in 0..3 {
        a[(c, 3 + c)] = dt;
        b[(c, c)] = 0.5 * dt * dt;
        b[(3 + c, c)] = dt;
    }
    let q = DMatrix::from_diagonal(&DVector::from_fn(6, |i, _| if i < 3 { qp } else { qv }));
    let qt = DMatrix::from_diagonal(&DVector::from_fn(6, |i, _| if i < 3 { qp_t } else { qv_t }));
    let r = DMatrix::<f64>::identity(3, 3) * w;
    let mut p = qt;
    let mut gains = vec![DMatrix::zeros(3, 6); h];
    for k in (0..h).rev() {
        let s = &r + b.transpose() * &p * &b;
        let kk = s.try_inverse().unwrap() * b.transpose() * &p * &a;
        p = &q + a.transpose() * &p * (&a - &b * &kk);
        gains[k] = kk;
    }
    let mut x = x0.clone();
    let mut u = Vec::new();
    for k in 0..h {
        let uk = -&gains[k] * &x;
        x = &a * &x + &b * &uk;
        u.push(Vec3::new(uk[0], uk[1], uk[2]));
    }
    u
}

#[test]
fn decoupled_vehicle_problem_matches_discrete_lqr() {
    let m = internal(1, RomVariant::Proposed, 1, vec![]);
    let n = m.intervals() + 1;
    let mut scale = vec![0.0; n];
    scale[0] = 1.0;
    let cfg = WeightConfig { position: 20.0, velocity: 2.0, terminal_scale: 10.0, input: 0.1, node_scale: Some(scale), ..Default::default() };
    let cost = CostModel::new(&m, CostWeights::build(&cfg, m.intervals()).unwrap(), vec![]).unwrap();
    let h = 16;
    let mut z = hang_state(&m, Mode::FreeTip, Vec3::new(0.5, -0.3, 0.2));
    let k = m.model(Mode::FreeTip).coords();
    for c in 0..3 {
        z[3 * k + c] = [0.2, 0.1, -0.4][c];
    }
    let reference = HorizonReference { nodes: vec![DVector::zeros(6 * n); h + 1], inputs: vec![Vec3::zeros(); h], modes: vec![Mode::FreeTip; h + 1], tip_weights: vec![] };
    let solver = SolverConfig { max_iters: 50, rel_tol: 0.0, abs_tol: 1e-14, ..Default::default() };
    let sol = solve(&m, &cost, &solver, 0.0, Mode::FreeTip, &z, &reference, &vec![Vec3::zeros(); h]).unwrap();
    // cost = 20|r0|^2 + 2|v0|^2 + 0.1|u|^2 equals x'Qx + u'Ru
    let x0 = DVector::from_vec(vec![z[0], z[1], z[2], z[3 * k], z[3 * k + 1], z[3 * k + 2]]);
    let oracle = double_integrator_lqr(0.025, h, 20.0, 2.0, 200.0, 20.0, 0.1, &x0);
    for (a, b) in sol.controls.iter().zip(&oracle) {
        assert!((a - b).norm() < 1e-6, "{a} vs {b}");
    }
}

#[test]
fn hilqr_accepts_only_cost_decreases() {
    let m = internal(1, RomVariant::Proposed, 1, vec![]);
    let cost = CostModel::new(&m, CostWeights::build(&WeightConfig::default(), m.intervals()).unwrap(), vec![]).unwrap();
    let z = hang_state(&m, Mode::FreeTip, Vec3::new(0.0, 0.0, 2.0));
    let reference = static_reference(&m, Mode::FreeTip, Vec3::new(0.6, 0.2, 2.3), 32);
    let sol = solve(&m, &cost, &SolverConfig::default(), 0.0, Mode::FreeTip, &z, &reference, &vec![Vec3::zeros(); 32]).unwrap();
    assert!(sol.stats.cost_trace.windows(2).all(|w| w[1] <= w[0]));
    assert!(sol.stats.cost_trace.len() > 2);
    let rollout_cost = trajectory_cost(&m, &cost, &sol.rollout, &sol.controls, &reference);
    assert!((rollout_cost - sol.cost).abs() <= 1e-9 * sol.cost);
}

#[test]
fn rti_runs_exactly_one_sweep_each_way() {
    let m = internal(1, RomVariant::Proposed, 1, vec![]);
    let cost = CostModel::new(&m, CostWeights::build(&WeightConfig::default(), m.intervals()).unwrap(), vec![]).unwrap();
    let z = hang_state(&m, Mode::Slung, Vec3::new(0.0, 0.0, 2.0));
    let reference = static_reference(&m, Mode::Slung, Vec3::new(0.3, 0.0, 2.0), 32);
    let cfg = SolverConfig { variant: SolverVariant::Rti, max_iters: 7, ..Default::default() };
    let sol = solve(&m, &cost, &cfg, 0.0, Mode::Slung, &z, &reference, &vec![Vec3::zeros(); 32]).unwrap();
    assert_eq!((sol.stats.backward_sweeps, sol.stats.forward_sweeps, sol.stats.iterations), (1, 1, 1));
    assert_eq!(sol.stats.lambda_trace, vec![0.0]);
}

#[test]
fn regulation_at_equilibrium_keeps_commands_near_zero() {
    let m = internal(1, RomVariant::Proposed, 1, vec![]);
    let cost = CostModel::new(&m, CostWeights::build(&WeightConfig::default(), m.intervals()).unwrap(), vec![]).unwrap();
    let top = Vec3::new(0.0, 0.0, 2.0);
    let state = FullState::hanging(top, m.params(), Mode::FreeTip);
    let z = m.model(Mode::FreeTip).project_full(&state).unwrap().z;
    // Target the model's own representation of the hang.
    let y = m.node_map(Mode::FreeTip) * &z;
    let reference = HorizonReference { nodes: vec![y; 33], inputs: vec![Vec3::zeros(); 32], modes: vec![Mode::FreeTip; 33], tip_weights: vec![] };
    let mut ctrl = MpcController::new(m, cost, SolverConfig::default(), 32).unwrap();
    let d1 = ctrl.step(0.0, &state, &reference).unwrap();
    let d2 = ctrl.step(0.0, &state, &reference).unwrap();
    assert!(d1.v0.norm() < 0.5, "{}", d1.v0);
    assert!((d1.v0 - d2.v0).norm() < 1e-3, "{} vs {}", d1.v0, d2.v0);
}

#[test]
fn warm_and_cold_starts_reach_similar_costs() {
    let m = internal(1, RomVariant::Proposed, 1, vec![]);
    let cost = CostModel::new(&m, CostWeights::build(&WeightConfig::default(), m.intervals()).unwrap(), vec![]).unwrap();
    let z = hang_state(&m, Mode::FreeTip, Vec3::new(0.0, 0.0, 2.0));
    let reference = static_reference(&m, Mode::FreeTip, Vec3::new(0.4, -0.2, 2.1), 32);
    let cfg = SolverConfig { max_iters: 100, rel_tol: 1e-9, ..Default::default() };
    let cold = solve(&m, &cost, &cfg, 0.0, Mode::FreeTip, &z, &reference, &vec![Vec3::zeros(); 32]).unwrap();
    assert_ne!(cold.status, SolveStatus::Failed);
    let warm = solve(&m, &cost, &cfg, 0.0, Mode::FreeTip, &z, &reference, &cold.controls).unwrap();
    assert!((warm.cost - cold.cost).abs() <= 0.01 * cold.cost, "{} vs {}", warm.cost, cold.cost);
}

#[test]
fn input_weight_must_be_positive_definite() {
    let cfg = WeightConfig { input: 0.0, ..Default::default() };
    assert!(CostWeights::build(&cfg, 10).is_err());
    let mut w = CostWeights::build(&WeightConfig::default(), 10).unwrap();
    w.stage[(0, 0)] = -1.0;
    assert!(w.validate().is_err());
}
