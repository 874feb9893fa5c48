//! Trains POD bases in both modes from the sinusoidal excitation run and
//! prints the relative mode energies.

use aerocable::rom::{mode_energy, training::{run_training, TrainingConfig}, RomVariant};
use aerocable::{CableParams, Mode};

fn main() -> aerocable::Result<()> {
    let params = CableParams::default();
    let cfg = TrainingConfig::default();
    for mode in [Mode::FreeTip, Mode::Slung] {
        let run = run_training(&params, mode, &cfg)?;
        for variant in [RomVariant::Proposed, RomVariant::Baseline] {
            let basis = run.basis(variant)?;
            let e = mode_energy(&basis);
            let shown: Vec<String> = e.iter().take(4).map(|x| format!("{x:.5}")).collect();
            println!("{mode:?} {variant:?}: R_max = {}, energies = [{}]", basis.order(), shown.join(", "));
        }
    }
    Ok(())
}
