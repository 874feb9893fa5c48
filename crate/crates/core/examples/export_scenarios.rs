//! Writes the built-in scenarios as JSON files into the given directory
//! (default `scenarios`).

use aerocable::scenario::{pick_and_place, tracking_free_start, tracking_slung_start};

fn main() -> aerocable::Result<()> {
    let dir = std::path::PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "scenarios".into()));
    std::fs::create_dir_all(&dir)?;
    for s in [tracking_free_start(), tracking_slung_start(), pick_and_place()] {
        let path = dir.join(format!("{}.json", s.name));
        std::fs::write(&path, s.to_json()?)?;
        println!("{}", path.display());
    }
    Ok(())
}
