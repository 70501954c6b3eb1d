//! Writes a generated problem and a trajectory to disk and reads them back.

use flagopt::flag::{run, Mode, RunParams};
use flagopt::generate::{generate, Family, GenSpec};
use flagopt::io::{load_trajectory, read_problem, save_trajectory, write_problem, CsvHeader};
use flagopt::maps::{MapConfig, MapInstance, MapKind, MatrixPolicy};

fn main() -> flagopt::Result<()> {
    let dir = std::env::temp_dir().join("flagopt-problem-io");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("block.json");

    let prob = generate(&GenSpec::new(Family::BlockQp, 8, 3, 0.5, 3))?;
    write_problem(&path, &prob)?;
    let back = read_problem(&path)?;
    println!("{} roundtrip exact: {}", path.display(), back == prob);

    let cfg = MapConfig::from_policy(MapKind::ProxAdmm, 1.0, MatrixPolicy::default(), &back)?;
    let inst = MapInstance::new(cfg, &back)?;
    let traj = run(&back, &inst, &RunParams::new(Mode::Classic, 100), None)?;
    let csv = dir.join("run.csv");
    save_trajectory(&csv, &CsvHeader::from_meta(&traj.meta, "auto:1", 100), &traj)?;
    let (header, records) = load_trajectory(&csv)?;
    println!("{}: {} {} with {} rows", csv.display(), header.map, header.mode, records.len());
    println!("{}", std::fs::read_to_string(&path)?.lines().take(12).collect::<Vec<_>>().join("\n"));
    Ok(())
}
