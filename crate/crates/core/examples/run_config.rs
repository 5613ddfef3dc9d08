//! Drives the command-line pipeline from a JSON configuration written to a
//! scratch directory, then reads back one of the produced tables.

use qpath::config::RunConfig;
use qpath::io::Table;

fn main() -> qpath::Result<()> {
    let dir = std::env::temp_dir().join("qpath-run-config");
    let mut cfg = RunConfig::demo("hopf").unwrap();
    cfg.stages.shoot = false;
    cfg.stages.map = false;
    cfg.numeric.n = 80;
    cfg.numeric.study_ns = vec![20, 40, 80];
    cfg.out = dir.join("out");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("config.json");
    std::fs::write(&path, cfg.to_json())?;
    println!("{}", cfg.to_json());

    let status = qpath::cli::run_command(["qpath", "study", "--config", path.to_str().unwrap()]);
    println!("exit status {status}");
    let study = Table::read(&cfg.out.join("study.csv"))?;
    for row in &study.rows {
        println!("N = {:3}: action {:.6}", row[0], row[2]);
    }
    Ok(())
}
