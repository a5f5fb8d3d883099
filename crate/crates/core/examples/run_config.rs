//! Config-driven runs: load a TOML file, override values, run replicates in
//! parallel and emit gnuplot data. Pass a config path to run something else.

use kpz_sync::experiment::{emit_plotdata, parse_config_str, run_experiment};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/configs/sync_forward.toml").into());
    let out = std::env::temp_dir().join("kpz-sync-run-config");
    let text = std::fs::read_to_string(&path)?;
    let cfg = parse_config_str(&text, None, &[format!("out={:?}", out.display().to_string())])?;
    println!(
        "{} with {} replicate(s), config hash {}",
        cfg.kind,
        cfg.replicates,
        &cfg.hash()[..12]
    );

    let manifest = run_experiment(&cfg, 0)?;
    println!("seeds {:?}", manifest.seeds);
    println!(
        "wrote {} files in {:.2}s under {}",
        manifest.outputs.len(),
        manifest.wall_clock_seconds,
        out.display()
    );
    for p in emit_plotdata(&manifest)? {
        println!("  {}", p.display());
    }
    let summary = std::fs::read_to_string(out.join("summary.json"))?;
    println!("{summary}");
    Ok(())
}
