//! Runs a builtin scenario through the report pipeline and packs the
//! reports into a deterministic bundle.

use fbms::harness::{catalog_table, emit_report_bundle, run_scenario, RunOptions, MANIFEST_NAME};
use fbms::Result;

fn main() -> Result<()> {
    print!("{}", catalog_table());
    let out = std::env::temp_dir().join("fbms-example-run");
    let manifest = run_scenario("builtin:disk-in-ball", &RunOptions::new(&out))?;
    for s in &manifest.scenarios {
        for stage in &s.stages {
            println!("{} {}: {}", s.name, stage.stage, if stage.passed { "pass" } else { "FAIL" });
        }
    }
    for entry in &manifest.outputs {
        println!("  {:<24} {:>8} bytes  {}", entry.path, entry.bytes, &entry.sha256[..16]);
    }
    let bundle = emit_report_bundle(&out.join(MANIFEST_NAME))?;
    println!("bundle: {}", bundle.display());
    Ok(())
}
