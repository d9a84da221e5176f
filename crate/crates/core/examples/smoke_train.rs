//! Runs (or reuses) the acceptance suite's desk-scale training.

#[path = "../tests/common/smoke.rs"]
mod smoke;

fn main() -> jscc::Result<()> {
    let run = smoke::smoke_run()?;
    println!("data: {}", run.source.label());
    println!("run dir: {} (cached: {})", run.run_dir.display(), run.cached);
    for line in &run.log {
        println!("{line}");
    }
    Ok(())
}
