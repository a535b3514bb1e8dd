//! Runs every acceptance check at the default scale and prints one line per
//! check. Exits nonzero when any check fails.

use pwlab::verify::{run_checks, VerifyConfig};

fn main() {
    let cfg = VerifyConfig::default();
    let report = run_checks(&cfg, &[]);
    for c in &report.checks {
        let status = if c.pass { "PASS" } else { "FAIL" };
        let detail: Vec<String> = c
            .measurements
            .iter()
            .map(|m| format!("{}={:.3e}/{:.3e}", m.name, m.measured, m.bound))
            .collect();
        println!("{status} {:02} {:<22} {}", c.id, c.name, detail.join(" "));
        if let Some(e) = &c.error {
            println!("     error: {e}");
        }
    }
    let failed = report.failed().count();
    println!("{} of {} checks passed", report.checks.len() - failed, report.checks.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
