//! Acceptance criteria 1-8, one PASS/FAIL line each.

use std::process::ExitCode;

use emth_cli::pipeline::{self, to_json};
use emth_cli::scenario::Scenario;
use emth_core::{run_suite, Suite, SuiteConfig, SuiteReport};

const SCENARIO: &str = r#"
[lattice]
sites = 12
boundary = "periodic"
dim = 2

[state]
kind = "random"
seed = 21

[[flows]]
flow = "t,1,2"
dt = 1e-3
steps = 30
record_every = 10

[verify]
suites = ["densities", "conservation"]
seed = 21
"#;

fn summary(report: &SuiteReport) -> String {
    report
        .claims
        .iter()
        .map(|c| format!("{}={:.2e}/{:.0e}", c.id, c.residual, c.tolerance))
        .collect::<Vec<_>>()
        .join(" ")
}

fn suite_line(n: usize, suite: Suite, config: &SuiteConfig) -> bool {
    match run_suite(suite, config) {
        Ok(report) => {
            let verdict = if report.passed() { "PASS" } else { "FAIL" };
            println!("criterion {n} ({suite}): {verdict} {}", summary(&report));
            report.passed()
        }
        Err(e) => {
            println!("criterion {n} ({suite}): FAIL {}: {e}", e.name());
            false
        }
    }
}

/// Two runs of one scenario and seed must give byte-identical artifacts.
fn reproducibility() -> Result<String, String> {
    let sc = Scenario::parse(SCENARIO).map_err(|e| e.to_string())?;
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (a, b) = (root.path().join("a"), root.path().join("b"));
    let ma = pipeline::run(&sc, &a).map_err(|e| e.to_string())?;
    let mb = pipeline::run(&sc, &b).map_err(|e| e.to_string())?;
    if ma.artifacts != mb.artifacts {
        return Err("artifact hashes differ".into());
    }
    for name in ma.artifacts.keys().map(String::as_str).chain(["manifest.json"]) {
        let x = std::fs::read(a.join(name)).map_err(|e| e.to_string())?;
        let y = std::fs::read(b.join(name)).map_err(|e| e.to_string())?;
        if x != y {
            return Err(format!("{name} differs"));
        }
    }
    let config = SuiteConfig::default();
    let r1 = to_json(&pipeline::verify(&[Suite::Darboux], &config).map_err(|e| e.to_string())?);
    let r2 = to_json(&pipeline::verify(&[Suite::Darboux], &config).map_err(|e| e.to_string())?);
    if r1 != r2 {
        return Err("verification reports differ".into());
    }
    Ok(format!("{} artifacts, sha256 {}", ma.artifacts.len(), &ma.artifacts["initial_state.csv"][..16]))
}

fn main() -> ExitCode {
    let config = SuiteConfig::default();
    let suites = [
        Suite::Algebra,
        Suite::Dressing,
        Suite::Densities,
        Suite::Flows,
        Suite::Darboux,
        Suite::Hamiltonian,
        Suite::Conservation,
    ];
    let mut all = true;
    for (i, suite) in suites.into_iter().enumerate() {
        all &= suite_line(i + 1, suite, &config);
    }
    match reproducibility() {
        Ok(detail) => println!("criterion 8 (reproducibility): PASS {detail}"),
        Err(e) => {
            println!("criterion 8 (reproducibility): FAIL {e}");
            all = false;
        }
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
