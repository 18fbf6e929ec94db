//! Acceptance run: every criterion on the reference configuration.
//!
//! Prints one PASS/FAIL line per criterion, then cross-checks a few reported
//! numbers against closed forms computed here. Exits nonzero if anything fails.

use std::process::ExitCode;

use wce::parallel::RayonExecutor;
use wce::verify::{verify, CriterionResult, VerifySettings, ALL_CRITERIA};

fn value(c: &CriterionResult, name: &str) -> Option<f64> {
    c.measurement(name).map(|m| m.value)
}

fn binomial(n: u64, k: u64) -> u64 {
    (1..=k).fold(1, |acc, i| acc * (n + 1 - i) / i)
}

/// Closed-form checks on the reported measurements.
fn cross_checks(settings: &VerifySettings, criteria: &[CriterionResult]) -> Vec<(String, bool)> {
    let cfg = &settings.base;
    let a2 = cfg.equation.diffusivity.unwrap_or(1.0);
    let sigma = cfg.equation.noise.as_ref().and_then(|n| n[0].sigma[0].as_constant()).unwrap_or(1.0);
    let t = cfg.time.horizon;
    let length = cfg.grid.length;
    let by_id = |id: u8| criteria.iter().find(|c| c.id == id);
    let mut out = Vec::new();

    // sin x decays as e^{(σ²/2 − a²)t}·(stochastic phase); E∫u² = (L/2) e^{(σ² − 2a²)T}.
    if let Some(got) = by_id(2).and_then(|c| value(c, "reference_integral")) {
        let want = 0.5 * length * ((sigma * sigma - 2.0 * a2) * t).exp();
        out.push((format!("criterion 2 reference {got:.6e} vs closed form {want:.6e}"), (got - want).abs() <= 1e-12 * want));
    }

    // Order one: only the first cosine mode has nonzero time integral, so
    // Σ_i ‖u_(i1)(T)‖² = σ² e^{−2a²T} T ‖cos‖² with ‖cos‖² = L/2.
    if let Some(lhs) = by_id(4).and_then(|c| value(c, "lhs")) {
        let want = sigma * sigma * (-2.0 * a2 * t).exp() * t * 0.5 * length;
        let rel = (lhs - want).abs() / want;
        out.push((format!("criterion 4 order-1 energy {lhs:.6e} vs continuum {want:.6e} (rel {rel:.1e})"), rel <= 1e-2));
    }

    // Multi-indices over I = K = 2 with |α| ≤ 3 number C(4 + 3, 3); unordered pairs with diagonal.
    if let Some(pairs) = by_id(8).and_then(|c| value(c, "orthonormality_pairs")) {
        let n = binomial(7, 3);
        let want = (n * (n + 1) / 2) as f64;
        out.push((format!("criterion 8 pair count {pairs} vs {want}"), pairs == want));
    }
    out
}

fn main() -> ExitCode {
    let executor = match RayonExecutor::from_env() {
        Ok(e) => e,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::FAILURE;
        }
    };
    let settings = VerifySettings::reference();
    let summary = verify(&settings, &ALL_CRITERIA, &executor);

    println!("acceptance criteria ({} threads)", executor.threads());
    for c in &summary.criteria {
        println!("{}", c.summary_line());
    }
    let checks = cross_checks(&settings, &summary.criteria);
    for (line, ok) in &checks {
        println!("cross-check {} {line}", if *ok { "PASS" } else { "FAIL" });
    }

    let failed: Vec<u8> = summary.criteria.iter().filter(|c| !c.pass).map(|c| c.id).collect();
    let checks_ok = checks.iter().all(|(_, ok)| *ok) && checks.len() == 3;
    println!(
        "acceptance: {} of {} criteria pass{}",
        summary.criteria.len() - failed.len(),
        summary.criteria.len(),
        if failed.is_empty() { String::new() } else { format!(", failing {failed:?}") }
    );
    if failed.is_empty() && checks_ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
