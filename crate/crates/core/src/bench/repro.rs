use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::calibration::{benchmark_microservice, ReferenceRow, TEXT_REFERENCE, VIDEO_REFERENCE};
use super::policy::{saving, HUB};
use super::{
    compare, paper_scenarios, run_all, BenchError, Policy, PolicyReport, Scenario, SolveOptions,
};
use crate::cost::CacheMode;
use crate::game::{brute_force, build_game, Game};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReproOutcome {
    pub text: String,
    pub checks: Vec<Check>,
}

impl ReproOutcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

fn energy(reports: &[PolicyReport], p: Policy) -> f64 {
    reports
        .iter()
        .find(|r| r.policy == p)
        .map_or(f64::NAN, |r| r.total_energy_j)
}

fn check(checks: &mut Vec<Check>, name: String, passed: bool, detail: String) {
    checks.push(Check {
        name,
        passed,
        detail,
    });
}

fn distribution_table(out: &mut String, scenario: &Scenario, report: &PolicyReport) {
    let devices: Vec<&str> = scenario
        .system
        .devices()
        .iter()
        .map(|d| d.id.as_str())
        .collect();
    let _ = write!(out, "  {:<12}", "registry");
    for d in &devices {
        let _ = write!(out, "{d:>10}");
    }
    out.push('\n');
    for g in scenario.system.registries() {
        let _ = write!(out, "  {:<12}", g.id);
        for d in &devices {
            let pct = report
                .distribution
                .iter()
                .find(|c| c.registry == g.id && c.device == *d)
                .map_or(0, |c| c.percent);
            let _ = write!(out, "{:>9}%", pct);
        }
        out.push('\n');
    }
}

fn is_sixth_multiple(pct: u32) -> bool {
    (0..=6).any(|k| (pct as i64 - (100 * k) as i64 / 6).abs() <= 1)
}

fn scenario_section(
    out: &mut String,
    checks: &mut Vec<Check>,
    scenario: &Scenario,
    rows: &[ReferenceRow],
    opts: SolveOptions,
) -> Result<Vec<PolicyReport>, BenchError> {
    let name = &scenario.name;
    let mode = CacheMode::Cold;
    let reports = run_all(scenario, mode, opts)?;

    let _ = writeln!(out, "== {name} ({mode}) ==");
    let _ = writeln!(
        out,
        "  {:<14}{:>16}{:>20}{:>11}{:>11}",
        "policy", "total_energy_j", "makespan_serial_s", "converged", "pure_nash"
    );
    for r in &reports {
        let (conv, nash) = r
            .equilibrium
            .as_ref()
            .map_or(("-".into(), "-".into()), |e| {
                (e.converged.to_string(), e.is_pure_nash.to_string())
            });
        let _ = writeln!(
            out,
            "  {:<14}{:>16.3}{:>20.3}{:>11}{:>11}",
            r.policy.as_str(),
            r.total_energy_j,
            r.makespan_serial_s,
            conv,
            nash
        );
    }
    for p in [Policy::Hybrid, Policy::Oracle] {
        let r = reports
            .iter()
            .find(|r| r.policy == p)
            .expect("all policies ran");
        let _ = writeln!(out, "\n  image deployment distribution, {p}:");
        distribution_table(out, scenario, r);
    }
    for reference in [Policy::Hybrid, Policy::Oracle] {
        let _ = writeln!(out, "\n  savings of {reference}:");
        let _ = writeln!(
            out,
            "  {:<14}{:>14}{:>14}{:>12}{:>12}",
            "baseline", "baseline_j", "reference_j", "saved_j", "saved_%"
        );
        for s in compare(&reports, reference) {
            let _ = writeln!(
                out,
                "  {:<14}{:>14.3}{:>14.3}{:>12.3}{:>12.4}",
                s.baseline.as_str(),
                s.baseline_j,
                s.reference_j,
                s.savings_j,
                s.savings_percent
            );
        }
    }
    out.push('\n');

    // Medium-device harness against the reference ranges.
    let mut misses = Vec::new();
    for row in rows {
        let b = benchmark_microservice(&scenario.system, row.id, HUB, "medium", mode)?;
        let ok = (row.ct_s.0..=row.ct_s.1).contains(&b.ct_s)
            && (row.ec_medium_j.0..=row.ec_medium_j.1).contains(&b.ec_j);
        if !ok {
            misses.push(format!(
                "{} (ct {:.3} s, ec {:.3} J)",
                row.id, b.ct_s, b.ec_j
            ));
        }
    }
    check(
        checks,
        format!("{name}: medium benchmark ct and ec within reference ranges"),
        misses.is_empty(),
        if misses.is_empty() {
            format!("{} microservices", rows.len())
        } else {
            misses.join(", ")
        },
    );

    let oracle = energy(&reports, Policy::Oracle);
    for p in [Policy::HubOnly, Policy::RegionalOnly, Policy::Hybrid] {
        let other = energy(&reports, p);
        check(
            checks,
            format!("{name}: oracle <= {p}"),
            oracle <= other,
            format!("{oracle:.3} J vs {other:.3} J"),
        );
    }

    let hybrid = reports
        .iter()
        .find(|r| r.policy == Policy::Hybrid)
        .expect("ran");
    let eq = hybrid
        .equilibrium
        .clone()
        .expect("hybrid carries dynamics outcome");
    check(
        checks,
        format!("{name}: hybrid converged and passes verify_pure_nash"),
        eq.converged && eq.is_pure_nash,
        format!("{} sweeps", eq.iterations),
    );
    let game = Game::new(build_game(&scenario.system)?, mode)?;
    let bf = brute_force(&game, opts.limit)?;
    check(
        checks,
        format!("{name}: hybrid profile in brute-force Nash set"),
        bf.is_nash(&hybrid.profile),
        format!(
            "{} pure equilibria among {} profiles",
            bf.nash_profiles.len(),
            bf.profiles_evaluated
        ),
    );

    let bad: Vec<String> = reports
        .iter()
        .filter(|r| {
            r.distribution.iter().map(|c| c.percent).sum::<u32>() != 100
                || !r.distribution.iter().all(|c| is_sixth_multiple(c.percent))
        })
        .map(|r| r.policy.to_string())
        .collect();
    check(
        checks,
        format!("{name}: distributions sum to 100 on sixth multiples"),
        bad.is_empty(),
        if bad.is_empty() {
            "all policies".into()
        } else {
            bad.join(", ")
        },
    );
    Ok(reports)
}

/// Solve both bundled scenarios with every policy and evaluate the checks.
pub fn paper_repro(opts: SolveOptions) -> Result<ReproOutcome, BenchError> {
    let (video, text) = paper_scenarios();
    let mut out = String::new();
    let mut checks = Vec::new();
    scenario_section(&mut out, &mut checks, &video, &VIDEO_REFERENCE, opts)?;
    let text_reports = scenario_section(&mut out, &mut checks, &text, &TEXT_REFERENCE, opts)?;

    let hub = energy(&text_reports, Policy::HubOnly);
    let regional = energy(&text_reports, Policy::RegionalOnly);
    let oracle = energy(&text_reports, Policy::Oracle);
    let (base, base_j) = if hub <= regional {
        (Policy::HubOnly, hub)
    } else {
        (Policy::RegionalOnly, regional)
    };
    let s = saving(base, base_j, Policy::Oracle, oracle);
    check(
        &mut checks,
        format!(
            "{}: oracle saving over best exclusive policy in (0, 2] %",
            text.name
        ),
        s.savings_percent > 0.0 && s.savings_percent <= 2.0,
        format!(
            "{:.4} % ({:.3} J) against {}",
            s.savings_percent, s.savings_j, base
        ),
    );

    let _ = writeln!(out, "== checks ==");
    for c in &checks {
        let _ = writeln!(
            out,
            "{} {} ({})",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    Ok(ReproOutcome { text: out, checks })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn repro_passes_and_is_deterministic() {
        let a = paper_repro(SolveOptions::default()).unwrap();
        if let Some(c) = a.failures().next() {
            panic!("{}: {}", c.name, c.detail);
        }
        let b = paper_repro(SolveOptions::default()).unwrap();
        assert_eq!(a.text, b.text);
    }

    #[test]
    fn sixth_multiples() {
        for p in [0, 17, 33, 50, 67, 83, 100] {
            assert!(is_sixth_multiple(p));
        }
        assert!(!is_sixth_multiple(25));
    }
}
