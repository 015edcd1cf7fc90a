use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{BenchError, Scenario};
use crate::cost::{self, CacheMode, CostBreakdown, MakespanMode, Placement};
use crate::game::{
    best_response_dynamics, brute_force, build_game, Game, Profile, DEFAULT_MAX_ITERS,
    DEFAULT_SPACE_LIMIT,
};
use crate::model::System;

pub const HUB: &str = "hub";
pub const REGIONAL: &str = "regional";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    HubOnly,
    RegionalOnly,
    Hybrid,
    Oracle,
}

impl Policy {
    pub const ALL: [Policy; 4] = [
        Policy::HubOnly,
        Policy::RegionalOnly,
        Policy::Hybrid,
        Policy::Oracle,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Policy::HubOnly => "hub_only",
            Policy::RegionalOnly => "regional_only",
            Policy::Hybrid => "hybrid",
            Policy::Oracle => "oracle",
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('-', "_").as_str() {
            "hub_only" => Ok(Policy::HubOnly),
            "regional_only" => Ok(Policy::RegionalOnly),
            "hybrid" => Ok(Policy::Hybrid),
            "oracle" => Ok(Policy::Oracle),
            _ => Err(format!("unknown policy `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolveOptions {
    pub max_iters: usize,
    pub limit: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            max_iters: DEFAULT_MAX_ITERS,
            limit: DEFAULT_SPACE_LIMIT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistributionCell {
    pub registry: String,
    pub device: String,
    pub percent: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MicroserviceRow {
    pub microservice: String,
    pub registry: String,
    pub device: String,
    #[serde(flatten)]
    pub cost: CostBreakdown,
}

/// Dynamics outcome attached to hybrid reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSummary {
    pub converged: bool,
    pub is_pure_nash: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyReport {
    pub policy: Policy,
    pub cache_mode: CacheMode,
    pub placement: Placement,
    pub profile: Profile,
    pub total_energy_j: f64,
    pub makespan_serial_s: f64,
    pub distribution: Vec<DistributionCell>,
    /// Topological order.
    pub per_microservice: Vec<MicroserviceRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equilibrium: Option<EquilibriumSummary>,
    /// Profiles visited by the dynamics, hybrid only.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trajectory: Vec<Profile>,
}

fn registry_index(system: &System, id: &str) -> Result<usize, BenchError> {
    system
        .registry_index(id)
        .ok_or_else(|| BenchError::UnknownRegistry(id.to_owned()))
}

/// Largest-remainder integer percentages of `counts`, summing to 100.
///
/// Leftover points go to the largest remainders; equal remainders favour the
/// smaller share, then the lower index. Integer arithmetic throughout.
pub fn round_counts(counts: &[u64]) -> Vec<u32> {
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return vec![0; counts.len()];
    }
    let mut out: Vec<u32> = counts.iter().map(|&k| (k * 100 / n) as u32).collect();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by_key(|&i| (std::cmp::Reverse(counts[i] * 100 % n), counts[i], i));
    let short = 100 - out.iter().sum::<u32>();
    for &i in order.iter().take(short as usize) {
        out[i] += 1;
    }
    out
}

/// Largest-remainder integer percentages of non-negative `weights`.
pub fn round_percentages(weights: &[f64]) -> Vec<u32> {
    let total: f64 = weights.iter().sum();
    if total.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
        return vec![0; weights.len()];
    }
    let shares: Vec<f64> = weights.iter().map(|w| w / total * 100.0).collect();
    let mut out: Vec<u32> = shares.iter().map(|s| s.floor() as u32).collect();
    let assigned: u32 = out.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    // Remainders equal up to float noise count as tied.
    let remainder = |i: usize| ((shares[i] - shares[i].floor()) * 1e9).round() as i64;
    order.sort_by(|&a, &b| {
        remainder(b)
            .cmp(&remainder(a))
            .then(shares[a].total_cmp(&shares[b]))
            .then(a.cmp(&b))
    });
    let short = 100u32.saturating_sub(assigned) as usize;
    for &i in order.iter().cycle().take(short) {
        out[i] += 1;
    }
    out
}

/// Percentage of microservices per `(registry, device)` cell, every cell
/// listed in id order.
pub fn distribution(
    system: &System,
    placement: &Placement,
) -> Result<Vec<DistributionCell>, BenchError> {
    let cells: Vec<(&str, &str)> = system
        .registries()
        .iter()
        .flat_map(|g| {
            system
                .devices()
                .iter()
                .map(move |d| (g.id.as_str(), d.id.as_str()))
        })
        .collect();
    let mut counts = vec![0u64; cells.len()];
    for m in system.microservices() {
        let key = (placement.registry_of(&m.id)?, placement.device_of(&m.id)?);
        if let Some(i) = cells.iter().position(|&c| c == key) {
            counts[i] += 1;
        }
    }
    Ok(cells
        .iter()
        .zip(round_counts(&counts))
        .map(|(&(g, d), percent)| DistributionCell {
            registry: g.to_owned(),
            device: d.to_owned(),
            percent,
        })
        .collect())
}

fn report(
    system: &System,
    game: &Game<'_>,
    policy: Policy,
    mode: CacheMode,
    profile: Profile,
) -> Result<PolicyReport, BenchError> {
    let placement = game.space().placement(&profile);
    placement.check(system)?;
    let totals = cost::total_energy(system, &placement, mode)?;
    let makespan_serial_s = cost::makespan(system, &placement, mode, MakespanMode::Serial)?;
    let per_microservice = totals
        .per_microservice
        .into_iter()
        .map(|(id, b)| MicroserviceRow {
            registry: placement.regist[&id].clone(),
            device: placement.sched[&id].clone(),
            microservice: id,
            cost: b,
        })
        .collect();
    Ok(PolicyReport {
        policy,
        cache_mode: mode,
        distribution: distribution(system, &placement)?,
        placement,
        profile,
        total_energy_j: totals.total_j,
        makespan_serial_s,
        per_microservice,
        equilibrium: None,
        trajectory: Vec::new(),
    })
}

/// Solve `scenario` under `policy`.
///
/// Exclusive policies restrict every pull to one registry and take the
/// brute-force optimum there; hybrid runs best-response dynamics on the full
/// space; oracle is the full-space brute-force optimum.
pub fn run_policy(
    scenario: &Scenario,
    policy: Policy,
    mode: CacheMode,
    opts: SolveOptions,
) -> Result<PolicyReport, BenchError> {
    let system = &scenario.system;
    let full = build_game(system)?;
    let space = match policy {
        Policy::HubOnly => full.restrict_registry(registry_index(system, HUB)?)?,
        Policy::RegionalOnly => full.restrict_registry(registry_index(system, REGIONAL)?)?,
        Policy::Hybrid | Policy::Oracle => full,
    };
    let game = Game::new(space, mode)?;
    match policy {
        Policy::Hybrid => {
            let eq = best_response_dynamics(&game, opts.max_iters)?;
            let mut r = report(system, &game, policy, mode, eq.profile)?;
            r.equilibrium = Some(EquilibriumSummary {
                converged: eq.converged,
                is_pure_nash: eq.is_pure_nash,
                iterations: eq.iterations,
            });
            r.trajectory = eq.trajectory;
            Ok(r)
        }
        _ => {
            let bf = brute_force(&game, opts.limit)?;
            report(system, &game, policy, mode, bf.optimum)
        }
    }
}

pub fn run_all(
    scenario: &Scenario,
    mode: CacheMode,
    opts: SolveOptions,
) -> Result<Vec<PolicyReport>, BenchError> {
    Policy::ALL
        .iter()
        .map(|&p| run_policy(scenario, p, mode, opts))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Saving {
    pub baseline: Policy,
    pub reference: Policy,
    pub baseline_j: f64,
    pub reference_j: f64,
    pub savings_j: f64,
    pub savings_percent: f64,
}

/// Savings of `reference` against every other report.
pub fn compare(reports: &[PolicyReport], reference: Policy) -> Vec<Saving> {
    let Some(r) = reports.iter().find(|r| r.policy == reference) else {
        return Vec::new();
    };
    reports
        .iter()
        .filter(|b| b.policy != reference)
        .map(|b| saving(b.policy, b.total_energy_j, reference, r.total_energy_j))
        .collect()
}

pub(crate) fn saving(
    baseline: Policy,
    baseline_j: f64,
    reference: Policy,
    reference_j: f64,
) -> Saving {
    let savings_j = baseline_j - reference_j;
    Saving {
        baseline,
        reference,
        baseline_j,
        reference_j,
        savings_j,
        savings_percent: savings_j / baseline_j * 100.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::paper_scenarios;

    #[test]
    fn sixths_round_like_reference_table() {
        assert_eq!(round_counts(&[5, 1]), vec![83, 17]);
        assert_eq!(round_counts(&[1, 1, 4]), vec![17, 17, 66]);
        assert_eq!(round_counts(&[4, 1, 1]), vec![66, 17, 17]);
        assert_eq!(round_counts(&[6]), vec![100]);
        assert_eq!(round_counts(&[0, 6, 0, 0]), vec![0, 100, 0, 0]);
        assert_eq!(round_percentages(&[5.0 / 6.0, 1.0 / 6.0]), vec![83, 17]);
        assert_eq!(
            round_percentages(&[1.0 / 6.0, 1.0 / 6.0, 4.0 / 6.0]),
            vec![17, 17, 66]
        );
        assert_eq!(round_percentages(&[1.0]), vec![100]);
    }

    #[test]
    fn compare_arithmetic() {
        let s = saving(Policy::HubOnly, 5300.0, Policy::Hybrid, 5282.0);
        assert!((s.savings_percent - 0.34).abs() < 0.005);
        assert_eq!(s.savings_j, 18.0);
        let s = saving(Policy::HubOnly, 7000.0, Policy::Hybrid, 6986.0);
        assert!((s.savings_percent - 0.2).abs() < 1e-12);
        assert_eq!(s.savings_j, 14.0);
        let s = saving(Policy::HubOnly, 7000.0, Policy::Hybrid, 7000.0);
        assert_eq!((s.savings_j, s.savings_percent), (0.0, 0.0));
    }

    #[test]
    fn policy_parsing() {
        assert_eq!("hub-only".parse::<Policy>().unwrap(), Policy::HubOnly);
        assert_eq!(
            "regional_only".parse::<Policy>().unwrap(),
            Policy::RegionalOnly
        );
        assert!("greedy".parse::<Policy>().is_err());
        assert_eq!(Policy::Oracle.to_string(), "oracle");
    }

    #[test]
    fn text_oracle_dominates_and_hybrid_is_nash() {
        let (video, text) = paper_scenarios();
        for s in [&video, &text] {
            let reports = run_all(s, CacheMode::Cold, SolveOptions::default()).unwrap();
            let e = |p: Policy| {
                reports
                    .iter()
                    .find(|r| r.policy == p)
                    .unwrap()
                    .total_energy_j
            };
            assert!(e(Policy::Oracle) <= e(Policy::HubOnly));
            assert!(e(Policy::Oracle) <= e(Policy::RegionalOnly));
            assert!(e(Policy::Oracle) <= e(Policy::Hybrid));
            let hybrid = reports.iter().find(|r| r.policy == Policy::Hybrid).unwrap();
            let eq = hybrid.equilibrium.as_ref().unwrap();
            assert!(eq.converged && eq.is_pure_nash);
            for r in &reports {
                assert_eq!(r.distribution.iter().map(|c| c.percent).sum::<u32>(), 100);
            }
        }
    }

    #[test]
    fn unknown_registry_is_reported() {
        let (video, _) = paper_scenarios();
        let (app, devices, _, links) = video.system.parts();
        let mut links = links;
        links.registry_bw.retain(|(g, _), _| g == HUB);
        let sys =
            crate::model::validate(app, devices, vec![crate::model::Registry::new(HUB)], links)
                .unwrap();
        let one = video.with_system(sys);
        assert!(matches!(
            run_policy(
                &one,
                Policy::RegionalOnly,
                CacheMode::Cold,
                SolveOptions::default()
            ),
            Err(BenchError::UnknownRegistry(_))
        ));
        let hub = run_policy(
            &one,
            Policy::HubOnly,
            CacheMode::Cold,
            SolveOptions::default(),
        )
        .unwrap();
        let oracle = run_policy(
            &one,
            Policy::Oracle,
            CacheMode::Cold,
            SolveOptions::default(),
        )
        .unwrap();
        assert_eq!(hub.placement, oracle.placement);
        assert_eq!(hub.total_energy_j, oracle.total_energy_j);
    }
}
