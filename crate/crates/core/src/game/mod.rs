//! Placement game: each microservice is a player choosing a
//! `(registry, device)` strategy and paying its own energy.

mod bimatrix;
mod brute;
mod dynamics;
mod pairwise;

pub use bimatrix::{support_enumeration, BimatrixGame, MixedEquilibrium};
pub use brute::{brute_force, BruteForceResult, DEFAULT_SPACE_LIMIT};
pub use dynamics::{best_response_dynamics, EquilibriumReport, DEFAULT_MAX_ITERS};
pub use pairwise::{pairwise_game, PairwiseGame};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost::{self, CacheMode, CacheState, CostError, Placement, STORAGE_SLACK};
use crate::model::{self, ModelError, System};

/// Relative tolerance below which two energies count as tied.
pub const DEFAULT_EPSILON_REL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GameError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error("player `{0}` has no strategy satisfying joint storage")]
    NoFeasibleStrategy(String),
    #[error("joint strategy space has {size} profiles, above the limit of {limit}")]
    SpaceTooLarge { size: u128, limit: u64 },
    #[error("no profile satisfies the joint storage constraint")]
    NoFeasibleProfile,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("no dataflow {upstream} -> {downstream}")]
    NotConnected {
        upstream: String,
        downstream: String,
    },
    #[error("payoff matrices must have equal non-empty shapes, got {a:?} and {b:?}")]
    ShapeMismatch {
        a: (usize, usize),
        b: (usize, usize),
    },
    #[error("payoff matrices contain a non-finite entry")]
    NonFinitePayoff,
    #[error("degenerate game: {} support pair(s) admit a continuum of equilibria", supports.len())]
    DegenerateGame {
        supports: Vec<(Vec<usize>, Vec<usize>)>,
        equilibria: Vec<MixedEquilibrium>,
    },
}

/// One `(registry, device)` choice, by index into the system's sorted lists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Strategy {
    pub registry: usize,
    pub device: usize,
}

/// Per-player strategy index.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Profile(pub Vec<usize>);

/// Players in topological order with their sorted feasible strategies.
#[derive(Debug, Clone)]
pub struct StrategySpace<'a> {
    system: &'a System,
    /// Microservice index per player.
    players: Vec<usize>,
    strategies: Vec<Vec<Strategy>>,
}

impl<'a> StrategySpace<'a> {
    pub fn system(&self) -> &'a System {
        self.system
    }

    pub fn num_players(&self) -> usize {
        self.players.len()
    }

    pub fn player_id(&self, player: usize) -> &'a str {
        &self.system.microservices()[self.players[player]].id
    }

    pub fn player_ids(&self) -> Vec<&'a str> {
        (0..self.players.len()).map(|p| self.player_id(p)).collect()
    }

    pub fn player_of(&self, ms_id: &str) -> Option<usize> {
        let ms = self.system.microservice_index(ms_id)?;
        self.players.iter().position(|&m| m == ms)
    }

    pub fn strategies(&self, player: usize) -> &[Strategy] {
        &self.strategies[player]
    }

    pub fn strategy_label(&self, s: Strategy) -> (&'a str, &'a str) {
        (
            &self.system.registries()[s.registry].id,
            &self.system.devices()[s.device].id,
        )
    }

    /// Number of joint profiles, saturating at `u128::MAX`.
    pub fn size(&self) -> u128 {
        self.strategies
            .iter()
            .try_fold(1u128, |acc, s| acc.checked_mul(s.len() as u128))
            .unwrap_or(u128::MAX)
    }

    /// Keep only strategies pulling from `registry`.
    pub fn restrict_registry(&self, registry: usize) -> Result<StrategySpace<'a>, GameError> {
        let strategies: Vec<Vec<Strategy>> = self
            .strategies
            .iter()
            .map(|ss| {
                ss.iter()
                    .copied()
                    .filter(|s| s.registry == registry)
                    .collect()
            })
            .collect();
        if let Some(p) = strategies.iter().position(Vec::is_empty) {
            return Err(ModelError::NoFeasibleStrategy(self.player_id(p).to_owned()).into());
        }
        Ok(StrategySpace {
            system: self.system,
            players: self.players.clone(),
            strategies,
        })
    }

    pub fn placement(&self, profile: &Profile) -> Placement {
        let mut p = Placement::default();
        for (player, &choice) in profile.0.iter().enumerate() {
            let (reg, dev) = self.strategy_label(self.strategies[player][choice]);
            p.assign(self.player_id(player), reg, dev);
        }
        p
    }

    /// Profile realising `placement`, if every assignment is a strategy here.
    pub fn profile_of(&self, placement: &Placement) -> Option<Profile> {
        let mut choice = Vec::with_capacity(self.num_players());
        for p in 0..self.num_players() {
            let id = self.player_id(p);
            let s = Strategy {
                registry: self.system.registry_index(placement.regist.get(id)?)?,
                device: self.system.device_index(placement.sched.get(id)?)?,
            };
            choice.push(self.strategies[p].iter().position(|&x| x == s)?);
        }
        Some(Profile(choice))
    }
}

/// Players in topological order, strategies from requirement analysis.
pub fn build_game(system: &System) -> Result<StrategySpace<'_>, GameError> {
    let players = system.topo_indices().to_vec();
    let mut strategies = Vec::with_capacity(players.len());
    for &m in &players {
        let ms = &system.microservices()[m];
        let mut ss = Vec::new();
        for registry in 0..system.registries().len() {
            for (device, d) in system.devices().iter().enumerate() {
                if model::admits(ms, d) {
                    ss.push(Strategy { registry, device });
                }
            }
        }
        if ss.is_empty() {
            return Err(ModelError::NoFeasibleStrategy(ms.id.clone()).into());
        }
        strategies.push(ss);
    }
    Ok(StrategySpace {
        system,
        players,
        strategies,
    })
}

/// Per-strategy constants for one player.
#[derive(Debug, Clone)]
struct PlayerTable {
    t_deploy: Vec<f64>,
    t_ingress: Vec<f64>,
    t_process: Vec<f64>,
    active_w: Vec<f64>,
    static_w: Vec<f64>,
    footprint_gb: f64,
    /// `(upstream player, transfer time indexed [from_device * n + to_device])`.
    inflows: Vec<(usize, Vec<f64>)>,
}

/// A strategy space bound to a cache mode, with all cost terms precomputed.
///
/// Cost arithmetic follows the same operation order as [`cost::energy`], so
/// totals agree bit for bit with [`cost::total_energy`] on feasible profiles.
#[derive(Debug, Clone)]
pub struct Game<'a> {
    space: StrategySpace<'a>,
    mode: CacheMode,
    tables: Vec<PlayerTable>,
    capacity_gb: Vec<f64>,
}

/// Outcome of [`Game::verify_pure_nash`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NashCheck {
    pub is_nash: bool,
    pub deviation: Option<Deviation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    pub player: usize,
    pub from: usize,
    pub to: usize,
    pub current_cost_j: f64,
    pub deviation_cost_j: f64,
}

impl<'a> Game<'a> {
    pub fn new(space: StrategySpace<'a>, mode: CacheMode) -> Result<Self, GameError> {
        let system = space.system;
        let links = system.links();
        let nd = system.devices().len();
        let mut tables = Vec::with_capacity(space.num_players());
        for (player, &m) in space.players.iter().enumerate() {
            let ms = &system.microservices()[m];
            let mut t = PlayerTable {
                t_deploy: Vec::new(),
                t_ingress: Vec::new(),
                t_process: Vec::new(),
                active_w: Vec::new(),
                static_w: Vec::new(),
                footprint_gb: ms.storage_footprint_gb(),
                inflows: Vec::new(),
            };
            for &s in &space.strategies[player] {
                let (reg, dev) = space.strategy_label(s);
                let device = &system.devices()[s.device];
                let mut cache = CacheState::new(mode);
                t.t_deploy
                    .push(cost::deployment_time(ms, reg, dev, links, &mut cache)?);
                t.t_ingress.push(cost::ingress_time(ms, dev, links)?);
                t.t_process.push(cost::processing_time(ms, device));
                t.active_w.push(cost::active_power_w(ms, device));
                t.static_w.push(device.static_power_w);
            }
            for &k in system.incoming_indices(m) {
                let df = &system.application().dataflows[k];
                let up_ms = system.microservice_index(&df.upstream).expect("validated");
                let up_player = space
                    .players
                    .iter()
                    .position(|&x| x == up_ms)
                    .expect("every microservice is a player");
                let mut tt = vec![0.0; nd * nd];
                for (a, da) in system.devices().iter().enumerate() {
                    for (b, db) in system.devices().iter().enumerate() {
                        tt[a * nd + b] = cost::transfer_time(df, &da.id, &db.id, links)?;
                    }
                }
                t.inflows.push((up_player, tt));
            }
            tables.push(t);
        }
        let capacity_gb = system.devices().iter().map(|d| d.stor_gb).collect();
        Ok(Self {
            space,
            mode,
            tables,
            capacity_gb,
        })
    }

    pub fn space(&self) -> &StrategySpace<'a> {
        &self.space
    }

    pub fn cache_mode(&self) -> CacheMode {
        self.mode
    }

    pub fn num_players(&self) -> usize {
        self.space.num_players()
    }

    fn device_of(&self, profile: &[usize], player: usize) -> usize {
        self.space.strategies[player][profile[player]].device
    }

    fn loads(&self, profile: &[usize]) -> Vec<f64> {
        let mut used = vec![0.0; self.capacity_gb.len()];
        for (p, t) in self.tables.iter().enumerate() {
            used[self.device_of(profile, p)] += t.footprint_gb;
        }
        used
    }

    fn overloaded(&self, used: &[f64], device: usize) -> bool {
        used[device] > self.capacity_gb[device] * (1.0 + STORAGE_SLACK)
    }

    /// Whether the profile satisfies the joint storage constraint.
    pub fn is_feasible(&self, profile: &Profile) -> bool {
        let used = self.loads(&profile.0);
        (0..used.len()).all(|d| !self.overloaded(&used, d))
    }

    /// Completion time ignoring all transfer terms.
    fn solo_time(&self, player: usize, choice: usize) -> f64 {
        let t = &self.tables[player];
        t.t_deploy[choice] + t.t_process[choice]
    }

    fn breakdown_at(&self, profile: &[usize], player: usize) -> cost::CostBreakdown {
        let t = &self.tables[player];
        let s = profile[player];
        let nd = self.capacity_gb.len();
        let here = self.device_of(profile, player);
        let mut t_transfer = t.t_ingress[s];
        for (up, tt) in &t.inflows {
            t_transfer += tt[self.device_of(profile, *up) * nd + here];
        }
        cost::CostBreakdown::from_times(t.t_deploy[s], t_transfer, t.t_process[s])
            .with_power(t.active_w[s], t.static_w[s])
    }

    fn cost_with_loads(&self, profile: &[usize], player: usize, used: &[f64]) -> f64 {
        if self.overloaded(used, self.device_of(profile, player)) {
            return f64::INFINITY;
        }
        self.breakdown_at(profile, player).ec_j
    }

    /// Energy of `player` under `profile`; `+inf` when its device is over
    /// storage capacity.
    pub fn player_cost(&self, profile: &Profile, player: usize) -> f64 {
        self.cost_with_loads(&profile.0, player, &self.loads(&profile.0))
    }

    /// Full breakdown of `player`'s cost, ignoring the storage constraint.
    pub fn player_breakdown(&self, profile: &Profile, player: usize) -> cost::CostBreakdown {
        self.breakdown_at(&profile.0, player)
    }

    /// Sum of player costs in topological order; `+inf` if infeasible.
    pub fn total_energy(&self, profile: &Profile) -> f64 {
        let used = self.loads(&profile.0);
        (0..self.num_players())
            .map(|p| self.cost_with_loads(&profile.0, p, &used))
            .sum()
    }

    /// Costs of every strategy of `player` with the others held at `profile`.
    fn deviation_costs(&self, profile: &[usize], player: usize) -> Vec<f64> {
        let mut trial = profile.to_vec();
        let mut used = self.loads(profile);
        let fp = self.tables[player].footprint_gb;
        used[self.device_of(profile, player)] -= fp;
        (0..self.space.strategies[player].len())
            .map(|s| {
                trial[player] = s;
                let d = self.device_of(&trial, player);
                used[d] += fp;
                let c = self.cost_with_loads(&trial, player, &used);
                used[d] -= fp;
                c
            })
            .collect()
    }

    /// Lowest-cost strategy for `player` with others fixed; ties (within
    /// [`DEFAULT_EPSILON_REL`]) go to the lowest strategy index.
    pub fn best_response(&self, profile: &Profile, player: usize) -> Result<usize, GameError> {
        let costs = self.deviation_costs(&profile.0, player);
        let min = costs.iter().copied().fold(f64::INFINITY, f64::min);
        if !min.is_finite() {
            return Err(GameError::NoFeasibleStrategy(
                self.space.player_id(player).to_owned(),
            ));
        }
        let cutoff = min + DEFAULT_EPSILON_REL * min.abs();
        Ok(costs
            .iter()
            .position(|&c| c <= cutoff)
            .expect("the minimum itself qualifies"))
    }

    /// A profile is a pure Nash equilibrium when it is storage-feasible and no
    /// player can lower its cost by more than `epsilon_rel` of its current
    /// cost through a unilateral change.
    pub fn verify_pure_nash(&self, profile: &Profile, epsilon_rel: f64) -> NashCheck {
        let feasible = self.is_feasible(profile);
        for player in 0..self.num_players() {
            let costs = self.deviation_costs(&profile.0, player);
            let current = profile.0[player];
            let cur = costs[current];
            let threshold = if cur.is_finite() {
                cur - epsilon_rel * cur.abs()
            } else {
                f64::INFINITY
            };
            if let Some((to, &c)) = costs
                .iter()
                .enumerate()
                .filter(|&(s, &c)| s != current && c < threshold)
                .min_by(|a, b| a.1.total_cmp(b.1))
            {
                return NashCheck {
                    is_nash: false,
                    deviation: Some(Deviation {
                        player,
                        from: current,
                        to,
                        current_cost_j: cur,
                        deviation_cost_j: c,
                    }),
                };
            }
        }
        NashCheck {
            is_nash: feasible,
            deviation: None,
        }
    }

    /// Per-player minimum of deployment plus processing energy.
    pub fn initial_profile(&self) -> Profile {
        Profile(
            (0..self.num_players())
                .map(|p| {
                    let t = &self.tables[p];
                    let energies: Vec<f64> = (0..t.t_deploy.len())
                        .map(|s| {
                            let ct = self.solo_time(p, s);
                            t.active_w[s] * ct + t.static_w[s] * ct
                        })
                        .collect();
                    let min = energies.iter().copied().fold(f64::INFINITY, f64::min);
                    let cutoff = min + DEFAULT_EPSILON_REL * min.abs();
                    energies.iter().position(|&e| e <= cutoff).unwrap_or(0)
                })
                .collect(),
        )
    }

    /// Mixed-radix successor (player 0 most significant); `false` on wrap.
    pub(crate) fn advance(&self, profile: &mut [usize]) -> bool {
        for p in (0..profile.len()).rev() {
            profile[p] += 1;
            if profile[p] < self.space.strategies[p].len() {
                return true;
            }
            profile[p] = 0;
        }
        false
    }

    /// Profile at lexicographic rank `index`.
    pub(crate) fn decode(&self, mut index: u64) -> Vec<usize> {
        let mut out = vec![0; self.num_players()];
        for p in (0..out.len()).rev() {
            let n = self.space.strategies[p].len() as u64;
            out[p] = (index % n) as usize;
            index /= n;
        }
        out
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::cost::total_energy;
    use crate::model::tests::{device, full_links, req};
    use crate::model::{validate, Application, Dataflow, Microservice, Registry};

    /// Two identical devices, one registry, chain `up -> down` with a
    /// dataflow that costs exactly `transfer_j` joules when remote.
    pub(crate) fn chain(transfer_j: f64) -> System {
        let mut devices = vec![device("a", 4, 100.0), device("b", 4, 100.0)];
        for d in &mut devices {
            d.active_power_w = 10.0;
            d.static_power_w = 0.0;
        }
        let regs = vec![Registry::new("hub")];
        let mut links = full_links(&devices, &regs);
        for v in links.device_bw.values_mut() {
            *v = 1.0;
        }
        let app = Application {
            microservices: vec![
                Microservice::new("up", 0.1, req(1, 100.0)),
                Microservice::new("down", 0.1, req(1, 100.0)),
            ],
            // 10 W * size / (1 MB/s) = transfer_j
            dataflows: vec![Dataflow::new("up", "down", transfer_j / 10.0)],
        };
        validate(app, devices, regs, links).unwrap()
    }

    pub(crate) fn independent(n: usize) -> System {
        let devices = vec![device("a", 4, 100.0), device("b", 4, 250.0)];
        let regs = vec![Registry::new("hub"), Registry::new("regional")];
        let mut links = full_links(&devices, &regs);
        links.set_registry_bw("regional", "b", 40.0);
        let app = Application {
            microservices: (0..n)
                .map(|i| {
                    Microservice::new(
                        format!("m{i}"),
                        0.2 + i as f64 * 0.1,
                        req(1, 100.0 * (i + 1) as f64),
                    )
                })
                .collect(),
            dataflows: vec![],
        };
        validate(app, devices, regs, links).unwrap()
    }

    #[test]
    fn build_game_shapes() {
        let sys = independent(3);
        let space = build_game(&sys).unwrap();
        assert_eq!(space.num_players(), 3);
        assert!(space.strategies(0).windows(2).all(|w| w[0] < w[1]));
        assert_eq!(space.size(), 64);

        let (app, _, regs, _) = sys.parts();
        let devices = vec![device("only", 4, 100.0)];
        let regs1 = vec![Registry::new("hub")];
        let links1 = full_links(&devices, &regs1);
        let one = validate(app.clone(), devices, regs1, links1).unwrap();
        let space = build_game(&one).unwrap();
        assert!((0..3).all(|p| space.strategies(p).len() == 1));

        let mut app2 = app;
        app2.microservices[1].req.cores = 6;
        let devices = vec![device("medium", 8, 100.0), device("small", 4, 100.0)];
        let links2 = full_links(&devices, &regs);
        let sys2 = validate(app2, devices, regs, links2).unwrap();
        let space = build_game(&sys2).unwrap();
        let p = space.player_of("m1").unwrap();
        let labels: Vec<_> = space
            .strategies(p)
            .iter()
            .map(|&s| space.strategy_label(s))
            .collect();
        assert_eq!(labels, [("hub", "medium"), ("regional", "medium")]);
    }

    #[test]
    fn player_costs_match_cost_module() {
        let sys = chain(50.0);
        let game = Game::new(build_game(&sys).unwrap(), CacheMode::Cold).unwrap();
        let mut profile = vec![0; game.num_players()];
        loop {
            let prof = Profile(profile.clone());
            let placement = game.space().placement(&prof);
            let reference = total_energy(&sys, &placement, CacheMode::Cold).unwrap();
            assert_eq!(game.total_energy(&prof), reference.total_j);
            if !game.advance(&mut profile) {
                break;
            }
        }
    }

    #[test]
    fn colocation_removes_transfer_cost() {
        let sys = chain(50.0);
        let game = Game::new(build_game(&sys).unwrap(), CacheMode::Warm).unwrap();
        let down = game.space().player_of("down").unwrap();
        let up = game.space().player_of("up").unwrap();
        let mut together = vec![0; 2];
        together[up] = 0;
        together[down] = 0;
        let mut apart = together.clone();
        apart[down] = 1;
        let c_together = game.player_cost(&Profile(together), down);
        let c_apart = game.player_cost(&Profile(apart), down);
        assert!(c_together < c_apart);
        assert!((c_apart - c_together - 50.0).abs() < 1e-9);
    }

    #[test]
    fn source_without_upstream_pays_process_only_when_warm() {
        let sys = chain(50.0);
        let game = Game::new(build_game(&sys).unwrap(), CacheMode::Warm).unwrap();
        let up = game.space().player_of("up").unwrap();
        let b = game.player_breakdown(&Profile(vec![0, 1]), up);
        assert_eq!(b.ct_s, b.t_process_s);
        assert_eq!(
            game.player_cost(&Profile(vec![0, 1]), up),
            b.e_active_j + b.e_static_j
        );
    }

    #[test]
    fn storage_violation_is_infinite() {
        let (app, mut devices, regs, links) = chain(50.0).parts();
        for d in &mut devices {
            d.stor_gb = 1.5;
        }
        let sys = validate(app, devices, regs, links).unwrap();
        let game = Game::new(build_game(&sys).unwrap(), CacheMode::Cold).unwrap();
        let crowded = Profile(vec![0, 0]);
        assert!(!game.is_feasible(&crowded));
        assert_eq!(game.player_cost(&crowded, 0), f64::INFINITY);
        assert_eq!(game.total_energy(&crowded), f64::INFINITY);
        assert_eq!(game.best_response(&crowded, 1).unwrap(), 1);
        assert!(!game.verify_pure_nash(&crowded, DEFAULT_EPSILON_REL).is_nash);
        assert!(
            game.verify_pure_nash(&Profile(vec![0, 1]), DEFAULT_EPSILON_REL)
                .is_nash
        );
    }

    #[test]
    fn best_response_rules() {
        // Single strategy.
        let devices = vec![device("only", 4, 100.0)];
        let regs = vec![Registry::new("hub")];
        let links = full_links(&devices, &regs);
        let (app, ..) = chain(50.0).parts();
        let sys = validate(app, devices, regs, links).unwrap();
        let game = Game::new(build_game(&sys).unwrap(), CacheMode::Cold).unwrap();
        assert_eq!(game.best_response(&Profile(vec![0, 0]), 1).unwrap(), 0);
        assert!(
            game.verify_pure_nash(&Profile(vec![0, 0]), DEFAULT_EPSILON_REL)
                .is_nash
        );

        // Identical devices: equal costs, lowest index wins; downstream co-locates.
        let sys = chain(50.0);
        let game = Game::new(build_game(&sys).unwrap(), CacheMode::Cold).unwrap();
        let up = game.space().player_of("up").unwrap();
        let down = game.space().player_of("down").unwrap();
        let mut prof = vec![0; 2];
        prof[up] = 1;
        prof[down] = 0;
        assert_eq!(game.best_response(&Profile(prof.clone()), down).unwrap(), 1);
        assert_eq!(game.best_response(&Profile(prof.clone()), up).unwrap(), 0);

        let check = game.verify_pure_nash(&Profile(prof.clone()), DEFAULT_EPSILON_REL);
        assert!(!check.is_nash);
        let dev = check.deviation.unwrap();
        assert_eq!(dev.player, down);
        assert!((dev.current_cost_j - dev.deviation_cost_j - 50.0).abs() < 1e-9);
    }

    #[test]
    fn restrict_registry_filters() {
        let sys = independent(2);
        let space = build_game(&sys).unwrap();
        let hub = space.restrict_registry(0).unwrap();
        assert!(hub.strategies(0).iter().all(|s| s.registry == 0));
        assert_eq!(hub.size(), 4);
    }

    #[test]
    fn placement_profile_roundtrip() {
        let sys = independent(3);
        let space = build_game(&sys).unwrap();
        let prof = Profile(vec![3, 1, 2]);
        assert_eq!(space.profile_of(&space.placement(&prof)), Some(prof));
    }

    #[test]
    fn decode_matches_advance() {
        let sys = independent(3);
        let game = Game::new(build_game(&sys).unwrap(), CacheMode::Cold).unwrap();
        let mut cur = vec![0; 3];
        for i in 0..64 {
            assert_eq!(game.decode(i), cur);
            game.advance(&mut cur);
        }
    }
}
