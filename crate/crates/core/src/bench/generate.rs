use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::policy::{HUB, REGIONAL};
use super::Scenario;
use crate::model::{
    self, Application, Dataflow, Device, LinkTable, Microservice, Registry, Requirements,
};

/// Bounds for [`random_scenario`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorConfig {
    pub max_players: usize,
    /// 1 or 2; with the two registries this caps strategies at 4 per player.
    pub max_devices: usize,
    pub edge_probability: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            max_players: 6,
            max_devices: 2,
            edge_probability: 0.35,
        }
    }
}

/// Seeded random scenario with hub and regional registries.
///
/// Storage capacities are drawn above the load of a hidden random placement,
/// so at least one profile always satisfies the joint storage constraint.
pub fn random_scenario(seed: u64, cfg: GeneratorConfig) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=cfg.max_players.max(1));
    let nd = rng.gen_range(1..=cfg.max_devices.clamp(1, 2));

    let mut devices: Vec<Device> = (0..nd)
        .map(|j| Device {
            id: format!("d{j}"),
            cores: rng.gen_range(2..=8),
            cpu_speed_mips: rng.gen_range(300.0..2000.0),
            mem_gb: rng.gen_range(4.0..16.0),
            stor_gb: 0.0,
            active_power_w: rng.gen_range(0.5..15.0),
            static_power_w: rng.gen_range(0.1..5.0),
        })
        .collect();

    let mut used = vec![0.0; nd];
    let mut microservices = Vec::with_capacity(n);
    for i in 0..n {
        let home = rng.gen_range(0..nd);
        let host = &devices[home];
        let mut ms = Microservice::new(
            format!("m{i}"),
            rng.gen_range(0.05..6.0),
            Requirements {
                cores: rng.gen_range(1..=host.cores),
                cpu_load_mi: rng.gen_range(1_000.0..200_000.0),
                mem_gb: rng.gen_range(0.25..host.mem_gb),
                stor_gb: rng.gen_range(0.1..3.0),
            },
        );
        ms.utilization = rng.gen_range(0.05..=1.0);
        used[home] += ms.storage_footprint_gb();
        microservices.push(ms);
    }
    for (d, u) in devices.iter_mut().zip(&used) {
        d.stor_gb = u + rng.gen_range(0.5..20.0);
    }

    let mut dataflows = Vec::new();
    for j in 1..n {
        for i in 0..j {
            if rng.gen_bool(cfg.edge_probability) {
                dataflows.push(Dataflow::new(
                    format!("m{i}"),
                    format!("m{j}"),
                    rng.gen_range(0.0..500.0),
                ));
            }
        }
    }
    for ms in &mut microservices {
        if !dataflows.iter().any(|d| d.downstream == ms.id) {
            ms.source = true;
            if rng.gen_bool(0.5) {
                ms.ingress_mb = rng.gen_range(1.0..300.0);
            }
        }
    }

    let registries = vec![Registry::new(HUB), Registry::new(REGIONAL)];
    let mut links = LinkTable::default();
    for a in &devices {
        for b in &devices {
            if a.id != b.id {
                links.set_device_bw(&a.id, &b.id, rng.gen_range(1.0..100.0));
            }
        }
        for g in &registries {
            links.set_registry_bw(&g.id, &a.id, rng.gen_range(2.0..50.0));
        }
        links
            .ingress_bw
            .insert(a.id.clone(), rng.gen_range(1.0..50.0));
    }

    let app = Application {
        microservices,
        dataflows,
    };
    let system =
        model::validate(app, devices, registries, links).expect("generated scenario is valid");
    let mut s = Scenario::new(format!("random-{seed}"), system);
    s.description = Some(format!("seeded random scenario, seed {seed}"));
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::build_game;

    #[test]
    fn same_seed_same_scenario() {
        let cfg = GeneratorConfig::default();
        assert_eq!(random_scenario(7, cfg), random_scenario(7, cfg));
        assert_ne!(
            random_scenario(7, cfg).to_json(),
            random_scenario(8, cfg).to_json()
        );
    }

    #[test]
    fn bounded_spaces() {
        for seed in 0..50 {
            let s = random_scenario(seed, GeneratorConfig::default());
            let space = build_game(&s.system).unwrap();
            assert!(space.num_players() <= 6);
            assert!((0..space.num_players()).all(|p| (1..=4).contains(&space.strategies(p).len())));
        }
    }
}
