use nalgebra::DMatrix;

use super::{BimatrixGame, GameError};
use crate::cost::{self, CacheMode, CacheState, CostBreakdown};
use crate::model::{self, Microservice, System};

/// Two-player reduction of one dataflow edge.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseGame {
    pub game: BimatrixGame,
    /// `(registry, device)` labels for the upstream (row) player.
    pub row_strategies: Vec<(String, String)>,
    /// `(registry, device)` labels for the downstream (column) player.
    pub col_strategies: Vec<(String, String)>,
}

fn own_energy(
    system: &System,
    ms: &Microservice,
    registry: &str,
    device: &str,
    transfer_s: f64,
    mode: CacheMode,
) -> Result<f64, GameError> {
    let links = system.links();
    let dev = system.device(device).expect("strategy device exists");
    let mut cache = CacheState::new(mode);
    let t_deploy = cost::deployment_time(ms, registry, device, links, &mut cache)?;
    let t_transfer = cost::ingress_time(ms, device, links)? + transfer_s;
    let b = CostBreakdown::from_times(t_deploy, t_transfer, cost::processing_time(ms, dev))
        .with_power(cost::active_power_w(ms, dev), dev.static_power_w);
    Ok(b.ec_j)
}

/// Bimatrix game between the two endpoints of a dataflow.
///
/// Payoffs are negated own energy. The downstream player pays for the
/// transfer from the upstream player's device; every other microservice and
/// the joint storage constraint are ignored.
pub fn pairwise_game(
    system: &System,
    upstream: &str,
    downstream: &str,
    mode: CacheMode,
) -> Result<PairwiseGame, GameError> {
    let not_connected = || GameError::NotConnected {
        upstream: upstream.to_owned(),
        downstream: downstream.to_owned(),
    };
    let df = system
        .application()
        .dataflows
        .iter()
        .find(|d| d.upstream == upstream && d.downstream == downstream)
        .ok_or_else(not_connected)?;
    let up = system.microservice(upstream).ok_or_else(not_connected)?;
    let down = system.microservice(downstream).ok_or_else(not_connected)?;
    let rows = model::feasible_strategies(up, system.devices(), system.registries())?;
    let cols = model::feasible_strategies(down, system.devices(), system.registries())?;

    let mut a = DMatrix::zeros(rows.len(), cols.len());
    let mut b = DMatrix::zeros(rows.len(), cols.len());
    for (i, (rg, rd)) in rows.iter().enumerate() {
        let row_cost = own_energy(system, up, rg, rd, 0.0, mode)?;
        for (j, (cg, cd)) in cols.iter().enumerate() {
            let t = cost::transfer_time(df, rd, cd, system.links())?;
            a[(i, j)] = -row_cost;
            b[(i, j)] = -own_energy(system, down, cg, cd, t, mode)?;
        }
    }
    Ok(PairwiseGame {
        game: BimatrixGame::new(a, b)?,
        row_strategies: rows,
        col_strategies: cols,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::support_enumeration;
    use crate::game::tests::chain;
    use crate::model::validate;

    fn distinct_registries(transfer_j: f64) -> System {
        let (app, devices, _, _) = chain(transfer_j).parts();
        let regs = vec![
            model::Registry::new("hub"),
            model::Registry::new("regional"),
        ];
        let mut links = model::LinkTable::default();
        links.uniform_devices(&devices, 1.0);
        for d in &devices {
            links.set_registry_bw("hub", &d.id, 10.0);
            links.set_registry_bw("regional", &d.id, 20.0);
        }
        validate(app, devices, regs, links).unwrap()
    }

    #[test]
    fn zero_dataflow_is_separable() {
        let (app, devices, regs, links) = chain(0.0).parts();
        let mut links = links;
        links.set_registry_bw("hub", "b", 20.0);
        let sys = validate(app, devices, regs, links).unwrap();
        let pg = pairwise_game(&sys, "up", "down", CacheMode::Cold).unwrap();
        let eq = support_enumeration(&pg.game).unwrap();
        assert_eq!(eq.len(), 1);
        // Faster pull onto `b` for both players.
        assert_eq!(eq[0].row, vec![0.0, 1.0]);
        assert_eq!(eq[0].col, vec![0.0, 1.0]);
    }

    #[test]
    fn large_dataflow_favours_colocation() {
        let sys = distinct_registries(500.0);
        let pg = pairwise_game(&sys, "up", "down", CacheMode::Cold).unwrap();
        assert_eq!(pg.game.shape(), (4, 4));
        let b = pg.game.payoff_b();
        for (i, (_, rd)) in pg.row_strategies.iter().enumerate() {
            for (j, (_, cd)) in pg.col_strategies.iter().enumerate() {
                for (k, (_, kd)) in pg.col_strategies.iter().enumerate() {
                    if cd == rd && kd != rd {
                        assert!(b[(i, j)] > b[(i, k)]);
                    }
                }
            }
        }
        let eq = match support_enumeration(&pg.game) {
            Ok(eq) => eq,
            Err(GameError::DegenerateGame { equilibria, .. }) => equilibria,
            Err(e) => panic!("{e}"),
        };
        assert!(!eq.is_empty());
        for e in &eq {
            assert!(pg.game.is_equilibrium(&e.row, &e.col, 1e-9));
        }
    }

    #[test]
    fn unconnected_pair_errors() {
        let sys = chain(1.0);
        assert!(matches!(
            pairwise_game(&sys, "down", "up", CacheMode::Cold),
            Err(GameError::NotConnected { .. })
        ));
    }
}
