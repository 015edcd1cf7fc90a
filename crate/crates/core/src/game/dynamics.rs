use serde::{Deserialize, Serialize};

use super::{Game, GameError, Profile, DEFAULT_EPSILON_REL};

pub const DEFAULT_MAX_ITERS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub profile: Profile,
    pub total_energy_j: f64,
    pub is_pure_nash: bool,
    /// Full sweeps performed, including the final unchanged one.
    pub iterations: usize,
    pub converged: bool,
    /// Initial profile followed by the profile after each sweep.
    pub trajectory: Vec<Profile>,
}

/// Round-robin best-response dynamics in topological player order.
///
/// A sweep that changes nothing ends the run. When `max_iters` sweeps pass
/// without that happening, the lowest-energy profile seen is returned with
/// `converged = false`.
pub fn best_response_dynamics(
    game: &Game<'_>,
    max_iters: usize,
) -> Result<EquilibriumReport, GameError> {
    if max_iters == 0 {
        return Err(GameError::InvalidArgument(
            "max_iters must be at least 1".into(),
        ));
    }
    let mut profile = game.initial_profile();
    let mut trajectory = vec![profile.clone()];
    let mut best = (game.total_energy(&profile), profile.clone());
    let mut fixed_point = false;
    let mut iterations = 0;

    while iterations < max_iters {
        iterations += 1;
        let mut changed = false;
        for player in 0..game.num_players() {
            match game.best_response(&profile, player) {
                Ok(s) if s != profile.0[player] => {
                    profile.0[player] = s;
                    changed = true;
                }
                Ok(_) | Err(GameError::NoFeasibleStrategy(_)) => {}
                Err(e) => return Err(e),
            }
        }
        trajectory.push(profile.clone());
        let e = game.total_energy(&profile);
        if e < best.0 {
            best = (e, profile.clone());
        }
        if !changed {
            fixed_point = true;
            break;
        }
    }

    let converged = fixed_point && game.is_feasible(&profile);
    let (total_energy_j, profile) = if converged {
        (game.total_energy(&profile), profile)
    } else {
        log::warn!(
            "best-response dynamics stopped after {iterations} sweeps without an equilibrium"
        );
        best
    };
    let is_pure_nash = converged && game.verify_pure_nash(&profile, DEFAULT_EPSILON_REL).is_nash;
    Ok(EquilibriumReport {
        profile,
        total_energy_j,
        is_pure_nash,
        iterations,
        converged,
        trajectory,
    })
}
