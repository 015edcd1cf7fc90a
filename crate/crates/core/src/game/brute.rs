use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Game, GameError, Profile, DEFAULT_EPSILON_REL};

pub const DEFAULT_SPACE_LIMIT: u64 = 1_000_000;

const CHUNK: u64 = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BruteForceResult {
    pub optimum: Profile,
    pub optimum_energy_j: f64,
    /// Every pure Nash profile, in lexicographic order.
    pub nash_profiles: Vec<Profile>,
    pub profiles_evaluated: u64,
}

impl BruteForceResult {
    pub fn is_nash(&self, profile: &Profile) -> bool {
        self.nash_profiles.binary_search(profile).is_ok()
    }
}

struct Partial {
    best: Option<(f64, Vec<usize>)>,
    nash: Vec<Profile>,
}

fn scan(game: &Game<'_>, start: u64, end: u64) -> Partial {
    let mut cur = game.decode(start);
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut nash = Vec::new();
    for _ in start..end {
        let profile = Profile(cur);
        let e = game.total_energy(&profile);
        if e.is_finite() && best.as_ref().is_none_or(|(b, _)| e < *b) {
            best = Some((e, profile.0.clone()));
        }
        if game.verify_pure_nash(&profile, DEFAULT_EPSILON_REL).is_nash {
            nash.push(profile.clone());
        }
        cur = profile.0;
        game.advance(&mut cur);
    }
    Partial { best, nash }
}

/// Exhaustive enumeration of the joint space.
///
/// The optimum is the lexicographically first profile of minimal total
/// energy, independent of how the work is split across threads.
pub fn brute_force(game: &Game<'_>, limit: u64) -> Result<BruteForceResult, GameError> {
    let size = game.space().size();
    if size > limit as u128 {
        return Err(GameError::SpaceTooLarge { size, limit });
    }
    let size = size as u64;
    let chunks: Vec<Partial> = (0..size.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| scan(game, c * CHUNK, ((c + 1) * CHUNK).min(size)))
        .collect();

    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut nash_profiles = Vec::new();
    for part in chunks {
        if let Some((e, p)) = part.best {
            if best.as_ref().is_none_or(|(b, _)| e < *b) {
                best = Some((e, p));
            }
        }
        nash_profiles.extend(part.nash);
    }
    let (optimum_energy_j, optimum) = best.ok_or(GameError::NoFeasibleProfile)?;
    Ok(BruteForceResult {
        optimum: Profile(optimum),
        optimum_energy_j,
        nash_profiles,
        profiles_evaluated: size,
    })
}
