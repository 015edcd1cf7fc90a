use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::GameError;

const TOL: f64 = 1e-9;
/// Relative singular-value cutoff for treating a support system as singular.
const RANK_TOL: f64 = 1e-12;

/// Two-player game in payoff (maximisation) form.
#[derive(Debug, Clone, PartialEq)]
pub struct BimatrixGame {
    payoff_a: DMatrix<f64>,
    payoff_b: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedEquilibrium {
    pub row: Vec<f64>,
    pub col: Vec<f64>,
    pub row_payoff: f64,
    pub col_payoff: f64,
}

impl BimatrixGame {
    pub fn new(payoff_a: DMatrix<f64>, payoff_b: DMatrix<f64>) -> Result<Self, GameError> {
        if payoff_a.shape() != payoff_b.shape() || payoff_a.is_empty() {
            return Err(GameError::ShapeMismatch {
                a: payoff_a.shape(),
                b: payoff_b.shape(),
            });
        }
        if payoff_a
            .iter()
            .chain(payoff_b.iter())
            .any(|v| !v.is_finite())
        {
            return Err(GameError::NonFinitePayoff);
        }
        Ok(Self { payoff_a, payoff_b })
    }

    pub fn from_rows(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<Self, GameError> {
        let to_matrix = |rows: &[Vec<f64>]| -> Result<DMatrix<f64>, GameError> {
            let ncols = rows.first().map_or(0, Vec::len);
            if rows.iter().any(|r| r.len() != ncols) {
                return Err(GameError::InvalidArgument("ragged payoff matrix".into()));
            }
            Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
        };
        Self::new(to_matrix(a)?, to_matrix(b)?)
    }

    pub fn payoff_a(&self) -> &DMatrix<f64> {
        &self.payoff_a
    }

    pub fn payoff_b(&self) -> &DMatrix<f64> {
        &self.payoff_b
    }

    pub fn shape(&self) -> (usize, usize) {
        self.payoff_a.shape()
    }

    /// Expected payoffs `(row, col)` of a mixed profile.
    pub fn expected_payoffs(&self, row: &[f64], col: &[f64]) -> (f64, f64) {
        let x = DVector::from_column_slice(row);
        let y = DVector::from_column_slice(col);
        (x.dot(&(&self.payoff_a * &y)), x.dot(&(&self.payoff_b * &y)))
    }

    /// Whether no pure deviation gains more than `tol` against the mixture.
    pub fn is_equilibrium(&self, row: &[f64], col: &[f64], tol: f64) -> bool {
        let x = DVector::from_column_slice(row);
        let y = DVector::from_column_slice(col);
        let (u, v) = self.expected_payoffs(row, col);
        let ay = &self.payoff_a * &y;
        let xb = self.payoff_b.transpose() * &x;
        ay.iter().all(|&p| p <= u + tol) && xb.iter().all(|&p| p <= v + tol)
    }
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..=n - (k - cur.len()) {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::with_capacity(k), &mut out);
    out
}

enum Solve {
    Unique(Vec<f64>),
    /// Singular system with a consistent solution; the particular solution.
    Continuum(Vec<f64>),
    None,
}

/// Mixture over `support` (length `size`) making the opponent indifferent
/// across `opp_support`. `payoff(s, o)` is the opponent's payoff.
fn indifference(
    support: &[usize],
    opp_support: &[usize],
    size: usize,
    payoff: impl Fn(usize, usize) -> f64,
) -> Solve {
    let k = support.len();
    let mut m = DMatrix::<f64>::zeros(k + 1, k + 1);
    let mut rhs = DVector::<f64>::zeros(k + 1);
    for (r, &o) in opp_support.iter().enumerate() {
        for (c, &s) in support.iter().enumerate() {
            m[(r, c)] = payoff(s, o);
        }
        m[(r, k)] = -1.0;
    }
    for c in 0..k {
        m[(k, c)] = 1.0;
    }
    rhs[k] = 1.0;

    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let expand = |sol: &DVector<f64>| {
        let mut full = vec![0.0; size];
        for (c, &s) in support.iter().enumerate() {
            full[s] = sol[c];
        }
        full
    };
    if smin > RANK_TOL * smax.max(1.0) {
        match m.lu().solve(&rhs) {
            Some(sol) => Solve::Unique(expand(&sol)),
            None => Solve::None,
        }
    } else {
        let Ok(sol) = svd.solve(&rhs, RANK_TOL * smax.max(1.0)) else {
            return Solve::None;
        };
        let residual = (&m * &sol - &rhs).norm();
        if residual <= TOL {
            Solve::Continuum(expand(&sol))
        } else {
            Solve::None
        }
    }
}

fn valid_on(mix: &[f64], support: &[usize], strict: bool) -> bool {
    support
        .iter()
        .all(|&i| if strict { mix[i] > TOL } else { mix[i] >= -TOL })
        && (mix.iter().sum::<f64>() - 1.0).abs() <= TOL
}

fn clean(mix: &mut [f64]) {
    for v in mix.iter_mut() {
        *v = v.max(0.0);
    }
    let sum: f64 = mix.iter().sum();
    for v in mix.iter_mut() {
        *v /= sum;
    }
}

fn best_response_count(payoffs: &DVector<f64>, value: f64) -> usize {
    payoffs.iter().filter(|&&p| p >= value - TOL).count()
}

/// All Nash equilibria found by enumerating equal-size support pairs.
///
/// Games where some support pair admits a continuum of solutions, or where a
/// solution's best-response set is wider than its support, are reported as
/// [`GameError::DegenerateGame`] along with every equilibrium that was found.
pub fn support_enumeration(game: &BimatrixGame) -> Result<Vec<MixedEquilibrium>, GameError> {
    let (m, n) = game.shape();
    let a = &game.payoff_a;
    let b = &game.payoff_b;
    let mut equilibria = Vec::new();
    let mut degenerate = Vec::new();

    for k in 1..=m.min(n) {
        let row_sets = subsets(m, k);
        let col_sets = subsets(n, k);
        for rs in &row_sets {
            for cs in &col_sets {
                // Row mixture equalises the column player's payoffs, and vice versa.
                let x = indifference(rs, cs, m, |i, j| b[(i, j)]);
                let y = indifference(cs, rs, n, |j, i| a[(i, j)]);
                let (mut x, mut y, continuum) = match (x, y) {
                    (Solve::Unique(x), Solve::Unique(y)) => (x, y, false),
                    (
                        Solve::Unique(x) | Solve::Continuum(x),
                        Solve::Unique(y) | Solve::Continuum(y),
                    ) => (x, y, true),
                    _ => continue,
                };
                if !valid_on(&x, rs, !continuum) || !valid_on(&y, cs, !continuum) {
                    continue;
                }
                clean(&mut x);
                clean(&mut y);
                if !game.is_equilibrium(&x, &y, TOL) {
                    continue;
                }
                let (row_payoff, col_payoff) = game.expected_payoffs(&x, &y);
                let ay = a * DVector::from_column_slice(&y);
                let xb = b.transpose() * DVector::from_column_slice(&x);
                let wide = best_response_count(&ay, row_payoff) > k
                    || best_response_count(&xb, col_payoff) > k;
                if continuum || wide {
                    degenerate.push((rs.clone(), cs.clone()));
                }
                if !continuum {
                    equilibria.push(MixedEquilibrium {
                        row: x,
                        col: y,
                        row_payoff,
                        col_payoff,
                    });
                }
            }
        }
    }

    if degenerate.is_empty() {
        Ok(equilibria)
    } else {
        Err(GameError::DegenerateGame {
            supports: degenerate,
            equilibria,
        })
    }
}
