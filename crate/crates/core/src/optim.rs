//! Derivative-free minimization over stochastic matrices.
//!
//! The decision variable is a channel: `n_in` rows, each a point on the
//! `n_out`-simplex, stored flattened. Search is a coordinate pattern descent:
//! for each (row, symbol) pair try pulling the row toward that vertex and
//! shrinking that symbol's mass, keep strict improvements, halve the step when
//! a full sweep stalls. Restarts run from caller-supplied starts (tried first,
//! in order) plus seeded Dirichlet rows; ties keep the earliest start, so the
//! result is a deterministic function of the inputs.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Restart/iteration budget for a single minimization.
#[derive(Clone, Copy, Debug)]
pub struct Budget {
    pub restarts: usize,
    pub max_sweeps: usize,
    /// Objective tolerance; improvements below 1e-12 are treated as ties.
    pub tol: f64,
    pub seed: u64,
}

impl Default for Budget {
    fn default() -> Self {
        Self {
            restarts: 32,
            max_sweeps: 200,
            tol: 1e-6,
            seed: 0x5eed,
        }
    }
}

/// Outcome of one minimization.
#[derive(Clone, Debug)]
pub struct Solution {
    pub rows: Vec<f64>,
    pub value: f64,
    /// Whether the step size shrank to the floor before the sweep budget ran out
    /// on the winning restart.
    pub converged: bool,
    pub evals: u64,
}

const IMPROVE_EPS: f64 = 1e-12;
const STEP_FLOOR: f64 = 1e-4;

fn dirichlet_rows<R: Rng>(rng: &mut R, n_in: usize, n_out: usize) -> Vec<f64> {
    let mut rows = vec![0.0; n_in * n_out];
    for r in 0..n_in {
        let row = &mut rows[r * n_out..(r + 1) * n_out];
        let mut sum = 0.0;
        for p in row.iter_mut() {
            *p = -rng.random::<f64>().max(f64::MIN_POSITIVE).ln();
            sum += *p;
        }
        row.iter_mut().for_each(|p| *p /= sum);
    }
    rows
}

fn refine<F: Fn(&[f64]) -> f64>(
    start: &[f64],
    n_in: usize,
    n_out: usize,
    f: &F,
    budget: &Budget,
) -> Solution {
    let mut rows = start.to_vec();
    let mut value = f(&rows);
    let mut evals = 1u64;
    let mut step = 0.25f64;
    let mut converged = false;
    let mut candidate = rows.clone();
    for _sweep in 0..budget.max_sweeps {
        let mut improved = false;
        for r in 0..n_in {
            for w in 0..n_out {
                let base = r * n_out;
                let pw = rows[base + w];
                // toward the vertex e_w
                if pw < 1.0 {
                    candidate.copy_from_slice(&rows);
                    for (i, c) in candidate[base..base + n_out].iter_mut().enumerate() {
                        *c = if i == w {
                            (1.0 - step) * *c + step
                        } else {
                            (1.0 - step) * *c
                        };
                    }
                    let v = f(&candidate);
                    evals += 1;
                    if v < value - IMPROVE_EPS {
                        value = v;
                        rows.copy_from_slice(&candidate);
                        improved = true;
                        continue;
                    }
                }
                // away: shrink this symbol's mass, renormalize the row
                let pw = rows[base + w];
                if pw > 0.0 && pw < 1.0 {
                    candidate.copy_from_slice(&rows);
                    let scale = 1.0 - step * pw;
                    for (i, c) in candidate[base..base + n_out].iter_mut().enumerate() {
                        *c = if i == w { *c * (1.0 - step) } else { *c } / scale;
                    }
                    let v = f(&candidate);
                    evals += 1;
                    if v < value - IMPROVE_EPS {
                        value = v;
                        rows.copy_from_slice(&candidate);
                        improved = true;
                    }
                }
            }
        }
        if !improved {
            step *= 0.5;
            if step < STEP_FLOOR {
                converged = true;
                break;
            }
        }
    }
    Solution {
        rows,
        value,
        converged,
        evals,
    }
}

/// Minimizes `f` over channels, trying `starts` first and then seeded random
/// restarts until `budget.restarts` refinements have run in total.
pub fn minimize_channel<F>(
    n_in: usize,
    n_out: usize,
    f: F,
    starts: &[Vec<f64>],
    budget: &Budget,
) -> Solution
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let mut all_starts: Vec<Vec<f64>> = Vec::new();
    for s in starts {
        assert_eq!(s.len(), n_in * n_out, "start has the wrong shape");
        all_starts.push(s.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(budget.seed);
    while all_starts.len() < budget.restarts.max(starts.len()) {
        all_starts.push(dirichlet_rows(&mut rng, n_in, n_out));
    }

    let solutions: Vec<Solution> = all_starts
        .par_iter()
        .map(|s| refine(s, n_in, n_out, &f, budget))
        .collect();
    // deterministic reduction: strictly better value wins, earliest start
    // breaks ties, so completion order never matters
    let mut best: Option<Solution> = None;
    let mut evals = 0u64;
    for sol in solutions {
        evals += sol.evals;
        match &best {
            Some(b) if sol.value >= b.value - IMPROVE_EPS => {}
            _ => best = Some(sol),
        }
    }
    let mut best = best.expect("at least one start");
    best.evals = evals;
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_a_linear_minimum_at_a_vertex() {
        // minimize Σ rows·cost: optimum puts all mass on the cheapest symbol
        let cost = [3.0, 1.0, 2.0];
        let f = |rows: &[f64]| -> f64 { rows.iter().zip(cost.iter().cycle()).map(|(p, c)| p * c).sum() };
        let sol = minimize_channel(2, 3, f, &[], &Budget::default());
        assert!((sol.value - 2.0).abs() < 1e-3, "value {}", sol.value);
        assert!(sol.rows[1] > 0.999 && sol.rows[4] > 0.999);
    }

    #[test]
    fn quadratic_interior_minimum() {
        // minimize (p0 − 0.3)² per row
        let f = |rows: &[f64]| -> f64 {
            (rows[0] - 0.3).powi(2) + (rows[2] - 0.3).powi(2)
        };
        let sol = minimize_channel(2, 2, f, &[], &Budget::default());
        assert!(sol.value < 1e-6);
        assert!((sol.rows[0] - 0.3).abs() < 1e-2);
    }

    #[test]
    fn deterministic_given_seed_and_keeps_first_tie() {
        let f = |rows: &[f64]| -> f64 { rows[0] * 0.0 }; // constant objective
        let start = vec![0.25, 0.75, 0.5, 0.5];
        let budget = Budget {
            restarts: 8,
            ..Budget::default()
        };
        let a = minimize_channel(2, 2, f, &[start.clone()], &budget);
        let b = minimize_channel(2, 2, f, &[start.clone()], &budget);
        assert_eq!(a.rows, b.rows);
        // constant objective: nothing strictly improves, first start is kept
        assert_eq!(a.rows, start);
    }

    #[test]
    fn rows_stay_on_the_simplex() {
        let f = |rows: &[f64]| -> f64 { rows.iter().map(|p| (p - 0.37).powi(2)).sum() };
        let sol = minimize_channel(3, 4, f, &[], &Budget::default());
        for r in 0..3 {
            let row = &sol.rows[r * 4..(r + 1) * 4];
            let sum: f64 = row.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
            assert!(row.iter().all(|&p| (-1e-12..=1.0 + 1e-12).contains(&p)));
        }
    }
}
