//! Assignment solvers for the padded cost matrix under the balanced
//! objective `min(f1 + f2)`.
//!
//! `solve_hungarian` is the exact `f1`-only solver (the padded problem is a
//! standard square assignment). `solve_balanced` substitutes the externally
//! published metaheuristic: it starts from the Hungarian solution and runs a
//! deterministic local search over column swaps and 3-cycles, so its total
//! objective never exceeds the start. `solve_exact` is the brute-force
//! enumeration oracle for small instances.

use crate::similarity::CostMatrix;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest instance the exhaustive solver accepts.
pub const EXACT_LIMIT: usize = 9;

#[derive(Debug, Error, PartialEq)]
pub enum MatcherError {
    #[error("exact solver limited to {EXACT_LIMIT} columns, got {0}")]
    TooLarge(usize),
}

/// How the balance term `f2` spreads individual matched costs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BalanceMode {
    /// Squared deviation of each matched cost from the mean matched cost.
    #[default]
    MeanDeviation,
    /// Squared deviation from the raw sum, as literally printed.
    RawSum,
}

/// A complete row-to-column assignment on the padded square matrix. Rows
/// `0..k_v` are real VD neighbors; columns taken by padded rows are the
/// unmatched AD neighbors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub row_to_col: Vec<usize>,
}

impl Assignment {
    /// AD columns assigned to padded rows, in increasing column order.
    pub fn unmatched_columns(&self, k_v: usize) -> Vec<usize> {
        let mut cols: Vec<usize> = self.row_to_col[k_v..].to_vec();
        cols.sort_unstable();
        cols
    }

    pub fn is_permutation(&self) -> bool {
        let n = self.row_to_col.len();
        let mut seen = vec![false; n];
        for &c in &self.row_to_col {
            if c >= n || seen[c] {
                return false;
            }
            seen[c] = true;
        }
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveValue {
    pub f1: f64,
    pub f2: f64,
}

impl ObjectiveValue {
    pub fn total(&self) -> f64 {
        self.f1 + self.f2
    }
}

/// Evaluates `f1` and `f2` over the real rows only; padding never enters the
/// objective.
pub fn evaluate(costs: &CostMatrix, assignment: &Assignment, mode: BalanceMode) -> ObjectiveValue {
    let k_v = costs.k_v;
    let f1: f64 = (0..k_v)
        .map(|i| costs.get(i, assignment.row_to_col[i]))
        .sum();
    if k_v == 0 {
        return ObjectiveValue { f1: 0.0, f2: 0.0 };
    }
    let center = match mode {
        BalanceMode::MeanDeviation => f1 / k_v as f64,
        BalanceMode::RawSum => f1,
    };
    let f2 = (0..k_v)
        .map(|i| {
            let c = costs.get(i, assignment.row_to_col[i]);
            (c - center) * (c - center)
        })
        .sum();
    ObjectiveValue { f1, f2 }
}

/// Exhaustive minimizer of `f1 + f2`; ties broken by the lexicographically
/// smallest assignment vector.
pub fn solve_exact(costs: &CostMatrix, mode: BalanceMode) -> Result<Assignment, MatcherError> {
    let n = costs.n;
    if n > EXACT_LIMIT {
        return Err(MatcherError::TooLarge(n));
    }
    if n == 0 {
        return Ok(Assignment {
            row_to_col: Vec::new(),
        });
    }
    let mut current = vec![usize::MAX; n];
    let mut used = vec![false; n];
    let mut best: Option<(f64, Vec<usize>)> = None;

    fn walk(
        costs: &CostMatrix,
        mode: BalanceMode,
        row: usize,
        current: &mut Vec<usize>,
        used: &mut Vec<bool>,
        best: &mut Option<(f64, Vec<usize>)>,
    ) {
        let n = costs.n;
        if row == n {
            let assignment = Assignment {
                row_to_col: current.clone(),
            };
            let value = evaluate(costs, &assignment, mode).total();
            // Strict improvement wins; exact ties keep the earlier (lex
            // smaller) vector because enumeration is in lex order.
            let better = match best {
                None => true,
                Some((bv, _)) => value < *bv,
            };
            if better {
                *best = Some((value, current.clone()));
            }
            return;
        }
        for col in 0..n {
            if !used[col] {
                used[col] = true;
                current[row] = col;
                walk(costs, mode, row + 1, current, used, best);
                used[col] = false;
            }
        }
    }
    walk(costs, mode, 0, &mut current, &mut used, &mut best);
    Ok(Assignment {
        row_to_col: best.expect("nonempty instance").1,
    })
}

/// Exact `f1` minimizer via the Jonker-Volgenant shortest augmenting path
/// formulation, O(n^3).
pub fn solve_hungarian(costs: &CostMatrix) -> Assignment {
    let n = costs.n;
    if n == 0 {
        return Assignment {
            row_to_col: Vec::new(),
        };
    }
    // job[w] = row assigned to column w; column n is the virtual start.
    let mut job: Vec<Option<usize>> = vec![None; n + 1];
    let mut potential_row = vec![0.0f64; n];
    let mut potential_col = vec![0.0f64; n + 1];

    for row in 0..n {
        let mut col_cur = n;
        job[col_cur] = Some(row);
        let mut min_to = vec![f64::INFINITY; n + 1];
        let mut prev = vec![usize::MAX; n + 1];
        let mut in_tree = vec![false; n + 1];

        while let Some(r) = job[col_cur] {
            in_tree[col_cur] = true;
            let mut delta = f64::INFINITY;
            let mut col_next = n;
            for col in 0..n {
                if in_tree[col] {
                    continue;
                }
                let reduced = costs.get(r, col) - potential_row[r] - potential_col[col];
                if reduced < min_to[col] {
                    min_to[col] = reduced;
                    prev[col] = col_cur;
                }
                if min_to[col] < delta {
                    delta = min_to[col];
                    col_next = col;
                }
            }
            for col in 0..=n {
                if in_tree[col] {
                    if let Some(rr) = job[col] {
                        potential_row[rr] += delta;
                    }
                    potential_col[col] -= delta;
                } else {
                    min_to[col] -= delta;
                }
            }
            col_cur = col_next;
        }
        // Augment along the alternating path.
        while col_cur != n {
            let p = prev[col_cur];
            job[col_cur] = job[p];
            col_cur = p;
        }
    }

    let mut row_to_col = vec![usize::MAX; n];
    for col in 0..n {
        if let Some(r) = job[col] {
            row_to_col[r] = col;
        }
    }
    Assignment { row_to_col }
}

/// One best-improvement descent pass per call from `solve_balanced`'s loop;
/// mutates the assignment in place and returns the new objective. Consumes
/// passes from the shared budget; stops when converged or out of passes.
fn descend(
    costs: &CostMatrix,
    assignment: &mut Assignment,
    mut current: f64,
    mode: BalanceMode,
    passes_left: &mut usize,
) -> f64 {
    let n = costs.n;
    let k_v = costs.k_v;
    while *passes_left > 0 {
        *passes_left -= 1;
        let mut best_gain = 0.0f64;
        let mut best_move: Option<Vec<(usize, usize)>> = None;

        // Pairwise swaps. Swaps between two padded rows cannot change the
        // objective, so at least one row must be real.
        for i in 0..k_v {
            for j in (i + 1)..n {
                let (ci, cj) = (assignment.row_to_col[i], assignment.row_to_col[j]);
                assignment.row_to_col[i] = cj;
                assignment.row_to_col[j] = ci;
                let value = evaluate(costs, &assignment, mode).total();
                assignment.row_to_col[i] = ci;
                assignment.row_to_col[j] = cj;
                let gain = current - value;
                if gain > best_gain + 1e-12 {
                    best_gain = gain;
                    best_move = Some(vec![(i, cj), (j, ci)]);
                }
            }
        }

        // 3- and 4-cycles are only affordable (and only needed) on small
        // instances, where the balance term makes the landscape rugged.
        if n <= 12 {
            for i in 0..k_v {
                for j in 0..n {
                    for k in 0..n {
                        if i == j || j == k || i == k {
                            continue;
                        }
                        let (ci, cj, ck) = (
                            assignment.row_to_col[i],
                            assignment.row_to_col[j],
                            assignment.row_to_col[k],
                        );
                        assignment.row_to_col[i] = cj;
                        assignment.row_to_col[j] = ck;
                        assignment.row_to_col[k] = ci;
                        let value = evaluate(costs, &assignment, mode).total();
                        assignment.row_to_col[i] = ci;
                        assignment.row_to_col[j] = cj;
                        assignment.row_to_col[k] = ck;
                        let gain = current - value;
                        if gain > best_gain + 1e-12 {
                            best_gain = gain;
                            best_move = Some(vec![(i, cj), (j, ck), (k, ci)]);
                        }
                        for l in 0..n {
                            if l == i || l == j || l == k {
                                continue;
                            }
                            let cl = assignment.row_to_col[l];
                            assignment.row_to_col[i] = cj;
                            assignment.row_to_col[j] = ck;
                            assignment.row_to_col[k] = cl;
                            assignment.row_to_col[l] = ci;
                            let value = evaluate(costs, &assignment, mode).total();
                            assignment.row_to_col[i] = ci;
                            assignment.row_to_col[j] = cj;
                            assignment.row_to_col[k] = ck;
                            assignment.row_to_col[l] = cl;
                            let gain = current - value;
                            if gain > best_gain + 1e-12 {
                                best_gain = gain;
                                best_move = Some(vec![(i, cj), (j, ck), (k, cl), (l, ci)]);
                            }
                        }
                    }
                }
            }
        }

        match best_move {
            Some(moves) => {
                for (row, col) in moves {
                    assignment.row_to_col[row] = col;
                }
                // Re-evaluate instead of subtracting the gain: when the walk
                // crosses sentinel-scale values the subtraction cancels
                // catastrophically and the tracked objective drifts to zero.
                let _ = best_gain;
                current = evaluate(costs, assignment, mode).total();
            }
            None => break,
        }
    }
    current
}

/// Balanced solver: Hungarian start, then a deterministic best-improvement
/// local search over pairwise column swaps (plus 3- and 4-cycles on small
/// instances) on `f1 + f2`. On small instances any leftover budget funds
/// fixed-seed perturbation restarts, so the landscape's local optima are
/// escaped while the result stays reproducible. The returned total never
/// exceeds the Hungarian start's. `budget` caps the number of search passes.
pub fn solve_balanced(costs: &CostMatrix, budget: usize, mode: BalanceMode) -> Assignment {
    let mut assignment = solve_hungarian(costs);
    let n = costs.n;
    if n < 2 {
        return assignment;
    }
    let mut passes_left = budget;
    let start = evaluate(costs, &assignment, mode).total();
    let mut best_val = descend(costs, &mut assignment, start, mode, &mut passes_left);
    if n > 12 {
        return assignment;
    }
    let mut best = assignment;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0xBA1A_9CED);
    while passes_left > 0 {
        let mut cand = best.clone();
        for _ in 0..3 {
            let i = rng.gen_range(0..costs.k_v.max(1));
            let j = rng.gen_range(0..n);
            cand.row_to_col.swap(i, j);
        }
        let val = evaluate(costs, &cand, mode).total();
        let val = descend(costs, &mut cand, val, mode, &mut passes_left);
        if val < best_val - 1e-12 {
            best = cand;
            best_val = val;
        }
    }
    best
}
