//! Exhaustive search over feasible selections, for cross-checking [`super::solve`].

use super::{AssignmentProblem, AssignmentSolution};
use crate::error::{Error, Result};

pub const ORACLE_MAX_COLUMNS: usize = 25;

/// Best feasible subset by enumeration. Among equal objectives the
/// lexicographically smallest ascending index list wins.
pub fn brute_force_oracle(problem: &AssignmentProblem) -> Result<AssignmentSolution> {
    let p = problem.num_columns();
    if p > ORACLE_MAX_COLUMNS {
        return Err(Error::SizeGuard(p, ORACLE_MAX_COLUMNS));
    }
    // suffix[j] = Σ_{i ≥ j} max(c_i, 0), an upper bound on what is still reachable.
    let mut suffix = vec![0.0; p + 1];
    for j in (0..p).rev() {
        suffix[j] = suffix[j + 1] + problem.costs[j].max(0.0);
    }
    let mut state = State {
        problem,
        suffix,
        used: vec![false; problem.num_rows()],
        current: Vec::new(),
        best: Vec::new(),
        best_value: 0.0,
    };
    state.visit(0, 0.0);
    Ok(AssignmentSolution {
        objective: problem.objective_of(&state.best),
        selected: state.best,
        relaxation_was_integral: true,
    })
}

struct State<'a> {
    problem: &'a AssignmentProblem,
    suffix: Vec<f64>,
    used: Vec<bool>,
    current: Vec<usize>,
    best: Vec<usize>,
    best_value: f64,
}

impl State<'_> {
    fn visit(&mut self, j: usize, value: f64) {
        if j == self.problem.num_columns() {
            if value > self.best_value || (value == self.best_value && self.current < self.best) {
                self.best_value = value;
                self.best = self.current.clone();
            }
            return;
        }
        if value + self.suffix[j] < self.best_value {
            return;
        }
        let col = self.problem.column(j);
        if col.iter().all(|&i| !self.used[i]) {
            for &i in col {
                self.used[i] = true;
            }
            self.current.push(j);
            self.visit(j + 1, value + self.problem.costs[j]);
            self.current.pop();
            for &i in col {
                self.used[i] = false;
            }
        }
        self.visit(j + 1, value);
    }
}
