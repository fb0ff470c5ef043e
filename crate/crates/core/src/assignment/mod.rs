//! Hypothesis selection as a 0/1 packing program.
//!
//! Maximize `cᵀz` subject to `A z ≤ 1`, `z ∈ {0,1}^p`, where column `j` of
//! the 0/1 matrix `A` marks the graph nodes used by hypothesis `j`, plus one
//! row per track whose history the hypothesis has absorbed. The LP
//! relaxation is solved first; when its optimum is not integral an exact
//! branch-and-bound on fractional columns finishes the job. Integrality of
//! the relaxation is checked on every solve, never assumed.

mod oracle;
mod simplex;

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::graph::{AssociationGraph, NodeId};
use crate::hypothesis::HypothesisMap;
use crate::track::TrackId;

pub use oracle::{brute_force_oracle, ORACLE_MAX_COLUMNS};

/// Tolerance for treating an LP value as 0 or 1.
pub const INTEGRALITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentProblem {
    pub costs: Vec<f64>,
    /// Per constraint (graph node), the columns that use it.
    pub rows: Vec<Vec<usize>>,
    /// Graph node behind each leading constraint row, when built from a graph.
    pub row_nodes: Vec<NodeId>,
    /// Track behind each trailing constraint row (after the node rows).
    pub row_tracks: Vec<TrackId>,
    /// Index into the hypothesis map for each column.
    pub column_to_hypothesis: Vec<usize>,
    columns: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentSolution {
    /// Selected column indices, ascending.
    pub selected: Vec<usize>,
    pub objective: f64,
    pub relaxation_was_integral: bool,
}

impl AssignmentProblem {
    /// `columns[j]` lists the rows used by column `j`; all must be `< num_rows`.
    pub fn from_columns(
        costs: Vec<f64>,
        columns: Vec<Vec<usize>>,
        num_rows: usize,
    ) -> Result<Self> {
        if costs.len() != columns.len() {
            return Err(Error::Consistency(format!(
                "{} costs for {} columns",
                costs.len(),
                columns.len()
            )));
        }
        let mut rows = vec![Vec::new(); num_rows];
        let mut columns = columns;
        for (j, col) in columns.iter_mut().enumerate() {
            col.sort_unstable();
            col.dedup();
            for &i in col.iter() {
                rows.get_mut(i)
                    .ok_or_else(|| {
                        Error::Consistency(format!("column {j} uses row {i} of {num_rows}"))
                    })?
                    .push(j);
            }
        }
        Ok(Self {
            column_to_hypothesis: (0..costs.len()).collect(),
            costs,
            rows,
            row_nodes: Vec::new(),
            row_tracks: Vec::new(),
            columns,
        })
    }

    pub fn num_columns(&self) -> usize {
        self.costs.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn column(&self, j: usize) -> &[usize] {
        &self.columns[j]
    }

    pub fn nnz(&self) -> usize {
        self.columns.iter().map(Vec::len).sum()
    }

    /// Fraction of zero entries in `A`.
    pub fn sparsity(&self) -> f64 {
        let cells = self.num_rows() * self.num_columns();
        if cells == 0 {
            1.0
        } else {
            1.0 - self.nnz() as f64 / cells as f64
        }
    }

    /// `A z ≤ 1` for the given selection.
    pub fn is_feasible(&self, selected: &[usize]) -> bool {
        let mut used = vec![false; self.num_rows()];
        for &j in selected {
            for &i in &self.columns[j] {
                if std::mem::replace(&mut used[i], true) {
                    return false;
                }
            }
        }
        true
    }

    /// Sum of costs taken in ascending column order.
    pub fn objective_of(&self, selected: &[usize]) -> f64 {
        let mut s = selected.to_vec();
        s.sort_unstable();
        s.iter().map(|&j| self.costs[j]).sum()
    }

    /// The (binary) program in CPLEX LP text format.
    pub fn to_lp_format(&self) -> String {
        let mut out = String::from("\\ hypothesis selection\nMaximize\n obj:");
        for (j, c) in self.costs.iter().enumerate() {
            let _ = write!(
                out,
                " {} {:e} z{j}",
                if *c < 0.0 { '-' } else { '+' },
                c.abs()
            );
        }
        out.push_str("\nSubject To\n");
        for (i, cols) in self.rows.iter().enumerate() {
            if cols.is_empty() {
                continue;
            }
            let _ = write!(out, " r{i}:");
            for (n, j) in cols.iter().enumerate() {
                let _ = write!(out, "{} z{j}", if n == 0 { "" } else { " +" });
            }
            out.push_str(" <= 1\n");
        }
        out.push_str("Binary\n");
        for j in 0..self.num_columns() {
            let _ = writeln!(out, " z{j}");
        }
        out.push_str("End\n");
        out
    }
}

/// One constraint per graph node, one column per hypothesis, plus one
/// constraint per track so that at most one selected hypothesis draws on
/// each track's history, even after that history left the window.
pub fn build_problem(map: &HypothesisMap, graph: &AssociationGraph) -> Result<AssignmentProblem> {
    let row_nodes: Vec<NodeId> = graph.nodes().map(|n| n.id).collect();
    let row_of: HashMap<NodeId, usize> =
        row_nodes.iter().enumerate().map(|(i, &n)| (n, i)).collect();
    let mut row_tracks: Vec<TrackId> = map
        .rows
        .iter()
        .flat_map(|r| r.origin_track.iter().chain(&r.tracks).copied())
        .collect();
    row_tracks.sort_unstable();
    row_tracks.dedup();
    let mut columns = Vec::with_capacity(map.len());
    let mut costs = Vec::with_capacity(map.len());
    for (h, row) in map.rows.iter().enumerate() {
        let mut col = row
            .nodes()
            .map(|n| {
                row_of.get(&n).copied().ok_or_else(|| {
                    Error::Consistency(format!("hypothesis {h} references missing node {n}"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        for &t in row.origin_track.iter().chain(&row.tracks) {
            let i = row_tracks.binary_search(&t).expect("collected above");
            col.push(row_nodes.len() + i);
        }
        columns.push(col);
        costs.push(row.score);
    }
    let mut problem =
        AssignmentProblem::from_columns(costs, columns, row_nodes.len() + row_tracks.len())?;
    problem.row_nodes = row_nodes;
    problem.row_tracks = row_tracks;
    Ok(problem)
}

struct Search<'a> {
    problem: &'a AssignmentProblem,
    budget: usize,
    nodes: usize,
    exhausted: bool,
}

struct SubResult {
    selected: Vec<usize>,
    value: f64,
    integral: bool,
}

/// Bounds closer than this are treated as equal when pruning.
const PRUNE_TOL: f64 = 1e-9;

impl Search<'_> {
    /// Connected components of the conflict structure restricted to `cols`.
    fn components(&self, cols: &[usize]) -> Vec<Vec<usize>> {
        let mut parent: Vec<usize> = (0..cols.len()).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        let mut owner: HashMap<usize, usize> = HashMap::new();
        for (k, &j) in cols.iter().enumerate() {
            for &i in self.problem.column(j) {
                match owner.get(&i) {
                    Some(&o) => {
                        let (a, b) = (find(&mut parent, o), find(&mut parent, k));
                        if a != b {
                            parent[a.max(b)] = a.min(b);
                        }
                    }
                    None => {
                        owner.insert(i, k);
                    }
                }
            }
        }
        let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
        for (k, &c) in cols.iter().enumerate() {
            let r = find(&mut parent, k);
            groups.entry(r).or_default().push(c);
        }
        let mut out: Vec<Vec<usize>> = groups.into_values().collect();
        out.sort_by_key(|g| g[0]);
        out
    }

    fn relax(&self, comp: &[usize]) -> Result<(Vec<f64>, f64)> {
        if let [j] = comp {
            return Ok((vec![1.0], self.problem.costs[*j]));
        }
        let mut local: HashMap<usize, usize> = HashMap::new();
        let columns: Vec<Vec<usize>> = comp
            .iter()
            .map(|&j| {
                self.problem
                    .column(j)
                    .iter()
                    .map(|&i| {
                        let next = local.len();
                        *local.entry(i).or_insert(next)
                    })
                    .collect()
            })
            .collect();
        let costs: Vec<f64> = comp.iter().map(|&j| self.problem.costs[j]).collect();
        let lp = simplex::solve_packing_lp(&costs, &columns, local.len())?;
        Ok((lp.values, lp.objective))
    }

    fn greedy(&self, cols: &[usize]) -> Vec<usize> {
        let mut order = cols.to_vec();
        order.sort_by(|&a, &b| {
            self.problem.costs[b]
                .total_cmp(&self.problem.costs[a])
                .then(a.cmp(&b))
        });
        let mut used: HashSet<usize> = HashSet::new();
        let mut out = Vec::new();
        for j in order {
            if self.problem.column(j).iter().all(|i| !used.contains(i)) {
                used.extend(self.problem.column(j).iter().copied());
                out.push(j);
            }
        }
        out
    }

    fn value(&self, sel: &[usize]) -> f64 {
        sel.iter().map(|&j| self.problem.costs[j]).sum()
    }

    /// Best selection over `cols` (all with positive cost) if its value
    /// exceeds `floor`, otherwise `None`.
    fn solve(&mut self, cols: &[usize], floor: f64) -> Result<Option<SubResult>> {
        let comps = self.components(cols);
        let mut relaxed = Vec::with_capacity(comps.len());
        for comp in &comps {
            relaxed.push(self.relax(comp)?);
        }
        let mut upper: Vec<f64> = relaxed.iter().map(|r| r.1).collect();
        if upper.iter().sum::<f64>() <= floor + PRUNE_TOL {
            return Ok(None);
        }
        let mut selected = Vec::new();
        let mut integral = true;
        for (c, (comp, (x, _))) in comps.iter().zip(relaxed).enumerate() {
            let others: f64 = upper
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != c)
                .map(|(_, u)| u)
                .sum();
            let Some(r) = self.solve_component(comp, x, floor - others)? else {
                return Ok(None);
            };
            upper[c] = r.value;
            integral &= r.integral;
            selected.extend(r.selected);
        }
        let value = self.value(&selected);
        Ok(Some(SubResult {
            selected,
            value,
            integral,
        }))
    }

    /// `x` is the component's LP optimum, already known to beat `floor`.
    fn solve_component(
        &mut self,
        comp: &[usize],
        x: Vec<f64>,
        floor: f64,
    ) -> Result<Option<SubResult>> {
        let fractional = x
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > INTEGRALITY_TOL && v < 1.0 - INTEGRALITY_TOL)
            .min_by(|a, b| {
                (a.1 - 0.5)
                    .abs()
                    .total_cmp(&(b.1 - 0.5).abs())
                    .then(a.0.cmp(&b.0))
            })
            .map(|(k, _)| k);
        let Some(k) = fractional else {
            let selected: Vec<usize> = comp
                .iter()
                .zip(&x)
                .filter(|(_, &v)| v > 0.5)
                .map(|(&j, _)| j)
                .collect();
            let value = self.value(&selected);
            return Ok(Some(SubResult {
                selected,
                value,
                integral: true,
            }));
        };

        self.nodes += 1;
        if self.nodes > self.budget {
            self.exhausted = true;
        }
        if self.exhausted {
            let selected = self.greedy(comp);
            let value = self.value(&selected);
            return Ok((value > floor).then_some(SubResult {
                selected,
                value,
                integral: false,
            }));
        }

        let branch = comp[k];
        let branch_rows = self.problem.column(branch);
        let cost = self.problem.costs[branch];
        let compatible: Vec<usize> = comp
            .iter()
            .copied()
            .filter(|&j| {
                j != branch
                    && self
                        .problem
                        .column(j)
                        .iter()
                        .all(|i| !branch_rows.contains(i))
            })
            .collect();
        let mut best = self.solve(&compatible, floor - cost)?.map(|mut r| {
            r.selected.push(branch);
            r.value += cost;
            r
        });
        if best.is_none() && compatible.is_empty() && cost > floor {
            best = Some(SubResult {
                selected: vec![branch],
                value: cost,
                integral: false,
            });
        }
        let floor = best.as_ref().map_or(floor, |b| b.value.max(floor));
        let rest: Vec<usize> = comp.iter().copied().filter(|&j| j != branch).collect();
        if let Some(without) = self.solve(&rest, floor)? {
            if best.as_ref().is_none_or(|b| without.value > b.value) {
                best = Some(without);
            }
        }
        Ok(best.map(|mut b| {
            b.integral = false;
            b
        }))
    }
}

/// Optimal conflict-free selection. Only positive-cost columns are ever
/// selected, so the empty selection (objective 0) is always available.
///
/// Fails with [`Error::Resource`] (carrying the best selection found) when
/// branch-and-bound needs more than `node_limit` nodes.
pub fn solve(problem: &AssignmentProblem, node_limit: usize) -> Result<AssignmentSolution> {
    let eligible: Vec<usize> = (0..problem.num_columns())
        .filter(|&j| problem.costs[j] > 0.0)
        .collect();
    let (free, constrained): (Vec<usize>, Vec<usize>) = eligible
        .into_iter()
        .partition(|&j| problem.column(j).is_empty());
    let mut search = Search {
        problem,
        budget: node_limit,
        nodes: 0,
        exhausted: false,
    };
    let result = search
        .solve(&constrained, f64::NEG_INFINITY)?
        .expect("an unbounded floor is always beaten");
    let mut selected = result.selected;
    selected.extend(free);
    selected.sort_unstable();
    let solution = AssignmentSolution {
        objective: problem.objective_of(&selected),
        selected,
        relaxation_was_integral: result.integral,
    };
    if search.exhausted {
        return Err(Error::Resource {
            nodes: search.nodes,
            incumbent: Box::new(solution),
        });
    }
    Ok(solution)
}
