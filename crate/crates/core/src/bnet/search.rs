//! Greedy hill climbing over DAGs with add / delete / reverse moves.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::dag::Dag;
use super::score::{local_score, Columns};
use crate::error::{Error, Result};
use crate::transform::NormalPanel;

pub const MIN_COMPLETE_ROWS: usize = 50;

/// Smallest score gain accepted as an improvement.
const MIN_GAIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum MoveKind {
    Add,
    Delete,
    Reverse,
}

#[derive(Debug, Clone, Copy)]
struct Move {
    from: usize,
    to: usize,
    kind: MoveKind,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub dag: Dag,
    pub score: f64,
    /// Total score after each accepted move, one trace per run; each trace
    /// starts with the score of the run's initial graph.
    pub traces: Vec<Vec<f64>>,
}

/// Learns a DAG over the panel's stations maximizing the Gaussian BIC.
pub fn learn_structure(
    z_panel: &NormalPanel,
    max_parents: usize,
    restarts: usize,
    seed: u64,
) -> Result<Dag> {
    Ok(learn_structure_traced(z_panel, max_parents, restarts, seed)?.dag)
}

/// [`learn_structure`] with per-run score traces. Run 0 starts from the
/// empty graph, later runs from random DAGs; `restarts` counts all runs
/// (at least one). The best final score wins, earliest run on ties.
pub fn learn_structure_traced(
    z_panel: &NormalPanel,
    max_parents: usize,
    restarts: usize,
    seed: u64,
) -> Result<SearchOutcome> {
    if max_parents == 0 {
        return Err(Error::Argument("max_parents must be at least 1".into()));
    }
    let cols = Columns::from_panel(z_panel);
    let complete = cols.complete_rows();
    if complete < MIN_COMPLETE_ROWS {
        return Err(Error::InsufficientData {
            what: "complete-case rows",
            needed: MIN_COMPLETE_ROWS,
            got: complete,
            station: None,
        });
    }
    let evidence: Vec<bool> = z_panel.stations.iter().map(|s| s.is_evidence).collect();
    let mut search = Search {
        cols: &cols,
        evidence: &evidence,
        max_parents,
        cache: HashMap::new(),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(Vec<Vec<usize>>, f64)> = None;
    let mut traces = Vec::new();
    for run in 0..restarts.max(1) {
        let start = if run == 0 {
            vec![Vec::new(); cols.cols.len()]
        } else {
            search.random_start(&mut rng)
        };
        let (parents, score, trace) = search.climb(start);
        traces.push(trace);
        if best.as_ref().is_none_or(|(_, s)| score > *s) {
            best = Some((parents, score));
        }
    }
    let (parents, score) = best.expect("at least one run");
    let dag = Dag::new(cols.names.clone(), evidence, parents, max_parents)?;
    Ok(SearchOutcome { dag, score, traces })
}

/// Total BIC of `dag` on the panel (nodes matched by station id).
pub fn bic_score(z_panel: &NormalPanel, dag: &Dag) -> Result<f64> {
    let cols = Columns::from_panel(z_panel);
    let col_of = node_columns(z_panel, dag)?;
    let mut total = 0.0;
    for i in 0..dag.len() {
        let ps: Vec<usize> = dag.parents(i).iter().map(|&p| col_of[p]).collect();
        total += local_score(&cols, col_of[i], &ps);
    }
    Ok(total)
}

pub(crate) fn node_columns(z_panel: &NormalPanel, dag: &Dag) -> Result<Vec<usize>> {
    dag.nodes()
        .iter()
        .map(|id| {
            z_panel
                .station_index(id)
                .ok_or_else(|| Error::Argument(format!("dag node {id} not in panel")))
        })
        .collect()
}

struct Search<'a> {
    cols: &'a Columns,
    evidence: &'a [bool],
    max_parents: usize,
    cache: HashMap<(usize, Vec<usize>), f64>,
}

impl Search<'_> {
    fn score(&mut self, node: usize, parents: &[usize]) -> f64 {
        let key = (node, parents.to_vec());
        if let Some(&s) = self.cache.get(&key) {
            return s;
        }
        let s = local_score(self.cols, node, parents);
        self.cache.insert(key, s);
        s
    }

    fn allowed(&self, from: usize, to: usize) -> bool {
        !(self.evidence[to] && !self.evidence[from])
    }

    fn random_start(&mut self, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
        let n = self.cols.cols.len();
        let mut parents = vec![Vec::new(); n];
        if n < 2 {
            return parents;
        }
        for _ in 0..n {
            let from = rng.random_range(0..n);
            let to = rng.random_range(0..n);
            if from == to
                || !self.allowed(from, to)
                || parents[to].len() >= self.max_parents
                || parents[to].contains(&from)
                || reaches(&parents, to, from)
            {
                continue;
            }
            parents[to].push(from);
            parents[to].sort_unstable();
            if !self.score(to, &parents[to]).is_finite() {
                parents[to].retain(|&p| p != from);
            }
        }
        parents
    }

    fn climb(&mut self, mut parents: Vec<Vec<usize>>) -> (Vec<Vec<usize>>, f64, Vec<f64>) {
        let n = parents.len();
        let mut local: Vec<f64> = (0..n).map(|i| self.score(i, &parents[i].clone())).collect();
        let mut trace = vec![local.iter().sum::<f64>()];

        loop {
            let reach = reachability(&parents);
            let mut best: Option<(Move, f64)> = None;
            // lexicographic (from, to, kind) scan; strict improvement keeps the first
            for from in 0..n {
                for to in 0..n {
                    if from == to {
                        continue;
                    }
                    for mv in self.candidate_moves(&parents, &reach, from, to) {
                        let delta = self.delta(&parents, &local, mv);
                        if delta > MIN_GAIN && best.is_none_or(|(_, d)| delta > d) {
                            best = Some((mv, delta));
                        }
                    }
                }
            }
            let Some((mv, _)) = best else { break };
            self.apply(&mut parents, &mut local, mv);
            trace.push(local.iter().sum());
        }
        let total = local.iter().sum();
        (parents, total, trace)
    }

    fn candidate_moves(
        &self,
        parents: &[Vec<usize>],
        reach: &[Vec<bool>],
        from: usize,
        to: usize,
    ) -> Vec<Move> {
        let mut out = Vec::new();
        if parents[to].contains(&from) {
            out.push(Move { from, to, kind: MoveKind::Delete });
            // reversing to `to → from` needs no other path from → … → to
            let other_path = (0..parents.len())
                .filter(|&c| c != to && parents[c].contains(&from))
                .any(|c| reach[c][to]);
            if !other_path && parents[from].len() < self.max_parents && self.allowed(to, from) {
                out.push(Move { from, to, kind: MoveKind::Reverse });
            }
        } else if !parents[from].contains(&to)
            && parents[to].len() < self.max_parents
            && self.allowed(from, to)
            && !reach[to][from]
        {
            out.push(Move { from, to, kind: MoveKind::Add });
        }
        out
    }

    fn delta(&mut self, parents: &[Vec<usize>], local: &[f64], mv: Move) -> f64 {
        let Move { from, to, kind } = mv;
        match kind {
            MoveKind::Add => {
                let ps = with(&parents[to], from);
                self.score(to, &ps) - local[to]
            }
            MoveKind::Delete => {
                let ps = without(&parents[to], from);
                self.score(to, &ps) - local[to]
            }
            MoveKind::Reverse => {
                let pt = without(&parents[to], from);
                let pf = with(&parents[from], to);
                self.score(to, &pt) + self.score(from, &pf) - local[to] - local[from]
            }
        }
    }

    fn apply(&mut self, parents: &mut [Vec<usize>], local: &mut [f64], mv: Move) {
        let Move { from, to, kind } = mv;
        match kind {
            MoveKind::Add => parents[to] = with(&parents[to], from),
            MoveKind::Delete => parents[to] = without(&parents[to], from),
            MoveKind::Reverse => {
                parents[to] = without(&parents[to], from);
                parents[from] = with(&parents[from], to);
                local[from] = self.score(from, &parents[from].clone());
            }
        }
        local[to] = self.score(to, &parents[to].clone());
    }
}

fn with(ps: &[usize], p: usize) -> Vec<usize> {
    let mut v = ps.to_vec();
    v.push(p);
    v.sort_unstable();
    v
}

fn without(ps: &[usize], p: usize) -> Vec<usize> {
    ps.iter().copied().filter(|&q| q != p).collect()
}

/// `reach[a][b]`: there is a directed path from `a` to `b` (including a == b).
fn reachability(parents: &[Vec<usize>]) -> Vec<Vec<bool>> {
    let n = parents.len();
    let mut children = vec![Vec::new(); n];
    for (c, ps) in parents.iter().enumerate() {
        for &p in ps {
            children[p].push(c);
        }
    }
    (0..n)
        .map(|s| {
            let mut seen = vec![false; n];
            let mut stack = vec![s];
            while let Some(k) = stack.pop() {
                if !seen[k] {
                    seen[k] = true;
                    stack.extend(&children[k]);
                }
            }
            seen
        })
        .collect()
}

fn reaches(parents: &[Vec<usize>], from: usize, to: usize) -> bool {
    reachability(parents)[from][to]
}
