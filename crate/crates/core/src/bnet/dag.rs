use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Directed acyclic graph over named variables.
///
/// Evidence nodes (externally supplied series) may only have evidence
/// parents, so the evidence subgraph can be clamped without touching the
/// rest of the network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "DagRecord", try_from = "DagRecord")]
pub struct Dag {
    nodes: Vec<String>,
    evidence: Vec<bool>,
    /// Sorted parent indices per node.
    parents: Vec<Vec<usize>>,
    max_parents: usize,
}

#[derive(Serialize, Deserialize)]
struct DagRecord {
    nodes: Vec<String>,
    evidence: Vec<bool>,
    max_parents: usize,
    /// `[parent, child]` pairs.
    edges: Vec<[String; 2]>,
}

impl From<Dag> for DagRecord {
    fn from(d: Dag) -> Self {
        let edges = d
            .edges()
            .into_iter()
            .map(|(p, c)| [d.nodes[p].clone(), d.nodes[c].clone()])
            .collect();
        DagRecord {
            nodes: d.nodes,
            evidence: d.evidence,
            max_parents: d.max_parents,
            edges,
        }
    }
}

impl TryFrom<DagRecord> for Dag {
    type Error = Error;

    fn try_from(r: DagRecord) -> Result<Self> {
        let pos = |id: &str| {
            r.nodes
                .iter()
                .position(|n| n == id)
                .ok_or_else(|| Error::Archive(format!("edge references unknown node {id}")))
        };
        let mut parents = vec![Vec::new(); r.nodes.len()];
        for [p, c] in &r.edges {
            let (p, c) = (pos(p)?, pos(c)?);
            parents[c].push(p);
        }
        Dag::new(r.nodes, r.evidence, parents, r.max_parents)
    }
}

impl Dag {
    pub fn new(
        nodes: Vec<String>,
        evidence: Vec<bool>,
        mut parents: Vec<Vec<usize>>,
        max_parents: usize,
    ) -> Result<Self> {
        let n = nodes.len();
        if evidence.len() != n || parents.len() != n {
            return Err(Error::Argument("dag component lengths differ".into()));
        }
        for (i, ps) in parents.iter_mut().enumerate() {
            ps.sort_unstable();
            ps.dedup();
            if ps.len() > max_parents {
                return Err(Error::Argument(format!(
                    "node {} has {} parents, limit {max_parents}",
                    nodes[i],
                    ps.len()
                )));
            }
            for &p in ps.iter() {
                if p >= n || p == i {
                    return Err(Error::Argument(format!("invalid parent index {p} for {}", nodes[i])));
                }
                if evidence[i] && !evidence[p] {
                    return Err(Error::Argument(format!(
                        "evidence node {} cannot have non-evidence parent {}",
                        nodes[i], nodes[p]
                    )));
                }
            }
        }
        let dag = Dag {
            nodes,
            evidence,
            parents,
            max_parents,
        };
        if dag.topological_order().is_none() {
            return Err(Error::Argument("graph has a cycle".into()));
        }
        Ok(dag)
    }

    pub fn empty(nodes: Vec<String>, evidence: Vec<bool>, max_parents: usize) -> Self {
        let n = nodes.len();
        Dag {
            nodes,
            evidence,
            parents: vec![Vec::new(); n],
            max_parents,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n == id)
    }

    pub fn is_evidence(&self, i: usize) -> bool {
        self.evidence[i]
    }

    pub fn evidence_flags(&self) -> &[bool] {
        &self.evidence
    }

    pub fn parents(&self, i: usize) -> &[usize] {
        &self.parents[i]
    }

    pub fn max_parents(&self) -> usize {
        self.max_parents
    }

    /// `(parent, child)` pairs ordered by child, then parent.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.parents
            .iter()
            .enumerate()
            .flat_map(|(c, ps)| ps.iter().map(move |&p| (p, c)))
            .collect()
    }

    pub fn edge_count(&self) -> usize {
        self.parents.iter().map(Vec::len).sum()
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.parents[to].binary_search(&from).is_ok()
    }

    /// Undirected edge set as sorted `(min, max)` pairs.
    pub fn skeleton(&self) -> Vec<(usize, usize)> {
        let mut s: Vec<_> = self
            .edges()
            .into_iter()
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        s.sort_unstable();
        s
    }

    pub fn children(&self) -> Vec<Vec<usize>> {
        let mut ch = vec![Vec::new(); self.len()];
        for (p, c) in self.edges() {
            ch[p].push(c);
        }
        ch
    }

    /// Kahn's algorithm; ties resolved by lowest index. `None` on a cycle.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let n = self.len();
        let children = self.children();
        let mut indeg: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut ready: std::collections::BTreeSet<usize> =
            (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(i) = ready.pop_first() {
            order.push(i);
            for &c in &children[i] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    ready.insert(c);
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    /// Nodes reachable from `i` by directed paths (excluding `i`).
    pub fn descendants(&self, i: usize) -> Vec<bool> {
        let children = self.children();
        let mut seen = vec![false; self.len()];
        let mut stack = children[i].clone();
        while let Some(k) = stack.pop() {
            if !seen[k] {
                seen[k] = true;
                stack.extend(&children[k]);
            }
        }
        seen
    }
}
