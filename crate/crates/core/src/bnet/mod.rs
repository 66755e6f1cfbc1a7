//! Linear-Gaussian Bayesian network over normal scores.
//!
//! Each node is modelled as `z_i = Σ_{j ∈ pa(i)} a_ij · z_j + ε_i` with an
//! empirical innovation sample `ε_i`. Structure comes from BIC hill climbing
//! ([`learn_structure`]); coefficients from least squares ([`fit_regression`]).

mod dag;
mod score;
mod search;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use dag::Dag;
pub use search::{bic_score, learn_structure, learn_structure_traced, SearchOutcome, MIN_COMPLETE_ROWS};

use crate::data::StationMeta;
use crate::error::{Error, Result};
use crate::transform::{Marginals, NormalPanel};
use score::{local_fit, Columns};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRegression {
    pub node: String,
    /// Parent id → regression coefficient.
    pub coefficients: BTreeMap<String, f64>,
    /// Least-squares residuals on complete-case rows; resampled as innovations.
    pub residuals: Vec<f64>,
    /// `Σ ε² / N`.
    pub residual_variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BayesNet {
    pub dag: Dag,
    /// Station metadata per dag node, in node order.
    pub stations: Vec<StationMeta>,
    /// One per dag node, in node order.
    pub regressions: Vec<NodeRegression>,
    pub marginals: Marginals,
    /// Total BIC of the dag on the fitting panel.
    pub score: f64,
}

impl BayesNet {
    pub fn with_marginals(mut self, marginals: Marginals) -> Self {
        self.marginals = marginals;
        self
    }

    pub fn regression(&self, i: usize) -> &NodeRegression {
        &self.regressions[i]
    }

    pub fn parameter_count(&self) -> usize {
        parameter_count(self)
    }
}

/// Fits every node of `dag` on the panel by least squares.
pub fn fit_regression(dag: &Dag, z_panel: &NormalPanel) -> Result<BayesNet> {
    let cols = Columns::from_panel(z_panel);
    let col_of = search::node_columns(z_panel, dag)?;
    let mut regressions = Vec::with_capacity(dag.len());
    let mut score = 0.0;
    for i in 0..dag.len() {
        let parent_cols: Vec<usize> = dag.parents(i).iter().map(|&p| col_of[p]).collect();
        let fit = local_fit(&cols, col_of[i], &parent_cols)?;
        score += score::bic_term(fit.rss, fit.rows(), parent_cols.len());
        let coefficients = dag
            .parents(i)
            .iter()
            .zip(&fit.coefficients)
            .map(|(&p, &a)| (dag.nodes()[p].clone(), a))
            .collect();
        let residual_variance = fit.rss / fit.rows() as f64;
        regressions.push(NodeRegression {
            node: dag.nodes()[i].clone(),
            coefficients,
            residuals: fit.residuals,
            residual_variance,
        });
    }
    let stations = col_of.iter().map(|&c| z_panel.stations[c].clone()).collect();
    Ok(BayesNet {
        dag: dag.clone(),
        stations,
        regressions,
        marginals: Marginals::new(),
        score,
    })
}

/// `Σ_i (|pa(i)| + 1)`: one coefficient per arc plus one innovation variance per node.
pub fn parameter_count(net: &BayesNet) -> usize {
    net.dag.len() + net.dag.edge_count()
}

/// `n(n+1)/2`: one variance per variable and one correlation per pair.
pub fn full_count(n: usize) -> usize {
    n * (n + 1) / 2
}

impl BayesNet {
    /// Checks that regressions line up with the dag nodes and parents.
    pub fn validate(&self) -> Result<()> {
        if self.stations.len() != self.dag.len()
            || self.stations.iter().zip(self.dag.nodes()).any(|(s, n)| &s.id != n)
        {
            return Err(Error::Archive("station metadata does not match dag nodes".into()));
        }
        if self.regressions.len() != self.dag.len() {
            return Err(Error::Archive("regression count differs from dag size".into()));
        }
        for (i, r) in self.regressions.iter().enumerate() {
            if r.node != self.dag.nodes()[i] {
                return Err(Error::Archive(format!("regression {} out of order", r.node)));
            }
            let parents: Vec<&String> = self.dag.parents(i).iter().map(|&p| &self.dag.nodes()[p]).collect();
            if parents.len() != r.coefficients.len() || parents.iter().any(|p| !r.coefficients.contains_key(*p)) {
                return Err(Error::Archive(format!("coefficients of {} do not match its parents", r.node)));
            }
            if r.residuals.is_empty() {
                return Err(Error::Archive(format!("node {} has no residuals", r.node)));
            }
        }
        Ok(())
    }
}
