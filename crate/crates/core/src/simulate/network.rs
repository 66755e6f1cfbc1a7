use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::ScenarioSet;
use crate::bnet::BayesNet;
use crate::data::{Resolution, Timestamp};
use crate::error::{Error, Result};
use crate::transform::{inverse, to_normal, NormalPanel};

/// Independent stream `stream` of the generator seeded with `seed`.
pub fn scenario_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Ancestral sampling of the network over `horizon`, one normal panel per
/// scenario. Evidence nodes are clamped to the normal scores of `evidence`
/// when it is given and sampled like any other node otherwise.
pub fn sample_network(
    net: &BayesNet,
    n_scenarios: usize,
    horizon: &[Timestamp],
    evidence: Option<&ScenarioSet>,
    seed: u64,
) -> Result<Vec<NormalPanel>> {
    if horizon.is_empty() {
        return Err(Error::Argument("empty horizon".into()));
    }
    if n_scenarios == 0 {
        return Err(Error::Argument("n_scenarios must be at least 1".into()));
    }
    let dag = &net.dag;
    let n = dag.len();
    let order = dag
        .topological_order()
        .ok_or_else(|| Error::Archive("network graph has a cycle".into()))?;
    let coefs: Vec<Vec<(usize, f64)>> = (0..n)
        .map(|i| {
            let r = net.regression(i);
            dag.parents(i)
                .iter()
                .map(|&p| (p, r.coefficients[&dag.nodes()[p]]))
                .collect()
        })
        .collect();

    // (node, evidence column, marginal) for clamped nodes; time lookup per horizon month
    let clamp = match evidence {
        Some(ev) => Some(evidence_plan(net, n_scenarios, horizon, ev)?),
        None => None,
    };

    (0..n_scenarios)
        .into_par_iter()
        .map(|s| {
            let mut rng = scenario_rng(seed, s as u64);
            let mut z = vec![0.0; horizon.len() * n];
            for t in 0..horizon.len() {
                let row = &mut z[t * n..(t + 1) * n];
                for &i in &order {
                    if let (Some(plan), true) = (&clamp, dag.is_evidence(i)) {
                        let ev = evidence.expect("plan implies evidence");
                        let col = plan.columns[i].expect("evidence column checked");
                        let x = ev.get(s, plan.times[t], col);
                        row[i] = to_normal(&net.marginals[&dag.nodes()[i]], x);
                        continue;
                    }
                    let res = &net.regression(i).residuals;
                    let eps = res[rng.random_range(0..res.len())];
                    row[i] = coefs[i].iter().map(|&(p, a)| a * row[p]).sum::<f64>() + eps;
                }
            }
            NormalPanel::new(net.stations.clone(), horizon.to_vec(), Resolution::Monthly, z)
        })
        .collect()
}

struct EvidencePlan {
    columns: Vec<Option<usize>>,
    times: Vec<usize>,
}

fn evidence_plan(net: &BayesNet, n_scenarios: usize, horizon: &[Timestamp], ev: &ScenarioSet) -> Result<EvidencePlan> {
    if ev.scenario_count < n_scenarios {
        return Err(Error::EvidenceCoverage(format!(
            "{n_scenarios} scenarios (evidence has {})",
            ev.scenario_count
        )));
    }
    let dag = &net.dag;
    let mut columns = vec![None; dag.len()];
    for i in (0..dag.len()).filter(|&i| dag.is_evidence(i)) {
        let id = &dag.nodes()[i];
        let col = ev
            .station_index(id)
            .ok_or_else(|| Error::EvidenceCoverage(format!("station {id}")))?;
        if !net.marginals.contains_key(id) {
            return Err(Error::Config(format!("no marginal model for station {id}")));
        }
        columns[i] = Some(col);
    }
    let times = horizon
        .iter()
        .map(|h| {
            ev.index
                .binary_search(h)
                .map_err(|_| Error::EvidenceCoverage(format!("month {}", crate::data::format_month(h))))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvidencePlan { columns, times })
}

/// Maps sampled normal scores back to original units. Evidence stations
/// present in `evidence` are copied from it unchanged.
pub fn to_original(z_samples: &[NormalPanel], net: &BayesNet, evidence: Option<&ScenarioSet>) -> Result<ScenarioSet> {
    let first = z_samples
        .first()
        .ok_or_else(|| Error::Argument("no scenarios to transform".into()))?;
    let panels = z_samples
        .par_iter()
        .map(|z| inverse(z, &net.marginals))
        .collect::<Result<Vec<_>>>()?;
    let mut out = ScenarioSet::zeros(
        first.stations.clone(),
        z_samples.len(),
        first.index.clone(),
        Resolution::Monthly,
        0,
    );
    let copy: Vec<(usize, usize)> = match evidence {
        Some(ev) => out
            .stations
            .iter()
            .enumerate()
            .filter(|(_, st)| st.is_evidence)
            .filter_map(|(j, st)| ev.station_index(&st.id).map(|c| (j, c)))
            .collect(),
        None => Vec::new(),
    };
    let times: Vec<usize> = match evidence {
        Some(ev) if !copy.is_empty() => out
            .index
            .iter()
            .map(|h| {
                ev.index
                    .binary_search(h)
                    .map_err(|_| Error::EvidenceCoverage(format!("month {}", crate::data::format_month(h))))
            })
            .collect::<Result<_>>()?,
        _ => Vec::new(),
    };
    for (s, p) in panels.iter().enumerate() {
        for t in 0..p.n_times() {
            for j in 0..p.n_stations() {
                out.set(s, t, j, p.get(t, j));
            }
        }
        if let Some(ev) = evidence {
            for &(j, c) in &copy {
                for t in 0..out.n_times() {
                    out.set(s, t, j, ev.get(s, times[t], c));
                }
            }
        }
    }
    Ok(out)
}
