//! Contingency screening: ranks candidate outages and keeps the top `k_hat`.

use alloc::vec::Vec;

use crate::acfun::{branch_flows, OperatingPoint};
use crate::netmodel::{Case, Contingency, ModelError, Network};
use crate::num::hypot;

#[derive(Debug, Clone, PartialEq)]
pub struct RankedContingency {
    pub contingency: Contingency,
    pub rank: f64,
}

fn select(
    contingencies: &[Contingency],
    ranks: Vec<f64>,
    k_hat: usize,
) -> Vec<RankedContingency> {
    let k = contingencies.len();
    if k_hat > k {
        log::warn!("requested {k_hat} contingencies but only {k} exist; keeping all");
    }
    let mut order: Vec<usize> = (0..k).collect();
    // stable: equal ranks keep file order
    order.sort_by(|&a, &b| ranks[b].total_cmp(&ranks[a]));
    order
        .into_iter()
        .take(k_hat.min(k))
        .map(|i| RankedContingency { contingency: contingencies[i].clone(), rank: ranks[i] })
        .collect()
}

/// Generator outages rank by the unit's `p_max`, branch outages by the
/// normal rating.
pub fn rank_by_rating(
    network: &Network,
    contingencies: &[Contingency],
    k_hat: usize,
) -> Result<Vec<RankedContingency>, ModelError> {
    let cases = network.cases_of(contingencies)?;
    let ranks = cases
        .iter()
        .map(|&case| match case {
            Case::GeneratorOut(g) => network.generators()[g].p_max.max(0.0),
            Case::BranchOut(l) => network.branches()[l].rating_normal.max(0.0),
            Case::Base => 0.0,
        })
        .collect();
    Ok(select(contingencies, ranks, k_hat))
}

/// Ranks by apparent power at a prior base-case point: the unit's output for
/// generator outages, the mean of both end flows for branch outages.
pub fn rank_by_realtime(
    network: &Network,
    contingencies: &[Contingency],
    x_tilde: &OperatingPoint,
    k_hat: usize,
) -> Result<Vec<RankedContingency>, ModelError> {
    let cases = network.cases_of(contingencies)?;
    let flows = branch_flows(network, &x_tilde.v, &x_tilde.theta, Case::Base);
    let ranks = cases
        .iter()
        .map(|&case| match case {
            Case::GeneratorOut(g) => hypot(x_tilde.p[g], x_tilde.q[g]),
            Case::BranchOut(l) => {
                let f = flows[l].expect("base case keeps every branch");
                0.5 * hypot(f.p_from, f.q_from) + 0.5 * hypot(f.p_to, f.q_to)
            }
            Case::Base => 0.0,
        })
        .collect();
    Ok(select(contingencies, ranks, k_hat))
}
