//! Corrective stage: one post-contingency point per contingency, consistent
//! with a fixed base point through the generator response law.
//!
//! Surviving generator buses hold the base voltage and real power follows
//! `clip(p0 + α·Δ)` with `Δ` solved inside a distributed-slack power flow.
//! When the flow fails, runs out of time or its point breaks the response
//! law, the midpoint construction is used instead.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::acfun::{case_penalty, response_residuals, slacks_from_point, OperatingPoint, SlackBundle};
use crate::evaluator::midpoint_point;
use crate::exec::{Budget, Clock, Executor};
use crate::netmodel::{BoundSet, Case, Contingency, ModelError, Network};
use crate::pfsolve::{newton_pf, PfSpec, SlackMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    PfConverged,
    FallbackMidpoint,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::PfConverged => "pf-converged",
            Provenance::FallbackMidpoint => "fallback-midpoint",
        })
    }
}

#[derive(Debug, Clone)]
pub struct ContingencySolution {
    pub label: String,
    pub point: OperatingPoint,
    pub slacks: SlackBundle,
    /// Unweighted penalty of this case.
    pub cost: f64,
    pub provenance: Provenance,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, Copy)]
pub struct CorrectiveConfig {
    pub pf_tolerance: f64,
    pub pf_max_iter: usize,
}

impl Default for CorrectiveConfig {
    fn default() -> Self {
        Self { pf_tolerance: PfSpec::DEFAULT_TOLERANCE, pf_max_iter: PfSpec::DEFAULT_MAX_ITER }
    }
}

fn satisfies_response(network: &Network, base: &OperatingPoint, point: &OperatingPoint, case: Case) -> bool {
    response_residuals(network, base, point, case)
        .iter()
        .all(|r| r.real == 0.0 && r.reactive == 0.0)
}

/// Midpoint point of `case`, repaired against `base` when needed: `Δ = 0`,
/// surviving units at their clipped base output and generator buses at the
/// base voltage.
pub fn fallback_point(network: &Network, base: &OperatingPoint, case: Case) -> OperatingPoint {
    let mid = midpoint_point(network, case);
    if satisfies_response(network, base, &mid, case) {
        return mid;
    }
    let bounds = BoundSet::for_case(network, case);
    let mut pt = mid;
    pt.delta = Some(0.0);
    for (g, gen) in network.generators().iter().enumerate() {
        if case.generator_in_service(g) {
            pt.p[g] = base.p[g].max(gen.p_min).min(gen.p_max);
            let b = network.generator_bus(g);
            pt.v[b] = base.v[b].max(bounds.v_min[b]).min(bounds.v_max[b]);
        }
    }
    pt
}

fn package(
    network: &Network,
    contingency: &Contingency,
    case: Case,
    point: OperatingPoint,
    provenance: Provenance,
    wall_ms: u64,
) -> ContingencySolution {
    ContingencySolution {
        label: contingency.label.clone(),
        slacks: slacks_from_point(network, &point, case),
        cost: case_penalty(network, &point, case, 1.0),
        point,
        provenance,
        wall_ms,
    }
}

/// Corrective point for one contingency. Falls back when `budget` is
/// already spent, the flow does not converge, or the budget ran out while
/// solving.
pub fn solve_contingency(
    network: &Network,
    base: &OperatingPoint,
    contingency: &Contingency,
    budget: &Budget<'_>,
    config: &CorrectiveConfig,
) -> Result<ContingencySolution, ModelError> {
    let case = network.case_of(contingency)?;
    let fallback = |why: &str| {
        log::debug!("{}: fallback ({why})", contingency.label);
        let pt = fallback_point(network, base, case);
        package(network, contingency, case, pt, Provenance::FallbackMidpoint, budget.elapsed_ms())
    };
    if budget.expired() {
        return Ok(fallback("no time"));
    }

    let bounds = BoundSet::for_case(network, case);
    let mut spec = PfSpec::new(network, case, base.p.clone(), SlackMode::Distributed);
    spec.v_setpoint = base.v.clone();
    spec.b_cs = base.b_cs.clone();
    spec.tolerance = config.pf_tolerance;
    spec.max_iter = config.pf_max_iter;
    let mut warm = base.clone();
    warm.delta = Some(0.0);
    spec.warm_start = Some(warm);
    spec.shortfall_at_reference = true;

    let result = newton_pf(network, &spec);
    if !result.converged {
        return Ok(fallback("power flow did not converge"));
    }
    if budget.expired() {
        return Ok(fallback("over budget"));
    }
    let mut point = result.point;
    point.clamp_to(&bounds);
    if !satisfies_response(network, base, &point, case) {
        return Ok(fallback("response law violated"));
    }
    Ok(package(network, contingency, case, point, Provenance::PfConverged, budget.elapsed_ms()))
}

/// Solves every contingency through `executor`, results in input order.
/// Each job gets `per_contingency_ms`; jobs starting after `total` has
/// expired go straight to the fallback.
pub fn run_all<E: Executor>(
    network: &Network,
    base: &OperatingPoint,
    contingencies: &[Contingency],
    executor: &E,
    clock: &dyn Clock,
    total: &Budget<'_>,
    per_contingency_ms: Option<u64>,
    config: &CorrectiveConfig,
) -> Result<Vec<ContingencySolution>, ModelError> {
    network.cases_of(contingencies)?;
    let total = *total;
    let expired_at_start = total.expired();
    let results = executor.map_indexed(contingencies.len(), |k| {
        let limit = if expired_at_start || total.expired() { Some(0) } else { per_contingency_ms };
        let budget = Budget::start(clock, limit);
        solve_contingency(network, base, &contingencies[k], &budget, config)
    });
    results.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::{NoClock, Sequential};
    use crate::netmodel::fixtures::*;
    use crate::netmodel::{Network, PenaltySchedule};
    use crate::recovery::{recover_base, RecoveryConfig};
    use alloc::vec;

    fn three_bus() -> Network {
        Network::new(
            100.0,
            vec![bus("1", 0.0, 0.0), bus("2", 0.2, 0.05), bus("3", 0.6, 0.1)],
            vec![
                generator("G1", "1", 0.0, 1.5),
                generator("G2", "2", 0.0, 1.0),
                generator("G3", "3", 0.0, 0.5),
            ],
            vec![
                line("L12", "1", "2", 0.01, 0.1),
                line("L23", "2", "3", 0.01, 0.1),
                line("L13", "1", "3", 0.01, 0.1),
            ],
            PenaltySchedule::default(),
        )
        .edited(|n| {
            for g in &mut n.generators {
                g.alpha = 1.0;
            }
        })
    }

    fn base(net: &Network, p: &[f64]) -> OperatingPoint {
        let r = recover_base(net, p, &RecoveryConfig::default());
        assert!(r.converged);
        r.point
    }

    fn solve_one(net: &Network, base: &OperatingPoint, c: &Contingency) -> ContingencySolution {
        let clock = NoClock;
        solve_contingency(net, base, c, &Budget::unlimited(&clock), &CorrectiveConfig::default()).unwrap()
    }

    #[test]
    fn idle_unit_outage_needs_no_correction() {
        let net = three_bus().edited(|n| n.generators[2].alpha = 0.0);
        let b = base(&net, &[0.4, 0.4, 0.0]);
        assert_eq!(b.p[2], 0.0);
        let sol = solve_one(&net, &b, &Contingency::generator("C3", "G3"));
        assert_eq!(sol.provenance, Provenance::PfConverged);
        // only the loss change from the unit's reactive output remains
        assert!(sol.point.delta.unwrap().abs() < 1e-3);
        assert!(sol.cost < 1e-6);
    }

    #[test]
    fn lost_output_is_replaced_by_survivors() {
        let net = three_bus();
        let b = base(&net, &[0.3, 0.1, 0.4]);
        let lost = b.p[2];
        let sol = solve_one(&net, &b, &Contingency::generator("C3", "G3"));
        assert_eq!(sol.provenance, Provenance::PfConverged);
        let pickup = (sol.point.p[0] - b.p[0]) + (sol.point.p[1] - b.p[1]);
        let loss = |pt: &OperatingPoint, case| {
            crate::acfun::branch_flows(&net, &pt.v, &pt.theta, case)
                .iter()
                .flatten()
                .map(|f| f.p_from + f.p_to)
                .sum::<f64>()
        };
        let expected = lost + loss(&sol.point, Case::GeneratorOut(2)) - loss(&b, Case::Base);
        assert!((pickup - expected).abs() < 1e-7, "{pickup} vs {expected}");
        assert!(satisfies_response(&net, &b, &sol.point, Case::GeneratorOut(2)));
    }

    #[test]
    fn islanded_load_is_paid_as_slack() {
        let net = two_bus(0.3);
        let b = base(&net, &[0.3]);
        let sol = solve_one(&net, &b, &Contingency::branch("B", "L1"));
        assert_eq!(sol.provenance, Provenance::PfConverged);
        let expected = PenaltySchedule::block_cost(&net.penalties().balance, 0.3);
        assert!((sol.cost - expected).abs() < 1e-9);
    }

    #[test]
    fn zero_budget_falls_back_everywhere() {
        let net = three_bus();
        let b = base(&net, &[0.3, 0.1, 0.4]);
        let cons = vec![Contingency::generator("C1", "G1"), Contingency::branch("B", "L23")];
        let clock = NoClock;
        let out = run_all(&net, &b, &cons, &Sequential, &clock, &Budget::start(&clock, Some(0)), None, &CorrectiveConfig::default()).unwrap();
        assert_eq!(out.len(), 2);
        for (sol, c) in out.iter().zip(&cons) {
            assert_eq!(sol.provenance, Provenance::FallbackMidpoint);
            let case = net.case_of(c).unwrap();
            assert!(satisfies_response(&net, &b, &sol.point, case));
            assert_eq!(sol.point.bound_excess(&BoundSet::for_case(&net, case)), 0.0);
        }
    }

    #[test]
    fn empty_set_is_fine() {
        let net = three_bus();
        let b = base(&net, &[0.3, 0.1, 0.4]);
        let clock = NoClock;
        let out = run_all(&net, &b, &[], &Sequential, &clock, &Budget::unlimited(&clock), None, &CorrectiveConfig::default()).unwrap();
        assert!(out.is_empty());
    }
}
