//! Turns an LP dispatch into a full AC base-case point.
//!
//! A distributed-slack power flow holds the dispatch up to an
//! `alpha`-weighted share of the losses; switched shunts are then pushed to
//! pull bus voltages into range, and the result is clamped to the base
//! bounds. The midpoint point is returned instead whenever it has the
//! lower penalty.

use alloc::vec::Vec;

use crate::acfun::{case_penalty, slacks_from_point, OperatingPoint, SlackBundle};
use crate::evaluator::midpoint_point;
use crate::netmodel::{BoundSet, Case, Network};
use crate::pfsolve::{newton_pf, PfSpec, SlackMode};
use crate::num::sqrt;

#[derive(Debug, Clone, Default)]
pub struct RecoveryConfig {
    /// Generator voltage setpoints per bus; midpoint of the base range when absent.
    pub v_target: Option<Vec<f64>>,
    pub pf_tolerance: Option<f64>,
    pub pf_max_iter: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct Recovered {
    pub point: OperatingPoint,
    pub slacks: SlackBundle,
    /// Base penalty of `point`.
    pub penalty: f64,
    /// Euclidean distance of the real-power dispatch from the target.
    pub distance: f64,
    pub converged: bool,
    /// True when the midpoint point was returned.
    pub fallback: bool,
}

impl Recovered {
    /// Penalty plus distance, the quantity the heuristic tries to keep small.
    pub fn objective(&self) -> f64 {
        self.penalty + self.distance
    }
}

fn finish(network: &Network, point: OperatingPoint, p_star: &[f64], converged: bool, fallback: bool) -> Recovered {
    let slacks = slacks_from_point(network, &point, Case::Base);
    let penalty = case_penalty(network, &point, Case::Base, 1.0);
    let distance = sqrt(point.p.iter().zip(p_star).map(|(a, b)| (a - b) * (a - b)).sum());
    Recovered { point, slacks, penalty, distance, converged, fallback }
}

/// Recovers an AC base point near `p_star`. Never fails.
pub fn recover_base(network: &Network, p_star: &[f64], config: &RecoveryConfig) -> Recovered {
    let bounds = BoundSet::for_case(network, Case::Base);
    let n = network.n_buses();
    let mut spec = PfSpec::new(network, Case::Base, p_star.to_vec(), SlackMode::Distributed);
    spec.v_setpoint = config
        .v_target
        .clone()
        .unwrap_or_else(|| (0..n).map(|b| 0.5 * (bounds.v_min[b] + bounds.v_max[b])).collect());
    spec.b_cs = (0..n).map(|b| 0.0f64.clamp(bounds.b_cs_min[b], bounds.b_cs_max[b])).collect();
    spec.shortfall_at_reference = true;
    if let Some(t) = config.pf_tolerance {
        spec.tolerance = t;
    }
    if let Some(m) = config.pf_max_iter {
        spec.max_iter = m;
    }

    let mut result = newton_pf(network, &spec);
    if result.converged {
        // switched shunts toward whichever limit moves an out-of-range voltage back
        let mut changed = false;
        for b in 0..n {
            let v = result.point.v[b];
            let target = if v < bounds.v_min[b] {
                bounds.b_cs_max[b]
            } else if v > bounds.v_max[b] {
                bounds.b_cs_min[b]
            } else {
                continue;
            };
            if target != spec.b_cs[b] {
                spec.b_cs[b] = target;
                changed = true;
            }
        }
        if changed {
            spec.warm_start = Some(result.point.clone());
            let again = newton_pf(network, &spec);
            if again.converged {
                result = again;
            }
        }
    }

    let mut point = result.point.clone();
    point.delta = None;
    if point.is_finite() {
        // one local pass cancelling each bus's reactive residual with its shunt
        let res = crate::acfun::balance_residuals(network, &point, Case::Base);
        for b in 0..n {
            let v2 = point.v[b] * point.v[b];
            if v2 > 0.0 && res.q[b] != 0.0 {
                point.b_cs[b] = (point.b_cs[b] - res.q[b] / v2).clamp(bounds.b_cs_min[b], bounds.b_cs_max[b]);
            }
        }
        point.clamp_to(&bounds);
    }

    let fallback = finish(network, midpoint_point(network, Case::Base), p_star, false, true);
    if !point.is_finite() {
        return fallback;
    }
    let candidate = finish(network, point, p_star, result.converged, false);
    if candidate.penalty > fallback.penalty {
        log::debug!("recovery penalty {:.4} exceeds midpoint {:.4}; using midpoint", candidate.penalty, fallback.penalty);
        fallback
    } else {
        candidate
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::fixtures::*;
    use crate::netmodel::{Network, PenaltySchedule};
    use alloc::vec;

    fn lossy() -> Network {
        Network::new(
            100.0,
            vec![bus("1", 0.0, 0.0), bus("2", 0.5, 0.1)],
            vec![generator("G1", "1", 0.0, 1.0), generator("G2", "2", 0.0, 1.0)],
            vec![line("L1", "1", "2", 0.02, 0.1)],
            PenaltySchedule::default(),
        )
        .edited(|n| {
            n.generators[0].alpha = 3.0;
            n.generators[1].alpha = 1.0;
        })
    }

    #[test]
    fn balanced_lossless_dispatch_is_a_fixed_point() {
        let net = Network::new(
            100.0,
            vec![bus("1", 0.4, 0.0)],
            vec![generator("G1", "1", 0.0, 1.0)],
            vec![],
            PenaltySchedule::default(),
        );
        let r = recover_base(&net, &[0.4], &RecoveryConfig::default());
        assert!(r.converged && !r.fallback);
        assert!((r.point.p[0] - 0.4).abs() < 1e-9);
        assert!(r.penalty < 1e-6);
    }

    #[test]
    fn losses_are_shared_by_participation() {
        let net = lossy();
        let p_star = [0.25, 0.25];
        let r = recover_base(&net, &p_star, &RecoveryConfig::default());
        assert!(r.converged);
        let d0 = r.point.p[0] - p_star[0];
        let d1 = r.point.p[1] - p_star[1];
        assert!(d0 > 0.0);
        assert!((d0 - 3.0 * d1).abs() < 1e-9);
        let flows = crate::acfun::branch_flows(&net, &r.point.v, &r.point.theta, Case::Base);
        let f = flows[0].unwrap();
        assert!((d0 + d1 - (f.p_from + f.p_to)).abs() < 1e-7);
    }

    #[test]
    fn zero_dispatch_is_tolerated() {
        let net = lossy().edited(|n| {
            n.generators[0].alpha = 0.0;
            n.generators[1].alpha = 0.0;
        });
        let r = recover_base(&net, &[0.0, 0.0], &RecoveryConfig::default());
        let bounds = BoundSet::for_case(&net, Case::Base);
        assert!(r.point.bound_excess(&bounds) == 0.0);
        assert!(r.penalty > 0.0);
    }

    #[test]
    fn never_worse_than_midpoint() {
        let net = lossy();
        let mid = case_penalty(&net, &midpoint_point(&net, Case::Base), Case::Base, 1.0);
        for p in [[0.0, 0.0], [1.0, 1.0], [0.3, 0.2], [0.0, 1.0]] {
            let r = recover_base(&net, &p, &RecoveryConfig::default());
            assert!(r.penalty <= mid);
            assert!(r.point.bound_excess(&BoundSet::for_case(&net, Case::Base)) == 0.0);
        }
    }

    #[test]
    fn low_voltage_bus_gets_capacitive_support() {
        let net = lossy().edited(|n| {
            n.generators.truncate(1);
            n.buses[1].q_load = 0.4;
            n.buses[1].b_cs_max = 0.5;
        });
        let r = recover_base(&net, &[0.5], &RecoveryConfig::default());
        assert!(r.converged);
        assert!(r.point.b_cs[1] > 0.0);
    }
}
