//! Scoring: the worst-case construction and the five-step evaluation.
//!
//! The evaluator never fails. Unreadable or invalid solutions fold into a
//! report whose score is the worst-case cost `c_slack`.

use alloc::string::String;
use alloc::vec::Vec;
use alloc::{format, vec};
use core::fmt;

use crate::acfun::{base_cost, case_penalty, response_residuals, OperatingPoint};
use crate::netmodel::{BoundSet, Case, Contingency, ModelError, Network};

/// Midpoint point of one case: `v`, `p`, `q` at the middle of their ranges,
/// angles and switched shunts at zero, `Δ = 0` for contingencies, outaged
/// unit at zero.
///
/// In a contingency, buses hosting a surviving generator keep the base-case
/// voltage midpoint so the voltage part of the response law holds even when
/// emergency limits are not centred on the normal ones; other buses use the
/// emergency midpoint.
pub fn midpoint_point(network: &Network, case: Case) -> OperatingPoint {
    let bounds = BoundSet::for_case(network, case);
    let base = BoundSet::for_case(network, Case::Base);
    let mid = |lo: &[f64], hi: &[f64]| -> Vec<f64> { lo.iter().zip(hi).map(|(l, h)| 0.5 * (l + h)).collect() };
    let mut v = mid(&bounds.v_min, &bounds.v_max);
    if !case.is_base() {
        for (b, vb) in v.iter_mut().enumerate() {
            let controlled = network.generators_at(b).iter().any(|&g| case.generator_in_service(g));
            if controlled {
                *vb = 0.5 * (base.v_min[b] + base.v_max[b]);
            }
        }
    }
    OperatingPoint {
        v,
        theta: vec![0.0; network.n_buses()],
        b_cs: vec![0.0; network.n_buses()],
        p: mid(&bounds.p_min, &bounds.p_max),
        q: mid(&bounds.q_min, &bounds.q_max),
        delta: (!case.is_base()).then_some(0.0),
    }
}

/// The base point and one point per contingency of the worst-case solution.
pub fn worst_case(
    network: &Network,
    contingencies: &[Contingency],
) -> Result<(OperatingPoint, Vec<OperatingPoint>), ModelError> {
    let cases = network.cases_of(contingencies)?;
    Ok((
        midpoint_point(network, Case::Base),
        cases.into_iter().map(|c| midpoint_point(network, c)).collect(),
    ))
}

#[derive(Debug, Clone, Copy)]
pub struct EvalTolerances {
    /// Response-law residual allowed, per-unit.
    pub tau_h: f64,
    /// Bound violation allowed.
    pub bound: f64,
}

impl Default for EvalTolerances {
    fn default() -> Self {
        Self { tau_h: 1e-4, bound: 1e-6 }
    }
}

/// Why a submission fell back to `c_slack`.
#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    /// Evaluation step (1-3) that rejected the submission.
    pub step: u8,
    pub message: String,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "step {}: {}", self.step, self.message)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Breakdown {
    pub base_cost: f64,
    pub base_penalty: f64,
    /// `(label, unweighted penalty)` per contingency.
    pub contingency_penalties: Vec<(String, f64)>,
    /// `1/K` over the full contingency set.
    pub weight: f64,
}

impl Breakdown {
    pub fn total(&self) -> f64 {
        self.base_cost
            + self.base_penalty
            + self.weight * self.contingency_penalties.iter().map(|(_, c)| c).sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReport {
    pub c_slack: f64,
    pub c_star: Option<f64>,
    pub c_score: f64,
    pub failure: Option<Failure>,
    pub slack_breakdown: Breakdown,
    /// Present when the submission passed step 3.
    pub breakdown: Option<Breakdown>,
}

fn breakdown(
    network: &Network,
    contingencies: &[Contingency],
    cases: &[Case],
    base: &OperatingPoint,
    points: &[&OperatingPoint],
) -> Breakdown {
    let weight = if cases.is_empty() { 0.0 } else { 1.0 / cases.len() as f64 };
    Breakdown {
        base_cost: base_cost(network, base),
        base_penalty: case_penalty(network, base, Case::Base, 1.0),
        contingency_penalties: contingencies
            .iter()
            .zip(cases)
            .zip(points)
            .map(|((c, &case), pt)| (c.label.clone(), case_penalty(network, pt, case, 1.0)))
            .collect(),
        weight,
    }
}

/// Validity check of one case: dimensions, finiteness, bounds and, for
/// contingencies, the response law against the base point.
fn check_case(
    network: &Network,
    base: &OperatingPoint,
    point: &OperatingPoint,
    case: Case,
    label: &str,
    tol: &EvalTolerances,
) -> Result<(), String> {
    if !point.matches(network) {
        return Err(format!("{label}: wrong number of entries"));
    }
    if !point.is_finite() {
        return Err(format!("{label}: non-finite value"));
    }
    let excess = point.bound_excess(&BoundSet::for_case(network, case));
    if excess > tol.bound {
        return Err(format!("{label}: bound violated by {excess:.3e}"));
    }
    if !case.is_base() {
        for (g, r) in response_residuals(network, base, point, case).iter().enumerate() {
            let worst = r.real.abs().max(r.reactive.abs());
            if worst > tol.tau_h {
                let id = &network.generators()[g].id;
                return Err(format!("{label}: response of generator {id} off by {worst:.3e}"));
            }
        }
    }
    Ok(())
}

/// Scores a submission. `sol1` and `sol2` carry the outcome of reading the
/// two solution files; an `Err` is the reader's message. `sol2` entries are
/// matched to `contingencies` by label.
pub fn score(
    network: &Network,
    contingencies: &[Contingency],
    sol1: Result<&OperatingPoint, &str>,
    sol2: Result<&[(String, OperatingPoint)], &str>,
    tol: &EvalTolerances,
) -> Result<ScoreReport, ModelError> {
    let cases = network.cases_of(contingencies)?;
    let (wc_base, wc_cons) = worst_case(network, contingencies)?;
    let wc_refs: Vec<&OperatingPoint> = wc_cons.iter().collect();
    let slack_breakdown = breakdown(network, contingencies, &cases, &wc_base, &wc_refs);
    let c_slack = slack_breakdown.total();
    let reject = |step: u8, message: String| ScoreReport {
        c_slack,
        c_star: None,
        c_score: c_slack,
        failure: Some(Failure { step, message }),
        slack_breakdown: slack_breakdown.clone(),
        breakdown: None,
    };

    let base = match sol1 {
        Ok(p) => p,
        Err(e) => return Ok(reject(1, format!("solution1 unusable: {e}"))),
    };
    let entries = match sol2 {
        Ok(s) => s,
        Err(e) => return Ok(reject(2, format!("solution2 unusable: {e}"))),
    };
    let mut points: Vec<&OperatingPoint> = Vec::with_capacity(contingencies.len());
    for c in contingencies {
        let found: Vec<&OperatingPoint> =
            entries.iter().filter(|(l, _)| *l == c.label).map(|(_, p)| p).collect();
        match found.as_slice() {
            [p] => points.push(p),
            [] => return Ok(reject(2, format!("solution2 has no entry for {}", c.label))),
            _ => return Ok(reject(2, format!("solution2 repeats {}", c.label))),
        }
    }
    if entries.len() != contingencies.len() {
        return Ok(reject(2, String::from("solution2 has entries for unknown contingencies")));
    }

    if let Err(m) = check_case(network, base, base, Case::Base, "base", tol) {
        return Ok(reject(3, m));
    }
    for ((c, &case), pt) in contingencies.iter().zip(&cases).zip(&points) {
        if let Err(m) = check_case(network, base, pt, case, &c.label, tol) {
            return Ok(reject(3, m));
        }
    }

    let bd = breakdown(network, contingencies, &cases, base, &points);
    let c_star = bd.total();
    Ok(ScoreReport {
        c_slack,
        c_star: Some(c_star),
        c_score: c_star.min(c_slack),
        failure: None,
        slack_breakdown,
        breakdown: Some(bd),
    })
}
