//! AC model functions: power-balance residuals, branch overloads, the
//! generator response law, generation cost, and block penalty costs.

use alloc::vec;
use alloc::vec::Vec;

use crate::netmodel::{BoundSet, Branch, Case, Network, PenaltyBlock, PenaltySchedule};
use crate::num::{cos, hypot, sin};

/// Equality tolerance on voltage magnitudes when deciding which branch of the
/// PV/PQ complementarity applies.
pub const VOLTAGE_TOL: f64 = 1e-6;

/// Primary variables of one case.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatingPoint {
    pub v: Vec<f64>,
    /// Radians.
    pub theta: Vec<f64>,
    pub b_cs: Vec<f64>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    /// Real-power adjustment; `Some` only for contingency points.
    pub delta: Option<f64>,
}

impl OperatingPoint {
    /// `v = 1`, everything else zero.
    pub fn flat(network: &Network) -> Self {
        let nb = network.n_buses();
        let ng = network.n_generators();
        Self {
            v: vec![1.0; nb],
            theta: vec![0.0; nb],
            b_cs: vec![0.0; nb],
            p: vec![0.0; ng],
            q: vec![0.0; ng],
            delta: None,
        }
    }

    pub fn matches(&self, network: &Network) -> bool {
        let nb = network.n_buses();
        let ng = network.n_generators();
        self.v.len() == nb
            && self.theta.len() == nb
            && self.b_cs.len() == nb
            && self.p.len() == ng
            && self.q.len() == ng
    }

    pub fn is_finite(&self) -> bool {
        [&self.v, &self.theta, &self.b_cs, &self.p, &self.q]
            .iter()
            .all(|xs| xs.iter().all(|x| x.is_finite()))
            && self.delta.is_none_or(f64::is_finite)
    }

    /// Worst violation of `bounds` (zero when inside).
    pub fn bound_excess(&self, bounds: &BoundSet) -> f64 {
        fn excess(x: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
            x.iter()
                .zip(lo.iter().zip(hi))
                .map(|(x, (l, h))| (l - x).max(x - h).max(0.0))
                .fold(0.0, f64::max)
        }
        excess(&self.v, &bounds.v_min, &bounds.v_max)
            .max(excess(&self.b_cs, &bounds.b_cs_min, &bounds.b_cs_max))
            .max(excess(&self.p, &bounds.p_min, &bounds.p_max))
            .max(excess(&self.q, &bounds.q_min, &bounds.q_max))
    }

    /// Projects every bounded entry onto `bounds`.
    pub fn clamp_to(&mut self, bounds: &BoundSet) {
        fn clamp(x: &mut [f64], lo: &[f64], hi: &[f64]) {
            for (x, (l, h)) in x.iter_mut().zip(lo.iter().zip(hi)) {
                *x = x.max(*l).min(*h);
            }
        }
        clamp(&mut self.v, &bounds.v_min, &bounds.v_max);
        clamp(&mut self.b_cs, &bounds.b_cs_min, &bounds.b_cs_max);
        clamp(&mut self.p, &bounds.p_min, &bounds.p_max);
        clamp(&mut self.q, &bounds.q_min, &bounds.q_max);
    }
}

/// Soft-constraint violations of one case. All entries are nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct SlackBundle {
    pub p_plus: Vec<f64>,
    pub p_minus: Vec<f64>,
    pub q_plus: Vec<f64>,
    pub q_minus: Vec<f64>,
    /// Per branch; zero for the outaged branch.
    pub rating: Vec<f64>,
}

impl SlackBundle {
    pub fn zeros(network: &Network) -> Self {
        let nb = network.n_buses();
        Self {
            p_plus: vec![0.0; nb],
            p_minus: vec![0.0; nb],
            q_plus: vec![0.0; nb],
            q_minus: vec![0.0; nb],
            rating: vec![0.0; network.n_branches()],
        }
    }
}

/// Per-bus mismatch; positive means surplus injection.
#[derive(Debug, Clone, PartialEq)]
pub struct Residuals {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

impl Residuals {
    pub fn max_abs(&self) -> f64 {
        self.p.iter().chain(&self.q).fold(0.0, |m, r| m.max(r.abs()))
    }
}

/// Complex power leaving each end of a branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchFlow {
    pub p_from: f64,
    pub q_from: f64,
    pub p_to: f64,
    pub q_to: f64,
}

/// Partial derivatives of one flow quantity with respect to
/// `[theta_from, theta_to, v_from, v_to]`.
pub type FlowGradient = [f64; 4];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowPartials {
    pub p_from: FlowGradient,
    pub q_from: FlowGradient,
    pub p_to: FlowGradient,
    pub q_to: FlowGradient,
}

fn series_admittance(br: &Branch) -> (f64, f64) {
    let d = br.r * br.r + br.x * br.x;
    (br.r / d, -br.x / d)
}

/// π-model flows with an ideal transformer (ratio `tap`, shift `phase`) on
/// the from side.
pub fn branch_flow(br: &Branch, v_from: f64, v_to: f64, th_from: f64, th_to: f64) -> BranchFlow {
    let (g, b) = series_admittance(br);
    let bc = br.b_ch / 2.0;
    let t = br.tap;
    let c = v_from * v_to / t;
    let a = th_from - th_to - br.phase;
    let (sa, ca) = (sin(a), cos(a));
    BranchFlow {
        p_from: g / (t * t) * v_from * v_from - c * (g * ca + b * sa),
        q_from: -(b + bc) / (t * t) * v_from * v_from - c * (g * sa - b * ca),
        p_to: g * v_to * v_to - c * (g * ca - b * sa),
        q_to: -(b + bc) * v_to * v_to - c * (-g * sa - b * ca),
    }
}

/// Analytic derivatives of [`branch_flow`].
pub fn branch_flow_partials(
    br: &Branch,
    v_from: f64,
    v_to: f64,
    th_from: f64,
    th_to: f64,
) -> FlowPartials {
    let (g, b) = series_admittance(br);
    let bc = br.b_ch / 2.0;
    let t = br.tap;
    let c = v_from * v_to / t;
    let a = th_from - th_to - br.phase;
    let (sa, ca) = (sin(a), cos(a));

    // from end: a = θf − θt − φ
    let kf_p = g * ca + b * sa;
    let kf_q = g * sa - b * ca;
    let dpf_da = c * (g * sa - b * ca);
    let dqf_da = -c * (g * ca + b * sa);
    // to end: a' = −a, so sin a' = −sa, cos a' = ca
    let kt_p = g * ca - b * sa;
    let kt_q = -g * sa - b * ca;
    let dpt_da = c * (-g * sa - b * ca);
    let dqt_da = -c * (g * ca - b * sa);

    FlowPartials {
        p_from: [
            dpf_da,
            -dpf_da,
            2.0 * g * v_from / (t * t) - v_to / t * kf_p,
            -v_from / t * kf_p,
        ],
        q_from: [
            dqf_da,
            -dqf_da,
            -2.0 * (b + bc) * v_from / (t * t) - v_to / t * kf_q,
            -v_from / t * kf_q,
        ],
        p_to: [-dpt_da, dpt_da, -v_to / t * kt_p, 2.0 * g * v_to - v_from / t * kt_p],
        q_to: [-dqt_da, dqt_da, -v_to / t * kt_q, -2.0 * (b + bc) * v_to - v_from / t * kt_q],
    }
}

/// Flows of every branch at `point`; `None` for the outaged branch.
pub fn branch_flows(network: &Network, v: &[f64], theta: &[f64], case: Case) -> Vec<Option<BranchFlow>> {
    network
        .branches()
        .iter()
        .enumerate()
        .map(|(l, br)| {
            case.branch_in_service(l).then(|| {
                let (f, t) = network.branch_ends(l);
                branch_flow(br, v[f], v[t], theta[f], theta[t])
            })
        })
        .collect()
}

/// `Δp_i = Σ p_g − p_load − g_sh·v² − Σ P_out`, `Δq_i = Σ q_g − q_load +
/// (b_sh + b_cs)·v² − Σ Q_out` at every bus.
pub fn balance_residuals(network: &Network, point: &OperatingPoint, case: Case) -> Residuals {
    let mut p = vec![0.0; network.n_buses()];
    let mut q = vec![0.0; network.n_buses()];
    for (i, bus) in network.buses().iter().enumerate() {
        let v2 = point.v[i] * point.v[i];
        p[i] = -bus.p_load - bus.g_shunt_fixed * v2;
        q[i] = -bus.q_load + (bus.b_shunt_fixed + point.b_cs[i]) * v2;
    }
    for g in 0..network.n_generators() {
        if case.generator_in_service(g) {
            let b = network.generator_bus(g);
            p[b] += point.p[g];
            q[b] += point.q[g];
        }
    }
    for (l, flow) in branch_flows(network, &point.v, &point.theta, case).into_iter().enumerate() {
        if let Some(fl) = flow {
            let (f, t) = network.branch_ends(l);
            p[f] -= fl.p_from;
            q[f] -= fl.q_from;
            p[t] -= fl.p_to;
            q[t] -= fl.q_to;
        }
    }
    Residuals { p, q }
}

/// Per-branch `max(0, |S_from| − rating, |S_to| − rating)`, using normal
/// ratings in the base case and emergency ratings otherwise.
pub fn rating_overloads(network: &Network, point: &OperatingPoint, case: Case) -> Vec<f64> {
    let emergency = !case.is_base();
    branch_flows(network, &point.v, &point.theta, case)
        .into_iter()
        .zip(network.branches())
        .map(|(flow, br)| match flow {
            None => 0.0,
            Some(fl) => {
                let rating = if emergency { br.rating_emerg } else { br.rating_normal };
                let s_from = hypot(fl.p_from, fl.q_from);
                let s_to = hypot(fl.p_to, fl.q_to);
                (s_from - rating).max(s_to - rating).max(0.0)
            }
        })
        .collect()
}

/// Post-contingency real power prescribed by the response law:
/// `clip(p0 + alpha·delta, p_min, p_max)`.
#[inline]
pub fn response_p(p0: f64, alpha: f64, delta: f64, p_min: f64, p_max: f64) -> f64 {
    (p0 + alpha * delta).max(p_min).min(p_max)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ResponseResidual {
    pub real: f64,
    pub reactive: f64,
}

/// Generator response residuals of `con` against `base`. Entries for the
/// outaged generator are zero.
///
/// The reactive part encodes the PV/PQ switching law at the generator's bus:
/// holding voltage (within [`VOLTAGE_TOL`]) is always consistent; a voltage
/// drop requires `q = q_max`, a rise requires `q = q_min`.
pub fn response_residuals(
    network: &Network,
    base: &OperatingPoint,
    con: &OperatingPoint,
    case: Case,
) -> Vec<ResponseResidual> {
    let delta = con.delta.unwrap_or(0.0);
    network
        .generators()
        .iter()
        .enumerate()
        .map(|(g, gen)| {
            if !case.generator_in_service(g) {
                return ResponseResidual::default();
            }
            let real = con.p[g] - response_p(base.p[g], gen.alpha, delta, gen.p_min, gen.p_max);
            let bus = network.generator_bus(g);
            let dv = con.v[bus] - base.v[bus];
            let reactive = if dv.abs() <= VOLTAGE_TOL {
                0.0
            } else if dv < 0.0 {
                con.q[g] - gen.q_max
            } else {
                con.q[g] - gen.q_min
            };
            ResponseResidual { real, reactive }
        })
        .collect()
}

pub fn base_cost(network: &Network, point: &OperatingPoint) -> f64 {
    network.generators().iter().zip(&point.p).map(|(g, &p)| g.cost(p)).sum()
}

/// `weight · Σ block cost` over every slack entry.
pub fn penalty_cost(slacks: &SlackBundle, schedule: &PenaltySchedule, weight: f64) -> f64 {
    let fill = |blocks: &[PenaltyBlock], xs: &[f64]| -> f64 {
        xs.iter().map(|&x| PenaltySchedule::block_cost(blocks, x)).sum()
    };
    let balance = fill(&schedule.balance, &slacks.p_plus)
        + fill(&schedule.balance, &slacks.p_minus)
        + fill(&schedule.balance, &slacks.q_plus)
        + fill(&schedule.balance, &slacks.q_minus);
    weight * (balance + fill(&schedule.rating, &slacks.rating))
}

/// Minimal slacks that make `point` satisfy the soft constraints of `case`.
pub fn slacks_from_point(network: &Network, point: &OperatingPoint, case: Case) -> SlackBundle {
    let res = balance_residuals(network, point, case);
    SlackBundle {
        p_plus: res.p.iter().map(|r| r.max(0.0)).collect(),
        p_minus: res.p.iter().map(|r| (-r).max(0.0)).collect(),
        q_plus: res.q.iter().map(|r| r.max(0.0)).collect(),
        q_minus: res.q.iter().map(|r| (-r).max(0.0)).collect(),
        rating: rating_overloads(network, point, case),
    }
}

/// Penalty of `point` in `case`, weighted.
pub fn case_penalty(network: &Network, point: &OperatingPoint, case: Case, weight: f64) -> f64 {
    penalty_cost(&slacks_from_point(network, point, case), network.penalties(), weight)
}
