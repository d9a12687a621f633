//! Newton-Raphson AC power flow in polar coordinates.
//!
//! Supports a single slack bus or a distributed slack in which the system
//! imbalance is carried by one extra unknown `delta` and shared by the
//! generators' participation factors through the clipped response law. Bus
//! roles switch between PV and PQ when reactive limits bind. After a branch
//! outage only the principal island is solved; buses elsewhere are reported
//! in [`PfResult::islanded`] and keep their residuals.

use alloc::vec;
use alloc::vec::Vec;

use crate::acfun::{
    balance_residuals, branch_flow_partials, response_p, OperatingPoint, Residuals, VOLTAGE_TOL,
};
use crate::linalg::{DenseMatrix, LuFactors};
use crate::netmodel::{Case, Network};
use crate::num::sqrt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlackMode {
    /// Generators at this bus absorb the imbalance; its angle is the reference.
    SingleBus(usize),
    /// `p_g = clip(p_target_g + alpha_g·delta)` for every in-service unit.
    Distributed,
}

#[derive(Debug, Clone)]
pub struct PfSpec {
    pub case: Case,
    /// Per generator.
    pub p_target: Vec<f64>,
    /// Per bus. Held at buses in PV mode; also the starting magnitude for
    /// islanded generator buses.
    pub v_setpoint: Vec<f64>,
    /// Switched-shunt susceptance per bus, held fixed during the solve.
    pub b_cs: Vec<f64>,
    pub slack: SlackMode,
    pub tolerance: f64,
    pub max_iter: usize,
    pub max_outer: usize,
    pub switching: bool,
    /// Starting `v`, `theta` and `delta`; flat start when absent.
    pub warm_start: Option<OperatingPoint>,
    /// Distributed mode only. Once every participating unit sits at a limit,
    /// further `delta` acts as an injection at the reference bus. That
    /// injection is not part of the returned point, so the unmet imbalance
    /// shows up there as a balance residual.
    pub shortfall_at_reference: bool,
}

impl PfSpec {
    pub const DEFAULT_TOLERANCE: f64 = 1e-8;
    pub const DEFAULT_MAX_ITER: usize = 30;
    pub const DEFAULT_MAX_OUTER: usize = 10;

    /// Default tolerances, all setpoints 1.0, no switched shunts.
    pub fn new(network: &Network, case: Case, p_target: Vec<f64>, slack: SlackMode) -> Self {
        Self {
            case,
            p_target,
            v_setpoint: vec![1.0; network.n_buses()],
            b_cs: vec![0.0; network.n_buses()],
            slack,
            tolerance: Self::DEFAULT_TOLERANCE,
            max_iter: Self::DEFAULT_MAX_ITER,
            max_outer: Self::DEFAULT_MAX_OUTER,
            switching: true,
            warm_start: None,
            shortfall_at_reference: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PfResult {
    pub point: OperatingPoint,
    pub converged: bool,
    /// Newton iterations summed over all switching passes.
    pub iterations: usize,
    /// Largest balance residual over the principal island.
    pub max_residual: f64,
    pub pvpq_switches: usize,
    /// Buses outside the principal island, left unsolved.
    pub islanded: Vec<usize>,
    /// Accepted-step residual 2-norms of the last switching pass.
    pub residual_history: Vec<f64>,
}

/// Partial derivatives of every bus residual `(Δp_0..Δp_n, Δq_0..Δq_n)`
/// with respect to `(θ_0..θ_n, v_0..v_n)` at fixed generator output.
pub fn residual_jacobian(network: &Network, v: &[f64], theta: &[f64], b_cs: &[f64], case: Case) -> DenseMatrix {
    let n = network.n_buses();
    let mut j = DenseMatrix::zeros(2 * n, 2 * n);
    for (i, bus) in network.buses().iter().enumerate() {
        j[(i, n + i)] -= 2.0 * bus.g_shunt_fixed * v[i];
        j[(n + i, n + i)] += 2.0 * (bus.b_shunt_fixed + b_cs[i]) * v[i];
    }
    for (l, br) in network.branches().iter().enumerate() {
        if !case.branch_in_service(l) {
            continue;
        }
        let (f, t) = network.branch_ends(l);
        let d = branch_flow_partials(br, v[f], v[t], theta[f], theta[t]);
        let cols = [f, t, n + f, n + t];
        for (k, &c) in cols.iter().enumerate() {
            j[(f, c)] -= d.p_from[k];
            j[(n + f, c)] -= d.q_from[k];
            j[(t, c)] -= d.p_to[k];
            j[(n + t, c)] -= d.q_to[k];
        }
    }
    j
}

/// Largest elementwise gap between [`residual_jacobian`] and central finite
/// differences of [`balance_residuals`] (step `1e-6`) in the base case.
pub fn jacobian_check(network: &Network, point: &OperatingPoint) -> f64 {
    let n = network.n_buses();
    let analytic = residual_jacobian(network, &point.v, &point.theta, &point.b_cs, Case::Base);
    let h = 1e-6;
    let mut worst = 0.0f64;
    for col in 0..2 * n {
        let shifted = |s: f64| {
            let mut pt = point.clone();
            if col < n {
                pt.theta[col] += s;
            } else {
                pt.v[col - n] += s;
            }
            balance_residuals(network, &pt, Case::Base)
        };
        let up = shifted(h);
        let dn = shifted(-h);
        for row in 0..2 * n {
            let (a, b) = if row < n { (up.p[row], dn.p[row]) } else { (up.q[row - n], dn.q[row - n]) };
            let fd = (a - b) / (2.0 * h);
            worst = worst.max((fd - analytic[(row, col)]).abs());
        }
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Slack,
    Pv,
    /// Generator bus with reactive output pinned at its upper limits.
    PqMax,
    /// Generator bus with reactive output pinned at its lower limits.
    PqMin,
    Pq,
}

/// A bus whose role flipped this many times is frozen.
const FREEZE_AFTER: u32 = 3;
const MAX_HALVINGS: u32 = 6;

struct Layout {
    theta_col: Vec<Option<usize>>,
    v_col: Vec<Option<usize>>,
    delta_col: Option<usize>,
    p_row: Vec<Option<usize>>,
    q_row: Vec<Option<usize>>,
    dim: usize,
}

struct Solver<'a> {
    net: &'a Network,
    spec: &'a PfSpec,
    in_island: Vec<bool>,
    reference: usize,
    roles: Vec<Role>,
    flips: Vec<u32>,
    v: Vec<f64>,
    theta: Vec<f64>,
    delta: f64,
    /// `(delta below which all units sit at p_min, delta above which all sit
    /// at p_max, Σ alpha)` when the shortfall injection is enabled.
    saturation: Option<(f64, f64, f64)>,
}

fn components(network: &Network, case: Case) -> Vec<usize> {
    let n = network.n_buses();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for l in 0..network.n_branches() {
        if case.branch_in_service(l) {
            let (f, t) = network.branch_ends(l);
            let (a, b) = (find(&mut parent, f), find(&mut parent, t));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    (0..n).map(|b| find(&mut parent, b)).collect()
}

fn in_service_gens(network: &Network, case: Case, bus: usize) -> impl Iterator<Item = usize> + '_ {
    network.generators_at(bus).iter().copied().filter(move |&g| case.generator_in_service(g))
}

/// Splits a bus's reactive requirement over its units with a common fraction
/// of each unit's range. Clamped to the limits when `clamp` is set.
fn split_q(network: &Network, case: Case, bus: usize, needed: f64, clamp: bool, q: &mut [f64]) {
    let gens = network.generators();
    let (mut lo, mut hi) = (0.0, 0.0);
    for g in in_service_gens(network, case, bus) {
        lo += gens[g].q_min;
        hi += gens[g].q_max;
    }
    let range = hi - lo;
    let mut t = if range > 1e-12 { (needed - lo) / range } else { 0.0 };
    if clamp {
        t = t.clamp(0.0, 1.0);
    }
    for g in in_service_gens(network, case, bus) {
        q[g] = gens[g].q_min + t * (gens[g].q_max - gens[g].q_min);
    }
}

impl<'a> Solver<'a> {
    fn new(net: &'a Network, spec: &'a PfSpec) -> Option<Self> {
        let n = net.n_buses();
        let case = spec.case;
        let comp = components(net, case);
        let has_gen = |b: usize| in_service_gens(net, case, b).next().is_some();

        let principal = match spec.slack {
            SlackMode::SingleBus(b) => comp[b],
            SlackMode::Distributed => {
                // island with the most generating capacity; first wins ties
                let mut best: Option<(usize, f64)> = None;
                for b in 0..n {
                    if comp[b] != b {
                        continue;
                    }
                    let cap: f64 = (0..n)
                        .filter(|&x| comp[x] == b)
                        .flat_map(|x| in_service_gens(net, case, x))
                        .map(|g| net.generators()[g].p_max.max(0.0) + 1e-9)
                        .sum();
                    if cap > 0.0 && best.is_none_or(|(_, c)| cap > c) {
                        best = Some((b, cap));
                    }
                }
                best?.0
            }
        };
        let in_island: Vec<bool> = comp.iter().map(|&c| c == principal).collect();
        let reference = match spec.slack {
            SlackMode::SingleBus(b) => b,
            SlackMode::Distributed => (0..n).find(|&b| in_island[b] && has_gen(b))?,
        };
        let roles = (0..n)
            .map(|b| {
                if matches!(spec.slack, SlackMode::SingleBus(s) if s == b) {
                    Role::Slack
                } else if has_gen(b) {
                    Role::Pv
                } else {
                    Role::Pq
                }
            })
            .collect();
        let (v, theta, delta) = match &spec.warm_start {
            Some(w) => (w.v.clone(), w.theta.clone(), w.delta.unwrap_or(0.0)),
            None => (vec![1.0; n], vec![0.0; n], 0.0),
        };
        let saturation = if spec.shortfall_at_reference && spec.slack == SlackMode::Distributed {
            let (mut lo, mut hi, mut a) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
            for (g, gen) in net.generators().iter().enumerate() {
                if case.generator_in_service(g) && in_island[net.generator_bus(g)] && gen.alpha > 0.0 {
                    lo = lo.min((gen.p_min - spec.p_target[g]) / gen.alpha);
                    hi = hi.max((gen.p_max - spec.p_target[g]) / gen.alpha);
                    a += gen.alpha;
                }
            }
            (a > 0.0).then_some((lo, hi, a))
        } else {
            None
        };
        let mut s = Self {
            net,
            spec,
            in_island,
            reference,
            roles,
            flips: vec![0; n],
            v,
            theta,
            delta,
            saturation,
        };
        s.apply_setpoints();
        Some(s)
    }

    fn apply_setpoints(&mut self) {
        for b in 0..self.net.n_buses() {
            if matches!(self.roles[b], Role::Pv | Role::Slack) {
                self.v[b] = self.spec.v_setpoint[b];
            }
        }
        if self.spec.warm_start.is_none() {
            self.theta.iter_mut().for_each(|t| *t = 0.0);
        }
    }

    fn distributed(&self) -> bool {
        self.spec.slack == SlackMode::Distributed
    }

    fn layout(&self) -> Layout {
        let n = self.net.n_buses();
        let mut theta_col = vec![None; n];
        let mut v_col = vec![None; n];
        let mut p_row = vec![None; n];
        let mut q_row = vec![None; n];
        let mut cols = 0;
        let mut rows = 0;
        for b in (0..n).filter(|&b| self.in_island[b]) {
            if b != self.reference {
                theta_col[b] = Some(cols);
                cols += 1;
            }
            if self.roles[b] != Role::Slack {
                p_row[b] = Some(rows);
                rows += 1;
            }
        }
        for b in (0..n).filter(|&b| self.in_island[b]) {
            if matches!(self.roles[b], Role::Pq | Role::PqMax | Role::PqMin) {
                v_col[b] = Some(cols);
                cols += 1;
                q_row[b] = Some(rows);
                rows += 1;
            }
        }
        let delta_col = self.distributed().then(|| {
            cols += 1;
            cols - 1
        });
        debug_assert_eq!(rows, cols);
        Layout { theta_col, v_col, delta_col, p_row, q_row, dim: cols }
    }

    /// Generator outputs implied by the current state. Reactive output is
    /// only meaningful at pinned PQ buses here.
    fn generator_output(&self, delta: f64) -> (Vec<f64>, Vec<f64>) {
        let net = self.net;
        let case = self.spec.case;
        let ng = net.n_generators();
        let mut p = vec![0.0; ng];
        let mut q = vec![0.0; ng];
        for (g, gen) in net.generators().iter().enumerate() {
            if !case.generator_in_service(g) {
                continue;
            }
            p[g] = if self.distributed() {
                response_p(self.spec.p_target[g], gen.alpha, delta, gen.p_min, gen.p_max)
            } else {
                self.spec.p_target[g]
            };
            match self.roles[net.generator_bus(g)] {
                Role::PqMax => q[g] = gen.q_max,
                Role::PqMin => q[g] = gen.q_min,
                _ => {}
            }
        }
        (p, q)
    }

    fn point(&self, v: &[f64], theta: &[f64], delta: f64) -> OperatingPoint {
        let (p, q) = self.generator_output(delta);
        OperatingPoint {
            v: v.to_vec(),
            theta: theta.to_vec(),
            b_cs: self.spec.b_cs.clone(),
            p,
            q,
            delta: self.distributed().then_some(delta),
        }
    }

    fn shortfall(&self, delta: f64) -> f64 {
        match self.saturation {
            Some((_, hi, a)) if delta > hi => a * (delta - hi),
            Some((lo, _, a)) if delta < lo => a * (delta - lo),
            _ => 0.0,
        }
    }

    fn mismatch(&self, lay: &Layout, v: &[f64], theta: &[f64], delta: f64) -> Vec<f64> {
        let res = balance_residuals(self.net, &self.point(v, theta, delta), self.spec.case);
        let mut f = vec![0.0; lay.dim];
        for b in 0..self.net.n_buses() {
            if let Some(r) = lay.p_row[b] {
                f[r] = res.p[b];
            }
            if let Some(r) = lay.q_row[b] {
                f[r] = res.q[b];
            }
        }
        if let Some(r) = lay.p_row[self.reference] {
            f[r] += self.shortfall(delta);
        }
        f
    }

    fn jacobian(&self, lay: &Layout) -> DenseMatrix {
        let net = self.net;
        let n = net.n_buses();
        let case = self.spec.case;
        let full = residual_jacobian(net, &self.v, &self.theta, &self.spec.b_cs, case);
        let mut j = DenseMatrix::zeros(lay.dim, lay.dim);
        for b in 0..n {
            for (row, full_row) in [(lay.p_row[b], b), (lay.q_row[b], n + b)] {
                let Some(row) = row else { continue };
                for c in 0..n {
                    if let Some(col) = lay.theta_col[c] {
                        j[(row, col)] = full[(full_row, c)];
                    }
                    if let Some(col) = lay.v_col[c] {
                        j[(row, col)] = full[(full_row, n + c)];
                    }
                }
            }
        }
        if let Some(col) = lay.delta_col {
            let gens = net.generators();
            let active = |g: usize| {
                let gen = &gens[g];
                let raw = self.spec.p_target[g] + gen.alpha * self.delta;
                raw > gen.p_min && raw < gen.p_max
            };
            let mut any = false;
            for pass in 0..2 {
                for g in 0..net.n_generators() {
                    let bus = net.generator_bus(g);
                    if !case.generator_in_service(g) || !self.in_island[bus] {
                        continue;
                    }
                    // second pass: every unit saturated, keep the column nonzero
                    if pass == 0 && !active(g) {
                        continue;
                    }
                    if let Some(row) = lay.p_row[bus] {
                        j[(row, col)] += gens[g].alpha;
                        any |= gens[g].alpha != 0.0;
                    }
                }
                if any {
                    break;
                }
                if let (Some((_, _, a)), Some(row)) = (self.saturation, lay.p_row[self.reference]) {
                    j[(row, col)] += a;
                    break;
                }
            }
        }
        j
    }

    fn apply_step(&self, lay: &Layout, dx: &[f64], s: f64) -> (Vec<f64>, Vec<f64>, f64) {
        let mut v = self.v.clone();
        let mut theta = self.theta.clone();
        for b in 0..self.net.n_buses() {
            if let Some(c) = lay.theta_col[b] {
                theta[b] += s * dx[c];
            }
            if let Some(c) = lay.v_col[b] {
                v[b] += s * dx[c];
            }
        }
        let delta = self.delta + lay.delta_col.map_or(0.0, |c| s * dx[c]);
        (v, theta, delta)
    }

    /// Damped Newton on the current role assignment. Returns
    /// `(converged, iterations, accepted residual norms)`.
    fn newton(&mut self) -> (bool, usize, Vec<f64>) {
        let lay = self.layout();
        let norm2 = |f: &[f64]| sqrt(f.iter().map(|x| x * x).sum::<f64>());
        let inf = |f: &[f64]| f.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let mut f = self.mismatch(&lay, &self.v, &self.theta, self.delta);
        let mut history = vec![norm2(&f)];
        let mut iters = 0;
        loop {
            if inf(&f) <= self.spec.tolerance {
                return (true, iters, history);
            }
            if iters >= self.spec.max_iter {
                return (false, iters, history);
            }
            iters += 1;
            let Ok(lu) = LuFactors::factorize(self.jacobian(&lay)) else {
                return (false, iters, history);
            };
            let rhs: Vec<f64> = f.iter().map(|x| -x).collect();
            let dx = lu.solve(&rhs);
            if dx.iter().any(|x| !x.is_finite()) {
                return (false, iters, history);
            }
            let current = norm2(&f);
            let mut step = 1.0;
            let mut accepted = None;
            for _ in 0..=MAX_HALVINGS {
                let (v, theta, delta) = self.apply_step(&lay, &dx, step);
                let f_new = self.mismatch(&lay, &v, &theta, delta);
                let n_new = norm2(&f_new);
                if n_new.is_finite() && n_new < current {
                    accepted = Some((v, theta, delta, f_new, n_new));
                    break;
                }
                step *= 0.5;
            }
            let Some((v, theta, delta, f_new, n_new)) = accepted else {
                return (false, iters, history);
            };
            self.v = v;
            self.theta = theta;
            self.delta = delta;
            f = f_new;
            history.push(n_new);
        }
    }

    /// Residuals with every generator's reactive output at zero, used to
    /// read off what each bus needs.
    fn reactive_needs(&self) -> Residuals {
        let mut pt = self.point(&self.v, &self.theta, self.delta);
        pt.q.iter_mut().for_each(|q| *q = 0.0);
        balance_residuals(self.net, &pt, self.spec.case)
    }

    /// Applies PV/PQ switches; returns how many buses changed role.
    fn switch_roles(&mut self) -> usize {
        let net = self.net;
        let case = self.spec.case;
        let needs = self.reactive_needs();
        let tol = 10.0 * self.spec.tolerance;
        let mut changed = 0;
        for b in 0..net.n_buses() {
            if !self.in_island[b] || self.flips[b] >= FREEZE_AFTER {
                continue;
            }
            let (lo, hi) = in_service_gens(net, case, b).fold((0.0, 0.0), |(lo, hi), g| {
                (lo + net.generators()[g].q_min, hi + net.generators()[g].q_max)
            });
            let needed = -needs.q[b];
            let next = match self.roles[b] {
                Role::Pv if needed > hi + tol => Role::PqMax,
                Role::Pv if needed < lo - tol => Role::PqMin,
                Role::PqMax if self.v[b] > self.spec.v_setpoint[b] + VOLTAGE_TOL => Role::Pv,
                Role::PqMin if self.v[b] < self.spec.v_setpoint[b] - VOLTAGE_TOL => Role::Pv,
                r => r,
            };
            if next != self.roles[b] {
                self.roles[b] = next;
                self.flips[b] += 1;
                if next == Role::Pv {
                    self.v[b] = self.spec.v_setpoint[b];
                }
                changed += 1;
            }
        }
        changed
    }

    /// True when no bus (frozen or not) is on the wrong side of the switching law.
    fn roles_consistent(&self) -> bool {
        let net = self.net;
        let case = self.spec.case;
        let needs = self.reactive_needs();
        let tol = 10.0 * self.spec.tolerance;
        (0..net.n_buses()).filter(|&b| self.in_island[b]).all(|b| {
            let (lo, hi) = in_service_gens(net, case, b).fold((0.0, 0.0), |(lo, hi), g| {
                (lo + net.generators()[g].q_min, hi + net.generators()[g].q_max)
            });
            let needed = -needs.q[b];
            match self.roles[b] {
                Role::Pv => needed <= hi + tol && needed >= lo - tol,
                Role::PqMax => self.v[b] <= self.spec.v_setpoint[b] + VOLTAGE_TOL,
                Role::PqMin => self.v[b] >= self.spec.v_setpoint[b] - VOLTAGE_TOL,
                _ => true,
            }
        })
    }

    fn finish(self, inner_ok: bool, iterations: usize, switches: usize, history: Vec<f64>) -> PfResult {
        let net = self.net;
        let case = self.spec.case;
        let n = net.n_buses();
        let mut pt = self.point(&self.v, &self.theta, self.delta);
        let needs = self.reactive_needs();

        // islanded buses keep their starting state
        for b in (0..n).filter(|&b| !self.in_island[b]) {
            if in_service_gens(net, case, b).next().is_some() {
                pt.v[b] = self.spec.v_setpoint[b];
            }
        }
        for b in 0..n {
            match self.roles[b] {
                Role::Pv => split_q(net, case, b, -needs.q[b], true, &mut pt.q),
                Role::Slack => split_q(net, case, b, -needs.q[b], false, &mut pt.q),
                _ => {}
            }
        }
        if !self.in_island.iter().all(|&x| x) {
            let island_needs = {
                let mut tmp = pt.clone();
                tmp.q.iter_mut().for_each(|q| *q = 0.0);
                balance_residuals(net, &tmp, case)
            };
            for b in (0..n).filter(|&b| !self.in_island[b]) {
                split_q(net, case, b, -island_needs.q[b], true, &mut pt.q);
            }
        }
        if let SlackMode::SingleBus(s) = self.spec.slack {
            let res = balance_residuals(net, &pt, case);
            let gens: Vec<usize> = in_service_gens(net, case, s).collect();
            let alpha_sum: f64 = gens.iter().map(|&g| net.generators()[g].alpha).sum();
            for &g in &gens {
                let share = if alpha_sum > 0.0 {
                    net.generators()[g].alpha / alpha_sum
                } else {
                    1.0 / gens.len() as f64
                };
                pt.p[g] -= res.p[s] * share;
            }
        }

        let mut res = balance_residuals(net, &pt, case);
        res.p[self.reference] += self.shortfall(self.delta);
        let max_residual = (0..n)
            .filter(|&b| self.in_island[b])
            .map(|b| res.p[b].abs().max(res.q[b].abs()))
            .fold(0.0, f64::max);
        let consistent = !self.spec.switching || self.roles_consistent();
        let converged = inner_ok
            && consistent
            && max_residual <= self.spec.tolerance
            && pt.is_finite();
        PfResult {
            point: pt,
            converged,
            iterations,
            max_residual,
            pvpq_switches: switches,
            islanded: (0..n).filter(|&b| !self.in_island[b]).collect(),
            residual_history: history,
        }
    }
}

/// Solves the AC power flow described by `spec`. Never fails: a solve that
/// does not converge returns its best iterate with `converged = false`.
pub fn newton_pf(network: &Network, spec: &PfSpec) -> PfResult {
    let Some(mut solver) = Solver::new(network, spec) else {
        // no voltage-controlling device anywhere
        let mut point = spec.warm_start.clone().unwrap_or_else(|| OperatingPoint::flat(network));
        point.b_cs = spec.b_cs.clone();
        let res = balance_residuals(network, &point, spec.case);
        return PfResult {
            point,
            converged: false,
            iterations: 0,
            max_residual: res.max_abs(),
            pvpq_switches: 0,
            islanded: (0..network.n_buses()).collect(),
            residual_history: Vec::new(),
        };
    };
    let mut iterations = 0;
    let mut switches = 0;
    let mut ok = false;
    let mut history = Vec::new();
    for _ in 0..spec.max_outer.max(1) {
        let (conv, it, hist) = solver.newton();
        iterations += it;
        history = hist;
        ok = conv;
        if !conv || !spec.switching {
            break;
        }
        let changed = solver.switch_roles();
        if changed == 0 {
            break;
        }
        switches += changed;
        ok = false;
    }
    solver.finish(ok, iterations, switches, history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acfun::response_residuals;
    use crate::netmodel::fixtures::*;
    use crate::netmodel::{Network, PenaltySchedule};
    use proptest::prelude::*;

    #[test]
    fn zero_load_flat_start_converges_immediately() {
        let net = two_bus(0.0);
        let spec = PfSpec::new(&net, Case::Base, vec![0.0], SlackMode::SingleBus(0));
        let r = newton_pf(&net, &spec);
        assert!(r.converged);
        assert!(r.iterations <= 1);
        assert_eq!(r.point.v, vec![1.0, 1.0]);
        assert_eq!(r.point.theta, vec![0.0, 0.0]);
        assert!(r.point.q[0].abs() < 1e-12);
    }

    /// With `q_load = 0` at bus 2 the reactive balance forces
    /// `v2 = cos δ`, leaving `cos δ·sin δ / x = p` for the angle.
    fn bisect_two_bus(p: f64, x: f64) -> (f64, f64) {
        let f = |d: f64| libm::cos(d) * libm::sin(d) / x - p;
        let (mut lo, mut hi) = (0.0, core::f64::consts::FRAC_PI_4);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let d = 0.5 * (lo + hi);
        (-d, libm::cos(d))
    }

    #[test]
    fn two_bus_matches_bisection() {
        let net = two_bus(0.2);
        let spec = PfSpec::new(&net, Case::Base, vec![0.0], SlackMode::SingleBus(0));
        let r = newton_pf(&net, &spec);
        assert!(r.converged);
        let (theta2, v2) = bisect_two_bus(0.2, 0.1);
        assert!((r.point.theta[1] - theta2).abs() < 1e-8);
        assert!((r.point.v[1] - v2).abs() < 1e-8);
        assert!((r.point.p[0] - 0.2).abs() < 1e-8);
    }

    #[test]
    fn residual_norm_never_increases() {
        let net = two_bus(1.5);
        let spec = PfSpec::new(&net, Case::Base, vec![0.0], SlackMode::SingleBus(0));
        let r = newton_pf(&net, &spec);
        assert!(r.residual_history.windows(2).all(|w| w[1] <= w[0]));
    }

    fn three_bus() -> Network {
        Network::new(
            100.0,
            vec![bus("1", 0.0, 0.0), bus("2", 0.4, 0.1), bus("3", 0.3, 0.05)],
            vec![generator("G1", "1", 0.0, 2.0), generator("G2", "2", 0.0, 0.5)],
            vec![
                line("L12", "1", "2", 0.01, 0.1),
                line("L23", "2", "3", 0.01, 0.1),
                line("L13", "1", "3", 0.01, 0.1),
            ],
            PenaltySchedule::default(),
        )
        .edited(|n| {
            n.generators[0].alpha = 1.0;
            n.generators[1].alpha = 1.0;
        })
    }

    #[test]
    fn capacity_shortfall_is_left_at_the_reference() {
        let net = two_bus(0.5).edited(|n| n.generators[0].p_max = 0.3);
        let mut spec = PfSpec::new(&net, Case::Base, vec![0.1], SlackMode::Distributed);
        let r = newton_pf(&net, &spec);
        assert!(!r.converged);
        spec.shortfall_at_reference = true;
        let r = newton_pf(&net, &spec);
        assert!(r.converged);
        assert_eq!(r.point.p[0], 0.3);
        let res = balance_residuals(&net, &r.point, Case::Base);
        // what bus 2 draws beyond the unit's limit
        let flows = crate::acfun::branch_flows(&net, &r.point.v, &r.point.theta, Case::Base);
        assert!((res.p[0] - (0.3 - flows[0].unwrap().p_from)).abs() < 1e-12);
        assert!((res.p[0] + 0.2).abs() < 1e-2);
        assert!(res.p[1].abs() < 1e-8);
    }

    #[test]
    fn generator_outage_shifts_output_by_participation() {
        let net = three_bus();
        let base_spec = PfSpec::new(&net, Case::Base, vec![0.5, 0.3], SlackMode::Distributed);
        let base = newton_pf(&net, &base_spec);
        assert!(base.converged);
        let mut spec = PfSpec::new(&net, Case::GeneratorOut(1), base.point.p.clone(), SlackMode::Distributed);
        spec.warm_start = Some(base.point.clone());
        let r = newton_pf(&net, &spec);
        assert!(r.converged, "{r:?}");
        let delta = r.point.delta.unwrap();
        assert!(delta > 0.0);
        assert_eq!(r.point.p[1], 0.0);
        assert_eq!(r.point.p[0], base.point.p[0] + delta);
        assert!(r.point.p[0] - base.point.p[0] > base.point.p[1]);
    }

    #[test]
    fn distributed_mode_conserves_power() {
        let net = three_bus();
        let spec = PfSpec::new(&net, Case::Base, vec![0.3, 0.3], SlackMode::Distributed);
        let r = newton_pf(&net, &spec);
        assert!(r.converged);
        let gen: f64 = r.point.p.iter().sum();
        let load: f64 = net.buses().iter().map(|b| b.p_load).sum();
        let losses: f64 = crate::acfun::branch_flows(&net, &r.point.v, &r.point.theta, Case::Base)
            .iter()
            .flatten()
            .map(|f| f.p_from + f.p_to)
            .sum();
        assert!((gen - load - losses).abs() < 1e-7);
        assert!(losses > 0.0);
    }

    #[test]
    fn reactive_limit_switches_bus_to_pq() {
        let net = three_bus().edited(|n| {
            n.buses[2].q_load = 0.6;
            n.generators[1].q_max = 0.05;
            n.generators[1].q_min = -0.05;
        });
        let mut spec = PfSpec::new(&net, Case::Base, vec![0.4, 0.3], SlackMode::Distributed);
        spec.v_setpoint = vec![1.02, 1.02, 1.0];
        let r = newton_pf(&net, &spec);
        assert!(r.converged);
        assert!(r.pvpq_switches >= 1);
        assert_eq!(r.point.q[1], 0.05);
        assert!(r.point.v[1] < 1.02);
        // response law against a base that held the setpoint
        let mut base = r.point.clone();
        base.v = vec![1.02, 1.02, 1.0];
        base.p = vec![0.4, 0.3];
        for res in response_residuals(&net, &base, &r.point, Case::Base) {
            assert!(res.real == 0.0 && res.reactive == 0.0, "{res:?}");
        }
    }

    #[test]
    fn islanded_load_bus_is_flagged() {
        let net = two_bus(0.3);
        let spec = PfSpec::new(&net, Case::BranchOut(0), vec![0.0], SlackMode::Distributed);
        let r = newton_pf(&net, &spec);
        assert!(r.converged);
        assert_eq!(r.islanded, vec![1]);
        let res = balance_residuals(&net, &r.point, Case::BranchOut(0));
        assert!((res.p[1] + 0.3).abs() < 1e-15);
    }

    #[test]
    fn no_branches_gives_block_diagonal_jacobian() {
        let net = Network::new(
            100.0,
            vec![bus("1", 0.1, 0.0), bus("2", 0.0, 0.0)],
            vec![],
            vec![],
            PenaltySchedule::default(),
        )
        .edited(|n| n.buses[1].g_shunt_fixed = 0.2);
        let pt = OperatingPoint::flat(&net);
        let j = residual_jacobian(&net, &pt.v, &pt.theta, &pt.b_cs, Case::Base);
        for r in 0..4 {
            for c in 0..4 {
                if r % 2 != c % 2 {
                    assert_eq!(j[(r, c)], 0.0);
                }
            }
        }
        assert_eq!(jacobian_check(&net, &pt), jacobian_check(&net, &pt));
        assert!(jacobian_check(&net, &pt) < 1e-5);
    }

    proptest! {
        #[test]
        fn jacobian_agrees_with_finite_differences(
            v in proptest::collection::vec(0.9..1.1f64, 3),
            theta in proptest::collection::vec(-0.4..0.4f64, 3),
        ) {
            let net = three_bus().edited(|n| {
                n.branches[2].tap = 0.95;
                n.branches[2].phase = 0.1;
                n.branches[1].b_ch = 0.05;
                n.buses[0].g_shunt_fixed = 0.01;
                n.buses[2].b_shunt_fixed = 0.2;
            });
            let mut pt = OperatingPoint::flat(&net);
            pt.v = v;
            pt.theta = theta;
            prop_assert!(jacobian_check(&net, &pt) < 1e-5);
        }
    }
}
