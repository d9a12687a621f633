//! Multi-cut Benders decomposition of the LBLC program.
//!
//! Each iteration solves the master, hands its dispatch to the caller (so a
//! recovered AC point can be written while the subproblems run), solves one
//! subproblem per contingency through the [`Executor`] and adds one
//! optimality cut per contingency.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::exec::{Budget, Executor};
use crate::lblc::{build_master, build_subproblem, CouplingMap};
use crate::lpsolve::{solve, LpOptions, LpSolution, LpStatus};
use crate::netmodel::{Contingency, ModelError, Network};
use crate::num::round;

/// `η_block ≥ intercept + gradient·p_0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cut {
    pub label: String,
    /// Index of the contingency in the reduced set.
    pub block: usize,
    pub intercept: f64,
    /// Per generator; zero for the outaged unit.
    pub gradient: Vec<f64>,
    pub iteration: usize,
}

impl Cut {
    pub fn value_at(&self, y: &[f64]) -> f64 {
        self.intercept + self.gradient.iter().zip(y).map(|(g, y)| g * y).sum::<f64>()
    }
}

/// Optimality cut from a solved subproblem at dispatch `y_at`.
pub fn make_cut(
    sub_solution: &LpSolution,
    coupling: &CouplingMap,
    y_at: &[f64],
    label: &str,
    block: usize,
    iteration: usize,
) -> Cut {
    let gradient: Vec<f64> = coupling
        .rows
        .iter()
        .map(|row| row.map_or(0.0, |r| sub_solution.duals[r]))
        .collect();
    let intercept = sub_solution.objective - gradient.iter().zip(y_at).map(|(g, y)| g * y).sum::<f64>();
    Cut { label: label.into(), block, intercept, gradient, iteration }
}

#[derive(Debug, Clone, Copy)]
pub struct BendersConfig {
    /// Stop when `(UB − LB)/max(1, |UB|)` falls to this.
    pub tol_gap: f64,
    pub max_iter: usize,
    pub lp: LpOptions,
}

impl Default for BendersConfig {
    fn default() -> Self {
        Self { tol_gap: 1e-6, max_iter: 200, lp: LpOptions::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Converged,
    IterationCap,
    Budget,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub iter: usize,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub wall_ms: u64,
}

/// What the master produced at one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct Incumbent {
    pub iteration: usize,
    pub dispatch: Vec<f64>,
    pub lower_bound: f64,
}

#[derive(Debug, Clone)]
pub struct BendersState {
    pub iteration: usize,
    pub cuts: Vec<Cut>,
    pub lower_bound: f64,
    pub upper_bound: f64,
    /// Dispatch achieving the upper bound.
    pub best_dispatch: Vec<f64>,
    /// Dispatch of the latest master solve.
    pub incumbent: Vec<f64>,
    pub stop: StopReason,
    pub trace: Vec<TracePoint>,
}

impl BendersState {
    pub fn gap(&self) -> f64 {
        relative_gap(self.lower_bound, self.upper_bound)
    }

    /// `iter,lower_bound,upper_bound,wall_ms` with a header row.
    pub fn trace_csv(&self) -> String {
        use core::fmt::Write;
        let mut out = String::from("iter,lower_bound,upper_bound,wall_ms\n");
        for t in &self.trace {
            let _ = writeln!(out, "{},{:.8},{:.8},{}", t.iter, t.lower_bound, t.upper_bound, t.wall_ms);
        }
        out
    }
}

fn relative_gap(lb: f64, ub: f64) -> f64 {
    (ub - lb) / ub.abs().max(1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub enum BendersError {
    Model(ModelError),
    /// The soft-constrained master must always be solvable.
    Master(LpStatus),
    Subproblem { label: String, status: LpStatus },
}

impl fmt::Display for BendersError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BendersError::Model(e) => write!(f, "{e}"),
            BendersError::Master(s) => write!(f, "master problem ended with status {s:?}"),
            BendersError::Subproblem { label, status } => {
                write!(f, "subproblem {label} ended with status {status:?}")
            }
        }
    }
}

impl core::error::Error for BendersError {}

impl From<ModelError> for BendersError {
    fn from(e: ModelError) -> Self {
        BendersError::Model(e)
    }
}

type CutKey = (usize, Vec<i64>);

fn cut_key(cut: &Cut) -> CutKey {
    (cut.block, cut.gradient.iter().map(|g| round(g * 1e9) as i64).collect())
}

/// Runs the loop until the gap closes, the iteration cap is hit or `budget`
/// expires (checked between iterations). `on_incumbent` sees every master
/// dispatch before that iteration's subproblems are solved.
pub fn run<E: Executor>(
    network: &Network,
    khat: &[Contingency],
    config: &BendersConfig,
    executor: &E,
    budget: &Budget<'_>,
    mut on_incumbent: impl FnMut(&Incumbent),
) -> Result<BendersState, BendersError> {
    network.cases_of(khat)?;
    let weight = if khat.is_empty() { 0.0 } else { 1.0 / khat.len() as f64 };
    let mut pool: BTreeMap<CutKey, Cut> = BTreeMap::new();
    let mut order: Vec<CutKey> = Vec::new();
    let mut state = BendersState {
        iteration: 0,
        cuts: Vec::new(),
        lower_bound: f64::NEG_INFINITY,
        upper_bound: f64::INFINITY,
        best_dispatch: Vec::new(),
        incumbent: Vec::new(),
        stop: StopReason::IterationCap,
        trace: Vec::new(),
    };

    loop {
        state.iteration += 1;
        let it = state.iteration;
        let cuts: Vec<Cut> = order.iter().map(|k| pool[k].clone()).collect();
        let master = build_master(network, khat.len(), &cuts);
        let ms = solve(&master.lp, &config.lp);
        if ms.status != LpStatus::Optimal {
            return Err(BendersError::Master(ms.status));
        }
        state.lower_bound = state.lower_bound.max(ms.objective);
        let y = master.base.dispatch(&ms.x);
        state.incumbent = y.clone();
        on_incumbent(&Incumbent { iteration: it, dispatch: y.clone(), lower_bound: state.lower_bound });

        let eta_part: f64 = master.eta.iter().map(|&j| weight * ms.x[j]).sum();
        let first_stage = ms.objective - eta_part;

        let results = executor.map_indexed(khat.len(), |k| {
            let sub = build_subproblem(network, &khat[k], &y).expect("contingencies resolved above");
            let sol = solve(&sub.lp, &config.lp);
            (sub.coupling, sol)
        });
        let mut second_stage = 0.0;
        for (k, (coupling, sol)) in results.into_iter().enumerate() {
            if sol.status != LpStatus::Optimal {
                return Err(BendersError::Subproblem { label: khat[k].label.clone(), status: sol.status });
            }
            second_stage += weight * sol.objective;
            let cut = make_cut(&sol, &coupling, &y, &khat[k].label, k, it);
            let key = cut_key(&cut);
            match pool.get_mut(&key) {
                Some(old) if old.intercept >= cut.intercept => {}
                Some(old) => *old = cut,
                None => {
                    order.push(key.clone());
                    pool.insert(key, cut);
                }
            }
        }
        let candidate = first_stage + second_stage;
        if candidate < state.upper_bound {
            state.upper_bound = candidate;
            state.best_dispatch = y;
        }
        state.trace.push(TracePoint {
            iter: it,
            lower_bound: state.lower_bound,
            upper_bound: state.upper_bound,
            wall_ms: budget.elapsed_ms(),
        });
        log::debug!("benders {it}: lb {:.8} ub {:.8}", state.lower_bound, state.upper_bound);

        if state.gap() <= config.tol_gap {
            state.stop = StopReason::Converged;
            break;
        }
        if it >= config.max_iter {
            state.stop = StopReason::IterationCap;
            break;
        }
        if budget.expired() {
            state.stop = StopReason::Budget;
            break;
        }
    }
    state.cuts = order.iter().map(|k| pool[k].clone()).collect();
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::{NoClock, Sequential};
    use crate::lblc::build_extensive;
    use crate::netmodel::fixtures::*;
    use crate::netmodel::{Network, PenaltySchedule};
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Three buses in a ring, two units; the cheap unit sits behind a weak line.
    fn ring() -> Network {
        Network::new(
            100.0,
            vec![bus("1", 0.0, 0.0), bus("2", 0.0, 0.0), bus("3", 0.9, 0.0)],
            vec![generator("G1", "1", 0.0, 1.0), generator("G2", "2", 0.1, 0.8)],
            vec![
                line("L12", "1", "2", 0.0, 0.1),
                line("L23", "2", "3", 0.0, 0.2),
                line("L13", "1", "3", 0.0, 0.1),
            ],
            PenaltySchedule::default(),
        )
        .edited(|n| {
            n.generators[0].cost_points = vec![(0.0, 10.0), (0.5, 30.0)];
            n.generators[1].cost_points = vec![(0.0, 20.0)];
            n.generators[0].alpha = 1.0;
            n.generators[1].alpha = 0.5;
        })
    }

    fn extensive_optimum(net: &Network, khat: &[Contingency]) -> f64 {
        let ext = build_extensive(net, khat).unwrap();
        let s = solve(&ext.lp, &LpOptions::default());
        assert_eq!(s.status, LpStatus::Optimal);
        s.objective
    }

    fn run_plain(net: &Network, khat: &[Contingency]) -> BendersState {
        let clock = NoClock;
        run(net, khat, &BendersConfig::default(), &Sequential, &Budget::unlimited(&clock), |_| {}).unwrap()
    }

    #[test]
    fn no_contingencies_stops_after_one_master() {
        let net = ring();
        let st = run_plain(&net, &[]);
        assert_eq!(st.iteration, 1);
        assert_eq!(st.stop, StopReason::Converged);
        assert!((st.upper_bound - extensive_optimum(&net, &[])).abs() < 1e-9);
    }

    #[test]
    fn single_benign_contingency_converges_fast() {
        let net = ring();
        let khat = [Contingency::branch("B23", "L23")];
        let st = run_plain(&net, &khat);
        assert!(st.iteration <= 2);
        let ext = extensive_optimum(&net, &khat);
        assert!((st.upper_bound - ext).abs() <= 1e-6 * ext.abs().max(1.0));
    }

    #[test]
    fn matches_extensive_form_with_costly_contingencies() {
        let net = ring();
        let khat = [
            Contingency::generator("CG1", "G1"),
            Contingency::generator("CG2", "G2"),
            Contingency::branch("B13", "L13"),
            Contingency::branch("B12", "L12"),
        ];
        let mut seen = Vec::new();
        let clock = NoClock;
        let st = run(&net, &khat, &BendersConfig::default(), &Sequential, &Budget::unlimited(&clock), |inc| {
            seen.push(inc.clone())
        })
        .unwrap();
        assert_eq!(st.stop, StopReason::Converged);
        let ext = extensive_optimum(&net, &khat);
        assert!((st.upper_bound - ext).abs() <= 1e-6 * ext.abs().max(1.0), "{} vs {}", st.upper_bound, ext);
        assert!(st.lower_bound <= ext + 1e-6);
        assert_eq!(seen.len(), st.iteration);
        assert!(st.trace.windows(2).all(|w| w[1].lower_bound >= w[0].lower_bound));
        assert!(st.trace.iter().all(|t| t.upper_bound >= t.lower_bound - 1e-6));
    }

    #[test]
    fn cuts_underestimate_subproblem_value() {
        let net = ring();
        let con = Contingency::generator("CG1", "G1");
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let y0 = [0.5, 0.4];
        let sub = build_subproblem(&net, &con, &y0).unwrap();
        let sol = solve(&sub.lp, &LpOptions::default());
        let cut = make_cut(&sol, &sub.coupling, &y0, "CG1", 0, 1);
        assert!((cut.value_at(&y0) - sol.objective).abs() < 1e-7);
        for _ in 0..20 {
            let y = [rng.gen_range(0.0..1.0), rng.gen_range(0.1..0.8)];
            let s = solve(&build_subproblem(&net, &con, &y).unwrap().lp, &LpOptions::default());
            assert!(cut.value_at(&y) <= s.objective + 1e-7);
        }
    }

    #[test]
    fn expired_budget_stops_after_first_iteration() {
        let net = ring();
        let khat = [Contingency::generator("CG1", "G1")];
        let clock = NoClock;
        let st = run(&net, &khat, &BendersConfig::default(), &Sequential, &Budget::start(&clock, Some(0)), |_| {}).unwrap();
        assert_eq!(st.iteration, 1);
        assert!(matches!(st.stop, StopReason::Budget | StopReason::Converged));
    }
}
