//! Linear base, linear contingency (DC) programs: the extensive form over a
//! reduced contingency set, and the Benders master and subproblems.
//!
//! Every case gets a DC block: bus angles, generator outputs and per-bus
//! balance slacks split into penalty segments. Flows are
//! `(θ_from − θ_to − phase)/x`; fixed shunt conductance is treated as load at
//! unit voltage. Contingency blocks add a free adjustment `Δ_k` and one row
//! per surviving generator tying its output to the base dispatch:
//! `p_gk − p_g0 − α_g·Δ_k = 0`.

use alloc::vec;
use alloc::vec::Vec;

use crate::benders::Cut;
use crate::lpsolve::LpProblem;
use crate::netmodel::{Case, Contingency, ModelError, Network};

/// Variable and row indices of one case inside an [`LpProblem`].
#[derive(Debug, Clone, PartialEq)]
pub struct DcCaseBlock {
    pub case: Case,
    /// Per bus; the reference bus is pinned at zero.
    pub theta: Vec<usize>,
    /// Per generator; an outaged unit is pinned at zero.
    pub p: Vec<usize>,
    /// `(plus, minus)` segment variables per bus.
    pub slack: Vec<(Vec<usize>, Vec<usize>)>,
    pub delta: Option<usize>,
    pub balance_rows: Vec<usize>,
}

/// Rows of a contingency block whose right-hand side is the base dispatch.
/// `None` for the outaged generator, which has no coupling.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMap {
    pub rows: Vec<Option<usize>>,
}

#[derive(Debug, Clone)]
pub struct Extensive {
    pub lp: LpProblem,
    pub base: DcCaseBlock,
    pub blocks: Vec<DcCaseBlock>,
    pub coupling: Vec<CouplingMap>,
}

#[derive(Debug, Clone)]
pub struct Master {
    pub lp: LpProblem,
    pub base: DcCaseBlock,
    /// Epigraph variable per contingency, weighted by `1/K̂`.
    pub eta: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Subproblem {
    pub lp: LpProblem,
    pub block: DcCaseBlock,
    pub coupling: CouplingMap,
}

fn add_block(lp: &mut LpProblem, net: &Network, case: Case, penalty_weight: f64, with_cost: bool) -> DcCaseBlock {
    let reference = net.reference_bus();
    let theta: Vec<usize> = (0..net.n_buses())
        .map(|b| {
            if b == reference {
                lp.add_var(0.0, 0.0, 0.0)
            } else {
                lp.add_var(0.0, f64::NEG_INFINITY, f64::INFINITY)
            }
        })
        .collect();

    let mut cost_terms: Vec<Vec<(usize, f64)>> = Vec::new();
    let p: Vec<usize> = net
        .generators()
        .iter()
        .enumerate()
        .map(|(g, gen)| {
            if !case.generator_in_service(g) {
                return lp.add_var(0.0, 0.0, 0.0);
            }
            let var = lp.add_var(0.0, gen.p_min, gen.p_max);
            if with_cost {
                // p − Σ seg = p_min, cost(p_min) in the offset
                let mut row = vec![(var, 1.0)];
                for (width, slope) in gen.cost_segments() {
                    let s = lp.add_var(slope, 0.0, width);
                    row.push((s, -1.0));
                }
                lp.offset += gen.cost(gen.p_min);
                cost_terms.push(row);
            }
            var
        })
        .collect();
    for row in cost_terms {
        let g = row[0].0;
        let (lo, _) = lp.bounds(g);
        lp.add_row(row, lo);
    }

    let blocks = &net.penalties().balance;
    let slack: Vec<(Vec<usize>, Vec<usize>)> = (0..net.n_buses())
        .map(|_| {
            let mut seg = || {
                blocks
                    .iter()
                    .map(|b| lp.add_var(penalty_weight * b.price, 0.0, b.width))
                    .collect::<Vec<_>>()
            };
            (seg(), seg())
        })
        .collect();

    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); net.n_buses()];
    let mut rhs: Vec<f64> = net.buses().iter().map(|b| b.p_load + b.g_shunt_fixed).collect();
    for g in 0..net.n_generators() {
        rows[net.generator_bus(g)].push((p[g], 1.0));
    }
    for (l, br) in net.branches().iter().enumerate() {
        if !case.branch_in_service(l) {
            continue;
        }
        let (f, t) = net.branch_ends(l);
        let k = 1.0 / br.x;
        // outflow at f: k·(θf − θt − φ); inflow at t the same
        rows[f].push((theta[f], -k));
        rows[f].push((theta[t], k));
        rhs[f] -= k * br.phase;
        rows[t].push((theta[f], k));
        rows[t].push((theta[t], -k));
        rhs[t] += k * br.phase;
    }
    let balance_rows = rows
        .into_iter()
        .zip(rhs)
        .enumerate()
        .map(|(b, (mut terms, r))| {
            terms.extend(slack[b].0.iter().map(|&s| (s, -1.0)));
            terms.extend(slack[b].1.iter().map(|&s| (s, 1.0)));
            lp.add_row(terms, r)
        })
        .collect();

    let delta = (!case.is_base()).then(|| lp.add_var(0.0, f64::NEG_INFINITY, f64::INFINITY));
    DcCaseBlock { case, theta, p, slack, delta, balance_rows }
}

/// Adds `p_gk − α_g·Δ_k − Σ coef·x = rhs` for every surviving generator.
/// `base` gives the base-dispatch column (extensive form) or is absent, in
/// which case the dispatch enters as `rhs[g]`.
fn add_coupling(lp: &mut LpProblem, net: &Network, block: &DcCaseBlock, base: Option<&DcCaseBlock>, y: &[f64]) -> CouplingMap {
    let delta = block.delta.expect("contingency block");
    let rows = net
        .generators()
        .iter()
        .enumerate()
        .map(|(g, gen)| {
            if !block.case.generator_in_service(g) {
                return None;
            }
            let mut terms = vec![(block.p[g], 1.0), (delta, -gen.alpha)];
            let rhs = match base {
                Some(b) => {
                    terms.push((b.p[g], -1.0));
                    0.0
                }
                None => y[g],
            };
            Some(lp.add_row(terms, rhs))
        })
        .collect();
    CouplingMap { rows }
}

/// Full LBLC program over `khat`. An empty set gives the plain DC OPF.
pub fn build_extensive(network: &Network, khat: &[Contingency]) -> Result<Extensive, ModelError> {
    let cases = network.cases_of(khat)?;
    let mut lp = LpProblem::new();
    let base = add_block(&mut lp, network, Case::Base, 1.0, true);
    let weight = if cases.is_empty() { 0.0 } else { 1.0 / cases.len() as f64 };
    let mut blocks = Vec::with_capacity(cases.len());
    let mut coupling = Vec::with_capacity(cases.len());
    for case in cases {
        let block = add_block(&mut lp, network, case, weight, false);
        coupling.push(add_coupling(&mut lp, network, &block, Some(&base), &[]));
        blocks.push(block);
    }
    Ok(Extensive { lp, base, blocks, coupling })
}

/// Base-case DC OPF plus one epigraph variable per contingency bounded
/// below by zero and by every cut in `cuts` that targets it.
pub fn build_master(network: &Network, n_contingencies: usize, cuts: &[Cut]) -> Master {
    let mut lp = LpProblem::new();
    let base = add_block(&mut lp, network, Case::Base, 1.0, true);
    let weight = if n_contingencies == 0 { 0.0 } else { 1.0 / n_contingencies as f64 };
    let eta: Vec<usize> = (0..n_contingencies).map(|_| lp.add_var(weight, 0.0, f64::INFINITY)).collect();
    for cut in cuts {
        // η − grad·p − s = intercept,  s ≥ 0
        let surplus = lp.add_var(0.0, 0.0, f64::INFINITY);
        let mut terms = vec![(eta[cut.block], 1.0), (surplus, -1.0)];
        terms.extend(
            cut.gradient
                .iter()
                .enumerate()
                .filter(|(_, &g)| g != 0.0)
                .map(|(g, &coef)| (base.p[g], -coef)),
        );
        lp.add_row(terms, cut.intercept);
    }
    Master { lp, base, eta }
}

/// Contingency block alone with the base dispatch fixed at `y_fixed`.
/// Objective is the block's unweighted penalty.
pub fn build_subproblem(network: &Network, contingency: &Contingency, y_fixed: &[f64]) -> Result<Subproblem, ModelError> {
    let case = network.case_of(contingency)?;
    let mut lp = LpProblem::new();
    let block = add_block(&mut lp, network, case, 1.0, false);
    let coupling = add_coupling(&mut lp, network, &block, None, y_fixed);
    Ok(Subproblem { lp, block, coupling })
}

impl Subproblem {
    /// Re-targets the coupling rows at a new base dispatch.
    pub fn set_dispatch(&mut self, y: &[f64]) {
        for (g, row) in self.coupling.rows.iter().enumerate() {
            if let Some(r) = *row {
                self.lp.set_rhs(r, y[g]);
            }
        }
    }
}

impl DcCaseBlock {
    /// Generator outputs of this block in a solution vector.
    pub fn dispatch(&self, x: &[f64]) -> Vec<f64> {
        self.p.iter().map(|&j| x[j]).collect()
    }

    /// Net balance slack `plus − minus` per bus.
    pub fn net_slack(&self, x: &[f64]) -> Vec<f64> {
        self.slack
            .iter()
            .map(|(plus, minus)| {
                plus.iter().map(|&j| x[j]).sum::<f64>() - minus.iter().map(|&j| x[j]).sum::<f64>()
            })
            .collect()
    }
}
