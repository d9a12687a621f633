//! The four subcommands as library functions.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::{mpsc, Mutex};

use anyhow::Context;
use scopf_core::acfun::{base_cost, case_penalty};
use scopf_core::benders::{self, StopReason};
use scopf_core::corrective::{run_all, CorrectiveConfig, Provenance};
use scopf_core::evaluator::{midpoint_point, score, EvalTolerances, ScoreReport};
use scopf_core::exec::Budget;
use scopf_core::lblc::build_extensive;
use scopf_core::lpsolve::{solve, LpStatus};
use scopf_core::ranking::{rank_by_rating, rank_by_realtime, RankedContingency};
use scopf_core::recovery::{recover_base, RecoveryConfig};
use scopf_core::{Case, Contingency, Network, OperatingPoint};

use crate::caseio::{self, fmt8};
use crate::config::{budget_ms, Method, Select, Settings};
use crate::runtime::{PoolExecutor, WallClock};

/// Default code1 budget in seconds.
pub const CODE1_BUDGET_S: f64 = 600.0;
/// Default code2 budget per contingency, in seconds.
pub const CODE2_BUDGET_PER_CONTINGENCY_S: f64 = 2.0;

/// How a run ended when it did produce its output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Complete,
    /// Output written, but from a fallback or before convergence.
    Degraded,
}

impl Outcome {
    pub fn exit_code(self) -> u8 {
        match self {
            Outcome::Complete => 0,
            Outcome::Degraded => 3,
        }
    }

    fn worst(self, other: Outcome) -> Outcome {
        if self == Outcome::Degraded || other == Outcome::Degraded {
            Outcome::Degraded
        } else {
            Outcome::Complete
        }
    }
}

pub fn load(case: &Path, con: &Path) -> anyhow::Result<(Network, Vec<Contingency>)> {
    let net = caseio::read_case(case).with_context(|| format!("case {}", case.display()))?;
    let cons = caseio::read_contingencies(con, &net).with_context(|| format!("contingencies {}", con.display()))?;
    Ok((net, cons))
}

/// Ranks with `select`, dropping to rating when realtime has no prior point.
pub fn rank(
    net: &Network,
    cons: &[Contingency],
    select: Select,
    warm_point: Option<&Path>,
    khat: usize,
) -> anyhow::Result<Vec<RankedContingency>> {
    let prior = match (select, warm_point) {
        (Select::Rating, _) => None,
        (Select::Realtime, None) => {
            log::warn!("realtime ranking needs --warm-point; ranking by rating instead");
            None
        }
        (Select::Realtime, Some(path)) => match caseio::read_solution1(path, net) {
            Ok(p) => Some(p),
            Err(e) => {
                log::warn!("warm point {} unusable ({e}); ranking by rating instead", path.display());
                None
            }
        },
    };
    Ok(match prior {
        Some(p) => rank_by_realtime(net, cons, &p, khat)?,
        None => rank_by_rating(net, cons, khat)?,
    })
}

pub struct Code1Paths {
    pub case: PathBuf,
    pub con: PathBuf,
    pub out: PathBuf,
    /// Benders convergence trace; `<out>.trace.csv` when absent.
    pub trace: Option<PathBuf>,
    pub warm_point: Option<PathBuf>,
}

/// Writes solution1 whenever a candidate beats what is on disk.
struct Emitter<'a> {
    net: &'a Network,
    path: &'a Path,
    best: Mutex<f64>,
}

impl<'a> Emitter<'a> {
    fn new(net: &'a Network, path: &'a Path) -> Self {
        Self { net, path, best: Mutex::new(f64::INFINITY) }
    }

    fn objective(&self, point: &OperatingPoint) -> f64 {
        base_cost(self.net, point) + case_penalty(self.net, point, Case::Base, 1.0)
    }

    /// True when the file was replaced.
    fn offer(&self, point: &OperatingPoint, what: &str) -> anyhow::Result<bool> {
        let obj = self.objective(point);
        let mut best = self.best.lock().expect("emitter lock");
        if !(obj < *best) {
            log::debug!("{what}: base objective {obj:.6} does not improve {:.6}", *best);
            return Ok(false);
        }
        caseio::write_solution1(self.path, self.net, point)
            .with_context(|| format!("writing {}", self.path.display()))?;
        *best = obj;
        log::info!("solution1 written from {what}, base objective {obj:.6}");
        Ok(true)
    }
}

fn recovery_config(settings: &Settings) -> RecoveryConfig {
    RecoveryConfig {
        v_target: None,
        pf_tolerance: Some(settings.pf_tolerance),
        pf_max_iter: Some(settings.pf_max_iter),
    }
}

pub fn code1(paths: &Code1Paths, settings: &Settings) -> anyhow::Result<Outcome> {
    let clock = WallClock::new();
    let budget = Budget::start(&clock, Some(budget_ms(settings.budget_s.unwrap_or(CODE1_BUDGET_S))));
    let (net, cons) = load(&paths.case, &paths.con)?;
    let ranked = rank(&net, &cons, settings.select, paths.warm_point.as_deref(), settings.khat)?;
    let khat: Vec<Contingency> = ranked.into_iter().map(|r| r.contingency).collect();

    let emitter = Emitter::new(&net, &paths.out);
    emitter.offer(&midpoint_point(&net, Case::Base), "midpoint fallback")?;
    if budget.expired() {
        log::warn!("budget spent before solving; midpoint fallback stands");
        return Ok(Outcome::Degraded);
    }

    let rcfg = recovery_config(settings);
    let recover = |y: &[f64], what: &str| -> anyhow::Result<Outcome> {
        let r = recover_base(&net, y, &rcfg);
        emitter.offer(&r.point, what)?;
        Ok(if r.converged && !r.fallback { Outcome::Complete } else { Outcome::Degraded })
    };

    match settings.method {
        Method::LblcExtensive => {
            let ext = build_extensive(&net, &khat)?;
            let sol = solve(&ext.lp, &settings.lp_options());
            if sol.status != LpStatus::Optimal {
                log::error!("extensive LP ended with status {:?}", sol.status);
                return Ok(Outcome::Degraded);
            }
            log::info!("extensive LP objective {:.8}", sol.objective);
            if budget.expired() {
                log::warn!("budget expired after the LP; skipping recovery");
                return Ok(Outcome::Degraded);
            }
            recover(&ext.base.dispatch(&sol.x), "extensive LP")
        }
        Method::LblcBenders => {
            let pool = PoolExecutor::new(settings.workers)?;
            let config = settings.benders();
            let (state, recovered) = std::thread::scope(|s| {
                let (tx, rx) = mpsc::channel::<Vec<f64>>();
                let recover = &recover;
                let worker = s.spawn(move || -> anyhow::Result<Outcome> {
                    let mut outcome = Outcome::Degraded;
                    let mut last: Option<Vec<f64>> = None;
                    while let Ok(mut y) = rx.recv() {
                        // only the newest dispatch is worth recovering
                        while let Ok(newer) = rx.try_recv() {
                            y = newer;
                        }
                        if budget.expired() || last.as_ref() == Some(&y) {
                            continue;
                        }
                        outcome = recover(&y, "benders incumbent")?;
                        last = Some(y);
                    }
                    Ok(outcome)
                });
                let state = benders::run(&net, &khat, &config, &pool, &budget, |inc| {
                    let _ = tx.send(inc.dispatch.clone());
                });
                if let Ok(st) = &state {
                    let _ = tx.send(st.best_dispatch.clone());
                }
                drop(tx);
                (state, worker.join().expect("recovery thread panicked"))
            });
            let state = match state {
                Ok(s) => s,
                Err(e) => {
                    log::error!("benders failed: {e}");
                    return Ok(Outcome::Degraded);
                }
            };
            let trace = paths.trace.clone().unwrap_or_else(|| trace_path(&paths.out));
            caseio::write_atomic(&trace, &state.trace_csv())
                .with_context(|| format!("writing {}", trace.display()))?;
            let solved = match state.stop {
                StopReason::Converged => {
                    log::info!("benders converged in {} iterations, gap {:.3e}", state.iteration, state.gap());
                    Outcome::Complete
                }
                StopReason::IterationCap => {
                    log::warn!("benders hit the iteration cap ({}) with gap {:.3e}", state.iteration, state.gap());
                    Outcome::Degraded
                }
                StopReason::Budget => {
                    log::warn!("budget expired after {} benders iterations with gap {:.3e}", state.iteration, state.gap());
                    Outcome::Degraded
                }
            };
            Ok(solved.worst(recovered?))
        }
    }
}

pub fn trace_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".trace.csv");
    out.with_file_name(name)
}

pub struct Code2Paths {
    pub case: PathBuf,
    pub con: PathBuf,
    pub solution1: PathBuf,
    pub out: PathBuf,
}

pub fn code2(paths: &Code2Paths, settings: &Settings) -> anyhow::Result<Outcome> {
    let clock = WallClock::new();
    let (net, cons) = load(&paths.case, &paths.con)?;
    let k = cons.len().max(1);
    let total_s = settings.budget_s.unwrap_or(CODE2_BUDGET_PER_CONTINGENCY_S * k as f64);
    let total_ms = budget_ms(total_s);
    let total = Budget::start(&clock, Some(total_ms));

    let mut outcome = Outcome::Complete;
    let base = match caseio::read_solution1(&paths.solution1, &net) {
        Ok(p) => p,
        Err(e) => {
            log::error!("solution1 unusable ({e}); solving against the midpoint base");
            outcome = Outcome::Degraded;
            midpoint_point(&net, Case::Base)
        }
    };

    let pool = PoolExecutor::new(settings.workers)?;
    let config = CorrectiveConfig { pf_tolerance: settings.pf_tolerance, pf_max_iter: settings.pf_max_iter };
    let per = total_ms / k as u64;
    let sols = run_all(&net, &base, &cons, &pool, &clock, &total, Some(per), &config)?;
    for s in &sols {
        log::info!("{},{},{:.6},{}", s.label, s.provenance, s.cost, s.wall_ms);
        if s.provenance == Provenance::FallbackMidpoint {
            outcome = Outcome::Degraded;
        }
    }
    caseio::write_solution2(&paths.out, &net, sols.iter().map(|s| (s.label.as_str(), &s.point)))
        .with_context(|| format!("writing {}", paths.out.display()))?;
    Ok(outcome)
}

pub struct ScorePaths {
    pub case: PathBuf,
    pub con: PathBuf,
    pub solution1: PathBuf,
    pub solution2: PathBuf,
}

pub fn run_score(paths: &ScorePaths, settings: &Settings) -> anyhow::Result<ScoreReport> {
    let (net, cons) = load(&paths.case, &paths.con)?;
    let sol1 = caseio::read_solution1(&paths.solution1, &net);
    let sol2 = caseio::read_solution2(&paths.solution2, &net);
    let tol = EvalTolerances { tau_h: settings.tau_h, bound: settings.bound_tol };
    let e1 = sol1.as_ref().err().map(|e| e.to_string());
    let e2 = sol2.as_ref().err().map(|e| e.to_string());
    let r1 = sol1.as_ref().map_err(|_| e1.as_deref().unwrap_or(""));
    let r2 = sol2.as_deref().map_err(|_| e2.as_deref().unwrap_or(""));
    Ok(score(&net, &cons, r1, r2, &tol)?)
}

/// CSV breakdown followed by the `SCORE=` line.
pub fn format_report(report: &ScoreReport) -> String {
    let mut out = String::from("item,value\n");
    let _ = writeln!(out, "c_slack,{}", fmt8(report.c_slack));
    match report.c_star {
        Some(c) => {
            let _ = writeln!(out, "c_star,{}", fmt8(c));
        }
        None => out.push_str("c_star,\n"),
    }
    match &report.failure {
        Some(f) => {
            let _ = writeln!(out, "status,\"rejected at {f}\"");
        }
        None => out.push_str("status,valid\n"),
    }
    let b = report.breakdown.as_ref().unwrap_or(&report.slack_breakdown);
    let _ = writeln!(out, "base_cost,{}", fmt8(b.base_cost));
    let _ = writeln!(out, "base_penalty,{}", fmt8(b.base_penalty));
    for (label, c) in &b.contingency_penalties {
        let _ = writeln!(out, "penalty:{label},{}", fmt8(*c));
    }
    let _ = writeln!(out, "SCORE={}", fmt8(report.c_score));
    out
}

pub fn format_ranking(ranked: &[RankedContingency]) -> String {
    let mut out = String::new();
    for r in ranked {
        let _ = writeln!(out, "{},{}", r.contingency.label, fmt8(r.rank));
    }
    out
}
