//! Tunables shared by every subcommand. Each one can come from a flag, a
//! TOML file given with `--config`, or the built-in default, in that order.

use std::path::Path;

use anyhow::Context;
use clap::{Args, ValueEnum};
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Select {
    Rating,
    Realtime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    LblcExtensive,
    LblcBenders,
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct Tuning {
    /// Worker threads, 0 for one per core.
    #[arg(long, env = "SCOPF_WORKERS")]
    pub workers: Option<usize>,
    /// Contingencies kept by the ranking step.
    #[arg(long)]
    pub khat: Option<usize>,
    #[arg(long, value_enum)]
    pub select: Option<Select>,
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    /// Wall-clock budget in seconds. code1 defaults to 600, code2 to 2 per contingency.
    #[arg(long)]
    pub budget: Option<f64>,
    #[arg(long)]
    pub pf_tolerance: Option<f64>,
    #[arg(long)]
    pub pf_max_iter: Option<usize>,
    /// Relative Benders gap at which the loop stops.
    #[arg(long)]
    pub tol_gap: Option<f64>,
    #[arg(long)]
    pub max_benders_iter: Option<usize>,
    /// Feasibility and optimality tolerance of the simplex.
    #[arg(long)]
    pub lp_tol: Option<f64>,
    /// Allowed response-law residual when scoring, per-unit.
    #[arg(long)]
    pub tau_h: Option<f64>,
    /// Allowed bound violation when scoring.
    #[arg(long)]
    pub bound_tol: Option<f64>,
}

macro_rules! prefer {
    ($a:ident, $b:ident; $($f:ident),*) => {
        Tuning { $($f: $a.$f.or($b.$f)),* }
    };
}

impl Tuning {
    /// Fields set here win over `other`.
    pub fn over(self, other: Tuning) -> Tuning {
        prefer!(self, other; workers, khat, select, method, budget, pf_tolerance, pf_max_iter,
            tol_gap, max_benders_iter, lp_tol, tau_h, bound_tol)
    }

    pub fn from_file(path: &Path) -> anyhow::Result<Tuning> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn settings(&self) -> Settings {
        let d = Settings::default();
        Settings {
            workers: self.workers.unwrap_or(d.workers),
            khat: self.khat.unwrap_or(d.khat),
            select: self.select.unwrap_or(d.select),
            method: self.method.unwrap_or(d.method),
            budget_s: self.budget,
            pf_tolerance: self.pf_tolerance.unwrap_or(d.pf_tolerance),
            pf_max_iter: self.pf_max_iter.unwrap_or(d.pf_max_iter),
            tol_gap: self.tol_gap.unwrap_or(d.tol_gap),
            max_benders_iter: self.max_benders_iter.unwrap_or(d.max_benders_iter),
            lp_tol: self.lp_tol.unwrap_or(d.lp_tol),
            tau_h: self.tau_h.unwrap_or(d.tau_h),
            bound_tol: self.bound_tol.unwrap_or(d.bound_tol),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub workers: usize,
    pub khat: usize,
    pub select: Select,
    pub method: Method,
    /// None means the subcommand's own default.
    pub budget_s: Option<f64>,
    pub pf_tolerance: f64,
    pub pf_max_iter: usize,
    pub tol_gap: f64,
    pub max_benders_iter: usize,
    pub lp_tol: f64,
    pub tau_h: f64,
    pub bound_tol: f64,
}

impl Default for Settings {
    fn default() -> Self {
        let benders = scopf_core::benders::BendersConfig::default();
        let eval = scopf_core::evaluator::EvalTolerances::default();
        Self {
            workers: 0,
            khat: 5,
            select: Select::Rating,
            method: Method::LblcBenders,
            budget_s: None,
            pf_tolerance: scopf_core::pfsolve::PfSpec::DEFAULT_TOLERANCE,
            pf_max_iter: scopf_core::pfsolve::PfSpec::DEFAULT_MAX_ITER,
            tol_gap: benders.tol_gap,
            max_benders_iter: benders.max_iter,
            lp_tol: benders.lp.feasibility_tol,
            tau_h: eval.tau_h,
            bound_tol: eval.bound,
        }
    }
}

impl Settings {
    pub fn lp_options(&self) -> scopf_core::lpsolve::LpOptions {
        scopf_core::lpsolve::LpOptions {
            feasibility_tol: self.lp_tol,
            optimality_tol: self.lp_tol,
            ..Default::default()
        }
    }

    pub fn benders(&self) -> scopf_core::benders::BendersConfig {
        scopf_core::benders::BendersConfig {
            tol_gap: self.tol_gap,
            max_iter: self.max_benders_iter,
            lp: self.lp_options(),
        }
    }
}

/// Budget in whole milliseconds; negative or NaN means none left.
pub fn budget_ms(seconds: f64) -> u64 {
    if seconds.is_nan() || seconds <= 0.0 {
        0
    } else {
        (seconds * 1000.0).min(u64::MAX as f64) as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_beat_file_beat_defaults() {
        let file: Tuning = toml::from_str("khat = 3\ntol-gap = 1e-4\nmethod = \"lblc-extensive\"\n").unwrap();
        let flags = Tuning { khat: Some(7), ..Default::default() };
        let s = flags.over(file).settings();
        assert_eq!(s.khat, 7);
        assert_eq!(s.tol_gap, 1e-4);
        assert_eq!(s.method, Method::LblcExtensive);
        assert_eq!(s.pf_max_iter, Settings::default().pf_max_iter);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<Tuning>("kaht = 3\n").is_err());
    }

    #[test]
    fn budget_conversion() {
        assert_eq!(budget_ms(0.0), 0);
        assert_eq!(budget_ms(-1.0), 0);
        assert_eq!(budget_ms(1.5), 1500);
    }
}
