//! Grid description, contingencies and the per-case bound sets.
//!
//! All quantities are per-unit on [`Network::base_power`]; angles are in
//! radians and costs in money per hour.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    pub id: String,
    pub v_min: f64,
    pub v_max: f64,
    pub v_min_emerg: f64,
    pub v_max_emerg: f64,
    pub p_load: f64,
    pub q_load: f64,
    pub g_shunt_fixed: f64,
    pub b_shunt_fixed: f64,
    pub b_cs_min: f64,
    pub b_cs_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub id: String,
    pub bus: String,
    pub p_min: f64,
    pub p_max: f64,
    pub q_min: f64,
    pub q_max: f64,
    /// Share of the post-contingency real-power adjustment.
    pub alpha: f64,
    /// `(p, marginal cost)` breakpoints. The marginal cost applies from its
    /// breakpoint to the next one; the last applies without limit. Cost is
    /// zero at the first breakpoint.
    pub cost_points: Vec<(f64, f64)>,
}

impl Generator {
    /// Convex piecewise-linear generation cost at output `p`.
    pub fn cost(&self, p: f64) -> f64 {
        let pts = &self.cost_points;
        let Some(&(p0, m0)) = pts.first() else {
            return 0.0;
        };
        if p <= p0 {
            return m0 * (p - p0);
        }
        let mut total = 0.0;
        for (j, &(start, slope)) in pts.iter().enumerate() {
            if p <= start {
                break;
            }
            let end = pts.get(j + 1).map_or(p, |&(next, _)| next.min(p));
            total += slope * (end - start);
        }
        total
    }

    fn marginal_at(&self, p: f64) -> f64 {
        let mut slope = self.cost_points.first().map_or(0.0, |&(_, m)| m);
        for &(start, m) in &self.cost_points {
            if start <= p {
                slope = m;
            } else {
                break;
            }
        }
        slope
    }

    /// Cost curve restricted to `[p_min, p_max]` as `(width, slope)` pieces,
    /// in increasing order of `p`. `cost(p_min) + Σ slope·fill` reproduces
    /// [`Generator::cost`] when the pieces are filled greedily.
    pub fn cost_segments(&self) -> Vec<(f64, f64)> {
        let mut cuts: Vec<f64> = vec![self.p_min];
        cuts.extend(
            self.cost_points
                .iter()
                .map(|&(p, _)| p)
                .filter(|&p| p > self.p_min && p < self.p_max),
        );
        cuts.push(self.p_max);
        cuts.windows(2)
            .filter(|w| w[1] > w[0])
            .map(|w| (w[1] - w[0], self.marginal_at(w[0])))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub id: String,
    pub from_bus: String,
    pub to_bus: String,
    pub r: f64,
    pub x: f64,
    /// Total line charging susceptance.
    pub b_ch: f64,
    /// Off-nominal turns ratio on the from side; 1 for lines.
    pub tap: f64,
    /// Phase shift in radians; 0 for lines.
    pub phase: f64,
    pub rating_normal: f64,
    pub rating_emerg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyBlock {
    pub width: f64,
    pub price: f64,
}

/// Convex block schedules for constraint violations. The final block of each
/// schedule has infinite width.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltySchedule {
    pub balance: Vec<PenaltyBlock>,
    pub rating: Vec<PenaltyBlock>,
}

impl Default for PenaltySchedule {
    fn default() -> Self {
        let blocks = vec![
            PenaltyBlock { width: 0.02, price: 1e3 },
            PenaltyBlock { width: 0.48, price: 5e3 },
            PenaltyBlock { width: f64::INFINITY, price: 1e6 },
        ];
        Self { balance: blocks.clone(), rating: blocks }
    }
}

impl PenaltySchedule {
    /// Cost of a single violation of size `amount` filled into `blocks` in order.
    pub fn block_cost(blocks: &[PenaltyBlock], amount: f64) -> f64 {
        let mut left = amount.max(0.0);
        let mut cost = 0.0;
        for b in blocks {
            if left <= 0.0 {
                break;
            }
            let used = left.min(b.width);
            cost += used * b.price;
            left -= used;
        }
        cost
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ContingencyKind {
    GeneratorOutage,
    BranchOutage,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Contingency {
    pub label: String,
    pub kind: ContingencyKind,
    pub element: String,
}

impl Contingency {
    pub fn generator(label: impl Into<String>, element: impl Into<String>) -> Self {
        Self { label: label.into(), kind: ContingencyKind::GeneratorOutage, element: element.into() }
    }

    pub fn branch(label: impl Into<String>, element: impl Into<String>) -> Self {
        Self { label: label.into(), kind: ContingencyKind::BranchOutage, element: element.into() }
    }
}

/// Resolved case index: the base case or one outaged element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Case {
    Base,
    GeneratorOut(usize),
    BranchOut(usize),
}

impl Case {
    pub fn is_base(self) -> bool {
        matches!(self, Case::Base)
    }

    pub fn generator_in_service(self, g: usize) -> bool {
        self != Case::GeneratorOut(g)
    }

    pub fn branch_in_service(self, l: usize) -> bool {
        self != Case::BranchOut(l)
    }
}

/// One broken rule, naming the offending record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub record: String,
    pub rule: String,
}

impl Violation {
    fn new(record: impl Into<String>, rule: impl Into<String>) -> Self {
        Self { record: record.into(), rule: rule.into() }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.record, self.rule)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelError {
    UnknownElement { label: String, element: String },
    Invalid(Vec<Violation>),
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelError::UnknownElement { label, element } => {
                write!(f, "contingency {label}: unknown element {element}")
            }
            ModelError::Invalid(v) => {
                write!(f, "{} model violation(s)", v.len())?;
                for item in v {
                    write!(f, "; {item}")?;
                }
                Ok(())
            }
        }
    }
}

impl core::error::Error for ModelError {}

/// Plain, editable form of a [`Network`].
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParts {
    pub base_power: f64,
    pub buses: Vec<Bus>,
    pub generators: Vec<Generator>,
    pub branches: Vec<Branch>,
    pub penalties: PenaltySchedule,
}

/// Immutable grid description with resolved bus references.
#[derive(Debug, Clone)]
pub struct Network {
    base_power: f64,
    buses: Vec<Bus>,
    generators: Vec<Generator>,
    branches: Vec<Branch>,
    penalties: PenaltySchedule,
    bus_lookup: BTreeMap<String, usize>,
    gen_lookup: BTreeMap<String, usize>,
    branch_lookup: BTreeMap<String, usize>,
    gen_bus: Vec<Option<usize>>,
    branch_ends: Vec<Option<(usize, usize)>>,
    gens_at_bus: Vec<Vec<usize>>,
}

impl Network {
    /// Builds the model without checking it; see [`validate`] and
    /// [`Network::checked`]. The first occurrence wins for duplicate ids.
    pub fn new(
        base_power: f64,
        buses: Vec<Bus>,
        generators: Vec<Generator>,
        branches: Vec<Branch>,
        penalties: PenaltySchedule,
    ) -> Self {
        fn index<'a>(ids: impl Iterator<Item = &'a String>) -> BTreeMap<String, usize> {
            let mut map = BTreeMap::new();
            for (i, id) in ids.enumerate() {
                map.entry(id.clone()).or_insert(i);
            }
            map
        }
        let bus_lookup = index(buses.iter().map(|b| &b.id));
        let gen_lookup = index(generators.iter().map(|g| &g.id));
        let branch_lookup = index(branches.iter().map(|l| &l.id));
        let gen_bus: Vec<Option<usize>> =
            generators.iter().map(|g| bus_lookup.get(&g.bus).copied()).collect();
        let branch_ends = branches
            .iter()
            .map(|l| Some((*bus_lookup.get(&l.from_bus)?, *bus_lookup.get(&l.to_bus)?)))
            .collect();
        let mut gens_at_bus = vec![Vec::new(); buses.len()];
        for (g, b) in gen_bus.iter().enumerate() {
            if let Some(b) = b {
                gens_at_bus[*b].push(g);
            }
        }
        Self {
            base_power,
            buses,
            generators,
            branches,
            penalties,
            bus_lookup,
            gen_lookup,
            branch_lookup,
            gen_bus,
            branch_ends,
            gens_at_bus,
        }
    }

    pub fn from_parts(parts: NetworkParts) -> Self {
        Self::new(parts.base_power, parts.buses, parts.generators, parts.branches, parts.penalties)
    }

    pub fn to_parts(&self) -> NetworkParts {
        NetworkParts {
            base_power: self.base_power,
            buses: self.buses.clone(),
            generators: self.generators.clone(),
            branches: self.branches.clone(),
            penalties: self.penalties.clone(),
        }
    }

    /// Copy of this network with `edit` applied.
    pub fn edited(&self, edit: impl FnOnce(&mut NetworkParts)) -> Self {
        let mut parts = self.to_parts();
        edit(&mut parts);
        Self::from_parts(parts)
    }

    /// Builds and validates.
    pub fn checked(
        base_power: f64,
        buses: Vec<Bus>,
        generators: Vec<Generator>,
        branches: Vec<Branch>,
        penalties: PenaltySchedule,
    ) -> Result<Self, ModelError> {
        let net = Self::new(base_power, buses, generators, branches, penalties);
        let v = validate(&net);
        if v.is_empty() {
            Ok(net)
        } else {
            Err(ModelError::Invalid(v))
        }
    }

    pub fn base_power(&self) -> f64 {
        self.base_power
    }

    pub fn buses(&self) -> &[Bus] {
        &self.buses
    }

    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn penalties(&self) -> &PenaltySchedule {
        &self.penalties
    }

    pub fn n_buses(&self) -> usize {
        self.buses.len()
    }

    pub fn n_generators(&self) -> usize {
        self.generators.len()
    }

    pub fn n_branches(&self) -> usize {
        self.branches.len()
    }

    pub fn bus_index(&self, id: &str) -> Option<usize> {
        self.bus_lookup.get(id).copied()
    }

    pub fn generator_index(&self, id: &str) -> Option<usize> {
        self.gen_lookup.get(id).copied()
    }

    pub fn branch_index(&self, id: &str) -> Option<usize> {
        self.branch_lookup.get(id).copied()
    }

    /// Bus index of generator `g`. Panics on a network that failed validation.
    pub fn generator_bus(&self, g: usize) -> usize {
        self.gen_bus[g].expect("generator references a missing bus")
    }

    /// `(from, to)` bus indices of branch `l`.
    pub fn branch_ends(&self, l: usize) -> (usize, usize) {
        self.branch_ends[l].expect("branch references a missing bus")
    }

    pub fn generators_at(&self, bus: usize) -> &[usize] {
        &self.gens_at_bus[bus]
    }

    /// Angle reference for linearized models: the first bus (in file order)
    /// hosting a generator, else bus 0.
    pub fn reference_bus(&self) -> usize {
        (0..self.buses.len()).find(|&b| !self.gens_at_bus[b].is_empty()).unwrap_or(0)
    }

    pub fn case_of(&self, contingency: &Contingency) -> Result<Case, ModelError> {
        let unknown = || ModelError::UnknownElement {
            label: contingency.label.clone(),
            element: contingency.element.clone(),
        };
        match contingency.kind {
            ContingencyKind::GeneratorOutage => {
                self.generator_index(&contingency.element).map(Case::GeneratorOut).ok_or_else(unknown)
            }
            ContingencyKind::BranchOutage => {
                self.branch_index(&contingency.element).map(Case::BranchOut).ok_or_else(unknown)
            }
        }
    }

    /// Resolves a whole contingency list, failing on the first unknown element.
    pub fn cases_of(&self, contingencies: &[Contingency]) -> Result<Vec<Case>, ModelError> {
        contingencies.iter().map(|c| self.case_of(c)).collect()
    }
}

/// Checks every model invariant; an empty list means the network is valid.
pub fn validate(network: &Network) -> Vec<Violation> {
    let mut out = Vec::new();
    if !(network.base_power > 0.0 && network.base_power.is_finite()) {
        out.push(Violation::new("meta", "base_power must be positive and finite"));
    }
    let dupes = |ids: &mut dyn Iterator<Item = &String>, what: &str, out: &mut Vec<Violation>| {
        let mut seen = BTreeMap::new();
        for id in ids {
            if seen.insert(id.clone(), ()).is_some() {
                out.push(Violation::new(format!("{what} {id}"), "duplicate id"));
            }
        }
    };
    dupes(&mut network.buses.iter().map(|b| &b.id), "bus", &mut out);
    dupes(&mut network.generators.iter().map(|g| &g.id), "generator", &mut out);
    dupes(&mut network.branches.iter().map(|l| &l.id), "branch", &mut out);

    for b in &network.buses {
        let rec = || format!("bus {}", b.id);
        let vals = [
            b.v_min, b.v_max, b.v_min_emerg, b.v_max_emerg, b.p_load, b.q_load, b.g_shunt_fixed,
            b.b_shunt_fixed, b.b_cs_min, b.b_cs_max,
        ];
        if vals.iter().any(|v| !v.is_finite()) {
            out.push(Violation::new(rec(), "non-finite field"));
        }
        if b.v_min > b.v_max {
            out.push(Violation::new(rec(), "v_min > v_max"));
        }
        if b.v_min_emerg > b.v_min {
            out.push(Violation::new(rec(), "v_min_emerg > v_min"));
        }
        if b.v_max > b.v_max_emerg {
            out.push(Violation::new(rec(), "v_max > v_max_emerg"));
        }
        if b.b_cs_min > b.b_cs_max {
            out.push(Violation::new(rec(), "b_cs_min > b_cs_max"));
        }
    }

    for (i, g) in network.generators.iter().enumerate() {
        let rec = || format!("generator {}", g.id);
        if network.gen_bus[i].is_none() {
            out.push(Violation::new(rec(), format!("references missing bus {}", g.bus)));
        }
        let vals = [g.p_min, g.p_max, g.q_min, g.q_max, g.alpha];
        if vals.iter().any(|v| !v.is_finite())
            || g.cost_points.iter().any(|(p, m)| !p.is_finite() || !m.is_finite())
        {
            out.push(Violation::new(rec(), "non-finite field"));
        }
        if g.p_min > g.p_max {
            out.push(Violation::new(rec(), "p_min > p_max"));
        }
        if g.q_min > g.q_max {
            out.push(Violation::new(rec(), "q_min > q_max"));
        }
        if g.alpha < 0.0 {
            out.push(Violation::new(rec(), "alpha < 0"));
        }
        if g.cost_points.windows(2).any(|w| w[1].0 <= w[0].0) {
            out.push(Violation::new(rec(), "cost breakpoints not strictly increasing in p"));
        }
        if g.cost_points.windows(2).any(|w| w[1].1 < w[0].1) {
            out.push(Violation::new(rec(), "cost curve not convex (marginal cost decreases)"));
        }
    }

    for (i, l) in network.branches.iter().enumerate() {
        let rec = || format!("branch {}", l.id);
        if network.branch_ends[i].is_none() {
            out.push(Violation::new(
                rec(),
                format!("references missing bus {} or {}", l.from_bus, l.to_bus),
            ));
        }
        let vals = [l.r, l.x, l.b_ch, l.tap, l.phase, l.rating_normal, l.rating_emerg];
        if vals.iter().any(|v| !v.is_finite()) {
            out.push(Violation::new(rec(), "non-finite field"));
        }
        if l.x == 0.0 {
            out.push(Violation::new(rec(), "x = 0"));
        }
        if l.tap <= 0.0 {
            out.push(Violation::new(rec(), "tap <= 0"));
        }
        if l.rating_normal <= 0.0 {
            out.push(Violation::new(rec(), "rating_normal <= 0"));
        }
        if l.rating_normal > l.rating_emerg {
            out.push(Violation::new(rec(), "rating_normal > rating_emerg"));
        }
    }

    for (name, blocks) in
        [("balance", &network.penalties.balance), ("rating", &network.penalties.rating)]
    {
        let rec = || format!("penalties {name}");
        if blocks.is_empty() {
            out.push(Violation::new(rec(), "empty block schedule"));
            continue;
        }
        if blocks.iter().any(|b| !(b.width > 0.0) || !b.price.is_finite()) {
            out.push(Violation::new(rec(), "block width must be positive and price finite"));
        }
        if blocks.windows(2).any(|w| w[1].price <= w[0].price) {
            out.push(Violation::new(rec(), "prices not strictly increasing"));
        }
        if blocks.last().is_some_and(|b| b.width.is_finite()) {
            out.push(Violation::new(rec(), "final block must be unbounded"));
        }
    }
    out
}

/// Checks a contingency list against `network`.
pub fn validate_contingencies(network: &Network, contingencies: &[Contingency]) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut labels = BTreeMap::new();
    let mut elements = BTreeMap::new();
    for c in contingencies {
        let rec = || format!("contingency {}", c.label);
        if labels.insert(c.label.clone(), ()).is_some() {
            out.push(Violation::new(rec(), "duplicate label"));
        }
        if network.case_of(c).is_err() {
            out.push(Violation::new(rec(), format!("unknown element {}", c.element)));
        }
        if elements.insert((c.kind, c.element.clone()), ()).is_some() {
            out.push(Violation::new(rec(), format!("element {} outaged twice", c.element)));
        }
    }
    out
}

/// Box bounds `X_k` on the primary variables of one case. Angles and the
/// real-power adjustment are unbounded and therefore not stored.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundSet {
    pub case: Case,
    pub v_min: Vec<f64>,
    pub v_max: Vec<f64>,
    pub b_cs_min: Vec<f64>,
    pub b_cs_max: Vec<f64>,
    pub p_min: Vec<f64>,
    pub p_max: Vec<f64>,
    pub q_min: Vec<f64>,
    pub q_max: Vec<f64>,
    /// Apparent-power rating per branch; `None` for the outaged branch.
    pub rating: Vec<Option<f64>>,
}

impl BoundSet {
    /// Normal limits in the base case, emergency limits otherwise; the
    /// outaged generator is pinned to zero output.
    pub fn for_case(network: &Network, case: Case) -> Self {
        let emergency = !case.is_base();
        let buses = network.buses();
        let gens = network.generators();
        let pick = |g: usize, lo: f64, hi: f64| {
            if case.generator_in_service(g) {
                (lo, hi)
            } else {
                (0.0, 0.0)
            }
        };
        let (p_min, p_max) = gens.iter().enumerate().map(|(g, x)| pick(g, x.p_min, x.p_max)).unzip();
        let (q_min, q_max) = gens.iter().enumerate().map(|(g, x)| pick(g, x.q_min, x.q_max)).unzip();
        Self {
            case,
            v_min: buses.iter().map(|b| if emergency { b.v_min_emerg } else { b.v_min }).collect(),
            v_max: buses.iter().map(|b| if emergency { b.v_max_emerg } else { b.v_max }).collect(),
            b_cs_min: buses.iter().map(|b| b.b_cs_min).collect(),
            b_cs_max: buses.iter().map(|b| b.b_cs_max).collect(),
            p_min,
            p_max,
            q_min,
            q_max,
            rating: network
                .branches()
                .iter()
                .enumerate()
                .map(|(l, br)| {
                    case.branch_in_service(l)
                        .then_some(if emergency { br.rating_emerg } else { br.rating_normal })
                })
                .collect(),
        }
    }
}

/// `X_k` for the base case (`None`) or a contingency.
pub fn bounds_for(network: &Network, contingency: Option<&Contingency>) -> Result<BoundSet, ModelError> {
    let case = match contingency {
        None => Case::Base,
        Some(c) => network.case_of(c)?,
    };
    Ok(BoundSet::for_case(network, case))
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn well_formed_two_bus_has_no_violations() {
        assert!(validate(&two_bus(0.5)).is_empty());
    }

    #[test]
    fn zero_reactance_branch_is_reported() {
        let mut net = two_bus(0.5);
        net.branches[0].x = 0.0;
        let v = validate(&net);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].record, "branch L1");
    }

    #[test]
    fn generator_on_missing_bus_is_reported() {
        let net = Network::new(
            100.0,
            vec![bus("1", 0.0, 0.0)],
            vec![generator("G1", "9", 0.0, 1.0)],
            vec![],
            PenaltySchedule::default(),
        );
        let v = validate(&net);
        assert_eq!(v.len(), 1);
        assert!(v[0].rule.contains("missing bus 9"));
    }

    #[test]
    fn duplicate_ids_and_bad_penalties_are_reported() {
        let mut sched = PenaltySchedule::default();
        sched.rating[2].width = 5.0;
        let net = Network::new(
            100.0,
            vec![bus("1", 0.0, 0.0), bus("1", 0.0, 0.0)],
            vec![],
            vec![],
            sched,
        );
        let v = validate(&net);
        assert!(v.iter().any(|x| x.record == "bus 1" && x.rule == "duplicate id"));
        assert!(v.iter().any(|x| x.rule == "final block must be unbounded"));
    }

    #[test]
    fn base_bounds_pass_through() {
        let b = bounds_for(&two_bus(0.5), None).unwrap();
        assert_eq!(b.v_min, vec![0.95, 0.95]);
        assert_eq!(b.v_max, vec![1.05, 1.05]);
        assert_eq!(b.rating, vec![Some(1.0)]);
    }

    #[test]
    fn generator_outage_pins_output_to_zero() {
        let mut net = two_bus(0.5);
        net.generators[0].p_min = 0.2;
        net.generators[0].p_max = 1.0;
        let b = bounds_for(&net, Some(&Contingency::generator("c1", "G1"))).unwrap();
        assert_eq!((b.p_min[0], b.p_max[0]), (0.0, 0.0));
        assert_eq!((b.q_min[0], b.q_max[0]), (0.0, 0.0));
        assert_eq!(b.v_min, vec![0.9, 0.9]);
    }

    #[test]
    fn branch_outage_drops_rating_row() {
        let b = bounds_for(&two_bus(0.5), Some(&Contingency::branch("c1", "L1"))).unwrap();
        assert_eq!(b.rating, vec![None]);
    }

    #[test]
    fn unknown_element_names_the_label() {
        let err = bounds_for(&two_bus(0.5), Some(&Contingency::branch("bad", "L9"))).unwrap_err();
        assert!(alloc::format!("{err}").contains("bad"));
    }

    #[test]
    fn contingency_list_checks() {
        let net = two_bus(0.5);
        let list = vec![
            Contingency::branch("a", "L1"),
            Contingency::branch("a", "L1"),
            Contingency::generator("b", "nope"),
        ];
        let v = validate_contingencies(&net, &list);
        assert_eq!(v.len(), 3);
    }

    #[test]
    fn cost_curve_sums_segment_areas() {
        let mut g = generator("G", "1", 0.0, 2.0);
        g.cost_points = vec![(0.0, 10.0)];
        assert_eq!(g.cost(0.0), 0.0);
        assert!((g.cost(0.5) - 5.0).abs() < 1e-12);
        g.cost_points = vec![(0.0, 10.0), (1.0, 30.0)];
        // 1.0·10 + 0.5·30
        assert!((g.cost(1.5) - 25.0).abs() < 1e-12);
        let segs = g.cost_segments();
        assert_eq!(segs, vec![(1.0, 10.0), (1.0, 30.0)]);
    }

    #[test]
    fn cost_segments_start_at_p_min() {
        let mut g = generator("G", "1", 0.5, 2.0);
        g.cost_points = vec![(0.0, 10.0), (1.0, 30.0), (3.0, 50.0)];
        let segs = g.cost_segments();
        assert_eq!(segs, vec![(0.5, 10.0), (1.0, 30.0)]);
        let filled = g.cost(0.5) + 0.5 * 10.0 + 0.7 * 30.0;
        assert!((g.cost(1.7) - filled).abs() < 1e-12);
    }

    #[test]
    fn bounds_are_deterministic() {
        let net = two_bus(0.5);
        let c = Contingency::generator("c", "G1");
        assert_eq!(bounds_for(&net, Some(&c)).unwrap(), bounds_for(&net, Some(&c)).unwrap());
    }
}
