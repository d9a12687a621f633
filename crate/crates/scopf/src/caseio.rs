//! Text formats: case and contingency files in, solution files in and out.
//!
//! Case files are per-unit with angles in radians. Solution files use MW,
//! MVAr and degrees, every number with eight fractional digits.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write as _};
use std::path::{Path, PathBuf};

use scopf_core::netmodel::validate_contingencies;
use scopf_core::{
    Branch, Bus, Contingency, ContingencyKind, Generator, Network, OperatingPoint, PenaltyBlock,
    PenaltySchedule, Violation,
};

#[derive(Debug, thiserror::Error)]
pub enum CaseError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("invalid data: {}", list(.0))]
    Invalid(Vec<Violation>),
}

fn list(v: &[Violation]) -> String {
    v.iter().map(|x| format!("{} ({})", x.record, x.rule)).collect::<Vec<_>>().join("; ")
}

/// A solution file that cannot be used. `step` is the evaluation step it
/// trips: 1 for solution1, 2 for solution2.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{message}")]
pub struct SolutionError {
    pub step: u8,
    pub message: String,
}

fn syntax(line: usize, message: impl Into<String>) -> CaseError {
    CaseError::Syntax { line, message: message.into() }
}

/// Non-empty lines with comments stripped, numbered from 1.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.split('#').next().unwrap_or("").trim();
        (!l.is_empty()).then_some((i + 1, l))
    })
}

fn fields(line: &str) -> Vec<&str> {
    line.split(',').map(str::trim).collect()
}

fn number(line: usize, s: &str) -> Result<f64, CaseError> {
    let v = match s {
        "inf" | "+inf" => f64::INFINITY,
        _ => s.parse::<f64>().map_err(|_| syntax(line, format!("not a number: {s:?}")))?,
    };
    if v.is_nan() {
        return Err(syntax(line, "NaN is not allowed"));
    }
    Ok(v)
}

fn numbers<const N: usize>(line: usize, f: &[&str]) -> Result<[f64; N], CaseError> {
    let mut out = [0.0; N];
    for (o, s) in out.iter_mut().zip(f) {
        *o = number(line, s)?;
    }
    Ok(out)
}

fn expect_len(line: usize, f: &[&str], n: usize, what: &str) -> Result<(), CaseError> {
    if f.len() != n {
        return Err(syntax(line, format!("{what} needs {n} fields, found {}", f.len())));
    }
    Ok(())
}

/// Parses a case file and validates the result.
pub fn parse_case(text: &str) -> Result<Network, CaseError> {
    let mut section = String::new();
    let mut base_power = None;
    let mut buses = Vec::new();
    let mut gens = Vec::new();
    let mut branches = Vec::new();
    let mut balance = Vec::new();
    let mut rating = Vec::new();

    for (ln, line) in content_lines(text) {
        if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            section = name.trim().to_ascii_lowercase();
            continue;
        }
        let f = fields(line);
        match section.as_str() {
            "meta" => match f[0] {
                "base_power" => {
                    expect_len(ln, &f, 2, "base_power")?;
                    base_power = Some(number(ln, f[1])?);
                }
                other => return Err(syntax(ln, format!("unknown meta key {other:?}"))),
            },
            "buses" => {
                expect_len(ln, &f, 11, "bus")?;
                let [v_min, v_max, v_min_emerg, v_max_emerg, p_load, q_load, g, b, b_cs_min, b_cs_max] =
                    numbers::<10>(ln, &f[1..])?;
                buses.push(Bus {
                    id: f[0].into(),
                    v_min,
                    v_max,
                    v_min_emerg,
                    v_max_emerg,
                    p_load,
                    q_load,
                    g_shunt_fixed: g,
                    b_shunt_fixed: b,
                    b_cs_min,
                    b_cs_max,
                });
            }
            "generators" => {
                if f.len() < 9 || f.len() % 2 == 0 {
                    return Err(syntax(ln, "generator needs 7 fields and at least one cost pair"));
                }
                let [p_min, p_max, q_min, q_max] = numbers::<4>(ln, &f[2..6])?;
                let alpha = if f[6].is_empty() { p_max } else { number(ln, f[6])? };
                let cost_points = f[7..]
                    .chunks(2)
                    .map(|c| Ok((number(ln, c[0])?, number(ln, c[1])?)))
                    .collect::<Result<Vec<_>, CaseError>>()?;
                gens.push(Generator {
                    id: f[0].into(),
                    bus: f[1].into(),
                    p_min,
                    p_max,
                    q_min,
                    q_max,
                    alpha,
                    cost_points,
                });
            }
            "branches" => {
                expect_len(ln, &f, 10, "branch")?;
                let [r, x, b_ch, tap, phase, rating_normal, rating_emerg] = numbers::<7>(ln, &f[3..])?;
                branches.push(Branch {
                    id: f[0].into(),
                    from_bus: f[1].into(),
                    to_bus: f[2].into(),
                    r,
                    x,
                    b_ch,
                    tap,
                    phase,
                    rating_normal,
                    rating_emerg,
                });
            }
            "penalties" => {
                expect_len(ln, &f, 3, "penalty block")?;
                let [width, price] = numbers::<2>(ln, &f[1..])?;
                let block = PenaltyBlock { width, price };
                match f[0] {
                    "balance" => balance.push(block),
                    "rating" => rating.push(block),
                    other => return Err(syntax(ln, format!("unknown penalty kind {other:?}"))),
                }
            }
            "" => return Err(syntax(ln, "data before the first section header")),
            other => return Err(syntax(ln, format!("unknown section [{other}]"))),
        }
    }

    let defaults = PenaltySchedule::default();
    let penalties = PenaltySchedule {
        balance: if balance.is_empty() { defaults.balance } else { balance },
        rating: if rating.is_empty() { defaults.rating } else { rating },
    };
    Network::checked(base_power.unwrap_or(100.0), buses, gens, branches, penalties).map_err(|e| match e {
        scopf_core::ModelError::Invalid(v) => CaseError::Invalid(v),
        other => CaseError::Invalid(vec![Violation { record: "case".into(), rule: other.to_string() }]),
    })
}

/// Parses a contingency file against `network`.
pub fn parse_contingencies(text: &str, network: &Network) -> Result<Vec<Contingency>, CaseError> {
    let mut out = Vec::new();
    for (ln, line) in content_lines(text) {
        let f = fields(line);
        expect_len(ln, &f, 3, "contingency")?;
        let c = match f[1].to_ascii_uppercase().as_str() {
            "GEN" => Contingency::generator(f[0], f[2]),
            "BRANCH" => Contingency::branch(f[0], f[2]),
            other => return Err(syntax(ln, format!("unknown contingency kind {other:?}"))),
        };
        out.push(c);
    }
    let v = validate_contingencies(network, &out);
    if !v.is_empty() {
        return Err(CaseError::Invalid(v));
    }
    Ok(out)
}

pub fn kind_token(kind: ContingencyKind) -> &'static str {
    match kind {
        ContingencyKind::GeneratorOutage => "GEN",
        ContingencyKind::BranchOutage => "BRANCH",
    }
}

fn read_text(path: &Path) -> Result<String, CaseError> {
    fs::read_to_string(path).map_err(|source| CaseError::Io { path: path.into(), source })
}

pub fn read_case(path: &Path) -> Result<Network, CaseError> {
    parse_case(&read_text(path)?)
}

pub fn read_contingencies(path: &Path, network: &Network) -> Result<Vec<Contingency>, CaseError> {
    parse_contingencies(&read_text(path)?, network)
}

/// Fixed-point with eight fractional digits; negative zero prints as zero.
pub fn fmt8(x: f64) -> String {
    let s = format!("{x:.8}");
    if s.starts_with('-') && s[1..].bytes().all(|b| b == b'0' || b == b'.') {
        s[1..].to_string()
    } else {
        s
    }
}

fn push_sections(out: &mut String, network: &Network, point: &OperatingPoint) {
    let base = network.base_power();
    out.push_str("--bus section\n");
    for (i, bus) in network.buses().iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            bus.id,
            fmt8(point.v[i]),
            fmt8(point.theta[i].to_degrees()),
            fmt8(point.b_cs[i] * base)
        );
    }
    out.push_str("--generator section\n");
    for (g, gen) in network.generators().iter().enumerate() {
        let _ = writeln!(out, "{},{},{}", gen.id, fmt8(point.p[g] * base), fmt8(point.q[g] * base));
    }
}

pub fn format_solution1(network: &Network, point: &OperatingPoint) -> String {
    let mut out = String::new();
    push_sections(&mut out, network, point);
    out
}

pub fn format_solution2<'a>(
    network: &Network,
    entries: impl IntoIterator<Item = (&'a str, &'a OperatingPoint)>,
) -> String {
    let mut out = String::new();
    for (label, point) in entries {
        let _ = writeln!(out, "--contingency,{label}");
        push_sections(&mut out, network, point);
        out.push_str("--delta section\n");
        let _ = writeln!(out, "{}", fmt8(point.delta.unwrap_or(0.0) * network.base_power()));
    }
    out
}

/// Writes `contents` to a temporary file next to `path`, then renames it
/// over `path`.
pub fn write_atomic(path: &Path, contents: &str) -> io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn write_solution1(path: &Path, network: &Network, point: &OperatingPoint) -> io::Result<()> {
    write_atomic(path, &format_solution1(network, point))
}

pub fn write_solution2<'a>(
    path: &Path,
    network: &Network,
    entries: impl IntoIterator<Item = (&'a str, &'a OperatingPoint)>,
) -> io::Result<()> {
    write_atomic(path, &format_solution2(network, entries))
}

struct SectionReader<'a> {
    lines: std::iter::Peekable<Box<dyn Iterator<Item = (usize, &'a str)> + 'a>>,
    step: u8,
}

impl<'a> SectionReader<'a> {
    fn new(text: &'a str, step: u8) -> Self {
        let it: Box<dyn Iterator<Item = (usize, &'a str)> + 'a> = Box::new(
            text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty()),
        );
        Self { lines: it.peekable(), step }
    }

    fn err(&self, message: String) -> SolutionError {
        SolutionError { step: self.step, message }
    }

    fn expect(&mut self, header: &str) -> Result<(), SolutionError> {
        match self.lines.next() {
            Some((_, l)) if l == header => Ok(()),
            Some((n, l)) => Err(self.err(format!("line {n}: expected {header:?}, found {l:?}"))),
            None => Err(self.err(format!("missing {header:?}"))),
        }
    }

    /// Rows up to the next `--` line.
    fn rows(&mut self) -> Vec<(usize, Vec<&'a str>)> {
        let mut out = Vec::new();
        while let Some(&(n, l)) = self.lines.peek() {
            if l.starts_with("--") {
                break;
            }
            out.push((n, fields(l)));
            self.lines.next();
        }
        out
    }

    fn value(&self, n: usize, s: &str) -> Result<f64, SolutionError> {
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(self.err(format!("line {n}: bad number {s:?}"))),
        }
    }

    /// One bus and one generator section into `point`.
    fn point(&mut self, network: &Network) -> Result<OperatingPoint, SolutionError> {
        let base = network.base_power();
        let mut point = OperatingPoint::flat(network);
        self.expect("--bus section")?;
        let mut seen = vec![false; network.n_buses()];
        for (n, f) in self.rows() {
            if f.len() != 4 {
                return Err(self.err(format!("line {n}: bus row needs 4 fields")));
            }
            let i = network
                .bus_index(f[0])
                .ok_or_else(|| self.err(format!("line {n}: unknown bus {}", f[0])))?;
            if std::mem::replace(&mut seen[i], true) {
                return Err(self.err(format!("line {n}: bus {} repeated", f[0])));
            }
            point.v[i] = self.value(n, f[1])?;
            point.theta[i] = self.value(n, f[2])?.to_radians();
            point.b_cs[i] = self.value(n, f[3])? / base;
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(self.err(format!("no row for bus {}", network.buses()[i].id)));
        }
        self.expect("--generator section")?;
        let mut seen = vec![false; network.n_generators()];
        for (n, f) in self.rows() {
            if f.len() != 3 {
                return Err(self.err(format!("line {n}: generator row needs 3 fields")));
            }
            let g = network
                .generator_index(f[0])
                .ok_or_else(|| self.err(format!("line {n}: unknown generator {}", f[0])))?;
            if std::mem::replace(&mut seen[g], true) {
                return Err(self.err(format!("line {n}: generator {} repeated", f[0])));
            }
            point.p[g] = self.value(n, f[1])? / base;
            point.q[g] = self.value(n, f[2])? / base;
        }
        if let Some(g) = seen.iter().position(|s| !s) {
            return Err(self.err(format!("no row for generator {}", network.generators()[g].id)));
        }
        Ok(point)
    }
}

pub fn parse_solution1(text: &str, network: &Network) -> Result<OperatingPoint, SolutionError> {
    let mut r = SectionReader::new(text, 1);
    let point = r.point(network)?;
    if let Some((n, l)) = r.lines.next() {
        return Err(r.err(format!("line {n}: unexpected {l:?}")));
    }
    Ok(point)
}

/// `(label, point)` per block, in file order.
pub fn parse_solution2(text: &str, network: &Network) -> Result<Vec<(String, OperatingPoint)>, SolutionError> {
    let mut r = SectionReader::new(text, 2);
    let mut out = Vec::new();
    while let Some((n, l)) = r.lines.next() {
        let label = l
            .strip_prefix("--contingency,")
            .ok_or_else(|| r.err(format!("line {n}: expected a contingency header, found {l:?}")))?
            .trim()
            .to_string();
        let mut point = r.point(network)?;
        r.expect("--delta section")?;
        let rows = r.rows();
        let [(n, f)] = rows.as_slice() else {
            return Err(r.err(format!("{label}: delta section needs exactly one row")));
        };
        if f.len() != 1 {
            return Err(r.err(format!("line {n}: delta row needs 1 field")));
        }
        point.delta = Some(r.value(*n, f[0])? / network.base_power());
        out.push((label, point));
    }
    Ok(out)
}

fn read_solution(path: &Path, step: u8) -> Result<String, SolutionError> {
    fs::read_to_string(path)
        .map_err(|e| SolutionError { step, message: format!("cannot read {}: {e}", path.display()) })
}

pub fn read_solution1(path: &Path, network: &Network) -> Result<OperatingPoint, SolutionError> {
    parse_solution1(&read_solution(path, 1)?, network)
}

pub fn read_solution2(path: &Path, network: &Network) -> Result<Vec<(String, OperatingPoint)>, SolutionError> {
    parse_solution2(&read_solution(path, 2)?, network)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const TWO_BUS: &str = "\
# two buses
[meta]
base_power,100
[buses]
1,0.95,1.05,0.9,1.1,0,0,0,0,0,0
2,0.95,1.05,0.9,1.1,0.5,0.1,0,0,-0.2,0.3
[generators]
G1,1,0,1.2,-1,1,,0,10,0.6,20
[branches]
L1,1,2,0.01,0.1,0.02,1,0,1.0,1.2
";

    #[test]
    fn two_bus_case_parses_with_defaults() {
        let net = parse_case(TWO_BUS).unwrap();
        assert_eq!(net.n_buses(), 2);
        assert_eq!(net.generators()[0].alpha, 1.2);
        assert_eq!(net.generators()[0].cost_points, vec![(0.0, 10.0), (0.6, 20.0)]);
        assert_eq!(net.penalties(), &PenaltySchedule::default());
    }

    #[test]
    fn duplicate_bus_is_named() {
        let text = TWO_BUS.replace("2,0.95", "1,0.95");
        let err = parse_case(&text).unwrap_err().to_string();
        assert!(err.contains("bus 1"), "{err}");
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let text = TWO_BUS.replace("L1,1,2,0.01", "L1,1,2,zero");
        match parse_case(&text) {
            Err(CaseError::Syntax { line, .. }) => assert_eq!(line, 10),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn penalty_section_overrides_schedule() {
        let text = format!("{TWO_BUS}[penalties]\nbalance,0.1,100\nbalance,inf,1000\n");
        let net = parse_case(&text).unwrap();
        assert_eq!(net.penalties().balance.len(), 2);
        assert_eq!(net.penalties().balance[1].width, f64::INFINITY);
        assert_eq!(net.penalties().rating, PenaltySchedule::default().rating);
    }

    #[test]
    fn contingency_file() {
        let net = parse_case(TWO_BUS).unwrap();
        let c = parse_contingencies("CG,GEN,G1\nCL,BRANCH,L1\n", &net).unwrap();
        assert_eq!(c.len(), 2);
        assert!(parse_contingencies("X,GEN,G9\n", &net).is_err());
        assert!(parse_contingencies("", &net).unwrap().is_empty());
    }

    #[test]
    fn flat_point_formatting() {
        let net = parse_case(TWO_BUS).unwrap();
        let mut pt = OperatingPoint::flat(&net);
        pt.p[0] = 0.5;
        let text = format_solution1(&net, &pt);
        assert!(text.contains("\n1,1.00000000,0.00000000,0.00000000\n"));
        assert!(text.contains("G1,50.00000000,0.00000000"));
        assert_eq!(fmt8(-0.0), "0.00000000");
        assert_eq!(fmt8(-1e-12), "0.00000000");
        assert_eq!(fmt8(-0.5), "-0.50000000");
    }

    #[test]
    fn missing_generator_row_is_rejected() {
        let net = parse_case(TWO_BUS).unwrap();
        let text = format_solution1(&net, &OperatingPoint::flat(&net));
        let cut = text.lines().filter(|l| !l.starts_with("G1")).collect::<Vec<_>>().join("\n");
        let e = parse_solution1(&cut, &net).unwrap_err();
        assert_eq!(e.step, 1);
    }

    #[test]
    fn absent_file_is_a_trigger() {
        let net = parse_case(TWO_BUS).unwrap();
        let e = read_solution2(Path::new("/nonexistent/solution2.txt"), &net).unwrap_err();
        assert_eq!(e.step, 2);
    }
}
