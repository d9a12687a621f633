use std::path::PathBuf;

use proptest::prelude::*;
use scopf::caseio::*;
use scopf_core::{Network, OperatingPoint};

fn corpus(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/corpus").join(name)
}

fn ieee14() -> Network {
    read_case(&corpus("ieee14.case")).unwrap()
}

fn point(net: &Network, seed: &[f64], delta: Option<f64>) -> OperatingPoint {
    let mut pt = OperatingPoint::flat(net);
    let mut it = seed.iter().cycle();
    let mut next = || *it.next().unwrap();
    for b in 0..net.n_buses() {
        pt.v[b] = 0.9 + 0.2 * next();
        pt.theta[b] = next() - 0.5;
        pt.b_cs[b] = 0.3 * next();
    }
    for g in 0..net.n_generators() {
        pt.p[g] = 3.0 * next();
        pt.q[g] = next() - 0.5;
    }
    pt.delta = delta;
    pt
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

#[test]
fn every_corpus_case_parses() {
    for name in ["bus2", "bus3", "bus5", "wscc9", "ieee14"] {
        let net = read_case(&corpus(&format!("{name}.case"))).unwrap();
        let cons = read_contingencies(&corpus(&format!("{name}.con")), &net).unwrap();
        assert!(!cons.is_empty(), "{name}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn solution1_round_trips(seed in prop::collection::vec(0.0f64..1.0, 7)) {
        let net = ieee14();
        let pt = point(&net, &seed, None);
        let back = parse_solution1(&format_solution1(&net, &pt), &net).unwrap();
        // eight decimals in MW and degrees
        prop_assert!(close(&back.v, &pt.v, 5e-9));
        prop_assert!(close(&back.theta, &pt.theta, 1e-10));
        prop_assert!(close(&back.p, &pt.p, 1e-10));
        prop_assert!(close(&back.q, &pt.q, 1e-10));
        prop_assert!(close(&back.b_cs, &pt.b_cs, 1e-10));
        // formatting is a fixed point after one pass
        prop_assert_eq!(format_solution1(&net, &back), format_solution1(&net, &pt));
    }

    #[test]
    fn solution2_round_trips(seed in prop::collection::vec(0.0f64..1.0, 5), d in -1.0f64..1.0) {
        let net = ieee14();
        let a = point(&net, &seed, Some(d));
        let b = point(&net, &seed[1..], Some(-d));
        let text = format_solution2(&net, [("first", &a), ("second", &b)]);
        let back = parse_solution2(&text, &net).unwrap();
        prop_assert_eq!(back.len(), 2);
        prop_assert_eq!(back[0].0.as_str(), "first");
        prop_assert_eq!(back[1].0.as_str(), "second");
        prop_assert!((back[0].1.delta.unwrap() - d).abs() < 1e-10);
        prop_assert!(close(&back[1].1.v, &b.v, 5e-9));
    }
}

#[test]
fn atomic_write_replaces_whole_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("solution1.txt");
    let net = ieee14();
    write_solution1(&path, &net, &OperatingPoint::flat(&net)).unwrap();
    let first = std::fs::read_to_string(&path).unwrap();
    let mut pt = OperatingPoint::flat(&net);
    pt.p[0] = 1.0;
    write_solution1(&path, &net, &pt).unwrap();
    let second = std::fs::read_to_string(&path).unwrap();
    assert_ne!(first, second);
    assert_eq!(read_solution1(&path, &net).unwrap().p[0], 1.0);
    // no temporary files left behind
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
}

#[test]
fn truncated_solution2_is_rejected() {
    let net = ieee14();
    let pt = point(&net, &[0.3, 0.6], Some(0.0));
    let text = format_solution2(&net, [("c", &pt)]);
    let cut = &text[..text.find("--delta").unwrap()];
    let e = parse_solution2(cut, &net).unwrap_err();
    assert_eq!(e.step, 2);
}
