//! End-to-end tests of the command-line binary via std::process.

use std::path::Path;
use std::process::{Command, Output};
use std::sync::Arc;

use riskroute::dist::DiscreteDistribution;
use riskroute::network::io::{save_graph, save_profile};
use riskroute::network::{DayClass, Graph, Node, TimeProfile};
use riskroute::synth;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_riskroute"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

/// Two nodes, one edge of 100 m at 10 m/s, constant profile: a point mass
/// of 12 s (two 6 s bins).
fn save_toy(dir: &Path) -> (Graph, TimeProfile) {
    let graph = Graph::new(
        vec![
            Node { id: 0, lat: 40.700, lon: -74.000 },
            Node { id: 1, lat: 40.701, lon: -74.000 },
        ],
        vec![(0, 0, 1, 100.0, 10.0)],
    )
    .unwrap();
    let d = DiscreteDistribution::point_mass(6.0, 12.0).unwrap();
    let profile = TimeProfile::constant(&graph, 600.0, d).unwrap();
    save_graph(&graph, dir).unwrap();
    save_profile(&profile, &dir.join("profile.csv")).unwrap();
    (graph, profile)
}

/// The two-route diamond: parallel edges 0 (usual) and 1 (alternative)
/// from node 0 to node 1, then edge 2 to node 2, with unit bins.
fn save_diamond(dir: &Path) {
    let graph = Graph::new(
        vec![
            Node { id: 0, lat: 0.0, lon: 0.0 },
            Node { id: 1, lat: 0.001, lon: 0.0 },
            Node { id: 2, lat: 0.002, lon: 0.0 },
        ],
        vec![
            (0, 0, 1, 100.0, 100.0),
            (1, 0, 1, 100.0, 100.0),
            (2, 1, 2, 100.0, 100.0),
        ],
    )
    .unwrap();
    let on = Arc::new(
        DiscreteDistribution::from_support(1.0, &[(1.0, 0.95), (2.0, 0.05)]).unwrap(),
    );
    let alt = Arc::new(
        DiscreteDistribution::from_support(1.0, &[(0.0, 0.9), (2.0, 0.1)]).unwrap(),
    );
    let nd = Arc::new(
        DiscreteDistribution::from_support(1.0, &[(0.0, 0.8), (1.0, 0.1), (2.0, 0.1)]).unwrap(),
    );
    let profile = TimeProfile::from_fn(&graph, 1.0, 600.0, |e, _, _| match e {
        0 => on.clone(),
        1 => alt.clone(),
        _ => nd.clone(),
    })
    .unwrap();
    save_graph(&graph, dir).unwrap();
    save_profile(&profile, &dir.join("profile.csv")).unwrap();
}

fn route_args<'a>(dir: &'a str, rest: &[&'a str]) -> Vec<String> {
    let mut args = vec![
        "route".to_string(),
        "--graph".into(),
        dir.into(),
        "--profile".into(),
        format!("{dir}/profile.csv"),
    ];
    args.extend(rest.iter().map(|s| s.to_string()));
    args
}

fn run_route(dir: &Path, rest: &[&str]) -> Output {
    let dir = dir.to_str().unwrap();
    let args = route_args(dir, rest);
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    run(&refs)
}

#[test]
fn route_two_node_toy_json() {
    let tmp = tempfile::tempdir().unwrap();
    save_toy(tmp.path());
    let out = run_route(
        tmp.path(),
        &["--from", "0", "--to", "1", "--depart", "wed 08:00", "--rho", "expectation"],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(doc["rho_value_s"].as_f64().unwrap(), 12.0);
    assert_eq!(doc["path_nodes"].as_array().unwrap().len(), 2);
    assert_eq!(doc["path_edges"][0].as_u64().unwrap(), 0);
}

#[test]
fn route_diamond_var_takes_alternative_branch() {
    let tmp = tempfile::tempdir().unwrap();
    save_diamond(tmp.path());
    let out = run_route(
        tmp.path(),
        &["--from", "0", "--to", "2", "--depart", "wed 00:30", "--rho", "var:0.95"],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(doc["rho_value_s"].as_f64().unwrap(), 2.0);
    assert_eq!(doc["path_edges"][0].as_u64().unwrap(), 1);
}

#[test]
fn route_unknown_node_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    save_toy(tmp.path());
    let out = run_route(
        tmp.path(),
        &["--from", "99", "--to", "1", "--depart", "wed 08:00"],
    );
    assert_eq!(code(&out), 2);
}

#[test]
fn route_unreachable_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    save_toy(tmp.path());
    // only edge goes 0 -> 1, so 1 -> 0 is unreachable
    let out = run_route(
        tmp.path(),
        &["--from", "1", "--to", "0", "--depart", "wed 08:00"],
    );
    assert_eq!(code(&out), 1);
}

#[test]
fn route_geojson_is_a_linestring_feature() {
    let tmp = tempfile::tempdir().unwrap();
    save_diamond(tmp.path());
    let out = run_route(
        tmp.path(),
        &[
            "--from", "0", "--to", "2", "--depart", "sat 10:00", "--rho", "cvar:0.9",
            "--format", "geojson",
        ],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(doc["type"], "Feature");
    assert_eq!(doc["geometry"]["type"], "LineString");
    let coords = doc["geometry"]["coordinates"].as_array().unwrap();
    assert_eq!(coords.len(), 3);
    assert_eq!(coords[0].as_array().unwrap().len(), 2);
    assert!(doc["properties"]["rho_value_s"].is_number());
}

#[test]
fn validate_clean_profile_passes() {
    let tmp = tempfile::tempdir().unwrap();
    save_toy(tmp.path());
    let dir = tmp.path().to_str().unwrap();
    let out = run(&[
        "validate",
        "--graph",
        dir,
        "--profile",
        &format!("{dir}/profile.csv"),
        "--strict-fifo",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("0 hard, 0 soft"));
}

#[test]
fn validate_strict_fifo_fails_on_hard_violation() {
    let tmp = tempfile::tempdir().unwrap();
    let graph = Graph::new(
        vec![
            Node { id: 0, lat: 0.0, lon: 0.0 },
            Node { id: 1, lat: 0.001, lon: 0.0 },
        ],
        vec![(0, 0, 1, 100.0, 10.0)],
    )
    .unwrap();
    // hour 8 quantile 4000 s, hour 9 quantile 10 s: drop exceeds an hour
    let slow = Arc::new(DiscreteDistribution::point_mass(6.0, 4000.0).unwrap());
    let fast = Arc::new(DiscreteDistribution::point_mass(6.0, 12.0).unwrap());
    let profile = TimeProfile::from_fn(&graph, 6.0, 5000.0, |_, class, hour| {
        if class == DayClass::Weekdays && hour == 8 {
            slow.clone()
        } else {
            fast.clone()
        }
    })
    .unwrap();
    save_graph(&graph, tmp.path()).unwrap();
    save_profile(&profile, &tmp.path().join("profile.csv")).unwrap();
    let dir = tmp.path().to_str().unwrap();

    let lenient = run(&["validate", "--graph", dir, "--profile", &format!("{dir}/profile.csv")]);
    assert_eq!(code(&lenient), 0);
    let strict = run(&[
        "validate",
        "--graph",
        dir,
        "--profile",
        &format!("{dir}/profile.csv"),
        "--strict-fifo",
    ]);
    assert_eq!(code(&strict), 1);
    assert!(stdout(&strict).contains("Hard"));
}

#[test]
fn ingest_then_route_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let inst = synth::random_small_instance(11, 6).unwrap();
    save_graph(&inst.graph, tmp.path()).unwrap();
    let trips = synth::generate_synthetic_trips(&inst.graph, &inst.profile, 30, &[8, 9], 7);

    let trips_path = tmp.path().join("trips.csv");
    let mut w = csv::Writer::from_path(&trips_path).unwrap();
    w.write_record([
        "pickup_datetime",
        "dropoff_datetime",
        "pickup_lat",
        "pickup_lon",
        "dropoff_lat",
        "dropoff_lon",
    ])
    .unwrap();
    for t in &trips {
        w.write_record([
            t.pickup_ts.format("%Y-%m-%dT%H:%M:%S").to_string(),
            t.dropoff_ts.format("%Y-%m-%dT%H:%M:%S").to_string(),
            t.pickup_lat.to_string(),
            t.pickup_lon.to_string(),
            t.dropoff_lat.to_string(),
            t.dropoff_lon.to_string(),
        ])
        .unwrap();
    }
    // one malformed row: unparseable timestamp
    w.write_record(["nonsense", "2024-01-03T09:00:00", "0", "0", "0.001", "0"]).unwrap();
    w.flush().unwrap();
    drop(w);

    let dir = tmp.path().to_str().unwrap();
    let profile_path = format!("{dir}/estimated.csv");
    let out = run(&[
        "ingest",
        "--trips",
        trips_path.to_str().unwrap(),
        "--graph",
        dir,
        "--out",
        &profile_path,
        "--min-duration",
        "0",
        "--min-distance",
        "0",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("1 malformed"), "{text}");
    assert!(text.contains("wrote"), "{text}");

    let routed = run(&[
        "route",
        "--graph",
        dir,
        "--profile",
        &profile_path,
        "--from",
        "0",
        "--to",
        &inst.dest.to_string(),
        "--depart",
        "wed 08:30",
        "--rho",
        "cvar:0.9",
    ]);
    assert_eq!(code(&routed), 0, "{}", String::from_utf8_lossy(&routed.stderr));
}

#[test]
fn oracle_check_passes_and_detects_corruption() {
    let ok = run(&["oracle-check", "--instances", "25", "--seed", "3", "--max-nodes", "7"]);
    assert_eq!(code(&ok), 0, "{}", stdout(&ok));
    assert!(stdout(&ok).contains("passed"));

    let bad = run(&[
        "oracle-check",
        "--instances",
        "25",
        "--seed",
        "3",
        "--max-nodes",
        "7",
        "--corrupt-dominance",
    ]);
    assert_eq!(code(&bad), 1, "{}", stdout(&bad));
    assert!(stdout(&bad).contains("FAIL"));
}

#[test]
fn bench_reports_latency_and_counters() {
    let tmp = tempfile::tempdir().unwrap();
    let inst = synth::random_small_instance(5, 8).unwrap();
    save_graph(&inst.graph, tmp.path()).unwrap();
    save_profile(&inst.profile, &tmp.path().join("profile.csv")).unwrap();
    let dir = tmp.path().to_str().unwrap();
    let out = run(&[
        "bench",
        "--graph",
        dir,
        "--profile",
        &format!("{dir}/profile.csv"),
        "--queries",
        "10",
        "--seed",
        "9",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("latency ms"), "{text}");
    assert!(text.contains("pruned"), "{text}");

    let again = run(&[
        "bench",
        "--graph",
        dir,
        "--profile",
        &format!("{dir}/profile.csv"),
        "--queries",
        "10",
        "--seed",
        "9",
    ]);
    // deterministic query set: identical label counters
    let labels = |t: &str| t.lines().find(|l| l.starts_with("labels:")).map(str::to_string);
    assert_eq!(labels(&text), labels(&stdout(&again)));
}

#[test]
fn usage_error_exits_2() {
    let out = run(&["route", "--from", "0"]);
    assert_eq!(code(&out), 2);
}
