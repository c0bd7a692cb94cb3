//! Command-line interface: profile ingestion, validation, routing,
//! benchmarking and oracle cross-checks.
//!
//! Exit codes: 0 success, 1 no route found, 2 usage or input error.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use riskroute::dist::DiscreteDistribution;
use riskroute::error::{Error, Result};
use riskroute::heuristic::{HeuristicKind, HeuristicTable};
use riskroute::ingest::{
    assign_and_split, clean, read_trips_csv, CleanConfig, ColumnMap, SampleAccumulator, SkipReason,
};
use riskroute::network::io::{load_graph, load_profile, save_profile};
use riskroute::network::{
    validate_sfifo, ClockTime, DayClass, Graph, SfifoSeverity,
};
use riskroute::risk::RiskSpec;
use riskroute::search::{route, RouteOptions, RouteResult, SearchStats};
use riskroute::synth::random_small_instance;
use riskroute::{oracle, util};

#[derive(Parser)]
#[command(
    name = "riskroute",
    version,
    about = "Risk-averse routing on time-dependent stochastic road networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate a travel-time profile from trip records
    Ingest(IngestArgs),
    /// Compute a risk-minimal route
    Route(RouteArgs),
    /// Check a graph/profile pair for referential and S-FIFO problems
    Validate(ValidateArgs),
    /// Time routing queries on random origin-destination pairs
    Bench(BenchArgs),
    /// Cross-check the search against exhaustive path enumeration
    OracleCheck(OracleCheckArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// Trip record CSV files (pickup/dropoff timestamp and coordinates)
    #[arg(long, required = true, num_args = 1..)]
    trips: Vec<PathBuf>,
    /// Directory containing nodes.csv and edges.csv
    #[arg(long)]
    graph: PathBuf,
    /// Output profile path (.csv for text, anything else binary)
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 6.0)]
    bin_width: f64,
    /// Per-edge duration cap in seconds; samples above it land in the cap bin
    #[arg(long, default_value_t = 600.0)]
    edge_cap: f64,
    /// Snap radius for matching trip endpoints to nodes, meters
    #[arg(long, default_value_t = 200.0)]
    snap_radius: f64,
    /// Cells with fewer samples are blended toward the free-flow fallback
    #[arg(long, default_value_t = 5)]
    min_samples: u64,
    /// Drop trips with straight-line speed above this, m/s
    #[arg(long, default_value_t = 40.0)]
    max_speed: f64,
    #[arg(long, default_value_t = 30.0)]
    min_duration: f64,
    #[arg(long, default_value_t = 14400.0)]
    max_duration: f64,
    #[arg(long, default_value_t = 50.0)]
    min_distance: f64,
    /// Padding around the graph bounding box, degrees
    #[arg(long, default_value_t = 0.0)]
    bbox_pad: f64,
    /// Column name overrides, e.g. "pickup_datetime=tpep_pickup_datetime"
    #[arg(long)]
    columns: Option<String>,
}

#[derive(Args)]
struct RouteArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    profile: PathBuf,
    /// Origin node id
    #[arg(long)]
    from: u64,
    /// Destination node id
    #[arg(long)]
    to: u64,
    /// Departure as "<day> HH:MM[:SS]", e.g. "wed 08:00"
    #[arg(long)]
    depart: String,
    /// Risk measure: expectation | var:A | cvar:A | eu:linear | eu:exp:B
    #[arg(long, default_value = "cvar:0.9")]
    rho: String,
    #[arg(long, default_value = "json", value_parser = ["json", "geojson"])]
    format: String,
    #[arg(long, default_value = "network", value_parser = ["network", "euclidean", "paper"])]
    heuristic: String,
    /// Disable seeding the upper bound from a deterministic shortest path
    #[arg(long)]
    no_seed_ub: bool,
    /// Disable stochastic-dominance pruning
    #[arg(long)]
    no_fsd_prune: bool,
    /// Disable expectation-lower-bound pruning
    #[arg(long)]
    no_exp_prune: bool,
    /// Path distribution support horizon, seconds
    #[arg(long, default_value_t = 86400.0)]
    horizon: f64,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    profile: PathBuf,
    /// Quantile grid start:step:end for the FIFO check
    #[arg(long, default_value = "0.1:0.1:0.9")]
    alpha_grid: String,
    /// Exit nonzero if any hard violation is found
    #[arg(long)]
    strict_fifo: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    profile: PathBuf,
    #[arg(long, default_value_t = 100)]
    queries: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = "cvar:0.9")]
    rho: String,
    #[arg(long, default_value = "network", value_parser = ["network", "euclidean", "paper"])]
    heuristic: String,
}

#[derive(Args)]
struct OracleCheckArgs {
    #[arg(long, default_value_t = 100)]
    instances: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    max_nodes: usize,
    /// Comma-separated risk measures to check
    #[arg(
        long,
        default_value = "expectation,var:0.5,var:0.9,var:0.95,cvar:0.5,cvar:0.9"
    )]
    rhos: String,
    /// Test hook: flip the dominance direction; checks must then fail
    #[arg(long, hide = true)]
    corrupt_dominance: bool,
}

fn main() -> ExitCode {
    util::init_thread_pool_from_env();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Ingest(a) => cmd_ingest(a),
        Command::Route(a) => cmd_route(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Bench(a) => cmd_bench(a),
        Command::OracleCheck(a) => cmd_oracle_check(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

/// Parse "<day> HH:MM[:SS]"; the day name selects the day class.
fn parse_depart(s: &str) -> Result<ClockTime> {
    let bad = |msg: &str| Error::parse(format!("departure '{s}'"), msg);
    let mut parts = s.split_whitespace();
    let day = parts.next().ok_or_else(|| bad("missing day"))?;
    let time = parts.next().ok_or_else(|| bad("missing time"))?;
    if parts.next().is_some() {
        return Err(bad("trailing input"));
    }
    let day_class = match day.to_ascii_lowercase().as_str() {
        "mon" | "monday" | "tue" | "tuesday" | "wed" | "wednesday" | "thu" | "thursday"
        | "fri" | "friday" => DayClass::Weekdays,
        "sat" | "saturday" | "sun" | "sunday" => DayClass::Weekends,
        other => DayClass::parse(other)?,
    };
    let fields: Vec<&str> = time.split(':').collect();
    if fields.len() < 2 || fields.len() > 3 {
        return Err(bad("time must be HH:MM or HH:MM:SS"));
    }
    let mut nums = [0u32; 3];
    for (i, f) in fields.iter().enumerate() {
        nums[i] = f
            .parse()
            .map_err(|e| bad(&format!("bad time field '{f}': {e}")))?;
    }
    let (h, m, sec) = (nums[0], nums[1], nums[2]);
    if h > 23 || m > 59 || sec > 59 {
        return Err(bad("time out of range"));
    }
    ClockTime::new(day_class, f64::from(h * 3600 + m * 60 + sec))
}

/// Parse "start:step:end" into an inclusive grid.
fn parse_alpha_grid(s: &str) -> Result<Vec<f64>> {
    let bad = |msg: &str| Error::parse(format!("alpha grid '{s}'"), msg);
    let fields: Vec<&str> = s.split(':').collect();
    if fields.len() != 3 {
        return Err(bad("expected start:step:end"));
    }
    let nums: Vec<f64> = fields
        .iter()
        .map(|f| f.parse().map_err(|e| bad(&format!("bad number '{f}': {e}"))))
        .collect::<Result<_>>()?;
    let (start, step, end) = (nums[0], nums[1], nums[2]);
    if !(step > 0.0 && start > 0.0 && end < 1.0 && start <= end) {
        return Err(bad("need 0 < start <= end < 1 and step > 0"));
    }
    let mut grid = Vec::new();
    let mut a = start;
    while a <= end + 1e-9 {
        grid.push(a);
        a += step;
    }
    Ok(grid)
}

fn heuristic_kind(s: &str) -> HeuristicKind {
    s.parse().expect("validated by clap value_parser")
}

fn cmd_ingest(args: IngestArgs) -> Result<u8> {
    let graph = load_graph(&args.graph)?;
    let columns = match &args.columns {
        Some(spec) => ColumnMap::default().with_overrides(spec)?,
        None => ColumnMap::default(),
    };

    let mut records = Vec::new();
    let mut malformed = 0;
    for path in &args.trips {
        let (mut rows, bad) = read_trips_csv(path, &columns)?;
        println!("read {} records from {} ({} malformed skipped)", rows.len(), path.display(), bad);
        records.append(&mut rows);
        malformed += bad;
    }
    let total = records.len();

    let config = CleanConfig {
        max_speed_mps: args.max_speed,
        min_duration_s: args.min_duration,
        max_duration_s: args.max_duration,
        min_distance_m: args.min_distance,
        bbox_pad_deg: args.bbox_pad,
    };
    let (kept, report) = clean(records, &graph, &config);
    println!(
        "clean: {} kept of {} ({} malformed); dropped: region {}, negative {}, short {}, long {}, close {}, fast {}",
        report.kept,
        total,
        malformed,
        report.dropped_out_of_region,
        report.dropped_negative_duration,
        report.dropped_too_short,
        report.dropped_too_long,
        report.dropped_too_close,
        report.dropped_too_fast
    );

    let weights: Vec<f64> = graph.edges().iter().map(|e| e.free_flow()).collect();
    let split: Vec<std::result::Result<Vec<riskroute::ingest::EdgeSample>, SkipReason>> =
        util::par_map(&kept, |r| assign_and_split(r, &graph, &weights, args.snap_radius));
    let mut acc = SampleAccumulator::new(args.bin_width, args.edge_cap)?;
    let (mut assigned, mut snap_failed, mut disconnected, mut degenerate) = (0u64, 0u64, 0u64, 0u64);
    let mut samples = 0u64;
    for outcome in split {
        match outcome {
            Ok(edge_samples) => {
                assigned += 1;
                samples += edge_samples.len() as u64;
                for s in &edge_samples {
                    acc.add(s);
                }
            }
            Err(SkipReason::SnapFailed) => snap_failed += 1,
            Err(SkipReason::Disconnected) => disconnected += 1,
            Err(SkipReason::DegeneratePath) => degenerate += 1,
        }
    }
    println!(
        "assign: {assigned} trips -> {samples} edge samples; skipped: snap {snap_failed}, disconnected {disconnected}, degenerate {degenerate}"
    );

    let profile = acc.finalize(&graph, args.min_samples)?;
    println!(
        "profile: {} edges x {} cells, {} cells with data",
        profile.num_edges(),
        2 * riskroute::network::HOURS_PER_DAY,
        acc.num_cells()
    );
    save_profile(&profile, &args.out)?;
    println!("wrote {}", args.out.display());
    Ok(0)
}

fn route_options(no_seed_ub: bool, no_fsd: bool, no_exp: bool, horizon: f64) -> RouteOptions {
    RouteOptions {
        seed_ub: !no_seed_ub,
        fsd_prune: !no_fsd,
        exp_prune: !no_exp,
        horizon,
        ..RouteOptions::default()
    }
}

fn distribution_summary(d: &DiscreteDistribution) -> Result<serde_json::Value> {
    Ok(json!({
        "mean_s": d.mean(),
        "min_s": d.support_min(),
        "max_s": d.support_max(),
        "quantiles_s": {
            "0.5": d.quantile(0.5)?,
            "0.9": d.quantile(0.9)?,
            "0.95": d.quantile(0.95)?,
        },
        "bin_width_s": d.bin_width(),
    }))
}

fn cmd_route(args: RouteArgs) -> Result<u8> {
    let graph = load_graph(&args.graph)?;
    let profile = load_profile(&args.profile, &graph)?;
    let spec: RiskSpec = args.rho.parse()?;
    let depart = parse_depart(&args.depart)?;
    let dest = graph.node_index(args.to)?;
    graph.node_index(args.from)?;
    let heur = HeuristicTable::build(&graph, &profile, dest, heuristic_kind(&args.heuristic))?;
    let options = route_options(args.no_seed_ub, args.no_fsd_prune, args.no_exp_prune, args.horizon);
    let result = route(&graph, &profile, &heur, &spec, args.from, args.to, &depart, &options)?;

    if !result.found() {
        eprintln!("no route from {} to {}", args.from, args.to);
        return Ok(1);
    }
    let doc = match args.format.as_str() {
        "geojson" => geojson_doc(&graph, &args, &result)?,
        _ => json_doc(&args, &result)?,
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&doc).expect("route output serializes")
    );
    Ok(0)
}

fn json_doc(args: &RouteArgs, result: &RouteResult) -> Result<serde_json::Value> {
    let cost = result.cost.as_ref().expect("found route has a cost");
    Ok(json!({
        "from": args.from,
        "to": args.to,
        "depart": args.depart,
        "rho": args.rho,
        "rho_value_s": result.rho,
        "path_nodes": result.path,
        "path_edges": result.path_edges,
        "distribution": distribution_summary(cost)?,
        "stats": result.stats,
    }))
}

fn geojson_doc(graph: &Graph, args: &RouteArgs, result: &RouteResult) -> Result<serde_json::Value> {
    let coords: Vec<[f64; 2]> = result
        .path
        .iter()
        .map(|&id| {
            let n = graph.node(graph.node_index(id)?);
            Ok([n.lon, n.lat])
        })
        .collect::<Result<_>>()?;
    let cost = result.cost.as_ref().expect("found route has a cost");
    Ok(json!({
        "type": "Feature",
        "geometry": { "type": "LineString", "coordinates": coords },
        "properties": {
            "from": args.from,
            "to": args.to,
            "depart": args.depart,
            "rho": args.rho,
            "rho_value_s": result.rho,
            "distribution": distribution_summary(cost)?,
        }
    }))
}

fn cmd_validate(args: ValidateArgs) -> Result<u8> {
    let graph = load_graph(&args.graph)?;
    // loading performs the referential checks (unknown edges, bad cells)
    let profile = load_profile(&args.profile, &graph)?;
    let grid = parse_alpha_grid(&args.alpha_grid)?;
    let violations = validate_sfifo(&profile, &grid)?;
    let hard = violations.iter().filter(|v| v.severity == SfifoSeverity::Hard).count();
    let soft = violations.len() - hard;
    println!(
        "graph: {} nodes, {} edges; profile: {} edges, bin width {} s",
        graph.num_nodes(),
        graph.num_edges(),
        profile.num_edges(),
        profile.bin_width()
    );
    println!("fifo check over alphas {:?}: {hard} hard, {soft} soft violations", grid);
    for v in violations.iter().take(20) {
        println!(
            "  {:?}: edge {} {} hour {} alpha {:.2}: q={:.1}s -> next hour q={:.1}s",
            v.severity, v.edge_id, v.day_class.as_str(), v.hour, v.alpha, v.quantile_before, v.quantile_after
        );
    }
    if violations.len() > 20 {
        println!("  ... {} more", violations.len() - 20);
    }
    if args.strict_fifo && hard > 0 {
        eprintln!("strict fifo: failing on {hard} hard violations");
        return Ok(1);
    }
    println!("ok");
    Ok(0)
}

fn cmd_bench(args: BenchArgs) -> Result<u8> {
    use rand::{Rng, SeedableRng};
    let graph = load_graph(&args.graph)?;
    let profile = load_profile(&args.profile, &graph)?;
    let spec: RiskSpec = args.rho.parse()?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(args.seed);

    let mut queries = Vec::with_capacity(args.queries);
    while queries.len() < args.queries {
        let o = rng.gen_range(0..graph.num_nodes());
        let d = rng.gen_range(0..graph.num_nodes());
        if o == d {
            continue;
        }
        let depart = ClockTime::new(
            if rng.gen_bool(5.0 / 7.0) { DayClass::Weekdays } else { DayClass::Weekends },
            rng.gen_range(0.0..86_400.0),
        )?;
        queries.push((o, d, depart));
    }

    let options = RouteOptions::default();
    let kind = heuristic_kind(&args.heuristic);
    let mut times_ms = Vec::with_capacity(queries.len());
    let mut agg = SearchStats::default();
    let mut found = 0usize;
    for (o, d, depart) in &queries {
        let start = Instant::now();
        let heur = HeuristicTable::build(&graph, &profile, *d, kind)?;
        let result = route(
            &graph,
            &profile,
            &heur,
            &spec,
            graph.node(*o).id,
            graph.node(*d).id,
            depart,
            &options,
        )?;
        times_ms.push(start.elapsed().as_secs_f64() * 1e3);
        if result.found() {
            found += 1;
        }
        agg.labels_generated += result.stats.labels_generated;
        agg.labels_inserted += result.stats.labels_inserted;
        agg.labels_expanded += result.stats.labels_expanded;
        agg.pruned_ub += result.stats.pruned_ub;
        agg.pruned_exp += result.stats.pruned_exp;
        agg.pruned_fsd += result.stats.pruned_fsd;
        agg.removed_dominated += result.stats.removed_dominated;
    }
    times_ms.sort_by(f64::total_cmp);
    let mean = times_ms.iter().sum::<f64>() / times_ms.len() as f64;
    let pct = |p: f64| times_ms[((times_ms.len() - 1) as f64 * p).round() as usize];
    println!("{} queries ({} found), rho {}", queries.len(), found, spec);
    println!(
        "latency ms: mean {:.1}, median {:.1}, p95 {:.1}, max {:.1}",
        mean,
        pct(0.5),
        pct(0.95),
        pct(1.0)
    );
    println!(
        "labels: generated {}, inserted {}, expanded {}",
        agg.labels_generated, agg.labels_inserted, agg.labels_expanded
    );
    println!(
        "pruned: bound {}, expectation {}, dominance {} (total {}), dominated removals {}",
        agg.pruned_ub,
        agg.pruned_exp,
        agg.pruned_fsd,
        agg.total_pruned(),
        agg.removed_dominated
    );
    Ok(0)
}

fn cmd_oracle_check(args: OracleCheckArgs) -> Result<u8> {
    let specs: Vec<RiskSpec> = args
        .rhos
        .split(',')
        .map(|s| s.trim().parse())
        .collect::<Result<_>>()?;
    let options = RouteOptions {
        corrupt_dominance: args.corrupt_dominance,
        ..RouteOptions::default()
    };

    let indices: Vec<u64> = (0..args.instances as u64).collect();
    let outcomes: Vec<Result<Vec<String>>> = util::par_map(&indices, |&i| {
        let inst = random_small_instance(args.seed.wrapping_add(i), args.max_nodes)?;
        let mut failures = Vec::new();
        for spec in &specs {
            let dest = inst.graph.node_index(inst.dest)?;
            let heur =
                HeuristicTable::build(&inst.graph, &inst.profile, dest, HeuristicKind::Network)?;
            let got = route(
                &inst.graph,
                &inst.profile,
                &heur,
                spec,
                inst.origin,
                inst.dest,
                &inst.depart,
                &options,
            )?;
            let want = oracle::enumerate_optimal(
                &inst.graph,
                &inst.profile,
                spec,
                inst.graph.node_index(inst.origin)?,
                dest,
                &inst.depart,
                inst.graph.num_nodes(),
                options.horizon,
            )?;
            let want_rho = want.as_ref().map(|(v, _)| *v);
            match (got.rho, want) {
                _ if oracle::rho_matches(got.rho, want_rho) => {}
                (g, w) => failures.push(format!(
                    "instance {i} rho {spec}: search {:?} vs enumeration {:?}",
                    g,
                    w.map(|(v, _)| v)
                )),
            }
        }
        Ok(failures)
    });

    let mut failed = 0usize;
    for outcome in outcomes {
        for line in outcome? {
            println!("FAIL {line}");
            failed += 1;
        }
    }
    let checks = args.instances * specs.len();
    println!(
        "{} of {checks} checks passed ({} instances x {} risk measures)",
        checks - failed,
        args.instances,
        specs.len()
    );
    Ok(if failed == 0 { 0 } else { 1 })
}
