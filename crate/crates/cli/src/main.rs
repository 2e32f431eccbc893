//! `replan`: ingest a GTFS feed, precompute the TIG, sample delays,
//! simulate replanning strategies and summarize the results.
//!
//! Exit codes: 0 success, 1 I/O or other failure, 2 usage, 3 parse error,
//! 4 validation error, 5 config or cache mismatch, 6 infeasible queries.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use replan_core::cache::{self, Fingerprint};
use replan_core::config::{
    departure_labels, now_rfc3339, parse_service_day, sha256_hex, ExperimentConfig, RunManifest, ARTIFACT_VERSION,
};
use replan_core::delay::{sample_delays, DelayFeed, DelayParams};
use replan_core::gtfs::{self, GtfsSource, DEFAULT_LOOP_SECONDS, DEFAULT_WALK_SPEED};
use replan_core::report::{
    read_csv, runtime_rows, savings_rows, speedup, summarize_results, write_csv, ResultRow, TimingRow,
};
use replan_core::sim::{generate_queries, run_experiment, SimContext};
use replan_core::tig::{build_tig, Tig};
use replan_core::timetable::Timetable;
use replan_core::{Error, ErrorKind, Result};

#[derive(Parser)]
#[command(name = "replan", version, about = "Dynamic replanning experiments on GTFS timetables")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Import a GTFS directory into a timetable cache.
    Ingest {
        #[arg(long)]
        gtfs: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// busiest-weekday, a weekday name, or YYYY-MM-DD.
        #[arg(long, default_value = "busiest-weekday")]
        service: String,
        /// Loop (same-stop transfer) time for stops without one.
        #[arg(long, default_value_t = DEFAULT_LOOP_SECONDS)]
        loop_seconds: u32,
        /// Link stops within this many metres by footpaths.
        #[arg(long)]
        walk_radius: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_WALK_SPEED)]
        walk_speed: f64,
    },
    /// Build the time-independent graph next to a timetable cache.
    Precompute {
        #[arg(long)]
        cache: PathBuf,
    },
    /// Draw a delay feed for a cached timetable.
    SampleDelays {
        #[arg(long)]
        cache: PathBuf,
        #[arg(long)]
        seed: u64,
        /// TOML file with delay parameters; defaults when omitted.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the strategies of an experiment config.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Aggregate a simulation output directory.
    Report {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Parse => 3,
        ErrorKind::Validation => 4,
        ErrorKind::Config => 5,
        ErrorKind::Infeasible => 6,
        ErrorKind::Io | ErrorKind::Other => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Ingest { gtfs, out, service, loop_seconds, walk_radius, walk_speed } => {
            cmd_ingest(&gtfs, &out, &service, loop_seconds, walk_radius, walk_speed)
        }
        Command::Precompute { cache } => cmd_precompute(&cache),
        Command::SampleDelays { cache, seed, params, out } => cmd_sample_delays(&cache, seed, params.as_deref(), &out),
        Command::Simulate { config, out } => cmd_simulate(&config, &out),
        Command::Report { results, out } => cmd_report(&results, &out),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.kind()))
        }
    }
}

fn counts(tt: &Timetable) -> String {
    format!(
        "{} stops, {} connections, {} trips, {} footpaths",
        tt.stop_count(),
        tt.connection_count(),
        tt.trip_count(),
        tt.footpaths().len()
    )
}

fn cmd_ingest(
    dir: &Path,
    out: &Path,
    service: &str,
    loop_seconds: u32,
    walk_radius_m: Option<f64>,
    walk_speed: f64,
) -> Result<()> {
    let src = GtfsSource {
        service: parse_service_day(service)?,
        loop_seconds,
        walk_radius_m,
        walk_speed,
        ..GtfsSource::new(dir)
    };
    let tt = gtfs::load(&src)?;
    let fp = cache::write_timetable(out, &tt)?;
    println!("{}", counts(&tt));
    println!("valid; fingerprint {fp}");
    Ok(())
}

/// Loads the TIG cached beside `cache_path`, or builds it when absent.
fn tig_for(cache_path: &Path, tt: &Timetable, fp: &Fingerprint) -> Result<Tig> {
    let path = cache::tig_path(cache_path);
    if path.exists() {
        cache::read_tig(&path, fp)
    } else {
        Ok(build_tig(tt))
    }
}

fn cmd_precompute(cache_path: &Path) -> Result<()> {
    let (tt, fp) = cache::read_timetable(cache_path)?;
    let tig = build_tig(&tt);
    let path = cache::tig_path(cache_path);
    cache::write_tig(&path, &tig, &fp)?;
    println!("{} edges -> {}", tig.edge_count(), path.display());
    Ok(())
}

fn read_params(path: Option<&Path>) -> Result<DelayParams> {
    let Some(path) = path else { return Ok(DelayParams::default()) };
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let params: DelayParams = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    params.check()?;
    Ok(params)
}

fn cmd_sample_delays(cache_path: &Path, seed: u64, params: Option<&Path>, out: &Path) -> Result<()> {
    let (tt, fp) = cache::read_timetable(cache_path)?;
    let feed = sample_delays(&tt, &read_params(params)?, seed)?;
    feed.write_text(&tt, Some(&fp.to_hex()), BufWriter::new(File::create(out)?))?;
    println!("{} delay events over {} trips", feed.len(), feed.delayed_trips().len());
    Ok(())
}

/// Reads a feed file, refusing one written for another timetable.
fn read_feed(path: &Path, tt: &Timetable, fp: &Fingerprint) -> Result<DelayFeed> {
    let (feed, written_for) = DelayFeed::read_text(tt, BufReader::new(File::open(path)?))?;
    match written_for {
        Some(w) if w != fp.to_hex() => Err(Error::Cache(format!(
            "{} was sampled for timetable {w}, but the dataset is {fp}; re-run sample-delays",
            path.display()
        ))),
        _ => Ok(feed),
    }
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Config(e.to_string()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn cmd_simulate(config: &Path, out: &Path) -> Result<()> {
    let started_at = now_rfc3339();
    let (cfg, text) = ExperimentConfig::load(config)?;
    let (tt, fp, tig) = match (&cfg.dataset.cache, cfg.gtfs_source()) {
        (Some(path), _) => {
            let (tt, fp) = cache::read_timetable(path)?;
            let tig = tig_for(path, &tt, &fp)?;
            (tt, fp, tig)
        }
        (None, Some(src)) => {
            let tt = gtfs::load(&src)?;
            let fp = Fingerprint::of_timetable(&tt)?;
            let tig = build_tig(&tt);
            (tt, fp, tig)
        }
        (None, None) => return Err(Error::Config("dataset: no source".into())),
    };
    let feed = match &cfg.delays.feed {
        Some(path) => read_feed(path, &tt, &fp)?,
        None => sample_delays(&tt, &cfg.delays.params, cfg.delays.seed)?,
    };
    let times = cfg.departure_times()?;
    let strategies = cfg.strategies()?;
    let queries = generate_queries(&tt, &feed, cfg.queries.pairs, &times, cfg.query_seed(), cfg.queries.max_attempts)?;
    eprintln!("{}; {} delay events; {} queries", counts(&tt), feed.len(), queries.len());

    let ctx = SimContext::new(&tt, &tig, &feed);
    let results = run_experiment(&ctx, &queries, &strategies, cfg.simulation.workers)?;
    let peaks = cfg.delays.params.profile(&tt);
    let rows: Vec<ResultRow> = results.iter().map(|r| ResultRow::from_result(r, &tt, &peaks)).collect::<Result<_>>()?;
    let timings: Vec<TimingRow> = results.iter().filter_map(TimingRow::from_result).collect();

    fs::create_dir_all(out)?;
    write_csv(&rows, BufWriter::new(File::create(out.join("results.csv"))?))?;
    write_csv(&timings, BufWriter::new(File::create(out.join("timings.csv"))?))?;
    feed.write_text(&tt, Some(&fp.to_hex()), BufWriter::new(File::create(out.join("delays.csv"))?))?;
    let manifest = RunManifest {
        artifact_version: ARTIFACT_VERSION.to_string(),
        config_sha256: sha256_hex(text.as_bytes()),
        dataset_fingerprint: fp.to_hex(),
        seed: cfg.delays.seed,
        query_seed: cfg.query_seed(),
        stops: tt.stop_count(),
        connections: tt.connection_count(),
        trips: tt.trip_count(),
        footpaths: tt.footpaths().len(),
        queries: queries.len(),
        strategies,
        departure_times: departure_labels(&times),
        penalty_minutes: cfg.simulation.penalty_minutes,
        started_at,
        finished_at: now_rfc3339(),
    };
    write_json(&out.join("manifest.json"), &manifest)?;
    println!("{} runs -> {}", rows.len(), out.display());
    Ok(())
}

fn cmd_report(results: &Path, out: &Path) -> Result<()> {
    let manifest: RunManifest = {
        let path = results.join("manifest.json");
        let text = fs::read_to_string(&path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::parse("manifest.json", 0, e.to_string()))?
    };
    let rows: Vec<ResultRow> = read_csv("results.csv", BufReader::new(File::open(results.join("results.csv"))?))?;
    let timings_path = results.join("timings.csv");
    let timings: Vec<TimingRow> = if timings_path.exists() {
        read_csv("timings.csv", BufReader::new(File::open(timings_path)?))?
    } else {
        Vec::new()
    };
    let summary = summarize_results(&rows, manifest.connections, manifest.penalty_minutes);

    let runtime = runtime_rows(&timings);

    fs::create_dir_all(out)?;
    write_json(&out.join("summary.json"), &summary)?;
    write_csv(&rows, BufWriter::new(File::create(out.join("results.csv"))?))?;
    write_csv(&savings_rows(&summary), BufWriter::new(File::create(out.join("savings_by_departure.csv"))?))?;
    write_csv(&runtime, BufWriter::new(File::create(out.join("runtime_by_departure.csv"))?))?;

    println!("{:<8} {:>6} {:>9} {:>12} {:>10}", "strategy", "runs", "stranded", "travel_min", "compute_ms");
    for (s, st) in &summary.strategies {
        let ms =
            runtime.iter().find(|r| r.departure == "all" && r.strategy == *s).map_or(f64::NAN, |r| r.mean_total_ms);
        println!(
            "{:<8} {:>6} {:>9} {:>12.2} {:>10.3}",
            s.as_str(),
            st.overall.runs,
            st.overall.stranded,
            st.overall.mean_travel_min.unwrap_or(f64::NAN),
            ms
        );
    }
    for c in &summary.comparisons {
        println!(
            "{} vs {}: {:.1}% affected, mean difference {:.2} min",
            c.baseline, c.candidate, c.overall.affected_pct, c.overall.mean_diff_min
        );
    }
    if let Some(x) = speedup(&timings) {
        println!("push speedup over pull: {x:.2}x");
    }
    Ok(())
}
