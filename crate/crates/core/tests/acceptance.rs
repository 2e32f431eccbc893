//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criteria 7 to 9 run on the Cairns GTFS feed shipped in `data/`; set
//! `REPLAN_ACCEPTANCE_GTFS` to use another feed directory.

mod common;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use replan_core::clock::{hm, parse_clock, MINUTE};
use replan_core::config::DEFAULT_DEPARTURES;
use replan_core::delay::{sample_delays, DelayEvent, DelayFeed, DelayParams, DelaySampler};
use replan_core::envelope::build_envelope;
use replan_core::fixtures::toy_network;
use replan_core::gtfs::{load, GtfsSource};
use replan_core::report::{speedup, summarize_results, ResultRow, TimingRow};
use replan_core::sim::{generate_queries, run_experiment, SimContext, SimQuery, Strategy};
use replan_core::tig::build_tig;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn toy_golden() -> Outcome {
    let start = Instant::now();
    let tt = toy_network();
    let tig = build_tig(&tt);
    let s = |n: &str| tt.stop_by_name(n).unwrap();
    let q = SimQuery { id: 0, origin: s("s1"), destination: s("s6"), departure: hm(8, 0) };
    let run = |feed: &DelayFeed| {
        let ctx = SimContext::new(&tt, &tig, feed);
        run_experiment(&ctx, &[q], &Strategy::ALL, 1).unwrap()
    };
    let calm = run(&DelayFeed::empty());
    let t2 = tt.trip_by_name("t2").unwrap();
    let late = DelayFeed::new(&tt, vec![DelayEvent { trip: t2, at: hm(8, 0), delay: 10 * MINUTE }]).unwrap();
    let delayed = run(&late);
    let arr = |rs: &[replan_core::sim::SimResult], st| rs.iter().find(|r| r.strategy == Some(st)).unwrap().arrival;
    let all_840 = Strategy::ALL.iter().all(|&st| arr(&calm, st) == Some(hm(8, 40)));
    let dr = arr(&delayed, Strategy::DrPull) == Some(hm(8, 25)) && arr(&delayed, Strategy::DrPush) == Some(hm(8, 25));
    let sp = arr(&delayed, Strategy::Sp) == Some(hm(8, 40));
    let secs = start.elapsed().as_secs_f64();
    outcome(
        all_840 && dr && sp && secs < 1.0,
        format!("no delay: all 08:40 = {all_840}; t2 +10: DR pull/push 08:25 = {dr}, SP 08:40 = {sp}; {secs:.3} s"),
    )
}

fn tig_golden() -> Outcome {
    let tt = toy_network();
    let tig = build_tig(&tt);
    let s = |n: &str| tt.stop_by_name(n).unwrap();
    let mut want = vec![
        (s("s1"), s("s3"), 600),
        (s("s3"), s("s5"), 600),
        (s("s5"), s("s7"), 600),
        (s("s7"), s("s6"), 600),
        (s("s2"), s("s3"), 300),
        (s("s3"), s("s4"), 300),
        (s("s4"), s("s6"), 300),
        (s("s5"), s("s4"), 300),
        (s("s8"), s("s5"), 900),
    ];
    want.sort();
    let got: Vec<_> = tig.edges().collect();
    outcome(got == want, format!("{} edges, exact match = {}", got.len(), got == want))
}

fn envelope_golden() -> Outcome {
    let tt = toy_network();
    let tig = build_tig(&tt);
    let s = |n: &str| tt.stop_by_name(n).unwrap();
    let env = build_envelope(&tt, &tt, &tig, s("s1"), s("s6"), hm(8, 0), hm(8, 40)).unwrap();
    let mut got: Vec<String> = env
        .connections()
        .iter()
        .map(|c| format!("{}:{}->{}", tt.trip_name(c.trip), tt.stop_name(c.dep_stop), tt.stop_name(c.arr_stop)))
        .collect();
    got.sort();
    let want = ["t1:s1->s3", "t1:s3->s5", "t1:s5->s7", "t1:s7->s6", "t2:s3->s4", "t2:s4->s6", "t3:s4->s6", "t3:s5->s4"];
    let ok = got == want;
    outcome(ok, format!("{} connections {:?}; excludes t2:s2->s3 and t3:s8->s5 = {ok}", got.len(), got))
}

fn csa_oracle() -> Outcome {
    let start = Instant::now();
    let t = common::checks::csa_vs_oracle(50, 20, 4);
    let secs = start.elapsed().as_secs_f64();
    outcome(
        t.ok() && t.checked == 1000 && secs < 60.0,
        format!(
            "{} queries on 50 timetables, {} mismatches {:?}; {secs:.1} s",
            t.checked,
            t.failures.len(),
            t.failures.first()
        ),
    )
}

fn envelope_soundness() -> Outcome {
    let start = Instant::now();
    let t = common::checks::envelope_soundness(200, 20, 5);
    let secs = start.elapsed().as_secs_f64();
    outcome(
        t.ok() && secs < 120.0,
        format!(
            "200 instances x 20 feeds, {} journeys enumerated, {} violations {:?}; {secs:.1} s",
            t.checked,
            t.failures.len(),
            t.failures.first()
        ),
    )
}

fn push_pull() -> Outcome {
    let t = common::checks::push_equals_pull(100, 6);
    outcome(
        t.ok(),
        format!("100 instances, {} queries, {} differences {:?}", t.checked, t.failures.len(), t.failures.first()),
    )
}

struct FeedRun {
    rows: Vec<ResultRow>,
    timings: Vec<TimingRow>,
    connections: usize,
    label: String,
}

fn feed_run() -> Result<FeedRun, String> {
    let dir = std::env::var_os("REPLAN_ACCEPTANCE_GTFS")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/gtfs/cairns"));
    let src = GtfsSource { walk_radius_m: Some(250.0), ..GtfsSource::new(&dir) };
    let tt = load(&src).map_err(|e| format!("{}: {e}", dir.display()))?;
    let tig = build_tig(&tt);
    let params = DelayParams::default();
    let feed = sample_delays(&tt, &params, 2024).map_err(|e| e.to_string())?;
    let times: Vec<u32> = DEFAULT_DEPARTURES.iter().map(|s| parse_clock(s).unwrap()).collect();
    let queries = generate_queries(&tt, &feed, 100, &times, 2024, 200_000).map_err(|e| e.to_string())?;
    let ctx = SimContext::new(&tt, &tig, &feed);
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let results = run_experiment(&ctx, &queries, &Strategy::ALL, workers).map_err(|e| e.to_string())?;
    let peaks = params.profile(&tt);
    let rows = results
        .iter()
        .map(|r| ResultRow::from_result(r, &tt, &peaks))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let timings = results.iter().filter_map(TimingRow::from_result).collect();
    Ok(FeedRun {
        rows,
        timings,
        connections: tt.connection_count(),
        label: format!(
            "{} ({} stops, {} connections, {} trips, {} queries, {} delay events)",
            dir.file_name().unwrap_or_default().to_string_lossy(),
            tt.stop_count(),
            tt.connection_count(),
            tt.trip_count(),
            queries.len(),
            feed.len()
        ),
    })
}

fn envelope_economy(run: &FeedRun) -> Outcome {
    let summary = summarize_results(&run.rows, run.connections, 90);
    let push = &summary.strategies[&Strategy::DrPush];
    let (Some(size), Some(server)) = (push.envelope_size_median_pct, push.journey_delayed_pct) else {
        return outcome(false, "no envelope statistics");
    };
    outcome(
        size <= 25.0 && server <= 20.0,
        format!(
            "median envelope {:.0} connections = {size:.2}% of |C| (<= 25%); server-call stops {server:.2}% of intermediate stops (<= 20%); envelope-delayed {:.2}%, neither {:.2}%; mean pushed {:.0} bytes",
            push.envelope_size_median.unwrap_or(0.0),
            push.envelope_delayed_pct.unwrap_or(0.0),
            push.neither_delayed_pct.unwrap_or(0.0),
            push.mean_pushed_bytes.unwrap_or(0.0)
        ),
    )
}

fn speedup_direction(run: &FeedRun) -> Outcome {
    let Some(ratio) = speedup(&run.timings) else { return outcome(false, "push or pull missing") };
    let mean_ms = |s| {
        let v: Vec<f64> = run.timings.iter().filter(|t| t.strategy == s).map(|t| t.total_ns as f64 / 1e6).collect();
        v.iter().sum::<f64>() / v.len().max(1) as f64
    };
    outcome(
        ratio >= 3.0,
        format!(
            "mean compute per query: pull {:.3} ms, push {:.3} ms, ratio {ratio:.2}x (>= 3x)",
            mean_ms(Strategy::DrPull),
            mean_ms(Strategy::DrPush)
        ),
    )
}

fn savings_direction(run: &FeedRun) -> Outcome {
    let summary = summarize_results(&run.rows, run.connections, 90);
    let mut pass = summary.queries >= 1000;
    let mut parts = vec![format!("{} queries", summary.queries)];
    for c in &summary.comparisons {
        if c.baseline == Strategy::DrPull {
            continue;
        }
        pass &= c.overall.mean_diff_min >= 0.0;
        parts.push(format!(
            "{} vs DR: {:.1}% affected, mean saving {:.2} min overall, {:.2} min when affected, DR later on {}",
            c.baseline,
            c.overall.affected_pct,
            c.overall.mean_diff_min,
            c.overall.mean_diff_affected_min.unwrap_or(0.0),
            c.overall.candidate_later
        ));
    }
    pass &= summary.comparisons.iter().filter(|c| c.baseline != Strategy::DrPull).count() == 3;
    outcome(pass, parts.join("; "))
}

fn sampler_statistics() -> Outcome {
    let mean = 300.0;
    let sampler = DelaySampler::new(mean, 30.0).unwrap();
    let draw_all = |seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..100_000).map(|_| sampler.draw(&mut rng)).collect::<Vec<_>>()
    };
    let draws = draw_all(10);
    let avg = draws.iter().map(|d| d.0).sum::<f64>() / draws.len() as f64;
    let kept: Vec<u32> = draws.iter().filter_map(|d| d.1).collect();
    let min_kept = kept.iter().copied().min().unwrap_or(0);
    let rel = (avg - mean).abs() / mean;
    let repeat = draw_all(10) == draws;
    outcome(
        rel <= 0.02 && min_kept >= 30 && repeat,
        format!(
            "mean {avg:.2} s vs {mean} s ({:.2}% off); {} of 100000 kept, smallest {min_kept} s; same seed reproduces = {repeat}",
            rel * 100.0,
            kept.len()
        ),
    )
}

fn main() -> ExitCode {
    let mut failed = 0;
    let mut report = |n: u32, name: &str, o: Outcome| {
        println!("criterion {n:>2} {} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed += 1;
        }
    };
    report(1, "toy network arrivals", toy_golden());
    report(2, "TIG edges", tig_golden());
    report(3, "toy envelope", envelope_golden());
    report(4, "CSA vs time-expanded oracle", csa_oracle());
    report(5, "envelope soundness", envelope_soundness());
    report(6, "push equals pull", push_pull());
    match feed_run() {
        Ok(run) => {
            println!("real feed: {}", run.label);
            report(7, "envelope economy", envelope_economy(&run));
            report(8, "push speedup", speedup_direction(&run));
            report(9, "dynamic replanning savings", savings_direction(&run));
        }
        Err(e) => {
            for (n, name) in [(7, "envelope economy"), (8, "push speedup"), (9, "dynamic replanning savings")] {
                report(n, name, outcome(false, format!("feed run failed: {e}")));
            }
        }
    }
    report(10, "delay sampler", sampler_statistics());
    println!("acceptance: {} of 10 criteria passed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
