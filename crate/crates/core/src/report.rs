//! Result tables and strategy comparisons.
//!
//! `results.csv` and `summary.json` depend only on the inputs and seed.
//! Wall-clock numbers go to `timings.csv` and the runtime tables.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::clock::{format_clock, Time, MINUTE};
use crate::delay::{classify_period, PeakProfile};
use crate::error::{Error, Result};
use crate::sim::{SimResult, Strategy};
use crate::timetable::Timetable;

pub const DEFAULT_PENALTY_MINUTES: u32 = 90;

fn join<T: ToString>(items: impl IntoIterator<Item = T>) -> String {
    items.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

/// One line of `results.csv`. Column names are stable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub query_id: u32,
    pub origin: String,
    pub destination: String,
    pub departure: String,
    pub departure_s: Time,
    pub period: String,
    pub strategy: Strategy,
    pub arrival: String,
    pub arrival_s: Option<Time>,
    pub stranded: bool,
    pub actions: u32,
    pub connections: u32,
    pub final_walks: u32,
    pub misses: u32,
    pub replans: u32,
    pub server_calls: u32,
    pub local_replans: u32,
    pub envelope_rebuilds: u32,
    pub repairs: u32,
    pub repair_failures: u32,
    pub intermediate_stops: u32,
    pub journey_delayed: u32,
    pub envelope_delayed: u32,
    pub neither_delayed: u32,
    /// Envelope size after each push step, `;`-separated.
    pub envelope_sizes: String,
    pub pushed_bytes: u64,
    pub scanned_server: u64,
    pub scanned_local: u64,
    /// Executed connection ids, `;`-separated.
    pub executed: String,
}

impl ResultRow {
    pub fn from_result(r: &SimResult, tt: &Timetable, peaks: &PeakProfile) -> Result<ResultRow> {
        let (q, strategy) = match (r.query, r.strategy) {
            (Some(q), Some(s)) => (q, s),
            _ => return Err(Error::InconsistentState("result without query or strategy".into())),
        };
        Ok(ResultRow {
            query_id: q.id,
            origin: tt.stop_name(q.origin).to_string(),
            destination: tt.stop_name(q.destination).to_string(),
            departure: format_clock(q.departure),
            departure_s: q.departure,
            period: classify_period(q.departure, peaks).as_str().to_string(),
            strategy,
            arrival: r.arrival.map(format_clock).unwrap_or_default(),
            arrival_s: r.arrival,
            stranded: r.stranded(),
            actions: r.actions,
            connections: r.connections,
            final_walks: r.final_walks,
            misses: r.misses,
            replans: r.replans,
            server_calls: r.server_calls,
            local_replans: r.local_replans,
            envelope_rebuilds: r.envelope_rebuilds,
            repairs: r.repairs,
            repair_failures: r.repair_failures,
            intermediate_stops: r.intermediate_stops,
            journey_delayed: r.journey_delayed,
            envelope_delayed: r.envelope_delayed,
            neither_delayed: r.neither_delayed,
            envelope_sizes: join(&r.envelope_sizes),
            pushed_bytes: r.pushed_bytes,
            scanned_server: r.scanned_server,
            scanned_local: r.scanned_local,
            executed: join(r.executed.iter().map(|c| c.0)),
        })
    }

    pub fn envelope_size_list(&self) -> Vec<usize> {
        self.envelope_sizes.split(';').filter_map(|s| s.parse().ok()).collect()
    }
}

/// One line of `timings.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub query_id: u32,
    pub departure_s: Time,
    pub strategy: Strategy,
    pub server_ns: u64,
    pub edge_ns: u64,
    pub total_ns: u64,
}

impl TimingRow {
    pub fn from_result(r: &SimResult) -> Option<TimingRow> {
        Some(TimingRow {
            query_id: r.query?.id,
            departure_s: r.query?.departure,
            strategy: r.strategy?,
            server_ns: r.server_ns,
            edge_ns: r.edge_ns,
            total_ns: r.compute_ns(),
        })
    }
}

pub fn write_csv<T: Serialize, W: Write>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row).map_err(|e| Error::Config(format!("csv: {e}")))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: for<'de> Deserialize<'de>, R: Read>(file: &str, input: R) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize()
        .enumerate()
        .map(|(i, row)| row.map_err(|e| Error::parse(file, i as u64 + 2, e.to_string())))
        .collect()
}

/// Nearest-rank quantile of sorted data.
pub fn quantile(sorted: &[f64], p: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let rank = (p * sorted.len() as f64).ceil() as usize;
    Some(sorted[rank.clamp(1, sorted.len()) - 1])
}

fn mean(xs: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (sum, n) = xs.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Quantiles {
    pub p05: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub p95: f64,
}

impl Quantiles {
    fn of(mut xs: Vec<f64>) -> Option<Quantiles> {
        xs.sort_by(f64::total_cmp);
        Some(Quantiles {
            p05: quantile(&xs, 0.05)?,
            p25: quantile(&xs, 0.25)?,
            p50: quantile(&xs, 0.50)?,
            p75: quantile(&xs, 0.75)?,
            p95: quantile(&xs, 0.95)?,
        })
    }
}

/// Arrival differences `baseline - candidate` in minutes (positive means
/// the candidate arrives earlier).
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct DiffStats {
    pub queries: usize,
    pub affected: usize,
    pub affected_pct: f64,
    /// Over all queries.
    pub mean_diff_min: f64,
    /// Over affected queries only.
    pub mean_diff_affected_min: Option<f64>,
    pub quantiles_affected_min: Option<Quantiles>,
    /// Affected queries where the candidate arrives later.
    pub candidate_later: usize,
    pub baseline_stranded: usize,
    pub candidate_stranded: usize,
}

impl DiffStats {
    fn of(diffs: &[(f64, bool, bool)]) -> DiffStats {
        let affected: Vec<f64> = diffs.iter().map(|d| d.0).filter(|&d| d != 0.0).collect();
        DiffStats {
            queries: diffs.len(),
            affected: affected.len(),
            affected_pct: if diffs.is_empty() {
                0.0
            } else {
                round3(100.0 * affected.len() as f64 / diffs.len() as f64)
            },
            mean_diff_min: round3(mean(diffs.iter().map(|d| d.0)).unwrap_or(0.0)),
            mean_diff_affected_min: mean(affected.iter().copied()).map(round3),
            candidate_later: affected.iter().filter(|&&d| d < 0.0).count(),
            quantiles_affected_min: Quantiles::of(affected),
            baseline_stranded: diffs.iter().filter(|d| d.1).count(),
            candidate_stranded: diffs.iter().filter(|d| d.2).count(),
        }
    }
}

/// The arrival difference of one query in minutes. A stranded side counts
/// as arriving `penalty` after the other side; both stranded is no change.
pub fn arrival_diff_min(baseline: Option<Time>, candidate: Option<Time>, penalty: u32) -> f64 {
    let p = f64::from(penalty);
    match (baseline, candidate) {
        (Some(b), Some(c)) => (f64::from(b) - f64::from(c)) / f64::from(MINUTE),
        (None, Some(_)) => p,
        (Some(_), None) => -p,
        (None, None) => 0.0,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairComparison {
    pub baseline: Strategy,
    pub candidate: Strategy,
    pub overall: DiffStats,
    pub by_departure: BTreeMap<String, DiffStats>,
    pub by_period: BTreeMap<String, DiffStats>,
}

/// Compares two strategies over the queries both were run on.
pub fn compare(rows: &[ResultRow], baseline: Strategy, candidate: Strategy, penalty_min: u32) -> PairComparison {
    let mut by_query: BTreeMap<u32, [Option<&ResultRow>; 2]> = BTreeMap::new();
    for r in rows {
        let slot = if r.strategy == baseline {
            0
        } else if r.strategy == candidate {
            1
        } else {
            continue;
        };
        by_query.entry(r.query_id).or_default()[slot] = Some(r);
    }
    let mut all = Vec::new();
    let mut dep: BTreeMap<String, Vec<(f64, bool, bool)>> = BTreeMap::new();
    let mut period: BTreeMap<String, Vec<(f64, bool, bool)>> = BTreeMap::new();
    for [b, c] in by_query.values() {
        let (Some(b), Some(c)) = (b, c) else { continue };
        let d = (arrival_diff_min(b.arrival_s, c.arrival_s, penalty_min), b.stranded, c.stranded);
        all.push(d);
        dep.entry(b.departure.clone()).or_default().push(d);
        period.entry(b.period.clone()).or_default().push(d);
    }
    PairComparison {
        baseline,
        candidate,
        overall: DiffStats::of(&all),
        by_departure: dep.iter().map(|(k, v)| (k.clone(), DiffStats::of(v))).collect(),
        by_period: period.iter().map(|(k, v)| (k.clone(), DiffStats::of(v))).collect(),
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct GroupStats {
    pub runs: usize,
    pub stranded: usize,
    pub mean_travel_min: Option<f64>,
}

impl GroupStats {
    fn of(rows: &[&ResultRow]) -> GroupStats {
        GroupStats {
            runs: rows.len(),
            stranded: rows.iter().filter(|r| r.stranded).count(),
            mean_travel_min: mean(
                rows.iter().filter_map(|r| r.arrival_s.map(|a| f64::from(a - r.departure_s) / f64::from(MINUTE))),
            )
            .map(round3),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct StrategySummary {
    #[serde(flatten)]
    pub overall: GroupStats,
    pub mean_arrival_s: Option<f64>,
    pub mean_connections: f64,
    pub mean_replans: f64,
    pub mean_server_calls: f64,
    pub mean_local_replans: f64,
    pub misses: u64,
    pub repairs: u64,
    pub repair_failures: u64,
    /// Per-query share of intermediate stops in each scenario, in percent,
    /// averaged over queries with at least one intermediate stop.
    pub journey_delayed_pct: Option<f64>,
    pub envelope_delayed_pct: Option<f64>,
    pub neither_delayed_pct: Option<f64>,
    /// Per-query mean envelope size, summarized over queries.
    pub envelope_size_median: Option<f64>,
    pub envelope_size_mean: Option<f64>,
    pub envelope_size_median_pct: Option<f64>,
    pub mean_pushed_bytes: Option<f64>,
    pub mean_scanned_server: f64,
    pub mean_scanned_local: f64,
    pub by_departure: BTreeMap<String, GroupStats>,
    pub by_period: BTreeMap<String, GroupStats>,
}

fn summarize(rows: &[&ResultRow], connection_count: usize) -> StrategySummary {
    let n = rows.len().max(1) as f64;
    let avg = |f: &dyn Fn(&ResultRow) -> f64| round3(rows.iter().map(|r| f(r)).sum::<f64>() / n);
    let with_stops: Vec<&&ResultRow> = rows.iter().filter(|r| r.intermediate_stops > 0).collect();
    let share = |f: &dyn Fn(&ResultRow) -> u32| {
        mean(with_stops.iter().map(|r| 100.0 * f64::from(f(r)) / f64::from(r.intermediate_stops))).map(round3)
    };
    let mut sizes: Vec<f64> = rows
        .iter()
        .filter_map(|r| {
            let s = r.envelope_size_list();
            mean(s.iter().map(|&x| x as f64))
        })
        .collect();
    sizes.sort_by(f64::total_cmp);
    let median = quantile(&sizes, 0.5);
    let pushed = rows.iter().any(|r| !r.envelope_sizes.is_empty());
    let mut by_dep: BTreeMap<String, Vec<&ResultRow>> = BTreeMap::new();
    let mut by_period: BTreeMap<String, Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        by_dep.entry(r.departure.clone()).or_default().push(r);
        by_period.entry(r.period.clone()).or_default().push(r);
    }
    StrategySummary {
        overall: GroupStats::of(rows),
        mean_arrival_s: mean(rows.iter().filter_map(|r| r.arrival_s.map(f64::from))).map(round3),
        mean_connections: avg(&|r| f64::from(r.connections)),
        mean_replans: avg(&|r| f64::from(r.replans)),
        mean_server_calls: avg(&|r| f64::from(r.server_calls)),
        mean_local_replans: avg(&|r| f64::from(r.local_replans)),
        misses: rows.iter().map(|r| u64::from(r.misses)).sum(),
        repairs: rows.iter().map(|r| u64::from(r.repairs)).sum(),
        repair_failures: rows.iter().map(|r| u64::from(r.repair_failures)).sum(),
        journey_delayed_pct: if pushed { share(&|r| r.journey_delayed) } else { None },
        envelope_delayed_pct: if pushed { share(&|r| r.envelope_delayed) } else { None },
        neither_delayed_pct: if pushed { share(&|r| r.neither_delayed) } else { None },
        envelope_size_median: median.map(round3),
        envelope_size_mean: mean(sizes.iter().copied()).map(round3),
        envelope_size_median_pct: median
            .filter(|_| connection_count > 0)
            .map(|m| round3(100.0 * m / connection_count as f64)),
        mean_pushed_bytes: pushed.then(|| avg(&|r| r.pushed_bytes as f64)),
        mean_scanned_server: avg(&|r| r.scanned_server as f64),
        mean_scanned_local: avg(&|r| r.scanned_local as f64),
        by_departure: by_dep.iter().map(|(k, v)| (k.clone(), GroupStats::of(v))).collect(),
        by_period: by_period.iter().map(|(k, v)| (k.clone(), GroupStats::of(v))).collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub connections: usize,
    pub queries: usize,
    pub penalty_minutes: u32,
    pub strategies: BTreeMap<Strategy, StrategySummary>,
    pub comparisons: Vec<PairComparison>,
}

/// Aggregates per strategy, then compares every baseline against the
/// dynamic strategy (push if it ran, else pull), and push against pull.
pub fn summarize_results(rows: &[ResultRow], connection_count: usize, penalty_min: u32) -> Summary {
    let mut per: BTreeMap<Strategy, Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        per.entry(r.strategy).or_default().push(r);
    }
    let dynamic = [Strategy::DrPush, Strategy::DrPull].into_iter().find(|s| per.contains_key(s));
    let mut comparisons = Vec::new();
    if let Some(dr) = dynamic {
        for &b in per.keys() {
            if b != Strategy::DrPush && b != Strategy::DrPull {
                comparisons.push(compare(rows, b, dr, penalty_min));
            }
        }
        if per.contains_key(&Strategy::DrPull) && dr == Strategy::DrPush {
            comparisons.push(compare(rows, Strategy::DrPull, Strategy::DrPush, penalty_min));
        }
    }
    let mut ids: Vec<u32> = rows.iter().map(|r| r.query_id).collect();
    ids.sort_unstable();
    ids.dedup();
    Summary {
        connections: connection_count,
        queries: ids.len(),
        penalty_minutes: penalty_min,
        strategies: per.iter().map(|(s, v)| (*s, summarize(v, connection_count))).collect(),
        comparisons,
    }
}

/// Savings distribution per departure time, one row per compared pair.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SavingsRow {
    pub departure: String,
    pub baseline: Strategy,
    pub candidate: Strategy,
    pub queries: usize,
    pub affected_pct: f64,
    pub mean_diff_min: f64,
    pub p05: Option<f64>,
    pub p25: Option<f64>,
    pub p50: Option<f64>,
    pub p75: Option<f64>,
    pub p95: Option<f64>,
}

pub fn savings_rows(summary: &Summary) -> Vec<SavingsRow> {
    let mut out = Vec::new();
    for c in &summary.comparisons {
        for (dep, s) in std::iter::once(("all", &c.overall)).chain(c.by_departure.iter().map(|(k, v)| (k.as_str(), v)))
        {
            let q = s.quantiles_affected_min.as_ref();
            out.push(SavingsRow {
                departure: dep.to_string(),
                baseline: c.baseline,
                candidate: c.candidate,
                queries: s.queries,
                affected_pct: s.affected_pct,
                mean_diff_min: s.mean_diff_min,
                p05: q.map(|q| q.p05),
                p25: q.map(|q| q.p25),
                p50: q.map(|q| q.p50),
                p75: q.map(|q| q.p75),
                p95: q.map(|q| q.p95),
            });
        }
    }
    out
}

/// Mean compute time per query, per strategy and departure time.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RuntimeRow {
    pub departure: String,
    pub strategy: Strategy,
    pub runs: usize,
    pub mean_total_ms: f64,
    pub mean_server_ms: f64,
    pub mean_edge_ms: f64,
    /// Pull time over push time for this departure; on push rows only.
    pub speedup_pull_over_push: Option<f64>,
}

pub fn runtime_rows(timings: &[TimingRow]) -> Vec<RuntimeRow> {
    let mut groups: BTreeMap<(String, Strategy), Vec<&TimingRow>> = BTreeMap::new();
    for t in timings {
        groups.entry(("all".to_string(), t.strategy)).or_default().push(t);
        groups.entry((format_clock(t.departure_s), t.strategy)).or_default().push(t);
    }
    let ms = |ns: f64| round3(ns / 1e6);
    let mut rows: Vec<RuntimeRow> = groups
        .iter()
        .map(|((dep, s), v)| RuntimeRow {
            departure: dep.clone(),
            strategy: *s,
            runs: v.len(),
            mean_total_ms: ms(mean(v.iter().map(|t| t.total_ns as f64)).unwrap_or(0.0)),
            mean_server_ms: ms(mean(v.iter().map(|t| t.server_ns as f64)).unwrap_or(0.0)),
            mean_edge_ms: ms(mean(v.iter().map(|t| t.edge_ns as f64)).unwrap_or(0.0)),
            speedup_pull_over_push: None,
        })
        .collect();
    let mean_ns = |dep: &str, s: Strategy| {
        groups.get(&(dep.to_string(), s)).and_then(|v| mean(v.iter().map(|t| t.total_ns as f64)))
    };
    for r in rows.iter_mut().filter(|r| r.strategy == Strategy::DrPush) {
        if let (Some(pull), Some(push)) =
            (mean_ns(&r.departure, Strategy::DrPull), mean_ns(&r.departure, Strategy::DrPush))
        {
            if push > 0.0 {
                r.speedup_pull_over_push = Some(round3(pull / push));
            }
        }
    }
    rows
}

/// Overall pull/push compute ratio, when both ran.
pub fn speedup(timings: &[TimingRow]) -> Option<f64> {
    let m = |s| mean(timings.iter().filter(|t| t.strategy == s).map(|t| t.total_ns as f64));
    match (m(Strategy::DrPull), m(Strategy::DrPush)) {
        (Some(pull), Some(push)) if push > 0.0 => Some(pull / push),
        _ => None,
    }
}
