//! Virtual-time simulation of one traveller per query.
//!
//! Plans are made with the delays known at the current time, execution
//! follows the realized times. Boarding works iff the vehicle really leaves
//! no earlier than the traveller is ready; a missed boarding leaves the
//! traveller standing at that stop and triggers the strategy's reaction.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clock::{format_clock, Time, INFINITY};
use crate::csa::{CsaSolver, Query};
use crate::delay::{apply_delays, DelayFeed, DelayedView};
use crate::error::{Error, Result};
use crate::replan::{next_action, pull_replan, Action, Position, PushMode, PushReplanner, Server};
use crate::tig::Tig;
use crate::timetable::{continues, ConnId, Connection, Journey, StopId, Timetable};

/// Safety net against a strategy that never makes progress.
const MAX_ACTIONS: u32 = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Strategy {
    /// Static plan, repaired with the next trip of the same route.
    #[serde(rename = "SP")]
    Sp,
    /// One snapshot plan at departure, then repaired like SP.
    #[serde(rename = "SR")]
    Sr,
    /// Push loop that replans only when the journey itself is delayed.
    #[serde(rename = "JDR")]
    Jdr,
    /// Full replan on the server at every stop.
    #[serde(rename = "DR_PULL")]
    DrPull,
    /// Envelope-based push loop.
    #[serde(rename = "DR_PUSH")]
    DrPush,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [Strategy::Sp, Strategy::Sr, Strategy::Jdr, Strategy::DrPull, Strategy::DrPush];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Sp => "SP",
            Strategy::Sr => "SR",
            Strategy::Jdr => "JDR",
            Strategy::DrPull => "DR_PULL",
            Strategy::DrPush => "DR_PUSH",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|x| x.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown strategy `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SimQuery {
    pub id: u32,
    pub origin: StopId,
    pub destination: StopId,
    pub departure: Time,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SimResult {
    pub query: Option<SimQuery>,
    pub strategy: Option<Strategy>,
    /// Realized arrival; `None` when stranded.
    pub arrival: Option<Time>,
    pub executed: Vec<ConnId>,
    /// Actions attempted, including missed boardings.
    pub actions: u32,
    pub connections: u32,
    pub final_walks: u32,
    pub misses: u32,
    /// CSA runs of any kind.
    pub replans: u32,
    pub server_calls: u32,
    pub local_replans: u32,
    pub envelope_rebuilds: u32,
    /// Same-route repairs (SP, SR).
    pub repairs: u32,
    /// Repairs that found no same-route trip and fell back to a replan.
    pub repair_failures: u32,
    /// Decision points after the first one.
    pub intermediate_stops: u32,
    pub journey_delayed: u32,
    pub envelope_delayed: u32,
    pub neither_delayed: u32,
    pub envelope_sizes: Vec<usize>,
    pub pushes: Vec<usize>,
    pub pushed_bytes: u64,
    pub scanned_server: u64,
    pub scanned_local: u64,
    pub server_ns: u64,
    pub edge_ns: u64,
}

impl SimResult {
    pub fn stranded(&self) -> bool {
        self.arrival.is_none()
    }

    pub fn compute_ns(&self) -> u64 {
        self.server_ns + self.edge_ns
    }
}

/// Total bytes pushed to the device: envelopes and update batches.
pub fn meter_pushed_data(result: &SimResult) -> u64 {
    result.pushes.iter().map(|&b| b as u64).sum()
}

/// Shared, immutable inputs of a simulation run.
pub struct SimContext<'a> {
    pub tt: &'a Timetable,
    pub tig: &'a Tig,
    pub feed: &'a DelayFeed,
    realized: DelayedView<'a>,
}

impl<'a> SimContext<'a> {
    pub fn new(tt: &'a Timetable, tig: &'a Tig, feed: &'a DelayFeed) -> Self {
        SimContext { tt, tig, feed, realized: apply_delays(tt, feed, INFINITY) }
    }

    pub fn realized(&self) -> &DelayedView<'a> {
        &self.realized
    }

    fn server(&self) -> Server<'a> {
        Server { tt: self.tt, tig: self.tig, feed: self.feed }
    }
}

enum Planner<'a> {
    Pull,
    Push(Box<PushReplanner<'a>>),
    /// `pending` is the boarding last handed out, restored when it is missed.
    Follow {
        plan: Option<Journey>,
        pending: Option<Connection>,
    },
}

fn timed<T>(ns: &mut u64, f: impl FnOnce() -> T) -> T {
    let start = Instant::now();
    let out = f();
    *ns += start.elapsed().as_nanos() as u64;
    out
}

/// Runs one query under one strategy.
pub fn simulate(
    ctx: &SimContext<'_>,
    solver: &mut CsaSolver,
    strategy: Strategy,
    query: &SimQuery,
) -> Result<SimResult> {
    let tt = ctx.tt;
    tt.check_stop(query.origin)?;
    tt.check_stop(query.destination)?;
    let dest = query.destination;
    let mut res = SimResult { query: Some(*query), strategy: Some(strategy), ..SimResult::default() };
    let mut planner = match strategy {
        Strategy::DrPull => Planner::Pull,
        Strategy::DrPush => Planner::Push(Box::new(PushReplanner::new(ctx.server(), dest, PushMode::Full))),
        Strategy::Jdr => Planner::Push(Box::new(PushReplanner::new(ctx.server(), dest, PushMode::JourneyDelayedOnly))),
        Strategy::Sp | Strategy::Sr => Planner::Follow { plan: None, pending: None },
    };

    let mut pos = Position::standing(query.origin, query.departure);
    let mut missed = false;
    let mut decisions = 0u32;
    while pos.stop != dest {
        if res.actions >= MAX_ACTIONS {
            return Err(Error::InconsistentState(format!("query {} made no progress", query.id)));
        }
        let action = match &mut planner {
            Planner::Pull => {
                let out = timed(&mut res.server_ns, || pull_replan(&ctx.server(), solver, &pos, dest, false))?;
                res.server_calls += 1;
                res.replans += 1;
                res.scanned_server += out.stats.scanned as u64;
                match out.journey {
                    Some(j) => Some(timed(&mut res.edge_ns, || next_action(&pos, &j, tt.footpaths()))?),
                    None => None,
                }
            }
            Planner::Push(push) => push.push_step(solver, &pos, missed)?,
            Planner::Follow { plan, pending } => {
                follow_step(ctx, solver, strategy, query, &pos, missed, plan, pending, &mut res)?
            }
        };
        if decisions > 0 {
            res.intermediate_stops += 1;
        }
        decisions += 1;
        missed = false;
        let Some(action) = action else {
            break;
        };
        res.actions += 1;
        match action {
            Action::Arrived => break,
            Action::WalkToDestination { walk } => {
                res.final_walks += 1;
                pos = Position::standing(walk.to, pos.time + walk.duration);
            }
            Action::Stay { conn } => {
                let c = ctx.realized.connection(conn.id);
                res.connections += 1;
                res.executed.push(c.id);
                pos = Position { stop: c.arr_stop, time: c.arr_time, aboard: Some(c) };
            }
            Action::Board { .. } | Action::Transfer { .. } => {
                let (walk, conn) = match action {
                    Action::Board { walk, conn } => (walk.map_or(0, |w| w.duration), conn),
                    Action::Transfer { walk, conn } => (walk.duration, conn),
                    _ => unreachable!(),
                };
                let ready = pos.time + walk;
                let c = ctx.realized.connection(conn.id);
                if c.dep_time >= ready {
                    res.connections += 1;
                    res.executed.push(c.id);
                    pos = Position { stop: c.arr_stop, time: c.arr_time, aboard: Some(c) };
                } else {
                    res.misses += 1;
                    missed = true;
                    pos = Position::standing(c.dep_stop, ready);
                }
            }
        }
    }
    if pos.stop == dest {
        res.arrival = Some(pos.time);
    }
    if let Planner::Push(push) = planner {
        let c = push.counters;
        res.server_calls = c.server_calls;
        res.local_replans = c.local_replans;
        res.envelope_rebuilds = c.envelope_rebuilds;
        res.replans = c.server_calls + c.local_replans;
        res.scanned_server = c.scanned_server;
        res.scanned_local = c.scanned_local;
        res.pushed_bytes = c.pushed_bytes;
        res.journey_delayed = c.journey_delayed;
        res.envelope_delayed = c.envelope_delayed;
        res.neither_delayed = c.neither_delayed;
        res.server_ns = c.server_ns;
        res.edge_ns = c.edge_ns;
        res.envelope_sizes = push.envelope_sizes;
        res.pushes = push.pushes;
    }
    Ok(res)
}

/// SP/SR: plan once, then follow; a missed boarding is repaired with the
/// earliest later trip of the same route over the same stretch.
#[allow(clippy::too_many_arguments)]
fn follow_step(
    ctx: &SimContext<'_>,
    solver: &mut CsaSolver,
    strategy: Strategy,
    query: &SimQuery,
    pos: &Position,
    missed: bool,
    plan: &mut Option<Journey>,
    pending: &mut Option<Connection>,
    res: &mut SimResult,
) -> Result<Option<Action>> {
    let tt = ctx.tt;
    if plan.is_none() {
        let start = Instant::now();
        let q = Query::new(query.origin, query.destination, query.departure);
        let out = match strategy {
            Strategy::Sp => solver.earliest_arrival(tt.sorted_connections(), tt.footpaths(), &q)?,
            _ => {
                let view = apply_delays(tt, ctx.feed, query.departure);
                solver.earliest_arrival(&view.sorted_connections(), tt.footpaths(), &q)?
            }
        };
        res.server_ns += start.elapsed().as_nanos() as u64;
        res.server_calls += 1;
        res.replans += 1;
        res.scanned_server += out.1.scanned as u64;
        match out.0 {
            Some(j) => *plan = Some(j),
            None => return Ok(None),
        }
    } else if missed {
        let journey = plan.as_mut().expect("plan exists");
        if let Some(c) = pending.take() {
            journey.connections.insert(0, c);
        }
        if repair_leg(ctx, pos, journey) {
            res.repairs += 1;
        } else {
            res.repair_failures += 1;
            let start = Instant::now();
            let out = pull_replan(&ctx.server(), solver, pos, query.destination, false)?;
            res.server_ns += start.elapsed().as_nanos() as u64;
            res.server_calls += 1;
            res.replans += 1;
            res.scanned_server += out.stats.scanned as u64;
            match out.journey {
                Some(j) => *plan = Some(j),
                None => return Ok(None),
            }
        }
    }
    let journey = plan.as_mut().expect("plan exists");
    let action = next_action(pos, journey, tt.footpaths())?;
    *pending = action.connection().map(|_| journey.connections.remove(0));
    Ok(Some(action))
}

/// Replaces the head leg of `journey` with the same positions of the trip
/// of the same route that really leaves soonest after `pos.time`.
fn repair_leg(ctx: &SimContext<'_>, pos: &Position, journey: &mut Journey) -> bool {
    let tt = ctx.tt;
    let Some(&head) = journey.connections.first() else {
        return false;
    };
    let len = 1 + journey.connections.windows(2).take_while(|w| continues(&w[0], &w[1])).count();
    let route = tt.trips()[head.trip.idx()].route;
    let (i, j) = (head.pos as usize, head.pos as usize + len);
    let best = tt.routes()[route.idx()]
        .iter()
        .filter_map(|&t| {
            let first = tt.trip_connections(t).get(i)?;
            let dep = ctx.realized.connection(first.id).dep_time;
            (dep >= pos.time).then_some((dep, t))
        })
        .min();
    match best {
        Some((_, t)) => {
            let replacement: Vec<Connection> = tt.trip_connections(t)[i..j].to_vec();
            journey.connections.splice(0..len, replacement);
            true
        }
        None => false,
    }
}

/// Draws `n_pairs` distinct stop pairs uniformly at random, keeping only
/// pairs whose destination is reachable on the realized timetable from
/// every departure time. Each kept pair yields one query per departure time.
pub fn generate_queries(
    tt: &Timetable,
    feed: &DelayFeed,
    n_pairs: usize,
    departure_times: &[Time],
    seed: u64,
    max_attempts: usize,
) -> Result<Vec<SimQuery>> {
    if n_pairs == 0 || departure_times.is_empty() {
        return Err(Error::Config("need at least one stop pair and one departure time".into()));
    }
    if tt.stop_count() < 2 {
        return Err(Error::Infeasible("fewer than two stops".into()));
    }
    let realized = apply_delays(tt, feed, INFINITY).sorted_connections();
    let mut solver = CsaSolver::for_timetable(tt);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::new();
    let mut failures = vec![0usize; departure_times.len()];
    let mut queries = Vec::with_capacity(n_pairs * departure_times.len());
    let mut attempts = 0;
    while queries.len() < n_pairs * departure_times.len() {
        if attempts >= max_attempts {
            let (worst, _) =
                failures.iter().enumerate().max_by_key(|&(i, &n)| (n, std::cmp::Reverse(i))).expect("non-empty");
            return Err(Error::Infeasible(format!(
                "found {} of {n_pairs} feasible stop pairs after {attempts} attempts; departure {} failed most often",
                queries.len() / departure_times.len(),
                format_clock(departure_times[worst])
            )));
        }
        attempts += 1;
        let o = StopId(rng.random_range(0..tt.stop_count() as u32));
        let d = StopId(rng.random_range(0..tt.stop_count() as u32));
        if o == d || !seen.insert((o, d)) {
            continue;
        }
        let mut ok = true;
        for (k, &tau) in departure_times.iter().enumerate() {
            let q = Query::new(o, d, tau);
            solver.scan(&realized, tt.footpaths(), &q, true)?;
            if solver.arrival_at(d) == INFINITY {
                failures[k] += 1;
                ok = false;
                break;
            }
        }
        if ok {
            let pair = (queries.len() / departure_times.len()) as u32;
            for (k, &tau) in departure_times.iter().enumerate() {
                queries.push(SimQuery {
                    id: pair * departure_times.len() as u32 + k as u32,
                    origin: o,
                    destination: d,
                    departure: tau,
                });
            }
        }
    }
    Ok(queries)
}

/// Runs every strategy on every query on `workers` threads. Results are
/// ordered by query id, then strategy.
pub fn run_experiment(
    ctx: &SimContext<'_>,
    queries: &[SimQuery],
    strategies: &[Strategy],
    workers: usize,
) -> Result<Vec<SimResult>> {
    let jobs: Vec<(SimQuery, Strategy)> =
        queries.iter().flat_map(|q| strategies.iter().map(move |&s| (*q, s))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let mut results: Vec<SimResult> = pool.install(|| {
        jobs.par_iter()
            .map_init(|| CsaSolver::for_timetable(ctx.tt), |solver, (q, s)| simulate(ctx, solver, *s, q))
            .collect::<Result<Vec<_>>>()
    })?;
    results.sort_by_key(|r| (r.query.map(|q| q.id), r.strategy));
    Ok(results)
}
