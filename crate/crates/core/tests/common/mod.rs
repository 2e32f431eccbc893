//! Independent references shared by the integration tests.
#![allow(dead_code)]

use std::collections::HashMap;

use petgraph::algo::dijkstra;
use petgraph::graph::{DiGraph, NodeIndex};
use replan_core::sim::{SimContext, SimResult};
use replan_core::timetable::{Connection, StopId, Timetable, WalkGraph};
use replan_core::Time;

/// Earliest arrival by Dijkstra on a time-expanded graph.
///
/// Nodes are departure and arrival events of every connection plus
/// "waiting" events per stop (ready to board, or a departure one could
/// board). Edge weights are time differences, so the distance to a node is
/// its time minus the query departure.
pub fn te_earliest_arrival(
    tt: &Timetable,
    conns: &[Connection],
    origin: StopId,
    destination: StopId,
    departure: Time,
) -> Option<Time> {
    let fp = tt.footpaths();
    let mut g: DiGraph<Time, u64> = DiGraph::new();
    let mut dep_node = HashMap::new();
    let mut arr_node = HashMap::new();
    // (stop) -> [(time, is_departure, node)]
    let mut waiting: Vec<Vec<(Time, u8, NodeIndex)>> = vec![Vec::new(); tt.stop_count()];
    let edge = |g: &mut DiGraph<Time, u64>, a: NodeIndex, b: NodeIndex| {
        let w = u64::from(g[b]) - u64::from(g[a]);
        g.add_edge(a, b, w);
    };

    for c in conns {
        let d = g.add_node(c.dep_time);
        let a = g.add_node(c.arr_time);
        edge(&mut g, d, a);
        dep_node.insert(c.id, d);
        arr_node.insert(c.id, a);
        let w = g.add_node(c.dep_time);
        edge(&mut g, w, d);
        waiting[c.dep_stop.idx()].push((c.dep_time, 1, w));
    }
    // Staying seated.
    let mut by_trip: HashMap<_, Vec<&Connection>> = HashMap::new();
    for c in conns {
        by_trip.entry(c.trip).or_default().push(c);
    }
    for list in by_trip.values_mut() {
        list.sort_by_key(|c| c.pos);
        for w in list.windows(2) {
            if w[1].pos == w[0].pos + 1 {
                edge(&mut g, arr_node[&w[0].id], dep_node[&w[1].id]);
            }
        }
    }
    // Alighting: loop at the same stop, footpaths elsewhere.
    for c in conns {
        let a = arr_node[&c.id];
        for w in fp.outgoing(c.arr_stop) {
            let r = g.add_node(c.arr_time + w.duration);
            edge(&mut g, a, r);
            waiting[w.to.idx()].push((c.arr_time + w.duration, 0, r));
        }
    }
    let source = g.add_node(departure);
    waiting[origin.idx()].push((departure, 0, source));
    for w in fp.outgoing(origin) {
        if w.to != origin {
            let r = g.add_node(departure + w.duration);
            edge(&mut g, source, r);
            waiting[w.to.idx()].push((departure + w.duration, 0, r));
        }
    }
    for line in &mut waiting {
        line.sort();
        for w in line.windows(2) {
            edge(&mut g, w[0].2, w[1].2);
        }
    }

    let dist = dijkstra(&g, source, None, |e| *e.weight());
    let at = |n: NodeIndex| dist.get(&n).map(|&d| departure + d as Time);
    let mut best: Option<Time> = None;
    let mut offer = |t: Option<Time>| {
        if let Some(t) = t {
            best = Some(best.map_or(t, |b: Time| b.min(t)));
        }
    };
    if origin == destination {
        offer(Some(departure));
    }
    offer(fp.walk_duration(origin, destination).filter(|_| origin != destination).map(|d| departure + d));
    for c in conns {
        let Some(t) = at(arr_node[&c.id]) else { continue };
        if c.arr_stop == destination {
            offer(Some(t));
        } else if let Some(d) = fp.walk_duration(c.arr_stop, destination) {
            offer(Some(t + d));
        }
    }
    best
}

/// Every journey from `origin` at `departure` reaching `destination` no
/// later than `bound`, as connection lists with their arrival time.
/// Panics past `limit` journeys.
pub fn enumerate_journeys(
    tt: &Timetable,
    conns: &[Connection],
    origin: StopId,
    destination: StopId,
    departure: Time,
    bound: Time,
    limit: usize,
) -> Vec<(Vec<Connection>, Time)> {
    let fp = tt.footpaths();
    let mut out = Vec::new();
    let reach = |c: &Connection, from: StopId, ready: Time, first: bool| -> bool {
        if c.dep_stop == from {
            let extra = if first { 0 } else { fp.walk_duration(from, from).unwrap_or(0) };
            ready + extra <= c.dep_time
        } else {
            fp.walk_duration(from, c.dep_stop).is_some_and(|d| ready + d <= c.dep_time)
        }
    };
    let finish = |c: &Connection| -> Option<Time> {
        if c.arr_stop == destination {
            Some(c.arr_time)
        } else {
            fp.walk_duration(c.arr_stop, destination).map(|d| c.arr_time + d)
        }
    };

    fn dfs(
        conns: &[Connection],
        path: &mut Vec<Connection>,
        bound: Time,
        limit: usize,
        out: &mut Vec<(Vec<Connection>, Time)>,
        next_ok: &dyn Fn(&Connection, &Connection) -> bool,
        finish: &dyn Fn(&Connection) -> Option<Time>,
    ) {
        let last = *path.last().expect("non-empty");
        if let Some(t) = finish(&last) {
            if t <= bound {
                out.push((path.clone(), t));
                assert!(out.len() <= limit, "more than {limit} journeys");
            }
        }
        for c in conns {
            if c.arr_time <= bound && next_ok(&last, c) {
                path.push(*c);
                dfs(conns, path, bound, limit, out, next_ok, finish);
                path.pop();
            }
        }
    }
    let next_ok = |p: &Connection, c: &Connection| -> bool {
        if c.trip == p.trip {
            c.pos == p.pos + 1
        } else {
            reach(c, p.arr_stop, p.arr_time, false)
        }
    };

    if origin == destination {
        out.push((Vec::new(), departure));
    } else if let Some(d) = fp.walk_duration(origin, destination) {
        if departure + d <= bound {
            out.push((Vec::new(), departure + d));
        }
    }
    for c in conns {
        if c.arr_time <= bound && reach(c, origin, departure, true) {
            let mut path = vec![*c];
            dfs(conns, &mut path, bound, limit, &mut out, &next_ok, &finish);
        }
    }
    out
}

/// Replays the executed connections under realized times and returns the
/// first infeasible step, if any.
pub fn audit_execution(ctx: &SimContext<'_>, r: &SimResult) -> Result<(), String> {
    let q = r.query.ok_or("no query")?;
    let tt = ctx.tt;
    let fp = tt.footpaths();
    let realized = ctx.realized();
    let mut prev: Option<Connection> = None;
    for (k, id) in r.executed.iter().enumerate() {
        let c = realized.connection(*id);
        let ok = match prev {
            None => {
                if c.dep_stop == q.origin {
                    q.departure <= c.dep_time
                } else {
                    fp.walk_duration(q.origin, c.dep_stop).is_some_and(|d| q.departure + d <= c.dep_time)
                }
            }
            Some(p) if p.trip == c.trip => c.pos == p.pos + 1,
            Some(p) => fp.walk_duration(p.arr_stop, c.dep_stop).is_some_and(|d| p.arr_time + d <= c.dep_time),
        };
        if !ok {
            return Err(format!("query {} step {k}: cannot board connection {} ({:?})", q.id, id, c));
        }
        prev = Some(c);
    }
    let expected = match prev {
        None if q.origin == q.destination => Some(q.departure),
        None => fp.walk_duration(q.origin, q.destination).map(|d| q.departure + d),
        Some(p) if p.arr_stop == q.destination => Some(p.arr_time),
        Some(p) => fp.walk_duration(p.arr_stop, q.destination).map(|d| p.arr_time + d),
    };
    if r.arrival.is_some() && r.arrival != expected {
        return Err(format!("query {}: reported arrival {:?}, replay gives {:?}", q.id, r.arrival, expected));
    }
    Ok(())
}

pub mod checks {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use replan_core::csa::{csa_earliest_arrival, CsaSolver, Query};
    use replan_core::delay::apply_delays;
    use replan_core::envelope::build_envelope;
    use replan_core::sim::{generate_queries, simulate, SimContext, Strategy};
    use replan_core::synthetic::{random_feed, random_timetable, InstanceShape};
    use replan_core::tig::build_tig;
    use replan_core::timetable::{journey_is_valid_with, StopId};
    use replan_core::{Time, INFINITY};

    use super::{audit_execution, enumerate_journeys, te_earliest_arrival};

    #[derive(Debug, Default)]
    pub struct Tally {
        pub checked: usize,
        pub failures: Vec<String>,
    }

    impl Tally {
        fn fail(&mut self, msg: String) {
            if self.failures.len() < 20 {
                self.failures.push(msg);
            } else if self.failures.len() == 20 {
                self.failures.push("...".into());
            }
        }

        pub fn ok(&self) -> bool {
            self.failures.is_empty()
        }
    }

    /// CSA on a delay snapshot against the time-expanded oracle.
    pub fn csa_vs_oracle(timetables: usize, queries_each: usize, seed: u64) -> Tally {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tally = Tally::default();
        let shape = InstanceShape::medium();
        for k in 0..timetables {
            let tt = random_timetable(&mut rng, &shape);
            let feed = random_feed(&mut rng, &tt, 40, 20).expect("valid feed");
            let n = tt.stop_count() as u32;
            for _ in 0..queries_each {
                let o = StopId(rng.random_range(0..n));
                let d = StopId(rng.random_range(0..n));
                let tau: Time = shape.start - 1800 + rng.random_range(0..(shape.window + 3600) / 60) * 60;
                let snapshot = tau + rng.random_range(0..4) * 1800;
                let view = apply_delays(&tt, &feed, snapshot);
                let conns = view.sorted_connections();
                let q = Query::new(o, d, tau);
                let got = csa_earliest_arrival(&conns, tt.footpaths(), tt.stop_count(), tt.trip_count(), &q)
                    .expect("query is well formed");
                let want = te_earliest_arrival(&tt, &conns, o, d, tau);
                tally.checked += 1;
                if got.as_ref().map(|j| j.arrival) != want {
                    tally.fail(format!(
                        "timetable {k}, {o}->{d} at {tau}: csa {:?}, oracle {want:?}",
                        got.map(|j| j.arrival)
                    ));
                } else if let Some(j) = got {
                    if !journey_is_valid_with(&j, &tt, &view).unwrap_or(false) {
                        tally.fail(format!("timetable {k}, {o}->{d} at {tau}: extracted journey is not executable"));
                    }
                }
            }
        }
        tally
    }

    /// No journey arriving by the bound uses a connection outside the
    /// envelope, after the envelope has received every later update.
    /// Also checks that the envelope alone reaches the best such journey.
    pub fn envelope_soundness(instances: usize, feeds_each: usize, seed: u64) -> Tally {
        envelope_soundness_with(instances, feeds_each, seed, true)
    }

    pub fn envelope_soundness_with(instances: usize, feeds_each: usize, seed: u64, updates: bool) -> Tally {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tally = Tally::default();
        let shape = InstanceShape::tiny();
        let mut made = 0;
        while made < instances {
            let tt = random_timetable(&mut rng, &shape);
            let tig = build_tig(&tt);
            let n = tt.stop_count() as u32;
            let (o, d) = (StopId(rng.random_range(0..n)), StopId(rng.random_range(0..n)));
            let tau: Time = shape.start + rng.random_range(0..shape.window / 60 / 2) * 60;
            let mut solver = CsaSolver::for_timetable(&tt);
            if o == d
                || solver.one_to_all(tt.sorted_connections(), tt.footpaths(), &Query::new(o, d, tau)).unwrap()[d.idx()]
                    == INFINITY
            {
                continue;
            }
            made += 1;
            for f in 0..feeds_each {
                let events = rng.random_range(0..8);
                let feed = random_feed(&mut rng, &tt, events, 20).expect("valid feed");
                let known = apply_delays(&tt, &feed, tau);
                let q = Query::new(o, d, tau);
                let Some(best) = csa_earliest_arrival(
                    &known.sorted_connections(),
                    tt.footpaths(),
                    tt.stop_count(),
                    tt.trip_count(),
                    &q,
                )
                .unwrap() else {
                    continue;
                };
                // Any bound at or past the optimum works; slack admits detours.
                let bound = best.arrival + rng.random_range(0..=20) * 60;
                let mut env = build_envelope(&tt, &known, &tig, o, d, tau, bound).expect("bound after departure");
                if updates {
                    env.apply_updates(&tt, &feed, tau, INFINITY);
                }
                env.resort();
                let realized = apply_delays(&tt, &feed, INFINITY).sorted_connections();
                let journeys = enumerate_journeys(&tt, &realized, o, d, tau, bound, 2_000_000);
                tally.checked += journeys.len();
                for (j, arr) in &journeys {
                    if let Some(c) = j.iter().find(|c| !env.contains(c.id)) {
                        tally.fail(format!("instance {made} feed {f}: journey arriving {arr} <= {bound} uses {c:?} outside the envelope"));
                    }
                }
                let best_enum = journeys.iter().map(|j| j.1).min();
                let local =
                    csa_earliest_arrival(env.connections(), &env, tt.stop_count(), tt.trip_count(), &q).unwrap();
                let local = local.map(|j| j.arrival).filter(|&a| a <= bound);
                if best_enum != local {
                    tally.fail(format!("instance {made} feed {f}: envelope CSA {local:?}, enumeration {best_enum:?}"));
                }
            }
        }
        tally
    }

    /// Push and pull replanning execute the same connections. Every run is
    /// also replayed under realized times.
    pub fn push_equals_pull(instances: usize, seed: u64) -> Tally {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tally = Tally::default();
        let shape = InstanceShape::small();
        let mut made = 0;
        while made < instances {
            let tt = random_timetable(&mut rng, &shape);
            let tig = build_tig(&tt);
            let feed = random_feed(&mut rng, &tt, 40, 15).expect("valid feed");
            let times: Vec<Time> = (0..3).map(|k| shape.start + k * 1800).collect();
            let Ok(queries) = generate_queries(&tt, &feed, 4, &times, rng.random(), 400) else { continue };
            made += 1;
            let ctx = SimContext::new(&tt, &tig, &feed);
            let mut solver = CsaSolver::for_timetable(&tt);
            for q in &queries {
                let push = simulate(&ctx, &mut solver, Strategy::DrPush, q).expect("simulates");
                let pull = simulate(&ctx, &mut solver, Strategy::DrPull, q).expect("simulates");
                tally.checked += 1;
                if (push.arrival, &push.executed) != (pull.arrival, &pull.executed) {
                    tally.fail(format!(
                        "instance {made} query {q:?}: push {:?} {:?}, pull {:?} {:?}",
                        push.arrival, push.executed, pull.arrival, pull.executed
                    ));
                }
                for r in [&push, &pull] {
                    if let Err(e) = audit_execution(&ctx, r) {
                        tally.fail(format!("instance {made}: {e}"));
                    }
                }
            }
        }
        tally
    }
}
