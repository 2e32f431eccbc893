//! Replanning while travelling: the full (pull) replan on the server and
//! the push loop that keeps a query envelope on the device and only calls
//! the server when the current journey breaks.

use std::time::Instant;

use crate::clock::Time;
use crate::csa::{CsaSolver, Query, ScanStats};
use crate::delay::{apply_delays, DelayFeed};
use crate::envelope::{build_envelope, Envelope};
use crate::error::{Error, Result};
use crate::tig::Tig;
use crate::timetable::{continues, ConnId, ConnTimes, Connection, Journey, Start, StopId, Timetable, Walk, WalkGraph};

/// Where the traveller is between two actions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Position {
    pub stop: StopId,
    pub time: Time,
    /// The connection just ridden when still aboard its vehicle.
    pub aboard: Option<Connection>,
}

impl Position {
    pub fn standing(stop: StopId, time: Time) -> Self {
        Position { stop, time, aboard: None }
    }

    pub fn start(&self) -> Start {
        match self.aboard {
            Some(c) => Start::Onboard { trip: c.trip, pos: c.pos },
            None => Start::Origin,
        }
    }

    pub fn query(&self, destination: StopId) -> Query {
        Query { origin: self.stop, destination, departure: self.time, start: self.start() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Action {
    /// Board from standing, after an optional walk.
    Board {
        walk: Option<Walk>,
        conn: Connection,
    },
    /// Stay on the current vehicle.
    Stay {
        conn: Connection,
    },
    /// Leave the vehicle, walk (possibly the loop) and board, as one action.
    Transfer {
        walk: Walk,
        conn: Connection,
    },
    WalkToDestination {
        walk: Walk,
    },
    Arrived,
}

impl Action {
    pub fn connection(&self) -> Option<&Connection> {
        match self {
            Action::Board { conn, .. } | Action::Stay { conn } | Action::Transfer { conn, .. } => Some(conn),
            _ => None,
        }
    }
}

/// Picks the next action from the head of `journey`.
pub fn next_action<W: WalkGraph + ?Sized>(pos: &Position, journey: &Journey, walks: &W) -> Result<Action> {
    let walk_to = |to: StopId| {
        walks
            .walk_duration(pos.stop, to)
            .map(|duration| Walk { to, duration })
            .ok_or_else(|| Error::InconsistentState(format!("no footpath from stop {} to stop {to}", pos.stop)))
    };
    match (journey.connections.first(), pos.aboard) {
        (Some(&head), Some(prev)) if continues(&prev, &head) => Ok(Action::Stay { conn: head }),
        (Some(&head), Some(_)) => Ok(Action::Transfer { walk: walk_to(head.dep_stop)?, conn: head }),
        (Some(&head), None) if head.dep_stop == pos.stop => Ok(Action::Board { walk: None, conn: head }),
        (Some(&head), None) => Ok(Action::Board { walk: Some(walk_to(head.dep_stop)?), conn: head }),
        (None, _) if pos.stop == journey.destination => Ok(Action::Arrived),
        (None, _) => Ok(Action::WalkToDestination { walk: walk_to(journey.destination)? }),
    }
}

/// The immutable inputs of the server side.
#[derive(Clone, Copy)]
pub struct Server<'a> {
    pub tt: &'a Timetable,
    pub tig: &'a Tig,
    pub feed: &'a DelayFeed,
}

#[derive(Clone, Debug)]
pub struct PullOutcome {
    pub journey: Option<Journey>,
    pub envelope: Option<Envelope>,
    pub stats: ScanStats,
}

/// Full replan on the timetable as known at `pos.time`, optionally with the
/// envelope bounded by the new journey's arrival.
pub fn pull_replan(
    server: &Server<'_>,
    solver: &mut CsaSolver,
    pos: &Position,
    destination: StopId,
    with_envelope: bool,
) -> Result<PullOutcome> {
    let tt = server.tt;
    tt.check_stop(pos.stop)?;
    tt.check_stop(destination)?;
    let view = apply_delays(tt, server.feed, pos.time);
    let sorted = view.sorted_connections();
    let q = pos.query(destination);
    let (journey, stats) = solver.earliest_arrival(&sorted, tt.footpaths(), &q)?;
    let envelope = match (&journey, with_envelope) {
        (Some(j), true) => Some(build_envelope(tt, &view, server.tig, pos.stop, destination, pos.time, j.arrival)?),
        _ => None,
    };
    Ok(PullOutcome { journey, envelope, stats })
}

/// Times of envelope members, with the schedule as fallback.
pub struct EnvelopeTimes<'a> {
    pub env: &'a Envelope,
    pub tt: &'a Timetable,
}

impl ConnTimes for EnvelopeTimes<'_> {
    fn times(&self, id: ConnId) -> (Time, Time) {
        self.env.times_of(id).unwrap_or_else(|| self.tt.times(id))
    }
}

/// True iff, from `pos` and under `times`, some transfer of `journey`
/// (including the first boarding) no longer works or the destination is
/// reached later than planned.
pub fn journey_is_delayed(journey: &Journey, pos: &Position, tt: &Timetable, times: &impl ConnTimes) -> Result<bool> {
    let from_here = Journey { origin: pos.stop, departure: pos.time, start: pos.start(), ..journey.clone() };
    Ok(match from_here.arrival_under(tt, times)? {
        None => true,
        Some(a) => a > journey.arrival,
    })
}

/// How a push step was resolved.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scenario {
    /// Server call with envelope rebuild: first call, missed boarding or
    /// broken journey.
    Rebuild,
    /// Envelope changed, journey intact: local replan on the envelope.
    Local,
    /// Nothing relevant changed: the current journey is kept.
    Keep,
}

/// Category of an intermediate stop, by what the delays did there.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StopTag {
    Initial,
    JourneyDelayed,
    EnvelopeDelayed,
    NeitherDelayed,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Counters {
    pub server_calls: u32,
    pub local_replans: u32,
    pub envelope_rebuilds: u32,
    pub scanned_server: u64,
    pub scanned_local: u64,
    pub pushed_bytes: u64,
    pub journey_delayed: u32,
    pub envelope_delayed: u32,
    pub neither_delayed: u32,
    /// Wall-clock nanoseconds spent on server work.
    pub server_ns: u64,
    /// Wall-clock nanoseconds spent on device work.
    pub edge_ns: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PushMode {
    /// Local replanning whenever the envelope changes.
    Full,
    /// Replan only when the journey itself is delayed.
    JourneyDelayedOnly,
}

/// Device-side state of the push loop for one traveller.
pub struct PushReplanner<'a> {
    server: Server<'a>,
    destination: StopId,
    mode: PushMode,
    journey: Option<Journey>,
    env: Option<Envelope>,
    last_sync: Time,
    pub counters: Counters,
    /// Envelope sizes after each rebuild.
    pub envelope_sizes: Vec<usize>,
    /// Bytes of every push: full envelopes and update batches.
    pub pushes: Vec<usize>,
    pub last_scenario: Option<Scenario>,
    pub last_tag: Option<StopTag>,
}

impl<'a> PushReplanner<'a> {
    pub fn new(server: Server<'a>, destination: StopId, mode: PushMode) -> Self {
        PushReplanner {
            server,
            destination,
            mode,
            journey: None,
            env: None,
            last_sync: 0,
            counters: Counters::default(),
            envelope_sizes: Vec::new(),
            pushes: Vec::new(),
            last_scenario: None,
            last_tag: None,
        }
    }

    pub fn envelope(&self) -> Option<&Envelope> {
        self.env.as_ref()
    }

    pub fn journey(&self) -> Option<&Journey> {
        self.journey.as_ref()
    }

    /// One step at `pos`. `missed` forces a server call. Returns `None` when
    /// the destination can no longer be reached.
    pub fn push_step(&mut self, solver: &mut CsaSolver, pos: &Position, missed: bool) -> Result<Option<Action>> {
        let tt = self.server.tt;
        let edge = Instant::now();
        let mut env_changed = false;
        if let Some(env) = self.env.as_mut() {
            let out = env.apply_updates(tt, self.server.feed, self.last_sync, pos.time);
            if out.changed() {
                env_changed = true;
                self.counters.pushed_bytes += out.bytes() as u64;
                self.pushes.push(out.bytes());
            }
        }
        self.last_sync = pos.time;
        let first = self.journey.is_none();
        let broken = missed
            || match (&self.journey, &self.env) {
                (Some(j), Some(env)) => journey_is_delayed(j, pos, tt, &EnvelopeTimes { env, tt })?,
                _ => true,
            };
        self.counters.edge_ns += edge.elapsed().as_nanos() as u64;

        let scenario = if broken {
            Scenario::Rebuild
        } else if env_changed && self.mode == PushMode::Full {
            Scenario::Local
        } else {
            Scenario::Keep
        };
        self.last_tag = Some(if first {
            StopTag::Initial
        } else if broken {
            StopTag::JourneyDelayed
        } else if env_changed {
            StopTag::EnvelopeDelayed
        } else {
            StopTag::NeitherDelayed
        });
        match self.last_tag {
            Some(StopTag::JourneyDelayed) => self.counters.journey_delayed += 1,
            Some(StopTag::EnvelopeDelayed) => self.counters.envelope_delayed += 1,
            Some(StopTag::NeitherDelayed) => self.counters.neither_delayed += 1,
            _ => {}
        }

        let scenario = match scenario {
            Scenario::Local => {
                if self.local_replan(solver, pos)? {
                    Scenario::Local
                } else {
                    Scenario::Rebuild
                }
            }
            s => s,
        };
        if scenario == Scenario::Rebuild && !self.rebuild(solver, pos)? {
            self.last_scenario = Some(scenario);
            return Ok(None);
        }
        if scenario == Scenario::Keep {
            if let Some(env) = self.env.as_mut() {
                env.resort();
            }
        }
        self.last_scenario = Some(scenario);

        let edge = Instant::now();
        let journey = self.journey.as_mut().expect("planned above");
        let action = next_action(pos, journey, tt.footpaths())?;
        if action.connection().is_some() {
            journey.connections.remove(0);
        }
        self.counters.edge_ns += edge.elapsed().as_nanos() as u64;
        Ok(Some(action))
    }

    fn rebuild(&mut self, solver: &mut CsaSolver, pos: &Position) -> Result<bool> {
        let server = Instant::now();
        let out = pull_replan(&self.server, solver, pos, self.destination, true)?;
        self.counters.server_ns += server.elapsed().as_nanos() as u64;
        self.counters.server_calls += 1;
        self.counters.scanned_server += out.stats.scanned as u64;
        match (out.journey, out.envelope) {
            (Some(j), Some(env)) => {
                self.counters.envelope_rebuilds += 1;
                self.counters.pushed_bytes += env.byte_size() as u64;
                self.pushes.push(env.byte_size());
                self.envelope_sizes.push(env.len());
                self.journey = Some(j);
                self.env = Some(env);
                Ok(true)
            }
            _ => {
                self.journey = None;
                self.env = None;
                Ok(false)
            }
        }
    }

    /// CSA on the envelope only. False if it finds nothing, which means the
    /// envelope cannot serve the query any more.
    fn local_replan(&mut self, solver: &mut CsaSolver, pos: &Position) -> Result<bool> {
        let edge = Instant::now();
        let env = self.env.as_mut().expect("local replan needs an envelope");
        env.resort();
        let (journey, stats) = solver.earliest_arrival(env.connections(), &*env, &pos.query(self.destination))?;
        self.counters.local_replans += 1;
        self.counters.scanned_local += stats.scanned as u64;
        self.counters.edge_ns += edge.elapsed().as_nanos() as u64;
        match journey {
            Some(j) => {
                self.journey = Some(j);
                Ok(true)
            }
            None => Ok(false),
        }
    }
}
