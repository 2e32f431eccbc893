//! Immutable timetable model: stops, trips, connections and footpaths.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::clock::{Duration, Time};
use crate::error::{Error, Result};

macro_rules! dense_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub struct $name(pub u32);

        impl $name {
            #[inline]
            pub fn idx(self) -> usize {
                self.0 as usize
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }
    };
}

dense_id!(
    /// Index into the stop table.
    StopId
);
dense_id!(
    /// Index into the trip table.
    TripId
);
dense_id!(
    /// Index into the route table (trips with identical stop sequences).
    RouteId
);
dense_id!(
    /// Index into the trip-major connection table.
    ConnId
);

/// Right-of-way class of a vehicle, which drives the delay model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Mode {
    /// Rail and metro.
    Separated,
    /// Tram and light rail.
    SemiSeparated,
    /// Bus, ferry and everything else.
    MixedTraffic,
}

impl Mode {
    /// Maps a GTFS `route_type` (basic or extended) to a mode class.
    pub fn from_route_type(route_type: u32) -> Mode {
        match route_type {
            1 | 2 | 12 | 100..=199 | 400..=499 => Mode::Separated,
            0 | 5 | 900..=999 => Mode::SemiSeparated,
            _ => Mode::MixedTraffic,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Separated => "separated",
            Mode::SemiSeparated => "semi_separated",
            Mode::MixedTraffic => "mixed_traffic",
        }
    }
}

/// One vehicle movement between two consecutive stops of a trip.
///
/// `dep_time`/`arr_time` are the schedule in the timetable itself and the
/// currently known times when the connection comes out of a delayed view.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Connection {
    pub id: ConnId,
    pub dep_stop: StopId,
    pub arr_stop: StopId,
    pub dep_time: Time,
    pub arr_time: Time,
    pub trip: TripId,
    /// Position within the trip, starting at 0.
    pub pos: u32,
}

impl Connection {
    /// Scan order key: departure time, then trip, then position in trip.
    #[inline]
    pub fn key(&self) -> (Time, TripId, u32) {
        (self.dep_time, self.trip, self.pos)
    }

    #[inline]
    pub fn duration(&self) -> Duration {
        self.arr_time - self.dep_time
    }

    pub fn with_times(mut self, dep_time: Time, arr_time: Time) -> Connection {
        self.dep_time = dep_time;
        self.arr_time = arr_time;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trip {
    pub id: TripId,
    pub route: RouteId,
    pub mode: Mode,
    /// First connection in the trip-major table.
    pub first: u32,
    pub len: u32,
}

impl Trip {
    pub fn conn_ids(&self) -> impl Iterator<Item = ConnId> + '_ {
        (self.first..self.first + self.len).map(ConnId)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Footpath {
    pub from: StopId,
    pub to: StopId,
    pub duration: Duration,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Walk {
    pub to: StopId,
    pub duration: Duration,
}

/// Outgoing footpaths per stop, as seen by the scan.
pub trait WalkGraph {
    fn outgoing(&self, stop: StopId) -> &[Walk];

    fn walk_duration(&self, from: StopId, to: StopId) -> Option<Duration> {
        let walks = self.outgoing(from);
        walks.binary_search_by_key(&to, |w| w.to).ok().map(|i| walks[i].duration)
    }
}

/// Compressed per-stop footpath lists, sorted by target stop.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FootpathIndex {
    offsets: Vec<u32>,
    walks: Vec<Walk>,
}

impl FootpathIndex {
    /// Builds the index for `stop_count` stops. Duplicate pairs keep the
    /// smallest duration.
    pub fn new(stop_count: usize, footpaths: impl IntoIterator<Item = Footpath>) -> Self {
        let mut pairs: BTreeMap<(StopId, StopId), Duration> = BTreeMap::new();
        for f in footpaths {
            pairs.entry((f.from, f.to)).and_modify(|d| *d = (*d).min(f.duration)).or_insert(f.duration);
        }
        let mut offsets = vec![0u32; stop_count + 1];
        for &(from, _) in pairs.keys() {
            offsets[from.idx() + 1] += 1;
        }
        for i in 0..stop_count {
            offsets[i + 1] += offsets[i];
        }
        let walks = pairs.into_iter().map(|((_, to), duration)| Walk { to, duration }).collect();
        FootpathIndex { offsets, walks }
    }

    pub fn stop_count(&self) -> usize {
        self.offsets.len().saturating_sub(1)
    }

    pub fn len(&self) -> usize {
        self.walks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.walks.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = Footpath> + '_ {
        (0..self.stop_count()).flat_map(move |s| {
            let from = StopId(s as u32);
            self.outgoing(from).iter().map(move |w| Footpath { from, to: w.to, duration: w.duration })
        })
    }

    pub fn loop_duration(&self, stop: StopId) -> Option<Duration> {
        self.walk_duration(stop, stop)
    }
}

impl WalkGraph for FootpathIndex {
    #[inline]
    fn outgoing(&self, stop: StopId) -> &[Walk] {
        match self.offsets.get(stop.idx()..stop.idx() + 2) {
            Some(r) => &self.walks[r[0] as usize..r[1] as usize],
            None => &[],
        }
    }
}

/// Source of (possibly delay-updated) connection times.
pub trait ConnTimes {
    fn times(&self, id: ConnId) -> (Time, Time);
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StopInfo {
    pub name: String,
    /// WGS84 latitude/longitude when known.
    pub coord: Option<(f64, f64)>,
}

/// The immutable schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timetable {
    stops: Vec<StopInfo>,
    trip_names: Vec<String>,
    trips: Vec<Trip>,
    /// Trip-major: `connections[id]` has `id`.
    connections: Vec<Connection>,
    /// The same connections in scan order.
    sorted: Vec<Connection>,
    footpaths: FootpathIndex,
    /// Route -> member trips ordered by first departure, then id.
    routes: Vec<Vec<TripId>>,
    dep_offsets: Vec<u32>,
    dep_conns: Vec<ConnId>,
}

impl Timetable {
    pub fn stop_count(&self) -> usize {
        self.stops.len()
    }

    pub fn trip_count(&self) -> usize {
        self.trips.len()
    }

    pub fn connection_count(&self) -> usize {
        self.connections.len()
    }

    pub fn route_count(&self) -> usize {
        self.routes.len()
    }

    pub fn stops(&self) -> &[StopInfo] {
        &self.stops
    }

    pub fn stop_name(&self, stop: StopId) -> &str {
        &self.stops[stop.idx()].name
    }

    pub fn stop_by_name(&self, name: &str) -> Option<StopId> {
        self.stops.iter().position(|s| s.name == name).map(|i| StopId(i as u32))
    }

    pub fn trip_name(&self, trip: TripId) -> &str {
        &self.trip_names[trip.idx()]
    }

    pub fn trip_by_name(&self, name: &str) -> Option<TripId> {
        self.trip_names.iter().position(|s| s == name).map(|i| TripId(i as u32))
    }

    pub fn trips(&self) -> &[Trip] {
        &self.trips
    }

    pub fn trip(&self, trip: TripId) -> Result<&Trip> {
        self.trips.get(trip.idx()).ok_or(Error::UnknownTrip(trip.0))
    }

    pub fn trip_connections(&self, trip: TripId) -> &[Connection] {
        let t = &self.trips[trip.idx()];
        &self.connections[t.first as usize..(t.first + t.len) as usize]
    }

    /// Trip-major connection table.
    pub fn connections(&self) -> &[Connection] {
        &self.connections
    }

    pub fn connection(&self, id: ConnId) -> Result<&Connection> {
        self.connections.get(id.idx()).ok_or(Error::UnknownConnection(id.0))
    }

    /// Connections in scan order under the original schedule.
    pub fn sorted_connections(&self) -> &[Connection] {
        &self.sorted
    }

    pub fn footpaths(&self) -> &FootpathIndex {
        &self.footpaths
    }

    pub fn routes(&self) -> &[Vec<TripId>] {
        &self.routes
    }

    /// Connections leaving `stop`, in id order.
    pub fn departures_from(&self, stop: StopId) -> &[ConnId] {
        let s = stop.idx();
        &self.dep_conns[self.dep_offsets[s] as usize..self.dep_offsets[s + 1] as usize]
    }

    pub fn check_stop(&self, stop: StopId) -> Result<()> {
        if stop.idx() < self.stops.len() {
            Ok(())
        } else {
            Err(Error::UnknownStop(stop.0))
        }
    }

    /// First departure and last arrival of a trip, on the original schedule.
    pub fn trip_span(&self, trip: TripId) -> (Time, Time) {
        let conns = self.trip_connections(trip);
        (conns[0].dep_time, conns[conns.len() - 1].arr_time)
    }

    /// The stop sequence served by a trip.
    pub fn trip_stops(&self, trip: TripId) -> Vec<StopId> {
        let conns = self.trip_connections(trip);
        let mut stops = Vec::with_capacity(conns.len() + 1);
        stops.push(conns[0].dep_stop);
        stops.extend(conns.iter().map(|c| c.arr_stop));
        stops
    }

    /// Latest scheduled arrival of any connection.
    pub fn last_arrival(&self) -> Time {
        self.connections.iter().map(|c| c.arr_time).max().unwrap_or(0)
    }
}

impl ConnTimes for Timetable {
    fn times(&self, id: ConnId) -> (Time, Time) {
        let c = &self.connections[id.idx()];
        (c.dep_time, c.arr_time)
    }
}

/// One stop visit of a trip, as read from a schedule.
#[derive(Clone, Copy, Debug)]
pub struct StopEvent {
    pub stop: StopId,
    pub arr: Time,
    pub dep: Time,
}

#[derive(Default)]
pub struct TimetableBuilder {
    stops: Vec<StopInfo>,
    trip_names: Vec<String>,
    trip_modes: Vec<Mode>,
    trip_legs: Vec<Vec<(StopId, Time, StopId, Time)>>,
    footpaths: Vec<Footpath>,
}

impl TimetableBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_stop(&mut self, name: impl Into<String>, coord: Option<(f64, f64)>) -> StopId {
        self.stops.push(StopInfo { name: name.into(), coord });
        StopId(self.stops.len() as u32 - 1)
    }

    /// Adds a trip from its stop visits. Trips with fewer than two visits
    /// carry no connection and are dropped (`None`).
    pub fn add_trip(&mut self, name: impl Into<String>, mode: Mode, events: &[StopEvent]) -> Option<TripId> {
        if events.len() < 2 {
            return None;
        }
        let legs = events.windows(2).map(|w| (w[0].stop, w[0].dep, w[1].stop, w[1].arr)).collect();
        Some(self.push_trip(name.into(), mode, legs))
    }

    /// Adds a trip from raw legs `(dep_stop, dep, arr_stop, arr)` without
    /// checking anything; `validate` reports what is wrong.
    pub fn add_trip_legs(
        &mut self,
        name: impl Into<String>,
        mode: Mode,
        legs: Vec<(StopId, Time, StopId, Time)>,
    ) -> TripId {
        self.push_trip(name.into(), mode, legs)
    }

    fn push_trip(&mut self, name: String, mode: Mode, legs: Vec<(StopId, Time, StopId, Time)>) -> TripId {
        self.trip_names.push(name);
        self.trip_modes.push(mode);
        self.trip_legs.push(legs);
        TripId(self.trip_legs.len() as u32 - 1)
    }

    pub fn add_footpath(&mut self, from: StopId, to: StopId, duration: Duration) {
        self.footpaths.push(Footpath { from, to, duration });
    }

    pub fn stop_count(&self) -> usize {
        self.stops.len()
    }

    pub fn build(self) -> Timetable {
        let stop_count = self.stops.len();
        let mut trips = Vec::with_capacity(self.trip_legs.len());
        let mut connections = Vec::new();
        for (t, legs) in self.trip_legs.iter().enumerate() {
            let first = connections.len() as u32;
            for (pos, &(dep_stop, dep_time, arr_stop, arr_time)) in legs.iter().enumerate() {
                connections.push(Connection {
                    id: ConnId(connections.len() as u32),
                    dep_stop,
                    arr_stop,
                    dep_time,
                    arr_time,
                    trip: TripId(t as u32),
                    pos: pos as u32,
                });
            }
            trips.push(Trip {
                id: TripId(t as u32),
                route: RouteId(0),
                mode: self.trip_modes[t],
                first,
                len: legs.len() as u32,
            });
        }

        let sequences: Vec<Vec<StopId>> = self
            .trip_legs
            .iter()
            .map(|legs| {
                let mut seq: Vec<StopId> = legs.iter().map(|l| l.0).collect();
                if let Some(last) = legs.last() {
                    seq.push(last.2);
                }
                seq
            })
            .collect();
        let assignment = group_routes(&sequences);
        let route_count = assignment.iter().map(|r| r.idx() + 1).max().unwrap_or(0);
        let mut routes: Vec<Vec<TripId>> = vec![Vec::new(); route_count];
        for (t, route) in assignment.iter().enumerate() {
            trips[t].route = *route;
            routes[route.idx()].push(TripId(t as u32));
        }
        for members in &mut routes {
            members.sort_by_key(|&t| {
                let first = trips[t.idx()].first as usize;
                (connections.get(first).map(|c: &Connection| c.dep_time), t)
            });
        }

        let mut sorted = connections.clone();
        sort_scan_order(&mut sorted);

        let mut dep_offsets = vec![0u32; stop_count + 1];
        for c in &connections {
            if c.dep_stop.idx() < stop_count {
                dep_offsets[c.dep_stop.idx() + 1] += 1;
            }
        }
        for i in 0..stop_count {
            dep_offsets[i + 1] += dep_offsets[i];
        }
        let mut fill = dep_offsets.clone();
        let mut dep_conns = vec![ConnId(0); *dep_offsets.last().unwrap_or(&0) as usize];
        for c in &connections {
            if c.dep_stop.idx() < stop_count {
                let slot = &mut fill[c.dep_stop.idx()];
                dep_conns[*slot as usize] = c.id;
                *slot += 1;
            }
        }

        Timetable {
            footpaths: FootpathIndex::new(stop_count, self.footpaths),
            stops: self.stops,
            trip_names: self.trip_names,
            trips,
            connections,
            sorted,
            routes,
            dep_offsets,
            dep_conns,
        }
    }
}

/// Sorts connections into the scan order `(dep_time, trip, pos)`.
pub fn sort_scan_order(conns: &mut [Connection]) {
    conns.sort_unstable_by_key(Connection::key);
}

/// Assigns route ids so that two trips share a route iff their stop
/// sequences are identical. Ids follow the lexicographic order of the
/// distinct sequences, so the result does not depend on trip order.
pub fn group_routes(sequences: &[Vec<StopId>]) -> Vec<RouteId> {
    let mut distinct: Vec<&Vec<StopId>> = sequences.iter().collect();
    distinct.sort();
    distinct.dedup();
    sequences.iter().map(|seq| RouteId(distinct.binary_search(&seq).expect("present") as u32)).collect()
}

/// A structural problem found by [`validate`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    UnknownStop { conn: ConnId },
    SameStop { conn: ConnId },
    NonPositiveDuration { conn: ConnId },
    TripMismatch { conn: ConnId, trip: TripId },
    BrokenChain { trip: TripId, pos: u32 },
    TimeInconsistent { trip: TripId, pos: u32 },
    MissingLoop { stop: StopId },
    NotTransitivelyClosed { from: StopId, via: StopId, to: StopId },
    TriangleInequality { from: StopId, via: StopId, to: StopId },
    Unsorted { index: usize },
    SortedNotPermutation,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UnknownStop { conn } => write!(f, "connection {conn}: unknown stop"),
            Violation::SameStop { conn } => write!(f, "connection {conn}: departs and arrives at the same stop"),
            Violation::NonPositiveDuration { conn } => write!(f, "connection {conn}: arrival not after departure"),
            Violation::TripMismatch { conn, trip } => {
                write!(f, "connection {conn}: listed under trip {trip} but tagged otherwise")
            }
            Violation::BrokenChain { trip, pos } => {
                write!(f, "trip {trip}: connection {pos} does not start where {} ended", pos - 1)
            }
            Violation::TimeInconsistent { trip, pos } => {
                write!(f, "trip {trip}: connection {pos} departs before {} arrives", pos - 1)
            }
            Violation::MissingLoop { stop } => write!(f, "stop {stop}: no loop footpath"),
            Violation::NotTransitivelyClosed { from, via, to } => {
                write!(f, "footpaths {from}->{via}->{to} present but {from}->{to} missing")
            }
            Violation::TriangleInequality { from, via, to } => {
                write!(f, "footpath {from}->{to} is longer than via {via}")
            }
            Violation::Unsorted { index } => write!(f, "sorted connections out of order at index {index}"),
            Violation::SortedNotPermutation => {
                write!(f, "sorted connections are not a permutation of the trips' connections")
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        match self.violations.first() {
            None => Ok(()),
            Some(first) => Err(Error::Invalid { count: self.violations.len(), first: first.to_string() }),
        }
    }
}

/// Checks every structural invariant of the model and lists all violations.
pub fn validate(tt: &Timetable) -> ValidationReport {
    let mut violations = Vec::new();
    let n = tt.stop_count();

    for trip in &tt.trips {
        let conns = tt.trip_connections(trip.id);
        for (i, c) in conns.iter().enumerate() {
            if c.dep_stop.idx() >= n || c.arr_stop.idx() >= n {
                violations.push(Violation::UnknownStop { conn: c.id });
                continue;
            }
            if c.trip != trip.id {
                violations.push(Violation::TripMismatch { conn: c.id, trip: trip.id });
            }
            if c.dep_stop == c.arr_stop {
                violations.push(Violation::SameStop { conn: c.id });
            }
            if c.dep_time >= c.arr_time {
                violations.push(Violation::NonPositiveDuration { conn: c.id });
            }
            if i > 0 {
                let prev = &conns[i - 1];
                if c.dep_stop != prev.arr_stop {
                    violations.push(Violation::BrokenChain { trip: trip.id, pos: i as u32 });
                }
                if c.dep_time < prev.arr_time {
                    violations.push(Violation::TimeInconsistent { trip: trip.id, pos: i as u32 });
                }
            }
        }
    }

    let fp = &tt.footpaths;
    for s in 0..n {
        let a = StopId(s as u32);
        if fp.loop_duration(a).is_none() {
            violations.push(Violation::MissingLoop { stop: a });
        }
        for ab in fp.outgoing(a) {
            if ab.to == a {
                continue;
            }
            for bc in fp.outgoing(ab.to) {
                if bc.to == ab.to || bc.to == a {
                    continue;
                }
                match fp.walk_duration(a, bc.to) {
                    None => violations.push(Violation::NotTransitivelyClosed { from: a, via: ab.to, to: bc.to }),
                    Some(d) if d > ab.duration + bc.duration => {
                        violations.push(Violation::TriangleInequality { from: a, via: ab.to, to: bc.to })
                    }
                    Some(_) => {}
                }
            }
        }
    }

    for (i, w) in tt.sorted.windows(2).enumerate() {
        if w[0].key() > w[1].key() {
            violations.push(Violation::Unsorted { index: i + 1 });
        }
    }
    let mut seen = vec![false; tt.connections.len()];
    let mut permutation = tt.sorted.len() == tt.connections.len();
    for c in &tt.sorted {
        match seen.get_mut(c.id.idx()) {
            Some(flag) if !*flag && tt.connections[c.id.idx()] == *c => *flag = true,
            _ => permutation = false,
        }
    }
    if !permutation {
        violations.push(Violation::SortedNotPermutation);
    }

    ValidationReport { violations }
}

/// How the traveller stands at the start of a journey.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Start {
    /// Standing at the origin, ready to board at the departure time.
    Origin,
    /// Just arrived at the origin aboard `trip` with its connection `pos`;
    /// staying aboard is free, any other boarding needs a footpath.
    Onboard { trip: TripId, pos: u32 },
}

/// A sequence of connections with implied transfers. Connection times are
/// the ones known when the journey was planned.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Journey {
    pub origin: StopId,
    pub destination: StopId,
    pub departure: Time,
    pub start: Start,
    pub connections: Vec<Connection>,
    pub arrival: Time,
}

impl Journey {
    pub fn is_empty(&self) -> bool {
        self.connections.is_empty()
    }

    /// Splits the connections into maximal same-trip runs.
    pub fn legs(&self) -> Vec<&[Connection]> {
        let mut legs = Vec::new();
        let mut start = 0;
        for i in 1..=self.connections.len() {
            if i == self.connections.len() || !continues(&self.connections[i - 1], &self.connections[i]) {
                if start < i {
                    legs.push(&self.connections[start..i]);
                }
                start = i;
            }
        }
        legs
    }

    /// Number of vehicle changes, counting a change at an onboard start.
    pub fn transfers(&self) -> usize {
        let legs = self.legs().len();
        match (self.start, self.connections.first()) {
            (Start::Onboard { trip, pos }, Some(c)) if !(c.trip == trip && c.pos == pos + 1) => legs,
            _ => legs.saturating_sub(1),
        }
    }

    /// Arrival at the destination if every step is feasible under `times`.
    pub fn arrival_under(&self, tt: &Timetable, times: &impl ConnTimes) -> Result<Option<Time>> {
        journey_arrival(self, tt, times)
    }
}

#[inline]
pub(crate) fn continues(prev: &Connection, next: &Connection) -> bool {
    prev.trip == next.trip && next.pos == prev.pos + 1
}

/// True iff the journey is executable under the timetable's own times.
pub fn journey_is_valid(journey: &Journey, tt: &Timetable) -> Result<bool> {
    journey_is_valid_with(journey, tt, tt)
}

/// True iff the journey is executable under `times`.
pub fn journey_is_valid_with(journey: &Journey, tt: &Timetable, times: &impl ConnTimes) -> Result<bool> {
    if journey.connections.is_empty() && journey.origin == journey.destination {
        tt.check_stop(journey.origin)?;
        return Ok(true);
    }
    Ok(journey_arrival(journey, tt, times)?.is_some())
}

fn journey_arrival(journey: &Journey, tt: &Timetable, times: &impl ConnTimes) -> Result<Option<Time>> {
    tt.check_stop(journey.origin)?;
    tt.check_stop(journey.destination)?;
    let fp = tt.footpaths();

    let mut prev: Option<Connection> = None;
    for (i, recorded) in journey.connections.iter().enumerate() {
        let base = tt.connection(recorded.id)?;
        let (dep, arr) = times.times(base.id);
        let c = base.with_times(dep, arr);
        let ok = match (i, prev) {
            (0, None) => match journey.start {
                Start::Origin => {
                    if c.dep_stop == journey.origin {
                        journey.departure <= c.dep_time
                    } else {
                        fp.walk_duration(journey.origin, c.dep_stop)
                            .is_some_and(|d| journey.departure + d <= c.dep_time)
                    }
                }
                Start::Onboard { trip, pos } => {
                    tt.trip(trip)?;
                    if c.trip == trip && c.pos == pos + 1 {
                        true
                    } else {
                        fp.walk_duration(journey.origin, c.dep_stop)
                            .is_some_and(|d| journey.departure + d <= c.dep_time)
                    }
                }
            },
            (_, Some(p)) => {
                if continues(&p, &c) {
                    true
                } else if p.trip == c.trip {
                    false
                } else {
                    fp.walk_duration(p.arr_stop, c.dep_stop).is_some_and(|d| p.arr_time + d <= c.dep_time)
                }
            }
            (_, None) => unreachable!(),
        };
        if !ok {
            return Ok(None);
        }
        prev = Some(c);
    }

    let (at, time) = match prev {
        Some(p) => (p.arr_stop, p.arr_time),
        None => (journey.origin, journey.departure),
    };
    if at == journey.destination {
        return Ok(Some(time));
    }
    Ok(fp.walk_duration(at, journey.destination).map(|d| time + d))
}
