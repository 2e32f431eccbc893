//! Query envelopes: the connections that can still be part of a journey
//! arriving by a bound `τ_d`, judged with lower-bound durations from the
//! time-independent graph.
//!
//! A connection `c` of the envelope for `(s_o, s_d, τ_q, τ_d)` satisfies
//! - (a) `fwd[dep(c)] + duration(c) + bwd[arr(c)] <= τ_d - τ_q`,
//! - (b) `arr_time(c) + bwd[arr(c)] <= τ_d`,
//! - (c) `τ_q <= dep_time(c)`,
//!
//! where `fwd`/`bwd` are shortest durations from `s_o` and to `s_d`.

use std::collections::HashMap;

use crate::clock::{Duration, Time, INFINITY};
use crate::delay::{trip_times, DelayFeed};
use crate::error::{Error, Result};
use crate::tig::{shortest_durations, Direction, Tig};
use crate::timetable::{
    sort_scan_order, ConnId, ConnTimes, Connection, FootpathIndex, StopId, Timetable, TripId, Walk, WalkGraph,
};

pub const HEADER_BYTES: usize = 32;
pub const RECORD_BYTES: usize = 16;
/// Framing of one pushed update batch.
pub const UPDATE_HEADER_BYTES: usize = 8;
const MAGIC: &[u8; 4] = b"ENV1";

#[derive(Clone, Debug)]
pub struct Envelope {
    pub origin: StopId,
    pub destination: StopId,
    pub departure: Time,
    pub bound: Time,
    fwd: Vec<Duration>,
    bwd: Vec<Duration>,
    /// Members with their current times, in scan order unless `dirty`.
    conns: Vec<Connection>,
    index: HashMap<ConnId, usize>,
    dirty: bool,
    stops: Vec<bool>,
    walks: FootpathIndex,
}

/// What an update batch changed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct UpdateOutcome {
    pub retimed: usize,
    pub added: usize,
}

impl UpdateOutcome {
    pub fn changed(&self) -> bool {
        self.retimed + self.added > 0
    }

    /// Bytes needed to push this batch.
    pub fn bytes(&self) -> usize {
        if self.changed() {
            UPDATE_HEADER_BYTES + RECORD_BYTES * (self.retimed + self.added)
        } else {
            0
        }
    }
}

#[inline]
fn add(a: Duration, b: Duration) -> u64 {
    a as u64 + b as u64
}

/// Builds the envelope from the connection times in `times`.
pub fn build_envelope(
    tt: &Timetable,
    times: &impl ConnTimes,
    tig: &Tig,
    origin: StopId,
    destination: StopId,
    departure: Time,
    bound: Time,
) -> Result<Envelope> {
    tt.check_stop(origin)?;
    tt.check_stop(destination)?;
    if bound < departure {
        return Err(Error::Param(format!("envelope bound {bound} precedes departure {departure}")));
    }
    if tig.stop_count() != tt.stop_count() {
        return Err(Error::InconsistentState("time-independent graph built for another timetable".into()));
    }
    let budget = bound - departure;
    let fwd = shortest_durations(tig, origin, Direction::Forward, budget)?;
    let bwd = shortest_durations(tig, destination, Direction::Backward, budget)?;
    let mut env = Envelope {
        origin,
        destination,
        departure,
        bound,
        fwd,
        bwd,
        conns: Vec::new(),
        index: HashMap::new(),
        dirty: false,
        stops: vec![false; tt.stop_count()],
        walks: FootpathIndex::default(),
    };
    for s in 0..tt.stop_count() {
        if env.fwd[s] == INFINITY {
            continue;
        }
        for &id in tt.departures_from(StopId(s as u32)) {
            let (dep, arr) = times.times(id);
            let c = tt.connections()[id.idx()].with_times(dep, arr);
            if env.admits(&c) {
                env.conns.push(c);
            }
        }
    }
    sort_scan_order(&mut env.conns);
    env.reindex();
    env.rebuild_walks(tt);
    Ok(env)
}

impl Envelope {
    /// Conditions (a), (b) and (c) for `c` with the times it carries.
    pub fn admits(&self, c: &Connection) -> bool {
        let (f, b) = (self.fwd[c.dep_stop.idx()], self.bwd[c.arr_stop.idx()]);
        if f == INFINITY || b == INFINITY {
            return false;
        }
        add(f, b) + c.duration() as u64 <= (self.bound - self.departure) as u64
            && add(c.arr_time, b) <= self.bound as u64
            && self.departure <= c.dep_time
    }

    fn reindex(&mut self) {
        self.index = self.conns.iter().enumerate().map(|(i, c)| (c.id, i)).collect();
    }

    fn rebuild_walks(&mut self, tt: &Timetable) {
        self.stops.iter_mut().for_each(|s| *s = false);
        self.stops[self.origin.idx()] = true;
        self.stops[self.destination.idx()] = true;
        for c in &self.conns {
            self.stops[c.dep_stop.idx()] = true;
            self.stops[c.arr_stop.idx()] = true;
        }
        let stops = &self.stops;
        self.walks = FootpathIndex::new(
            tt.stop_count(),
            tt.footpaths().iter().filter(|f| stops[f.from.idx()] && stops[f.to.idx()]),
        );
    }

    pub fn len(&self) -> usize {
        self.conns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.conns.is_empty()
    }

    pub fn contains(&self, id: ConnId) -> bool {
        self.index.contains_key(&id)
    }

    /// Current times of a member.
    pub fn times_of(&self, id: ConnId) -> Option<(Time, Time)> {
        self.index.get(&id).map(|&i| (self.conns[i].dep_time, self.conns[i].arr_time))
    }

    pub fn stop_count(&self) -> usize {
        self.stops.iter().filter(|&&s| s).count()
    }

    pub fn has_stop(&self, stop: StopId) -> bool {
        self.stops.get(stop.idx()).copied().unwrap_or(false)
    }

    pub fn forward_durations(&self) -> &[Duration] {
        &self.fwd
    }

    pub fn backward_durations(&self) -> &[Duration] {
        &self.bwd
    }

    /// Members in scan order. Call [`Envelope::resort`] after updates.
    pub fn connections(&self) -> &[Connection] {
        debug_assert!(!self.dirty, "envelope read before re-sorting");
        &self.conns
    }

    pub fn ids(&self) -> Vec<ConnId> {
        let mut ids: Vec<ConnId> = self.conns.iter().map(|c| c.id).collect();
        ids.sort_unstable();
        ids
    }

    pub fn needs_resort(&self) -> bool {
        self.dirty
    }

    /// Restores scan order after updates.
    pub fn resort(&mut self) {
        if self.dirty {
            sort_scan_order(&mut self.conns);
            self.reindex();
            self.dirty = false;
        }
    }

    /// Applies the events of `feed` with `after < at <= upto`: every
    /// connection of an affected trip is re-timed if it is a member and
    /// added if it now satisfies the conditions. Members are never dropped.
    pub fn apply_updates(&mut self, tt: &Timetable, feed: &DelayFeed, after: Time, upto: Time) -> UpdateOutcome {
        let mut trips: Vec<TripId> = feed.between(after, upto).iter().map(|e| e.trip).collect();
        trips.sort_unstable();
        trips.dedup();
        let mut out = UpdateOutcome::default();
        let mut new_stop = false;
        for trip in trips {
            let times = trip_times(tt, trip, feed.trip_events(trip), upto);
            for (c, &(dep, arr)) in tt.trip_connections(trip).iter().zip(&times) {
                let now = c.with_times(dep, arr);
                match self.index.get(&c.id) {
                    Some(&i) => {
                        let old = &mut self.conns[i];
                        if (old.dep_time, old.arr_time) != (dep, arr) {
                            *old = now;
                            out.retimed += 1;
                            self.dirty = true;
                        }
                    }
                    None if self.admits(&now) => {
                        self.index.insert(c.id, self.conns.len());
                        self.conns.push(now);
                        out.added += 1;
                        self.dirty = true;
                        new_stop |= !self.stops[now.dep_stop.idx()] || !self.stops[now.arr_stop.idx()];
                    }
                    None => {}
                }
            }
        }
        if new_stop {
            self.rebuild_walks(tt);
        }
        out
    }

    /// Serialized size in bytes.
    pub fn byte_size(&self) -> usize {
        HEADER_BYTES + RECORD_BYTES * self.conns.len()
    }

    /// Little-endian wire form: a 32-byte header (magic, origin,
    /// destination, departure, bound, record count, 8 zero bytes), then one
    /// 16-byte record per member (connection id, dep, arr, trip) in scan
    /// order.
    pub fn encode(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(self.byte_size());
        buf.extend_from_slice(MAGIC);
        for v in [self.origin.0, self.destination.0, self.departure, self.bound, self.conns.len() as u32] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        buf.extend_from_slice(&[0; 8]);
        for c in &self.conns {
            for v in [c.id.0, c.dep_time, c.arr_time, c.trip.0] {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        buf
    }
}

impl WalkGraph for Envelope {
    fn outgoing(&self, stop: StopId) -> &[Walk] {
        self.walks.outgoing(stop)
    }
}

/// One decoded wire record.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WireRecord {
    pub conn: ConnId,
    pub dep_time: Time,
    pub arr_time: Time,
    pub trip: TripId,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WireEnvelope {
    pub origin: StopId,
    pub destination: StopId,
    pub departure: Time,
    pub bound: Time,
    pub records: Vec<WireRecord>,
}

pub fn decode(bytes: &[u8]) -> Result<WireEnvelope> {
    let bad = |m: &str| Error::Cache(format!("envelope wire data: {m}"));
    if bytes.len() < HEADER_BYTES || &bytes[..4] != MAGIC {
        return Err(bad("missing header"));
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"));
    let count = word(20) as usize;
    if bytes.len() != HEADER_BYTES + count * RECORD_BYTES {
        return Err(bad("length does not match record count"));
    }
    let records = (0..count)
        .map(|i| {
            let at = HEADER_BYTES + i * RECORD_BYTES;
            WireRecord {
                conn: ConnId(word(at)),
                dep_time: word(at + 4),
                arr_time: word(at + 8),
                trip: TripId(word(at + 12)),
            }
        })
        .collect();
    Ok(WireEnvelope {
        origin: StopId(word(4)),
        destination: StopId(word(8)),
        departure: word(12),
        bound: word(16),
        records,
    })
}
