//! Connection Scan Algorithm over any scan-ordered connection slice: the
//! full (possibly delayed) timetable or an envelope.
//!
//! Labels per stop:
//! - `ready`: earliest time a traveller can board there, transfer included;
//! - `arrival`: earliest arrival there as a destination;
//! - `vehicle`: earliest vehicle arrival there, used to skip footpath
//!   relaxations that an earlier arrival already dominated.
//!
//! A connection is usable if its stop is ready in time, or if the traveller
//! rode the immediately preceding connection of the same trip. Labels are
//! reset by bumping a stamp, so repeated queries do not reallocate.

use crate::clock::{Time, INFINITY};
use crate::error::{Error, Result};
use crate::timetable::{Connection, Journey, Start, StopId, WalkGraph};

const NONE: u32 = u32::MAX;
const FROM_START: u32 = u32::MAX - 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Query {
    pub origin: StopId,
    pub destination: StopId,
    pub departure: Time,
    pub start: Start,
}

impl Query {
    pub fn new(origin: StopId, destination: StopId, departure: Time) -> Self {
        Query { origin, destination, departure, start: Start::Origin }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ScanStats {
    /// Connections examined by the scan.
    pub scanned: usize,
}

/// Reusable scratch space for scans over one stop/trip universe.
#[derive(Clone, Debug)]
pub struct CsaSolver {
    stamp: u32,
    stop_stamp: Vec<u32>,
    ready: Vec<Time>,
    ready_from: Vec<u32>,
    arrival: Vec<Time>,
    arrival_from: Vec<u32>,
    vehicle: Vec<Time>,
    trip_stamp: Vec<u32>,
    trip_last_pos: Vec<u32>,
    trip_last_idx: Vec<u32>,
    prev_in_trip: Vec<u32>,
    destination: StopId,
}

impl CsaSolver {
    pub fn new(stop_count: usize, trip_count: usize) -> Self {
        CsaSolver {
            stamp: 0,
            stop_stamp: vec![0; stop_count],
            ready: vec![INFINITY; stop_count],
            ready_from: vec![NONE; stop_count],
            arrival: vec![INFINITY; stop_count],
            arrival_from: vec![NONE; stop_count],
            vehicle: vec![INFINITY; stop_count],
            trip_stamp: vec![0; trip_count],
            trip_last_pos: vec![0; trip_count],
            trip_last_idx: vec![NONE; trip_count],
            prev_in_trip: Vec::new(),
            destination: StopId(0),
        }
    }

    pub fn for_timetable(tt: &crate::timetable::Timetable) -> Self {
        Self::new(tt.stop_count(), tt.trip_count())
    }

    fn reset(&mut self) {
        self.stamp = self.stamp.wrapping_add(1);
        if self.stamp == 0 {
            self.stop_stamp.iter_mut().for_each(|s| *s = 0);
            self.trip_stamp.iter_mut().for_each(|s| *s = 0);
            self.stamp = 1;
        }
    }

    #[inline]
    fn touch(&mut self, s: usize) {
        if self.stop_stamp[s] != self.stamp {
            self.stop_stamp[s] = self.stamp;
            self.ready[s] = INFINITY;
            self.ready_from[s] = NONE;
            self.arrival[s] = INFINITY;
            self.arrival_from[s] = NONE;
            self.vehicle[s] = INFINITY;
        }
    }

    #[inline]
    fn ready_at(&self, s: usize) -> Time {
        if self.stop_stamp[s] == self.stamp {
            self.ready[s]
        } else {
            INFINITY
        }
    }

    /// Earliest arrival at `stop` found by the last scan.
    #[inline]
    pub fn arrival_at(&self, stop: StopId) -> Time {
        let s = stop.idx();
        if self.stop_stamp.get(s) == Some(&self.stamp) {
            self.arrival[s]
        } else {
            INFINITY
        }
    }

    #[inline]
    fn vehicle_at(&self, s: usize) -> Time {
        if self.stop_stamp[s] == self.stamp {
            self.vehicle[s]
        } else {
            INFINITY
        }
    }

    fn check(&self, query: &Query) -> Result<()> {
        let n = self.stop_stamp.len();
        for s in [query.origin, query.destination] {
            if s.idx() >= n {
                return Err(Error::UnknownStop(s.0));
            }
        }
        if let Start::Onboard { trip, .. } = query.start {
            if trip.idx() >= self.trip_stamp.len() {
                return Err(Error::UnknownTrip(trip.0));
            }
        }
        Ok(())
    }

    /// Runs one scan. With `early_stop` the scan ends once connections
    /// depart no earlier than the best destination arrival; without it the
    /// labels hold one-to-all earliest arrivals afterwards.
    pub fn scan<W: WalkGraph + ?Sized>(
        &mut self,
        conns: &[Connection],
        walks: &W,
        query: &Query,
        early_stop: bool,
    ) -> Result<ScanStats> {
        self.check(query)?;
        self.reset();
        if self.prev_in_trip.len() < conns.len() {
            self.prev_in_trip.resize(conns.len(), NONE);
        }
        self.destination = query.destination;
        let (o, tau) = (query.origin.idx(), query.departure);

        self.touch(o);
        self.arrival[o] = tau;
        self.arrival_from[o] = FROM_START;
        match query.start {
            Start::Origin => {
                self.ready[o] = tau;
                self.ready_from[o] = FROM_START;
                for w in walks.outgoing(query.origin) {
                    let s = w.to.idx();
                    if s == o {
                        continue;
                    }
                    self.touch(s);
                    let t = tau + w.duration;
                    if t < self.ready[s] {
                        self.ready[s] = t;
                        self.ready_from[s] = FROM_START;
                    }
                    if t < self.arrival[s] {
                        self.arrival[s] = t;
                        self.arrival_from[s] = FROM_START;
                    }
                }
            }
            Start::Onboard { trip, pos } => {
                self.vehicle[o] = tau;
                for w in walks.outgoing(query.origin) {
                    let s = w.to.idx();
                    self.touch(s);
                    let t = tau + w.duration;
                    if t < self.ready[s] {
                        self.ready[s] = t;
                        self.ready_from[s] = FROM_START;
                    }
                    if s != o && t < self.arrival[s] {
                        self.arrival[s] = t;
                        self.arrival_from[s] = FROM_START;
                    }
                }
                let t = trip.idx();
                self.trip_stamp[t] = self.stamp;
                self.trip_last_pos[t] = pos;
                self.trip_last_idx[t] = FROM_START;
            }
        }

        let d = query.destination.idx();
        let first = conns.partition_point(|c| c.dep_time < tau);
        let mut stats = ScanStats::default();
        for (i, c) in conns.iter().enumerate().skip(first) {
            if early_stop && c.dep_time >= self.arrival_at(query.destination) {
                break;
            }
            stats.scanned += 1;

            let t = c.trip.idx();
            let via_trip = self.trip_stamp[t] == self.stamp && self.trip_last_pos[t] + 1 == c.pos;
            if !via_trip && self.ready_at(c.dep_stop.idx()) > c.dep_time {
                continue;
            }
            self.prev_in_trip[i] = if via_trip { self.trip_last_idx[t] } else { NONE };
            self.trip_stamp[t] = self.stamp;
            self.trip_last_pos[t] = c.pos;
            self.trip_last_idx[t] = i as u32;

            let y = c.arr_stop.idx();
            let a = c.arr_time;
            if a >= self.vehicle_at(y) {
                continue;
            }
            self.touch(y);
            self.vehicle[y] = a;
            if a < self.arrival[y] {
                self.arrival[y] = a;
                self.arrival_from[y] = i as u32;
            }
            for w in walks.outgoing(c.arr_stop) {
                let s = w.to.idx();
                self.touch(s);
                let at = a + w.duration;
                if at < self.ready[s] {
                    self.ready[s] = at;
                    self.ready_from[s] = i as u32;
                }
                if s != y && at < self.arrival[s] {
                    self.arrival[s] = at;
                    self.arrival_from[s] = i as u32;
                }
            }
        }
        debug_assert!(d < self.stop_stamp.len());
        Ok(stats)
    }

    /// Follows journey pointers back from the destination of the last scan.
    /// `conns` must be the slice that was scanned.
    pub fn extract_journey(&self, conns: &[Connection], query: &Query) -> Result<Journey> {
        if query.destination != self.destination {
            return Err(Error::InconsistentState("journey extraction for a different destination than scanned".into()));
        }
        let arrival = self.arrival_at(query.destination);
        if arrival == INFINITY {
            return Err(Error::Unreachable);
        }
        let mut rev = Vec::new();
        let mut idx = self.arrival_from[query.destination.idx()];
        while idx != FROM_START {
            let mut i = idx as usize;
            loop {
                rev.push(conns[i]);
                match self.prev_in_trip[i] {
                    NONE => {
                        idx = self.ready_from[conns[i].dep_stop.idx()];
                        break;
                    }
                    FROM_START => {
                        idx = FROM_START;
                        break;
                    }
                    p => i = p as usize,
                }
            }
        }
        rev.reverse();
        Ok(Journey {
            origin: query.origin,
            destination: query.destination,
            departure: query.departure,
            start: query.start,
            connections: rev,
            arrival,
        })
    }

    /// Earliest arrival at the destination and a journey achieving it;
    /// `None` when the destination cannot be reached.
    pub fn earliest_arrival<W: WalkGraph + ?Sized>(
        &mut self,
        conns: &[Connection],
        walks: &W,
        query: &Query,
    ) -> Result<(Option<Journey>, ScanStats)> {
        let stats = self.scan(conns, walks, query, true)?;
        match self.extract_journey(conns, query) {
            Ok(j) => Ok((Some(j), stats)),
            Err(Error::Unreachable) => Ok((None, stats)),
            Err(e) => Err(e),
        }
    }

    /// One-to-all earliest arrivals (no early termination).
    pub fn one_to_all<W: WalkGraph + ?Sized>(
        &mut self,
        conns: &[Connection],
        walks: &W,
        query: &Query,
    ) -> Result<Vec<Time>> {
        self.scan(conns, walks, query, false)?;
        Ok((0..self.stop_stamp.len()).map(|s| self.arrival_at(StopId(s as u32))).collect())
    }
}

/// One-shot convenience wrapper allocating its own scratch space.
pub fn csa_earliest_arrival<W: WalkGraph + ?Sized>(
    conns: &[Connection],
    walks: &W,
    stop_count: usize,
    trip_count: usize,
    query: &Query,
) -> Result<Option<Journey>> {
    let mut solver = CsaSolver::new(stop_count, trip_count);
    Ok(solver.earliest_arrival(conns, walks, query)?.0)
}
