//! Random timetables and delay feeds for tests and benchmarks.
//!
//! Times fall on whole minutes so that ties are common.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::clock::{hm, Duration, Time, MINUTE};
use crate::delay::{DelayEvent, DelayFeed};
use crate::error::Result;
use crate::gtfs::close_footpaths;
use crate::timetable::{validate, Footpath, Mode, StopEvent, StopId, Timetable, TimetableBuilder, TripId};

#[derive(Clone, Debug)]
pub struct InstanceShape {
    pub stops: usize,
    /// Stop sequences; each gets `trips_per_route` trips.
    pub routes: usize,
    pub trips_per_route: usize,
    /// Stops per route, at least 2.
    pub max_route_len: usize,
    /// First departures fall in `[start, start + window)`.
    pub start: Time,
    pub window: Duration,
    pub max_ride_min: u32,
    pub max_dwell_min: u32,
    /// Chance that a given ordered stop pair gets a footpath before closure.
    pub footpath_density: f64,
    pub max_walk_min: u32,
    pub max_loop_min: u32,
}

impl InstanceShape {
    /// At most 12 stops and 60 connections.
    pub fn tiny() -> Self {
        InstanceShape {
            stops: 8,
            routes: 4,
            trips_per_route: 3,
            max_route_len: 5,
            start: hm(8, 0),
            window: 40 * MINUTE,
            max_ride_min: 8,
            max_dwell_min: 2,
            footpath_density: 0.08,
            max_walk_min: 8,
            max_loop_min: 3,
        }
    }

    /// A few hundred connections with many transfers.
    pub fn small() -> Self {
        InstanceShape {
            stops: 25,
            routes: 10,
            trips_per_route: 6,
            max_route_len: 7,
            start: hm(7, 0),
            window: 2 * 60 * MINUTE,
            max_ride_min: 10,
            max_dwell_min: 2,
            footpath_density: 0.03,
            max_walk_min: 8,
            max_loop_min: 3,
        }
    }

    /// At most 100 stops and 3,000 connections.
    pub fn medium() -> Self {
        InstanceShape {
            stops: 80,
            routes: 24,
            trips_per_route: 12,
            max_route_len: 10,
            start: hm(6, 0),
            window: 4 * 60 * MINUTE,
            max_ride_min: 12,
            max_dwell_min: 3,
            footpath_density: 0.01,
            max_walk_min: 10,
            max_loop_min: 4,
        }
    }

    pub fn max_connections(&self) -> usize {
        self.routes * self.trips_per_route * (self.max_route_len - 1)
    }
}

/// Draws a valid timetable. Trips of a route share stop sequence and ride
/// times but not their start.
pub fn random_timetable<R: Rng>(rng: &mut R, shape: &InstanceShape) -> Timetable {
    assert!(shape.stops >= 2 && shape.max_route_len >= 2);
    let mut b = TimetableBuilder::new();
    let stops: Vec<StopId> = (0..shape.stops).map(|i| b.add_stop(format!("S{i}"), None)).collect();
    for r in 0..shape.routes {
        let len = rng.random_range(2..=shape.max_route_len.min(shape.stops));
        let mut seq = stops.clone();
        seq.shuffle(rng);
        seq.truncate(len);
        let rides: Vec<Duration> = (1..len).map(|_| rng.random_range(1..=shape.max_ride_min) * MINUTE).collect();
        let dwells: Vec<Duration> = (0..len).map(|_| rng.random_range(0..=shape.max_dwell_min) * MINUTE).collect();
        let mode = [Mode::Separated, Mode::SemiSeparated, Mode::MixedTraffic][r % 3];
        for k in 0..shape.trips_per_route {
            let mut t = shape.start + rng.random_range(0..shape.window / MINUTE) * MINUTE;
            let mut events = Vec::with_capacity(len);
            for (i, &stop) in seq.iter().enumerate() {
                let arr = t;
                let dep = if i + 1 < len { arr + dwells[i] } else { arr };
                events.push(StopEvent { stop, arr, dep });
                if i + 1 < len {
                    t = dep + rides[i];
                }
            }
            b.add_trip(format!("r{r}t{k}"), mode, &events);
        }
    }
    let mut walks = Vec::new();
    for &a in &stops {
        for &c in &stops {
            if a != c && rng.random_bool(shape.footpath_density) {
                let d = rng.random_range(1..=shape.max_walk_min) * MINUTE;
                walks.push(Footpath { from: a, to: c, duration: d });
            }
        }
    }
    let closed = close_footpaths(&walks, shape.stops, shape.stops).expect("bound covers all stops");
    for f in closed {
        b.add_footpath(f.from, f.to, f.duration);
    }
    for &s in &stops {
        b.add_footpath(s, s, rng.random_range(0..=shape.max_loop_min) * MINUTE);
    }
    let tt = b.build();
    debug_assert!(validate(&tt).is_valid(), "{:?}", validate(&tt));
    tt
}

/// Draws up to `events` delay events with delays up to `max_delay_min`
/// minutes, some of them zero (a recovered vehicle).
pub fn random_feed<R: Rng>(rng: &mut R, tt: &Timetable, events: usize, max_delay_min: u32) -> Result<DelayFeed> {
    let mut out: Vec<DelayEvent> = Vec::new();
    if tt.trip_count() > 0 {
        for _ in 0..events {
            let trip = TripId(rng.random_range(0..tt.trip_count() as u32));
            let (first, last) = tt.trip_span(trip);
            let at = first + rng.random_range(0..=(last - first) / MINUTE) * MINUTE;
            if out.iter().any(|e| e.trip == trip && e.at == at) {
                continue;
            }
            let delay = rng.random_range(0..=max_delay_min) * MINUTE;
            out.push(DelayEvent { trip, at, delay });
        }
    }
    DelayFeed::new(tt, out)
}
