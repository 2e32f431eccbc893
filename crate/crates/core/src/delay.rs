//! Delay events, delayed timetable views and the exponential delay sampler.
//!
//! A delay is absolute: an event `(trip, at, delay)` says the trip runs
//! `delay` seconds behind schedule from `at` on. For a connection departing
//! at `d` on the schedule, the governing event is the latest known one with
//! `at <= d`. A vehicle never leaves a stop before it arrived there, so a
//! smaller later delay only catches up as far as the previous arrival allows.

use std::collections::HashMap;
use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::clock::{Duration, Time, HOUR, INFINITY};
use crate::error::{Error, Result};
use crate::timetable::{sort_scan_order, ConnId, ConnTimes, Connection, Mode, Timetable, TripId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DelayEvent {
    pub trip: TripId,
    /// When the delay occurs and becomes known.
    pub at: Time,
    /// Total delay of the trip relative to its schedule.
    pub delay: Duration,
}

/// Delay events sorted by `(at, trip)`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DelayFeed {
    events: Vec<DelayEvent>,
    /// Per trip: `(at, delay)` in increasing `at`.
    by_trip: HashMap<TripId, Vec<(Time, Duration)>>,
}

impl DelayFeed {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Validates and sorts the events. Each event must lie within its
    /// trip's scheduled timeframe, and one trip cannot have two events at
    /// the same instant.
    pub fn new(tt: &Timetable, mut events: Vec<DelayEvent>) -> Result<Self> {
        for e in &events {
            tt.trip(e.trip)?;
            let (first, last) = tt.trip_span(e.trip);
            if e.at < first || e.at > last {
                return Err(Error::Feed(format!(
                    "event for trip {} at {} lies outside its timeframe [{first}, {last}]",
                    tt.trip_name(e.trip),
                    e.at
                )));
            }
        }
        events.sort_by_key(|e| (e.at, e.trip));
        let mut by_trip: HashMap<TripId, Vec<(Time, Duration)>> = HashMap::new();
        for e in &events {
            let list = by_trip.entry(e.trip).or_default();
            if list.last().is_some_and(|&(at, _)| at == e.at) {
                return Err(Error::Feed(format!("trip {} has two events at {}", tt.trip_name(e.trip), e.at)));
            }
            list.push((e.at, e.delay));
        }
        Ok(DelayFeed { events, by_trip })
    }

    pub fn events(&self) -> &[DelayEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Events known at `tau`: the prefix with `at <= tau`.
    pub fn known_at(&self, tau: Time) -> &[DelayEvent] {
        &self.events[..self.events.partition_point(|e| e.at <= tau)]
    }

    /// All events, the ground truth used for execution.
    pub fn realized(&self) -> &[DelayEvent] {
        &self.events
    }

    /// Events with `after < at <= upto`.
    pub fn between(&self, after: Time, upto: Time) -> &[DelayEvent] {
        let lo = if after == INFINITY { self.events.len() } else { self.events.partition_point(|e| e.at <= after) };
        let hi = self.events.partition_point(|e| e.at <= upto).max(lo);
        &self.events[lo..hi]
    }

    /// A feed holding only the events known at `tau`.
    pub fn prefix(&self, tt: &Timetable, tau: Time) -> Result<DelayFeed> {
        DelayFeed::new(tt, self.known_at(tau).to_vec())
    }

    /// Events of one trip as `(at, delay)` pairs in time order.
    pub fn trip_events(&self, trip: TripId) -> &[(Time, Duration)] {
        self.by_trip.get(&trip).map_or(&[], Vec::as_slice)
    }

    /// Trips with at least one event, in id order.
    pub fn delayed_trips(&self) -> Vec<TripId> {
        let mut trips: Vec<TripId> = self.by_trip.keys().copied().collect();
        trips.sort_unstable();
        trips
    }

    /// Writes the text form: a header line, then
    /// `trip_id,tau_delta_seconds,delta_seconds` per event with external
    /// trip ids. A `# timetable=<fingerprint>` line may lead the file.
    pub fn write_text<W: Write>(&self, tt: &Timetable, fingerprint: Option<&str>, mut out: W) -> Result<()> {
        if let Some(fp) = fingerprint {
            writeln!(out, "# timetable={fp}")?;
        }
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(["trip_id", "tau_delta_seconds", "delta_seconds"]).map_err(io)?;
        for e in &self.events {
            w.write_record([tt.trip_name(e.trip), &e.at.to_string(), &e.delay.to_string()]).map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Parses the text form, returning the feed and the fingerprint line if
    /// present.
    pub fn read_text<R: Read>(tt: &Timetable, mut input: R) -> Result<(DelayFeed, Option<String>)> {
        const FILE: &str = "delay feed";
        let mut text = String::new();
        input.read_to_string(&mut text)?;
        let mut fingerprint = None;
        let mut body = text.as_str();
        if let Some(rest) = body.strip_prefix("# timetable=") {
            let (line, tail) = rest.split_once('\n').unwrap_or((rest, ""));
            fingerprint = Some(line.trim().to_string());
            body = tail;
        }
        let names: HashMap<&str, TripId> = tt.trips().iter().map(|t| (tt.trip_name(t.id), t.id)).collect();
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(body.as_bytes());
        let headers = reader.headers().map_err(|e| Error::parse(FILE, 1, e.to_string()))?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::MissingColumn { file: FILE.into(), column: name.into() })
        };
        let (c_trip, c_at, c_delay) = (col("trip_id")?, col("tau_delta_seconds")?, col("delta_seconds")?);
        let mut events = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let row = i as u64 + 2;
            let rec = rec.map_err(|e| Error::parse(FILE, row, e.to_string()))?;
            let field = |c: usize| rec.get(c).unwrap_or("");
            let trip = *names
                .get(field(c_trip))
                .ok_or_else(|| Error::parse(FILE, row, format!("unknown trip `{}`", field(c_trip))))?;
            let num = |c: usize, what: &str| {
                field(c).parse::<u32>().map_err(|_| Error::parse(FILE, row, format!("bad {what} `{}`", field(c))))
            };
            events.push(DelayEvent {
                trip,
                at: num(c_at, "tau_delta_seconds")?,
                delay: num(c_delay, "delta_seconds")?,
            });
        }
        Ok((DelayFeed::new(tt, events)?, fingerprint))
    }
}

/// Times of every connection of `trip` given its `(at, delay)` events,
/// considering only events with `at <= tau`.
pub fn trip_times(tt: &Timetable, trip: TripId, events: &[(Time, Duration)], tau: Time) -> Vec<(Time, Time)> {
    let conns = tt.trip_connections(trip);
    let mut out = Vec::with_capacity(conns.len());
    let mut prev_arr = 0;
    let mut k = 0;
    let mut delay = 0;
    for c in conns {
        while k < events.len() && events[k].0 <= tau && events[k].0 <= c.dep_time {
            delay = events[k].1;
            k += 1;
        }
        let dep = (c.dep_time + delay).max(prev_arr);
        let arr = dep + c.duration();
        out.push((dep, arr));
        prev_arr = arr;
    }
    out
}

/// The timetable as known at one instant.
#[derive(Clone, Debug)]
pub struct DelayedView<'a> {
    tt: &'a Timetable,
    tau: Time,
    times: Vec<(Time, Time)>,
    /// Trips whose times differ from the schedule.
    shifted: Vec<TripId>,
}

/// Overlays the events known at `tau` on the schedule.
pub fn apply_delays<'a>(tt: &'a Timetable, feed: &DelayFeed, tau: Time) -> DelayedView<'a> {
    let mut times: Vec<(Time, Time)> = tt.connections().iter().map(|c| (c.dep_time, c.arr_time)).collect();
    let mut shifted = Vec::new();
    for trip in feed.delayed_trips() {
        if trip.idx() >= tt.trip_count() {
            continue;
        }
        let new = trip_times(tt, trip, feed.trip_events(trip), tau);
        let first = tt.trips()[trip.idx()].first as usize;
        let slot = &mut times[first..first + new.len()];
        if slot != new.as_slice() {
            slot.copy_from_slice(&new);
            shifted.push(trip);
        }
    }
    DelayedView { tt, tau, times, shifted }
}

impl<'a> DelayedView<'a> {
    /// The schedule itself, with no delays.
    pub fn undelayed(tt: &'a Timetable) -> Self {
        apply_delays(tt, &DelayFeed::empty(), 0)
    }

    pub fn timetable(&self) -> &'a Timetable {
        self.tt
    }

    pub fn tau(&self) -> Time {
        self.tau
    }

    pub fn shifted_trips(&self) -> &[TripId] {
        &self.shifted
    }

    /// A connection carrying its current times.
    pub fn connection(&self, id: ConnId) -> Connection {
        let (dep, arr) = self.times[id.idx()];
        self.tt.connections()[id.idx()].with_times(dep, arr)
    }

    pub fn trip_connections(&self, trip: TripId) -> impl Iterator<Item = Connection> + '_ {
        self.tt.trip_connections(trip).iter().map(|c| self.connection(c.id))
    }

    /// Connections in scan order under the current times. The scheduled
    /// order is reused for unshifted trips and merged with the re-sorted
    /// shifted ones.
    pub fn sorted_connections(&self) -> Vec<Connection> {
        sorted_connections_updated(self)
    }
}

impl ConnTimes for DelayedView<'_> {
    #[inline]
    fn times(&self, id: ConnId) -> (Time, Time) {
        self.times[id.idx()]
    }
}

/// Scan-ordered connections under the view's times.
pub fn sorted_connections_updated(view: &DelayedView<'_>) -> Vec<Connection> {
    let tt = view.tt;
    if view.shifted.is_empty() {
        return tt.sorted_connections().to_vec();
    }
    let mut moved_trip = vec![false; tt.trip_count()];
    let mut moved = Vec::new();
    for &t in &view.shifted {
        moved_trip[t.idx()] = true;
        moved.extend(view.trip_connections(t));
    }
    sort_scan_order(&mut moved);

    let mut out = Vec::with_capacity(tt.connection_count());
    let mut m = moved.into_iter().peekable();
    for c in tt.sorted_connections() {
        if moved_trip[c.trip.idx()] {
            continue;
        }
        while let Some(x) = m.next_if(|x| x.key() < c.key()) {
            out.push(x);
        }
        out.push(*c);
    }
    out.extend(m);
    out
}

/// Reference implementation: rebuild and fully sort.
pub fn sorted_connections_naive(view: &DelayedView<'_>) -> Vec<Connection> {
    let mut all: Vec<Connection> = view.tt.connections().iter().map(|c| view.connection(c.id)).collect();
    sort_scan_order(&mut all);
    all
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Period {
    Peak,
    OffPeak,
}

impl Period {
    pub fn as_str(self) -> &'static str {
        match self {
            Period::Peak => "peak",
            Period::OffPeak => "off_peak",
        }
    }
}

/// Peak windows `[start, end)`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeakProfile {
    pub windows: Vec<(Time, Time)>,
}

pub const DEFAULT_PEAK_THRESHOLD: f64 = 1.25;

impl PeakProfile {
    pub fn from_windows(windows: Vec<(Time, Time)>) -> Self {
        PeakProfile { windows }
    }

    /// Hours whose departure count exceeds `threshold` times the mean
    /// hourly count, merged into contiguous windows.
    pub fn from_hourly_counts(counts: &[u64], threshold: f64) -> Self {
        if counts.is_empty() {
            return PeakProfile::default();
        }
        let mean = counts.iter().sum::<u64>() as f64 / counts.len() as f64;
        let mut windows: Vec<(Time, Time)> = Vec::new();
        for (h, &n) in counts.iter().enumerate() {
            if n as f64 > threshold * mean {
                let (start, end) = (h as Time * HOUR, (h as Time + 1) * HOUR);
                match windows.last_mut() {
                    Some(w) if w.1 == start => w.1 = end,
                    _ => windows.push((start, end)),
                }
            }
        }
        PeakProfile { windows }
    }

    /// Hourly departure histogram of the schedule over 24 hours (later
    /// departures fold into the hour of day).
    pub fn from_timetable(tt: &Timetable, threshold: f64) -> Self {
        let mut counts = vec![0u64; 24];
        for c in tt.connections() {
            counts[((c.dep_time / HOUR) % 24) as usize] += 1;
        }
        Self::from_hourly_counts(&counts, threshold)
    }
}

pub fn classify_period(time: Time, profile: &PeakProfile) -> Period {
    if profile.windows.iter().any(|&(a, b)| a <= time && time < b) {
        Period::Peak
    } else {
        Period::OffPeak
    }
}

/// Mean delay in seconds for one mode class.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanDelay {
    pub off_peak: f64,
    pub peak: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DelayParams {
    pub separated: MeanDelay,
    pub semi_separated: MeanDelay,
    pub mixed_traffic: MeanDelay,
    /// Draws below this many seconds are dropped.
    pub min_delay: f64,
    /// Explicit peak windows as `[start_s, end_s)`; derived from the
    /// schedule's departure histogram when absent.
    pub peak_windows: Option<Vec<(Time, Time)>>,
    pub peak_threshold: f64,
}

impl Default for DelayParams {
    fn default() -> Self {
        DelayParams {
            separated: MeanDelay { off_peak: 120.0, peak: 120.0 },
            semi_separated: MeanDelay { off_peak: 180.0, peak: 420.0 },
            mixed_traffic: MeanDelay { off_peak: 300.0, peak: 600.0 },
            min_delay: 30.0,
            peak_windows: None,
            peak_threshold: DEFAULT_PEAK_THRESHOLD,
        }
    }
}

impl DelayParams {
    pub fn mean(&self, mode: Mode, period: Period) -> f64 {
        let m = match mode {
            Mode::Separated => self.separated,
            Mode::SemiSeparated => self.semi_separated,
            Mode::MixedTraffic => self.mixed_traffic,
        };
        match period {
            Period::Peak => m.peak,
            Period::OffPeak => m.off_peak,
        }
    }

    pub fn check(&self) -> Result<()> {
        for (name, m) in [
            ("separated", self.separated),
            ("semi_separated", self.semi_separated),
            ("mixed_traffic", self.mixed_traffic),
        ] {
            if !(m.off_peak > 0.0 && m.peak > 0.0 && m.off_peak.is_finite() && m.peak.is_finite()) {
                return Err(Error::Param(format!("{name}: mean delays must be positive")));
            }
        }
        if self.min_delay.is_nan() || self.min_delay < 0.0 {
            return Err(Error::Param("min_delay must be non-negative".into()));
        }
        Ok(())
    }

    pub fn profile(&self, tt: &Timetable) -> PeakProfile {
        match &self.peak_windows {
            Some(w) => PeakProfile::from_windows(w.clone()),
            None => PeakProfile::from_timetable(tt, self.peak_threshold),
        }
    }
}

/// Exponential delay draws with a floor below which draws are dropped.
#[derive(Clone, Copy, Debug)]
pub struct DelaySampler {
    exp: Exp<f64>,
    min_delay: f64,
}

impl DelaySampler {
    pub fn new(mean: f64, min_delay: f64) -> Result<Self> {
        if !(mean > 0.0 && mean.is_finite()) {
            return Err(Error::Param(format!("mean delay must be positive, got {mean}")));
        }
        let exp = Exp::new(1.0 / mean).map_err(|e| Error::Param(e.to_string()))?;
        Ok(DelaySampler { exp, min_delay })
    }

    /// One raw draw in seconds and the retained delay, if any.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, Option<Duration>) {
        let x = self.exp.sample(rng);
        let kept = (x >= self.min_delay).then(|| x.round() as Duration);
        (x, kept)
    }
}

/// Samples one event per trip: a delay from the exponential distribution
/// for the trip's mode and the period of its first departure, occurring at
/// a uniform instant of its timeframe. Short draws leave the trip on time.
pub fn sample_delays(tt: &Timetable, params: &DelayParams, seed: u64) -> Result<DelayFeed> {
    params.check()?;
    let profile = params.profile(tt);
    let mut samplers = HashMap::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut events = Vec::new();
    for trip in tt.trips() {
        let (first, last) = tt.trip_span(trip.id);
        let period = classify_period(first, &profile);
        let key = (trip.mode, period);
        let sampler = match samplers.get(&key) {
            Some(s) => *s,
            None => {
                let s = DelaySampler::new(params.mean(trip.mode, period), params.min_delay)?;
                samplers.insert(key, s);
                s
            }
        };
        let (_, kept) = sampler.draw(&mut rng);
        let at = rng.random_range(first..=last);
        if let Some(delay) = kept {
            events.push(DelayEvent { trip: trip.id, at, delay });
        }
    }
    DelayFeed::new(tt, events)
}
