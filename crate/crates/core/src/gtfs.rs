//! GTFS import for one service day.
//!
//! Required files: `stops.txt`, `routes.txt`, `trips.txt`, `stop_times.txt`.
//! Optional: `calendar.txt`, `calendar_dates.txt`, `frequencies.txt`,
//! `transfers.txt`. Only stops served by an active trip are kept.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use chrono::{Datelike, NaiveDate, Weekday};
use csv::StringRecord;

use crate::clock::{parse_clock, Duration, Time};
use crate::error::{Error, Result};
use crate::timetable::{validate, Footpath, Mode, StopEvent, StopId, Timetable, TimetableBuilder};

pub const DEFAULT_LOOP_SECONDS: Duration = 120;
pub const DEFAULT_COMPONENT_BOUND: usize = 512;
pub const DEFAULT_WALK_SPEED: f64 = 1.2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ServiceDay {
    /// A calendar date.
    Date(NaiveDate),
    /// The busiest date falling on this weekday.
    Weekday(Weekday),
    /// The busiest Monday-to-Friday date of the feed.
    BusiestWeekday,
}

#[derive(Clone, Debug)]
pub struct GtfsSource {
    pub dir: PathBuf,
    pub service: ServiceDay,
    /// Loop duration for stops without one.
    pub loop_seconds: Duration,
    /// Adds footpaths between stops at most this far apart (metres).
    pub walk_radius_m: Option<f64>,
    /// Walking speed for generated footpaths (m/s).
    pub walk_speed: f64,
    /// Largest footpath component accepted by the closure.
    pub component_bound: usize,
}

impl GtfsSource {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        GtfsSource {
            dir: dir.into(),
            service: ServiceDay::BusiestWeekday,
            loop_seconds: DEFAULT_LOOP_SECONDS,
            walk_radius_m: None,
            walk_speed: DEFAULT_WALK_SPEED,
            component_bound: DEFAULT_COMPONENT_BOUND,
        }
    }
}

/// One parsed CSV file with its header positions.
struct Table {
    file: String,
    columns: HashMap<String, usize>,
    rows: Vec<StringRecord>,
}

impl Table {
    fn read(dir: &Path, name: &str, required: bool) -> Result<Option<Table>> {
        let path = dir.join(name);
        if !path.is_file() {
            return if required { Err(Error::MissingFile { file: name.to_string() }) } else { Ok(None) };
        }
        let mut reader = csv::ReaderBuilder::new()
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(BufReader::new(File::open(&path)?));
        let headers = reader.headers().map_err(|e| Error::parse(name, 1, e.to_string()))?;
        let columns =
            headers.iter().enumerate().map(|(i, h)| (h.trim_start_matches('\u{feff}').to_string(), i)).collect();
        let mut rows = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            rows.push(rec.map_err(|e| Error::parse(name, i as u64 + 2, e.to_string()))?);
        }
        Ok(Some(Table { file: name.to_string(), columns, rows }))
    }

    fn col(&self, name: &str) -> Result<usize> {
        self.columns
            .get(name)
            .copied()
            .ok_or_else(|| Error::MissingColumn { file: self.file.clone(), column: name.to_string() })
    }

    fn opt_col(&self, name: &str) -> Option<usize> {
        self.columns.get(name).copied()
    }

    /// Iterates `(row number, record)`, row numbers counting the header as 1.
    fn iter(&self) -> impl Iterator<Item = (u64, &StringRecord)> {
        self.rows.iter().enumerate().map(|(i, r)| (i as u64 + 2, r))
    }

    fn err(&self, row: u64, msg: impl Into<String>) -> Error {
        Error::parse(&self.file, row, msg)
    }
}

fn field(rec: &StringRecord, col: usize) -> &str {
    rec.get(col).unwrap_or("")
}

fn opt_field(rec: &StringRecord, col: Option<usize>) -> &str {
    col.map_or("", |c| field(rec, c))
}

fn parse_date(t: &Table, row: u64, s: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s, "%Y%m%d").map_err(|_| t.err(row, format!("bad date `{s}`")))
}

struct Calendar {
    weekly: HashMap<String, ([bool; 7], NaiveDate, NaiveDate)>,
    exceptions: HashMap<(String, NaiveDate), bool>,
}

impl Calendar {
    fn read(dir: &Path) -> Result<Option<Calendar>> {
        let cal = Table::read(dir, "calendar.txt", false)?;
        let dates = Table::read(dir, "calendar_dates.txt", false)?;
        if cal.is_none() && dates.is_none() {
            return Ok(None);
        }
        let mut weekly = HashMap::new();
        if let Some(t) = &cal {
            let days = ["monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday"];
            let cols: Vec<usize> = days.iter().map(|d| t.col(d)).collect::<Result<_>>()?;
            let (c_id, c_start, c_end) = (t.col("service_id")?, t.col("start_date")?, t.col("end_date")?);
            for (row, rec) in t.iter() {
                let mut flags = [false; 7];
                for (k, &c) in cols.iter().enumerate() {
                    flags[k] = match field(rec, c) {
                        "1" => true,
                        "0" | "" => false,
                        other => return Err(t.err(row, format!("bad {} flag `{other}`", days[k]))),
                    };
                }
                let start = parse_date(t, row, field(rec, c_start))?;
                let end = parse_date(t, row, field(rec, c_end))?;
                weekly.insert(field(rec, c_id).to_string(), (flags, start, end));
            }
        }
        let mut exceptions = HashMap::new();
        if let Some(t) = &dates {
            let (c_id, c_date, c_type) = (t.col("service_id")?, t.col("date")?, t.col("exception_type")?);
            for (row, rec) in t.iter() {
                let date = parse_date(t, row, field(rec, c_date))?;
                let added = match field(rec, c_type) {
                    "1" => true,
                    "2" => false,
                    other => return Err(t.err(row, format!("bad exception_type `{other}`"))),
                };
                exceptions.insert((field(rec, c_id).to_string(), date), added);
            }
        }
        Ok(Some(Calendar { weekly, exceptions }))
    }

    fn active(&self, service: &str, date: NaiveDate) -> bool {
        if let Some(&added) = self.exceptions.get(&(service.to_string(), date)) {
            return added;
        }
        match self.weekly.get(service) {
            Some((flags, start, end)) => {
                *start <= date && date <= *end && flags[date.weekday().num_days_from_monday() as usize]
            }
            None => false,
        }
    }

    /// Every date mentioned by the calendar, in order.
    fn dates(&self) -> Vec<NaiveDate> {
        let mut dates: Vec<NaiveDate> = self.exceptions.keys().map(|(_, d)| *d).collect();
        for (_, start, end) in self.weekly.values() {
            dates.extend(start.iter_days().take_while(|d| d <= end));
        }
        dates.sort_unstable();
        dates.dedup();
        dates
    }

    /// The date with the most active trips among those accepted by `keep`;
    /// ties go to the earliest date.
    fn busiest(&self, trip_services: &[&str], keep: impl Fn(NaiveDate) -> bool) -> Option<NaiveDate> {
        let mut per_service: HashMap<&str, usize> = HashMap::new();
        for s in trip_services {
            *per_service.entry(s).or_default() += 1;
        }
        let mut best: Option<(usize, NaiveDate)> = None;
        for date in self.dates().into_iter().filter(|d| keep(*d)) {
            let n: usize = per_service.iter().filter(|(s, _)| self.active(s, date)).map(|(_, n)| n).sum();
            if best.is_none_or(|(m, _)| n > m) {
                best = Some((n, date));
            }
        }
        best.map(|(_, d)| d)
    }
}

struct RawStopTime {
    seq: u32,
    stop: String,
    arr: Option<Time>,
    dep: Option<Time>,
}

fn parse_time(t: &Table, row: u64, s: &str) -> Result<Option<Time>> {
    if s.is_empty() {
        return Ok(None);
    }
    parse_clock(s).map(Some).ok_or_else(|| t.err(row, format!("unparseable time `{s}`")))
}

/// Fills missing times by linear interpolation between timed stops and
/// returns `(stop, arr, dep)` with strictly positive ride times.
fn timed_events(trip: &str, mut rows: Vec<RawStopTime>) -> Result<Vec<(String, Time, Time)>> {
    rows.sort_by_key(|r| r.seq);
    let anchor = |r: &RawStopTime| r.arr.or(r.dep);
    let n = rows.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    if anchor(&rows[0]).is_none() || anchor(&rows[n - 1]).is_none() {
        return Err(Error::parse("stop_times.txt", 0, format!("trip {trip}: first and last stop need times")));
    }
    let mut out: Vec<(String, Time, Time)> = Vec::with_capacity(n);
    let mut i = 0;
    while i < n {
        let (a, d) = (rows[i].arr.or(rows[i].dep), rows[i].dep.or(rows[i].arr));
        if let (Some(a), Some(d)) = (a, d) {
            out.push((rows[i].stop.clone(), a, d.max(a)));
            i += 1;
            continue;
        }
        // rows[i..j] untimed, rows[j] timed.
        let j = (i..n).find(|&k| anchor(&rows[k]).is_some()).expect("last row is timed");
        let from = out.last().map(|e| e.2).expect("first row is timed");
        let to = anchor(&rows[j]).expect("timed");
        let span = to.saturating_sub(from) as u64;
        for (k, row) in rows.iter().enumerate().take(j).skip(i) {
            let t = from + (span * (k - i + 1) as u64 / (j - i + 1) as u64) as Time;
            out.push((row.stop.clone(), t, t));
        }
        i = j;
    }
    // Merge immediate repeats of a stop, then force positive ride times.
    let mut merged: Vec<(String, Time, Time)> = Vec::with_capacity(out.len());
    for e in out {
        match merged.last_mut() {
            Some(last) if last.0 == e.0 => last.2 = last.2.max(e.2),
            _ => merged.push(e),
        }
    }
    for k in 1..merged.len() {
        let prev_dep = merged[k - 1].2;
        let e = &mut merged[k];
        if e.1 <= prev_dep {
            e.1 = prev_dep + 1;
        }
        if e.2 < e.1 {
            e.2 = e.1;
        }
    }
    Ok(merged)
}

/// Great-circle distance in metres.
pub fn haversine_m(a: (f64, f64), b: (f64, f64)) -> f64 {
    const R: f64 = 6_371_000.0;
    let (la1, la2) = (a.0.to_radians(), b.0.to_radians());
    let dla = la2 - la1;
    let dlo = (b.1 - a.1).to_radians();
    let h = (dla / 2.0).sin().powi(2) + la1.cos() * la2.cos() * (dlo / 2.0).sin().powi(2);
    2.0 * R * h.sqrt().asin()
}

/// Symmetric footpaths between all stop pairs within `radius` metres.
pub fn proximity_footpaths(coords: &[Option<(f64, f64)>], radius: f64, speed: f64) -> Vec<Footpath> {
    let max_lat = coords.iter().flatten().map(|c| c.0.abs()).fold(0.0, f64::max).min(89.0);
    let cell_lat = radius / 111_320.0;
    let cell_lon = radius / (111_320.0 * max_lat.to_radians().cos());
    let key = |c: (f64, f64)| ((c.0 / cell_lat).floor() as i64, (c.1 / cell_lon).floor() as i64);
    let mut grid: BTreeMap<(i64, i64), Vec<usize>> = BTreeMap::new();
    for (i, c) in coords.iter().enumerate() {
        if let Some(c) = c {
            grid.entry(key(*c)).or_default().push(i);
        }
    }
    let mut out = Vec::new();
    for (i, c) in coords.iter().enumerate() {
        let Some(c) = *c else { continue };
        let (gy, gx) = key(c);
        for dy in -1..=1 {
            for dx in -1..=1 {
                for &j in grid.get(&(gy + dy, gx + dx)).map_or(&[][..], Vec::as_slice) {
                    if j == i {
                        continue;
                    }
                    let d = haversine_m(c, coords[j].expect("gridded"));
                    if d <= radius {
                        out.push(Footpath {
                            from: StopId(i as u32),
                            to: StopId(j as u32),
                            duration: (d / speed).ceil() as Duration,
                        });
                    }
                }
            }
        }
    }
    out
}

/// Shortest-path closure of the non-loop footpaths inside each weakly
/// connected component. Loops pass through unchanged.
pub fn close_footpaths(footpaths: &[Footpath], stop_count: usize, bound: usize) -> Result<Vec<Footpath>> {
    let mut parent: Vec<usize> = (0..stop_count).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut adj: Vec<Vec<(usize, Duration)>> = vec![Vec::new(); stop_count];
    let mut touched = vec![false; stop_count];
    let mut out: Vec<Footpath> = Vec::new();
    for f in footpaths {
        for s in [f.from, f.to] {
            if s.idx() >= stop_count {
                return Err(Error::UnknownStop(s.0));
            }
        }
        if f.from == f.to {
            out.push(*f);
            continue;
        }
        adj[f.from.idx()].push((f.to.idx(), f.duration));
        touched[f.from.idx()] = true;
        touched[f.to.idx()] = true;
        let (a, b) = (find(&mut parent, f.from.idx()), find(&mut parent, f.to.idx()));
        if a != b {
            parent[a] = b;
        }
    }
    let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for s in (0..stop_count).filter(|&s| touched[s]) {
        let root = find(&mut parent, s);
        members.entry(root).or_default().push(s);
    }
    let mut dist: Vec<Duration> = vec![Duration::MAX; stop_count];
    for comp in members.values() {
        if comp.len() > bound {
            return Err(Error::FootpathComponentTooLarge { size: comp.len(), bound });
        }
        for &src in comp {
            let mut heap = std::collections::BinaryHeap::new();
            dist[src] = 0;
            heap.push(std::cmp::Reverse((0, src)));
            while let Some(std::cmp::Reverse((d, s))) = heap.pop() {
                if d > dist[s] {
                    continue;
                }
                for &(t, w) in &adj[s] {
                    let nd = d + w;
                    if nd < dist[t] {
                        dist[t] = nd;
                        heap.push(std::cmp::Reverse((nd, t)));
                    }
                }
            }
            for &t in comp {
                if t != src && dist[t] != Duration::MAX {
                    out.push(Footpath { from: StopId(src as u32), to: StopId(t as u32), duration: dist[t] });
                }
            }
            for &t in comp {
                dist[t] = Duration::MAX;
            }
        }
    }
    out.sort_unstable();
    out.dedup_by(|b, a| a.from == b.from && a.to == b.to);
    Ok(out)
}

/// Gives every stop without a loop footpath one of `default` seconds.
pub fn add_loop_footpaths(footpaths: &[Footpath], stop_count: usize, default: Duration) -> Vec<Footpath> {
    let mut has = vec![false; stop_count];
    for f in footpaths {
        if f.from == f.to && f.from.idx() < stop_count {
            has[f.from.idx()] = true;
        }
    }
    let mut out = footpaths.to_vec();
    out.extend((0..stop_count).filter(|&s| !has[s]).map(|s| Footpath {
        from: StopId(s as u32),
        to: StopId(s as u32),
        duration: default,
    }));
    out.sort_unstable();
    out
}

/// Loads the source into a validated timetable.
pub fn load(src: &GtfsSource) -> Result<Timetable> {
    let dir = src.dir.as_path();
    let stops = Table::read(dir, "stops.txt", true)?.expect("required");
    let routes = Table::read(dir, "routes.txt", true)?.expect("required");
    let trips = Table::read(dir, "trips.txt", true)?.expect("required");
    let stop_times = Table::read(dir, "stop_times.txt", true)?.expect("required");

    let mut route_mode: HashMap<String, Mode> = HashMap::new();
    {
        let (c_id, c_type) = (routes.col("route_id")?, routes.col("route_type")?);
        for (row, rec) in routes.iter() {
            let ty: u32 = field(rec, c_type)
                .parse()
                .map_err(|_| routes.err(row, format!("bad route_type `{}`", field(rec, c_type))))?;
            route_mode.insert(field(rec, c_id).to_string(), Mode::from_route_type(ty));
        }
    }

    // Active trips.
    let (c_route, c_service, c_trip) = (trips.col("route_id")?, trips.col("service_id")?, trips.col("trip_id")?);
    let services: Vec<&str> = trips.rows.iter().map(|r| field(r, c_service)).collect();
    let calendar = Calendar::read(dir)?;
    let day = match (&calendar, src.service) {
        (None, _) => None,
        (Some(_), ServiceDay::Date(d)) => Some(d),
        (Some(cal), ServiceDay::Weekday(w)) => cal.busiest(&services, |d| d.weekday() == w),
        (Some(cal), ServiceDay::BusiestWeekday) => cal.busiest(&services, |d| d.weekday().num_days_from_monday() < 5),
    };
    let mut trip_mode: BTreeMap<String, Mode> = BTreeMap::new();
    for (row, rec) in trips.iter() {
        let active = match (&calendar, day) {
            (None, _) => true,
            (Some(cal), Some(d)) => cal.active(field(rec, c_service), d),
            (Some(_), None) => false,
        };
        if active {
            let mode = *route_mode
                .get(field(rec, c_route))
                .ok_or_else(|| trips.err(row, format!("unknown route `{}`", field(rec, c_route))))?;
            trip_mode.insert(field(rec, c_trip).to_string(), mode);
        }
    }

    // Stop times of active trips.
    let c_st_trip = stop_times.col("trip_id")?;
    let c_arr = stop_times.col("arrival_time")?;
    let c_dep = stop_times.col("departure_time")?;
    let c_stop = stop_times.col("stop_id")?;
    let c_seq = stop_times.col("stop_sequence")?;
    let mut raw: BTreeMap<&str, Vec<RawStopTime>> = BTreeMap::new();
    for (row, rec) in stop_times.iter() {
        let trip = field(rec, c_st_trip);
        if !trip_mode.contains_key(trip) {
            continue;
        }
        let seq = field(rec, c_seq)
            .parse()
            .map_err(|_| stop_times.err(row, format!("bad stop_sequence `{}`", field(rec, c_seq))))?;
        raw.entry(trip).or_default().push(RawStopTime {
            seq,
            stop: field(rec, c_stop).to_string(),
            arr: parse_time(&stop_times, row, field(rec, c_arr))?,
            dep: parse_time(&stop_times, row, field(rec, c_dep))?,
        });
    }
    let mut events: BTreeMap<String, Vec<(String, Time, Time)>> = BTreeMap::new();
    for (trip, rows) in raw {
        let ev = timed_events(trip, rows)?;
        if ev.len() >= 2 {
            events.insert(trip.to_string(), ev);
        }
    }

    // Frequency-based trips become explicit copies `trip#k`.
    if let Some(freq) = Table::read(dir, "frequencies.txt", false)? {
        let (c_trip, c_start, c_end, c_head) =
            (freq.col("trip_id")?, freq.col("start_time")?, freq.col("end_time")?, freq.col("headway_secs")?);
        let mut windows: BTreeMap<String, Vec<(Time, Time, Time)>> = BTreeMap::new();
        for (row, rec) in freq.iter() {
            let start =
                parse_time(&freq, row, field(rec, c_start))?.ok_or_else(|| freq.err(row, "missing start_time"))?;
            let end = parse_time(&freq, row, field(rec, c_end))?.ok_or_else(|| freq.err(row, "missing end_time"))?;
            let head: Time = field(rec, c_head)
                .parse()
                .ok()
                .filter(|&h| h > 0)
                .ok_or_else(|| freq.err(row, format!("bad headway_secs `{}`", field(rec, c_head))))?;
            windows.entry(field(rec, c_trip).to_string()).or_default().push((start, end, head));
        }
        for (trip, list) in windows {
            let Some(template) = events.remove(&trip) else { continue };
            let mode = trip_mode[&trip];
            let base = template[0].2;
            let mut k = 0;
            for (start, end, head) in list {
                let mut t = start;
                while t < end {
                    let copy = template
                        .iter()
                        .map(|(s, a, d)| (s.clone(), (a + t).saturating_sub(base), d + t - base))
                        .collect();
                    let name = format!("{trip}#{k}");
                    trip_mode.insert(name.clone(), mode);
                    events.insert(name, copy);
                    k += 1;
                    t += head;
                }
            }
        }
    }

    // Served stops in stops.txt order.
    let served: HashSet<&str> = events.values().flatten().map(|e| e.0.as_str()).collect();
    let c_stop_id = stops.col("stop_id")?;
    let (c_lat, c_lon) = (stops.opt_col("stop_lat"), stops.opt_col("stop_lon"));
    let mut b = TimetableBuilder::new();
    let mut stop_ids: HashMap<String, StopId> = HashMap::new();
    let mut coords = Vec::new();
    for (row, rec) in stops.iter() {
        let id = field(rec, c_stop_id);
        if !served.contains(id) || stop_ids.contains_key(id) {
            continue;
        }
        let coord = match (opt_field(rec, c_lat), opt_field(rec, c_lon)) {
            ("", _) | (_, "") => None,
            (la, lo) => Some((
                la.parse().map_err(|_| stops.err(row, format!("bad stop_lat `{la}`")))?,
                lo.parse().map_err(|_| stops.err(row, format!("bad stop_lon `{lo}`")))?,
            )),
        };
        stop_ids.insert(id.to_string(), b.add_stop(id, coord));
        coords.push(coord);
    }
    for (trip, ev) in &events {
        let visits: Vec<StopEvent> = ev
            .iter()
            .map(|(s, arr, dep)| {
                let stop = *stop_ids
                    .get(s)
                    .ok_or_else(|| Error::parse("stop_times.txt", 0, format!("trip {trip}: unknown stop `{s}`")))?;
                Ok(StopEvent { stop, arr: *arr, dep: *dep })
            })
            .collect::<Result<_>>()?;
        b.add_trip(trip.clone(), trip_mode[trip], &visits);
    }

    // Footpaths: transfers.txt, optional proximity links, closure, loops.
    let n = b.stop_count();
    let mut footpaths = Vec::new();
    let mut loops: HashMap<StopId, Duration> = HashMap::new();
    if let Some(tr) = Table::read(dir, "transfers.txt", false)? {
        let (c_from, c_to) = (tr.col("from_stop_id")?, tr.col("to_stop_id")?);
        let (c_type, c_min) = (tr.opt_col("transfer_type"), tr.opt_col("min_transfer_time"));
        for (row, rec) in tr.iter() {
            let ty = match opt_field(rec, c_type) {
                "" => 0,
                s => s.parse::<u32>().map_err(|_| tr.err(row, format!("bad transfer_type `{s}`")))?,
            };
            if ty > 2 {
                continue;
            }
            let min: Duration = match opt_field(rec, c_min) {
                "" => 0,
                s => s.parse().map_err(|_| tr.err(row, format!("bad min_transfer_time `{s}`")))?,
            };
            let (Some(&from), Some(&to)) = (stop_ids.get(field(rec, c_from)), stop_ids.get(field(rec, c_to))) else {
                continue;
            };
            if from == to {
                let d = loops.entry(from).or_insert(src.loop_seconds);
                *d = (*d).max(min);
            } else {
                footpaths.push(Footpath { from, to, duration: min });
            }
        }
    }
    if let Some(radius) = src.walk_radius_m {
        footpaths.extend(proximity_footpaths(&coords, radius, src.walk_speed));
    }
    let mut closed = close_footpaths(&footpaths, n, src.component_bound)?;
    closed.extend(loops.into_iter().map(|(s, d)| Footpath { from: s, to: s, duration: d }));
    for f in add_loop_footpaths(&closed, n, src.loop_seconds) {
        b.add_footpath(f.from, f.to, f.duration);
    }

    let tt = b.build();
    validate(&tt).into_result()?;
    Ok(tt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn fp(a: u32, b: u32, d: Duration) -> Footpath {
        Footpath { from: StopId(a), to: StopId(b), duration: d }
    }

    #[test]
    fn closure_examples() {
        let closed = close_footpaths(&[fp(0, 1, 60), fp(1, 2, 60)], 3, 512).unwrap();
        assert_eq!(closed, vec![fp(0, 1, 60), fp(0, 2, 120), fp(1, 2, 60)]);
        assert_eq!(close_footpaths(&closed, 3, 512).unwrap(), closed);
        let lowered = close_footpaths(&[fp(0, 1, 60), fp(1, 2, 60), fp(0, 2, 300)], 3, 512).unwrap();
        assert!(lowered.contains(&fp(0, 2, 120)));
        let sym = close_footpaths(&[fp(0, 1, 60), fp(1, 0, 60), fp(1, 2, 60), fp(2, 1, 60)], 3, 512).unwrap();
        assert!(sym.contains(&fp(2, 0, 120)));
        assert!(matches!(
            close_footpaths(&[fp(0, 1, 1), fp(1, 2, 1)], 3, 2),
            Err(Error::FootpathComponentTooLarge { size: 3, bound: 2 })
        ));
    }

    #[test]
    fn loop_examples() {
        let out = add_loop_footpaths(&[fp(1, 1, 180)], 2, 120);
        assert_eq!(out, vec![fp(0, 0, 120), fp(1, 1, 180)]);
        assert_eq!(out.iter().filter(|f| f.from == f.to).count(), 2);
    }

    fn write_feed(dir: &Path, stop_times: &str) {
        fs::write(
            dir.join("stops.txt"),
            "stop_id,stop_name,stop_lat,stop_lon\na,A,0,0\nb,B,0,0.001\nc,C,0,0.002\nd,D,0,0.003\ne,E,0,0.004\n",
        )
        .unwrap();
        fs::write(dir.join("routes.txt"), "route_id,route_type\nr,3\nm,1\n").unwrap();
        fs::write(dir.join("trips.txt"), "route_id,service_id,trip_id\nr,wk,two\nm,wk,five\nr,we,sat\n").unwrap();
        fs::write(dir.join("calendar.txt"), "service_id,monday,tuesday,wednesday,thursday,friday,saturday,sunday,start_date,end_date\nwk,1,1,1,1,1,0,0,20240101,20240131\nwe,0,0,0,0,0,1,1,20240101,20240131\n").unwrap();
        fs::write(dir.join("stop_times.txt"), stop_times).unwrap();
    }

    const STOP_TIMES: &str = "trip_id,arrival_time,departure_time,stop_id,stop_sequence\n\
        two,08:00:00,08:00:00,a,1\ntwo,08:05:00,08:05:00,b,2\n\
        five,09:00:00,09:00:00,a,1\nfive,09:02:00,09:03:00,b,2\nfive,,,c,3\nfive,09:10:00,09:10:00,d,4\nfive,09:20:00,09:20:00,e,5\n\
        sat,10:00:00,10:00:00,a,1\nsat,10:05:00,10:05:00,e,2\n";

    #[test]
    fn loads_weekday_trips() {
        let dir = tempfile::tempdir().unwrap();
        write_feed(dir.path(), STOP_TIMES);
        let tt = load(&GtfsSource::new(dir.path())).unwrap();
        assert_eq!(tt.trip_count(), 2);
        assert_eq!(tt.connection_count(), 5);
        let two = tt.trip_by_name("two").unwrap();
        assert_eq!(tt.trip_connections(two).len(), 1);
        let five = tt.trip_by_name("five").unwrap();
        let conns = tt.trip_connections(five);
        assert_eq!(conns.len(), 4);
        assert!(conns.iter().all(|c| c.trip == five));
        // Dwell at b; c interpolated halfway between 09:03 and 09:10.
        assert_eq!(conns[1].dep_time, parse_clock("09:03").unwrap());
        assert_eq!(conns[1].arr_time, parse_clock("09:06:30").unwrap());
        assert_eq!(tt.trips()[five.idx()].mode, Mode::Separated);
        assert_eq!(tt.footpaths().loop_duration(StopId(0)), Some(DEFAULT_LOOP_SECONDS));

        let sat = GtfsSource { service: ServiceDay::Weekday(Weekday::Sat), ..GtfsSource::new(dir.path()) };
        assert_eq!(load(&sat).unwrap().trip_count(), 1);
    }

    #[test]
    fn proximity_and_transfers() {
        let dir = tempfile::tempdir().unwrap();
        write_feed(dir.path(), STOP_TIMES);
        fs::write(
            dir.path().join("transfers.txt"),
            "from_stop_id,to_stop_id,transfer_type,min_transfer_time\nb,b,2,300\na,e,2,600\n",
        )
        .unwrap();
        let src = GtfsSource { walk_radius_m: Some(150.0), ..GtfsSource::new(dir.path()) };
        let tt = load(&src).unwrap();
        let id = |n: &str| tt.stop_by_name(n).unwrap();
        use crate::timetable::WalkGraph;
        assert_eq!(tt.footpaths().loop_duration(id("b")), Some(300));
        // About 111 m apart at the equator: 93 s at 1.2 m/s.
        assert_eq!(tt.footpaths().walk_duration(id("a"), id("b")), Some(93));
        assert_eq!(tt.footpaths().walk_duration(id("a"), id("c")), Some(186));
        assert_eq!(tt.footpaths().walk_duration(id("a"), id("e")), Some(372));
    }

    #[test]
    fn errors_name_file_column_and_row() {
        let dir = tempfile::tempdir().unwrap();
        write_feed(dir.path(), STOP_TIMES);
        fs::remove_file(dir.path().join("stop_times.txt")).unwrap();
        let err = load(&GtfsSource::new(dir.path())).unwrap_err();
        assert!(matches!(&err, Error::MissingFile { file } if file == "stop_times.txt"));

        write_feed(dir.path(), "trip_id,arrival_time,stop_id,stop_sequence\ntwo,08:00:00,a,1\n");
        let err = load(&GtfsSource::new(dir.path())).unwrap_err();
        assert!(matches!(&err, Error::MissingColumn { column, .. } if column == "departure_time"));

        write_feed(
            dir.path(),
            "trip_id,arrival_time,departure_time,stop_id,stop_sequence\ntwo,08:00:00,08:00:00,a,1\ntwo,8h05,8h05,b,2\n",
        );
        let err = load(&GtfsSource::new(dir.path())).unwrap_err();
        assert!(matches!(&err, Error::Parse { row: 3, .. }), "{err}");
    }

    #[test]
    fn frequencies_expand() {
        let dir = tempfile::tempdir().unwrap();
        write_feed(dir.path(), STOP_TIMES);
        fs::write(
            dir.path().join("frequencies.txt"),
            "trip_id,start_time,end_time,headway_secs\ntwo,07:00:00,08:00:00,1200\n",
        )
        .unwrap();
        let tt = load(&GtfsSource::new(dir.path())).unwrap();
        assert!(tt.trip_by_name("two").is_none());
        for (k, start) in ["07:00", "07:20", "07:40"].iter().enumerate() {
            let t = tt.trip_by_name(&format!("two#{k}")).unwrap();
            assert_eq!(tt.trip_span(t).0, parse_clock(start).unwrap());
        }
    }

    #[test]
    fn equal_times_get_positive_rides() {
        let ev = timed_events(
            "t",
            vec![
                RawStopTime { seq: 1, stop: "a".into(), arr: Some(100), dep: Some(100) },
                RawStopTime { seq: 2, stop: "b".into(), arr: Some(100), dep: Some(100) },
                RawStopTime { seq: 3, stop: "c".into(), arr: Some(160), dep: Some(160) },
            ],
        )
        .unwrap();
        assert_eq!(ev.iter().map(|e| (e.1, e.2)).collect::<Vec<_>>(), vec![(100, 100), (101, 101), (160, 160)]);
    }
}
