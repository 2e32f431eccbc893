use std::path::PathBuf;

use replan_core::fixtures::toy_network;
use replan_core::gtfs::{load, GtfsSource};
use replan_core::timetable::{validate, Mode};

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

#[test]
fn toy_feed_matches_fixture() {
    let src = GtfsSource { loop_seconds: 0, ..GtfsSource::new(data("toy")) };
    let tt = load(&src).unwrap();
    let toy = toy_network();
    assert_eq!(tt.stop_count(), toy.stop_count());
    assert_eq!(tt.trip_count(), 3);
    assert_eq!(tt.connection_count(), 10);
    let conns = |t: &replan_core::timetable::Timetable| {
        t.sorted_connections()
            .iter()
            .map(|c| {
                (
                    t.stop_name(c.dep_stop).to_string(),
                    t.stop_name(c.arr_stop).to_string(),
                    c.dep_time,
                    c.arr_time,
                    t.trip_name(c.trip).to_string(),
                )
            })
            .collect::<Vec<_>>()
    };
    assert_eq!(conns(&tt), conns(&toy));
    let paths = |t: &replan_core::timetable::Timetable| {
        t.footpaths()
            .iter()
            .map(|f| (t.stop_name(f.from).to_string(), t.stop_name(f.to).to_string(), f.duration))
            .collect::<Vec<_>>()
    };
    assert_eq!(paths(&tt), paths(&toy));
    assert!(tt.trips().iter().all(|t| t.mode == Mode::MixedTraffic));
}

#[test]
fn shipped_toy_cache_is_current() {
    let (tt, fp) = replan_core::cache::read_timetable(&data("toy.cache")).unwrap();
    let toy = toy_network();
    assert_eq!(tt.sorted_connections(), toy.sorted_connections());
    assert_eq!(tt.footpaths(), toy.footpaths());
    let src = GtfsSource { loop_seconds: 0, ..GtfsSource::new(data("toy")) };
    let fresh = load(&src).unwrap();
    assert_eq!(fp, replan_core::cache::Fingerprint::of_timetable(&fresh).unwrap());
}

#[test]
fn cairns_feed_loads() {
    let src = GtfsSource { walk_radius_m: Some(250.0), ..GtfsSource::new(data("gtfs/cairns")) };
    let tt = load(&src).unwrap();
    assert!(validate(&tt).is_valid());
    assert!(tt.trip_count() > 200, "{} trips", tt.trip_count());
    assert!(tt.connection_count() > 5000);
    assert!(tt.footpaths().len() > tt.stop_count());
}
