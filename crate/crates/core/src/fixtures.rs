//! The eight-stop toy network used throughout the tests and examples.
//!
//! Three 08:00 trips:
//! - `t1` (route r1): s1 -> s3 -> s5 -> s7 -> s6, 10 minutes per hop;
//! - `t2` (route r2): s2 -> s3 -> s4 -> s6, 5 minutes per hop;
//! - `t3` (route r3): s8 -> s5 -> s4 -> s6, 15, 5 and 5 minutes.
//!
//! Changing vehicles at s3 takes 5 minutes; every other stop has a zero
//! loop and there are no walking links between stops.

use crate::clock::{hm, MINUTE};
use crate::timetable::{Mode, StopEvent, Timetable, TimetableBuilder};

pub const TOY_STOPS: [&str; 8] = ["s1", "s2", "s3", "s4", "s5", "s6", "s7", "s8"];

pub fn toy_network() -> Timetable {
    let mut b = TimetableBuilder::new();
    let s: Vec<_> = TOY_STOPS.iter().map(|n| b.add_stop(*n, None)).collect();
    let trip = |b: &mut TimetableBuilder, name: &str, visits: &[(usize, u32)]| {
        let events: Vec<StopEvent> =
            visits.iter().map(|&(stop, t)| StopEvent { stop: s[stop - 1], arr: t, dep: t }).collect();
        b.add_trip(name, Mode::MixedTraffic, &events);
    };
    trip(&mut b, "t1", &[(1, hm(8, 0)), (3, hm(8, 10)), (5, hm(8, 20)), (7, hm(8, 30)), (6, hm(8, 40))]);
    trip(&mut b, "t2", &[(2, hm(8, 0)), (3, hm(8, 5)), (4, hm(8, 10)), (6, hm(8, 15))]);
    trip(&mut b, "t3", &[(8, hm(8, 0)), (5, hm(8, 15)), (4, hm(8, 20)), (6, hm(8, 25))]);
    for (i, &stop) in s.iter().enumerate() {
        let transfer = if i == 2 { 5 * MINUTE } else { 0 };
        b.add_footpath(stop, stop, transfer);
    }
    b.build()
}
