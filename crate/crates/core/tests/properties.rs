use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use replan_core::csa::{CsaSolver, Query};
use replan_core::delay::{
    apply_delays, sample_delays, sorted_connections_naive, sorted_connections_updated, DelayParams,
};
use replan_core::envelope::build_envelope;
use replan_core::synthetic::{random_feed, random_timetable, InstanceShape};
use replan_core::tig::build_tig;
use replan_core::timetable::{group_routes, sort_scan_order, validate, StopId, Timetable};
use replan_core::{Time, INFINITY};

fn instance(seed: u64, shape: &InstanceShape) -> (Timetable, ChaCha8Rng) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tt = random_timetable(&mut rng, shape);
    (tt, rng)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scan_order_ignores_input_order(seed in any::<u64>()) {
        let (tt, mut rng) = instance(seed, &InstanceShape::small());
        let mut conns = tt.connections().to_vec();
        conns.shuffle(&mut rng);
        sort_scan_order(&mut conns);
        prop_assert_eq!(&conns[..], tt.sorted_connections());
        prop_assert!(conns.windows(2).all(|w| w[0].key() < w[1].key()));
    }

    #[test]
    fn route_grouping_ignores_trip_order(seed in any::<u64>()) {
        let (tt, mut rng) = instance(seed, &InstanceShape::small());
        let seqs: Vec<Vec<StopId>> = (0..tt.trip_count()).map(|t| tt.trip_stops(replan_core::timetable::TripId(t as u32))).collect();
        let ids = group_routes(&seqs);
        let mut order: Vec<usize> = (0..seqs.len()).collect();
        order.shuffle(&mut rng);
        let shuffled: Vec<Vec<StopId>> = order.iter().map(|&i| seqs[i].clone()).collect();
        let ids2 = group_routes(&shuffled);
        for (k, &i) in order.iter().enumerate() {
            prop_assert_eq!(ids2[k], ids[i]);
        }
        for a in 0..seqs.len() {
            for b in 0..seqs.len() {
                prop_assert_eq!(ids[a] == ids[b], seqs[a] == seqs[b]);
            }
        }
    }

    #[test]
    fn knowledge_only_grows(seed in any::<u64>(), a in 0u32..86_400, b in 0u32..86_400) {
        let (tt, mut rng) = instance(seed, &InstanceShape::small());
        let feed = random_feed(&mut rng, &tt, 30, 15).unwrap();
        let (lo, hi) = (a.min(b) + 6 * 3600, a.max(b) + 6 * 3600);
        let (early, late) = (feed.known_at(lo), feed.known_at(hi));
        prop_assert!(early.len() <= late.len());
        prop_assert_eq!(early, &late[..early.len()]);
        prop_assert!(early.iter().all(|e| e.at <= lo));
        prop_assert!(late[early.len()..].iter().all(|e| e.at > lo));
    }

    #[test]
    fn snapshots_are_consistent(seed in any::<u64>(), tau in 6u32 * 3600..12 * 3600) {
        let (tt, mut rng) = instance(seed, &InstanceShape::small());
        let feed = random_feed(&mut rng, &tt, 30, 15).unwrap();
        let view = apply_delays(&tt, &feed, tau);
        for c in tt.connections() {
            let now = view.connection(c.id);
            prop_assert!(now.dep_time >= c.dep_time);
            prop_assert_eq!(now.duration(), c.duration());
        }
        for trip in 0..tt.trip_count() {
            let list: Vec<_> = view.trip_connections(replan_core::timetable::TripId(trip as u32)).collect();
            prop_assert!(list.windows(2).all(|w| w[0].arr_time <= w[1].dep_time));
        }
        prop_assert_eq!(sorted_connections_updated(&view), sorted_connections_naive(&view));
        // Only events known at tau matter.
        let prefix = feed.prefix(&tt, tau).unwrap();
        let again = apply_delays(&tt, &prefix, INFINITY);
        for c in tt.connections() {
            if c.dep_time <= tau {
                continue;
            }
            prop_assert_eq!(view.connection(c.id), again.connection(c.id));
        }
    }

    #[test]
    fn later_departure_never_arrives_earlier(seed in any::<u64>(), o in 0u32..25, d in 0u32..25, t in 0u32..180, dt in 0u32..60) {
        let (tt, _) = instance(seed, &InstanceShape::small());
        let mut solver = CsaSolver::for_timetable(&tt);
        let tau = 6 * 3600 + t * 60;
        let a1 = solver.one_to_all(tt.sorted_connections(), tt.footpaths(), &Query::new(StopId(o), StopId(d), tau)).unwrap();
        let a2 = solver.one_to_all(tt.sorted_connections(), tt.footpaths(), &Query::new(StopId(o), StopId(d), tau + dt * 60)).unwrap();
        for s in 0..tt.stop_count() {
            prop_assert!(a1[s] <= a2[s], "stop {}: {} then {}", s, a1[s], a2[s]);
        }
    }

    #[test]
    fn journey_prefixes_are_bounded_by_labels(seed in any::<u64>(), o in 0u32..25, d in 0u32..25, t in 0u32..180) {
        let (tt, _) = instance(seed, &InstanceShape::small());
        let mut solver = CsaSolver::for_timetable(&tt);
        let q = Query::new(StopId(o), StopId(d), 6 * 3600 + t * 60);
        let labels = solver.one_to_all(tt.sorted_connections(), tt.footpaths(), &q).unwrap();
        let (journey, _) = solver.earliest_arrival(tt.sorted_connections(), tt.footpaths(), &q).unwrap();
        prop_assert_eq!(journey.as_ref().map(|j| j.arrival).unwrap_or(INFINITY), labels[d as usize]);
        if let Some(j) = journey {
            for c in &j.connections {
                prop_assert!(labels[c.arr_stop.idx()] <= c.arr_time);
            }
            prop_assert!(j.connections.windows(2).all(|w| w[0].arr_time <= w[1].dep_time));
        }
    }

    #[test]
    fn early_stop_keeps_the_answer(seed in any::<u64>(), o in 0u32..25, d in 0u32..25, t in 0u32..180) {
        let (tt, _) = instance(seed, &InstanceShape::small());
        let mut solver = CsaSolver::for_timetable(&tt);
        let q = Query::new(StopId(o), StopId(d), 6 * 3600 + t * 60);
        let full = solver.scan(tt.sorted_connections(), tt.footpaths(), &q, false).unwrap();
        let a_full = solver.arrival_at(StopId(d));
        let early = solver.scan(tt.sorted_connections(), tt.footpaths(), &q, true).unwrap();
        prop_assert_eq!(solver.arrival_at(StopId(d)), a_full);
        prop_assert!(early.scanned <= full.scanned);
    }

    #[test]
    fn envelope_grows_with_the_bound(seed in any::<u64>(), o in 0u32..25, d in 0u32..25, t in 0u32..120, b1 in 0u32..120, b2 in 0u32..120) {
        let (tt, _) = instance(seed, &InstanceShape::small());
        let tig = build_tig(&tt);
        let tau: Time = 7 * 3600 + t * 60;
        let (lo, hi) = (tau + b1.min(b2) * 60, tau + b1.max(b2) * 60);
        let small = build_envelope(&tt, &tt, &tig, StopId(o), StopId(d), tau, lo).unwrap();
        let large = build_envelope(&tt, &tt, &tig, StopId(o), StopId(d), tau, hi).unwrap();
        prop_assert!(small.ids().iter().all(|&id| large.contains(id)));
        prop_assert!(small.len() <= large.len());
    }

    #[test]
    fn sampling_is_deterministic(seed in any::<u64>(), feed_seed in any::<u64>()) {
        let (tt, _) = instance(seed, &InstanceShape::small());
        let params = DelayParams::default();
        let a = sample_delays(&tt, &params, feed_seed).unwrap();
        let b = sample_delays(&tt, &params, feed_seed).unwrap();
        prop_assert_eq!(a.events(), b.events());
        prop_assert!(validate(&tt).is_valid());
    }
}

#[test]
fn shuffled_feed_gives_the_same_view() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let tt = random_timetable(&mut rng, &InstanceShape::small());
    let feed = random_feed(&mut rng, &tt, 40, 10).unwrap();
    let mut events = feed.events().to_vec();
    events.shuffle(&mut rng);
    let again = replan_core::delay::DelayFeed::new(&tt, events).unwrap();
    let tau = rng.random_range(7 * 3600..10 * 3600);
    assert_eq!(
        sorted_connections_naive(&apply_delays(&tt, &feed, tau)),
        sorted_connections_naive(&apply_delays(&tt, &again, tau))
    );
}
