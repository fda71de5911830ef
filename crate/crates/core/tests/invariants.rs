mod common;

use common::random_graph;
use kinomapf::kinematics::{DriveProfile, KinematicProfile};
use kinomapf::model::{validate_path, RobotId, TimedPath, WaypointId};
use kinomapf::reservation::{path_to_reservations, Reservation, ReservationTable};
use kinomapf::search::{a_star_spatial, h_estimate, NodeMask};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn profile() -> impl Strategy<Value = KinematicProfile> {
    (0.1..3.0f64, 0.1..3.0f64, 0.2..3.0f64, 0.5..6.0f64)
        .prop_map(|(a, b, v, w)| KinematicProfile::new(a, b, v, w, 0.35).unwrap())
}

fn reservation() -> impl Strategy<Value = Reservation> {
    (0u32..6, 0u32..4, 0u32..30, 1u32..8, any::<bool>()).prop_map(|(w, o, s, len, fin)| {
        let (w, o, s) = (WaypointId(w), RobotId(o), s as f64 * 0.5);
        if fin {
            Reservation::final_at(w, s, o)
        } else {
            Reservation::new(w, s, s + len as f64 * 0.5, o)
        }
    })
}

proptest! {
    #[test]
    fn position_and_time_are_inverse(p in profile(), d in 0.0..50.0f64, frac in 0.0..=1.0f64) {
        let drive = DriveProfile::new(d, &p).unwrap();
        let s = d * frac;
        let t = drive.time_at_position(s).unwrap();
        prop_assert!((drive.position_at(t).unwrap() - s).abs() < 1e-7);
        prop_assert!(drive.total_time() + 1e-12 >= d / p.v_max);
        prop_assert!(drive.peak_speed() <= p.v_max + 1e-12);
    }

    #[test]
    fn longer_drives_never_take_less_time(p in profile(), d in 0.0..50.0f64, extra in 0.0..10.0f64) {
        let short = DriveProfile::new(d, &p).unwrap().total_time();
        let long = DriveProfile::new(d + extra, &p).unwrap().total_time();
        prop_assert!(long + 1e-12 >= short);
    }

    #[test]
    fn checked_adds_keep_owners_apart(batches in prop::collection::vec(prop::collection::vec(reservation(), 1..4), 1..40)) {
        let mut table = ReservationTable::new();
        for batch in &batches {
            // one owner per batch, as a path would have
            let owner = batch[0].owner;
            let batch: Vec<_> = batch.iter().map(|r| Reservation { owner, ..*r }).collect();
            let before = table.len();
            match table.add(&batch) {
                Ok(()) => prop_assert_eq!(table.len(), before + batch.len()),
                Err(_) => prop_assert_eq!(table.len(), before),
            }
        }
        let all: Vec<Reservation> = table.iter().collect();
        for (i, a) in all.iter().enumerate() {
            for b in &all[i + 1..] {
                prop_assert!(a.owner == b.owner || !a.overlaps(b), "{a} overlaps {b}");
            }
        }
    }

    #[test]
    fn spatial_routes_are_valid_and_not_faster_than_the_estimate(seed in any::<u64>(), n in 3usize..=9) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_graph(&mut rng, n);
        let ids: Vec<_> = g.ids().collect();
        let (start, goal) = (ids[0], ids[ids.len() - 1]);
        let p = KinematicProfile::warehouse_default();
        let steps = a_star_spatial(&g, start, 0.0, goal, &NodeMask::new(g.len()), &p, &|w| h_estimate(&g, w, goal, &p));
        if !steps.is_empty() {
            let path = TimedPath::new(RobotId(0), 0.0, 0.0, steps);
            prop_assert!(validate_path(&path, &g).is_ok());
            prop_assert_eq!(path.last(), goal);
            let res = path_to_reservations(&path, &g, &p).unwrap();
            let arrival = res.iter().map(|r| r.end).fold(0.0, f64::max);
            prop_assert!(arrival + 1e-9 >= h_estimate(&g, start, goal, &p));
        }
    }
}
