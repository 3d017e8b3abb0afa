mod common;

use num_bigint::BigUint;

use common::brute_force_bound as brute_force;
use tsch_cluster::scalability::{lower_bound_slots, node_count, superlinearity_check, MAX_HEIGHT};

#[test]
fn reference_table_values() {
    assert_eq!(brute_force(1), 7);
    assert_eq!(brute_force(3), 35);
    assert_eq!(brute_force(8), 1608);
    for h in [1, 3, 8] {
        assert_eq!(lower_bound_slots(h).unwrap(), BigUint::from(brute_force(h)));
    }
}

#[test]
fn closed_form_matches_summation_up_to_sixty() {
    for h in 1..=60 {
        assert_eq!(lower_bound_slots(h).unwrap(), BigUint::from(brute_force(h)), "h={h}");
    }
}

#[test]
fn consecutive_heights_differ_by_the_new_level() {
    for h in 2..=MAX_HEIGHT {
        let diff = lower_bound_slots(h).unwrap() - lower_bound_slots(h - 1).unwrap();
        let expected = BigUint::from(9u32) + (BigUint::from(1u32) << (h - 1) as usize) * BigUint::from(h - 1);
        assert_eq!(diff, expected, "h={h}");
    }
}

#[test]
fn node_counts() {
    assert_eq!(node_count(1), BigUint::from(3u32));
    assert_eq!(node_count(8), BigUint::from(511u32));
}

#[test]
fn bound_grows_like_n_log_n() {
    assert!(superlinearity_check(2, 12).unwrap());
}
