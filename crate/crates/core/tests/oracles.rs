mod common;

use common::*;

fn ok(check: Check) {
    match check {
        Ok(summary) => println!("{summary}"),
        Err(e) => panic!("{e}"),
    }
}

#[test]
fn kdtree_radius_search_matches_pairwise_scan() {
    ok(kdtree_vs_brute_force(50, 200));
}

#[test]
fn shortest_paths_match_enumeration() {
    ok(shortest_path_vs_enumeration(300, 12));
}

#[test]
fn scc_matches_reachability_closure() {
    ok(scc_vs_closure(500, 15));
}

#[test]
fn dtw_matches_enumeration() {
    ok(dtw_vs_enumeration(400, 6));
}

#[test]
fn kde_matches_direct_sum() {
    ok(kde_vs_direct_sum(100));
}

#[test]
fn lowpass_gain_matches_butterworth_prototype() {
    ok(lowpass_vs_fft(5.0, 100.0));
    ok(lowpass_vs_fft(12.0, 120.0));
}
