use pentropy_demo::{chacon_ratios, entropy_profile, rigidity_series};

const GOLDEN: f64 = 0.618_033_988_749_894_9;

#[test]
fn entropy_profile_decays_under_the_count_bound() {
    let h = entropy_profile(GOLDEN, 1, 200).unwrap();
    assert_eq!(h.len(), 200);
    assert!((h[0] - std::f64::consts::LN_2).abs() < 1e-12);
    for (i, v) in h.iter().enumerate() {
        let j = (i + 1) as f64;
        assert!(*v <= (3.0 * j + 1.0).ln() / j + 1e-12);
    }
    assert!(entropy_profile(GOLDEN, 0, 10).is_err());
}

#[test]
fn rational_rotation_returns_fully_at_its_period() {
    let r = rigidity_series(0.4, 6, 10).unwrap();
    assert!((r[4] - 1.0).abs() < 1e-12 && (r[9] - 1.0).abs() < 1e-12);
    assert!(r[0] < 1.0);
}

#[test]
fn chacon_union_ratios_stay_above_six_tenths() {
    let r = chacon_ratios(9, 3, 0, 13).unwrap();
    assert_eq!(r.len(), 10);
    assert!(r[4..8].iter().all(|&x| x >= 0.6), "{r:?}");
    assert!(chacon_ratios(9, 3, 5, 99).is_err());
}
