//! p-values pinned against an independent reference implementation
//! (scipy.stats 1.15) on fixed data.

use aarchive::stats::*;

const A: [f64; 10] = [2.1, 3.4, 1.9, 5.6, 4.4, 3.3, 2.8, 4.9, 3.1, 2.2];
const B: [f64; 11] = [3.9, 4.1, 5.5, 6.2, 3.8, 4.4, 5.1, 6.0, 4.7, 5.3, 4.2];

fn close(got: f64, want: f64) {
    assert!(
        (got - want).abs() <= 1e-9 + 1e-7 * want.abs(),
        "got {got}, want {want}"
    );
}

#[test]
fn normaltest_reference() {
    let x: Vec<f64> = (0..30)
        .map(|i| (((i * 37) % 23) as f64).powf(1.5) + 0.3 * i as f64)
        .collect();
    let r = normality_test(&x).unwrap();
    close(r.z_skew, 0.9354920853484883);
    close(r.z_kurtosis, -1.8934275125738704);
    close(r.p_value, 0.10751696890841103);
}

#[test]
fn t_tests_reference() {
    close(student_t_test(&A, &B, Alternative::TwoSided).unwrap().p_value, 0.004769534560432064);
    close(welch_t_test(&A, &B, Alternative::TwoSided).unwrap().p_value, 0.006551502769846497);
    close(paired_t_test(&A, &B[..10], Alternative::Less).unwrap().p_value, 0.0018211748422302665);
}

#[test]
fn rank_tests_reference() {
    close(wilcoxon_signed_rank(&A, &B[..10], Alternative::TwoSided).unwrap().p_value, 0.00800430976224057);
    close(mann_whitney_u(&A, &B, Alternative::TwoSided).unwrap().p_value, 0.01368503025621544);
    close(mann_whitney_u(&A, &B, Alternative::Less).unwrap().p_value, 0.00684251512810772);
}

#[test]
fn variance_tests_reference() {
    close(levene_test(&[&A, &B], LeveneCenter::Mean).unwrap().p_value, 0.3219098149346459);
    close(levene_test(&[&A, &B], LeveneCenter::Median).unwrap().p_value, 0.35919385422693095);
    close(levene_test(&[&A, &B], LeveneCenter::Trimmed(0.1)).unwrap().p_value, 0.5952896891376833);
    close(f_test(&A, &B, Alternative::TwoSided).unwrap().p_value, 0.23648222591152737);
}

#[test]
fn ks_reference() {
    let r = ks_compare(&A, &B).unwrap();
    close(r.statistic, 0.7);
    // limiting Kolmogorov distribution at sqrt(nm/(n+m)) * D
    close(r.p_value, 0.011793740459114216);
    close(kolmogorov_sf(0.5), 0.9639452436648751);
    close(kolmogorov_sf(1.5), 0.022217962616525127);
}
