mod common;

use common::{exact_table, EXACT_CCP, THETA0};
use gameid::identification::{project, FamilyKind, InequalityFamily, Sense, SolverSettings};
use gameid::inference::{confidence_project, fs_band, frequency_ccp, ConfidenceBand};
use gameid::oracle::{simulate_dataset, SelectionRule};
use proptest::prelude::*;

#[test]
fn band_covers_truth_at_nominal_rate() {
    let (g, truth) = exact_table();
    let reps = 500;
    let mut covered = 0;
    for r in 0..reps {
        let d = simulate_dataset(&g, &THETA0, &SelectionRule::SymmetricUniform, 2000, &[1.0], None, 1000 + r).unwrap();
        let band = fs_band(&frequency_ccp(&g, &d).unwrap(), 0.05).unwrap();
        covered += band.contains(&truth) as usize;
    }
    let rate = covered as f64 / reps as f64;
    assert!(rate >= 0.95, "coverage {rate}");
}

#[test]
fn degenerate_band_gives_population_projection() {
    let (g, c) = exact_table();
    let band = ConfidenceBand::degenerate(&c);
    let check = |kind, settings: &SolverSettings, ends: &[(usize, Sense)]| {
        let fam = InequalityFamily::resolve(&g, kind, None).unwrap();
        for &(k, sense) in ends {
            let mut p = vec![0.0; 4];
            p[k] = 1.0;
            let (a, _) = project(&g, &c, &fam, &p, sense, settings).unwrap();
            let (b, _) = confidence_project(&g, &band, &fam, &p, sense, settings).unwrap();
            assert!((a - b).abs() < 1e-6, "{kind:?} coordinate {k} {sense:?}: {a} vs {b}");
        }
    };
    let all: Vec<(usize, Sense)> = (0..4).flat_map(|k| [(k, Sense::Min), (k, Sense::Max)]).collect();
    let settings = SolverSettings { verify_bisection: false, ..SolverSettings::default() };
    check(FamilyKind::AbjUpper, &settings, &all);
    // The sharp set is thin here, so its endpoints move with the feasibility
    // tolerance, which the band program measures in probability units. At a
    // tight tolerance they agree, except the upper Δ ends, which the set
    // reaches only at an isolated point.
    let tight = SolverSettings { feas_tol: 1e-10, ..settings };
    let ends: Vec<(usize, Sense)> = all.into_iter().filter(|&(k, s)| k < 2 || s == Sense::Min).collect();
    check(FamilyKind::Sharp(4), &tight, &ends);
}

#[test]
fn intervals_shrink_with_sample_size() {
    let mut g = gameid::entry2();
    g.set_bound(2, -5.0, 0.0).unwrap();
    g.set_bound(3, -5.0, 0.0).unwrap();
    let fam = InequalityFamily::resolve(&g, FamilyKind::Sharp(4), None).unwrap();
    let settings = SolverSettings { verify_bisection: false, ..SolverSettings::default() };
    let reps = 12;
    let mut widths = Vec::new();
    for n in [200, 500, 2000, 10000] {
        let mut w = 0.0;
        for r in 0..reps {
            let d = simulate_dataset(&g, &THETA0, &SelectionRule::SymmetricUniform, n, &[1.0], None, 77 + r).unwrap();
            let band = fs_band(&frequency_ccp(&g, &d).unwrap(), 0.05).unwrap();
            for k in [0, 2] {
                let mut p = vec![0.0; 4];
                p[k] = 1.0;
                let (lo, _) = confidence_project(&g, &band, &fam, &p, Sense::Min, &settings).unwrap();
                let (hi, _) = confidence_project(&g, &band, &fam, &p, Sense::Max, &settings).unwrap();
                w += hi - lo;
            }
        }
        widths.push(w / reps as f64);
    }
    for pair in widths.windows(2) {
        assert!(pair[1] < pair[0], "widths {widths:?}");
    }
}

proptest! {
    #[test]
    fn band_contains_its_estimate(counts in prop::array::uniform4(0u64..500), alpha in 0.01..0.29f64) {
        let g = gameid::entry2();
        let n: u64 = counts.iter().sum();
        prop_assume!(n > 0);
        let p: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();
        let c = gameid::inference::CcpTable::new(&g, vec![Some(p.clone())], vec![n]).unwrap();
        let band = fs_band(&c, alpha).unwrap();
        prop_assert!(band.contains(&c));
        let (lo, hi) = (band.lower[0].as_ref().unwrap(), band.upper[0].as_ref().unwrap());
        for y in 0..4 {
            prop_assert!(lo[y] >= 0.0 && hi[y] <= 1.0 && lo[y] <= p[y] && p[y] <= hi[y]);
        }
    }
}

#[test]
fn exact_fixture_is_a_distribution() {
    assert!((EXACT_CCP.iter().sum::<f64>() - 1.0).abs() < 1e-15);
}
