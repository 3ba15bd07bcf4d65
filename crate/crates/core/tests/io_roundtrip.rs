mod common;

use common::THETA0;
use gameid::inference::{fs_band, frequency_ccp};
use gameid::io::{format_game_spec, parse_game_spec, read_ccp, read_dataset, read_results, write_ccp, write_dataset, write_results, ResultRow};
use gameid::mixing::MixingGrid;
use gameid::oracle::{simulate_dataset, SelectionRule};

#[test]
fn simulated_data_survives_csv() {
    let g = gameid::entry_game(2, &[0.0, 0.4, -0.3]).unwrap();
    let data = simulate_dataset(&g, &THETA0, &SelectionRule::SymmetricUniform, 30_000, &[0.5, 0.3, 0.2], None, 4).unwrap();
    let mut buf = Vec::new();
    write_dataset(&g, &data, &mut buf).unwrap();
    let back = read_dataset(&g, buf.as_slice()).unwrap();
    assert_eq!(back, data);
    let ccp = frequency_ccp(&g, &data).unwrap();
    assert_eq!(frequency_ccp(&g, &back).unwrap(), ccp);

    let mut cbuf = Vec::new();
    write_ccp(&g, &ccp, &mut cbuf).unwrap();
    assert_eq!(read_ccp(&g, cbuf.as_slice()).unwrap(), ccp);
}

#[test]
fn shocks_survive_csv() {
    let g = gameid::entry2();
    let grid = MixingGrid::logistic_quantiles(5, 0.7).unwrap();
    let data = simulate_dataset(&g, &THETA0, &SelectionRule::SymmetricUniform, 5_000, &[1.0], Some(&grid), 9).unwrap();
    assert!(data.rows.iter().all(|r| r.omega.is_some()));
    let mut buf = Vec::new();
    write_dataset(&g, &data, &mut buf).unwrap();
    assert!(String::from_utf8_lossy(&buf).starts_with("market_id,x_bin,y_1,y_2,omega\n"));
    assert_eq!(read_dataset(&g, buf.as_slice()).unwrap(), data);
}

#[test]
fn results_and_specs_round_trip() {
    let rows = vec![
        ResultRow { quantity: "projection".into(), coordinate: "beta1".into(), lower: -0.1 / 3.0, upper: 1e-300, status: "optimal".into(), seed: 3 },
        ResultRow { quantity: "projection".into(), coordinate: "delta1".into(), lower: f64::NEG_INFINITY, upper: 0.0, status: "unbounded".into(), seed: 3 },
    ];
    let mut buf = Vec::new();
    write_results(&rows, &mut buf).unwrap();
    assert_eq!(read_results(buf.as_slice()).unwrap(), rows);

    let g = gameid::entry_game(3, &[0.0, 1.5]).unwrap();
    assert_eq!(parse_game_spec(&format_game_spec(&g)).unwrap(), g);
}

#[test]
fn band_is_deterministic() {
    let g = gameid::entry2();
    let data = simulate_dataset(&g, &THETA0, &SelectionRule::SymmetricUniform, 2000, &[1.0], None, 12).unwrap();
    let c = frequency_ccp(&g, &data).unwrap();
    assert_eq!(fs_band(&c, 0.05).unwrap(), fs_band(&c, 0.05).unwrap());
}
