#![allow(dead_code)]

use gameid::inference::CcpTable;
use gameid::{GameSpec, GameSpecBuilder};
use rand::Rng;

pub const THETA0: [f64; 4] = [0.0, 0.0, -0.5, -0.5];

/// Choice probabilities of the two-firm entry game at `THETA0` under uniform
/// selection, computed independently in `exact_ccp_closed_form`.
pub const EXACT_CCP: [f64; 4] = [0.25, 0.30373152170172457, 0.30373152170172457, 0.1425369565965509];

/// The same probabilities rounded to three digits.
pub const ROUNDED_CCP: [f64; 4] = [0.250, 0.304, 0.304, 0.142];

pub fn exact_table() -> (GameSpec, CcpTable) {
    let g = gameid::entry2();
    let c = CcpTable::population(&g, vec![EXACT_CCP.to_vec()]).unwrap();
    (g, c)
}

/// Binary game with `n` players, `d` parameters and one bin. Each payoff is
/// an affine function of θ with coefficients and offsets in `[-1, 1]`, and
/// the stay-out action of each player pays zero.
pub fn random_binary_spec<R: Rng>(rng: &mut R, n: usize, d: usize) -> GameSpec {
    let players = (0..n).map(|i| format!("p{i}")).collect();
    let actions = vec![vec!["0".to_string(), "1".to_string()]; n];
    let params = (0..d).map(|k| format!("t{k}")).collect();
    let mut b = GameSpecBuilder::new(players, actions, vec!["x0".into()], params).unwrap();
    for y in 0..1usize << n {
        for i in 0..n {
            if b.spec().action(y, i) == 1 {
                let c: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
                b.set_payoff(i, y, 0, &c, rng.random_range(-1.0..1.0)).unwrap();
            } else {
                b.set_payoff(i, y, 0, &vec![0.0; d], 0.0).unwrap();
            }
        }
    }
    b.bounds(vec![-3.0; d], vec![3.0; d]).unwrap();
    b.build().unwrap()
}

pub fn random_theta<R: Rng>(rng: &mut R, d: usize, scale: f64) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(-scale..scale)).collect()
}

/// Standard logistic draw by inversion.
pub fn logistic<R: Rng>(rng: &mut R) -> f64 {
    let u: f64 = rng.random_range(f64::EPSILON..1.0);
    (u / (1.0 - u)).ln()
}
