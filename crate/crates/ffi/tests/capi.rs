use std::ffi::{CStr, CString};
use std::path::Path;
use std::ptr;

use gameid_ffi::*;

const THETA0: [f64; 4] = [0.0, 0.0, -0.5, -0.5];
// exact choice probabilities of the two-firm entry game at THETA0
const CCP0: [f64; 4] = [0.25, 0.30373152170172457, 0.30373152170172457, 0.1425369565965509];

fn last_error() -> String {
    let p = gameid_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn entry_game() -> *mut GameidGame {
    let mut game = ptr::null_mut();
    let shifts = [0.0];
    assert_eq!(unsafe { gameid_game_entry(2, shifts.as_ptr(), 1, &mut game) }, GameidStatus::Ok);
    assert!(!game.is_null());
    game
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(gameid_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn dimensions_of_entry_game() {
    let game = entry_game();
    let (mut players, mut outcomes, mut bins, mut params) = (0, 0, 0, 0);
    let st = unsafe { gameid_game_dims(game, &mut players, &mut outcomes, &mut bins, &mut params) };
    assert_eq!(st, GameidStatus::Ok);
    assert_eq!((players, outcomes, bins, params), (2, 4, 1, 4));
    // null outputs are skipped
    let st = unsafe { gameid_game_dims(game, ptr::null_mut(), &mut outcomes, ptr::null_mut(), ptr::null_mut()) };
    assert_eq!(st, GameidStatus::Ok);
    unsafe { gameid_game_free(game) };
}

#[test]
fn likelihoods_match_library() {
    let game = entry_game();
    let spec = gameid::entry2();
    for y in 0..4 {
        let mut v = f64::NAN;
        let st = unsafe { gameid_singleton_likelihood(game, THETA0.as_ptr(), 4, y, 0, &mut v) };
        assert_eq!(st, GameidStatus::Ok);
        let want = gameid::likelihood::singleton_likelihood(&spec, &THETA0, y, 0).unwrap();
        assert_eq!(v, want);
    }
    // the union of (0,1) and (1,0) has probability above either singleton
    let event = [1usize, 2];
    let mut u = f64::NAN;
    let st = unsafe { gameid_union_likelihood(game, THETA0.as_ptr(), 4, event.as_ptr(), 2, 0, &mut u) };
    assert_eq!(st, GameidStatus::Ok);
    let mut s1 = f64::NAN;
    unsafe { gameid_singleton_likelihood(game, THETA0.as_ptr(), 4, 1, 0, &mut s1) };
    assert!(u > s1 && u <= 1.0);
    unsafe { gameid_game_free(game) };
}

#[test]
fn criterion_and_projection() {
    let game = entry_game();
    let mut ccp = ptr::null_mut();
    assert_eq!(unsafe { gameid_ccp_new(game, CCP0.as_ptr(), 4, &mut ccp) }, GameidStatus::Ok);
    let mut q = f64::NAN;
    let st = unsafe { gameid_criterion(game, ccp, GameidFamily::Abj, THETA0.as_ptr(), 4, &mut q) };
    assert_eq!(st, GameidStatus::Ok);
    assert!(q <= 1e-9, "true parameter must be a member, Q = {q}");
    let zero = [0.0; 4];
    unsafe { gameid_criterion(game, ccp, GameidFamily::Abj, zero.as_ptr(), 4, &mut q) };
    assert!(q > 0.1, "Q at zero = {q}");

    let dir = [0.0, 0.0, 1.0, 0.0];
    let (mut lo, mut hi) = (f64::NAN, f64::NAN);
    let st = unsafe { gameid_project(game, ccp, GameidFamily::Abj, dir.as_ptr(), 4, &mut lo, &mut hi) };
    assert_eq!(st, GameidStatus::Ok, "{}", last_error());
    assert!((lo + 0.951).abs() < 0.01, "lower {lo}");
    assert!(hi.abs() < 0.01, "upper {hi}");
    unsafe {
        gameid_ccp_free(ccp);
        gameid_game_free(game);
    }
}

#[test]
fn bounds_restrict_projection() {
    let game = entry_game();
    assert_eq!(unsafe { gameid_game_set_bound(game, 2, -5.0, -0.6) }, GameidStatus::Ok);
    let mut ccp = ptr::null_mut();
    unsafe { gameid_ccp_new(game, CCP0.as_ptr(), 4, &mut ccp) };
    let dir = [0.0, 0.0, 1.0, 0.0];
    let (mut lo, mut hi) = (f64::NAN, f64::NAN);
    let st = unsafe { gameid_project(game, ccp, GameidFamily::Abj, dir.as_ptr(), 4, &mut lo, &mut hi) };
    assert_eq!(st, GameidStatus::Ok, "{}", last_error());
    assert!(hi <= -0.6 + 1e-6, "upper {hi}");
    // an inverted bound is rejected
    assert_eq!(unsafe { gameid_game_set_bound(game, 2, 1.0, -1.0) }, GameidStatus::InvalidArgument);
    unsafe {
        gameid_ccp_free(ccp);
        gameid_game_free(game);
    }
}

#[test]
fn errors_are_reported() {
    let mut game = ptr::null_mut();
    assert_eq!(unsafe { gameid_game_entry(2, ptr::null(), 1, &mut game) }, GameidStatus::NullArgument);
    assert!(game.is_null());
    assert!(last_error().contains("shifts"));

    let game = entry_game();
    let mut v = 0.0;
    let st = unsafe { gameid_singleton_likelihood(game, THETA0.as_ptr(), 3, 0, 0, &mut v) };
    assert_eq!(st, GameidStatus::InvalidArgument);
    assert!(last_error().contains("theta"));
    let st = unsafe { gameid_singleton_likelihood(game, THETA0.as_ptr(), 4, 9, 0, &mut v) };
    assert_eq!(st, GameidStatus::InvalidArgument);

    let mut ccp = ptr::null_mut();
    let bad = [0.5, 0.5, 0.5, 0.5];
    assert_ne!(unsafe { gameid_ccp_new(game, bad.as_ptr(), 4, &mut ccp) }, GameidStatus::Ok);
    assert!(ccp.is_null());
    assert_eq!(unsafe { gameid_ccp_new(game, CCP0.as_ptr(), 3, &mut ccp) }, GameidStatus::InvalidArgument);
    unsafe {
        gameid_game_free(game);
        gameid_game_free(ptr::null_mut());
        gameid_ccp_free(ptr::null_mut());
    }
}

#[test]
fn load_spec_file() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/examples/entry2.spec");
    let c = CString::new(path.to_str().unwrap()).unwrap();
    let mut game = ptr::null_mut();
    assert_eq!(unsafe { gameid_game_load(c.as_ptr(), &mut game) }, GameidStatus::Ok, "{}", last_error());
    let mut params = 0;
    unsafe { gameid_game_dims(game, ptr::null_mut(), ptr::null_mut(), ptr::null_mut(), &mut params) };
    assert_eq!(params, 4);
    unsafe { gameid_game_free(game) };

    let missing = CString::new("/nonexistent/game.spec").unwrap();
    let st = unsafe { gameid_game_load(missing.as_ptr(), &mut game) };
    assert!(matches!(st, GameidStatus::Io | GameidStatus::Parse), "{st:?}");
    assert!(game.is_null());
}

#[test]
fn header_declares_every_entry_point() {
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/gameid.h")).unwrap();
    for name in [
        "gameid_version",
        "gameid_last_error",
        "gameid_game_load",
        "gameid_game_entry",
        "gameid_game_free",
        "gameid_game_dims",
        "gameid_game_set_bound",
        "gameid_singleton_likelihood",
        "gameid_union_likelihood",
        "gameid_ccp_new",
        "gameid_ccp_free",
        "gameid_criterion",
        "gameid_project",
        "typedef struct GameidGame GameidGame",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}
