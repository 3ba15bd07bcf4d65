//! C interface to the `gameid` library.
//!
//! Games and choice-probability tables are exposed as opaque handles that
//! the caller owns and releases with the matching `*_free` function. Every
//! function returns a [`GameidStatus`]; on failure a description of the
//! last error on the calling thread is available from
//! [`gameid_last_error`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use gameid::identification::{criterion_q, project_query, FamilyKind, InequalityFamily, PhiInput, Sense, SetQuery, SolverSettings};
use gameid::inference::CcpTable;
use gameid::solver::SolveStatus;
use gameid::{Error, GameSpec, OutcomeEvent};

/// Result codes returned by every function.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GameidStatus {
    Ok = 0,
    /// A required pointer was null or a string was not UTF-8.
    NullArgument = 1,
    /// An argument was outside its documented range.
    InvalidArgument = 2,
    /// The game specification could not be read or parsed.
    Parse = 3,
    /// The optimization did not certify a result.
    Solver = 4,
    /// The identified set is empty.
    Infeasible = 5,
    Io = 6,
    /// An internal panic was caught.
    Panic = 7,
}

/// Opaque game specification.
pub struct GameidGame {
    spec: GameSpec,
}

/// Opaque table of choice probabilities for one game.
pub struct GameidCcp {
    table: CcpTable,
}

/// Inequality family selector for [`gameid_criterion`] and [`gameid_project`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GameidFamily {
    Abj = 0,
    AbjLower = 1,
    /// Connected events of every size.
    Sharp = 2,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> GameidStatus {
    match err {
        Error::Schema { .. } => GameidStatus::Parse,
        Error::Io(_) | Error::Csv(_) => GameidStatus::Io,
        Error::Solver(_) => GameidStatus::Solver,
        _ => GameidStatus::InvalidArgument,
    }
}

enum Fail {
    Null(&'static str),
    Lib(Error),
    Status(GameidStatus, String),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> GameidStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GameidStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("{what} must not be null"));
            GameidStatus::NullArgument
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Fail::Status(s, m))) => {
            set_error(m);
            s
        }
        Err(_) => {
            set_error("internal panic".into());
            GameidStatus::Panic
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &'static str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(what))
}

fn family(spec: &GameSpec, f: GameidFamily) -> Result<InequalityFamily, Fail> {
    let kind = match f {
        GameidFamily::Abj => FamilyKind::AbjUpper,
        GameidFamily::AbjLower => FamilyKind::AbjWithDominantLower,
        GameidFamily::Sharp => FamilyKind::Sharp(spec.n_outcomes()),
    };
    Ok(InequalityFamily::resolve(spec, kind, None)?)
}

/// Static version string of the library.
#[no_mangle]
pub extern "C" fn gameid_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message describing the last failure on this thread, or null if none.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn gameid_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parse a game specification file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out_game` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gameid_game_load(path: *const c_char, out_game: *mut *mut GameidGame) -> GameidStatus {
    guard(|| {
        let slot = out(out_game, "out_game")?;
        *slot = ptr::null_mut();
        if path.is_null() {
            return Err(Fail::Null("path"));
        }
        let path = CStr::from_ptr(path).to_str().map_err(|_| Fail::Status(GameidStatus::NullArgument, "path is not UTF-8".into()))?;
        let spec = gameid::io::load_game_spec(path)?;
        *slot = Box::into_raw(Box::new(GameidGame { spec }));
        Ok(())
    })
}

/// Binary entry game with `n_players` firms and one covariate bin per
/// shift, parameterized by entry intercepts followed by competition effects.
///
/// # Safety
/// `shifts` must point to `n_bins` values and `out_game` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gameid_game_entry(
    n_players: usize,
    shifts: *const f64,
    n_bins: usize,
    out_game: *mut *mut GameidGame,
) -> GameidStatus {
    guard(|| {
        let slot = out(out_game, "out_game")?;
        *slot = ptr::null_mut();
        let shifts = slice(shifts, n_bins, "shifts")?;
        let spec = gameid::entry_game(n_players, shifts)?;
        *slot = Box::into_raw(Box::new(GameidGame { spec }));
        Ok(())
    })
}

/// Release a game. Null is ignored.
///
/// # Safety
/// `game` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn gameid_game_free(game: *mut GameidGame) {
    if !game.is_null() {
        drop(Box::from_raw(game));
    }
}

/// Dimensions of a game. Any output pointer may be null.
///
/// # Safety
/// `game` must be a live handle; non-null outputs must be valid.
#[no_mangle]
pub unsafe extern "C" fn gameid_game_dims(
    game: *const GameidGame,
    n_players: *mut usize,
    n_outcomes: *mut usize,
    n_bins: *mut usize,
    n_params: *mut usize,
) -> GameidStatus {
    guard(|| {
        let spec = &borrow(game, "game")?.spec;
        for (p, v) in [(n_players, spec.n_players()), (n_outcomes, spec.n_outcomes()), (n_bins, spec.n_bins()), (n_params, spec.param_dim())] {
            if let Some(p) = p.as_mut() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// Restrict parameter `k` to `[lower, upper]`; infinities are allowed.
///
/// # Safety
/// `game` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn gameid_game_set_bound(game: *mut GameidGame, k: usize, lower: f64, upper: f64) -> GameidStatus {
    guard(|| {
        let g = game.as_mut().ok_or(Fail::Null("game"))?;
        g.spec.set_bound(k, lower, upper)?;
        Ok(())
    })
}

/// Probability that outcome `y` is a Nash equilibrium in bin `x`, an upper
/// bound on its choice probability.
///
/// # Safety
/// `theta` must point to `n_params` values; `out_value` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gameid_singleton_likelihood(
    game: *const GameidGame,
    theta: *const f64,
    n_params: usize,
    y: usize,
    x: usize,
    out_value: *mut f64,
) -> GameidStatus {
    guard(|| {
        let spec = &borrow(game, "game")?.spec;
        let theta = slice(theta, n_params, "theta")?;
        let o = out(out_value, "out_value")?;
        *o = gameid::likelihood::singleton_likelihood(spec, theta, y, x)?;
        Ok(())
    })
}

/// Probability that some outcome of the event is an equilibrium, for
/// binary games. The event is given as outcome indices.
///
/// # Safety
/// `theta` must point to `n_params` values, `outcomes` to `n_outcomes`
/// indices, and `out_value` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gameid_union_likelihood(
    game: *const GameidGame,
    theta: *const f64,
    n_params: usize,
    outcomes: *const usize,
    n_outcomes: usize,
    x: usize,
    out_value: *mut f64,
) -> GameidStatus {
    guard(|| {
        let spec = &borrow(game, "game")?.spec;
        let theta = slice(theta, n_params, "theta")?;
        let o = out(out_value, "out_value")?;
        if n_outcomes > 0 && outcomes.is_null() {
            return Err(Fail::Null("outcomes"));
        }
        let members: &[usize] = if n_outcomes == 0 { &[] } else { std::slice::from_raw_parts(outcomes, n_outcomes) };
        let event = OutcomeEvent::new(spec, members.iter().copied())?;
        *o = gameid::binary::union_likelihood(spec, theta, &event, x)?;
        Ok(())
    })
}

/// Choice probabilities from a dense row-major `n_bins × n_outcomes`
/// array. Each row must sum to one.
///
/// # Safety
/// `probs` must point to `n_values` values and `out_ccp` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gameid_ccp_new(
    game: *const GameidGame,
    probs: *const f64,
    n_values: usize,
    out_ccp: *mut *mut GameidCcp,
) -> GameidStatus {
    guard(|| {
        let slot = out(out_ccp, "out_ccp")?;
        *slot = ptr::null_mut();
        let spec = &borrow(game, "game")?.spec;
        let probs = slice(probs, n_values, "probs")?;
        let m = spec.n_outcomes();
        if n_values != m * spec.n_bins() {
            return Err(Fail::Status(
                GameidStatus::InvalidArgument,
                format!("expected {} probabilities, got {n_values}", m * spec.n_bins()),
            ));
        }
        let table = CcpTable::population(spec, probs.chunks(m).map(<[f64]>::to_vec).collect())?;
        *slot = Box::into_raw(Box::new(GameidCcp { table }));
        Ok(())
    })
}

/// Release a choice-probability table. Null is ignored.
///
/// # Safety
/// `ccp` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn gameid_ccp_free(ccp: *mut GameidCcp) {
    if !ccp.is_null() {
        drop(Box::from_raw(ccp));
    }
}

/// Maximal moment-inequality residual at θ; θ is in the set when it is
/// at most about 1e-9.
///
/// # Safety
/// All pointers must be valid; `theta` must hold `n_params` values.
#[no_mangle]
pub unsafe extern "C" fn gameid_criterion(
    game: *const GameidGame,
    ccp: *const GameidCcp,
    fam: GameidFamily,
    theta: *const f64,
    n_params: usize,
    out_value: *mut f64,
) -> GameidStatus {
    guard(|| {
        let spec = &borrow(game, "game")?.spec;
        let table = &borrow(ccp, "ccp")?.table;
        let theta = slice(theta, n_params, "theta")?;
        let o = out(out_value, "out_value")?;
        let f = family(spec, fam)?.at_theta(spec, theta)?;
        *o = criterion_q(spec, theta, table, &f)?;
        Ok(())
    })
}

/// Projection interval of `direction · θ` over the identified set.
///
/// # Safety
/// All pointers must be valid; `direction` must hold `n_params` values.
#[no_mangle]
pub unsafe extern "C" fn gameid_project(
    game: *const GameidGame,
    ccp: *const GameidCcp,
    fam: GameidFamily,
    direction: *const f64,
    n_params: usize,
    out_lower: *mut f64,
    out_upper: *mut f64,
) -> GameidStatus {
    guard(|| {
        let spec = &borrow(game, "game")?.spec;
        let table = &borrow(ccp, "ccp")?.table;
        let direction = slice(direction, n_params, "direction")?;
        let lo = out(out_lower, "out_lower")?;
        let hi = out(out_upper, "out_upper")?;
        let f = family(spec, fam)?;
        let query = SetQuery::new(spec, PhiInput::Point(table), &f)?;
        let settings = SolverSettings { verify_bisection: false, ..SolverSettings::default() };
        let mut ends = [0.0; 2];
        for (slot, sense) in ends.iter_mut().zip([Sense::Min, Sense::Max]) {
            let (v, rep) = project_query(&query, direction, sense, &settings)?;
            if v.is_nan() {
                let s = if rep.status == SolveStatus::Infeasible { GameidStatus::Infeasible } else { GameidStatus::Solver };
                return Err(Fail::Status(s, format!("projection ended with status {}", rep.status.as_str())));
            }
            *slot = v;
        }
        *lo = ends[0];
        *hi = ends[1];
        Ok(())
    })
}
