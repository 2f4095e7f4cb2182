//! C ABI for the shadowfolk engine.
//!
//! Every function returns an [`SfStatus`]. On failure a message is stored
//! per thread and can be read with [`sf_last_error`]. Handles are opaque and
//! must be released with the matching `*_free`; strings returned through
//! `char **` out-parameters must be released with [`sf_string_free`].
//! Functions never unwind across the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use shadowfolk::folk::{default_folk_theory, FolkTheory};
use shadowfolk::graph::{posterior, Assignment, GraphError, Network};
use shadowfolk::intervention::{
    do_intervene, parse_catalog, set_prior, sweep_interventions, Intervention, SimSettings,
};
use shadowfolk::io::{parse_model, serialize_model};
use shadowfolk::sim::{default_world_model, simulate_population, WorldModel};
use shadowfolk::Error;

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SfStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    InvalidModel = 4,
    UnknownName = 5,
    ImpossibleEvidence = 6,
    NotIntervenable = 7,
    InvalidArgument = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

/// A validated network.
pub struct SfModel(Network);

/// A folk theory: a network plus its suspicion node.
pub struct SfFolk(FolkTheory);

/// A world model: a network plus its ground-truth node.
pub struct SfWorld(WorldModel);

/// Population summary. Rates are NaN when undefined (no episodes, or no
/// suspicious episodes for the shares).
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SfStats {
    pub n: u64,
    pub suspicious: u64,
    pub true_suspicions: u64,
    pub false_suspicions: u64,
    pub unattributed: u64,
    pub suspicion_incidence: f64,
    pub true_suspicion_rate: f64,
    pub false_suspicion_rate: f64,
    pub false_share_among_suspicious: f64,
    pub true_share_among_suspicious: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Fail(SfStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Fail {
        let status = match &e {
            Error::Parse(_) => SfStatus::ParseError,
            Error::Graph(GraphError::ImpossibleEvidence) => SfStatus::ImpossibleEvidence,
            Error::Graph(GraphError::UnknownNode(_) | GraphError::UnknownState { .. }) => SfStatus::UnknownName,
            Error::NotIntervenable(_) => SfStatus::NotIntervenable,
            Error::InvalidThreshold(_) | Error::NotNormalized { .. } | Error::Json(_) => SfStatus::InvalidArgument,
            _ => SfStatus::InvalidModel,
        };
        Fail(status, e.to_string())
    }
}

impl From<GraphError> for Fail {
    fn from(e: GraphError) -> Fail {
        Error::from(e).into()
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> SfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SfStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            SfStatus::Panic
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| Fail(SfStatus::NullArgument, format!("{what} is null")))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail(SfStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail(SfStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail(SfStatus::NullArgument, "output pointer is null".into()));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail(SfStatus::NullArgument, "output pointer is null".into()));
    }
    let c = CString::new(s).map_err(|_| Fail(SfStatus::InvalidArgument, "string contains NUL".into()))?;
    *out = c.into_raw();
    Ok(())
}

/// `NODE=STATE` pairs separated by commas; empty means no evidence.
fn parse_evidence(s: &str) -> Result<Assignment, Fail> {
    let mut ev = Assignment::new();
    for item in s.split(',').map(str::trim).filter(|i| !i.is_empty()) {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| Fail(SfStatus::InvalidArgument, format!("evidence `{item}` is not NODE=STATE")))?;
        ev.insert(k.trim(), v.trim());
    }
    Ok(ev)
}

/// Message of the last failed call on this thread. Valid until the next
/// call on the same thread; never null.
#[no_mangle]
pub extern "C" fn sf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must be null or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn sf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses and validates model text.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sf_model_parse(text: *const c_char, out: *mut *mut SfModel) -> SfStatus {
    guard(|| {
        let spec = parse_model(self::text(text, "text")?).map_err(Error::from)?;
        put(out, SfModel(Network::build(spec)?))
    })
}

/// # Safety
/// `model` must be null or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn sf_model_free(model: *mut SfModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Canonical model text. Free the result with [`sf_string_free`].
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sf_model_serialize(model: *const SfModel, out: *mut *mut c_char) -> SfStatus {
    guard(|| put_string(out, serialize_model(borrow(model, "model")?.0.spec())))
}

/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sf_model_node_count(model: *const SfModel, out: *mut usize) -> SfStatus {
    guard(|| {
        let n = borrow(model, "model")?.0.len();
        if out.is_null() {
            return Err(Fail(SfStatus::NullArgument, "output pointer is null".into()));
        }
        *out = n;
        Ok(())
    })
}

/// Posterior of `query` given `evidence` (`"N6=true,N7=false"`, may be
/// empty). Writes the state count to `len`; if `cap` is smaller, returns
/// `BufferTooSmall` without touching `probs`.
///
/// # Safety
/// `probs` must have room for `cap` doubles; other pointers as usual.
#[no_mangle]
pub unsafe extern "C" fn sf_posterior(
    model: *const SfModel,
    evidence: *const c_char,
    query: *const c_char,
    probs: *mut f64,
    cap: usize,
    len: *mut usize,
) -> SfStatus {
    guard(|| {
        let net = &borrow(model, "model")?.0;
        let ev = parse_evidence(text(evidence, "evidence")?)?;
        let d = posterior(net, &ev, text(query, "query")?)?;
        if len.is_null() {
            return Err(Fail(SfStatus::NullArgument, "len is null".into()));
        }
        *len = d.probs.len();
        if cap < d.probs.len() || probs.is_null() {
            return Err(Fail(SfStatus::BufferTooSmall, format!("need {} entries", d.probs.len())));
        }
        ptr::copy_nonoverlapping(d.probs.as_ptr(), probs, d.probs.len());
        Ok(())
    })
}

/// Graph surgery: a new model with `node` fixed to `state`. No
/// intervenability check.
///
/// # Safety
/// Pointers as usual; `out` receives a new handle.
#[no_mangle]
pub unsafe extern "C" fn sf_model_do(
    model: *const SfModel,
    node: *const c_char,
    state: *const c_char,
    out: *mut *mut SfModel,
) -> SfStatus {
    guard(|| {
        let net = do_intervene(&borrow(model, "model")?.0, text(node, "node")?, text(state, "state")?)?;
        put(out, SfModel(net))
    })
}

/// A new model with the prior of root `node` replaced.
///
/// # Safety
/// `probs` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn sf_model_set_prior(
    model: *const SfModel,
    node: *const c_char,
    probs: *const f64,
    len: usize,
    out: *mut *mut SfModel,
) -> SfStatus {
    guard(|| {
        if probs.is_null() {
            return Err(Fail(SfStatus::NullArgument, "probs is null".into()));
        }
        let p = std::slice::from_raw_parts(probs, len);
        put(out, SfModel(set_prior(&borrow(model, "model")?.0, text(node, "node")?, p)?))
    })
}

/// The shipped calibrated folk theory.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sf_folk_default(out: *mut *mut SfFolk) -> SfStatus {
    guard(|| put(out, SfFolk(default_folk_theory())))
}

/// A folk theory over a copy of `model`, scoring the default suspicion node.
///
/// # Safety
/// Pointers as usual.
#[no_mangle]
pub unsafe extern "C" fn sf_folk_from_model(model: *const SfModel, out: *mut *mut SfFolk) -> SfStatus {
    guard(|| put(out, SfFolk(FolkTheory::from_network(borrow(model, "model")?.0.clone())?)))
}

/// # Safety
/// `folk` must be null or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn sf_folk_free(folk: *mut SfFolk) {
    if !folk.is_null() {
        drop(Box::from_raw(folk));
    }
}

/// Suspicion posterior given observable evidence.
///
/// # Safety
/// Pointers as usual.
#[no_mangle]
pub unsafe extern "C" fn sf_folk_suspicion(folk: *const SfFolk, evidence: *const c_char, out: *mut f64) -> SfStatus {
    guard(|| {
        let p = borrow(folk, "folk")?.0.suspicion_probability(&parse_evidence(text(evidence, "evidence")?)?)?;
        if out.is_null() {
            return Err(Fail(SfStatus::NullArgument, "output pointer is null".into()));
        }
        *out = p;
        Ok(())
    })
}

/// Applies an intervention given as JSON (same shape as catalog entries),
/// enforcing the intervenable flag.
///
/// # Safety
/// Pointers as usual.
#[no_mangle]
pub unsafe extern "C" fn sf_folk_apply(
    folk: *const SfFolk,
    intervention_json: *const c_char,
    out: *mut *mut SfFolk,
) -> SfStatus {
    guard(|| {
        let iv: Intervention = serde_json::from_str(text(intervention_json, "intervention")?).map_err(Error::from)?;
        put(out, SfFolk(borrow(folk, "folk")?.0.apply(&iv)?))
    })
}

/// The shipped calibrated world model.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sf_world_default(out: *mut *mut SfWorld) -> SfStatus {
    guard(|| put(out, SfWorld(default_world_model())))
}

/// # Safety
/// Pointers as usual.
#[no_mangle]
pub unsafe extern "C" fn sf_world_from_model(model: *const SfModel, out: *mut *mut SfWorld) -> SfStatus {
    guard(|| put(out, SfWorld(WorldModel::from_network(borrow(model, "model")?.0.clone())?)))
}

/// # Safety
/// `world` must be null or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn sf_world_free(world: *mut SfWorld) {
    if !world.is_null() {
        drop(Box::from_raw(world));
    }
}

/// Simulates `n` users. Deterministic in (models, n, threshold, seed).
///
/// # Safety
/// Pointers as usual.
#[no_mangle]
pub unsafe extern "C" fn sf_simulate(
    world: *const SfWorld,
    folk: *const SfFolk,
    n: u64,
    threshold: f64,
    seed: u64,
    out: *mut SfStats,
) -> SfStatus {
    guard(|| {
        let s = simulate_population(&borrow(world, "world")?.0, &borrow(folk, "folk")?.0, n, threshold, seed)?;
        if out.is_null() {
            return Err(Fail(SfStatus::NullArgument, "output pointer is null".into()));
        }
        let nan = |v: Option<f64>| v.unwrap_or(f64::NAN);
        *out = SfStats {
            n: s.n,
            suspicious: s.suspicious,
            true_suspicions: s.true_suspicions,
            false_suspicions: s.false_suspicions,
            unattributed: s.unattributed,
            suspicion_incidence: nan(s.suspicion_incidence),
            true_suspicion_rate: nan(s.true_suspicion_rate),
            false_suspicion_rate: nan(s.false_suspicion_rate),
            false_share_among_suspicious: nan(s.false_share_among_suspicious),
            true_share_among_suspicious: nan(s.true_share_among_suspicious),
        };
        Ok(())
    })
}

/// Ranks a JSON array of interventions; writes the reports as JSON.
///
/// # Safety
/// Pointers as usual; free `out` with [`sf_string_free`].
#[no_mangle]
pub unsafe extern "C" fn sf_sweep(
    world: *const SfWorld,
    folk: *const SfFolk,
    catalog_json: *const c_char,
    n: u64,
    threshold: f64,
    seed: u64,
    out: *mut *mut c_char,
) -> SfStatus {
    guard(|| {
        let catalog = parse_catalog(text(catalog_json, "catalog")?)?;
        let settings = SimSettings { n, seed, threshold };
        let reports = sweep_interventions(&borrow(world, "world")?.0, &borrow(folk, "folk")?.0, &catalog, settings)?;
        put_string(out, serde_json::to_string(&reports).map_err(Error::from)?)
    })
}
