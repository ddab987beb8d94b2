//! C interface to the toponav library.
//!
//! Objects are opaque handles created by `*_new`/`*_run` functions and
//! released with the matching `*_free`. Every fallible call returns a
//! [`ToponavStatus`]; on failure the message is available from
//! [`toponav_last_error`] on the same thread. Strings returned by the
//! library must be released with [`toponav_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::Path;
use std::ptr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use toponav::bench::{export_results, run_benchmark, BenchmarkConfig, BenchmarkReport};
use toponav::topo_graph::TopoMap;
use toponav::world::{make_scenario, Action, Cell, GridWorld, ScenarioKind};
use toponav::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ToponavStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Io = 4,
    UnknownNode = 5,
    BlockedCell = 6,
    Runtime = 7,
}

/// Growing topological map.
pub struct ToponavMap {
    inner: TopoMap,
}

/// Grid world plus the random stream its steps draw from.
pub struct ToponavWorld {
    inner: GridWorld,
    rng: ChaCha8Rng,
}

/// Finished benchmark run.
pub struct ToponavBenchmark {
    inner: BenchmarkReport,
}

/// Outcome of one world step.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct ToponavStep {
    pub x: i32,
    pub y: i32,
    pub reached_goal: bool,
    pub hit_obstacle: bool,
}

/// Eval-phase aggregate: mean and sample std across seeds.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct ToponavSummary {
    pub seeds: u32,
    pub success_mean: f64,
    pub success_std: f64,
    pub steps_mean: f64,
    pub trajectory_length_mean: f64,
    pub coverage_mean: f64,
    pub coverage_std: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: ToponavStatus, msg: impl Into<String>) -> ToponavStatus {
    set_error(msg.into());
    status
}

fn from_error(e: Error) -> ToponavStatus {
    let status = match &e {
        Error::Config(_) => ToponavStatus::Config,
        Error::Io { .. } => ToponavStatus::Io,
        Error::UnknownNode(_) => ToponavStatus::UnknownNode,
        Error::BlockedCell { .. } => ToponavStatus::BlockedCell,
        Error::DimensionMismatch { .. } | Error::SelfEdge(_) | Error::Invalid(_) | Error::Json(_) => {
            ToponavStatus::InvalidArgument
        }
        _ => ToponavStatus::Runtime,
    };
    fail(status, e.to_string())
}

macro_rules! check {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(e) => return from_error(e.into()),
        }
    };
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            return fail(ToponavStatus::NullPointer, concat!("`", stringify!($p), "` is null"));
        })+
    };
}

unsafe fn read_str<'a>(s: *const c_char) -> Result<&'a str, ToponavStatus> {
    CStr::from_ptr(s)
        .to_str()
        .map_err(|e| fail(ToponavStatus::InvalidArgument, format!("string is not UTF-8: {e}")))
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s).map_or(ptr::null_mut(), CString::into_raw)
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn toponav_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `s` must be null or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn toponav_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

// ---- map ----

/// # Safety
/// `out` must point to writable storage for one handle pointer.
#[no_mangle]
pub unsafe extern "C" fn toponav_map_new(tau_sim: f64, feature_dim: usize, out: *mut *mut ToponavMap) -> ToponavStatus {
    non_null!(out);
    if !(tau_sim > 0.0 && tau_sim <= 1.0) || feature_dim == 0 {
        return fail(ToponavStatus::InvalidArgument, "tau_sim must be in (0, 1] and feature_dim >= 1");
    }
    *out = Box::into_raw(Box::new(ToponavMap {
        inner: TopoMap::new(tau_sim, feature_dim),
    }));
    ToponavStatus::Ok
}

/// # Safety
/// `map` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn toponav_map_free(map: *mut ToponavMap) {
    if !map.is_null() {
        drop(Box::from_raw(map));
    }
}

/// # Safety
/// `map` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn toponav_map_node_count(map: *const ToponavMap) -> usize {
    map.as_ref().map_or(0, |m| m.inner.len())
}

/// # Safety
/// `map` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn toponav_map_edge_count(map: *const ToponavMap) -> usize {
    map.as_ref().map_or(0, |m| m.inner.edges().len())
}

/// Matches the descriptor against existing nodes or inserts a new node.
///
/// # Safety
/// `feature` must point to `len` readable doubles; `out_id` and
/// `out_inserted` must be writable.
#[no_mangle]
pub unsafe extern "C" fn toponav_map_match_or_insert(
    map: *mut ToponavMap,
    feature: *const f64,
    len: usize,
    x: f64,
    y: f64,
    out_id: *mut usize,
    out_inserted: *mut bool,
) -> ToponavStatus {
    non_null!(map, feature, out_id, out_inserted);
    let f = std::slice::from_raw_parts(feature, len);
    let (id, inserted) = check!((*map).inner.match_or_insert(f, [x, y]));
    *out_id = id;
    *out_inserted = inserted;
    ToponavStatus::Ok
}

/// # Safety
/// `map` must be a live handle; `out_cost` may be null.
#[no_mangle]
pub unsafe extern "C" fn toponav_map_add_edge(map: *mut ToponavMap, a: usize, b: usize, out_cost: *mut f64) -> ToponavStatus {
    non_null!(map);
    let e = check!((*map).inner.add_edge(a, b));
    if !out_cost.is_null() {
        *out_cost = e.cost;
    }
    ToponavStatus::Ok
}

/// Shortest path from `a` to `b`. Writes up to `cap` node ids into
/// `out_nodes` and the full path length into `out_len`; a length of 0 means
/// no path. Returns `InvalidArgument` when `cap` is too small.
///
/// # Safety
/// `out_nodes` must have room for `cap` ids (it may be null when `cap` is
/// 0); `out_len` must be writable; `out_cost` may be null.
#[no_mangle]
pub unsafe extern "C" fn toponav_map_shortest_path(
    map: *const ToponavMap,
    a: usize,
    b: usize,
    out_nodes: *mut usize,
    cap: usize,
    out_len: *mut usize,
    out_cost: *mut f64,
) -> ToponavStatus {
    non_null!(map, out_len);
    let Some((path, cost)) = check!((*map).inner.shortest_path(a, b)) else {
        *out_len = 0;
        return ToponavStatus::Ok;
    };
    *out_len = path.len();
    if !out_cost.is_null() {
        *out_cost = cost;
    }
    if path.len() > cap || out_nodes.is_null() {
        return fail(ToponavStatus::InvalidArgument, format!("path has {} nodes, buffer holds {cap}", path.len()));
    }
    ptr::copy_nonoverlapping(path.as_ptr(), out_nodes, path.len());
    ToponavStatus::Ok
}

/// Serializes the map; release the result with [`toponav_string_free`].
///
/// # Safety
/// `map` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn toponav_map_to_json(map: *const ToponavMap) -> *mut c_char {
    map.as_ref().map_or(ptr::null_mut(), |m| into_c_string(m.inner.to_json()))
}

/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn toponav_map_from_json(
    json: *const c_char,
    tau_sim: f64,
    feature_dim: usize,
    out: *mut *mut ToponavMap,
) -> ToponavStatus {
    non_null!(json, out);
    let s = match read_str(json) {
        Ok(s) => s,
        Err(st) => return st,
    };
    let inner = check!(TopoMap::from_json(s, tau_sim, feature_dim));
    *out = Box::into_raw(Box::new(ToponavMap { inner }));
    ToponavStatus::Ok
}

// ---- world ----

/// Generates scenario 1, 2 or 3 of side `size` from `seed`. Steps draw
/// from a stream derived from the same seed.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn toponav_world_new(scenario: u8, size: i32, seed: u64, out: *mut *mut ToponavWorld) -> ToponavStatus {
    non_null!(out);
    let kind = match ScenarioKind::try_from(scenario) {
        Ok(k) => k,
        Err(m) => return fail(ToponavStatus::InvalidArgument, m),
    };
    let inner = check!(make_scenario(kind, size, seed));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    *out = Box::into_raw(Box::new(ToponavWorld { inner, rng }));
    ToponavStatus::Ok
}

/// # Safety
/// `world` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn toponav_world_free(world: *mut ToponavWorld) {
    if !world.is_null() {
        drop(Box::from_raw(world));
    }
}

/// Writes width, height, start and goal. Any output pointer may be null.
///
/// # Safety
/// `world` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn toponav_world_info(
    world: *const ToponavWorld,
    width: *mut i32,
    height: *mut i32,
    start: *mut [i32; 2],
    goal: *mut [i32; 2],
) -> ToponavStatus {
    non_null!(world);
    let w = &(*world).inner;
    if !width.is_null() {
        *width = w.width();
    }
    if !height.is_null() {
        *height = w.height();
    }
    if !start.is_null() {
        *start = [w.start().x, w.start().y];
    }
    if !goal.is_null() {
        *goal = [w.goal().x, w.goal().y];
    }
    ToponavStatus::Ok
}

/// # Safety
/// `world` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn toponav_world_is_free(world: *const ToponavWorld, x: i32, y: i32) -> bool {
    world.as_ref().is_some_and(|w| w.inner.is_free(Cell::new(x, y)))
}

/// One move from (x, y). `action` is 0 = N, 1 = E, 2 = S, 3 = W.
///
/// # Safety
/// `world` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn toponav_world_step(
    world: *mut ToponavWorld,
    x: i32,
    y: i32,
    action: u32,
    out: *mut ToponavStep,
) -> ToponavStatus {
    non_null!(world, out);
    let Some(a) = Action::from_index(action as usize) else {
        return fail(ToponavStatus::InvalidArgument, format!("action must be 0..=3, got {action}"));
    };
    let w = &mut *world;
    let o = check!(w.inner.step(Cell::new(x, y), a, &mut w.rng));
    *out = ToponavStep {
        x: o.next_state.x,
        y: o.next_state.y,
        reached_goal: o.events.reached_goal,
        hit_obstacle: o.events.hit_obstacle,
    };
    ToponavStatus::Ok
}

// ---- benchmark ----

/// Checks a TOML configuration document without running anything.
///
/// # Safety
/// `toml` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn toponav_config_validate(toml: *const c_char) -> ToponavStatus {
    non_null!(toml);
    let s = match read_str(toml) {
        Ok(s) => s,
        Err(st) => return st,
    };
    check!(BenchmarkConfig::parse(s));
    ToponavStatus::Ok
}

/// Parses `toml` (null means all defaults) and runs the full benchmark.
///
/// # Safety
/// `toml` must be null or NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn toponav_benchmark_run(toml: *const c_char, out: *mut *mut ToponavBenchmark) -> ToponavStatus {
    non_null!(out);
    let cfg = if toml.is_null() {
        BenchmarkConfig::default()
    } else {
        let s = match read_str(toml) {
            Ok(s) => s,
            Err(st) => return st,
        };
        check!(BenchmarkConfig::parse(s))
    };
    let inner = check!(run_benchmark(&cfg));
    *out = Box::into_raw(Box::new(ToponavBenchmark { inner }));
    ToponavStatus::Ok
}

/// # Safety
/// `bench` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn toponav_benchmark_free(bench: *mut ToponavBenchmark) {
    if !bench.is_null() {
        drop(Box::from_raw(bench));
    }
}

/// # Safety
/// `bench` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn toponav_benchmark_summary(bench: *const ToponavBenchmark, out: *mut ToponavSummary) -> ToponavStatus {
    non_null!(bench, out);
    let s = &(*bench).inner.summary;
    let e = &s.eval;
    *out = ToponavSummary {
        seeds: s.config.seeds.len() as u32,
        success_mean: e.success.mean,
        success_std: e.success.std,
        steps_mean: e.steps.mean,
        trajectory_length_mean: e.trajectory_length.mean,
        coverage_mean: e.coverage.mean,
        coverage_std: e.coverage.std,
    };
    ToponavStatus::Ok
}

/// # Safety
/// `bench` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn toponav_benchmark_record_count(bench: *const ToponavBenchmark) -> usize {
    bench.as_ref().map_or(0, |b| b.inner.records.len())
}

/// Writes episodes.jsonl and summary.json into `dir`.
///
/// # Safety
/// `bench` must be a live handle; `dir` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn toponav_benchmark_export(bench: *const ToponavBenchmark, dir: *const c_char) -> ToponavStatus {
    non_null!(bench, dir);
    let d = match read_str(dir) {
        Ok(s) => s,
        Err(st) => return st,
    };
    check!(export_results(&(*bench).inner, Path::new(d)));
    ToponavStatus::Ok
}
