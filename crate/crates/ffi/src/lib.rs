//! C ABI over `hopbound`.
//!
//! Every fallible call returns an [`HbStatus`]; on failure the message is
//! kept per thread and read with [`hb_last_error`]. Graphs and envelopes are
//! opaque handles released with their `_free` function. Strings returned by
//! the library are released with [`hb_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::io::BufReader;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use hopbound::envelope::{self, EnvelopeSpec};
use hopbound::exec::{build_pipeline, simulate_iteration, CostModel, Strategy};
use hopbound::graph::{self, CsrGraph, EdgeListOptions, GraphGenSpec};
use hopbound::sampler::{iteration_metadata, IterationMetadata, SampleConfig};
use hopbound::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HbStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    Parse = 3,
    Io = 4,
    Capacity = 5,
    ReplayInvalidated = 6,
    Logic = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HbStrategy {
    HostMediated = 0,
    DevicePilot = 1,
    Replay = 2,
}

impl From<HbStrategy> for Strategy {
    fn from(s: HbStrategy) -> Self {
        match s {
            HbStrategy::HostMediated => Strategy::HostMediated,
            HbStrategy::DevicePilot => Strategy::DevicePilot,
            HbStrategy::Replay => Strategy::Replay,
        }
    }
}

/// Per-iteration simulated cost. `gpu_execution_fraction` is negative when
/// the strategy is profile-opaque.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct HbExecMetrics {
    pub end_to_end: f64,
    pub gpu_time: f64,
    pub host_time: f64,
    pub gpu_execution_fraction: f64,
    pub launches: u64,
    pub syncs: u64,
}

/// Opaque CSR graph.
pub struct HbGraph(CsrGraph);

/// Opaque execution envelope.
pub struct HbEnvelope(EnvelopeSpec);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> HbStatus {
    match e {
        Error::Parse { .. } | Error::Format(_) | Error::Json(_) => HbStatus::Parse,
        Error::Io(_) => HbStatus::Io,
        Error::Capacity { .. } => HbStatus::Capacity,
        Error::ReplayInvalidated(_) => HbStatus::ReplayInvalidated,
        Error::Logic(_) => HbStatus::Logic,
        _ => HbStatus::InvalidArgument,
    }
}

struct Fail(HbStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(HbStatus::NullArgument, format!("`{what}` is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> HbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            HbStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside hopbound".into());
            HbStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(HbStatus::InvalidArgument, format!("`{what}` is not UTF-8")))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn sample_config(
    batch_size: usize,
    fanouts: *const usize,
    hops: usize,
    seed: u64,
) -> Result<SampleConfig, Fail> {
    let cfg = SampleConfig::new(
        batch_size,
        slice_arg(fanouts, hops, "fanouts")?.to_vec(),
        seed,
    );
    cfg.validate()?;
    Ok(cfg)
}

unsafe fn metadata_arg(
    batch_size: usize,
    vertex_counts: *const usize,
    edge_counts: *const usize,
    hops: usize,
) -> Result<IterationMetadata, Fail> {
    let v = slice_arg(vertex_counts, hops, "vertex_counts")?.to_vec();
    let e = slice_arg(edge_counts, hops, "edge_counts")?.to_vec();
    Ok(IterationMetadata {
        batch_size,
        total_unique_vertices: v.last().copied().unwrap_or(batch_size),
        total_edges: e.iter().sum(),
        per_hop_vertex_counts: v,
        per_hop_edge_counts: e,
    })
}

fn into_string(s: String) -> *mut c_char {
    CString::new(s).map_or(ptr::null_mut(), CString::into_raw)
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call on the same thread.
#[no_mangle]
pub extern "C" fn hb_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn hb_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Chung-Lu power-law graph with `num_edges` directed edge slots.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hb_graph_power_law(
    num_vertices: usize,
    num_edges: u64,
    exponent: f64,
    seed: u64,
    out: *mut *mut HbGraph,
) -> HbStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let g = graph::generate(
            &GraphGenSpec::power_law(num_vertices, num_edges, exponent),
            seed,
        )?;
        *out = Box::into_raw(Box::new(HbGraph(g)));
        Ok(())
    })
}

/// Graph from a JSON generator spec.
///
/// # Safety
/// `spec_json` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hb_graph_generate(
    spec_json: *const c_char,
    seed: u64,
    out: *mut *mut HbGraph,
) -> HbStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let spec: GraphGenSpec =
            serde_json::from_str(str_arg(spec_json, "spec_json")?).map_err(Error::from)?;
        *out = Box::into_raw(Box::new(HbGraph(graph::generate(&spec, seed)?)));
        Ok(())
    })
}

/// Loads a whitespace edge list (`symmetric` adds reverse edges) or, when
/// `binary` is set, the CSR binary format.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hb_graph_load(
    path: *const c_char,
    binary: bool,
    symmetric: bool,
    out: *mut *mut HbGraph,
) -> HbStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let reader = BufReader::new(File::open(str_arg(path, "path")?).map_err(Error::from)?);
        let g = if binary {
            graph::read_binary(reader)?
        } else {
            let opts = EdgeListOptions {
                symmetric,
                ..Default::default()
            };
            graph::load_edge_list(reader, &opts)?
        };
        *out = Box::into_raw(Box::new(HbGraph(g)));
        Ok(())
    })
}

/// # Safety
/// `g` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn hb_graph_free(g: *mut HbGraph) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// # Safety
/// `g` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn hb_graph_num_vertices(g: *const HbGraph) -> usize {
    g.as_ref().map_or(0, |g| g.0.num_vertices())
}

/// # Safety
/// `g` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn hb_graph_num_edges(g: *const HbGraph) -> usize {
    g.as_ref().map_or(0, |g| g.0.num_edges())
}

/// Samples iteration `iteration` and writes the cumulative unique-vertex
/// count and the edge count of each hop into the `hops`-long output arrays.
///
/// # Safety
/// `fanouts` must hold `hops` values; both outputs must hold `hops` slots.
#[no_mangle]
pub unsafe extern "C" fn hb_sample_metadata(
    g: *const HbGraph,
    batch_size: usize,
    fanouts: *const usize,
    hops: usize,
    seed: u64,
    iteration: u64,
    vertex_counts: *mut usize,
    edge_counts: *mut usize,
) -> HbStatus {
    guard(|| {
        let g = ref_arg(g, "graph")?;
        let cfg = sample_config(batch_size, fanouts, hops, seed)?;
        if vertex_counts.is_null() || edge_counts.is_null() {
            return Err(null("counts"));
        }
        let meta = iteration_metadata(&g.0, &cfg, iteration)?;
        slice::from_raw_parts_mut(vertex_counts, hops).copy_from_slice(&meta.per_hop_vertex_counts);
        slice::from_raw_parts_mut(edge_counts, hops).copy_from_slice(&meta.per_hop_edge_counts);
        Ok(())
    })
}

/// Standard normal quantile.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hb_normal_quantile(q: f64, out: *mut f64) -> HbStatus {
    guard(|| {
        *out_arg(out, "out")? = envelope::normal_quantile(q)?;
        Ok(())
    })
}

/// Quantile holding jointly over `m` repetitions at confidence `p`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hb_repetition_quantile(p: f64, m: u64, out: *mut f64) -> HbStatus {
    guard(|| {
        *out_arg(out, "out")? = envelope::repetition_quantile(p, m)?;
        Ok(())
    })
}

/// # Safety
/// `g` must be a live handle, `fanouts` must hold `hops` values and `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn hb_envelope_compute(
    g: *const HbGraph,
    batch_size: usize,
    fanouts: *const usize,
    hops: usize,
    confidence: f64,
    repetitions: u64,
    safety_factor: f64,
    out: *mut *mut HbEnvelope,
) -> HbStatus {
    guard(|| {
        let g = ref_arg(g, "graph")?;
        let out = out_arg(out, "out")?;
        let cfg = sample_config(batch_size, fanouts, hops, 0)?;
        let env = envelope::compute_envelope(&g.0, &cfg, confidence, repetitions, safety_factor)?;
        *out = Box::into_raw(Box::new(HbEnvelope(env)));
        Ok(())
    })
}

/// # Safety
/// `e` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn hb_envelope_free(e: *mut HbEnvelope) {
    if !e.is_null() {
        drop(Box::from_raw(e));
    }
}

/// # Safety
/// `e` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn hb_envelope_hops(e: *const HbEnvelope) -> usize {
    e.as_ref().map_or(0, |e| e.0.hops())
}

/// Vertex and edge bounds of 1-based hop `hop`.
///
/// # Safety
/// `e` must be a live handle; both outputs writable.
#[no_mangle]
pub unsafe extern "C" fn hb_envelope_bounds(
    e: *const HbEnvelope,
    hop: usize,
    v_max: *mut usize,
    e_max: *mut usize,
) -> HbStatus {
    guard(|| {
        let env = &ref_arg(e, "envelope")?.0;
        if hop == 0 || hop > env.hops() {
            return Err(Error::Index {
                index: hop,
                limit: env.hops(),
            }
            .into());
        }
        *out_arg(v_max, "v_max")? = env.v_max_per_hop[hop - 1];
        *out_arg(e_max, "e_max")? = env.e_max_per_hop[hop - 1];
        Ok(())
    })
}

/// Envelope as JSON; free with [`hb_string_free`]. Null on failure.
///
/// # Safety
/// `e` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn hb_envelope_to_json(e: *const HbEnvelope) -> *mut c_char {
    let mut s = None;
    let status = guard(|| {
        s = Some(ref_arg(e, "envelope")?.0.to_json()?);
        Ok(())
    });
    match (status, s) {
        (HbStatus::Ok, Some(s)) => into_string(s),
        _ => ptr::null_mut(),
    }
}

/// Sets `overflow` when any hop's counts exceed the envelope.
///
/// # Safety
/// `e` must be a live handle; the count arrays hold `hops` values.
#[no_mangle]
pub unsafe extern "C" fn hb_envelope_overflows(
    e: *const HbEnvelope,
    vertex_counts: *const usize,
    edge_counts: *const usize,
    hops: usize,
    overflow: *mut bool,
) -> HbStatus {
    guard(|| {
        let env = &ref_arg(e, "envelope")?.0;
        let meta = metadata_arg(env.batch_size, vertex_counts, edge_counts, hops)?;
        *out_arg(overflow, "overflow")? = envelope::overflows(&meta, env)?;
        Ok(())
    })
}

/// Simulates one iteration under the default calibration. `e` may be null
/// except for [`HbStrategy::Replay`].
///
/// # Safety
/// `fanouts` and the count arrays hold `hops` values; `e` is null or live;
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hb_simulate_iteration(
    strategy: HbStrategy,
    batch_size: usize,
    fanouts: *const usize,
    hops: usize,
    layers: usize,
    feature_dim: usize,
    vertex_counts: *const usize,
    edge_counts: *const usize,
    e: *const HbEnvelope,
    out: *mut HbExecMetrics,
) -> HbStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let cfg = sample_config(batch_size, fanouts, hops, 0)?;
        let meta = metadata_arg(batch_size, vertex_counts, edge_counts, hops)?;
        let cost = CostModel::default_calibration();
        let pipeline = build_pipeline(&cfg, layers, feature_dim, &cost)?;
        let env = e.as_ref().map(|e| &e.0);
        let m = simulate_iteration(&pipeline, strategy.into(), &meta, env, &cost)?;
        *out = HbExecMetrics {
            end_to_end: m.end_to_end,
            gpu_time: m.gpu_time,
            host_time: m.host_time,
            gpu_execution_fraction: m.reported_fraction().unwrap_or(-1.0),
            launches: m.launches,
            syncs: m.syncs,
        };
        Ok(())
    })
}
