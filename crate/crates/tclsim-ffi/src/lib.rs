//! C ABI over the tclsim core.
//!
//! Conventions: every fallible call returns a `TclStatus`; `TCL_STATUS_OK`
//! is zero. On failure a thread-local message is set, readable through
//! `tcl_last_error_message`. Tensors and promotion patterns live behind
//! opaque handles with explicit `_free` functions; plain-old-data structs
//! (`TclLayer`, `TclArch`, `TclReport`) cross the boundary by value.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use libc::{c_char, c_double};
use tclsim::{
    cycles_dcnn, dense_conv, ideal_speedups, simulate_layer, simulate_scnn, ArchConfig, ArchMode,
    Error, LayerSpec, PromotionPattern, ScnnConfig, Tensor, Tensor16,
};

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TclStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    Shape = 2,
    Format = 3,
    Precision = 4,
    CorruptSchedule = 5,
    Config = 6,
    Manifest = 7,
    Io = 8,
    Json = 9,
    /// The operation panicked (e.g. accumulator overflow in `tcl_dense_conv`).
    Panic = 10,
}

/// Opaque rank-N tensor of 16-bit values.
pub struct TclTensor(Tensor16);

/// Opaque promotion pattern.
pub struct TclPattern(PromotionPattern);

/// Layer geometry. `relu` is 0 or 1; `precision_bits` is 1..=16.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct TclLayer {
    pub ax: u32,
    pub ay: u32,
    pub c: u32,
    pub fx: u32,
    pub fy: u32,
    pub kk: u32,
    pub stride: u32,
    pub relu: u8,
    pub precision_bits: u8,
}

/// Which datapath `tcl_simulate_layer` prices.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TclArchMode {
    Dcnn = 0,
    TclWs = 1,
    TclP = 2,
    TclE = 3,
}

/// Machine geometry. `max_shift_delta < 0` means unrestricted.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct TclArch {
    pub lanes: u32,
    pub filters_per_tile: u32,
    pub tiles: u32,
    pub windows_parallel: u32,
    pub mode: TclArchMode,
    pub max_shift_delta: i32,
}

/// Cycle counts and activity counters for one layer on one machine.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct TclReport {
    pub cycles: u64,
    pub dcnn_cycles: u64,
    pub speedup_vs_dcnn: f64,
    pub macs_executed: u64,
    pub columns_fetched: u64,
    pub bubbles: u64,
    pub activation_bits_broadcast: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let owned = CString::new(msg.replace('\0', "?")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = owned);
}

fn fail(err: Error) -> TclStatus {
    set_error(&err.to_string());
    match err {
        Error::Shape(_) => TclStatus::Shape,
        Error::Format(_) => TclStatus::Format,
        Error::Precision { .. } => TclStatus::Precision,
        Error::CorruptSchedule(_) => TclStatus::CorruptSchedule,
        Error::Config(_) => TclStatus::Config,
        Error::Manifest(_) => TclStatus::Manifest,
        Error::Io { .. } => TclStatus::Io,
        Error::Json { .. } => TclStatus::Json,
    }
}

fn null_arg(what: &str) -> TclStatus {
    set_error(&format!("{what} must not be null"));
    TclStatus::NullArgument
}

/// Run `f`, converting panics into `TclStatus::Panic`.
fn guarded(f: impl FnOnce() -> TclStatus) -> TclStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            set_error(&msg);
            TclStatus::Panic
        }
    }
}

/// Message describing the most recent failure on this thread. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn tcl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

fn layer_spec(l: &TclLayer) -> LayerSpec {
    LayerSpec {
        ax: l.ax as usize,
        ay: l.ay as usize,
        c: l.c as usize,
        fx: l.fx as usize,
        fy: l.fy as usize,
        kk: l.kk as usize,
        stride: l.stride as usize,
        relu: l.relu != 0,
        precision_bits: l.precision_bits,
    }
}

/// The default machine: 16 lanes, 16 filters/tile, 4 tiles, 16
/// parallel windows, dense mode, unrestricted shifts.
#[no_mangle]
pub extern "C" fn tcl_arch_default() -> TclArch {
    TclArch {
        lanes: 16,
        filters_per_tile: 16,
        tiles: 4,
        windows_parallel: 16,
        mode: TclArchMode::Dcnn,
        max_shift_delta: -1,
    }
}

fn arch_config(arch: &TclArch, pattern: Option<&TclPattern>) -> Result<ArchConfig, Error> {
    let mode = match arch.mode {
        TclArchMode::Dcnn => ArchMode::Dcnn,
        TclArchMode::TclWs => ArchMode::TclWs,
        TclArchMode::TclP => ArchMode::TclP,
        TclArchMode::TclE => ArchMode::TclE,
    };
    if arch.max_shift_delta > u8::MAX as i32 {
        return Err(Error::Config(format!(
            "max_shift_delta {} exceeds 255",
            arch.max_shift_delta
        )));
    }
    let lanes = arch.lanes as usize;
    let pattern = match pattern {
        // Re-validate against this machine's lane count.
        Some(p) => PromotionPattern::new(p.0.lookahead(), p.0.sites().to_vec(), lanes)?,
        None => PromotionPattern::none(),
    };
    Ok(ArchConfig {
        lanes,
        filters_per_tile: arch.filters_per_tile as usize,
        tiles: arch.tiles as usize,
        windows_parallel: arch.windows_parallel as usize,
        pattern,
        mode,
        max_shift_delta: if arch.max_shift_delta < 0 {
            None
        } else {
            Some(arch.max_shift_delta as u8)
        },
        ..ArchConfig::default()
    })
}

unsafe fn cstr<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, TclStatus> {
    if ptr.is_null() {
        return Err(null_arg(what));
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error(&format!("{what} is not valid UTF-8"));
        TclStatus::Format
    })
}

// ---------------------------------------------------------------- tensors

/// Load a TCLT file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be a valid pointer.
/// On success `*out` owns a tensor that must be released with
/// [`tcl_tensor_free`].
#[no_mangle]
pub unsafe extern "C" fn tcl_tensor_load(
    path: *const c_char,
    out: *mut *mut TclTensor,
) -> TclStatus {
    if out.is_null() {
        return null_arg("out");
    }
    let path = match cstr(path, "path") {
        Ok(p) => p,
        Err(s) => return s,
    };
    match tclsim::load_tensor(Path::new(path)) {
        Ok(t) => {
            *out = Box::into_raw(Box::new(TclTensor(t)));
            TclStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Write a tensor as a TCLT file.
///
/// # Safety
/// `tensor` must come from this library and be live; `path` must be a
/// NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn tcl_tensor_save(
    tensor: *const TclTensor,
    path: *const c_char,
) -> TclStatus {
    let Some(tensor) = tensor.as_ref() else {
        return null_arg("tensor");
    };
    let path = match cstr(path, "path") {
        Ok(p) => p,
        Err(s) => return s,
    };
    match tclsim::save_tensor(&tensor.0, Path::new(path)) {
        Ok(()) => TclStatus::Ok,
        Err(e) => fail(e),
    }
}

/// Build a tensor from a dims/data copy. `len` must equal the product of the
/// `rank` extents.
///
/// # Safety
/// `dims` must point to `rank` readable u32 values, `data` to `len` readable
/// i16 values, and `out` must be valid. The data is copied.
#[no_mangle]
pub unsafe extern "C" fn tcl_tensor_from_data(
    dims: *const u32,
    rank: usize,
    data: *const i16,
    len: usize,
    out: *mut *mut TclTensor,
) -> TclStatus {
    if (dims.is_null() && rank > 0) || (data.is_null() && len > 0) || out.is_null() {
        return null_arg("dims/data/out");
    }
    let dims: Vec<usize> = if rank == 0 {
        Vec::new()
    } else {
        std::slice::from_raw_parts(dims, rank)
            .iter()
            .map(|&d| d as usize)
            .collect()
    };
    let data = if len == 0 {
        Vec::new()
    } else {
        std::slice::from_raw_parts(data, len).to_vec()
    };
    match Tensor::new(dims, data) {
        Ok(t) => {
            *out = Box::into_raw(Box::new(TclTensor(t)));
            TclStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Number of dimensions, or 0 for null.
///
/// # Safety
/// `tensor` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn tcl_tensor_rank(tensor: *const TclTensor) -> usize {
    tensor.as_ref().map_or(0, |t| t.0.dims().len())
}

/// Copy the extents into `out` (`cap` must be >= rank).
///
/// # Safety
/// `tensor` must be a live handle; `out` must hold `cap` writable u32 slots.
#[no_mangle]
pub unsafe extern "C" fn tcl_tensor_dims(
    tensor: *const TclTensor,
    out: *mut u32,
    cap: usize,
) -> TclStatus {
    let Some(tensor) = tensor.as_ref() else {
        return null_arg("tensor");
    };
    if out.is_null() {
        return null_arg("out");
    }
    let dims = tensor.0.dims();
    if cap < dims.len() {
        set_error(&format!("dims capacity {cap} < rank {}", dims.len()));
        return TclStatus::Shape;
    }
    for (i, &d) in dims.iter().enumerate() {
        *out.add(i) = d as u32;
    }
    TclStatus::Ok
}

/// Total element count, or 0 for null.
///
/// # Safety
/// `tensor` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tcl_tensor_len(tensor: *const TclTensor) -> usize {
    tensor.as_ref().map_or(0, |t| t.0.len())
}

/// Borrow the elements (row-major). Valid while the tensor is live.
///
/// # Safety
/// `tensor` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tcl_tensor_data(tensor: *const TclTensor) -> *const i16 {
    tensor.as_ref().map_or(ptr::null(), |t| t.0.data().as_ptr())
}

/// Release a tensor. Null is a no-op.
///
/// # Safety
/// `tensor` must be null or an unfreed handle from this library.
#[no_mangle]
pub unsafe extern "C" fn tcl_tensor_free(tensor: *mut TclTensor) {
    if !tensor.is_null() {
        drop(Box::from_raw(tensor));
    }
}

// --------------------------------------------------------------- patterns

/// Build the contiguous pattern with `h` lookahead steps and `d` lookaside
/// lanes for an `lanes`-lane machine.
///
/// # Safety
/// `out` must be valid; the result must be released with
/// [`tcl_pattern_free`].
#[no_mangle]
pub unsafe extern "C" fn tcl_pattern_contiguous(
    h: usize,
    d: usize,
    lanes: usize,
    out: *mut *mut TclPattern,
) -> TclStatus {
    if out.is_null() {
        return null_arg("out");
    }
    match PromotionPattern::contiguous(h, d, lanes) {
        Ok(p) => {
            *out = Box::into_raw(Box::new(TclPattern(p)));
            TclStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Parse the pattern-file format (`h=N` header, `dl,ds` lines).
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn tcl_pattern_parse(
    text: *const c_char,
    lanes: usize,
    out: *mut *mut TclPattern,
) -> TclStatus {
    if out.is_null() {
        return null_arg("out");
    }
    let text = match cstr(text, "text") {
        Ok(t) => t,
        Err(s) => return s,
    };
    match PromotionPattern::parse(text, lanes) {
        Ok(p) => {
            *out = Box::into_raw(Box::new(TclPattern(p)));
            TclStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Render to the pattern-file format. Free the string with
/// [`tcl_string_free`]. Returns null for a null pattern.
///
/// # Safety
/// `pattern` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tcl_pattern_render(pattern: *const TclPattern) -> *mut c_char {
    pattern.as_ref().map_or(ptr::null_mut(), |p| {
        CString::new(p.0.render()).map_or(ptr::null_mut(), CString::into_raw)
    })
}

/// Number of promotion sites, or 0 for null.
///
/// # Safety
/// `pattern` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tcl_pattern_site_count(pattern: *const TclPattern) -> usize {
    pattern.as_ref().map_or(0, |p| p.0.sites().len())
}

/// Release a pattern. Null is a no-op.
///
/// # Safety
/// `pattern` must be null or an unfreed handle from this library.
#[no_mangle]
pub unsafe extern "C" fn tcl_pattern_free(pattern: *mut TclPattern) {
    if !pattern.is_null() {
        drop(Box::from_raw(pattern));
    }
}

/// Release a string returned by this library. Null is a no-op.
///
/// # Safety
/// `s` must be null or an unfreed string allocated by this library.
#[no_mangle]
pub unsafe extern "C" fn tcl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

// ------------------------------------------------------------- simulation

/// Price one layer. `pattern` may be null (no promotion); `activations` may
/// be null except for the serial modes.
///
/// # Safety
/// All non-null handles must be live; `layer`, `arch`, and `out` must point
/// to valid structs.
#[no_mangle]
pub unsafe extern "C" fn tcl_simulate_layer(
    layer: *const TclLayer,
    arch: *const TclArch,
    pattern: *const TclPattern,
    weights: *const TclTensor,
    activations: *const TclTensor,
    out: *mut TclReport,
) -> TclStatus {
    let (Some(layer), Some(arch), Some(weights)) =
        (layer.as_ref(), arch.as_ref(), weights.as_ref())
    else {
        return null_arg("layer/arch/weights");
    };
    if out.is_null() {
        return null_arg("out");
    }
    let spec = layer_spec(layer);
    let cfg = match arch_config(arch, pattern.as_ref()) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    let acts = activations.as_ref().map(|a| &a.0);
    guarded(|| match simulate_layer(&spec, &weights.0, acts, &cfg) {
        Ok(rep) => {
            *out = TclReport {
                cycles: rep.cycles,
                dcnn_cycles: cycles_dcnn(&spec, &cfg),
                speedup_vs_dcnn: rep.speedup_vs_dcnn,
                macs_executed: rep.counters.macs_executed,
                columns_fetched: rep.counters.columns_fetched,
                bubbles: rep.counters.bubbles,
                activation_bits_broadcast: rep.counters.activation_bits_broadcast,
            };
            TclStatus::Ok
        }
        Err(e) => fail(e),
    })
}

/// Price one layer on the default SCNN-style machine.
///
/// # Safety
/// `layer` and `out` must be valid; `weights` and `activations` must be live
/// handles.
#[no_mangle]
pub unsafe extern "C" fn tcl_simulate_scnn(
    layer: *const TclLayer,
    weights: *const TclTensor,
    activations: *const TclTensor,
    out: *mut TclReport,
) -> TclStatus {
    let (Some(layer), Some(weights), Some(activations)) =
        (layer.as_ref(), weights.as_ref(), activations.as_ref())
    else {
        return null_arg("layer/weights/activations");
    };
    if out.is_null() {
        return null_arg("out");
    }
    let spec = layer_spec(layer);
    guarded(
        || match simulate_scnn(&spec, &weights.0, &activations.0, &ScnnConfig::default()) {
            Ok(rep) => {
                *out = TclReport {
                    cycles: rep.cycles,
                    dcnn_cycles: cycles_dcnn(&spec, &ArchConfig::default()),
                    speedup_vs_dcnn: rep.speedup_vs_dcnn,
                    macs_executed: rep.counters.macs_executed,
                    columns_fetched: rep.counters.columns_fetched,
                    bubbles: rep.counters.bubbles,
                    activation_bits_broadcast: rep.counters.activation_bits_broadcast,
                };
                TclStatus::Ok
            }
            Err(e) => fail(e),
        },
    )
}

/// Ideal speedups from skipping ineffectual work, written to `out[0..5]` in
/// the order A, W, WA, WAp, WAe. Unbounded ratios come out as +infinity.
///
/// # Safety
/// `layer` must be valid, the tensors live, and `out` must hold 5 writable
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn tcl_potential(
    layer: *const TclLayer,
    weights: *const TclTensor,
    activations: *const TclTensor,
    out: *mut c_double,
) -> TclStatus {
    let (Some(layer), Some(weights), Some(activations)) =
        (layer.as_ref(), weights.as_ref(), activations.as_ref())
    else {
        return null_arg("layer/weights/activations");
    };
    if out.is_null() {
        return null_arg("out");
    }
    let spec = layer_spec(layer);
    guarded(|| match ideal_speedups(&spec, &weights.0, &activations.0) {
        Ok(rep) => {
            let values = [
                rep.speedup_a.as_f64(),
                rep.speedup_w.as_f64(),
                rep.speedup_wa.as_f64(),
                rep.speedup_wap.as_f64(),
                rep.speedup_wae.as_f64(),
            ];
            for (i, v) in values.into_iter().enumerate() {
                *out.add(i) = v;
            }
            TclStatus::Ok
        }
        Err(e) => fail(e),
    })
}

/// Dense convolution reference. `out_len` must equal Ox*Oy*K; the output is
/// written window-row-major. Accumulator overflow reports `Panic`.
///
/// # Safety
/// `layer` must be valid, the tensors live, and `out` must hold `out_len`
/// writable i32 values.
#[no_mangle]
pub unsafe extern "C" fn tcl_dense_conv(
    layer: *const TclLayer,
    weights: *const TclTensor,
    activations: *const TclTensor,
    out: *mut i32,
    out_len: usize,
) -> TclStatus {
    let (Some(layer), Some(weights), Some(activations)) =
        (layer.as_ref(), weights.as_ref(), activations.as_ref())
    else {
        return null_arg("layer/weights/activations");
    };
    if out.is_null() {
        return null_arg("out");
    }
    let spec = layer_spec(layer);
    guarded(|| match dense_conv(&spec, &weights.0, &activations.0) {
        Ok(result) => {
            if result.len() != out_len {
                set_error(&format!(
                    "out_len {out_len} does not match output size {}",
                    result.len()
                ));
                return TclStatus::Shape;
            }
            ptr::copy_nonoverlapping(result.data().as_ptr(), out, out_len);
            TclStatus::Ok
        }
        Err(e) => fail(e),
    })
}
