//! C ABI over `topo-relu`.
//!
//! Every function returns a [`TrStatus`]; results go through out-pointers.
//! Handles are opaque and must be released with the matching `*_free`.
//! After a failure, `tr_last_error_message` describes it (per thread).

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use topo_relu::homology::{betti_numbers, SimplicialComplex};
use topo_relu::indicator_synth::{ball_network, torus_network};
use topo_relu::nerve::{cech_complex, sample_size_bound, PointCloud};
use topo_relu::relu_core::ReluNetwork;
use topo_relu::shapes_sampling::{MeasureSpec, Shape};
use topo_relu::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrStatus {
    Ok = 0,
    InvalidInput = 1,
    DimensionMismatch = 2,
    Composition = 3,
    Precondition = 4,
    Validation = 5,
    Shell = 6,
    Geometry = 7,
    Io = 8,
    Parse = 9,
    NullPointer = 10,
    BufferTooSmall = 11,
    Panic = 12,
}

/// Opaque ReLU network.
pub struct TrNetwork(ReluNetwork);

/// Opaque simplicial complex.
pub struct TrComplex(SimplicialComplex);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> TrStatus {
    match e {
        Error::Input(_) => TrStatus::InvalidInput,
        Error::DimensionMismatch { .. } => TrStatus::DimensionMismatch,
        Error::Composition(_) => TrStatus::Composition,
        Error::Precondition(_) => TrStatus::Precondition,
        Error::Validation(_) => TrStatus::Validation,
        Error::Shell(_) => TrStatus::Shell,
        Error::Geometry(_) => TrStatus::Geometry,
        Error::Io(_) => TrStatus::Io,
        Error::Json(_) | Error::Csv(_) | Error::Parse(_) => TrStatus::Parse,
    }
}

struct Fail(TrStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> TrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            TrStatus::Ok
        }
        Ok(Err(Fail(s, m))) => {
            set_error(m);
            s
        }
        Err(_) => {
            set_error("internal panic".into());
            TrStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(TrStatus::NullPointer, format!("{what} is null"))
}

unsafe fn slice<'a>(p: *const f64, n: usize, what: &str) -> Result<&'a [f64], Fail> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail(TrStatus::Parse, format!("{what} is not UTF-8")))
}

unsafe fn put<T>(out: *mut T, v: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(v);
    Ok(())
}

/// Copies the last error message (NUL-terminated, truncated to fit) into
/// `buf` and returns the full message length without the terminator.
///
/// # Safety
/// `buf` must be null or point to `cap` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn tr_last_error_message(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        if !buf.is_null() && cap > 0 {
            let n = e.len().min(cap - 1);
            ptr::copy_nonoverlapping(e.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        e.len()
    })
}

/// Indicator network of the ball of radius `r` around `center` (length `d`).
/// The shell is certified under the uniform measure on the ball's bounding
/// box enlarged by 1.
///
/// # Safety
/// `center` must point to `d` doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tr_ball_network(
    d: usize,
    r: f64,
    center: *const f64,
    eps: f64,
    out: *mut *mut TrNetwork,
) -> TrStatus {
    guard(|| {
        let c = slice(center, d, "center")?.to_vec();
        let m = MeasureSpec::box_around(&[Shape::ball(c.clone(), r)?], 1.0)?;
        let s = ball_network(d, r, &c, eps, &m)?;
        put(out, Box::into_raw(Box::new(TrNetwork(s.network))), "out")
    })
}

/// Indicator network of the solid torus with tube radius `r` and centre
/// radius `big_r` (an annulus when `d = 2`).
///
/// # Safety
/// `center` must point to `d` doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tr_torus_network(
    d: usize,
    r: f64,
    big_r: f64,
    center: *const f64,
    eps: f64,
    out: *mut *mut TrNetwork,
) -> TrStatus {
    guard(|| {
        let c = slice(center, d, "center")?.to_vec();
        let m = MeasureSpec::box_around(&[Shape::torus(c.clone(), r, big_r)?], 1.0)?;
        let s = torus_network(d, r, big_r, &c, eps, &m)?;
        put(out, Box::into_raw(Box::new(TrNetwork(s.network))), "out")
    })
}

/// Parses a network from its JSON form.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tr_network_from_json(json: *const c_char, out: *mut *mut TrNetwork) -> TrStatus {
    guard(|| {
        let net = ReluNetwork::from_json(text(json, "json")?)?;
        put(out, Box::into_raw(Box::new(TrNetwork(net))), "out")
    })
}

/// Writes the network's JSON form into `buf` (NUL-terminated) and its
/// length into `len`. Fails with `BufferTooSmall` if `cap <= len`; `len` is
/// still set so the caller can retry.
///
/// # Safety
/// `net` must be a live handle, `buf` null or `cap` writable bytes, `len` writable.
#[no_mangle]
pub unsafe extern "C" fn tr_network_to_json(
    net: *const TrNetwork,
    buf: *mut c_char,
    cap: usize,
    len: *mut usize,
) -> TrStatus {
    guard(|| {
        let net = net.as_ref().ok_or_else(|| null("net"))?;
        let s = net.0.to_json()?;
        put(len, s.len(), "len")?;
        if buf.is_null() || cap <= s.len() {
            return Err(Fail(TrStatus::BufferTooSmall, format!("need {} bytes", s.len() + 1)));
        }
        ptr::copy_nonoverlapping(s.as_ptr().cast::<c_char>(), buf, s.len());
        *buf.add(s.len()) = 0;
        Ok(())
    })
}

/// Evaluates a network at `x` (length `n`), writing its outputs to `y`
/// (capacity `cap`).
///
/// # Safety
/// `net` must be a live handle; `x` must hold `n` doubles and `y` `cap`.
#[no_mangle]
pub unsafe extern "C" fn tr_network_eval(
    net: *const TrNetwork,
    x: *const f64,
    n: usize,
    y: *mut f64,
    cap: usize,
) -> TrStatus {
    guard(|| {
        let net = net.as_ref().ok_or_else(|| null("net"))?;
        let v = net.0.eval(slice(x, n, "x")?)?;
        if y.is_null() {
            return Err(null("y"));
        }
        if cap < v.len() {
            return Err(Fail(TrStatus::BufferTooSmall, format!("need {} outputs", v.len())));
        }
        ptr::copy_nonoverlapping(v.as_ptr(), y, v.len());
        Ok(())
    })
}

/// Hidden-unit count, affine-layer count and input dimension.
///
/// # Safety
/// `net` must be a live handle; the out-pointers may be null.
#[no_mangle]
pub unsafe extern "C" fn tr_network_shape(
    net: *const TrNetwork,
    size: *mut usize,
    depth: *mut usize,
    input_dim: *mut usize,
) -> TrStatus {
    guard(|| {
        let net = net.as_ref().ok_or_else(|| null("net"))?;
        if !size.is_null() {
            *size = net.0.size();
        }
        if !depth.is_null() {
            *depth = net.0.depth();
        }
        if !input_dim.is_null() {
            *input_dim = net.0.input_dim();
        }
        Ok(())
    })
}

/// # Safety
/// `net` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tr_network_free(net: *mut TrNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Parses a complex (one simplex per line, vertex ids separated by spaces).
///
/// # Safety
/// `src` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tr_complex_parse(src: *const c_char, out: *mut *mut TrComplex) -> TrStatus {
    guard(|| {
        let k = SimplicialComplex::parse(text(src, "text")?)?;
        put(out, Box::into_raw(Box::new(TrComplex(k))), "out")
    })
}

/// Cech complex of `n` points in `R^dim` (row-major in `points`) at radius
/// `r` with simplices up to dimension `max_dim`.
///
/// # Safety
/// `points` must hold `n * dim` doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tr_cech_complex(
    points: *const f64,
    n: usize,
    dim: usize,
    r: f64,
    max_dim: usize,
    out: *mut *mut TrComplex,
) -> TrStatus {
    guard(|| {
        let total = n.checked_mul(dim).ok_or_else(|| Fail(TrStatus::InvalidInput, "n * dim overflows".into()))?;
        let flat = slice(points, total, "points")?;
        let rows = flat.chunks(dim.max(1)).map(<[f64]>::to_vec).collect();
        let cloud = PointCloud::new(rows, None)?;
        let k = cech_complex(&cloud, r, max_dim)?;
        put(out, Box::into_raw(Box::new(TrComplex(k))), "out")
    })
}

/// Total number of simplices.
///
/// # Safety
/// `k` must be a live handle and `count` writable.
#[no_mangle]
pub unsafe extern "C" fn tr_complex_num_simplices(k: *const TrComplex, count: *mut usize) -> TrStatus {
    guard(|| {
        let k = k.as_ref().ok_or_else(|| null("complex"))?;
        put(count, k.0.num_simplices(), "count")
    })
}

/// Betti numbers over GF(2). `len` receives the number of entries; fails
/// with `BufferTooSmall` when `cap` is smaller.
///
/// # Safety
/// `k` must be a live handle, `betti` hold `cap` entries, `len` writable.
#[no_mangle]
pub unsafe extern "C" fn tr_complex_betti(
    k: *const TrComplex,
    betti: *mut usize,
    cap: usize,
    len: *mut usize,
) -> TrStatus {
    guard(|| {
        let k = k.as_ref().ok_or_else(|| null("complex"))?;
        let b = betti_numbers(&k.0)?.betti;
        put(len, b.len(), "len")?;
        if cap < b.len() {
            return Err(Fail(TrStatus::BufferTooSmall, format!("need {} entries", b.len())));
        }
        if !b.is_empty() {
            if betti.is_null() {
                return Err(null("betti"));
            }
            ptr::copy_nonoverlapping(b.as_ptr(), betti, b.len());
        }
        Ok(())
    })
}

/// # Safety
/// `k` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tr_complex_free(k: *mut TrComplex) {
    if !k.is_null() {
        drop(Box::from_raw(k));
    }
}

/// Number of samples sufficient to recover the homology of a `d`-manifold
/// of volume `vol` and reach `tau` from `eps`-balls with confidence
/// `1 - delta`. Requires `0 < eps < tau / 2`.
///
/// # Safety
/// `n_required` must be writable; `value` may be null.
#[no_mangle]
pub unsafe extern "C" fn tr_sample_size_bound(
    vol: f64,
    d: usize,
    tau: f64,
    eps: f64,
    delta: f64,
    n_required: *mut u64,
    value: *mut f64,
) -> TrStatus {
    guard(|| {
        let rep = sample_size_bound(vol, d, tau, eps, delta)?;
        put(n_required, rep.n_required, "n_required")?;
        if !value.is_null() {
            *value = rep.bound_value;
        }
        Ok(())
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
