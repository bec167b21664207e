//! C ABI over `projforget`.
//!
//! Objects are opaque handles created by `pf_*_new`/`pf_*_solve`/`pf_*_fit`
//! and released with the matching `pf_*_free`. Every fallible call returns a
//! [`PfStatus`]; on failure `pf_last_error()` describes the problem. Results
//! are written through out-pointers, which are left untouched on failure.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::slice;

use projforget::clustering::{self, CcSchedule, SignedGraph};
use projforget::metric_learning::{self, ItmlParams, PairSets};
use projforget::nearness::{self, NearnessInstance};
use projforget::solver::{write_trace_csv, TraceRecord};
use projforget::{io, Error, WeightedGraph};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    NegativeWeight = 4,
    Parse = 5,
    Io = 6,
    Numerical = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<Vec<u8>>) {
    let mut bytes = msg.into();
    bytes.retain(|&b| b != 0);
    let c = CString::new(bytes).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> PfStatus {
    match err {
        Error::DimensionMismatch { .. } => PfStatus::DimensionMismatch,
        Error::InvalidArgument(_) => PfStatus::InvalidArgument,
        Error::NegativeWeight { .. } => PfStatus::NegativeWeight,
        Error::Parse { .. } => PfStatus::Parse,
        Error::Io { .. } => PfStatus::Io,
        _ => PfStatus::Numerical,
    }
}

struct Fail(PfStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(PfStatus::NullPointer, format!("{what} is null"))
}

fn guard(body: impl FnOnce() -> Result<(), Fail>) -> PfStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => PfStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            PfStatus::Panic
        }
    }
}

/// # Safety
/// `p` must be null or point to `len` readable values.
unsafe fn view<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn path_arg<'a>(p: *const c_char) -> Result<&'a Path, Fail> {
    if p.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(Path::new)
        .map_err(|_| Fail(PfStatus::InvalidArgument, "path is not valid UTF-8".into()))
}

fn store<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("out"));
    }
    unsafe { *out = Box::into_raw(Box::new(value)) };
    Ok(())
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn pf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Weighted undirected graph. Edges are stored in lexicographic `(u, v)`
/// order with `u < v`, which is also the order of solution vectors.
pub struct PfGraph {
    inner: WeightedGraph,
}

/// Graph with a similarity and a dissimilarity weight per edge.
pub struct PfSignedGraph {
    inner: SignedGraph,
}

/// Result of a solve or fit.
pub struct PfSolution {
    x: Vec<f64>,
    converged: bool,
    iterations: usize,
    objective: f64,
    ratio: f64,
    trace: Vec<TraceRecord>,
}

/// Builds a graph from `m` edges `(us[i], vs[i])` with weights `w[i]`.
///
/// # Safety
/// Array arguments must hold `m` elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pf_graph_new(
    n: usize,
    m: usize,
    us: *const usize,
    vs: *const usize,
    w: *const f64,
    out: *mut *mut PfGraph,
) -> PfStatus {
    guard(|| {
        let (us, vs, w) = (view(us, m, "us")?, view(vs, m, "vs")?, view(w, m, "w")?);
        let edges: Vec<_> = (0..m).map(|i| (us[i], vs[i], w[i])).collect();
        store(
            out,
            PfGraph {
                inner: WeightedGraph::new(n, &edges)?,
            },
        )
    })
}

/// Reads a `u v w` edge list.
///
/// # Safety
/// `path` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pf_graph_read(path: *const c_char, out: *mut *mut PfGraph) -> PfStatus {
    guard(|| {
        let p = path_arg(path)?;
        store(
            out,
            PfGraph {
                inner: io::read_edge_list(p)?,
            },
        )
    })
}

/// # Safety
/// `g` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn pf_graph_edge_count(g: *const PfGraph) -> usize {
    g.as_ref().map_or(0, |g| g.inner.graph.edge_count())
}

/// # Safety
/// `g` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn pf_graph_node_count(g: *const PfGraph) -> usize {
    g.as_ref().map_or(0, |g| g.inner.graph.node_count())
}

/// Copies the edge endpoints in storage order into `us` and `vs`, which
/// must have room for `len >= edge count` entries.
///
/// # Safety
/// `g` must be a live handle; `us` and `vs` must be writable for `len` values.
#[no_mangle]
pub unsafe extern "C" fn pf_graph_edges(
    g: *const PfGraph,
    us: *mut usize,
    vs: *mut usize,
    len: usize,
) -> PfStatus {
    guard(|| {
        let g = g.as_ref().ok_or_else(|| null("graph"))?;
        let edges = g.inner.graph.edges();
        if len < edges.len() {
            return Err(Fail(
                PfStatus::BufferTooSmall,
                format!("need {} entries", edges.len()),
            ));
        }
        if us.is_null() || vs.is_null() {
            return Err(null("output buffer"));
        }
        for (i, &(u, v)) in edges.iter().enumerate() {
            *us.add(i) = u;
            *vs.add(i) = v;
        }
        Ok(())
    })
}

/// # Safety
/// `g` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pf_graph_free(g: *mut PfGraph) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// # Safety
/// Array arguments must hold `m` elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pf_signed_graph_new(
    n: usize,
    m: usize,
    us: *const usize,
    vs: *const usize,
    wplus: *const f64,
    wminus: *const f64,
    out: *mut *mut PfSignedGraph,
) -> PfStatus {
    guard(|| {
        let (us, vs) = (view(us, m, "us")?, view(vs, m, "vs")?);
        let (wp, wm) = (view(wplus, m, "wplus")?, view(wminus, m, "wminus")?);
        let edges: Vec<_> = (0..m).map(|i| (us[i], vs[i], wp[i], wm[i])).collect();
        store(
            out,
            PfSignedGraph {
                inner: SignedGraph::new(n, &edges)?,
            },
        )
    })
}

/// Reads a `u v wplus wminus` edge list.
///
/// # Safety
/// `path` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pf_signed_graph_read(
    path: *const c_char,
    out: *mut *mut PfSignedGraph,
) -> PfStatus {
    guard(|| {
        let p = path_arg(path)?;
        store(
            out,
            PfSignedGraph {
                inner: io::read_signed_edge_list(p)?,
            },
        )
    })
}

/// # Safety
/// `g` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pf_signed_graph_free(g: *mut PfSignedGraph) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Euclidean metric nearness on `g`'s weights.
///
/// # Safety
/// `g` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pf_nearness_solve(
    g: *const PfGraph,
    threshold: f64,
    max_iterations: usize,
    out: *mut *mut PfSolution,
) -> PfStatus {
    guard(|| {
        let g = g.as_ref().ok_or_else(|| null("graph"))?;
        let inst = NearnessInstance::new(g.inner.clone())
            .with_threshold(threshold)
            .with_max_iterations(max_iterations);
        let sol = nearness::solve_nearness(&inst)?;
        store(
            out,
            PfSolution {
                x: sol.x().to_vec(),
                converged: sol.converged(),
                iterations: sol.solution.state.iteration,
                objective: f64::NAN,
                ratio: f64::NAN,
                trace: sol.solution.state.trace,
            },
        )
    })
}

/// Correlation-clustering relaxation; `dense != 0` selects the complete-graph
/// schedule.
///
/// # Safety
/// `g` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pf_cc_solve(
    g: *const PfSignedGraph,
    gamma: f64,
    tol: f64,
    max_iterations: usize,
    dense: c_int,
    out: *mut *mut PfSolution,
) -> PfStatus {
    guard(|| {
        let g = g.as_ref().ok_or_else(|| null("graph"))?;
        let inst = clustering::transform(&g.inner, gamma)?;
        let schedule = if dense != 0 {
            CcSchedule::Dense
        } else {
            CcSchedule::Sparse
        };
        let sol = clustering::solve_cc(&inst, schedule, tol, max_iterations)?;
        let (ratio, _) = clustering::approx_ratio(&sol.x, &inst);
        store(
            out,
            PfSolution {
                objective: sol.objective,
                ratio: ratio.ratio,
                converged: sol.converged,
                iterations: sol.solution.state.iteration,
                x: sol.x,
                trace: sol.solution.state.trace,
            },
        )
    })
}

/// Linear L2 SVM. `x` is row-major `n x d`, `y` holds +1/-1. The solution
/// vector is `w`.
///
/// # Safety
/// `x` must hold `n * d` values, `y` `n` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pf_svm_fit(
    x: *const f64,
    y: *const f64,
    n: usize,
    d: usize,
    c_penalty: f64,
    epochs: usize,
    seed: u64,
    out: *mut *mut PfSolution,
) -> PfStatus {
    guard(|| {
        let len = n
            .checked_mul(d)
            .ok_or_else(|| Fail(PfStatus::InvalidArgument, "n * d overflows".into()))?;
        let flat = view(x, len, "x")?;
        let y = view(y, n, "y")?;
        let rows: Vec<Vec<f64>> = flat.chunks(d.max(1)).map(<[f64]>::to_vec).collect();
        let model = metric_learning::svm_fit(&rows, y, c_penalty, epochs, seed)?;
        store(
            out,
            PfSolution {
                objective: f64::NAN,
                ratio: f64::NAN,
                converged: model.solution.converged,
                iterations: model.solution.state.iteration,
                x: model.w,
                trace: model.solution.state.trace,
            },
        )
    })
}

/// ITML. `x` is row-major `n x d`; pair arrays hold `(i, j)` index pairs
/// flattened, `2 * ns` and `2 * nd` entries. The solution vector is the
/// learned `d x d` matrix, row-major.
///
/// # Safety
/// Array arguments must hold the stated number of values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pf_itml_fit(
    x: *const f64,
    n: usize,
    d: usize,
    similar: *const usize,
    ns: usize,
    dissimilar: *const usize,
    nd: usize,
    gamma: f64,
    u: f64,
    l: f64,
    budget: usize,
    seed: u64,
    out: *mut *mut PfSolution,
) -> PfStatus {
    guard(|| {
        let len = n
            .checked_mul(d)
            .ok_or_else(|| Fail(PfStatus::InvalidArgument, "n * d overflows".into()))?;
        let flat = view(x, len, "x")?;
        let rows: Vec<Vec<f64>> = flat.chunks(d.max(1)).map(<[f64]>::to_vec).collect();
        let pairs_of = |s: &[usize]| s.chunks(2).map(|c| (c[0], c[1])).collect();
        let pairs = PairSets {
            similar: pairs_of(view(similar, 2 * ns, "similar")?),
            dissimilar: pairs_of(view(dissimilar, 2 * nd, "dissimilar")?),
        };
        let state =
            metric_learning::itml_fit(&rows, &pairs, ItmlParams { gamma, u, l }, budget, seed)?;
        let c = state.c.transpose();
        store(
            out,
            PfSolution {
                x: c.as_slice().to_vec(),
                converged: true,
                iterations: budget,
                objective: f64::NAN,
                ratio: f64::NAN,
                trace: Vec::new(),
            },
        )
    })
}

/// # Safety
/// `s` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn pf_solution_len(s: *const PfSolution) -> usize {
    s.as_ref().map_or(0, |s| s.x.len())
}

/// Copies the solution vector into `buf`, which must hold `len >= pf_solution_len` values.
///
/// # Safety
/// `s` must be a live handle; `buf` must be writable for `len` values.
#[no_mangle]
pub unsafe extern "C" fn pf_solution_values(
    s: *const PfSolution,
    buf: *mut f64,
    len: usize,
) -> PfStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(|| null("solution"))?;
        if len < s.x.len() {
            return Err(Fail(
                PfStatus::BufferTooSmall,
                format!("need {} values", s.x.len()),
            ));
        }
        if buf.is_null() && !s.x.is_empty() {
            return Err(null("buffer"));
        }
        ptr::copy_nonoverlapping(s.x.as_ptr(), buf, s.x.len());
        Ok(())
    })
}

/// 1 if the run met its convergence criterion, 0 otherwise or for null.
///
/// # Safety
/// `s` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn pf_solution_converged(s: *const PfSolution) -> c_int {
    s.as_ref().map_or(0, |s| c_int::from(s.converged))
}

/// # Safety
/// `s` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn pf_solution_iterations(s: *const PfSolution) -> usize {
    s.as_ref().map_or(0, |s| s.iterations)
}

/// Clustering objective; NaN for other problems.
///
/// # Safety
/// `s` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn pf_solution_objective(s: *const PfSolution) -> f64 {
    s.as_ref().map_or(f64::NAN, |s| s.objective)
}

/// Clustering approximation ratio; NaN for other problems.
///
/// # Safety
/// `s` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn pf_solution_ratio(s: *const PfSolution) -> f64 {
    s.as_ref().map_or(f64::NAN, |s| s.ratio)
}

/// Writes the iteration trace as CSV; `timing == 0` zeroes the time column.
///
/// # Safety
/// `s` must be a live handle; `path` a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn pf_solution_write_trace(
    s: *const PfSolution,
    path: *const c_char,
    timing: c_int,
) -> PfStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(|| null("solution"))?;
        let p = path_arg(path)?;
        let mut buf = Vec::new();
        write_trace_csv(&s.trace, &mut buf, timing != 0).expect("writing to memory");
        io::write_file(p, &buf)?;
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pf_solution_free(s: *mut PfSolution) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}
