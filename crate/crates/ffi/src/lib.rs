//! C interface to `qgraph`.
//!
//! Every fallible function returns a [`QgStatus`]. On failure the message is
//! kept per thread and can be read with [`qg_last_error`]. Graphs and
//! spectra are opaque handles released with their `_free` function.
//! Panics never cross the boundary; they surface as `QG_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use qgraph::graph::{self, kirchhoff_s0, BondScatteringMatrix};
use qgraph::lambda::{self, LambdaSpectrum};
use qgraph::{ErrorKind, LoadedGraph, MetricGraph};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Validation = 3,
    Numerical = 4,
    Io = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

/// A metric graph with its bond scattering matrix.
pub struct QgGraph {
    graph: MetricGraph,
    s0: BondScatteringMatrix,
}

/// Eigenvalues of a graph up to some `lambda_max`.
pub struct QgSpectrum {
    spectrum: LambdaSpectrum,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

type Failure = (QgStatus, String);

fn set_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn from_core(e: qgraph::Error) -> Failure {
    let status = match e.kind() {
        ErrorKind::Usage => QgStatus::InvalidArgument,
        ErrorKind::Validation => QgStatus::Validation,
        ErrorKind::Numerical => QgStatus::Numerical,
        ErrorKind::Io => QgStatus::Io,
    };
    (status, e.to_string())
}

fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> QgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            QgStatus::Ok
        }
        Ok(Err((status, message))) => {
            set_error(&message);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(&format!("internal panic: {msg}"));
            QgStatus::Panic
        }
    }
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err((QgStatus::NullPointer, format!("{name} is null")))
    } else {
        Ok(())
    }
}

unsafe fn slice<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    non_null(p, name)?;
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn output<'a, T>(p: *mut T, len: usize, needed: usize, name: &str) -> Result<&'a mut [T], Failure> {
    if len < needed {
        return Err((QgStatus::BufferTooSmall, format!("{name} holds {len}, need {needed}")));
    }
    if needed == 0 {
        return Ok(&mut []);
    }
    non_null(p, name)?;
    Ok(std::slice::from_raw_parts_mut(p, needed))
}

unsafe fn handle<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    non_null(p, name)?;
    Ok(&*p)
}

unsafe fn publish<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    non_null(out, "out")?;
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or an empty string. The
/// pointer stays valid until the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn qg_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Builds a graph with Kirchhoff conditions from `n_bonds` edges
/// `from[i] -> to[i]` of length `lengths[i]` on vertices `0..n_vertices`.
///
/// # Safety
/// The three arrays must hold `n_bonds` elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qg_graph_new(
    n_vertices: usize,
    from: *const usize,
    to: *const usize,
    lengths: *const f64,
    n_bonds: usize,
    out: *mut *mut QgGraph,
) -> QgStatus {
    guard(|| {
        let from = slice(from, n_bonds, "from")?;
        let to = slice(to, n_bonds, "to")?;
        let lengths = slice(lengths, n_bonds, "lengths")?;
        let edges: Vec<(usize, usize, f64)> = (0..n_bonds).map(|i| (from[i], to[i], lengths[i])).collect();
        let graph = MetricGraph::from_edges(n_vertices, &edges).map_err(from_core)?;
        let s0 = kirchhoff_s0(&graph);
        publish(out, QgGraph { graph, s0 })
    })
}

/// Star graph with `n` bonds of the given lengths and Kirchhoff conditions.
///
/// # Safety
/// `lengths` must hold `n` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qg_graph_star(lengths: *const f64, n: usize, out: *mut *mut QgGraph) -> QgStatus {
    guard(|| {
        let lengths = slice(lengths, n, "lengths")?;
        let graph = MetricGraph::star(lengths).map_err(from_core)?;
        let s0 = kirchhoff_s0(&graph);
        publish(out, QgGraph { graph, s0 })
    })
}

/// Loads a TOML or JSON graph spec file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qg_graph_from_spec(path: *const c_char, out: *mut *mut QgGraph) -> QgStatus {
    guard(|| {
        non_null(path, "path")?;
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| (QgStatus::InvalidArgument, "path is not UTF-8".to_string()))?;
        let loaded = LoadedGraph::from_path(Path::new(path)).map_err(from_core)?;
        publish(out, QgGraph { graph: loaded.graph, s0: loaded.s0 })
    })
}

/// # Safety
/// `g` must come from a `qg_graph_*` constructor and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn qg_graph_free(g: *mut QgGraph) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// # Safety
/// `g` must be a live graph handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qg_graph_bond_count(g: *const QgGraph, out: *mut usize) -> QgStatus {
    guard(|| {
        let g = handle(g, "graph")?;
        non_null(out, "out")?;
        *out = g.graph.bond_count();
        Ok(())
    })
}

/// Eigenphases of `U(lambda)` in `(0, 2π]`, decreasing. `len` must be at
/// least twice the bond count.
///
/// # Safety
/// `g` must be a live graph handle; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn qg_graph_eigenphases(g: *const QgGraph, lambda: f64, out: *mut f64, len: usize) -> QgStatus {
    guard(|| {
        let g = handle(g, "graph")?;
        if !lambda.is_finite() {
            return Err((QgStatus::InvalidArgument, format!("lambda must be finite (got {lambda})")));
        }
        let frame = qgraph::eigenphase::EigenphaseFrame::at_lambda(&g.graph, &g.s0, lambda).map_err(from_core)?;
        output(out, len, frame.phases.len(), "out")?.copy_from_slice(&frame.phases);
        Ok(())
    })
}

/// `U(lambda)` as row-major real and imaginary parts, `(2B)²` entries each.
///
/// # Safety
/// `g` must be a live graph handle; `re` and `im` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn qg_graph_evolution_operator(
    g: *const QgGraph,
    lambda: f64,
    re: *mut f64,
    im: *mut f64,
    len: usize,
) -> QgStatus {
    guard(|| {
        let g = handle(g, "graph")?;
        let u = graph::evolution_operator(&g.graph, &g.s0, lambda);
        let n = u.nrows();
        let re = output(re, len, n * n, "re")?;
        let im = output(im, len, n * n, "im")?;
        for r in 0..n {
            for c in 0..n {
                re[r * n + c] = u[(r, c)].re;
                im[r * n + c] = u[(r, c)].im;
            }
        }
        Ok(())
    })
}

/// Eigenvalues in `(0, lambda_max]`; eigenvectors too when `with_vectors`.
///
/// # Safety
/// `g` must be a live graph handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qg_spectrum_solve(
    g: *const QgGraph,
    lambda_max: f64,
    with_vectors: bool,
    out: *mut *mut QgSpectrum,
) -> QgStatus {
    guard(|| {
        let g = handle(g, "graph")?;
        let spectrum = if with_vectors {
            lambda::solve_spectrum(&g.graph, &g.s0, lambda_max)
        } else {
            lambda::solve_eigenvalues(&g.graph, &g.s0, lambda_max)
        }
        .map_err(from_core)?;
        publish(out, QgSpectrum { spectrum })
    })
}

/// # Safety
/// `s` must come from [`qg_spectrum_solve`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn qg_spectrum_free(s: *mut QgSpectrum) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Number of eigenvalues counted with multiplicity.
///
/// # Safety
/// `s` must be a live spectrum handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qg_spectrum_len(s: *const QgSpectrum, out: *mut usize) -> QgStatus {
    guard(|| {
        let s = handle(s, "spectrum")?;
        non_null(out, "out")?;
        *out = s.spectrum.len();
        Ok(())
    })
}

/// Eigenvalues, ascending, each repeated by its multiplicity.
///
/// # Safety
/// `s` must be a live spectrum handle; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn qg_spectrum_eigenvalues(s: *const QgSpectrum, out: *mut f64, len: usize) -> QgStatus {
    guard(|| {
        let s = handle(s, "spectrum")?;
        let ev = s.spectrum.eigenvalues();
        output(out, len, ev.len(), "out")?.copy_from_slice(ev);
        Ok(())
    })
}

/// Number of distinct levels.
///
/// # Safety
/// `s` must be a live spectrum handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qg_spectrum_level_count(s: *const QgSpectrum, out: *mut usize) -> QgStatus {
    guard(|| {
        let s = handle(s, "spectrum")?;
        non_null(out, "out")?;
        *out = s.spectrum.levels().len();
        Ok(())
    })
}

/// Distinct levels and their multiplicities.
///
/// # Safety
/// `s` must be a live spectrum handle; both arrays must hold `len` entries.
#[no_mangle]
pub unsafe extern "C" fn qg_spectrum_levels(
    s: *const QgSpectrum,
    lambdas: *mut f64,
    multiplicities: *mut usize,
    len: usize,
) -> QgStatus {
    guard(|| {
        let s = handle(s, "spectrum")?;
        let levels = s.spectrum.levels();
        let l = output(lambdas, len, levels.len(), "lambdas")?;
        let m = output(multiplicities, len, levels.len(), "multiplicities")?;
        for (i, level) in levels.iter().enumerate() {
            l[i] = level.lambda;
            m[i] = level.multiplicity;
        }
        Ok(())
    })
}

/// `N(lambda_max) π / (𝓛 lambda_max)`. `g` must be the graph the spectrum
/// was solved for.
///
/// # Safety
/// `g` and `s` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qg_spectrum_weyl_ratio(g: *const QgGraph, s: *const QgSpectrum, out: *mut f64) -> QgStatus {
    guard(|| {
        let g = handle(g, "graph")?;
        let s = handle(s, "spectrum")?;
        non_null(out, "out")?;
        *out = lambda::weyl_check(&s.spectrum, &g.graph).map_err(from_core)?.ratio;
        Ok(())
    })
}
