// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! C ABI for the gala library.
//!
//! Every call returns a [`GalaStatus`]. Objects are opaque handles created
//! by `gala_*_new`/`_load` and released by the matching `_free`. On failure
//! `gala_last_error()` returns a message for the calling thread, valid until
//! that thread's next call. Panics are caught at the boundary and reported as
//! `GALA_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use gala::checkpoint::{load_classifier, load_score_network};
use gala::classifier::ClassifierModel;
use gala::diffusion::{adapt_target_graph_steps, ScoreNetwork};
use gala::graph::Graph;
use gala::trainer::{run_adaptation, write_run_outputs, Checkpoints, ExperimentConfig};
use gala::GalaError;
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Result code of every exported function.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GalaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Argument = 3,
    Contract = 4,
    Shape = 5,
    Model = 6,
    Config = 7,
    Format = 8,
    Io = 9,
    Integrity = 10,
    DegenerateInput = 11,
    BufferTooSmall = 12,
    Panic = 13,
}

impl From<&GalaError> for GalaStatus {
    fn from(e: &GalaError) -> Self {
        match e {
            GalaError::Format { .. } => GalaStatus::Format,
            GalaError::Integrity(_) => GalaStatus::Integrity,
            GalaError::DegenerateInput(_) | GalaError::SingularVariance(_) => GalaStatus::DegenerateInput,
            GalaError::Argument(_) => GalaStatus::Argument,
            GalaError::Contract(_) => GalaStatus::Contract,
            GalaError::Shape(_) => GalaStatus::Shape,
            GalaError::Model(_) => GalaStatus::Model,
            GalaError::Config(_) => GalaStatus::Config,
            GalaError::Io { .. } => GalaStatus::Io,
        }
    }
}

/// Experiment configuration.
pub struct GalaConfig {
    inner: ExperimentConfig,
}

/// An undirected graph with node attributes and an optional label.
pub struct GalaGraph {
    inner: Graph,
}

/// A trained graph classifier.
pub struct GalaClassifier {
    inner: ClassifierModel,
}

/// A trained score network.
pub struct GalaScoreNet {
    inner: ScoreNetwork,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Fail(GalaStatus, String);

impl From<GalaError> for Fail {
    fn from(e: GalaError) -> Self {
        Fail(GalaStatus::from(&e), e.to_string())
    }
}

type Res = Result<(), Fail>;

fn guard(f: impl FnOnce() -> Res) -> GalaStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GalaStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            GalaStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(GalaStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail(GalaStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn obj<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn boxed_out<T>(dst: *mut *mut T, value: T) -> Res {
    let dst = out(dst, "output handle")?;
    *dst = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Message of the last failed call on this thread, or NULL. Owned by the
/// library; valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn gala_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gala_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Default configuration.
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn gala_config_new(out: *mut *mut GalaConfig) -> GalaStatus {
    guard(|| boxed_out(out, GalaConfig { inner: ExperimentConfig::default() }))
}

/// Reads a key=value config file.
///
/// # Safety
/// `path` must be NUL-terminated; `out` must be a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn gala_config_load(path: *const c_char, out: *mut *mut GalaConfig) -> GalaStatus {
    guard(|| {
        let path = PathBuf::from(str_arg(path, "path")?);
        boxed_out(out, GalaConfig { inner: ExperimentConfig::load(&path)? })
    })
}

/// Sets one key, e.g. `adapt.epochs` to `20`.
///
/// # Safety
/// `cfg` must come from `gala_config_new`/`_load`; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn gala_config_set(cfg: *mut GalaConfig, key: *const c_char, value: *const c_char) -> GalaStatus {
    guard(|| {
        let cfg = out(cfg, "config")?;
        let (k, v) = (str_arg(key, "key")?, str_arg(value, "value")?);
        cfg.inner.apply([(k, v)])?;
        Ok(())
    })
}

/// # Safety
/// `cfg` must come from this library or be NULL; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn gala_config_free(cfg: *mut GalaConfig) {
    free(cfg)
}

/// Builds a graph from `num_edges` pairs in `edges` (length `2*num_edges`)
/// and a row-major `node_count x attr_dim` attribute block. `label < 0`
/// means unlabeled.
///
/// # Safety
/// The arrays must hold the stated number of elements (they may be NULL when
/// that number is zero); `out` must be a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn gala_graph_new(
    node_count: usize,
    edges: *const usize,
    num_edges: usize,
    attributes: *const f64,
    attr_dim: usize,
    label: i64,
    out: *mut *mut GalaGraph,
) -> GalaStatus {
    guard(|| {
        let pairs: &[usize] = if num_edges == 0 {
            &[]
        } else if edges.is_null() {
            return Err(null("edges"));
        } else {
            std::slice::from_raw_parts(edges, 2 * num_edges)
        };
        let cells = node_count * attr_dim;
        let x: Vec<f64> = if cells == 0 {
            Vec::new()
        } else if attributes.is_null() {
            return Err(null("attributes"));
        } else {
            std::slice::from_raw_parts(attributes, cells).to_vec()
        };
        let x = Array2::from_shape_vec((node_count, attr_dim), x).map_err(|e| Fail(GalaStatus::Shape, e.to_string()))?;
        let label = usize::try_from(label).ok();
        let g = Graph::new(node_count, pairs.chunks(2).map(|p| (p[0], p[1])).collect::<Vec<_>>(), x, label)?;
        boxed_out(out, GalaGraph { inner: g })
    })
}

/// Writes node count, edge count and attribute width.
///
/// # Safety
/// `g` must be a live graph handle; the outputs valid pointers.
#[no_mangle]
pub unsafe extern "C" fn gala_graph_shape(
    g: *const GalaGraph,
    node_count: *mut usize,
    edge_count: *mut usize,
    attr_dim: *mut usize,
) -> GalaStatus {
    guard(|| {
        let g = &obj(g, "graph")?.inner;
        *out(node_count, "node_count")? = g.node_count();
        *out(edge_count, "edge_count")? = g.edge_count();
        *out(attr_dim, "attr_dim")? = g.attribute_dim();
        Ok(())
    })
}

/// Copies the edge list as `2*edge_count` node ids into `buf` of `capacity`
/// elements.
///
/// # Safety
/// `buf` must hold `capacity` elements.
#[no_mangle]
pub unsafe extern "C" fn gala_graph_edges(g: *const GalaGraph, buf: *mut usize, capacity: usize) -> GalaStatus {
    guard(|| {
        let g = &obj(g, "graph")?.inner;
        let need = 2 * g.edge_count();
        if capacity < need {
            return Err(Fail(GalaStatus::BufferTooSmall, format!("need {need} slots, got {capacity}")));
        }
        if need > 0 {
            if buf.is_null() {
                return Err(null("buf"));
            }
            let dst = std::slice::from_raw_parts_mut(buf, need);
            for (k, &(a, b)) in g.edges().iter().enumerate() {
                dst[2 * k] = a;
                dst[2 * k + 1] = b;
            }
        }
        Ok(())
    })
}

/// Edge density `2|E| / (n(n-1))`.
///
/// # Safety
/// `g` must be a live graph handle; `density` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gala_graph_density(g: *const GalaGraph, density: *mut f64) -> GalaStatus {
    guard(|| {
        *out(density, "density")? = obj(g, "graph")?.inner.density()?;
        Ok(())
    })
}

/// # Safety
/// `g` must come from this library or be NULL; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn gala_graph_free(g: *mut GalaGraph) {
    free(g)
}

/// Loads a classifier checkpoint.
///
/// # Safety
/// `path` must be NUL-terminated; `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn gala_classifier_load(path: *const c_char, out: *mut *mut GalaClassifier) -> GalaStatus {
    guard(|| {
        let path = PathBuf::from(str_arg(path, "path")?);
        boxed_out(out, GalaClassifier { inner: load_classifier(&path)? })
    })
}

/// Number of classes the classifier predicts.
///
/// # Safety
/// `m` must be a live classifier handle; `n` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gala_classifier_num_classes(m: *const GalaClassifier, n: *mut usize) -> GalaStatus {
    guard(|| {
        *out(n, "num_classes")? = obj(m, "classifier")?.inner.num_classes();
        Ok(())
    })
}

/// Class probabilities of `g` into `probs` (`capacity` >= number of classes).
///
/// # Safety
/// Handles must be live; `probs` must hold `capacity` elements.
#[no_mangle]
pub unsafe extern "C" fn gala_classifier_predict(
    m: *const GalaClassifier,
    g: *const GalaGraph,
    probs: *mut f64,
    capacity: usize,
) -> GalaStatus {
    guard(|| {
        let dist = obj(m, "classifier")?.inner.classify(&obj(g, "graph")?.inner)?;
        if capacity < dist.probs.len() {
            return Err(Fail(GalaStatus::BufferTooSmall, format!("need {} slots, got {capacity}", dist.probs.len())));
        }
        if probs.is_null() {
            return Err(null("probs"));
        }
        std::slice::from_raw_parts_mut(probs, dist.probs.len()).copy_from_slice(&dist.probs);
        Ok(())
    })
}

/// # Safety
/// `m` must come from this library or be NULL; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn gala_classifier_free(m: *mut GalaClassifier) {
    free(m)
}

/// Loads a score network checkpoint.
///
/// # Safety
/// `path` must be NUL-terminated; `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn gala_score_net_load(path: *const c_char, out: *mut *mut GalaScoreNet) -> GalaStatus {
    guard(|| {
        let path = PathBuf::from(str_arg(path, "path")?);
        boxed_out(out, GalaScoreNet { inner: load_score_network(&path)? })
    })
}

/// Reconstructs `g` under the score network: noise to `t_recon`, then
/// `steps` reverse steps. Deterministic in `seed`.
///
/// # Safety
/// Handles must be live; `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn gala_reconstruct(
    net: *const GalaScoreNet,
    g: *const GalaGraph,
    t_recon: f64,
    steps: usize,
    seed: u64,
    out: *mut *mut GalaGraph,
) -> GalaStatus {
    guard(|| {
        let net = &obj(net, "score network")?.inner;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = adapt_target_graph_steps(&obj(g, "graph")?.inner, net, net.schedule(), t_recon, steps, &mut rng)?;
        boxed_out(out, GalaGraph { inner: r })
    })
}

/// # Safety
/// `net` must come from this library or be NULL; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn gala_score_net_free(net: *mut GalaScoreNet) {
    free(net)
}

/// Runs the full pipeline for every configured seed, writes the run files
/// to the configured output directory, and reports mean accuracies.
///
/// # Safety
/// `cfg` must be a live config handle; outputs valid pointers or NULL.
#[no_mangle]
pub unsafe extern "C" fn gala_run_adaptation(
    cfg: *const GalaConfig,
    source_only_mean: *mut f64,
    adapted_mean: *mut f64,
) -> GalaStatus {
    guard(|| {
        let cfg = &obj(cfg, "config")?.inner;
        let (report, artifacts) = run_adaptation(cfg, &Checkpoints::default())?;
        write_run_outputs(&cfg.output_dir(), &report, &artifacts)?;
        if let Some(p) = source_only_mean.as_mut() {
            *p = report.source_only.mean;
        }
        if let Some(p) = adapted_mean.as_mut() {
            *p = report.adapted.map_or(f64::NAN, |s| s.mean);
        }
        Ok(())
    })
}
