//! Families of conformal states over a sampled base: construction of
//! Lipschitz-continuous initial fields, fiberwise flow runs, a uniform decay
//! envelope across fibers, and spectral fingerprints of the limit states.
//!
//! Fibers are independent by construction (no cross-fiber coupling), so the
//! per-fiber flows may run concurrently; results are merged by base index,
//! which keeps every output deterministic regardless of scheduling.

use std::collections::VecDeque;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::exec::{self, Parallelism};
use crate::flow::{
    fit_decay_rate, run_flow, write_trace_csv, FlowConfig, FlowError, FlowTrace, TargetCurvature,
    Termination,
};
use crate::mesh::{ConformalState, TriSurface};

/// Default number of spectral fingerprint modes.
pub const DEFAULT_FINGERPRINT_MODES: usize = 12;

/// Sup-distance below which the first and last fiber of a loop family count
/// as the same point of the limit family.
pub const LOOP_CLOSURE_TOL: f64 = 1e-9;

/// Headroom factor for the per-fiber envelope bound check.
pub const ENVELOPE_SLACK: f64 = 1.05;

/// Errors from family construction, runs and summaries.
#[derive(Debug, Error)]
pub enum FiberedError {
    #[error("fiber {index}: {source}")]
    Fiber {
        index: usize,
        source: FlowError,
    },
    #[error("fiber {index} stopped at the {reason} before reaching tolerance")]
    Unconverged { index: usize, reason: &'static str },
    #[error("family has not been run")]
    NotRun,
    #[error("operation requires a loop base")]
    NotLoop,
    #[error("envelope fit: {0}")]
    Fit(FlowError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Shape of the sampled base.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaseKind {
    Loop,
    DiskGrid,
    SphereMesh,
}

impl BaseKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BaseKind::Loop => "loop",
            BaseKind::DiskGrid => "disk-grid",
            BaseKind::SphereMesh => "sphere-mesh",
        }
    }
}

/// Finite sample of the base of a family: points with positions inside the
/// unit ball and edges between parameter-adjacent samples. The adjacency
/// graph is connected; a loop base is a single cycle whose last point
/// duplicates the first, so that periodic closure of fields over it is exact.
#[derive(Debug, Clone)]
pub struct BaseSample {
    kind: BaseKind,
    positions: Vec<[f64; 3]>,
    adjacency: Vec<(usize, usize)>,
}

impl BaseSample {
    /// Circle sample with `n` points (`n >= 4`); point `n-1` is a bitwise
    /// copy of point 0 closing the loop.
    pub fn loop_circle(n: usize) -> Self {
        assert!(n >= 4, "a loop sample needs at least 4 points");
        let mut positions = Vec::with_capacity(n);
        for i in 0..n - 1 {
            let theta = std::f64::consts::TAU * i as f64 / (n - 1) as f64;
            positions.push([theta.cos(), theta.sin(), 0.0]);
        }
        positions.push(positions[0]);
        let mut adjacency: Vec<(usize, usize)> = (0..n - 1).map(|i| (i, i + 1)).collect();
        adjacency.push((0, n - 1));
        let base = BaseSample {
            kind: BaseKind::Loop,
            positions,
            adjacency,
        };
        debug_assert!(base.invariants_hold());
        base
    }

    /// `rows x cols` grid on the square `[-1/2, 1/2]^2` with 4-neighbor
    /// adjacency; `rows, cols >= 2`.
    pub fn disk_grid(rows: usize, cols: usize) -> Self {
        assert!(rows >= 2 && cols >= 2, "grid needs at least 2 x 2 points");
        let mut positions = Vec::with_capacity(rows * cols);
        let mut adjacency = Vec::new();
        for i in 0..rows {
            for j in 0..cols {
                positions.push([
                    i as f64 / (rows - 1) as f64 - 0.5,
                    j as f64 / (cols - 1) as f64 - 0.5,
                    0.0,
                ]);
                let id = i * cols + j;
                if j + 1 < cols {
                    adjacency.push((id, id + 1));
                }
                if i + 1 < rows {
                    adjacency.push((id, id + cols));
                }
            }
        }
        let base = BaseSample {
            kind: BaseKind::DiskGrid,
            positions,
            adjacency,
        };
        debug_assert!(base.invariants_hold());
        base
    }

    /// The 12 icosahedron vertices on the unit sphere with its 30 edges.
    pub fn sphere_mesh() -> Self {
        let (raw, faces) = crate::mesh::gen::icosahedron();
        let positions: Vec<[f64; 3]> = raw
            .iter()
            .map(|p| {
                let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
                [p[0] / n, p[1] / n, p[2] / n]
            })
            .collect();
        let mut adjacency: Vec<(usize, usize)> = Vec::new();
        for f in faces.iter() {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                let e = (a.min(b), a.max(b));
                if !adjacency.contains(&e) {
                    adjacency.push(e);
                }
            }
        }
        adjacency.sort_unstable();
        let base = BaseSample {
            kind: BaseKind::SphereMesh,
            positions,
            adjacency,
        };
        debug_assert!(base.invariants_hold());
        base
    }

    pub fn kind(&self) -> BaseKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[[f64; 3]] {
        &self.positions
    }

    pub fn adjacency(&self) -> &[(usize, usize)] {
        &self.adjacency
    }

    /// Euclidean distance between two sample positions.
    pub fn distance(&self, p: usize, q: usize) -> f64 {
        let (a, b) = (self.positions[p], self.positions[q]);
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
    }

    fn invariants_hold(&self) -> bool {
        let n = self.positions.len();
        let mut neighbors = vec![Vec::new(); n];
        for &(a, b) in &self.adjacency {
            if a >= n || b >= n || a == b {
                return false;
            }
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut reached = 1;
        while let Some(v) = queue.pop_front() {
            for &w in &neighbors[v] {
                if !seen[w] {
                    seen[w] = true;
                    reached += 1;
                    queue.push_back(w);
                }
            }
        }
        if reached != n {
            return false;
        }
        if self.kind == BaseKind::Loop {
            // A connected graph with V = E and all degrees 2 is one cycle.
            return self.adjacency.len() == n && neighbors.iter().all(|nb| nb.len() == 2);
        }
        true
    }
}

/// A conformal state per base point, all over one surface, plus the flow
/// traces and limit states once the family has been run.
#[derive(Debug, Clone)]
pub struct FiberFamily {
    base: BaseSample,
    surface: Arc<TriSurface>,
    states: Vec<ConformalState>,
    seed: u64,
    amplitude: f64,
    traces: Option<Vec<FlowTrace>>,
    limits: Option<Vec<ConformalState>>,
}

impl FiberFamily {
    pub fn base(&self) -> &BaseSample {
        &self.base
    }

    pub fn surface(&self) -> &Arc<TriSurface> {
        &self.surface
    }

    /// Initial states, one per base point.
    pub fn states(&self) -> &[ConformalState] {
        &self.states
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    /// Flow traces, present after [`run_family`].
    pub fn traces(&self) -> Option<&[FlowTrace]> {
        self.traces.as_deref()
    }

    /// Converged states, present after [`run_family`].
    pub fn limit_states(&self) -> Option<&[ConformalState]> {
        self.limits.as_deref()
    }

    /// Prescribes one fiber's initial state (over the same surface),
    /// discarding any previous run.
    pub fn set_state(&mut self, index: usize, state: ConformalState) {
        assert!(
            Arc::ptr_eq(state.surface(), &self.surface),
            "prescribed state must live on the family surface"
        );
        self.states[index] = state;
        self.traces = None;
        self.limits = None;
    }
}

/// A scalar field on the unit ball together with a Lipschitz bound for it.
type BasisField = (fn(&[f64; 3]) -> f64, f64);

/// Basis functions for the initial fields: the restriction to the unit ball
/// of degree-one and degree-two monomials in the base position, paired with a
/// Lipschitz bound valid on the ball (`|grad x_k x_l| <= 1` off-diagonal and
/// `<= 2` on the diagonal).
const FIELD_BASIS: [BasisField; 9] = [
    (|p| p[0], 1.0),
    (|p| p[1], 1.0),
    (|p| p[2], 1.0),
    (|p| p[0] * p[0], 2.0),
    (|p| p[1] * p[1], 2.0),
    (|p| p[2] * p[2], 2.0),
    (|p| p[0] * p[1], 1.0),
    (|p| p[0] * p[2], 1.0),
    (|p| p[1] * p[2], 1.0),
];

/// Builds the initial family over `base`: a low-frequency random field
/// `u_0(p)` with `|u_0(p) - u_0(q)|_inf <= amplitude * d(p, q)` for every
/// pair of base points, deterministic in `seed`. With `amplitude = 0` all
/// fibers are identical; on a loop base the field closes up exactly.
///
/// Per-vertex coefficients of a fixed low-order basis in the base position
/// are drawn once, smoothed over the surface so the fibers stay valid
/// triangle meshes, and scaled so every vertex's total Lipschitz budget is
/// at most one.
pub fn make_family(
    surface: &Arc<TriSurface>,
    base: BaseSample,
    amplitude: f64,
    seed: u64,
) -> FiberFamily {
    assert!(
        amplitude >= 0.0 && amplitude.is_finite(),
        "amplitude must be finite and nonnegative"
    );
    let nv = surface.num_vertices();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // One smoothed coefficient field per basis function.
    let mut coeffs: Vec<Vec<f64>> = Vec::with_capacity(FIELD_BASIS.len());
    for _ in 0..FIELD_BASIS.len() {
        let mut c: Vec<f64> = (0..nv).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for _ in 0..8 {
            let prev = c.clone();
            for (i, ci) in c.iter_mut().enumerate() {
                let nb = surface.neighbors(i);
                if nb.is_empty() {
                    continue;
                }
                let mean = nb.iter().map(|&j| prev[j]).sum::<f64>() / nb.len() as f64;
                *ci = 0.5 * (prev[i] + mean);
            }
        }
        coeffs.push(c);
    }

    // Scale all fields together so max_i sum_k |c_k(i)| Lip_k <= 1; then
    // |u_0(p)_i - u_0(q)_i| <= amplitude * sum_k |c_k(i)| Lip_k * d(p, q).
    let budget = (0..nv)
        .map(|i| {
            coeffs
                .iter()
                .zip(FIELD_BASIS.iter())
                .map(|(c, (_, lip))| c[i].abs() * lip)
                .sum::<f64>()
        })
        .fold(0.0_f64, f64::max);
    if budget > 0.0 {
        for c in &mut coeffs {
            for x in c.iter_mut() {
                *x /= budget;
            }
        }
    }

    let mut states: Vec<ConformalState> = base
        .positions()
        .iter()
        .map(|pos| {
            let u: Vec<f64> = (0..nv)
                .map(|i| {
                    amplitude
                        * coeffs
                            .iter()
                            .zip(FIELD_BASIS.iter())
                            .map(|(c, (f, _))| c[i] * f(pos))
                            .sum::<f64>()
                })
                .collect();
            ConformalState::new(surface.clone(), u)
        })
        .collect();
    if base.kind() == BaseKind::Loop {
        let first = states[0].u().to_vec();
        let n = states.len();
        states[n - 1] = ConformalState::new(surface.clone(), first);
    }

    FiberFamily {
        base,
        surface: surface.clone(),
        states,
        seed,
        amplitude,
        traces: None,
        limits: None,
    }
}

/// [`run_family_with`] on the default parallelism.
pub fn run_family(family: &FiberFamily, cfg: &FlowConfig) -> Result<FiberFamily, FiberedError> {
    run_family_with(family, cfg, Parallelism::Auto)
}

/// Runs every fiber to convergence and attaches traces and limit states.
/// Fibers run independently (possibly concurrently) and results are merged
/// by base index; the first failing index wins. A fiber that stops at the
/// time cap instead of converging is an error.
pub fn run_family_with(
    family: &FiberFamily,
    cfg: &FlowConfig,
    par: Parallelism,
) -> Result<FiberFamily, FiberedError> {
    let target = TargetCurvature::uniform(&family.surface);
    let results = exec::map_indexed(&family.states, par, |_, state| {
        run_flow(state, &target, cfg)
    });

    let mut limits = Vec::with_capacity(results.len());
    let mut traces = Vec::with_capacity(results.len());
    for (index, result) in results.into_iter().enumerate() {
        let (limit, trace) = result.map_err(|source| FiberedError::Fiber { index, source })?;
        match trace.terminated {
            Termination::Converged => {}
            Termination::TimeCap => {
                return Err(FiberedError::Unconverged {
                    index,
                    reason: "time cap",
                })
            }
            Termination::Degenerate => {
                return Err(FiberedError::Unconverged {
                    index,
                    reason: "degeneration floor",
                })
            }
        }
        limits.push(limit);
        traces.push(trace);
    }

    Ok(FiberFamily {
        base: family.base.clone(),
        surface: family.surface.clone(),
        states: family.states.clone(),
        seed: family.seed,
        amplitude: family.amplitude,
        traces: Some(traces),
        limits: Some(limits),
    })
}

/// Exponential envelope of a family run: fit of
/// `E(t) = sup_fibers sup|K - k*|` over the trailing half of the common
/// window, and the check that no fiber ever exceeds
/// `ENVELOPE_SLACK * c0 * exp(rate * t)` there.
#[derive(Debug, Clone, Copy)]
pub struct EnvelopeFit {
    pub c0: f64,
    pub rate: f64,
    pub r2: f64,
    /// Fit window `[t_end / 2, t_end]` on the common grid.
    pub window: (f64, f64),
    /// Every fiber stays below the slackened envelope on the window.
    pub bound_satisfied: bool,
}

const ENVELOPE_GRID: usize = 256;

/// Resamples every trace's `log sup_dev` piecewise-linearly onto a common
/// grid over `[0, min_fibers t_final]`, takes the pointwise max, and fits one
/// exponential to the trailing half. See [`EnvelopeFit`].
pub fn uniform_envelope(family: &FiberFamily) -> Result<EnvelopeFit, FiberedError> {
    let traces = family.traces.as_ref().ok_or(FiberedError::NotRun)?;
    envelope_of_traces(traces)
}

/// [`uniform_envelope`] on bare traces.
pub fn envelope_of_traces(traces: &[FlowTrace]) -> Result<EnvelopeFit, FiberedError> {
    assert!(!traces.is_empty(), "family has no fibers");

    let t_end = traces
        .iter()
        .map(|tr| tr.samples.last().expect("nonempty trace").t)
        .fold(f64::INFINITY, f64::min);

    let grid: Vec<f64> = (0..ENVELOPE_GRID)
        .map(|j| t_end * j as f64 / (ENVELOPE_GRID - 1) as f64)
        .collect();

    let mut log_curves = Vec::with_capacity(traces.len());
    for (index, trace) in traces.iter().enumerate() {
        let curve = resample_log(trace, &grid).map_err(|source| match source {
            FlowError::NonPositiveSample { .. } => FiberedError::Fiber { index, source },
            other => FiberedError::Fit(other),
        })?;
        log_curves.push(curve);
    }

    let env: Vec<f64> = (0..grid.len())
        .map(|j| {
            log_curves
                .iter()
                .map(|c| c[j])
                .fold(f64::NEG_INFINITY, f64::max)
                .exp()
        })
        .collect();

    let window = (t_end / 2.0, t_end);
    let fit = fit_decay_rate(&grid, &env, window).map_err(FiberedError::Fit)?;

    let log_slack = ENVELOPE_SLACK.ln() + fit.c0.ln();
    let bound_satisfied = log_curves.iter().all(|curve| {
        grid.iter()
            .zip(curve)
            .filter(|(t, _)| **t >= window.0)
            .all(|(t, lq)| *lq <= log_slack + fit.rate * t)
    });

    Ok(EnvelopeFit {
        c0: fit.c0,
        rate: fit.rate,
        r2: fit.r2,
        window,
        bound_satisfied,
    })
}

/// Piecewise-linear values of `log sup_dev` at the grid times. Requires
/// positive deviations and a trace covering the grid.
fn resample_log(trace: &FlowTrace, grid: &[f64]) -> Result<Vec<f64>, FlowError> {
    let samples = &trace.samples;
    for s in samples {
        if s.sup_dev <= 0.0 {
            return Err(FlowError::NonPositiveSample {
                t: s.t,
                q: s.sup_dev,
            });
        }
    }
    let mut out = Vec::with_capacity(grid.len());
    let mut k = 0usize;
    for &t in grid {
        while k + 1 < samples.len() && samples[k + 1].t < t {
            k += 1;
        }
        let value = if k + 1 >= samples.len() {
            samples[k].sup_dev.ln()
        } else {
            let (a, b) = (&samples[k], &samples[k + 1]);
            if b.t <= a.t {
                a.sup_dev.ln()
            } else {
                let w = ((t - a.t) / (b.t - a.t)).clamp(0.0, 1.0);
                (1.0 - w) * a.sup_dev.ln() + w * b.sup_dev.ln()
            }
        };
        out.push(value);
    }
    Ok(out)
}

/// Area-normalized low spectrum of a state's Laplace operator: the `m`
/// smallest eigenvalues of `S phi = lambda A phi` (`S` the positive cotan
/// operator, `A` the vertex areas), multiplied by the total area so the
/// result is invariant under global rescaling `u -> u + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct Fingerprint {
    spectrum: Vec<f64>,
}

impl Fingerprint {
    /// Nondecreasing; the first entry is zero up to roundoff.
    pub fn spectrum(&self) -> &[f64] {
        &self.spectrum
    }

    /// Sup-distance between spectra of equal length.
    pub fn sup_distance(&self, other: &Fingerprint) -> f64 {
        assert_eq!(
            self.spectrum.len(),
            other.spectrum.len(),
            "fingerprints must have equal mode counts"
        );
        self.spectrum
            .iter()
            .zip(&other.spectrum)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0_f64, f64::max)
    }
}

/// Computes the [`Fingerprint`] of a valid state with `1 <= m <=` vertex
/// count. The generalized problem is symmetrized to
/// `D^{-1/2} S D^{-1/2}` and solved densely.
pub fn fingerprint(state: &ConformalState, m: usize) -> Fingerprint {
    assert!(state.is_valid(), "state must satisfy triangle inequalities");
    let n = state.surface().num_vertices();
    assert!(m >= 1 && m <= n, "mode count out of range");

    let weights = state.cotan_weights();
    let areas = state.vertex_areas();
    let inv_sqrt: Vec<f64> = areas.iter().map(|a| 1.0 / a.sqrt()).collect();

    let mut mat = nalgebra::DMatrix::<f64>::zeros(n, n);
    for (&[i, j], &w) in state.surface().edges().iter().zip(weights.iter()) {
        mat[(i, j)] -= w * inv_sqrt[i] * inv_sqrt[j];
        mat[(j, i)] -= w * inv_sqrt[i] * inv_sqrt[j];
        mat[(i, i)] += w * inv_sqrt[i] * inv_sqrt[i];
        mat[(j, j)] += w * inv_sqrt[j] * inv_sqrt[j];
    }

    let eigen = nalgebra::SymmetricEigen::new(mat);
    let mut lambdas: Vec<f64> = eigen.eigenvalues.iter().cloned().collect();
    lambdas.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    let area = state.total_area();
    Fingerprint {
        spectrum: lambdas[..m].iter().map(|l| l * area).collect(),
    }
}

/// Fingerprint continuity along a loop family.
#[derive(Debug, Clone, Copy)]
pub struct LoopContinuity {
    /// Max over adjacent base pairs of the fingerprint sup-distance.
    pub max_gap: f64,
    /// The first and last fiber agree within [`LOOP_CLOSURE_TOL`].
    pub closed: bool,
}

/// Measures limit-family continuity over a loop base with `m` spectral
/// modes: fingerprint gaps across adjacent samples and closure of the loop.
pub fn loop_continuity(family: &FiberFamily, m: usize) -> Result<LoopContinuity, FiberedError> {
    if family.base.kind() != BaseKind::Loop {
        return Err(FiberedError::NotLoop);
    }
    let limits = family.limits.as_ref().ok_or(FiberedError::NotRun)?;
    let prints: Vec<Fingerprint> = limits.iter().map(|s| fingerprint(s, m)).collect();

    let max_gap = family
        .base
        .adjacency()
        .iter()
        .map(|&(a, b)| prints[a].sup_distance(&prints[b]))
        .fold(0.0_f64, f64::max);
    let closed = prints[0].sup_distance(prints.last().unwrap()) <= LOOP_CLOSURE_TOL;
    Ok(LoopContinuity { max_gap, closed })
}

#[derive(Serialize)]
struct EnvelopeJson {
    c0: f64,
    rate: f64,
    r2: f64,
    bound_satisfied: bool,
}

#[derive(Serialize)]
struct FamilyJson {
    base_kind: &'static str,
    points: usize,
    adjacency: Vec<(usize, usize)>,
    seed: u64,
    amplitude: f64,
    envelope: EnvelopeJson,
    fingerprints: Vec<Vec<f64>>,
}

/// Exports a run family to `dir`: one `fiber_<idx>.csv` per trace plus a
/// `family.json` with the base graph, the envelope fit and the limit
/// fingerprints (`m` modes).
pub fn export_family<P: AsRef<Path>>(
    family: &FiberFamily,
    dir: P,
    m: usize,
) -> Result<(), FiberedError> {
    let traces = family.traces.as_ref().ok_or(FiberedError::NotRun)?;
    let limits = family.limits.as_ref().ok_or(FiberedError::NotRun)?;
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;

    for (idx, trace) in traces.iter().enumerate() {
        write_trace_csv(trace, dir.join(format!("fiber_{idx}.csv"))).map_err(|e| match e {
            FlowError::Io(io) => FiberedError::Io(io),
            other => FiberedError::Fit(other),
        })?;
    }

    let envelope = uniform_envelope(family)?;
    let fingerprints: Vec<Vec<f64>> = limits
        .iter()
        .map(|s| fingerprint(s, m).spectrum().to_vec())
        .collect();

    let json = FamilyJson {
        base_kind: family.base.kind().as_str(),
        points: family.base.len(),
        adjacency: family.base.adjacency().to_vec(),
        seed: family.seed,
        amplitude: family.amplitude,
        envelope: EnvelopeJson {
            c0: envelope.c0,
            rate: envelope.rate,
            r2: envelope.r2,
            bound_satisfied: envelope.bound_satisfied,
        },
        fingerprints,
    };
    let mut text = serde_json::to_string_pretty(&json).expect("family serializes");
    text.push('\n');
    std::fs::write(dir.join("family.json"), text)?;
    Ok(())
}
