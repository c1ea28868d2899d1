//! Normalized conformal flow `du_i/dt = k*_i - K_i` and its monitors.
//!
//! The target `k*` is the uniform curvature `2 pi chi / V`, so the total
//! defect is conserved and the flow drives every vertex toward the same
//! value. Monitors mirror the continuous theory: a potential solving
//! `L phi = k* - K` in the gauged sense, the maximum-principle function
//! `H = (K - k*) + 2 |grad phi|^2` whose maximum should decay exponentially,
//! and a first-difference proxy for `|grad (K - k*)|^2`.
//!
//! Stepping rules are explicit Euler, classical RK4 and an adaptive Euler
//! scheme that halves `dt` whenever a step leaves the triangle-inequality
//! region, grows it by 1.2x after ten clean steps up to `dt_max`, and clamps
//! it to the stability bound under which the deviation max cannot rise.

use std::io::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::mesh::{apply_weighted_laplacian, ConformalState, TriSurface};

/// `dt` never drops below this during step retries; going lower means the
/// state cannot move without leaving the valid region.
pub const DT_FLOOR: f64 = 1e-12;

/// Safety factor on the Euler stability bound used by the adaptive rule.
const STABILITY_SAFETY: f64 = 0.9;

/// Minimum number of samples a decay fit will accept.
pub const MIN_FIT_SAMPLES: usize = 10;

/// Errors from stepping, monitoring and fitting.
#[derive(Debug, Error)]
pub enum FlowError {
    #[error("initial state violates the triangle inequality")]
    InvalidInitial,
    #[error("state degenerated at t = {time}: no valid step with dt >= {floor}")]
    Degenerate { time: f64, floor: f64 },
    #[error("flow config invalid: {0}")]
    BadConfig(String),
    #[error("potential solve stalled: residual {residual} after {iters} iterations")]
    PoissonNoConvergence { residual: f64, iters: usize },
    #[error("decay fit window [{lo}, {hi}] holds {count} samples, need {min}")]
    InsufficientSamples { lo: f64, hi: f64, count: usize, min: usize },
    #[error("decay fit window holds non-positive sample q({t}) = {q}")]
    NonPositiveSample { t: f64, q: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Per-vertex curvature target of the normalized flow.
#[derive(Debug, Clone)]
pub struct TargetCurvature {
    k_star: Vec<f64>,
    k_smooth: f64,
}

impl TargetCurvature {
    /// Uniform target `k*_i = 2 pi chi / V`. The smooth normalization
    /// constant is recorded with magnitude one and the sign of `chi`
    /// (so `-1` for genus at least two).
    pub fn uniform(surface: &TriSurface) -> Self {
        let chi = surface.euler_characteristic() as f64;
        let v = surface.num_vertices() as f64;
        TargetCurvature {
            k_star: vec![2.0 * std::f64::consts::PI * chi / v; surface.num_vertices()],
            k_smooth: if chi > 0.0 {
                1.0
            } else if chi < 0.0 {
                -1.0
            } else {
                0.0
            },
        }
    }

    pub fn k_star(&self) -> &[f64] {
        &self.k_star
    }

    /// Normalization constant of the smooth comparison flow; metadata only.
    pub fn k_smooth(&self) -> f64 {
        self.k_smooth
    }
}

/// Time stepping rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepRule {
    ExplicitEuler,
    Rk4,
    /// Euler stepping under the halving/growth controller in [`run_flow`].
    Adaptive,
}

impl std::str::FromStr for StepRule {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "explicit-euler" => Ok(StepRule::ExplicitEuler),
            "rk4" => Ok(StepRule::Rk4),
            "adaptive" => Ok(StepRule::Adaptive),
            other => Err(format!(
                "unknown step rule `{other}` (expected explicit-euler, rk4 or adaptive)"
            )),
        }
    }
}

/// Parameters of a flow run.
#[derive(Debug, Clone)]
pub struct FlowConfig {
    pub dt_init: f64,
    pub dt_max: f64,
    /// Convergence threshold on `sup |K - k*|`.
    pub tol: f64,
    pub t_max: f64,
    pub step_rule: StepRule,
    /// Monitors are evaluated every this many accepted steps (the initial
    /// and final states are always sampled).
    pub monitor_every: usize,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            dt_init: 0.01,
            dt_max: 0.05,
            tol: 1e-8,
            t_max: 200.0,
            step_rule: StepRule::Adaptive,
            monitor_every: 1,
        }
    }
}

impl FlowConfig {
    /// Validates the parameter ranges.
    // Negated comparisons are deliberate: `!(x > 0.0)` also rejects NaN,
    // which the suggested `x <= 0.0` would let through.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn check(&self) -> Result<(), FlowError> {
        if !(self.dt_init > 0.0 && self.dt_init.is_finite()) {
            return Err(FlowError::BadConfig(format!("dt_init = {}", self.dt_init)));
        }
        if !(self.dt_max >= self.dt_init) {
            return Err(FlowError::BadConfig(format!(
                "dt_max = {} below dt_init = {}",
                self.dt_max, self.dt_init
            )));
        }
        if !(self.tol > 0.0) {
            return Err(FlowError::BadConfig(format!("tol = {}", self.tol)));
        }
        if !(self.t_max >= 0.0) {
            return Err(FlowError::BadConfig(format!("t_max = {}", self.t_max)));
        }
        if self.monitor_every == 0 {
            return Err(FlowError::BadConfig("monitor_every = 0".into()));
        }
        Ok(())
    }
}

/// One monitored point along a run.
#[derive(Debug, Clone, Copy)]
pub struct TraceSample {
    pub t: f64,
    /// `max_i (K_i - k*_i)`.
    pub max_dev: f64,
    /// `min_i (K_i - k*_i)`.
    pub min_dev: f64,
    /// `max_i |K_i - k*_i|`.
    pub sup_dev: f64,
    /// `max_i H_i` of the maximum-principle monitor.
    pub h_max: f64,
    /// Curvature first-difference proxy `max_edges (K_i - K_j)^2 / l_ij^2`.
    pub grad_norm: f64,
    /// Total induced area.
    pub area: f64,
}

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    TimeCap,
    Degenerate,
}

/// Monitored history of a run plus the trailing-window decay fit of
/// `sup_dev` (when enough positive samples exist).
#[derive(Debug, Clone)]
pub struct FlowTrace {
    pub samples: Vec<TraceSample>,
    pub terminated: Termination,
    /// Slope of the trailing-window fit of `log sup_dev`; `None` when the
    /// window is too short or contains non-positive samples.
    pub fitted_rate: Option<f64>,
    pub fit: Option<DecayFit>,
}

/// Least-squares exponential fit `q(t) ~ c0 * exp(rate * t)`.
#[derive(Debug, Clone, Copy)]
pub struct DecayFit {
    pub rate: f64,
    /// Coefficient of determination; NaN when the fit is degenerate.
    pub r2: f64,
    pub c0: f64,
    /// Set when the samples have zero variance, so no slope is identified.
    pub degenerate: bool,
}

/// `K_i - k*_i` per vertex.
pub fn curvature_deviation(state: &ConformalState, target: &TargetCurvature) -> Vec<f64> {
    state
        .vertex_curvature()
        .iter()
        .zip(target.k_star())
        .map(|(k, ks)| k - ks)
        .collect()
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, &x| m.max(x.abs()))
}

/// Largest `dt` at which an Euler step acts on the deviations as a convex
/// combination, so that their max cannot rise nor their min fall. The
/// curvature differential at the current lengths is twice the positive cotan
/// operator, giving the bound `2 dt sum_j w_ij <= 1` per vertex; absolute
/// values guard the obtuse case.
pub fn stability_cap(state: &ConformalState) -> f64 {
    let weights = state.cotan_weights();
    let mut row = vec![0.0_f64; state.surface().num_vertices()];
    for (e, w) in state.surface().edges().iter().zip(weights) {
        row[e[0]] += w.abs();
        row[e[1]] += w.abs();
    }
    let max_row = row.iter().cloned().fold(0.0_f64, f64::max);
    if max_row <= 0.0 {
        f64::INFINITY
    } else {
        STABILITY_SAFETY / (2.0 * max_row)
    }
}

/// Advances one step of `rule` from `state`. If the stepped state leaves the
/// triangle-inequality region the step is retried with `dt/2`, down to
/// [`DT_FLOOR`]; the `dt` actually used is returned with the new state. The
/// adaptive rule additionally clamps `dt` to [`stability_cap`].
pub fn flow_step(
    state: &ConformalState,
    target: &TargetCurvature,
    dt: f64,
    rule: StepRule,
) -> Result<(ConformalState, f64), FlowError> {
    let mut try_dt = match rule {
        StepRule::Adaptive => dt.min(stability_cap(state)),
        StepRule::ExplicitEuler | StepRule::Rk4 => dt,
    };
    loop {
        let candidate = match rule {
            StepRule::ExplicitEuler | StepRule::Adaptive => euler_candidate(state, target, try_dt),
            StepRule::Rk4 => rk4_candidate(state, target, try_dt),
        };
        if let Some(next) = candidate {
            if next.is_valid() {
                return Ok((next, try_dt));
            }
        }
        try_dt /= 2.0;
        if try_dt < DT_FLOOR {
            return Err(FlowError::Degenerate {
                time: state.time(),
                floor: DT_FLOOR,
            });
        }
    }
}

fn euler_candidate(
    state: &ConformalState,
    target: &TargetCurvature,
    dt: f64,
) -> Option<ConformalState> {
    let k = state.vertex_curvature();
    let u: Vec<f64> = state
        .u()
        .iter()
        .zip(k.iter().zip(target.k_star()))
        .map(|(u, (k, ks))| u + dt * (ks - k))
        .collect();
    Some(state.with_u(u, state.time() + dt))
}

/// Classical RK4 on `du/dt = k* - K(u)`; every intermediate state must stay
/// valid, otherwise the whole step is rejected.
fn rk4_candidate(
    state: &ConformalState,
    target: &TargetCurvature,
    dt: f64,
) -> Option<ConformalState> {
    let rhs = |s: &ConformalState| -> Vec<f64> {
        s.vertex_curvature()
            .iter()
            .zip(target.k_star())
            .map(|(k, ks)| ks - k)
            .collect()
    };
    let shift = |base: &ConformalState, dir: &[f64], h: f64| -> ConformalState {
        let u: Vec<f64> = base
            .u()
            .iter()
            .zip(dir)
            .map(|(u, d)| u + h * d)
            .collect();
        base.with_u(u, base.time() + h)
    };

    let k1 = rhs(state);
    let s2 = shift(state, &k1, dt / 2.0);
    if !s2.is_valid() {
        return None;
    }
    let k2 = rhs(&s2);
    let s3 = shift(state, &k2, dt / 2.0);
    if !s3.is_valid() {
        return None;
    }
    let k3 = rhs(&s3);
    let s4 = shift(state, &k3, dt);
    if !s4.is_valid() {
        return None;
    }
    let k4 = rhs(&s4);

    let u: Vec<f64> = state
        .u()
        .iter()
        .enumerate()
        .map(|(i, u)| u + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect();
    Some(state.with_u(u, state.time() + dt))
}

/// Runs the flow until `sup |K - k*| < tol` or `t >= t_max`, recording
/// monitors every `monitor_every` accepted steps (plus the initial and final
/// states). After the run, `sup_dev` over the second half of the trace is
/// fitted to a single exponential.
pub fn run_flow(
    state0: &ConformalState,
    target: &TargetCurvature,
    cfg: &FlowConfig,
) -> Result<(ConformalState, FlowTrace), FlowError> {
    cfg.check()?;
    if !state0.is_valid() {
        return Err(FlowError::InvalidInitial);
    }

    let sample_of = |state: &ConformalState| -> Result<TraceSample, FlowError> {
        let dev = curvature_deviation(state, target);
        let max_dev = dev.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min_dev = dev.iter().cloned().fold(f64::INFINITY, f64::min);
        let phi = poisson_potential(state, target)?;
        let h = h_monitor(state, target, &phi);
        Ok(TraceSample {
            t: state.time(),
            max_dev,
            min_dev,
            sup_dev: max_dev.abs().max(min_dev.abs()),
            h_max: h.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            grad_norm: curvature_gradient_norm(state),
            area: state.total_area(),
        })
    };

    let mut samples = vec![sample_of(state0)?];
    let mut state = state0.clone();
    let mut sup = samples[0].sup_dev;

    let terminated;
    if sup < cfg.tol {
        terminated = Termination::Converged;
    } else {
        let mut dt = cfg.dt_init.min(cfg.dt_max);
        let mut clean_steps = 0usize;
        let mut steps = 0usize;
        let mut last_sampled = 0usize;
        loop {
            let (next, dt_used) = flow_step(&state, target, dt, cfg.step_rule)?;
            state = next;
            steps += 1;

            if cfg.step_rule == StepRule::Adaptive {
                if dt_used < dt {
                    dt = dt_used;
                    clean_steps = 0;
                } else {
                    clean_steps += 1;
                    if clean_steps >= 10 {
                        dt = (dt * 1.2).min(cfg.dt_max);
                        clean_steps = 0;
                    }
                }
            }

            if steps.is_multiple_of(cfg.monitor_every) {
                samples.push(sample_of(&state)?);
                last_sampled = steps;
                sup = samples.last().unwrap().sup_dev;
            } else {
                sup = sup_norm(&curvature_deviation(&state, target));
            }

            if sup < cfg.tol {
                terminated = Termination::Converged;
            } else if state.time() >= cfg.t_max {
                terminated = Termination::TimeCap;
            } else {
                continue;
            }
            if last_sampled != steps {
                samples.push(sample_of(&state)?);
            }
            break;
        }
    }

    let t_final = samples.last().unwrap().t;
    let fit = fit_trace_window(&samples, t_final / 2.0, t_final);
    let fitted_rate = fit.as_ref().ok().and_then(|f| {
        if f.degenerate {
            None
        } else {
            Some(f.rate)
        }
    });

    let trace = FlowTrace {
        samples,
        terminated,
        fitted_rate,
        fit: fit.ok(),
    };
    Ok((state, trace))
}

fn fit_trace_window(samples: &[TraceSample], lo: f64, hi: f64) -> Result<DecayFit, FlowError> {
    let ts: Vec<f64> = samples.iter().map(|s| s.t).collect();
    let qs: Vec<f64> = samples.iter().map(|s| s.sup_dev).collect();
    fit_decay_rate(&ts, &qs, (lo, hi))
}

/// Ordinary least squares of `log q` against `t` over samples with
/// `lo <= t <= hi`. Returns the slope, `r^2` and `c0 = exp(intercept)`.
/// A window with zero `log q` variance is a degenerate fit (`rate = 0`,
/// `r2 = NaN`, `c0` the common value).
// `!(q > 0.0)` rather than `q <= 0.0`: NaN samples must fail too.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn fit_decay_rate(ts: &[f64], qs: &[f64], window: (f64, f64)) -> Result<DecayFit, FlowError> {
    assert_eq!(ts.len(), qs.len(), "one q per t");
    let (lo, hi) = window;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&t, &q) in ts.iter().zip(qs) {
        if t < lo || t > hi {
            continue;
        }
        if !(q > 0.0) {
            return Err(FlowError::NonPositiveSample { t, q });
        }
        xs.push(t);
        ys.push(q.ln());
    }
    if xs.len() < MIN_FIT_SAMPLES {
        return Err(FlowError::InsufficientSamples {
            lo,
            hi,
            count: xs.len(),
            min: MIN_FIT_SAMPLES,
        });
    }

    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();

    if syy <= 1e-28 * n {
        return Ok(DecayFit {
            rate: 0.0,
            r2: f64::NAN,
            c0: my.exp(),
            degenerate: true,
        });
    }
    if sxx <= 0.0 {
        return Err(FlowError::InsufficientSamples {
            lo,
            hi,
            count: 1,
            min: MIN_FIT_SAMPLES,
        });
    }

    let rate = sxy / sxx;
    let intercept = my - rate * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let p = intercept + rate * x;
            (y - p) * (y - p)
        })
        .sum();
    Ok(DecayFit {
        rate,
        r2: 1.0 - ss_res / syy,
        c0: intercept.exp(),
        degenerate: false,
    })
}

/// Solves `L phi = k* - K` for the gauged potential (area-weighted mean
/// zero), where `L` is the cotangent Laplacian of the current state. The
/// right-hand side sums to zero by the discrete Gauss-Bonnet identity, so
/// the projected system is solvable; conjugate gradients run on the
/// positive-semidefinite `-L` with the constant mode projected out.
pub fn poisson_potential(
    state: &ConformalState,
    target: &TargetCurvature,
) -> Result<Vec<f64>, FlowError> {
    let n = state.surface().num_vertices();
    let edges = state.surface().edges();
    let weights = state.cotan_weights();
    let dev = curvature_deviation(state, target);

    // With r = k* - K, the system L phi = r is S phi = dev for the PSD
    // operator S = -L. Project the constant mode out so b lies in range(S).
    let b: Vec<f64> = {
        let mean = dev.iter().sum::<f64>() / n as f64;
        dev.iter().map(|x| x - mean).collect()
    };

    let apply_s = |x: &[f64]| -> Vec<f64> {
        let lx = apply_weighted_laplacian(edges, &weights, x);
        lx.iter().map(|v| -v).collect()
    };

    let r_inf = sup_norm(&dev);
    let tol = 0.5 * (1e-10 * r_inf + 1e-12);

    let mut x = vec![0.0; n];
    let mut r = b.clone();
    let mut p = r.clone();
    let mut rs_old: f64 = r.iter().map(|v| v * v).sum();
    let max_iters = 20 * n.max(50);
    let mut iters = 0;
    while sup_norm(&r) > tol {
        if iters >= max_iters {
            return Err(FlowError::PoissonNoConvergence {
                residual: sup_norm(&r),
                iters,
            });
        }
        let sp = apply_s(&p);
        let denom: f64 = p.iter().zip(&sp).map(|(a, b)| a * b).sum();
        if denom <= 0.0 {
            // Search direction drifted into the kernel; restart from the
            // projected residual.
            let mean_r = r.iter().sum::<f64>() / n as f64;
            p = r.iter().map(|v| v - mean_r).collect();
            rs_old = p.iter().map(|v| v * v).sum();
            iters += 1;
            continue;
        }
        let alpha = rs_old / denom;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * sp[i];
        }
        // Re-project occasionally to keep roundoff from drifting into the
        // constant mode.
        if iters % 32 == 31 {
            let mean = r.iter().sum::<f64>() / n as f64;
            for v in &mut r {
                *v -= mean;
            }
        }
        let rs_new: f64 = r.iter().map(|v| v * v).sum();
        let beta = rs_new / rs_old;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rs_old = rs_new;
        iters += 1;
    }

    // Area-weighted gauge: integral of phi vanishes.
    let areas = state.vertex_areas();
    let total: f64 = areas.iter().sum();
    let mean = x.iter().zip(&areas).map(|(x, a)| x * a).sum::<f64>() / total;
    for v in &mut x {
        *v -= mean;
    }
    Ok(x)
}

/// Per-vertex Dirichlet energy density of `phi`:
/// `|grad phi|^2_i = sum_j w_ij (phi_i - phi_j)^2 / (2 A_i)`.
pub fn potential_gradient_density(state: &ConformalState, phi: &[f64]) -> Vec<f64> {
    let edges = state.surface().edges();
    let weights = state.cotan_weights();
    let areas = state.vertex_areas();
    let mut acc = vec![0.0; phi.len()];
    for (e, &[i, j]) in edges.iter().enumerate() {
        let d = phi[i] - phi[j];
        let v = weights[e] * d * d;
        acc[i] += v;
        acc[j] += v;
    }
    acc.iter().zip(&areas).map(|(s, a)| s / (2.0 * a)).collect()
}

/// Maximum-principle monitor `H_i = (K_i - k*_i) + 2 |grad phi|^2_i`.
///
/// At the uniformized state `H` vanishes identically, and its maximum is
/// expected to decay like `exp(k t)` along the flow.
pub fn h_monitor(state: &ConformalState, target: &TargetCurvature, phi: &[f64]) -> Vec<f64> {
    let dev = curvature_deviation(state, target);
    let grad = potential_gradient_density(state, phi);
    dev.iter().zip(&grad).map(|(d, g)| d + 2.0 * g).collect()
}

/// First-difference proxy for the squared curvature gradient:
/// `max` over edges of `(K_i - K_j)^2 / l_ij^2`.
pub fn curvature_gradient_norm(state: &ConformalState) -> f64 {
    let k = state.vertex_curvature();
    let mut max = 0.0_f64;
    for (e, &[i, j]) in state.surface().edges().iter().enumerate() {
        let l = state.edge_length(e);
        let d = k[i] - k[j];
        max = max.max(d * d / (l * l));
    }
    max
}

/// Formats a trace as CSV: header `t,max_dev,min_dev,sup_dev,h_max,grad_norm,area`,
/// one row per sample, floats with 17 significant digits, CRLF row breaks.
pub fn format_trace_csv(trace: &FlowTrace) -> String {
    let mut out = String::from("t,max_dev,min_dev,sup_dev,h_max,grad_norm,area\r\n");
    for s in &trace.samples {
        out.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\r\n",
            s.t, s.max_dev, s.min_dev, s.sup_dev, s.h_max, s.grad_norm, s.area
        ));
    }
    out
}

/// Writes [`format_trace_csv`] to a file.
pub fn write_trace_csv<P: AsRef<Path>>(trace: &FlowTrace, path: P) -> Result<(), FlowError> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(format_trace_csv(trace).as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::mesh::gen;

    fn quick_cfg() -> FlowConfig {
        FlowConfig {
            monitor_every: 4,
            ..FlowConfig::default()
        }
    }

    #[test]
    fn uniform_target_tracks_the_euler_characteristic() {
        let sphere = gen::sphere(1);
        let target = TargetCurvature::uniform(&sphere);
        let expect = 4.0 * std::f64::consts::PI / 12.0;
        assert!(target.k_star().iter().all(|&k| (k - expect).abs() < 1e-15));
        assert_eq!(target.k_smooth(), 1.0);

        assert_eq!(TargetCurvature::uniform(&gen::flat_torus(3, 3)).k_smooth(), 0.0);
        let genus2 = TargetCurvature::uniform(&gen::polygon_scheme(2, 3));
        assert_eq!(genus2.k_smooth(), -1.0);
        assert!(genus2.k_star().iter().all(|&k| k < 0.0));
    }

    #[test]
    fn fit_recovers_a_synthetic_exponential() {
        let ts: Vec<f64> = (0..200).map(|i| 0.05 * i as f64).collect();
        let qs: Vec<f64> = ts.iter().map(|t| 3.0 * (-2.0 * t).exp()).collect();
        let fit = fit_decay_rate(&ts, &qs, (0.0, 10.0)).unwrap();
        assert!((fit.rate + 2.0).abs() < 1e-12);
        assert!((fit.c0 - 3.0).abs() < 1e-10);
        assert!(fit.r2 > 1.0 - 1e-12);
        assert!(!fit.degenerate);

        // Restricting the window restricts the samples, not the model.
        let tail = fit_decay_rate(&ts, &qs, (5.0, 10.0)).unwrap();
        assert!((tail.rate + 2.0).abs() < 1e-9);
    }

    #[test]
    fn fit_flags_a_flat_window_as_degenerate() {
        let ts: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let qs = vec![0.125; 50];
        let fit = fit_decay_rate(&ts, &qs, (0.0, 50.0)).unwrap();
        assert!(fit.degenerate);
        assert_eq!(fit.rate, 0.0);
        assert!(fit.r2.is_nan());
        assert!((fit.c0 - 0.125).abs() < 1e-15);
    }

    #[test]
    fn fit_rejects_thin_and_non_positive_windows() {
        let ts: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let qs: Vec<f64> = ts.iter().map(|t| (-t).exp()).collect();
        match fit_decay_rate(&ts, &qs, (0.0, 5.0)).unwrap_err() {
            FlowError::InsufficientSamples { count: 6, min, .. } => {
                assert_eq!(min, MIN_FIT_SAMPLES)
            }
            other => panic!("unexpected error {other}"),
        }

        let mut qz = qs.clone();
        qz[3] = 0.0;
        assert!(matches!(
            fit_decay_rate(&ts, &qz, (0.0, 19.0)).unwrap_err(),
            FlowError::NonPositiveSample { .. }
        ));
    }

    #[test]
    fn constant_curvature_states_converge_without_stepping() {
        for surface in [gen::tetrahedron(), gen::flat_torus(4, 4)] {
            let surface = Arc::new(surface);
            let target = TargetCurvature::uniform(&surface);
            let state = ConformalState::reference(Arc::clone(&surface));
            let (limit, trace) = run_flow(&state, &target, &quick_cfg()).unwrap();
            assert_eq!(trace.terminated, Termination::Converged);
            assert_eq!(trace.samples.len(), 1);
            assert_eq!(limit.time(), 0.0);
            assert!(trace.samples[0].sup_dev < 1e-12);
            assert!(trace.samples[0].h_max.abs() < 1e-11);
        }
    }

    #[test]
    fn potential_solves_the_gauged_poisson_problem() {
        let surface = Arc::new(gen::sphere(2));
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let state = gen::random_valid_state(&surface, &mut rng, 0.25);
        let target = TargetCurvature::uniform(&surface);

        let phi = poisson_potential(&state, &target).unwrap();
        let dev = curvature_deviation(&state, &target);
        let r_inf = dev.iter().fold(0.0_f64, |m, &x| m.max(x.abs()));

        // S phi = -L phi should reproduce the deviation up to solver tolerance.
        let lphi = state.laplacian_apply(&phi);
        for (lp, d) in lphi.iter().zip(&dev) {
            assert!((lp + d).abs() <= 1e-10 * r_inf + 1e-12, "residual {}", (lp + d).abs());
        }

        // Area-weighted gauge.
        let areas = state.vertex_areas();
        let mean: f64 = phi.iter().zip(&areas).map(|(p, a)| p * a).sum();
        assert!(mean.abs() < 1e-12 * state.total_area());
    }

    #[test]
    fn monitor_vanishes_at_uniformized_states() {
        let surface = Arc::new(gen::flat_torus(5, 5));
        let state = ConformalState::reference(Arc::clone(&surface));
        let target = TargetCurvature::uniform(&surface);
        let phi = poisson_potential(&state, &target).unwrap();
        for h in h_monitor(&state, &target, &phi) {
            assert!(h.abs() < 1e-11);
        }
    }

    #[test]
    fn stability_cap_is_exact_on_the_flat_torus() {
        // Right isoceles grid: per-vertex weighted degree is 4 (four legs of
        // weight one, two diagonals of weight zero), so the cap is 0.9 / 8.
        let state = ConformalState::reference(Arc::new(gen::flat_torus(4, 4)));
        assert!((stability_cap(&state) - 0.1125).abs() < 1e-12);
    }

    #[test]
    fn adaptive_first_step_respects_the_stability_cap() {
        let surface = Arc::new(gen::polygon_scheme(3, 4));
        let state = ConformalState::reference(Arc::clone(&surface));
        let target = TargetCurvature::uniform(&surface);
        let cap = stability_cap(&state);
        let (next, dt_used) = flow_step(&state, &target, 10.0 * cap, StepRule::Adaptive).unwrap();
        assert!(next.is_valid());
        assert!(dt_used <= cap);
        assert!(dt_used >= cap / 2.0);
    }

    #[test]
    fn oversized_explicit_steps_halve_until_valid() {
        let surface = Arc::new(gen::polygon_scheme(2, 3));
        let state = ConformalState::reference(Arc::clone(&surface));
        let target = TargetCurvature::uniform(&surface);
        let (next, dt_used) = flow_step(&state, &target, 1e6, StepRule::ExplicitEuler).unwrap();
        assert!(next.is_valid());
        assert!(dt_used < 1.0);
    }

    #[test]
    fn curved_starts_converge_with_an_exponential_tail() {
        let surface = Arc::new(gen::sphere(2));
        let target = TargetCurvature::uniform(&surface);
        let state = ConformalState::reference(Arc::clone(&surface));
        // The sphere equilibrates in about one time unit, so sample every
        // step to keep the trailing fit window populated.
        let cfg = FlowConfig { monitor_every: 1, ..FlowConfig::default() };
        let (limit, trace) = run_flow(&state, &target, &cfg).unwrap();
        assert_eq!(trace.terminated, Termination::Converged);
        assert!(trace.samples.last().unwrap().sup_dev < 1e-8);
        let rate = trace.fitted_rate.expect("tail fit exists");
        assert!(rate < -0.01, "rate {rate}");
        assert!(trace.fit.unwrap().r2 > 0.99);
        // The limit is rounder than the start: curvature collapsed to k*.
        let dev = curvature_deviation(&limit, &target);
        assert!(dev.iter().all(|d| d.abs() < 1e-8));
    }

    #[test]
    fn deviation_extremes_contract_monotonically_on_the_hyperbolic_mesh() {
        let surface = Arc::new(gen::polygon_scheme(2, 5));
        let target = TargetCurvature::uniform(&surface);
        let state = ConformalState::reference(Arc::clone(&surface));
        let cfg = FlowConfig { monitor_every: 1, ..FlowConfig::default() };
        let (_, trace) = run_flow(&state, &target, &cfg).unwrap();
        assert_eq!(trace.terminated, Termination::Converged);
        for pair in trace.samples.windows(2).skip(1) {
            assert!(pair[1].max_dev <= pair[0].max_dev + 1e-12);
            assert!(pair[1].min_dev >= pair[0].min_dev - 1e-12);
        }
        assert!(trace.samples.last().unwrap().h_max < 1e-6);
    }

    #[test]
    fn rk4_and_adaptive_euler_share_the_limit_metric() {
        let surface = Arc::new(gen::polygon_scheme(2, 3));
        let target = TargetCurvature::uniform(&surface);
        let state = ConformalState::reference(Arc::clone(&surface));

        let adaptive = run_flow(&state, &target, &quick_cfg()).unwrap().0;
        let rk4_cfg = FlowConfig { step_rule: StepRule::Rk4, ..quick_cfg() };
        let rk4 = run_flow(&state, &target, &rk4_cfg).unwrap().0;

        // The uniformized factors agree up to an additive constant (the
        // metric is unique up to global scale in its conformal class).
        let diffs: Vec<f64> = adaptive.u().iter().zip(rk4.u()).map(|(a, b)| a - b).collect();
        let spread = diffs.iter().fold(f64::NEG_INFINITY, |m, &d| m.max(d))
            - diffs.iter().fold(f64::INFINITY, |m, &d| m.min(d));
        assert!(spread < 1e-6, "gauge spread {spread}");
    }

    #[test]
    fn time_cap_reports_and_stamps_the_final_state() {
        let surface = Arc::new(gen::polygon_scheme(2, 3));
        let target = TargetCurvature::uniform(&surface);
        let state = ConformalState::reference(Arc::clone(&surface));
        let cfg = FlowConfig { t_max: 0.05, ..FlowConfig::default() };
        let (stopped, trace) = run_flow(&state, &target, &cfg).unwrap();
        assert_eq!(trace.terminated, Termination::TimeCap);
        assert!(stopped.time() >= 0.05);
        assert_eq!(trace.samples.last().unwrap().t, stopped.time());
    }

    #[test]
    fn invalid_initial_data_is_rejected() {
        let surface = Arc::new(gen::tetrahedron());
        let target = TargetCurvature::uniform(&surface);
        let mut u = vec![0.0; 4];
        u[0] = -10.0;
        let state = ConformalState::new(Arc::clone(&surface), u);
        assert!(matches!(
            run_flow(&state, &target, &FlowConfig::default()),
            Err(FlowError::InvalidInitial)
        ));
    }

    #[test]
    fn config_ranges_are_validated() {
        let ok = FlowConfig::default();
        assert!(ok.check().is_ok());
        for (name, cfg) in [
            ("dt_init", FlowConfig { dt_init: 0.0, ..ok.clone() }),
            ("dt_max", FlowConfig { dt_max: 0.001, ..ok.clone() }),
            ("tol", FlowConfig { tol: 0.0, ..ok.clone() }),
            ("t_max", FlowConfig { t_max: -1.0, ..ok.clone() }),
            ("monitor_every", FlowConfig { monitor_every: 0, ..ok.clone() }),
        ] {
            let err = cfg.check().unwrap_err();
            assert!(err.to_string().contains(name), "{name}: {err}");
        }
    }

    #[test]
    fn monitor_cadence_thins_samples_but_keeps_endpoints() {
        let surface = Arc::new(gen::polygon_scheme(2, 3));
        let target = TargetCurvature::uniform(&surface);
        let state = ConformalState::reference(Arc::clone(&surface));
        let dense = run_flow(&state, &target, &FlowConfig { monitor_every: 1, ..FlowConfig::default() })
            .unwrap()
            .1;
        let sparse = run_flow(&state, &target, &FlowConfig { monitor_every: 7, ..FlowConfig::default() })
            .unwrap()
            .1;
        assert!(sparse.samples.len() < dense.samples.len());
        assert_eq!(dense.samples[0].t, 0.0);
        assert_eq!(sparse.samples[0].t, 0.0);
        let (a, b) = (
            dense.samples.last().unwrap().t,
            sparse.samples.last().unwrap().t,
        );
        assert!((a - b).abs() < 0.4, "final times {a} vs {b}");
    }

    #[test]
    fn trace_csv_is_byte_stable_with_crlf_rows() {
        let trace = FlowTrace {
            samples: vec![TraceSample {
                t: 0.5,
                max_dev: 0.25,
                min_dev: -0.125,
                sup_dev: 0.25,
                h_max: 1.0 / 3.0,
                grad_norm: 2.0,
                area: 6.0,
            }],
            terminated: Termination::Converged,
            fitted_rate: None,
            fit: None,
        };
        let text = format_trace_csv(&trace);
        assert_eq!(
            text,
            "t,max_dev,min_dev,sup_dev,h_max,grad_norm,area\r\n\
             5.0000000000000000e-1,2.5000000000000000e-1,-1.2500000000000000e-1,\
             2.5000000000000000e-1,3.3333333333333331e-1,2.0000000000000000e0,6.0000000000000000e0\r\n"
        );
        assert_eq!(text, format_trace_csv(&trace));
        // 17 significant digits round-trip doubles exactly.
        let field = text.lines().nth(1).unwrap().split(',').nth(4).unwrap();
        assert_eq!(field.parse::<f64>().unwrap(), 1.0 / 3.0);
    }
}
