//! The quadrant harmonic function `W` and its certified brackets.
//!
//! `E[V(x2 + S2(n)); T_x > n]` is nonincreasing in `n` and tends to `W(x)`.
//! The gap is `E[V(x2 + S2(sigma_x)); tau_x > sigma_x, n < sigma_x < inf]`,
//! bounded here for every alive state `z` by
//! `exp(-theta (z1 - c)) [(a + b z2) G0 + b G1]` where
//! `V(u) <= a + b u+`, `c` is the last killed horizontal value,
//! `G0 = sum_k phi^k`, `G1 = sum_k phi^k sqrt(k s^2 + k^2 m^2)`, `phi = E[exp(-theta X1)]`
//! and `m`, `s^2` are the vertical mean and variance under the `(-theta, 0)` tilt.
//! `theta` ranges over a grid in `(0, gamma)`.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::Serialize;

use crate::dp::{horizontal_chernoff_root, ExitSpec, Kernel, QuadrantMeasure, DEFAULT_PRUNE};
use crate::error::{Error, Result};
use crate::model::{compute_moments, tilt, StepDistribution};
use crate::pipeline::{ConditionedWalk, LinearBound};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TracePoint {
    pub n: u64,
    pub upper: f64,
    pub lower: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HarmonicEstimate {
    pub value: f64,
    pub upper: f64,
    pub lower: f64,
    pub n_used: u64,
    /// False when `upper - lower` is still above the requested tolerance.
    pub converged: bool,
    pub barrier: i64,
    pub trace: Vec<TracePoint>,
}

impl HarmonicEstimate {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WOptions {
    pub n_max: u64,
    pub tol: f64,
    pub prune: f64,
    /// Horizontal barrier; chosen from `tol` when absent.
    pub barrier: Option<i64>,
}

impl Default for WOptions {
    fn default() -> Self {
        WOptions {
            n_max: 1 << 14,
            tol: 1e-9,
            prune: DEFAULT_PRUNE,
            barrier: None,
        }
    }
}

const THETA_GRID: usize = 24;

#[derive(Debug, Clone, Copy)]
struct TailTerm {
    theta: f64,
    g0: f64,
    g1: f64,
}

fn tail_terms(sd: &StepDistribution, gamma: f64) -> Vec<TailTerm> {
    if !gamma.is_finite() {
        return Vec::new();
    }
    (1..=THETA_GRID)
        .map(|k| {
            let theta = gamma * k as f64 / (THETA_GRID + 1) as f64;
            let phi = sd.mgf([-theta, 0.0]);
            let (tilted, _) = tilt(sd, [-theta, 0.0]);
            let m = compute_moments(&tilted);
            let (mv, sv) = (m.mu[1], m.sigma[1][1]);
            let g0 = phi / (1.0 - phi);
            let mut g1 = 0.0;
            let mut pk = 1.0;
            let mut k = 0u64;
            loop {
                k += 1;
                pk *= phi;
                let kf = k as f64;
                let term = pk * (kf * sv + kf * kf * mv * mv).sqrt();
                g1 += term;
                if term < 1e-18 * g1 || k > 50_000_000 {
                    break;
                }
            }
            TailTerm { theta, g0, g1 }
        })
        .collect()
}

fn default_barrier(sd: &StepDistribution, x: (i64, i64), gamma: f64, bound: LinearBound, tol: f64) -> i64 {
    let max_dx = sd.max_abs_dx();
    if !gamma.is_finite() {
        return max_dx.max(x.0).max(1);
    }
    let scale = bound.a + bound.b * (x.1.max(0) as f64 + 10.0);
    let reach = ((1e3 * scale.max(1.0) / tol).ln() / (0.5 * gamma)).ceil() as i64;
    max_dx + reach.max(1)
}

/// Bracket for `lim_n E[f(x2 + S2(n)); T_x > n]` with `f` harmonic for the
/// vertically killed walk and bounded by `bound`.
pub fn series_bracket(
    sd: &StepDistribution,
    spec: ExitSpec,
    x: (i64, i64),
    f: &(dyn Fn(i64) -> f64 + Sync),
    bound: LinearBound,
    opts: &WOptions,
) -> Result<HarmonicEstimate> {
    let gamma = horizontal_chernoff_root(sd)?;
    let barrier = opts
        .barrier
        .unwrap_or_else(|| default_barrier(sd, x, gamma, bound, opts.tol));
    let mut m = QuadrantMeasure::new(Kernel::probabilities(sd), spec, x, 1.0, Some(barrier), opts.prune)?;
    let terms = tail_terms(sd, gamma);
    let c = spec.alive_min1().map_or(i64::MIN / 4, |a| a - 1);
    let max_dy = sd.extent().3.max(0);

    let mut trace = Vec::new();
    let mut n_next = 0u64;
    loop {
        while m.n() < n_next {
            m.step();
        }
        let n = m.n();
        let dropped_v = m.dropped() * (bound.a + bound.b * (x.1 + n as i64 * max_dy).max(0) as f64);
        let upper = m.vertical_functional(f) + dropped_v;
        let leak = m.leak_stats();
        let mut best = if terms.is_empty() { 0.0 } else { f64::INFINITY };
        let mut by_column: BTreeMap<i64, (f64, f64)> = BTreeMap::new();
        for (x1, x2, w) in m.cells() {
            let e = by_column.entry(x1).or_insert((0.0, 0.0));
            e.0 += w;
            e.1 += w * x2 as f64;
        }
        for t in &terms {
            let (mut a0, mut a1) = (0.0, 0.0);
            for (&x1, &(s0, s1)) in &by_column {
                let e = (-t.theta * (x1 - c) as f64).exp();
                a0 += s0 * e;
                a1 += s1 * e;
            }
            let mut total = t.g0 * (bound.a * a0 + bound.b * a1) + bound.b * t.g1 * a0;
            if let Some(lx) = leak.min_x1 {
                let e = (-t.theta * (lx - c) as f64).exp();
                total += e * (t.g0 * (bound.a * leak.mass + bound.b * leak.mass_x2) + bound.b * t.g1 * leak.mass);
            }
            best = best.min(total);
        }
        let roundoff = 4.0 * (n as f64 + 1.0) * f64::EPSILON * upper.abs();
        let lower = (upper - best - roundoff).max(0.0);
        trace.push(TracePoint { n, upper, lower });
        let done = upper - lower <= opts.tol;
        if done || n >= opts.n_max {
            return Ok(HarmonicEstimate {
                value: upper,
                upper,
                lower,
                n_used: n,
                converged: done,
                barrier,
                trace,
            });
        }
        n_next = if n == 0 { 1 } else { (2 * n).min(opts.n_max) };
    }
}

/// `W(x)` for the conditioned walk.
pub fn w_series(cw: &ConditionedWalk, x: (i64, i64), opts: &WOptions) -> Result<HarmonicEstimate> {
    series_bracket(&cw.sd, cw.spec(), x, &|u| cw.v_at(u), cw.v_linear_bound(), opts)
}

/// `W*(x)` for the tilted singular walk, computed with `V(u) = u`.
pub fn w_star(x: (i64, i64), opts: &WOptions) -> Result<HarmonicEstimate> {
    let cw = ConditionedWalk::tilted_singular();
    series_bracket(
        &cw.sd,
        cw.spec(),
        x,
        &|u| u.max(0) as f64,
        LinearBound { a: 0.0, b: 1.0 },
        opts,
    )
}

/// `|W(x) - E[W(x + X); x + X survives]|`.
pub fn w_check_harmonic(
    sd: &StepDistribution,
    w: impl Fn((i64, i64)) -> f64,
    x: (i64, i64),
    spec: ExitSpec,
) -> f64 {
    let image: f64 = sd
        .probabilities()
        .filter(|&(dx, dy, _)| spec.survives((x.0 + dx, x.1 + dy)))
        .map(|(dx, dy, p)| p * w((x.0 + dx, x.1 + dy)))
        .sum();
    (w(x) - image).abs()
}

/// `V(x2) P^(sigma_x > n)` under the Doob transform by `V` of the vertically
/// killed walk. Mass beyond `barrier` is counted as never exiting.
pub fn w_hat_survival(cw: &ConditionedWalk, x: (i64, i64), n: u64, barrier: i64, prune: f64) -> Result<f64> {
    let spec = cw.spec();
    if !spec.survives(x) {
        return Err(Error::StartOutside(x.0, x.1));
    }
    let v0 = cw.v_at(x.1);
    if n == 0 {
        return Ok(v0);
    }
    let a1 = spec.alive_min1().unwrap_or(i64::MIN);
    let atoms: Vec<(i64, i64, f64)> = cw.sd.probabilities().collect();
    let mut current: HashMap<(i64, i64), f64> = HashMap::new();
    let mut escaped = 0.0;
    if x.0 > barrier {
        escaped = 1.0;
    } else {
        current.insert(x, 1.0);
    }
    for _ in 0..n {
        let mut next: HashMap<(i64, i64), f64> = HashMap::with_capacity(current.len() * 2);
        for (&(z1, z2), &mass) in &current {
            let vz = cw.v_at(z2);
            for &(dx, dy, p) in &atoms {
                let t = (z1 + dx, z2 + dy);
                let vt = cw.v_at(t.1);
                if vt == 0.0 || t.0 < a1 {
                    continue;
                }
                let w = mass * p * vt / vz;
                if t.0 > barrier {
                    escaped += w;
                } else {
                    *next.entry(t).or_insert(0.0) += w;
                }
            }
        }
        next.retain(|_, w| *w >= prune);
        current = next;
    }
    // sum in a fixed order so that the result is reproducible
    let mut cells: Vec<_> = current.into_iter().collect();
    cells.sort_by_key(|c| c.0);
    let alive: f64 = cells.iter().map(|c| c.1).sum();
    Ok(v0 * (alive + escaped))
}

/// Memoized `W` evaluations keyed by lattice point.
pub struct WGrid<'a> {
    cw: &'a ConditionedWalk,
    opts: WOptions,
    memo: Mutex<BTreeMap<(i64, i64), HarmonicEstimate>>,
}

impl<'a> WGrid<'a> {
    pub fn new(cw: &'a ConditionedWalk, opts: WOptions) -> Self {
        WGrid {
            cw,
            opts,
            memo: Mutex::new(BTreeMap::new()),
        }
    }

    pub fn get(&self, x: (i64, i64)) -> Result<HarmonicEstimate> {
        if let Some(e) = self.memo.lock().expect("memo lock").get(&x) {
            return Ok(e.clone());
        }
        let e = w_series(self.cw, x, &self.opts)?;
        self.memo.lock().expect("memo lock").insert(x, e.clone());
        Ok(e)
    }

    /// Evaluates all `points` concurrently.
    pub fn fill(&self, points: &[(i64, i64)]) -> Result<()> {
        points.par_iter().try_for_each(|&p| self.get(p).map(|_| ()))
    }

    pub fn snapshot(&self) -> BTreeMap<(i64, i64), HarmonicEstimate> {
        self.memo.lock().expect("memo lock").clone()
    }

    /// CSV with columns `x1,x2,lower,value,upper,n_used`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x1", "x2", "lower", "value", "upper", "n_used"])
            .map_err(|e| Error::Io(e.to_string()))?;
        for ((x1, x2), e) in self.snapshot() {
            w.serialize((x1, x2, e.lower, e.value, e.upper, e.n_used))
                .map_err(|e| Error::Io(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}
