//! Finite-support lattice step laws: moments, lattice periods and
//! exponential tilting.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One lattice increment together with its (relative or normalized) weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub dx: i64,
    pub dy: i64,
    pub weight: f64,
}

impl Atom {
    pub fn step(&self) -> (i64, i64) {
        (self.dx, self.dy)
    }
}

/// Law of a single increment `X(1)` of the walk.
///
/// Atoms are kept sorted by `(dx, dy)`, carry distinct steps and strictly
/// positive weights. A distribution built through [`validate_steps`] is
/// normalized; [`StepDistribution::from_raw`] keeps the relative weights.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDistribution {
    atoms: Vec<Atom>,
    total_weight: f64,
    normalized: bool,
}

impl StepDistribution {
    /// Validates and merges raw `(dx, dy, weight)` triples without normalizing.
    pub fn from_raw(raw: &[(i64, i64, f64)]) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::EmptySteps);
        }
        let mut merged: BTreeMap<(i64, i64), f64> = BTreeMap::new();
        for &(dx, dy, weight) in raw {
            if !weight.is_finite() {
                return Err(Error::NonFiniteWeight { dx, dy });
            }
            if weight < 0.0 {
                return Err(Error::NegativeWeight { dx, dy, weight });
            }
            *merged.entry((dx, dy)).or_insert(0.0) += weight;
        }
        let atoms: Vec<Atom> = merged
            .into_iter()
            .filter(|&(_, w)| w > 0.0)
            .map(|((dx, dy), weight)| Atom { dx, dy, weight })
            .collect();
        let total_weight: f64 = atoms.iter().map(|a| a.weight).sum();
        if atoms.is_empty() || total_weight <= 0.0 {
            return Err(Error::ZeroTotalWeight);
        }
        if !total_weight.is_finite() {
            let a = atoms[0];
            return Err(Error::NonFiniteWeight { dx: a.dx, dy: a.dy });
        }
        Ok(StepDistribution {
            atoms,
            total_weight,
            normalized: false,
        })
    }

    /// Uniform law on the given steps (duplicates merge).
    pub fn uniform(steps: &[(i64, i64)]) -> Result<Self> {
        let raw: Vec<_> = steps.iter().map(|&(dx, dy)| (dx, dy, 1.0)).collect();
        validate_steps(&raw)
    }

    /// The uniform law on `{(1,-1), (1,1), (-1,1)}`.
    pub fn singular() -> Self {
        Self::uniform(&SINGULAR_STEPS).expect("static step set")
    }

    pub fn normalize(mut self) -> Self {
        if !self.normalized {
            for a in &mut self.atoms {
                a.weight /= self.total_weight;
            }
            self.total_weight = 1.0;
            self.normalized = true;
        }
        self
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Probability of each atom, whether or not the weights were normalized.
    pub fn probabilities(&self) -> impl Iterator<Item = (i64, i64, f64)> + '_ {
        let t = self.total_weight;
        self.atoms.iter().map(move |a| (a.dx, a.dy, a.weight / t))
    }

    pub fn prob_of(&self, dx: i64, dy: i64) -> f64 {
        self.atoms
            .iter()
            .find(|a| a.dx == dx && a.dy == dy)
            .map_or(0.0, |a| a.weight / self.total_weight)
    }

    pub fn steps(&self) -> Vec<(i64, i64)> {
        self.atoms.iter().map(Atom::step).collect()
    }

    /// `(min dx, max dx, min dy, max dy)` over the support.
    pub fn extent(&self) -> (i64, i64, i64, i64) {
        let mut e = (i64::MAX, i64::MIN, i64::MAX, i64::MIN);
        for a in &self.atoms {
            e.0 = e.0.min(a.dx);
            e.1 = e.1.max(a.dx);
            e.2 = e.2.min(a.dy);
            e.3 = e.3.max(a.dy);
        }
        e
    }

    /// Largest horizontal jump in absolute value.
    pub fn max_abs_dx(&self) -> i64 {
        self.atoms.iter().map(|a| a.dx.abs()).max().unwrap_or(0)
    }

    /// Marginal law of the vertical increment, sorted by jump.
    pub fn vertical_marginal(&self) -> Vec<(i64, f64)> {
        let mut m: BTreeMap<i64, f64> = BTreeMap::new();
        for (_, dy, p) in self.probabilities() {
            *m.entry(dy).or_insert(0.0) += p;
        }
        m.into_iter().collect()
    }

    /// Marginal law of the horizontal increment, sorted by jump.
    pub fn horizontal_marginal(&self) -> Vec<(i64, f64)> {
        let mut m: BTreeMap<i64, f64> = BTreeMap::new();
        for (dx, _, p) in self.probabilities() {
            *m.entry(dx).or_insert(0.0) += p;
        }
        m.into_iter().collect()
    }

    /// `E[exp(h . X)]` under the normalized law.
    pub fn mgf(&self, h: [f64; 2]) -> f64 {
        self.probabilities()
            .map(|(dx, dy, p)| p * (h[0] * dx as f64 + h[1] * dy as f64).exp())
            .sum()
    }
}

pub const SINGULAR_STEPS: [(i64, i64); 3] = [(1, -1), (1, 1), (-1, 1)];

/// Validates raw weighted steps and returns the normalized law.
///
/// Duplicate steps are merged by adding their weights; zero-weight atoms are
/// discarded.
pub fn validate_steps(raw: &[(i64, i64, f64)]) -> Result<StepDistribution> {
    StepDistribution::from_raw(raw).map(StepDistribution::normalize)
}

/// First and second central moments of the increment law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Moments {
    pub mu: [f64; 2],
    pub sigma: [[f64; 2]; 2],
}

impl Moments {
    pub fn det(&self) -> f64 {
        self.sigma[0][0] * self.sigma[1][1] - self.sigma[0][1] * self.sigma[1][0]
    }
}

pub fn compute_moments(sd: &StepDistribution) -> Moments {
    let mut mu = [0.0; 2];
    for (dx, dy, p) in sd.probabilities() {
        mu[0] += p * dx as f64;
        mu[1] += p * dy as f64;
    }
    let mut sigma = [[0.0; 2]; 2];
    for (dx, dy, p) in sd.probabilities() {
        let c = [dx as f64 - mu[0], dy as f64 - mu[1]];
        for i in 0..2 {
            for j in 0..2 {
                sigma[i][j] += p * c[i] * c[j];
            }
        }
    }
    // exact symmetry
    sigma[1][0] = sigma[0][1];
    Moments { mu, sigma }
}

/// Lattice decomposition `X_i = a_i + d_i Y_i` with `Y` aperiodic per coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LatticeStructure {
    pub a1: i64,
    pub d1: i64,
    pub a2: i64,
    pub d2: i64,
}

impl LatticeStructure {
    /// The trivial lattice `d1 = d2 = 1`.
    pub const UNIT: LatticeStructure = LatticeStructure {
        a1: 0,
        d1: 1,
        a2: 0,
        d2: 1,
    };

    pub fn d1d2(&self) -> i64 {
        self.d1 * self.d2
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.unsigned_abs(), b.unsigned_abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a as i64
}

pub fn lattice_decompose(sd: &StepDistribution) -> Result<LatticeStructure> {
    let axis = |axis: usize, values: Vec<i64>| -> Result<(i64, i64)> {
        let first = values[0];
        let d = values.iter().fold(0, |g, &v| gcd(g, v - first));
        if d == 0 {
            return Err(Error::DegenerateCoordinate { axis });
        }
        Ok((first.rem_euclid(d), d))
    };
    let (a1, d1) = axis(1, sd.atoms.iter().map(|a| a.dx).collect())?;
    let (a2, d2) = axis(2, sd.atoms.iter().map(|a| a.dy).collect())?;
    Ok(LatticeStructure { a1, d1, a2, d2 })
}

/// Whether `z` lies in the set `D_n` of points reachable modulo the lattice.
pub fn in_lattice_support(ls: &LatticeStructure, n: u64, z: (i64, i64)) -> bool {
    let n = n as i128;
    let ok = |zi: i64, a: i64, d: i64| (zi as i128 - a as i128 * n).rem_euclid(d as i128) == 0;
    ok(z.0, ls.a1, ls.d1) && ok(z.1, ls.a2, ls.d2)
}

/// Parameters of an exponential change of measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TiltParams {
    pub h: [f64; 2],
    /// `phi(h) = E[exp(h . X)]`.
    pub phi: f64,
}

/// Reweights every atom by `exp(h . step) / phi(h)`.
pub fn tilt(sd: &StepDistribution, h: [f64; 2]) -> (StepDistribution, TiltParams) {
    let expo: Vec<f64> = sd
        .atoms
        .iter()
        .map(|a| h[0] * a.dx as f64 + h[1] * a.dy as f64)
        .collect();
    let shift = expo.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let scaled: Vec<f64> = sd
        .probabilities()
        .zip(&expo)
        .map(|((_, _, p), e)| p * (e - shift).exp())
        .collect();
    let z: f64 = scaled.iter().sum();
    let atoms = sd
        .atoms
        .iter()
        .zip(&scaled)
        .map(|(a, w)| Atom {
            dx: a.dx,
            dy: a.dy,
            weight: w / z,
        })
        .collect();
    let phi = z * shift.exp();
    (
        StepDistribution {
            atoms,
            total_weight: 1.0,
            normalized: true,
        },
        TiltParams { h, phi },
    )
}

const DRIFT_RESIDUAL: f64 = 1e-12;
const DRIFT_MAX_ITER: usize = 100;
const DRIFT_DIVERGENCE: f64 = 1e3;
const NEWTON_ZONE: f64 = 1e-6;

/// Finds `h` with `grad log phi(h) = target` by damped Newton iteration from `h = 0`.
///
/// `log phi` is strictly convex for non-degenerate support, so the minimizer of
/// `log phi(h) - h . target` is unique when it exists. A target outside the
/// interior of the convex hull shows up as `|h|` running past `1e3`.
pub fn solve_drift(sd: &StepDistribution, target: [f64; 2]) -> Result<TiltParams> {
    if !(target[0].is_finite() && target[1].is_finite()) {
        return Err(Error::InvalidArgument("non-finite drift target".into()));
    }
    let objective = |h: [f64; 2]| -> f64 { sd.mgf(h).ln() - h[0] * target[0] - h[1] * target[1] };
    let mut h = [0.0f64; 2];
    let mut best_residual = f64::INFINITY;
    for iter in 0..DRIFT_MAX_ITER {
        let (tilted, _) = tilt(sd, h);
        let m = compute_moments(&tilted);
        let g = [m.mu[0] - target[0], m.mu[1] - target[1]];
        let residual = g[0].abs().max(g[1].abs());
        best_residual = best_residual.min(residual);
        if residual <= DRIFT_RESIDUAL * 1e-2 {
            break;
        }
        let det = m.det();
        let scale = (m.sigma[0][0] + m.sigma[1][1]).max(f64::MIN_POSITIVE);
        if det <= 1e-14 * scale * scale {
            if iter == 0 {
                return Err(Error::DegenerateSupport);
            }
            return Err(Error::InfeasibleDrift(target[0], target[1]));
        }
        // Newton direction: -Sigma^{-1} g
        let step = [
            -(m.sigma[1][1] * g[0] - m.sigma[0][1] * g[1]) / det,
            -(-m.sigma[1][0] * g[0] + m.sigma[0][0] * g[1]) / det,
        ];
        if residual < NEWTON_ZONE {
            // close to the root the objective changes below rounding; take the plain step
            h = [h[0] + step[0], h[1] + step[1]];
            continue;
        }
        let f0 = objective(h);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand = [h[0] + t * step[0], h[1] + t * step[1]];
            let f1 = objective(cand);
            if f1.is_finite() && f1 <= f0 {
                h = cand;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if h[0].hypot(h[1]) > DRIFT_DIVERGENCE {
            return Err(Error::InfeasibleDrift(target[0], target[1]));
        }
        if !accepted {
            // objective is flat to rounding; accept where we are if close enough
            break;
        }
    }
    let (tilted, params) = tilt(sd, h);
    let m = compute_moments(&tilted);
    let residual = (m.mu[0] - target[0]).abs().max((m.mu[1] - target[1]).abs());
    if residual > DRIFT_RESIDUAL {
        if h[0].hypot(h[1]) > DRIFT_DIVERGENCE / 10.0 {
            return Err(Error::InfeasibleDrift(target[0], target[1]));
        }
        return Err(Error::NotConverged {
            what: "drift solver",
            residual: residual.min(best_residual),
            iterations: DRIFT_MAX_ITER,
        });
    }
    Ok(params)
}
