//! Ladder heights of the vertical component and their renewal functions.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::StepDistribution;

/// Which lattice values of a coordinate count as exited.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum BoundaryConvention {
    /// Exit once the coordinate is `<= 0`; the alive range starts at 1.
    KillOnNonpositive,
    /// Exit once the coordinate is `< 0`; the alive range starts at 0.
    KillOnNegative,
}

impl BoundaryConvention {
    pub const ALL: [BoundaryConvention; 2] = [
        BoundaryConvention::KillOnNonpositive,
        BoundaryConvention::KillOnNegative,
    ];

    /// Smallest coordinate value that survives.
    pub fn alive_min(self) -> i64 {
        match self {
            BoundaryConvention::KillOnNonpositive => 1,
            BoundaryConvention::KillOnNegative => 0,
        }
    }

    pub fn survives(self, c: i64) -> bool {
        c >= self.alive_min()
    }

    pub fn name(self) -> &'static str {
        match self {
            BoundaryConvention::KillOnNonpositive => "nonpositive",
            BoundaryConvention::KillOnNegative => "negative",
        }
    }
}

impl Default for BoundaryConvention {
    fn default() -> Self {
        BoundaryConvention::KillOnNonpositive
    }
}

impl fmt::Display for BoundaryConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BoundaryConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "nonpositive" | "kill-on-nonpositive" | "le0" => Ok(BoundaryConvention::KillOnNonpositive),
            "negative" | "kill-on-negative" | "lt0" => Ok(BoundaryConvention::KillOnNegative),
            other => Err(Error::Parse(format!("unknown boundary convention '{other}'"))),
        }
    }
}

/// Law of a ladder height (overshoot at first passage).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LadderDist {
    /// `pmf[k]` is the probability that the overshoot equals `k`.
    pub pmf: Vec<f64>,
    /// Mass still unabsorbed when the iteration stopped.
    pub truncation_error: f64,
    pub mean: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl LadderDist {
    pub fn prob(&self, k: usize) -> f64 {
        self.pmf.get(k).copied().unwrap_or(0.0)
    }

    /// A ladder law given explicitly, e.g. for tests or externally known laws.
    pub fn from_pmf(pmf: Vec<f64>) -> Self {
        let mean = pmf.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
        let total: f64 = pmf.iter().sum();
        LadderDist {
            pmf,
            truncation_error: (1.0 - total).max(0.0),
            mean,
            iterations: 0,
            converged: true,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LadderOptions {
    pub tol: f64,
    pub max_steps: usize,
    /// Close the iteration exactly when the walk cannot jump over the threshold.
    pub skip_free_closure: bool,
    pub prune: f64,
}

impl Default for LadderOptions {
    fn default() -> Self {
        LadderOptions {
            tol: 1e-10,
            max_steps: 1_000_000,
            skip_free_closure: true,
            prune: 1e-300,
        }
    }
}

pub const DRIFT_TOL: f64 = 1e-10;

fn check_zero_drift(law: &[(i64, f64)]) -> Result<()> {
    let mean: f64 = law.iter().map(|&(j, p)| j as f64 * p).sum();
    if mean.abs() > DRIFT_TOL {
        return Err(Error::NonZeroVerticalDrift(mean));
    }
    Ok(())
}

/// Absorbing iteration for the first passage of a 1-D walk below `alive_min`,
/// started at 0 and counted from the first step on.
///
/// The overshoot recorded is `-S(tau)`. The returned law is flagged as not
/// converged when `max_steps` ran out before the surviving mass reached `tol`.
pub fn ladder_iteration(law: &[(i64, f64)], alive_min: i64, opts: &LadderOptions) -> LadderDist {
    let min_jump = law.iter().map(|&(j, _)| j).min().unwrap_or(0);
    let max_jump = law.iter().map(|&(j, _)| j).max().unwrap_or(0);
    let max_overshoot = (-min_jump).max(0) as usize + 1;
    let mut pmf = vec![0.0; max_overshoot + 1];

    // alive[i] is the mass at height alive_min + i
    let mut alive: Vec<f64> = Vec::new();

    // first step, taken from 0 which may lie outside the alive range
    for &(j, p) in law {
        if j < alive_min {
            pmf[(-j) as usize] += p;
        } else {
            let i = (j - alive_min) as usize;
            if alive.len() <= i {
                alive.resize(i + 1, 0.0);
            }
            alive[i] += p;
        }
    }
    let mut steps = 1usize;

    let skip_free = min_jump >= -1;
    let mut remaining: f64 = alive.iter().sum();
    if opts.skip_free_closure && skip_free {
        // recurrent walk that cannot jump over the level: every path lands on alive_min - 1
        let k = (1 - alive_min) as usize;
        pmf[k] += remaining;
        remaining = 0.0;
        alive.clear();
    }

    let mut next: Vec<f64> = Vec::new();
    while remaining > opts.tol && steps < opts.max_steps {
        let up = max_jump.max(0) as usize;
        next.clear();
        next.resize(alive.len() + up, 0.0);
        for (i, &m) in alive.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            for &(j, p) in law {
                let t = i as i64 + j;
                if t < 0 {
                    let s = alive_min + t;
                    pmf[(-s) as usize] += m * p;
                } else {
                    next[t as usize] += m * p;
                }
            }
        }
        while next.last().is_some_and(|&v| v < opts.prune) {
            next.pop();
        }
        std::mem::swap(&mut alive, &mut next);
        remaining = alive.iter().sum();
        steps += 1;
    }

    while pmf.len() > 1 && pmf.last() == Some(&0.0) {
        pmf.pop();
    }
    let mean = pmf.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
    LadderDist {
        pmf,
        truncation_error: remaining,
        mean,
        iterations: steps,
        converged: remaining <= opts.tol,
    }
}

fn finish(ld: LadderDist) -> Result<LadderDist> {
    if ld.converged {
        Ok(ld)
    } else {
        Err(Error::NotConverged {
            what: "ladder iteration",
            residual: ld.truncation_error,
            iterations: ld.iterations,
        })
    }
}

/// Descending ladder height of the vertical component: weak (`<= 0`) under
/// [`BoundaryConvention::KillOnNonpositive`], strict (`< 0`) otherwise.
pub fn descending_ladder(
    sd: &StepDistribution,
    conv: BoundaryConvention,
    tol: f64,
) -> Result<LadderDist> {
    descending_ladder_with(
        &sd.vertical_marginal(),
        conv,
        &LadderOptions {
            tol,
            ..LadderOptions::default()
        },
    )
}

pub fn descending_ladder_with(
    vertical: &[(i64, f64)],
    conv: BoundaryConvention,
    opts: &LadderOptions,
) -> Result<LadderDist> {
    finish(descending_ladder_partial(vertical, conv, opts)?)
}

/// As [`descending_ladder_with`], returning the truncated law even when the
/// tolerance is not met; check [`LadderDist::converged`].
pub fn descending_ladder_partial(
    vertical: &[(i64, f64)],
    conv: BoundaryConvention,
    opts: &LadderOptions,
) -> Result<LadderDist> {
    check_zero_drift(vertical)?;
    Ok(ladder_iteration(vertical, conv.alive_min(), opts))
}

/// Strict ascending ladder height `S2(tau+)` with `tau+ = inf{n >= 1 : S2(n) > 0}`.
pub fn ascending_ladder(sd: &StepDistribution, tol: f64) -> Result<LadderDist> {
    ascending_ladder_with(
        &sd.vertical_marginal(),
        &LadderOptions {
            tol,
            ..LadderOptions::default()
        },
    )
}

pub fn ascending_ladder_with(vertical: &[(i64, f64)], opts: &LadderOptions) -> Result<LadderDist> {
    finish(ascending_ladder_partial(vertical, opts)?)
}

pub fn ascending_ladder_partial(vertical: &[(i64, f64)], opts: &LadderOptions) -> Result<LadderDist> {
    check_zero_drift(vertical)?;
    let reflected: Vec<(i64, f64)> = vertical.iter().map(|&(j, p)| (-j, p)).collect();
    // S2 > 0 is -S2 < 0: a strict descent of the reflected walk
    Ok(ladder_iteration(&reflected, 0, opts))
}

pub fn kappa(ld: &LadderDist) -> f64 {
    (2.0 / std::f64::consts::PI).sqrt() * ld.mean
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RenewalKind {
    V,
    H,
}

impl FromStr for RenewalKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "V" | "v" => Ok(RenewalKind::V),
            "H" | "h" => Ok(RenewalKind::H),
            other => Err(Error::Parse(format!("unknown renewal kind '{other}'"))),
        }
    }
}

/// Renewal function tabulated on `0..=U`.
///
/// Queries past `U` continue linearly with the asymptotic slope `1 / mean`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RenewalTable {
    pub kind: RenewalKind,
    pub values: Vec<f64>,
    pub mean: f64,
}

impl RenewalTable {
    pub fn max_u(&self) -> i64 {
        self.values.len() as i64 - 1
    }

    pub fn value(&self, u: i64) -> f64 {
        if u < 0 {
            return 0.0;
        }
        let top = self.max_u();
        if u <= top {
            self.values[u as usize]
        } else {
            self.values[top as usize] + (u - top) as f64 / self.mean
        }
    }

    /// Real arguments floor to the lattice.
    pub fn value_at(&self, u: f64) -> f64 {
        self.value(u.floor() as i64)
    }

    /// `1 / mean`, the slope in the elementary renewal theorem.
    pub fn slope(&self) -> f64 {
        1.0 / self.mean
    }
}

/// Renewal density `r(j) = sum_k P(chi_1 + ... + chi_k = j)`, `k >= 0`, on `0..=top`.
///
/// An atom at zero is folded in geometrically: `r(j)(1 - p0) = [j = 0] + sum_{i>=1} f(i) r(j-i)`.
fn renewal_density(ld: &LadderDist, top: usize) -> Result<Vec<f64>> {
    let p0 = ld.prob(0);
    if ld.mean <= 0.0 || p0 >= 1.0 {
        return Err(Error::ZeroLadderMean);
    }
    let scale = 1.0 / (1.0 - p0);
    let mut r = vec![0.0; top + 1];
    for j in 0..=top {
        let mut acc = if j == 0 { 1.0 } else { 0.0 };
        for (i, &f) in ld.pmf.iter().enumerate().skip(1).take(j) {
            acc += f * r[j - i];
        }
        r[j] = acc * scale;
    }
    Ok(r)
}

/// `V(u) = 1{u >= 0} + sum_{k >= 1} P(chi_1 + ... + chi_k <= u)` for a descending law.
pub fn renewal_v(ld: &LadderDist, max_u: usize) -> Result<RenewalTable> {
    let r = renewal_density(ld, max_u)?;
    let mut values = Vec::with_capacity(max_u + 1);
    let mut acc = 0.0;
    for x in r {
        acc += x;
        values.push(acc);
    }
    Ok(RenewalTable {
        kind: RenewalKind::V,
        values,
        mean: ld.mean,
    })
}

/// `H(u) = 1{u > 0} + sum_{k >= 1} P(chi_1 + ... + chi_k < u)` for an ascending law.
pub fn renewal_h(ld: &LadderDist, max_u: usize) -> Result<RenewalTable> {
    let r = renewal_density(ld, max_u)?;
    let mut values = Vec::with_capacity(max_u + 1);
    values.push(0.0);
    let mut acc = 0.0;
    for x in r.into_iter().take(max_u) {
        acc += x;
        values.push(acc);
    }
    Ok(RenewalTable {
        kind: RenewalKind::H,
        values,
        mean: ld.mean,
    })
}

/// `x2 - E[x2 + S2(tau); tau <= horizon]` with the unresolved alive mass as a band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DefectEstimate {
    pub value: f64,
    pub band: f64,
    pub alive_mass: f64,
}

pub fn harmonic_defect_v(
    sd: &StepDistribution,
    x2: i64,
    conv: BoundaryConvention,
    horizon: usize,
    band_tol: f64,
) -> Result<DefectEstimate> {
    let law = sd.vertical_marginal();
    check_zero_drift(&law)?;
    if x2 < 1 {
        return Err(Error::StartOutside(0, x2));
    }
    let lo = conv.alive_min();
    let min_jump = law.iter().map(|&(j, _)| j).min().unwrap_or(0);
    let max_jump = law.iter().map(|&(j, _)| j).max().unwrap_or(0).max(0) as usize;
    let mut alive = vec![0.0; (x2 - lo) as usize + 1];
    if x2 >= lo {
        alive[(x2 - lo) as usize] = 1.0;
    }
    let mut exit_sum = 0.0;
    let mut next = Vec::new();
    for _ in 0..horizon {
        next.clear();
        next.resize(alive.len() + max_jump, 0.0);
        for (i, &m) in alive.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            for &(j, p) in &law {
                let t = i as i64 + j;
                if t < 0 {
                    exit_sum += m * p * (lo + t) as f64;
                } else {
                    next[t as usize] += m * p;
                }
            }
        }
        while next.last().is_some_and(|&v| v < 1e-300) {
            next.pop();
        }
        std::mem::swap(&mut alive, &mut next);
    }
    let alive_mass: f64 = alive.iter().sum();
    // the missing exits land in [lo + min_jump, lo - 1]
    let lowest = (lo + min_jump.min(-1)) as f64;
    let highest = (lo - 1) as f64;
    let mid = 0.5 * (lowest + highest) * alive_mass;
    let band = 0.5 * (highest - lowest) * alive_mass;
    if band > band_tol {
        return Err(Error::BandNotReached {
            requested: band_tol,
            achieved: band,
        });
    }
    Ok(DefectEstimate {
        value: x2 as f64 - exit_sum - mid,
        band,
        alive_mass,
    })
}

/// Outcome of testing the one-step identity `V(x2) = E[V(x2 + S2(1)); survive]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConventionReport {
    /// The kill rule under which the series renewal function is harmonic.
    pub series_convention: BoundaryConvention,
    pub residual_nonpositive: f64,
    pub residual_negative: f64,
}

pub const CONVENTION_TOL: f64 = 1e-9;
pub const CONVENTION_RANGE: std::ops::RangeInclusive<i64> = 1..=50;

/// Largest one-step harmonicity residual of `v` over `x2` in [`CONVENTION_RANGE`].
pub fn harmonicity_residual(
    vertical: &[(i64, f64)],
    v: &RenewalTable,
    conv: BoundaryConvention,
) -> f64 {
    CONVENTION_RANGE
        .map(|x2| {
            let image: f64 = vertical
                .iter()
                .filter(|&&(j, _)| conv.survives(x2 + j))
                .map(|&(j, p)| p * v.value(x2 + j))
                .sum();
            (v.value(x2) - image).abs()
        })
        .fold(0.0, f64::max)
}

/// Determines the unique kill rule for which the series `v` is harmonic.
pub fn select_convention(sd: &StepDistribution, v: &RenewalTable) -> Result<ConventionReport> {
    let law = sd.vertical_marginal();
    let r_np = harmonicity_residual(&law, v, BoundaryConvention::KillOnNonpositive);
    let r_neg = harmonicity_residual(&law, v, BoundaryConvention::KillOnNegative);
    let series_convention = match (r_np <= CONVENTION_TOL, r_neg <= CONVENTION_TOL) {
        (true, false) => BoundaryConvention::KillOnNonpositive,
        (false, true) => BoundaryConvention::KillOnNegative,
        (false, false) => return Err(Error::NoConvention(r_np, r_neg)),
        (true, true) => return Err(Error::AmbiguousConvention),
    };
    Ok(ConventionReport {
        series_convention,
        residual_nonpositive: r_np,
        residual_negative: r_neg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const FAIR: [(i64, f64); 2] = [(-1, 0.5), (1, 0.5)];
    const LAZY: [(i64, f64); 3] = [(-1, 0.25), (0, 0.5), (1, 0.25)];

    fn vertical_sd(law: &[(i64, f64)]) -> StepDistribution {
        let raw: Vec<_> = law.iter().map(|&(j, p)| (1, j, p)).collect();
        crate::model::validate_steps(&raw).unwrap()
    }

    fn no_closure() -> LadderOptions {
        LadderOptions {
            skip_free_closure: false,
            ..LadderOptions::default()
        }
    }

    #[test]
    fn fair_weak_descending() {
        let ld = descending_ladder(&vertical_sd(&FAIR), BoundaryConvention::KillOnNonpositive, 1e-10)
            .unwrap();
        assert_eq!(ld.pmf, vec![0.5, 0.5]);
        assert!(ld.truncation_error <= 1e-10);
    }

    #[test]
    fn lazy_weak_descending() {
        let ld = descending_ladder(&vertical_sd(&LAZY), BoundaryConvention::KillOnNonpositive, 1e-10)
            .unwrap();
        assert!((ld.prob(0) - 0.75).abs() < 1e-15);
        assert!((ld.prob(1) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn strict_descending_is_unit_for_skip_free() {
        let ld = descending_ladder(&vertical_sd(&FAIR), BoundaryConvention::KillOnNegative, 1e-10)
            .unwrap();
        assert_eq!(ld.prob(0), 0.0);
        assert!((ld.prob(1) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn drift_is_rejected() {
        let sd = vertical_sd(&[(-1, 1.0)]);
        assert!(matches!(
            descending_ladder(&sd, BoundaryConvention::KillOnNonpositive, 1e-10),
            Err(Error::NonZeroVerticalDrift(_))
        ));
    }

    #[test]
    fn ascending_examples() {
        for law in [&FAIR[..], &LAZY[..]] {
            let ld = ascending_ladder(&vertical_sd(law), 1e-10).unwrap();
            assert_eq!(ld.prob(0), 0.0);
            assert!((ld.prob(1) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn ascending_with_double_jump() {
        // {-1, +2} with (2/3, 1/3): f(k) = P(enter (0, inf) at 2 | start at -k)
        // solves f(k) = f(k-2)/3 + 2f(k+1)/3 with f(-2) = 1, f(-1) = 0, whose
        // bounded solution is 1/3 + (-1/2)^k / 6, so P(chi+ = 2) = f(0) = 1/2.
        let law = [(-1, 2.0 / 3.0), (2, 1.0 / 3.0)];
        let ld = ascending_ladder_with(
            &law,
            &LadderOptions {
                tol: 1e-2,
                ..LadderOptions::default()
            },
        )
        .unwrap();
        assert_eq!(ld.prob(0), 0.0);
        assert!(ld.prob(2) <= 0.5 + 1e-12 && ld.prob(2) + ld.truncation_error >= 0.5 - 1e-12);
        assert!(ld.prob(1) <= 0.5 + 1e-12 && ld.prob(1) + ld.truncation_error >= 0.5 - 1e-12);

        let capped = ascending_ladder_with(
            &law,
            &LadderOptions {
                tol: 1e-10,
                max_steps: 1000,
                ..LadderOptions::default()
            },
        );
        assert!(matches!(capped, Err(Error::NotConverged { iterations: 1000, .. })));
    }

    #[test]
    fn fair_iteration_without_closure_matches_closure() {
        let opts = LadderOptions {
            tol: 1e-2,
            ..no_closure()
        };
        let ld = ladder_iteration(&FAIR, 1, &opts);
        assert!(ld.converged);
        assert!((ld.prob(1) - 0.5).abs() < 1e-15);
        assert!((ld.prob(0) + ld.truncation_error - 0.5).abs() < 1e-14);
    }

    #[test]
    fn renewal_v_bernoulli() {
        let ld = LadderDist::from_pmf(vec![0.5, 0.5]);
        let v = renewal_v(&ld, 600).unwrap();
        assert_eq!(&v.values[..3], &[2.0, 4.0, 6.0]);
        assert_eq!(v.value(-1), 0.0);
        for u in 0..=600 {
            assert!((v.value(u) - 2.0 * (u as f64 + 1.0)).abs() < 1e-9);
        }
    }

    /// Direct truncated series: 1{u>=0} + sum_{k=1}^{K} P(chi_1 + ... + chi_k <= u).
    fn series_oracle(pmf: &[f64], u: usize, k_max: usize) -> f64 {
        let mut conv = vec![1.0];
        let mut total = 1.0;
        for _ in 0..k_max {
            let mut next = vec![0.0; (conv.len() + pmf.len() - 1).min(u + 1)];
            for (a, &x) in conv.iter().enumerate() {
                for (b, &y) in pmf.iter().enumerate() {
                    if a + b <= u {
                        next[a + b] += x * y;
                    }
                }
            }
            conv = next;
            total += conv.iter().sum::<f64>();
        }
        total
    }

    #[test]
    fn renewal_v_matches_brute_force_series() {
        for pmf in [vec![0.5, 0.5], vec![0.2, 0.5, 0.3], vec![0.75, 0.25]] {
            let v = renewal_v(&LadderDist::from_pmf(pmf.clone()), 10).unwrap();
            for u in 0..=10usize {
                let oracle = series_oracle(&pmf, u, 400);
                assert!((v.value(u as i64) - oracle).abs() < 1e-10, "{pmf:?} {u}");
            }
        }
    }

    #[test]
    fn renewal_deterministic() {
        let one = LadderDist::from_pmf(vec![0.0, 1.0]);
        let v = renewal_v(&one, 20).unwrap();
        for u in 0..=20 {
            assert!((v.value(u) - (u as f64 + 1.0)).abs() < 1e-12);
        }
        let h = renewal_h(&one, 100).unwrap();
        assert_eq!(h.value(0), 0.0);
        for y in 1..=100 {
            assert!((h.value(y) - y as f64).abs() < 1e-12);
        }
        let two = LadderDist::from_pmf(vec![0.0, 0.0, 1.0]);
        let h2 = renewal_h(&two, 10).unwrap();
        assert_eq!(h2.value(3), 2.0);
    }

    #[test]
    fn zero_mean_rejected() {
        let zero = LadderDist::from_pmf(vec![1.0]);
        assert_eq!(renewal_v(&zero, 5), Err(Error::ZeroLadderMean));
    }

    #[test]
    fn kappa_values() {
        let c = (2.0 / std::f64::consts::PI).sqrt();
        assert!((kappa(&LadderDist::from_pmf(vec![0.5, 0.5])) - 0.5 * c).abs() < 1e-15);
        assert!((kappa(&LadderDist::from_pmf(vec![0.0, 1.0])) - c).abs() < 1e-15);
        assert!((kappa(&LadderDist::from_pmf(vec![0.75, 0.25])) - 0.25 * c).abs() < 1e-15);
    }

    #[test]
    fn defect_examples() {
        let fair = vertical_sd(&FAIR);
        let d = harmonic_defect_v(&fair, 3, BoundaryConvention::KillOnNonpositive, 10, 0.0).unwrap();
        assert_eq!(d.value, 3.0);
        let lazy = vertical_sd(&LAZY);
        let d = harmonic_defect_v(&lazy, 2, BoundaryConvention::KillOnNonpositive, 10, 0.0).unwrap();
        assert_eq!(d.value, 2.0);
        let d = harmonic_defect_v(&fair, 3, BoundaryConvention::KillOnNegative, 10, 0.0).unwrap();
        assert_eq!(d.value, 4.0);
    }

    #[test]
    fn defect_band_reported() {
        let law = [(-2, 0.25), (0, 0.25), (1, 0.5)];
        let sd = vertical_sd(&law);
        let r = harmonic_defect_v(&sd, 3, BoundaryConvention::KillOnNonpositive, 10, 1e-12);
        assert!(matches!(r, Err(Error::BandNotReached { .. })));
    }

    #[test]
    fn fair_convention_is_negative() {
        let sd = vertical_sd(&FAIR);
        let ld = descending_ladder(&sd, BoundaryConvention::KillOnNonpositive, 1e-10).unwrap();
        let v = renewal_v(&ld, 200).unwrap();
        let rep = select_convention(&sd, &v).unwrap();
        assert_eq!(rep.series_convention, BoundaryConvention::KillOnNegative);
        assert!(rep.residual_nonpositive > 0.5);
    }
}
