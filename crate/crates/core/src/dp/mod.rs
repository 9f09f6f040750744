//! Exact finite-n probabilities and path counts for the killed walk.

mod measure;

pub use measure::{
    ExitSpec, Kernel, LeakStats, QuadrantMeasure, Region, VerticalMeasure, Weight,
};

use num_bigint::BigUint;

use crate::error::{Error, Result};
use crate::ladder::BoundaryConvention;
use crate::model::{in_lattice_support, lattice_decompose, StepDistribution};

/// Horizontal truncation policy of the quadrant DP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Barrier {
    /// Track the full horizontal range.
    None,
    At(i64),
    /// Smallest barrier whose leak bound is at most [`AUTO_BARRIER_TARGET`].
    #[default]
    Auto,
}

pub const AUTO_BARRIER_TARGET: f64 = 1e-12;
pub const DEFAULT_PRUNE: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpOptions {
    pub barrier: Barrier,
    /// Cells below this weight are dropped; their total is reported.
    pub prune: f64,
}

impl Default for DpOptions {
    fn default() -> Self {
        DpOptions {
            barrier: Barrier::Auto,
            prune: DEFAULT_PRUNE,
        }
    }
}

impl DpOptions {
    pub fn with_prune(prune: f64) -> Self {
        DpOptions {
            prune,
            ..DpOptions::default()
        }
    }

    pub fn without_barrier(mut self) -> Self {
        self.barrier = Barrier::None;
        self
    }
}

/// Positive root `gamma` of `E[exp(-gamma X1)] = 1`.
///
/// `P(min_k S1(k) <= -m) <= exp(-gamma m)` follows from the martingale
/// `exp(-gamma S1(k))`. Infinite when no step moves left.
pub fn horizontal_chernoff_root(sd: &StepDistribution) -> Result<f64> {
    let marg = sd.horizontal_marginal();
    let mu: f64 = marg.iter().map(|&(j, p)| j as f64 * p).sum();
    if mu <= 0.0 {
        return Err(Error::InfeasibleBarrier(format!(
            "horizontal drift {mu} is not positive"
        )));
    }
    if marg.iter().all(|&(j, _)| j >= 0) {
        return Ok(f64::INFINITY);
    }
    let log_mgf = |g: f64| -> f64 {
        let shift = marg.iter().map(|&(j, _)| -g * j as f64).fold(f64::NEG_INFINITY, f64::max);
        shift + marg.iter().map(|&(j, p)| p * (-g * j as f64 - shift).exp()).sum::<f64>().ln()
    };
    let mut hi = 1.0;
    while log_mgf(hi) <= 0.0 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    // log_mgf < 0 on (0, root) by convexity
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if log_mgf(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Barrier `L` with `exp(-gamma (L - max dx)) <= target`.
pub fn barrier_for(sd: &StepDistribution, target: f64) -> Result<i64> {
    let gamma = horizontal_chernoff_root(sd)?;
    let max_dx = sd.max_abs_dx();
    if gamma.is_infinite() {
        return Ok(max_dx.max(1));
    }
    Ok(max_dx + (-(target.ln()) / gamma).ceil() as i64)
}

/// Resolves the barrier for a quadrant or right-half-plane run; `None` otherwise.
pub fn resolve_barrier(sd: &StepDistribution, spec: &ExitSpec, barrier: Barrier) -> Result<Option<i64>> {
    if spec.alive_min1().is_none() {
        return Ok(None);
    }
    match barrier {
        Barrier::None => Ok(None),
        Barrier::At(l) => {
            if l < sd.max_abs_dx() {
                return Err(Error::BarrierTooSmall {
                    barrier: l,
                    max_dx: sd.max_abs_dx(),
                });
            }
            horizontal_chernoff_root(sd)?;
            Ok(Some(l))
        }
        Barrier::Auto => barrier_for(sd, AUTO_BARRIER_TARGET).map(Some),
    }
}

/// Bound on the survival error of leaked mass: leaked mass times the Chernoff
/// bound for returning to the vertical axis from beyond the barrier.
pub fn leak_error_bound(sd: &StepDistribution, barrier: Option<i64>, leaked: f64) -> f64 {
    let Some(l) = barrier else {
        return 0.0;
    };
    if leaked == 0.0 {
        return 0.0;
    }
    match horizontal_chernoff_root(sd) {
        Ok(g) if g.is_infinite() => 0.0,
        Ok(g) => leaked * (-g * (l - sd.max_abs_dx()) as f64).exp(),
        Err(_) => f64::INFINITY,
    }
}

/// A probability together with a bound on its truncation error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounded {
    pub value: f64,
    pub error_bound: f64,
}

pub fn float_measure(
    sd: &StepDistribution,
    x: (i64, i64),
    spec: ExitSpec,
    opts: &DpOptions,
) -> Result<QuadrantMeasure<f64>> {
    let barrier = resolve_barrier(sd, &spec, opts.barrier)?;
    QuadrantMeasure::new(Kernel::probabilities(sd), spec, x, 1.0, barrier, opts.prune)
}

/// Error bound of a survival probability read off `m`.
pub fn survival_error_bound(sd: &StepDistribution, m: &QuadrantMeasure<f64>) -> f64 {
    leak_error_bound(sd, m.barrier(), m.leak_stats().mass) + m.dropped()
}

/// `P(T_x > n)` under `spec`.
pub fn survival_prob(
    sd: &StepDistribution,
    x: (i64, i64),
    n: u64,
    spec: ExitSpec,
    opts: &DpOptions,
) -> Result<Bounded> {
    let mut m = float_measure(sd, x, spec, opts)?;
    m.advance(n);
    Ok(Bounded {
        value: m.total_alive(),
        error_bound: survival_error_bound(sd, &m),
    })
}

/// `P(x + S(n) = y, T_x > n)`. Runs without a barrier so that the horizontal
/// position stays exact; the error bound is the pruned mass.
pub fn local_prob(
    sd: &StepDistribution,
    x: (i64, i64),
    y: (i64, i64),
    n: u64,
    spec: ExitSpec,
    opts: &DpOptions,
) -> Result<Bounded> {
    if !spec.survives(x) {
        return Err(Error::StartOutside(x.0, x.1));
    }
    let ls = lattice_decompose(sd)?;
    if !in_lattice_support(&ls, n, (y.0 - x.0, y.1 - x.1)) || !spec.survives(y) {
        return Ok(Bounded {
            value: 0.0,
            error_bound: 0.0,
        });
    }
    let mut m = float_measure(sd, x, spec, &opts.without_barrier())?;
    m.advance(n);
    Ok(Bounded {
        value: m.local(y.0, y.1).unwrap_or(0.0),
        error_bound: m.dropped(),
    })
}

/// `P(tau_x > n)` through the one-dimensional vertical DP.
pub fn half_plane_survival(
    sd: &StepDistribution,
    x2: i64,
    n: u64,
    conv: BoundaryConvention,
) -> Result<f64> {
    if !conv.survives(x2) {
        return Err(Error::StartOutside(0, x2));
    }
    let vertical = sd.vertical_marginal();
    let mut vm = VerticalMeasure::point(x2, 1.0);
    for _ in 0..n {
        vm.step(&vertical, Some(conv.alive_min()), DEFAULT_PRUNE);
    }
    Ok(vm.total())
}

/// `P(tau_x > n)` for every `n` in `0..=n_max`.
pub fn half_plane_survival_curve(
    sd: &StepDistribution,
    x2: i64,
    n_max: u64,
    conv: BoundaryConvention,
) -> Result<Vec<f64>> {
    if !conv.survives(x2) {
        return Err(Error::StartOutside(0, x2));
    }
    let vertical = sd.vertical_marginal();
    let mut vm = VerticalMeasure::point(x2, 1.0);
    let mut out = vec![1.0];
    for _ in 0..n_max {
        vm.step(&vertical, Some(conv.alive_min()), DEFAULT_PRUNE);
        out.push(vm.total());
    }
    Ok(out)
}

/// `P(x + S(n) = y, tau_x > n)`: only the vertical kill applies.
pub fn half_plane_local(
    sd: &StepDistribution,
    x: (i64, i64),
    y: (i64, i64),
    n: u64,
    conv: BoundaryConvention,
) -> Result<f64> {
    local_prob(sd, x, y, n, ExitSpec::upper(conv), &DpOptions::default()).map(|b| b.value)
}

pub fn counting_measure(
    steps: &[(i64, i64)],
    x: (i64, i64),
    conv: BoundaryConvention,
) -> Result<QuadrantMeasure<BigUint>> {
    if steps.is_empty() {
        return Err(Error::EmptySteps);
    }
    QuadrantMeasure::new(
        Kernel::counting(steps),
        ExitSpec::quadrant(conv),
        x,
        BigUint::from(1u32),
        None,
        0.0,
    )
}

/// Number of `n`-step paths from `x` to `y` that stay in the quadrant.
pub fn count_paths(
    steps: &[(i64, i64)],
    x: (i64, i64),
    y: (i64, i64),
    n: u64,
    conv: BoundaryConvention,
) -> Result<BigUint> {
    let mut m = counting_measure(steps, x, conv)?;
    m.advance(n);
    Ok(m.local(y.0, y.1).unwrap_or_default())
}

/// Number of `n`-step quadrant paths from `x` ending on the line `{(k, 1)}`.
/// The empty path counts when `x` is already on the line.
pub fn count_line(
    steps: &[(i64, i64)],
    x: (i64, i64),
    n: u64,
    conv: BoundaryConvention,
) -> Result<BigUint> {
    let mut m = counting_measure(steps, x, conv)?;
    m.advance(n);
    Ok(m.row(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{tilt, SINGULAR_STEPS};

    fn tilted() -> StepDistribution {
        tilt(&StepDistribution::singular(), [0.0, -0.5 * 2f64.ln()]).0
    }

    const NP: BoundaryConvention = BoundaryConvention::KillOnNonpositive;

    #[test]
    fn one_step_from_corner() {
        let sd = StepDistribution::singular();
        let mut m = float_measure(&sd, (1, 1), ExitSpec::quadrant(NP), &DpOptions::default()).unwrap();
        m.step();
        let cells: Vec<_> = m.cells().map(|(a, b, v)| (a, b, *v)).collect();
        assert_eq!(cells.len(), 1);
        assert_eq!((cells[0].0, cells[0].1), (2, 2));
        assert!((cells[0].2 - 1.0 / 3.0).abs() < 1e-16);
        assert!((m.killed() - 2.0 / 3.0).abs() < 1e-16);
    }

    #[test]
    fn counting_multiplies_by_step_count_far_from_boundary() {
        let mut m = counting_measure(&SINGULAR_STEPS, (50, 50), NP).unwrap();
        m.advance(3);
        assert_eq!(m.total_alive(), BigUint::from(27u32));
        assert!(Weight::is_zero(&m.killed()));
    }

    #[test]
    fn tilted_survival_examples() {
        let sd = tilted();
        let spec = ExitSpec::quadrant(NP);
        let o = DpOptions::default();
        assert_eq!(survival_prob(&sd, (1, 1), 0, spec, &o).unwrap().value, 1.0);
        assert!((survival_prob(&sd, (1, 1), 1, spec, &o).unwrap().value - 0.25).abs() < 1e-16);
        assert!((survival_prob(&sd, (1, 1), 2, spec, &o).unwrap().value - 0.25).abs() < 1e-16);
        let y31 = local_prob(&sd, (1, 1), (3, 1), 2, spec, &o).unwrap().value;
        assert!((y31 - 0.125).abs() < 1e-16);
        let y13 = local_prob(&sd, (1, 1), (1, 3), 2, spec, &o).unwrap().value;
        assert!((y13 - 0.0625).abs() < 1e-16);
        assert_eq!(local_prob(&sd, (1, 1), (2, 1), 2, spec, &o).unwrap().value, 0.0);
    }

    #[test]
    fn half_plane_examples() {
        let fair = crate::model::validate_steps(&[(1, 1, 1.0), (1, -1, 1.0)]).unwrap();
        assert_eq!(half_plane_survival(&fair, 1, 0, NP).unwrap(), 1.0);
        assert_eq!(half_plane_survival(&fair, 1, 1, NP).unwrap(), 0.5);
        assert_eq!(half_plane_survival(&fair, 1, 2, NP).unwrap(), 0.5);

        let sd = StepDistribution::singular();
        let one = half_plane_local(&sd, (0, 1), (1, 2), 1, NP).unwrap();
        assert!((one - 1.0 / 3.0).abs() < 1e-16);
        // the path via (1, 0) dies, the path via (1, 2) survives
        let two = half_plane_local(&sd, (0, 1), (2, 1), 2, NP).unwrap();
        assert!((two - 1.0 / 9.0).abs() < 1e-16);
    }

    #[test]
    fn counting_examples() {
        let c = |x, y, n| count_paths(&SINGULAR_STEPS, x, y, n, NP).unwrap();
        assert_eq!(c((1, 1), (2, 2), 1), BigUint::from(1u32));
        assert_eq!(c((1, 1), (3, 1), 2), BigUint::from(1u32));
        assert_eq!(c((1, 1), (1, 3), 2), BigUint::from(1u32));
        let m = |n| count_line(&SINGULAR_STEPS, (1, 1), n, NP).unwrap();
        assert_eq!(m(0), BigUint::from(1u32));
        assert_eq!(m(1), BigUint::from(0u32));
        assert_eq!(m(2), BigUint::from(1u32));
    }

    #[test]
    fn chernoff_root_of_tilted_walk() {
        let g = horizontal_chernoff_root(&tilted()).unwrap();
        assert!((g - 3f64.ln()).abs() < 1e-14);
        assert_eq!(barrier_for(&tilted(), 1e-12).unwrap(), 27);
    }

    #[test]
    fn barrier_validation() {
        let sd = tilted();
        let spec = ExitSpec::quadrant(NP);
        assert!(matches!(
            resolve_barrier(&sd, &spec, Barrier::At(0)),
            Err(Error::BarrierTooSmall { .. })
        ));
        let drifting_left = crate::model::validate_steps(&[(-1, 1, 1.0), (-1, -1, 1.0), (1, 0, 1.0)])
            .unwrap();
        assert!(matches!(
            resolve_barrier(&drifting_left, &spec, Barrier::Auto),
            Err(Error::InfeasibleBarrier(_))
        ));
        assert_eq!(
            resolve_barrier(&drifting_left, &ExitSpec::upper(NP), Barrier::Auto).unwrap(),
            None
        );
    }

    #[test]
    fn start_beyond_barrier_leaks_whole_mass() {
        let sd = tilted();
        let mut m = QuadrantMeasure::new(
            Kernel::probabilities(&sd),
            ExitSpec::quadrant(NP),
            (40, 3),
            1.0,
            Some(27),
            DEFAULT_PRUNE,
        )
        .unwrap();
        assert_eq!(m.leak_stats().mass, 1.0);
        m.advance(5);
        let vertical = half_plane_survival(&sd, 3, 5, NP).unwrap();
        assert!((m.total_alive() - vertical).abs() < 1e-15);
    }

    #[test]
    fn conservation_over_long_run() {
        let sd = tilted();
        let mut m = float_measure(&sd, (2, 3), ExitSpec::quadrant(NP), &DpOptions::default()).unwrap();
        for _ in 0..3000 {
            m.step();
        }
        let total = m.total_alive() + m.killed() + m.dropped();
        assert!((total - 1.0).abs() < 3e-12, "{total}");
    }

    #[test]
    fn start_outside_is_rejected() {
        let sd = tilted();
        assert_eq!(
            survival_prob(&sd, (0, 1), 3, ExitSpec::quadrant(NP), &DpOptions::default()),
            Err(Error::StartOutside(0, 1))
        );
        assert!(survival_prob(
            &sd,
            (0, 1),
            3,
            ExitSpec::quadrant(BoundaryConvention::KillOnNegative),
            &DpOptions::default()
        )
        .is_ok());
    }
}
