//! Validated bundle of everything downstream modules need about a walk.

use serde::Serialize;

use crate::asymptotics::GaussParams;
use crate::dp::{horizontal_chernoff_root, ExitSpec};
use crate::error::{Error, Result};
use crate::ladder::{
    ascending_ladder, descending_ladder, renewal_h, renewal_v, select_convention,
    BoundaryConvention, ConventionReport, LadderDist, RenewalTable, DRIFT_TOL,
};
use crate::model::{compute_moments, lattice_decompose, tilt, LatticeStructure, Moments, StepDistribution};

pub const LADDER_TOL: f64 = 1e-10;
pub const DEFAULT_TABLE_SIZE: usize = 8192;

/// A step law with zero vertical and positive horizontal drift, its ladder
/// laws, renewal tables and limit constants.
///
/// The series renewal function is harmonic under its own kill rule
/// (`convention.series_convention`); [`ConditionedWalk::v_at`] shifts it to the
/// kill rule the DP uses.
#[derive(Debug, Clone)]
pub struct ConditionedWalk {
    pub sd: StepDistribution,
    pub moments: Moments,
    pub lattice: LatticeStructure,
    pub gauss: GaussParams,
    pub down: LadderDist,
    pub up: LadderDist,
    pub v: RenewalTable,
    pub h: RenewalTable,
    pub convention: ConventionReport,
    pub kill: BoundaryConvention,
    /// `sqrt(2/pi) E[chi-] / sigma2`.
    pub kappa: f64,
    /// `sqrt(2/pi) E[chi+] / sigma2`.
    pub kappa_prime: f64,
    /// Positive root of `E[exp(-gamma X1)] = 1`.
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearBound {
    pub a: f64,
    pub b: f64,
}

impl ConditionedWalk {
    pub fn new(sd: StepDistribution, kill: BoundaryConvention) -> Result<Self> {
        Self::with_table_size(sd, kill, DEFAULT_TABLE_SIZE)
    }

    pub fn with_table_size(sd: StepDistribution, kill: BoundaryConvention, max_u: usize) -> Result<Self> {
        let sd = sd.normalize();
        let moments = compute_moments(&sd);
        if moments.mu[1].abs() > DRIFT_TOL {
            return Err(Error::NonZeroVerticalDrift(moments.mu[1]));
        }
        if moments.mu[0] <= 0.0 {
            return Err(Error::NonPositiveHorizontalDrift(moments.mu[0]));
        }
        let gauss = GaussParams::from_moments(&moments)?;
        let lattice = lattice_decompose(&sd)?;
        let down = descending_ladder(&sd, BoundaryConvention::KillOnNonpositive, LADDER_TOL)?;
        let up = ascending_ladder(&sd, LADDER_TOL)?;
        let v = renewal_v(&down, max_u)?;
        let h = renewal_h(&up, max_u)?;
        let convention = select_convention(&sd, &v)?;
        let sigma2 = gauss.s22.sqrt();
        let c = (2.0 / std::f64::consts::PI).sqrt();
        let kappa = c * down.mean / sigma2;
        let kappa_prime = c * up.mean / sigma2;
        let gamma = horizontal_chernoff_root(&sd)?;
        Ok(ConditionedWalk {
            sd,
            moments,
            lattice,
            gauss,
            down,
            up,
            v,
            h,
            convention,
            kill,
            kappa,
            kappa_prime,
            gamma,
        })
    }

    /// The singular step set tilted by `h = (0, -log(2)/2)`: pmf 1/2, 1/4, 1/4
    /// on `(1,-1), (1,1), (-1,1)`.
    pub fn tilted_singular() -> Self {
        let (sd, _) = tilt(&StepDistribution::singular(), [0.0, -0.5 * 2f64.ln()]);
        Self::new(sd, BoundaryConvention::KillOnNonpositive).expect("tilted singular walk is valid")
    }

    pub fn spec(&self) -> ExitSpec {
        ExitSpec::quadrant(self.kill)
    }

    fn v_shift(&self) -> i64 {
        self.kill.alive_min() - self.convention.series_convention.alive_min()
    }

    /// Renewal function harmonic for the vertical walk under the DP kill rule.
    pub fn v_at(&self, u: i64) -> f64 {
        self.v.value(u - self.v_shift())
    }

    /// Ascending renewal function aligned with the DP kill rule.
    pub fn h_at(&self, u: i64) -> f64 {
        self.h
            .value(u + BoundaryConvention::KillOnNonpositive.alive_min() - self.kill.alive_min())
    }

    /// `V(u) <= a + b max(u, 0)` with `b = 1 / E[chi-]`, checked over the table.
    pub fn v_linear_bound(&self) -> LinearBound {
        let b = 1.0 / self.down.mean;
        let top = self.v.max_u() + self.v_shift();
        let mut a: f64 = 0.0;
        for u in 0..=top {
            a = a.max(self.v_at(u) - b * u as f64);
        }
        LinearBound {
            a: a + 1e-9 * (1.0 + a.abs()),
            b,
        }
    }

    pub fn sigma2(&self) -> f64 {
        self.gauss.s22.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tilted_singular_constants() {
        let cw = ConditionedWalk::tilted_singular();
        let c = (2.0 / std::f64::consts::PI).sqrt();
        assert!((cw.kappa - 0.5 * c).abs() < 1e-15);
        assert!((cw.kappa_prime - c).abs() < 1e-15);
        assert_eq!(cw.convention.series_convention, BoundaryConvention::KillOnNegative);
        for u in 0..50 {
            assert!((cw.v_at(u) - 2.0 * u as f64).abs() < 1e-9);
        }
        for u in 1..50 {
            assert!((cw.h_at(u) - u as f64).abs() < 1e-9);
        }
        assert_eq!(cw.h_at(0), 0.0);
        let lb = cw.v_linear_bound();
        assert!((lb.b - 2.0).abs() < 1e-12 && lb.a >= 0.0 && lb.a < 1e-6);
        assert!((cw.gamma - 3f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn negative_kill_shifts_tables() {
        let (sd, _) = tilt(&StepDistribution::singular(), [0.0, -0.5 * 2f64.ln()]);
        let cw = ConditionedWalk::new(sd, BoundaryConvention::KillOnNegative).unwrap();
        assert!((cw.v_at(0) - 2.0).abs() < 1e-12);
        assert!((cw.h_at(0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pipeline_rejects_bad_drift() {
        assert!(matches!(
            ConditionedWalk::new(StepDistribution::singular(), BoundaryConvention::KillOnNonpositive),
            Err(Error::NonZeroVerticalDrift(_))
        ));
        let left = crate::model::validate_steps(&[(-1, 1, 1.0), (-1, -1, 1.0)]).unwrap();
        assert!(matches!(
            ConditionedWalk::new(left, BoundaryConvention::KillOnNonpositive),
            Err(Error::NonPositiveHorizontalDrift(_))
        ));
    }
}
