use std::collections::HashSet;

use proptest::prelude::*;
use quadwalk::asymptotics::{bm_kernel, density_p, predict_boundary_llt, predict_tail, AsymptoticConstants, GaussParams};
use quadwalk::dp::{float_measure, DpOptions, ExitSpec};
use quadwalk::harmonic::{w_series, WOptions};
use quadwalk::io::{parse_list, parse_pair};
use quadwalk::ladder::BoundaryConvention;
use quadwalk::model::{
    compute_moments, in_lattice_support, lattice_decompose, solve_drift, tilt, validate_steps, StepDistribution,
};
use quadwalk::montecarlo::simulate_survival;
use quadwalk::pipeline::ConditionedWalk;

fn step_set() -> impl Strategy<Value = StepDistribution> {
    prop::collection::vec((-2i64..=2, -2i64..=2, 0.05f64..1.0), 3..7)
        .prop_filter_map("degenerate", |raw| {
            let sd = validate_steps(&raw).ok()?;
            let m = compute_moments(&sd);
            (m.det() > 1e-3).then_some(sd)
        })
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tilt_round_trip(sd in step_set(), h1 in -1.0f64..1.0, h2 in -1.0f64..1.0) {
        let (there, _) = tilt(&sd, [h1, h2]);
        let (back, _) = tilt(&there, [-h1, -h2]);
        for (a, b) in sd.probabilities().zip(back.probabilities()) {
            prop_assert_eq!((a.0, a.1), (b.0, b.1));
            prop_assert!(close(a.2, b.2, 1e-12));
        }
    }

    #[test]
    fn tilted_mean_is_log_mgf_gradient(sd in step_set(), h1 in -1.0f64..1.0, h2 in -1.0f64..1.0) {
        let (t, _) = tilt(&sd, [h1, h2]);
        let mu = compute_moments(&t).mu;
        let eps = 1e-5;
        let d = |i: usize| {
            let mut hp = [h1, h2];
            let mut hm = [h1, h2];
            hp[i] += eps;
            hm[i] -= eps;
            (sd.mgf(hp).ln() - sd.mgf(hm).ln()) / (2.0 * eps)
        };
        prop_assert!(close(mu[0], d(0), 1e-7));
        prop_assert!(close(mu[1], d(1), 1e-7));
    }

    #[test]
    fn drift_solver_inverts_tilt(sd in step_set(), h1 in -0.8f64..0.8, h2 in -0.8f64..0.8) {
        let (t, _) = tilt(&sd, [h1, h2]);
        let target = compute_moments(&t).mu;
        let p = solve_drift(&sd, target).unwrap();
        prop_assert!(close(p.h[0], h1, 1e-8) && close(p.h[1], h2, 1e-8), "{:?} vs {:?}", p.h, (h1, h2));
    }

    #[test]
    fn reachable_points_lie_in_lattice_support(sd in step_set()) {
        let ls = lattice_decompose(&sd).unwrap();
        let steps = sd.steps();
        let mut layer: HashSet<(i64, i64)> = HashSet::from([(0, 0)]);
        for n in 1..=6u64 {
            layer = layer
                .iter()
                .flat_map(|z| steps.iter().map(move |s| (z.0 + s.0, z.1 + s.1)))
                .collect();
            for &z in &layer {
                prop_assert!(in_lattice_support(&ls, n, z));
            }
            // a unit horizontal shift leaves the coset unless d1 = 1
            for &z in &layer {
                prop_assert!(!in_lattice_support(&ls, n, (z.0 + 1, z.1)) || ls.d1 == 1);
            }
        }
    }

    #[test]
    fn dp_conserves_mass(sd in step_set(), x1 in 1i64..4, x2 in 1i64..4, n in 1u64..60) {
        let spec = ExitSpec::quadrant(BoundaryConvention::KillOnNonpositive);
        let opts = DpOptions { barrier: quadwalk::dp::Barrier::None, ..DpOptions::default() };
        let mut m = float_measure(&sd, (x1, x2), spec, &opts).unwrap();
        m.advance(n);
        let total = m.total_alive() + m.killed() + m.dropped();
        prop_assert!((total - 1.0).abs() < 1e-12, "{}", total);
    }

    #[test]
    fn density_sign_and_kernel_envelope(
        y1 in -4.0f64..4.0, y2 in -1.0f64..4.0, x2 in 0.01f64..3.0, t in 0.05f64..4.0, rho in -0.6f64..0.6,
    ) {
        let gp = GaussParams::new(0.5, 0.75, 1.0, rho).unwrap();
        let p = density_p([y1, y2], &gp);
        prop_assert!(p >= 0.0);
        prop_assert_eq!(p == 0.0, y2 <= 0.0 || p < f64::MIN_POSITIVE);
        let k = bm_kernel(t, [0.0, x2], [y1, y2], [0.5, 0.0], &gp).unwrap();
        let free = gp.free_density(t, [y1 - 0.5 * t, y2 - x2]);
        prop_assert!(k >= 0.0 && k <= free * (1.0 + 1e-12));
    }

    #[test]
    fn predictors_scale_linearly(c in 0.1f64..10.0, w in 0.1f64..5.0, n in 10u64..10_000) {
        let gp = GaussParams::new(0.5, 0.75, 1.0, -0.5).unwrap();
        let consts = AsymptoticConstants::new(0.4, 0.8, &gp);
        prop_assert!(close(predict_tail(n, 0.4, c * w), c * predict_tail(n, 0.4, w), 1e-14));
        let base = predict_boundary_llt(n as f64 * 0.5, 1.0, n, 4.0, w, &gp, &consts);
        let scaled = predict_boundary_llt(n as f64 * 0.5, c, n, 4.0, w, &gp, &consts);
        prop_assert!(close(scaled, c * base, 1e-14));
    }

    #[test]
    fn pair_parser_round_trip(a in any::<i64>(), b in any::<i64>()) {
        prop_assert_eq!(parse_pair(&format!("{a},{b}")).unwrap(), (a, b));
        prop_assert_eq!(parse_pair(&format!(" {a} ,\t{b} ")).unwrap(), (a, b));
    }

    #[test]
    fn list_parser_round_trip(v in prop::collection::vec(any::<u64>(), 1..20)) {
        let text = v.iter().map(u64::to_string).collect::<Vec<_>>().join(",");
        prop_assert_eq!(parse_list(&text).unwrap(), v);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn w_series_is_nonincreasing(x1 in 1i64..12, x2 in 1i64..12) {
        let cw = ConditionedWalk::tilted_singular();
        let e = w_series(&cw, (x1, x2), &WOptions::default()).unwrap();
        prop_assert!(e.lower <= e.value && e.value <= e.upper);
        for pair in e.trace.windows(2) {
            prop_assert!(pair[1].upper <= pair[0].upper + 1e-14);
            prop_assert!(pair[1].upper - pair[1].lower <= pair[0].upper - pair[0].lower + 1e-14);
        }
    }

    #[test]
    fn monte_carlo_ignores_thread_count(seed in any::<u64>(), threads in 2usize..5) {
        let cw = ConditionedWalk::tilted_singular();
        let a = simulate_survival(&cw.sd, (2, 1), 25, 3000, seed, cw.spec(), 1).unwrap();
        let b = simulate_survival(&cw.sd, (2, 1), 25, 3000, seed, cw.spec(), threads).unwrap();
        prop_assert_eq!(a.mean.to_bits(), b.mean.to_bits());
    }
}
