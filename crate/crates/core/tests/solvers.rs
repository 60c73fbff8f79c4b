mod common;

use common::{grid, oracle};
use gelfand::barriers::{lambda_bar, lambda_bar_general, lambda_bar_refined};
use gelfand::domain::{DomainSpec, ScalarField};
use gelfand::flow::{run_monitored, run_to_steady, FlowControls};
use gelfand::geometry::{boundary_g, default_k, hessian_min_eig_field, mixed_derivative_ratio, to_w};
use gelfand::steady::{continue_branch, newton_solve, ContinuationControls, Termination};

#[test]
fn newton_matches_the_interval_oracle() {
    let mut last = f64::INFINITY;
    for n in [201, 401, 801] {
        let g = grid(DomainSpec::interval(1.0), n);
        let s = newton_solve(&g, 1.0, &ScalarField::zeros(&g), 1e-12).unwrap();
        let err = (s.phi.max() - oracle::INTERVAL_MAX_PHI_AT_1).abs();
        assert!(err < last / 3.5, "{err} vs {last}");
        last = err;
    }
    assert!(last < 1e-6);
}

#[test]
fn ball3_fold_matches_the_oracle() {
    let b = continue_branch(&grid(DomainSpec::ball(3, 1.0), 801), 100.0, ContinuationControls::default()).unwrap();
    assert!(b.fold_detected);
    assert_eq!(b.termination_reason, Termination::Fold);
    assert!((b.lambda_star_estimate - oracle::BALL3_LAMBDA_STAR).abs() < 2e-3, "{}", b.lambda_star_estimate);
}

#[test]
fn ball10_converges_to_the_oracle() {
    let mut errs = Vec::new();
    for n in [401, 801, 1601] {
        let b = continue_branch(&grid(DomainSpec::ball(10, 1.0), n), 15.99, ContinuationControls::default()).unwrap();
        assert_eq!(b.termination_reason, Termination::LambdaCap);
        assert!(!b.fold_detected);
        let s = b.solutions.last().unwrap();
        errs.push((s.phi.at(b.grid().node_at_radius(0.5)) - oracle::BALL10_PHI_HALF_AT_15_99).abs());
    }
    assert!(errs[1] < 0.3 * errs[0] && errs[2] < 0.3 * errs[1], "{errs:?}");
}

#[test]
fn circle_grid_agrees_with_the_disk() {
    let b = continue_branch(&grid(DomainSpec::ellipse(1.0, 1.0), 65), 100.0, ContinuationControls::default()).unwrap();
    assert!((b.lambda_star_estimate - 2.0).abs() < 2e-2, "{}", b.lambda_star_estimate);
}

#[test]
fn flow_and_newton_agree_on_the_ellipse() {
    let g = grid(DomainSpec::ellipse(1.4, 1.0), 49);
    let s = newton_solve(&g, 0.6, &ScalarField::zeros(&g), 1e-10).unwrap();
    let r = run_to_steady(ScalarField::zeros(&g), 0.6, &FlowControls::default(), Some(&s.phi)).unwrap();
    assert!(r.converged);
    assert!(r.state.u.distance(&s.phi).unwrap() < 1e-6);
    assert!(r.max_lyapunov_increase() <= 1e-8);
    assert!(r.max_comparison_violation.unwrap() <= 1e-8);
}

#[test]
fn convexity_is_preserved_on_the_interval() {
    let g = grid(DomainSpec::interval(1.0), 401);
    let s = newton_solve(&g, 1.5, &ScalarField::zeros(&g), 1e-10).unwrap();
    let u0 = s.phi.map(|v| 0.5 * v);
    assert!(hessian_min_eig_field(&to_w(&u0)).unwrap().min > 0.0);
    let controls = FlowControls { convexity_stride: 1, ..FlowControls::default() };
    let r = run_monitored(u0, 1.5, &controls, Some(&s.phi)).unwrap();
    let h = g.spacing();
    assert!(r.min_convexity().unwrap() >= -10.0 * h * h);
}

#[test]
fn ellipse_threshold_is_verified_by_g() {
    let b = continue_branch(&grid(DomainSpec::ellipse(1.2, 1.0), 49), 100.0, ContinuationControls::default()).unwrap();
    let s = b.solve_at(0.2 * b.lambda_star_estimate).unwrap();
    let k = default_k(b.grid(), mixed_derivative_ratio(&s.phi).unwrap().value);
    let lb = lambda_bar_refined(&b, k).unwrap();
    let coarse = lambda_bar_general(b.grid(), &b.table(), k).unwrap();
    assert!((lb.lambda_bar - coarse.lambda_bar).abs() < 1e-2 * lb.lambda_bar);
    let disk = continue_branch(&grid(DomainSpec::ball(2, 1.0), 401), 100.0, ContinuationControls::default()).unwrap();
    assert!(lb.lambda_bar > 0.0 && lb.lambda_bar <= lambda_bar(2, 1.0, &disk.table()).unwrap().lambda_bar);
    for f in [0.1, 0.3, 0.5, 0.7, 0.9] {
        let l = f * lb.lambda_bar;
        let s = b.solve_at(l).unwrap();
        assert!(boundary_g(&s.phi, l, k).unwrap().value > 0.0, "G ≤ 0 at {l}");
    }
    let wide = grid(DomainSpec::ellipse(2.0, 1.0), 49);
    assert_eq!(lambda_bar_general(&wide, &b.table(), 0.0).unwrap().lambda_bar, 0.0);
}
