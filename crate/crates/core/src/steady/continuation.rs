use std::sync::Arc;

use serde::Serialize;

use super::{
    default_newton_tol, finish_solution, newton_unknowns, principal_eigenvalue, residual_floor,
    SteadySolution, Workspace, EIG_TOL,
};
use crate::domain::{DomainSpec, Grid, ScalarField};
use crate::error::{GelfandError, Result};
use crate::linalg::max_abs;

const MAX_CORRECTOR_ITERATIONS: usize = 10;
const FOLD_BISECTIONS: usize = 30;
const NATURAL_BISECTIONS: usize = 30;
const MAX_STEPS: usize = 20_000;

/// Step controls for [`continue_branch`]. Arclength uses the metric
/// `θ‖δφ‖² + δλ²` with `θ = 1/N`, so `ds` is roughly an RMS change of φ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContinuationControls {
    pub ds0: f64,
    pub ds_max: f64,
    pub ds_min: f64,
    /// Residual tolerance; `None` uses `1e-10·(1+λ)`.
    pub newton_tol: Option<f64>,
}

impl Default for ContinuationControls {
    fn default() -> Self {
        Self {
            ds0: 0.05,
            ds_max: 0.1,
            ds_min: 1e-6,
            newton_tol: None,
        }
    }
}

impl ContinuationControls {
    fn validate(&self) -> Result<()> {
        let ok = self.ds_min > 0.0
            && self.ds0 >= self.ds_min
            && self.ds_max >= self.ds0
            && self.ds_max.is_finite()
            && self.newton_tol.map_or(true, |t| t > 0.0);
        if ok {
            Ok(())
        } else {
            Err(GelfandError::Steady(format!(
                "invalid continuation controls {self:?}"
            )))
        }
    }

    fn tol(&self, lambda: f64) -> f64 {
        self.newton_tol.unwrap_or_else(|| default_newton_tol(lambda))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Fold,
    Mu1Crossing,
    LambdaCap,
    NewtonFailure,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BranchPoint {
    pub lambda: f64,
    pub max_phi: f64,
    pub mu1: f64,
    pub residual_norm: f64,
    pub newton_iterations: usize,
}

/// The minimal branch from `λ = 0` up to the fold or the cap.
#[derive(Debug, Clone)]
pub struct ContinuationBranch {
    grid: Arc<Grid>,
    pub points: Vec<BranchPoint>,
    pub solutions: Vec<SteadySolution>,
    /// Refined turning point, when one was resolved.
    pub fold_point: Option<BranchPoint>,
    pub lambda_star_estimate: f64,
    pub fold_detected: bool,
    pub termination_reason: Termination,
}

#[derive(Debug, Clone, Serialize)]
pub struct BranchSummary {
    pub domain: DomainSpec,
    pub resolution: usize,
    pub lambda_star_estimate: f64,
    pub fold_detected: bool,
    pub termination_reason: Termination,
    pub fold_point: Option<BranchPoint>,
    pub num_points: usize,
    pub min_mu1: f64,
}

impl ContinuationBranch {
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// `(λ, max φ)` pairs in branch order.
    pub fn table(&self) -> Vec<(f64, f64)> {
        self.points.iter().map(|p| (p.lambda, p.max_phi)).collect()
    }

    pub fn summary(&self) -> BranchSummary {
        BranchSummary {
            domain: *self.grid.spec(),
            resolution: self.grid.resolution(),
            lambda_star_estimate: self.lambda_star_estimate,
            fold_detected: self.fold_detected,
            termination_reason: self.termination_reason,
            fold_point: self.fold_point,
            num_points: self.points.len(),
            min_mu1: self.points.iter().map(|p| p.mu1).fold(f64::INFINITY, f64::min),
        }
    }

    /// Minimal solution at `lambda`, warm-started from the branch by linear
    /// interpolation between the bracketing recorded points.
    pub fn solve_at(&self, lambda: f64) -> Result<SteadySolution> {
        let last = self.points.last().map_or(0.0, |p| p.lambda);
        if !(lambda >= 0.0) || lambda > last.max(self.lambda_star_estimate) {
            return Err(GelfandError::Steady(format!(
                "lambda {lambda} outside the computed branch [0, {}]",
                last.max(self.lambda_star_estimate)
            )));
        }
        let i = self
            .points
            .iter()
            .rposition(|p| p.lambda <= lambda)
            .unwrap_or(0);
        let start = &self.solutions[i];
        if start.lambda == lambda {
            return Ok(start.clone());
        }
        let init = match self.solutions.get(i + 1) {
            Some(next) if next.lambda > start.lambda => {
                let w = (lambda - start.lambda) / (next.lambda - start.lambda);
                start.phi.axpby(1.0 - w, &next.phi, w)?
            }
            _ => start.phi.clone(),
        };
        super::newton_solve(&self.grid, lambda, &init, default_newton_tol(lambda))
    }
}

struct Point {
    x: Vec<f64>,
    lambda: f64,
    residual: f64,
    tol: f64,
    iterations: usize,
}

struct Tangent {
    x: Vec<f64>,
    lambda: f64,
}

struct Tracker<'g> {
    grid: &'g Grid,
    ws: Workspace<'g>,
    theta: f64,
    controls: ContinuationControls,
}

impl<'g> Tracker<'g> {
    fn dot(&self, ax: &[f64], al: f64, bx: &[f64], bl: f64) -> f64 {
        self.theta * ax.iter().zip(bx).map(|(p, q)| p * q).sum::<f64>() + al * bl
    }

    /// Unit tangent at a solution, oriented along `(dir_x, dir_λ)`.
    fn tangent(&self, x: &[f64], lambda: f64, dir: Option<(&[f64], f64)>) -> Result<Tangent> {
        let lu = self.ws.jacobian(x, lambda).factor()?;
        let rhs: Vec<f64> = x.iter().map(|p| p.exp()).collect();
        let b = lu.solve(&rhs);
        let mut tx: Vec<f64> = b.iter().map(|v| -v).collect();
        let mut tl = 1.0;
        let norm = self.dot(&tx, tl, &tx, tl).sqrt();
        let mut sign = 1.0 / norm;
        if let Some((dx, dl)) = dir {
            if self.dot(&tx, tl, dx, dl) < 0.0 {
                sign = -sign;
            }
        }
        tx.iter_mut().for_each(|v| *v *= sign);
        tl *= sign;
        Ok(Tangent { x: tx, lambda: tl })
    }

    /// Newton on the bordered system: `R(x, λ) = 0` plus the arclength
    /// hyperplane through the predictor with normal `t`.
    fn correct(&mut self, xp: &[f64], lp: f64, t: &Tangent) -> Option<Point> {
        let mut x = xp.to_vec();
        let mut lambda = lp;
        let mut prev = f64::INFINITY;
        let mut growth = 0;
        for it in 0..=MAX_CORRECTOR_ITERATIONS {
            if !(lambda >= 0.0) {
                return None;
            }
            let r = self.ws.residual(&x, lambda);
            let rn = max_abs(&r);
            if !rn.is_finite() {
                return None;
            }
            let tol = self.controls.tol(lambda).max(residual_floor(self.grid, max_abs(&x)));
            if rn <= tol && it > 0 {
                return Some(Point {
                    x,
                    lambda,
                    residual: rn,
                    tol,
                    iterations: it,
                });
            }
            if it == MAX_CORRECTOR_ITERATIONS {
                return None;
            }
            if rn > prev {
                growth += 1;
                if growth >= 2 {
                    return None;
                }
            }
            prev = rn;
            let lu = self.ws.jacobian(&x, lambda).factor().ok()?;
            let a: Vec<f64> = lu.solve(&r).into_iter().map(|v| -v).collect();
            let rl: Vec<f64> = x.iter().map(|p| p.exp()).collect();
            let b = lu.solve(&rl);
            let dxp: Vec<f64> = x.iter().zip(xp).map(|(p, q)| p - q).collect();
            let g = self.dot(&t.x, t.lambda, &dxp, lambda - lp);
            let ta = self.dot(&t.x, 0.0, &a, 0.0);
            let tb = self.dot(&t.x, 0.0, &b, 0.0);
            let dl = (-g - ta) / (t.lambda - tb);
            if !dl.is_finite() {
                return None;
            }
            for ((xi, ai), bi) in x.iter_mut().zip(&a).zip(&b) {
                *xi += ai - dl * bi;
            }
            lambda += dl;
        }
        None
    }

    fn natural(&self, x0: &[f64], lambda: f64) -> Option<Point> {
        let tol = self.controls.tol(lambda);
        newton_unknowns(self.grid, lambda, x0.to_vec(), tol, 40)
            .ok()
            .map(|(x, residual, tol, iterations)| Point {
                x,
                lambda,
                residual,
                tol,
                iterations,
            })
    }
}

fn record(
    grid: &Arc<Grid>,
    p: Point,
    points: &mut Vec<BranchPoint>,
    solutions: &mut Vec<SteadySolution>,
) -> Result<()> {
    let sol = finish_solution(grid, p.lambda, p.x, p.residual, p.tol, p.iterations)?;
    points.push(BranchPoint {
        lambda: sol.lambda,
        max_phi: sol.phi.max(),
        mu1: sol.mu1,
        residual_norm: sol.residual_norm,
        newton_iterations: sol.newton_iterations,
    });
    solutions.push(sol);
    Ok(())
}

/// Pseudo-arclength continuation of the minimal branch from `(λ, φ) = (0, 0)`.
///
/// Stops at the first turning point in λ (refined by bisection in arclength),
/// at a sign change of μ₁, at `lambda_max_cap` (solved exactly there), or
/// when the corrector fails below `ds_min`; in the last case λ* is bracketed
/// by bisection on natural-parameter Newton solves.
pub fn continue_branch(
    grid: &Arc<Grid>,
    lambda_max_cap: f64,
    controls: ContinuationControls,
) -> Result<ContinuationBranch> {
    controls.validate()?;
    if !(lambda_max_cap > 0.0) {
        return Err(GelfandError::Steady(format!(
            "lambda_max_cap must be > 0 (got {lambda_max_cap})"
        )));
    }
    let n = grid.num_unknowns();
    let mut tr = Tracker {
        grid,
        ws: Workspace::new(grid),
        theta: 1.0 / n as f64,
        controls,
    };
    let mut points = Vec::new();
    let mut solutions = Vec::new();

    let cur = Point {
        x: vec![0.0; n],
        lambda: 0.0,
        residual: 0.0,
        tol: controls.tol(0.0),
        iterations: 0,
    };
    let mut t = tr.tangent(&cur.x, 0.0, Some((&vec![0.0; n], 1.0)))?;
    let mut cur_x = cur.x.clone();
    let mut cur_l = 0.0;
    record(grid, cur, &mut points, &mut solutions)?;
    let mut ds = controls.ds0;

    let finish = |points: Vec<BranchPoint>,
                  solutions: Vec<SteadySolution>,
                  fold_point: Option<BranchPoint>,
                  estimate: f64,
                  reason: Termination| {
        let max_l = points.iter().map(|p| p.lambda).fold(0.0, f64::max);
        ContinuationBranch {
            grid: Arc::clone(grid),
            points,
            solutions,
            fold_point,
            lambda_star_estimate: estimate.max(max_l),
            fold_detected: matches!(reason, Termination::Fold | Termination::Mu1Crossing),
            termination_reason: reason,
        }
    };

    for _ in 0..MAX_STEPS {
        let lp = cur_l + ds * t.lambda;
        if lp >= lambda_max_cap && t.lambda > 0.0 {
            // Land exactly on the cap with a natural solve from the interpolated predictor.
            let s = (lambda_max_cap - cur_l) / t.lambda;
            let xp: Vec<f64> = cur_x.iter().zip(&t.x).map(|(a, b)| a + s * b).collect();
            if let Some(p) = tr.natural(&xp, lambda_max_cap).or_else(|| tr.natural(&cur_x, lambda_max_cap)) {
                record(grid, p, &mut points, &mut solutions)?;
                let last = points.last().copied().unwrap();
                if last.mu1 > 0.0 {
                    return Ok(finish(points, solutions, None, lambda_max_cap, Termination::LambdaCap));
                }
                points.pop();
                solutions.pop();
            }
            if ds > controls.ds_min {
                ds = (0.5 * ds).max(controls.ds_min);
                continue;
            }
        }
        let xp: Vec<f64> = cur_x.iter().zip(&t.x).map(|(a, b)| a + ds * b).collect();
        let Some(p) = tr.correct(&xp, lp, &t) else {
            if ds > controls.ds_min {
                ds = (0.5 * ds).max(controls.ds_min);
                continue;
            }
            let est = natural_bisection(&tr, &cur_x, cur_l, (lp - cur_l).abs().max(1e-6 * cur_l), lambda_max_cap, grid, &mut points, &mut solutions)?;
            return Ok(finish(points, solutions, None, est, Termination::NewtonFailure));
        };
        let sec_x: Vec<f64> = p.x.iter().zip(&cur_x).map(|(a, b)| a - b).collect();
        let sec_l = p.lambda - cur_l;
        let t_new = tr.tangent(&p.x, p.lambda, Some((&sec_x, sec_l)))?;
        if t_new.lambda <= 0.0 {
            let (fold, est) = refine_fold(&mut tr, &cur_x, cur_l, &t, ds, grid)?;
            return Ok(finish(points, solutions, fold, est, Termination::Fold));
        }
        let iterations = p.iterations;
        let (px, pl) = (p.x.clone(), p.lambda);
        record(grid, p, &mut points, &mut solutions)?;
        let mu1 = points.last().unwrap().mu1;
        if mu1 < -EIG_TOL * mu1.abs().max(1.0) {
            points.pop();
            solutions.pop();
            let (fold, est) = refine_mu1(&mut tr, &cur_x, cur_l, &t, ds, grid)?;
            return Ok(finish(points, solutions, fold, est, Termination::Mu1Crossing));
        }
        cur_x = px;
        cur_l = pl;
        t = t_new;
        if iterations <= 3 {
            ds = (1.5 * ds).min(controls.ds_max);
        } else if iterations >= 7 {
            ds = (0.5 * ds).max(controls.ds_min);
        }
    }
    let est = points.last().map_or(0.0, |p| p.lambda);
    Ok(finish(points, solutions, None, est, Termination::NewtonFailure))
}

fn fold_point_of(grid: &Arc<Grid>, p: &Point) -> Result<BranchPoint> {
    let phi = ScalarField::from_unknowns(grid, &p.x, 0.0);
    Ok(BranchPoint {
        lambda: p.lambda,
        max_phi: phi.max(),
        mu1: principal_eigenvalue(grid, &phi, p.lambda)?,
        residual_norm: p.residual,
        newton_iterations: p.iterations,
    })
}

/// Bisection in arclength from the last good point for the sign change of
/// the tangent's λ-component.
fn refine_fold(
    tr: &mut Tracker<'_>,
    x0: &[f64],
    l0: f64,
    t0: &Tangent,
    ds: f64,
    grid: &Arc<Grid>,
) -> Result<(Option<BranchPoint>, f64)> {
    bisect_arclength(tr, x0, l0, t0, ds, grid, |tr, p| {
        let dir_x: Vec<f64> = p.x.iter().zip(x0).map(|(a, b)| a - b).collect();
        let t = tr.tangent(&p.x, p.lambda, Some((&dir_x, p.lambda - l0)))?;
        Ok(t.lambda <= 0.0)
    })
}

/// Bisection in arclength for the sign change of μ₁.
fn refine_mu1(
    tr: &mut Tracker<'_>,
    x0: &[f64],
    l0: f64,
    t0: &Tangent,
    ds: f64,
    grid: &Arc<Grid>,
) -> Result<(Option<BranchPoint>, f64)> {
    bisect_arclength(tr, x0, l0, t0, ds, grid, |_, p| {
        let phi = ScalarField::from_unknowns(grid, &p.x, 0.0);
        let mu = principal_eigenvalue(grid, &phi, p.lambda)?;
        Ok(mu < 0.0)
    })
}

fn bisect_arclength(
    tr: &mut Tracker<'_>,
    x0: &[f64],
    l0: f64,
    t0: &Tangent,
    ds: f64,
    grid: &Arc<Grid>,
    past: impl Fn(&Tracker<'_>, &Point) -> Result<bool>,
) -> Result<(Option<BranchPoint>, f64)> {
    let (mut lo, mut hi) = (0.0, ds);
    let mut best: Option<Point> = None;
    let mut max_lambda = l0;
    for _ in 0..FOLD_BISECTIONS {
        let s = 0.5 * (lo + hi);
        let xp: Vec<f64> = x0.iter().zip(&t0.x).map(|(a, b)| a + s * b).collect();
        let Some(p) = tr.correct(&xp, l0 + s * t0.lambda, t0) else {
            hi = s;
            continue;
        };
        max_lambda = max_lambda.max(p.lambda);
        if past(tr, &p)? {
            hi = s;
        } else {
            lo = s;
        }
        if best.as_ref().map_or(true, |b| p.lambda >= b.lambda) {
            best = Some(p);
        }
    }
    let fold = best.as_ref().map(|p| fold_point_of(grid, p)).transpose()?;
    Ok((fold, max_lambda))
}

/// Bracket λ* between the last converged natural solve and the first
/// failure, halving the bracket up to 30 times or to width `1e-6·λ`.
#[allow(clippy::too_many_arguments)]
fn natural_bisection(
    tr: &Tracker<'_>,
    x0: &[f64],
    l0: f64,
    step: f64,
    cap: f64,
    grid: &Arc<Grid>,
    points: &mut Vec<BranchPoint>,
    solutions: &mut Vec<SteadySolution>,
) -> Result<f64> {
    let mut good_x = x0.to_vec();
    let mut lo = l0;
    let mut hi = (l0 + step.max(1e-9)).min(cap);
    let mut expansions = 0;
    while let Some(p) = tr.natural(&good_x, hi) {
        good_x = p.x.clone();
        lo = hi;
        record(grid, p, points, solutions)?;
        expansions += 1;
        if hi >= cap || expansions >= NATURAL_BISECTIONS {
            return Ok(lo);
        }
        hi = (lo + 2.0 * (lo - l0).max(step)).min(cap);
    }
    for _ in 0..NATURAL_BISECTIONS {
        if hi - lo <= 1e-6 * lo.max(1e-12) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        match tr.natural(&good_x, mid) {
            Some(p) => {
                good_x = p.x;
                lo = mid;
            }
            None => hi = mid,
        }
    }
    Ok(lo)
}

fn ball_dimension(spec: &DomainSpec) -> Result<usize> {
    match spec {
        DomainSpec::Interval { .. } => Ok(1),
        DomainSpec::RadialBall { dim, .. } => Ok(*dim),
        DomainSpec::Ellipse { .. } => Err(GelfandError::Steady(
            "scaling check needs interval or ball branches".into(),
        )),
    }
}

/// Max relative mismatch `|λ_r·r² − λ_1|/λ_1` after matching points by max φ,
/// including the λ* estimates themselves.
pub fn scaling_check(
    branch_r1: &ContinuationBranch,
    branch_r: &ContinuationBranch,
    r: f64,
) -> Result<f64> {
    let n1 = ball_dimension(branch_r1.grid.spec())?;
    let nr = ball_dimension(branch_r.grid.spec())?;
    if n1 != nr {
        return Err(GelfandError::Steady(format!(
            "dimension mismatch: {n1} vs {nr}"
        )));
    }
    if !(r > 0.0) {
        return Err(GelfandError::Steady(format!("r must be > 0 (got {r})")));
    }
    let base = branch_r1.table();
    let lambda_at = |m: f64| -> Option<f64> {
        if let Some(&(l, _)) = base.iter().find(|&&(_, bm)| bm == m) {
            return Some(l);
        }
        base.windows(2).find_map(|w| {
            let ((l0, m0), (l1, m1)) = (w[0], w[1]);
            (m0 < m && m < m1).then(|| l0 + (l1 - l0) * (m - m0) / (m1 - m0))
        })
    };
    let r2 = r * r;
    let mut worst = 0.0f64;
    for p in &branch_r.points {
        if let Some(l1) = lambda_at(p.max_phi) {
            if l1 > 0.0 {
                worst = worst.max((p.lambda * r2 - l1).abs() / l1);
            }
        }
    }
    let s1 = branch_r1.lambda_star_estimate;
    if s1 > 0.0 {
        worst = worst.max((branch_r.lambda_star_estimate * r2 - s1).abs() / s1);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::build_grid;

    fn branch(spec: DomainSpec, res: usize, cap: f64) -> ContinuationBranch {
        let g = Arc::new(build_grid(spec, res).unwrap());
        continue_branch(&g, cap, ContinuationControls::default()).unwrap()
    }

    #[test]
    fn interval_fold() {
        let b = branch(DomainSpec::interval(1.0), 801, 100.0);
        assert!(b.fold_detected);
        assert_eq!(b.termination_reason, Termination::Fold);
        assert!((b.lambda_star_estimate - 3.513_830_719).abs() < 1e-3, "{}", b.lambda_star_estimate);
        for w in b.points.windows(2) {
            assert!(w[1].lambda > w[0].lambda);
            assert!(w[1].mu1 < w[0].mu1);
        }
        assert!(b.points.iter().all(|p| p.mu1 > 0.0));
        assert!(b.fold_point.unwrap().mu1.abs() < 1e-3);
    }

    #[test]
    fn disk_fold() {
        let b = branch(DomainSpec::ball(2, 1.0), 801, 100.0);
        assert!(b.fold_detected);
        assert!((b.lambda_star_estimate - 2.0).abs() < 2e-3, "{}", b.lambda_star_estimate);
    }

    #[test]
    fn cap_is_hit_exactly() {
        let b = branch(DomainSpec::ball(3, 1.0), 201, 1.0);
        assert_eq!(b.termination_reason, Termination::LambdaCap);
        assert!(!b.fold_detected);
        assert_eq!(b.points.last().unwrap().lambda, 1.0);
        assert_eq!(b.lambda_star_estimate, 1.0);
    }

    #[test]
    fn solve_at_matches_branch() {
        let b = branch(DomainSpec::interval(1.0), 201, 100.0);
        let s = b.solve_at(0.5 * b.lambda_star_estimate).unwrap();
        assert!(s.minimal);
        assert!(s.mu1 > 0.0);
        assert!(b.solve_at(2.0 * b.lambda_star_estimate).is_err());
    }

    #[test]
    fn scaling_identity_and_mismatch() {
        let b1 = branch(DomainSpec::ball(2, 1.0), 201, 100.0);
        assert_eq!(scaling_check(&b1, &b1, 1.0).unwrap(), 0.0);
        let b2 = branch(DomainSpec::ball(2, 2.0), 201, 100.0);
        assert!(scaling_check(&b1, &b2, 2.0).unwrap() < 1e-2);
        let b3 = branch(DomainSpec::ball(3, 1.0), 101, 100.0);
        assert!(scaling_check(&b1, &b3, 1.0).is_err());
    }

    #[test]
    fn bad_controls_rejected() {
        let g = Arc::new(build_grid(DomainSpec::interval(1.0), 33).unwrap());
        let c = ContinuationControls {
            ds_min: 0.0,
            ..Default::default()
        };
        assert!(continue_branch(&g, 1.0, c).is_err());
        assert!(continue_branch(&g, -1.0, ContinuationControls::default()).is_err());
    }
}
