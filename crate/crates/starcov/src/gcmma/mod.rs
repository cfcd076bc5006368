//! Globally convergent method of moving asymptotes (GCMMA).
//!
//! Each outer iteration builds a separable convex approximation of the
//! objective and constraints around the current iterate, solves it with a
//! primal-dual interior-point method, and repeats the subproblem with
//! inflated conservative factors until the approximation upper-bounds every
//! function at the trial point. That conservativeness makes the transformed
//! objective (objective plus exact-penalty constraint violations) provably
//! non-increasing across outer iterations.

mod subproblem;

use serde::Serialize;

use crate::{Error, Result};

/// Function values and gradients at one point: `f[0]` is the objective,
/// `f[1..]` the constraints (feasible when `<= 0`); `grad` has one row per
/// function.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub f: Vec<f64>,
    pub grad: Vec<Vec<f64>>,
}

/// A smooth box-constrained nonlinear program `min f_0` s.t. `f_i <= 0`.
pub trait NlpProblem: Sync {
    fn n_vars(&self) -> usize;
    fn n_cons(&self) -> usize;
    /// Box bounds; coordinates with equal bounds are held fixed.
    fn bounds(&self) -> (Vec<f64>, Vec<f64>);
    fn eval(&self, x: &[f64]) -> Result<Evaluation>;
    /// Weight of the auxiliary variable `z` in the relaxed objective.
    fn a0(&self) -> f64 {
        1.0
    }
    /// Exact-penalty weights on the constraint slacks.
    fn c_weights(&self) -> Vec<f64> {
        vec![1e4; self.n_cons()]
    }
}

#[derive(Debug, Clone)]
pub struct MmaOptions {
    /// Outer-loop gap threshold on the transformed objective.
    pub epsilon_tol: f64,
    pub max_outer: usize,
    /// Inner (conservative-factor) iteration cap per outer step.
    pub max_inner: usize,
    /// Interpret the outer gap `v` relative to the objective magnitude
    /// instead of absolutely.
    pub relative_gap: bool,
    /// Constraint slack below which a point counts as feasible.
    pub feasibility_tol: f64,
}

impl Default for MmaOptions {
    fn default() -> Self {
        MmaOptions {
            epsilon_tol: 1e-5,
            max_outer: 500,
            max_inner: 200,
            relative_gap: false,
            feasibility_tol: 1e-6,
        }
    }
}

/// One outer iteration of the trace.
#[derive(Debug, Clone, Serialize)]
pub struct TraceRecord {
    pub k: usize,
    /// `f_0..f_m` at the accepted trial point.
    pub f: Vec<f64>,
    pub z: f64,
    pub y: Vec<f64>,
    /// Conservative factors after the inner loop.
    pub rho: Vec<f64>,
    /// Inner iterations spent (0 = first subproblem already conservative).
    pub inner_count: usize,
    /// Transformed-objective gap to the previous outer iterate.
    pub v: f64,
}

#[derive(Debug, Clone)]
pub struct MmaResult {
    pub x: Vec<f64>,
    pub f: Vec<f64>,
    pub transformed: f64,
    pub feasible: bool,
    pub converged: bool,
    pub outer_iterations: usize,
    pub trace: Vec<TraceRecord>,
}

/// Initial conservative factor of Eq.-style rule
/// `max{ (0.1/n) |grad|^T (x_max - x_min), 1e-6 }`.
pub fn rho_init(grad: &[f64], x_min: &[f64], x_max: &[f64]) -> f64 {
    let n = grad.len() as f64;
    let dot: f64 = grad
        .iter()
        .zip(x_min.iter().zip(x_max))
        .map(|(g, (lo, hi))| g.abs() * (hi - lo))
        .sum();
    (0.1 / n * dot).max(1e-6)
}

/// Separable convex approximations `g_i` of all functions around `x_hat`.
#[derive(Debug, Clone)]
pub struct Approximation {
    /// `(m + 1) x n` coefficient rows.
    pub p: Vec<Vec<f64>>,
    pub q: Vec<Vec<f64>>,
    /// Offsets making `g_i(x_hat) = f_i(x_hat)`.
    pub r: Vec<f64>,
    pub x_hat: Vec<f64>,
    pub low: Vec<f64>,
    pub upp: Vec<f64>,
}

impl Approximation {
    pub fn value(&self, i: usize, x: &[f64]) -> f64 {
        let mut v = self.r[i];
        for j in 0..x.len() {
            v += self.p[i][j] / (self.upp[j] - x[j]) + self.q[i][j] / (x[j] - self.low[j]);
        }
        v
    }

    /// `d g_i / d x_j`.
    pub fn deriv(&self, i: usize, x: &[f64], j: usize) -> f64 {
        let ux = self.upp[j] - x[j];
        let xl = x[j] - self.low[j];
        self.p[i][j] / (ux * ux) - self.q[i][j] / (xl * xl)
    }
}

/// Build the MMA approximation with asymmetric gradient weights 1.001/0.001
/// and curvature `rho_i / (x_max - x_min)`.
pub fn build_approximation(
    ev: &Evaluation,
    x_hat: &[f64],
    low: &[f64],
    upp: &[f64],
    x_min: &[f64],
    x_max: &[f64],
    rho: &[f64],
) -> Result<Approximation> {
    let n = x_hat.len();
    let nf = ev.f.len();
    for j in 0..n {
        if !(low[j] < x_hat[j] && x_hat[j] < upp[j]) {
            return Err(Error::Solver(format!(
                "asymptote invariant violated at coordinate {j}: L={} x={} U={}",
                low[j], x_hat[j], upp[j]
            )));
        }
    }
    let mut p = vec![vec![0.0; n]; nf];
    let mut q = vec![vec![0.0; n]; nf];
    let mut r = ev.f.clone();
    for i in 0..nf {
        for j in 0..n {
            let df = ev.grad[i][j];
            let dfp = df.max(0.0);
            let dfm = (-df).max(0.0);
            let ux = upp[j] - x_hat[j];
            let xl = x_hat[j] - low[j];
            let curv = rho[i] / (x_max[j] - x_min[j]);
            p[i][j] = ux * ux * (1.001 * dfp + 0.001 * dfm + curv);
            q[i][j] = xl * xl * (0.001 * dfp + 1.001 * dfm + curv);
            r[i] -= p[i][j] / ux + q[i][j] / xl;
        }
    }
    Ok(Approximation {
        p,
        q,
        r,
        x_hat: x_hat.to_vec(),
        low: low.to_vec(),
        upp: upp.to_vec(),
    })
}

/// The curvature distance `d^(k)(x)` entering the conservative-factor update:
/// `sum_j (U_j - L_j)(x_j - x_hat_j)^2 / ((U_j - x_j)(x_j - L_j)(x_max_j - x_min_j))`.
pub fn curvature_distance(
    x: &[f64],
    x_hat: &[f64],
    low: &[f64],
    upp: &[f64],
    x_min: &[f64],
    x_max: &[f64],
) -> f64 {
    x.iter()
        .enumerate()
        .map(|(j, &xj)| {
            let dx = xj - x_hat[j];
            (upp[j] - low[j]) * dx * dx / ((upp[j] - xj) * (xj - low[j]) * (x_max[j] - x_min[j]))
        })
        .sum()
}

/// True where the approximation is NOT conservative at `x_t`
/// (strictly `f_i > g_i`; ties count as conservative).
pub fn conservative_check(f_at_xt: &[f64], approx: &Approximation, x_t: &[f64]) -> Vec<bool> {
    f_at_xt
        .iter()
        .enumerate()
        .map(|(i, &fi)| fi > approx.value(i, x_t))
        .collect()
}

/// `min{ 1.1 (rho + nu), 10 rho }` with `nu = (f - g)/d_k`; degenerate
/// `d_k = 0` (trial point equals the expansion point) leaves `rho` unchanged.
pub fn rho_update(rho: f64, f_at_xt: f64, g_at_xt: f64, d_k: f64) -> f64 {
    if d_k <= 0.0 {
        return rho;
    }
    let nu = (f_at_xt - g_at_xt) / d_k;
    (1.1 * (rho + nu)).min(10.0 * rho)
}

/// Solve one MMA subproblem over the move-limit box `[alfa, beta]`.
/// Returns the trial point with the slack and auxiliary variables.
pub fn solve_subproblem(
    approx: &Approximation,
    alfa: &[f64],
    beta: &[f64],
    a0: f64,
    a: &[f64],
    c: &[f64],
    d: &[f64],
) -> Result<SubproblemSolution> {
    let m = a.len();
    let b: Vec<f64> = (1..=m).map(|i| -approx.r[i]).collect();
    let sub = subproblem::Subproblem {
        low: &approx.low,
        upp: &approx.upp,
        alfa,
        beta,
        p: &approx.p,
        q: &approx.q,
        b: &b,
        a0,
        a,
        c,
        d,
    };
    let sol = subproblem::solve(&sub, 1e-10, 200)?;
    Ok(SubproblemSolution {
        x: sol.x,
        y: sol.y,
        z: sol.z,
        lam: sol.lam,
        xsi: sol.xsi,
        eta: sol.eta,
        kkt_residual: sol.residual,
    })
}

#[derive(Debug, Clone)]
pub struct SubproblemSolution {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: f64,
    pub lam: Vec<f64>,
    pub xsi: Vec<f64>,
    pub eta: Vec<f64>,
    pub kkt_residual: f64,
}

/// Exact-penalty transformed objective `f_0 + sum_i (c_i v_i + d_i v_i^2 / 2)`
/// with `v_i = max(f_i, 0)`; this is the quantity the algorithm provably
/// decreases.
pub fn transformed_objective(f: &[f64], c: &[f64], d: &[f64]) -> f64 {
    let mut v = f[0];
    for (i, &fi) in f[1..].iter().enumerate() {
        let viol = fi.max(0.0);
        v += c[i] * viol + 0.5 * d[i] * viol * viol;
    }
    v
}

/// Mapping between the full design vector and its free (non-pinned)
/// coordinates.
struct FreeMap {
    free: Vec<usize>,
    template: Vec<f64>,
}

impl FreeMap {
    fn new(x_min: &[f64], x_max: &[f64], x0: &[f64]) -> Self {
        let free = (0..x0.len()).filter(|&j| x_max[j] > x_min[j]).collect();
        FreeMap { free, template: x0.to_vec() }
    }

    fn reduce(&self, full: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&j| full[j]).collect()
    }

    fn expand(&self, red: &[f64]) -> Vec<f64> {
        let mut full = self.template.clone();
        for (k, &j) in self.free.iter().enumerate() {
            full[j] = red[k];
        }
        full
    }
}

/// Run GCMMA from `x0`. The trace holds one record per outer iteration.
pub fn optimize<P: NlpProblem + ?Sized>(
    problem: &P,
    x0: &[f64],
    options: &MmaOptions,
) -> Result<MmaResult> {
    let (xmin_full, xmax_full) = problem.bounds();
    let nv = problem.n_vars();
    if x0.len() != nv || xmin_full.len() != nv || xmax_full.len() != nv {
        return Err(Error::dimension("starting point / bounds length mismatch"));
    }
    for j in 0..nv {
        if !(xmin_full[j] <= x0[j] && x0[j] <= xmax_full[j]) {
            return Err(Error::bounds(format!(
                "x0[{j}] = {} outside [{}, {}]",
                x0[j], xmin_full[j], xmax_full[j]
            )));
        }
    }
    let m = problem.n_cons();
    let a0 = problem.a0();
    let a = vec![0.0; m];
    let c = problem.c_weights();
    let d = vec![1.0; m];

    let fm = FreeMap::new(&xmin_full, &xmax_full, x0);
    let xmin = fm.reduce(&xmin_full);
    let xmax = fm.reduce(&xmax_full);
    let n = fm.free.len();

    let mut x = fm.reduce(x0);
    // Evaluate at a reduced point; gradient rows come back in full
    // coordinates and are restricted to the free ones.
    let eval_reduced = |xr: &[f64]| -> Result<Evaluation> {
        let mut e = problem.eval(&fm.expand(xr))?;
        if e.f.len() != m + 1 || e.grad.len() != m + 1 {
            return Err(Error::dimension("evaluation arity does not match n_cons"));
        }
        for g in &mut e.grad {
            if g.len() != nv {
                return Err(Error::dimension("gradient length does not match n_vars"));
            }
            *g = fm.reduce(g);
        }
        Ok(e)
    };
    let mut ev = eval_reduced(&x)?;
    let mut f_trans = transformed_objective(&ev.f, &c, &d);

    if n == 0 {
        // Everything pinned: nothing to optimize.
        let feasible = ev.f[1..].iter().all(|&fi| fi <= options.feasibility_tol);
        return Ok(MmaResult {
            x: x0.to_vec(),
            f: ev.f,
            transformed: f_trans,
            feasible,
            converged: true,
            outer_iterations: 0,
            trace: Vec::new(),
        });
    }

    let range: Vec<f64> = xmin.iter().zip(&xmax).map(|(lo, hi)| hi - lo).collect();
    let mut low = vec![0.0; n];
    let mut upp = vec![0.0; n];
    let mut x_prev: Option<Vec<f64>> = None;
    let mut x_prev2: Option<Vec<f64>> = None;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut outer = 0;

    for k in 0..options.max_outer {
        outer = k + 1;
        // Asymptotes: fixed spread for the first two iterations, then
        // shrink 0.7 on oscillation / expand 1.2 on monotone moves, with the
        // distance clamped to [0.01, 10] x range.
        match (&x_prev, &x_prev2) {
            (Some(xp), Some(xpp)) => {
                for j in 0..n {
                    let osc = (x[j] - xp[j]) * (xp[j] - xpp[j]);
                    let factor = if osc < 0.0 {
                        0.7
                    } else if osc > 0.0 {
                        1.2
                    } else {
                        1.0
                    };
                    let dl = (factor * (xp[j] - low[j])).clamp(0.01 * range[j], 10.0 * range[j]);
                    let du = (factor * (upp[j] - xp[j])).clamp(0.01 * range[j], 10.0 * range[j]);
                    low[j] = x[j] - dl;
                    upp[j] = x[j] + du;
                }
            }
            _ => {
                for j in 0..n {
                    low[j] = x[j] - 0.5 * range[j];
                    upp[j] = x[j] + 0.5 * range[j];
                }
            }
        }
        // Move limits strictly inside the asymptotes.
        let alfa: Vec<f64> = (0..n)
            .map(|j| xmin[j].max(low[j] + 0.1 * (x[j] - low[j])).max(x[j] - 0.5 * range[j]))
            .collect();
        let beta: Vec<f64> = (0..n)
            .map(|j| xmax[j].min(upp[j] - 0.1 * (upp[j] - x[j])).min(x[j] + 0.5 * range[j]))
            .collect();

        let mut rho: Vec<f64> =
            ev.grad.iter().map(|g| rho_init(g, &xmin, &xmax)).collect();

        let mut inner_count = 0;
        let (ev_t, sol) = loop {
            let approx = build_approximation(&ev, &x, &low, &upp, &xmin, &xmax, &rho)?;
            let sol = solve_subproblem(&approx, &alfa, &beta, a0, &a, &c, &d)?;
            let ev_t = eval_reduced(&sol.x)?;
            let noncons = conservative_check(&ev_t.f, &approx, &sol.x);
            if noncons.iter().all(|&b| !b) {
                break (ev_t, sol);
            }
            if inner_count >= options.max_inner {
                return Err(Error::Solver(format!(
                    "inner loop failed to reach a conservative approximation in {} iterations",
                    options.max_inner
                )));
            }
            let d_k = curvature_distance(&sol.x, &x, &low, &upp, &xmin, &xmax);
            for (i, &bad) in noncons.iter().enumerate() {
                if bad {
                    rho[i] = rho_update(rho[i], ev_t.f[i], approx.value(i, &sol.x), d_k);
                }
            }
            inner_count += 1;
        };

        let f_new = transformed_objective(&ev_t.f, &c, &d);
        // Conservative approximations guarantee descent when the subproblem
        // is solved exactly; a best-effort subsolve near a flat optimum can
        // produce a marginal increase. Refuse the step and stop there.
        if f_new > f_trans {
            converged = true;
            break;
        }
        let v = if options.relative_gap {
            (f_new - f_trans).abs() / f_trans.abs().max(1.0)
        } else {
            (f_new - f_trans).abs()
        };
        trace.push(TraceRecord {
            k,
            f: ev_t.f.clone(),
            z: sol.z,
            y: sol.y.clone(),
            rho: rho.clone(),
            inner_count,
            v,
        });

        x_prev2 = x_prev.take();
        x_prev = Some(std::mem::replace(&mut x, sol.x));
        ev = ev_t;
        f_trans = f_new;

        if k > 0 && v <= options.epsilon_tol {
            converged = true;
            break;
        }
    }

    let feasible = ev.f[1..].iter().all(|&fi| fi <= options.feasibility_tol);
    Ok(MmaResult {
        x: fm.expand(&x),
        f: ev.f,
        transformed: f_trans,
        feasible,
        converged,
        outer_iterations: outer,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::SplitMix;

    /// min sum x_i^2 s.t. 3 - sum x_i <= 0 on [0, 5]^3; optimum (1,1,1).
    struct SumSquares;

    impl NlpProblem for SumSquares {
        fn n_vars(&self) -> usize {
            3
        }
        fn n_cons(&self) -> usize {
            1
        }
        fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
            (vec![0.0; 3], vec![5.0; 3])
        }
        fn eval(&self, x: &[f64]) -> crate::Result<Evaluation> {
            let f0: f64 = x.iter().map(|v| v * v).sum();
            let f1 = 3.0 - x.iter().sum::<f64>();
            Ok(Evaluation {
                f: vec![f0, f1],
                grad: vec![x.iter().map(|v| 2.0 * v).collect(), vec![-1.0; 3]],
            })
        }
    }

    /// min -x1 - x2 s.t. x1^2 + x2^2 <= 2 on [0, 2]^2; optimum (1, 1).
    struct DiskLinear;

    impl NlpProblem for DiskLinear {
        fn n_vars(&self) -> usize {
            2
        }
        fn n_cons(&self) -> usize {
            1
        }
        fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
            (vec![0.0; 2], vec![2.0; 2])
        }
        fn eval(&self, x: &[f64]) -> crate::Result<Evaluation> {
            Ok(Evaluation {
                f: vec![-x[0] - x[1], x[0] * x[0] + x[1] * x[1] - 2.0],
                grad: vec![vec![-1.0, -1.0], vec![2.0 * x[0], 2.0 * x[1]]],
            })
        }
    }

    /// min (x1-2)^2 + (x2+1)^2 with an inactive constraint x1 + x2 <= 10 on
    /// [-3, 3]^2; optimum (2, -1).
    struct ShiftedQuadratic;

    impl NlpProblem for ShiftedQuadratic {
        fn n_vars(&self) -> usize {
            2
        }
        fn n_cons(&self) -> usize {
            1
        }
        fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
            (vec![-3.0; 2], vec![3.0; 2])
        }
        fn eval(&self, x: &[f64]) -> crate::Result<Evaluation> {
            let (a, b) = (x[0] - 2.0, x[1] + 1.0);
            Ok(Evaluation {
                f: vec![a * a + b * b, x[0] + x[1] - 10.0],
                grad: vec![vec![2.0 * a, 2.0 * b], vec![1.0, 1.0]],
            })
        }
    }

    fn tight() -> MmaOptions {
        MmaOptions { epsilon_tol: 1e-9, ..MmaOptions::default() }
    }

    #[test]
    fn rho_init_reference_cases() {
        assert_eq!(rho_init(&[0.0; 7], &[0.0; 7], &[1.0; 7]), 1e-6);
        for n in [1usize, 4, 50] {
            let v = rho_init(&vec![1.0; n], &vec![0.0; n], &vec![1.0; n]);
            assert!((v - 0.1).abs() < 1e-15);
        }
        let mut rng = SplitMix::new(1);
        for _ in 0..100 {
            let n = 5;
            let g: Vec<f64> = (0..n).map(|_| rng.uniform(-3.0, 3.0)).collect();
            let lo: Vec<f64> = (0..n).map(|_| rng.uniform(-1.0, 0.0)).collect();
            let hi: Vec<f64> = (0..n).map(|_| rng.uniform(0.5, 2.0)).collect();
            // independent accumulation order
            let mut expect = 0.0;
            for j in (0..n).rev() {
                expect += g[j].abs() * (hi[j] - lo[j]) * 0.1 / n as f64;
            }
            let got = rho_init(&g, &lo, &hi);
            assert!((got - expect.max(1e-6)).abs() < 1e-12);
        }
    }

    fn random_setup(
        rng: &mut SplitMix,
        n: usize,
        nf: usize,
    ) -> (Evaluation, Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
        let x: Vec<f64> = (0..n).map(|_| rng.uniform(0.2, 0.8)).collect();
        let xmin = vec![0.0; n];
        let xmax = vec![1.0; n];
        let low: Vec<f64> = x.iter().map(|v| v - rng.uniform(0.3, 0.6)).collect();
        let upp: Vec<f64> = x.iter().map(|v| v + rng.uniform(0.3, 0.6)).collect();
        let ev = Evaluation {
            f: (0..nf).map(|_| rng.uniform(-2.0, 2.0)).collect(),
            grad: (0..nf)
                .map(|_| (0..n).map(|_| rng.uniform(-4.0, 4.0)).collect())
                .collect(),
        };
        (ev, x, xmin, xmax, low, upp)
    }

    #[test]
    fn approximation_is_tangent_at_the_expansion_point() {
        let mut rng = SplitMix::new(2);
        for _ in 0..100 {
            let (ev, x, xmin, xmax, low, upp) = random_setup(&mut rng, 6, 3);
            let rho: Vec<f64> = (0..3).map(|_| rng.uniform(0.0, 2.0)).collect();
            let approx = build_approximation(&ev, &x, &low, &upp, &xmin, &xmax, &rho).unwrap();
            for i in 0..3 {
                assert!(
                    (approx.value(i, &x) - ev.f[i]).abs() <= 1e-12 * ev.f[i].abs().max(1.0),
                    "tangency broken"
                );
            }
        }
    }

    #[test]
    fn approximation_gradient_matches_at_zero_rho() {
        let mut rng = SplitMix::new(3);
        for _ in 0..100 {
            let (ev, x, xmin, xmax, low, upp) = random_setup(&mut rng, 6, 2);
            let approx =
                build_approximation(&ev, &x, &low, &upp, &xmin, &xmax, &[0.0, 0.0]).unwrap();
            for i in 0..2 {
                for j in 0..6 {
                    assert!((approx.deriv(i, &x, j) - ev.grad[i][j]).abs() <= 1e-10);
                }
            }
        }
    }

    #[test]
    fn gradient_weights_split_as_specified() {
        // scalar f(x) = x: gradient +1 puts the 1.001 weight on p and the
        // 0.001 weight on q (and mirrored for gradient -1).
        let ev = Evaluation { f: vec![0.5], grad: vec![vec![1.0]] };
        let approx =
            build_approximation(&ev, &[0.5], &[-0.5], &[1.5], &[0.0], &[1.0], &[0.0]).unwrap();
        assert!((approx.p[0][0] - 1.0 * 1.001).abs() < 1e-12); // (U-x)^2 = 1
        assert!((approx.q[0][0] - 1.0 * 0.001).abs() < 1e-12);
        let ev = Evaluation { f: vec![0.5], grad: vec![vec![-1.0]] };
        let approx =
            build_approximation(&ev, &[0.5], &[-0.5], &[1.5], &[0.0], &[1.0], &[0.0]).unwrap();
        assert!((approx.p[0][0] - 0.001).abs() < 1e-12);
        assert!((approx.q[0][0] - 1.001).abs() < 1e-12);
    }

    #[test]
    fn asymptote_violation_is_an_error() {
        let ev = Evaluation { f: vec![0.0], grad: vec![vec![1.0]] };
        assert!(build_approximation(&ev, &[0.5], &[0.6], &[1.5], &[0.0], &[1.0], &[0.0]).is_err());
    }

    fn free_subproblem_setup(rng: &mut SplitMix, n: usize) -> Approximation {
        // objective-only rows; constraint row identically -1 (never active)
        let p0: Vec<f64> = (0..n).map(|_| rng.uniform(0.01, 1.0)).collect();
        let q0: Vec<f64> = (0..n).map(|_| rng.uniform(0.01, 1.0)).collect();
        Approximation {
            p: vec![p0, vec![0.0; n]],
            q: vec![q0, vec![0.0; n]],
            r: vec![0.0, -1.0],
            x_hat: vec![0.5; n],
            low: vec![-1.0; n],
            upp: vec![2.0; n],
        }
    }

    #[test]
    fn subproblem_matches_per_coordinate_stationarity() {
        let mut rng = SplitMix::new(5);
        for _ in 0..20 {
            let n = 4;
            let approx = free_subproblem_setup(&mut rng, n);
            let alfa = vec![-0.5; n];
            let beta = vec![1.5; n];
            let sol =
                solve_subproblem(&approx, &alfa, &beta, 1.0, &[0.0], &[1e4], &[1.0]).unwrap();
            for j in 0..n {
                // p/(U-x)^2 = q/(x-L)^2 => x = (L sqrt(p) + U sqrt(q)) / (sqrt(p)+sqrt(q))
                let sp = approx.p[0][j].sqrt();
                let sq = approx.q[0][j].sqrt();
                let xstar = ((approx.low[j] * sp + approx.upp[j] * sq) / (sp + sq))
                    .clamp(alfa[j], beta[j]);
                assert!(
                    (sol.x[j] - xstar).abs() < 1e-7,
                    "coordinate {j}: {} vs {xstar}",
                    sol.x[j]
                );
            }
            assert!(sol.kkt_residual < 1e-9);
            assert!(sol.y.iter().all(|&v| v >= 0.0) && sol.z >= 0.0);
        }
    }

    #[test]
    fn binding_box_constraint_sits_on_the_limit_with_correct_multiplier() {
        let mut rng = SplitMix::new(6);
        for _ in 0..20 {
            let n = 3;
            let mut approx = free_subproblem_setup(&mut rng, n);
            // steer coordinate 0 hard toward low values: large p pushes x
            // away from U... make the interior minimizer fall below alfa by
            // choosing q tiny and p large.
            approx.p[0][0] = 5.0;
            approx.q[0][0] = 1e-6;
            let alfa = vec![0.2; n];
            let beta = vec![1.2; n];
            let sol =
                solve_subproblem(&approx, &alfa, &beta, 1.0, &[0.0], &[1e4], &[1.0]).unwrap();
            // interior stationary point for coordinate 0 is below alfa
            let sp = approx.p[0][0].sqrt();
            let sq = approx.q[0][0].sqrt();
            let xstar = (approx.low[0] * sp + approx.upp[0] * sq) / (sp + sq);
            assert!(xstar < alfa[0]);
            assert!((sol.x[0] - alfa[0]).abs() < 1e-5);
            // lower-bound multiplier active, upper inactive
            assert!(sol.xsi[0] > 1e-3, "xsi = {}", sol.xsi[0]);
            assert!(sol.eta[0] < 1e-6, "eta = {}", sol.eta[0]);
        }
    }

    #[test]
    fn subproblem_beats_a_dense_grid() {
        let mut rng = SplitMix::new(7);
        for _ in 0..10 {
            let n = 2;
            // one real constraint row
            let p0: Vec<f64> = (0..n).map(|_| rng.uniform(0.01, 1.0)).collect();
            let q0: Vec<f64> = (0..n).map(|_| rng.uniform(0.01, 1.0)).collect();
            let p1: Vec<f64> = (0..n).map(|_| rng.uniform(0.0, 0.5)).collect();
            let q1: Vec<f64> = (0..n).map(|_| rng.uniform(0.0, 0.5)).collect();
            let approx = Approximation {
                p: vec![p0, p1],
                q: vec![q0, q1],
                r: vec![0.0, rng.uniform(-2.5, -1.5)],
                x_hat: vec![0.5; n],
                low: vec![-1.0; n],
                upp: vec![2.0; n],
            };
            let alfa = vec![-0.4; n];
            let beta = vec![1.4; n];
            let c = vec![1e4];
            let sol = solve_subproblem(&approx, &alfa, &beta, 1.0, &[0.0], &c, &[1.0]).unwrap();
            let penalized = |x: &[f64]| {
                let g1 = approx.value(1, x).max(0.0);
                approx.value(0, x) + c[0] * g1 + 0.5 * g1 * g1
            };
            let obj = penalized(&sol.x);
            let grid = 120;
            let mut best = f64::INFINITY;
            for i in 0..=grid {
                for j in 0..=grid {
                    let x = [
                        alfa[0] + (beta[0] - alfa[0]) * i as f64 / grid as f64,
                        alfa[1] + (beta[1] - alfa[1]) * j as f64 / grid as f64,
                    ];
                    best = best.min(penalized(&x));
                }
            }
            // grid resolution slack
            assert!(obj <= best + 1e-2, "subproblem {obj} vs grid {best}");
        }
    }

    #[test]
    fn conservative_check_strictness() {
        let n = 2;
        let approx = Approximation {
            p: vec![vec![0.1; n]],
            q: vec![vec![0.1; n]],
            r: vec![0.3],
            x_hat: vec![0.5; n],
            low: vec![0.0; n],
            upp: vec![1.0; n],
        };
        let x = [0.4, 0.6];
        let g = approx.value(0, &x);
        assert_eq!(conservative_check(&[g], &approx, &x), vec![false]); // tie
        assert_eq!(conservative_check(&[g + 1e-9], &approx, &x), vec![true]);
        assert_eq!(conservative_check(&[g - 1e-9], &approx, &x), vec![false]);
    }

    #[test]
    fn rho_update_reference_cases() {
        assert!((rho_update(0.5, 1.0, 1.0, 7.0) - 0.55).abs() < 1e-15); // nu = 0 -> 1.1 rho
        assert_eq!(rho_update(0.5, 100.0, 0.0, 1e-6), 5.0); // huge nu -> 10 rho cap
        assert_eq!(rho_update(0.5, 2.0, 1.0, 0.0), 0.5); // degenerate d_k
    }

    #[test]
    fn growing_rho_always_restores_conservativeness() {
        // On random smooth 1-D functions, finitely many updates make g >= f
        // at a fixed trial point.
        let mut rng = SplitMix::new(9);
        for _ in 0..100 {
            let a2 = rng.uniform(-3.0, 3.0);
            let a1 = rng.uniform(-3.0, 3.0);
            let a3 = rng.uniform(-1.0, 1.0);
            let f = |x: f64| a3 * x * x * x + a2 * x * x + a1 * x;
            let df = |x: f64| 3.0 * a3 * x * x + 2.0 * a2 * x + a1;
            let x_hat = rng.uniform(0.3, 0.7);
            let x_t = rng.uniform(0.1, 0.9);
            let (xmin, xmax) = (vec![0.0], vec![1.0]);
            let (low, upp) = (vec![-0.5], vec![1.5]);
            let mut rho = 1e-6;
            let mut steps = 0;
            loop {
                let ev = Evaluation { f: vec![f(x_hat)], grad: vec![vec![df(x_hat)]] };
                let approx =
                    build_approximation(&ev, &[x_hat], &low, &upp, &xmin, &xmax, &[rho]).unwrap();
                let g = approx.value(0, &[x_t]);
                if f(x_t) <= g {
                    break;
                }
                let dk = curvature_distance(&[x_t], &[x_hat], &low, &upp, &xmin, &xmax);
                let next = rho_update(rho, f(x_t), g, dk);
                assert!(next > rho);
                rho = next;
                steps += 1;
                assert!(steps < 200, "rho updates failed to terminate");
            }
        }
    }

    #[test]
    fn toy_programs_reach_their_analytic_optima() {
        let r = optimize(&SumSquares, &[4.0, 0.2, 2.5], &tight()).unwrap();
        assert!((r.f[0] - 3.0).abs() < 1e-6, "sum-squares objective {}", r.f[0]);
        assert!(r.feasible && r.converged);
        for v in &r.x {
            assert!((v - 1.0).abs() < 1e-3);
        }

        let r = optimize(&DiskLinear, &[0.1, 1.9], &tight()).unwrap();
        assert!((r.f[0] - (-2.0)).abs() < 1e-6, "disk objective {}", r.f[0]);
        assert!(r.feasible);

        let r = optimize(&ShiftedQuadratic, &[-2.0, 2.0], &tight()).unwrap();
        assert!(r.f[0].abs() < 1e-6, "quadratic objective {}", r.f[0]);
        assert!((r.x[0] - 2.0).abs() < 1e-3 && (r.x[1] + 1.0).abs() < 1e-3);
    }

    #[test]
    fn already_optimal_start_converges_immediately() {
        let r = optimize(&ShiftedQuadratic, &[2.0, -1.0], &tight()).unwrap();
        assert!(r.converged);
        assert!(r.outer_iterations <= 2, "took {} outer iterations", r.outer_iterations);
        assert!(r.f[0].abs() < 1e-9);
    }

    #[test]
    fn transformed_objective_is_monotone_on_toys() {
        for (problem, x0) in [
            (&SumSquares as &dyn NlpProblem, vec![4.9, 4.9, 4.9]),
            (&DiskLinear, vec![0.0, 0.0]),
            (&ShiftedQuadratic, vec![3.0, 3.0]),
        ] {
            let r = optimize(problem, &x0, &tight()).unwrap();
            let c = problem.c_weights();
            let d = vec![1.0; problem.n_cons()];
            let mut prev = f64::INFINITY;
            for rec in &r.trace {
                let t = transformed_objective(&rec.f, &c, &d);
                assert!(t <= prev + 1e-9, "transformed objective rose: {prev} -> {t}");
                prev = t;
            }
        }
    }

    #[test]
    fn infeasible_start_is_handled_by_the_relaxation() {
        // start violating the disk constraint
        let r = optimize(&DiskLinear, &[2.0, 2.0], &tight()).unwrap();
        assert!(r.feasible);
        assert!((r.f[0] - (-2.0)).abs() < 1e-5);
    }

    #[test]
    fn fixed_coordinates_stay_pinned() {
        struct Pinned;
        impl NlpProblem for Pinned {
            fn n_vars(&self) -> usize {
                3
            }
            fn n_cons(&self) -> usize {
                1
            }
            fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
                (vec![0.0, 0.7, 0.0], vec![5.0, 0.7, 5.0])
            }
            fn eval(&self, x: &[f64]) -> crate::Result<Evaluation> {
                let f0: f64 = x.iter().map(|v| v * v).sum();
                Ok(Evaluation {
                    f: vec![f0, 1.0 - x[0] - x[2]],
                    grad: vec![x.iter().map(|v| 2.0 * v).collect(), vec![-1.0, 0.0, -1.0]],
                })
            }
        }
        let r = optimize(&Pinned, &[2.0, 0.7, 2.0], &tight()).unwrap();
        assert_eq!(r.x[1], 0.7);
        assert!((r.x[0] - 0.5).abs() < 1e-3 && (r.x[2] - 0.5).abs() < 1e-3);
        assert!((r.f[0] - (0.5 + 0.7 * 0.7)).abs() < 1e-6);
    }

    #[test]
    fn rejects_out_of_box_start() {
        assert!(optimize(&DiskLinear, &[3.0, 0.0], &tight()).is_err());
        assert!(optimize(&DiskLinear, &[0.0], &tight()).is_err());
    }
}
