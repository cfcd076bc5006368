//! End-to-end acceptance suite: one test per shipping criterion, each
//! printing a single PASS/FAIL line (visible with `--nocapture` or on
//! failure). Budgets assume a single worker core.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use starcov::config::Config;
use starcov::detection::{
    asymptotic_min_dep, avg_min_dep_numeric, dep, dep_lower_bound, min_dep, optimal_threshold,
    AsymptoticDep, DepParams,
};
use starcov::gcmma::{optimize, transformed_objective, Evaluation, MmaOptions, NlpProblem};
use starcov::model::sample_channels;
use starcov::oracle::{
    fd_gradient, grid_min_threshold, mc_avg_min_dep, mc_dep_curve, mc_outage_bob, mc_outage_carol,
};
use starcov::problem::ProblemInstance;
use starcov::qos::{outage_bob, outage_carol, rate_bb, LinkGains};
use starcov::sweep::run_sweep;

fn report(criterion: usize, ok: bool, detail: &str) {
    let tag = if ok { "PASS" } else { "FAIL" };
    println!("{tag} criterion {criterion}: {detail}");
    assert!(ok, "criterion {criterion}: {detail}");
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    10f64.powf(lo + (hi - lo) * rng.gen::<f64>())
}

/// Random detection-error parameters with a dip deep enough to measure.
fn random_dep_params(rng: &mut ChaCha8Rng) -> DepParams {
    loop {
        let lambda = log_uniform(rng, -12.0, -8.0);
        let p = DepParams {
            lambda,
            lambda_tilde: lambda * (1.0 + log_uniform(rng, -1.0, 1.5)),
            gamma: log_uniform(rng, -12.0, -8.0),
            p_j_max: log_uniform(rng, -1.0, 1.0),
            sigma2_w: log_uniform(rng, -14.0, -11.0),
        };
        if min_dep(&p) < 0.999 {
            return p;
        }
    }
}

/// As above, additionally resolvable by a `grid`-point log search: the dip
/// rises clearly within 1.5 grid steps on both sides of the minimizer.
fn random_grid_dep_params(rng: &mut ChaCha8Rng, grid: usize) -> DepParams {
    loop {
        let p = random_dep_params(rng);
        let m = min_dep(&p);
        let tau_star = optimal_threshold(&p).unwrap();
        let step = (tau_star * 10.0 / (p.sigma2_w * (1.0 - 1e-3))).ln() / (grid - 1) as f64;
        let d = (1.5 * step).exp();
        if dep(tau_star / d, &p) >= m + 1e-12 && dep(tau_star * d, &p) >= m + 1e-12 {
            return p;
        }
    }
}

fn random_asymptotic(rng: &mut ChaCha8Rng) -> AsymptoticDep {
    AsymptoticDep {
        varpi_b: log_uniform(rng, -2.0, 0.5),
        varpi_c: log_uniform(rng, -2.0, 0.5),
        theta_r: 0.5 + 29.5 * rng.gen::<f64>(),
        l_rw: log_uniform(rng, -13.0, -9.0),
        lambda_rw: log_uniform(rng, -11.0, -8.0),
        p_j_max: log_uniform(rng, -1.0, 1.0),
    }
}

fn random_gains(rng: &mut ChaCha8Rng) -> LinkGains {
    LinkGains {
        g_bb: log_uniform(rng, -11.0, -9.0),
        g_bc: log_uniform(rng, -13.0, -11.0),
        g_bj: log_uniform(rng, -12.0, -10.0),
        g_cc_sig: log_uniform(rng, -11.0, -9.0),
        g_cb: log_uniform(rng, -13.0, -11.0),
    }
}

#[test]
fn criterion_01_dep_closed_form_vs_monte_carlo() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    let mut in_ci = 0usize;
    let mut total = 0usize;
    for k in 0..30 {
        let p = random_dep_params(&mut rng);
        let tau_star = optimal_threshold(&p).unwrap();
        let taus: Vec<f64> = (0..20)
            .map(|i| tau_star * 10f64.powf(-0.6 + 1.2 * i as f64 / 19.0))
            .collect();
        let est = mc_dep_curve(&p, &taus, 1_000_000, 9000 + k).unwrap();
        for (tau, e) in taus.iter().zip(est) {
            let err = (e.mean - dep(*tau, &p)).abs();
            worst = worst.max(err);
            total += 1;
            if err <= e.ci_half {
                in_ci += 1;
            }
        }
    }
    let elapsed = t0.elapsed().as_secs_f64();
    let ok = worst <= 0.01 && in_ci as f64 >= 0.95 * total as f64 && elapsed <= 120.0;
    report(
        1,
        ok,
        &format!(
            "detection error probability vs 1e6-sample Monte Carlo: max abs error {worst:.2e}, \
             {in_ci}/{total} within the 95% CI, {elapsed:.1}s"
        ),
    );
}

#[test]
fn criterion_02_optimal_threshold_vs_grid() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let grid = 100_000;
    let mut worst_steps = 0.0f64;
    let mut worst_gap = 0.0f64;
    for _ in 0..100 {
        let p = random_grid_dep_params(&mut rng, grid);
        let (tau_grid, dep_grid) = grid_min_threshold(&p, grid).unwrap();
        let tau_star = optimal_threshold(&p).unwrap();
        let step = (tau_star * 10.0 / (p.sigma2_w * (1.0 - 1e-3))).ln() / (grid - 1) as f64;
        worst_steps = worst_steps.max((tau_grid / tau_star).ln().abs() / step);
        worst_gap = worst_gap.max(min_dep(&p) - dep_grid);
    }
    let elapsed = t0.elapsed().as_secs_f64();
    let ok = worst_steps <= 2.0 && worst_gap <= 1e-4 && elapsed <= 60.0;
    report(
        2,
        ok,
        &format!(
            "optimal threshold vs 1e5-point grid on 100 configs: worst offset {worst_steps:.2} \
             steps, worst value gap {worst_gap:.1e}, {elapsed:.1}s"
        ),
    );
}

#[test]
fn criterion_03_average_dep_bound_and_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let mut chain_ok = true;
    for _ in 0..100 {
        let a = random_asymptotic(&mut rng);
        let avg = avg_min_dep_numeric(&a).unwrap();
        if !(dep_lower_bound(&a) < avg && avg <= 1.0 + 1e-12) {
            chain_ok = false;
        }
    }
    let mut worst = 0.0f64;
    for k in 0..5 {
        let a = random_asymptotic(&mut rng);
        let exact = avg_min_dep_numeric(&a).unwrap();
        let est = mc_avg_min_dep(&a, 1_000_000, 9100 + k).unwrap();
        worst = worst.max((est.mean - exact).abs());
    }
    let ok = chain_ok && worst <= 0.005;
    report(
        3,
        ok,
        &format!(
            "lower bound < averaged minimum DEP <= 1 on 100 draws ({chain_ok}); quadrature vs \
             1e6-sample Monte Carlo max abs error {worst:.2e}"
        ),
    );
}

#[test]
fn criterion_04_asymptotic_dep_converges_in_n() {
    let cfg = Config::from_str("").unwrap();
    let mut errs = Vec::new();
    for (ni, &n) in [16usize, 64, 256, 1024].iter().enumerate() {
        let mut params = cfg.system.to_params().unwrap();
        params.n = n;
        let mut total = 0.0;
        for draw in 0..1000u64 {
            let channels = sample_channels(&params, 40_000 + 1000 * ni as u64 + draw).unwrap();
            let inst = ProblemInstance::new(params.clone(), channels).unwrap();
            let x = inst.initial_point(77_000 + draw);
            let (bf, profile) = inst.decode(&x).unwrap();
            let p = DepParams::from_design(
                &inst.channels,
                &profile,
                &bf,
                params.p_j_max,
                params.sigma2_w,
            );
            let a = AsymptoticDep::from_design(&inst.channels, &profile, &bf, params.p_j_max);
            total += (min_dep(&p) - asymptotic_min_dep(&a, p.gamma)).abs();
        }
        errs.push(total / 1000.0);
    }
    let decreasing = errs.windows(2).all(|w| w[1] < w[0]);
    let ok = decreasing && errs[3] < 0.02;
    report(
        4,
        ok,
        &format!("mean |exact - asymptotic| min DEP over N in {{16,64,256,1024}}: {errs:.4?}"),
    );
}

#[test]
fn criterion_05_outage_closed_forms() {
    let cfg = Config::from_str("").unwrap();
    let params = cfg.system.to_params().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    let mut worst = 0.0f64;
    for k in 0..30 {
        let gains = random_gains(&mut rng);
        let r = 0.5 + 3.5 * rng.gen::<f64>();
        let eb = mc_outage_bob(&gains, r, &params, 1_000_000, 9200 + k).unwrap();
        worst = worst.max((eb.mean - outage_bob(&gains, r, &params)).abs());
        let ec = mc_outage_carol(&gains, r, &params, 1_000_000, 9300 + k).unwrap();
        worst = worst.max((ec.mean - outage_carol(&gains, r, &params)).abs());
    }
    // rate_bb inverts the Bob outage at the target probability.
    let mut worst_inv = 0.0f64;
    let mut interior = 0usize;
    for _ in 0..50 {
        let gains = random_gains(&mut rng);
        let r = rate_bb(&gains, &params);
        if r > 0.0 {
            interior += 1;
            worst_inv = worst_inv.max((outage_bob(&gains, r, &params) - params.iota).abs());
        }
    }
    let ok = worst <= 0.005 && interior > 0 && worst_inv <= 1e-9;
    report(
        5,
        ok,
        &format!(
            "outage probabilities vs 1e6-sample Monte Carlo on 30 configs per link: max abs \
             error {worst:.2e}; outage at the delivered rate off target by {worst_inv:.1e} \
             ({interior} interior cases)"
        ),
    );
}

#[test]
fn criterion_06_gradients_vs_finite_differences() {
    let cfg = Config::from_str("").unwrap();
    let params = cfg.system.to_params().unwrap();
    let channels = sample_channels(&params, 106).unwrap();
    let inst = ProblemInstance::new(params, channels).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let x: Vec<f64> = inst
            .x_min
            .iter()
            .zip(&inst.x_max)
            .map(|(&lo, &hi)| lo + (hi - lo) * (0.05 + 0.9 * rng.gen::<f64>()))
            .collect();
        let analytic = inst.grad_f(&x).unwrap();
        let numeric =
            fd_gradient(|y| inst.eval_f(y).map(|f| f.to_vec()), &x, &inst.x_min, &inst.x_max, 1e-6)
                .unwrap();
        for (a, fd) in analytic.iter().zip(&numeric) {
            let scale = a.iter().map(|g| g.abs()).fold(0.0f64, f64::max).max(1e-12);
            let err =
                a.iter().zip(fd).map(|(av, fv)| (av - fv).abs()).fold(0.0f64, f64::max) / scale;
            worst = worst.max(err);
        }
    }
    let ok = worst < 1e-5;
    report(
        6,
        ok,
        &format!(
            "analytic gradients of all four objective/constraint functions vs central finite \
             differences at 20 interior points: max relative error {worst:.2e}"
        ),
    );
}

#[test]
fn criterion_07_covert_design_solve() {
    let cfg = Config::from_str("[sweep]\nmulti_starts = 3\n").unwrap();
    let params = cfg.system.to_params().unwrap();
    let c = vec![1e4; 3];
    let d = vec![1.0; 3];
    let opts = MmaOptions::default();
    let mut ok = true;
    let mut detail = String::new();
    let mut worst_time = 0.0f64;
    for s in 0..3u64 {
        let channels = sample_channels(&params, 700 + s).unwrap();
        let inst = ProblemInstance::new(params.clone(), channels).unwrap();
        let t0 = Instant::now();
        let res = optimize(&inst, &inst.initial_point(7000 + s), &opts).unwrap();
        let elapsed = t0.elapsed().as_secs_f64();
        worst_time = worst_time.max(elapsed);
        let transformed: Vec<f64> =
            res.trace.iter().map(|t| transformed_objective(&t.f, &c, &d)).collect();
        let monotone = transformed.windows(2).all(|w| w[1] <= w[0] + 1e-9);
        let feasible = res.f[1..].iter().all(|&fi| fi <= 1e-6);
        if !(monotone && feasible && elapsed <= 60.0) {
            ok = false;
        }
        if s == 0 {
            detail = format!(
                "rate {:.3} bit/s/Hz in {} outer iterations, constraints {:?}",
                -res.f[0],
                res.outer_iterations,
                &res.f[1..]
            );
        }
    }
    report(
        7,
        ok,
        &format!(
            "M=3, N=30 covert design: transformed objective non-increasing, terminal \
             constraints <= 1e-6 on 3 channel draws, worst solve {worst_time:.1}s; {detail}"
        ),
    );
}

// --- convex toys for criterion 8 -------------------------------------------

/// min sum x_i^2 s.t. sum x_i >= 3 on [0,5]^3; optimum (1,1,1), f = 3.
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
    fn eval(&self, x: &[f64]) -> starcov::Result<Evaluation> {
        Ok(Evaluation {
            f: vec![x.iter().map(|v| v * v).sum(), 3.0 - x.iter().sum::<f64>()],
            grad: vec![x.iter().map(|v| 2.0 * v).collect(), vec![-1.0; 3]],
        })
    }
}

/// min -x1-x2 s.t. x1^2+x2^2 <= 2 on [0,2]^2; optimum (1,1), f = -2.
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
    fn eval(&self, x: &[f64]) -> starcov::Result<Evaluation> {
        Ok(Evaluation {
            f: vec![-x[0] - x[1], x[0] * x[0] + x[1] * x[1] - 2.0],
            grad: vec![vec![-1.0, -1.0], vec![2.0 * x[0], 2.0 * x[1]]],
        })
    }
}

/// min (x1-2)^2 + (x2+1)^2 with an inactive constraint; optimum f = 0.
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
    fn eval(&self, x: &[f64]) -> starcov::Result<Evaluation> {
        let (a, b) = (x[0] - 2.0, x[1] + 1.0);
        Ok(Evaluation {
            f: vec![a * a + b * b, x[0] + x[1] - 10.0],
            grad: vec![vec![2.0 * a, 2.0 * b], vec![1.0, 1.0]],
        })
    }
}

#[test]
fn criterion_08_convex_toys() {
    let opts = MmaOptions { epsilon_tol: 1e-9, ..MmaOptions::default() };
    let cases: [(&dyn NlpProblem, Vec<f64>, f64); 3] = [
        (&SumSquares, vec![4.0, 0.5, 2.0], 3.0),
        (&DiskLinear, vec![0.1, 0.1], -2.0),
        (&ShiftedQuadratic, vec![-2.0, 2.0], 0.0),
    ];
    let mut worst = 0.0f64;
    for (problem, x0, f_star) in cases {
        let res = optimize(problem, &x0, &opts).unwrap();
        worst = worst.max((res.f[0] - f_star).abs());
    }
    let ok = worst <= 1e-6;
    report(8, ok, &format!("three convex programs solved: max objective error {worst:.1e}"));
}

#[test]
fn criterion_09_sweep_trends() {
    let t0 = Instant::now();
    let common = "channel_seeds = 20\nmulti_starts = 2\n\
                  [solver]\nepsilon_tol = 1e-4\nmax_outer = 120\n";

    // Covert rate grows with the covertness budget, STAR beats the
    // reflect/transmit baseline under every budget.
    let eps_cfg = Config::from_str(&format!(
        "master_seed = 9\n[sweep]\nvariable = \"epsilon\"\n\
         values = [0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4]\n\
         schemes = [\"baseline\", \"star\"]\n{common}"
    ))
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let eps = run_sweep(&eps_cfg, dir.path()).unwrap();
    let star: Vec<f64> =
        eps.rows.iter().filter(|r| r.scheme == "star").map(|r| r.mean_rate).collect();
    let base: Vec<f64> =
        eps.rows.iter().filter(|r| r.scheme == "baseline").map(|r| r.mean_rate).collect();
    let eps_monotone = star.windows(2).all(|w| w[1] >= w[0] - 1e-12)
        && base.windows(2).all(|w| w[1] >= w[0] - 1e-12);
    let star_wins = star.iter().zip(&base).all(|(s, b)| s >= &(b - 1e-12));

    // More transmit power never hurts.
    let pmax_cfg = Config::from_str(&format!(
        "master_seed = 9\n[sweep]\nvariable = \"p_max\"\nvalues = [0.0, 1.5, 3.0]\n\
         schemes = [\"star\"]\n{common}"
    ))
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let pmax = run_sweep(&pmax_cfg, dir.path()).unwrap();
    let pr: Vec<f64> = pmax.rows.iter().map(|r| r.mean_rate).collect();
    let pmax_monotone = pr.windows(2).all(|w| w[1] >= w[0] - 1e-12);

    // More surface elements help, with diminishing returns.
    let n_cfg = Config::from_str(&format!(
        "master_seed = 9\n[sweep]\nvariable = \"n\"\nvalues = [16, 32, 48]\n\
         schemes = [\"star\"]\n{common}"
    ))
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let nsw = run_sweep(&n_cfg, dir.path()).unwrap();
    let nr: Vec<f64> = nsw.rows.iter().map(|r| r.mean_rate).collect();
    let n_monotone = nr.windows(2).all(|w| w[1] >= w[0] - 1e-12);
    let diminishing = (nr[2] - nr[1]) <= (nr[1] - nr[0]);

    let elapsed = t0.elapsed().as_secs_f64();
    let ok = eps_monotone && star_wins && pmax_monotone && n_monotone && diminishing
        && elapsed <= 1800.0;
    report(
        9,
        ok,
        &format!(
            "20-seed sweeps in {elapsed:.0}s: rate vs epsilon {star:.3?} (monotone {eps_monotone}, \
             star >= baseline {star_wins}), vs P_max {pr:.3?} (monotone {pmax_monotone}), \
             vs N {nr:.3?} (monotone {n_monotone}, diminishing {diminishing})"
        ),
    );
}

#[test]
fn criterion_10_reproducible_outputs() {
    let cfg_text = "master_seed = 31\n[sweep]\nvalues = [0.1, 0.2]\nchannel_seeds = 3\n\
                    multi_starts = 1\n[solver]\nepsilon_tol = 1e-3\nmax_outer = 40\n";
    let cfg = Config::from_str(cfg_text).unwrap();
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    let a = run_sweep(&cfg, d1.path()).unwrap();
    let b = run_sweep(&cfg, d2.path()).unwrap();
    let bytes_a = std::fs::read(&a.csv_path).unwrap();
    let bytes_b = std::fs::read(&b.csv_path).unwrap();
    let identical = bytes_a == bytes_b;
    let provenance = String::from_utf8_lossy(&bytes_a)
        .starts_with(&format!("# config_sha256={} master_seed=31", cfg.hash));
    let ok = identical && provenance;
    report(
        10,
        ok,
        &format!(
            "identical config and seed reproduce the CSV byte-for-byte ({identical}) with \
             embedded provenance ({provenance})"
        ),
    );
}
