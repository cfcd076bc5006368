//! Primal-dual interior-point solver for the separable MMA subproblem
//!
//! ```text
//! min  sum_j p0_j/(U_j - x_j) + q0_j/(x_j - L_j) + a0 z + sum_i (c_i y_i + d_i y_i^2 / 2)
//! s.t. sum_j p_ij/(U_j - x_j) + q_ij/(x_j - L_j) - a_i z - y_i <= b_i
//!      alfa <= x <= beta,  y >= 0,  z >= 0.
//! ```
//!
//! Only the diagonal structure of the separable approximation is used: the
//! Newton system is condensed to a dense `(m+1) x (m+1)` solve in the
//! constraint multipliers, never forming an `n x n` matrix.

use crate::{Error, Result};

/// Subproblem data. `p`/`q` hold `m + 1` rows of length `n`; row 0 is the
/// objective.
pub(crate) struct Subproblem<'a> {
    pub low: &'a [f64],
    pub upp: &'a [f64],
    pub alfa: &'a [f64],
    pub beta: &'a [f64],
    pub p: &'a [Vec<f64>],
    pub q: &'a [Vec<f64>],
    pub b: &'a [f64],
    pub a0: f64,
    pub a: &'a [f64],
    pub c: &'a [f64],
    pub d: &'a [f64],
}

pub(crate) struct SubSolution {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: f64,
    pub lam: Vec<f64>,
    /// Multipliers of the lower/upper box constraints on `x`.
    pub xsi: Vec<f64>,
    pub eta: Vec<f64>,
    /// Max-norm KKT residual at the final barrier level.
    pub residual: f64,
}

#[derive(Clone)]
struct Point {
    x: Vec<f64>,
    y: Vec<f64>,
    z: f64,
    lam: Vec<f64>,
    xsi: Vec<f64>,
    eta: Vec<f64>,
    mu: Vec<f64>,
    zet: f64,
    s: Vec<f64>,
}

/// Residual of the `epsi`-perturbed KKT system; returns (2-norm, max-norm).
fn residuals(sub: &Subproblem, pt: &Point, epsi: f64) -> (f64, f64) {
    let n = pt.x.len();
    let m = pt.y.len();
    let mut sq = 0.0;
    let mut mx: f64 = 0.0;
    let mut push = |r: f64| {
        sq += r * r;
        mx = mx.max(r.abs());
    };

    let mut gvec = vec![0.0; m];
    for j in 0..n {
        let ux = sub.upp[j] - pt.x[j];
        let xl = pt.x[j] - sub.low[j];
        let ux2 = ux * ux;
        let xl2 = xl * xl;
        let mut plam = sub.p[0][j];
        let mut qlam = sub.q[0][j];
        for i in 0..m {
            plam += pt.lam[i] * sub.p[i + 1][j];
            qlam += pt.lam[i] * sub.q[i + 1][j];
            gvec[i] += sub.p[i + 1][j] / ux + sub.q[i + 1][j] / xl;
        }
        // stationarity in x
        push(plam / ux2 - qlam / xl2 - pt.xsi[j] + pt.eta[j]);
        // complementarity of the box multipliers
        push(pt.xsi[j] * (pt.x[j] - sub.alfa[j]) - epsi);
        push(pt.eta[j] * (sub.beta[j] - pt.x[j]) - epsi);
    }
    let mut azl = 0.0;
    for i in 0..m {
        azl += sub.a[i] * pt.lam[i];
        push(sub.c[i] + sub.d[i] * pt.y[i] - pt.mu[i] - pt.lam[i]);
        push(gvec[i] - sub.a[i] * pt.z - pt.y[i] + pt.s[i] - sub.b[i]);
        push(pt.mu[i] * pt.y[i] - epsi);
        push(pt.lam[i] * pt.s[i] - epsi);
    }
    push(sub.a0 - pt.zet - azl);
    push(pt.zet * pt.z - epsi);
    (sq.sqrt(), mx)
}

/// Gaussian elimination with partial pivoting; `mat` is row-major `k x k`.
fn dense_solve(mat: &mut [f64], rhs: &mut [f64]) -> Result<()> {
    let k = rhs.len();
    for col in 0..k {
        let (pivot, pval) = (col..k)
            .map(|r| (r, mat[r * k + col].abs()))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        if pval == 0.0 {
            return Err(Error::Solver("singular Newton system in the subproblem".into()));
        }
        if pivot != col {
            for j in 0..k {
                mat.swap(col * k + j, pivot * k + j);
            }
            rhs.swap(col, pivot);
        }
        let diag = mat[col * k + col];
        for r in col + 1..k {
            let factor = mat[r * k + col] / diag;
            if factor == 0.0 {
                continue;
            }
            for j in col..k {
                mat[r * k + j] -= factor * mat[col * k + j];
            }
            rhs[r] -= factor * rhs[col];
        }
    }
    for col in (0..k).rev() {
        let mut v = rhs[col];
        for j in col + 1..k {
            v -= mat[col * k + j] * rhs[j];
        }
        rhs[col] = v / mat[col * k + col];
    }
    Ok(())
}

pub(crate) fn solve(sub: &Subproblem, epsi_final: f64, max_newton: usize) -> Result<SubSolution> {
    let n = sub.alfa.len();
    let m = sub.b.len();

    let mut pt = Point {
        x: (0..n).map(|j| 0.5 * (sub.alfa[j] + sub.beta[j])).collect(),
        y: vec![1.0; m],
        z: 1.0,
        lam: vec![1.0; m],
        xsi: (0..n)
            .map(|j| (1.0f64).max(1.0 / (0.5 * (sub.beta[j] - sub.alfa[j]))))
            .collect(),
        eta: (0..n)
            .map(|j| (1.0f64).max(1.0 / (0.5 * (sub.beta[j] - sub.alfa[j]))))
            .collect(),
        mu: sub.c.iter().map(|&ci| (1.0f64).max(0.5 * ci)).collect(),
        zet: 1.0,
        s: vec![1.0; m],
    };

    let mut epsi = 1.0;
    let mut residual = f64::INFINITY;
    while epsi > 0.9 * epsi_final {
        let (mut resnorm, mut resmax) = residuals(sub, &pt, epsi);
        let mut newton = 0;
        while resmax > 0.9 * epsi {
            newton += 1;
            if newton > max_newton {
                // Barely-curved subproblems can make damped Newton creep;
                // keep the best point reached at this barrier level and let
                // the continuation tighten it further (the final residual is
                // reported to the caller).
                break;
            }

            // Separable pieces of the condensed Newton system.
            let mut plam = vec![0.0; n];
            let mut qlam = vec![0.0; n];
            let mut gvec = vec![0.0; m];
            for j in 0..n {
                plam[j] = sub.p[0][j];
                qlam[j] = sub.q[0][j];
                let ux = sub.upp[j] - pt.x[j];
                let xl = pt.x[j] - sub.low[j];
                for i in 0..m {
                    plam[j] += pt.lam[i] * sub.p[i + 1][j];
                    qlam[j] += pt.lam[i] * sub.q[i + 1][j];
                    gvec[i] += sub.p[i + 1][j] / ux + sub.q[i + 1][j] / xl;
                }
            }
            let mut delx = vec![0.0; n];
            let mut diagx = vec![0.0; n];
            for j in 0..n {
                let ux = sub.upp[j] - pt.x[j];
                let xl = pt.x[j] - sub.low[j];
                let (ux2, xl2) = (ux * ux, xl * xl);
                delx[j] = plam[j] / ux2 - qlam[j] / xl2 - epsi / (pt.x[j] - sub.alfa[j])
                    + epsi / (sub.beta[j] - pt.x[j]);
                diagx[j] = 2.0 * (plam[j] / (ux2 * ux) + qlam[j] / (xl2 * xl))
                    + pt.xsi[j] / (pt.x[j] - sub.alfa[j])
                    + pt.eta[j] / (sub.beta[j] - pt.x[j]);
            }
            let gg = |i: usize, j: usize| -> f64 {
                let ux = sub.upp[j] - pt.x[j];
                let xl = pt.x[j] - sub.low[j];
                sub.p[i + 1][j] / (ux * ux) - sub.q[i + 1][j] / (xl * xl)
            };
            let dely: Vec<f64> = (0..m)
                .map(|i| sub.c[i] + sub.d[i] * pt.y[i] - pt.lam[i] - epsi / pt.y[i])
                .collect();
            let delz =
                sub.a0 - sub.a.iter().zip(&pt.lam).map(|(ai, li)| ai * li).sum::<f64>() - epsi / pt.z;
            let dellam: Vec<f64> = (0..m)
                .map(|i| gvec[i] - sub.a[i] * pt.z - pt.y[i] - sub.b[i] + epsi / pt.lam[i])
                .collect();
            let diagy: Vec<f64> = (0..m).map(|i| sub.d[i] + pt.mu[i] / pt.y[i]).collect();
            let diaglamyi: Vec<f64> =
                (0..m).map(|i| pt.s[i] / pt.lam[i] + 1.0 / diagy[i]).collect();

            // (m+1) x (m+1) condensed system in (dlam, dz).
            let k = m + 1;
            let mut mat = vec![0.0; k * k];
            let mut rhs = vec![0.0; k];
            for i in 0..m {
                for ii in 0..m {
                    let mut v = if i == ii { diaglamyi[i] } else { 0.0 };
                    for j in 0..n {
                        v += gg(i, j) * gg(ii, j) / diagx[j];
                    }
                    mat[i * k + ii] = v;
                }
                mat[i * k + m] = sub.a[i];
                mat[m * k + i] = sub.a[i];
                let mut blam = dellam[i] + dely[i] / diagy[i];
                for j in 0..n {
                    blam -= gg(i, j) * delx[j] / diagx[j];
                }
                rhs[i] = blam;
            }
            mat[m * k + m] = -pt.zet / pt.z;
            rhs[m] = delz;
            dense_solve(&mut mat, &mut rhs)?;
            let dz = rhs[m];
            let dlam = &rhs[..m];

            let mut dx = vec![0.0; n];
            for j in 0..n {
                let mut v = -delx[j];
                for i in 0..m {
                    v -= gg(i, j) * dlam[i];
                }
                dx[j] = v / diagx[j];
            }
            let dy: Vec<f64> = (0..m).map(|i| (-dely[i] + dlam[i]) / diagy[i]).collect();
            let dxsi: Vec<f64> = (0..n)
                .map(|j| -pt.xsi[j] + (epsi - pt.xsi[j] * dx[j]) / (pt.x[j] - sub.alfa[j]))
                .collect();
            let deta: Vec<f64> = (0..n)
                .map(|j| -pt.eta[j] + (epsi + pt.eta[j] * dx[j]) / (sub.beta[j] - pt.x[j]))
                .collect();
            let dmu: Vec<f64> =
                (0..m).map(|i| -pt.mu[i] + (epsi - pt.mu[i] * dy[i]) / pt.y[i]).collect();
            let dzet = -pt.zet + (epsi - pt.zet * dz) / pt.z;
            let ds: Vec<f64> =
                (0..m).map(|i| -pt.s[i] + (epsi - pt.s[i] * dlam[i]) / pt.lam[i]).collect();

            // Fraction-to-boundary step length.
            let mut ratio: f64 = 1.0;
            let mut cap = |d: f64, w: f64| {
                ratio = ratio.max(-1.01 * d / w);
            };
            for i in 0..m {
                cap(dy[i], pt.y[i]);
                cap(dlam[i], pt.lam[i]);
                cap(dmu[i], pt.mu[i]);
                cap(ds[i], pt.s[i]);
            }
            cap(dz, pt.z);
            cap(dzet, pt.zet);
            for j in 0..n {
                cap(dxsi[j], pt.xsi[j]);
                cap(deta[j], pt.eta[j]);
                cap(dx[j], pt.x[j] - sub.alfa[j]);
                cap(-dx[j], sub.beta[j] - pt.x[j]);
            }
            let mut steg = 1.0 / ratio;

            // Backtrack until the residual norm decreases.
            let old = pt.clone();
            let mut accepted = false;
            for _ in 0..50 {
                for j in 0..n {
                    pt.x[j] = old.x[j] + steg * dx[j];
                    pt.xsi[j] = old.xsi[j] + steg * dxsi[j];
                    pt.eta[j] = old.eta[j] + steg * deta[j];
                }
                for i in 0..m {
                    pt.y[i] = old.y[i] + steg * dy[i];
                    pt.lam[i] = old.lam[i] + steg * dlam[i];
                    pt.mu[i] = old.mu[i] + steg * dmu[i];
                    pt.s[i] = old.s[i] + steg * ds[i];
                }
                pt.z = old.z + steg * dz;
                pt.zet = old.zet + steg * dzet;
                let (rn, rm) = residuals(sub, &pt, epsi);
                if rn < resnorm {
                    resnorm = rn;
                    resmax = rm;
                    accepted = true;
                    break;
                }
                steg *= 0.5;
            }
            if !accepted {
                // No decrease even at a vanishing step: numerical floor for
                // this barrier level; keep the incumbent and anneal on.
                pt = old;
                break;
            }
        }
        residual = resmax;
        epsi *= 0.1;
    }

    Ok(SubSolution {
        x: pt.x,
        y: pt.y,
        z: pt.z,
        lam: pt.lam,
        xsi: pt.xsi,
        eta: pt.eta,
        residual,
    })
}
