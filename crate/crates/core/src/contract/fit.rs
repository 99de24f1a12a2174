//! Least-squares fit of `μ(z) = max(Az + B, C)^{1/ρ}`.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MirrleesFit {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub rho: f64,
    pub r2: f64,
}

/// `max(Az + B, C)^{1/ρ}`, with a negative base read as zero.
pub fn mirrlees_curve(z: f64, a: f64, b: f64, c: f64, rho: f64) -> f64 {
    (a * z + b).max(c).max(0.0).powf(1.0 / rho)
}

const RHO_MIN: f64 = 0.05;
const RHO_MAX: f64 = 50.0;

fn unpack(p: &[f64; 4]) -> (f64, f64, f64, f64) {
    (p[0], p[1], p[2], p[3].exp().clamp(RHO_MIN, RHO_MAX))
}

fn residuals(p: &[f64; 4], z: &[f64], y: &[f64]) -> Vec<f64> {
    let (a, b, c, rho) = unpack(p);
    z.iter().zip(y).map(|(z, y)| mirrlees_curve(*z, a, b, c, rho) - y).collect()
}

fn sse(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// Solves the 4×4 system `m x = v` by Gaussian elimination with pivoting.
fn solve4(mut m: [[f64; 4]; 4], mut v: [f64; 4]) -> Option<[f64; 4]> {
    for col in 0..4 {
        let pivot = (col..4).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[pivot][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, pivot);
        v.swap(col, pivot);
        for row in col + 1..4 {
            let f = m[row][col] / m[col][col];
            for k in col..4 {
                m[row][k] -= f * m[col][k];
            }
            v[row] -= f * v[col];
        }
    }
    let mut x = [0.0; 4];
    for row in (0..4).rev() {
        let tail: f64 = (row + 1..4).map(|k| m[row][k] * x[k]).sum();
        x[row] = (v[row] - tail) / m[row][row];
    }
    Some(x)
}

fn levenberg_marquardt(start: [f64; 4], z: &[f64], y: &[f64]) -> ([f64; 4], f64) {
    let mut p = start;
    let mut r = residuals(&p, z, y);
    let mut cost = sse(&r);
    let mut damping = 1e-3;
    for _ in 0..500 {
        let mut jac = vec![[0.0; 4]; z.len()];
        for k in 0..4 {
            let h = 1e-7 * p[k].abs().max(1e-3);
            let mut up = p;
            let mut down = p;
            up[k] += h;
            down[k] -= h;
            let ru = residuals(&up, z, y);
            let rd = residuals(&down, z, y);
            for i in 0..z.len() {
                jac[i][k] = (ru[i] - rd[i]) / (2.0 * h);
            }
        }
        let mut jtj = [[0.0; 4]; 4];
        let mut jtr = [0.0; 4];
        for (row, ri) in jac.iter().zip(&r) {
            for a in 0..4 {
                jtr[a] += row[a] * ri;
                for b in 0..4 {
                    jtj[a][b] += row[a] * row[b];
                }
            }
        }
        let mut improved = false;
        while damping < 1e12 {
            let mut m = jtj;
            for (d, row) in m.iter_mut().enumerate() {
                row[d] += damping * (jtj[d][d] + 1e-12);
            }
            let Some(step) = solve4(m, jtr.map(|v| -v)) else {
                damping *= 10.0;
                continue;
            };
            let trial = [p[0] + step[0], p[1] + step[1], p[2] + step[2], p[3] + step[3]];
            let rt = residuals(&trial, z, y);
            let ct = sse(&rt);
            if ct.is_finite() && ct < cost {
                let gain = cost - ct;
                p = trial;
                r = rt;
                cost = ct;
                damping = (damping / 3.0).max(1e-15);
                improved = gain > 1e-30 && gain > 1e-15 * cost;
                break;
            }
            damping *= 4.0;
        }
        if !improved || cost < 1e-28 {
            break;
        }
    }
    (p, cost)
}

fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return (0.0, my);
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    (sxy / sxx, my - sxy / sxx * mx)
}

/// Fits `(A, B, C, ρ)` to `(z, μ)` by multi-start Levenberg–Marquardt.
///
/// Flat data returns `A = 0` and `r² = 1`.
pub fn fit_mirrlees(z: &[f64], mu: &[f64]) -> Result<MirrleesFit> {
    check_len("mirrlees fit", z.len(), mu.len())?;
    if z.len() < 4 {
        return Err(Error::InvalidConfig("mirrlees fit needs at least 4 points".into()));
    }
    if z.iter().chain(mu).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("mirrlees fit data"));
    }
    let n = mu.len() as f64;
    let mean = mu.iter().sum::<f64>() / n;
    let ss_tot: f64 = mu.iter().map(|v| (v - mean).powi(2)).sum();
    if ss_tot < 1e-20 {
        return Ok(MirrleesFit {
            a: 0.0,
            b: mean.max(0.0),
            c: mean.max(0.0),
            rho: 1.0,
            r2: 1.0,
        });
    }
    let mut order: Vec<usize> = (0..z.len()).collect();
    order.sort_by(|&i, &j| z[i].total_cmp(&z[j]));
    let mut best: Option<([f64; 4], f64)> = None;
    for rho0 in [0.5, 1.0, 1.5, 2.0, 3.0, 5.0] {
        let t: Vec<f64> = mu.iter().map(|m| m.max(0.0).powf(rho0)).collect();
        // Kink candidates: C binds below the k-th smallest z.
        for k in 0..z.len().saturating_sub(2) {
            let tail: Vec<usize> = order[k..].to_vec();
            let xs: Vec<f64> = tail.iter().map(|&i| z[i]).collect();
            let ys: Vec<f64> = tail.iter().map(|&i| t[i]).collect();
            let (a, b) = linear_fit(&xs, &ys);
            let c = if k == 0 {
                t.iter().copied().fold(f64::INFINITY, f64::min) - 1.0
            } else {
                order[..k].iter().map(|&i| t[i]).sum::<f64>() / k as f64
            };
            let (p, cost) = levenberg_marquardt([a, b, c, f64::ln(rho0)], z, mu);
            if best.as_ref().is_none_or(|(_, bc)| cost < *bc) {
                best = Some((p, cost));
            }
        }
    }
    let (p, cost) = best.expect("at least one start");
    let (a, b, c, rho) = unpack(&p);
    Ok(MirrleesFit {
        a,
        b,
        c,
        rho,
        r2: 1.0 - cost / ss_tot,
    })
}
