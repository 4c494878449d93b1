//! Derivative-free simplex search, a BFGS polish step and a central
//! difference Hessian, all on plain `f64` vectors.

/// Outcome of one local minimization.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalMin {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;
const MAX_RESTARTS: usize = 6;

fn eval(f: &impl Fn(&[f64]) -> f64, x: &[f64]) -> f64 {
    let v = f(x);
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

/// One Nelder–Mead run from an axis-aligned simplex with edge `step`.
fn simplex_run(f: &impl Fn(&[f64]) -> f64, x0: &[f64], step: f64, max_iter: usize, tol: f64) -> LocalMin {
    let n = x0.len();
    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    pts.push(x0.to_vec());
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += step;
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| eval(f, p)).collect();
    let mut order: Vec<usize> = (0..=n).collect();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        let best = vals[order[0]];
        let worst = vals[order[n]];
        if best.is_finite() && worst - best <= tol * (1.0 + best.abs()) {
            converged = true;
            break;
        }
        iterations += 1;
        let mut centroid = vec![0.0; n];
        for &i in &order[..n] {
            for (c, v) in centroid.iter_mut().zip(&pts[i]) {
                *c += v / n as f64;
            }
        }
        let w = order[n];
        let along = |t: f64| -> Vec<f64> { centroid.iter().zip(&pts[w]).map(|(c, x)| c + t * (c - x)).collect() };
        let xr = along(REFLECT);
        let fr = eval(f, &xr);
        let second_worst = vals[order[n - 1]];
        if fr < best {
            let xe = along(REFLECT * EXPAND);
            let fe = eval(f, &xe);
            if fe < fr {
                pts[w] = xe;
                vals[w] = fe;
            } else {
                pts[w] = xr;
                vals[w] = fr;
            }
        } else if fr < second_worst {
            pts[w] = xr;
            vals[w] = fr;
        } else {
            let (xc, fc) = if fr < worst {
                let xc = along(REFLECT * CONTRACT);
                let fc = eval(f, &xc);
                (xc, fc)
            } else {
                let xc = along(-CONTRACT);
                let fc = eval(f, &xc);
                (xc, fc)
            };
            if fc < worst.min(fr) {
                pts[w] = xc;
                vals[w] = fc;
            } else {
                let b = order[0];
                let xb = pts[b].clone();
                for &i in &order[1..] {
                    for (p, q) in pts[i].iter_mut().zip(&xb) {
                        *p = q + SHRINK * (*p - q);
                    }
                    vals[i] = eval(f, &pts[i]);
                }
            }
        }
    }
    let b = (0..=n).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
    LocalMin {
        x: pts[b].clone(),
        value: vals[b],
        iterations,
        converged,
    }
}

/// Nelder–Mead with restarts from the best vertex until a restart no longer
/// improves the objective by more than `tol` (relative).
pub fn nelder_mead(f: impl Fn(&[f64]) -> f64, x0: &[f64], step: f64, max_iter: usize, tol: f64) -> LocalMin {
    let mut cur = simplex_run(&f, x0, step, max_iter, tol);
    let mut used = cur.iterations;
    let mut restart_step = step * 0.5;
    for _ in 0..MAX_RESTARTS {
        if used >= max_iter || !cur.value.is_finite() {
            break;
        }
        let next = simplex_run(&f, &cur.x, restart_step, max_iter - used, tol);
        used += next.iterations;
        let improved = cur.value - next.value > tol * (1.0 + cur.value.abs());
        let converged = next.converged;
        if next.value < cur.value {
            cur = next;
        }
        cur.converged = converged;
        if !improved {
            break;
        }
        restart_step *= 0.5;
    }
    cur.iterations = used;
    cur
}

/// BFGS with backtracking line search. Returns the start point unchanged if
/// no step decreases `f`.
pub fn bfgs_polish(
    f: impl Fn(&[f64]) -> f64,
    grad: impl Fn(&[f64]) -> Option<Vec<f64>>,
    x0: &[f64],
    max_iter: usize,
    gtol: f64,
) -> LocalMin {
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut fx = eval(&f, &x);
    let Some(mut g) = grad(&x) else {
        return LocalMin {
            x,
            value: fx,
            iterations: 0,
            converged: false,
        };
    };
    let mut hinv: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| u * v).sum::<f64>();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        if dot(&g, &g).sqrt() <= gtol {
            converged = true;
            break;
        }
        iterations += 1;
        let mut d: Vec<f64> = (0..n).map(|i| -dot(&hinv[i], &g)).collect();
        let mut slope = dot(&d, &g);
        if slope >= 0.0 {
            // not a descent direction: reset to steepest descent
            for (i, row) in hinv.iter_mut().enumerate() {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = if i == j { 1.0 } else { 0.0 };
                }
            }
            d = g.iter().map(|v| -v).collect();
            slope = dot(&d, &g);
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let xn: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + t * b).collect();
            let fxn = eval(&f, &xn);
            if fxn <= fx + 1e-4 * t * slope {
                accepted = Some((xn, fxn));
                break;
            }
            t *= 0.5;
        }
        let Some((xn, fxn)) = accepted else { break };
        let Some(gn) = grad(&xn) else { break };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            let hy: Vec<f64> = (0..n).map(|i| dot(&hinv[i], &y)).collect();
            let yhy = dot(&y, &hy);
            let rho = 1.0 / sy;
            for i in 0..n {
                for j in 0..n {
                    hinv[i][j] += (1.0 + rho * yhy) * rho * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
                }
            }
        }
        let small_change = (fx - fxn).abs() <= 1e-15 * (1.0 + fx.abs());
        x = xn;
        fx = fxn;
        g = gn;
        if small_change {
            converged = dot(&g, &g).sqrt() <= gtol;
            break;
        }
    }
    LocalMin {
        x,
        value: fx,
        iterations,
        converged,
    }
}

/// Central-difference Hessian with step `rel_step * (1 + |x_i|)` per coordinate.
pub fn numerical_hessian(f: impl Fn(&[f64]) -> f64, x: &[f64], rel_step: f64) -> Vec<Vec<f64>> {
    let n = x.len();
    let h: Vec<f64> = x.iter().map(|v| rel_step * (1.0 + v.abs())).collect();
    let f0 = f(x);
    let mut out = vec![vec![0.0; n]; n];
    let mut p = x.to_vec();
    for i in 0..n {
        p[i] = x[i] + h[i];
        let fp = f(&p);
        p[i] = x[i] - h[i];
        let fm = f(&p);
        p[i] = x[i];
        out[i][i] = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
        for j in 0..i {
            let mut corner = |si: f64, sj: f64| {
                p[i] = x[i] + si * h[i];
                p[j] = x[j] + sj * h[j];
                let v = f(&p);
                p[i] = x[i];
                p[j] = x[j];
                v
            };
            let v =
                (corner(1.0, 1.0) - corner(1.0, -1.0) - corner(-1.0, 1.0) + corner(-1.0, -1.0)) / (4.0 * h[i] * h[j]);
            out[i][j] = v;
            out[j][i] = v;
        }
    }
    out
}

/// Inverse of a symmetric positive definite matrix through its Cholesky
/// factor; `None` if the matrix is not positive definite.
pub fn spd_inverse(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = a[i][i] - s;
                if !(d > 0.0) || !d.is_finite() {
                    return None;
                }
                l[i][j] = d.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    // solve L L^T X = I column by column
    let mut inv = vec![vec![0.0; n]; n];
    for c in 0..n {
        let mut y = vec![0.0; n];
        for i in 0..n {
            let rhs = if i == c { 1.0 } else { 0.0 };
            let s: f64 = (0..i).map(|k| l[i][k] * y[k]).sum();
            y[i] = (rhs - s) / l[i][i];
        }
        let mut xcol = vec![0.0; n];
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|k| l[k][i] * xcol[k]).sum();
            xcol[i] = (y[i] - s) / l[i][i];
        }
        for i in 0..n {
            inv[i][c] = xcol[i];
        }
    }
    Some(inv)
}
