//! Nelder-Mead simplex minimisation and a Levenberg-Marquardt least-squares solver.

use nalgebra::{DMatrix, DVector};

/// Options for [`nelder_mead`].
#[derive(Debug, Clone)]
pub struct NelderMeadOptions {
    /// Per-coordinate offset used to build the initial simplex.
    pub initial_step: Vec<f64>,
    pub max_evals: usize,
    /// Stop once the simplex spread in x (max-norm) falls below this...
    pub x_tol: f64,
    /// ...and the spread of function values falls below this.
    pub f_tol: f64,
    /// Dimension-dependent coefficients (Gao & Han), better above ~5 parameters.
    pub adaptive: bool,
}

impl NelderMeadOptions {
    pub fn new(dim: usize, step: f64) -> Self {
        Self {
            initial_step: vec![step; dim],
            max_evals: 2000 * dim.max(1),
            x_tol: 1e-10,
            f_tol: 1e-14,
            adaptive: dim > 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
    pub converged: bool,
}

/// Minimises `f` starting from `x0`.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], opts: &NelderMeadOptions) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    assert_eq!(opts.initial_step.len(), n, "initial_step length must match x0");
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    if n == 0 {
        let v = eval(x0, &mut evals);
        return Minimum { x: vec![], f: v, evals, converged: true };
    }

    let nf = n as f64;
    let (alpha, gamma, rho, sigma) = if opts.adaptive {
        (1.0, 1.0 + 2.0 / nf, 0.75 - 1.0 / (2.0 * nf), 1.0 - 1.0 / nf)
    } else {
        (1.0, 2.0, 0.5, 0.5)
    };

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += opts.initial_step[i];
        simplex.push(p);
    }
    let mut values: Vec<f64> = simplex.iter().map(|p| eval(p, &mut evals)).collect();

    let mut converged = false;
    while evals < opts.max_evals {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let f_spread = values[n] - values[0];
        let x_spread = simplex[1..]
            .iter()
            .flat_map(|p| p.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if x_spread <= opts.x_tol && f_spread.abs() <= opts.f_tol {
            converged = true;
            break;
        }

        let centroid: Vec<f64> = (0..n)
            .map(|k| simplex[..n].iter().map(|p| p[k]).sum::<f64>() / nf)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid.iter().zip(&simplex[n]).map(|(c, w)| c + t * (w - c)).collect()
        };

        let xr = along(-alpha);
        let fr = eval(&xr, &mut evals);
        if fr < values[0] {
            let xe = along(-alpha * gamma);
            let fe = eval(&xe, &mut evals);
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < values[n] {
            let xc = along(-alpha * rho);
            let fc = eval(&xc, &mut evals);
            (xc, fc)
        } else {
            let xc = along(rho);
            let fc = eval(&xc, &mut evals);
            (xc, fc)
        };
        if fc < fr.min(values[n]) {
            simplex[n] = xc;
            values[n] = fc;
            continue;
        }
        // shrink towards the best vertex
        let best = simplex[0].clone();
        for i in 1..=n {
            let p: Vec<f64> = best.iter().zip(&simplex[i]).map(|(b, x)| b + sigma * (x - b)).collect();
            values[i] = eval(&p, &mut evals);
            simplex[i] = p;
        }
    }

    let best = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap_or(0);
    Minimum { x: simplex[best].clone(), f: values[best], evals, converged }
}

/// Minimises `sum r_k(x)^2` with Levenberg-Marquardt steps and a
/// central-difference Jacobian. The returned `f` is the sum of squares.
pub fn levenberg_marquardt<F>(mut residuals: F, x0: &[f64], max_iter: usize) -> Minimum
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    let n = x0.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        DVector::from_vec(residuals(x))
    };
    let cost = |r: &DVector<f64>| {
        let c = r.norm_squared();
        if c.is_nan() {
            f64::INFINITY
        } else {
            c
        }
    };
    let mut x = x0.to_vec();
    let mut r = eval(&x, &mut evals);
    let mut f = cost(&r);
    let mut lambda = 1e-3;
    let mut converged = false;
    let h = 1e-7;
    for _ in 0..max_iter {
        let mut jac = DMatrix::<f64>::zeros(r.len(), n);
        for k in 0..n {
            let mut p = x.clone();
            p[k] += h;
            let up = eval(&p, &mut evals);
            p[k] -= 2.0 * h;
            let down = eval(&p, &mut evals);
            jac.set_column(k, &((up - down) / (2.0 * h)));
        }
        let jtj = jac.transpose() * &jac;
        let grad = jac.transpose() * &r;
        if grad.amax() < 1e-14 * (1.0 + f) {
            converged = true;
            break;
        }
        let mut stepped = false;
        while lambda < 1e12 {
            let mut a = jtj.clone();
            for k in 0..n {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            let Some(delta) = a.cholesky().map(|c| c.solve(&(-&grad))) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = x.iter().zip(delta.iter()).map(|(a, b)| a + b).collect();
            let rt = eval(&trial, &mut evals);
            let ft = cost(&rt);
            if ft < f {
                let small = delta.amax() < 1e-12 || f - ft < 1e-15 * f;
                x = trial;
                r = rt;
                f = ft;
                lambda = (lambda / 3.0).max(1e-12);
                stepped = true;
                converged = small;
                break;
            }
            lambda *= 4.0;
        }
        if !stepped || converged {
            converged = true;
            break;
        }
    }
    Minimum { x, f, evals, converged }
}
