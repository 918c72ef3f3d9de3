//! Derivative-free minimization (Nelder–Mead simplex).

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Optimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub converged: bool,
    pub iterations: usize,
    pub evaluations: usize,
}

/// Nelder–Mead settings. Convergence requires both the simplex diameter
/// (max-norm distance of every vertex from the best one) and the spread of
/// objective values to fall below their tolerances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMead {
    pub xtol: f64,
    pub ftol: f64,
    pub max_iter: usize,
    /// Number of times the search is restarted from the incumbent with a
    /// fresh simplex after the first run stops.
    pub restarts: usize,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self {
            xtol: 1e-10,
            ftol: 1e-10,
            max_iter: 5000,
            restarts: 0,
        }
    }
}

/// Minimize `f` from `x0` with default coefficients.
pub fn nelder_mead<F>(f: F, x0: &[f64], tolerance: f64, max_iter: usize) -> Result<Optimum>
where
    F: FnMut(&[f64]) -> f64,
{
    NelderMead {
        xtol: tolerance,
        ftol: tolerance,
        max_iter,
        restarts: 0,
    }
    .minimize(f, x0)
}

impl NelderMead {
    pub fn minimize<F>(&self, mut f: F, x0: &[f64]) -> Result<Optimum>
    where
        F: FnMut(&[f64]) -> f64,
    {
        let mut best = self.run(&mut f, x0)?;
        for _ in 0..self.restarts {
            let next = self.run(&mut f, &best.x)?;
            let iterations = best.iterations + next.iterations;
            let evaluations = best.evaluations + next.evaluations;
            if next.f <= best.f {
                best = next;
            } else {
                best.converged = next.converged;
            }
            best.iterations = iterations;
            best.evaluations = evaluations;
        }
        Ok(best)
    }

    fn run<F>(&self, f: &mut F, x0: &[f64]) -> Result<Optimum>
    where
        F: FnMut(&[f64]) -> f64,
    {
        let n = x0.len();
        let f0 = f(x0);
        if !f0.is_finite() {
            return Err(Error::NonFiniteStart);
        }
        let mut evaluations = 1;
        let mut eval = |x: &[f64], evals: &mut usize| {
            *evals += 1;
            let v = f(x);
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        };

        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
        simplex.push((x0.to_vec(), f0));
        for i in 0..n {
            let mut x = x0.to_vec();
            x[i] += if x[i] != 0.0 { 0.05 * x[i].abs().max(0.1) } else { 0.05 };
            let fx = eval(&x, &mut evaluations);
            simplex.push((x, fx));
        }

        let mut iterations = 0;
        let mut converged = false;
        loop {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            if self.has_converged(&simplex) {
                converged = true;
                break;
            }
            if iterations >= self.max_iter {
                break;
            }
            iterations += 1;

            let centroid: Vec<f64> = (0..n)
                .map(|j| simplex[..n].iter().map(|(x, _)| x[j]).sum::<f64>() / n as f64)
                .collect();
            let worst = simplex[n].clone();
            let along = |t: f64| -> Vec<f64> { centroid.iter().zip(&worst.0).map(|(c, w)| c + t * (c - w)).collect() };

            let xr = along(1.0);
            let fr = eval(&xr, &mut evaluations);
            if fr < simplex[0].1 {
                let xe = along(2.0);
                let fe = eval(&xe, &mut evaluations);
                simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
                continue;
            }
            if fr < simplex[n - 1].1 {
                simplex[n] = (xr, fr);
                continue;
            }
            // contraction: outside if the reflected point beats the worst vertex
            let (xc, fc) = if fr < worst.1 {
                let xc = along(0.5);
                let fc = eval(&xc, &mut evaluations);
                (xc, fc)
            } else {
                let xc = along(-0.5);
                let fc = eval(&xc, &mut evaluations);
                (xc, fc)
            };
            if fc < fr.min(worst.1) {
                simplex[n] = (xc, fc);
                continue;
            }
            // shrink toward the best vertex
            let best = simplex[0].0.clone();
            for vertex in simplex.iter_mut().skip(1) {
                let x: Vec<f64> = best.iter().zip(&vertex.0).map(|(b, v)| b + 0.5 * (v - b)).collect();
                let fx = eval(&x, &mut evaluations);
                *vertex = (x, fx);
            }
        }

        let (x, f) = simplex.swap_remove(0);
        Ok(Optimum {
            x,
            f,
            converged,
            iterations,
            evaluations,
        })
    }

    fn has_converged(&self, simplex: &[(Vec<f64>, f64)]) -> bool {
        let (best, fbest) = (&simplex[0].0, simplex[0].1);
        let fspread = simplex.iter().map(|(_, fx)| (fx - fbest).abs()).fold(0.0, f64::max);
        let diameter = simplex
            .iter()
            .flat_map(|(x, _)| x.iter().zip(best).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        fspread <= self.ftol && diameter <= self.xtol
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> f64 {
        100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2)
    }

    #[test]
    fn sphere_converges_to_origin() {
        let opt = nelder_mead(|x| x.iter().map(|v| v * v).sum(), &[1.0, 1.0, 1.0], 1e-10, 5000).unwrap();
        assert!(opt.converged);
        assert!(opt.x.iter().all(|v| v.abs() < 1e-6), "{:?}", opt.x);
    }

    #[test]
    fn rosenbrock_from_standard_start() {
        let opt = nelder_mead(rosenbrock, &[-1.2, 1.0], 1e-10, 5000).unwrap();
        assert!(opt.converged);
        assert!(opt.f < 1e-8, "f* = {}", opt.f);
        assert!((opt.x[0] - 1.0).abs() < 1e-4 && (opt.x[1] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn restart_from_optimum_is_idempotent() {
        let first = nelder_mead(rosenbrock, &[-1.2, 1.0], 1e-10, 5000).unwrap();
        let second = nelder_mead(rosenbrock, &first.x, 1e-10, 5000).unwrap();
        assert!((second.f - first.f).abs() < 1e-10);
    }

    #[test]
    fn non_convergence_returns_best_so_far() {
        let opt = nelder_mead(rosenbrock, &[-1.2, 1.0], 1e-10, 10).unwrap();
        assert!(!opt.converged);
        assert!(opt.f <= rosenbrock(&[-1.2, 1.0]));
    }

    #[test]
    fn nan_at_start_is_an_error() {
        assert_eq!(
            nelder_mead(|_| f64::NAN, &[0.0], 1e-10, 100),
            Err(Error::NonFiniteStart)
        );
    }

    #[test]
    fn restarts_accumulate_counts() {
        let nm = NelderMead {
            restarts: 1,
            ..Default::default()
        };
        let opt = nm.minimize(rosenbrock, &[-1.2, 1.0]).unwrap();
        assert!(opt.converged);
        assert!(opt.f < 1e-8);
    }
}
