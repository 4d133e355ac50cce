//! Deterministic parameter search used by the base forecasters.

use crate::scalar::Real;

/// Relative slack under which two objective values count as tied.
const TIE_TOLERANCE: f64 = 1e-10;

/// Smoothing-parameter grid `0.01, 0.02, ..., 0.99`.
pub fn unit_grid<T: Real>() -> impl Iterator<Item = T> + Clone {
    (1..=99).map(|i| T::from_usize_(i) / T::from_usize_(100))
}

/// Returns the first candidate whose objective is within a relative tie
/// tolerance of the minimum, together with that objective value.
///
/// Picking the first near-minimum keeps the choice stable when the objective
/// is rescaled, which exact `<` comparison would not under round-off.
pub fn argmin_first<T: Real, P: Clone>(
    candidates: impl IntoIterator<Item = P>,
    mut objective: impl FnMut(&P) -> T,
) -> Option<(P, T)> {
    let scored: Vec<(P, T)> = candidates
        .into_iter()
        .map(|p| {
            let v = objective(&p);
            (p, v)
        })
        .filter(|(_, v)| v.is_finite())
        .collect();
    let min = scored
        .iter()
        .map(|(_, v)| *v)
        .fold(T::infinity(), |a, b| a.min(b));
    if !min.is_finite() {
        return None;
    }
    let slack = min.abs() * T::lit(TIE_TOLERANCE);
    scored.into_iter().find(|(_, v)| *v <= min + slack)
}

/// Nelder–Mead simplex minimisation from `start`, with `steps[i]` the
/// initial simplex offset along coordinate `i`.
///
/// Points where the objective is not finite are treated as `+inf`, which is
/// how callers encode box or stationarity constraints.
pub fn nelder_mead<T: Real>(
    start: &[T],
    steps: &[T],
    max_evals: usize,
    tol: T,
    mut f: impl FnMut(&[T]) -> T,
) -> (Vec<T>, T) {
    let n = start.len();
    let mut eval = |x: &[T]| {
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            T::infinity()
        }
    };
    if n == 0 {
        let v = eval(start);
        return (Vec::new(), v);
    }
    let mut simplex: Vec<Vec<T>> = Vec::with_capacity(n + 1);
    simplex.push(start.to_vec());
    for i in 0..n {
        let mut p = start.to_vec();
        p[i] += steps[i];
        simplex.push(p);
    }
    let mut values: Vec<T> = simplex.iter().map(|p| eval(p)).collect();
    let mut evals = n + 1;

    let (alpha, gamma, rho, sigma) = (T::one(), T::lit(2.0), T::lit(0.5), T::lit(0.5));
    while evals < max_evals {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| {
            values[a]
                .partial_cmp(&values[b])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let best = values[0];
        let worst = values[n];
        if worst.is_finite() && (worst - best).abs() <= tol * (T::one() + best.abs()) {
            break;
        }

        let mut centroid = vec![T::zero(); n];
        for p in &simplex[..n] {
            for (c, &x) in centroid.iter_mut().zip(p) {
                *c += x;
            }
        }
        for c in &mut centroid {
            *c /= T::from_usize_(n);
        }
        let toward = |coef: T, from: &[T]| -> Vec<T> {
            centroid
                .iter()
                .zip(from)
                .map(|(&c, &w)| c + coef * (c - w))
                .collect()
        };

        let reflected = toward(alpha, &simplex[n]);
        let fr = eval(&reflected);
        evals += 1;
        if fr < values[0] {
            let expanded = toward(gamma, &simplex[n]);
            let fe = eval(&expanded);
            evals += 1;
            if fe < fr {
                simplex[n] = expanded;
                values[n] = fe;
            } else {
                simplex[n] = reflected;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n] = reflected;
            values[n] = fr;
            continue;
        }
        let contracted = if fr < values[n] {
            toward(rho, &simplex[n])
        } else {
            toward(-rho, &simplex[n])
        };
        let fc = eval(&contracted);
        evals += 1;
        if fc < values[n].min(fr) {
            simplex[n] = contracted;
            values[n] = fc;
            continue;
        }
        let anchor = simplex[0].clone();
        for i in 1..=n {
            for (x, &a) in simplex[i].iter_mut().zip(&anchor) {
                *x = a + sigma * (*x - a);
            }
            values[i] = eval(&simplex[i]);
            evals += 1;
        }
    }
    let best = (0..=n)
        .min_by(|&a, &b| {
            values[a]
                .partial_cmp(&values[b])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        })
        .unwrap_or(0);
    (simplex[best].clone(), values[best])
}
