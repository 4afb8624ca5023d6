//! Independent numerical oracles: adaptive quadrature for divergences and a
//! brute-force assignment enumerator.
//!
//! Everything here deliberately avoids the closed forms and solvers used on
//! the production path, so tests and the `verify` command can check one
//! route against the other.

/// Adaptive Simpson quadrature.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
    }
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (left, lm, flm) = simpson(f, a, fa, m, fm);
        let (right, rm, frm) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, fa, m, fm, left, lm, flm, tol / 2.0, depth - 1)
                + recurse(f, m, fm, b, fb, right, rm, frm, tol / 2.0, depth - 1)
        }
    }
    let fa = f(a);
    let fb = f(b);
    let (whole, m, fm) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, whole, m, fm, tol, 40)
}

fn gaussian_pdf(x: f64, mean: f64, variance: f64) -> f64 {
    let d = x - mean;
    (-d * d / (2.0 * variance)).exp() / (2.0 * std::f64::consts::PI * variance).sqrt()
}

/// KL divergence between two Gaussian densities by direct integration of
/// `p ln(p/q)` over ±12 sigma of `p`'s support (the factor `p` kills the
/// integrand everywhere else). Split at the mean so the adaptive rule cannot
/// skip over the peak.
pub fn kl_gaussian_quadrature(mean_a: f64, var_a: f64, mean_b: f64, var_b: f64) -> f64 {
    let sd_a = var_a.sqrt();
    let lo = mean_a - 12.0 * sd_a;
    let hi = mean_a + 12.0 * sd_a;
    let f = |x: f64| {
        let p = gaussian_pdf(x, mean_a, var_a);
        if p <= 0.0 {
            return 0.0;
        }
        // ln(p/q) expanded analytically to avoid 0/0 in the far tails.
        let log_p = -((x - mean_a).powi(2)) / (2.0 * var_a) - 0.5 * (2.0 * std::f64::consts::PI * var_a).ln();
        let log_q = -((x - mean_b).powi(2)) / (2.0 * var_b) - 0.5 * (2.0 * std::f64::consts::PI * var_b).ln();
        p * (log_p - log_q)
    };
    integrate(&f, lo, mean_a, 1e-10) + integrate(&f, mean_a, hi, 1e-10)
}

/// Jensen-Shannon divergence (nats) against the exact equal-weight mixture,
/// by quadrature. This is the definitional route; the production path uses a
/// Gaussian moment match of the mixture.
pub fn jsd_exact_mixture_quadrature(mean_a: f64, var_a: f64, mean_b: f64, var_b: f64) -> f64 {
    // Each KL term carries a density factor that confines it to its own
    // component's support, so integrate the terms separately over those
    // supports (split at the mean); a single pass over the union range can
    // step right over a narrow, far-away peak.
    let term = |mean_p: f64, var_p: f64, mean_q: f64, var_q: f64| -> f64 {
        let sd_p = var_p.sqrt();
        let f = |x: f64| {
            let p = gaussian_pdf(x, mean_p, var_p);
            let q = gaussian_pdf(x, mean_q, var_q);
            let m = 0.5 * (p + q);
            if p > 0.0 && m > 0.0 {
                0.5 * p * (p / m).ln()
            } else {
                0.0
            }
        };
        let (lo, hi) = (mean_p - 12.0 * sd_p, mean_p + 12.0 * sd_p);
        integrate(&f, lo, mean_p, 1e-10) + integrate(&f, mean_p, hi, 1e-10)
    };
    term(mean_a, var_a, mean_b, var_b) + term(mean_b, var_b, mean_a, var_a)
}

/// Exhaustively enumerates injective assignments of the first `k_real` rows
/// of an `n x n` cost matrix (row-major) and returns the assignment vector
/// minimizing `objective`, iterating columns-outward so the search order
/// differs from the production enumerator. Remaining columns are given to
/// padded rows in increasing order.
pub fn enumerate_best_assignment<F: Fn(&[usize]) -> f64>(
    n: usize,
    k_real: usize,
    objective: &F,
) -> Vec<usize> {
    assert!(k_real <= n);
    let mut cols: Vec<usize> = (0..n).collect();
    let mut best: Option<(f64, Vec<usize>)> = None;
    // Iterative enumeration of ordered k_real-subsets via column swaps,
    // visiting candidates in a different order than lexicographic-by-row.
    fn walk<F: Fn(&[usize]) -> f64>(
        cols: &mut Vec<usize>,
        depth: usize,
        k_real: usize,
        n: usize,
        objective: &F,
        best: &mut Option<(f64, Vec<usize>)>,
    ) {
        if depth == k_real {
            let mut assignment = cols[..k_real].to_vec();
            let mut rest: Vec<usize> = cols[k_real..].to_vec();
            rest.sort_unstable();
            assignment.extend(rest);
            let value = objective(&assignment);
            let better = match best {
                None => true,
                Some((bv, ba)) => value < *bv - 1e-12 || (value < *bv + 1e-12 && assignment < *ba),
            };
            if better {
                *best = Some((value, assignment));
            }
            return;
        }
        // Reverse order on purpose: exercises tie-breaking differently.
        for i in (depth..n).rev() {
            cols.swap(depth, i);
            walk(cols, depth + 1, k_real, n, objective, best);
            cols.swap(depth, i);
        }
    }
    walk(&mut cols, 0, k_real, n, objective, &mut best);
    best.expect("at least one assignment exists").1
}
