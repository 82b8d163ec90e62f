//! Slow, loop-based reference computations that tests compare the engine
//! against. Nothing here shares code with `fttim-core`.

/// Relative error with an absolute floor for near-zero quantities.
pub fn rel_err(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Central difference of `f` along coordinate `k` of `x`.
pub fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], k: usize, h: f64) -> f64 {
    let mut p = x.to_vec();
    let mut m = x.to_vec();
    p[k] += h;
    m[k] -= h;
    (f(&p) - f(&m)) / (2.0 * h)
}

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += (a[i] - b[i]) * (a[i] - b[i]);
    }
    s
}

/// `-1/2 ||x - w_j||^2` for every row `w_j`.
pub fn norm_induced(x: &[f64], w: &[Vec<f64>]) -> Vec<f64> {
    w.iter().map(|wj| -0.5 * sq_dist(x, wj)).collect()
}

pub fn normalized(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / n).collect()
}

/// `exp(-(tau/2) d_c) / sum_k exp(-(tau/2) d_k)`, computed without shifting.
pub fn naive_posterior(z: &[f64], prototypes: &[Vec<f64>], tau: f64) -> Vec<f64> {
    let e: Vec<f64> = prototypes
        .iter()
        .map(|t| (-tau / 2.0 * sq_dist(z, t)).exp())
        .collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

/// Term-by-term loss: (lambda-weighted CE, alpha-weighted conditional entropy, marginal term).
pub fn naive_tim_loss(
    support: &[Vec<f64>],
    support_labels: &[usize],
    query: &[Vec<f64>],
    prototypes: &[Vec<f64>],
    tau: f64,
    lambda: f64,
    alpha: f64,
) -> (f64, f64, f64) {
    let c = prototypes.len();
    let mut ce = 0.0;
    for (x, &y) in support.iter().zip(support_labels) {
        ce += naive_posterior(x, prototypes, tau)[y].ln();
    }
    let ce = -lambda / support.len() as f64 * ce;
    let mut cond = 0.0;
    let mut marg = vec![0.0; c];
    for x in query {
        let p = naive_posterior(x, prototypes, tau);
        for k in 0..c {
            if p[k] > 0.0 {
                cond += p[k] * p[k].ln();
            }
            marg[k] += p[k] / query.len() as f64;
        }
    }
    let cond = -alpha / query.len() as f64 * cond;
    let m: f64 = marg.iter().filter(|&&v| v > 0.0).map(|v| v * v.ln()).sum();
    (ce, cond, m)
}

/// Smallest `J` over every labelling of `points` into `classes` groups, with
/// each non-empty group represented by its mean. Returns the value and a
/// labelling achieving it.
pub fn brute_force_kmeans(points: &[Vec<f64>], classes: usize) -> (f64, Vec<usize>) {
    let n = points.len();
    let total = classes.pow(n as u32);
    let mut best = (f64::INFINITY, vec![0; n]);
    for code in 0..total {
        let mut labels = vec![0; n];
        let mut rest = code;
        for l in labels.iter_mut() {
            *l = rest % classes;
            rest /= classes;
        }
        let mut j = 0.0;
        for c in 0..classes {
            let members: Vec<&Vec<f64>> = points
                .iter()
                .zip(&labels)
                .filter(|(_, &l)| l == c)
                .map(|(p, _)| p)
                .collect();
            if members.is_empty() {
                continue;
            }
            let dim = members[0].len();
            let mean: Vec<f64> = (0..dim)
                .map(|k| members.iter().map(|m| m[k]).sum::<f64>() / members.len() as f64)
                .collect();
            j += members.iter().map(|m| sq_dist(m, &mean)).sum::<f64>();
        }
        if j < best.0 {
            best = (j, labels);
        }
    }
    best
}

/// Euclidean projection onto the probability simplex (sort-and-threshold).
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, &uk) in u.iter().enumerate() {
        cum += uk;
        let t = (cum - 1.0) / (k + 1) as f64;
        if uk - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// `sum_c q_c d_c + beta sum_c q_c log q_c` with `0 log 0 = 0`.
pub fn barrier_objective(q: &[f64], d: &[f64], beta: f64) -> f64 {
    q.iter()
        .zip(d)
        .map(|(&qc, &dc)| qc * dc + if qc > 0.0 { beta * qc * qc.ln() } else { 0.0 })
        .sum()
}

/// Entropic mirror descent with unit step for the barrier objective over one
/// simplex, iterated in log space from the uniform point. The objective is
/// `beta`-smooth relative to negative entropy, so the unit step is monotone
/// for `beta <= 1` and contracts the log-iterate by `1 - beta` per step.
pub fn minimize_barrier_row(d: &[f64], beta: f64, iterations: usize) -> Vec<f64> {
    assert!(
        beta > 0.0 && beta <= 1.0,
        "unit step requires 0 < beta <= 1"
    );
    let c = d.len();
    let mut logq = vec![-(c as f64).ln(); c];
    for _ in 0..iterations {
        let mut next: Vec<f64> = logq
            .iter()
            .zip(d)
            .map(|(&l, &dc)| l - (dc + beta * (l + 1.0)))
            .collect();
        let m = next.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + next.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        next.iter_mut().for_each(|v| *v -= lse);
        logq = next;
    }
    logq.iter().map(|v| v.exp()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_of_simplex_point_is_identity() {
        let p = project_simplex(&[0.2, 0.3, 0.5]);
        assert!((p[0] - 0.2).abs() < 1e-15 && (p[2] - 0.5).abs() < 1e-15);
        assert_eq!(project_simplex(&[5.0, 0.0]), vec![1.0, 0.0]);
    }

    #[test]
    fn barrier_minimizer_matches_gibbs_form() {
        let d = [0.3, 1.1, 0.7, 2.0];
        let beta = 0.5;
        let q = minimize_barrier_row(&d, beta, 5000);
        let e: Vec<f64> = d.iter().map(|v| (-v / beta).exp()).collect();
        let s: f64 = e.iter().sum();
        for k in 0..4 {
            assert!((q[k] - e[k] / s).abs() < 1e-7, "{q:?}");
        }
    }

    #[test]
    fn brute_force_two_pairs() {
        let pts = vec![vec![0.0], vec![0.1], vec![5.0], vec![5.2]];
        let (j, labels) = brute_force_kmeans(&pts, 2);
        assert!((j - (0.005 + 0.02)).abs() < 1e-12);
        assert_eq!(labels[0], labels[1]);
        assert_ne!(labels[1], labels[2]);
    }
}
