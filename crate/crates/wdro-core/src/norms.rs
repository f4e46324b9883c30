//! p-norms, Hölder-conjugate exponents, and the scalar envelope
//! `sup_t { s t - lambda t^2 } = s^2 / (4 lambda)` used throughout the
//! dual reformulations.

/// Hölder conjugate: `1/p + 1/q = 1`, with the exact conventions
/// `conj(1) = inf`, `conj(inf) = 1`, `conj(2) = 2`.
pub fn conjugate_exponent(q: f64) -> f64 {
    assert!(q >= 1.0, "norm index must satisfy q >= 1, got {q}");
    if q == 1.0 {
        f64::INFINITY
    } else if q.is_infinite() {
        1.0
    } else if q == 2.0 {
        2.0
    } else {
        q / (q - 1.0)
    }
}

/// `||v||_p` with exact branches for p in {1, 2, inf}.
pub fn p_norm(v: &[f64], p: f64) -> f64 {
    assert!(p >= 1.0, "norm index must satisfy p >= 1, got {p}");
    if p == 1.0 {
        v.iter().map(|x| x.abs()).sum()
    } else if p == 2.0 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    } else if p.is_infinite() {
        v.iter().fold(0.0, |m, x| m.max(x.abs()))
    } else {
        v.iter().map(|x| x.abs().powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

/// The Hölder-attaining direction `||theta||_p^{1-p/q} sgn(theta) |theta|^{p/q}`
/// (componentwise), which maximizes `theta' d` over `||d||_q = ||theta||_p`.
pub fn holder_direction(theta: &[f64], p: f64, q: f64) -> Vec<f64> {
    let np = p_norm(theta, p);
    if np == 0.0 {
        return vec![0.0; theta.len()];
    }
    if p == 1.0 {
        // q = inf: d_i = sgn(theta_i) * ||theta||_1 ... |theta|^0; ties at 0 kept 0
        return theta
            .iter()
            .map(|t| if *t == 0.0 { 0.0 } else { t.signum() * np })
            .collect();
    }
    if q == 1.0 {
        // p = inf: mass on the max-magnitude coordinate
        let (imax, _) = theta
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .unwrap();
        let mut d = vec![0.0; theta.len()];
        d[imax] = theta[imax].signum() * np;
        return d;
    }
    let scale = np.powf(1.0 - p / q);
    theta
        .iter()
        .map(|t| t.signum() * t.abs().powf(p / q) * scale)
        .collect()
}

/// `(||theta||_p^p + a^{-p/2})^{1/p}`, the dual-norm constant of the
/// regression transportation cost; `a = inf` drops the second term.
pub fn regression_dual_constant(theta: &[f64], p: f64, a: f64) -> f64 {
    assert!(a > 0.0, "regression weight a must be positive");
    if a.is_infinite() {
        return p_norm(theta, p);
    }
    if p.is_infinite() {
        return p_norm(theta, p).max(a.powf(-0.5));
    }
    (theta.iter().map(|t| t.abs().powf(p)).sum::<f64>() + a.powf(-p / 2.0)).powf(1.0 / p)
}
