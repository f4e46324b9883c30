//! Shared derivative-free minimizer for the low-dimensional convex
//! objectives appearing in fitting and conjugate computations.

use nalgebra::DVector;

const MAX_ITERS: usize = 200_000;

/// Minimizes a convex (possibly nonsmooth) function by compass search:
/// coordinate and diagonal probes with an adaptive step, shrinking when no
/// probe improves. Deterministic and derivative-free, adequate at d <= ~10.
pub(crate) fn minimize_nonsmooth(
    f: &impl Fn(&DVector<f64>) -> f64,
    w0: &DVector<f64>,
) -> (DVector<f64>, usize) {
    let dim = w0.len();
    let mut w = w0.clone();
    let mut fw = f(&w);
    let mut step = 1.0;
    let mut iters = 0usize;
    // probe directions: +-e_i plus +-(e_i + e_j) diagonals
    let mut dirs: Vec<DVector<f64>> = Vec::new();
    for i in 0..dim {
        let mut e = DVector::zeros(dim);
        e[i] = 1.0;
        dirs.push(e.clone());
        dirs.push(-e);
    }
    for i in 0..dim {
        for j in (i + 1)..dim {
            for (si, sj) in [(1.0, 1.0), (1.0, -1.0)] {
                let mut e = DVector::zeros(dim);
                e[i] = si;
                e[j] = sj;
                let e = e / (2.0f64).sqrt();
                dirs.push(e.clone());
                dirs.push(-e);
            }
        }
    }
    while iters < MAX_ITERS && step > 1e-14 {
        iters += 1;
        let mut improved = false;
        for dir in &dirs {
            let cand = &w + step * dir;
            let fc = f(&cand);
            if fc < fw - 1e-16 * (1.0 + fw.abs()) {
                w = cand;
                fw = fc;
                improved = true;
            }
        }
        if improved {
            step *= 2.0;
        } else {
            step *= 0.5;
        }
    }
    (w, iters)
}
