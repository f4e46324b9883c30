//! One-dimensional minimization of convex functions on a half-line,
//! used by the scalar dual reformulations.

/// Golden-section minimization of a convex `f` on `[lo, hi]`.
/// Returns `(argmin, min)`.
pub(crate) fn golden_section_min(
    f: impl Fn(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> (f64, f64) {
    const INVPHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = hi - INVPHI * (hi - lo);
    let mut x2 = lo + INVPHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol * (1.0 + lo.abs() + hi.abs()) {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INVPHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INVPHI * (hi - lo);
            f2 = f(x2);
        }
    }
    let xm = 0.5 * (lo + hi);
    let fm = f(xm);
    if f1 <= f2 && f1 <= fm {
        (x1, f1)
    } else if f2 <= fm {
        (x2, f2)
    } else {
        (xm, fm)
    }
}

/// Minimize a convex `f` over `(lower, inf)` where `f` may be `+inf` near
/// `lower` and grows at `+inf`. Brackets by doubling from `lower + step0`,
/// then golden-sections. Returns `(argmin, min)`.
pub(crate) fn min_convex_halfline(
    f: impl Fn(f64) -> f64,
    lower: f64,
    step0: f64,
    tol: f64,
) -> (f64, f64) {
    // walk right until the function value is finite
    let mut a = lower + step0;
    let mut fa = f(a);
    let mut guard = 0;
    while !fa.is_finite() && guard < 2048 {
        a = lower + (a - lower) * 2.0;
        fa = f(a);
        guard += 1;
    }
    if !fa.is_finite() {
        return (a, fa);
    }
    // double until the value increases, giving an upper bracket; the cap
    // handles objectives whose infimum sits at +inf (they flatten out)
    let mut b = lower + (a - lower) * 2.0;
    let mut fb = f(b);
    while fb < fa && b - lower < 1e18 {
        a = b;
        fa = fb;
        b = lower + (b - lower) * 2.0;
        fb = f(b);
    }
    // left edge of the bracket: halve towards `lower` while decreasing
    let mut l = lower + (a - lower) * 0.5;
    let mut fl = f(l);
    guard = 0;
    while fl.is_finite() && fl < fa && guard < 2048 {
        fa = fl;
        l = lower + (l - lower) * 0.5;
        fl = f(l);
        guard += 1;
    }
    let lo = if fl.is_finite() { l } else { lower + (l - lower) * 1.000_001 };
    golden_section_min(f, lo, b, tol)
}
