//! Exact integration helpers for piecewise-linear functions and
//! Gauss-Legendre quadrature on sub-intervals.

/// Continuous piecewise-linear function through sorted nodes; constant
/// extension outside the node range.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinear {
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// running integral from xs[0] to xs[k]
    cumulative: Vec<f64>,
}

impl PiecewiseLinear {
    /// Nodes must be non-decreasing; repeated abscissae keep the last value.
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Self {
        assert_eq!(xs.len(), ys.len());
        assert!(!xs.is_empty());
        debug_assert!(xs.windows(2).all(|w| w[0] <= w[1]));
        let mut cumulative = Vec::with_capacity(xs.len());
        cumulative.push(0.0);
        for k in 1..xs.len() {
            let dx = xs[k] - xs[k - 1];
            cumulative.push(cumulative[k - 1] + 0.5 * dx * (ys[k] + ys[k - 1]));
        }
        Self { xs, ys, cumulative }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.xs
    }

    pub fn values(&self) -> &[f64] {
        &self.ys
    }

    /// Index `k` with `xs[k] <= x < xs[k+1]`, clamped to valid pieces.
    fn piece(&self, x: f64) -> usize {
        let n = self.xs.len();
        if n < 2 {
            return 0;
        }
        let k = self.xs.partition_point(|&v| v <= x);
        k.saturating_sub(1).min(n - 2)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if n == 1 || x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        let k = self.piece(x);
        let dx = self.xs[k + 1] - self.xs[k];
        if dx == 0.0 {
            return self.ys[k + 1];
        }
        let w = (x - self.xs[k]) / dx;
        self.ys[k] + w * (self.ys[k + 1] - self.ys[k])
    }

    /// `∫_{xs[0]}^x f`, extended linearly by the constant end values.
    pub fn antiderivative(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return (x - self.xs[0]) * self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.cumulative[n - 1] + (x - self.xs[n - 1]) * self.ys[n - 1];
        }
        let k = self.piece(x);
        let dx = x - self.xs[k];
        self.cumulative[k] + 0.5 * dx * (self.ys[k] + self.eval(x))
    }

    pub fn integral(&self, a: f64, b: f64) -> f64 {
        self.antiderivative(b) - self.antiderivative(a)
    }

    /// `∫_{xs[0]}^x (x - y) f(y) dy`, the second antiderivative. Exact cubic
    /// on every piece.
    pub fn second_antiderivative(&self, x: f64) -> f64 {
        // ∫ F(y) dy with F piecewise quadratic: Simpson is exact on each piece.
        let n = self.xs.len();
        let mut total = 0.0;
        let mut lo = self.xs[0];
        if x <= lo {
            // constant extension: F(y) = (y - x0) y0
            return 0.5 * (x - lo) * (x - lo) * self.ys[0];
        }
        for k in 1..n {
            let hi = self.xs[k].min(x);
            if hi > lo {
                let mid = 0.5 * (lo + hi);
                total += (hi - lo) / 6.0
                    * (self.antiderivative(lo) + 4.0 * self.antiderivative(mid) + self.antiderivative(hi));
            }
            lo = self.xs[k];
            if lo >= x {
                return total;
            }
        }
        let last = self.xs[n - 1];
        let f_last = self.cumulative[n - 1];
        let d = x - last;
        total + f_last * d + 0.5 * d * d * self.ys[n - 1]
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let step = p / d;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let n = n as f64;
    let d = n * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Fixed-order Gauss-Legendre rule mapped onto arbitrary intervals.
#[derive(Debug, Clone)]
pub struct Quadrature {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Quadrature {
    pub fn new(order: usize) -> Self {
        let (nodes, weights) = gauss_legendre(order);
        Self { nodes, weights }
    }

    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }

    /// Integrates over each gap of the sorted breakpoints inside `[a, b]`.
    pub fn integrate_pieces(&self, a: f64, b: f64, breaks: &[f64], mut f: impl FnMut(f64) -> f64) -> f64 {
        let mut total = 0.0;
        let mut lo = a;
        for &x in breaks.iter().filter(|&&x| x > a && x < b) {
            total += self.integrate(lo, x, &mut f);
            lo = x;
        }
        total + self.integrate(lo, b, &mut f)
    }
}

/// Adaptive Gauss-Legendre integration; each panel is accepted once two
/// rules agree to `tol` relative to the running scale.
pub fn adaptive(a: f64, b: f64, tol: f64, f: &mut impl FnMut(f64) -> f64) -> f64 {
    thread_local! {
        static RULES: (Quadrature, Quadrature) = (Quadrature::new(7), Quadrature::new(15));
    }
    fn rec(a: f64, b: f64, tol: f64, depth: usize, f: &mut dyn FnMut(f64) -> f64) -> f64 {
        let (lo, hi) = RULES.with(|(l, h)| (l.integrate(a, b, &mut *f), h.integrate(a, b, &mut *f)));
        if (hi - lo).abs() <= tol.max(1e-15 * hi.abs()) || depth == 0 {
            return hi;
        }
        let m = 0.5 * (a + b);
        rec(a, m, 0.5 * tol, depth - 1, f) + rec(m, b, 0.5 * tol, depth - 1, f)
    }
    if b <= a {
        return 0.0;
    }
    rec(a, b, tol, 40, f)
}

/// Sorted copy with near-duplicates (closer than `tol`) removed.
pub fn merge_breaks(mut xs: Vec<f64>, tol: f64) -> Vec<f64> {
    xs.retain(|x| x.is_finite());
    xs.sort_by(f64::total_cmp);
    xs.dedup_by(|a, b| (*a - *b).abs() <= tol);
    xs
}
