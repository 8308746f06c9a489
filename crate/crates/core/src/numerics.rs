//! Small numerical helpers shared across modules: composite Gauss-Legendre
//! quadrature and monotone table inversion.

/// Nodes and weights of the `n`-point Gauss-Legendre rule on [-1, 1].
///
/// Roots are found by Newton iteration on the three-term recurrence, which is
/// accurate to machine precision for the small orders used here.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Composite Gauss-Legendre rule with `panels` equal panels of `order` points.
#[derive(Debug, Clone)]
pub struct CompositeRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    panels: usize,
}

impl CompositeRule {
    pub fn new(order: usize, panels: usize) -> Self {
        let (nodes, weights) = gauss_legendre(order);
        CompositeRule {
            nodes,
            weights,
            panels: panels.max(1),
        }
    }

    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let h = (b - a) / self.panels as f64;
        let mut total = 0.0;
        for p in 0..self.panels {
            let lo = a + h * p as f64;
            let mid = lo + 0.5 * h;
            let mut panel = 0.0;
            for (x, w) in self.nodes.iter().zip(&self.weights) {
                panel += w * f(mid + 0.5 * h * x);
            }
            total += 0.5 * h * panel;
        }
        total
    }

    /// Integrates over `[a, b]` split at every breakpoint that falls inside it,
    /// so piecewise-smooth integrands keep full order on each piece.
    pub fn integrate_piecewise(
        &self,
        a: f64,
        b: f64,
        breakpoints: &[f64],
        mut f: impl FnMut(f64) -> f64,
    ) -> f64 {
        if b <= a {
            return 0.0;
        }
        let mut cuts: Vec<f64> = breakpoints
            .iter()
            .copied()
            .filter(|&x| x > a && x < b)
            .collect();
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut lo = a;
        let mut total = 0.0;
        for hi in cuts.into_iter().chain(std::iter::once(b)) {
            total += self.integrate(lo, hi, &mut f);
            lo = hi;
        }
        total
    }
}

/// Tabulated cumulative distribution on `[lo, hi]` with linear inversion.
#[derive(Debug, Clone)]
pub struct CdfTable {
    xs: Vec<f64>,
    cdf: Vec<f64>,
}

impl CdfTable {
    /// Builds the normalized CDF of the nonnegative density `pdf` on `cells`
    /// equal cells, integrating each cell with a Gauss-Legendre rule.
    pub fn build(lo: f64, hi: f64, cells: usize, pdf: impl Fn(f64) -> f64) -> Self {
        let rule = CompositeRule::new(8, 1);
        let h = (hi - lo) / cells as f64;
        let mut xs = Vec::with_capacity(cells + 1);
        let mut cdf = Vec::with_capacity(cells + 1);
        xs.push(lo);
        cdf.push(0.0);
        let mut acc = 0.0;
        for i in 0..cells {
            let a = lo + h * i as f64;
            let b = if i + 1 == cells { hi } else { a + h };
            acc += rule.integrate(a, b, &pdf);
            xs.push(b);
            cdf.push(acc);
        }
        let total = acc;
        for c in &mut cdf {
            *c /= total;
        }
        *cdf.last_mut().unwrap() = 1.0;
        CdfTable { xs, cdf }
    }

    /// Quantile function: the `x` with `CDF(x) = u`, linear within a cell.
    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let k = self.cdf.partition_point(|&c| c < u);
        if k == 0 {
            return self.xs[0];
        }
        if k >= self.cdf.len() {
            return *self.xs.last().unwrap();
        }
        let (c0, c1) = (self.cdf[k - 1], self.cdf[k]);
        let (x0, x1) = (self.xs[k - 1], self.xs[k]);
        if c1 <= c0 {
            return x0;
        }
        x0 + (x1 - x0) * (u - c0) / (c1 - c0)
    }
}

/// Least-squares line `y = intercept + slope * x`, with coefficient of
/// determination. `r2` is 1 when the data have no spread (a constant series is
/// fitted exactly).
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let dx = x - mx;
        let dy = y - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - intercept - slope * x;
            r * r
        })
        .sum();
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    (slope, intercept, r2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(6);
        // degree 11 is the limit for 6 points
        let approx: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(10)).sum();
        assert!((approx - 2.0 / 11.0).abs() < 1e-14);
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
    }

    #[test]
    fn piecewise_rule_handles_jumps() {
        let rule = CompositeRule::new(6, 4);
        let v = rule.integrate_piecewise(0.0, 2.0, &[1.0], |x| if x < 1.0 { 1.0 } else { 3.0 });
        assert!((v - 4.0).abs() < 1e-13);
    }

    #[test]
    fn cdf_quantile_of_uniform_is_identity() {
        let t = CdfTable::build(0.0, 2.0, 64, |_| 1.0);
        for u in [0.0, 0.1, 0.5, 0.77, 1.0] {
            assert!((t.quantile(u) - 2.0 * u).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_fit_constant_series() {
        let (slope, _, r2) = linear_fit(&[1.0, 2.0, 3.0], &[5.0, 5.0, 5.0]);
        assert_eq!(slope, 0.0);
        assert_eq!(r2, 1.0);
    }
}
