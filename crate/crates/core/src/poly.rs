//! Dense univariate polynomials with the real-root bracketing needed by the
//! hypothesis certifier.
//!
//! Coefficients are stored lowest degree first. Extrema are located through
//! sign changes of the derivative on a Cauchy-bounded interval, refined by
//! bisection; for the even polynomials the certifier feeds in, every global
//! extremum is a sign-change critical point, so no Sturm machinery is needed.

/// Polynomial with `coeffs[i]` multiplying `s^i`. Trailing zeros are trimmed.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    coeffs: Vec<f64>,
}

impl Poly {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.len() > 1 && coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Poly { coeffs }
    }

    pub fn zero() -> Self {
        Poly { coeffs: vec![0.0] }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn leading(&self) -> f64 {
        *self.coeffs.last().unwrap()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0] == 0.0
    }

    /// Horner evaluation.
    pub fn eval(&self, s: f64) -> f64 {
        let mut acc = 0.0;
        for &c in self.coeffs.iter().rev() {
            acc = acc * s + c;
        }
        acc
    }

    pub fn derivative(&self) -> Poly {
        if self.coeffs.len() == 1 {
            return Poly::zero();
        }
        let d: Vec<f64> = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, &c)| c * i as f64)
            .collect();
        Poly::new(d)
    }

    pub fn scale(&self, factor: f64) -> Poly {
        Poly::new(self.coeffs.iter().map(|c| c * factor).collect())
    }

    /// self - c * s^k
    pub fn sub_monomial(&self, c: f64, k: usize) -> Poly {
        let mut v = self.coeffs.clone();
        if v.len() <= k {
            v.resize(k + 1, 0.0);
        }
        v[k] -= c;
        Poly::new(v)
    }

    /// self + c * s^k
    pub fn add_monomial(&self, c: f64, k: usize) -> Poly {
        self.sub_monomial(-c, k)
    }

    pub fn add_scalar(&self, c: f64) -> Poly {
        self.add_monomial(c, 0)
    }

    /// Cauchy bound: every real root lies in [-R, R].
    pub fn root_bound(&self) -> f64 {
        let lead = self.leading().abs();
        if lead == 0.0 {
            return 1.0;
        }
        let m = self.coeffs[..self.coeffs.len() - 1]
            .iter()
            .fold(0.0_f64, |a, c| a.max(c.abs()));
        1.0 + m / lead
    }
}

/// Roots of `p` in `[lo, hi]` at which `p` changes sign, found by a dense scan
/// followed by bisection. Even-multiplicity touch points are skipped on
/// purpose: callers only need extremum candidates of an antiderivative.
pub fn sign_change_roots(p: &Poly, lo: f64, hi: f64) -> Vec<f64> {
    if p.is_zero() || lo >= hi {
        return Vec::new();
    }
    let cells = (256 * (p.degree() + 1)).min(20_000);
    let step = (hi - lo) / cells as f64;
    let mut roots = Vec::new();
    let mut x0 = lo;
    let mut f0 = p.eval(x0);
    for i in 1..=cells {
        let x1 = if i == cells { hi } else { lo + step * i as f64 };
        let f1 = p.eval(x1);
        if f0 == 0.0 {
            roots.push(x0);
        } else if f0 * f1 < 0.0 {
            roots.push(bisect(p, x0, x1, f0));
        }
        x0 = x1;
        f0 = f1;
    }
    if f0 == 0.0 {
        roots.push(x0);
    }
    roots.dedup_by(|a, b| (*a - *b).abs() < 1e-12 * (1.0 + a.abs()));
    roots
}

fn bisect(p: &Poly, mut lo: f64, mut hi: f64, flo: f64) -> f64 {
    let mut flo = flo;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = p.eval(mid);
        if fm == 0.0 {
            return mid;
        }
        if flo * fm < 0.0 {
            hi = mid;
        } else {
            lo = mid;
            flo = fm;
        }
    }
    0.5 * (lo + hi)
}

/// Global minimum of an even-degree polynomial with positive leading
/// coefficient (constants are their own minimum). Returns `(argmin, min)`.
pub fn global_min(p: &Poly) -> Option<(f64, f64)> {
    if p.degree() == 0 {
        return Some((0.0, p.coeffs[0]));
    }
    if p.degree() % 2 != 0 || p.leading() <= 0.0 {
        return None;
    }
    let dp = p.derivative();
    let r = p.root_bound().max(dp.root_bound());
    let crit = sign_change_roots(&dp, -r, r);
    // lc > 0 and even degree force at least one descending-to-ascending crossing
    let mut best: Option<(f64, f64)> = None;
    for s in crit {
        let v = p.eval(s);
        if best.map_or(true, |(_, bv)| v < bv) {
            best = Some((s, v));
        }
    }
    best.or(Some((0.0, p.eval(0.0))))
}

/// Maximum of |p| over `[lo, hi]`: endpoints plus sign-change critical points.
pub fn max_abs_on(p: &Poly, lo: f64, hi: f64) -> f64 {
    let mut m = p.eval(lo).abs().max(p.eval(hi).abs());
    for s in sign_change_roots(&p.derivative(), lo, hi) {
        m = m.max(p.eval(s).abs());
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn double_well() -> Poly {
        // (1 - s^2)^2 = 1 - 2 s^2 + s^4
        Poly::new(vec![1.0, 0.0, -2.0, 0.0, 1.0])
    }

    #[test]
    fn eval_and_derivative() {
        let f = double_well();
        assert_eq!(f.eval(0.0), 1.0);
        assert_eq!(f.eval(1.0), 0.0);
        assert_eq!(f.eval(-1.0), 0.0);
        let f1 = f.derivative();
        assert_eq!(f1.eval(1.0), 0.0);
        let f2 = f1.derivative();
        assert_eq!(f2.eval(0.0), -4.0);
    }

    #[test]
    fn min_of_second_derivative_is_exact() {
        let f2 = double_well().derivative().derivative(); // 12 s^2 - 4
        let (s, v) = global_min(&f2).unwrap();
        assert!(s.abs() < 1e-12);
        assert_eq!(v, -4.0);
    }

    #[test]
    fn min_of_h3_expression() {
        // s^4 - 3 s^2 + 1, minimum -5/4 at s^2 = 3/2
        let p = double_well().sub_monomial(1.0, 2);
        let (s, v) = global_min(&p).unwrap();
        assert!((s.abs() - (1.5_f64).sqrt()).abs() < 1e-10);
        assert!((v + 1.25).abs() < 1e-12);
    }

    #[test]
    fn max_abs_on_range() {
        let f2 = double_well().derivative().derivative();
        assert!((max_abs_on(&f2, -1.0, 1.0) - 8.0).abs() < 1e-12);
        assert!((max_abs_on(&f2, 0.0, 0.0) - 4.0).abs() < 1e-12);
        assert!(max_abs_on(&f2, -2.0, 2.0) >= max_abs_on(&f2, -1.0, 1.0));
    }

    #[test]
    fn roots_of_cubic() {
        // 4 s^3 - 6 s: sign changes at -sqrt(1.5), 0, sqrt(1.5)
        let p = Poly::new(vec![0.0, -6.0, 0.0, 4.0]);
        let roots = sign_change_roots(&p, -3.0, 3.0);
        assert_eq!(roots.len(), 3);
        assert!((roots[0] + (1.5_f64).sqrt()).abs() < 1e-10);
        assert!(roots[1].abs() < 1e-10);
        assert!((roots[2] - (1.5_f64).sqrt()).abs() < 1e-10);
    }
}
