//! Interaction kernel `J`, the field `a(x) = J*1`, and the truncated
//! convolution `(J*f)(x) = integral over Omega of J(x-y) f(y) dy`.
//!
//! The convolution is the midpoint quadrature of the integral on the
//! collocation grid, evaluated as a zero-padded linear convolution through a
//! complex FFT (padded length 2n per axis, so nothing wraps around the box).
//! `a_field` is produced by the same code path applied to the constant one,
//! which makes `a*phi - J*phi` vanish identically on constant states.
//!
//! Scalar constants (`c_J`, `d_J`, `a0`, `a*`) come from a 4x-refined
//! midpoint quadrature; `c_J` over the kernel's full support is analytic for
//! the gaussian and mollifier families.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::spectral::{Field, SpectralSpace};

/// Supported kernel shapes. Gaussian and mollifier are normalized so the
/// full-support mass equals `amplitude`; tables carry raw sampled values.
#[derive(Debug, Clone)]
pub enum KernelFamily {
    Gaussian { sigma: f64 },
    Mollifier { radius: f64 },
    /// 1D only: values sampled at uniformly spaced offsets (odd count,
    /// symmetric about zero).
    Table { offsets: Vec<f64>, values: Vec<f64> },
}

impl KernelFamily {
    fn label(&self) -> &'static str {
        match self {
            KernelFamily::Gaussian { .. } => "gaussian",
            KernelFamily::Mollifier { .. } => "mollifier",
            KernelFamily::Table { .. } => "table",
        }
    }
}

/// H1 certification outcome; failures are entries, not errors.
#[derive(Debug, Clone)]
pub struct H1Report {
    pub pass: bool,
    pub a0: f64,
    pub a_star: f64,
    pub c_j: f64,
    pub c_j_domain: f64,
    pub d_j: f64,
    pub symmetry_residual: f64,
    /// Grid point where `a` attains its minimum.
    pub worst_point: Vec<f64>,
    pub failures: Vec<String>,
}

struct ConvPlan {
    padded: [usize; 2],
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    fwd1: Option<Arc<dyn Fft<f64>>>,
    inv1: Option<Arc<dyn Fft<f64>>>,
    /// FFT of the taps, divided by the total padded length.
    spectrum: Vec<Complex<f64>>,
}

/// Immutable nonlocal operator bound to one [`SpectralSpace`] grid.
pub struct Kernel {
    family: KernelFamily,
    amplitude: f64,
    shape: [usize; 2],
    /// Raw J on the difference grid, (2 n0 - 1) x (2 n1 - 1), row-major,
    /// offset (i, j) stored at [(i + n0 - 1) * (2 n1 - 1) + (j + n1 - 1)].
    sampled_values: Vec<f64>,
    a_field: Field,
    c_j: f64,
    c_j_domain: f64,
    d_j: f64,
    a0: f64,
    a_star: f64,
    worst_point: Vec<f64>,
    symmetry_residual: f64,
    plan: ConvPlan,
}

impl Kernel {
    /// Build and validate against (H1); positivity or symmetry violations are
    /// hard errors here.
    pub fn build(family: KernelFamily, amplitude: f64, sp: &SpectralSpace) -> Result<Kernel> {
        let k = Kernel::build_unvalidated(family, amplitude, sp)?;
        let report = k.certify_h1();
        if !report.pass {
            if report.symmetry_residual > 1e-12 {
                return Err(Error::KernelAsymmetric {
                    residual: report.symmetry_residual,
                });
            }
            return Err(Error::KernelNotPositive {
                location: report.worst_point,
                value: report.a0,
            });
        }
        Ok(k)
    }

    /// Build without the (H1) gate; resolution and shape are still checked.
    /// Lets the certifier report on defective kernels.
    pub fn build_unvalidated(
        family: KernelFamily,
        amplitude: f64,
        sp: &SpectralSpace,
    ) -> Result<Kernel> {
        if !(amplitude > 0.0) {
            return Err(Error::BadParam {
                name: "kernel amplitude",
                value: amplitude,
                expected: "> 0",
            });
        }
        let dims = sp.dims();
        let shape = sp.shape();
        let h_min = (0..dims)
            .map(|a| sp.lengths()[a] / shape[a] as f64)
            .fold(f64::INFINITY, f64::min);
        let support = match &family {
            KernelFamily::Gaussian { sigma } => {
                if !(*sigma > 0.0) {
                    return Err(Error::BadParam {
                        name: "sigma",
                        value: *sigma,
                        expected: "> 0",
                    });
                }
                8.0 * sigma
            }
            KernelFamily::Mollifier { radius } => {
                if !(*radius > 0.0) {
                    return Err(Error::BadParam {
                        name: "radius",
                        value: *radius,
                        expected: "> 0",
                    });
                }
                2.0 * radius
            }
            KernelFamily::Table { offsets, values } => {
                if dims != 1 {
                    return Err(Error::KernelTable(
                        "table kernels are supported in 1D only".into(),
                    ));
                }
                if offsets.len() != values.len() || offsets.len() < 3 {
                    return Err(Error::KernelTable(
                        "need matching offset/value columns with at least 3 rows".into(),
                    ));
                }
                offsets.last().unwrap() - offsets.first().unwrap()
            }
        };
        let cells = support / h_min;
        if cells < 8.0 {
            return Err(Error::KernelUnresolved { cells });
        }

        let eval = SampledKernel::new(&family, amplitude);
        let sampled_values = sample_difference_grid(&eval, sp);
        let plan = make_plan(&sampled_values, sp)?;
        let ones = vec![1.0; sp.len()];
        let a_values = convolve_with(&plan, shape, &ones);
        let a_field = Field::from_values(a_values);

        // refined-grid constants
        let refine = 4;
        let (a0_r, a_star_r, worst) = refined_a_extrema(&eval, sp, refine);
        let (mut a0, mut a_star, mut worst_point) = (a0_r, a_star_r, worst);
        for (i, &v) in a_field.values().iter().enumerate() {
            if v < a0 {
                a0 = v;
                worst_point = sp.node(i)[..dims].to_vec();
            }
            a_star = a_star.max(v);
        }
        let c_j = eval.full_mass();
        let c_j_domain = domain_l1(&eval, sp, refine);
        let d_j = eval.grad_l1(sp);
        let symmetry_residual = symmetry_residual(&sampled_values, shape);

        Ok(Kernel {
            family,
            amplitude,
            shape,
            sampled_values,
            a_field,
            c_j,
            c_j_domain,
            d_j,
            a0,
            a_star,
            worst_point,
            symmetry_residual,
            plan,
        })
    }

    /// Truncated convolution `J*f` on the grid.
    pub fn convolve(&self, f: &Field) -> Result<Field> {
        if f.len() != self.shape[0] * self.shape[1] {
            return Err(Error::SizeMismatch {
                expected: self.shape[0] * self.shape[1],
                got: f.len(),
            });
        }
        Ok(Field::from_values(convolve_with(
            &self.plan,
            self.shape,
            f.values(),
        )))
    }

    /// Nonlocal diffusion term `a*f - J*f`, arranged so constants map to
    /// exact zeros: the mean-free part carries all of the result.
    pub fn nonlocal_term(&self, f: &[f64]) -> Vec<f64> {
        let f0 = f[0];
        let g: Vec<f64> = f.iter().map(|v| v - f0).collect();
        let conv = convolve_with(&self.plan, self.shape, &g);
        self.a_field
            .values()
            .iter()
            .zip(g.iter().zip(&conv))
            .map(|(a, (gi, ci))| a * gi - ci)
            .collect()
    }

    /// Pass/fail report for hypothesis (H1).
    pub fn certify_h1(&self) -> H1Report {
        let mut failures = Vec::new();
        if self.symmetry_residual > 1e-12 {
            failures.push(format!(
                "symmetry residual {:.3e} exceeds 1e-12",
                self.symmetry_residual
            ));
        }
        if !(self.a0 > 0.0) {
            failures.push(format!(
                "a(x) = {:.3e} <= 0 near {:?}",
                self.a0, self.worst_point
            ));
        }
        H1Report {
            pass: failures.is_empty(),
            a0: self.a0,
            a_star: self.a_star,
            c_j: self.c_j,
            c_j_domain: self.c_j_domain,
            d_j: self.d_j,
            symmetry_residual: self.symmetry_residual,
            worst_point: self.worst_point.clone(),
            failures,
        }
    }

    pub fn family_label(&self) -> &'static str {
        self.family.label()
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn a_field(&self) -> &Field {
        &self.a_field
    }

    pub fn sampled_values(&self) -> &[f64] {
        &self.sampled_values
    }

    /// `||J||_{L1}` over the kernel's full support.
    pub fn c_j(&self) -> f64 {
        self.c_j
    }

    /// Literal `||J||_{L1(Omega)}` with the offset variable restricted to the box.
    pub fn c_j_domain(&self) -> f64 {
        self.c_j_domain
    }

    /// `||grad J||_{L1}`.
    pub fn d_j(&self) -> f64 {
        self.d_j
    }

    /// Essential infimum of `a` over the box (refined and state grids).
    pub fn a0(&self) -> f64 {
        self.a0
    }

    /// `||a||_{L-infinity}`.
    pub fn a_star(&self) -> f64 {
        self.a_star
    }
}

/// Pointwise kernel evaluation with the family's analytic gradient.
struct SampledKernel {
    family: KernelFamily,
    amplitude: f64,
    /// Unit-radius bump mass per dimension, so the mollifier integrates to 1.
    bump_mass: [f64; 2],
}

const MOLLIFIER_QUAD: usize = 200_000;

impl SampledKernel {
    fn new(family: &KernelFamily, amplitude: f64) -> Self {
        let bump_mass = match family {
            KernelFamily::Mollifier { .. } => [Self::bump_mass(1), Self::bump_mass(2)],
            _ => [1.0, 1.0],
        };
        SampledKernel {
            family: family.clone(),
            amplitude,
            bump_mass,
        }
    }

    fn bump_mass(dims: usize) -> f64 {
        let m = MOLLIFIER_QUAD;
        let mut acc = 0.0;
        for i in 0..m {
            let t = (i as f64 + 0.5) / m as f64;
            let w = (-1.0 / (1.0 - t * t)).exp();
            acc += if dims == 1 {
                2.0 * w
            } else {
                2.0 * std::f64::consts::PI * t * w
            };
        }
        acc / m as f64
    }

    fn eval(&self, z: &[f64]) -> f64 {
        let r2: f64 = z.iter().map(|v| v * v).sum();
        match &self.family {
            KernelFamily::Gaussian { sigma } => {
                let d = z.len() as i32;
                let norm = (sigma * (2.0 * std::f64::consts::PI).sqrt()).powi(d);
                self.amplitude * (-r2 / (2.0 * sigma * sigma)).exp() / norm
            }
            KernelFamily::Mollifier { radius } => {
                let u2 = r2 / (radius * radius);
                if u2 >= 1.0 {
                    0.0
                } else {
                    let mass = self.bump_mass[z.len() - 1];
                    self.amplitude * (-1.0 / (1.0 - u2)).exp()
                        / (mass * radius.powi(z.len() as i32))
                }
            }
            KernelFamily::Table { offsets, values } => {
                let x = z[0];
                let lo = offsets[0];
                let hi = *offsets.last().unwrap();
                if x < lo || x > hi {
                    return 0.0;
                }
                let step = (hi - lo) / (offsets.len() - 1) as f64;
                let pos = (x - lo) / step;
                let i = (pos.floor() as usize).min(offsets.len() - 2);
                let t = pos - i as f64;
                self.amplitude * ((1.0 - t) * values[i] + t * values[i + 1])
            }
        }
    }

    /// Mass over the full support (exact for the normalized families).
    fn full_mass(&self) -> f64 {
        match &self.family {
            KernelFamily::Gaussian { .. } | KernelFamily::Mollifier { .. } => self.amplitude,
            KernelFamily::Table { offsets, .. } => {
                let lo = offsets[0];
                let hi = *offsets.last().unwrap();
                let m = 200_000;
                let step = (hi - lo) / m as f64;
                let mut acc = 0.0;
                for i in 0..m {
                    let x = lo + (i as f64 + 0.5) * step;
                    acc += self.eval(&[x]).abs();
                }
                acc * step
            }
        }
    }

    /// `||grad J||_{L1}` from the analytic radial derivative; spectral
    /// differentiation for tables.
    fn grad_l1(&self, sp: &SpectralSpace) -> f64 {
        let dims = sp.dims();
        match &self.family {
            KernelFamily::Gaussian { sigma } => {
                let m = 200_000;
                let rmax = 10.0 * sigma;
                let step = rmax / m as f64;
                let mut acc = 0.0;
                for i in 0..m {
                    let r = (i as f64 + 0.5) * step;
                    let j = self.eval(&if dims == 1 { vec![r] } else { vec![r, 0.0] });
                    let dj = (r / (sigma * sigma)) * j; // |d/dr J|
                    acc += if dims == 1 {
                        2.0 * dj
                    } else {
                        2.0 * std::f64::consts::PI * r * dj
                    };
                }
                acc * step
            }
            KernelFamily::Mollifier { radius } => {
                let m = 200_000;
                let step = radius / m as f64;
                let mut acc = 0.0;
                for i in 0..m {
                    let r = (i as f64 + 0.5) * step;
                    let u = r / radius;
                    let w = 1.0 - u * u;
                    let j = self.eval(&if dims == 1 { vec![r] } else { vec![r, 0.0] });
                    // d/dr exp(-1/(1-u^2)) factor
                    let dj = j * (2.0 * u / (w * w)) / radius;
                    acc += if dims == 1 {
                        2.0 * dj.abs()
                    } else {
                        2.0 * std::f64::consts::PI * r * dj.abs()
                    };
                }
                acc * step
            }
            KernelFamily::Table { offsets, .. } => {
                // periodic spectral derivative of the sampled profile
                let lo = offsets[0];
                let hi = *offsets.last().unwrap();
                let m = 4096usize;
                let span = hi - lo;
                let step = span / m as f64;
                let samples: Vec<f64> = (0..m)
                    .map(|i| self.eval(&[lo + (i as f64 + 0.5) * step]))
                    .collect();
                let mut planner = FftPlanner::new();
                let fwd = planner.plan_fft_forward(m);
                let inv = planner.plan_fft_inverse(m);
                let mut buf: Vec<Complex<f64>> =
                    samples.iter().map(|v| Complex::new(*v, 0.0)).collect();
                fwd.process(&mut buf);
                for (k, c) in buf.iter_mut().enumerate() {
                    let kk = if k <= m / 2 { k as f64 } else { k as f64 - m as f64 };
                    let omega = 2.0 * std::f64::consts::PI * kk / span;
                    *c *= Complex::new(0.0, omega);
                }
                inv.process(&mut buf);
                buf.iter().map(|c| (c.re / m as f64).abs()).sum::<f64>() * step
            }
        }
    }
}

fn sample_difference_grid(eval: &SampledKernel, sp: &SpectralSpace) -> Vec<f64> {
    let [n0, n1] = sp.shape();
    let h0 = sp.lengths()[0] / n0 as f64;
    let h1 = sp.lengths()[1] / n1 as f64;
    let (m0, m1) = (2 * n0 - 1, 2 * n1 - 1);
    let mut out = vec![0.0; m0 * m1];
    if matches!(eval.family, KernelFamily::Table { .. }) {
        // tables are sampled as given; the symmetry check must see them raw
        for i in -(n0 as isize - 1)..n0 as isize {
            let v = eval.eval(&[i as f64 * h0]);
            out[(i + n0 as isize - 1) as usize] = v;
        }
        return out;
    }
    // radial families: evaluate non-negative offsets once, mirror for exact
    // evenness on the sampled grid
    for i in 0..n0 as isize {
        for j in 0..n1 as isize {
            let z = if sp.dims() == 1 {
                vec![i as f64 * h0]
            } else {
                vec![i as f64 * h0, j as f64 * h1]
            };
            let v = eval.eval(&z);
            for (si, sj) in [(1isize, 1isize), (1, -1), (-1, 1), (-1, -1)] {
                let oi = (si * i + (n0 as isize - 1)) as usize;
                let oj = (sj * j + (n1 as isize - 1)) as usize;
                out[oi * m1 + oj] = v;
            }
        }
    }
    out
}

fn symmetry_residual(sampled: &[f64], shape: [usize; 2]) -> f64 {
    let (m0, m1) = (2 * shape[0] - 1, 2 * shape[1] - 1);
    let mut res = 0.0_f64;
    for i in 0..m0 {
        for j in 0..m1 {
            let mirrored = sampled[(m0 - 1 - i) * m1 + (m1 - 1 - j)];
            res = res.max((sampled[i * m1 + j] - mirrored).abs());
        }
    }
    res
}

fn make_plan(sampled: &[f64], sp: &SpectralSpace) -> Result<ConvPlan> {
    let [n0, n1] = sp.shape();
    let cellw = sp.cell();
    let p0 = 2 * n0;
    let p1 = if sp.dims() == 2 { 2 * n1 } else { 1 };
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(p0);
    let inv = planner.plan_fft_inverse(p0);
    let (fwd1, inv1) = if sp.dims() == 2 {
        (
            Some(planner.plan_fft_forward(p1)),
            Some(planner.plan_fft_inverse(p1)),
        )
    } else {
        (None, None)
    };
    // taps at circular index (offset mod padded), premultiplied by the cell weight
    let mut taps = vec![Complex::new(0.0, 0.0); p0 * p1];
    let m1 = 2 * n1 - 1;
    for di in -(n0 as isize - 1)..=(n0 as isize - 1) {
        let src_i = (di + n0 as isize - 1) as usize;
        let dst_i = di.rem_euclid(p0 as isize) as usize;
        if sp.dims() == 1 {
            taps[dst_i] = Complex::new(sampled[src_i * m1] * cellw, 0.0);
        } else {
            for dj in -(n1 as isize - 1)..=(n1 as isize - 1) {
                let src_j = (dj + n1 as isize - 1) as usize;
                let dst_j = dj.rem_euclid(p1 as isize) as usize;
                taps[dst_i * p1 + dst_j] =
                    Complex::new(sampled[src_i * m1 + src_j] * cellw, 0.0);
            }
        }
    }
    fft2_in_place(&mut taps, [p0, p1], &fwd, fwd1.as_deref());
    let scale = 1.0 / (p0 * p1) as f64;
    for c in taps.iter_mut() {
        *c *= scale;
    }
    Ok(ConvPlan {
        padded: [p0, p1],
        fwd,
        inv,
        fwd1,
        inv1,
        spectrum: taps,
    })
}

fn fft2_in_place(
    data: &mut [Complex<f64>],
    shape: [usize; 2],
    fft0: &Arc<dyn Fft<f64>>,
    fft1: Option<&dyn Fft<f64>>,
) {
    let [p0, p1] = shape;
    if let Some(f1) = fft1 {
        for r in 0..p0 {
            f1.process(&mut data[r * p1..(r + 1) * p1]);
        }
        let mut col = vec![Complex::new(0.0, 0.0); p0];
        for c in 0..p1 {
            for r in 0..p0 {
                col[r] = data[r * p1 + c];
            }
            fft0.process(&mut col);
            for r in 0..p0 {
                data[r * p1 + c] = col[r];
            }
        }
    } else {
        fft0.process(data);
    }
}

fn convolve_with(plan: &ConvPlan, shape: [usize; 2], f: &[f64]) -> Vec<f64> {
    let [n0, n1] = shape;
    let [p0, p1] = plan.padded;
    let mut buf = vec![Complex::new(0.0, 0.0); p0 * p1];
    for i in 0..n0 {
        for j in 0..n1 {
            buf[i * p1 + j] = Complex::new(f[i * n1 + j], 0.0);
        }
    }
    fft2_in_place(&mut buf, plan.padded, &plan.fwd, plan.fwd1.as_deref());
    for (b, s) in buf.iter_mut().zip(&plan.spectrum) {
        *b *= s;
    }
    fft2_in_place(&mut buf, plan.padded, &plan.inv, plan.inv1.as_deref());
    let mut out = vec![0.0; n0 * n1];
    for i in 0..n0 {
        for j in 0..n1 {
            out[i * n1 + j] = buf[i * p1 + j].re;
        }
    }
    out
}

/// Extrema of `a(x)` on a `refine`-times finer grid, each value from a
/// refined midpoint quadrature (computed with an FFT convolution of ones on
/// the fine grid).
fn refined_a_extrema(
    eval: &SampledKernel,
    sp: &SpectralSpace,
    refine: usize,
) -> (f64, f64, Vec<f64>) {
    let [n0, n1] = sp.shape();
    let fine = if sp.dims() == 1 {
        SpectralSpace::new_1d(n0 * refine, sp.lengths()[0]).unwrap()
    } else {
        SpectralSpace::new_2d([n0 * refine, n1 * refine], sp.lengths()).unwrap()
    };
    let sampled = sample_difference_grid(eval, &fine);
    let plan = make_plan(&sampled, &fine).unwrap();
    let ones = vec![1.0; fine.len()];
    let a = convolve_with(&plan, fine.shape(), &ones);
    let mut a0 = f64::INFINITY;
    let mut a_star = f64::NEG_INFINITY;
    let mut worst = 0usize;
    for (i, &v) in a.iter().enumerate() {
        if v < a0 {
            a0 = v;
            worst = i;
        }
        a_star = a_star.max(v);
    }
    (a0, a_star, fine.node(worst)[..sp.dims()].to_vec())
}

/// Literal `integral over Omega of |J(z)| dz` on a refined grid.
fn domain_l1(eval: &SampledKernel, sp: &SpectralSpace, refine: usize) -> f64 {
    let [n0, n1] = sp.shape();
    let dims = sp.dims();
    let m0 = n0 * refine;
    let m1 = if dims == 2 { n1 * refine } else { 1 };
    let h0 = sp.lengths()[0] / m0 as f64;
    let h1 = sp.lengths()[1] / m1 as f64;
    let mut acc = 0.0;
    for i in 0..m0 {
        let x0 = (i as f64 + 0.5) * h0;
        for j in 0..m1 {
            let z = if dims == 1 {
                vec![x0]
            } else {
                vec![x0, (j as f64 + 0.5) * h1]
            };
            acc += eval.eval(&z).abs();
        }
    }
    acc * if dims == 1 { h0 } else { h0 * h1 }
}

/// Parse a kernel table from CSV text with columns `offset,value`.
pub fn table_from_csv(text: &str) -> Result<KernelFamily> {
    let mut offsets = Vec::new();
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cols = line.split(',').map(str::trim);
        let off = cols
            .next()
            .and_then(|s| s.parse::<f64>().ok())
            .ok_or_else(|| Error::KernelTable(format!("line {}: bad offset", lineno + 1)))?;
        let val = cols
            .next()
            .and_then(|s| s.parse::<f64>().ok())
            .ok_or_else(|| Error::KernelTable(format!("line {}: bad value", lineno + 1)))?;
        if cols.next().is_some() {
            return Err(Error::KernelTable(format!(
                "line {}: expected two columns",
                lineno + 1
            )));
        }
        offsets.push(off);
        values.push(val);
    }
    if offsets.len() < 3 {
        return Err(Error::KernelTable("need at least 3 rows".into()));
    }
    if !offsets.windows(2).all(|w| w[1] > w[0]) {
        return Err(Error::KernelTable("offsets must be strictly increasing".into()));
    }
    Ok(KernelFamily::Table { offsets, values })
}

/// Serialize a table family back to CSV text.
pub fn table_to_csv(family: &KernelFamily) -> Option<String> {
    if let KernelFamily::Table { offsets, values } = family {
        let mut s = String::from("# offset,value\n");
        for (o, v) in offsets.iter().zip(values) {
            s.push_str(&format!("{:e},{:e}\n", o, v));
        }
        Some(s)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{mean, Norm};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use statrs::function::erf::erf;

    fn sp65() -> SpectralSpace {
        SpectralSpace::new_1d(65, 1.0).unwrap()
    }

    fn gaussian(sp: &SpectralSpace, sigma: f64, amp: f64) -> Kernel {
        Kernel::build(KernelFamily::Gaussian { sigma }, amp, sp).unwrap()
    }

    /// Direct O(N^2) quadrature of the truncated convolution.
    fn direct_convolve(k: &Kernel, sp: &SpectralSpace, f: &[f64]) -> Vec<f64> {
        let [n0, n1] = sp.shape();
        let m1 = 2 * n1 - 1;
        let mut out = vec![0.0; sp.len()];
        for i0 in 0..n0 {
            for i1 in 0..n1 {
                let mut acc = 0.0;
                for j0 in 0..n0 {
                    for j1 in 0..n1 {
                        let di = i0 as isize - j0 as isize + n0 as isize - 1;
                        let dj = i1 as isize - j1 as isize + n1 as isize - 1;
                        acc += k.sampled_values()[di as usize * m1 + dj as usize]
                            * f[j0 * n1 + j1];
                    }
                }
                out[i0 * n1 + i1] = acc * sp.cell();
            }
        }
        out
    }

    #[test]
    fn gaussian_a_center_matches_erf() {
        let sp = sp65();
        let sigma = 0.05;
        let k = gaussian(&sp, sigma, 1.0);
        // oracle: a(x) = (erf((L-x)/(sigma sqrt(2))) + erf(x/(sigma sqrt(2)))) / 2
        let idx = 32; // node at x = 0.5
        let x = sp.node(idx)[0];
        let s2 = sigma * 2.0_f64.sqrt();
        let want = 0.5 * (erf((1.0 - x) / s2) + erf(x / s2));
        assert!((k.a_field().values()[idx] - want).abs() < 1e-10);
        assert!((k.a_field().values()[idx] - k.c_j()).abs() < 1e-10);
        assert!((k.c_j() - 1.0).abs() < 1e-12);
        // d_J oracle: 2 * J(0) in 1D
        let want_dj = 2.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
        assert!((k.d_j() - want_dj).abs() < 1e-6 * want_dj);
    }

    #[test]
    fn mollifier_captures_full_mass_in_interior() {
        let sp = sp65();
        let r = 0.2;
        let k = Kernel::build(KernelFamily::Mollifier { radius: r }, 1.5, &sp).unwrap();
        for (i, &a) in k.a_field().values().iter().enumerate() {
            let x = sp.node(i)[0];
            if x > r + 0.01 && x < 1.0 - r - 0.01 {
                // quadrature-limited: midpoint rule on the bump at h = 1/65
                assert!(
                    (a - k.c_j()).abs() < 1e-4 * k.c_j(),
                    "a({x}) = {a} vs c_J = {}",
                    k.c_j()
                );
            }
        }
    }

    #[test]
    fn a0_attained_on_boundary() {
        let sp = sp65();
        let k = gaussian(&sp, 0.05, 1.0);
        let x = k.certify_h1().worst_point[0];
        assert!(x < 0.02 || x > 0.98, "worst point {x} not near the boundary");
        assert!(k.a0() > 0.0 && k.a0() < k.a_star());
    }

    #[test]
    fn convolve_constant_is_scaled_a() {
        let sp = sp65();
        let k = gaussian(&sp, 0.05, 1.0);
        let f = Field::constant(&sp, 0.7);
        let conv = k.convolve(&f).unwrap();
        for (c, a) in conv.values().iter().zip(k.a_field().values()) {
            assert!((c - 0.7 * a).abs() < 1e-11);
        }
    }

    #[test]
    fn convolve_matches_direct_quadrature_1d() {
        let sp = SpectralSpace::new_1d(33, 1.0).unwrap();
        let k = gaussian(&sp, 0.08, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let f: Vec<f64> = (0..sp.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let fast = k.convolve(&Field::from_values(f.clone())).unwrap();
        let slow = direct_convolve(&k, &sp, &f);
        let scale = slow.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for (a, b) in fast.values().iter().zip(&slow) {
            assert!((a - b).abs() <= 1e-10 * scale.max(1.0));
        }
    }

    #[test]
    fn convolve_matches_direct_quadrature_2d() {
        let sp = SpectralSpace::new_2d([17, 17], [1.0, 1.0]).unwrap();
        let k = Kernel::build(KernelFamily::Gaussian { sigma: 0.1 }, 1.0, &sp).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let f: Vec<f64> = (0..sp.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let fast = k.convolve(&Field::from_values(f.clone())).unwrap();
        let slow = direct_convolve(&k, &sp, &f);
        let scale = slow.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for (a, b) in fast.values().iter().zip(&slow) {
            assert!((a - b).abs() <= 1e-10 * scale.max(1.0));
        }
    }

    #[test]
    fn bilinear_form_is_symmetric_and_young_holds() {
        let sp = sp65();
        let k = gaussian(&sp, 0.05, 1.3);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..10 {
            let f = Field::from_values((0..sp.len()).map(|_| rng.random_range(-1.0..1.0)).collect());
            let g = Field::from_values((0..sp.len()).map(|_| rng.random_range(-1.0..1.0)).collect());
            let jf = k.convolve(&f).unwrap();
            let jg = k.convolve(&g).unwrap();
            let lhs = sp.inner(jf.values(), g.values());
            let rhs = sp.inner(f.values(), jg.values());
            assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0));
            let young = crate::spectral::norm(&jf, &sp, Norm::L2).unwrap()
                <= k.c_j() * crate::spectral::norm(&f, &sp, Norm::L2).unwrap() + 1e-10;
            assert!(young);
        }
    }

    #[test]
    fn a_field_is_convolution_of_ones() {
        let sp = sp65();
        let k = gaussian(&sp, 0.05, 2.0);
        let ones = Field::constant(&sp, 1.0);
        let conv = k.convolve(&ones).unwrap();
        for (a, c) in k.a_field().values().iter().zip(conv.values()) {
            assert_eq!(a, c);
        }
        // nonlocal term of a constant is exactly zero
        let q = k.nonlocal_term(&vec![0.37; sp.len()]);
        assert!(q.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn certify_h1_verdicts() {
        let sp = sp65();
        let good = gaussian(&sp, 0.05, 1.0).certify_h1();
        assert!(good.pass && good.a0 > 0.0);

        // odd table fails the symmetry check
        let offsets: Vec<f64> = (0..33).map(|i| -0.4 + 0.025 * i as f64).collect();
        let values: Vec<f64> = offsets.iter().map(|x| *x).collect();
        let odd = Kernel::build_unvalidated(
            KernelFamily::Table {
                offsets: offsets.clone(),
                values,
            },
            1.0,
            &sp,
        )
        .unwrap();
        let rep = odd.certify_h1();
        assert!(!rep.pass);
        assert!(rep.symmetry_residual > 1e-12);

        // zero table fails strict positivity
        let zeros = Kernel::build_unvalidated(
            KernelFamily::Table {
                offsets,
                values: vec![0.0; 33],
            },
            1.0,
            &sp,
        )
        .unwrap();
        let rep = zeros.certify_h1();
        assert!(!rep.pass);
        assert!(rep.failures.iter().any(|f| f.contains("a(x)")));
        assert!(Kernel::build(
            KernelFamily::Gaussian { sigma: 1e-4 },
            1.0,
            &sp
        )
        .is_err()); // under-resolved
    }

    #[test]
    fn csv_table_round_trip() {
        let fam = table_from_csv("# offset,value\n-0.1,0.5\n0.0,1.0\n0.1,0.5\n").unwrap();
        let text = table_to_csv(&fam).unwrap();
        let again = table_from_csv(&text).unwrap();
        match (fam, again) {
            (
                KernelFamily::Table { offsets: o1, values: v1 },
                KernelFamily::Table { offsets: o2, values: v2 },
            ) => {
                assert_eq!(o1, o2);
                assert_eq!(v1, v2);
            }
            _ => panic!("expected tables"),
        }
        assert!(table_from_csv("0.0,1.0\n").is_err());
    }

    #[test]
    fn constant_table_has_exact_a() {
        let sp = sp65();
        let offsets: Vec<f64> = (0..81).map(|i| -1.0 + 0.025 * i as f64).collect();
        let k = Kernel::build(
            KernelFamily::Table {
                offsets,
                values: vec![5.0; 81],
            },
            1.0,
            &sp,
        )
        .unwrap();
        // a(x) = 5 * |Omega| = 5 everywhere
        for &a in k.a_field().values() {
            assert!((a - 5.0).abs() < 1e-12);
        }
        assert!((k.a0() - 5.0).abs() < 1e-9);
        let f = Field::from_values((0..65).map(|i| (i as f64 * 0.1).sin()).collect());
        let conv = k.convolve(&f).unwrap();
        let m = mean(&f, &sp);
        for &c in conv.values() {
            assert!((c - 5.0 * m).abs() < 1e-12);
        }
    }
}
