//! Neumann cosine basis on a 1D or 2D box.
//!
//! The box `Omega` is a product of intervals `[0, L_a]` sampled at midpoint
//! collocation nodes `x_j = (j + 1/2) h`, `h = L/n`. On those nodes the
//! eigenfunctions of the Neumann Laplacian,
//!
//! ```text
//! psi_0(x) = 1/sqrt(L),    psi_k(x) = sqrt(2/L) cos(k pi x / L),
//! lambda_k = (k pi / L)^2,
//! ```
//!
//! are exactly orthonormal with respect to the midpoint quadrature
//! `h * sum_j`, so the forward transform is the orthonormal DCT-II, Parseval
//! is a discrete identity, and the mode-0 coefficient is `<f> * sqrt(|Omega|)`.
//!
//! Forward transforms subtract the first sample before projecting onto the
//! nonconstant modes; this keeps `transform(const)` exactly supported on mode
//! zero, which the steppers rely on for bit-level conservation and exact
//! fixed points.

use crate::error::{Error, Result};

/// Which norm of the functional framework to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    /// Plain `L^2(Omega)` norm.
    L2,
    /// `V = H^1` norm squared convention: `||grad f||^2 + <f>^2`.
    V,
    /// Dual norm: `sum_{k!=0} |f_k|^2 / lambda_k + <f>^2`.
    VDual,
    /// `H^2` seminorm `||Delta f|| = (sum lambda_k^2 |f_k|^2)^{1/2}`.
    H2Semi,
}

struct AxisBasis {
    n: usize,
    sqrt_len: f64,
    /// forward[k*n + j] = h * psi_k(x_j), rows k >= 1 only are used.
    forward: Vec<f64>,
    /// inverse[j*n + k] = psi_k(x_j), columns k >= 1 only are used.
    inverse: Vec<f64>,
}

impl AxisBasis {
    fn new(n: usize, len: f64) -> Self {
        let h = len / n as f64;
        let amp = (2.0 / len).sqrt();
        let mut forward = vec![0.0; n * n];
        let mut inverse = vec![0.0; n * n];
        for k in 1..n {
            for j in 0..n {
                let phase = std::f64::consts::PI * k as f64 * (j as f64 + 0.5) / n as f64;
                let psi = amp * phase.cos();
                forward[k * n + j] = h * psi;
                inverse[j * n + k] = psi;
            }
        }
        AxisBasis {
            n,
            sqrt_len: len.sqrt(),
            forward,
            inverse,
        }
    }

    /// DCT-II of one slice; mode 0 via the exact running mean of (f - f[0]).
    fn forward_slice(&self, f: &[f64], out: &mut [f64]) {
        let n = self.n;
        let f0 = f[0];
        let mut acc = 0.0;
        for &v in f {
            acc += v - f0;
        }
        let mean = f0 + acc / n as f64;
        out[0] = mean * self.sqrt_len;
        for k in 1..n {
            let row = &self.forward[k * n..(k + 1) * n];
            let mut c = 0.0;
            for j in 0..n {
                c += row[j] * (f[j] - f0);
            }
            out[k] = c;
        }
    }

    fn inverse_slice(&self, c: &[f64], out: &mut [f64]) {
        let n = self.n;
        let base = c[0] / self.sqrt_len;
        for j in 0..n {
            let row = &self.inverse[j * n..(j + 1) * n];
            let mut v = base;
            for k in 1..n {
                v += row[k] * c[k];
            }
            out[j] = v;
        }
    }
}

/// Immutable geometry + basis data for a box with Neumann cosine modes.
pub struct SpectralSpace {
    dims: usize,
    n: [usize; 2],
    lengths: [f64; 2],
    volume: f64,
    /// Quadrature weight of one grid cell, `|Omega| / #points`.
    cell: f64,
    /// Neumann-Laplace eigenvalue per tensor mode, same layout as fields.
    eigenvalues: Vec<f64>,
    /// First nonzero eigenvalue and the Poincare constant 1/lambda_1.
    lambda_first: f64,
    lambda_omega: f64,
    axes: [AxisBasis; 2],
}

impl SpectralSpace {
    pub fn new_1d(n: usize, length: f64) -> Result<Self> {
        Self::new(1, [n, 1], [length, 1.0])
    }

    pub fn new_2d(n: [usize; 2], lengths: [f64; 2]) -> Result<Self> {
        Self::new(2, n, lengths)
    }

    fn new(dims: usize, n: [usize; 2], lengths: [f64; 2]) -> Result<Self> {
        if dims < 1 || dims > 2 {
            return Err(Error::UnsupportedDims(dims));
        }
        for a in 0..dims {
            if n[a] < 2 {
                return Err(Error::BadParam {
                    name: "n_modes",
                    value: n[a] as f64,
                    expected: ">= 2 per axis",
                });
            }
            if !(lengths[a] > 0.0) {
                return Err(Error::BadParam {
                    name: "length",
                    value: lengths[a],
                    expected: "> 0",
                });
            }
        }
        let (n, lengths) = if dims == 1 {
            ([n[0], 1], [lengths[0], 1.0])
        } else {
            (n, lengths)
        };
        let volume: f64 = (0..dims).map(|a| lengths[a]).product();
        let total = n[0] * n[1];
        let mut eigenvalues = vec![0.0; total];
        let axis_lambda = |a: usize, k: usize| -> f64 {
            let w = k as f64 * std::f64::consts::PI / lengths[a];
            w * w
        };
        for k0 in 0..n[0] {
            for k1 in 0..n[1] {
                eigenvalues[k0 * n[1] + k1] = axis_lambda(0, k0)
                    + if dims == 2 { axis_lambda(1, k1) } else { 0.0 };
            }
        }
        let lambda_first = (0..dims)
            .map(|a| axis_lambda(a, 1))
            .fold(f64::INFINITY, f64::min);
        let axes = [
            AxisBasis::new(n[0], lengths[0]),
            AxisBasis::new(n[1], lengths[1]),
        ];
        Ok(SpectralSpace {
            dims,
            n,
            lengths,
            volume,
            cell: volume / total as f64,
            eigenvalues,
            lambda_first,
            lambda_omega: 1.0 / lambda_first,
            axes,
        })
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn shape(&self) -> [usize; 2] {
        self.n
    }

    pub fn lengths(&self) -> [f64; 2] {
        self.lengths
    }

    pub fn len(&self) -> usize {
        self.n[0] * self.n[1]
    }

    pub fn volume(&self) -> f64 {
        self.volume
    }

    /// Quadrature weight per node; `integrate f = cell * sum f_j`.
    pub fn cell(&self) -> f64 {
        self.cell
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn lambda_first_nonzero(&self) -> f64 {
        self.lambda_first
    }

    /// Poincare-Wirtinger constant, exactly 1 / lambda_first_nonzero.
    pub fn lambda_omega(&self) -> f64 {
        self.lambda_omega
    }

    /// Grid coordinates of node `idx`.
    pub fn node(&self, idx: usize) -> [f64; 2] {
        let (i0, i1) = (idx / self.n[1], idx % self.n[1]);
        let x = |a: usize, i: usize| (i as f64 + 0.5) * self.lengths[a] / self.n[a] as f64;
        [x(0, i0), if self.dims == 2 { x(1, i1) } else { 0.0 }]
    }

    fn check_len(&self, m: usize) -> Result<()> {
        if m != self.len() {
            return Err(Error::SizeMismatch {
                expected: self.len(),
                got: m,
            });
        }
        Ok(())
    }

    /// Forward transform into the orthonormal cosine basis.
    pub fn transform(&self, values: &[f64]) -> Result<Vec<f64>> {
        self.check_len(values.len())?;
        let mut out = values.to_vec();
        self.apply_axis(&mut out, true);
        Ok(out)
    }

    /// Inverse transform back to grid values.
    pub fn inverse(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        self.check_len(coeffs.len())?;
        let mut out = coeffs.to_vec();
        self.apply_axis(&mut out, false);
        Ok(out)
    }

    fn apply_axis(&self, data: &mut [f64], forward: bool) {
        let [n0, n1] = self.n;
        let mut scratch_in = vec![0.0; n0.max(n1)];
        let mut scratch_out = vec![0.0; n0.max(n1)];
        // axis 1 (contiguous rows)
        if self.dims == 2 || n1 > 1 {
            let ax = &self.axes[1];
            for r in 0..n0 {
                let row = &mut data[r * n1..(r + 1) * n1];
                if forward {
                    ax.forward_slice(row, &mut scratch_out[..n1]);
                } else {
                    ax.inverse_slice(row, &mut scratch_out[..n1]);
                }
                row.copy_from_slice(&scratch_out[..n1]);
            }
        }
        // axis 0 (strided columns)
        let ax = &self.axes[0];
        for c in 0..n1 {
            for r in 0..n0 {
                scratch_in[r] = data[r * n1 + c];
            }
            if forward {
                ax.forward_slice(&scratch_in[..n0], &mut scratch_out[..n0]);
            } else {
                ax.inverse_slice(&scratch_in[..n0], &mut scratch_out[..n0]);
            }
            for r in 0..n0 {
                data[r * n1 + c] = scratch_out[r];
            }
        }
    }

    /// Average over the box; exact for the cosine quadrature and bit-exact on
    /// constant fields.
    pub fn mean_values(&self, values: &[f64]) -> f64 {
        let f0 = values[0];
        let mut acc = 0.0;
        for &v in values {
            acc += v - f0;
        }
        f0 + acc / values.len() as f64
    }

    /// `integral of f over Omega`.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.cell * values.iter().sum::<f64>()
    }

    /// Discrete `L^2` inner product.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.cell * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()
    }
}

/// Grid function with an optional cached coefficient vector.
#[derive(Debug, Clone)]
pub struct Field {
    values: Vec<f64>,
    coeffs: Option<Vec<f64>>,
}

impl Field {
    pub fn from_values(values: Vec<f64>) -> Self {
        Field {
            values,
            coeffs: None,
        }
    }

    pub fn constant(sp: &SpectralSpace, value: f64) -> Self {
        Field::from_values(vec![value; sp.len()])
    }

    pub fn from_coeffs(coeffs: Vec<f64>, sp: &SpectralSpace) -> Result<Self> {
        let values = sp.inverse(&coeffs)?;
        Ok(Field {
            values,
            coeffs: Some(coeffs),
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Mutable access drops the cache.
    pub fn values_mut(&mut self) -> &mut Vec<f64> {
        self.coeffs = None;
        &mut self.values
    }

    pub fn cached_coeffs(&self) -> Option<&[f64]> {
        self.coeffs.as_deref()
    }

    /// Coefficients in the orthonormal basis, from cache or computed fresh.
    pub fn coeffs(&self, sp: &SpectralSpace) -> Result<Vec<f64>> {
        match &self.coeffs {
            Some(c) => Ok(c.clone()),
            None => sp.transform(&self.values),
        }
    }

    /// Compute and store the coefficient cache.
    pub fn ensure_coeffs(&mut self, sp: &SpectralSpace) -> Result<&[f64]> {
        if self.coeffs.is_none() {
            self.coeffs = Some(sp.transform(&self.values)?);
        }
        Ok(self.coeffs.as_deref().unwrap())
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Mean via the mode-0 coefficient when cached, otherwise from values.
pub fn mean(f: &Field, sp: &SpectralSpace) -> f64 {
    match f.cached_coeffs() {
        Some(c) => c[0] / sp.volume().sqrt(),
        None => sp.mean_values(f.values()),
    }
}

/// `-Delta f` applied mode-wise.
pub fn apply_an(f: &Field, sp: &SpectralSpace) -> Result<Field> {
    let mut c = f.coeffs(sp)?;
    for (ck, lk) in c.iter_mut().zip(sp.eigenvalues()) {
        *ck *= lk;
    }
    Field::from_coeffs(c, sp)
}

/// Zero-mean solution of `-Delta g = f` for zero-mean `f` (the inverse
/// Neumann-Laplace map restricted to the mean-free subspace).
pub fn solve_inverse_an(f: &Field, sp: &SpectralSpace) -> Result<Field> {
    let mut c = f.coeffs(sp)?;
    let m = c[0] / sp.volume().sqrt();
    if m.abs() > 1e-10 {
        return Err(Error::NonzeroMean {
            mean: m,
            tol: 1e-10,
        });
    }
    c[0] = 0.0;
    for (ck, lk) in c.iter_mut().zip(sp.eigenvalues()).skip(1) {
        *ck /= lk;
    }
    Field::from_coeffs(c, sp)
}

/// Norm of `f` in the requested space; see [`Norm`] for conventions.
pub fn norm(f: &Field, sp: &SpectralSpace, kind: Norm) -> Result<f64> {
    let c = f.coeffs(sp)?;
    Ok(norm_from_coeffs(&c, sp, kind))
}

pub fn norm_from_coeffs(c: &[f64], sp: &SpectralSpace, kind: Norm) -> f64 {
    let lam = sp.eigenvalues();
    let mean_sq = c[0] * c[0] / sp.volume();
    let sq = match kind {
        Norm::L2 => c.iter().map(|x| x * x).sum::<f64>(),
        Norm::V => {
            mean_sq
                + c.iter()
                    .zip(lam)
                    .skip(1)
                    .map(|(x, l)| l * x * x)
                    .sum::<f64>()
        }
        Norm::VDual => {
            mean_sq
                + c.iter()
                    .zip(lam)
                    .skip(1)
                    .map(|(x, l)| x * x / l)
                    .sum::<f64>()
        }
        Norm::H2Semi => c
            .iter()
            .zip(lam)
            .map(|(x, l)| l * l * x * x)
            .sum::<f64>(),
    };
    sq.max(0.0).sqrt()
}

/// `||grad f||^2 = sum lambda_k f_k^2`, the Dirichlet part of the V norm.
pub fn grad_norm_sq(c: &[f64], sp: &SpectralSpace) -> f64 {
    c.iter()
        .zip(sp.eigenvalues())
        .map(|(x, l)| l * x * x)
        .sum()
}
