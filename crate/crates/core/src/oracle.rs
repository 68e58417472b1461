//! Dense Galerkin-ODE reference integrator.
//!
//! The pair `(phi, theta)` is truncated to the first `n` cosine modes per
//! axis and integrated as an ODE system for the coefficients:
//!
//! ```text
//! (1 + alpha lambda_k) a_k' = -lambda_k (r_k - delta b_k),
//! eps b_k' = -lambda_k b_k - delta a_k',
//! r = P_n(a(x) phi - J*phi + F'(phi)),
//! ```
//!
//! with classical RK4 stepping. The nonlinear term is evaluated and projected
//! on a finer quadrature grid (at least 3n/2 nodes per axis), which is also
//! the grid all diagnostics for oracle runs live on; on that grid the
//! truncated system satisfies the energy equality exactly in continuous time,
//! so the recorded residual isolates the time-integration error.

use crate::dynamics::{Params, State};
use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::potential::Potential;
use crate::spectral::{Field, SpectralSpace};

/// Truncated spectral system bound to an evaluation grid.
pub struct OracleSystem<'a> {
    sp: &'a SpectralSpace,
    kernel: &'a Kernel,
    pot: &'a Potential,
    alpha: f64,
    epsilon: f64,
    delta: f64,
    /// Flat indices of the kept block inside the full coefficient array.
    block: Vec<usize>,
    /// Eigenvalues restricted to the block.
    lambda: Vec<f64>,
}

/// Coefficients of the truncated pair at one time.
#[derive(Debug, Clone)]
pub struct OracleState {
    pub t: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

/// Instantaneous quantities of the projected system at one state.
pub struct OracleRates {
    pub da: Vec<f64>,
    pub db: Vec<f64>,
    /// Coefficients of the projected chemical potential.
    pub mu_hat: Vec<f64>,
}

impl<'a> OracleSystem<'a> {
    pub fn new(
        sp: &'a SpectralSpace,
        kernel: &'a Kernel,
        pot: &'a Potential,
        params: &Params,
        n_modes: usize,
    ) -> Result<Self> {
        if n_modes > 16 {
            return Err(Error::OracleTooLarge { n: n_modes });
        }
        let needed = (3 * n_modes).div_ceil(2);
        for a in 0..sp.dims() {
            if sp.shape()[a] < needed {
                return Err(Error::OracleGridTooCoarse {
                    needed,
                    got: sp.shape()[a],
                });
            }
        }
        let n = if sp.dims() == 1 {
            [n_modes, 1]
        } else {
            [n_modes, n_modes]
        };
        let m1 = sp.shape()[1];
        let mut block = Vec::with_capacity(n[0] * n[1]);
        for k0 in 0..n[0] {
            for k1 in 0..n[1] {
                block.push(k0 * m1 + k1);
            }
        }
        let lambda = block.iter().map(|&i| sp.eigenvalues()[i]).collect();
        Ok(OracleSystem {
            sp,
            kernel,
            pot,
            alpha: params.alpha,
            epsilon: params.epsilon,
            delta: params.delta,
            block,
            lambda,
        })
    }

    pub fn modes(&self) -> usize {
        self.block.len()
    }

    pub fn space(&self) -> &SpectralSpace {
        self.sp
    }

    /// Project a grid state onto the kept modes.
    pub fn project(&self, state: &State) -> Result<OracleState> {
        let pc = state.phi.coeffs(self.sp)?;
        let tc = state.theta.coeffs(self.sp)?;
        Ok(OracleState {
            t: state.t,
            a: self.block.iter().map(|&i| pc[i]).collect(),
            b: self.block.iter().map(|&i| tc[i]).collect(),
        })
    }

    /// Materialize the truncated coefficients as a grid state.
    pub fn to_state(&self, st: &OracleState, params: &Params) -> Result<State> {
        let mut pc = vec![0.0; self.sp.len()];
        let mut tc = vec![0.0; self.sp.len()];
        for (j, &i) in self.block.iter().enumerate() {
            pc[i] = st.a[j];
            tc[i] = st.b[j];
        }
        let phi = Field::from_coeffs(pc, self.sp)?;
        let theta = Field::from_coeffs(tc, self.sp)?;
        let _ = params;
        Ok(State {
            t: st.t,
            step: 0,
            phi,
            theta,
            m0: st.a[0] / self.sp.volume().sqrt(),
            n0: st.b[0] / self.sp.volume().sqrt(),
        })
    }

    /// Right-hand side of the projected system, with the dealiased-grid
    /// Galerkin projection of the nonlinearity.
    pub fn rates(&self, a: &[f64], b: &[f64]) -> Result<OracleRates> {
        let mut full = vec![0.0; self.sp.len()];
        for (j, &i) in self.block.iter().enumerate() {
            full[i] = a[j];
        }
        let phi_vals = self.sp.inverse(&full)?;
        let mut w = self.kernel.nonlocal_term(&phi_vals);
        for (wi, s) in w.iter_mut().zip(&phi_vals) {
            *wi += self.pot.f1(*s);
        }
        let w_hat = self.sp.transform(&w)?;
        let m = self.block.len();
        let mut da = vec![0.0; m];
        let mut db = vec![0.0; m];
        let mut mu_hat = vec![0.0; m];
        for j in 0..m {
            let l = self.lambda[j];
            let r = w_hat[self.block[j]];
            let d = -l * (r - self.delta * b[j]) / (1.0 + self.alpha * l);
            da[j] = d;
            db[j] = (-l * b[j] - self.delta * d) / self.epsilon;
            mu_hat[j] = if l == 0.0 {
                r - self.delta * b[j]
            } else {
                -d / l
            };
        }
        Ok(OracleRates { da, db, mu_hat })
    }

    /// One classical RK4 step.
    pub fn rk4_step(&self, st: &OracleState, dt: f64) -> Result<OracleState> {
        let m = st.a.len();
        let stage = |a0: &[f64], b0: &[f64], da: &[f64], db: &[f64], h: f64| {
            let a: Vec<f64> = a0.iter().zip(da).map(|(x, d)| x + h * d).collect();
            let b: Vec<f64> = b0.iter().zip(db).map(|(x, d)| x + h * d).collect();
            (a, b)
        };
        let k1 = self.rates(&st.a, &st.b)?;
        let (a2, b2) = stage(&st.a, &st.b, &k1.da, &k1.db, 0.5 * dt);
        let k2 = self.rates(&a2, &b2)?;
        let (a3, b3) = stage(&st.a, &st.b, &k2.da, &k2.db, 0.5 * dt);
        let k3 = self.rates(&a3, &b3)?;
        let (a4, b4) = stage(&st.a, &st.b, &k3.da, &k3.db, dt);
        let k4 = self.rates(&a4, &b4)?;
        let mut a = st.a.clone();
        let mut b = st.b.clone();
        for j in 0..m {
            a[j] += dt / 6.0 * (k1.da[j] + 2.0 * k2.da[j] + 2.0 * k3.da[j] + k4.da[j]);
            b[j] += dt / 6.0 * (k1.db[j] + 2.0 * k2.db[j] + 2.0 * k3.db[j] + k4.db[j]);
        }
        if !a.iter().chain(b.iter()).all(|v| v.is_finite()) {
            return Err(Error::OracleStiff { t: st.t });
        }
        Ok(OracleState {
            t: st.t + dt,
            a,
            b,
        })
    }

    /// Fields for one ledger row, `(phi_t, theta_t, mu)`, from the
    /// instantaneous rates rather than finite differences.
    pub fn row_fields(&self, st: &OracleState) -> Result<(Field, Field, Field)> {
        let r = self.rates(&st.a, &st.b)?;
        let mut dphi = vec![0.0; self.sp.len()];
        let mut dtheta = vec![0.0; self.sp.len()];
        let mut mu = vec![0.0; self.sp.len()];
        for (j, &i) in self.block.iter().enumerate() {
            dphi[i] = r.da[j];
            dtheta[i] = r.db[j];
            mu[i] = r.mu_hat[j];
        }
        Ok((
            Field::from_coeffs(dphi, self.sp)?,
            Field::from_coeffs(dtheta, self.sp)?,
            Field::from_coeffs(mu, self.sp)?,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Scheme;
    use crate::kernel::KernelFamily;

    fn setup(n_grid: usize) -> (SpectralSpace, Kernel, Potential, Params) {
        let sp = SpectralSpace::new_1d(n_grid, 1.0).unwrap();
        let k = Kernel::build(KernelFamily::Gaussian { sigma: 0.12 }, 1.0, &sp).unwrap();
        let pot = Potential::double_well(0.1);
        let params = Params {
            alpha: 0.1,
            epsilon: 0.5,
            delta: 0.1,
            delta0: 0.5,
            dt: 1e-5,
            t_end: 0.1,
            stabilization: 5.0,
            scheme: Scheme::OracleRk4,
            mean_cap: 1.0,
        };
        (sp, k, pot, params)
    }

    #[test]
    fn constant_data_gives_constant_trajectory() {
        let (sp, k, pot, params) = setup(12);
        let sys = OracleSystem::new(&sp, &k, &pot, &params, 8).unwrap();
        let s0 = State::new(&sp, vec![0.25; sp.len()], vec![0.1; sp.len()], &params).unwrap();
        let mut st = sys.project(&s0).unwrap();
        let a0 = st.a.clone();
        let b0 = st.b.clone();
        for _ in 0..50 {
            st = sys.rk4_step(&st, 1e-3).unwrap();
        }
        assert_eq!(st.a, a0);
        assert_eq!(st.b, b0);
    }

    #[test]
    fn heat_mode_matches_exponential_decay() {
        let (sp, k, pot, mut params) = setup(12);
        params.delta = 0.0;
        let sys = OracleSystem::new(&sp, &k, &pot, &params, 8).unwrap();
        let pi = std::f64::consts::PI;
        let theta0: Vec<f64> = (0..sp.len()).map(|j| (pi * sp.node(j)[0]).cos()).collect();
        let s0 = State::new(&sp, vec![0.0; sp.len()], theta0, &params).unwrap();
        let mut st = sys.project(&s0).unwrap();
        let c0 = st.b[1];
        let lam1 = sp.eigenvalues()[1];
        let dt = 1e-6;
        let n = 20_000;
        for _ in 0..n {
            st = sys.rk4_step(&st, dt).unwrap();
        }
        let exact = c0 * (-lam1 * dt * n as f64 / params.epsilon).exp();
        assert!(
            (st.b[1] - exact).abs() < 1e-8 * exact.abs().max(1.0),
            "got {}, want {}",
            st.b[1],
            exact
        );
    }

    #[test]
    fn truncation_and_grid_are_validated() {
        let (sp, k, pot, params) = setup(12);
        assert!(OracleSystem::new(&sp, &k, &pot, &params, 17).is_err());
        assert!(OracleSystem::new(&sp, &k, &pot, &params, 9).is_err()); // needs 14 nodes
        assert!(OracleSystem::new(&sp, &k, &pot, &params, 8).is_ok());
    }
}
