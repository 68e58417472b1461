//! Time integration of the coupled relaxation system
//!
//! ```text
//! phi_t = Delta mu
//! mu    = a phi - J*phi + F'(phi) + alpha phi_t - delta theta
//! eps theta_t - Delta theta = -delta phi_t
//! ```
//!
//! with Neumann walls, by a first-order stabilized IMEX scheme. Eliminating
//! `mu` makes every implicit solve mode-diagonal:
//!
//! ```text
//! (1 + dt lambda_k S + alpha lambda_k) (phi_k^{n+1} - phi_k^n)
//!     = -dt lambda_k (w_k^n - delta theta_k^n),     w = a phi - J*phi + F'(phi)
//! (eps + dt lambda_k) theta_k^{n+1} = eps theta_k^n - delta (phi_k^{n+1} - phi_k^n)
//! ```
//!
//! The stabilization enters as the implicit difference `dt lambda S (phi^{n+1}
//! - phi^n)`, i.e. `F'` is split as `S phi + (F'(phi) - S phi)` with the first
//! half implicit. Mode zero is copied bit-for-bit in both equations, so the
//! means of `phi` and `theta` are conserved exactly, and constant states are
//! exact fixed points (the nonlocal term is evaluated on the mean-free part).

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::potential::Potential;
use crate::spectral::{Field, SpectralSpace};

/// Time discretization choices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    ImexStabilized,
    OracleRk4,
}

/// Model and scheme parameters for one run.
#[derive(Debug, Clone)]
pub struct Params {
    pub alpha: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub delta0: f64,
    pub dt: f64,
    pub t_end: f64,
    /// Initial stabilization constant; the runner raises it to the running
    /// Lipschitz bound of `F'`.
    pub stabilization: f64,
    pub scheme: Scheme,
    /// Phase-space cap on |<phi>| and |<theta>|.
    pub mean_cap: f64,
}

impl Params {
    pub fn validate(&self) -> Result<()> {
        let checks: [(&'static str, f64, bool, &'static str); 7] = [
            ("alpha", self.alpha, self.alpha > 0.0 && self.alpha <= 1.0, "in (0, 1]"),
            ("epsilon", self.epsilon, self.epsilon > 0.0 && self.epsilon <= 1.0, "in (0, 1]"),
            ("delta0", self.delta0, self.delta0 > 0.0, "> 0"),
            (
                "delta",
                self.delta,
                self.delta >= 0.0 && self.delta <= self.delta0,
                "in [0, delta0]",
            ),
            ("dt", self.dt, self.dt > 0.0, "> 0"),
            ("stabilization", self.stabilization, self.stabilization >= 0.0, ">= 0"),
            ("mean_cap", self.mean_cap, self.mean_cap >= 0.0, ">= 0"),
        ];
        for (name, value, ok, expected) in checks {
            if !ok {
                return Err(Error::BadParam { name, value, expected });
            }
        }
        Ok(())
    }
}

/// Pair state `(phi, theta)` with its conserved means.
#[derive(Debug, Clone)]
pub struct State {
    pub t: f64,
    pub step: usize,
    pub phi: Field,
    pub theta: Field,
    pub m0: f64,
    pub n0: f64,
}

impl State {
    /// Wrap initial data, checking the phase-space mean caps.
    pub fn new(
        sp: &SpectralSpace,
        phi_values: Vec<f64>,
        theta_values: Vec<f64>,
        params: &Params,
    ) -> Result<State> {
        let mut phi = Field::from_values(phi_values);
        let mut theta = Field::from_values(theta_values);
        phi.ensure_coeffs(sp)?;
        theta.ensure_coeffs(sp)?;
        let m0 = crate::spectral::mean(&phi, sp);
        let n0 = crate::spectral::mean(&theta, sp);
        if m0.abs() > params.mean_cap + 1e-12 {
            return Err(Error::MeanCapExceeded {
                which: "phi",
                mean: m0,
                cap: params.mean_cap,
            });
        }
        if n0.abs() > params.mean_cap + 1e-12 {
            return Err(Error::MeanCapExceeded {
                which: "theta",
                mean: n0,
                cap: params.mean_cap,
            });
        }
        Ok(State {
            t: 0.0,
            step: 0,
            phi,
            theta,
            m0,
            n0,
        })
    }

    pub fn phi_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &v in self.phi.values() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }
}

/// Chemical potential recovered from the elliptic problem
/// `mu - alpha Delta mu = a phi - J*phi + F'(phi) - delta theta`.
#[derive(Debug)]
pub struct ChemicalPotentialField {
    pub mu: Field,
    /// `rho = a(x) phi + F'(phi)`.
    pub rho: Field,
    pub mean_mu: f64,
}

/// Explicit part `w = a phi - J*phi + F'(phi)` on the grid.
fn explicit_w(phi: &Field, kernel: &Kernel, pot: &Potential) -> Vec<f64> {
    let mut w = kernel.nonlocal_term(phi.values());
    for (wi, s) in w.iter_mut().zip(phi.values()) {
        *wi += pot.f1(*s);
    }
    w
}

/// One IMEX step of the coupled system.
pub fn step_imex(
    state: &State,
    params: &Params,
    kernel: &Kernel,
    pot: &Potential,
    sp: &SpectralSpace,
    s_stab: f64,
) -> Result<State> {
    step_inner(
        state,
        params,
        kernel,
        pot,
        sp,
        s_stab,
        params.alpha,
        params.delta,
        true,
    )
}

/// One step of the isothermal viscous equation with viscosity `beta`
/// (`theta` is carried through untouched).
pub fn rescaled_viscous_ch_step(
    state: &State,
    beta: f64,
    params: &Params,
    kernel: &Kernel,
    pot: &Potential,
    sp: &SpectralSpace,
    s_stab: f64,
) -> Result<State> {
    step_inner(state, params, kernel, pot, sp, s_stab, beta, 0.0, false)
}

/// `beta = alpha / (1 + delta^2)`, the rescaled viscosity of the isothermal
/// limit equation.
pub fn beta_rescaled(alpha: f64, delta: f64) -> f64 {
    alpha / (1.0 + delta * delta)
}

#[allow(clippy::too_many_arguments)]
fn step_inner(
    state: &State,
    params: &Params,
    kernel: &Kernel,
    pot: &Potential,
    sp: &SpectralSpace,
    s_stab: f64,
    viscosity: f64,
    delta: f64,
    evolve_theta: bool,
) -> Result<State> {
    let dt = params.dt;
    let w = explicit_w(&state.phi, kernel, pot);
    if !w.iter().all(|v| v.is_finite()) {
        return Err(Error::BlowUp {
            t: state.t,
            step: state.step,
        });
    }
    let w_hat = sp.transform(&w)?;
    let phi_hat = state.phi.coeffs(sp)?;
    let theta_hat = state.theta.coeffs(sp)?;

    let lam = sp.eigenvalues();
    let mut phi_next = phi_hat.clone();
    let mut dphi = vec![0.0; phi_hat.len()];
    for k in 1..phi_hat.len() {
        let l = lam[k];
        let denom = 1.0 + dt * l * s_stab + viscosity * l;
        let d = -dt * l * (w_hat[k] - delta * theta_hat[k]) / denom;
        dphi[k] = d;
        phi_next[k] = phi_hat[k] + d;
    }
    // mode 0 untouched: exact conservation of <phi>

    let theta = if evolve_theta {
        let mut theta_next = theta_hat.clone();
        let eps = params.epsilon;
        for k in 1..theta_hat.len() {
            let l = lam[k];
            theta_next[k] = (eps * theta_hat[k] - delta * dphi[k]) / (eps + dt * l);
        }
        // mode 0 untouched: exact conservation of <theta>
        if !theta_next.iter().all(|v| v.is_finite()) {
            return Err(Error::BlowUp {
                t: state.t,
                step: state.step,
            });
        }
        Field::from_coeffs(theta_next, sp)?
    } else {
        state.theta.clone()
    };

    if !phi_next.iter().all(|v| v.is_finite()) {
        return Err(Error::BlowUp {
            t: state.t,
            step: state.step,
        });
    }
    let phi = Field::from_coeffs(phi_next, sp)?;
    Ok(State {
        t: state.t + dt,
        step: state.step + 1,
        phi,
        theta,
        m0: state.m0,
        n0: state.n0,
    })
}

/// Solve `mu - alpha Delta mu = a phi - J*phi + F'(phi) - delta theta` with
/// Neumann walls; mode-wise division by `1 + alpha lambda_k`.
pub fn recover_mu(
    state: &State,
    params: &Params,
    kernel: &Kernel,
    pot: &Potential,
    sp: &SpectralSpace,
) -> Result<ChemicalPotentialField> {
    let mut r = explicit_w(&state.phi, kernel, pot);
    for (ri, th) in r.iter_mut().zip(state.theta.values()) {
        *ri -= params.delta * th;
    }
    let mut mu_hat = sp.transform(&r)?;
    for (c, l) in mu_hat.iter_mut().zip(sp.eigenvalues()) {
        *c /= 1.0 + params.alpha * l;
    }
    let mean_mu = mu_hat[0] / sp.volume().sqrt();
    let mu = Field::from_coeffs(mu_hat, sp)?;
    let rho = Field::from_values(
        kernel
            .a_field()
            .values()
            .iter()
            .zip(state.phi.values())
            .map(|(a, s)| a * s + pot.f1(*s))
            .collect(),
    );
    Ok(ChemicalPotentialField { mu, rho, mean_mu })
}

/// Steady-state verdict from per-step update rates.
#[derive(Debug, Clone)]
pub struct SteadyDetection {
    /// Step index at which the 50-step window completed.
    pub step: usize,
    pub t: f64,
}

/// Scan `(||phi_t||, ||theta_t||)` rates; report once the combined rate stays
/// below `tol` for 50 consecutive steps.
pub fn detect_steady_state(rates: &[(f64, f64)], times: &[f64], tol: f64) -> Option<SteadyDetection> {
    const WINDOW: usize = 50;
    let mut run = 0usize;
    for (i, (rp, rt)) in rates.iter().enumerate() {
        if rp + rt < tol {
            run += 1;
            if run == WINDOW {
                return Some(SteadyDetection {
                    step: i + 1,
                    t: times[i],
                });
            }
        } else {
            run = 0;
        }
    }
    None
}
