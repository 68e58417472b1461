//! Monitored quantities of the flow: the free energy, the energy-equality
//! residual, the Lyapunov functional with its decay fit, the continuous
//! dependence inequality, and the regularization monitors, all collected in
//! a per-run [`EnergyLedger`].
//!
//! Conventions: `phi_t` for IMEX runs is the scheme's forward difference, so
//! the residual is a pure scheme-consistency measure; oracle runs record the
//! instantaneous ODE rates instead. Time integrals use the trapezoid rule on
//! per-row quantities and assign interval quantities to their interval.

use std::fmt::Write as _;

use crate::dynamics::{Params, State};
use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::potential::{Certificate, Potential};
use crate::spectral::{norm_from_coeffs, Field, Norm, SpectralSpace};

/// Free energy
/// `E_eps = 1/4 iint J (phi(x)-phi(y))^2 + int F(phi) + eps/2 int theta^2`,
/// evaluated through one convolution as `1/2 (phi, a phi - J*phi) + ...`.
pub fn energy_eps(
    state: &State,
    epsilon: f64,
    kernel: &Kernel,
    pot: &Potential,
    sp: &SpectralSpace,
) -> f64 {
    let q = kernel.nonlocal_term(state.phi.values());
    let nonlocal = 0.5 * sp.inner(state.phi.values(), &q);
    let f_int = sp.cell()
        * state
            .phi
            .values()
            .iter()
            .map(|s| pot.f(*s))
            .sum::<f64>();
    let theta_sq = sp.cell()
        * state
            .theta
            .values()
            .iter()
            .map(|v| v * v)
            .sum::<f64>();
    nonlocal + f_int + 0.5 * epsilon * theta_sq
}

/// Certified lower bound on the free energy,
/// `(c1 - c_J/2) ||phi||^2 - c2 |Omega| + eps/2 ||theta||^2`.
pub fn energy_lower_bound(
    cert: &Certificate,
    epsilon: f64,
    phi_l2_sq: f64,
    theta_l2_sq: f64,
    volume: f64,
) -> f64 {
    (cert.h3.c1 - 0.5 * cert.c_j) * phi_l2_sq - cert.h3.c2 * volume + 0.5 * epsilon * theta_l2_sq
}

/// Lyapunov functional
/// `E = xi ||phi_hat||_{V'}^2 + xi alpha ||phi_hat||^2 + ||sqrt(a) phi||^2
///    + eps ||theta_hat||^2 + 2 (F(phi), 1) - (J*phi, phi_hat) + C_F`
/// with fluctuations taken about the conserved initial means.
#[allow(clippy::too_many_arguments)]
pub fn lyapunov_e(
    state: &State,
    params: &Params,
    kernel: &Kernel,
    pot: &Potential,
    sp: &SpectralSpace,
    xi: f64,
    c_f: f64,
) -> Result<f64> {
    let vol_sqrt = sp.volume().sqrt();
    let mut hat_coeffs = state.phi.coeffs(sp)?;
    hat_coeffs[0] -= state.m0 * vol_sqrt;
    let vdual = norm_from_coeffs(&hat_coeffs, sp, Norm::VDual);
    let hat_phi: Vec<f64> = state.phi.values().iter().map(|v| v - state.m0).collect();
    let hat_phi_sq = sp.cell() * hat_phi.iter().map(|v| v * v).sum::<f64>();
    let sqrt_a_phi_sq = sp.cell()
        * kernel
            .a_field()
            .values()
            .iter()
            .zip(state.phi.values())
            .map(|(a, s)| a * s * s)
            .sum::<f64>();
    let hat_theta_sq = sp.cell()
        * state
            .theta
            .values()
            .iter()
            .map(|v| (v - state.n0) * (v - state.n0))
            .sum::<f64>();
    let f_int = sp.cell() * state.phi.values().iter().map(|s| pot.f(*s)).sum::<f64>();
    let conv = kernel.convolve(&state.phi)?;
    let j_phi_hat = sp.inner(conv.values(), &hat_phi);
    let e = xi * vdual * vdual
        + xi * params.alpha * hat_phi_sq
        + sqrt_a_phi_sq
        + params.epsilon * hat_theta_sq
        + 2.0 * f_int
        - j_phi_hat
        + c_f;
    if e < 0.0 {
        return Err(Error::LyapunovNegative { t: state.t, value: e });
    }
    Ok(e)
}

/// Default `C_F` sizing so the Lyapunov functional stays nonnegative on the
/// phase space with mean cap `m`: absorbs `2 c2 |Omega|` plus the
/// mean-coupling cross terms.
pub fn c_f_auto(cert: &Certificate, mean_cap: f64, volume: f64) -> f64 {
    2.0 * cert.h3.c2.max(0.0) * volume
        + 0.5 * mean_cap * mean_cap * cert.a_star * cert.a_star * volume
        + 1.0
}

/// Bound on |<mu>| assembled from certified constants: needs (H4).
pub fn mean_mu_bound(
    cert: &Certificate,
    params: &Params,
    volume: f64,
    phi_l2: f64,
    f_l1: f64,
    phi_t_l2: f64,
    theta_l2: f64,
) -> f64 {
    match &cert.h4.witness {
        Some((_, c3, c4)) => {
            let vs = volume.sqrt();
            2.0 * cert.c_j / vs * phi_l2
                + c3 / volume * f_l1
                + c4 * volume
                + params.alpha / vs * phi_t_l2
                + params.delta0 / vs * theta_l2
        }
        None => f64::NAN,
    }
}

/// One recorded step of a run.
#[derive(Debug, Clone)]
pub struct LedgerRow {
    pub step: usize,
    pub t: f64,
    pub e_eps: f64,
    pub e_lyap: f64,
    pub residual: f64,
    pub grad_mu_sq: f64,
    pub alpha_phi_t_sq: f64,
    pub grad_theta_sq: f64,
    /// Cumulative dissipation integral up to this row.
    pub diss_cum: f64,
    pub phi_t_vdual: f64,
    pub theta_v: f64,
    /// `alpha ||Delta mu||^2 + ||mu||_V^2`.
    pub mu_h2: f64,
    /// `||phi||^2 + alpha ||phi||_V^2 + eps ||theta||_V^2`.
    pub vnorm: f64,
    pub mean_mu: f64,
    pub mean_mu_bound: f64,
    pub phi_mean: f64,
    pub theta_mean: f64,
    pub phi_t_l2: f64,
    pub theta_t_l2: f64,
    pub phi_min: f64,
    pub phi_max: f64,
    pub s_stab: f64,
}

/// Run constants echoed into the CSV header.
#[derive(Debug, Clone)]
pub struct LedgerHeader {
    pub alpha: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub delta0: f64,
    pub dt: f64,
    pub xi: f64,
    pub c_f: f64,
    pub m0: f64,
    pub n0: f64,
    pub cert_line: String,
}

/// Whether rate columns hold forward differences or instantaneous rates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateMode {
    ForwardDifference,
    Instantaneous,
}

/// Time series of [`LedgerRow`]s plus the accumulation state.
pub struct EnergyLedger {
    pub header: LedgerHeader,
    pub rows: Vec<LedgerRow>,
    pub rate_mode: RateMode,
    e0: Option<f64>,
    diss_cum: f64,
}

pub const LEDGER_COLUMNS: &str = "step,t,e_eps,e_lyap,residual,grad_mu_sq,alpha_phi_t_sq,grad_theta_sq,diss_cum,phi_t_vdual,theta_v,mu_h2,vnorm,mean_mu,mean_mu_bound,phi_mean,theta_mean,phi_t_l2,theta_t_l2,phi_min,phi_max,s_stab";

impl EnergyLedger {
    pub fn new(header: LedgerHeader, rate_mode: RateMode) -> Self {
        EnergyLedger {
            header,
            rows: Vec::new(),
            rate_mode,
            e0: None,
            diss_cum: 0.0,
        }
    }

    pub fn e0(&self) -> Option<f64> {
        self.e0
    }

    pub fn max_abs_residual(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.residual.abs())
            .fold(0.0, f64::max)
    }

    /// Update-rate pairs `(||phi_t||, ||theta_t||)` for steady-state
    /// detection; forward-difference mode skips the trailing pending row.
    pub fn rate_series(&self) -> (Vec<(f64, f64)>, Vec<f64>) {
        let take = match self.rate_mode {
            RateMode::ForwardDifference => self.rows.len().saturating_sub(1),
            RateMode::Instantaneous => self.rows.len(),
        };
        let rates = self.rows[..take]
            .iter()
            .map(|r| (r.phi_t_l2, r.theta_t_l2))
            .collect();
        let times = match self.rate_mode {
            // rate at row k describes the step landing at row k+1
            RateMode::ForwardDifference => self.rows[1..].iter().map(|r| r.t).collect(),
            RateMode::Instantaneous => self.rows[..take].iter().map(|r| r.t).collect(),
        };
        (rates, times)
    }

    /// Push a fully formed row, wiring the residual and the cumulative
    /// dissipation integral.
    #[allow(clippy::too_many_arguments)]
    fn push_row(&mut self, mut row: LedgerRow) {
        match self.e0 {
            None => {
                self.e0 = Some(row.e_eps);
                row.residual = 0.0; // by construction at t = 0
                row.diss_cum = 0.0;
            }
            Some(e0) => {
                let prev = self.rows.last().expect("rows nonempty once e0 is set");
                let dt = row.t - prev.t;
                let mut add = 0.5 * dt * (prev.grad_mu_sq + row.grad_mu_sq)
                    + 0.5 * dt * (prev.grad_theta_sq + row.grad_theta_sq);
                add += match self.rate_mode {
                    // interval quantity recorded on the previous row
                    RateMode::ForwardDifference => dt * prev.alpha_phi_t_sq,
                    RateMode::Instantaneous => {
                        0.5 * dt * (prev.alpha_phi_t_sq + row.alpha_phi_t_sq)
                    }
                };
                self.diss_cum += add;
                row.diss_cum = self.diss_cum;
                row.residual = row.e_eps + self.diss_cum - e0;
            }
        }
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let h = &self.header;
        let _ = writeln!(s, "# nonlocal viscous Cahn-Hilliard run ledger");
        let _ = writeln!(
            s,
            "# alpha={:.17e} epsilon={:.17e} delta={:.17e} delta0={:.17e} dt={:.17e} xi={:.17e} c_f={:.17e} m0={:.17e} n0={:.17e} rates={}",
            h.alpha,
            h.epsilon,
            h.delta,
            h.delta0,
            h.dt,
            h.xi,
            h.c_f,
            h.m0,
            h.n0,
            match self.rate_mode {
                RateMode::ForwardDifference => "forward_difference",
                RateMode::Instantaneous => "instantaneous",
            }
        );
        let _ = writeln!(s, "# {}", h.cert_line);
        let _ = writeln!(
            s,
            "# rate columns describe the step out of each row; the last row of a forward-difference ledger has no step and stores nan"
        );
        let _ = writeln!(s, "{}", LEDGER_COLUMNS);
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                r.step,
                r.t,
                r.e_eps,
                r.e_lyap,
                r.residual,
                r.grad_mu_sq,
                r.alpha_phi_t_sq,
                r.grad_theta_sq,
                r.diss_cum,
                r.phi_t_vdual,
                r.theta_v,
                r.mu_h2,
                r.vnorm,
                r.mean_mu,
                r.mean_mu_bound,
                r.phi_mean,
                r.theta_mean,
                r.phi_t_l2,
                r.theta_t_l2,
                r.phi_min,
                r.phi_max,
                r.s_stab,
            );
        }
        s
    }
}

/// Builds ledger rows from states; owns the norm bookkeeping.
pub struct Recorder<'a> {
    pub sp: &'a SpectralSpace,
    pub kernel: &'a Kernel,
    pub pot: &'a Potential,
    pub params: &'a Params,
    pub cert: Option<&'a Certificate>,
    pub xi: f64,
    pub c_f: f64,
    pub ledger: EnergyLedger,
}

impl<'a> Recorder<'a> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        sp: &'a SpectralSpace,
        kernel: &'a Kernel,
        pot: &'a Potential,
        params: &'a Params,
        cert: Option<&'a Certificate>,
        xi: f64,
        c_f: f64,
        state0: &State,
        rate_mode: RateMode,
    ) -> Self {
        let cert_line = match cert {
            Some(c) => {
                let (pstr, c3, c4) = match &c.h4.witness {
                    Some((p, c3, c4)) => (format!("{}", p), *c3, *c4),
                    None => ("none".to_string(), f64::NAN, f64::NAN),
                };
                format!(
                    "certified: c0={:.10e} c1={:.10e} c2={:.10e} p={} c3={:.10e} c4={:.10e} q={:.10e} c5={:.10e} c6={:.10e} c_j={:.10e} d_j={:.10e} a0={:.10e} a_star={:.10e} nu0={:.10e}",
                    c.h2.c0, c.h3.c1, c.h3.c2, pstr, c3, c4, c.h5.q, c.h5.c5, c.h5.c6,
                    c.c_j, c.d_j, c.a0, c.a_star, c.nu0()
                )
            }
            None => "certified: none (forced run)".to_string(),
        };
        let header = LedgerHeader {
            alpha: params.alpha,
            epsilon: params.epsilon,
            delta: params.delta,
            delta0: params.delta0,
            dt: params.dt,
            xi,
            c_f,
            m0: state0.m0,
            n0: state0.n0,
            cert_line,
        };
        Recorder {
            sp,
            kernel,
            pot,
            params,
            cert,
            xi,
            c_f,
            ledger: EnergyLedger::new(header, rate_mode),
        }
    }

    /// Point quantities common to both modes; rates are filled by the caller.
    fn base_row(&self, state: &State, mu: &Field, s_stab: f64) -> Result<LedgerRow> {
        let sp = self.sp;
        let e_eps = energy_eps(state, self.params.epsilon, self.kernel, self.pot, sp);
        let e_lyap = lyapunov_e(
            state,
            self.params,
            self.kernel,
            self.pot,
            sp,
            self.xi,
            self.c_f,
        )?;
        let theta_c = state.theta.coeffs(sp)?;
        let grad_theta_sq = crate::spectral::grad_norm_sq(&theta_c, sp);
        let theta_v = norm_from_coeffs(&theta_c, sp, Norm::V);
        let mu_c = mu.coeffs(sp)?;
        let grad_mu_sq = crate::spectral::grad_norm_sq(&mu_c, sp);
        let mu_v = norm_from_coeffs(&mu_c, sp, Norm::V);
        let mu_h2s = norm_from_coeffs(&mu_c, sp, Norm::H2Semi);
        let mu_h2 = self.params.alpha * mu_h2s * mu_h2s + mu_v * mu_v;
        let phi_c = state.phi.coeffs(sp)?;
        let phi_l2 = norm_from_coeffs(&phi_c, sp, Norm::L2);
        let phi_v = norm_from_coeffs(&phi_c, sp, Norm::V);
        let vnorm = phi_l2 * phi_l2
            + self.params.alpha * phi_v * phi_v
            + self.params.epsilon * theta_v * theta_v;
        let (phi_min, phi_max) = state.phi_range();
        let mean_mu = mu_c[0] / sp.volume().sqrt();
        Ok(LedgerRow {
            step: state.step,
            t: state.t,
            e_eps,
            e_lyap,
            residual: f64::NAN,
            grad_mu_sq,
            alpha_phi_t_sq: f64::NAN,
            grad_theta_sq,
            diss_cum: 0.0,
            phi_t_vdual: f64::NAN,
            theta_v,
            mu_h2,
            vnorm,
            mean_mu,
            mean_mu_bound: f64::NAN,
            phi_mean: crate::spectral::mean(&state.phi, sp),
            theta_mean: crate::spectral::mean(&state.theta, sp),
            phi_t_l2: f64::NAN,
            theta_t_l2: f64::NAN,
            phi_min,
            phi_max,
            s_stab,
        })
    }

    fn finish_rates(&self, row: &mut LedgerRow, state: &State, phi_t: &Field, theta_t: &Field) -> Result<()> {
        let sp = self.sp;
        let pt_c = phi_t.coeffs(sp)?;
        let phi_t_l2 = norm_from_coeffs(&pt_c, sp, Norm::L2);
        row.phi_t_l2 = phi_t_l2;
        row.alpha_phi_t_sq = self.params.alpha * phi_t_l2 * phi_t_l2;
        row.phi_t_vdual = norm_from_coeffs(&pt_c, sp, Norm::VDual);
        row.theta_t_l2 = crate::spectral::norm(theta_t, sp, Norm::L2)?;
        if let Some(cert) = self.cert {
            let phi_l2 = crate::spectral::norm(&state.phi, sp, Norm::L2)?;
            let theta_l2 = crate::spectral::norm(&state.theta, sp, Norm::L2)?;
            let f_l1 = sp.cell()
                * state
                    .phi
                    .values()
                    .iter()
                    .map(|s| self.pot.f(*s).abs())
                    .sum::<f64>();
            row.mean_mu_bound = mean_mu_bound(
                cert,
                self.params,
                sp.volume(),
                phi_l2,
                f_l1,
                phi_t_l2,
                theta_l2,
            );
        }
        Ok(())
    }

    /// Record the initial state of a forward-difference run.
    pub fn record_initial(&mut self, state: &State, mu: &Field, s_stab: f64) -> Result<()> {
        let row = self.base_row(state, mu, s_stab)?;
        self.ledger.push_row(row);
        Ok(())
    }

    /// Record one IMEX step: fills the previous row's rate columns with the
    /// forward difference and appends the new state's row.
    pub fn record_step(
        &mut self,
        prev: &State,
        next: &State,
        mu_next: &Field,
        s_stab: f64,
    ) -> Result<()> {
        debug_assert_eq!(self.ledger.rate_mode, RateMode::ForwardDifference);
        let dt = next.t - prev.t;
        let phi_t = Field::from_values(
            next.phi
                .values()
                .iter()
                .zip(prev.phi.values())
                .map(|(a, b)| (a - b) / dt)
                .collect(),
        );
        let theta_t = Field::from_values(
            next.theta
                .values()
                .iter()
                .zip(prev.theta.values())
                .map(|(a, b)| (a - b) / dt)
                .collect(),
        );
        let idx = self.ledger.rows.len() - 1;
        let mut pending = self.ledger.rows[idx].clone();
        self.finish_rates(&mut pending, prev, &phi_t, &theta_t)?;
        self.ledger.rows[idx] = pending;
        let row = self.base_row(next, mu_next, s_stab)?;
        self.ledger.push_row(row);
        Ok(())
    }

    /// Record one oracle row with instantaneous rates.
    pub fn record_instantaneous(
        &mut self,
        state: &State,
        mu: &Field,
        phi_t: &Field,
        theta_t: &Field,
        s_stab: f64,
    ) -> Result<()> {
        debug_assert_eq!(self.ledger.rate_mode, RateMode::Instantaneous);
        let mut row = self.base_row(state, mu, s_stab)?;
        self.finish_rates(&mut row, state, phi_t, theta_t)?;
        self.ledger.push_row(row);
        Ok(())
    }
}

/// Outcome of the exponential decay fit on the Lyapunov series.
#[derive(Debug, Clone)]
pub struct DissipationFit {
    pub e0: f64,
    pub e_plateau: f64,
    /// Fitted decay rate; `None` when the transient is empty or too short.
    pub nu3: Option<f64>,
    pub fit_points: usize,
    /// Plateau level `E_plateau * (1 + 1e-6)` and whether, once entered,
    /// the series never exceeds it again.
    pub invariance_level: f64,
    pub invariance_ok: bool,
    /// First time `E <= 2 E_plateau`, and the prediction from the fit.
    pub entry_measured: Option<f64>,
    pub entry_predicted: Option<f64>,
}

/// Fit `log(E - E_plateau)` over the transient; requires a detected plateau
/// (relative change below 1e-8 across 100 steps).
pub fn fit_dissipation_rate(ledger: &EnergyLedger) -> Result<DissipationFit> {
    let rows = &ledger.rows;
    if rows.len() < 120 {
        return Err(Error::NoPlateau);
    }
    let e: Vec<f64> = rows.iter().map(|r| r.e_lyap).collect();
    let t: Vec<f64> = rows.iter().map(|r| r.t).collect();
    let mut plateau_at = None;
    for j in 0..e.len() - 100 {
        let rel = (e[j] - e[j + 100]).abs() / e[j].abs().max(1e-300);
        if rel < 1e-8 {
            plateau_at = Some(j);
            break;
        }
    }
    if plateau_at.is_none() {
        return Err(Error::NoPlateau);
    }
    let e_plateau = *e.last().unwrap();
    let e0 = e[0];
    let g0 = e0 - e_plateau;

    let mut nu3 = None;
    let mut fit_points = 0;
    if g0 > 1e-13 * e0.abs().max(1.0) {
        // window: gap within [1e-3, 0.9] of the initial gap
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..e.len() {
            let g = e[i] - e_plateau;
            if g <= 0.0 {
                continue;
            }
            if g <= 0.9 * g0 && g >= 1e-3 * g0 {
                xs.push(t[i]);
                ys.push(g.ln());
            }
        }
        fit_points = xs.len();
        if fit_points >= 8 {
            let n = xs.len() as f64;
            let sx: f64 = xs.iter().sum();
            let sy: f64 = ys.iter().sum();
            let sxx: f64 = xs.iter().map(|x| x * x).sum();
            let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
            let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
            nu3 = Some(-slope);
        }
    }

    let invariance_level = e_plateau * (1.0 + 1e-6);
    let mut invariance_ok = true;
    if let Some(first_in) = e.iter().position(|v| *v <= invariance_level) {
        let slack = 1e-12 * invariance_level.abs().max(1.0);
        invariance_ok = e[first_in..].iter().all(|v| *v <= invariance_level + slack);
    }

    let (mut entry_measured, mut entry_predicted) = (None, None);
    if e_plateau > 0.0 {
        entry_measured = e
            .iter()
            .position(|v| *v <= 2.0 * e_plateau)
            .map(|i| t[i]);
        if let Some(nu) = nu3 {
            if nu > 0.0 {
                entry_predicted =
                    Some((e0 / e_plateau).max(1.0).ln() / nu + 10.0 * ledger.header.dt);
            }
        }
    }

    Ok(DissipationFit {
        e0,
        e_plateau,
        nu3,
        fit_points,
        invariance_level,
        invariance_ok,
        entry_measured,
        entry_predicted,
    })
}

/// `nu1_bar = max{1, (2 c0 (c0/alpha - 1) + d_J^2 + 2 c_J^2/alpha + 1)/alpha,
/// delta0^2/eps}`, the Gronwall rate of the continuous-dependence estimate.
pub fn nu1_bar(c0: f64, c_j: f64, d_j: f64, alpha: f64, epsilon: f64, delta0: f64) -> f64 {
    let mid = (2.0 * c0 * (c0 / alpha - 1.0) + d_j * d_j + 2.0 * c_j * c_j / alpha + 1.0) / alpha;
    1.0_f64.max(mid).max(delta0 * delta0 / epsilon)
}

/// `nu2_bar = max{C_F, |Omega|, delta0 |Omega| / 2, 1}` with the Lipschitz
/// constant `C_F` of the mean-potential bound.
pub fn nu2_bar(c_f_lip: f64, volume: f64, delta0: f64) -> f64 {
    c_f_lip.max(volume).max(0.5 * delta0 * volume).max(1.0)
}

/// Lipschitz constant entering the |<mu-bar>| bound: `2 c_J + Lip(F')` on the
/// running range.
pub fn contdep_c_f(pot: &Potential, c_j: f64, lo: f64, hi: f64) -> f64 {
    2.0 * c_j + pot.lipschitz_bound_on_range(lo, hi)
}

/// One compared instant of a trajectory pair.
#[derive(Debug, Clone)]
pub struct ContDepRow {
    pub t: f64,
    pub lhs: f64,
    pub ln_rhs: f64,
}

/// Report of the continuous-dependence inequality along one pair.
#[derive(Debug, Clone)]
pub struct ContDepReport {
    pub nu1: f64,
    pub nu2: f64,
    pub rows: Vec<ContDepRow>,
    pub violations: Vec<f64>,
    /// Smallest `ln RHS - ln LHS` over positive-LHS rows.
    pub min_ln_margin: f64,
}

/// Streaming evaluator for the continuous-dependence inequality; feed the
/// difference of two lockstep trajectories.
pub struct ContDepCheck<'a> {
    sp: &'a SpectralSpace,
    params: &'a Params,
    nu1: f64,
    nu2: f64,
    h0_sq: Option<f64>,
    mean_gap_sq: f64,
    cum: f64,
    prev_theta_v_sq: f64,
    prev_t: f64,
    rows: Vec<ContDepRow>,
    violations: Vec<f64>,
    min_ln_margin: f64,
}

impl<'a> ContDepCheck<'a> {
    pub fn new(sp: &'a SpectralSpace, params: &'a Params, nu1: f64, nu2: f64) -> Self {
        ContDepCheck {
            sp,
            params,
            nu1,
            nu2,
            h0_sq: None,
            mean_gap_sq: 0.0,
            cum: 0.0,
            prev_theta_v_sq: 0.0,
            prev_t: 0.0,
            rows: Vec::new(),
            violations: Vec::new(),
            min_ln_margin: f64::INFINITY,
        }
    }

    /// Record the difference state at time `t`; `dphi_dt` is the forward
    /// difference of the pair difference over the step ending at `t`
    /// (`None` at `t = 0`).
    pub fn push(
        &mut self,
        t: f64,
        phi_diff: &Field,
        theta_diff: &Field,
        rate_diff: Option<&Field>,
    ) -> Result<()> {
        let sp = self.sp;
        let pc = phi_diff.coeffs(sp)?;
        let tc = theta_diff.coeffs(sp)?;
        let vdual = norm_from_coeffs(&pc, sp, Norm::VDual);
        let l2 = norm_from_coeffs(&pc, sp, Norm::L2);
        let th_l2 = norm_from_coeffs(&tc, sp, Norm::L2);
        let theta_v = norm_from_coeffs(&tc, sp, Norm::V);
        let h_sq = vdual * vdual + self.params.alpha * l2 * l2 + self.params.epsilon * th_l2 * th_l2;
        match self.h0_sq {
            None => {
                self.h0_sq = Some(h_sq);
                let mp = pc[0] / sp.volume().sqrt();
                let mt = tc[0] / sp.volume().sqrt();
                self.mean_gap_sq = (mp.abs() + mt.abs()).powi(2);
                self.prev_theta_v_sq = theta_v * theta_v;
                self.prev_t = t;
            }
            Some(h0_sq) => {
                let dt = t - self.prev_t;
                if let Some(rate) = rate_diff {
                    let rc = rate.coeffs(sp)?;
                    let r_vd = norm_from_coeffs(&rc, sp, Norm::VDual);
                    let r_l2 = norm_from_coeffs(&rc, sp, Norm::L2);
                    self.cum += dt
                        * (2.0 * r_vd * r_vd + self.params.alpha * r_l2 * r_l2);
                }
                self.cum += dt * (self.prev_theta_v_sq + theta_v * theta_v); // 2 * trapezoid
                self.prev_theta_v_sq = theta_v * theta_v;
                self.prev_t = t;
                let lhs = h_sq + self.cum;
                let inner = h0_sq + 2.0 * self.nu2 / self.nu1 * self.mean_gap_sq;
                let ln_rhs = self.nu1 * t + inner.max(1e-300).ln();
                if inner == 0.0 {
                    // identical data: the inequality degenerates to lhs <= 0
                    if lhs > 1e-13 {
                        self.violations.push(t);
                    }
                } else {
                    let ln_lhs = lhs.max(1e-300).ln();
                    let margin = ln_rhs - ln_lhs;
                    self.min_ln_margin = self.min_ln_margin.min(margin);
                    if margin < -1e-9 {
                        self.violations.push(t);
                    }
                }
                self.rows.push(ContDepRow { t, lhs, ln_rhs });
            }
        }
        Ok(())
    }

    pub fn finish(self) -> ContDepReport {
        ContDepReport {
            nu1: self.nu1,
            nu2: self.nu2,
            rows: self.rows,
            violations: self.violations,
            min_ln_margin: self.min_ln_margin,
        }
    }
}

/// Monitors flagged when they grow by more than 10x after `t >= 0.1 t_end`.
pub fn regularity_flags(ledger: &EnergyLedger, t_end: f64) -> Vec<String> {
    let rows = &ledger.rows;
    let start = match rows.iter().position(|r| r.t >= 0.1 * t_end) {
        Some(i) => i,
        None => return Vec::new(),
    };
    let monitors: [(&str, fn(&LedgerRow) -> f64); 5] = [
        ("theta_v", |r| r.theta_v),
        ("mu_h2", |r| r.mu_h2),
        ("phi_t_vdual", |r| r.phi_t_vdual),
        ("alpha_phi_t_sq", |r| r.alpha_phi_t_sq),
        ("vnorm", |r| r.vnorm),
    ];
    let mut flags = Vec::new();
    for (name, get) in monitors {
        let base = get(&rows[start]);
        if !base.is_finite() {
            continue;
        }
        let worst = rows[start..]
            .iter()
            .map(get)
            .filter(|v| v.is_finite())
            .fold(f64::NEG_INFINITY, f64::max);
        if worst > 10.0 * base + 1e-9 {
            flags.push(format!(
                "{name} grew from {base:.3e} to {worst:.3e} after t = {:.3e}",
                rows[start].t
            ));
        }
    }
    flags
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Scheme;
    use crate::kernel::KernelFamily;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (SpectralSpace, Kernel, Potential, Params) {
        let sp = SpectralSpace::new_1d(65, 1.0).unwrap();
        let k = Kernel::build(KernelFamily::Gaussian { sigma: 0.05 }, 1.0, &sp).unwrap();
        let pot = Potential::double_well(1.0);
        let params = Params {
            alpha: 0.1,
            epsilon: 0.1,
            delta: 0.1,
            delta0: 0.5,
            dt: 1e-4,
            t_end: 1.0,
            stabilization: 5.0,
            scheme: Scheme::ImexStabilized,
            mean_cap: 1.0,
        };
        (sp, k, pot, params)
    }

    #[test]
    fn energy_of_constant_state() {
        let (sp, k, pot, params) = setup();
        let (m, n) = (0.3, -0.2);
        let s = State::new(&sp, vec![m; sp.len()], vec![n; sp.len()], &params).unwrap();
        let e = energy_eps(&s, params.epsilon, &k, &pot, &sp);
        let want = pot.f(m) + 0.5 * params.epsilon * n * n; // |Omega| = 1
        assert!((e - want).abs() < 1e-12);
    }

    #[test]
    fn narrow_kernel_energy_approaches_local_integral() {
        let (sp, _, pot, params) = setup();
        let pi = std::f64::consts::PI;
        let phi: Vec<f64> = (0..sp.len()).map(|j| (pi * sp.node(j)[0]).cos()).collect();
        let s = State::new(&sp, phi, vec![0.0; sp.len()], &params).unwrap();
        // int F(cos(pi x)) dx = int sin^4 = 3/8 for the unit double well
        let mut prev_gap = f64::INFINITY;
        for sigma in [0.05, 0.02] {
            let k = Kernel::build(KernelFamily::Gaussian { sigma }, 1.0, &sp).unwrap();
            let e = energy_eps(&s, params.epsilon, &k, &pot, &sp);
            let gap = (e - 0.375).abs();
            assert!(gap < prev_gap);
            prev_gap = gap;
        }
        assert!(prev_gap < 0.02);
    }

    #[test]
    fn energy_lower_bound_on_random_states() {
        let (sp, k, pot, params) = setup();
        let cert = pot.certify(&k);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let phi: Vec<f64> = (0..sp.len()).map(|_| rng.random_range(-1.5..1.5)).collect();
            let theta: Vec<f64> = (0..sp.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut p = params.clone();
            p.mean_cap = 10.0;
            let s = State::new(&sp, phi, theta, &p).unwrap();
            let e = energy_eps(&s, params.epsilon, &k, &pot, &sp);
            let phi_sq = crate::spectral::norm(&s.phi, &sp, Norm::L2).unwrap().powi(2);
            let th_sq = crate::spectral::norm(&s.theta, &sp, Norm::L2).unwrap().powi(2);
            let bound = energy_lower_bound(&cert, params.epsilon, phi_sq, th_sq, sp.volume());
            assert!(e >= bound - 1e-10);
        }
    }

    #[test]
    fn lyapunov_constant_state_formula() {
        let (sp, k, pot, params) = setup();
        let m = 0.25;
        let s = State::new(&sp, vec![m; sp.len()], vec![0.1; sp.len()], &params).unwrap();
        let c_f = 3.0;
        let e = lyapunov_e(&s, &params, &k, &pot, &sp, 0.1, c_f).unwrap();
        let int_a = sp.integrate(k.a_field().values());
        let want = m * m * int_a + 2.0 * pot.f(m) + c_f;
        assert!((e - want).abs() < 1e-10, "{e} vs {want}");
    }

    #[test]
    fn lyapunov_relates_to_energy_on_zero_mean_states() {
        let (sp, k, pot, mut params) = setup();
        params.mean_cap = 10.0;
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let mut phi: Vec<f64> = (0..sp.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mp = sp.mean_values(&phi);
            phi.iter_mut().for_each(|v| *v -= mp);
            let mut theta: Vec<f64> =
                (0..sp.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mt = sp.mean_values(&theta);
            theta.iter_mut().for_each(|v| *v -= mt);
            let s = State::new(&sp, phi, theta, &params).unwrap();
            let xi = 0.1;
            let c_f = 4.0;
            let e = lyapunov_e(&s, &params, &k, &pot, &sp, xi, c_f).unwrap();
            let e_eps = energy_eps(&s, params.epsilon, &k, &pot, &sp);
            let pc = s.phi.coeffs(&sp).unwrap();
            let vd = norm_from_coeffs(&pc, &sp, Norm::VDual);
            let l2 = norm_from_coeffs(&pc, &sp, Norm::L2);
            let want = 2.0 * e_eps + xi * vd * vd + xi * params.alpha * l2 * l2 + c_f;
            assert!((e - want).abs() < 1e-10 * want.abs().max(1.0));
        }
    }

    #[test]
    fn lyapunov_rejects_undersized_cf() {
        let (sp, k, pot, mut params) = setup();
        params.mean_cap = 10.0;
        let phi: Vec<f64> = (0..sp.len()).map(|_| 3.0).collect();
        let s = State::new(&sp, phi, vec![0.0; sp.len()], &params).unwrap();
        // E(const 3) = 9 int a + 2 F(3) + C_F; F(3) = 64 so a large negative
        // C_F trips the guard
        let r = lyapunov_e(&s, &params, &k, &pot, &sp, 0.1, -1000.0);
        assert!(matches!(r, Err(Error::LyapunovNegative { .. })));
    }

    #[test]
    fn nu1_bar_spot_value() {
        assert_eq!(nu1_bar(1.0, 1.0, 1.0, 1.0, 1.0, 1.0), 4.0);
    }

    #[test]
    fn contdep_identical_pair_has_no_violation() {
        let (sp, _, _, params) = setup();
        let mut check = ContDepCheck::new(&sp, &params, 4.0, 1.0);
        let zero = Field::constant(&sp, 0.0);
        for i in 0..10 {
            let t = i as f64 * params.dt;
            let rate = if i == 0 { None } else { Some(&zero) };
            check.push(t, &zero, &zero, rate).unwrap();
        }
        let rep = check.finish();
        assert!(rep.violations.is_empty());
    }

    #[test]
    fn regularity_flags_quiet_on_constant_rows() {
        let (sp, k, pot, params) = setup();
        let s = State::new(&sp, vec![0.2; sp.len()], vec![0.1; sp.len()], &params).unwrap();
        let mut rec = Recorder::new(
            &sp,
            &k,
            &pot,
            &params,
            None,
            0.1,
            10.0,
            &s,
            RateMode::ForwardDifference,
        );
        let mu = crate::dynamics::recover_mu(&s, &params, &k, &pot, &sp)
            .unwrap()
            .mu;
        rec.record_initial(&s, &mu, 1.0).unwrap();
        let mut prev = s;
        for i in 1..=30 {
            let mut next = prev.clone();
            next.t = i as f64 * params.dt;
            next.step = i;
            rec.record_step(&prev, &next, &mu, 1.0).unwrap();
            prev = next;
        }
        assert!(regularity_flags(&rec.ledger, 30.0 * params.dt).is_empty());
        // constant trajectory: residual identically zero
        assert_eq!(rec.ledger.max_abs_residual(), 0.0);
    }
}
