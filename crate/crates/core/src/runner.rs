//! Recording simulation loops: the stabilized IMEX driver with its running
//! stabilization constant, the oracle driver, the oracle-equivalence
//! harness, and the rescaled isothermal comparison used by the limit study.

use crate::diagnostics::{c_f_auto, EnergyLedger, RateMode, Recorder};
use crate::dynamics::{
    beta_rescaled, detect_steady_state, recover_mu, rescaled_viscous_ch_step, step_imex, Params,
    State,
};
use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::oracle::OracleSystem;
use crate::potential::{Certificate, Potential};
use crate::spectral::{norm, Field, Norm, SpectralSpace};

/// Everything a recorded run needs besides the initial data.
pub struct RunSpec<'a> {
    pub sp: &'a SpectralSpace,
    pub kernel: &'a Kernel,
    pub pot: &'a Potential,
    pub cert: Option<&'a Certificate>,
    pub params: &'a Params,
    /// Ledger rows are recorded every `record_stride` steps (plus the last).
    pub record_stride: usize,
    pub xi: f64,
    /// Lyapunov offset; `None` sizes it from the certificate.
    pub c_f: Option<f64>,
    pub steady_tol: f64,
}

impl<'a> RunSpec<'a> {
    pub fn resolve_c_f(&self) -> f64 {
        match (self.c_f, self.cert) {
            (Some(v), _) => v,
            (None, Some(cert)) => c_f_auto(cert, self.params.mean_cap, self.sp.volume()),
            (None, None) => 100.0,
        }
    }
}

/// Steady-state verdict with the energy at detection.
#[derive(Debug, Clone)]
pub struct SteadyReport {
    pub step: usize,
    pub t: f64,
    pub e_eps: f64,
}

/// Result of a recorded run; a blow-up keeps the partial ledger.
pub struct RunOutcome {
    pub ledger: EnergyLedger,
    pub final_state: State,
    pub steady: Option<SteadyReport>,
    /// Set when `phi` left the stabilization range between recomputes.
    pub clamp_alarm: bool,
    pub blowup: Option<(f64, usize)>,
}

/// Margin added around the running range of `phi` when sizing the
/// stabilization constant.
const RANGE_MARGIN: f64 = 0.5;
/// Steps between stabilization recomputes.
const STAB_PERIOD: usize = 100;

fn stabilization_for(pot: &Potential, params: &Params, state: &State) -> (f64, (f64, f64)) {
    let (lo, hi) = state.phi_range();
    let range = (lo - RANGE_MARGIN, hi + RANGE_MARGIN);
    let s = params
        .stabilization
        .max(pot.lipschitz_bound_on_range(range.0, range.1));
    (s, range)
}

/// Run the stabilized IMEX scheme to `t_end`, recording the ledger.
pub fn run_imex(spec: &RunSpec, phi0: Vec<f64>, theta0: Vec<f64>) -> Result<RunOutcome> {
    spec.params.validate()?;
    let sp = spec.sp;
    let params = spec.params;
    let state0 = State::new(sp, phi0, theta0, params)?;
    let c_f = spec.resolve_c_f();
    let mut rec = Recorder::new(
        sp,
        spec.kernel,
        spec.pot,
        params,
        spec.cert,
        spec.xi,
        c_f,
        &state0,
        RateMode::ForwardDifference,
    );
    let (mut s_stab, mut s_range) = stabilization_for(spec.pot, params, &state0);
    let mu0 = recover_mu(&state0, params, spec.kernel, spec.pot, sp)?.mu;
    rec.record_initial(&state0, &mu0, s_stab)?;

    let n_steps = (params.t_end / params.dt).round() as usize;
    let stride = spec.record_stride.max(1);
    let mut clamp_alarm = false;
    let mut blowup = None;
    let mut state = state0;
    let mut last_recorded = state.clone();
    for step in 1..=n_steps {
        match step_imex(&state, params, spec.kernel, spec.pot, sp, s_stab) {
            Ok(next) => state = next,
            Err(Error::BlowUp { t, step }) => {
                blowup = Some((t, step));
                break;
            }
            Err(e) => return Err(e),
        }
        let (lo, hi) = state.phi_range();
        if lo < s_range.0 || hi > s_range.1 {
            clamp_alarm = true;
            let fresh = stabilization_for(spec.pot, params, &state);
            s_stab = fresh.0;
            s_range = fresh.1;
        } else if step % STAB_PERIOD == 0 {
            let fresh = stabilization_for(spec.pot, params, &state);
            s_stab = fresh.0;
            s_range = fresh.1;
        }
        if step % stride == 0 || step == n_steps {
            let mu = recover_mu(&state, params, spec.kernel, spec.pot, sp)?.mu;
            rec.record_step(&last_recorded, &state, &mu, s_stab)?;
            last_recorded = state.clone();
        }
    }

    let (rates, times) = rec.ledger.rate_series();
    let steady = detect_steady_state(&rates, &times, spec.steady_tol).map(|d| {
        let row = &rec.ledger.rows[d.step.min(rec.ledger.rows.len() - 1)];
        SteadyReport {
            step: row.step,
            t: d.t,
            e_eps: row.e_eps,
        }
    });
    Ok(RunOutcome {
        ledger: rec.ledger,
        final_state: state,
        steady,
        clamp_alarm,
        blowup,
    })
}

/// Run the dense Galerkin-ODE oracle to `t_end`, recording instantaneous
/// rates. The ledger lives on the oracle's own (dealiased) grid.
pub fn run_oracle(
    spec: &RunSpec,
    n_modes: usize,
    phi0: Vec<f64>,
    theta0: Vec<f64>,
) -> Result<RunOutcome> {
    spec.params.validate()?;
    let sp = spec.sp;
    let params = spec.params;
    let sys = OracleSystem::new(sp, spec.kernel, spec.pot, params, n_modes)?;
    let state0 = State::new(sp, phi0, theta0, params)?;
    let c_f = spec.resolve_c_f();
    let mut rec = Recorder::new(
        sp,
        spec.kernel,
        spec.pot,
        params,
        spec.cert,
        spec.xi,
        c_f,
        &state0,
        RateMode::Instantaneous,
    );

    let mut st = sys.project(&state0)?;
    let record = |rec: &mut Recorder,
                  sys: &OracleSystem,
                  st: &crate::oracle::OracleState,
                  step: usize|
     -> Result<State> {
        let mut grid_state = sys.to_state(st, params)?;
        grid_state.step = step;
        grid_state.m0 = state0.m0;
        grid_state.n0 = state0.n0;
        let (phi_t, theta_t, mu) = sys.row_fields(st)?;
        rec.record_instantaneous(&grid_state, &mu, &phi_t, &theta_t, 0.0)?;
        Ok(grid_state)
    };
    let mut grid_state = record(&mut rec, &sys, &st, 0)?;

    let n_steps = (params.t_end / params.dt).round() as usize;
    let stride = spec.record_stride.max(1);
    let mut blowup = None;
    for step in 1..=n_steps {
        match sys.rk4_step(&st, params.dt) {
            Ok(next) => st = next,
            Err(Error::OracleStiff { t }) => {
                blowup = Some((t, step));
                break;
            }
            Err(e) => return Err(e),
        }
        if step % stride == 0 || step == n_steps {
            grid_state = record(&mut rec, &sys, &st, step)?;
        }
    }

    let (rates, times) = rec.ledger.rate_series();
    let steady = detect_steady_state(&rates, &times, spec.steady_tol).map(|d| {
        let row = &rec.ledger.rows[(d.step - 1).min(rec.ledger.rows.len() - 1)];
        SteadyReport {
            step: row.step,
            t: d.t,
            e_eps: row.e_eps,
        }
    });
    Ok(RunOutcome {
        ledger: rec.ledger,
        final_state: grid_state,
        steady,
        clamp_alarm: false,
        blowup,
    })
}

/// Endpoint gaps of IMEX-vs-oracle runs over a ladder of time steps.
#[derive(Debug, Clone)]
pub struct OracleCheckReport {
    pub dt_levels: Vec<f64>,
    pub endpoint_gaps: Vec<f64>,
    /// log2(gap(2 dt) / gap(dt)) between consecutive levels.
    pub slopes: Vec<f64>,
    pub fine_dt: f64,
    pub fine_gap: f64,
    pub pass: bool,
}

/// Compare a stepper against the truncated oracle from shared initial data
/// (projected onto the kept modes, as the Galerkin construction does). The
/// gap is the L2 distance between the oracle trajectory and the projection
/// of the stepper's trajectory onto the kept modes, which isolates the time
/// discretization error; the oracle substeps as needed for RK4 stability.
#[allow(clippy::too_many_arguments)]
pub fn oracle_check_with<S>(
    stepper: S,
    sp: &SpectralSpace,
    kernel: &Kernel,
    pot: &Potential,
    params: &Params,
    n_modes: usize,
    phi0: &[f64],
    theta0: &[f64],
    dt_levels: &[f64],
    fine_dt: f64,
    slope_floor: f64,
    gap_ceiling: f64,
) -> Result<OracleCheckReport>
where
    S: Fn(&State, &Params, f64) -> Result<State>,
{
    let sys = OracleSystem::new(sp, kernel, pot, params, n_modes)?;
    // both sides start from the projected initial data, mirroring the
    // Galerkin construction's P_n phi_0
    let raw0 = State::new(sp, phi0.to_vec(), theta0.to_vec(), params)?;
    let proj0 = sys.to_state(&sys.project(&raw0)?, params)?;
    let mut endpoint_gaps = Vec::new();
    let run_gap = |dt: f64| -> Result<f64> {
        let mut p = params.clone();
        p.dt = dt;
        let state0 = State::new(
            sp,
            proj0.phi.values().to_vec(),
            proj0.theta.values().to_vec(),
            &p,
        )?;
        let s_stab = p
            .stabilization
            .max(pot.lipschitz_bound_on_range(-2.0, 2.0));
        // oracle substeps: keep RK4 comfortably inside its stability region
        let lam_max = sp
            .eigenvalues()
            .iter()
            .fold(0.0_f64, |m, l| m.max(*l));
        let rate = lam_max / p.epsilon;
        let substeps = ((dt * rate / 2.0).ceil() as usize).max(1);
        let sub_dt = dt / substeps as f64;
        let mut imex = state0.clone();
        let mut orc = sys.project(&state0)?;
        let n_steps = (p.t_end / dt).round() as usize;
        for _ in 0..n_steps {
            imex = stepper(&imex, &p, s_stab)?;
            for _ in 0..substeps {
                orc = sys.rk4_step(&orc, sub_dt)?;
            }
        }
        // Parseval: L2 distance on the kept modes from the coefficients
        let imex_proj = sys.project(&imex)?;
        let gap_sq: f64 = imex_proj
            .a
            .iter()
            .zip(&orc.a)
            .map(|(x, y)| (x - y) * (x - y))
            .sum();
        Ok(gap_sq.sqrt())
    };
    for &dt in dt_levels {
        endpoint_gaps.push(run_gap(dt)?);
    }
    let mut slopes = Vec::new();
    for w in endpoint_gaps.windows(2) {
        slopes.push((w[0] / w[1]).log2());
    }
    let fine_gap = run_gap(fine_dt)?;
    let pass = slopes.iter().all(|s| *s >= slope_floor) && fine_gap <= gap_ceiling;
    Ok(OracleCheckReport {
        dt_levels: dt_levels.to_vec(),
        endpoint_gaps,
        slopes,
        fine_dt,
        fine_gap,
        pass,
    })
}

/// The production oracle-equivalence check.
#[allow(clippy::too_many_arguments)]
pub fn run_oracle_check(
    sp: &SpectralSpace,
    kernel: &Kernel,
    pot: &Potential,
    params: &Params,
    n_modes: usize,
    phi0: &[f64],
    theta0: &[f64],
    dt_levels: &[f64],
    fine_dt: f64,
) -> Result<OracleCheckReport> {
    oracle_check_with(
        |s, p, s_stab| step_imex(s, p, kernel, pot, sp, s_stab),
        sp,
        kernel,
        pot,
        params,
        n_modes,
        phi0,
        theta0,
        dt_levels,
        fine_dt,
        0.9,
        1e-4,
    )
}

/// Max-over-time L2 gap between the coupled run at `epsilon` and the
/// beta-rescaled isothermal run evaluated at `t / (1 + delta^2)`.
pub fn limit_gap(
    sp: &SpectralSpace,
    kernel: &Kernel,
    pot: &Potential,
    params: &Params,
    epsilon: f64,
    phi0: &[f64],
    theta0: &[f64],
) -> Result<f64> {
    let mut p_coupled = params.clone();
    p_coupled.epsilon = epsilon;
    let mut p_ch = params.clone();
    let factor = 1.0 + params.delta * params.delta;
    p_ch.dt = params.dt / factor;
    p_ch.delta = 0.0;
    let beta = beta_rescaled(params.alpha, params.delta);

    let mut coupled = State::new(sp, phi0.to_vec(), theta0.to_vec(), &p_coupled)?;
    let mut ch = State::new(sp, phi0.to_vec(), theta0.to_vec(), &p_ch)?;
    let s_stab = params
        .stabilization
        .max(pot.lipschitz_bound_on_range(-2.0, 2.0));
    let n_steps = (params.t_end / params.dt).round() as usize;
    let mut gap = 0.0_f64;
    for _ in 0..n_steps {
        coupled = step_imex(&coupled, &p_coupled, kernel, pot, sp, s_stab)?;
        ch = rescaled_viscous_ch_step(&ch, beta, &p_ch, kernel, pot, sp, s_stab)?;
        let diff = Field::from_values(
            coupled
                .phi
                .values()
                .iter()
                .zip(ch.phi.values())
                .map(|(a, b)| a - b)
                .collect(),
        );
        gap = gap.max(norm(&diff, sp, Norm::L2)?);
    }
    Ok(gap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Scheme;
    use crate::kernel::KernelFamily;

    #[test]
    fn constant_run_reports_fixed_point() {
        let sp = SpectralSpace::new_1d(33, 1.0).unwrap();
        let kernel = Kernel::build(KernelFamily::Gaussian { sigma: 0.05 }, 1.0, &sp).unwrap();
        let pot = Potential::double_well(0.1);
        let cert = pot.certify(&kernel);
        let params = Params {
            alpha: 0.1,
            epsilon: 0.1,
            delta: 0.1,
            delta0: 0.5,
            dt: 1e-3,
            t_end: 0.2,
            stabilization: 1.0,
            scheme: Scheme::ImexStabilized,
            mean_cap: 1.0,
        };
        let spec = RunSpec {
            sp: &sp,
            kernel: &kernel,
            pot: &pot,
            cert: Some(&cert),
            params: &params,
            record_stride: 1,
            xi: 0.1,
            c_f: None,
            steady_tol: 1e-10,
        };
        let out = run_imex(&spec, vec![0.2; sp.len()], vec![0.0; sp.len()]).unwrap();
        assert!(out.blowup.is_none());
        assert!(!out.clamp_alarm);
        let steady = out.steady.expect("constant data must be steady");
        assert_eq!(steady.step, 50);
        assert_eq!(out.ledger.max_abs_residual(), 0.0);
        // means conserved exactly in the ledger columns
        for r in &out.ledger.rows {
            assert_eq!(r.phi_mean, 0.2);
            assert_eq!(r.theta_mean, 0.0);
        }
    }
}
