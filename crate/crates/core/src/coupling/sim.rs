use rand_chacha::ChaCha8Rng;

use super::ledger::GirsanovLedger;
use super::plan::{CouplingPlan, PlanTable};
use crate::delay::{SegmentPath, SegmentView};
use crate::drift::{HolderDiniDrift, SegmentFunctional};
use crate::error::{Error, Result};
use crate::model::OperatorSet;
use crate::sde::{Engine, History, SimGrid, Trajectory};

/// End-of-path view handed to the caller of [`run_coupled`].
#[derive(Debug)]
pub struct CoupledRun<'a> {
    pub reference: &'a History,
    pub coupled: &'a [History],
    pub ledgers: &'a [GirsanovLedger],
    /// Per plan, `max_k |Z̄(t_k) − Z(t_k) − Γ(t_k)|` against the grid recursion.
    pub identity_errors: &'a [f64],
}

/// One reference path from `xi0` and, with the same noise, one coupled path
/// per table. Each coupled path starts at `xi0 + Γ₀`, is driven by the
/// reference drift plus the plan's forcing, and accumulates its own ledger.
pub fn run_coupled<T>(
    engine: &Engine,
    b: &HolderDiniDrift,
    f: &SegmentFunctional,
    xi0: &SegmentPath,
    tables: &[&PlanTable],
    rng: &mut ChaCha8Rng,
    mut on_step: impl FnMut(usize, &History, &[History]),
    finish: impl FnOnce(CoupledRun<'_>) -> T,
) -> Result<T> {
    engine.check_coefficients(b, f)?;
    engine.check_segment(xi0, f)?;
    let n_steps = match tables.first() {
        Some(t) => t.n_steps,
        None => return Err(Error::PlanMismatch("no coupling tables".into())),
    };
    for t in tables {
        if t.n_steps != n_steps || (t.dt - engine.dt).abs() > 1e-12 * engine.dt {
            return Err(Error::PlanMismatch("tables disagree on the grid".into()));
        }
        if t.initial.max_lag != xi0.max_lag {
            return Err(Error::PlanMismatch(format!(
                "plan segment has {} lags, start has {}",
                t.initial.max_lag, xi0.max_lag
            )));
        }
    }
    let (n2, n3, d) = (engine.n2, engine.n3, engine.dim());
    let dt = engine.dt;
    let mut reference = History::from_segment(xi0);
    let mut coupled: Vec<History> = tables
        .iter()
        .map(|t| xi0.add(&t.initial).map(|s| History::from_segment(&s)))
        .collect::<Result<_>>()?;
    let mut ledgers = vec![GirsanovLedger::default(); tables.len()];
    let mut identity = vec![0.0f64; tables.len()];
    let mut noise = engine.noise_buffer();
    let mut drive = vec![0.0; n2];
    let mut drive_bar = vec![0.0; n2];
    let mut scratch = vec![0.0; n2];
    let mut phi = vec![0.0; n2];
    let mut psi = vec![0.0; n3];
    let mut next = vec![0.0; d];
    let mut next_bar = vec![0.0; d];
    for k in 0..n_steps {
        engine.draw(rng, &mut noise);
        engine.drive(b, f, &reference, &mut scratch, &mut drive);
        engine.mild_step(reference.current(), &drive, &noise.xi, &mut next);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step: k + 1 });
        }
        for (j, table) in tables.iter().enumerate() {
            let hist = &mut coupled[j];
            engine.drive(b, f, hist, &mut scratch, &mut drive_bar);
            for ((p, (a, c)), fd) in phi
                .iter_mut()
                .zip(drive.iter().zip(&drive_bar))
                .zip(table.forcing_drift_row(k))
            {
                *p = a - c + fd;
            }
            engine.q_pinv_apply(&phi, &mut psi);
            ledgers[j].add(&psi, &noise.dw, dt);
            engine.mild_step(hist.current(), &drive, &noise.xi, &mut next_bar);
            for (y, v) in next_bar[engine.n1..].iter_mut().zip(table.forcing_row(k)) {
                *y += v;
            }
            if next_bar.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { step: k + 1 });
            }
            hist.push(&next_bar);
            let gamma = table.gamma_discrete_row(k + 1);
            let err = next_bar
                .iter()
                .zip(&next)
                .zip(gamma)
                .map(|((a, z), g)| (a - z - g) * (a - z - g))
                .sum::<f64>()
                .sqrt();
            identity[j] = identity[j].max(err);
        }
        reference.push(&next);
        on_step(k + 1, &reference, &coupled);
    }
    for l in ledgers.iter_mut() {
        l.finalize();
    }
    Ok(finish(CoupledRun {
        reference: &reference,
        coupled: &coupled,
        ledgers: &ledgers,
        identity_errors: &identity,
    }))
}

/// Reference and coupled trajectories for a single plan, fully recorded.
pub fn simulate_coupled(
    ops: &OperatorSet,
    b: &HolderDiniDrift,
    f: &SegmentFunctional,
    xi0: &SegmentPath,
    plan: &CouplingPlan,
    grid: &SimGrid,
    rng: &mut ChaCha8Rng,
) -> Result<(Trajectory, Trajectory, GirsanovLedger)> {
    if (plan.horizon() - grid.horizon).abs() > 1e-12 * grid.horizon {
        return Err(Error::PlanMismatch(format!(
            "plan horizon {} vs grid horizon {}",
            plan.horizon(),
            grid.horizon
        )));
    }
    let engine = Engine::new(ops, grid.dt)?;
    let table = PlanTable::new(plan, &engine, xi0.max_lag)?;
    let d = engine.dim();
    let mut ref_states = Vec::with_capacity((grid.n_steps + 1) * d);
    let mut bar_states = Vec::with_capacity((grid.n_steps + 1) * d);
    let start_bar = xi0.add(&table.initial)?;
    ref_states.extend_from_slice(xi0.lag(0));
    bar_states.extend_from_slice(start_bar.lag(0));
    let ledger = run_coupled(
        &engine,
        b,
        f,
        xi0,
        &[&table],
        rng,
        |_, r, c| {
            ref_states.extend_from_slice(r.current());
            bar_states.extend_from_slice(c[0].current());
        },
        |run| run.ledgers[0],
    )?;
    let reference = Trajectory {
        dt: grid.dt,
        dim: d,
        n_steps: table.n_steps,
        initial: xi0.clone(),
        states: ref_states,
        increments: None,
    };
    let coupled = Trajectory {
        dt: grid.dt,
        dim: d,
        n_steps: table.n_steps,
        initial: start_bar,
        states: bar_states,
        increments: None,
    };
    Ok((reference, coupled, ledger))
}
