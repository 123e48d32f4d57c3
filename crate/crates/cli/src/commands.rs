use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rydion::dynamics::{evolve_with, thermal_cutoff};
use rydion::ode::Tolerances;
use rydion::overlap::DEFAULT_MARGIN;
use rydion::units::{angular_to_hz, hz_to_angular, PLANCK};
use rydion::{
    fit_quadratic_turning_point, fit_spectrum, mode_shifts, monte_carlo_band, overlap_matrix_with,
    perturbation_warnings, phonon_detuning, residual_field_limit, stark_delta, stark_equilibrium,
    stark_frequencies, synthesize_scan, thermal_distribution, transition_shift,
    weighted_population, BandPoint, DensityState, Level, LevelScheme, LineModel, ModeShifts,
    OffsetField, OverlapOptions, ParameterEnsemble, PhononDistribution, PhononOccupation,
    PolarizableState, QuadraticScan, SignalKind, SpectrumScan, TrapConfig, TrapTransition,
};

use crate::failure::CliError;
use crate::output::{
    read_table, Cell, FieldLimit, FitReport, ParameterRow, Report, StateInfo, Table, TrapInfo,
    TurningPointReport,
};
use crate::{AxisArg, Context, FieldArgs, FigureArgs, FigureName, LineModelArg};

fn grid(start: f64, end: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![start];
    }
    (0..n)
        .map(|i| start + (end - start) * i as f64 / (n - 1) as f64)
        .collect()
}

fn offset_from(ctx: &Context, f: &FieldArgs) -> Result<OffsetField, CliError> {
    let base = ctx
        .config
        .spectrum
        .as_ref()
        .map_or([0.0, 0.0], |s| s.offset_field);
    OffsetField::new(f.ex.unwrap_or(base[0]), f.ey.unwrap_or(base[1]))
        .map_err(CliError::from_config_input)
}

fn transition<'a>(
    ctx: &Context,
    trap: &'a TrapConfig,
    states: &'a (PolarizableState, PolarizableState),
    offset: OffsetField,
    occupation: PhononOccupation,
) -> TrapTransition<'a> {
    TrapTransition {
        trap,
        offset,
        lower: &states.0,
        upper: &states.1,
        occupation,
        micromotion_correction: ctx.micromotion_correction,
    }
}

pub fn trap_info(ctx: &Context) -> Result<Report, CliError> {
    let trap = ctx.config.trap_config()?;
    let w = trap.secular()?;
    let mut states = Vec::new();
    let mut warnings = Vec::new();
    for s in ctx.config.polarizable_states()? {
        let f = stark_frequencies(&trap, &s, ctx.micromotion_correction)?;
        warnings.extend(perturbation_warnings(
            &trap,
            &s,
            ctx.micromotion_correction,
        )?);
        states.push(StateInfo {
            label: s.label.clone(),
            polarizability: s.polarizability,
            freq_x_hz: angular_to_hz(f.x),
            freq_y_hz: angular_to_hz(f.y),
        });
    }
    Ok(Report::TrapInfo(TrapInfo {
        drive_freq_hz: angular_to_hz(trap.drive_freq),
        grad_rf: trap.grad_rf,
        grad_dc: trap.grad_dc,
        asymmetry: trap.asymmetry,
        mathieu_q: trap.mathieu_q(),
        micromotion_factor: trap.micromotion_factor(),
        secular_x_hz: angular_to_hz(w.x),
        secular_y_hz: angular_to_hz(w.y),
        secular_z_hz: angular_to_hz(w.z),
        mass_kg: trap.species.mass,
        charge_c: trap.species.charge,
        states,
        warnings,
    }))
}

pub fn stark_shift(ctx: &Context, field: &FieldArgs) -> Result<Report, CliError> {
    let trap = ctx.config.trap_config()?;
    let offset = offset_from(ctx, field)?;
    let mm = ctx.micromotion_correction;
    let mut t = Table::new(&[
        "state",
        "polarizability",
        "freq_x_hz",
        "freq_y_hz",
        "x_eq_m",
        "y_eq_m",
        "delta_exact_hz",
        "delta_approx_hz",
    ]);
    for s in ctx.config.polarizable_states()? {
        let f = stark_frequencies(&trap, &s, mm)?;
        let r = stark_equilibrium(&trap, &offset, &s, mm)?;
        let d = stark_delta(&trap, &offset, &s, mm)?;
        t.push(vec![
            s.label.as_str().into(),
            s.polarizability.into(),
            angular_to_hz(f.x).into(),
            angular_to_hz(f.y).into(),
            r.x.into(),
            r.y.into(),
            (d.exact / PLANCK).into(),
            (d.approximate / PLANCK).into(),
        ]);
    }
    t.sort_by_leading();
    Ok(Report::Table(t))
}

pub fn fc_matrix(
    ctx: &Context,
    field: &FieldArgs,
    n_max: usize,
    axis: AxisArg,
) -> Result<Report, CliError> {
    let trap = ctx.config.trap_config()?;
    let states = ctx.config.transition_states()?;
    let tr = transition(
        ctx,
        &trap,
        &states,
        offset_from(ctx, field)?,
        PhononOccupation::default(),
    );
    let [x, y] = tr.oscillators()?;
    let (from, to) = match axis {
        AxisArg::X => x,
        AxisArg::Y => y,
    };
    let opts = OverlapOptions {
        tolerance: ctx.config.defaults.fc_tolerance,
        margin: DEFAULT_MARGIN,
    };
    let m = overlap_matrix_with(&from, &to, n_max, opts)?;
    let mut t = Table::new(&["n", "m", "overlap", "probability"]);
    for (n, row) in m.square().iter().enumerate() {
        for (k, v) in row.iter().enumerate() {
            t.push(vec![
                (n as f64).into(),
                (k as f64).into(),
                (*v).into(),
                (v * v).into(),
            ]);
        }
    }
    Ok(Report::Table(t))
}

pub fn spectrum_synthesize(ctx: &Context, kind: SignalKind) -> Result<Report, CliError> {
    let sb = ctx.config.spectrum_block()?;
    let trap = ctx.config.trap_config()?;
    let states = ctx.config.transition_states()?;
    let tr = transition(ctx, &trap, &states, sb.offset()?, sb.occupation());
    let model = tr.spectrum_model(
        hz_to_angular(sb.rabi_hz),
        hz_to_angular(sb.linewidth_hz),
        sb.background_rate,
    )?;
    let span = hz_to_angular(sb.span_hz);
    let det = grid(model.center - span, model.center + span, sb.points);
    let scan = synthesize_scan(&model, &det, sb.exposure_s, &[sb.trials], ctx.seed, kind)?;
    let mut t = Table::new(&["detuning_hz", "signal", "trials"]);
    for ((d, s), n) in scan.detunings.iter().zip(&scan.signal).zip(&scan.trials) {
        t.push(vec![
            angular_to_hz(*d).into(),
            (*s).into(),
            f64::from(*n).into(),
        ]);
    }
    Ok(Report::Table(t))
}

pub fn spectrum_fit(
    ctx: &Context,
    input: &Path,
    line_model: LineModelArg,
    kind: SignalKind,
) -> Result<Report, CliError> {
    let sb = ctx.config.spectrum_block()?;
    let table = read_table(input)?;
    let detunings = table
        .numbers("detuning_hz")?
        .into_iter()
        .map(hz_to_angular)
        .collect();
    let signal = table.numbers("signal")?;
    let trials = table
        .numbers("trials")?
        .into_iter()
        .map(|n| {
            if n >= 0.0 && n.fract() == 0.0 && n <= f64::from(u32::MAX) {
                Ok(n as u32)
            } else {
                Err(CliError::config(format!(
                    "trial count {n} is not a non-negative integer"
                )))
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    let scan = SpectrumScan {
        detunings,
        exposure: sb.exposure_s,
        signal,
        trials,
        kind,
    };

    let trap = ctx.config.trap_config()?;
    let states = ctx.config.transition_states()?;
    let tr = transition(ctx, &trap, &states, sb.offset()?, sb.occupation());
    let tol = ctx.config.defaults.fc_tolerance;
    let (lines, label) = match line_model {
        LineModelArg::Fixed => (LineModel::Fixed(tr.line_weights(tol)?), "fixed"),
        LineModelArg::CenterShift => (
            LineModel::CenterShift(tr.center_shift_lines(tol)?),
            "center_shift",
        ),
    };
    let fit = fit_spectrum(&scan, &lines, tr.mode_spacing()?, Default::default(), None)?;
    let parameters = fit
        .parameters
        .iter()
        .map(|p| {
            let (scale, unit) = match p.name.as_str() {
                "background" => (1.0, "1/s"),
                "center_shift" => (1.0, "m"),
                _ => (1.0 / hz_to_angular(1.0), "Hz"),
            };
            ParameterRow {
                name: p.name.clone(),
                value: p.value * scale,
                sigma: p.sigma * scale,
                unit: unit.into(),
            }
        })
        .collect();
    Ok(Report::Fit(FitReport {
        line_model: label.into(),
        parameters,
        chi_squared: fit.chi_squared,
        dof: fit.dof,
        residual_norm: fit.residual_norm,
        iterations: fit.iterations,
    }))
}

pub fn micromotion_fit(ctx: &Context, input: &Path) -> Result<Report, CliError> {
    let table = read_table(input)?;
    let control = table.numbers("control")?;
    let shift = table.numbers("shift_hz")?;
    let sigma = match table.column_index("sigma_hz") {
        Some(_) => Some(table.numbers("sigma_hz")?),
        None => None,
    };
    let alpha = match &ctx.config.transition {
        Some(_) => {
            let (lower, upper) = ctx.config.transition_states()?;
            Some(upper.polarizability - lower.polarizability)
        }
        None => None,
    };
    let tp = fit_quadratic_turning_point(
        &QuadraticScan {
            control,
            shift,
            sigma,
        },
        alpha,
    )?;
    Ok(Report::TurningPoint(TurningPointReport {
        control: tp.control,
        shift_hz: tp.shift,
        curvature_hz: tp.curvature,
        errors: tp.errors,
        warnings: tp.warnings,
    }))
}

pub fn mm_limit(alpha: f64, linewidth_hz: f64, fraction: f64) -> Result<Report, CliError> {
    let e = residual_field_limit(alpha, linewidth_hz, fraction)?;
    Ok(Report::FieldLimit(FieldLimit {
        polarizability: alpha,
        linewidth_hz,
        fraction,
        residual_field_v_per_m: e,
    }))
}

struct DynamicsSetup {
    scheme: LevelScheme,
    ensemble: ParameterEnsemble,
    shifts: ModeShifts,
    times: Vec<f64>,
}

fn dynamics_setup(ctx: &Context) -> Result<DynamicsSetup, CliError> {
    let sb = ctx.config.scheme_block()?;
    let rb = ctx.config.rabi_block()?;
    let scheme = sb.level_scheme()?;
    let (dx, dy) = match rb.mode_shifts_hz {
        Some([x, y]) => (hz_to_angular(x), hz_to_angular(y)),
        None => {
            let trap = ctx.config.trap_config()?;
            let (lower, upper) = ctx.config.transition_states()?;
            mode_shifts(&trap, &lower, &upper, ctx.micromotion_correction)?
        }
    };
    let shifts = ModeShifts {
        x: dx,
        y: dy,
        reference: PhononOccupation::new(rb.reference[0], rb.reference[1]),
    };
    let [rabi1, rabi2, intermediate_detuning, two_photon_detuning, decay_intermediate, decay_rydberg] =
        sb.uncertain();
    let ensemble = ParameterEnsemble {
        rabi1,
        rabi2,
        intermediate_detuning,
        two_photon_detuning,
        decay_intermediate,
        decay_rydberg,
        samples: rb.samples,
        seed: ctx.seed,
    };
    Ok(DynamicsSetup {
        scheme,
        ensemble,
        shifts,
        times: grid(0.0, rb.duration_s, rb.points),
    })
}

fn thermal(nbar: [f64; 2]) -> Result<PhononDistribution, CliError> {
    Ok(thermal_distribution(
        nbar[0],
        nbar[1],
        thermal_cutoff(nbar[0], nbar[1]),
    )?)
}

pub fn rabi(ctx: &Context, full: bool) -> Result<Report, CliError> {
    let rb = ctx.config.rabi_block()?;
    let s = dynamics_setup(ctx)?;
    let dist = thermal(rb.nbar)?;
    let band = monte_carlo_band(&s.ensemble, &dist, &s.shifts, &s.times)?;
    if !full {
        let mut t = Table::new(&["time_s", "p0_median", "p0_lo", "p0_hi"]);
        for p in &band {
            t.push(vec![
                p.time.into(),
                p.median.into(),
                p.lower.into(),
                p.upper.into(),
            ]);
        }
        return Ok(Report::Table(t));
    }

    let nominal = weighted_population(&s.scheme, &dist, &s.shifts, &s.times)?;
    let tol = Tolerances {
        rtol: ctx.config.defaults.integrator_rtol,
        atol: ctx.config.defaults.integrator_atol,
        ..Tolerances::default()
    };
    let locked = phonon_detuning(&s.scheme, s.shifts.reference, &s.shifts);
    let states = evolve_with(&locked, &DensityState::pure(Level::Qubit), &s.times, tol)?;
    let mut t = Table::new(&[
        "time_s",
        "p0_median",
        "p0_lo",
        "p0_hi",
        "p0_nominal",
        "p_qubit_ref",
        "p_intermediate_ref",
        "p_rydberg_ref",
        "p_sink_ref",
    ]);
    for ((p, n), r) in band.iter().zip(&nominal).zip(&states) {
        let pops = r.populations();
        t.push(vec![
            p.time.into(),
            p.median.into(),
            p.lower.into(),
            p.upper.into(),
            (*n).into(),
            pops[0].into(),
            pops[1].into(),
            pops[2].into(),
            pops[3].into(),
        ]);
    }
    Ok(Report::Table(t))
}

pub fn figure(ctx: &Context, name: FigureName, args: &FigureArgs) -> Result<Report, CliError> {
    match name {
        FigureName::Fig1b => fig1b(ctx, args.n_max),
        FigureName::Fig2b => fig2b(ctx, args),
        FigureName::Fig3 => fig3(ctx),
        FigureName::Fig4 => fig4(ctx),
    }
}

/// Resonance shift against n_x (n_y = 0) and against n_y (n_x = 0).
fn fig1b(ctx: &Context, n_max: u32) -> Result<Report, CliError> {
    let trap = ctx.config.trap_config()?;
    let (lower, upper) = ctx.config.transition_states()?;
    let mm = ctx.micromotion_correction;
    let at = |n: PhononOccupation| transition_shift(&trap, &lower, &upper, n, mm);
    let base = at(PhononOccupation::new(0, 0))?;
    let mut t = Table::new(&["n", "shift_x_hz", "shift_y_hz"]);
    for n in 0..=n_max {
        let sx = (at(PhononOccupation::new(n, 0))? - base) / PLANCK;
        let sy = (at(PhononOccupation::new(0, n))? - base) / PLANCK;
        t.push(vec![f64::from(n).into(), sx.into(), sy.into()]);
    }
    Ok(Report::Table(t))
}

/// Resonance shift against the x offset field around a null at `args.null`.
fn fig2b(ctx: &Context, args: &FigureArgs) -> Result<Report, CliError> {
    if !(args.noise_hz >= 0.0 && args.sweep > 0.0 && args.points >= 3) {
        return Err(CliError::config(
            "fig2b needs noise >= 0, sweep > 0 and at least 3 points",
        ));
    }
    let trap = ctx.config.trap_config()?;
    let (lower, upper) = ctx.config.transition_states()?;
    let mm = ctx.micromotion_correction;
    let noise = Normal::new(0.0, args.noise_hz).map_err(|e| CliError::config(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let mut t = Table::new(&["control", "shift_hz", "clean_shift_hz", "sigma_hz"]);
    for c in grid(args.null - args.sweep, args.null + args.sweep, args.points) {
        let off = OffsetField::new(c - args.null, 0.0).map_err(CliError::from_config_input)?;
        let du = stark_delta(&trap, &off, &upper, mm)?.exact;
        let dl = stark_delta(&trap, &off, &lower, mm)?.exact;
        let clean = (du - dl) / PLANCK;
        t.push(vec![
            c.into(),
            (clean + noise.sample(&mut rng)).into(),
            clean.into(),
            args.noise_hz.into(),
        ]);
    }
    Ok(Report::Table(t))
}

/// Model spectra of the configured occupation at each of the panel offset fields.
fn fig3(ctx: &Context) -> Result<Report, CliError> {
    let sb = ctx.config.spectrum_block()?;
    let trap = ctx.config.trap_config()?;
    let states = ctx.config.transition_states()?;
    let mut t = Table::new(&[
        "field_v_per_m",
        "detuning_hz",
        "rate",
        "depletion",
        "sideband_weight",
    ]);
    for &field in &sb.fig3_fields {
        let off =
            OffsetField::new(field, sb.offset_field[1]).map_err(CliError::from_config_input)?;
        let tr = transition(ctx, &trap, &states, off, sb.occupation());
        let model = tr.spectrum_model(
            hz_to_angular(sb.rabi_hz),
            hz_to_angular(sb.linewidth_hz),
            sb.background_rate,
        )?;
        let side = model.weights.sideband_weight();
        let span = hz_to_angular(sb.span_hz);
        for d in grid(model.center - span, model.center + span, sb.points) {
            t.push(vec![
                field.into(),
                angular_to_hz(d).into(),
                model.scattering_rate(d).into(),
                model.signal(SignalKind::Depletion, d, sb.exposure_s).into(),
                side.into(),
            ]);
        }
    }
    t.sort_by_leading();
    Ok(Report::Table(t))
}

/// Bands for the configured (sideband-cooled) and the Doppler-cooled distributions.
fn fig4(ctx: &Context) -> Result<Report, CliError> {
    let rb = ctx.config.rabi_block()?;
    let s = dynamics_setup(ctx)?;
    let cooled = monte_carlo_band(&s.ensemble, &thermal(rb.nbar)?, &s.shifts, &s.times)?;
    let doppler = monte_carlo_band(&s.ensemble, &thermal(rb.doppler_nbar)?, &s.shifts, &s.times)?;
    let mut t = Table::new(&[
        "time_s",
        "cooled_median",
        "cooled_lo",
        "cooled_hi",
        "doppler_median",
        "doppler_lo",
        "doppler_hi",
    ]);
    let cells = |p: &BandPoint| -> [Cell; 3] { [p.median.into(), p.lower.into(), p.upper.into()] };
    for (a, b) in cooled.iter().zip(&doppler) {
        let mut row = vec![a.time.into()];
        row.extend(cells(a));
        row.extend(cells(b));
        t.push(row);
    }
    Ok(Report::Table(t))
}
