//! One function per subcommand, each producing a [`Report`] and exit code.

use std::path::Path;

use rhoconn::affine::{
    check_e0_parallel, commutation_check, cov_deriv, cov_deriv_linear, extend_to_bidual, restrict_to_linear,
    verify_extension, AffineCoeffs, AffineConnection, TOL_E0,
};
use rhoconn::connection::{
    check_affine, check_linear, cov_deriv_intrinsic, kernel_diagnostic, AffineCounterexample, AffineFailure,
    AffineVerdict, LinearityCounterexample, Splitting, TOL_CLASSIFY, TOL_HHBAR,
};
use rhoconn::geometry::anchored_derivative;
use rhoconn::linalg::{max_abs, max_abs_diff};
use rhoconn::prolong::{project_j, vertical_lift};
use rhoconn::sampling::Sampler;
use rhoconn::sode::{quadratic_force_check, sode_connection};
use rhoconn::transport::{
    cov_deriv_along, parallel_transport, CurveSpecV, Status, BLOWUP_THRESHOLD,
};
use rhoconn::{BasePoint, BundleSpec, Env, Expr, ProlongedVector, SectionE, SectionV, Var};
use serde_json::{json, Value};

use crate::report::Report;
use crate::specfile::{expr_list, load_spec, Declared, SpecFile};
use crate::{CliError, CovderivArgs, Outcome, Sampling, Suite, TransportArgs};

pub const TOL_SPLITTING: f64 = 1e-10;
pub const TOL_ROUND_TRIP: f64 = 1e-12;
pub const TOL_COMMUTATION: f64 = 1e-10;
pub const TOL_COV_ROUTES: f64 = 1e-10;
pub const TOL_LEIBNIZ: f64 = 1e-9;
/// Scaled tolerance on `|nabla_c psi|` along a computed lift.
pub const TOL_LIFT: f64 = 1e-6;
/// Scaled tolerance on `|x' - rho(x) c|` along a computed base path.
pub const TOL_BASE_PATH: f64 = 1e-6;

/// Ends a report: failed checks exit 1 when `binding`, otherwise they are
/// recorded as a finding and the exit code stays 0.
fn finish(mut report: Report, binding: bool) -> Outcome {
    let exit_code = if report.all_passed() {
        report.status = "ok".into();
        0
    } else if binding {
        report.status = "failed".into();
        1
    } else {
        report.status = "finding".into();
        0
    };
    Outcome { report, exit_code }
}

fn start(command: &str, path: &Path, sampling: Option<&Sampling>) -> Result<(Report, SpecFile), CliError> {
    let file = load_spec(path)?;
    let mut report = Report::new(command);
    report.input("spec", file.path.clone());
    if let Some(s) = sampling {
        report.seed = Some(s.seed);
        report.samples = Some(s.samples as usize);
    }
    Ok((report, file))
}

fn exprs_json(v: &[Expr]) -> Value {
    v.iter().map(ToString::to_string).collect()
}

fn matrix_json(m: &[Vec<Expr>]) -> Value {
    m.iter().map(|row| exprs_json(row)).collect()
}

fn linearity_json(ce: &LinearityCounterexample) -> Value {
    json!({
        "kind": "linearity",
        "x": ce.x, "y1": ce.y1, "y2": ce.y2, "lambda": ce.lambda, "v": ce.v,
        "lhs": ce.lhs, "rhs": ce.rhs, "residual": ce.residual,
        "tolerance": TOL_CLASSIFY,
    })
}

fn affine_json(ce: &AffineCounterexample) -> Value {
    let (failure, beta) = match ce.kind {
        AffineFailure::SecondDifference => ("second_difference", None),
        AffineFailure::NonConstantDerivative { beta } => ("non_constant_derivative", Some(beta + 1)),
    };
    json!({
        "kind": "affineness",
        "failure": failure,
        "beta": beta,
        "x": ce.x, "y": ce.y, "w": ce.w,
        "row": ce.row + 1, "col": ce.col + 1,
        "residual": ce.residual,
        "tolerance": TOL_CLASSIFY,
        "description": ce.to_string(),
    })
}

/// `Γ_{10}=2, Γ_{11}=3` style listing, with the fibre index as a
/// superscript when there is more than one.
pub fn coefficient_summary(coeffs: &AffineCoeffs) -> String {
    let sup = |alpha: usize| if coeffs.e_dim() == 1 { String::new() } else { format!("^{}", alpha + 1) };
    let mut parts = Vec::new();
    for (alpha, row) in coeffs.gamma0().iter().enumerate() {
        for (a, g0) in row.iter().enumerate() {
            parts.push(format!("Γ{}_{{{}0}}={g0}", sup(alpha), a + 1));
            for (beta, g1) in coeffs.gamma1()[alpha][a].iter().enumerate() {
                parts.push(format!("Γ{}_{{{}{}}}={g1}", sup(alpha), a + 1, beta + 1));
            }
        }
    }
    parts.join(", ")
}

fn affine_output(v: &AffineVerdict) -> Value {
    let mut out = json!({
        "holds": v.passed(),
        "max_second_difference": v.max_second_difference,
        "tolerance": v.tolerance,
        "hhbar_residual": v.hhbar_residual,
        "hhbar_tolerance": TOL_HHBAR,
    });
    if let Some(c) = &v.coeffs {
        out["gamma0"] = matrix_json(c.gamma0());
        out["gamma1"] = c.gamma1().iter().map(|row| matrix_json(row)).collect();
    }
    out
}

fn affine_line(v: &AffineVerdict) -> String {
    match (&v.coeffs, v.passed()) {
        (Some(c), true) => format!("affine: yes, {}", coefficient_summary(c)),
        _ => match &v.counterexample {
            Some(ce) => format!("affine: no ({ce})"),
            None => "affine: no (coefficients do not reproduce the connection)".into(),
        },
    }
}

fn random_prolonged(s: &mut Sampler, spec: &BundleSpec) -> ProlongedVector {
    ProlongedVector::new(s.coords(spec.base_dim), s.coords(spec.e_dim), s.coords(spec.v_rank), s.coords(spec.e_dim))
}

/// Largest residual of the projector and co-splitting identities at `pv`.
pub fn splitting_residual(spec: &BundleSpec, pv: &ProlongedVector) -> Result<f64, CliError> {
    let split = Splitting::new(spec);
    let e = pv.base_point();
    let ph = split.projector_h(pv)?;
    let pvv = split.projector_v(pv)?;
    let (_, w) = project_j(&split.horizontal_lift(&e, &pv.v)?);
    let k = split.connection_map(pv)?;
    let residuals = [
        split.projector_h(&ph)?.distance(&ph),
        split.projector_v(&pvv)?.distance(&pvv),
        split.projector_h(&pvv)?.norm(),
        ph.add(&pvv)?.distance(pv),
        max_abs_diff(&w.v, &pv.v),
        max_abs_diff(&split.connection_map(&vertical_lift(spec, &e, &pv.z)?)?, &pv.z),
        vertical_lift(spec, &e, &k)?.add(&split.horizontal_lift(&e, &pv.v)?)?.distance(pv),
    ];
    Ok(residuals.into_iter().fold(0.0, f64::max))
}

pub fn validate(path: &Path, sampling: &Sampling) -> Result<Outcome, CliError> {
    let (mut report, file) = match start("validate", path, Some(sampling)) {
        Err(CliError::InvalidSpec { path, violations }) => {
            // a spec that parses but breaks the dimension or variable rules
            let mut report = Report::new("validate");
            report.input("spec", path);
            report.seed = Some(sampling.seed);
            report.samples = Some(sampling.samples as usize);
            report.verdict("spec_valid", violations.len() as f64, 0.0, false);
            for v in &violations {
                report.note(format!("violation: {v}"));
            }
            report.output("violations", violations);
            return Ok(finish(report, true));
        }
        other => other?,
    };
    let spec = file.bundle()?;
    let samples = sampling.samples as usize;
    let mut s = Sampler::new(sampling.seed);

    report.output("dimensions", json!({"base_dim": spec.base_dim, "v_rank": spec.v_rank, "e_dim": spec.e_dim}));
    report.output("violations", Value::Array(vec![]));
    report.verdict("spec_valid", 0.0, 0.0, true);

    let mut split_worst: f64 = 0.0;
    let mut trip_worst: f64 = 0.0;
    let split = Splitting::new(spec);
    for _ in 0..samples {
        let pv = random_prolonged(&mut s, spec);
        split_worst = split_worst.max(splitting_residual(spec, &pv)?);
        let e = pv.base_point();
        let direct = spec.gamma_at(&e)?;
        for (a, b) in split.recover_gamma(&e)?.iter().zip(&direct) {
            trip_worst = trip_worst.max(max_abs_diff(a, b));
        }
    }
    report.check("projector_algebra", split_worst, TOL_SPLITTING);
    report.check("gamma_round_trip", trip_worst, TOL_ROUND_TRIP);

    let mut kernels = Vec::new();
    for _ in 0..samples.min(4) {
        let x = BasePoint::new(s.coords(spec.base_dim));
        let d = kernel_diagnostic(spec, &x, samples, sampling.seed)?;
        kernels.push(json!({
            "x": d.x,
            "kernel_basis": d.kernel_basis,
            "meets_vertical": d.meets_vertical,
            "witness": d.witness.map(|(y, idx, mag)| json!({"y": y, "basis_index": idx, "magnitude": mag})),
        }));
    }
    if kernels.iter().any(|k| k["meets_vertical"] == Value::Bool(true)) {
        report.note("anchor has a kernel whose horizontal lifts are vertical: Im h meets the vertical bundle");
    }
    report.output("kernel", Value::Array(kernels));

    let lin = check_linear(spec, samples, sampling.seed)?;
    let aff = check_affine(spec, samples, sampling.seed)?;
    report.output(
        "linear",
        json!({"holds": lin.passed(), "max_residual": lin.max_residual, "tolerance": lin.tolerance}),
    );
    report.output("affine", affine_output(&aff));
    report.note(if lin.passed() { "linear: yes" } else { "linear: no" });
    report.note(affine_line(&aff));
    if let Some(ce) = &lin.counterexample {
        report.counterexamples.push(linearity_json(ce));
    }
    if let Some(ce) = &aff.counterexample {
        report.counterexamples.push(affine_json(ce));
    }
    if file.declares(Declared::Linear) {
        report.verdict("declared_linear", lin.max_residual, lin.tolerance, lin.passed());
    }
    if file.declares(Declared::Affine) || file.declares(Declared::Linear) {
        report.verdict("declared_affine", aff.max_second_difference, aff.tolerance, aff.passed());
    }
    Ok(finish(report, true))
}

fn curve_from(args: &TransportArgs, file: &SpecFile, spec: &BundleSpec) -> Result<(CurveSpecV, Vec<f64>), CliError> {
    let block = file.curve.as_ref();
    let c = if !args.curve.is_empty() {
        expr_list("--curve", "curve", &args.curve)?
    } else if let Some(b) = block {
        b.c.clone()
    } else {
        return Err(CliError::Usage("no curve: pass --curve or add a [curve] block".into()));
    };
    let x0 = if !args.x0.is_empty() {
        args.x0.clone()
    } else {
        block.map_or_else(|| vec![0.0; spec.base_dim], |b| b.x0.clone())
    };
    let y0 = if !args.y0.is_empty() {
        args.y0.clone()
    } else {
        block
            .and_then(|b| b.y0.clone())
            .ok_or_else(|| CliError::Usage("no initial fibre value: pass --y0 or set curve.y0".into()))?
    };
    let t0 = args.t0.or(block.and_then(|b| b.t0)).unwrap_or(0.0);
    let t1 = args.t1.or(block.and_then(|b| b.t1)).unwrap_or(1.0);
    let curve = CurveSpecV::new(c, x0, t0, t1).map_err(|e| CliError::Usage(e.to_string()))?;
    if curve.c.len() != spec.v_rank {
        return Err(CliError::Usage(format!("curve has {} components, V has rank {}", curve.c.len(), spec.v_rank)));
    }
    if curve.x0.len() != spec.base_dim || y0.len() != spec.e_dim {
        return Err(CliError::Usage(format!(
            "x0 needs {} and y0 needs {} components",
            spec.base_dim, spec.e_dim
        )));
    }
    Ok((curve, y0))
}

pub fn transport(args: &TransportArgs) -> Result<Outcome, CliError> {
    let (mut report, file) = start("transport", &args.spec, None)?;
    let spec = file.bundle()?;
    let (curve, y0) = curve_from(args, &file, spec)?;
    let steps = args.steps as usize;
    let oracle = if args.oracle.is_empty() {
        None
    } else {
        let o = expr_list("--oracle", "oracle", &args.oracle)?;
        if o.len() != spec.e_dim {
            return Err(CliError::Usage(format!("--oracle needs {} components", spec.e_dim)));
        }
        Some(o)
    };

    report.input("curve", exprs_json(&curve.c));
    report.input("x0", curve.x0.clone());
    report.input("y0", y0.clone());
    report.input("t0", curve.t0);
    report.input("t1", curve.t1);
    report.input("steps", steps);
    report.input("points", args.points);
    if let Some(o) = &oracle {
        report.input("oracle", exprs_json(o));
        report.input("oracle_tol", args.oracle_tol);
    }
    report.output(
        "integrator",
        json!({"method": "rk4", "steps": steps, "blowup_threshold": BLOWUP_THRESHOLD}),
    );

    let result = parallel_transport(spec, &curve, &y0, steps)?;
    let last_t = *result.times.last().expect("results are never empty");
    let points = args.points as usize;
    let span = curve.t1 - curve.t0;
    let times: Vec<f64> = (0..points)
        .map(|i| if i + 1 == points { curve.t1 } else { curve.t0 + span * i as f64 / (points - 1) as f64 })
        .filter(|t| *t <= last_t)
        .collect();
    let samples: Vec<Value> =
        times.iter().map(|t| json!({"t": t, "x": result.x_at(*t), "psi": result.psi_at(*t)})).collect();
    report.output("samples", Value::Array(samples));
    report.output(
        "final",
        json!({"t": last_t, "x": result.x.last(), "psi": result.final_psi()}),
    );

    // x' = rho(x) c along the interpolated base path
    let delta = span / (10.0 * steps as f64);
    let mut base_worst: f64 = 0.0;
    for t in times.iter().filter(|t| **t - delta >= curve.t0 && **t + delta <= last_t) {
        let rate: Vec<f64> = result
            .x_at(t + delta)
            .iter()
            .zip(result.x_at(t - delta))
            .map(|(b, a)| (b - a) / (2.0 * delta))
            .collect();
        let x = result.x_at(*t);
        let expected = rhoconn::linalg::mat_vec(&spec.anchor_at(&x)?, &curve.c_at(*t)?);
        base_worst = base_worst.max(max_abs_diff(&rate, &expected) / (1.0 + max_abs(&expected)));
    }
    report.check("base_admissibility", base_worst, TOL_BASE_PATH);

    match result.status {
        Status::Completed => {
            report.output("status", "completed");
            report.output("t_star", Value::Null);
            let path = result.psi_path();
            let mut lift_worst: f64 = 0.0;
            for t in &times {
                let d = cov_deriv_along(spec, &curve, &path, *t, steps)?;
                let g = spec.gamma_apply(&rhoconn::EPoint::new(result.x_at(*t), result.psi_at(*t)), &curve.c_at(*t)?)?;
                lift_worst = lift_worst.max(max_abs(&d) / (1.0 + max_abs(&g)));
            }
            report.check("horizontal_lift", lift_worst, TOL_LIFT);
            let psi: Vec<String> = result.final_psi().iter().map(|p| format!("{p}")).collect();
            report.note(format!("psi({}) = [{}]", curve.t1, psi.join(", ")));
        }
        Status::BlowUp { t_star } => {
            report.output("status", "blow-up");
            report.output("t_star", t_star);
            report.note(format!("blow-up detected at t* = {t_star}"));
        }
    }

    if let Some(o) = oracle {
        let mut worst: f64 = 0.0;
        for t in &times {
            let expected = o.iter().map(|e| e.eval(&Env::new().with_t(*t))).collect::<Result<Vec<_>, _>>()
                .map_err(|e| CliError::Usage(format!("--oracle: {e}")))?;
            worst = worst.max(max_abs_diff(&result.psi_at(*t), &expected));
        }
        report.check("oracle", worst, args.oracle_tol);
    }
    Ok(finish(report, true))
}

fn suite_linear(report: &mut Report, spec: &BundleSpec, sampling: &Sampling) -> Result<(), CliError> {
    let v = check_linear(spec, sampling.samples as usize, sampling.seed)?;
    report.verdict("linear", v.max_residual, v.tolerance, v.passed());
    if let Some(ce) = &v.counterexample {
        report.counterexamples.push(linearity_json(ce));
    }
    report.note(if v.passed() { "linear: yes" } else { "linear: no" });
    Ok(())
}

fn suite_affine(report: &mut Report, spec: &BundleSpec, sampling: &Sampling) -> Result<(), CliError> {
    let v = check_affine(spec, sampling.samples as usize, sampling.seed)?;
    report.verdict("affine", v.max_second_difference, v.tolerance, v.counterexample.is_none());
    if let Some(r) = v.hhbar_residual {
        report.check("hhbar", r, TOL_HHBAR);
    }
    if let Some(ce) = &v.counterexample {
        report.counterexamples.push(affine_json(ce));
    }
    report.output("affine", affine_output(&v));
    report.note(affine_line(&v));
    Ok(())
}

/// The affineness gate shared by the suites that need coefficients. On
/// failure the gate itself is recorded as a failed check.
fn gate<'a>(report: &mut Report, spec: &'a BundleSpec, sampling: &Sampling) -> Result<Option<AffineConnection<'a>>, CliError> {
    match AffineConnection::from_spec(spec, sampling.samples as usize, sampling.seed) {
        Ok(conn) => Ok(Some(conn)),
        Err(rhoconn::Error::NotAffine(ce)) => {
            report.verdict("affine_gate", ce.residual.abs(), TOL_CLASSIFY, false);
            report.counterexamples.push(affine_json(&ce));
            report.note(format!("affine: no ({ce})"));
            Ok(None)
        }
        Err(e) => Err(e.into()),
    }
}

fn suite_commutation(report: &mut Report, spec: &BundleSpec, sampling: &Sampling) -> Result<(), CliError> {
    let Some(conn) = gate(report, spec, sampling)? else { return Ok(()) };
    let mut s = Sampler::new(sampling.seed);
    let (mut affine_worst, mut linear_worst): (f64, f64) = (0.0, 0.0);
    for _ in 0..sampling.samples {
        let r = commutation_check(&conn, &random_prolonged(&mut s, spec))?;
        affine_worst = affine_worst.max(r.affine);
        linear_worst = linear_worst.max(r.linear);
    }
    let a = report.check("commutation_affine", affine_worst, TOL_COMMUTATION);
    let l = report.check("commutation_linear", linear_worst, TOL_COMMUTATION);
    report.note(format!(
        "commutation: {} (max residual {:e})",
        if a && l { "pass" } else { "fail" },
        affine_worst.max(linear_worst)
    ));
    Ok(())
}

fn suite_leibniz(report: &mut Report, spec: &BundleSpec, sampling: &Sampling) -> Result<(), CliError> {
    let Some(conn) = gate(report, spec, sampling)? else { return Ok(()) };
    let ac = conn.coeffs();
    let lin = conn.linear();
    let vars: Vec<Var> = (1..=spec.base_dim).map(Var::X).collect();
    let mut s = Sampler::new(sampling.seed);
    let (mut routes, mut delf1, mut delf2): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for _ in 0..sampling.samples {
        let zeta = SectionV::new((0..spec.v_rank).map(|_| s.poly(&vars, 2)).collect())?;
        let sigma = SectionE::new((0..spec.e_dim).map(|_| s.poly(&vars, 2)).collect())?;
        let eta = SectionE::new((0..spec.e_dim).map(|_| s.poly(&vars, 2)).collect())?;
        let f = s.poly(&vars, 2);
        let x = BasePoint::new(s.coords(spec.base_dim));

        let nabla = cov_deriv(spec, ac, &zeta, &sigma, &x)?;
        routes = routes.max(max_abs_diff(&nabla, &cov_deriv_intrinsic(spec, &zeta, &sigma, &x)?));

        let fx = f.eval(&Env::new().with_x(&x.x)).map_err(rhoconn::Error::from)?;
        let scaled = cov_deriv(spec, ac, &zeta.scaled(&f), &sigma, &x)?;
        delf1 = delf1.max(max_abs_diff(&scaled, &nabla.iter().map(|c| fx * c).collect::<Vec<_>>()));

        let moved = SectionE::new(
            sigma.components.iter().zip(&eta.components).map(|(a, b)| Expr::add(a.clone(), Expr::mul(f.clone(), b.clone()))).collect(),
        )?;
        let lhs = cov_deriv(spec, ac, &zeta, &moved, &x)?;
        let bar = cov_deriv_linear(spec, &lin, &zeta, &eta, &x)?;
        let df = anchored_derivative(spec, &zeta, &f, &x)?;
        let eta_x = eta.eval(&x.x)?;
        let rhs: Vec<f64> = (0..spec.e_dim).map(|i| nabla[i] + fx * bar[i] + df * eta_x[i]).collect();
        delf2 = delf2.max(max_abs_diff(&lhs, &rhs));
    }
    let ok = [
        report.check("coordinate_vs_intrinsic", routes, TOL_COV_ROUTES),
        report.check("delf1", delf1, TOL_LEIBNIZ),
        report.check("delf2", delf2, TOL_LEIBNIZ),
    ];
    report.note(format!("leibniz: {}", if ok.iter().all(|b| *b) { "pass" } else { "fail" }));
    Ok(())
}

fn suite_e0(report: &mut Report, spec: &BundleSpec, sampling: &Sampling) -> Result<(), CliError> {
    let Some(conn) = gate(report, spec, sampling)? else { return Ok(()) };
    let bc = extend_to_bidual(conn.coeffs());
    let samples = sampling.samples as usize;
    report.check("extension", verify_extension(spec, &bc, samples, sampling.seed)?, TOL_HHBAR);
    let v = check_e0_parallel(spec, &bc, samples, sampling.seed)?;
    report.verdict("e0_parallel", v.max_abs, TOL_E0, v.parallel);
    if let Some((x, a, b, value)) = &v.witness {
        report.counterexamples.push(json!({
            "kind": "e0_not_parallel", "x": x, "a": a + 1, "B": b, "value": value, "tolerance": TOL_E0,
        }));
    }
    report.output(
        "bidual",
        json!({
            "gamma_tilde": bc.gamma_t().iter().map(|row| matrix_json(row)).collect::<Vec<_>>(),
            "e0_parallel": v.parallel,
            "induced_affine": v.induced_affine,
        }),
    );
    report.note(format!("e0 parallel: {}", if v.parallel { "yes" } else { "no" }));
    Ok(())
}

pub fn checks(path: &Path, suite: Suite, sampling: &Sampling) -> Result<Outcome, CliError> {
    let (mut report, file) = start("checks", path, Some(sampling))?;
    report.input("suite", suite.name());
    let spec = file.bundle()?;
    match suite {
        Suite::Linear => suite_linear(&mut report, spec, sampling)?,
        Suite::Affine => suite_affine(&mut report, spec, sampling)?,
        Suite::Commutation => suite_commutation(&mut report, spec, sampling)?,
        Suite::Leibniz => suite_leibniz(&mut report, spec, sampling)?,
        Suite::E0 => suite_e0(&mut report, spec, sampling)?,
    }
    let binding = match suite {
        Suite::Linear => file.declares(Declared::Linear),
        _ => file.declares(Declared::Affine) || file.declares(Declared::Linear),
    };
    Ok(finish(report, binding))
}

pub fn sode(path: &Path, sampling: &Sampling) -> Result<Outcome, CliError> {
    let (mut report, file) = start("sode", path, Some(sampling))?;
    let ss = file.sode.as_ref().ok_or_else(|| CliError::Spec {
        path: file.path.clone(),
        message: "no [sode] block".into(),
    })?;
    report.input("forces", exprs_json(&ss.forces));
    report.input("dof", ss.dof);

    let conn = sode_connection(ss);
    report.output("gamma_j", matrix_json(&conn.gamma_j));
    report.output("gamma_0", exprs_json(&conn.gamma_0));
    for (i, row) in conn.gamma_j.iter().enumerate() {
        for (j, g) in row.iter().enumerate() {
            report.note(format!("Γ^{}_{} = {g}", i + 1, j + 1));
        }
        report.note(format!("Γ^{}_0 = {}", i + 1, conn.gamma_0[i]));
    }

    let v = quadratic_force_check(ss, sampling.samples as usize, sampling.seed)?;
    report.output(
        "quadratic",
        json!({"holds": v.quadratic, "max_third_derivative": v.max_third_derivative, "tolerance": v.tolerance}),
    );
    if let Some(q) = &v.coefficients {
        report.output(
            "force_coefficients",
            json!({
                "f0": exprs_json(&q.f0),
                "f1": matrix_json(&q.f1),
                "f2": q.f2.iter().map(|m| matrix_json(m)).collect::<Vec<_>>(),
            }),
        );
    }
    report.output("affine", affine_output(&v.affine));
    if let Some(w) = &v.witness {
        report.counterexamples.push(json!({
            "kind": "cubic_velocity_term",
            "force": w.force, "indices": w.indices, "t": w.t, "x": w.x, "v": w.v,
            "value": w.value, "tolerance": v.tolerance,
        }));
    }
    if let Some(ce) = &v.affine.counterexample {
        report.counterexamples.push(affine_json(ce));
    }
    // the two classifications must agree
    let agree = v.quadratic == v.affine.passed();
    report.verdict("quadratic_iff_affine", if agree { 0.0 } else { 1.0 }, 0.0, agree);
    let verdict = if v.passed() { "affine" } else { "non-affine" };
    report.output("verdict", verdict);
    report.note(format!("verdict: {verdict}"));
    Ok(finish(report, true))
}

fn sections_from(flag: &[String], fallback: Option<&Vec<Expr>>, name: &str) -> Result<Vec<Expr>, CliError> {
    if !flag.is_empty() {
        expr_list(&format!("--{name}"), name, flag)
    } else {
        fallback.cloned().ok_or_else(|| CliError::Usage(format!("no {name}: pass --{name} or set sections.{name}")))
    }
}

pub fn covderiv(args: &CovderivArgs) -> Result<Outcome, CliError> {
    let (mut report, file) = start("covderiv", &args.spec, Some(&args.sampling))?;
    let spec = file.bundle()?;
    let usage = |e: rhoconn::Error| CliError::Usage(e.to_string());
    let zeta = SectionV::new(sections_from(&args.zeta, file.sections.zeta.as_ref(), "zeta")?).map_err(usage)?;
    let sigma = SectionE::new(sections_from(&args.sigma, file.sections.sigma.as_ref(), "sigma")?).map_err(usage)?;
    if zeta.components.len() != spec.v_rank || sigma.components.len() != spec.e_dim {
        return Err(CliError::Usage(format!(
            "zeta needs {} and sigma needs {} components",
            spec.v_rank, spec.e_dim
        )));
    }
    spec.check_base(&args.x).map_err(usage)?;
    let x = BasePoint::new(args.x.clone());
    report.input("zeta", exprs_json(&zeta.components));
    report.input("sigma", exprs_json(&sigma.components));
    report.input("x", args.x.clone());

    let Some(conn) = gate(&mut report, spec, &args.sampling)? else { return Ok(finish(report, true)) };
    let nabla = cov_deriv(spec, conn.coeffs(), &zeta, &sigma, &x)?;
    let intrinsic = cov_deriv_intrinsic(spec, &zeta, &sigma, &x)?;
    report.output("nabla", nabla.clone());
    report.output("intrinsic", intrinsic.clone());
    report.check("coordinate_vs_intrinsic", max_abs_diff(&nabla, &intrinsic), TOL_COV_ROUTES);

    if let (Some(eta), Some(f)) = (&file.sections.eta, &file.sections.f) {
        let eta = SectionE::new(eta.clone()).map_err(usage)?;
        let lin = restrict_to_linear(conn.coeffs());
        let bar = cov_deriv_linear(spec, &lin, &zeta, &eta, &x)?;
        let moved = SectionE::new(
            sigma.components.iter().zip(&eta.components).map(|(a, b)| Expr::add(a.clone(), Expr::mul(f.clone(), b.clone()))).collect(),
        )?;
        let lhs = cov_deriv(spec, conn.coeffs(), &zeta, &moved, &x)?;
        let fx = f.eval(&Env::new().with_x(&x.x)).map_err(rhoconn::Error::from)?;
        let df = anchored_derivative(spec, &zeta, f, &x)?;
        let eta_x = eta.eval(&x.x)?;
        let rhs: Vec<f64> = (0..spec.e_dim).map(|i| nabla[i] + fx * bar[i] + df * eta_x[i]).collect();
        report.output("nabla_linear_eta", bar);
        report.output("delf2", json!({"lhs": lhs, "rhs": rhs}));
        report.check("delf2", max_abs_diff(&lhs, &rhs), TOL_LEIBNIZ);
    }
    let shown: Vec<String> = nabla.iter().map(|c| format!("{c}")).collect();
    report.note(format!("nabla = [{}]", shown.join(", ")));
    Ok(finish(report, true))
}
