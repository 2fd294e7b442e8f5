use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use elliptica_core::elliptic::{EllipticCurve, Tau};
use elliptica_core::identities::{registry, SamplePlan};
use elliptica_core::painleve::{
    integrate, monodromy_residual, PVIConstants, PVIState, ResidualMode, StepperConfig,
};
use elliptica_core::report::run_suite_report;
use elliptica_core::Error;
use num_complex::Complex64;

use crate::args::{CheckArgs, Format, ListArgs, PviArgs, TableArgs};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_HALT: i32 = 3;

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Runtime(String),
    /// The reader closed stdout early.
    BrokenPipe,
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Runtime(_) => EXIT_FAIL,
            Failure::BrokenPipe => EXIT_PASS,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Runtime(m) => f.write_str(m),
            Failure::BrokenPipe => f.write_str("broken pipe"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidTau(_)
            | Error::Config(_)
            | Error::UnknownCheck(_)
            | Error::AllSamplesRejected { .. }
            | Error::Domain(_)
            | Error::Slot { .. } => Failure::Usage(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        if e.kind() == io::ErrorKind::BrokenPipe {
            Failure::BrokenPipe
        } else {
            Failure::Runtime(format!("i/o error: {e}"))
        }
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => io.into(),
            kind => Failure::Runtime(format!("csv error: {kind:?}")),
        }
    }
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(
            File::create(p).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", p.display())))?,
        ),
        None => Box::new(io::stdout().lock()),
    })
}

fn fmt_c(c: Complex64) -> String {
    format!("{}{:+}i", c.re, c.im)
}

pub fn check(args: &CheckArgs, hint: bool) -> Result<i32, Failure> {
    let tau_list = args
        .tau_list
        .iter()
        .map(|t| Tau::new(*t))
        .collect::<Result<Vec<_>, _>>()?;
    let plan = SamplePlan {
        seed: args.seed,
        count: args.count,
        n_list: args.n_list.clone(),
        tau_list,
        pole_guard: args.pole_guard,
    };
    let report = run_suite_report(args.ids.as_deref(), &plan, &args.overrides())?;
    let mut out = sink(args.output.as_deref())?;
    match args.format {
        Format::Json => {
            out.write_all(report.to_json()?.as_bytes())?;
            out.write_all(b"\n")?;
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record([
                "id",
                "pass",
                "samples_run",
                "max_residual",
                "mean_residual",
                "tolerance",
            ])?;
            for c in &report.checks {
                w.write_record([
                    c.id.clone(),
                    c.pass.to_string(),
                    c.samples_run.to_string(),
                    format!("{:e}", c.max_residual),
                    format!("{:e}", c.mean_residual),
                    format!("{:e}", c.tolerance),
                ])?;
            }
            w.flush()?;
        }
    }
    for c in &report.checks {
        eprintln!(
            "{} {:<24} max {:.2e} (tol {:.0e}, {} samples)",
            if c.pass { "PASS" } else { "FAIL" },
            c.id,
            c.max_residual,
            c.tolerance,
            c.samples_run
        );
    }
    eprintln!(
        "{}: {} checks, wall time {:.2} s",
        if report.pass { "pass" } else { "fail" },
        report.checks.len(),
        report.wall_time_s
    );
    if hint {
        eprintln!(
            "# gnuplot (needs --format csv -o report.csv):\n\
             set datafile separator ','; set logscale y; set style fill solid; set xtics rotate\n\
             plot 'report.csv' every ::1 using 0:4:xtic(1) with boxes title 'max residual', \\\n\
             \x20    '' every ::1 using 0:6 with points pt 7 title 'tolerance'"
        );
    }
    Ok(if report.pass { EXIT_PASS } else { EXIT_FAIL })
}

pub fn pvi(args: &PviArgs, hint: bool) -> Result<i32, Failure> {
    let nu: [Complex64; 4] = args
        .nu
        .clone()
        .try_into()
        .map_err(|v: Vec<Complex64>| Failure::Usage(format!("--nu needs 4 values, got {}", v.len())))?;
    if args.hbar.is_empty() {
        return Err(Failure::Usage("--hbar needs at least one value".into()));
    }
    let constants = PVIConstants::new(nu);
    let initial = PVIState {
        u: args.u0,
        v: args.v0,
        tau: Tau::new(args.tau0)?,
    };
    let config = StepperConfig {
        rtol: args.rtol,
        atol: args.atol,
        max_step: args.max_step,
        pole_guard: args.pole_guard,
        fixed_step: args.fixed_step,
        ..StepperConfig::default()
    };
    let tr = integrate(&initial, &constants, args.n, args.tau1, &config).map_err(|e| match e {
        Error::Pole { .. } => Failure::Usage(format!("initial point rejected: {e}")),
        e => e.into(),
    })?;

    let mut w = csv::Writer::from_writer(sink(args.output.as_deref())?);
    let mut header: Vec<String> = ["tau_re", "tau_im", "u_re", "u_im", "v_re", "v_im"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((0..args.hbar.len()).map(|k| format!("residual_hbar{k}")));
    header.extend(["local_error".to_string(), "min_pole_distance".to_string()]);
    w.write_record(&header)?;
    let mut max_residual = 0.0f64;
    for p in &tr.points {
        let state = PVIState {
            u: p.u,
            v: p.v,
            tau: Tau::new(p.tau)?,
        };
        let mut row = vec![
            p.tau.re.to_string(),
            p.tau.im.to_string(),
            p.u.re.to_string(),
            p.u.im.to_string(),
            p.v.re.to_string(),
            p.v.im.to_string(),
        ];
        for h in &args.hbar {
            let r = monodromy_residual(&state, &constants, *h, args.n, ResidualMode::Analytic)?;
            max_residual = max_residual.max(r);
            row.push(format!("{r:e}"));
        }
        row.push(format!("{:e}", p.local_error));
        row.push(p.min_pole_distance.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;

    let end = tr.last();
    eprintln!("summary");
    eprintln!("  rank N = {}", args.n);
    eprintln!(
        "  constants ν = [{}]",
        nu.iter().map(|c| fmt_c(*c)).collect::<Vec<_>>().join(", ")
    );
    if args.n % 2 == 0 {
        eprintln!(
            "  even N: the flow sees the single constant ν² = Σ ν_a² = {:.6}",
            constants.effective_nu_squared()
        );
        if constants.nu.iter().filter(|c| c.norm() > 0.0).count() > 1 {
            eprintln!("  note: with more than one nonzero ν_a the even-N cross terms do not cancel");
        }
    }
    eprintln!("  points = {}", tr.points.len());
    eprintln!(
        "  endpoint τ = {}, u = {}, v = {}",
        fmt_c(end.tau),
        fmt_c(end.u),
        fmt_c(end.v)
    );
    eprintln!(
        "  max residual over path and {} ħ-samples = {max_residual:.3e} (threshold {:.0e})",
        args.hbar.len(),
        args.threshold
    );
    if hint {
        eprintln!(
            "# gnuplot (needs -o traj.csv):\n\
             set datafile separator ','; set key autotitle columnhead; set y2tics; set logscale y2\n\
             plot 'traj.csv' using 2:3 with lines, '' using 2:4 with lines, \\\n\
             \x20    '' using 2:7 axes x1y2 with lines"
        );
    }
    if let Some(h) = &tr.halt {
        eprintln!("  halted: {h}");
        return Ok(EXIT_HALT);
    }
    let ok = max_residual < args.threshold;
    eprintln!(
        "  status = {}",
        if ok { "ok" } else { "residual above threshold" }
    );
    Ok(if ok { EXIT_PASS } else { EXIT_FAIL })
}

pub fn table(args: &TableArgs, hint: bool) -> Result<i32, Failure> {
    let tau = Tau::new(args.tau)?;
    let curve = EllipticCurve::new(tau)?;
    let points: Vec<Complex64> = match args.z {
        Some(z) => vec![z],
        None => {
            let (a, b) = args.grid;
            let mut v = Vec::with_capacity(a * b);
            for j in 0..a {
                for k in 0..b {
                    v.push(Complex64::new(j as f64 / a as f64, 0.0) + tau.value() * (k as f64 / b as f64));
                }
            }
            v
        }
    };
    let u = args.u;
    let mut w = csv::Writer::from_writer(sink(args.output.as_deref())?);
    w.write_record([
        "z_re",
        "z_im",
        "u_re",
        "u_im",
        "phi_re",
        "phi_im",
        "E1_re",
        "E1_im",
        "E2_re",
        "E2_im",
        "wp_re",
        "wp_im",
        "pole_flag",
    ])?;
    let mut flagged = 0;
    for z in points {
        let near = tau.lattice_distance(z) < args.pole_eps || tau.lattice_distance(u) < args.pole_eps;
        let values = if near {
            None
        } else {
            (|| -> elliptica_core::Result<[Complex64; 4]> {
                Ok([curve.phi(z, u)?, curve.e1(z)?, curve.e2(z)?, curve.wp(z)?])
            })()
            .ok()
            .filter(|vs| vs.iter().all(|c| c.re.is_finite() && c.im.is_finite()))
        };
        let mut row = vec![
            z.re.to_string(),
            z.im.to_string(),
            u.re.to_string(),
            u.im.to_string(),
        ];
        match values {
            Some(vs) => {
                for c in vs {
                    row.push(c.re.to_string());
                    row.push(c.im.to_string());
                }
                row.push("0".into());
            }
            None => {
                flagged += 1;
                row.extend(std::iter::repeat(String::new()).take(8));
                row.push("1".into());
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    if flagged > 0 {
        eprintln!("{flagged} row(s) pole-flagged");
    }
    if hint {
        eprintln!(
            "# gnuplot (needs -o table.csv):\n\
             set datafile separator ','; set key autotitle columnhead\n\
             splot 'table.csv' every ::1 using 1:2:(($13==0) ? sqrt($5**2+$6**2) : 1/0) with points"
        );
    }
    Ok(EXIT_PASS)
}

pub fn list(args: &ListArgs) -> Result<i32, Failure> {
    let reg = registry();
    let mut out = io::stdout().lock();
    match args.format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(["id", "default_tolerance", "ranks", "identity"])?;
            for c in &reg {
                w.write_record([
                    c.id.clone(),
                    format!("{:e}", c.default_tolerance),
                    format!("{:?}", c.ranks),
                    c.anchor.clone(),
                ])?;
            }
            w.flush()?;
        }
        Format::Json => {
            let entries: Vec<serde_json::Value> = reg
                .iter()
                .map(|c| {
                    serde_json::json!({
                        "id": c.id,
                        "default_tolerance": c.default_tolerance,
                        "ranks": format!("{:?}", c.ranks),
                        "identity": c.anchor,
                        "arity": c.arity,
                    })
                })
                .collect();
            let text = serde_json::to_string_pretty(&entries)
                .map_err(|e| Failure::Runtime(format!("serializing list: {e}")))?;
            writeln!(out, "{text}")?;
        }
    }
    Ok(EXIT_PASS)
}
