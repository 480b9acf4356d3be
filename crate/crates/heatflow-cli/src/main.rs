mod args;

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use num_complex::Complex64;

use args::{Cli, Command, Format, Mode, RunArgs};
use heatflow::dynamics::{default_t0, integrate, IntegrateOptions};
use heatflow::measure::{asymptotic_checks, log_potential, stieltjes, trace_support, Regime, TraceOptions, TraceRegion};
use heatflow::plot::Scene;
use heatflow::polyheat::{expand_power, heat_evolve, resolve_precision, HeatTime, PolySpec, ScaledCoeffPoly};
use heatflow::relevance::{select_in_fan, GridOptions, Region};
use heatflow::roots::{find_all_roots, EmpiricalMeasure};
use heatflow::saddle::{branch_locus, solve_saddles};
use heatflow::verify::{circle_samples, hermite_oracle, reports_to_json, rotation_identity, run_all, support_bound_suite, ResidualReport};

enum Fail {
    /// Bad configuration or input file.
    Parse(String),
    /// A numerical routine reported failure.
    Numeric(String),
    /// A verification suite did not pass.
    Verify(String),
}

impl Fail {
    fn code(&self) -> u8 {
        match self {
            Fail::Verify(_) => 1,
            Fail::Parse(_) => 2,
            Fail::Numeric(_) => 3,
        }
    }
}

fn numeric(e: impl std::fmt::Display) -> Fail {
    Fail::Numeric(e.to_string())
}

struct Ctx {
    args: RunArgs,
}

impl Ctx {
    fn spec(&self) -> Result<PolySpec, Fail> {
        let path = self.args.spec.as_ref().ok_or_else(|| Fail::Parse("--spec is required for this command".into()))?;
        let text = fs::read_to_string(path).map_err(|e| Fail::Parse(format!("cannot read {}: {e}", path.display())))?;
        let spec = PolySpec::from_json(&text).map_err(|e| Fail::Parse(format!("{}: {e}", path.display())))?;
        match self.args.n_override {
            Some(n) => spec.with_n(n).map_err(|e| Fail::Parse(e.to_string())),
            None => Ok(spec),
        }
    }

    fn real_t(&self) -> Result<f64, Fail> {
        let t = self.args.t;
        if t.im != 0.0 || t.re <= 0.0 {
            return Err(Fail::Parse(format!("this command needs a positive real t, got {t}")));
        }
        Ok(t.re)
    }

    fn grid(&self) -> GridOptions {
        GridOptions { resolution: self.args.resolution as usize, ..GridOptions::default() }
    }

    fn wants(&self, f: Format) -> bool {
        self.args.format.contains(&f)
    }

    fn write(&self, name: &str, content: &str) -> Result<PathBuf, Fail> {
        fs::create_dir_all(&self.args.out).map_err(|e| Fail::Parse(format!("cannot create {}: {e}", self.args.out.display())))?;
        let path = self.args.out.join(name);
        fs::write(&path, content).map_err(|e| Fail::Parse(format!("cannot write {}: {e}", path.display())))?;
        println!("wrote {}", path.display());
        Ok(path)
    }

    /// Write `name.json` when JSON output is selected and always print it.
    fn report(&self, name: &str, json: &str) -> Result<(), Fail> {
        println!("{json}");
        if self.wants(Format::Json) {
            self.write(&format!("{name}.json"), json)?;
        }
        Ok(())
    }

    fn evolved(&self, spec: &PolySpec) -> Result<ScaledCoeffPoly, Fail> {
        let prec = resolve_precision(self.args.precision, spec.degree());
        if prec < 64 {
            return Err(Fail::Parse(format!("precision must be at least 64 bits, got {prec}")));
        }
        let p = expand_power(spec, prec).map_err(numeric)?;
        heat_evolve(&p, HeatTime::new(self.args.t), spec.degree()).map_err(numeric)
    }

    fn zeros(&self, spec: &PolySpec) -> Result<EmpiricalMeasure, Fail> {
        find_all_roots(&self.evolved(spec)?, 1e-30).map_err(numeric)
    }

    fn trace_options(&self) -> TraceOptions {
        TraceOptions {
            region: self.args.region.map(|(c, r)| TraceRegion::from_region(&Region::disk(c, r))),
            grid: self.grid(),
            seed: self.args.seed,
            ..TraceOptions::default()
        }
    }
}

fn c2(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

fn run(cli: Cli) -> Result<(), Fail> {
    if cli.run.workers > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(cli.run.workers).build_global().map_err(|e| Fail::Parse(e.to_string()))?;
    }
    let ctx = Ctx { args: cli.run };
    let t = ctx.args.t;
    match cli.command {
        Command::Evolve => {
            let spec = ctx.spec()?;
            let p = ctx.evolved(&spec)?;
            if ctx.wants(Format::Csv) {
                ctx.write("evolve.csv", &p.to_csv())?;
            }
            if ctx.wants(Format::Json) {
                let coeffs: Vec<serde_json::Value> = (0..=p.degree())
                    .map(|k| serde_json::json!({"log_modulus": p.log_modulus(k), "phase": c2(p.phase(k))}))
                    .collect();
                let v = serde_json::json!({"degree": p.degree(), "precision": p.prec(), "t": c2(t), "coefficients": coeffs});
                ctx.write("evolve.json", &v.to_string())?;
            }
        }
        Command::Zeros => {
            let spec = ctx.spec()?;
            let em = ctx.zeros(&spec)?;
            println!("{} zeros", em.len());
            if ctx.wants(Format::Csv) {
                ctx.write("zeros.csv", &em.to_csv())?;
            }
            if ctx.wants(Format::Json) {
                ctx.write("zeros.json", &em.to_json())?;
            }
            if ctx.wants(Format::Svg) {
                let r = 2.0 * t.norm().sqrt() * (1.0 + 1.0 / (2.0 * spec.degree() as f64)).sqrt();
                let disks: Vec<(Complex64, f64)> = spec.lambdas().iter().map(|&l| (l, r)).collect();
                ctx.write("zeros.svg", &Scene::default().with_zeros(&em.points).with_disks(&disks).render(640.0))?;
            }
        }
        Command::Saddles { z } => {
            let spec = ctx.spec()?;
            let fan = solve_saddles(&spec, z, t);
            let cert = select_in_fan(&spec, &fan, &ctx.grid());
            let v = serde_json::json!({
                "fan": fan,
                "certificate": cert.as_ref().ok().map(|c| serde_json::from_str::<serde_json::Value>(&c.to_json()).expect("json")),
                "error": cert.as_ref().err().map(|e| e.to_string()),
            });
            ctx.report("saddles", &v.to_string())?;
            cert.map_err(numeric)?;
        }
        Command::BranchPoints => {
            let spec = ctx.spec()?;
            let locus = branch_locus(&spec, t).map_err(numeric)?;
            if locus.unstable {
                eprintln!("warning: branch-locus interpolation consistency {:.2e}", locus.consistency);
            }
            ctx.report("branch_points", &locus.to_json())?;
        }
        Command::Support { with_zeros, field_cells } => {
            let spec = ctx.spec()?;
            let opts = TraceOptions { field_cells, ..ctx.trace_options() };
            let lm = trace_support(&spec, t, &opts).map_err(numeric)?;
            for w in &lm.warnings {
                eprintln!("warning: {w}");
            }
            println!("{} arcs, total mass {:.9} (trapezoid {:.9}, phase {:.9})", lm.arcs.len(), lm.total_mass, lm.total_mass_trapezoid, lm.total_mass_phase);
            if ctx.wants(Format::Json) {
                ctx.write("support.json", &lm.to_json())?;
            }
            if ctx.wants(Format::Csv) {
                let mut csv = String::from("arc,k,re,im,rho\n");
                for (a, arc) in lm.arcs.iter().enumerate() {
                    for (k, s) in arc.samples.iter().enumerate() {
                        let _ = writeln!(csv, "{a},{k},{:.17e},{:.17e},{:.17e}", s.z.re, s.z.im, s.rho);
                    }
                }
                ctx.write("support.csv", &csv)?;
            }
            if ctx.wants(Format::Svg) {
                let mut scene = Scene::default().with_measure(&lm);
                if with_zeros {
                    // the overlaid zeros are always written alongside the figure
                    let em = ctx.zeros(&spec)?;
                    ctx.write("support_zeros.csv", &em.to_csv())?;
                    scene = scene.with_zeros(&em.points);
                }
                if let Some((c, r)) = ctx.args.region {
                    scene = scene.with_disks(&[(c, r)]);
                }
                ctx.write("support.svg", &scene.render(640.0))?;
            }
        }
        Command::Density { z } => {
            let spec = ctx.spec()?;
            let lm = trace_support(&spec, t, &ctx.trace_options()).map_err(numeric)?;
            let (zp, rho) = lm.density_at(&spec, z).ok_or_else(|| Fail::Numeric("no support arc traced".into()))?;
            let v = serde_json::json!({"z": c2(z), "support_point": c2(zp), "distance": (zp - z).norm(), "density": rho});
            ctx.report("density", &v.to_string())?;
        }
        Command::Potential { z } => {
            let spec = ctx.spec()?;
            let u = log_potential(&spec, z, t, &ctx.grid()).map_err(numeric)?;
            ctx.report("potential", &serde_json::json!({"z": c2(z), "t": c2(t), "potential": u}).to_string())?;
        }
        Command::Stieltjes { z } => {
            let spec = ctx.spec()?;
            let m = stieltjes(&spec, z, t, &ctx.grid()).map_err(numeric)?;
            let v = serde_json::json!({"z": c2(z), "t": c2(t), "m": c2(m.m), "residual": m.residual, "saddle": c2(m.saddle)});
            ctx.report("stieltjes", &v.to_string())?;
        }
        Command::Trajectories { t0 } => {
            let spec = ctx.spec()?;
            let t_end = ctx.real_t()?;
            let t0 = t0.unwrap_or_else(|| default_t0(&spec).min(0.5 * t_end));
            if !(t0 > 0.0 && t0 <= t_end) {
                return Err(Fail::Parse(format!("need 0 < t0 ≤ t, got t0 = {t0}")));
            }
            let b = integrate(&spec, t0, t_end, &IntegrateOptions::default()).map_err(numeric)?;
            let v = serde_json::json!({
                "t0": t0, "t": t_end, "steps": b.times.len() - 1, "rejected": b.rejected,
                "center_of_mass_drift": b.center_of_mass_drift(),
                "min_gap": b.min_gaps.iter().copied().fold(f64::INFINITY, f64::min),
                "endpoint": b.endpoint().iter().map(|&z| c2(z)).collect::<Vec<_>>(),
            });
            ctx.report("trajectories", &v.to_string())?;
            if ctx.wants(Format::Csv) {
                ctx.write("trajectories.csv", &b.to_csv())?;
            }
            if ctx.wants(Format::Svg) {
                ctx.write("trajectories.svg", &Scene::default().with_trajectories(&b).with_zeros(b.endpoint()).render(640.0))?;
            }
        }
        Command::Asymptotics { mode } => {
            let spec = ctx.spec()?;
            let tr = ctx.real_t()?;
            let lm = trace_support(&spec, t, &ctx.trace_options()).map_err(numeric)?;
            let (regime, zeros) = match mode {
                Mode::Small => (Regime::Small, None),
                Mode::Large => (Regime::Large, Some(ctx.zeros(&spec)?.points)),
            };
            let rep = asymptotic_checks(&spec, tr, regime, &lm, zeros.as_deref()).map_err(numeric)?;
            ctx.report("asymptotics", &serde_json::to_string(&rep).expect("json"))?;
        }
        Command::Verify { all } => {
            let mut reports: Vec<ResidualReport> = if all { run_all(ctx.args.seed, ctx.args.precision) } else { Vec::new() };
            if ctx.args.spec.is_some() {
                let spec = ctx.spec()?;
                if t.im == 0.0 && t.re > 0.0 {
                    if spec.d() == 1 {
                        let a = spec.lambdas()[0];
                        reports.push(hermite_oracle(a, t.re, &circle_samples(a, t.re, 100)));
                    }
                    if spec.degree() <= 400 {
                        reports.push(support_bound_suite(&spec, t.re));
                    }
                }
                if spec.degree() <= 200 {
                    let prec = resolve_precision(ctx.args.precision, spec.degree()).max(256);
                    let zs = [Complex64::new(0.3, 0.2), Complex64::new(-1.0, 1.5)];
                    reports.push(rotation_identity(&spec, t, &zs, prec));
                }
            } else if !all {
                return Err(Fail::Parse("verify needs --all or --spec".into()));
            }
            for r in &reports {
                eprintln!("{} {} (max {:.3e}, threshold {:.3e})", if r.pass { "PASS" } else { "FAIL" }, r.name, r.max_residual, r.threshold);
            }
            ctx.report("verify", &reports_to_json(&reports))?;
            let failed: Vec<&str> = reports.iter().filter(|r| !r.pass).map(|r| r.name.as_str()).collect();
            if !failed.is_empty() {
                return Err(Fail::Verify(format!("failed suites: {}", failed.join(", "))));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Fail::Parse(m) => eprintln!("error: {m}"),
                Fail::Numeric(m) => eprintln!("numerical failure: {m}"),
                Fail::Verify(m) => eprintln!("verification failed: {m}"),
            }
            ExitCode::from(f.code())
        }
    }
}
