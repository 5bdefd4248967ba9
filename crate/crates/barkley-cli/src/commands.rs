//! Subcommand bodies. Numbers are printed in the shortest form that parses
//! back to the same double.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use barkley_core::melnikov::DEFAULT_QUAD_TOL;
use barkley_core::model_core::{middle_equilibrium, DEFAULT_UB_TOL};
use barkley_core::pde_sim::{build_initial_profile, level_crossings, measure_wave_speed, run};
use barkley_core::spectra::{kinetics_stability, EquilibriumSpectrum};
use barkley_core::{
    classify_hyperbolicity, compute_equilibria, continue_loop, eval_melnikov_suite, melnikov_direct_b,
    predict_small_eigenvalues, return_times, shoot_connection, solve_loop_at_zeta, solve_singular_parameters,
    verify_hypotheses, BarkleyError, Boundary, MelnikovReport, ModelParams, ProfileKind, ShootConfig, Side, SimConfig,
    Tolerances,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::ConfigFile;
use crate::{
    BetaArgs, BoundaryArg, CliError, ContinueArgs, EquilibriaArgs, KindArg, NFrontArgs, ScanArgs, ShootArgs, SideArg,
    SimulateArgs, SpectraArgs, SpeedArgs, VerifyArgs,
};

pub const DEFAULT_SEED: u64 = 0x5eed;
const DEFAULT_EPS: f64 = 1e-3;
const DEFAULT_ZETA: f64 = 0.05;

pub const SCAN_HEADER: &str = "r,Mhat_f,M_f,Mhat_b,M_b,Mtilde_f,Mhat,dQf_du,dQb_du,dQf_dmu,dQb_dmu,quad_err";

/// Shortest round-trip text of `x`, switching to exponent form outside `[1e-4, 1e15)`.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn open_out(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Worker pool capped by `BARKLEY_THREADS` when set.
fn thread_pool() -> Result<rayon::ThreadPool, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(raw) = std::env::var("BARKLEY_THREADS") {
        let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
            invalid(format!("BARKLEY_THREADS must be a positive integer, got `{raw}`"))
        })?;
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| CliError::Io(e.to_string()))
}

fn point(p: barkley_core::PhasePoint) -> String {
    format!("({}, {}, {})", num(p.q), num(p.s), num(p.u))
}

pub fn equilibria(file: &ConfigFile, a: EquilibriaArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let s = file.section("equilibria", &["r"])?;
    let r: f64 = s.require("r", a.r)?;
    let e = compute_equilibria(r, DEFAULT_UB_TOL)?;
    writeln!(out, "r = {r}")?;
    writeln!(out, "u_b = {}", e.u_b)?;
    writeln!(out, "X1 = {}", point(e.x1))?;
    writeln!(out, "X2 = {}", point(e.x2))?;
    writeln!(out, "Y1 = {}", point(e.y1))?;
    writeln!(out, "Y2 = {}", point(e.y2))?;
    writeln!(out, "q_f+ = {}", e.q_f_plus)?;
    writeln!(out, "q_f- = {}", e.q_f_minus)?;
    writeln!(out, "q_b+ = {}", e.q_b_plus)?;
    writeln!(out, "q_b- = {}", e.q_b_minus)?;
    match middle_equilibrium(r, DEFAULT_UB_TOL) {
        Ok((q, u)) => {
            let st = kinetics_stability(q, u, r, DEFAULT_EPS)?;
            writeln!(out, "middle = ({q}, {u}) {st:?}")?;
        }
        Err(BarkleyError::NoRoot(_)) => writeln!(out, "middle = none")?,
        Err(e) => return Err(e.into()),
    }
    Ok(())
}

fn write_spectrum(out: &mut dyn Write, name: &str, e: &EquilibriumSpectrum) -> Result<(), CliError> {
    let [l1, l2, l3] = e.spectral.lambda;
    writeln!(out, "{name} = {}", point(e.point))?;
    writeln!(out, "{name}.lambda = {}, {}, {}", num(l1), num(l2), num(l3))?;
    match e.spectral.beta {
        Some(b) => writeln!(out, "{name}.beta = {b}")?,
        None => writeln!(out, "{name}.beta = none")?,
    }
    writeln!(out, "{name}.residual = {}", num(e.spectral.residual))?;
    Ok(())
}

pub fn spectra(file: &ConfigFile, a: SpectraArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let s = file.section("spectra", &["r", "eps", "D", "mu", "c"])?;
    let r: f64 = s.require("r", a.r)?;
    let eps = s.or("eps", a.eps, DEFAULT_EPS)?;
    let c = s.or("c", a.c, 0.0)?;
    let (d, mu) = match (s.get("D", a.d)?, s.get("mu", a.mu)?) {
        (Some(d), Some(mu)) => (d, mu),
        (d, mu) => {
            let lp = solve_singular_parameters(r)?;
            (d.unwrap_or(lp.d0), mu.unwrap_or(lp.mu0))
        }
    };
    let params = ModelParams::from_mu(r, d, mu, eps, c)?;
    let eqs = compute_equilibria(r, DEFAULT_UB_TOL)?;
    let h = classify_hyperbolicity(&eqs, &params)?;
    writeln!(out, "r = {r}")?;
    writeln!(out, "eps = {eps}")?;
    writeln!(out, "D = {d}")?;
    writeln!(out, "mu = {mu}")?;
    writeln!(out, "c = {c}")?;
    write_spectrum(out, "X1", &h.x1)?;
    write_spectrum(out, "X2", &h.x2)?;
    writeln!(out, "H0 = {}", h.h0)?;
    writeln!(out, "H1 = {}", h.h1)?;
    Ok(())
}

pub fn scan_row(m: &MelnikovReport) -> String {
    let cols = [
        m.r, m.mhat_f, m.m_f, m.mhat_b, m.m_b, m.mtilde_f, m.mhat, m.dqf_du, m.dqb_du, m.dqf_dmu, m.dqb_dmu, m.quad_err,
    ];
    cols.iter().map(|&v| num(v)).collect::<Vec<_>>().join(",")
}

pub fn scan_grid(r_min: f64, r_max: f64, steps: usize) -> Vec<f64> {
    if steps == 1 {
        return vec![r_min];
    }
    let h = (r_max - r_min) / (steps - 1) as f64;
    (0..steps).map(|i| if i + 1 == steps { r_max } else { r_min + i as f64 * h }).collect()
}

pub fn melnikov_scan(file: &ConfigFile, a: ScanArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let s = file.section("melnikov-scan", &["r-min", "r-max", "steps", "out"])?;
    let r_min: f64 = s.require("r-min", a.r_min)?;
    let r_max: f64 = s.require("r-max", a.r_max)?;
    let steps: usize = s.require("steps", a.steps)?;
    let path: Option<PathBuf> = s.get("out", a.out)?;
    if !r_min.is_finite() || !r_max.is_finite() || r_min > r_max {
        return Err(invalid(format!("need finite r-min <= r-max, got {r_min} and {r_max}")));
    }
    if r_min <= 2.0 / 3.0 {
        return Err(invalid(format!("r-min must exceed 2/3, got {r_min}")));
    }
    if steps == 0 {
        return Err(invalid("steps must be positive"));
    }
    let grid = scan_grid(r_min, r_max, steps);
    let pool = thread_pool()?;
    let rows: Vec<Result<MelnikovReport, BarkleyError>> =
        pool.install(|| grid.par_iter().map(|&r| eval_melnikov_suite(r, DEFAULT_QUAD_TOL)).collect());
    let mut text = String::with_capacity(64 * (steps + 1));
    text.push_str(SCAN_HEADER);
    text.push('\n');
    for (r, row) in grid.iter().zip(rows) {
        let row = row.map_err(|e| match e {
            e if e.is_input_error() => CliError::Core(e),
            e => CliError::Core(BarkleyError::NoConvergence(format!("r = {r}: {e}"))),
        })?;
        text.push_str(&scan_row(&row));
        text.push('\n');
    }
    match path {
        Some(p) => {
            let mut w = open_out(&p)?;
            w.write_all(text.as_bytes())?;
            w.flush()?;
        }
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

pub fn find_beta(file: &ConfigFile, a: BetaArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let s = file.section("find-beta", &["tol"])?;
    let tol = s.or("tol", a.tol, 1e-10)?;
    let beta = barkley_core::find_beta(tol)?;
    writeln!(out, "beta = {beta:.10}")?;
    Ok(())
}

pub fn verify(file: &ConfigFile, a: VerifyArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let s = file.section("verify", &["r", "eps", "c", "json"])?;
    let r: f64 = s.require("r", a.r)?;
    let eps = s.or("eps", a.eps, DEFAULT_EPS)?;
    let c = s.or("c", a.c, 0.0)?;
    let json = a.json || s.or("json", None, false)?;
    let v = verify_hypotheses(r, eps, c, &Tolerances::default())?;
    if json {
        let text = serde_json::to_string_pretty(&v).map_err(|e| CliError::Io(e.to_string()))?;
        writeln!(out, "{text}")?;
        return Ok(());
    }
    writeln!(out, "r = {r}")?;
    writeln!(out, "eps = {eps}")?;
    writeln!(out, "c = {c}")?;
    for e in &v.hypotheses {
        let status = serde_json::to_value(e.status).map_err(|e| CliError::Io(e.to_string()))?;
        let mut line = format!("{:?} {}", e.id, status.as_str().unwrap_or("?"));
        for (k, x) in &e.evidence {
            line.push_str(&format!(" {k}={}", num(*x)));
        }
        if let Some(note) = &e.note {
            line.push_str(&format!(" ({note})"));
        }
        writeln!(out, "{line}")?;
    }
    writeln!(out, "overall = {}", v.overall)?;
    Ok(())
}

pub fn shoot(file: &ConfigFile, a: ShootArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let s = file.section("shoot", &["side", "r", "eps", "out"])?;
    let side = match s.require::<SideArg>("side", a.side)? {
        SideArg::Front => Side::Front,
        SideArg::Back => Side::Back,
    };
    let r: f64 = s.require("r", a.r)?;
    let eps = s.or("eps", a.eps, DEFAULT_EPS)?;
    let path: Option<PathBuf> = s.get("out", a.out)?;
    let lp = solve_singular_parameters(r)?;
    let orbit = shoot_connection(side, r, eps, (lp.d0, lp.mu0), &ShootConfig::default())?;
    writeln!(out, "side = {}", side.name())?;
    writeln!(out, "r = {r}")?;
    writeln!(out, "eps = {eps}")?;
    writeln!(out, "D0 = {}", lp.d0)?;
    writeln!(out, "mu0 = {}", lp.mu0)?;
    writeln!(out, "D_hat = {}", orbit.d_hat)?;
    writeln!(out, "mu_hat = {}", orbit.mu_hat)?;
    writeln!(out, "miss_norm = {}", num(orbit.miss_norm))?;
    writeln!(out, "span_capped = {}", orbit.span_capped)?;
    writeln!(out, "end = {}", point(orbit.end_point()))?;
    if let Some(p) = path {
        let mut w = open_out(&p)?;
        writeln!(w, "xi,q,s,u")?;
        for (xi, x) in &orbit.trajectory {
            writeln!(w, "{},{},{},{}", num(*xi), num(x.q), num(x.s), num(x.u))?;
        }
        w.flush()?;
    }
    Ok(())
}

fn parse_list(raw: &str) -> Result<Vec<f64>, CliError> {
    raw.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| invalid(format!("bad number `{t}` in list `{raw}`"))))
        .collect()
}

pub fn continuation(file: &ConfigFile, a: ContinueArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let s = file.section("continue", &["r", "eps-list"])?;
    let r: f64 = s.require("r", a.r)?;
    let raw: String = s.or("eps-list", a.eps_list, "1e-2,1e-3,1e-4".to_string())?;
    let grid = parse_list(&raw)?;
    if grid.iter().any(|&e| !(e > 0.0) || !e.is_finite()) {
        return Err(invalid(format!("eps values must be positive, got `{raw}`")));
    }
    let table = continue_loop(r, &grid, &ShootConfig::default())?;
    let lp = solve_singular_parameters(r)?;
    writeln!(out, "eps,D_hat,mu_hat,miss_norm,iterations,jacobian_condition")?;
    for row in &table.rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            num(row.eps),
            num(row.d_hat),
            num(row.mu_hat),
            num(row.miss_norm),
            row.iterations,
            num(row.jacobian_condition)
        )?;
    }
    writeln!(out, "# singular D0 = {}, mu0 = {}", lp.d0, lp.mu0)?;
    if let Some((d, mu)) = table.extrapolate() {
        writeln!(out, "# extrapolated D = {d}, mu = {mu}")?;
    }
    if let Some(msg) = table.aborted {
        return Err(CliError::Core(BarkleyError::NoConvergence(format!("continuation stopped at {msg}"))));
    }
    Ok(())
}

fn joined(v: impl Iterator<Item = f64>) -> String {
    v.map(num).collect::<Vec<_>>().join(", ")
}

pub fn nfront_times(file: &ConfigFile, a: NFrontArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let s = file.section("nfront-times", &["N", "rho", "r", "eps"])?;
    let n: usize = s.require("N", a.n)?;
    let rho: f64 = s.require("rho", a.rho)?;
    let r: f64 = s.require("r", a.r)?;
    let eps = s.or("eps", a.eps, DEFAULT_EPS)?;
    let lp = solve_singular_parameters(r)?;
    let params = ModelParams::from_mu(r, lp.d0, lp.mu0, eps, 0.0)?;
    let h = classify_hyperbolicity(&lp.eqs, &params)?;
    let times = return_times(rho, n, &h.x1.spectral, &h.x2.spectral)?;
    let m_front = melnikov_direct_b(Side::Front, &lp, DEFAULT_QUAD_TOL)?;
    let m_back = melnikov_direct_b(Side::Back, &lp, DEFAULT_QUAD_TOL)?;
    writeln!(out, "N = {n}")?;
    writeln!(out, "rho = {rho}")?;
    writeln!(out, "beta1 = {}", times.beta1)?;
    writeln!(out, "beta2 = {}", times.beta2)?;
    writeln!(out, "eta = {}", joined(times.eta.iter().copied()))?;
    writeln!(out, "tau = {}", joined(times.tau.iter().copied()))?;
    writeln!(out, "sigma = {}", joined(times.sigma.iter().copied()))?;
    writeln!(out, "M_front = {m_front}")?;
    writeln!(out, "M_back = {m_back}")?;
    writeln!(out, "index,exponent,sign")?;
    for ev in predict_small_eigenvalues(&times, m_front, m_back) {
        match ev.exponent {
            Some(p) => writeln!(out, "{},{p},{}", ev.index, ev.sign)?,
            None => writeln!(out, "{},translation,{}", ev.index, ev.sign)?,
        }
    }
    Ok(())
}

fn profile_kind(kind: KindArg, l: f64, x0: Option<f64>, n_fronts: usize, spacing: f64) -> ProfileKind {
    let x0 = x0.unwrap_or(0.3 * l);
    match kind {
        KindArg::Laminar => ProfileKind::UniformLaminar,
        KindArg::Turbulent => ProfileKind::UniformTurbulent,
        KindArg::Front => ProfileKind::SimpleFront { x0 },
        KindArg::Back => ProfileKind::SimpleBack { x0 },
        KindArg::Nfront => ProfileKind::NFront { n: n_fronts, x0, spacings: vec![spacing; 2 * n_fronts] },
    }
}

pub fn simulate(file: &ConfigFile, a: SimulateArgs, seed: u64, out: &mut dyn Write) -> Result<(), CliError> {
    let keys = ["kind", "r", "eps", "L", "n", "T", "snap-every", "out-dir", "D", "zeta", "x0", "N", "spacing", "bc", "noise"];
    let s = file.section("simulate", &keys)?;
    let kind: KindArg = s.require("kind", a.kind)?;
    let r: f64 = s.require("r", a.r)?;
    let eps = s.or("eps", a.eps, DEFAULT_EPS)?;
    let l = s.or("L", a.l, 40.0)?;
    let n = s.or("n", a.n, 1000)?;
    let t_end = s.or("T", a.t, 10.0)?;
    let snap_every = s.or("snap-every", a.snap_every, 1.0)?;
    let dir: PathBuf = s.or("out-dir", a.out_dir, PathBuf::from("."))?;
    let zeta = s.or("zeta", a.zeta, DEFAULT_ZETA)?;
    let x0 = s.get("x0", a.x0)?;
    let n_fronts = s.or("N", a.n_fronts, 2)?;
    let spacing = s.or("spacing", a.spacing, 5.0)?;
    let bc = match s.or("bc", a.bc, BoundaryArg::Outflow)? {
        BoundaryArg::Periodic => Boundary::Periodic,
        BoundaryArg::Outflow => Boundary::Outflow,
    };
    let noise = s.or("noise", a.noise, 0.0)?;
    if !(t_end >= 0.0) || !(snap_every > 0.0) || !t_end.is_finite() || !snap_every.is_finite() {
        return Err(invalid(format!("need T >= 0 and snap-every > 0, got {t_end} and {snap_every}")));
    }
    if !(noise >= 0.0) || !noise.is_finite() {
        return Err(invalid(format!("noise must be non-negative, got {noise}")));
    }
    let eqs = compute_equilibria(r, DEFAULT_UB_TOL)?;
    let d = match s.get("D", a.d)? {
        Some(d) => d,
        None => solve_singular_parameters(r)?.d0,
    };
    let params = ModelParams::new(r, d, zeta, eps, 0.0)?;
    let kind = profile_kind(kind, l, x0, n_fronts, spacing);
    let mut field = build_initial_profile(&kind, &eqs, &params, l, n, bc)?;
    if noise > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for q in field.q.iter_mut() {
            *q += noise * rng.gen::<f64>();
        }
    }
    let cfg = SimConfig { sample_every: snap_every, ..SimConfig::new(params, t_end) };
    fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let level = 0.5 * eqs.q_b_plus;
    let mut index = 0usize;
    let mut lines = Vec::new();
    let mut io_err: Option<CliError> = None;
    run(&mut field, &cfg, t_end, |f| {
        let path = dir.join(format!("snap_{index:05}.dat"));
        let written = open_out(&path).and_then(|mut w| {
            f.write_snapshot(&mut w)?;
            w.flush()?;
            Ok(())
        });
        if let Err(e) = written {
            io_err = Some(e);
            return Err(BarkleyError::InvalidInput("snapshot write failed".into()));
        }
        let q_max = f.q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        lines.push(format!("{index},{},{},{q_max}", f.t, level_crossings(f, level).len()));
        index += 1;
        Ok(())
    })
    .map_err(|e| io_err.take().unwrap_or(CliError::Core(e)))?;
    writeln!(out, "snapshot,t,crossings,q_max")?;
    for line in lines {
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn speed(file: &ConfigFile, a: SpeedArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let s = file.section("speed", &["kind", "r", "eps", "zeta", "L", "n", "T", "level"])?;
    let kind = s.or("kind", a.kind, KindArg::Front)?;
    let r: f64 = s.require("r", a.r)?;
    let eps = s.or("eps", a.eps, DEFAULT_EPS)?;
    let zeta = s.or("zeta", a.zeta, DEFAULT_ZETA)?;
    let l = s.or("L", a.l, 40.0)?;
    let n = s.or("n", a.n, 1000)?;
    let t_end = s.or("T", a.t, 40.0)?;
    let frac = s.or("level", a.level, 0.5)?;
    if !(frac > 0.0 && frac < 1.0) {
        return Err(invalid(format!("level must lie in (0, 1), got {frac}")));
    }
    let lp = solve_singular_parameters(r)?;
    let sol = solve_loop_at_zeta(r, eps, zeta, (lp.d0, lp.mu0), 1e-8, 10, &ShootConfig::default())?;
    let params = ModelParams::new(r, sol.d_hat, zeta, eps, 0.0)?;
    let c = -sol.mu_hat - zeta;
    let plateau = match kind {
        KindArg::Front => lp.eqs.q_f_plus,
        KindArg::Back => lp.eqs.q_b_plus,
        _ => return Err(invalid("speed needs --kind front or --kind back")),
    };
    let profile = profile_kind(kind, l, None, 1, 0.0);
    let f = build_initial_profile(&profile, &lp.eqs, &params, l, n, Boundary::Outflow)?;
    let cfg = SimConfig { frame_speed: c, ..SimConfig::new(params, t_end) };
    let fit = measure_wave_speed(&f, &cfg, frac * plateau)?;
    writeln!(out, "r = {r}")?;
    writeln!(out, "eps = {eps}")?;
    writeln!(out, "zeta = {zeta}")?;
    writeln!(out, "D_hat = {}", sol.d_hat)?;
    writeln!(out, "predicted_c = {c}")?;
    writeln!(out, "measured_c = {}", fit.c)?;
    writeln!(out, "relative_difference = {}", (fit.c - c) / c)?;
    writeln!(out, "fit_residual = {}", num(fit.fit_residual))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_hits_both_ends() {
        let g = scan_grid(0.67, 2.5, 51);
        assert_eq!(g.len(), 51);
        assert_eq!(g[0], 0.67);
        assert_eq!(g[50], 2.5);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(scan_grid(1.0, 2.0, 1), vec![1.0]);
    }

    #[test]
    fn numbers_round_trip() {
        for x in [0.0, -0.0, 1.2e-11, 0.1, 1.0 / 3.0, -7.5e20, 1e-4, 9.99e14, f64::MIN_POSITIVE] {
            assert_eq!(num(x).parse::<f64>().unwrap().to_bits(), x.to_bits(), "{x}");
        }
        assert_eq!(num(1.5e-11), "1.5e-11");
        assert_eq!(num(0.25), "0.25");
    }

    #[test]
    fn list_parsing() {
        assert_eq!(parse_list("1e-2, 1e-3").unwrap(), vec![1e-2, 1e-3]);
        assert!(parse_list("1e-2,x").is_err());
    }
}
