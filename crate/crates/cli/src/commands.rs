use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use blender_core::dynamics::{cone_check, orbit, write_orbit_csv};
use blender_core::growth::{run_contradiction_experiment, write_summary_json, ExperimentVerdict};
use blender_core::measures::{
    empirical, historic_from_points, historic_indicator, w1, write_w1_csv, EmpiricalMeasure, W1Row, HISTORIC_FLOOR,
};
use blender_core::params::{search_params, validate_blender_params, ParamRanges};
use blender_core::schedule::{check_d2, D2Verdict};
use blender_core::symbolic::{classify_majority, classify_one_filling, decode, encode, orbit_from_code, ONE_FILLING_TOL};
use serde::Serialize;
use serde_json::json;

use crate::config::Config;
use crate::error::{CliError, CliResult};

pub struct Ctx {
    pub cfg: Config,
    pub out: PathBuf,
}

impl Ctx {
    fn create(&self, name: &str) -> CliResult<BufWriter<File>> {
        std::fs::create_dir_all(&self.out)?;
        Ok(BufWriter::new(File::create(self.out.join(name))?))
    }

    fn json<T: Serialize>(&self, name: &str, v: &T) -> CliResult<()> {
        let mut w = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, v).map_err(blender_core::Error::from)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }
}

/// Every command except the parameter commands refuses to run on a set that
/// fails the inequality systems.
pub fn require_valid(cfg: &Config) -> CliResult<()> {
    let r = validate_blender_params(&cfg.params())?;
    if r.ok {
        return Ok(());
    }
    let labels: Vec<String> = r.violations.iter().map(|v| format!("{} ({})", v.constraint, v.clause)).collect();
    Err(CliError::Validation(labels.join(", ")))
}

pub fn validate_params(ctx: &Ctx) -> CliResult<()> {
    let r = validate_blender_params(&ctx.cfg.params())?;
    ctx.json("validate_params.json", &r)?;
    if r.ok {
        Ok(())
    } else {
        Err(CliError::Validation(format!("{} violated inequalities", r.violations.len())))
    }
}

pub fn search(ctx: &Ctx) -> CliResult<()> {
    let seed = ctx.cfg.seed()?;
    let ranges = ctx.cfg.ranges.unwrap_or_else(|| ParamRanges::pinned(&ctx.cfg.params()));
    let p = search_params(&ranges, seed, ctx.cfg.search.unwrap_or_default())?;
    ctx.json("search_params.json", &json!({ "seed": seed, "params": p }))
}

pub fn orbit_cmd(ctx: &Ctx) -> CliResult<()> {
    let m = ctx.cfg.family()?;
    let states = orbit(&m, ctx.cfg.point()?, ctx.cfg.n()?)?;
    let mut w = ctx.create("orbit.csv")?;
    write_orbit_csv(&states, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn encode_cmd(ctx: &Ctx) -> CliResult<()> {
    let m = ctx.cfg.family()?;
    let c = encode(&m, ctx.cfg.point()?, ctx.cfg.n()?)?;
    ctx.json("encode.json", &json!({ "start": c.start(), "symbols": c.window_string() }))
}

pub fn decode_cmd(ctx: &Ctx) -> CliResult<()> {
    let m = ctx.cfg.family()?;
    let d = decode(&m, &ctx.cfg.code()?, ctx.cfg.n()?)?;
    ctx.json("decode.json", &d)
}

pub fn classify(ctx: &Ctx) -> CliResult<()> {
    let c = ctx.cfg.code()?;
    let n = ctx.cfg.n()?;
    let maj = classify_majority(&c, n)?;
    let one = classify_one_filling(&c, n, ctx.cfg.tolerance.unwrap_or(ONE_FILLING_TOL))?;
    ctx.json("classify_code.json", &json!({ "majority": maj, "one_filling": one }))
}

/// Either one distance between two explicit atom lists, or a sweep of
/// `W1(delta^n_a, delta^n_b)` over `sizes` for two orbit starts.
pub fn wasserstein(ctx: &Ctx) -> CliResult<()> {
    let cfg = &ctx.cfg;
    if let (Some(mu), Some(nu)) = (&cfg.mu, &cfg.nu) {
        let v = w1(&EmpiricalMeasure::new(mu.clone())?, &EmpiricalMeasure::new(nu.clone())?)?;
        return ctx.json("wasserstein.json", &json!({ "w1": v }));
    }
    let m = cfg.family()?;
    let a = cfg.point()?;
    let b = cfg.other_point.ok_or_else(|| CliError::Config("give 'mu' and 'nu', or 'point', 'other_point' and 'sizes'".into()))?;
    let sizes = cfg.sizes.as_deref().ok_or_else(|| CliError::Config("missing field 'sizes'".into()))?;
    let mut rows = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let t = Instant::now();
        let v = w1(&empirical(&m, a, n)?, &empirical(&m, b, n)?)?;
        let runtime_ms = if cfg.timing { t.elapsed().as_secs_f64() * 1e3 } else { 0.0 };
        rows.push(W1Row { n, w1: v, runtime_ms });
    }
    let mut w = ctx.create("wasserstein.csv")?;
    write_w1_csv(&rows, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn historic(ctx: &Ctx) -> CliResult<()> {
    let cfg = &ctx.cfg;
    let cps = cfg.checkpoints()?;
    let floor = cfg.floor.unwrap_or(HISTORIC_FLOOR);
    let r = if cfg.code.is_some() {
        let last = *cps.last().unwrap_or(&0) as usize;
        let pts = orbit_from_code(&cfg.params(), &cfg.code()?, last)?;
        historic_from_points(&pts, cps, floor, cfg.cell)?
    } else {
        historic_indicator(&cfg.family()?, cfg.point()?, cps, floor, cfg.cell)?
    };
    ctx.json("historic.json", &r)
}

pub fn schedule_normalize(ctx: &Ctx) -> CliResult<()> {
    let s = ctx.cfg.schedule()?;
    let norm = s.normalize();
    let density = ctx.cfg.horizon.map(|n| norm.d1_density(n));
    ctx.json(
        "schedule.json",
        &json!({ "was_normalized": s.is_normalized(), "schedule": norm, "horizon": ctx.cfg.horizon, "d1_density": density }),
    )
}

pub fn check_d2_cmd(ctx: &Ctx) -> CliResult<()> {
    let cfg = &ctx.cfg;
    let r = check_d2(&cfg.family()?, &cfg.region()?, &cfg.code()?, &cfg.schedule()?, cfg.horizon()?, cfg.refine.unwrap_or(2))?;
    ctx.json("check_d2.json", &r)?;
    match r.verdict {
        D2Verdict::Fail => Err(CliError::Validation("containment fails".into())),
        _ => Ok(()),
    }
}

pub fn cone(ctx: &Ctx) -> CliResult<()> {
    let cfg = &ctx.cfg;
    let seed = cfg.seed()?;
    let m = cfg.family()?;
    let r = cone_check(&m, cfg.params().eps, cfg.cone.unwrap_or_default(), seed)?;
    ctx.json("cone_check.json", &r)?;
    if r.violations > 0 {
        return Err(CliError::Validation(format!("{} cone violations", r.violations)));
    }
    Ok(())
}

pub fn growth(ctx: &Ctx) -> CliResult<()> {
    let cfg = &ctx.cfg;
    let mut ec = cfg.growth.ok_or_else(|| CliError::Config("missing field 'growth'".into()))?;
    if let Some(r) = cfg.resolution {
        ec.resolution = r;
    }
    let r = run_contradiction_experiment(&cfg.family()?, &cfg.region()?, &cfg.code()?, &cfg.schedule()?, &ec)?;
    let mut w = ctx.create("growth_summary.json")?;
    write_summary_json(&r, &mut w)?;
    writeln!(w)?;
    w.flush()?;
    let mut w = ctx.create("growth_ledger.csv")?;
    r.write_ledger_csv(&mut w)?;
    w.flush()?;
    ctx.json("growth_report.json", &r)?;
    if r.verdict == ExperimentVerdict::GateFailed {
        return Err(CliError::Infeasible("1-filling gate fails; no verdict".into()));
    }
    Ok(())
}

pub fn out_dir(out: Option<&Path>) -> PathBuf {
    out.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."))
}
