//! Subcommand pipelines. Each one fills a [`Report`] and a set of CSV tables.

use std::collections::BTreeMap;

use anosov_core::dimensions::{
    box_count, falconer_estimate_from_cache, gap_fit_from_cache, gap_theorem_report, limit_set_sample,
    omega_sample, shadow_cover_report, walk_section, walk_seed, FalconerEstimate, GapFit, GapTheoremReport,
    SampleInfo, ShellCache, TheoremCheck, WalkSection,
};
use anosov_core::functionals::{duality_check, gap_combinatorics, GapRecord};
use anosov_core::rng::{stream, sub_seed};
use anosov_core::walks::CheckStatus;
use anosov_core::{Representation, SeparatedPairs, Signature, WeylVector};
use rand::Rng;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, SCHEMA_VERSION};
use crate::error::CliResult;
use crate::output::{num, opt, Table};

/// Largest acceptable duality error.
pub const DUALITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    DualityTest,
    GapCombinatorics,
    Walk,
    Falconer,
    Minkowski,
    CheckGap,
    Shadow,
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::DualityTest => "duality-test",
            Command::GapCombinatorics => "gap-combinatorics",
            Command::Walk => "walk",
            Command::Falconer => "falconer",
            Command::Minkowski => "minkowski",
            Command::CheckGap => "check-gap",
            Command::Shadow => "shadow",
            Command::Report => "report",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    /// SHA-256 of the config file bytes.
    pub config_hash: String,
    pub seed: u64,
    pub build_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub subcommand: String,
    pub provenance: Provenance,
    pub results: BTreeMap<String, Value>,
    /// Names of theorem checks that failed beyond tolerance.
    pub anomalies: Vec<String>,
    /// Stages that could not run; their fields are marked unavailable.
    pub partial: Vec<String>,
    pub status: String,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Report,
    pub tables: Vec<Table>,
}

impl Outcome {
    pub fn has_anomaly(&self) -> bool {
        !self.report.anomalies.is_empty()
    }

    /// 2 when some check failed beyond tolerance, 0 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.has_anomaly() {
            2
        } else {
            0
        }
    }

    pub fn to_json(&self) -> String {
        crate::output::report_json(&serde_json::to_value(&self.report).expect("report serializes"))
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }
}

pub fn config_hash(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    rho: Representation,
    sig: Signature,
    seed: u64,
    results: BTreeMap<String, Value>,
    tables: Vec<Table>,
    anomalies: Vec<String>,
    partial: Vec<String>,
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("result serializes")
}

fn status_name(s: CheckStatus) -> String {
    match to_value(&s) {
        Value::String(s) => s,
        _ => unreachable!("unit variant"),
    }
}

impl Ctx<'_> {
    fn put<T: Serialize>(&mut self, key: &str, x: &T) {
        self.results.insert(key.into(), to_value(x));
    }

    fn fail(&mut self, stage: &str, e: impl std::fmt::Display) {
        log::warn!("{stage}: {e}");
        self.partial.push(format!("{stage}: {e}"));
        self.results.insert(stage.into(), Value::Null);
    }

    fn record_checks(&mut self, checks: &[TheoremCheck]) {
        let mut t = Table::new("checks", &["name", "lhs", "rhs", "tol", "status"]);
        for c in checks {
            if c.status == CheckStatus::Anomaly {
                self.anomalies.push(c.name.clone());
            }
            t.push(vec![c.name.clone(), opt(c.lhs), opt(c.rhs), num(c.tol), status_name(c.status)]);
        }
        self.tables.push(t);
    }

    fn shell_cache(&mut self) -> Option<ShellCache> {
        let p = &self.cfg.pressure;
        match ShellCache::new(&self.rho, &self.sig, p.n_min, p.n_max) {
            Ok(c) => Some(c),
            Err(e) => {
                self.fail("shells", e);
                None
            }
        }
    }
}

/// Runs one subcommand on a validated config.
pub fn run(cfg: &ExperimentConfig, config_bytes: &[u8], command: Command, seed: Option<u64>) -> CliResult<Outcome> {
    let seed = seed.unwrap_or(cfg.seed);
    let mut ctx = Ctx {
        cfg,
        rho: cfg.representation(),
        sig: cfg.signature(),
        seed,
        results: BTreeMap::new(),
        tables: Vec::new(),
        anomalies: Vec::new(),
        partial: Vec::new(),
    };
    ctx.put(
        "setup",
        &json!({
            "d": cfg.d,
            "signature": cfg.signature,
            "generators": cfg.generators.iter().map(|g| g.name.to_string()).collect::<Vec<_>>(),
            "flag_dimension": anosov_core::functionals::flag_dimension(&ctx.sig),
        }),
    );
    match command {
        Command::DualityTest => duality(&mut ctx),
        Command::GapCombinatorics => combinatorics(&mut ctx),
        Command::Walk => walks(&mut ctx),
        Command::Falconer => {
            if let Some(cache) = ctx.shell_cache() {
                falconer(&mut ctx, &cache);
            }
        }
        Command::Minkowski => minkowski(&mut ctx),
        Command::CheckGap => {
            check_gap(&mut ctx);
        }
        Command::Shadow => {
            if let Some(cache) = ctx.shell_cache() {
                let fit = gap_fit_from_cache(&cache);
                let f = falconer_estimate_from_cache(&cache).ok();
                shadow(&mut ctx, &fit, f.as_ref());
            }
        }
        Command::Report => {
            let report = check_gap(&mut ctx);
            if let Some(cache) = ctx.shell_cache() {
                pressure_table(&mut ctx, &cache);
            }
            match &report.gap_fit {
                Some(fit) => shadow(&mut ctx, fit, report.falconer.as_ref()),
                None => ctx.fail("shadow", "no gap fit"),
            }
        }
    }
    ctx.anomalies.sort();
    ctx.anomalies.dedup();
    let status = if !ctx.anomalies.is_empty() {
        "ANOMALY"
    } else if !ctx.partial.is_empty() {
        "PARTIAL"
    } else {
        "PASS"
    };
    let report = Report {
        schema_version: SCHEMA_VERSION,
        subcommand: command.name().into(),
        provenance: Provenance {
            config_hash: config_hash(config_bytes),
            seed,
            build_id: concat!("anosov-lab ", env!("CARGO_PKG_VERSION")).into(),
        },
        results: ctx.results,
        anomalies: ctx.anomalies,
        partial: ctx.partial,
        status: status.into(),
    };
    Ok(Outcome { report, tables: ctx.tables })
}

/// Random chamber vector with all consecutive gaps in `[0.05, 2)`.
fn random_chamber_vector<R: Rng>(d: usize, rng: &mut R) -> WeylVector {
    let mut v = vec![0.0; d];
    for i in (0..d - 1).rev() {
        v[i] = v[i + 1] + rng.gen_range(0.05..2.0);
    }
    let mean = v.iter().sum::<f64>() / d as f64;
    WeylVector::from_unsorted(v.into_iter().map(|x| x - mean).collect())
}

fn duality(ctx: &mut Ctx) {
    let cfg = &ctx.cfg.duality;
    let mut rng = stream(ctx.seed, 0);
    let mut t = Table::new("duality", &["sample", "dimension", "falconer_max", "max_err_r", "max_err_h"]);
    let (mut worst_r, mut worst_h) = (0.0f64, 0.0f64);
    for s in 0..cfg.samples {
        let a = random_chamber_vector(ctx.cfg.d, &mut rng);
        let r = duality_check(&a, &ctx.sig, cfg.grid_points).expect("roots are positive by construction");
        worst_r = worst_r.max(r.max_err_r);
        worst_h = worst_h.max(r.max_err_h);
        t.push(vec![
            s.to_string(),
            r.dimension.to_string(),
            num(r.falconer_max),
            num(r.max_err_r),
            num(r.max_err_h),
        ]);
    }
    let ok = worst_r <= DUALITY_TOL && worst_h <= DUALITY_TOL;
    if !ok {
        ctx.anomalies.push("duality".into());
    }
    ctx.put(
        "duality",
        &json!({
            "samples": cfg.samples,
            "grid_points": cfg.grid_points,
            "max_err_r": worst_r,
            "max_err_h": worst_h,
            "tol": DUALITY_TOL,
            "status": if ok { "PASS" } else { "ANOMALY" },
        }),
    );
    ctx.tables.push(t);
}

fn claims_hold(r: &GapRecord) -> bool {
    r.slack >= 0 && r.steps.iter().all(|s| s.claim_contains && s.claim_increment.unwrap_or(true))
}

fn combinatorics(ctx: &mut Ctx) {
    let d = ctx.cfg.d;
    let records: Vec<GapRecord> =
        (1..d).map(|k| gap_combinatorics(&ctx.sig, k).expect("k in range")).collect();
    let mut t = Table::new("gap_combinatorics", &["k", "a_k", "b_sum", "m", "slack", "claims_hold"]);
    for r in &records {
        t.push(vec![
            r.k.to_string(),
            r.a_k.to_string(),
            r.b_k.iter().map(|&(_, b)| b).sum::<usize>().to_string(),
            r.ps.len().to_string(),
            r.slack.to_string(),
            claims_hold(r).to_string(),
        ]);
    }
    if !records.iter().all(claims_hold) {
        ctx.anomalies.push("gap_combinatorics".into());
    }
    ctx.put("gap_combinatorics", &records);
    ctx.tables.push(t);
}

fn walk_tables(ctx: &mut Ctx, sections: &[WalkSection]) {
    let mut ent = Table::new("walk_entropy", &["walk", "n", "entropy", "rate", "increment", "support"]);
    let mut exp = Table::new("walk_exponents", &["walk", "i", "mean", "std_err"]);
    for s in sections {
        let inc = s.entropy.increments();
        for n in 0..s.entropy.entropies.len() {
            ent.push(vec![
                s.name.clone(),
                (n + 1).to_string(),
                num(s.entropy.entropies[n]),
                num(s.entropy.rates[n]),
                num(inc[n]),
                s.entropy.support[n].to_string(),
            ]);
        }
        for (i, (m, e)) in s.exponents.mean.iter().zip(&s.exponents.std_err).enumerate() {
            exp.push(vec![s.name.clone(), (i + 1).to_string(), num(*m), num(*e)]);
        }
    }
    ctx.tables.push(ent);
    ctx.tables.push(exp);
}

fn walks(ctx: &mut Ctx) {
    let growth = ctx.cfg.theorem_params(ctx.seed).growth;
    let mut sections = Vec::new();
    for (k, w) in ctx.cfg.walk_inputs().iter().enumerate() {
        match walk_section(&ctx.rho, &ctx.sig, w, walk_seed(ctx.seed, k), ctx.cfg.gap_tol, growth.as_ref()) {
            Ok(s) => sections.push(s),
            Err(e) => ctx.fail(&format!("walk:{}", w.name), e),
        }
    }
    ctx.put("walks", &sections);
    walk_tables(ctx, &sections);
}

fn pressure_table(ctx: &mut Ctx, cache: &ShellCache) {
    let curves: Vec<_> = ctx.cfg.r_grid().iter().map(|&r| cache.pressure(r)).collect();
    let mut t = Table::new("pressure", &["n", "A_n", "log A_n", "r"]);
    for c in &curves {
        for (n, l) in c.ns.iter().zip(&c.log_a_n) {
            t.push(vec![n.to_string(), num(l.exp()), num(*l), num(c.r)]);
        }
    }
    let slopes: Vec<Value> = curves
        .iter()
        .map(|c| json!({"r": c.r, "slope": c.slope, "intercept": c.intercept, "residual": c.residual}))
        .collect();
    ctx.put("pressure", &slopes);
    ctx.tables.push(t);
}

fn falconer_tables(ctx: &mut Ctx, f: &FalconerEstimate) {
    let mut t = Table::new("falconer_types", &["type_order", "words", "ceiling", "shifted"]);
    for ty in &f.per_type {
        t.push(vec![ty.type_order.clone(), ty.words.to_string(), opt(ty.ceiling), opt(ty.shifted)]);
    }
    ctx.tables.push(t);
}

fn falconer(ctx: &mut Ctx, cache: &ShellCache) {
    pressure_table(ctx, cache);
    match falconer_estimate_from_cache(cache) {
        Ok(f) => {
            falconer_tables(ctx, &f);
            ctx.put("falconer", &f);
        }
        Err(e) => ctx.fail("falconer", e),
    }
}

fn sample_table(t: &mut Table, set: &str, info: &SampleInfo) {
    for (eps, n) in info.eps_grid.iter().zip(&info.counts) {
        t.push(vec![set.into(), num(*eps), num(-eps.ln()), n.to_string()]);
    }
}

fn minkowski_header() -> Table {
    Table::new("minkowski", &["set", "eps", "log_inv_eps", "count"])
}

fn minkowski(ctx: &mut Ctx) {
    let Some(cache) = ctx.shell_cache() else { return };
    let fit = gap_fit_from_cache(&cache);
    ctx.put("gap_fit", &fit);
    let params = ctx.cfg.theorem_params(ctx.seed);
    let mut t = minkowski_header();
    match fit.require_anosov() {
        Ok(()) => {
            let floor = fit.sampling_error(params.limit_depth);
            match limit_set_sample(&ctx.rho, &ctx.sig, params.limit_depth, params.limit_count, params.seed, params.gap_tol)
                .and_then(|c| box_count(&c, floor, &params))
            {
                Ok((est, info)) => {
                    sample_table(&mut t, "limit_set", &info);
                    ctx.put("minkowski_limit_set", &est);
                    ctx.put("limit_sample", &info);
                }
                Err(e) => ctx.fail("minkowski_limit_set", e),
            }
        }
        Err(e) => ctx.fail("minkowski_limit_set", e),
    }
    match omega_sample(&ctx.rho, &ctx.sig, params.omega_depth, params.omega_count, params.seed ^ 1, params.gap_tol)
        .and_then(|c| box_count(&c, 0.0, &params))
    {
        Ok((est, info)) => {
            sample_table(&mut t, "omega", &info);
            ctx.put("minkowski_omega", &est);
            ctx.put("omega_sample", &info);
        }
        Err(e) => ctx.fail("minkowski_omega", e),
    }
    ctx.tables.push(t);
}

fn gap_fit_table(ctx: &mut Ctx, fit: &GapFit) {
    let mut t = Table::new("gap_fit", &["p", "n", "min_log_gap", "slope", "intercept"]);
    for g in &fit.per_p {
        for (n, y) in fit.ns.iter().zip(&g.min_log_gap) {
            t.push(vec![g.p.to_string(), n.to_string(), num(*y), num(g.slope), num(g.intercept)]);
        }
    }
    ctx.tables.push(t);
}

fn check_gap(ctx: &mut Ctx) -> GapTheoremReport {
    let params = ctx.cfg.theorem_params(ctx.seed);
    let walks = ctx.cfg.walk_inputs();
    let report = gap_theorem_report(&ctx.rho, &ctx.sig, &params, &walks);
    if let Some(fit) = &report.gap_fit {
        gap_fit_table(ctx, fit);
    }
    if let Some(f) = &report.falconer {
        falconer_tables(ctx, f);
    }
    let mut t = minkowski_header();
    if let Some(info) = &report.limit_sample {
        sample_table(&mut t, "limit_set", info);
    }
    if let Some(info) = &report.omega_sample {
        sample_table(&mut t, "omega", info);
    }
    ctx.tables.push(t);
    walk_tables(ctx, &report.walks);
    ctx.record_checks(&report.checks);
    ctx.partial.extend(report.errors.iter().cloned());
    ctx.put("gap_theorem", &report);
    report
}

fn shadow(ctx: &mut Ctx, fit: &GapFit, falconer: Option<&FalconerEstimate>) {
    if ctx.cfg.shadow.is_none() {
        return;
    }
    if let Err(e) = fit.require_anosov() {
        return ctx.fail("shadow", e);
    }
    let top = SeparatedPairs::new(&ctx.sig).len();
    let q = match (ctx.cfg.shadow.as_ref().and_then(|s| s.q), falconer) {
        (Some(q), _) => q,
        (None, Some(f)) => (f.estimate.value.ceil() as usize).clamp(1, top),
        (None, None) => return ctx.fail("shadow", "no Falconer estimate to fix the stopping root"),
    };
    let params = ctx.cfg.shadow_params(q, sub_seed(ctx.seed, 7)).expect("shadow section present");
    let ray = ctx.cfg.ray().expect("validated config");
    match shadow_cover_report(&ctx.rho, &ctx.sig, &ray, &params) {
        Ok(r) => {
            if r.status == CheckStatus::Anomaly {
                ctx.anomalies.push("shadow_cover".into());
            }
            let mut t = Table::new(
                "shadow",
                &["ray", "stopping_index", "q", "eps", "empirical_count", "log_bound", "bound_with_slack", "ratio", "status"],
            );
            t.push(vec![
                r.ray.clone(),
                r.stopping_index.to_string(),
                params.q.to_string(),
                num(params.eps),
                r.empirical_count.to_string(),
                num(r.log_bound),
                num(r.bound_with_slack),
                num(r.ratio),
                status_name(r.status),
            ]);
            ctx.tables.push(t);
            ctx.put("shadow", &json!({"params": to_value(&params), "report": to_value(&r)}));
        }
        Err(e) => ctx.fail("shadow", e),
    }
}
