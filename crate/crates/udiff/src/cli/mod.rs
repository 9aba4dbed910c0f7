//! Batch driver: every experiment as a subcommand reading an [`ExperimentConfig`]
//! and writing CSV tables plus a run manifest.
//!
//! Exit codes: 0 success, 2 configuration or parameter error, 3 budget, horizon or
//! non-convergence (partial artifacts are still written).

pub mod config;
pub mod report;

use std::path::{Path, PathBuf};

use crate::diophantine::{br_test, psi_table, BrParams, BrVerdict, ContFrac, FrequencyProfile, PeriodicVector, DEFAULT_LATTICE_BUDGET};
use crate::error::{Error, Result};
use crate::instability::{
    build_bessi, build_linear_diffusion, build_ms, run_linear_diffusion, BessiSource, BjExponent, CoupledMap, CouplingMode, MsOptions,
};
use crate::normal_forms::{kam_iterate, periodic_normal_form, KamConfig, KamSchedule, NFSchedule};
use crate::series::{norm_upper, FTSeries, Layout};
use crate::weights::{
    check_conditions, log_grid, mg_constant, mg_lemma_scan, product_constant_scan, Family, ScaleProfile, WeightSequence, NORM_CONSTANT,
};

pub use config::{schema, schema_text, ExperimentConfig, COMMANDS};
pub use report::{consolidate, num, write_artifacts, Manifest, Table, Verdict};

/// Tables and verdicts collected by an experiment, kept even when it fails midway.
#[derive(Debug, Default)]
pub struct Artifacts {
    pub tables: Vec<Table>,
    pub verdicts: Vec<Verdict>,
    /// Non-tabular outputs as `(file name, contents)`, e.g. series in text form.
    pub files: Vec<(String, String)>,
    /// Exit code requested by the experiment itself (e.g. a divergence verdict).
    pub code: i32,
}

impl Artifacts {
    fn verdict(&mut self, name: &str, pass: bool, measured: impl Into<String>, bound: impl Into<String>) {
        self.verdicts.push(Verdict::new(name, pass, measured, bound));
    }
}

/// Result of [`run`]: the manifest and the exit code it records.
#[derive(Debug)]
pub struct Outcome {
    pub manifest: Manifest,
    pub artifacts: Artifacts,
    pub exit_code: i32,
}

/// Runs the experiment without touching the file system.
pub fn run(cfg: &ExperimentConfig) -> Outcome {
    let mut art = Artifacts::default();
    let res = match cfg.command.as_str() {
        "weights" => weights(cfg, &mut art),
        "dioph" => dioph(cfg, &mut art),
        "brtest" => brtest(cfg, &mut art),
        "nf" => nf(cfg, &mut art),
        "kam" => kam(cfg, &mut art),
        "diffuse" => diffuse(cfg, &mut art),
        "ms" => ms(cfg, &mut art),
        "bessi" => bessi(cfg, &mut art),
        other => Err(Error::Config(format!("unknown command `{other}`"))),
    };
    let (exit_code, error) = match res {
        Ok(()) => (art.code, None),
        Err(e) => (e.exit_code(), Some(e.to_string())),
    };
    let manifest = Manifest {
        command: cfg.command.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        exit_code,
        error,
        inputs: cfg.entries().map(|(k, v)| (k.clone(), v.clone())).collect(),
        outputs: Vec::new(),
        verdicts: art.verdicts.clone(),
    };
    Outcome { manifest, artifacts: art, exit_code }
}

/// Runs the experiment and writes its artifacts to the configured directory.
pub fn execute(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut out = run(cfg);
    write_artifacts(&cfg.out_dir(), &out.artifacts.tables, &out.artifacts.files, &mut out.manifest)?;
    Ok(out)
}

/// The `report` subcommand: consolidates manifests into `out/report.csv` (if `out` is given)
/// and returns the CSV text with the exit code.
pub fn report_command(paths: &[PathBuf], out: Option<&Path>) -> Result<(String, i32)> {
    let (t, code) = consolidate(paths);
    let text = t.to_csv()?;
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.csv"), &text)?;
    }
    Ok((text, code))
}

fn scale_profile(cfg: &ExperimentConfig) -> Result<ScaleProfile> {
    let fam = Family::from_name(cfg.get_str("family")?, Some(cfg.get_f64("alpha")?), Some(cfg.get_f64("beta")?))?;
    ScaleProfile::from_family(fam)
}

/// `golden`, `sqrt2`, or a comma-separated vector.
pub fn frequency(spec: &str, q_max: usize) -> Result<FrequencyProfile> {
    match spec.trim() {
        "golden" => Ok(FrequencyProfile::golden()),
        "sqrt2" => FrequencyProfile::from_cf(ContFrac::sqrt2(), false),
        list => {
            let v: Vec<f64> = list
                .split(',')
                .map(|x| x.trim().parse().map_err(|_| Error::Config(format!("bad frequency `{spec}`"))))
                .collect::<Result<_>>()?;
            FrequencyProfile::new(&v, q_max)
        }
    }
}

fn b(x: bool) -> String {
    x.to_string()
}

fn weights(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<()> {
    let sp = scale_profile(cfg)?;
    let (s0, s1) = cfg.get_range("sigma_grid")?;
    let mut t = Table::new("weights_c", &["sigma", "ln_c", "argmax", "certified"]);
    for sigma in log_grid(s0, s1, cfg.get_usize("sigma_points")?) {
        let c = sp.ln_c(sigma)?;
        t.push(vec![num(sigma), num(c.value), c.argmax.to_string(), b(c.certified)]);
    }
    art.tables.push(t);
    let (y0, y1) = cfg.get_range("y_grid")?;
    let mut t = Table::new("weights_omega", &["y", "omega", "argmax", "c_inv"]);
    for y in log_grid(y0, y1, cfg.get_usize("y_points")?) {
        let om = sp.omega(y)?;
        t.push(vec![num(y), num(om.value), om.argmax.to_string(), num(sp.c_inv(y)?)]);
    }
    art.tables.push(t);
    let ws: &WeightSequence = sp.sequence();
    let mut t = Table::new("weights_sequence", &["l", "ln_m", "ln_mu", "ln_n", "nu"]);
    for l in 0..=cfg.get_usize("seq_l")? as u64 {
        let opt = |x: Option<f64>| x.map(num).unwrap_or_default();
        t.push(vec![l.to_string(), num(ws.ln_m(l)?), opt(ws.ln_mu(l)), num(ws.ln_n(l)?), opt(ws.nu(l))]);
    }
    art.tables.push(t);
    let cr = check_conditions(ws);
    let known = cr.known.map(|k| k.map(b));
    let mut t = Table::new("weights_conditions", &["condition", "measured", "known"]);
    for (i, (name, pass)) in [("H1", cr.h1.pass), ("H2", cr.h2.pass), ("H3", cr.h3.pass), ("MG", cr.mg.bounded)].iter().enumerate() {
        t.push(vec![name.to_string(), b(*pass), known.as_ref().map(|k| k[i].clone()).unwrap_or_default()]);
    }
    art.tables.push(t);
    let ps = product_constant_scan(ws, cfg.get_usize("scan_l")?)?;
    art.verdict("product_constant", ps.product_max <= NORM_CONSTANT, num(ps.product_max), format!("<= {}", num(NORM_CONSTANT)));
    art.verdict("shifted_product_constant", ps.shifted_max <= NORM_CONSTANT, num(ps.shifted_max), format!("<= {}", num(NORM_CONSTANT)));
    if matches!(ws.family(), Family::Gevrey { .. } | Family::Analytic) {
        let l = cfg.get_usize("mg_l")?;
        let a = mg_constant(ws, l)?;
        let scan = mg_lemma_scan(ws, a, l)?;
        art.verdict("mg_doubling", scan.doubling_margin <= 1e-9, num(scan.doubling_margin), format!("<= 0 with A = {}", num(a)));
    }
    Ok(())
}

fn dioph(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<()> {
    let q_max = cfg.get_usize("q_max")?;
    let fp = frequency(cfg.get_str("omega")?, q_max)?;
    let mut t = Table::new("dioph_psi", &["q", "psi", "k", "delta"]);
    for q in 1..=q_max {
        let p = fp.psi(q as f64)?;
        let k: Vec<String> = p.k.iter().map(|x| x.to_string()).collect();
        t.push(vec![q.to_string(), num(p.value), k.join(" "), num(fp.delta(q as f64)?)]);
    }
    art.tables.push(t);
    if let Some(cf) = fp.continued_fraction() {
        let mut t = Table::new("dioph_convergents", &["index", "p", "q", "err"]);
        for c in cf.convergents(q_max as f64) {
            t.push(vec![c.index.to_string(), c.p.to_string(), c.q.to_string(), num(c.err)]);
        }
        art.tables.push(t);
        if cfg.get_bool("brute")? {
            let brute = psi_table(fp.omega(), q_max, DEFAULT_LATTICE_BUDGET)?;
            let mut worst: f64 = 0.0;
            for (i, bv) in brute.iter().enumerate() {
                let e = fp.psi((i + 1) as f64)?;
                worst = worst.max((bv.value - e.value).abs() / e.value);
            }
            art.verdict("psi_brute_vs_continued_fraction", worst <= 1e-9, num(worst), "<= 1e-9 relative");
        }
    }
    Ok(())
}

fn brtest(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<()> {
    let sp = scale_profile(cfg)?;
    let fp = frequency(cfg.get_str("omega")?, 200)?;
    let p = BrParams {
        s: cfg.get_f64("s")?,
        eta: cfg.get_f64("eta")?,
        n: cfg.get_usize("n")?,
        i_max: cfg.get_usize("i_max")?,
        c2: cfg.get_f64("c2")?,
        q0_cap: cfg.get_f64("q0_cap")?,
    };
    let r = br_test(&sp, &fp, &p)?;
    let mut t = Table::new("brtest", &["i", "q_i", "sigma_i", "partial_sum"]);
    for i in 0..r.sigma.len() {
        t.push(vec![i.to_string(), num(r.q[i]), num(r.sigma[i]), num(r.partial_sums[i])]);
    }
    art.tables.push(t);
    let total = r.partial_sums.last().copied().unwrap_or(0.0);
    art.verdict("verdict", r.verdict == BrVerdict::ConvergedWithinBudget, format!("{:?}", r.verdict), "ConvergedWithinBudget");
    art.verdict("sigma_sum", total <= r.budget, num(total), format!("<= {}", num(r.budget)));
    art.verdict("product", r.product >= 0.5, num(r.product), ">= 0.5");
    let mut t = Table::new("brtest_summary", &["quantity", "value"]);
    for (k, v) in [
        ("q0", r.q0.map(num).unwrap_or_default()),
        ("budget", num(r.budget)),
        ("tail_estimate", num(r.tail_estimate)),
        ("tail_slope", num(r.tail_slope)),
        ("log_growth_slope", num(r.log_growth_slope)),
        ("log_growth_r2", num(r.log_growth_r2)),
        ("product", num(r.product)),
        ("verdict", format!("{:?}", r.verdict)),
    ] {
        t.push(vec![k.to_string(), v]);
    }
    art.tables.push(t);
    if r.verdict != BrVerdict::ConvergedWithinBudget {
        art.code = 3;
    }
    Ok(())
}

fn nf(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<()> {
    let sp = scale_profile(cfg)?;
    let (eta, eps, s) = (cfg.get_f64("eta")?, cfg.get_f64("eps")?, cfg.get_f64("s")?);
    let (integ, h) = if cfg.is_set("hamiltonian") {
        let h = read_hamiltonian(cfg)?;
        (h.average_zero(), h)
    } else {
        let lay = Layout::new(2, 0, cfg.get_usize("kmax")?, 2, 0)?;
        let integ = FTSeries::action_monomial(lay.clone(), &[1, 0], 1.0)?.add_series(&FTSeries::action_monomial(lay.clone(), &[0, 2], 0.5 * eta)?)?;
        let mut f = FTSeries::zero(lay.clone());
        for k in [[1, 0], [0, 1], [1, 1], [1, -1], [2, 1]] {
            f.add_cos(&k, &[0, 0], eps)?;
        }
        let h = integ.add_series(&f)?;
        (integ, h)
    };
    let u: Vec<i64> = cfg
        .get_str("u")?
        .split(',')
        .map(|x| x.trim().parse().map_err(|_| Error::Config(format!("`u` = `{}` is not an integer vector", cfg.get_str("u").unwrap_or("")))))
        .collect::<Result<_>>()?;
    let v = PeriodicVector::new(u, cfg.get_f64("period")?)?;
    if v.dim() != h.layout().n() {
        return Err(Error::Config(format!("`u` has {} entries but the Hamiltonian has {} angles", v.dim(), h.layout().n())));
    }
    let f = h.sub_series(&integ)?;
    let nu = norm_upper(&f.sub_series(&f.average_periodic(&v)?)?, &sp, s)?.bound;
    let sch = NFSchedule::neishtadt(&sp, s, cfg.get_f64("xi")?, v.period, eta, nu, cfg.get_f64("a_const")?)?;
    let r = periodic_normal_form(&integ, &h, &v, &sch, &sp, eta, None)?;
    let mut t = Table::new("nf_steps", &["step", "width", "sigma", "remainder_cert", "budget", "within_budget", "predicted"]);
    for l in &r.log {
        t.push(vec![l.step.to_string(), num(l.width), num(l.sigma), num(l.remainder_cert), num(l.budget), b(l.within_budget), num(l.predicted)]);
    }
    art.tables.push(t);
    art.files.push(("nf_transformed.txt".into(), r.transformed.to_text()));
    let bound = 2.0 * nu * (-(sch.m as f64)).exp();
    art.verdict("final_remainder", r.cert_after <= bound, num(r.cert_after), format!("<= 2 nu e^-m = {}", num(bound)));
    let frac = if r.log.is_empty() { 1.0 } else { (r.log.len() - r.violations()) as f64 / r.log.len() as f64 };
    art.verdict("steps_within_budget", frac >= 0.9, num(frac), ">= 0.9");
    Ok(())
}

fn kam(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<()> {
    let sp = scale_profile(cfg)?;
    let fp = FrequencyProfile::golden();
    let eps = cfg.get_f64("eps")?;
    let iters = cfg.get_usize("iterations")?;
    let q0 = br_test(&sp, &fp, &BrParams::default())?
        .q0
        .ok_or_else(|| Error::NonConvergence("no admissible Q0 for the KAM schedule".into()))?;
    let sch = KamSchedule::new(&sp, &fp, q0, eps, eps, 0.5, 1.0, 1.0, 0.0, 1.0, iters)?;
    let h = if cfg.is_set("hamiltonian") {
        read_hamiltonian(cfg)?
    } else {
        let lay = Layout::new(2, 0, cfg.get_usize("kmax")?, 2, 0)?;
        let mut h = FTSeries::action_monomial(lay.clone(), &[2, 0], 0.5)?.add_series(&FTSeries::action_monomial(lay.clone(), &[0, 2], 0.5)?)?;
        for k in [[1, 0], [0, 1], [1, 1]] {
            h.add_cos(&k, &[0, 0], eps)?;
        }
        h
    };
    let tol = cfg.get_f64("tol")?;
    let kc = KamConfig { tol, max_iter: iters, orbit_time: cfg.get_f64("orbit_time")?, ..Default::default() };
    let r = kam_iterate(&h, &fp, &sp, &sch, &kc)?;
    let mut t = Table::new("kam", &["iteration", "q", "a_cert", "b_cert", "w_star_norm", "defect"]);
    t.push(vec!["0".into(), String::new(), String::new(), String::new(), String::new(), num(r.defects[0])]);
    for l in &r.log {
        t.push(vec![l.iteration.to_string(), num(l.q), num(l.a_cert), num(l.b_cert), num(l.w_star_norm), num(l.defect)]);
    }
    art.tables.push(t);
    for (i, (e, g)) in r.e.iter().zip(&r.g).enumerate() {
        art.files.push((format!("kam_embedding_e{}.txt", i + 1), e.to_text()));
        art.files.push((format!("kam_embedding_g{}.txt", i + 1), g.to_text()));
    }
    let last = *r.defects.last().unwrap();
    art.verdict("defect", r.converged && last <= tol, num(last), format!("<= {} within {iters} iterations", num(tol)));
    let worst = r.defects.windows(2).map(|w| if w[0] > 0.0 { w[1] / w[0] } else { 0.0 }).fold(0.0, f64::max);
    art.verdict("reduction_per_iteration", worst <= 0.1, num(worst), "<= 0.1");
    art.verdict("distance", r.distance <= eps.sqrt(), num(r.distance), format!("<= sqrt(eps) = {}", num(eps.sqrt())));
    if let Some(d) = r.orbit_deviation {
        art.verdict("orbit_deviation", d <= 1e-8, num(d), "<= 1e-8");
    }
    if !r.converged {
        art.code = 3;
    }
    Ok(())
}

fn diffuse(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<()> {
    let sp = scale_profile(cfg)?;
    let fp = frequency(cfg.get_str("omega")?, 200)?;
    let n = cfg.get_usize("n")?;
    let s = cfg.get_f64("s")?;
    let (t_end, samples, tol) = (cfg.get_f64("t_end")?, cfg.get_usize("samples")?, cfg.get_f64("tol")?);
    let mut ex_t = Table::new(
        "diffuse_examples",
        &["j", "p", "q", "eps", "mu", "drift_rate", "rate_lower", "rate_upper", "eps_sandwich", "norm_bracket", "max_deviation", "drift_formula_error", "sandwich", "steps"],
    );
    let mut orbit_t = Table::new("diffuse_orbits", &["j", "t", "drift", "i1_closed", "i1_integrated"]);
    let (mut dev, mut form, mut sand) = (0.0f64, 0.0f64, true);
    let res = (|| -> Result<()> {
        for j in cfg.get_index_list("j")? {
            let ex = build_linear_diffusion(&fp, n, j, s, &sp)?;
            let run = run_linear_diffusion(&ex, &vec![0.0; n], &vec![0.0; n], t_end, samples, tol)?;
            dev = dev.max(run.max_deviation);
            form = form.max(run.drift_formula_error);
            sand &= run.sandwich;
            ex_t.push(vec![
                j.to_string(),
                ex.p.to_string(),
                ex.q.to_string(),
                num(ex.eps),
                num(ex.mu),
                num(ex.drift_rate()),
                num(ex.rate_lower),
                num(ex.rate_upper),
                b(ex.eps_sandwich),
                b(ex.norm_bracket),
                num(run.max_deviation),
                num(run.drift_formula_error),
                b(run.sandwich),
                run.integrator_steps.to_string(),
            ]);
            for (i, t) in run.times.iter().enumerate() {
                orbit_t.push(vec![j.to_string(), num(*t), num(run.drift[i]), num(run.closed[i][0]), num(run.integrated[i][0])]);
            }
        }
        Ok(())
    })();
    art.tables.push(ex_t);
    art.tables.push(orbit_t);
    res?;
    art.verdict("closed_form_agreement", dev <= 1e-8, num(dev), "<= 1e-8");
    art.verdict("drift_formula", form <= 1e-12, num(form), "<= 1e-12 relative");
    art.verdict("rate_sandwich", sand, b(sand), "lower <= rate <= upper");
    Ok(())
}

fn ms(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<()> {
    let sp = scale_profile(cfg)?;
    let opts = MsOptions { exponent: BjExponent::from_name(cfg.get_str("exponent")?)?, ..Default::default() };
    let (n, j, s) = (cfg.get_usize("n")?, cfg.get_usize("j")?, cfg.get_f64("s")?);
    let mode = CouplingMode::from_name(cfg.get_str("mode")?)?;
    let msc = build_ms(n, j, s, &sp, &opts)?;
    let mut t = Table::new("ms_construction", &["quantity", "value"]);
    let rows: Vec<(&str, String)> = vec![
        ("n", n.to_string()),
        ("j", j.to_string()),
        ("p_j", msc.p_j.to_string()),
        ("a_prime", msc.a_prime.to_string()),
        ("a", msc.a.to_string()),
        ("b", msc.b.to_string()),
        ("b_formula", msc.b_formula.to_string()),
        ("q", msc.q.to_string()),
        ("inflations", msc.inflations.to_string()),
        ("c1", num(msc.c1)),
        ("lambda", num(msc.lambda)),
        ("s_prime", num(msc.s_prime)),
        ("i_b_minus_2", num(msc.orbit.excess)),
        ("cert_g", num(msc.cert_g)),
        ("cert_ratio", num(msc.cert_ratio)),
        ("sync_max_value", num(msc.sync.max_value)),
        ("sync_max_grad", num(msc.sync.max_grad)),
        ("exclusion_margin", num(msc.sync.exclusion_margin)),
    ];
    for (k, v) in rows {
        t.push(vec![k.to_string(), v]);
    }
    art.tables.push(t);
    art.verdict("certificate", msc.certificate_holds(), num(msc.cert_ratio), "q^-1 cert(g) A^2 <= 1");
    art.verdict("synchronization", msc.sync.holds(1e-12), num(msc.sync.max_value.max(msc.sync.max_grad)), "<= 1e-12");
    if cfg.get_bool("verify_drift")? {
        let (q, tol, limit) = match mode {
            CouplingMode::Exact => (msc.a, 0.0, 1e-9),
            CouplingMode::Pendulum => {
                let bb = cfg.get_u64("b")?;
                let q = msc.a.checked_mul(bb).ok_or_else(|| Error::Parameter("q = A B overflows".into()))?;
                (q, cfg.get_f64("tol")?, 1e-6)
            }
        };
        let map = CoupledMap::from_ms(&msc, q, mode, tol)?;
        let r = map.run(q)?;
        let mut t = Table::new("ms_drift", &["step", "theta1", "i1", "expected"]);
        for (i, st) in r.steps.iter().enumerate() {
            t.push(vec![st.to_string(), num(r.theta1[i]), num(r.i1[i]), num(*st as f64 / (q as f64 * q as f64))]);
        }
        art.tables.push(t);
        art.verdict("drift", r.drift_error <= limit, num(r.drift_error), format!("<= {}", num(limit)));
    }
    Ok(())
}

fn bessi(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<()> {
    let sp = scale_profile(cfg)?;
    let s0 = cfg.get_f64("s0")?;
    let s = if cfg.is_set("s") { cfg.get_f64("s")? } else { s0 / 2.0 };
    let source = match cfg.get_str("source")? {
        "constructed" => BessiSource::ConstructedLiouville { terms: cfg.get_usize("terms")? },
        other => BessiSource::Frequency(frequency(other, 200)?),
    };
    let ex = build_bessi(&source, &sp, s0, s, cfg.get_f64("eps")?, cfg.get_f64("mu")?)?;
    let mut t = Table::new("bessi_terms", &["j", "p", "q", "k_norm", "ln_divisor", "ln_threshold", "condition", "ln_nu", "cert", "ln_growth", "c_tilde"]);
    for m in &ex.terms {
        t.push(vec![
            m.j.to_string(),
            m.p.to_string(),
            m.q.to_string(),
            m.k_norm.to_string(),
            num(m.ln_divisor),
            num(m.ln_threshold),
            b(m.condition),
            num(m.ln_nu),
            num(m.cert),
            num(m.ln_growth),
            num(m.c_tilde),
        ]);
    }
    art.tables.push(t);
    let worst = ex.terms.iter().map(|m| m.cert).fold(0.0, f64::max);
    art.verdict("certificates", ex.certificates_hold, num(worst), format!("<= 4 c eps = {}", num(ex.cert_bound)));
    art.verdict("growth_increasing", ex.growth_increasing, format!("{} terms", ex.terms.len()), "strictly increasing");
    Ok(())
}

/// Loads the `hamiltonian` series file; unreadable or malformed input is a config error.
fn read_hamiltonian(cfg: &ExperimentConfig) -> Result<FTSeries> {
    let path = cfg.get_str("hamiltonian")?;
    FTSeries::read_file(Path::new(path)).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("hamiltonian file {path}: {m}")),
        e => Error::Config(format!("hamiltonian file {path}: {e}")),
    })
}
