use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cascade_boot::bootstrap::{
    cost_model, dual_pool_run, magnitude_exponent, PipelineConfig, Provenance, SamplingMode, SamplingSequence,
    SamplingStrategy,
};
use cascade_boot::delta::{ballistic_expansion, brute_force_permuted, covariance_closed_form};
use cascade_boot::ensembles::{generate_pool, Element, EnsembleSpec, Field, MatrixPool, Regime};
use cascade_boot::enumeration::{classify_cycle_structures, enumerate_nu_with, CycleClass, EnumerationOptions};
use cascade_boot::estimator::{
    bias_experiment, monte_carlo_pair_covariance, pearson_rho, predict_variance, product_mean, realizations_ratio,
    BiasExperiment, SequenceSource,
};
use cascade_boot::io::{read_pool_header, write_pool, SimulationConfig};
use cascade_boot::permutations::{parse_label_list, Permutation, SigmaAnalysis};
use cascade_boot::verify::{run_check, Scale, CHECKS};
use clap::{Args, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

use crate::output::Report;

const GATE: f64 = 4.0;

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegimeArg {
    Diffusive,
    Ballistic,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldArg {
    Real,
    Complex,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    With,
    Without,
}

impl From<RegimeArg> for Regime {
    fn from(r: RegimeArg) -> Self {
        match r {
            RegimeArg::Diffusive => Regime::Diffusive,
            RegimeArg::Ballistic => Regime::Ballistic,
        }
    }
}

impl From<FieldArg> for Field {
    fn from(f: FieldArg) -> Self {
        match f {
            FieldArg::Real => Field::Real,
            FieldArg::Complex => Field::ProperComplex,
        }
    }
}

impl From<ModeArg> for SamplingMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::With => SamplingMode::WithReplacement,
            ModeArg::Without => SamplingMode::WithoutReplacement,
        }
    }
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct EnsembleArgs {
    /// Matrix dimension M.
    #[arg(long)]
    pub m: usize,
    /// Element standard deviation r.
    #[arg(long, default_value_t = 1.0)]
    pub r: f64,
    #[arg(long, value_enum, default_value_t = RegimeArg::Diffusive)]
    pub regime: RegimeArg,
    #[arg(long, value_enum, default_value_t = FieldArg::Real)]
    pub field: FieldArg,
}

impl EnsembleArgs {
    fn spec(&self) -> Result<EnsembleSpec> {
        Ok(EnsembleSpec::new(self.m, self.r, self.regime.into(), self.field.into())?)
    }
}

fn perm_arg(text: &str) -> Result<Permutation> {
    Permutation::parse_one_based(text).with_context(|| format!("parsing permutation {text:?}"))
}

// ---------------------------------------------------------------- enumerate

#[derive(Args, Debug, Serialize)]
pub struct EnumerateArgs {
    /// Permutation length N.
    #[arg(long)]
    pub n: usize,
    /// Permit N up to 13 (hours of CPU time).
    #[arg(long)]
    pub allow_large: bool,
    /// Also split K = N-3 into cycle-structure classes.
    #[arg(long)]
    pub classes: bool,
}

pub fn enumerate(a: &EnumerateArgs) -> Result<Report> {
    let opts = EnumerationOptions {
        allow_large: a.allow_large,
        ..EnumerationOptions::default()
    };
    let table = enumerate_nu_with(a.n, &opts, None)?;
    let total = table.total()?;
    let rel: Vec<f64> = (0..a.n).map(|k| Ok(table.relative(k)?.value)).collect::<Result<_>>()?;
    let mut text = format!("N = {}, {} permutations\n{:>3} {:>14} {:>12}\n", a.n, total, "K", "count", "relative");
    for k in 0..a.n {
        writeln!(text, "{k:>3} {:>14} {:>12.6e}", table.counts[k], rel[k])?;
    }
    let mut doc = json!({ "n": a.n, "total": total, "counts": table.counts, "relative": rel });
    if a.classes {
        let c = classify_cycle_structures(a.n, a.n - 3)?;
        writeln!(text, "\nK = {} by cycle class:", a.n - 3)?;
        let mut classes = serde_json::Map::new();
        for class in CycleClass::ALL {
            writeln!(text, "  {class}: {} (expected {})", c.counts[&class], class.expected_total(a.n))?;
            classes.insert(
                class.label().to_string(),
                json!({
                    "count": c.counts[&class],
                    "expected": class.expected_total(a.n),
                    "constraint_violations": c.constraint_violations[&class],
                }),
            );
        }
        doc["classes"] = Value::Object(classes);
        doc["unclassified"] = json!(c.unclassified);
    }
    let rows = (0..a.n)
        .map(|k| vec![a.n.to_string(), k.to_string(), table.counts[k].to_string(), rel[k].to_string()])
        .collect();
    Ok(Report::new(doc, text).csv(&["n", "k", "count", "relative_frequency"], rows))
}

// ---------------------------------------------------------------- kvalue

#[derive(Args, Debug, Serialize)]
pub struct KvalueArgs {
    /// 1-based permutation, e.g. "2,3,1".
    #[arg(long)]
    pub perm: String,
    /// Also report the correlation coefficient for this M.
    #[arg(long)]
    pub m: Option<usize>,
}

pub fn kvalue(a: &KvalueArgs) -> Result<Report> {
    let alpha = perm_arg(&a.perm)?;
    let s = SigmaAnalysis::new(&alpha);
    let relation = serde_json::to_value(s.relation)?;
    let rho = a.m.map(|m| pearson_rho(s.k, m, alpha.len())).transpose()?;
    let mut text = format!(
        "alpha = {alpha}\nK = {}\nsigma cycles = {}\nboundaries 0, N: {}\n",
        s.k,
        s.cycles,
        relation.as_str().unwrap_or_default()
    );
    if let (Some(m), Some(rho)) = (a.m, rho) {
        writeln!(text, "rho (M = {m}) = {rho}")?;
    }
    let doc = json!({
        "alpha": alpha.to_one_based(),
        "k": s.k,
        "sigma": s.sigma.as_slice(),
        "sigma_cycles": s.cycles.to_string(),
        "boundary_relation": relation,
        "rho": rho,
    });
    let row = vec![
        alpha.to_string(),
        s.k.to_string(),
        s.cycles.to_string(),
        relation.as_str().unwrap_or_default().to_string(),
        rho.map(|r| r.to_string()).unwrap_or_default(),
    ];
    Ok(Report::new(doc, text).csv(&["alpha", "k", "sigma_cycles", "boundary_relation", "rho"], vec![row]))
}

// ---------------------------------------------------------------- covariance

#[derive(Args, Debug, Serialize)]
pub struct CovarianceArgs {
    #[arg(long)]
    pub perm: String,
    #[arg(long)]
    pub m: usize,
    #[arg(long, default_value_t = 1.0)]
    pub r: f64,
    #[arg(long, value_enum, default_value_t = RegimeArg::Diffusive)]
    pub regime: RegimeArg,
    /// Cross-check against direct index summation.
    #[arg(long)]
    pub oracle: bool,
}

pub fn covariance(a: &CovarianceArgs) -> Result<Report> {
    let alpha = perm_arg(&a.perm)?;
    let regime: Regime = a.regime.into();
    let (total, mut doc, mut text) = match regime {
        Regime::Diffusive => {
            let cf = covariance_closed_form(&alpha);
            let total = cf.total(a.m, a.r);
            let text = format!(
                "alpha = {alpha}\nC = r^{} M^{} on {} support\ntotal = {total}\n",
                cf.r_power, cf.m_power, cf.boundary
            );
            let doc = json!({
                "alpha": alpha.to_one_based(), "m": a.m, "r": a.r, "regime": "diffusive",
                "r_power": cf.r_power, "m_power": cf.m_power,
                "boundary": cf.boundary.to_string(), "total": total,
            });
            (total, doc, text)
        }
        Regime::Ballistic => {
            let e = ballistic_expansion(&alpha, a.m, a.r)?;
            let terms: Vec<String> = e
                .coefficients
                .iter()
                .enumerate()
                .filter(|(_, &c)| c != 0)
                .map(|(g, c)| format!("{c} r^{}", 2 * g))
                .collect();
            let text = format!("alpha = {alpha}\ntotal = {} = {}\n", terms.join(" + "), e.total);
            let doc = json!({
                "alpha": alpha.to_one_based(), "m": a.m, "r": a.r, "regime": "ballistic",
                "coefficients": e.coefficients.iter().map(|c| c.to_string()).collect::<Vec<_>>(),
                "total": e.total,
            });
            (e.total, doc, text)
        }
    };
    let mut ok = true;
    if a.oracle {
        let brute = brute_force_permuted(&alpha, a.m, a.r, regime)?.sum();
        let rel = (brute - total).abs() / total.abs().max(f64::MIN_POSITIVE);
        ok = rel <= 1e-10;
        writeln!(text, "oracle total = {brute} (relative difference {rel:.1e})")?;
        doc["oracle_total"] = json!(brute);
        doc["oracle_agrees"] = json!(ok);
    }
    let mut report = Report::new(doc, text).csv(
        &["alpha", "m", "r", "regime", "total"],
        vec![vec![
            alpha.to_string(),
            a.m.to_string(),
            a.r.to_string(),
            format!("{:?}", a.regime).to_lowercase(),
            total.to_string(),
        ]],
    );
    report.ok = ok;
    Ok(report)
}

// ---------------------------------------------------------------- mc-cov

#[derive(Args, Debug, Serialize)]
pub struct McCovArgs {
    #[arg(long)]
    pub perm: String,
    #[command(flatten)]
    pub ensemble: EnsembleArgs,
    #[arg(long, default_value_t = 100_000)]
    pub trials: u64,
}

pub fn mc_cov(a: &McCovArgs, seed: u64) -> Result<Report> {
    let alpha = perm_arg(&a.perm)?;
    let spec = a.ensemble.spec()?;
    let est = match spec.field {
        Field::Real => monte_carlo_pair_covariance::<f64>(&spec, &alpha, a.trials, seed)?,
        Field::ProperComplex => monte_carlo_pair_covariance::<Complex64>(&spec, &alpha, a.trials, seed)?,
    };
    let prediction = match spec.regime {
        Regime::Diffusive => covariance_closed_form(&alpha).total(spec.dim, spec.scale),
        Regime::Ballistic => ballistic_expansion(&alpha, spec.dim, spec.scale)?.total,
    };
    let z = est.z_score(prediction);
    let pass = z <= GATE;
    let text = format!(
        "alpha = {alpha}\nestimate = {:.6} +- {:.6} ({} trials, {} workers)\nprediction = {prediction}\n|z| = {z:.2} -> {}\n",
        est.estimate,
        est.standard_error,
        est.trials,
        est.workers,
        if pass { "pass" } else { "FAIL" }
    );
    let doc = json!({
        "alpha": alpha.to_one_based(), "spec": spec, "seed": seed,
        "estimate": est.estimate, "standard_error": est.standard_error,
        "trials": est.trials, "workers": est.workers,
        "prediction": prediction, "z": z, "pass": pass,
    });
    let row = vec![
        alpha.to_string(),
        est.estimate.to_string(),
        est.standard_error.to_string(),
        prediction.to_string(),
        z.to_string(),
        pass.to_string(),
    ];
    let mut report =
        Report::new(doc, text).csv(&["alpha", "estimate", "standard_error", "prediction", "z", "pass"], vec![row]);
    report.ok = pass;
    Ok(report)
}

// ---------------------------------------------------------------- simulate

#[derive(Args, Debug, Serialize)]
pub struct SimulateArgs {
    /// JSON or `key = value` pipeline config.
    #[arg(long)]
    pub config: PathBuf,
    /// Also write every realisation as raw little-endian f64.
    #[arg(long)]
    pub save_matrices: bool,
}

fn simulate_typed<T: Element>(
    cfg: &PipelineConfig,
    spec: EnsembleSpec,
    mode: SamplingMode,
    seed: u64,
    save: bool,
) -> Result<(Vec<Vec<String>>, Provenance, u64, Option<Vec<u8>>)> {
    let run = dual_pool_run::<T>(cfg, spec, mode, seed)?;
    let rows = run
        .outputs
        .iter()
        .zip(&run.realisations)
        .enumerate()
        .map(|(l, (z, s))| {
            let (re, im) = z.trace().parts();
            let seq: Vec<String> = s.to_one_based().iter().map(|x| x.to_string()).collect();
            vec![
                (l + 1).to_string(),
                re.to_string(),
                im.to_string(),
                z.norm().to_string(),
                seq.join(" "),
            ]
        })
        .collect();
    let bytes = save.then(|| {
        let mut b = Vec::new();
        for z in &run.outputs {
            for r in 0..z.nrows() {
                for c in 0..z.ncols() {
                    let (re, im) = z[(r, c)].parts();
                    b.extend_from_slice(&re.to_le_bytes());
                    if T::FIELD == Field::ProperComplex {
                        b.extend_from_slice(&im.to_le_bytes());
                    }
                }
            }
        }
        b
    });
    Ok((rows, run.provenance(mode), run.multiplications, bytes))
}

/// Returns the report and the effective config.
pub fn simulate(a: &SimulateArgs, cli_seed: Option<u64>) -> Result<(Report, Value)> {
    let text = fs::read_to_string(&a.config).with_context(|| format!("reading {}", a.config.display()))?;
    let sim = SimulationConfig::parse(&text)?;
    let cfg = sim.pipeline()?;
    let spec = sim.spec()?;
    let seed = cli_seed.or(sim.seed).unwrap_or(crate::DEFAULT_SEED);
    let exponent = magnitude_exponent(&spec, cfg.slabs as usize);
    let mut notes = String::new();
    if exponent.abs() > 250.0 {
        let msg = format!(
            "warning: typical element magnitude ~1e{exponent:.0}; products of {} slabs may over/underflow\n",
            cfg.slabs
        );
        eprint!("{msg}");
        notes.push_str(&msg);
    }
    let (rows, provenance, mults, bytes) = match spec.field {
        Field::Real => simulate_typed::<f64>(&cfg, spec, sim.mode, seed, a.save_matrices)?,
        Field::ProperComplex => simulate_typed::<Complex64>(&cfg, spec, sim.mode, seed, a.save_matrices)?,
    };
    let costs = cost_model(&cfg)?;
    let mut text = notes;
    writeln!(
        text,
        "{} realisations of {} slabs (M = {}), seed {seed}\npool sizes {} / {}, {} multiplications performed",
        cfg.realisations, cfg.slabs, spec.dim, cfg.pool1_size, cfg.pool2_size, mults
    )?;
    for c in &costs {
        writeln!(text, "  {:?}: {} generations, {} products", c.approach, c.generations, c.products)?;
    }
    let doc = json!({
        "seed": seed, "config": sim, "multiplications": mults, "cost": costs,
        "magnitude_exponent": exponent, "realisations": rows.len(),
    });
    let mut report = Report::new(doc, text).csv(&["realisation", "trace_re", "trace_im", "frobenius", "sequence"], rows);
    report.files.push(("provenance.json".into(), serde_json::to_vec_pretty(&provenance)?));
    report.files.push((
        "summary.csv".into(),
        cascade_boot::io::to_csv(
            &["realisation", "trace_re", "trace_im", "frobenius", "sequence"],
            &report.csv_rows,
        )
        .into_bytes(),
    ));
    if let Some(b) = bytes {
        report.files.push(("matrices.bin".into(), b));
    }
    let mut effective = serde_json::to_value(&sim)?;
    effective["seed"] = json!(seed);
    Ok((report, effective))
}

// ---------------------------------------------------------------- cost

#[derive(Args, Debug, Serialize)]
pub struct CostArgs {
    /// N_r, full-thickness realisations.
    #[arg(long)]
    pub nr: u64,
    /// N_δ, thin slabs per full thickness.
    #[arg(long)]
    pub ndelta: u64,
    /// N₁, thin-slab pool size.
    #[arg(long)]
    pub n1: u64,
    /// N₂, intermediate pool size.
    #[arg(long)]
    pub n2: u64,
    /// n_Δ, thin slabs per intermediate section.
    #[arg(long)]
    pub ndeltaslab: u64,
}

pub fn cost(a: &CostArgs) -> Result<Report> {
    let cfg = PipelineConfig::with_derived_sections(a.nr, a.ndelta, a.n1, a.n2, a.ndeltaslab)?;
    let reports = cost_model(&cfg)?;
    let mut text = format!("{:<12} {:>16} {:>16}\n", "approach", "generations", "products");
    let mut rows = Vec::new();
    for r in &reports {
        let name = serde_json::to_value(r.approach)?.as_str().unwrap_or_default().to_string();
        writeln!(text, "{name:<12} {:>16} {:>16}", r.generations, r.products)?;
        rows.push(vec![name, r.generations.to_string(), r.products.to_string()]);
    }
    let doc = json!({ "config": cfg, "reports": reports });
    Ok(Report::new(doc, text).csv(&["approach", "generations", "products"], rows))
}

// ---------------------------------------------------------------- bias-demo

#[derive(Args, Debug, Serialize)]
pub struct BiasArgs {
    /// Fixed 1-based sequence, e.g. "1,1".
    #[arg(long, conflicts_with = "random")]
    pub seq: Option<String>,
    /// Draw a fresh sequence of this length each trial instead.
    #[arg(long)]
    pub random: Option<usize>,
    #[arg(long, value_enum, default_value_t = ModeArg::Without)]
    pub mode: ModeArg,
    /// Pool size N_X; defaults to the largest label or the sequence length.
    #[arg(long)]
    pub pool_size: Option<usize>,
    #[command(flatten)]
    pub ensemble: EnsembleArgs,
    #[arg(long, default_value_t = 100_000)]
    pub trials: u64,
}

fn bias_typed<T: Element>(exp: &BiasExperiment) -> Result<(Value, Option<bool>, String)> {
    let report = bias_experiment::<T>(exp)?;
    let predicted = match &exp.source {
        SequenceSource::Fixed(s) => product_mean::<T>(&exp.spec, s).map(|p| p - &report.ensemble_mean),
        SequenceSource::Random(s) if s.mode == SamplingMode::WithoutReplacement => {
            Some(DMatrix::zeros(exp.spec.dim, exp.spec.dim))
        }
        SequenceSource::Random(_) => None,
    };
    let z = predicted.as_ref().map(|p| report.max_z_score(p));
    let pass = z.map(|z| z <= GATE);
    let parts = |x: &DMatrix<T>| -> Vec<Vec<[f64; 2]>> {
        (0..x.nrows())
            .map(|r| (0..x.ncols()).map(|c| { let (a, b) = x[(r, c)].parts(); [a, b] }).collect())
            .collect()
    };
    let se: Vec<Vec<f64>> = (0..report.standard_error.nrows())
        .map(|r| report.standard_error.row(r).iter().copied().collect())
        .collect();
    let mut text = String::new();
    for r in 0..report.bias.nrows() {
        let cells: Vec<String> = (0..report.bias.ncols())
            .map(|c| {
                let (re, im) = report.bias[(r, c)].parts();
                if T::FIELD == Field::Real {
                    format!("{re:+.4}")
                } else {
                    format!("{re:+.4}{im:+.4}i")
                }
            })
            .collect();
        writeln!(text, "  [{}]", cells.join(" "))?;
    }
    let doc = json!({
        "bias": parts(&report.bias),
        "standard_error": se,
        "predicted_bias": predicted.as_ref().map(parts),
        "max_abs_z": z,
        "pass": pass,
        "trials": report.trials,
    });
    Ok((doc, pass, text))
}

pub fn bias_demo(a: &BiasArgs, seed: u64) -> Result<Report> {
    let spec = a.ensemble.spec()?;
    let mode: SamplingMode = a.mode.into();
    let (source, needed) = match (&a.seq, a.random) {
        (Some(s), None) => {
            let labels = parse_label_list(s)?;
            if labels.contains(&0) {
                bail!("sequence labels are 1-based");
            }
            let top = labels.iter().copied().max().unwrap_or(1);
            let seq = SamplingSequence::infer(labels.iter().map(|l| l - 1).collect())?;
            (SequenceSource::Fixed(seq), top)
        }
        (None, Some(n)) => (SequenceSource::Random(SamplingStrategy::new(mode, n)), n),
        _ => bail!("give either --seq or --random"),
    };
    let exp = BiasExperiment {
        spec,
        source,
        pool_size: a.pool_size.unwrap_or(needed),
        trials: a.trials,
        seed,
    };
    let (mut doc, pass, matrix) = match spec.field {
        Field::Real => bias_typed::<f64>(&exp)?,
        Field::ProperComplex => bias_typed::<Complex64>(&exp)?,
    };
    doc["seed"] = json!(seed);
    doc["spec"] = json!(spec);
    doc["pool_size"] = json!(exp.pool_size);
    let verdict = match (pass, doc["max_abs_z"].as_f64()) {
        (Some(p), Some(z)) => format!("max |z| vs prediction = {z:.2} -> {}", if p { "pass" } else { "FAIL" }),
        _ => "no closed-form prediction for this sequence".to_string(),
    };
    let text = format!("bias over {} trials (pool of {}):\n{matrix}{verdict}\n", a.trials, exp.pool_size);
    let mut rows = Vec::new();
    if let (Some(b), Some(se)) = (doc["bias"].as_array(), doc["standard_error"].as_array()) {
        for (r, (brow, serow)) in b.iter().zip(se).enumerate() {
            for (c, (x, s)) in brow.as_array().into_iter().flatten().zip(serow.as_array().into_iter().flatten()).enumerate() {
                rows.push(vec![(r + 1).to_string(), (c + 1).to_string(), x[0].to_string(), x[1].to_string(), s.to_string()]);
            }
        }
    }
    let mut report = Report::new(doc, text).csv(&["row", "col", "bias_re", "bias_im", "standard_error"], rows);
    report.ok = pass.unwrap_or(true);
    Ok(report)
}

// ---------------------------------------------------------------- predict-var

#[derive(Args, Debug, Serialize)]
pub struct PredictArgs {
    /// Provenance JSON from `simulate`, or a JSON list of 1-based sequences.
    #[arg(long)]
    pub provenance: PathBuf,
    /// Matrix dimension; defaults to the provenance's ensemble.
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub r: Option<f64>,
}

pub fn predict_var(a: &PredictArgs) -> Result<Report> {
    let text = fs::read_to_string(&a.provenance).with_context(|| format!("reading {}", a.provenance.display()))?;
    let value: Value = serde_json::from_str(&text)?;
    let (lists, mode, stored): (Vec<Vec<usize>>, SamplingMode, Option<EnsembleSpec>) = if value.is_array() {
        (serde_json::from_value(value)?, SamplingMode::WithoutReplacement, None)
    } else {
        let p: Provenance = serde_json::from_value(value)?;
        (p.realisations, p.mode, Some(p.spec))
    };
    let m = a.m.or(stored.map(|s| s.dim)).context("--m is required for a bare sequence list")?;
    let r = a.r.or(stored.map(|s| s.scale)).unwrap_or(1.0);
    let regime = stored.map(|s| s.regime).unwrap_or(Regime::Diffusive);
    let field = stored.map(|s| s.field).unwrap_or(Field::Real);
    let spec = EnsembleSpec::new(m, r, regime, field)?;
    let seqs = lists
        .iter()
        .map(|l| SamplingSequence::from_one_based(l, mode))
        .collect::<Result<Vec<_>, _>>()?;
    let p = predict_variance(&seqs, &spec)?;
    let ratio = realizations_ratio(&seqs, m)?;
    let mut out = format!(
        "N_Z = {}, M = {m}, r = {r}\nbaseline    {:.6e}\ncorrelation {:.6e}\ntotal       {:.6e}\n",
        p.n_z,
        p.baseline_term,
        p.correlation_term,
        p.total()
    );
    writeln!(out, "ordered pairs by K: {:?}, unmatched {}", p.pair_histogram.by_k, p.pair_histogram.unmatched)?;
    writeln!(out, "realisations ratio: {:.6} (approximate), {:.6} (exact)", ratio.approximate, ratio.exact)?;
    let doc = json!({ "spec": spec, "prediction": p, "total": p.total(), "ratio": ratio });
    let mut rows: Vec<Vec<String>> = p
        .pair_histogram
        .by_k
        .iter()
        .enumerate()
        .map(|(k, c)| vec![k.to_string(), c.to_string()])
        .collect();
    rows.push(vec!["none".into(), p.pair_histogram.unmatched.to_string()]);
    Ok(Report::new(doc, out).csv(&["k", "ordered_pairs"], rows))
}

// ---------------------------------------------------------------- pool

#[derive(Subcommand, Debug)]
pub enum PoolCommand {
    /// Generate a pool file.
    Gen(PoolGenArgs),
    /// Print a pool file's header.
    Info(PoolInfoArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct PoolGenArgs {
    #[command(flatten)]
    pub ensemble: EnsembleArgs,
    /// Pool size N_X.
    #[arg(long)]
    pub size: usize,
    /// Store only the seed record; matrices are regenerated on load.
    #[arg(long)]
    pub no_matrices: bool,
}

fn gen_typed<T: Element>(spec: EnsembleSpec, a: &PoolGenArgs, seed: u64, path: &Path) -> Result<()> {
    let pool: MatrixPool<T> = generate_pool(spec, a.size, seed)?;
    let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    write_pool(&pool, !a.no_matrices, std::io::BufWriter::new(file))?;
    Ok(())
}

pub fn pool_gen(a: &PoolGenArgs, seed: u64, path: &Path) -> Result<Report> {
    let spec = a.ensemble.spec()?;
    match spec.field {
        Field::Real => gen_typed::<f64>(spec, a, seed, path)?,
        Field::ProperComplex => gen_typed::<Complex64>(spec, a, seed, path)?,
    }
    let text = format!("wrote {} matrices ({}x{}) to {}\n", a.size, spec.dim, spec.dim, path.display());
    let doc = json!({ "path": path, "spec": spec, "size": a.size, "seed": seed, "has_matrices": !a.no_matrices });
    Ok(Report::new(doc, text).csv(
        &["path", "size", "dim", "seed"],
        vec![vec![path.display().to_string(), a.size.to_string(), spec.dim.to_string(), seed.to_string()]],
    ))
}

#[derive(Args, Debug, Serialize)]
pub struct PoolInfoArgs {
    pub file: PathBuf,
}

pub fn pool_info(a: &PoolInfoArgs) -> Result<Report> {
    let mut f = fs::File::open(&a.file).with_context(|| format!("opening {}", a.file.display()))?;
    let h = read_pool_header(&mut f)?;
    let text = format!(
        "{} x {}x{} {:?} {:?} r = {}, seed {}, matrices stored: {}\n",
        h.size, h.dim, h.dim, h.field, h.regime, h.scale, h.seed_record.master_seed, h.has_matrices
    );
    let row = vec![h.size.to_string(), h.dim.to_string(), h.scale.to_string(), h.seed_record.master_seed.to_string()];
    Ok(Report::new(serde_json::to_value(&h)?, text).csv(&["size", "dim", "scale", "master_seed"], vec![row]))
}

// ---------------------------------------------------------------- verify

#[derive(Args, Debug, Serialize)]
pub struct VerifyArgs {
    /// Reduced ranges and trial counts.
    #[arg(long)]
    pub quick: bool,
    /// Run only these checks (1-12).
    #[arg(long, value_delimiter = ',')]
    pub only: Vec<usize>,
}

pub fn verify(a: &VerifyArgs) -> Report {
    let scale = if a.quick { Scale::Quick } else { Scale::Full };
    let ids: Vec<usize> = if a.only.is_empty() { (1..=CHECKS.len()).collect() } else { a.only.clone() };
    let results: Vec<_> = ids.iter().map(|&id| run_check(id, scale)).collect();
    let mut text = String::new();
    for r in &results {
        let _ = writeln!(text, "{r}");
    }
    let passed = results.iter().filter(|r| r.passed).count();
    let _ = writeln!(text, "{passed}/{} passed", results.len());
    let rows = results
        .iter()
        .map(|r| vec![r.id.to_string(), r.name.to_string(), r.passed.to_string(), r.detail.clone(), format!("{:.2}", r.seconds)])
        .collect();
    let mut report = Report::new(json!({ "scale": scale, "results": results }), text)
        .csv(&["id", "name", "passed", "detail", "seconds"], rows);
    report.ok = passed == results.len();
    report
}
