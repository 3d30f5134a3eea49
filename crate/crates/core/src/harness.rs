//! Experiment runner: fits the optimal policy, evaluates it alongside the
//! classical procedures on shared evaluation batches, reproduces the study
//! tables as long-format CSV, and applies policies to observed p-values.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{bonferroni, hochberg, holm, hommel, RejectionSet};
use crate::coefficients::MAX_K;
use crate::densities::AlternativeModel;
use crate::error::{Error, Result};
use crate::estimator::{make_batch, proportion_se, Estimate, LabeledSampleBatch};
use crate::optimizer::{fit, CoordinateStatus, FitResult, OptimizerConfig};
use crate::policy::{decide, Decision, DualVector};
use crate::rng::{derive_seed, SeedPurpose};

/// Root seed used when none is given.
pub const DEFAULT_SEED: u64 = 2024;

/// Smallest Monte-Carlo size accepted by an experiment spec.
pub const MIN_SAMPLES: usize = 1_000;

/// A classical procedure: p-values and level in, rejections out.
pub type Procedure = fn(&[f64], f64) -> Result<RejectionSet>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Optimal,
    Bonferroni,
    Holm,
    Hochberg,
    Hommel,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Optimal,
        Method::Bonferroni,
        Method::Holm,
        Method::Hochberg,
        Method::Hommel,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Optimal => "optimal",
            Method::Bonferroni => "bonferroni",
            Method::Holm => "holm",
            Method::Hochberg => "hochberg",
            Method::Hommel => "hommel",
        }
    }

    /// The classical procedure behind this method, if it is one.
    pub fn baseline(self) -> Option<Procedure> {
        match self {
            Method::Optimal => None,
            Method::Bonferroni => Some(bonferroni),
            Method::Holm => Some(holm),
            Method::Hochberg => Some(hochberg),
            Method::Hommel => Some(hommel),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "pi_K")]
    PiK,
    #[serde(rename = "pi_any")]
    PiAny,
    #[serde(rename = "pi_l")]
    PiL,
    #[serde(rename = "fwer_all")]
    FwerAll,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::PiK, Metric::PiAny, Metric::PiL, Metric::FwerAll];
}

fn default_n_eval() -> usize {
    50_000
}

fn default_n_opt() -> usize {
    100_000
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}

fn default_metrics() -> Vec<Metric> {
    vec![Metric::PiK, Metric::PiAny, Metric::FwerAll]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(rename = "K", alias = "k")]
    pub k: usize,
    pub alpha: f64,
    pub model: AlternativeModel,
    #[serde(default = "default_n_eval")]
    pub n_eval: usize,
    #[serde(default = "default_n_opt")]
    pub n_opt: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<Metric>,
}

impl ExperimentSpec {
    pub fn new(k: usize, alpha: f64, model: AlternativeModel) -> Self {
        ExperimentSpec {
            k,
            alpha,
            model,
            n_eval: default_n_eval(),
            n_opt: default_n_opt(),
            seed: DEFAULT_SEED,
            methods: default_methods(),
            metrics: default_metrics(),
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let spec: ExperimentSpec = serde_json::from_str(s)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 || self.k > MAX_K {
            return Err(Error::Parameter(format!("K must lie in 2..={MAX_K}, got {}", self.k)));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Parameter(format!("alpha must lie in (0, 1], got {}", self.alpha)));
        }
        if self.n_eval < MIN_SAMPLES || self.n_opt < MIN_SAMPLES {
            return Err(Error::Parameter(format!(
                "n_eval and n_opt must be at least {MIN_SAMPLES}"
            )));
        }
        if self.methods.is_empty() {
            return Err(Error::Parameter("no methods requested".into()));
        }
        self.model.validate()
    }

    pub fn optimizer_config(&self) -> OptimizerConfig {
        OptimizerConfig {
            alpha: self.alpha,
            n_opt: self.n_opt,
            seed: self.seed,
            ..Default::default()
        }
    }

    fn wants(&self, metric: Metric) -> bool {
        self.metrics.contains(&metric)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub method: Method,
    pub pi_k: Estimate,
    pub pi_any: Estimate,
    /// `Pi_l` for `l = 1..=K` (empty unless requested).
    pub pi_l: Vec<Estimate>,
    /// Error rate under `gamma = 0..K-1` alternatives (empty unless requested).
    pub fwer: Vec<Estimate>,
}

impl MethodResult {
    /// The largest error rate across configurations.
    pub fn max_fwer(&self) -> Option<Estimate> {
        self.fwer
            .iter()
            .copied()
            .max_by(|a, b| a.value.total_cmp(&b.value))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub mu_hat: DualVector,
    pub iterations: usize,
    pub converged: bool,
    pub trajectory: Vec<f64>,
    pub coordinate_status: Vec<CoordinateStatus>,
}

impl From<FitResult> for FitSummary {
    fn from(r: FitResult) -> Self {
        FitSummary {
            mu_hat: r.mu_hat,
            iterations: r.iterations,
            converged: r.converged,
            trajectory: r.trajectory,
            coordinate_status: r.coordinate_status,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub spec: ExperimentSpec,
    pub methods: Vec<MethodResult>,
    pub fit: Option<FitSummary>,
}

impl ExperimentResult {
    pub fn method(&self, method: Method) -> Option<&MethodResult> {
        self.methods.iter().find(|m| m.method == method)
    }
}

/// Counts accumulated over one evaluation batch.
#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    /// Samples with at least one false rejection.
    false_any: usize,
    /// Total correct rejections.
    correct: usize,
    /// Samples with at least one correct rejection.
    correct_any: usize,
}

impl std::ops::Add for Tally {
    type Output = Tally;

    fn add(self, o: Tally) -> Tally {
        Tally {
            false_any: self.false_any + o.false_any,
            correct: self.correct + o.correct,
            correct_any: self.correct_any + o.correct_any,
        }
    }
}

fn tally(method: Method, batch: &LabeledSampleBatch, mu: Option<&DualVector>, alpha: f64) -> Result<Tally> {
    let k = batch.k();
    let gamma = batch.gamma();
    match method.baseline() {
        None => {
            let mu = mu.ok_or_else(|| Error::Parameter("optimal method needs multipliers".into()))?;
            let l_stars = batch.l_stars(mu)?;
            Ok(l_stars
                .par_iter()
                .enumerate()
                .map(|(i, &l)| {
                    let l = l as usize;
                    let correct = batch.is_null(i)[..l].iter().filter(|&&n| !n).count();
                    Tally {
                        false_any: usize::from(batch.first_null(i) < l),
                        correct,
                        correct_any: usize::from(correct > 0),
                    }
                })
                .reduce(Tally::default, |a, b| a + b))
        }
        Some(procedure) => (0..batch.len())
            .into_par_iter()
            .map(|i| -> Result<Tally> {
                // draw order: the first gamma entries are alternatives
                let r = procedure(batch.p_raw(i), alpha)?;
                let correct = r.rejected[..gamma].iter().filter(|&&x| x).count();
                let false_any = r.rejected[gamma..k].iter().any(|&x| x);
                Ok(Tally {
                    false_any: usize::from(false_any),
                    correct,
                    correct_any: usize::from(correct > 0),
                })
            })
            .try_reduce(Tally::default, |a, b| Ok(a + b)),
    }
}

/// Seed of the evaluation batch under `gamma` alternatives.
pub fn evaluation_seed(root: u64, gamma: usize) -> u64 {
    derive_seed(root, SeedPurpose::Evaluate, gamma as u64)
}

/// Evaluates every requested method with multipliers `mu` (required when
/// the optimal method is requested) on fresh evaluation batches.
pub fn evaluate_methods(spec: &ExperimentSpec, mu: Option<&DualVector>) -> Result<Vec<MethodResult>> {
    spec.validate()?;
    let k = spec.k;
    let n = spec.n_eval;
    let mut results: Vec<MethodResult> = spec
        .methods
        .iter()
        .map(|&method| MethodResult {
            method,
            pi_k: Estimate { value: f64::NAN, se: f64::NAN },
            pi_any: Estimate { value: f64::NAN, se: f64::NAN },
            pi_l: Vec::new(),
            fwer: Vec::new(),
        })
        .collect();

    let need_fwer = spec.wants(Metric::FwerAll);
    let need_pi_l = spec.wants(Metric::PiL);
    for gamma in 0..=k {
        let used = gamma == k || need_fwer || (need_pi_l && gamma > 0);
        if !used {
            continue;
        }
        let batch = make_batch(&spec.model, k, gamma, n, evaluation_seed(spec.seed, gamma))?;
        for res in results.iter_mut() {
            let t = tally(res.method, &batch, mu, spec.alpha)?;
            if gamma < k && need_fwer {
                res.fwer.push(Estimate::proportion(t.false_any, n));
            }
            if gamma > 0 && need_pi_l {
                res.pi_l.push(mean_fraction(t.correct, gamma, n));
            }
            if gamma == k {
                res.pi_k = mean_fraction(t.correct, k, n);
                res.pi_any = Estimate::proportion(t.correct_any, n);
            }
        }
    }
    Ok(results)
}

/// The mean of per-sample fractions `x_i / per`, reported with the
/// proportion s.e. over `n` samples.
fn mean_fraction(total: usize, per: usize, n: usize) -> Estimate {
    let value = total as f64 / (per * n) as f64;
    Estimate {
        value,
        se: proportion_se(value, n),
    }
}

/// Fits (when the optimal method is requested) and evaluates.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    spec.validate()?;
    let fit_result = if spec.methods.contains(&Method::Optimal) {
        Some(fit(&spec.model, spec.k, &spec.optimizer_config())?)
    } else {
        None
    };
    let methods = evaluate_methods(spec, fit_result.as_ref().map(|f| &f.mu_hat))?;
    Ok(ExperimentResult {
        spec: spec.clone(),
        methods,
        fit: fit_result.map(FitSummary::from),
    })
}

/// One line of the long-format CSV output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub table: String,
    #[serde(rename = "K")]
    pub k: usize,
    pub alpha: f64,
    pub model: String,
    pub param: String,
    pub method: String,
    pub metric: String,
    pub value: f64,
    pub se: Option<f64>,
    pub seed: u64,
}

pub fn write_csv(rows: &[CsvRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<CsvRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Flattens an experiment result into CSV rows.
pub fn result_rows(table: &str, result: &ExperimentResult) -> Vec<CsvRow> {
    let spec = &result.spec;
    let row = |method: &str, metric: String, value: f64, se: Option<f64>| CsvRow {
        table: table.to_string(),
        k: spec.k,
        alpha: spec.alpha,
        model: spec.model.to_string(),
        param: format!("{}", spec.model.param()),
        method: method.to_string(),
        metric,
        value,
        se,
        seed: spec.seed,
    };
    let mut rows = Vec::new();
    for m in &result.methods {
        let name = m.method.name();
        if spec.wants(Metric::PiK) {
            rows.push(row(name, "pi_K".into(), m.pi_k.value, Some(m.pi_k.se)));
        }
        if spec.wants(Metric::PiAny) {
            rows.push(row(name, "pi_any".into(), m.pi_any.value, Some(m.pi_any.se)));
        }
        for (i, e) in m.pi_l.iter().enumerate() {
            rows.push(row(name, format!("pi_l[{}]", i + 1), e.value, Some(e.se)));
        }
        for (gamma, e) in m.fwer.iter().enumerate() {
            rows.push(row(name, format!("fwer[{gamma}]"), e.value, Some(e.se)));
        }
        if let Some(e) = m.max_fwer() {
            rows.push(row(name, "fwer_max".into(), e.value, Some(e.se)));
        }
    }
    if let Some(f) = &result.fit {
        rows.push(row("optimal", "iterations".into(), f.iterations as f64, None));
        rows.push(row("optimal", "converged".into(), f64::from(u8::from(f.converged)), None));
        for (gamma, m) in f.mu_hat.as_slice().iter().enumerate() {
            rows.push(row("optimal", format!("mu[{gamma}]"), *m, None));
        }
    }
    rows
}

/// A study or endpoint with its observed p-value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Study {
    pub label: String,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMembers {
    pub label: String,
    pub members: Vec<String>,
}

/// A bundled real-data example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApplicationData {
    pub name: String,
    pub alpha: f64,
    pub model: AlternativeModel,
    pub studies: Vec<Study>,
    #[serde(default)]
    pub groups: Vec<GroupMembers>,
}

impl ApplicationData {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn p_values(&self) -> Vec<f64> {
        self.studies.iter().map(|s| s.p).collect()
    }

    /// Splits the studies into their declared groups under `model`.
    pub fn grouped(&self, model: &AlternativeModel) -> Result<Vec<Group>> {
        self.groups
            .iter()
            .map(|g| {
                let p = g
                    .members
                    .iter()
                    .map(|name| {
                        self.studies
                            .iter()
                            .find(|s| &s.label == name)
                            .map(|s| s.p)
                            .ok_or_else(|| Error::Format(format!("unknown group member '{name}'")))
                    })
                    .collect::<Result<Vec<f64>>>()?;
                Ok(Group {
                    label: g.label.clone(),
                    model: *model,
                    p,
                })
            })
            .collect()
    }
}

/// Six borderline social-science replications.
pub fn camerer() -> ApplicationData {
    ApplicationData::from_json(include_str!("../fixtures/camerer.json")).expect("bundled fixture")
}

/// Five cardiovascular endpoints of a blood-pressure trial, in two groups.
pub fn sprint() -> ApplicationData {
    ApplicationData::from_json(include_str!("../fixtures/sprint.json")).expect("bundled fixture")
}

/// Six psychology replications, none individually significant.
pub fn osc() -> ApplicationData {
    ApplicationData::from_json(include_str!("../fixtures/osc.json")).expect("bundled fixture")
}

/// Decisions of every method on one observed p-value vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApplicationOutcome {
    pub model: AlternativeModel,
    pub alpha: f64,
    pub fit: FitSummary,
    pub optimal: Decision,
    pub baselines: Vec<(Method, RejectionSet)>,
}

impl serde::Serialize for RejectionSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.rejected.serialize(s)
    }
}

impl<'de> serde::Deserialize<'de> for RejectionSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rejected = Vec::<bool>::deserialize(d)?;
        let count = rejected.iter().filter(|&&r| r).count();
        Ok(RejectionSet { rejected, count })
    }
}

/// Fits the optimal policy for `p.len()` hypotheses at `cfg.alpha` and
/// applies it and every baseline to `p`.
pub fn apply_all(model: &AlternativeModel, p: &[f64], cfg: &OptimizerConfig) -> Result<ApplicationOutcome> {
    let fitted = fit(model, p.len(), cfg)?;
    let optimal = decide(model, &fitted.mu_hat, p)?;
    let baselines = Method::ALL
        .iter()
        .filter_map(|&m| m.baseline().map(|f| f(p, cfg.alpha).map(|r| (m, r))))
        .collect::<Result<Vec<_>>>()?;
    Ok(ApplicationOutcome {
        model: *model,
        alpha: cfg.alpha,
        fit: fitted.into(),
        optimal,
        baselines,
    })
}

/// An exchangeable group of hypotheses with its own alternative model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Group {
    pub label: String,
    pub model: AlternativeModel,
    pub p: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupOutcome {
    pub label: String,
    /// Level used inside the group.
    pub alpha: f64,
    pub mu: DualVector,
    pub converged: bool,
    pub decision: Decision,
}

/// Input document for the hierarchical workflow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HierarchicalSpec {
    pub alpha: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_n_opt")]
    pub n_opt: usize,
    pub groups: Vec<Group>,
}

/// Fits and applies the optimal policy within each group at level
/// `min(alpha, 1) / G`.
pub fn hierarchical_apply(groups: &[Group], alpha: f64, cfg: &OptimizerConfig) -> Result<Vec<GroupOutcome>> {
    if groups.is_empty() {
        return Err(Error::Parameter("need at least one group".into()));
    }
    if alpha.is_nan() || alpha <= 0.0 {
        return Err(Error::Parameter(format!("alpha must be positive, got {alpha}")));
    }
    let level = alpha.min(1.0) / groups.len() as f64;
    let group_cfg = OptimizerConfig { alpha: level, ..*cfg };
    groups
        .iter()
        .map(|g| {
            if g.p.len() < 2 {
                return Err(Error::Parameter(format!(
                    "group '{}' needs at least 2 hypotheses",
                    g.label
                )));
            }
            let fitted = fit(&g.model, g.p.len(), &group_cfg)?;
            let decision = decide(&g.model, &fitted.mu_hat, &g.p)?;
            Ok(GroupOutcome {
                label: g.label.clone(),
                alpha: level,
                mu: fitted.mu_hat,
                converged: fitted.converged,
                decision,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TableId {
    Scaling,
    AlphaSensitivity,
    NSensitivity,
    Camerer,
    CamererSensitivity,
    Sprint,
    Osc,
}

impl TableId {
    pub const ALL: [TableId; 7] = [
        TableId::Scaling,
        TableId::AlphaSensitivity,
        TableId::NSensitivity,
        TableId::Camerer,
        TableId::CamererSensitivity,
        TableId::Sprint,
        TableId::Osc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TableId::Scaling => "scaling",
            TableId::AlphaSensitivity => "alpha_sensitivity",
            TableId::NSensitivity => "n_sensitivity",
            TableId::Camerer => "camerer",
            TableId::CamererSensitivity => "camerer_sensitivity",
            TableId::Sprint => "sprint",
            TableId::Osc => "osc",
        }
    }
}

impl FromStr for TableId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TableId::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Format(format!("unknown table '{s}'")))
    }
}

impl fmt::Display for TableId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableOptions {
    pub seed: u64,
    /// Restricts K for the scaling table.
    pub ks: Option<Vec<usize>>,
    pub n_eval: usize,
    pub n_opt: usize,
}

impl Default for TableOptions {
    fn default() -> Self {
        TableOptions {
            seed: DEFAULT_SEED,
            ks: None,
            n_eval: default_n_eval(),
            n_opt: default_n_opt(),
        }
    }
}

/// Signal strength used by the simulation tables.
pub fn reference_trunc() -> AlternativeModel {
    AlternativeModel::TruncNormal {
        theta: -2.0,
        bound: crate::densities::DEFAULT_TRUNC_BOUND,
    }
}

fn table_spec(opts: &TableOptions, k: usize, alpha: f64, model: AlternativeModel) -> ExperimentSpec {
    ExperimentSpec {
        n_eval: opts.n_eval,
        n_opt: opts.n_opt,
        seed: opts.seed,
        ..ExperimentSpec::new(k, alpha, model)
    }
}

fn application_rows(table: &str, data: &ApplicationData, outcome: &ApplicationOutcome, seed: u64) -> Vec<CsvRow> {
    let k = data.studies.len();
    let row = |method: &str, metric: String, value: f64| CsvRow {
        table: table.to_string(),
        k,
        alpha: outcome.alpha,
        model: outcome.model.to_string(),
        param: format!("{}", outcome.model.param()),
        method: method.to_string(),
        metric,
        value,
        se: None,
        seed,
    };
    let mut rows = Vec::new();
    let mut push_method = |name: &str, rejected: &[bool]| {
        for (study, &r) in data.studies.iter().zip(rejected) {
            rows.push(row(name, format!("reject:{}", study.label), f64::from(u8::from(r))));
        }
        let count = rejected.iter().filter(|&&r| r).count();
        rows.push(row(name, "rejections".into(), count as f64));
    };
    for (m, r) in &outcome.baselines {
        push_method(m.name(), &r.rejected);
    }
    push_method("optimal", &outcome.optimal.rejected);
    rows
}

/// Runs one table's experiment grid and returns its rows.
pub fn table_rows(id: TableId, opts: &TableOptions) -> Result<Vec<CsvRow>> {
    let table = id.name();
    let mut rows = Vec::new();
    match id {
        TableId::Scaling => {
            let ks = opts.ks.clone().unwrap_or_else(|| vec![3, 4, 5, 6, 8, 10, 12]);
            for k in ks {
                let result = run_experiment(&table_spec(opts, k, 0.05, reference_trunc()))?;
                rows.extend(result_rows(table, &result));
            }
        }
        TableId::AlphaSensitivity => {
            let k = opts.ks.as_ref().and_then(|v| v.first().copied()).unwrap_or(6);
            for alpha in [0.01, 0.05, 0.10] {
                let result = run_experiment(&table_spec(opts, k, alpha, reference_trunc()))?;
                rows.extend(result_rows(table, &result));
            }
        }
        TableId::NSensitivity => {
            let k = opts.ks.as_ref().and_then(|v| v.first().copied()).unwrap_or(6);
            for n_opt in [50_000, 100_000, 200_000] {
                let spec = ExperimentSpec {
                    n_opt,
                    methods: vec![Method::Optimal],
                    ..table_spec(opts, k, 0.05, reference_trunc())
                };
                let result = run_experiment(&spec)?;
                for mut r in result_rows(table, &result) {
                    r.param = format!("n_opt={n_opt}");
                    rows.push(r);
                }
            }
        }
        TableId::Camerer | TableId::Osc => {
            let data = if id == TableId::Camerer { camerer() } else { osc() };
            let cfg = OptimizerConfig {
                alpha: data.alpha,
                n_opt: opts.n_opt,
                seed: opts.seed,
                ..Default::default()
            };
            let outcome = apply_all(&data.model, &data.p_values(), &cfg)?;
            rows.extend(application_rows(table, &data, &outcome, opts.seed));
        }
        TableId::CamererSensitivity => {
            let data = camerer();
            let mut models: Vec<AlternativeModel> = [0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8]
                .iter()
                .map(|&t| AlternativeModel::beta(t))
                .collect::<Result<_>>()?;
            for theta in [-1.0, -1.5, -2.0, -2.5] {
                models.push(AlternativeModel::trunc_normal(theta, crate::densities::DEFAULT_TRUNC_BOUND)?);
            }
            let cfg = OptimizerConfig {
                alpha: data.alpha,
                n_opt: opts.n_opt,
                seed: opts.seed,
                ..Default::default()
            };
            for model in models {
                let outcome = apply_all(&model, &data.p_values(), &cfg)?;
                rows.extend(
                    application_rows(table, &data, &outcome, opts.seed)
                        .into_iter()
                        .filter(|r| r.metric == "rejections"),
                );
            }
        }
        TableId::Sprint => {
            let data = sprint();
            let cfg = OptimizerConfig {
                alpha: data.alpha,
                n_opt: opts.n_opt,
                seed: opts.seed,
                ..Default::default()
            };
            let outcome = apply_all(&data.model, &data.p_values(), &cfg)?;
            rows.extend(application_rows(table, &data, &outcome, opts.seed));
            let groups = data.grouped(&data.model)?;
            for g in hierarchical_apply(&groups, data.alpha, &cfg)? {
                rows.push(CsvRow {
                    table: table.to_string(),
                    k: g.decision.order.len(),
                    alpha: g.alpha,
                    model: data.model.to_string(),
                    param: format!("group={}", g.label),
                    method: "optimal_hierarchical".into(),
                    metric: "l_star".into(),
                    value: g.decision.policy.l_star as f64,
                    se: None,
                    seed: opts.seed,
                });
            }
        }
    }
    Ok(rows)
}

/// Runs one table and writes it to `out`.
pub fn reproduce_table(id: TableId, opts: &TableOptions, out: &Path) -> Result<Vec<CsvRow>> {
    let rows = table_rows(id, opts)?;
    write_csv(&rows, out)?;
    Ok(rows)
}
